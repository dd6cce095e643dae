use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use hybrid_hash::analysis::{complexity_table, simulate_runs};
use hybrid_hash::hashcore::fmix64;
use hybrid_hash::throughput::measure_training_throughput;
use hybrid_hash::train::{evaluate, label_mean, make_synthetic_dataset, train as fit, write_events_file, Manifest, NamespaceSpec, SyntheticSpec};
use hybrid_hash::vocab::{
    build_top_k_with, count_frequencies, load_dictionary, namespaces_of, read_events, save_dictionary, FingerprintCheck, ParseMode, TopKMode,
};
use hybrid_hash::{
    measure_throughput, EmbeddingTable, Event, Featurizer, FrequencyDictionary, HashConfig, Model, Scheme, SchemeParams, ThroughputConfig, TrainConfig,
};

use crate::args::{AnalyzeArgs, BenchArgs, BenchMode, BuildDictArgs, EvalArgs, GenArgs, SimulateArgs, TopK, TrainArgs};
use crate::error::CliError;
use crate::report::{mean_std, num, Report};

fn parse_mode(skip: bool) -> ParseMode {
    if skip {
        ParseMode::Skip
    } else {
        ParseMode::Strict
    }
}

fn top_k_mode(t: TopK) -> TopKMode {
    match t {
        TopK::Global => TopKMode::Global,
        TopK::PerNamespace => TopKMode::PerNamespace,
    }
}

fn to_usize(name: &str, v: u64) -> Result<usize, CliError> {
    usize::try_from(v).map_err(|_| CliError::flag(name, format!("{v} does not fit in memory")))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn parse_namespace(spec: &str) -> Result<NamespaceSpec, CliError> {
    let bad = |why: &str| CliError::flag("namespace", format!("{spec:?}: {why} (expected name:vocab:exponent[:per_event])"));
    let parts: Vec<&str> = spec.split(':').collect();
    if !(3..=4).contains(&parts.len()) {
        return Err(bad("wrong number of fields"));
    }
    let vocab = crate::args::parse_count(parts[1]).map_err(|_| bad("vocab is not a count"))?;
    let exponent: f64 = parts[2].parse().map_err(|_| bad("exponent is not a number"))?;
    let mut ns = NamespaceSpec::new(parts[0], to_usize("namespace", vocab)?, exponent);
    if let Some(p) = parts.get(3) {
        ns.per_event = p.parse().map_err(|_| bad("per_event is not an integer"))?;
    }
    Ok(ns)
}

pub fn gen(a: &GenArgs, out: &mut impl Write) -> Result<(), CliError> {
    let namespaces = if a.namespaces.is_empty() {
        SyntheticSpec::default().namespaces
    } else {
        a.namespaces.iter().map(|s| parse_namespace(s)).collect::<Result<_, _>>()?
    };
    let spec = SyntheticSpec {
        namespaces,
        dense: a.dense.clone(),
        bias: a.bias,
        weight_scale: a.weight_scale,
        weight_seed: a.seed,
        sample_seed: fmix64(a.seed),
    };
    spec.validate()?;
    let n_train = to_usize("events", a.events)?;
    let n_eval = to_usize("eval-events", a.eval_events.unwrap_or(a.events / 5))?;
    let data = make_synthetic_dataset(&spec, n_train + n_eval)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(format!("{}: {e}", a.out_dir.display())))?;
    let (train_ev, eval_ev) = data.events.split_at(n_train);
    let (train_p, eval_p) = data.probabilities.split_at(n_train);
    let paths = [a.out_dir.join("train.txt"), a.out_dir.join("eval.txt"), a.out_dir.join("manifest.txt")];
    write_events_file(&paths[0], train_ev, &format!("synthetic train split, seed {}", a.seed))?;
    write_events_file(&paths[1], eval_ev, &format!("synthetic eval split, seed {}", a.seed))?;

    let (mt, me) = (Manifest::of_slices(train_ev, train_p), Manifest::of_slices(eval_ev, eval_p));
    let ns: Vec<String> = spec
        .namespaces
        .iter()
        .map(|n| format!("{}:{}:{}:{}", n.name, n.vocab, n.exponent, n.per_event))
        .collect();
    let mut w = create(&paths[2])?;
    writeln!(w, "# synthetic dataset manifest")?;
    writeln!(w, "weight_seed={}\nsample_seed={}", spec.weight_seed, spec.sample_seed)?;
    writeln!(w, "bias={}\nweight_scale={}", spec.bias, spec.weight_scale)?;
    writeln!(w, "namespaces={}\ndense={}", ns.join(","), spec.dense.join(","))?;
    for (split, m) in [("train", mt), ("eval", me)] {
        writeln!(w, "{split}_events={}", m.events)?;
        writeln!(w, "{split}_label_mean={}", m.label_mean)?;
        writeln!(w, "{split}_mean_probability={}", m.mean_probability)?;
    }
    w.flush()?;

    let mut r = Report::new(&["train", "eval", "manifest", "train_events", "eval_events", "train_label_mean"]);
    r.push(vec![
        paths[0].display().to_string(),
        paths[1].display().to_string(),
        paths[2].display().to_string(),
        mt.events.to_string(),
        me.events.to_string(),
        num(mt.label_mean),
    ]);
    r.write(crate::args::Format::Kv, out)
}

pub fn build_dict(a: &BuildDictArgs, out: &mut impl Write) -> Result<(), CliError> {
    let config = HashConfig::new(a.bits, a.seeds.seed1, a.seeds.seed2)?;
    let k = to_usize("k", a.k)?;
    let events = read_events(&a.input, parse_mode(a.skip_bad_lines))?;
    let featurizer = Featurizer::fit(&events, a.bins)?;
    let counts = count_frequencies(&events, &featurizer)?;
    let dict = build_top_k_with(&counts, k, &config, top_k_mode(a.top_k));
    save_dictionary(&dict, &a.out)?;
    let mut r = Report::new(&["out", "k", "distinct", "occurrences", "coverage", "fingerprint"]);
    r.push(vec![
        a.out.display().to_string(),
        dict.k().to_string(),
        counts.len().to_string(),
        counts.total().to_string(),
        num(counts.coverage(&dict)),
        format!("{:016x}", dict.fingerprint()),
    ]);
    r.write(a.format, out)
}

pub fn analyze(a: &AnalyzeArgs, out: &mut impl Write) -> Result<(), CliError> {
    if a.k > a.n {
        return Err(CliError::flag("k", format!("{} exceeds --n {}", a.k, a.n)));
    }
    let bins = 1u64 << a.bits;
    let params = a
        .schemes
        .iter()
        .map(|&s| SchemeParams::new(s, a.n, bins, a.k))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = complexity_table(&params, a.dim as u64)?;
    let mut r = Report::new(&["scheme", "n", "bins", "k", "dim", "rows", "parameters", "space", "time", "collision_rate"]);
    for row in rows {
        r.push(vec![
            row.scheme.to_string(),
            row.n.to_string(),
            row.bins.to_string(),
            row.k.to_string(),
            row.dim.to_string(),
            row.rows.to_string(),
            row.parameters.to_string(),
            row.space.to_string(),
            row.time.to_string(),
            num(row.collision_rate),
        ]);
    }
    r.write(a.format, out)
}

pub fn simulate(a: &SimulateArgs, out: &mut impl Write) -> Result<(), CliError> {
    if a.k > a.n {
        return Err(CliError::flag("k", format!("{} exceeds --n {}", a.k, a.n)));
    }
    let config = HashConfig::new(a.bits, a.seeds.seed1, a.seeds.seed2)?;
    let mut r = Report::new(&[
        "scheme",
        "run",
        "key_seed",
        "n",
        "bins",
        "k",
        "code_space",
        "analytic_rate",
        "analytic_expected",
        "empirical_full",
        "empirical_half",
        "empirical_rate_full",
        "empirical_rate_half",
        "occupied_slots",
    ]);
    for &scheme in &a.schemes {
        let k = if scheme.uses_dictionary() { a.k } else { 0 };
        let params = SchemeParams::new(scheme, a.n, config.bins(), k)?;
        for (run, rep) in simulate_runs(&params, &config, a.runs as u32, a.key_seed)?.into_iter().enumerate() {
            r.push(vec![
                scheme.to_string(),
                run.to_string(),
                a.key_seed.wrapping_add(run as u64).to_string(),
                rep.trials_n.to_string(),
                rep.bins.to_string(),
                k.to_string(),
                num(rep.code_space),
                num(rep.analytic_rate),
                num(rep.analytic_expected),
                rep.empirical_full.to_string(),
                rep.empirical_half.to_string(),
                num(rep.empirical_rate_full),
                num(rep.empirical_rate_half),
                rep.occupied_slots.to_string(),
            ]);
        }
    }
    r.write(a.format, out)
}

/// One table shape of a training sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Shape {
    scheme: Scheme,
    k: usize,
    bits: u32,
}

fn sweep(a: &TrainArgs, dict: Option<&FrequencyDictionary>) -> Result<Vec<Shape>, CliError> {
    let (ks, bits): (Vec<usize>, Vec<u32>) = match dict {
        Some(d) => (vec![d.k()], vec![d.hash_config().bits()]),
        None => (
            a.table.k.iter().map(|&k| to_usize("k", k)).collect::<Result<_, _>>()?,
            a.table.bits.clone(),
        ),
    };
    let mut shapes: Vec<Shape> = Vec::new();
    for &scheme in &a.table.schemes {
        let ks: &[usize] = if scheme.uses_dictionary() { &ks } else { &[0] };
        let bits: &[u32] = if scheme == Scheme::Frequency { &bits[..1] } else { &bits };
        for &k in ks {
            for &b in bits {
                let s = Shape { scheme, k, bits: b };
                if !shapes.contains(&s) {
                    shapes.push(s);
                }
            }
        }
    }
    Ok(shapes)
}

struct Run {
    model: Model,
    train_loss: f64,
    eval: Option<(f64, f64)>,
}

pub fn train(a: &TrainArgs, out: &mut impl Write) -> Result<(), CliError> {
    let base_config = TrainConfig {
        learning_rate: a.lr,
        batch_size: a.batch_size,
        epochs: a.epochs,
        model: a.head,
        seed: a.seed,
        shuffle: !a.no_shuffle,
    };
    if !(a.lr.is_finite() && a.lr > 0.0) {
        return Err(CliError::flag("lr", "must be a positive number"));
    }
    if a.epochs == 0 {
        return Err(CliError::flag("epochs", "must be at least 1"));
    }
    base_config.validate()?;
    let mode = parse_mode(a.skip_bad_lines);
    let dict = a
        .table
        .dict
        .as_ref()
        .map(|p| load_dictionary(p, None, FingerprintCheck::Error).map(Arc::new))
        .transpose()?;
    let shapes = sweep(a, dict.as_deref())?;
    if a.model_out.is_some() && (shapes.len() > 1 || a.repeat > 1 || a.baseline) {
        return Err(CliError::flag("model-out", "needs a single configuration, --repeat 1 and no --baseline"));
    }

    let train_events = read_events(&a.train, mode)?;
    if train_events.is_empty() {
        return Err(CliError::flag("train", "file holds no events"));
    }
    let eval_events = a.eval.as_ref().map(|p| read_events(p, mode)).transpose()?;
    if eval_events.as_ref().is_some_and(Vec::is_empty) {
        return Err(CliError::flag("eval", "file holds no events"));
    }
    let featurizer = Featurizer::fit(&train_events, a.bins)?;
    let mut all: Vec<&Event> = train_events.iter().collect();
    all.extend(eval_events.iter().flatten());
    let namespaces = namespaces_of(&all);
    let counts = count_frequencies(&train_events, &featurizer)?;
    let base = label_mean(train_events.iter().map(|e| e.label))?;

    // The baseline always counts the training file, even when a dictionary is loaded.
    let run_one = |shape: Shape, seed: u64, is_baseline: bool| -> Result<Run, CliError> {
        let loaded = dict.as_ref().filter(|_| !is_baseline);
        let hash = match loaded {
            Some(d) => *d.hash_config(),
            None => HashConfig::new(shape.bits, a.table.seeds.seed1, a.table.seeds.seed2)?,
        };
        let table_dict = if !shape.scheme.uses_dictionary() {
            Arc::new(FrequencyDictionary::empty(hash))
        } else if let Some(d) = loaded {
            Arc::clone(d)
        } else {
            Arc::new(build_top_k_with(&counts, shape.k, &hash, top_k_mode(a.table.top_k)))
        };
        let table = EmbeddingTable::new(shape.scheme, table_dict, a.table.dim, a.table.aggregation, a.table.layout, seed)?;
        let mut model = Model::new(table, featurizer.clone(), namespaces.clone(), a.head, seed)?;
        let examples = model.prepare_all(&train_events)?;
        let report = fit(&mut model, &examples, &TrainConfig { seed, ..base_config })?;
        let eval = match &eval_events {
            Some(ev) => {
                let r = evaluate(&model, &model.prepare_all(ev)?, base)?;
                Some((r.cross_entropy, r.rce))
            }
            None => None,
        };
        Ok(Run {
            train_loss: *report.epoch_losses.last().expect("at least one epoch"),
            eval,
            model,
        })
    };

    let mut shapes_with_baseline = Vec::new();
    if a.baseline {
        let bits = a.table.bits.first().copied().unwrap_or(1);
        shapes_with_baseline.push((Shape { scheme: Scheme::Frequency, k: counts.len(), bits }, true));
    }
    shapes_with_baseline.extend(shapes.iter().map(|&s| (s, false)));

    let mut r = Report::new(&[
        "scheme",
        "k",
        "bits",
        "dim",
        "aggregation",
        "layout",
        "head",
        "embedding_parameters",
        "parameters",
        "param_ratio",
        "runs",
        "train_loss",
        "eval_ce",
        "eval_rce",
    ]);
    let mut baseline_params = None;
    let mut saved = None;
    for (shape, is_baseline) in shapes_with_baseline {
        let runs = (0..a.repeat)
            .map(|i| run_one(shape, a.seed.wrapping_add(i as u64), is_baseline))
            .collect::<Result<Vec<_>, _>>()?;
        let first = &runs[0].model;
        let params = first.parameter_count();
        if is_baseline {
            baseline_params = Some(params);
        }
        let ratio = baseline_params.map_or("-".to_string(), |b| format!("{:.4}", params as f64 / b as f64));
        let losses: Vec<f64> = runs.iter().map(|r| r.train_loss).collect();
        let (ce, rce): (Vec<f64>, Vec<f64>) = runs.iter().filter_map(|r| r.eval).unzip();
        let table = first.table();
        r.push(vec![
            shape.scheme.to_string(),
            table.dictionary().k().to_string(),
            if shape.scheme == Scheme::Frequency { "-".into() } else { table.dictionary().hash_config().bits().to_string() },
            table.dim().to_string(),
            table.aggregation().to_string(),
            table.layout().to_string(),
            first.head().to_string(),
            table.size().to_string(),
            params.to_string(),
            ratio,
            runs.len().to_string(),
            mean_std(&losses),
            if ce.is_empty() { "-".into() } else { mean_std(&ce) },
            if rce.is_empty() { "-".into() } else { mean_std(&rce) },
        ]);
        if a.model_out.is_some() {
            saved = runs.into_iter().next().map(|r| r.model);
        }
    }
    if let (Some(path), Some(model)) = (&a.model_out, saved) {
        let mut w = create(path)?;
        model.write_to(&mut w)?;
        w.flush()?;
        let d = model.table().dictionary();
        if !d.is_empty() {
            let dict_path = a.dict_out.clone().unwrap_or_else(|| {
                let mut p = path.clone().into_os_string();
                p.push(".dict");
                PathBuf::from(p)
            });
            save_dictionary(d, &dict_path)?;
        }
    }
    r.write(a.format, out)
}

pub fn eval(a: &EvalArgs, out: &mut impl Write) -> Result<(), CliError> {
    if let Some(b) = a.base_rate {
        if !(b > 0.0 && b < 1.0) {
            return Err(CliError::flag("base-rate", "must lie strictly between 0 and 1"));
        }
    }
    let dict = a
        .dict
        .as_ref()
        .map(|p| load_dictionary(p, None, FingerprintCheck::Error).map(Arc::new))
        .transpose()?;
    let model = Model::read_from(open(&a.model)?, dict)?;
    let events = read_events(&a.data, parse_mode(a.skip_bad_lines))?;
    if events.is_empty() {
        return Err(CliError::flag("data", "file holds no events"));
    }
    let examples = model.prepare_all(&events)?;
    let base = match a.base_rate {
        Some(b) => b,
        None => label_mean(events.iter().map(|e| e.label))?,
    };
    if !(base > 0.0 && base < 1.0) {
        return Err(CliError::flag("base-rate", format!("data label mean is {base}; pass a base rate in (0, 1)")));
    }
    let result = evaluate(&model, &examples, base)?;
    if let Some(path) = &a.predictions {
        let mut w = create(path)?;
        for p in model.predict_all(&examples) {
            writeln!(w, "{p}")?;
        }
        w.flush()?;
    }
    let mut r = Report::new(&["examples", "cross_entropy", "rce", "base_rate"]);
    r.push(vec![
        result.n_examples.to_string(),
        num(result.cross_entropy),
        num(result.rce),
        num(result.base_rate),
    ]);
    r.write(a.format, out)
}

pub fn bench(a: &BenchArgs, out: &mut impl Write) -> Result<(), CliError> {
    if a.trials < 5 {
        return Err(CliError::flag("trials", "at least 5 trials are needed for p10/p90"));
    }
    if let Some(c) = a.coverage {
        if !(c > 0.0 && c <= 1.0) {
            return Err(CliError::flag("coverage", "must lie in (0, 1]"));
        }
    }
    if !(a.zipf.is_finite() && a.zipf > 0.0) {
        return Err(CliError::flag("zipf", "exponent must be positive"));
    }
    let cfg = ThroughputConfig {
        schemes: a.schemes.clone(),
        keys: to_usize("keys", a.keys)?,
        vocab: to_usize("vocab", a.vocab)?,
        exponent: a.zipf,
        bits: a.bits,
        k: to_usize("k", a.k)?,
        coverage: a.coverage,
        dim: a.dim,
        iterations: a.iterations,
        warmup: a.warmup,
        trials: a.trials,
        seed: a.seed,
    };
    let (stats, unit) = match a.mode {
        BenchMode::Lookup => (measure_throughput(&cfg)?, "lookups_per_s"),
        BenchMode::Train => (measure_training_throughput(&cfg, a.batch_size)?, "steps_per_s"),
    };
    let regular = stats.iter().find(|s| s.scheme == Scheme::Regular).map(|s| s.median);
    let mut r = Report::new(&["scheme", "unit", "median", "p10", "p90", "relative_to_regular", "hit_fraction", "trials"]);
    for s in &stats {
        r.push(vec![
            s.scheme.to_string(),
            unit.to_string(),
            format!("{:.0}", s.median),
            format!("{:.0}", s.p10),
            format!("{:.0}", s.p90),
            regular.map_or("-".into(), |reg| format!("{:.3}", s.median / reg)),
            format!("{:.4}", s.hit_fraction),
            s.trials.len().to_string(),
        ]);
    }
    r.write(a.format, out)
}
