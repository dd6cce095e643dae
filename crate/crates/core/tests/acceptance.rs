//! Acceptance suite.
//!
//! Runs every criterion in sequence (timing-sensitive checks must not share
//! the machine with other tests), prints one `PASS`/`FAIL` line per
//! criterion and exits nonzero if any failed. Each criterion also has a
//! runtime budget that counts towards its verdict.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hybrid_hash::analysis::{collision_rate, p_collision_approx, p_collision_exact, simulate_runs, ApproxForm};
use hybrid_hash::embed::{RowRef, TableId};
use hybrid_hash::throughput::measure_throughput;
use hybrid_hash::train::compare::{plan_budget, run_scheme};
use hybrid_hash::train::{evaluate_predictions, make_synthetic_dataset, train, write_events_file, Gradients, SyntheticSpec};
use hybrid_hash::vocab::{count_frequencies, BinBoundaries, FrequencyDictionary};
use hybrid_hash::{
    build_top_k, Aggregation, EmbeddingTable, Event, Example, FeatureKey, Featurizer, FrequencyCounts, HashConfig, HashLayout, Model, ModelHead,
    Scheme, SchemeParams, Summary, ThroughputConfig, TrainConfig,
};

type Check = fn() -> (bool, String);

struct Criterion {
    id: u8,
    name: &'static str,
    budget: Duration,
    check: Check,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "collision-rate anchor", budget: Duration::from_secs(1), check: c1_collision_anchor },
        Criterion { id: 2, name: "birthday cross-check", budget: Duration::from_secs(1), check: c2_birthday },
        Criterion { id: 3, name: "simulation/formula agreement", budget: Duration::from_secs(30), check: c3_simulation },
        Criterion { id: 4, name: "scheme ordering", budget: Duration::from_secs(1), check: c4_ordering },
        Criterion { id: 5, name: "gradient correctness", budget: Duration::from_secs(10), check: c5_gradients },
        Criterion { id: 6, name: "compression at parity", budget: Duration::from_secs(300), check: c6_compression },
        Criterion { id: 7, name: "throughput direction", budget: Duration::from_secs(60), check: c7_throughput },
        Criterion { id: 8, name: "determinism and round-trips", budget: Duration::from_secs(60), check: c8_determinism },
        Criterion { id: 9, name: "RCE anchors", budget: Duration::from_secs(1), check: c9_rce },
    ];
    let mut failed = Vec::new();
    for c in &criteria {
        let start = Instant::now();
        let (ok, detail) = (c.check)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.budget;
        let pass = ok && in_time;
        let timing = if in_time {
            format!("{:.2?}", elapsed)
        } else {
            format!("{:.2?} over the {:?} budget", elapsed, c.budget)
        };
        println!("{} [{}] {} ({timing}): {detail}", if pass { "PASS" } else { "FAIL" }, c.id, c.name);
        if !pass {
            failed.push(c.id);
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}

fn c1_collision_anchor() -> (bool, String) {
    let (n, b) = (4_000_000u64, 1u64 << 22);
    let rate = collision_rate(&SchemeParams::new(Scheme::Regular, n, b, 0).unwrap()).unwrap();
    // E[collisions] / B with E = n - B + B (1 - 1/B)^n.
    let bf = b as f64;
    let oracle = (n as f64 - bf + bf * (1.0 - 1.0 / bf).powi(n as i32)) / bf;
    let ok = (0.335..=0.345).contains(&rate) && (rate - oracle).abs() < 1e-9;
    (ok, format!("rate {rate:.6} (oracle {oracle:.6}, window [0.335, 0.345])"))
}

fn birthday_product(n: u64, days: f64) -> f64 {
    1.0 - (0..n).map(|i| 1.0 - i as f64 / days).product::<f64>()
}

fn c2_birthday() -> (bool, String) {
    let p = p_collision_exact(23, 365.0);
    let oracle = birthday_product(23, 365.0);
    let anchor = (p - 0.5073).abs() <= 1e-4 && (p - oracle).abs() < 1e-12;

    let (mut points, mut worst) = (0, (0.0f64, 0u64, 0.0f64));
    for b in [400.0, 512.0, 1024.0, 4096.0, 1e4, 1e5, 1e6] {
        for n in (1..=1000u64).step_by(7) {
            if (n * n) as f64 / b > 10.0 {
                continue;
            }
            let gap = (p_collision_exact(n, b) - p_collision_approx(n, b, ApproxForm::Pairs)).abs();
            if gap > worst.0 {
                worst = (gap, n, b);
            }
            points += 1;
        }
    }
    // Below B ~ 375 the n(n-1) form drifts past 0.01 inside n^2/B <= 10.
    let small = (p_collision_exact(8, 16.0) - p_collision_approx(8, 16.0, ApproxForm::Pairs)).abs();
    let ok = anchor && worst.0 <= 0.01;
    (
        ok,
        format!(
            "p(23, 365) = {p:.6} (product oracle {oracle:.6}); n(n-1) form on {points} grid points with B >= 400, worst gap {:.4} at n={} B={}; excluded small-B gap at n=8 B=16: {small:.3}",
            worst.0, worst.1, worst.2
        ),
    )
}

fn c3_simulation() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (scheme, bits) in [(Scheme::Regular, 17), (Scheme::Double, 12)] {
        let config = HashConfig::with_default_seeds(bits).unwrap();
        let params = SchemeParams::new(scheme, 100_000, config.bins(), 0).unwrap();
        let runs = simulate_runs(&params, &config, 30, 1_000).unwrap();
        let rates: Vec<f64> = runs.iter().map(|r| r.empirical_rate_full).collect();
        let s = Summary::of(&rates);
        let analytic = runs[0].analytic_rate;
        let inside = s.contains(analytic, 3.0);
        ok &= inside;
        parts.push(format!(
            "{scheme} B=2^{bits}: empirical {:.4e}±{:.1e}, analytic {analytic:.4e}, {:.2} sd",
            s.mean,
            s.std,
            (analytic - s.mean).abs() / s.std
        ));
    }
    (ok, parts.join("; "))
}

fn c4_ordering() -> (bool, String) {
    let rate = |s, n, bits: u32, k| collision_rate(&SchemeParams::new(s, n, 1u64 << bits, k).unwrap()).unwrap();
    let (mut points, mut violations) = (0, Vec::new());
    for n in [1_000u64, 10_000, 100_000, 1_000_000, 4_000_000] {
        for bits in [10u32, 14, 18, 22, 26] {
            for frac in [0.0, 0.01, 0.1, 0.5, 0.9, 1.0] {
                let k = (n as f64 * frac) as u64;
                let (h, d, r) = (rate(Scheme::Hybrid, n, bits, k), rate(Scheme::Double, n, bits, k), rate(Scheme::Regular, n, bits, k));
                if !(h <= d && d <= r) {
                    violations.push(format!("n={n} bits={bits} k={k}: {h} {d} {r}"));
                }
                if k == n && (rate(Scheme::Frequency, n, bits, k) != 0.0 || h != 0.0) {
                    violations.push(format!("n={n} bits={bits} k=n: nonzero frequency-backed rate"));
                }
                points += 1;
            }
        }
    }
    (violations.is_empty(), format!("{points} grid points, {} violations {violations:?}", violations.len()))
}

/// Hybrid model over a multi-valued namespace `a`, a single-valued `b` and a
/// binned continuous `p`, with a dictionary holding some `a`/`b` values.
fn gradient_instance(seed: u64, agg: Aggregation, head: ModelHead) -> (Model, Vec<Example>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = HashConfig::with_default_seeds(3).unwrap();
    let mut counts = FrequencyCounts::new();
    for v in 0..4u64 {
        counts.add(FeatureKey::new("a", format!("{v}")).unwrap(), 20 + v);
        counts.add(FeatureKey::new("b", format!("{v}")).unwrap(), 10 + v);
    }
    let dict = Arc::new(build_top_k(&counts, 5, &config));
    let table = EmbeddingTable::new(Scheme::Hybrid, dict, 3, agg, HashLayout::Shared, rng.random()).unwrap();
    let featurizer = Featurizer::new([BinBoundaries::new("p", vec![-0.5, 0.5, 1.5]).unwrap()]);
    let mut model = Model::new(table, featurizer, vec!["a".into(), "b".into(), "p".into()], head, rng.random()).unwrap();
    for w in model.head_params_mut() {
        *w += rng.random_range(-0.3..0.3);
    }
    let events: Vec<Event> = (0..rng.random_range(1..4))
        .map(|_| {
            let mut e = Event::new(rng.random_range(0..2));
            for _ in 0..rng.random_range(1..4) {
                e.sparse.push(FeatureKey::new("a", format!("{}", rng.random_range(0..9))).unwrap());
            }
            e.sparse.push(FeatureKey::new("b", format!("{}", rng.random_range(0..9))).unwrap());
            e.dense.push(("p".into(), rng.random_range(-1.0..2.0)));
            e
        })
        .collect();
    let examples = model.prepare_all(&events).unwrap();
    (model, examples)
}

fn central_difference(model: &mut Model, batch: &[Example], set: impl Fn(&mut Model, f64), orig: f64) -> f64 {
    const EPS: f64 = 1e-4;
    set(model, orig + EPS);
    let up = model.loss(batch);
    set(model, orig - EPS);
    let down = model.loss(batch);
    set(model, orig);
    (up - down) / (2.0 * EPS)
}

fn rel_err(a: f64, n: f64) -> f64 {
    if a == 0.0 && n == 0.0 {
        0.0
    } else {
        (a - n).abs() / a.abs().max(n.abs())
    }
}

fn c5_gradients() -> (bool, String) {
    let (mut instances, mut coords, mut worst) = (0, 0, 0.0f64);
    let (mut frequent_rows, mut hashed_rows) = (0, 0);
    let mut per_agg = [0usize; 2];
    for seed in 0..15u64 {
        for (ai, agg) in [Aggregation::Sum, Aggregation::Concat].into_iter().enumerate() {
            for head in [ModelHead::LogisticBilinear, ModelHead::OneHiddenLayer(3)] {
                let (mut m, batch) = gradient_instance(10_000 + seed, agg, head);
                let mut g = Gradients::default();
                m.loss_and_grad(&batch, &mut g).unwrap();
                for i in 0..g.head.len() {
                    let orig = m.head_params()[i];
                    let num = central_difference(&mut m, &batch, |m, v| m.head_params_mut()[i] = v, orig);
                    worst = worst.max(rel_err(g.head[i], num));
                    coords += 1;
                }
                let rows: Vec<(RowRef, Vec<f64>)> = g.rows.iter().map(|(r, v)| (*r, v.to_vec())).collect();
                for (r, grad) in rows {
                    match r.table {
                        TableId::Frequent => frequent_rows += 1,
                        TableId::Hashed => hashed_rows += 1,
                    }
                    for (j, &a) in grad.iter().enumerate() {
                        let orig = m.table().row(r)[j];
                        let num = central_difference(&mut m, &batch, |m, v| m.table_mut().row_mut(r)[j] = v, orig);
                        worst = worst.max(rel_err(a, num));
                        coords += 1;
                    }
                }
                instances += 1;
                per_agg[ai] += 1;
            }
        }
    }
    let ok = worst < 1e-5 && instances >= 50 && frequent_rows > 0 && hashed_rows > 0 && per_agg.iter().all(|&c| c > 0);
    (
        ok,
        format!(
            "{instances} instances (sum {}, concat {}), {coords} coordinates, rows: {frequent_rows} frequent / {hashed_rows} hashed, worst relative error {worst:.2e} (limit 1e-5, eps 1e-4)",
            per_agg[0], per_agg[1]
        ),
    )
}

fn c6_compression() -> (bool, String) {
    let mut wins = 0;
    let mut lines = Vec::new();
    for s in 0..5u64 {
        let spec = SyntheticSpec {
            weight_seed: 100 + s,
            sample_seed: 200 + s,
            ..SyntheticSpec::default()
        };
        let data = make_synthetic_dataset(&spec, 120_000).unwrap();
        let (train_ev, eval_ev) = data.events.split_at(100_000);
        let featurizer = Featurizer::fit(train_ev, 10).unwrap();
        let counts = count_frequencies(train_ev, &featurizer).unwrap();
        let plan = plan_budget(&counts, 8, 0.8, 0.1).unwrap();
        let config = TrainConfig {
            learning_rate: 1.0,
            batch_size: 128,
            epochs: 3,
            model: ModelHead::LogisticBilinear,
            seed: s,
            shuffle: true,
        };
        let hash = HashConfig::with_default_seeds(plan.hybrid.bits).unwrap();
        let names = spec.namespace_names();
        let run = |setup| run_scheme(setup, &counts, &featurizer, &names, train_ev, eval_ev, &config, &hash, s).unwrap().1;
        let (base, hybrid, regular) = (run(&plan.baseline), run(&plan.hybrid), run(&plan.regular));
        let ratio = hybrid.embedding_parameters as f64 / base.embedding_parameters as f64;
        let reg_ratio = regular.embedding_parameters as f64 / base.embedding_parameters as f64;
        let near = (hybrid.eval.rce - base.eval.rce).abs() <= 0.5;
        let beats = hybrid.eval.rce > regular.eval.rce;
        let sized = (ratio - 0.1).abs() <= 0.005;
        if near && beats && sized {
            wins += 1;
        }
        lines.push(format!(
            "seed {s}: hybrid {:.3} (k={} B=2^{}, {:.1}%) vs baseline {:.3}, regular {:.3} ({:.1}%)",
            hybrid.eval.rce,
            plan.hybrid.k,
            plan.hybrid.bits,
            100.0 * ratio,
            base.eval.rce,
            regular.eval.rce,
            100.0 * reg_ratio
        ));
    }
    (wins >= 4, format!("{wins}/5 seeds within 0.5 RCE of baseline and above regular [{}]", lines.join("; ")))
}

fn c7_throughput() -> (bool, String) {
    let cfg = ThroughputConfig {
        coverage: Some(0.9),
        ..ThroughputConfig::default()
    };
    let stats = measure_throughput(&cfg).unwrap();
    let get = |s: Scheme| stats.iter().find(|t| t.scheme == s).unwrap();
    let (reg, dbl, hyb) = (get(Scheme::Regular), get(Scheme::Double), get(Scheme::Hybrid));
    let double_slower = dbl.median < reg.median;
    let hybrid_ratio = hyb.median / reg.median;
    let ok = double_slower && hyb.hit_fraction >= 0.9 && hybrid_ratio >= 0.9;
    (
        ok,
        format!(
            "median lookups/s: regular {:.3e}, double {:.3e} ({:.2}x), hybrid {:.3e} ({:.2}x, hit mass {:.3}); need double < regular and hybrid >= 0.90x",
            reg.median,
            dbl.median,
            dbl.median / reg.median,
            hyb.median,
            hybrid_ratio,
            hyb.hit_fraction
        ),
    )
}

fn model_bytes(m: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    m.write_to(&mut out).unwrap();
    out
}

fn dict_bytes(d: &FrequencyDictionary) -> Vec<u8> {
    let mut out = Vec::new();
    d.write_to(&mut out).unwrap();
    out
}

fn c8_determinism() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        dense: vec!["price".into()],
        ..SyntheticSpec::default()
    };
    let gen = |name: &str| {
        let data = make_synthetic_dataset(&spec, 5_000).unwrap();
        let path = dir.path().join(name);
        write_events_file(&path, &data.events, "determinism").unwrap();
        (data, std::fs::read(path).unwrap())
    };
    let ((d1, f1), (d2, f2)) = (gen("a.txt"), gen("b.txt"));
    let dataset = d1 == d2 && f1 == f2;

    let featurizer = Featurizer::fit(&d1.events, 10).unwrap();
    let config = HashConfig::with_default_seeds(10).unwrap();
    let build = || build_top_k(&count_frequencies(&d1.events, &featurizer).unwrap(), 500, &config);
    let (dict, again) = (build(), build());
    let bytes = dict_bytes(&dict);
    let dict_build = dict == again && bytes == dict_bytes(&again);
    let reloaded = FrequencyDictionary::read_from(bytes.as_slice()).unwrap();
    let dict_trip = reloaded == dict && dict_bytes(&reloaded) == bytes;

    let dict = Arc::new(dict);
    let fit = || {
        let table = EmbeddingTable::new(Scheme::Hybrid, Arc::clone(&dict), 4, Aggregation::Concat, HashLayout::Disjoint, 3).unwrap();
        let mut m = Model::new(table, featurizer.clone(), spec.namespace_names(), ModelHead::OneHiddenLayer(4), 3).unwrap();
        let ex = m.prepare_all(&d1.events).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.1,
            epochs: 2,
            seed: 9,
            ..TrainConfig::default()
        };
        let report = train(&mut m, &ex, &cfg).unwrap();
        (m, report)
    };
    let ((m1, r1), (m2, r2)) = (fit(), fit());
    let trained = m1 == m2 && r1 == r2;
    let mb = model_bytes(&m1);
    let loaded = Model::read_from(mb.as_slice(), Some(Arc::clone(&dict))).unwrap();
    let checkpoint = model_bytes(&loaded) == mb;

    let ok = dataset && dict_build && dict_trip && trained && checkpoint;
    (
        ok,
        format!(
            "dataset {dataset}, dictionary build {dict_build}, dictionary round-trip {dict_trip}, training {trained}, checkpoint round-trip {checkpoint} ({} bytes)",
            mb.len()
        ),
    )
}

fn c9_rce() -> (bool, String) {
    let mut exact = true;
    for (pos, n) in [(3u32, 10u32), (1, 7), (5, 8), (250, 1000), (1, 3)] {
        let base = pos as f64 / n as f64;
        let pairs = (0..n).map(|i| (u8::from(i < pos), base));
        exact &= evaluate_predictions(pairs, base).unwrap().rce == 0.0;
    }
    let r = evaluate_predictions([(1, 0.8), (0, 0.2)], 0.5).unwrap().rce;
    let oracle = (1.0 - (-(0.8f64).ln()) / std::f64::consts::LN_2) * 100.0;
    let ok = exact && (r - 67.81).abs() <= 0.01 && (r - oracle).abs() < 1e-9;
    (ok, format!("base-rate predictor exactly 0: {exact}; hand case {r:.4} (oracle {oracle:.4}, target 67.81 ± 0.01)"))
}
