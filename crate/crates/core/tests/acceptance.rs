//! Acceptance suite: one PASS/FAIL line per criterion. Tolerances and time
//! budgets are pinned below.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use fpplab::dist::DistributionSpec;
use fpplab::experiment::{replay_file, run, run_to_dir, ExperimentConfig, ExperimentKind, RunRecord, Verdict};
use fpplab::field::{EdgeField, FieldKey};
use fpplab::fpp::{default_margin, mu_estimate, travel_time};
use fpplab::isoperimetry::{cheeger_exact, hausdorff, wulff_exact, wulff_shape, ConvexShape, ExactNormTable, NormTable};
use fpplab::lattice::{animal_size_bound, path_animal, LatticePath, MacroIndex, Region, Vertex, Window};
use fpplab::renorm::{classify_indices, RenormParams};
use fpplab::rightmost::b_distance;
use num_rational::BigRational;
use num_traits::FromPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0xACCE_0001;

struct Check {
    passed: bool,
    detail: String,
}

fn check(passed: bool, detail: impl Into<String>) -> Check {
    Check { passed, detail: detail.into() }
}

fn seconds(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn config(kind: ExperimentKind, patch: serde_json::Value) -> ExperimentConfig {
    ExperimentConfig::defaults(kind).merged(patch).expect("valid config")
}

fn run_config(kind: ExperimentKind, patch: serde_json::Value) -> RunRecord {
    run(&config(kind, patch), 1).expect("run succeeds").0
}

fn truncation_config() -> ExperimentConfig {
    config(ExperimentKind::Truncation, serde_json::json!({ "replicas": 200 }))
}

fn good_trend_config() -> ExperimentConfig {
    config(ExperimentKind::BoxClassify, serde_json::json!({ "replicas": 200, "scales": [4, 10] }))
}

fn agg(r: &RunRecord, key: &str) -> f64 {
    r.aggregate(key).unwrap_or_else(|| panic!("aggregate {key} missing"))
}

fn shortest_paths() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let region = Region::new(vec![0, 0], vec![3, 3]).unwrap();
    let mut equal = 0;
    let mut detail = String::new();
    for r in 0..200u64 {
        let law = common::random_law(&mut rng, 3);
        let field = EdgeField::generate_in(FieldKey::new(SEED, r), region.clone());
        let view = field.time_view(&law);
        let a = rng.gen_range(0..16);
        let b = rng.gen_range(0..16);
        let fast = travel_time(&view, &region.vertex(a), &region.vertex(b)).unwrap().time;
        let slow = common::exhaustive_travel_time(&region, &view.times(), a, b);
        if fast == slow || (fast.is_infinite() && slow.is_infinite()) {
            equal += 1;
        } else if detail.is_empty() {
            detail = format!("; first mismatch replica {r}: {fast} vs {slow}");
        }
    }
    check(equal == 200, format!("{equal}/200 equal{detail}"))
}

fn rightmost() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 2);
    let window = Window::new(2, 2, 0).unwrap();
    let region = window.region();
    let mut equal = 0;
    let mut total = 0;
    let mut positive = 0;
    let mut largest = 0;
    let mut detail = String::new();
    for r in 0..100u64 {
        let field = EdgeField::generate(SEED ^ 2, r, &window);
        let x = region.vertex(rng.gen_range(0..25));
        let y = region.vertex(rng.gen_range(0..25));
        for p in [0.7, 0.9, 1.0] {
            let view = field.open_view(p);
            let dart = b_distance(&x, &y, &view).unwrap();
            let brute = common::brute_rightmost_distance(&x, &y, &view);
            total += 1;
            if let Some(b) = brute.filter(|&b| b > 0) {
                positive += 1;
                largest = largest.max(b);
            }
            if dart == brute {
                equal += 1;
            } else if detail.is_empty() {
                detail = format!("; first mismatch window {r}, p = {p}: {dart:?} vs {brute:?}");
            }
        }
    }
    check(equal == total, format!("{equal}/{total} equal over 100 windows x 3 values of p; {positive} positive, max {largest}{detail}"))
}

fn coupling() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 3);
    let window = Window::new(2, 6, 0).unwrap();
    let region = window.region();
    let mut ok = 0;
    let mut total = 0;
    for pair in 0..50u64 {
        let g = common::random_law(&mut rng, 3);
        let shift = rng.gen_range(0..2048u32) as f64 / 1024.0;
        let to_inf = rng.gen_range(0..4u32) as f64 / 20.0;
        let shifted: Vec<(f64, f64)> = g.atoms().iter().map(|a| (a.value + shift, a.weight)).collect();
        let h = DistributionSpec::from_pairs("shifted", &shifted)
            .unwrap()
            .mix(&DistributionSpec::dirac(f64::INFINITY), to_inf)
            .unwrap();
        assert!(g.is_dominated_by(&h), "pair {pair} is not ordered");
        for r in 0..100u64 {
            let field = EdgeField::generate(SEED ^ 3, pair * 1000 + r, &window);
            let x = region.vertex(rng.gen_range(0..region.num_vertices()));
            let origin = Vertex::origin(2);
            let tg = travel_time(&field.time_view(&g), &origin, &x).unwrap().time;
            let th = travel_time(&field.time_view(&h), &origin, &x).unwrap().time;
            total += 1;
            if tg <= th {
                ok += 1;
            }
        }
    }
    check(ok == total, format!("{ok}/{total} replicas with T_G <= T_H"))
}

fn truncation() -> Check {
    let rec = run(&truncation_config(), 1).expect("run succeeds").0;
    let violations = agg(&rec, "monotonicity_violations");
    let (m50, m20) = (agg(&rec, "mu[K=50]"), agg(&rec, "mu[K=20]"));
    let jse = agg(&rec, "stderr[K=50]").hypot(agg(&rec, "stderr[K=20]"));
    let gap = (m50 - m20).abs();
    let ok = violations == 0.0 && gap <= 2.0 * jse;
    check(ok, format!("{violations} monotonicity violations; |mu50 - mu20| = {gap:.5}, 2 jse = {:.5}", 2.0 * jse))
}

fn degenerate() -> Check {
    let law = DistributionSpec::from_pairs("0.6d0+0.4d1", &[(0.0, 0.6), (1.0, 0.4)]).unwrap();
    let e1 = Vertex::unit(2, 0);
    let window = Window::new(2, 50, default_margin(&e1, 50)).unwrap();
    let est = mu_estimate(&law, 1.0, &e1, 50, 200, &window, SEED ^ 5).unwrap();
    check(est.mean < 0.05, format!("mu(e1) = {:.5} +- {:.5} at n = 50", est.mean, est.stderr))
}

fn constant() -> Check {
    let law = DistributionSpec::dirac(1.0);
    let e1 = Vertex::unit(2, 0);
    let mut detail = Vec::new();
    let mut ok = true;
    for n in [1, 7, 16] {
        let window = Window::new(2, n, default_margin(&e1, n)).unwrap();
        let est = mu_estimate(&law, 1.0, &e1, n, 10, &window, SEED ^ 6).unwrap();
        ok &= est.mean == 1.0 && est.stderr == 0.0;
        detail.push(format!("n={n}: {} +- {}", est.mean, est.stderr));
    }
    check(ok, detail.join(", "))
}

fn surgery() -> Check {
    let rec = run_config(ExperimentKind::SurgeryValidate, serde_json::json!({}));
    let (instances, verified, modified) = (agg(&rec, "instances"), agg(&rec, "verified"), agg(&rec, "modified"));
    let (over, routing, rho) = (agg(&rec, "over_rho"), agg(&rec, "routing_failed"), agg(&rec, "rho"));
    let ok = instances == 500.0 && verified == 500.0 && modified == 500.0 && routing == 0.0 && over == 0.0;
    check(
        ok,
        format!(
            "{verified}/{instances} verified ({} draws, {} rejected, {routing} routing failures); max bound ratio {:.4} vs rho = {rho}, {over} above",
            agg(&rec, "draws"),
            agg(&rec, "rejected") + agg(&rec, "no_instance"),
            agg(&rec, "max_bound_ratio")
        ),
    )
}

fn animals() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 8);
    let mut ok = 0;
    let mut tightest: f64 = 0.0;
    for _ in 0..1000 {
        let dim = rng.gen_range(2..=3usize);
        let scale = rng.gen_range(1..=12i64);
        let steps = rng.gen_range(0..=300usize);
        let mut v = Vertex::new(vec![0; dim]);
        for a in 0..dim {
            v.0[a] = rng.gen_range(-50..50);
        }
        let mut walk = vec![v.clone()];
        for _ in 0..steps {
            let axis = rng.gen_range(0..dim);
            v.0[axis] += if rng.gen_bool(0.5) { 1 } else { -1 };
            walk.push(v.clone());
        }
        let path = LatticePath::new(walk).unwrap();
        let size = path_animal(&path, scale).len() as f64;
        let bound = animal_size_bound(dim, path.len(), scale);
        tightest = tightest.max(size / bound);
        if size <= bound {
            ok += 1;
        }
    }
    check(ok == 1000, format!("{ok}/1000 within the bound; largest size/bound = {tightest:.3}"))
}

fn good_trend() -> Check {
    let rec = run(&good_trend_config(), 1).expect("run succeeds").0;
    let (f4, f10) = (agg(&rec, "good_fraction[N=4]"), agg(&rec, "good_fraction[N=10]"));
    let jse = agg(&rec, "good_stderr[N=4]").hypot(agg(&rec, "good_stderr[N=10]"));
    let sigma = (f10 - f4) / jse;
    check(sigma >= 4.0, format!("good fraction {f4:.3} at N=4, {f10:.3} at N=10: {sigma:.2} sigma (beta = {:.3})", agg(&rec, "beta[N=10]")))
}

fn q_monotone() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 10);
    let origin = MacroIndex(vec![0, 0]);
    let (p0, q) = (0.85, 0.9);
    let (mut boxes, mut good, mut flipped) = (0, 0, 0);
    for (k, scale) in [4i64, 6].into_iter().enumerate() {
        let window = Window::new(2, 3 * scale, 0).unwrap();
        let params = RenormParams::new(p0, p0, q, scale, 4.0).unwrap();
        for r in 0..250u64 {
            let field = EdgeField::generate(SEED ^ 10, k as u64 * 1000 + r, &window);
            let at_q = classify_indices(&params, &field, std::slice::from_ref(&origin)).unwrap();
            boxes += 1;
            if at_q.is_good(&origin) != Some(true) {
                continue;
            }
            good += 1;
            let q2 = rng.gen_range(p0..=q);
            let lower = RenormParams { q: q2, ..params };
            let at_q2 = classify_indices(&lower, &field, std::slice::from_ref(&origin)).unwrap();
            if at_q2.is_good(&origin) != Some(true) {
                flipped += 1;
            }
        }
    }
    check(flipped == 0, format!("{boxes} boxes, {good} good at q = {q}, {flipped} turned bad at a smaller q"))
}

fn tiny_cheeger() -> Check {
    let window = Window::new(2, 1, 0).unwrap();
    let field = EdgeField::generate(SEED, 0, &window);
    let res = cheeger_exact(&field.open_view(1.0)).unwrap();
    check(
        res.numerator == res.denominator && res.value == 1.0,
        format!("phi = {}/{} over {} vertices, {} minimizers", res.numerator, res.denominator, res.cluster_size, res.minimizers.len()),
    )
}

fn wulff() -> Check {
    let euclid = NormTable::from_fn(360, |u| u[0].hypot(u[1])).unwrap();
    let w = wulff_shape(&euclid).unwrap();
    let area_err = (w.normalized.area - 1.0).abs();
    let r = 1.0 / std::f64::consts::PI.sqrt();
    let disk = ConvexShape::new(
        (0..20_000)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 20_000.0;
                [r * t.cos(), r * t.sin()]
            })
            .collect(),
    )
    .unwrap();
    let dh = hausdorff(&w.normalized, &disk);

    let mut entries = Vec::new();
    for v in [[1i64, 0], [1, 1], [0, 1], [-1, 1], [-1, 0], [-1, -1], [0, -1], [1, -1]] {
        entries.push((v, v[0].abs() + v[1].abs()));
    }
    let exact = wulff_exact(&ExactNormTable::from_integers(&entries)).unwrap();
    let q = |n: i64, d: i64| BigRational::new(n.into(), d.into());
    let four = BigRational::from_i64(4).unwrap();
    let corners_ok = exact.vertices.len() == 4
        && [[1, 1], [-1, 1], [-1, -1], [1, -1]]
            .iter()
            .all(|c| exact.vertices.contains(&[q(c[0], 1), q(c[1], 1)]));
    // Area 4, so the area-one shape halves every vertex.
    let half: Vec<_> = exact.vertices.iter().map(|p| [p[0].clone() / q(2, 1), p[1].clone() / q(2, 1)]).collect();
    let halves_ok = [[1, 1], [-1, 1], [-1, -1], [1, -1]].iter().all(|c| half.contains(&[q(c[0], 2), q(c[1], 2)]));
    let ok = area_err <= 1e-6 && dh <= 2e-3 && corners_ok && halves_ok && exact.area == four;
    check(
        ok,
        format!("Euclidean: |area - 1| = {area_err:.2e}, d_H to disk = {dh:.2e}; L1: exact vertices (+-1, +-1), area {}", exact.area),
    )
}

fn sweeps() -> Check {
    let rec = run_config(ExperimentKind::CheegerSweep, serde_json::json!({}));
    let checks: Vec<_> = rec.aggregates.iter().filter(|(k, _)| k.starts_with("trend_ok[")).collect();
    let failed: Vec<&String> = checks.iter().filter(|(_, v)| v.0 != 1.0).map(|(k, _)| *k).collect();
    let ok = checks.len() == 15 && failed.is_empty() && agg(&rec, "trend_violations") == 0.0;
    check(ok, format!("{}/{} adjacent-point trend checks within bound {failed:?}", checks.len() - failed.len(), checks.len()))
}

/// Times the original as a command (run and write outputs) and each replay
/// as a command (load the record, recompute, compare).
fn determinism(configs: &[(&str, ExperimentConfig)]) -> Check {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, config) in configs {
        let dir = tempfile::tempdir().expect("temp dir");
        let start = Instant::now();
        run_to_dir(config, 1, dir.path()).expect("original runs");
        let original = start.elapsed();
        for workers in [1, 8] {
            let start = Instant::now();
            let verdict = replay_file(&dir.path().join("record.json"), workers).expect("replay runs");
            let elapsed = start.elapsed();
            ok &= verdict == Verdict::Match && elapsed <= original;
            detail.push(format!(
                "{name} x{workers}: {verdict} in {} ms (original {} ms)",
                elapsed.as_millis(),
                original.as_millis()
            ));
        }
    }
    check(ok, detail.join("; "))
}

/// Criterion ids given on the command line select a subset; libtest flags
/// passed by cargo are ignored.
fn main() -> ExitCode {
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut results: Vec<(u32, &str, Duration, Duration, Check)> = Vec::new();
    let mut timed = |id: u32, name: &'static str, budget: Duration, f: &mut dyn FnMut() -> Check| {
        if !only.is_empty() && !only.contains(&id) {
            return;
        }
        let start = Instant::now();
        let c = f();
        let took = start.elapsed();
        let line = format!(
            "{} {id:>2} {name}: {} [{:.1} s, budget {} s]",
            if c.passed && took <= budget { "PASS" } else { "FAIL" },
            c.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
        println!("{line}");
        results.push((id, name, took, budget, c));
    };
    timed(1, "shortest paths vs exhaustive enumeration", seconds(10), &mut shortest_paths);
    timed(2, "right-most distance vs brute force", seconds(60), &mut rightmost);
    timed(3, "coupling monotonicity", seconds(30), &mut coupling);
    timed(4, "truncation convergence", seconds(300), &mut truncation);
    timed(5, "degenerate time constant", seconds(300), &mut degenerate);
    timed(6, "constant law", seconds(1), &mut constant);
    timed(7, "surgery validation", seconds(900), &mut surgery);
    timed(8, "animal bound", seconds(5), &mut animals);
    timed(9, "good-box trend", seconds(300), &mut good_trend);
    timed(10, "classification monotone in q", seconds(120), &mut q_monotone);
    timed(11, "tiny Cheeger constant", seconds(1), &mut tiny_cheeger);
    timed(12, "Wulff geometry", seconds(5), &mut wulff);
    timed(13, "continuity sweeps", seconds(1800), &mut sweeps);
    timed(14, "replay determinism", seconds(600), &mut || {
        // Originals run here so both timings share machine conditions.
        determinism(&[
            ("truncation", truncation_config()),
            ("box-classify", good_trend_config()),
        ])
    });
    let failed = results.iter().filter(|(_, _, took, budget, c)| !c.passed || took > budget).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
