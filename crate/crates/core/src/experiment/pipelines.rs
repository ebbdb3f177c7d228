use std::collections::BTreeMap;

use rayon::prelude::*;
use serde_json::json;

use super::{Artifacts, ExperimentConfig, ExperimentKind, Metric, Metrics, Outcome, ReplicaRecord, RunError, Table};
use crate::cluster::ClusterAnalysis;
use crate::dist::fmt_value;
use crate::error::Error;
use crate::field::{EdgeField, FieldKey};
use crate::fpp::{default_margin, mu_estimate_with, truncation_sweep, MuEstimate, MuRequest};
use crate::isoperimetry::{
    cheeger_exact, hausdorff, lattice_directions, variational_cheeger, wulff_shape, NormTable, WulffShape,
};
use crate::lattice::{MacroIndex, Region, Vertex, Window};
use crate::renorm::{
    calibrate_beta, classify, classify_indices, surgery_instance, verify_surgery, RenormParams,
};
use crate::rightmost::beta_estimate;
use crate::stats::{proportion, MeanSe};

/// `files` requests the artifact-only work (e.g. classified grids) as well.
pub(super) fn dispatch(c: &ExperimentConfig, files: bool) -> Result<Outcome, RunError> {
    match c.experiment {
        ExperimentKind::Truncation => truncation(c),
        ExperimentKind::MuContinuity => mu_continuity(c),
        ExperimentKind::CheegerSweep => sweep(c, true),
        ExperimentKind::WulffSweep => sweep(c, false),
        ExperimentKind::SurgeryValidate => surgery(c),
        ExperimentKind::BoxClassify => box_classify(c, files),
    }
}

fn s(v: f64) -> String {
    fmt_value(v)
}

fn dir_label(v: &Vertex) -> String {
    v.coords().iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

struct Agg(Metrics);

impl Agg {
    fn new() -> Agg {
        Agg(BTreeMap::new())
    }

    fn put(&mut self, key: impl Into<String>, v: f64) {
        self.0.insert(key.into(), Metric(v));
    }
}

fn replica(replica: u64, group: impl Into<String>, values: &[(String, f64)]) -> ReplicaRecord {
    ReplicaRecord {
        replica,
        group: group.into(),
        values: values.iter().map(|(k, v)| (k.clone(), Metric(*v))).collect(),
    }
}

/// `|a - b|` over the joint standard error; zero when both vanish.
fn gap_ratio(a: &MeanSe, b: &MeanSe) -> f64 {
    let gap = (a.mean - b.mean).abs();
    let jse = a.joint_stderr(b);
    if gap == 0.0 {
        0.0
    } else {
        gap / jse
    }
}

fn window_for(c: &ExperimentConfig, dirs: &[Vertex], n: i64) -> Window {
    let radius = c.radius.unwrap_or_else(|| dirs.iter().map(|d| n * d.linf()).max().unwrap_or(1).max(1));
    let margin = c.margin.unwrap_or_else(|| dirs.iter().map(|d| default_margin(d, n)).max().unwrap_or(0));
    Window { dim: c.dimension, radius, margin }
}

fn truncation(c: &ExperimentConfig) -> Result<Outcome, RunError> {
    let law = c.require_law()?;
    let n = c.first_n()?;
    let dir = c.direction_vertices()?.remove(0);
    let m0 = c.m0.or(law.max_finite()).unwrap_or(0.0);
    let window = window_for(c, std::slice::from_ref(&dir), n);
    let sweep = truncation_sweep(law, m0, &c.k_list, &dir, n, c.replicas, &window, c.seed).map_err(RunError::at("law"))?;

    let key = |k: f64| format!("K={}", s(k));
    let mut agg = Agg::new();
    let mut table = Table::new("truncation", &["K", "mu", "stderr", "n"]);
    for (k, est) in sweep.levels.iter().zip(&sweep.per_level) {
        agg.put(format!("mu[{}]", key(*k)), est.mean);
        agg.put(format!("stderr[{}]", key(*k)), est.stderr);
        table.push(None, vec![s(*k), s(est.mean), s(est.stderr), n.to_string()]);
    }
    agg.put("mu[G]", sweep.base.mean);
    agg.put("stderr[G]", sweep.base.stderr);
    table.push(None, vec!["inf".into(), s(sweep.base.mean), s(sweep.base.stderr), n.to_string()]);
    agg.put("monotonicity_violations", sweep.monotonicity_violations as f64);
    agg.put("majorant_violations", sweep.majorant_violations as f64);

    let mut log = vec![format!(
        "pathwise monotonicity in K: {} violations over {} replicas",
        sweep.monotonicity_violations, c.replicas
    )];
    if sweep.per_level.len() >= 2 {
        let last = sweep.per_level[sweep.per_level.len() - 1].mean_se();
        let prev = sweep.per_level[sweep.per_level.len() - 2].mean_se();
        let ratio = gap_ratio(&last, &prev);
        agg.put("plateau_gap_over_jse", ratio);
        log.push(format!(
            "plateau: |mu(K_last) - mu(K_prev)| = {} joint stderr (threshold {})",
            ratio, c.stderr_k
        ));
    }

    let mut columns: Vec<String> = sweep.levels.iter().map(|&k| format!("T[{}]", key(k))).collect();
    columns.push("T[G]".into());
    let col_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut per_table = Table::new("truncation_replicas", &col_refs);
    let mut per_replica = Vec::with_capacity(c.replicas);
    for (r, times) in sweep.pathwise.iter().enumerate() {
        let mut values: Vec<(String, f64)> = columns[..times.len()].iter().cloned().zip(times.iter().copied()).collect();
        values.push(("T[G]".into(), sweep.base.samples[r] * n as f64));
        per_table.push(Some(r as u64), values.iter().map(|(_, v)| s(*v)).collect());
        per_replica.push(replica(r as u64, "truncation", &values));
    }
    Ok(Outcome {
        per_replica,
        aggregates: agg.0,
        log,
        artifacts: Artifacts { tables: vec![table, per_table], documents: Vec::new() },
    })
}

fn mu_continuity(c: &ExperimentConfig) -> Result<Outcome, RunError> {
    let target = c.require_law()?;
    let n = c.first_n()?;
    let dirs = c.direction_vertices()?;
    let level = c.m0.or(target.max_finite()).unwrap_or(0.0);
    let window = window_for(c, &dirs, n);
    let estimate = |law, dir: &Vertex| -> Result<MuEstimate, RunError> {
        let mut req = MuRequest::new(law, level, dir.clone(), n, c.replicas, c.seed);
        req.window = window;
        req.cluster_law = Some(target);
        mu_estimate_with(&req).map_err(RunError::at("laws"))
    };
    let mut agg = Agg::new();
    let mut log = Vec::new();
    let mut per_replica = Vec::new();
    let mut table = Table::new(
        "mu_continuity",
        &["label", "direction", "mu", "stderr", "mu_limit", "stderr_limit", "gap", "joint_stderr"],
    );
    let mut sup_gap: BTreeMap<String, f64> = BTreeMap::new();
    for dir in &dirs {
        let d = dir_label(dir);
        let limit = estimate(target, dir)?;
        agg.put(format!("mu[limit|{d}]"), limit.mean);
        agg.put(format!("stderr[limit|{d}]"), limit.stderr);
        for (r, v) in limit.samples.iter().enumerate() {
            per_replica.push(replica(r as u64, format!("limit|{d}"), &[("T/n".into(), *v)]));
        }
        for entry in &c.laws {
            let est = estimate(&entry.law, dir)?;
            let (a, b) = (est.mean_se(), limit.mean_se());
            let gap = (a.mean - b.mean).abs();
            let jse = a.joint_stderr(&b);
            let id = format!("{}|{d}", entry.label);
            agg.put(format!("mu[{id}]"), est.mean);
            agg.put(format!("stderr[{id}]"), est.stderr);
            agg.put(format!("gap_over_jse[{id}]"), gap_ratio(&a, &b));
            let sup = sup_gap.entry(entry.label.clone()).or_insert(0.0);
            *sup = sup.max(gap);
            table.push(None, vec![entry.label.clone(), d.clone(), s(est.mean), s(est.stderr), s(b.mean), s(b.stderr), s(gap), s(jse)]);
            log.push(format!(
                "{id}: |mu_m - mu| = {gap} ({} joint stderr, threshold {})",
                gap_ratio(&a, &b),
                c.stderr_k
            ));
            for (r, v) in est.samples.iter().enumerate() {
                per_replica.push(replica(r as u64, id.clone(), &[("T/n".into(), *v)]));
            }
        }
    }
    for (label, gap) in sup_gap {
        agg.put(format!("sup_gap[{label}]"), gap);
    }
    Ok(Outcome {
        per_replica,
        aggregates: agg.0,
        log,
        artifacts: Artifacts { tables: vec![table], documents: Vec::new() },
    })
}

/// Estimates at one point of a `p`-grid, with per-batch replicates.
struct SweepPoint {
    p: f64,
    table: NormTable,
    theta: MeanSe,
    shape: WulffShape,
    batch_tables: Vec<NormTable>,
    batch_theta: Vec<f64>,
    beta_e1: MeanSe,
}

fn batch_ranges(replicas: usize, batches: usize) -> Vec<std::ops::Range<usize>> {
    (0..batches).map(|b| b * replicas / batches..(b + 1) * replicas / batches).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn batch_se(xs: &[f64]) -> f64 {
    MeanSe::from_samples(xs).stderr
}

fn sweep_point(
    c: &ExperimentConfig,
    p: f64,
    n: i64,
    window: &Window,
    per_replica: &mut Vec<ReplicaRecord>,
) -> Result<SweepPoint, RunError> {
    let dirs = lattice_directions();
    let mut samples: Vec<Vec<f64>> = Vec::new();
    let mut units = Vec::new();
    for v in &dirs {
        let est = beta_estimate(p, None, &Vertex::new(v.to_vec()), n, c.replicas, window, c.seed)
            .map_err(RunError::at("p_grid"))?;
        let len = (v[0] as f64).hypot(v[1] as f64);
        units.push([v[0] as f64 / len, v[1] as f64 / len]);
        samples.push(est.samples.iter().map(|x| x / len).collect());
    }
    let in_giant: Vec<f64> = (0..c.replicas as u64)
        .into_par_iter()
        .map(|r| {
            let field = EdgeField::generate(c.seed, r, window);
            let analysis = ClusterAnalysis::analyze(&field.open_view(p).bonds());
            f64::from(u8::from(analysis.in_giant(&Vertex::origin(2))))
        })
        .collect();
    let group = format!("p={}", s(p));
    for r in 0..c.replicas {
        let mut values: Vec<(String, f64)> = dirs
            .iter()
            .zip(&samples)
            .map(|(v, xs)| (format!("beta[{} {}]", v[0], v[1]), xs[r]))
            .collect();
        values.push(("in_giant".into(), in_giant[r]));
        per_replica.push(replica(r as u64, group.clone(), &values));
    }
    let make_table = |range: std::ops::Range<usize>| -> Result<NormTable, RunError> {
        let values: Vec<f64> = samples.iter().map(|xs| mean(&xs[range.clone()])).collect();
        let errs: Vec<f64> = samples.iter().map(|xs| MeanSe::from_samples(&xs[range.clone()]).stderr).collect();
        NormTable::new(units.clone(), values, errs).map_err(RunError::at("p_grid"))
    };
    let table = make_table(0..c.replicas)?;
    let ranges = batch_ranges(c.replicas, c.batches);
    let batch_tables = ranges.iter().map(|r| make_table(r.clone())).collect::<Result<Vec<_>, _>>()?;
    let batch_theta = ranges.iter().map(|r| mean(&in_giant[r.clone()])).collect();
    let theta = MeanSe::from_samples(&in_giant);
    let shape = wulff_shape(&table).map_err(RunError::at("p_grid"))?;
    let e1 = dirs.iter().position(|v| *v == [1, 0]).expect("e1 is a lattice direction");
    Ok(SweepPoint {
        p,
        beta_e1: MeanSe::from_samples(&samples[e1]),
        table,
        theta,
        shape,
        batch_tables,
        batch_theta,
    })
}

/// Circumradius about the origin.
fn radius_of(shape: &WulffShape) -> f64 {
    shape.normalized.vertices.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max)
}

fn sweep(c: &ExperimentConfig, cheeger: bool) -> Result<Outcome, RunError> {
    let n = c.first_n()?;
    let window = Window { dim: 2, radius: c.radius.unwrap_or(2 * n), margin: c.margin.unwrap_or(n) };
    let mut per_replica = Vec::new();
    let mut points = Vec::with_capacity(c.p_grid.len());
    for &p in &c.p_grid {
        points.push(sweep_point(c, p, n, &window, &mut per_replica)?);
    }

    let mut agg = Agg::new();
    let mut log = Vec::new();
    let mut main = if cheeger {
        Table::new(
            "cheeger_sweep",
            &[
                "p", "beta_e1", "beta_e1_stderr", "theta", "theta_stderr", "variational", "variational_stderr",
                "hausdorff_prev", "hausdorff_prev_stderr", "phi_tiny", "phi_tiny_stderr",
            ],
        )
    } else {
        Table::new("wulff_sweep", &["p", "area_raw", "vertices", "symmetric", "hausdorff_prev", "hausdorff_prev_stderr"])
    };
    let mut vertices = Table::new("wulff_vertices", &["p", "vertex", "x", "y"]);
    let mut norm_rows = Table::new("norm_tables", &["p", "ux", "uy", "value", "stderr"]);
    let mut shapes = Vec::new();
    let mut variational: Vec<(f64, f64)> = Vec::new();
    for (i, pt) in points.iter().enumerate() {
        let ps = s(pt.p);
        agg.put(format!("beta_e1[p={ps}]"), pt.beta_e1.mean);
        agg.put(format!("beta_e1_stderr[p={ps}]"), pt.beta_e1.stderr);
        agg.put(format!("area_raw[p={ps}]"), pt.shape.raw.area);
        let symmetric = pt.shape.normalized.is_centrally_symmetric(1e-9);
        let (dh, dh_se) = if i > 0 {
            let prev = &points[i - 1];
            let per_batch: Vec<f64> = prev
                .batch_tables
                .iter()
                .zip(&pt.batch_tables)
                .map(|(a, b)| -> Result<f64, RunError> {
                    let wa = wulff_shape(a).map_err(RunError::at("p_grid"))?;
                    let wb = wulff_shape(b).map_err(RunError::at("p_grid"))?;
                    Ok(hausdorff(&wa.normalized, &wb.normalized))
                })
                .collect::<Result<_, _>>()?;
            let dh = hausdorff(&prev.shape.normalized, &pt.shape.normalized);
            agg.put(format!("hausdorff_prev[p={ps}]"), dh);
            agg.put(format!("hausdorff_prev_stderr[p={ps}]"), batch_se(&per_batch));
            (dh, batch_se(&per_batch))
        } else {
            (f64::NAN, f64::NAN)
        };
        for (k, v) in pt.shape.normalized.vertices.iter().enumerate() {
            vertices.push(None, vec![ps.clone(), k.to_string(), s(v[0]), s(v[1])]);
        }
        for ((u, v), e) in pt.table.directions.iter().zip(&pt.table.values).zip(&pt.table.stderr) {
            norm_rows.push(None, vec![ps.clone(), s(u[0]), s(u[1]), s(*v), s(*e)]);
        }
        shapes.push(json!({ "p": pt.p, "table": pt.table, "shape": pt.shape }));
        if cheeger {
            let value = variational_cheeger(&pt.table, pt.theta.mean).map_err(RunError::at("replicas"))?;
            let per_batch: Vec<f64> = pt
                .batch_tables
                .iter()
                .zip(&pt.batch_theta)
                .map(|(t, &th)| variational_cheeger(t, th).map_err(RunError::at("batches")))
                .collect::<Result<_, _>>()?;
            let value_se = batch_se(&per_batch);
            variational.push((value, value_se));
            let tiny = tiny_cheeger(c, pt.p)?;
            agg.put(format!("theta[p={ps}]"), pt.theta.mean);
            agg.put(format!("theta_stderr[p={ps}]"), pt.theta.stderr);
            agg.put(format!("variational[p={ps}]"), value);
            agg.put(format!("variational_stderr[p={ps}]"), value_se);
            agg.put(format!("phi_tiny[p={ps}]"), tiny.mean);
            agg.put(format!("phi_tiny_stderr[p={ps}]"), tiny.stderr);
            main.push(
                None,
                vec![
                    ps.clone(),
                    s(pt.beta_e1.mean),
                    s(pt.beta_e1.stderr),
                    s(pt.theta.mean),
                    s(pt.theta.stderr),
                    s(value),
                    s(value_se),
                    s(dh),
                    s(dh_se),
                    s(tiny.mean),
                    s(tiny.stderr),
                ],
            );
        } else {
            main.push(
                None,
                vec![
                    ps.clone(),
                    s(pt.shape.raw.area),
                    pt.shape.normalized.vertices.len().to_string(),
                    symmetric.to_string(),
                    s(dh),
                    s(dh_se),
                ],
            );
        }
    }

    // Adjacent-point trend checks.
    let k = c.stderr_k;
    let eps = c.trend_bound;
    let mut violations = 0;
    for i in 1..points.len() {
        let (a, b) = (&points[i - 1], &points[i]);
        let id = format!("p={}->{}", s(a.p), s(b.p));
        let dh = hausdorff(&a.shape.normalized, &b.shape.normalized);
        let dh_se = agg.0[&format!("hausdorff_prev_stderr[p={}]", s(b.p))].0;
        let mut check = |what: &str, gap: f64, allowed: f64, noise: f64| {
            let ok = gap <= allowed + k * noise;
            agg.put(format!("trend_ok[{what}|{id}]"), f64::from(u8::from(ok)));
            if !ok {
                violations += 1;
            }
            log.push(format!(
                "{what} {id}: change {gap}, allowed {allowed} + {k} x {noise}: {}",
                if ok { "ok" } else { "VIOLATION" }
            ));
        };
        check(
            "beta_e1",
            (a.beta_e1.mean - b.beta_e1.mean).abs(),
            eps * a.beta_e1.mean.abs().max(b.beta_e1.mean.abs()),
            a.beta_e1.joint_stderr(&b.beta_e1),
        );
        if cheeger {
            let ((va, sa), (vb, sb)) = (variational[i - 1], variational[i]);
            check("variational", (va - vb).abs(), eps * va.abs().max(vb.abs()), sa.hypot(sb));
        }
        check("hausdorff", dh, eps * radius_of(&a.shape).max(radius_of(&b.shape)), dh_se);
    }
    agg.put("trend_violations", violations as f64);

    let mut tables = vec![main, norm_rows];
    if !cheeger {
        tables.push(vertices);
    }
    Ok(Outcome {
        per_replica,
        aggregates: agg.0,
        log,
        artifacts: Artifacts { tables, documents: vec![("shapes".into(), json!(shapes))] },
    })
}

/// Mean exact Cheeger constant of the giant of `[-1, 1]^2`, over the replicas
/// that have one.
fn tiny_cheeger(c: &ExperimentConfig, p: f64) -> Result<MeanSe, RunError> {
    let region = Region::cube(&[0, 0], 1);
    let values: Vec<Option<f64>> = (0..c.replicas as u64)
        .into_par_iter()
        .map(|r| {
            let field = EdgeField::generate_in(FieldKey::new(c.seed, r).with_stream(2), region.clone());
            match cheeger_exact(&field.open_view(p)) {
                Ok(res) => Ok(Some(res.value)),
                Err(Error::NoGiant(_)) | Err(Error::Degenerate(_)) => Ok(None),
                Err(e) => Err(RunError::new("p_grid", e)),
            }
        })
        .collect::<Result<_, _>>()?;
    let present: Vec<f64> = values.into_iter().flatten().collect();
    if present.is_empty() {
        return Ok(MeanSe { mean: f64::NAN, stderr: f64::NAN, count: 0 });
    }
    Ok(MeanSe::from_samples(&present))
}

fn params_for(c: &ExperimentConfig, scale: i64) -> Result<RenormParams, RunError> {
    let (p0, p, q) = (c.require("p0", c.p0)?, c.require("p", c.p)?, c.require("q", c.q)?);
    let beta = match c.beta {
        Some(b) => b,
        None => {
            calibrate_beta(c.dimension, p0, scale, c.beta_pairs, c.beta_quantile, c.seed ^ 0xB17A)
                .map_err(RunError::at("beta"))?
                .beta
        }
    };
    RenormParams::new(p0, p, q, scale, beta).map_err(RunError::at("p0"))
}

fn surgery(c: &ExperimentConfig) -> Result<Outcome, RunError> {
    let scale = c.scales[0];
    let params = params_for(c, scale)?;
    let radius = c.radius.expect("validated");
    let grid_half = (radius - 3 * scale) / (2 * scale + 1);

    enum Status {
        Ok(Box<crate::renorm::SurgeryReport>, Vec<String>),
        NoInstance,
        Precondition(String),
        Routing(String),
    }
    let draw = |r: u64| -> Result<Status, RunError> {
        let Some(inst) = surgery_instance(&params, c.dimension, grid_half, c.seed, r).map_err(RunError::at("radius"))? else {
            return Ok(Status::NoInstance);
        };
        match inst.renorm.modify_path(&inst.gamma) {
            Ok(report) => {
                let violations = verify_surgery(&report, &inst.field, &params);
                Ok(Status::Ok(Box::new(report), violations))
            }
            Err(Error::PreconditionFailed(m)) => Ok(Status::Precondition(m)),
            Err(Error::RoutingFailed(m)) => Ok(Status::Routing(m)),
            Err(e) => Err(RunError::at("scales")(e)),
        }
    };
    // Draws whose hypotheses cannot be certified inside the window are
    // rejected and replaced until `replicas` instances are in hand.
    let target = c.replicas;
    let max_draws = 4 * target as u64;
    let mut outcomes: Vec<Status> = Vec::new();
    let mut valid = 0;
    while valid < target && (outcomes.len() as u64) < max_draws {
        let from = outcomes.len() as u64;
        let to = (from + (target - valid) as u64).min(max_draws);
        let batch: Vec<Status> = (from..to).into_par_iter().map(draw).collect::<Result<_, _>>()?;
        valid += batch.iter().filter(|st| matches!(st, Status::Ok(..) | Status::Routing(_))).count();
        outcomes.extend(batch);
    }

    let mut agg = Agg::new();
    let mut log = Vec::new();
    let mut per_replica = Vec::new();
    let mut table = Table::new(
        "surgery",
        &["status", "gamma_edges", "modified_edges", "added", "removed_bad", "bad_mass", "animal_size", "bound_ratio", "violations"],
    );
    let (mut ok, mut verified, mut none, mut pre, mut routing, mut over_rho) = (0, 0, 0, 0, 0, 0);
    let mut ratios = Vec::new();
    let mut examples = Vec::new();
    let outcomes_len = outcomes.len();
    for (r, st) in outcomes.into_iter().enumerate() {
        let r = r as u64;
        match st {
            Status::Ok(rep, violations) => {
                ok += 1;
                if violations.is_empty() {
                    verified += 1;
                } else {
                    for v in &violations {
                        log.push(format!("replica {r}: {v}"));
                    }
                }
                if c.rho.is_some_and(|rho| rep.bound_ratio > rho) {
                    over_rho += 1;
                    log.push(format!("replica {r}: bound ratio {} exceeds rho", rep.bound_ratio));
                }
                ratios.push(rep.bound_ratio);
                let values = [
                    ("status".to_string(), 0.0),
                    ("gamma_edges".to_string(), rep.original.len() as f64),
                    ("modified_edges".to_string(), rep.modified.len() as f64),
                    ("added".to_string(), rep.added.len() as f64),
                    ("removed_bad".to_string(), rep.removed_bad as f64),
                    ("bad_mass".to_string(), rep.bad_mass as f64),
                    ("animal_size".to_string(), rep.animal_size as f64),
                    ("bound_ratio".to_string(), rep.bound_ratio),
                    ("violations".to_string(), violations.len() as f64),
                ];
                table.push(Some(r), std::iter::once("ok".to_string()).chain(values[1..].iter().map(|(_, v)| s(*v))).collect());
                per_replica.push(replica(r, "surgery", &values));
                if examples.len() < 5 && rep.removed_bad > 0 {
                    examples.push(json!({ "replica": r, "report": rep }));
                }
            }
            other => {
                let (code, label) = match &other {
                    Status::NoInstance => {
                        none += 1;
                        (1.0, "no-instance")
                    }
                    Status::Precondition(m) => {
                        pre += 1;
                        log.push(format!("replica {r}: rejected: {m}"));
                        (2.0, "rejected")
                    }
                    Status::Routing(m) => {
                        routing += 1;
                        log.push(format!("replica {r}: routing failed: {m}"));
                        (3.0, "routing-failed")
                    }
                    Status::Ok(..) => unreachable!(),
                };
                let mut row = vec![label.to_string()];
                row.extend(std::iter::repeat_n(String::new(), table.columns.len() - 1));
                table.push(Some(r), row);
                per_replica.push(replica(r, "surgery", &[("status".into(), code)]));
            }
        }
    }
    agg.put("beta", params.beta);
    agg.put("grid_half", grid_half as f64);
    agg.put("instances", valid as f64);
    agg.put("draws", outcomes_len as f64);
    agg.put("modified", ok as f64);
    agg.put("verified", verified as f64);
    agg.put("no_instance", none as f64);
    agg.put("rejected", pre as f64);
    agg.put("routing_failed", routing as f64);
    agg.put("max_bound_ratio", ratios.iter().copied().fold(0.0, f64::max));
    agg.put("mean_bound_ratio", if ratios.is_empty() { 0.0 } else { mean(&ratios) });
    if let Some(rho) = c.rho {
        agg.put("rho", rho);
        agg.put("over_rho", over_rho as f64);
    }
    log.push(format!(
        "{verified}/{ok} modified paths verified; {routing} routing failures; {outcomes_len} draws, {none} without instance, {pre} rejected as uncertifiable in the window"
    ));
    Ok(Outcome {
        per_replica,
        aggregates: agg.0,
        log,
        artifacts: Artifacts { tables: vec![table], documents: vec![("surgery_examples".into(), json!(examples))] },
    })
}

fn box_classify(c: &ExperimentConfig, files: bool) -> Result<Outcome, RunError> {
    let mut agg = Agg::new();
    let mut log = Vec::new();
    let mut per_replica = Vec::new();
    let mut table = Table::new(
        "box_classify",
        &["N", "beta", "good_fraction", "stderr", "unique", "crossing", "chemical", "shielding"],
    );
    let mut documents = Vec::new();
    let mut fractions = Vec::new();
    let origin = MacroIndex(vec![0; c.dimension]);
    // One beta for all scales, calibrated at the largest one when not given.
    let reference = params_for(c, *c.scales.iter().max().expect("validated"))?;
    for &scale in &c.scales {
        let params = RenormParams { scale, ..reference };
        let window = Window { dim: c.dimension, radius: 3 * scale, margin: 0 };
        let flags: Vec<[bool; 5]> = (0..c.replicas as u64)
            .into_par_iter()
            .map(|r| {
                let field = EdgeField::generate(c.seed, r, &window);
                let cls = classify_indices(&params, &field, std::slice::from_ref(&origin)).map_err(RunError::at("scales"))?;
                let f = cls.flags(&origin).expect("classified");
                Ok([f.is_good(), f.unique, f.crossing, f.chemical, f.shielding])
            })
            .collect::<Result<_, RunError>>()?;
        let frac = |k: usize| proportion(flags.iter().filter(|f| f[k]).count(), flags.len());
        let good = frac(0);
        let tag = format!("N={scale}");
        agg.put(format!("beta[{tag}]"), params.beta);
        agg.put(format!("good_fraction[{tag}]"), good.mean);
        agg.put(format!("good_stderr[{tag}]"), good.stderr);
        for (k, name) in ["unique", "crossing", "chemical", "shielding"].iter().enumerate() {
            agg.put(format!("{name}_fraction[{tag}]"), frac(k + 1).mean);
        }
        table.push(
            None,
            vec![
                scale.to_string(),
                s(params.beta),
                s(good.mean),
                s(good.stderr),
                s(frac(1).mean),
                s(frac(2).mean),
                s(frac(3).mean),
                s(frac(4).mean),
            ],
        );
        for (r, f) in flags.iter().enumerate() {
            let b = |x: bool| f64::from(u8::from(x));
            per_replica.push(replica(
                r as u64,
                tag.clone(),
                &[
                    ("good".into(), b(f[0])),
                    ("unique".into(), b(f[1])),
                    ("crossing".into(), b(f[2])),
                    ("chemical".into(), b(f[3])),
                    ("shielding".into(), b(f[4])),
                ],
            ));
        }
        fractions.push((scale, good));
        log.push(format!("N = {scale}: good fraction {} +- {} over {} boxes", good.mean, good.stderr, c.replicas));
        if files && c.dimension == 2 {
            let grid_window = Window { dim: 2, radius: (2 * scale + 1) * 2 + 3 * scale, margin: 0 };
            let field = EdgeField::generate(c.seed, 0, &grid_window);
            let cls = classify(&params, &field).map_err(RunError::at("scales"))?;
            documents.push((format!("grid_{tag}"), json!({ "scale": scale, "grid_csv": cls.grid_csv() })));
        }
    }
    if let (Some((n1, a)), Some((n2, b))) = (fractions.first(), fractions.last()) {
        if fractions.len() > 1 {
            let jse = a.joint_stderr(b);
            let sigma = if jse > 0.0 { (b.mean - a.mean) / jse } else { 0.0 };
            agg.put("trend_sigma", sigma);
            log.push(format!("good fraction at N = {n2} exceeds N = {n1} by {sigma} joint stderr"));
        }
    }
    Ok(Outcome {
        per_replica,
        aggregates: agg.0,
        log,
        artifacts: Artifacts { tables: vec![table], documents },
    })
}
