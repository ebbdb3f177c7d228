//! First-passage percolation: travel times, regularized travel times, time
//! constant estimates and the truncation study.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{regularize, ClusterAnalysis};
use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use crate::field::{EdgeField, TimeView};
use crate::lattice::{LatticePath, Region, Vertex, Window};
use crate::stats::MeanSe;

#[derive(Clone, Copy, PartialEq)]
struct HeapItem {
    dist: f64,
    vertex: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest paths over nonnegative edge times; edges with
/// infinite time are never relaxed.
#[derive(Clone, Debug)]
pub struct ShortestPaths {
    region: Region,
    source: usize,
    dist: Vec<f64>,
    parent: Vec<usize>,
}

impl ShortestPaths {
    pub fn compute(region: &Region, times: &[f64], source: usize) -> ShortestPaths {
        Self::compute_until(region, times, source, None)
    }

    /// Stops once `target` is settled, when given.
    pub fn compute_until(region: &Region, times: &[f64], source: usize, target: Option<usize>) -> ShortestPaths {
        let n = region.num_vertices();
        let mut dist = vec![f64::INFINITY; n];
        let mut parent = vec![usize::MAX; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        parent[source] = source;
        heap.push(HeapItem { dist: 0.0, vertex: source });
        while let Some(HeapItem { dist: d, vertex: v }) = heap.pop() {
            if done[v] {
                continue;
            }
            done[v] = true;
            if Some(v) == target {
                break;
            }
            region.for_each_neighbor(v, |w, slot| {
                let t = times[slot];
                if t.is_finite() && !done[w] {
                    let nd = d + t;
                    if nd < dist[w] {
                        dist[w] = nd;
                        parent[w] = v;
                        heap.push(HeapItem { dist: nd, vertex: w });
                    }
                }
            });
        }
        ShortestPaths { region: region.clone(), source, dist, parent }
    }

    pub fn dist(&self, idx: usize) -> f64 {
        self.dist[idx]
    }

    pub fn path_indices(&self, target: usize) -> Option<Vec<usize>> {
        if !self.dist[target].is_finite() {
            return None;
        }
        let mut path = vec![target];
        let mut v = target;
        while v != self.source {
            v = self.parent[v];
            path.push(v);
        }
        path.reverse();
        Some(path)
    }

    pub fn path_to(&self, target: usize) -> Option<LatticePath> {
        self.path_indices(target).map(|p| {
            LatticePath::new(p.into_iter().map(|i| self.region.vertex(i)).collect()).expect("geodesic is a path")
        })
    }
}

/// Outcome of a travel-time query; `time` is `+inf` when unreachable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TravelResult {
    pub time: f64,
    pub geodesic: Option<LatticePath>,
    /// Whether the geodesic visits the boundary of the window.
    pub touches_boundary: bool,
}

fn index_in(region: &Region, v: &Vertex) -> Result<usize> {
    region
        .index_of(v.coords())
        .ok_or_else(|| Error::InvalidInput(format!("vertex {v} lies outside the window")))
}

/// Minimum passage time between `a` and `b` over paths inside the view's region.
pub fn travel_time(view: &TimeView<'_>, a: &Vertex, b: &Vertex) -> Result<TravelResult> {
    travel_time_with(view.field.region(), &view.times(), a, b)
}

pub fn travel_time_with(region: &Region, times: &[f64], a: &Vertex, b: &Vertex) -> Result<TravelResult> {
    let ia = index_in(region, a)?;
    let ib = index_in(region, b)?;
    let sp = ShortestPaths::compute_until(region, times, ia, Some(ib));
    let time = sp.dist(ib);
    let path = sp.path_indices(ib);
    let touches_boundary = path
        .as_ref()
        .is_some_and(|p| p.iter().any(|&i| region.on_boundary(i)));
    Ok(TravelResult {
        time,
        geodesic: path.map(|p| LatticePath::new(p.into_iter().map(|i| region.vertex(i)).collect()).expect("path")),
        touches_boundary,
    })
}

/// Travel time between the projections of `a` and `b` onto the giant of the
/// level set `{t(e) <= level}`.
pub fn regularized_time(view: &TimeView<'_>, level: f64, a: &Vertex, b: &Vertex) -> Result<TravelResult> {
    let analysis = ClusterAnalysis::analyze(&view.level_set(level));
    let ra = regularize(a, &analysis)?;
    let rb = regularize(b, &analysis)?;
    travel_time(view, &ra.projected, &rb.projected)
}

/// Default margin: half the L1 length of the target displacement.
pub fn default_margin(direction: &Vertex, n: i64) -> i64 {
    ((n * direction.l1()) as f64 * 0.5).ceil() as i64
}

/// Parameters of a time-constant estimate.
#[derive(Clone, Debug)]
pub struct MuRequest<'a> {
    pub law: &'a DistributionSpec,
    /// Level `M` defining the regularization cluster.
    pub level: f64,
    pub direction: Vertex,
    pub n: i64,
    pub replicas: usize,
    pub window: Window,
    pub seed: u64,
    /// Law whose level set provides the regularization cluster, when it
    /// differs from `law`.
    pub cluster_law: Option<&'a DistributionSpec>,
    /// How many times a replica whose geodesic touches the boundary is rerun
    /// with a doubled margin.
    pub max_enlargements: u32,
}

impl<'a> MuRequest<'a> {
    pub fn new(law: &'a DistributionSpec, level: f64, direction: Vertex, n: i64, replicas: usize, seed: u64) -> Self {
        let dim = direction.dim();
        let radius = (n * direction.linf()).max(1);
        let margin = default_margin(&direction, n);
        MuRequest {
            law,
            level,
            window: Window { dim, radius, margin },
            direction,
            n,
            replicas,
            seed,
            cluster_law: None,
            max_enlargements: 2,
        }
    }
}

/// Time-constant estimate along one direction at one scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuEstimate {
    pub direction: Vertex,
    pub n: i64,
    pub mean: f64,
    pub stderr: f64,
    pub replicas: usize,
    pub law: String,
    pub level: f64,
    /// `min_{k <= n}` of the mean of `T~(0, kx) / k`, when computed.
    pub subadditive_min: Option<f64>,
    /// Per-replica values of `T~(0, nx) / n`, in replica order.
    pub samples: Vec<f64>,
    /// Replicas rerun on an enlarged window because the geodesic hit the boundary.
    pub reruns: usize,
}

impl MuEstimate {
    pub fn mean_se(&self) -> MeanSe {
        MeanSe { mean: self.mean, stderr: self.stderr, count: self.replicas }
    }
}

struct ReplicaMu {
    /// `T~(0, kx)` for `k = 1..=n`.
    times: Vec<f64>,
    reruns: usize,
}

fn mu_replica(req: &MuRequest<'_>, replica: u64) -> Result<ReplicaMu> {
    let mut window = req.window;
    let mut reruns = 0;
    loop {
        let field = EdgeField::generate(req.seed, replica, &window);
        let cluster_law = req.cluster_law.unwrap_or(req.law);
        let analysis = ClusterAnalysis::analyze(&field.time_view(cluster_law).level_set(req.level));
        let region = field.region();
        let origin = regularize(&Vertex::origin(window.dim), &analysis)?;
        let times = field.time_view(req.law).times();
        let src = region.index_of(origin.projected.coords()).expect("inside");
        let sp = ShortestPaths::compute(region, &times, src);
        let mut out = Vec::with_capacity(req.n as usize);
        let mut last_target = src;
        for k in 1..=req.n {
            let target = regularize(&req.direction.scale(k), &analysis)?;
            let idx = region.index_of(target.projected.coords()).expect("inside");
            out.push(sp.dist(idx));
            last_target = idx;
        }
        let touches = sp
            .path_indices(last_target)
            .is_some_and(|p| p.iter().any(|&i| region.on_boundary(i)));
        if touches && reruns < req.max_enlargements as usize {
            window.margin = (window.margin * 2).max(1);
            reruns += 1;
            continue;
        }
        return Ok(ReplicaMu { times: out, reruns });
    }
}

/// Estimates `mu(x)` by averaging `T~(0, nx) / n` over independent replicas.
pub fn mu_estimate_with(req: &MuRequest<'_>) -> Result<MuEstimate> {
    if req.replicas == 0 || req.n < 1 {
        return Err(Error::InvalidInput("mu estimate needs n >= 1 and at least one replica".into()));
    }
    if req.window.radius < req.n * req.direction.linf() {
        return Err(Error::WindowTooSmall(format!(
            "window radius {} is below n*|x|_inf = {}",
            req.window.radius,
            req.n * req.direction.linf()
        )));
    }
    let per: Vec<ReplicaMu> = (0..req.replicas as u64)
        .into_par_iter()
        .map(|r| mu_replica(req, r))
        .collect::<Result<_>>()?;
    let n = req.n as usize;
    let samples: Vec<f64> = per.iter().map(|r| r.times[n - 1] / req.n as f64).collect();
    let est = MeanSe::from_samples(&samples);
    let subadditive_min = (1..=n)
        .map(|k| per.iter().map(|r| r.times[k - 1] / k as f64).sum::<f64>() / per.len() as f64)
        .fold(f64::INFINITY, f64::min);
    Ok(MuEstimate {
        direction: req.direction.clone(),
        n: req.n,
        mean: est.mean,
        stderr: est.stderr,
        replicas: req.replicas,
        law: req.law.name.clone(),
        level: req.level,
        subadditive_min: Some(subadditive_min),
        samples,
        reruns: per.iter().map(|r| r.reruns).sum(),
    })
}

pub fn mu_estimate(
    law: &DistributionSpec,
    level: f64,
    direction: &Vertex,
    n: i64,
    replicas: usize,
    window: &Window,
    seed: u64,
) -> Result<MuEstimate> {
    let mut req = MuRequest::new(law, level, direction.clone(), n, replicas, seed);
    req.window = *window;
    mu_estimate_with(&req)
}

/// Result of estimating `mu` for a family of truncations `G^K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationSweep {
    pub levels: Vec<f64>,
    pub per_level: Vec<MuEstimate>,
    pub base: MuEstimate,
    /// Per replica, `T~_{G^K}(0, nx)` for each level in order.
    pub pathwise: Vec<Vec<f64>>,
    /// Replicas on which `K -> T~_{G^K}` failed to be nondecreasing.
    pub monotonicity_violations: usize,
    /// Replicas on which some `T~_{G^K}` exceeded the finite majorant.
    pub majorant_violations: usize,
}

/// Estimates `mu_{G^K}(x)` for each `K` with all truncations sharing the
/// field and the regularization cluster `{t_G <= M0}`, so that the per-replica
/// values are pathwise comparable.
pub fn truncation_sweep(
    law: &DistributionSpec,
    m0: f64,
    levels: &[f64],
    direction: &Vertex,
    n: i64,
    replicas: usize,
    window: &Window,
    seed: u64,
) -> Result<TruncationSweep> {
    if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("truncation levels must be nonempty and increasing".into()));
    }
    if levels[0] < m0 {
        return Err(Error::InvalidInput(format!(
            "smallest truncation level {} is below M0 = {m0}",
            levels[0]
        )));
    }
    if replicas == 0 || n < 1 {
        return Err(Error::InvalidInput("truncation sweep needs n >= 1 and replicas >= 1".into()));
    }
    if window.radius < n * direction.linf() {
        return Err(Error::WindowTooSmall(format!(
            "window radius {} is below n*|x|_inf = {}",
            window.radius,
            n * direction.linf()
        )));
    }
    let truncated: Vec<DistributionSpec> = levels.iter().map(|&k| law.truncate(k)).collect::<Result<_>>()?;
    let majorant = law.replace_infinity(*levels.last().expect("nonempty"))?;

    struct Rep {
        per_k: Vec<f64>,
        base: f64,
        majorant: f64,
    }
    let reps: Vec<Rep> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| -> Result<Rep> {
            let field = EdgeField::generate(seed, r, window);
            let region = field.region();
            let analysis = ClusterAnalysis::analyze(&field.time_view(law).level_set(m0));
            let a = regularize(&Vertex::origin(window.dim), &analysis)?;
            let b = regularize(&direction.scale(n), &analysis)?;
            let ia = region.index_of(a.projected.coords()).expect("inside");
            let ib = region.index_of(b.projected.coords()).expect("inside");
            let solve = |l: &DistributionSpec| {
                ShortestPaths::compute_until(region, &field.time_view(l).times(), ia, Some(ib)).dist(ib)
            };
            Ok(Rep {
                per_k: truncated.iter().map(solve).collect(),
                base: solve(law),
                majorant: solve(&majorant),
            })
        })
        .collect::<Result<_>>()?;

    let nf = n as f64;
    let estimate = |label: &str, level: f64, values: Vec<f64>| {
        let samples: Vec<f64> = values.iter().map(|t| t / nf).collect();
        let est = MeanSe::from_samples(&samples);
        MuEstimate {
            direction: direction.clone(),
            n,
            mean: est.mean,
            stderr: est.stderr,
            replicas,
            law: label.to_string(),
            level,
            subadditive_min: None,
            samples,
            reruns: 0,
        }
    };
    let per_level = truncated
        .iter()
        .enumerate()
        .map(|(i, l)| estimate(&l.name, m0, reps.iter().map(|r| r.per_k[i]).collect()))
        .collect();
    let base = estimate(&law.name, m0, reps.iter().map(|r| r.base).collect());
    let monotonicity_violations = reps
        .iter()
        .filter(|r| r.per_k.windows(2).any(|w| w[0] > w[1]))
        .count();
    let majorant_violations = reps
        .iter()
        .filter(|r| r.per_k.iter().any(|&t| t > r.majorant))
        .count();
    Ok(TruncationSweep {
        levels: levels.to_vec(),
        per_level,
        base,
        pathwise: reps.into_iter().map(|r| r.per_k).collect(),
        monotonicity_violations,
        majorant_violations,
    })
}
