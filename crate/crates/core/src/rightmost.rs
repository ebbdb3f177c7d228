//! Right-most paths in the plane, their right boundaries and the boundary
//! distance `b_p`.
//!
//! Directions are numbered counterclockwise: east 0, north 1, west 2,
//! south 3. The fan at a pivot runs clockwise from the outgoing direction to
//! the incoming one (the direction back to the previous vertex), both
//! excluded; a backtrack has the three remaining edges as its fan.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{regularize, ClusterAnalysis};
use crate::error::{Error, Result};
use crate::field::{EdgeField, OpenView};
use crate::fpp::MuEstimate;
use crate::lattice::{Edge, LatticePath, Region, Vertex, Window};
use crate::stats::MeanSe;

pub const DIRECTIONS: [[i64; 2]; 4] = [[1, 0], [0, 1], [-1, 0], [0, -1]];

#[inline]
pub fn clockwise(d: usize) -> usize {
    (d + 3) % 4
}

/// Direction of the unit step from `a` to `b`.
pub fn direction(a: &Vertex, b: &Vertex) -> Option<usize> {
    let (dx, dy) = (b.0[0] - a.0[0], b.0[1] - a.0[1]);
    DIRECTIONS.iter().position(|&[x, y]| x == dx && y == dy)
}

/// Directions of the fan at a pivot entered from `incoming` (pointing back to
/// the previous vertex) and left along `outgoing`.
pub fn fan(outgoing: usize, incoming: usize) -> impl Iterator<Item = usize> {
    let mut d = clockwise(outgoing);
    std::iter::from_fn(move || {
        if d == incoming || (d == outgoing && incoming == outgoing) {
            return None;
        }
        let out = d;
        d = clockwise(d);
        Some(out)
    })
}

fn step(v: &Vertex, dir: usize) -> Vertex {
    let [dx, dy] = DIRECTIONS[dir];
    Vertex::new(vec![v.0[0] + dx, v.0[1] + dy])
}

/// An oriented edge.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Dart {
    pub edge: Edge,
    /// Whether the tail is the lower endpoint of the edge.
    pub forward: bool,
}

impl Dart {
    pub fn new(tail: &Vertex, head: &Vertex) -> Result<Dart> {
        let edge = Edge::between(tail, head)?;
        let forward = edge.lower() == tail;
        Ok(Dart { edge, forward })
    }

    pub fn tail(&self) -> Vertex {
        if self.forward {
            self.edge.lower().clone()
        } else {
            self.edge.upper()
        }
    }

    pub fn head(&self) -> Vertex {
        if self.forward {
            self.edge.upper()
        } else {
            self.edge.lower().clone()
        }
    }
}

/// Right-boundary edges of a walk together with how many are open.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryProfile {
    pub boundary_edges: BTreeSet<Edge>,
    pub open_count: Option<usize>,
}

impl BoundaryProfile {
    pub fn with_open(mut self, view: &OpenView<'_>) -> Self {
        self.open_count = Some(self.boundary_edges.iter().filter(|e| view.is_open(e)).count());
        self
    }
}

fn check_planar(r: &LatticePath) -> Result<()> {
    match r.start() {
        Some(v) if v.dim() != 2 => Err(Error::InvalidInput("right-most paths live in dimension 2".into())),
        _ => Ok(()),
    }
}

/// The fan edges at every interior vertex of `r`, pivot by pivot.
pub fn pivot_fans(r: &LatticePath) -> Result<Vec<Vec<Edge>>> {
    check_planar(r)?;
    let v = r.vertices();
    Ok((1..v.len().saturating_sub(1))
        .map(|i| {
            let out = direction(&v[i], &v[i + 1]).expect("validated path");
            let inc = direction(&v[i], &v[i - 1]).expect("validated path");
            fan(out, inc)
                .map(|d| Edge::between(&v[i], &step(&v[i], d)).expect("unit step"))
                .collect()
        })
        .collect())
}

pub fn right_boundary(r: &LatticePath) -> Result<BoundaryProfile> {
    Ok(BoundaryProfile {
        boundary_edges: pivot_fans(r)?.into_iter().flatten().collect(),
        open_count: None,
    })
}

/// Each dart used at most once and no traversed edge on the right boundary.
pub fn is_rightmost(r: &LatticePath) -> Result<bool> {
    check_planar(r)?;
    let v = r.vertices();
    let mut darts = BTreeSet::new();
    for w in v.windows(2) {
        if !darts.insert(Dart::new(&w[0], &w[1])?) {
            return Ok(false);
        }
    }
    let boundary = right_boundary(r)?.boundary_edges;
    Ok(!r.edges().any(|e| boundary.contains(&e)))
}

fn neighbor_slot(region: &Region, idx: usize, dir: usize) -> Option<(usize, usize)> {
    let axis = dir % 2;
    if dir < 2 {
        region.step_up(idx, axis).map(|w| (w, idx * 2 + axis))
    } else {
        region.step_down(idx, axis).map(|w| (w, w * 2 + axis))
    }
}

/// Minimum-cost open walk from `x` to `y` over dart states, each pivot
/// costing the number of open edges in its fan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySearch {
    pub cost: u64,
    pub walk: LatticePath,
}

pub fn b_search(x: &Vertex, y: &Vertex, view: &OpenView<'_>) -> Result<Option<BoundarySearch>> {
    let region = view.field.region();
    if region.dim() != 2 {
        return Err(Error::InvalidInput("the boundary distance is defined in dimension 2".into()));
    }
    let index = |v: &Vertex| {
        region
            .index_of(v.coords())
            .ok_or_else(|| Error::InvalidInput(format!("vertex {v} lies outside the window")))
    };
    let ix = index(x)?;
    let iy = index(y)?;
    if ix == iy {
        return Ok(Some(BoundarySearch { cost: 0, walk: LatticePath::single(x.clone()) }));
    }
    let open = |slot: usize| view.is_open_slot(slot);
    // State `4 * head + d`: the dart arriving at `head` moving in direction `d`.
    let n = region.num_vertices() * 4;
    let mut cost = vec![u64::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    for d in 0..4 {
        if let Some((w, slot)) = neighbor_slot(region, ix, d) {
            if open(slot) {
                let s = 4 * w + d;
                cost[s] = 0;
                heap.push(Reverse((0u64, s)));
            }
        }
    }
    let mut best = None;
    while let Some(Reverse((c, s))) = heap.pop() {
        if c > cost[s] {
            continue;
        }
        let (v, arrived) = (s / 4, s % 4);
        if v == iy {
            best = Some(s);
            break;
        }
        let incoming = (arrived + 2) % 4;
        for out in 0..4 {
            let Some((w, slot)) = neighbor_slot(region, v, out) else { continue };
            if !open(slot) {
                continue;
            }
            let pivot: u64 = fan(out, incoming)
                .filter(|&d| neighbor_slot(region, v, d).is_some_and(|(_, sl)| open(sl)))
                .count() as u64;
            let t = 4 * w + out;
            if c + pivot < cost[t] {
                cost[t] = c + pivot;
                parent[t] = s;
                heap.push(Reverse((c + pivot, t)));
            }
        }
    }
    let Some(end) = best else {
        return Ok(None);
    };
    let mut rev = vec![iy];
    let mut s = end;
    loop {
        let p = parent[s];
        if p == usize::MAX {
            rev.push(ix);
            break;
        }
        rev.push(p / 4);
        s = p;
    }
    rev.reverse();
    let walk = LatticePath::new(rev.into_iter().map(|i| region.vertex(i)).collect())?;
    Ok(Some(BoundarySearch { cost: cost[end], walk }))
}

/// `b_p(x, y)`, or `None` when no open walk joins them in the window.
pub fn b_distance(x: &Vertex, y: &Vertex, view: &OpenView<'_>) -> Result<Option<u64>> {
    Ok(b_search(x, y, view)?.map(|s| s.cost))
}

/// Estimates `beta_p(x)` from `b_p` between the projections of `0` and `nx`
/// onto the giant of the `p0`-open edges (`p0 = p` for the native cluster).
#[allow(clippy::too_many_arguments)]
pub fn beta_estimate(
    p: f64,
    p0: Option<f64>,
    direction: &Vertex,
    n: i64,
    replicas: usize,
    window: &Window,
    seed: u64,
) -> Result<MuEstimate> {
    if window.dim != 2 || direction.dim() != 2 {
        return Err(Error::InvalidInput("beta estimates are planar".into()));
    }
    if replicas == 0 || n < 1 {
        return Err(Error::InvalidInput("beta estimate needs n >= 1 and replicas >= 1".into()));
    }
    let cluster_p = p0.unwrap_or(p);
    if cluster_p > p {
        return Err(Error::InvalidInput(format!("stabilizing threshold {cluster_p} exceeds p = {p}")));
    }
    if window.radius < n * direction.linf() {
        return Err(Error::WindowTooSmall(format!(
            "window radius {} is below n*|x|_inf = {}",
            window.radius,
            n * direction.linf()
        )));
    }
    let samples: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let field = EdgeField::generate(seed, r, window);
            let analysis = ClusterAnalysis::analyze(&field.open_view(cluster_p).bonds());
            let a = regularize(&Vertex::origin(2), &analysis)?;
            let b = regularize(&direction.scale(n), &analysis)?;
            let cost = b_distance(&a.projected, &b.projected, &field.open_view(p))?
                .expect("points of the giant are connected");
            Ok(cost as f64 / n as f64)
        })
        .collect::<Result<_>>()?;
    let est = MeanSe::from_samples(&samples);
    Ok(MuEstimate {
        direction: direction.clone(),
        n,
        mean: est.mean,
        stderr: est.stderr,
        replicas,
        law: format!("bernoulli({p})"),
        level: cluster_p,
        subadditive_min: None,
        samples,
        reruns: 0,
    })
}
