//! Connectivity of bond configurations: open components, the window-crossing
//! giant used as a stand-in for the infinite cluster, chemical distances, and
//! projection of arbitrary points onto the giant.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{BondConfig, EdgeField};
use crate::lattice::{Region, Vertex, Window};
use crate::stats::{proportion, MeanSe};

/// Marker for unreachable vertices in distance arrays.
pub const UNREACHED: u32 = u32::MAX;

#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let p = self.parent[x] as usize;
            self.parent[x] = self.parent[p];
            x = p;
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb as u32,
            std::cmp::Ordering::Greater => self.parent[rb] = ra as u32,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra as u32;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Components of a bond configuration.
///
/// Component ids are dense and numbered by the smallest vertex index they
/// contain, so the labelling is canonical.
#[derive(Clone, Debug)]
pub struct ClusterAnalysis {
    region: Region,
    labels: Vec<u32>,
    sizes: Vec<usize>,
    /// `crossing[id][axis]`: the component touches both faces orthogonal to `axis`.
    crossing: Vec<Vec<bool>>,
    giant: Option<u32>,
}

impl ClusterAnalysis {
    pub fn analyze(bonds: &BondConfig) -> ClusterAnalysis {
        let region = bonds.region.clone();
        let n = region.num_vertices();
        let d = region.dim();
        let mut uf = UnionFind::new(n);
        for slot in 0..region.num_edge_slots() {
            if bonds.open[slot] {
                if let Some((a, b)) = region.slot_endpoints(slot) {
                    uf.union(a, b);
                }
            }
        }
        let mut root_label = vec![UNREACHED; n];
        let mut labels = vec![0u32; n];
        let mut sizes = Vec::new();
        let mut touch = Vec::new();
        for v in 0..n {
            let r = uf.find(v);
            if root_label[r] == UNREACHED {
                root_label[r] = sizes.len() as u32;
                sizes.push(0);
                touch.push(vec![[false; 2]; d]);
            }
            let id = root_label[r] as usize;
            labels[v] = id as u32;
            sizes[id] += 1;
            for (k, t) in touch[id].iter_mut().enumerate() {
                t[0] |= region.on_face(v, k, false);
                t[1] |= region.on_face(v, k, true);
            }
        }
        let crossing: Vec<Vec<bool>> = touch
            .iter()
            .map(|t| t.iter().map(|f| f[0] && f[1]).collect())
            .collect();
        let giant = designate_giant(&sizes, &crossing);
        ClusterAnalysis { region, labels, sizes, crossing, giant }
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn num_components(&self) -> usize {
        self.sizes.len()
    }

    pub fn label_of_index(&self, idx: usize) -> u32 {
        self.labels[idx]
    }

    pub fn label(&self, v: &Vertex) -> Option<u32> {
        self.region.index_of(v.coords()).map(|i| self.labels[i])
    }

    pub fn size(&self, id: u32) -> usize {
        self.sizes[id as usize]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn crosses(&self, id: u32, axis: usize) -> bool {
        self.crossing[id as usize][axis]
    }

    pub fn giant(&self) -> Option<u32> {
        self.giant
    }

    pub fn giant_size(&self) -> usize {
        self.giant.map_or(0, |g| self.size(g))
    }

    #[inline]
    pub fn in_giant_index(&self, idx: usize) -> bool {
        self.giant == Some(self.labels[idx])
    }

    pub fn in_giant(&self, v: &Vertex) -> bool {
        self.region.index_of(v.coords()).is_some_and(|i| self.in_giant_index(i))
    }

    pub fn component_indices(&self, id: u32) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == id).collect()
    }

    fn require_giant(&self) -> Result<u32> {
        self.giant.ok_or_else(|| {
            Error::NoGiant(format!(
                "largest component does not cross the {}-vertex window in every direction; enlarge the window or raise the threshold",
                self.region.num_vertices()
            ))
        })
    }
}

/// The unique largest component, kept only if it crosses every axis.
fn designate_giant(sizes: &[usize], crossing: &[Vec<bool>]) -> Option<u32> {
    let max = *sizes.iter().max()?;
    let mut largest = sizes.iter().enumerate().filter(|(_, &s)| s == max);
    let (id, _) = largest.next()?;
    if largest.next().is_some() || max < 2 {
        return None;
    }
    crossing[id].iter().all(|&c| c).then_some(id as u32)
}

/// Breadth-first hop distances from `src` over open edges whose endpoints
/// satisfy `allowed`. Unreached vertices hold [`UNREACHED`].
pub fn bfs_distances(
    bonds: &BondConfig,
    src: usize,
    allowed: impl Fn(usize) -> bool,
) -> Vec<u32> {
    let region = &bonds.region;
    let mut dist = vec![UNREACHED; region.num_vertices()];
    if !allowed(src) {
        return dist;
    }
    dist[src] = 0;
    let mut queue = VecDeque::from([src]);
    while let Some(v) = queue.pop_front() {
        let dv = dist[v];
        region.for_each_neighbor(v, |n, slot| {
            if bonds.open[slot] && dist[n] == UNREACHED && allowed(n) {
                dist[n] = dv + 1;
                queue.push_back(n);
            }
        });
    }
    dist
}

/// Shortest open path (by hops) between two indices, as a vertex-index
/// sequence; neighbours are explored in a fixed order so the result is
/// deterministic.
pub fn bfs_path(
    bonds: &BondConfig,
    src: usize,
    dst: usize,
    allowed: impl Fn(usize) -> bool,
) -> Option<Vec<usize>> {
    let region = &bonds.region;
    if !allowed(src) || !allowed(dst) {
        return None;
    }
    let mut parent = vec![usize::MAX; region.num_vertices()];
    parent[src] = src;
    let mut queue = VecDeque::from([src]);
    while let Some(v) = queue.pop_front() {
        if v == dst {
            break;
        }
        region.for_each_neighbor(v, |n, slot| {
            if bonds.open[slot] && parent[n] == usize::MAX && allowed(n) {
                parent[n] = v;
                queue.push_back(n);
            }
        });
    }
    if parent[dst] == usize::MAX {
        return None;
    }
    let mut path = vec![dst];
    let mut v = dst;
    while v != src {
        v = parent[v];
        path.push(v);
    }
    path.reverse();
    Some(path)
}

/// Hop distance between `a` and `b` inside their open cluster, `None` when
/// they lie in different components.
pub fn chemical_distance(a: &Vertex, b: &Vertex, analysis: &ClusterAnalysis, bonds: &BondConfig) -> Option<u64> {
    let region = analysis.region();
    let ia = region.index_of(a.coords())?;
    let ib = region.index_of(b.coords())?;
    if analysis.label_of_index(ia) != analysis.label_of_index(ib) {
        return None;
    }
    let d = bfs_distances(bonds, ia, |_| true)[ib];
    (d != UNREACHED).then_some(d as u64)
}

/// A point together with its projection onto the designated cluster.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegularizedPoint {
    pub original: Vertex,
    pub projected: Vertex,
}

/// The vertex of `region` satisfying `member` that is closest to `x` in L1,
/// ties broken by lexicographic order.
pub fn nearest_in(region: &Region, x: &Vertex, member: impl Fn(usize) -> bool) -> Option<Vertex> {
    let d = region.dim();
    let max_r: i64 = (0..d)
        .map(|k| (x.0[k] - region.lo()[k]).abs().max((region.hi()[k] - x.0[k]).abs()))
        .sum();
    let mut sphere = Vec::new();
    for r in 0..=max_r {
        sphere.clear();
        l1_sphere(x.coords(), r, &mut Vec::with_capacity(d), &mut sphere);
        sphere.sort();
        for c in &sphere {
            if let Some(idx) = region.index_of(c) {
                if member(idx) {
                    return Some(Vertex(c.clone()));
                }
            }
        }
    }
    None
}

fn l1_sphere(center: &[i64], r: i64, prefix: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
    let k = prefix.len();
    if k + 1 == center.len() {
        let mut c = prefix.clone();
        if r == 0 {
            c.push(center[k]);
            out.push(c);
        } else {
            let mut c2 = c.clone();
            c.push(center[k] - r);
            c2.push(center[k] + r);
            out.push(c);
            out.push(c2);
        }
        return;
    }
    for off in -r..=r {
        prefix.push(center[k] + off);
        l1_sphere(center, r - off.abs(), prefix, out);
        prefix.pop();
    }
}

/// Projection of `x` onto the giant of `analysis`.
pub fn regularize(x: &Vertex, analysis: &ClusterAnalysis) -> Result<RegularizedPoint> {
    let g = analysis.require_giant()?;
    let projected = nearest_in(analysis.region(), x, |i| analysis.label_of_index(i) == g)
        .expect("giant is nonempty");
    Ok(RegularizedPoint { original: x.clone(), projected })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub p: f64,
    pub estimate: MeanSe,
}

/// Fraction of replicas in which the origin belongs to the window giant.
pub fn theta_estimate(p: f64, window: &Window, replicas: usize, seed: u64) -> Result<ThetaEstimate> {
    if replicas == 0 {
        return Err(Error::InvalidInput("theta estimate needs at least one replica".into()));
    }
    let hits: Vec<bool> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let field = EdgeField::generate(seed, r, window);
            let analysis = ClusterAnalysis::analyze(&field.open_view(p).bonds());
            analysis.in_giant(&Vertex::origin(window.dim))
        })
        .collect();
    let successes = hits.iter().filter(|&&h| h).count();
    Ok(ThetaEstimate { p, estimate: proportion(successes, replicas) })
}
