use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BoxClassification, BoxFlags, RenormParams};
use crate::cluster::{ClusterAnalysis, UNREACHED};
use crate::error::{Error, Result};
use crate::field::{BondConfig, EdgeField, FieldKey};
use crate::lattice::{cube_offsets, MacroBox, MacroIndex, Region};
use crate::stats::quantile;

/// Classifies every block whose enlarged box fits inside the field's region.
pub fn classify(params: &RenormParams, field: &EdgeField) -> Result<BoxClassification> {
    let region = field.region();
    let n = params.scale;
    let side = 2 * n + 1;
    let ranges: Vec<(i64, i64)> = (0..region.dim())
        .map(|k| {
            let lo = (region.lo()[k] + 3 * n + side - 1).div_euclid(side);
            let hi = (region.hi()[k] - 3 * n).div_euclid(side);
            (lo, hi)
        })
        .collect();
    if ranges.iter().any(|(lo, hi)| lo > hi) {
        return Err(Error::WindowTooSmall(format!(
            "no enlarged block of scale {n} fits in the field region"
        )));
    }
    let mut indices = vec![Vec::new()];
    for &(lo, hi) in &ranges {
        indices = indices
            .into_iter()
            .flat_map(|p: Vec<i64>| {
                (lo..=hi).map(move |c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    let indices: Vec<MacroIndex> = indices.into_iter().map(MacroIndex).collect();
    classify_indices(params, field, &indices)
}

pub fn classify_indices(params: &RenormParams, field: &EdgeField, indices: &[MacroIndex]) -> Result<BoxClassification> {
    params.validate()?;
    let region = field.region();
    for i in indices {
        let big = MacroBox { index: i.clone(), scale: params.scale }.enlarged();
        if i.dim() != region.dim() || !region.contains_region(&big) {
            return Err(Error::WindowTooSmall(format!(
                "enlarged block {i} at scale {} is not covered by the field region",
                params.scale
            )));
        }
    }
    let p0 = field.open_view(params.p0).bonds();
    let q = field.open_view(params.q).bonds();
    let verdicts: Vec<(BoxFlags, Option<Vec<usize>>)> =
        indices.par_iter().map(|i| classify_box(params, &p0, &q, i)).collect();
    let mut grid = BTreeMap::new();
    let mut clusters = BTreeMap::new();
    for (i, (flags, cluster)) in indices.iter().zip(verdicts) {
        grid.insert(i.clone(), flags);
        if let Some(c) = cluster {
            clusters.insert(i.clone(), c);
        }
    }
    Ok(BoxClassification { scale: params.scale, region: region.clone(), grid, clusters })
}

struct Designated {
    big: Region,
    bonds: BondConfig,
    members: Vec<bool>,
}

/// The unique `p0`-cluster of `B'` with more than `N` vertices.
fn designated_cluster(scale: i64, p0: &BondConfig, index: &MacroIndex) -> Option<Designated> {
    let big = MacroBox { index: index.clone(), scale }.enlarged();
    let bonds = p0.restrict(&big);
    let an = ClusterAnalysis::analyze(&bonds);
    let mut large = (0..an.num_components() as u32).filter(|&c| an.size(c) > scale as usize);
    let c = large.next()?;
    if large.next().is_some() {
        return None;
    }
    let members = (0..big.num_vertices()).map(|v| an.label_of_index(v) == c).collect();
    Some(Designated { big, bonds, members })
}

fn classify_box(
    params: &RenormParams,
    p0: &BondConfig,
    q: &BondConfig,
    index: &MacroIndex,
) -> (BoxFlags, Option<Vec<usize>>) {
    let Some(des) = designated_cluster(params.scale, p0, index) else {
        return (BoxFlags::default(), None);
    };
    let d = index.dim();
    let center = MacroBox { index: index.clone(), scale: params.scale }.center();
    let crossing = cube_offsets(d, 1).into_iter().all(|off| {
        let c: Vec<i64> = center.iter().zip(&off).map(|(c, e)| c + 2 * params.scale * e).collect();
        crosses_every_axis(&des, &Region::cube(&c, params.scale))
    });
    let chemical = chemical_ok(&des, params.scale, params.chemical_bound());
    let shielding = shielding_conservative(&q.restrict(&des.big), &des.members, params.scale as usize);
    let flags = BoxFlags { unique: true, crossing, chemical, shielding };
    let cluster = flags.is_good().then(|| {
        let mut c: Vec<usize> = (0..des.big.num_vertices())
            .filter(|&v| des.members[v])
            .map(|v| p0.region.index_of(&des.big.coords_of(v)).expect("inside"))
            .collect();
        c.sort_unstable();
        c
    });
    (flags, cluster)
}

fn crosses_every_axis(des: &Designated, sub: &Region) -> bool {
    let d = sub.dim();
    let mut open = vec![false; sub.num_edge_slots()];
    for lo in 0..sub.num_vertices() {
        let g = des.big.index_of(&sub.coords_of(lo)).expect("sub-block inside B'");
        if !des.members[g] {
            continue;
        }
        for axis in 0..d {
            if sub.step_up(lo, axis).is_some() {
                open[lo * d + axis] = des.bonds.open[g * d + axis];
            }
        }
    }
    let an = ClusterAnalysis::analyze(&BondConfig { region: sub.clone(), open });
    (0..d).all(|k| (0..an.num_components() as u32).any(|c| an.crosses(c, k)))
}

struct Bfs {
    dist: Vec<u32>,
    touched: Vec<usize>,
}

impl Bfs {
    fn new(n: usize) -> Self {
        Bfs { dist: vec![UNREACHED; n], touched: Vec::new() }
    }

    fn run(&mut self, bonds: &BondConfig, members: &[bool], src: usize, limit: u32) {
        for &v in &self.touched {
            self.dist[v] = UNREACHED;
        }
        self.touched.clear();
        self.dist[src] = 0;
        self.touched.push(src);
        let mut head = 0;
        while head < self.touched.len() {
            let v = self.touched[head];
            head += 1;
            let dv = self.dist[v];
            if dv >= limit {
                continue;
            }
            bonds.region.for_each_neighbor(v, |w, slot| {
                if bonds.open[slot] && members[w] && self.dist[w] == UNREACHED {
                    self.dist[w] = dv + 1;
                    self.touched.push(w);
                }
            });
        }
    }
}

/// Exact check that all cluster pairs at sup-distance at least `N` are
/// within chemical distance `bound` inside `B'`. Vertices whose distance to a
/// central landmark plus the landmark's eccentricity is within the bound
/// satisfy every pair by the triangle inequality; the remaining candidates
/// are checked pairwise.
fn chemical_ok(des: &Designated, scale: i64, bound: u32) -> bool {
    let region = &des.big;
    let d = region.dim();
    let members: Vec<usize> = (0..region.num_vertices()).filter(|&v| des.members[v]).collect();
    let center: Vec<i64> = (0..d).map(|k| (region.lo()[k] + region.hi()[k]) / 2).collect();
    let landmark = *members
        .iter()
        .min_by_key(|&&v| (0..d).map(|k| (region.coord(v, k) - center[k]).abs()).max().unwrap_or(0))
        .expect("designated cluster is nonempty");
    let mut bfs = Bfs::new(region.num_vertices());
    bfs.run(&des.bonds, &des.members, landmark, u32::MAX);
    let from_landmark = bfs.dist.clone();
    let ecc = members.iter().map(|&v| from_landmark[v]).max().unwrap_or(0);
    let candidates: Vec<usize> = members
        .iter()
        .copied()
        .filter(|&v| from_landmark[v] as u64 + ecc as u64 > bound as u64)
        .collect();
    if candidates.len() < 2 {
        return true;
    }
    let coords: Vec<Vec<i64>> = candidates.iter().map(|&v| region.coords_of(v)).collect();
    let far = |a: usize, b: usize| (0..d).any(|k| (coords[a][k] - coords[b][k]).abs() >= scale);
    for a in 0..candidates.len() {
        for b in a + 1..candidates.len() {
            if far(a, b) && from_landmark[candidates[a]].abs_diff(from_landmark[candidates[b]]) > bound {
                return false;
            }
        }
    }
    for a in 0..candidates.len() - 1 {
        bfs.run(&des.bonds, &des.members, candidates[a], bound);
        for b in a + 1..candidates.len() {
            if far(a, b) && bfs.dist[candidates[b]] == UNREACHED {
                return false;
            }
        }
    }
    true
}

/// Every `q`-open component of `B'` minus the cluster has at most `N` vertices.
fn shielding_conservative(q: &BondConfig, members: &[bool], scale: usize) -> bool {
    let an = ClusterAnalysis::analyze(&avoiding(q, members));
    an.sizes().iter().all(|&s| s <= scale)
}

fn avoiding(q: &BondConfig, members: &[bool]) -> BondConfig {
    let region = &q.region;
    let mut open = q.open.clone();
    for (slot, o) in open.iter_mut().enumerate() {
        if *o {
            let (a, b) = region.slot_endpoints(slot).expect("open slots are live");
            *o = !members[a] && !members[b];
        }
    }
    BondConfig { region: region.clone(), open }
}

/// Length in edges of the longest self-avoiding open path, capped at `cap`.
pub fn longest_avoiding_path(bonds: &BondConfig, cap: usize) -> usize {
    fn dfs(bonds: &BondConfig, v: usize, depth: usize, cap: usize, on_path: &mut [bool]) -> usize {
        if depth >= cap {
            return depth;
        }
        let mut best = depth;
        for (w, slot) in bonds.region.neighbors(v) {
            if bonds.open[slot] && !on_path[w] {
                on_path[w] = true;
                best = best.max(dfs(bonds, w, depth + 1, cap, on_path));
                on_path[w] = false;
                if best >= cap {
                    break;
                }
            }
        }
        best
    }
    let n = bonds.region.num_vertices();
    let mut on_path = vec![false; n];
    let mut best = 0;
    for v in 0..n {
        on_path[v] = true;
        best = best.max(dfs(bonds, v, 0, cap, &mut on_path));
        on_path[v] = false;
        if best >= cap {
            break;
        }
    }
    best
}

/// Condition (iv) read literally for self-avoiding paths: no `q`-open
/// self-avoiding path of at least `N` edges avoids the designated cluster.
/// `None` when condition (i) fails. Exhaustive, so limited to `N <= 6`.
pub fn shielding_exact(params: &RenormParams, field: &EdgeField, index: &MacroIndex) -> Result<Option<bool>> {
    const MAX_SCALE: i64 = 6;
    if params.scale > MAX_SCALE {
        return Err(Error::TooLarge { size: params.scale as usize, limit: MAX_SCALE as usize });
    }
    let big = MacroBox { index: index.clone(), scale: params.scale }.enlarged();
    if !field.region().contains_region(&big) {
        return Err(Error::WindowTooSmall(format!("enlarged block {index} is not covered by the field")));
    }
    let p0 = field.open_view(params.p0).bonds();
    let Some(des) = designated_cluster(params.scale, &p0, index) else {
        return Ok(None);
    };
    let q = field.open_view(params.q).bonds().restrict(&big);
    let cap = params.scale as usize;
    Ok(Some(longest_avoiding_path(&avoiding(&q, &des.members), cap) < cap))
}

/// Empirical ratio `D / |x - y|_inf` over pairs of the largest `p0`-cluster
/// of `B'_N(0)` at sup-distance at least `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaCalibration {
    pub dim: usize,
    pub p0: f64,
    pub scale: i64,
    pub pairs: usize,
    pub ratio_quantile: f64,
    /// Twice the quantile: pairs in `B'` can be `6N` apart while the
    /// condition compares with `3 beta N`.
    pub beta: f64,
}

pub fn calibrate_beta(dim: usize, p0: f64, scale: i64, pairs: usize, quantile_level: f64, seed: u64) -> Result<BetaCalibration> {
    crate::lattice::check_dim(dim)?;
    if scale < 1 || pairs == 0 {
        return Err(Error::InvalidInput("beta calibration needs N >= 1 and pairs >= 1".into()));
    }
    const SOURCES: usize = 8;
    const TARGETS: usize = 8;
    let region = Region::cube(&vec![0; dim], 3 * scale);
    let mut ratios = Vec::with_capacity(pairs);
    let mut replica = 0u64;
    let max_replicas = (pairs as u64).max(64) * 4;
    while ratios.len() < pairs {
        if replica >= max_replicas {
            return Err(Error::NoGiant(format!(
                "too few replicas with a unique large p0-cluster at p0 = {p0}"
            )));
        }
        let field = EdgeField::generate_in(FieldKey::new(seed, replica), region.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ replica.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        replica += 1;
        let bonds = field.open_view(p0).bonds();
        let Some(des) = designated_cluster(scale, &bonds, &MacroIndex(vec![0; dim])) else {
            continue;
        };
        let members: Vec<usize> = (0..region.num_vertices()).filter(|&v| des.members[v]).collect();
        let mut bfs = Bfs::new(region.num_vertices());
        for _ in 0..SOURCES {
            let x = members[rng.gen_range(0..members.len())];
            bfs.run(&des.bonds, &des.members, x, u32::MAX);
            let cx = region.coords_of(x);
            let mut found = 0;
            for _ in 0..TARGETS * 8 {
                let y = members[rng.gen_range(0..members.len())];
                let cy = region.coords_of(y);
                let linf = cx.iter().zip(&cy).map(|(a, b)| (a - b).abs()).max().unwrap_or(0);
                if linf >= scale {
                    ratios.push(bfs.dist[y] as f64 / linf as f64);
                    found += 1;
                    if found == TARGETS || ratios.len() == pairs {
                        break;
                    }
                }
            }
            if ratios.len() == pairs {
                break;
            }
        }
    }
    let q = quantile(&ratios, quantile_level);
    Ok(BetaCalibration { dim, p0, scale, pairs, ratio_quantile: q, beta: 2.0 * q })
}
