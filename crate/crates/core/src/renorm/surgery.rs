use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{bad_components, classify, is_star_connected, star_components, BadComponents, BoxClassification, RenormParams};
use crate::cluster::{bfs_distances, bfs_path, UNREACHED};
use crate::error::{Error, Result};
use crate::field::{BondConfig, EdgeField};
use crate::lattice::{macro_index_of, path_animal, Edge, LatticePath, MacroBox, MacroIndex, Vertex};

/// Route-length ceiling relative to [`route_bound_denominator`], frozen from
/// a pilot of 300 chains at `p0 = 0.85`, `N = 8` on seed 1 (observed maximum 1.0).
pub const ROUTE_RHO_HAT: f64 = 2.0;

/// `N n + N^d`, the scale against which route lengths are compared.
pub fn route_bound_denominator(blocks: usize, scale: i64, dim: usize) -> f64 {
    let n = scale as f64;
    n * blocks as f64 + n.powi(dim as i32)
}

/// Chronological loop erasure of a vertex walk.
pub fn loop_erase<T: Clone + Eq + std::hash::Hash>(walk: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(walk.len());
    let mut pos: HashMap<T, usize> = HashMap::new();
    for v in walk {
        if let Some(&k) = pos.get(v) {
            for w in out.drain(k + 1..) {
                pos.remove(&w);
            }
        } else {
            pos.insert(v.clone(), out.len());
            out.push(v.clone());
        }
    }
    out
}

/// Outcome of a path modification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurgeryReport {
    pub original: LatticePath,
    pub modified: LatticePath,
    /// Edges of the modified path that are not edges of the original.
    pub added: Vec<Edge>,
    /// Number of distinct `p`-closed edges of the original path.
    pub removed_bad: usize,
    /// Total size of the bad components meeting the path's animal.
    pub bad_mass: usize,
    pub animal_size: usize,
    /// `|added| / (N * bad_mass + N^d * removed_bad)`, zero when the denominator vanishes.
    pub bound_ratio: f64,
    /// Number of bypasses spliced in.
    pub bypasses: usize,
    /// Bad components whose boundaries were used.
    pub consulted_components: usize,
}

/// Classified field with the coupled bond configurations needed for routing
/// and surgery.
#[derive(Clone, Debug)]
pub struct Renormalization {
    pub params: RenormParams,
    pub classification: BoxClassification,
    pub bad: BadComponents,
    pub p0: BondConfig,
    pub p: BondConfig,
    pub q: BondConfig,
}

impl Renormalization {
    pub fn new(params: RenormParams, field: &EdgeField) -> Result<Self> {
        let classification = classify(&params, field)?;
        Ok(Self::from_classification(params, field, classification))
    }

    pub fn from_classification(params: RenormParams, field: &EdgeField, classification: BoxClassification) -> Self {
        let bad = bad_components(&classification);
        Renormalization {
            params,
            bad,
            classification,
            p0: field.open_view(params.p0).bonds(),
            p: field.open_view(params.p).bonds(),
            q: field.open_view(params.q).bonds(),
        }
    }

    fn scale(&self) -> i64 {
        self.params.scale
    }

    fn dim(&self) -> usize {
        self.p0.region.dim()
    }

    fn index(&self, v: &Vertex) -> Result<usize> {
        self.p0
            .region
            .index_of(v.coords())
            .ok_or_else(|| Error::PreconditionFailed(format!("vertex {v} lies outside the field region")))
    }

    fn vertex(&self, idx: usize) -> Vertex {
        self.p0.region.vertex(idx)
    }

    fn block_of(&self, idx: usize) -> MacroIndex {
        macro_index_of(&self.p0.region.coords_of(idx), self.scale())
    }

    /// Indicator of the union of enlarged blocks `B'` over `blocks`.
    fn enlarged_mask(&self, blocks: &BTreeSet<MacroIndex>) -> Vec<bool> {
        let region = &self.p0.region;
        let mut mask = vec![false; region.num_vertices()];
        for b in blocks {
            let big = MacroBox { index: b.clone(), scale: self.scale() }.enlarged();
            for v in 0..big.num_vertices() {
                if let Some(g) = region.index_of(&big.coords_of(v)) {
                    mask[g] = true;
                }
            }
        }
        mask
    }

    fn in_own_crossing_cluster(&self, idx: usize) -> bool {
        self.classification
            .crossing_cluster(&self.block_of(idx))
            .is_some_and(|c| c.binary_search(&idx).is_ok())
    }

    /// A `p0`-open path from `x` to `y` inside the enlarged blocks of a
    /// `*`-connected set of good blocks.
    pub fn route_in_good_region(&self, x: &Vertex, y: &Vertex, blocks: &BTreeSet<MacroIndex>) -> Result<LatticePath> {
        if x == y {
            return Ok(LatticePath::single(x.clone()));
        }
        if blocks.is_empty() || !is_star_connected(blocks) {
            return Err(Error::PreconditionFailed("routing blocks must form a nonempty *-connected set".into()));
        }
        if let Some(b) = blocks.iter().find(|b| self.classification.is_good(b) != Some(true)) {
            return Err(Error::PreconditionFailed(format!("routing block {b} is not good")));
        }
        let ix = self.index(x)?;
        let iy = self.index(y)?;
        for (name, idx) in [("start", ix), ("end", iy)] {
            if !blocks.contains(&self.block_of(idx)) || !self.in_own_crossing_cluster(idx) {
                return Err(Error::PreconditionFailed(format!(
                    "{name} point {} is not in the crossing cluster of a routing block",
                    self.vertex(idx)
                )));
            }
        }
        let mask = self.enlarged_mask(blocks);
        let path = bfs_path(&self.p0, ix, iy, |v| mask[v]).ok_or_else(|| {
            Error::RoutingFailed(format!("no p0-open path from {x} to {y} inside the enlarged blocks"))
        })?;
        LatticePath::new(path.into_iter().map(|i| self.vertex(i)).collect())
    }

    fn check_endpoint(&self, idx: usize, name: &str, spanning: &BTreeSet<MacroIndex>) -> Result<()> {
        let b = self.block_of(idx);
        match self.classification.is_good(&b) {
            None => Err(Error::PreconditionFailed(format!("{name} block {b} is not classified"))),
            Some(false) => Err(Error::PreconditionFailed(format!("{name} block {b} is bad"))),
            Some(true) if !self.in_own_crossing_cluster(idx) => Err(Error::PreconditionFailed(format!(
                "{name} point {} is not in the crossing cluster of its block",
                self.vertex(idx)
            ))),
            Some(true) if !spanning.contains(&b) => Err(Error::PreconditionFailed(format!(
                "{name} block {b} is not in the spanning cluster of good blocks"
            ))),
            Some(true) => Ok(()),
        }
    }

    /// Replaces the `p`-closed edges of a `q`-open path by `p0`-open bypasses
    /// through good blocks.
    pub fn modify_path(&self, gamma: &LatticePath) -> Result<SurgeryReport> {
        let n = self.scale();
        let d = self.dim();
        let region = &self.p0.region;
        if gamma.vertices().is_empty() {
            return Err(Error::InvalidInput("cannot modify an empty path".into()));
        }
        let idx: Vec<usize> = gamma.vertices().iter().map(|v| self.index(v)).collect::<Result<_>>()?;
        let slots: Vec<usize> = idx
            .windows(2)
            .map(|w| region.slot_between(w[0], w[1]).expect("validated path"))
            .collect();
        if let Some(k) = slots.iter().position(|&s| !self.q.open[s]) {
            return Err(Error::PreconditionFailed(format!(
                "path is not q-open: edge {} -> {} is q-closed",
                gamma.vertices()[k],
                gamma.vertices()[k + 1]
            )));
        }
        let spanning = self
            .classification
            .spanning_good_component()
            .ok_or_else(|| Error::PreconditionFailed("no spanning cluster of good blocks".into()))?;
        self.check_endpoint(idx[0], "start", &spanning)?;
        self.check_endpoint(*idx.last().expect("nonempty"), "end", &spanning)?;

        let blocks: Vec<MacroIndex> = idx.iter().map(|&i| self.block_of(i)).collect();
        let animal = path_animal(gamma, n);
        if let Some(b) = animal.boxes.iter().find(|b| !self.classification.grid.contains_key(b)) {
            return Err(Error::PreconditionFailed(format!("path visits unclassified block {b}")));
        }
        let met: BTreeSet<usize> = animal.boxes.iter().filter_map(|b| self.bad.component_of(b)).collect();
        let bad_mass: usize = met.iter().map(|&c| self.bad.components[c].len()).sum();

        let closed: Vec<usize> = (0..slots.len()).filter(|&k| !self.p.open[slots[k]]).collect();
        let removed_bad = closed.iter().map(|&k| slots[k]).collect::<BTreeSet<_>>().len();
        if closed.is_empty() {
            return Ok(SurgeryReport {
                original: gamma.clone(),
                modified: gamma.clone(),
                added: Vec::new(),
                removed_bad: 0,
                bad_mass,
                animal_size: animal.len(),
                bound_ratio: 0.0,
                bypasses: 0,
                consulted_components: 0,
            });
        }

        // Blocks holding a p-closed edge, and their surfaces of good blocks.
        let phi1: BTreeSet<MacroIndex> = closed
            .iter()
            .flat_map(|&k| [blocks[k].clone(), blocks[k + 1].clone()])
            .collect();
        let mut consulted = BTreeSet::new();
        let mut union = BTreeSet::new();
        for b in &phi1 {
            if let Some(c) = self.bad.component_of(b) {
                if self.bad.unresolved[c] {
                    return Err(Error::PreconditionFailed(format!(
                        "bad component of block {b} reaches the edge of the classified grid"
                    )));
                }
                consulted.insert(c);
            }
            union.extend(self.bad.boundary_of(b));
        }
        debug_assert!(consulted.is_subset(&met));
        let surfaces = star_components(union);

        // Visit intervals of each surface, nested ones dropped and
        // overlapping ones merged.
        let mut intervals: Vec<(usize, usize, BTreeSet<MacroIndex>)> = Vec::new();
        for s in surfaces {
            let hits: Vec<usize> = (0..blocks.len()).filter(|&k| s.contains(&blocks[k])).collect();
            let (Some(&first), Some(&last)) = (hits.first(), hits.last()) else {
                return Err(Error::RoutingFailed("a surface around a defect is never visited".into()));
            };
            intervals.push((first, last, s));
        }
        intervals.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        let mut merged: Vec<(usize, usize, BTreeSet<MacroIndex>)> = Vec::new();
        for (s, e, set) in intervals {
            match merged.last_mut() {
                Some(last) if e <= last.1 => {}
                Some(last) if s <= last.1 => {
                    last.1 = e;
                    last.2.extend(set);
                }
                _ => merged.push((s, e, set)),
            }
        }

        // Anchor each bypass at crossing-cluster vertices of the path just
        // outside its interval.
        struct Group {
            a: usize,
            b: usize,
            end: usize,
            blocks: BTreeSet<MacroIndex>,
            mask: Vec<bool>,
        }
        let last_pos = idx.len() - 1;
        let mut groups: Vec<Group> = Vec::new();
        for (s, e, set) in merged {
            let lo = groups.last().map_or(0, |g| g.b);
            if s >= lo {
                let mask = self.enlarged_mask(&set);
                let reach = self.cluster_reach(&set, &mask);
                if let Some(a) = (lo..=s).rev().find(|&k| reach[idx[k]]) {
                    let mut g = Group { a, b: 0, end: e, blocks: set, mask };
                    self.place_exit(&mut g.b, &mut g.blocks, &mut g.mask, g.a, g.end, &idx)?;
                    groups.push(g);
                    continue;
                }
            }
            let Some(g) = groups.last_mut() else {
                return Err(Error::RoutingFailed("no crossing-cluster anchor before the first defect".into()));
            };
            g.blocks.extend(set);
            g.end = g.end.max(e);
            g.mask = self.enlarged_mask(&g.blocks);
            self.place_exit(&mut g.b, &mut g.blocks, &mut g.mask, g.a, g.end, &idx)?;
        }
        debug_assert!(groups.iter().all(|g| g.a <= g.b && g.b <= last_pos));

        let mut walk: Vec<usize> = Vec::with_capacity(idx.len());
        let mut cursor = 0;
        for g in &groups {
            walk.extend_from_slice(&idx[cursor..g.a]);
            let route = bfs_path(&self.p0, idx[g.a], idx[g.b], |v| g.mask[v]).ok_or_else(|| {
                Error::RoutingFailed(format!(
                    "no p0-open bypass from {} to {}",
                    self.vertex(idx[g.a]),
                    self.vertex(idx[g.b])
                ))
            })?;
            walk.extend(route);
            walk.pop();
            cursor = g.b;
        }
        walk.extend_from_slice(&idx[cursor..]);
        let walk = loop_erase(&walk);

        let original_slots: BTreeSet<usize> = slots.iter().copied().collect();
        let modified = LatticePath::new(walk.iter().map(|&i| self.vertex(i)).collect())?;
        let added: Vec<Edge> = walk
            .windows(2)
            .filter(|w| !original_slots.contains(&region.slot_between(w[0], w[1]).expect("adjacent")))
            .map(|w| Edge::between(&self.vertex(w[0]), &self.vertex(w[1])).expect("adjacent"))
            .collect();
        let denom = n as f64 * bad_mass as f64 + (n as f64).powi(d as i32) * removed_bad as f64;
        let bound_ratio = if denom > 0.0 { added.len() as f64 / denom } else { 0.0 };
        Ok(SurgeryReport {
            original: gamma.clone(),
            modified,
            added,
            removed_bad,
            bad_mass,
            animal_size: animal.len(),
            bound_ratio,
            bypasses: groups.len(),
            consulted_components: consulted.len(),
        })
    }

    /// Vertices connected inside `mask` to a crossing cluster of one of `blocks`.
    fn cluster_reach(&self, blocks: &BTreeSet<MacroIndex>, mask: &[bool]) -> Vec<bool> {
        let mut reach = vec![false; mask.len()];
        for b in blocks {
            let Some(c) = self.classification.crossing_cluster(b) else { continue };
            let Some(&seed) = c.first() else { continue };
            if reach[seed] {
                continue;
            }
            for (v, dist) in bfs_distances(&self.p0, seed, |v| mask[v]).into_iter().enumerate() {
                if dist != UNREACHED {
                    reach[v] = true;
                }
            }
        }
        reach
    }

    /// First position at or after `end` connected to the anchor inside the
    /// mask; if none, the block of the path's endpoint is added to the region.
    fn place_exit(
        &self,
        b: &mut usize,
        blocks: &mut BTreeSet<MacroIndex>,
        mask: &mut Vec<bool>,
        a: usize,
        end: usize,
        idx: &[usize],
    ) -> Result<()> {
        for attempt in 0..2 {
            let dist = bfs_distances(&self.p0, idx[a], |v| mask[v]);
            if let Some(k) = (end..idx.len()).find(|&k| dist[idx[k]] != UNREACHED) {
                *b = k;
                return Ok(());
            }
            if attempt == 0 {
                blocks.insert(self.block_of(*idx.last().expect("nonempty")));
                *mask = self.enlarged_mask(blocks);
            }
        }
        Err(Error::RoutingFailed(format!(
            "no crossing-cluster anchor after position {end} of the path"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::EdgeField;
    use crate::lattice::{Region, Window};

    fn v(c: &[i64]) -> Vertex {
        Vertex::new(c.to_vec())
    }

    #[test]
    fn loop_erasure() {
        assert_eq!(loop_erase(&[1, 2, 3, 2, 4]), vec![1, 2, 4]);
        assert_eq!(loop_erase(&[1, 2, 3, 1, 5, 6, 5]), vec![1, 5]);
        assert_eq!(loop_erase(&[7]), vec![7]);
    }

    fn full(scale: i64, half: i64) -> (EdgeField, Renormalization) {
        let w = Window::new(2, half, 0).unwrap();
        let f = EdgeField::generate(0, 0, &w);
        let params = RenormParams::new(1.0, 1.0, 1.0, scale, 4.0).unwrap();
        let r = Renormalization::new(params, &f).unwrap();
        (f, r)
    }

    #[test]
    fn routing_on_full_lattice() {
        let (_, r) = full(3, 16);
        let blocks: BTreeSet<MacroIndex> = [MacroIndex(vec![0, 0]), MacroIndex(vec![1, 0])].into();
        let x = v(&[-1, 2]);
        let y = v(&[8, -1]);
        let p = r.route_in_good_region(&x, &y, &blocks).unwrap();
        assert_eq!(p.len() as i64, x.l1_dist(&y));
        assert!(r.route_in_good_region(&x, &x, &blocks).unwrap().is_empty());
        let far: BTreeSet<MacroIndex> = [MacroIndex(vec![0, 0]), MacroIndex(vec![2, 0])].into();
        assert!(matches!(r.route_in_good_region(&x, &y, &far), Err(Error::PreconditionFailed(_))));
    }

    #[test]
    fn open_path_is_unchanged() {
        let (_, r) = full(3, 23);
        let gamma = LatticePath::new((0..10).map(|k| v(&[k, 0])).collect()).unwrap();
        let rep = r.modify_path(&gamma).unwrap();
        assert_eq!(rep.modified, gamma);
        assert!(rep.added.is_empty());
        assert_eq!(rep.bound_ratio, 0.0);
    }

    #[test]
    fn single_defect_is_bypassed_inside_its_block() {
        let region = Region::cube(&[0, 0], 23);
        let mut values = vec![0.0; region.num_edge_slots()];
        for slot in 0..values.len() {
            if !region.slot_is_live(slot) {
                values[slot] = f64::NAN;
            }
        }
        let closed = Edge::between(&v(&[1, 0]), &v(&[2, 0])).unwrap();
        values[region.edge_slot(&closed).unwrap()] = 0.9;
        let f = EdgeField::from_values(region, values);
        let params = RenormParams::new(0.5, 0.8, 0.95, 3, 4.0).unwrap();
        let r = Renormalization::new(params, &f).unwrap();
        assert!(r.classification.grid.values().all(|fl| fl.is_good()));
        let gamma = LatticePath::new((-3..=3).map(|k| v(&[k, 0])).collect()).unwrap();
        let rep = r.modify_path(&gamma).unwrap();
        assert_eq!(rep.modified.start(), gamma.start());
        assert_eq!(rep.modified.end(), gamma.end());
        assert!(rep.modified.edges().all(|e| e != closed));
        assert!(rep.modified.is_self_avoiding());
        let own = MacroBox { index: MacroIndex(vec![0, 0]), scale: 3 }.enlarged();
        assert!(rep.modified.vertices().iter().all(|x| own.contains(x.coords())));
        assert_eq!(rep.removed_bad, 1);
        assert!(rep.added.len() >= 3);
    }

    #[test]
    fn q_closed_path_is_rejected() {
        let region = Region::cube(&[0, 0], 23);
        let values: Vec<f64> = (0..region.num_edge_slots())
            .map(|s| if region.slot_is_live(s) { 0.97 } else { f64::NAN })
            .collect();
        let f = EdgeField::from_values(region, values);
        let params = RenormParams::new(0.5, 0.8, 0.95, 3, 4.0).unwrap();
        let classification = classify(&params, &f).unwrap();
        let r = Renormalization::from_classification(params, &f, classification);
        let gamma = LatticePath::new(vec![v(&[0, 0]), v(&[1, 0])]).unwrap();
        assert!(matches!(r.modify_path(&gamma), Err(Error::PreconditionFailed(_))));
    }
}
