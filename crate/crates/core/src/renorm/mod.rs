//! Coarse graining into `N`-blocks: good/bad classification, bad components
//! and their boundaries, routing through good blocks and path surgery.

mod classify;
mod instances;
mod surgery;
mod verify;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::dist::critical_probability;
use crate::error::{Error, Result};
use crate::lattice::{MacroIndex, Region, Vertex};

pub use classify::{
    calibrate_beta, classify, classify_indices, longest_avoiding_path, shielding_exact, BetaCalibration,
};
pub use instances::{route_instance, surgery_instance, RouteInstance, SurgeryInstance};
pub use surgery::{loop_erase, route_bound_denominator, ROUTE_RHO_HAT, Renormalization, SurgeryReport};
pub use verify::verify_surgery;

/// Coupled thresholds `p0 <= p <= q`, block scale `N` and the chemical
/// distance constant `beta` of condition (iii).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenormParams {
    pub p0: f64,
    pub p: f64,
    pub q: f64,
    pub scale: i64,
    pub beta: f64,
}

impl RenormParams {
    pub fn new(p0: f64, p: f64, q: f64, scale: i64, beta: f64) -> Result<Self> {
        let params = RenormParams { p0, p, q, scale, beta };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.p0 && self.p0 <= self.p && self.p <= self.q && self.q <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "thresholds must satisfy 0 < p0 <= p <= q <= 1, got p0={}, p={}, q={}",
                self.p0, self.p, self.q
            )));
        }
        if self.scale < 1 {
            return Err(Error::InvalidInput(format!("block scale must be >= 1, got {}", self.scale)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidInput(format!("beta must be positive, got {}", self.beta)));
        }
        Ok(())
    }

    pub fn require_supercritical(&self, dim: usize) -> Result<()> {
        let pc = critical_probability(dim);
        if self.p0 <= pc {
            return Err(Error::PreconditionFailed(format!(
                "p0 = {} is not above p_c({dim}) = {pc}",
                self.p0
            )));
        }
        Ok(())
    }

    /// Largest admissible chemical distance in condition (iii).
    pub fn chemical_bound(&self) -> u32 {
        (3.0 * self.beta * self.scale as f64).floor() as u32
    }
}

/// The four conditions of a good block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxFlags {
    /// (i) exactly one `p0`-cluster of `B'` with more than `N` vertices.
    pub unique: bool,
    /// (ii) that cluster crosses all `3^d` blocks inside `B'`.
    pub crossing: bool,
    /// (iii) chemical distances within the cluster are at most `3 beta N`.
    pub chemical: bool,
    /// (iv) every `q`-open component of `B'` avoiding the cluster has at most `N` vertices.
    pub shielding: bool,
}

impl BoxFlags {
    pub const ALL: BoxFlags = BoxFlags { unique: true, crossing: true, chemical: true, shielding: true };

    pub fn is_good(&self) -> bool {
        self.unique && self.crossing && self.chemical && self.shielding
    }
}

/// Good/bad states of a finite set of blocks, with the crossing cluster of
/// every good block given as sorted indices into `region`.
#[derive(Clone, Debug)]
pub struct BoxClassification {
    pub scale: i64,
    pub region: Region,
    pub grid: BTreeMap<MacroIndex, BoxFlags>,
    pub clusters: BTreeMap<MacroIndex, Vec<usize>>,
}

impl BoxClassification {
    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    pub fn flags(&self, i: &MacroIndex) -> Option<BoxFlags> {
        self.grid.get(i).copied()
    }

    pub fn is_good(&self, i: &MacroIndex) -> Option<bool> {
        self.grid.get(i).map(BoxFlags::is_good)
    }

    pub fn crossing_cluster(&self, i: &MacroIndex) -> Option<&[usize]> {
        self.clusters.get(i).map(Vec::as_slice)
    }

    pub fn in_crossing_cluster(&self, i: &MacroIndex, v: &Vertex) -> bool {
        match (self.clusters.get(i), self.region.index_of(v.coords())) {
            (Some(c), Some(idx)) => c.binary_search(&idx).is_ok(),
            _ => false,
        }
    }

    pub fn good_count(&self) -> usize {
        self.grid.values().filter(|f| f.is_good()).count()
    }

    pub fn good_fraction(&self) -> f64 {
        self.good_count() as f64 / self.grid.len() as f64
    }

    /// Nearest-neighbour components of good blocks, largest first.
    pub fn good_components(&self) -> Vec<BTreeSet<MacroIndex>> {
        let mut comps = components(
            self.grid.iter().filter(|(_, f)| f.is_good()).map(|(i, _)| i.clone()),
            MacroIndex::neighbors,
        );
        comps.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        comps
    }

    /// The largest good component touching both extreme layers of the grid
    /// along every axis.
    pub fn spanning_good_component(&self) -> Option<BTreeSet<MacroIndex>> {
        let d = self.dim();
        let lo: Vec<i64> = (0..d).map(|k| self.grid.keys().map(|i| i.0[k]).min().unwrap_or(0)).collect();
        let hi: Vec<i64> = (0..d).map(|k| self.grid.keys().map(|i| i.0[k]).max().unwrap_or(0)).collect();
        self.good_components().into_iter().find(|c| {
            (0..d).all(|k| c.iter().any(|i| i.0[k] == lo[k]) && c.iter().any(|i| i.0[k] == hi[k]))
        })
    }

    /// Good (1) / bad (0) states as CSV: a matrix for `d = 2` with rows
    /// indexed by the second coordinate, otherwise one row per block.
    pub fn grid_csv(&self) -> String {
        let mut out = String::new();
        if self.dim() == 2 && !self.grid.is_empty() {
            let xs: BTreeSet<i64> = self.grid.keys().map(|i| i.0[0]).collect();
            let ys: BTreeSet<i64> = self.grid.keys().map(|i| i.0[1]).collect();
            for &y in ys.iter().rev() {
                let row: Vec<String> = xs
                    .iter()
                    .map(|&x| match self.is_good(&MacroIndex(vec![x, y])) {
                        Some(true) => "1".to_string(),
                        Some(false) => "0".to_string(),
                        None => String::new(),
                    })
                    .collect();
                out.push_str(&row.join(","));
                out.push('\n');
            }
        } else {
            let cols: Vec<String> = (0..self.dim()).map(|k| format!("i{k}")).collect();
            out.push_str(&format!("{},unique,crossing,chemical,shielding,good\n", cols.join(",")));
            for (i, f) in &self.grid {
                let idx: Vec<String> = i.0.iter().map(|c| c.to_string()).collect();
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    idx.join(","),
                    f.unique as u8,
                    f.crossing as u8,
                    f.chemical as u8,
                    f.shielding as u8,
                    f.is_good() as u8
                ));
            }
        }
        out
    }
}

fn components<I, F>(sites: I, adjacent: F) -> Vec<BTreeSet<MacroIndex>>
where
    I: IntoIterator<Item = MacroIndex>,
    F: Fn(&MacroIndex) -> Vec<MacroIndex>,
{
    let mut remaining: BTreeSet<MacroIndex> = sites.into_iter().collect();
    let mut out = Vec::new();
    while let Some(start) = remaining.pop_first() {
        let mut comp = BTreeSet::from([start.clone()]);
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for n in adjacent(&i) {
                if remaining.remove(&n) {
                    comp.insert(n.clone());
                    queue.push_back(n);
                }
            }
        }
        out.push(comp);
    }
    out
}

/// `*`-connected components of a set of blocks.
pub fn star_components(sites: impl IntoIterator<Item = MacroIndex>) -> Vec<BTreeSet<MacroIndex>> {
    components(sites, MacroIndex::star_neighbors)
}

pub fn is_star_connected(sites: &BTreeSet<MacroIndex>) -> bool {
    star_components(sites.iter().cloned()).len() == 1
}

/// Nearest-neighbour components of bad blocks with their exterior vertex
/// boundaries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BadComponents {
    pub components: Vec<BTreeSet<MacroIndex>>,
    pub boundaries: Vec<BTreeSet<MacroIndex>>,
    /// Whether a boundary contains blocks outside the classified grid.
    pub unresolved: Vec<bool>,
    member: BTreeMap<MacroIndex, usize>,
}

impl BadComponents {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn component_of(&self, i: &MacroIndex) -> Option<usize> {
        self.member.get(i).copied()
    }

    /// `d_v C(i)`, which is `{i}` for a good (or unclassified) block.
    pub fn boundary_of(&self, i: &MacroIndex) -> BTreeSet<MacroIndex> {
        match self.member.get(i) {
            Some(&c) => self.boundaries[c].clone(),
            None => BTreeSet::from([i.clone()]),
        }
    }
}

pub fn bad_components(classification: &BoxClassification) -> BadComponents {
    let comps = components(
        classification
            .grid
            .iter()
            .filter(|(_, f)| !f.is_good())
            .map(|(i, _)| i.clone()),
        MacroIndex::neighbors,
    );
    let mut member = BTreeMap::new();
    let mut boundaries = Vec::with_capacity(comps.len());
    let mut unresolved = Vec::with_capacity(comps.len());
    for (k, c) in comps.iter().enumerate() {
        let mut b = BTreeSet::new();
        for i in c {
            member.insert(i.clone(), k);
            for n in i.neighbors() {
                if !c.contains(&n) {
                    b.insert(n);
                }
            }
        }
        unresolved.push(b.iter().any(|i| !classification.grid.contains_key(i)));
        boundaries.push(b);
    }
    BadComponents { components: comps, boundaries, unresolved, member }
}
