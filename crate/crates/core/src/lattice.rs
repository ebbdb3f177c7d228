//! Finite-window geometry of the hypercubic lattice Z^d.
//!
//! Vertices are integer vectors, edges join vertices at Euclidean distance one
//! and are stored with their lexicographically smaller endpoint first. Every
//! algorithm in the crate works on an explicit [`Region`] (an axis-aligned box)
//! whose vertices are indexed in lexicographic order, so that index order and
//! coordinate order agree.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of Z^d.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vertex(pub Vec<i64>);

impl Vertex {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        Vertex(coords.into())
    }

    pub fn origin(dim: usize) -> Self {
        Vertex(vec![0; dim])
    }

    /// The unit vector along `axis`.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut c = vec![0; dim];
        c[axis] = 1;
        Vertex(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn l1(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).sum()
    }

    pub fn linf(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn l2(&self) -> f64 {
        (self.0.iter().map(|&c| (c * c) as f64).sum::<f64>()).sqrt()
    }

    pub fn add(&self, other: &Vertex) -> Vertex {
        Vertex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vertex) -> Vertex {
        Vertex(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, k: i64) -> Vertex {
        Vertex(self.0.iter().map(|a| a * k).collect())
    }

    pub fn l1_dist(&self, other: &Vertex) -> i64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }

    pub fn linf_dist(&self, other: &Vertex) -> i64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .max()
            .unwrap_or(0)
    }

    /// Whether `other` is a nearest neighbour of `self`.
    pub fn is_adjacent(&self, other: &Vertex) -> bool {
        self.dim() == other.dim() && self.l1_dist(other) == 1
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

pub fn norms(x: &Vertex) -> Norms {
    Norms {
        l1: x.l1() as f64,
        l2: x.l2(),
        linf: x.linf() as f64,
    }
}

pub fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidInput(format!("dimension must be >= 2, got {dim}")));
    }
    Ok(())
}

/// A nearest-neighbour edge, stored as its lower endpoint and the axis along
/// which the upper endpoint lies.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    lo: Vertex,
    axis: usize,
}

impl Edge {
    pub fn between(a: &Vertex, b: &Vertex) -> Result<Edge> {
        if !a.is_adjacent(b) {
            return Err(Error::InvalidInput(format!("{a} and {b} are not adjacent")));
        }
        let axis = a
            .0
            .iter()
            .zip(&b.0)
            .position(|(x, y)| x != y)
            .expect("adjacent vertices differ in one coordinate");
        let lo = if a < b { a.clone() } else { b.clone() };
        Ok(Edge { lo, axis })
    }

    pub fn from_lower(lo: Vertex, axis: usize) -> Edge {
        assert!(axis < lo.dim());
        Edge { lo, axis }
    }

    pub fn lower(&self) -> &Vertex {
        &self.lo
    }

    pub fn upper(&self) -> Vertex {
        let mut c = self.lo.0.clone();
        c[self.axis] += 1;
        Vertex(c)
    }

    pub fn axis(&self) -> usize {
        self.axis
    }

    pub fn endpoints(&self) -> (Vertex, Vertex) {
        (self.lo.clone(), self.upper())
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.upper())
    }
}

/// An axis-aligned box `[lo_1, hi_1] x ... x [lo_d, hi_d]` of Z^d with
/// vertices indexed in lexicographic order.
///
/// Edge slots are `index(lower endpoint) * d + axis`; a slot is live only
/// when the upper endpoint also lies in the region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    lo: Vec<i64>,
    hi: Vec<i64>,
    sides: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl Region {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<Region> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidInput("region corners must share a dimension".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(Error::InvalidInput("region lower corner exceeds upper corner".into()));
        }
        let d = lo.len();
        let sides: Vec<usize> = lo.iter().zip(&hi).map(|(a, b)| (b - a + 1) as usize).collect();
        let mut strides = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * sides[k + 1];
        }
        let len = strides[0] * sides[0];
        Ok(Region { lo, hi, sides, strides, len })
    }

    /// The cube `center + [-half, half]^d`.
    pub fn cube(center: &[i64], half: i64) -> Region {
        let lo = center.iter().map(|c| c - half).collect();
        let hi = center.iter().map(|c| c + half).collect();
        Region::new(lo, hi).expect("valid cube")
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn hi(&self) -> &[i64] {
        &self.hi
    }

    pub fn num_vertices(&self) -> usize {
        self.len
    }

    pub fn num_edge_slots(&self) -> usize {
        self.len * self.dim()
    }

    pub fn contains(&self, c: &[i64]) -> bool {
        c.len() == self.dim() && c.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| a <= x && x <= b)
    }

    /// Whether `other` lies entirely inside `self`.
    pub fn contains_region(&self, other: &Region) -> bool {
        self.contains(&other.lo) && self.contains(&other.hi)
    }

    pub fn index_of(&self, c: &[i64]) -> Option<usize> {
        if !self.contains(c) {
            return None;
        }
        Some(
            c.iter()
                .zip(&self.lo)
                .zip(&self.strides)
                .map(|((x, a), s)| (x - a) as usize * s)
                .sum(),
        )
    }

    pub fn coord(&self, idx: usize, axis: usize) -> i64 {
        self.lo[axis] + ((idx / self.strides[axis]) % self.sides[axis]) as i64
    }

    pub fn coords_of(&self, idx: usize) -> Vec<i64> {
        (0..self.dim()).map(|k| self.coord(idx, k)).collect()
    }

    pub fn vertex(&self, idx: usize) -> Vertex {
        Vertex(self.coords_of(idx))
    }

    /// Index of the vertex one step along `+axis`, if inside.
    pub fn step_up(&self, idx: usize, axis: usize) -> Option<usize> {
        let c = (idx / self.strides[axis]) % self.sides[axis];
        (c + 1 < self.sides[axis]).then(|| idx + self.strides[axis])
    }

    /// Index of the vertex one step along `-axis`, if inside.
    pub fn step_down(&self, idx: usize, axis: usize) -> Option<usize> {
        let c = (idx / self.strides[axis]) % self.sides[axis];
        (c > 0).then(|| idx - self.strides[axis])
    }

    /// Calls `f(neighbour, edge_slot)` for every lattice neighbour inside the region.
    #[inline]
    pub fn for_each_neighbor(&self, idx: usize, mut f: impl FnMut(usize, usize)) {
        let d = self.dim();
        for k in 0..d {
            let c = (idx / self.strides[k]) % self.sides[k];
            if c > 0 {
                let n = idx - self.strides[k];
                f(n, n * d + k);
            }
            if c + 1 < self.sides[k] {
                f(idx + self.strides[k], idx * d + k);
            }
        }
    }

    pub fn neighbors(&self, idx: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(2 * self.dim());
        self.for_each_neighbor(idx, |n, s| out.push((n, s)));
        out
    }

    /// Slot of the edge between two indices, if they are adjacent.
    pub fn slot_between(&self, a: usize, b: usize) -> Option<usize> {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let d = self.dim();
        (0..d).find(|&k| self.step_up(lo, k) == Some(hi)).map(|k| lo * d + k)
    }

    pub fn slot_is_live(&self, slot: usize) -> bool {
        let d = self.dim();
        slot < self.num_edge_slots() && self.step_up(slot / d, slot % d).is_some()
    }

    /// Endpoint indices of a live edge slot.
    pub fn slot_endpoints(&self, slot: usize) -> Option<(usize, usize)> {
        let d = self.dim();
        let lo = slot / d;
        self.step_up(lo, slot % d).map(|hi| (lo, hi))
    }

    pub fn edge_slot(&self, e: &Edge) -> Option<usize> {
        let lo = self.index_of(e.lower().coords())?;
        self.step_up(lo, e.axis())?;
        Some(lo * self.dim() + e.axis())
    }

    pub fn edge_at(&self, slot: usize) -> Option<Edge> {
        let d = self.dim();
        self.slot_endpoints(slot)
            .map(|(lo, _)| Edge::from_lower(self.vertex(lo), slot % d))
    }

    pub fn live_slots(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_edge_slots()).filter(move |&s| self.slot_is_live(s))
    }

    /// Whether the vertex touches any face of the region.
    pub fn on_boundary(&self, idx: usize) -> bool {
        (0..self.dim()).any(|k| {
            let c = (idx / self.strides[k]) % self.sides[k];
            c == 0 || c + 1 == self.sides[k]
        })
    }

    /// Whether the vertex lies on the lower (`false`) or upper (`true`) face orthogonal to `axis`.
    pub fn on_face(&self, idx: usize, axis: usize, upper: bool) -> bool {
        let c = (idx / self.strides[axis]) % self.sides[axis];
        if upper {
            c + 1 == self.sides[axis]
        } else {
            c == 0
        }
    }
}

/// The simulation window `[-(radius+margin), radius+margin]^d`.
///
/// `radius` is the box on which estimates are stated; `margin` is the extra
/// slab that keeps geodesics and clusters from feeling the cut-off.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub dim: usize,
    pub radius: i64,
    pub margin: i64,
}

impl Window {
    pub fn new(dim: usize, radius: i64, margin: i64) -> Result<Window> {
        check_dim(dim)?;
        if radius < 1 {
            return Err(Error::InvalidInput(format!("window radius must be >= 1, got {radius}")));
        }
        if margin < 0 {
            return Err(Error::InvalidInput(format!("window margin must be >= 0, got {margin}")));
        }
        Ok(Window { dim, radius, margin })
    }

    pub fn extent(&self) -> i64 {
        self.radius + self.margin
    }

    pub fn region(&self) -> Region {
        Region::cube(&vec![0; self.dim], self.extent())
    }

    pub fn contains(&self, v: &Vertex) -> bool {
        v.dim() == self.dim && v.linf() <= self.extent()
    }
}

/// Index of a coarse-grained block on the macroscopic copy of Z^d.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MacroIndex(pub Vec<i64>);

impl MacroIndex {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn linf_dist(&self, other: &MacroIndex) -> i64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .max()
            .unwrap_or(0)
    }

    pub fn l1_dist(&self, other: &MacroIndex) -> i64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }

    /// Nearest-neighbour macro sites.
    pub fn neighbors(&self) -> Vec<MacroIndex> {
        let mut out = Vec::with_capacity(2 * self.dim());
        for k in 0..self.dim() {
            for s in [-1, 1] {
                let mut c = self.0.clone();
                c[k] += s;
                out.push(MacroIndex(c));
            }
        }
        out
    }

    /// Sites at sup-norm distance exactly one.
    pub fn star_neighbors(&self) -> Vec<MacroIndex> {
        let d = self.dim();
        let mut out = Vec::new();
        for offset in cube_offsets(d, 1) {
            if offset.iter().all(|&o| o == 0) {
                continue;
            }
            out.push(MacroIndex(self.0.iter().zip(&offset).map(|(a, b)| a + b).collect()));
        }
        out
    }
}

impl fmt::Display for MacroIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", Vertex(self.0.clone()))
    }
}

/// All integer vectors in `[-half, half]^d`, lexicographically.
pub fn cube_offsets(d: usize, half: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (-half..=half).map(move |c| {
                    let mut p = prefix.clone();
                    p.push(c);
                    p
                })
            })
            .collect();
    }
    out
}

/// A block `B_N(i)` of side `2N+1` together with its enlarged block `B'_N(i)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MacroBox {
    pub index: MacroIndex,
    pub scale: i64,
}

impl MacroBox {
    pub fn new(index: MacroIndex, scale: i64) -> Result<MacroBox> {
        if scale < 1 {
            return Err(Error::InvalidInput(format!("box scale must be >= 1, got {scale}")));
        }
        Ok(MacroBox { index, scale })
    }

    pub fn center(&self) -> Vec<i64> {
        self.index.0.iter().map(|i| i * (2 * self.scale + 1)).collect()
    }

    /// `i(2N+1) + [-N, N]^d`
    pub fn core(&self) -> Region {
        Region::cube(&self.center(), self.scale)
    }

    /// `i(2N+1) + [-3N, 3N]^d`
    pub fn enlarged(&self) -> Region {
        Region::cube(&self.center(), 3 * self.scale)
    }
}

/// The unique macro index whose core block contains `v`.
pub fn macro_index_of(v: &[i64], scale: i64) -> MacroIndex {
    assert!(scale >= 1, "box scale must be >= 1");
    let side = 2 * scale + 1;
    MacroIndex(v.iter().map(|c| (c + scale).div_euclid(side)).collect())
}

/// A finite connected set of macro sites.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeAnimal {
    pub boxes: BTreeSet<MacroIndex>,
}

impl LatticeAnimal {
    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn contains(&self, i: &MacroIndex) -> bool {
        self.boxes.contains(i)
    }

    /// Nearest-neighbour connectivity check by breadth-first search.
    pub fn is_connected(&self) -> bool {
        let Some(start) = self.boxes.iter().next() else {
            return false;
        };
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([start.clone()]);
        seen.insert(start.clone());
        while let Some(b) = queue.pop_front() {
            for n in b.neighbors() {
                if self.boxes.contains(&n) && seen.insert(n.clone()) {
                    queue.push_back(n);
                }
            }
        }
        seen.len() == self.boxes.len()
    }
}

/// A nearest-neighbour path given by its vertex sequence; `len()` counts edges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticePath {
    vertices: Vec<Vertex>,
}

impl LatticePath {
    pub fn new(vertices: Vec<Vertex>) -> Result<LatticePath> {
        if let Some(w) = vertices.windows(2).find(|w| !w[0].is_adjacent(&w[1])) {
            return Err(Error::InvalidInput(format!(
                "path step {} -> {} is not a lattice edge",
                w[0], w[1]
            )));
        }
        Ok(LatticePath { vertices })
    }

    pub fn single(v: Vertex) -> LatticePath {
        LatticePath { vertices: vec![v] }
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn into_vertices(self) -> Vec<Vertex> {
        self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start(&self) -> Option<&Vertex> {
        self.vertices.first()
    }

    pub fn end(&self) -> Option<&Vertex> {
        self.vertices.last()
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.vertices
            .windows(2)
            .map(|w| Edge::between(&w[0], &w[1]).expect("validated path"))
    }

    pub fn is_self_avoiding(&self) -> bool {
        let set: BTreeSet<&Vertex> = self.vertices.iter().collect();
        set.len() == self.vertices.len()
    }
}

/// The animal of `N`-blocks visited by a path.
pub fn path_animal(path: &LatticePath, scale: i64) -> LatticeAnimal {
    LatticeAnimal {
        boxes: path
            .vertices()
            .iter()
            .map(|v| macro_index_of(v.coords(), scale))
            .collect(),
    }
}

/// Upper bound `3^d (1 + (|path| + 1) / N) - 1` on the size of a path's animal.
pub fn animal_size_bound(dim: usize, path_len: usize, scale: i64) -> f64 {
    3f64.powi(dim as i32) * (1.0 + (path_len as f64 + 1.0) / scale as f64) - 1.0
}
