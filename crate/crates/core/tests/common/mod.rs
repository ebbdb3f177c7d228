//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use fpplab::dist::DistributionSpec;
use fpplab::field::OpenView;
use fpplab::lattice::{Edge, Region, Vertex};
use fpplab::rightmost::{direction, fan, DIRECTIONS};
use rand::Rng;

/// Minimum passage time over all self-avoiding paths from `a` to `b`,
/// summed from `a` onward. `times` is indexed by edge slot.
pub fn exhaustive_travel_time(region: &Region, times: &[f64], a: usize, b: usize) -> f64 {
    fn rec(region: &Region, times: &[f64], v: usize, b: usize, acc: f64, seen: &mut Vec<bool>, best: &mut f64) {
        if v == b {
            if acc < *best {
                *best = acc;
            }
            return;
        }
        for (w, slot) in region.neighbors(v) {
            if seen[w] || !times[slot].is_finite() {
                continue;
            }
            seen[w] = true;
            rec(region, times, w, b, acc + times[slot], seen, best);
            seen[w] = false;
        }
    }
    let mut seen = vec![false; region.num_vertices()];
    seen[a] = true;
    let mut best = f64::INFINITY;
    rec(region, times, a, b, 0.0, &mut seen, &mut best);
    best
}

/// A law with `atoms` support points on a 1/1024 grid in `[0, 4)`, with an
/// infinite atom one time in four.
pub fn random_law(rng: &mut impl Rng, atoms: usize) -> DistributionSpec {
    let mut values = BTreeSet::new();
    let with_inf = rng.gen_bool(0.25);
    let finite = if with_inf { atoms - 1 } else { atoms };
    while values.len() < finite {
        values.insert(rng.gen_range(0..4096u32));
    }
    let mut pairs: Vec<(f64, f64)> = values.into_iter().map(|v| (v as f64 / 1024.0, 0.0)).collect();
    if with_inf {
        pairs.push((f64::INFINITY, 0.0));
    }
    let weights: Vec<f64> = (0..pairs.len()).map(|_| rng.gen_range(1..=16u32) as f64).collect();
    let total: f64 = weights.iter().sum();
    for (p, w) in pairs.iter_mut().zip(&weights) {
        p.1 = w / total;
    }
    DistributionSpec::from_pairs("random", &pairs).expect("valid law")
}

fn step(v: &Vertex, d: usize) -> Vertex {
    let [dx, dy] = DIRECTIONS[d];
    Vertex::new(vec![v.0[0] + dx, v.0[1] + dy])
}

struct Search<'a> {
    view: &'a OpenView<'a>,
    region: Region,
    y: Vertex,
    walk: Vec<Vertex>,
    darts: BTreeSet<(Vertex, Vertex)>,
    boundary: Vec<Edge>,
    traversed: Vec<Edge>,
    best: u64,
    found: bool,
}

impl Search<'_> {
    fn cost(&self) -> u64 {
        self.boundary.iter().collect::<BTreeSet<_>>().into_iter().filter(|e| self.view.is_open(e)).count() as u64
    }

    fn rec(&mut self) {
        let cost = self.cost();
        if cost > self.best || (self.found && cost >= self.best) {
            return;
        }
        let v = self.walk.last().expect("nonempty").clone();
        if v == self.y {
            self.best = cost;
            self.found = true;
            return;
        }
        for d in 0..4 {
            let w = step(&v, d);
            if !self.region.contains(w.coords()) {
                continue;
            }
            let e = Edge::between(&v, &w).expect("adjacent");
            if !self.view.is_open(&e) || self.darts.contains(&(v.clone(), w.clone())) || self.boundary.contains(&e) {
                continue;
            }
            let mut fan_edges = Vec::new();
            if self.walk.len() >= 2 {
                let incoming = direction(&v, &self.walk[self.walk.len() - 2]).expect("adjacent");
                for f in fan(d, incoming) {
                    let z = step(&v, f);
                    if self.region.contains(z.coords()) {
                        fan_edges.push(Edge::between(&v, &z).expect("adjacent"));
                    }
                }
            }
            if fan_edges.iter().any(|f| self.traversed.contains(f) || *f == e) {
                continue;
            }
            let added = fan_edges.len();
            self.boundary.extend(fan_edges);
            self.traversed.push(e);
            self.darts.insert((v.clone(), w.clone()));
            self.walk.push(w.clone());
            self.rec();
            self.walk.pop();
            self.darts.remove(&(v.clone(), w));
            self.traversed.pop();
            self.boundary.truncate(self.boundary.len() - added);
        }
    }
}

fn open_connected(view: &OpenView, region: &Region, x: &Vertex, y: &Vertex) -> bool {
    let mut seen = BTreeSet::from([x.clone()]);
    let mut stack = vec![x.clone()];
    while let Some(v) = stack.pop() {
        if &v == y {
            return true;
        }
        for d in 0..4 {
            let w = step(&v, d);
            if region.contains(w.coords()) && view.is_open(&Edge::between(&v, &w).expect("adjacent")) && seen.insert(w.clone()) {
                stack.push(w);
            }
        }
    }
    false
}

/// Smallest number of distinct open edges on the right boundary of a
/// right-most open walk from `x` to `y`, by enumerating walks under an
/// increasing cost ceiling.
pub fn brute_rightmost_distance(x: &Vertex, y: &Vertex, view: &OpenView) -> Option<u64> {
    if x == y {
        return Some(0);
    }
    let region = view.field.region().clone();
    if !open_connected(view, &region, x, y) {
        return None;
    }
    let open_edges = region.live_slots().filter(|&s| view.is_open_slot(s)).count() as u64;
    for ceiling in 0..=open_edges {
        let mut s = Search {
            view,
            region: region.clone(),
            y: y.clone(),
            walk: vec![x.clone()],
            darts: BTreeSet::new(),
            boundary: Vec::new(),
            traversed: Vec::new(),
            best: ceiling,
            found: false,
        };
        s.rec();
        if s.found {
            return Some(s.best);
        }
    }
    None
}

/// Atomic laws with 1 to 4 atoms on a 1/1024 grid in `[0, 8)`, sometimes
/// with an infinite atom.
pub fn law_strategy() -> impl proptest::strategy::Strategy<Value = DistributionSpec> {
    use proptest::prelude::*;
    (proptest::collection::btree_set(0..8192u32, 1..=4), any::<bool>(), proptest::collection::vec(1..=16u32, 5)).prop_map(
        |(values, with_inf, weights)| {
            let mut support: Vec<f64> = values.into_iter().map(|v| v as f64 / 1024.0).collect();
            if with_inf {
                support.push(f64::INFINITY);
            }
            let w = &weights[..support.len()];
            let total: u32 = w.iter().sum();
            let pairs: Vec<(f64, f64)> = support.iter().zip(w).map(|(&v, &k)| (v, k as f64 / total as f64)).collect();
            DistributionSpec::from_pairs("law", &pairs).expect("valid law")
        },
    )
}

/// Cumulative weights strictly below each atom after the first.
pub fn cumulative_levels(law: &DistributionSpec) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::new();
    for a in law.atoms() {
        if acc > 0.0 {
            out.push(acc);
        }
        acc += a.weight;
    }
    out
}

/// A nearest-neighbour random walk of `steps` steps from `start`.
pub fn random_walk(rng: &mut impl Rng, start: Vertex, steps: usize) -> Vec<Vertex> {
    let dim = start.dim();
    let mut v = start;
    let mut out = vec![v.clone()];
    for _ in 0..steps {
        let axis = rng.gen_range(0..dim);
        v.0[axis] += if rng.gen_bool(0.5) { 1 } else { -1 };
        out.push(v.clone());
    }
    out
}
