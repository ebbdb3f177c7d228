//! The uniform edge field and everything coupled to it.
//!
//! Each edge carries `u(e)`, uniform on `(0,1)`, obtained by hashing
//! `(seed, replica, stream, edge)`. Openness at threshold `p` is `u(e) < p` and
//! the passage time under a law `G` is `hat_inverse(G, u(e))`, so all fields
//! built from the same `u` are monotonically coupled.

use crate::dist::DistributionSpec;
use crate::lattice::{Edge, Region, Window};

const K_SEED: u64 = 0x9E37_79B9_7F4A_7C15;
const K_REPLICA: u64 = 0xD1B5_4A32_D192_ED03;
const K_STREAM: u64 = 0x8CB9_2BA7_2F3D_8DD7;
const K_COORD: u64 = 0xABC9_8388_FB8F_AC03;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Identifies one independent uniform field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FieldKey {
    pub seed: u64,
    pub replica: u64,
    /// Distinguishes auxiliary fields drawn for the same replica.
    pub stream: u64,
}

impl FieldKey {
    pub fn new(seed: u64, replica: u64) -> Self {
        FieldKey { seed, replica, stream: 0 }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        FieldKey { stream, ..self }
    }

    fn base(&self) -> u64 {
        let h = mix64(self.seed ^ K_SEED);
        let h = mix64(h ^ self.replica.wrapping_mul(K_REPLICA));
        mix64(h ^ self.stream.wrapping_mul(K_STREAM))
    }

    /// Raw 64-bit hash of an edge given by lower-endpoint coordinates and axis.
    pub fn hash_edge(&self, lower: &[i64], axis: usize) -> u64 {
        let mut h = self.base();
        for &c in lower {
            h = mix64(h ^ (c as u64).wrapping_mul(K_COORD));
        }
        mix64(h ^ (axis as u64 + 1).wrapping_mul(K_SEED))
    }

    /// `u(e)` in the open interval `(0,1)`.
    pub fn uniform(&self, lower: &[i64], axis: usize) -> f64 {
        to_unit(self.hash_edge(lower, axis))
    }

    pub fn uniform_edge(&self, e: &Edge) -> f64 {
        self.uniform(e.lower().coords(), e.axis())
    }
}

/// Maps the top 53 bits to the midpoint grid of `(0,1)`, never hitting 0 or 1.
#[inline]
pub fn to_unit(h: u64) -> f64 {
    ((h >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// i.i.d. uniform values on the edges of a region.
#[derive(Clone, Debug)]
pub struct EdgeField {
    key: FieldKey,
    region: Region,
    window: Option<Window>,
    /// Indexed by edge slot; dead slots hold NaN.
    values: Vec<f64>,
}

impl EdgeField {
    pub fn generate(seed: u64, replica: u64, window: &Window) -> EdgeField {
        let mut f = Self::generate_in(FieldKey::new(seed, replica), window.region());
        f.window = Some(*window);
        f
    }

    pub fn generate_in(key: FieldKey, region: Region) -> EdgeField {
        let d = region.dim();
        let mut values = vec![f64::NAN; region.num_edge_slots()];
        let mut coords = vec![0i64; d];
        for lo in 0..region.num_vertices() {
            for (k, c) in coords.iter_mut().enumerate() {
                *c = region.coord(lo, k);
            }
            for axis in 0..d {
                if region.step_up(lo, axis).is_some() {
                    values[lo * d + axis] = key.uniform(&coords, axis);
                }
            }
        }
        EdgeField { key, region, window: None, values }
    }

    /// A field with prescribed slot values, for hand-built configurations.
    pub fn from_values(region: Region, values: Vec<f64>) -> EdgeField {
        assert_eq!(values.len(), region.num_edge_slots());
        EdgeField {
            key: FieldKey::new(0, 0),
            region,
            window: None,
            values,
        }
    }

    pub fn key(&self) -> FieldKey {
        self.key
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn window(&self) -> Option<&Window> {
        self.window.as_ref()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn value_at(&self, slot: usize) -> f64 {
        self.values[slot]
    }

    pub fn value(&self, e: &Edge) -> Option<f64> {
        self.region.edge_slot(e).map(|s| self.values[s])
    }

    pub fn open_view(&self, threshold: f64) -> OpenView<'_> {
        OpenView { field: self, threshold }
    }

    pub fn time_view<'a>(&'a self, law: &'a DistributionSpec) -> TimeView<'a> {
        TimeView { field: self, law }
    }
}

/// Open/closed states of the live edges of a region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BondConfig {
    pub region: Region,
    /// Indexed by edge slot; dead slots are `false`.
    pub open: Vec<bool>,
}

impl BondConfig {
    pub fn all_open(region: Region) -> BondConfig {
        let open = (0..region.num_edge_slots()).map(|s| region.slot_is_live(s)).collect();
        BondConfig { region, open }
    }

    pub fn all_closed(region: Region) -> BondConfig {
        let n = region.num_edge_slots();
        BondConfig { region, open: vec![false; n] }
    }

    #[inline]
    pub fn is_open_slot(&self, slot: usize) -> bool {
        self.open[slot]
    }

    pub fn is_open(&self, e: &Edge) -> bool {
        self.region.edge_slot(e).is_some_and(|s| self.open[s])
    }

    pub fn set(&mut self, e: &Edge, open: bool) {
        let s = self.region.edge_slot(e).expect("edge inside region");
        self.open[s] = open;
    }

    pub fn open_count(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    /// Restriction to a sub-box, keeping only edges with both endpoints inside.
    pub fn restrict(&self, sub: &Region) -> BondConfig {
        assert!(self.region.contains_region(sub), "sub-region must lie inside the configuration");
        let d = sub.dim();
        let mut open = vec![false; sub.num_edge_slots()];
        for lo in 0..sub.num_vertices() {
            let c = sub.coords_of(lo);
            let g = self.region.index_of(&c).expect("inside");
            for axis in 0..d {
                if sub.step_up(lo, axis).is_some() {
                    open[lo * d + axis] = self.open[g * d + axis];
                }
            }
        }
        BondConfig { region: sub.clone(), open }
    }
}

/// Threshold view: `e` is open iff `u(e) < threshold`.
#[derive(Clone, Copy, Debug)]
pub struct OpenView<'a> {
    pub field: &'a EdgeField,
    pub threshold: f64,
}

impl OpenView<'_> {
    pub fn is_open(&self, e: &Edge) -> bool {
        self.field.value(e).is_some_and(|u| u < self.threshold)
    }

    #[inline]
    pub fn is_open_slot(&self, slot: usize) -> bool {
        self.field.values[slot] < self.threshold
    }

    pub fn bonds(&self) -> BondConfig {
        BondConfig {
            region: self.field.region.clone(),
            open: self.field.values.iter().map(|&u| u < self.threshold).collect(),
        }
    }
}

/// Passage-time view: `t(e) = hat_inverse(law, u(e))`.
#[derive(Clone, Copy, Debug)]
pub struct TimeView<'a> {
    pub field: &'a EdgeField,
    pub law: &'a DistributionSpec,
}

impl TimeView<'_> {
    pub fn time_of(&self, e: &Edge) -> Option<f64> {
        self.field.value(e).map(|u| self.law.hat_inverse_unchecked(u))
    }

    /// Passage times per edge slot; dead slots are `+inf`.
    pub fn times(&self) -> Vec<f64> {
        self.field
            .values
            .iter()
            .map(|&u| {
                if u.is_nan() {
                    f64::INFINITY
                } else {
                    self.law.hat_inverse_unchecked(u)
                }
            })
            .collect()
    }

    /// The percolation `{t(e) <= level}`.
    pub fn level_set(&self, level: f64) -> BondConfig {
        BondConfig {
            region: self.field.region.clone(),
            open: self
                .field
                .values
                .iter()
                .map(|&u| !u.is_nan() && self.law.hat_inverse_unchecked(u) <= level)
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::StochasticOrder;

    fn window() -> Window {
        Window::new(2, 40, 10).unwrap()
    }

    #[test]
    fn generation_is_deterministic() {
        let w = window();
        let a = EdgeField::generate(7, 3, &w);
        let b = EdgeField::generate(7, 3, &w);
        let bits = |f: &EdgeField| f.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn values_do_not_depend_on_window() {
        let small = EdgeField::generate(11, 0, &Window::new(2, 5, 0).unwrap());
        let large = EdgeField::generate(11, 0, &Window::new(2, 9, 3).unwrap());
        for s in small.region().live_slots() {
            let e = small.region().edge_at(s).unwrap();
            assert_eq!(small.value(&e), large.value(&e));
        }
    }

    #[test]
    fn replicas_differ() {
        let w = window();
        let a = EdgeField::generate(7, 0, &w);
        let b = EdgeField::generate(7, 1, &w);
        let live: Vec<usize> = a.region().live_slots().take(10_000).collect();
        let differ = live.iter().filter(|&&s| a.value_at(s) != b.value_at(s)).count();
        assert!(differ as f64 >= 0.99 * live.len() as f64);
    }

    #[test]
    fn uniform_mean_and_range() {
        let w = Window::new(2, 120, 0).unwrap();
        let f = EdgeField::generate(1, 0, &w);
        let live: Vec<f64> = f.region().live_slots().take(100_000).map(|s| f.value_at(s)).collect();
        assert_eq!(live.len(), 100_000);
        assert!(live.iter().all(|&u| u > 0.0 && u < 1.0));
        let mean = live.iter().sum::<f64>() / live.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn dirac_times_are_constant() {
        let f = EdgeField::generate(2, 0, &window());
        let law = DistributionSpec::dirac(2.5);
        let tv = f.time_view(&law);
        for s in f.region().live_slots() {
            assert_eq!(tv.time_of(&f.region().edge_at(s).unwrap()), Some(2.5));
        }
    }

    #[test]
    fn two_atom_times_follow_threshold() {
        let f = EdgeField::generate(3, 0, &window());
        let law = DistributionSpec::two_point(1.0, 0.7, f64::INFINITY).unwrap();
        let times = f.time_view(&law).times();
        for s in f.region().live_slots() {
            let expect = if f.value_at(s) < 0.7 { 1.0 } else { f64::INFINITY };
            assert_eq!(times[s], expect);
        }
    }

    #[test]
    fn ordered_laws_give_ordered_times() {
        let f = EdgeField::generate(4, 0, &window());
        let g1 = DistributionSpec::from_pairs("g1", &[(0.0, 0.3), (1.0, 0.5), (4.0, 0.2)]).unwrap();
        let g2 = DistributionSpec::from_pairs("g2", &[(0.5, 0.2), (1.0, 0.5), (f64::INFINITY, 0.3)]).unwrap();
        assert_eq!(g1.stochastic_order(&g2), StochasticOrder::Less);
        let t1 = f.time_view(&g1).times();
        let t2 = f.time_view(&g2).times();
        let live: Vec<usize> = f.region().live_slots().take(10_000).collect();
        assert!(live.iter().all(|&s| t1[s] <= t2[s]));
    }

    #[test]
    fn openness_thresholds() {
        let f = EdgeField::generate(5, 0, &Window::new(2, 120, 0).unwrap());
        let all = f.open_view(1.0).bonds();
        assert!(f.region().live_slots().all(|s| all.is_open_slot(s)));
        let lo = f.open_view(0.6);
        let hi = f.open_view(0.9);
        assert!(f.region().live_slots().all(|s| !lo.is_open_slot(s) || hi.is_open_slot(s)));

        let p = 0.37;
        let n = 100_000usize;
        let open = f.region().live_slots().take(n).filter(|&s| f.open_view(p).is_open_slot(s)).count();
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!(((open as f64 / n as f64) - p).abs() < 4.0 * sigma);
    }

    #[test]
    fn level_sets_match_threshold_views() {
        let f = EdgeField::generate(6, 0, &window());
        let law = DistributionSpec::from_pairs("g", &[(0.0, 0.25), (1.0, 0.35), (3.0, 0.4)]).unwrap();
        for m in [0.0, 0.5, 1.0, 2.0, 3.0] {
            let lvl = f.time_view(&law).level_set(m);
            let thr = f.open_view(law.cdf(m)).bonds();
            assert_eq!(lvl, thr, "level {m}");
        }
    }

    #[test]
    fn restriction_keeps_inner_edges() {
        let f = EdgeField::generate(8, 0, &Window::new(2, 6, 0).unwrap());
        let b = f.open_view(0.5).bonds();
        let sub = Region::cube(&[1, -2], 2);
        let r = b.restrict(&sub);
        for s in sub.live_slots() {
            let e = sub.edge_at(s).unwrap();
            assert_eq!(r.is_open(&e), b.is_open(&e));
        }
    }
}
