//! Finite atomic probability laws on `[0, +inf]`.
//!
//! A law is described by its survival function `S(t) = G([t, +inf])`, which is
//! left-continuous and piecewise constant for atomic laws. Everything here is
//! exact up to floating-point summation of the weights: pseudo-inverses pick
//! an atom by comparing cumulative masses, envelopes are built on the merged
//! atom grid.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a law.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Estimate of the bond-percolation threshold of Z^d, used only for warnings.
pub fn critical_probability(dim: usize) -> f64 {
    match dim {
        2 => 0.5,
        3 => 0.2488,
        4 => 0.1601,
        5 => 0.1182,
        6 => 0.0942,
        _ => 1.0 / (2.0 * dim as f64 - 1.0),
    }
}

/// One atom of a law. `value` may be `f64::INFINITY`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub value: f64,
    pub weight: f64,
}

#[derive(Serialize, Deserialize)]
struct AtomRepr {
    value: ValueRepr,
    weight: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ValueRepr {
    Finite(f64),
    Symbol(String),
}

impl Serialize for Atom {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let value = if self.value.is_infinite() {
            ValueRepr::Symbol("inf".into())
        } else {
            ValueRepr::Finite(self.value)
        };
        AtomRepr { value, weight: self.weight }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Atom {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = AtomRepr::deserialize(d)?;
        let value = match repr.value {
            ValueRepr::Finite(v) => v,
            ValueRepr::Symbol(s) if s.eq_ignore_ascii_case("inf") => f64::INFINITY,
            ValueRepr::Symbol(s) => {
                return Err(serde::de::Error::custom(format!("unknown atom value {s:?}")))
            }
        };
        Ok(Atom { value, weight: repr.weight })
    }
}

/// A finite atomic law on `[0, +inf]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistributionSpec {
    pub name: String,
    atoms: Vec<Atom>,
}

#[derive(Deserialize)]
struct DistributionRepr {
    #[serde(default)]
    name: String,
    atoms: Vec<Atom>,
}

impl<'de> Deserialize<'de> for DistributionSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = DistributionRepr::deserialize(d)?;
        DistributionSpec::new(repr.name, repr.atoms).map_err(serde::de::Error::custom)
    }
}

/// Verdict of comparing two laws in the usual stochastic order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StochasticOrder {
    /// First law is dominated by the second.
    Less,
    /// Second law is dominated by the first.
    Greater,
    Equal,
    Incomparable,
}

impl DistributionSpec {
    pub fn new(name: impl Into<String>, atoms: Vec<Atom>) -> Result<Self> {
        let name = name.into();
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution(format!("{name}: no atoms")));
        }
        for a in &atoms {
            if a.value.is_nan() || a.value < 0.0 || a.value == f64::NEG_INFINITY {
                return Err(Error::InvalidDistribution(format!(
                    "{name}: atom value {} is not in [0, inf]",
                    a.value
                )));
            }
            if !(a.weight > 0.0) || !a.weight.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "{name}: atom weight {} must be positive",
                    a.weight
                )));
            }
        }
        if atoms.windows(2).any(|w| w[0].value >= w[1].value) {
            return Err(Error::InvalidDistribution(format!(
                "{name}: atom values must be strictly increasing"
            )));
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "{name}: weights sum to {total}, expected 1"
            )));
        }
        Ok(DistributionSpec { name, atoms })
    }

    /// Builds a law from `(value, weight)` pairs in any order, merging equal values.
    pub fn from_pairs(name: impl Into<String>, pairs: &[(f64, f64)]) -> Result<Self> {
        let mut atoms: Vec<Atom> = pairs
            .iter()
            .map(|&(value, weight)| Atom { value, weight })
            .collect();
        atoms.sort_by(|a, b| a.value.total_cmp(&b.value));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if last.value == a.value => last.weight += a.weight,
                _ => merged.push(a),
            }
        }
        Self::new(name, merged)
    }

    pub fn dirac(value: f64) -> Self {
        Self::new(format!("delta_{}", fmt_value(value)), vec![Atom { value, weight: 1.0 }])
            .expect("dirac law is valid")
    }

    /// `p delta_a + (1-p) delta_b` with `a < b`.
    pub fn two_point(a: f64, p: f64, b: f64) -> Result<Self> {
        let name = format!("{}d{}+{}d{}", p, fmt_value(a), 1.0 - p, fmt_value(b));
        Self::new(name, vec![Atom { value: a, weight: p }, Atom { value: b, weight: 1.0 - p }])
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn has_infinite_atom(&self) -> bool {
        self.atoms.last().is_some_and(|a| a.value.is_infinite())
    }

    /// Largest finite atom value, if any.
    pub fn max_finite(&self) -> Option<f64> {
        self.atoms.iter().rev().map(|a| a.value).find(|v| v.is_finite())
    }

    /// `G([t, +inf])`.
    pub fn survival(&self, t: f64) -> f64 {
        self.atoms.iter().filter(|a| a.value >= t).map(|a| a.weight).sum()
    }

    /// `G([0, t])`.
    pub fn cdf(&self, t: f64) -> f64 {
        self.atoms.iter().filter(|a| a.value <= t).map(|a| a.weight).sum()
    }

    /// `G([0, +inf))`.
    pub fn finite_mass(&self) -> f64 {
        self.cdf(f64::MAX)
    }

    /// Mass strictly below each atom, in atom order.
    fn masses_below(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.atoms
            .iter()
            .map(|a| {
                let below = acc;
                acc += a.weight;
                below
            })
            .collect()
    }

    /// Cumulative levels at which the two pseudo-inverses disagree.
    pub fn flat_levels(&self) -> Vec<f64> {
        self.masses_below().into_iter().skip(1).collect()
    }

    /// `sup{s : S(s) >= 1 - u}`: the coupling quantile used for passage times.
    pub fn hat_inverse(&self, u: f64) -> Result<f64> {
        check_unit(u)?;
        Ok(self.hat_inverse_unchecked(u))
    }

    /// Same as [`hat_inverse`](Self::hat_inverse) without the range check,
    /// for hot loops fed by values already known to lie in `(0,1)`.
    #[inline]
    pub fn hat_inverse_unchecked(&self, u: f64) -> f64 {
        // S(s) >= 1-u  <=>  G([0,s)) <= u; the largest such atom is the answer.
        let mut acc = 0.0;
        let mut value = self.atoms[0].value;
        for a in &self.atoms {
            if acc <= u {
                value = a.value;
            } else {
                break;
            }
            acc += a.weight;
        }
        value
    }

    /// `sup{s : S(s) > 1 - u}`.
    pub fn tilde_inverse(&self, u: f64) -> Result<f64> {
        check_unit(u)?;
        let below = self.masses_below();
        let mut value = self.atoms[0].value;
        for (a, b) in self.atoms.iter().zip(below) {
            if b < u {
                value = a.value;
            } else {
                break;
            }
        }
        Ok(value)
    }

    /// Law of `min(t, K)`: atoms below `K` kept, the rest collapsed onto `K`.
    pub fn truncate(&self, k: f64) -> Result<Self> {
        if !(k >= 0.0) || k.is_infinite() {
            return Err(Error::InvalidInput(format!("truncation level must be finite and >= 0, got {k}")));
        }
        let mut atoms: Vec<Atom> = self.atoms.iter().copied().filter(|a| a.value < k).collect();
        let top: f64 = self.atoms.iter().filter(|a| a.value >= k).map(|a| a.weight).sum();
        if top > 0.0 {
            atoms.push(Atom { value: k, weight: top });
        }
        Self::new(format!("{}^K{}", self.name, fmt_value(k)), atoms)
    }

    /// Replaces a mass at `+inf` by an atom at `level` (merging with an
    /// existing atom there). Laws without an infinite atom are returned as is.
    pub fn replace_infinity(&self, level: f64) -> Result<Self> {
        if !self.has_infinite_atom() {
            return Ok(self.clone());
        }
        let pairs: Vec<(f64, f64)> = self
            .atoms
            .iter()
            .map(|a| (if a.value.is_infinite() { level } else { a.value }, a.weight))
            .collect();
        Self::from_pairs(format!("{}[inf->{}]", self.name, fmt_value(level)), &pairs)
    }

    /// Atom values of both laws merged and sorted.
    fn merged_grid(laws: &[&DistributionSpec]) -> Vec<f64> {
        let mut grid: Vec<f64> = laws
            .iter()
            .flat_map(|l| l.atoms.iter().map(|a| a.value))
            .collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        grid
    }

    /// Exact comparison of survival functions on the merged atom grid.
    pub fn stochastic_order(&self, other: &DistributionSpec) -> StochasticOrder {
        let grid = Self::merged_grid(&[self, other]);
        let mut le = true;
        let mut ge = true;
        for t in grid {
            let a = self.survival(t);
            let b = other.survival(t);
            if a > b + MASS_TOLERANCE {
                le = false;
            }
            if b > a + MASS_TOLERANCE {
                ge = false;
            }
        }
        match (le, ge) {
            (true, true) => StochasticOrder::Equal,
            (true, false) => StochasticOrder::Less,
            (false, true) => StochasticOrder::Greater,
            (false, false) => StochasticOrder::Incomparable,
        }
    }

    /// Whether `self` is stochastically dominated by `other`.
    pub fn is_dominated_by(&self, other: &DistributionSpec) -> bool {
        matches!(
            self.stochastic_order(other),
            StochasticOrder::Less | StochasticOrder::Equal
        )
    }

    fn envelope(laws: &[DistributionSpec], pick: fn(f64, f64) -> f64, label: &str) -> Result<Self> {
        if laws.is_empty() {
            return Err(Error::InvalidInput("envelope of an empty family".into()));
        }
        let refs: Vec<&DistributionSpec> = laws.iter().collect();
        let grid = Self::merged_grid(&refs);
        let tails: Vec<f64> = grid
            .iter()
            .map(|&t| {
                laws.iter()
                    .map(|l| l.survival(t))
                    .reduce(pick)
                    .expect("nonempty family")
            })
            .collect();
        let mut atoms = Vec::new();
        for (i, &t) in grid.iter().enumerate() {
            let next = tails.get(i + 1).copied().unwrap_or(0.0);
            let w = tails[i] - next;
            if w > MASS_TOLERANCE {
                atoms.push(Atom { value: t, weight: w });
            }
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        for a in &mut atoms {
            a.weight /= total;
        }
        let names: Vec<&str> = laws.iter().map(|l| l.name.as_str()).collect();
        Self::new(format!("{label}({})", names.join(",")), atoms)
    }

    /// The law whose survival function is the pointwise supremum of the family's.
    pub fn envelope_sup(laws: &[DistributionSpec]) -> Result<Self> {
        Self::envelope(laws, f64::max, "sup")
    }

    /// The law whose survival function is the pointwise infimum of the family's.
    pub fn envelope_inf(laws: &[DistributionSpec]) -> Result<Self> {
        Self::envelope(laws, f64::min, "inf")
    }

    /// Mixture `(1 - eps) self + eps other`.
    pub fn mix(&self, other: &DistributionSpec, eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidInput(format!("mixture weight {eps} outside [0,1]")));
        }
        let mut pairs: Vec<(f64, f64)> = self.atoms.iter().map(|a| (a.value, a.weight * (1.0 - eps))).collect();
        pairs.extend(other.atoms.iter().map(|a| (a.value, a.weight * eps)));
        pairs.retain(|p| p.1 > 0.0);
        Self::from_pairs(format!("mix({},{},{})", self.name, other.name, eps), &pairs)
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}:{}", fmt_value(a.value), a.weight)?;
        }
        Ok(())
    }
}

/// Parses the compact literal `value:weight,value:weight,...` with `inf` allowed.
impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (v, w) = part
                .split_once(':')
                .ok_or_else(|| Error::InvalidDistribution(format!("atom {part:?} is not value:weight")))?;
            let value = parse_value(v)?;
            let weight: f64 = w
                .trim()
                .parse()
                .map_err(|_| Error::InvalidDistribution(format!("bad weight {w:?}")))?;
            pairs.push((value, weight));
        }
        Self::from_pairs(s.to_string(), &pairs)
    }
}

pub fn parse_value(v: &str) -> Result<f64> {
    let v = v.trim();
    if v.eq_ignore_ascii_case("inf") {
        Ok(f64::INFINITY)
    } else {
        v.parse()
            .map_err(|_| Error::InvalidDistribution(format!("bad atom value {v:?}")))
    }
}

pub fn fmt_value(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

fn check_unit(u: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("quantile level {u} outside (0,1)")))
    }
}

/// Levels `M`, `M0 <= K` attached to a law, checked against the configured
/// percolation threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportThresholds {
    pub m: f64,
    pub k: f64,
    pub m0: f64,
}

impl SupportThresholds {
    /// Validates the ordering and returns warnings for levels whose mass does
    /// not exceed `pc`.
    pub fn validate(&self, law: &DistributionSpec, pc: f64) -> Result<Vec<String>> {
        if !(0.0 <= self.m0 && self.m0 <= self.k) || !self.m.is_finite() || self.m < 0.0 {
            return Err(Error::InvalidInput(format!(
                "thresholds need 0 <= M0 <= K and finite M >= 0 (M={}, M0={}, K={})",
                self.m, self.m0, self.k
            )));
        }
        let mut warnings = Vec::new();
        for (label, level) in [("M", self.m), ("M0", self.m0)] {
            let mass = law.cdf(level);
            if mass <= pc {
                warnings.push(format!(
                    "G([0,{label}]) = {mass} does not exceed p_c = {pc}; the {label}-cluster may not percolate"
                ));
            }
        }
        Ok(warnings)
    }
}

/// Total order helper for extended reals.
pub fn cmp_ext(a: f64, b: f64) -> Ordering {
    a.total_cmp(&b)
}
