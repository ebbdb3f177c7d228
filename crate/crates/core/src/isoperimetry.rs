//! Planar isoperimetry: exact Cheeger constants of tiny clusters, Wulff
//! shapes of sampled norms, Hausdorff distances and the variational value.

use std::f64::consts::PI;
use std::fmt::Debug;

use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::ClusterAnalysis;
use crate::error::{Error, Result};
use crate::field::OpenView;
use crate::lattice::{Vertex, Window};
use crate::rightmost::beta_estimate;

/// Largest cluster handed to the subset enumeration.
pub const ENUMERATION_LIMIT: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheegerResult {
    pub value: f64,
    /// `value = numerator / denominator` in lowest terms.
    pub numerator: usize,
    pub denominator: usize,
    pub minimizers: Vec<Vec<Vertex>>,
    pub cluster_size: usize,
}

/// `phi = min |dA| / |A|` over connected `A` in the giant with
/// `0 < |A| <= |C| / 2`, by enumeration of all vertex subsets of the giant.
/// `dA` counts open edges with exactly one endpoint in `A`.
pub fn cheeger_exact(view: &OpenView<'_>) -> Result<CheegerResult> {
    let region = view.field.region();
    let bonds = view.bonds();
    let analysis = ClusterAnalysis::analyze(&bonds);
    let giant = analysis
        .giant()
        .ok_or_else(|| Error::NoGiant("no crossing cluster in the window".into()))?;
    let members = analysis.component_indices(giant);
    let m = members.len();
    if m > ENUMERATION_LIMIT {
        return Err(Error::TooLarge { size: m, limit: ENUMERATION_LIMIT });
    }
    if m < 2 {
        return Err(Error::Degenerate("the giant is a single vertex".into()));
    }
    let local = |idx: usize| members.binary_search(&idx).ok();
    let mut adj = vec![0u32; m];
    for (i, &v) in members.iter().enumerate() {
        for (w, slot) in region.neighbors(v) {
            if bonds.open[slot] {
                if let Some(j) = local(w) {
                    adj[i] |= 1 << j;
                }
            }
        }
    }
    let connected = |mask: u32| {
        let mut seen = 1u32 << mask.trailing_zeros();
        loop {
            let mut grow = seen;
            let mut rest = seen;
            while rest != 0 {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                grow |= adj[i] & mask;
            }
            if grow == seen {
                return seen == mask;
            }
            seen = grow;
        }
    };
    let boundary = |mask: u32| {
        let mut total = 0u32;
        let mut rest = mask;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            total += (adj[i] & !mask).count_ones();
        }
        total as usize
    };
    let half = m / 2;
    let full: u32 = if m == 32 { u32::MAX } else { (1 << m) - 1 };
    // (boundary, size, mask) of every best candidate, per chunk of masks.
    let chunks: Vec<(usize, usize, Vec<u32>)> = (1..=full)
        .into_par_iter()
        .fold(
            || (usize::MAX, 1usize, Vec::new()),
            |mut acc, mask| {
                let size = mask.count_ones() as usize;
                if size > half || !connected(mask) {
                    return acc;
                }
                let b = boundary(mask);
                // Compare b / size with acc.0 / acc.1 by cross-multiplication.
                let (lhs, rhs) = (b * acc.1, acc.0.saturating_mul(size));
                if lhs < rhs {
                    acc = (b, size, vec![mask]);
                } else if lhs == rhs {
                    acc.2.push(mask);
                }
                acc
            },
        )
        .collect();
    let (mut b, mut s, mut masks) = (usize::MAX, 1usize, Vec::new());
    for (cb, cs, cm) in chunks {
        if cm.is_empty() {
            continue;
        }
        let (lhs, rhs) = (cb * s, b.saturating_mul(cs));
        if lhs < rhs {
            (b, s, masks) = (cb, cs, cm);
        } else if lhs == rhs {
            masks.extend(cm);
        }
    }
    masks.sort_unstable();
    let minimizers = masks
        .iter()
        .map(|&mask| (0..m).filter(|&i| mask >> i & 1 == 1).map(|i| region.vertex(members[i])).collect())
        .collect();
    let g = num_integer::gcd(b, s);
    Ok(CheegerResult {
        value: b as f64 / s as f64,
        numerator: b / g,
        denominator: s / g,
        minimizers,
        cluster_size: m,
    })
}

/// Ordered field used by the polygon routines; `f64` and `BigRational`.
pub trait Scalar: Clone + PartialOrd + Num + Signed + Debug {}
impl<T: Clone + PartialOrd + Num + Signed + Debug> Scalar for T {}

pub type Point<T> = [T; 2];

/// The half-plane `normal . x <= offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfPlane<T> {
    pub normal: Point<T>,
    pub offset: T,
}

fn dot<T: Scalar>(a: &Point<T>, b: &Point<T>) -> T {
    a[0].clone() * b[0].clone() + a[1].clone() * b[1].clone()
}

fn cross<T: Scalar>(a: &Point<T>, b: &Point<T>) -> T {
    a[0].clone() * b[1].clone() - a[1].clone() * b[0].clone()
}

fn sub<T: Scalar>(a: &Point<T>, b: &Point<T>) -> Point<T> {
    [a[0].clone() - b[0].clone(), a[1].clone() - b[1].clone()]
}

/// Clips a convex polygon (counterclockwise) by one half-plane.
pub fn clip<T: Scalar>(poly: &[Point<T>], h: &HalfPlane<T>) -> Vec<Point<T>> {
    let slack: Vec<T> = poly.iter().map(|p| h.offset.clone() - dot(&h.normal, p)).collect();
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let j = (i + 1) % poly.len();
        let (si, sj) = (&slack[i], &slack[j]);
        if !si.is_negative() {
            out.push(poly[i].clone());
        }
        if (si.is_positive() && sj.is_negative()) || (si.is_negative() && sj.is_positive()) {
            let t = si.clone() / (si.clone() - sj.clone());
            let d = sub(&poly[j], &poly[i]);
            out.push([
                poly[i][0].clone() + d[0].clone() * t.clone(),
                poly[i][1].clone() + d[1].clone() * t,
            ]);
        }
    }
    simplify(out)
}

/// Drops repeated and collinear vertices.
fn simplify<T: Scalar>(mut poly: Vec<Point<T>>) -> Vec<Point<T>> {
    poly.dedup();
    while poly.len() > 1 && poly.first() == poly.last() {
        poly.pop();
    }
    loop {
        let n = poly.len();
        if n < 3 {
            return poly;
        }
        let flat = (0..n).find(|&i| {
            let prev = &poly[(i + n - 1) % n];
            let next = &poly[(i + 1) % n];
            cross(&sub(&poly[i], prev), &sub(next, &poly[i])).is_zero()
        });
        match flat {
            Some(i) => {
                poly.remove(i);
            }
            None => return poly,
        }
    }
}

fn angle<T: Scalar + ToPrimitive>(p: &Point<T>) -> f64 {
    p[1].to_f64().unwrap_or(f64::NAN).atan2(p[0].to_f64().unwrap_or(f64::NAN))
}

/// Errors unless the normals leave no angular gap of `pi` or more, which is
/// when the intersection of the half-planes is bounded.
fn check_bounded<T: Scalar + ToPrimitive>(planes: &[HalfPlane<T>]) -> Result<()> {
    let mut normals: Vec<&Point<T>> = planes.iter().map(|h| &h.normal).collect();
    if normals.iter().any(|n| n[0].is_zero() && n[1].is_zero()) {
        return Err(Error::Degenerate("zero normal vector".into()));
    }
    normals.sort_by(|a, b| angle(a).total_cmp(&angle(b)));
    let mut distinct = 0;
    for i in 0..normals.len() {
        let (a, b) = (normals[i], normals[(i + 1) % normals.len()]);
        let c = cross(a, b);
        if c.is_positive() {
            distinct += 1;
        } else if !(c.is_zero() && dot(a, b).is_positive()) || normals.len() == 1 {
            return Err(Error::Degenerate("the half-planes leave an unbounded intersection".into()));
        }
    }
    if distinct < 3 {
        return Err(Error::Degenerate("fewer than three independent normal directions".into()));
    }
    Ok(())
}

/// Intersection of half-planes whose offsets are positive (so the origin is
/// interior), as a counterclockwise polygon.
pub fn intersect_half_planes<T: Scalar + ToPrimitive>(planes: &[HalfPlane<T>]) -> Result<Vec<Point<T>>> {
    if planes.iter().any(|h| !h.offset.is_positive()) {
        return Err(Error::Degenerate("half-plane offsets must be positive".into()));
    }
    check_bounded(planes)?;
    let two = T::one() + T::one();
    let mut l = T::one();
    for _ in 0..256 {
        let z = T::zero();
        let box_ = vec![
            [z.clone() - l.clone(), z.clone() - l.clone()],
            [l.clone(), z.clone() - l.clone()],
            [l.clone(), l.clone()],
            [z.clone() - l.clone(), l.clone()],
        ];
        let poly = planes.iter().fold(box_, |p, h| clip(&p, h));
        let touches = poly.iter().any(|p| p[0].abs() >= l || p[1].abs() >= l);
        if !touches {
            return Ok(poly);
        }
        l = l * two.clone();
    }
    Err(Error::Degenerate("intersection does not fit any bounding box".into()))
}

/// Shoelace area of a counterclockwise polygon.
pub fn polygon_area<T: Scalar>(poly: &[Point<T>]) -> T {
    let n = poly.len();
    let twice = (0..n).fold(T::zero(), |acc, i| acc + cross(&poly[i], &poly[(i + 1) % n]));
    twice / (T::one() + T::one())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexShape {
    /// Counterclockwise.
    pub vertices: Vec<[f64; 2]>,
    pub area: f64,
}

impl ConvexShape {
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<ConvexShape> {
        if vertices.len() < 3 {
            return Err(Error::Degenerate("a polygon needs three vertices".into()));
        }
        let area = polygon_area(&vertices);
        if area.is_nan() || area <= 0.0 {
            return Err(Error::Degenerate(format!("polygon area {area} is not positive")));
        }
        Ok(ConvexShape { vertices, area })
    }

    pub fn scaled(&self, c: f64) -> ConvexShape {
        ConvexShape {
            vertices: self.vertices.iter().map(|v| [v[0] * c, v[1] * c]).collect(),
            area: self.area * c * c,
        }
    }

    pub fn translated(&self, t: [f64; 2]) -> ConvexShape {
        ConvexShape {
            vertices: self.vertices.iter().map(|v| [v[0] + t[0], v[1] + t[1]]).collect(),
            area: self.area,
        }
    }

    /// Rescaled to unit area.
    pub fn normalized(&self) -> ConvexShape {
        let mut s = self.scaled(1.0 / self.area.sqrt());
        s.area = polygon_area(&s.vertices);
        s
    }

    pub fn is_convex(&self, tol: f64) -> bool {
        let v = &self.vertices;
        let n = v.len();
        (0..n).all(|i| cross(&sub(&v[(i + 1) % n], &v[i]), &sub(&v[(i + 2) % n], &v[(i + 1) % n])) >= -tol)
    }

    /// Every vertex has its reflection through the origin among the vertices.
    pub fn is_centrally_symmetric(&self, tol: f64) -> bool {
        self.vertices
            .iter()
            .all(|v| self.vertices.iter().any(|w| (v[0] + w[0]).abs() <= tol && (v[1] + w[1]).abs() <= tol))
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let v = &self.vertices;
        (0..v.len()).all(|i| cross(&sub(&v[(i + 1) % v.len()], &v[i]), &sub(&p, &v[i])) >= 0.0)
    }

    /// Euclidean distance from `p` to the filled polygon.
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        let v = &self.vertices;
        (0..v.len())
            .map(|i| segment_distance(p, v[i], v[(i + 1) % v.len()]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("vertex,x,y\n");
        for (i, v) in self.vertices.iter().enumerate() {
            out.push_str(&format!("{i},{},{}\n", v[0], v[1]));
        }
        out
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = sub(&b, &a);
    let ap = sub(&p, &a);
    let len2 = dot(&ab, &ab);
    let t = if len2 > 0.0 { (dot(&ap, &ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    (p[0] - q[0]).hypot(p[1] - q[1])
}

/// Hausdorff distance between two filled convex polygons.
pub fn hausdorff(a: &ConvexShape, b: &ConvexShape) -> f64 {
    let directed = |x: &ConvexShape, y: &ConvexShape| x.vertices.iter().map(|&v| y.distance(v)).fold(0.0, f64::max);
    directed(a, b).max(directed(b, a))
}

/// A norm sampled on unit directions, extended positively homogeneously by
/// interpolating the unit ball linearly between consecutive directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormTable {
    pub directions: Vec<[f64; 2]>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
}

pub const MIN_DIRECTIONS: usize = 8;

impl NormTable {
    /// Sorts the entries by angle and validates them.
    pub fn new(directions: Vec<[f64; 2]>, values: Vec<f64>, stderr: Vec<f64>) -> Result<NormTable> {
        if directions.len() != values.len() || directions.len() != stderr.len() {
            return Err(Error::InvalidInput("direction, value and stderr lists differ in length".into()));
        }
        if directions.len() < MIN_DIRECTIONS {
            return Err(Error::InvalidInput(format!(
                "a norm table needs at least {MIN_DIRECTIONS} directions, got {}",
                directions.len()
            )));
        }
        for (u, &b) in directions.iter().zip(&values) {
            if ((u[0].hypot(u[1])) - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!("direction {u:?} is not a unit vector")));
            }
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::InvalidInput(format!("norm value {b} is not positive")));
            }
        }
        let mut order: Vec<usize> = (0..directions.len()).collect();
        order.sort_by(|&i, &j| angle(&directions[i]).total_cmp(&angle(&directions[j])));
        let table = NormTable {
            directions: order.iter().map(|&i| directions[i]).collect(),
            values: order.iter().map(|&i| values[i]).collect(),
            stderr: order.iter().map(|&i| stderr[i]).collect(),
        };
        for i in 0..table.len() {
            let (a, b) = (table.directions[i], table.directions[(i + 1) % table.len()]);
            if cross(&a, &b) <= 0.0 {
                return Err(Error::Degenerate(format!(
                    "directions {a:?} and {b:?} are repeated or leave a gap of at least pi"
                )));
            }
        }
        Ok(table)
    }

    /// `count` equally spaced directions starting at `e1`.
    pub fn from_fn(count: usize, f: impl Fn([f64; 2]) -> f64) -> Result<NormTable> {
        let dirs: Vec<[f64; 2]> = (0..count)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / count as f64;
                [t.cos(), t.sin()]
            })
            .collect();
        let values = dirs.iter().map(|&u| f(u)).collect();
        NormTable::new(dirs, values, vec![0.0; count])
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn scaled(&self, c: f64) -> NormTable {
        NormTable {
            directions: self.directions.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            stderr: self.stderr.iter().map(|s| s * c.abs()).collect(),
        }
    }

    /// Writes `x = a u_i / beta_i + b u_j / beta_j` for the cone of
    /// consecutive directions holding `x`, and returns `a + b`.
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        if x[0] == 0.0 && x[1] == 0.0 {
            return 0.0;
        }
        let n = self.len();
        let i = (0..n)
            .find(|&i| {
                let (a, b) = (self.directions[i], self.directions[(i + 1) % n]);
                cross(&a, &x) >= 0.0 && cross(&x, &b) > 0.0
            })
            .unwrap_or(0);
        let j = (i + 1) % n;
        let p = [self.directions[i][0] / self.values[i], self.directions[i][1] / self.values[i]];
        let q = [self.directions[j][0] / self.values[j], self.directions[j][1] / self.values[j]];
        let det = cross(&p, &q);
        cross(&x, &q) / det + cross(&p, &x) / det
    }

    pub fn half_planes(&self) -> Vec<HalfPlane<f64>> {
        self.directions
            .iter()
            .zip(&self.values)
            .map(|(&normal, &offset)| HalfPlane { normal, offset })
            .collect()
    }

    /// Entries whose reflection through the origin is missing or carries a
    /// different value.
    pub fn asymmetries(&self, tol: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| {
                let u = self.directions[i];
                !self.directions.iter().zip(&self.values).any(|(w, &b)| {
                    (u[0] + w[0]).abs() <= 1e-9 && (u[1] + w[1]).abs() <= 1e-9 && (b - self.values[i]).abs() <= tol
                })
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("ux,uy,value,stderr\n");
        for ((u, v), s) in self.directions.iter().zip(&self.values).zip(&self.stderr) {
            out.push_str(&format!("{},{},{v},{s}\n", u[0], u[1]));
        }
        out
    }
}

/// `W = {x : u . x <= beta(u)}` over the table and its unit-area rescaling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WulffShape {
    pub raw: ConvexShape,
    pub normalized: ConvexShape,
}

pub fn wulff_shape(table: &NormTable) -> Result<WulffShape> {
    let raw = ConvexShape::new(intersect_half_planes(&table.half_planes())?)?;
    let normalized = raw.normalized();
    Ok(WulffShape { raw, normalized })
}

/// A norm given on integer or rational vectors, for exact Wulff shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactNormTable {
    pub entries: Vec<(Point<BigRational>, BigRational)>,
}

impl ExactNormTable {
    pub fn from_integers(entries: &[([i64; 2], i64)]) -> ExactNormTable {
        let r = |x: i64| BigRational::from_i64(x).expect("integer");
        ExactNormTable { entries: entries.iter().map(|&(v, b)| ([r(v[0]), r(v[1])], r(b))).collect() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactWulff {
    pub vertices: Vec<Point<BigRational>>,
    pub area: BigRational,
}

impl ExactWulff {
    /// `W` in floating point, together with `W / sqrt(area)`.
    pub fn to_shape(&self) -> Result<WulffShape> {
        let raw = ConvexShape::new(
            self.vertices
                .iter()
                .map(|p| [p[0].to_f64().unwrap_or(f64::NAN), p[1].to_f64().unwrap_or(f64::NAN)])
                .collect(),
        )?;
        let normalized = raw.normalized();
        Ok(WulffShape { raw, normalized })
    }
}

pub fn wulff_exact(table: &ExactNormTable) -> Result<ExactWulff> {
    if table.entries.len() < MIN_DIRECTIONS {
        return Err(Error::InvalidInput(format!(
            "a norm table needs at least {MIN_DIRECTIONS} directions, got {}",
            table.entries.len()
        )));
    }
    let planes: Vec<HalfPlane<BigRational>> = table
        .entries
        .iter()
        .map(|(normal, offset)| HalfPlane { normal: normal.clone(), offset: offset.clone() })
        .collect();
    let vertices = intersect_half_planes(&planes)?;
    let area = polygon_area(&vertices);
    Ok(ExactWulff { vertices, area })
}

/// `sum_i beta(v_{i+1} - v_i)` around the polygon.
pub fn len_beta(table: &NormTable, shape: &ConvexShape) -> f64 {
    let v = &shape.vertices;
    (0..v.len()).map(|i| table.eval(sub(&v[(i + 1) % v.len()], &v[i]))).sum()
}

/// `len_beta(boundary of the unit-area Wulff shape) / (sqrt(2) theta)`.
pub fn variational_cheeger(table: &NormTable, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidInput(format!("theta = {theta} is not in (0, 1]")));
    }
    let w = wulff_shape(table)?;
    Ok(len_beta(table, &w.normalized) / (2f64.sqrt() * theta))
}

/// The directions `(1,0)`, `(2,1)`, `(1,1)` and their images under the
/// symmetries of the square lattice.
pub fn lattice_directions() -> Vec<[i64; 2]> {
    let mut out: Vec<[i64; 2]> = Vec::new();
    for [a, b] in [[1, 0], [2, 1], [1, 1]] {
        for [x, y] in [[a, b], [b, a]] {
            for (sx, sy) in [(1, 1), (-1, 1), (1, -1), (-1, -1)] {
                let v = [sx * x, sy * y];
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
    }
    out
}

/// Norm table of `beta_p` measured along `n v` for every lattice direction
/// `v`, reported per unit length.
pub fn estimate_norm_table(
    p: f64,
    p0: Option<f64>,
    n: i64,
    replicas: usize,
    window: &Window,
    seed: u64,
) -> Result<NormTable> {
    let dirs = lattice_directions();
    let mut units = Vec::new();
    let mut values = Vec::new();
    let mut errs = Vec::new();
    for v in &dirs {
        let est = beta_estimate(p, p0, &Vertex::new(v.to_vec()), n, replicas, window, seed)?;
        let len = (v[0] as f64).hypot(v[1] as f64);
        units.push([v[0] as f64 / len, v[1] as f64 / len]);
        values.push(est.mean / len);
        errs.push(est.stderr / len);
    }
    NormTable::new(units, values, errs)
}
