use std::collections::BTreeSet;

use super::{RenormParams, SurgeryReport};
use crate::field::EdgeField;
use crate::lattice::Vertex;

type Pair = (Vertex, Vertex);

fn pair(a: &Vertex, b: &Vertex) -> Pair {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

fn uniform(field: &EdgeField, a: &Vertex, b: &Vertex) -> Option<f64> {
    let (lo, hi) = pair(a, b);
    let axis = (0..lo.dim()).find(|&k| lo.0[k] != hi.0[k])?;
    if hi.0[axis] - lo.0[axis] != 1 || (0..lo.dim()).any(|k| k != axis && lo.0[k] != hi.0[k]) {
        return None;
    }
    let slot = field.region().index_of(lo.coords())? * lo.dim() + axis;
    let u = *field.values().get(slot)?;
    (!u.is_nan()).then_some(u)
}

/// Checks the postconditions of a path modification from the raw field
/// values alone. Returns the violations found; empty means the report is
/// consistent.
pub fn verify_surgery(report: &SurgeryReport, field: &EdgeField, params: &RenormParams) -> Vec<String> {
    let mut bad = Vec::new();
    let old = report.original.vertices();
    let new = report.modified.vertices();
    if old.first() != new.first() || old.last() != new.last() {
        bad.push("modified path does not join the original endpoints".to_string());
    }
    for w in new.windows(2) {
        match uniform(field, &w[0], &w[1]) {
            None => bad.push(format!("step {} -> {} is not an edge of the field", w[0], w[1])),
            Some(u) if u >= params.p => bad.push(format!("edge {} -> {} is p-closed", w[0], w[1])),
            Some(_) => {}
        }
    }
    let old_edges: BTreeSet<Pair> = old.windows(2).map(|w| pair(&w[0], &w[1])).collect();
    let fresh: Vec<bool> = new.windows(2).map(|w| !old_edges.contains(&pair(&w[0], &w[1]))).collect();
    if fresh.iter().filter(|&&f| f).count() != report.added.len() {
        bad.push("reported added edges disagree with the path difference".to_string());
    }

    // Maximal runs of new edges, as vertex ranges of the modified path.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut k = 0;
    while k < fresh.len() {
        if fresh[k] {
            let start = k;
            while k < fresh.len() && fresh[k] {
                k += 1;
            }
            runs.push((start, k));
        } else {
            k += 1;
        }
    }
    let kept: BTreeSet<&Vertex> = fresh
        .iter()
        .enumerate()
        .filter(|(_, &f)| !f)
        .flat_map(|(k, _)| [&new[k], &new[k + 1]])
        .collect();
    let mut used: BTreeSet<&Vertex> = BTreeSet::new();
    for &(s, e) in &runs {
        let verts = &new[s..=e];
        let distinct: BTreeSet<&Vertex> = verts.iter().collect();
        if distinct.len() != verts.len() {
            bad.push(format!("added segment starting at {} is not self-avoiding", new[s]));
        }
        for w in verts.windows(2) {
            if uniform(field, &w[0], &w[1]).is_none_or(|u| u >= params.p0) {
                bad.push(format!("added edge {} -> {} is not p0-open", w[0], w[1]));
            }
        }
        for x in &verts[1..verts.len() - 1] {
            if kept.contains(x) {
                bad.push(format!("added segment meets the kept path at interior vertex {x}"));
            }
        }
        if distinct.iter().any(|x| used.contains(x)) {
            bad.push(format!("added segment starting at {} meets another added segment", new[s]));
        }
        used.extend(distinct);
    }
    bad
}
