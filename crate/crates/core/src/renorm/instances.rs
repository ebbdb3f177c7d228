use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Renormalization, RenormParams};
use crate::error::Result;
use crate::field::{EdgeField, FieldKey};
use crate::fpp::ShortestPaths;
use crate::lattice::{macro_index_of, LatticePath, MacroBox, MacroIndex, Vertex, Window};

fn rng_for(seed: u64, replica: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ replica.wrapping_mul(0xD1B5_4A32_D192_ED03).rotate_left(17))
}

fn field_for(params: &RenormParams, dim: usize, grid_half: i64, seed: u64, replica: u64) -> Result<EdgeField> {
    let n = params.scale;
    let window = Window::new(dim, (2 * n + 1) * grid_half + 3 * n, 0)?;
    Ok(EdgeField::generate(seed, replica, &window))
}

fn core_point(renorm: &Renormalization, block: &MacroIndex, rng: &mut ChaCha8Rng) -> Option<Vertex> {
    let core = MacroBox { index: block.clone(), scale: renorm.params.scale }.core();
    let region = &renorm.classification.region;
    let inside: Vec<usize> = renorm
        .classification
        .crossing_cluster(block)?
        .iter()
        .copied()
        .filter(|&i| core.contains(&region.coords_of(i)))
        .collect();
    inside.choose(rng).map(|&i| region.vertex(i))
}

/// A classified field with a `q`-open path between crossing-cluster points of
/// two blocks of the spanning good cluster.
#[derive(Clone, Debug)]
pub struct SurgeryInstance {
    pub field: EdgeField,
    pub renorm: Renormalization,
    pub gamma: LatticePath,
}

/// Draws an instance on a grid of `(2 grid_half + 1)^d` blocks. The path is a
/// geodesic of independent uniform weights on the `q`-open edges, so it
/// crosses `p`-closed edges freely. `None` when the sample has no spanning
/// good cluster or the endpoints are not `q`-connected.
pub fn surgery_instance(
    params: &RenormParams,
    dim: usize,
    grid_half: i64,
    seed: u64,
    replica: u64,
) -> Result<Option<SurgeryInstance>> {
    let field = field_for(params, dim, grid_half, seed, replica)?;
    let renorm = Renormalization::new(*params, &field)?;
    let Some(spanning) = renorm.classification.spanning_good_component() else {
        return Ok(None);
    };
    let mut rng = rng_for(seed, replica);
    let blocks: Vec<&MacroIndex> = spanning.iter().collect();
    let from = blocks[rng.gen_range(0..blocks.len())].clone();
    let to = blocks[rng.gen_range(0..blocks.len())].clone();
    let (Some(y), Some(z)) = (core_point(&renorm, &from, &mut rng), core_point(&renorm, &to, &mut rng)) else {
        return Ok(None);
    };
    let region = field.region();
    let key = FieldKey::new(seed, replica).with_stream(1);
    let classified = |i: usize| renorm.classification.grid.contains_key(&macro_index_of(&region.coords_of(i), params.scale));
    let allowed: Vec<bool> = (0..region.num_vertices()).map(classified).collect();
    let times: Vec<f64> = (0..region.num_edge_slots())
        .map(|slot| match region.slot_endpoints(slot) {
            Some((a, b)) if renorm.q.open[slot] && allowed[a] && allowed[b] => {
                key.uniform(&region.coords_of(a), slot % dim)
            }
            _ => f64::INFINITY,
        })
        .collect();
    let src = region.index_of(y.coords()).expect("inside");
    let dst = region.index_of(z.coords()).expect("inside");
    let Some(path) = ShortestPaths::compute_until(region, &times, src, Some(dst)).path_to(dst) else {
        return Ok(None);
    };
    Ok(Some(SurgeryInstance { field, renorm, gamma: path }))
}

/// A `*`-connected chain of good blocks with crossing-cluster points in its
/// first and last block.
#[derive(Clone, Debug)]
pub struct RouteInstance {
    pub renorm: Renormalization,
    pub blocks: BTreeSet<MacroIndex>,
    pub x: Vertex,
    pub y: Vertex,
}

pub fn route_instance(
    params: &RenormParams,
    dim: usize,
    chain_len: usize,
    seed: u64,
    replica: u64,
) -> Result<Option<RouteInstance>> {
    let grid_half = 2;
    let field = field_for(params, dim, grid_half, seed, replica)?;
    let renorm = Renormalization::new(*params, &field)?;
    let mut rng = rng_for(seed, replica);
    let good: Vec<&MacroIndex> = renorm
        .classification
        .grid
        .iter()
        .filter(|(_, f)| f.is_good())
        .map(|(i, _)| i)
        .collect();
    let Some(&start) = good.choose(&mut rng) else {
        return Ok(None);
    };
    let mut chain = vec![start.clone()];
    while chain.len() < chain_len.max(1) {
        let last = chain.last().expect("nonempty");
        let next: Vec<MacroIndex> = last
            .star_neighbors()
            .into_iter()
            .filter(|b| renorm.classification.is_good(b) == Some(true) && !chain.contains(b))
            .collect();
        let Some(b) = next.choose(&mut rng) else {
            return Ok(None);
        };
        chain.push(b.clone());
    }
    let (Some(x), Some(y)) = (
        core_point(&renorm, &chain[0], &mut rng),
        core_point(&renorm, chain.last().expect("nonempty"), &mut rng),
    ) else {
        return Ok(None);
    };
    Ok(Some(RouteInstance { renorm, blocks: chain.into_iter().collect(), x, y }))
}
