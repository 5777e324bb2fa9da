//! Permutation reference distribution of the stage statistics.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::segment::segment_means;
use super::{stage_vector, SubgroupMatrix};
use crate::error::{Error, Result};

/// Means `u_k`, sds `v_k` and aggregated statistics `W~_l` over `L` permutations.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

/// Generator for permutation `l` of analysis round `iteration`.
///
/// Every permutation gets its own ChaCha stream, so the draw does not depend
/// on scheduling and permutations can be evaluated in any order.
pub fn permutation_rng(seed: u64, iteration: usize, l: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((iteration as u64) << 32) | l as u64);
    rng
}

/// One shuffled copy of the pooled values.
pub fn permuted_values(sg: &SubgroupMatrix, seed: u64, iteration: usize, l: usize) -> Vec<f64> {
    let mut pool = sg.values().to_vec();
    pool.shuffle(&mut permutation_rng(seed, iteration, l));
    pool
}

/// `T~_0..=T~_k` for every permutation, in permutation order.
pub fn permutation_stats(
    sg: &SubgroupMatrix,
    k: usize,
    l_min: usize,
    permutations: usize,
    seed: u64,
    iteration: usize,
) -> Vec<Vec<f64>> {
    let n = sg.n();
    (0..permutations)
        .into_par_iter()
        .map(|l| {
            let pool = permuted_values(sg, seed, iteration, l);
            let means: Vec<f64> = pool.chunks_exact(n).map(|c| c.iter().sum::<f64>() / n as f64).collect();
            stage_vector(&means, &segment_means(&means, k, l_min))
        })
        .collect()
}

pub fn permutation_reference(
    sg: &SubgroupMatrix,
    k: usize,
    l_min: usize,
    permutations: usize,
    seed: u64,
    iteration: usize,
) -> Result<Reference> {
    if permutations < 2 {
        return Err(Error::InvalidConfig("at least 2 permutations are required".into()));
    }
    let stats = permutation_stats(sg, k, l_min, permutations, seed, iteration);
    let stages = stats[0].len();
    let count = permutations as f64;
    let mut u = vec![0.0; stages];
    let mut v = vec![0.0; stages];
    for s in 0..stages {
        u[s] = stats.iter().map(|t| t[s]).sum::<f64>() / count;
        let ss: f64 = stats.iter().map(|t| (t[s] - u[s]).powi(2)).sum();
        v[s] = (ss / (count - 1.0)).sqrt();
        if !(v[s] > 0.0) {
            return Err(Error::DegenerateReference { stage: s });
        }
    }
    let w = stats
        .iter()
        .map(|t| super::aggregate(t, &u, &v).expect("v checked positive"))
        .collect();
    Ok(Reference { u, v, w })
}
