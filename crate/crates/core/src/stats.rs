//! Paired permutation test for the difference in AUUCC between two
//! interval models over the same `(y, y_hat)`.
//!
//! Each permutation swaps every record's band pair between the two models
//! with probability 1/2. Permutation `i` draws from its own ChaCha stream
//! (`stream = i`) of the seeded generator, so results do not depend on how
//! permutations are scheduled across threads.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::curve::{auucc, build_ucc, AxisPair, CurveError};
use crate::data::{Dataset, PredictionRecord};

pub const DEFAULT_PERMUTATIONS: usize = 999;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("models do not share ground truth and predictions")]
    MismatchedBase,
    #[error("number of permutations must be at least 1")]
    NoPermutations,
    #[error(transparent)]
    Curve(#[from] CurveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PermutationResult {
    /// `AUUCC(a) - AUUCC(b)`.
    pub observed_delta: f64,
    pub p_value: f64,
    pub n_permutations: usize,
    pub seed: u64,
}

fn area(ds: &Dataset, axes: AxisPair) -> Result<f64, CurveError> {
    auucc(&build_ucc(ds, axes)?)
}

pub fn paired_permutation_test(
    a: &Dataset,
    b: &Dataset,
    axes: AxisPair,
    n_perm: usize,
    seed: u64,
) -> Result<PermutationResult, StatsError> {
    if !a.shares_base_with(b) {
        return Err(StatsError::MismatchedBase);
    }
    if n_perm == 0 {
        return Err(StatsError::NoPermutations);
    }
    let observed_delta = area(a, axes)? - area(b, axes)?;
    let observed = observed_delta.abs();

    let ra = a.records();
    let rb = b.records();
    let exceed: Vec<bool> = (0..n_perm)
        .into_par_iter()
        .map(|i| -> Result<bool, StatsError> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut pa = Vec::with_capacity(ra.len());
            let mut pb = Vec::with_capacity(rb.len());
            for (x, y) in ra.iter().zip(rb) {
                if rng.random::<bool>() {
                    pa.push(*y);
                    pb.push(*x);
                } else {
                    pa.push(*x);
                    pb.push(*y);
                }
            }
            let da = permuted(a, pa);
            let db = permuted(b, pb);
            let delta = area(&da, axes)? - area(&db, axes)?;
            Ok(delta.abs() >= observed)
        })
        .collect::<Result<_, _>>()?;
    let hits = exceed.iter().filter(|&&e| e).count();

    Ok(PermutationResult {
        observed_delta,
        p_value: (1 + hits) as f64 / (n_perm + 1) as f64,
        n_permutations: n_perm,
        seed,
    })
}

fn permuted(like: &Dataset, records: Vec<PredictionRecord>) -> Dataset {
    Dataset::with_name(like.name(), records).expect("swapped records stay valid")
}
