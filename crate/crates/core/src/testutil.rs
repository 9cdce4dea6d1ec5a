use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::SymmetricMatrix;
use crate::problem::{partition, PartitionScheme, Problem, SyntheticSpec};

pub(crate) fn random_sym<R: Rng>(rng: &mut R, n: usize) -> SymmetricMatrix {
    SymmetricMatrix::from_fn(n, |_, _| rng.random_range(-1.0..1.0)).unwrap()
}

/// B Bᵀ + 0.1 I with uniform B.
pub(crate) fn random_pd<R: Rng>(rng: &mut R, n: usize) -> SymmetricMatrix {
    let b: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    SymmetricMatrix::from_fn(n, |i, j| {
        (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum::<f64>() + if i == j { 0.1 } else { 0.0 }
    })
    .unwrap()
}

pub(crate) fn random_problem(dim: usize, clients: usize, rows_per_client: usize, lambda: f64, seed: u64) -> Problem {
    let data = SyntheticSpec::new(clients * rows_per_client, dim, seed).generate();
    let shards = partition(&data, clients, PartitionScheme::Contiguous).unwrap();
    Problem::new(shards, lambda).unwrap()
}

#[allow(dead_code)]
pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
