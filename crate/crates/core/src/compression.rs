//! Random sketch compressors.
//!
//! A Rand-τ sketch is S = (d/τ) Σ_j e_{i_j} e_{i_j}ᵀ over a uniformly random
//! τ-subset; it is never materialized, only applied as (subset, scale).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;

/// Stream index reserved for server-side draws (the shared coin).
pub const SERVER_STREAM: u64 = u64::MAX;

/// Sketch law as written in experiment configs:
/// `{"kind": "rand_tau", "tau": N}` or `{"kind": "identity"}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SketchKind {
    RandTau { tau: usize },
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SketchDistribution {
    kind: SketchKind,
    dim: usize,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent RNG stream for (seed, client, iteration). Serial and parallel
/// client loops draw identical values because no stream is shared.
pub fn stream_rng(seed: u64, client: u64, iteration: u64) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(splitmix64(seed) ^ client) ^ iteration);
    ChaCha8Rng::seed_from_u64(key)
}

/// A drawn sketch.
#[derive(Clone, Debug, PartialEq)]
pub struct Sketch {
    dim: usize,
    /// Sorted kept coordinates; `None` keeps everything.
    indices: Option<Vec<usize>>,
    scale: f64,
}

/// Compressed message: `values[k]` sits at coordinate `indices[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVec {
    pub dim: usize,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVec {
    /// Number of transmitted floats.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.add_into(&mut out, 1.0);
        out
    }

    /// out += coef · self.
    pub fn add_into(&self, out: &mut [f64], coef: f64) {
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] += coef * v;
        }
    }
}

impl Sketch {
    pub fn indices(&self) -> Option<&[usize]> {
        self.indices.as_deref()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// S·x in O(τ).
    pub fn apply(&self, x: &[f64]) -> SparseVec {
        assert_eq!(x.len(), self.dim, "sketch applied to vector of wrong length");
        match &self.indices {
            None => SparseVec { dim: self.dim, indices: (0..self.dim).collect(), values: x.to_vec() },
            Some(idx) => SparseVec {
                dim: self.dim,
                indices: idx.clone(),
                values: idx.iter().map(|&i| self.scale * x[i]).collect(),
            },
        }
    }
}

impl SketchDistribution {
    pub fn new(kind: SketchKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSketch("dimension must be positive".into()));
        }
        if let SketchKind::RandTau { tau } = kind {
            if tau == 0 || tau > dim {
                return Err(Error::InvalidSketch(format!("tau = {tau} must lie in 1..={dim}")));
            }
        }
        Ok(SketchDistribution { kind, dim })
    }

    pub fn rand_tau(dim: usize, tau: usize) -> Result<Self> {
        Self::new(SketchKind::RandTau { tau }, dim)
    }

    pub fn identity(dim: usize) -> Self {
        SketchDistribution { kind: SketchKind::Identity, dim }
    }

    pub fn kind(&self) -> SketchKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Sketch {
        match self.kind {
            SketchKind::Identity => Sketch { dim: self.dim, indices: None, scale: 1.0 },
            SketchKind::RandTau { tau } => {
                let mut idx = rand::seq::index::sample(rng, self.dim, tau).into_vec();
                idx.sort_unstable();
                Sketch { dim: self.dim, indices: Some(idx), scale: self.dim as f64 / tau as f64 }
            }
        }
    }

    /// E[S W S] in closed form:
    /// (d/τ)((d−τ)/(d−1)·diag(W) + (τ−1)/(d−1)·W) for Rand-τ, W for Identity.
    pub fn expected_moment(&self, w: &SymmetricMatrix) -> Result<SymmetricMatrix> {
        if w.dim() != self.dim {
            return Err(Error::dim(self.dim, w.dim()));
        }
        match self.kind {
            SketchKind::Identity => Ok(w.clone()),
            SketchKind::RandTau { tau } if tau == self.dim => Ok(w.clone()),
            SketchKind::RandTau { tau } => {
                let d = self.dim as f64;
                let t = tau as f64;
                let diag_coef = (d / t) * (d - t) / (d - 1.0);
                let full_coef = (d / t) * (t - 1.0) / (d - 1.0);
                SymmetricMatrix::linear_combination(&[(diag_coef, &w.diag_part()), (full_coef, w)])
            }
        }
    }

    /// Λ_{W,S} = λmax(E[S W S] − W).
    pub fn lambda_ws(&self, w: &SymmetricMatrix) -> Result<f64> {
        match self.kind {
            SketchKind::Identity => Ok(0.0),
            SketchKind::RandTau { .. } => Ok(self.expected_moment(w)?.sub(w)?.lambda_max()),
        }
    }

    /// ω_W = λmax(W⁻¹)·Λ_{W,S}; invariant under W → cW.
    pub fn omega_w(&self, w: &SymmetricMatrix) -> Result<f64> {
        w.require_pd()?;
        Ok(self.lambda_ws(w)? / w.lambda_min())
    }

    /// Scalar compressor parameter ω = λmax(E[SᵀS]) − 1 (= d/τ − 1 for Rand-τ).
    pub fn omega(&self) -> f64 {
        match self.kind {
            SketchKind::Identity => 0.0,
            SketchKind::RandTau { tau } => self.dim as f64 / tau as f64 - 1.0,
        }
    }

    /// ζ_S: nonzeros per compressed message.
    pub fn expected_density(&self) -> usize {
        match self.kind {
            SketchKind::Identity => self.dim,
            SketchKind::RandTau { tau } => tau,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_pd, random_sym};

    #[test]
    fn identity_sketch_is_noop() {
        let s = SketchDistribution::identity(3);
        let mut rng = stream_rng(1, 2, 3);
        let x = [1.0, -2.0, 3.5];
        assert_eq!(s.sample(&mut rng).apply(&x).to_dense(), x.to_vec());
    }

    #[test]
    fn full_rand_tau_is_noop() {
        let s = SketchDistribution::rand_tau(4, 4).unwrap();
        let mut rng = stream_rng(0, 0, 0);
        let sk = s.sample(&mut rng);
        assert_eq!(sk.scale(), 1.0);
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(sk.apply(&x).to_dense(), x.to_vec());
    }

    #[test]
    fn rand_one_outputs_and_unbiasedness() {
        let s = SketchDistribution::rand_tau(3, 1).unwrap();
        let x = [1.0, 2.0, 3.0];
        let allowed = [vec![3.0, 0.0, 0.0], vec![0.0, 6.0, 0.0], vec![0.0, 0.0, 9.0]];
        let draws = 100_000;
        let mut mean = [0.0; 3];
        let mut rng = stream_rng(42, 0, 0);
        for _ in 0..draws {
            let y = s.sample(&mut rng).apply(&x).to_dense();
            assert!(allowed.contains(&y));
            for j in 0..3 {
                mean[j] += y[j] / draws as f64;
            }
        }
        for j in 0..3 {
            // Var of coordinate j: x_j²(d/τ)·(1 − τ/d)·... = x_j²·(3 − 1)
            let sigma = (x[j] * x[j] * 2.0 / draws as f64).sqrt();
            assert!((mean[j] - x[j]).abs() <= 5.0 * sigma, "coord {j}: {}", mean[j]);
        }
    }

    #[test]
    fn rejects_bad_tau() {
        assert!(SketchDistribution::rand_tau(3, 0).is_err());
        assert!(SketchDistribution::rand_tau(3, 4).is_err());
        assert!(SketchDistribution::rand_tau(0, 0).is_err());
    }

    #[test]
    fn moment_rand_one_identity() {
        let s = SketchDistribution::rand_tau(3, 1).unwrap();
        let m = s.expected_moment(&SymmetricMatrix::identity(3)).unwrap();
        assert_eq!(m, SymmetricMatrix::scaled_identity(3, 3.0));
        assert_eq!(s.lambda_ws(&SymmetricMatrix::identity(3)).unwrap(), 2.0);
        assert_eq!(s.omega(), 2.0);
    }

    #[test]
    fn moment_full_sampling_and_dim_one() {
        let mut rng = stream_rng(5, 5, 5);
        let w = random_sym(&mut rng, 4);
        let s = SketchDistribution::rand_tau(4, 4).unwrap();
        assert_eq!(s.expected_moment(&w).unwrap(), w);
        let one = SymmetricMatrix::identity(1);
        assert_eq!(SketchDistribution::rand_tau(1, 1).unwrap().expected_moment(&one).unwrap(), one);
    }

    #[test]
    fn lambda_and_omega_for_identity_sketch() {
        let mut rng = stream_rng(1, 1, 1);
        let w = random_pd(&mut rng, 4);
        let s = SketchDistribution::identity(4);
        assert_eq!(s.lambda_ws(&w).unwrap(), 0.0);
        assert_eq!(s.omega_w(&w).unwrap(), 0.0);
    }

    #[test]
    fn omega_at_identity_is_scalar_omega() {
        for (d, tau) in [(5, 1), (5, 2), (10, 3), (7, 7)] {
            let s = SketchDistribution::rand_tau(d, tau).unwrap();
            let got = s.omega_w(&SymmetricMatrix::identity(d)).unwrap();
            let want = d as f64 / tau as f64 - 1.0;
            assert!((got - want).abs() < 1e-12, "d={d} tau={tau}");
        }
    }

    #[test]
    fn omega_is_scale_invariant() {
        let mut rng = stream_rng(9, 0, 0);
        let w = random_pd(&mut rng, 5);
        let s = SketchDistribution::rand_tau(5, 2).unwrap();
        let base = s.omega_w(&w).unwrap();
        for c in [0.1, 1.0, 10.0] {
            let got = s.omega_w(&w.scale(c)).unwrap();
            assert!((got - base).abs() <= 1e-12 * base);
        }
    }

    #[test]
    fn expected_density_values() {
        assert_eq!(SketchDistribution::rand_tau(10, 5).unwrap().expected_density(), 5);
        assert_eq!(SketchDistribution::identity(10).expected_density(), 10);
        assert_eq!(SketchDistribution::rand_tau(7, 7).unwrap().expected_density(), 7);
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = stream_rng(1, 2, 3).random();
        let b: u64 = stream_rng(1, 2, 3).random();
        let c: u64 = stream_rng(1, 3, 2).random();
        let d: u64 = stream_rng(2, 2, 3).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn config_json_form() {
        let k: SketchKind = serde_json::from_str(r#"{"kind":"rand_tau","tau":3}"#).unwrap();
        assert_eq!(k, SketchKind::RandTau { tau: 3 });
        let k: SketchKind = serde_json::from_str(r#"{"kind":"identity"}"#).unwrap();
        assert_eq!(k, SketchKind::Identity);
    }
}
