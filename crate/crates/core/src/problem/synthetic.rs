use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, Label, Sample};

/// Gaussian features with fair-coin ±1 labels, fully determined by `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub rows: usize,
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
    /// Per-coordinate standard deviations cycle through these; defaults to 1.
    #[serde(default)]
    pub feature_scales: Vec<f64>,
}

impl SyntheticSpec {
    pub fn new(rows: usize, dim: usize, seed: u64) -> Self {
        SyntheticSpec { rows, dim, seed, feature_scales: Vec::new() }
    }

    pub fn generate(&self) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let rows = (0..self.rows)
            .map(|_| {
                let features = (0..self.dim)
                    .map(|j| {
                        let z: f64 = rng.sample(StandardNormal);
                        let s = if self.feature_scales.is_empty() {
                            1.0
                        } else {
                            self.feature_scales[j % self.feature_scales.len()]
                        };
                        s * z
                    })
                    .collect();
                let label = if rng.random_bool(0.5) { Label::Pos } else { Label::Neg };
                Sample { features, label }
            })
            .collect();
        Dataset::new(self.dim, rows).expect("generated rows have the declared width")
    }
}
