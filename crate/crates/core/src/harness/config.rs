use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compression::{SketchDistribution, SketchKind};
use crate::error::{Error, Result};
use crate::problem::{PartitionScheme, SyntheticSpec};
use crate::stepsize::{Method, WKind};

/// Where the rows come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSpec {
    Synthetic(SyntheticSpec),
    Libsvm {
        /// Relative paths resolve against the config file's directory.
        path: PathBuf,
        #[serde(default)]
        d_hint: Option<usize>,
        /// Keep only the first rows (desk-scale subsets).
        #[serde(default)]
        max_rows: Option<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub method: Method,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub p: Option<f64>,
    /// Structure of D = γW; defaults to diag⁻¹(L) for det-CGD and L⁻¹ otherwise.
    #[serde(default)]
    pub w: Option<WKind>,
    pub sketch: SketchKind,
    /// Target accuracy for det-CGD/DCGD stepsizes and complexity predictions.
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Explicit γ; checked instead of computed.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Overrides the experiment-wide K.
    #[serde(default)]
    pub iterations: Option<usize>,
    /// Overrides the experiment-wide seed count.
    #[serde(default)]
    pub seeds: Option<usize>,
}

impl MethodConfig {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.method.name().to_string())
    }

    pub fn iterations(&self, cfg: &ExperimentConfig) -> usize {
        self.iterations.unwrap_or(cfg.iterations)
    }

    pub fn seeds(&self, cfg: &ExperimentConfig) -> usize {
        self.seeds.unwrap_or(cfg.seeds)
    }

    pub fn w_kind(&self) -> WKind {
        self.w.unwrap_or(match self.method {
            Method::DetCgd => WKind::DiagInv,
            _ => WKind::LInv,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    /// Matrix-GD iterations used for the f* and f_i* proxies.
    #[serde(default = "default_gd_iters")]
    pub gd_iters: usize,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig { gd_iters: default_gd_iters() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSpec,
    pub n_clients: usize,
    pub lambda_reg: f64,
    #[serde(default)]
    pub partition: PartitionScheme,
    /// Explicit starting point; otherwise x0_scale · N(0, I) drawn from x0_seed.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "default_x0_scale")]
    pub x0_scale: f64,
    #[serde(default)]
    pub x0_seed: u64,
    /// Number of seeds per method; seed j is base_seed + j.
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// K.
    pub iterations: usize,
    pub methods: Vec<MethodConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub reference: ReferenceConfig,
    #[serde(default)]
    pub parallel_clients: bool,
}

fn default_eps() -> f64 {
    0.1
}

fn default_gd_iters() -> usize {
    3000
}

fn default_x0_scale() -> f64 {
    1.0
}

fn default_seeds() -> usize {
    10
}

impl ExperimentConfig {
    /// Reads JSON, or TOML when the extension is `.toml`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        if is_toml {
            Self::from_toml(&text)
        } else {
            Self::from_json(&text)
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    /// Checks everything that does not need the data; `dim` is checked once known.
    pub fn validate(&self, base_dir: &Path) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.iterations < 1 {
            return fail("iterations must be at least 1".into());
        }
        if self.seeds < 1 {
            return fail("seeds must be at least 1".into());
        }
        if self.n_clients < 1 {
            return fail("n_clients must be at least 1".into());
        }
        if !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite()) {
            return fail(format!("lambda_reg must be >= 0, got {}", self.lambda_reg));
        }
        if !self.x0_scale.is_finite() {
            return fail("x0_scale must be finite".into());
        }
        if self.methods.is_empty() {
            return fail("at least one method is required".into());
        }
        if let DataSpec::Libsvm { path, .. } = &self.data {
            let full = base_dir.join(path);
            if !full.is_file() {
                return fail(format!("dataset {} does not exist", full.display()));
            }
        }
        if let DataSpec::Synthetic(s) = &self.data {
            if s.dim == 0 || s.rows == 0 {
                return fail("synthetic data needs positive rows and dim".into());
            }
        }
        let mut labels = HashSet::new();
        for m in &self.methods {
            let label = m.label();
            if !labels.insert(label.clone()) {
                return fail(format!("duplicate method label `{label}`; set distinct `label`s"));
            }
            if m.method.uses_coin() {
                match m.p {
                    Some(p) if p > 0.0 && p <= 1.0 => {}
                    Some(p) => return Err(Error::InvalidProbability(p)),
                    None => return fail(format!("{label}: {} needs p", m.method)),
                }
            }
            if m.iterations == Some(0) {
                return fail(format!("{label}: iterations must be at least 1"));
            }
            if m.seeds == Some(0) {
                return fail(format!("{label}: seeds must be at least 1"));
            }
            if !(m.eps > 0.0 && m.eps.is_finite()) {
                return fail(format!("{label}: eps must be positive"));
            }
            if let Some(g) = m.gamma {
                if !(g > 0.0 && g.is_finite()) {
                    return fail(format!("{label}: gamma must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Checks that depend on the feature dimension.
    pub fn validate_dim(&self, dim: usize) -> Result<()> {
        if let Some(x0) = &self.x0 {
            if x0.len() != dim {
                return Err(Error::Config(format!("x0 has length {}, data has dimension {dim}", x0.len())));
            }
        }
        for m in &self.methods {
            SketchDistribution::new(m.sketch, dim)?;
        }
        Ok(())
    }
}
