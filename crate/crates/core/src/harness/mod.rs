//! Experiment orchestration: config → problem → stepsizes → runs → traces.

mod config;
mod trace;

pub use config::{DataSpec, ExperimentConfig, MethodConfig, ReferenceConfig};
pub use trace::{aggregate, read_rows, write_rows, RunTrace, SeriesStats, Summary, TraceRow, CSV_COLUMNS};

pub use crate::stepsize::account_floats;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::algorithms::{self, AlgoConfig};
use crate::compression::SketchDistribution;
use crate::error::{Error, Result};
use crate::linalg::{det_normalized, inv_psd, weighted_norm_sq, SymmetricMatrix};
use crate::problem::{parse_libsvm, partition, Dataset, Problem};
use crate::stepsize::{
    compute_stepsize, predict_complexity, CgdTarget, Method, MethodParams, Prediction, StepsizeContext, StepsizeSpec,
};

/// Values the stepsize rules and complexity predictions need beyond L and L_i.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Reference {
    /// Proxy for f*: the best f seen along matrix GD with D = L⁻¹ from x⁰.
    pub f_star: f64,
    /// Proxies for f_i*, from GD on f_i with D = L_i⁻¹.
    pub f_local_star: Vec<f64>,
    /// f* − (1/n) Σ f_i*.
    pub delta_star: f64,
    pub f_x0: f64,
    /// f(x⁰) − f*.
    pub delta0: f64,
    pub gd_iters: usize,
}

fn best_along_gd(
    x0: &[f64],
    d: &SymmetricMatrix,
    iters: usize,
    f: impl Fn(&[f64]) -> Result<f64>,
    grad: impl Fn(&[f64]) -> Result<Vec<f64>>,
) -> Result<f64> {
    let mut x = x0.to_vec();
    let mut best = f(&x)?;
    for _ in 0..iters {
        let step = d.mul_vec(&grad(&x)?);
        for (xi, s) in x.iter_mut().zip(step) {
            *xi -= s;
        }
        best = best.min(f(&x)?);
    }
    Ok(best)
}

pub fn compute_reference(problem: &Problem, x0: &[f64], gd_iters: usize) -> Result<Reference> {
    let sm = problem.smoothness();
    let d = inv_psd(&sm.global)?;
    let f_star = best_along_gd(x0, &d, gd_iters, |x| problem.loss(x), |x| problem.full_grad(x))?;
    let f_local_star = (0..problem.n_clients())
        .into_par_iter()
        .map(|i| {
            let di = inv_psd(&sm.local[i])?;
            best_along_gd(x0, &di, gd_iters, |x| problem.client_loss(i, x), |x| problem.grad(i, x))
        })
        .collect::<Result<Vec<_>>>()?;
    let delta_star = f_star - f_local_star.iter().sum::<f64>() / f_local_star.len() as f64;
    let f_x0 = problem.loss(x0)?;
    Ok(Reference { f_star, f_local_star, delta_star, f_x0, delta0: f_x0 - f_star, gd_iters })
}

fn load_dataset(spec: &DataSpec, base_dir: &Path) -> Result<Dataset> {
    match spec {
        DataSpec::Synthetic(s) => Ok(s.generate()),
        DataSpec::Libsvm { path, d_hint, max_rows } => {
            let full = base_dir.join(path);
            let file = File::open(&full).map_err(|e| Error::Config(format!("cannot open {}: {e}", full.display())))?;
            let data = parse_libsvm(BufReader::new(file), *d_hint)?;
            match max_rows {
                Some(m) if *m < data.len() => {
                    let dim = data.dim();
                    Dataset::new(dim, data.into_rows().into_iter().take(*m).collect())
                }
                _ => Ok(data),
            }
        }
    }
}

/// Builds the problem and starting point a config describes.
pub fn load_problem(cfg: &ExperimentConfig, base_dir: &Path) -> Result<(Problem, Vec<f64>)> {
    cfg.validate(base_dir)?;
    let data = load_dataset(&cfg.data, base_dir)?;
    cfg.validate_dim(data.dim())?;
    let shards = partition(&data, cfg.n_clients, cfg.partition)?;
    let problem = Problem::new(shards, cfg.lambda_reg)?;
    if problem.smoothness().degenerate {
        return Err(Error::Config(
            "smoothness matrices are singular (lambda_reg = 0 with rank-deficient data)".into(),
        ));
    }
    let x0 = match &cfg.x0 {
        Some(x) => x.clone(),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.x0_seed);
            (0..data.dim()).map(|_| cfg.x0_scale * rng.sample::<f64, _>(StandardNormal)).collect()
        }
    };
    Ok((problem, x0))
}

/// Hex SHA-256 of the config's canonical JSON form, ignoring fields that
/// cannot change results (output location, client-loop parallelism).
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut cfg = cfg.clone();
    cfg.output_dir = None;
    cfg.parallel_clients = false;
    let canonical = serde_json::to_vec(&cfg).expect("config serializes");
    Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug)]
pub struct PreparedMethod {
    pub label: String,
    pub config: MethodConfig,
    pub sketch: SketchDistribution,
    pub spec: StepsizeSpec,
    /// Absent when the stepsize is inadmissible.
    pub prediction: Option<Prediction>,
}

impl PreparedMethod {
    /// The certificate printed by `detvr stepsize`.
    pub fn certificate_json(&self) -> Result<serde_json::Value> {
        let c = &self.spec.certificate;
        let omega = match c.omega {
            Some(o) => o,
            None => self.sketch.omega_w(&self.spec.w)?,
        };
        Ok(json!({
            "label": self.label,
            "method": self.spec.method,
            "W-kind": self.spec.w_kind,
            "gamma": self.spec.gamma,
            "alpha": c.alpha,
            "beta": c.beta,
            "Lambda": c.lambda_ws,
            "omega": omega,
            "momentum": self.spec.momentum,
            "p": self.spec.p,
            "admissible": self.spec.admissible,
            "certificate": c,
            "predicted_K": self.prediction.map(|p| p.iterations),
            "predicted_floats": self.prediction.map(|p| p.floats),
        }))
    }
}

#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub problem: Problem,
    pub x0: Vec<f64>,
    pub reference: Reference,
    pub methods: Vec<PreparedMethod>,
}

/// Loads data, computes reference values and every method's stepsize.
/// Inadmissible stepsizes are reported, not rejected; `run_prepared` rejects them.
pub fn prepare(cfg: &ExperimentConfig, base_dir: &Path) -> Result<Prepared> {
    let (problem, x0) = load_problem(cfg, base_dir)?;
    let reference = compute_reference(&problem, &x0, cfg.reference.gd_iters)?;
    let sm = problem.smoothness();
    let dim = problem.dim();
    let n = problem.n_clients();
    let methods = cfg
        .methods
        .iter()
        .map(|m| {
            let sketch = SketchDistribution::new(m.sketch, dim)?;
            let ctx = StepsizeContext {
                global: &sm.global,
                local: &sm.local,
                sketch: &sketch,
                target: CgdTarget { iterations: m.iterations(cfg), eps: m.eps, delta_star: reference.delta_star },
            };
            let params = MethodParams { method: m.method, p: m.p, w_kind: m.w_kind(), gamma: m.gamma };
            let spec = compute_stepsize(params, &ctx)?;
            let prediction = if spec.admissible {
                Some(predict_complexity(&spec, reference.delta0, m.eps, n, sketch.expected_density())?)
            } else {
                None
            };
            Ok(PreparedMethod { label: m.label(), config: m.clone(), sketch, spec, prediction })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared { config: cfg.clone(), config_hash: config_hash(cfg), problem, x0, reference, methods })
}

/// One method/seed run recorded as a trace.
pub fn run_single(prepared: &Prepared, method: usize, seed: u64) -> Result<RunTrace> {
    let (problem, pm) = (&prepared.problem, &prepared.methods[method]);
    let (_, dn) = det_normalized(&pm.spec.d)?;
    let cfg = AlgoConfig::from_spec(&pm.spec, pm.sketch, seed, prepared.config.parallel_clients);
    let iterations = pm.config.iterations(&prepared.config);
    let mut rows = Vec::with_capacity(iterations + 1);
    algorithms::run(problem, &cfg, &prepared.x0, iterations, |o| {
        let s = o.state;
        let aux = match pm.spec.method {
            m if m.uses_coin() => o.info.and_then(|i| i.coin).map(|c| if c { 1.0 } else { 0.0 }),
            Method::DetDasha | Method::Dasha => pm.spec.momentum,
            _ => None,
        };
        rows.push(TraceRow {
            k: s.iteration,
            f: problem.loss(&s.x)?,
            grad_metric: weighted_norm_sq(&s.full_grad(), &dn)?,
            floats_cum: o.floats_cum as f64,
            aux,
        });
        Ok(())
    })?;
    Ok(RunTrace {
        label: pm.label.clone(),
        method: pm.spec.method,
        seed,
        config_hash: prepared.config_hash.clone(),
        rows,
    })
}

#[derive(Clone, Debug)]
pub struct MethodRun {
    pub method: PreparedMethod,
    pub traces: Vec<RunTrace>,
    pub summary: Summary,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub prepared: Prepared,
    pub runs: Vec<MethodRun>,
}

/// Runs every (method, seed) pair; fails before any run if a stepsize is inadmissible.
pub fn run_prepared(prepared: Prepared) -> Result<ExperimentResult> {
    for pm in &prepared.methods {
        pm.spec.require_admissible().map_err(|_| Error::InadmissibleStepsize {
            method: pm.label.clone(),
            reason: serde_json::to_string(&pm.certificate_json().unwrap_or_default()).unwrap_or_default(),
        })?;
    }
    let cfg = &prepared.config;
    let tasks: Vec<(usize, u64)> = prepared
        .methods
        .iter()
        .enumerate()
        .flat_map(|(m, pm)| (0..pm.config.seeds(cfg) as u64).map(move |j| (m, cfg.base_seed.wrapping_add(j))))
        .collect();
    let traces = tasks
        .par_iter()
        .map(|&(m, seed)| run_single(&prepared, m, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut it = traces.into_iter();
    let runs = prepared
        .methods
        .iter()
        .map(|pm| {
            let traces: Vec<RunTrace> = it.by_ref().take(pm.config.seeds(cfg)).collect();
            let summary = aggregate(&traces)?;
            Ok(MethodRun { method: pm.clone(), traces, summary })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult { prepared, runs })
}

pub fn run_experiment(cfg: &ExperimentConfig, base_dir: &Path) -> Result<ExperimentResult> {
    run_prepared(prepare(cfg, base_dir)?)
}

fn file_stem(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

impl ExperimentResult {
    /// summary.json contents.
    pub fn summary_json(&self) -> Result<serde_json::Value> {
        let p = &self.prepared;
        let methods = self
            .runs
            .iter()
            .map(|r| {
                let s = &r.summary;
                let last = s.k.len() - 1;
                let stem = file_stem(&r.method.label);
                Ok(json!({
                    "stepsize": r.method.certificate_json()?,
                    "iterations": r.method.config.iterations(&p.config),
                    "seeds": s.seeds,
                    "sketch": r.method.config.sketch,
                    "eps": r.method.config.eps,
                    "min_over_k": s.min_over_k,
                    "uniform_average": s.uniform_average,
                    "final": {
                        "f": s.f.mean[last],
                        "grad_metric": s.grad_metric.mean[last],
                        "floats_cum": s.floats_cum.mean[last],
                    },
                    "files": {
                        "mean": format!("{stem}_mean.csv"),
                        "std": format!("{stem}_std.csv"),
                        "traces": r.traces.iter().map(|t| format!("{stem}_seed{}.csv", t.seed)).collect::<Vec<_>>(),
                    },
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(json!({
            "config_hash": p.config_hash,
            "base_seed": p.config.base_seed,
            "dim": p.problem.dim(),
            "n_clients": p.problem.n_clients(),
            "reference": p.reference,
            "reference_note": format!(
                "f* is the best f over {} matrix-GD iterations with D = L^-1 from x0; f_i* likewise with L_i^-1",
                p.reference.gd_iters
            ),
            "methods": methods,
        }))
    }

    /// Writes per-seed traces, mean/std traces and summary.json into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: String, rows: &[TraceRow]| -> Result<()> {
            let path = dir.join(name);
            write_rows(rows, File::create(&path)?)?;
            written.push(path);
            Ok(())
        };
        for r in &self.runs {
            let stem = file_stem(&r.method.label);
            for t in &r.traces {
                put(format!("{stem}_seed{}.csv", t.seed), &t.rows)?;
            }
            put(format!("{stem}_mean.csv"), &r.summary.mean_rows())?;
            put(format!("{stem}_std.csv"), &r.summary.std_rows())?;
        }
        let path = dir.join("summary.json");
        std::fs::write(&path, serde_json::to_string_pretty(&self.summary_json()?)? + "\n")?;
        written.push(path);
        Ok(written)
    }
}
