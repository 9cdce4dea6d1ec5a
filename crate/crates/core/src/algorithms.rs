//! The optimization loops. Every step takes the state at x^k, moves to
//! x^{k+1}, and reports the floats the clients transmitted.
//!
//! Scalar baselines run through the same steps with D = γI.

use rand::Rng;
use rayon::prelude::*;

use crate::compression::{stream_rng, SketchDistribution, SparseVec, SERVER_STREAM};
use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;
use crate::problem::{mean_vectors, Problem};
use crate::stepsize::{Method, StepsizeSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct AlgoState {
    pub x: Vec<f64>,
    /// Server estimate g^k (for det-CGD2-VR this already includes D).
    pub g: Vec<f64>,
    /// ∇f_i(x^k) per client; these are det-DASHA's h_i.
    pub grads: Vec<Vec<f64>>,
    /// det-DASHA's per-client g_i; empty for the other methods.
    pub g_i: Vec<Vec<f64>>,
    pub iteration: usize,
    pub seed: u64,
}

impl AlgoState {
    /// ∇f(x^k) from the cached client gradients.
    pub fn full_grad(&self) -> Vec<f64> {
        mean_vectors(&self.grads)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepInfo {
    /// The shared coin c_k for coin methods.
    pub coin: Option<bool>,
    /// Floats sent by all clients during the step.
    pub floats: u64,
}

/// Everything a run needs besides the problem and the starting point.
#[derive(Clone, Debug)]
pub struct AlgoConfig {
    pub method: Method,
    pub d: SymmetricMatrix,
    pub p: Option<f64>,
    pub momentum: Option<f64>,
    pub sketch: SketchDistribution,
    pub seed: u64,
    pub parallel: bool,
}

impl AlgoConfig {
    pub fn from_spec(spec: &StepsizeSpec, sketch: SketchDistribution, seed: u64, parallel: bool) -> Self {
        AlgoConfig { method: spec.method, d: spec.d.clone(), p: spec.p, momentum: spec.momentum, sketch, seed, parallel }
    }

    fn probability(&self) -> Result<f64> {
        match self.p {
            Some(p) if p > 0.0 && p <= 1.0 => Ok(p),
            Some(p) => Err(Error::InvalidProbability(p)),
            None => Err(Error::Config(format!("{} needs a probability p", self.method))),
        }
    }

    fn momentum(&self) -> Result<f64> {
        match self.momentum {
            Some(a) if a > 0.0 && a <= 1.0 => Ok(a),
            Some(a) => Err(Error::Config(format!("momentum must lie in (0, 1], got {a}"))),
            None => Err(Error::Config(format!("{} needs a momentum", self.method))),
        }
    }
}

/// The server's Bernoulli(p) draw for iteration k.
pub fn server_coin(seed: u64, iteration: usize, p: f64) -> bool {
    stream_rng(seed, SERVER_STREAM, iteration as u64).random_bool(p)
}

fn client_sketch(sketch: &SketchDistribution, seed: u64, client: usize, iteration: usize, v: &[f64]) -> SparseVec {
    let mut rng = stream_rng(seed, client as u64, iteration as u64);
    sketch.sample(&mut rng).apply(v)
}

fn per_client<T, F>(n: usize, parallel: bool, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn check_start(problem: &Problem, cfg: &AlgoConfig, x0: &[f64]) -> Result<()> {
    let d = problem.dim();
    for got in [x0.len(), cfg.d.dim(), cfg.sketch.dim()] {
        if got != d {
            return Err(Error::dim(d, got));
        }
    }
    Ok(())
}

/// State at x⁰ and the floats sent to build it.
pub fn init(problem: &Problem, cfg: &AlgoConfig, x0: &[f64]) -> Result<(AlgoState, u64)> {
    check_start(problem, cfg, x0)?;
    let n = problem.n_clients();
    let full = (n * problem.dim()) as u64;
    let grads = problem.client_grads(x0, cfg.parallel)?;
    let mut state =
        AlgoState { x: x0.to_vec(), g: Vec::new(), grads, g_i: Vec::new(), iteration: 0, seed: cfg.seed };
    let floats = match cfg.method {
        Method::DetMarina | Method::Marina => {
            state.g = state.full_grad();
            full
        }
        Method::DetDasha | Method::Dasha => {
            state.g_i = state.grads.clone();
            state.g = mean_vectors(&state.g_i);
            full
        }
        Method::DetCgd | Method::Dcgd => {
            state.g = state.full_grad();
            0
        }
        Method::DetCgd2Vr => {
            let scaled: Vec<Vec<f64>> = state.grads.iter().map(|gi| cfg.d.mul_vec(gi)).collect();
            state.g = mean_vectors(&scaled);
            full
        }
    };
    Ok((state, floats))
}

/// x^{k+1} = x^k − D g^k; shared coin; heads: g_i = ∇f_i(x^{k+1}),
/// tails: g_i = g^k + S_i^k(∇f_i(x^{k+1}) − ∇f_i(x^k)); g = mean g_i.
pub fn step_det_marina(
    state: &mut AlgoState,
    d: &SymmetricMatrix,
    p: f64,
    problem: &Problem,
    sketch: &SketchDistribution,
    parallel: bool,
) -> Result<StepInfo> {
    let k = state.iteration;
    let coin = server_coin(state.seed, k, p);
    let step = d.mul_vec(&state.g);
    let x_next = sub(&state.x, &step);
    let grads_next = problem.client_grads(&x_next, parallel)?;
    let n = problem.n_clients();
    let (g_next, floats) = if coin {
        (mean_vectors(&grads_next), (n * problem.dim()) as u64)
    } else {
        let seed = state.seed;
        let msgs = per_client(n, parallel, |i| {
            Ok(client_sketch(sketch, seed, i, k, &sub(&grads_next[i], &state.grads[i])))
        })?;
        let g_i: Vec<Vec<f64>> = msgs
            .iter()
            .map(|m| {
                let mut gi = state.g.clone();
                m.add_into(&mut gi, 1.0);
                gi
            })
            .collect();
        (mean_vectors(&g_i), msgs.iter().map(|m| m.nnz() as u64).sum())
    };
    state.x = x_next;
    state.g = g_next;
    state.grads = grads_next;
    state.iteration += 1;
    Ok(StepInfo { coin: Some(coin), floats })
}

/// x^{k+1} = x^k − D g^k; h_i = ∇f_i(x^{k+1});
/// m_i = S_i^k(h_i^{k+1} − h_i^k − a(g_i^k − h_i^k)); g_i += m_i; g += mean m_i.
pub fn step_det_dasha(
    state: &mut AlgoState,
    d: &SymmetricMatrix,
    a: f64,
    problem: &Problem,
    sketch: &SketchDistribution,
    parallel: bool,
) -> Result<StepInfo> {
    let k = state.iteration;
    let seed = state.seed;
    let step = d.mul_vec(&state.g);
    let x_next = sub(&state.x, &step);
    let h_next = problem.client_grads(&x_next, parallel)?;
    let n = problem.n_clients();
    let msgs = per_client(n, parallel, |i| {
        let (h, gi) = (&state.grads[i], &state.g_i[i]);
        let v: Vec<f64> = (0..h.len()).map(|j| h_next[i][j] - h[j] - a * (gi[j] - h[j])).collect();
        Ok(client_sketch(sketch, seed, i, k, &v))
    })?;
    let mut total = vec![0.0; problem.dim()];
    for (gi, m) in state.g_i.iter_mut().zip(&msgs) {
        m.add_into(gi, 1.0);
        m.add_into(&mut total, 1.0);
    }
    axpy(&mut state.g, 1.0 / n as f64, &total);
    state.x = x_next;
    state.grads = h_next;
    state.iteration += 1;
    Ok(StepInfo { coin: None, floats: msgs.iter().map(|m| m.nnz() as u64).sum() })
}

/// g^k = mean S_i^k ∇f_i(x^k); x^{k+1} = x^k − D g^k.
pub fn step_det_cgd(
    state: &mut AlgoState,
    d: &SymmetricMatrix,
    problem: &Problem,
    sketch: &SketchDistribution,
    parallel: bool,
) -> Result<StepInfo> {
    let k = state.iteration;
    let seed = state.seed;
    let n = problem.n_clients();
    let msgs = per_client(n, parallel, |i| Ok(client_sketch(sketch, seed, i, k, &state.grads[i])))?;
    let mut g = vec![0.0; problem.dim()];
    for m in &msgs {
        m.add_into(&mut g, 1.0);
    }
    for v in &mut g {
        *v /= n as f64;
    }
    let step = d.mul_vec(&g);
    state.x = sub(&state.x, &step);
    state.g = g;
    state.grads = problem.client_grads(&state.x, parallel)?;
    state.iteration += 1;
    Ok(StepInfo { coin: None, floats: msgs.iter().map(|m| m.nnz() as u64).sum() })
}

/// x^{k+1} = x^k − g^k; heads: g_i = D∇f_i(x^{k+1}),
/// tails: g_i = g^k + T_i^k D(∇f_i(x^{k+1}) − ∇f_i(x^k)).
pub fn step_det_cgd2_vr(
    state: &mut AlgoState,
    d: &SymmetricMatrix,
    p: f64,
    problem: &Problem,
    sketch: &SketchDistribution,
    parallel: bool,
) -> Result<StepInfo> {
    let k = state.iteration;
    let seed = state.seed;
    let coin = server_coin(seed, k, p);
    let x_next = sub(&state.x, &state.g);
    let grads_next = problem.client_grads(&x_next, parallel)?;
    let n = problem.n_clients();
    let (g_next, floats) = if coin {
        let scaled: Vec<Vec<f64>> = grads_next.iter().map(|gi| d.mul_vec(gi)).collect();
        (mean_vectors(&scaled), (n * problem.dim()) as u64)
    } else {
        let msgs = per_client(n, parallel, |i| {
            let diff = d.mul_vec(&sub(&grads_next[i], &state.grads[i]));
            Ok(client_sketch(sketch, seed, i, k, &diff))
        })?;
        let g_i: Vec<Vec<f64>> = msgs
            .iter()
            .map(|m| {
                let mut gi = state.g.clone();
                m.add_into(&mut gi, 1.0);
                gi
            })
            .collect();
        (mean_vectors(&g_i), msgs.iter().map(|m| m.nnz() as u64).sum())
    };
    state.x = x_next;
    state.g = g_next;
    state.grads = grads_next;
    state.iteration += 1;
    Ok(StepInfo { coin: Some(coin), floats })
}

pub fn step(state: &mut AlgoState, cfg: &AlgoConfig, problem: &Problem) -> Result<StepInfo> {
    let (d, s, par) = (&cfg.d, &cfg.sketch, cfg.parallel);
    match cfg.method {
        Method::DetMarina | Method::Marina => step_det_marina(state, d, cfg.probability()?, problem, s, par),
        Method::DetDasha | Method::Dasha => step_det_dasha(state, d, cfg.momentum()?, problem, s, par),
        Method::DetCgd | Method::Dcgd => step_det_cgd(state, d, problem, s, par),
        Method::DetCgd2Vr => step_det_cgd2_vr(state, d, cfg.probability()?, problem, s, par),
    }
}

/// One observation per iterate x^0..x^K. `floats_cum` counts everything sent
/// up to and including the step that produced this iterate.
pub struct Observation<'a> {
    pub state: &'a AlgoState,
    pub info: Option<StepInfo>,
    pub floats_cum: u64,
}

/// Runs K steps, calling `observe` at x^0 and after every step.
pub fn run<F>(problem: &Problem, cfg: &AlgoConfig, x0: &[f64], iterations: usize, mut observe: F) -> Result<AlgoState>
where
    F: FnMut(Observation<'_>) -> Result<()>,
{
    let (mut state, mut floats) = init(problem, cfg, x0)?;
    observe(Observation { state: &state, info: None, floats_cum: floats })?;
    for _ in 0..iterations {
        let info = step(&mut state, cfg, problem)?;
        floats += info.floats;
        observe(Observation { state: &state, info: Some(info), floats_cum: floats })?;
    }
    Ok(state)
}
