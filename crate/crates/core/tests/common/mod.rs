#![allow(dead_code)]

use detvr::linalg::SymmetricMatrix;
use detvr::problem::{partition, PartitionScheme, Problem, SyntheticSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_sym<R: Rng>(rng: &mut R, n: usize) -> SymmetricMatrix {
    SymmetricMatrix::from_fn(n, |_, _| rng.random_range(-1.0..1.0)).unwrap()
}

/// B Bᵀ + shift·I with uniform B.
pub fn random_pd_shift<R: Rng>(rng: &mut R, n: usize, shift: f64) -> SymmetricMatrix {
    let b: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    SymmetricMatrix::from_fn(n, |i, j| {
        (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum::<f64>() + if i == j { shift } else { 0.0 }
    })
    .unwrap()
}

pub fn random_pd<R: Rng>(rng: &mut R, n: usize) -> SymmetricMatrix {
    random_pd_shift(rng, n, 0.1)
}

pub fn random_problem(dim: usize, clients: usize, rows_per_client: usize, lambda: f64, seed: u64) -> Problem {
    let data = SyntheticSpec::new(clients * rows_per_client, dim, seed).generate();
    let shards = partition(&data, clients, PartitionScheme::Contiguous).unwrap();
    Problem::new(shards, lambda).unwrap()
}

pub fn random_point<R: Rng>(rng: &mut R, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Dense matrix product of two symmetric matrices (not symmetric in general).
pub fn matmul(a: &SymmetricMatrix, b: &SymmetricMatrix) -> Vec<f64> {
    let n = a.dim();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = (0..n).map(|k| a.get(i, k) * b.get(k, j)).sum();
        }
    }
    out
}

/// All τ-subsets of 0..d in lexicographic order.
pub fn subsets(d: usize, tau: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, d: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..=d - left {
            cur.push(i);
            rec(i + 1, d, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, d, tau, &mut Vec::new(), &mut out);
    out
}

/// E[S W S] for Rand-τ by averaging over every τ-subset.
pub fn moment_by_enumeration(w: &SymmetricMatrix, tau: usize) -> SymmetricMatrix {
    let d = w.dim();
    let all = subsets(d, tau);
    let scale = d as f64 / tau as f64;
    let mut acc = vec![0.0; d * d];
    for s in &all {
        for &i in s {
            for &j in s {
                acc[i * d + j] += scale * scale * w.get(i, j);
            }
        }
    }
    let count = all.len() as f64;
    SymmetricMatrix::new(d, acc.into_iter().map(|v| v / count).collect()).unwrap()
}

pub fn max_abs_diff(a: &SymmetricMatrix, b: &SymmetricMatrix) -> f64 {
    a.entries().iter().zip(b.entries()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Random heterogeneous client matrices and the global L of the requested implicit relation.
pub fn implicit_instance<R: Rng>(
    rng: &mut R,
    d: usize,
    n: usize,
    variant: detvr::problem::ImplicitVariant,
) -> (Vec<SymmetricMatrix>, SymmetricMatrix) {
    let local: Vec<SymmetricMatrix> = (0..n)
        .map(|_| {
            let scale = rng.random_range(0.2..5.0);
            random_pd_shift(rng, d, 0.05).scale(scale)
        })
        .collect();
    let l = detvr::problem::global_l_implicit(&local, variant).unwrap();
    (local, l)
}

/// Plain scalar MARINA written from its definition; returns x^0..x^K.
pub fn scalar_marina_oracle(
    problem: &Problem,
    gamma: f64,
    p: f64,
    sketch: &detvr::compression::SketchDistribution,
    seed: u64,
    x0: &[f64],
    iterations: usize,
) -> Vec<Vec<f64>> {
    use detvr::compression::{stream_rng, SERVER_STREAM};
    let n = problem.n_clients();
    let d = problem.dim();
    let mut x = x0.to_vec();
    let mut grads: Vec<Vec<f64>> = (0..n).map(|i| problem.grad(i, &x).unwrap()).collect();
    let mut g = vec![0.0; d];
    for gi in &grads {
        for j in 0..d {
            g[j] += gi[j] / n as f64;
        }
    }
    let mut out = vec![x.clone()];
    for k in 0..iterations {
        let heads = stream_rng(seed, SERVER_STREAM, k as u64).random_bool(p);
        for j in 0..d {
            x[j] -= gamma * g[j];
        }
        let next: Vec<Vec<f64>> = (0..n).map(|i| problem.grad(i, &x).unwrap()).collect();
        let mut g_next = vec![0.0; d];
        for i in 0..n {
            let gi = if heads {
                next[i].clone()
            } else {
                let diff: Vec<f64> = (0..d).map(|j| next[i][j] - grads[i][j]).collect();
                let q = sketch.sample(&mut stream_rng(seed, i as u64, k as u64)).apply(&diff).to_dense();
                (0..d).map(|j| g[j] + q[j]).collect()
            };
            for j in 0..d {
                g_next[j] += gi[j] / n as f64;
            }
        }
        g = g_next;
        grads = next;
        out.push(x.clone());
    }
    out
}

/// Plain scalar DASHA (MVR variant) written from its definition; returns x^0..x^K.
pub fn scalar_dasha_oracle(
    problem: &Problem,
    gamma: f64,
    a: f64,
    sketch: &detvr::compression::SketchDistribution,
    seed: u64,
    x0: &[f64],
    iterations: usize,
) -> Vec<Vec<f64>> {
    use detvr::compression::stream_rng;
    let n = problem.n_clients();
    let d = problem.dim();
    let mut x = x0.to_vec();
    let mut h: Vec<Vec<f64>> = (0..n).map(|i| problem.grad(i, &x).unwrap()).collect();
    let mut gi = h.clone();
    let mut g = vec![0.0; d];
    for v in &gi {
        for j in 0..d {
            g[j] += v[j] / n as f64;
        }
    }
    let mut out = vec![x.clone()];
    for k in 0..iterations {
        for j in 0..d {
            x[j] -= gamma * g[j];
        }
        let h_next: Vec<Vec<f64>> = (0..n).map(|i| problem.grad(i, &x).unwrap()).collect();
        let mut m_sum = vec![0.0; d];
        for i in 0..n {
            let v: Vec<f64> = (0..d).map(|j| h_next[i][j] - h[i][j] - a * (gi[i][j] - h[i][j])).collect();
            let m = sketch.sample(&mut stream_rng(seed, i as u64, k as u64)).apply(&v).to_dense();
            for j in 0..d {
                gi[i][j] += m[j];
                m_sum[j] += m[j];
            }
        }
        for j in 0..d {
            g[j] += m_sum[j] / n as f64;
        }
        h = h_next;
        out.push(x.clone());
    }
    out
}

/// Iterates x^0..x^K of a library run.
pub fn library_iterates(problem: &Problem, cfg: &detvr::algorithms::AlgoConfig, x0: &[f64], iterations: usize) -> Vec<Vec<f64>> {
    let mut xs = Vec::new();
    detvr::algorithms::run(problem, cfg, x0, iterations, |o| {
        xs.push(o.state.x.clone());
        Ok(())
    })
    .unwrap();
    xs
}

pub fn max_iterate_gap(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).flat_map(|(u, v)| u.iter().zip(v).map(|(p, q)| (p - q).abs())).fold(0.0, f64::max)
}
