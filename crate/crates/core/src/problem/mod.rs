//! The finite-sum objective f = (1/n) Σ f_i: logistic loss with the nonconvex
//! regularizer λ Σ_t x_t² / (1 + x_t²), split across clients.

mod dataset;
mod libsvm;
mod smoothness;
mod synthetic;

pub use dataset::{partition, Dataset, Label, PartitionScheme, Sample};
pub use libsvm::{parse_libsvm, to_libsvm};
pub use smoothness::{global_l_implicit, ImplicitVariant, Smoothness};
pub use synthetic::SyntheticSpec;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// log(1 + e^t) without overflow.
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// 1 / (1 + e^{−t}).
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug)]
pub struct Problem {
    dim: usize,
    clients: Vec<Dataset>,
    lambda_reg: f64,
    smoothness: Smoothness,
}

impl Problem {
    pub fn new(clients: Vec<Dataset>, lambda_reg: f64) -> Result<Self> {
        let first = clients
            .first()
            .ok_or_else(|| Error::Config("a problem needs at least one client".into()))?;
        let dim = first.dim();
        if dim == 0 {
            return Err(Error::Config("feature dimension must be positive".into()));
        }
        if let Some(bad) = clients.iter().find(|c| c.dim() != dim) {
            return Err(Error::dim(dim, bad.dim()));
        }
        if !(lambda_reg >= 0.0 && lambda_reg.is_finite()) {
            return Err(Error::Config(format!("regularizer must be >= 0, got {lambda_reg}")));
        }
        let smoothness = Smoothness::compute(&clients, lambda_reg)?;
        Ok(Problem { dim, clients, lambda_reg, smoothness })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn clients(&self) -> &[Dataset] {
        &self.clients
    }

    pub fn lambda_reg(&self) -> f64 {
        self.lambda_reg
    }

    pub fn smoothness(&self) -> &Smoothness {
        &self.smoothness
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::dim(self.dim, x.len()));
        }
        Ok(())
    }

    fn regularizer(&self, x: &[f64]) -> f64 {
        self.lambda_reg * x.iter().map(|t| t * t / (1.0 + t * t)).sum::<f64>()
    }

    /// f_i(x).
    pub fn client_loss(&self, client: usize, x: &[f64]) -> Result<f64> {
        self.check_x(x)?;
        let data = self.client(client)?;
        let logistic = if data.is_empty() {
            0.0
        } else {
            data.rows()
                .iter()
                .map(|r| softplus(-r.label.sign() * dot(&r.features, x)))
                .sum::<f64>()
                / data.len() as f64
        };
        Ok(logistic + self.regularizer(x))
    }

    /// f(x) = (1/n) Σ_i f_i(x).
    pub fn loss(&self, x: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for i in 0..self.n_clients() {
            total += self.client_loss(i, x)?;
        }
        Ok(total / self.n_clients() as f64)
    }

    /// ∇f_i(x).
    pub fn grad(&self, client: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let data = self.client(client)?;
        let mut g = vec![0.0; self.dim];
        if !data.is_empty() {
            let inv_m = 1.0 / data.len() as f64;
            for r in data.rows() {
                let b = r.label.sign();
                let coef = -b * sigmoid(-b * dot(&r.features, x)) * inv_m;
                for (gj, aj) in g.iter_mut().zip(&r.features) {
                    *gj += coef * aj;
                }
            }
        }
        for (gj, &t) in g.iter_mut().zip(x) {
            let s = 1.0 + t * t;
            *gj += self.lambda_reg * 2.0 * t / (s * s);
        }
        Ok(g)
    }

    /// All client gradients in client order, optionally evaluated in parallel.
    pub fn client_grads(&self, x: &[f64], parallel: bool) -> Result<Vec<Vec<f64>>> {
        if parallel {
            (0..self.n_clients()).into_par_iter().map(|i| self.grad(i, x)).collect()
        } else {
            (0..self.n_clients()).map(|i| self.grad(i, x)).collect()
        }
    }

    /// ∇f(x) = (1/n) Σ_i ∇f_i(x).
    pub fn full_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(mean_vectors(&self.client_grads(x, false)?))
    }

    fn client(&self, client: usize) -> Result<&Dataset> {
        self.clients
            .get(client)
            .ok_or_else(|| Error::Config(format!("client index {client} out of range")))
    }
}

/// Coordinate-wise mean, summing in slice order.
pub fn mean_vectors(vs: &[Vec<f64>]) -> Vec<f64> {
    let n = vs.len() as f64;
    let mut out = vec![0.0; vs[0].len()];
    for v in vs {
        for (o, x) in out.iter_mut().zip(v) {
            *o += x;
        }
    }
    for o in &mut out {
        *o /= n;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_problem;

    fn single_row(a: Vec<f64>, label: Label, lambda: f64) -> Problem {
        let d = a.len();
        let data = Dataset::new(d, vec![Sample { features: a, label }]).unwrap();
        Problem::new(vec![data], lambda).unwrap()
    }

    #[test]
    fn loss_at_zero_is_log2() {
        let p = random_problem(4, 3, 7, 0.7, 1);
        assert!((p.loss(&[0.0; 4]).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn loss_closed_form_single_row() {
        let p = single_row(vec![1.0, 0.0, 0.0], Label::Pos, 0.0);
        for t in [-30.0f64, -1.0, 0.3, 2.0, 800.0] {
            let want = (1.0 + (-t).exp()).ln();
            let got = p.loss(&[t, 0.0, 0.0]).unwrap();
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1e-300) + 1e-300, "{t}: {got} vs {want}");
        }
        // no overflow for very negative margins
        assert!((p.loss(&[-1000.0, 0.0, 0.0]).unwrap() - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn loss_matches_naive_summation() {
        let p = random_problem(5, 3, 6, 0.4, 9);
        let x = [0.3, -0.2, 1.1, 0.0, -0.7];
        let mut naive = 0.0;
        for data in p.clients() {
            let mut fi = 0.0;
            for r in data.rows() {
                let m: f64 = r.features.iter().zip(&x).map(|(a, b)| a * b).sum();
                fi += (1.0 + (-r.label.sign() * m).exp()).ln();
            }
            fi /= data.len() as f64;
            fi += 0.4 * x.iter().map(|t| t * t / (1.0 + t * t)).sum::<f64>();
            naive += fi;
        }
        naive /= p.n_clients() as f64;
        let got = p.loss(&x).unwrap();
        assert!((got - naive).abs() <= 1e-12 * naive);
    }

    #[test]
    fn grad_at_zero_single_row() {
        let p = single_row(vec![2.0, -1.0], Label::Neg, 0.0);
        assert_eq!(p.grad(0, &[0.0, 0.0]).unwrap(), vec![1.0, -0.5]);
    }

    #[test]
    fn grad_regularizer_only() {
        let p = Problem::new(vec![Dataset::empty(2)], 1.0).unwrap();
        assert_eq!(p.grad(0, &[1.0, 0.0]).unwrap(), vec![0.5, 0.0]);
    }

    #[test]
    fn full_grad_is_client_mean() {
        let p = random_problem(6, 4, 5, 0.3, 3);
        let x = [0.1, 0.2, -0.3, 0.4, -0.5, 0.6];
        let full = p.full_grad(&x).unwrap();
        let mut manual = vec![0.0; 6];
        for i in 0..4 {
            for (m, g) in manual.iter_mut().zip(p.grad(i, &x).unwrap()) {
                *m += g / 4.0;
            }
        }
        for (a, b) in full.iter().zip(&manual) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert_eq!(p.client_grads(&x, true).unwrap(), p.client_grads(&x, false).unwrap());
    }

    #[test]
    fn dimension_errors() {
        let p = random_problem(3, 2, 4, 0.1, 1);
        assert!(matches!(p.loss(&[0.0; 2]), Err(Error::DimError { .. })));
        assert!(matches!(p.grad(0, &[0.0; 4]), Err(Error::DimError { .. })));
        assert!(Problem::new(vec![Dataset::empty(2), Dataset::empty(3)], 0.1).is_err());
        assert!(Problem::new(vec![], 0.1).is_err());
        assert!(Problem::new(vec![Dataset::empty(2)], -1.0).is_err());
    }

    #[test]
    fn softplus_and_sigmoid_stable() {
        assert_eq!(softplus(-1000.0), 0.0);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-16);
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-1000.0) >= 0.0 && sigmoid(1000.0) == 1.0);
    }
}
