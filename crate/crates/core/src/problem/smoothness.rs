use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;

/// Hessian upper bounds of the logistic objective.
///
/// `local[i] = (1/m_i) Σ_j a_j a_jᵀ/4 + 2λI` bounds ∇²f_i, and `global` is the
/// pooled bound over all rows of all clients with the 1/Σm_i normalization.
#[derive(Clone, Debug)]
pub struct Smoothness {
    pub local: Vec<SymmetricMatrix>,
    pub global: SymmetricMatrix,
    /// Set when some bound is only PSD (λ = 0 with rank-deficient data).
    pub degenerate: bool,
}

impl Smoothness {
    pub fn compute(clients: &[Dataset], lambda_reg: f64) -> Result<Self> {
        let dim = clients[0].dim();
        let shift = 2.0 * lambda_reg;
        let local = clients
            .iter()
            .map(|c| {
                let rows: Vec<&[f64]> = c.rows().iter().map(|r| r.features.as_slice()).collect();
                let w = if rows.is_empty() { 0.0 } else { 0.25 / rows.len() as f64 };
                SymmetricMatrix::gram(dim, &rows, w, shift)
            })
            .collect::<Result<Vec<_>>>()?;
        let all: Vec<&[f64]> = clients
            .iter()
            .flat_map(|c| c.rows().iter().map(|r| r.features.as_slice()))
            .collect();
        let w = if all.is_empty() { 0.0 } else { 0.25 / all.len() as f64 };
        let global = SymmetricMatrix::gram(dim, &all, w, shift)?;
        let degenerate = !global.is_positive_definite() || local.iter().any(|l| !l.is_positive_definite());
        Ok(Smoothness { local, global, degenerate })
    }

    /// Scalar constants: (λmax(L), λmax(L_i) per client).
    pub fn scalar_constants(&self) -> (f64, Vec<f64>) {
        (self.global.lambda_max(), self.local.iter().map(SymmetricMatrix::lambda_max).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImplicitVariant {
    /// (1/n) Σ λmax(L⁻¹) λmax(L_i) λmax(L_i L⁻¹) = 1.
    Prop4,
    /// L · λmin(L) = (1/n) Σ λmax(L_i) L_i.
    Dasha,
}

/// A global smoothness matrix implied by the client matrices.
///
/// Both variants return a multiple of M = (1/n) Σ λmax(L_i) L_i. For `Dasha`
/// the multiple is λmin(M)^{-1/2}; for `Prop4` it is found by bisection on
/// log c until the implicit sum equals one.
pub fn global_l_implicit(local: &[SymmetricMatrix], variant: ImplicitVariant) -> Result<SymmetricMatrix> {
    if local.is_empty() {
        return Err(Error::Config("need at least one local smoothness matrix".into()));
    }
    for l in local {
        l.require_pd()?;
    }
    let n = local.len() as f64;
    let terms: Vec<(f64, &SymmetricMatrix)> = local.iter().map(|l| (l.lambda_max() / n, l)).collect();
    let m = SymmetricMatrix::linear_combination(&terms)?;
    m.require_pd()?;

    match variant {
        ImplicitVariant::Dasha => Ok(m.scale(1.0 / m.lambda_min().sqrt())),
        ImplicitVariant::Prop4 => {
            let residual = |log_c: f64| -> Result<f64> { Ok(prop4_sum(local, &m.scale(log_c.exp()))? - 1.0) };
            // the sum is decreasing in c
            let (mut lo, mut hi) = (-1.0, 1.0);
            while residual(lo)? < 0.0 {
                lo *= 2.0;
            }
            while residual(hi)? > 0.0 {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let r = residual(mid)?;
                if r.abs() <= 1e-12 || hi - lo <= 1e-15 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if r > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(m.scale((0.5 * (lo + hi)).exp()))
        }
    }
}

/// (1/n) Σ λmax(L⁻¹) λmax(L_i) λmax(L^{-1/2} L_i L^{-1/2}).
pub(crate) fn prop4_sum(local: &[SymmetricMatrix], global: &SymmetricMatrix) -> Result<f64> {
    let inv_sqrt = global.inv_sqrt()?;
    let lmax_inv = 1.0 / global.lambda_min();
    let mut total = 0.0;
    for l in local {
        total += lmax_inv * l.lambda_max() * inv_sqrt.congruence(l)?.lambda_max();
    }
    Ok(total / local.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Label, Problem, Sample};
    use crate::testutil::random_pd;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn max_diff(a: &SymmetricMatrix, b: &SymmetricMatrix) -> f64 {
        a.entries().iter().zip(b.entries()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn regularizer_only_bounds() {
        let p = Problem::new(vec![Dataset::empty(3), Dataset::empty(3)], 0.5).unwrap();
        let s = p.smoothness();
        assert_eq!(s.global, SymmetricMatrix::identity(3));
        assert!(s.local.iter().all(|l| *l == SymmetricMatrix::identity(3)));
        assert!(!s.degenerate);
    }

    #[test]
    fn single_row_bound_is_psd_flagged() {
        let data = Dataset::new(2, vec![Sample { features: vec![2.0, 0.0], label: Label::Pos }]).unwrap();
        let p = Problem::new(vec![data], 0.0).unwrap();
        let s = p.smoothness();
        assert_eq!(s.local[0].entries(), &[1.0, 0.0, 0.0, 0.0]);
        assert!(s.degenerate);
    }

    #[test]
    fn isotropic_implicit_l_is_identity() {
        let local = vec![SymmetricMatrix::identity(3); 4];
        for v in [ImplicitVariant::Dasha, ImplicitVariant::Prop4] {
            let l = global_l_implicit(&local, v).unwrap();
            assert!(max_diff(&l, &SymmetricMatrix::identity(3)) < 1e-10, "{v:?}");
        }
    }

    #[test]
    fn prop4_scalar_case_matches_quadratic_mean() {
        let scalars = [0.5, 2.0, 3.0];
        let local: Vec<_> = scalars.iter().map(|&c| SymmetricMatrix::scaled_identity(2, c)).collect();
        let l = global_l_implicit(&local, ImplicitVariant::Prop4).unwrap();
        let want = (scalars.iter().map(|c| c * c).sum::<f64>() / 3.0).sqrt();
        assert!((l.get(0, 0) - want).abs() < 1e-9, "{} vs {want}", l.get(0, 0));
        assert!(l.get(0, 1).abs() < 1e-12);
    }

    #[test]
    fn implicit_variants_satisfy_their_relations() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let local: Vec<_> = (0..3).map(|_| random_pd(&mut rng, 4)).collect();
            let n = local.len() as f64;
            let terms: Vec<_> = local.iter().map(|l| (l.lambda_max() / n, l)).collect();
            let m = SymmetricMatrix::linear_combination(&terms).unwrap();

            let dasha = global_l_implicit(&local, ImplicitVariant::Dasha).unwrap();
            assert!(max_diff(&dasha.scale(dasha.lambda_min()), &m) <= 1e-8 * m.max_abs().max(1.0));

            let prop4 = global_l_implicit(&local, ImplicitVariant::Prop4).unwrap();
            assert!((prop4_sum(&local, &prop4).unwrap() - 1.0).abs() <= 1e-10);
            // closed form: the sum scales as 1/c², so c = sqrt(sum at c = 1)
            let c = prop4_sum(&local, &m).unwrap().sqrt();
            assert!(max_diff(&prop4, &m.scale(c)) <= 1e-8 * m.max_abs() * c);
        }
    }

    #[test]
    fn implicit_rejects_non_pd() {
        let local = vec![SymmetricMatrix::diagonal(&[1.0, 0.0])];
        assert!(matches!(
            global_l_implicit(&local, ImplicitVariant::Dasha),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }
}
