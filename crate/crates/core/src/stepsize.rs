//! Stepsize rules and admissibility conditions.
//!
//! Matrix stepsizes are searched in the form D = γ·W for a fixed structure W.
//! For every method the matrix condition collapses to a scalar quadratic
//! a·γ² + γ − λ_W ≤ 0 with λ_W = 1/λmax(W^{1/2} L W^{1/2}); the returned γ is
//! its positive root 2λ_W / (1 + √(1 + 4aλ_W)).

use serde::{Deserialize, Serialize};

use crate::compression::SketchDistribution;
use crate::error::{Error, Result};
use crate::linalg::{inv_psd, psd_geq, SymmetricMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DetMarina,
    DetDasha,
    DetCgd,
    DetCgd2Vr,
    Marina,
    Dasha,
    Dcgd,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::DetMarina,
        Method::DetDasha,
        Method::DetCgd,
        Method::DetCgd2Vr,
        Method::Marina,
        Method::Dasha,
        Method::Dcgd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::DetMarina => "det_marina",
            Method::DetDasha => "det_dasha",
            Method::DetCgd => "det_cgd",
            Method::DetCgd2Vr => "det_cgd2_vr",
            Method::Marina => "marina",
            Method::Dasha => "dasha",
            Method::Dcgd => "dcgd",
        }
    }

    /// Methods with a shared Bernoulli(p) synchronization coin.
    pub fn uses_coin(self) -> bool {
        matches!(self, Method::DetMarina | Method::DetCgd2Vr | Method::Marina)
    }

    pub fn is_scalar(self) -> bool {
        matches!(self, Method::Marina | Method::Dasha | Method::Dcgd)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Structure matrix of a matrix stepsize.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WKind {
    Identity,
    DiagInv,
    #[default]
    LInv,
}

pub fn build_w(kind: WKind, l: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    match kind {
        WKind::Identity => Ok(SymmetricMatrix::identity(l.dim())),
        WKind::DiagInv => {
            let diag: Vec<f64> = (0..l.dim()).map(|i| l.get(i, i)).collect();
            if let Some(&bad) = diag.iter().find(|&&v| v <= 0.0) {
                return Err(Error::NotPositiveDefinite { lambda_min: bad });
            }
            Ok(SymmetricMatrix::diagonal(&diag.iter().map(|v| 1.0 / v).collect::<Vec<_>>()))
        }
        WKind::LInv => inv_psd(l),
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}

fn check_dims(w: &SymmetricMatrix, l: &SymmetricMatrix, local: &[SymmetricMatrix], s: &SketchDistribution) -> Result<()> {
    if local.is_empty() {
        return Err(Error::Config("need at least one client smoothness matrix".into()));
    }
    for m in std::iter::once(w).chain(local) {
        if m.dim() != l.dim() {
            return Err(Error::dim(l.dim(), m.dim()));
        }
    }
    if s.dim() != l.dim() {
        return Err(Error::dim(l.dim(), s.dim()));
    }
    Ok(())
}

/// Positive root of a·γ² + γ − λ = 0 (λ itself when a = 0).
pub fn quadratic_root(a: f64, lambda: f64) -> f64 {
    2.0 * lambda / (1.0 + (1.0 + 4.0 * a * lambda).sqrt())
}

/// λ_W = 1/λmax(W^{1/2} L W^{1/2}).
pub fn lambda_w(w: &SymmetricMatrix, l: &SymmetricMatrix) -> Result<f64> {
    w.require_pd()?;
    l.require_pd()?;
    Ok(1.0 / w.sqrt_psd()?.congruence(l)?.lambda_max())
}

/// λmax(L^{-1/2} L_i L^{-1/2}) for each client.
fn relative_spectra(l: &SymmetricMatrix, local: &[SymmetricMatrix]) -> Result<Vec<f64>> {
    let inv_sqrt = l.inv_sqrt()?;
    local.iter().map(|li| Ok(inv_sqrt.congruence(li)?.lambda_max())).collect()
}

/// α = (1−p)/(np), β = (1/n) Σ λmax(L_i)·λmax(L⁻¹L_i).
pub fn alpha_beta(p: f64, local: &[SymmetricMatrix], l: &SymmetricMatrix) -> Result<(f64, f64)> {
    check_p(p)?;
    for li in local {
        li.require_pd()?;
    }
    let n = local.len() as f64;
    let rel = relative_spectra(l, local)?;
    let beta = local.iter().zip(&rel).map(|(li, r)| li.lambda_max() * r).sum::<f64>() / n;
    Ok(((1.0 - p) / (n * p), beta))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarinaScaling {
    pub alpha: f64,
    pub beta: f64,
    pub lambda_ws: f64,
    pub lambda_w: f64,
    pub gamma: f64,
}

impl MarinaScaling {
    /// αβΛγ² + γ − λ_W.
    pub fn quadratic(&self, gamma: f64) -> f64 {
        self.alpha * self.beta * self.lambda_ws * gamma * gamma + gamma - self.lambda_w
    }
}

pub fn det_marina_scaling(
    w: &SymmetricMatrix,
    l: &SymmetricMatrix,
    local: &[SymmetricMatrix],
    s: &SketchDistribution,
    p: f64,
) -> Result<MarinaScaling> {
    check_dims(w, l, local, s)?;
    let (alpha, beta) = alpha_beta(p, local, l)?;
    let lambda_ws = s.lambda_ws(w)?;
    let lw = lambda_w(w, l)?;
    let gamma = quadratic_root(alpha * beta * lambda_ws, lw);
    Ok(MarinaScaling { alpha, beta, lambda_ws, lambda_w: lw, gamma })
}

pub fn gamma_det_marina(
    w: &SymmetricMatrix,
    l: &SymmetricMatrix,
    local: &[SymmetricMatrix],
    s: &SketchDistribution,
    p: f64,
) -> Result<f64> {
    Ok(det_marina_scaling(w, l, local, s, p)?.gamma)
}

/// D⁻¹ ⪰ (1 + α·R(D))·L with R(D) = β·λmax(E[SDS] − D).
pub fn check_det_marina(
    d: &SymmetricMatrix,
    l: &SymmetricMatrix,
    local: &[SymmetricMatrix],
    s: &SketchDistribution,
    p: f64,
    tol: f64,
) -> Result<bool> {
    check_dims(d, l, local, s)?;
    let (alpha, beta) = alpha_beta(p, local, l)?;
    let r = beta * s.lambda_ws(d)?;
    psd_geq(&inv_psd(d)?, &l.scale(1.0 + alpha * r), tol)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DashaScaling {
    pub omega_w: f64,
    pub c_w: f64,
    pub lambda_w: f64,
    pub lambda_min_l: f64,
    pub gamma: f64,
    pub momentum: f64,
}

impl DashaScaling {
    /// 4·C_W·λmin(L)·γ² + γ − λ_W.
    pub fn quadratic(&self, gamma: f64) -> f64 {
        4.0 * self.c_w * self.lambda_min_l * gamma * gamma + gamma - self.lambda_w
    }
}

pub fn det_dasha_scaling(
    w: &SymmetricMatrix,
    l: &SymmetricMatrix,
    local: &[SymmetricMatrix],
    s: &SketchDistribution,
) -> Result<DashaScaling> {
    check_dims(w, l, local, s)?;
    let n = local.len() as f64;
    let omega_w = s.omega_w(w)?;
    let c_w = w.lambda_max() * omega_w * (4.0 * omega_w + 1.0) / n;
    let lw = lambda_w(w, l)?;
    let lambda_min_l = l.lambda_min();
    let gamma = quadratic_root(4.0 * c_w * lambda_min_l, lw);
    Ok(DashaScaling { omega_w, c_w, lambda_w: lw, lambda_min_l, gamma, momentum: 1.0 / (2.0 * omega_w + 1.0) })
}

/// Returns (γ, momentum a).
pub fn gamma_det_dasha(
    w: &SymmetricMatrix,
    l: &SymmetricMatrix,
    local: &[SymmetricMatrix],
    s: &SketchDistribution,
) -> Result<(f64, f64)> {
    let sc = det_dasha_scaling(w, l, local, s)?;
    Ok((sc.gamma, sc.momentum))
}

/// D⁻¹ ⪰ L + (4λmax(D)ω_D(4ω_D+1)/n)·(1/n)Σ λmax(L_i)L_i.
pub fn check_det_dasha(
    d: &SymmetricMatrix,
    l: &SymmetricMatrix,
    local: &[SymmetricMatrix],
    s: &SketchDistribution,
    tol: f64,
) -> Result<bool> {
    check_dims(d, l, local, s)?;
    let n = local.len() as f64;
    let omega = s.omega_w(d)?;
    let coef = 4.0 * d.lambda_max() * omega * (4.0 * omega + 1.0) / n;
    let mut terms = vec![(1.0, l)];
    terms.extend(local.iter().map(|li| (coef * li.lambda_max() / n, li)));
    psd_geq(&inv_psd(d)?, &SymmetricMatrix::linear_combination(&terms)?, tol)
}

/// γ1 = 1/(L(1 + √((1−p)ω/(pn)))).
pub fn gamma_marina_scalar(l: f64, omega: f64, p: f64, n: usize) -> Result<f64> {
    check_p(p)?;
    Ok(1.0 / (l * (1.0 + ((1.0 - p) * omega / (p * n as f64)).sqrt())))
}

/// γ2 = min{1/L, √(n/(ωLL_maxK)), nε²/(4LL_maxωΔ*)}; terms with a zero
/// denominator count as +∞.
pub fn gamma_dcgd_scalar(l: f64, l_max: f64, omega: f64, n: usize, k: usize, eps: f64, delta_star: f64) -> f64 {
    let n = n as f64;
    let mut gamma = 1.0 / l;
    if omega > 0.0 {
        gamma = gamma.min((n / (omega * l * l_max * k as f64)).sqrt());
        if delta_star > 0.0 {
            gamma = gamma.min(n * eps * eps / (4.0 * l * l_max * omega * delta_star));
        }
    }
    gamma
}

/// γ4 = 1/(L + √(16ω(2ω+1)/n)·L̂).
pub fn gamma_dasha_scalar(l: f64, l_hat: f64, omega: f64, n: usize) -> f64 {
    1.0 / (l + (16.0 * omega * (2.0 * omega + 1.0) / n as f64).sqrt() * l_hat)
}

/// λ_D = max_i λmax(L_i^{1/2}(E[S M S] − M)L_i^{1/2}) with M = DLD.
pub fn lambda_d(d: &SymmetricMatrix, l: &SymmetricMatrix, local: &[SymmetricMatrix], s: &SketchDistribution) -> Result<f64> {
    check_dims(d, l, local, s)?;
    let m = d.congruence(l)?;
    let excess = s.expected_moment(&m)?.sub(&m)?;
    let mut out: f64 = 0.0;
    for li in local {
        out = out.max(li.sqrt_psd()?.congruence(&excess)?.lambda_max());
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgdCheck {
    pub admissible: bool,
    pub lambda_d: f64,
    /// DLD ⪯ D.
    pub descent: bool,
    /// λ_D ≤ min{n/K, nε²det(D)^{1/d}/(4Δ*)}.
    pub variance: bool,
}

/// Targets of the det-CGD condition: iteration budget, accuracy and Δ*.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgdTarget {
    pub iterations: usize,
    pub eps: f64,
    pub delta_star: f64,
}

impl CgdTarget {
    fn bound(&self, n: usize, det_root: f64) -> f64 {
        let n = n as f64;
        let mut b = n / self.iterations as f64;
        if self.delta_star > 0.0 {
            b = b.min(n * self.eps * self.eps * det_root / (4.0 * self.delta_star));
        }
        b
    }
}

pub fn check_det_cgd(
    d: &SymmetricMatrix,
    l: &SymmetricMatrix,
    local: &[SymmetricMatrix],
    s: &SketchDistribution,
    target: CgdTarget,
    tol: f64,
) -> Result<CgdCheck> {
    let ld = lambda_d(d, l, local, s)?;
    // D ⪰ DLD, checked as D⁻¹ ⪰ L so that tol is in the units of L
    let descent = psd_geq(&inv_psd(d)?, l, tol)?;
    let det_root = (d.log_det()? / d.dim() as f64).exp();
    let bound = target.bound(local.len(), det_root);
    let variance = ld <= bound * (1.0 + 1e-10);
    Ok(CgdCheck { admissible: descent && variance, lambda_d: ld, descent, variance })
}

/// Largest γ with γ·W passing `check_det_cgd`, by bisection.
pub fn gamma_det_cgd(
    w: &SymmetricMatrix,
    l: &SymmetricMatrix,
    local: &[SymmetricMatrix],
    s: &SketchDistribution,
    target: CgdTarget,
    tol: f64,
) -> Result<f64> {
    check_dims(w, l, local, s)?;
    let ok = |g: f64| -> Result<bool> { Ok(check_det_cgd(&w.scale(g), l, local, s, target, tol)?.admissible) };
    // DLD ⪯ D already fails beyond λ_W.
    let mut hi = 2.0 * lambda_w(w, l)?;
    while ok(hi)? {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Closed form of the det-CGD scaling: λ_{γW} = γ²λ_W-term, det(γW)^{1/d} = γ·det(W)^{1/d}.
pub fn gamma_det_cgd_closed_form(
    w: &SymmetricMatrix,
    l: &SymmetricMatrix,
    local: &[SymmetricMatrix],
    s: &SketchDistribution,
    target: CgdTarget,
) -> Result<f64> {
    let l1 = lambda_d(w, l, local, s)?;
    let mut gamma = lambda_w(w, l)?;
    if l1 > 0.0 {
        let n = local.len() as f64;
        gamma = gamma.min((n / (target.iterations as f64 * l1)).sqrt());
        if target.delta_star > 0.0 {
            let det_root = (w.log_det()? / w.dim() as f64).exp();
            gamma = gamma.min(n * target.eps * target.eps * det_root / (4.0 * target.delta_star * l1));
        }
    }
    Ok(gamma)
}

/// R′(D) = (1/n)Σ λmax(L_i^{1/2} D E[TD⁻¹T] D L_i^{1/2} − L_i^{1/2} D L_i^{1/2})·λmax(L^{-1/2}L_iL^{-1/2}).
pub fn r_prime(d: &SymmetricMatrix, l: &SymmetricMatrix, local: &[SymmetricMatrix], s: &SketchDistribution) -> Result<f64> {
    check_dims(d, l, local, s)?;
    let dmd = d.congruence(&s.expected_moment(&inv_psd(d)?)?)?;
    let rel = relative_spectra(l, local)?;
    let mut total = 0.0;
    for (li, r) in local.iter().zip(rel) {
        let h = li.sqrt_psd()?;
        total += h.congruence(&dmd)?.sub(&h.congruence(d)?)?.lambda_max() * r;
    }
    Ok(total / local.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cgd2VrCheck {
    pub admissible: bool,
    pub r_prime: f64,
}

/// D⁻¹ ⪰ (1 + (1−p)R′(D)/(np))·L.
pub fn check_det_cgd2_vr(
    d: &SymmetricMatrix,
    l: &SymmetricMatrix,
    local: &[SymmetricMatrix],
    s: &SketchDistribution,
    p: f64,
    tol: f64,
) -> Result<Cgd2VrCheck> {
    check_p(p)?;
    let rp = r_prime(d, l, local, s)?;
    let alpha = (1.0 - p) / (local.len() as f64 * p);
    let admissible = psd_geq(&inv_psd(d)?, &l.scale(1.0 + alpha * rp), tol)?;
    Ok(Cgd2VrCheck { admissible, r_prime: rp })
}

/// R′ is linear in γ, so the condition on D = γW is α·R′(W)·γ² + γ − λ_W ≤ 0.
/// Returns (γ, R′(W)).
pub fn gamma_det_cgd2_vr(
    w: &SymmetricMatrix,
    l: &SymmetricMatrix,
    local: &[SymmetricMatrix],
    s: &SketchDistribution,
    p: f64,
) -> Result<(f64, f64)> {
    check_p(p)?;
    let rw = r_prime(w, l, local, s)?;
    let alpha = (1.0 - p) / (local.len() as f64 * p);
    Ok((quadratic_root(alpha * rw, lambda_w(w, l)?), rw))
}

/// Floats sent by all clients over K iterations, initialization included.
/// For coin methods this is the expectation over the coins.
pub fn account_floats(method: Method, p: Option<f64>, zeta: usize, d: usize, n: usize, k: usize) -> f64 {
    let (zeta, d, n, k) = (zeta as f64, d as f64, n as f64, k as f64);
    match method {
        Method::DetMarina | Method::DetCgd2Vr | Method::Marina => {
            let p = p.unwrap_or(1.0);
            n * (d + k * (p * d + (1.0 - p) * zeta))
        }
        Method::DetDasha | Method::Dasha => n * (d + k * zeta),
        Method::DetCgd | Method::Dcgd => n * k * zeta,
    }
}

/// Values that justified a stepsize; fields not used by a method stay empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(rename = "Lambda", skip_serializing_if = "Option::is_none")]
    pub lambda_ws: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_prime: Option<f64>,
    /// Scalar upper bound the chosen γ is compared against.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_max: Option<f64>,
    /// Outcome of the full matrix condition where it is only reported.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix_condition: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StepsizeSpec {
    pub method: Method,
    pub w_kind: WKind,
    pub w: SymmetricMatrix,
    pub gamma: f64,
    pub d: SymmetricMatrix,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub momentum: Option<f64>,
    pub certificate: Certificate,
    pub admissible: bool,
}

impl StepsizeSpec {
    pub fn require_admissible(&self) -> Result<()> {
        if self.admissible {
            Ok(())
        } else {
            Err(Error::InadmissibleStepsize {
                method: self.method.to_string(),
                reason: format!("gamma = {:e} fails the condition; certificate {:?}", self.gamma, self.certificate),
            })
        }
    }
}

/// Everything besides the method parameters that a stepsize rule may need.
#[derive(Clone, Copy, Debug)]
pub struct StepsizeContext<'a> {
    pub global: &'a SymmetricMatrix,
    pub local: &'a [SymmetricMatrix],
    pub sketch: &'a SketchDistribution,
    pub target: CgdTarget,
}

impl StepsizeContext<'_> {
    /// 1e−10·λmax(L).
    pub fn tol(&self) -> f64 {
        1e-10 * self.global.lambda_max()
    }
}

/// Method parameters: coin probability, structure, optional γ override.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MethodParams {
    pub method: Method,
    pub p: Option<f64>,
    pub w_kind: WKind,
    pub gamma: Option<f64>,
}

/// Computes the method's stepsize (or checks an explicit γ) and its certificate.
pub fn compute_stepsize(params: MethodParams, ctx: &StepsizeContext<'_>) -> Result<StepsizeSpec> {
    let MethodParams { method, p, gamma: gamma_override, .. } = params;
    let (l, local, s) = (ctx.global, ctx.local, ctx.sketch);
    let tol = ctx.tol();
    let need_p = || -> Result<f64> {
        let p = p.ok_or_else(|| Error::Config(format!("{method} needs a probability p")))?;
        check_p(p)?;
        Ok(p)
    };
    let w_kind = if method.is_scalar() { WKind::Identity } else { params.w_kind };
    let w = build_w(w_kind, l)?;
    let mut cert = Certificate::default();
    let mut momentum = None;
    let n = local.len();
    let scalar_l = l.lambda_max();
    let local_l: Vec<f64> = local.iter().map(SymmetricMatrix::lambda_max).collect();

    let (gamma, admissible) = match method {
        Method::DetMarina => {
            let p = need_p()?;
            let sc = det_marina_scaling(&w, l, local, s, p)?;
            cert.alpha = Some(sc.alpha);
            cert.beta = Some(sc.beta);
            cert.lambda_ws = Some(sc.lambda_ws);
            cert.lambda_w = Some(sc.lambda_w);
            cert.gamma_max = Some(sc.gamma);
            let g = gamma_override.unwrap_or(sc.gamma);
            (g, g > 0.0 && check_det_marina(&w.scale(g), l, local, s, p, tol)?)
        }
        Method::DetDasha => {
            let sc = det_dasha_scaling(&w, l, local, s)?;
            cert.omega_w = Some(sc.omega_w);
            cert.c_w = Some(sc.c_w);
            cert.lambda_w = Some(sc.lambda_w);
            cert.gamma_max = Some(sc.gamma);
            momentum = Some(sc.momentum);
            let g = gamma_override.unwrap_or(sc.gamma);
            cert.matrix_condition = Some(check_det_dasha(&w.scale(g), l, local, s, tol)?);
            (g, g > 0.0 && sc.quadratic(g) <= tol * sc.lambda_w.max(g))
        }
        Method::DetCgd => {
            let g = match gamma_override {
                Some(g) => g,
                None => gamma_det_cgd(&w, l, local, s, ctx.target, tol)?,
            };
            if g <= 0.0 {
                return Err(Error::Config(format!("{method}: gamma must be positive")));
            }
            let chk = check_det_cgd(&w.scale(g), l, local, s, ctx.target, tol)?;
            cert.lambda_d = Some(chk.lambda_d);
            cert.lambda_w = Some(lambda_w(&w, l)?);
            (g, chk.admissible)
        }
        Method::DetCgd2Vr => {
            let p = need_p()?;
            let (root, _) = gamma_det_cgd2_vr(&w, l, local, s, p)?;
            cert.alpha = Some((1.0 - p) / (n as f64 * p));
            cert.lambda_w = Some(lambda_w(&w, l)?);
            cert.gamma_max = Some(root);
            let g = gamma_override.unwrap_or(root);
            if g <= 0.0 {
                return Err(Error::Config(format!("{method}: gamma must be positive")));
            }
            let chk = check_det_cgd2_vr(&w.scale(g), l, local, s, p, tol)?;
            cert.r_prime = Some(chk.r_prime);
            (g, chk.admissible)
        }
        Method::Marina => {
            let p = need_p()?;
            let omega = s.omega();
            let g1 = gamma_marina_scalar(scalar_l, omega, p, n)?;
            cert.omega = Some(omega);
            cert.alpha = Some((1.0 - p) / (n as f64 * p));
            cert.gamma_max = Some(g1);
            let g = gamma_override.unwrap_or(g1);
            (g, g > 0.0 && g <= g1 * (1.0 + 1e-10))
        }
        Method::Dasha => {
            let omega = s.omega();
            let l_hat = (local_l.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
            let g4 = gamma_dasha_scalar(scalar_l, l_hat, omega, n);
            cert.omega = Some(omega);
            cert.gamma_max = Some(g4);
            momentum = Some(1.0 / (2.0 * omega + 1.0));
            let g = gamma_override.unwrap_or(g4);
            (g, g > 0.0 && g <= g4 * (1.0 + 1e-10))
        }
        Method::Dcgd => {
            let omega = s.omega();
            let l_max = local_l.iter().cloned().fold(0.0, f64::max);
            let t = ctx.target;
            let g2 = gamma_dcgd_scalar(scalar_l, l_max, omega, n, t.iterations, t.eps, t.delta_star);
            cert.omega = Some(omega);
            cert.gamma_max = Some(g2);
            let g = gamma_override.unwrap_or(g2);
            (g, g > 0.0 && g <= g2 * (1.0 + 1e-10))
        }
    };
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::Config(format!("{method}: gamma must be positive and finite, got {gamma}")));
    }
    let d = w.scale(gamma);
    Ok(StepsizeSpec {
        method,
        w_kind,
        w,
        gamma,
        d,
        p: if method.uses_coin() { p } else { None },
        momentum,
        certificate: cert,
        admissible,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Prediction {
    pub iterations: f64,
    pub floats: f64,
}

/// K ≥ c·Δ₀/(det(D)^{1/d} ε²) with c = 12 for the non-variance-reduced
/// methods and 2 otherwise; floats from `account_floats` at ⌈K⌉.
pub fn predict_complexity(spec: &StepsizeSpec, delta0: f64, eps: f64, n: usize, zeta: usize) -> Result<Prediction> {
    spec.require_admissible()?;
    let c = match spec.method {
        Method::DetCgd | Method::Dcgd => 12.0,
        _ => 2.0,
    };
    let det_root = (spec.d.log_det()? / spec.d.dim() as f64).exp();
    let iterations = c * delta0 / (det_root * eps * eps);
    let floats = account_floats(spec.method, spec.p, zeta, spec.d.dim(), n, iterations.ceil() as usize);
    Ok(Prediction { iterations, floats })
}
