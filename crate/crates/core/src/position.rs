//! Position-space wavefunctions of the two bases and the overlap matrices
//! built from them by contour quadrature.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::cfx::{rotated_path, ContourPath};
use crate::fock::MaxAbs;
use crate::params::ModelParams;
use crate::{Error, Result, C64};

/// Which of the two dual bases a wavefunction belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    One,
    Two,
}

/// Physicists' Hermite polynomial `H_n(z)`.
pub fn hermite(n: usize, z: C64) -> C64 {
    let (mut h0, mut h1) = (C64::new(1.0, 0.0), 2.0 * z);
    if n == 0 {
        return h0;
    }
    for k in 1..n {
        let h2 = 2.0 * z * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// Coefficients of `H_n` in ascending powers.
pub fn hermite_coeffs(n: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    if n == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 2.0];
    for k in 1..n {
        let mut next = vec![0.0; k + 2];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += 2.0 * c;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= 2.0 * k as f64 * c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// `H_k(z)/√(2^k k!)` for `k < len`, which stays in range for large `k`.
fn hermite_scaled(len: usize, z: C64) -> Vec<C64> {
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return out;
    }
    out.push(C64::new(1.0, 0.0));
    if len > 1 {
        out.push(2f64.sqrt() * z);
    }
    for k in 1..len.saturating_sub(1) {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * z * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

fn check_validity(params: &ModelParams, n: usize) -> Result<()> {
    let limit = 1.0 / params.eps();
    if n as f64 >= limit {
        return Err(Error::ValidityExceeded { n, limit });
    }
    Ok(())
}

/// `mω` for basis 1 and `m*ω*` for basis 2.
fn basis_momega(basis: Basis, params: &ModelParams) -> C64 {
    match basis {
        Basis::One => params.momega(),
        Basis::Two => params.momega().conj(),
    }
}

/// `ψ_k(q)` for all `k < len` in the ε → 0 limit.
pub fn eigenfunctions(basis: Basis, len: usize, q: C64, params: &ModelParams) -> Result<Vec<C64>> {
    if len > 0 {
        check_validity(params, len - 1)?;
    }
    let mw = basis_momega(basis, params);
    let hbar = params.hbar();
    let x = (mw / hbar).sqrt() * q;
    let pref = (mw / (PI * hbar)).powf(0.25) * (-x * x / 2.0).exp();
    Ok(hermite_scaled(len, x).into_iter().map(|h| pref * h).collect())
}

/// `(mω/πħ)^{1/4} (1/√n!) 2^{−n/2} H_n(√(mω/ħ) q) e^{−mωq²/2ħ}`, with
/// `m*ω*` in place of `mω` for basis 2.
pub fn eigenfunction(basis: Basis, n: usize, q: C64, params: &ModelParams) -> Result<C64> {
    Ok(eigenfunctions(basis, n + 1, q, params)?[n])
}

/// Regulated scales used by the finite-ε states.
struct Regulated {
    c: C64,
    mw1: C64,
    mw2: C64,
}

fn regulated(params: &ModelParams) -> Result<Regulated> {
    let mw = params.momega();
    let (e, ep, hbar) = (params.eps(), params.eps_prime(), params.hbar());
    let re = mw.re;
    if !(re > ep && (e == 0.0 || re < 1.0 / e)) {
        return Err(Error::ConvergenceViolated(format!(
            "need ε′ < Re(mω) < 1/ε, got Re(mω) = {re}, ε = {e}, ε′ = {ep}"
        )));
    }
    let mw1 = (mw - ep) / (1.0 - mw * e);
    let mw2 = (mw + ep) / (1.0 + mw * e);
    if mw1.re <= 0.0 || mw2.re <= 0.0 {
        return Err(Error::ConvergenceViolated(format!("need Re(mω)₁ > 0 and Re(mω)₂ > 0, got {mw1} and {mw2}")));
    }
    let c = (mw * (1.0 - e * ep) / (PI * hbar * (1.0 - mw * mw * e * e))).powf(0.25);
    Ok(Regulated { c, mw1, mw2 })
}

/// Finite-ε ground state: `C e^{−(mω)₁q²/2ħ}` or `C* e^{−(mω)₂* q²/2ħ}`.
pub fn ground_eps(basis: Basis, q: C64, params: &ModelParams) -> Result<C64> {
    let reg = regulated(params)?;
    let hbar = params.hbar();
    Ok(match basis {
        Basis::One => reg.c * (-reg.mw1 * q * q / (2.0 * hbar)).exp(),
        Basis::Two => reg.c.conj() * (-reg.mw2.conj() * q * q / (2.0 * hbar)).exp(),
    })
}

/// `P(q − shift) · exp(−α (q − shift)²/2)` with `P` in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussPoly {
    pub coeffs: Vec<C64>,
    pub gauss_scale: C64,
    pub shift: C64,
}

impl GaussPoly {
    pub fn eval(&self, q: C64) -> C64 {
        let x = q - self.shift;
        let p = self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * x + c);
        p * (-self.gauss_scale * x * x / 2.0).exp()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// `(q − β∂_q)` applied to the represented function, scaled by `factor`.
    fn raise(&mut self, beta: C64, factor: C64) {
        let alpha = self.gauss_scale;
        let mut next = vec![C64::new(0.0, 0.0); self.coeffs.len() + 1];
        for (k, &c) in self.coeffs.iter().enumerate() {
            next[k + 1] += (1.0 + alpha * beta) * c;
            if k > 0 {
                next[k - 1] -= beta * c * k as f64;
            }
        }
        next.iter_mut().for_each(|c| *c *= factor);
        self.coeffs = next;
    }
}

/// Finite-ε excited state `|n⟩₁` or `|n⟩₂` as an exact polynomial times a
/// Gaussian.
pub fn excited_eps(basis: Basis, n: usize, params: &ModelParams) -> Result<GaussPoly> {
    check_validity(params, n)?;
    let reg = regulated(params)?;
    let (hbar, e, ep) = (params.hbar(), params.eps(), params.eps_prime());
    let mw = basis_momega(basis, params);
    let norm = 1.0 / (1.0 - e * ep).sqrt();
    let (k, beta, alpha, c) = match basis {
        Basis::One => ((mw / (2.0 * hbar)).sqrt() * (1.0 + ep / mw) * norm, hbar / reg.mw2, reg.mw1 / hbar, reg.c),
        Basis::Two => (
            (mw / (2.0 * hbar)).sqrt() * (1.0 - ep / mw) * norm,
            hbar / reg.mw1.conj(),
            reg.mw2.conj() / hbar,
            reg.c.conj(),
        ),
    };
    let mut gp = GaussPoly { coeffs: vec![c], gauss_scale: alpha, shift: C64::new(0.0, 0.0) };
    for step in 1..=n {
        gp.raise(beta, k / (step as f64).sqrt());
    }
    Ok(gp)
}

/// Closed-form coherent state
/// `e^{(λ²−|λ|²)/2} (mω/πħ)^{1/4} exp[−(mω/2ħ)(q − λ√(2ħ/mω))²]`, with `m*ω*`
/// for basis 2.
pub fn coherent_wavefunction(basis: Basis, lambda: C64, q: C64, params: &ModelParams) -> Result<C64> {
    let mw = basis_momega(basis, params);
    if mw.re <= 0.0 || !params.normalizable() {
        return Err(Error::NotNormalizable { theta_abs: params.theta().abs() });
    }
    let hbar = params.hbar();
    let centre = lambda * (2.0 * hbar / mw).sqrt();
    let d = q - centre;
    let pref = ((lambda * lambda - lambda.norm_sqr()) / 2.0).exp() * (mw / (PI * hbar)).powf(0.25);
    Ok(pref * (-mw / (2.0 * hbar) * d * d).exp())
}

/// Default node count for overlap quadrature.
pub const GRAM_NODES: usize = 400;

/// Straight contour at angle `−θ/2` on which `mω q²` is real and positive.
pub fn default_cross_path(params: &ModelParams, n_max: usize) -> Result<ContourPath> {
    params.require_normalizable()?;
    let half_width = 12.0 * (params.hbar() * n_max.max(1) as f64 / params.r()).sqrt();
    rotated_path(-params.theta() / 2.0, half_width, gram_nodes(n_max))
}

fn gram_nodes(n_max: usize) -> usize {
    // the half-width grows like √N, the oscillation count like √N too
    GRAM_NODES.max(40 * n_max)
}

/// `₂⟨m|n⟩₁` on the default contour.
pub fn cross_gram(params: &ModelParams, n_max: usize) -> Result<DMatrix<C64>> {
    let path = default_cross_path(params, n_max)?;
    cross_gram_on(params, n_max, &path)
}

/// `₂⟨m|n⟩₁ = ∫ conj(ψ₂ₘ(q̄)) ψ₁ₙ(q) dq` along `path`, the analytic
/// continuation in q of the real-axis integrand.
pub fn cross_gram_on(params: &ModelParams, n_max: usize, path: &ContourPath) -> Result<DMatrix<C64>> {
    params.require_normalizable()?;
    overlap_rows(n_max, path, |q| {
        let one = eigenfunctions(Basis::One, n_max, q, params)?;
        let two = eigenfunctions(Basis::Two, n_max, q.conj(), params)?;
        Ok((two.into_iter().map(|z| z.conj()).collect(), one))
    })
}

/// `Σᵢ wᵢ · left_m(qᵢ) · right_n(qᵢ)` times the path direction, checked for
/// finiteness node by node.
fn overlap_rows<F>(n_max: usize, path: &ContourPath, sample: F) -> Result<DMatrix<C64>>
where
    F: Fn(C64) -> Result<(Vec<C64>, Vec<C64>)>,
{
    let mut out = DMatrix::zeros(n_max, n_max);
    for (index, (&q, &w)) in path.nodes.iter().zip(&path.weights).enumerate() {
        let (left, right) = sample(q)?;
        for (m, l) in left.iter().enumerate() {
            for (n, r) in right.iter().enumerate() {
                let v = l * r;
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(Error::NonFiniteSample { index });
                }
                out[(m, n)] += w * v;
            }
        }
    }
    Ok(out * path.direction)
}

/// Usual-inner-product Gram matrix of `|n⟩₁`, its inverse and the cross
/// overlaps.
#[derive(Debug, Clone)]
pub struct GramMatrices {
    /// `₁⟨m|n⟩₁`, symmetrized.
    pub s: DMatrix<C64>,
    /// `S⁻¹`, which is the Gram matrix of the `|n⟩₂`.
    pub qmat: DMatrix<C64>,
    /// `₂⟨m|n⟩₁`.
    pub cross: DMatrix<C64>,
    /// `‖S − S†‖_max` before symmetrization.
    pub asymmetry: f64,
    /// Ratio of extreme eigenvalues of `S`.
    pub condition: f64,
    pub ill_conditioned: bool,
    /// Smallest eigenvalue of `Qmat`.
    pub qmat_min_eigenvalue: f64,
}

pub const ILL_CONDITIONED: f64 = 1e12;

/// Builds `S` on the real axis, inverts it through a Cholesky factorization
/// and attaches the cross overlaps.
pub fn gram_and_metric(params: &ModelParams, n_max: usize) -> Result<GramMatrices> {
    if params.momega().re <= 0.0 || !params.normalizable() {
        return Err(Error::NotNormalizable { theta_abs: params.theta().abs() });
    }
    if n_max == 0 {
        return Err(Error::InvalidInput("truncation must be positive".into()));
    }
    let cos = params.theta().cos();
    let half_width = 12.0 * (params.hbar() * n_max as f64 / (params.r() * cos)).sqrt();
    let path = rotated_path(0.0, half_width, gram_nodes(n_max))?;
    let raw = overlap_rows(n_max, &path, |q| {
        let one = eigenfunctions(Basis::One, n_max, q, params)?;
        Ok((one.iter().map(|z| z.conj()).collect(), one))
    })?;
    let asymmetry = (&raw - raw.adjoint()).max_abs();
    if asymmetry > 1e-10 {
        log::warn!("Gram matrix asymmetry {asymmetry:.3e} exceeds 1e-10");
    }
    let s = (&raw + raw.adjoint()) * C64::new(0.5, 0.0);

    let eig = SymmetricEigen::new(s.clone()).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let ill_conditioned = condition > ILL_CONDITIONED;
    if ill_conditioned {
        log::warn!("Gram matrix condition number {condition:.3e} exceeds {ILL_CONDITIONED:e}");
    }

    let chol = s.clone().cholesky().ok_or(Error::NotPositiveDefinite("Gram matrix S"))?;
    let inv = chol.inverse();
    let qmat = (&inv + inv.adjoint()) * C64::new(0.5, 0.0);
    let qmat_min_eigenvalue = SymmetricEigen::new(qmat.clone()).eigenvalues.min();

    let cross = cross_gram(params, n_max)?;
    Ok(GramMatrices { s, qmat, cross, asymmetry, condition, ill_conditioned, qmat_min_eigenvalue })
}
