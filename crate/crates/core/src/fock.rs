//! Truncated ladder representation in `|n⟩₁` coordinates.
//!
//! Because `₂⟨m|n⟩₁ = δ_mn`, the Q inner product is the plain Euclidean dot
//! product on these coefficients and the Q-adjoint of an operator is its
//! conjugate transpose.

use nalgebra::{DMatrix, DVector};

use crate::params::{derived, ModelParams};
use crate::{Error, Result, C64};

type CMat = DMatrix<C64>;

/// Largest entry modulus of a complex matrix or vector.
pub trait MaxAbs {
    fn max_abs(&self) -> f64;
}

impl<R, C, S> MaxAbs for nalgebra::Matrix<C64, R, C, S>
where
    R: nalgebra::Dim,
    C: nalgebra::Dim,
    S: nalgebra::RawStorage<C64, R, C>,
{
    fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }
}

/// Coefficients `a_n` of a state in the `|n⟩₁` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVec(pub DVector<C64>);

impl StateVec {
    pub fn from_vec(v: Vec<C64>) -> Self {
        StateVec(DVector::from_vec(v))
    }

    /// Unit vector `|n⟩₁` in an `len`-dimensional truncation.
    pub fn basis(len: usize, n: usize) -> Self {
        let mut v = DVector::zeros(len);
        v[n] = C64::new(1.0, 0.0);
        StateVec(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coeffs(&self) -> &DVector<C64> {
        &self.0
    }

    /// Q-norm, equal to the Euclidean norm here.
    pub fn q_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// `Σ conj(uₙ) vₙ`.
pub fn q_inner(u: &StateVec, v: &StateVec) -> Result<C64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch { left: u.len(), right: v.len() });
    }
    Ok(u.0.dotc(&v.0))
}

/// `f(n) = e^{−|λ|²/2} λⁿ / √n!`, for `n < n_max`.
///
/// Logs a warning when `|f(n_max − 1)|` exceeds `1e−12`; see
/// [`coherent_tail`].
pub fn coherent_coeffs(lambda: C64, n_max: usize) -> StateVec {
    let mut v = Vec::with_capacity(n_max);
    let mut f = C64::new((-0.5 * lambda.norm_sqr()).exp(), 0.0);
    for n in 0..n_max {
        if n > 0 {
            f *= lambda / (n as f64).sqrt();
        }
        v.push(f);
    }
    let tail = v.last().map_or(0.0, |c| c.norm());
    if tail > 1e-12 {
        log::warn!("coherent state λ = {lambda} truncated at N = {n_max} with tail |f(N−1)| = {tail:.3e}");
    }
    StateVec::from_vec(v)
}

/// `|f(n_max − 1)|`, the magnitude of the last kept coherent coefficient.
pub fn coherent_tail(lambda: C64, n_max: usize) -> f64 {
    if n_max == 0 {
        return 0.0;
    }
    let k = (n_max - 1) as f64;
    let log = -0.5 * lambda.norm_sqr() + k * lambda.norm().ln() - 0.5 * ln_factorial(n_max - 1);
    if lambda.norm() == 0.0 {
        return if n_max == 1 { 1.0 } else { 0.0 };
    }
    log.exp()
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Dense operator matrices of the oscillator in `|n⟩₁` coordinates.
#[derive(Debug, Clone)]
pub struct FockRep {
    pub n_max: usize,
    pub params: ModelParams,
    /// Lowering operator `â₁`.
    pub a: CMat,
    /// Raising operator `â₂†`.
    pub r: CMat,
    pub number: CMat,
    pub h: CMat,
    pub h_dag: CMat,
    pub q_new: CMat,
    pub p_new: CMat,
    pub q_q: CMat,
    pub p_q: CMat,
    pub h_qh: CMat,
    pub h_qa: CMat,
}

impl FockRep {
    pub fn build(params: &ModelParams, n_max: usize) -> Result<Self> {
        if n_max < 2 {
            return Err(Error::InvalidInput(format!("truncation must be ≥ 2, got {n_max}")));
        }
        params.require_normalizable()?;
        let n = n_max;
        let hbar = params.hbar();
        let omega = params.omega();
        let mw = params.momega();
        let r_mw = params.r();
        let half_theta = C64::from_polar(1.0, params.theta() / 2.0);

        let a =
            CMat::from_fn(n, n, |i, j| if j == i + 1 { C64::new((j as f64).sqrt(), 0.0) } else { C64::new(0.0, 0.0) });
        let r = a.transpose();
        let number = CMat::from_diagonal(&DVector::from_fn(n, |i, _| C64::new(i as f64, 0.0)));
        let level = |w: C64| CMat::from_diagonal(&DVector::from_fn(n, |i, _| hbar * w * (i as f64 + 0.5)));
        let h = level(omega);
        let h_dag = level(omega.conj());

        let sum = &a + &r;
        let diff = &a - &r;
        let i = C64::i();
        let q_new = &sum * (C64::new(hbar, 0.0) / (2.0 * mw)).sqrt();
        let p_new = &diff * (-i * (hbar * mw / 2.0).sqrt());
        // e^{iθ/2}√(ħ/2mω) = √(ħ/2r) once |θ| < π/2
        let q_q = &sum * C64::new((hbar / (2.0 * r_mw)).sqrt(), 0.0);
        let p_q = &diff * (-i * (hbar * r_mw / 2.0).sqrt());
        debug_assert!((&q_new * half_theta - &q_q).max_abs() < 1e-12 * (1.0 + q_q.max_abs()));

        let h_qh = (&h + &h_dag) * C64::new(0.5, 0.0);
        let h_qa = (&h - &h_dag) * C64::new(0.5, 0.0);
        Ok(FockRep { n_max, params: *params, a, r, number, h, h_dag, q_new, p_new, q_q, p_q, h_qh, h_qa })
    }
}

fn max_abs_block(m: &CMat, k: usize) -> f64 {
    m.view((0, 0), (k, k)).max_abs()
}

fn commutator(x: &CMat, y: &CMat) -> CMat {
    x * y - y * x
}

fn commutator_residuals(rep: &FockRep) -> (CMat, CMat) {
    let n = rep.n_max;
    let id = CMat::identity(n, n);
    let ladder = commutator(&rep.a, &rep.r) - &id;
    let canon = commutator(&rep.q_q, &rep.p_q) - id * C64::new(0.0, rep.params.hbar());
    (ladder, canon)
}

/// Max-norm of `[A, R] − 1` and `[q̂_Q, p̂_Q] − iħ` over the leading
/// `(N−1)×(N−1)` block; the last row and column hold the truncation defect.
pub fn commutator_defect(rep: &FockRep) -> f64 {
    let (l, c) = commutator_residuals(rep);
    let k = rep.n_max - 1;
    max_abs_block(&l, k).max(max_abs_block(&c, k))
}

/// Same as [`commutator_defect`] over the whole matrix. The corner entry makes
/// this `N·max(1, ħ)`.
pub fn commutator_defect_full(rep: &FockRep) -> f64 {
    let (l, c) = commutator_residuals(rep);
    l.max_abs().max(c.max_abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitDefect {
    pub h_defect: f64,
    pub a_defect: f64,
    pub tan_defect: f64,
}

/// Compares the Q-Hermitian and anti-Q-Hermitian parts of `Ĥ` with their
/// kinetic-plus-potential forms, over the leading `(N−2)×(N−2)` block.
///
/// The anti-Hermitian form is written with `1/m_a = −sin θ_ω / r_m` so that it
/// stays finite when `sin θ_ω = 0`.
pub fn qh_split_defect(rep: &FockRep) -> Result<SplitDefect> {
    let p = &rep.params;
    let d = derived(p)?;
    let tw = p.theta_omega();
    let (r_m, r_w) = (p.r_m(), p.r_omega());
    let p2 = &rep.p_q * &rep.p_q;
    let q2 = &rep.q_q * &rep.q_q;

    let h_form = &p2 * C64::new(0.5 / d.m_h, 0.0) + &q2 * C64::new(0.5 * d.m_h * d.omega_h * d.omega_h, 0.0);
    let inv_2ma = -tw.sin() / (2.0 * r_m);
    let half_ma_wa2 = -0.5 * r_m * r_w * r_w * tw.sin();
    let a_form = (&p2 * C64::new(inv_2ma, 0.0) + &q2 * C64::new(half_ma_wa2, 0.0)) * C64::new(0.0, -1.0);
    let tan_form = &rep.h_qh * C64::new(0.0, tw.tan());

    let k = rep.n_max.saturating_sub(2);
    Ok(SplitDefect {
        h_defect: max_abs_block(&(&rep.h_qh - h_form), k),
        a_defect: max_abs_block(&(&rep.h_qa - a_form), k),
        tan_defect: (&rep.h_qa - tan_form).max_abs(),
    })
}

/// `‖q̂_new† − e^{iθ} q̂_new‖_max` and `‖p̂_new† − e^{−iθ} p̂_new‖_max`.
pub fn conjugation_defect(rep: &FockRep) -> (f64, f64) {
    let ph = C64::from_polar(1.0, rep.params.theta());
    let q = (rep.q_new.adjoint() - &rep.q_new * ph).max_abs();
    let p = (rep.p_new.adjoint() - &rep.p_new * ph.conj()).max_abs();
    (q, p)
}

/// `‖M − M†‖_max`.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).max_abs()
}
