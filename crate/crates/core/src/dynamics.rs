//! Time development of the initial and final states, coherent-state closed
//! forms, and weak values between the two.

use nalgebra::DMatrix;

use crate::fock::{coherent_coeffs, q_inner, FockRep, StateVec};
use crate::params::ModelParams;
use crate::{Error, Result, C64};

/// Smallest `|⟨B|_Q A⟩|` a weak value is divided by.
pub const OVERLAP_GUARD: f64 = 1e-300;

/// Tolerance on the Q-norm of boundary states.
pub const NORM_TOL: f64 = 1e-12;

fn phase_evolve(v: &StateVec, w: C64, dt: f64) -> StateVec {
    let mut out = v.clone();
    for (n, c) in out.0.iter_mut().enumerate() {
        *c *= (-C64::i() * w * ((n as f64 + 0.5) * dt)).exp();
    }
    out
}

/// `aₙ e^{−iω(n+½)dt}` with `dt = t − T_A`.
pub fn evolve_a(a0: &StateVec, dt: f64, params: &ModelParams) -> StateVec {
    phase_evolve(a0, params.omega(), dt)
}

/// `bₙ e^{−iω*(n+½)dt}` with `dt = t − T_B`.
pub fn evolve_b(b0: &StateVec, dt: f64, params: &ModelParams) -> StateVec {
    phase_evolve(b0, params.omega().conj(), dt)
}

/// Which boundary state a coherent parameter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    A,
    B,
}

impl Which {
    fn omega(self, params: &ModelParams) -> C64 {
        match self {
            Which::A => params.omega(),
            Which::B => params.omega().conj(),
        }
    }
}

/// `λ(dt) = λ₀ e^{−iω dt}` for A and `λ₀ e^{−iω* dt}` for B.
pub fn coherent_lambda(lambda0: C64, dt: f64, which: Which, params: &ModelParams) -> C64 {
    lambda0 * (-C64::i() * which.omega(params) * dt).exp()
}

/// Time-developed coherent state as prefactor × coherent coefficients of
/// `λ(dt)`.
pub fn coherent_state_at(lambda0: C64, dt: f64, which: Which, n_max: usize, params: &ModelParams) -> StateVec {
    let w = which.omega(params);
    let pref = (-C64::i() * w * dt / 2.0).exp() * (-lambda0.norm_sqr() * (1.0 - (2.0 * w.im * dt).exp()) / 2.0).exp();
    let mut v = coherent_coeffs(coherent_lambda(lambda0, dt, which, params), n_max);
    v.0 *= pref;
    v
}

/// `⟨B|_Q Ô|A⟩ / ⟨B|_Q A⟩`.
pub fn weak_value(op: &DMatrix<C64>, a: &StateVec, b: &StateVec) -> Result<C64> {
    let amp = q_inner(b, a)?;
    if amp.norm() <= OVERLAP_GUARD {
        return Err(Error::VanishingOverlap { magnitude: amp.norm() });
    }
    if op.nrows() != a.len() || op.ncols() != a.len() {
        return Err(Error::LengthMismatch { left: op.nrows(), right: a.len() });
    }
    let oa = StateVec(op * &a.0);
    Ok(q_inner(b, &oa)? / amp)
}

/// Weak values of `q̂_new` and `p̂_new` between coherent states.
pub fn weak_qp_closed(lambda_a: C64, lambda_b: C64, params: &ModelParams) -> (C64, C64) {
    let mw = params.momega();
    let hbar = params.hbar();
    let q = (C64::new(hbar, 0.0) / (2.0 * mw)).sqrt() * (lambda_a + lambda_b.conj());
    let p = -C64::i() * (hbar * mw / 2.0).sqrt() * (lambda_a - lambda_b.conj());
    (q, p)
}

/// Initial state at `T_A`, final state at `T_B`, and the operators acting on
/// both.
#[derive(Debug, Clone)]
pub struct TwoStateSystem {
    pub a0: StateVec,
    pub b0: StateVec,
    pub t_a: f64,
    pub t_b: f64,
    pub rep: FockRep,
}

impl TwoStateSystem {
    pub fn new(a0: StateVec, b0: StateVec, t_a: f64, t_b: f64, rep: FockRep) -> Result<Self> {
        for v in [&a0, &b0] {
            if v.len() != rep.n_max {
                return Err(Error::LengthMismatch { left: v.len(), right: rep.n_max });
            }
            let norm = v.q_norm();
            if (norm - 1.0).abs() > NORM_TOL {
                return Err(Error::NotNormalized { norm });
            }
        }
        if !(t_a.is_finite() && t_b.is_finite() && t_a <= t_b) {
            return Err(Error::InvalidInput(format!("need finite T_A ≤ T_B, got {t_a} and {t_b}")));
        }
        Ok(Self { a0, b0, t_a, t_b, rep })
    }

    /// Both boundary states coherent, with `λ_A` given at `T_A` and `λ_B` at
    /// `T_B`. Coefficients are renormalized after truncation.
    pub fn coherent(lambda_a: C64, lambda_b: C64, t_a: f64, t_b: f64, rep: FockRep) -> Result<Self> {
        let unit = |l: C64| {
            let mut v = coherent_coeffs(l, rep.n_max);
            let n = v.q_norm();
            v.0 /= C64::new(n, 0.0);
            v
        };
        Self::new(unit(lambda_a), unit(lambda_b), t_a, t_b, rep.clone())
    }

    pub fn params(&self) -> &ModelParams {
        &self.rep.params
    }

    pub fn a_at(&self, t: f64) -> StateVec {
        evolve_a(&self.a0, t - self.t_a, self.params())
    }

    pub fn b_at(&self, t: f64) -> StateVec {
        evolve_b(&self.b0, t - self.t_b, self.params())
    }

    /// `⟨B(t)|_Q A(t)⟩`.
    pub fn amplitude(&self, t: f64) -> C64 {
        self.b_at(t).0.dotc(&self.a_at(t).0)
    }

    /// Amplitude and weak values at `t`; `t` is not restricted to the window.
    pub fn sample(&self, t: f64) -> Result<WeakValueSample> {
        let (a, b) = (self.a_at(t), self.b_at(t));
        let amplitude = q_inner(&b, &a)?;
        let wv = |op: &DMatrix<C64>| weak_value(op, &a, &b);
        Ok(WeakValueSample {
            t,
            q_new: wv(&self.rep.q_new)?,
            p_new: wv(&self.rep.p_new)?,
            q_q: wv(&self.rep.q_q)?,
            p_q: wv(&self.rep.p_q)?,
            h_qh: wv(&self.rep.h_qh)?,
            amplitude,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakValueSample {
    pub t: f64,
    pub q_new: C64,
    pub p_new: C64,
    pub q_q: C64,
    pub p_q: C64,
    pub h_qh: C64,
    pub amplitude: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<WeakValueSample>,
    /// Times whose overlap vanished, with the error raised there.
    pub skipped: Vec<(f64, Error)>,
}

/// Samples the weak values at each time in `[T_A, T_B]`, in the given order.
pub fn trajectory(sys: &TwoStateSystem, times: &[f64]) -> Result<Trajectory> {
    let mut out = Trajectory { samples: Vec::with_capacity(times.len()), skipped: Vec::new() };
    for &t in times {
        if !(t >= sys.t_a && t <= sys.t_b) {
            return Err(Error::TimeOutOfWindow { t, t_a: sys.t_a, t_b: sys.t_b });
        }
        match sys.sample(t) {
            Ok(s) => out.samples.push(s),
            Err(e @ Error::VanishingOverlap { .. }) => out.skipped.push((t, e)),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Central-difference residuals of `d⟨q̂⟩/dt = ⟨p̂⟩/m` and
/// `d⟨p̂⟩/dt = −mω²⟨q̂⟩` for the `new` coordinates.
pub fn ehrenfest_residual(sys: &TwoStateSystem, t: f64, dt_fd: f64) -> Result<(C64, C64)> {
    if !(dt_fd.is_finite() && dt_fd > 0.0) {
        return Err(Error::InvalidInput(format!("finite-difference step must be positive, got {dt_fd}")));
    }
    let p = sys.params();
    let (m, w) = (p.m(), p.omega());
    let lo = sys.sample(t - dt_fd)?;
    let mid = sys.sample(t)?;
    let hi = sys.sample(t + dt_fd)?;
    let dq = (hi.q_new - lo.q_new) / (2.0 * dt_fd);
    let dp = (hi.p_new - lo.p_new) / (2.0 * dt_fd);
    Ok((dq - mid.p_new / m, dp + m * w * w * mid.q_new))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::MaxAbs;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn params(w: C64) -> ModelParams {
        ModelParams::new(c(1.0, 0.0), w, 1.0, 1e-3, 1e-3).unwrap()
    }

    fn random_state(n: usize, seed: u64) -> StateVec {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut v = StateVec::from_vec((0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect());
        let norm = v.q_norm();
        v.0 /= c(norm, 0.0);
        v
    }

    #[test]
    fn evolution_examples() {
        let p = params(c(1.0, -0.1));
        let v = random_state(6, 1);
        assert_eq!(evolve_a(&v, 0.0, &p), v);
        assert_eq!(evolve_b(&v, 0.0, &p), v);
        let e0 = StateVec::basis(6, 0);
        let mag = evolve_a(&e0, 1.0, &p).0[0].norm();
        assert!((mag - (-0.05f64).exp()).abs() < 1e-15);
        let back = evolve_b(&e0, -1.0, &p).0[0].norm();
        assert!(back < 1.0);

        let real = params(c(1.3, 0.0));
        assert!((evolve_a(&v, 2.7, &real).q_norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn coefficient_products_are_stationary() {
        let p = params(C64::from_polar(1.2, -0.4));
        let (a, b) = (random_state(8, 2), random_state(8, 3));
        let (t_a, t_b) = (0.5, 3.0);
        let prods = |t: f64| {
            let (at, bt) = (evolve_a(&a, t - t_a, &p), evolve_b(&b, t - t_b, &p));
            at.0.iter().zip(bt.0.iter()).map(|(x, y)| y.conj() * x).collect::<Vec<_>>()
        };
        let base = prods(0.5);
        for t in [1.1, 2.2, 3.0] {
            for (x, y) in prods(t).iter().zip(&base) {
                assert!((x - y).norm() <= 1e-13 * y.norm().max(1e-300));
            }
        }
    }

    #[test]
    fn lambda_examples() {
        let p = params(c(1.0, 0.0));
        assert!((coherent_lambda(c(1.0, 0.0), FRAC_PI_2, Which::A, &p) - c(0.0, -1.0)).norm() < 1e-15);
        let l0 = c(0.3, 0.7);
        assert_eq!(coherent_lambda(l0, 0.0, Which::B, &p), l0);
        let p = params(c(1.0, -0.1));
        assert!((coherent_lambda(c(1.0, 0.0), 1.0, Which::A, &p).norm() - (-0.1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn coherent_state_two_routes() {
        let p = params(c(1.0, -0.1));
        let l0 = c(1.0, 0.0);
        assert_eq!(coherent_state_at(l0, 0.0, Which::A, 20, &p), coherent_coeffs(l0, 20));
        let routed = evolve_a(&coherent_coeffs(l0, 40), 1.0, &p);
        let closed = coherent_state_at(l0, 1.0, Which::A, 40, &p);
        assert!((routed.0 - closed.0).max_abs() < 1e-10);
        let routed = evolve_b(&coherent_coeffs(l0, 40), -1.3, &p);
        let closed = coherent_state_at(l0, -1.3, Which::B, 40, &p);
        assert!((routed.0 - closed.0).max_abs() < 1e-10);

        let real = params(c(0.8, 0.0));
        let v = coherent_state_at(c(0.6, 0.2), 2.0, Which::A, 40, &real);
        assert!((v.q_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weak_value_examples() {
        let p = params(C64::from_polar(1.0, -FRAC_PI_6));
        let rep = FockRep::build(&p, 10).unwrap();
        let e0 = StateVec::basis(10, 0);
        let v = weak_value(&rep.h, &e0, &e0).unwrap();
        assert!((v - p.omega() * 0.5).norm() < 1e-15);

        let a = random_state(10, 7);
        let v = weak_value(&rep.q_q, &a, &a).unwrap();
        assert!(v.im.abs() <= 1e-13 * v.norm());

        let e1 = StateVec::basis(10, 1);
        assert!(matches!(weak_value(&rep.h, &e0, &e1), Err(Error::VanishingOverlap { .. })));
    }

    #[test]
    fn closed_weak_values() {
        let p = params(c(1.0, 0.0));
        assert_eq!(weak_qp_closed(c(0.0, 0.0), c(0.0, 0.0), &p), (c(0.0, 0.0), c(0.0, 0.0)));
        let (q, _) = weak_qp_closed(c(0.0, -1.0), c(1.0, 0.0), &p);
        assert!((q - c(1.0, -1.0) / 2f64.sqrt()).norm() < 1e-15);

        let p = ModelParams::new(c(1.1, 0.2), C64::from_polar(0.9, -0.5), 0.8, 1e-3, 1e-3).unwrap();
        let rep = FockRep::build(&p, 40).unwrap();
        let (la, lb) = (c(0.6, -0.4), c(-0.3, 0.8));
        let a = coherent_coeffs(la, 40);
        let b = coherent_coeffs(lb, 40);
        let (q, pp) = weak_qp_closed(la, lb, &p);
        assert!((weak_value(&rep.q_new, &a, &b).unwrap() - q).norm() < 1e-9);
        assert!((weak_value(&rep.p_new, &a, &b).unwrap() - pp).norm() < 1e-9);
    }

    fn coherent_system() -> TwoStateSystem {
        let p = ModelParams::new(c(1.0, 0.1), C64::from_polar(1.0, -0.2), 1.0, 1e-3, 1e-3).unwrap();
        let rep = FockRep::build(&p, 40).unwrap();
        TwoStateSystem::coherent(c(0.8, 0.1), c(0.5, -0.3), 0.0, 2.0, rep).unwrap()
    }

    #[test]
    fn ehrenfest_examples() {
        let sys = coherent_system();
        let (r1, r2) = ehrenfest_residual(&sys, 1.0, 1e-3).unwrap();
        assert!(r1.norm() < 1e-5 && r2.norm() < 1e-5, "{r1} {r2}");
        let (h1, h2) = ehrenfest_residual(&sys, 1.0, 5e-4).unwrap();
        let ratio1 = r1.norm() / h1.norm();
        let ratio2 = r2.norm() / h2.norm();
        assert!((ratio1 - 4.0).abs() < 0.4 && (ratio2 - 4.0).abs() < 0.4, "{ratio1} {ratio2}");

        let p = params(C64::from_polar(1.0, -0.3));
        let rep = FockRep::build(&p, 6).unwrap();
        let e0 = StateVec::basis(6, 0);
        let sys = TwoStateSystem::new(e0.clone(), e0, 0.0, 1.0, rep).unwrap();
        assert_eq!(ehrenfest_residual(&sys, 0.5, 1e-3).unwrap(), (c(0.0, 0.0), c(0.0, 0.0)));
        assert!(matches!(ehrenfest_residual(&sys, 0.5, 0.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn system_validation() {
        let p = params(c(1.0, 0.0));
        let rep = FockRep::build(&p, 4).unwrap();
        let bad = StateVec::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let e0 = StateVec::basis(4, 0);
        assert!(matches!(
            TwoStateSystem::new(bad, e0.clone(), 0.0, 1.0, rep.clone()),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            TwoStateSystem::new(StateVec::basis(3, 0), e0.clone(), 0.0, 1.0, rep.clone()),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(TwoStateSystem::new(e0.clone(), e0, 2.0, 1.0, rep).is_err());
    }

    #[test]
    fn trajectory_examples() {
        let p = params(c(1.0, -0.05));
        let rep = FockRep::build(&p, 40).unwrap();
        let l = c(0.7, 0.2);
        let sys = TwoStateSystem::coherent(l, l, 0.0, 3.0, rep.clone()).unwrap();
        let tr = trajectory(&sys, &[0.0]).unwrap();
        // B(T_A) is the coherent state of λ_B(T_A) = λ e^{+iω* T} times its
        // evolution prefactor
        let w = p.omega().conj();
        let lb = coherent_lambda(l, -3.0, Which::B, &p);
        let pref_b = (C64::i() * w * 1.5).exp() * (-l.norm_sqr() * (1.0 - (-2.0 * w.im * 3.0).exp()) / 2.0).exp();
        let want = pref_b.conj() * (-(lb.norm_sqr() - 2.0 * lb.conj() * l + l.norm_sqr()) / 2.0).exp();
        assert!((tr.samples[0].amplitude - want).norm() < 1e-12);

        let e0 = StateVec::basis(40, 0);
        let sys = TwoStateSystem::new(e0.clone(), e0, 0.0, 3.0, rep).unwrap();
        let tr = trajectory(&sys, &[0.0, 0.7, 1.5, 3.0]).unwrap();
        for s in &tr.samples[1..] {
            let s0 = tr.samples[0];
            for (x, y) in [(s.amplitude, s0.amplitude), (s.q_new, s0.q_new), (s.p_new, s0.p_new), (s.h_qh, s0.h_qh)] {
                assert!((x - y).norm() < 1e-14);
            }
        }
        assert!(trajectory(&sys, &[]).unwrap().samples.is_empty());
        assert!(matches!(trajectory(&sys, &[3.5]), Err(Error::TimeOutOfWindow { .. })));
    }

    #[test]
    fn vanishing_overlap_is_skipped() {
        let p = params(c(1.0, 0.0));
        let rep = FockRep::build(&p, 4).unwrap();
        let sys = TwoStateSystem::new(StateVec::basis(4, 0), StateVec::basis(4, 1), 0.0, 1.0, rep).unwrap();
        let tr = trajectory(&sys, &[0.0, 0.5]).unwrap();
        assert!(tr.samples.is_empty());
        assert_eq!(tr.skipped.len(), 2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn amplitude_is_time_independent(seed in 0u64..1000, tw in -1.4..0.0f64) {
                let p = params(C64::from_polar(1.0, tw));
                let rep = FockRep::build(&p, 12).unwrap();
                let sys = TwoStateSystem::new(random_state(12, seed), random_state(12, seed + 1), 0.0, 2.0, rep).unwrap();
                let base = sys.amplitude(0.0);
                for t in [0.3, 0.9, 1.4, 2.0] {
                    prop_assert!((sys.amplitude(t) - base).norm() <= 1e-12 * base.norm());
                }
            }

            #[test]
            fn coherent_routes_agree(re in -1.0..1.0f64, im in -1.0..1.0f64, dt in -2.0..2.0f64, tw in -0.3..0.0f64) {
                let l0 = c(re, im);
                prop_assume!(l0.norm() <= 1.5);
                let p = params(C64::from_polar(1.0, tw));
                for which in [Which::A, Which::B] {
                    let start = coherent_coeffs(l0, 40);
                    let routed = match which {
                        Which::A => evolve_a(&start, dt, &p),
                        Which::B => evolve_b(&start, dt, &p),
                    };
                    let closed = coherent_state_at(l0, dt, which, 40, &p);
                    prop_assert!((routed.0 - closed.0).max_abs() < 1e-10);
                }
            }

            #[test]
            fn diagonal_expectations_are_real(seed in 0u64..1000) {
                let p = params(C64::from_polar(1.0, -0.6));
                let rep = FockRep::build(&p, 10).unwrap();
                let a = random_state(10, seed);
                for op in [&rep.q_q, &rep.p_q, &rep.h_qh] {
                    let v = weak_value(op, &a, &a).unwrap();
                    // a dot product cannot resolve below rounding of its terms
                    let floor = 64.0 * f64::EPSILON * (op * &a.0).norm();
                    prop_assert!(v.im.abs() <= (1e-13 * v.norm()).max(floor), "{v}");
                }
            }
        }
    }
}
