//! Maximizing `|⟨B|_Q A⟩|` over Q-normalized boundary states.
//!
//! In `|n⟩₁` coordinates the amplitude is `b† D a` with the diagonal kernel
//! `D = diag(e^{−iω(n+½)T})`, so the maximum is the top singular value of
//! `D`. It is found here by alternating power iteration rather than read off
//! the diagonal, which keeps the analytic value an independent check.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::TwoStateSystem;
use crate::fock::{q_inner, FockRep, StateVec};
use crate::params::ModelParams;
use crate::{Error, Result, C64};

/// `|Im ω| < DEGENERACY_TOL · |ω|` is treated as real ω.
pub const DEGENERACY_TOL: f64 = 1e-12;

fn kernel(params: &ModelParams, n: usize, t_total: f64) -> DVector<C64> {
    let w = params.omega();
    DVector::from_fn(n, |k, _| (-C64::i() * w * ((k as f64 + 0.5) * t_total)).exp())
}

/// `Σ bₙ* aₙ e^{−iω(n+½)T}`.
pub fn amplitude(a: &StateVec, b: &StateVec, t_total: f64, params: &ModelParams) -> Result<C64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    let d = kernel(params, a.len(), t_total);
    q_inner(b, &StateVec(d.component_mul(&a.0)))
}

pub fn is_degenerate(params: &ModelParams) -> bool {
    params.omega().im.abs() < DEGENERACY_TOL * params.omega().norm()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticMax {
    pub value: f64,
    /// Indices `n` attaining the largest `Im λ_n`.
    pub argmax: Vec<usize>,
    pub degenerate: bool,
}

/// `e^{(T/2) Im ω}` attained only at `n = 0`, or 1 attained everywhere when
/// ω is real.
pub fn analytic_max(t_total: f64, params: &ModelParams, n_max: usize) -> Result<AnalyticMax> {
    if !(t_total.is_finite() && t_total > 0.0) {
        return Err(Error::InvalidInput(format!("T must be positive, got {t_total}")));
    }
    if is_degenerate(params) {
        Ok(AnalyticMax { value: 1.0, argmax: (0..n_max).collect(), degenerate: true })
    } else {
        Ok(AnalyticMax { value: (0.5 * t_total * params.omega().im).exp(), argmax: vec![0], degenerate: false })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Starting `a`; a seeded random vector when absent.
    pub start: Option<StateVec>,
}

impl Default for MaxOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iters: 10_000, seed: 0, start: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximizationResult {
    /// Initial state at `T_A`, phase fixed so the first non-zero entry
    /// (normally `a₀`) is real positive.
    pub a: StateVec,
    /// Final state at `T_B = T_A + T`.
    pub b: StateVec,
    pub amplitude_abs: f64,
    pub analytic_max: f64,
    /// `|a₀|`.
    pub ground_overlap: f64,
    pub degenerate: bool,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
    pub t_total: f64,
    /// `‖D a‖` after each iteration, starting with the initial vector.
    pub history: Vec<f64>,
}

/// Seeded random unit vector with entries uniform in the unit square.
pub fn random_unit(n: usize, seed: u64) -> StateVec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v = DVector::from_fn(n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let norm = v.norm();
        if norm > 0.0 {
            return StateVec(v / C64::new(norm, 0.0));
        }
    }
}

fn normalized(v: DVector<C64>) -> Option<DVector<C64>> {
    let n = v.norm();
    (n > 0.0 && n.is_finite()).then(|| v / C64::new(n, 0.0))
}

fn fix_phase(v: &mut DVector<C64>) {
    if let Some(k) = v.iter().position(|c| c.norm() > 1e-300) {
        let ph = v[k].conj() / v[k].norm();
        *v *= ph;
    }
}

/// Alternating iteration `b ← Da/‖Da‖`, `a ← D†b/‖D†b‖`.
///
/// Stops when both the amplitude and the vector `a` change by less than
/// `tol`; a result that hits `max_iters` is returned with `converged = false`.
pub fn maximize(t_total: f64, params: &ModelParams, n_max: usize, opts: &MaxOptions) -> Result<MaximizationResult> {
    if n_max < 2 {
        return Err(Error::InvalidInput(format!("truncation must be ≥ 2, got {n_max}")));
    }
    let exact = analytic_max(t_total, params, n_max)?;
    let d = kernel(params, n_max, t_total);
    let start = match &opts.start {
        Some(s) if s.len() != n_max => return Err(Error::LengthMismatch { left: s.len(), right: n_max }),
        Some(s) => s.0.clone(),
        None => random_unit(n_max, opts.seed).0,
    };
    let mut a = normalized(start).ok_or_else(|| Error::InvalidInput("start vector must be non-zero".into()))?;
    let mut amp = d.component_mul(&a).norm();
    let mut history = vec![amp];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let b = normalized(d.component_mul(&a)).ok_or(Error::VanishingOverlap { magnitude: 0.0 })?;
        let next = normalized(d.conjugate().component_mul(&b)).ok_or(Error::VanishingOverlap { magnitude: 0.0 })?;
        let next_amp = d.component_mul(&next).norm();
        let step = (&next - &a).norm();
        let gain = (next_amp - amp).abs();
        a = next;
        amp = next_amp;
        history.push(amp);
        if gain < opts.tol && step < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("maximization stopped after {iterations} iterations without converging");
    }
    fix_phase(&mut a);
    let b = normalized(d.component_mul(&a)).ok_or(Error::VanishingOverlap { magnitude: 0.0 })?;
    let a = StateVec(a);
    let b = StateVec(b);
    let amplitude_abs = amplitude(&a, &b, t_total, params)?.norm();
    Ok(MaximizationResult {
        ground_overlap: a.0[0].norm(),
        a,
        b,
        amplitude_abs,
        analytic_max: exact.value,
        degenerate: exact.degenerate,
        iterations,
        converged,
        seed: opts.seed,
        t_total,
        history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxWeakValues {
    pub t: f64,
    pub q_q: C64,
    pub p_q: C64,
    pub h_qh: C64,
    /// Real ω: the maximizer is not unique and the vanishing of `⟨q̂_Q⟩`,
    /// `⟨p̂_Q⟩` is not implied.
    pub degenerate: bool,
}

/// Weak values of `q̂_Q`, `p̂_Q`, `Ĥ_Qh` between the maximizing states at
/// time `t ∈ [0, T]`, with `T_A = 0`.
pub fn max_weak_values_at(result: &MaximizationResult, rep: &FockRep, t: f64) -> Result<MaxWeakValues> {
    let sys = TwoStateSystem::new(result.a.clone(), result.b.clone(), 0.0, result.t_total, rep.clone())?;
    if !(0.0..=result.t_total).contains(&t) {
        return Err(Error::TimeOutOfWindow { t, t_a: 0.0, t_b: result.t_total });
    }
    let s = sys.sample(t)?;
    Ok(MaxWeakValues { t, q_q: s.q_q, p_q: s.p_q, h_qh: s.h_qh, degenerate: result.degenerate })
}

/// [`max_weak_values_at`] at the midpoint `T/2`.
pub fn max_weak_values(result: &MaximizationResult, rep: &FockRep) -> Result<MaxWeakValues> {
    max_weak_values_at(result, rep, result.t_total / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_6;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn params(w: C64) -> ModelParams {
        ModelParams::new(c(1.0, 0.0), w, 1.0, 1e-3, 1e-3).unwrap()
    }

    #[test]
    fn amplitude_examples() {
        let p = params(c(1.0, -0.2));
        let e0 = StateVec::basis(6, 0);
        let amp = amplitude(&e0, &e0, 10.0, &p).unwrap();
        assert!((amp - (-C64::i() * p.omega() * 5.0).exp()).norm() < 1e-15);
        assert!((amp.norm() - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(amplitude(&e0, &StateVec::basis(6, 1), 10.0, &p).unwrap(), c(0.0, 0.0));
        assert!(matches!(amplitude(&e0, &StateVec::basis(5, 0), 1.0, &p), Err(Error::LengthMismatch { .. })));

        let real = params(c(1.3, 0.0));
        for seed in 0..20 {
            let a = random_unit(7, seed);
            let amp = amplitude(&a, &a, 2.0, &real).unwrap();
            assert!(amp.norm() <= 1.0 + 1e-15);
        }
        // phases aligned with the kernel give equality
        let a = random_unit(7, 99);
        let b = StateVec(kernel(&real, 7, 2.0).component_mul(&a.0));
        assert!((amplitude(&a, &b, 2.0, &real).unwrap().norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn analytic_examples() {
        let m = analytic_max(10.0, &params(c(1.0, -0.2)), 8).unwrap();
        assert!((m.value - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert_eq!(m.argmax, vec![0]);
        let m = analytic_max(10.0, &params(c(1.0, 0.0)), 5).unwrap();
        assert_eq!((m.value, m.argmax.len(), m.degenerate), (1.0, 5, true));
        let m = analytic_max(1e-12, &params(c(1.0, -0.2)), 8).unwrap();
        assert!((m.value - 1.0).abs() < 1e-12);
        assert!(analytic_max(0.0, &params(c(1.0, -0.2)), 8).is_err());
    }

    #[test]
    fn maximizer_finds_ground_state() {
        let p = params(c(1.0, -0.2));
        let r = maximize(10.0, &p, 8, &MaxOptions { seed: 3, ..Default::default() }).unwrap();
        assert!(r.converged && !r.degenerate);
        assert!(r.ground_overlap > 1.0 - 1e-6);
        assert!((r.amplitude_abs - (-1.0f64).exp()).abs() <= 1e-9);
        assert!(r.amplitude_abs <= r.analytic_max + 1e-12);
        assert!((r.a.q_norm() - 1.0).abs() < 1e-12 && (r.b.q_norm() - 1.0).abs() < 1e-12);
        assert!(r.a.0[0].im == 0.0 && r.a.0[0].re > 0.0);
        assert!(r.history.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-15)));
    }

    #[test]
    fn ground_start_is_a_fixed_point() {
        let p = params(c(1.0, -0.2));
        let opts = MaxOptions { start: Some(StateVec::basis(8, 0)), ..Default::default() };
        let r = maximize(10.0, &p, 8, &opts).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
    }

    #[test]
    fn real_frequency_is_degenerate() {
        let p = params(c(1.0, 0.0));
        let start = random_unit(6, 11);
        let r = maximize(10.0, &p, 6, &MaxOptions { start: Some(start.clone()), ..Default::default() }).unwrap();
        assert!(r.degenerate);
        assert!((r.amplitude_abs - 1.0).abs() < 1e-12);
        // same ray as the start
        let overlap = q_inner(&start, &r.a).unwrap().norm();
        assert!((overlap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn maximizer_weak_values() {
        let p = params(C64::from_polar(1.0, -FRAC_PI_6));
        let rep = FockRep::build(&p, 10).unwrap();
        let r = maximize(10.0, &p, 10, &MaxOptions { seed: 5, ..Default::default() }).unwrap();
        let want = FRAC_PI_6.cos() / 2.0;
        let mut seen = Vec::new();
        for t in [0.0, 4.0, 10.0] {
            let w = max_weak_values_at(&r, &rep, t).unwrap();
            assert!(w.q_q.norm() <= 1e-10 && w.p_q.norm() <= 1e-10, "{w:?}");
            assert!((w.h_qh - c(want, 0.0)).norm() <= 1e-12);
            seen.push(w);
        }
        for w in &seen[1..] {
            assert!((w.h_qh - seen[0].h_qh).norm() <= 1e-12);
            assert!((w.q_q - seen[0].q_q).norm() <= 1e-12);
        }
        assert!(matches!(max_weak_values_at(&r, &rep, 11.0), Err(Error::TimeOutOfWindow { .. })));
        assert!((max_weak_values(&r, &rep).unwrap().h_qh.re - 0.433_012_701_892_219_3).abs() < 1e-12);
    }

    #[test]
    fn seeds_reproduce() {
        let p = params(c(1.0, -0.05));
        let opts = MaxOptions { seed: 42, ..Default::default() };
        assert_eq!(maximize(3.0, &p, 6, &opts).unwrap(), maximize(3.0, &p, 6, &opts).unwrap());
        assert_eq!(maximize(3.0, &p, 6, &opts).unwrap().seed, 42);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn amplitude_never_exceeds_analytic_max(seed in 0u64..100_000, tw in -1.5..0.0f64, t in 0.1..20.0f64) {
                let p = params(C64::from_polar(1.0, tw));
                let bound = analytic_max(t, &p, 8).unwrap().value;
                let amp = amplitude(&random_unit(8, seed), &random_unit(8, seed ^ 0xdead), t, &p).unwrap();
                prop_assert!(amp.norm() <= bound * (1.0 + 1e-12));
            }

            #[test]
            fn near_maximal_pairs_sit_on_the_ground_state(seed in 0u64..100_000, delta in 0.0..1e-3f64) {
                let p = params(c(1.0, -0.2));
                let t = 10.0;
                let noise = random_unit(8, seed);
                let a = StateVec((StateVec::basis(8, 0).0 + noise.0 * C64::new(delta, 0.0)).normalize());
                let b = StateVec(kernel(&p, 8, t).component_mul(&a.0).normalize());
                let amp = amplitude(&a, &b, t, &p).unwrap().norm();
                let bound = analytic_max(t, &p, 8).unwrap().value;
                if amp >= bound * (1.0 - 1e-9) {
                    prop_assert!(a.0[0].norm() >= 1.0 - 1e-4 && b.0[0].norm() >= 1.0 - 1e-4);
                }
            }

            #[test]
            fn iteration_is_monotone(seed in 0u64..10_000, tw in -1.5..0.0f64, t in 0.1..5.0f64) {
                let p = params(C64::from_polar(1.0, tw));
                let r = maximize(t, &p, 8, &MaxOptions { seed, max_iters: 200, ..Default::default() }).unwrap();
                prop_assert!(r.history.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-14)));
                prop_assert!(r.amplitude_abs <= r.analytic_max + 1e-12);
            }
        }
    }
}
