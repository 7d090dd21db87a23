//! Model parameters, their convergence conditions, derived scales and the
//! `(θ_m, θ_ω)` phase diagram.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::{Error, Result, C64};

/// Absolute tolerance for angle comparisons (region boundaries, θ_m = π/2,
/// corners).
pub const ANGLE_TOL: f64 = 1e-9;

/// Relative tolerance used when testing `Im(m) ≥ 0` and `Im(mω²) ≤ 0`, so that
/// parameters built from exact angles such as θ_m = π survive rounding.
pub const SIGN_TOL: f64 = 1e-12;

/// Validated complex mass and frequency together with ħ and the regulators
/// ε, ε′.
///
/// Angles follow the branch in which the allowed region is the closed
/// parallelogram `0 ≤ θ_m ≤ π`, `-θ_m/2 - π/2 ≤ θ_ω ≤ -θ_m/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    m: C64,
    omega: C64,
    hbar: f64,
    eps: f64,
    eps_prime: f64,
    r_m: f64,
    theta_m: f64,
    r_omega: f64,
    theta_omega: f64,
}

impl ModelParams {
    /// Validates `(m, ω, ħ, ε, ε′)`.
    pub fn new(m: C64, omega: C64, hbar: f64, eps: f64, eps_prime: f64) -> Result<Self> {
        check_finite(m, omega, hbar)?;
        check_regulators(eps, eps_prime)?;
        Self::build(m, omega, hbar, eps, eps_prime)
    }

    /// Builds parameters from polar data, keeping the supplied angles exactly
    /// (after the same domain checks as [`ModelParams::new`]).
    pub fn from_polar(
        r_m: f64,
        theta_m: f64,
        r_omega: f64,
        theta_omega: f64,
        hbar: f64,
        eps: f64,
        eps_prime: f64,
    ) -> Result<Self> {
        let m = C64::from_polar(r_m, theta_m);
        let omega = C64::from_polar(r_omega, theta_omega);
        check_finite(m, omega, hbar)?;
        check_regulators(eps, eps_prime)?;
        if !(r_m > 0.0 && r_omega > 0.0) {
            return Err(Error::InvalidInput("r_m and r_ω must be positive".into()));
        }
        check_signs(m, omega)?;
        let (theta_m, theta_omega) = snap_angles(theta_m, theta_omega)?;
        Ok(Self { m, omega, hbar, eps, eps_prime, r_m, theta_m, r_omega, theta_omega })
    }

    /// The ε = ε′ = 0 limit. Only the closed forms that are stated for
    /// vanishing regulators accept these parameters meaningfully; the
    /// regulator checks of [`ModelParams::new`] are skipped on purpose.
    pub fn regulator_free(m: C64, omega: C64, hbar: f64) -> Result<Self> {
        check_finite(m, omega, hbar)?;
        Self::build(m, omega, hbar, 0.0, 0.0)
    }

    fn build(m: C64, omega: C64, hbar: f64, eps: f64, eps_prime: f64) -> Result<Self> {
        let (r_m, r_omega) = (m.norm(), omega.norm());
        if !(r_m > 0.0 && r_omega > 0.0) {
            return Err(Error::InvalidInput("m and ω must be non-zero".into()));
        }
        check_signs(m, omega)?;
        let (theta_m, theta_omega) = snap_angles(m.arg(), omega.arg())?;
        Ok(Self { m, omega, hbar, eps, eps_prime, r_m, theta_m, r_omega, theta_omega })
    }

    pub fn m(&self) -> C64 {
        self.m
    }
    pub fn omega(&self) -> C64 {
        self.omega
    }
    pub fn hbar(&self) -> f64 {
        self.hbar
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn eps_prime(&self) -> f64 {
        self.eps_prime
    }
    pub fn r_m(&self) -> f64 {
        self.r_m
    }
    pub fn theta_m(&self) -> f64 {
        self.theta_m
    }
    pub fn r_omega(&self) -> f64 {
        self.r_omega
    }
    pub fn theta_omega(&self) -> f64 {
        self.theta_omega
    }

    /// `r = |mω|`.
    pub fn r(&self) -> f64 {
        self.r_m * self.r_omega
    }

    /// `θ = θ_m + θ_ω = arg(mω)`.
    pub fn theta(&self) -> f64 {
        self.theta_m + self.theta_omega
    }

    /// `mω = r e^{iθ}`, built from the stored polar data.
    pub fn momega(&self) -> C64 {
        C64::from_polar(self.r(), self.theta())
    }

    /// `mω² = r_m r_ω² e^{i(θ_m + 2θ_ω)}`.
    pub fn momega2(&self) -> C64 {
        C64::from_polar(self.r_m * self.r_omega * self.r_omega, self.theta_m + 2.0 * self.theta_omega)
    }

    /// Whether the ladder states can be dual-normalized, `|θ| < π/2`.
    pub fn normalizable(&self) -> bool {
        self.theta().abs() < FRAC_PI_2 - ANGLE_TOL
    }

    pub(crate) fn require_normalizable(&self) -> Result<()> {
        if self.normalizable() {
            Ok(())
        } else {
            Err(Error::NotNormalizable { theta_abs: self.theta().abs() })
        }
    }

    pub fn classification(&self) -> PhaseClassification {
        // The stored angles are inside the parallelogram by construction.
        classify_phase(self.theta_m, self.theta_omega, ANGLE_TOL).expect("validated angles lie in the parallelogram")
    }
}

fn check_finite(m: C64, omega: C64, hbar: f64) -> Result<()> {
    if !(m.re.is_finite() && m.im.is_finite() && omega.re.is_finite() && omega.im.is_finite()) {
        return Err(Error::InvalidInput("m and ω must be finite".into()));
    }
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(Error::InvalidInput(format!("ħ must be positive and finite, got {hbar}")));
    }
    Ok(())
}

fn check_regulators(eps: f64, eps_prime: f64) -> Result<()> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::RegulatorInvalid(format!("ε = {eps} must be positive")));
    }
    if !(eps_prime.is_finite() && eps_prime > 0.0) {
        return Err(Error::RegulatorInvalid(format!("ε′ = {eps_prime} must be positive")));
    }
    if eps * eps_prime >= 1.0 {
        return Err(Error::RegulatorInvalid(format!("εε′ = {} must be < 1", eps * eps_prime)));
    }
    Ok(())
}

fn check_signs(m: C64, omega: C64) -> Result<()> {
    if m.im < -SIGN_TOL * m.norm() {
        return Err(Error::KineticDivergence { im_m: m.im });
    }
    let momega2 = m * omega * omega;
    if momega2.im > SIGN_TOL * momega2.norm() {
        return Err(Error::PotentialDivergence { im_m_omega2: momega2.im });
    }
    Ok(())
}

/// Moves principal-value angles onto the parallelogram branch and clamps
/// values that sit within [`ANGLE_TOL`] of an edge.
fn snap_angles(theta_m: f64, theta_omega: f64) -> Result<(f64, f64)> {
    let out = Error::OutOfDomain { theta_m, theta_omega };
    let mut tm = theta_m;
    if tm < 0.0 && tm > -ANGLE_TOL {
        tm = 0.0;
    } else if tm <= -PI + ANGLE_TOL {
        // -π and π describe the same negative real mass
        tm = PI;
    }
    if !(0.0..=PI + ANGLE_TOL).contains(&tm) {
        return Err(out);
    }
    tm = tm.min(PI);

    let mut tw = theta_omega;
    if tw > PI - ANGLE_TOL {
        tw -= 2.0 * PI;
    }
    let (lo, hi) = omega_bounds(tm);
    if tw < lo - ANGLE_TOL || tw > hi + ANGLE_TOL {
        return Err(out);
    }
    Ok((tm, tw.clamp(lo, hi)))
}

/// Allowed θ_ω interval at fixed θ_m.
pub fn omega_bounds(theta_m: f64) -> (f64, f64) {
    (-theta_m / 2.0 - FRAC_PI_2, -theta_m / 2.0)
}

/// Frame selected by the sign of Re(m).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Theory {
    /// Usual time theory, `0 ≤ θ_m < π/2`.
    Utt,
    /// Imaginary time theory, `θ_m = π/2`.
    Itt,
    /// Flipped time theory, `π/2 < θ_m ≤ π`.
    Ftt,
}

impl Theory {
    pub fn from_theta_m(theta_m: f64, tol: f64) -> Self {
        if (theta_m - FRAC_PI_2).abs() <= tol {
            Theory::Itt
        } else if theta_m < FRAC_PI_2 {
            Theory::Utt
        } else {
            Theory::Ftt
        }
    }

    /// Unit factor `a` with `m_new = a m`.
    pub fn frame_factor(self) -> C64 {
        match self {
            Theory::Utt => C64::new(1.0, 0.0),
            Theory::Itt => C64::new(0.0, -1.0),
            Theory::Ftt => C64::new(-1.0, 0.0),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Theory::Utt => "UTT",
            Theory::Itt => "ITT",
            Theory::Ftt => "FTT",
        }
    }
}

/// Potential type in the transformed frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Potential {
    Ho,
    Iho,
    FreeImag,
}

impl Potential {
    pub fn label(self) -> &'static str {
        match self {
            Potential::Ho => "HO",
            Potential::Iho => "IHO",
            Potential::FreeImag => "FREE_IMAG",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseClassification {
    pub theory: Theory,
    /// Region 1–5 by `s = θ_m + 2θ_ω` (1: s = 0, 3: s = −π/2, 5: s = −π).
    pub region: u8,
    pub potential: Potential,
    pub excluded_corner: bool,
    pub normalizable: bool,
    pub frame_factor: C64,
}

/// Classifies a point of the phase diagram.
///
/// Boundaries belong to the boundary regions 1, 3 and 5 whenever the point is
/// within `tol` of them.
pub fn classify_phase(theta_m: f64, theta_omega: f64, tol: f64) -> Result<PhaseClassification> {
    let (lo, hi) = omega_bounds(theta_m);
    let inside = theta_m >= -tol && theta_m <= PI + tol && theta_omega >= lo - tol && theta_omega <= hi + tol;
    if !inside || !theta_m.is_finite() || !theta_omega.is_finite() {
        return Err(Error::OutOfDomain { theta_m, theta_omega });
    }

    let s = theta_m + 2.0 * theta_omega;
    let region = if s.abs() <= tol {
        1
    } else if (s + FRAC_PI_2).abs() <= tol {
        3
    } else if (s + PI).abs() <= tol {
        5
    } else if s > -FRAC_PI_2 {
        2
    } else {
        4
    };

    let theory = Theory::from_theta_m(theta_m, tol);
    use Potential::*;
    let potential = match (theory, region) {
        (Theory::Utt, 1 | 2) => Ho,
        (Theory::Utt, 3) => FreeImag,
        (Theory::Utt, _) => Iho,
        (Theory::Itt, 1 | 5) => FreeImag,
        (Theory::Itt, _) => Ho,
        (Theory::Ftt, 1 | 2) => Iho,
        (Theory::Ftt, 3) => FreeImag,
        (Theory::Ftt, _) => Ho,
    };

    let normalizable = (theta_m + theta_omega).abs() < FRAC_PI_2 - tol;
    Ok(PhaseClassification {
        theory,
        region,
        potential,
        // inside the parallelogram |θ| reaches π/2 only at the two θ_ω = −π/2 corners
        excluded_corner: !normalizable,
        normalizable,
        frame_factor: theory.frame_factor(),
    })
}

/// Transformed frame with `Re(m_new) ≥ 0` and `ω t = ω_new t_new`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub a: C64,
    pub m_new: C64,
    pub omega_new: C64,
}

impl Frame {
    /// `t_new = a t`.
    pub fn time(&self, t: f64) -> C64 {
        self.a * t
    }
}

pub fn new_frame(params: &ModelParams) -> Frame {
    let a = Theory::from_theta_m(params.theta_m(), ANGLE_TOL).frame_factor();
    Frame { a, m_new: a * params.m(), omega_new: params.omega() / a }
}

/// Scales derived from `(m, ω, ε, ε′)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedScales {
    /// `m′ = r_m e^{−iθ_ω}`.
    pub m_prime: C64,
    pub m_h: f64,
    pub omega_h: f64,
    /// `None` when `sin θ_ω = 0`.
    pub m_a: Option<f64>,
    pub omega_a: f64,
    pub momega_1: C64,
    pub momega_2: C64,
    pub normalizable: bool,
}

/// Computes the Q-Hermitian/anti-Q-Hermitian mass and frequency split and the
/// regulated products `(mω)₁`, `(mω)₂`.
pub fn derived(params: &ModelParams) -> Result<DerivedScales> {
    let (r_m, r_w, tw) = (params.r_m(), params.r_omega(), params.theta_omega());
    let (sin, cos) = tw.sin_cos();
    if cos.abs() <= ANGLE_TOL {
        return Err(Error::DivisionDegenerate("cos θ_ω = 0, m_h is unbounded"));
    }
    let m_a = if sin.abs() <= ANGLE_TOL { None } else { Some(-r_m / sin) };
    let mw = params.momega();
    let (e, ep) = (params.eps(), params.eps_prime());
    Ok(DerivedScales {
        m_prime: C64::from_polar(r_m, -tw),
        m_h: r_m / cos,
        omega_h: r_w * cos,
        m_a,
        omega_a: -r_w * sin,
        momega_1: (mw - ep) / (1.0 - mw * e),
        momega_2: (mw + ep) / (1.0 + mw * e),
        normalizable: params.normalizable(),
    })
}

/// `λ_n = ħω(n + 1/2)`.
pub fn eigenvalue(params: &ModelParams, n: usize) -> C64 {
    params.hbar() * params.omega() * (n as f64 + 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub theta_m: f64,
    pub theta_omega: f64,
    pub class: PhaseClassification,
}

/// Uniform `resolution × resolution` grid over the closed parallelogram,
/// row-major in θ_m then θ_ω (θ_ω descending from the upper edge).
pub fn phase_grid(resolution: usize) -> Result<Vec<PhasePoint>> {
    if resolution < 2 {
        return Err(Error::InvalidInput(format!("grid resolution must be ≥ 2, got {resolution}")));
    }
    let step = 1.0 / (resolution - 1) as f64;
    let mut out = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        let theta_m = PI * i as f64 * step;
        let (_, hi) = omega_bounds(theta_m);
        for j in 0..resolution {
            let theta_omega = hi - FRAC_PI_2 * j as f64 * step;
            let class = classify_phase(theta_m, theta_omega, ANGLE_TOL)?;
            out.push(PhasePoint { theta_m, theta_omega, class });
        }
    }
    Ok(out)
}

/// Representative interior angle of each region at fixed θ_m, useful for
/// sampling every region × theory cell.
pub fn region_representative(theta_m: f64, region: u8) -> f64 {
    let s = match region {
        1 => 0.0,
        2 => -FRAC_PI_4,
        3 => -FRAC_PI_2,
        4 => -3.0 * FRAC_PI_4,
        _ => -PI,
    };
    (s - theta_m) / 2.0
}
