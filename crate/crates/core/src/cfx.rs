//! Smeared delta function on the complex plane and straight-contour
//! Gauss–Legendre quadrature.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::{Error, Result, C64};

/// Smeared delta evaluated at a point, with flags for values outside the
/// `f64` range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaValue {
    pub value: C64,
    pub underflow: bool,
    pub overflow: bool,
}

/// `δ_c^ε(q) = √(1/4πε) exp(−q²/4ε)` on the principal branch.
///
/// The exponent is formed in log space so that deep tails come back as an
/// exact zero with `underflow` set instead of a denormal or NaN.
pub fn delta_eval(q: C64, eps: C64) -> DeltaValue {
    let pref = (C64::new(1.0, 0.0) / (4.0 * PI * eps)).sqrt();
    let expo = -q * q / (4.0 * eps);
    let log_mag = pref.norm().ln() + expo.re;
    if log_mag < f64::MIN_POSITIVE.ln() {
        return DeltaValue { value: C64::new(0.0, 0.0), underflow: true, overflow: false };
    }
    let phase = pref.arg() + expo.im;
    if log_mag > f64::MAX.ln() {
        let (s, c) = phase.sin_cos();
        let value = C64::new(f64::INFINITY.copysign(c), f64::INFINITY.copysign(s));
        return DeltaValue { value, underflow: false, overflow: true };
    }
    DeltaValue { value: C64::from_polar(log_mag.exp(), phase), underflow: false, overflow: false }
}

/// `L(q) = (Re q)² − (Im q)² > 0`.
pub fn delta_domain_ok(q: C64) -> bool {
    q.re * q.re - q.im * q.im > 0.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleCheck {
    /// θ_q lies in one of the two windows around `(θ_ε − 2θ_a)/2`.
    pub ok: bool,
    /// `|δ^ε(aq) − sign(Re a)/a · δ^{ε/a²}(q)|`.
    pub residual: f64,
}

/// Checks the scaling law of the smeared delta at one point.
pub fn delta_scale_ok(a: C64, q: C64, eps: C64) -> Result<ScaleCheck> {
    if a == C64::new(0.0, 0.0) {
        return Err(Error::InvalidInput("scale factor a must be non-zero".into()));
    }
    if a.re == 0.0 {
        return Err(Error::SignUndefined);
    }
    // θ_q ∈ (φ − π/4, φ + π/4) mod π  ⇔  cos(2θ_q − 2φ) > 0
    let ok = q == C64::new(0.0, 0.0) || (2.0 * q.arg() + 2.0 * a.arg() - eps.arg()).cos() > 0.0;
    let lhs = delta_eval(a * q, eps).value;
    let rhs = a.re.signum() / a * delta_eval(q, eps / (a * a)).value;
    Ok(ScaleCheck { ok, residual: (lhs - rhs).norm() })
}

/// Straight quadrature contour with Gauss–Legendre nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourPath {
    pub nodes: Vec<C64>,
    /// Positive weights in the arc-length parameter.
    pub weights: Vec<f64>,
    /// Unit tangent `e^{i·angle}`; `dq = direction · ds`.
    pub direction: C64,
    pub max_tangent_angle: f64,
}

impl ContourPath {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn angle(&self) -> f64 {
        self.direction.arg()
    }

    /// Same path shifted by `offset`.
    pub fn translated(&self, offset: C64) -> Self {
        let mut out = self.clone();
        out.nodes.iter_mut().for_each(|q| *q += offset);
        out
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// `q(s) = s e^{i·angle}`, `s ∈ [−half_width, half_width]`.
pub fn rotated_path(angle: f64, half_width: f64, n_nodes: usize) -> Result<ContourPath> {
    if !angle.is_finite() || angle.abs() >= FRAC_PI_2 {
        return Err(Error::AngleTooSteep { angle });
    }
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(Error::InvalidInput(format!("half width must be positive, got {half_width}")));
    }
    if n_nodes < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 nodes, got {n_nodes}")));
    }
    let direction = C64::from_polar(1.0, angle);
    let (x, w) = gauss_legendre(n_nodes);
    Ok(ContourPath {
        nodes: x.iter().map(|&s| direction * (s * half_width)).collect(),
        weights: w.iter().map(|&wi| wi * half_width).collect(),
        direction,
        max_tangent_angle: angle.abs(),
    })
}

/// `∫_C f(q) dq ≈ e^{i·angle} Σ wᵢ f(qᵢ)`.
pub fn contour_integrate<F>(f: F, path: &ContourPath) -> Result<C64>
where
    F: Fn(C64) -> C64,
{
    let mut acc = C64::new(0.0, 0.0);
    for (index, (&q, &w)) in path.nodes.iter().zip(&path.weights).enumerate() {
        let v = f(q);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        acc += w * v;
    }
    Ok(path.direction * acc)
}

/// Quadrature nodes used by [`smear`].
const SMEAR_NODES: usize = 256;

/// `∫_C f(q) δ_c^ε(q − q₀) dq`.
///
/// The contour keeps the direction of `path` but is moved to pass through
/// `q₀` and trimmed to the width of the Gaussian; for an entire `f` the value
/// is unchanged by this deformation, while a contour that misses `q₀` would
/// need exponentially large cancellations.
pub fn smear<F>(f: F, q0: C64, eps: C64, path: &ContourPath) -> Result<C64>
where
    F: Fn(C64) -> C64,
{
    let angle = path.angle();
    if path.max_tangent_angle >= FRAC_PI_4 || angle.abs() >= FRAC_PI_4 {
        return Err(Error::PathInvalid { max_tangent_angle: path.max_tangent_angle });
    }
    if eps == C64::new(0.0, 0.0) {
        return Err(Error::InvalidInput("ε must be non-zero".into()));
    }
    // decay rate of |exp(−s²e^{2iα}/4ε)| along the path
    let decay = (2.0 * angle - eps.arg()).cos();
    if decay <= 0.0 {
        return Err(Error::PathInvalid { max_tangent_angle: path.max_tangent_angle });
    }
    // exp(−37) ≈ 1e−16 at the ends
    let half_width = (4.0 * eps.norm() * 37.0 / decay).sqrt();
    let local = rotated_path(angle, half_width, SMEAR_NODES)?.translated(q0);
    contour_integrate(|q| f(q) * delta_eval(q - q0, eps).value, &local)
}
