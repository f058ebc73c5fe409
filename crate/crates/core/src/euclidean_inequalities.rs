//! Direct numerical checks of the Euclidean entropy inequality, the Hölder
//! interpolation behind it, the log-norm derivative identity and the limit
//! equation Δ_p φ + Cφ^{p−1} = 𝒜₀(p)^{−1}(φ^{p−1} + (p/n)φ^{p−1} ln φ^p).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constants::{critical_exponent, entropy_best_constant};
use crate::error::{Error, Result};
use crate::profiles::{GridSpec, RadialProfile, DEFAULT_R_MIN, TAIL_CUTOFF};

/// Allowed drift of ‖u‖_p from 1 before a profile counts as unnormalized.
pub const NORMALIZATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Normalization {
    /// Divide by ‖u‖_p first.
    #[default]
    Renormalize,
    /// Reject profiles off the unit L^p sphere.
    Strict,
}

fn check_exponent(n: usize, p: f64) -> Result<()> {
    if !(p > 1.0 && p < n as f64) {
        return Err(Error::domain(format!("need 1 < p < n, got p={p}, n={n}")));
    }
    Ok(())
}

fn unit_sphere(u: &RadialProfile, p: f64, mode: Normalization) -> Result<RadialProfile> {
    let norm = u.lp_norm(p);
    if norm == 0.0 {
        return Err(Error::ZeroProfile);
    }
    if (norm - 1.0).abs() <= NORMALIZATION_TOL {
        return Ok(u.clone());
    }
    match mode {
        Normalization::Renormalize => u.scaled(1.0 / norm),
        Normalization::Strict => Err(Error::Normalization { norm }),
    }
}

/// (n/p)·ln(𝒜₀(p)∫|∇u|^p) − ∫|u|^p ln|u|^p on the unit L^p sphere.
///
/// Nonnegative for every admissible u, zero on the extremal family.
pub fn entropy_deficit(u: &RadialProfile, p: f64, mode: Normalization) -> Result<f64> {
    let n = u.dimension();
    check_exponent(n, p)?;
    let v = unit_sphere(u, p, mode)?;
    let a0 = entropy_best_constant(n, p)?;
    let grad = v.grad_lp_norm_p(p)?;
    Ok((n as f64 / p) * (a0 * grad).ln() - v.entropy_integral(p))
}

/// ln(‖u‖_q/‖u‖_p) + (1−α)·ln(‖u‖_p/‖u‖_{p*}), which Hölder makes ≤ 0.
pub fn holder_log_check(u: &RadialProfile, n: usize, p: f64, q: f64) -> Result<f64> {
    check_exponent(n, p)?;
    let p_star = critical_exponent(n, p);
    if !(q >= p && q <= p_star) {
        return Err(Error::domain(format!("need p <= q <= p* = {p_star}, got q={q}")));
    }
    if u.is_zero() {
        return Err(Error::ZeroProfile);
    }
    let nf = n as f64;
    // Hölder weight, exact at both endpoints
    let alpha = if q == p {
        1.0
    } else if q == p_star {
        0.0
    } else {
        (nf * p - nf * q + p * q) / (p * q)
    };
    let ln_p = u.lp_norm(p).ln();
    let ln_q = if q == p { ln_p } else { u.lp_norm(q).ln() };
    let ln_star = u.lp_norm(p_star).ln();
    Ok((ln_q - ln_p) + (1.0 - alpha) * (ln_p - ln_star))
}

/// Slack (n/p)·ln((∫|u|^{p*})^{p/p*}) − ∫|u|^p ln|u|^p of the entropy bound
/// obtained by differentiating the Hölder inequality at q = p.
pub fn embedding_entropy_check(u: &RadialProfile, n: usize, p: f64, mode: Normalization) -> Result<f64> {
    check_exponent(n, p)?;
    let v = unit_sphere(u, p, mode)?;
    let p_star = critical_exponent(n, p);
    let rhs = (n as f64 / p) * (p / p_star) * v.power_integral(p_star).ln();
    Ok(rhs - v.entropy_integral(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormDerivative {
    pub dq: f64,
    /// (1/dq)·ln(‖u‖_p/‖u‖_{p−dq})
    pub fd: f64,
    /// (1/p)∫(|u|^p/‖u‖_p^p)·ln(|u|/‖u‖_p)
    pub exact: f64,
    pub err: f64,
}

/// Difference quotient of q ↦ ln‖u‖_q at q = p against its closed form.
pub fn log_norm_derivative(u: &RadialProfile, p: f64, dq: f64) -> Result<LogNormDerivative> {
    if !(dq > 0.0 && dq < p - 1.0) {
        return Err(Error::domain(format!("need 0 < dq < p - 1, got dq={dq}, p={p}")));
    }
    if u.is_zero() {
        return Err(Error::ZeroProfile);
    }
    let norm_p = u.lp_norm(p);
    let fd = (norm_p / u.lp_norm(p - dq)).ln() / dq;
    let mass = norm_p.powf(p);
    let exact =
        u.integrate_with(|v, _| if v == 0.0 { 0.0 } else { v.powf(p) / mass * (v / norm_p).ln() }) / p;
    Ok(LogNormDerivative { dq, fd, exact, err: (fd - exact).abs() })
}

/// How the scalar C of the limit equation is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LimitCoefficient {
    Fixed(f64),
    /// One-dimensional least squares over the test basis.
    Fit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitResidual {
    /// ‖R‖₂ over the test basis divided by the size of the largest term.
    pub relative: f64,
    pub absolute: f64,
    pub c: f64,
    pub tests: usize,
}

/// Number of bump test functions in the weak residual.
pub const LIMIT_TEST_FUNCTIONS: usize = 12;

// C² bump (1 − ((r − c)/w)²)³ on |r − c| < w and its derivative.
fn bump(r: f64, center: f64, width: f64) -> (f64, f64) {
    let x = (r - center) / width;
    if x.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let base = 1.0 - x * x;
    (base.powi(3), -6.0 * x * base * base / width)
}

/// Weak-form residual of the limit equation against radial bump functions:
/// R_k = ∫|u′|^{p−2}u′ψ_k′ + C∫u^{p−1}ψ_k − 𝒜₀(p)^{−1}∫(u^{p−1} + (p/n)u^{p−1}ln u^p)ψ_k.
pub fn limit_pde_residual(u: &RadialProfile, p: f64, coefficient: LimitCoefficient) -> Result<LimitResidual> {
    let n = u.dimension();
    check_exponent(n, p)?;
    let vals = u.values();
    let len = vals.len();
    if len < 3 {
        return Err(Error::GridTooCoarse(format!("{len} nodes")));
    }
    if let Some(i) = (1..len - 1).find(|&i| vals[i] <= 0.0) {
        return Err(Error::DegenerateProfile(format!("interior zero at r = {}", u.radii()[i])));
    }
    let peak = vals.iter().cloned().fold(0.0, f64::max);
    // test functions live where u is still resolvable
    let extent =
        u.radii().iter().zip(vals).filter(|(_, &v)| v >= 1e-8 * peak).map(|(&r, _)| r).fold(0.0, f64::max);
    let inv_a0 = 1.0 / entropy_best_constant(n, p)?;
    let du = u.derivative();
    let k = LIMIT_TEST_FUNCTIONS;
    let width = 2.0 * extent / (k as f64 + 1.0);
    let mut flux = vec![0.0; k];
    let mut mass = vec![0.0; k];
    let mut source = vec![0.0; k];
    for (i, (&r, &m)) in u.radii().iter().zip(u.measure()).enumerate() {
        let v = vals[i];
        let d = du[i];
        let flux_density = d.signum() * d.abs().powf(p - 1.0);
        let vp1 = if v > 0.0 { v.powf(p - 1.0) } else { 0.0 };
        let log_term = if v > 0.0 { vp1 * (1.0 + (p / n as f64) * p * v.ln()) } else { 0.0 };
        for j in 0..k {
            let center = extent * (j as f64 + 1.0) / (k as f64 + 1.0);
            let (psi, dpsi) = bump(r, center, width);
            if psi == 0.0 && dpsi == 0.0 {
                continue;
            }
            flux[j] += m * flux_density * dpsi;
            mass[j] += m * vp1 * psi;
            source[j] += m * inv_a0 * log_term * psi;
        }
    }
    let c = match coefficient {
        LimitCoefficient::Fixed(c) => c,
        LimitCoefficient::Fit => {
            let num: f64 = (0..k).map(|j| mass[j] * (source[j] - flux[j])).sum();
            let den: f64 = mass.iter().map(|m| m * m).sum();
            if den == 0.0 {
                return Err(Error::DegenerateProfile("test functions see no mass".into()));
            }
            num / den
        }
    };
    let norm = |xs: &[f64]| xs.iter().map(|x| x * x).sum::<f64>().sqrt();
    let residual: Vec<f64> = (0..k).map(|j| flux[j] + c * mass[j] - source[j]).collect();
    let absolute = norm(&residual);
    let scale = norm(&flux).max(norm(&source)).max(c.abs() * norm(&mass));
    Ok(LimitResidual { relative: absolute / scale, absolute, c, tests: k })
}

/// Result of scanning the extremal family for the member that best solves
/// the limit equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitDilationFit {
    pub b: f64,
    pub residual: LimitResidual,
}

/// Scans ln b over [−6, 6], then refines by golden section, minimizing the
/// fitted-C residual of the normalized extremal a·e^{−b r^{p′}}.
pub fn fit_limit_dilation(n: usize, p: f64) -> Result<LimitDilationFit> {
    check_exponent(n, p)?;
    let eval = |ln_b: f64| -> Result<f64> {
        let (u, _) = crate::profiles::extremal_profile(n, p, ln_b.exp())?;
        Ok(limit_pde_residual(&u, p, LimitCoefficient::Fit)?.relative)
    };
    let steps = 48;
    let (lo, hi) = (-6.0, 6.0);
    let dx = (hi - lo) / steps as f64;
    let mut best = (lo, f64::INFINITY);
    for i in 0..=steps {
        let x = lo + dx * i as f64;
        let f = eval(x)?;
        if f < best.1 {
            best = (x, f);
        }
    }
    let (mut a, mut b) = (best.0 - dx, best.0 + dx);
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - golden * (b - a);
    let mut x2 = a + golden * (b - a);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    while b - a > 1e-9 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - golden * (b - a);
            f1 = eval(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + golden * (b - a);
            f2 = eval(x2)?;
        }
    }
    let ln_b = 0.5 * (a + b);
    let (u, _) = crate::profiles::extremal_profile(n, p, ln_b.exp())?;
    Ok(LimitDilationFit { b: ln_b.exp(), residual: limit_pde_residual(&u, p, LimitCoefficient::Fit)? })
}

/// Parameters of a two-term mixture c₁e^{−b₁r^{s₁}} + c₂e^{−b₂r^{s₂}}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureTrial {
    pub terms: [(f64, f64, f64); 2],
}

impl MixtureTrial {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut term = || (rng.gen_range(0.1..1.0), rng.gen_range(0.3..3.0), rng.gen_range(1.0..4.0));
        Self { terms: [term(), term()] }
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.terms.iter().map(|&(c, b, s)| c * (-b * r.powf(s)).exp()).sum()
    }

    pub fn sample(&self, n: usize) -> Result<RadialProfile> {
        let r_max = self
            .terms
            .iter()
            .map(|&(c, b, s)| ((c / TAIL_CUTOFF).ln() / b).powf(1.0 / s))
            .fold(0.0, f64::max);
        let r_min = self
            .terms
            .iter()
            .map(|&(_, b, s)| DEFAULT_R_MIN * b.powf(-1.0 / s))
            .fold(f64::INFINITY, f64::min);
        RadialProfile::from_fn(n, GridSpec::new(r_min, r_max), |r| self.eval(r))
    }
}
