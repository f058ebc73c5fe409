//! Radial functions on ℝⁿ sampled on a geometric grid.
//!
//! A geometric grid r_i = r_min·e^{i h} is a uniform grid in t = ln r, so
//! every radial integral ∫ f(r) r^{n−1} dr becomes ∫ f(e^t) e^{nt} dt over a
//! uniform mesh. Integrals use the trapezoid rule in t with two levels of
//! Richardson extrapolation (composite Boole weights); derivatives use
//! centered differences in t, dropping to one-sided stencils at the ends.
//! [`QuadratureRule::Trapezoid`] keeps the plain second-order scheme, which
//! is what the Richardson convergence checks measure.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special_fn::{ln_stretched_exp_moment, sphere_area};

/// Default smallest radius of the geometric grid.
pub const DEFAULT_R_MIN: f64 = 1e-6;
/// Default node count (a multiple of four plus one, as Boole weights need).
pub const DEFAULT_NODES: usize = 2049;
/// Relative amplitude below which a profile's tail is dropped.
pub const TAIL_CUTOFF: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum QuadratureRule {
    /// Trapezoid in r with 3-point centered differences; second order.
    Trapezoid,
    /// Trapezoid in ln r extrapolated twice, with 7-point centered differences.
    #[default]
    Romberg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub nodes: usize,
    pub rule: QuadratureRule,
}

impl GridSpec {
    pub fn new(r_min: f64, r_max: f64) -> Self {
        Self { r_min, r_max, nodes: DEFAULT_NODES, rule: QuadratureRule::Romberg }
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn with_rule(mut self, rule: QuadratureRule) -> Self {
        self.rule = rule;
        self
    }

    /// Same range with the log step halved.
    pub fn refined(self) -> Self {
        Self { nodes: 2 * self.nodes - 1, ..self }
    }

    fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_max > self.r_min) || !self.r_max.is_finite() {
            return Err(Error::domain(format!(
                "grid needs 0 < r_min < r_max, got [{}, {}]",
                self.r_min, self.r_max
            )));
        }
        if self.nodes < 3 {
            return Err(Error::GridTooCoarse(format!("{} nodes, need at least 3", self.nodes)));
        }
        if self.rule == QuadratureRule::Romberg && !(self.nodes - 1).is_multiple_of(4) {
            return Err(Error::GridTooCoarse(format!(
                "Romberg weights need nodes = 4k+1, got {}",
                self.nodes
            )));
        }
        Ok(())
    }
}

/// dr-weights on the geometric grid: ∫ f dr ≈ Σ w_i f(r_i).
fn dr_weights(radii: &[f64], h: f64, rule: QuadratureRule) -> Vec<f64> {
    let m = radii.len();
    match rule {
        QuadratureRule::Trapezoid => {
            let mut w = vec![0.0; m];
            for i in 0..m - 1 {
                let half = 0.5 * (radii[i + 1] - radii[i]);
                w[i] += half;
                w[i + 1] += half;
            }
            w
        }
        QuadratureRule::Romberg => {
            // composite Boole in t; dr = r dt
            let mut c = vec![0.0; m];
            for block in 0..(m - 1) / 4 {
                let i = 4 * block;
                for (k, coef) in [7.0, 32.0, 12.0, 32.0, 7.0].iter().enumerate() {
                    c[i + k] += 2.0 * coef / 45.0;
                }
            }
            c.iter().zip(radii).map(|(ci, ri)| ci * h * ri).collect()
        }
    }
}

/// d/dt of samples on a uniform t-grid with spacing h.
fn log_derivative(values: &[f64], h: f64, rule: QuadratureRule) -> Vec<f64> {
    let m = values.len();
    let u = values;
    let mut d = vec![0.0; m];
    let wide = matches!(rule, QuadratureRule::Romberg);
    for i in 0..m {
        d[i] = if i == 0 {
            (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
        } else if i == m - 1 {
            (3.0 * u[m - 1] - 4.0 * u[m - 2] + u[m - 3]) / (2.0 * h)
        } else if wide && i >= 3 && i + 3 < m {
            (-u[i - 3] + 9.0 * u[i - 2] - 45.0 * u[i - 1] + 45.0 * u[i + 1] - 9.0 * u[i + 2] + u[i + 3])
                / (60.0 * h)
        } else if wide && i >= 2 && i + 2 < m {
            (u[i - 2] - 8.0 * u[i - 1] + 8.0 * u[i + 1] - u[i + 2]) / (12.0 * h)
        } else {
            (u[i + 1] - u[i - 1]) / (2.0 * h)
        };
    }
    d
}

/// Nonnegative radial function on ℝⁿ with its quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    n: usize,
    radii: Vec<f64>,
    values: Vec<f64>,
    weights: Vec<f64>,
    log_step: f64,
    rule: QuadratureRule,
    /// ω_{n−1} r_i^{n−1} w_i
    measure: Vec<f64>,
}

impl RadialProfile {
    /// Samples `f` on the grid described by `spec`.
    pub fn from_fn<F: Fn(f64) -> f64>(n: usize, spec: GridSpec, f: F) -> Result<Self> {
        spec.validate()?;
        let h = (spec.r_max / spec.r_min).ln() / (spec.nodes - 1) as f64;
        let radii: Vec<f64> = (0..spec.nodes).map(|i| spec.r_min * (i as f64 * h).exp()).collect();
        let values = radii.iter().map(|&r| f(r)).collect();
        Self::from_parts(n, radii, values, h, spec.rule)
    }

    fn from_parts(
        n: usize,
        radii: Vec<f64>,
        values: Vec<f64>,
        log_step: f64,
        rule: QuadratureRule,
    ) -> Result<Self> {
        if n < 1 {
            return Err(Error::domain("profile dimension must be >= 1"));
        }
        if let Some(bad) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::domain(format!("profile values must be finite and >= 0, got {bad}")));
        }
        let omega = sphere_area(n)?;
        let weights = dr_weights(&radii, log_step, rule);
        let measure = radii.iter().zip(&weights).map(|(r, w)| omega * r.powi(n as i32 - 1) * w).collect();
        Ok(Self { n, radii, values, weights, log_step, rule, measure })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_step(&self) -> f64 {
        self.log_step
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// ω_{n−1} r_i^{n−1} w_i, the volume attached to node i.
    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    /// Same grid, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.len() {
            return Err(Error::domain("value count does not match the grid"));
        }
        if let Some(bad) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::domain(format!("profile values must be finite and >= 0, got {bad}")));
        }
        Ok(Self { values, ..self.clone() })
    }

    /// ∫ F(u(|x|), |x|) dx over ℝⁿ.
    pub fn integrate_with<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        self.measure.iter().zip(&self.values).zip(&self.radii).map(|((m, &u), &r)| m * f(u, r)).sum()
    }

    /// ∫ |u|^p dx.
    pub fn power_integral(&self, p: f64) -> f64 {
        self.integrate_with(|u, _| pow_or_zero(u, p))
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        self.power_integral(p).powf(1.0 / p)
    }

    /// u′(r_i) from finite differences.
    pub fn derivative(&self) -> Vec<f64> {
        log_derivative(&self.values, self.log_step, self.rule)
            .into_iter()
            .zip(&self.radii)
            .map(|(d, r)| d / r)
            .collect()
    }

    /// ∫ |∇u|^p dx with a finite-difference radial derivative.
    pub fn grad_lp_norm_p(&self, p: f64) -> Result<f64> {
        self.grad_moment(p, 0)
    }

    /// ∫ |∇u|^p |x|^k dx.
    pub fn grad_moment(&self, p: f64, k: u32) -> Result<f64> {
        if self.len() < 3 {
            return Err(Error::GridTooCoarse(format!("{} nodes, need at least 3", self.len())));
        }
        let du = self.derivative();
        Ok(self
            .measure
            .iter()
            .zip(&du)
            .zip(&self.radii)
            .map(|((m, d), r)| m * pow_or_zero(d.abs(), p) * r.powi(k as i32))
            .sum())
    }

    /// ∫ |u|^p ln(|u|^p) dx with 0·ln 0 = 0.
    pub fn entropy_integral(&self, p: f64) -> f64 {
        self.entropy_moment(p, 0)
    }

    /// ∫ |u|^p ln(|u|^p) |x|^k dx.
    pub fn entropy_moment(&self, p: f64, k: u32) -> f64 {
        self.integrate_with(|u, r| {
            if u == 0.0 {
                0.0
            } else {
                let up = u.powf(p);
                up * up.ln() * r.powi(k as i32)
            }
        })
    }

    /// ∫ |u|^p |x|^k dx.
    pub fn weighted_moment(&self, p: f64, k: u32) -> f64 {
        self.integrate_with(|u, r| pow_or_zero(u, p) * r.powi(k as i32))
    }

    /// c·u.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        self.with_values(self.values.iter().map(|v| v * c).collect())
    }

    /// u / ‖u‖_p.
    pub fn normalized(&self, p: f64) -> Result<Self> {
        let norm = self.lp_norm(p);
        if !(norm > 0.0) {
            return Err(Error::ZeroProfile);
        }
        self.scaled(1.0 / norm)
    }

    /// λ^{n/p} u(λ r), which keeps ‖·‖_p fixed; the grid is carried along.
    pub fn dilated(&self, lambda: f64, p: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::domain("dilation factor must be positive"));
        }
        let amp = lambda.powf(self.n as f64 / p);
        let radii = self.radii.iter().map(|r| r / lambda).collect();
        let values = self.values.iter().map(|v| v * amp).collect();
        Self::from_parts(self.n, radii, values, self.log_step, self.rule)
    }

    /// Two-column CSV with header `r,u`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,u\n");
        for (r, u) in self.radii.iter().zip(&self.values) {
            let _ = writeln!(out, "{r},{u}");
        }
        out
    }
}

fn pow_or_zero(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.powf(p)
    }
}

/// Normalized member a·e^{−b r^{p/(p−1)}} of the extremal family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremalSpec {
    pub n: usize,
    pub p: f64,
    pub b: f64,
    pub a: f64,
}

impl ExtremalSpec {
    pub fn new(n: usize, p: f64, b: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::domain(format!("extremal profile needs p > 1, got {p}")));
        }
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::domain(format!("extremal profile needs b > 0, got {b}")));
        }
        let s = p / (p - 1.0);
        let ln_mass = sphere_area(n)?.ln() + ln_stretched_exp_moment(n as f64 - 1.0, s, p * b)?;
        Ok(Self { n, p, b, a: (-ln_mass / p).exp() })
    }

    /// Exponent p′ = p/(p−1).
    pub fn conjugate(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.a * (-self.b * r.powf(self.conjugate())).exp()
    }

    /// Analytic u′(r); used by the closed-form route only.
    pub fn derivative(&self, r: f64) -> f64 {
        let s = self.conjugate();
        -self.b * s * r.powf(s - 1.0) * self.eval(r)
    }

    /// Radius where the profile falls below [`TAIL_CUTOFF`].
    pub fn cutoff_radius(&self) -> f64 {
        ((self.a.ln() - TAIL_CUTOFF.ln()) / self.b).powf(1.0 / self.conjugate())
    }

    pub fn default_grid(&self) -> GridSpec {
        GridSpec::new(DEFAULT_R_MIN * self.b.powf(-1.0 / self.conjugate()), self.cutoff_radius())
    }

    pub fn sample(&self, spec: GridSpec) -> Result<RadialProfile> {
        RadialProfile::from_fn(self.n, spec, |r| self.eval(r))
    }
}

/// Normalized extremal on its default grid.
pub fn extremal_profile(n: usize, p: f64, b: f64) -> Result<(RadialProfile, ExtremalSpec)> {
    let spec = ExtremalSpec::new(n, p, b)?;
    Ok((spec.sample(spec.default_grid())?, spec))
}

/// I₁, I₂ and J₁, J₂, J₃ of a normalized extremal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleIntegrals {
    /// ∫ u^p ln u^p
    pub i1: f64,
    /// ∫ |∇u|^p
    pub i2: f64,
    /// ∫ u^p |x|²
    pub j1: f64,
    /// ∫ |∇u|^p |x|²
    pub j2: f64,
    /// ∫ u^p ln(u^p) |x|²
    pub j3: f64,
}

impl BubbleIntegrals {
    fn named(&self) -> [(&'static str, f64); 5] {
        [("I1", self.i1), ("I2", self.i2), ("J1", self.j1), ("J2", self.j2), ("J3", self.j3)]
    }
}

/// Both evaluation routes of [`compute_ij`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IjReport {
    pub spec: ExtremalSpec,
    pub quadrature: BubbleIntegrals,
    pub closed_form: BubbleIntegrals,
    pub max_rel_diff: f64,
}

/// Relative agreement demanded between the two routes.
pub const IJ_TOLERANCE: f64 = 1e-8;

/// Γ-function reduction of the five integrals.
pub fn closed_form_ij(spec: &ExtremalSpec) -> Result<BubbleIntegrals> {
    let n = spec.n as f64;
    let (p, b) = (spec.p, spec.b);
    let s = spec.conjugate();
    let c = p * b;
    let omega_ap = sphere_area(spec.n)? * spec.a.powf(p);
    let moment = |m: f64| -> Result<f64> { Ok(omega_ap * ln_stretched_exp_moment(m, s, c)?.exp()) };
    let ln_a = spec.a.ln();
    let grad_factor = (b * s).powf(p);
    let j1 = moment(n + 1.0)?;
    let m_s = moment(n - 1.0 + s)?;
    let m_s2 = moment(n + 1.0 + s)?;
    Ok(BubbleIntegrals {
        i1: p * ln_a - p * b * m_s,
        i2: grad_factor * m_s,
        j1,
        j2: grad_factor * m_s2,
        j3: p * ln_a * j1 - p * b * m_s2,
    })
}

/// Quadrature route on a sampled profile (finite-difference gradients).
pub fn quadrature_ij(u: &RadialProfile, p: f64) -> Result<BubbleIntegrals> {
    Ok(BubbleIntegrals {
        i1: u.entropy_integral(p),
        i2: u.grad_lp_norm_p(p)?,
        j1: u.weighted_moment(p, 2),
        j2: u.grad_moment(p, 2)?,
        j3: u.entropy_moment(p, 2),
    })
}

/// Computes I₁, I₂, J₁, J₂, J₃ for the normalized extremal by quadrature and
/// by closed form, failing if any pair differs by more than [`IJ_TOLERANCE`].
pub fn compute_ij(n: usize, p: f64, b: f64) -> Result<IjReport> {
    let (u, spec) = extremal_profile(n, p, b)?;
    let quadrature = quadrature_ij(&u, p)?;
    let closed_form = closed_form_ij(&spec)?;
    let mut max_rel_diff: f64 = 0.0;
    for ((name, q), (_, c)) in quadrature.named().into_iter().zip(closed_form.named()) {
        let rel = (q - c).abs() / c.abs().max(f64::MIN_POSITIVE);
        if !(rel <= IJ_TOLERANCE) {
            return Err(Error::OracleDisagreement { name, quadrature: q, closed_form: c, rel });
        }
        max_rel_diff = max_rel_diff.max(rel);
    }
    Ok(IjReport { spec, quadrature, closed_form, max_rel_diff })
}
