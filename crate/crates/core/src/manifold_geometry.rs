//! Round spheres and flat tori, their geodesic volume densities, and the
//! concentrating bubbles η(x)ε^{−n/p}u₀(x/ε) built from the Euclidean extremal.

use serde::{Deserialize, Serialize};

use crate::constants::ln_entropy_best_constant;
use crate::error::{Error, Result};
use crate::profiles::{closed_form_ij, BubbleIntegrals, ExtremalSpec};
use crate::special_fn::{integrate, sphere_area, Accuracy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldKind {
    Sphere,
    Torus,
}

/// A homogeneous model manifold; bubbles are centred at the pole or origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldModel {
    pub kind: ManifoldKind,
    pub n: usize,
    /// Radius ρ of the sphere or side L of the torus.
    pub scale: f64,
    pub scalar_curvature: f64,
    pub volume: f64,
}

impl ManifoldModel {
    pub fn sphere(n: usize, radius: f64) -> Result<Self> {
        Self::check(n, radius)?;
        let nf = n as f64;
        Ok(Self {
            kind: ManifoldKind::Sphere,
            n,
            scale: radius,
            scalar_curvature: nf * (nf - 1.0) / (radius * radius),
            volume: sphere_area(n + 1)? * radius.powi(n as i32),
        })
    }

    pub fn torus(n: usize, side: f64) -> Result<Self> {
        Self::check(n, side)?;
        Ok(Self {
            kind: ManifoldKind::Torus,
            n,
            scale: side,
            scalar_curvature: 0.0,
            volume: side.powi(n as i32),
        })
    }

    pub fn new(kind: ManifoldKind, n: usize, scale: f64) -> Result<Self> {
        match kind {
            ManifoldKind::Sphere => Self::sphere(n, scale),
            ManifoldKind::Torus => Self::torus(n, scale),
        }
    }

    fn check(n: usize, scale: f64) -> Result<()> {
        if n < 2 {
            return Err(Error::domain(format!("model dimension must be >= 2, got {n}")));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::domain(format!("model scale must be positive, got {scale}")));
        }
        Ok(())
    }

    pub fn injectivity_radius(&self) -> f64 {
        match self.kind {
            ManifoldKind::Sphere => std::f64::consts::PI * self.scale,
            ManifoldKind::Torus => 0.5 * self.scale,
        }
    }

    /// min(1, injectivity radius / 2)
    pub fn default_delta(&self) -> f64 {
        (0.5 * self.injectivity_radius()).min(1.0)
    }
}

/// Exact Riemannian volume density along a geodesic of length r from the
/// centre, relative to the Euclidean r^{n−1}.
pub fn geodesic_density(model: &ManifoldModel, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::domain(format!("geodesic radius must be >= 0, got {r}")));
    }
    match model.kind {
        ManifoldKind::Torus => Ok(1.0),
        ManifoldKind::Sphere => {
            let rho = model.scale;
            if r >= std::f64::consts::PI * rho {
                return Err(Error::domain(format!("r = {r} is at or past the cut locus")));
            }
            if r == 0.0 {
                return Ok(1.0);
            }
            Ok((rho * (r / rho).sin() / r).powi(model.n as i32 - 1))
        }
    }
}

/// C¹ step: 1 on [0, δ/2], cubic Hermite down to 0 at δ. Returns (η, η′).
pub fn cutoff(r: f64, delta: f64) -> (f64, f64) {
    let half = 0.5 * delta;
    if r <= half {
        return (1.0, 0.0);
    }
    if r >= delta {
        return (0.0, 0.0);
    }
    let t = (r - half) / half;
    ((1.0 - t) * (1.0 - t) * (1.0 + 2.0 * t), -6.0 * t * (1.0 - t) / half)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleSpec {
    pub model: ManifoldModel,
    pub epsilon: f64,
    pub delta: f64,
    pub p: f64,
    pub base: ExtremalSpec,
}

impl BubbleSpec {
    /// Bubble on the normalized extremal with decay rate `b`.
    pub fn new(model: ManifoldModel, p: f64, b: f64, epsilon: f64, delta: f64) -> Result<Self> {
        let base = ExtremalSpec::new(model.n, p, b)?;
        let spec = Self { model, epsilon, delta, p, base };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && 2.0 * self.epsilon < self.delta) {
            return Err(Error::domain(format!("need 0 < 2ε < δ, got ε={}, δ={}", self.epsilon, self.delta)));
        }
        if !(self.delta < self.model.injectivity_radius()) {
            return Err(Error::domain(format!(
                "δ = {} must stay below the injectivity radius {}",
                self.delta,
                self.model.injectivity_radius()
            )));
        }
        if self.base.n != self.model.n || self.base.p != self.p {
            return Err(Error::domain("bubble base profile does not match model and exponent"));
        }
        Ok(())
    }
}

/// Integrals of a bubble. `entropy` and `grad_p` follow directly from the
/// ε-free parts `entropy_core = ∫u_ε^p ln u_ε^p + n ln ε · mass_p` and
/// `grad_core = ε^p ∫|∇u_ε|^p`, which stay O(1) as ε → 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleValues {
    pub epsilon: f64,
    pub mass_p: f64,
    pub entropy: f64,
    pub grad_p: f64,
    pub entropy_core: f64,
    pub grad_core: f64,
}

fn bubble_accuracy() -> Accuracy {
    Accuracy { rel_tol: 1e-13, abs_tol: 1e-15, max_subdivisions: 4000 }
}

/// Quadrature in the blown-up variable y = r/ε over the geodesic ball.
pub fn bubble_integrals(spec: &BubbleSpec) -> Result<BubbleValues> {
    spec.validate()?;
    let BubbleSpec { model, epsilon: eps, delta, p, base } = *spec;
    let n = model.n;
    let omega = sphere_area(n)?;
    let s = base.conjugate();
    // past b·y^s = 80/p the integrands are below e^{-80} of their peak
    let y_tail = (80.0 / (p * base.b)).powf(1.0 / s);
    let y_half = 0.5 * delta / eps;
    let y_end = (delta / eps).min(y_tail);
    let mut pieces = vec![0.0, y_half.min(y_end)];
    if y_end > y_half {
        pieces.push(y_end);
    }
    let weight =
        |y: f64| -> f64 { omega * y.powi(n as i32 - 1) * geodesic_density(&model, eps * y).unwrap_or(0.0) };
    let acc = bubble_accuracy();
    let integral = |f: &dyn Fn(f64) -> f64| -> Result<f64> {
        pieces.windows(2).map(|w| integrate(f, w[0], w[1], &acc)).sum()
    };
    let value = |y: f64| cutoff(eps * y, delta).0 * base.eval(y);
    let mass = integral(&|y| value(y).powf(p) * weight(y))?;
    let entropy_core = integral(&|y| {
        let vp = value(y).powf(p);
        if vp == 0.0 {
            0.0
        } else {
            vp * vp.ln() * weight(y)
        }
    })?;
    let grad_core = integral(&|y| {
        let (eta, deta) = cutoff(eps * y, delta);
        let d = eps * deta * base.eval(y) + eta * base.derivative(y);
        d.abs().powf(p) * weight(y)
    })?;
    Ok(BubbleValues {
        epsilon: eps,
        mass_p: mass,
        entropy: entropy_core - n as f64 * eps.ln() * mass,
        grad_p: grad_core * eps.powf(-p),
        entropy_core,
        grad_core,
    })
}

/// ε = 0.1δ·2^{−k/2} for k = 0..6, which stays inside [0.01δ, 0.1δ].
pub fn default_eps_grid(delta: f64) -> Vec<f64> {
    (0..7).map(|k| 0.1 * delta * 0.5f64.powf(0.5 * k as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFit {
    pub name: String,
    pub fitted: f64,
    pub std_err: f64,
    pub reference: f64,
    /// |fitted − reference| / |reference|, or None when the reference is 0.
    pub rel_dev: Option<f64>,
}

impl CoefficientFit {
    /// True when the fit lies within `k` standard errors of the reference.
    pub fn within_sigma(&self, k: f64) -> bool {
        (self.fitted - self.reference).abs() <= k * self.std_err
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub model: ManifoldModel,
    pub p: f64,
    pub b: f64,
    pub delta: f64,
    pub eps_grid: Vec<f64>,
    pub values: Vec<BubbleValues>,
    pub reference: BubbleIntegrals,
    /// ε² coefficient of the mass.
    pub mass: CoefficientFit,
    /// ε² coefficient of ε^p times the gradient energy.
    pub grad: CoefficientFit,
    /// ε² coefficient of the entropy.
    pub entropy: CoefficientFit,
    /// ε² ln ε coefficient of the entropy.
    pub entropy_log: CoefficientFit,
    /// Largest RMS residual over the three fits.
    pub residual_rms: f64,
    /// (smallest ε, largest ε) used in the fit
    pub window: (f64, f64),
    pub warning: Option<String>,
}

// Floor on the residual scale: the bubble integrals are good to about this
// relative accuracy, so a fit can never claim smaller noise.
const FIT_NOISE_FLOOR: f64 = 1e-12;

struct LeastSquares {
    coeffs: Vec<f64>,
    std_errs: Vec<f64>,
    rms: f64,
}

// Solves min ‖Xc − y‖ by normal equations with column scaling; standard
// errors use the residual variance floored at `floor`.
fn least_squares(columns: &[Vec<f64>], y: &[f64], floor: f64) -> Result<LeastSquares> {
    let k = columns.len();
    let m = y.len();
    if m <= k {
        return Err(Error::domain(format!("need more than {k} points for the fit, got {m}")));
    }
    let scale: Vec<f64> = columns.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut a = vec![vec![0.0; k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = (0..m).map(|t| columns[i][t] * columns[j][t]).sum::<f64>() / (scale[i] * scale[j]);
        }
        a[i][k] = (0..m).map(|t| columns[i][t] * y[t]).sum::<f64>() / scale[i];
    }
    let inv = invert(&a.iter().map(|row| row[..k].to_vec()).collect::<Vec<_>>())?;
    let coeffs: Vec<f64> =
        (0..k).map(|i| (0..k).map(|j| inv[i][j] * a[j][k]).sum::<f64>() / scale[i]).collect();
    let rss: f64 = (0..m)
        .map(|t| {
            let fit: f64 = (0..k).map(|i| coeffs[i] * columns[i][t]).sum();
            (y[t] - fit).powi(2)
        })
        .sum();
    let sigma = (rss / (m - k) as f64).sqrt().max(floor);
    let std_errs = (0..k).map(|i| sigma * inv[i][i].sqrt() / scale[i]).collect();
    Ok(LeastSquares { coeffs, std_errs, rms: (rss / m as f64).sqrt() })
}

// Gauss–Jordan with partial pivoting on a small dense matrix.
fn invert(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let k = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..k).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..k {
        let pivot =
            (col..k).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).expect("non-empty range");
        if m[pivot][col].abs() < 1e-14 {
            return Err(Error::DegenerateProfile("singular fit design".into()));
        }
        m.swap(col, pivot);
        let d = m[col][col];
        m[col].iter_mut().for_each(|x| *x /= d);
        for row in 0..k {
            if row != col {
                let f = m[row][col];
                if f != 0.0 {
                    let pivot_row = m[col].clone();
                    m[row].iter_mut().zip(&pivot_row).for_each(|(x, pr)| *x -= f * pr);
                }
            }
        }
    }
    Ok(m.into_iter().map(|row| row[k..].to_vec()).collect())
}

fn coefficient(name: &str, fitted: f64, std_err: f64, reference: f64) -> CoefficientFit {
    CoefficientFit {
        name: name.to_string(),
        fitted,
        std_err,
        reference,
        rel_dev: (reference != 0.0).then(|| ((fitted - reference) / reference).abs()),
    }
}

/// Fits the ε² (and, for the entropy, ε² ln ε) coefficients of the bubble
/// integrals after removing their ε-free leading terms, and compares them
/// with −(R/6n)J₁, −(R/6n)J₂, −(R/6n)J₃ and (R/6)J₁.
pub fn fit_expansion(
    model: &ManifoldModel,
    p: f64,
    b: f64,
    delta: f64,
    eps_grid: &[f64],
) -> Result<ExpansionReport> {
    if eps_grid.len() < 5 {
        return Err(Error::domain(format!("need at least 5 ε values, got {}", eps_grid.len())));
    }
    if eps_grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::domain("ε grid must be strictly decreasing"));
    }
    let (lo, hi) = (eps_grid[eps_grid.len() - 1], eps_grid[0]);
    let slack = 1.0 + 1e-12;
    if lo < 1e-2 * delta / slack || hi > 1e-1 * delta * slack {
        return Err(Error::domain(format!(
            "ε grid must lie in [0.01δ, 0.1δ] = [{}, {}]",
            1e-2 * delta,
            1e-1 * delta
        )));
    }
    let values = eps_grid
        .iter()
        .map(|&eps| bubble_integrals(&BubbleSpec::new(*model, p, b, eps, delta)?))
        .collect::<Result<Vec<_>>>()?;
    let base = ExtremalSpec::new(model.n, p, b)?;
    let ij = closed_form_ij(&base)?;
    let nf = model.n as f64;
    let r6n = model.scalar_curvature / (6.0 * nf);

    let e2: Vec<f64> = eps_grid.iter().map(|e| e * e).collect();
    let e4: Vec<f64> = e2.iter().map(|x| x * x).collect();
    let e2l: Vec<f64> = eps_grid.iter().map(|e| e * e * e.ln()).collect();
    let e4l: Vec<f64> = eps_grid.iter().map(|e| e.powi(4) * e.ln()).collect();

    let mass_y: Vec<f64> = values.iter().map(|v| v.mass_p - 1.0).collect();
    let grad_y: Vec<f64> = values.iter().map(|v| v.grad_core - ij.i2).collect();
    let ent_y: Vec<f64> = values.iter().map(|v| v.entropy + nf * v.epsilon.ln() - ij.i1).collect();

    let mass_fit = least_squares(&[e2.clone(), e4.clone()], &mass_y, FIT_NOISE_FLOOR)?;
    let grad_fit = least_squares(&[e2.clone(), e4.clone()], &grad_y, FIT_NOISE_FLOOR * ij.i2)?;
    let ent_floor = FIT_NOISE_FLOOR * values.iter().map(|v| v.entropy.abs()).fold(1.0, f64::max);
    let ent_fit = least_squares(&[e2, e2l, e4, e4l], &ent_y, ent_floor)?;

    let warning = (hi / lo < 10f64.sqrt())
        .then(|| format!("ε grid spans only {:.2} decades; the fit is ill-conditioned", (hi / lo).log10()));
    Ok(ExpansionReport {
        model: *model,
        p,
        b,
        delta,
        eps_grid: eps_grid.to_vec(),
        reference: ij,
        mass: coefficient("mass_eps2", mass_fit.coeffs[0], mass_fit.std_errs[0], -r6n * ij.j1),
        grad: coefficient("grad_eps2", grad_fit.coeffs[0], grad_fit.std_errs[0], -r6n * ij.j2),
        entropy: coefficient("entropy_eps2", ent_fit.coeffs[0], ent_fit.std_errs[0], -r6n * ij.j3),
        entropy_log: coefficient(
            "entropy_eps2_log",
            ent_fit.coeffs[1],
            ent_fit.std_errs[1],
            model.scalar_curvature / 6.0 * ij.j1,
        ),
        residual_rms: mass_fit.rms.max(grad_fit.rms).max(ent_fit.rms),
        window: (lo, hi),
        values,
        warning,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessPoint {
    pub epsilon: f64,
    /// LHS − RHS of the normalized entropy inequality at u_ε; positive means
    /// the inequality fails.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub violated: bool,
    /// Largest ε at which the inequality fails.
    pub eps_star: Option<f64>,
    /// Margin at the smallest ε tested.
    pub margin: f64,
    /// (n/p)·ln(𝒜₀(p)/A), the ε → 0 limit of the margin.
    pub asymptotic_margin: f64,
    pub points: Vec<WitnessPoint>,
}

/// ε = 0.1δ·2^{−k/2} down to 1e-4·δ.
pub fn witness_eps_grid(delta: f64) -> Vec<f64> {
    (0..=20).map(|k| 0.1 * delta * 0.5f64.powf(0.5 * k as f64)).collect()
}

/// Evaluates
/// ∫u^p ln u^p/‖u‖_p^p + (n/p − 1) ln ‖u‖_p^p ≤ (n/p) ln(A∫|∇u|^p + B∫u^p)
/// on bubbles u_ε and reports where it fails. The n ln ε terms of the two
/// sides cancel analytically before anything is subtracted.
pub fn lower_bound_witness(
    model: &ManifoldModel,
    p: f64,
    a: f64,
    b_const: f64,
    eps_grid: &[f64],
) -> Result<WitnessReport> {
    let nf = model.n as f64;
    if !(p > 1.0 && p < nf) {
        return Err(Error::domain(format!("need 1 < p < n, got p={p}, n={}", model.n)));
    }
    if !(a > 0.0) {
        return Err(Error::domain(format!("A must be positive, got {a}")));
    }
    let delta = model.default_delta();
    let mut grid = eps_grid.to_vec();
    grid.sort_by(|x, y| y.total_cmp(x));
    let mut points = Vec::with_capacity(grid.len());
    for &eps in &grid {
        let v = bubble_integrals(&BubbleSpec::new(*model, p, 1.0, eps, delta)?)?;
        let lhs = v.entropy_core / v.mass_p + (nf / p - 1.0) * v.mass_p.ln();
        let arg = a * v.grad_core + b_const * eps.powf(p) * v.mass_p;
        let margin = if arg > 0.0 { lhs - (nf / p) * arg.ln() } else { f64::INFINITY };
        points.push(WitnessPoint { epsilon: eps, margin });
    }
    let eps_star = points.iter().find(|pt| pt.margin > 0.0).map(|pt| pt.epsilon);
    Ok(WitnessReport {
        violated: eps_star.is_some(),
        eps_star,
        margin: points.last().map_or(f64::NAN, |pt| pt.margin),
        asymptotic_margin: (nf / p) * (ln_entropy_best_constant(model.n, p)? - a.ln()),
        points,
    })
}
