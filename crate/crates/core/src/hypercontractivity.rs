//! Heat-semigroup integrals built from the entropy bound with
//! v(s) = λs²/(s−1) − B/A and φ(x) = (n/2)·ln(Ax + B):
//! t = ∫ φ′(v(s))/(4(s−1)) ds and m = ∫ (φ(v(s)) − v(s)φ′(v(s)))/s² ds,
//! plus the flat-torus heat kernel diagonal.

use serde::{Deserialize, Serialize};

use crate::constants::second_constant_lower_bound;
use crate::error::{Error, Result};
use crate::manifold_geometry::ManifoldModel;
use crate::special_fn::{integrate, Accuracy};

/// Quadrature results must agree with the closed forms to this relative level.
pub const CROSS_CHECK_TOL: f64 = 1e-10;
/// Default ultracontractivity slack as a fraction of |m|.
pub const DEFAULT_SLACK: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HcReport {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
    pub p_from: f64,
    /// None stands for q = ∞.
    pub q_to: Option<f64>,
    pub t: f64,
    pub t_closed_form: f64,
    pub m: f64,
    pub m_closed_form: f64,
    /// −(n/2)ln(4πt) + (2B/(3A))t, reported for the (1, ∞) pair only.
    pub bound_rhs: Option<f64>,
    pub pass: Option<bool>,
}

// σ-antiderivative of (2/n)·[ln(Aλ) − ln σ − ln(1−σ) − 1 + (B/(Aλ))σ(1−σ)]
fn m_antiderivative(x: f64, ln_al: f64, ratio: f64) -> f64 {
    let xlnx = |y: f64| if y == 0.0 { 0.0 } else { y * y.ln() };
    (ln_al - 1.0) * x + (x - xlnx(x)) + (xlnx(1.0 - x) + x) + ratio * (x * x / 2.0 - x.powi(3) / 3.0)
}

fn sigma_range(p_from: f64, q_to: f64) -> Result<(f64, f64)> {
    if !(p_from >= 1.0 && q_to > p_from) || p_from.is_infinite() {
        return Err(Error::domain(format!("need 1 <= p < q, got p={p_from}, q={q_to}")));
    }
    let lo = if q_to.is_infinite() { 0.0 } else { 1.0 / q_to };
    Ok((lo, 1.0 / p_from))
}

/// Smallest λ for which v(s) ≥ 0 on [p_from, q_to].
pub fn minimal_lambda(a: f64, b: f64, p_from: f64, q_to: f64) -> Result<f64> {
    let (lo, hi) = sigma_range(p_from, q_to)?;
    let peak = if lo <= 0.5 && 0.5 <= hi {
        0.25
    } else {
        [lo, hi].iter().map(|s| s * (1.0 - s)).fold(0.0, f64::max)
    };
    Ok(b / a * peak)
}

/// t and m by adaptive quadrature in σ = 1/s, checked against their closed forms.
pub fn bakry_integrals(n: usize, a: f64, b: f64, lambda: f64, p_from: f64, q_to: f64) -> Result<HcReport> {
    if n < 1 {
        return Err(Error::domain("dimension must be >= 1"));
    }
    if !(a > 0.0 && b >= 0.0 && lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!("need A > 0, B >= 0, λ > 0, got A={a}, B={b}, λ={lambda}")));
    }
    let (lo, hi) = sigma_range(p_from, q_to)?;
    let lambda_min = minimal_lambda(a, b, p_from, q_to)?;
    if lambda < lambda_min {
        return Err(Error::domain(format!("v(s) < 0 on the range: need λ >= {lambda_min}, got {lambda}")));
    }
    let nf = n as f64;
    // s²/(s−1) = 1/(σ(1−σ))
    let v = |sig: f64| lambda / (sig * (1.0 - sig)) - b / a;
    let phi = |x: f64| 0.5 * nf * (a * x + b).ln();
    let dphi = |x: f64| 0.5 * nf * a / (a * x + b);
    let acc = Accuracy { rel_tol: 1e-13, abs_tol: 1e-300, max_subdivisions: 4000 };
    let t = integrate(|sig| dphi(v(sig)) / (4.0 * sig * (1.0 - sig)), lo, hi, &acc)?;
    let m = integrate(
        |sig| {
            let x = v(sig);
            phi(x) - x * dphi(x)
        },
        lo,
        hi,
        &acc,
    )?;
    let t_closed = nf / (8.0 * lambda) * (hi - lo);
    let ln_al = (a * lambda).ln();
    let ratio = b / (a * lambda);
    let m_closed = 0.5 * nf * (m_antiderivative(hi, ln_al, ratio) - m_antiderivative(lo, ln_al, ratio));
    let t_dev = (t - t_closed).abs() / t_closed;
    let m_dev = (m - m_closed).abs() / m_closed.abs().max(1.0);
    if t_dev > CROSS_CHECK_TOL || m_dev > CROSS_CHECK_TOL {
        return Err(Error::OracleDisagreement {
            name: if t_dev > CROSS_CHECK_TOL { "bakry_t" } else { "bakry_m" },
            quadrature: if t_dev > CROSS_CHECK_TOL { t } else { m },
            closed_form: if t_dev > CROSS_CHECK_TOL { t_closed } else { m_closed },
            rel: t_dev.max(m_dev),
        });
    }
    let full_range = p_from == 1.0 && q_to.is_infinite();
    let bound_rhs = full_range.then(|| ultracontractive_exponent(nf, a, b, t));
    Ok(HcReport {
        n,
        a,
        b,
        lambda,
        p_from,
        q_to: q_to.is_finite().then_some(q_to),
        t,
        t_closed_form: t_closed,
        m,
        m_closed_form: m_closed,
        bound_rhs,
        pass: bound_rhs.map(|r| m <= r + DEFAULT_SLACK * m.abs()),
    })
}

// ln of (4πt)^{−n/2}·e^{(2B/(3A))t}
fn ultracontractive_exponent(n: f64, a: f64, b: f64, t: f64) -> f64 {
    -0.5 * n * (4.0 * std::f64::consts::PI * t).ln() + 2.0 * b / (3.0 * a) * t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Pass,
    Fail,
    /// t lies beyond (n/2)(A/B), where the bound is not claimed.
    OutOfRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UltraRow {
    pub lambda: f64,
    pub t: f64,
    pub m: Option<f64>,
    pub bound_rhs: f64,
    /// bound_rhs + slack − m
    pub margin: Option<f64>,
    pub status: RowStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UltraReport {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub slack: f64,
    /// (n/2)(A/B); infinite when B = 0.
    pub t_max: Option<f64>,
    pub rows: Vec<UltraRow>,
}

impl UltraReport {
    pub fn all_in_range_pass(&self) -> bool {
        self.rows.iter().all(|r| r.status != RowStatus::Fail)
    }
}

/// For each λ, m from the (1, ∞) integrals against
/// −(n/2)ln(4πt) + (2B/(3A))t, with `slack` a fraction of |m|.
pub fn ultracontractivity_check(
    n: usize,
    a: f64,
    b: f64,
    lambdas: &[f64],
    slack: f64,
) -> Result<UltraReport> {
    if !(slack >= 0.0) {
        return Err(Error::domain(format!("slack must be >= 0, got {slack}")));
    }
    let nf = n as f64;
    let t_max = (b > 0.0).then(|| 0.5 * nf * a / b);
    let rows = lambdas
        .iter()
        .map(|&lambda| {
            if !(lambda > 0.0) {
                return Err(Error::domain(format!("λ must be positive, got {lambda}")));
            }
            let t = nf / (8.0 * lambda);
            let bound_rhs = ultracontractive_exponent(nf, a, b, t);
            if t_max.is_some_and(|tm| t > tm) {
                return Ok(UltraRow {
                    lambda,
                    t,
                    m: None,
                    bound_rhs,
                    margin: None,
                    status: RowStatus::OutOfRange,
                });
            }
            let rep = bakry_integrals(n, a, b, lambda, 1.0, f64::INFINITY)?;
            let margin = bound_rhs + slack * rep.m.abs() - rep.m;
            Ok(UltraRow {
                lambda,
                t: rep.t,
                m: Some(rep.m),
                bound_rhs,
                margin: Some(margin),
                status: if margin >= 0.0 { RowStatus::Pass } else { RowStatus::Fail },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UltraReport { n, a, b, slack, t_max, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatNorm {
    pub n: usize,
    pub side: f64,
    pub t: f64,
    /// k_t(0,0) = ‖P_t‖_{1,∞}
    pub value: f64,
    /// k_t(0,0)·(4πt)^{n/2}
    pub ratio: f64,
}

const SERIES_CUTOFF: f64 = 1e-18;

// Σ_{j∈Z} e^{−j²x}
fn theta_sum(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut j = 1.0;
    loop {
        let term = (-j * j * x).exp();
        if term < SERIES_CUTOFF {
            return sum;
        }
        sum += 2.0 * term;
        j += 1.0;
    }
}

/// Heat kernel diagonal of the flat torus (R/LZ)^n, summing images directly
/// for small t and through Poisson summation for large t.
pub fn torus_heat_norm(n: usize, side: f64, t: f64) -> Result<HeatNorm> {
    if n < 1 || !(side > 0.0) || !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("need n >= 1, L > 0, t > 0, got n={n}, L={side}, t={t}")));
    }
    let x = side * side / (4.0 * t);
    // one-dimensional image sum Σ_j e^{−(jL)²/(4t)}
    let images = if x >= 1.0 {
        theta_sum(x)
    } else {
        (std::f64::consts::PI / x).sqrt() * theta_sum(std::f64::consts::PI * std::f64::consts::PI / x)
    };
    let ratio = images.powi(n as i32);
    let value = ratio * (4.0 * std::f64::consts::PI * t).powf(-0.5 * n as f64);
    Ok(HeatNorm { n, side, t, value, ratio })
}

/// max R_g/(2nπe) on a model manifold; a lower bound for the second constant
/// at p = 2, evaluated as a formula only.
pub fn second_constant_floor(model: &ManifoldModel) -> f64 {
    second_constant_lower_bound(model.n, model.scalar_curvature)
}
