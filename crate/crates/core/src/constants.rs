//! Closed-form best constants and interpolation exponents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special_fn::log_gamma_unchecked as lng;

/// Dimension and exponents shared by every inequality in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityParams {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

/// θ, α and the critical exponent p* for a parameter record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedExponents {
    pub theta: f64,
    pub alpha: f64,
    pub p_star: f64,
    /// Set when q = r, where θ collapses to 0.
    pub degenerate: bool,
}

/// Critical Sobolev exponent np/(n−p).
pub fn critical_exponent(n: usize, p: f64) -> f64 {
    let n = n as f64;
    n * p / (n - p)
}

fn check_dimension(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::domain(format!("dimension must be >= 2, got {n}")));
    }
    Ok(())
}

impl InequalityParams {
    /// Validates 1 < p < n and 1 ≤ q ≤ r ≤ p*.
    pub fn new(n: usize, p: f64, q: f64, r: f64) -> Result<Self> {
        check_dimension(n)?;
        if !(p > 1.0 && p < n as f64) {
            return Err(Error::domain(format!("need 1 < p < n, got p={p}, n={n}")));
        }
        let p_star = critical_exponent(n, p);
        if !(q >= 1.0 && q <= r && r <= p_star * (1.0 + 1e-14)) {
            return Err(Error::domain(format!("need 1 <= q <= r <= p* = {p_star}, got q={q}, r={r}")));
        }
        Ok(Self { n, p, q, r })
    }

    /// The single-exponent family q < p = r.
    pub fn entropy_family(n: usize, p: f64, q: f64) -> Result<Self> {
        if !(q < p) {
            return Err(Error::domain(format!("entropy family needs q < p, got q={q}, p={p}")));
        }
        Self::new(n, p, q, p)
    }

    pub fn derived(&self) -> DerivedExponents {
        let n = self.n as f64;
        let (p, q, r) = (self.p, self.q, self.r);
        let degenerate = q == r;
        let theta = if degenerate { 0.0 } else { n * p * (r - q) / (r * (q * (p - n) + n * p)) };
        DerivedExponents {
            theta,
            alpha: (n * p - n * q + p * q) / (p * q),
            p_star: critical_exponent(self.n, p),
            degenerate,
        }
    }

    /// Exponent p(1−θ)/(qθ) carried by (∫|u|^q) in the GN inequality.
    pub fn q_power(&self) -> f64 {
        let theta = self.derived().theta;
        self.p * (1.0 - theta) / (self.q * theta)
    }
}

pub fn derived_exponents(params: &InequalityParams) -> Result<DerivedExponents> {
    InequalityParams::new(params.n, params.p, params.q, params.r).map(|p| p.derived())
}

/// θ_q = n(p−q)/(np + pq − nq) for the r = p family.
pub fn theta_entropy_family(n: usize, p: f64, q: f64) -> f64 {
    let n = n as f64;
    n * (p - q) / (n * p + p * q - n * q)
}

/// Best constant of the sharp Euclidean L^p entropy inequality.
pub fn entropy_best_constant(n: usize, p: f64) -> Result<f64> {
    Ok(ln_entropy_best_constant(n, p)?.exp())
}

pub fn ln_entropy_best_constant(n: usize, p: f64) -> Result<f64> {
    check_dimension(n)?;
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::domain(format!("entropy constant needs p > 1, got {p}")));
    }
    let nf = n as f64;
    let gamma_ratio = lng(nf / 2.0 + 1.0) - lng(nf * (p - 1.0) / p + 1.0);
    Ok((p / nf).ln() + (p - 1.0) * ((p - 1.0).ln() - 1.0) - 0.5 * p * std::f64::consts::PI.ln()
        + (p / nf) * gamma_ratio)
}

/// First best L^p-Sobolev constant; an upper bound for the entropy constant.
pub fn sobolev_bound_constant(n: usize, p: f64) -> Result<f64> {
    check_dimension(n)?;
    let nf = n as f64;
    if !(p > 1.0 && p < nf) {
        return Err(Error::domain(format!("Sobolev constant needs 1 < p < n, got p={p}, n={n}")));
    }
    let gamma_ratio = lng(nf) + lng(nf / 2.0 + 1.0) - lng(nf / p) - lng(nf * (p - 1.0) / p + 1.0);
    let ln = -nf.ln() + (p - 1.0) * ((p - 1.0) / (nf - p)).ln() - 0.5 * p * std::f64::consts::PI.ln()
        + (p / nf) * gamma_ratio;
    Ok(ln.exp())
}

/// Del Pino–Dolbeault exponents (q, r) = (s, p(s−1)/(p−1)).
pub fn dpd_parameters(p: f64, s: f64) -> Result<(f64, f64)> {
    if !(p > 1.0 && s > p) {
        return Err(Error::domain(format!("need s > p > 1, got p={p}, s={s}")));
    }
    Ok((s, p * (s - 1.0) / (p - 1.0)))
}

/// Right side of B₀(2,g) ≥ max R_g / (2nπe), the known lower bound for the
/// second constant at p = 2.
pub fn second_constant_lower_bound(n: usize, max_scalar_curvature: f64) -> f64 {
    max_scalar_curvature / (2.0 * n as f64 * std::f64::consts::PI * std::f64::consts::E)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{E, PI};

    #[test]
    fn entropy_constant_at_two() {
        for n in 2..=10 {
            let a = entropy_best_constant(n, 2.0).unwrap();
            assert!((a * n as f64 * PI * E - 2.0).abs() <= 1e-13, "n={n}");
        }
        assert_relative_eq!(
            entropy_best_constant(3, 2.0).unwrap(),
            0.078_066_442_032_425_55,
            max_relative = 1e-14
        );
    }

    #[test]
    fn entropy_constant_golden() {
        // 40-digit evaluation of the closed form
        assert_relative_eq!(
            entropy_best_constant(3, 1.5).unwrap(),
            0.104_776_397_202_852_14,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            entropy_best_constant(4, 2.0).unwrap(),
            0.058_549_831_524_319_16,
            max_relative = 1e-13
        );
        assert!(entropy_best_constant(3, 1.0).is_err());
        assert!(entropy_best_constant(1, 1.5).is_err());
    }

    #[test]
    fn sobolev_constant_golden() {
        assert_relative_eq!(
            sobolev_bound_constant(3, 2.0).unwrap(),
            0.182_551_571_487_180_98,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            sobolev_bound_constant(4, 2.0).unwrap(),
            0.097_462_100_154_209_51,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            sobolev_bound_constant(3, 1.5).unwrap(),
            0.132_980_760_133_810_9,
            max_relative = 1e-13
        );
        assert!(sobolev_bound_constant(3, 3.0).is_err());
        assert!(sobolev_bound_constant(3, 0.9).is_err());
    }

    #[test]
    fn entropy_constant_below_sobolev_constant() {
        for n in [3usize, 4, 5] {
            for k in 1..=9 {
                let p = 1.0 + 0.1 * k as f64;
                let a = entropy_best_constant(n, p).unwrap();
                let s = sobolev_bound_constant(n, p).unwrap();
                assert!(a <= s, "n={n} p={p}: {a} > {s}");
            }
        }
    }

    #[test]
    fn derived_exponent_examples() {
        let d = InequalityParams::new(3, 2.0, 2.0, 2.0).unwrap().derived();
        assert!(d.degenerate);
        assert_eq!(d.theta, 0.0);
        assert_eq!(d.alpha, 1.0);

        let d = InequalityParams::new(3, 2.0, 1.0, 6.0).unwrap().derived();
        assert!((d.theta - 1.0).abs() < 1e-15);
        assert_eq!(d.p_star, 6.0);

        let d = InequalityParams::new(3, 2.0, 1.0, 2.0).unwrap().derived();
        assert!((d.theta - 0.6).abs() < 1e-15);
        assert!(!d.degenerate);

        assert!(InequalityParams::new(3, 2.0, 1.0, 6.5).is_err());
        assert!(InequalityParams::new(3, 2.0, 2.5, 2.0).is_err());
        assert!(InequalityParams::new(3, 3.0, 1.0, 2.0).is_err());
        assert!(derived_exponents(&InequalityParams { n: 3, p: 2.0, q: 0.5, r: 2.0 }).is_err());
    }

    #[test]
    fn alpha_endpoints() {
        for (n, p) in [(3usize, 1.5), (3, 2.0), (4, 2.0), (5, 3.1)] {
            let ps = critical_exponent(n, p);
            let at_p = InequalityParams::new(n, p, p, ps).unwrap().derived().alpha;
            let at_ps = InequalityParams::new(n, p, ps, ps).unwrap().derived().alpha;
            assert!((at_p - 1.0).abs() <= 1e-14);
            assert!(at_ps.abs() <= 1e-14);
        }
    }

    #[test]
    fn theta_in_unit_interval_and_increasing_in_r() {
        for n in [2usize, 3, 4, 6] {
            for p in [1.2, 1.5, 1.9] {
                if p >= n as f64 {
                    continue;
                }
                let ps = critical_exponent(n, p);
                for qi in 0..8 {
                    let q = 1.0 + (ps - 1.0) * qi as f64 / 9.0;
                    let mut prev = 0.0;
                    for ri in 1..=10 {
                        let r = q + (ps - q) * ri as f64 / 10.0;
                        let th = InequalityParams::new(n, p, q, r).unwrap().derived().theta;
                        assert!(th > 0.0 && th <= 1.0 + 1e-14, "theta={th}");
                        assert!(th > prev);
                        prev = th;
                    }
                }
            }
        }
    }

    #[test]
    fn entropy_family_theta_matches_general_formula() {
        for q in [1.0, 1.3, 1.7, 1.99] {
            let general = InequalityParams::entropy_family(3, 2.0, q).unwrap().derived().theta;
            assert!((general - theta_entropy_family(3, 2.0, q)).abs() < 1e-15);
        }
        assert!(InequalityParams::entropy_family(3, 2.0, 2.0).is_err());
    }

    #[test]
    fn dpd_examples() {
        assert_eq!(dpd_parameters(2.0, 3.0).unwrap(), (3.0, 4.0));
        assert_eq!(dpd_parameters(1.5, 2.0).unwrap(), (2.0, 3.0));
        let (_, r) = dpd_parameters(2.0, 2.0 + 1e-9).unwrap();
        assert!((r - 2.0).abs() < 1e-8);
        assert!(dpd_parameters(2.0, 2.0).is_err());
        assert!(dpd_parameters(2.0, 1.5).is_err());
    }

    #[test]
    fn large_dimension_stays_finite() {
        let a = entropy_best_constant(400, 1.7).unwrap();
        assert!(a.is_finite() && a > 0.0);
    }
}
