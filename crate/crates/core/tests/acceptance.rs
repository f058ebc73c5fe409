//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lpentropy::constants::{entropy_best_constant, InequalityParams};
use lpentropy::euclidean_inequalities::{entropy_deficit, log_norm_derivative, MixtureTrial, Normalization};
use lpentropy::gn_estimator::{estimate_gn_constant, limit_scan, EstimateConfig};
use lpentropy::hypercontractivity::{
    bakry_integrals, minimal_lambda, torus_heat_norm, ultracontractivity_check, RowStatus, DEFAULT_SLACK,
};
use lpentropy::manifold_geometry::{
    default_eps_grid, fit_expansion, lower_bound_witness, witness_eps_grid, ManifoldModel,
};
use lpentropy::manifold_minimizer::{constant_ceiling, minimize_jq, MinimizeConfig};
use lpentropy::profiles::{compute_ij, extremal_profile};

const EXTREMAL_GRID: [(usize, f64); 3] = [(3, 1.5), (3, 2.0), (4, 2.0)];

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

fn constant_identity() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for n in 2..=10 {
        let a0 = entropy_best_constant(n, 2.0).unwrap();
        worst = worst.max((a0 * n as f64 * std::f64::consts::PI * std::f64::consts::E - 2.0).abs());
    }
    let t = start.elapsed();
    outcome(worst <= 1e-13 && within(t, 1), format!("max |𝒜₀(2)·nπe − 2| = {worst:.2e}, {t:.2?}"))
}

fn extremal_saturation() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (n, p) in EXTREMAL_GRID {
        for b in [0.5, 1.0, 2.0] {
            let (u, _) = extremal_profile(n, p, b).unwrap();
            worst = worst.max(entropy_deficit(&u, p, Normalization::Strict).unwrap().abs());
        }
    }
    let t = start.elapsed();
    outcome(worst <= 1e-6 && within(t, 5), format!("max |deficit| = {worst:.2e}, {t:.2?}"))
}

fn inequality_robustness() -> Outcome {
    let start = Instant::now();
    let mut worst = f64::INFINITY;
    for (n, p) in EXTREMAL_GRID {
        let mut rng = ChaCha8Rng::seed_from_u64(2024 + n as u64);
        for _ in 0..100 {
            let u = MixtureTrial::random(&mut rng).sample(n).unwrap();
            worst = worst.min(entropy_deficit(&u, p, Normalization::Renormalize).unwrap());
        }
    }
    let t = start.elapsed();
    outcome(worst >= -1e-8 && within(t, 30), format!("min deficit over 300 trials = {worst:.3e}, {t:.2?}"))
}

fn dual_route_ij() -> Outcome {
    let mut worst: f64 = 0.0;
    for (n, p) in EXTREMAL_GRID {
        for b in [0.5, 1.0, 2.0] {
            match compute_ij(n, p, b) {
                Ok(rep) => worst = worst.max(rep.max_rel_diff),
                Err(e) => return outcome(false, format!("(n,p,b)=({n},{p},{b}): {e}")),
            }
        }
    }
    outcome(worst <= 1e-8, format!("max relative difference = {worst:.2e}"))
}

fn log_derivative_lemma() -> Outcome {
    let (u, _) = extremal_profile(3, 2.0, 1.0).unwrap();
    let err = |dq: f64| log_norm_derivative(&u, 2.0, dq).unwrap().err;
    let (e1, e2) = (err(1e-3), err(5e-4));
    let ratio = e1 / e2;
    outcome(
        e1 <= 1e-3 && (1.7..=2.3).contains(&ratio),
        format!("err(1e-3) = {e1:.2e}, err(1e-3)/err(5e-4) = {ratio:.3}"),
    )
}

fn gn_limit() -> Outcome {
    let start = Instant::now();
    let a0 = entropy_best_constant(3, 2.0).unwrap();
    let rows = limit_scan(3, 2.0, &[1.7, 1.99], &EstimateConfig::default()).unwrap();
    let t = start.elapsed();
    let (far, near) = (&rows[0], &rows[1]);
    let pass = near.estimate <= a0 && near.gap <= 0.05 && near.gap < far.gap && within(t, 120);
    outcome(
        pass,
        format!(
            "Â₀(1.99) = {:.7} vs 𝒜₀ = {a0:.7} (gap {:.2}%), gap(1.7) = {:.2}%, {t:.2?}",
            near.estimate,
            100.0 * near.gap,
            100.0 * far.gap
        ),
    )
}

fn monotonicity() -> Outcome {
    let qs = [1.3, 1.5, 1.7];
    let rs = [2.0, 2.5, 3.0];
    let cfg = EstimateConfig::default();
    let mut est = [[0.0; 3]; 3];
    for (i, &q) in qs.iter().enumerate() {
        for (j, &r) in rs.iter().enumerate() {
            est[i][j] =
                estimate_gn_constant(&InequalityParams::new(3, 2.0, q, r).unwrap(), &cfg).unwrap().value;
        }
    }
    // noise band: 10% of the largest increase between neighbouring grid points
    let mut largest_gap: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            if i + 1 < 3 {
                largest_gap = largest_gap.max((est[i + 1][j] - est[i][j]).abs());
            }
            if j + 1 < 3 {
                largest_gap = largest_gap.max((est[i][j + 1] - est[i][j]).abs());
            }
        }
    }
    let band = 0.1 * largest_gap;
    let (mut worst, mut hard, mut pairs) = (f64::NEG_INFINITY, 0, 0);
    for i1 in 0..3 {
        for j1 in 0..3 {
            for i2 in i1..3 {
                for j2 in j1..3 {
                    if (i1, j1) == (i2, j2) {
                        continue;
                    }
                    pairs += 1;
                    let excess = est[i1][j1] - est[i2][j2];
                    worst = worst.max(excess);
                    if excess > band {
                        hard += 1;
                    }
                }
            }
        }
    }
    outcome(
        hard == 0,
        format!("{pairs} ordered pairs, worst excess {worst:.2e}, band {band:.2e}, {hard} beyond band"),
    )
}

fn bubble_expansion() -> Outcome {
    let start = Instant::now();
    let sphere = ManifoldModel::sphere(3, 1.0).unwrap();
    let delta = sphere.default_delta();
    let s = match fit_expansion(&sphere, 2.0, 1.0, delta, &default_eps_grid(delta)) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("sphere fit: {e}")),
    };
    let torus = ManifoldModel::torus(3, 2.0 * std::f64::consts::PI).unwrap();
    let delta_t = torus.default_delta();
    let tr = match fit_expansion(&torus, 2.0, 1.0, delta_t, &default_eps_grid(delta_t)) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("torus fit: {e}")),
    };
    let t = start.elapsed();
    let mass_dev = s.mass.rel_dev.unwrap_or(f64::INFINITY);
    let grad_dev = s.grad.rel_dev.unwrap_or(f64::INFINITY);
    let torus_ok = [&tr.mass, &tr.grad, &tr.entropy, &tr.entropy_log].iter().all(|c| c.within_sigma(3.0));
    outcome(
        mass_dev <= 0.02 && grad_dev <= 0.05 && torus_ok && within(t, 60),
        format!(
            "sphere mass rel {:.1e}, grad rel {:.1e}; torus within 3σ: {torus_ok}; {t:.2?}",
            mass_dev, grad_dev
        ),
    )
}

fn lower_bound_witness_check() -> Outcome {
    let a0 = entropy_best_constant(3, 2.0).unwrap();
    let expected = 1.5 * (1.0f64 / 0.9).ln();
    let mut details = Vec::new();
    let mut pass = true;
    for model in [ManifoldModel::sphere(3, 1.0).unwrap(), ManifoldModel::torus(3, 1.0).unwrap()] {
        let grid = witness_eps_grid(model.default_delta());
        let below = lower_bound_witness(&model, 2.0, 0.9 * a0, 1.0, &grid).unwrap();
        let at = lower_bound_witness(&model, 2.0, a0, 1.0, &grid).unwrap();
        let rel = (below.margin - expected).abs() / expected;
        pass &= below.violated && rel <= 0.02 && !at.violated;
        details.push(format!(
            "{:?}: margin {:.5} vs {expected:.5} ({:.2}%), sharp A violated: {}",
            model.kind,
            below.margin,
            100.0 * rel,
            at.violated
        ));
    }
    outcome(pass, details.join("; "))
}

fn minimizer_identities() -> Outcome {
    let model = ManifoldModel::sphere(3, 1.0).unwrap();
    let cfg = MinimizeConfig::default();
    let res = match minimize_jq(&model, 2.0, 1.9, 1.0, &cfg) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("C=1: {e}")),
    };
    let zero = match minimize_jq(&model, 2.0, 1.9, 0.0, &cfg) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("C=0: {e}")),
    };
    let norm_err = (res.profile.power_integral(2.0).sqrt() - 1.0).abs();
    let ceiling = constant_ceiling(&model, 2.0, 1.9, 1.0).unwrap();
    let pass = norm_err <= 1e-10
        && res.identity_error <= 1e-10
        && res.el_residual <= 1e-6
        && res.nu <= ceiling * (1.0 + 1e-12)
        && zero.nu.abs() <= 1e-10;
    outcome(
        pass,
        format!(
            "|‖u‖_p − 1| = {norm_err:.1e}, identity {:.1e}, EL {:.1e}, ν = {:.6} ≤ {ceiling:.6}, ν(0) = {:.1e}",
            res.identity_error, res.el_residual, res.nu, zero.nu
        ),
    )
}

fn bakry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..30 {
        let n = rng.gen_range(1..=8);
        let a = rng.gen_range(0.01..2.0);
        let b = rng.gen_range(0.0..3.0);
        let lambda = minimal_lambda(a, b, 1.0, f64::INFINITY).unwrap().max(1e-3) * rng.gen_range(1.0..50.0);
        let rep = bakry_integrals(n, a, b, lambda, 1.0, f64::INFINITY).unwrap();
        let closed = n as f64 / (8.0 * lambda);
        worst = worst.max((rep.t - closed).abs() / closed);
    }
    let a = entropy_best_constant(3, 2.0).unwrap();
    let lambdas: Vec<f64> = [3.3, 5.0, 10.0, 50.0, 400.0].to_vec();
    let table = ultracontractivity_check(3, a, 1.0, &lambdas, DEFAULT_SLACK).unwrap();
    let in_range = table.rows.iter().filter(|r| r.status != RowStatus::OutOfRange).count();
    outcome(
        worst <= 1e-10 && table.all_in_range_pass() && in_range == lambdas.len(),
        format!(
            "max rel |t − n/(8λ)| = {worst:.1e}; {in_range} in-range rows pass: {}",
            table.all_in_range_pass()
        ),
    )
}

fn heat_norm() -> Outcome {
    let h = torus_heat_norm(1, 2.0 * std::f64::consts::PI, 0.01).unwrap();
    outcome((h.ratio - 1.0).abs() <= 1e-12, format!("ratio − 1 = {:.1e}", h.ratio - 1.0))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("constant identity", constant_identity),
        ("extremal saturation", extremal_saturation),
        ("inequality robustness", inequality_robustness),
        ("dual-route I/J", dual_route_ij),
        ("log-derivative lemma", log_derivative_lemma),
        ("GN limit", gn_limit),
        ("GN monotonicity", monotonicity),
        ("bubble expansion", bubble_expansion),
        ("lower-bound witness", lower_bound_witness_check),
        ("minimizer identities", minimizer_identities),
        ("semigroup integrals", bakry),
        ("torus heat norm", heat_norm),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
