use lpentropy::constants::{
    dpd_parameters, entropy_best_constant, second_constant_lower_bound, InequalityParams,
};
use lpentropy::gn_estimator::{estimate_gn_constant, gn_quotient, EstimateConfig, GnEstimate};
use lpentropy::hypercontractivity::second_constant_floor;
use lpentropy::manifold_geometry::{
    default_eps_grid, fit_expansion, lower_bound_witness, witness_eps_grid, ManifoldModel,
};
use lpentropy::manifold_minimizer::{minimize_jq, MinimizeConfig};
use lpentropy::profiles::extremal_profile;

fn estimate(n: usize, p: f64, q: f64, r: f64) -> GnEstimate {
    estimate_gn_constant(&InequalityParams::new(n, p, q, r).unwrap(), &EstimateConfig::default()).unwrap()
}

#[test]
fn extremal_quotient_is_below_the_estimate() {
    let (u, _) = extremal_profile(3, 2.0, 1.0).unwrap();
    let params = InequalityParams::new(3, 2.0, 1.9, 2.0).unwrap();
    let q = gn_quotient(&u, &params).unwrap().quotient;
    assert!(q > 0.0);
    assert!(q <= estimate(3, 2.0, 1.9, 2.0).value);
}

#[test]
fn monotonicity_instance() {
    let low = estimate(3, 2.0, 1.5, 1.8).value;
    let high = estimate(3, 2.0, 1.7, 2.2).value;
    assert!(low <= high * (1.0 + 1e-6), "{low} vs {high}");
}

#[test]
fn dpd_family_approaches_entropy_constant() {
    let a0 = entropy_best_constant(3, 2.0).unwrap();
    let dist = |s: f64| {
        let (q, r) = dpd_parameters(2.0, s).unwrap();
        (estimate(3, 2.0, q, r).value - a0).abs() / a0
    };
    let (far, near) = (dist(2.3), dist(2.05));
    assert!(near < far, "{near} vs {far}");
    assert!(near < 0.05);
}

#[test]
fn reports_round_trip_through_json() {
    let est = estimate(3, 2.0, 1.8, 2.0);
    let text = serde_json::to_string(&est).unwrap();
    let back: GnEstimate = serde_json::from_str(&text).unwrap();
    assert_eq!(back.value, est.value);
    assert_eq!(back.best.profile_id, est.best.profile_id);

    let sphere = ManifoldModel::sphere(3, 1.0).unwrap();
    let delta = sphere.default_delta();
    let rep = fit_expansion(&sphere, 2.0, 1.0, delta, &default_eps_grid(delta)).unwrap();
    let v: serde_json::Value = serde_json::to_value(&rep).unwrap();
    assert_eq!(v["eps_grid"].as_array().unwrap().len(), rep.eps_grid.len());
}

#[test]
fn witness_margins_approach_the_asymptote() {
    let a0 = entropy_best_constant(3, 2.0).unwrap();
    let sphere = ManifoldModel::sphere(3, 2.0).unwrap();
    let rep =
        lower_bound_witness(&sphere, 2.0, 0.8 * a0, 1.0, &witness_eps_grid(sphere.default_delta())).unwrap();
    assert!(rep.violated);
    assert!(rep.eps_star.is_some());
    let first = (rep.points[0].margin - rep.asymptotic_margin).abs();
    let last = (rep.points.last().unwrap().margin - rep.asymptotic_margin).abs();
    assert!(last < first);
}

#[test]
fn curvature_floor_matches_constants() {
    let sphere = ManifoldModel::sphere(4, 1.5).unwrap();
    let floor = second_constant_floor(&sphere);
    assert_eq!(floor, second_constant_lower_bound(4, sphere.scalar_curvature));
    assert_eq!(second_constant_floor(&ManifoldModel::torus(4, 1.0).unwrap()), 0.0);
}

#[test]
fn larger_penalty_raises_nu_on_the_torus() {
    let torus = ManifoldModel::torus(3, 1.0).unwrap();
    let cfg = MinimizeConfig { nodes: 129, ..MinimizeConfig::default() };
    let small = minimize_jq(&torus, 2.0, 1.9, 0.5, &cfg).unwrap();
    let large = minimize_jq(&torus, 2.0, 1.9, 1.0, &cfg).unwrap();
    assert!(small.nu <= large.nu + 1e-9, "{} vs {}", small.nu, large.nu);
}
