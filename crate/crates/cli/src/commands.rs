use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use lpentropy::constants::{
    critical_exponent, dpd_parameters, entropy_best_constant, ln_entropy_best_constant,
    sobolev_bound_constant, theta_entropy_family, InequalityParams,
};
use lpentropy::euclidean_inequalities::{entropy_deficit, Normalization};
use lpentropy::gn_estimator::{estimate_gn_constant, limit_scan, EstimateConfig, LimitScanRow};
use lpentropy::hypercontractivity::{
    bakry_integrals, minimal_lambda, torus_heat_norm, ultracontractivity_check, DEFAULT_SLACK,
};
use lpentropy::manifold_geometry::{
    default_eps_grid, fit_expansion, lower_bound_witness, witness_eps_grid, ManifoldKind, ManifoldModel,
};
use lpentropy::manifold_minimizer::{
    constant_ceiling, minimize_jq, nu_limit_scan, nu_penalty_scan, MinimizeConfig, MinimizeResult, NuScanRow,
};
use lpentropy::profiles::{compute_ij, extremal_profile};
use lpentropy::{Error, Result};

use crate::{Cli, Command, Failure, ModelArg, Outcome};

const DEFAULT_N: usize = 3;
const DEFAULT_P: f64 = 2.0;
const DEFAULT_Q: f64 = 1.9;
const DEFAULT_DEFICIT_TOL: f64 = 1e-8;
const DEFAULT_EL_TOL: f64 = 1e-6;
const DEFAULT_WITNESS_RATIO: f64 = 0.9;
// fractions of p − 1 subtracted from p for the default q → p⁻ scans
const LIMIT_STEPS: [f64; 5] = [0.3, 0.2, 0.1, 0.05, 0.01];

pub fn run(cli: &Cli) -> std::result::Result<Outcome, Failure> {
    match cli.command {
        Command::Constants => constants(cli),
        Command::Extremal => extremal(cli),
        Command::Deficit => deficit(cli),
        Command::GnEstimate => gn_estimate(cli),
        Command::GnLimit => gn_limit(cli),
        Command::Bubble => bubble(cli),
        Command::Witness => witness(cli),
        Command::Minimize => minimize(cli),
        Command::NuScan => nu_scan(cli),
        Command::Hc => hc(cli),
        Command::HeatNorm => heat_norm(cli),
    }
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize to JSON")
}

fn n_p(cli: &Cli) -> (usize, f64) {
    (cli.n.unwrap_or(DEFAULT_N), cli.p.unwrap_or(DEFAULT_P))
}

fn single(list: &Option<Vec<f64>>, flag: &str) -> Result<Option<f64>> {
    match list.as_deref() {
        None => Ok(None),
        Some([x]) => Ok(Some(*x)),
        Some(_) => Err(Error::Domain(format!("--{flag} takes a single value here"))),
    }
}

fn q_list(cli: &Cli, p: f64) -> Vec<f64> {
    cli.q.clone().unwrap_or_else(|| LIMIT_STEPS.iter().map(|f| p - f * (p - 1.0)).collect())
}

fn model(cli: &Cli, n: usize) -> Result<ManifoldModel> {
    let kind = match cli.model.unwrap_or(ModelArg::Sphere) {
        ModelArg::Sphere => ManifoldKind::Sphere,
        ModelArg::Torus => ManifoldKind::Torus,
    };
    ManifoldModel::new(kind, n, cli.scale.unwrap_or(1.0))
}

fn estimate_config(cli: &Cli) -> EstimateConfig {
    let mut cfg = EstimateConfig { seed: cli.seed.unwrap_or(0), ..EstimateConfig::default() };
    if let Some(b) = cli.budget {
        cfg.budget = b;
    }
    cfg
}

fn minimize_config(cli: &Cli) -> MinimizeConfig {
    let mut cfg = MinimizeConfig { seed: cli.seed.unwrap_or(0), ..MinimizeConfig::default() };
    if let Some(nodes) = cli.nodes {
        cfg.nodes = nodes;
    }
    if let Some(tol) = cli.tol {
        cfg.tol = tol;
    }
    cfg
}

fn plain(config: Value, result: Value) -> Outcome {
    Outcome { config, result, csv: Vec::new(), failures: Vec::new() }
}

fn csv_table(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn fmt(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

fn constants(cli: &Cli) -> std::result::Result<Outcome, Failure> {
    let (n, p) = n_p(cli);
    let q = single(&cli.q, "q")?;
    let a0 = entropy_best_constant(n, p)?;
    let mut result = json!({
        "entropy_constant": a0,
        "ln_entropy_constant": ln_entropy_best_constant(n, p)?,
    });
    if p < n as f64 {
        result["sobolev_constant"] = json!(sobolev_bound_constant(n, p)?);
        result["critical_exponent"] = json!(critical_exponent(n, p));
    }
    if let Some(q) = q {
        let r = cli.r.unwrap_or(p);
        let params = InequalityParams::new(n, p, q, r)?;
        result["exponents"] = to_json(&params.derived());
        result["q_power"] = json!(params.q_power());
        if r == p {
            result["theta_entropy_family"] = json!(theta_entropy_family(n, p, q));
        }
        if q > p {
            let (dq, dr) = dpd_parameters(p, q)?;
            result["dpd"] = json!({ "q": dq, "r": dr });
        }
    }
    Ok(plain(json!({ "n": n, "p": p, "q": q, "r": cli.r.or(q.map(|_| p)) }), result))
}

fn extremal(cli: &Cli) -> std::result::Result<Outcome, Failure> {
    let (n, p) = n_p(cli);
    let b = cli.b.unwrap_or(1.0);
    let report = compute_ij(n, p, b)?;
    let (u, _) = extremal_profile(n, p, b)?;
    let mut out = plain(json!({ "n": n, "p": p, "b": b }), to_json(&report));
    out.csv.push(("extremal.csv".into(), u.to_csv()));
    Ok(out)
}

fn deficit(cli: &Cli) -> std::result::Result<Outcome, Failure> {
    let (n, p) = n_p(cli);
    let b = cli.b.unwrap_or(1.0);
    let tol = cli.tol.unwrap_or(DEFAULT_DEFICIT_TOL);
    let (u, spec) = extremal_profile(n, p, b)?;
    let d = entropy_deficit(&u, p, Normalization::Renormalize)?;
    let mut out = plain(
        json!({ "n": n, "p": p, "b": b, "tol": tol }),
        json!({ "deficit": d, "normalizing_factor": spec.a }),
    );
    if d.is_nan() || d.abs() > tol {
        out.failures.push(format!("extremal deficit {d:e} exceeds tolerance {tol:e}"));
    }
    Ok(out)
}

fn gn_estimate(cli: &Cli) -> std::result::Result<Outcome, Failure> {
    let (n, p) = n_p(cli);
    let q = single(&cli.q, "q")?.unwrap_or(DEFAULT_Q);
    let r = cli.r.unwrap_or(p);
    let params = InequalityParams::new(n, p, q, r)?;
    let cfg = estimate_config(cli);
    let est = estimate_gn_constant(&params, &cfg)?;
    let mut result = to_json(&est);
    if r == p {
        let a0 = entropy_best_constant(n, p)?;
        result["entropy_constant"] = json!(a0);
        result["gap"] = json!((a0 - est.value) / a0);
    }
    Ok(plain(json!({ "params": params, "estimator": cfg }), result))
}

fn limit_rows_csv(rows: &[LimitScanRow]) -> String {
    csv_table(
        "q,estimate,gap,converged",
        rows.iter().map(|r| vec![fmt(r.q), fmt(r.estimate), fmt(r.gap), r.converged.to_string()]),
    )
}

fn gn_limit(cli: &Cli) -> std::result::Result<Outcome, Failure> {
    let (n, p) = n_p(cli);
    let qs = q_list(cli, p);
    let cfg = estimate_config(cli);
    let rows = qs
        .par_iter()
        .map(|&q| limit_scan(n, p, &[q], &cfg).map(|mut v| v.remove(0)))
        .collect::<Result<Vec<_>>>()?;
    let a0 = entropy_best_constant(n, p)?;
    let mut out = plain(
        json!({ "n": n, "p": p, "q": qs, "estimator": cfg }),
        json!({ "entropy_constant": a0, "rows": rows }),
    );
    out.csv.push(("gn_limit.csv".into(), limit_rows_csv(&rows)));
    Ok(out)
}

fn bubble(cli: &Cli) -> std::result::Result<Outcome, Failure> {
    let (n, p) = n_p(cli);
    let b = cli.b.unwrap_or(1.0);
    let m = model(cli, n)?;
    let delta = m.default_delta();
    let grid = cli.eps_grid.clone().unwrap_or_else(|| default_eps_grid(delta));
    let report = fit_expansion(&m, p, b, delta, &grid)?;
    let table = csv_table(
        "epsilon,mass_p,entropy,grad_p,entropy_core,grad_core",
        report.values.iter().map(|v| {
            vec![
                fmt(v.epsilon),
                fmt(v.mass_p),
                fmt(v.entropy),
                fmt(v.grad_p),
                fmt(v.entropy_core),
                fmt(v.grad_core),
            ]
        }),
    );
    let mut out = plain(
        json!({ "n": n, "p": p, "b": b, "model": m, "delta": delta, "eps_grid": grid }),
        to_json(&report),
    );
    out.csv.push(("bubble.csv".into(), table));
    Ok(out)
}

fn witness(cli: &Cli) -> std::result::Result<Outcome, Failure> {
    let (n, p) = n_p(cli);
    let m = model(cli, n)?;
    let a0 = entropy_best_constant(n, p)?;
    let a = cli.a.unwrap_or_else(|| cli.a_ratio.unwrap_or(DEFAULT_WITNESS_RATIO) * a0);
    let b_const = cli.b_const.unwrap_or(1.0);
    let grid = cli.eps_grid.clone().unwrap_or_else(|| witness_eps_grid(m.default_delta()));
    let report = lower_bound_witness(&m, p, a, b_const, &grid)?;
    let expected = a < a0;
    let mut out = plain(
        json!({ "n": n, "p": p, "model": m, "A": a, "B": b_const, "eps_grid": grid }),
        json!({ "entropy_constant": a0, "expected_violation": expected, "witness": report }),
    );
    if report.violated != expected {
        out.failures.push(if expected {
            format!("no violation found for A = {a:e} below the sharp constant {a0:e}")
        } else {
            format!("violation found for A = {a:e} at or above the sharp constant {a0:e}")
        });
    }
    out.csv.push((
        "witness.csv".into(),
        csv_table("epsilon,margin", report.points.iter().map(|pt| vec![fmt(pt.epsilon), fmt(pt.margin)])),
    ));
    Ok(out)
}

// The accepted-step history can run to thousands of entries; JSON keeps its length.
fn minimize_json(res: &MinimizeResult) -> Value {
    let mut v = to_json(res);
    let obj = v.as_object_mut().expect("struct serializes to an object");
    obj.remove("history");
    obj.insert("history_len".into(), json!(res.history.len()));
    obj.insert("final_value".into(), json!(res.history.last()));
    v
}

fn minimize(cli: &Cli) -> std::result::Result<Outcome, Failure> {
    let (n, p) = n_p(cli);
    let q = single(&cli.q, "q")?.unwrap_or(DEFAULT_Q);
    let c = single(&cli.c, "C")?.unwrap_or(1.0);
    let m = model(cli, n)?;
    let cfg = minimize_config(cli);
    let res = minimize_jq(&m, p, q, c, &cfg)?;
    let ceiling = constant_ceiling(&m, p, q, c)?;
    let mut out = plain(
        json!({ "n": n, "p": p, "q": q, "C": c, "model": m, "minimizer": cfg }),
        json!({ "result": minimize_json(&res), "constant_ceiling": ceiling }),
    );
    if res.nu > ceiling * (1.0 + 1e-9) {
        out.failures.push(format!("ν = {:e} above the constant-profile value {ceiling:e}", res.nu));
    }
    if res.identity_error > 1e-9 * res.nu.abs().max(1.0) {
        out.failures.push(format!("identity B_q∫u^q = ν off by {:e}", res.identity_error));
    }
    if res.el_residual.is_nan() || res.el_residual > DEFAULT_EL_TOL {
        out.failures.push(format!("Euler–Lagrange residual {:e} above {DEFAULT_EL_TOL:e}", res.el_residual));
    }
    out.csv.push(("minimizer.csv".into(), res.profile.to_csv()));
    Ok(out)
}

fn nu_scan(cli: &Cli) -> std::result::Result<Outcome, Failure> {
    let (n, p) = n_p(cli);
    let m = model(cli, n)?;
    let cfg = minimize_config(cli);
    let penalties = cli.c.clone().unwrap_or_else(|| vec![1.0]);
    if penalties.len() > 1 {
        let q = single(&cli.q, "q")?.unwrap_or(DEFAULT_Q);
        let results = nu_penalty_scan(&m, p, q, &penalties, &cfg)?;
        let rows: Vec<Value> = results
            .iter()
            .zip(&penalties)
            .map(|(r, &c)| json!({ "C": c, "nu": r.nu, "el_residual": r.el_residual, "start": r.start, "warning": r.warning }))
            .collect();
        let table = csv_table(
            "C,nu,el_residual",
            results.iter().zip(&penalties).map(|(r, &c)| vec![fmt(c), fmt(r.nu), fmt(r.el_residual)]),
        );
        let mut out = plain(
            json!({ "n": n, "p": p, "q": q, "C": penalties, "model": m, "minimizer": cfg }),
            json!({ "rows": rows }),
        );
        out.csv.push(("nu_scan.csv".into(), table));
        return Ok(out);
    }
    let c = penalties[0];
    let qs = q_list(cli, p);
    let est = (!cli.no_ceiling).then(|| estimate_config(cli));
    let rows = qs
        .par_iter()
        .map(|&q| nu_limit_scan(&m, p, &[q], c, &cfg, est.as_ref()).map(|mut v| v.remove(0)))
        .collect::<Result<Vec<NuScanRow>>>()?;
    let table = csv_table(
        "q,nu,ceiling,el_residual",
        rows.iter().map(|r| vec![fmt(r.q), fmt(r.nu), opt(r.ceiling), fmt(r.el_residual)]),
    );
    let mut out = plain(
        json!({ "n": n, "p": p, "q": qs, "C": c, "model": m, "minimizer": cfg, "estimator": est }),
        json!({ "rows": rows }),
    );
    out.csv.push(("nu_scan.csv".into(), table));
    Ok(out)
}

fn hc(cli: &Cli) -> std::result::Result<Outcome, Failure> {
    let n = cli.n.unwrap_or(DEFAULT_N);
    let a = match cli.a {
        Some(a) => a,
        None => cli.a_ratio.unwrap_or(1.0) * entropy_best_constant(n, 2.0)?,
    };
    let b = cli.b_const.unwrap_or(1.0);
    let p_from = cli.p_from.unwrap_or(1.0);
    let q_to = cli.q_to.unwrap_or(f64::INFINITY);
    let slack = cli.slack.unwrap_or(DEFAULT_SLACK);
    let lambda_min = minimal_lambda(a, b, p_from, q_to)?;
    let lambdas = cli.lambda.clone().unwrap_or_else(|| {
        let base = if lambda_min > 0.0 { lambda_min } else { 1.0 };
        [1.05, 2.0, 5.0, 20.0, 100.0].iter().map(|f| f * base).collect()
    });
    let integrals = lambdas
        .iter()
        .map(|&l| {
            if l < lambda_min {
                Ok(json!({ "lambda": l, "admissible": false }))
            } else {
                let mut v = to_json(&bakry_integrals(n, a, b, l, p_from, q_to)?);
                v["admissible"] = json!(true);
                Ok(v)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut result = json!({ "minimal_lambda": lambda_min, "integrals": integrals });
    let mut failures = Vec::new();
    let mut csv = Vec::new();
    if p_from == 1.0 && q_to.is_infinite() {
        let table = ultracontractivity_check(n, a, b, &lambdas, slack)?;
        if !table.all_in_range_pass() {
            failures.push("ultracontractivity bound fails inside its range".to_string());
        }
        csv.push((
            "ultracontractivity.csv".into(),
            csv_table(
                "lambda,t,m,bound_rhs,margin,status",
                table.rows.iter().map(|r| {
                    vec![
                        fmt(r.lambda),
                        fmt(r.t),
                        opt(r.m),
                        fmt(r.bound_rhs),
                        opt(r.margin),
                        to_json(&r.status).as_str().unwrap_or_default().to_string(),
                    ]
                }),
            ),
        ));
        result["ultracontractivity"] = to_json(&table);
    }
    let config = json!({
        "n": n, "A": a, "B": b, "lambda": lambdas, "p_from": p_from,
        "q_to": if q_to.is_infinite() { json!("inf") } else { json!(q_to) }, "slack": slack,
    });
    Ok(Outcome { config, result, csv, failures })
}

fn heat_norm(cli: &Cli) -> std::result::Result<Outcome, Failure> {
    let n = cli.n.unwrap_or(DEFAULT_N);
    let side = cli.scale.unwrap_or(2.0 * std::f64::consts::PI);
    let t = cli.t.unwrap_or(0.01);
    let h = torus_heat_norm(n, side, t)?;
    Ok(plain(json!({ "n": n, "scale": side, "t": t }), to_json(&h)))
}
