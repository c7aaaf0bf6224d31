use serde_json::json;
use spinlab::cumulants::{cumulant_decay_scan, ScanPlan};
use spinlab::dynamics::DenseEvolver;
use spinlab::lieb_robinson::{commutator_norm_grid, fit_light_cone, theoretical_velocity, NORM_FLOOR};
use spinlab::open_chain::{equilibrium_report, gibbs_stationarity_residual, validate_model, CONDITION_TOL};
use spinlab::states::ProductGibbsState;
use spinlab::transport::{
    drude_weight, euler_correlator, find_conserved_charges, onsager_estimate, ChargeBasis, CorrelatorPlan,
    OnsagerPlan, RayPlan,
};
use spinlab::{LocalOperator, Site};

use crate::config::{parse_operator, ExperimentConfig};
use crate::output::{num, Artifact};
use crate::CliError;

/// Hermiticity and commutator checks on model terms are exact up to this.
const STRONG_CONSERVATION_TOL: f64 = 1e-12;
/// Gibbs states of detailed-balance models are stationary to this trace norm.
const STATIONARITY_TOL: f64 = 1e-10;

type Outcome = (Artifact, Result<(), CliError>);

fn evolver(cfg: &ExperimentConfig) -> Result<DenseEvolver, CliError> {
    let window = cfg.window.window();
    let gen = cfg.model()?.generator(window)?;
    Ok(DenseEvolver::new(&gen, cfg.evolver_config(window))?)
}

fn op(cfg: &ExperimentConfig, key: &str, text: &str) -> Result<LocalOperator, CliError> {
    parse_operator(key, text, &cfg.model()?)
}

pub fn validate(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let m = cfg.model()?;
    let report = validate_model(&m)?;
    let mut art = Artifact::new("validate", vec!["quantity", "value"])
        .tolerance("strong_conservation", STRONG_CONSERVATION_TOL)
        .tolerance("condition", CONDITION_TOL);
    art.row(vec!["hamiltonian_commutator".into(), num(report.hamiltonian_commutator)]);
    for (i, c) in report.jump_commutators.iter().enumerate() {
        art.row(vec![format!("jump_commutator_{i}"), num(*c)]);
    }
    art.row(vec!["condition_residual".into(), num(report.condition_residual)]);
    art.row(vec!["telescope_residual".into(), num(report.telescope_residual)]);
    let strong = report.strongly_conserving(STRONG_CONSERVATION_TOL);
    let balanced = report.condition_residual < CONDITION_TOL && report.detailed_balance();
    let art = art.summary(json!({
        "model": m,
        "report": report,
        "telescope_o": report.o,
        "strongly_conserving": strong,
        "detailed_balance": balanced,
    }))?;
    let verdict = if !strong {
        Err(CliError::ValidationFailed("terms do not commute with the magnetization".into()))
    } else if !balanced {
        Err(CliError::ValidationFailed(format!(
            "local detailed balance fails (condition residual {:e}, telescope residual {:e})",
            report.condition_residual, report.telescope_residual
        )))
    } else {
        Ok(())
    };
    Ok((art, verdict))
}

pub fn lr_cone(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let ev = evolver(cfg)?;
    let spec = &cfg.lr;
    let (a, b) = (op(cfg, "lr.a", &spec.a)?, op(cfg, "lr.b", &spec.b)?);
    let displacements: Vec<Site> = spec
        .displacements
        .clone()
        .unwrap_or_else(|| (0..cfg.window.sites as Site).map(|x| x + cfg.window.start).collect());
    let grid = commutator_norm_grid(&a, &b, &displacements, &spec.times, &ev, true)?;
    let fit = fit_light_cone(&grid, spec.threshold)?;
    let v_theory = theoretical_velocity(&cfg.model()?);
    let mut art = Artifact::new("lr-cone", vec!["x", "t", "norm"])
        .tolerance("threshold", spec.threshold)
        .tolerance("norm_floor", NORM_FLOOR);
    for (i, x) in grid.displacements.iter().enumerate() {
        for (j, t) in grid.times.iter().enumerate() {
            art.row(vec![x.to_string(), num(*t), num(grid.values[i][j])]);
        }
    }
    art.summary(json!({
        "v_fit": fit.v_fit,
        "lambda_fit": fit.lambda_fit,
        "v_theory": v_theory,
        "threshold": fit.threshold,
        "residuals": { "velocity_fit": fit.velocity_fit, "tails": fit.tails, "crossings": fit.crossings },
        "reversal_asymmetry": grid.reversal_asymmetry,
        "scale": grid.scale,
    }))
}

pub fn ray_average(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let ev = evolver(cfg)?;
    let r = &cfg.ray;
    let (a, b) = (op(cfg, "ray.a", &r.a)?, op(cfg, "ray.b", &r.b)?);
    let mut plan = RayPlan::new(r.v, r.t_max, r.dt).oscillatory(r.k, r.f);
    plan.direction = r.direction;
    let s = spinlab::transport::ray_average(&a, &b, &plan, &ProductGibbsState::new(cfg.mu), &ev)?;
    let mut art =
        Artifact::new("ray-average", vec!["t", "x", "integrand_re", "integrand_im", "running_re", "running_im", "abs_error"]);
    for (j, e) in s.abs_error().iter().enumerate() {
        art.row(vec![
            num(s.times[j]),
            s.displacements[j].to_string(),
            num(s.integrand[j].re),
            num(s.integrand[j].im),
            num(s.running[j].re),
            num(s.running[j].im),
            num(*e),
        ]);
    }
    let last = s.running.last().copied().unwrap_or_default();
    art.summary(json!({
        "plan": plan,
        "target": [s.target.re, s.target.im],
        "final_running": [last.re, last.im],
        "final_abs_error": s.abs_error().last(),
    }))
}

pub fn cumulants(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let ev = evolver(cfg)?;
    let spec = &cfg.cumulants;
    let ops = spec
        .ops
        .iter()
        .enumerate()
        .map(|(i, s)| op(cfg, &format!("cumulants.ops[{i}]"), s))
        .collect::<Result<Vec<_>, _>>()?;
    let n = ops.len() as Site;
    let schedule = spec.schedule.clone().unwrap_or_else(|| (1..=5).map(|z| (0..n).map(|i| i * z).collect()).collect());
    let plan = ScanPlan { ops, times: spec.times.clone(), schedule, kind: spec.kind };
    let table = cumulant_decay_scan(&ev, &ProductGibbsState::new(cfg.mu), &plan)?;
    let mut art = Artifact::new("cumulants", vec!["z", "displacements", "re", "im", "abs"])
        .tolerance("noise_floor", spinlab::cumulants::NOISE_FLOOR);
    for r in &table.rows {
        let d: Vec<String> = r.displacements.iter().map(ToString::to_string).collect();
        art.row(vec![num(r.z), d.join(";"), num(r.re), num(r.im), num(r.abs)]);
    }
    art.summary(json!({ "n": table.n, "kind": spec.kind, "log_fit": table.log_fit }))
}

fn correlator_plan(cfg: &ExperimentConfig) -> CorrelatorPlan {
    let c = &cfg.correlator;
    CorrelatorPlan::new(c.t_max, c.dt, c.radius).oscillatory(c.f, c.k).with_kappa(c.kappa)
}

pub fn drude(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let ev = evolver(cfg)?;
    let c = &cfg.correlator;
    let (a, b) = (op(cfg, "correlator.a", &c.a)?, op(cfg, "correlator.b", &c.b)?);
    let s = drude_weight(&a, &b, &correlator_plan(cfg), &ProductGibbsState::new(cfg.mu), &ev)?;
    let mut art = Artifact::new("drude", vec!["t", "integrand_re", "integrand_im", "running_re", "running_im"]);
    for j in 0..s.times.len() {
        art.row(vec![num(s.times[j]), num(s.integrand[j].re), num(s.integrand[j].im), num(s.running[j].re), num(s.running[j].im)]);
    }
    let last = s.running.last().copied().unwrap_or_default();
    art.summary(json!({ "plan": correlator_plan(cfg).with_kappa(0.0), "final_running": [last.re, last.im] }))
}

pub fn euler(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let ev = evolver(cfg)?;
    let c = &cfg.correlator;
    let m = cfg.model()?;
    let (a, b) = (op(cfg, "correlator.a", &c.a)?, op(cfg, "correlator.b", &c.b)?);
    let basis = match &c.basis {
        Some(list) => {
            let qs = list
                .iter()
                .enumerate()
                .map(|(i, s)| op(cfg, &format!("correlator.basis[{i}]"), s))
                .collect::<Result<Vec<_>, _>>()?;
            ChargeBasis::new(qs, c.k, c.f, cfg.mu)?
        }
        None => find_conserved_charges(&m.chain(), c.f, c.k, c.charge_radius, cfg.mu)?,
    };
    let plan = correlator_plan(cfg);
    let r = euler_correlator(&a, &b, &basis, &plan, &ProductGibbsState::new(cfg.mu), &ev)?;
    let mut art = Artifact::new(
        "euler",
        vec!["t", "plain_re", "plain_im", "projected_re", "projected_im", "residual"],
    );
    for j in 0..r.plain.times.len() {
        let (p, q) = (r.plain.running[j], r.projected.running[j]);
        art.row(vec![num(r.plain.times[j]), num(p.re), num(p.im), num(q.re), num(q.im), num(r.residual[j])]);
    }
    art.summary(json!({
        "plan": plan,
        "basis": { "densities": basis.densities, "min_gram_eigenvalue": basis.min_gram_eigenvalue(),
                   "gram_asymmetry": basis.gram_asymmetry(), "residuals": basis.residuals },
        "projection_a": r.projection_a,
        "projection_b": r.projection_b,
        "final_residual": r.residual.last(),
    }))
}

pub fn onsager(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let o = &cfg.onsager;
    let plan = OnsagerPlan { mu: cfg.mu, horizons: o.horizons.clone(), nodes: o.nodes, chaotic: o.chaotic, basis: None };
    let report = onsager_estimate(&cfg.model()?, o.ring, &plan)?;
    let mut art = Artifact::new("onsager", vec!["t", "green_kubo", "l_norm", "l_irr", "gap", "adjoint_gap", "tail"]);
    for r in &report.rows {
        art.row(vec![num(r.t), num(r.green_kubo), num(r.l_norm), num(r.l_irr), num(r.gap), num(r.adjoint_gap), num(r.tail)]);
    }
    art.summary(report)
}

pub fn bound(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let m = cfg.model()?;
    let reports = cfg.mus().into_iter().map(|mu| equilibrium_report(&m, mu)).collect::<Result<Vec<_>, _>>()?;
    let mut art = Artifact::new(
        "bound",
        vec!["mu", "s", "j_avg", "j_trace", "v", "v_prime", "chi", "v_tilde", "v_lr", "L_lower"],
    )
    .tolerance("j_trace_vs_closed_form", 1e-12);
    for r in &reports {
        art.row([r.mu, r.s, r.j_avg, r.j_trace, r.v, r.v_prime, r.chi, r.v_tilde, r.v_lr, r.l_lower].map(num).to_vec());
    }
    let validation = validate_model(&m)?;
    let art = if reports.len() == 1 {
        art.summary(json!({ "report": reports[0], "validation": validation }))?
    } else {
        art.summary(json!({ "reports": reports, "validation": validation }))?
    };
    Ok(art)
}

pub fn stationarity(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let m = cfg.model()?;
    m.check()?;
    let ring = cfg.scan.ring;
    let mut art = Artifact::new("stationarity", vec!["mu", "residual"]).tolerance("stationarity", STATIONARITY_TOL);
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for mu in cfg.mus() {
        let r = gibbs_stationarity_residual(&m, mu, ring)?;
        worst = worst.max(r);
        art.row(vec![num(mu), num(r)]);
        rows.push(json!({ "mu": mu, "residual": r }));
    }
    let art = art.summary(json!({ "ring": ring, "rows": rows, "max_residual": worst }))?;
    let verdict = if worst <= STATIONARITY_TOL {
        Ok(())
    } else {
        Err(CliError::ValidationFailed(format!("Gibbs state not stationary: residual {worst:e}")))
    };
    Ok((art, verdict))
}
