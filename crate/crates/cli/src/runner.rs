//! Executes a resolved experiment and produces report rows.
//!
//! All Monte Carlo work happens inside the library (which parallelizes
//! over samples); this module only assembles plans, runs them, and
//! flattens the reports into the CSV row model.

use std::sync::Arc;

use spdelab::basis::SobolevVector;
use spdelab::error_ops::{lemma_rate_check, CheckAxis, LemmaCheck, LemmaId, LemmaParams};
use spdelab::lab::{
    convergence_study, fit_rate, holder_check, Axis, Discretization, HolderPlan, StudyPlan,
};
use spdelab::noise::CovarianceSpec;
use spdelab::rng::CounterRng;
use spdelab::space::{GalerkinSpace, SpaceKind};
use spdelab::{Basis, Problem, Result, SobolevVec};

use crate::config::{Dims, Resolved};

/// One CSV row; `None` renders as an empty cell.
#[derive(Clone, Debug)]
pub struct Row {
    pub level: String,
    pub param: Option<f64>,
    pub param_kind: &'static str,
    pub samples: Option<usize>,
    pub p: Option<f64>,
    pub error: Option<f64>,
    pub stderr: Option<f64>,
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub pass: Option<bool>,
}

impl Row {
    fn level(idx: usize) -> Row {
        Row {
            level: (idx + 1).to_string(),
            param: None,
            param_kind: "",
            samples: None,
            p: None,
            error: None,
            stderr: None,
            slope: None,
            slope_stderr: None,
            pass: None,
        }
    }

    fn fit(slope: f64, slope_stderr: f64, pass: bool) -> Row {
        Row {
            level: "fit".to_string(),
            param: None,
            param_kind: "",
            samples: None,
            p: None,
            error: None,
            stderr: None,
            slope: Some(slope),
            slope_stderr: Some(slope_stderr),
            pass: Some(pass),
        }
    }
}

/// Everything the reporting layer needs about a finished run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub experiment: String,
    pub rows: Vec<Row>,
    pub pass: bool,
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    /// Relative shift of the finest level under a refined reference.
    pub bias_change: Option<f64>,
    /// Log-log scatter for the optional plot: (parameter, error).
    pub points: Vec<(f64, f64)>,
    /// Fitted line for the plot: (slope, intercept in log coordinates).
    pub fit: Option<(f64, f64)>,
    pub x_label: String,
}

pub fn run(res: &Resolved, dims: &Dims) -> Result<RunOutput> {
    match res.command.as_str() {
        "converge" => run_converge(res, dims),
        "lemma" => run_lemma(res, dims),
        "holder" => run_holder(res, dims),
        "probe" => run_probe(res, dims),
        other => Err(spdelab::Error::config(format!("unknown command {other:?}"))),
    }
}

/// Builds the problem with the covariance override and horizon applied.
fn base_problem(res: &Resolved) -> Result<Problem> {
    let mut problem = Problem::builtin(&res.problem)?;
    if let Some(beta) = res.beta {
        problem = Problem::new(
            problem.name().to_string(),
            problem.regularity(),
            problem.drift().clone(),
            problem.diffusion().clone(),
            CovarianceSpec::new(beta)?,
        )?;
    }
    problem.with_t_end(res.t_end)
}

fn space_kind(res: &Resolved) -> SpaceKind {
    if res.space == "fem" {
        SpaceKind::FemP1
    } else {
        SpaceKind::Spectral
    }
}

fn make_space(basis: &Arc<Basis>, kind: SpaceKind, size: usize) -> Result<Arc<GalerkinSpace<f64>>> {
    match kind {
        SpaceKind::Spectral => GalerkinSpace::spectral(basis, size),
        SpaceKind::FemP1 => GalerkinSpace::fem_p1(basis, size),
    }
}

fn run_converge(res: &Resolved, dims: &Dims) -> Result<RunOutput> {
    let problem = base_problem(res)?;
    let basis = Basis::with_default_grid(res.basis_modes)?;
    let kind = space_kind(res);
    let temporal = res.axis == "temporal";

    let (axis, levels, reference) = if temporal {
        let space = make_space(&basis, kind, dims.sizes[0])?;
        let levels: Vec<_> = dims
            .k_levels
            .iter()
            .map(|&k| Discretization::new(&space, k))
            .collect();
        let reference = Discretization::new(&space, dims.k_ref);
        (Axis::TemporalK, levels, reference)
    } else {
        let levels = dims
            .sizes
            .iter()
            .map(|&size| Ok(Discretization::new(&make_space(&basis, kind, size)?, res.k)))
            .collect::<Result<Vec<_>>>()?;
        let ref_space = GalerkinSpace::spectral(&basis, dims.ref_n)?;
        let reference = Discretization::new(&ref_space, dims.k_ref);
        (Axis::SpatialH, levels, reference)
    };

    let plan = StudyPlan {
        axis,
        levels,
        reference,
        noise_modes: res.noise_modes,
        samples: res.samples,
        p: res.p,
        base_seed: res.seed,
        bias_samples: (res.samples / 16).max(2),
    };
    let rep = convergence_study(&problem, &plan)?;

    let pass = (rep.slope - res.expected).abs() <= res.tol;
    let param_kind = if temporal { "k" } else { "h" };
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut triples = Vec::new();
    for (i, (param, est)) in rep.levels.iter().enumerate() {
        let mut row = Row::level(i);
        row.param = Some(*param);
        row.param_kind = param_kind;
        row.samples = Some(est.samples);
        row.p = Some(est.p);
        row.error = Some(est.value);
        row.stderr = Some(est.stderr);
        rows.push(row);
        points.push((*param, est.value));
        triples.push((*param, est.value, est.stderr));
    }
    rows.push(Row::fit(rep.slope, rep.slope_ci, pass));
    let fit = fit_rate(&triples).ok().map(|f| (f.slope, f.intercept));

    Ok(RunOutput {
        experiment: format!("converge:{}:{}", res.problem, res.axis),
        rows,
        pass,
        slope: Some(rep.slope),
        slope_stderr: Some(rep.slope_ci),
        bias_change: rep.bias_change,
        points,
        fit,
        x_label: param_kind.to_string(),
    })
}

fn run_lemma(res: &Resolved, dims: &Dims) -> Result<RunOutput> {
    let id_str = res.id.as_deref().expect("validated");
    let lemma = LemmaId::parse(id_str)?;
    let params = LemmaParams { mu: res.mu, nu: res.nu, rho: res.rho };
    let mut check = LemmaCheck::new(lemma, params, space_kind(res));
    check.t_end = res.t_end;
    check.tol = res.tol;
    match lemma.axis() {
        CheckAxis::SpaceH => check.sizes = dims.sizes.clone(),
        CheckAxis::TimeK => {
            check.sizes = vec![dims.sizes[0]];
            check.k_values = dims.k_levels.clone();
        }
    }
    let basis = Basis::with_default_grid(res.basis_modes)?;
    let rep = lemma_rate_check(&basis, &check)?;

    let param_kind = match lemma.axis() {
        CheckAxis::SpaceH => "h",
        CheckAxis::TimeK => "k",
    };
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut triples = Vec::new();
    for (i, level) in rep.levels.iter().enumerate() {
        let mut row = Row::level(i);
        row.param = Some(level.param);
        row.param_kind = param_kind;
        row.error = Some(level.q);
        rows.push(row);
        points.push((level.param, level.q));
        triples.push((level.param, level.q, 0.0));
    }
    rows.push(Row::fit(rep.slope, rep.slope_stderr, rep.pass));
    let fit = fit_rate(&triples).ok().map(|f| (f.slope, f.intercept));

    Ok(RunOutput {
        experiment: format!("lemma:{id_str}"),
        rows,
        pass: rep.pass,
        slope: Some(rep.slope),
        slope_stderr: Some(rep.slope_stderr),
        bias_change: None,
        points,
        fit,
        x_label: param_kind.to_string(),
    })
}

fn run_holder(res: &Resolved, dims: &Dims) -> Result<RunOutput> {
    let problem = base_problem(res)?;
    let basis = Basis::with_default_grid(res.basis_modes)?;
    let space = make_space(&basis, space_kind(res), dims.sizes[0])?;
    let mut plan = HolderPlan::new(Discretization::new(&space, res.k), res.noise_modes);
    plan.lags = dims.lags.clone();
    plan.samples = res.samples;
    plan.base_seed = res.seed;
    plan.expected = res.expected;
    plan.tol = res.tol;
    let rep = holder_check(&problem, &plan)?;

    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut triples = Vec::new();
    for (i, level) in rep.levels.iter().enumerate() {
        let mut row = Row::level(i);
        row.param = Some(level.param);
        row.param_kind = "delta";
        row.samples = Some(res.samples);
        row.p = Some(2.0);
        row.error = Some(level.q);
        rows.push(row);
        points.push((level.param, level.q));
        triples.push((level.param, level.q, 0.0));
    }
    rows.push(Row::fit(rep.slope, rep.slope_stderr, rep.pass));
    let fit = fit_rate(&triples).ok().map(|f| (f.slope, f.intercept));

    Ok(RunOutput {
        experiment: format!("holder:{}", res.problem),
        rows,
        pass: rep.pass,
        slope: Some(rep.slope),
        slope_stderr: Some(rep.slope_stderr),
        bias_change: None,
        points,
        fit,
        x_label: "delta".to_string(),
    })
}

/// Random smooth field with coefficients xi_n (n+1)^{-decay}; trial t is a
/// pure function of (stream, t), so levels see identical fields.
fn smooth_field(basis: &Arc<Basis>, rng: &CounterRng, trial: u64, decay: f64) -> SobolevVec {
    let coeffs = (0..basis.modes())
        .map(|n| rng.normal(trial, n as u64) * ((n + 1) as f64).powf(-decay))
        .collect();
    SobolevVector::new(basis, coeffs).expect("length matches")
}

fn run_probe(res: &Resolved, dims: &Dims) -> Result<RunOutput> {
    let problem = base_problem(res)?;
    let basis = Basis::with_default_grid(res.basis_modes)?;
    let trials = res.samples;
    let r = problem.regularity();

    let probe_row = |label: &str, kind: &'static str, declared: f64, measured: f64, ok: bool| {
        Row {
            level: label.to_string(),
            param: Some(declared),
            param_kind: kind,
            samples: Some(trials),
            p: None,
            error: Some(measured),
            stderr: None,
            slope: None,
            slope_stderr: None,
            pass: Some(ok),
        }
    };
    let mut rows = Vec::new();

    // Lipschitz probes are lower estimates of the true suprema, so they
    // must stay below the declared analytic bounds (small slack covers
    // rounding when the bound is attained).
    let drift_bound = problem.drift_lipschitz_bound();
    let drift_meas = problem.drift_lipschitz_probe(&basis, trials, res.seed);
    rows.push(probe_row(
        "drift_lipschitz",
        "bound",
        drift_bound,
        drift_meas,
        drift_meas <= drift_bound * 1.05 + 1e-9,
    ));

    let diff_bound = problem.diffusion_lipschitz_bound(res.noise_modes);
    let diff_meas = problem.diffusion_lipschitz_probe(&basis, res.noise_modes, trials, res.seed);
    rows.push(probe_row(
        "diffusion_lipschitz",
        "bound",
        diff_bound,
        diff_meas,
        diff_meas <= diff_bound * 1.05 + 1e-9,
    ));

    // Linear growth of the diffusion in the H^r norm: the ratio
    // ||g(u)||_{L2^0,r} / (1 + ||u||_r) stays uniformly bounded.
    let growth_cap = 10.0;
    let growth_rng = CounterRng::new(res.seed).stream(20);
    let mut growth: f64 = 0.0;
    for t in 0..trials {
        let u = smooth_field(&basis, &growth_rng, t as u64, 2.0);
        let g = problem.prepare_diffusion(&u, &basis);
        let num = problem
            .covariance()
            .weighted_hs_norm(res.noise_modes, r, |m| g.image(m));
        growth = growth.max(num / (1.0 + u.sobolev_norm(r)));
    }
    rows.push(probe_row("growth_ratio", "bound", growth_cap, growth, growth <= growth_cap));

    // Ritz projection error orders on the element ladder: order s for
    // fields of Sobolev smoothness s (here ~1) and the optimal order 2
    // for smooth fields.
    for (label, decay, order, stream) in [
        ("ritz_order_1", 1.51, 1.0, 21u64),
        ("ritz_order_2", 3.5, 2.0, 22u64),
    ] {
        let rng = CounterRng::new(res.seed).stream(stream);
        let mut pts = Vec::new();
        for &elements in &dims.sizes {
            let space = GalerkinSpace::fem_p1(&basis, elements)?;
            let mut acc = 0.0;
            for t in 0..trials {
                let u = smooth_field(&basis, &rng, t as u64, decay);
                let err = space.lift(&space.project_ritz(&u)).sub(&u).norm();
                acc += err * err;
            }
            pts.push((1.0 / elements as f64, (acc / trials as f64).sqrt(), 0.0));
        }
        let fitted = fit_rate(&pts)?;
        rows.push(probe_row(
            label,
            "order",
            order,
            fitted.slope,
            (fitted.slope - order).abs() <= res.tol,
        ));
    }

    // H^1 stability of the Ritz projection: it is the energy-orthogonal
    // projection, so the ratio never exceeds one beyond rounding.
    let stab_space = match space_kind(res) {
        SpaceKind::FemP1 => GalerkinSpace::fem_p1(&basis, 64)?,
        SpaceKind::Spectral => GalerkinSpace::spectral(&basis, 32)?,
    };
    let stab_rng = CounterRng::new(res.seed).stream(23);
    let mut stab: f64 = 0.0;
    for t in 0..trials {
        let u = smooth_field(&basis, &stab_rng, t as u64, 1.6);
        let ratio = stab_space.project_ritz(&u).energy_norm() / u.sobolev_norm(1.0);
        stab = stab.max(ratio);
    }
    let stab_bound = 1.0 + 1e-9;
    rows.push(probe_row(
        "projection_stability",
        "bound",
        stab_bound,
        stab,
        stab <= stab_bound,
    ));

    let pass = rows.iter().all(|r| r.pass == Some(true));
    Ok(RunOutput {
        experiment: format!("probe:{}", res.problem),
        rows,
        pass,
        slope: None,
        slope_stderr: None,
        bias_change: None,
        points: Vec::new(),
        fit: None,
        x_label: String::new(),
    })
}
