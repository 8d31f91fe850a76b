//! Monte Carlo strong-error estimation with coupled noise, rate
//! regression, and temporal-regularity checks.
//!
//! Every estimate couples the coarse and the reference runs through one
//! fine noise path per sample: the coarse scheme consumes the exact
//! block sums of the fine increments, so the measured difference is the
//! discretization error, not independent-sample variance. Samples are
//! keyed by `base_seed + i`, making results independent of evaluation
//! order and thread count.
//!
//! `convergence_study` additionally guards against reference bias: the
//! reference must be at least 4x finer spatially (64x temporally) than
//! the finest test level, and the finest level is re-measured against a
//! 2x finer reference on a subset of samples; a shift of 10% or more
//! aborts the study. To keep that probe coupled, studies sample the
//! underlying noise at half the reference step and coarsen from there.

use crate::basis::SobolevVector;
use crate::error::{Error, Result};
use crate::error_ops::{RateLevel, RateReport};
use crate::integrate::implicit_euler_maruyama;
use crate::noise::NoisePath;
use crate::problem::ProblemSpec;
use crate::rng::CounterRng;
use crate::scalar::Scalar;
use crate::space::{GalerkinSpace, SpaceKind};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::sync::Arc;

/// Number of bootstrap resamples behind every reported standard error.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;
/// Relative shift of the finest-level estimate tolerated when the
/// reference is refined 2x.
pub const REFERENCE_BIAS_LIMIT: f64 = 0.10;

/// One space/time discretization pair.
#[derive(Clone)]
pub struct Discretization<S: Scalar> {
    pub space: Arc<GalerkinSpace<S>>,
    pub k: S,
}

impl<S: Scalar> Discretization<S> {
    pub fn new(space: &Arc<GalerkinSpace<S>>, k: S) -> Self {
        Discretization { space: Arc::clone(space), k }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    SpatialH,
    TemporalK,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::SpatialH => "spatial_h",
            Axis::TemporalK => "temporal_k",
        }
    }
}

/// A strong-error estimate at the largest common gridpoint.
#[derive(Clone, Copy, Debug)]
pub struct ErrorEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
    pub p: f64,
    /// The common evaluation time T'.
    pub eval_time: f64,
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub axis: Axis,
    pub levels: Vec<(f64, ErrorEstimate)>,
    pub slope: f64,
    /// 95% half-width of the slope, propagated from bootstrap errors.
    pub slope_ci: f64,
    pub config_digest: String,
    /// Relative change of the finest-level estimate under a 2x finer
    /// reference; absent when the probe is disabled.
    pub bias_change: Option<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

/// Least squares in log-log coordinates. Points are (parameter, error,
/// stderr); weights are 1/var(log error) with var(log e) = (stderr/e)^2.
/// If any stderr is zero the fit falls back to uniform weights with a
/// residual-based slope error.
pub fn fit_rate(points: &[(f64, f64, f64)]) -> Result<FitResult> {
    if points.len() < 2 {
        return Err(Error::config("rate fit needs at least two points"));
    }
    for &(param, err, stderr) in points {
        if !(param > 0.0 && param.is_finite()) {
            return Err(Error::domain(format!("nonpositive parameter {param} in rate fit")));
        }
        if !(err > 0.0 && err.is_finite()) {
            return Err(Error::domain(format!(
                "error value {err} is not positive; cannot take its logarithm"
            )));
        }
        if !(stderr >= 0.0 && stderr.is_finite()) {
            return Err(Error::domain(format!("invalid standard error {stderr}")));
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let weighted = points.iter().all(|p| p.2 > 0.0);
    let ws: Vec<f64> = if weighted {
        points.iter().map(|p| (p.1 / p.2).powi(2)).collect()
    } else {
        vec![1.0; points.len()]
    };
    let wsum: f64 = ws.iter().sum();
    let mx = xs.iter().zip(&ws).map(|(x, w)| x * w).sum::<f64>() / wsum;
    let my = ys.iter().zip(&ws).map(|(y, w)| y * w).sum::<f64>() / wsum;
    let sxx: f64 = xs.iter().zip(&ws).map(|(x, w)| w * (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("rate fit needs at least two distinct parameters"));
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .zip(&ws)
        .map(|((x, y), w)| w * (x - mx) * (y - my))
        .sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if weighted {
        // Known per-point variances: var(slope) = 1 / sum w (x - mx)^2.
        (1.0 / sxx).sqrt()
    } else if points.len() > 2 {
        let ss_res: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (ss_res / (points.len() as f64 - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(FitResult { slope, intercept, slope_stderr })
}

// ---- strong error ----------------------------------------------------------

fn refinement_factor(k_coarse: f64, k_ref: f64) -> Result<usize> {
    let f = (k_coarse / k_ref).round();
    if f < 1.0 || (f * k_ref - k_coarse).abs() > 1e-9 * k_coarse {
        return Err(Error::config(format!(
            "step {k_coarse:e} is not an integer multiple of the reference step {k_ref:e}"
        )));
    }
    Ok(f as usize)
}

fn check_pairing<S: Scalar>(
    problem: &ProblemSpec<S>,
    coarse: &Discretization<S>,
    reference: &Discretization<S>,
    noise_modes: usize,
) -> Result<()> {
    if !Arc::ptr_eq(coarse.space.basis(), reference.space.basis()) {
        return Err(Error::config(
            "coarse and reference spaces must share one reference basis".to_string(),
        ));
    }
    if reference.space.h() > coarse.space.h() * S::of(1.0 + 1e-12) {
        return Err(Error::config(format!(
            "reference space (h = {:e}) is coarser than the test space (h = {:e})",
            reference.space.h(),
            coarse.space.h()
        )));
    }
    if noise_modes == 0 || noise_modes > coarse.space.basis().modes() {
        return Err(Error::config(format!(
            "noise truncation {noise_modes} outside the {}-mode basis",
            coarse.space.basis().modes()
        )));
    }
    let t_end = problem.t_end().to_f64_lossy();
    let k_ref = reference.k.to_f64_lossy();
    if (t_end / k_ref).floor() < 1.0 {
        return Err(Error::config(format!(
            "horizon {t_end} shorter than one reference step {k_ref}"
        )));
    }
    Ok(())
}

/// Attach the failing sample's seed to runtime (numeric) errors so a
/// blown-up trajectory can be replayed in isolation. Configuration and
/// shape errors are seed-independent and pass through untouched.
fn with_seed(err: Error, seed: u64) -> Error {
    match err {
        Error::Numeric(msg) => Error::Numeric(format!("sample seed {seed}: {msg}")),
        other => other,
    }
}

/// Per-sample coupled errors ||X_coarse(T') - X_ref(T')|| in the lifted
/// frame, one entry per sample seed `base_seed + i`. Exposed so oracle
/// tests can check individual samples; `strong_error` aggregates these.
pub fn sample_errors<S: Scalar>(
    problem: &ProblemSpec<S>,
    coarse: &Discretization<S>,
    reference: &Discretization<S>,
    noise_modes: usize,
    samples: usize,
    base_seed: u64,
) -> Result<(Vec<f64>, f64)> {
    check_pairing(problem, coarse, reference, noise_modes)?;
    if samples == 0 {
        return Err(Error::config("need at least one sample"));
    }
    let t_end = problem.t_end().to_f64_lossy();
    let k_ref = reference.k.to_f64_lossy();
    let factor = refinement_factor(coarse.k.to_f64_lossy(), k_ref)?;
    let ref_steps = (t_end / k_ref + 1e-9).floor() as usize;
    let coarse_steps = ref_steps / factor;
    if coarse_steps == 0 {
        return Err(Error::config(format!(
            "no common gridpoint: horizon {t_end} holds no complete coarse step"
        )));
    }
    let covered = coarse_steps * factor;
    let eval_time = coarse_steps as f64 * coarse.k.to_f64_lossy();
    let cov = problem.covariance().clone();
    let errs: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let seed = base_seed + i as u64;
            let run = || -> Result<f64> {
                let fine = NoisePath::sample(&cov, reference.k, ref_steps, noise_modes, seed)?;
                let ref_traj = implicit_euler_maruyama(problem, &reference.space, &fine)?;
                let coarse_path = if factor == 1 && covered == ref_steps {
                    fine
                } else {
                    fine.truncated(covered)?.coarsen(factor)?
                };
                let coarse_traj = implicit_euler_maruyama(problem, &coarse.space, &coarse_path)?;
                let diff = coarse
                    .space
                    .lift(&coarse_traj.final_state())
                    .sub(&reference.space.lift(&ref_traj.state(covered)));
                let e = diff.norm().to_f64_lossy();
                if !e.is_finite() {
                    return Err(Error::numeric("non-finite sample error".to_string()));
                }
                Ok(e)
            };
            run().map_err(|e| with_seed(e, seed))
        })
        .collect::<Result<_>>()?;
    Ok((errs, eval_time))
}

fn moment_estimate(errs: &[f64], p: f64) -> f64 {
    let mean = errs.iter().map(|e| e.powf(p)).sum::<f64>() / errs.len() as f64;
    mean.powf(1.0 / p)
}

fn bootstrap_stderr(errs: &[f64], p: f64, seed: u64) -> f64 {
    let n = errs.len();
    if n < 2 {
        return 0.0;
    }
    let rng = CounterRng::new(seed).stream(0xB007_5714);
    let mut estimates = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for r in 0..BOOTSTRAP_RESAMPLES {
        let mut acc = 0.0;
        for t in 0..n {
            let idx = (rng.uniform(r as u64, t as u64) * n as f64) as usize;
            acc += errs[idx.min(n - 1)].powf(p);
        }
        estimates.push((acc / n as f64).powf(1.0 / p));
    }
    let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>()
        / (estimates.len() as f64 - 1.0);
    var.sqrt()
}

/// Strong error ||X_coarse(T') - X_ref(T')||_{L^p(Omega; H)} by coupled
/// Monte Carlo: per sample both schemes consume the same fine noise
/// path, the coarse one through exact increment block sums.
pub fn strong_error<S: Scalar>(
    problem: &ProblemSpec<S>,
    coarse: &Discretization<S>,
    reference: &Discretization<S>,
    noise_modes: usize,
    samples: usize,
    p: f64,
    base_seed: u64,
) -> Result<ErrorEstimate> {
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::config(format!("moment order p must be >= 2, got {p}")));
    }
    let (errs, eval_time) =
        sample_errors(problem, coarse, reference, noise_modes, samples, base_seed)?;
    Ok(ErrorEstimate {
        value: moment_estimate(&errs, p),
        stderr: bootstrap_stderr(&errs, p, base_seed),
        samples,
        p,
        eval_time,
    })
}

// ---- convergence study -----------------------------------------------------

#[derive(Clone)]
pub struct StudyPlan<S: Scalar> {
    pub axis: Axis,
    /// Test levels, strictly refining: decreasing h (spatial, shared k)
    /// or decreasing k (temporal, shared space).
    pub levels: Vec<Discretization<S>>,
    pub reference: Discretization<S>,
    pub noise_modes: usize,
    pub samples: usize,
    pub p: f64,
    pub base_seed: u64,
    /// Samples devoted to the 2x-finer-reference bias probe; 0 disables
    /// the probe (accepted only for exploratory use).
    pub bias_samples: usize,
}

fn space_tag<S: Scalar>(space: &GalerkinSpace<S>) -> String {
    match space.kind() {
        SpaceKind::Spectral => format!("spectral:{}", space.dim()),
        SpaceKind::FemP1 => format!("fem_p1:{}", space.dim() + 1),
    }
}

fn study_digest<S: Scalar>(problem: &ProblemSpec<S>, plan: &StudyPlan<S>) -> String {
    let mut canon = String::new();
    canon.push_str(&format!(
        "problem={};r={:.17e};t_end={:.17e};axis={};",
        problem.name(),
        problem.regularity(),
        problem.t_end().to_f64_lossy(),
        plan.axis.as_str()
    ));
    for level in &plan.levels {
        canon.push_str(&format!(
            "level={}@{:.17e};",
            space_tag(&level.space),
            level.k.to_f64_lossy()
        ));
    }
    canon.push_str(&format!(
        "ref={}@{:.17e};noise_modes={};samples={};p={:.17e};base_seed={};bias_samples={}",
        space_tag(&plan.reference.space),
        plan.reference.k.to_f64_lossy(),
        plan.noise_modes,
        plan.samples,
        plan.p,
        plan.base_seed,
        plan.bias_samples
    ));
    let mut hasher = Sha256::new();
    hasher.update(canon.as_bytes());
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

fn twice_refined<S: Scalar>(space: &Arc<GalerkinSpace<S>>) -> Result<Arc<GalerkinSpace<S>>> {
    match space.kind() {
        SpaceKind::Spectral => GalerkinSpace::spectral(space.basis(), 2 * space.dim()),
        SpaceKind::FemP1 => GalerkinSpace::fem_p1(space.basis(), 2 * (space.dim() + 1)),
    }
}

/// Runs `strong_error` across refinement levels with all levels coupled
/// to the same reference realizations, fits the rate, and certifies the
/// reference by re-measuring the finest level against a 2x finer one.
pub fn convergence_study<S: Scalar>(
    problem: &ProblemSpec<S>,
    plan: &StudyPlan<S>,
) -> Result<ConvergenceReport> {
    if plan.levels.len() < 3 {
        return Err(Error::config(format!(
            "a convergence study needs at least 3 levels, got {}",
            plan.levels.len()
        )));
    }
    if !(plan.p >= 2.0 && plan.p.is_finite()) {
        return Err(Error::config(format!("moment order p must be >= 2, got {}", plan.p)));
    }
    if plan.samples < 2 {
        return Err(Error::config("need at least two samples"));
    }
    for level in &plan.levels {
        check_pairing(problem, level, &plan.reference, plan.noise_modes)?;
    }
    // Axis shape and strict refinement.
    let params: Vec<f64> = match plan.axis {
        Axis::SpatialH => {
            if plan
                .levels
                .iter()
                .any(|l| l.k.to_f64_lossy() != plan.levels[0].k.to_f64_lossy())
            {
                return Err(Error::config(
                    "spatial studies fix one step size across levels".to_string(),
                ));
            }
            plan.levels.iter().map(|l| l.space.h().to_f64_lossy()).collect()
        }
        Axis::TemporalK => {
            if plan.levels.iter().any(|l| {
                l.space.kind() != plan.levels[0].space.kind()
                    || l.space.dim() != plan.levels[0].space.dim()
            }) {
                return Err(Error::config(
                    "temporal studies fix one space across levels".to_string(),
                ));
            }
            plan.levels.iter().map(|l| l.k.to_f64_lossy()).collect()
        }
    };
    if params.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config(
            "levels must be strictly refining in the study parameter".to_string(),
        ));
    }
    // Reference adequacy: 4x finer in space, 64x finer in time than the
    // finest level on the varied axis.
    let finest = plan.levels.last().expect("nonempty");
    match plan.axis {
        Axis::SpatialH => {
            let ratio = finest.space.h().to_f64_lossy() / plan.reference.space.h().to_f64_lossy();
            if ratio < 4.0 * (1.0 - 1e-9) {
                return Err(Error::config(format!(
                    "reference space only {ratio:.2}x finer than the finest level; need >= 4x"
                )));
            }
        }
        Axis::TemporalK => {
            let ratio = finest.k.to_f64_lossy() / plan.reference.k.to_f64_lossy();
            if ratio < 64.0 * (1.0 - 1e-9) {
                return Err(Error::config(format!(
                    "reference step only {ratio:.2}x finer than the finest level; need >= 64x"
                )));
            }
        }
    }
    let bias_n = plan.bias_samples.min(plan.samples);
    let ref2_space = if bias_n > 0 && plan.axis == Axis::SpatialH {
        Some(twice_refined(&plan.reference.space)?)
    } else {
        None
    };

    // The fine sampling grid halves the reference step so the bias probe
    // rides the same Brownian path as the reference itself.
    let t_end = problem.t_end().to_f64_lossy();
    let k_ref = plan.reference.k.to_f64_lossy();
    let k_base = plan.reference.k / S::of(2.0);
    let base_steps = {
        let raw = (t_end / (k_ref / 2.0) + 1e-9).floor() as usize;
        raw - raw % 2
    };
    if base_steps == 0 {
        return Err(Error::config(format!(
            "horizon {t_end} shorter than one reference step {k_ref}"
        )));
    }
    struct LevelGrid {
        factor_base: usize,
        covered: usize,
        eval_time: f64,
    }
    let grids: Vec<LevelGrid> = plan
        .levels
        .iter()
        .map(|level| -> Result<LevelGrid> {
            let factor = refinement_factor(level.k.to_f64_lossy(), k_ref)?;
            let factor_base = 2 * factor;
            let coarse_steps = base_steps / factor_base;
            if coarse_steps == 0 {
                return Err(Error::config(format!(
                    "no common gridpoint for level step {:e}",
                    level.k.to_f64_lossy()
                )));
            }
            Ok(LevelGrid {
                factor_base,
                covered: coarse_steps * factor_base,
                eval_time: coarse_steps as f64 * level.k.to_f64_lossy(),
            })
        })
        .collect::<Result<_>>()?;
    let finest_idx = plan.levels.len() - 1;
    let cov = problem.covariance().clone();

    let per_sample: Vec<(Vec<f64>, Option<f64>)> = (0..plan.samples)
        .into_par_iter()
        .map(|i| -> Result<(Vec<f64>, Option<f64>)> {
            let seed = plan.base_seed + i as u64;
            let run = || -> Result<(Vec<f64>, Option<f64>)> {
            let fine = NoisePath::sample(&cov, k_base, base_steps, plan.noise_modes, seed)?;
            let ref_path = fine.coarsen(2)?;
            let ref_traj = implicit_euler_maruyama(problem, &plan.reference.space, &ref_path)?;
            let mut lifted_ref: Vec<(usize, SobolevVector<S>)> = Vec::new();
            let mut errs = Vec::with_capacity(plan.levels.len());
            let mut finest_lift: Option<SobolevVector<S>> = None;
            for (l, (level, grid)) in plan.levels.iter().zip(&grids).enumerate() {
                let path = fine.truncated(grid.covered)?.coarsen(grid.factor_base)?;
                let traj = implicit_euler_maruyama(problem, &level.space, &path)?;
                let lift = level.space.lift(&traj.final_state());
                let ref_idx = grid.covered / 2;
                let ref_lift = match lifted_ref.iter().find(|(idx, _)| *idx == ref_idx) {
                    Some((_, v)) => v.clone(),
                    None => {
                        let v = plan.reference.space.lift(&ref_traj.state(ref_idx));
                        lifted_ref.push((ref_idx, v.clone()));
                        v
                    }
                };
                let e = lift.sub(&ref_lift).norm().to_f64_lossy();
                if !e.is_finite() {
                    return Err(Error::numeric(format!(
                        "non-finite sample error at level parameter {:e}",
                        params[l]
                    )));
                }
                if l == finest_idx && i < bias_n {
                    finest_lift = Some(lift);
                }
                errs.push(e);
            }
            let bias = if i < bias_n {
                let grid = &grids[finest_idx];
                let ref2_lift = match (&ref2_space, plan.axis) {
                    (Some(space2), _) => {
                        let path2 = ref_path.truncated(grid.covered / 2)?;
                        let traj2 = implicit_euler_maruyama(problem, space2, &path2)?;
                        space2.lift(&traj2.final_state())
                    }
                    (None, _) => {
                        let path2 = fine.truncated(grid.covered)?;
                        let traj2 =
                            implicit_euler_maruyama(problem, &plan.reference.space, &path2)?;
                        plan.reference.space.lift(&traj2.final_state())
                    }
                };
                let e2 = finest_lift
                    .expect("finest level recorded")
                    .sub(&ref2_lift)
                    .norm()
                    .to_f64_lossy();
                if !e2.is_finite() {
                    return Err(Error::numeric("non-finite bias-probe error".to_string()));
                }
                Some(e2)
            } else {
                None
            };
            Ok((errs, bias))
            };
            run().map_err(|e| with_seed(e, seed))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut levels_out = Vec::with_capacity(plan.levels.len());
    let mut points = Vec::with_capacity(plan.levels.len());
    for (l, grid) in grids.iter().enumerate() {
        let errs: Vec<f64> = per_sample.iter().map(|(e, _)| e[l]).collect();
        let estimate = ErrorEstimate {
            value: moment_estimate(&errs, plan.p),
            stderr: bootstrap_stderr(&errs, plan.p, plan.base_seed.wrapping_add(l as u64)),
            samples: plan.samples,
            p: plan.p,
            eval_time: grid.eval_time,
        };
        points.push((params[l], estimate.value, estimate.stderr));
        levels_out.push((params[l], estimate));
    }
    let bias_change = if bias_n > 0 {
        let e1: Vec<f64> = per_sample[..bias_n].iter().map(|(e, _)| e[finest_idx]).collect();
        let e2: Vec<f64> = per_sample[..bias_n]
            .iter()
            .map(|(_, b)| b.expect("bias sample recorded"))
            .collect();
        let v1 = moment_estimate(&e1, plan.p);
        let v2 = moment_estimate(&e2, plan.p);
        let change = if v1 == 0.0 && v2 == 0.0 { 0.0 } else { (v2 - v1).abs() / v1 };
        if !(change < REFERENCE_BIAS_LIMIT) {
            return Err(Error::numeric(format!(
                "reference bias: finest-level estimate moved {:.1}% (from {v1:e} to {v2:e}) \
                 under a 2x finer reference; completed level estimates: {:?}",
                change * 100.0,
                points.iter().map(|p| p.1).collect::<Vec<_>>()
            )));
        }
        Some(change)
    } else {
        None
    };
    let fit = fit_rate(&points)?;
    Ok(ConvergenceReport {
        axis: plan.axis,
        levels: levels_out,
        slope: fit.slope,
        slope_ci: 1.96 * fit.slope_stderr,
        config_digest: study_digest(problem, plan),
        bias_change,
    })
}

// ---- temporal regularity ---------------------------------------------------

#[derive(Clone)]
pub struct HolderPlan<S: Scalar> {
    pub disc: Discretization<S>,
    pub noise_modes: usize,
    /// Lags in whole steps of `disc.k`, strictly increasing.
    pub lags: Vec<usize>,
    /// Anchor times as fractions of the horizon.
    pub anchor_fracs: Vec<f64>,
    pub samples: usize,
    pub base_seed: u64,
    pub expected: f64,
    pub tol: f64,
}

impl<S: Scalar> HolderPlan<S> {
    pub fn new(disc: Discretization<S>, noise_modes: usize) -> Self {
        HolderPlan {
            disc,
            noise_modes,
            lags: vec![1, 2, 4, 8, 16, 32],
            anchor_fracs: vec![0.25, 0.5, 0.75],
            samples: 100,
            base_seed: 0,
            expected: 0.5,
            tol: 0.1,
        }
    }
}

/// Mean-square temporal increments (E ||X(t + delta) - X(t)||^2)^{1/2}
/// of one discretized process across a set of lags, with the Hoelder
/// exponent fitted in log-log coordinates.
pub fn holder_check<S: Scalar>(
    problem: &ProblemSpec<S>,
    plan: &HolderPlan<S>,
) -> Result<RateReport> {
    if plan.lags.is_empty() || plan.lags[0] == 0 {
        return Err(Error::config("lags must be positive step counts"));
    }
    if plan.lags.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("lags must be strictly increasing"));
    }
    if plan.anchor_fracs.is_empty()
        || plan.anchor_fracs.iter().any(|&a| !(0.0 < a && a < 1.0))
    {
        return Err(Error::config("anchor fractions must lie in (0, 1)"));
    }
    if plan.samples < 2 {
        return Err(Error::config("need at least two samples"));
    }
    if plan.noise_modes == 0 || plan.noise_modes > plan.disc.space.basis().modes() {
        return Err(Error::config("noise truncation outside the basis"));
    }
    let t_end = problem.t_end().to_f64_lossy();
    let k = plan.disc.k.to_f64_lossy();
    let steps = (t_end / k + 1e-9).floor() as usize;
    let anchors: Vec<usize> = plan
        .anchor_fracs
        .iter()
        .map(|a| ((a * steps as f64).round() as usize).max(1))
        .collect();
    let max_lag = *plan.lags.last().expect("nonempty");
    for &a in &anchors {
        if a + max_lag > steps {
            return Err(Error::config(format!(
                "anchor step {a} plus lag {max_lag} exceeds the {steps}-step horizon"
            )));
        }
    }
    let cov = problem.covariance().clone();
    // acc[lag][anchor] accumulates squared increments over samples.
    let acc: Vec<Vec<f64>> = (0..plan.samples)
        .into_par_iter()
        .map(|i| -> Result<Vec<Vec<f64>>> {
            let seed = plan.base_seed + i as u64;
            let path = NoisePath::sample(&cov, plan.disc.k, steps, plan.noise_modes, seed)?;
            let traj = implicit_euler_maruyama(problem, &plan.disc.space, &path)?;
            let mut local = vec![vec![0.0f64; anchors.len()]; plan.lags.len()];
            for (li, &lag) in plan.lags.iter().enumerate() {
                for (ai, &a) in anchors.iter().enumerate() {
                    let d = traj
                        .state(a + lag)
                        .sub(&traj.state(a))
                        .norm()
                        .to_f64_lossy();
                    if !d.is_finite() {
                        return Err(Error::numeric(format!(
                            "non-finite increment for seed {seed}"
                        )));
                    }
                    local[li][ai] = d * d;
                }
            }
            Ok(local)
        })
        .try_reduce(
            || vec![vec![0.0f64; anchors.len()]; plan.lags.len()],
            |mut a, b| {
                for (ra, rb) in a.iter_mut().zip(&b) {
                    for (va, vb) in ra.iter_mut().zip(rb) {
                        *va += vb;
                    }
                }
                Ok(a)
            },
        )?;
    // Largest lag first: report levels decrease in the lag parameter.
    let mut levels = Vec::with_capacity(plan.lags.len());
    for (li, &lag) in plan.lags.iter().enumerate().rev() {
        let per_anchor: Vec<f64> =
            acc[li].iter().map(|s| s / plan.samples as f64).collect();
        let mean_sq = per_anchor.iter().sum::<f64>() / per_anchor.len() as f64;
        let q = mean_sq.sqrt();
        let delta = lag as f64 * k;
        let best_anchor = per_anchor
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(ai, _)| anchors[ai] as f64 * k)
            .unwrap_or(0.0);
        levels.push(RateLevel {
            param: delta,
            q,
            ratio: q / delta.powf(plan.expected),
            sup_t: best_anchor,
            sup_interior: true,
        });
    }
    let xs: Vec<f64> = levels.iter().map(|l| l.param.ln()).collect();
    let ys: Vec<f64> = levels.iter().map(|l| l.q.max(f64::MIN_POSITIVE).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let slope_stderr = if xs.len() > 2 && sxx > 0.0 {
        let intercept = my - slope * mx;
        let ss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (ss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let qmax = levels.iter().map(|l| l.q).fold(f64::MIN, f64::max);
    let qmin = levels.iter().map(|l| l.q).fold(f64::MAX, f64::min);
    Ok(RateReport {
        label: format!("holder_{}", problem.name()),
        levels,
        slope,
        slope_stderr,
        expected_slope: plan.expected,
        bounded: false,
        spread: if qmin > 0.0 { qmax / qmin - 1.0 } else { f64::INFINITY },
        tol: plan.tol,
        pass: (slope - plan.expected).abs() <= plan.tol,
    })
}
