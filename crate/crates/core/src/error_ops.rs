//! Deterministic error operators of the homogeneous problem and
//! empirical verification of their decay rates.
//!
//! The semidiscrete defect is F_h(t) = E_h(t) P_h - E(t); the fully
//! discrete defect replaces E_h by the rational stepping operator
//! E_kh(t) = R(k A_h)^j with R(z) = 1/(1+z) and the right-continuous
//! convention j = floor(t/k) + 1, so t in [t_{j-1}, t_j) uses exponent j.
//!
//! Rate checks measure, per discretization level,
//!
//!   Q(level) = sup_t sup_x  t^w ||F(t) x|| / ||x||_s
//!
//! (or the analogous quantity with the time-integral functionals) and
//! fit the slope of log Q against log h (or log k). On spectral spaces
//! both defects are diagonal in the eigenbasis, so the supremum over x
//! is attained on single modes and every evaluation is an exact scalar
//! formula. On element spaces the defect in the reference frame is the
//! symmetric matrix W D_h(t) W^T - D(t), with W the lifted discrete
//! eigenvectors, and the supremum over x comes from a warm-started
//! power iteration.
//!
//! The time supremum runs over a log-spaced grid on [1e-7, t_end] with
//! 40 points per decade, augmented with the step gridpoints for fully
//! discrete operators; reports record where the supremum is attained so
//! callers can verify interior maximizers.

use crate::basis::{EigenBasis, SobolevVector};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::CounterRng;
use crate::scalar::Scalar;
use crate::space::{GalerkinSpace, SpaceKind};
use std::sync::Arc;

/// Lower end of the time grid used for suprema.
pub const T_GRID_MIN: f64 = 1e-7;
/// Density of the logarithmic time grid.
pub const T_POINTS_PER_DECADE: usize = 40;

/// Exponent of the rational stepping operator at time t > 0.
pub fn step_exponent(t: f64, k: f64) -> usize {
    (t / k).floor() as usize + 1
}

/// F_h(t) x in the reference frame; t = 0 returns (P_h - I) x.
pub fn apply_fh<S: Scalar>(
    space: &Arc<GalerkinSpace<S>>,
    t: S,
    x: &SobolevVector<S>,
) -> Result<SobolevVector<S>> {
    if t < S::zero() {
        return Err(Error::domain("defect operator time must be nonnegative".to_string()));
    }
    let projected = space.project_l2(x);
    if t == S::zero() {
        return Ok(space.lift(&projected).sub(x));
    }
    let evolved = space.discrete_semigroup(&projected, t)?;
    Ok(space.lift(&evolved).sub(&x.semigroup(t)?))
}

/// F_kh(t) x in the reference frame; requires t > 0 and k > 0.
pub fn apply_fkh<S: Scalar>(
    space: &Arc<GalerkinSpace<S>>,
    k: S,
    t: S,
    x: &SobolevVector<S>,
) -> Result<SobolevVector<S>> {
    if t <= S::zero() {
        return Err(Error::domain(
            "fully discrete defect needs a positive time".to_string(),
        ));
    }
    if k <= S::zero() {
        return Err(Error::domain("step size must be positive".to_string()));
    }
    let j = step_exponent(t.to_f64_lossy(), k.to_f64_lossy());
    let projected = space.project_l2(x);
    let stepped = space.rational_step(&projected, k, j)?;
    Ok(space.lift(&stepped).sub(&x.semigroup(t)?))
}

/// Time-integral functionals of the defect operator over (0, t):
/// `int_norm` = || int_0^t F(s) x ds || and
/// `sq_int` = ( int_0^t ||F(s) x||^2 ds )^{1/2}; k = 0 selects the
/// semidiscrete F_h, k > 0 the fully discrete F_kh. Both are evaluated
/// by closed-form mode/eigenpair sums (exponential integrals for the
/// semigroup, geometric sums for the piecewise-constant rational part).
pub fn integral_functionals<S: Scalar>(
    space: &Arc<GalerkinSpace<S>>,
    k: S,
    t: S,
    x: &SobolevVector<S>,
) -> Result<IntegralFunctionals> {
    if t <= S::zero() {
        return Err(Error::domain("integral horizon must be positive".to_string()));
    }
    if k < S::zero() {
        return Err(Error::domain("step size must be nonnegative".to_string()));
    }
    let tf = t.to_f64_lossy();
    let kf = k.to_f64_lossy();
    let step = if kf == 0.0 { None } else { Some(kf) };
    let basis = space.basis();
    let lambda: Vec<f64> = basis.eigenvalues().iter().map(|l| l.to_f64_lossy()).collect();
    let xc: Vec<f64> = x.coeffs().iter().map(|c| c.to_f64_lossy()).collect();
    match space.kind() {
        SpaceKind::Spectral => {
            let dim = space.dim();
            let mut int_vec_sq = 0.0f64;
            let mut sq_acc = 0.0f64;
            for (n, (&lam, &c)) in lambda.iter().zip(&xc).enumerate() {
                if c == 0.0 {
                    continue;
                }
                let (iv, isq) = if n < dim {
                    match step {
                        None => (0.0, 0.0),
                        Some(kf) => {
                            let iv = rational_time_integral(lam, kf, tf)
                                - exp_time_integral(lam, tf);
                            let isq = rational_sq_integral(lam, lam, kf, tf)
                                - 2.0 * rational_exp_cross_integral(lam, lam, kf, tf)
                                + exp_pair_integral(lam, lam, tf);
                            (iv, isq)
                        }
                    }
                } else {
                    // Tail mode: F acts as -E(t) regardless of k.
                    (-exp_time_integral(lam, tf), exp_pair_integral(lam, lam, tf))
                };
                int_vec_sq += c * c * iv * iv;
                sq_acc += c * c * isq.max(0.0);
            }
            Ok(IntegralFunctionals { int_norm: int_vec_sq.sqrt(), sq_int: sq_acc.sqrt() })
        }
        SpaceKind::FemP1 => {
            let frame = FemFrame::build(space);
            // z = W^T x in the discrete eigenframe.
            let z = frame.w_t(&xc);
            // int F x ds = W diag(Ih_m) z - diag(Ie_n) x with the
            // respective time integrals of the two propagators.
            let ih: Vec<f64> = frame
                .eig
                .iter()
                .map(|&lh| match step {
                    None => exp_time_integral(lh, tf),
                    Some(kf) => rational_time_integral(lh, kf, tf),
                })
                .collect();
            let wz: Vec<f64> = frame.w_apply_scaled(&z, &ih);
            let mut int_sq = 0.0;
            for (n, (&lam, &c)) in lambda.iter().zip(&xc).enumerate() {
                let v = wz[n] - exp_time_integral(lam, tf) * c;
                int_sq += v * v;
            }
            // Quadratic functional: x^T [ int F(s)^T F(s) ds ] x expanded
            // into eigen-pair, cross, and reference-pair sums.
            let mut quad = 0.0;
            for (m, &lm) in frame.eig.iter().enumerate() {
                for (mm, &lmm) in frame.eig.iter().enumerate() {
                    let ipair = match step {
                        None => exp_pair_integral(lm, lmm, tf),
                        Some(kf) => rational_sq_integral(lm, lmm, kf, tf),
                    };
                    quad += z[m] * z[mm] * frame.wtw.at(m, mm) * ipair;
                }
            }
            for (m, &lm) in frame.eig.iter().enumerate() {
                let mut cross_m = 0.0;
                for (n, (&lam, &c)) in lambda.iter().zip(&xc).enumerate() {
                    let ic = match step {
                        None => exp_pair_integral(lm, lam, tf),
                        Some(kf) => rational_exp_cross_integral(lm, lam, kf, tf),
                    };
                    cross_m += frame.w.at(n, m) * c * ic;
                }
                quad -= 2.0 * z[m] * cross_m;
            }
            for (&lam, &c) in lambda.iter().zip(&xc) {
                quad += c * c * exp_pair_integral(lam, lam, tf);
            }
            Ok(IntegralFunctionals { int_norm: int_sq.sqrt(), sq_int: quad.max(0.0).sqrt() })
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct IntegralFunctionals {
    pub int_norm: f64,
    pub sq_int: f64,
}

// ---- scalar time integrals -------------------------------------------------

/// int_0^t e^{-lam s} ds.
fn exp_time_integral(lam: f64, t: f64) -> f64 {
    (-(-lam * t).exp_m1()) / lam
}

/// int_0^t e^{-(a+b) s} ds.
fn exp_pair_integral(a: f64, b: f64, t: f64) -> f64 {
    exp_time_integral(a + b, t)
}

/// int_0^t rho^{j(s)} ds with rho = 1/(1+k lam), j = floor(s/k)+1.
fn rational_time_integral(lam: f64, k: f64, t: f64) -> f64 {
    let rho = 1.0 / (1.0 + k * lam);
    let full = (t / k).floor();
    let jf = full as i32;
    let rem = t - full * k;
    // k * sum_{j=1}^{J} rho^j = rho (1 - rho^J) (1 + k lam) / lam
    let geom = rho * (1.0 - rho.powi(jf)) * (1.0 + k * lam) / lam;
    geom + rem * rho.powi(jf + 1)
}

/// int_0^t rho_a^{j(s)} rho_b^{j(s)} ds for two discrete eigenvalues.
fn rational_sq_integral(la: f64, lb: f64, k: f64, t: f64) -> f64 {
    let ra = 1.0 / (1.0 + k * la);
    let rb = 1.0 / (1.0 + k * lb);
    let r = ra * rb;
    let full = (t / k).floor();
    let jf = full as i32;
    let rem = t - full * k;
    let geom = k * r * (1.0 - r.powi(jf)) / (1.0 - r);
    geom + rem * r.powi(jf + 1)
}

/// int_0^t rho^{j(s)} e^{-lam_e s} ds (discrete times continuous decay).
fn rational_exp_cross_integral(lam_h: f64, lam_e: f64, k: f64, t: f64) -> f64 {
    let rho = 1.0 / (1.0 + k * lam_h);
    let a = (-lam_e * k).exp();
    let full = (t / k).floor();
    let jf = full as i32;
    let mix = rho * a;
    // sum_{j=1}^{J} rho^j int_{(j-1)k}^{jk} e^{-lam_e s} ds
    let per = (1.0 - a) / lam_e;
    let geom = if (1.0 - mix).abs() > 1e-14 {
        per * rho * (1.0 - mix.powi(jf)) / (1.0 - mix)
    } else {
        per * rho * full
    };
    let t_full = full * k;
    let last = rho.powi(jf + 1) * ((-lam_e * t_full).exp() - (-lam_e * t).exp()) / lam_e;
    geom + last
}

// ---- lemma catalog ---------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LemmaId {
    Fh1I,
    Fh1Ii,
    Fh1Iii,
    Fh2I,
    Fh2Ii,
    Fkh1I,
    Fkh1Ii,
    Fkh1Iii,
    Fkh2I,
    Fkh2Ii,
    SmoothingE,
    SmoothingEh,
    SmoothingR,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckAxis {
    /// Levels refine the spatial mesh; the slope is measured in h.
    SpaceH,
    /// Levels refine the time step at one fixed space; slope in k.
    TimeK,
}

impl LemmaId {
    pub const ALL: [LemmaId; 13] = [
        LemmaId::Fh1I,
        LemmaId::Fh1Ii,
        LemmaId::Fh1Iii,
        LemmaId::Fh2I,
        LemmaId::Fh2Ii,
        LemmaId::Fkh1I,
        LemmaId::Fkh1Ii,
        LemmaId::Fkh1Iii,
        LemmaId::Fkh2I,
        LemmaId::Fkh2Ii,
        LemmaId::SmoothingE,
        LemmaId::SmoothingEh,
        LemmaId::SmoothingR,
    ];

    pub fn parse(s: &str) -> Result<LemmaId> {
        let id = match s {
            "Fh1_i" => LemmaId::Fh1I,
            "Fh1_ii" => LemmaId::Fh1Ii,
            "Fh1_iii" => LemmaId::Fh1Iii,
            "Fh2_i" => LemmaId::Fh2I,
            "Fh2_ii" => LemmaId::Fh2Ii,
            "Fkh1_i" => LemmaId::Fkh1I,
            "Fkh1_ii" => LemmaId::Fkh1Ii,
            "Fkh1_iii" => LemmaId::Fkh1Iii,
            "Fkh2_i" => LemmaId::Fkh2I,
            "Fkh2_ii" => LemmaId::Fkh2Ii,
            "smoothing_E" => LemmaId::SmoothingE,
            "smoothing_Eh" => LemmaId::SmoothingEh,
            "smoothing_r" => LemmaId::SmoothingR,
            other => {
                return Err(Error::config(format!(
                    "unknown lemma id {other:?}; expected one of Fh1_i, Fh1_ii, Fh1_iii, \
                     Fh2_i, Fh2_ii, Fkh1_i, Fkh1_ii, Fkh1_iii, Fkh2_i, Fkh2_ii, \
                     smoothing_E, smoothing_Eh, smoothing_r"
                )))
            }
        };
        Ok(id)
    }

    pub fn id_str(self) -> &'static str {
        match self {
            LemmaId::Fh1I => "Fh1_i",
            LemmaId::Fh1Ii => "Fh1_ii",
            LemmaId::Fh1Iii => "Fh1_iii",
            LemmaId::Fh2I => "Fh2_i",
            LemmaId::Fh2Ii => "Fh2_ii",
            LemmaId::Fkh1I => "Fkh1_i",
            LemmaId::Fkh1Ii => "Fkh1_ii",
            LemmaId::Fkh1Iii => "Fkh1_iii",
            LemmaId::Fkh2I => "Fkh2_i",
            LemmaId::Fkh2Ii => "Fkh2_ii",
            LemmaId::SmoothingE => "smoothing_E",
            LemmaId::SmoothingEh => "smoothing_Eh",
            LemmaId::SmoothingR => "smoothing_r",
        }
    }

    pub fn axis(self) -> CheckAxis {
        match self {
            LemmaId::Fh1I
            | LemmaId::Fh1Ii
            | LemmaId::Fh1Iii
            | LemmaId::Fh2I
            | LemmaId::Fh2Ii
            | LemmaId::SmoothingE
            | LemmaId::SmoothingEh => CheckAxis::SpaceH,
            _ => CheckAxis::TimeK,
        }
    }

    /// Bounded-uniformly checks assert a flat Q instead of a decay rate.
    pub fn is_bounded(self) -> bool {
        matches!(
            self,
            LemmaId::Fh1Ii
                | LemmaId::Fkh1Ii
                | LemmaId::SmoothingE
                | LemmaId::SmoothingEh
                | LemmaId::SmoothingR
        )
    }

    pub fn expected_slope(self, p: &LemmaParams) -> f64 {
        match self {
            LemmaId::Fh1I => p.mu,
            LemmaId::Fh1Iii => 2.0 - p.rho,
            LemmaId::Fh2I => 2.0 - p.rho,
            LemmaId::Fh2Ii => 1.0 + p.rho,
            LemmaId::Fkh1I => p.mu / 2.0,
            LemmaId::Fkh1Iii => (2.0 - p.rho) / 2.0,
            LemmaId::Fkh2I => (2.0 - p.rho) / 2.0,
            LemmaId::Fkh2Ii => (1.0 + p.rho) / 2.0,
            _ => 0.0,
        }
    }

    pub fn validate_params(self, p: &LemmaParams) -> Result<()> {
        match self {
            LemmaId::Fh1I | LemmaId::Fkh1I => {
                if !(0.0 <= p.nu && p.nu <= p.mu && p.mu <= 2.0) {
                    return Err(Error::config(format!(
                        "{} needs 0 <= nu <= mu <= 2, got mu = {}, nu = {}",
                        self.id_str(),
                        p.mu,
                        p.nu
                    )));
                }
            }
            LemmaId::SmoothingE | LemmaId::SmoothingEh => {
                if p.nu < 0.0 {
                    return Err(Error::config(format!(
                        "{} needs nu >= 0, got {}",
                        self.id_str(),
                        p.nu
                    )));
                }
            }
            _ => {
                if !(0.0..=1.0).contains(&p.rho) {
                    return Err(Error::config(format!(
                        "{} needs rho in [0, 1], got {}",
                        self.id_str(),
                        p.rho
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Exponents of the lemma under test; unused entries are ignored.
#[derive(Clone, Copy, Debug, Default)]
pub struct LemmaParams {
    pub mu: f64,
    pub nu: f64,
    pub rho: f64,
}

/// One level of a rate check: the discretization parameter, the measured
/// supremum Q, the effective constant Q / param^expected, and where in
/// the time grid the supremum was attained.
#[derive(Clone, Copy, Debug)]
pub struct RateLevel {
    pub param: f64,
    pub q: f64,
    pub ratio: f64,
    pub sup_t: f64,
    pub sup_interior: bool,
}

#[derive(Clone, Debug)]
pub struct RateReport {
    /// Name of the checked estimate (a lemma id, or another experiment
    /// label when reused outside the lemma machinery).
    pub label: String,
    pub levels: Vec<RateLevel>,
    pub slope: f64,
    pub slope_stderr: f64,
    pub expected_slope: f64,
    pub bounded: bool,
    /// max Q / min Q - 1 across levels (the flatness measure for
    /// bounded-uniformly lemmas).
    pub spread: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Configuration of one lemma rate check.
#[derive(Clone, Debug)]
pub struct LemmaCheck {
    pub lemma: LemmaId,
    pub params: LemmaParams,
    pub space_kind: SpaceKind,
    /// Spectral dimensions or element counts: all levels for a spatial
    /// check, the single fixed space for a temporal one.
    pub sizes: Vec<usize>,
    /// Step sizes, strictly decreasing; only for temporal checks.
    pub k_values: Vec<f64>,
    pub t_end: f64,
    pub tol: f64,
}

impl LemmaCheck {
    pub fn new(lemma: LemmaId, params: LemmaParams, space_kind: SpaceKind) -> Self {
        let tol = match (lemma.axis(), space_kind) {
            (CheckAxis::SpaceH, SpaceKind::FemP1) => 0.15,
            _ => 0.05,
        };
        LemmaCheck {
            lemma,
            params,
            space_kind,
            sizes: Vec::new(),
            k_values: Vec::new(),
            t_end: 1.0,
            tol,
        }
    }
}

enum Functional {
    PointNorm,
    IntNorm,
    SqIntNorm,
}

struct Shape {
    /// Power of t multiplying the measured norm.
    weight: f64,
    /// Sobolev index of the input normalization ||x||_s.
    norm_s: f64,
    functional: Functional,
}

fn shape_for(lemma: LemmaId, p: &LemmaParams) -> Shape {
    match lemma {
        LemmaId::Fh1I | LemmaId::Fkh1I => Shape {
            weight: (p.mu - p.nu) / 2.0,
            norm_s: p.nu,
            functional: Functional::PointNorm,
        },
        LemmaId::Fh1Ii | LemmaId::Fkh1Ii => Shape {
            weight: p.rho / 2.0,
            norm_s: -p.rho,
            functional: Functional::PointNorm,
        },
        LemmaId::Fh1Iii | LemmaId::Fkh1Iii => Shape {
            weight: 1.0,
            norm_s: -p.rho,
            functional: Functional::PointNorm,
        },
        LemmaId::Fh2I | LemmaId::Fkh2I => Shape {
            weight: 0.0,
            norm_s: -p.rho,
            functional: Functional::IntNorm,
        },
        LemmaId::Fh2Ii | LemmaId::Fkh2Ii => Shape {
            weight: 0.0,
            norm_s: p.rho,
            functional: Functional::SqIntNorm,
        },
        _ => unreachable!("smoothing checks bypass the shape machinery"),
    }
}

/// Runs a full lemma rate check and fits the slope.
pub fn lemma_rate_check<S: Scalar>(
    basis: &Arc<EigenBasis<S>>,
    check: &LemmaCheck,
) -> Result<RateReport> {
    check.lemma.validate_params(&check.params)?;
    if check.t_end <= 0.0 {
        return Err(Error::config("check horizon t_end must be positive"));
    }
    if check.sizes.is_empty() {
        return Err(Error::config("need at least one space size"));
    }
    match check.lemma {
        LemmaId::SmoothingE => return smoothing_continuous(basis, check),
        LemmaId::SmoothingEh => return smoothing_discrete(basis, check),
        LemmaId::SmoothingR => return smoothing_rational(basis, check),
        _ => {}
    }
    let shape = shape_for(check.lemma, &check.params);
    match check.lemma.axis() {
        CheckAxis::SpaceH => {
            if !check.k_values.is_empty() {
                return Err(Error::config(
                    "spatial lemma checks take no step sizes".to_string(),
                ));
            }
            if check.sizes.len() < 2 {
                return Err(Error::config("need at least two spatial levels"));
            }
            if check.sizes.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::config(
                    "spatial levels must be strictly refining".to_string(),
                ));
            }
            let mut levels = Vec::new();
            for &size in &check.sizes {
                let space = make_space(basis, check.space_kind, size)?;
                let (q, sup_t, interior) = level_q(&space, None, &shape, check.t_end)?;
                levels.push((space.h().to_f64_lossy(), q, sup_t, interior));
            }
            assemble_report(check, levels)
        }
        CheckAxis::TimeK => {
            if check.sizes.len() != 1 {
                return Err(Error::config(
                    "temporal lemma checks fix exactly one space".to_string(),
                ));
            }
            if check.k_values.len() < 2 {
                return Err(Error::config("need at least two step sizes"));
            }
            if check.k_values.iter().any(|&k| k <= 0.0)
                || check.k_values.windows(2).any(|w| w[1] >= w[0])
            {
                return Err(Error::config(
                    "step sizes must be positive and strictly decreasing".to_string(),
                ));
            }
            let space = make_space(basis, check.space_kind, check.sizes[0])?;
            let mut levels = Vec::new();
            for &k in &check.k_values {
                let (q, sup_t, interior) = level_q(&space, Some(k), &shape, check.t_end)?;
                levels.push((k, q, sup_t, interior));
            }
            assemble_report(check, levels)
        }
    }
}

fn make_space<S: Scalar>(
    basis: &Arc<EigenBasis<S>>,
    kind: SpaceKind,
    size: usize,
) -> Result<Arc<GalerkinSpace<S>>> {
    let space = match kind {
        SpaceKind::Spectral => GalerkinSpace::spectral(basis, size)?,
        SpaceKind::FemP1 => GalerkinSpace::fem_p1(basis, size)?,
    };
    if space.dim() >= basis.modes() {
        return Err(Error::config(format!(
            "level of dimension {} leaves no tail modes in the {}-mode basis",
            space.dim(),
            basis.modes()
        )));
    }
    Ok(space)
}

fn assemble_report(
    check: &LemmaCheck,
    levels: Vec<(f64, f64, f64, bool)>,
) -> Result<RateReport> {
    let expected = check.lemma.expected_slope(&check.params);
    let bounded = check.lemma.is_bounded();
    let mut out = Vec::new();
    for &(param, q, sup_t, interior) in &levels {
        if !(q.is_finite() && q >= 0.0) {
            return Err(Error::numeric(format!(
                "level {param:e} produced an invalid supremum {q:e}"
            )));
        }
        let ratio = if bounded { q } else { q / param.powf(expected) };
        out.push(RateLevel { param, q, ratio, sup_t, sup_interior: interior });
    }
    let xs: Vec<f64> = out.iter().map(|l| l.param.ln()).collect();
    let ys: Vec<f64> = out.iter().map(|l| l.q.max(f64::MIN_POSITIVE).ln()).collect();
    let (slope, slope_stderr) = ols_line(&xs, &ys);
    let qmax = out.iter().map(|l| l.q).fold(f64::MIN, f64::max);
    let qmin = out.iter().map(|l| l.q).fold(f64::MAX, f64::min);
    let spread = if qmin > 0.0 { qmax / qmin - 1.0 } else { f64::INFINITY };
    let pass = if bounded {
        spread <= check.tol.max(0.05)
    } else {
        (slope - expected).abs() <= check.tol
    };
    Ok(RateReport {
        label: check.lemma.id_str().to_string(),
        levels: out,
        slope,
        slope_stderr,
        expected_slope: expected,
        bounded,
        spread,
        tol: check.tol,
        pass,
    })
}

/// Ordinary least squares for y = a + b x; returns (b, stderr of b).
fn ols_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    if xs.len() <= 2 {
        return (slope, 0.0);
    }
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let var = ss_res / (n - 2.0);
    (slope, (var / sxx).sqrt())
}

// ---- supremum evaluation per level -----------------------------------------

fn t_grid(t_end: f64, step: Option<f64>) -> Vec<f64> {
    let decades = (t_end / T_GRID_MIN).log10();
    let count = (decades * T_POINTS_PER_DECADE as f64).ceil() as usize;
    let mut ts: Vec<f64> = (0..=count)
        .map(|i| T_GRID_MIN * 10f64.powf(i as f64 * decades / count as f64))
        .collect();
    ts.push(t_end);
    if let Some(k) = step {
        // Step endpoints and their left limits: the in-interval extrema of
        // the piecewise constant rational propagator against the decaying
        // semigroup sit at interval ends, on either side of the jump.
        let steps = ((t_end / k) as usize).min(4096);
        for j in 1..=steps {
            let tj = j as f64 * k;
            if tj <= t_end {
                ts.push(tj * (1.0 - 1e-9));
            }
            if tj < t_end {
                ts.push(tj);
            }
        }
    }
    ts.retain(|&t| t > 0.0 && t <= t_end);
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();
    ts
}

fn level_q<S: Scalar>(
    space: &Arc<GalerkinSpace<S>>,
    k: Option<f64>,
    shape: &Shape,
    t_end: f64,
) -> Result<(f64, f64, bool)> {
    let ts = t_grid(t_end, k);
    match space.kind() {
        SpaceKind::Spectral => Ok(spectral_q(space, k, shape, &ts)),
        SpaceKind::FemP1 => fem_q(space, k, shape, &ts),
    }
}

/// Exact supremum for spectral spaces: both defects are diagonal, so the
/// operator norm is the max over single modes of a scalar formula.
fn spectral_q<S: Scalar>(
    space: &Arc<GalerkinSpace<S>>,
    k: Option<f64>,
    shape: &Shape,
    ts: &[f64],
) -> (f64, f64, bool) {
    let dim = space.dim();
    let lambda: Vec<f64> = space
        .basis()
        .eigenvalues()
        .iter()
        .map(|l| l.to_f64_lossy())
        .collect();
    let mut best = (0.0f64, 0usize);
    for (n, &lam) in lambda.iter().enumerate() {
        let resolved = n < dim;
        let norm_weight = lam.powf(-shape.norm_s / 2.0);
        for (ti, &t) in ts.iter().enumerate() {
            let magnitude = match shape.functional {
                Functional::PointNorm => match (resolved, k) {
                    (true, None) => 0.0,
                    (true, Some(kf)) => {
                        let rho = 1.0 / (1.0 + kf * lam);
                        (rho.powi(step_exponent(t, kf) as i32) - (-lam * t).exp()).abs()
                    }
                    (false, _) => (-lam * t).exp(),
                },
                Functional::IntNorm => match (resolved, k) {
                    (true, None) => 0.0,
                    (true, Some(kf)) => {
                        (rational_time_integral(lam, kf, t) - exp_time_integral(lam, t)).abs()
                    }
                    (false, _) => exp_time_integral(lam, t),
                },
                Functional::SqIntNorm => match (resolved, k) {
                    (true, None) => 0.0,
                    (true, Some(kf)) => {
                        let q = rational_sq_integral(lam, lam, kf, t)
                            - 2.0 * rational_exp_cross_integral(lam, lam, kf, t)
                            + exp_pair_integral(lam, lam, t);
                        q.max(0.0).sqrt()
                    }
                    (false, _) => exp_pair_integral(lam, lam, t).sqrt(),
                },
            };
            let value = t.powf(shape.weight) * magnitude * norm_weight;
            if value > best.0 {
                best = (value, ti);
            }
        }
    }
    let interior = best.1 > 0 && best.1 < ts.len() - 1;
    (best.0, ts[best.1], interior)
}

/// Reference-frame representation of an element-space defect: the data
/// needed to apply W D(t) W^T - D_ref(t) and its integral variants.
struct FemFrame {
    /// Lifted discrete eigenvectors, modes x dim, as f64.
    w: Mat<f64>,
    /// W^T W (the lift Gram matrix, near identity up to truncation).
    wtw: Mat<f64>,
    /// Discrete eigenvalues.
    eig: Vec<f64>,
    /// Reference eigenvalues.
    lambda: Vec<f64>,
}

impl FemFrame {
    fn build<S: Scalar>(space: &Arc<GalerkinSpace<S>>) -> FemFrame {
        let wsrc = space
            .lifted_eigenvectors()
            .expect("element spaces carry lifted eigenvectors");
        let modes = space.basis().modes();
        let dim = space.dim();
        let mut w = Mat::zeros(modes, dim);
        for n in 0..modes {
            for m in 0..dim {
                *w.at_mut(n, m) = wsrc.at(n, m).to_f64_lossy();
            }
        }
        let mut wtw = Mat::zeros(dim, dim);
        for a in 0..dim {
            for b in a..dim {
                let mut acc = 0.0;
                for n in 0..modes {
                    acc += w.at(n, a) * w.at(n, b);
                }
                *wtw.at_mut(a, b) = acc;
                *wtw.at_mut(b, a) = acc;
            }
        }
        let eig = space.discrete_eigs().iter().map(|l| l.to_f64_lossy()).collect();
        let lambda = space
            .basis()
            .eigenvalues()
            .iter()
            .map(|l| l.to_f64_lossy())
            .collect();
        FemFrame { w, wtw, eig, lambda }
    }

    fn w_t(&self, x: &[f64]) -> Vec<f64> {
        self.w.matvec_t(x)
    }

    fn w_apply_scaled(&self, z: &[f64], diag: &[f64]) -> Vec<f64> {
        let scaled: Vec<f64> = z.iter().zip(diag).map(|(&zi, &d)| zi * d).collect();
        self.w.matvec(&scaled)
    }

    /// y = (W diag(dh) W^T - diag(dref)) x.
    fn apply_defect(&self, dh: &[f64], dref: &[f64], x: &[f64]) -> Vec<f64> {
        let z = self.w_t(x);
        let mut y = self.w_apply_scaled(&z, dh);
        for ((yi, &xi), &d) in y.iter_mut().zip(x).zip(dref) {
            *yi -= d * xi;
        }
        y
    }
}

/// Largest eigenvalue of the symmetric PSD map `apply` by power
/// iteration with a warm-started vector.
fn power_iterate(apply: &dyn Fn(&[f64]) -> Vec<f64>, v: &mut [f64]) -> f64 {
    normalize(v);
    let mut value = 0.0f64;
    for _ in 0..200 {
        let w = apply(v);
        let new = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let norm = normalize_into(v, &w);
        if norm == 0.0 {
            return 0.0;
        }
        if (new - value).abs() <= 1e-7 * new.abs().max(1e-300) {
            return new.max(0.0);
        }
        value = new;
    }
    value.max(0.0)
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

fn normalize_into(v: &mut [f64], w: &[f64]) -> f64 {
    let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        for (vi, &wi) in v.iter_mut().zip(w) {
            *vi = wi / n;
        }
    }
    n
}

fn fem_q<S: Scalar>(
    space: &Arc<GalerkinSpace<S>>,
    k: Option<f64>,
    shape: &Shape,
    ts: &[f64],
) -> Result<(f64, f64, bool)> {
    let frame = FemFrame::build(space);
    let modes = frame.lambda.len();
    // Sobolev weight of the input side: ||x||_s normalization becomes the
    // diagonal lambda^{-s/2} on the right of the defect.
    let sob: Vec<f64> = frame
        .lambda
        .iter()
        .map(|l| l.powf(-shape.norm_s / 2.0))
        .collect();
    let rng = CounterRng::new(0x5EED);
    let mut warm: Vec<f64> = (0..modes).map(|n| rng.normal(7, n as u64)).collect();
    // Reduced grid for the quadratic integral functional: building its
    // pair tables costs dim * modes exponentials per time.
    let ts_owned: Vec<f64>;
    let ts_used: &[f64] = if matches!(shape.functional, Functional::SqIntNorm) {
        ts_owned = thin_grid(ts, 8);
        &ts_owned
    } else {
        ts
    };
    let mut best = (0.0f64, 0usize);
    for (ti, &t) in ts_used.iter().enumerate() {
        let value = match shape.functional {
            Functional::PointNorm | Functional::IntNorm => {
                let point = matches!(shape.functional, Functional::PointNorm);
                let dh: Vec<f64> = frame
                    .eig
                    .iter()
                    .map(|&lh| match (point, k) {
                        (true, None) => (-lh * t).exp(),
                        (true, Some(kf)) => {
                            (1.0 + kf * lh).powi(-(step_exponent(t, kf) as i32))
                        }
                        (false, None) => exp_time_integral(lh, t),
                        (false, Some(kf)) => rational_time_integral(lh, kf, t),
                    })
                    .collect();
                let dref: Vec<f64> = frame
                    .lambda
                    .iter()
                    .map(|&l| if point { (-l * t).exp() } else { exp_time_integral(l, t) })
                    .collect();
                let apply = |x: &[f64]| -> Vec<f64> {
                    let mut xin: Vec<f64> =
                        x.iter().zip(&sob).map(|(&xi, &s)| xi * s).collect();
                    xin = frame.apply_defect(&dh, &dref, &xin);
                    xin = frame.apply_defect(&dh, &dref, &xin);
                    xin.iter_mut().zip(&sob).for_each(|(v, &s)| *v *= s);
                    xin
                };
                power_iterate(&apply, &mut warm).sqrt()
            }
            Functional::SqIntNorm => {
                // x^T S [int F(s)^T F(s) ds] S x via the pair tables.
                let dim = frame.eig.len();
                let mut t1 = Mat::zeros(dim, dim);
                for a in 0..dim {
                    for b in 0..dim {
                        let ipair = match k {
                            None => exp_pair_integral(frame.eig[a], frame.eig[b], t),
                            Some(kf) => {
                                rational_sq_integral(frame.eig[a], frame.eig[b], kf, t)
                            }
                        };
                        *t1.at_mut(a, b) = frame.wtw.at(a, b) * ipair;
                    }
                }
                let mut x2 = Mat::zeros(dim, modes);
                for m in 0..dim {
                    for n in 0..modes {
                        let ic = match k {
                            None => exp_pair_integral(frame.eig[m], frame.lambda[n], t),
                            Some(kf) => rational_exp_cross_integral(
                                frame.eig[m],
                                frame.lambda[n],
                                kf,
                                t,
                            ),
                        };
                        *x2.at_mut(m, n) = frame.w.at(n, m) * ic;
                    }
                }
                let dref: Vec<f64> = frame
                    .lambda
                    .iter()
                    .map(|&l| exp_pair_integral(l, l, t))
                    .collect();
                let apply = |x: &[f64]| -> Vec<f64> {
                    let xin: Vec<f64> =
                        x.iter().zip(&sob).map(|(&xi, &s)| xi * s).collect();
                    let z = frame.w_t(&xin);
                    let t1z = t1.matvec(&z);
                    let x2x = x2.matvec(&xin);
                    let mut y = self_add(&frame.w.matvec(&t1z), &frame.w.matvec(&x2x), -1.0);
                    let x2tz = x2.matvec_t(&z);
                    for ((yi, &xi), ((&d, &x2i), &s)) in y
                        .iter_mut()
                        .zip(&xin)
                        .zip(dref.iter().zip(&x2tz).zip(&sob))
                    {
                        *yi = (*yi - x2i + d * xi) * s;
                    }
                    y
                };
                power_iterate(&apply, &mut warm).max(0.0).sqrt()
            }
        } * t.powf(shape.weight);
        if value > best.0 {
            best = (value, ti);
        }
    }
    let interior = best.1 > 0 && best.1 < ts_used.len() - 1;
    Ok((best.0, ts_used[best.1], interior))
}

fn self_add(a: &[f64], b: &[f64], scale: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| x + scale * y).collect()
}

fn thin_grid(ts: &[f64], per_decade: usize) -> Vec<f64> {
    let lo = ts[0];
    let hi = ts[ts.len() - 1];
    let decades = (hi / lo).log10();
    let count = (decades * per_decade as f64).ceil().max(1.0) as usize;
    let mut out: Vec<f64> = (0..=count)
        .map(|i| lo * 10f64.powf(i as f64 * decades / count as f64))
        .collect();
    out.push(hi);
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup();
    out
}

// ---- smoothing checks ------------------------------------------------------

/// sup over the resolved spectrum and the time grid of
/// t^nu lambda^nu e^{-lambda t}; saturates at the sharp (nu/e)^nu.
fn smoothing_continuous<S: Scalar>(
    basis: &Arc<EigenBasis<S>>,
    check: &LemmaCheck,
) -> Result<RateReport> {
    let nu = check.params.nu;
    let ts = t_grid(check.t_end, None);
    let mut levels = Vec::new();
    for &size in &check.sizes {
        if size == 0 || size > basis.modes() {
            return Err(Error::config(format!(
                "smoothing level {size} outside the {}-mode basis",
                basis.modes()
            )));
        }
        let mut best = (0.0f64, 0usize);
        for n in 1..=size {
            let lam = basis.eigenvalue(n).to_f64_lossy();
            for (ti, &t) in ts.iter().enumerate() {
                let v = (t * lam).powf(nu) * (-lam * t).exp();
                if v > best.0 {
                    best = (v, ti);
                }
            }
        }
        let h = 1.0 / ((size + 1) as f64 * std::f64::consts::PI);
        levels.push((h, best.0, ts[best.1], best.1 > 0 && best.1 + 1 < ts.len()));
    }
    assemble_report(check, levels)
}

/// Discrete analogue over each level's eigenvalues of A_h.
fn smoothing_discrete<S: Scalar>(
    basis: &Arc<EigenBasis<S>>,
    check: &LemmaCheck,
) -> Result<RateReport> {
    let nu = check.params.nu;
    let ts = t_grid(check.t_end, None);
    let mut levels = Vec::new();
    for &size in &check.sizes {
        let space = make_space(basis, check.space_kind, size)?;
        let mut best = (0.0f64, 0usize);
        for lam in space.discrete_eigs() {
            let lam = lam.to_f64_lossy();
            for (ti, &t) in ts.iter().enumerate() {
                let v = (t * lam).powf(nu) * (-lam * t).exp();
                if v > best.0 {
                    best = (v, ti);
                }
            }
        }
        levels.push((
            space.h().to_f64_lossy(),
            best.0,
            ts[best.1],
            best.1 > 0 && best.1 + 1 < ts.len(),
        ));
    }
    assemble_report(check, levels)
}

/// Rational smoothing: sup over modes and step counts of
/// t_j^rho lambda^rho (1 + k lambda)^{-j}, uniform across the k levels.
fn smoothing_rational<S: Scalar>(
    basis: &Arc<EigenBasis<S>>,
    check: &LemmaCheck,
) -> Result<RateReport> {
    let rho = check.params.rho;
    if check.sizes.len() != 1 {
        return Err(Error::config(
            "rational smoothing fixes exactly one space".to_string(),
        ));
    }
    if check.k_values.len() < 2 {
        return Err(Error::config("need at least two step sizes"));
    }
    let space = make_space(basis, check.space_kind, check.sizes[0])?;
    let eigs: Vec<f64> = space.discrete_eigs().iter().map(|l| l.to_f64_lossy()).collect();
    let mut levels = Vec::new();
    for &k in &check.k_values {
        let steps = ((check.t_end / k).floor() as usize).max(1);
        let mut best = (0.0f64, 1usize);
        for &lam in &eigs {
            let rho_factor = 1.0 / (1.0 + k * lam);
            for j in 1..=steps {
                let tj = j as f64 * k;
                let v = (tj * lam).powf(rho) * rho_factor.powi(j as i32);
                if v > best.0 {
                    best = (v, j);
                }
            }
        }
        levels.push((k, best.0, best.1 as f64 * k, best.1 > 1 && best.1 < steps));
    }
    assemble_report(check, levels)
}
