//! End-to-end acceptance gates for the library, one per release
//! criterion, printed as a single PASS/FAIL line each:
//!
//! 1.  integrator vs. independent per-mode AR(1) oracle (additive noise);
//! 2.  noiseless degeneracy to powers of the implicit resolvent;
//! 3.  spatial error-operator rates, spectral and P1 elements;
//! 4.  temporal error-operator rates at a fixed fine space;
//! 5.  integral-functional error rates on both axes;
//! 6.  strong spatial convergence, additive smooth case on elements;
//! 7.  strong spatial convergence, semilinear multiplicative case;
//! 8.  strong temporal convergence, semilinear multiplicative case;
//! 9.  temporal Hoelder regularity of the discretized solution;
//! 10. exact algebraic identities and bit-identical reruns;
//! 11. declared Lipschitz/growth/projection assumptions probed at runtime.
//!
//! Oracles are recoded from first principles in this file (closed-form
//! eigendata, hand-assembled element matrices, Thomas solves) rather
//! than routed through the library paths they certify.

use spdelab::basis::{EigenBasis, SobolevVector};
use spdelab::error_ops::{lemma_rate_check, LemmaCheck, LemmaId, LemmaParams};
use spdelab::integrate::implicit_euler_maruyama;
use spdelab::lab::{
    convergence_study, fit_rate, holder_check, strong_error, Axis, Discretization, HolderPlan,
    StudyPlan,
};
use spdelab::noise::{CovarianceSpec, NoisePath};
use spdelab::problem::{DiffusionKind, DriftKind, ProblemSpec};
use spdelab::rng::CounterRng;
use spdelab::space::{GalerkinSpace, SpaceKind};
use spdelab::Result;
use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;
use std::time::Instant;

// ---- shared oracle helpers -------------------------------------------------

/// Symmetric tridiagonal solve (Thomas algorithm, no pivoting; the
/// callers pass strictly diagonally dominant SPD systems).
fn thomas(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = off.first().copied().unwrap_or(0.0) / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - off[i - 1] * c[i - 1];
        if i < n - 1 {
            c[i] = off[i] / denom;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Closed-form load (phi_i, e_n) of a P1 hat at node i*h against the
/// n-th normalized sine mode: sqrt(2) * 4 sin(n pi y_i) sin^2(n pi h / 2)
/// / (n^2 pi^2 h).
fn hat_mode_inner(n: usize, i: usize, h: f64) -> f64 {
    let npi = n as f64 * PI;
    let y = i as f64 * h;
    SQRT_2 * 4.0 * (npi * y).sin() * (npi * h / 2.0).sin().powi(2) / (npi * npi * h)
}

/// Eigencoefficient of the shared initial value y (1 - y).
fn initial_coeff(n: usize) -> f64 {
    if n % 2 == 1 {
        4.0 * SQRT_2 / (n as f64 * PI).powi(3)
    } else {
        0.0
    }
}

/// Random field on the reference basis with coefficient decay n^{-decay};
/// a pure function of (rng stream, trial).
fn random_vec(
    basis: &Arc<EigenBasis<f64>>,
    rng: &CounterRng,
    stream: u64,
    trial: u64,
    decay: f64,
) -> SobolevVector<f64> {
    let r = rng.stream(stream);
    let coeffs = (0..basis.modes())
        .map(|n| r.normal(trial, n as u64) * ((n + 1) as f64).powf(-decay))
        .collect();
    SobolevVector::new(basis, coeffs).expect("length matches basis")
}

/// Rough random coordinates (no decay) for inverse-inequality checks.
fn random_coords(dim: usize, rng: &CounterRng, stream: u64, trial: u64) -> Vec<f64> {
    let r = rng.stream(stream);
    (0..dim).map(|i| r.normal(trial, i as u64)).collect()
}

fn max_abs_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ---- criterion 1: integrator vs. per-mode AR(1) oracle ---------------------

fn criterion_01() -> Result<(bool, String)> {
    let start = Instant::now();
    let basis = EigenBasis::<f64>::with_default_grid(64)?;
    let problem = ProblemSpec::<f64>::builtin("P1")?;
    let space = GalerkinSpace::spectral(&basis, 64)?;
    let k = 1.0 / 256.0;
    let steps = 256;
    let mut worst: f64 = 0.0;
    for seed in [1u64, 2, 3] {
        let path = NoisePath::sample(problem.covariance(), k, steps, 64, seed)?;
        let traj = implicit_euler_maruyama(&problem, &space, &path)?;
        // Oracle: each eigenmode is an independent AR(1) recursion
        // c <- (c + gamma_n dW_n) / (1 + k n^2 pi^2), from the
        // closed-form initial coefficients.
        let mut c: Vec<f64> = (1..=64).map(initial_coeff).collect();
        worst = worst.max(max_abs_dev(&c, traj.state(0).coords()));
        for j in 1..=steps {
            let d = path.step_increments(j);
            for (m, cm) in c.iter_mut().enumerate() {
                let n = (m + 1) as f64;
                let gamma = n.powf(-0.55);
                *cm = (*cm + gamma * d[m]) / (1.0 + k * n * n * PI * PI);
            }
            worst = worst.max(max_abs_dev(&c, traj.state(j).coords()));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-12 && elapsed < 10.0;
    Ok((pass, format!("max coefficient deviation {worst:.2e} (tol 1e-12) [{elapsed:.1} s]")))
}

// ---- criterion 2: noiseless degeneracy to resolvent powers -----------------

fn criterion_02() -> Result<(bool, String)> {
    let start = Instant::now();
    let basis = EigenBasis::<f64>::with_default_grid(64)?;
    let problem = ProblemSpec::new(
        "degenerate",
        1.0,
        DriftKind::Zero,
        DiffusionKind::Additive { gamma: Arc::new(|_| 0.0) },
        CovarianceSpec::new(1.0)?,
    )?;

    // Spectral: closed-form resolvent powers of the truncated start.
    let spec = GalerkinSpace::spectral(&basis, 32)?;
    let k = 1.0 / 64.0;
    let steps = 64;
    let path = NoisePath::sample(problem.covariance(), k, steps, 16, 5)?;
    let traj = implicit_euler_maruyama(&problem, &spec, &path)?;
    let mut worst_spec: f64 = 0.0;
    for j in 0..=steps {
        let state = traj.state(j);
        for (i, &v) in state.coords().iter().enumerate() {
            let n = (i + 1) as f64;
            let want = initial_coeff(i + 1) / (1.0 + k * n * n * PI * PI).powi(j as i32);
            worst_spec = worst_spec.max((v - want).abs());
        }
    }

    // Elements: iterate the hand-assembled system (M + kK) c' = M c with
    // M = (h/6) tridiag(1,4,1), K = (1/h) tridiag(-1,2,-1), from the
    // integrator's own projected start (the identity under test is the
    // time evolution).
    let elements = 32;
    let fem = GalerkinSpace::fem_p1(&basis, elements)?;
    let kf = 1.0 / 128.0;
    let fsteps = 128;
    let fpath = NoisePath::sample(problem.covariance(), kf, fsteps, 16, 6)?;
    let ftraj = implicit_euler_maruyama(&problem, &fem, &fpath)?;
    let h = 1.0 / elements as f64;
    let dim = elements - 1;
    let adiag = vec![4.0 * h / 6.0 + 2.0 * kf / h; dim];
    let aoff = vec![h / 6.0 - kf / h; dim - 1];
    let mut c = ftraj.state(0).coords().to_vec();
    let mut worst_fem: f64 = 0.0;
    for j in 1..=fsteps {
        let rhs: Vec<f64> = (0..dim)
            .map(|i| {
                let left = if i > 0 { c[i - 1] } else { 0.0 };
                let right = if i + 1 < dim { c[i + 1] } else { 0.0 };
                h / 6.0 * (left + 4.0 * c[i] + right)
            })
            .collect();
        c = thomas(&adiag, &aoff, &rhs);
        worst_fem = worst_fem.max(max_abs_dev(&c, ftraj.state(j).coords()));
    }

    let elapsed = start.elapsed().as_secs_f64();
    let worst = worst_spec.max(worst_fem);
    let pass = worst <= 1e-12 && elapsed < 5.0;
    Ok((pass, format!(
        "spectral dev {worst_spec:.2e}, element dev {worst_fem:.2e} (tol 1e-12) [{elapsed:.1} s]"
    )))
}

// ---- criterion 3: spatial error-operator rates -----------------------------

fn criterion_03() -> Result<(bool, String)> {
    let pairs = [(2.0, 0.0), (1.0, 1.0), (1.5, 0.5)];
    let mut all = true;
    let mut notes = Vec::new();

    let t0 = Instant::now();
    let basis = EigenBasis::<f64>::with_default_grid(256)?;
    for (mu, nu) in pairs {
        let mut check = LemmaCheck::new(
            LemmaId::Fh1I,
            LemmaParams { mu, nu, rho: 0.0 },
            SpaceKind::Spectral,
        );
        check.sizes = vec![4, 8, 16, 32, 64, 128];
        let rep = lemma_rate_check(&basis, &check)?;
        all &= rep.pass;
        notes.push(format!("s({mu},{nu})={:.3}", rep.slope));
    }
    let t_spectral = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let basis_fem = EigenBasis::<f64>::with_default_grid(512)?;
    for (mu, nu) in pairs {
        let mut check = LemmaCheck::new(
            LemmaId::Fh1I,
            LemmaParams { mu, nu, rho: 0.0 },
            SpaceKind::FemP1,
        );
        check.sizes = vec![8, 16, 32, 64, 128];
        let rep = lemma_rate_check(&basis_fem, &check)?;
        all &= rep.pass;
        notes.push(format!("f({mu},{nu})={:.3}", rep.slope));
    }
    let t_fem = t1.elapsed().as_secs_f64();

    let pass = all && t_spectral < 30.0 && t_fem < 120.0;
    Ok((pass, format!(
        "slopes vs mu: {} [spectral {t_spectral:.1} s, elements {t_fem:.1} s]",
        notes.join(" ")
    )))
}

// ---- criterion 4: temporal error-operator rates ----------------------------

fn criterion_04() -> Result<(bool, String)> {
    let start = Instant::now();
    let basis = EigenBasis::<f64>::with_default_grid(1024)?;
    let mut all = true;
    let mut notes = Vec::new();
    for mu in [1.0, 2.0] {
        let mut check = LemmaCheck::new(
            LemmaId::Fkh1I,
            LemmaParams { mu, nu: 0.0, rho: 0.0 },
            SpaceKind::Spectral,
        );
        check.sizes = vec![256];
        check.k_values = (4..=10).map(|e| 2f64.powi(-e)).collect();
        let rep = lemma_rate_check(&basis, &check)?;
        all &= rep.pass;
        notes.push(format!("s(mu={mu})={:.3}", rep.slope));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = all && elapsed < 60.0;
    Ok((pass, format!("slopes vs mu/2: {} [{elapsed:.1} s]", notes.join(" "))))
}

// ---- criterion 5: integral-functional rates --------------------------------

fn criterion_05() -> Result<(bool, String)> {
    let start = Instant::now();
    let basis = EigenBasis::<f64>::with_default_grid(1024)?;
    let krange: Vec<f64> = (4..=10).map(|e| 2f64.powi(-e)).collect();
    // The slope-one functionals approach their rate from above; shift
    // the window one dyadic level finer so the fit sits in range.
    let kfine: Vec<f64> = (5..=10).map(|e| 2f64.powi(-e)).collect();
    let mut all = true;
    let mut worst_dev: f64 = 0.0;
    for rho in [0.0, 0.5, 1.0] {
        for id in [LemmaId::Fh2I, LemmaId::Fh2Ii] {
            let mut check = LemmaCheck::new(
                id,
                LemmaParams { mu: 0.0, nu: 0.0, rho },
                SpaceKind::Spectral,
            );
            check.sizes = vec![4, 8, 16, 32, 64, 128];
            check.tol = 0.1;
            let rep = lemma_rate_check(&basis, &check)?;
            all &= rep.pass;
            worst_dev = worst_dev.max((rep.slope - rep.expected_slope).abs());
        }
        for id in [LemmaId::Fkh2I, LemmaId::Fkh2Ii] {
            let mut check = LemmaCheck::new(
                id,
                LemmaParams { mu: 0.0, nu: 0.0, rho },
                SpaceKind::Spectral,
            );
            check.sizes = vec![256];
            check.k_values = if (id == LemmaId::Fkh2I && rho < 0.25)
                || (id == LemmaId::Fkh2Ii && rho > 0.75)
            {
                kfine.clone()
            } else {
                krange.clone()
            };
            check.tol = 0.1;
            let rep = lemma_rate_check(&basis, &check)?;
            all &= rep.pass;
            worst_dev = worst_dev.max((rep.slope - rep.expected_slope).abs());
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = all && elapsed < 60.0;
    Ok((pass, format!(
        "12 functionals, worst slope deviation {worst_dev:.3} (tol 0.1) [{elapsed:.1} s]"
    )))
}

// ---- criterion 6: strong spatial rate, additive smooth case ----------------

fn criterion_06() -> Result<(bool, String)> {
    let start = Instant::now();
    let basis = EigenBasis::<f64>::with_default_grid(640)?;
    let problem = ProblemSpec::<f64>::builtin("P1")?;
    let k = 2f64.powi(-12);
    let levels: Vec<Discretization<f64>> = [8usize, 16, 32, 64]
        .iter()
        .map(|&el| Ok(Discretization::new(&GalerkinSpace::fem_p1(&basis, el)?, k)))
        .collect::<Result<_>>()?;
    let plan = StudyPlan {
        axis: Axis::SpatialH,
        levels,
        reference: Discretization::new(&GalerkinSpace::spectral(&basis, 256)?, k),
        noise_modes: 320,
        samples: 200,
        p: 2.0,
        base_seed: 77,
        bias_samples: 8,
    };
    let report = convergence_study(&problem, &plan)?;
    let elapsed = start.elapsed().as_secs_f64();
    let pass = (1.7..=2.3).contains(&report.slope) && elapsed < 900.0;
    Ok((pass, format!(
        "element slope {:.3} +- {:.3} (band [1.7, 2.3]), reference bias {:.1e} [{elapsed:.0} s]",
        report.slope,
        report.slope_ci,
        report.bias_change.unwrap_or(f64::NAN)
    )))
}

// ---- criterion 7: strong spatial rate, multiplicative case -----------------

fn criterion_07() -> Result<(bool, String)> {
    let start = Instant::now();
    let basis = EigenBasis::<f64>::with_default_grid(640)?;
    // Short horizon and a very small shared step: over-damped tail modes
    // (k lambda >> 1) would otherwise steepen the measured slope.
    let problem = ProblemSpec::<f64>::builtin("P3")?.with_t_end(1.0 / 32.0)?;
    let k = 2f64.powi(-17);
    let levels: Vec<Discretization<f64>> = [4usize, 8, 16, 32, 64]
        .iter()
        .map(|&n| Ok(Discretization::new(&GalerkinSpace::spectral(&basis, n)?, k)))
        .collect::<Result<_>>()?;
    let plan = StudyPlan {
        axis: Axis::SpatialH,
        levels,
        // 259 modes put the reference exactly 4x finer than the finest level.
        reference: Discretization::new(&GalerkinSpace::spectral(&basis, 259)?, k),
        noise_modes: 320,
        samples: 200,
        p: 2.0,
        base_seed: 9001,
        bias_samples: 8,
    };
    let report = convergence_study(&problem, &plan)?;
    let elapsed = start.elapsed().as_secs_f64();
    let pass = (1.25..=1.75).contains(&report.slope) && elapsed < 900.0;
    Ok((pass, format!(
        "spectral slope {:.3} +- {:.3} (band [1.25, 1.75]), reference bias {:.1e} [{elapsed:.0} s]",
        report.slope,
        report.slope_ci,
        report.bias_change.unwrap_or(f64::NAN)
    )))
}

// ---- criterion 8: strong temporal rate, multiplicative case ----------------

fn criterion_08() -> Result<(bool, String)> {
    let start = Instant::now();
    let basis = EigenBasis::<f64>::with_default_grid(256)?;
    let problem = ProblemSpec::<f64>::builtin("P3")?;
    let space = GalerkinSpace::spectral(&basis, 64)?;
    let levels: Vec<Discretization<f64>> =
        (3..=8).map(|e| Discretization::new(&space, 2f64.powi(-e))).collect();
    let plan = StudyPlan {
        axis: Axis::TemporalK,
        levels,
        reference: Discretization::new(&space, 2f64.powi(-14)),
        noise_modes: 128,
        samples: 200,
        p: 2.0,
        base_seed: 4242,
        bias_samples: 8,
    };
    let report = convergence_study(&problem, &plan)?;
    let elapsed = start.elapsed().as_secs_f64();
    let pass = (0.38..=0.62).contains(&report.slope) && elapsed < 900.0;
    Ok((pass, format!(
        "temporal slope {:.3} +- {:.3} (band [0.38, 0.62]), reference bias {:.1e} [{elapsed:.0} s]",
        report.slope,
        report.slope_ci,
        report.bias_change.unwrap_or(f64::NAN)
    )))
}

// ---- criterion 9: temporal Hoelder regularity ------------------------------

fn criterion_09() -> Result<(bool, String)> {
    let start = Instant::now();
    let basis = EigenBasis::<f64>::with_default_grid(64)?;
    let space = GalerkinSpace::spectral(&basis, 32)?;
    let mut all = true;
    let mut notes = Vec::new();
    for name in ["P1", "P3"] {
        let problem = ProblemSpec::<f64>::builtin(name)?;
        // Step small enough that the slowest mode stays unsaturated at
        // the widest lag (lambda_1 * 64k ~ 0.15).
        let mut plan = HolderPlan::new(Discretization::new(&space, 1.0 / 4096.0), 48);
        plan.lags = vec![1, 2, 4, 8, 16, 32, 64];
        plan.samples = 100;
        plan.base_seed = 7;
        let rep = holder_check(&problem, &plan)?;
        all &= rep.pass;
        notes.push(format!("{name}={:.3}", rep.slope));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = all && elapsed < 600.0;
    Ok((pass, format!(
        "increment exponents {} (band [0.4, 0.6]) [{elapsed:.1} s]",
        notes.join(" ")
    )))
}

// ---- criterion 10: exact identities and reproducibility --------------------

fn criterion_10() -> Result<(bool, String)> {
    let start = Instant::now();
    let basis = EigenBasis::<f64>::with_default_grid(64)?;
    let rng = CounterRng::new(1234);
    let fem = GalerkinSpace::fem_p1(&basis, 32)?;
    let spec = GalerkinSpace::spectral(&basis, 32)?;
    let h = 1.0 / 32.0;
    let trials = 100u64;
    // Worst relative deviation across all exact identities.
    let mut worst: f64 = 0.0;
    let mut bounds_ok = true;

    // Parseval on the reference basis: coefficient norm vs. the grid
    // quadrature of the synthesized field.
    for t in 0..trials {
        let v = random_vec(&basis, &rng, 10, t, 1.0);
        let sq: Vec<f64> = basis.synthesize(v.coeffs()).iter().map(|x| x * x).collect();
        let quad = basis.integrate(&sq);
        worst = worst.max((v.norm().powi(2) - quad).abs() / quad);
    }

    // Discrete L2 norms against hand formulas: the element norm is the
    // exact piecewise-linear integral, the spectral norm is plain l2.
    for t in 0..trials {
        let coords = random_coords(fem.dim(), &rng, 11, t);
        let f = fem.field(coords.clone())?;
        let mut hand = 0.0;
        for el in 0..=fem.dim() {
            let l = if el == 0 { 0.0 } else { coords[el - 1] };
            let r = if el == fem.dim() { 0.0 } else { coords[el] };
            hand += h / 3.0 * (l * l + l * r + r * r);
        }
        worst = worst.max((f.norm().powi(2) - hand).abs() / hand);

        let coords = random_coords(spec.dim(), &rng, 12, t);
        let f = spec.field(coords.clone())?;
        let hand: f64 = coords.iter().map(|c| c * c).sum();
        worst = worst.max((f.norm().powi(2) - hand).abs() / hand);
    }

    // Energy-norm identity ||A_h^{1/2} y||^2 = a(y, y), with a(y, y)
    // recomputed as sum (dy)^2 / h (elements) and sum (n pi c_n)^2
    // (spectral); both the eigenframe square root and the stiffness
    // quadratic form must match it.
    for t in 0..trials {
        for space in [&fem, &spec] {
            let coords = random_coords(space.dim(), &rng, 13, t);
            let f = space.field(coords.clone())?;
            let hand: f64 = match space.kind() {
                SpaceKind::FemP1 => (0..=space.dim())
                    .map(|el| {
                        let l = if el == 0 { 0.0 } else { coords[el - 1] };
                        let r = if el == space.dim() { 0.0 } else { coords[el] };
                        (r - l) * (r - l) / h
                    })
                    .sum(),
                SpaceKind::Spectral => coords
                    .iter()
                    .enumerate()
                    .map(|(i, c)| ((i + 1) as f64 * PI * c).powi(2))
                    .sum(),
            };
            let via_energy = f.energy_norm().powi(2);
            let via_frac = space.discrete_fractional(&f, 0.5).norm().powi(2);
            worst = worst.max((via_energy - hand).abs() / hand);
            worst = worst.max((via_frac - hand).abs() / hand);
        }
    }

    // Inverse-projection identity A_h^{-1} P_h x = R_h A^{-1} x, plus an
    // independent element-space oracle: stiffness solve of the
    // closed-form loads.
    for t in 0..trials {
        let x = random_vec(&basis, &rng, 14, t, 2.0);
        for space in [&fem, &spec] {
            let lhs = space.apply_operator_inverse(&space.project_l2(&x));
            let rhs = space.project_ritz(&x.fractional_power(-1.0));
            worst = worst.max(max_abs_dev(lhs.coords(), rhs.coords()) / lhs.norm());
        }
        let loads: Vec<f64> = (1..=fem.dim())
            .map(|i| (1..=basis.modes()).map(|n| x.coeff(n) * hat_mode_inner(n, i, h)).sum())
            .collect();
        let kdiag = vec![2.0 / h; fem.dim()];
        let koff = vec![-1.0 / h; fem.dim() - 1];
        let oracle = thomas(&kdiag, &koff, &loads);
        let lhs = fem.apply_operator_inverse(&fem.project_l2(&x));
        worst = worst.max(max_abs_dev(&oracle, lhs.coords()) / lhs.norm());
    }

    // Inverse inequality ||A_h^{1/2} y|| <= C h^{-1} ||y||, C = sqrt(12)
    // for elements and 1 for the spectral mesh parameter.
    for t in 0..trials {
        let f = fem.field(random_coords(fem.dim(), &rng, 15, t))?;
        bounds_ok &= f.energy_norm() <= 12f64.sqrt() / h * f.norm() * (1.0 + 1e-12);
        let f = spec.field(random_coords(spec.dim(), &rng, 16, t))?;
        bounds_ok &= f.energy_norm() <= f.norm() / spec.h() * (1.0 + 1e-12);
    }

    // Energy-orthogonality of the Ritz projection, through the exact
    // stiffness action: a(x - R_h x, phi_i) = r_i - (K c)_i with loads
    // r_i = a(x, phi_i) from closed-form inner products and K applied as
    // the hand tridiagonal; for the spectral space the projection is the
    // exact truncation. (Summing lambda_n res_n (phi_i, e_n) over the
    // retained modes would drop the stiffness tail of the piecewise
    // linears and misreport an O(1/modes) residual.)
    for t in 0..trials {
        let x = random_vec(&basis, &rng, 17, t, 2.0);
        let proj = fem.project_ritz(&x);
        let c = proj.coords();
        let scale = x.sobolev_norm(1.0) * (2.0 / h).sqrt();
        for i in 1..=fem.dim() {
            let r: f64 = (1..=basis.modes())
                .map(|n| (n as f64 * PI).powi(2) * x.coeff(n) * hat_mode_inner(n, i, h))
                .sum();
            let kc = 2.0 / h * c[i - 1]
                - if i > 1 { c[i - 2] / h } else { 0.0 }
                - if i < fem.dim() { c[i] / h } else { 0.0 };
            worst = worst.max((r - kc).abs() / scale);
        }
        let res = spec.lift(&spec.project_ritz(&x)).sub(&x);
        for n in 1..=spec.dim() {
            bounds_ok &= res.coeff(n) == 0.0;
        }
    }

    // Contraction of the implicit step factor for any step size.
    for t in 0..trials {
        for space in [&fem, &spec] {
            let f = space.field(random_coords(space.dim(), &rng, 18, t))?;
            for k in [1e-3, 0.1, 10.0] {
                bounds_ok &=
                    space.rational_step(&f, k, 1)?.norm() <= f.norm() * (1.0 + 1e-12);
            }
        }
    }

    // Coarsening is exact block summation of the fine increments, bit
    // for bit, and preserves the step-size product.
    let cov = CovarianceSpec::new(1.05)?;
    let fine = NoisePath::<f64>::sample(&cov, 1.0 / 512.0, 512, 32, 99)?;
    let mut coarsen_exact = true;
    for factor in [2usize, 4, 8] {
        let coarse = fine.coarsen(factor)?;
        coarsen_exact &= coarse.steps() == 512 / factor;
        coarsen_exact &= coarse.k() == (1.0 / 512.0) * factor as f64;
        for jc in 1..=coarse.steps() {
            let got = coarse.step_increments(jc);
            for m in 0..32 {
                let want = ((jc - 1) * factor + 1..=jc * factor)
                    .fold(0.0f64, |acc, jf| acc + fine.step_increments(jf)[m]);
                coarsen_exact &= got[m].to_bits() == want.to_bits();
            }
        }
    }

    // Bit-identical reruns of a parallel Monte Carlo estimate and of the
    // noise table itself.
    let p3 = ProblemSpec::<f64>::builtin("P3")?;
    let coarse = Discretization::new(&GalerkinSpace::spectral(&basis, 16)?, 1.0 / 64.0);
    let reference = Discretization::new(&GalerkinSpace::spectral(&basis, 64)?, 1.0 / 512.0);
    let e1 = strong_error(&p3, &coarse, &reference, 32, 16, 2.0, 2024)?;
    let e2 = strong_error(&p3, &coarse, &reference, 32, 16, 2.0, 2024)?;
    let mut repro = e1.value.to_bits() == e2.value.to_bits()
        && e1.stderr.to_bits() == e2.stderr.to_bits();
    let pa = NoisePath::<f64>::sample(&cov, 1.0 / 512.0, 64, 32, 4321)?;
    let pb = NoisePath::<f64>::sample(&cov, 1.0 / 512.0, 64, 32, 4321)?;
    for j in 1..=64 {
        let (a, b) = (pa.step_increments(j), pb.step_increments(j));
        repro &= a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
    }

    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-10 && bounds_ok && coarsen_exact && repro && elapsed < 30.0;
    Ok((pass, format!(
        "identities worst rel dev {worst:.1e} (tol 1e-10); bounds {}, coarsening {}, reruns {} \
         [{elapsed:.1} s]",
        if bounds_ok { "hold" } else { "VIOLATED" },
        if coarsen_exact { "exact" } else { "INEXACT" },
        if repro { "bit-identical" } else { "DIVERGED" }
    )))
}

// ---- criterion 11: assumption probes ---------------------------------------

fn criterion_11() -> Result<(bool, String)> {
    let start = Instant::now();
    let basis = EigenBasis::<f64>::with_default_grid(64)?;
    let rng = CounterRng::new(4321);
    let mut ok = true;
    let mut notes = Vec::new();

    // Declared Lipschitz constants must dominate the sampled ratios
    // (5% headroom for the probe's finite sampling).
    for name in ["P1", "P2", "P3", "P4"] {
        let problem = ProblemSpec::<f64>::builtin(name)?;
        let fp = problem.drift_lipschitz_probe(&basis, 100, 11);
        let fb = problem.drift_lipschitz_bound();
        let gp = problem.diffusion_lipschitz_probe(&basis, 64, 100, 11);
        let gb = problem.diffusion_lipschitz_bound(64);
        ok &= fp <= fb * 1.05 + 1e-12 && gp <= gb * 1.05 + 1e-12;
    }
    notes.push("lipschitz ratios within declared bounds".to_string());

    // Linear-growth ratio of the diffusion in the solution norm.
    let mut growth: Vec<String> = Vec::new();
    for name in ["P1", "P2", "P3", "P4"] {
        let problem = ProblemSpec::<f64>::builtin(name)?;
        let r = problem.regularity();
        let mut worst: f64 = 0.0;
        for t in 0..100u64 {
            let u = random_vec(&basis, &rng, 20, t, 2.0);
            let g = problem.prepare_diffusion(&u, &basis);
            let hs = problem.covariance().weighted_hs_norm(64, r, |m| g.image(m));
            worst = worst.max(hs / (1.0 + u.sobolev_norm(r)));
        }
        ok &= worst.is_finite() && worst < 10.0;
        growth.push(format!("{name}={worst:.2}"));
    }
    notes.push(format!("growth ratios {}", growth.join(" ")));

    // Ritz projection approximation orders 1 and 2 over element meshes,
    // driven by fields of just enough regularity for each order.
    let basis_fem = EigenBasis::<f64>::with_default_grid(512)?;
    let mut ritz = Vec::new();
    for (decay, expect) in [(1.51, 1.0), (3.5, 2.0)] {
        let coeffs: Vec<f64> = (1..=512).map(|n| (n as f64).powf(-decay)).collect();
        let x = SobolevVector::new(&basis_fem, coeffs)?;
        let mut pts = Vec::new();
        for el in [8usize, 16, 32, 64, 128] {
            let space = GalerkinSpace::fem_p1(&basis_fem, el)?;
            let err = x.sub(&space.lift(&space.project_ritz(&x))).norm();
            pts.push((1.0 / el as f64, err, 0.0));
        }
        let fit = fit_rate(&pts)?;
        ok &= (fit.slope - expect).abs() <= 0.1;
        ritz.push(format!("{:.3}/{expect}", fit.slope));
    }
    notes.push(format!("ritz orders {}", ritz.join(" ")));

    // H1 stability constants of the L2 projection, reported per mesh.
    let mut stab = Vec::new();
    for el in [8usize, 32, 128] {
        let space = GalerkinSpace::fem_p1(&basis_fem, el)?;
        let mut worst: f64 = 0.0;
        for t in 0..30u64 {
            let x = random_vec(&basis_fem, &rng, 21, t, 1.6);
            worst = worst.max(space.project_l2(&x).energy_norm() / x.sobolev_norm(1.0));
        }
        ok &= worst.is_finite() && worst <= 10.0;
        stab.push(format!("1/{el}:{worst:.2}"));
    }
    {
        let space = GalerkinSpace::spectral(&basis, 32)?;
        let mut worst: f64 = 0.0;
        for t in 0..30u64 {
            let x = random_vec(&basis, &rng, 22, t, 1.6);
            worst = worst.max(space.project_l2(&x).energy_norm() / x.sobolev_norm(1.0));
        }
        ok &= worst.is_finite() && worst <= 1.0 + 1e-12;
        stab.push(format!("spectral:{worst:.2}"));
    }
    notes.push(format!("projection stability {}", stab.join(" ")));

    let elapsed = start.elapsed().as_secs_f64();
    let pass = ok && elapsed < 120.0;
    Ok((pass, format!("{} [{elapsed:.1} s]", notes.join("; "))))
}

// ---- driver ----------------------------------------------------------------

#[test]
fn acceptance_criteria() {
    let checks: [(u32, fn() -> Result<(bool, String)>); 11] = [
        (1, criterion_01),
        (2, criterion_02),
        (3, criterion_03),
        (4, criterion_04),
        (5, criterion_05),
        (6, criterion_06),
        (7, criterion_07),
        (8, criterion_08),
        (9, criterion_09),
        (10, criterion_10),
        (11, criterion_11),
    ];
    let mut failures = Vec::new();
    for (num, check) in checks {
        let (pass, detail) = match check() {
            Ok(outcome) => outcome,
            Err(e) => (false, format!("error: {e}")),
        };
        println!("criterion {num:02}: {} - {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failures.push(num);
        }
    }
    assert!(failures.is_empty(), "failed acceptance criteria: {failures:?}");
}
