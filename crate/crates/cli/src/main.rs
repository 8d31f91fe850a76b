//! Configuration-driven experiment runner for the spdelab library.
//!
//! A run is described by a flat key set coming from a JSON config file
//! (`--config`), long-form flags mirroring every key, and the environment
//! (`SPDELAB_SEED` overrides the seed, `SPDELAB_THREADS` caps worker
//! concurrency). Each run writes a results CSV, a JSON manifest, and
//! optionally an SVG log-log plot.
//!
//! Exit status: 0 when the embedded assertion window passes, 1 on FAIL or
//! a runtime numeric failure, 2 on configuration errors, 3 on I/O errors.

mod config;
mod report;
mod runner;
mod svg;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::Raw;

#[derive(Parser)]
#[command(
    name = "spdelab",
    version,
    about = "Strong-convergence experiments for semilinear SPDE discretizations",
    after_help = "Every key can also come from a JSON config file via --config; \
                  flags override file keys, and SPDELAB_SEED overrides both."
)]
struct Cli {
    /// JSON config file providing any of the keys below
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Built-in problem name: P1, P2, P3, or P4
    #[arg(long, global = true)]
    problem: Option<String>,
    /// Convergence axis: "spatial" or "temporal"
    #[arg(long, global = true)]
    axis: Option<String>,
    /// Discretization family: "spectral" or "fem"
    #[arg(long, global = true)]
    space: Option<String>,
    /// Error-operator estimate id (lemma command), e.g. Fh1_i
    #[arg(long, global = true)]
    id: Option<String>,
    /// Smoothness exponent mu for lemma checks
    #[arg(long, global = true)]
    mu: Option<f64>,
    /// Smoothness exponent nu for lemma checks
    #[arg(long, global = true)]
    nu: Option<f64>,
    /// Negative-order exponent rho for lemma checks
    #[arg(long, global = true)]
    rho: Option<f64>,
    /// Number of refinement levels (dyadic ladder)
    #[arg(long, global = true)]
    levels: Option<u64>,
    /// Monte Carlo samples (or probe trials)
    #[arg(long, global = true)]
    samples: Option<u64>,
    /// Moment order p of the strong error
    #[arg(long, global = true)]
    p: Option<f64>,
    /// Base seed for the counter RNG
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Reference eigenbasis size (derived from the ladder when absent)
    #[arg(long = "basis_modes", global = true)]
    basis_modes: Option<u64>,
    /// Noise truncation level (derived when absent)
    #[arg(long = "noise_modes", global = true)]
    noise_modes: Option<u64>,
    /// Time step (spatial studies / Hoelder probe) or coarsest step
    #[arg(long, global = true)]
    k: Option<f64>,
    /// Time horizon T
    #[arg(long = "t_end", global = true)]
    t_end: Option<f64>,
    /// Covariance decay override: q_m = m^(-2 beta), beta > 1/2
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Expected slope of the fit (defaults follow the theory)
    #[arg(long, global = true)]
    expected: Option<f64>,
    /// Slope tolerance of the embedded assertion window
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<String>,
    /// Results CSV filename
    #[arg(long, global = true)]
    csv: Option<String>,
    /// Manifest JSON filename
    #[arg(long, global = true)]
    manifest: Option<String>,
    /// Optional SVG plot filename
    #[arg(long, global = true)]
    svg: Option<String>,
    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Deterministic rate check of one error-operator estimate
    Lemma,
    /// Strong-convergence study along the spatial or temporal axis
    Converge,
    /// Mean-square temporal regularity (Hoelder exponent) probe
    Holder,
    /// Assumption probes: Lipschitz bounds, growth, Ritz projection
    Probe,
}

impl Cli {
    fn to_raw(&self) -> Raw {
        Raw {
            command: self.command.as_ref().map(|c| {
                match c {
                    Cmd::Lemma => "lemma",
                    Cmd::Converge => "converge",
                    Cmd::Holder => "holder",
                    Cmd::Probe => "probe",
                }
                .to_string()
            }),
            problem: self.problem.clone(),
            axis: self.axis.clone(),
            space: self.space.clone(),
            id: self.id.clone(),
            mu: self.mu,
            nu: self.nu,
            rho: self.rho,
            levels: self.levels,
            samples: self.samples,
            p: self.p,
            seed: self.seed,
            basis_modes: self.basis_modes,
            noise_modes: self.noise_modes,
            k: self.k,
            t_end: self.t_end,
            beta: self.beta,
            expected: self.expected,
            tol: self.tol,
            out: self.out.clone(),
            csv: self.csv.clone(),
            manifest: self.manifest.clone(),
            svg: self.svg.clone(),
        }
    }
}

fn print_config_errors(errors: &[String]) {
    for e in errors {
        eprintln!("config error: {e}");
    }
    eprintln!("{} configuration error(s); nothing was run or written", errors.len());
}

fn real_main() -> i32 {
    let cli = Cli::parse();
    let mut errors = Vec::new();

    let mut raw = Raw::default();
    if let Some(path) = &cli.config {
        match std::fs::read_to_string(path) {
            Ok(text) => raw = config::parse_json(&text, &mut errors),
            Err(e) => {
                eprintln!("i/o error: cannot read config file {}: {e}", path.display());
                return 3;
            }
        }
    }
    raw.overlay(cli.to_raw());

    if let Ok(value) = std::env::var("SPDELAB_SEED") {
        match value.parse::<u64>() {
            Ok(seed) => raw.seed = Some(seed),
            Err(_) => errors.push(format!(
                "SPDELAB_SEED must be an unsigned integer, got {value:?}"
            )),
        }
    }
    let threads = match std::env::var("SPDELAB_THREADS") {
        Ok(value) => match value.parse::<usize>() {
            Ok(n) if n >= 1 => Some(n),
            _ => {
                errors.push(format!(
                    "SPDELAB_THREADS must be a positive integer, got {value:?}"
                ));
                None
            }
        },
        Err(_) => None,
    };

    let (resolved, outputs, dims) = match config::resolve(&raw) {
        Ok(t) if errors.is_empty() => t,
        Ok(_) => {
            print_config_errors(&errors);
            return 2;
        }
        Err(mut errs) => {
            errors.append(&mut errs);
            print_config_errors(&errors);
            return 2;
        }
    };

    if let Some(n) = threads {
        // A failure here means a pool already exists; the cap then simply
        // does not apply, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let started = Instant::now();
    let out = match runner::run(&resolved, &dims) {
        Ok(out) => out,
        Err(err) => {
            eprintln!("{err}");
            return match err {
                spdelab::Error::Config(_) => 2,
                _ => 1,
            };
        }
    };

    let digest = config::digest(&resolved);
    let written = match report::write_artifacts(&resolved, &outputs, &out, &digest, started.elapsed())
    {
        Ok(paths) => paths,
        Err(e) => {
            eprintln!("i/o error: {e}");
            return 3;
        }
    };

    let verdict = if out.pass { "PASS" } else { "FAIL" };
    match out.slope {
        Some(slope) => println!(
            "{}: {verdict} (slope {slope:.4}, expected {:.4} +- {:.4})",
            out.experiment, resolved.expected, resolved.tol
        ),
        None => println!("{}: {verdict}", out.experiment),
    }
    println!("wrote {}", written.csv.display());
    println!("wrote {}", written.manifest.display());
    if let Some(svg) = &written.svg {
        println!("wrote {}", svg.display());
    }
    if out.pass {
        0
    } else {
        1
    }
}

fn main() {
    std::process::exit(real_main());
}
