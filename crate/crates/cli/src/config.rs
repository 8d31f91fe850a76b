//! Configuration loading, strict validation, and resolution.
//!
//! A run is described by a flat key set that can come from a JSON config
//! file, from long-form command-line flags mirroring every key, or from
//! the environment (`SPDELAB_SEED`). Later sources override earlier ones.
//! Validation is strict (unknown keys are rejected) and total: every
//! problem found in the input is reported at once, and nothing is computed
//! or written unless the whole configuration is valid.

use serde::Serialize;
use sha2::{Digest, Sha256};
use spdelab::error_ops::LemmaId;
use spdelab::noise::CovarianceSpec;

/// A partially specified configuration; `None` means "not given here".
#[derive(Default, Clone, Debug)]
pub struct Raw {
    pub command: Option<String>,
    pub problem: Option<String>,
    pub axis: Option<String>,
    pub space: Option<String>,
    pub id: Option<String>,
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub rho: Option<f64>,
    pub levels: Option<u64>,
    pub samples: Option<u64>,
    pub p: Option<f64>,
    pub seed: Option<u64>,
    pub basis_modes: Option<u64>,
    pub noise_modes: Option<u64>,
    pub k: Option<f64>,
    pub t_end: Option<f64>,
    pub beta: Option<f64>,
    pub expected: Option<f64>,
    pub tol: Option<f64>,
    pub out: Option<String>,
    pub csv: Option<String>,
    pub manifest: Option<String>,
    pub svg: Option<String>,
}

impl Raw {
    /// Overlays `other` on `self`: keys present in `other` win.
    pub fn overlay(&mut self, other: Raw) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            command, problem, axis, space, id, mu, nu, rho, levels, samples, p, seed,
            basis_modes, noise_modes, k, t_end, beta, expected, tol, out, csv, manifest,
            svg
        );
    }
}

/// Parses a JSON config document into a `Raw`, collecting every problem
/// (syntax, unknown keys, wrong types) instead of stopping at the first.
/// Empty or whitespace-only input is treated as the empty object so that
/// the downstream "missing command" diagnostic fires.
pub fn parse_json(text: &str, errors: &mut Vec<String>) -> Raw {
    let mut raw = Raw::default();
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return raw;
    }
    let value: serde_json::Value = match serde_json::from_str(trimmed) {
        Ok(v) => v,
        Err(e) => {
            errors.push(format!("config file is not valid JSON: {e}"));
            return raw;
        }
    };
    let obj = match value.as_object() {
        Some(o) => o,
        None => {
            errors.push("config file must contain a JSON object".to_string());
            return raw;
        }
    };
    for (key, val) in obj {
        match key.as_str() {
            "command" => raw.command = take_string(key, val, errors),
            "problem" => raw.problem = take_string(key, val, errors),
            "axis" => raw.axis = take_string(key, val, errors),
            "space" => raw.space = take_string(key, val, errors),
            "id" => raw.id = take_string(key, val, errors),
            "mu" => raw.mu = take_number(key, val, errors),
            "nu" => raw.nu = take_number(key, val, errors),
            "rho" => raw.rho = take_number(key, val, errors),
            "levels" => raw.levels = take_unsigned(key, val, errors),
            "samples" => raw.samples = take_unsigned(key, val, errors),
            "p" => raw.p = take_number(key, val, errors),
            "seed" => raw.seed = take_unsigned(key, val, errors),
            "basis_modes" => raw.basis_modes = take_unsigned(key, val, errors),
            "noise_modes" => raw.noise_modes = take_unsigned(key, val, errors),
            "k" => raw.k = take_number(key, val, errors),
            "t_end" => raw.t_end = take_number(key, val, errors),
            "beta" => raw.beta = take_number(key, val, errors),
            "expected" => raw.expected = take_number(key, val, errors),
            "tol" => raw.tol = take_number(key, val, errors),
            "out" => raw.out = take_string(key, val, errors),
            "csv" => raw.csv = take_string(key, val, errors),
            "manifest" => raw.manifest = take_string(key, val, errors),
            "svg" => raw.svg = take_string(key, val, errors),
            other => errors.push(format!(
                "unknown key {other:?} (strict mode rejects keys outside the schema)"
            )),
        }
    }
    raw
}

fn take_string(key: &str, val: &serde_json::Value, errors: &mut Vec<String>) -> Option<String> {
    match val.as_str() {
        Some(s) => Some(s.to_string()),
        None => {
            errors.push(format!("key {key:?} must be a string, got {val}"));
            None
        }
    }
}

fn take_number(key: &str, val: &serde_json::Value, errors: &mut Vec<String>) -> Option<f64> {
    match val.as_f64() {
        Some(x) => Some(x),
        None => {
            errors.push(format!("key {key:?} must be a number, got {val}"));
            None
        }
    }
}

fn take_unsigned(key: &str, val: &serde_json::Value, errors: &mut Vec<String>) -> Option<u64> {
    match val.as_u64() {
        Some(x) => Some(x),
        None => {
            errors.push(format!("key {key:?} must be a non-negative integer, got {val}"));
            None
        }
    }
}

/// The fully resolved experiment configuration: every default filled in,
/// every derived quantity pinned. Serialization order is the struct order,
/// which makes the config digest stable. Output paths live outside this
/// struct so the digest describes the experiment, not artifact placement.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub command: String,
    pub problem: String,
    pub axis: String,
    pub space: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub mu: f64,
    pub nu: f64,
    pub rho: f64,
    pub levels: usize,
    pub samples: usize,
    pub p: f64,
    pub seed: u64,
    pub basis_modes: usize,
    pub noise_modes: usize,
    pub k: f64,
    pub t_end: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub expected: f64,
    pub tol: f64,
}

/// Where the artifacts go; echoed in the manifest but not digested.
#[derive(Clone, Debug, Serialize)]
pub struct Outputs {
    pub out: String,
    pub csv: String,
    pub manifest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub svg: Option<String>,
}

/// Concrete discretization ladder derived from a `Resolved` config.
#[derive(Clone, Debug, Default)]
pub struct Dims {
    /// Spectral dimensions or element counts, one per spatial level (a
    /// single entry for temporal studies and the Hoelder probe).
    pub sizes: Vec<usize>,
    /// Spectral dimension of the coupling reference (convergence runs).
    pub ref_n: usize,
    /// Step sizes per temporal level, strictly decreasing.
    pub k_levels: Vec<f64>,
    /// Reference step size (convergence runs).
    pub k_ref: f64,
    /// Hoelder lags in whole steps.
    pub lags: Vec<usize>,
}

fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// Inner message of a library error; the collected list already labels
/// everything as a config error, so the kind prefix would be redundant.
fn core_msg(e: spdelab::Error) -> String {
    match e {
        spdelab::Error::Config(m)
        | spdelab::Error::Domain(m)
        | spdelab::Error::Shape(m)
        | spdelab::Error::Numeric(m) => m,
    }
}

fn builtin_regularity(problem: &str) -> f64 {
    if problem == "P1" {
        1.0
    } else {
        0.5
    }
}

/// Validates the merged raw configuration and resolves it into a concrete
/// plan. Returns the full list of problems when anything is wrong.
pub fn resolve(raw: &Raw) -> Result<(Resolved, Outputs, Dims), Vec<String>> {
    let mut errors = Vec::new();

    let command = match raw.command.as_deref() {
        None => {
            errors.push("missing command (one of: lemma, converge, holder, probe)".to_string());
            String::new()
        }
        Some(c @ ("lemma" | "converge" | "holder" | "probe")) => c.to_string(),
        Some(other) => {
            errors.push(format!(
                "unknown command {other:?}; choose one of lemma, converge, holder, probe"
            ));
            String::new()
        }
    };

    let problem = raw.problem.clone().unwrap_or_else(|| "P1".to_string());
    if !matches!(problem.as_str(), "P1" | "P2" | "P3" | "P4") {
        errors.push(format!(
            "unknown problem {problem:?}; built-ins are P1, P2, P3, P4"
        ));
    }

    let axis = raw.axis.clone().unwrap_or_else(|| "spatial".to_string());
    if !matches!(axis.as_str(), "spatial" | "temporal") {
        errors.push(format!("axis must be \"spatial\" or \"temporal\", got {axis:?}"));
    }

    let space = raw.space.clone().unwrap_or_else(|| "spectral".to_string());
    if !matches!(space.as_str(), "spectral" | "fem") {
        errors.push(format!("space must be \"spectral\" or \"fem\", got {space:?}"));
    }

    let mu = raw.mu.unwrap_or(1.0);
    let nu = raw.nu.unwrap_or(0.0);
    let rho = raw.rho.unwrap_or(0.5);
    for (name, v) in [("mu", mu), ("nu", nu), ("rho", rho)] {
        if !v.is_finite() {
            errors.push(format!("key {name:?} must be finite, got {v}"));
        }
    }

    // The lemma id determines its axis; other commands use the axis key.
    let mut lemma_axis_temporal = false;
    let id = match (command.as_str(), raw.id.as_deref()) {
        ("lemma", None) => {
            errors.push("the lemma command needs an id (e.g. --id Fh1_i)".to_string());
            None
        }
        ("lemma", Some(s)) => match LemmaId::parse(s) {
            Ok(parsed) => {
                lemma_axis_temporal =
                    parsed.axis() == spdelab::error_ops::CheckAxis::TimeK;
                if mu.is_finite() && nu.is_finite() && rho.is_finite() {
                    if let Err(e) = parsed.validate_params(&spdelab::error_ops::LemmaParams {
                        mu,
                        nu,
                        rho,
                    }) {
                        errors.push(core_msg(e));
                    }
                }
                Some(s.to_string())
            }
            Err(e) => {
                errors.push(core_msg(e));
                None
            }
        },
        (_, Some(s)) => Some(s.to_string()),
        (_, None) => None,
    };

    let levels = raw.levels.unwrap_or(match command.as_str() {
        "converge" => 4,
        "lemma" => 6,
        "holder" => 7,
        _ => 5,
    }) as usize;
    let min_levels = if command == "converge" { 3 } else { 2 };
    if levels < min_levels {
        errors.push(format!(
            "the {command} command needs at least {min_levels} levels, got {levels}"
        ));
    }
    if levels > 12 {
        errors.push(format!("levels capped at 12 to keep runs tractable, got {levels}"));
    }

    let samples = raw.samples.unwrap_or(100) as usize;
    if samples < 2 {
        errors.push(format!("need at least two samples, got {samples}"));
    }
    let p = raw.p.unwrap_or(2.0);
    if !(p >= 2.0 && p.is_finite()) {
        errors.push(format!("moment order p must be a finite number >= 2, got {p}"));
    }
    let seed = raw.seed.unwrap_or(0);

    let temporal = if command == "lemma" {
        lemma_axis_temporal
    } else {
        axis == "temporal"
    };
    let k = raw.k.unwrap_or(match (command.as_str(), temporal) {
        ("converge", true) => 0.125,
        ("lemma", true) => 0.0625,
        _ => 1.0 / 4096.0,
    });
    if !(k > 0.0 && k.is_finite() && k <= 0.5) {
        errors.push(format!("step size k must lie in (0, 1/2], got {k}"));
    }
    let t_end = raw.t_end.unwrap_or(1.0);
    if !(t_end > 0.0 && t_end.is_finite()) {
        errors.push(format!("horizon t_end must be positive and finite, got {t_end}"));
    }

    if let Some(beta) = raw.beta {
        if let Err(e) = CovarianceSpec::new(beta) {
            errors.push(core_msg(e));
        }
    }

    let tol = raw.tol.unwrap_or(match command.as_str() {
        "converge" => {
            if temporal {
                0.12
            } else {
                0.3
            }
        }
        "lemma" => {
            if !temporal && space == "fem" {
                0.15
            } else {
                0.05
            }
        }
        "holder" => 0.1,
        _ => 0.15,
    });
    if !(tol > 0.0 && tol.is_finite()) {
        errors.push(format!("tolerance must be positive and finite, got {tol}"));
    }

    // Derive the discretization ladder; sizes grow as 4*2^j (spectral) or
    // 8*2^j (elements) so every level nests in the next.
    let mut dims = Dims::default();
    let mut basis_auto = 256usize;
    let mut noise_auto = 128usize;
    if errors.is_empty() {
        match (command.as_str(), temporal) {
            ("converge", false) => {
                if space == "spectral" {
                    dims.sizes = (0..levels).map(|j| 4 << j).collect();
                    let n_fin = *dims.sizes.last().unwrap();
                    dims.ref_n = 4 * (n_fin + 1) - 1;
                } else {
                    dims.sizes = (0..levels).map(|j| 8 << j).collect();
                    let el_fin = *dims.sizes.last().unwrap();
                    dims.ref_n = 2 * el_fin - 1;
                }
                dims.k_levels = vec![k; levels];
                dims.k_ref = k;
                // Headroom for the twice-refined bias-probe reference.
                basis_auto = next_pow2(2 * dims.ref_n).max(256);
                noise_auto = dims.ref_n;
            }
            ("converge", true) => {
                dims.sizes = vec![64];
                dims.k_levels = (0..levels).map(|j| k / (1u64 << j) as f64).collect();
                dims.k_ref = dims.k_levels.last().unwrap() / 64.0;
                basis_auto = 256;
                noise_auto = 128;
            }
            ("lemma", false) => {
                if space == "spectral" {
                    dims.sizes = (0..levels).map(|j| 4 << j).collect();
                    basis_auto = next_pow2(2 * dims.sizes.last().unwrap()).max(256);
                } else {
                    dims.sizes = (0..levels).map(|j| 8 << j).collect();
                    basis_auto = next_pow2(4 * dims.sizes.last().unwrap()).max(512);
                }
                noise_auto = 0;
            }
            ("lemma", true) => {
                basis_auto = 1024;
                let b = raw.basis_modes.map(|b| b as usize).unwrap_or(basis_auto);
                dims.sizes = vec![(b / 4).max(4)];
                dims.k_levels = (0..levels).map(|j| k / (1u64 << j) as f64).collect();
                noise_auto = 0;
            }
            ("holder", _) => {
                dims.sizes = vec![32];
                dims.lags = (0..levels).map(|j| 1usize << j).collect();
                basis_auto = 64;
                noise_auto = 48;
                let steps = (t_end / k + 1e-9).floor() as usize;
                let max_lag = *dims.lags.last().unwrap();
                let last_anchor = (0.75 * steps as f64).round() as usize;
                if last_anchor + max_lag > steps {
                    errors.push(format!(
                        "largest lag {max_lag} plus the last anchor exceeds the \
                         {steps}-step horizon; reduce levels or the step size k"
                    ));
                }
            }
            ("probe", _) => {
                dims.sizes = (0..levels).map(|j| 8 << j).collect();
                basis_auto = 128.max(next_pow2(2 * dims.sizes.last().unwrap()));
                noise_auto = basis_auto / 2;
            }
            _ => {}
        }
    }

    let basis_modes = raw.basis_modes.map(|b| b as usize).unwrap_or(basis_auto);
    let noise_modes = raw.noise_modes.map(|n| n as usize).unwrap_or(noise_auto);
    if errors.is_empty() {
        let mut basis_req = 1usize;
        match (command.as_str(), temporal) {
            ("converge", false) => {
                // Bias probe doubles the spectral reference dimension.
                basis_req = 2 * dims.ref_n;
                if space == "fem" {
                    basis_req = basis_req.max(*dims.sizes.last().unwrap() + 1);
                }
            }
            ("converge", true) | ("holder", _) => {
                basis_req = dims.sizes[0] + 1;
            }
            ("lemma", _) => {
                // Lemma levels must leave tail modes in the basis.
                basis_req = 2 * dims.sizes.last().unwrap();
            }
            ("probe", _) => {
                basis_req = dims.sizes.last().unwrap() + 1;
            }
            _ => {}
        }
        if basis_modes < basis_req {
            errors.push(format!(
                "basis_modes {basis_modes} is too small for this study; need at least \
                 {basis_req}"
            ));
        }
        let needs_noise = matches!(command.as_str(), "converge" | "holder" | "probe");
        if needs_noise && (noise_modes == 0 || noise_modes > basis_modes) {
            errors.push(format!(
                "noise_modes must lie in 1..={basis_modes}, got {noise_modes}"
            ));
        }
    }

    let expected = raw.expected.unwrap_or_else(|| match command.as_str() {
        "converge" => {
            if temporal {
                0.5
            } else {
                1.0 + builtin_regularity(&problem)
            }
        }
        "lemma" => id
            .as_deref()
            .and_then(|s| LemmaId::parse(s).ok())
            .map(|l| l.expected_slope(&spdelab::error_ops::LemmaParams { mu, nu, rho }))
            .unwrap_or(0.0),
        "holder" => 0.5,
        _ => 0.0,
    });
    if !expected.is_finite() {
        errors.push(format!("expected slope must be finite, got {expected}"));
    }

    let outputs = Outputs {
        out: raw.out.clone().unwrap_or_else(|| ".".to_string()),
        csv: raw.csv.clone().unwrap_or_else(|| "results.csv".to_string()),
        manifest: raw.manifest.clone().unwrap_or_else(|| "manifest.json".to_string()),
        svg: raw.svg.clone(),
    };

    if !errors.is_empty() {
        return Err(errors);
    }
    let resolved = Resolved {
        command,
        problem,
        axis: if temporal { "temporal" } else { "spatial" }.to_string(),
        space,
        id,
        mu,
        nu,
        rho,
        levels,
        samples,
        p,
        seed,
        basis_modes,
        noise_modes,
        k,
        t_end,
        beta: raw.beta,
        expected,
        tol,
    };
    Ok((resolved, outputs, dims))
}

/// SHA-256 of the canonical JSON serialization of the resolved config.
pub fn digest(resolved: &Resolved) -> String {
    let canon = serde_json::to_string(resolved).expect("resolved config serializes");
    let mut hasher = Sha256::new();
    hasher.update(canon.as_bytes());
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_reports_missing_command() {
        let mut errors = Vec::new();
        let raw = parse_json("", &mut errors);
        assert!(errors.is_empty());
        let err = resolve(&raw).unwrap_err();
        assert!(err.iter().any(|e| e.contains("missing command")), "{err:?}");
    }

    #[test]
    fn unknown_key_and_bad_beta_collected_together() {
        let mut errors = Vec::new();
        let raw = parse_json(
            r#"{"command": "holder", "beta": 0.4, "bogus": 1}"#,
            &mut errors,
        );
        assert!(errors.iter().any(|e| e.contains("bogus")), "{errors:?}");
        let err = resolve(&raw).unwrap_err();
        assert!(err.iter().any(|e| e.contains("trace-class")), "{err:?}");
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let mut errors = Vec::new();
        let raw = parse_json(r#"{"command": "holder"}"#, &mut errors);
        assert!(errors.is_empty());
        let (resolved, outputs, dims) = resolve(&raw).unwrap();
        assert_eq!(resolved.problem, "P1");
        assert_eq!(resolved.samples, 100);
        assert_eq!(resolved.expected, 0.5);
        assert_eq!(dims.lags, vec![1, 2, 4, 8, 16, 32, 64]);
        assert_eq!(outputs.csv, "results.csv");
        // The digest is a pure function of the resolved config.
        assert_eq!(digest(&resolved), digest(&resolved.clone()));
    }

    #[test]
    fn converge_spatial_reference_is_four_times_finer() {
        let mut errors = Vec::new();
        let raw = parse_json(r#"{"command": "converge", "levels": 4}"#, &mut errors);
        let (resolved, _, dims) = resolve(&raw).unwrap();
        let n_fin = *dims.sizes.last().unwrap();
        assert_eq!(dims.ref_n + 1, 4 * (n_fin + 1));
        assert!(resolved.basis_modes >= 2 * dims.ref_n);
    }
}
