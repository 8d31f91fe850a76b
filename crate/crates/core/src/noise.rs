//! Q-Wiener process: covariance spectra, sampled increment paths, and
//! Hilbert-Schmidt norms weighted by the covariance.
//!
//! The covariance operator Q shares the eigenbasis of A with eigenvalues
//! q_m = m^{-2 beta}, beta > 1/2, so that Q has finite trace. A path is
//! the table of increments
//!
//!   d_{j,m} = (W(t_j) - W(t_{j-1}), e_m) = sqrt(q_m k) xi_{j,m},
//!
//! with xi_{j,m} standard normal drawn from the counter-based generator
//! keyed by (step, mode). Paths are therefore a pure function of
//! (seed, k, steps, modes): refining or re-running reproduces the same
//! numbers, and a coarse path is recovered exactly by summing fine
//! increments within each coarse step.

use crate::basis::SobolevVector;
use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::scalar::Scalar;

/// Spectrum q_m = m^{-2 beta} of the covariance operator.
#[derive(Clone, Debug)]
pub struct CovarianceSpec {
    beta: f64,
}

impl CovarianceSpec {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.5) || !beta.is_finite() {
            return Err(Error::config(format!(
                "covariance decay beta must exceed 1/2 for a trace-class Q, got {beta}"
            )));
        }
        Ok(CovarianceSpec { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Eigenvalue q_m, 1-based mode index.
    pub fn q<S: Scalar>(&self, m: usize) -> S {
        S::from_usize_exact(m).powf(S::of(-2.0 * self.beta))
    }

    /// Partial trace sum_{m<=modes} q_m.
    pub fn trace<S: Scalar>(&self, modes: usize) -> S {
        (1..=modes).map(|m| self.q::<S>(m)).sum()
    }

    /// Integral bound on the neglected tail sum_{m>modes} q_m.
    pub fn trace_tail_bound<S: Scalar>(&self, modes: usize) -> S {
        let e = 1.0 - 2.0 * self.beta;
        S::of((modes as f64).powf(e) / (2.0 * self.beta - 1.0))
    }

    /// Hilbert-Schmidt norm of T Q^{1/2} measured in the dot(H)^rho norm:
    /// ( sum_m q_m ||T e_m||_rho^2 )^{1/2}, with `op_action(m)` = T e_m.
    pub fn weighted_hs_norm<S: Scalar, F>(&self, modes: usize, rho: f64, mut op_action: F) -> S
    where
        F: FnMut(usize) -> SobolevVector<S>,
    {
        let mut total = S::zero();
        for m in 1..=modes {
            let image = op_action(m);
            let n = image.sobolev_norm(rho);
            total += self.q::<S>(m) * n * n;
        }
        total.sqrt()
    }
}

/// Sampled increment table of one Wiener path on a uniform step grid.
#[derive(Clone)]
pub struct NoisePath<S> {
    k: S,
    steps: usize,
    modes: usize,
    /// Row-major by step: increments[(j-1)*modes + (m-1)].
    increments: Vec<S>,
}

impl<S: Scalar> NoisePath<S> {
    /// Draws the full table for `steps` steps of size `k` and `modes`
    /// retained covariance modes.
    pub fn sample(cov: &CovarianceSpec, k: S, steps: usize, modes: usize, seed: u64) -> Result<Self> {
        if k <= S::zero() || !k.is_finite() {
            return Err(Error::config("noise step size must be positive"));
        }
        if steps == 0 || modes == 0 {
            return Err(Error::config("noise path needs at least one step and one mode"));
        }
        let rng = CounterRng::new(seed);
        let scales: Vec<S> = (1..=modes).map(|m| (cov.q::<S>(m) * k).sqrt()).collect();
        let mut increments = Vec::with_capacity(steps * modes);
        for j in 1..=steps {
            for (m, &scale) in scales.iter().enumerate() {
                increments.push(scale * S::of(rng.normal(j as u64, (m + 1) as u64)));
            }
        }
        Ok(NoisePath { k, steps, modes, increments })
    }

    pub fn k(&self) -> S {
        self.k
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Increment coefficients of step j (1-based), one entry per mode.
    pub fn step_increments(&self, j: usize) -> &[S] {
        assert!(j >= 1 && j <= self.steps, "step {j} of {}", self.steps);
        &self.increments[(j - 1) * self.modes..j * self.modes]
    }

    /// The first `steps` steps of this path, increments copied verbatim.
    pub fn truncated(&self, steps: usize) -> Result<Self> {
        if steps == 0 || steps > self.steps {
            return Err(Error::config(format!(
                "cannot keep {steps} of {} steps",
                self.steps
            )));
        }
        Ok(NoisePath {
            k: self.k,
            steps,
            modes: self.modes,
            increments: self.increments[..steps * self.modes].to_vec(),
        })
    }

    /// Exact coarse path: sums each block of `factor` fine increments in
    /// ascending step order, so W is evaluated at the same gridpoints.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.steps % factor != 0 {
            return Err(Error::config(format!(
                "coarsening factor {factor} does not divide {} steps",
                self.steps
            )));
        }
        let steps = self.steps / factor;
        let mut increments = vec![S::zero(); steps * self.modes];
        for jc in 0..steps {
            for jf in jc * factor..(jc + 1) * factor {
                let src = &self.increments[jf * self.modes..(jf + 1) * self.modes];
                let dst = &mut increments[jc * self.modes..(jc + 1) * self.modes];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        Ok(NoisePath {
            k: self.k * S::from_usize_exact(factor),
            steps,
            modes: self.modes,
            increments,
        })
    }
}
