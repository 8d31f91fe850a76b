//! Linear implicit Euler-Maruyama integration of the semilinear problem
//! on a Galerkin space.
//!
//! One step of the scheme treats the linear part implicitly and the
//! nonlinearities explicitly:
//!
//!   (I + k A_h) X^j = X^{j-1} - k P_h f(X^{j-1}) + P_h g(X^{j-1}) dW^j,
//!
//! starting from X^0 = P_h X_0. In finite element coordinates this is the
//! SPD tridiagonal system (M + k K) c^j = M c^{j-1} - k b_f + b_g with
//! load vectors b_f, b_g assembled from the closed-form mode/hat inner
//! products; on a spectral space every matrix is diagonal and the same
//! code path reduces to independent scalar recursions.
//!
//! The step size and step count come from the noise path, so a coarsened
//! path automatically drives the scheme on the matching coarse grid and
//! two runs that share a path are coupled sample by sample.

use crate::basis::SobolevVector;
use crate::error::{Error, Result};
use crate::noise::NoisePath;
use crate::problem::ProblemSpec;
use crate::scalar::Scalar;
use crate::space::{DiscreteField, GalerkinSpace};
use std::sync::Arc;

/// States of one scheme run at every gridpoint t_j = j k.
pub struct Trajectory<S: Scalar> {
    space: Arc<GalerkinSpace<S>>,
    k: S,
    states: Vec<Vec<S>>,
}

impl<S: Scalar> Trajectory<S> {
    pub fn space(&self) -> &Arc<GalerkinSpace<S>> {
        &self.space
    }

    pub fn k(&self) -> S {
        self.k
    }

    /// Number of steps taken (states run 0..=steps).
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn time(&self, j: usize) -> S {
        S::from_usize_exact(j) * self.k
    }

    pub fn state(&self, j: usize) -> DiscreteField<S> {
        self.space
            .field(self.states[j].clone())
            .expect("stored state has the space dimension")
    }

    pub fn final_state(&self) -> DiscreteField<S> {
        self.state(self.steps())
    }
}

/// Runs the scheme over every step of `path`.
pub fn implicit_euler_maruyama<S: Scalar>(
    problem: &ProblemSpec<S>,
    space: &Arc<GalerkinSpace<S>>,
    path: &NoisePath<S>,
) -> Result<Trajectory<S>> {
    let basis = space.basis();
    if path.modes() > basis.modes() {
        return Err(Error::config(format!(
            "noise path retains {} modes but the reference basis has {}",
            path.modes(),
            basis.modes()
        )));
    }
    let k = path.k();
    let solver = space.step_solver(k)?;
    let x0 = space.project_l2(&problem.initial_value(basis));

    // The lifted state is needed only when a nonlinearity reads it.
    let needs_lift = problem.has_drift()
        || !matches!(
            problem.diffusion(),
            crate::problem::DiffusionKind::Additive { .. }
        );
    let resting = SobolevVector::zero(basis);

    let mut states = Vec::with_capacity(path.steps() + 1);
    states.push(x0.coords().to_vec());
    let mut current = x0;
    for j in 1..=path.steps() {
        let lifted = if needs_lift { space.lift(&current) } else { resting.clone() };
        let mut b = space.mass_apply(current.coords());
        if problem.has_drift() {
            let f = problem.eval_drift(&lifted);
            let bf = space.load_from_reference(&f);
            for (bi, &fi) in b.iter_mut().zip(&bf) {
                *bi -= k * fi;
            }
        }
        let g = problem.prepare_diffusion(&lifted, basis);
        let noise_term = g.apply_increments(path.step_increments(j));
        let bg = space.load_from_reference(&noise_term);
        for (bi, &gi) in b.iter_mut().zip(&bg) {
            *bi += gi;
        }
        let coords = solver.solve(&b);
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::numeric(format!(
                "non-finite state at step {j} of {} (k = {:e})",
                path.steps(),
                k.to_f64_lossy()
            )));
        }
        states.push(coords.clone());
        current = space.field(coords)?;
    }
    Ok(Trajectory { space: Arc::clone(space), k, states })
}
