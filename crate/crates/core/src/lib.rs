//! Numerical laboratory for semilinear stochastic PDEs
//!
//!   dX(t) + [A X(t) + f(X(t))] dt = g(X(t)) dW(t),   X(0) = X_0,
//!
//! on H = L^2(0,1), where A is the Dirichlet Laplacian, W is a Q-Wiener
//! process, and the discretizations are spectral or P1 finite element
//! Galerkin in space with a linear implicit Euler-Maruyama step in time.
//!
//! The crate provides
//!
//! * the eigenbasis of A with fractional-power norms and the analytic
//!   semigroup ([`basis`]),
//! * Galerkin subspaces with their projections, discrete operators and
//!   rational time stepping ([`space`]),
//! * reproducible Q-Wiener increments from a counter-based generator
//!   ([`noise`]),
//! * problem definitions with Nemytskii drift/diffusion and built-in test
//!   problems P1-P4 ([`problem`]),
//! * the implicit Euler-Maruyama integrator and per-mode oracles
//!   ([`integrate`]),
//! * deterministic defect-operator rate checks ([`error_ops`]),
//! * Monte Carlo strong-error estimation, rate fitting and regularity
//!   checks ([`lab`]).
//!
//! All numeric types are generic over the scalar via [`Scalar`]; the
//! aliases at the crate root fix the default `f64` instantiation.

pub mod basis;
pub mod dst;
pub mod error;
pub mod error_ops;
pub mod integrate;
pub mod lab;
pub mod linalg;
pub mod noise;
pub mod problem;
pub mod rng;
pub mod scalar;
pub mod space;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default scalar used by the command line tool and the acceptance suite.
pub type DefaultScalar = f64;

pub type Basis = basis::EigenBasis<DefaultScalar>;
pub type SobolevVec = basis::SobolevVector<DefaultScalar>;
pub type Space = space::GalerkinSpace<DefaultScalar>;
pub type Field = space::DiscreteField<DefaultScalar>;
pub type Covariance = noise::CovarianceSpec;
pub type Increments = noise::NoisePath<DefaultScalar>;
pub type Problem = problem::ProblemSpec<DefaultScalar>;
pub type Path = integrate::Trajectory<DefaultScalar>;
