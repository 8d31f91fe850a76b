//! Galerkin subspaces of H and their discrete operators.
//!
//! Two families are supported:
//!
//! * spectral: span{e_1, ..., e_N}; mass and stiffness are diagonal and
//!   every operator acts mode by mode;
//! * P1 finite elements on the uniform mesh x_i = i/n: tridiagonal mass
//!   M (2h/3 diagonal, h/6 off) and stiffness K (2/h diagonal, -1/h off),
//!   with the discrete operator A_h = M^{-1} K realized through solves
//!   and through the generalized eigendecomposition K V = M V diag(lambda_h),
//!   V^T M V = I.
//!
//! The mesh parameter is h = lambda_{N+1}^{-1/2} = 1/((N+1) pi) for the
//! spectral space and the mesh width 1/n for the elements, so spatial
//! rates are comparable across both kinds.
//!
//! Inner products between hat functions and eigenmodes use the closed
//! form (phi_i, e_n) = sqrt(2) sin(n pi x_i) * 2(1 - cos(n pi h))/(n^2 pi^2 h)
//! rather than quadrature, so projections and lifts are exact at the
//! reference truncation.

use crate::basis::{EigenBasis, SobolevVector};
use crate::error::{Error, Result};
use crate::linalg::{generalized_eigen_tridiag, Mat, SymTridiag, TridiagCholesky};
use crate::scalar::Scalar;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    Spectral,
    FemP1,
}

pub struct GalerkinSpace<S: Scalar> {
    basis: Arc<EigenBasis<S>>,
    kind: SpaceKind,
    dim: usize,
    h: S,
    data: SpaceData<S>,
}

enum SpaceData<S: Scalar> {
    Spectral,
    Fem {
        mass: SymTridiag<S>,
        stiff: SymTridiag<S>,
        mass_chol: TridiagCholesky<S>,
        stiff_chol: TridiagCholesky<S>,
        eig_vals: Vec<S>,
        eig_vecs: Mat<S>,
        /// (phi_i, e_n) for n <= modes, i < dim; row-major by mode.
        sine_hat: Mat<S>,
        /// Lifted discrete eigenvectors sine_hat * eig_vecs.
        lifted_eigs: Mat<S>,
    },
}

impl<S: Scalar> GalerkinSpace<S> {
    /// Span of the first `n` eigenmodes.
    pub fn spectral(basis: &Arc<EigenBasis<S>>, n: usize) -> Result<Arc<Self>> {
        if n == 0 {
            return Err(Error::config("spectral dimension must be positive"));
        }
        if n > basis.modes() {
            return Err(Error::config(format!(
                "spectral dimension {n} exceeds the {}-mode reference basis",
                basis.modes()
            )));
        }
        let h = S::one() / (S::from_usize_exact(n + 1) * S::PI());
        Ok(Arc::new(GalerkinSpace {
            basis: Arc::clone(basis),
            kind: SpaceKind::Spectral,
            dim: n,
            h,
            data: SpaceData::Spectral,
        }))
    }

    /// P1 elements on the uniform mesh with `elements` cells.
    pub fn fem_p1(basis: &Arc<EigenBasis<S>>, elements: usize) -> Result<Arc<Self>> {
        if elements < 2 {
            return Err(Error::config("need at least 2 elements"));
        }
        let dim = elements - 1;
        if dim >= basis.modes() {
            return Err(Error::config(format!(
                "{elements} elements need a reference basis larger than {} modes",
                basis.modes()
            )));
        }
        let h = S::one() / S::from_usize_exact(elements);
        let two_thirds = S::of(2.0 / 3.0);
        let sixth = S::of(1.0 / 6.0);
        let mass = SymTridiag {
            diag: vec![two_thirds * h; dim],
            off: vec![sixth * h; dim.saturating_sub(1)],
        };
        let inv_h = S::one() / h;
        let stiff = SymTridiag {
            diag: vec![S::of(2.0) * inv_h; dim],
            off: vec![-inv_h; dim.saturating_sub(1)],
        };
        let mass_chol = TridiagCholesky::factor(&mass)?;
        let stiff_chol = TridiagCholesky::factor(&stiff)?;
        let (eig_vals, eig_vecs) = generalized_eigen_tridiag(&stiff, &mass)?;

        let modes = basis.modes();
        let mut sine_hat = Mat::zeros(modes, dim);
        let pi = S::PI();
        let s2 = S::SQRT_2();
        let two = S::of(2.0);
        for n in 1..=modes {
            let npi = S::from_usize_exact(n) * pi;
            let amp = s2 * two * (S::one() - (npi * h).cos()) / (npi * npi * h);
            for i in 0..dim {
                let x = S::from_usize_exact(i + 1) * h;
                *sine_hat.at_mut(n - 1, i) = amp * (npi * x).sin();
            }
        }
        let mut lifted_eigs = Mat::zeros(modes, dim);
        for m in 0..dim {
            let col = eig_vecs.column(m);
            let lifted = sine_hat.matvec(&col);
            for n in 0..modes {
                *lifted_eigs.at_mut(n, m) = lifted[n];
            }
        }

        Ok(Arc::new(GalerkinSpace {
            basis: Arc::clone(basis),
            kind: SpaceKind::FemP1,
            dim,
            h,
            data: SpaceData::Fem {
                mass,
                stiff,
                mass_chol,
                stiff_chol,
                eig_vals,
                eig_vecs,
                sine_hat,
                lifted_eigs,
            },
        }))
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> S {
        self.h
    }

    pub fn basis(&self) -> &Arc<EigenBasis<S>> {
        &self.basis
    }

    /// Eigenvalues of the discrete operator A_h, ascending.
    pub fn discrete_eigs(&self) -> Vec<S> {
        match &self.data {
            SpaceData::Spectral => self.basis.eigenvalues()[..self.dim].to_vec(),
            SpaceData::Fem { eig_vals, .. } => eig_vals.clone(),
        }
    }

    /// Lifted discrete eigenvectors (reference coefficients per column);
    /// `None` for spectral spaces, whose eigenvectors embed as unit modes.
    pub fn lifted_eigenvectors(&self) -> Option<&Mat<S>> {
        match &self.data {
            SpaceData::Spectral => None,
            SpaceData::Fem { lifted_eigs, .. } => Some(lifted_eigs),
        }
    }

    pub fn mass_matrix(&self) -> Option<&SymTridiag<S>> {
        match &self.data {
            SpaceData::Spectral => None,
            SpaceData::Fem { mass, .. } => Some(mass),
        }
    }

    pub fn stiffness_matrix(&self) -> Option<&SymTridiag<S>> {
        match &self.data {
            SpaceData::Spectral => None,
            SpaceData::Fem { stiff, .. } => Some(stiff),
        }
    }

    fn check_dim(&self, coords: &[S]) -> Result<()> {
        if coords.len() != self.dim {
            return Err(Error::shape(format!(
                "coordinate vector of length {} in a space of dimension {}",
                coords.len(),
                self.dim
            )));
        }
        Ok(())
    }

    pub fn field(self: &Arc<Self>, coords: Vec<S>) -> Result<DiscreteField<S>> {
        self.check_dim(&coords)?;
        Ok(DiscreteField { space: Arc::clone(self), coords })
    }

    pub fn zero_field(self: &Arc<Self>) -> DiscreteField<S> {
        DiscreteField { space: Arc::clone(self), coords: vec![S::zero(); self.dim] }
    }

    /// Load vector (v, phi_i) for every basis function of the space. For
    /// the spectral space this is coefficient truncation; for elements it
    /// contracts the closed-form sine/hat inner products.
    pub fn load_from_reference(&self, v: &SobolevVector<S>) -> Vec<S> {
        match &self.data {
            SpaceData::Spectral => v.coeffs()[..self.dim].to_vec(),
            SpaceData::Fem { sine_hat, .. } => sine_hat.matvec_t(v.coeffs()),
        }
    }

    /// L^2-orthogonal projection P_h.
    pub fn project_l2(self: &Arc<Self>, v: &SobolevVector<S>) -> DiscreteField<S> {
        let b = self.load_from_reference(v);
        let coords = match &self.data {
            SpaceData::Spectral => b,
            SpaceData::Fem { mass_chol, .. } => mass_chol.solve(&b),
        };
        DiscreteField { space: Arc::clone(self), coords }
    }

    /// Ritz projection R_h = A_h^{-1} P_h A: energy-orthogonal projection.
    pub fn project_ritz(self: &Arc<Self>, v: &SobolevVector<S>) -> DiscreteField<S> {
        match &self.data {
            SpaceData::Spectral => self.project_l2(v),
            SpaceData::Fem { sine_hat, stiff_chol, .. } => {
                // a(v, phi_i) = sum_n lambda_n v_n (e_n, phi_i)
                let weighted: Vec<S> = v
                    .coeffs()
                    .iter()
                    .zip(self.basis.eigenvalues())
                    .map(|(&c, &lam)| c * lam)
                    .collect();
                let r = sine_hat.matvec_t(&weighted);
                let coords = stiff_chol.solve(&r);
                DiscreteField { space: Arc::clone(self), coords }
            }
        }
    }

    /// Embeds a discrete field back into the reference frame, coefficient
    /// (x_h, e_n) per mode.
    pub fn lift(&self, f: &DiscreteField<S>) -> SobolevVector<S> {
        match &self.data {
            SpaceData::Spectral => {
                let mut coeffs = f.coords.clone();
                coeffs.resize(self.basis.modes(), S::zero());
                SobolevVector::new(&self.basis, coeffs).expect("dim checked at construction")
            }
            SpaceData::Fem { sine_hat, .. } => {
                let coeffs = sine_hat.matvec(&f.coords);
                SobolevVector::new(&self.basis, coeffs).expect("dim checked at construction")
            }
        }
    }

    /// M c, the Riesz weights of a coordinate vector.
    pub fn mass_apply(&self, coords: &[S]) -> Vec<S> {
        match &self.data {
            SpaceData::Spectral => coords.to_vec(),
            SpaceData::Fem { mass, .. } => mass.matvec(coords),
        }
    }

    /// Coordinates in the discrete eigenframe, z = V^T M c.
    fn to_eigen(&self, coords: &[S]) -> Vec<S> {
        match &self.data {
            SpaceData::Spectral => coords.to_vec(),
            SpaceData::Fem { mass, eig_vecs, .. } => eig_vecs.matvec_t(&mass.matvec(coords)),
        }
    }

    fn from_eigen(&self, z: &[S]) -> Vec<S> {
        match &self.data {
            SpaceData::Spectral => z.to_vec(),
            SpaceData::Fem { eig_vecs, .. } => eig_vecs.matvec(z),
        }
    }

    /// A_h x_h via an SPD mass solve of K c (never an explicit inverse).
    pub fn apply_operator(&self, f: &DiscreteField<S>) -> DiscreteField<S> {
        let coords = match &self.data {
            SpaceData::Spectral => f
                .coords
                .iter()
                .zip(self.basis.eigenvalues())
                .map(|(&c, &lam)| c * lam)
                .collect(),
            SpaceData::Fem { mass_chol, stiff, .. } => mass_chol.solve(&stiff.matvec(&f.coords)),
        };
        DiscreteField { space: Arc::clone(&f.space), coords }
    }

    /// A_h^{-1} x_h via a stiffness solve of M c.
    pub fn apply_operator_inverse(&self, f: &DiscreteField<S>) -> DiscreteField<S> {
        let coords = match &self.data {
            SpaceData::Spectral => f
                .coords
                .iter()
                .zip(self.basis.eigenvalues())
                .map(|(&c, &lam)| c / lam)
                .collect(),
            SpaceData::Fem { stiff_chol, mass, .. } => stiff_chol.solve(&mass.matvec(&f.coords)),
        };
        DiscreteField { space: Arc::clone(&f.space), coords }
    }

    /// Discrete semigroup E_h(t) = exp(-t A_h) through the eigenframe.
    pub fn discrete_semigroup(&self, f: &DiscreteField<S>, t: S) -> Result<DiscreteField<S>> {
        if t < S::zero() {
            return Err(Error::domain("semigroup time must be nonnegative".to_string()));
        }
        let eigs = match &self.data {
            SpaceData::Spectral => &self.basis.eigenvalues()[..self.dim],
            SpaceData::Fem { eig_vals, .. } => eig_vals.as_slice(),
        };
        let mut z = self.to_eigen(&f.coords);
        for (zi, &lam) in z.iter_mut().zip(eigs) {
            *zi *= (-lam * t).exp();
        }
        Ok(DiscreteField { space: Arc::clone(&f.space), coords: self.from_eigen(&z) })
    }

    /// j steps of the backward Euler rational factor, (I + k A_h)^{-j}.
    pub fn rational_step(&self, f: &DiscreteField<S>, k: S, j: usize) -> Result<DiscreteField<S>> {
        if k <= S::zero() {
            return Err(Error::domain("step size must be positive".to_string()));
        }
        let eigs = match &self.data {
            SpaceData::Spectral => &self.basis.eigenvalues()[..self.dim],
            SpaceData::Fem { eig_vals, .. } => eig_vals.as_slice(),
        };
        let mut z = self.to_eigen(&f.coords);
        for (zi, &lam) in z.iter_mut().zip(eigs) {
            *zi *= (S::one() + k * lam).powi(-(j as i32));
        }
        Ok(DiscreteField { space: Arc::clone(&f.space), coords: self.from_eigen(&z) })
    }

    /// A_h^s through the eigenframe; s may be negative.
    pub fn discrete_fractional(&self, f: &DiscreteField<S>, s: f64) -> DiscreteField<S> {
        let eigs = match &self.data {
            SpaceData::Spectral => &self.basis.eigenvalues()[..self.dim],
            SpaceData::Fem { eig_vals, .. } => eig_vals.as_slice(),
        };
        let se = S::of(s);
        let mut z = self.to_eigen(&f.coords);
        for (zi, &lam) in z.iter_mut().zip(eigs) {
            *zi *= lam.powf(se);
        }
        DiscreteField { space: Arc::clone(&f.space), coords: self.from_eigen(&z) }
    }

    /// Factorized solver for the implicit step system (M + k K) c = b.
    pub fn step_solver(&self, k: S) -> Result<StepSolver<S>> {
        if k <= S::zero() {
            return Err(Error::domain("step size must be positive".to_string()));
        }
        match &self.data {
            SpaceData::Spectral => {
                let factors = self.basis.eigenvalues()[..self.dim]
                    .iter()
                    .map(|&lam| S::one() / (S::one() + k * lam))
                    .collect();
                Ok(StepSolver::Spectral { factors })
            }
            SpaceData::Fem { mass, stiff, .. } => {
                let shifted = mass.add_scaled(stiff, k);
                Ok(StepSolver::Fem { chol: TridiagCholesky::factor(&shifted)? })
            }
        }
    }
}

/// Prefactorized (M + k K); one instance per (space, k) pair.
pub enum StepSolver<S: Scalar> {
    Spectral { factors: Vec<S> },
    Fem { chol: TridiagCholesky<S> },
}

impl<S: Scalar> StepSolver<S> {
    pub fn solve(&self, b: &[S]) -> Vec<S> {
        match self {
            StepSolver::Spectral { factors } => {
                b.iter().zip(factors).map(|(&bi, &f)| bi * f).collect()
            }
            StepSolver::Fem { chol } => chol.solve(b),
        }
    }
}

/// Element of a Galerkin space, stored as nodal/modal coordinates.
#[derive(Clone)]
pub struct DiscreteField<S: Scalar> {
    space: Arc<GalerkinSpace<S>>,
    coords: Vec<S>,
}

impl<S: Scalar> DiscreteField<S> {
    pub fn space(&self) -> &Arc<GalerkinSpace<S>> {
        &self.space
    }

    pub fn coords(&self) -> &[S] {
        &self.coords
    }

    pub fn coords_mut(&mut self) -> &mut [S] {
        &mut self.coords
    }

    /// L^2 norm, (c^T M c)^{1/2}.
    pub fn norm(&self) -> S {
        match &self.space.data {
            SpaceData::Spectral => self.coords.iter().map(|&c| c * c).sum::<S>().sqrt(),
            SpaceData::Fem { mass, .. } => mass.quad_form(&self.coords).sqrt(),
        }
    }

    /// Discrete energy norm ||A_h^{1/2} x_h|| = (c^T K c)^{1/2}.
    pub fn energy_norm(&self) -> S {
        match &self.space.data {
            SpaceData::Spectral => self
                .coords
                .iter()
                .zip(self.space.basis.eigenvalues())
                .map(|(&c, &lam)| lam * c * c)
                .sum::<S>()
                .sqrt(),
            SpaceData::Fem { stiff, .. } => stiff.quad_form(&self.coords).sqrt(),
        }
    }

    pub fn add_scaled(&self, other: &Self, w: S) -> Self {
        debug_assert_eq!(self.coords.len(), other.coords.len());
        let coords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(&a, &b)| a + w * b)
            .collect();
        DiscreteField { space: Arc::clone(&self.space), coords }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_scaled(other, -S::one())
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }
}
