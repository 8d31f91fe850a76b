//! Small dense / tridiagonal linear algebra used by the finite element
//! spaces.
//!
//! The mass and stiffness matrices of the P1 elements are symmetric
//! positive definite tridiagonal; factorizations and solves are O(n).
//! The generalized eigenproblem K v = lambda M v is reduced by the
//! Cholesky factor of M to a dense symmetric problem and solved with a
//! Householder tridiagonalization followed by implicit-shift QL
//! (EISPACK tred2/tql2 lineage). Problem sizes stay at desk scale
//! (n <= ~1000), so the O(n^3) dense solve is never a bottleneck.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Clone, Debug)]
pub struct Mat<S> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut S {
        &mut self.data[r * self.cols + c]
    }

    pub fn column(&self, c: usize) -> Vec<S> {
        (0..self.rows).map(|r| self.at(r, c)).collect()
    }

    /// y = self * x
    pub fn matvec(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![S::zero(); self.rows];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = S::zero();
            for (a, b) in row.iter().zip(x) {
                acc += *a * *b;
            }
            y[r] = acc;
        }
        y
    }

    /// y = self^T * x
    pub fn matvec_t(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![S::zero(); self.cols];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let xr = x[r];
            for (yc, a) in y.iter_mut().zip(row) {
                *yc += *a * xr;
            }
        }
        y
    }
}

/// Symmetric tridiagonal matrix; `off` holds the n-1 subdiagonal entries.
#[derive(Clone, Debug)]
pub struct SymTridiag<S> {
    pub diag: Vec<S>,
    pub off: Vec<S>,
}

impl<S: Scalar> SymTridiag<S> {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[S]) -> Vec<S> {
        let n = self.n();
        assert_eq!(x.len(), n);
        let mut y = vec![S::zero(); n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            y[i] = acc;
        }
        y
    }

    /// x^T A x, the bilinear form behind discrete energy norms.
    pub fn quad_form(&self, x: &[S]) -> S {
        let n = self.n();
        let mut acc = S::zero();
        for i in 0..n {
            acc += self.diag[i] * x[i] * x[i];
            if i + 1 < n {
                acc += S::of(2.0) * self.off[i] * x[i] * x[i + 1];
            }
        }
        acc
    }

    /// self + scale * other, entrywise.
    pub fn add_scaled(&self, other: &SymTridiag<S>, scale: S) -> SymTridiag<S> {
        assert_eq!(self.n(), other.n());
        SymTridiag {
            diag: self
                .diag
                .iter()
                .zip(&other.diag)
                .map(|(&a, &b)| a + scale * b)
                .collect(),
            off: self
                .off
                .iter()
                .zip(&other.off)
                .map(|(&a, &b)| a + scale * b)
                .collect(),
        }
    }
}

/// Cholesky factorization A = L L^T of an SPD tridiagonal matrix;
/// `d` is the diagonal of the lower bidiagonal L, `e` its subdiagonal.
#[derive(Clone, Debug)]
pub struct TridiagCholesky<S> {
    d: Vec<S>,
    e: Vec<S>,
}

impl<S: Scalar> TridiagCholesky<S> {
    pub fn factor(a: &SymTridiag<S>) -> Result<Self> {
        let n = a.n();
        let mut d = vec![S::zero(); n];
        let mut e = vec![S::zero(); n.saturating_sub(1)];
        for i in 0..n {
            let mut v = a.diag[i];
            if i > 0 {
                v = v - e[i - 1] * e[i - 1];
            }
            if v <= S::zero() {
                return Err(Error::numeric(format!(
                    "tridiagonal matrix not positive definite at row {i}"
                )));
            }
            d[i] = v.sqrt();
            if i + 1 < n {
                e[i] = a.off[i] / d[i];
            }
        }
        Ok(TridiagCholesky { d, e })
    }

    /// Solves L y = b.
    pub fn forward(&self, b: &[S]) -> Vec<S> {
        let n = self.d.len();
        let mut y = vec![S::zero(); n];
        for i in 0..n {
            let mut v = b[i];
            if i > 0 {
                v = v - self.e[i - 1] * y[i - 1];
            }
            y[i] = v / self.d[i];
        }
        y
    }

    /// Solves L^T x = y.
    pub fn backward(&self, y: &[S]) -> Vec<S> {
        let n = self.d.len();
        let mut x = vec![S::zero(); n];
        for i in (0..n).rev() {
            let mut v = y[i];
            if i + 1 < n {
                v = v - self.e[i] * x[i + 1];
            }
            x[i] = v / self.d[i];
        }
        x
    }

    /// Solves A x = b.
    pub fn solve(&self, b: &[S]) -> Vec<S> {
        self.backward(&self.forward(b))
    }
}

fn pythag<S: Scalar>(a: S, b: S) -> S {
    let (a, b) = (a.abs(), b.abs());
    if a > b {
        let r = b / a;
        a * (S::one() + r * r).sqrt()
    } else if b > S::zero() {
        let r = a / b;
        b * (S::one() + r * r).sqrt()
    } else {
        S::zero()
    }
}

/// Eigendecomposition of a dense symmetric matrix.
///
/// Returns eigenvalues in ascending order and the orthonormal
/// eigenvectors as matching columns. The input is consumed as workspace.
pub fn sym_eigen<S: Scalar>(mut a: Mat<S>) -> Result<(Vec<S>, Mat<S>)> {
    assert_eq!(a.rows, a.cols, "sym_eigen needs a square matrix");
    let n = a.rows;
    let mut d = vec![S::zero(); n];
    let mut e = vec![S::zero(); n];

    // Householder reduction to tridiagonal form, accumulating the
    // orthogonal transform in `a`.
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = S::zero();
        if l > 0 {
            let mut scale = S::zero();
            for k in 0..=l {
                scale += a.at(i, k).abs();
            }
            if scale == S::zero() {
                e[i] = a.at(i, l);
            } else {
                for k in 0..=l {
                    *a.at_mut(i, k) = a.at(i, k) / scale;
                    h += a.at(i, k) * a.at(i, k);
                }
                let f = a.at(i, l);
                let g = if f >= S::zero() { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                *a.at_mut(i, l) = f - g;
                let mut f_acc = S::zero();
                for j in 0..=l {
                    *a.at_mut(j, i) = a.at(i, j) / h;
                    let mut g_acc = S::zero();
                    for k in 0..=j {
                        g_acc += a.at(j, k) * a.at(i, k);
                    }
                    for k in (j + 1)..=l {
                        g_acc += a.at(k, j) * a.at(i, k);
                    }
                    e[j] = g_acc / h;
                    f_acc += e[j] * a.at(i, j);
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let f = a.at(i, j);
                    let gj = e[j] - hh * f;
                    e[j] = gj;
                    for k in 0..=j {
                        let upd = f * e[k] + gj * a.at(i, k);
                        *a.at_mut(j, k) = a.at(j, k) - upd;
                    }
                }
            }
        } else {
            e[i] = a.at(i, l);
        }
        d[i] = h;
    }
    d[0] = S::zero();
    e[0] = S::zero();
    for i in 0..n {
        if d[i] != S::zero() {
            for j in 0..i {
                let mut g = S::zero();
                for k in 0..i {
                    g += a.at(i, k) * a.at(k, j);
                }
                for k in 0..i {
                    let upd = g * a.at(k, i);
                    *a.at_mut(k, j) = a.at(k, j) - upd;
                }
            }
        }
        d[i] = a.at(i, i);
        *a.at_mut(i, i) = S::one();
        for j in 0..i {
            *a.at_mut(j, i) = S::zero();
            *a.at_mut(i, j) = S::zero();
        }
    }

    // Implicit-shift QL on the tridiagonal form.
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = S::zero();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() + dd == dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::numeric(
                    "symmetric QL iteration failed to converge".to_string(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (S::of(2.0) * e[l]);
            let mut r = pythag(g, S::one());
            let sign_r = if g >= S::zero() { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let mut s = S::one();
            let mut c = S::one();
            let mut p = S::zero();
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = pythag(f, g);
                e[i + 1] = r;
                if r == S::zero() {
                    d[i + 1] = d[i + 1] - p;
                    e[m] = S::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + S::of(2.0) * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let f = a.at(k, i + 1);
                    *a.at_mut(k, i + 1) = s * a.at(k, i) + c * f;
                    *a.at_mut(k, i) = c * a.at(k, i) - s * f;
                }
            }
            if underflow && i > l {
                continue;
            }
            d[l] = d[l] - p;
            e[l] = g;
            e[m] = S::zero();
        }
    }

    // Ascending sort with matching column permutation and a deterministic
    // sign convention (largest-magnitude entry positive).
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[x].partial_cmp(&d[y]).unwrap());
    let mut vals = Vec::with_capacity(n);
    let mut vecs = Mat::zeros(n, n);
    for (new_c, &old_c) in order.iter().enumerate() {
        vals.push(d[old_c]);
        let mut best = S::zero();
        for r in 0..n {
            let v = a.at(r, old_c);
            if v.abs() > best.abs() {
                best = v;
            }
        }
        let flip = if best < S::zero() { -S::one() } else { S::one() };
        for r in 0..n {
            *vecs.at_mut(r, new_c) = flip * a.at(r, old_c);
        }
    }
    Ok((vals, vecs))
}

/// Solves K v = lambda M v for SPD tridiagonal K, M.
///
/// Returns ascending eigenvalues and M-orthonormal eigenvector columns:
/// V^T M V = I holds to machine precision by construction.
pub fn generalized_eigen_tridiag<S: Scalar>(
    stiff: &SymTridiag<S>,
    mass: &SymTridiag<S>,
) -> Result<(Vec<S>, Mat<S>)> {
    let n = stiff.n();
    assert_eq!(n, mass.n());
    let chol = TridiagCholesky::factor(mass)?;

    // C = L^{-1} K L^{-T} built column-wise: Z = L^{-1} K, C = L^{-1} Z^T.
    let mut z = Mat::zeros(n, n);
    for j in 0..n {
        let mut col = vec![S::zero(); n];
        if j > 0 {
            col[j - 1] = stiff.off[j - 1];
        }
        col[j] = stiff.diag[j];
        if j + 1 < n {
            col[j + 1] = stiff.off[j];
        }
        let sol = chol.forward(&col);
        for i in 0..n {
            *z.at_mut(i, j) = sol[i];
        }
    }
    let mut c = Mat::zeros(n, n);
    for j in 0..n {
        // column j of C = L^{-1} (row j of Z)
        let row: Vec<S> = (0..n).map(|i| z.at(j, i)).collect();
        let sol = chol.forward(&row);
        for i in 0..n {
            *c.at_mut(i, j) = sol[i];
        }
    }
    // Symmetrize against roundoff before the dense solve.
    for i in 0..n {
        for j in 0..i {
            let avg = (c.at(i, j) + c.at(j, i)) * S::of(0.5);
            *c.at_mut(i, j) = avg;
            *c.at_mut(j, i) = avg;
        }
    }

    let (vals, q) = sym_eigen(c)?;
    let mut v = Mat::zeros(n, n);
    for j in 0..n {
        let col = q.column(j);
        let sol = chol.backward(&col);
        let mut best = S::zero();
        for &x in &sol {
            if x.abs() > best.abs() {
                best = x;
            }
        }
        let flip = if best < S::zero() { -S::one() } else { S::one() };
        for i in 0..n {
            *v.at_mut(i, j) = flip * sol[i];
        }
    }
    Ok((vals, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol * (1.0 + b.abs()), "{a} vs {b}");
    }

    #[test]
    fn cholesky_solve_round_trips() {
        let a = SymTridiag { diag: vec![4.0, 5.0, 6.0, 5.0], off: vec![1.0, -1.0, 2.0] };
        let x = vec![1.0, -2.0, 3.0, 0.5];
        let b = a.matvec(&x);
        let chol = TridiagCholesky::factor(&a).unwrap();
        let got = chol.solve(&b);
        for (g, w) in got.iter().zip(&x) {
            assert_close(*g, *w, 1e-13);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = SymTridiag { diag: vec![1.0, -3.0], off: vec![0.5] };
        assert!(TridiagCholesky::factor(&a).is_err());
    }

    #[test]
    fn quad_form_matches_matvec() {
        let a = SymTridiag { diag: vec![2.0, 2.0, 2.0], off: vec![-1.0, -1.0] };
        let x = vec![0.3, -0.7, 1.1];
        let via_matvec: f64 = a.matvec(&x).iter().zip(&x).map(|(y, xi)| y * xi).sum();
        assert_close(a.quad_form(&x), via_matvec, 1e-14);
    }

    #[test]
    fn two_by_two_analytic() {
        let mut m = Mat::zeros(2, 2);
        *m.at_mut(0, 0) = 2.0;
        *m.at_mut(0, 1) = 1.0;
        *m.at_mut(1, 0) = 1.0;
        *m.at_mut(1, 1) = 2.0;
        let (vals, vecs) = sym_eigen(m).unwrap();
        assert_close(vals[0], 1.0, 1e-14);
        assert_close(vals[1], 3.0, 1e-14);
        let s = 0.5f64.sqrt();
        assert!((vecs.at(0, 0).abs() - s).abs() < 1e-14);
        assert!((vecs.at(0, 1) - s).abs() < 1e-14 && (vecs.at(1, 1) - s).abs() < 1e-14);
    }

    #[test]
    fn dirichlet_tridiagonal_analytic() {
        // tridiag(-1, 2, -1) of size n has eigenvalues 2 - 2 cos(m pi/(n+1)).
        let n = 7;
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            *m.at_mut(i, i) = 2.0;
            if i + 1 < n {
                *m.at_mut(i, i + 1) = -1.0;
                *m.at_mut(i + 1, i) = -1.0;
            }
        }
        let (vals, vecs) = sym_eigen(m).unwrap();
        for (idx, v) in vals.iter().enumerate() {
            let expect = 2.0 - 2.0 * ((idx + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert_close(*v, expect, 1e-13);
        }
        // Orthonormality of the eigenvector columns.
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = (0..n).map(|r| vecs.at(r, a) * vecs.at(r, b)).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-13, "dot({a},{b}) = {dot}");
            }
        }
    }

    #[test]
    fn random_symmetric_residuals() {
        let n = 24;
        let rng = crate::rng::CounterRng::new(99);
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = rng.normal(i as u64, j as u64);
                *m.at_mut(i, j) = v;
                *m.at_mut(j, i) = v;
            }
        }
        let orig = m.clone();
        let (vals, vecs) = sym_eigen(m).unwrap();
        for c in 0..n {
            let v = vecs.column(c);
            let av = orig.matvec(&v);
            for i in 0..n {
                assert!(
                    (av[i] - vals[c] * v[i]).abs() < 1e-10,
                    "residual at ({i},{c})"
                );
            }
        }
        let trace: f64 = (0..n).map(|i| orig.at(i, i)).sum();
        assert_close(vals.iter().sum::<f64>(), trace, 1e-12);
    }

    #[test]
    fn generalized_matches_uniform_mesh_closed_form() {
        // P1 elements on a uniform mesh: K = (1/h) tridiag(-1,2,-1),
        // M = (h/6) tridiag(1,4,1); eigenvalues are
        // 6 (1 - cos(m pi h)) / (h^2 (2 + cos(m pi h))), eigenvectors the
        // sampled sine modes.
        let elements = 8usize;
        let n = elements - 1;
        let h = 1.0 / elements as f64;
        let stiff = SymTridiag {
            diag: vec![2.0 / h; n],
            off: vec![-1.0 / h; n - 1],
        };
        let mass = SymTridiag {
            diag: vec![2.0 * h / 3.0; n],
            off: vec![h / 6.0; n - 1],
        };
        let (vals, vecs) = generalized_eigen_tridiag(&stiff, &mass).unwrap();
        for m in 1..=n {
            let c = (m as f64 * std::f64::consts::PI * h).cos();
            let expect = 6.0 * (1.0 - c) / (h * h * (2.0 + c));
            assert_close(vals[m - 1], expect, 1e-12);
        }
        // M-orthonormality residual.
        for a in 0..n {
            let va = vecs.column(a);
            let mva = mass.matvec(&va);
            for b in 0..n {
                let vb = vecs.column(b);
                let dot: f64 = mva.iter().zip(&vb).map(|(x, y)| x * y).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12, "M-dot({a},{b}) = {dot}");
            }
        }
        // K v = lambda M v residual.
        for c in 0..n {
            let v = vecs.column(c);
            let kv = stiff.matvec(&v);
            let mv = mass.matvec(&v);
            for i in 0..n {
                assert!((kv[i] - vals[c] * mv[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn smallest_discrete_eigenvalue_exceeds_continuum() {
        // h = 0.25: the discrete fundamental eigenvalue lies above pi^2.
        let stiff = SymTridiag { diag: vec![8.0; 3], off: vec![-4.0; 2] };
        let mass = SymTridiag { diag: vec![1.0 / 6.0; 3], off: vec![1.0 / 24.0; 2] };
        let (vals, _) = generalized_eigen_tridiag(&stiff, &mass).unwrap();
        assert_close(vals[0], 10.386642005221232, 1e-12);
        assert!(vals[0] > std::f64::consts::PI.powi(2));
    }
}
