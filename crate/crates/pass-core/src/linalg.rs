//! Small dense linear algebra for the desk-scale systems this crate solves.
//!
//! Every system here is Hermitian (or real symmetric) positive definite and
//! at most a few hundred unknowns, so a plain Cholesky factorization is all
//! that is needed.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{Real, C};

/// Complex column vector.
pub type CVec<T> = Vec<C<T>>;
/// Real column vector.
pub type RVec<T> = Vec<T>;

/// Unconjugated dot product `sum_i a_i * b_i`.
#[inline]
pub fn dotu<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(C::new(T::zero(), T::zero()), |acc, (x, y)| acc + x * y)
}

/// Squared Euclidean norm of a complex vector.
#[inline]
pub fn norm_sqr<T: Real>(a: &[C<T>]) -> T {
    a.iter().fold(T::zero(), |acc, x| acc + x.norm_sqr())
}

/// Squared Euclidean norm of a real vector.
#[inline]
pub fn norm_sqr_r<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, &x| acc + x * x)
}

/// Real dot product.
#[inline]
pub fn dot_r<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone)]
pub struct CMat<T> {
    pub n: usize,
    pub data: Vec<C<T>>,
}

impl<T: Real> CMat<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![C::new(T::zero(), T::zero()); n * n],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C<T> {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut C<T> {
        &mut self.data[i * self.n + j]
    }

    /// `self += alpha * v v^H` (Hermitian rank-1 update).
    pub fn add_rank1(&mut self, alpha: T, v: &[C<T>]) {
        debug_assert_eq!(v.len(), self.n);
        for i in 0..self.n {
            let vi = v[i];
            for j in 0..self.n {
                let upd = vi * v[j].conj() * alpha;
                *self.at_mut(i, j) += upd;
            }
        }
    }

    /// Add `alpha * d_i` to the diagonal.
    pub fn add_diag(&mut self, alpha: T, d: &[T]) {
        debug_assert_eq!(d.len(), self.n);
        for i in 0..self.n {
            *self.at_mut(i, i) += C::new(alpha * d[i], T::zero());
        }
    }

    /// Add `alpha` to every diagonal entry.
    pub fn add_scalar_diag(&mut self, alpha: T) {
        for i in 0..self.n {
            *self.at_mut(i, i) += C::new(alpha, T::zero());
        }
    }

    /// Entry-wise conjugate.
    pub fn conjugated(&self) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[C<T>]) -> CVec<T> {
        debug_assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| dotu(&self.data[i * self.n..(i + 1) * self.n], x))
            .collect()
    }

    /// Cholesky factorization `A = L L^H` of a Hermitian positive-definite
    /// matrix. Fails with [`Error::SingularSystem`] on a non-positive pivot.
    pub fn cholesky(&self) -> Result<CholFactor<T>> {
        let n = self.n;
        let mut l = vec![C::new(T::zero(), T::zero()); n * n];
        for j in 0..n {
            let mut d = self.at(j, j).re;
            for k in 0..j {
                d = d - l[j * n + k].norm_sqr();
            }
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::SingularSystem);
            }
            let djj = d.sqrt();
            l[j * n + j] = C::new(djj, T::zero());
            for i in j + 1..n {
                let mut s = self.at(i, j);
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(CholFactor { n, l })
    }
}

/// Lower-triangular Cholesky factor of a Hermitian positive-definite matrix.
#[derive(Debug, Clone)]
pub struct CholFactor<T> {
    n: usize,
    l: Vec<C<T>>,
}

impl<T: Real> CholFactor<T> {
    /// Solve `A x = b` via forward/backward substitution.
    pub fn solve(&self, b: &[C<T>]) -> CVec<T> {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        // L y = b
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i].re;
        }
        // L^H x = y
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s = s - self.l[k * n + i].conj() * y[k];
            }
            y[i] = s / self.l[i * n + i].re;
        }
        y
    }
}

/// Dense square real symmetric matrix, row-major.
#[derive(Debug, Clone)]
pub struct RMat<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Real> RMat<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut T {
        &mut self.data[i * self.n + j]
    }

    /// `self += alpha * Re(v v^H)` for a complex vector `v`; the result stays
    /// exactly symmetric.
    pub fn add_rank1_re(&mut self, alpha: T, v: &[Complex<T>]) {
        debug_assert_eq!(v.len(), self.n);
        for i in 0..self.n {
            for j in i..self.n {
                let re = (v[i] * v[j].conj()).re * alpha;
                *self.at_mut(i, j) += re;
                if i != j {
                    *self.at_mut(j, i) += re;
                }
            }
        }
    }

    /// Add `alpha * d_i` to the diagonal.
    pub fn add_diag(&mut self, alpha: T, d: &[T]) {
        debug_assert_eq!(d.len(), self.n);
        for i in 0..self.n {
            *self.at_mut(i, i) += alpha * d[i];
        }
    }

    pub fn add_scalar_diag(&mut self, alpha: T) {
        for i in 0..self.n {
            *self.at_mut(i, i) += alpha;
        }
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[T]) -> RVec<T> {
        debug_assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| dot_r(&self.data[i * self.n..(i + 1) * self.n], x))
            .collect()
    }

    /// Quadratic form `x^T A x`.
    pub fn quadform(&self, x: &[T]) -> T {
        dot_r(&self.matvec(x), x)
    }

    /// Real Cholesky `A = L L^T`.
    pub fn cholesky(&self) -> Result<RCholFactor<T>> {
        let n = self.n;
        let mut l = vec![T::zero(); n * n];
        for j in 0..n {
            let mut d = self.at(j, j);
            for k in 0..j {
                d = d - l[j * n + k] * l[j * n + k];
            }
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::SingularSystem);
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in j + 1..n {
                let mut s = self.at(i, j);
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(RCholFactor { n, l })
    }
}

/// Lower-triangular Cholesky factor of a real SPD matrix.
#[derive(Debug, Clone)]
pub struct RCholFactor<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Real> RCholFactor<T> {
    pub fn solve(&self, b: &[T]) -> RVec<T> {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s = s - self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C<f64> {
        C::new(re, im)
    }

    #[test]
    fn complex_cholesky_solves_hermitian_system() {
        // A = V V^H + I with a fixed 3x3 V: Hermitian positive definite.
        let v1 = vec![c(1.0, 0.5), c(-0.3, 0.2), c(0.7, -0.1)];
        let v2 = vec![c(0.2, -0.4), c(1.1, 0.0), c(-0.5, 0.9)];
        let mut a = CMat::zeros(3);
        a.add_rank1(1.0, &v1);
        a.add_rank1(0.5, &v2);
        a.add_scalar_diag(1.0);
        let b = vec![c(1.0, -1.0), c(0.0, 2.0), c(-3.0, 0.25)];
        let x = a.cholesky().unwrap().solve(&b);
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).norm() < 1e-12);
        }
    }

    #[test]
    fn real_cholesky_solves_spd_system() {
        let mut a = RMat::zeros(4);
        let v = vec![c(0.3, 0.1), c(-1.2, 0.7), c(0.4, -0.9), c(2.0, 0.0)];
        a.add_rank1_re(2.0, &v);
        a.add_scalar_diag(0.5);
        let b = vec![1.0, -2.0, 0.5, 4.0];
        let x = a.cholesky().unwrap().solve(&b);
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite_matrix() {
        let mut a = RMat::zeros(2);
        *a.at_mut(0, 0) = 1.0;
        *a.at_mut(1, 1) = -1.0;
        assert!(matches!(a.cholesky(), Err(Error::SingularSystem)));
    }
}
