//! Precoding subproblem: an unconstrained Hermitian least-squares solve per
//! user, with the power budget enforced through a nonnegative multiplier
//! found by bracketed bisection.

use crate::error::Result;
use crate::linalg::{CMat, CVec};
use crate::metrics::{EffectiveLink, PrecodingMatrix};
use crate::optim::{AuxState, OptimizerConfig};
use crate::scalar::Real;

/// Multiplier state of the power constraint.
#[derive(Debug, Clone, Copy)]
pub struct DualState<T> {
    pub rho: T,
}

/// Quadratic model of the precoding subproblem.
///
/// Minimizing `w^T A w^* - 2 Re(zeta^T w)` per user under the total power
/// budget; `a_base` excludes the multiplier's identity shift. The solve runs
/// in conjugate coordinates `v = w^*`, where the system is `(a_base + rho I) v_k = zeta_k`.
#[derive(Debug, Clone)]
pub struct PrecodingProblem<T> {
    pub a_base: CMat<T>,
    pub zeta: Vec<CVec<T>>,
    pub p_max: T,
}

impl<T: Real> PrecodingProblem<T> {
    /// Assemble from the current auxiliaries: a weighted sum of rank-one
    /// desired-signal terms and diagonal stochastic terms, plus the
    /// amplifier-cost shift `q / nu`.
    pub fn from_link(
        link: &EffectiveLink<T>,
        aux: &AuxState<T>,
        bandwidth: T,
        nu: T,
        p_max: T,
    ) -> Self {
        let dim = link.dim();
        let mut a = CMat::zeros(dim);
        for k in 0..link.users() {
            let scale = bandwidth * aux.kappa[k] * aux.t[k].norm_sqr();
            a.add_rank1(scale, &link.h[k]);
            let diag: Vec<T> = link.d[k].iter().map(|&d| d * link.c_nlos).collect();
            a.add_diag(scale, &diag);
        }
        a.add_scalar_diag(aux.q / nu);
        let zeta = (0..link.users())
            .map(|k| {
                let c = aux.t[k].conj() * (bandwidth * aux.kappa[k]);
                link.h[k].iter().map(|&h| h * c).collect()
            })
            .collect();
        Self { a_base: a, zeta, p_max }
    }

    fn solve_at(&self, rho: T) -> Result<(Vec<CVec<T>>, T)> {
        let mut a = self.a_base.clone();
        a.add_scalar_diag(rho);
        let factor = a.cholesky()?;
        let v: Vec<CVec<T>> = self.zeta.iter().map(|z| factor.solve(z)).collect();
        let power = v
            .iter()
            .fold(T::zero(), |acc, vk| acc + crate::linalg::norm_sqr(vk));
        Ok((v, power))
    }

    /// Solve for the precoders and the smallest multiplier that satisfies the
    /// power budget.
    pub fn solve(&self, opt: &OptimizerConfig<T>) -> Result<(PrecodingMatrix<T>, DualState<T>)> {
        let users = self.zeta.len();
        let dim = self.a_base.n;
        let zeta_norm: T = self
            .zeta
            .iter()
            .fold(T::zero(), |acc, z| acc + crate::linalg::norm_sqr(z));
        if zeta_norm == T::zero() {
            return Ok((
                PrecodingMatrix::zeros(dim, users),
                DualState { rho: T::zero() },
            ));
        }

        let to_w = |v: Vec<CVec<T>>| PrecodingMatrix {
            columns: v
                .into_iter()
                .map(|vk| vk.into_iter().map(|z| z.conj()).collect())
                .collect(),
        };

        let (v0, p0) = self.solve_at(T::zero())?;
        if p0 <= self.p_max {
            return Ok((to_w(v0), DualState { rho: T::zero() }));
        }

        // Bracket: grow the upper end until the budget is met, then bisect.
        let mut lo = T::zero();
        let mut hi = T::one();
        let mut guard = 0usize;
        loop {
            let (_, p) = self.solve_at(hi)?;
            if p <= self.p_max {
                break;
            }
            lo = hi;
            hi = hi * opt.bisection_growth;
            guard += 1;
            assert!(guard < 2000, "power bracket failed to close");
        }
        while hi - lo > opt.bisection_rel_tol * hi {
            let mid = (lo + hi) / T::of(2.0);
            let (_, p) = self.solve_at(mid)?;
            if p <= self.p_max {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let (v, _) = self.solve_at(hi)?;
        Ok((to_w(v), DualState { rho: hi }))
    }

    /// Residual of the stationarity condition at `(w, rho)`, relative to the
    /// linear term: zero for an exact subproblem solution.
    pub fn stationarity_residual(&self, w: &PrecodingMatrix<T>, rho: T) -> T {
        let mut a = self.a_base.clone();
        a.add_scalar_diag(rho);
        let mut num = T::zero();
        let mut den = T::zero();
        for (zk, wk) in self.zeta.iter().zip(&w.columns) {
            let vk: CVec<T> = wk.iter().map(|z| z.conj()).collect();
            let av = a.matvec(&vk);
            for (avi, zi) in av.iter().zip(zk) {
                num = num + (avi - zi).norm_sqr();
            }
            den = den + crate::linalg::norm_sqr(zk);
        }
        (num / den).sqrt()
    }
}

/// Solve the precoding subproblem for given auxiliaries over any link.
pub fn solve_precoding<T: Real>(
    link: &EffectiveLink<T>,
    aux: &AuxState<T>,
    bandwidth: T,
    nu: T,
    p_max: T,
    opt: &OptimizerConfig<T>,
) -> Result<(PrecodingMatrix<T>, DualState<T>)> {
    PrecodingProblem::from_link(link, aux, bandwidth, nu, p_max).solve(opt)
}

/// Objective value `sum_k (w_k^T A w_k^* - 2 Re(zeta_k^T w_k))` of the
/// unconstrained quadratic (multiplier excluded).
pub fn precoding_objective<T: Real>(problem: &PrecodingProblem<T>, w: &PrecodingMatrix<T>) -> T {
    let mut val = T::zero();
    for (zk, wk) in problem.zeta.iter().zip(&w.columns) {
        let vk: CVec<T> = wk.iter().map(|z| z.conj()).collect();
        let av = problem.a_base.matvec(&vk);
        let quad = vk
            .iter()
            .zip(&av)
            .fold(T::zero(), |acc, (v, a)| acc + (v.conj() * a).re);
        let lin = crate::linalg::dotu(zk, wk).re;
        val = val + quad - T::of(2.0) * lin;
    }
    val
}
