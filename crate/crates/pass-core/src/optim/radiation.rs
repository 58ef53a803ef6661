//! Radiation-power subproblem: minimize a real quadratic over per-waveguide
//! unit spheres by block-coordinate Riemannian descent.
//!
//! Each waveguide's amplitude block lives on the unit sphere (radiated power
//! fractions sum to one). A block step projects the Euclidean gradient onto
//! the tangent space, retracts by normalization, folds negative entries back
//! to nonnegative amplitudes, and is accepted under an Armijo sufficient
//! decrease test, so the objective never increases.

use crate::channel::ChannelState;
use crate::config::SystemConfig;
use crate::linalg::{dot_r, norm_sqr_r, RMat, RVec};
use crate::metrics::{PrecodingMatrix, RadiationAmplitudes};
use crate::optim::{AuxState, OptimizerConfig};
use crate::scalar::{Real, C};

/// Real quadratic `f(s) = s^T A s - linear^T s` over the amplitude vector.
///
/// `a` is the real part of the (Hermitian) quadratic form matrix and is kept
/// exactly symmetric.
#[derive(Debug, Clone)]
pub struct RadiationQuadratic<T> {
    pub a: RMat<T>,
    pub linear: RVec<T>,
}

impl<T: Real> RadiationQuadratic<T> {
    /// Assemble from the current auxiliaries, precoders, and channels.
    pub fn from_state(
        aux: &AuxState<T>,
        w: &PrecodingMatrix<T>,
        ch: &ChannelState<T>,
        config: &SystemConfig<T>,
    ) -> Self {
        let e_count = ch.elements();
        let k_count = ch.h_bar.len();
        let c_nlos = config.c0 / (config.k_rician + T::one());
        let mut a = RMat::zeros(e_count);
        let mut linear = vec![T::zero(); e_count];

        // Guide channel applied to each precoder, per element.
        let gw: Vec<Vec<C<T>>> = (0..k_count)
            .map(|i| {
                (0..e_count)
                    .map(|e| ch.g[e] * w.columns[i][ch.waveguide_of(e)])
                    .collect()
            })
            .collect();

        let mut e_ik = vec![C::new(T::zero(), T::zero()); e_count];
        for k in 0..k_count {
            let weight = aux.kappa[k] * aux.t[k].norm_sqr();
            for i in 0..k_count {
                for e in 0..e_count {
                    e_ik[e] = gw[i][e] * ch.h_bar[k][e];
                }
                a.add_rank1_re(weight, &e_ik);
                for e in 0..e_count {
                    *a.at_mut(e, e) += weight * c_nlos * gw[i][e].norm_sqr() * ch.r_pow[k][e];
                }
            }
            let tk_conj = aux.t[k].conj();
            for e in 0..e_count {
                linear[e] = linear[e]
                    + T::of(2.0) * aux.kappa[k] * (tk_conj * gw[k][e] * ch.h_bar[k][e]).re;
            }
        }
        Self { a, linear }
    }

    pub fn value(&self, s: &[T]) -> T {
        self.a.quadform(s) - dot_r(&self.linear, s)
    }

    /// Euclidean gradient `2 A s - linear`.
    pub fn euclidean_grad(&self, s: &[T]) -> RVec<T> {
        let mut g = self.a.matvec(s);
        for (gi, li) in g.iter_mut().zip(&self.linear) {
            *gi = *gi * T::of(2.0) - *li;
        }
        g
    }
}

/// Tangent-space projection on the unit sphere: `g - (s . g) s`.
///
/// Requires `||s|| = 1`; the output is orthogonal to `s`.
pub fn riemannian_grad<T: Real>(s_m: &[T], g_m: &[T]) -> RVec<T> {
    let inner = dot_r(s_m, g_m);
    s_m.iter()
        .zip(g_m)
        .map(|(&s, &g)| g - inner * s)
        .collect()
}

/// Outcome counters of one radiation optimization run.
#[derive(Debug, Clone, Default)]
pub struct RadiationDiagnostics<T> {
    pub sweeps: usize,
    /// Block steps abandoned because backtracking found no acceptable step.
    pub skipped_blocks: usize,
    /// Objective value after each sweep.
    pub trace: Vec<T>,
}

/// Block-coordinate manifold descent over the per-waveguide spheres.
///
/// Sweeps every waveguide block with a projected-gradient retraction step and
/// Armijo backtracking from `step_init`; stops once the relative decrease of
/// the objective falls below `eps_radiation` or the sweep cap is reached.
/// Negative amplitudes are folded to their absolute value at retraction, so
/// the result is entrywise nonnegative and unit-norm per block.
pub fn optimize_radiation<T: Real>(
    s_init: &RadiationAmplitudes<T>,
    quad: &RadiationQuadratic<T>,
    opt: &OptimizerConfig<T>,
) -> (RadiationAmplitudes<T>, RadiationDiagnostics<T>) {
    let n = s_init.per_waveguide;
    let blocks = s_init.waveguides();
    let mut s = s_init.s.clone();
    let mut f = quad.value(&s);
    let mut diag = RadiationDiagnostics::default();
    let tiny = T::of(1e-30);

    for _sweep in 0..opt.max_radiation_iters {
        let f_before = f;
        for m in 0..blocks {
            let range = m * n..(m + 1) * n;
            let grad = quad.euclidean_grad(&s);
            let rg = riemannian_grad(&s[range.clone()], &grad[range.clone()]);
            let rg_sq = norm_sqr_r(&rg);
            if rg_sq <= tiny {
                continue;
            }
            let mut step = opt.step_init;
            let mut accepted = false;
            let mut candidate = s.clone();
            for _ in 0..=opt.armijo_max_halvings {
                // Retract: step along the tangent, renormalize, fold signs.
                let mut norm_sq = T::zero();
                for (idx, off) in range.clone().enumerate() {
                    let v = s[off] - step * rg[idx];
                    candidate[off] = v;
                    norm_sq = norm_sq + v * v;
                }
                let norm = norm_sq.sqrt();
                if norm > T::zero() {
                    for off in range.clone() {
                        candidate[off] = (candidate[off] / norm).abs();
                    }
                    let f_new = quad.value(&candidate);
                    if f_new <= f - opt.armijo_slope * step * rg_sq {
                        for off in range.clone() {
                            s[off] = candidate[off];
                        }
                        f = f_new;
                        accepted = true;
                        break;
                    }
                }
                step = step * opt.armijo_contraction;
            }
            if !accepted {
                diag.skipped_blocks += 1;
            }
        }
        diag.sweeps += 1;
        diag.trace.push(f);
        let decrease = (f_before - f) / f_before.abs().max(tiny);
        if decrease < opt.eps_radiation {
            break;
        }
    }

    (
        RadiationAmplitudes { s, per_waveguide: n },
        diag,
    )
}
