//! Energy-efficiency maximization: auxiliary-variable reformulation,
//! per-block solvers, and the alternating outer loop.

mod aux;
mod driver;
mod position;
mod precoding;
mod radiation;

pub use aux::{update_aux, update_aux_link, AuxState};
pub use driver::{
    maximize_energy_efficiency, mrt_precoder, reference_state, SolutionState, Stage, TraceRecord,
};
pub use position::{
    objective_f4, optimize_positions, single_link_two_stage, update_amplitude_block,
    update_phase_block, PositionAux, PositionProblem, SingleLinkResult,
};
pub use precoding::{precoding_objective, solve_precoding, DualState, PrecodingProblem};
pub use radiation::{
    optimize_radiation, riemannian_grad, RadiationDiagnostics, RadiationQuadratic,
};

use crate::scalar::Real;

/// Stopping thresholds, line-search constants, and iteration caps.
#[derive(Debug, Clone, Copy)]
pub struct OptimizerConfig<T> {
    /// Relative-decrease threshold of the radiation objective.
    pub eps_radiation: T,
    /// Relative EE-change threshold of the inner alternating loop.
    pub eps_inner: T,
    /// Relative EE-change threshold across penalty levels.
    pub eps_outer: T,
    /// Initial line-search step size.
    pub step_init: T,
    /// Backtracking contraction factor.
    pub armijo_contraction: T,
    /// Sufficient-decrease slope.
    pub armijo_slope: T,
    /// Maximum number of halvings per line search.
    pub armijo_max_halvings: usize,
    /// Cap on radiation-optimizer sweeps.
    pub max_radiation_iters: usize,
    /// Cap on inner alternating iterations per penalty level.
    pub max_inner_iters: usize,
    /// Cap on penalty levels.
    pub max_outer_iters: usize,
    /// Relative tolerance of the power-constraint bisection.
    pub bisection_rel_tol: T,
    /// Bracket growth factor of the bisection.
    pub bisection_growth: T,
    /// Initial penalty weight coupling positions to their auxiliaries.
    pub penalty_init: T,
    /// Penalty growth factor per outer iteration (> 1).
    pub penalty_growth: T,
}

impl<T: Real> OptimizerConfig<T> {
    pub fn defaults() -> Self {
        Self {
            eps_radiation: T::of(1e-4),
            eps_inner: T::of(1e-8),
            eps_outer: T::of(1e-8),
            step_init: T::of(1e2),
            armijo_contraction: T::of(0.5),
            armijo_slope: T::of(1e-4),
            armijo_max_halvings: 50,
            max_radiation_iters: 150,
            max_inner_iters: 40,
            max_outer_iters: 8,
            bisection_rel_tol: T::of(1e-8),
            bisection_growth: T::of(2.0),
            penalty_init: T::of(230.0),
            penalty_growth: T::of(1.0 / 0.9),
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        for (name, v) in [
            ("eps_radiation", self.eps_radiation),
            ("eps_inner", self.eps_inner),
            ("eps_outer", self.eps_outer),
            ("step_init", self.step_init),
            ("armijo_contraction", self.armijo_contraction),
            ("armijo_slope", self.armijo_slope),
            ("bisection_rel_tol", self.bisection_rel_tol),
            ("penalty_init", self.penalty_init),
        ] {
            if !(v > T::zero()) {
                errs.push(format!("optimizer.{name}: must be > 0, got {v}"));
            }
        }
        if !(self.armijo_contraction < T::one()) {
            errs.push("optimizer.armijo_contraction: must be < 1".into());
        }
        if !(self.bisection_growth > T::one()) {
            errs.push("optimizer.bisection_growth: must be > 1".into());
        }
        if !(self.penalty_growth > T::one()) {
            errs.push("optimizer.penalty_growth: must be > 1".into());
        }
        for (name, v) in [
            ("max_radiation_iters", self.max_radiation_iters),
            ("max_inner_iters", self.max_inner_iters),
            ("max_outer_iters", self.max_outer_iters),
            ("armijo_max_halvings", self.armijo_max_halvings),
        ] {
            if v < 1 {
                errs.push(format!("optimizer.{name}: must be >= 1"));
            }
        }
        errs
    }
}
