//! Outer alternating loop: auxiliaries, precoding, radiation power, and
//! positions are updated in turn inside a penalty continuation on the
//! position-splitting constraints.

use serde::Serialize;

use crate::channel::{synth_channels, ChannelState, PAPlacement};
use crate::config::{SystemConfig, UserLayout};
use crate::error::Result;
use crate::linalg::norm_sqr;
use crate::metrics::{
    energy_efficiency, EeReport, EffectiveLink, PrecodingMatrix, RadiationAmplitudes,
};
use crate::optim::aux::update_aux_link;
use crate::optim::position::{optimize_positions, PositionAux, PositionProblem};
use crate::optim::precoding::PrecodingProblem;
use crate::optim::radiation::{optimize_radiation, RadiationQuadratic};
use crate::optim::{AuxState, DualState, OptimizerConfig};
use crate::protocol::{GridSets, ProtocolKind};
use crate::scalar::{rel_change, Real};

/// Which update a trace record snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Aux,
    Precoding,
    Radiation,
    Position,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Aux => "aux",
            Stage::Precoding => "precoding",
            Stage::Radiation => "radiation",
            Stage::Position => "position",
        };
        f.write_str(s)
    }
}

/// One snapshot of the optimizer state.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord<T> {
    pub outer: usize,
    pub inner: usize,
    pub stage: Stage,
    /// Radiation-subproblem objective at the current amplitudes.
    pub f2: T,
    /// Energy efficiency (bits/joule).
    pub ee: T,
    /// Power-constraint multiplier.
    pub rho: T,
    /// Penalty weight.
    pub varrho: T,
    /// Total transmit power.
    pub transmit_power: T,
}

/// Final (or best-so-far) operating point with its full iteration trace.
#[derive(Debug, Clone)]
pub struct SolutionState<T> {
    pub w: PrecodingMatrix<T>,
    pub s: RadiationAmplitudes<T>,
    pub placement: PAPlacement<T>,
    pub report: EeReport<T>,
    pub aux: AuxState<T>,
    pub dual: DualState<T>,
    pub position: PositionAux<T>,
    /// False when an iteration cap ended the run before the stopping rule.
    pub converged: bool,
    pub trace: Vec<TraceRecord<T>>,
    /// Radiation block steps abandoned by the line search, across the run.
    pub radiation_skipped_blocks: usize,
}

/// Conjugate-channel precoder scaled to the full power budget with equal
/// per-user shares.
pub fn mrt_precoder<T: Real>(link: &EffectiveLink<T>, p_max: T) -> PrecodingMatrix<T> {
    let users = link.users();
    let share = (p_max / T::from_usize(users).unwrap()).sqrt();
    PrecodingMatrix {
        columns: (0..users)
            .map(|k| {
                let nrm = norm_sqr(&link.h[k]).sqrt();
                link.h[k]
                    .iter()
                    .map(|v| {
                        if nrm > T::zero() {
                            v.conj() / nrm * share
                        } else {
                            crate::scalar::C::new(T::zero(), T::zero())
                        }
                    })
                    .collect()
            })
            .collect(),
    }
}

/// The non-optimized reference point: equal-interval placement, equal
/// radiation power, conjugate-channel precoding at full budget.
pub fn reference_state<T: Real>(
    config: &SystemConfig<T>,
    users: &UserLayout<T>,
) -> Result<(PrecodingMatrix<T>, RadiationAmplitudes<T>, PAPlacement<T>, ChannelState<T>)> {
    let placement = PAPlacement::equal_interval(config);
    let ch = synth_channels(&placement, users, config, None)?;
    let s = RadiationAmplitudes::uniform(config);
    let link = EffectiveLink::from_pass(&ch, &s, config);
    let w = mrt_precoder(&link, config.p_max);
    Ok((w, s, placement, ch))
}

/// Maximize energy efficiency by alternating optimization under a deployment
/// protocol.
///
/// Starts from the reference state, then repeats: auxiliary update, precoding
/// solve with power-budget bisection, block-coordinate radiation descent, and
/// one amplitude/phase position pass. The inner loop stops when the relative
/// EE change falls below `eps_inner`; each outer level multiplies the penalty
/// weight and stops on `eps_outer`. The whole run is deterministic.
pub fn maximize_energy_efficiency<T: Real>(
    config: &SystemConfig<T>,
    users: &UserLayout<T>,
    protocol: ProtocolKind,
    grids: &GridSets<T>,
    opt: &OptimizerConfig<T>,
) -> Result<SolutionState<T>> {
    let (mut w, mut s, mut placement, mut ch) = reference_state(config, users)?;
    let mut report = energy_efficiency(&w, &s, &ch, config, protocol);
    let mut dual = DualState { rho: T::zero() };
    let mut varrho = opt.penalty_init;

    let mut aux = update_aux_link(
        &EffectiveLink::from_pass(&ch, &s, config),
        &w,
        config.bandwidth,
        report.p_all,
    );
    let problem0 = PositionProblem::new(&aux, &w, &s, config, users);
    let mut pos = PositionAux::init(&placement, &problem0, grids, varrho)?;

    let mut best: (T, PrecodingMatrix<T>, RadiationAmplitudes<T>, PAPlacement<T>) =
        (report.ee, w.clone(), s.clone(), placement.clone());
    let mut trace: Vec<TraceRecord<T>> = Vec::new();
    let mut skipped = 0usize;
    let mut converged = false;
    let mut ee_prev_level = report.ee;

    'outer: for outer in 0..opt.max_outer_iters {
        pos.varrho = varrho;
        let mut ee_prev = report.ee;
        for inner in 0..opt.max_inner_iters {
            let record = |stage: Stage,
                              trace: &mut Vec<TraceRecord<T>>,
                              aux: &AuxState<T>,
                              w: &PrecodingMatrix<T>,
                              s: &RadiationAmplitudes<T>,
                              ch: &ChannelState<T>,
                              ee: T,
                              rho: T| {
                let quad = RadiationQuadratic::from_state(aux, w, ch, config);
                trace.push(TraceRecord {
                    outer,
                    inner,
                    stage,
                    f2: quad.value(&s.s),
                    ee,
                    rho,
                    varrho,
                    transmit_power: w.total_transmit_power(),
                });
            };

            // Auxiliary variables at the current operating point.
            let link = EffectiveLink::from_pass(&ch, &s, config);
            aux = update_aux_link(&link, &w, config.bandwidth, report.p_all);
            record(Stage::Aux, &mut trace, &aux, &w, &s, &ch, report.ee, dual.rho);

            // Precoding with power-budget bisection.
            let (w_new, dual_new) =
                PrecodingProblem::from_link(&link, &aux, config.bandwidth, config.nu, config.p_max)
                    .solve(opt)?;
            w = w_new;
            dual = dual_new;
            report = energy_efficiency(&w, &s, &ch, config, protocol);
            record(Stage::Precoding, &mut trace, &aux, &w, &s, &ch, report.ee, dual.rho);

            // Radiation power on the per-waveguide spheres.
            let quad = RadiationQuadratic::from_state(&aux, &w, &ch, config);
            let (s_new, diag) = optimize_radiation(&s, &quad, opt);
            s = s_new;
            skipped += diag.skipped_blocks;
            report = energy_efficiency(&w, &s, &ch, config, protocol);
            record(Stage::Radiation, &mut trace, &aux, &w, &s, &ch, report.ee, dual.rho);

            // Positions: one amplitude/phase penalty pass, then resynthesize
            // the channels at the composite placement.
            let problem = PositionProblem::new(&aux, &w, &s, config, users);
            pos.varrho = varrho;
            placement = optimize_positions(&mut pos, &problem, grids)?;
            ch = synth_channels(&placement, users, config, None)?;
            report = energy_efficiency(&w, &s, &ch, config, protocol);
            record(Stage::Position, &mut trace, &aux, &w, &s, &ch, report.ee, dual.rho);

            if report.ee > best.0 {
                best = (report.ee, w.clone(), s.clone(), placement.clone());
            }
            if rel_change(report.ee, ee_prev) < opt.eps_inner {
                break;
            }
            ee_prev = report.ee;
        }

        varrho = varrho * opt.penalty_growth;
        if rel_change(report.ee, ee_prev_level) < opt.eps_outer {
            converged = true;
            break 'outer;
        }
        ee_prev_level = report.ee;
    }

    // On cap exhaustion fall back to the best point seen.
    if !converged && best.0 > report.ee {
        w = best.1.clone();
        s = best.2.clone();
        placement = best.3.clone();
        ch = synth_channels(&placement, users, config, None)?;
        report = energy_efficiency(&w, &s, &ch, config, protocol);
    }

    Ok(SolutionState {
        aux,
        dual,
        position: pos,
        report,
        w,
        s,
        placement,
        converged,
        trace,
        radiation_skipped_blocks: skipped,
    })
}
