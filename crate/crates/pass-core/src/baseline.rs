//! Conventional MIMO and cell-free benchmarks under a matched power model.
//!
//! Both architectures reuse the Rician channel model and the exact rate code
//! path of the waveguide system; only the element geometry and the power
//! accounting differ (no antenna actuator draw).

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{SystemConfig, UserLayout};
use crate::error::{Error, Result};
use crate::linalg::{CVec, RVec};
use crate::metrics::{rates_from_sinr, EffectiveLink, PrecodingMatrix};
use crate::optim::{mrt_precoder, update_aux_link, OptimizerConfig, PrecodingProblem};
use crate::scalar::{rel_change, Real, C};

/// Benchmark architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    /// One base station with `M` antennas (one per RF chain) at the area
    /// corner.
    Mimo,
    /// `M` cooperating stations with `N` antennas each along the area
    /// center line.
    CellFree,
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mimo" => Ok(BaselineKind::Mimo),
            "cellfree" | "cell-free" => Ok(BaselineKind::CellFree),
            other => Err(Error::Config(vec![format!(
                "baseline: unknown architecture {other:?} (expected mimo | cellfree)"
            )])),
        }
    }
}

impl std::fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BaselineKind::Mimo => "mimo",
            BaselineKind::CellFree => "cellfree",
        })
    }
}

/// Station placement and per-station array size.
#[derive(Debug, Clone)]
pub struct BaselineLayout<T> {
    pub kind: BaselineKind,
    pub stations: Vec<(T, T)>,
    pub antennas_per_station: usize,
}

impl<T: Real> BaselineLayout<T> {
    /// Standard benchmark geometry: MIMO at the origin corner; cell-free
    /// stations on the vertical center line, evenly spaced like the
    /// waveguides.
    pub fn build(kind: BaselineKind, config: &SystemConfig<T>) -> Self {
        match kind {
            BaselineKind::Mimo => Self {
                kind,
                stations: vec![(T::zero(), T::zero())],
                antennas_per_station: config.waveguides,
            },
            BaselineKind::CellFree => Self {
                kind,
                stations: (1..=config.waveguides)
                    .map(|m| {
                        (
                            config.area_side / T::of(2.0),
                            config.area_side * T::from_usize(m).unwrap()
                                / T::from_usize(config.waveguides + 1).unwrap(),
                        )
                    })
                    .collect(),
                antennas_per_station: config.pas_per_waveguide,
            },
        }
    }

    /// Half-wavelength uniform linear array along the x-axis at each station.
    pub fn element_positions(&self, config: &SystemConfig<T>) -> Vec<(T, T)> {
        let half = config.lambda / T::of(2.0);
        self.stations
            .iter()
            .flat_map(|&(sx, sy)| {
                (0..self.antennas_per_station)
                    .map(move |j| (sx + T::from_usize(j).unwrap() * half, sy))
            })
            .collect()
    }

    pub fn elements(&self) -> usize {
        self.stations.len() * self.antennas_per_station
    }

    pub fn validate(&self, config: &SystemConfig<T>) -> Vec<String> {
        let mut errs = Vec::new();
        for (i, &(x, y)) in self.stations.iter().enumerate() {
            let inside = x >= T::zero()
                && x <= config.area_side
                && y >= T::zero()
                && y <= config.area_side;
            if !inside {
                errs.push(format!("baseline station {i} at ({x}, {y}) outside the service area"));
            }
        }
        errs
    }
}

/// Per-user element channels of a baseline architecture.
#[derive(Debug, Clone)]
pub struct BaselineChannels<T> {
    pub h_bar: Vec<CVec<T>>,
    pub r_pow: Vec<RVec<T>>,
    pub dist: Vec<RVec<T>>,
    pub h_tilde: Option<Vec<CVec<T>>>,
}

/// Rician channels toward every array element; same parameters as the
/// waveguide system.
pub fn synth_baseline_channels<T: Real>(
    layout: &BaselineLayout<T>,
    users: &UserLayout<T>,
    config: &SystemConfig<T>,
    noise: Option<&mut dyn FnMut() -> C<T>>,
) -> Result<BaselineChannels<T>> {
    let elems = layout.element_positions(config);
    let two_pi = T::of(2.0) * T::PI();
    let los_frac = (config.k_rician / (config.k_rician + T::one())).sqrt();
    let mut h_bar = Vec::with_capacity(users.len());
    let mut r_pow = Vec::with_capacity(users.len());
    let mut dist = Vec::with_capacity(users.len());
    for (k, &(ux, uy)) in users.positions.iter().enumerate() {
        let mut hk = Vec::with_capacity(elems.len());
        let mut rk = Vec::with_capacity(elems.len());
        let mut dk = Vec::with_capacity(elems.len());
        for (e, &(ex, ey)) in elems.iter().enumerate() {
            let r = ((ux - ex).powi(2) + (uy - ey).powi(2)).sqrt();
            if r == T::zero() {
                return Err(Error::DegenerateGeometry {
                    user: k,
                    waveguide: e / layout.antennas_per_station,
                    element: e % layout.antennas_per_station,
                });
            }
            let rp = r.powf(-config.beta_u);
            hk.push(C::from_polar(
                (config.c0 * rp).sqrt() * los_frac,
                -two_pi / config.lambda * r,
            ));
            rk.push(rp);
            dk.push(r);
        }
        h_bar.push(hk);
        r_pow.push(rk);
        dist.push(dk);
    }
    let h_tilde = noise.map(|gen| {
        (0..users.len())
            .map(|_| (0..elems.len()).map(|_| gen()).collect())
            .collect()
    });
    Ok(BaselineChannels { h_bar, r_pow, dist, h_tilde })
}

/// Consumed power of a baseline: amplifier draw plus static draw, no
/// actuator terms.
pub fn baseline_total_power<T: Real>(w: &PrecodingMatrix<T>, config: &SystemConfig<T>) -> T {
    w.total_transmit_power() / config.nu + config.p_bs_static
}

/// Result of a baseline evaluation.
#[derive(Debug, Clone)]
pub struct BaselineReport<T> {
    pub ee: T,
    pub sum_rate: T,
    pub p_all: T,
    pub w: PrecodingMatrix<T>,
    pub iterations: usize,
}

/// Optimize the baseline precoder with the same auxiliary-update plus
/// budget-constrained solve used for the waveguide system (no radiation or
/// position blocks) and return the resulting energy efficiency.
pub fn evaluate_baseline_ee<T: Real>(
    layout: &BaselineLayout<T>,
    users: &UserLayout<T>,
    config: &SystemConfig<T>,
    opt: &OptimizerConfig<T>,
) -> Result<BaselineReport<T>> {
    let ch = synth_baseline_channels(layout, users, config, None)?;
    let link = EffectiveLink::from_elements(ch.h_bar, ch.r_pow, config);
    let mut w = mrt_precoder(&link, config.p_max);
    let mut p_all = baseline_total_power(&w, config);
    let (_, mut sum) = rates_from_sinr(&link.sinr(&w));
    let mut ee = config.bandwidth * sum / p_all;
    let mut iterations = 0usize;
    for _ in 0..opt.max_inner_iters {
        iterations += 1;
        let aux = update_aux_link(&link, &w, config.bandwidth, p_all);
        let (w_new, _) =
            PrecodingProblem::from_link(&link, &aux, config.bandwidth, config.nu, config.p_max)
                .solve(opt)?;
        w = w_new;
        p_all = baseline_total_power(&w, config);
        let (_, s) = rates_from_sinr(&link.sinr(&w));
        sum = s;
        let ee_new = config.bandwidth * sum / p_all;
        let done = rel_change(ee_new, ee) < opt.eps_inner;
        ee = ee_new;
        if done {
            break;
        }
    }
    Ok(BaselineReport { ee, sum_rate: sum, p_all, w, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layouts_have_contracted_shapes() {
        let cfg = SystemConfig::<f64>::defaults();
        let users = UserLayout::defaults();
        let mimo = BaselineLayout::build(BaselineKind::Mimo, &cfg);
        assert_eq!(mimo.stations, vec![(0.0, 0.0)]);
        assert_eq!(mimo.elements(), cfg.waveguides);
        assert!(mimo.validate(&cfg).is_empty());
        let ch = synth_baseline_channels(&mimo, &users, &cfg, None).unwrap();
        assert_eq!(ch.h_bar[0].len(), cfg.waveguides);

        let cf = BaselineLayout::build(BaselineKind::CellFree, &cfg);
        assert_eq!(cf.stations.len(), cfg.waveguides);
        assert_eq!(cf.antennas_per_station, cfg.pas_per_waveguide);
        assert_eq!(cf.stations[0], (50.0, 25.0));
        assert!(cf.validate(&cfg).is_empty());
        let ch = synth_baseline_channels(&cf, &users, &cfg, None).unwrap();
        assert_eq!(ch.h_bar[0].len(), cfg.waveguides * cfg.pas_per_waveguide);
    }

    #[test]
    fn pure_los_single_antenna_recovers_path_loss() {
        let mut cfg = SystemConfig::<f64>::defaults().with_waveguides(1);
        cfg.k_rician = 1e12;
        let users = UserLayout { positions: vec![(30.0, 40.0)] };
        let layout = BaselineLayout::build(BaselineKind::Mimo, &cfg);
        let ch = synth_baseline_channels(&layout, &users, &cfg, None).unwrap();
        let r = ch.dist[0][0];
        let expect = (cfg.c0 * r.powf(-cfg.beta_u)).sqrt();
        let got = ch.h_bar[0][0].norm();
        assert!(((got - expect) / expect).abs() < 1e-9);
    }

    #[test]
    fn channels_match_independent_per_element_script() {
        let cfg = SystemConfig::<f64>::defaults();
        let users = UserLayout::defaults();
        let layout = BaselineLayout::build(BaselineKind::CellFree, &cfg);
        let ch = synth_baseline_channels(&layout, &users, &cfg, None).unwrap();
        // Independent script: rebuild every entry from scalar formulas.
        for (k, &(ux, uy)) in users.positions.iter().enumerate() {
            let mut e = 0usize;
            for m in 1..=cfg.waveguides {
                let sy = 100.0 * m as f64 / (cfg.waveguides + 1) as f64;
                for j in 0..cfg.pas_per_waveguide {
                    let ex = 50.0 + j as f64 * cfg.lambda / 2.0;
                    let r = ((ux - ex).powi(2) + (uy - sy).powi(2)).sqrt();
                    let mag = (cfg.c0 * r.powf(-cfg.beta_u)).sqrt()
                        * (cfg.k_rician / (cfg.k_rician + 1.0)).sqrt();
                    let ph = -2.0 * std::f64::consts::PI / cfg.lambda * r;
                    let expect = C::new(mag * ph.cos(), mag * ph.sin());
                    assert!(
                        (ch.h_bar[k][e] - expect).norm() <= 1e-12 * expect.norm(),
                        "k={k} e={e}"
                    );
                    e += 1;
                }
            }
        }
    }

    #[test]
    fn user_on_station_rejected() {
        let cfg = SystemConfig::<f64>::defaults();
        let layout = BaselineLayout::build(BaselineKind::Mimo, &cfg);
        let users = UserLayout { positions: vec![(0.0, 0.0)] };
        assert!(matches!(
            synth_baseline_channels(&layout, &users, &cfg, None),
            Err(Error::DegenerateGeometry { .. })
        ));
    }

    #[test]
    fn vanishing_budget_gives_vanishing_ee() {
        let mut cfg = SystemConfig::<f64>::defaults();
        cfg.p_max = 1e-12;
        let users = UserLayout::defaults();
        let layout = BaselineLayout::build(BaselineKind::Mimo, &cfg);
        let rep = evaluate_baseline_ee(&layout, &users, &cfg, &OptimizerConfig::defaults()).unwrap();
        assert!(rep.ee < 1.0);
    }

    #[test]
    fn optimized_ee_is_nondecreasing_in_the_budget() {
        let users = UserLayout::defaults();
        let opt = OptimizerConfig {
            max_inner_iters: 30,
            ..OptimizerConfig::defaults()
        };
        for kind in [BaselineKind::Mimo, BaselineKind::CellFree] {
            let mut prev = 0.0f64;
            for dbw in [-10.0, -5.0, 0.0, 5.0, 10.0] {
                let cfg = SystemConfig::<f64>::defaults().with_p_max_dbw(dbw);
                let layout = BaselineLayout::build(kind, &cfg);
                let rep = evaluate_baseline_ee(&layout, &users, &cfg, &opt).unwrap();
                assert!(
                    rep.ee >= prev * (1.0 - 1e-6),
                    "{kind} at {dbw} dBW: {} < {prev}",
                    rep.ee
                );
                prev = rep.ee;
            }
        }
    }
}
