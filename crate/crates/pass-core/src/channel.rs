//! Multi-waveguide channel synthesis.
//!
//! For a placement of `M * N` antennas this builds the in-waveguide channel
//! (complex attenuation accumulated along each guide), the deterministic
//! Rician component toward each user, and the diagonal path-loss profile that
//! governs the stochastic component. Elements are indexed `e = m * N + n`.

use rand::Rng;

use crate::config::{SystemConfig, UserLayout};
use crate::error::{Error, Result};
use crate::rng::complex_normal;
use crate::scalar::{Real, C};

/// Antenna x-coordinates, one row per waveguide (`x[m][n]`).
#[derive(Debug, Clone, PartialEq)]
pub struct PAPlacement<T> {
    pub x: Vec<Vec<T>>,
}

impl<T: Real> PAPlacement<T> {
    /// Equal-interval deployment `x_n = span * (n+1) / (N+1)` used to
    /// initialize the optimizer and the non-optimized reference point.
    pub fn equal_interval(config: &SystemConfig<T>) -> Self {
        let n = config.pas_per_waveguide;
        let span = config.x_max - config.x_min;
        let row: Vec<T> = (1..=n)
            .map(|i| config.x_min + span * T::from_usize(i).unwrap() / T::from_usize(n + 1).unwrap())
            .collect();
        Self {
            x: vec![row; config.waveguides],
        }
    }

    /// Check range and pairwise spacing; returns every violation.
    pub fn validate(&self, config: &SystemConfig<T>) -> Vec<String> {
        let mut errs = Vec::new();
        for (m, row) in self.x.iter().enumerate() {
            for (n, &x) in row.iter().enumerate() {
                if x < config.x_min - T::of(1e-12) || x > config.x_max + T::of(1e-12) {
                    errs.push(format!(
                        "placement[{m}][{n}] = {x} outside [{}, {}]",
                        config.x_min, config.x_max
                    ));
                }
            }
            for a in 0..row.len() {
                for b in a + 1..row.len() {
                    if (row[a] - row[b]).abs() < config.delta_x - T::of(1e-12) {
                        errs.push(format!(
                            "placement waveguide {m}: antennas {a} and {b} closer than {}",
                            config.delta_x
                        ));
                    }
                }
            }
        }
        errs
    }
}

/// Synthesized channel quantities for a fixed placement.
///
/// `g[e]` is the in-waveguide channel to element `e`, `h_bar[k][e]` the
/// deterministic wireless component, `r_pow[k][e] = r^(-beta_u)` the
/// path-loss profile of the stochastic component, and `dist[k][e]` the
/// element-user distance.
#[derive(Debug, Clone)]
pub struct ChannelState<T> {
    pub waveguides: usize,
    pub pas_per_waveguide: usize,
    pub g: Vec<C<T>>,
    pub h_bar: Vec<Vec<C<T>>>,
    pub r_pow: Vec<Vec<T>>,
    pub dist: Vec<Vec<T>>,
    /// Optional unit-variance stochastic draws `h_tilde[k][e]`, one set per
    /// realization, present only when a noise source was supplied.
    pub h_tilde: Option<Vec<Vec<C<T>>>>,
}

impl<T: Real> ChannelState<T> {
    pub fn elements(&self) -> usize {
        self.waveguides * self.pas_per_waveguide
    }

    /// Waveguide index feeding element `e`.
    #[inline]
    pub fn waveguide_of(&self, e: usize) -> usize {
        e / self.pas_per_waveguide
    }

    /// Scaled stochastic channel entry `sqrt(C0 / (K_r + 1)) * r^(-beta_u/2) * h_tilde`.
    pub fn nlos_entry(&self, config: &SystemConfig<T>, k: usize, e: usize, draw: C<T>) -> C<T> {
        let scale = (config.c0 / (config.k_rician + T::one()) * self.r_pow[k][e]).sqrt();
        draw * scale
    }
}

/// Build the channel state for a placement and user layout.
///
/// When `noise` is supplied, one set of unit-variance circularly-symmetric
/// draws per user is attached (`h_tilde`), independent across elements.
pub fn synth_channels<T: Real>(
    placement: &PAPlacement<T>,
    users: &UserLayout<T>,
    config: &SystemConfig<T>,
    noise: Option<&mut dyn FnMut() -> C<T>>,
) -> Result<ChannelState<T>> {
    let m_count = config.waveguides;
    let n_count = config.pas_per_waveguide;
    assert_eq!(placement.x.len(), m_count, "placement waveguide count");
    let e_count = m_count * n_count;
    let k_count = users.len();
    let two_pi = T::of(2.0) * T::PI();

    let mut g = Vec::with_capacity(e_count);
    for row in &placement.x {
        assert_eq!(row.len(), n_count, "placement antenna count");
        for &x in row {
            // In-waveguide propagation distance equals the x-coordinate: the
            // feed sits at the guide origin.
            let gamma = C::new(-config.alpha_g * x, -two_pi / config.lambda_g * x);
            g.push(gamma.exp());
        }
    }

    let los_frac = (config.k_rician / (config.k_rician + T::one())).sqrt();
    let mut h_bar = vec![Vec::with_capacity(e_count); k_count];
    let mut r_pow = vec![Vec::with_capacity(e_count); k_count];
    let mut dist = vec![Vec::with_capacity(e_count); k_count];
    for (k, &(ux, uy)) in users.positions.iter().enumerate() {
        for m in 0..m_count {
            for n in 0..n_count {
                let x = placement.x[m][n];
                let r = ((ux - x).powi(2) + (uy - config.y_bar[m]).powi(2)).sqrt();
                if r == T::zero() {
                    return Err(Error::DegenerateGeometry { user: k, waveguide: m, element: n });
                }
                let rp = r.powf(-config.beta_u);
                let amp = (config.c0 * rp).sqrt() * los_frac;
                h_bar[k].push(C::from_polar(amp, -two_pi / config.lambda * r));
                r_pow[k].push(rp);
                dist[k].push(r);
            }
        }
    }

    let h_tilde = noise.map(|gen| {
        (0..k_count)
            .map(|_| (0..e_count).map(|_| gen()).collect())
            .collect()
    });

    Ok(ChannelState {
        waveguides: m_count,
        pas_per_waveguide: n_count,
        g,
        h_bar,
        r_pow,
        dist,
        h_tilde,
    })
}

/// Convenience: draw one `K x MN` set of unit-variance complex Gaussians.
pub fn draw_nlos<T: Real>(k: usize, elements: usize, rng: &mut impl Rng) -> Vec<Vec<C<T>>> {
    (0..k)
        .map(|_| (0..elements).map(|_| complex_normal(rng)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStreams;

    fn small_cfg() -> (SystemConfig<f64>, UserLayout<f64>) {
        (SystemConfig::defaults(), UserLayout::defaults())
    }

    #[test]
    fn zero_attenuation_zero_length_gives_unit_guide_channel() {
        let (mut cfg, users) = small_cfg();
        cfg.alpha_g = 0.0;
        let mut placement = PAPlacement::equal_interval(&cfg);
        placement.x[0][0] = 0.0;
        let ch = synth_channels(&placement, &users, &cfg, None).unwrap();
        assert!((ch.g[0] - C::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn pure_los_limit_recovers_path_loss() {
        let (mut cfg, users) = small_cfg();
        cfg.k_rician = 1e12;
        let placement = PAPlacement::equal_interval(&cfg);
        let ch = synth_channels(&placement, &users, &cfg, None).unwrap();
        for k in 0..users.len() {
            for e in 0..ch.elements() {
                let expect = cfg.c0 * ch.dist[k][e].powf(-cfg.beta_u);
                let got = ch.h_bar[k][e].norm_sqr();
                assert!(
                    ((got - expect) / expect).abs() < 1e-9,
                    "k={k} e={e}: {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn deterministic_channel_matches_scalar_formula_script() {
        // Independent entry-by-entry evaluation of the deterministic Rician
        // component, written directly from the scalar formulas.
        let (cfg, users) = small_cfg();
        let placement = PAPlacement::equal_interval(&cfg);
        let ch = synth_channels(&placement, &users, &cfg, None).unwrap();
        let k = 0;
        let (ux, uy) = users.positions[k];
        for m in 0..cfg.waveguides {
            for n in 0..cfg.pas_per_waveguide {
                let x = placement.x[m][n];
                let r = ((ux - x).powi(2) + (uy - cfg.y_bar[m]).powi(2)).sqrt();
                let mag = (cfg.c0 * r.powf(-cfg.beta_u)).sqrt()
                    * (cfg.k_rician / (cfg.k_rician + 1.0)).sqrt();
                let ph = -2.0 * std::f64::consts::PI / cfg.lambda * r;
                let expect = C::new(mag * ph.cos(), mag * ph.sin());
                let got = ch.h_bar[k][m * cfg.pas_per_waveguide + n];
                assert!((got - expect).norm() <= 1e-12 * expect.norm().max(1e-300));
            }
        }
    }

    #[test]
    fn guide_channel_modulus_is_attenuation_only() {
        let (cfg, users) = small_cfg();
        let placement = PAPlacement::equal_interval(&cfg);
        let ch = synth_channels(&placement, &users, &cfg, None).unwrap();
        for m in 0..cfg.waveguides {
            for n in 0..cfg.pas_per_waveguide {
                let e = m * cfg.pas_per_waveguide + n;
                let expect = (-cfg.alpha_g * placement.x[m][n]).exp();
                assert!((ch.g[e].norm() - expect).abs() < 1e-14);
                assert!(ch.g[e].norm() <= 1.0 + 1e-15);
            }
        }
    }

    #[test]
    fn coincident_user_rejected() {
        let (mut cfg, mut users) = small_cfg();
        cfg.k_rician = 0.5;
        let placement = PAPlacement::equal_interval(&cfg);
        users.positions[0] = (placement.x[0][0], cfg.y_bar[0]);
        let r = synth_channels(&placement, &users, &cfg, None);
        assert!(matches!(r, Err(Error::DegenerateGeometry { user: 0, .. })));
    }

    #[test]
    fn noise_draws_are_attached_and_reproducible() {
        let (cfg, users) = small_cfg();
        let placement = PAPlacement::equal_interval(&cfg);
        let streams = SeedStreams::new(11);
        let mut rng = streams.stream(0);
        let mut gen = || complex_normal::<f64>(&mut rng);
        let ch1 = synth_channels(&placement, &users, &cfg, Some(&mut gen)).unwrap();
        let mut rng = streams.stream(0);
        let mut gen = || complex_normal::<f64>(&mut rng);
        let ch2 = synth_channels(&placement, &users, &cfg, Some(&mut gen)).unwrap();
        assert_eq!(ch1.h_tilde.as_ref().unwrap(), ch2.h_tilde.as_ref().unwrap());
    }

    #[test]
    fn equal_interval_placement_validates() {
        let (cfg, _) = small_cfg();
        let placement = PAPlacement::equal_interval(&cfg);
        assert_eq!(placement.x[0], vec![20.0, 40.0, 60.0, 80.0]);
        assert!(placement.validate(&cfg).is_empty());
    }

    #[test]
    fn placement_validation_flags_spacing_and_range() {
        let (cfg, _) = small_cfg();
        let mut placement = PAPlacement::equal_interval(&cfg);
        placement.x[0][1] = placement.x[0][0] + cfg.delta_x / 4.0;
        placement.x[1][0] = cfg.x_max + 1.0;
        let errs = placement.validate(&cfg);
        assert_eq!(errs.len(), 2, "{errs:?}");
    }
}
