//! Signal propagation along one waveguide with a cascade of pinching
//! antennas.
//!
//! Each antenna couples a fraction `delta_n` of the incident power out of the
//! guide and passes the rest on. Propagation between antennas applies the
//! complex attenuation `exp(-(alpha_g + j 2 pi / lambda_g) L)`.

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::scalar::{Real, C};

/// Radiation split coefficients and inter-antenna segment lengths of one
/// waveguide.
#[derive(Debug, Clone)]
pub struct WaveguideCascade<T> {
    /// Per-antenna split coefficient `delta_n` in `[0, 1]`.
    pub delta: Vec<T>,
    /// Length of the guide segment leading to each antenna (m).
    pub segment_lengths: Vec<T>,
}

impl<T: Real> WaveguideCascade<T> {
    pub fn new(delta: Vec<T>, segment_lengths: Vec<T>) -> Result<Self> {
        for (i, &d) in delta.iter().enumerate() {
            if !(d >= T::zero() && d <= T::one()) {
                return Err(Error::SplitOutOfRange {
                    index: i,
                    value: d.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        for (i, &l) in segment_lengths.iter().enumerate() {
            if l < T::zero() {
                return Err(Error::NegativeSegment {
                    index: i,
                    value: l.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        if delta.len() != segment_lengths.len() {
            return Err(Error::Config(vec![format!(
                "cascade: {} split coefficients but {} segment lengths",
                delta.len(),
                segment_lengths.len()
            )]));
        }
        Ok(Self { delta, segment_lengths })
    }
}

/// Signals observed at one antenna of the cascade.
#[derive(Debug, Clone, Copy)]
pub struct CascadeTap<T> {
    /// Signal arriving at the antenna after guide propagation.
    pub incident: C<T>,
    /// Signal coupled out of the guide.
    pub radiated: C<T>,
    /// Signal continuing along the guide.
    pub through: C<T>,
}

/// Propagate a feed signal through the cascade, returning the incident,
/// radiated, and through signal at every antenna.
///
/// Energy is conserved at each tap: `|radiated|^2 + |through|^2 = |incident|^2`.
pub fn cascade_propagate<T: Real>(
    cascade: &WaveguideCascade<T>,
    feed: C<T>,
    config: &SystemConfig<T>,
) -> Result<Vec<CascadeTap<T>>> {
    // Re-check domain so direct struct construction cannot bypass it.
    for (i, &d) in cascade.delta.iter().enumerate() {
        if !(d >= T::zero() && d <= T::one()) {
            return Err(Error::SplitOutOfRange {
                index: i,
                value: d.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    for (i, &l) in cascade.segment_lengths.iter().enumerate() {
        if l < T::zero() {
            return Err(Error::NegativeSegment {
                index: i,
                value: l.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    let two_pi = T::of(2.0) * T::PI();
    let mut through = feed;
    let mut taps = Vec::with_capacity(cascade.delta.len());
    for (&d, &len) in cascade.delta.iter().zip(&cascade.segment_lengths) {
        let gamma = C::new(-config.alpha_g * len, -two_pi / config.lambda_g * len);
        let incident = gamma.exp() * through;
        let radiated = incident * d.sqrt();
        through = incident * (T::one() - d).sqrt();
        taps.push(CascadeTap { incident, radiated, through });
    }
    Ok(taps)
}

/// Overall radiation power coefficients `xi_n = delta_n * prod_{j<n} (1 - delta_j)`:
/// the fraction of the fed power radiated by each antenna, ignoring guide
/// attenuation.
pub fn effective_radiation_coeffs<T: Real>(delta: &[T]) -> Result<Vec<T>> {
    let mut remaining = T::one();
    let mut xi = Vec::with_capacity(delta.len());
    for (i, &d) in delta.iter().enumerate() {
        if !(d >= T::zero() && d <= T::one()) {
            return Err(Error::SplitOutOfRange {
                index: i,
                value: d.to_f64().unwrap_or(f64::NAN),
            });
        }
        xi.push(d * remaining);
        remaining = remaining * (T::one() - d);
    }
    Ok(xi)
}

/// Received desired-signal power of a user served by a single waveguide under
/// the free-space line-of-sight model (`C0 = (lambda / 4 pi)^2`, square-law
/// path loss).
///
/// `xs` are antenna x-coordinates (the guide runs along the x-axis from the
/// feed at the origin), `xi` the radiation power coefficients.
pub fn desired_signal_power<T: Real>(
    xs: &[T],
    user: (T, T),
    xi: &[T],
    config: &SystemConfig<T>,
) -> Result<T> {
    assert_eq!(xs.len(), xi.len(), "one radiation coefficient per antenna");
    let c0 = (config.lambda / (T::of(4.0) * T::PI())).powi(2);
    let two_pi = T::of(2.0) * T::PI();
    let mut sum = C::new(T::zero(), T::zero());
    for (n, (&x, &xin)) in xs.iter().zip(xi).enumerate() {
        let r = ((user.0 - x).powi(2) + user.1.powi(2)).sqrt();
        if r == T::zero() {
            return Err(Error::DegenerateGeometry { user: 0, waveguide: 0, element: n });
        }
        let d = x;
        let amp = (c0 * xin).sqrt() / r * (-config.alpha_g * d).exp();
        let phase = -(two_pi / config.lambda * r + two_pi / config.lambda_g * d);
        sum += C::from_polar(amp, phase);
    }
    Ok(sum.norm_sqr())
}
