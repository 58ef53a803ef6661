//! System configuration in SI linear units.
//!
//! Unit conversions (dB / dBm / dBW to linear, guide-index to wavelength)
//! happen exactly once at ingestion; everything downstream computes on the
//! resolved values stored here.

use crate::protocol::{MotionSpeeds, PAPowerComponents};
use crate::scalar::Real;

/// Speed of light (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Resolved physical and deployment parameters.
///
/// `waveguides` is the number of feed lines (one RF chain each),
/// `pas_per_waveguide` the number of pinching antennas per line, and the
/// remaining fields follow the free-space/waveguide link budget: carrier
/// wavelength `lambda`, guided wavelength `lambda_g`, amplitude attenuation
/// `alpha_g` in nepers/m, reference path gain `c0` at 1 m, path-loss exponent
/// `beta_u`, and Rician factor `k_rician`.
#[derive(Debug, Clone)]
pub struct SystemConfig<T> {
    pub waveguides: usize,
    pub pas_per_waveguide: usize,
    pub users: usize,
    /// Transmission bandwidth (Hz).
    pub bandwidth: T,
    /// Carrier frequency (Hz).
    pub carrier_freq: T,
    /// Free-space wavelength (m).
    pub lambda: T,
    /// Guided wavelength inside the dielectric waveguide (m).
    pub lambda_g: T,
    /// In-waveguide amplitude attenuation (nepers/m).
    pub alpha_g: T,
    /// Reference path gain at 1 m (linear).
    pub c0: T,
    /// Path-loss exponent.
    pub beta_u: T,
    /// Rician factor (linear, >= 0).
    pub k_rician: T,
    /// Transmit amplifier efficiency, in (0, 1].
    pub nu: T,
    /// Transmit power budget (W).
    pub p_max: T,
    /// Noise power (W).
    pub n0: T,
    /// Minimum spacing between two antennas on one waveguide (m).
    pub delta_x: T,
    /// Deployment range along each waveguide (m).
    pub x_min: T,
    pub x_max: T,
    /// Fixed y-coordinate of each waveguide (m).
    pub y_bar: Vec<T>,
    /// Static base-station power draw (W).
    pub p_bs_static: T,
    /// Actuator module power draws per antenna (W).
    pub pa_power: PAPowerComponents<T>,
    /// Actuator speeds (m/s).
    pub speeds: MotionSpeeds<T>,
    /// Side length of the square service area (m); fixes default waveguide
    /// y-coordinates and baseline station placement.
    pub area_side: T,
}

impl<T: Real> SystemConfig<T> {
    /// Default desk-scale parameter set: 3 waveguides, 4 antennas each,
    /// 4 users, 180 MHz at 28 GHz over a 100 m x 100 m area.
    pub fn defaults() -> Self {
        let carrier: T = T::of(28e9);
        let lambda = T::of(SPEED_OF_LIGHT) / carrier;
        let lambda_g = lambda / T::of(1.4);
        // 18 dB of power attenuation per 100 m reference length, as amplitude
        // nepers per meter.
        let alpha_g = T::of(18.0) * T::of(10.0).ln() / (T::of(20.0) * T::of(100.0));
        let c0 = (lambda / (T::of(4.0) * T::PI())).powi(2);
        let waveguides = 3;
        let area: T = T::of(100.0);
        Self {
            waveguides,
            pas_per_waveguide: 4,
            users: 4,
            bandwidth: T::of(180e6),
            carrier_freq: carrier,
            lambda,
            lambda_g,
            alpha_g,
            c0,
            beta_u: T::of(2.2),
            k_rician: T::of(0.5),
            nu: T::of(0.9),
            p_max: T::dbw_to_watts(T::of(5.0)),
            n0: T::dbm_to_watts(T::of(-80.0)),
            delta_x: lambda / T::of(2.0),
            x_min: T::zero(),
            x_max: T::of(100.0),
            y_bar: default_y_bar(waveguides, area),
            p_bs_static: T::dbw_to_watts(T::of(9.0)),
            pa_power: PAPowerComponents {
                activation: T::dbm_to_watts(T::of(5.0)),
                motor: T::dbm_to_watts(T::of(20.0)),
                piezo: T::dbm_to_watts(T::of(8.0)),
            },
            speeds: MotionSpeeds {
                motor: T::of(10.0),
                piezo: T::of(1e-2),
            },
            area_side: area,
        }
    }

    /// Change waveguide count, recomputing the default y-coordinates.
    pub fn with_waveguides(mut self, m: usize) -> Self {
        self.waveguides = m;
        self.y_bar = default_y_bar(m, self.area_side);
        self
    }

    pub fn with_pas(mut self, n: usize) -> Self {
        self.pas_per_waveguide = n;
        self
    }

    pub fn with_p_max_dbw(mut self, dbw: f64) -> Self {
        self.p_max = T::dbw_to_watts(T::of(dbw));
        self
    }

    /// Total number of antenna elements `M * N`.
    pub fn elements(&self) -> usize {
        self.waveguides * self.pas_per_waveguide
    }

    /// Check every invariant; returns all violations, not just the first.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let push = |errs: &mut Vec<String>, s: String| errs.push(s);
        if self.waveguides == 0 {
            push(&mut errs, "system.waveguides: must be >= 1".into());
        }
        if self.pas_per_waveguide == 0 {
            push(&mut errs, "system.pas_per_waveguide: must be >= 1".into());
        }
        if self.users == 0 {
            push(&mut errs, "system.users: must be >= 1".into());
        }
        let lambda_expect = T::of(SPEED_OF_LIGHT) / self.carrier_freq;
        if ((self.lambda - lambda_expect) / lambda_expect).abs() > T::of(1e-9) {
            push(
                &mut errs,
                format!(
                    "system.lambda: {} inconsistent with c / carrier_frequency = {}",
                    self.lambda, lambda_expect
                ),
            );
        }
        if !(self.bandwidth > T::zero()) {
            push(&mut errs, format!("system.bandwidth_hz: must be > 0, got {}", self.bandwidth));
        }
        if self.alpha_g < T::zero() {
            push(&mut errs, format!("system.attenuation: alpha_g must be >= 0, got {}", self.alpha_g));
        }
        if self.k_rician < T::zero() {
            push(&mut errs, format!("system.rician_factor: must be >= 0, got {}", self.k_rician));
        }
        if !(self.nu > T::zero() && self.nu <= T::one()) {
            push(&mut errs, format!("system.amplifier_efficiency: must be in (0, 1], got {}", self.nu));
        }
        if !(self.p_max > T::zero()) {
            push(&mut errs, format!("system.p_max: must be > 0 W, got {}", self.p_max));
        }
        if !(self.n0 > T::zero()) {
            push(&mut errs, format!("system.noise_power: must be > 0 W, got {}", self.n0));
        }
        if !(self.c0 > T::zero()) {
            push(&mut errs, format!("system.ref_gain: must be > 0, got {}", self.c0));
        }
        if !(self.beta_u > T::zero()) {
            push(&mut errs, format!("system.path_loss_exponent: must be > 0, got {}", self.beta_u));
        }
        let span_needed =
            T::from_usize(self.pas_per_waveguide.saturating_sub(1)).unwrap() * self.delta_x;
        if self.x_max - self.x_min < span_needed {
            push(
                &mut errs,
                format!(
                    "system.x range: [{}, {}] cannot host {} antennas spaced {}",
                    self.x_min, self.x_max, self.pas_per_waveguide, self.delta_x
                ),
            );
        }
        if self.y_bar.len() != self.waveguides {
            push(
                &mut errs,
                format!(
                    "system.waveguide_y_m: {} entries for {} waveguides",
                    self.y_bar.len(),
                    self.waveguides
                ),
            );
        }
        for (name, v) in [
            ("pa_activation", self.pa_power.activation),
            ("pa_motor", self.pa_power.motor),
            ("pa_piezo", self.pa_power.piezo),
            ("bs_static", self.p_bs_static),
        ] {
            if v < T::zero() {
                push(&mut errs, format!("system.{name}: power must be >= 0 W, got {v}"));
            }
        }
        if !(self.speeds.motor > T::zero()) || !(self.speeds.piezo > T::zero()) {
            push(&mut errs, "system.speeds: actuator speeds must be > 0".into());
        }
        errs
    }
}

/// Waveguides evenly split the service area height: `y_m = side * m / (M+1)`.
pub fn default_y_bar<T: Real>(waveguides: usize, area_side: T) -> Vec<T> {
    (1..=waveguides)
        .map(|m| area_side * T::from_usize(m).unwrap() / T::from_usize(waveguides + 1).unwrap())
        .collect()
}

/// Planar user positions (m).
#[derive(Debug, Clone)]
pub struct UserLayout<T> {
    pub positions: Vec<(T, T)>,
}

impl<T: Real> UserLayout<T> {
    /// The four default user drops of the desk-scale setup.
    pub fn defaults() -> Self {
        Self {
            positions: vec![
                (T::of(15.9), T::of(54.3)),
                (T::of(98.6), T::of(85.4)),
                (T::of(74.5), T::of(24.1)),
                (T::of(37.4), T::of(23.9)),
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.positions.is_empty() {
            errs.push("system.users: at least one user required".into());
        }
        for (k, (x, y)) in self.positions.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                errs.push(format!("system.user {k}: non-finite coordinates ({x}, {y})"));
            }
        }
        errs
    }
}
