//! Auxiliary-variable updates: the fractional objective is replaced by a
//! weighted MSE surrogate whose stationary auxiliaries have closed forms.
//!
//! At the optimal auxiliaries the per-user surrogate error satisfies
//! `epsilon_k = 1 / (1 + gamma_k)`, so `-log2(epsilon_k)` recovers the
//! achievable rate exactly; the ratio weight `q` is the current energy
//! efficiency.

use crate::channel::ChannelState;
use crate::config::SystemConfig;
use crate::metrics::{
    pa_power_of, rates_from_sinr, total_power, EffectiveLink, PrecodingMatrix,
    RadiationAmplitudes,
};
use crate::protocol::ProtocolKind;
use crate::scalar::{Real, C};

/// Auxiliary state of the surrogate objective.
#[derive(Debug, Clone)]
pub struct AuxState<T> {
    /// Per-user complex receive scalars.
    pub t: Vec<C<T>>,
    /// Per-user MSE weights `kappa_k = 1 / epsilon_k`.
    pub kappa: Vec<T>,
    /// Per-user surrogate errors.
    pub epsilon: Vec<T>,
    /// Ratio weight: current energy efficiency (bits/joule).
    pub q: T,
}

/// Closed-form auxiliary update for any effective link.
///
/// `p_all` is the total consumed power at the current precoder, used for the
/// ratio weight `q = B * sum_k R_k / P_all`.
pub fn update_aux_link<T: Real>(
    link: &EffectiveLink<T>,
    w: &PrecodingMatrix<T>,
    bandwidth: T,
    p_all: T,
) -> AuxState<T> {
    let k_count = link.users();
    let totals = link.total_terms(w);
    let mut t = Vec::with_capacity(k_count);
    let mut kappa = Vec::with_capacity(k_count);
    let mut epsilon = Vec::with_capacity(k_count);
    let mut sinr = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let s_kk = link.signal(k, &w.columns[k]);
        let d_k = totals[k];
        let t_k = s_kk / d_k;
        let eps_k = t_k.norm_sqr() * d_k - T::of(2.0) * (t_k.conj() * s_kk).re + T::one();
        t.push(t_k);
        epsilon.push(eps_k);
        kappa.push(T::one() / eps_k);
        sinr.push(s_kk.norm_sqr() / (d_k - s_kk.norm_sqr()));
    }
    let (_, sum_rate) = rates_from_sinr(&sinr);
    AuxState {
        t,
        kappa,
        epsilon,
        q: bandwidth * sum_rate / p_all,
    }
}

/// Auxiliary update for the waveguide system at the current operating point.
pub fn update_aux<T: Real>(
    w: &PrecodingMatrix<T>,
    s: &RadiationAmplitudes<T>,
    ch: &ChannelState<T>,
    config: &SystemConfig<T>,
    protocol: ProtocolKind,
) -> AuxState<T> {
    let link = EffectiveLink::from_pass(ch, s, config);
    let p_all = total_power(w, config, pa_power_of(protocol, config));
    update_aux_link(&link, w, config.bandwidth, p_all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{synth_channels, PAPlacement};
    use crate::config::UserLayout;
    use crate::metrics::sum_rate;

    #[test]
    fn zero_precoding_is_the_unit_fixed_point() {
        let cfg = SystemConfig::<f64>::defaults();
        let users = UserLayout::defaults();
        let ch = synth_channels(&PAPlacement::equal_interval(&cfg), &users, &cfg, None).unwrap();
        let s = RadiationAmplitudes::uniform(&cfg);
        let w = PrecodingMatrix::zeros(cfg.waveguides, cfg.users);
        let aux = update_aux(&w, &s, &ch, &cfg, ProtocolKind::Stt);
        for k in 0..cfg.users {
            assert_eq!(aux.t[k], C::new(0.0, 0.0));
            assert_eq!(aux.epsilon[k], 1.0);
            assert_eq!(aux.kappa[k], 1.0);
        }
        assert_eq!(aux.q, 0.0);
    }

    #[test]
    fn scalar_surrogate_recovers_mmse_identity() {
        // Single-user, single-chain, single-antenna: at the stationary t the
        // error equals 1/(1 + gamma).
        let mut cfg = SystemConfig::<f64>::defaults();
        cfg = cfg.with_waveguides(1).with_pas(1);
        cfg.users = 1;
        let users = UserLayout { positions: vec![(30.0, 20.0)] };
        let ch = synth_channels(&PAPlacement::equal_interval(&cfg), &users, &cfg, None).unwrap();
        let s = RadiationAmplitudes::uniform(&cfg);
        let mut w = PrecodingMatrix::zeros(1, 1);
        w.columns[0][0] = C::new(1.2, -0.7);
        let aux = update_aux(&w, &s, &ch, &cfg, ProtocolKind::Saa);
        let gamma = crate::metrics::sinr_closed_form(&w, &s, &ch, &cfg)[0];
        let rel = (aux.epsilon[0] - 1.0 / (1.0 + gamma)).abs() / (1.0 / (1.0 + gamma));
        assert!(rel < 1e-12, "rel = {rel}");
    }

    #[test]
    fn surrogate_error_encodes_the_rate() {
        let cfg = SystemConfig::<f64>::defaults();
        let users = UserLayout::defaults();
        let ch = synth_channels(&PAPlacement::equal_interval(&cfg), &users, &cfg, None).unwrap();
        let s = RadiationAmplitudes::uniform(&cfg);
        // Scaled conjugate-channel precoder.
        let link = EffectiveLink::from_pass(&ch, &s, &cfg);
        let w = PrecodingMatrix {
            columns: (0..cfg.users)
                .map(|k| {
                    let h = &link.h[k];
                    let norm = crate::linalg::norm_sqr(h).sqrt();
                    h.iter().map(|v| v.conj() / norm * 0.5).collect()
                })
                .collect(),
        };
        let aux = update_aux(&w, &s, &ch, &cfg, ProtocolKind::Stt);
        let (rates, _) = sum_rate(&w, &s, &ch, &cfg);
        for k in 0..cfg.users {
            let diff = (-aux.epsilon[k].log2() - rates[k]).abs();
            assert!(diff < 1e-9, "user {k}: {diff}");
        }
    }
}
