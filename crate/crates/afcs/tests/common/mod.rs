//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use afcs::params::{alpha_from_mu, DerivedParams, SystemConfig};

pub fn assert_rel(actual: f64, expected: f64, rel: f64) {
    if expected == 0.0 {
        assert!(actual.abs() <= rel, "got {actual}, want 0 within {rel}");
    } else {
        let err = ((actual - expected) / expected).abs();
        assert!(
            err <= rel,
            "got {actual:e}, want {expected:e} (rel err {err:e} > {rel:e})"
        );
    }
}

/// Hand-assembled parameter pair with exact `q_sq` (alpha pinned to 2,
/// unit noise density and bandwidth), bypassing the saturation-margin
/// bisection so closed-form examples come out bitwise clean.
pub fn exact_pair(
    q_sq: f64,
    sigma0_sq: f64,
    sigma_v_sq: f64,
    n_cycles: u32,
) -> (DerivedParams, SystemConfig) {
    let derived = DerivedParams {
        alpha: 2.0,
        a: 2.0 * q_sq.sqrt(),
        sigma_zeta_sq: 1.0,
        w: q_sq,
        q_sq,
        delta_t0: 0.5,
        snr_inp: sigma0_sq / sigma_v_sq,
    };
    let config = SystemConfig {
        x0: 0.0,
        sigma0_sq,
        sigma_v_sq,
        a0: 2.0 * (2.0 * q_sq).sqrt(),
        gamma0: 1.0,
        r: 1.0,
        n_zeta: 1.0,
        f0: 1.0,
        mu: 0.045500263896358396, // two-sided tail beyond 2 sigma
        n_cycles,
    };
    (derived, config)
}

/// Config hitting a target forward SNR through the transmitter
/// amplitude, with unit source variance, distance, gain, noise
/// density, and bandwidth. Goes through the production saturation
/// margin, so derive() on it reproduces `q_sq` to roundoff.
pub fn config_for_q_sq(q_sq: f64, sigma_v_sq: f64, mu: f64, n_cycles: u32) -> SystemConfig {
    let alpha = alpha_from_mu(mu).unwrap();
    SystemConfig {
        x0: 0.0,
        sigma0_sq: 1.0,
        sigma_v_sq,
        a0: alpha * (2.0 * q_sq).sqrt(),
        gamma0: 1.0,
        r: 1.0,
        n_zeta: 1.0,
        f0: 1.0,
        mu,
        n_cycles,
    }
}
