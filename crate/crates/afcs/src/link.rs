//! Single-session state machines: the saturating modulator, both
//! baseband channels, and the base-station estimator.
//!
//! Everything operates on demodulated baseband quantities; carrier and
//! propagation loss are folded into the gain `a` of
//! [`DerivedParams`](crate::params::DerivedParams). Channel noise
//! draws are supplied by the caller pre-scaled to the channel
//! variances, so the pure functions here stay RNG-free.

use rand::RngCore;

use crate::normal;
use crate::params::{DerivedParams, SystemConfig};
use crate::theory::TheoreticalProfile;

/// Terminal-unit side of the loop: the control value most recently
/// delivered over the feedback channel, and the modulation index
/// scheduled for the current cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmitterState {
    pub b_hat: f64,
    /// Strictly positive.
    pub m_hat: f64,
}

/// Base-station estimator state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverState {
    pub x_hat: f64,
    /// Completed cycle count, in `0..=n_cycles`.
    pub k: u32,
}

/// Everything observable about one transmission cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleRecord {
    /// 1-based cycle index.
    pub k: u32,
    /// Modulator input `x - b_hat`, before index scaling.
    pub residual: f64,
    /// Whether the scaled residual fell outside the linear region.
    pub saturated: bool,
    /// Normalized amplitude after clipping, always in [-1, 1].
    pub tx_amp: f64,
    /// Demodulated observation delivered to the estimator.
    pub y_tilde: f64,
    /// Estimate after this cycle's update.
    pub x_hat_after: f64,
}

/// Complete record of one sample's n-cycle transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionTrace {
    pub x_true: f64,
    pub cycles: Vec<CycleRecord>,
    pub final_estimate: f64,
}

/// Applies the saturating modulator to the current residual.
///
/// The normalized drive is `u = m_hat * (x - b_hat)`; amplitudes
/// beyond the linear region are pinned to `sign(u)` and flagged.
pub fn modulate(x: f64, tx: &TransmitterState) -> (f64, bool) {
    let u = tx.m_hat * (x - tx.b_hat);
    if u.abs() <= 1.0 {
        (u, false)
    } else {
        (u.signum(), true)
    }
}

/// Forward-channel observation for one cycle: the baseband gain times
/// the (re-clipped) amplitude, plus the demodulated channel noise.
///
/// `noise_draw` must already carry variance `sigma_zeta_sq`. In the
/// linear regime this is exactly `a * m_hat * (x - b_hat) + zeta`.
pub fn forward_channel(tx_amp: f64, derived: &DerivedParams, noise_draw: f64) -> f64 {
    derived.a * tx_amp.clamp(-1.0, 1.0) + noise_draw
}

/// Feedback delivery of a control value.
///
/// `noise_draw` must already carry variance `sigma_v_sq`; a noiseless
/// channel returns the input bit-exactly. The value delivered during
/// cycle k is always the control computed at the end of cycle k-1.
pub fn feedback_channel(b_sent: f64, sigma_v_sq: f64, noise_draw: f64) -> f64 {
    if sigma_v_sq == 0.0 {
        b_sent
    } else {
        b_sent + noise_draw
    }
}

/// One estimator step: `x_hat' = x_hat + l_k * y_tilde`.
///
/// Applied unconditionally; the receiver has no way to detect a
/// saturated cycle, which is what keeps the saturation penalty in the
/// error statistics.
pub fn receiver_update(rx: ReceiverState, y_tilde: f64, l_k: f64) -> ReceiverState {
    ReceiverState {
        x_hat: rx.x_hat + l_k * y_tilde,
        k: rx.k + 1,
    }
}

/// Runs the full n-cycle loop for one sample value.
///
/// Per cycle: deliver the previous estimate over the feedback channel,
/// modulate the residual, observe through the forward channel, update
/// the estimate with the scheduled gain. Exactly two standard-normal
/// draws are consumed per cycle, feedback first and forward second,
/// whether or not the corresponding variance is zero, so traces are
/// reproducible from the rng state alone.
///
/// `profile` must have been built for `config`; cycle k uses
/// `m_hat[k-1]` and `l[k-1]`.
pub fn run_session<R: RngCore + ?Sized>(
    x: f64,
    profile: &TheoreticalProfile,
    derived: &DerivedParams,
    config: &SystemConfig,
    rng: &mut R,
) -> SessionTrace {
    let sigma_v = config.sigma_v_sq.sqrt();
    let sigma_zeta = derived.sigma_zeta_sq.sqrt();
    let mut rx = ReceiverState {
        x_hat: config.x0,
        k: 0,
    };
    let mut cycles = Vec::with_capacity(config.n_cycles as usize);
    for k in 1..=config.n_cycles {
        let v = sigma_v * normal::standard_draw(rng);
        let b_hat = feedback_channel(rx.x_hat, config.sigma_v_sq, v);
        let tx = TransmitterState {
            b_hat,
            m_hat: profile.m_hat[(k - 1) as usize],
        };
        let (tx_amp, saturated) = modulate(x, &tx);
        let zeta = sigma_zeta * normal::standard_draw(rng);
        let y_tilde = forward_channel(tx_amp, derived, zeta);
        rx = receiver_update(rx, y_tilde, profile.l[(k - 1) as usize]);
        cycles.push(CycleRecord {
            k,
            residual: x - b_hat,
            saturated,
            tx_amp,
            y_tilde,
            x_hat_after: rx.x_hat,
        });
    }
    SessionTrace {
        x_true: x,
        cycles,
        final_estimate: rx.x_hat,
    }
}
