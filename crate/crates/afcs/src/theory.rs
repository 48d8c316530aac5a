//! Closed-form engine: optimal parameter schedules, the exact
//! mean-square-error recursion, its threshold approximation,
//! information measures, capacity, and power-bandwidth efficiency.
//! No randomness anywhere in this module.

use crate::params::{DerivedParams, SystemConfig};
use thiserror::Error;

/// Per-cycle schedules and closed-form predictions for one config.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoreticalProfile {
    /// Modulation indices, one per cycle: `m_hat[k]` drives cycle k+1.
    pub m_hat: Vec<f64>,
    /// Receiver correction gains, one per cycle: `l[k]` applies the
    /// cycle-(k+1) channel output.
    pub l: Vec<f64>,
    /// Mean-square error after each cycle; `p[0]` is the prior
    /// variance, so the length is `n_cycles + 1`.
    pub p: Vec<f64>,
    /// Cycle count beyond which feedback noise dominates the error
    /// decay; `+inf` when the feedback channel is noiseless.
    pub n_star: f64,
    /// Forward channel capacity in bit/s.
    pub c_forward: f64,
}

/// Domain violation in a closed-form calculator.
#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("forward SNR Q^2 must be > 0")]
    ZeroForwardSnr,
    #[error("mean-square error must lie in (0, {sigma0_sq}], got {p_n}")]
    MseOutOfRange { p_n: f64, sigma0_sq: f64 },
    #[error("energy per bit undefined: log2 argument {0} is <= 1")]
    EfficiencyUndefined(f64),
}

/// Differential entropies of the forward-channel output, in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entropies {
    /// Unconditional output entropy over n cycles.
    pub prior: f64,
    /// Output entropy given the transmitted residuals (noise only).
    pub posterior: f64,
    /// Information delivered about the residuals: prior - posterior.
    pub mutual: f64,
}

/// One step of the minimum mean-square-error recursion.
///
/// Total on `p_prev >= 0`, `q_sq >= 0`, `sigma_v_sq >= 0`; when both
/// `p_prev` and `sigma_v_sq` are zero the inner ratio is taken at its
/// limit of 1, which keeps the fixed point at zero.
pub fn mmse_step(p_prev: f64, q_sq: f64, sigma_v_sq: f64) -> f64 {
    let denom = sigma_v_sq + p_prev;
    let ratio = if denom == 0.0 {
        1.0
    } else {
        ((1.0 + q_sq) * sigma_v_sq + p_prev) / denom
    };
    ratio * p_prev / (1.0 + q_sq)
}

/// Cycle count at which the error decay leaves the geometric regime:
/// `log2(sigma0_sq / sigma_v_sq) / log2(1 + q_sq)`.
///
/// `+inf` when the feedback channel is noiseless. May be fractional or
/// negative; callers branch on it with real comparisons.
pub fn threshold_n_star(
    derived: &DerivedParams,
    config: &SystemConfig,
) -> Result<f64, TheoryError> {
    if derived.q_sq <= 0.0 {
        return Err(TheoryError::ZeroForwardSnr);
    }
    if config.sigma_v_sq == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(derived.snr_inp.log2() / (1.0 + derived.q_sq).log2())
}

/// Forward channel capacity `F0 * log2(1 + q_sq)` in bit/s.
///
/// The bandwidth is recovered from the cycle duration, so this needs
/// only the derived parameters.
pub fn forward_capacity(derived: &DerivedParams) -> f64 {
    (1.0 + derived.q_sq).log2() / (2.0 * derived.delta_t0)
}

/// Builds the full per-cycle schedule and prediction set.
///
/// Requires `derived.q_sq > 0`, which `params::derive` guarantees.
pub fn build_profile(derived: &DerivedParams, config: &SystemConfig) -> TheoreticalProfile {
    let n = config.n_cycles as usize;
    let alpha = derived.alpha;
    let sv = config.sigma_v_sq;

    let mut p = Vec::with_capacity(n + 1);
    p.push(config.sigma0_sq);
    for k in 1..=n {
        p.push(mmse_step(p[k - 1], derived.q_sq, sv));
    }

    // m_hat[0] normalizes by the prior sigma; afterwards by the
    // feedback-corrupted residual scale sqrt(sigma_v_sq + p[k])
    let mut m_hat = Vec::with_capacity(n);
    m_hat.push(1.0 / (alpha * config.sigma0_sq.sqrt()));
    for p_k in &p[1..n] {
        m_hat.push(1.0 / (alpha * (sv + p_k).sqrt()));
    }

    let snr_gain = derived.q_sq / (1.0 + derived.q_sq);
    let mut l = Vec::with_capacity(n);
    for k in 1..=n {
        l.push(1.0 / (derived.a * m_hat[k - 1]) * snr_gain * p[k - 1] / (sv + p[k - 1]));
    }

    let n_star = threshold_n_star(derived, config).expect("q_sq > 0 for derived params");
    TheoreticalProfile {
        m_hat,
        l,
        p,
        n_star,
        c_forward: forward_capacity(derived),
    }
}

/// Closed-form approximation of the mean-square error after `n`
/// cycles: geometric decay up to the threshold, then a hyperbolic
/// feedback-noise floor `sigma_v_sq / (n - n_star + 1)`.
///
/// Requires `derived.q_sq > 0`. This is a separate calculator; the
/// recursion in [`build_profile`] is always the authoritative value.
pub fn mmse_approx(n: u32, derived: &DerivedParams, config: &SystemConfig) -> f64 {
    let n_star = threshold_n_star(derived, config).expect("q_sq > 0 required");
    if (n as f64) <= n_star {
        config.sigma0_sq * (1.0 + derived.q_sq).powi(-(n as i32))
    } else {
        config.sigma_v_sq / (n as f64 - n_star + 1.0)
    }
}

/// Differential entropies of `n` forward-channel outputs and the
/// mutual information they carry, all in bits.
pub fn entropies(n: u32, derived: &DerivedParams) -> Entropies {
    let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
    let half_n = 0.5 * n as f64;
    let prior = half_n * (two_pi_e * derived.sigma_zeta_sq * (1.0 + derived.q_sq)).log2();
    let posterior = half_n * (two_pi_e * derived.sigma_zeta_sq).log2();
    Entropies {
        prior,
        posterior,
        mutual: half_n * (1.0 + derived.q_sq).log2(),
    }
}

/// Source rate that the delivered fidelity corresponds to:
/// `(F0 / n) * log2(sigma0_sq / p_n)` in bit/s.
pub fn rate_distortion(
    n: u32,
    p_n: f64,
    _derived: &DerivedParams,
    config: &SystemConfig,
) -> Result<f64, TheoryError> {
    if !(p_n > 0.0 && p_n <= config.sigma0_sq) {
        return Err(TheoryError::MseOutOfRange {
            p_n,
            sigma0_sq: config.sigma0_sq,
        });
    }
    Ok(config.f0 / n as f64 * (config.sigma0_sq / p_n).log2())
}

/// Highest rate the scheme sustains at `n` cycles: the forward
/// capacity up to the threshold, decaying as
/// `(F0/n) * log2(snr_inp * (n - n_star + 1))` beyond it.
///
/// Requires `derived.q_sq > 0`.
pub fn afcs_capacity_bound(n: u32, derived: &DerivedParams, config: &SystemConfig) -> f64 {
    let n_star = threshold_n_star(derived, config).expect("q_sq > 0 required");
    if (n as f64) <= n_star {
        forward_capacity(derived)
    } else {
        let log_arg = derived.snr_inp * (n as f64 - n_star + 1.0);
        config.f0 / n as f64 * log_arg.log2()
    }
}

/// Energy spent per delivered bit, relative to the forward noise
/// density: `Q^2 / log2(1 + Q^2)` up to the threshold, rising as
/// `n * Q^2 / log2(snr_inp * (n - n_star + 1))` beyond it.
///
/// Requires `derived.q_sq > 0`.
pub fn power_efficiency(
    n: u32,
    derived: &DerivedParams,
    config: &SystemConfig,
) -> Result<f64, TheoryError> {
    let n_star = threshold_n_star(derived, config)?;
    if (n as f64) <= n_star {
        Ok(derived.q_sq / (1.0 + derived.q_sq).log2())
    } else {
        let log_arg = derived.snr_inp * (n as f64 - n_star + 1.0);
        if log_arg <= 1.0 {
            return Err(TheoryError::EfficiencyUndefined(log_arg));
        }
        Ok(n as f64 * derived.q_sq / log_arg.log2())
    }
}

/// Product of normalized rate and energy per bit. Algebraically this
/// collapses to `q_sq` at every `n`, in both branches; computing it
/// through the two factors keeps that identity an executable check.
///
/// Requires `derived.q_sq > 0` and the [`power_efficiency`] domain.
pub fn tradeoff_product(n: u32, derived: &DerivedParams, config: &SystemConfig) -> f64 {
    let rate = afcs_capacity_bound(n, derived, config) / config.f0;
    let energy = power_efficiency(n, derived, config)
        .expect("power_efficiency domain required for the trade-off product");
    rate * energy
}
