//! Monte Carlo trial runner and the efficiency sweeps behind the
//! figure data.
//!
//! Trials are mutually independent: trial i draws from ChaCha stream i
//! of the master seed, so results are reproducible and independent of
//! execution order. Aggregation always reduces the per-trial records
//! in trial order with compensated summation, which keeps the parallel
//! and sequential paths bit-identical; plain f64 accumulation in a
//! different order would perturb results below the 1e-9 level.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use thiserror::Error;

use crate::link::run_session;
use crate::normal;
use crate::params::{alpha_from_mu, derive, ConfigError, DerivedParams, SystemConfig};
use crate::theory::{
    afcs_capacity_bound, build_profile, power_efficiency, TheoreticalProfile, TheoryError,
};

/// Aggregated statistics over M independent sample transmissions.
/// Entry k-1 of each sequence describes cycle k.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalStats {
    pub m_trials: u64,
    /// Mean squared estimation error per cycle.
    pub p_hat: Vec<f64>,
    /// Fraction of trials whose transmitter clipped at each cycle.
    pub sat_rate: Vec<f64>,
    /// Empirical bit rate per cycle, from `p_hat`.
    pub r_hat: Vec<f64>,
    /// Empirical energy per bit over noise density, from the same
    /// `p_hat`, so `(r_hat/f0) * ebit_hat` is the forward SNR by
    /// construction.
    pub ebit_hat: Vec<f64>,
}

/// One efficiency curve of a sweep, evaluated after `n` cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub n: u32,
    pub r_theory: Vec<f64>,
    pub ebit_theory: Vec<f64>,
    pub r_hat: Vec<f64>,
    pub ebit_hat: Vec<f64>,
}

/// Theoretical and empirical efficiency curves over an SNR grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub q_sq: Vec<f64>,
    pub q_sq_db: Vec<f64>,
    pub curves: Vec<SweepCurve>,
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("cycle set is empty")]
    EmptyCycleSet,
    #[error("cycle set contains 0; cycles are counted from 1")]
    ZeroCycle,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
}

/// RNG for one trial: stream `index` of the master seed.
fn trial_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Per-cycle squared errors and saturation flags of a single trial.
fn one_trial(
    config: &SystemConfig,
    derived: &DerivedParams,
    profile: &TheoreticalProfile,
    master_seed: u64,
    index: u64,
) -> (Vec<f64>, Vec<bool>) {
    let mut rng = trial_rng(master_seed, index);
    let x = config.x0 + config.sigma0_sq.sqrt() * normal::standard_draw(&mut rng);
    let trace = run_session(x, profile, derived, config, &mut rng);
    trace
        .cycles
        .iter()
        .map(|c| {
            let e = x - c.x_hat_after;
            (e * e, c.saturated)
        })
        .unzip()
}

/// Neumaier's compensated running sum.
#[derive(Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(self) -> f64 {
        self.sum + self.compensation
    }
}

fn aggregate(
    config: &SystemConfig,
    derived: &DerivedParams,
    outcomes: Vec<(Vec<f64>, Vec<bool>)>,
    m: u64,
) -> EmpiricalStats {
    let n = config.n_cycles as usize;
    let mut err_sums = vec![CompensatedSum::default(); n];
    let mut sat_counts = vec![0u64; n];
    for (sq_errs, sat_flags) in &outcomes {
        for k in 0..n {
            err_sums[k].add(sq_errs[k]);
            if sat_flags[k] {
                sat_counts[k] += 1;
            }
        }
    }
    let p_hat: Vec<f64> = err_sums.iter().map(|s| s.total() / m as f64).collect();
    let sat_rate: Vec<f64> = sat_counts.iter().map(|&c| c as f64 / m as f64).collect();
    let mut r_hat = Vec::with_capacity(n);
    let mut ebit_hat = Vec::with_capacity(n);
    for k in 1..=n {
        // one shared log term makes rate * energy cancel exactly
        let log_term = (config.sigma0_sq / p_hat[k - 1]).log2();
        r_hat.push(config.f0 * log_term / k as f64);
        ebit_hat.push(k as f64 * derived.q_sq / log_term);
    }
    EmpiricalStats {
        m_trials: m,
        p_hat,
        sat_rate,
        r_hat,
        ebit_hat,
    }
}

/// Runs `m` independent transmissions of fresh Gaussian samples and
/// aggregates their statistics. Deterministic in `master_seed`,
/// regardless of how trials are scheduled.
pub fn run_trials(
    config: &SystemConfig,
    derived: &DerivedParams,
    profile: &TheoreticalProfile,
    m: u64,
    master_seed: u64,
) -> EmpiricalStats {
    #[cfg(feature = "parallel")]
    let outcomes: Vec<_> = (0..m)
        .into_par_iter()
        .map(|i| one_trial(config, derived, profile, master_seed, i))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<_> = (0..m)
        .map(|i| one_trial(config, derived, profile, master_seed, i))
        .collect();
    aggregate(config, derived, outcomes, m)
}

/// Single-threaded twin of [`run_trials`]. Always compiled, so the
/// parallel path can be checked against it bit for bit and benchmarked.
pub fn run_trials_seq(
    config: &SystemConfig,
    derived: &DerivedParams,
    profile: &TheoreticalProfile,
    m: u64,
    master_seed: u64,
) -> EmpiricalStats {
    let outcomes: Vec<_> = (0..m)
        .map(|i| one_trial(config, derived, profile, master_seed, i))
        .collect();
    aggregate(config, derived, outcomes, m)
}

/// Transmitter amplitude that lands the forward SNR on `q_sq` with
/// every other template parameter fixed.
pub fn a0_for_q_sq(template: &SystemConfig, q_sq: f64) -> Result<f64, ConfigError> {
    let alpha = alpha_from_mu(template.mu)?;
    Ok(alpha * template.r * (2.0 * q_sq * template.n_zeta * template.f0).sqrt()
        / template.gamma0)
}

/// Per-grid-point master seed: the splitmix64 output stream seeded at
/// the sweep master seed, so points stay decorrelated while the whole
/// sweep remains reproducible from one number.
fn point_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed.wrapping_add((index + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sweeps the forward SNR by scaling the transmitter amplitude,
/// holding noise densities, bandwidth, geometry, and the saturation
/// margin fixed. For each grid point and each cycle count in `n_set`
/// the result carries the closed-form rate and energy values next to
/// their Monte Carlo estimates from `m` trials.
pub fn sweep_efficiency(
    config_template: &SystemConfig,
    q_sq_grid: &[f64],
    n_set: &[u32],
    m: u64,
    master_seed: u64,
) -> Result<SweepResult, SweepError> {
    if q_sq_grid.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    if n_set.is_empty() {
        return Err(SweepError::EmptyCycleSet);
    }
    if n_set.contains(&0) {
        return Err(SweepError::ZeroCycle);
    }
    let n_max = *n_set.iter().max().expect("n_set checked nonempty");
    let mut curves: Vec<SweepCurve> = n_set
        .iter()
        .map(|&n| SweepCurve {
            n,
            r_theory: Vec::with_capacity(q_sq_grid.len()),
            ebit_theory: Vec::with_capacity(q_sq_grid.len()),
            r_hat: Vec::with_capacity(q_sq_grid.len()),
            ebit_hat: Vec::with_capacity(q_sq_grid.len()),
        })
        .collect();
    for (i, &q_sq) in q_sq_grid.iter().enumerate() {
        let mut config = *config_template;
        config.n_cycles = n_max.max(config_template.n_cycles);
        config.a0 = a0_for_q_sq(config_template, q_sq)?;
        let derived = derive(&config)?;
        let profile = build_profile(&derived, &config);
        let stats = run_trials(
            &config,
            &derived,
            &profile,
            m,
            point_seed(master_seed, i as u64),
        );
        for curve in curves.iter_mut() {
            let n = curve.n;
            curve.r_theory.push(afcs_capacity_bound(n, &derived, &config));
            curve
                .ebit_theory
                .push(power_efficiency(n, &derived, &config)?);
            curve.r_hat.push(stats.r_hat[(n - 1) as usize]);
            curve.ebit_hat.push(stats.ebit_hat[(n - 1) as usize]);
        }
    }
    Ok(SweepResult {
        q_sq: q_sq_grid.to_vec(),
        q_sq_db: q_sq_grid.iter().map(|q| 10.0 * q.log10()).collect(),
        curves,
    })
}
