//! System configuration and derived link parameters.
//!
//! [`SystemConfig`] holds the user-supplied description of the source,
//! the two channels, and the transmitter. [`derive`] computes every
//! secondary quantity the rest of the crate consumes. Configs come
//! from a flat key-value text format (one `key = value` per line, `#`
//! comments, all ten keys required) or are assembled key by key with
//! [`ConfigBuilder`], which is what the CLI override flags use.

use crate::normal;
use thiserror::Error;

/// Operating-regime margin: the closed-form error floor derivations
/// assume the input SNR exceeds 1 + Q^2 "by far"; we warn below a
/// factor of 10.
pub const R_MARGIN: f64 = 10.0;

/// User-supplied parameters of source, channels, and transmitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    /// Prior mean of the transmitted Gaussian value.
    pub x0: f64,
    /// Prior variance of the transmitted value; > 0.
    pub sigma0_sq: f64,
    /// Feedback-channel noise variance; >= 0 (0 means ideal feedback).
    pub sigma_v_sq: f64,
    /// Carrier amplitude; > 0.
    pub a0: f64,
    /// Forward channel gain; > 0.
    pub gamma0: f64,
    /// Transmitter-to-receiver distance; > 0.
    pub r: f64,
    /// Forward noise spectral density; > 0.
    pub n_zeta: f64,
    /// Forward channel bandwidth in Hz; > 0.
    pub f0: f64,
    /// Permissible modulator saturation probability, in (0, 1).
    pub mu: f64,
    /// Number of transmission cycles per value; >= 1.
    pub n_cycles: u32,
}

/// Quantities computed once from a [`SystemConfig`] and read everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    /// Saturation factor: the modulator clips residuals beyond
    /// `alpha` standard deviations.
    pub alpha: f64,
    /// Demodulated baseband gain, `a0 * gamma0 / (r * sqrt(2))`.
    pub a: f64,
    /// Forward noise variance, `n_zeta * f0`.
    pub sigma_zeta_sq: f64,
    /// Information-component transmit power, `(a / alpha)^2`.
    pub w: f64,
    /// Forward-channel output SNR, `w / sigma_zeta_sq`.
    pub q_sq: f64,
    /// Cycle duration in seconds, `1 / (2 * f0)`.
    pub delta_t0: f64,
    /// Input SNR `sigma0_sq / sigma_v_sq`; `+inf` for ideal feedback.
    pub snr_inp: f64,
}

/// Rejected configuration or config-text input.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("mu must lie strictly inside (0, 1), got {0}")]
    MuOutOfRange(f64),
    #[error("{field} must be > 0, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("sigma_v_sq must be >= 0, got {0}")]
    NegativeNoise(f64),
    #[error("x0 must be finite, got {0}")]
    NonFiniteMean(f64),
    #[error("n_cycles must be >= 1")]
    ZeroCycles,
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("duplicate key '{0}'")]
    DuplicateKey(String),
    #[error("invalid value for '{key}': '{value}'")]
    BadValue { key: String, value: String },
    #[error("expected 'key = value', got '{0}'")]
    Syntax(String),
    #[error("missing required keys: {0}")]
    MissingKeys(String),
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<ConfigError>,
    },
}

/// Advisory finding from [`validate_regime`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeWarning {
    /// The configured input SNR `sigma0_sq / sigma_v_sq`.
    pub snr_inp: f64,
    /// The value it should exceed, `R_MARGIN * (1 + q_sq)`.
    pub required: f64,
}

impl std::fmt::Display for RegimeWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "input SNR {:.6e} is below {:.6e} (= {} x (1 + Q^2)); \
             closed-form error-floor approximations may be poor here",
            self.snr_inp, self.required, R_MARGIN
        )
    }
}

impl SystemConfig {
    /// Checks every field invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.x0.is_finite() {
            return Err(ConfigError::NonFiniteMean(self.x0));
        }
        for (field, value) in [
            ("sigma0_sq", self.sigma0_sq),
            ("a0", self.a0),
            ("gamma0", self.gamma0),
            ("r", self.r),
            ("n_zeta", self.n_zeta),
            ("f0", self.f0),
        ] {
            if value <= 0.0 || !value.is_finite() {
                return Err(ConfigError::NonPositive { field, value });
            }
        }
        if self.sigma_v_sq < 0.0 || !self.sigma_v_sq.is_finite() {
            return Err(ConfigError::NegativeNoise(self.sigma_v_sq));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(ConfigError::MuOutOfRange(self.mu));
        }
        if self.n_cycles < 1 {
            return Err(ConfigError::ZeroCycles);
        }
        Ok(())
    }

    /// Starts an empty builder; every key must be supplied before
    /// [`ConfigBuilder::build`].
    pub fn builder() -> ConfigBuilder {
        ConfigBuilder::default()
    }

    /// Parses the flat key-value config text. Unknown keys, duplicate
    /// keys, malformed lines, and missing keys are all errors.
    pub fn from_key_values(text: &str) -> Result<Self, ConfigError> {
        let mut builder = Self::builder();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |e: ConfigError| ConfigError::AtLine {
                line: idx + 1,
                source: Box::new(e),
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(ConfigError::Syntax(line.to_string())))?;
            builder
                .set(key.trim(), value.trim())
                .map_err(at)?;
        }
        builder.build()
    }
}

impl From<SystemConfig> for ConfigBuilder {
    /// Seeds every slot from an existing config so single fields can
    /// be overridden before rebuilding.
    fn from(config: SystemConfig) -> Self {
        ConfigBuilder {
            x0: Some(config.x0),
            sigma0_sq: Some(config.sigma0_sq),
            sigma_v_sq: Some(config.sigma_v_sq),
            a0: Some(config.a0),
            gamma0: Some(config.gamma0),
            r: Some(config.r),
            n_zeta: Some(config.n_zeta),
            f0: Some(config.f0),
            mu: Some(config.mu),
            n_cycles: Some(config.n_cycles),
        }
    }
}

/// Accumulates config fields one `key = value` pair at a time.
#[derive(Debug, Default, Clone)]
pub struct ConfigBuilder {
    x0: Option<f64>,
    sigma0_sq: Option<f64>,
    sigma_v_sq: Option<f64>,
    a0: Option<f64>,
    gamma0: Option<f64>,
    r: Option<f64>,
    n_zeta: Option<f64>,
    f0: Option<f64>,
    mu: Option<f64>,
    n_cycles: Option<u32>,
}

impl ConfigBuilder {
    /// Stores one field by key. Rejects unknown keys, repeated keys,
    /// and values that fail to parse (n_cycles must be an integer).
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        self.put(key, value, false)
    }

    /// Stores one field by key, silently replacing any earlier value.
    /// Command-line overrides layer on a parsed file through this.
    pub fn replace(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        self.put(key, value, true)
    }

    fn put(&mut self, key: &str, value: &str, allow_replace: bool) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        };
        if key == "n_cycles" {
            let parsed = value.parse::<u32>().map_err(|_| bad())?;
            if self.n_cycles.replace(parsed).is_some() && !allow_replace {
                return Err(ConfigError::DuplicateKey(key.to_string()));
            }
            return Ok(());
        }
        let slot = match key {
            "x0" => &mut self.x0,
            "sigma0_sq" => &mut self.sigma0_sq,
            "sigma_v_sq" => &mut self.sigma_v_sq,
            "a0" => &mut self.a0,
            "gamma0" => &mut self.gamma0,
            "r" => &mut self.r,
            "n_zeta" => &mut self.n_zeta,
            "f0" => &mut self.f0,
            "mu" => &mut self.mu,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        };
        let parsed = value.parse::<f64>().map_err(|_| bad())?;
        if slot.replace(parsed).is_some() && !allow_replace {
            return Err(ConfigError::DuplicateKey(key.to_string()));
        }
        Ok(())
    }

    /// Finishes the build, listing any still-missing keys, and
    /// validates the assembled config.
    pub fn build(&self) -> Result<SystemConfig, ConfigError> {
        let mut missing = Vec::new();
        let mut take = |name: &'static str, v: Option<f64>| {
            if v.is_none() {
                missing.push(name);
            }
            v.unwrap_or_default()
        };
        let config = SystemConfig {
            x0: take("x0", self.x0),
            sigma0_sq: take("sigma0_sq", self.sigma0_sq),
            sigma_v_sq: take("sigma_v_sq", self.sigma_v_sq),
            a0: take("a0", self.a0),
            gamma0: take("gamma0", self.gamma0),
            r: take("r", self.r),
            n_zeta: take("n_zeta", self.n_zeta),
            f0: take("f0", self.f0),
            mu: take("mu", self.mu),
            n_cycles: {
                if self.n_cycles.is_none() {
                    missing.push("n_cycles");
                }
                self.n_cycles.unwrap_or_default()
            },
        };
        if !missing.is_empty() {
            return Err(ConfigError::MissingKeys(missing.join(", ")));
        }
        config.validate()?;
        Ok(config)
    }
}

/// Solves for the saturation factor: the unique `alpha >= 0` with
/// `P(|Z| > alpha) = mu` for standard normal `Z`.
///
/// Bracketing bisection on the two-sided tail probability, run to
/// machine resolution (well inside the 1e-12 contract). No closed-form
/// quantile approximation is involved; the simulation-side
/// [`normal::quantile`] exists separately and the two are only allowed
/// to meet in tests.
pub fn alpha_from_mu(mu: f64) -> Result<f64, ConfigError> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(ConfigError::MuOutOfRange(mu));
    }
    // two_sided_tail(0) = 1 > mu; it decreases monotonically to 0
    let two_sided_tail = |a: f64| 2.0 * normal::cdf(-a);
    let mut hi = 1.0;
    while two_sided_tail(hi) > mu {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if two_sided_tail(mid) > mu {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Computes all secondary quantities from a validated config.
pub fn derive(config: &SystemConfig) -> Result<DerivedParams, ConfigError> {
    config.validate()?;
    let alpha = alpha_from_mu(config.mu)?;
    let a = config.a0 * config.gamma0 / (config.r * std::f64::consts::SQRT_2);
    let sigma_zeta_sq = config.n_zeta * config.f0;
    let w = (a / alpha).powi(2);
    Ok(DerivedParams {
        alpha,
        a,
        sigma_zeta_sq,
        w,
        q_sq: w / sigma_zeta_sq,
        delta_t0: 1.0 / (2.0 * config.f0),
        snr_inp: config.sigma0_sq / config.sigma_v_sq,
    })
}

/// Flags configs outside the regime where the closed-form error-floor
/// approximations hold. Advisory only; never blocks a run.
pub fn validate_regime(config: &SystemConfig, derived: &DerivedParams) -> Vec<RegimeWarning> {
    let _ = config;
    let required = R_MARGIN * (1.0 + derived.q_sq);
    if derived.snr_inp < required {
        vec![RegimeWarning {
            snr_inp: derived.snr_inp,
            required,
        }]
    } else {
        Vec::new()
    }
}
