//! Command-line front end: closed-form reports, Monte Carlo runs, and
//! efficiency sweeps, all emitted as full-precision CSV next to a JSON
//! manifest that pins the exact configuration and seed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use afcs::montecarlo::{run_trials, sweep_efficiency, SweepError};
use afcs::params::{
    derive, validate_regime, ConfigBuilder, ConfigError, DerivedParams, SystemConfig,
};
use afcs::theory::{build_profile, power_efficiency, TheoryError};
use clap::{Args, Parser, Subcommand};
use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

/// Default master seed; fixed so that bare invocations reproduce.
const DEFAULT_SEED: u64 = 17;

#[derive(Parser)]
#[command(name = "afcs", version, about = "Adaptive feedback link analysis and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form schedules, error predictions, and efficiency table
    Theory(TheoryArgs),
    /// Monte Carlo run cross-checked against the closed-form errors
    Simulate(SimulateArgs),
    /// Rate and energy-per-bit curves over a grid of channel SNRs
    Sweep(SweepArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Key-value config file; all ten keys must be present
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override or supply one field, e.g. --set mu=0.02 (repeatable)
    #[arg(long, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Shorthand for --set n_cycles=N, applied last
    #[arg(long, value_name = "N")]
    cycles: Option<u32>,

    /// Directory receiving the CSV and manifest files
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct TheoryArgs {
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,

    /// Number of Monte Carlo trials
    #[arg(long, default_value_t = 5000)]
    trials: u64,

    /// Master seed for the per-trial random streams
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,

    /// Trials per grid point
    #[arg(long, default_value_t = 5000)]
    trials: u64,

    /// Master seed; each grid point derives its own stream from it
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Output-SNR grid in dB as lo:hi:step
    #[arg(long = "grid-db", value_name = "LO:HI:STEP", default_value = "-5:25:1")]
    grid_db: String,

    /// Cycle counts to draw one curve for each
    #[arg(long = "n-set", value_name = "LIST", value_delimiter = ',', default_value = "1,10,20")]
    n_set: Vec<u32>,
}

#[derive(Debug)]
enum CliError {
    Config(ConfigError),
    Flag(String),
    Theory(TheoryError),
    Sweep(SweepError),
    Io(PathBuf, std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config: {e}"),
            CliError::Flag(msg) => write!(f, "flag: {msg}"),
            CliError::Theory(e) => write!(f, "domain: {e}"),
            CliError::Sweep(e) => write!(f, "sweep: {e}"),
            CliError::Io(path, e) => write!(f, "io: {}: {e}", path.display()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl CliError {
    /// 2 for configuration and domain problems, 4 for I/O.
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Io(..) => ExitCode::from(4),
            _ => ExitCode::from(2),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Theory(args) => cmd_theory(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Sweep(args) => cmd_sweep(&args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

/// Builds the config from the file (if any) plus --set overrides, in
/// that order; --cycles wins over everything.
fn load_config(args: &ConfigArgs) -> Result<SystemConfig, CliError> {
    let mut builder = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Flag(format!("cannot read {}: {e}", path.display())))?;
            ConfigBuilder::from(SystemConfig::from_key_values(&text)?)
        }
        None => SystemConfig::builder(),
    };
    for pair in &args.set {
        let (key, value) = pair.split_once('=').ok_or_else(|| {
            CliError::Flag(format!("--set expects KEY=VALUE, got '{pair}'"))
        })?;
        builder.replace(key.trim(), value.trim())?;
    }
    if let Some(n) = args.cycles {
        builder.replace("n_cycles", &n.to_string())?;
    }
    builder.build().map_err(CliError::Config)
}

fn print_regime_warnings(config: &SystemConfig, derived: &DerivedParams) {
    for warning in validate_regime(config, derived) {
        eprintln!("warning: {warning}");
    }
}

/// Full-precision decimal: 17 significant digits survive a round trip.
fn full(v: f64) -> String {
    format!("{v:.16e}")
}

fn serialize_maybe_infinite<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("inf")
    }
}

#[derive(Serialize)]
struct ManifestConfig {
    x0: f64,
    sigma0_sq: f64,
    sigma_v_sq: f64,
    a0: f64,
    gamma0: f64,
    r: f64,
    n_zeta: f64,
    f0: f64,
    mu: f64,
    n_cycles: u32,
}

#[derive(Serialize)]
struct ManifestDerived {
    alpha: f64,
    a: f64,
    sigma_zeta_sq: f64,
    w: f64,
    q_sq: f64,
    delta_t0: f64,
    #[serde(serialize_with = "serialize_maybe_infinite")]
    snr_inp: f64,
}

/// One manifest per invocation; every CSV names it and carries its
/// digest so outputs cannot be mixed across runs.
#[derive(Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    created_utc: String,
    unix_time_s: u64,
    normal_variate_method: &'static str,
    master_seed: Option<u64>,
    trials: Option<u64>,
    config: ManifestConfig,
    derived: ManifestDerived,
}

impl RunManifest {
    fn new(
        command: &'static str,
        config: &SystemConfig,
        derived: &DerivedParams,
        master_seed: Option<u64>,
        trials: Option<u64>,
    ) -> Self {
        let now = OffsetDateTime::now_utc();
        RunManifest {
            tool: "afcs",
            version: env!("CARGO_PKG_VERSION"),
            command,
            created_utc: now.format(&Rfc3339).unwrap_or_else(|_| now.to_string()),
            unix_time_s: now.unix_timestamp().max(0) as u64,
            normal_variate_method: "inverse-cdf",
            master_seed,
            trials,
            config: ManifestConfig {
                x0: config.x0,
                sigma0_sq: config.sigma0_sq,
                sigma_v_sq: config.sigma_v_sq,
                a0: config.a0,
                gamma0: config.gamma0,
                r: config.r,
                n_zeta: config.n_zeta,
                f0: config.f0,
                mu: config.mu,
                n_cycles: config.n_cycles,
            },
            derived: ManifestDerived {
                alpha: derived.alpha,
                a: derived.a,
                sigma_zeta_sq: derived.sigma_zeta_sq,
                w: derived.w,
                q_sq: derived.q_sq,
                delta_t0: derived.delta_t0,
                snr_inp: derived.snr_inp,
            },
        }
    }

    /// Writes the manifest JSON and returns (file name, hex digest).
    fn write(&self, out_dir: &Path, name: &str) -> Result<(String, String), CliError> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("manifest serializes");
        bytes.push(b'\n');
        let digest = hex_digest(&bytes);
        let path = out_dir.join(name);
        fs::write(&path, &bytes).map_err(|e| CliError::Io(path, e))?;
        Ok((name.to_string(), digest))
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(64);
    for byte in digest {
        let _ = write!(hex, "{byte:02x}");
    }
    hex
}

/// Assembles one CSV file: '#' metadata lines (always including the
/// manifest reference), then a header record, then data records.
fn write_csv(
    out_dir: &Path,
    name: &str,
    metadata: &[String],
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), CliError> {
    let mut buf = Vec::new();
    for line in metadata {
        buf.extend_from_slice(format!("# {line}\n").as_bytes());
    }
    {
        let mut writer = csv::Writer::from_writer(&mut buf);
        writer.write_record(header).expect("csv record");
        for row in rows {
            writer.write_record(row).expect("csv record");
        }
        writer.flush().expect("csv flush");
    }
    let path = out_dir.join(name);
    fs::write(&path, &buf).map_err(|e| CliError::Io(path, e))
}

fn manifest_metadata(file: &str, digest: &str) -> Vec<String> {
    vec![
        format!("manifest = {file}"),
        format!("manifest_sha256 = {digest}"),
    ]
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))
}

fn cmd_theory(args: &TheoryArgs) -> Result<ExitCode, CliError> {
    let config = load_config(&args.config)?;
    let derived = derive(&config)?;
    print_regime_warnings(&config, &derived);
    let profile = build_profile(&derived, &config);
    let out_dir = &args.config.out;
    ensure_out_dir(out_dir)?;

    let manifest = RunManifest::new("theory", &config, &derived, None, None);
    let (mfile, mdigest) = manifest.write(out_dir, "theory_manifest.json")?;

    let q_sq_db = 10.0 * derived.q_sq.log10();
    let mut metadata = manifest_metadata(&mfile, &mdigest);
    metadata.push(format!("n_star = {}", full(profile.n_star)));
    metadata.push(format!("c_forward_bit_per_s = {}", full(profile.c_forward)));
    metadata.push(format!("q_sq = {}", full(derived.q_sq)));
    metadata.push(format!("q_sq_db = {}", full(q_sq_db)));
    metadata.push(
        "columns: cycle k; modulation gain m_hat[k] (enters cycle k+1); receiver gain l[k]; \
         exact mean-square error p[k]; closed-form approximation; rate and energy-per-bit \
         after n = k cycles, linear and dB"
            .to_string(),
    );

    let n = config.n_cycles as usize;
    let mut rows = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let m_hat = if k < n { full(profile.m_hat[k]) } else { String::new() };
        let l = if k >= 1 { full(profile.l[k - 1]) } else { String::new() };
        let p_approx = full(afcs::theory::mmse_approx(k as u32, &derived, &config));
        let (r_bar, ebit, r_db, ebit_db) = if k >= 1 {
            let r_bar = afcs::theory::afcs_capacity_bound(k as u32, &derived, &config);
            match power_efficiency(k as u32, &derived, &config) {
                Ok(ebit) if r_bar > 0.0 => (
                    full(r_bar),
                    full(ebit),
                    full(10.0 * (r_bar / config.f0).log10()),
                    full(10.0 * ebit.log10()),
                ),
                Ok(ebit) => (full(r_bar), full(ebit), String::new(), String::new()),
                Err(_) => (full(r_bar), String::new(), String::new(), String::new()),
            }
        } else {
            Default::default()
        };
        rows.push(vec![
            k.to_string(),
            m_hat,
            l,
            full(profile.p[k]),
            p_approx,
            r_bar,
            ebit,
            r_db,
            ebit_db,
        ]);
    }
    write_csv(
        out_dir,
        "theory.csv",
        &metadata,
        &[
            "k",
            "m_hat",
            "l",
            "p_exact",
            "p_approx",
            "r_bar",
            "ebit_over_n",
            "r_over_f0_db",
            "ebit_db",
        ],
        &rows,
    )?;

    println!("n_star = {}", full(profile.n_star));
    println!("c_forward = {} bit/s", full(profile.c_forward));
    println!("q_sq = {} ({} dB)", full(derived.q_sq), full(q_sq_db));
    println!("p[{}] = {}", n, full(profile.p[n]));
    println!("wrote theory.csv ({} rows) and {}", n + 1, mfile);
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<ExitCode, CliError> {
    if args.trials == 0 {
        return Err(CliError::Flag("--trials must be at least 1".to_string()));
    }
    let config = load_config(&args.config)?;
    let derived = derive(&config)?;
    print_regime_warnings(&config, &derived);
    let profile = build_profile(&derived, &config);
    let out_dir = &args.config.out;
    ensure_out_dir(out_dir)?;

    let stats = run_trials(&config, &derived, &profile, args.trials, args.seed);

    let manifest = RunManifest::new(
        "simulate",
        &config,
        &derived,
        Some(args.seed),
        Some(args.trials),
    );
    let (mfile, mdigest) = manifest.write(out_dir, "run_manifest.json")?;

    // agreement band: three sigma of the squared-sample mean plus the
    // documented clipping excess proportional to the saturation budget
    let tolerance = 3.0 * (2.0 / args.trials as f64).sqrt() + 5.0 * config.mu;
    let mut worst = (0.0f64, 0usize);
    for k in 1..=config.n_cycles as usize {
        let (p, p_hat) = (profile.p[k], stats.p_hat[k - 1]);
        let deviation = if p_hat == p { 0.0 } else { (p_hat - p).abs() / p };
        if deviation > worst.0 || k == 1 {
            worst = (deviation, k);
        }
    }
    let pass = worst.0 <= tolerance;

    let mut metadata = manifest_metadata(&mfile, &mdigest);
    metadata.push(format!("trials = {}", args.trials));
    metadata.push(format!("master_seed = {}", args.seed));
    metadata.push(format!("oracle_tolerance = {}", full(tolerance)));
    metadata.push(format!("self_check = {}", if pass { "PASS" } else { "FAIL" }));
    metadata.push(
        "columns: cycle k; closed-form mean-square error; empirical mean-square error; \
         saturation rate; empirical rate; empirical energy per bit"
            .to_string(),
    );

    let mut rows = Vec::with_capacity(config.n_cycles as usize);
    for k in 1..=config.n_cycles as usize {
        rows.push(vec![
            k.to_string(),
            full(profile.p[k]),
            full(stats.p_hat[k - 1]),
            full(stats.sat_rate[k - 1]),
            full(stats.r_hat[k - 1]),
            full(stats.ebit_hat[k - 1]),
        ]);
    }
    write_csv(
        out_dir,
        "run.csv",
        &metadata,
        &["k", "p_theory", "p_hat", "sat_rate", "r_hat", "ebit_hat"],
        &rows,
    )?;

    println!(
        "self-check: |p_hat - p_theory| / p_theory <= {} for every cycle",
        full(tolerance)
    );
    println!(
        "max relative deviation {} at cycle {}",
        full(worst.0),
        worst.1
    );
    println!("result: {}", if pass { "PASS" } else { "FAIL" });
    println!("wrote run.csv ({} rows) and {}", config.n_cycles, mfile);
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

/// Parses "lo:hi:step" (dB) into the inclusive grid it spans.
fn parse_grid_db(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = |msg: &str| CliError::Flag(format!("--grid-db '{spec}': {msg}"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad("expected LO:HI:STEP"));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad("parts must be decimal numbers"))?;
    let (lo, hi, step) = (nums[0], nums[1], nums[2]);
    if !step.is_finite() || step <= 0.0 || !lo.is_finite() || !hi.is_finite() || hi < lo {
        return Err(bad("need finite lo <= hi and step > 0"));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| lo + i as f64 * step).collect())
}

fn cmd_sweep(args: &SweepArgs) -> Result<ExitCode, CliError> {
    if args.trials == 0 {
        return Err(CliError::Flag("--trials must be at least 1".to_string()));
    }
    let template = load_config(&args.config)?;
    let derived = derive(&template)?;
    print_regime_warnings(&template, &derived);
    let out_dir = &args.config.out;
    ensure_out_dir(out_dir)?;

    let grid_db = parse_grid_db(&args.grid_db)?;
    let grid: Vec<f64> = grid_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
    let result = sweep_efficiency(&template, &grid, &args.n_set, args.trials, args.seed)
        .map_err(|e| match e {
            SweepError::Config(inner) => CliError::Config(inner),
            SweepError::Theory(inner) => CliError::Theory(inner),
            other => CliError::Sweep(other),
        })?;

    let manifest = RunManifest::new(
        "sweep",
        &template,
        &derived,
        Some(args.seed),
        Some(args.trials),
    );
    let (mfile, mdigest) = manifest.write(out_dir, "sweep_manifest.json")?;

    let n_list = args
        .n_set
        .iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let base_metadata = |what: &str| {
        let mut md = manifest_metadata(&mfile, &mdigest);
        md.push(format!("trials_per_point = {}", args.trials));
        md.push(format!("master_seed = {}", args.seed));
        md.push(format!("grid_db = {}", args.grid_db));
        md.push(format!("n_set = {n_list}"));
        md.push(what.to_string());
        md
    };

    // energy per delivered bit against output SNR, one theoretical and
    // one empirical column per cycle count
    let mut header2: Vec<String> = vec!["q_sq_db".to_string()];
    let mut header3: Vec<String> = vec!["q_sq_db".to_string()];
    for curve in &result.curves {
        header2.push(format!("ebit_theory_n{}", curve.n));
        header2.push(format!("ebit_hat_n{}", curve.n));
        header3.push(format!("r_over_f0_theory_n{}", curve.n));
        header3.push(format!("r_over_f0_hat_n{}", curve.n));
    }
    let mut rows2 = Vec::with_capacity(grid.len());
    let mut rows3 = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let mut row2 = vec![full(result.q_sq_db[i])];
        let mut row3 = vec![full(result.q_sq_db[i])];
        for curve in &result.curves {
            row2.push(full(curve.ebit_theory[i]));
            row2.push(full(curve.ebit_hat[i]));
            row3.push(full(curve.r_theory[i] / template.f0));
            row3.push(full(curve.r_hat[i] / template.f0));
        }
        rows2.push(row2);
        rows3.push(row3);
    }
    let header2: Vec<&str> = header2.iter().map(String::as_str).collect();
    let header3: Vec<&str> = header3.iter().map(String::as_str).collect();
    write_csv(
        out_dir,
        "fig2.csv",
        &base_metadata("columns: output SNR in dB, then per cycle count the theoretical and empirical energy per bit"),
        &header2,
        &rows2,
    )?;
    write_csv(
        out_dir,
        "fig3.csv",
        &base_metadata("columns: output SNR in dB, then per cycle count the theoretical and empirical rate over bandwidth"),
        &header3,
        &rows3,
    )?;

    println!(
        "swept {} grid points ({} dB), n in {{{}}}, {} trials each",
        grid.len(),
        args.grid_db,
        n_list,
        args.trials
    );
    println!("wrote fig2.csv, fig3.csv and {mfile}");
    Ok(ExitCode::SUCCESS)
}
