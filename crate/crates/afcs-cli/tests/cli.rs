//! End-to-end command tests: exit codes, CSV contents, manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Output;

use sha2::{Digest, Sha256};

fn afcs(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_afcs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

/// Unit-parameter config: q_sq = 1 because a0 = alpha * sqrt(2).
fn write_unit_config(dir: &Path) -> PathBuf {
    let path = dir.join("unit.cfg");
    fs::write(
        &path,
        "x0 = 0.0\nsigma0_sq = 1.0\nsigma_v_sq = 0.0\na0 = 0\ngamma0 = 1.0\n\
         r = 1.0\nn_zeta = 1.0\nf0 = 1.0\nmu = 0.0455002638963584\nn_cycles = 3\n"
            .replace("a0 = 0", &format!("a0 = {:?}", 2.0f64 * std::f64::consts::SQRT_2)),
    )
    .unwrap();
    path
}

fn csv_lines(path: &Path) -> (Vec<String>, Vec<String>) {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let (mut meta, mut data) = (Vec::new(), Vec::new());
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# ") {
            meta.push(rest.to_string());
        } else {
            data.push(line.to_string());
        }
    }
    (meta, data)
}

fn column(data: &[String], index: usize) -> Vec<String> {
    data.iter()
        .skip(1)
        .map(|row| row.split(',').nth(index).unwrap().to_string())
        .collect()
}

fn meta_value<'a>(meta: &'a [String], key: &str) -> &'a str {
    meta.iter()
        .find_map(|line| line.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("metadata key {key} missing"))
}

#[test]
fn theory_emits_halving_column_and_db_identity() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_unit_config(dir.path());
    let out = afcs(&["theory", "--config", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("n_star"));

    let (meta, data) = csv_lines(&dir.path().join("theory.csv"));
    let p_exact: Vec<f64> = column(&data, 3).iter().map(|v| v.parse().unwrap()).collect();
    assert_eq!(p_exact, vec![1.0, 0.5, 0.25, 0.125]);

    let q_sq: f64 = meta_value(&meta, "q_sq").parse().unwrap();
    let q_sq_db = 10.0 * q_sq.log10();
    for row in data.iter().skip(2) {
        let fields: Vec<&str> = row.split(',').collect();
        let r_db: f64 = fields[7].parse().unwrap();
        let ebit_db: f64 = fields[8].parse().unwrap();
        assert!(
            (r_db + ebit_db - q_sq_db).abs() <= 1e-9,
            "row {row}: dB identity off"
        );
    }

    // noiseless feedback puts the threshold at infinity
    assert!(meta_value(&meta, "n_star").parse::<f64>().unwrap().is_infinite());

    // the digest in the metadata matches the manifest bytes on disk
    let manifest = fs::read(dir.path().join(meta_value(&meta, "manifest"))).unwrap();
    let digest = format!("{:x}", Sha256::digest(&manifest));
    assert_eq!(meta_value(&meta, "manifest_sha256"), digest);
    let parsed: serde_json::Value = serde_json::from_slice(&manifest).unwrap();
    assert_eq!(parsed["normal_variate_method"], "inverse-cdf");
    assert_eq!(parsed["config"]["n_cycles"], 3);
    assert_eq!(parsed["derived"]["snr_inp"], "inf");
}

#[test]
fn cycles_flag_overrides_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_unit_config(dir.path());
    let out = afcs(&[
        "theory",
        "--config",
        config.to_str().unwrap(),
        "--cycles",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let (_, data) = csv_lines(&dir.path().join("theory.csv"));
    assert_eq!(data.len(), 1 + 6, "header plus k = 0..=5");
}

#[test]
fn config_and_flag_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_unit_config(dir.path());
    let cfg = config.to_str().unwrap();
    let out_dir = dir.path().to_str().unwrap();

    let missing = afcs(&["theory", "--set", "mu=0.01", "--out", out_dir]);
    assert_eq!(code(&missing), 2);

    let unknown = afcs(&["theory", "--config", cfg, "--set", "bandwidth=2", "--out", out_dir]);
    assert_eq!(code(&unknown), 2);

    let malformed = afcs(&["theory", "--config", cfg, "--set", "mu:0.5", "--out", out_dir]);
    assert_eq!(code(&malformed), 2);

    let domain = afcs(&["theory", "--config", cfg, "--set", "mu=1.5", "--out", out_dir]);
    assert_eq!(code(&domain), 2);

    let grid = afcs(&["sweep", "--config", cfg, "--grid-db", "5:1:1", "--out", out_dir]);
    assert_eq!(code(&grid), 2);

    let trials = afcs(&["simulate", "--config", cfg, "--trials", "0", "--out", out_dir]);
    assert_eq!(code(&trials), 2);
}

#[test]
fn unwritable_output_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_unit_config(dir.path());
    let blocker = dir.path().join("blocked");
    fs::write(&blocker, b"a file, not a directory").unwrap();
    let out = afcs(&[
        "theory",
        "--config",
        config.to_str().unwrap(),
        "--out",
        blocker.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 4, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn noiseless_simulation_estimates_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_unit_config(dir.path());
    // ideal feedback, a huge forward SNR, and a vanishing saturation
    // budget: every trial's squared error collapses below 1e-20
    let out = afcs(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--set",
        "sigma0_sq=1e-18",
        "--set",
        "a0=100",
        "--set",
        "mu=1e-12",
        "--cycles",
        "4",
        "--trials",
        "200",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("result: PASS"));
    let (meta, data) = csv_lines(&dir.path().join("run.csv"));
    assert_eq!(meta_value(&meta, "self_check"), "PASS");
    for p_hat in column(&data, 2) {
        assert!(p_hat.parse::<f64>().unwrap() <= 1e-20, "p_hat {p_hat}");
    }
    for sat in column(&data, 3) {
        assert_eq!(sat.parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn failed_self_check_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_unit_config(dir.path());
    // q_sq = 3 and a 1% saturation budget over 20 cycles: clipped
    // trials hold the late-cycle error far above the prediction
    let out = afcs(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--set",
        "sigma_v_sq=1e-4",
        "--set",
        "a0=6.309467458203367",
        "--set",
        "mu=0.01",
        "--cycles",
        "20",
        "--trials",
        "2000",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
    assert!(stdout(&out).contains("result: FAIL"));
    let (meta, _) = csv_lines(&dir.path().join("run.csv"));
    assert_eq!(meta_value(&meta, "self_check"), "FAIL");
}

#[test]
fn sweep_covers_the_grid_and_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_unit_config(dir.path());
    let cfg = config.to_str().unwrap();
    let args = |out: &str| {
        [
            "sweep", "--config", cfg, "--grid-db", "0:6:3", "--n-set", "1,2", "--trials", "300",
            "--seed", "11", "--out", out,
        ]
        .map(String::from)
    };
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let run_a = afcs(&args(out_a.to_str().unwrap()).iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&run_a), 0, "stderr: {}", String::from_utf8_lossy(&run_a.stderr));
    let run_b = afcs(&args(out_b.to_str().unwrap()).iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&run_b), 0);

    for name in ["fig2.csv", "fig3.csv"] {
        let (meta_a, data_a) = csv_lines(&out_a.join(name));
        let (_, data_b) = csv_lines(&out_b.join(name));
        assert_eq!(data_a.len(), 1 + 3, "header plus one row per grid point");
        assert_eq!(data_a, data_b, "{name} rows differ between identical runs");
        assert!(meta_a.iter().any(|l| l.starts_with("columns:")));
    }
    let (_, data2) = csv_lines(&out_a.join("fig2.csv"));
    assert_eq!(
        data2[0],
        "q_sq_db,ebit_theory_n1,ebit_hat_n1,ebit_theory_n2,ebit_hat_n2"
    );
    let (_, data3) = csv_lines(&out_a.join("fig3.csv"));
    assert_eq!(
        data3[0],
        "q_sq_db,r_over_f0_theory_n1,r_over_f0_hat_n1,r_over_f0_theory_n2,r_over_f0_hat_n2"
    );
    // dB axis reproduces the requested grid (up to the round trip
    // through the linear SNR)
    let db: Vec<f64> = column(&data2, 0).iter().map(|v| v.parse().unwrap()).collect();
    for (got, want) in db.iter().zip([0.0, 3.0, 6.0]) {
        assert!((got - want).abs() <= 1e-9, "dB axis {db:?}");
    }
}
