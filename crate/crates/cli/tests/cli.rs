//! End-to-end runs of the `fadcap` binary: output contracts, exit codes,
//! config precedence, CSV round trips.

use std::collections::BTreeMap;
use std::io::Write;
use std::process::{Command, Output};

fn fadcap(args: &[&str]) -> Output {
    fadcap_with_env(args, &[])
}

fn fadcap_with_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fadcap"));
    cmd.args(args).env_remove("FADCAP_THREADS");
    for (key, value) in env {
        cmd.env(key, value);
    }
    cmd.output().expect("spawn fadcap")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn keyvals(out: &Output) -> BTreeMap<String, String> {
    stdout(out)
        .lines()
        .filter(|l| !l.starts_with('#') && l.contains('='))
        .map(|l| {
            let (k, v) = l.split_once('=').unwrap();
            (k.to_owned(), v.to_owned())
        })
        .collect()
}

fn get(map: &BTreeMap<String, String>, key: &str) -> f64 {
    map[key].parse().unwrap_or_else(|_| panic!("{key} is not a number: {}", map[key]))
}

#[test]
fn capacity_with_unit_papr_reports_constant_power_limit() {
    let out = fadcap(&["capacity", "--dist", "rayleigh", "--papr", "const:1", "--snr-db", "-20"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let kv = keyvals(&out);
    let snr = get(&kv, "snr");
    // A = 1 pins the policy to constant power; the limit law is C ~ snr.
    assert!((get(&kv, "capacity_asymptotic") - snr).abs() <= 1e-12 * snr);
    assert_eq!(kv["capacity_exact"], kv["rate_onoff"]);
    for key in
        ["snr_db", "snr", "A", "lambda", "capacity_exact", "rate_onoff", "capacity_asymptotic", "energy_per_nat"]
    {
        assert!(kv.contains_key(key), "missing key {key}");
    }
}

#[test]
fn capacity_asymptote_matches_rayleigh_closed_form() {
    let out = fadcap(&["capacity", "--dist", "rayleigh", "--papr", "const:2", "--snr-db", "-40"]);
    assert!(out.status.success());
    let kv = keyvals(&out);
    let expected = 1e-4 * (1.0 + 2.0_f64.ln());
    let got = get(&kv, "capacity_asymptotic");
    assert!((got - expected).abs() <= 1e-10 * expected, "{got} vs {expected}");
}

#[test]
fn reported_rates_keep_policy_ordering() {
    let out = fadcap(&[
        "capacity",
        "--dist",
        "nakagami:m=0.5,omega=1",
        "--papr",
        "const:2",
        "--snr-db",
        "-30",
    ]);
    assert!(out.status.success());
    let kv = keyvals(&out);
    assert!(get(&kv, "rate_onoff") <= get(&kv, "capacity_exact") * (1.0 + 1e-9));
    assert!(get(&kv, "capacity_exact") > 0.0);
}

#[test]
fn onoff_reports_threshold_level_and_feasible_power() {
    let out = fadcap(&["onoff", "--dist", "rayleigh", "--papr", "const:2", "--snr-db", "-30"]);
    assert!(out.status.success());
    let kv = keyvals(&out);
    // Rayleigh median: threshold = ln 2, level = A*snr.
    assert!((get(&kv, "threshold") - 2.0_f64.ln()).abs() < 1e-9);
    assert!((get(&kv, "level") - 2e-3).abs() < 1e-12);
    assert!((get(&kv, "avg_power") - 1e-3).abs() < 1e-9);
    assert!(get(&kv, "rate_onoff") <= get(&kv, "capacity_asymptotic"));
}

#[test]
fn usage_errors_exit_2() {
    let cases: &[&[&str]] = &[
        &["capacity", "--dist", "rayleigh", "--papr", "const:0.5", "--snr-db", "-20"],
        &["capacity", "--dist", "ricean", "--papr", "const:2", "--snr-db", "-20"],
        &["capacity", "--dist", "rayleigh", "--papr", "const:2"],
        &["verify", "--dist", "rayleigh", "--papr", "const:2", "--snr-db", "-20", "--samples", "10"],
        &["sweep", "--dist", "rayleigh", "--papr", "const:2", "--start-db", "-20", "--stop-db", "0", "--points", "1"],
        &["sweep", "--dist", "rayleigh", "--papr", "const:2", "--start-db", "-20", "--stop-db", "0", "--points", "3", "--columns", "snr,bogus"],
        &["regime", "--papr", "const:2"],
        &["regime", "--papr", "log-inv", "--dist", "nakagami:m=1,omega=1"],
        &["regime", "--papr", "log-inv", "--grid", "1e-2,1e-3"],
    ];
    for args in cases {
        let out = fadcap(args);
        assert_eq!(out.status.code(), Some(2), "args {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    // Bad thread cap is a usage error too.
    let out = fadcap_with_env(
        &["capacity", "--dist", "rayleigh", "--papr", "const:2", "--snr-db", "-20"],
        &[("FADCAP_THREADS", "zero")],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_agrees_and_is_deterministic_across_thread_caps() {
    let args =
        ["verify", "--dist", "rayleigh", "--papr", "const:2", "--snr-db", "-20", "--samples", "100000", "--seed", "42"];
    let single = fadcap_with_env(&args, &[("FADCAP_THREADS", "1")]);
    let quad = fadcap_with_env(&args, &[("FADCAP_THREADS", "4")]);
    assert!(single.status.success(), "{}", String::from_utf8_lossy(&single.stderr));
    assert!(quad.status.success());
    assert_eq!(stdout(&single), stdout(&quad));
    assert!(stdout(&single).contains("verdict=agree"));

    // A different seed moves the estimate but stays within tolerance.
    let reseeded = fadcap(&[
        "verify", "--dist", "rayleigh", "--papr", "const:2", "--snr-db", "-20", "--samples",
        "100000", "--seed", "43",
    ]);
    assert!(reseeded.status.success());
    assert_ne!(stdout(&single), stdout(&reseeded));
}

#[test]
fn verify_checks_onoff_policy_and_tabulated_gains() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gains.txt");
    let mut file = std::fs::File::create(&path).unwrap();
    writeln!(file, "# sampled rayleigh cdf").unwrap();
    for i in 0..=80 {
        let t = 0.1 * i as f64;
        writeln!(file, "{t} {}", 1.0 - (-t).exp()).unwrap();
    }
    drop(file);

    let table_spec = format!("table:{}", path.display());
    let out = fadcap(&[
        "verify", "--dist", &table_spec, "--papr", "const:2", "--snr-db", "-15", "--samples",
        "50000", "--seed", "7", "--policy", "onoff",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let kv = keyvals(&out);
    assert!(get(&kv, "rate_z").abs() <= 3.0);
    assert!(get(&kv, "power_z").abs() <= 3.0);
}

#[test]
fn sweep_csv_round_trips_and_keeps_row_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = fadcap(&[
        "sweep", "--dist", "rayleigh", "--papr", "const:2", "--start-db", "-40", "--stop-db",
        "-20", "--points", "5", "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "snr_db");
    assert_eq!(header.len(), 9);

    let mut rows = 0;
    for line in lines {
        let fields: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(fields.len(), header.len());
        let row: BTreeMap<&str, f64> = header.iter().copied().zip(fields.iter().copied()).collect();
        assert!(row["rate_onoff"] <= row["capacity_exact"] + 1e-9);
        assert!(row["capacity_exact"] <= row["capacity_wf_unconstrained"] + 1e-9);
        assert!((row["snr"] - 10f64.powf(row["snr_db"] / 10.0)).abs() <= 1e-15);
        // Bit-exact round trip of the full-precision format.
        for (i, field) in line.split(',').enumerate() {
            assert_eq!(format!("{:.16e}", fields[i]), field);
        }
        rows += 1;
    }
    assert_eq!(rows, 5);

    // Regenerating byte-identically.
    let path2 = dir.path().join("sweep2.csv");
    let again = fadcap(&[
        "sweep", "--dist", "rayleigh", "--papr", "const:2", "--start-db", "-40", "--stop-db",
        "-20", "--points", "5", "--out", path2.to_str().unwrap(),
    ]);
    assert!(again.status.success());
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
}

#[test]
fn sweep_column_subset_is_ordered_as_requested() {
    let out = fadcap(&[
        "sweep", "--dist", "rayleigh", "--papr", "const:2", "--start-db", "-30", "--stop-db",
        "-20", "--points", "2", "--columns", "capacity_exact,snr_db",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "capacity_exact,snr_db");
    let data = text.lines().filter(|l| !l.starts_with('#')).nth(1).unwrap();
    assert_eq!(data.split(',').count(), 2);
}

#[test]
fn config_file_fills_gaps_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, "dist = rayleigh\npapr = const:2\nsnr-db = -20\n").unwrap();

    let from_file = fadcap(&["capacity", "--config", path.to_str().unwrap()]);
    assert!(from_file.status.success(), "{}", String::from_utf8_lossy(&from_file.stderr));
    let kv = keyvals(&from_file);
    assert_eq!(get(&kv, "snr_db"), -20.0);

    let overridden =
        fadcap(&["capacity", "--config", path.to_str().unwrap(), "--snr-db", "-30"]);
    assert!(overridden.status.success());
    let kv = keyvals(&overridden);
    assert_eq!(get(&kv, "snr_db"), -30.0);

    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "snr = oops\n").unwrap();
    let rejected = fadcap(&["capacity", "--config", bad.to_str().unwrap()]);
    assert_eq!(rejected.status.code(), Some(2));
}

#[test]
fn regime_classifies_the_log_profile_as_vanishing_sliver() {
    let out = fadcap(&["regime", "--papr", "log-inv", "--grid", "1e-2,1e-3,1e-4,1e-5,1e-6"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("regime=L0_ZERO"), "{text}");
    assert!(text.contains("screen_peak_to_zero=pass"));
    // Ratio table parses as CSV and the unified ratios are finite.
    let header = "snr,l,capacity_exact,predicted,ratio,unified_predicted,unified_ratio";
    let mut saw = 0;
    let mut in_table = false;
    for line in text.lines() {
        if line == header {
            in_table = true;
            continue;
        }
        if in_table {
            let fields: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            assert_eq!(fields.len(), 7);
            assert!(fields[6].is_finite() && fields[6] > 0.0);
            saw += 1;
        }
    }
    assert_eq!(saw, 5);
}
