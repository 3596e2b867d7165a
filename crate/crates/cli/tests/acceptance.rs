//! Release gate. Each test checks one numbered criterion end to end and
//! prints a single `criterion NN [PASS|FAIL]` line with the measured
//! numbers (run with `-- --nocapture` to see the lines for passing
//! criteria too). Tolerances are pinned here and nowhere else.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use fadcap_core::allocation::{self, PaprSpec, PolicyKind, PowerConstraints};
use fadcap_core::capacity::{self, Regime};
use fadcap_core::fading::{FadingDistribution, TabulatedCdf};
use fadcap_core::montecarlo::{self, McConfig};
use fadcap_core::quadrature;
use fadcap_testkit as testkit;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(idx: u32, name: &str, pass: bool, detail: &str) {
    println!("criterion {idx:02} [{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {idx:02} {name}: {detail}");
}

fn fmt_list(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")
}

fn rayleigh() -> FadingDistribution {
    FadingDistribution::Rayleigh
}

fn nakagami_half() -> FadingDistribution {
    FadingDistribution::nakagami(0.5, 1.0).unwrap()
}

fn table_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/gain_table.txt")
}

fn tabulated() -> FadingDistribution {
    FadingDistribution::Tabulated(TabulatedCdf::from_path(table_path()).unwrap())
}

fn constant(a: f64, snr: f64) -> PowerConstraints {
    PowerConstraints::new(snr, PaprSpec::Constant(a)).unwrap()
}

fn unit_uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    10f64.powf(lo.log10() + unit_uniform(rng) * (hi.log10() - lo.log10()))
}

const LAW_GRID: [f64; 5] = [1e-3, 1e-4, 1e-5, 1e-6, 1e-7];

/// Capacity under a fixed PAPR approaches A*snr*E[t; t >= F^-1(1-1/A)];
/// for Rayleigh A = 2 that is snr*(1+ln 2).
#[test]
fn criterion_01_fixed_papr_low_snr_law_convergence() {
    let t0 = Instant::now();
    let d = rayleigh();
    let law = |snr: f64| snr * (1.0 + std::f64::consts::LN_2);
    let devs: Vec<f64> = LAW_GRID
        .iter()
        .map(|&snr| {
            let c = capacity::capacity_capped(&d, &constant(2.0, snr)).unwrap().value;
            (c / law(snr) - 1.0).abs()
        })
        .collect();
    let tail_monotone = devs[2] >= devs[3] && devs[3] >= devs[4];
    let elapsed = t0.elapsed().as_secs_f64();
    let pass = tail_monotone && devs[4] < 0.1 && elapsed < 10.0;
    report(
        1,
        "fixed_papr_low_snr_law_convergence",
        pass,
        &format!("|ratio-1| = [{}], tail monotone = {tail_monotone}, {elapsed:.1}s", fmt_list(&devs)),
    );
}

/// The On-Off rate never exceeds capacity and captures at least 95% of
/// it by snr = 1e-7.
#[test]
fn criterion_02_onoff_rate_near_optimality() {
    let mut worst_over = f64::NEG_INFINITY;
    let mut floors = Vec::new();
    for dist in [rayleigh(), nakagami_half()] {
        let mut last_ratio = f64::NAN;
        for &snr in &LAW_GRID {
            let cons = constant(2.0, snr);
            let capped = capacity::capacity_capped(&dist, &cons).unwrap().value;
            let onoff = capacity::rate_onoff(&dist, &cons).unwrap().value;
            let ratio = onoff / capped;
            worst_over = worst_over.max(ratio);
            last_ratio = ratio;
        }
        floors.push(last_ratio);
    }
    let pass = worst_over <= 1.0 + 1e-9 && floors.iter().all(|&r| r >= 0.95);
    report(
        2,
        "onoff_rate_near_optimality",
        pass,
        &format!("max onoff/capacity = {worst_over:.12}, ratios at 1e-7 = {floors:.6?}"),
    );
}

/// A = 1 pins the policy to constant power: capacity must equal
/// E[ln(1 + snr*t)] computed directly.
#[test]
fn criterion_03_unit_papr_reduces_to_constant_power() {
    let mut worst = 0.0f64;
    for dist in [rayleigh(), nakagami_half(), tabulated()] {
        for snr in [1e-2, 1e-4] {
            let capped = capacity::capacity_capped(&dist, &constant(1.0, snr)).unwrap().value;
            let direct = quadrature::integrate(
                |t| (snr * t).ln_1p() * dist.pdf(t),
                dist.support_lo(),
                f64::INFINITY,
                1e-10,
            )
            .unwrap()
            .value;
            worst = worst.max((capped / direct - 1.0).abs());
        }
    }
    let pass = worst <= 1e-8;
    report(
        3,
        "unit_papr_reduces_to_constant_power",
        pass,
        &format!("max relative gap = {worst:.3e} over 3 gain laws x 2 snrs"),
    );
}

/// Shape of the peak-to-average function x -> 1/E[[1 - x/t]+]: strictly
/// increasing, -> 1 at the origin, and above 1/P(t > x) everywhere.
#[test]
fn criterion_04_papr_function_shape() {
    let d = rayleigh();
    let grid: Vec<f64> =
        (0..50).map(|i| 10f64.powf(-6.0 + 7.0 * i as f64 / 49.0)).collect();
    let values: Vec<f64> = grid.iter().map(|&x| allocation::papr_function(&d, x).unwrap()).collect();
    let increasing = values.windows(2).all(|w| w[0] < w[1]);
    let dominates = grid
        .iter()
        .zip(&values)
        .all(|(&x, &a)| a > 1.0 / d.tail_probability(x));
    let origin = allocation::papr_function(&d, 1e-8).unwrap();
    let origin_ok = (origin - 1.0).abs() <= 1e-6;
    let pass = increasing && dominates && origin_ok;
    report(
        4,
        "papr_function_shape",
        pass,
        &format!(
            "increasing = {increasing}, dominates 1/(1-F) = {dominates}, A(1e-8) = {origin:.9}"
        ),
    );
}

/// The capped multiplier always lands in its a priori bracket
/// [q/(1+A*snr*q), q], q = F^-1(1-1/A), and climbs to q as snr drops.
#[test]
fn criterion_05_capped_multiplier_bracket() {
    let dists = [rayleigh(), nakagami_half(), tabulated()];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut contained = 0u32;
    let mut capped_solves = 0u32;
    let mut total = 0u32;
    for _ in 0..20 {
        let a = log_uniform(&mut rng, 1.1, 50.0);
        let snr = log_uniform(&mut rng, 1e-6, 1e-2);
        for dist in &dists {
            total += 1;
            let policy = allocation::solve_capped(dist, &constant(a, snr)).unwrap();
            if let PolicyKind::CappedWaterFilling { lambda, .. } = policy.kind {
                capped_solves += 1;
                let (lo, hi) = allocation::multiplier_bracket(dist, snr, a);
                if lambda >= lo * (1.0 - 1e-9) && lambda <= hi * (1.0 + 1e-9) {
                    contained += 1;
                }
            }
        }
    }
    // Monotone approach lambda -> q at fixed A as snr decreases.
    let mut approach_ok = true;
    for dist in &dists {
        let q = dist.quantile(0.5);
        let mut prev_gap = f64::INFINITY;
        for &snr in &[1e-2, 1e-3, 1e-4, 1e-5, 1e-6] {
            let policy = allocation::solve_capped(dist, &constant(2.0, snr)).unwrap();
            let PolicyKind::CappedWaterFilling { lambda, .. } = policy.kind else {
                approach_ok = false;
                break;
            };
            let gap = q - lambda;
            approach_ok &= gap > 0.0 && gap < prev_gap;
            prev_gap = gap;
        }
    }
    let pass = contained == capped_solves && capped_solves == total && approach_ok;
    report(
        5,
        "capped_multiplier_bracket",
        pass,
        &format!(
            "{contained}/{capped_solves} in bracket ({total} solves), monotone approach = {approach_ok}"
        ),
    );
}

/// An independent projected-gradient ascent on a 64-cell discretization
/// reproduces the analytic allocation: objectives within 1e-5, powers
/// within 1e-4 where neither box constraint binds.
#[test]
fn criterion_06_projected_gradient_oracle_equivalence() {
    let t0 = Instant::now();
    let dists = [rayleigh(), nakagami_half(), tabulated()];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut max_obj_gap = 0.0f64;
    let mut max_power_gap = 0.0f64;
    let mut max_form_gap = 0.0f64;
    for i in 0..10 {
        let dist = &dists[i % 3];
        let a = log_uniform(&mut rng, 1.1, 50.0);
        let snr = log_uniform(&mut rng, 1e-6, 1e-2);
        let peak = a * snr;
        let gains = testkit::discretize(dist, 64);

        // The shipping policy and the test kit's closed form are the same
        // function of (multiplier, peak); pin that identity so the oracle
        // below exercises the production shape, not a private one. When the
        // cap never binds the solve hands back plain water-filling, whose
        // multiplier plugs into the same form (the clamp is inert there).
        let policy = allocation::solve_capped(dist, &constant(a, snr)).unwrap();
        let lambda_c = match policy.kind {
            PolicyKind::CappedWaterFilling { lambda, .. } => lambda,
            PolicyKind::WaterFilling { lambda0 } => lambda0,
            PolicyKind::OnOff { .. } => unreachable!("A > 1 keeps the adaptive region open"),
        };
        let prod_form = testkit::capped_form_powers(&gains, lambda_c, peak);
        for (&t, &p) in gains.t.iter().zip(prod_form.iter()) {
            max_form_gap = max_form_gap.max((policy.power_at(t) - p).abs() / peak);
        }

        // Analytic solution of the discrete instance: same shape, with the
        // multiplier re-solved against the grid's own power budget.
        let lambda_d = testkit::discrete_capped_multiplier(&gains, snr, peak);
        let reference = testkit::capped_form_powers(&gains, lambda_d, peak);
        let obj_analytic = testkit::discrete_objective(&gains, &reference);

        let pg = testkit::projected_gradient(&gains, snr, peak, 30_000);
        let obj_pg = testkit::discrete_objective(&gains, &pg);
        max_obj_gap = max_obj_gap.max((obj_pg - obj_analytic).abs());

        for (&p, &r) in pg.iter().zip(reference.iter()) {
            if r > 1e-9 && r < peak - 1e-9 {
                max_power_gap = max_power_gap.max((p - r).abs());
            }
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let pass = max_obj_gap <= 1e-5 && max_power_gap <= 1e-4 && max_form_gap <= 1e-12 && elapsed < 30.0;
    report(
        6,
        "projected_gradient_oracle_equivalence",
        pass,
        &format!(
            "max objective gap = {max_obj_gap:.2e}, max interior power gap = {max_power_gap:.2e}, form identity gap = {max_form_gap:.2e}, {elapsed:.1}s"
        ),
    );
}

/// Quadrature and 1e7-sample Monte Carlo agree to 3 standard errors for
/// rate and average power, and sampling is thread-count invariant.
#[test]
fn criterion_07_monte_carlo_cross_check() {
    let t0 = Instant::now();
    let mut max_z = 0.0f64;
    for dist in [rayleigh(), nakagami_half(), tabulated()] {
        for (snr, onoff) in [(1e-2, false), (1e-3, true)] {
            let cons = constant(2.0, snr);
            let policy = if onoff {
                allocation::onoff_policy(&dist, &cons).unwrap()
            } else {
                allocation::solve_capped(&dist, &cons).unwrap()
            };
            let rate_quad = capacity::capacity_of_policy(&dist, &policy).unwrap().value;
            let power_quad = allocation::average_power(&dist, &policy).unwrap();
            let cfg = McConfig::new(10_000_000, 7, 65_536);
            let rate_mc = montecarlo::estimate_rate(&dist, &policy, &cfg);
            let power_mc = montecarlo::estimate_avg_power(&dist, &policy, &cfg);
            max_z = max_z.max(((rate_mc.mean - rate_quad) / rate_mc.std_error).abs());
            max_z = max_z.max(((power_mc.mean - power_quad) / power_mc.std_error).abs());
        }
    }

    // Determinism across thread caps, end to end through the binary.
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_fadcap"))
            .args([
                "verify", "--dist", "rayleigh", "--papr", "const:2", "--snr-db", "-20",
                "--samples", "1000000", "--seed", "42",
            ])
            .env("FADCAP_THREADS", threads)
            .output()
            .expect("spawn fadcap");
        assert!(out.status.success(), "verify under {threads} threads failed");
        out.stdout
    };
    let deterministic = run("1") == run("4");

    let elapsed = t0.elapsed().as_secs_f64();
    let pass = max_z <= 3.0 && deterministic && elapsed < 60.0;
    report(
        7,
        "monte_carlo_cross_check",
        pass,
        &format!("max |z| = {max_z:.2} over 6 configs x 2 checks, thread-invariant = {deterministic}, {elapsed:.1}s"),
    );
}

/// Variable-PAPR classification: the log profile must land in the
/// vanishing-sliver regime with C/(snr*ln A(snr)) -> 1, the near-WF
/// profile in the persistent regime with C/(snr*ln(1/snr)) -> 1, and a
/// constant profile must be routed away.
#[test]
fn criterion_08_variable_papr_regime_classification() {
    let d = rayleigh();
    let grid = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];

    let log_inv: PaprSpec = "log-inv".parse().unwrap();
    let log_report = capacity::classify_regime(&d, log_inv, &grid).unwrap();
    let log_regime_ok = log_report.regime == Regime::L0Zero;
    let log_devs: Vec<f64> =
        log_report.unified_ratios.iter().map(|r| (r.ratio - 1.0).abs()).collect();
    let log_trend_ok = log_devs.windows(2).all(|w| w[0] >= w[1]);
    let log_final = *log_devs.last().unwrap();
    // |C/(snr*ln A) - 1| ~ 1/ln A(snr) = 0.34 at snr = 1e-8; reaching 0.2
    // would need snr below roughly 1e-64. Kept faithful to the pinned
    // tolerance; expected to fail until the bound or grid changes.
    let log_limit_ok = log_final < 0.2;

    let near_wf: PaprSpec = "near-wf:1.5".parse().unwrap();
    let near_report = capacity::classify_regime(&d, near_wf, &grid).unwrap();
    let near_regime_ok = near_report.regime == Regime::L0Positive;
    let near_devs: Vec<f64> =
        near_report.ratio_table.iter().map(|r| (r.ratio - 1.0).abs()).collect();
    let near_trend_ok = near_devs.windows(2).all(|w| w[0] >= w[1]);

    let const_rejected = matches!(
        capacity::classify_regime(&d, PaprSpec::Constant(2.0), &grid),
        Err(capacity::CapacityError::ConstantProfile { .. })
    );

    let pass = log_regime_ok
        && log_trend_ok
        && log_limit_ok
        && near_regime_ok
        && near_trend_ok
        && const_rejected;
    report(
        8,
        "variable_papr_regime_classification",
        pass,
        &format!(
            "log-inv: regime_ok = {log_regime_ok}, trend_ok = {log_trend_ok}, final |ratio-1| = {log_final:.3} (< 0.2 required); \
             near-wf: regime_ok = {near_regime_ok}, trend_ok = {near_trend_ok}; const rejected = {const_rejected}"
        ),
    );
}

/// Energy cost per nat at deep low SNR approaches 1/(1+ln A).
#[test]
fn criterion_09_energy_per_nat_limit() {
    let d = rayleigh();
    let eff = capacity::energy_per_nat(&d, 2.0, 1e-7).unwrap();
    let limit = 1.0 / (1.0 + std::f64::consts::LN_2);
    let dev = (eff.energy_per_nat / limit - 1.0).abs();
    let pass = dev <= 0.1 && (eff.asymptotic_limit / limit - 1.0).abs() <= 1e-12;
    report(
        9,
        "energy_per_nat_limit",
        pass,
        &format!("snr/C = {:.6} vs limit {limit:.6}, deviation = {dev:.2e}", eff.energy_per_nat),
    );
}

/// The adaptive (non-saturated) part of the capped policy contributes
/// o(snr) to capacity: its share must fall monotonically to below 1e-2.
#[test]
fn criterion_10_adaptive_region_contribution_vanishes() {
    let d = rayleigh();
    let mut shares = Vec::new();
    for &snr in &LAW_GRID {
        let policy = allocation::solve_capped(&d, &constant(2.0, snr)).unwrap();
        let PolicyKind::CappedWaterFilling { lambda, alpha, .. } = policy.kind else {
            panic!("cap must be active at snr = {snr}");
        };
        let mid = quadrature::integrate(
            |t| ((t - lambda) / lambda).ln_1p() * d.pdf(t),
            lambda,
            alpha,
            1e-10,
        )
        .unwrap()
        .value;
        shares.push(mid / snr);
    }
    let monotone = shares.windows(2).all(|w| w[0] > w[1]);
    let last = *shares.last().unwrap();
    let pass = monotone && last < 1e-2;
    report(
        10,
        "adaptive_region_contribution_vanishes",
        pass,
        &format!("share of snr = [{}], monotone = {monotone}", fmt_list(&shares)),
    );
}

/// The three reference sweeps regenerate byte-identically and show the
/// documented qualitative behavior.
#[test]
fn criterion_11_sweep_goldens_regenerate() {
    let t0 = Instant::now();
    let golden_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let goldens: [(&str, Vec<String>); 3] = [
        ("sweep_rayleigh_const2.csv", sweep_args("rayleigh", "const:2")),
        ("sweep_nakagami_half_const2.csv", sweep_args("nakagami:m=0.5,omega=1", "const:2")),
        ("sweep_rayleigh_log_inv.csv", sweep_args("rayleigh", "log-inv")),
    ];

    let tmp = tempfile::tempdir().unwrap();
    let mut identical = true;
    let mut texts = Vec::new();
    for (name, args) in &goldens {
        let out_path = tmp.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_fadcap"))
            .args(args)
            .args(["--out", out_path.to_str().unwrap()])
            .status()
            .expect("spawn fadcap");
        assert!(status.success(), "sweep for {name} failed");
        let fresh = std::fs::read(&out_path).unwrap();
        let golden = std::fs::read(golden_dir.join(name))
            .unwrap_or_else(|e| panic!("golden {name} missing: {e}"));
        identical &= fresh == golden;
        texts.push(String::from_utf8(golden).unwrap());
    }

    // Rayleigh const:2: the relative shortfall against unconstrained
    // water-filling widens as SNR falls.
    let rows1 = parse_rows(&texts[0]);
    let gap_widens = rows1
        .windows(2)
        .all(|w| rel_gap(&w[0]) >= rel_gap(&w[1]) * (1.0 - 1e-12));

    // The other two sweeps: On-Off tracks capacity below -35 dB.
    let onoff_close = |text: &str, tol: f64| {
        parse_rows(text)
            .iter()
            .filter(|r| r.snr_db < -35.0)
            .all(|r| (r.capacity_exact - r.rate_onoff) / r.capacity_exact < tol)
    };
    let nakagami_close = onoff_close(&texts[1], 0.05);
    let log_inv_close = onoff_close(&texts[2], 0.10);

    let elapsed = t0.elapsed().as_secs_f64();
    let pass = identical && gap_widens && nakagami_close && log_inv_close && elapsed < 120.0;
    report(
        11,
        "sweep_goldens_regenerate",
        pass,
        &format!(
            "byte-identical = {identical}, wf gap widens = {gap_widens}, onoff within 5%/10% below -35 dB = {nakagami_close}/{log_inv_close}, {elapsed:.1}s"
        ),
    );
}

fn sweep_args(dist: &str, papr: &str) -> Vec<String> {
    [
        "sweep", "--dist", dist, "--papr", papr, "--start-db", "-50", "--stop-db", "0",
        "--points", "51",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

struct SweepRow {
    snr_db: f64,
    capacity_exact: f64,
    rate_onoff: f64,
    capacity_wf: f64,
}

fn parse_rows(text: &str) -> Vec<SweepRow> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|&h| h == name).unwrap();
    let (i_db, i_c, i_on, i_wf) =
        (col("snr_db"), col("capacity_exact"), col("rate_onoff"), col("capacity_wf_unconstrained"));
    lines
        .map(|line| {
            let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            SweepRow {
                snr_db: f[i_db],
                capacity_exact: f[i_c],
                rate_onoff: f[i_on],
                capacity_wf: f[i_wf],
            }
        })
        .collect()
}

fn rel_gap(r: &SweepRow) -> f64 {
    (r.capacity_wf - r.capacity_exact) / r.capacity_exact
}
