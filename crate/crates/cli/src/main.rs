//! `fadcap`: ergodic capacity of flat-fading channels under joint peak
//! and average power constraints, from the command line.

mod config;
mod error;
mod spec;
mod sweep;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fadcap_core::allocation::{self, PaprSpec, PolicyKind, PowerConstraints};
use fadcap_core::capacity::{self, Regime};
use fadcap_core::fading::FadingDistribution;
use fadcap_core::montecarlo::{self, McConfig};

use config::FileConfig;
use error::CliError;
use sweep::fmt_full;

const MIN_SAMPLES: u64 = 1_000;
const DEFAULT_SAMPLES: u64 = 1_000_000;
const DEFAULT_SEED: u64 = 42;
const DEFAULT_CHUNK: u64 = 65_536;
const DEFAULT_REGIME_GRID: &str = "1e-2,1e-3,1e-4,1e-5,1e-6,1e-7,1e-8";

#[derive(Parser)]
#[command(
    name = "fadcap",
    version,
    about = "Capacity of flat-fading channels under peak and average power constraints"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one operating point and report it as key=value lines.
    Capacity(PointArgs),
    /// Sweep an SNR range and emit CSV (gnuplot-ready).
    Sweep(SweepArgs),
    /// Evaluate the On-Off policy at one operating point.
    Onoff(PointArgs),
    /// Cross-check quadrature against seeded Monte Carlo.
    Verify(VerifyArgs),
    /// Classify the low-SNR regime of a variable PAPR profile.
    Regime(RegimeArgs),
}

#[derive(Args)]
struct PointArgs {
    /// rayleigh | nakagami:m=<m>,omega=<omega> | table:<path>
    #[arg(long)]
    dist: Option<String>,
    /// const:<A> | log-inv | power-law:<a>,<b> | near-wf:<c>
    #[arg(long)]
    papr: Option<String>,
    /// Average SNR in dB (10*log10(snr)).
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<f64>,
    /// Optional `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// rayleigh | nakagami:m=<m>,omega=<omega> | table:<path>
    #[arg(long)]
    dist: Option<String>,
    /// const:<A> | log-inv | power-law:<a>,<b> | near-wf:<c>
    #[arg(long)]
    papr: Option<String>,
    /// First grid point in dB.
    #[arg(long, allow_hyphen_values = true)]
    start_db: Option<f64>,
    /// Last grid point in dB (descending sweeps are fine).
    #[arg(long, allow_hyphen_values = true)]
    stop_db: Option<f64>,
    /// Grid size, at least 2; linear in dB.
    #[arg(long)]
    points: Option<usize>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of the report columns, in output order.
    #[arg(long)]
    columns: Option<String>,
    /// Optional `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// rayleigh | nakagami:m=<m>,omega=<omega> | table:<path>
    #[arg(long)]
    dist: Option<String>,
    /// const:<A> | log-inv | power-law:<a>,<b> | near-wf:<c>
    #[arg(long)]
    papr: Option<String>,
    /// Average SNR in dB (10*log10(snr)).
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<f64>,
    /// Monte-Carlo sample count (minimum 1000).
    #[arg(long)]
    samples: Option<u64>,
    /// RNG seed; same seed and thread cap give identical output.
    #[arg(long)]
    seed: Option<u64>,
    /// Samples per independent RNG stream.
    #[arg(long)]
    chunk: Option<u64>,
    /// Policy to check: capped (default) or onoff.
    #[arg(long)]
    policy: Option<String>,
    /// Optional `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RegimeArgs {
    /// Must be rayleigh (the classifier's scope).
    #[arg(long)]
    dist: Option<String>,
    /// Variable profile: log-inv | power-law:<a>,<b> | near-wf:<c>
    #[arg(long)]
    papr: Option<String>,
    /// Comma-separated SNR grid, strictly decreasing, span >= 1e4.
    #[arg(long)]
    grid: Option<String>,
    /// Ratio-table CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match apply_thread_cap().and_then(|()| run(cli)) {
        Ok(()) | Err(CliError::ClosedPipe) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("fadcap: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

/// FADCAP_THREADS caps the global worker pool for sweeps and sampling.
fn apply_thread_cap() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("FADCAP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Usage(format!("FADCAP_THREADS must be a positive integer, got {raw:?}")))?;
    // Ignore "already initialized": tests may build the pool first.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Capacity(args) => cmd_capacity(args),
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::Onoff(args) => cmd_onoff(args),
        Cmd::Verify(args) => cmd_verify(args),
        Cmd::Regime(args) => cmd_regime(args),
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<FileConfig, CliError> {
    path.map(|p| FileConfig::load(p)).unwrap_or_else(|| Ok(FileConfig::default()))
}

fn parse_papr(s: &str) -> Result<PaprSpec, CliError> {
    s.parse::<PaprSpec>().map_err(|e| CliError::Usage(e.to_string()))
}

/// The (dist, papr, snr_db) triple shared by the point-wise subcommands.
fn resolve_point(
    dist: Option<String>,
    papr: Option<String>,
    snr_db: Option<f64>,
    cfg: &FileConfig,
) -> Result<(FadingDistribution, PaprSpec, f64), CliError> {
    let dist_spec = config::require(dist, cfg, "dist", |s| Ok(s.to_owned()))?;
    let papr_spec = config::require(papr, cfg, "papr", |s| Ok(s.to_owned()))?;
    let snr_db = config::require(snr_db, cfg, "snr_db", |s| config::parse_f64("snr_db")(s))?;
    Ok((spec::parse_dist(&dist_spec)?, parse_papr(&papr_spec)?, snr_db))
}

fn cmd_capacity(args: PointArgs) -> Result<(), CliError> {
    let cfg = load_config(args.config.as_ref())?;
    let (dist, papr, snr_db) = resolve_point(args.dist, args.papr, args.snr_db, &cfg)?;
    let row = sweep::compute_row(&dist, papr, snr_db)?;
    let mut out = std::io::stdout().lock();
    for (key, value) in [
        ("snr_db", row.snr_db),
        ("snr", row.snr),
        ("A", row.papr),
        ("lambda", row.lambda),
        ("capacity_exact", row.capacity_exact),
        ("rate_onoff", row.rate_onoff),
        ("capacity_asymptotic", row.capacity_asymptotic),
        ("energy_per_nat", row.energy_per_nat),
    ] {
        writeln!(out, "{key}={}", fmt_full(value))?;
    }
    Ok(())
}

fn cmd_onoff(args: PointArgs) -> Result<(), CliError> {
    let cfg = load_config(args.config.as_ref())?;
    let (dist, papr, snr_db) = resolve_point(args.dist, args.papr, args.snr_db, &cfg)?;
    let snr = sweep::snr_of_db(snr_db);
    let constraints = PowerConstraints::new(snr, papr)?;
    let policy = allocation::onoff_policy(&dist, &constraints)?;
    let PolicyKind::OnOff { threshold, level } = policy.kind else {
        unreachable!("onoff_policy returns an On-Off policy");
    };
    let rate = capacity::capacity_of_policy(&dist, &policy)?;
    let asymptotic = capacity::asymptotic_fixed_papr(&dist, constraints.papr_value()?, snr)?;
    let mut out = std::io::stdout().lock();
    for (key, value) in [
        ("snr_db", snr_db),
        ("snr", snr),
        ("A", constraints.papr_value()?),
        ("threshold", threshold),
        ("level", level),
        ("rate_onoff", rate.value),
        ("capacity_asymptotic", asymptotic),
        ("avg_power", policy.achieved_avg_power),
    ] {
        writeln!(out, "{key}={}", fmt_full(value))?;
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let cfg = load_config(args.config.as_ref())?;
    let dist_spec = config::require(args.dist, &cfg, "dist", |s| Ok(s.to_owned()))?;
    let papr_spec = config::require(args.papr, &cfg, "papr", |s| Ok(s.to_owned()))?;
    let start_db = config::require(args.start_db, &cfg, "start_db", |s| {
        config::parse_f64("start_db")(s)
    })?;
    let stop_db =
        config::require(args.stop_db, &cfg, "stop_db", |s| config::parse_f64("stop_db")(s))?;
    let points =
        config::require(args.points, &cfg, "points", |s| config::parse_usize("points")(s))?;
    let out_path = config::merge(args.out, &cfg, "out", |s| Ok(PathBuf::from(s)))?;
    let columns_spec = config::merge(args.columns, &cfg, "columns", |s| Ok(s.to_owned()))?;

    if points < 2 {
        return Err(CliError::Usage(format!("points must be at least 2, got {points}")));
    }
    let columns: Vec<String> = match &columns_spec {
        Some(list) => list.split(',').map(|c| c.trim().to_owned()).collect(),
        None => sweep::DEFAULT_COLUMNS.iter().map(|&c| c.to_owned()).collect(),
    };
    let probe = sweep::Row {
        snr_db: 0.0,
        snr: 0.0,
        papr: 0.0,
        lambda: 0.0,
        capacity_exact: 0.0,
        rate_onoff: 0.0,
        capacity_asymptotic: 0.0,
        capacity_wf_unconstrained: 0.0,
        energy_per_nat: 0.0,
    };
    for name in &columns {
        if probe.column(name).is_none() {
            return Err(CliError::Usage(format!("unknown column {name:?}")));
        }
    }

    let dist = spec::parse_dist(&dist_spec)?;
    let papr = parse_papr(&papr_spec)?;
    let grid = sweep::db_grid(start_db, stop_db, points);
    let rows = sweep::compute_rows(&dist, papr, &grid)?;

    let metadata = vec![
        ("dist".to_owned(), dist_spec),
        ("papr".to_owned(), papr_spec),
        ("start_db".to_owned(), start_db.to_string()),
        ("stop_db".to_owned(), stop_db.to_string()),
        ("points".to_owned(), points.to_string()),
        ("columns".to_owned(), columns.join(",")),
    ];
    match out_path {
        Some(path) => {
            let file = std::fs::File::create(&path)
                .map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))?;
            let mut writer = std::io::BufWriter::new(file);
            sweep::write_csv(&mut writer, &metadata, &columns, &rows)?;
            writer.flush()?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            sweep::write_csv(&mut out, &metadata, &columns, &rows)?;
        }
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let cfg = load_config(args.config.as_ref())?;
    let (dist, papr, snr_db) = resolve_point(args.dist, args.papr, args.snr_db, &cfg)?;
    let samples = config::merge(args.samples, &cfg, "samples", |s| config::parse_u64("samples")(s))?
        .unwrap_or(DEFAULT_SAMPLES);
    let seed = config::merge(args.seed, &cfg, "seed", |s| config::parse_u64("seed")(s))?
        .unwrap_or(DEFAULT_SEED);
    let chunk = config::merge(args.chunk, &cfg, "chunk", |s| config::parse_u64("chunk")(s))?
        .unwrap_or(DEFAULT_CHUNK);
    let policy_name = config::merge(args.policy, &cfg, "policy", |s| Ok(s.to_owned()))?
        .unwrap_or_else(|| "capped".to_owned());

    if samples < MIN_SAMPLES {
        return Err(CliError::Usage(format!(
            "samples must be at least {MIN_SAMPLES}, got {samples}"
        )));
    }
    if chunk == 0 {
        return Err(CliError::Usage("chunk must be positive".into()));
    }

    let snr = sweep::snr_of_db(snr_db);
    let constraints = PowerConstraints::new(snr, papr)?;
    let policy = match policy_name.as_str() {
        "capped" => allocation::solve_capped(&dist, &constraints)?,
        "onoff" => allocation::onoff_policy(&dist, &constraints)?,
        other => {
            return Err(CliError::Usage(format!("policy must be capped or onoff, got {other:?}")))
        }
    };

    let rate_quad = capacity::capacity_of_policy(&dist, &policy)?.value;
    let power_quad = allocation::average_power(&dist, &policy)?;
    let mc_cfg = McConfig::new(samples, seed, chunk);
    let rate_mc = montecarlo::estimate_rate(&dist, &policy, &mc_cfg);
    let power_mc = montecarlo::estimate_avg_power(&dist, &policy, &mc_cfg);

    let z = |quad: f64, mc: &montecarlo::McEstimate| -> f64 {
        if mc.std_error == 0.0 {
            if mc.mean == quad {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (mc.mean - quad) / mc.std_error
        }
    };
    let rate_z = z(rate_quad, &rate_mc);
    let power_z = z(power_quad, &power_mc);
    let agree = rate_z.abs() <= 3.0 && power_z.abs() <= 3.0;

    let mut out = std::io::stdout().lock();
    writeln!(out, "policy={policy_name}")?;
    writeln!(out, "samples={samples}")?;
    writeln!(out, "seed={seed}")?;
    for (key, value) in [
        ("snr_db", snr_db),
        ("snr", snr),
        ("rate_quadrature", rate_quad),
        ("rate_mc", rate_mc.mean),
        ("rate_se", rate_mc.std_error),
        ("rate_z", rate_z),
        ("power_quadrature", power_quad),
        ("power_mc", power_mc.mean),
        ("power_se", power_mc.std_error),
        ("power_z", power_z),
    ] {
        writeln!(out, "{key}={}", fmt_full(value))?;
    }
    writeln!(out, "verdict={}", if agree { "agree" } else { "disagree" })?;
    if agree {
        Ok(())
    } else {
        Err(CliError::Failure(format!(
            "oracle disagreement: rate_z={rate_z:.3}, power_z={power_z:.3}"
        )))
    }
}

fn cmd_regime(args: RegimeArgs) -> Result<(), CliError> {
    let cfg = load_config(args.config.as_ref())?;
    let dist_spec = config::merge(args.dist, &cfg, "dist", |s| Ok(s.to_owned()))?
        .unwrap_or_else(|| "rayleigh".to_owned());
    let papr_spec = config::require(args.papr, &cfg, "papr", |s| Ok(s.to_owned()))?;
    let grid_spec = config::merge(args.grid, &cfg, "grid", |s| Ok(s.to_owned()))?
        .unwrap_or_else(|| DEFAULT_REGIME_GRID.to_owned());
    let out_path = config::merge(args.out, &cfg, "out", |s| Ok(PathBuf::from(s)))?;

    let dist = spec::parse_dist(&dist_spec)?;
    if !matches!(dist, FadingDistribution::Rayleigh) {
        return Err(CliError::Usage(
            "regime classification is only derived for rayleigh gains".into(),
        ));
    }
    let papr = parse_papr(&papr_spec)?;
    match papr {
        PaprSpec::Constant(_) => {
            return Err(CliError::Usage(
                "const:<A> has a fixed-peak limit law; use `capacity` or `sweep` \
                 (capacity_asymptotic column) instead"
                    .into(),
            ))
        }
        PaprSpec::Unconstrained => {
            return Err(CliError::Usage("regime classification needs a peak constraint".into()))
        }
        PaprSpec::Profile(_) => {}
    }
    let grid: Vec<f64> = grid_spec
        .split(',')
        .map(|s| config::parse_f64("grid")(s.trim()))
        .collect::<Result<_, _>>()?;

    // Grid and admissibility preconditions are requests outside the
    // classifier's scope, so they share the usage exit code with the
    // rayleigh-only and constant-profile guards above.
    let report = capacity::classify_regime(&dist, papr, &grid).map_err(|e| match e {
        capacity::CapacityError::BadGrid | capacity::CapacityError::InadmissibleProfile { .. } => {
            CliError::Usage(e.to_string())
        }
        other => CliError::from(other),
    })?;

    let mut out = std::io::stdout().lock();
    writeln!(out, "# fadcap {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "# dist = {dist_spec}")?;
    writeln!(out, "# papr = {papr_spec}")?;
    // Reaching this point means both admissibility screens passed.
    writeln!(out, "screen_peak_to_zero=pass")?;
    writeln!(out, "screen_multiplier_monotone=pass")?;
    let tag = match report.regime {
        Regime::L0Zero => "L0_ZERO",
        Regime::L0Positive => "L0_POSITIVE",
    };
    writeln!(out, "regime={tag}")?;
    writeln!(out, "l0_estimate={}", fmt_full(report.l0_estimate))?;
    writeln!(out, "predicted_law={}", report.predicted_law)?;

    let header = "snr,l,capacity_exact,predicted,ratio,unified_predicted,unified_ratio";
    let mut table = String::new();
    table.push_str(header);
    table.push('\n');
    for i in 0..report.snr_grid.len() {
        let row = &report.ratio_table[i];
        let uni = &report.unified_ratios[i];
        table.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_full(row.snr),
            fmt_full(report.l_values[i]),
            fmt_full(row.exact),
            fmt_full(row.predicted),
            fmt_full(row.ratio),
            fmt_full(uni.predicted),
            fmt_full(uni.ratio),
        ));
    }
    match out_path {
        Some(path) => {
            std::fs::write(&path, table)
                .map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))?;
        }
        None => out.write_all(table.as_bytes())?,
    }
    Ok(())
}
