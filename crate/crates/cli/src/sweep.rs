//! SNR sweeps: one solved operating point per grid node, emitted as CSV
//! with full-precision scientific notation so regenerated files are
//! byte-identical.

use std::io::Write;

use fadcap_core::allocation::{PaprSpec, PowerConstraints};
use fadcap_core::capacity;
use fadcap_core::fading::FadingDistribution;
use rayon::prelude::*;

use crate::error::CliError;

pub const DEFAULT_COLUMNS: [&str; 9] = [
    "snr_db",
    "snr",
    "papr",
    "lambda",
    "capacity_exact",
    "rate_onoff",
    "capacity_asymptotic",
    "capacity_wf_unconstrained",
    "energy_per_nat",
];

/// Everything the sweep can report about one operating point.
#[derive(Debug, Clone, Copy)]
pub struct Row {
    pub snr_db: f64,
    pub snr: f64,
    pub papr: f64,
    pub lambda: f64,
    pub capacity_exact: f64,
    pub rate_onoff: f64,
    pub capacity_asymptotic: f64,
    pub capacity_wf_unconstrained: f64,
    pub energy_per_nat: f64,
}

impl Row {
    pub fn column(&self, name: &str) -> Option<f64> {
        Some(match name {
            "snr_db" => self.snr_db,
            "snr" => self.snr,
            "papr" => self.papr,
            "lambda" => self.lambda,
            "capacity_exact" => self.capacity_exact,
            "rate_onoff" => self.rate_onoff,
            "capacity_asymptotic" => self.capacity_asymptotic,
            "capacity_wf_unconstrained" => self.capacity_wf_unconstrained,
            "energy_per_nat" => self.energy_per_nat,
            _ => return None,
        })
    }
}

pub fn snr_of_db(snr_db: f64) -> f64 {
    10.0_f64.powf(snr_db / 10.0)
}

/// Inclusive grid, linear in dB. Descending sweeps are allowed.
pub fn db_grid(start_db: f64, stop_db: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2);
    (0..points)
        .map(|i| {
            if i == points - 1 {
                stop_db
            } else {
                start_db + (stop_db - start_db) * i as f64 / (points - 1) as f64
            }
        })
        .collect()
}

/// Solves one operating point and evaluates every reportable column.
pub fn compute_row(
    dist: &FadingDistribution,
    papr: PaprSpec,
    snr_db: f64,
) -> Result<Row, CliError> {
    let snr = snr_of_db(snr_db);
    let constraints = PowerConstraints::new(snr, papr)
        .map_err(|e| CliError::Failure(format!("at {snr_db} dB: {e}")))?;
    let a = constraints.papr_value()?;
    let exact = capacity::capacity_capped(dist, &constraints)?;
    let onoff = capacity::rate_onoff(dist, &constraints)?;
    let asymptotic = capacity::asymptotic_fixed_papr(dist, a, snr)?;
    let unconstrained = capacity::capacity_waterfilling(dist, snr)?;
    Ok(Row {
        snr_db,
        snr,
        papr: a,
        lambda: exact.multiplier,
        capacity_exact: exact.value,
        rate_onoff: onoff.value,
        capacity_asymptotic: asymptotic,
        capacity_wf_unconstrained: unconstrained.value,
        energy_per_nat: snr / exact.value,
    })
}

/// Rows are independent; solve them in parallel, keep grid order.
pub fn compute_rows(
    dist: &FadingDistribution,
    papr: PaprSpec,
    grid: &[f64],
) -> Result<Vec<Row>, CliError> {
    grid.par_iter().map(|&snr_db| compute_row(dist, papr, snr_db)).collect()
}

/// 17 significant digits: enough for a bit-exact f64 round trip.
pub fn fmt_full(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(
    out: &mut W,
    metadata: &[(String, String)],
    columns: &[String],
    rows: &[Row],
) -> std::io::Result<()> {
    writeln!(out, "# fadcap {}", env!("CARGO_PKG_VERSION"))?;
    for (key, value) in metadata {
        writeln!(out, "# {key} = {value}")?;
    }
    writeln!(out, "{}", columns.join(","))?;
    for row in rows {
        let fields: Vec<String> = columns
            .iter()
            .map(|name| fmt_full(row.column(name).expect("columns validated before writing")))
            .collect();
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}
