//! Browser bindings for the capacity solvers. Every export takes plain
//! strings and numbers and returns a JSON string; failures come back as
//! `{"error": "..."}` so the page never deals with thrown values.
//!
//! The exported functions are ordinary Rust functions on native targets,
//! which is how the tests in this crate exercise them.

use fadcap_core::allocation::{self, PaprSpec, PolicyKind, PowerConstraints};
use fadcap_core::capacity::{self, Regime};
use fadcap_core::fading::FadingDistribution;
use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

const MAX_POINTS: u32 = 4096;

#[derive(Serialize)]
struct ErrorDto<'a> {
    error: &'a str,
}

fn to_json<T: Serialize>(result: Result<T, String>) -> String {
    let body = match &result {
        Ok(value) => serde_json::to_string(value).map_err(|e| e.to_string()),
        Err(msg) => Err(msg.clone()),
    };
    body.unwrap_or_else(|msg| {
        serde_json::to_string(&ErrorDto { error: &msg }).expect("plain string serializes")
    })
}

fn parse_inputs(dist: &str, papr: &str) -> Result<(FadingDistribution, PaprSpec), String> {
    let dist: FadingDistribution = dist.parse().map_err(|e| format!("{e}"))?;
    let papr: PaprSpec = papr.parse().map_err(|e| format!("{e}"))?;
    Ok((dist, papr))
}

fn checked_points(points: u32) -> Result<usize, String> {
    if (2..=MAX_POINTS).contains(&points) {
        Ok(points as usize)
    } else {
        Err(format!("points must be in 2..={MAX_POINTS}, got {points}"))
    }
}

#[derive(Serialize)]
struct SweepDto {
    snr_db: Vec<f64>,
    snr: Vec<f64>,
    papr: Vec<f64>,
    capacity: Vec<f64>,
    onoff: Vec<f64>,
    waterfilling: Vec<f64>,
    asymptotic: Vec<f64>,
}

/// Capacity curves over a dB grid: exact capped capacity, the On-Off
/// rate, the unconstrained water-filling capacity, and the low-SNR law.
#[wasm_bindgen]
pub fn sweep_curves(dist: &str, papr: &str, start_db: f64, stop_db: f64, points: u32) -> String {
    to_json(sweep_curves_impl(dist, papr, start_db, stop_db, points))
}

fn sweep_curves_impl(
    dist: &str,
    papr: &str,
    start_db: f64,
    stop_db: f64,
    points: u32,
) -> Result<SweepDto, String> {
    let (dist, papr) = parse_inputs(dist, papr)?;
    let points = checked_points(points)?;
    let mut out = SweepDto {
        snr_db: Vec::with_capacity(points),
        snr: Vec::with_capacity(points),
        papr: Vec::with_capacity(points),
        capacity: Vec::with_capacity(points),
        onoff: Vec::with_capacity(points),
        waterfilling: Vec::with_capacity(points),
        asymptotic: Vec::with_capacity(points),
    };
    for i in 0..points {
        let snr_db = start_db + (stop_db - start_db) * i as f64 / (points - 1) as f64;
        let snr = 10.0_f64.powf(snr_db / 10.0);
        let constraints =
            PowerConstraints::new(snr, papr).map_err(|e| format!("at {snr_db} dB: {e}"))?;
        let a = constraints.papr_value().map_err(|e| e.to_string())?;
        let exact =
            capacity::capacity_capped(&dist, &constraints).map_err(|e| format!("at {snr_db} dB: {e}"))?;
        let onoff =
            capacity::rate_onoff(&dist, &constraints).map_err(|e| format!("at {snr_db} dB: {e}"))?;
        let wf = capacity::capacity_waterfilling(&dist, snr)
            .map_err(|e| format!("at {snr_db} dB: {e}"))?;
        let law = capacity::asymptotic_fixed_papr(&dist, a, snr)
            .map_err(|e| format!("at {snr_db} dB: {e}"))?;
        out.snr_db.push(snr_db);
        out.snr.push(snr);
        out.papr.push(a);
        out.capacity.push(exact.value);
        out.onoff.push(onoff.value);
        out.waterfilling.push(wf.value);
        out.asymptotic.push(law);
    }
    Ok(out)
}

#[derive(Serialize)]
struct ProfileDto {
    kind: &'static str,
    snr: f64,
    papr: f64,
    peak: f64,
    /// Policy breakpoints on the gain axis, low to high.
    markers: Vec<f64>,
    t: Vec<f64>,
    power: Vec<f64>,
    pdf: Vec<f64>,
}

/// The solved transmit power profile P(t) with the gain density overlaid.
#[wasm_bindgen]
pub fn policy_profile(dist: &str, papr: &str, snr_db: f64, points: u32) -> String {
    to_json(policy_profile_impl(dist, papr, snr_db, points))
}

fn policy_profile_impl(
    dist: &str,
    papr: &str,
    snr_db: f64,
    points: u32,
) -> Result<ProfileDto, String> {
    let (dist, papr) = parse_inputs(dist, papr)?;
    let points = checked_points(points)?;
    let snr = 10.0_f64.powf(snr_db / 10.0);
    let constraints = PowerConstraints::new(snr, papr).map_err(|e| e.to_string())?;
    let policy = allocation::solve_capped(&dist, &constraints).map_err(|e| e.to_string())?;

    let (kind, markers, window_hi) = match policy.kind {
        PolicyKind::WaterFilling { lambda0 } => ("waterfilling", vec![lambda0], 6.0 * lambda0),
        PolicyKind::CappedWaterFilling { lambda, alpha, .. } => {
            ("capped", vec![lambda, alpha], 2.5 * alpha)
        }
        PolicyKind::OnOff { threshold, .. } => {
            let hi = if threshold > 0.0 { 2.5 * threshold } else { dist.quantile(0.99) };
            ("onoff", vec![threshold], hi)
        }
    };
    let hi = window_hi.min(dist.quantile(1.0 - 1e-9)).max(dist.quantile(0.5));

    let mut t = Vec::with_capacity(points);
    let mut power = Vec::with_capacity(points);
    let mut pdf = Vec::with_capacity(points);
    let lo = dist.support_lo();
    for i in 0..points {
        let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
        t.push(x);
        power.push(policy.power_at(x));
        pdf.push(dist.pdf(x));
    }
    Ok(ProfileDto {
        kind,
        snr,
        papr: constraints.papr_value().map_err(|e| e.to_string())?,
        peak: policy.peak_power(),
        markers,
        t,
        power,
        pdf,
    })
}

#[derive(Serialize)]
struct RegimeDto {
    regime: &'static str,
    /// Estimated sliver-width limit; null encodes "grows without bound".
    l0: Option<f64>,
    predicted_law: String,
    snr: Vec<f64>,
    l: Vec<f64>,
    exact: Vec<f64>,
    predicted: Vec<f64>,
    ratio: Vec<f64>,
    unified_ratio: Vec<f64>,
}

/// Classifies a variable PAPR profile on a decade grid from 1e-2 down to
/// 1e-(1+decades), Rayleigh gains only.
#[wasm_bindgen]
pub fn regime_probe(papr: &str, decades: u32) -> String {
    to_json(regime_probe_impl(papr, decades))
}

fn regime_probe_impl(papr: &str, decades: u32) -> Result<RegimeDto, String> {
    if !(5..=9).contains(&decades) {
        return Err(format!("decades must be in 5..=9, got {decades}"));
    }
    let papr: PaprSpec = papr.parse().map_err(|e| format!("{e}"))?;
    let grid: Vec<f64> = (2..=1 + decades).map(|k| 10.0_f64.powi(-(k as i32))).collect();
    let report = capacity::classify_regime(&FadingDistribution::Rayleigh, papr, &grid)
        .map_err(|e| e.to_string())?;
    Ok(RegimeDto {
        regime: match report.regime {
            Regime::L0Zero => "L0_ZERO",
            Regime::L0Positive => "L0_POSITIVE",
        },
        l0: report.l0_estimate.is_finite().then_some(report.l0_estimate),
        predicted_law: report.predicted_law,
        snr: report.snr_grid.clone(),
        l: report.l_values.clone(),
        exact: report.ratio_table.iter().map(|r| r.exact).collect(),
        predicted: report.ratio_table.iter().map(|r| r.predicted).collect(),
        ratio: report.ratio_table.iter().map(|r| r.ratio).collect(),
        unified_ratio: report.unified_ratios.iter().map(|r| r.ratio).collect(),
    })
}
