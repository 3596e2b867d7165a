//! Ergodic capacities, achievable rates, and low-SNR asymptotic laws.
//!
//! Exact values integrate `E[ln(1 + P(t) t)]` against the gain density,
//! with the range split at the policy's breakpoints:
//!
//! - water-filling: `C = integral over (lambda0, inf) of ln(t/lambda0) f dt`;
//! - capped water-filling: the same log-ratio piece on `(lambda, alpha)`
//!   plus `ln(1 + A*snr*t)` on `(alpha, inf)`;
//! - On-Off: `ln(1 + A*snr*t)` above the threshold.
//!
//! The asymptotic side evaluates the low-SNR law
//! `C ~ A*snr*E[t; t >= F^-1(1-1/A)]` through two independent routes,
//! the regime split for SNR-dependent PAPR profiles, and ratio probes
//! used to verify every "approaches" claim numerically.
//!
//! Log integrands are evaluated with `ln_1p` throughout: near the silence
//! threshold `t - lambda` is exact (t and lambda are within a factor of
//! two), so `ln_1p((t - lambda)/lambda)` keeps full relative precision on
//! sliver regions whose width shrinks to ~1e-8 at low SNR. This is what
//! lets the saturated-regime residual term resolve well below `snr` itself.

use thiserror::Error;

use crate::allocation::{
    self, AllocationError, PaprSpec, PolicyKind, PowerConstraints, PowerPolicy,
};
use crate::fading::FadingDistribution;
use crate::quadrature::{self, QuadratureError};

/// Relative tolerance for capacity/rate integrals.
const CAPACITY_QUAD_TOL: f64 = 1e-8;
/// Agreement required between the two evaluation routes of the low-SNR law.
const TWO_FORM_REL_TOL: f64 = 1e-6;
/// l(snr) below this, with a decreasing trend, classifies as the
/// vanishing-sliver regime.
const L0_THRESHOLD: f64 = 0.1;

#[derive(Debug, Error)]
pub enum CapacityError {
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("peak cap inactive at snr = {snr:e}: the policy is pure water-filling, so the saturated-region width is undefined")]
    CapInactive { snr: f64 },
    #[error("the two routes of the low-snr law disagree: quantile integral {integral:e}, tail mean {tail:e}")]
    TwoFormMismatch { integral: f64, tail: f64 },
    #[error("regime classification is defined for the Rayleigh distribution only")]
    RayleighOnly,
    #[error("constant PAPR A = {a} is out of scope for the variable-PAPR law; the fixed-PAPR asymptotic applies instead")]
    ConstantProfile { a: f64 },
    #[error("snr grid must be strictly decreasing, positive, and span at least 4 decades")]
    BadGrid,
    #[error("PAPR profile fails the admissibility screen: {reason}")]
    InadmissibleProfile { reason: String },
    #[error("predicted law evaluates to {predicted:e} at snr = {snr:e}; ratio undefined")]
    ZeroPrediction { snr: f64, predicted: f64 },
}

/// A capacity or rate value with solver diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct CapacityResult {
    /// Nats per channel use.
    pub value: f64,
    /// The policy's threshold parameter: lambda0 for water-filling,
    /// lambda for the capped policy, the On-Off threshold otherwise.
    pub multiplier: f64,
    /// Summed absolute error estimate of the quadrature pieces.
    pub integration_error: f64,
    pub policy_kind: PolicyKind,
}

/// Energy cost of one nat at a given operating point.
#[derive(Debug, Clone, Copy)]
pub struct EnergyEfficiency {
    /// snr / C at the evaluated point (noise-normalized energy per nat).
    pub energy_per_nat: f64,
    /// Low-SNR limit 1/(A * E[t; t >= F^-1(1 - 1/A)]), a function of A and
    /// the fading law only.
    pub asymptotic_limit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// The adaptive sliver keeps finite width: capacity follows
    /// C ~ snr*ln(1/snr).
    L0Positive,
    /// The sliver vanishes: capacity follows C ~ snr*ln(A(snr)).
    L0Zero,
}

/// One comparison row of an exact value against a predicted law.
#[derive(Debug, Clone, Copy)]
pub struct RatioRow {
    pub snr: f64,
    pub exact: f64,
    pub predicted: f64,
    pub ratio: f64,
}

/// Outcome of the variable-PAPR regime classification.
#[derive(Debug, Clone)]
pub struct RegimeReport {
    pub snr_grid: Vec<f64>,
    /// Saturation-onset width alpha - lambda at each grid point.
    pub l_values: Vec<f64>,
    /// Estimated limit of l: 0.0, a finite positive value, or +inf.
    pub l0_estimate: f64,
    pub regime: Regime,
    /// Human-readable form of the law used in `ratio_table`.
    pub predicted_law: String,
    /// Exact capacity against the regime-specific law.
    pub ratio_table: Vec<RatioRow>,
    /// Exact capacity against snr*ln(A(snr)), valid in both regimes.
    pub unified_ratios: Vec<RatioRow>,
}

/// Capacity under the average power constraint alone (no peak cap).
pub fn capacity_waterfilling(
    dist: &FadingDistribution,
    snr: f64,
) -> Result<CapacityResult, CapacityError> {
    let policy = allocation::solve_waterfilling(dist, snr)?;
    capacity_of_policy(dist, &policy)
}

/// Capacity under the joint peak and average constraints.
pub fn capacity_capped(
    dist: &FadingDistribution,
    constraints: &PowerConstraints,
) -> Result<CapacityResult, CapacityError> {
    let policy = allocation::solve_capped(dist, constraints)?;
    capacity_of_policy(dist, &policy)
}

/// Achievable rate of the On-Off policy: full peak above the quantile
/// threshold, silence below.
pub fn rate_onoff(
    dist: &FadingDistribution,
    constraints: &PowerConstraints,
) -> Result<CapacityResult, CapacityError> {
    let policy = allocation::onoff_policy(dist, constraints)?;
    capacity_of_policy(dist, &policy)
}

/// `E[ln(1 + P(t) t)]` for an already-solved policy, split at its
/// breakpoints.
pub fn capacity_of_policy(
    dist: &FadingDistribution,
    policy: &PowerPolicy,
) -> Result<CapacityResult, CapacityError> {
    let lo = dist.support_lo();
    match policy.kind {
        PolicyKind::WaterFilling { lambda0 } => {
            let est = quadrature::integrate(
                |t| ((t - lambda0) / lambda0).ln_1p() * dist.pdf(t),
                lambda0.max(lo),
                f64::INFINITY,
                CAPACITY_QUAD_TOL,
            )?;
            Ok(CapacityResult {
                value: est.value,
                multiplier: lambda0,
                integration_error: est.abs_error_estimate,
                policy_kind: policy.kind,
            })
        }
        PolicyKind::CappedWaterFilling { lambda, alpha, peak } => {
            let ramp = quadrature::integrate(
                |t| ((t - lambda) / lambda).ln_1p() * dist.pdf(t),
                lambda.max(lo),
                alpha,
                CAPACITY_QUAD_TOL,
            )?;
            let saturated = quadrature::integrate(
                |t| (peak * t).ln_1p() * dist.pdf(t),
                alpha.max(lo),
                f64::INFINITY,
                CAPACITY_QUAD_TOL,
            )?;
            Ok(CapacityResult {
                value: ramp.value + saturated.value,
                multiplier: lambda,
                integration_error: ramp.abs_error_estimate + saturated.abs_error_estimate,
                policy_kind: policy.kind,
            })
        }
        PolicyKind::OnOff { threshold, level } => {
            let est = quadrature::integrate(
                |t| (level * t).ln_1p() * dist.pdf(t),
                threshold.max(lo),
                f64::INFINITY,
                CAPACITY_QUAD_TOL,
            )?;
            Ok(CapacityResult {
                value: est.value,
                multiplier: threshold,
                integration_error: est.abs_error_estimate,
                policy_kind: policy.kind,
            })
        }
    }
}

/// The low-SNR capacity law `A*snr*E[t; t >= F^-1(1 - 1/A)]`.
///
/// Evaluated through two independent routes: the quantile integral
/// `A*snr* integral over (1-1/A, 1) of F^-1(u) du` and the closed-form
/// tail mean. The routes must agree to 1e-6 relative; the (more accurate)
/// tail-mean value is returned.
pub fn asymptotic_fixed_papr(
    dist: &FadingDistribution,
    a: f64,
    snr: f64,
) -> Result<f64, CapacityError> {
    assert!(a >= 1.0, "asymptotic law requires A >= 1, got {a}");
    assert!(snr > 0.0, "asymptotic law requires snr > 0, got {snr}");
    let p_lo = 1.0 - 1.0 / a;
    let by_quantile = quadrature::integrate(|u| dist.quantile(u), p_lo, 1.0, CAPACITY_QUAD_TOL)?;
    let by_tail = dist.tail_mean(dist.quantile(p_lo));
    let integral = a * snr * by_quantile.value;
    let tail = a * snr * by_tail;
    if (integral - tail).abs() > TWO_FORM_REL_TOL * tail.abs().max(integral.abs()) {
        return Err(CapacityError::TwoFormMismatch { integral, tail });
    }
    Ok(tail)
}

/// Energy per nat at `snr_eval` under PAPR `a`, with its low-SNR limit.
pub fn energy_per_nat(
    dist: &FadingDistribution,
    a: f64,
    snr_eval: f64,
) -> Result<EnergyEfficiency, CapacityError> {
    let constraints = PowerConstraints::new(snr_eval, PaprSpec::Constant(a))?;
    let capacity = capacity_capped(dist, &constraints)?;
    let limit = 1.0 / (a * dist.tail_mean(dist.quantile(1.0 - 1.0 / a)));
    Ok(EnergyEfficiency {
        energy_per_nat: snr_eval / capacity.value,
        asymptotic_limit: limit,
    })
}

/// Width `alpha - lambda` of the adaptive region of the capped policy,
/// the quantity whose low-SNR limit separates the two variable-PAPR
/// regimes. Requires the cap to be active; `A = 1` yields 0 (the region
/// is empty by construction).
pub fn l_of_snr(
    dist: &FadingDistribution,
    papr: PaprSpec,
    snr: f64,
) -> Result<f64, CapacityError> {
    let constraints = PowerConstraints::new(snr, papr)?;
    let policy = allocation::solve_capped(dist, &constraints)?;
    match policy.kind {
        PolicyKind::CappedWaterFilling { lambda, alpha, .. } => Ok(alpha - lambda),
        PolicyKind::OnOff { .. } => Ok(0.0),
        PolicyKind::WaterFilling { .. } => Err(CapacityError::CapInactive { snr }),
    }
}

/// Classifies an SNR-dependent PAPR profile into one of the two low-SNR
/// capacity regimes on a decreasing SNR grid, and tabulates the exact
/// capacity against the predicted laws.
///
/// Scope guards: Rayleigh fading only; the profile must be SNR-dependent
/// (constant A has its own fixed-PAPR law) and pass the admissibility
/// screen: `A(snr)*snr` must vanish along the grid, and if `A` grows
/// without bound the silence threshold must grow with it.
pub fn classify_regime(
    dist: &FadingDistribution,
    profile: PaprSpec,
    snr_grid: &[f64],
) -> Result<RegimeReport, CapacityError> {
    if !matches!(dist, FadingDistribution::Rayleigh) {
        return Err(CapacityError::RayleighOnly);
    }
    match profile {
        PaprSpec::Constant(a) => return Err(CapacityError::ConstantProfile { a }),
        PaprSpec::Unconstrained => {
            return Err(CapacityError::InadmissibleProfile {
                reason: "no peak constraint, nothing to classify".into(),
            })
        }
        PaprSpec::Profile(_) => {}
    }
    check_grid(snr_grid)?;
    if snr_grid[0] / snr_grid[snr_grid.len() - 1] < 1e4 * (1.0 - 1e-9) {
        return Err(CapacityError::BadGrid);
    }

    // Admissibility screen, then one capped solve per grid point.
    let a_values: Vec<f64> = snr_grid
        .iter()
        .map(|&snr| profile.value_at(snr))
        .collect::<Result<_, _>>()?;
    let peaks: Vec<f64> = a_values.iter().zip(snr_grid).map(|(a, s)| a * s).collect();
    if !(peaks.windows(2).all(|w| w[1] < w[0]) && peaks[peaks.len() - 1] < 0.5) {
        return Err(CapacityError::InadmissibleProfile {
            reason: format!("A(snr)*snr does not vanish along the grid: {peaks:?}"),
        });
    }

    let mut l_values = Vec::with_capacity(snr_grid.len());
    let mut lambdas = Vec::with_capacity(snr_grid.len());
    let mut exact = Vec::with_capacity(snr_grid.len());
    for &snr in snr_grid {
        let constraints = PowerConstraints::new(snr, profile)?;
        let policy = allocation::solve_capped(dist, &constraints)?;
        let PolicyKind::CappedWaterFilling { lambda, alpha, .. } = policy.kind else {
            return Err(CapacityError::CapInactive { snr });
        };
        lambdas.push(lambda);
        l_values.push(alpha - lambda);
        exact.push(capacity_of_policy(dist, &policy)?.value);
    }

    let a_grows = a_values.windows(2).all(|w| w[1] > w[0]);
    if a_grows && !lambdas.windows(2).all(|w| w[1] > w[0] - 1e-12) {
        return Err(CapacityError::InadmissibleProfile {
            reason: format!("A grows but the silence threshold does not: {lambdas:?}"),
        });
    }

    // Regime call from the trend of the last three grid points.
    let n = l_values.len();
    let (la, lb, lc) = (l_values[n - 3], l_values[n - 2], l_values[n - 1]);
    let trending_down = lc < lb && lb < la;
    let trending_up = lc > lb && lb > la;
    let (regime, l0_estimate) = if trending_down && lc < L0_THRESHOLD {
        (Regime::L0Zero, 0.0)
    } else if trending_up {
        (Regime::L0Positive, if lc > 2.0 * la { f64::INFINITY } else { lc })
    } else {
        (Regime::L0Positive, lc)
    };

    let predicted_law = match regime {
        Regime::L0Zero => "C ~ snr*ln(A(snr))".to_string(),
        Regime::L0Positive => "C ~ snr*ln(1/snr)".to_string(),
    };
    let rows = |predict: &dyn Fn(f64, f64) -> f64| -> Vec<RatioRow> {
        snr_grid
            .iter()
            .zip(&a_values)
            .zip(&exact)
            .map(|((&snr, &a), &c)| {
                let predicted = predict(snr, a);
                RatioRow { snr, exact: c, predicted, ratio: c / predicted }
            })
            .collect()
    };
    let ratio_table = match regime {
        Regime::L0Zero => rows(&|snr, a| snr * a.ln()),
        Regime::L0Positive => rows(&|snr, _| snr * (1.0 / snr).ln()),
    };
    let unified_ratios = rows(&|snr, a| snr * a.ln());

    Ok(RegimeReport {
        snr_grid: snr_grid.to_vec(),
        l_values,
        l0_estimate,
        regime,
        predicted_law,
        ratio_table,
        unified_ratios,
    })
}

/// Evaluates `exact(snr)/predicted(snr)` along a decreasing grid. The
/// backbone of every numerical check of an "approaches" claim.
pub fn asymptotic_ratio_probe<E, P>(
    exact: E,
    predicted: P,
    snr_grid: &[f64],
) -> Result<Vec<(f64, f64)>, CapacityError>
where
    E: Fn(f64) -> Result<f64, CapacityError>,
    P: Fn(f64) -> f64,
{
    check_grid(snr_grid)?;
    snr_grid
        .iter()
        .map(|&snr| {
            let p = predicted(snr);
            if p == 0.0 || !p.is_finite() {
                return Err(CapacityError::ZeroPrediction { snr, predicted: p });
            }
            Ok((snr, exact(snr)? / p))
        })
        .collect()
}

fn check_grid(snr_grid: &[f64]) -> Result<(), CapacityError> {
    let ok = snr_grid.len() >= 2
        && snr_grid.iter().all(|s| *s > 0.0 && s.is_finite())
        && snr_grid.windows(2).all(|w| w[1] < w[0]);
    if ok {
        Ok(())
    } else {
        Err(CapacityError::BadGrid)
    }
}
