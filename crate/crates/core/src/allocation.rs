//! Power-allocation policies and their Lagrange multiplier solvers.
//!
//! Three feasible policies are constructed here, all written over the
//! gain axis `t = |h|^2`:
//!
//! - water-filling `P(t) = [1/lambda0 - 1/t]+` with `E[P] = SNR`, optimal
//!   under the average power constraint alone;
//! - peak-capped water-filling `P(t) = min([1/lambda - 1/t]+, A*SNR)`, the
//!   optimum under the joint constraints, silent below `lambda`, saturated
//!   above `alpha = lambda/(1 - lambda*A*SNR)`;
//! - On-Off: full peak `A*SNR` whenever `t >= F^-1(1 - 1/A)`, else silence.
//!
//! Multipliers are found by bisection on the average-power residual. For
//! the capped policy the residual evaluates the saturated region through
//! the closed-form tail probability, so only the narrow adaptive region
//! `[lambda, alpha]` is integrated numerically; this keeps the solve
//! accurate even when `alpha - lambda` shrinks to ~1e-8 at low SNR.

use std::str::FromStr;

use thiserror::Error;

use crate::fading::FadingDistribution;
use crate::quadrature::{self, QuadratureError};

/// Doubling/halving attempts when expanding a multiplier bracket.
const MAX_BRACKET_EXPANSIONS: usize = 200;
/// Relative tolerance of the multiplier bisection.
const MULTIPLIER_REL_TOL: f64 = 1e-10;
/// Relative tolerance of quadrature runs inside the solvers.
const SOLVER_QUAD_TOL: f64 = 1e-10;
/// Allowed relative mismatch between achieved and requested average power.
const RESIDUAL_REL_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum AllocationError {
    #[error("snr must be positive and finite, got {snr}")]
    BadSnr { snr: f64 },
    #[error("PAPR must be at least 1, got A = {a}")]
    PaprBelowOne { a: f64 },
    #[error("PAPR profile yields A = {a} < 1 at snr = {snr:e}; profile not usable there")]
    ProfileBelowOne { a: f64, snr: f64 },
    #[error("PAPR profile is undefined at snr = {snr} (requires 0 < snr < 1)")]
    ProfileUndefined { snr: f64 },
    #[error("papr_function argument x = {x} lies too deep in the tail: E[[1 - x/t]+] underflowed")]
    PaprOverflow { x: f64 },
    #[error("bracket expansion failed after {attempts} attempts solving for the multiplier")]
    BracketExpansion { attempts: usize },
    #[error("average-power residual check failed: achieved {achieved:e}, target {target:e}")]
    ResidualCheck { achieved: f64, target: f64 },
    #[error("cannot parse PAPR spec {spec:?}: {reason}")]
    ParsePapr { spec: String, reason: String },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Peak-to-average power ratio, either fixed or a named function of SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PaprSpec {
    /// Fixed A >= 1.
    Constant(f64),
    /// A(SNR) given by a built-in profile.
    Profile(PaprProfile),
    /// No peak constraint at all.
    Unconstrained,
}

/// Built-in PAPR profiles. Parsed from `log-inv`, `power-law:<a>,<b>`,
/// and `near-wf:<c>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PaprProfile {
    /// A(SNR) = ln(e + 1/SNR).
    LogInverse,
    /// A(SNR) = a * SNR^(-b) with 0 < b < 1.
    PowerLaw { a: f64, b: f64 },
    /// A(SNR) = 1/(SNR * ln(1/SNR)^c) with c > 1, just under the
    /// water-filling peak growth.
    NearWaterfilling { c: f64 },
}

impl PaprSpec {
    /// Evaluates A at the given SNR, checking A >= 1.
    pub fn value_at(&self, snr: f64) -> Result<f64, AllocationError> {
        if !(snr > 0.0 && snr.is_finite()) {
            return Err(AllocationError::BadSnr { snr });
        }
        let a = match self {
            Self::Constant(a) => {
                if !(*a >= 1.0 && a.is_finite()) {
                    return Err(AllocationError::PaprBelowOne { a: *a });
                }
                return Ok(*a);
            }
            Self::Profile(PaprProfile::LogInverse) => (std::f64::consts::E + 1.0 / snr).ln(),
            Self::Profile(PaprProfile::PowerLaw { a, b }) => a * snr.powf(-b),
            Self::Profile(PaprProfile::NearWaterfilling { c }) => {
                if snr >= 1.0 {
                    return Err(AllocationError::ProfileUndefined { snr });
                }
                1.0 / (snr * (1.0 / snr).ln().powf(*c))
            }
            Self::Unconstrained => return Ok(f64::INFINITY),
        };
        if a >= 1.0 {
            Ok(a)
        } else {
            Err(AllocationError::ProfileBelowOne { a, snr })
        }
    }

    /// True for profiles whose A varies with SNR.
    pub fn is_variable(&self) -> bool {
        matches!(self, Self::Profile(_))
    }
}

impl FromStr for PaprSpec {
    type Err = AllocationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |reason: &str| AllocationError::ParsePapr {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        let parse_num = |v: &str| -> Result<f64, AllocationError> {
            v.trim().parse::<f64>().map_err(|_| bad(&format!("not a number: {v:?}")))
        };
        if s == "log-inv" {
            return Ok(Self::Profile(PaprProfile::LogInverse));
        }
        if let Some(v) = s.strip_prefix("const:") {
            let a = parse_num(v)?;
            if !(a >= 1.0 && a.is_finite()) {
                return Err(bad("constant PAPR must satisfy A >= 1"));
            }
            return Ok(Self::Constant(a));
        }
        if let Some(v) = s.strip_prefix("power-law:") {
            let parts: Vec<&str> = v.split(',').collect();
            if parts.len() != 2 {
                return Err(bad("expected power-law:<a>,<b>"));
            }
            let (a, b) = (parse_num(parts[0])?, parse_num(parts[1])?);
            if !(a > 0.0 && a.is_finite()) {
                return Err(bad("power-law coefficient a must be positive"));
            }
            if !(b > 0.0 && b < 1.0) {
                return Err(bad("power-law exponent must satisfy 0 < b < 1"));
            }
            return Ok(Self::Profile(PaprProfile::PowerLaw { a, b }));
        }
        if let Some(v) = s.strip_prefix("near-wf:") {
            let c = parse_num(v)?;
            if !(c > 1.0 && c.is_finite()) {
                return Err(bad("near-wf exponent must satisfy c > 1"));
            }
            return Ok(Self::Profile(PaprProfile::NearWaterfilling { c }));
        }
        Err(bad("expected const:<A>, log-inv, power-law:<a>,<b>, or near-wf:<c>"))
    }
}

/// Average power budget plus PAPR constraint.
#[derive(Debug, Clone, Copy)]
pub struct PowerConstraints {
    snr: f64,
    papr: PaprSpec,
}

impl PowerConstraints {
    pub fn new(snr: f64, papr: PaprSpec) -> Result<Self, AllocationError> {
        if !(snr > 0.0 && snr.is_finite()) {
            return Err(AllocationError::BadSnr { snr });
        }
        // Surface bad constant/profile values at construction when possible.
        papr.value_at(snr)?;
        Ok(Self { snr, papr })
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    pub fn papr(&self) -> PaprSpec {
        self.papr
    }

    /// A evaluated at this SNR.
    pub fn papr_value(&self) -> Result<f64, AllocationError> {
        self.papr.value_at(self.snr)
    }

    /// Peak power A * SNR (infinite when unconstrained).
    pub fn peak(&self) -> Result<f64, AllocationError> {
        Ok(self.papr_value()? * self.snr)
    }
}

/// A solved power allocation over the gain axis.
#[derive(Debug, Clone, Copy)]
pub struct PowerPolicy {
    pub kind: PolicyKind,
    /// Multiplier bracket the solve ran in, if a multiplier was solved.
    pub bracket: Option<(f64, f64)>,
    /// E[P(t)] re-evaluated at the solved policy.
    pub achieved_avg_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    /// P(t) = [1/lambda0 - 1/t]+.
    WaterFilling { lambda0: f64 },
    /// P(t) = 0 below lambda, 1/lambda - 1/t on (lambda, alpha), peak above.
    CappedWaterFilling { lambda: f64, alpha: f64, peak: f64 },
    /// P(t) = level for t >= threshold, else 0.
    OnOff { threshold: f64, level: f64 },
}

impl PowerPolicy {
    /// Evaluates the allocation at gain `t`.
    pub fn power_at(&self, t: f64) -> f64 {
        assert!(t >= 0.0 && !t.is_nan(), "power_at domain error: t = {t}");
        match self.kind {
            PolicyKind::WaterFilling { lambda0 } => {
                if t <= lambda0 {
                    0.0
                } else {
                    1.0 / lambda0 - 1.0 / t
                }
            }
            PolicyKind::CappedWaterFilling { lambda, alpha, peak } => {
                if t <= lambda {
                    0.0
                } else if t < alpha {
                    1.0 / lambda - 1.0 / t
                } else {
                    peak
                }
            }
            PolicyKind::OnOff { threshold, level } => {
                if t >= threshold {
                    level
                } else {
                    0.0
                }
            }
        }
    }

    /// Peak power the policy can emit (infinite for pure water-filling).
    pub fn peak_power(&self) -> f64 {
        match self.kind {
            PolicyKind::WaterFilling { lambda0 } => 1.0 / lambda0,
            PolicyKind::CappedWaterFilling { peak, .. } => peak,
            PolicyKind::OnOff { level, .. } => level,
        }
    }
}

/// Solves the unconstrained water-filling multiplier: E[[1/l - 1/t]+] = snr.
pub fn solve_waterfilling(
    dist: &FadingDistribution,
    snr: f64,
) -> Result<PowerPolicy, AllocationError> {
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(AllocationError::BadSnr { snr });
    }
    let residual = |lambda: f64| -> Result<f64, AllocationError> {
        let est = quadrature::integrate(
            |t| (1.0 / lambda - 1.0 / t) * dist.pdf(t),
            lambda,
            f64::INFINITY,
            SOLVER_QUAD_TOL,
        )?;
        Ok(est.value - snr)
    };

    // Expand a bracket around an order-of-magnitude guess. The residual is
    // strictly decreasing in lambda.
    let mut lo = dist.mean().max(f64::MIN_POSITIVE);
    let mut hi = lo;
    let mut attempts = 0;
    while residual(lo)? < 0.0 {
        lo *= 0.5;
        attempts += 1;
        if attempts > MAX_BRACKET_EXPANSIONS {
            return Err(AllocationError::BracketExpansion { attempts });
        }
    }
    while residual(hi)? > 0.0 {
        hi *= 2.0;
        attempts += 1;
        if attempts > MAX_BRACKET_EXPANSIONS {
            return Err(AllocationError::BracketExpansion { attempts });
        }
    }

    let root_err = std::cell::Cell::new(None);
    let sol = quadrature::find_root(
        |lambda| match residual(lambda) {
            Ok(r) => r,
            Err(e) => {
                root_err.set(Some(e));
                f64::NAN
            }
        },
        lo,
        hi,
        MULTIPLIER_REL_TOL,
    );
    if let Some(e) = root_err.take() {
        return Err(e);
    }
    let sol = sol?;

    let achieved = sol.residual + snr;
    check_residual(achieved, snr)?;
    Ok(PowerPolicy {
        kind: PolicyKind::WaterFilling { lambda0: sol.root },
        bracket: Some((lo, hi)),
        achieved_avg_power: achieved,
    })
}

/// The PAPR of unconstrained water-filling as a function of its silence
/// threshold: A(x) = 1 / E[[1 - x/t]+].
pub fn papr_function(dist: &FadingDistribution, x: f64) -> Result<f64, AllocationError> {
    assert!(x > 0.0 && x.is_finite(), "papr_function domain error: x = {x}");
    let est = quadrature::integrate(
        |t| (1.0 - x / t) * dist.pdf(t),
        x,
        f64::INFINITY,
        SOLVER_QUAD_TOL,
    )?;
    if est.value <= 0.0 {
        return Err(AllocationError::PaprOverflow { x });
    }
    Ok(1.0 / est.value)
}

/// Multiplier interval for the capped solve: the solution lies in
/// `[q/(1 + A*snr*q), q]` with `q = F^-1(1 - 1/A)`.
pub fn multiplier_bracket(dist: &FadingDistribution, snr: f64, a: f64) -> (f64, f64) {
    assert!(a >= 1.0, "multiplier_bracket requires A >= 1, got {a}");
    assert!(snr > 0.0, "multiplier_bracket requires snr > 0, got {snr}");
    let q = dist.quantile(1.0 - 1.0 / a);
    (q / (1.0 + a * snr * q), q)
}

/// Solves the peak-capped water-filling policy for the joint constraints.
///
/// Dispatches back to plain water-filling when the unconstrained peak
/// `1/lambda0` already fits under `A*snr`, and to the constant-power
/// (On-Off with threshold at the support edge) policy when `A = 1`, where
/// the adaptive region has zero width.
pub fn solve_capped(
    dist: &FadingDistribution,
    constraints: &PowerConstraints,
) -> Result<PowerPolicy, AllocationError> {
    let snr = constraints.snr();
    if matches!(constraints.papr(), PaprSpec::Unconstrained) {
        return solve_waterfilling(dist, snr);
    }
    let a = constraints.papr_value()?;
    if a == 1.0 {
        let threshold = dist.support_lo();
        return Ok(PowerPolicy {
            kind: PolicyKind::OnOff { threshold, level: snr },
            bracket: None,
            achieved_avg_power: snr * dist.tail_probability(threshold),
        });
    }

    let wf = solve_waterfilling(dist, snr)?;
    let PolicyKind::WaterFilling { lambda0 } = wf.kind else {
        unreachable!("solve_waterfilling returns a water-filling policy");
    };
    let peak = a * snr;
    if 1.0 / lambda0 <= peak {
        return Ok(wf);
    }

    // Constraint residual with the saturated region in closed form:
    // E[min] = integral over (lambda, alpha) of (1/lambda - 1/t) f dt
    //          + peak * P(t >= alpha).
    let quad_err = std::cell::Cell::new(None);
    let residual = |lambda: f64| -> f64 {
        let alpha = lambda / (1.0 - lambda * peak);
        let body = match quadrature::integrate(
            |t| (1.0 / lambda - 1.0 / t) * dist.pdf(t),
            lambda,
            alpha,
            SOLVER_QUAD_TOL,
        ) {
            Ok(est) => est.value,
            Err(e) => {
                quad_err.set(Some(e));
                return f64::NAN;
            }
        };
        body + peak * dist.tail_probability(alpha) - snr
    };

    // The residual is decreasing; both ends are signed by construction
    // (alpha(lo) = q makes the policy over-deliver, and the water-filling
    // multiplier under-delivers once clipped). lambda0 < 1/peak here, so
    // alpha stays finite on the whole bracket.
    let (lo, hi_apriori) = multiplier_bracket(dist, snr, a);
    let hi = hi_apriori.min(lambda0);
    let take = |r: f64, e: Option<QuadratureError>| -> Result<f64, AllocationError> {
        match e {
            Some(err) => Err(err.into()),
            None => Ok(r),
        }
    };

    let r_lo = take(residual(lo), quad_err.take())?;
    let lambda = if r_lo <= 0.0 {
        // Underflow-narrow bracket: the interval is already at noise level.
        lo
    } else {
        let r_hi = take(residual(hi), quad_err.take())?;
        if r_hi >= 0.0 {
            hi
        } else {
            let sol = quadrature::find_root(residual, lo, hi, MULTIPLIER_REL_TOL);
            if let Some(e) = quad_err.take() {
                return Err(e.into());
            }
            sol?.root
        }
    };

    let r = take(residual(lambda), quad_err.take())?;
    let achieved = r + snr;
    check_residual(achieved, snr)?;
    let alpha = lambda / (1.0 - lambda * peak);
    Ok(PowerPolicy {
        kind: PolicyKind::CappedWaterFilling { lambda, alpha, peak },
        bracket: Some((lo, hi)),
        achieved_avg_power: achieved,
    })
}

/// The one-bit-feedback policy: full peak above `F^-1(1 - 1/A)`, silence
/// below. Its average power is `A*snr*(1 - F(threshold)) = snr` exactly,
/// up to quantile tolerance.
pub fn onoff_policy(
    dist: &FadingDistribution,
    constraints: &PowerConstraints,
) -> Result<PowerPolicy, AllocationError> {
    let snr = constraints.snr();
    let a = constraints.papr_value()?;
    if !a.is_finite() {
        return Err(AllocationError::ProfileUndefined { snr });
    }
    let threshold = dist.quantile(1.0 - 1.0 / a);
    let level = a * snr;
    Ok(PowerPolicy {
        kind: PolicyKind::OnOff { threshold, level },
        bracket: None,
        achieved_avg_power: level * dist.tail_probability(threshold),
    })
}

/// Re-evaluates E[P(t)] for a solved policy by quadrature, splitting the
/// range at the policy's breakpoints so no piece hides between sample
/// nodes. Intended for feasibility audits; the solvers store the cheaper
/// in-solve value in `achieved_avg_power`.
pub fn average_power(
    dist: &FadingDistribution,
    policy: &PowerPolicy,
) -> Result<f64, AllocationError> {
    let mut cuts = vec![dist.support_lo()];
    match policy.kind {
        PolicyKind::WaterFilling { lambda0 } => cuts.push(lambda0),
        PolicyKind::CappedWaterFilling { lambda, alpha, .. } => {
            cuts.push(lambda);
            cuts.push(alpha);
        }
        PolicyKind::OnOff { threshold, .. } => cuts.push(threshold),
    }
    cuts.retain(|c| *c >= dist.support_lo() && c.is_finite());
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.push(f64::INFINITY);
    let mut total = 0.0;
    for pair in cuts.windows(2) {
        if pair[0] < pair[1] {
            total += quadrature::integrate(
                |t| policy.power_at(t) * dist.pdf(t),
                pair[0],
                pair[1],
                SOLVER_QUAD_TOL,
            )?
            .value;
        }
    }
    Ok(total)
}

fn check_residual(achieved: f64, target: f64) -> Result<(), AllocationError> {
    if (achieved - target).abs() <= RESIDUAL_REL_TOL * target {
        Ok(())
    } else {
        Err(AllocationError::ResidualCheck { achieved, target })
    }
}
