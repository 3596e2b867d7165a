//! Adaptive Gauss-Kronrod integration and bracketed root-finding.
//!
//! Every capacity formula in this crate is an expectation against a gain
//! density or a Lagrange multiplier equation; both reduce to the two
//! primitives here. Integration uses a 7-point Gauss / 15-point Kronrod
//! pair on a worklist of subintervals ordered by local error estimate.
//! Semi-infinite ranges `[lo, inf)` are mapped to `[0, 1)` by the
//! substitution `t = lo + u/(1-u)`, so tail decay is handled without
//! distribution-specific truncation points. Root-finding is plain
//! bisection: every solve in this crate has a guaranteed monotone
//! bracket, and bisection keeps results deterministic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

/// Subdivision budget per `integrate` call.
const SUBDIVISION_BUDGET: usize = 10_000;
/// Absolute floor under the relative termination threshold.
const ABS_TOL_FLOOR: f64 = 1e-14;

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralEstimate {
    /// Estimated value of the integral.
    pub value: f64,
    /// Estimated absolute error, summed over subintervals.
    pub abs_error_estimate: f64,
    /// Number of integrand evaluations performed.
    pub evaluations: usize,
}

/// Result of a bracketed root solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootResult {
    /// Final midpoint estimate of the root.
    pub root: f64,
    /// Lower end of the final bracket.
    pub bracket_lo: f64,
    /// Upper end of the final bracket.
    pub bracket_hi: f64,
    /// Function value at `root`.
    pub residual: f64,
}

#[derive(Debug, Error)]
pub enum QuadratureError {
    #[error("invalid range [{lo}, {hi}]")]
    BadRange { lo: f64, hi: f64 },
    #[error("function value at {at} is not finite")]
    NonFinite { at: f64 },
    #[error(
        "subdivision budget exhausted; partial value {:e} with error estimate {:e}",
        partial.value,
        partial.abs_error_estimate
    )]
    BudgetExhausted { partial: IntegralEstimate },
    #[error("no sign change on [{lo}, {hi}]: g(lo) = {g_lo:e}, g(hi) = {g_hi:e}")]
    NoBracket {
        lo: f64,
        hi: f64,
        g_lo: f64,
        g_hi: f64,
    },
}

/// Integrates `f` over `[lo, hi]`, where `hi` may be `f64::INFINITY`.
///
/// Terminates once the summed error estimate drops below
/// `max(rel_tol * |value|, 1e-14)`. For semi-infinite ranges the integrand
/// must vanish at infinity; points mapped beyond the largest finite `f64`
/// contribute zero.
///
/// Subdivision is driven purely by per-panel error estimates, so a feature
/// narrower than the node spacing of a panel whose samples all read zero is
/// invisible and stays unrefined. Place known kinks and narrow supports at
/// interval endpoints and integrate the pieces separately.
pub fn integrate<F>(f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<IntegralEstimate, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    assert!(rel_tol > 0.0 && rel_tol.is_finite(), "rel_tol must be positive");
    if !lo.is_finite() || hi.is_nan() || lo >= hi {
        return Err(QuadratureError::BadRange { lo, hi });
    }
    if hi == f64::INFINITY {
        let g = |u: f64| {
            let w = 1.0 - u;
            let t = lo + u / w;
            if !t.is_finite() {
                return 0.0;
            }
            let y = f(t);
            if y == 0.0 {
                0.0
            } else {
                y / (w * w)
            }
        };
        adaptive(&g, 0.0, 1.0, rel_tol)
    } else {
        adaptive(&f, lo, hi, rel_tol)
    }
}

/// Finds a root of `g` on `[lo, hi]` by bisection.
///
/// Requires a sign change (or a root at an endpoint). The bracket shrinks
/// until its width is at most `rel_tol * max(|lo|, |hi|, 1)` or hits
/// floating-point resolution.
pub fn find_root<G>(g: G, lo: f64, hi: f64, rel_tol: f64) -> Result<RootResult, QuadratureError>
where
    G: Fn(f64) -> f64,
{
    assert!(rel_tol > 0.0 && rel_tol.is_finite(), "rel_tol must be positive");
    if !lo.is_finite() || !hi.is_finite() || lo > hi {
        return Err(QuadratureError::BadRange { lo, hi });
    }
    let eval = |x: f64| -> Result<f64, QuadratureError> {
        let y = g(x);
        if y.is_nan() {
            Err(QuadratureError::NonFinite { at: x })
        } else {
            Ok(y)
        }
    };
    let g_lo = eval(lo)?;
    if g_lo == 0.0 {
        return Ok(RootResult { root: lo, bracket_lo: lo, bracket_hi: lo, residual: 0.0 });
    }
    let g_hi = eval(hi)?;
    if g_hi == 0.0 {
        return Ok(RootResult { root: hi, bracket_lo: hi, bracket_hi: hi, residual: 0.0 });
    }
    if g_lo.signum() == g_hi.signum() {
        return Err(QuadratureError::NoBracket { lo, hi, g_lo, g_hi });
    }

    let tol = rel_tol * lo.abs().max(hi.abs()).max(1.0);
    let (mut a, mut b, mut g_a) = (lo, hi, g_lo);
    loop {
        let mid = 0.5 * (a + b);
        if b - a <= tol || !(a < mid && mid < b) {
            let residual = eval(mid)?;
            return Ok(RootResult { root: mid, bracket_lo: a, bracket_hi: b, residual });
        }
        let g_mid = eval(mid)?;
        if g_mid == 0.0 {
            return Ok(RootResult { root: mid, bracket_lo: a, bracket_hi: b, residual: 0.0 });
        }
        if g_mid.signum() == g_a.signum() {
            a = mid;
            g_a = g_mid;
        } else {
            b = mid;
        }
    }
}

/// One subinterval with its Gauss-Kronrod value and error estimate.
#[derive(Debug, Clone, Copy)]
struct Cell {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

// Worst error first; ties broken by position so heap order is reproducible.
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then(self.lo.total_cmp(&other.lo).reverse())
    }
}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Cell {}

fn adaptive<F>(f: &F, lo: f64, hi: f64, rel_tol: f64) -> Result<IntegralEstimate, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    let mut evaluations = 0usize;
    let mut heap = BinaryHeap::new();
    // Cells narrowed down to floating-point resolution; no longer refinable.
    let mut spent: Vec<Cell> = Vec::new();

    let first = gk15(f, lo, hi, &mut evaluations)?;
    let mut value = first.value;
    let mut error = first.error;
    heap.push(first);

    loop {
        if error <= (rel_tol * value.abs()).max(ABS_TOL_FLOOR) {
            return Ok(finalize(heap, spent, evaluations));
        }
        let cell_count = heap.len() + spent.len();
        let Some(worst) = heap.pop() else {
            // Every cell is at resolution limit yet the target is unmet.
            return Err(QuadratureError::BudgetExhausted {
                partial: finalize(heap, spent, evaluations),
            });
        };
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(worst.lo < mid && mid < worst.hi) {
            spent.push(worst);
            continue;
        }
        if cell_count + 1 > SUBDIVISION_BUDGET {
            heap.push(worst);
            return Err(QuadratureError::BudgetExhausted {
                partial: finalize(heap, spent, evaluations),
            });
        }
        let left = gk15(f, worst.lo, mid, &mut evaluations)?;
        let right = gk15(f, mid, worst.hi, &mut evaluations)?;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
}

/// Re-sums the surviving cells in position order, removing the drift the
/// incremental running totals accumulate.
fn finalize(heap: BinaryHeap<Cell>, mut spent: Vec<Cell>, evaluations: usize) -> IntegralEstimate {
    let mut cells = heap.into_vec();
    cells.append(&mut spent);
    cells.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    IntegralEstimate {
        value: cells.iter().map(|c| c.value).sum(),
        abs_error_estimate: cells.iter().map(|c| c.error).sum(),
        evaluations,
    }
}

// 15-point Kronrod abscissae on [-1, 1]; odd indices are the embedded
// 7-point Gauss rule.
const XGK: [f64; 15] = [
    -0.991_455_371_120_812_6,
    -0.949_107_912_342_758_5,
    -0.864_864_423_359_769_1,
    -0.741_531_185_599_394_4,
    -0.586_087_235_467_691_1,
    -0.405_845_151_377_397_2,
    -0.207_784_955_007_898_5,
    0.0,
    0.207_784_955_007_898_5,
    0.405_845_151_377_397_2,
    0.586_087_235_467_691_1,
    0.741_531_185_599_394_4,
    0.864_864_423_359_769_1,
    0.949_107_912_342_758_5,
    0.991_455_371_120_812_6,
];
const WGK: [f64; 15] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
    0.204_432_940_075_298_89,
    0.190_350_578_064_785_4,
    0.169_004_726_639_267_9,
    0.140_653_259_715_525_92,
    0.104_790_010_322_250_18,
    0.063_092_092_629_978_56,
    0.022_935_322_010_529_224,
];
const WG: [f64; 7] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
    0.381_830_050_505_118_9,
    0.279_705_391_489_276_64,
    0.129_484_966_168_869_7,
];

fn gk15<F>(f: &F, lo: f64, hi: f64, evaluations: &mut usize) -> Result<Cell, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut fv = [0.0f64; 15];
    for (i, x) in XGK.iter().enumerate() {
        let t = center + half * x;
        let y = f(t);
        if !y.is_finite() {
            return Err(QuadratureError::NonFinite { at: t });
        }
        fv[i] = y;
    }
    *evaluations += 15;

    let mut resk = 0.0;
    let mut resabs = 0.0;
    for i in 0..15 {
        resk += WGK[i] * fv[i];
        resabs += WGK[i] * fv[i].abs();
    }
    let mut resg = 0.0;
    for j in 0..7 {
        resg += WG[j] * fv[2 * j + 1];
    }
    let mean = 0.5 * resk;
    let mut resasc = 0.0;
    for i in 0..15 {
        resasc += WGK[i] * (fv[i] - mean).abs();
    }

    let value = resk * half;
    let error = rescale_error((resk - resg) * half, resabs * half, resasc * half);
    Ok(Cell { lo, hi, value, error })
}

/// Standard Kronrod error model: the raw `|K - G|` difference measures the
/// Gauss error, so it is damped by the 1.5 power before being trusted, and
/// floored at the roundoff level of the absolute integral.
fn rescale_error(raw: f64, resabs: f64, resasc: f64) -> f64 {
    let mut err = raw.abs();
    if resasc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / resasc).powf(1.5);
        err = if scale < 1.0 { resasc * scale } else { resasc };
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    err
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_mass_is_one() {
        let est = integrate(|t: f64| (-t).exp(), 0.0, f64::INFINITY, 1e-10).unwrap();
        assert_relative_eq!(est.value, 1.0, max_relative = 1e-10);
        assert!(est.evaluations >= 15);
    }

    #[test]
    fn exponential_mean_is_one() {
        let est = integrate(|t: f64| t * (-t).exp(), 0.0, f64::INFINITY, 1e-10).unwrap();
        assert_relative_eq!(est.value, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn truncated_exponential_mean_matches_closed_form() {
        let lo = std::f64::consts::LN_2;
        let est = integrate(|t: f64| t * (-t).exp(), lo, f64::INFINITY, 1e-10).unwrap();
        // Closed form (1 + lo) e^(-lo) = (1 + ln 2)/2.
        assert_relative_eq!(est.value, (1.0 + lo) / 2.0, max_relative = 1e-9);
    }

    #[test]
    fn single_panel_suffices_for_low_degree_polynomials() {
        let est = integrate(|x| x.powi(5), 0.0, 1.0, 1e-8).unwrap();
        assert_relative_eq!(est.value, 1.0 / 6.0, max_relative = 1e-14);
        assert_eq!(est.evaluations, 15);
    }

    #[test]
    fn reciprocal_square_maps_to_constant_under_substitution() {
        // 1/(1+t)^2 on [0, inf) becomes the constant 1 on [0, 1).
        let est = integrate(|t: f64| (1.0 + t).powi(-2), 0.0, f64::INFINITY, 1e-10).unwrap();
        assert_relative_eq!(est.value, 1.0, max_relative = 1e-13);
        assert_eq!(est.evaluations, 15);
    }

    #[test]
    fn splitting_the_range_is_additive() {
        let f = |t: f64| (1.5 * t).sin().powi(2) * (-t).exp();
        let whole = integrate(f, 0.0, 9.0, 1e-10).unwrap().value;
        for split in [0.003, 1.0, 4.567, 8.99] {
            let a = integrate(f, 0.0, split, 1e-10).unwrap();
            let b = integrate(f, split, 9.0, 1e-10).unwrap();
            let tol = 2.0 * (a.abs_error_estimate + b.abs_error_estimate).max(1e-14);
            assert!(
                (a.value + b.value - whole).abs() <= tol,
                "split at {split}: {} + {} != {whole}",
                a.value,
                b.value
            );
        }
    }

    #[test]
    fn unresolvable_oscillation_exhausts_budget_with_partial_value() {
        // Resolving sin(1e6 x) needs far more than the interval budget.
        let err = integrate(|x: f64| (1e6 * x).sin(), 0.0, 1.0, 1e-14).unwrap_err();
        match err {
            QuadratureError::BudgetExhausted { partial } => {
                assert!(partial.value.is_finite());
                assert!(partial.abs_error_estimate > 0.0);
                assert!(partial.evaluations > 100_000);
            }
            other => panic!("expected budget exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn overflowing_integrand_is_reported_as_non_finite() {
        // 1/t is not integrable at 0; refinement drives t into overflow.
        let err = integrate(|t: f64| 1.0 / t, 0.0, 1.0, 1e-10).unwrap_err();
        assert!(matches!(err, QuadratureError::NonFinite { .. }));
    }

    #[test]
    fn nan_from_integrand_is_reported() {
        let err = integrate(|t: f64| (t - 0.5).ln(), 0.0, 1.0, 1e-8).unwrap_err();
        assert!(matches!(err, QuadratureError::NonFinite { .. }));
    }

    #[test]
    fn integration_is_deterministic() {
        let run = || integrate(|t: f64| (t.cos() + 1.1).ln() * (-t).exp(), 0.0, f64::INFINITY, 1e-10).unwrap();
        let a = run();
        let b = run();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.abs_error_estimate.to_bits(), b.abs_error_estimate.to_bits());
        assert_eq!(a.evaluations, b.evaluations);
    }

    #[test]
    fn bisection_finds_sqrt_two() {
        let r = find_root(|x| x * x - 2.0, 1.0, 2.0, 1e-10).unwrap();
        assert_relative_eq!(r.root, std::f64::consts::SQRT_2, max_relative = 1e-9);
        assert!(r.bracket_lo <= r.root && r.root <= r.bracket_hi);
        assert!(r.residual.abs() < 1e-8);
    }

    #[test]
    fn bisection_hits_exact_zero_of_identity() {
        let r = find_root(|x| x, -1.0, 1.0, 1e-10).unwrap();
        assert_eq!(r.root, 0.0);
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn bisection_finds_ln_two() {
        let r = find_root(|x: f64| (-x).exp() - 0.5, 0.0, 2.0, 1e-10).unwrap();
        assert_relative_eq!(r.root, std::f64::consts::LN_2, max_relative = 1e-9);
    }

    #[test]
    fn endpoint_root_is_returned_directly() {
        let r = find_root(|x| x - 1.0, 1.0, 2.0, 1e-10).unwrap();
        assert_eq!(r.root, 1.0);
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn same_sign_endpoints_are_rejected() {
        let err = find_root(|x| x * x + 1.0, 1.0, 2.0, 1e-10).unwrap_err();
        assert!(matches!(err, QuadratureError::NoBracket { .. }));
    }
}
