//! Independent oracles for cross-checking the analytic solvers.
//!
//! Everything here deliberately avoids the production code paths: the
//! water-filling multiplier is re-solved on a dense trapezoid grid, and
//! the capped allocation is re-derived by running projected-gradient
//! ascent on a discretized instance. Agreement between these and the
//! quadrature-based solvers is what the oracle tests assert.

use fadcap_core::fading::FadingDistribution;

/// Water-filling multiplier solved by bisection on a 10^6-point trapezoid
/// evaluation of `E[[1/l - 1/t]+] = snr`. No adaptive quadrature involved.
pub fn dense_grid_lambda0(dist: &FadingDistribution, snr: f64) -> f64 {
    const POINTS: usize = 1_000_000;
    let lo_t = dist.support_lo();
    let hi_t = dist.quantile(1.0 - 1e-12);
    let step = (hi_t - lo_t) / (POINTS - 1) as f64;
    let grid: Vec<(f64, f64)> = (0..POINTS)
        .map(|i| {
            let t = lo_t + step * i as f64;
            (t, dist.pdf(t))
        })
        .collect();

    let avg_power = |lambda: f64| -> f64 {
        let mut acc = 0.0;
        let mut prev = 0.0;
        for &(t, pdf) in &grid {
            let integrand = if t > lambda { (1.0 / lambda - 1.0 / t) * pdf } else { 0.0 };
            acc += 0.5 * (prev + integrand) * step;
            prev = integrand;
        }
        acc
    };

    let (mut lo, mut hi) = (1e-6, 1e3);
    assert!(avg_power(lo) > snr && avg_power(hi) < snr, "oracle bracket failed");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if avg_power(mid) > snr {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// A distribution coarsened to `n` cells of equal probability, each
/// represented by its conditional mean gain.
#[derive(Debug, Clone)]
pub struct DiscreteGains {
    pub t: Vec<f64>,
    pub mass: Vec<f64>,
}

pub fn discretize(dist: &FadingDistribution, n: usize) -> DiscreteGains {
    let edges: Vec<f64> = (0..n).map(|k| dist.quantile(k as f64 / n as f64)).collect();
    let tails: Vec<f64> = edges.iter().map(|&e| dist.tail_mean(e)).collect();
    let t = (0..n)
        .map(|i| {
            let upper_tail = if i + 1 < n { tails[i + 1] } else { 0.0 };
            n as f64 * (tails[i] - upper_tail)
        })
        .collect();
    DiscreteGains { t, mass: vec![1.0 / n as f64; n] }
}

/// `sum_i m_i ln(1 + p_i t_i)` on the discrete instance.
pub fn discrete_objective(gains: &DiscreteGains, powers: &[f64]) -> f64 {
    gains
        .t
        .iter()
        .zip(&gains.mass)
        .zip(powers)
        .map(|((&t, &m), &p)| m * (p * t).ln_1p())
        .sum()
}

/// The capped water-filling multiplier of the discrete instance itself:
/// bisection on `sum_i m_i min([1/l - 1/t_i]+, peak) = snr`.
pub fn discrete_capped_multiplier(gains: &DiscreteGains, snr: f64, peak: f64) -> f64 {
    let spent = |lambda: f64| -> f64 {
        gains
            .t
            .iter()
            .zip(&gains.mass)
            .map(|(&t, &m)| m * (1.0 / lambda - 1.0 / t).clamp(0.0, peak))
            .sum()
    };
    let mut lo = 1e-9;
    // When the cap never binds the root sits above 1/peak: expand.
    let mut hi = 1.0 / peak.min(1e9);
    while spent(hi) > snr {
        hi *= 2.0;
        assert!(hi.is_finite(), "discrete multiplier bracket failed high");
    }
    assert!(spent(lo) >= snr, "discrete multiplier bracket failed low");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if spent(mid) > snr {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Powers of the capped water-filling form with an explicit multiplier,
/// evaluated at the discrete gains.
pub fn capped_form_powers(gains: &DiscreteGains, lambda: f64, peak: f64) -> Vec<f64> {
    gains.t.iter().map(|&t| (1.0 / lambda - 1.0 / t).clamp(0.0, peak)).collect()
}

/// Projected-gradient (FISTA) ascent of the discrete rate subject to the
/// average and peak power constraints. Returns the optimizing powers.
pub fn projected_gradient(gains: &DiscreteGains, snr: f64, peak: f64, iters: usize) -> Vec<f64> {
    let n = gains.t.len();
    assert!(peak >= snr, "instance infeasible: peak {peak} below budget {snr}");
    // Gradient Lipschitz bound: |d^2/dp^2 m ln(1+pt)| <= m t^2.
    let lipschitz = gains
        .t
        .iter()
        .zip(&gains.mass)
        .map(|(&t, &m)| m * t * t)
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let step = 1.0 / lipschitz;

    let project = |y: &[f64]| -> Vec<f64> {
        // Euclidean projection onto {0 <= p <= peak, sum m_i p_i = snr}
        // by bisection on the dual shift.
        let spent = |nu: f64| -> f64 {
            y.iter()
                .zip(&gains.mass)
                .map(|(&yi, &m)| m * (yi - nu * m).clamp(0.0, peak))
                .sum::<f64>()
        };
        let y_max = y.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let m_min = gains.mass.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let (mut lo, mut hi) = (-(peak + y_max) / m_min, (peak + y_max) / m_min);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if spent(mid) > snr {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let nu = 0.5 * (lo + hi);
        y.iter().zip(&gains.mass).map(|(&yi, &m)| (yi - nu * m).clamp(0.0, peak)).collect()
    };

    let mut p = project(&vec![snr; n]);
    let mut momentum = p.clone();
    let mut theta = 1.0f64;
    for _ in 0..iters {
        let grad: Vec<f64> = gains
            .t
            .iter()
            .zip(&gains.mass)
            .zip(&momentum)
            .map(|((&t, &m), &q)| m * t / (1.0 + q * t))
            .collect();
        let trial: Vec<f64> =
            momentum.iter().zip(&grad).map(|(&q, &g)| q + step * g).collect();
        let next = project(&trial);
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let beta = (theta - 1.0) / theta_next;
        momentum = next.iter().zip(&p).map(|(&a, &b)| a + beta * (a - b)).collect();
        theta = theta_next;
        p = next;
    }
    p
}
