//! Monte-Carlo oracle for rates and average powers.
//!
//! Gains are drawn by inverse-CDF sampling on uniform streams, one
//! counter-based stream per chunk (ChaCha8 keyed by `(seed, chunk index)`),
//! so estimates are bit-reproducible for a fixed `(seed, samples, chunk)`
//! regardless of how chunks are scheduled across threads. Per-chunk
//! moments use Welford updates and are merged in chunk order.
//!
//! The Nakagami quantile has no closed form and a bisection per draw would
//! dominate the budget, so draws seed from a 1024-cell monotone-cubic
//! quantile table and polish with two Newton steps on the CDF; the outer
//! ~0.2% probability mass falls back to the exact bisection path.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::allocation::PowerPolicy;
use crate::fading::FadingDistribution;

/// Cells in the fast inverse-CDF table.
const TABLE_CELLS: usize = 1024;

/// Sampling plan: all fields are part of the reproducibility key.
#[derive(Debug, Clone, Copy)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    /// Samples per independent stream.
    pub chunk: u64,
}

impl McConfig {
    pub fn new(samples: u64, seed: u64, chunk: u64) -> Self {
        assert!(samples >= 1_000, "need at least 1000 samples, got {samples}");
        assert!(chunk >= 1, "chunk must be positive");
        Self { samples, seed, chunk }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation / sqrt(samples).
    pub std_error: f64,
    pub samples: u64,
}

/// Estimates `E[ln(1 + P(t) t)]` under the policy by simulation.
pub fn estimate_rate(
    dist: &FadingDistribution,
    policy: &PowerPolicy,
    cfg: &McConfig,
) -> McEstimate {
    run(dist, cfg, |t| (policy.power_at(t) * t).ln_1p())
}

/// Estimates `E[P(t)]` under the policy by simulation.
pub fn estimate_avg_power(
    dist: &FadingDistribution,
    policy: &PowerPolicy,
    cfg: &McConfig,
) -> McEstimate {
    run(dist, cfg, |t| policy.power_at(t))
}

fn run<F>(dist: &FadingDistribution, cfg: &McConfig, map: F) -> McEstimate
where
    F: Fn(f64) -> f64 + Sync,
{
    let sampler = GainSampler::new(dist);
    let n_chunks = cfg.samples.div_ceil(cfg.chunk);
    let chunk_of = |k: u64| -> Welford {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(k);
        let count = if k == n_chunks - 1 { cfg.samples - k * cfg.chunk } else { cfg.chunk };
        let mut stats = Welford::default();
        for _ in 0..count {
            let u = unit_uniform(&mut rng);
            stats.push(map(sampler.draw(u)));
        }
        stats
    };

    #[cfg(feature = "parallel")]
    let per_chunk: Vec<Welford> = {
        use rayon::prelude::*;
        (0..n_chunks).into_par_iter().map(chunk_of).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_chunk: Vec<Welford> = (0..n_chunks).map(chunk_of).collect();

    // Order-fixed merge keeps the reduction independent of scheduling.
    let total = per_chunk.into_iter().fold(Welford::default(), Welford::merge);
    let variance = if total.count > 1 { total.m2 / (total.count - 1) as f64 } else { 0.0 };
    McEstimate {
        mean: total.mean,
        std_error: (variance / total.count as f64).sqrt(),
        samples: total.count,
    }
}

/// Uniform in [0, 1) with 53 random bits.
fn unit_uniform<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Self) -> Self {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2
            + other.m2
            + delta * delta * (self.count as f64 * other.count as f64) / count as f64;
        Self { count, mean, m2 }
    }
}

enum GainSampler<'a> {
    /// Closed-form exponential inverse CDF.
    Rayleigh,
    /// Table-seeded Newton inversion of the gamma CDF.
    Table { dist: &'a FadingDistribution, table: QuantileTable },
    /// The distribution's own quantile is already a fast direct inversion.
    Direct(&'a FadingDistribution),
}

impl<'a> GainSampler<'a> {
    fn new(dist: &'a FadingDistribution) -> Self {
        match dist {
            FadingDistribution::Rayleigh => Self::Rayleigh,
            FadingDistribution::Nakagami { .. } => {
                Self::Table { dist, table: QuantileTable::build(dist) }
            }
            FadingDistribution::Tabulated(_) => Self::Direct(dist),
        }
    }

    fn draw(&self, u: f64) -> f64 {
        match self {
            Self::Rayleigh => -(-u).ln_1p(),
            Self::Table { dist, table } => table.invert(dist, u),
            Self::Direct(dist) => dist.quantile(u),
        }
    }
}

/// Quantiles at p = i/1024 with derivatives, for Hermite-seeded inversion.
struct QuantileTable {
    /// t_i = F^-1(i/1024) for i in 1..=1023.
    t: Vec<f64>,
    /// dt/dp = 1/pdf(t_i) at the same knots.
    slope: Vec<f64>,
}

impl QuantileTable {
    fn build(dist: &FadingDistribution) -> Self {
        let (t, slope): (Vec<f64>, Vec<f64>) = (1..TABLE_CELLS)
            .map(|i| {
                let ti = dist.quantile(i as f64 / TABLE_CELLS as f64);
                (ti, 1.0 / dist.pdf(ti))
            })
            .unzip();
        Self { t, slope }
    }

    fn invert(&self, dist: &FadingDistribution, u: f64) -> f64 {
        let h = 1.0 / TABLE_CELLS as f64;
        let cell = (u * TABLE_CELLS as f64) as usize;
        if !(1..TABLE_CELLS - 1).contains(&cell) {
            // Outermost cells: exact inversion (rare, ~0.2% of draws).
            return dist.quantile(u);
        }
        // Hermite seed on [t_{cell-1}, t_cell] (knot i stores p=(i+1)/1024).
        let (lo, hi) = (self.t[cell - 1], self.t[cell]);
        let (d_lo, d_hi) = (self.slope[cell - 1] * h, self.slope[cell] * h);
        let s = u * TABLE_CELLS as f64 - cell as f64;
        let s2 = s * s;
        let s3 = s2 * s;
        let mut t = lo * (2.0 * s3 - 3.0 * s2 + 1.0)
            + d_lo * (s3 - 2.0 * s2 + s)
            + hi * (3.0 * s2 - 2.0 * s3)
            + d_hi * (s3 - s2);
        // Two Newton polish steps on the CDF, clamped to the cell.
        for _ in 0..2 {
            t = (t - (dist.cdf(t) - u) / dist.pdf(t)).clamp(lo, hi);
        }
        t
    }
}
