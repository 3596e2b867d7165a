//! Distributions of the channel power gain `t = |h|^2`.
//!
//! Every capacity formula in this crate consumes a gain law only through
//! four primitives: density, CDF, quantile, and the partial expectation
//! `E[t; t >= lo]`. Three families are supported:
//!
//! - `Rayleigh`: unit-mean exponential gain, `pdf(t) = e^(-t)`.
//! - `Nakagami { m, omega }`: gamma-distributed gain with shape `m` and
//!   mean `omega`, the power gain of a Nakagami-m envelope.
//! - `Tabulated`: a CDF given as `(t, F)` knots, interpolated by a
//!   monotone piecewise cubic with an exponential tail fitted to the last
//!   three knots, so capacity integrals over `[lo, inf)` stay well posed.
//!
//! A tabulated file whose first knot has `F > 0` leaves the mass below it
//! unspecified; an implicit knot `(0, 0)` is prepended so the law stays
//! absolutely continuous instead of carrying an atom.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::quadrature;
use crate::special::{gamma_p, gamma_q, ln_gamma};

/// Number of trailing knots the exponential tail is fitted to.
const TAIL_FIT_KNOTS: usize = 3;

#[derive(Debug, Error)]
pub enum DistributionError {
    #[error("invalid Nakagami parameters: m = {m}, omega = {omega} (both must be positive and finite)")]
    BadNakagami { m: f64, omega: f64 },
    #[error("table line {line}: {reason}")]
    BadTable { line: usize, reason: String },
    #[error("table needs at least {min} data rows, found {found}")]
    TableTooShort { min: usize, found: usize },
    #[error("unknown distribution spec {spec:?} (want rayleigh or nakagami:m=<m>,omega=<omega>)")]
    ParseSpec { spec: String },
    #[error("reading table: {0}")]
    Io(#[from] std::io::Error),
}

/// Distribution of the channel power gain.
#[derive(Debug, Clone)]
pub enum FadingDistribution {
    /// Unit-mean exponential gain.
    Rayleigh,
    /// Gamma gain with shape `m` and mean `omega`.
    Nakagami { m: f64, omega: f64 },
    /// Gain law defined by a tabulated CDF.
    Tabulated(TabulatedCdf),
}

/// Parses the closed-form families: `rayleigh` or
/// `nakagami:m=<m>,omega=<omega>` (fields in either order). Tabulated
/// laws come from files and are constructed explicitly instead.
impl std::str::FromStr for FadingDistribution {
    type Err = DistributionError;

    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        if spec == "rayleigh" {
            return Ok(Self::Rayleigh);
        }
        let parse_err = || DistributionError::ParseSpec { spec: spec.to_owned() };
        let Some(args) = spec.strip_prefix("nakagami:") else {
            return Err(parse_err());
        };
        let mut m = None;
        let mut omega = None;
        for part in args.split(',') {
            let (key, value) = part.split_once('=').ok_or_else(parse_err)?;
            let value: f64 = value.trim().parse().map_err(|_| parse_err())?;
            match key.trim() {
                "m" => m = Some(value),
                "omega" => omega = Some(value),
                _ => return Err(parse_err()),
            }
        }
        match (m, omega) {
            (Some(m), Some(omega)) => Self::nakagami(m, omega),
            _ => Err(parse_err()),
        }
    }
}

impl FadingDistribution {
    /// Validating constructor for the Nakagami family.
    pub fn nakagami(m: f64, omega: f64) -> Result<Self, DistributionError> {
        if !(m > 0.0 && omega > 0.0 && m.is_finite() && omega.is_finite()) {
            return Err(DistributionError::BadNakagami { m, omega });
        }
        Ok(Self::Nakagami { m, omega })
    }

    /// Left edge of the gain support.
    pub fn support_lo(&self) -> f64 {
        match self {
            Self::Rayleigh | Self::Nakagami { .. } => 0.0,
            Self::Tabulated(tab) => tab.t[0],
        }
    }

    /// Mean gain `E[t]`.
    pub fn mean(&self) -> f64 {
        match self {
            Self::Rayleigh => 1.0,
            Self::Nakagami { omega, .. } => *omega,
            Self::Tabulated(_) => self.tail_mean(0.0),
        }
    }

    /// Density of the gain at `t`.
    ///
    /// For Nakagami with `m < 1` the density diverges at the support edge;
    /// `pdf(0)` returns `f64::INFINITY` there. Panics on negative or
    /// non-finite `t`.
    pub fn pdf(&self, t: f64) -> f64 {
        assert!(t >= 0.0 && t.is_finite(), "pdf domain error: t = {t}");
        match self {
            Self::Rayleigh => (-t).exp(),
            Self::Nakagami { m, omega } => {
                let rate = m / omega;
                if t == 0.0 {
                    return match m.partial_cmp(&1.0).expect("validated params") {
                        std::cmp::Ordering::Less => f64::INFINITY,
                        std::cmp::Ordering::Equal => rate,
                        std::cmp::Ordering::Greater => 0.0,
                    };
                }
                ((m - 1.0) * t.ln() + m * rate.ln() - rate * t - ln_gamma(*m)).exp()
            }
            Self::Tabulated(tab) => tab.pdf_at(t),
        }
    }

    /// CDF `P(gain <= t)`. Panics on negative or non-finite `t`.
    pub fn cdf(&self, t: f64) -> f64 {
        assert!(t >= 0.0 && t.is_finite(), "cdf domain error: t = {t}");
        match self {
            Self::Rayleigh => -(-t).exp_m1(),
            Self::Nakagami { m, omega } => gamma_p(*m, m / omega * t),
            Self::Tabulated(tab) => tab.cdf_at(t),
        }
    }

    /// Complementary CDF `P(gain > t)`, computed in complementary form so
    /// deep tails keep relative accuracy.
    pub fn tail_probability(&self, lo: f64) -> f64 {
        assert!(lo >= 0.0 && lo.is_finite(), "tail_probability domain error: lo = {lo}");
        match self {
            Self::Rayleigh => (-lo).exp(),
            Self::Nakagami { m, omega } => gamma_q(*m, m / omega * lo),
            Self::Tabulated(tab) => tab.tail_probability_at(lo),
        }
    }

    /// Smallest `t` with `F(t) >= p`, for `p` in `[0, 1)`.
    ///
    /// Panics for `p >= 1` (the support is unbounded) and for negative or
    /// non-finite `p`.
    pub fn quantile(&self, p: f64) -> f64 {
        assert!((0.0..1.0).contains(&p), "quantile domain error: p = {p}");
        if p == 0.0 {
            return self.support_lo();
        }
        match self {
            Self::Rayleigh => -(-p).ln_1p(),
            Self::Nakagami { .. } => {
                // Bracket by doubling, then bisect on log-gain so the
                // tolerance is relative in t even for roots near zero
                // (small shape parameters put low quantiles at ~1e-15).
                let mut hi = self.mean().max(f64::MIN_POSITIVE);
                let mut lo = hi;
                let mut expansions = 0;
                let mut budget = || {
                    expansions += 1;
                    assert!(expansions <= 2200, "quantile bracket expansion failed at p = {p}");
                };
                while self.cdf(hi) < p {
                    hi *= 2.0;
                    budget();
                }
                while self.cdf(lo) > p {
                    lo *= 0.5;
                    budget();
                }
                quadrature::find_root(|y| self.cdf(y.exp()) - p, lo.ln(), hi.ln(), 1e-12)
                    .expect("CDF is continuous and brackets p")
                    .root
                    .exp()
            }
            Self::Tabulated(tab) => tab.quantile_at(p),
        }
    }

    /// Partial expectation `E[t; t >= lo]` (unnormalized).
    pub fn tail_mean(&self, lo: f64) -> f64 {
        assert!(lo >= 0.0 && lo.is_finite(), "tail_mean domain error: lo = {lo}");
        match self {
            // Closed form (1 + lo) e^(-lo).
            Self::Rayleigh => (1.0 + lo) * (-lo).exp(),
            // Gamma identity: E[t; t >= lo] = omega * Q(m + 1, lo * m / omega).
            Self::Nakagami { m, omega } => omega * gamma_q(m + 1.0, m / omega * lo),
            Self::Tabulated(tab) => tab.tail_mean_at(lo),
        }
    }
}

/// Tabulated CDF with monotone cubic interpolation and an exponential tail.
#[derive(Debug, Clone)]
pub struct TabulatedCdf {
    /// Strictly increasing knot positions.
    t: Vec<f64>,
    /// CDF values at the knots, strictly increasing, in [0, 1).
    f: Vec<f64>,
    /// Interpolant slopes at the knots (Fritsch-Carlson), all >= 0.
    slope: Vec<f64>,
    /// Tail survival model beyond the last knot: 1 - F(t) = c e^(-b t).
    tail_rate: f64,
    tail_coeff: f64,
}

impl TabulatedCdf {
    /// Builds from `(t, F)` pairs already in memory.
    ///
    /// Requirements: at least 3 pairs, both columns strictly increasing,
    /// first `F` in `[0, 1)`, all `F < 1`. A leading `(0, 0)` knot is
    /// prepended when the first pair has `F > 0`.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self, DistributionError> {
        Self::build(pairs.to_vec(), &mut (0..).skip(1))
    }

    /// Parses the plain-text table format: one `t F` pair per line,
    /// `#` starts a comment, blank lines are ignored.
    pub fn from_text(text: &str) -> Result<Self, DistributionError> {
        let mut pairs = Vec::new();
        let mut data_lines = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split_whitespace();
            let (Some(a), Some(b), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(DistributionError::BadTable {
                    line: idx + 1,
                    reason: format!("expected exactly two columns, got: {line:?}"),
                });
            };
            let parse = |s: &str| -> Result<f64, DistributionError> {
                s.parse().map_err(|_| DistributionError::BadTable {
                    line: idx + 1,
                    reason: format!("not a number: {s:?}"),
                })
            };
            pairs.push((parse(a)?, parse(b)?));
            data_lines.push(idx + 1);
        }
        Self::build(pairs, &mut data_lines.into_iter())
    }

    /// Reads and parses a table file.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, DistributionError> {
        Self::from_text(&fs::read_to_string(path)?)
    }

    fn build(
        mut pairs: Vec<(f64, f64)>,
        source_lines: &mut dyn Iterator<Item = usize>,
    ) -> Result<Self, DistributionError> {
        let lines: Vec<usize> = source_lines.take(pairs.len()).collect();
        let at = |i: usize| lines.get(i).copied().unwrap_or(i + 1);
        if pairs.len() < TAIL_FIT_KNOTS {
            return Err(DistributionError::TableTooShort {
                min: TAIL_FIT_KNOTS,
                found: pairs.len(),
            });
        }
        for (i, &(t, f)) in pairs.iter().enumerate() {
            if !t.is_finite() || !f.is_finite() || t < 0.0 {
                return Err(DistributionError::BadTable {
                    line: at(i),
                    reason: format!("non-finite or negative entry ({t}, {f})"),
                });
            }
            if !(0.0..1.0).contains(&f) {
                return Err(DistributionError::BadTable {
                    line: at(i),
                    reason: format!("F = {f} outside [0, 1)"),
                });
            }
            if i > 0 {
                let (tp, fp) = pairs[i - 1];
                if t <= tp || f <= fp {
                    return Err(DistributionError::BadTable {
                        line: at(i),
                        reason: format!(
                            "columns must be strictly increasing: ({tp}, {fp}) then ({t}, {f})"
                        ),
                    });
                }
            }
        }
        if pairs[0].1 > 0.0 {
            if pairs[0].0 == 0.0 {
                return Err(DistributionError::BadTable {
                    line: at(0),
                    reason: "first knot at t = 0 must have F = 0".into(),
                });
            }
            pairs.insert(0, (0.0, 0.0));
        }

        let t: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let f: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let slope = fritsch_carlson_slopes(&t, &f);

        // Tail model anchored at the last knot: fit the decay rate of
        // ln(1 - F) over the trailing knots with the intercept pinned so
        // the survival function is continuous at t[n-1].
        let n = t.len();
        let y: Vec<f64> = (n - TAIL_FIT_KNOTS..n).map(|i| (1.0 - f[i]).ln()).collect();
        let tn = t[n - 1];
        let yn = y[TAIL_FIT_KNOTS - 1];
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, i) in (n - TAIL_FIT_KNOTS..n).enumerate() {
            let dt = tn - t[i];
            num += (y[k] - yn) * dt;
            den += dt * dt;
        }
        let tail_rate = num / den;
        debug_assert!(tail_rate > 0.0, "strictly increasing F forces a decaying tail");
        let tail_coeff = (1.0 - f[n - 1]) * (tail_rate * tn).exp();

        Ok(Self { t, f, slope, tail_rate, tail_coeff })
    }

    /// Index of the knot cell containing `x`; requires in-range `x`.
    fn cell_of(&self, x: f64) -> usize {
        debug_assert!(x >= self.t[0] && x <= *self.t.last().unwrap());
        // partition_point returns the first knot strictly above x.
        self.t.partition_point(|&k| k <= x).clamp(1, self.t.len() - 1) - 1
    }

    fn hermite(&self, cell: usize, x: f64) -> (f64, f64) {
        let (t0, t1) = (self.t[cell], self.t[cell + 1]);
        let (f0, f1) = (self.f[cell], self.f[cell + 1]);
        let (m0, m1) = (self.slope[cell], self.slope[cell + 1]);
        let h = t1 - t0;
        let s = (x - t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let value = f0 * (2.0 * s3 - 3.0 * s2 + 1.0)
            + h * m0 * (s3 - 2.0 * s2 + s)
            + f1 * (-2.0 * s3 + 3.0 * s2)
            + h * m1 * (s3 - s2);
        let deriv = (f0 * (6.0 * s2 - 6.0 * s)
            + h * m0 * (3.0 * s2 - 4.0 * s + 1.0)
            + f1 * (6.0 * s - 6.0 * s2)
            + h * m1 * (3.0 * s2 - 2.0 * s))
            / h;
        (value, deriv)
    }

    fn cdf_at(&self, x: f64) -> f64 {
        let n = self.t.len();
        if x <= self.t[0] {
            0.0
        } else if x >= self.t[n - 1] {
            1.0 - self.tail_probability_at(x)
        } else {
            self.hermite(self.cell_of(x), x).0.clamp(0.0, 1.0)
        }
    }

    fn pdf_at(&self, x: f64) -> f64 {
        let n = self.t.len();
        if x < self.t[0] {
            0.0
        } else if x >= self.t[n - 1] {
            self.tail_rate * self.tail_coeff * (-self.tail_rate * x).exp()
        } else {
            self.hermite(self.cell_of(x), x).1.max(0.0)
        }
    }

    fn tail_probability_at(&self, x: f64) -> f64 {
        let n = self.t.len();
        if x <= self.t[0] {
            1.0
        } else if x >= self.t[n - 1] {
            self.tail_coeff * (-self.tail_rate * x).exp()
        } else {
            (1.0 - self.hermite(self.cell_of(x), x).0).clamp(0.0, 1.0)
        }
    }

    fn quantile_at(&self, p: f64) -> f64 {
        debug_assert!((0.0..1.0).contains(&p));
        let n = self.t.len();
        if p <= self.f[0] {
            return self.t[0];
        }
        if p >= self.f[n - 1] {
            // Invert the exponential tail.
            return ((self.tail_coeff / (1.0 - p)).ln() / self.tail_rate).max(self.t[n - 1]);
        }
        // partition_point gives the first knot with F > p.
        let cell = self.f.partition_point(|&v| v <= p).clamp(1, n - 1) - 1;
        self.invert_cell(cell, p)
    }

    /// Solves H(x) = p inside one knot cell: Newton from the secant seed,
    /// falling back to bisection whenever a step leaves the bracket.
    fn invert_cell(&self, cell: usize, p: f64) -> f64 {
        let (mut lo, mut hi) = (self.t[cell], self.t[cell + 1]);
        let mut x = lo + (hi - lo) * (p - self.f[cell]) / (self.f[cell + 1] - self.f[cell]);
        for _ in 0..60 {
            let (value, deriv) = self.hermite(cell, x);
            let err = value - p;
            if err.abs() <= 1e-15 {
                return x;
            }
            if err > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let step_ok = deriv > 0.0;
            let next = if step_ok { x - err / deriv } else { f64::NAN };
            x = if step_ok && next > lo && next < hi {
                next
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 1e-15 * hi.abs().max(1.0) {
                return x;
            }
        }
        x
    }

    fn tail_mean_at(&self, lo: f64) -> f64 {
        let n = self.t.len();
        let tn = self.t[n - 1];
        if lo >= tn {
            // Closed form for the exponential tail.
            let s = self.tail_coeff * (-self.tail_rate * lo).exp();
            return lo * s + s / self.tail_rate;
        }
        // E[t; t >= lo] = lo S(lo) + integral of S over [lo, tn] + tail.
        let start = lo.max(self.t[0]);
        let below_support = if lo < self.t[0] { self.t[0] - lo } else { 0.0 };
        let body = quadrature::integrate(|x| self.tail_probability_at(x), start, tn, 1e-12)
            .expect("bounded piecewise-cubic survival function integrates within budget")
            .value;
        let tail = self.tail_coeff * (-self.tail_rate * tn).exp() / self.tail_rate;
        lo * self.tail_probability_at(lo) + below_support + body + tail
    }
}

/// Fritsch-Carlson monotone slopes: weighted harmonic mean of adjacent
/// secants in the interior, one-sided parabolic estimates at the ends,
/// clamped so the interpolant never overshoots the data.
fn fritsch_carlson_slopes(t: &[f64], f: &[f64]) -> Vec<f64> {
    let n = t.len();
    let h: Vec<f64> = (0..n - 1).map(|i| t[i + 1] - t[i]).collect();
    let d: Vec<f64> = (0..n - 1).map(|i| (f[i + 1] - f[i]) / h[i]).collect();
    let mut m = vec![0.0; n];
    for i in 1..n - 1 {
        if d[i - 1] <= 0.0 || d[i] <= 0.0 {
            m[i] = 0.0;
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
        }
    }
    m[0] = edge_slope(h[0], h[1], d[0], d[1]);
    m[n - 1] = edge_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    m
}

fn edge_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}
