//! Ergodic capacity of flat-fading channels under joint peak and average
//! transmit power constraints, with perfect channel state information at
//! both transmitter and receiver.
//!
//! The transmitter observes the channel power gain `t = |h|^2` before
//! choosing its transmit power `P(t)`, subject to an average budget
//! `E[P(t)] <= SNR` and a peak budget `P(t) <= A*SNR`, where `A >= 1` is
//! the peak-to-average power ratio (PAPR). The achieved rate is
//! `E[ln(1 + P(t) * t)]` in nats per channel use; the capacity is that
//! expectation under the optimal feasible policy, which is water-filling
//! clipped at the peak.
//!
//! Module layout:
//! - [`fading`]: gain distributions (Rayleigh, Nakagami-m, tabulated CDFs)
//!   with density, CDF, quantile, and partial-expectation primitives.
//! - [`quadrature`]: adaptive Gauss-Kronrod integration over finite and
//!   semi-infinite ranges, plus bracketed bisection root-finding.
//! - [`allocation`]: the water-filling, peak-capped water-filling, and
//!   On-Off policies and their Lagrange multiplier solvers.
//! - [`capacity`]: exact capacities and rates, low-SNR asymptotic laws,
//!   energy per nat, and the variable-PAPR regime classifier.
//! - [`montecarlo`]: reproducible sampling oracle for rates and average
//!   powers, independent of the quadrature path.

pub mod allocation;
pub mod capacity;
pub mod fading;
pub mod montecarlo;
pub mod quadrature;
mod special;
