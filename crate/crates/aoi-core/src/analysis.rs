//! Epoch statistics under a cutoff policy and the optimal waiting threshold.
//!
//! For a fixed cutoff `gamma`, the number of uploads per epoch is geometric
//! with parameter `p = P(X <= gamma)`, every preempted upload contributes
//! exactly `gamma` to the busy period, and the delivered age is the truncated
//! service time `Y`. The optimal waiting policy is a threshold policy
//! `w(t) = max(theta - t, 0)` with `theta = lambda* - E[T]`, where `lambda*`
//! is the fixed point of the fractional-programming auxiliary function
//! `g(lambda) = E[Q] - lambda E[L]`.

use serde::Serialize;

use crate::dist::{ServiceDistribution, TruncatedAgeMoments};
use crate::error::{AoiError, Result};

/// Absolute tolerance on the bisection interval for `lambda*`.
pub const TOL_LAMBDA: f64 = 1e-9;
/// Tolerance on `|g(lambda)|` at termination.
pub const TOL_G: f64 = 1e-8;
/// Bisection iteration cap; far beyond what the tolerances need.
pub const MAX_ITER: u32 = 200;

/// Cutoff-dependent epoch scalars for one `(distribution, gamma)` pair.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EpochStats {
    pub gamma: f64,
    pub moments: TruncatedAgeMoments,
    /// `E[T]`, expected busy period.
    pub et: f64,
    /// `E[T^2]`.
    pub et2: f64,
}

/// Solver output for one cutoff.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolveResult {
    /// Optimal long-run average AoI for the given cutoff.
    pub lambda_star: f64,
    /// Waiting threshold `lambda* - E[T]`, canonicalized to `c` for
    /// zero-wait solutions.
    pub theta: f64,
    /// Whether the zero-wait optimality condition held.
    pub zero_wait: bool,
    pub iterations: u32,
    /// `|g(lambda*)|` at termination.
    pub residual: f64,
    /// Bisection bracket, when a bisection ran.
    pub bracket: Option<(f64, f64)>,
}

/// Busy-period moments for a cutoff policy:
/// `E[T] = (1/p - 1) gamma + E[Y]` and
/// `E[T^2] = ((2-p)/p^2 - 2/p + 1) gamma^2 + 2 (1/p - 1) gamma E[Y] + E[Y^2]`.
pub fn epoch_stats(dist: &ServiceDistribution, gamma: f64) -> Result<EpochStats> {
    let moments = dist.truncated_moments(gamma)?;
    let TruncatedAgeMoments { p, ey, ey2, .. } = moments;
    let (et, et2) = if gamma.is_infinite() {
        // No preemption: T = X.
        (ey, ey2)
    } else {
        let r = 1.0 / p - 1.0;
        let et = r * gamma + ey;
        let et2 = ((2.0 - p) / (p * p) - 2.0 / p + 1.0) * gamma * gamma
            + 2.0 * r * gamma * ey
            + ey2;
        (et, et2)
    };
    Ok(EpochStats {
        gamma,
        moments,
        et,
        et2,
    })
}

impl EpochStats {
    /// Zero-wait optimality test:
    /// `(1/2 (1/p - 1) gamma^2 + 1/2 E[Y^2]) / E[T] <= c`.
    pub fn zero_wait_optimal(&self, c: f64) -> bool {
        let num = if self.gamma.is_infinite() {
            0.5 * self.moments.ey2
        } else {
            0.5 * (1.0 / self.moments.p - 1.0) * self.gamma * self.gamma
                + 0.5 * self.moments.ey2
        };
        num / self.et <= c
    }

    /// Average AoI of the zero-wait policy: `E[Y] + E[T^2] / (2 E[T])`.
    pub fn aoi_zero_wait(&self) -> f64 {
        self.moments.ey + 0.5 * self.et2 / self.et
    }

    /// Closed-form `lambda` of the always-wait stationarity condition,
    /// `E[Y] + sqrt(1-p)/p * gamma`. A consistency bound: its threshold
    /// never exceeds `gamma`, and it lower-bounds `lambda*`.
    pub fn always_wait_lambda(&self) -> f64 {
        if self.gamma.is_infinite() {
            self.moments.ey
        } else {
            let p = self.moments.p;
            self.moments.ey + (1.0 - p).sqrt() / p * self.gamma
        }
    }
}

/// Expectations of the waiting terms under threshold `theta`:
/// `(E[w(Y)], E[Y w(Y)], E[w(Y)^2])` against the truncated density `f_Y`.
///
/// The integrand is supported on `[c, min(theta, gamma)]`; beyond the
/// threshold the waiting terms vanish, so the kink never enters an integral.
fn waiting_expectations(
    dist: &ServiceDistribution,
    stats: &EpochStats,
    theta: f64,
) -> Result<(f64, f64, f64)> {
    let c = dist.shift_c();
    let b = theta.min(stats.gamma).max(c);
    if b <= c && !matches!(dist, ServiceDistribution::Deterministic { .. }) {
        return Ok((0.0, 0.0, 0.0));
    }
    let (i0, i1, i2) = dist.partial_raw_moments(c, b)?;
    let p = stats.moments.p;
    let (m0, m1, m2) = (i0 / p, i1 / p, i2 / p);
    let ew = theta * m0 - m1;
    let eyw = theta * m1 - m2;
    let ew2 = theta * theta * m0 - 2.0 * theta * m1 + m2;
    // Clip tiny negatives from cancellation near theta = c.
    Ok((ew.max(0.0), eyw.max(0.0), ew2.max(0.0)))
}

/// Ratio `E[Q] / E[L]` under the threshold policy `w(t) = max(theta - t, 0)`.
pub fn policy_ratio(
    dist: &ServiceDistribution,
    stats: &EpochStats,
    theta: f64,
) -> Result<f64> {
    let (ew, eyw, ew2) = waiting_expectations(dist, stats, theta)?;
    let el = ew + stats.et;
    let eq = eyw + stats.moments.ey * stats.et + 0.5 * ew2 + ew * stats.et + 0.5 * stats.et2;
    Ok(eq / el)
}

/// Dinkelbach auxiliary function `g(lambda) = E[Q] - lambda E[L]` with the
/// optimal waiting `w(t) = max(lambda - E[T] - t, 0)` plugged in.
pub fn g_eval(lambda: f64, dist: &ServiceDistribution, stats: &EpochStats) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(AoiError::Domain(format!(
            "candidate AoI lambda = {lambda} must be nonnegative"
        )));
    }
    let theta = lambda - stats.et;
    let (ew, eyw, ew2) = waiting_expectations(dist, stats, theta)?;
    let el = ew + stats.et;
    let eq = eyw + stats.moments.ey * stats.et + 0.5 * ew2 + ew * stats.et + 0.5 * stats.et2;
    Ok(eq - lambda * el)
}

/// Solve for the optimal average AoI at fixed cutoff `gamma`.
///
/// If the zero-wait condition holds the closed form is returned directly;
/// otherwise `g` is bisected over `(E[T] + c, E[T] + gamma]`.
pub fn solve_lambda(dist: &ServiceDistribution, gamma: f64) -> Result<SolveResult> {
    let stats = epoch_stats(dist, gamma)?;
    solve_lambda_with_stats(dist, &stats)
}

/// As [`solve_lambda`], reusing precomputed epoch statistics.
pub fn solve_lambda_with_stats(
    dist: &ServiceDistribution,
    stats: &EpochStats,
) -> Result<SolveResult> {
    let c = dist.shift_c();
    if stats.zero_wait_optimal(c) {
        let lambda = stats.aoi_zero_wait();
        let residual = g_eval(lambda, dist, stats)?.abs();
        return Ok(SolveResult {
            lambda_star: lambda,
            theta: c,
            zero_wait: true,
            iterations: 0,
            residual,
            bracket: None,
        });
    }

    // Open left endpoint per the strict lower bound E[T] + c < lambda*.
    let mut lo = stats.et + c + 1e-12;
    let mut hi = if stats.gamma.is_infinite() {
        // No finite right endpoint without a cutoff; expand until g <= 0.
        let mut step = (stats.et + c).abs().max(1.0);
        let mut hi = lo + step;
        let mut tries = 0;
        while g_eval(hi, dist, stats)? > 0.0 {
            step *= 2.0;
            hi = lo + step;
            tries += 1;
            if tries > 200 {
                return Err(AoiError::BisectionBracketFailure {
                    lo,
                    hi,
                    g_lo: g_eval(lo, dist, stats)?,
                    g_hi: g_eval(hi, dist, stats)?,
                });
            }
        }
        hi
    } else {
        stats.et + stats.gamma
    };
    let bracket = (lo, hi);

    let g_lo = g_eval(lo, dist, stats)?;
    let g_hi = g_eval(hi, dist, stats)?;
    if g_lo <= 0.0 || g_hi > TOL_G {
        return Err(AoiError::BisectionBracketFailure { lo, hi, g_lo, g_hi });
    }

    let mut lambda = hi;
    let mut residual = g_hi.abs();
    let mut iterations = 0;
    while iterations < MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let g_mid = g_eval(mid, dist, stats)?;
        iterations += 1;
        if g_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        lambda = mid;
        residual = g_mid.abs();
        if residual <= TOL_G && (hi - lo) <= TOL_LAMBDA {
            break;
        }
    }

    let theta = (lambda - stats.et).max(c);
    Ok(SolveResult {
        lambda_star: lambda,
        theta,
        zero_wait: false,
        iterations,
        residual,
        bracket: Some(bracket),
    })
}

/// Waiting duration at starting age `t` under threshold `theta`, checked
/// against the age domain `[c, gamma]`.
pub fn waiting_time(theta: f64, t: f64, c: f64, gamma: f64) -> Result<f64> {
    if !(t >= c && t <= gamma) {
        return Err(AoiError::Domain(format!(
            "starting age t = {t} outside [c, gamma] = [{c}, {gamma}]"
        )));
    }
    Ok((theta - t).max(0.0))
}
