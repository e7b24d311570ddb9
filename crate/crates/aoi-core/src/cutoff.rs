//! Outer optimization over the cutoff and regime analysis for the shifted
//! exponential.
//!
//! `lambda*(gamma)` is not known to be unimodal, so a coarse log-spaced grid
//! precedes local golden-section refinement; the result is best-effort rather
//! than a certified global optimum.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{self, solve_lambda_with_stats};
use crate::dist::ServiceDistribution;
use crate::error::{AoiError, Result};

/// Default golden-section refinement width on gamma.
pub const REFINE_WIDTH: f64 = 1e-6;
/// Default number of coarse grid points.
pub const DEFAULT_GRID_POINTS: usize = 200;

/// One evaluated cutoff.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepPoint {
    pub gamma: f64,
    pub lambda_star: f64,
    pub theta: f64,
    pub zero_wait: bool,
}

/// Grid of solved cutoffs plus the refined minimizer.
#[derive(Debug, Clone, Serialize)]
pub struct CutoffSweep {
    pub grid: Vec<SweepPoint>,
    /// Grid points whose solve failed, recorded rather than fatal.
    pub failures: Vec<(f64, String)>,
    pub gamma_star: f64,
    pub lambda_double_star: f64,
    pub theta_star: f64,
    pub zero_wait_star: bool,
    /// The minimizer sat at the lower end of the search range; the true
    /// optimum may be a limit (e.g. an infinitesimal cutoff) rather than an
    /// attained minimum.
    pub at_lower_boundary: bool,
}

fn solve_point(dist: &ServiceDistribution, gamma: f64, zero_wait_only: bool) -> Result<SweepPoint> {
    let stats = analysis::epoch_stats(dist, gamma)?;
    if zero_wait_only {
        Ok(SweepPoint {
            gamma,
            lambda_star: stats.aoi_zero_wait(),
            theta: dist.shift_c(),
            zero_wait: true,
        })
    } else {
        let r = solve_lambda_with_stats(dist, &stats)?;
        Ok(SweepPoint {
            gamma,
            lambda_star: r.lambda_star,
            theta: r.theta,
            zero_wait: r.zero_wait,
        })
    }
}

fn run_sweep(
    dist: &ServiceDistribution,
    gamma_min: f64,
    gamma_max: f64,
    grid_points: usize,
    zero_wait_only: bool,
    refine_width: f64,
) -> Result<CutoffSweep> {
    let c = dist.shift_c();
    if !(c < gamma_min && gamma_min < gamma_max) {
        return Err(AoiError::Config(format!(
            "need c < gamma_min < gamma_max, got c = {c}, range [{gamma_min}, {gamma_max}]"
        )));
    }
    if grid_points < 2 {
        return Err(AoiError::Config(format!(
            "need at least 2 grid points, got {grid_points}"
        )));
    }

    // Log-spaced in gamma - c.
    let lo = (gamma_min - c).ln();
    let hi = (gamma_max - c).ln();
    let gammas: Vec<f64> = (0..grid_points)
        .map(|i| c + (lo + (hi - lo) * i as f64 / (grid_points - 1) as f64).exp())
        .collect();

    // Grid points are independent; merge by index keeps output deterministic.
    let solved: Vec<(f64, Result<SweepPoint>)> = gammas
        .par_iter()
        .map(|&g| (g, solve_point(dist, g, zero_wait_only)))
        .collect();

    let mut grid = Vec::with_capacity(grid_points);
    let mut failures = Vec::new();
    for (g, res) in solved {
        match res {
            Ok(pt) => grid.push(pt),
            Err(e) => failures.push((g, e.to_string())),
        }
    }
    if grid.is_empty() {
        return Err(AoiError::Config(
            "every grid point failed to solve; check the gamma range".into(),
        ));
    }

    let best_idx = grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.lambda_star.total_cmp(&b.1.lambda_star))
        .map(|(i, _)| i)
        .unwrap();

    // Refine between the neighbors of the best grid point.
    let a = if best_idx == 0 { grid[0].gamma } else { grid[best_idx - 1].gamma };
    let b = if best_idx + 1 == grid.len() {
        grid[best_idx].gamma
    } else {
        grid[best_idx + 1].gamma
    };
    let objective = |g: f64| -> f64 {
        solve_point(dist, g, zero_wait_only)
            .map(|pt| pt.lambda_star)
            .unwrap_or(f64::INFINITY)
    };
    let (g_ref, l_ref) = golden_section(&objective, a, b, refine_width);

    let (gamma_star, lambda_double_star) = if l_ref < grid[best_idx].lambda_star {
        (g_ref, l_ref)
    } else {
        (grid[best_idx].gamma, grid[best_idx].lambda_star)
    };
    let best_pt = solve_point(dist, gamma_star, zero_wait_only)?;
    let at_lower_boundary = best_idx == 0 && gamma_star <= grid[0].gamma + refine_width;

    Ok(CutoffSweep {
        grid,
        failures,
        gamma_star,
        lambda_double_star,
        theta_star: best_pt.theta,
        zero_wait_star: best_pt.zero_wait,
        at_lower_boundary,
    })
}

/// Minimize `lambda*(gamma)` over `[gamma_min, gamma_max]` with the full
/// waiting solver at each cutoff.
pub fn optimize_gamma(
    dist: &ServiceDistribution,
    gamma_min: f64,
    gamma_max: f64,
    grid_points: usize,
) -> Result<CutoffSweep> {
    run_sweep(dist, gamma_min, gamma_max, grid_points, false, REFINE_WIDTH)
}

/// As [`optimize_gamma`] with an explicit refinement width.
pub fn optimize_gamma_refined(
    dist: &ServiceDistribution,
    gamma_min: f64,
    gamma_max: f64,
    grid_points: usize,
    refine_width: f64,
) -> Result<CutoffSweep> {
    run_sweep(dist, gamma_min, gamma_max, grid_points, false, refine_width)
}

/// Minimize the zero-wait AoI over the cutoff (waiting disabled).
pub fn optimize_gamma_zero_wait(
    dist: &ServiceDistribution,
    gamma_min: f64,
    gamma_max: f64,
    grid_points: usize,
) -> Result<CutoffSweep> {
    run_sweep(dist, gamma_min, gamma_max, grid_points, true, REFINE_WIDTH)
}

/// Default cutoff search range `[c + 1e-4, c + 20 * scale]` where `scale`
/// is the mean excess `E[X] - c` (1 when the law is degenerate). Truncation
/// mass beyond 20 mean scales is negligible for the exponential family.
pub fn default_gamma_range(dist: &ServiceDistribution) -> Result<(f64, f64)> {
    let c = dist.shift_c();
    let scale = {
        let s = dist.mean()? - c;
        if s > 1e-9 {
            s
        } else {
            1.0
        }
    };
    Ok((c + 1e-4, c + 20.0 * scale))
}

fn golden_section(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, width: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > width {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Boundary cutoff `gamma_bar(c)` of the zero-wait regime for the unit-rate
/// shifted exponential: the unique root of
/// `(1 + gamma - c) e^{-(gamma - c)} = 1 - c^2/2` on `(c, inf)`.
///
/// Defined only for `0 < c < sqrt(2)`; at and above `sqrt(2)` zero-wait is
/// optimal for every cutoff.
pub fn zero_wait_boundary(c: f64) -> Result<f64> {
    let sqrt2 = std::f64::consts::SQRT_2;
    if !(c > 0.0 && c < sqrt2) {
        return Err(AoiError::Domain(format!(
            "gamma_bar(c) is defined only for 0 < c < sqrt(2), got c = {c}"
        )));
    }
    let h = |g: f64| (1.0 + g - c) * (-(g - c)).exp() - (1.0 - 0.5 * c * c);
    // h(c) = c^2/2 > 0 and h decreases to a negative limit; expand then bisect.
    let mut lo = c;
    let mut hi = c + 1.0;
    while h(hi) > 0.0 {
        hi = c + 2.0 * (hi - c);
        if hi - c > 1e6 {
            return Err(AoiError::Domain(format!(
                "failed to bracket gamma_bar for c = {c}"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * (1.0 + hi.abs()) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// AoI of one benchmark policy.
#[derive(Debug, Clone, Serialize)]
pub struct PolicyValue {
    pub name: &'static str,
    pub lambda: f64,
    pub gamma: f64,
    pub theta: f64,
}

/// The four-policy benchmark of the optimal scheme against its ablations.
#[derive(Debug, Clone, Serialize)]
pub struct PolicyComparison {
    pub no_cutoff_zero_wait: PolicyValue,
    pub optimal_cutoff_zero_wait: PolicyValue,
    pub no_cutoff_optimal_wait: PolicyValue,
    pub optimal_cutoff_optimal_wait: PolicyValue,
}

impl PolicyComparison {
    pub fn rows(&self) -> [&PolicyValue; 4] {
        [
            &self.no_cutoff_zero_wait,
            &self.optimal_cutoff_zero_wait,
            &self.no_cutoff_optimal_wait,
            &self.optimal_cutoff_optimal_wait,
        ]
    }

    pub fn best(&self) -> &PolicyValue {
        self.rows()
            .into_iter()
            .min_by(|a, b| a.lambda.total_cmp(&b.lambda))
            .unwrap()
    }
}

/// Evaluate the four benchmark policies with the default cutoff range.
pub fn compare_policies(dist: &ServiceDistribution) -> Result<PolicyComparison> {
    let c = dist.shift_c();
    let (gmin, gmax) = default_gamma_range(dist)?;
    let grid = DEFAULT_GRID_POINTS;

    let inf_stats = analysis::epoch_stats(dist, f64::INFINITY)?;
    let no_cutoff_zero_wait = PolicyValue {
        name: "no cutoff & zero-wait",
        lambda: inf_stats.aoi_zero_wait(),
        gamma: f64::INFINITY,
        theta: c,
    };

    let zw_sweep = optimize_gamma_zero_wait(dist, gmin, gmax, grid)?;
    let optimal_cutoff_zero_wait = PolicyValue {
        name: "optimal cutoff & zero-wait",
        lambda: zw_sweep.lambda_double_star,
        gamma: zw_sweep.gamma_star,
        theta: c,
    };

    let nc = analysis::solve_lambda(dist, f64::INFINITY)?;
    let no_cutoff_optimal_wait = PolicyValue {
        name: "no cutoff & optimal wait",
        lambda: nc.lambda_star,
        gamma: f64::INFINITY,
        theta: nc.theta,
    };

    let full = optimize_gamma(dist, gmin, gmax, grid)?;
    let optimal_cutoff_optimal_wait = PolicyValue {
        name: "optimal cutoff & optimal wait",
        lambda: full.lambda_double_star,
        gamma: full.gamma_star,
        theta: full.theta_star,
    };

    Ok(PolicyComparison {
        no_cutoff_zero_wait,
        optimal_cutoff_zero_wait,
        no_cutoff_optimal_wait,
        optimal_cutoff_optimal_wait,
    })
}

/// Crossover scan of benchmark policies (2) and (3) over a grid of shifts
/// for the shifted exponential with the given rate.
#[derive(Debug, Clone, Serialize)]
pub struct CrossoverPoint {
    pub c: f64,
    pub optimal_cutoff_zero_wait: f64,
    pub no_cutoff_optimal_wait: f64,
}

pub fn crossover_scan(rate: f64, shifts: &[f64]) -> Result<Vec<CrossoverPoint>> {
    shifts
        .iter()
        .map(|&c| {
            let d = ServiceDistribution::shifted_exponential(rate, c)?;
            let (gmin, gmax) = default_gamma_range(&d)?;
            let zw = optimize_gamma_zero_wait(&d, gmin, gmax, DEFAULT_GRID_POINTS)?;
            let nc = analysis::solve_lambda(&d, f64::INFINITY)?;
            Ok(CrossoverPoint {
                c,
                optimal_cutoff_zero_wait: zw.lambda_double_star,
                no_cutoff_optimal_wait: nc.lambda_star,
            })
        })
        .collect()
}
