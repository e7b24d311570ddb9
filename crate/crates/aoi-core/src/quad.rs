//! Adaptive Simpson quadrature with an embedded error estimate.
//!
//! Tolerances are an order tighter than the bisection that consumes the
//! resulting moments (see [`ABS_TOL`] / [`REL_TOL`]).

use crate::error::{AoiError, Result};

/// Default absolute tolerance for moment integrals.
pub const ABS_TOL: f64 = 1e-10;
/// Default relative tolerance for moment integrals.
pub const REL_TOL: f64 = 1e-9;

const MAX_DEPTH: u32 = 60;

/// Integrate `f` over `[a, b]` with the default moment tolerances.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<f64> {
    integrate_tol(f, a, b, ABS_TOL, REL_TOL)
}

/// Integrate `f` over `[a, b]` to the given absolute and relative tolerance.
pub fn integrate_tol<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() {
        return Err(AoiError::QuadratureFailure {
            a,
            b,
            reason: "non-finite integration bounds".into(),
        });
    }
    if b <= a {
        return Ok(0.0);
    }
    // Seed with a coarse magnitude estimate so the relative tolerance has
    // something to compare against on the first subdivision.
    let coarse = simpson(f, a, b);
    let scale = coarse.abs().max(abs_tol);
    let tol = abs_tol.max(rel_tol * scale);
    let m = 0.5 * (a + b);
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    let value = adaptive(f, a, b, tol, coarse, left, right, MAX_DEPTH)?;
    if !value.is_finite() {
        return Err(AoiError::QuadratureFailure {
            a,
            b,
            reason: "integral is not finite".into(),
        });
    }
    Ok(value)
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
}

#[allow(clippy::too_many_arguments)]
fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    whole: f64,
    left: f64,
    right: f64,
    depth: u32,
) -> Result<f64> {
    let delta = left + right - whole;
    if delta.abs() <= tol {
        // Richardson extrapolation term for the composite estimate.
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(AoiError::QuadratureFailure {
            a,
            b,
            reason: format!("max subdivision depth reached, residual {:e}", delta.abs()),
        });
    }
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let ll = simpson(f, a, lm);
    let lr = simpson(f, lm, m);
    let rl = simpson(f, m, rm);
    let rr = simpson(f, rm, b);
    let half_tol = 0.5 * tol;
    let l = adaptive(f, a, m, half_tol, left, ll, lr, depth - 1)?;
    let r = adaptive(f, m, b, half_tol, right, rl, rr, depth - 1)?;
    Ok(l + r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(&|x: f64| 3.0 * x * x, 0.0, 2.0).unwrap();
        assert!((v - 8.0).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn exponential_tail() {
        let v = integrate(&|x: f64| (-x).exp(), 0.0, 40.0).unwrap();
        assert!((v - 1.0).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(integrate(&|_| 1.0, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_infinite_bounds() {
        assert!(integrate(&|_| 1.0, 0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn kinked_integrand_converges() {
        // |x - 0.3| has a kink; adaptive subdivision must still hit tolerance.
        let v = integrate(&|x: f64| (x - 0.3).abs(), 0.0, 1.0).unwrap();
        let exact = 0.3f64.powi(2) / 2.0 + 0.7f64.powi(2) / 2.0;
        assert!((v - exact).abs() < 1e-10, "got {v}, want {exact}");
    }
}
