//! Service-time distributions with exact truncated moments.
//!
//! The exponential family (standard, shifted, deterministic) uses closed-form
//! moment integrals; arbitrary densities fall back to adaptive quadrature.
//! Every law carries its shift `c`, the largest constant with `X >= c` almost
//! surely.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{AoiError, Result};
use crate::quad;

/// Truncation probabilities at or below this are treated as degenerate:
/// the cutoff policy would preempt (numerically) every upload.
pub const P_MIN: f64 = 1e-12;

/// Tail mass below which an infinite upper limit is replaced by a finite one
/// for quadrature-backed densities.
const TAIL_MASS: f64 = 1e-12;

/// Density with support `[c, inf)` evaluated through a callback.
///
/// The constructor locates a finite tail limit holding all but `1e-12` of the
/// mass and builds a shifted-exponential rejection envelope for sampling.
#[derive(Clone)]
pub struct GenericDensity {
    pdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    shift_c: f64,
    tail_limit: f64,
    env_rate: f64,
    env_scale: f64,
}

impl GenericDensity {
    pub fn new<F>(pdf: F, shift_c: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(shift_c >= 0.0) {
            return Err(AoiError::Config(format!(
                "generic density shift must be nonnegative, got {shift_c}"
            )));
        }
        let pdf: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(pdf);
        // Double the upper limit until the remaining tail mass is negligible.
        let mut hi = shift_c + 1.0;
        let mut mass = quad::integrate(&|x| pdf(x), shift_c, hi)?;
        let mut doublings = 0;
        while 1.0 - mass > TAIL_MASS {
            let next = shift_c + 2.0 * (hi - shift_c);
            mass += quad::integrate(&|x| pdf(x), hi, next)?;
            hi = next;
            doublings += 1;
            if doublings > 60 {
                return Err(AoiError::Config(
                    "generic density does not accumulate unit mass; \
                     is the pdf normalized with finite moments?"
                        .into(),
                ));
            }
        }
        if (mass - 1.0).abs() > 1e-6 {
            return Err(AoiError::Config(format!(
                "generic density integrates to {mass}, expected 1"
            )));
        }
        // Shifted-exponential envelope for rejection sampling. Rate from the
        // mean scale, amplitude from a grid scan with headroom.
        let m1 = quad::integrate(&|x| x * pdf(x), shift_c, hi)?;
        let scale = (m1 - shift_c).max(1e-6);
        let env_rate = 1.0 / scale;
        let n = 4096;
        let mut ratio_max = 0.0f64;
        for i in 0..=n {
            let x = shift_c + (hi - shift_c) * i as f64 / n as f64;
            let env = env_rate * (-env_rate * (x - shift_c)).exp();
            if env > 0.0 {
                ratio_max = ratio_max.max(pdf(x) / env);
            }
        }
        Ok(Self {
            pdf,
            shift_c,
            tail_limit: hi,
            env_rate,
            env_scale: ratio_max * 1.5,
        })
    }

    fn pdf(&self, x: f64) -> f64 {
        if x < self.shift_c {
            0.0
        } else {
            (self.pdf)(x)
        }
    }
}

impl fmt::Debug for GenericDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenericDensity")
            .field("shift_c", &self.shift_c)
            .field("tail_limit", &self.tail_limit)
            .finish()
    }
}

/// A service-time law `X` with shift `c` (the largest constant with
/// `X >= c` a.s.).
#[derive(Debug, Clone)]
pub enum ServiceDistribution {
    /// `Exp(rate)` on `[0, inf)`; `c = 0`.
    Exponential { rate: f64 },
    /// `c + Exp(rate)` on `[c, inf)`; `c > 0`.
    ShiftedExponential { rate: f64, shift: f64 },
    /// Point mass at `value`; `c = value`. Analytic edge-case generator:
    /// every epoch quantity collapses to a hand-computable value.
    Deterministic { value: f64 },
    /// Arbitrary density on `[c, inf)` via quadrature.
    Generic(GenericDensity),
}

/// Moments of the delivered age `Y = (X | X <= gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TruncatedAgeMoments {
    pub gamma: f64,
    /// `p = P(X <= gamma)`.
    pub p: f64,
    /// `E[Y]`.
    pub ey: f64,
    /// `E[Y^2]`.
    pub ey2: f64,
}

impl ServiceDistribution {
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(AoiError::Config(format!(
                "exponential rate must be positive and finite, got {rate}"
            )));
        }
        Ok(Self::Exponential { rate })
    }

    pub fn shifted_exponential(rate: f64, shift: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(AoiError::Config(format!(
                "shifted exponential rate must be positive and finite, got {rate}"
            )));
        }
        if !(shift > 0.0) || !shift.is_finite() {
            return Err(AoiError::Config(format!(
                "shifted exponential shift must be positive and finite, got {shift}"
            )));
        }
        Ok(Self::ShiftedExponential { rate, shift })
    }

    pub fn deterministic(value: f64) -> Result<Self> {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(AoiError::Config(format!(
                "deterministic value must be nonnegative and finite, got {value}"
            )));
        }
        Ok(Self::Deterministic { value })
    }

    /// The shift `c`.
    pub fn shift_c(&self) -> f64 {
        match self {
            Self::Exponential { .. } => 0.0,
            Self::ShiftedExponential { shift, .. } => *shift,
            Self::Deterministic { value } => *value,
            Self::Generic(g) => g.shift_c,
        }
    }

    /// `E[X]`.
    pub fn mean(&self) -> Result<f64> {
        match self {
            Self::Exponential { rate } => Ok(1.0 / rate),
            Self::ShiftedExponential { rate, shift } => Ok(shift + 1.0 / rate),
            Self::Deterministic { value } => Ok(*value),
            Self::Generic(g) => quad::integrate(&|x| x * g.pdf(x), g.shift_c, g.tail_limit),
        }
    }

    /// `E[X^2]`.
    pub fn second_moment(&self) -> Result<f64> {
        match self {
            Self::Exponential { rate } => Ok(2.0 / (rate * rate)),
            Self::ShiftedExponential { rate, shift } => {
                Ok(shift * shift + 2.0 * shift / rate + 2.0 / (rate * rate))
            }
            Self::Deterministic { value } => Ok(value * value),
            Self::Generic(g) => quad::integrate(&|x| x * x * g.pdf(x), g.shift_c, g.tail_limit),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Self::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
            Self::ShiftedExponential { rate, shift } => {
                if x < *shift {
                    0.0
                } else {
                    rate * (-rate * (x - shift)).exp()
                }
            }
            Self::Deterministic { .. } => f64::NAN, // point mass has no density
            Self::Generic(g) => g.pdf(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_infinite() && x > 0.0 {
            return 1.0;
        }
        match self {
            Self::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Self::ShiftedExponential { rate, shift } => {
                if x < *shift {
                    0.0
                } else {
                    -(-rate * (x - shift)).exp_m1()
                }
            }
            Self::Deterministic { value } => {
                if x >= *value {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Generic(g) => {
                if x <= g.shift_c {
                    0.0
                } else if x >= g.tail_limit {
                    1.0
                } else {
                    quad::integrate(&|t| g.pdf(t), g.shift_c, x).unwrap_or(f64::NAN)
                }
            }
        }
    }

    /// `p = P(X <= gamma)`; errors with [`AoiError::TruncationMassZero`]
    /// when the cutoff policy would be degenerate.
    pub fn truncation_prob(&self, gamma: f64) -> Result<f64> {
        self.check_gamma(gamma)?;
        let p = if gamma.is_infinite() { 1.0 } else { self.cdf(gamma) };
        if p <= P_MIN {
            return Err(AoiError::TruncationMassZero {
                gamma,
                p,
                p_min: P_MIN,
            });
        }
        Ok(p)
    }

    /// Moments of `Y = (X | X <= gamma)` under the truncated density
    /// `f_Y(y) = f_X(y) / p` on `[c, gamma]`.
    pub fn truncated_moments(&self, gamma: f64) -> Result<TruncatedAgeMoments> {
        let p = self.truncation_prob(gamma)?;
        let (ey, ey2) = if gamma.is_infinite() {
            (self.mean()?, self.second_moment()?)
        } else {
            let (_, m1, m2) = self.partial_raw_moments(self.shift_c(), gamma)?;
            (m1 / p, m2 / p)
        };
        Ok(TruncatedAgeMoments { gamma, p, ey, ey2 })
    }

    /// Unnormalized partial moments `(I0, I1, I2)` with
    /// `Ik = integral of y^k f_X(y) dy over [a, b]`.
    ///
    /// Closed forms for the exponential family, quadrature otherwise.
    /// `b` may be infinite.
    pub fn partial_raw_moments(&self, a: f64, b: f64) -> Result<(f64, f64, f64)> {
        if b <= a {
            return Ok((0.0, 0.0, 0.0));
        }
        match self {
            Self::Exponential { rate } => Ok(exp_raw_moments(*rate, a.max(0.0), b)),
            Self::ShiftedExponential { rate, shift } => {
                // Substitute z = y - shift and expand (z + shift)^k.
                let lo = (a - shift).max(0.0);
                let hi = if b.is_infinite() { b } else { b - shift };
                let (i0, i1, i2) = exp_raw_moments(*rate, lo, hi);
                let c = *shift;
                Ok((i0, i1 + c * i0, i2 + 2.0 * c * i1 + c * c * i0))
            }
            Self::Deterministic { value } => {
                let v = *value;
                if a <= v && v <= b {
                    Ok((1.0, v, v * v))
                } else {
                    Ok((0.0, 0.0, 0.0))
                }
            }
            Self::Generic(g) => {
                let lo = a.max(g.shift_c);
                let hi = if b.is_infinite() { g.tail_limit } else { b.min(g.tail_limit) };
                let i0 = quad::integrate(&|y| g.pdf(y), lo, hi)?;
                let i1 = quad::integrate(&|y| y * g.pdf(y), lo, hi)?;
                let i2 = quad::integrate(&|y| y * y * g.pdf(y), lo, hi)?;
                Ok((i0, i1, i2))
            }
        }
    }

    /// Draw one service time. Inverse-CDF for the exponential family,
    /// rejection from the enclosing shifted exponential for generic laws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Exponential { rate } => sample_exp(rng, *rate),
            Self::ShiftedExponential { rate, shift } => shift + sample_exp(rng, *rate),
            Self::Deterministic { value } => *value,
            Self::Generic(g) => loop {
                let x = g.shift_c + sample_exp(rng, g.env_rate);
                let env = g.env_scale * g.env_rate * (-g.env_rate * (x - g.shift_c)).exp();
                if rng.gen::<f64>() * env <= g.pdf(x) {
                    return x;
                }
            },
        }
    }

    fn check_gamma(&self, gamma: f64) -> Result<()> {
        if gamma.is_nan() || gamma < self.shift_c() {
            return Err(AoiError::Domain(format!(
                "cutoff gamma = {gamma} must satisfy gamma >= c = {}",
                self.shift_c()
            )));
        }
        Ok(())
    }
}

/// `(I0, I1, I2)` for `Exp(rate)` over `[a, b]`, `0 <= a <= b <= inf`.
fn exp_raw_moments(rate: f64, a: f64, b: f64) -> (f64, f64, f64) {
    let r = rate;
    let term = |y: f64| {
        // (e^{-ry}, (y + 1/r) e^{-ry}, (y^2 + 2y/r + 2/r^2) e^{-ry})
        if y.is_infinite() {
            return (0.0, 0.0, 0.0);
        }
        let e = (-r * y).exp();
        (
            e,
            (y + 1.0 / r) * e,
            (y * y + 2.0 * y / r + 2.0 / (r * r)) * e,
        )
    };
    let (ea, e1a, e2a) = term(a);
    let (eb, e1b, e2b) = term(b);
    (ea - eb, e1a - e1b, e2a - e2b)
}

fn sample_exp<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    // U in [0, 1); 1 - U in (0, 1] keeps ln away from zero.
    let u: f64 = rng.gen();
    -(1.0 - u).ln() / rate
}

/// Parse a distribution token: `kind:key=value[,key=value]*`.
///
/// Kinds: `exp:rate=R`, `sexp:rate=R,c=C`, `det:c=C`.
pub fn parse_token(token: &str) -> Result<ServiceDistribution> {
    let (kind, rest) = match token.split_once(':') {
        Some(parts) => parts,
        None => {
            return Err(AoiError::Config(format!(
                "distribution token `{token}` missing `kind:` prefix"
            )))
        }
    };
    let mut pairs = Vec::new();
    for item in rest.split(',') {
        let (key, value) = item.split_once('=').ok_or_else(|| {
            AoiError::Config(format!("malformed `key=value` item `{item}` in `{token}`"))
        })?;
        let value: f64 = value.parse().map_err(|_| {
            AoiError::Config(format!("value for `{key}` in `{token}` is not a number"))
        })?;
        if pairs.iter().any(|(k, _)| *k == key) {
            return Err(AoiError::Config(format!(
                "duplicate key `{key}` in `{token}`"
            )));
        }
        pairs.push((key, value));
    }
    let take = |pairs: &[(&str, f64)], key: &str| -> Result<f64> {
        pairs
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| AoiError::Config(format!("token `{token}` is missing key `{key}`")))
    };
    let expect_keys = |pairs: &[(&str, f64)], allowed: &[&str]| -> Result<()> {
        for (k, _) in pairs {
            if !allowed.contains(k) {
                return Err(AoiError::Config(format!(
                    "unknown key `{k}` for kind `{kind}` in `{token}`"
                )));
            }
        }
        Ok(())
    };
    match kind {
        "exp" => {
            expect_keys(&pairs, &["rate"])?;
            ServiceDistribution::exponential(take(&pairs, "rate")?)
        }
        "sexp" => {
            expect_keys(&pairs, &["rate", "c"])?;
            ServiceDistribution::shifted_exponential(take(&pairs, "rate")?, take(&pairs, "c")?)
        }
        "det" => {
            expect_keys(&pairs, &["c"])?;
            ServiceDistribution::deterministic(take(&pairs, "c")?)
        }
        other => Err(AoiError::Config(format!(
            "unknown distribution kind `{other}`"
        ))),
    }
}

impl ServiceDistribution {
    /// Canonical config token for the parametric kinds; `None` for generic
    /// densities, which have no textual form.
    pub fn token(&self) -> Option<String> {
        match self {
            Self::Exponential { rate } => Some(format!("exp:rate={rate}")),
            Self::ShiftedExponential { rate, shift } => {
                Some(format!("sexp:rate={rate},c={shift}"))
            }
            Self::Deterministic { value } => Some(format!("det:c={value}")),
            Self::Generic(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exp1() -> ServiceDistribution {
        ServiceDistribution::exponential(1.0).unwrap()
    }

    #[test]
    fn truncation_prob_exponential() {
        // p = 1 - e^{-gamma}; oracle: numerical integration of the pdf.
        let d = exp1();
        let p = d.truncation_prob(1.0).unwrap();
        assert!((p - 0.632_120_558_829).abs() < 1e-9, "p = {p}");
        let p_quad = quad::integrate(&|x| d.pdf(x), 0.0, 1.0).unwrap();
        assert!((p - p_quad).abs() < 1e-9);
    }

    #[test]
    fn truncation_at_shift_is_degenerate() {
        let d = ServiceDistribution::shifted_exponential(1.0, 0.5).unwrap();
        match d.truncation_prob(0.5) {
            Err(AoiError::TruncationMassZero { .. }) => {}
            other => panic!("expected TruncationMassZero, got {other:?}"),
        }
    }

    #[test]
    fn deterministic_mass_below_cutoff() {
        let d = ServiceDistribution::deterministic(2.0).unwrap();
        assert_eq!(d.truncation_prob(3.0).unwrap(), 1.0);
        assert_eq!(d.truncation_prob(2.0).unwrap(), 1.0);
    }

    #[test]
    fn gamma_below_shift_is_domain_error() {
        let d = ServiceDistribution::deterministic(2.0).unwrap();
        assert!(matches!(d.truncation_prob(1.0), Err(AoiError::Domain(_))));
    }

    #[test]
    fn truncated_moments_exponential() {
        // E[Y] = (1 - 2e^{-1})/(1 - e^{-1}); oracle value frozen from
        // numerical integration: 0.418023293131.
        let m = exp1().truncated_moments(1.0).unwrap();
        assert!((m.ey - 0.418_023_293_131).abs() < 1e-9, "ey = {}", m.ey);
        assert!((m.ey2 - 0.254_069_879_392).abs() < 1e-9, "ey2 = {}", m.ey2);
    }

    #[test]
    fn truncated_moments_shifted_exponential_closed_form() {
        let c = 0.7;
        let g = 2.3;
        let m = ServiceDistribution::shifted_exponential(1.0, c)
            .unwrap()
            .truncated_moments(g)
            .unwrap();
        let q = (-(g - c)).exp();
        let ey = (1.0 + c - (1.0 + g) * q) / (1.0 - q);
        let ey2 = (2.0 + 2.0 * c + c * c - (2.0 + 2.0 * g + g * g) * q) / (1.0 - q);
        assert!((m.ey - ey).abs() < 1e-12);
        assert!((m.ey2 - ey2).abs() < 1e-12);
    }

    #[test]
    fn truncated_moments_deterministic() {
        let m = ServiceDistribution::deterministic(2.0)
            .unwrap()
            .truncated_moments(3.0)
            .unwrap();
        assert_eq!(m.ey, 2.0);
        assert_eq!(m.ey2, 4.0);
    }

    fn as_generic(d: &ServiceDistribution) -> ServiceDistribution {
        let d2 = d.clone();
        ServiceDistribution::Generic(
            GenericDensity::new(move |x| d2.pdf(x), d.shift_c()).unwrap(),
        )
    }

    #[test]
    fn closed_form_agrees_with_quadrature_randomized() {
        // 50 randomized (parameters, gamma) pairs per continuous kind.
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for _ in 0..25 {
            let rate = 0.3 + 2.0 * rng.gen::<f64>();
            let c = 0.1 + 1.5 * rng.gen::<f64>();
            for d in [
                ServiceDistribution::exponential(rate).unwrap(),
                ServiceDistribution::shifted_exponential(rate, c).unwrap(),
            ] {
                let gamma = d.shift_c() + 0.2 + 4.0 * rng.gen::<f64>();
                let exact = d.truncated_moments(gamma).unwrap();
                let qm = as_generic(&d).truncated_moments(gamma).unwrap();
                assert!(
                    (exact.p - qm.p).abs() / exact.p < 1e-8,
                    "p mismatch: {} vs {}",
                    exact.p,
                    qm.p
                );
                assert!((exact.ey - qm.ey).abs() / exact.ey < 1e-8);
                assert!((exact.ey2 - qm.ey2).abs() / exact.ey2 < 1e-8);
            }
        }
    }

    #[test]
    fn moments_continuous_in_gamma() {
        let d = exp1();
        let delta = 1e-6;
        for g in [0.3, 1.0, 4.0] {
            let a = d.truncated_moments(g).unwrap();
            let b = d.truncated_moments(g + delta).unwrap();
            assert!((a.ey - b.ey).abs() < 1e-5);
            assert!((a.ey2 - b.ey2).abs() < 1e-5);
        }
    }

    #[test]
    fn infinite_gamma_recovers_untruncated_moments() {
        for d in [
            exp1(),
            ServiceDistribution::shifted_exponential(2.0, 0.4).unwrap(),
            ServiceDistribution::deterministic(1.3).unwrap(),
        ] {
            let m = d.truncated_moments(f64::INFINITY).unwrap();
            assert_eq!(m.p, 1.0);
            assert!((m.ey - d.mean().unwrap()).abs() < 1e-12);
            assert!((m.ey2 - d.second_moment().unwrap()).abs() < 1e-12);
        }
        // Large finite gamma converges to the same limit.
        let d = exp1();
        let m = d.truncated_moments(60.0).unwrap();
        assert!((m.ey - 1.0).abs() < 1e-10);
        assert!((m.ey2 - 2.0).abs() < 1e-10);
    }

    #[test]
    fn moment_invariants_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let rate = 0.2 + 3.0 * rng.gen::<f64>();
            let c = 0.05 + rng.gen::<f64>();
            let d = ServiceDistribution::shifted_exponential(rate, c).unwrap();
            let gamma = c + 0.05 + 5.0 * rng.gen::<f64>();
            let m = d.truncated_moments(gamma).unwrap();
            assert!(m.p > 0.0 && m.p <= 1.0);
            assert!(c <= m.ey && m.ey <= gamma, "c={c} ey={} gamma={gamma}", m.ey);
            assert!(m.ey2 >= m.ey * m.ey - 1e-12);
        }
    }

    #[test]
    fn generic_density_rejects_unnormalized_pdf() {
        assert!(GenericDensity::new(|x: f64| 2.0 * (-x).exp(), 0.0).is_err());
    }

    #[test]
    fn generic_sampling_matches_moments() {
        let g = GenericDensity::new(|x: f64| (-(x - 0.5)).exp(), 0.5).unwrap();
        let d = ServiceDistribution::Generic(g);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| d.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.5).abs() < 0.02, "mean = {mean}");
    }

    #[test]
    fn parse_token_accepts_grammar() {
        assert!(matches!(
            parse_token("exp:rate=1").unwrap(),
            ServiceDistribution::Exponential { rate } if rate == 1.0
        ));
        assert!(matches!(
            parse_token("sexp:rate=1,c=0.5").unwrap(),
            ServiceDistribution::ShiftedExponential { rate, shift }
                if rate == 1.0 && shift == 0.5
        ));
        assert!(matches!(
            parse_token("det:c=2").unwrap(),
            ServiceDistribution::Deterministic { value } if value == 2.0
        ));
    }

    #[test]
    fn parse_token_rejects_garbage() {
        for bad in [
            "",
            "exp",
            "exp:",
            "exp:rate",
            "exp:rate=x",
            "exp:rate=1,rate=2",
            "exp:rate=0",
            "exp:rate=-1",
            "exp:c=1",
            "sexp:rate=1",
            "sexp:rate=1,c=0",
            "det:c=-1",
            "norm:mu=0",
            "exp:rate=inf",
        ] {
            assert!(parse_token(bad).is_err(), "accepted `{bad}`");
        }
    }

    #[test]
    fn token_round_trip() {
        for t in ["exp:rate=1", "sexp:rate=0.5,c=1.5", "det:c=2"] {
            let d = parse_token(t).unwrap();
            assert_eq!(d.token().unwrap(), t);
        }
    }
}
