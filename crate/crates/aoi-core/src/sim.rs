//! Seedable Monte Carlo simulation of the epoch process.
//!
//! Service draws are unconditional and preempted on `X > gamma` rather than
//! sampled from the truncated law, mirroring the physical process and
//! exercising the geometric upload count directly. The long-run average AoI
//! is the renewal-reward ratio of summed epoch areas over summed epoch
//! lengths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dist::ServiceDistribution;
use crate::error::{AoiError, Result};

/// Number of batches for the batch-means standard error.
pub const DEFAULT_BATCHES: usize = 100;

/// A `(gamma, theta)` pair: constant cutoff plus waiting threshold.
/// `theta = c` encodes zero-wait.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Policy {
    pub gamma: f64,
    pub theta: f64,
}

impl Policy {
    /// Validated against the shift of the law it will drive: `c <= theta <= gamma`.
    pub fn new(gamma: f64, theta: f64, c: f64) -> Result<Self> {
        if !(gamma > c) {
            return Err(AoiError::Config(format!(
                "cutoff gamma = {gamma} must exceed c = {c}"
            )));
        }
        if !(theta >= c && theta <= gamma) {
            return Err(AoiError::Config(format!(
                "threshold theta = {theta} must lie in [c, gamma] = [{c}, {gamma}]"
            )));
        }
        Ok(Self { gamma, theta })
    }

    pub fn zero_wait(gamma: f64, c: f64) -> Result<Self> {
        Self::new(gamma, c, c)
    }

    pub fn is_zero_wait(&self, c: f64) -> bool {
        self.theta <= c
    }
}

/// One simulated epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    /// Starting age `Ybar`.
    pub start_age: f64,
    /// Waiting time `W = max(theta - Ybar, 0)`.
    pub wait: f64,
    /// Uploads `N >= 1`; `N - 1` preemptions.
    pub uploads: u64,
    /// Busy period `T = (N - 1) gamma + Y`.
    pub busy: f64,
    /// Ending age `Y`, the completed service time.
    pub end_age: f64,
    /// Epoch length `L = W + T`.
    pub length: f64,
    /// AoI area `Q = Ybar L + L^2 / 2`.
    pub area: f64,
}

/// Empirical time-average AoI with a batch-means confidence scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimReport {
    pub avg_aoi: f64,
    /// Epochs contributing to the estimate (post-warmup).
    pub epochs: u64,
    /// Batch-means delta-method standard error of the ratio estimator.
    pub stderr: f64,
    pub seed: u64,
}

/// Counter-based RNG; streams derived from `seed` plus a replication index
/// are independent and reproducible.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// Warmup used by the CLI when none is given: 1% of epochs, at least 100.
pub fn default_warmup(n_epochs: u64) -> u64 {
    (n_epochs / 100).max(100).min(n_epochs.saturating_sub(1))
}

/// Simulate one epoch starting at age `start_age`.
pub fn sample_epoch<R: Rng + ?Sized>(
    policy: &Policy,
    dist: &ServiceDistribution,
    rng: &mut R,
    start_age: f64,
) -> EpochRecord {
    let wait = (policy.theta - start_age).max(0.0);
    let mut uploads = 1u64;
    let mut busy = 0.0;
    let end_age = loop {
        let x = dist.sample(rng);
        if x > policy.gamma {
            // Preemption: the age keeps rising, the server restarts.
            busy += policy.gamma;
            uploads += 1;
        } else {
            busy += x;
            break x;
        }
    };
    let length = wait + busy;
    EpochRecord {
        start_age,
        wait,
        uploads,
        busy,
        end_age,
        length,
        area: start_age * length + 0.5 * length * length,
    }
}

/// Run a single epoch stream and estimate the average AoI.
///
/// The first `warmup` epochs are discarded; the remainder is split into
/// [`DEFAULT_BATCHES`] batches for the standard error.
pub fn run_simulation(
    policy: &Policy,
    dist: &ServiceDistribution,
    n_epochs: u64,
    seed: u64,
    warmup: u64,
) -> Result<SimReport> {
    if n_epochs < 1000 {
        return Err(AoiError::Config(format!(
            "need at least 1000 epochs, got {n_epochs}"
        )));
    }
    if warmup >= n_epochs {
        return Err(AoiError::Config(format!(
            "warmup {warmup} must be below the epoch count {n_epochs}"
        )));
    }
    let c = dist.shift_c();
    // Re-validate against this distribution.
    Policy::new(policy.gamma, policy.theta, c)?;
    dist.truncation_prob(policy.gamma)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut age = c; // initial age Y0 = c; warmup removes the bias
    for _ in 0..warmup {
        age = sample_epoch(policy, dist, &mut rng, age).end_age;
    }

    let kept = n_epochs - warmup;
    let n_batches = DEFAULT_BATCHES.min(kept as usize);
    let base = kept / n_batches as u64;
    let extra = (kept % n_batches as u64) as usize;

    let mut batch_q = vec![0.0f64; n_batches];
    let mut batch_l = vec![0.0f64; n_batches];
    let mut batch_n = vec![0u64; n_batches];
    for (b, (q, l, n)) in batch_q
        .iter_mut()
        .zip(batch_l.iter_mut().zip(batch_n.iter_mut()))
        .enumerate()
        .map(|(b, (q, (l, n)))| (b, (q, l, n)))
    {
        let size = base + u64::from(b < extra);
        for _ in 0..size {
            let rec = sample_epoch(policy, dist, &mut rng, age);
            age = rec.end_age;
            *q += rec.area;
            *l += rec.length;
        }
        *n = size;
    }

    let total_q: f64 = batch_q.iter().sum();
    let total_l: f64 = batch_l.iter().sum();
    let avg_aoi = total_q / total_l;

    // Delta-method standard error of the ratio from batch means.
    let stderr = if n_batches > 1 {
        let qm: Vec<f64> = batch_q
            .iter()
            .zip(&batch_n)
            .map(|(q, n)| q / *n as f64)
            .collect();
        let lm: Vec<f64> = batch_l
            .iter()
            .zip(&batch_n)
            .map(|(l, n)| l / *n as f64)
            .collect();
        let lbar = lm.iter().sum::<f64>() / n_batches as f64;
        let ss: f64 = qm
            .iter()
            .zip(&lm)
            .map(|(q, l)| {
                let d = q - avg_aoi * l;
                d * d
            })
            .sum();
        (ss / (n_batches as f64 * (n_batches - 1) as f64)).sqrt() / lbar
    } else {
        f64::NAN
    };

    Ok(SimReport {
        avg_aoi,
        epochs: kept,
        stderr,
        seed,
    })
}

/// Sawtooth AoI sample path plus the epoch records that generated it.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    /// Ordered `(time, age)` breakpoints. Age rises at slope 1 between
    /// breakpoints and drops vertically at each update delivery; preemptions
    /// leave no mark on the age curve.
    pub points: Vec<(f64, f64)>,
    pub records: Vec<EpochRecord>,
}

impl Trajectory {
    /// Trapezoid-integrated area under the sample path. Equals the summed
    /// epoch areas exactly (same geometry).
    pub fn area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| {
                let (t0, a0) = w[0];
                let (t1, a1) = w[1];
                0.5 * (a0 + a1) * (t1 - t0)
            })
            .sum()
    }
}

/// Simulate a short, plot-scale sample path.
pub fn export_trajectory(
    policy: &Policy,
    dist: &ServiceDistribution,
    n_epochs: u64,
    seed: u64,
) -> Result<Trajectory> {
    if n_epochs == 0 || n_epochs > 10_000 {
        return Err(AoiError::Config(format!(
            "trajectory epoch count must be in [1, 10000], got {n_epochs}"
        )));
    }
    let c = dist.shift_c();
    Policy::new(policy.gamma, policy.theta, c)?;
    dist.truncation_prob(policy.gamma)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut age = c;
    let mut t = 0.0;
    let mut points = vec![(0.0, age)];
    let mut records = Vec::with_capacity(n_epochs as usize);
    for _ in 0..n_epochs {
        let rec = sample_epoch(policy, dist, &mut rng, age);
        t += rec.length;
        points.push((t, rec.start_age + rec.length));
        points.push((t, rec.end_age));
        age = rec.end_age;
        records.push(rec);
    }
    Ok(Trajectory { points, records })
}
