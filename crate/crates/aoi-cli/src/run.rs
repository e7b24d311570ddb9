//! Command execution and rendering.
//!
//! Every command produces both a CSV and a JSON rendering of the same run.
//! Both go through the same number formatter ([`fnum`]), so numeric values in
//! the two formats are identical strings, not merely close.

use std::fs;

use serde_json::{json, Value};

use aoi_core::analysis::solve_lambda;
use aoi_core::cutoff::{self, DEFAULT_GRID_POINTS};
use aoi_core::dist::{parse_token, ServiceDistribution};
use aoi_core::error::{AoiError, Result};
use aoi_core::sim::{self, Policy};

use crate::config::{Command, OutputFormat, RunConfig, ThetaArg};

/// Both renderings of one run. Side files (trajectory) are written during
/// execution; the main table goes to stdout or `--output` by the caller.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub csv: String,
    pub json: Value,
}

impl RunOutput {
    pub fn rendered(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.csv.clone(),
            OutputFormat::Json => {
                let mut s = serde_json::to_string_pretty(&self.json).unwrap();
                s.push('\n');
                s
            }
        }
    }
}

/// Format a float the way `serde_json` prints it (shortest round-trip repr),
/// with `inf` / `-inf` / `nan` for the values JSON numbers cannot carry.
pub fn fnum(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        serde_json::Number::from_f64(x).unwrap().to_string()
    }
}

/// JSON value for a float; non-finite values become the [`fnum`] string.
pub fn jnum(x: f64) -> Value {
    match serde_json::Number::from_f64(x) {
        Some(n) => Value::Number(n),
        None => Value::String(fnum(x)),
    }
}

pub fn execute(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    match cfg.command {
        Command::Solve => cmd_solve(cfg),
        Command::Sweep => cmd_sweep(cfg),
        Command::Compare => cmd_compare(cfg),
        Command::Simulate => cmd_simulate(cfg),
    }
}

fn require_gamma(cfg: &RunConfig) -> Result<f64> {
    cfg.gamma
        .ok_or_else(|| AoiError::Config("this command requires --gamma (use `inf` for no cutoff)".into()))
}

fn cmd_solve(cfg: &RunConfig) -> Result<RunOutput> {
    let dist = parse_token(&cfg.dist)?;
    let gamma = require_gamma(cfg)?;
    let r = solve_lambda(&dist, gamma)?;

    let (blo, bhi) = match r.bracket {
        Some((lo, hi)) => (fnum(lo), fnum(hi)),
        None => (String::new(), String::new()),
    };
    let csv = format!(
        "lambda_star,theta,zero_wait,gamma,iterations,residual,bracket_lo,bracket_hi\n\
         {},{},{},{},{},{},{},{}\n",
        fnum(r.lambda_star),
        fnum(r.theta),
        r.zero_wait,
        fnum(gamma),
        r.iterations,
        fnum(r.residual),
        blo,
        bhi,
    );
    let json = json!({
        "lambda_star": jnum(r.lambda_star),
        "theta": jnum(r.theta),
        "zero_wait": r.zero_wait,
        "gamma": jnum(gamma),
        "iterations": r.iterations,
        "residual": jnum(r.residual),
        "bracket": r.bracket.map(|(lo, hi)| json!([jnum(lo), jnum(hi)])),
    });
    Ok(RunOutput { csv, json })
}

fn cmd_sweep(cfg: &RunConfig) -> Result<RunOutput> {
    if cfg.c_sweep {
        sweep_over_c(cfg)
    } else {
        sweep_over_gamma(cfg)
    }
}

fn sweep_over_gamma(cfg: &RunConfig) -> Result<RunOutput> {
    let dist = parse_token(&cfg.dist)?;
    let (def_min, def_max) = cutoff::default_gamma_range(&dist)?;
    let gmin = cfg.gamma_min.unwrap_or(def_min);
    let gmax = cfg.gamma_max.unwrap_or(def_max);
    let points = cfg.grid_points.unwrap_or(DEFAULT_GRID_POINTS);
    let sweep = cutoff::optimize_gamma(&dist, gmin, gmax, points)?;

    let mut csv = String::from("row,gamma,lambda_star,theta,zero_wait\n");
    for pt in &sweep.grid {
        csv.push_str(&format!(
            "grid,{},{},{},{}\n",
            fnum(pt.gamma),
            fnum(pt.lambda_star),
            fnum(pt.theta),
            pt.zero_wait
        ));
    }
    csv.push_str(&format!(
        "best,{},{},{},{}\n",
        fnum(sweep.gamma_star),
        fnum(sweep.lambda_double_star),
        fnum(sweep.theta_star),
        sweep.zero_wait_star
    ));
    for (g, msg) in &sweep.failures {
        csv.push_str(&format!("# solve failed at gamma={}: {msg}\n", fnum(*g)));
    }

    let json = json!({
        "grid": sweep
            .grid
            .iter()
            .map(|pt| json!({
                "gamma": jnum(pt.gamma),
                "lambda_star": jnum(pt.lambda_star),
                "theta": jnum(pt.theta),
                "zero_wait": pt.zero_wait,
            }))
            .collect::<Vec<_>>(),
        "best": {
            "gamma": jnum(sweep.gamma_star),
            "lambda_star": jnum(sweep.lambda_double_star),
            "theta": jnum(sweep.theta_star),
            "zero_wait": sweep.zero_wait_star,
            "at_lower_boundary": sweep.at_lower_boundary,
        },
        "failures": sweep
            .failures
            .iter()
            .map(|(g, m)| json!({"gamma": jnum(*g), "error": m}))
            .collect::<Vec<_>>(),
    });
    Ok(RunOutput { csv, json })
}

/// Rate of the exponential family a token describes; the sweep over shifts
/// keeps the rate and replaces the shift.
fn token_rate(dist: &ServiceDistribution) -> Result<f64> {
    match dist {
        ServiceDistribution::Exponential { rate } => Ok(*rate),
        ServiceDistribution::ShiftedExponential { rate, .. } => Ok(*rate),
        _ => Err(AoiError::Config(
            "sweeping over c requires an exp or sexp distribution token".into(),
        )),
    }
}

/// Zero-wait regime boundary for rate `r`, by scale reduction to the
/// unit-rate law: `gamma_bar(r, c) = gamma_bar_1(r c) / r`, defined for
/// `0 < r c < sqrt(2)`.
fn scaled_boundary(rate: f64, c: f64) -> Option<f64> {
    cutoff::zero_wait_boundary(rate * c).ok().map(|g| g / rate)
}

fn sweep_over_c(cfg: &RunConfig) -> Result<RunOutput> {
    let dist = parse_token(&cfg.dist)?;
    let rate = token_rate(&dist)?;
    let c_min = cfg.c_min.unwrap_or(0.05);
    let c_max = cfg.c_max.unwrap_or(2.0);
    let points = cfg.c_points.unwrap_or(40);
    if points < 2 {
        return Err(AoiError::Config(format!(
            "need at least 2 c points, got {points}"
        )));
    }
    if c_min <= 0.0 {
        return Err(AoiError::Config(format!(
            "c_min must be positive, got {c_min}"
        )));
    }

    let grid_points = cfg.grid_points.unwrap_or(DEFAULT_GRID_POINTS);
    let sqrt2 = std::f64::consts::SQRT_2;

    let mut csv = String::from(
        "c,gamma_star,lambda_double_star,theta_star,all_gamma_zero_wait,gamma_bar\n",
    );
    let mut rows = Vec::with_capacity(points);
    for i in 0..points {
        let c = c_min + (c_max - c_min) * i as f64 / (points - 1) as f64;
        let d = ServiceDistribution::shifted_exponential(rate, c)?;
        let (gmin, gmax) = cutoff::default_gamma_range(&d)?;
        let sweep = cutoff::optimize_gamma(&d, gmin, gmax, grid_points)?;
        let all_zero_wait = rate * c >= sqrt2;
        let gamma_bar = if all_zero_wait {
            None
        } else {
            scaled_boundary(rate, c)
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fnum(c),
            fnum(sweep.gamma_star),
            fnum(sweep.lambda_double_star),
            fnum(sweep.theta_star),
            all_zero_wait,
            gamma_bar.map(fnum).unwrap_or_default(),
        ));
        rows.push(json!({
            "c": jnum(c),
            "gamma_star": jnum(sweep.gamma_star),
            "lambda_double_star": jnum(sweep.lambda_double_star),
            "theta_star": jnum(sweep.theta_star),
            "all_gamma_zero_wait": all_zero_wait,
            "gamma_bar": gamma_bar.map(jnum),
        }));
    }
    Ok(RunOutput {
        csv,
        json: json!({ "rate": jnum(rate), "rows": rows }),
    })
}

fn cmd_compare(cfg: &RunConfig) -> Result<RunOutput> {
    let dist = parse_token(&cfg.dist)?;
    let cmp = cutoff::compare_policies(&dist)?;
    let best_name = cmp.best().name;

    let mut csv = String::from("policy,lambda,gamma,theta,best\n");
    for row in cmp.rows() {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.name,
            fnum(row.lambda),
            fnum(row.gamma),
            fnum(row.theta),
            row.name == best_name
        ));
    }
    let mut json = json!({
        "policies": cmp
            .rows()
            .iter()
            .map(|row| json!({
                "policy": row.name,
                "lambda": jnum(row.lambda),
                "gamma": jnum(row.gamma),
                "theta": jnum(row.theta),
                "best": row.name == best_name,
            }))
            .collect::<Vec<_>>(),
        "best": best_name,
    });

    if cfg.crossover {
        let rate = token_rate(&dist)?;
        let c_min = cfg.c_min.unwrap_or(0.05);
        let c_max = cfg.c_max.unwrap_or(1.4);
        let points = cfg.c_points.unwrap_or(28);
        if points < 2 || c_min <= 0.0 || c_min >= c_max {
            return Err(AoiError::Config(format!(
                "bad crossover grid: c in [{c_min}, {c_max}], {points} points"
            )));
        }
        let shifts: Vec<f64> = (0..points)
            .map(|i| c_min + (c_max - c_min) * i as f64 / (points - 1) as f64)
            .collect();
        let scan = cutoff::crossover_scan(rate, &shifts)?;
        csv.push_str("\nc,optimal_cutoff_zero_wait,no_cutoff_optimal_wait\n");
        let mut rows = Vec::with_capacity(scan.len());
        for pt in &scan {
            csv.push_str(&format!(
                "{},{},{}\n",
                fnum(pt.c),
                fnum(pt.optimal_cutoff_zero_wait),
                fnum(pt.no_cutoff_optimal_wait)
            ));
            rows.push(json!({
                "c": jnum(pt.c),
                "optimal_cutoff_zero_wait": jnum(pt.optimal_cutoff_zero_wait),
                "no_cutoff_optimal_wait": jnum(pt.no_cutoff_optimal_wait),
            }));
        }
        json["crossover"] = Value::Array(rows);
    }
    Ok(RunOutput { csv, json })
}

fn cmd_simulate(cfg: &RunConfig) -> Result<RunOutput> {
    let dist = parse_token(&cfg.dist)?;
    let gamma = require_gamma(cfg)?;
    let c = dist.shift_c();

    let solved = match cfg.theta.unwrap_or(ThetaArg::Auto) {
        ThetaArg::Auto => Some(solve_lambda(&dist, gamma)?),
        ThetaArg::Fixed(_) if cfg.check => Some(solve_lambda(&dist, gamma)?),
        ThetaArg::Fixed(_) => None,
    };
    let theta = match cfg.theta.unwrap_or(ThetaArg::Auto) {
        ThetaArg::Auto => solved.as_ref().unwrap().theta,
        ThetaArg::Fixed(v) => v,
    };
    let policy = Policy::new(gamma, theta, c)?;
    let seed = cfg.seed.unwrap_or(0);

    // With a trajectory file requested the run is plot-scale: the sawtooth is
    // exported and the report summarizes those same epochs (no batch-means
    // standard error at that size).
    let report = if let Some(path) = &cfg.trajectory {
        let n = cfg.epochs.unwrap_or(100);
        let traj = sim::export_trajectory(&policy, &dist, n, seed)?;
        let mut file = String::from("time,age\n");
        for (t, a) in &traj.points {
            file.push_str(&format!("{},{}\n", fnum(*t), fnum(*a)));
        }
        fs::write(path, file)
            .map_err(|e| AoiError::Config(format!("cannot write trajectory file {path}: {e}")))?;
        let total_q: f64 = traj.records.iter().map(|r| r.area).sum();
        let total_l: f64 = traj.records.iter().map(|r| r.length).sum();
        sim::SimReport {
            avg_aoi: total_q / total_l,
            epochs: n,
            stderr: f64::NAN,
            seed,
        }
    } else {
        let n = cfg.epochs.unwrap_or(100_000);
        let warmup = cfg.warmup.unwrap_or_else(|| sim::default_warmup(n));
        sim::run_simulation(&policy, &dist, n, seed, warmup)?
    };

    let mut csv = String::from("avg_aoi,epochs,stderr,seed,gamma,theta");
    let mut row = format!(
        "{},{},{},{},{},{}",
        fnum(report.avg_aoi),
        report.epochs,
        fnum(report.stderr),
        report.seed,
        fnum(gamma),
        fnum(theta)
    );
    let mut json = json!({
        "avg_aoi": jnum(report.avg_aoi),
        "epochs": report.epochs,
        "stderr": jnum(report.stderr),
        "seed": report.seed,
        "gamma": jnum(gamma),
        "theta": jnum(theta),
    });
    if cfg.check {
        let s = solved.as_ref().unwrap();
        let gap = (report.avg_aoi - s.lambda_star).abs();
        let gap_se = gap / report.stderr;
        csv.push_str(",lambda_star,gap,gap_stderr_units");
        row.push_str(&format!(
            ",{},{},{}",
            fnum(s.lambda_star),
            fnum(gap),
            fnum(gap_se)
        ));
        json["lambda_star"] = jnum(s.lambda_star);
        json["gap"] = jnum(gap);
        json["gap_stderr_units"] = jnum(gap_se);
    }
    csv.push('\n');
    csv.push_str(&row);
    csv.push('\n');
    Ok(RunOutput { csv, json })
}
