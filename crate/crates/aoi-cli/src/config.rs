//! Run configuration shared by the subcommands.
//!
//! A config is representable as flat `key=value` lines mirroring the CLI
//! flags. Parsing and serialization round-trip exactly; invalid distribution
//! tokens are rejected at validation time, before any computation.

use std::fmt;
use std::str::FromStr;

use aoi_core::dist;
use aoi_core::error::{AoiError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Sweep,
    Compare,
    Simulate,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Compare => "compare",
            Command::Simulate => "simulate",
        };
        f.write_str(s)
    }
}

impl FromStr for Command {
    type Err = AoiError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "solve" => Ok(Command::Solve),
            "sweep" => Ok(Command::Sweep),
            "compare" => Ok(Command::Compare),
            "simulate" => Ok(Command::Simulate),
            other => Err(AoiError::Config(format!("unknown command `{other}`"))),
        }
    }
}

/// Waiting threshold argument: solve for it, or use a fixed value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaArg {
    Auto,
    Fixed(f64),
}

impl fmt::Display for ThetaArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThetaArg::Auto => f.write_str("auto"),
            ThetaArg::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for ThetaArg {
    type Err = AoiError;
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(ThetaArg::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if !v.is_nan() => Ok(ThetaArg::Fixed(v)),
            _ => Err(AoiError::Config(format!(
                "theta must be `auto` or a number, got `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = AoiError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(AoiError::Config(format!(
                "output format must be csv or json, got `{other}`"
            ))),
        }
    }
}

/// Everything a run needs, independent of how it was assembled
/// (flags, config file, environment).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    /// Distribution token, e.g. `exp:rate=1`.
    pub dist: String,
    pub gamma: Option<f64>,
    pub theta: Option<ThetaArg>,
    pub gamma_min: Option<f64>,
    pub gamma_max: Option<f64>,
    pub grid_points: Option<usize>,
    pub c_sweep: bool,
    pub c_min: Option<f64>,
    pub c_max: Option<f64>,
    pub c_points: Option<usize>,
    pub crossover: bool,
    pub epochs: Option<u64>,
    pub seed: Option<u64>,
    pub warmup: Option<u64>,
    pub check: bool,
    pub trajectory: Option<String>,
    pub format: OutputFormat,
    pub output: Option<String>,
}

impl RunConfig {
    pub fn new(command: Command, dist: impl Into<String>) -> Self {
        Self {
            command,
            dist: dist.into(),
            gamma: None,
            theta: None,
            gamma_min: None,
            gamma_max: None,
            grid_points: None,
            c_sweep: false,
            c_min: None,
            c_max: None,
            c_points: None,
            crossover: false,
            epochs: None,
            seed: None,
            warmup: None,
            check: false,
            trajectory: None,
            format: OutputFormat::Csv,
            output: None,
        }
    }

    /// Reject bad inputs before any computation runs.
    pub fn validate(&self) -> Result<()> {
        dist::parse_token(&self.dist)?;
        if let Some(g) = self.gamma {
            if g.is_nan() || g <= 0.0 {
                return Err(AoiError::Config(format!("gamma must be positive, got {g}")));
            }
        }
        if let (Some(lo), Some(hi)) = (self.gamma_min, self.gamma_max) {
            if !(lo < hi) {
                return Err(AoiError::Config(format!(
                    "need gamma_min < gamma_max, got [{lo}, {hi}]"
                )));
            }
        }
        if let (Some(lo), Some(hi)) = (self.c_min, self.c_max) {
            if !(lo < hi) {
                return Err(AoiError::Config(format!(
                    "need c_min < c_max, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    /// Serialize to flat `key=value` lines (the config-file format).
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        push("command", self.command.to_string());
        push("dist", self.dist.clone());
        if let Some(v) = self.gamma {
            push("gamma", v.to_string());
        }
        if let Some(v) = self.theta {
            push("theta", v.to_string());
        }
        if let Some(v) = self.gamma_min {
            push("gamma_min", v.to_string());
        }
        if let Some(v) = self.gamma_max {
            push("gamma_max", v.to_string());
        }
        if let Some(v) = self.grid_points {
            push("grid_points", v.to_string());
        }
        if self.c_sweep {
            push("c_sweep", "true".into());
        }
        if let Some(v) = self.c_min {
            push("c_min", v.to_string());
        }
        if let Some(v) = self.c_max {
            push("c_max", v.to_string());
        }
        if let Some(v) = self.c_points {
            push("c_points", v.to_string());
        }
        if self.crossover {
            push("crossover", "true".into());
        }
        if let Some(v) = self.epochs {
            push("epochs", v.to_string());
        }
        if let Some(v) = self.seed {
            push("seed", v.to_string());
        }
        if let Some(v) = self.warmup {
            push("warmup", v.to_string());
        }
        if self.check {
            push("check", "true".into());
        }
        if let Some(v) = &self.trajectory {
            push("trajectory", v.clone());
        }
        push("format", self.format.to_string());
        if let Some(v) = &self.output {
            push("output", v.clone());
        }
        out
    }

    /// Parse flat `key=value` lines. Blank lines and `#` comments allowed.
    pub fn from_kv(text: &str) -> Result<Self> {
        let pairs = parse_kv_lines(text)?;
        let find = |key: &str| pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let command: Command = find("command")
            .ok_or_else(|| AoiError::Config("config is missing `command`".into()))?
            .parse()?;
        let dist = find("dist")
            .ok_or_else(|| AoiError::Config("config is missing `dist`".into()))?
            .to_string();
        let mut cfg = RunConfig::new(command, dist);
        cfg.apply_kv(&pairs)?;
        Ok(cfg)
    }

    /// Overlay parsed `key=value` pairs onto this config. Used both by
    /// `from_kv` and by `--config` merging (flags win over the file, so the
    /// file is applied first).
    pub fn apply_kv(&mut self, pairs: &[(String, String)]) -> Result<()> {
        for (key, value) in pairs {
            match key.as_str() {
                "command" => self.command = value.parse()?,
                "dist" => self.dist = value.clone(),
                "gamma" => self.gamma = Some(parse_num(key, value)?),
                "theta" => self.theta = Some(value.parse()?),
                "gamma_min" => self.gamma_min = Some(parse_num(key, value)?),
                "gamma_max" => self.gamma_max = Some(parse_num(key, value)?),
                "grid_points" => self.grid_points = Some(parse_int(key, value)? as usize),
                "c_sweep" => self.c_sweep = parse_bool(key, value)?,
                "c_min" => self.c_min = Some(parse_num(key, value)?),
                "c_max" => self.c_max = Some(parse_num(key, value)?),
                "c_points" => self.c_points = Some(parse_int(key, value)? as usize),
                "crossover" => self.crossover = parse_bool(key, value)?,
                "epochs" => self.epochs = Some(parse_int(key, value)?),
                "seed" => self.seed = Some(parse_int(key, value)?),
                "warmup" => self.warmup = Some(parse_int(key, value)?),
                "check" => self.check = parse_bool(key, value)?,
                "trajectory" => self.trajectory = Some(value.clone()),
                "format" => self.format = value.parse()?,
                "output" => self.output = Some(value.clone()),
                other => {
                    return Err(AoiError::Config(format!("unknown config key `{other}`")));
                }
            }
        }
        Ok(())
    }
}

/// Split config text into `(key, value)` pairs.
pub fn parse_kv_lines(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            AoiError::Config(format!("config line {} is not key=value: `{raw}`", lineno + 1))
        })?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

fn parse_num(key: &str, value: &str) -> Result<f64> {
    match value.parse::<f64>() {
        Ok(v) if !v.is_nan() => Ok(v),
        _ => Err(AoiError::Config(format!(
            "`{key}` must be a number, got `{value}`"
        ))),
    }
}

fn parse_int(key: &str, value: &str) -> Result<u64> {
    value
        .parse::<u64>()
        .map_err(|_| AoiError::Config(format!("`{key}` must be a nonnegative integer, got `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(AoiError::Config(format!(
            "`{key}` must be true/false, got `{value}`"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kv_round_trip_manual() {
        let mut cfg = RunConfig::new(Command::Simulate, "exp:rate=1");
        cfg.gamma = Some(1.0);
        cfg.theta = Some(ThetaArg::Auto);
        cfg.epochs = Some(1_000_000);
        cfg.seed = Some(7);
        cfg.check = true;
        cfg.format = OutputFormat::Json;
        cfg.trajectory = Some("out.csv".into());
        let parsed = RunConfig::from_kv(&cfg.to_kv()).unwrap();
        assert_eq!(cfg, parsed);
    }

    #[test]
    fn invalid_token_rejected_at_validation() {
        let cfg = RunConfig::new(Command::Solve, "exp:rate=-1");
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn malformed_lines_rejected() {
        assert!(RunConfig::from_kv("command=solve\ndist exp").is_err());
        assert!(RunConfig::from_kv("dist=exp:rate=1").is_err()); // no command
        assert!(RunConfig::from_kv("command=solve\ndist=exp:rate=1\nbogus=1").is_err());
    }

    #[test]
    fn comments_and_blank_lines_allowed() {
        let cfg =
            RunConfig::from_kv("# a comment\n\ncommand=solve\ndist=det:c=1\ngamma=2\n").unwrap();
        assert_eq!(cfg.command, Command::Solve);
        assert_eq!(cfg.gamma, Some(2.0));
    }

    proptest! {
        #[test]
        fn kv_round_trip(
            cmd_idx in 0usize..4,
            gamma in proptest::option::of(0.001f64..100.0),
            theta_auto in any::<bool>(),
            theta in proptest::option::of(0.0f64..10.0),
            epochs in proptest::option::of(1000u64..10_000_000),
            seed in proptest::option::of(any::<u64>()),
            c_sweep in any::<bool>(),
            check in any::<bool>(),
            json in any::<bool>(),
        ) {
            let command = [Command::Solve, Command::Sweep, Command::Compare, Command::Simulate][cmd_idx];
            let mut cfg = RunConfig::new(command, "sexp:rate=1,c=0.5");
            cfg.gamma = gamma;
            cfg.theta = theta.map(|t| if theta_auto { ThetaArg::Auto } else { ThetaArg::Fixed(t) });
            cfg.epochs = epochs;
            cfg.seed = seed;
            cfg.c_sweep = c_sweep;
            cfg.check = check;
            cfg.format = if json { OutputFormat::Json } else { OutputFormat::Csv };
            let parsed = RunConfig::from_kv(&cfg.to_kv()).unwrap();
            prop_assert_eq!(cfg, parsed);
        }
    }
}
