//! Configuration keys, config-file parsing and typed lookup.
//!
//! A config file holds `key = value` lines; `#` starts a comment. Command-line
//! flags of the same name override file values.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    FitDensity,
    EvalDensity,
    Classify,
    Benchmark,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Command::Simulate,
        Command::FitDensity,
        Command::EvalDensity,
        Command::Classify,
        Command::Benchmark,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::FitDensity => "fit-density",
            Command::EvalDensity => "eval-density",
            Command::Classify => "classify",
            Command::Benchmark => "benchmark",
        }
    }

    pub fn about(self) -> &'static str {
        match self {
            Command::Simulate => "Draw a synthetic IFA sample; writes data.csv and truth.json",
            Command::FitDensity => "Fit an aggregated IFA density; writes model.json and report.json",
            Command::EvalDensity => "Evaluate a fitted density at points; writes density.csv",
            Command::Classify => {
                "Fit or apply a plug-in classifier; writes predictions.csv and report.json \
                 (or splits.csv in split mode)"
            }
            Command::Benchmark => {
                "Replicated I1 comparison against kernel smoothing; writes benchmark.json and benchmark.csv"
            }
        }
    }
}

pub struct KeySpec {
    pub name: &'static str,
    pub range: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
    pub commands: &'static [Command],
}

use Command::*;

const SIM: &[Command] = &[Simulate, Benchmark];
const FIT: &[Command] = &[FitDensity, Classify, Benchmark];
const ALL: &[Command] = &[Simulate, FitDensity, EvalDensity, Classify, Benchmark];

pub const KEYS: &[KeySpec] = &[
    KeySpec { name: "seed", range: "0..=2^64-1", default: Some("0"), help: "master seed", commands: ALL },
    KeySpec { name: "d", range: "1..=64 (benchmark with baseline: 1..=6)", default: Some("2"), help: "dimension", commands: SIM },
    KeySpec { name: "factors", range: "comma list of ids 1..=7, length m <= d", default: Some("2"), help: "factor laws: 1 N(0,1), 2 chi2(1), 3 0.5N(-3,1)+0.5N(2,1), 4 0.4gamma(5)+0.6gamma(13), 5 chi2(8), 6 t(5), 7 Laplace", commands: SIM },
    KeySpec { name: "snr", range: "> 0 (simulate also accepts inf)", default: Some("3"), help: "signal-to-noise ratio sqrt(tr W / d) / sigma", commands: SIM },
    KeySpec { name: "n", range: "simulate: >= 1; benchmark: >= 20", default: Some("1000"), help: "sample size", commands: SIM },
    KeySpec { name: "replications", range: ">= 1", default: Some("50"), help: "Monte-Carlo replications", commands: &[Benchmark] },
    KeySpec { name: "baseline", range: "true|false", default: Some("true"), help: "also run the kernel smoothing baseline", commands: &[Benchmark] },
    KeySpec { name: "input", range: "path to CSV", default: None, help: "observations, one row per point", commands: &[FitDensity] },
    KeySpec { name: "max-rank", range: "1..=d-1 (1..=d with known-sigma2)", default: Some("d-1, or d with known-sigma2"), help: "upper bound M on the number of factors", commands: FIT },
    KeySpec { name: "known-sigma2", range: "> 0", default: None, help: "known noise variance; used for every rank", commands: FIT },
    KeySpec { name: "kernel", range: "sinc|vallee-poussin|gaussian", default: Some("sinc"), help: "marginal kernel", commands: FIT },
    KeySpec { name: "grid-points", range: "power of two >= 4", default: Some("1024"), help: "grid size P of each marginal estimate", commands: FIT },
    KeySpec { name: "bandwidth-scale", range: "> 0", default: Some("1"), help: "multiplier on h = sigma / sqrt(ln n)", commands: FIT },
    KeySpec { name: "split-c", range: "> 0", default: Some("1"), help: "holdout size constant c in n2 = floor(c n / sqrt(ln n))", commands: FIT },
    KeySpec { name: "mc-q0", range: ">= 1", default: Some("4096"), help: "initial Monte-Carlo draws for the squared-density integral", commands: FIT },
    KeySpec { name: "mc-tol", range: "> 0", default: Some("0.005"), help: "relative change at which draw doubling stops", commands: FIT },
    KeySpec { name: "mc-max-draws", range: ">= mc-q0", default: Some("1048576"), help: "cap on Monte-Carlo draws", commands: FIT },
    KeySpec { name: "ball-multiplier", range: "> 0", default: Some("1.2"), help: "restriction ball radius multiplier", commands: FIT },
    KeySpec { name: "ball-quantile", range: "(0, 1]", default: Some("0.995"), help: "sample norm quantile defining the ball radius", commands: FIT },
    KeySpec { name: "model", range: "path to JSON", default: None, help: "fitted model file", commands: &[EvalDensity, Classify] },
    KeySpec { name: "points", range: "path to CSV", default: None, help: "evaluation points", commands: &[EvalDensity] },
    KeySpec { name: "train", range: "path to labeled CSV", default: None, help: "training data, label in the last column (0..J-1)", commands: &[Classify] },
    KeySpec { name: "test", range: "path to CSV", default: None, help: "test points, optionally labeled", commands: &[Classify] },
    KeySpec { name: "priors", range: "comma list of positive values summing to 1", default: Some("class proportions"), help: "class priors", commands: &[Classify] },
    KeySpec { name: "min-class-size", range: ">= 4", default: Some("50"), help: "minimum training observations per class", commands: &[Classify] },
    KeySpec { name: "splits", range: ">= 0", default: Some("0"), help: "repeat stratified splits of the training data (0 = off)", commands: &[Classify] },
    KeySpec { name: "train-fraction", range: "(0, 1)", default: Some("0.6666666666666666"), help: "training share in split mode", commands: &[Classify] },
    KeySpec { name: "box-stds", range: "> 0", default: Some("6"), help: "I1 quadrature half-width in largest standard deviations", commands: &[Benchmark] },
    KeySpec { name: "spacing-factor", range: "> 0", default: Some("0.8"), help: "I1 grid spacing as a fraction of min(sigma, h)", commands: &[Benchmark] },
    KeySpec { name: "max-nodes", range: ">= 8", default: Some("20000000"), help: "I1 quadrature node limit", commands: &[Benchmark] },
    KeySpec { name: "is-draws", range: ">= 2", default: Some("100000"), help: "importance-sampling draws for I1 when d > 3", commands: &[Benchmark] },
];

pub fn keys_for(cmd: Command) -> impl Iterator<Item = &'static KeySpec> {
    KEYS.iter().filter(move |k| k.commands.contains(&cmd))
}

/// Reads a config file into `key -> (value, line)`.
pub fn parse_config_text(text: &str, origin: &str) -> Result<BTreeMap<String, (String, usize)>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Validation(format!("{origin}, line {}: expected 'key = value'", i + 1))
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(CliError::Validation(format!("{origin}, line {}: empty key", i + 1)));
        }
        if out.insert(k.to_string(), (v.to_string(), i + 1)).is_some() {
            return Err(CliError::Validation(format!("{origin}, line {}: duplicate key '{k}'", i + 1)));
        }
    }
    Ok(out)
}

/// Merged settings for one command.
#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    /// File values are checked against the command's keys; `flags` override them.
    pub fn merge(
        cmd: Command,
        file: Option<&Path>,
        flags: Vec<(String, String)>,
    ) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let origin = path.display().to_string();
            for (k, (v, line)) in parse_config_text(&text, &origin)? {
                if !keys_for(cmd).any(|s| s.name == k) {
                    return Err(CliError::Validation(format!(
                        "{origin}, line {line}: unknown key '{k}' for {}",
                        cmd.name()
                    )));
                }
                values.insert(k, v);
            }
        }
        for (k, v) in flags {
            values.insert(k, v);
        }
        Ok(Settings { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Validation(format!("{key}: cannot parse '{v}'"))),
        }
    }

    pub fn required(&self, key: &str) -> Result<&str, CliError> {
        self.raw(key)
            .ok_or_else(|| CliError::Validation(format!("missing required key '{key}'")))
    }

    pub fn usize_in(&self, key: &str, default: usize, lo: usize, hi: usize) -> Result<usize, CliError> {
        let v = self.parse::<usize>(key)?.unwrap_or(default);
        if v < lo || v > hi {
            return Err(CliError::Validation(format!("{key} = {v} is outside {lo}..={hi}")));
        }
        Ok(v)
    }

    pub fn opt_usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        self.parse(key)
    }

    pub fn u64(&self, key: &str, default: u64) -> Result<u64, CliError> {
        Ok(self.parse::<u64>(key)?.unwrap_or(default))
    }

    /// Value satisfying `ok`, described by `range` in errors.
    pub fn f64_where(
        &self,
        key: &str,
        default: f64,
        range: &str,
        ok: impl Fn(f64) -> bool,
    ) -> Result<f64, CliError> {
        let v = self.parse::<f64>(key)?.unwrap_or(default);
        if !ok(v) {
            return Err(CliError::Validation(format!("{key} = {v} is outside {range}")));
        }
        Ok(v)
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.parse(key)
    }

    pub fn bool(&self, key: &str, default: bool) -> Result<bool, CliError> {
        Ok(self.parse::<bool>(key)?.unwrap_or(default))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| CliError::Validation(format!("{key}: cannot parse '{s}'")))
                })
                .collect::<Result<Vec<T>, _>>()
                .map(Some),
        }
    }
}
