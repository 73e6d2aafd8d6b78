//! Sweep configuration: a `key = value` file with an optional
//! `[population]` table of `c mu a count` lines.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::worker::WorkerType;

/// Bundled ten-type population, one type per line.
pub const REFERENCE_POPULATION: &str = include_str!("../../data/reference_population.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentName {
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Custom,
}

impl ExperimentName {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::Fig4 => "fig4",
            ExperimentName::Fig5 => "fig5",
            ExperimentName::Fig6 => "fig6",
            ExperimentName::Fig7 => "fig7",
            ExperimentName::Custom => "custom",
        }
    }
}

impl FromStr for ExperimentName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig4" => Ok(ExperimentName::Fig4),
            "fig5" => Ok(ExperimentName::Fig5),
            "fig6" => Ok(ExperimentName::Fig6),
            "fig7" => Ok(ExperimentName::Fig7),
            "custom" => Ok(ExperimentName::Custom),
            other => Err(format!(
                "unknown experiment {other:?} (fig4, fig5, fig6, fig7, custom)"
            )),
        }
    }
}

impl std::fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const DEFAULT_SEED: u64 = 20_190_417;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: ExperimentName,
    /// Worker types. Headcounts are apportionment weights for the sweep.
    pub population: Vec<WorkerType>,
    pub gamma_time: f64,
    pub gamma_pay: f64,
    pub total_rows: f64,
    /// Total worker counts `N`.
    pub n_sweep: Vec<u64>,
    pub replications: u64,
    pub seed: u64,
    /// Per-type sampling probabilities for the strongly incomplete setting.
    pub type_probabilities: Option<Vec<f64>>,
}

impl ExperimentSpec {
    /// Reference population, `γ₁ = 2000`, `γ₂ = 1`, `r = 1000`,
    /// `N ∈ {100, 200, …, 5000}`, 200 replications.
    pub fn new(name: ExperimentName) -> Self {
        Self {
            name,
            population: parse_population(REFERENCE_POPULATION, 0)
                .expect("bundled population parses"),
            gamma_time: 2000.0,
            gamma_pay: 1.0,
            total_rows: 1000.0,
            n_sweep: (1..=50).map(|i| i * 100).collect(),
            replications: 200,
            seed: DEFAULT_SEED,
            type_probabilities: None,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let invalid = |msg: String| Err(ExperimentError::Invalid(msg));
        if self.population.is_empty() {
            return invalid("population is empty".into());
        }
        for t in &self.population {
            t.validate()?;
        }
        if self.n_sweep.is_empty() {
            return invalid("sweep is empty".into());
        }
        if self.n_sweep.contains(&0) {
            return invalid("sweep values must be at least 1".into());
        }
        if self.replications == 0 {
            return invalid("replications must be at least 1".into());
        }
        for (key, v, positive) in [
            ("gamma_time", self.gamma_time, false),
            ("gamma_pay", self.gamma_pay, true),
            ("total_rows", self.total_rows, true),
        ] {
            let ok = v.is_finite() && if positive { v > 0.0 } else { v >= 0.0 };
            if !ok {
                return invalid(format!(
                    "{key} must be finite and {}, got {v}",
                    if positive { "> 0" } else { "≥ 0" }
                ));
            }
        }
        if let Some(p) = &self.type_probabilities {
            if p.len() != self.population.len() {
                return invalid(format!(
                    "{} type probabilities for {} types",
                    p.len(),
                    self.population.len()
                ));
            }
            if p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return invalid("type probabilities must be finite and ≥ 0".into());
            }
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return invalid(format!("type probabilities sum to {sum}, expected 1"));
            }
        }
        Ok(())
    }

    /// Apportionment weights, one per type in population order.
    pub fn weights(&self) -> Vec<f64> {
        self.population.iter().map(|t| t.count as f64).collect()
    }

    /// Configured probabilities, or uniform over the types.
    pub fn probabilities(&self) -> Vec<f64> {
        self.type_probabilities
            .clone()
            .unwrap_or_else(|| vec![1.0 / self.population.len() as f64; self.population.len()])
    }

    /// Canonical configuration text; [`parse_config`] reads it back to an
    /// identical spec.
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "name = {}", self.name);
        let _ = writeln!(out, "gamma_time = {:?}", self.gamma_time);
        let _ = writeln!(out, "gamma_pay = {:?}", self.gamma_pay);
        let _ = writeln!(out, "total_rows = {:?}", self.total_rows);
        let _ = writeln!(out, "sweep = {}", format_sweep(&self.n_sweep));
        let _ = writeln!(out, "replications = {}", self.replications);
        let _ = writeln!(out, "seed = {}", self.seed);
        if let Some(p) = &self.type_probabilities {
            let list: Vec<String> = p.iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(out, "type_probabilities = {}", list.join(", "));
        }
        let _ = writeln!(out, "[population]");
        for t in &self.population {
            let _ = writeln!(
                out,
                "{:?} {:?} {:?} {}",
                t.cost_rate, t.speed, t.startup, t.count
            );
        }
        out
    }
}

fn format_sweep(values: &[u64]) -> String {
    if values.len() >= 3 {
        let step = values[1].wrapping_sub(values[0]);
        if step > 0 && values.windows(2).all(|w| w[1].wrapping_sub(w[0]) == step) {
            return format!("{}:{}:{}", values[0], values[values.len() - 1], step);
        }
    }
    let list: Vec<String> = values.iter().map(u64::to_string).collect();
    list.join(", ")
}

/// `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_sweep(text: &str) -> Result<Vec<u64>, String> {
    let num = |s: &str| {
        s.trim()
            .parse::<u64>()
            .map_err(|_| format!("not a nonnegative integer: {:?}", s.trim()))
    };
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err("range must be start:stop:step".into());
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if step == 0 || stop < start {
            return Err("range needs step > 0 and stop ≥ start".into());
        }
        Ok((start..=stop).step_by(step as usize).collect())
    } else {
        text.split(',').map(num).collect()
    }
}

/// Parses `c mu a count` lines. `first_line` offsets reported line numbers.
pub fn parse_population(text: &str, first_line: usize) -> Result<Vec<WorkerType>, ExperimentError> {
    let mut types = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = first_line + i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(ExperimentError::Config {
                line,
                msg: format!("expected `c mu a count`, got {} fields", fields.len()),
            });
        }
        let real = |s: &str, what: &str| {
            s.parse::<f64>().map_err(|_| ExperimentError::Config {
                line,
                msg: format!("{what} is not a number: {s:?}"),
            })
        };
        let count = fields[3]
            .parse::<u64>()
            .map_err(|_| ExperimentError::Config {
                line,
                msg: format!("count must be a nonnegative integer, got {:?}", fields[3]),
            })?;
        let t = WorkerType::new(
            types.len() + 1,
            real(fields[0], "c")?,
            real(fields[1], "mu")?,
            real(fields[2], "a")?,
            count,
        )
        .map_err(|e| ExperimentError::Config {
            line,
            msg: e.to_string(),
        })?;
        types.push(t);
    }
    if types.is_empty() {
        return Err(ExperimentError::Invalid(
            "population table has no types".into(),
        ));
    }
    Ok(types)
}

pub fn read_population_file(path: &Path) -> Result<Vec<WorkerType>, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Io {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    parse_population(&text, 0)
}

/// Parses configuration text. Relative `population = path` entries resolve
/// against `base_dir`.
pub fn parse_config(
    text: &str,
    base_dir: Option<&Path>,
) -> Result<ExperimentSpec, ExperimentError> {
    let mut spec = ExperimentSpec::new(ExperimentName::Custom);
    let mut name_given = false;
    let mut population_path: Option<(usize, PathBuf)> = None;
    let mut lines = text.lines().enumerate().peekable();
    let mut table: Option<(usize, String)> = None;
    while let Some((i, raw)) = lines.next() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content == "[population]" {
            let mut body = String::new();
            while let Some((_, next)) = lines.peek() {
                if next.trim().starts_with('[') {
                    break;
                }
                body.push_str(next);
                body.push('\n');
                lines.next();
            }
            table = Some((line, body));
            continue;
        }
        if content.starts_with('[') {
            return Err(ExperimentError::Config {
                line,
                msg: format!("unknown section {content}"),
            });
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ExperimentError::Config {
                line,
                msg: format!("expected `key = value`, got {content:?}"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        let bad = |msg: String| ExperimentError::Config {
            line,
            msg: format!("{key}: {msg}"),
        };
        let real = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| bad(format!("not a number: {v:?}")))
        };
        match key {
            "name" => {
                spec.name = value.parse().map_err(bad)?;
                name_given = true;
            }
            "gamma_time" => spec.gamma_time = real(value)?,
            "gamma_pay" => spec.gamma_pay = real(value)?,
            "total_rows" => spec.total_rows = real(value)?,
            "sweep" => spec.n_sweep = parse_sweep(value).map_err(bad)?,
            "replications" => {
                spec.replications = value
                    .parse()
                    .map_err(|_| bad(format!("not an integer: {value:?}")))?
            }
            "seed" => {
                spec.seed = value
                    .parse()
                    .map_err(|_| bad(format!("not an integer: {value:?}")))?
            }
            "type_probabilities" => {
                spec.type_probabilities = Some(
                    value
                        .split(',')
                        .map(|v| real(v.trim()))
                        .collect::<Result<_, _>>()?,
                )
            }
            "population" => population_path = Some((line, PathBuf::from(value))),
            // written into result metadata; informational only
            "version" => {}
            _ => {
                return Err(ExperimentError::Config {
                    line,
                    msg: format!("unknown key {key:?}"),
                })
            }
        }
    }
    match (table, population_path) {
        (Some(_), Some((line, _))) => {
            return Err(ExperimentError::Config {
                line,
                msg: "give either `population = path` or a [population] table, not both".into(),
            })
        }
        (Some((line, body)), None) => spec.population = parse_population(&body, line)?,
        (None, Some((_, path))) => {
            let path = match base_dir {
                Some(dir) if path.is_relative() => dir.join(path),
                _ => path,
            };
            spec.population = read_population_file(&path)?;
        }
        (None, None) => {}
    }
    if !name_given {
        return Err(ExperimentError::Invalid("missing `name`".into()));
    }
    spec.validate()?;
    Ok(spec)
}

pub fn load_config(path: &Path) -> Result<ExperimentSpec, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Io {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    parse_config(&text, path.parent())
}
