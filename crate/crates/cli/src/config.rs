//! Run settings: a flat TOML document merged under the command-line flags.

use crate::CliError;
use clap::{Args, ValueEnum};
use serde::de::DeserializeOwned;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Flags shared by every command. Unset flags fall back to the config file, then to defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Flat TOML file with `key = value` settings
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Exponent in r_eps = eps^s
    #[arg(long, global = true)]
    pub s: Option<f64>,
    /// Mode degree for solve-mode; decay exponent l for glue
    #[arg(long, global = true)]
    pub l: Option<f64>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Parameter sweep, e.g. `eps=0.2,0.1,0.05`
    #[arg(long, global = true)]
    pub sweep: Option<String>,
    /// Half-length of the integrated t-range
    #[arg(long, global = true)]
    pub tmax: Option<f64>,
    /// Neck offset b of the family
    #[arg(long, global = true)]
    pub b: Option<f64>,
    /// Weight gamma of the solve-mode forcing
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub s: f64,
    /// Unset means the command's own default.
    pub l: Option<f64>,
    pub tol: Option<f64>,
    pub out: PathBuf,
    pub format: Format,
    pub sweep: Option<Sweep>,
    pub tmax: f64,
    pub b: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub key: String,
    pub values: Vec<f64>,
}

const KEYS: [&str; 14] = ["n", "k", "eps", "s", "l", "tol", "out", "format", "sweep", "tmax", "b", "gamma", "eps_sweep", "suite"];

/// Reads a flat key-value TOML file; nested tables and unknown keys are rejected.
pub fn read_table(path: &Path) -> Result<toml::Table, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table = text.parse().map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
    for (key, value) in &table {
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Validation(format!("config {}: unknown key `{key}`", path.display())));
        }
        if value.is_table() || value.is_array() {
            return Err(CliError::Validation(format!("config {}: `{key}` must be a scalar", path.display())));
        }
    }
    Ok(table)
}

pub(crate) fn from_file<T: DeserializeOwned>(table: &toml::Table, key: &str) -> Result<Option<T>, CliError> {
    match table.get(key) {
        None => Ok(None),
        Some(v) => {
            // integers are accepted where floats are expected
            let v = match v {
                toml::Value::Integer(i) if std::any::type_name::<T>() == "f64" => toml::Value::Float(*i as f64),
                other => other.clone(),
            };
            v.try_into().map(Some).map_err(|e| CliError::Validation(format!("config key `{key}`: {e}")))
        }
    }
}

pub fn parse_list(text: &str) -> Result<Vec<f64>, CliError> {
    let values: Result<Vec<f64>, _> = text.split(',').map(|x| x.trim().parse::<f64>()).collect();
    match values {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(CliError::Validation(format!("expected a comma-separated list of numbers, got `{text}`"))),
    }
}

pub fn parse_sweep(text: &str) -> Result<Sweep, CliError> {
    let (key, list) = text.split_once('=').ok_or_else(|| CliError::Validation(format!("sweep must look like key=v1,v2, got `{text}`")))?;
    let key = key.trim().to_string();
    if !["eps", "s", "b", "l", "tol", "tmax", "gamma"].contains(&key.as_str()) {
        return Err(CliError::Validation(format!("cannot sweep over `{key}`")));
    }
    Ok(Sweep { key, values: parse_list(list)? })
}

impl Settings {
    /// Merges flags over the config file over the defaults.
    pub fn resolve(flags: &Flags, default_eps: f64) -> Result<(Self, toml::Table), CliError> {
        let table = match &flags.config {
            Some(p) => read_table(p)?,
            None => toml::Table::new(),
        };
        let sweep_text = match &flags.sweep {
            Some(s) => Some(s.clone()),
            None => from_file::<String>(&table, "sweep")?,
        };
        let settings = Settings {
            n: flags.n.map_or_else(|| from_file(&table, "n"), |v| Ok(Some(v)))?.unwrap_or(5),
            k: flags.k.map_or_else(|| from_file(&table, "k"), |v| Ok(Some(v)))?.unwrap_or(2),
            eps: flags.eps.map_or_else(|| from_file(&table, "eps"), |v| Ok(Some(v)))?.unwrap_or(default_eps),
            s: flags.s.map_or_else(|| from_file(&table, "s"), |v| Ok(Some(v)))?.unwrap_or(0.1),
            l: flags.l.map_or_else(|| from_file(&table, "l"), |v| Ok(Some(v)))?,
            tol: flags.tol.map_or_else(|| from_file(&table, "tol"), |v| Ok(Some(v)))?,
            out: match &flags.out {
                Some(p) => p.clone(),
                None => from_file::<String>(&table, "out")?.map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".")),
            },
            format: flags.format.map_or_else(|| from_file(&table, "format"), |v| Ok(Some(v)))?.unwrap_or(Format::Json),
            sweep: sweep_text.as_deref().map(parse_sweep).transpose()?,
            tmax: flags.tmax.map_or_else(|| from_file(&table, "tmax"), |v| Ok(Some(v)))?.unwrap_or(15.0),
            b: flags.b.map_or_else(|| from_file(&table, "b"), |v| Ok(Some(v)))?.unwrap_or(0.0),
            gamma: flags.gamma.map_or_else(|| from_file(&table, "gamma"), |v| Ok(Some(v)))?.unwrap_or(1.0),
        };
        settings.check()?;
        Ok((settings, table))
    }

    fn check(&self) -> Result<(), CliError> {
        for (name, x) in [("eps", self.eps), ("s", self.s), ("tmax", self.tmax), ("b", self.b), ("gamma", self.gamma)] {
            if !x.is_finite() {
                return Err(CliError::Validation(format!("{name} must be finite")));
            }
        }
        if !(self.tmax > 0.0) {
            return Err(CliError::Validation(format!("tmax must be positive, got {}", self.tmax)));
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0 && tol < 1.0) {
                return Err(CliError::Validation(format!("tol must lie in (0, 1), got {tol}")));
            }
        }
        Ok(())
    }

    /// Copy with one swept key replaced.
    pub fn with(&self, key: &str, value: f64) -> Self {
        let mut s = self.clone();
        match key {
            "eps" => s.eps = value,
            "s" => s.s = value,
            "b" => s.b = value,
            "l" => s.l = Some(value),
            "tol" => s.tol = Some(value),
            "tmax" => s.tmax = value,
            "gamma" => s.gamma = value,
            _ => unreachable!("sweep keys are checked when parsed"),
        }
        s.sweep = None;
        s
    }

    /// One run per sweep value (or the single run), each with a file-name suffix.
    pub fn runs(&self) -> Vec<(String, Settings)> {
        match &self.sweep {
            None => vec![(String::new(), self.clone())],
            Some(sw) => sw.values.iter().map(|&v| (format!("_{}{}", sw.key, v), self.with(&sw.key, v))).collect(),
        }
    }

    pub fn path(&self, stem: &str, suffix: &str, ext: &str) -> PathBuf {
        self.out.join(format!("{stem}{suffix}.{ext}"))
    }
}
