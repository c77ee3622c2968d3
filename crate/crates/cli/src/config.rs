//! Experiment configuration: a flat TOML file overlaid with command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use mlmoment::experiment::ExperimentConfig;
use toml::{Table, Value};

/// Keys whose relative paths are resolved against the config file's directory.
const PATH_KEYS: [&str; 3] = ["signal_file", "points_file", "measurements_file"];

/// Raised for anything that makes the configuration unusable.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// Flat TOML file with experiment keys; flags override its values.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Number of grid points L.
    #[arg(long)]
    pub grid_size: Option<i64>,
    /// Bandwidth M of the synthetic truth.
    #[arg(long)]
    pub bandwidth: Option<i64>,
    /// Number of sampling points r.
    #[arg(long)]
    pub samples: Option<i64>,
    /// Jitter amplitude in [0, 1) as a fraction of the regular spacing.
    #[arg(long)]
    pub irregularity: Option<f64>,
    /// Noise-to-signal norm ratio of the added white noise (0.12 means 12%).
    #[arg(long)]
    pub noise: Option<f64>,
    /// Noise norm used by the stopping rules instead of the realized one.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_parser = ["cg", "lw"])]
    pub method: Option<String>,
    #[arg(long, value_parser = ["cg_squared", "lw_linear", "lw_increment", "cg_with_lw_stop"])]
    pub stop_flavor: Option<String>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Use (1+eta) instead of 2(1+eta) in every discrepancy threshold.
    #[arg(long)]
    pub drop_factor_two: bool,
    #[arg(long)]
    pub max_level: Option<i64>,
    /// Per-level iteration cap (default 50(2N+1)).
    #[arg(long)]
    pub max_iters: Option<i64>,
    /// Sets the truth, sampling and noise seeds at once.
    #[arg(long)]
    pub seed: Option<i64>,
    #[arg(long)]
    pub truth_seed: Option<i64>,
    #[arg(long)]
    pub sampling_seed: Option<i64>,
    #[arg(long)]
    pub noise_seed: Option<i64>,
    /// Keep every k-th sample.
    #[arg(long)]
    pub decimate: Option<i64>,
    #[arg(long, value_parser = ["recursive", "known_truth"])]
    pub tails: Option<String>,
    #[arg(long, value_parser = ["theoretical", "empirical"])]
    pub bound_source: Option<String>,
    #[arg(long, value_parser = ["terminal", "last_violating"])]
    pub carry: Option<String>,
    /// Truth as a grid signal CSV (index,re,im).
    #[arg(long, value_name = "PATH")]
    pub signal_file: Option<PathBuf>,
    /// Sampling points, one per line.
    #[arg(long, value_name = "PATH")]
    pub points_file: Option<PathBuf>,
    /// Measured values (j,t,re,im); requires --delta.
    #[arg(long, value_name = "PATH")]
    pub measurements_file: Option<PathBuf>,
}

impl ConfigArgs {
    /// The config file table with every given flag written over it.
    pub fn table(&self) -> Result<Table> {
        let mut table = match &self.config {
            Some(path) => read_table(path)?,
            None => Table::new(),
        };
        let mut set = |key: &str, v: Option<Value>| {
            if let Some(v) = v {
                table.insert(key.to_string(), v);
            }
        };
        let int = |v: Option<i64>| v.map(Value::Integer);
        let float = |v: Option<f64>| v.map(Value::Float);
        let text = |v: &Option<String>| v.clone().map(Value::String);
        let path = |v: &Option<PathBuf>| v.as_ref().map(|p| Value::String(p.display().to_string()));

        set("grid_size", int(self.grid_size));
        set("bandwidth", int(self.bandwidth));
        set("samples", int(self.samples));
        set("irregularity", float(self.irregularity));
        set("noise", float(self.noise));
        set("delta", float(self.delta));
        set("method", text(&self.method));
        set("stop_flavor", text(&self.stop_flavor));
        set("eta", float(self.eta));
        set("tau", float(self.tau));
        set("drop_factor_two", self.drop_factor_two.then_some(Value::Boolean(true)));
        set("max_level", int(self.max_level));
        set("max_iters", int(self.max_iters));
        for key in ["truth_seed", "sampling_seed", "noise_seed"] {
            set(key, int(self.seed));
        }
        set("truth_seed", int(self.truth_seed));
        set("sampling_seed", int(self.sampling_seed));
        set("noise_seed", int(self.noise_seed));
        set("decimate", int(self.decimate));
        set("tails", text(&self.tails));
        set("bound_source", text(&self.bound_source));
        set("carry", text(&self.carry));
        set("signal_file", path(&self.signal_file));
        set("points_file", path(&self.points_file));
        set("measurements_file", path(&self.measurements_file));
        Ok(table)
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        to_config(self.table()?)
    }
}

fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut table: Table =
        toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.message())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    for key in PATH_KEYS {
        if let Some(Value::String(p)) = table.get(key) {
            let p = Path::new(p);
            if p.is_relative() {
                let joined = base.join(p).display().to_string();
                table.insert(key.to_string(), Value::String(joined));
            }
        }
    }
    Ok(table)
}

/// Deserializes and validates.
pub fn to_config(table: Table) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError(e.message().to_string()))?;
    cfg.validate().map_err(|e| ConfigError(e.to_string()))?;
    Ok(cfg)
}

/// Parses a single command-line value as TOML, falling back to a bare string.
pub fn parse_value(text: &str) -> Value {
    let doc = format!("v = {text}");
    match toml::from_str::<Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(text.into())),
        Err(_) => Value::String(text.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mlmoment::Method;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        fs::write(&path, "samples = 50\nnoise = 0.3\npoints_file = \"pts.txt\"\n").unwrap();
        let args = ConfigArgs { config: Some(path), noise: Some(0.05), method: Some("cg".into()), ..Default::default() };
        let t = args.table().unwrap();
        assert_eq!(t["samples"], Value::Integer(50));
        assert_eq!(t["noise"], Value::Float(0.05));
        assert_eq!(t["points_file"].as_str().unwrap(), dir.path().join("pts.txt").display().to_string());
    }

    #[test]
    fn seed_sets_all_three() {
        let args = ConfigArgs { seed: Some(9), noise_seed: Some(3), ..Default::default() };
        let cfg = args.resolve().unwrap();
        assert_eq!((cfg.truth_seed, cfg.sampling_seed, cfg.noise_seed), (9, 9, 3));
    }

    #[test]
    fn defaults_without_flags() {
        let cfg = ConfigArgs::default().resolve().unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.method, Method::Lw);
    }

    #[test]
    fn bad_keys_and_values_are_config_errors() {
        let mut t = Table::new();
        t.insert("bogus".into(), Value::Integer(1));
        assert!(to_config(t).unwrap_err().downcast_ref::<ConfigError>().is_some());
        let args = ConfigArgs { irregularity: Some(1.5), ..Default::default() };
        assert!(args.resolve().unwrap_err().downcast_ref::<ConfigError>().is_some());
    }

    #[test]
    fn values_parse_as_toml() {
        assert_eq!(parse_value("0.5"), Value::Float(0.5));
        assert_eq!(parse_value("12"), Value::Integer(12));
        assert_eq!(parse_value("cg"), Value::String("cg".into()));
        assert_eq!(parse_value("true"), Value::Boolean(true));
    }
}
