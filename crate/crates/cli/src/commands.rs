use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use mlmoment::experiment::{emit_report, run_experiment, ExperimentConfig, RunReport};
use mlmoment::{verify, Termination};
use rayon::prelude::*;
use toml::Value;

use crate::config::{parse_value, to_config, ConfigArgs, ConfigError};

/// Exit status of a command that ran to completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    /// The level cap was reached before the global rule fired.
    LevelCap,
    ChecksFailed,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Config key to vary, e.g. noise, samples, irregularity, eta.
    #[arg(long)]
    pub param: String,
    /// Comma-separated values for the parameter.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
    /// Runs per value; repeat i shifts every seed by i.
    #[arg(long, default_value_t = 1)]
    pub repeats: u64,
    /// Output directory for sweep.csv.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Number of random configurations.
    #[arg(long, default_value_t = 50)]
    pub cases: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

pub fn run(args: &RunArgs) -> Result<Outcome> {
    let cfg = args.cfg.resolve()?;
    let report = run_experiment(&cfg)?;
    write_run(&cfg, &report, &args.out)?;
    println!("{}", describe(&report));
    println!("output written to {}", args.out.display());
    Ok(if report.termination == Termination::LevelCap { Outcome::LevelCap } else { Outcome::Ok })
}

fn write_run(cfg: &ExperimentConfig, report: &RunReport, out: &Path) -> Result<()> {
    emit_report(report, out)?;
    let create = |name: &str| -> Result<BufWriter<File>> {
        let path = out.join(name);
        Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
    };
    let mut w = create("signal.csv")?;
    report.reconstruction.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create("spectrum.csv")?;
    report.spectrum.write_csv(&mut w)?;
    w.flush()?;
    let text = toml::to_string(cfg).context("serializing the effective config")?;
    fs::write(out.join("config.toml"), text)?;
    Ok(())
}

fn describe(report: &RunReport) -> String {
    let mut s = format!(
        "level {} ({:?}) after {} iterations, delta {:.4e}",
        report.final_level, report.termination, report.total_iterations, report.delta
    );
    if let Some(e) = report.normalized_error {
        s += &format!(", normalized error {e:.4}");
    }
    s
}

struct SweepRow {
    value: String,
    repeat: u64,
    final_level: Option<usize>,
    termination: Option<Termination>,
    normalized_error: Option<f64>,
    total_iterations: Option<usize>,
    delta: Option<f64>,
    error: Option<String>,
}

pub fn sweep(args: &SweepArgs) -> Result<Outcome> {
    let base = args.cfg.table()?;
    let mut jobs = Vec::new();
    for value in &args.values {
        for repeat in 0..args.repeats {
            let mut table = base.clone();
            table.insert(args.param.clone(), parse_value(value));
            for key in ["truth_seed", "sampling_seed", "noise_seed"] {
                let seed = match table.get(key) {
                    Some(Value::Integer(s)) => *s,
                    _ => default_seed(key),
                };
                table.insert(key.into(), Value::Integer(seed + repeat as i64));
            }
            let cfg = to_config(table).map_err(|e| ConfigError(format!("{} = {value}: {e}", args.param)))?;
            jobs.push((value.clone(), repeat, cfg));
        }
    }

    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|(value, repeat, cfg)| match run_experiment(cfg) {
            Ok(r) => SweepRow {
                value: value.clone(),
                repeat: *repeat,
                final_level: Some(r.final_level),
                termination: Some(r.termination),
                normalized_error: r.normalized_error,
                total_iterations: Some(r.total_iterations),
                delta: Some(r.delta),
                error: None,
            },
            Err(e) => SweepRow {
                value: value.clone(),
                repeat: *repeat,
                final_level: None,
                termination: None,
                normalized_error: None,
                total_iterations: None,
                delta: None,
                error: Some(e.to_string()),
            },
        })
        .collect();

    fs::create_dir_all(&args.out)?;
    let path = args.out.join("sweep.csv");
    let mut w = BufWriter::new(File::create(&path)?);
    writeln!(w, "{},repeat,final_level,termination,normalized_error,total_iterations,delta,error", args.param)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in &rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.value,
            r.repeat,
            opt(r.final_level.map(|x| x.to_string())),
            opt(r.termination.map(|t| serde_json::to_value(t).unwrap().as_str().unwrap_or_default().to_string())),
            opt(r.normalized_error.map(|x| x.to_string())),
            opt(r.total_iterations.map(|x| x.to_string())),
            opt(r.delta.map(|x| x.to_string())),
            opt(r.error.as_ref().map(|e| format!("\"{}\"", e.replace('"', "'")))),
        )?;
    }
    w.flush()?;

    println!("{:>12}  {:>5}  {:>10}  {:>10}  {:>10}", args.param, "runs", "mean level", "mean error", "max error");
    for value in &args.values {
        let ok: Vec<&SweepRow> = rows.iter().filter(|r| &r.value == value && r.error.is_none()).collect();
        let n = ok.len().max(1) as f64;
        let level = ok.iter().filter_map(|r| r.final_level).sum::<usize>() as f64 / n;
        let errs: Vec<f64> = ok.iter().filter_map(|r| r.normalized_error).collect();
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        let mean = (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64);
        let max = errs.iter().copied().reduce(f64::max);
        println!("{value:>12}  {:>5}  {level:>10.2}  {:>10}  {:>10}", ok.len(), fmt(mean), fmt(max));
    }
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} runs failed; see {}", path.display());
    }
    println!("results written to {}", path.display());
    Ok(Outcome::Ok)
}

fn default_seed(key: &str) -> i64 {
    let d = ExperimentConfig::default();
    (match key {
        "truth_seed" => d.truth_seed,
        "sampling_seed" => d.sampling_seed,
        _ => d.noise_seed,
    }) as i64
}

pub fn verify(args: &VerifyArgs) -> Result<Outcome> {
    let checks = verify::run_checks(args.cases, args.seed)?;
    for c in &checks {
        println!("{c}");
    }
    Ok(if checks.iter().all(|c| c.passed) { Outcome::Ok } else { Outcome::ChecksFailed })
}
