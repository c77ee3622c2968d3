//! Reconstruction experiments on synthetic or external data (`f64`).

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{read_measurements, CoefSeq};
use crate::sampling::{generate_jittered_set, BoundSource, SamplingSet};
use crate::solvers::{
    run_multilevel, Carry, LevelTrace, Method, MultiLevelResult, StopConfig, StopFlavor, TailSource, Termination,
};
use crate::spaces::{GridSignal, GridSpace, Spectrum};

type C64 = Complex<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    Recursive,
    KnownTruth,
}

/// Everything a run depends on. Missing keys take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid_size: usize,
    pub bandwidth: usize,
    pub truth_seed: u64,
    /// Grid signal CSV (`index,re,im`) used as the truth instead of a synthetic one.
    pub signal_file: Option<PathBuf>,
    pub samples: usize,
    pub irregularity: f64,
    pub sampling_seed: u64,
    /// One point per line in `[0, 1)`.
    pub points_file: Option<PathBuf>,
    /// Noisy point values `j,t,re,im`; the truth is then unknown and `delta` is required.
    pub measurements_file: Option<PathBuf>,
    /// Keep every `decimate`-th sample.
    pub decimate: usize,
    /// Noise-to-signal ratio in the weighted norm.
    pub noise: f64,
    pub noise_seed: u64,
    /// Overrides the realized noise norm in the stopping rules.
    pub delta: Option<f64>,
    pub method: Method,
    pub stop_flavor: Option<StopFlavor>,
    pub eta: f64,
    pub tau: f64,
    pub drop_factor_two: bool,
    pub max_level: Option<usize>,
    pub max_iters: Option<usize>,
    pub tails: TailMode,
    pub bound_source: BoundSource,
    pub carry: Carry,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid_size: 1024,
            bandwidth: 30,
            truth_seed: 1,
            signal_file: None,
            samples: 107,
            irregularity: 0.9,
            sampling_seed: 42,
            points_file: None,
            measurements_file: None,
            decimate: 1,
            noise: 0.12,
            noise_seed: 7,
            delta: None,
            method: Method::Lw,
            stop_flavor: None,
            eta: 0.1,
            tau: 1.5,
            drop_factor_two: false,
            max_level: None,
            max_iters: None,
            tails: TailMode::Recursive,
            bound_source: BoundSource::Theoretical,
            carry: Carry::Terminal,
        }
    }
}

impl ExperimentConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.grid_size == 0 {
            return bad("grid_size must be positive".into());
        }
        if self.signal_file.is_none() && self.measurements_file.is_none() && 2 * self.bandwidth + 1 > self.grid_size {
            return bad(format!("bandwidth {} needs a grid of at least {}", self.bandwidth, 2 * self.bandwidth + 1));
        }
        if self.decimate == 0 {
            return bad("decimate must be positive".into());
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return bad(format!("noise must be non-negative, got {}", self.noise));
        }
        if !(0.0..1.0).contains(&self.irregularity) {
            return bad(format!("irregularity must lie in [0, 1), got {}", self.irregularity));
        }
        if self.measurements_file.is_some() && self.delta.is_none() {
            return bad("measured data need an explicit delta".into());
        }
        if self.tails == TailMode::KnownTruth && self.measurements_file.is_some() {
            return bad("known_truth tails need a truth".into());
        }
        self.stop_config(0.0).validate()
    }

    pub fn flavor(&self) -> StopFlavor {
        self.stop_flavor.unwrap_or_else(|| StopFlavor::default_for(self.method))
    }

    fn stop_config(&self, delta: f64) -> StopConfig<f64> {
        StopConfig {
            eta: self.eta,
            tau: self.tau,
            delta: self.delta.unwrap_or(delta),
            tails: TailSource::Recursive,
            flavor: self.flavor(),
            drop_factor_two: self.drop_factor_two,
            max_level: self.max_level,
            max_iters: self.max_iters,
            bound_source: self.bound_source,
            carry: self.carry,
        }
    }
}

/// Real signal with `|a_n| = 1/(1+|n|)` for `|n| <= bandwidth`, random phases,
/// `a_{-n} = conj(a_n)`.
pub fn truth_spectrum(bandwidth: usize, seed: u64) -> Spectrum<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases: Vec<f64> = (0..bandwidth).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    Spectrum::from_fn(bandwidth, |n| {
        let m = n.unsigned_abs();
        if m == 0 {
            return C64::new(1.0, 0.0);
        }
        let a = C64::from_polar(1.0 / (1.0 + m as f64), phases[m - 1]);
        if n > 0 {
            a
        } else {
            a.conj()
        }
    })
}

pub fn generate_truth(bandwidth: usize, seed: u64, grid_size: usize) -> Result<GridSignal<f64>> {
    GridSpace::new(grid_size)?.synthesize(&truth_spectrum(bandwidth, seed))
}

/// `sqrt(Σ w_j |v_j|²)`.
pub fn weighted_norm(values: &[C64], weights: &[f64]) -> f64 {
    values.iter().zip(weights).map(|(v, w)| w * v.norm_sqr()).sum::<f64>().sqrt()
}

/// Real white Gaussian noise scaled to `‖noise‖ = ν‖values‖` (weighted).
/// Returns the noise itself.
pub fn noise_for(values: &[C64], weights: &[f64], nu: f64, seed: u64) -> Vec<C64> {
    if nu == 0.0 {
        return vec![C64::new(0.0, 0.0); values.len()];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<C64> = values.iter().map(|_| C64::new(rng.sample(StandardNormal), 0.0)).collect();
    let norm = weighted_norm(&raw, weights);
    let factor = if norm > 0.0 { nu * weighted_norm(values, weights) / norm } else { 0.0 };
    raw.into_iter().map(|v| v * factor).collect()
}

/// Adds noise at level `ν` and returns the noisy values with the realized
/// weighted noise norm `δ`.
pub fn add_noise(values: &[C64], weights: &[f64], nu: f64, seed: u64) -> (Vec<C64>, f64) {
    let noise = noise_for(values, weights, nu, seed);
    let delta = weighted_norm(&noise, weights);
    (values.iter().zip(&noise).map(|(v, n)| v + n).collect(), delta)
}

/// Data of one experiment before the solve.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub grid_size: usize,
    pub truth: Option<GridSignal<f64>>,
    pub truth_spectrum: Option<Spectrum<f64>>,
    pub sampling: Arc<SamplingSet<f64>>,
    /// Noisy point values `x^δ(t_j)`.
    pub samples: Vec<C64>,
    /// Weighted norm of the data error.
    pub delta: f64,
    /// `√w_j x^δ(t_j)`.
    pub raw: CoefSeq<f64>,
}

impl Prepared {
    pub fn stop_config(&self, cfg: &ExperimentConfig) -> Result<StopConfig<f64>> {
        let mut stop = cfg.stop_config(self.delta);
        if cfg.tails == TailMode::KnownTruth {
            let spec = self.truth_spectrum.as_ref().ok_or_else(|| Error::Config("known_truth tails need a truth".into()))?;
            stop.tails = TailSource::KnownTruth(true_tails(spec, self.sampling.len()));
        }
        Ok(stop)
    }

    pub fn normalized_error(&self, x: &GridSignal<f64>) -> Option<f64> {
        self.truth.as_ref().map(|t| t.sub(x).norm() / t.norm())
    }
}

/// `‖x* - P_N x*‖` for `N = 0 ..= (r-1)/2`.
pub fn true_tails(spec: &Spectrum<f64>, samples: usize) -> Vec<f64> {
    (0..=(samples.saturating_sub(1) / 2)).map(|n| tail_sqr(spec, n).sqrt()).collect()
}

fn tail_sqr(spec: &Spectrum<f64>, level: usize) -> f64 {
    spec.frequencies().filter(|n| n.unsigned_abs() > level).map(|n| spec.coeff(n).norm_sqr()).sum()
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

/// Builds the truth, sampling set and noisy data.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    if let Some(path) = &cfg.measurements_file {
        let (full, values) = read_measurements::<f64, _>(open(path)?)?;
        let keep: Vec<usize> = (0..full.len()).step_by(cfg.decimate).collect();
        let sampling = if cfg.decimate > 1 { full.decimate(cfg.decimate)? } else { full };
        let samples: Vec<C64> = keep.iter().map(|&j| values[j]).collect();
        let raw = weighted(&samples, sampling.weights());
        return Ok(Prepared {
            grid_size: cfg.grid_size,
            truth: None,
            truth_spectrum: None,
            sampling: Arc::new(sampling),
            samples,
            delta: cfg.delta.unwrap_or(0.0),
            raw,
        });
    }

    let (truth, grid_size) = match &cfg.signal_file {
        Some(path) => {
            let x = GridSignal::read_csv(open(path)?)?;
            let len = x.len();
            (x, len)
        }
        None => (generate_truth(cfg.bandwidth, cfg.truth_seed, cfg.grid_size)?, cfg.grid_size),
    };
    let space = GridSpace::new(grid_size)?;
    let spectrum = space.spectrum(&truth, space.max_level())?;

    let full = match &cfg.points_file {
        Some(path) => SamplingSet::read_points(open(path)?)?,
        None => generate_jittered_set(cfg.samples, cfg.irregularity, cfg.sampling_seed)?,
    };
    let clean: Vec<C64> = full.points().iter().map(|&t| spectrum.eval(t)).collect();
    let noise = noise_for(&clean, full.weights(), cfg.noise, cfg.noise_seed);

    let keep: Vec<usize> = (0..full.len()).step_by(cfg.decimate).collect();
    let sampling = if cfg.decimate > 1 { full.decimate(cfg.decimate)? } else { full };
    let samples: Vec<C64> = keep.iter().map(|&j| clean[j] + noise[j]).collect();
    let kept_noise: Vec<C64> = keep.iter().map(|&j| noise[j]).collect();
    let delta = weighted_norm(&kept_noise, sampling.weights());
    let raw = weighted(&samples, sampling.weights());
    Ok(Prepared {
        grid_size,
        truth: Some(truth),
        truth_spectrum: Some(spectrum),
        sampling: Arc::new(sampling),
        samples,
        delta,
        raw,
    })
}

fn weighted(values: &[C64], weights: &[f64]) -> CoefSeq<f64> {
    CoefSeq::new(values.iter().zip(weights).map(|(v, w)| v * w.sqrt()).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailRow {
    pub level: usize,
    pub true_tail_sqr: Option<f64>,
    /// `Σ w_j |y_j|² - ‖x_N‖²` from the level's final iterate.
    pub estimated_tail_sqr: Option<f64>,
    /// `ε_N²` used in the level rule.
    pub used_tail_sqr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metadata {
    /// Thresholds compare scaled residuals against `s_N·δ` and `s_N·ε_N`.
    pub data_scaling: &'static str,
    pub delta_norm: &'static str,
    pub method: Method,
    pub flavor: StopFlavor,
    pub eta: f64,
    pub tau: f64,
    pub drop_factor_two: bool,
    pub tails: TailMode,
    pub bound_source: BoundSource,
    pub carry: Carry,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub metadata: Metadata,
    pub grid_size: usize,
    pub samples: usize,
    pub delta: f64,
    pub max_gap: f64,
    pub gap_sigma: f64,
    pub max_gap_grid: f64,
    pub gap_sigma_grid: f64,
    pub final_level: usize,
    pub start_level: usize,
    pub termination: Termination,
    pub total_iterations: usize,
    pub normalized_error: Option<f64>,
    pub tails: Vec<TailRow>,
    pub traces: Vec<LevelTrace>,
    pub reconstruction: GridSignal<f64>,
    pub spectrum: Spectrum<f64>,
    pub truth: Option<GridSignal<f64>>,
    pub points: Vec<f64>,
    pub data: Vec<C64>,
    pub elapsed_secs: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    metadata: &'a Metadata,
    grid_size: usize,
    samples: usize,
    delta: f64,
    max_gap: f64,
    gap_sigma: f64,
    max_gap_grid: f64,
    gap_sigma_grid: f64,
    final_level: usize,
    start_level: usize,
    termination: Termination,
    total_iterations: usize,
    normalized_error: Option<f64>,
    elapsed_secs: f64,
    levels: &'a [LevelTrace],
}

impl RunReport {
    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&Summary {
            metadata: &self.metadata,
            grid_size: self.grid_size,
            samples: self.samples,
            delta: self.delta,
            max_gap: self.max_gap,
            gap_sigma: self.gap_sigma,
            max_gap_grid: self.max_gap_grid,
            gap_sigma_grid: self.gap_sigma_grid,
            final_level: self.final_level,
            start_level: self.start_level,
            termination: self.termination,
            total_iterations: self.total_iterations,
            normalized_error: self.normalized_error,
            elapsed_secs: self.elapsed_secs,
            levels: &self.traces,
        })?)
    }

    /// Same report with every timing field zeroed, for comparisons.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.elapsed_secs = 0.0;
        r.traces.iter_mut().for_each(|t| t.elapsed_secs = 0.0);
        r
    }
}

impl PartialEq for RunReport {
    fn eq(&self, other: &Self) -> bool {
        self.metadata == other.metadata
            && self.grid_size == other.grid_size
            && self.samples == other.samples
            && self.delta == other.delta
            && self.max_gap == other.max_gap
            && self.gap_sigma == other.gap_sigma
            && self.final_level == other.final_level
            && self.start_level == other.start_level
            && self.termination == other.termination
            && self.total_iterations == other.total_iterations
            && self.normalized_error == other.normalized_error
            && self.tails == other.tails
            && self.traces == other.traces
            && self.reconstruction == other.reconstruction
            && self.spectrum == other.spectrum
            && self.truth == other.truth
            && self.points == other.points
            && self.data == other.data
            && self.elapsed_secs == other.elapsed_secs
    }
}

/// Runs the multi-level solve on prepared data.
pub fn solve(cfg: &ExperimentConfig, data: &Prepared) -> Result<MultiLevelResult<f64>> {
    let stop = data.stop_config(cfg)?;
    run_multilevel(cfg.method, &data.raw, data.sampling.clone(), data.grid_size, &stop)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    let started = Instant::now();
    let data = prepare(cfg)?;
    let result = solve(cfg, &data)?;
    let tails = data.truth_spectrum.as_ref();
    let tail_rows = result
        .traces
        .iter()
        .map(|t| TailRow {
            level: t.level,
            true_tail_sqr: tails.map(|s| tail_sqr(s, t.level)),
            estimated_tail_sqr: t.tail_energy_estimate,
            used_tail_sqr: t.tail_estimate * t.tail_estimate,
        })
        .collect();
    let s = &data.sampling;
    Ok(RunReport {
        metadata: Metadata {
            data_scaling: "scaled",
            delta_norm: "weighted_l2",
            method: cfg.method,
            flavor: cfg.flavor(),
            eta: cfg.eta,
            tau: cfg.tau,
            drop_factor_two: cfg.drop_factor_two,
            tails: cfg.tails,
            bound_source: cfg.bound_source,
            carry: cfg.carry,
        },
        grid_size: data.grid_size,
        samples: s.len(),
        delta: data.stop_config(cfg)?.delta,
        max_gap: s.max_gap(),
        gap_sigma: s.gap_sigma(),
        max_gap_grid: s.max_gap_grid_units(data.grid_size),
        gap_sigma_grid: s.gap_sigma_grid_units(data.grid_size),
        final_level: result.final_level,
        start_level: result.start_level,
        termination: result.termination,
        total_iterations: result.total_iterations,
        normalized_error: data.normalized_error(&result.x),
        tails: tail_rows,
        traces: result.traces,
        reconstruction: result.x,
        spectrum: result.spectrum,
        truth: data.truth,
        points: s.points().to_vec(),
        data: data.samples,
        elapsed_secs: started.elapsed().as_secs_f64(),
    })
}

/// Files written by [`emit_report`].
#[derive(Clone, Debug, PartialEq)]
pub struct ReportPaths {
    pub reconstruction: PathBuf,
    pub trace: PathBuf,
    pub tails: Option<PathBuf>,
}

/// Writes `reconstruction.csv`, `trace.json` and, when the truth is
/// known, `tails.csv` into `dir`.
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<ReportPaths> {
    fs::create_dir_all(dir)?;
    let recon_path = dir.join("reconstruction.csv");
    let mut out = BufWriter::new(File::create(&recon_path)?);
    writeln!(out, "kind,t,truth_re,truth_im,recon_re,recon_im,sample_re,sample_im")?;
    let len = report.grid_size;
    let opt = |v: Option<C64>| match v {
        Some(c) => format!("{},{}", c.re, c.im),
        None => ",".to_string(),
    };
    for (l, r) in report.reconstruction.values().iter().enumerate() {
        let truth = report.truth.as_ref().map(|t| t.values()[l]);
        writeln!(out, "grid,{},{},{},{},,", l as f64 / len as f64, opt(truth), r.re, r.im)?;
    }
    let truth_spec = report
        .truth
        .as_ref()
        .map(|t| GridSpace::new(len).and_then(|s| s.spectrum(t, s.max_level())))
        .transpose()?;
    for (&t, y) in report.points.iter().zip(&report.data) {
        let truth = truth_spec.as_ref().map(|s| s.eval(t));
        let r = report.spectrum.eval(t);
        writeln!(out, "sample,{},{},{},{},{},{}", t, opt(truth), r.re, r.im, y.re, y.im)?;
    }
    out.flush()?;

    let trace_path = dir.join("trace.json");
    fs::write(&trace_path, report.summary_json()? + "\n")?;

    let tails_path = if report.truth.is_some() {
        let path = dir.join("tails.csv");
        let mut out = BufWriter::new(File::create(&path)?);
        writeln!(out, "level,true_tail_sqr,estimated_tail_sqr,used_tail_sqr")?;
        for row in &report.tails {
            let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", row.level, f(row.true_tail_sqr), f(row.estimated_tail_sqr), row.used_tail_sqr)?;
        }
        out.flush()?;
        Some(path)
    } else {
        None
    };
    Ok(ReportPaths { reconstruction: recon_path, trace: trace_path, tails: tails_path })
}
