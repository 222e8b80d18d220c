//! Command-line front end: survival, rate, transition and sweep runs written
//! to CSV and JSON.

pub mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::amplitude::{pole_approximation, survival_closed_form_lorentzian, survival_spectral_integral_with, SpectralOptions, SurvivalSeries};
use crate::error::Error;
use crate::formfactor::{Family, FormFactor};
use crate::model::{DecayModel, SurvivalModel};
use crate::zeno::{
    characteristic_scales, default_tau_max, effective_rate_curve, existence_criteria, find_transition_time, regime_of,
    CharacteristicScales, EffectiveRateCurve, ExistenceCriteria, TransitionReport, DEFAULT_GRID_POINTS, SCAN_START,
};
pub use config::RunConfig;

const DEFAULT_T_POINTS: usize = 201;
const DEFAULT_TAU_POINTS: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Numeric(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 1,
            CliError::Numeric(e) => match e {
                Error::NoDecay(_) | Error::InfiniteZenoTime => 4,
                Error::Tolerance { .. }
                | Error::NewtonNonConvergence { .. }
                | Error::Consistency(_)
                | Error::InfiniteRate(_)
                | Error::Degenerate(_)
                | Error::OnCut { .. } => 3,
                Error::InvalidParameter(_) | Error::OutOfRange { .. } | Error::ContinuationUnsupported(_) => 2,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Numeric(e) => e.kind(),
        }
    }

    /// One-line JSON diagnostic for the error stream.
    pub fn diagnostic(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        })
        .to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Survival,
    Rate,
    Transition,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Survival => "survival",
            Command::Rate => "rate",
            Command::Transition => "transition",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub no_cache: bool,
    pub tolerance: Option<f64>,
}

/// Files written by a run, in the order they were produced.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunSummary {
    pub command: &'static str,
    pub files: Vec<PathBuf>,
    pub cache_hits: usize,
}

struct Context {
    cfg: RunConfig,
    base: PathBuf,
    out: PathBuf,
    spectral: SpectralOptions,
    no_cache: bool,
}

impl Context {
    fn new(config_path: &Path, opts: &RunOptions) -> Result<Self, CliError> {
        let cfg = RunConfig::load(config_path)?;
        let base = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
        let out = match (&opts.out, &cfg.output.dir) {
            (Some(dir), _) => dir.clone(),
            (None, Some(dir)) => base.join(dir),
            (None, None) => PathBuf::from("zeno-out"),
        };
        let mut spectral = SpectralOptions::default();
        if let Some(tol) = opts.tolerance.or(cfg.task.tolerance) {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(CliError::Config(format!("tolerance must be positive and finite, got {tol}")));
            }
            spectral.tolerance = tol;
        }
        Ok(Self {
            cfg,
            base,
            out,
            spectral,
            no_cache: opts.no_cache,
        })
    }

    fn form_factor(&self) -> Result<FormFactor, CliError> {
        let ff = self.cfg.form_factor(&self.base)?;
        if ff.lambda() == 0.0 {
            return Err(Error::NoDecay("zero coupling: the level is stationary".into()).into());
        }
        Ok(ff)
    }

    fn write(&self, name: &str, contents: &str, summary: &mut RunSummary) -> Result<(), CliError> {
        let path = self.out.join(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
                path: dir.to_path_buf(),
                source,
            })?;
        }
        std::fs::write(&path, contents).map_err(|source| CliError::Io { path: path.clone(), source })?;
        summary.files.push(path);
        Ok(())
    }
}

pub fn run(command: Command, config_path: &Path, opts: &RunOptions) -> Result<RunSummary, CliError> {
    let ctx = Context::new(config_path, opts)?;
    let mut summary = RunSummary {
        command: command.name(),
        ..RunSummary::default()
    };
    match command {
        Command::Survival => run_survival(&ctx, &mut summary)?,
        Command::Rate => run_rate(&ctx, &mut summary)?,
        Command::Transition => run_transition(&ctx, &mut summary)?,
        Command::Sweep => run_sweep(&ctx, &mut summary)?,
    }
    Ok(summary)
}

fn num(x: f64) -> String {
    // normalise negative zero so equal grids print identically
    format!("{:e}", if x == 0.0 { 0.0 } else { x })
}

fn linear_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, CliError> {
    if n < 2 || !(hi > lo) {
        return Err(CliError::Config(format!("grid needs at least two points and max > min, got [{lo}, {hi}] with {n}")));
    }
    Ok((0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect())
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, CliError> {
    if n < 2 || !(lo > 0.0 && hi > lo) {
        return Err(CliError::Config(format!("log grid needs 0 < min < max and two points, got [{lo}, {hi}] with {n}")));
    }
    let step = (hi / lo).ln() / (n - 1) as f64;
    Ok((0..n)
        .map(|i| if i + 1 == n { hi } else { lo * (step * i as f64).exp() })
        .collect())
}

fn run_survival(ctx: &Context, summary: &mut RunSummary) -> Result<(), CliError> {
    let ff = ctx.form_factor()?;
    let wa = ctx.cfg.omega_a()?;
    let task = &ctx.cfg.task;
    let times = linear_grid(
        task.t_min.unwrap_or(0.0),
        task.t_max.unwrap_or(50.0 / ff.bandwidth()),
        task.t_points.unwrap_or(DEFAULT_T_POINTS),
    )?;
    if times[0] < 0.0 {
        return Err(CliError::Config("t_min must be non-negative".into()));
    }
    let default_method = if ff.family() == Family::Lorentzian { "closed_form" } else { "spectral" };
    let methods = task.methods.clone().unwrap_or_else(|| vec![default_method.to_string()]);

    let mut columns: Vec<(String, SurvivalSeries)> = Vec::new();
    for m in &methods {
        let series = match m.as_str() {
            "closed_form" => {
                if ff.family() != Family::Lorentzian {
                    return Err(CliError::Config(format!("closed_form needs a lorentzian form factor, got {}", ff.family())));
                }
                survival_closed_form_lorentzian(ff.lambda(), ff.bandwidth(), wa, &times)?
            }
            "spectral" => survival_spectral_integral_with(&ff, wa, &times, ctx.spectral)?,
            _ => {
                let model = DecayModel::with_options(&ff, wa, ctx.spectral)?;
                pole_approximation(model.pole()?, &times)?
            }
        };
        columns.push((m.clone(), series));
    }

    let mut csv = String::from("t");
    for (m, _) in &columns {
        let _ = write!(csv, ",re_x_{m},im_x_{m},p_{m}");
    }
    csv.push('\n');
    for (i, t) in times.iter().enumerate() {
        csv.push_str(&num(*t));
        for (_, s) in &columns {
            let x = s.amplitudes[i];
            let _ = write!(csv, ",{},{},{}", num(x.re), num(x.im), num(s.probabilities[i]));
        }
        csv.push('\n');
    }
    ctx.write("survival.csv", &csv, summary)
}

fn rate_grid(ctx: &Context, model: &DecayModel) -> Result<Vec<f64>, CliError> {
    let task = &ctx.cfg.task;
    let lo = task.tau_min.unwrap_or(SCAN_START / model.bandwidth());
    let hi = match task.tau_max {
        Some(v) => v,
        None => default_tau_max(model)?,
    };
    log_grid(lo, hi, task.tau_points.unwrap_or(DEFAULT_TAU_POINTS))
}

fn rate_csv(curve: &EffectiveRateCurve) -> String {
    let mut csv = String::from("tau,gamma,gamma0,regime\n");
    for (tau, g) in curve.taus.iter().zip(&curve.gammas) {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            num(*tau),
            num(*g),
            num(curve.gamma0),
            regime_of(*g, curve.gamma0).name()
        );
    }
    csv
}

fn run_rate(ctx: &Context, summary: &mut RunSummary) -> Result<(), CliError> {
    let ff = ctx.form_factor()?;
    let model = DecayModel::with_options(&ff, ctx.cfg.omega_a()?, ctx.spectral)?;
    let taus = rate_grid(ctx, &model)?;
    let curve = effective_rate_curve(&model, &taus)?;
    ctx.write("rate.csv", &rate_csv(&curve), summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TransitionOutput {
    #[serde(flatten)]
    report: TransitionReport,
    criteria: CriteriaOutput,
    scales: ScalesOutput,
    config: RunConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CriteriaOutput {
    z_less_1: bool,
    asymmetry: Option<bool>,
    near_boundary: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScalesOutput {
    zeno_time: f64,
    jump_time: f64,
    bandwidth_time: f64,
    jump_to_bandwidth: f64,
    golden_rule_jump_time: Option<f64>,
    threshold_ratio: Option<f64>,
}

impl From<ExistenceCriteria> for CriteriaOutput {
    fn from(c: ExistenceCriteria) -> Self {
        Self {
            z_less_1: c.z_less_1,
            asymmetry: c.asymmetry,
            near_boundary: c.near_boundary,
        }
    }
}

impl From<CharacteristicScales> for ScalesOutput {
    fn from(s: CharacteristicScales) -> Self {
        Self {
            zeno_time: s.zeno_time,
            jump_time: s.jump_time,
            bandwidth_time: s.bandwidth_time,
            jump_to_bandwidth: s.jump_to_bandwidth,
            golden_rule_jump_time: s.golden_rule_jump_time,
            threshold_ratio: s.threshold_ratio,
        }
    }
}

fn transition_output(ctx: &Context, model: &DecayModel, cfg: RunConfig) -> Result<TransitionOutput, CliError> {
    let tau_max = match ctx.cfg.task.tau_max {
        Some(v) => v,
        None => default_tau_max(model)?,
    };
    let grid = ctx.cfg.task.grid_points.unwrap_or(DEFAULT_GRID_POINTS);
    Ok(TransitionOutput {
        report: find_transition_time(model, tau_max, grid)?,
        criteria: existence_criteria(model)?.into(),
        scales: characteristic_scales(model)?.into(),
        config: cfg,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable output");
    s.push('\n');
    s
}

fn run_transition(ctx: &Context, summary: &mut RunSummary) -> Result<(), CliError> {
    let ff = ctx.form_factor()?;
    let model = DecayModel::with_options(&ff, ctx.cfg.omega_a()?, ctx.spectral)?;
    let out = transition_output(ctx, &model, ctx.cfg.clone())?;
    ctx.write("transition.json", &to_json(&out), summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SweepEntry {
    omega_ratio: f64,
    omega_a: f64,
    rate_csv: String,
    transition_json: String,
    tau_star: Option<f64>,
    all_roots: Vec<f64>,
    z_renorm: f64,
    gamma0: f64,
    criterion_z_less_1: bool,
}

#[derive(Debug, Clone, Serialize)]
struct SweepSummary<'a> {
    entries: Vec<SweepEntry>,
    config: &'a RunConfig,
}

fn digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(&h.finalize()[..8])
}

fn run_sweep(ctx: &Context, summary: &mut RunSummary) -> Result<(), CliError> {
    let ratios = ctx
        .cfg
        .task
        .omega_ratios
        .clone()
        .ok_or_else(|| CliError::Config("sweep needs task.omega_ratios".into()))?;
    if ratios.is_empty() {
        return Err(CliError::Config("task.omega_ratios is empty".into()));
    }
    let ff = ctx.form_factor()?;
    let table_bytes = match &ctx.cfg.model.table {
        Some(t) => {
            let path = ctx.cfg.table_path(&ctx.base, t);
            std::fs::read(&path).map_err(|source| CliError::Io { path, source })?
        }
        None => Vec::new(),
    };
    let task_key = serde_json::to_vec(&(&ctx.cfg.task, ctx.spectral.tolerance, env!("CARGO_PKG_VERSION"))).expect("serialisable task");
    let task_hash = digest(&[&task_key]);

    let results: Vec<Result<(SweepEntry, Vec<(String, String)>, bool), CliError>> = ratios
        .par_iter()
        .map(|&ratio| {
            let wa = ratio * ff.bandwidth();
            let mut entry_cfg = ctx.cfg.clone();
            entry_cfg.model.omega_a = Some(wa);
            entry_cfg.task.omega_ratios = None;
            let model_key = serde_json::to_vec(&entry_cfg.model).expect("serialisable model");
            let model_hash = digest(&[&model_key, &table_bytes]);
            let rate_name = format!("sweep/rate-{model_hash}-{task_hash}.csv");
            let json_name = format!("sweep/transition-{model_hash}-{task_hash}.json");

            let cached = (!ctx.no_cache)
                .then(|| {
                    let rate = std::fs::read_to_string(ctx.out.join(&rate_name)).ok()?;
                    let json = std::fs::read_to_string(ctx.out.join(&json_name)).ok()?;
                    let parsed: TransitionOutput = serde_json::from_str(&json).ok()?;
                    Some((rate, json, parsed))
                })
                .flatten();
            let hit = cached.is_some();
            let (rate, json, out) = match cached {
                Some(c) => c,
                None => {
                    let model = DecayModel::with_options(&ff, wa, ctx.spectral)?;
                    let taus = rate_grid(ctx, &model)?;
                    let rate = rate_csv(&effective_rate_curve(&model, &taus)?);
                    let out = transition_output(ctx, &model, entry_cfg)?;
                    (rate, to_json(&out), out)
                }
            };
            let entry = SweepEntry {
                omega_ratio: ratio,
                omega_a: wa,
                rate_csv: rate_name.clone(),
                transition_json: json_name.clone(),
                tau_star: out.report.tau_star,
                all_roots: out.report.all_roots.clone(),
                z_renorm: out.report.z_renorm,
                gamma0: out.report.gamma0,
                criterion_z_less_1: out.report.criterion_z_less_1,
            };
            Ok((entry, vec![(rate_name, rate), (json_name, json)], hit))
        })
        .collect();

    let mut entries = Vec::with_capacity(results.len());
    for r in results {
        let (entry, files, hit) = r?;
        if hit {
            summary.cache_hits += 1;
            summary.files.extend(files.iter().map(|(name, _)| ctx.out.join(name)));
        } else {
            for (name, contents) in &files {
                ctx.write(name, contents, summary)?;
            }
        }
        entries.push(entry);
    }
    let doc = SweepSummary {
        entries,
        config: &ctx.cfg,
    };
    ctx.write("sweep_summary.json", &to_json(&doc), summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::from(Error::NoDecay("x".into())).exit_code(), 4);
        let tol = Error::Tolerance {
            estimate: 0.0,
            achieved: 1.0,
            requested: 0.1,
        };
        assert_eq!(CliError::from(tol).exit_code(), 3);
        let d = CliError::from(Error::NoDecay("zero".into())).diagnostic();
        assert!(!d.contains('\n'));
        let v: serde_json::Value = serde_json::from_str(&d).unwrap();
        assert_eq!(v["error"], "no_decay");
    }

    #[test]
    fn grids() {
        let g = log_grid(1e-4, 50.0, 5).unwrap();
        assert_eq!((g[0], g[4]), (1e-4, 50.0));
        assert!(linear_grid(1.0, 1.0, 4).is_err());
        assert_eq!(num(0.1), "1e-1");
        assert_eq!(num(-2.5e-300), "-2.5e-300");
    }
}
