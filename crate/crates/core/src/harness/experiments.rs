//! Training pipeline with per-stage checkpoints, the three-variant
//! comparison, the capacity sweep, and single-policy evaluation.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::artifacts::{emit_results, wilson_interval, write_csv, write_json, write_jsonl, EpisodeRow, RunManifest};
use crate::harness::config::{ControllerSpec, ExperimentConfig};
use crate::harness::episode::run_network_episode;
use crate::learning::{
    select_lambda, sweep_lambda, synthesize, train_estimator, train_ideal_control, CemStats, DelaySource,
    LagrangianWeights, SweepPoint,
};
use crate::policies::{CoDesignPolicy, Controller, Estimator, QosPolicy};
use crate::rng::derive;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Control,
    Estimator,
    Qos,
    Synthesis,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Control, Stage::Estimator, Stage::Qos, Stage::Synthesis];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Control => "control",
            Stage::Estimator => "estimator",
            Stage::Qos => "qos",
            Stage::Synthesis => "synthesis",
        }
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::contract(format!("unknown stage `{s}`")))
    }
}

/// Checkpoint files, one per trained policy.
pub mod checkpoint {
    pub const CONTROL: &str = "control.json";
    /// Variant (i): estimator with static full reliability.
    pub const ESTIMATOR: &str = "estimator.json";
    /// QoS policy over the estimator, before synthesis.
    pub const QOS: &str = "qos.json";
    /// Variant (ii): QoS policy with no estimator.
    pub const QOS_NO_ESTIMATOR: &str = "qos_no_estimator.json";
    /// Variant (iii): full co-design after synthesis.
    pub const CODESIGN: &str = "codesign.json";
    pub const SELECTION: &str = "selection.json";
}

/// λ chosen for each QoS policy by the sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub lambda: f64,
    pub lambda_no_estimator: f64,
    pub j_max: f64,
}

pub fn load_checkpoint(cfg: &ExperimentConfig, file: &str, stage: Stage) -> Result<CoDesignPolicy> {
    let path = cfg.checkpoint_dir().join(file);
    if !path.exists() {
        return Err(Error::MissingCheckpoint {
            stage: stage.name().to_string(),
        });
    }
    CoDesignPolicy::load_json(&path)
}

fn save_checkpoint(cfg: &ExperimentConfig, file: &str, policy: &CoDesignPolicy) -> Result<PathBuf> {
    let dir = cfg.checkpoint_dir();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = dir.join(file);
    policy.save_json(&path)?;
    Ok(path)
}

#[derive(Serialize)]
struct ProgressLine<'a> {
    stage: &'a str,
    #[serde(flatten)]
    stats: &'a CemStats,
}

fn write_progress(cfg: &ExperimentConfig, stage: &str, history: &[CemStats]) -> Result<()> {
    let path = cfg.checkpoint_dir().join(format!("progress_{stage}.jsonl"));
    write_jsonl(&path, history.iter().map(|stats| ProgressLine { stage, stats }))
}

fn static_qos(cfg: &ExperimentConfig) -> QosPolicy {
    QosPolicy::Constant { q: 1.0, tau: cfg.train.tau }
}

/// Runs one stage, reading its inputs from and writing its outputs to the
/// checkpoint directory.
pub fn train_stage(cfg: &ExperimentConfig, stage: Stage) -> Result<Vec<PathBuf>> {
    let model = cfg.plant_model()?;
    let train = &cfg.train;
    let mut written = vec![];
    match stage {
        Stage::Control => {
            let controller = match &cfg.policy.controller {
                ControllerSpec::Pd { .. } => Controller::Pd(cfg.policy.controller.pd_gains().expect("pd spec")),
                ControllerSpec::Learned => {
                    let (c, report) = train_ideal_control(&model, train)?;
                    write_progress(cfg, "control", &report.history)?;
                    c
                }
            };
            let policy = CoDesignPolicy {
                controller,
                estimator: Estimator::Passthrough,
                qos: static_qos(cfg),
            };
            written.push(save_checkpoint(cfg, checkpoint::CONTROL, &policy)?);
        }
        Stage::Estimator => {
            let base = load_checkpoint(cfg, checkpoint::CONTROL, Stage::Control)?;
            let (est, report) = train_estimator(
                &model,
                &base.controller,
                &DelaySource::Distribution(cfg.delay_distribution()),
                train,
                None,
            )?;
            write_progress(cfg, "estimator", &report.history)?;
            let policy = CoDesignPolicy {
                estimator: Estimator::Learned(est),
                qos: static_qos(cfg),
                ..base
            };
            written.push(save_checkpoint(cfg, checkpoint::ESTIMATOR, &policy)?);
        }
        Stage::Qos => {
            let with_est = load_checkpoint(cfg, checkpoint::ESTIMATOR, Stage::Estimator)?;
            let no_est = CoDesignPolicy {
                estimator: Estimator::Passthrough,
                ..with_est.clone()
            };
            let (sweep, sel) = sweep_both(cfg, &with_est, &no_est)?;
            let csv = cfg.checkpoint_dir().join("lambda_sweep.csv");
            write_sweep_csv(&csv, &sweep)?;
            written.push(csv);
            let pick = |variant: &str, lambda: f64| {
                sweep
                    .iter()
                    .find(|r| r.variant == variant && r.lambda == lambda)
                    .map(|r| r.policy.clone())
                    .expect("selected λ is in the sweep")
            };
            written.push(save_checkpoint(cfg, checkpoint::QOS, &pick("estimator", sel.lambda))?);
            written.push(save_checkpoint(
                cfg,
                checkpoint::QOS_NO_ESTIMATOR,
                &pick("no_estimator", sel.lambda_no_estimator),
            )?);
            let sel_path = cfg.checkpoint_dir().join(checkpoint::SELECTION);
            write_json(&sel_path, &sel)?;
            written.push(sel_path);
        }
        Stage::Synthesis => {
            let qos = load_checkpoint(cfg, checkpoint::QOS, Stage::Qos)?;
            let sel = load_selection(cfg)?;
            let weights = LagrangianWeights::new(sel.lambda, sel.j_max)?;
            let (policy, log) = synthesize(&model, &qos, &weights, train, train.synthesis_rounds)?;
            let log_path = cfg.checkpoint_dir().join("synthesis.jsonl");
            write_jsonl(&log_path, &log)?;
            written.push(log_path);
            written.push(save_checkpoint(cfg, checkpoint::CODESIGN, &policy)?);
        }
    }
    Ok(written)
}

/// Runs every stage in order.
pub fn train_all(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let mut out = vec![];
    for stage in Stage::ALL {
        out.extend(train_stage(cfg, stage)?);
    }
    Ok(out)
}

fn load_selection(cfg: &ExperimentConfig) -> Result<Selection> {
    let path = cfg.checkpoint_dir().join(checkpoint::SELECTION);
    if !path.exists() {
        return Err(Error::MissingCheckpoint {
            stage: Stage::Qos.name().into(),
        });
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Serde {
        path,
        message: e.to_string(),
    })
}

/// One λ of a sweep for one variant.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub variant: String,
    pub lambda: f64,
    pub success_rate: f64,
    pub mean_pdr: f64,
    pub loss: f64,
    pub selected: bool,
    pub policy: CoDesignPolicy,
}

fn sweep_rows(variant: &str, points: Vec<SweepPoint>, floor: f64) -> (Vec<SweepRow>, f64) {
    let sel = select_lambda(&points, floor).expect("nonempty sweep");
    let lambda = points[sel].lambda;
    let rows = points
        .into_iter()
        .enumerate()
        .map(|(i, p)| SweepRow {
            variant: variant.to_string(),
            lambda: p.lambda,
            success_rate: p.success_rate,
            mean_pdr: p.mean_pdr,
            loss: p.loss,
            selected: i == sel,
            policy: p.policy,
        })
        .collect();
    (rows, lambda)
}

/// λ sweep for the QoS policy with and without the estimator.
pub fn sweep_both(
    cfg: &ExperimentConfig,
    with_est: &CoDesignPolicy,
    no_est: &CoDesignPolicy,
) -> Result<(Vec<SweepRow>, Selection)> {
    if cfg.policy.lambdas.is_empty() {
        return Err(Error::config("policy.lambdas", "the sweep needs at least one λ"));
    }
    let model = cfg.plant_model()?;
    let floor = cfg.policy.success_floor;
    let j_max = cfg.policy.j_max;
    let a = sweep_lambda(&model, with_est, &cfg.policy.lambdas, j_max, &cfg.train)?;
    let b = sweep_lambda(&model, no_est, &cfg.policy.lambdas, j_max, &cfg.train)?;
    let (mut rows, lambda) = sweep_rows("estimator", a, floor);
    let (rows_b, lambda_no_estimator) = sweep_rows("no_estimator", b, floor);
    rows.extend(rows_b);
    Ok((
        rows,
        Selection {
            lambda,
            lambda_no_estimator,
            j_max,
        },
    ))
}

#[derive(Serialize)]
struct SweepCsv<'a> {
    variant: &'a str,
    lambda: f64,
    success_rate: f64,
    mean_pdr: f64,
    loss: f64,
    selected: u8,
}

pub const SWEEP_COLUMNS: [&str; 6] = ["variant", "lambda", "success_rate", "mean_pdr", "loss", "selected"];

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let recs: Vec<SweepCsv<'_>> = rows
        .iter()
        .map(|r| SweepCsv {
            variant: &r.variant,
            lambda: r.lambda,
            success_rate: r.success_rate,
            mean_pdr: r.mean_pdr,
            loss: r.loss,
            selected: r.selected as u8,
        })
        .collect();
    write_csv(path, &SWEEP_COLUMNS, &recs)
}

/// Success and PDR summary of one policy arm.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub label: String,
    /// Plants sharing the network.
    pub plants: usize,
    pub trials: usize,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub success_lo: f64,
    pub success_hi: f64,
    pub mean_pdr: f64,
}

pub const SUMMARY_COLUMNS: [&str; 9] = [
    "label",
    "plants",
    "trials",
    "episodes",
    "successes",
    "success_rate",
    "success_lo",
    "success_hi",
    "mean_pdr",
];

/// Runs `trials` shared-network episodes of `m` plants under `policy`.
/// Trial `k` uses the same seed for every policy, so arms face identical
/// spawns, disturbances and fading.
pub fn run_trials(
    cfg: &ExperimentConfig,
    policy: &CoDesignPolicy,
    label: &str,
    m: usize,
    trials: usize,
) -> Result<(SummaryRow, Vec<EpisodeRow>)> {
    let results: Vec<_> = (0..trials)
        .into_par_iter()
        .map(|k| run_network_episode(cfg, policy, m, derive(cfg.seed, &[0xE0, m as u64, k as u64])))
        .collect::<Result<_>>()?;
    let rows: Vec<EpisodeRow> = results
        .into_iter()
        .enumerate()
        .flat_map(|(k, ep)| {
            ep.plants.into_iter().map(move |metrics| EpisodeRow {
                label: label.to_string(),
                episode: k,
                metrics,
            })
        })
        .collect();
    let n = rows.len();
    let successes = rows.iter().filter(|r| r.metrics.success).count();
    let (lo, hi) = wilson_interval(successes, n);
    let mean_pdr = if n == 0 {
        0.0
    } else {
        rows.iter().map(|r| r.metrics.avg_pdr).sum::<f64>() / n as f64
    };
    Ok((
        SummaryRow {
            label: label.to_string(),
            plants: m,
            trials,
            episodes: n,
            successes,
            success_rate: if n == 0 { 0.0 } else { successes as f64 / n as f64 },
            success_lo: lo,
            success_hi: hi,
            mean_pdr,
        },
        rows,
    ))
}

/// The three variants: (i) estimator with static reliability, (ii) learned
/// reliability without estimator, (iii) full co-design.
pub fn comparison_variants(cfg: &ExperimentConfig) -> Result<Vec<(&'static str, CoDesignPolicy)>> {
    Ok(vec![
        ("estimator_static_qos", load_checkpoint(cfg, checkpoint::ESTIMATOR, Stage::Estimator)?),
        ("dynamic_qos_no_estimator", load_checkpoint(cfg, checkpoint::QOS_NO_ESTIMATOR, Stage::Qos)?),
        ("codesign", load_checkpoint(cfg, checkpoint::CODESIGN, Stage::Synthesis)?),
    ])
}

/// Runs the three-variant comparison with one plant per episode.
pub fn compare_policies(cfg: &ExperimentConfig, trials: usize) -> Result<(Vec<SummaryRow>, Vec<EpisodeRow>)> {
    let variants = comparison_variants(cfg)?;
    let mut summary = vec![];
    let mut rows = vec![];
    for (label, policy) in &variants {
        let (s, r) = run_trials(cfg, policy, label, 1, trials)?;
        if trials > 0 {
            summary.push(s);
        }
        rows.extend(r);
    }
    Ok((summary, rows))
}

/// Success versus plant count for static reliability and co-design.
pub fn capacity_sweep(
    cfg: &ExperimentConfig,
    m_values: &[usize],
    trials: usize,
) -> Result<(Vec<SummaryRow>, Vec<EpisodeRow>)> {
    let arms = [
        ("static_qos", load_checkpoint(cfg, checkpoint::ESTIMATOR, Stage::Estimator)?),
        ("codesign", load_checkpoint(cfg, checkpoint::CODESIGN, Stage::Synthesis)?),
    ];
    let mut summary = vec![];
    let mut rows = vec![];
    for &m in m_values {
        for (label, policy) in &arms {
            let (s, r) = run_trials(cfg, policy, label, m, trials)?;
            summary.push(s);
            rows.extend(r);
        }
    }
    Ok((summary, rows))
}

/// Default plant counts for the capacity sweep: `1..=N_cap + 1`.
pub fn default_capacity_points(cfg: &ExperimentConfig) -> Result<Vec<usize>> {
    if !cfg.policy.capacity_m.is_empty() {
        return Ok(cfg.policy.capacity_m.clone());
    }
    let n_cap = cfg.network.capacity_bound()?;
    Ok((1..=n_cap + 1).collect())
}

/// Writes a summary table plus the per-episode artifacts and manifest.
pub fn write_run(
    dir: &Path,
    command: &str,
    cfg: &ExperimentConfig,
    summary_file: &str,
    summary: &[SummaryRow],
    rows: &[EpisodeRow],
) -> Result<()> {
    write_csv(&dir.join(summary_file), &SUMMARY_COLUMNS, summary)?;
    let mut manifest = RunManifest::new(command, cfg.sha256(), cfg.seed);
    manifest.files.push(summary_file.to_string());
    emit_results(rows, dir, &manifest)?;
    Ok(())
}
