//! Derivative-free training of the co-design policy in four stages:
//! ideal control, QoS-aware estimation, QoS adaptation, and synthesis.
//!
//! The optimizer is the cross-entropy method over a diagonal Gaussian. All
//! samples in one iteration are scored on the same episode seeds (common
//! random numbers), which makes elite selection compare policies rather than
//! luck. Sample draws and episode seeds are pure functions of the config
//! seed, so serial and parallel runs agree bit for bit.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ridge_solve;
use crate::plants::PlantModel;
use crate::policies::{CoDesignPolicy, Controller, Estimator, LearnedEstimator, ParametricFn, QosPolicy, DEFAULT_Q_MIN};
use crate::rng::{derive, rng_from, stream, Rng};
use crate::sim::{run_loop, run_loop_observed, LinkModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub population: usize,
    pub elite_fraction: f64,
    pub iterations: usize,
    pub sigma0: f64,
    pub std_floor: f64,
    pub smoothing: f64,
    /// Episodes per objective evaluation.
    pub episodes: usize,
    pub seed: u64,
    pub controller_hidden: Vec<usize>,
    pub estimator_hidden: Vec<usize>,
    pub qos_hidden: Vec<usize>,
    /// Largest age the estimator is trained for.
    pub max_age: usize,
    /// Data-collection rounds for the estimator (the first rolls out without
    /// an estimator, later ones with the current one in the loop).
    pub estimator_rounds: usize,
    pub estimator_episodes: usize,
    /// Training rows used to score each hidden-layer sample.
    pub estimator_rows: usize,
    pub ridge: f64,
    pub q_min: f64,
    /// Latency target in steps, fixed for all states.
    pub tau: u32,
    /// Held-out episodes used for synthesis acceptance and λ selection.
    pub validation_episodes: usize,
    pub synthesis_rounds: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            population: 64,
            elite_fraction: 0.125,
            iterations: 60,
            sigma0: 0.5,
            std_floor: 0.02,
            smoothing: 0.7,
            episodes: 8,
            seed: 0,
            controller_hidden: vec![],
            estimator_hidden: vec![32, 32],
            qos_hidden: vec![8],
            max_age: 8,
            estimator_rounds: 3,
            estimator_episodes: 48,
            estimator_rows: 1500,
            ridge: 1e-4,
            q_min: DEFAULT_Q_MIN,
            tau: 1,
            validation_episodes: 100,
            synthesis_rounds: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::config(format!("train.{field}"), msg));
        if self.population == 0 {
            return bad("population", "must be positive");
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction <= 0.5) {
            return bad("elite_fraction", "must lie in (0, 0.5]");
        }
        if self.elite_count() == 0 {
            return bad("elite_fraction", "selects no elites for this population");
        }
        if self.iterations == 0 || self.episodes == 0 {
            return bad("iterations", "iterations and episodes must be positive");
        }
        if !(self.sigma0 > 0.0 && self.std_floor > 0.0) {
            return bad("sigma0", "initial std and std floor must be positive");
        }
        if !(self.smoothing > 0.0 && self.smoothing <= 1.0) {
            return bad("smoothing", "must lie in (0, 1]");
        }
        if self.max_age == 0 {
            return bad("max_age", "must be positive");
        }
        if self.estimator_rounds == 0 || self.estimator_episodes < 2 || self.estimator_rows == 0 {
            return bad("estimator_rounds", "estimator rounds, episodes (≥ 2) and rows must be positive");
        }
        if !(self.ridge > 0.0) {
            return bad("ridge", "must be positive");
        }
        if !(0.0..1.0).contains(&self.q_min) {
            return bad("q_min", "must lie in [0, 1)");
        }
        if self.validation_episodes == 0 {
            return bad("validation_episodes", "must be positive");
        }
        Ok(())
    }

    pub fn elite_count(&self) -> usize {
        ((self.elite_fraction * self.population as f64).ceil() as usize).min(self.population)
    }
}

/// Distribution 𝒯 of ages used to train the estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayDistribution {
    Uniform { max: usize },
    /// Gaussian density evaluated on `0..=max` and renormalized.
    Gaussian { mean: f64, std: f64, max: usize },
}

impl DelayDistribution {
    pub fn max(&self) -> usize {
        match self {
            DelayDistribution::Uniform { max } | DelayDistribution::Gaussian { max, .. } => *max,
        }
    }

    pub fn probabilities(&self) -> Result<Vec<f64>> {
        let w: Vec<f64> = match self {
            DelayDistribution::Uniform { max } => vec![1.0; max + 1],
            DelayDistribution::Gaussian { mean, std, max } => {
                if !(*std > 0.0) {
                    return Err(Error::contract("gaussian delay std must be positive"));
                }
                (0..=*max).map(|k| (-(k as f64 - mean).powi(2) / (2.0 * std * std)).exp()).collect()
            }
        };
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::contract("delay distribution has no mass on its support"));
        }
        Ok(w.into_iter().map(|v| v / total).collect())
    }

    pub fn sample(&self, rng: &mut Rng) -> usize {
        match self {
            DelayDistribution::Uniform { max } => rng.random_range(0..=*max),
            DelayDistribution::Gaussian { .. } => {
                let p = self.probabilities().expect("validated at construction");
                let dist = rand::distr::weighted::WeightedIndex::new(&p).expect("nonnegative weights");
                rng.sample(dist)
            }
        }
    }
}

/// Penalty weight and constraint level of the Lagrangian loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagrangianWeights {
    pub lambda: f64,
    pub j_max: f64,
}

impl LagrangianWeights {
    pub fn new(lambda: f64, j_max: f64) -> Result<Self> {
        if !(lambda >= 0.0 && j_max >= 0.0) {
            return Err(Error::contract("λ and J_max must be nonnegative"));
        }
        Ok(LagrangianWeights { lambda, j_max })
    }

    /// `Σ C(q_t) + λ Σ J(x_t) − λ J_max`.
    pub fn loss(&self, cumulative_c: f64, cumulative_j: f64) -> f64 {
        cumulative_c + self.lambda * (cumulative_j - self.j_max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CemStats {
    pub iteration: usize,
    pub mean_loss: f64,
    pub elite_loss: f64,
    pub best_loss: f64,
    pub std_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CemOutcome {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Best sample seen in any iteration, with its loss on that iteration's
    /// episode seeds.
    pub best: (Vec<f64>, f64),
    pub history: Vec<CemStats>,
}

/// Cross-entropy search from `init_mean` with isotropic initial std
/// `cfg.sigma0`. `objective(θ, seed)` must be pure given `seed`.
pub fn cem_optimize<F>(objective: F, init_mean: &[f64], cfg: &TrainConfig) -> Result<CemOutcome>
where
    F: Fn(&[f64], u64) -> f64 + Sync,
{
    let std = vec![cfg.sigma0; init_mean.len()];
    cem_optimize_from(objective, init_mean, &std, cfg.iterations, cfg)
}

/// As [`cem_optimize`] with an explicit initial std and iteration count.
pub fn cem_optimize_from<F>(
    objective: F,
    init_mean: &[f64],
    init_std: &[f64],
    iterations: usize,
    cfg: &TrainConfig,
) -> Result<CemOutcome>
where
    F: Fn(&[f64], u64) -> f64 + Sync,
{
    cfg.validate()?;
    let dim = init_mean.len();
    if dim == 0 || init_std.len() != dim {
        return Err(Error::contract("CEM needs a nonempty mean and a matching std"));
    }
    let n_elite = cfg.elite_count();
    let a = cfg.smoothing;
    let mut mean = init_mean.to_vec();
    let mut std = init_std.to_vec();
    let mut history = Vec::with_capacity(iterations);
    let mut best: (Vec<f64>, f64) = (mean.clone(), f64::INFINITY);

    for it in 0..iterations {
        let eval_seed = derive(cfg.seed, &[stream::CEM_EVAL, it as u64]);
        let scored: Vec<(Vec<f64>, f64)> = (0..cfg.population)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng_from(cfg.seed, &[stream::CEM_SAMPLE, it as u64, i as u64]);
                let theta: Vec<f64> = mean
                    .iter()
                    .zip(&std)
                    .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let loss = objective(&theta, eval_seed);
                (theta, loss)
            })
            .collect();

        let mut finite: Vec<usize> = (0..scored.len()).filter(|&i| scored[i].1.is_finite()).collect();
        finite.sort_by(|&x, &y| scored[x].1.total_cmp(&scored[y].1).then(x.cmp(&y)));
        let std_norm = std.iter().map(|s| s * s).sum::<f64>().sqrt();
        if finite.is_empty() {
            history.push(CemStats {
                iteration: it,
                mean_loss: f64::NAN,
                elite_loss: f64::NAN,
                best_loss: f64::NAN,
                std_norm,
            });
            continue;
        }
        let elites = &finite[..n_elite.min(finite.len())];
        let mean_loss = finite.iter().map(|&i| scored[i].1).sum::<f64>() / finite.len() as f64;
        let elite_loss = elites.iter().map(|&i| scored[i].1).sum::<f64>() / elites.len() as f64;
        let best_loss = scored[finite[0]].1;
        history.push(CemStats {
            iteration: it,
            mean_loss,
            elite_loss,
            best_loss,
            std_norm,
        });
        if best_loss < best.1 {
            best = (scored[finite[0]].0.clone(), best_loss);
        }
        // Every sample scored the same: nothing to learn from this batch.
        if scored[*finite.last().unwrap()].1 == best_loss {
            continue;
        }
        let k = elites.len() as f64;
        for d in 0..dim {
            let em = elites.iter().map(|&i| scored[i].0[d]).sum::<f64>() / k;
            let ev = elites.iter().map(|&i| (scored[i].0[d] - em).powi(2)).sum::<f64>() / k;
            mean[d] = a * em + (1.0 - a) * mean[d];
            std[d] = (a * ev.sqrt() + (1.0 - a) * std[d]).max(cfg.std_floor);
        }
    }
    Ok(CemOutcome { mean, std, best, history })
}

/// Mean of `f(seed_e)` over `n` episode seeds derived from `seed`.
fn mean_over_episodes(seed: u64, n: usize, f: impl Fn(u64) -> Result<f64>) -> f64 {
    let mut total = 0.0;
    for e in 0..n {
        match f(derive(seed, &[stream::TRAIN_EPISODE, e as u64])) {
            Ok(v) => total += v,
            Err(_) => return f64::NAN,
        }
    }
    total / n as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageReport {
    pub stage: String,
    pub history: Vec<CemStats>,
    /// Loss of the returned parameters on held-out episodes.
    pub final_loss: f64,
}

/// Stage 1: learn a state-feedback controller with perfect state access by
/// minimizing the cumulative control cost.
pub fn train_ideal_control(model: &PlantModel, cfg: &TrainConfig) -> Result<(Controller, StageReport)> {
    cfg.validate()?;
    let arch = Controller::learned_architecture(model, cfg.controller_hidden.clone());
    let template = ParametricFn::zeros(arch);
    let make = |theta: &[f64]| -> Result<CoDesignPolicy> {
        Ok(CoDesignPolicy {
            controller: Controller::Learned(template.with_params(theta)?),
            estimator: Estimator::Passthrough,
            qos: QosPolicy::Constant { q: 1.0, tau: 0 },
        })
    };
    let objective = |theta: &[f64], seed: u64| {
        let Ok(policy) = make(theta) else { return f64::NAN };
        mean_over_episodes(seed, cfg.episodes, |s| {
            Ok(run_loop(model, &policy, &LinkModel::Perfect, s)?.cumulative_j)
        })
    };
    let out = cem_optimize(objective, &template.params, cfg)?;
    let policy = make(&out.mean)?;
    let final_loss = mean_over_episodes(validation_seed(cfg, 1), cfg.validation_episodes, |s| {
        Ok(run_loop(model, &policy, &LinkModel::Perfect, s)?.cumulative_j)
    });
    Ok((
        policy.controller,
        StageReport {
            stage: "control".into(),
            history: out.history,
            final_loss,
        },
    ))
}

fn validation_seed(cfg: &TrainConfig, label: u64) -> u64 {
    derive(cfg.seed, &[stream::VALIDATION, label])
}

/// Where estimator training data gets its ages from.
#[derive(Clone, Debug, PartialEq)]
pub enum DelaySource {
    /// Ages drawn i.i.d. from 𝒯.
    Distribution(DelayDistribution),
    /// Ages induced by a QoS policy over a Bernoulli link.
    Qos(QosPolicy),
}

impl DelaySource {
    fn link(&self) -> LinkModel {
        match self {
            DelaySource::Distribution(d) => LinkModel::Delays(d.clone()),
            DelaySource::Qos(_) => LinkModel::Bernoulli,
        }
    }

    fn qos(&self) -> QosPolicy {
        match self {
            DelaySource::Distribution(_) => QosPolicy::Constant { q: 1.0, tau: 0 },
            DelaySource::Qos(q) => q.clone(),
        }
    }
}

/// Regression rows for the estimator: encoded inputs and normalized
/// corrections `(x_t − y_t) / scale`.
#[derive(Default)]
struct Dataset {
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    validation: Vec<bool>,
}

impl Dataset {
    fn split(&self, want_validation: bool, cap: usize) -> Vec<usize> {
        let idx: Vec<usize> = (0..self.inputs.len()).filter(|&i| self.validation[i] == want_validation).collect();
        if idx.len() <= cap {
            return idx;
        }
        // evenly strided subset, deterministic
        (0..cap).map(|k| idx[k * idx.len() / cap]).collect()
    }
}

/// Fits the readout of `net` on `rows` by ridge regression; returns the
/// readout matrix.
fn fit_readout(net: &ParametricFn, data: &Dataset, rows: &[usize], ridge: f64) -> Option<Vec<f64>> {
    let f = net.architecture.readout_features();
    let o = net.architecture.output_dim;
    let mut xtx = vec![0.0; f * f];
    let mut xty = vec![0.0; f * o];
    for &r in rows {
        let z = net.readout_features(&data.inputs[r]);
        let y = &data.targets[r];
        for i in 0..f {
            if z[i] == 0.0 {
                continue;
            }
            for j in i..f {
                xtx[i * f + j] += z[i] * z[j];
            }
            for k in 0..o {
                xty[i * o + k] += z[i] * y[k];
            }
        }
    }
    for i in 0..f {
        for j in 0..i {
            xtx[i * f + j] = xtx[j * f + i];
        }
    }
    ridge_solve(&xtx, &xty, f, o, ridge * rows.len().max(1) as f64)
}

fn dataset_mse(net: &ParametricFn, data: &Dataset, rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let total: f64 = rows
        .iter()
        .map(|&r| {
            net.raw(&data.inputs[r])
                .iter()
                .zip(&data.targets[r])
                .map(|(p, t)| (p - t).powi(2))
                .sum::<f64>()
        })
        .sum();
    total / rows.len() as f64
}

fn with_body(template: &ParametricFn, body: &[f64]) -> ParametricFn {
    let mut net = template.clone();
    net.params[..body.len()].copy_from_slice(body);
    net
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorReport {
    pub history: Vec<CemStats>,
    /// Held-out regression MSE in normalized state units.
    pub validation_mse: f64,
    pub rows: usize,
}

/// Stage 2: learn `x̂ = πᵉ(y, ζ, inputs)` by minimizing the squared error to
/// the true state, with ages from `delays` and the composed controller in
/// the loop.
///
/// Hidden layers are searched by CEM; for each candidate the linear readout
/// is the ridge solution on training rows and the candidate is scored by
/// held-out MSE. Data is gathered in rounds, each rolling out the current
/// estimator so the state distribution follows deployment.
pub fn train_estimator(
    model: &PlantModel,
    controller: &Controller,
    delays: &DelaySource,
    cfg: &TrainConfig,
    init: Option<&LearnedEstimator>,
) -> Result<(LearnedEstimator, EstimatorReport)> {
    cfg.validate()?;
    if let DelaySource::Distribution(d) = delays {
        d.probabilities()?;
    }
    let mut est = match init {
        Some(e) => e.clone(),
        None => LearnedEstimator::untrained(model, cfg.max_age, cfg.estimator_hidden.clone()),
    };
    let body_len = est.net.architecture.body_len();
    let mut body_std = vec![cfg.sigma0; body_len];
    let link = delays.link();
    let mut data = Dataset::default();
    let mut history = Vec::new();
    let per_round = (cfg.iterations / cfg.estimator_rounds).max(1);

    for round in 0..cfg.estimator_rounds {
        let policy = CoDesignPolicy {
            controller: controller.clone(),
            estimator: if round == 0 && init.is_none() {
                Estimator::Passthrough
            } else {
                Estimator::Learned(est.clone())
            },
            qos: delays.qos(),
        };
        let scale = model.state_scale();
        for e in 0..cfg.estimator_episodes {
            let seed = derive(cfg.seed, &[stream::ESTIMATOR_DATA, round as u64, e as u64]);
            let val = e % 4 == 3;
            run_loop_observed(model, &policy, &link, seed, |view| {
                let age = view.observation.age.min(est.max_age);
                let y = &view.observation.y;
                // clamped ages are not representable; skip them
                if view.observation.age > est.max_age {
                    return;
                }
                data.inputs.push(est.encode(model, y, age, view.inputs));
                data.targets.push(
                    view.state
                        .x
                        .iter()
                        .zip(y)
                        .zip(&scale)
                        .map(|((x, yv), s)| (x - yv) / s)
                        .collect(),
                );
                data.validation.push(val);
            })?;
        }
        let train_rows = data.split(false, cfg.estimator_rows);
        let val_rows = data.split(true, cfg.estimator_rows.div_ceil(2));
        let template = est.net.clone();
        let objective = |body: &[f64], _seed: u64| {
            let mut net = with_body(&template, body);
            match fit_readout(&net, &data, &train_rows, cfg.ridge) {
                Some(w) => {
                    net.set_readout_from_matrix(&w);
                    dataset_mse(&net, &data, &val_rows)
                }
                None => f64::NAN,
            }
        };
        let round_cfg = TrainConfig {
            seed: derive(cfg.seed, &[stream::ESTIMATOR_DATA, round as u64]),
            ..cfg.clone()
        };
        let out = cem_optimize_from(&objective, &est.net.params[..body_len], &body_std, per_round, &round_cfg)?;
        let mean_loss = objective(&out.mean, 0);
        let body = if out.best.1 < mean_loss { out.best.0.clone() } else { out.mean.clone() };
        // keep the incumbent body if the search did not improve on it
        let incumbent = if est.trained { objective(&est.net.params[..body_len], 0) } else { f64::INFINITY };
        let body = if objective(&body, 0) <= incumbent {
            body
        } else {
            est.net.params[..body_len].to_vec()
        };
        body_std = out.std.clone();
        history.extend(out.history.into_iter().map(|mut s| {
            s.iteration += round * per_round;
            s
        }));

        let all: Vec<usize> = (0..data.inputs.len()).collect();
        let mut net = with_body(&est.net, &body);
        let w = fit_readout(&net, &data, &all, cfg.ridge)
            .ok_or_else(|| Error::contract("estimator readout regression is singular"))?;
        net.set_readout_from_matrix(&w);
        est.net = net;
        est.trained = true;
    }
    let val_rows = data.split(true, usize::MAX);
    let validation_mse = dataset_mse(&est.net, &data, &val_rows);
    Ok((
        est,
        EstimatorReport {
            history,
            validation_mse,
            rows: data.inputs.len(),
        },
    ))
}

/// Mean Lagrangian loss of `policy` over `n` episodes on a Bernoulli link.
pub fn lagrangian_loss(model: &PlantModel, policy: &CoDesignPolicy, weights: &LagrangianWeights, seed: u64, n: usize) -> f64 {
    mean_over_episodes(seed, n, |s| {
        let tr = run_loop(model, policy, &LinkModel::Bernoulli, s)?;
        Ok(weights.loss(tr.cumulative_c, tr.cumulative_j))
    })
}

/// Stage 3: learn the reliability policy `q = πᵠ(y_{t−1}, ζ_{t−1})` against
/// the frozen QoS-aware controller, minimizing the Lagrangian loss over a
/// Bernoulli link. The latency target is fixed at `cfg.tau`.
pub fn train_qos_policy(
    model: &PlantModel,
    base: &CoDesignPolicy,
    weights: &LagrangianWeights,
    cfg: &TrainConfig,
    init: Option<&QosPolicy>,
) -> Result<(QosPolicy, StageReport)> {
    cfg.validate()?;
    LagrangianWeights::new(weights.lambda, weights.j_max)?;
    if let Estimator::Learned(e) = &base.estimator {
        if !e.trained {
            return Err(Error::StageOrder(
                "QoS policy training needs a trained estimator; run the estimator stage first".into(),
            ));
        }
    }
    let template = match init {
        Some(QosPolicy::Learned { net, .. }) => net.clone(),
        _ => ParametricFn::zeros(QosPolicy::architecture(model, cfg.qos_hidden.clone(), cfg.q_min)),
    };
    let make = |theta: &[f64]| -> Result<CoDesignPolicy> {
        Ok(CoDesignPolicy {
            qos: QosPolicy::Learned {
                net: template.with_params(theta)?,
                tau: cfg.tau,
                max_age: cfg.max_age,
            },
            ..base.clone()
        })
    };
    let objective = |theta: &[f64], seed: u64| match make(theta) {
        Ok(p) => lagrangian_loss(model, &p, weights, seed, cfg.episodes),
        Err(_) => f64::NAN,
    };
    let out = cem_optimize(objective, &template.params, cfg)?;
    let policy = make(&out.mean)?;
    let final_loss = lagrangian_loss(model, &policy, weights, validation_seed(cfg, 3), cfg.validation_episodes);
    Ok((
        policy.qos,
        StageReport {
            stage: "qos".into(),
            history: out.history,
            final_loss,
        },
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisRound {
    pub round: usize,
    pub incumbent_loss: f64,
    pub candidate_loss: f64,
    pub accepted: bool,
}

/// Stage 4: alternately retrain the estimator under the ages induced by the
/// current QoS policy and the QoS policy under the new estimator. A round's
/// result replaces the incumbent only if it lowers the Lagrangian loss on
/// held-out episodes.
pub fn synthesize(
    model: &PlantModel,
    policy: &CoDesignPolicy,
    weights: &LagrangianWeights,
    cfg: &TrainConfig,
    rounds: usize,
) -> Result<(CoDesignPolicy, Vec<SynthesisRound>)> {
    let mut current = policy.clone();
    let mut log = Vec::with_capacity(rounds);
    if rounds == 0 {
        return Ok((current, log));
    }
    let Estimator::Learned(_) = &policy.estimator else {
        return Err(Error::StageOrder("synthesis needs a learned estimator".into()));
    };
    let val_seed = validation_seed(cfg, 4);
    for round in 0..rounds {
        let round_cfg = TrainConfig {
            seed: derive(cfg.seed, &[0x5e, round as u64]),
            ..cfg.clone()
        };
        let Estimator::Learned(est) = &current.estimator else { unreachable!() };
        let (new_est, _) = train_estimator(
            model,
            &current.controller,
            &DelaySource::Qos(current.qos.clone()),
            &round_cfg,
            Some(est),
        )?;
        let with_est = CoDesignPolicy {
            estimator: Estimator::Learned(new_est),
            ..current.clone()
        };
        let (new_qos, _) = train_qos_policy(model, &with_est, weights, &round_cfg, Some(&current.qos))?;
        let candidate = CoDesignPolicy {
            qos: new_qos,
            ..with_est
        };
        let incumbent_loss = lagrangian_loss(model, &current, weights, val_seed, cfg.validation_episodes);
        let candidate_loss = lagrangian_loss(model, &candidate, weights, val_seed, cfg.validation_episodes);
        let accepted = candidate_loss < incumbent_loss;
        if accepted {
            current = candidate;
        }
        log.push(SynthesisRound {
            round,
            incumbent_loss,
            candidate_loss,
            accepted,
        });
    }
    Ok((current, log))
}

/// Outcome of one λ in a sweep, measured on held-out episodes.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub lambda: f64,
    pub policy: CoDesignPolicy,
    pub success_rate: f64,
    pub mean_pdr: f64,
    pub loss: f64,
}

pub const DEFAULT_LAMBDAS: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];

/// Trains a QoS policy for each λ and evaluates success and PDR.
pub fn sweep_lambda(
    model: &PlantModel,
    base: &CoDesignPolicy,
    lambdas: &[f64],
    j_max: f64,
    cfg: &TrainConfig,
) -> Result<Vec<SweepPoint>> {
    let mut points = Vec::with_capacity(lambdas.len());
    for (i, &lambda) in lambdas.iter().enumerate() {
        let weights = LagrangianWeights::new(lambda, j_max)?;
        let stage_cfg = TrainConfig {
            seed: derive(cfg.seed, &[0x1a, i as u64]),
            ..cfg.clone()
        };
        let (qos, _) = train_qos_policy(model, base, &weights, &stage_cfg, None)?;
        let policy = CoDesignPolicy { qos, ..base.clone() };
        let (success_rate, mean_pdr) = success_and_pdr(model, &policy, validation_seed(cfg, 5), cfg.validation_episodes)?;
        let loss = lagrangian_loss(model, &policy, &weights, validation_seed(cfg, 5), cfg.validation_episodes);
        points.push(SweepPoint {
            lambda,
            policy,
            success_rate,
            mean_pdr,
            loss,
        });
    }
    Ok(points)
}

/// Success rate and mean PDR over `n` Bernoulli-link episodes.
pub fn success_and_pdr(model: &PlantModel, policy: &CoDesignPolicy, seed: u64, n: usize) -> Result<(f64, f64)> {
    let traces: Vec<_> = (0..n)
        .into_par_iter()
        .map(|e| run_loop(model, policy, &LinkModel::Bernoulli, derive(seed, &[stream::EPISODE, e as u64])))
        .collect::<Result<_>>()?;
    let n = n.max(1) as f64;
    Ok((
        traces.iter().filter(|t| t.success).count() as f64 / n,
        traces.iter().map(|t| t.pdr()).sum::<f64>() / n,
    ))
}

/// Index of the selected λ: the lowest PDR among points meeting the success
/// floor; failing that, the highest success rate.
pub fn select_lambda(points: &[SweepPoint], success_floor: f64) -> Option<usize> {
    let feasible = (0..points.len())
        .filter(|&i| points[i].success_rate >= success_floor)
        .min_by(|&a, &b| points[a].mean_pdr.total_cmp(&points[b].mean_pdr).then(a.cmp(&b)));
    feasible.or_else(|| {
        (0..points.len()).max_by(|&a, &b| {
            points[a]
                .success_rate
                .total_cmp(&points[b].success_rate)
                .then(b.cmp(&a))
        })
    })
}
