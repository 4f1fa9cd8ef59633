//! Parametric policies: ideal controllers, QoS-aware state estimators,
//! reliability/latency policies, and their composition.
//!
//! All learned components are [`ParametricFn`]s: a tanh MLP with an optional
//! linear skip path from input to output and an output squash. The flat
//! parameter layout is hidden layers first, then the readout (output
//! weights, output bias, skip weights), so trainers can treat the readout
//! separately.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{Observation, QosTarget};
use crate::plants::{conveyor_index as ci, ControlInput, PlantKind, PlantModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Squash {
    None,
    /// Componentwise clamp to `[lo, hi]`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// `min + (1 − min)·sigmoid(z)`.
    UnitInterval { min: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden: Vec<usize>,
    pub skip: bool,
    pub squash: Squash,
}

impl Architecture {
    pub fn mlp(input_dim: usize, output_dim: usize, hidden: Vec<usize>, squash: Squash) -> Self {
        Architecture {
            input_dim,
            output_dim,
            hidden,
            skip: true,
            squash,
        }
    }

    fn last_width(&self) -> usize {
        self.hidden.last().copied().unwrap_or(0)
    }

    /// Parameters in the hidden layers.
    pub fn body_len(&self) -> usize {
        let mut prev = self.input_dim;
        let mut n = 0;
        for &h in &self.hidden {
            n += h * prev + h;
            prev = h;
        }
        n
    }

    /// Output weights + output bias + skip weights.
    pub fn readout_len(&self) -> usize {
        let o = self.output_dim;
        o * self.last_width() + o + if self.skip { o * self.input_dim } else { 0 }
    }

    pub fn param_count(&self) -> usize {
        self.body_len() + self.readout_len()
    }

    /// Width of the readout feature vector `[hidden; 1; input]`.
    pub fn readout_features(&self) -> usize {
        self.last_width() + 1 + if self.skip { self.input_dim } else { 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParametricFn {
    pub architecture: Architecture,
    pub params: Vec<f64>,
}

impl ParametricFn {
    pub fn new(architecture: Architecture, params: Vec<f64>) -> Result<Self> {
        let n = architecture.param_count();
        if params.len() != n {
            return Err(Error::contract(format!(
                "architecture needs {n} parameters, got {}",
                params.len()
            )));
        }
        if let Squash::Box { lo, hi } = &architecture.squash {
            if lo.len() != architecture.output_dim || hi.len() != architecture.output_dim {
                return Err(Error::contract("box squash bounds must match output dimension"));
            }
        }
        Ok(ParametricFn { architecture, params })
    }

    pub fn zeros(architecture: Architecture) -> Self {
        let n = architecture.param_count();
        ParametricFn {
            architecture,
            params: vec![0.0; n],
        }
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        ParametricFn::new(self.architecture.clone(), params.to_vec())
    }

    /// Readout features `[h_last; 1; input]` for `input`.
    pub fn readout_features(&self, input: &[f64]) -> Vec<f64> {
        let arch = &self.architecture;
        let mut z = input.to_vec();
        let mut off = 0;
        let mut prev = arch.input_dim;
        for &h in &arch.hidden {
            let w = &self.params[off..off + h * prev];
            let b = &self.params[off + h * prev..off + h * prev + h];
            z = (0..h)
                .map(|i| {
                    let row = &w[i * prev..(i + 1) * prev];
                    (row.iter().zip(&z).map(|(a, x)| a * x).sum::<f64>() + b[i]).tanh()
                })
                .collect();
            off += h * prev + h;
            prev = h;
        }
        z.push(1.0);
        if arch.skip {
            z.extend_from_slice(input);
        }
        z
    }

    /// Pre-squash output.
    pub fn raw(&self, input: &[f64]) -> Vec<f64> {
        let arch = &self.architecture;
        debug_assert_eq!(input.len(), arch.input_dim);
        let feats = self.readout_features(input);
        let hw = arch.last_width();
        let o = arch.output_dim;
        let off = arch.body_len();
        let w = &self.params[off..off + o * hw];
        let b = &self.params[off + o * hw..off + o * hw + o];
        let s = &self.params[off + o * hw + o..];
        (0..o)
            .map(|k| {
                let mut v = b[k];
                for j in 0..hw {
                    v += w[k * hw + j] * feats[j];
                }
                if arch.skip {
                    let d = arch.input_dim;
                    for j in 0..d {
                        v += s[k * d + j] * input[j];
                    }
                }
                v
            })
            .collect()
    }

    pub fn eval(&self, input: &[f64]) -> Vec<f64> {
        let raw = self.raw(input);
        apply_squash(&self.architecture.squash, raw)
    }

    /// Writes a readout given as a `readout_features × output_dim` matrix
    /// (row-major, rows ordered `[hidden; bias; skip]`).
    pub fn set_readout_from_matrix(&mut self, w: &[f64]) {
        let arch = &self.architecture;
        let f = arch.readout_features();
        let o = arch.output_dim;
        let hw = arch.last_width();
        assert_eq!(w.len(), f * o);
        let off = arch.body_len();
        for k in 0..o {
            for j in 0..hw {
                self.params[off + k * hw + j] = w[j * o + k];
            }
            self.params[off + o * hw + k] = w[hw * o + k];
            if arch.skip {
                let d = arch.input_dim;
                for j in 0..d {
                    self.params[off + o * hw + o + k * d + j] = w[(hw + 1 + j) * o + k];
                }
            }
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn apply_squash(squash: &Squash, mut v: Vec<f64>) -> Vec<f64> {
    match squash {
        Squash::None => {}
        Squash::Box { lo, hi } => {
            for (x, (l, h)) in v.iter_mut().zip(lo.iter().zip(hi)) {
                *x = if x.is_finite() { x.clamp(*l, *h) } else { 0.5 * (l + h) };
            }
        }
        Squash::UnitInterval { min } => {
            for x in v.iter_mut() {
                let s = if x.is_nan() { 0.5 } else { sigmoid(*x) };
                *x = (min + (1.0 - min) * s).clamp(*min, 1.0);
            }
        }
    }
    v
}

/// Saturated PD gains for the conveyor baseline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
}

impl Default for PdGains {
    fn default() -> Self {
        PdGains { kp: 25.0, kd: 10.0 }
    }
}

/// State-feedback controller used as the ideal control policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Controller {
    /// PD toward the object's position and velocity (conveyor only).
    Pd(PdGains),
    /// `u = K x` with `K` given row-major (q×p).
    Linear { gain: Vec<f64> },
    /// Learned map from plant features to inputs.
    Learned(ParametricFn),
}

impl Controller {
    /// Deadbeat gain for the scalar plant: `u = −a x`.
    pub fn deadbeat(model: &PlantModel) -> Result<Self> {
        match model.kind() {
            PlantKind::LinearScalar(p) => Ok(Controller::Linear { gain: vec![-p.a] }),
            PlantKind::ConveyorGrasp(_) => Err(Error::contract("deadbeat gain is defined for the scalar plant")),
        }
    }

    /// Architecture of a learned controller for `model`.
    pub fn learned_architecture(model: &PlantModel, hidden: Vec<usize>) -> Architecture {
        let (lo, hi) = model.input_bounds();
        Architecture::mlp(
            model.feature_dim(),
            model.input_dim(),
            hidden,
            Squash::Box {
                lo: lo.to_vec(),
                hi: hi.to_vec(),
            },
        )
    }
}

/// `u = π̂ᶜ(x)`, clamped to the model's input box.
pub fn ideal_control(ctrl: &Controller, model: &PlantModel, x: &[f64]) -> Result<ControlInput> {
    if x.len() != model.state_dim() {
        return Err(Error::contract(format!(
            "controller got state of dimension {}, plant has {}",
            x.len(),
            model.state_dim()
        )));
    }
    let u = match ctrl {
        Controller::Pd(g) => {
            if !matches!(model.kind(), PlantKind::ConveyorGrasp(_)) {
                return Err(Error::contract("PD baseline is defined for the conveyor plant"));
            }
            vec![
                g.kp * (x[ci::OBJ_X] - x[ci::GRIP_X]) + g.kd * (x[ci::OBJ_VX] - x[ci::GRIP_VX]),
                g.kp * (x[ci::OBJ_Y] - x[ci::GRIP_Y]) + g.kd * (x[ci::OBJ_VY] - x[ci::GRIP_VY]),
            ]
        }
        Controller::Linear { gain } => {
            let p = model.state_dim();
            let q = model.input_dim();
            if gain.len() != p * q {
                return Err(Error::contract("linear gain has the wrong shape"));
            }
            (0..q).map(|i| (0..p).map(|j| gain[i * p + j] * x[j]).sum()).collect()
        }
        Controller::Learned(net) => {
            if net.architecture.input_dim != model.feature_dim() {
                return Err(Error::contract("learned controller input does not match plant features"));
            }
            net.eval(&model.features(x))
        }
    };
    Ok(model.clamp_input(u))
}

/// Learned QoS-aware estimator with its feature encoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnedEstimator {
    pub net: ParametricFn,
    /// Largest age seen in training; larger ages are clamped.
    pub max_age: usize,
    /// False until a training stage has fit the parameters.
    pub trained: bool,
}

impl LearnedEstimator {
    pub fn architecture(model: &PlantModel, max_age: usize, hidden: Vec<usize>) -> Architecture {
        let f = model.feature_dim();
        let input_dim = 2 * f + 1 + model.input_dim() * max_age;
        Architecture::mlp(input_dim, model.state_dim(), hidden, Squash::None)
    }

    pub fn untrained(model: &PlantModel, max_age: usize, hidden: Vec<usize>) -> Self {
        LearnedEstimator {
            net: ParametricFn::zeros(Self::architecture(model, max_age, hidden)),
            max_age,
            trained: false,
        }
    }

    /// Input encoding: plant features of `y`, normalized age, age-scaled
    /// features, and the last `age` inputs (most recent first, zero-padded).
    pub fn encode(&self, model: &PlantModel, y: &[f64], age: usize, inputs: &[ControlInput]) -> Vec<f64> {
        let feats = model.features(y);
        let age_n = age as f64 / self.max_age.max(1) as f64;
        let q = model.input_dim();
        let scale = model.input_scale();
        let mut v = Vec::with_capacity(self.net.architecture.input_dim);
        v.extend_from_slice(&feats);
        v.push(age_n);
        v.extend(feats.iter().map(|f| f * age_n));
        for k in 1..=self.max_age {
            if k <= age && k <= inputs.len() {
                let u = &inputs[inputs.len() - k].u;
                v.extend((0..q).map(|i| u[i] / scale[i]));
            } else {
                v.extend(std::iter::repeat_n(0.0, q));
            }
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    /// `x̂ = y`: no estimation.
    Passthrough,
    /// Rolls the noiseless model forward `ζ` steps with the applied inputs.
    Oracle,
    Learned(LearnedEstimator),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub x_hat: Vec<f64>,
    /// The age exceeded the estimator's trained maximum and was clamped.
    pub clamped: bool,
}

/// `x̂ = πᵉ(y, ζ, inputs)`. `inputs` is the chronological input history; its
/// last `ζ` entries are the inputs applied since `y` was measured.
pub fn estimate_state(est: &Estimator, model: &PlantModel, y: &Observation, inputs: &[ControlInput]) -> Result<Estimate> {
    if y.y.len() != model.state_dim() {
        return Err(Error::contract("observation dimension does not match plant"));
    }
    if inputs.len() < y.age {
        return Err(Error::contract(format!(
            "input history of {} entries cannot cover age {}",
            inputs.len(),
            y.age
        )));
    }
    match est {
        Estimator::Passthrough => Ok(Estimate {
            x_hat: y.y.clone(),
            clamped: false,
        }),
        Estimator::Oracle => {
            let mut x = y.y.clone();
            for u in &inputs[inputs.len() - y.age..] {
                x = model.predict(&x, &u.u);
            }
            Ok(Estimate { x_hat: x, clamped: false })
        }
        Estimator::Learned(le) => {
            let clamped = y.age > le.max_age;
            let age = y.age.min(le.max_age);
            let enc = le.encode(model, &y.y, age, inputs);
            let corr = le.net.eval(&enc);
            let scale = model.state_scale();
            let x_hat = y.y.iter().zip(corr.iter().zip(&scale)).map(|(yv, (c, s))| yv + c * s).collect();
            Ok(Estimate { x_hat, clamped })
        }
    }
}

/// Reliability and latency policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QosPolicy {
    Constant { q: f64, tau: u32 },
    Learned { net: ParametricFn, tau: u32, max_age: usize },
}

pub const DEFAULT_Q_MIN: f64 = 0.05;

impl QosPolicy {
    pub fn architecture(model: &PlantModel, hidden: Vec<usize>, q_min: f64) -> Architecture {
        Architecture::mlp(model.feature_dim() + 1, 1, hidden, Squash::UnitInterval { min: q_min })
    }

    pub fn learned_zero(model: &PlantModel, hidden: Vec<usize>, q_min: f64, max_age: usize) -> Self {
        QosPolicy::Learned {
            net: ParametricFn::zeros(Self::architecture(model, hidden, q_min)),
            tau: 1,
            max_age,
        }
    }

    pub fn encode(model: &PlantModel, y_prev: &[f64], age_prev: usize, max_age: usize) -> Vec<f64> {
        let mut v = model.features(y_prev);
        v.push((age_prev as f64 / max_age.max(1) as f64).min(4.0));
        v
    }
}

/// `(q_t, τ_t)` from the previous observation and age.
pub fn qos_targets(policy: &QosPolicy, model: &PlantModel, y_prev: &Observation) -> QosTarget {
    match policy {
        QosPolicy::Constant { q, tau } => QosTarget { q: q.clamp(0.0, 1.0), tau: *tau },
        QosPolicy::Learned { net, tau, max_age } => {
            let enc = QosPolicy::encode(model, &y_prev.y, y_prev.age, *max_age);
            QosTarget {
                q: net.eval(&enc)[0],
                tau: *tau,
            }
        }
    }
}

/// Controller, estimator, and QoS policy for one loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoDesignPolicy {
    pub controller: Controller,
    pub estimator: Estimator,
    pub qos: QosPolicy,
}

impl CoDesignPolicy {
    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Serde {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Serde {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// `π̂ᶜ(πᵉ(y, ζ, inputs))`.
pub fn qos_aware_control(
    policy: &CoDesignPolicy,
    model: &PlantModel,
    y: &Observation,
    inputs: &[ControlInput],
) -> Result<(ControlInput, Estimate)> {
    let est = estimate_state(&policy.estimator, model, y, inputs)?;
    let u = ideal_control(&policy.controller, model, &est.x_hat)?;
    Ok((u, est))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plants::{ConveyorParams, LinearScalarParams};
    use proptest::prelude::*;

    fn scalar() -> PlantModel {
        PlantModel::linear_scalar(LinearScalarParams::default(), 0.0, 100).unwrap()
    }

    fn conveyor(v: f64) -> PlantModel {
        PlantModel::conveyor(
            ConveyorParams {
                belt_speed: v,
                object_noise_std: 0.0,
                gripper_noise_std: 0.0,
                ..Default::default()
            },
            100,
        )
        .unwrap()
    }

    fn obs(y: Vec<f64>, age: usize) -> Observation {
        Observation { y, age, fresh: age == 0 }
    }

    #[test]
    fn parametric_fn_layout_and_readout_roundtrip() {
        let arch = Architecture::mlp(3, 2, vec![4, 5], Squash::None);
        assert_eq!(arch.body_len(), 3 * 4 + 4 + 4 * 5 + 5);
        assert_eq!(arch.readout_len(), 2 * 5 + 2 + 2 * 3);
        let params: Vec<f64> = (0..arch.param_count()).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let net = ParametricFn::new(arch.clone(), params).unwrap();
        let x = [0.3, -0.2, 0.9];
        let y = net.eval(&x);
        // reconstruct the output from readout features and a matrix readout
        let feats = net.readout_features(&x);
        let f = arch.readout_features();
        let mut w = vec![0.0; f * 2];
        for (j, row) in w.chunks_mut(2).enumerate() {
            row[0] = 0.1 * j as f64;
            row[1] = -0.05 * j as f64;
        }
        let mut net2 = net.clone();
        net2.set_readout_from_matrix(&w);
        let y2 = net2.eval(&x);
        for k in 0..2 {
            let expect: f64 = feats.iter().enumerate().map(|(j, v)| v * w[j * 2 + k]).sum();
            assert!((y2[k] - expect).abs() < 1e-12);
        }
        assert_ne!(y, y2);
        assert!(ParametricFn::new(arch, vec![0.0; 3]).is_err());
    }

    #[test]
    fn pd_examples() {
        let m = conveyor(0.2);
        let ctrl = Controller::Pd(PdGains::default());
        let mut x = vec![0.0; ci::DIM];
        x[ci::OBJ_X] = 0.5;
        x[ci::GRIP_X] = 0.5;
        assert_eq!(ideal_control(&ctrl, &m, &x).unwrap().u, vec![0.0, 0.0]);
        x[ci::OBJ_X] = 0.6;
        let u = ideal_control(&ctrl, &m, &x).unwrap();
        assert!((u.u[0] - 2.5).abs() < 1e-12);
        assert_eq!(u.u[1], 0.0);
        assert!(ideal_control(&ctrl, &m, &[0.0]).is_err());
    }

    #[test]
    fn deadbeat_example() {
        let m = scalar();
        let ctrl = Controller::deadbeat(&m).unwrap();
        assert!((ideal_control(&ctrl, &m, &[1.0]).unwrap().u[0] + 0.9).abs() < 1e-15);
    }

    #[test]
    fn oracle_estimator_examples() {
        let m = scalar();
        let hist = vec![ControlInput::zeros(1); 2];
        let fresh = estimate_state(&Estimator::Oracle, &m, &obs(vec![1.0], 0), &hist).unwrap();
        assert_eq!(fresh.x_hat, vec![1.0]);
        let rolled = estimate_state(&Estimator::Oracle, &m, &obs(vec![1.0], 2), &hist).unwrap();
        assert!((rolled.x_hat[0] - 0.81).abs() < 1e-15);

        let c = conveyor(0.2);
        let mut y = vec![0.0; ci::DIM];
        y[ci::OBJ_X] = 0.1;
        y[ci::OBJ_Y] = 0.2;
        y[ci::OBJ_VX] = 0.2;
        let hist = vec![ControlInput::zeros(2); 3];
        let est = estimate_state(&Estimator::Oracle, &c, &obs(y, 3), &hist).unwrap();
        assert!((est.x_hat[ci::OBJ_X] - 0.124).abs() < 1e-12);
        assert!(estimate_state(&Estimator::Oracle, &c, &obs(vec![0.0; 9], 4), &hist).is_err());
    }

    #[test]
    fn composed_control_examples() {
        let m = scalar();
        let policy = CoDesignPolicy {
            controller: Controller::deadbeat(&m).unwrap(),
            estimator: Estimator::Oracle,
            qos: QosPolicy::Constant { q: 1.0, tau: 1 },
        };
        let hist = vec![ControlInput::zeros(1); 2];
        let (u, _) = qos_aware_control(&policy, &m, &obs(vec![1.0], 2), &hist).unwrap();
        assert!((u.u[0] + 0.729).abs() < 1e-12);
        let (u0, _) = qos_aware_control(&policy, &m, &obs(vec![0.7], 0), &[]).unwrap();
        assert_eq!(u0, ideal_control(&policy.controller, &m, &[0.7]).unwrap());

        let c = conveyor(0.2);
        let pd = CoDesignPolicy {
            controller: Controller::Pd(PdGains::default()),
            estimator: Estimator::Passthrough,
            qos: QosPolicy::Constant { q: 1.0, tau: 1 },
        };
        let (u, _) = qos_aware_control(&pd, &c, &obs(vec![0.0; ci::DIM], 0), &[]).unwrap();
        assert_eq!(u.u, vec![0.0, 0.0]);
    }

    #[test]
    fn learned_estimator_clamps_large_ages() {
        let m = scalar();
        let est = Estimator::Learned(LearnedEstimator::untrained(&m, 8, vec![4]));
        let hist = vec![ControlInput::zeros(1); 12];
        let e = estimate_state(&est, &m, &obs(vec![0.5], 12), &hist).unwrap();
        assert!(e.clamped);
        assert_eq!(e.x_hat, vec![0.5]);
    }

    #[test]
    fn qos_target_examples() {
        let m = conveyor(0.2);
        let q_min = DEFAULT_Q_MIN;
        let policy = QosPolicy::learned_zero(&m, vec![32, 32], q_min, 8);
        let t = qos_targets(&policy, &m, &obs(vec![0.3; ci::DIM], 3));
        assert!((t.q - (q_min + (1.0 - q_min) / 2.0)).abs() < 1e-15);
        assert_eq!(t.tau, 1);
        let c = QosPolicy::Constant { q: 1.0, tau: 1 };
        assert_eq!(qos_targets(&c, &m, &obs(vec![0.0; ci::DIM], 0)).tau, 1);
    }

    #[test]
    fn checkpoint_roundtrip() {
        let m = conveyor(0.6);
        let policy = CoDesignPolicy {
            controller: Controller::Pd(PdGains::default()),
            estimator: Estimator::Learned(LearnedEstimator::untrained(&m, 8, vec![8])),
            qos: QosPolicy::learned_zero(&m, vec![8], 0.05, 8),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.json");
        policy.save_json(&path).unwrap();
        assert_eq!(CoDesignPolicy::load_json(&path).unwrap(), policy);
        assert!(matches!(
            CoDesignPolicy::load_json(&dir.path().join("missing.json")),
            Err(Error::Io { .. })
        ));
    }

    proptest! {
        #[test]
        fn reliability_stays_in_range(
            params in proptest::collection::vec(-50.0f64..50.0, QosPolicy::architecture(&conveyor(0.2), vec![32, 32], 0.05).param_count()),
            y in proptest::collection::vec(-10.0f64..10.0, ci::DIM),
            age in 0usize..200,
        ) {
            let m = conveyor(0.2);
            let net = ParametricFn::new(QosPolicy::architecture(&m, vec![32, 32], 0.05), params).unwrap();
            let policy = QosPolicy::Learned { net, tau: 1, max_age: 8 };
            let t = qos_targets(&policy, &m, &obs(y, age));
            prop_assert!((0.05..=1.0).contains(&t.q));
        }

        #[test]
        fn learned_controller_respects_box_and_is_pure(
            seed in 0u64..1000,
            x in proptest::collection::vec(-3.0f64..3.0, ci::DIM),
        ) {
            let m = conveyor(0.6);
            let arch = Controller::learned_architecture(&m, vec![8, 8]);
            let params: Vec<f64> = (0..arch.param_count())
                .map(|i| (((seed as usize + 1) * (i + 3) * 7919 % 2003) as f64 / 100.0) - 10.0)
                .collect();
            let ctrl = Controller::Learned(ParametricFn::new(arch, params).unwrap());
            let a = ideal_control(&ctrl, &m, &x).unwrap();
            let b = ideal_control(&ctrl, &m, &x).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!(a.u.iter().all(|v| v.abs() <= 6.0));
        }
    }
}
