//! Plant dynamics and per-step costs.
//!
//! Two plant kinds are provided:
//!
//! * [`PlantKind::LinearScalar`]: `x' = a·x + u + w`, used as an analytically
//!   tractable oracle plant.
//! * [`PlantKind::ConveyorGrasp`]: a kinematic pick-and-place surrogate. An
//!   object rides a belt at constant speed along the x axis; a gripper is a
//!   double integrator per axis driven by a box-bounded acceleration. The
//!   object latches to the gripper the first step their distance is within
//!   the grasp radius.
//!
//! The control cost is a failure indicator for the conveyor (`0` once the
//! object is within the grasp radius, `1` otherwise) and `min(x², 1)` for the
//! scalar plant, so lower is better for both.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::psd_factor;
use crate::rng::Rng;

/// Conveyor state layout.
pub mod conveyor_index {
    pub const OBJ_X: usize = 0;
    pub const OBJ_Y: usize = 1;
    pub const OBJ_VX: usize = 2;
    pub const OBJ_VY: usize = 3;
    pub const GRIP_X: usize = 4;
    pub const GRIP_Y: usize = 5;
    pub const GRIP_VX: usize = 6;
    pub const GRIP_VY: usize = 7;
    pub const ATTACHED: usize = 8;
    pub const DIM: usize = 9;
}
use conveyor_index as ci;

#[derive(Clone, Debug, PartialEq)]
pub struct PlantState {
    pub x: Vec<f64>,
    pub t: usize,
}

impl PlantState {
    pub fn new(x: Vec<f64>) -> Self {
        PlantState { x, t: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlInput {
    pub u: Vec<f64>,
}

impl ControlInput {
    pub fn new(u: Vec<f64>) -> Self {
        ControlInput { u }
    }

    pub fn zeros(dim: usize) -> Self {
        ControlInput { u: vec![0.0; dim] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearScalarParams {
    pub a: f64,
    /// Initial state drawn uniformly from `[-x0_range, x0_range]`.
    pub x0_range: f64,
    pub input_bound: f64,
    /// `|x_T|` at or below this counts as a successful episode.
    pub goal_tolerance: f64,
}

impl Default for LinearScalarParams {
    fn default() -> Self {
        LinearScalarParams {
            a: 0.9,
            x0_range: 1.0,
            input_bound: 2.0,
            goal_tolerance: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConveyorParams {
    /// Belt speed along +x, m/s.
    pub belt_speed: f64,
    /// Seconds per control step.
    pub step_duration: f64,
    /// Grasp radius ε, m.
    pub grasp_radius: f64,
    /// Per-axis gripper acceleration bound, m/s².
    pub accel_bound: f64,
    /// Per-step std of the object position disturbance (belt jitter), m.
    pub object_noise_std: f64,
    /// Per-step std of the gripper position disturbance, m.
    pub gripper_noise_std: f64,
    /// Object spawn box relative to the gripper home position, m.
    pub spawn_x: [f64; 2],
    pub spawn_y: [f64; 2],
}

impl Default for ConveyorParams {
    fn default() -> Self {
        ConveyorParams {
            belt_speed: 0.2,
            step_duration: 0.04,
            grasp_radius: 0.02,
            accel_bound: 6.0,
            object_noise_std: 0.001,
            gripper_noise_std: 0.0005,
            spawn_x: [-0.05, 0.05],
            spawn_y: [0.15, 0.25],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlantKind {
    LinearScalar(LinearScalarParams),
    ConveyorGrasp(ConveyorParams),
}

/// Immutable plant description. Cheap to clone and safe to share.
#[derive(Clone, Debug)]
pub struct PlantModel {
    kind: PlantKind,
    horizon: usize,
    noise_cov: Vec<f64>,
    noise_factor: Vec<f64>,
    input_lo: Vec<f64>,
    input_hi: Vec<f64>,
}

impl PlantModel {
    /// Scalar plant `x' = a x + u + w`, `w ~ N(0, noise_var)`.
    pub fn linear_scalar(params: LinearScalarParams, noise_var: f64, horizon: usize) -> Result<Self> {
        let bound = params.input_bound;
        if !(bound > 0.0) {
            return Err(Error::contract("linear scalar input bound must be positive"));
        }
        Self::build(
            PlantKind::LinearScalar(params),
            vec![noise_var],
            horizon,
            vec![-bound],
            vec![bound],
        )
    }

    pub fn conveyor(params: ConveyorParams, horizon: usize) -> Result<Self> {
        if !(params.step_duration > 0.0 && params.grasp_radius > 0.0 && params.accel_bound > 0.0) {
            return Err(Error::contract(
                "conveyor step duration, grasp radius and accel bound must be positive",
            ));
        }
        let mut cov = vec![0.0; ci::DIM * ci::DIM];
        let so = params.object_noise_std.powi(2);
        let sg = params.gripper_noise_std.powi(2);
        for (i, v) in [(ci::OBJ_X, so), (ci::OBJ_Y, so), (ci::GRIP_X, sg), (ci::GRIP_Y, sg)] {
            cov[i * ci::DIM + i] = v;
        }
        let a = params.accel_bound;
        Self::build(PlantKind::ConveyorGrasp(params), cov, horizon, vec![-a, -a], vec![a, a])
    }

    fn build(
        kind: PlantKind,
        noise_cov: Vec<f64>,
        horizon: usize,
        input_lo: Vec<f64>,
        input_hi: Vec<f64>,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::contract("horizon must be at least 1"));
        }
        let p = match &kind {
            PlantKind::LinearScalar(_) => 1,
            PlantKind::ConveyorGrasp(_) => ci::DIM,
        };
        let noise_factor = psd_factor(&noise_cov, p)
            .ok_or_else(|| Error::contract("noise covariance must be symmetric positive semidefinite"))?;
        Ok(PlantModel {
            kind,
            horizon,
            noise_cov,
            noise_factor,
            input_lo,
            input_hi,
        })
    }

    /// Replaces the disturbance covariance (row-major p×p).
    pub fn with_noise_cov(mut self, cov: Vec<f64>) -> Result<Self> {
        let p = self.state_dim();
        if cov.len() != p * p {
            return Err(Error::contract(format!("noise covariance must be {p}x{p}")));
        }
        self.noise_factor = psd_factor(&cov, p)
            .ok_or_else(|| Error::contract("noise covariance must be symmetric positive semidefinite"))?;
        self.noise_cov = cov;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::contract("horizon must be at least 1"));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn kind(&self) -> &PlantKind {
        &self.kind
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn noise_cov(&self) -> &[f64] {
        &self.noise_cov
    }

    pub fn state_dim(&self) -> usize {
        match self.kind {
            PlantKind::LinearScalar(_) => 1,
            PlantKind::ConveyorGrasp(_) => ci::DIM,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_lo.len()
    }

    pub fn input_bounds(&self) -> (&[f64], &[f64]) {
        (&self.input_lo, &self.input_hi)
    }

    pub fn conveyor_params(&self) -> Option<&ConveyorParams> {
        match &self.kind {
            PlantKind::ConveyorGrasp(p) => Some(p),
            PlantKind::LinearScalar(_) => None,
        }
    }

    pub fn clamp_input(&self, mut u: Vec<f64>) -> ControlInput {
        for (v, (lo, hi)) in u.iter_mut().zip(self.input_lo.iter().zip(&self.input_hi)) {
            *v = if v.is_finite() { v.clamp(*lo, *hi) } else { 0.0 };
        }
        ControlInput { u }
    }

    pub fn initial_state(&self, rng: &mut Rng) -> PlantState {
        match &self.kind {
            PlantKind::LinearScalar(p) => {
                let r = p.x0_range;
                let x0 = if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 };
                PlantState::new(vec![x0])
            }
            PlantKind::ConveyorGrasp(p) => {
                let mut x = vec![0.0; ci::DIM];
                x[ci::OBJ_X] = uniform(rng, p.spawn_x);
                x[ci::OBJ_Y] = uniform(rng, p.spawn_y);
                x[ci::OBJ_VX] = p.belt_speed;
                PlantState::new(x)
            }
        }
    }

    /// Noiseless transition `f(x, u)`, including the grasp latch.
    pub fn predict(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        match &self.kind {
            PlantKind::LinearScalar(p) => vec![p.a * x[0] + u[0]],
            PlantKind::ConveyorGrasp(p) => {
                let mut next = conveyor_kinematics(p, x, u);
                conveyor_latch(p, &mut next);
                next
            }
        }
    }

    /// Advances one step: `x' = f(x, u) + w`, `w ~ N(0, noise_cov)`.
    pub fn step(&self, state: &PlantState, input: &ControlInput, rng: &mut Rng) -> Result<PlantState> {
        let p = self.state_dim();
        if state.x.len() != p {
            return Err(Error::contract(format!(
                "state dimension {} does not match plant dimension {p}",
                state.x.len()
            )));
        }
        if input.u.len() != self.input_dim() {
            return Err(Error::contract(format!(
                "input dimension {} does not match plant input dimension {}",
                input.u.len(),
                self.input_dim()
            )));
        }
        if state.t >= self.horizon {
            return Err(Error::EpisodeOver {
                t: state.t,
                horizon: self.horizon,
            });
        }
        for (i, v) in input.u.iter().enumerate() {
            if !(*v >= self.input_lo[i] - 1e-9 && *v <= self.input_hi[i] + 1e-9) {
                return Err(Error::contract(format!("input component {i} = {v} outside its box")));
            }
        }

        let mut next = match &self.kind {
            PlantKind::LinearScalar(p) => vec![p.a * state.x[0] + input.u[0]],
            PlantKind::ConveyorGrasp(p) => conveyor_kinematics(p, &state.x, &input.u),
        };
        let z: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..p {
            let w: f64 = (0..=i).map(|k| self.noise_factor[i * p + k] * z[k]).sum();
            next[i] += w;
        }
        if let PlantKind::ConveyorGrasp(params) = &self.kind {
            conveyor_latch(params, &mut next);
        }
        Ok(PlantState {
            x: next,
            t: state.t + 1,
        })
    }

    /// Distance to the task goal: object-gripper distance for the conveyor,
    /// `|x|` for the scalar plant.
    pub fn goal_distance(&self, x: &[f64]) -> f64 {
        match &self.kind {
            PlantKind::LinearScalar(_) => x[0].abs(),
            PlantKind::ConveyorGrasp(_) => {
                if x[ci::ATTACHED] > 0.5 {
                    0.0
                } else {
                    (x[ci::OBJ_X] - x[ci::GRIP_X]).hypot(x[ci::OBJ_Y] - x[ci::GRIP_Y])
                }
            }
        }
    }

    pub fn goal_tolerance(&self) -> f64 {
        match &self.kind {
            PlantKind::LinearScalar(p) => p.goal_tolerance,
            PlantKind::ConveyorGrasp(p) => p.grasp_radius,
        }
    }

    /// Per-step control cost `J(x) ∈ [0, 1]`.
    pub fn control_cost(&self, state: &PlantState) -> f64 {
        match &self.kind {
            PlantKind::LinearScalar(_) => (state.x[0] * state.x[0]).min(1.0),
            PlantKind::ConveyorGrasp(p) => {
                if self.goal_distance(&state.x) <= p.grasp_radius {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    /// True iff the goal condition holds at the final step `T` and, walking
    /// back, holds continuously from some step onward. Equivalently: a grasp
    /// happened at some step and was held through `T`.
    ///
    /// `trace` holds the states for steps `0..=T`; extra trailing entries are
    /// an error, as are missing ones.
    pub fn episode_success(&self, trace: &[PlantState]) -> Result<bool> {
        let need = self.horizon + 1;
        if trace.len() != need {
            return Err(Error::contract(format!(
                "success trace needs {need} states (steps 0..=T), got {}",
                trace.len()
            )));
        }
        let tol = self.goal_tolerance();
        Ok(self.goal_distance(&trace[self.horizon].x) <= tol)
    }

    /// Bounded observation features for policies: relative geometry for the
    /// conveyor, the raw state for the scalar plant.
    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            PlantKind::LinearScalar(_) => vec![x[0]],
            PlantKind::ConveyorGrasp(_) => {
                const POS: f64 = 0.1;
                const VEL: f64 = 0.5;
                vec![
                    (x[ci::OBJ_X] - x[ci::GRIP_X]) / POS,
                    (x[ci::OBJ_Y] - x[ci::GRIP_Y]) / POS,
                    (x[ci::OBJ_VX] - x[ci::GRIP_VX]) / VEL,
                    (x[ci::OBJ_VY] - x[ci::GRIP_VY]) / VEL,
                    x[ci::OBJ_VX] / VEL,
                    x[ci::OBJ_VY] / VEL,
                    x[ci::GRIP_VX] / VEL,
                    x[ci::GRIP_VY] / VEL,
                    x[ci::ATTACHED],
                ]
            }
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.state_dim()
    }

    /// Per-component scale used to normalize state errors.
    pub fn state_scale(&self) -> Vec<f64> {
        match &self.kind {
            PlantKind::LinearScalar(_) => vec![1.0],
            PlantKind::ConveyorGrasp(_) => vec![0.1, 0.1, 0.5, 0.5, 0.1, 0.1, 0.5, 0.5, 1.0],
        }
    }

    /// Scale used to normalize control inputs for learned policies.
    pub fn input_scale(&self) -> Vec<f64> {
        self.input_hi.iter().map(|h| h.abs().max(1e-9)).collect()
    }

    pub fn step_duration(&self) -> Option<f64> {
        self.conveyor_params().map(|p| p.step_duration)
    }
}

fn uniform(rng: &mut Rng, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        rng.random_range(range[0]..range[1])
    } else {
        range[0]
    }
}

fn conveyor_kinematics(p: &ConveyorParams, x: &[f64], u: &[f64]) -> Vec<f64> {
    let dt = p.step_duration;
    let mut n = x.to_vec();
    for (pos, vel, acc) in [(ci::GRIP_X, ci::GRIP_VX, u[0]), (ci::GRIP_Y, ci::GRIP_VY, u[1])] {
        n[pos] = x[pos] + x[vel] * dt + 0.5 * acc * dt * dt;
        n[vel] = x[vel] + acc * dt;
    }
    if x[ci::ATTACHED] > 0.5 {
        n[ci::OBJ_X] = n[ci::GRIP_X];
        n[ci::OBJ_Y] = n[ci::GRIP_Y];
        n[ci::OBJ_VX] = n[ci::GRIP_VX];
        n[ci::OBJ_VY] = n[ci::GRIP_VY];
    } else {
        n[ci::OBJ_X] = x[ci::OBJ_X] + x[ci::OBJ_VX] * dt;
        n[ci::OBJ_Y] = x[ci::OBJ_Y] + x[ci::OBJ_VY] * dt;
    }
    n
}

/// Keeps an attached object on the gripper and latches new grasps.
fn conveyor_latch(p: &ConveyorParams, n: &mut [f64]) {
    let attached = n[ci::ATTACHED] > 0.5;
    let close = (n[ci::OBJ_X] - n[ci::GRIP_X]).hypot(n[ci::OBJ_Y] - n[ci::GRIP_Y]) <= p.grasp_radius;
    if attached || close {
        n[ci::ATTACHED] = 1.0;
        n[ci::OBJ_X] = n[ci::GRIP_X];
        n[ci::OBJ_Y] = n[ci::GRIP_Y];
        n[ci::OBJ_VX] = n[ci::GRIP_VX];
        n[ci::OBJ_VY] = n[ci::GRIP_VY];
    }
}

/// Network cost `C(q) = q`.
pub fn network_cost(q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::contract(format!("reliability {q} outside [0, 1]")));
    }
    Ok(q)
}

/// Control and network cost incurred at one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CostPair {
    pub control: f64,
    pub network: f64,
}
