//! Closed-loop episodes for a single plant over an abstract link.
//!
//! Per step `t`:
//! 1. QoS targets from the previous observation (Bernoulli links only);
//! 2. the link decides delivery and the age `ζ_t`;
//! 3. `y_t = x_{t−ζ_t}` is estimated forward and fed to the controller;
//! 4. costs are charged on `x_t` and the plant advances.
//!
//! Separate random streams drive the initial state, the plant disturbance,
//! and the link, so two policies evaluated on the same seed face the same
//! spawn and the same disturbance sequence.

use crate::error::Result;
use crate::learning::DelayDistribution;
use crate::netmodel::{observe_at, sample_delivery, LinkState, Observation};
use crate::plants::{ControlInput, PlantModel, PlantState};
use crate::policies::{qos_aware_control, qos_targets, CoDesignPolicy};
use crate::rng::{rng_from, stream};

#[derive(Clone, Debug, PartialEq)]
pub enum LinkModel {
    /// Every state is seen immediately.
    Perfect,
    /// Every state arrives exactly `d` steps late.
    FixedDelay(usize),
    /// Age drawn i.i.d. per step from a distribution (estimator training).
    Delays(DelayDistribution),
    /// Bernoulli(q_t) delivery with the policy's latency target.
    Bernoulli,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub q: f64,
    pub tau: u32,
    pub age: usize,
    pub delivered: bool,
    pub distance: f64,
    pub control_cost: f64,
    pub age_clamped: bool,
}

#[derive(Clone, Debug)]
pub struct EpisodeTrace {
    pub states: Vec<PlantState>,
    pub steps: Vec<StepRecord>,
    pub success: bool,
    pub cumulative_j: f64,
    pub cumulative_c: f64,
    /// Mean squared estimation error in normalized state units, per step.
    pub estimation_mse: f64,
}

impl EpisodeTrace {
    pub fn pdr(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().filter(|s| s.delivered).count() as f64 / self.steps.len() as f64
    }

    pub fn mean_age(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().map(|s| s.age as f64).sum::<f64>() / self.steps.len() as f64
    }

    pub fn mean_q(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().map(|s| s.q).sum::<f64>() / self.steps.len() as f64
    }
}

/// What an observer sees at each step: the observation handed to the
/// estimator, the input history, and the true state.
pub struct StepView<'a> {
    pub observation: &'a Observation,
    pub inputs: &'a [ControlInput],
    pub state: &'a PlantState,
}

pub fn run_loop(model: &PlantModel, policy: &CoDesignPolicy, link: &LinkModel, seed: u64) -> Result<EpisodeTrace> {
    run_loop_observed(model, policy, link, seed, |_| {})
}

pub fn run_loop_observed(
    model: &PlantModel,
    policy: &CoDesignPolicy,
    link: &LinkModel,
    seed: u64,
    mut observer: impl FnMut(&StepView<'_>),
) -> Result<EpisodeTrace> {
    let mut init_rng = rng_from(seed, &[stream::PLANT_INIT]);
    let mut noise_rng = rng_from(seed, &[stream::PLANT_NOISE]);
    let mut link_rng = rng_from(seed, &[stream::LINK]);
    let mut delay_rng = rng_from(seed, &[stream::DELAY]);

    let horizon = model.horizon();
    let scale = model.state_scale();
    let x0 = model.initial_state(&mut init_rng);
    let mut history = Vec::with_capacity(horizon + 1);
    history.push(x0.clone());
    let mut inputs: Vec<ControlInput> = Vec::with_capacity(horizon);
    let mut steps = Vec::with_capacity(horizon);
    let mut link_state = LinkState::new();
    let mut prev_obs = Observation {
        y: x0.x.clone(),
        age: 0,
        fresh: true,
    };
    let (mut cum_j, mut cum_c, mut sq_err) = (0.0, 0.0, 0.0);

    for t in 0..horizon {
        let (q, tau, delivered, age) = match link {
            LinkModel::Perfect => (1.0, 0, true, 0),
            LinkModel::FixedDelay(d) => (1.0, *d as u32, true, t.min(*d)),
            LinkModel::Delays(dist) => (1.0, 0, true, dist.sample(&mut delay_rng).min(t)),
            LinkModel::Bernoulli => {
                let target = qos_targets(&policy.qos, model, &prev_obs);
                let delivered = sample_delivery(target.q, &mut link_rng)?;
                let age = link_state.update_age(t, delivered, target.tau)?;
                (target.q, target.tau, delivered, age)
            }
        };
        let fresh = match link {
            LinkModel::Bernoulli => link_state.fresh(),
            _ => true,
        };
        let obs = observe_at(&history, age, fresh)?;
        let state = history.last().expect("history is nonempty");
        observer(&StepView {
            observation: &obs,
            inputs: &inputs,
            state,
        });
        let (u, est) = qos_aware_control(policy, model, &obs, &inputs)?;
        sq_err += state
            .x
            .iter()
            .zip(&est.x_hat)
            .zip(&scale)
            .map(|((x, e), s)| ((x - e) / s).powi(2))
            .sum::<f64>();
        let j = model.control_cost(state);
        cum_j += j;
        cum_c += q;
        steps.push(StepRecord {
            t,
            q,
            tau,
            age,
            delivered,
            distance: model.goal_distance(&state.x),
            control_cost: j,
            age_clamped: est.clamped,
        });
        let next = model.step(state, &u, &mut noise_rng)?;
        history.push(next);
        inputs.push(u);
        prev_obs = obs;
    }
    let success = model.episode_success(&history)?;
    Ok(EpisodeTrace {
        states: history,
        steps,
        success,
        cumulative_j: cum_j,
        cumulative_c: cum_c,
        estimation_mse: sq_err / horizon as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plants::{conveyor_index as ci, ConveyorParams, LinearScalarParams};
    use crate::policies::{Controller, Estimator, PdGains, QosPolicy};

    fn pd_policy(est: Estimator, q: f64) -> CoDesignPolicy {
        CoDesignPolicy {
            controller: Controller::Pd(PdGains::default()),
            estimator: est,
            qos: QosPolicy::Constant { q, tau: 1 },
        }
    }

    fn conveyor(v: f64) -> PlantModel {
        PlantModel::conveyor(
            ConveyorParams {
                belt_speed: v,
                ..Default::default()
            },
            100,
        )
        .unwrap()
    }

    #[test]
    fn perfect_state_pd_grasps() {
        let m = conveyor(0.2);
        for seed in 0..20 {
            let tr = run_loop(&m, &pd_policy(Estimator::Passthrough, 1.0), &LinkModel::Perfect, seed).unwrap();
            assert!(tr.success, "seed {seed}");
            assert_eq!(tr.states.len(), 101);
            assert_eq!(tr.estimation_mse, 0.0);
        }
    }

    #[test]
    fn zero_reliability_never_updates() {
        let m = conveyor(0.6);
        let tr = run_loop(&m, &pd_policy(Estimator::Passthrough, 0.0), &LinkModel::Bernoulli, 3).unwrap();
        assert_eq!(tr.pdr(), 0.0);
        assert_eq!(tr.steps.last().unwrap().age, 99);
        assert!(!tr.success);
    }

    #[test]
    fn deterministic_given_seed() {
        let m = conveyor(0.6);
        let p = pd_policy(Estimator::Oracle, 0.5);
        let a = run_loop(&m, &p, &LinkModel::Bernoulli, 9).unwrap();
        let b = run_loop(&m, &p, &LinkModel::Bernoulli, 9).unwrap();
        assert_eq!(a.steps, b.steps);
        for (x, y) in a.states.iter().zip(&b.states) {
            let xb: Vec<u64> = x.x.iter().map(|v| v.to_bits()).collect();
            let yb: Vec<u64> = y.x.iter().map(|v| v.to_bits()).collect();
            assert_eq!(xb, yb);
        }
    }

    #[test]
    fn fixed_delay_ages_and_belt_kinematics() {
        let m = PlantModel::conveyor(
            ConveyorParams {
                belt_speed: 0.2,
                object_noise_std: 0.0,
                gripper_noise_std: 0.0,
                spawn_y: [5.0, 5.0001],
                ..Default::default()
            },
            100,
        )
        .unwrap();
        let tr = run_loop(&m, &pd_policy(Estimator::Passthrough, 1.0), &LinkModel::FixedDelay(4), 1).unwrap();
        let ages: Vec<usize> = tr.steps.iter().take(6).map(|s| s.age).collect();
        assert_eq!(ages, vec![0, 1, 2, 3, 4, 4]);
        let x0 = tr.states[0].x[ci::OBJ_X];
        for (k, s) in tr.states.iter().enumerate().take(30) {
            assert!((s.x[ci::OBJ_X] - (x0 + k as f64 * 0.2 * 0.04)).abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_plant_monotone_decay() {
        let m = PlantModel::linear_scalar(LinearScalarParams { a: 0.8, ..Default::default() }, 0.0, 50).unwrap();
        let p = CoDesignPolicy {
            controller: Controller::Linear { gain: vec![0.0] },
            estimator: Estimator::Passthrough,
            qos: QosPolicy::Constant { q: 1.0, tau: 0 },
        };
        let tr = run_loop(&m, &p, &LinkModel::Perfect, 2).unwrap();
        for w in tr.states.windows(2) {
            assert!(w[1].x[0].abs() <= w[0].x[0].abs());
        }
    }
}
