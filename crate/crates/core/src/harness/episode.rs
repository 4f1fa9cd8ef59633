//! Closed-loop episodes over the shared scheduled network.
//!
//! Each plant sends one uplink sensor frame per control period at its own
//! phase offset. When the uplink frame is delivered the edge answers with a
//! downlink state frame under the same deadline; the loop counts as served
//! for that step only if both arrive. The scheduler clock advances in 1 ms
//! intervals, and control boundaries fall on interval starts.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::netmodel::{observe_at, LinkState, Observation};
use crate::plants::{ControlInput, PlantModel, PlantState};
use crate::policies::{qos_aware_control, qos_targets, CoDesignPolicy};
use crate::rng::{derive, rng_from, stream};
use crate::scheduler::{Direction, Frame, FrameStatus, Scheduler, SchedulerStats};

use rand::Rng as _;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepLog {
    pub t: usize,
    pub q: f64,
    pub tau: u32,
    pub age: usize,
    pub delivered: bool,
    /// Realized latency in steps of the frame sent at `t`, if it arrived.
    pub latency: Option<u32>,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpisodeMetrics {
    pub plant: usize,
    pub seed: u64,
    pub success: bool,
    pub avg_pdr: f64,
    pub avg_age: f64,
    pub cumulative_j: f64,
    pub cumulative_c: f64,
    pub offered: u64,
    pub delivered: u64,
    #[serde(skip)]
    pub steps: Vec<StepLog>,
}

/// Outcome of one shared-network episode.
#[derive(Clone, Debug)]
pub struct NetworkEpisode {
    pub plants: Vec<EpisodeMetrics>,
    pub stats: SchedulerStats,
    pub max_rus_used: u32,
}

struct Loop {
    model: PlantModel,
    phase_ms: u64,
    history: Vec<PlantState>,
    inputs: Vec<ControlInput>,
    link: LinkState,
    prev_obs: Observation,
    noise: crate::rng::Rng,
    steps: Vec<StepLog>,
    delivered: Vec<Option<u32>>,
    cum_j: f64,
    cum_c: f64,
}

/// Encodes (plant, step) in a frame tag.
fn tag(plant: usize, t: usize) -> u64 {
    ((plant as u64) << 32) | t as u64
}

fn untag(tag: u64) -> (usize, usize) {
    ((tag >> 32) as usize, (tag & 0xffff_ffff) as usize)
}

/// Runs one episode of `cfg.plants` loops sharing the network, all driven by
/// `policy`.
pub fn run_episode(cfg: &ExperimentConfig, policy: &CoDesignPolicy, seed: u64) -> Result<NetworkEpisode> {
    run_network_episode(cfg, policy, cfg.plants, seed)
}

pub fn run_network_episode(cfg: &ExperimentConfig, policy: &CoDesignPolicy, m: usize, seed: u64) -> Result<NetworkEpisode> {
    if m == 0 {
        return Err(Error::config("plants", "at least one plant is required"));
    }
    let model = cfg.plant_model()?;
    let net = &cfg.network;
    let step_intervals = net.intervals_per_step()?;
    let horizon = model.horizon();
    let mut sched = Scheduler::new(net.scheduler_config(), derive(seed, &[stream::SCHED_FADING]))?;

    let mut loops: Vec<Loop> = (0..m)
        .map(|i| {
            let plant_seed = derive(seed, &[stream::EPISODE, i as u64]);
            let mut init = rng_from(plant_seed, &[stream::PLANT_INIT]);
            let x0 = model.initial_state(&mut init);
            let phase_ms = if m > 1 {
                rng_from(seed, &[stream::SCHED_PHASE, i as u64]).random_range(0..step_intervals)
            } else {
                0
            };
            Loop {
                model: model.clone(),
                phase_ms,
                prev_obs: Observation {
                    y: x0.x.clone(),
                    age: 0,
                    fresh: true,
                },
                history: vec![x0],
                inputs: Vec::with_capacity(horizon),
                link: LinkState::new(),
                noise: rng_from(plant_seed, &[stream::PLANT_NOISE]),
                steps: Vec::with_capacity(horizon),
                delivered: vec![None; horizon],
                cum_j: 0.0,
                cum_c: 0.0,
            }
        })
        .collect();

    let last_phase = loops.iter().map(|l| l.phase_ms).max().unwrap_or(0);
    // room for the last frames' deadlines (latency targets are bounded by
    // the policy; allow a generous tail)
    let tail = step_intervals * 16;
    let end_interval = last_phase + step_intervals * horizon as u64 + tail;
    let mut seq = vec![0u64; m];

    for k in 0..end_interval {
        let now = k as f64 * net.interval_ms;
        for (i, lp) in loops.iter_mut().enumerate() {
            if k < lp.phase_ms || (k - lp.phase_ms) % step_intervals != 0 {
                continue;
            }
            let t = ((k - lp.phase_ms) / step_intervals) as usize;
            if t >= horizon {
                continue;
            }
            control_boundary(lp, policy, &mut sched, i, t, now, net.step_ms, net.ul_bits(), &mut seq[i])?;
        }
        let out = sched.run_interval();
        for frame in out.delivered {
            let (i, t) = untag(frame.tag);
            match frame.direction {
                Direction::Ul => {
                    sched.offer(
                        i as u32,
                        Direction::Dl,
                        net.dl_bits(),
                        frame.delivered_ms.expect("delivered frames carry a time"),
                        frame.deadline_ms,
                        1.0,
                        t as u64,
                        frame.tag,
                    )?;
                }
                Direction::Dl => on_downlink(&mut loops[i], &frame, t, net.step_ms),
            }
        }
        if k >= last_phase + step_intervals * horizon as u64 && sched.queue_len() == 0 {
            break;
        }
    }
    sched.flush();

    let stats = sched.stats();
    let plants = loops
        .into_iter()
        .enumerate()
        .map(|(i, lp)| finish(lp, i, derive(seed, &[stream::EPISODE, i as u64])))
        .collect::<Result<Vec<_>>>()?;
    Ok(NetworkEpisode {
        plants,
        max_rus_used: stats.max_rus_used,
        stats,
    })
}

#[allow(clippy::too_many_arguments)]
fn control_boundary(
    lp: &mut Loop,
    policy: &CoDesignPolicy,
    sched: &mut Scheduler,
    plant: usize,
    t: usize,
    now: f64,
    step_ms: f64,
    ul_bits: u64,
    seq: &mut u64,
) -> Result<()> {
    let target = qos_targets(&policy.qos, &lp.model, &lp.prev_obs);
    sched.offer(
        plant as u32,
        Direction::Ul,
        ul_bits,
        now,
        now + target.tau as f64 * step_ms,
        target.q,
        *seq,
        tag(plant, t),
    )?;
    *seq += 1;
    let age = lp.link.advance(t)?;
    let obs = observe_at(&lp.history, age, lp.link.fresh())?;
    let (u, _) = qos_aware_control(policy, &lp.model, &obs, &lp.inputs)?;
    let state = lp.history.last().expect("nonempty history");
    let j = lp.model.control_cost(state);
    lp.cum_j += j;
    lp.cum_c += target.q;
    lp.steps.push(StepLog {
        t,
        q: target.q,
        tau: target.tau,
        age,
        delivered: false,
        latency: None,
        distance: lp.model.goal_distance(&state.x),
    });
    let next = lp.model.step(state, &u, &mut lp.noise)?;
    lp.history.push(next);
    lp.inputs.push(u);
    lp.prev_obs = obs;
    Ok(())
}

fn on_downlink(lp: &mut Loop, frame: &Frame, t: usize, step_ms: f64) {
    debug_assert_eq!(frame.status, FrameStatus::Delivered);
    let sent_ms = lp.phase_ms as f64 + t as f64 * step_ms;
    let latency = ((frame.delivered_ms.unwrap_or(frame.deadline_ms) - sent_ms) / step_ms - 1e-9).ceil().max(0.0);
    lp.link.record(t, true, latency as u32);
    lp.delivered[t] = Some(latency as u32);
}

fn finish(mut lp: Loop, plant: usize, seed: u64) -> Result<EpisodeMetrics> {
    for s in lp.steps.iter_mut() {
        s.latency = lp.delivered[s.t];
        s.delivered = s.latency.is_some();
    }
    let n = lp.steps.len().max(1) as f64;
    let delivered = lp.delivered.iter().filter(|d| d.is_some()).count() as u64;
    let success = lp.model.episode_success(&lp.history)?;
    Ok(EpisodeMetrics {
        plant,
        seed,
        success,
        avg_pdr: delivered as f64 / n,
        avg_age: lp.steps.iter().map(|s| s.age as f64).sum::<f64>() / n,
        cumulative_j: lp.cum_j,
        cumulative_c: lp.cum_c,
        offered: lp.steps.len() as u64,
        delivered,
        steps: lp.steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::{Controller, Estimator, PdGains, QosPolicy};

    fn static_policy(q: f64) -> CoDesignPolicy {
        CoDesignPolicy {
            controller: Controller::Pd(PdGains::default()),
            estimator: Estimator::Oracle,
            qos: QosPolicy::Constant { q, tau: 1 },
        }
    }

    #[test]
    fn full_reliability_single_plant() {
        let cfg = ExperimentConfig::default();
        let ep = run_episode(&cfg, &static_policy(1.0), 4).unwrap();
        let p = &ep.plants[0];
        assert_eq!(p.avg_pdr, 1.0);
        assert!(p.success);
        assert_eq!(p.steps.len(), 100);
        assert!(p.steps.iter().skip(1).all(|s| s.age == 1));
        assert!(p.steps.iter().all(|s| s.latency == Some(1)));
    }

    #[test]
    fn zero_reliability_never_informs() {
        let cfg = ExperimentConfig::default();
        let blind = CoDesignPolicy {
            estimator: Estimator::Passthrough,
            ..static_policy(0.0)
        };
        let ep = run_episode(&cfg, &blind, 4).unwrap();
        let p = &ep.plants[0];
        assert_eq!(p.avg_pdr, 0.0);
        assert_eq!(p.steps.last().unwrap().age, 99);
        assert!(!p.success);
    }

    #[test]
    fn pdr_matches_scheduler_terminal_counts() {
        let cfg = ExperimentConfig {
            plants: 4,
            ..Default::default()
        };
        let ep = run_episode(&cfg, &static_policy(0.4), 11).unwrap();
        let offered_ul: u64 = ep.plants.iter().map(|p| p.offered).sum();
        let delivered: u64 = ep.plants.iter().map(|p| p.delivered).sum();
        let s = ep.stats;
        assert_eq!(s.offered, s.dropped + s.delivered + s.expired);
        let pdr = 1.0 - (s.dropped + s.expired) as f64 / offered_ul as f64;
        assert!((pdr - delivered as f64 / offered_ul as f64).abs() < 1e-12);
        assert!(ep.max_rus_used <= 20);
    }

    #[test]
    fn deterministic() {
        let cfg = ExperimentConfig {
            plants: 3,
            ..Default::default()
        };
        let a = run_episode(&cfg, &static_policy(0.5), 2).unwrap();
        let b = run_episode(&cfg, &static_policy(0.5), 2).unwrap();
        assert_eq!(a.plants, b.plants);
    }
}
