use proptest::prelude::*;

use codesign::harness::{run_network_episode, wilson_interval, ExperimentConfig};
use codesign::learning::{train_estimator, DelayDistribution, DelaySource, TrainConfig};
use codesign::netmodel::LinkState;
use codesign::plants::{ControlInput, ConveyorParams, LinearScalarParams, PlantModel, PlantState};
use codesign::policies::{CoDesignPolicy, Controller, Estimator, PdGains, QosPolicy};
use codesign::rng::rng_from;
use codesign::scheduler::{Direction, FrameStatus, NetworkConfig, Scheduler};

fn conveyor() -> PlantModel {
    PlantModel::conveyor(
        ConveyorParams {
            belt_speed: 0.6,
            ..Default::default()
        },
        100,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn age_grows_by_one_or_resets_on_admissible_delivery(
        trace in prop::collection::vec((any::<bool>(), 0u32..5), 1..120)
    ) {
        let mut link = LinkState::new();
        let mut prev = 0usize;
        for (t, &(delivered, tau)) in trace.iter().enumerate() {
            let age = link.update_age(t, delivered, tau).unwrap();
            prop_assert!(age <= t);
            if t > 0 {
                prop_assert!(age <= prev + 1);
                if age != prev + 1 {
                    // some packet sent at t - age arrived by now
                    let s = t - age;
                    prop_assert!(trace[s].0 && s + trace[s].1 as usize <= t);
                }
            }
            prev = age;
        }
    }

    #[test]
    fn scheduler_conserves_frames_and_grid_capacity(
        seed in any::<u64>(),
        offers in prop::collection::vec((0u32..6, 1u64..200_000, 1u32..60, 0.0f64..=1.0), 1..80)
    ) {
        let cfg = NetworkConfig { log_occupancy: true, ..NetworkConfig::default() };
        let mut s = Scheduler::new(cfg, seed).unwrap();
        let mut terminal = std::collections::HashMap::new();
        for (k, &(flow, bits, slack, q)) in offers.iter().enumerate() {
            let now = s.now_ms();
            let f = s.offer(flow, Direction::Ul, bits, now, now + slack as f64, q, k as u64, k as u64).unwrap();
            if f.dropped {
                prop_assert_eq!(f.status, FrameStatus::Dropped);
                *terminal.entry(f.id).or_insert(0) += 1;
            }
            let out = s.run_interval();
            for d in &out.delivered {
                prop_assert!(d.delivered_ms.unwrap() <= d.deadline_ms + 1e-9);
                prop_assert_eq!(d.status, FrameStatus::Delivered);
            }
            for f in out.delivered.iter().chain(&out.expired) {
                *terminal.entry(f.id).or_insert(0) += 1;
            }
        }
        for f in s.flush() {
            *terminal.entry(f.id).or_insert(0) += 1;
        }
        prop_assert_eq!(terminal.len(), offers.len());
        prop_assert!(terminal.values().all(|&c| c == 1));
        let st = s.stats();
        prop_assert_eq!(st.offered, st.dropped + st.delivered + st.expired);
        prop_assert!(s.occupancy().iter().all(|o| o.used_rus <= o.ru_count));
    }

    #[test]
    fn control_cost_is_a_unit_interval_value(
        seed in any::<u64>(),
        steps in 1usize..60,
        ax in -10.0f64..10.0,
        ay in -10.0f64..10.0,
    ) {
        let model = conveyor();
        let mut rng = rng_from(seed, &[1]);
        let mut x = model.initial_state(&mut rng);
        for _ in 0..steps {
            let j = model.control_cost(&x);
            prop_assert!((0.0..=1.0).contains(&j));
            x = model.step(&x, &model.clamp_input(vec![ax, ay]), &mut rng).unwrap();
        }
        let scalar = PlantModel::linear_scalar(LinearScalarParams::default(), 0.5, 10).unwrap();
        let s = PlantState::new(vec![ax]);
        prop_assert!((0.0..=1.0).contains(&scalar.control_cost(&s)));
    }

    #[test]
    fn noiseless_plants_are_deterministic(x0 in -1.0f64..1.0, us in prop::collection::vec(-2.0f64..2.0, 1..40)) {
        let model = PlantModel::linear_scalar(LinearScalarParams::default(), 0.0, 100).unwrap();
        let roll = |seed: u64| {
            let mut rng = rng_from(seed, &[]);
            let mut x = PlantState::new(vec![x0]);
            for u in &us {
                x = model.step(&x, &ControlInput::new(vec![*u]), &mut rng).unwrap();
            }
            x.x[0].to_bits()
        };
        prop_assert_eq!(roll(1), roll(2));
    }

    #[test]
    fn wilson_interval_brackets_the_point_estimate(n in 1usize..5000, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac).floor() as usize;
        let (lo, hi) = wilson_interval(k, n);
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn shared_network_never_overbooks(seed in any::<u64>(), m in 1usize..14, q in 0.05f64..=1.0) {
        let cfg = ExperimentConfig { plant: codesign::harness::config::PlantSpec { horizon: 30, ..Default::default() }, ..Default::default() };
        let policy = CoDesignPolicy {
            controller: Controller::Pd(PdGains::default()),
            estimator: Estimator::Oracle,
            qos: QosPolicy::Constant { q, tau: 1 },
        };
        let ep = run_network_episode(&cfg, &policy, m, seed).unwrap();
        prop_assert!(ep.max_rus_used <= 20);
        prop_assert_eq!(ep.plants.len(), m);
        let s = ep.stats;
        let ul_offered: u64 = ep.plants.iter().map(|p| p.offered).sum();
        let delivered: u64 = ep.plants.iter().map(|p| p.delivered).sum();
        // every delivered loop step needed one delivered frame each way
        prop_assert!(2 * delivered <= s.delivered);
        prop_assert!(delivered <= ul_offered);
        for p in &ep.plants {
            prop_assert!((p.avg_pdr - p.delivered as f64 / p.offered as f64).abs() < 1e-12);
        }
    }
}

#[test]
fn estimator_training_is_reproducible() {
    let model = PlantModel::linear_scalar(LinearScalarParams::default(), 0.01, 40).unwrap();
    let ctrl = Controller::deadbeat(&model).unwrap();
    let cfg = TrainConfig {
        population: 8,
        elite_fraction: 0.25,
        iterations: 4,
        max_age: 3,
        estimator_hidden: vec![4],
        estimator_rounds: 2,
        estimator_episodes: 12,
        estimator_rows: 200,
        seed: 9,
        ..TrainConfig::default()
    };
    let delays = DelaySource::Distribution(DelayDistribution::Uniform { max: 3 });
    let (a, ra) = train_estimator(&model, &ctrl, &delays, &cfg, None).unwrap();
    let (b, rb) = train_estimator(&model, &ctrl, &delays, &cfg, None).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra.validation_mse.to_bits(), rb.validation_mse.to_bits());
    assert_eq!(ra.history, rb.history);
}
