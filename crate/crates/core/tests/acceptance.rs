//! Acceptance run. Prints one PASS/FAIL line per criterion and exits with a
//! failure status if any criterion fails.
//!
//! The trained pipeline (default config, seed 0) is built once in a temporary
//! directory and shared by the closed-loop criteria.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng as _;

use codesign::harness::experiments::{
    capacity_sweep, checkpoint, compare_policies, load_checkpoint, train_all, write_run, Stage,
};
use codesign::harness::ExperimentConfig;
use codesign::learning::{train_estimator, DelayDistribution, DelaySource, TrainConfig};
use codesign::netmodel::LinkState;
use codesign::plants::{LinearScalarParams, PlantModel};
use codesign::policies::{CoDesignPolicy, Controller, Estimator, QosPolicy};
use codesign::rng::{derive, rng_from};
use codesign::scheduler::{schedule_interval, Direction, Frame, McsEntry, NetworkConfig, ResourceGrid, Scheduler};
use codesign::sim::{run_loop, LinkModel};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

struct Report {
    failed: usize,
}

impl Report {
    fn check(&mut self, name: &str, limit: Duration, f: impl FnOnce() -> Verdict) {
        let start = Instant::now();
        let v = f();
        let took = start.elapsed();
        let in_time = took <= limit;
        let pass = v.pass && in_time;
        if !pass {
            self.failed += 1;
        }
        println!(
            "{} {name}: {} [{:.1} s, limit {} s{}]",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            took.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", too slow" }
        );
    }
}

// ---------------------------------------------------------------- drop formula

fn delivery_rate(q: f64, q0: f64, frames: u64) -> f64 {
    let snr = 14.0;
    // single entry whose PDR at the fixed SNR is q0
    let midpoint = if q0 >= 1.0 { snr - 40.0 } else { snr - (q0 / (1.0 - q0)).ln() / 1.5 };
    let cfg = NetworkConfig {
        snr_mean_db: snr,
        snr_std_db: 0.0,
        mcs: vec![McsEntry {
            index: 0,
            bits_per_ru: 1350,
            midpoint_db: midpoint,
            slope_per_db: 1.5,
        }],
        ..NetworkConfig::default()
    };
    let mut s = Scheduler::new(cfg, 17).unwrap();
    let mut delivered = 0u64;
    for k in 0..frames {
        let t = k as f64;
        s.offer(0, Direction::Ul, 256, t, t + 1.0, q, k, k).unwrap();
        delivered += s.run_interval().delivered.len() as u64;
    }
    delivered as f64 / frames as f64
}

fn drop_statistics() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut parts = vec![];
    for (q, q0) in [(0.13, 1.0), (0.5, 1.0), (0.5, 0.8)] {
        let rate = delivery_rate(q, q0, 100_000);
        worst = worst.max((rate - q).abs());
        parts.push(format!("q={q} q0={q0} rate={rate:.4}"));
    }
    verdict(worst <= 0.01, format!("{}; max |rate - q| = {worst:.4} (tol 0.01)", parts.join(", ")))
}

// ---------------------------------------------------------------- age

fn brute_age(t: usize, delivered: &[bool], tau: &[u32]) -> usize {
    (0..=t)
        .filter(|&s| delivered[s] && s + tau[s] as usize <= t)
        .max()
        .map_or(t, |s| t - s)
}

fn age_oracle() -> Verdict {
    let mut rng = rng_from(2024, &[1]);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let p: f64 = rng.random_range(0.05..0.95);
        let delivered: Vec<bool> = (0..100).map(|_| rng.random::<f64>() < p).collect();
        let tau: Vec<u32> = (0..100).map(|_| rng.random_range(0..=4)).collect();
        let mut link = LinkState::new();
        for t in 0..100 {
            let age = link.update_age(t, delivered[t], tau[t]).unwrap();
            if age != brute_age(t, &delivered, &tau) {
                mismatches += 1;
            }
        }
    }
    verdict(mismatches == 0, format!("{mismatches} mismatches over 1000 traces x 100 steps"))
}

// ---------------------------------------------------------------- EDF

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = vec![];
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn edf_exhaustive() -> Verdict {
    let mut rng = rng_from(2024, &[3]);
    let (mut feasible, mut violations) = (0, 0);
    for inst in 0..500 {
        let n = rng.random_range(1..=6);
        let sizes: Vec<u32> = (0..n).map(|_| rng.random_range(1..=4)).collect();
        let total: u32 = sizes.iter().sum();
        let deadlines: Vec<u32> = (0..n).map(|_| rng.random_range(1..=total)).collect();

        let any_order = permutations(n).iter().any(|order| {
            let mut clock = 0;
            order.iter().all(|&i| {
                clock += sizes[i];
                clock <= deadlines[i]
            })
        });

        let mut queue: Vec<Frame> = (0..n)
            .map(|i| {
                Frame::new(i as u64, i as u32, Direction::Ul, 8, 0.0, deadlines[i] as f64)
                    .unwrap()
                    .with_rus(sizes[i])
            })
            .collect();
        let mut delivered = 0;
        let mut k = 0;
        while !queue.is_empty() {
            let mut grid = ResourceGrid::new(k as f64, 1.0, 1);
            delivered += schedule_interval(&mut queue, &mut grid).delivered.len();
            k += 1;
            assert!(k < 1000, "instance {inst} did not terminate");
        }
        if any_order {
            feasible += 1;
            if delivered != n {
                violations += 1;
            }
        }
    }
    verdict(
        violations == 0,
        format!("{feasible} of 500 instances feasible, {violations} missed by greedy"),
    )
}

// ---------------------------------------------------------------- scalar estimator

fn scalar_estimator() -> Verdict {
    let model = PlantModel::linear_scalar(LinearScalarParams::default(), 0.01, 100).unwrap();
    let controller = Controller::deadbeat(&model).unwrap();
    let delays = DelayDistribution::Uniform { max: 4 };
    let cfg = TrainConfig {
        max_age: 4,
        estimator_hidden: vec![8],
        iterations: 30,
        ..TrainConfig::default()
    };
    let (est, _) = train_estimator(&model, &controller, &DelaySource::Distribution(delays.clone()), &cfg, None).unwrap();
    let link = LinkModel::Delays(delays);
    let mse = |estimator: Estimator| {
        let policy = CoDesignPolicy {
            controller: controller.clone(),
            estimator,
            qos: QosPolicy::Constant { q: 1.0, tau: 0 },
        };
        (0..500)
            .map(|i| run_loop(&model, &policy, &link, derive(77, &[i])).unwrap().estimation_mse)
            .sum::<f64>()
            / 500.0
    };
    let learned = mse(Estimator::Learned(est));
    let oracle = mse(Estimator::Oracle);
    verdict(
        learned <= 1.1 * oracle,
        format!("learned MSE {learned:.5}, oracle MSE {oracle:.5}, ratio {:.3} (tol 1.1)", learned / oracle),
    )
}

// ---------------------------------------------------------------- trained pipeline

fn success_at_delay(cfg: &ExperimentConfig, policy: &CoDesignPolicy, delay: usize, trials: u64) -> f64 {
    let model = cfg.plant_model().unwrap();
    let wins = (0..trials)
        .filter(|&i| {
            run_loop(&model, policy, &LinkModel::FixedDelay(delay), derive(cfg.seed, &[0xF4, i]))
                .unwrap()
                .success
        })
        .count();
    wins as f64 / trials as f64
}

fn estimator_under_delay(cfg: &ExperimentConfig) -> Verdict {
    let with = load_checkpoint(cfg, checkpoint::ESTIMATOR, Stage::Estimator).unwrap();
    let without = CoDesignPolicy {
        estimator: Estimator::Passthrough,
        ..with.clone()
    };
    let a = success_at_delay(cfg, &with, 4, 200);
    let b = success_at_delay(cfg, &without, 4, 200);
    verdict(
        a - b >= 0.20,
        format!("success at 4-step delay: estimator {a:.3}, none {b:.3}, gap {:.1} pp (need 20)", 100.0 * (a - b)),
    )
}

fn three_variants(cfg: &ExperimentConfig, training: Duration) -> Verdict {
    let start = Instant::now();
    let (summary, _) = compare_policies(cfg, 100).unwrap();
    let total = training + start.elapsed();
    let get = |label: &str| summary.iter().find(|s| s.label == label).unwrap();
    let (i, ii, iii) = (get("estimator_static_qos"), get("dynamic_qos_no_estimator"), get("codesign"));
    // the reference figures are whole percentages
    let pdr_i = (100.0 * i.mean_pdr).round();
    let pass = i.success_rate >= 0.99
        && pdr_i == 100.0
        && iii.success_rate >= 0.90
        && iii.mean_pdr <= 0.50
        && ii.success_rate < iii.success_rate
        && ii.mean_pdr > iii.mean_pdr
        && total <= Duration::from_secs(30 * 60);
    verdict(
        pass,
        format!(
            "(i) success {:.2} PDR {:.4}; (ii) success {:.2} PDR {:.3}; (iii) success {:.2} PDR {:.3}; \
             training + comparison {:.0} s (limit 1800)",
            i.success_rate,
            i.mean_pdr,
            ii.success_rate,
            ii.mean_pdr,
            iii.success_rate,
            iii.mean_pdr,
            total.as_secs_f64()
        ),
    )
}

fn capacity(cfg: &ExperimentConfig) -> Verdict {
    let net = &cfg.network;
    // offered RUs per period for m loops at the most robust MCS
    let per_loop = 108_000u64.div_ceil(1350) + 256u64.div_ceil(1350);
    let available = 20 * 40;
    let n_cap = (1..).find(|m| m * per_loop > available).unwrap() as usize;
    let derived = net.capacity_bound().unwrap();
    if derived != n_cap {
        return verdict(false, format!("config capacity bound {derived} differs from arithmetic {n_cap}"));
    }
    let (summary, _) = capacity_sweep(cfg, &[n_cap], 20).unwrap();
    let rate = |label: &str| summary.iter().find(|s| s.label == label).unwrap().success_rate;
    let (stat, co) = (rate("static_qos"), rate("codesign"));
    verdict(
        stat < 0.50 && co >= 0.90,
        format!("N_cap = {n_cap}; at m = N_cap static success {stat:.3} (need < 0.5), co-design {co:.3} (need >= 0.9)"),
    )
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism(cfg: &ExperimentConfig) -> Verdict {
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|name| {
            let dir = cfg.out_dir.join("determinism").join(name);
            let (summary, rows) = compare_policies(cfg, 100).unwrap();
            write_run(&dir, "compare", cfg, "comparison.csv", &summary, &rows).unwrap();
            read_all(&dir)
        })
        .collect();
    let names: Vec<&str> = runs[0].iter().map(|(n, _)| n.as_str()).collect();
    verdict(
        runs[0] == runs[1] && names.contains(&"comparison.csv") && names.contains(&"episodes.csv"),
        format!("{} files compared byte for byte: {}", names.len(), names.join(", ")),
    )
}

fn main() -> ExitCode {
    let mut report = Report { failed: 0 };
    report.check("drop-formula statistics", Duration::from_secs(10), drop_statistics);
    report.check("age oracle", Duration::from_secs(5), age_oracle);
    report.check("EDF exhaustive equivalence", Duration::from_secs(30), edf_exhaustive);
    report.check("scalar estimator vs oracle", Duration::from_secs(300), scalar_estimator);

    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        out_dir: dir.path().to_path_buf(),
        ..ExperimentConfig::default()
    };
    let start = Instant::now();
    train_all(&cfg).unwrap();
    let training = start.elapsed();
    println!("trained pipeline in {:.0} s", training.as_secs_f64());

    report.check("estimator under 4-step delay", Duration::from_secs(60), || estimator_under_delay(&cfg));
    report.check("three-variant ordering", Duration::from_secs(30 * 60), || three_variants(&cfg, training));
    report.check("capacity at the overload point", Duration::from_secs(600), || capacity(&cfg));
    report.check("compare determinism", Duration::from_secs(120), || determinism(&cfg));

    if report.failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", report.failed);
        ExitCode::FAILURE
    }
}
