//! Cross-entropy search on a noisy quadratic bowl.

use codesign::learning::{cem_optimize, TrainConfig};
use codesign::rng::rng_from;
use rand::Rng as _;

fn main() -> codesign::Result<()> {
    let target = [1.5, -0.7, 0.3];
    let cfg = TrainConfig {
        iterations: 40,
        ..TrainConfig::default()
    };
    let objective = |theta: &[f64], seed: u64| {
        let noise: f64 = rng_from(seed, &[]).random_range(-0.01..0.01);
        theta.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>() + noise
    };
    let out = cem_optimize(objective, &[0.0; 3], &cfg)?;
    for s in out.history.iter().step_by(5) {
        println!("iter {:>2}  elite {:.5}  std {:.4}", s.iteration, s.elite_loss, s.std_norm);
    }
    println!("mean {:.3?} (target {target:?})", out.mean);
    Ok(())
}
