//! Trains all stages with a reduced budget into a temporary directory and
//! runs the three-variant comparison. The CLI `train` and `compare`
//! commands do the same with the full budget.

use codesign::harness::experiments::{compare_policies, train_all};
use codesign::harness::ExperimentConfig;
use codesign::learning::TrainConfig;

fn main() -> codesign::Result<()> {
    let dir = std::env::temp_dir().join("codesign-staged-pipeline");
    let mut cfg = ExperimentConfig {
        out_dir: dir.clone(),
        train: TrainConfig {
            population: 24,
            iterations: 20,
            estimator_hidden: vec![16],
            estimator_episodes: 24,
            validation_episodes: 40,
            ..TrainConfig::default()
        },
        ..ExperimentConfig::default()
    };
    cfg.policy.lambdas = vec![0.5, 2.0];
    for path in train_all(&cfg)? {
        println!("wrote {}", path.display());
    }
    let (summary, _) = compare_policies(&cfg, 50)?;
    for s in summary {
        println!(
            "{:<26} success {:.2} [{:.2}, {:.2}]  PDR {:.3}",
            s.label, s.success_rate, s.success_lo, s.success_hi, s.mean_pdr
        );
    }
    Ok(())
}
