//! Learns reliability policies for a few penalty weights on the scalar plant
//! and prints the resulting cost/reliability trade-off.

use codesign::learning::{lagrangian_loss, train_qos_policy, LagrangianWeights, TrainConfig};
use codesign::plants::{LinearScalarParams, PlantModel};
use codesign::policies::{CoDesignPolicy, Controller, Estimator, QosPolicy};
use codesign::sim::{run_loop, LinkModel};

fn main() -> codesign::Result<()> {
    let model = PlantModel::linear_scalar(LinearScalarParams::default(), 0.1, 100)?;
    let base = CoDesignPolicy {
        controller: Controller::deadbeat(&model)?,
        estimator: Estimator::Oracle,
        qos: QosPolicy::Constant { q: 1.0, tau: 1 },
    };
    let cfg = TrainConfig {
        population: 24,
        iterations: 15,
        episodes: 4,
        ..TrainConfig::default()
    };
    println!("lambda  mean q  cum J   loss");
    for lambda in [0.5, 2.0, 8.0, 32.0] {
        let w = LagrangianWeights::new(lambda, 0.0)?;
        let (qos, _) = train_qos_policy(&model, &base, &w, &cfg, None)?;
        let p = CoDesignPolicy { qos, ..base.clone() };
        let (mut q, mut j) = (0.0, 0.0);
        for seed in 0..100 {
            let tr = run_loop(&model, &p, &LinkModel::Bernoulli, 500 + seed)?;
            q += tr.mean_q();
            j += tr.cumulative_j;
        }
        println!(
            "{lambda:>6}  {:.3}  {:>6.2}  {:.2}",
            q / 100.0,
            j / 100.0,
            lagrangian_loss(&model, &p, &w, 99, 100)
        );
    }
    Ok(())
}
