//! Trains the delay-compensating estimator on the scalar plant and compares
//! its error with the model roll-forward and with no compensation.

use codesign::learning::{train_estimator, DelayDistribution, DelaySource, TrainConfig};
use codesign::plants::{LinearScalarParams, PlantModel};
use codesign::policies::{CoDesignPolicy, Controller, Estimator, QosPolicy};
use codesign::sim::{run_loop, LinkModel};

fn main() -> codesign::Result<()> {
    let model = PlantModel::linear_scalar(LinearScalarParams::default(), 0.01, 100)?;
    let controller = Controller::deadbeat(&model)?;
    let delays = DelayDistribution::Uniform { max: 4 };
    let cfg = TrainConfig {
        max_age: 4,
        estimator_hidden: vec![8],
        iterations: 30,
        ..TrainConfig::default()
    };
    let (est, report) = train_estimator(&model, &controller, &DelaySource::Distribution(delays.clone()), &cfg, None)?;
    println!("validation MSE {:.5} from {} rows", report.validation_mse, report.rows);

    let link = LinkModel::Delays(delays);
    for (name, estimator) in [
        ("none", Estimator::Passthrough),
        ("roll-forward", Estimator::Oracle),
        ("learned", Estimator::Learned(est)),
    ] {
        let policy = CoDesignPolicy {
            controller: controller.clone(),
            estimator,
            qos: QosPolicy::Constant { q: 1.0, tau: 0 },
        };
        let mut mse = 0.0;
        for seed in 0..200 {
            mse += run_loop(&model, &policy, &link, 10_000 + seed)?.estimation_mse;
        }
        println!("{name:<13} episode MSE {:.5}", mse / 200.0);
    }
    Ok(())
}
