//! Rolls the conveyor grasp plant under the PD baseline with perfect state,
//! then the scalar plant under its deadbeat gain.

use codesign::plants::{ConveyorParams, LinearScalarParams, PlantModel};
use codesign::policies::{CoDesignPolicy, Controller, Estimator, PdGains, QosPolicy};
use codesign::sim::{run_loop, LinkModel};

fn main() -> codesign::Result<()> {
    let conveyor = PlantModel::conveyor(
        ConveyorParams {
            belt_speed: 0.6,
            ..Default::default()
        },
        100,
    )?;
    let pd = CoDesignPolicy {
        controller: Controller::Pd(PdGains::default()),
        estimator: Estimator::Passthrough,
        qos: QosPolicy::Constant { q: 1.0, tau: 0 },
    };
    let trace = run_loop(&conveyor, &pd, &LinkModel::Perfect, 1)?;
    for s in trace.steps.iter().step_by(10) {
        println!("t={:>3}  distance {:.4}  J {}", s.t, s.distance, s.control_cost);
    }
    println!("conveyor success: {}\n", trace.success);

    let scalar = PlantModel::linear_scalar(LinearScalarParams::default(), 0.01, 30)?;
    let deadbeat = CoDesignPolicy {
        controller: Controller::deadbeat(&scalar)?,
        ..pd
    };
    let trace = run_loop(&scalar, &deadbeat, &LinkModel::Perfect, 2)?;
    let xs: Vec<String> = trace.states.iter().take(8).map(|s| format!("{:+.3}", s.x[0])).collect();
    println!("scalar x: {} ...", xs.join(" "));
    println!("scalar cumulative J {:.4}, success {}", trace.cumulative_j, trace.success);
    Ok(())
}
