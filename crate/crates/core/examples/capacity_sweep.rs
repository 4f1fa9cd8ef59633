//! Plants sharing one network: static full reliability against a low
//! constant reliability, both with the model roll-forward estimator.

use codesign::harness::experiments::run_trials;
use codesign::harness::ExperimentConfig;
use codesign::policies::{CoDesignPolicy, Controller, Estimator, PdGains, QosPolicy};

fn main() -> codesign::Result<()> {
    let cfg = ExperimentConfig::default();
    let n_cap = cfg.network.capacity_bound()?;
    println!(
        "{} RUs per period, {} per loop at the robust MCS, N_cap = {n_cap}",
        cfg.network.rus_per_period()?,
        cfg.network.static_rus_per_loop()
    );
    let arm = |q: f64| CoDesignPolicy {
        controller: Controller::Pd(PdGains::default()),
        estimator: Estimator::Oracle,
        qos: QosPolicy::Constant { q, tau: 1 },
    };
    for m in [1, n_cap / 2, n_cap, 2 * n_cap] {
        for (label, q) in [("q=1.0", 1.0), ("q=0.2", 0.2)] {
            let (s, _) = run_trials(&cfg, &arm(q), label, m, 10)?;
            println!("m={m:<3} {label}  success {:.3}  PDR {:.3}", s.success_rate, s.mean_pdr);
        }
    }
    Ok(())
}
