//! The QoS-aware scheduler on the default 40 MHz network: a few camera flows
//! with different reliability targets share the resource units.

use codesign::scheduler::{Direction, NetworkConfig, Scheduler};

fn main() -> codesign::Result<()> {
    let cfg = NetworkConfig {
        log_occupancy: true,
        ..NetworkConfig::default()
    };
    let mut s = Scheduler::new(cfg, 11)?;
    println!("{} RUs per interval", s.ru_count());
    let targets = [1.0, 0.5, 0.2];
    for period in 0..50u64 {
        for (flow, &q) in targets.iter().enumerate() {
            let now = period as f64 * 40.0 + flow as f64 * 5.0;
            while s.now_ms() < now {
                s.run_interval();
            }
            s.offer(flow as u32, Direction::Ul, 108_000, now, now + 40.0, q, period, period)?;
        }
    }
    s.flush();
    let st = s.stats();
    println!(
        "offered {}  dropped {}  delivered {}  expired {}  infeasible targets {}",
        st.offered, st.dropped, st.delivered, st.expired, st.infeasible_targets
    );
    let busy = s.occupancy().iter().filter(|o| o.used_rus > 0).count();
    println!("busy intervals {busy} of {}, peak use {} RUs", s.occupancy().len(), st.max_rus_used);
    Ok(())
}
