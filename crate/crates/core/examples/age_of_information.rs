//! Age of information over a lossy link with variable latency, and the
//! delayed observation it selects.

use codesign::netmodel::{observe, sample_delivery, LinkState};
use codesign::plants::PlantState;
use codesign::rng::rng_from;

fn main() -> codesign::Result<()> {
    let mut rng = rng_from(5, &[]);
    let mut link = LinkState::new();
    let history: Vec<PlantState> = (0..20).map(|t| PlantState::new(vec![t as f64])).collect();
    println!(" t  sent  tau  age  y");
    for t in 0..20 {
        let delivered = sample_delivery(0.6, &mut rng)?;
        let tau = (t % 3) as u32;
        let age = link.update_age(t, delivered, tau)?;
        let obs = observe(&history[..=t], &link)?;
        println!("{t:>2}  {:>4}  {tau:>3}  {age:>3}  {}", if delivered { "ok" } else { "lost" }, obs.y[0]);
    }
    Ok(())
}
