//! Per-loop link state: Bernoulli packet loss, latency, and age of information.
//!
//! The age at step `t` is
//!
//! ```text
//! ζ_t = t − max{ t' ≤ t : t' + τ_{t'} ≤ t, δ_{t'} = 1 }
//! ```
//!
//! with `ζ_t = t` while the set is empty (the initial state counts as known).
//! [`LinkState`] evaluates this incrementally: delivered packets wait in an
//! in-flight list until their arrival step, and the freshest arrived send
//! time is kept. A later packet with a shorter latency may overtake an
//! earlier one.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plants::PlantState;
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QosTarget {
    pub q: f64,
    pub tau: u32,
}

impl QosTarget {
    pub fn new(q: f64, tau: u32) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::contract(format!("reliability target {q} outside [0, 1]")));
        }
        Ok(QosTarget { q, tau })
    }
}

/// One transmission attempt: sent at step `t`, delivered or not, with the
/// realized latency in steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    pub t: usize,
    pub tau: u32,
    pub delivered: bool,
}

#[derive(Clone, Debug, Default)]
pub struct LinkState {
    age: usize,
    last_delivered_t: Option<usize>,
    current_t: Option<usize>,
    in_flight: Vec<(usize, usize)>,
    log: Vec<DeliveryRecord>,
    last_fresh: bool,
}

impl LinkState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn age(&self) -> usize {
        self.age
    }

    pub fn last_delivered_t(&self) -> Option<usize> {
        self.last_delivered_t
    }

    pub fn delivery_log(&self) -> &[DeliveryRecord] {
        &self.log
    }

    /// Whether the most recent [`advance`](Self::advance) moved the freshest
    /// delivered send time forward.
    pub fn fresh(&self) -> bool {
        self.last_fresh
    }

    /// Records the outcome of the packet sent at step `t_sent`. It becomes
    /// visible from step `t_sent + tau` if delivered.
    pub fn record(&mut self, t_sent: usize, delivered: bool, tau: u32) {
        self.log.push(DeliveryRecord {
            t: t_sent,
            tau,
            delivered,
        });
        if delivered && self.last_delivered_t.is_none_or(|last| t_sent > last) {
            self.in_flight.push((t_sent, t_sent + tau as usize));
        }
    }

    /// Moves the link clock to step `t` and returns the age there.
    pub fn advance(&mut self, t: usize) -> Result<usize> {
        if let Some(prev) = self.current_t {
            if t <= prev {
                return Err(Error::contract(format!(
                    "link time must strictly increase: {t} after {prev}"
                )));
            }
        }
        self.current_t = Some(t);
        let before = self.last_delivered_t;
        let mut newest = before;
        self.in_flight.retain(|&(sent, arrival)| {
            if arrival <= t {
                if newest.is_none_or(|n| sent > n) {
                    newest = Some(sent);
                }
                false
            } else {
                true
            }
        });
        self.last_delivered_t = newest;
        if let Some(n) = newest {
            self.in_flight.retain(|&(sent, _)| sent > n);
        }
        self.last_fresh = newest != before;
        self.age = match newest {
            Some(n) => t - n,
            None => t,
        };
        Ok(self.age)
    }

    /// Records the packet sent at `t` and advances to `t` in one call.
    pub fn update_age(&mut self, t: usize, delivered: bool, tau: u32) -> Result<usize> {
        if let Some(prev) = self.current_t {
            if t <= prev {
                return Err(Error::contract(format!(
                    "link time must strictly increase: {t} after {prev}"
                )));
            }
        }
        self.record(t, delivered, tau);
        self.advance(t)
    }
}

/// Returns `true` with probability `q`.
pub fn sample_delivery(q: f64, rng: &mut Rng) -> Result<bool> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::contract(format!("reliability {q} outside [0, 1]")));
    }
    Ok(rng.random::<f64>() < q)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub y: Vec<f64>,
    pub age: usize,
    pub fresh: bool,
}

/// Maps the state history `x_0..=x_t` and the link age to `y_t = x_{t−ζ}`.
pub fn observe(history: &[PlantState], link: &LinkState) -> Result<Observation> {
    observe_at(history, link.age(), link.fresh())
}

pub(crate) fn observe_at(history: &[PlantState], age: usize, fresh: bool) -> Result<Observation> {
    if history.len() < age + 1 {
        return Err(Error::contract(format!(
            "history of {} states cannot serve age {age}",
            history.len()
        )));
    }
    let idx = history.len() - 1 - age;
    Ok(Observation {
        y: history[idx].x.clone(),
        age,
        fresh,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use proptest::prelude::*;

    /// Direct evaluation of the age maximum over the full trace.
    fn brute_force_age(t: usize, delivered: &[bool], tau: &[u32]) -> usize {
        (0..=t)
            .filter(|&tp| delivered[tp] && tp + tau[tp] as usize <= t)
            .max()
            .map_or(t, |tp| t - tp)
    }

    #[test]
    fn age_examples() {
        let mut link = LinkState::new();
        let deltas = [true, false, true, true, false];
        let mut ages = vec![];
        for (t, &d) in deltas.iter().enumerate() {
            ages.push(link.update_age(t, d, 1).unwrap());
        }
        assert_eq!(ages[3], 1);
        assert_eq!(link.delivery_log().len(), 5);

        let mut ideal = LinkState::new();
        for t in 0..10 {
            assert_eq!(ideal.update_age(t, true, 0).unwrap(), 0);
        }

        let mut dead = LinkState::new();
        for t in 0..=5 {
            dead.update_age(t, false, 1).unwrap();
        }
        assert_eq!(dead.age(), 5);
        assert_eq!(dead.last_delivered_t(), None);
    }

    #[test]
    fn non_monotone_time_is_rejected() {
        let mut link = LinkState::new();
        link.update_age(3, true, 0).unwrap();
        assert!(link.update_age(3, true, 0).is_err());
        assert!(link.advance(2).is_err());
    }

    #[test]
    fn shorter_latency_overtakes() {
        let mut link = LinkState::new();
        link.update_age(0, true, 5).unwrap();
        link.update_age(1, true, 1).unwrap();
        assert_eq!(link.advance(2).unwrap(), 1);
        // the older packet arriving later must not make the age jump back
        for t in 3..=6 {
            assert_eq!(link.advance(t).unwrap(), t - 1);
        }
    }

    #[test]
    fn sample_delivery_extremes_and_rate() {
        let mut rng = rng_from(11, &[]);
        assert!((0..1000).all(|_| sample_delivery(1.0, &mut rng).unwrap()));
        assert!((0..1000).all(|_| !sample_delivery(0.0, &mut rng).unwrap()));
        let n = 100_000;
        let hits = (0..n).filter(|_| sample_delivery(0.5, &mut rng).unwrap()).count();
        let rate = hits as f64 / n as f64;
        assert!((0.49..=0.51).contains(&rate), "rate {rate}");
        assert!(sample_delivery(1.5, &mut rng).is_err());
    }

    #[test]
    fn observe_examples() {
        let hist: Vec<PlantState> = (0..3).map(|i| PlantState { x: vec![i as f64], t: i }).collect();
        assert_eq!(observe_at(&hist, 0, true).unwrap().y, vec![2.0]);
        assert_eq!(observe_at(&hist, 2, false).unwrap().y, vec![0.0]);
        assert!(observe_at(&hist, 3, false).is_err());

        let mut link = LinkState::new();
        link.update_age(0, false, 1).unwrap();
        link.update_age(1, false, 1).unwrap();
        link.update_age(2, false, 1).unwrap();
        let obs = observe(&hist, &link).unwrap();
        assert_eq!((obs.y, obs.age), (vec![0.0], 2));
    }

    proptest! {
        #[test]
        fn incremental_age_matches_brute_force(
            trace in proptest::collection::vec((any::<bool>(), 0u32..5), 1..60)
        ) {
            let delivered: Vec<bool> = trace.iter().map(|p| p.0).collect();
            let tau: Vec<u32> = trace.iter().map(|p| p.1).collect();
            let mut link = LinkState::new();
            let mut prev: Option<usize> = None;
            for t in 0..trace.len() {
                let age = link.update_age(t, delivered[t], tau[t]).unwrap();
                prop_assert_eq!(age, brute_force_age(t, &delivered, &tau));
                prop_assert!(age <= t);
                if let Some(p) = prev {
                    prop_assert!(age <= p + 1);
                }
                prev = Some(age);
            }
        }
    }
}
