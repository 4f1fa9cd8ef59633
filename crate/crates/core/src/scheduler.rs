//! Two-stage QoS-aware scheduler.
//!
//! 1. **Admission.** Each frame is dropped before queueing with probability
//!    `1 − q/q0`, where `q` is the flow's reliability target and `q0` the
//!    packet delivery ratio of the MCS selected for the current channel. The
//!    end-to-end delivery ratio is then `q0 · q/q0 = q`.
//! 2. **Allocation.** Every interval, queued frames are served in ascending
//!    deadline order (ties: arrival, then flow id). Each frame receives as
//!    many of the remaining resource units as it still needs, provided it can
//!    still complete before its deadline; frames that cannot are expired.
//!
//! Channel quality is block fading: one SNR draw per frame arrival. The MCS
//! library maps SNR to PDR with a logistic curve per entry.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from, stream, Rng};

const TIME_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McsEntry {
    pub index: usize,
    /// Payload bits carried by one resource unit.
    pub bits_per_ru: u32,
    /// SNR (dB) at which the PDR is one half.
    pub midpoint_db: f64,
    /// Logistic slope, per dB.
    pub slope_per_db: f64,
}

impl McsEntry {
    pub fn pdr(&self, snr_db: f64) -> f64 {
        1.0 / (1.0 + (-self.slope_per_db * (snr_db - self.midpoint_db)).exp())
    }

    /// SNR at which this entry reaches `pdr` (inverse of the logistic curve).
    pub fn snr_ref(&self, pdr: f64) -> f64 {
        self.midpoint_db + (pdr / (1.0 - pdr)).ln() / self.slope_per_db
    }

    pub fn rus_for(&self, size_bits: u64) -> u32 {
        size_bits.div_ceil(self.bits_per_ru as u64) as u32
    }
}

/// Six entries, 3 dB apart, slope 1.5/dB.
pub fn default_mcs_library() -> Vec<McsEntry> {
    [1350, 2700, 4050, 5400, 8100, 10800]
        .into_iter()
        .enumerate()
        .map(|(i, bits)| McsEntry {
            index: i,
            bits_per_ru: bits,
            midpoint_db: 2.0 + 3.0 * i as f64,
            slope_per_db: 1.5,
        })
        .collect()
}

pub fn validate_library(lib: &[McsEntry]) -> Result<()> {
    if lib.is_empty() {
        return Err(Error::contract("MCS library is empty"));
    }
    for (i, w) in lib.windows(2).enumerate() {
        if w[1].bits_per_ru <= w[0].bits_per_ru {
            return Err(Error::contract(format!(
                "MCS {}: bits_per_ru must increase with index",
                i + 1
            )));
        }
        if w[1].midpoint_db <= w[0].midpoint_db {
            return Err(Error::contract(format!(
                "MCS {}: PDR midpoint must increase with index",
                i + 1
            )));
        }
    }
    if lib.iter().any(|e| e.bits_per_ru == 0 || !(e.slope_per_db > 0.0)) {
        return Err(Error::contract("MCS entries need positive bits_per_ru and slope"));
    }
    Ok(())
}

/// Result of the drop formula.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DropDecision {
    pub probability: f64,
    /// The target exceeded what the link can deliver; no frames are dropped
    /// but the realized PDR will fall short of the target.
    pub infeasible: bool,
}

/// `1 − q/q0`, clamped to `[0, 1]`.
pub fn drop_probability(q: f64, q0: f64) -> Result<DropDecision> {
    if !(0.0..=1.0).contains(&q) || !(q0 > 0.0 && q0 <= 1.0) {
        return Err(Error::contract(format!(
            "drop formula needs 0 ≤ q ≤ 1 and 0 < q0 ≤ 1, got q={q}, q0={q0}"
        )));
    }
    if q > q0 {
        return Ok(DropDecision {
            probability: 0.0,
            infeasible: true,
        });
    }
    Ok(DropDecision {
        probability: (1.0 - q / q0).clamp(0.0, 1.0),
        infeasible: false,
    })
}

/// Highest-rate entry whose PDR at `snr_db` meets `q_req`; falls back to the
/// most robust entry. Returns `(position in lib, pdr)`.
pub fn select_mcs(lib: &[McsEntry], snr_db: f64, q_req: f64) -> (usize, f64) {
    assert!(!lib.is_empty(), "MCS library must be nonempty");
    for (pos, entry) in lib.iter().enumerate().rev() {
        let pdr = entry.pdr(snr_db);
        if pdr >= q_req {
            return (pos, pdr);
        }
    }
    (0, lib[0].pdr(snr_db))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Ul,
    Dl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameStatus {
    /// Created, not yet admitted.
    New,
    Queued,
    Dropped,
    Delivered,
    /// Missed its deadline or was corrupted on the air.
    Expired,
}

impl FrameStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, FrameStatus::Dropped | FrameStatus::Delivered | FrameStatus::Expired)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub id: u64,
    pub flow: u32,
    pub direction: Direction,
    pub size_bits: u64,
    pub arrival_ms: f64,
    pub deadline_ms: f64,
    pub q: f64,
    pub mcs: Option<usize>,
    pub dropped: bool,
    pub delivered_ms: Option<f64>,
    pub status: FrameStatus,
    /// RUs still needed; set at admission from the selected MCS.
    pub remaining_rus: u32,
    /// Outcome of the air transmission, drawn at admission from the MCS PDR.
    pub air_ok: bool,
    /// Caller-defined tag (the harness stores the control step here).
    pub tag: u64,
}

impl Frame {
    pub fn new(id: u64, flow: u32, direction: Direction, size_bits: u64, arrival_ms: f64, deadline_ms: f64) -> Result<Self> {
        if size_bits == 0 {
            return Err(Error::contract("frame size must be positive"));
        }
        if deadline_ms < arrival_ms {
            return Err(Error::contract("frame deadline precedes its arrival"));
        }
        Ok(Frame {
            id,
            flow,
            direction,
            size_bits,
            arrival_ms,
            deadline_ms,
            q: 1.0,
            mcs: None,
            dropped: false,
            delivered_ms: None,
            status: FrameStatus::New,
            remaining_rus: 0,
            air_ok: true,
            tag: 0,
        })
    }

    /// Pre-assigns the resource need directly, bypassing MCS selection.
    pub fn with_rus(mut self, rus: u32) -> Self {
        self.remaining_rus = rus;
        self
    }
}

/// Drops `frame` with probability `1 − q_target/q0`; otherwise marks it
/// queued. The MCS must already be chosen (or RUs pre-assigned).
pub fn admit_frame(mut frame: Frame, q_target: f64, q0: f64, rng: &mut Rng) -> Result<Frame> {
    if frame.status != FrameStatus::New {
        return Err(Error::contract("frame already admitted"));
    }
    let decision = drop_probability(q_target, q0)?;
    frame.q = q_target;
    if rng.random::<f64>() < decision.probability {
        frame.dropped = true;
        frame.status = FrameStatus::Dropped;
    } else {
        frame.status = FrameStatus::Queued;
    }
    Ok(frame)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub frame_id: u64,
    pub first_ru: u32,
    pub count: u32,
}

/// OFDMA allocation for one scheduling interval.
#[derive(Clone, Debug, PartialEq)]
pub struct ResourceGrid {
    pub start_ms: f64,
    pub interval_ms: f64,
    pub ru_count: u32,
    pub assignments: Vec<Assignment>,
    used: u32,
}

impl ResourceGrid {
    pub fn new(start_ms: f64, interval_ms: f64, ru_count: u32) -> Self {
        ResourceGrid {
            start_ms,
            interval_ms,
            ru_count,
            assignments: Vec::new(),
            used: 0,
        }
    }

    pub fn end_ms(&self) -> f64 {
        self.start_ms + self.interval_ms
    }

    pub fn used(&self) -> u32 {
        self.used
    }

    pub fn free(&self) -> u32 {
        self.ru_count - self.used
    }

    /// Assigns the next `count` contiguous RUs to `frame_id`.
    pub fn assign(&mut self, frame_id: u64, count: u32) -> Result<Assignment> {
        if count == 0 || count > self.free() {
            return Err(Error::contract(format!(
                "cannot assign {count} RUs with {} free",
                self.free()
            )));
        }
        let a = Assignment {
            frame_id,
            first_ru: self.used,
            count,
        };
        self.used += count;
        self.assignments.push(a);
        Ok(a)
    }

    /// Assignments are disjoint and within `ru_count`.
    pub fn is_consistent(&self) -> bool {
        let mut spans: Vec<(u32, u32)> = self.assignments.iter().map(|a| (a.first_ru, a.first_ru + a.count)).collect();
        spans.sort_unstable();
        let disjoint = spans.windows(2).all(|w| w[0].1 <= w[1].0);
        let total: u32 = self.assignments.iter().map(|a| a.count).sum();
        disjoint && total <= self.ru_count && spans.last().is_none_or(|s| s.1 <= self.ru_count)
    }
}

#[derive(Clone, Debug, Default)]
pub struct IntervalOutcome {
    /// Frames in service order (only those that received RUs this interval).
    pub served_order: Vec<u64>,
    pub delivered: Vec<Frame>,
    pub expired: Vec<Frame>,
}

fn deadline_order(a: &Frame, b: &Frame) -> std::cmp::Ordering {
    a.deadline_ms
        .total_cmp(&b.deadline_ms)
        .then(a.arrival_ms.total_cmp(&b.arrival_ms))
        .then(a.flow.cmp(&b.flow))
        .then(a.id.cmp(&b.id))
}

/// Runs one interval of deadline-ordered greedy allocation over `queue`.
///
/// Frames that have not yet arrived by the interval start are skipped.
/// Terminal frames are removed from `queue` and returned.
pub fn schedule_interval(queue: &mut Vec<Frame>, grid: &mut ResourceGrid) -> IntervalOutcome {
    queue.sort_by(deadline_order);
    let start = grid.start_ms;
    let end = grid.end_ms();
    let mut out = IntervalOutcome::default();
    let mut keep = Vec::with_capacity(queue.len());

    for mut frame in queue.drain(..) {
        if frame.arrival_ms > start + TIME_EPS {
            keep.push(frame);
            continue;
        }
        let future_intervals = ((frame.deadline_ms - end) / grid.interval_ms + TIME_EPS).floor().max(0.0) as u64;
        let reachable = grid.free() as u64 + grid.ru_count as u64 * future_intervals;
        if end > frame.deadline_ms + TIME_EPS || frame.remaining_rus as u64 > reachable {
            frame.status = FrameStatus::Expired;
            out.expired.push(frame);
            continue;
        }
        let give = frame.remaining_rus.min(grid.free());
        if give > 0 {
            grid.assign(frame.id, give).expect("allocation within free capacity");
            out.served_order.push(frame.id);
            frame.remaining_rus -= give;
        }
        if frame.remaining_rus == 0 {
            if frame.air_ok {
                frame.status = FrameStatus::Delivered;
                frame.delivered_ms = Some(end);
                out.delivered.push(frame);
            } else {
                frame.status = FrameStatus::Expired;
                out.expired.push(frame);
            }
        } else {
            keep.push(frame);
        }
    }
    *queue = keep;
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub bandwidth_mhz: f64,
    pub ru_bandwidth_mhz: f64,
    pub interval_ms: f64,
    pub snr_mean_db: f64,
    pub snr_std_db: f64,
    pub mcs: Vec<McsEntry>,
    /// Write a per-interval occupancy record when running through the harness.
    #[serde(default)]
    pub log_occupancy: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let mcs = default_mcs_library();
        NetworkConfig {
            bandwidth_mhz: 40.0,
            ru_bandwidth_mhz: 2.0,
            interval_ms: 1.0,
            snr_mean_db: mcs[4].midpoint_db,
            snr_std_db: 3.0,
            mcs,
            log_occupancy: false,
        }
    }
}

impl NetworkConfig {
    pub fn ru_count(&self) -> Result<u32> {
        let ratio = self.bandwidth_mhz / self.ru_bandwidth_mhz;
        if !(ratio >= 1.0) || (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::config(
                "network.bandwidth_mhz",
                format!(
                    "{} MHz is not a whole number of {} MHz resource units",
                    self.bandwidth_mhz, self.ru_bandwidth_mhz
                ),
            ));
        }
        Ok(ratio.round() as u32)
    }

    pub fn validate(&self) -> Result<()> {
        self.ru_count()?;
        if !(self.interval_ms > 0.0) {
            return Err(Error::config("network.interval_ms", "must be positive"));
        }
        if !(self.snr_std_db >= 0.0) {
            return Err(Error::config("network.snr_std_db", "must be nonnegative"));
        }
        validate_library(&self.mcs).map_err(|e| Error::config("network.mcs", e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SchedulerStats {
    pub offered: u64,
    pub dropped: u64,
    pub delivered: u64,
    pub expired: u64,
    pub infeasible_targets: u64,
    pub max_rus_used: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyRecord {
    pub interval: u64,
    pub start_ms: f64,
    pub used_rus: u32,
    pub ru_count: u32,
    pub frames_served: u32,
}

/// One simulated shared network: admission, queue, and per-interval grid.
pub struct Scheduler {
    cfg: NetworkConfig,
    ru_count: u32,
    seed: u64,
    queue: Vec<Frame>,
    next_id: u64,
    interval: u64,
    stats: SchedulerStats,
    occupancy: Vec<OccupancyRecord>,
}

impl Scheduler {
    pub fn new(cfg: NetworkConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let ru_count = cfg.ru_count()?;
        Ok(Scheduler {
            cfg,
            ru_count,
            seed,
            queue: Vec::new(),
            next_id: 0,
            interval: 0,
            stats: SchedulerStats::default(),
            occupancy: Vec::new(),
        })
    }

    pub fn ru_count(&self) -> u32 {
        self.ru_count
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn stats(&self) -> SchedulerStats {
        self.stats
    }

    pub fn now_ms(&self) -> f64 {
        self.interval as f64 * self.cfg.interval_ms
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn occupancy(&self) -> &[OccupancyRecord] {
        &self.occupancy
    }

    /// Offers a frame: draws the block-fading SNR, selects the MCS for
    /// `q_target`, applies the drop formula, and queues survivors.
    /// Randomness is keyed by `(flow, frame sequence)` so flows do not
    /// perturb each other's draws.
    #[allow(clippy::too_many_arguments)]
    pub fn offer(
        &mut self,
        flow: u32,
        direction: Direction,
        size_bits: u64,
        arrival_ms: f64,
        deadline_ms: f64,
        q_target: f64,
        seq: u64,
        tag: u64,
    ) -> Result<Frame> {
        let id = self.next_id;
        self.next_id += 1;
        let mut frame = Frame::new(id, flow, direction, size_bits, arrival_ms, deadline_ms)?;
        frame.tag = tag;
        let dir_label = match direction {
            Direction::Ul => 0,
            Direction::Dl => 1,
        };
        let key = [flow as u64, dir_label, seq];
        let mut fading = rng_from(self.seed, &[stream::SCHED_FADING, key[0], key[1], key[2]]);
        let snr = if self.cfg.snr_std_db > 0.0 {
            Normal::new(self.cfg.snr_mean_db, self.cfg.snr_std_db)
                .expect("validated std")
                .sample(&mut fading)
        } else {
            self.cfg.snr_mean_db
        };
        let (pos, q0) = select_mcs(&self.cfg.mcs, snr, q_target);
        let entry = &self.cfg.mcs[pos];
        frame.mcs = Some(entry.index);
        frame.remaining_rus = entry.rus_for(size_bits);
        frame.air_ok = fading.random::<f64>() < q0;
        let q0 = q0.max(f64::MIN_POSITIVE);
        if drop_probability(q_target, q0)?.infeasible {
            self.stats.infeasible_targets += 1;
        }
        let mut drop_rng = rng_from(self.seed, &[stream::SCHED_DROP, key[0], key[1], key[2]]);
        let frame = admit_frame(frame, q_target, q0, &mut drop_rng)?;
        self.stats.offered += 1;
        if frame.dropped {
            self.stats.dropped += 1;
        } else {
            self.queue.push(frame.clone());
        }
        Ok(frame)
    }

    /// Runs the next interval and returns frames that reached a terminal
    /// state during it.
    pub fn run_interval(&mut self) -> IntervalOutcome {
        let mut grid = ResourceGrid::new(self.now_ms(), self.cfg.interval_ms, self.ru_count);
        let out = schedule_interval(&mut self.queue, &mut grid);
        debug_assert!(grid.is_consistent());
        self.stats.delivered += out.delivered.len() as u64;
        self.stats.expired += out.expired.len() as u64;
        self.stats.max_rus_used = self.stats.max_rus_used.max(grid.used());
        if self.cfg.log_occupancy {
            self.occupancy.push(OccupancyRecord {
                interval: self.interval,
                start_ms: grid.start_ms,
                used_rus: grid.used(),
                ru_count: grid.ru_count,
                frames_served: out.served_order.len() as u32,
            });
        }
        self.interval += 1;
        out
    }

    /// Expires everything still queued (end of simulation).
    pub fn flush(&mut self) -> Vec<Frame> {
        let mut rest: Vec<Frame> = self.queue.drain(..).collect();
        for f in &mut rest {
            f.status = FrameStatus::Expired;
        }
        self.stats.expired += rest.len() as u64;
        rest
    }
}
