//! Time-varying link bandwidth and the per-link sample histories.
//!
//! Every undirected link carries one piecewise-constant bandwidth process.
//! Changes are discrete events kept in a single time-ordered queue; the
//! queue and the random stream both live in [`NetworkState`], so advancing
//! to `t` in one call or in several smaller steps produces the same state.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{NodeId, Topology};

/// One observed bandwidth value: `b` MB/ms from time `t` ms on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSample {
    pub t: f64,
    pub b: f64,
}

impl BandwidthSample {
    pub const fn new(t: f64, b: f64) -> Self {
        Self { t, b }
    }
}

/// The last (at most) three bandwidth changes of a link, oldest first.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct History3 {
    slots: [Option<BandwidthSample>; 3],
}

impl History3 {
    pub const CAPACITY: usize = 3;

    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a history from `(t, b)` pairs, keeping the newest three.
    pub fn from_samples(samples: &[(f64, f64)]) -> Result<Self> {
        let mut h = Self::new();
        for &(t, b) in samples {
            h.push(BandwidthSample::new(t, b))?;
        }
        Ok(h)
    }

    pub fn len(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.slots[0].is_none()
    }

    pub fn samples(&self) -> impl Iterator<Item = BandwidthSample> + '_ {
        self.slots.iter().map_while(|s| *s)
    }

    pub fn to_vec(&self) -> Vec<BandwidthSample> {
        self.samples().collect()
    }

    pub fn newest(&self) -> Option<BandwidthSample> {
        self.samples().last()
    }

    /// Appends a sample, evicting the oldest once three are held.
    pub fn push(&mut self, sample: BandwidthSample) -> Result<()> {
        if !(sample.t.is_finite() && sample.b.is_finite()) || sample.t < 0.0 || sample.b < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "bandwidth sample must be finite and non-negative, got ({}, {})",
                sample.t, sample.b
            )));
        }
        if let Some(last) = self.newest() {
            if sample.t <= last.t {
                return Err(Error::DuplicateTimestamps(sample.t, last.t));
            }
        }
        let len = self.len();
        if len < Self::CAPACITY {
            self.slots[len] = Some(sample);
        } else {
            self.slots.rotate_left(1);
            self.slots[Self::CAPACITY - 1] = Some(sample);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftMode {
    /// Each change draws a fresh value uniformly from `[b_min, b_max]`.
    ResampleUniform,
    /// Each change moves the value by `slope * dwell`, reflecting at the bounds.
    LinearDrift,
    /// Bandwidth is drawn once and never changes.
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkProcessConfig {
    /// MB/ms
    pub b_min: f64,
    /// MB/ms
    pub b_max: f64,
    /// Mean time between changes, ms.
    pub mean_dwell: f64,
    pub drift_mode: DriftMode,
    /// Largest per-link drift slope magnitude for `LinearDrift`, MB/ms per ms.
    pub drift_rate: f64,
}

impl Default for LinkProcessConfig {
    fn default() -> Self {
        Self {
            b_min: 1.0,
            b_max: 10.0,
            mean_dwell: 0.5,
            drift_mode: DriftMode::LinearDrift,
            drift_rate: 0.5,
        }
    }
}

impl LinkProcessConfig {
    /// Links frozen at one common bandwidth.
    pub fn constant(bandwidth: f64) -> Self {
        Self {
            b_min: bandwidth,
            b_max: bandwidth,
            drift_mode: DriftMode::Static,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.b_min.is_finite() && self.b_max.is_finite()) || self.b_min < 0.0 {
            return bad(format!("bandwidth bounds must be finite with b_min >= 0, got [{}, {}]", self.b_min, self.b_max));
        }
        match self.drift_mode {
            DriftMode::Static => {
                if self.b_min <= 0.0 || self.b_min > self.b_max {
                    return bad(format!(
                        "static links need 0 < b_min <= b_max, got [{}, {}]",
                        self.b_min, self.b_max
                    ));
                }
            }
            _ => {
                if self.b_min >= self.b_max {
                    return bad(format!("need b_min < b_max, got [{}, {}]", self.b_min, self.b_max));
                }
            }
        }
        if !(self.mean_dwell.is_finite() && self.mean_dwell > 0.0) {
            return bad(format!("mean_dwell must be positive, got {}", self.mean_dwell));
        }
        if !(self.drift_rate.is_finite() && self.drift_rate >= 0.0) {
            return bad(format!("drift_rate must be non-negative, got {}", self.drift_rate));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkState {
    pub current_bandwidth: f64,
    /// `f64::INFINITY` when no change is scheduled.
    pub next_change_at: f64,
    pub history: History3,
    /// Signed drift slope, MB/ms per ms. Zero outside `LinearDrift`.
    pub slope: f64,
}

/// Outcome of pushing a payload across one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transfer {
    pub started_at: f64,
    pub duration: f64,
    /// `payload / duration`, MB/ms.
    pub effective_bandwidth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    at: f64,
    link: usize,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.at.total_cmp(&other.at).then(self.link.cmp(&other.link))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
pub struct NetworkState {
    topology: Topology,
    config: LinkProcessConfig,
    /// Sorted `(low, high)` pairs; `links[i]` belongs to `link_keys[i]`.
    link_keys: Vec<(NodeId, NodeId)>,
    links: Vec<LinkState>,
    queue: BinaryHeap<Reverse<Event>>,
    clock: f64,
    rng: ChaCha8Rng,
}

/// Queue contents are a function of `links`, so they are not compared.
impl PartialEq for NetworkState {
    fn eq(&self, other: &Self) -> bool {
        self.clock == other.clock
            && self.config == other.config
            && self.topology == other.topology
            && self.link_keys == other.link_keys
            && self.links == other.links
            && self.rng == other.rng
    }
}

impl NetworkState {
    /// Gives every link an initial bandwidth at t=0 and schedules its first change.
    pub fn init_links(topology: Topology, config: LinkProcessConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dwell = Exp::new(1.0 / config.mean_dwell)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let link_keys = topology.links();
        let mut links = Vec::with_capacity(link_keys.len());
        let mut queue = BinaryHeap::with_capacity(link_keys.len());
        for i in 0..link_keys.len() {
            let b = if config.b_min == config.b_max {
                config.b_min
            } else {
                rng.random_range(config.b_min..=config.b_max)
            };
            let mut history = History3::new();
            history.push(BandwidthSample::new(0.0, b))?;
            let (next_change_at, slope) = match config.drift_mode {
                DriftMode::Static => (f64::INFINITY, 0.0),
                DriftMode::ResampleUniform => (next_after(0.0, &dwell, &mut rng), 0.0),
                DriftMode::LinearDrift => {
                    let next = next_after(0.0, &dwell, &mut rng);
                    let slope = if config.drift_rate > 0.0 {
                        rng.random_range(-config.drift_rate..=config.drift_rate)
                    } else {
                        0.0
                    };
                    (next, slope)
                }
            };
            if next_change_at.is_finite() {
                queue.push(Reverse(Event { at: next_change_at, link: i }));
            }
            links.push(LinkState { current_bandwidth: b, next_change_at, history, slope });
        }
        Ok(Self { topology, config, link_keys, links, queue, clock: 0.0, rng })
    }

    /// Every link static at `bandwidth`, one sample at t=0. For scripted scenarios.
    pub fn with_constant_links(topology: Topology, bandwidth: f64) -> Result<Self> {
        Self::init_links(topology, LinkProcessConfig::constant(bandwidth), 0)
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn config(&self) -> &LinkProcessConfig {
        &self.config
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    /// `(endpoints, state)` for every link, in sorted endpoint order.
    pub fn links(&self) -> impl Iterator<Item = ((NodeId, NodeId), &LinkState)> + '_ {
        self.link_keys.iter().copied().zip(self.links.iter())
    }

    fn link_index(&self, u: NodeId, v: NodeId) -> Result<usize> {
        let key = if u <= v { (u, v) } else { (v, u) };
        self.link_keys.binary_search(&key).map_err(|_| Error::NoSuchLink(u, v))
    }

    pub fn link(&self, u: NodeId, v: NodeId) -> Result<&LinkState> {
        Ok(&self.links[self.link_index(u, v)?])
    }

    pub fn history(&self, u: NodeId, v: NodeId) -> Result<&History3> {
        Ok(&self.link(u, v)?.history)
    }

    /// Ground-truth bandwidth of link `u-v` at the current clock.
    pub fn actual_bandwidth(&self, u: NodeId, v: NodeId) -> Result<f64> {
        Ok(self.link(u, v)?.current_bandwidth)
    }

    /// Processes every scheduled change up to and including `t`, in time order.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        if t.is_nan() || t < self.clock {
            return Err(Error::TimeRegression { clock: self.clock, requested: t });
        }
        while let Some(&Reverse(ev)) = self.queue.peek() {
            if ev.at > t {
                break;
            }
            self.queue.pop();
            self.apply_change(ev)?;
        }
        self.clock = t;
        Ok(())
    }

    fn apply_change(&mut self, ev: Event) -> Result<()> {
        let cfg = self.config;
        let link = &mut self.links[ev.link];
        let last = link.history.newest().ok_or(Error::EmptyHistory)?;
        let b = match cfg.drift_mode {
            DriftMode::ResampleUniform => self.rng.random_range(cfg.b_min..=cfg.b_max),
            DriftMode::LinearDrift => {
                let raw = link.current_bandwidth + link.slope * (ev.at - last.t);
                if raw > cfg.b_max {
                    link.slope = -link.slope.abs();
                    cfg.b_max
                } else if raw < cfg.b_min {
                    link.slope = link.slope.abs();
                    cfg.b_min
                } else {
                    raw
                }
            }
            DriftMode::Static => link.current_bandwidth,
        };
        link.current_bandwidth = b;
        link.history.push(BandwidthSample::new(ev.at, b))?;
        let dwell = Exp::new(1.0 / cfg.mean_dwell).expect("validated mean_dwell");
        let next = next_after(ev.at, &dwell, &mut self.rng);
        link.next_change_at = next;
        self.queue.push(Reverse(Event { at: next, link: ev.link }));
        Ok(())
    }

    /// Forces link `u-v` to `bandwidth` at the current clock.
    ///
    /// A change already recorded at this instant is overwritten.
    pub fn set_bandwidth(&mut self, u: NodeId, v: NodeId, bandwidth: f64) -> Result<()> {
        let idx = self.link_index(u, v)?;
        let clock = self.clock;
        let link = &mut self.links[idx];
        if link.history.newest().is_some_and(|s| s.t == clock) {
            let mut samples = link.history.to_vec();
            samples.pop();
            let mut h = History3::new();
            for s in samples {
                h.push(s)?;
            }
            link.history = h;
        }
        link.history.push(BandwidthSample::new(clock, bandwidth))?;
        link.current_bandwidth = bandwidth;
        Ok(())
    }

    /// Replaces the history of link `u-v`; the current bandwidth follows its newest sample.
    pub fn set_history(&mut self, u: NodeId, v: NodeId, history: History3) -> Result<()> {
        let idx = self.link_index(u, v)?;
        let newest = history.newest().ok_or(Error::EmptyHistory)?;
        if newest.t > self.clock {
            return Err(Error::InvalidParameter(format!(
                "history reaches {} ms, past the clock at {} ms",
                newest.t, self.clock
            )));
        }
        let link = &mut self.links[idx];
        link.history = history;
        link.current_bandwidth = newest.b;
        Ok(())
    }

    /// Pushes `payload` MB across `u-v` starting now, advancing the clock to
    /// the instant the last byte leaves. The link's bandwidth may change
    /// while the transfer is in flight.
    pub fn transfer(&mut self, u: NodeId, v: NodeId, payload: f64) -> Result<Transfer> {
        if !(payload.is_finite() && payload > 0.0) {
            return Err(Error::InvalidParameter(format!("payload must be positive, got {payload}")));
        }
        let idx = self.link_index(u, v)?;
        let started_at = self.clock;
        let mut remaining = payload;
        loop {
            let link = &self.links[idx];
            let b = link.current_bandwidth;
            let next = link.next_change_at;
            if b > 0.0 && b * (next - self.clock) >= remaining {
                let end = self.clock + remaining / b;
                self.advance_to(end)?;
                break;
            }
            if !next.is_finite() {
                return Err(Error::InvalidParameter(format!("link {u}-{v} is stalled at zero bandwidth")));
            }
            remaining -= b * (next - self.clock);
            self.advance_to(next)?;
        }
        let duration = self.clock - started_at;
        Ok(Transfer { started_at, duration, effective_bandwidth: payload / duration })
    }
}

fn next_after(t: f64, dwell: &Exp<f64>, rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let next = t + dwell.sample(rng);
        if next > t {
            return next;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{generate_topology, Area, Point};

    fn random_state(config: LinkProcessConfig, seed: u64) -> NetworkState {
        let topo = generate_topology(40, Area::new(100.0, 100.0), 25.0, seed).unwrap();
        NetworkState::init_links(topo, config, seed).unwrap()
    }

    fn pair() -> Topology {
        Topology::new(
            vec![Point::new(0.0, 0.0), Point::new(5.0, 0.0)],
            10.0,
            Area::new(10.0, 10.0),
        )
        .unwrap()
    }

    #[test]
    fn history_evicts_oldest() {
        let mut h = History3::from_samples(&[(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)]).unwrap();
        h.push(BandwidthSample::new(3.0, 4.0)).unwrap();
        assert_eq!(h.len(), 3);
        assert_eq!(
            h.to_vec(),
            vec![
                BandwidthSample::new(1.0, 2.0),
                BandwidthSample::new(2.0, 3.0),
                BandwidthSample::new(3.0, 4.0)
            ]
        );
        assert!(matches!(
            h.push(BandwidthSample::new(3.0, 1.0)),
            Err(Error::DuplicateTimestamps(..))
        ));
    }

    #[test]
    fn config_validation() {
        let mut c = LinkProcessConfig { b_min: 1.0, b_max: 1.0, ..Default::default() };
        assert!(matches!(c.validate(), Err(Error::InvalidParameter(_))));
        c.drift_mode = DriftMode::ResampleUniform;
        assert!(c.validate().is_err());
        c.drift_mode = DriftMode::Static;
        assert!(c.validate().is_ok());
        c.b_min = 0.0;
        c.b_max = 0.0;
        assert!(c.validate().is_err());
        let c = LinkProcessConfig { mean_dwell: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
        let err = NetworkState::init_links(
            pair(),
            LinkProcessConfig { b_min: 1.0, b_max: 1.0, ..Default::default() },
            1,
        );
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn init_gives_single_sample_at_zero() {
        let cfg = LinkProcessConfig { b_min: 2.0, b_max: 8.0, ..Default::default() };
        let s = random_state(cfg, 3);
        assert!(s.link_count() > 0);
        assert_eq!(s.clock(), 0.0);
        for ((u, v), link) in s.links() {
            assert_eq!(link.history.len(), 1);
            assert_eq!(link.history.newest().unwrap().t, 0.0);
            let b = s.actual_bandwidth(u, v).unwrap();
            assert!((2.0..=8.0).contains(&b));
            assert_eq!(b, link.history.newest().unwrap().b);
            assert!(link.next_change_at > 0.0);
        }
        assert_eq!(s, random_state(cfg, 3));
    }

    #[test]
    fn advance_to_now_is_identity() {
        let mut s = random_state(LinkProcessConfig::default(), 4);
        s.advance_to(3.0).unwrap();
        let before = s.clone();
        s.advance_to(3.0).unwrap();
        assert_eq!(s, before);
        assert!(matches!(s.advance_to(2.0), Err(Error::TimeRegression { .. })));
    }

    #[test]
    fn long_advance_fills_histories() {
        for mode in [DriftMode::ResampleUniform, DriftMode::LinearDrift] {
            let cfg = LinkProcessConfig { mean_dwell: 10.0, drift_mode: mode, ..Default::default() };
            let mut s = random_state(cfg, 5);
            s.advance_to(10_000.0).unwrap();
            for (_, link) in s.links() {
                assert_eq!(link.history.len(), 3);
                let h = link.history.to_vec();
                assert!(h.windows(2).all(|w| w[0].t < w[1].t));
                assert!(h.iter().all(|x| (cfg.b_min..=cfg.b_max).contains(&x.b)));
                assert_eq!(link.current_bandwidth, h[2].b);
                assert!(link.next_change_at > s.clock());
            }
        }
    }

    #[test]
    fn stepwise_and_single_advance_agree() {
        let mut a = random_state(LinkProcessConfig::default(), 6);
        let mut b = a.clone();
        a.advance_to(37.5).unwrap();
        for k in 1..=75 {
            b.advance_to(k as f64 * 0.5).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn forced_change_is_visible_at_its_instant() {
        let mut s = NetworkState::with_constant_links(pair(), 3.0).unwrap();
        let (u, v) = (NodeId(0), NodeId(1));
        s.advance_to(5.0).unwrap();
        assert_eq!(s.actual_bandwidth(u, v).unwrap(), 3.0);
        s.set_bandwidth(u, v, 7.0).unwrap();
        assert_eq!(s.actual_bandwidth(v, u).unwrap(), 7.0);
        assert_eq!(s.history(u, v).unwrap().to_vec().last().unwrap(), &BandwidthSample::new(5.0, 7.0));
        s.set_bandwidth(u, v, 6.0).unwrap();
        assert_eq!(s.history(u, v).unwrap().len(), 2);
        assert_eq!(s.actual_bandwidth(u, v).unwrap(), 6.0);
        assert!(matches!(s.actual_bandwidth(u, u), Err(Error::NoSuchLink(..))));
    }

    #[test]
    fn transfer_on_static_link() {
        let mut s = NetworkState::with_constant_links(pair(), 4.0).unwrap();
        let t = s.transfer(NodeId(0), NodeId(1), 8.0).unwrap();
        assert_eq!(t.duration, 2.0);
        assert_eq!(t.effective_bandwidth, 4.0);
        assert_eq!(s.clock(), 2.0);
    }

    #[test]
    fn transfer_integrates_bandwidth_changes() {
        let mut s = random_state(LinkProcessConfig::default(), 8);
        s.advance_to(20.0).unwrap();
        let ((u, v), _) = s.links().next().unwrap();
        let mut probe = s.clone();
        let t = s.transfer(u, v, 30.0).unwrap();
        assert_eq!(s.clock(), t.started_at + t.duration);

        // Re-integrate the piecewise-constant trace sampled on the clone.
        let mut moved = 0.0;
        let mut clock = probe.clock();
        let end = t.started_at + t.duration;
        while clock < end {
            let link = probe.link(u, v).unwrap();
            let step_end = link.next_change_at.min(end);
            moved += link.current_bandwidth * (step_end - clock);
            probe.advance_to(step_end).unwrap();
            clock = step_end;
        }
        assert!((moved - 30.0).abs() < 1e-9 * 30.0, "moved {moved}");
        assert_eq!(probe, s);
    }
}
