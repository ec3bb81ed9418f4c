//! Node-count sweeps with repeated seeded trials per router.
//!
//! A trial builds one random topology, warms its links up, routes between
//! the farthest-apart connected pair, and records delay and speed for each
//! router. All routers start from clones of the same post-warmup state.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forwarding::{route, route_observed, Outcome, RouteOptions, RouteResult, RouterKind};
use crate::network::{LinkProcessConfig, NetworkState};
use crate::topology::{generate_topology, Area, NodeId, Topology};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub node_counts: Vec<usize>,
    /// `[width, height]`, meters.
    pub area: [f64; 2],
    pub radio_radius: f64,
    pub repetitions: usize,
    /// MB
    pub payload: f64,
    pub link: LinkProcessConfig,
    /// ms of link evolution before routing; defaults to 50 mean dwells.
    pub warmup: Option<f64>,
    pub base_seed: u64,
    pub routers: Vec<RouterKind>,
    pub recompute_region: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            node_counts: (100..=300).step_by(25).collect(),
            area: [100.0, 100.0],
            radio_radius: 15.0,
            repetitions: 10,
            payload: 8.0,
            link: LinkProcessConfig::default(),
            warmup: None,
            base_seed: 2017,
            routers: RouterKind::ALL.to_vec(),
            recompute_region: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn warmup_ms(&self) -> f64 {
        self.warmup.unwrap_or(50.0 * self.link.mean_dwell)
    }

    pub fn route_options(&self) -> RouteOptions {
        RouteOptions { payload: self.payload, recompute_region: self.recompute_region }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.node_counts.is_empty() {
            return bad("node_counts must not be empty");
        }
        if !self.node_counts.windows(2).all(|w| w[0] < w[1]) {
            return bad("node_counts must be strictly ascending");
        }
        if self.node_counts[0] < 2 {
            return bad("every node count must be at least 2");
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        if !(self.payload.is_finite() && self.payload > 0.0) {
            return bad("payload must be positive");
        }
        if !(self.warmup_ms().is_finite() && self.warmup_ms() >= 0.0) {
            return bad("warmup must be non-negative");
        }
        if self.routers.is_empty() {
            return bad("routers must not be empty");
        }
        if !(self.radio_radius.is_finite() && self.radio_radius > 0.0) {
            return bad("radio_radius must be positive");
        }
        if !self.area.iter().all(|v| v.is_finite() && *v > 0.0) {
            return bad("area dimensions must be positive");
        }
        self.link.validate().map_err(|e| Error::Config(e.to_string()))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable per-trial seed; independent of which other trials exist.
pub fn trial_seed(base_seed: u64, n: usize, rep: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(base_seed) ^ n as u64) ^ rep as u64)
}

/// The farthest-apart pair of nodes that share a connected component,
/// lower id first. Falls back to the farthest pair overall when no
/// component has two members.
pub fn pick_endpoints(topology: &Topology) -> (NodeId, NodeId) {
    let pos = topology.positions();
    let farthest = |members: &[NodeId], best: &mut Option<(f64, NodeId, NodeId)>| {
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                let d = pos[a.index()].distance(pos[b.index()]);
                if best.is_none_or(|(bd, _, _)| d > bd) {
                    *best = Some((d, a, b));
                }
            }
        }
    };
    let mut best = None;
    for component in topology.components() {
        farthest(&component, &mut best);
    }
    if best.is_none() {
        farthest(&topology.node_ids().collect::<Vec<_>>(), &mut best);
    }
    let (_, s, d) = best.expect("topology has at least two nodes");
    (s, d)
}

/// Post-warmup state and endpoints shared by every router of a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTrial {
    pub seed: u64,
    pub state: NetworkState,
    pub source: NodeId,
    pub destination: NodeId,
}

pub fn prepare_trial(config: &ExperimentConfig, n: usize, rep: usize) -> Result<PreparedTrial> {
    let seed = trial_seed(config.base_seed, n, rep);
    let area = Area::new(config.area[0], config.area[1]);
    let topology = generate_topology(n, area, config.radio_radius, seed)?;
    let (source, destination) = pick_endpoints(&topology);
    let mut state = NetworkState::init_links(topology, config.link, splitmix64(seed))?;
    state.advance_to(config.warmup_ms())?;
    Ok(PreparedTrial { seed, state, source, destination })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub router: RouterKind,
    pub n: usize,
    pub rep: usize,
    pub outcome: Outcome,
    pub hops: usize,
    /// ms; `None` unless delivered.
    pub delay: Option<f64>,
    /// MB/ms; `None` unless delivered.
    pub speed: Option<f64>,
}

impl TrialMetrics {
    pub fn from_route(router: RouterKind, n: usize, rep: usize, payload: f64, r: &RouteResult) -> Self {
        let (delay, speed) = match r.outcome {
            Outcome::Delivered => {
                let delay = r.total_delay();
                (Some(delay), Some(payload / delay))
            }
            _ => (None, None),
        };
        Self { router, n, rep, outcome: r.outcome, hops: r.hops.len(), delay, speed }
    }

    fn sort_key(&self) -> (RouterKind, usize, usize) {
        (self.router, self.n, self.rep)
    }
}

pub fn run_trial(config: &ExperimentConfig, n: usize, rep: usize) -> Result<Vec<TrialMetrics>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 nodes, got {n}")));
    }
    let trial = prepare_trial(config, n, rep)?;
    let opts = config.route_options();
    config
        .routers
        .iter()
        .map(|&kind| {
            let mut state = trial.state.clone();
            let r = route(&mut state, trial.source, trial.destination, kind, &opts)?;
            Ok(TrialMetrics::from_route(kind, n, rep, config.payload, &r))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub router: RouterKind,
    pub n: usize,
    pub trials: usize,
    pub delivered: usize,
    /// Over delivered trials only.
    pub mean_delay: Option<f64>,
    pub mean_speed: Option<f64>,
    pub delivery_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTable {
    pub rows: Vec<TrialMetrics>,
    pub aggregates: Vec<Aggregate>,
}

impl ExperimentTable {
    /// Sorts rows by (router, n, rep) and derives the per-(router, n) aggregates.
    pub fn from_rows(mut rows: Vec<TrialMetrics>) -> Self {
        rows.sort_by_key(TrialMetrics::sort_key);
        let mut groups: BTreeMap<(RouterKind, usize), Vec<&TrialMetrics>> = BTreeMap::new();
        for row in &rows {
            groups.entry((row.router, row.n)).or_default().push(row);
        }
        let aggregates = groups
            .into_iter()
            .map(|((router, n), group)| {
                let delivered: Vec<_> = group.iter().filter(|r| r.outcome == Outcome::Delivered).collect();
                let mean = |f: fn(&TrialMetrics) -> Option<f64>| {
                    (!delivered.is_empty()).then(|| {
                        delivered.iter().filter_map(|r| f(r)).sum::<f64>() / delivered.len() as f64
                    })
                };
                Aggregate {
                    router,
                    n,
                    trials: group.len(),
                    delivered: delivered.len(),
                    mean_delay: mean(|r| r.delay),
                    mean_speed: mean(|r| r.speed),
                    delivery_ratio: delivered.len() as f64 / group.len() as f64,
                }
            })
            .collect();
        Self { rows, aggregates }
    }
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<ExperimentTable> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = config
        .node_counts
        .iter()
        .flat_map(|&n| (0..config.repetitions).map(move |rep| (n, rep)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(n, rep)| run_trial(config, n, rep))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(ExperimentTable::from_rows(rows))
}

/// How often a greedy router's pick was the fastest eligible link.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ChoiceQuality {
    /// Greedy decisions with more than a forced choice (direct delivery excluded).
    pub decisions: usize,
    /// Decisions whose chosen link finished the hop no later than any other eligible link.
    pub hits: usize,
    pub trials: usize,
    pub delivered: usize,
    /// Sum of delivered route delays, ms.
    pub delivered_delay: f64,
    /// Hops taken, delivered or not.
    pub hops: usize,
    /// Sum of all hop delays, ms.
    pub hop_delay: f64,
}

impl ChoiceQuality {
    pub fn hit_rate(&self) -> f64 {
        if self.decisions == 0 {
            0.0
        } else {
            self.hits as f64 / self.decisions as f64
        }
    }

    pub fn mean_delivered_delay(&self) -> Option<f64> {
        (self.delivered > 0).then(|| self.delivered_delay / self.delivered as f64)
    }

    pub fn mean_hop_delay(&self) -> Option<f64> {
        (self.hops > 0).then(|| self.hop_delay / self.hops as f64)
    }

    fn merge(&mut self, other: &ChoiceQuality) {
        self.decisions += other.decisions;
        self.hits += other.hits;
        self.trials += other.trials;
        self.delivered += other.delivered;
        self.delivered_delay += other.delivered_delay;
        self.hops += other.hops;
        self.hop_delay += other.hop_delay;
    }
}

/// Routes one prepared trial with `kind`, scoring every greedy decision
/// against the transfer time each eligible link would actually have given.
pub fn score_choices(trial: &PreparedTrial, kind: RouterKind, opts: &RouteOptions) -> Result<ChoiceQuality> {
    let mut quality = ChoiceQuality { trials: 1, ..Default::default() };
    let mut oracle_error = None;
    let mut state = trial.state.clone();
    let result = route_observed(&mut state, trial.source, trial.destination, kind, opts, |s, decision| {
        let Some(chosen) = decision.chosen else { return };
        if decision.direct {
            return;
        }
        let mut chosen_time = f64::INFINITY;
        let mut best_time = f64::INFINITY;
        for c in decision.candidates.iter().filter(|c| c.eligible()) {
            let mut probe = s.clone();
            match probe.transfer(decision.at, c.node, opts.payload) {
                Ok(t) => {
                    best_time = best_time.min(t.duration);
                    if c.node == chosen {
                        chosen_time = t.duration;
                    }
                }
                Err(e) => oracle_error = Some(e),
            }
        }
        quality.decisions += 1;
        if chosen_time <= best_time {
            quality.hits += 1;
        }
    })?;
    if let Some(e) = oracle_error {
        return Err(e);
    }
    quality.hops = result.hops.len();
    quality.hop_delay = result.total_delay();
    if result.outcome == Outcome::Delivered {
        quality.delivered = 1;
        quality.delivered_delay = result.total_delay();
    }
    Ok(quality)
}

/// Choice quality per greedy router over `trials` seeded trials, cycling
/// through the configured node counts.
pub fn compare_choices(
    config: &ExperimentConfig,
    trials: usize,
) -> Result<BTreeMap<RouterKind, ChoiceQuality>> {
    config.validate()?;
    let counts = &config.node_counts;
    let kinds: Vec<RouterKind> = config.routers.iter().copied().filter(|k| k.scorer().is_some()).collect();
    let opts = config.route_options();
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|i| {
            let trial = prepare_trial(config, counts[i % counts.len()], i / counts.len())?;
            kinds
                .iter()
                .map(|&k| Ok((k, score_choices(&trial, k, &opts)?)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out: BTreeMap<RouterKind, ChoiceQuality> = BTreeMap::new();
    for (kind, q) in per_trial.iter().flatten() {
        out.entry(*kind).or_default().merge(q);
    }
    Ok(out)
}
