//! Hop-by-hop routing over a [`NetworkState`].
//!
//! The greedy routers compute the forwarding cone once at the source and
//! then, at every relay, hand the payload to the unvisited in-cone neighbor
//! with the best score. `MlForwarding` scores a link by its extrapolated
//! bandwidth at the decision instant; `LastObservedGreedy` uses the newest
//! recorded sample. `MinHop` follows a breadth-first shortest path.
//!
//! Each hop pushes the payload across the chosen link while link processes
//! keep evolving, so the clock advances by the hop's transfer time.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{forwarding_region, ForwardingRegion};
use crate::network::NetworkState;
use crate::predictor::predict_bandwidth;
use crate::topology::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RouterKind {
    MlForwarding,
    LastObservedGreedy,
    MinHop,
}

impl RouterKind {
    pub const ALL: [RouterKind; 3] =
        [RouterKind::MlForwarding, RouterKind::LastObservedGreedy, RouterKind::MinHop];

    pub fn name(self) -> &'static str {
        match self {
            RouterKind::MlForwarding => "ml-forwarding",
            RouterKind::LastObservedGreedy => "last-observed-greedy",
            RouterKind::MinHop => "min-hop",
        }
    }

    pub fn scorer(self) -> Option<Scorer> {
        match self {
            RouterKind::MlForwarding => Some(Scorer::Predicted),
            RouterKind::LastObservedGreedy => Some(Scorer::LastObserved),
            RouterKind::MinHop => None,
        }
    }
}

impl fmt::Display for RouterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RouterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RouterKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown router {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scorer {
    Predicted,
    LastObserved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Delivered,
    NoRoute,
    HopLimit,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Delivered => "delivered",
            Outcome::NoRoute => "no-route",
            Outcome::HopLimit => "hop-limit",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Outcome::Delivered, Outcome::NoRoute, Outcome::HopLimit]
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown outcome {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopRecord {
    pub from: NodeId,
    pub to: NodeId,
    /// ms
    pub decided_at: f64,
    /// Extrapolated link bandwidth at `decided_at`, MB/ms.
    pub predicted_bw: f64,
    /// Bandwidth the payload actually got, `payload / hop_delay`, MB/ms.
    pub actual_bw: f64,
    /// ms
    pub hop_delay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteResult {
    pub source: NodeId,
    pub destination: NodeId,
    pub hops: Vec<HopRecord>,
    pub outcome: Outcome,
}

impl RouteResult {
    pub fn total_delay(&self) -> f64 {
        self.hops.iter().map(|h| h.hop_delay).sum()
    }

    /// Node sequence starting at the source.
    pub fn path(&self) -> Vec<NodeId> {
        std::iter::once(self.source).chain(self.hops.iter().map(|h| h.to)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteOptions {
    /// MB
    pub payload: f64,
    /// Rebuild the cone at every relay instead of reusing the source's.
    pub recompute_region: bool,
}

impl RouteOptions {
    pub fn new(payload: f64) -> Self {
        Self { payload, recompute_region: false }
    }
}

/// What a relay saw about one neighbor when choosing the next hop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate {
    pub node: NodeId,
    pub in_region: bool,
    pub visited: bool,
    pub last_observed: f64,
    pub predicted: f64,
}

impl Candidate {
    pub fn eligible(&self) -> bool {
        self.in_region && !self.visited
    }

    pub fn score(&self, scorer: Scorer) -> f64 {
        match scorer {
            Scorer::Predicted => self.predicted,
            Scorer::LastObserved => self.last_observed,
        }
    }
}

/// One forwarding decision of a greedy router.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decision {
    pub at: NodeId,
    pub clock: f64,
    /// The destination was adjacent and taken directly.
    pub direct: bool,
    pub candidates: Vec<Candidate>,
    pub chosen: Option<NodeId>,
}

/// Scores every neighbor of `current` at the state's clock.
pub fn candidates(
    state: &NetworkState,
    current: NodeId,
    region: &ForwardingRegion,
    visited: &HashSet<NodeId>,
) -> Result<Vec<Candidate>> {
    let topo = state.topology();
    let clock = state.clock();
    topo.neighbors(current)?
        .iter()
        .map(|&v| {
            let history = state.history(current, v)?;
            let last = history.newest().ok_or(Error::EmptyHistory)?;
            Ok(Candidate {
                node: v,
                in_region: region.contains(topo.position(v)?),
                visited: visited.contains(&v),
                last_observed: last.b,
                predicted: predict_bandwidth(history, clock)?,
            })
        })
        .collect()
}

fn best(cands: &[Candidate], scorer: Scorer) -> Option<NodeId> {
    let mut best: Option<(NodeId, f64)> = None;
    for c in cands.iter().filter(|c| c.eligible()) {
        let s = c.score(scorer);
        match best {
            Some((id, bs)) if s < bs || (s == bs && c.node > id) => {}
            _ => best = Some((c.node, s)),
        }
    }
    best.map(|(id, _)| id)
}

/// The eligible neighbor with the highest score, smallest id on ties.
pub fn select_next_hop(
    state: &NetworkState,
    current: NodeId,
    region: &ForwardingRegion,
    visited: &HashSet<NodeId>,
    scorer: Scorer,
) -> Result<Option<NodeId>> {
    Ok(best(&candidates(state, current, region, visited)?, scorer))
}

pub fn route(
    state: &mut NetworkState,
    source: NodeId,
    destination: NodeId,
    kind: RouterKind,
    opts: &RouteOptions,
) -> Result<RouteResult> {
    route_observed(state, source, destination, kind, opts, |_, _| {})
}

/// Like [`route`], calling `observe` with the pre-decision state at every
/// greedy forwarding decision. `MinHop` makes no such decisions.
pub fn route_observed<F>(
    state: &mut NetworkState,
    source: NodeId,
    destination: NodeId,
    kind: RouterKind,
    opts: &RouteOptions,
    mut observe: F,
) -> Result<RouteResult>
where
    F: FnMut(&NetworkState, &Decision),
{
    let topo = state.topology();
    for id in [source, destination] {
        if !topo.contains(id) {
            return Err(Error::InvalidEndpoints(format!("unknown node {id}")));
        }
    }
    if source == destination {
        return Err(Error::InvalidEndpoints(format!("source and destination are both {source}")));
    }
    if !(opts.payload.is_finite() && opts.payload > 0.0) {
        return Err(Error::InvalidParameter(format!("payload must be positive, got {}", opts.payload)));
    }

    match kind.scorer() {
        Some(scorer) => greedy(state, source, destination, scorer, opts, &mut observe),
        None => min_hop(state, source, destination, opts),
    }
}

fn hop(state: &mut NetworkState, from: NodeId, to: NodeId, payload: f64) -> Result<HopRecord> {
    let decided_at = state.clock();
    let predicted_bw = predict_bandwidth(state.history(from, to)?, decided_at)?;
    let t = state.transfer(from, to, payload)?;
    Ok(HopRecord {
        from,
        to,
        decided_at,
        predicted_bw,
        actual_bw: t.effective_bandwidth,
        hop_delay: t.duration,
    })
}

fn greedy<F>(
    state: &mut NetworkState,
    source: NodeId,
    destination: NodeId,
    scorer: Scorer,
    opts: &RouteOptions,
    observe: &mut F,
) -> Result<RouteResult>
where
    F: FnMut(&NetworkState, &Decision),
{
    let dest_pos = state.topology().position(destination)?;
    let hop_limit = state.topology().len();
    let mut region = forwarding_region(state.topology().position(source)?, dest_pos)?;
    let mut visited = HashSet::new();
    let mut hops = Vec::new();
    let mut current = source;

    let outcome = loop {
        if current == destination {
            break Outcome::Delivered;
        }
        if hops.len() >= hop_limit {
            break Outcome::HopLimit;
        }
        if opts.recompute_region && current != source {
            region = forwarding_region(state.topology().position(current)?, dest_pos)?;
        }
        visited.insert(current);

        let cands = candidates(state, current, &region, &visited)?;
        let direct = state.topology().is_link(current, destination);
        let chosen = if direct { Some(destination) } else { best(&cands, scorer) };
        observe(
            state,
            &Decision { at: current, clock: state.clock(), direct, candidates: cands, chosen },
        );

        let Some(next) = chosen else {
            break Outcome::NoRoute;
        };
        hops.push(hop(state, current, next, opts.payload)?);
        current = next;
    };

    Ok(RouteResult { source, destination, hops, outcome })
}

/// Fewest-hop path over the current adjacency; smallest-id parents win ties.
pub fn shortest_path(state: &NetworkState, source: NodeId, destination: NodeId) -> Result<Option<Vec<NodeId>>> {
    let topo = state.topology();
    let mut parent = vec![None; topo.len()];
    let mut seen = vec![false; topo.len()];
    let mut queue = VecDeque::from([source]);
    seen[source.index()] = true;
    while let Some(u) = queue.pop_front() {
        if u == destination {
            let mut path = vec![u];
            let mut at = u;
            while let Some(p) = parent[at.index()] {
                path.push(p);
                at = p;
            }
            path.reverse();
            return Ok(Some(path));
        }
        for &v in topo.neighbors(u)? {
            if !seen[v.index()] {
                seen[v.index()] = true;
                parent[v.index()] = Some(u);
                queue.push_back(v);
            }
        }
    }
    Ok(None)
}

fn min_hop(
    state: &mut NetworkState,
    source: NodeId,
    destination: NodeId,
    opts: &RouteOptions,
) -> Result<RouteResult> {
    let Some(path) = shortest_path(state, source, destination)? else {
        return Ok(RouteResult { source, destination, hops: Vec::new(), outcome: Outcome::NoRoute });
    };
    let hops = path
        .windows(2)
        .map(|w| hop(state, w[0], w[1], opts.payload))
        .collect::<Result<Vec<_>>>()?;
    Ok(RouteResult { source, destination, hops, outcome: Outcome::Delivered })
}
