//! Greedy forwarding over time-varying wireless mesh links.
//!
//! Nodes keep the last three bandwidth changes of each link, extrapolate
//! the link's bandwidth with a degree-2 Newton polynomial, and forward to
//! the in-cone neighbor with the highest predicted bandwidth. The
//! [`experiment`] module sweeps node counts and compares this router with
//! a last-observed-bandwidth greedy router and a fewest-hop baseline.

pub mod error;
pub mod experiment;
pub mod forwarding;
pub mod geometry;
pub mod network;
pub mod predictor;
pub mod report;
pub mod topology;

pub use error::{Error, Result};
pub use forwarding::{route, HopRecord, Outcome, RouteOptions, RouteResult, RouterKind};
pub use network::{BandwidthSample, DriftMode, History3, LinkProcessConfig, NetworkState};
pub use topology::{generate_topology, Area, NodeId, Point, Topology};
