//! Byzantine-resilient broadcast on 4-connected planar graphs.
//!
//! A correct source broadcasts an information `m0`. Every other correct node
//! keeps only the last relay tuple `(m, S)` received from each neighbor and
//! delivers `m` once two independent witnesses agree on it. Reliable broadcast
//! holds whenever the minimal distance `D` between Byzantine nodes exceeds the
//! largest bounded face size `Z` of the embedding.
//!
//! The crate is organised as:
//! * [`graph`]: embedded topologies, faces (polygons), connectivity and generators.
//! * [`protocol`]: the per-node state machine and reference variants.
//! * [`adversary`]: Byzantine placements and behaviours.
//! * [`sim`]: the deterministic discrete-event executor and run reports.
//! * [`verify`]: executable predicates over reports and topologies.

pub mod adversary;
pub mod graph;
pub mod protocol;
pub mod sim;
pub mod verify;

pub use graph::{NodeId, Placement, Polygon, Topology};
pub use protocol::{Info, Message, NodeState};
pub use sim::{run, RunReport, RunSpec};
