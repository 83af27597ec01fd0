//! Node-based subgraph GNNs: selection policies, the orbit-tensor model of
//! third-order invariant networks, ReIGN(2)/SUN layers with the classic
//! baselines, weight transpilers between them, and WL oracles.

pub mod graph;
pub mod rng;
pub mod ign3;
pub mod policy;
pub mod autograd;
pub mod layers;
pub mod wl;
pub mod harness;
