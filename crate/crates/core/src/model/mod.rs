//! Graphs, systems, and performance indices.

pub mod file;
pub mod graph;
pub mod system;

pub use file::Model;
pub use graph::{enumerate_walks, validate_graph, ConstrainingGraph, Edge, EdgeWalk, NodeId};
pub use system::{l2_index, validate_pairing, EdgeSystems, IndexBlock, PerformanceIndex, StateSpace, SystemFamily};
