//! Quantized average consensus over strongly connected digraphs.
//!
//! Every node starts with an integer value and ends holding a state pair
//! `(ys, zs)` whose ratio is exactly the network average. Three protocols are
//! provided: a randomized baseline, an event-triggered round-robin protocol,
//! and a minimum-mass variant that stops transmitting once settled.
//!
//! ```
//! use quantcons::{run, Algorithm, Digraph, RunConfig};
//!
//! let graph = Digraph::ring_directed(4).unwrap();
//! let cfg = RunConfig::new(Algorithm::EventTriggered, graph, vec![9, 3, 9, 3]).unwrap();
//! let trace = run(&cfg).unwrap();
//! assert_eq!(trace.termination.k0, Some(3));
//! ```

pub mod analysis;
pub mod engine;
pub mod error;
pub mod golden;
pub mod graph;
pub mod io;
pub mod protocol;

pub use analysis::{
    check_invariants, convergence_round, sweep, theoretical_bound, InvariantReport, SweepOutcome,
    SweepTemplate, TraceRecord, ValueSource,
};
pub use engine::{
    detect_convergence, is_settled, run, Algorithm, Message, MessageKind, RunConfig, Simulation,
    TerminatedBy, Termination, Trace,
};
pub use error::{Error, Result};
pub use graph::{Digraph, GraphSource, NodeId, PriorityMap, PriorityPolicy, ProbabilityAssignment};
pub use protocol::{Average, Mass, NodeState, StatePair};
