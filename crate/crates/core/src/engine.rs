//! Synchronous round scheduler for the three protocols.
//!
//! Round `k` turns snapshot `k` into snapshot `k + 1`. Inside a round every
//! phase reads the values left by the previous phase for all nodes before any
//! node commits, so results never depend on the order nodes are visited in.
//!
//! Round layouts:
//!
//! * randomized: every node with nonzero mass draws a destination (itself
//!   included) and sends; deliveries merge; `z >= z^s` adopts the mass.
//! * event-triggered: nodes armed by the previous round (all nodes at `k = 0`)
//!   unicast their whole mass round-robin; deliveries merge; the trigger
//!   re-arms and updates the state. Snapshots therefore show the merged mass
//!   a node is about to forward.
//! * minimum-mass: received state broadcasts are applied, masses ranking below
//!   the state are forwarded round-robin, state broadcasts go out, forwarded
//!   masses merge, and masses ranking above the state are adopted. A state
//!   adopted from a mass is announced in the next round's broadcast slot.

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::theoretical_bound;
use crate::error::{Error, Result};
use crate::graph::{Digraph, NodeId, PriorityMap, PriorityPolicy, ProbabilityAssignment};
use crate::protocol::{
    adopt_trigger, dominant_received_state, event_trigger, exact_average, forward_trigger,
    merge_masses, randomized_trigger, state_equals_average, Average, Mass, NodeState, StatePair,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Random destination per round, adopt when `z >= z^s`.
    Randomized,
    /// Round-robin forwarding whenever the merged mass is not below the state.
    EventTriggered,
    /// Forward only follower masses; stop transmitting once settled.
    MinimumMass,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::Randomized,
        Algorithm::EventTriggered,
        Algorithm::MinimumMass,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Randomized => "alg1",
            Algorithm::EventTriggered => "alg2",
            Algorithm::MinimumMass => "alg3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "alg1" | "1" | "randomized" => Some(Algorithm::Randomized),
            "alg2" | "2" | "event-triggered" => Some(Algorithm::EventTriggered),
            "alg3" | "3" | "minimum-mass" => Some(Algorithm::MinimumMass),
            _ => None,
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// When a run stops. `max_rounds` caps every policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// First snapshot where every state equals the average.
    Convergence,
    /// `n` consecutive rounds without any message.
    Quiescence,
    /// Exactly `max_rounds` rounds.
    RoundCap,
    /// Converged, masses settled into identical holders whose value every
    /// state carries, and (minimum-mass only) `n` silent rounds.
    All,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Convergence => "oracle-convergence",
            Termination::Quiescence => "quiescence",
            Termination::RoundCap => "round-cap",
            Termination::All => "all",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "oracle-convergence" | "convergence" => Some(Termination::Convergence),
            "quiescence" => Some(Termination::Quiescence),
            "round-cap" => Some(Termination::RoundCap),
            "all" => Some(Termination::All),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageKind {
    MassUnicast,
    StateBroadcast,
}

impl MessageKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MessageKind::MassUnicast => "mass-unicast",
            MessageKind::StateBroadcast => "state-broadcast",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mass-unicast" => Some(MessageKind::MassUnicast),
            "state-broadcast" => Some(MessageKind::StateBroadcast),
            _ => None,
        }
    }
}

/// One transmission. A broadcast lists every out-neighbor as a receiver.
///
/// Mass unicasts merge in the round they are sent. Broadcasts are read in
/// the following round. Initial broadcasts carry `round == deliver_round == 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub kind: MessageKind,
    pub sender: NodeId,
    pub receivers: Vec<NodeId>,
    pub y: i64,
    pub z: u64,
    pub round: usize,
    pub deliver_round: usize,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub graph: Digraph,
    pub initial_values: Vec<i64>,
    pub priorities: Option<PriorityMap>,
    pub probabilities: Option<ProbabilityAssignment>,
    pub seed: u64,
    pub max_rounds: usize,
    pub termination: Termination,
}

impl RunConfig {
    /// Defaults: priorities by node index, uniform probabilities, seed 0,
    /// oracle termination, and a round cap of ten times the deterministic
    /// bound for this graph.
    pub fn new(algorithm: Algorithm, graph: Digraph, initial_values: Vec<i64>) -> Result<Self> {
        let priorities = match algorithm {
            Algorithm::Randomized => None,
            _ => Some(PriorityMap::assign(&graph, &PriorityPolicy::ByNodeIndex)?),
        };
        let probabilities = match algorithm {
            Algorithm::Randomized => Some(ProbabilityAssignment::uniform(&graph)),
            _ => None,
        };
        let max_rounds = default_max_rounds(&graph);
        Ok(RunConfig {
            algorithm,
            graph,
            initial_values,
            priorities,
            probabilities,
            seed: 0,
            max_rounds,
            termination: Termination::Convergence,
        })
    }

    pub fn with_priorities(mut self, priorities: PriorityMap) -> Self {
        self.priorities = Some(priorities);
        self
    }

    pub fn with_probabilities(mut self, probabilities: ProbabilityAssignment) -> Self {
        self.probabilities = Some(probabilities);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_rounds(mut self, max_rounds: usize) -> Self {
        self.max_rounds = max_rounds;
        self
    }

    pub fn with_termination(mut self, termination: Termination) -> Self {
        self.termination = termination;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.graph.node_count();
        if self.initial_values.len() != n {
            return Err(Error::ValueCount {
                expected: n,
                got: self.initial_values.len(),
            });
        }
        self.graph.require_strongly_connected()?;
        match self.algorithm {
            Algorithm::Randomized => {
                if self.probabilities.is_none() {
                    return Err(Error::Config(
                        "randomized protocol needs probabilities".into(),
                    ));
                }
            }
            Algorithm::EventTriggered | Algorithm::MinimumMass => {
                let p = self.priorities.as_ref().ok_or_else(|| {
                    Error::Config(format!("{} needs a priority map", self.algorithm))
                })?;
                let consistent = p.node_count() == n
                    && self.graph.nodes().all(|j| {
                        let mut order = p.order(j).to_vec();
                        order.sort_unstable();
                        order == self.graph.out_neighbors(j)
                    });
                if !consistent {
                    return Err(Error::Config(
                        "priority map does not match the graph".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Ten times the deterministic convergence budget of `graph`.
pub fn default_max_rounds(graph: &Digraph) -> usize {
    theoretical_bound(graph.node_count() as u64, graph.edge_count() as u64)
        .and_then(|b| b.checked_mul(10))
        .and_then(|b| usize::try_from(b).ok())
        .unwrap_or(usize::MAX)
}

/// Every node's state equals the average.
pub fn detect_convergence(nodes: &[NodeState], avg: &Average) -> bool {
    nodes.iter().all(|s| state_equals_average(&s.state, avg))
}

/// All nonzero masses are identical and every state equals that mass.
pub fn is_settled(nodes: &[NodeState]) -> bool {
    let mut holders = nodes.iter().filter(|s| !s.mass.is_zero());
    let Some(first) = holders.next() else {
        return false;
    };
    let common = first.mass;
    holders.all(|s| s.mass == common)
        && nodes
            .iter()
            .all(|s| s.state.y() == common.y && s.state.z() == common.z)
}

/// A run in progress. Created at `k = 0` by [`Simulation::new`] and advanced
/// one round at a time by [`Simulation::step`].
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    cfg: &'a RunConfig,
    nodes: Vec<NodeState>,
    // event-triggered: forward next round. minimum-mass: broadcast next round.
    pending: Vec<bool>,
    in_flight: Vec<Message>,
    initial_messages: Vec<Message>,
    rng: ChaCha8Rng,
    round: usize,
    avg: Average,
}

impl<'a> Simulation<'a> {
    /// Validates the configuration and sets up round 0: unit masses, states
    /// equal to the initial values, every round-robin pointer at order 0.
    pub fn new(cfg: &'a RunConfig) -> Result<Self> {
        cfg.validate()?;
        let avg = exact_average(&cfg.initial_values)?;
        let nodes: Vec<NodeState> = cfg
            .initial_values
            .iter()
            .map(|&v| NodeState::initial(v))
            .collect();
        let n = nodes.len();
        let (pending, initial_messages) = match cfg.algorithm {
            Algorithm::Randomized => (vec![false; n], Vec::new()),
            Algorithm::EventTriggered => (vec![true; n], Vec::new()),
            Algorithm::MinimumMass => {
                let msgs = cfg
                    .graph
                    .nodes()
                    .map(|j| broadcast(&cfg.graph, j, &nodes[j.index()].state, 0, 0))
                    .collect();
                (vec![false; n], msgs)
            }
        };
        Ok(Simulation {
            cfg,
            in_flight: initial_messages.clone(),
            initial_messages,
            nodes,
            pending,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            round: 0,
            avg,
        })
    }

    pub fn config(&self) -> &RunConfig {
        self.cfg
    }

    /// Index of the current snapshot.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn average(&self) -> Average {
        self.avg
    }

    /// Messages emitted during initialization (initial state broadcasts).
    pub fn initial_messages(&self) -> &[Message] {
        &self.initial_messages
    }

    /// Messages sent but not yet consumed.
    pub fn in_flight(&self) -> &[Message] {
        &self.in_flight
    }

    /// Flags carried into the next round: armed forwarders for the
    /// event-triggered protocol, deferred broadcasts for minimum-mass.
    pub fn pending(&self) -> &[bool] {
        &self.pending
    }

    pub fn is_converged(&self) -> bool {
        detect_convergence(&self.nodes, &self.avg)
    }

    /// Executes one round and returns the messages sent during it.
    pub fn step(&mut self) -> Result<Vec<Message>> {
        let sent = match self.cfg.algorithm {
            Algorithm::Randomized => self.step_randomized()?,
            Algorithm::EventTriggered => self.step_event_triggered()?,
            Algorithm::MinimumMass => self.step_minimum_mass()?,
        };
        self.round += 1;
        Ok(sent)
    }

    fn step_randomized(&mut self) -> Result<Vec<Message>> {
        let k = self.round;
        let graph = &self.cfg.graph;
        let probs = self
            .cfg
            .probabilities
            .as_ref()
            .expect("validated: probabilities present");
        let mut sent = Vec::new();
        for j in graph.nodes() {
            let mass = self.nodes[j.index()].mass;
            if mass.is_zero() {
                continue;
            }
            let dest = probs.sample(j, &mut self.rng);
            if dest != j {
                sent.push(unicast(j, dest, mass, k));
            }
        }
        self.deliver_mass(&sent)?;
        for node in &mut self.nodes {
            if randomized_trigger(&node.mass, &node.state) {
                node.state = StatePair::from_mass(node.mass).expect("z >= z^s >= 1");
            }
        }
        Ok(sent)
    }

    fn step_event_triggered(&mut self) -> Result<Vec<Message>> {
        let k = self.round;
        let graph = &self.cfg.graph;
        let priorities = self
            .cfg
            .priorities
            .as_ref()
            .expect("validated: priorities present");
        let mut sent = Vec::new();
        for j in graph.nodes() {
            if !self.pending[j.index()] {
                continue;
            }
            let node = &mut self.nodes[j.index()];
            let dest = priorities.target(j, node.rr_pointer);
            node.rr_pointer = (node.rr_pointer + 1) % graph.out_degree(j);
            sent.push(unicast(j, dest, node.mass, k));
        }
        self.deliver_mass(&sent)?;
        for (node, armed) in self.nodes.iter_mut().zip(self.pending.iter_mut()) {
            *armed = event_trigger(&node.mass, &node.state);
            if *armed {
                node.state = StatePair::from_mass(node.mass).expect("mass ranks above a state");
            }
        }
        Ok(sent)
    }

    fn step_minimum_mass(&mut self) -> Result<Vec<Message>> {
        let k = self.round;
        let graph = &self.cfg.graph;
        let priorities = self
            .cfg
            .priorities
            .as_ref()
            .expect("validated: priorities present");
        let n = self.nodes.len();

        // Received states, then the propagation rule against the round-start
        // state of each node.
        let mut received: Vec<Vec<StatePair>> = vec![Vec::new(); n];
        for msg in self.in_flight.drain(..) {
            debug_assert_eq!(msg.deliver_round, k);
            let state = StatePair::new(msg.y, msg.z);
            for r in &msg.receivers {
                received[r.index()].push(state);
            }
        }
        let mut announce = std::mem::take(&mut self.pending);
        for (j, node) in self.nodes.iter_mut().enumerate() {
            if let Some(next) = dominant_received_state(&node.state, &received[j]) {
                node.state = next;
                announce[j] = true;
            }
        }

        let mut sent = Vec::new();
        for j in graph.nodes() {
            let node = &mut self.nodes[j.index()];
            if forward_trigger(&node.mass, &node.state) {
                let dest = priorities.target(j, node.rr_pointer);
                node.rr_pointer = (node.rr_pointer + 1) % graph.out_degree(j);
                sent.push(unicast(j, dest, node.mass, k));
                announce[j.index()] = true;
            }
        }
        for j in graph.nodes() {
            if announce[j.index()] {
                let msg = broadcast(graph, j, &self.nodes[j.index()].state, k, k + 1);
                self.in_flight.push(msg.clone());
                sent.push(msg);
            }
        }

        let unicasts: Vec<Message> = sent
            .iter()
            .filter(|m| m.kind == MessageKind::MassUnicast)
            .cloned()
            .collect();
        self.deliver_mass(&unicasts)?;

        self.pending = vec![false; n];
        for (node, pending) in self.nodes.iter_mut().zip(self.pending.iter_mut()) {
            if adopt_trigger(&node.mass, &node.state) {
                node.state = StatePair::from_mass(node.mass).expect("mass ranks above a state");
                *pending = true;
            }
        }
        Ok(sent)
    }

    /// Removes each unicast's mass from its sender and merges it at the
    /// receiver.
    fn deliver_mass(&mut self, unicasts: &[Message]) -> Result<()> {
        let n = self.nodes.len();
        let mut incoming: Vec<Vec<Mass>> = vec![Vec::new(); n];
        for msg in unicasts {
            debug_assert_eq!(msg.kind, MessageKind::MassUnicast);
            self.nodes[msg.sender.index()].mass = Mass::ZERO;
            incoming[msg.receivers[0].index()].push(Mass::new(msg.y, msg.z));
        }
        for (node, inbox) in self.nodes.iter_mut().zip(&incoming) {
            node.mass = merge_masses(node.mass, inbox)?;
        }
        Ok(())
    }
}

fn unicast(sender: NodeId, receiver: NodeId, mass: Mass, round: usize) -> Message {
    Message {
        kind: MessageKind::MassUnicast,
        sender,
        receivers: vec![receiver],
        y: mass.y,
        z: mass.z,
        round,
        deliver_round: round,
    }
}

fn broadcast(
    graph: &Digraph,
    sender: NodeId,
    state: &StatePair,
    round: usize,
    deliver_round: usize,
) -> Message {
    Message {
        kind: MessageKind::StateBroadcast,
        sender,
        receivers: graph.out_neighbors(sender).to_vec(),
        y: state.y(),
        z: state.z(),
        round,
        deliver_round,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminatedBy {
    Convergence,
    Quiescence,
    All,
    RoundCap,
}

impl TerminatedBy {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminatedBy::Convergence => "oracle-convergence",
            TerminatedBy::Quiescence => "quiescence",
            TerminatedBy::All => "all",
            TerminatedBy::RoundCap => "round-cap",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "oracle-convergence" => Some(TerminatedBy::Convergence),
            "quiescence" => Some(TerminatedBy::Quiescence),
            "all" => Some(TerminatedBy::All),
            "round-cap" => Some(TerminatedBy::RoundCap),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TerminationRecord {
    pub reason: TerminatedBy,
    /// Index of the last snapshot.
    pub round: usize,
    /// Convergence round of the recorded trace, if it converged.
    pub k0: Option<usize>,
    pub final_states: Vec<StatePair>,
}

/// Everything a run did: one snapshot per round boundary and every message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub algorithm: Algorithm,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub average: Average,
    pub snapshots: Vec<Vec<NodeState>>,
    /// Sorted by `round`.
    pub messages: Vec<Message>,
    pub termination: TerminationRecord,
}

impl Trace {
    /// Messages sent during `round` (initial messages belong to round 0).
    pub fn messages_in_round(&self, round: usize) -> &[Message] {
        let lo = self.messages.partition_point(|m| m.round < round);
        let hi = self.messages.partition_point(|m| m.round <= round);
        &self.messages[lo..hi]
    }

    pub fn count(&self, kind: MessageKind) -> usize {
        self.messages.iter().filter(|m| m.kind == kind).count()
    }

    pub fn final_snapshot(&self) -> &[NodeState] {
        self.snapshots
            .last()
            .expect("a trace has at least one snapshot")
    }
}

/// Runs `cfg` until its termination policy fires and records the trace.
pub fn run(cfg: &RunConfig) -> Result<Trace> {
    let mut sim = Simulation::new(cfg)?;
    let n = cfg.graph.node_count();
    let mut snapshots = vec![sim.nodes().to_vec()];
    let mut messages = sim.initial_messages().to_vec();
    let mut quiet = 0usize;
    let reason = loop {
        let k = sim.round();
        if let Some(reason) = stop_reason(&sim, quiet, n) {
            break reason;
        }
        if k >= cfg.max_rounds {
            break TerminatedBy::RoundCap;
        }
        let sent = sim.step()?;
        quiet = if sent.is_empty() { quiet + 1 } else { 0 };
        messages.extend(sent);
        snapshots.push(sim.nodes().to_vec());
    };
    let avg = sim.average();
    let k0 = crate::analysis::convergence_round(&snapshots, &avg);
    let final_states = sim.nodes().iter().map(|s| s.state).collect();
    Ok(Trace {
        algorithm: cfg.algorithm,
        n,
        m: cfg.graph.edge_count(),
        seed: cfg.seed,
        average: avg,
        snapshots,
        messages,
        termination: TerminationRecord {
            reason,
            round: sim.round(),
            k0,
            final_states,
        },
    })
}

/// Whether the configured policy (other than the round cap) is satisfied at
/// the current snapshot, given `quiet` trailing silent rounds.
pub(crate) fn stop_reason(sim: &Simulation<'_>, quiet: usize, n: usize) -> Option<TerminatedBy> {
    let cfg = sim.config();
    match cfg.termination {
        Termination::Convergence => sim.is_converged().then_some(TerminatedBy::Convergence),
        Termination::Quiescence => (quiet >= n).then_some(TerminatedBy::Quiescence),
        Termination::RoundCap => None,
        Termination::All => {
            let quiet_enough = cfg.algorithm != Algorithm::MinimumMass || quiet >= n;
            (sim.is_converged() && is_settled(sim.nodes()) && quiet_enough)
                .then_some(TerminatedBy::All)
        }
    }
}

/// Lexicographically largest nonzero masses, compared on `(z, y)`.
pub(crate) fn leading_indices(nodes: &[NodeState]) -> Vec<usize> {
    let Some(best) = nodes
        .iter()
        .filter(|s| !s.mass.is_zero())
        .map(|s| s.mass)
        .max_by(|a, b| a.lex_cmp(b))
    else {
        return Vec::new();
    };
    nodes
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.mass.is_zero() && s.mass.lex_cmp(&best) == Ordering::Equal)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example1_config() -> RunConfig {
        RunConfig::new(
            Algorithm::EventTriggered,
            Digraph::ring_directed(4).unwrap(),
            vec![9, 3, 9, 3],
        )
        .unwrap()
    }

    fn example2_config() -> RunConfig {
        let g = Digraph::new(4, &[(3, 1), (4, 1), (1, 2), (1, 3), (4, 3), (2, 4)]).unwrap();
        let p = PriorityMap::assign(
            &g,
            &PriorityPolicy::FromList(vec![
                (1, 4, 0),
                (1, 3, 1),
                (2, 1, 0),
                (3, 1, 0),
                (3, 4, 1),
                (4, 2, 0),
            ]),
        )
        .unwrap();
        RunConfig::new(Algorithm::MinimumMass, g, vec![2, 4, 7, 9])
            .unwrap()
            .with_priorities(p)
    }

    #[test]
    fn init_sets_unit_masses() {
        let cfg = example1_config();
        let sim = Simulation::new(&cfg).unwrap();
        let masses: Vec<Mass> = sim.nodes().iter().map(|s| s.mass).collect();
        assert_eq!(
            masses,
            vec![
                Mass::new(9, 1),
                Mass::new(3, 1),
                Mass::new(9, 1),
                Mass::new(3, 1)
            ]
        );
        assert!(sim.pending().iter().all(|p| *p));
        assert!(sim
            .nodes()
            .iter()
            .all(|s| s.rr_pointer == 0 && s.state.z() == 1));
    }

    #[test]
    fn event_triggered_round_zero_forwards_every_mass() {
        let cfg = example1_config();
        let mut sim = Simulation::new(&cfg).unwrap();
        let sent = sim.step().unwrap();
        assert_eq!(sent.len(), 4);
        assert!(sent
            .iter()
            .all(|m| m.kind == MessageKind::MassUnicast && m.deliver_round == 0));
        let receivers: Vec<usize> = sent.iter().map(|m| m.receivers[0].label()).collect();
        assert_eq!(receivers, vec![2, 3, 4, 1]);
    }

    #[test]
    fn minimum_mass_init_queues_broadcasts() {
        let cfg = example2_config();
        let sim = Simulation::new(&cfg).unwrap();
        assert_eq!(sim.initial_messages().len(), 4);
        assert_eq!(sim.in_flight().len(), 4);
        assert!(sim
            .initial_messages()
            .iter()
            .all(|m| m.kind == MessageKind::StateBroadcast && m.deliver_round == 0));
    }

    #[test]
    fn minimum_mass_first_round() {
        let cfg = example2_config();
        let mut sim = Simulation::new(&cfg).unwrap();
        sim.step().unwrap();
        let v = sim.nodes();
        assert_eq!(v[3].mass, Mass::new(11, 2));
        assert_eq!(v[3].state, StatePair::new(11, 2));
        assert_eq!(v[0].state, StatePair::new(7, 1));
        assert_eq!(v[1].state, StatePair::new(9, 1));
    }

    #[test]
    fn minimum_mass_fixed_point_is_silent() {
        let g = Digraph::ring_undirected(5).unwrap();
        let cfg = RunConfig::new(Algorithm::MinimumMass, g, vec![1, 2, 3, 4, 5])
            .unwrap()
            .with_termination(Termination::All);
        let trace = run(&cfg).unwrap();
        assert_eq!(trace.termination.reason, TerminatedBy::All);
        let last = trace.termination.round;
        // once settled and silent for n rounds nothing more is sent
        assert!(trace.messages_in_round(last).is_empty());
        let holder_count = trace
            .final_snapshot()
            .iter()
            .filter(|s| !s.mass.is_zero())
            .count();
        assert!(holder_count >= 1);
    }

    #[test]
    fn randomized_single_holder_adopts_everything() {
        let g = Digraph::ring_directed(3).unwrap();
        let cfg = RunConfig::new(Algorithm::Randomized, g, vec![1, 2, 3])
            .unwrap()
            .with_seed(5);
        let mut sim = Simulation::new(&cfg).unwrap();
        for _ in 0..2000 {
            sim.step().unwrap();
            if let Some(holder) = sim.nodes().iter().find(|s| s.mass.z == 3) {
                assert_eq!(holder.state, StatePair::new(6, 3));
                return;
            }
        }
        panic!("masses never merged");
    }

    #[test]
    fn seeded_randomized_runs_replay() {
        let g = Digraph::random_strongly_connected(8, 0.2, 4).unwrap();
        let cfg = RunConfig::new(Algorithm::Randomized, g, (0..8).collect())
            .unwrap()
            .with_seed(99);
        assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap());
    }

    #[test]
    fn equal_values_converge_immediately() {
        let g = Digraph::random_strongly_connected(6, 0.3, 1).unwrap();
        for alg in Algorithm::ALL {
            let cfg = RunConfig::new(alg, g.clone(), vec![7; 6]).unwrap();
            let trace = run(&cfg).unwrap();
            assert_eq!(trace.termination.k0, Some(0), "{alg}");
            assert_eq!(trace.termination.round, 0);
        }
        let cfg = RunConfig::new(Algorithm::EventTriggered, g, vec![7; 6])
            .unwrap()
            .with_termination(Termination::RoundCap)
            .with_max_rounds(5);
        let trace = run(&cfg).unwrap();
        for k in 0..5 {
            // every trigger fires every round
            let senders = trace
                .messages_in_round(k)
                .iter()
                .filter(|m| m.kind == MessageKind::MassUnicast)
                .count();
            let holders = trace.snapshots[k]
                .iter()
                .filter(|s| !s.mass.is_zero())
                .count();
            assert_eq!(senders, holders);
            assert!(detect_convergence(&trace.snapshots[k + 1], &trace.average));
        }
    }

    #[test]
    fn config_validation() {
        let g = Digraph::ring_directed(4).unwrap();
        let err = RunConfig::new(Algorithm::EventTriggered, g.clone(), vec![9, 3, 9])
            .unwrap()
            .validate()
            .unwrap_err();
        assert_eq!(
            err,
            Error::ValueCount {
                expected: 4,
                got: 3
            }
        );
        let star = Digraph::new(3, &[(2, 1), (3, 1)]).unwrap();
        let err = RunConfig::new(Algorithm::MinimumMass, star, vec![1, 2, 3])
            .unwrap()
            .validate()
            .unwrap_err();
        assert_eq!(err, Error::NotStronglyConnected);
        let mut cfg = RunConfig::new(Algorithm::Randomized, g, vec![1, 2, 3, 4]).unwrap();
        cfg.probabilities = None;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn overflow_is_reported() {
        let g = Digraph::ring_directed(2).unwrap();
        let cfg = RunConfig::new(
            Algorithm::EventTriggered,
            g,
            vec![i64::MAX / 2 + 1, i64::MAX / 2 + 1],
        )
        .unwrap();
        assert!(matches!(
            exact_average(&cfg.initial_values),
            Err(Error::Overflow(_))
        ));
        assert!(matches!(run(&cfg), Err(Error::Overflow(_))));
    }

    #[test]
    fn settled_predicate() {
        let mut nodes = vec![NodeState::initial(3), NodeState::initial(3)];
        assert!(is_settled(&nodes));
        nodes[1].mass = Mass::ZERO;
        nodes[0].mass = Mass::new(6, 2);
        assert!(!is_settled(&nodes));
        nodes[0].state = StatePair::new(6, 2);
        nodes[1].state = StatePair::new(6, 2);
        assert!(is_settled(&nodes));
        nodes[1].mass = Mass::new(5, 2);
        assert!(!is_settled(&nodes));
    }

    #[test]
    fn detect_convergence_cases() {
        let avg = Average {
            total: 22,
            count: 4,
        };
        let mut nodes: Vec<NodeState> = (0..4)
            .map(|_| NodeState {
                mass: Mass::ZERO,
                state: StatePair::new(11, 2),
                rr_pointer: 0,
            })
            .collect();
        assert!(detect_convergence(&nodes, &avg));
        nodes[2].state = StatePair::new(9, 1);
        assert!(!detect_convergence(&nodes, &avg));
        let pair = vec![NodeState::initial(5), NodeState::initial(5)];
        assert!(detect_convergence(&pair, &exact_average(&[4, 6]).unwrap()));
    }
}
