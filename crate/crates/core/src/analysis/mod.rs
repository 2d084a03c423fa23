//! Metrics and checks over snapshots and traces.

pub mod invariants;
mod sweep;

pub use invariants::{
    check_invariants, InvariantReport, MessageRecord, NodeRecord, TraceRecord, Verdict, Violation,
};
pub use sweep::{
    sweep, Distribution, PlotRow, SweepOutcome, SweepRow, SweepSummary, SweepTemplate, ValueSource,
};

use crate::engine::{detect_convergence, leading_indices, Message, MessageKind, Trace};
use crate::graph::NodeId;
use crate::protocol::{Average, NodeState};

/// Per-snapshot summary of a trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundMetrics {
    pub round: usize,
    /// Nodes holding nonzero mass.
    pub active: usize,
    pub leading: Vec<NodeId>,
    /// Holder set when every nonzero mass is identical.
    pub equal_holders: Option<Vec<NodeId>>,
    /// Messages sent during this round (after the snapshot).
    pub mass_unicasts: usize,
    pub broadcasts: usize,
    pub converged: bool,
}

/// Nodes whose nonzero mass is maximal in `(z, y)` order, ties included.
pub fn leading_mass_nodes(nodes: &[NodeState]) -> Vec<NodeId> {
    leading_indices(nodes)
        .into_iter()
        .map(NodeId::new)
        .collect()
}

/// Nodes holding nonzero mass, when all those masses are identical.
pub fn equal_mass_holders(nodes: &[NodeState]) -> Option<Vec<NodeId>> {
    let holders: Vec<usize> = (0..nodes.len())
        .filter(|&i| !nodes[i].mass.is_zero())
        .collect();
    let first = nodes[*holders.first()?].mass;
    holders
        .iter()
        .all(|&i| nodes[i].mass == first)
        .then(|| holders.into_iter().map(NodeId::new).collect())
}

/// Total mass on nodes plus mass unicasts still in flight equals the initial
/// total, and the counts sum to `n`. Broadcasts carry copies and are ignored.
pub fn check_mass_conservation(nodes: &[NodeState], in_flight: &[Message], avg: &Average) -> bool {
    let mut y: i128 = 0;
    let mut z: i128 = 0;
    for s in nodes {
        y += s.mass.y as i128;
        z += s.mass.z as i128;
    }
    for m in in_flight
        .iter()
        .filter(|m| m.kind == MessageKind::MassUnicast)
    {
        y += m.y as i128;
        z += m.z as i128;
    }
    y == avg.total as i128 && z == avg.count as i128
}

/// Smallest `k` such that every snapshot from `k` to the end is converged.
pub fn convergence_round(snapshots: &[Vec<NodeState>], avg: &Average) -> Option<usize> {
    let mut since = None;
    for (k, nodes) in snapshots.iter().enumerate() {
        if detect_convergence(nodes, avg) {
            since.get_or_insert(k);
        } else {
            since = None;
        }
    }
    since
}

/// The explicit step budget `(n - 1) n + (n - 1) m^2 + n` for the
/// deterministic protocols. `None` on overflow.
pub fn theoretical_bound(n: u64, m: u64) -> Option<u64> {
    let merge = n.checked_sub(1)?.checked_mul(n)?;
    let travel = n.checked_sub(1)?.checked_mul(m.checked_mul(m)?)?;
    merge.checked_add(travel)?.checked_add(n)
}

pub fn round_metrics(trace: &Trace) -> Vec<RoundMetrics> {
    trace
        .snapshots
        .iter()
        .enumerate()
        .map(|(k, nodes)| {
            let sent = if k < trace.termination.round {
                trace.messages_in_round(k)
            } else {
                &[]
            };
            RoundMetrics {
                round: k,
                active: nodes.iter().filter(|s| !s.mass.is_zero()).count(),
                leading: leading_mass_nodes(nodes),
                equal_holders: equal_mass_holders(nodes),
                mass_unicasts: sent
                    .iter()
                    .filter(|m| m.kind == MessageKind::MassUnicast)
                    .count(),
                broadcasts: sent
                    .iter()
                    .filter(|m| m.kind == MessageKind::StateBroadcast)
                    .count(),
                converged: detect_convergence(nodes, &trace.average),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{Mass, StatePair};

    fn holding(masses: &[(i64, u64)]) -> Vec<NodeState> {
        masses
            .iter()
            .map(|&(y, z)| NodeState {
                mass: Mass::new(y, z),
                state: StatePair::new(0, 1),
                rr_pointer: 0,
            })
            .collect()
    }

    fn labels(ids: &[NodeId]) -> Vec<usize> {
        ids.iter().map(|i| i.label()).collect()
    }

    #[test]
    fn leading_masses() {
        let k1 = holding(&[(4, 1), (0, 0), (7, 1), (11, 2)]);
        assert_eq!(labels(&leading_mass_nodes(&k1)), vec![4]);
        let tie = holding(&[(0, 0), (12, 2), (0, 0), (12, 2)]);
        assert_eq!(labels(&leading_mass_nodes(&tie)), vec![2, 4]);
        let single = holding(&[(5, 3), (0, 0), (0, 0)]);
        assert_eq!(labels(&leading_mass_nodes(&single)), vec![1]);
        assert!(leading_mass_nodes(&holding(&[(0, 0), (0, 0)])).is_empty());
        assert_eq!(
            equal_mass_holders(&tie).map(|h| labels(&h)),
            Some(vec![2, 4])
        );
        assert_eq!(equal_mass_holders(&k1), None);
    }

    #[test]
    fn leading_set_follows_relabeling() {
        let masses = [(3, 2), (9, 1), (3, 2), (-1, 2), (0, 0)];
        let base = labels(&leading_mass_nodes(&holding(&masses)));
        let perm = [4usize, 2, 0, 1, 3];
        let mut permuted = vec![(0, 0); masses.len()];
        for (i, &p) in perm.iter().enumerate() {
            permuted[p] = masses[i];
        }
        let mapped: Vec<usize> = {
            let mut v: Vec<usize> = base.iter().map(|l| perm[l - 1] + 1).collect();
            v.sort_unstable();
            v
        };
        assert_eq!(labels(&leading_mass_nodes(&holding(&permuted))), mapped);
    }

    #[test]
    fn conservation() {
        let avg = Average {
            total: 24,
            count: 4,
        };
        let nodes = holding(&[(3, 1), (9, 1), (3, 1), (9, 1)]);
        assert!(check_mass_conservation(&nodes, &[], &avg));
        let mut corrupt = nodes.clone();
        corrupt[0].mass.y += 1;
        assert!(!check_mass_conservation(&corrupt, &[], &avg));
        let ex2 = holding(&[(4, 1), (0, 0), (7, 1), (11, 2)]);
        assert!(check_mass_conservation(
            &ex2,
            &[],
            &Average {
                total: 22,
                count: 4
            }
        ));
        let in_flight = Message {
            kind: MessageKind::MassUnicast,
            sender: NodeId::new(1),
            receivers: vec![NodeId::new(2)],
            y: 9,
            z: 1,
            round: 0,
            deliver_round: 1,
        };
        let mut split = nodes.clone();
        split[1].mass = Mass::ZERO;
        assert!(check_mass_conservation(&split, &[in_flight], &avg));
    }

    #[test]
    fn bound_values() {
        assert_eq!(theoretical_bound(4, 6), Some(124));
        assert_eq!(theoretical_bound(2, 2), Some(8));
        assert_eq!(theoretical_bound(20, 20), Some(8000));
        assert_eq!(theoretical_bound(u64::MAX, u64::MAX), None);
    }
}
