//! Offline invariant checks.
//!
//! The checks run on [`TraceRecord`], a flat integer view that can come from
//! an in-memory [`Trace`] or be read back from CSV files. Values are kept
//! signed so that corrupted files are reported rather than rejected at parse
//! time.

use std::cmp::Ordering;

use crate::engine::{Algorithm, MessageKind, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRecord {
    pub y: i64,
    pub z: i64,
    pub ys: i64,
    pub zs: i64,
}

impl NodeRecord {
    fn mass_key(&self) -> (i64, i64) {
        (self.z, self.y)
    }

    fn state_key(&self) -> (i64, i64) {
        (self.zs, self.ys)
    }
}

/// One delivery: broadcasts appear once per receiver. Node ids are one-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageRecord {
    pub round: usize,
    pub kind: MessageKind,
    pub sender: usize,
    pub receiver: usize,
    pub y: i64,
    pub z: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub algorithm: Algorithm,
    /// `rounds[k][i]` is node `i + 1` at snapshot `k`.
    pub rounds: Vec<Vec<NodeRecord>>,
    /// Sorted by round.
    pub messages: Vec<MessageRecord>,
}

impl From<&Trace> for TraceRecord {
    fn from(trace: &Trace) -> Self {
        let rounds = trace
            .snapshots
            .iter()
            .map(|nodes| {
                nodes
                    .iter()
                    .map(|s| NodeRecord {
                        y: s.mass.y,
                        z: s.mass.z as i64,
                        ys: s.state.y(),
                        zs: s.state.z() as i64,
                    })
                    .collect()
            })
            .collect();
        let messages = trace
            .messages
            .iter()
            .flat_map(|m| {
                m.receivers.iter().map(move |r| MessageRecord {
                    round: m.round,
                    kind: m.kind,
                    sender: m.sender.label(),
                    receiver: r.label(),
                    y: m.y,
                    z: m.z as i64,
                })
            })
            .collect();
        TraceRecord {
            algorithm: trace.algorithm,
            rounds,
            messages,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub round: usize,
    /// One-based node label, when the violation is tied to a node.
    pub node: Option<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub name: &'static str,
    pub violations: Vec<Violation>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantReport {
    pub verdicts: Vec<Verdict>,
}

impl InvariantReport {
    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(Verdict::passed)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.passed())
    }
}

pub const NONNEGATIVITY: &str = "nonnegativity";
pub const CONSERVATION: &str = "mass-conservation";
pub const REPLAY: &str = "mass-replay";
pub const ACTIVE_SET: &str = "active-set-non-increasing";
pub const STATE_MONOTONE: &str = "state-monotone";
pub const LEADING_TRANSMITS: &str = "leading-mass-transmits";
pub const LEADING_RETAINED: &str = "leading-mass-retained";
pub const STATE_DOMINANCE: &str = "state-dominance";
pub const QUIESCENCE: &str = "quiescence-persists";

/// Runs every invariant that applies to the record's algorithm.
pub fn check_invariants(record: &TraceRecord) -> InvariantReport {
    let mut verdicts = vec![
        nonnegativity(record),
        conservation(record),
        replay(record),
        active_set(record),
        state_monotone(record),
    ];
    match record.algorithm {
        Algorithm::Randomized => {}
        Algorithm::EventTriggered => verdicts.push(leading_transmits(record)),
        Algorithm::MinimumMass => {
            verdicts.push(leading_retained(record));
            verdicts.push(state_dominance(record));
            verdicts.push(quiescence(record));
        }
    }
    InvariantReport { verdicts }
}

fn verdict(name: &'static str, violations: Vec<Violation>) -> Verdict {
    Verdict { name, violations }
}

fn at(round: usize, node: usize, detail: String) -> Violation {
    Violation {
        round,
        node: Some(node + 1),
        detail,
    }
}

fn nonnegativity(record: &TraceRecord) -> Verdict {
    let mut out = Vec::new();
    for (k, nodes) in record.rounds.iter().enumerate() {
        for (i, r) in nodes.iter().enumerate() {
            if r.z < 0 {
                out.push(at(k, i, format!("z = {}", r.z)));
            } else if r.z == 0 && r.y != 0 {
                out.push(at(k, i, format!("zero count carries y = {}", r.y)));
            }
            if r.zs < 1 {
                out.push(at(k, i, format!("z^s = {}", r.zs)));
            }
        }
    }
    verdict(NONNEGATIVITY, out)
}

fn conservation(record: &TraceRecord) -> Verdict {
    let mut out = Vec::new();
    let Some(first) = record.rounds.first() else {
        return verdict(CONSERVATION, out);
    };
    // initial values survive untouched in the round-0 states
    let total: i128 = first.iter().map(|r| r.ys as i128).sum();
    let n = first.len() as i128;
    for (k, nodes) in record.rounds.iter().enumerate() {
        let y: i128 = nodes.iter().map(|r| r.y as i128).sum();
        let z: i128 = nodes.iter().map(|r| r.z as i128).sum();
        if nodes.len() as i128 != n {
            out.push(Violation {
                round: k,
                node: None,
                detail: format!("{} nodes, expected {n}", nodes.len()),
            });
        } else if y != total || z != n {
            out.push(Violation {
                round: k,
                node: None,
                detail: format!("sum y = {y}, sum z = {z}; expected {total} and {n}"),
            });
        }
    }
    verdict(CONSERVATION, out)
}

fn mass_messages(record: &TraceRecord, round: usize) -> impl Iterator<Item = &MessageRecord> {
    let lo = record.messages.partition_point(|m| m.round < round);
    let hi = record.messages.partition_point(|m| m.round <= round);
    record.messages[lo..hi]
        .iter()
        .filter(|m| m.kind == MessageKind::MassUnicast)
}

fn round_is_silent(record: &TraceRecord, round: usize) -> bool {
    let lo = record.messages.partition_point(|m| m.round < round);
    record.messages.get(lo).is_none_or(|m| m.round != round)
}

fn replay(record: &TraceRecord) -> Verdict {
    let mut out = Vec::new();
    for k in 0..record.rounds.len().saturating_sub(1) {
        let before = &record.rounds[k];
        let after = &record.rounds[k + 1];
        let n = before.len();
        let mut expected: Vec<(i64, i64)> = before.iter().map(|r| (r.y, r.z)).collect();
        let mut broken = false;
        for m in mass_messages(record, k) {
            let (s, r) = (m.sender.wrapping_sub(1), m.receiver.wrapping_sub(1));
            if s >= n || r >= n {
                out.push(Violation {
                    round: k,
                    node: None,
                    detail: format!(
                        "message endpoint out of range: {} -> {}",
                        m.sender, m.receiver
                    ),
                });
                broken = true;
                continue;
            }
            if (before[s].y, before[s].z) != (m.y, m.z) {
                out.push(at(
                    k,
                    s,
                    format!(
                        "sent ({}, {}) while holding ({}, {})",
                        m.y, m.z, before[s].y, before[s].z
                    ),
                ));
            }
            expected[s] = (0, 0);
        }
        if broken {
            continue;
        }
        for m in mass_messages(record, k) {
            let r = m.receiver - 1;
            expected[r] = (
                expected[r].0.saturating_add(m.y),
                expected[r].1.saturating_add(m.z),
            );
        }
        for (i, (exp, got)) in expected.iter().zip(after).enumerate() {
            if *exp != (got.y, got.z) {
                out.push(at(
                    k + 1,
                    i,
                    format!(
                        "replay gives ({}, {}), snapshot has ({}, {})",
                        exp.0, exp.1, got.y, got.z
                    ),
                ));
            }
        }
    }
    verdict(REPLAY, out)
}

fn active_set(record: &TraceRecord) -> Verdict {
    let mut out = Vec::new();
    let mut previous: Option<usize> = None;
    for (k, nodes) in record.rounds.iter().enumerate() {
        let active = nodes.iter().filter(|r| r.z > 0).count();
        if active == 0 {
            out.push(Violation {
                round: k,
                node: None,
                detail: "no node holds mass".into(),
            });
        }
        if let Some(p) = previous {
            if active > p {
                out.push(Violation {
                    round: k,
                    node: None,
                    detail: format!("active set grew from {p} to {active}"),
                });
            }
        }
        previous = Some(active);
    }
    verdict(ACTIVE_SET, out)
}

fn state_monotone(record: &TraceRecord) -> Verdict {
    let mut out = Vec::new();
    for (k, pair) in record.rounds.windows(2).enumerate() {
        for (i, (a, b)) in pair[0].iter().zip(&pair[1]).enumerate() {
            let decreased = match record.algorithm {
                Algorithm::Randomized => b.zs < a.zs,
                _ => b.state_key() < a.state_key(),
            };
            if decreased {
                out.push(at(
                    k + 1,
                    i,
                    format!("state ({}, {}) fell to ({}, {})", a.ys, a.zs, b.ys, b.zs),
                ));
            }
        }
    }
    verdict(STATE_MONOTONE, out)
}

fn leading(nodes: &[NodeRecord]) -> Vec<usize> {
    let Some(best) = nodes
        .iter()
        .filter(|r| r.z > 0)
        .map(NodeRecord::mass_key)
        .max()
    else {
        return Vec::new();
    };
    (0..nodes.len())
        .filter(|&i| nodes[i].z > 0 && nodes[i].mass_key() == best)
        .collect()
}

fn leading_transmits(record: &TraceRecord) -> Verdict {
    let mut out = Vec::new();
    let last = record.rounds.len().saturating_sub(1);
    for (k, nodes) in record.rounds.iter().enumerate() {
        for i in leading(nodes) {
            if nodes[i].state_key() != nodes[i].mass_key() {
                out.push(at(k, i, "leading mass did not fire the trigger".into()));
            }
            if k < last && !mass_messages(record, k).any(|m| m.sender == i + 1) {
                out.push(at(k, i, "leading mass was not forwarded".into()));
            }
        }
    }
    verdict(LEADING_TRANSMITS, out)
}

fn leading_retained(record: &TraceRecord) -> Verdict {
    let mut out = Vec::new();
    let last = record.rounds.len().saturating_sub(1);
    for (k, nodes) in record.rounds.iter().enumerate().take(last) {
        for i in leading(nodes) {
            if mass_messages(record, k).any(|m| m.sender == i + 1) {
                out.push(at(k, i, "leading mass was forwarded".into()));
            }
        }
    }
    verdict(LEADING_RETAINED, out)
}

fn state_dominance(record: &TraceRecord) -> Verdict {
    let mut out = Vec::new();
    for (k, nodes) in record.rounds.iter().enumerate() {
        let Some(&j) = leading(nodes).first() else {
            continue;
        };
        let top = nodes[j].mass_key();
        for (i, r) in nodes.iter().enumerate() {
            if r.state_key().cmp(&top) == Ordering::Greater {
                out.push(at(
                    k,
                    i,
                    format!(
                        "state ({}, {}) above leading mass ({}, {})",
                        r.ys, r.zs, top.1, top.0
                    ),
                ));
            }
        }
    }
    verdict(STATE_DOMINANCE, out)
}

fn quiescence(record: &TraceRecord) -> Verdict {
    let mut out = Vec::new();
    let Some(first) = record.rounds.first() else {
        return verdict(QUIESCENCE, out);
    };
    let total: i128 = first.iter().map(|r| r.ys as i128).sum();
    let n = first.len() as i128;
    let converged = |nodes: &[NodeRecord]| {
        nodes
            .iter()
            .all(|r| r.ys as i128 * n == r.zs as i128 * total)
    };
    let last = record.rounds.len().saturating_sub(1);
    let start = (0..last).find(|&k| converged(&record.rounds[k]) && round_is_silent(record, k));
    if let Some(start) = start {
        for k in start + 1..last {
            if !round_is_silent(record, k) {
                out.push(Violation {
                    round: k,
                    node: None,
                    detail: format!("messages sent after silence began in round {start}"),
                });
            }
        }
    }
    verdict(QUIESCENCE, out)
}
