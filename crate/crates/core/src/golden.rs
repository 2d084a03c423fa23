//! Reference runs with hand-checked mass and state tables.
//!
//! Example 1: event-triggered protocol on the directed ring `1 -> 2 -> 3 -> 4 -> 1`
//! with values `[9, 3, 9, 3]`, tables for `k = 0..=3`.
//! Example 2: minimum-mass protocol on a six-edge digraph with explicit
//! priorities and values `[2, 4, 7, 9]`, tables for `k = 0..=4`.

use crate::engine::{run, Algorithm, RunConfig, Termination, Trace};
use crate::error::Result;
use crate::graph::{Digraph, PriorityMap};

pub const EXAMPLE1_GRAPH: &str = include_str!("../data/example1.graph");
pub const EXAMPLE2_GRAPH: &str = include_str!("../data/example2.graph");
pub const EXAMPLE2_PRIORITIES: &str = include_str!("../data/example2.prio");

/// Rounds replayed past the last table to confirm the tail behavior.
pub const EXTRA_ROUNDS: usize = 20;

/// Expected `(y, z, ys, zs)` of every node at one snapshot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub example: usize,
    pub round: usize,
    pub cells: Vec<[i64; 4]>,
}

pub const FIELDS: [&str; 4] = ["y", "z", "ys", "zs"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellDiff {
    pub round: usize,
    /// One-based.
    pub node: usize,
    pub field: &'static str,
    pub expected: i64,
    /// `None` when the trace has no such snapshot or node.
    pub actual: Option<i64>,
}

impl std::fmt::Display for CellDiff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let actual = self
            .actual
            .map_or_else(|| "missing".to_string(), |a| a.to_string());
        write!(
            f,
            "round {} node v{} field {}: expected {}, got {}",
            self.round, self.node, self.field, self.expected, actual
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableResult {
    pub example: usize,
    pub round: usize,
    /// First mismatching cell, in node then field order.
    pub diff: Option<CellDiff>,
}

impl TableResult {
    pub fn passed(&self) -> bool {
        self.diff.is_none()
    }
}

fn table(example: usize, round: usize, rows: [(i64, i64, i64, i64); 4]) -> Table {
    Table {
        example,
        round,
        cells: rows.iter().map(|&(y, z, ys, zs)| [y, z, ys, zs]).collect(),
    }
}

pub fn example1_tables() -> Vec<Table> {
    vec![
        table(
            1,
            0,
            [(9, 1, 9, 1), (3, 1, 3, 1), (9, 1, 9, 1), (3, 1, 3, 1)],
        ),
        table(
            1,
            1,
            [(3, 1, 9, 1), (9, 1, 9, 1), (3, 1, 9, 1), (9, 1, 9, 1)],
        ),
        table(
            1,
            2,
            [(12, 2, 12, 2), (0, 0, 9, 1), (12, 2, 12, 2), (0, 0, 9, 1)],
        ),
        table(
            1,
            3,
            [(0, 0, 12, 2), (12, 2, 12, 2), (0, 0, 12, 2), (12, 2, 12, 2)],
        ),
    ]
}

pub fn example2_tables() -> Vec<Table> {
    vec![
        table(
            2,
            0,
            [(2, 1, 2, 1), (4, 1, 4, 1), (7, 1, 7, 1), (9, 1, 9, 1)],
        ),
        table(
            2,
            1,
            [(4, 1, 7, 1), (0, 0, 9, 1), (7, 1, 7, 1), (11, 2, 11, 2)],
        ),
        table(
            2,
            2,
            [(0, 0, 9, 1), (0, 0, 9, 1), (11, 2, 11, 2), (11, 2, 11, 2)],
        ),
        table(
            2,
            3,
            [(0, 0, 9, 1), (0, 0, 11, 2), (11, 2, 11, 2), (11, 2, 11, 2)],
        ),
        table(
            2,
            4,
            [(0, 0, 11, 2), (0, 0, 11, 2), (11, 2, 11, 2), (11, 2, 11, 2)],
        ),
    ]
}

pub fn example1_config() -> Result<RunConfig> {
    RunConfig::new(
        Algorithm::EventTriggered,
        Digraph::parse(EXAMPLE1_GRAPH)?,
        vec![9, 3, 9, 3],
    )
}

pub fn example2_config() -> Result<RunConfig> {
    let graph = Digraph::parse(EXAMPLE2_GRAPH)?;
    let priorities = PriorityMap::parse(&graph, EXAMPLE2_PRIORITIES)?;
    Ok(
        RunConfig::new(Algorithm::MinimumMass, graph, vec![2, 4, 7, 9])?
            .with_priorities(priorities),
    )
}

/// Compares every cell of `tables` against the snapshots of `trace`.
pub fn compare_tables(trace: &Trace, tables: &[Table]) -> Vec<TableResult> {
    tables
        .iter()
        .map(|t| TableResult {
            example: t.example,
            round: t.round,
            diff: first_diff(trace, t),
        })
        .collect()
}

fn first_diff(trace: &Trace, t: &Table) -> Option<CellDiff> {
    let snapshot = trace.snapshots.get(t.round);
    for (i, expected) in t.cells.iter().enumerate() {
        let actual = snapshot
            .and_then(|s| s.get(i))
            .map(|s| [s.mass.y, s.mass.z as i64, s.state.y(), s.state.z() as i64]);
        for f in 0..4 {
            let got = actual.map(|a| a[f]);
            if got != Some(expected[f]) {
                return Some(CellDiff {
                    round: t.round,
                    node: i + 1,
                    field: FIELDS[f],
                    expected: expected[f],
                    actual: got,
                });
            }
        }
    }
    if snapshot.is_some_and(|s| s.len() != t.cells.len()) {
        return Some(CellDiff {
            round: t.round,
            node: t.cells.len() + 1,
            field: FIELDS[0],
            expected: 0,
            actual: None,
        });
    }
    None
}

/// Outcome of replaying both examples.
#[derive(Debug, Clone)]
pub struct GoldenReport {
    pub tables: Vec<TableResult>,
    pub example1: Trace,
    pub example2: Trace,
}

impl GoldenReport {
    pub fn all_tables_pass(&self) -> bool {
        self.tables.iter().all(TableResult::passed)
    }

    /// Messages of either kind sent in rounds at or after `round` of Example 2.
    pub fn example2_messages_from(&self, round: usize) -> usize {
        self.example2
            .messages
            .iter()
            .filter(|m| m.round >= round)
            .count()
    }
}

/// Replays both examples for [`EXTRA_ROUNDS`] past their last table and
/// diffs them against `tables1` and `tables2`.
pub fn run_golden_with(tables1: &[Table], tables2: &[Table]) -> Result<GoldenReport> {
    let replay = |cfg: RunConfig, tables: &[Table]| {
        let last = tables.iter().map(|t| t.round).max().unwrap_or(0);
        run(&cfg
            .with_termination(Termination::RoundCap)
            .with_max_rounds(last + EXTRA_ROUNDS))
    };
    let example1 = replay(example1_config()?, tables1)?;
    let example2 = replay(example2_config()?, tables2)?;
    let mut tables = compare_tables(&example1, tables1);
    tables.extend(compare_tables(&example2, tables2));
    Ok(GoldenReport {
        tables,
        example1,
        example2,
    })
}

pub fn run_golden() -> Result<GoldenReport> {
    run_golden_with(&example1_tables(), &example2_tables())
}
