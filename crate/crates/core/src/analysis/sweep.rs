//! Seed sweeps: many independent runs, aggregated per seed and per round.

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::engine::{
    stop_reason, Algorithm, MessageKind, RunConfig, Simulation, TerminatedBy, Termination,
};
use crate::error::{Error, Result};
use crate::graph::{GraphSource, PriorityMap, PriorityPolicy};
use crate::protocol::NodeState;

/// Initial values for a run. Sources without a fixed seed draw from the
/// per-run seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValueSource {
    Explicit(Vec<i64>),
    /// Independent uniform draws in `lo..=hi`.
    Uniform {
        lo: i64,
        hi: i64,
        seed: Option<u64>,
    },
    /// Values summing to exactly `total`: an even split followed by `n`
    /// random zero-sum transfers of at most `deviation`.
    Total {
        total: i64,
        deviation: i64,
        seed: Option<u64>,
    },
}

impl ValueSource {
    pub fn values(&self, n: usize, run_seed: u64) -> Result<Vec<i64>> {
        match self {
            ValueSource::Explicit(v) => {
                if v.len() != n {
                    return Err(Error::ValueCount {
                        expected: n,
                        got: v.len(),
                    });
                }
                Ok(v.clone())
            }
            ValueSource::Uniform { lo, hi, seed } => {
                if lo > hi {
                    return Err(Error::Config(format!("empty value range {lo}..={hi}")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(run_seed));
                Ok((0..n).map(|_| rng.gen_range(*lo..=*hi)).collect())
            }
            ValueSource::Total {
                total,
                deviation,
                seed,
            } => {
                if *deviation < 0 || n == 0 {
                    return Err(Error::Config("deviation must be non-negative".into()));
                }
                let count = n as i64;
                let (base, extra) = (total.div_euclid(count), total.rem_euclid(count));
                let mut v: Vec<i64> = (0..count).map(|i| base + i64::from(i < extra)).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(run_seed));
                for _ in 0..n {
                    let a = rng.gen_range(0..n);
                    let b = rng.gen_range(0..n);
                    let d = rng.gen_range(0..=*deviation);
                    v[a] += d;
                    v[b] -= d;
                }
                Ok(v)
            }
        }
    }
}

/// Everything needed to instantiate one run per seed.
#[derive(Debug, Clone)]
pub struct SweepTemplate {
    pub algorithm: Algorithm,
    pub graph: GraphSource,
    pub values: ValueSource,
    pub priorities: PriorityPolicy,
    /// `None` uses the default cap of the instance graph.
    pub max_rounds: Option<usize>,
    pub termination: Termination,
}

impl SweepTemplate {
    pub fn new(algorithm: Algorithm, graph: GraphSource, values: ValueSource) -> Self {
        SweepTemplate {
            algorithm,
            graph,
            values,
            priorities: PriorityPolicy::ByNodeIndex,
            max_rounds: None,
            termination: Termination::Convergence,
        }
    }

    /// Builds the run for `seed`. The graph, the values and the protocol RNG
    /// each get their own stream derived from `seed`.
    pub fn instantiate(&self, seed: u64) -> Result<RunConfig> {
        let mut streams = ChaCha8Rng::seed_from_u64(seed);
        let graph_seed = streams.next_u64();
        let value_seed = streams.next_u64();
        let protocol_seed = streams.next_u64();
        let graph = self.graph.build(graph_seed)?;
        let values = self.values.values(graph.node_count(), value_seed)?;
        let priorities = match self.algorithm {
            Algorithm::Randomized => None,
            _ => Some(PriorityMap::assign(&graph, &self.priorities)?),
        };
        let mut cfg = RunConfig::new(self.algorithm, graph, values)?
            .with_seed(protocol_seed)
            .with_termination(self.termination);
        if let Some(p) = priorities {
            cfg = cfg.with_priorities(p);
        }
        if let Some(cap) = self.max_rounds {
            cfg = cfg.with_max_rounds(cap);
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepRow {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub k0: Option<usize>,
    pub terminated_by: TerminatedBy,
    /// Index of the last snapshot.
    pub rounds: usize,
    pub mass_msgs: usize,
    pub broadcast_msgs: usize,
    pub final_snapshot: Vec<NodeState>,
}

/// min / median / mean / max of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distribution {
    pub min: f64,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
}

impl Distribution {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            (sorted[mid - 1] + sorted[mid]) / 2.0
        };
        Some(Distribution {
            min: sorted[0],
            median,
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            max: sorted[sorted.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub runs: usize,
    pub converged: usize,
    /// Converged runs over all runs, errored runs included.
    pub fraction_converged: f64,
    pub convergence_rounds: Option<Distribution>,
    pub total_messages: Option<Distribution>,
}

/// Aggregate state spread across runs at one round. Runs that stopped
/// earlier contribute their final snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub round: usize,
    pub mean_spread: f64,
    pub max_spread: f64,
    pub frac_converged: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<(u64, Error)>,
    pub summary: SweepSummary,
    pub plot: Vec<PlotRow>,
}

struct RunSeries {
    row: SweepRow,
    spreads: Vec<Ratio<i128>>,
    converged: Vec<bool>,
}

/// `max q^s - min q^s`, exact.
fn spread(nodes: &[NodeState]) -> Ratio<i128> {
    let ratio = |s: &NodeState| Ratio::new(s.state.y() as i128, s.state.z() as i128);
    let mut it = nodes.iter().map(ratio);
    let first = it.next().expect("non-empty network");
    let (lo, hi) = it.fold((first, first), |(lo, hi), q| (lo.min(q), hi.max(q)));
    hi - lo
}

fn run_series(template: &SweepTemplate, seed: u64) -> Result<RunSeries> {
    let cfg = template.instantiate(seed)?;
    let mut sim = Simulation::new(&cfg)?;
    let n = cfg.graph.node_count();
    let mut spreads = vec![spread(sim.nodes())];
    let mut converged = vec![sim.is_converged()];
    let (mut mass_msgs, mut broadcast_msgs) = (0usize, 0usize);
    for m in sim.initial_messages() {
        match m.kind {
            MessageKind::MassUnicast => mass_msgs += 1,
            MessageKind::StateBroadcast => broadcast_msgs += 1,
        }
    }
    let mut quiet = 0usize;
    let terminated_by = loop {
        if let Some(reason) = stop_reason(&sim, quiet, n) {
            break reason;
        }
        if sim.round() >= cfg.max_rounds {
            break TerminatedBy::RoundCap;
        }
        let sent = sim.step()?;
        quiet = if sent.is_empty() { quiet + 1 } else { 0 };
        for m in &sent {
            match m.kind {
                MessageKind::MassUnicast => mass_msgs += 1,
                MessageKind::StateBroadcast => broadcast_msgs += 1,
            }
        }
        spreads.push(spread(sim.nodes()));
        converged.push(sim.is_converged());
    };
    let k0 = converged
        .iter()
        .rposition(|c| !c)
        .map_or(Some(0), |last_bad| {
            (last_bad + 1 < converged.len()).then_some(last_bad + 1)
        });
    Ok(RunSeries {
        row: SweepRow {
            seed,
            n,
            m: cfg.graph.edge_count(),
            k0,
            terminated_by,
            rounds: sim.round(),
            mass_msgs,
            broadcast_msgs,
            final_snapshot: sim.nodes().to_vec(),
        },
        spreads,
        converged,
    })
}

/// Runs the template once per seed (in parallel) and aggregates in seed
/// order, so the outcome does not depend on scheduling.
pub fn sweep(template: &SweepTemplate, seeds: &[u64]) -> SweepOutcome {
    let results: Vec<(u64, Result<RunSeries>)> = seeds
        .par_iter()
        .map(|&seed| (seed, run_series(template, seed)))
        .collect();

    let mut series = Vec::new();
    let mut failures = Vec::new();
    for (seed, result) in results {
        match result {
            Ok(s) => series.push(s),
            Err(e) => failures.push((seed, e)),
        }
    }

    let runs = seeds.len();
    let k0s: Vec<f64> = series
        .iter()
        .filter_map(|s| s.row.k0)
        .map(|k| k as f64)
        .collect();
    let totals: Vec<f64> = series
        .iter()
        .map(|s| (s.row.mass_msgs + s.row.broadcast_msgs) as f64)
        .collect();
    let summary = SweepSummary {
        runs,
        converged: k0s.len(),
        fraction_converged: if runs == 0 {
            0.0
        } else {
            k0s.len() as f64 / runs as f64
        },
        convergence_rounds: Distribution::of(&k0s),
        total_messages: Distribution::of(&totals),
    };
    let plot = plot_rows(&series);
    SweepOutcome {
        rows: series.into_iter().map(|s| s.row).collect(),
        failures,
        summary,
        plot,
    }
}

fn plot_rows(series: &[RunSeries]) -> Vec<PlotRow> {
    let Some(len) = series.iter().map(|s| s.spreads.len()).max() else {
        return Vec::new();
    };
    let runs = series.len();
    (0..len)
        .map(|k| {
            let mut sum = BigRational::zero();
            let mut max = Ratio::<i128>::zero();
            let mut converged = 0usize;
            for s in series {
                let at = k.min(s.spreads.len() - 1);
                let q = s.spreads[at];
                if !q.is_zero() {
                    sum += BigRational::new(BigInt::from(*q.numer()), BigInt::from(*q.denom()));
                    max = max.max(q);
                }
                converged += usize::from(s.converged[at]);
            }
            let mean = sum / BigRational::from_integer(BigInt::from(runs));
            PlotRow {
                round: k,
                mean_spread: mean.to_f64().unwrap_or(f64::NAN),
                max_spread: max.to_f64().unwrap_or(f64::NAN),
                frac_converged: converged as f64 / runs as f64,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Digraph;

    #[test]
    fn total_values_hit_the_target_sum() {
        for seed in 0..20 {
            let v = ValueSource::Total {
                total: 500,
                deviation: 30,
                seed: None,
            }
            .values(20, seed)
            .unwrap();
            assert_eq!(v.iter().sum::<i64>(), 500);
        }
        let v = ValueSource::Total {
            total: -7,
            deviation: 0,
            seed: Some(1),
        }
        .values(3, 0)
        .unwrap();
        assert_eq!(v.iter().sum::<i64>(), -7);
        assert!(v.iter().max().unwrap() - v.iter().min().unwrap() <= 1);
    }

    #[test]
    fn uniform_values_respect_bounds() {
        let v = ValueSource::Uniform {
            lo: -50,
            hi: 50,
            seed: None,
        }
        .values(200, 3)
        .unwrap();
        assert!(v.iter().all(|x| (-50..=50).contains(x)));
        assert!(ValueSource::Uniform {
            lo: 2,
            hi: 1,
            seed: None
        }
        .values(3, 0)
        .is_err());
        assert!(ValueSource::Explicit(vec![1, 2]).values(3, 0).is_err());
    }

    #[test]
    fn single_seed_summary_degenerates() {
        let template = SweepTemplate::new(
            Algorithm::MinimumMass,
            GraphSource::RingDirected(6),
            ValueSource::Explicit(vec![1, 5, 2, 8, 3, 5]),
        );
        let out = sweep(&template, &[42]);
        assert_eq!(out.rows.len(), 1);
        let k0 = out.rows[0].k0.unwrap() as f64;
        let d = out.summary.convergence_rounds.unwrap();
        assert_eq!((d.min, d.median, d.mean, d.max), (k0, k0, k0, k0));
        assert_eq!(out.summary.fraction_converged, 1.0);
        let last = out.plot.last().unwrap();
        assert_eq!(last.max_spread, 0.0);
        assert_eq!(last.frac_converged, 1.0);
    }

    #[test]
    fn sweep_is_deterministic_and_ordered() {
        let template = SweepTemplate::new(
            Algorithm::Randomized,
            GraphSource::Random {
                n: 8,
                extra_edge_prob: 0.2,
            },
            ValueSource::Uniform {
                lo: 0,
                hi: 20,
                seed: None,
            },
        );
        let seeds: Vec<u64> = (10..18).collect();
        let a = sweep(&template, &seeds);
        let b = sweep(&template, &seeds);
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.plot, b.plot);
        let order: Vec<u64> = a.rows.iter().map(|r| r.seed).collect();
        assert_eq!(order, seeds);
    }

    #[test]
    fn failures_are_collected_per_seed() {
        let template = SweepTemplate::new(
            Algorithm::EventTriggered,
            GraphSource::Fixed(Digraph::ring_directed(4).unwrap()),
            ValueSource::Explicit(vec![1, 2, 3]),
        );
        let out = sweep(&template, &[1, 2]);
        assert!(out.rows.is_empty());
        assert_eq!(out.failures.len(), 2);
        assert_eq!(out.summary.fraction_converged, 0.0);
    }
}
