mod spec;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use quantcons::analysis::Distribution;
use quantcons::golden::run_golden;
use quantcons::io::{
    read_summary, read_trace_record, write_messages_csv, write_plot_csv, write_summary,
    write_sweep_csv, write_trace_csv, RunSummary,
};
use quantcons::{
    check_invariants, run, sweep, Algorithm, Digraph, GraphSource, PriorityMap, PriorityPolicy,
    RunConfig, SweepTemplate, Termination, TraceRecord, ValueSource,
};

#[derive(Parser)]
#[command(
    name = "quantcons",
    version,
    about = "Quantized average consensus simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one run and write its trace, message log and summary.
    Run(RunArgs),
    /// Run one instance per seed and write the sweep table and plot data.
    Sweep(SweepArgs),
    /// Replay the two reference examples and diff them against their tables.
    Golden,
    /// Re-check every invariant on trace and message files from a prior run.
    Check(CheckArgs),
}

#[derive(Args)]
struct ProblemArgs {
    /// alg1 (randomized), alg2 (event-triggered) or alg3 (minimum-mass).
    #[arg(long = "alg", default_value = "alg3", value_parser = parse_algorithm)]
    algorithm: Algorithm,
    /// ring-directed:N, ring-undirected:N or random:N:P[:SEED].
    #[arg(long, conflicts_with = "graph_file")]
    graph: Option<String>,
    /// Graph file: a line `n m`, then `m` lines `receiver sender`.
    #[arg(long)]
    graph_file: Option<PathBuf>,
    /// Priority file with lines `node neighbor order`; default orders by node id.
    #[arg(long)]
    priorities: Option<PathBuf>,
    /// Comma-separated list, uniform:LO:HI[:SEED] or total:SUM:DEV[:SEED].
    #[arg(long, allow_hyphen_values = true, conflicts_with = "values_file")]
    values: Option<String>,
    /// File of whitespace- or comma-separated integers.
    #[arg(long)]
    values_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to ten times the deterministic round budget of the graph.
    #[arg(long)]
    max_rounds: Option<usize>,
    /// oracle-convergence, quiescence, round-cap or all.
    #[arg(long, default_value = "oracle-convergence", value_parser = parse_termination)]
    termination: Termination,
    #[arg(long, env = "QUANTCONS_OUT_DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Number of consecutive seeds, starting at --seed.
    #[arg(long, default_value_t = 100)]
    count: u64,
}

#[derive(Args)]
struct CheckArgs {
    /// Directory holding trace.csv, messages.csv and summary.json.
    dir: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    messages: Option<PathBuf>,
    /// Algorithm that produced the trace; read from summary.json if omitted.
    #[arg(long = "alg", value_parser = parse_algorithm)]
    algorithm: Option<Algorithm>,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    Algorithm::parse(s)
        .ok_or_else(|| format!("unknown algorithm {s:?}; expected alg1, alg2 or alg3"))
}

fn parse_termination(s: &str) -> Result<Termination, String> {
    Termination::parse(s).ok_or_else(|| {
        format!(
            "unknown termination {s:?}; expected oracle-convergence, quiescence, round-cap or all"
        )
    })
}

enum Failure {
    Validation(String),
    Check(String),
    Runtime(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Check(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Check(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<quantcons::Error> for Failure {
    fn from(e: quantcons::Error) -> Self {
        if e.is_runtime() {
            Failure::Runtime(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

type Outcome = Result<(), Failure>;

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<File, Failure> {
    File::open(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn prepare_out_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))
}

impl ProblemArgs {
    /// The graph source with any fixed graph already built.
    fn graph_source(&self, default: Option<&str>) -> Result<GraphSource, Failure> {
        if let Some(path) = &self.graph_file {
            return Ok(GraphSource::Fixed(Digraph::parse(&read_text(path)?)?));
        }
        let spec = self.graph.as_deref().or(default).ok_or_else(|| {
            Failure::Validation("one of --graph or --graph-file is required".into())
        })?;
        let (source, seed) = spec::parse_graph(spec).map_err(Failure::Validation)?;
        Ok(match seed {
            Some(seed) => GraphSource::Fixed(source.build(seed)?),
            None => source,
        })
    }

    fn value_source(&self, default: Option<&str>) -> Result<ValueSource, Failure> {
        if let Some(path) = &self.values_file {
            return Ok(ValueSource::Explicit(quantcons::io::parse_values(
                &read_text(path)?,
            )?));
        }
        let spec = self.values.as_deref().or(default).ok_or_else(|| {
            Failure::Validation("one of --values or --values-file is required".into())
        })?;
        spec::parse_values(spec).map_err(Failure::Validation)
    }

    fn priority_policy(&self, graph: Option<&Digraph>) -> Result<PriorityPolicy, Failure> {
        let Some(path) = &self.priorities else {
            return Ok(PriorityPolicy::ByNodeIndex);
        };
        if self.algorithm == Algorithm::Randomized {
            return Err(Failure::Validation(
                "--priorities applies to alg2 and alg3 only".into(),
            ));
        }
        let graph =
            graph.ok_or_else(|| Failure::Validation("--priorities needs a fixed graph".into()))?;
        let map = PriorityMap::parse(graph, &read_text(path)?)?;
        let list = graph
            .nodes()
            .flat_map(|j| {
                map.order(j)
                    .iter()
                    .enumerate()
                    .map(move |(pos, t)| (j.label(), t.label(), pos))
            })
            .collect();
        Ok(PriorityPolicy::FromList(list))
    }

    fn template(
        &self,
        graph_default: Option<&str>,
        values_default: Option<&str>,
    ) -> Result<SweepTemplate, Failure> {
        let graph = self.graph_source(graph_default)?;
        let fixed = match &graph {
            GraphSource::Fixed(g) => Some(g),
            _ => None,
        };
        let priorities = self.priority_policy(fixed)?;
        Ok(SweepTemplate {
            algorithm: self.algorithm,
            values: self.value_source(values_default)?,
            priorities,
            graph,
            max_rounds: self.max_rounds,
            termination: self.termination,
        })
    }
}

fn cmd_run(args: &RunArgs) -> Outcome {
    let p = &args.problem;
    let template = p.template(None, None)?;
    let graph = template.graph.build(p.seed)?;
    let values = template.values.values(graph.node_count(), p.seed)?;
    let mut cfg = RunConfig::new(p.algorithm, graph, values)?
        .with_seed(p.seed)
        .with_termination(p.termination);
    if p.algorithm != Algorithm::Randomized {
        let priorities = PriorityMap::assign(&cfg.graph, &template.priorities)?;
        cfg = cfg.with_priorities(priorities);
    }
    if let Some(cap) = p.max_rounds {
        cfg = cfg.with_max_rounds(cap);
    }
    let trace = run(&cfg)?;

    prepare_out_dir(&p.out)?;
    write_trace_csv(&trace, create(&p.out.join("trace.csv"))?)?;
    write_messages_csv(&trace, create(&p.out.join("messages.csv"))?)?;
    let summary = RunSummary::from(&trace);
    write_summary(&summary, create(&p.out.join("summary.json"))?)?;

    let k0 = summary
        .k0
        .map_or_else(|| "none".to_string(), |k| k.to_string());
    println!(
        "k0={k0} terminated_by={} rounds={} mass_msgs={} broadcast_msgs={}",
        summary.terminated_by,
        trace.termination.round,
        summary.total_mass_msgs,
        summary.total_broadcast_msgs
    );
    println!("wrote {}", p.out.display());
    Ok(())
}

fn describe(d: Option<Distribution>) -> String {
    d.map_or_else(
        || "n/a".to_string(),
        |d| {
            format!(
                "min {} median {} mean {:.3} max {}",
                d.min, d.median, d.mean, d.max
            )
        },
    )
}

fn cmd_sweep(args: &SweepArgs) -> Outcome {
    let p = &args.problem;
    if args.count == 0 {
        return Err(Failure::Validation("--count must be at least 1".into()));
    }
    let template = p.template(Some("random:20:0.1"), Some("uniform:-50:50"))?;
    let end = p
        .seed
        .checked_add(args.count)
        .ok_or_else(|| Failure::Validation("seed range overflows".into()))?;
    let seeds: Vec<u64> = (p.seed..end).collect();
    let outcome = sweep(&template, &seeds);

    prepare_out_dir(&p.out)?;
    write_sweep_csv(&outcome.rows, create(&p.out.join("sweep.csv"))?)?;
    write_plot_csv(&outcome.plot, create(&p.out.join("plot.csv"))?)?;

    let s = &outcome.summary;
    println!(
        "runs={} converged={} fraction_converged={}",
        s.runs, s.converged, s.fraction_converged
    );
    println!("k0: {}", describe(s.convergence_rounds));
    println!("messages: {}", describe(s.total_messages));
    println!("wrote {}", p.out.display());
    for (seed, e) in &outcome.failures {
        eprintln!("seed {seed}: {e}");
    }
    if outcome.failures.is_empty() {
        return Ok(());
    }
    let msg = format!("{} of {} runs failed", outcome.failures.len(), s.runs);
    if outcome.failures.iter().any(|(_, e)| e.is_runtime()) {
        Err(Failure::Runtime(msg))
    } else {
        Err(Failure::Validation(msg))
    }
}

fn cmd_golden() -> Outcome {
    let report = run_golden()?;
    for t in &report.tables {
        match &t.diff {
            None => println!("PASS example {} table k={}", t.example, t.round),
            Some(d) => println!("FAIL example {} table k={}: {d}", t.example, t.round),
        }
    }
    let late = report.example2_messages_from(4);
    println!(
        "example 1 k0={:?}; example 2 k0={:?}, messages from k=4: {late}",
        report.example1.termination.k0, report.example2.termination.k0
    );
    let mut problems = Vec::new();
    for (label, trace) in [
        ("example 1", &report.example1),
        ("example 2", &report.example2),
    ] {
        for v in check_invariants(&TraceRecord::from(trace)).failed() {
            problems.push(format!("{label}: invariant {} violated", v.name));
        }
    }
    let failed_tables = report.tables.iter().filter(|t| !t.passed()).count();
    if failed_tables > 0 {
        problems.push(format!(
            "{failed_tables} of {} tables differ",
            report.tables.len()
        ));
    }
    if late != 0 {
        problems.push(format!(
            "example 2 still transmits after k=4 ({late} messages)"
        ));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(problems.join("; ")))
    }
}

fn cmd_check(args: &CheckArgs) -> Outcome {
    let in_dir = |name: &str| args.dir.as_ref().map(|d| d.join(name));
    let trace_path = args
        .trace
        .clone()
        .or_else(|| in_dir("trace.csv"))
        .ok_or_else(|| {
            Failure::Validation("give a run directory or --trace and --messages".into())
        })?;
    let messages_path = args
        .messages
        .clone()
        .or_else(|| in_dir("messages.csv"))
        .ok_or_else(|| {
            Failure::Validation("give a run directory or --trace and --messages".into())
        })?;
    let algorithm = match args.algorithm {
        Some(a) => a,
        None => {
            let path = in_dir("summary.json").ok_or_else(|| {
                Failure::Validation("--alg is required without a run directory".into())
            })?;
            let summary = read_summary(open(&path)?)?;
            parse_algorithm(&summary.algorithm).map_err(Failure::Validation)?
        }
    };
    let record = read_trace_record(algorithm, open(&trace_path)?, open(&messages_path)?)?;
    let report = check_invariants(&record);
    for v in &report.verdicts {
        if v.passed() {
            println!("PASS {}", v.name);
            continue;
        }
        println!("FAIL {} ({} violations)", v.name, v.violations.len());
        for viol in v.violations.iter().take(10) {
            let node = viol
                .node
                .map_or_else(String::new, |n| format!(" node v{n}"));
            println!("  round {}{node}: {}", viol.round, viol.detail);
        }
    }
    let failed: Vec<&str> = report.failed().map(|v| v.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("violated: {}", failed.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Golden => cmd_golden(),
        Command::Check(args) => cmd_check(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
