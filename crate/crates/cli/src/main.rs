use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use edgedel::divergence::score_edges;
use edgedel::harness::{
    load_network, run_experiment_with, run_pipeline, DeletionRequest, ExperimentSpec, PipelineConfig, PipelineResult,
    NetworkSource, Rankings, Selection,
};
use edgedel::synth::SyntheticCptLaw;
use edgedel::map::default_map_vars;
use edgedel::netio::{self, format_float, write_report, PlanLine, ReportRow};
use edgedel::par::Exec;
use edgedel::param::{IterationConfig, Method};
use edgedel::{Error, Evidence, Network, VarId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_CAPACITY: u8 = 4;

#[derive(Parser)]
#[command(name = "edgedel", version, about = "Approximate inference in Bayesian networks by deleting edges")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank every edge by the divergence of deleting it alone.
    Score { network: PathBuf, evidence: PathBuf },
    /// Delete edges, search the edge parameters, and print marginals.
    Approx(ApproxArgs),
    /// MAP on the approximate network, compared with the exact MAP value.
    Map {
        #[command(flatten)]
        approx: ApproxArgs,
        /// Comma-separated MAP variables (default: unobserved roots).
        #[arg(long, value_delimiter = ',')]
        map_vars: Option<Vec<String>>,
    },
    /// Run an experiment spec and write a CSV report.
    Experiment {
        spec: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Run instances one at a time.
        #[arg(long)]
        sequential: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    EdBp,
    EdKl,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectArg {
    Rand,
    Guided,
    Mi,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::EdBp => Method::EdBp,
            MethodArg::EdKl => Method::EdKl,
        }
    }
}

impl From<SelectArg> for Selection {
    fn from(s: SelectArg) -> Self {
        match s {
            SelectArg::Rand => Selection::Rand,
            SelectArg::Guided => Selection::Guided,
            SelectArg::Mi => Selection::Mi,
        }
    }
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("deletion").required(true).args(["delete", "edges", "target_width"])))]
struct ApproxArgs {
    network: PathBuf,
    evidence: PathBuf,
    #[arg(long, value_enum, default_value = "ed-kl")]
    method: MethodArg,
    #[arg(long = "select", value_enum, default_value = "guided")]
    selection: SelectArg,
    /// Number of edges to delete.
    #[arg(long)]
    delete: Option<usize>,
    /// Plan file listing the edges (and optionally their parameters).
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Delete ranked edges until the constrained width is at most this.
    #[arg(long)]
    target_width: Option<usize>,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 0.0)]
    damping: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Start from the single-edge scored parameters.
    #[arg(long)]
    warm_start: bool,
    /// Write the final plan, with parameters, to this file.
    #[arg(long)]
    save_plan: Option<PathBuf>,
}

enum Failure {
    Input(String),
    Capacity(String),
    Other(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_capacity() {
            Failure::Capacity(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Other(e.into())
    }
}

fn input(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

fn read_network(path: &Path) -> Result<Network, Failure> {
    load_network(path).map_err(|e| input(path, e))
}

fn read_evidence(path: &Path, net: &Network) -> Result<Evidence, Failure> {
    let text = fs::read_to_string(path).map_err(|e| input(path, e))?;
    netio::parse_evidence(&text, net).map_err(|e| input(path, e))
}

fn network_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn cmd_score(network: &Path, evidence: &Path) -> Result<u8, Failure> {
    let net = read_network(network)?;
    let ev = read_evidence(evidence, &net)?;
    let scores = score_edges(&net, &ev, Exec::default())?;
    let mut out = io::stdout().lock();
    for s in scores {
        writeln!(out, "{} -> {}\t{}", net.name(s.edge.0), net.name(s.edge.1), format_float(s.score))?;
    }
    Ok(0)
}

fn pipeline(
    args: &ApproxArgs,
    net: &Network,
    ev: &Evidence,
    map_vars: Vec<VarId>,
    map: bool,
) -> Result<PipelineResult, Failure> {
    let method = args.method.into();
    let selection = args.selection.into();
    let mut iteration = IterationConfig::new(method);
    iteration.max_iterations = args.max_iters;
    iteration.tolerance = args.tol;
    iteration.damping = args.damping;
    let request = match (&args.delete, &args.edges, &args.target_width) {
        (Some(k), _, _) => DeletionRequest::Count(*k),
        (_, Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| input(path, e))?;
            DeletionRequest::Edges(netio::parse_plan(&text, net).map_err(|e| input(path, e))?)
        }
        (_, _, Some(w)) => DeletionRequest::TargetWidth(*w),
        _ => unreachable!("clap requires one deletion flag"),
    };
    let mut cfg = PipelineConfig::new(iteration, selection);
    cfg.warm_start = args.warm_start;
    cfg.map_vars = map_vars;
    cfg.map = map;

    let mut wanted = vec![selection];
    if args.warm_start {
        wanted.push(Selection::Guided);
    }
    let needs_ranking = !matches!(request, DeletionRequest::Edges(_)) || args.warm_start;
    let rankings = if needs_ranking {
        Rankings::compute(net, ev, &wanted, Exec::default())?
    } else {
        Rankings::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let result = run_pipeline(net, ev, &request, &cfg, &rankings, &mut rng)?;

    if let Some(path) = &args.save_plan {
        let lines: Vec<PlanLine> = result
            .edges
            .iter()
            .zip(&result.plan().entries)
            .map(|(&edge, e)| PlanLine {
                edge,
                params: Some(e.params.clone()),
            })
            .collect();
        fs::write(path, netio::serialize_plan(&lines, net))?;
    }
    for w in &result.outcome.report.warnings {
        log::warn!("{w}");
    }
    Ok(result)
}

fn report_row(args: &ApproxArgs, r: &PipelineResult) -> ReportRow {
    ReportRow {
        network: network_name(&args.network),
        instance: 0,
        method: args.method.into(),
        selection: args.selection.into(),
        edges_deleted: r.edges.len(),
        iterations: r.outcome.report.iterations,
        converged: r.outcome.report.converged,
        kl_bound: Some(r.kl.total.max(0.0)),
        exact_kl: r.exact_kl.map(|x| x.max(0.0)),
        map_ratio: r.map.as_ref().and_then(|m| m.ratio),
        constrained_treewidth: r.constrained_width,
        wall_time_ms: 0,
    }
}

fn exit_for(r: &PipelineResult) -> u8 {
    if r.outcome.report.converged {
        0
    } else {
        EXIT_NOT_CONVERGED
    }
}

fn cmd_approx(args: &ApproxArgs) -> Result<u8, Failure> {
    let net = read_network(&args.network)?;
    let ev = read_evidence(&args.evidence, &net)?;
    let r = pipeline(args, &net, &ev, Vec::new(), false)?;
    let mut out = io::stdout().lock();
    for (v, m) in &r.marginals {
        let var = net.variable(*v);
        let cells: Vec<String> = var
            .states
            .iter()
            .zip(m)
            .map(|(s, p)| format!("{s}={}", format_float(*p)))
            .collect();
        writeln!(out, "{}\t{}", var.name, cells.join(" "))?;
    }
    writeln!(out)?;
    write_report(&[report_row(args, &r)], &mut out)?;
    Ok(exit_for(&r))
}

fn cmd_map(args: &ApproxArgs, names: Option<&[String]>) -> Result<u8, Failure> {
    let net = read_network(&args.network)?;
    let ev = read_evidence(&args.evidence, &net)?;
    let (map_vars, source) = match names {
        Some(names) => (
            names.iter().map(|n| net.var(n)).collect::<Result<Vec<_>, _>>()?,
            "given",
        ),
        None => (default_map_vars(&net, &ev), "default: unobserved roots"),
    };
    let r = pipeline(args, &net, &ev, map_vars, true)?;
    let m = r.map.as_ref().expect("map requested");
    let mut out = io::stdout().lock();
    let list: Vec<&str> = m.map_vars.iter().map(|&v| net.name(v)).collect();
    writeln!(out, "map_vars\t{}\t({source})", list.join(","))?;
    let assignment: Vec<String> = m
        .map_vars
        .iter()
        .zip(&m.assignment)
        .map(|(&v, &s)| format!("{}={}", net.name(v), net.variable(v).states[s]))
        .collect();
    writeln!(out, "assignment\t{}", assignment.join(" "))?;
    let opt = |x: Option<f64>| x.map(format_float).unwrap_or_else(|| "NA".into());
    writeln!(out, "p\t{}", format_float(m.p))?;
    writeln!(out, "q\t{}", opt(m.q))?;
    writeln!(out, "ratio\t{}", opt(m.ratio))?;
    writeln!(out)?;
    write_report(&[report_row(args, &r)], &mut out)?;
    Ok(exit_for(&r))
}

fn cmd_experiment(spec_path: &Path, output: Option<&Path>, sequential: bool) -> Result<u8, Failure> {
    let text = fs::read_to_string(spec_path).map_err(|e| input(spec_path, e))?;
    let spec = ExperimentSpec::from_toml(&text).map_err(|e| input(spec_path, e))?;
    let base = spec_path.parent().unwrap_or(Path::new("."));
    let exec = if sequential { Exec::Sequential } else { Exec::default() };
    let rows = run_experiment_with(&spec, base, exec)?;
    let law = match spec.network {
        NetworkSource::File { .. } => String::new(),
        _ => format!(", CPT law {}", SyntheticCptLaw::default().version()),
    };
    match output {
        Some(path) => {
            write_report(&rows, fs::File::create(path)?)?;
            eprintln!("{}: {} rows, seed {}{law}", path.display(), rows.len(), spec.seed);
        }
        None => {
            write_report(&rows, io::stdout().lock())?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Score { network, evidence } => cmd_score(network, evidence),
        Command::Approx(args) => cmd_approx(args),
        Command::Map { approx, map_vars } => cmd_map(approx, map_vars.as_deref()),
        Command::Experiment {
            spec,
            output,
            sequential,
        } => cmd_experiment(spec, output.as_deref(), *sequential),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Capacity(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CAPACITY)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
