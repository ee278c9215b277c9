mod check;

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rootbst_bench::{measure, parse_sizes, scaling_report, to_csv, BenchError, Shape};
use rootbst_core::interp::Trace;
use rootbst_core::{
    build_instruction_graph, check_constraints, gen_workload, parse_host, parse_opscript, parse_program, parse_rule,
    print_host, program, run_bst_with, validate_output, Constraints, ExecConfig, ExecStats, ExecStatus, HostGraph,
    MatchStats, OpScript, Program,
};

#[derive(Parser)]
#[command(name = "rootbst", version, about = "Rooted graph programs and a binary search tree built from them")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a program on a host graph and print the result.
    Run(RunArgs),
    /// Run the tree program over an op script.
    Bst(BstArgs),
    /// Compare the tree program with the reference on seeded workloads.
    Check(CheckArgs),
    /// Time tree operations and report how they scale.
    Bench(BenchArgs),
    /// Parse and validate a file without running anything.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct ExecFlags {
    /// Iteration cap per loop entry (default: $RG_MAX_ITERS or 10000000).
    #[arg(long, value_name = "N")]
    max_iters: Option<u64>,
    /// Print the applied rules, one per line, to stderr.
    #[arg(long)]
    trace: bool,
    /// Print matching counters to stderr.
    #[arg(long)]
    stats: bool,
}

impl ExecFlags {
    fn config(&self) -> ExecConfig {
        let mut cfg = ExecConfig::default();
        if let Some(n) = self.max_iters {
            cfg.max_iters = n;
        }
        cfg
    }
}

#[derive(Args)]
struct RunArgs {
    /// Program file.
    program: PathBuf,
    /// Host graph file (`-` for stdin).
    #[arg(required_unless_present = "ops", conflicts_with = "ops")]
    host: Option<PathBuf>,
    /// Start from the instruction list for this op script instead of a host graph.
    #[arg(long, value_name = "FILE")]
    ops: Option<PathBuf>,
    #[command(flatten)]
    exec: ExecFlags,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Faithful,
    Sanitized,
}

impl From<VariantArg> for rootbst_core::BstVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Faithful => rootbst_core::BstVariant::Faithful,
            VariantArg::Sanitized => rootbst_core::BstVariant::Sanitized,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PrintArg {
    Graph,
    Tree,
    Report,
}

#[derive(Args)]
struct BstArgs {
    /// Op script (`-` for stdin).
    ops: PathBuf,
    #[arg(long, value_enum, default_value = "sanitized")]
    variant: VariantArg,
    #[arg(long, value_enum, default_value = "tree")]
    print: PrintArg,
    #[command(flatten)]
    exec: ExecFlags,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstraintsArg {
    SanitizedSafe,
    FaithfulSafe,
    Unrestricted,
}

impl From<ConstraintsArg> for Constraints {
    fn from(c: ConstraintsArg) -> Self {
        match c {
            ConstraintsArg::SanitizedSafe => Constraints::SanitizedSafe,
            ConstraintsArg::FaithfulSafe => Constraints::FaithfulSafe,
            ConstraintsArg::Unrestricted => Constraints::Unrestricted,
        }
    }
}

#[derive(Args)]
struct CheckArgs {
    /// Number of workloads.
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    /// Operations per workload.
    #[arg(long, default_value_t = 300)]
    size: usize,
    /// Workload restrictions (default: the safe set for the variant).
    #[arg(long, value_enum)]
    constraints: Option<ConstraintsArg>,
    #[arg(long, value_enum, default_value = "sanitized")]
    variant: VariantArg,
    /// Check this program instead of the shipped one.
    #[arg(long, value_name = "FILE")]
    program: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    max_iters: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Degenerate,
    Balanced,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "degenerate")]
    shape: ShapeArg,
    /// Comma-separated tree sizes, or heights such as `h=6..12` for balanced trees.
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long, default_value_t = rootbst_bench::DEFAULT_REPS)]
    reps: usize,
    #[arg(long, value_enum, default_value = "sanitized")]
    variant: VariantArg,
    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Program,
    Rule,
    Host,
    Ops,
}

#[derive(Args)]
struct ValidateArgs {
    file: PathBuf,
    /// What the file holds (default: from the extension).
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
}

/// A command that stopped early: exit code and message.
struct Stop(u8, String);

const USAGE: u8 = 2;
const MISMATCH: u8 = 3;

fn usage(msg: impl Into<String>) -> Stop {
    Stop(USAGE, msg.into())
}

fn read_input(path: &Path) -> Result<String, Stop> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| usage(format!("stdin: {e}")))?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_program(path: &Path) -> Result<Program, Stop> {
    parse_program(&read_input(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_ops(path: &Path) -> Result<OpScript, Stop> {
    parse_opscript(&read_input(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn warn_faithful(v: VariantArg) {
    if matches!(v, VariantArg::Faithful) {
        eprintln!(
            "warning: the faithful variant runs the program exactly as drawn; it misbehaves on duplicate \
             inserts, absent deletes and repeated searches (see README, \"Program variants\")"
        );
    }
}

fn print_stats(p: &Program, stats: &ExecStats) {
    let m: &MatchStats = &stats.matching;
    let mut err = io::stderr().lock();
    let _ = writeln!(err, "rule applications: {}", m.applications);
    let _ = writeln!(err, "match calls: {}", m.match_calls);
    let _ = writeln!(err, "matches found: {}", m.matches_found);
    let _ = writeln!(err, "anchors tried: {}", m.anchors_tried);
    let _ = writeln!(err, "extension steps: {}", m.extension_steps);
    let _ = writeln!(err, "max anchors per call: {}", m.max_anchors_per_call);
    let _ = writeln!(err, "max extension steps per call: {}", m.max_steps_per_call);
    for (r, n) in p.rules().iter().zip(&stats.per_rule) {
        let _ = writeln!(err, "  {} {n}", r.name());
    }
}

fn print_trace(names: &[String]) {
    let mut err = io::stderr().lock();
    for n in names {
        let _ = writeln!(err, "{n}");
    }
}

fn status_code(st: ExecStatus) -> u8 {
    match st {
        ExecStatus::Success => 0,
        ExecStatus::Failure | ExecStatus::Break => 1,
    }
}

fn cmd_run(a: &RunArgs) -> Result<u8, Stop> {
    let p = load_program(&a.program)?;
    let mut g: HostGraph = match (&a.host, &a.ops) {
        (_, Some(ops)) => build_instruction_graph(&load_ops(ops)?),
        (Some(h), None) => parse_host(&read_input(h)?).map_err(|e| usage(format!("{}: {e}", h.display())))?,
        (None, None) => return Err(usage("need a host graph or --ops")),
    };
    let cfg = a.exec.config();
    let mut stats = ExecStats::for_program(&p);
    let mut trace = Trace::default();
    let res = p.run_with(&mut g, &cfg, &mut stats, &mut trace);
    print!("{}", print_host(&g));
    if a.exec.trace {
        print_trace(&trace.0);
    }
    if a.exec.stats {
        print_stats(&p, &stats);
    }
    match res {
        Ok(ExecStatus::Success) => Ok(0),
        Ok(st) => {
            eprintln!("program ended with {st:?}");
            Ok(status_code(st))
        }
        Err(e) => Err(Stop(1, e.to_string())),
    }
}

fn cmd_bst(a: &BstArgs) -> Result<u8, Stop> {
    let ops = load_ops(&a.ops)?;
    warn_faithful(a.variant);
    let variant = a.variant.into();
    let r = run_bst_with(&ops, variant, &a.exec.config(), a.exec.trace).map_err(|e| Stop(1, e.to_string()))?;
    if let Some(t) = &r.trace {
        print_trace(t);
    }
    if a.exec.stats {
        print_stats(program(variant), &r.stats);
    }
    let mut code = status_code(r.status);
    match a.print {
        PrintArg::Graph => print!("{}", print_host(&r.graph)),
        PrintArg::Tree => match &r.tree {
            Ok(t) => println!("{t}"),
            Err(e) => return Err(Stop(MISMATCH, format!("no tree: {e}"))),
        },
        PrintArg::Report => {
            let rep = validate_output(&r.graph, &ops);
            print!("{rep}");
            if code == 0 && !rep.is_clean() {
                code = MISMATCH;
            }
        }
    }
    if r.status != ExecStatus::Success {
        eprintln!("program ended with {:?}", r.status);
    }
    Ok(code)
}

fn cmd_check(a: &CheckArgs) -> Result<u8, Stop> {
    let variant: rootbst_core::BstVariant = a.variant.into();
    let constraints: Constraints = match (a.constraints, a.variant) {
        (Some(c), _) => c.into(),
        (None, VariantArg::Faithful) => Constraints::FaithfulSafe,
        (None, VariantArg::Sanitized) => Constraints::SanitizedSafe,
    };
    if matches!(a.variant, VariantArg::Faithful) && constraints != Constraints::FaithfulSafe {
        return Err(usage(format!(
            "the faithful variant is only defined on faithful-safe workloads, not {}",
            constraints.name()
        )));
    }
    warn_faithful(a.variant);
    let custom;
    let p = match &a.program {
        Some(path) => {
            custom = load_program(path)?;
            &custom
        }
        None => program(variant),
    };
    let mut cfg = ExecConfig::default();
    if let Some(n) = a.max_iters {
        cfg.max_iters = n;
    }
    for seed in a.first_seed..a.first_seed + a.seeds {
        let ops = gen_workload(seed, a.size, constraints).map_err(|e| usage(e.to_string()))?;
        debug_assert!(check_constraints(&ops, constraints).is_ok());
        if let Some(why) = check::disagreement(p, &ops, &cfg) {
            let small = check::minimize(p, &ops, constraints, &cfg);
            let small_why = check::disagreement(p, &small, &cfg).unwrap_or_default();
            println!("mismatch at seed {seed}: {why}");
            println!("minimized counterexample ({} ops): {small_why}", small.0.len());
            print!("{small}");
            return Ok(MISMATCH);
        }
    }
    println!(
        "{} workloads of {} ops, {} variant, {}: no mismatches",
        a.seeds,
        a.size,
        variant,
        constraints.name()
    );
    Ok(0)
}

fn cmd_bench(a: &BenchArgs) -> Result<u8, Stop> {
    let shape = match a.shape {
        ShapeArg::Degenerate => Shape::Degenerate,
        ShapeArg::Balanced => Shape::Balanced,
    };
    let default_sizes = match shape {
        Shape::Degenerate => "1000,2000,4000,8000",
        Shape::Balanced => "h=10..13",
    };
    let sizes = parse_sizes(shape, a.sizes.as_deref().unwrap_or(default_sizes)).map_err(usage)?;
    if sizes.len() < 4 {
        return Err(usage(format!("need at least 4 sizes for a scaling report, got {}", sizes.len())));
    }
    if a.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    warn_faithful(a.variant);
    let rows = measure(shape, &sizes, a.reps, a.variant.into()).map_err(|e| bench_stop(&e))?;
    let csv = to_csv(&rows);
    match &a.out {
        Some(path) => fs::write(path, &csv).map_err(|e| Stop(1, format!("{}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    let report = scaling_report(&rows).map_err(|e| bench_stop(&e))?;
    eprint!("{report}");
    Ok(if report.passed() { 0 } else { MISMATCH })
}

fn bench_stop(e: &BenchError) -> Stop {
    match e {
        BenchError::TooFewSizes { .. }
        | BenchError::NotGeometric { .. }
        | BenchError::NoReps
        | BenchError::EmptyTree
        | BenchError::TooTall(_) => usage(e.to_string()),
        _ => Stop(1, e.to_string()),
    }
}

fn cmd_validate(a: &ValidateArgs) -> Result<u8, Stop> {
    let kind = match a.kind {
        Some(k) => k,
        None => match a.file.extension().and_then(|e| e.to_str()) {
            Some("gp2") => KindArg::Program,
            Some("rule") => KindArg::Rule,
            Some("host") => KindArg::Host,
            Some("ops") => KindArg::Ops,
            _ => return Err(usage(format!("{}: cannot tell the file kind; use --kind", a.file.display()))),
        },
    };
    let text = read_input(&a.file)?;
    let bad = |e: rootbst_core::TextError| usage(format!("{}: {e}", a.file.display()));
    match kind {
        KindArg::Program => {
            let p = parse_program(&text).map_err(bad)?;
            let slow: Vec<&str> = p.rules().iter().filter(|r| !r.is_fast()).map(|r| r.name()).collect();
            println!("program: {} rules, {} procedures", p.rules().len(), p.procedures().len());
            if !slow.is_empty() {
                println!("rules without a rooted anchor for every node: {}", slow.join(", "));
            }
        }
        KindArg::Rule => {
            let r = parse_rule(&text).map_err(bad)?;
            println!("rule {}: {}", r.name(), if r.is_fast() { "fast" } else { "not fast" });
        }
        KindArg::Host => {
            let g = parse_host(&text).map_err(bad)?;
            println!(
                "host graph: {} nodes, {} edges, {} rooted",
                g.node_count(),
                g.edge_count(),
                g.root_count()
            );
        }
        KindArg::Ops => {
            let ops = parse_opscript(&text).map_err(bad)?;
            println!("op script: {} ops", ops.0.len());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Bst(a) => cmd_bst(a),
        Cmd::Check(a) => cmd_check(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Validate(a) => cmd_validate(a),
    };
    let _ = io::stdout().flush();
    match res {
        Ok(code) => ExitCode::from(code),
        Err(Stop(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
