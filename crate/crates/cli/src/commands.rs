use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hsj_core::corpus;
use hsj_core::haref::{self, HybridAutomaton, VarMap};
use hsj_core::kernel::{Kernel, Schedule};
use hsj_core::lti::LtiSystem;
use hsj_core::rewrite::{rewrite_flows, RewriteConfig};
use hsj_core::syntax::{parse_with_params, pretty_print, Program};
use hsj_core::trace::Trace;
use hsj_core::ttl::TtlMode;
use hsj_core::verify::{check_reachable, InputAlphabet, SearchOptions, Strategy, Verdict};
use hsj_core::Rational;

pub const EXIT_OK: u8 = 0;
pub const EXIT_VIOLATION: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INCONCLUSIVE: u8 = 3;

/// A diagnostic and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }

    fn violation(message: impl Into<String>) -> Self {
        Failure { code: EXIT_VIOLATION, message: message.into() }
    }
}

type CmdResult = Result<u8, Failure>;

#[derive(Debug, Parser)]
#[command(name = "hsj", version, about = "Compile, simulate and verify synchronous hybrid programs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a program and run the static checks.
    Check(ProgramArgs),
    /// Print the program with every flow rewritten into discrete steps.
    Desugar {
        #[command(flatten)]
        program: ProgramArgs,
        #[command(flatten)]
        timing: TimingArgs,
    },
    /// Simulate a program and emit its trace.
    Run(RunArgs),
    /// Bounded search for a schedule that emits a signal.
    Verify(VerifyArgs),
    /// Observability and controllability of a discrete LTI system.
    Lti {
        /// Matrix file: `A r c`, `C r c` and optionally `B r c` blocks.
        file: PathBuf,
    },
    /// Tabulate a program against a hybrid automaton on the tick grid.
    Compare(CompareArgs),
    /// List or run the embedded example corpus.
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
}

#[derive(Debug, Args)]
pub struct ProgramArgs {
    /// Source file, or `corpus:NAME` for an embedded example.
    pub program: String,
    /// Bind a program parameter, e.g. `--param alpha=3`.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TimingArgs {
    /// Worst-case reaction time (rational, > 0).
    #[arg(long, default_value = "1")]
    pub wcrt: String,
    /// Reading of the multi-ODE look-ahead.
    #[arg(long, value_enum, default_value_t = TtlArg::LastTau)]
    pub ttl_mode: TtlArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TtlArg {
    LastTau,
    FinalReduce,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub program: ProgramArgs,
    #[command(flatten)]
    pub timing: TimingArgs,
    /// Maximum number of reactions.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub ticks: u64,
    /// JSON input schedule.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    /// Output format; inferred from `--out`'s extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file (standard output when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Lanes of the timing diagram (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub vars: Vec<String>,
    /// Interpret flows directly instead of running the rewritten program.
    #[arg(long)]
    pub native: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    Bfs,
    Dfs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub program: ProgramArgs,
    #[command(flatten)]
    pub timing: TimingArgs,
    /// Longest schedule explored, in ticks.
    #[arg(long)]
    pub bound: u64,
    /// Signal whose emission is searched for.
    #[arg(long)]
    pub target: String,
    /// JSON input alphabet; defaults to absent/present for every input.
    #[arg(long)]
    pub alphabet: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = StrategyArg::Bfs)]
    pub strategy: StrategyArg,
    /// Maximum number of distinct states expanded.
    #[arg(long, default_value_t = 1_000_000)]
    pub node_limit: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CompareFormat {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Hybrid automaton (TOML), or `corpus:NAME`.
    #[arg(long)]
    pub ha: String,
    /// Program source, or `corpus:NAME`.
    #[arg(long)]
    pub program: String,
    #[arg(long, default_value = "1")]
    pub wcrt: String,
    /// Time up to which both are tabulated.
    #[arg(long)]
    pub horizon: String,
    /// Variable map (`ha_var = "program_var"` lines); defaults to shared names.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Bind a parameter in the program and a constant in the automaton.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    #[arg(long, value_enum, default_value_t = CompareFormat::Table)]
    pub format: CompareFormat,
}

#[derive(Debug, Subcommand)]
pub enum CorpusAction {
    /// Names of the embedded programs and automata.
    List,
    /// Print one embedded source.
    Show { name: String },
    /// Run every golden case.
    Run,
}

pub fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Check(p) => check(&p),
        Command::Desugar { program, timing } => desugar(&program, &timing),
        Command::Run(args) => run_program(&args),
        Command::Verify(args) => verify(&args),
        Command::Lti { file } => lti(&file),
        Command::Compare(args) => compare(&args),
        Command::Corpus { action } => corpus_cmd(action),
    }
}

fn read(path: &std::path::Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// Source text for `spec`: a path or `corpus:NAME`.
fn load_source(spec: &str) -> Result<String, Failure> {
    match spec.strip_prefix("corpus:") {
        Some(name) => corpus::program(name)
            .map(|p| p.source.to_string())
            .or_else(|| corpus::automaton(name).map(str::to_string))
            .ok_or_else(|| Failure::usage(format!("no embedded example named `{name}`"))),
        None => read(spec.as_ref()),
    }
}

pub fn parse_params(raw: &[String]) -> Result<BTreeMap<String, Rational>, Failure> {
    raw.iter()
        .map(|p| {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Failure::usage(format!("--param `{p}`: expected NAME=VALUE")))?;
            let v: Rational = v.parse().map_err(|e| Failure::usage(format!("--param `{p}`: {e}")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn config(t: &TimingArgs) -> Result<RewriteConfig, Failure> {
    let wcrt = parse_wcrt(&t.wcrt)?;
    let mode = match t.ttl_mode {
        TtlArg::LastTau => TtlMode::LastTau,
        TtlArg::FinalReduce => TtlMode::FinalReduce,
    };
    Ok(RewriteConfig::new(wcrt).map_err(|e| Failure::usage(e.to_string()))?.with_ttl_mode(mode))
}

fn parse_wcrt(text: &str) -> Result<Rational, Failure> {
    text.parse().map_err(|e| Failure::usage(format!("--wcrt: {e}")))
}

fn parse_program(p: &ProgramArgs) -> Result<Program, Failure> {
    let source = load_source(&p.program)?;
    let params = parse_params(&p.params)?;
    let program = parse_with_params(&source, &params).map_err(|e| Failure::usage(format!("{}:{e}", p.program)))?;
    if let Some(name) = params.keys().find(|k| program.param(k).is_none()) {
        return Err(Failure::usage(format!("{}: no parameter `{name}` is declared", p.program)));
    }
    Ok(program)
}

fn compile(p: &ProgramArgs, cfg: &RewriteConfig, native: bool) -> Result<Kernel, Failure> {
    let program = parse_program(p)?;
    let kernel = if native { Kernel::native(&program, cfg) } else { Kernel::new(&program, cfg) };
    kernel.map_err(|e| Failure::usage(format!("{}: {e}", p.program)))
}

fn check(p: &ProgramArgs) -> CmdResult {
    let program = parse_program(p)?;
    let cfg = RewriteConfig::new(Rational::one()).expect("positive");
    let kernel = Kernel::new(&program, &cfg).map_err(|e| Failure::usage(format!("{}: {e}", p.program)))?;
    let names = |v: Vec<&hsj_core::kernel::SlotInfo>| v.iter().map(|s| s.display.clone()).collect::<Vec<_>>().join(", ");
    println!("{}: ok", p.program);
    println!("inputs: {}", names(kernel.inputs()));
    println!("outputs: {}", names(kernel.outputs()));
    Ok(EXIT_OK)
}

fn desugar(p: &ProgramArgs, t: &TimingArgs) -> CmdResult {
    let program = parse_program(p)?;
    let cfg = config(t)?;
    hsj_core::syntax::reject_nonlinear_combine(&program).map_err(|e| Failure::usage(format!("{}: {e}", p.program)))?;
    print!("{}", pretty_print(&rewrite_flows(&program, &cfg)));
    Ok(EXIT_OK)
}

pub fn load_schedule(text: &str, kernel: &Kernel) -> Result<Schedule, Failure> {
    let schedule = Schedule::from_json(text).map_err(|e| Failure::usage(format!("schedule: {e}")))?;
    for (i, inputs) in schedule.0.iter().enumerate() {
        kernel
            .validate_inputs(inputs)
            .map_err(|e| Failure::usage(format!("schedule, tick {}: {e}", i + 1)))?;
    }
    Ok(schedule)
}

fn run_program(a: &RunArgs) -> CmdResult {
    let cfg = config(&a.timing)?;
    let kernel = compile(&a.program, &cfg, a.native)?;
    let schedule = match &a.schedule {
        Some(path) => load_schedule(&read(path)?, &kernel)?,
        None => Schedule::empty(),
    };
    let trace = kernel.run(&schedule, a.ticks).map_err(|e| Failure::violation(format!("tick {}: {}", e.tick, e.error)))?;
    let format = a.format.unwrap_or_else(|| {
        match a.out.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            Some("svg") => Format::Svg,
            _ => Format::Csv,
        }
    });
    let text = match format {
        Format::Csv => trace.to_csv(),
        Format::Json => trace.to_json(),
        Format::Svg => {
            let vars: Vec<&str> = a.vars.iter().map(String::as_str).collect();
            trace.to_svg_timing(&vars).map_err(|e| Failure::usage(e.to_string()))?
        }
    };
    emit(&text, a.out.as_ref())?;
    if a.out.is_some() {
        print_summary(&trace);
    }
    Ok(EXIT_OK)
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn print_summary(trace: &Trace) {
    let Some(last) = trace.last() else { return };
    let conts: Vec<String> = last.conts.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let end = trace.terminated_at.map_or("running".to_string(), |n| format!("terminated at tick {n}"));
    println!("{} ticks, {end}; {}", last.tick, conts.join(" "));
}

fn verify(a: &VerifyArgs) -> CmdResult {
    let cfg = config(&a.timing)?;
    let kernel = compile(&a.program, &cfg, false)?;
    let alphabet = match &a.alphabet {
        Some(path) => InputAlphabet::from_json(&read(path)?).map_err(|e| Failure::usage(e.to_string()))?,
        None => InputAlphabet::presence_of_all(&kernel),
    };
    let opts = SearchOptions {
        strategy: match a.strategy {
            StrategyArg::Bfs => Strategy::Bfs,
            StrategyArg::Dfs => Strategy::Dfs,
        },
        node_limit: a.node_limit,
    };
    let started = Instant::now();
    let verdict = check_reachable(&kernel, &alphabet, a.bound, &a.target, &opts).map_err(|e| Failure {
        code: if matches!(e, hsj_core::verify::VerifyError::Runtime { .. }) { EXIT_VIOLATION } else { EXIT_USAGE },
        message: e.to_string(),
    })?;
    let elapsed = started.elapsed();
    match verdict {
        Verdict::Reachable(w) => {
            let from = &w.state.time - &cfg.wcrt;
            println!("REACHABLE {} at tick {} (transition [{from},{}))", a.target, w.tick, w.state.time);
            println!("witness schedule: {}", w.schedule.to_json());
            let conts: Vec<String> = w.state.conts.iter().map(|(k, v)| format!("{k}={v}")).collect();
            println!("state: {}", conts.join(" "));
            eprintln!("search took {:.3}s", elapsed.as_secs_f64());
            Ok(EXIT_VIOLATION)
        }
        Verdict::Unreachable { bound, states } => {
            println!("UNREACHABLE {} within {bound} ticks ({states} states)", a.target);
            Ok(EXIT_OK)
        }
        Verdict::ResourceLimit { states } => {
            println!("INCONCLUSIVE: node limit reached after {states} states");
            Ok(EXIT_INCONCLUSIVE)
        }
    }
}

fn lti(file: &std::path::Path) -> CmdResult {
    let sys = LtiSystem::parse(&read(file)?).map_err(|e| Failure::usage(format!("{}: {e}", file.display())))?;
    let r = sys.report();
    let verdict = |ok: bool| if ok { "yes" } else { "no" };
    println!("n = {}", r.n);
    println!("observability rank = {} (observable: {})", r.observability_rank, verdict(r.observable));
    if let (Some(rank), Some(ok)) = (r.controllability_rank, r.controllable) {
        println!("controllability rank = {rank} (controllable: {})", verdict(ok));
    }
    let ok = r.observable && r.controllable.unwrap_or(true);
    Ok(if ok { EXIT_OK } else { EXIT_VIOLATION })
}

fn compare(a: &CompareArgs) -> CmdResult {
    let params = parse_params(&a.params)?;
    let ha_text = load_source(&a.ha)?;
    let ha = HybridAutomaton::from_toml(&ha_text, &params).map_err(|e| Failure::usage(format!("{}: {e}", a.ha)))?;
    let wcrt = parse_wcrt(&a.wcrt)?;
    let horizon: Rational = a.horizon.parse().map_err(|e| Failure::usage(format!("--horizon: {e}")))?;
    let cfg = RewriteConfig::new(wcrt.clone()).map_err(|e| Failure::usage(e.to_string()))?;
    let source = load_source(&a.program)?;
    let program = parse_with_params(&source, &params).map_err(|e| Failure::usage(format!("{}:{e}", a.program)))?;
    if let Some(name) = params.keys().find(|k| program.param(k).is_none() && !ha.constants.contains_key(*k)) {
        return Err(Failure::usage(format!("no parameter or constant `{name}` is declared")));
    }
    let kernel = Kernel::new(&program, &cfg).map_err(|e| Failure::usage(format!("{}: {e}", a.program)))?;
    let ticks = horizon
        .checked_div(&wcrt)
        .map(|q| q.floor())
        .and_then(|q| q.to_u64())
        .ok_or_else(|| Failure::usage("--horizon must be non-negative"))?;
    let trace = kernel
        .run(&Schedule::empty(), ticks.max(1))
        .map_err(|e| Failure::violation(format!("tick {}: {}", e.tick, e.error)))?;
    let map = match &a.map {
        Some(path) => haref::parse_map(&read(path)?).map_err(|e| Failure::usage(e.to_string()))?,
        None => VarMap::new(),
    };
    let cmp = haref::compare(&ha, &trace, &map, &horizon).map_err(|e| Failure::usage(e.to_string()))?;
    match a.format {
        CompareFormat::Csv => print!("{}", cmp.to_csv()),
        CompareFormat::Json => {
            println!("{}", serde_json::to_string_pretty(&cmp).map_err(|e| Failure::usage(e.to_string()))?)
        }
        CompareFormat::Table => {
            print!("{}", cmp.to_csv().replace(',', "\t"));
            match &cmp.first_divergence {
                Some(d) => println!(
                    "first divergence: tick {} (t = {}), {}: program {} vs automaton {}",
                    d.tick, d.time, d.variable, d.program, d.automaton
                ),
                None => println!("no divergence"),
            }
            println!("max deviation: {}", cmp.max_deviation);
            for (label, run) in [("automaton", &cmp.ideal), ("delayed automaton", &cmp.delayed)] {
                for s in &run.switches {
                    let vals: Vec<String> = s.values.iter().map(|(k, v)| format!("{k}={v}")).collect();
                    println!("{label}: t = {} {} -> {} ({})", s.time, s.from, s.to, vals.join(" "));
                }
                for v in &run.violations {
                    println!("{label}: invariant of {} violated at t = {}", v.location, v.time);
                }
            }
        }
    }
    Ok(EXIT_OK)
}

fn corpus_cmd(action: CorpusAction) -> CmdResult {
    match action {
        CorpusAction::List => {
            for p in corpus::PROGRAMS {
                println!("{}\tprogram\t{}", p.name, p.figures.join(" "));
            }
            for (name, figs, _) in corpus::AUTOMATA {
                println!("{name}\tautomaton\t{}", figs.join(" "));
            }
            Ok(EXIT_OK)
        }
        CorpusAction::Show { name } => {
            print!("{}", load_source(&format!("corpus:{name}"))?);
            Ok(EXIT_OK)
        }
        CorpusAction::Run => {
            let mut outcomes = corpus::run_corpus();
            outcomes.sort_by_key(|o| o.id);
            let mut failed = 0;
            for o in &outcomes {
                let status = match (o.passed, o.known_discrepancy) {
                    (true, _) => "pass",
                    (false, Some(_)) => "known-discrepancy",
                    (false, None) => {
                        failed += 1;
                        "FAIL"
                    }
                };
                println!("{status}\t{}", o.id);
                for f in &o.failures {
                    println!("\t{f}");
                }
            }
            println!("{} cases, {failed} failed", outcomes.len());
            Ok(if failed == 0 { EXIT_OK } else { EXIT_VIOLATION })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_parse_rationals() {
        let p = parse_params(&["alpha=3".into(), "w=1/2".into()]).unwrap();
        assert_eq!(p["w"], Rational::new(1, 2));
        assert_eq!(parse_params(&["alpha".into()]).unwrap_err().code, EXIT_USAGE);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
