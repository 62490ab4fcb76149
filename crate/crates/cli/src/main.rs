use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use satlab::analysis::{self, files};
use satlab::counter::{count_models_with, CountMethod, CountOptions};
use satlab::dimacs::parse_dimacs;
use satlab::encodings::{assemble_fewshot, encode_instance, Encoding, ExampleBank, NamePools, Task};
use satlab::gen::{build_pool, grid_specs, Family, GenSpec, GridKind, InstanceRecord, Label, PoolOptions};
use satlab::harness::{run_experiment, ExperimentConfig};
use satlab::pool::{digest, read_pool, write_pool};
use satlab::profile::{crossing, parse_alpha_list, phase_profile, write_profile_csv};
use satlab::solver::{solve, Mode, SolverOptions, Status};
use satlab::subject::parse_subject;
use satlab::{Exec, Formula};

#[derive(Parser)]
#[command(name = "satlab", version, about = "Random SAT generation, solving, counting and prompt evaluation")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Run every sweep on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and label a pool of random instances.
    Generate(GenerateArgs),
    /// Solve every pool instance, or sweep P(SAT) over a density range.
    Solve(SolveArgs),
    /// Count models of pool instances.
    Count(CountArgs),
    /// Render pool instances as prompt message lists.
    Encode(EncodeArgs),
    /// Run a subject over a pool and score it.
    Eval(EvalArgs),
    /// Recompute curves from a results file.
    Analyze(AnalyzeArgs),
    /// Write the DPLL search tree of one instance.
    Trace(TraceArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "3sat")]
    family: Family,
    /// Inclusive range such as `3..10`, or a single n.
    #[arg(long, default_value = "3..10")]
    n_range: String,
    /// `paper`, `dataset`, or an explicit list (`a,b,c` or `lo:hi:step`).
    #[arg(long, default_value = "paper")]
    alpha_grid: String,
    #[arg(long, default_value_t = 30)]
    per_alpha: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Instances with more variables than this are left uncounted.
    #[arg(long, default_value_t = 20)]
    count_cap: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long = "in", required_unless_present = "profile")]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Search)]
    mode: ModeArg,
    /// JSONL with a verdict column, or the profile CSV with `--profile`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory receiving one search-tree JSON per instance.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    #[arg(long)]
    node_budget: Option<u64>,
    /// Sweep fresh instances instead of reading a pool.
    #[arg(long, conflicts_with = "input")]
    profile: bool,
    #[arg(long, default_value = "3sat")]
    family: Family,
    #[arg(long, default_value_t = 100)]
    n: u32,
    #[arg(long, default_value = "3.0:5.6:0.2")]
    alphas: String,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Decision,
    Search,
}

#[derive(Args)]
struct CountArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 20)]
    cap: u32,
    #[arg(long, value_enum, default_value_t = MethodArg::Dpll)]
    method: MethodArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Enum,
    Dpll,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    encoding: Encoding,
    #[arg(long, default_value_t = 0)]
    shots: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Example bank JSONL; defaults to oracle solutions from the pool itself.
    #[arg(long)]
    bank: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pool: PathBuf,
    #[arg(long, default_value = "search")]
    task: Task,
    #[arg(long, default_value = "menu")]
    encoding: Encoding,
    #[arg(long, default_value_t = 0)]
    shots: usize,
    /// `oracle`, `random[:p_unsat]` or `llm:<config>`.
    #[arg(long, default_value = "oracle")]
    subject: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    bank: Option<PathBuf>,
    #[arg(long, default_value_t = analysis::DEFAULT_WINDOW)]
    window: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    pool: PathBuf,
    #[arg(long, default_value_t = analysis::DEFAULT_WINDOW)]
    window: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TraceArgs {
    /// Pool JSONL or DIMACS file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Instance id when reading a pool; defaults to the first record.
    #[arg(long)]
    id: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exec(cli: &Cli) -> Exec {
    if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    }
}

fn parse_n_range(s: &str) -> Result<Vec<u32>> {
    let (lo, hi) = match s.split_once("..") {
        Some((lo, hi)) => (lo.trim(), hi.trim().trim_start_matches('=')),
        None => (s.trim(), s.trim()),
    };
    let (lo, hi): (u32, u32) = (lo.parse().context("bad n range")?, hi.parse().context("bad n range")?);
    if lo > hi {
        bail!("empty n range {s}");
    }
    Ok((lo..=hi).collect())
}

fn generate(args: &GenerateArgs, exec: Exec) -> Result<()> {
    let ns = parse_n_range(&args.n_range)?;
    let specs = match args.alpha_grid.parse::<GridKind>() {
        Ok(kind) => grid_specs(args.family, ns.iter().copied(), kind, args.per_alpha, args.seed)?,
        Err(_) => {
            let alphas = parse_alpha_list(&args.alpha_grid)?;
            ns.iter()
                .flat_map(|&n| {
                    alphas.iter().map(move |&alpha| GenSpec {
                        family: args.family,
                        n,
                        alpha,
                        seed: args.seed,
                        count: args.per_alpha,
                    })
                })
                .collect()
        }
    };
    let opts = PoolOptions {
        counting_cap_n: args.count_cap,
        exec,
        ..PoolOptions::default()
    };
    let pool = build_pool(&specs, &opts)?;
    write_pool(&args.out, &pool)?;

    let mut per_n: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for r in &pool {
        let e = per_n.entry(r.n).or_default();
        e.0 += 1;
        e.1 += r.is_sat() as usize;
    }
    println!("{:>4} {:>8} {:>8}", "n", "count", "p_sat");
    for (n, (count, sat)) in &per_n {
        println!("{n:>4} {count:>8} {:>8.3}", *sat as f64 / *count as f64);
    }
    println!("total {} instances -> {} (digest {})", pool.len(), args.out.display(), &digest(&pool)?[..12]);
    Ok(())
}

fn solver_options(budget: Option<u64>, trace: bool) -> SolverOptions {
    let mut o = SolverOptions {
        trace,
        ..SolverOptions::default()
    };
    if let Some(b) = budget {
        o.node_budget = b;
    }
    o
}

fn solve_pool(args: &SolveArgs, exec: Exec) -> Result<()> {
    let Some(input) = &args.input else { bail!("--in is required") };
    let pool = read_pool(input)?;
    let mode = match args.mode {
        ModeArg::Decision => Mode::Decision,
        ModeArg::Search => Mode::Search,
    };
    let opts = solver_options(args.node_budget, args.trace_out.is_some());
    if let Some(dir) = &args.trace_out {
        fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
    }
    let rows = exec.map(&pool, |r| -> Result<Value> {
        let out = solve(&r.formula()?, mode, &opts);
        let verdict = match out.status {
            Status::Sat => Label::Sat,
            Status::Unsat => Label::Unsat,
            Status::LimitExceeded => bail!("{}: node budget exhausted", r.id),
        };
        if verdict != r.label {
            bail!("{}: solver says {verdict:?} but the pool label is {:?}", r.id, r.label);
        }
        if let Some(dir) = &args.trace_out {
            let path = dir.join(format!("{}.json", r.id));
            fs::write(&path, out.export_trace_json()?).with_context(|| path.display().to_string())?;
        }
        let mut v = serde_json::to_value(r)?;
        v["verdict"] = json!(verdict);
        v["decisions"] = json!(out.stats.decisions);
        v["nodes"] = json!(out.stats.nodes());
        if let Some(a) = &out.assignment {
            v["assignment"] = json!(a.literals().iter().map(|l| l.value()).collect::<Vec<_>>());
        }
        Ok(v)
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let sat = rows.iter().filter(|v| v["verdict"] == json!(Label::Sat)).count();
    if let Some(path) = &args.out {
        write_jsonl(path, &rows)?;
    }
    println!("solved {} instances: {sat} SAT, {} UNSAT, all labels confirmed", rows.len(), rows.len() - sat);
    Ok(())
}

fn solve_profile(args: &SolveArgs, exec: Exec) -> Result<()> {
    let alphas = parse_alpha_list(&args.alphas)?;
    let opts = solver_options(args.node_budget, false);
    let rows = phase_profile(args.family, args.n, &alphas, args.samples, args.seed, &opts, exec)?;
    println!("{:>6} {:>7} {:>12} {:>12}", "alpha", "p_sat", "med_decis", "mean_decis");
    for r in &rows {
        println!("{:>6.2} {:>7.3} {:>12.1} {:>12.1}", r.alpha, r.p_sat, r.median_decisions, r.mean_decisions);
    }
    match crossing(&rows) {
        Some(a) => println!("P(SAT) crosses 0.5 at alpha = {a:.3}"),
        None => println!("P(SAT) does not cross 0.5 in this range"),
    }
    if let Some(path) = &args.out {
        write_profile_csv(path, &rows)?;
    }
    Ok(())
}

fn count(args: &CountArgs, exec: Exec) -> Result<()> {
    let mut pool = read_pool(&args.input)?;
    let (method, opts) = match args.method {
        MethodArg::Enum => (CountMethod::Enum, CountOptions { enum_cap: args.cap, exec, ..CountOptions::default() }),
        MethodArg::Dpll => (CountMethod::CountingDpll, CountOptions { dpll_cap: args.cap, exec: Exec::Sequential, ..CountOptions::default() }),
    };
    let skipped = pool.iter().filter(|r| r.n > args.cap).count();
    if skipped > 0 {
        log::warn!("{skipped} instances have n > {} and are left uncounted", args.cap);
    }
    let counts = exec.map(&pool, |r| -> Result<Option<u64>> {
        if r.n > args.cap {
            return Ok(None);
        }
        let c = count_models_with(&r.formula()?, method, &opts).with_context(|| r.id.clone())?;
        if (c.model_count > 0) != r.is_sat() {
            bail!("{}: {} models but labelled {:?}", r.id, c.model_count, r.label);
        }
        Ok(Some(c.model_count))
    });
    for (r, c) in pool.iter_mut().zip(counts) {
        r.model_count = c?;
    }
    write_pool(&args.out, &pool)?;
    println!("counted {} of {} instances ({skipped} above cap)", pool.len() - skipped, pool.len());
    Ok(())
}

fn load_bank(path: Option<&Path>) -> Result<Option<ExampleBank>> {
    Ok(match path {
        Some(p) => Some(ExampleBank::load(p)?),
        None => None,
    })
}

fn encode(args: &EncodeArgs) -> Result<()> {
    let pool = read_pool(&args.input)?;
    let names = NamePools::builtin();
    let bank = match load_bank(args.bank.as_deref())? {
        Some(b) => b,
        None if args.shots > 0 => ExampleBank::from_pool(&pool, args.encoding, &names, args.seed)?,
        None => ExampleBank::default(),
    };
    let mut rows = Vec::with_capacity(pool.len());
    for r in &pool {
        let enc = encode_instance(r, args.encoding, &names, args.seed).with_context(|| r.id.clone())?;
        let messages = assemble_fewshot(&enc.prompt, &r.id, args.encoding, args.shots, &bank, &names, args.seed)?;
        rows.push(json!({
            "id": r.id,
            "encoding": args.encoding,
            "shots": args.shots,
            "messages": messages,
        }));
    }
    write_jsonl(&args.out, &rows)?;
    println!("encoded {} instances as {} ({} shots)", rows.len(), args.encoding, args.shots);
    Ok(())
}

fn eval(args: &EvalArgs, exec: Exec) -> Result<()> {
    let pool = read_pool(&args.pool)?;
    let subject = parse_subject(&args.subject, args.seed)?;
    let bank = load_bank(args.bank.as_deref())?;
    let config = ExperimentConfig {
        shots: args.shots,
        seed: args.seed,
        limit: args.limit,
        exec,
        ..ExperimentConfig::new(args.task, args.encoding)
    };
    let mut run = run_experiment(&config, &pool, subject.as_ref(), bank.as_ref(), &NamePools::builtin())?;
    run.manifest.output_dir = Some(args.out.clone());
    let analyses = analysis::analyze(&run.records, &pool, args.window)?;
    analysis::export_results(&run.records, &analyses, Some(&run.manifest), &args.out)?;
    let correct = run.records.iter().filter(|r| r.correct).count();
    println!(
        "{} {} {}-shot on {} instances: accuracy {:.3} ({correct}/{})",
        run.manifest.subject,
        args.task,
        args.shots,
        run.records.len(),
        run.manifest.accuracy.unwrap_or(0.0),
        run.records.len()
    );
    Ok(())
}

fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let pool = read_pool(&args.pool)?;
    let records = analysis::read_results(&args.results)?;
    let analyses = analysis::analyze(&records, &pool, args.window)?;
    let manifest_path = args.results.with_file_name(files::MANIFEST);
    let manifest = fs::read_to_string(&manifest_path).ok().and_then(|t| serde_json::from_str(&t).ok());
    analysis::export_results(&records, &analyses, manifest.as_ref(), &args.out)?;
    println!(
        "{} records, {} curve points, {} ratio bins -> {}",
        records.len(),
        analyses.alpha_curve.len(),
        analyses.sat_ratio.len(),
        args.out.display()
    );
    Ok(())
}

fn trace(args: &TraceArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input).with_context(|| args.input.display().to_string())?;
    let formula: Formula = if text.trim_start().starts_with('{') {
        let pool: Vec<InstanceRecord> = satlab::pool::from_jsonl(text.as_bytes())?;
        let record = match &args.id {
            Some(id) => pool.iter().find(|r| &r.id == id).with_context(|| format!("no instance '{id}'"))?,
            None => pool.first().context("empty pool")?,
        };
        record.formula()?
    } else {
        parse_dimacs(&text)?
    };
    let out = solve(&formula, Mode::Search, &solver_options(None, true));
    let json = out.export_trace_json()?;
    match &args.out {
        Some(p) => fs::write(p, json).with_context(|| p.display().to_string())?,
        None => println!("{json}"),
    }
    eprintln!("{:?} after {} decisions", out.status, out.stats.decisions);
    Ok(())
}

fn write_jsonl(path: &Path, rows: &[Value]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path).with_context(|| path.display().to_string())?);
    for r in rows {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let exec = exec(cli);
    satlab::par::with_jobs(cli.jobs, || match &cli.command {
        Command::Generate(a) => generate(a, exec),
        Command::Solve(a) if a.profile => solve_profile(a, exec),
        Command::Solve(a) => solve_pool(a, exec),
        Command::Count(a) => count(a, exec),
        Command::Encode(a) => encode(a),
        Command::Eval(a) => eval(a, exec),
        Command::Analyze(a) => analyze(a),
        Command::Trace(a) => trace(a),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = String::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !msg.contains(&cause) {
                    msg += if msg.is_empty() { "" } else { ": " };
                    msg += &cause;
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
