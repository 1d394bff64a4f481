//! `dpa`: deadlock-freedom analysis from the command line.
//!
//! Exit status is 0 when the property asked about was established (for
//! `check`, deadlock freedom proven), 1 when it was not, and 2 on any input
//! or analysis error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dpa::decomposition::{check_conflict_free, decompose, Verdict};
use dpa::dsl::{echo_descriptor, elaborate_with, parse_descriptor, DslError, SourceFile};
use dpa::network::{CommGraph, Network};
use dpa::oracle::{explore_global, OracleVerdict};
use dpa::patterns::{check_pattern, PatternDescriptor, Scope};
use dpa::report::{comm_graph_dot, emit_report, run_dpa, snapshot_dot, summarise, DpaOptions};
use serde_json::json;

#[derive(Parser)]
#[command(name = "dpa", version, about = "Deadlock-freedom analysis for networks of communicating processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// Override a model constant, e.g. `--const N=10`.
    #[arg(long = "const", value_name = "NAME=VALUE", global = true, value_parser = parse_const)]
    consts: Vec<(String, i64)>,
    /// Largest state space compiled for one process.
    #[arg(long, value_name = "N", global = true)]
    state_limit: Option<usize>,
    /// Worker threads for independent checks.
    #[arg(long, env = "DPA_WORKERS", global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full method: liveness, decomposition and pattern checks.
    Check {
        model: PathBuf,
        /// Pattern descriptor for an essential subnetwork; may be repeated.
        #[arg(long = "pattern", value_name = "FILE")]
        patterns: Vec<PathBuf>,
        /// Cross-check with a global state-space exploration.
        #[arg(long)]
        oracle: bool,
        #[arg(long, value_name = "N", default_value_t = 2_000_000)]
        oracle_limit: usize,
        /// Write communication and snapshot graphs here as DOT.
        #[arg(long, value_name = "DIR")]
        dot_dir: Option<PathBuf>,
        /// Write the machine-readable report here (`-` for stdout).
        #[arg(long, value_name = "OUT")]
        json: Option<PathBuf>,
        /// Sweep a constant instead, e.g. `N=3,5,10`, and print timings.
        #[arg(long, value_name = "SPEC")]
        bench: Option<String>,
    },
    /// Find bridges and check each for conflict freedom.
    Decompose { model: PathBuf },
    /// Check a single edge for conflict freedom; components by index or name.
    Conflict { model: PathBuf, i: String, j: String },
    /// Check the whole network against one pattern descriptor.
    Pattern {
        model: PathBuf,
        descriptor: PathBuf,
        /// Print the resolved descriptor first.
        #[arg(long)]
        echo: bool,
    },
    /// Explore the global state space for deadlocks.
    Oracle {
        model: PathBuf,
        #[arg(long, value_name = "N", default_value_t = 2_000_000)]
        limit: usize,
    },
    /// Time the method, and optionally the oracle, over a range of sizes.
    Bench {
        model: PathBuf,
        /// Constant to sweep, e.g. `N=3,5,10,20`.
        #[arg(long, value_name = "SPEC")]
        sweep: String,
        #[arg(long = "pattern", value_name = "FILE")]
        patterns: Vec<PathBuf>,
        /// Run the oracle for sizes up to this value.
        #[arg(long, value_name = "N")]
        oracle_max: Option<i64>,
        #[arg(long, value_name = "OUT")]
        json: Option<PathBuf>,
    },
}

fn parse_const(s: &str) -> Result<(String, i64), String> {
    let (k, v) = s.split_once('=').ok_or("expected NAME=VALUE")?;
    let v = v.trim().parse().map_err(|e| format!("`{v}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_sweep(s: &str) -> Result<(String, Vec<i64>)> {
    let (k, vs) = s.split_once('=').ok_or_else(|| anyhow!("sweep `{s}` should look like N=3,5,10"))?;
    let vs = vs.split(',').map(|v| v.trim().parse::<i64>().with_context(|| format!("sweep value `{v}`"))).collect::<Result<Vec<_>>>()?;
    if vs.is_empty() {
        bail!("sweep `{s}` lists no values");
    }
    Ok((k.trim().to_string(), vs))
}

struct Loaded {
    net: Network,
    descriptors: Vec<PatternDescriptor>,
}

fn load(g: &Global, model: &Path, consts: &[(String, i64)], patterns: &[PathBuf]) -> Result<Loaded> {
    let mut src = SourceFile::read(model).with_context(|| format!("reading {}", model.display()))?;
    let Some(decl) = src.parse() else { bail!("{}", src.render_diagnostics().trim_end()) };
    let el = match elaborate_with(&decl, consts) {
        Ok(el) => el,
        Err(DslError::Syntax(ds)) => {
            src.diagnostics = ds;
            bail!("{}", src.render_diagnostics().trim_end())
        }
        Err(e) => bail!("{}:{e}", src.path),
    };
    for w in &el.warnings {
        log::warn!("{}:{w}", src.path);
    }
    let mut net = el.network;
    if let Some(limit) = g.state_limit {
        net = net.with_state_limit(limit);
    }
    let mut descriptors = Vec::new();
    for p in patterns {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        descriptors.push(parse_descriptor(&text, &net).with_context(|| format!("descriptor {}", p.display()))?);
    }
    Ok(Loaded { net, descriptors })
}

fn component(net: &Network, s: &str) -> Result<usize> {
    if let Some(i) = net.index_of(s) {
        return Ok(i);
    }
    match s.parse::<usize>() {
        Ok(i) if i < net.len() => Ok(i),
        _ => bail!("no component `{s}`"),
    }
}

fn write_out(path: &Path, text: &str) -> Result<()> {
    if path == Path::new("-") {
        println!("{text}");
        Ok(())
    } else {
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

fn residual(g: &CommGraph, removed: &[(usize, usize)]) -> CommGraph {
    CommGraph { nodes: g.nodes, edges: g.edges.iter().filter(|e| !removed.contains(&(e.a, e.b))).cloned().collect() }
}

fn verdict_code(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn bench(g: &Global, model: &Path, spec: &str, patterns: &[PathBuf], oracle_max: Option<i64>, json: Option<&Path>) -> Result<ExitCode> {
    let (key, sizes) = parse_sweep(spec)?;
    println!("{:>6} {:>11} {:>12} {:>10} {:>12} {:>10}", key, "components", "result", "dpa (s)", "oracle", "oracle (s)");
    let mut rows = Vec::new();
    let mut all = true;
    for n in sizes {
        let mut consts = g.consts.clone();
        consts.retain(|(k, _)| *k != key);
        consts.push((key.clone(), n));
        let l = load(g, model, &consts, patterns)?;
        let t = Instant::now();
        let r = run_dpa(&l.net, &l.descriptors, &DpaOptions::default())?;
        let dpa_time = t.elapsed();
        all &= r.is_proven();
        let (oracle, oracle_time) = if oracle_max.is_some_and(|m| n <= m) {
            let o = explore_global(&l.net, 50_000_000)?;
            let v = match o.verdict {
                OracleVerdict::DeadlockFree => "free",
                OracleVerdict::Deadlock(_) => "deadlock",
                OracleVerdict::LimitReached { .. } => "limit",
            };
            (Some((v, o.states)), Some(o.elapsed))
        } else {
            (None, None)
        };
        let result = if r.is_proven() { "proven" } else { "inconclusive" };
        println!(
            "{:>6} {:>11} {:>12} {:>10.4} {:>12} {:>10}",
            n,
            l.net.len(),
            result,
            secs(dpa_time),
            oracle.map(|(v, s)| format!("{v}/{s}")).unwrap_or_else(|| "-".into()),
            oracle_time.map(|t| format!("{:.4}", secs(t))).unwrap_or_else(|| "-".into()),
        );
        rows.push(json!({
            "size": n,
            "components": l.net.len(),
            "result": result,
            "dpa_seconds": secs(dpa_time),
            "oracle": oracle.map(|(v, s)| json!({"verdict": v, "states": s, "seconds": oracle_time.map(secs)})),
        }));
    }
    if let Some(p) = json {
        write_out(p, &serde_json::to_string_pretty(&json!({"constant": key, "rows": rows}))?)?;
    }
    Ok(verdict_code(all))
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    match &cli.command {
        Command::Check { model, bench: Some(spec), patterns, json, .. } => bench(g, model, spec, patterns, None, json.as_deref()),
        Command::Check { model, patterns, oracle, oracle_limit, dot_dir, json, bench: None } => {
            let l = load(g, model, &g.consts, patterns)?;
            let r = run_dpa(&l.net, &l.descriptors, &DpaOptions { oracle: *oracle, oracle_limit: *oracle_limit })?;
            print!("{}", summarise(&l.net, &r));
            if let Some(dir) = dot_dir {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let cg = l.net.comm_graph();
                let removed = r.decomposition.as_ref().map(|d| d.removed_edges.clone()).unwrap_or_default();
                write_out(&dir.join("comm.dot"), &comm_graph_dot(&l.net, &cg, &removed))?;
                write_out(&dir.join("residual.dot"), &comm_graph_dot(&l.net, &residual(&cg, &removed), &[]))?;
                if let Some(w) = r.oracle.as_ref().and_then(|o| o.witness()) {
                    write_out(&dir.join("snapshot.dot"), &snapshot_dot(&l.net, &w.snapshot, &w.cycle))?;
                }
            }
            if let Some(p) = json {
                write_out(p, &emit_report(&r))?;
            }
            Ok(verdict_code(r.is_proven()))
        }
        Command::Decompose { model } => {
            let l = load(g, model, &g.consts, &[])?;
            let d = decompose(&l.net)?;
            let name = |i: usize| l.net.name(i).to_string();
            for c in &d.checks {
                let v = match &c.verdict {
                    Verdict::ConflictFree => "conflict-free".to_string(),
                    Verdict::PossibleConflict(cex) => format!(
                        "possible conflict: {} after <{}>",
                        l.net.describe_violation(cex),
                        l.net.render_trace(&cex.trace).join(", ")
                    ),
                };
                println!("bridge ({}, {}): {v}", name(c.edge.0), name(c.edge.1));
            }
            for w in &d.warnings {
                println!("warning: {w}");
            }
            for (k, s) in d.essential_subnetworks.iter().enumerate() {
                println!("subnetwork {k}: {{{}}}", s.iter().map(|&i| name(i)).collect::<Vec<_>>().join(", "));
            }
            Ok(verdict_code(d.all_singular))
        }
        Command::Conflict { model, i, j } => {
            let l = load(g, model, &g.consts, &[])?;
            let (i, j) = (component(&l.net, i)?, component(&l.net, j)?);
            let c = check_conflict_free(&l.net, i, j)?;
            match &c.verdict {
                Verdict::ConflictFree => println!("({}, {}) is conflict-free", l.net.name(i), l.net.name(j)),
                Verdict::PossibleConflict(cex) => println!(
                    "({}, {}) may conflict: {} after <{}>",
                    l.net.name(i),
                    l.net.name(j),
                    l.net.describe_violation(cex),
                    l.net.render_trace(&cex.trace).join(", ")
                ),
            }
            Ok(verdict_code(c.is_conflict_free()))
        }
        Command::Pattern { model, descriptor, echo } => {
            let l = load(g, model, &g.consts, std::slice::from_ref(descriptor))?;
            let d = &l.descriptors[0];
            if *echo {
                print!("{}", echo_descriptor(d, &l.net));
            }
            let v = check_pattern(d, &Scope::new(&l.net, &d.components())?)?;
            for f in v.failures() {
                println!("{f}");
            }
            println!("{}: {}", v.pattern, if v.adherent { "adherent" } else { "not adherent" });
            Ok(verdict_code(v.adherent))
        }
        Command::Oracle { model, limit } => {
            let l = load(g, model, &g.consts, &[])?;
            let o = explore_global(&l.net, *limit)?;
            match &o.verdict {
                OracleVerdict::DeadlockFree => println!("deadlock free ({} states)", o.states),
                OracleVerdict::Deadlock(w) => {
                    println!("deadlock after <{}>", w.trace.join(", "));
                    let cycle: Vec<&str> = w.cycle.iter().map(|&i| l.net.name(i)).collect();
                    println!("ungranted requests: {}", cycle.join(" -> "));
                }
                OracleVerdict::LimitReached { frontier } => println!("gave up after {} states, {frontier} pending", o.states),
            }
            Ok(verdict_code(o.is_deadlock_free()))
        }
        Command::Bench { model, sweep, patterns, oracle_max, json } => bench(g, model, sweep, patterns, *oracle_max, json.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    #[cfg(feature = "parallel")]
    if let Some(n) = cli.global.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("worker pool: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    if cli.global.workers.is_some() {
        log::warn!("built without the parallel feature; worker count ignored");
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
