//! The `cyrep` command.
//!
//! Exit status: 0 on success, 1 when diagnostics, runtime errors or a
//! divergent simulation were reported, 2 for bad usage, 3 for internal
//! failures such as an unwritable output directory.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use cyrep_consensus::NetConfig;
use cyrep_core::determinism::NonDetRegistry;
use cyrep_core::lang::Program;
use cyrep_core::pipeline::{compile, expanded_files, SourceFile};
use cyrep_core::{standard_metaobjects, Diagnostic};
use cyrep_runtime::{machine_literals, parse_script, Cluster, ClusterConfig, Immediate, Interp};
use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_DIAGNOSTICS: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

/// Looked up in the working directory when `--nondet` is not given.
pub const DEFAULT_REGISTRY: &str = "nondet.registry";

/// Round trip assumed when the program never starts a machine.
const DEFAULT_RTT: u64 = 200;

#[derive(Debug, Parser)]
#[command(
    name = "cyrep",
    version,
    about = "Expand, check and run replicated Cyan-like programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the expanded program, one file per prototype.
    Expand {
        #[command(flatten)]
        input: Input,
        /// Output directory; files go to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report non-deterministic calls reachable from action methods.
    Check {
        #[command(flatten)]
        input: Input,
    },
    /// Run the program on a single machine.
    Run {
        #[command(flatten)]
        input: Input,
        /// Passed to `Program run:` after the program name and replica id.
        #[arg(last = true)]
        args: Vec<String>,
    },
    /// Run the program on simulated replicas and compare their contexts.
    Simulate {
        #[command(flatten)]
        input: Input,
        /// Defaults to the `numberProcess:` the program asks for.
        #[arg(long)]
        replicas: Option<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        drop: f64,
        #[arg(long, default_value_t = 0.0)]
        dup: f64,
        /// One-way delay bounds in milliseconds, as `min..max`.
        #[arg(long, value_parser = parse_delay)]
        delay: Option<(u64, u64)>,
        /// Calls to make, one `<time> <replica> <Prototype> <selector> <arg>...` per line.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Keep the decision logs in this directory instead of in memory.
        #[arg(long)]
        log_dir: Option<PathBuf>,
        /// Print every network event before the report.
        #[arg(long)]
        trace: bool,
    },
}

#[derive(Debug, Args)]
struct Input {
    /// Source files, or directories whose `.cyn` files are all read.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Registry of non-deterministic methods, `Prototype selector` per line.
    #[arg(long)]
    nondet: Option<PathBuf>,
    /// Leave out the built-in clock and random entries.
    #[arg(long)]
    no_default_registry: bool,
}

fn parse_delay(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s.split_once("..").ok_or("expected `min..max`")?;
    let lo = a.trim().parse::<u64>().map_err(|e| e.to_string())?;
    let hi = b.trim().parse::<u64>().map_err(|e| e.to_string())?;
    if lo > hi {
        return Err(format!("{lo} exceeds {hi}"));
    }
    Ok((lo, hi))
}

#[derive(Debug, Error)]
enum Failure {
    #[error("{0}")]
    Usage(String),
    /// Already printed.
    #[error("diagnostics reported")]
    Reported,
    #[error("{0}")]
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Reported => EXIT_DIAGNOSTICS,
            Failure::Internal(_) => EXIT_INTERNAL,
        }
    }
}

/// Runs one invocation. `args` includes the program name.
pub fn main_with<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let r = match cli.command {
        Command::Expand { input, out: dir } => expand(&input, dir.as_deref(), out, err),
        Command::Check { input } => check(&input, out, err),
        Command::Run { input, args } => run(&input, &args, out, err),
        Command::Simulate {
            input,
            replicas,
            seed,
            drop,
            dup,
            delay,
            script,
            log_dir,
            trace,
        } => {
            let opts = SimOptions {
                replicas,
                seed,
                drop,
                dup,
                delay,
                script,
                log_dir,
                trace,
            };
            simulate(&input, &opts, out, err)
        }
    };
    match r {
        Ok(code) => code,
        Err(f) => {
            if !matches!(f, Failure::Reported) {
                let _ = writeln!(err, "error: {f}");
            }
            f.code()
        }
    }
}

fn internal(e: impl std::fmt::Display) -> Failure {
    Failure::Internal(e.to_string())
}

/// Expands directories to their `.cyn` files, sorted by path.
fn read_sources(inputs: &[PathBuf]) -> Result<Vec<SourceFile>, Failure> {
    let mut paths = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x == "cyn"))
                .collect();
            found.sort();
            if found.is_empty() {
                return Err(Failure::Usage(format!("no .cyn files in {}", p.display())));
            }
            paths.extend(found);
        } else {
            paths.push(p.clone());
        }
    }
    paths
        .into_iter()
        .map(|p| {
            std::fs::read_to_string(&p)
                .map(|text| SourceFile::new(p.display().to_string(), text))
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", p.display())))
        })
        .collect()
}

fn registry(input: &Input) -> Result<NonDetRegistry, Vec<Diagnostic>> {
    let mut reg = if input.no_default_registry {
        NonDetRegistry::default()
    } else {
        NonDetRegistry::defaults()
    };
    let path = match &input.nondet {
        Some(p) => Some(p.clone()),
        None => Some(PathBuf::from(DEFAULT_REGISTRY)).filter(|p| p.is_file()),
    };
    if let Some(p) = path {
        reg.merge(&NonDetRegistry::load(&p).map_err(|d| vec![d])?);
    }
    Ok(reg)
}

fn report(diags: &[Diagnostic], err: &mut dyn Write) -> Failure {
    for d in diags {
        if writeln!(err, "{d}").is_err() {
            return internal("cannot write to stderr");
        }
    }
    Failure::Reported
}

/// Parse, expand and check.
fn build(input: &Input, err: &mut dyn Write) -> Result<Program, Failure> {
    let sources = read_sources(&input.inputs)?;
    let reg = registry(input).map_err(|d| report(&d, err))?;
    compile(&sources, &standard_metaobjects(Arc::new(reg))).map_err(|d| report(&d, err))
}

fn expand(
    input: &Input,
    dir: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<u8, Failure> {
    let program = build(input, err)?;
    let files = expanded_files(&program);
    match dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(internal)?;
            for (name, text) in &files {
                std::fs::write(dir.join(name), text).map_err(internal)?;
                writeln!(out, "{}", dir.join(name).display()).map_err(internal)?;
            }
        }
        None => {
            for (name, text) in &files {
                write!(out, "==> {name} <==\n{text}").map_err(internal)?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn check(input: &Input, out: &mut dyn Write, err: &mut dyn Write) -> Result<u8, Failure> {
    build(input, err)?;
    writeln!(out, "no non-deterministic calls reachable from actions").map_err(internal)?;
    Ok(EXIT_OK)
}

fn argv(replica: u32, extra: &[String]) -> Vec<String> {
    let mut v = vec!["cyrep".to_string(), replica.to_string()];
    v.extend(extra.iter().cloned());
    v
}

fn run(
    input: &Input,
    args: &[String],
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<u8, Failure> {
    let program = build(input, err)?;
    let mut it = Interp::new(&program, 0, 0);
    let r = it.run_main(&argv(0, args), &mut Immediate::default());
    for line in it.output() {
        writeln!(out, "{line}").map_err(internal)?;
    }
    match r {
        Ok(()) => Ok(EXIT_OK),
        Err(e) => {
            writeln!(err, "error: {}", e.0).map_err(internal)?;
            Ok(EXIT_DIAGNOSTICS)
        }
    }
}

struct SimOptions {
    replicas: Option<u32>,
    seed: u64,
    drop: f64,
    dup: f64,
    delay: Option<(u64, u64)>,
    script: Option<PathBuf>,
    log_dir: Option<PathBuf>,
    trace: bool,
}

fn simulate(
    input: &Input,
    o: &SimOptions,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<u8, Failure> {
    let calls = match &o.script {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", p.display())))?;
            parse_script(&text)
                .map_err(|e| Failure::Usage(format!("{}:{}: {}", p.display(), e.line, e.message)))?
        }
        None => Vec::new(),
    };
    let program = build(input, err)?;
    let literals = machine_literals(&program);
    let replicas = o.replicas.or(literals.map(|l| l.0)).unwrap_or(1);
    if replicas == 0 {
        return Err(Failure::Usage("--replicas must be at least 1".into()));
    }
    let rtt = literals.map_or(DEFAULT_RTT, |l| l.1).max(2);
    let mut cfg = ClusterConfig::new(replicas, rtt, o.seed);
    cfg.net = NetConfig {
        drop: o.drop,
        dup: o.dup,
        delay: o.delay.unwrap_or(cfg.net.delay),
        ..cfg.net
    };
    cfg.net
        .validate()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(dir) = &o.log_dir {
        std::fs::create_dir_all(dir).map_err(internal)?;
    }
    cfg.log_dir = o.log_dir.clone();
    cfg.trace = o.trace;
    let mut cluster = Cluster::new(&program, cfg).map_err(internal)?;
    cluster
        .schedule(calls)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let report = cluster.run();
    for line in &report.trace {
        writeln!(out, "{line}").map_err(internal)?;
    }
    for (i, lines) in report.outputs.iter().enumerate() {
        for line in lines {
            writeln!(out, "[{i}] {line}").map_err(internal)?;
        }
    }
    writeln!(out, "{report}").map_err(internal)?;
    for e in &report.errors {
        writeln!(err, "error: {e}").map_err(internal)?;
    }
    Ok(if report.converged() {
        EXIT_OK
    } else {
        EXIT_DIAGNOSTICS
    })
}
