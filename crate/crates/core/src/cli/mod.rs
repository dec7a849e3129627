//! The `mcmc-cert` command-line front end.
//!
//! Every parameter can come from a flag or from a `key = value` file given
//! with `--config`; flags win. Each output record carries
//! `schema_version`, the command, the master seed and a hash of the
//! effective parameters.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use config::Params;

pub const SCHEMA_VERSION: u32 = 1;

/// Exit code for a failed verification suite.
pub const EXIT_VERIFY_FAILED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "mcmc-cert", version, about = "Explicit error bounds and run-length planning for MCMC")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// `key = value` file; flags override its entries.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for replications and grid scans.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// JSON-lines output.
    #[arg(long, global = true)]
    pub json: bool,
    /// Write the report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Run even when the step budget is exceeded.
    #[arg(long, global = true)]
    pub force: bool,
    /// Skip the longest verification runs.
    #[arg(long, global = true)]
    pub quick: bool,
    /// Write the simulated trajectory as CSV.
    #[arg(long, global = true, value_name = "PATH")]
    pub dump_trace: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convergence rate and prefactor over a gamma grid.
    Rates(commands::RatesArgs),
    /// Burn-in and run length for an (eps, alpha)-approximation.
    Plan(commands::PlanArgs),
    /// Run an estimator on a preset chain.
    Simulate(commands::SimulateArgs),
    /// Plan for the hierarchical random effects model.
    Hrem(commands::HremArgs),
    /// Occupation frequencies of the adaptive toy examples.
    AdaptiveDemo(commands::AdaptiveArgs),
    /// Run the acceptance suite.
    Verify(commands::VerifyArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Rates(_) => "rates",
            Command::Plan(_) => "plan",
            Command::Simulate(_) => "simulate",
            Command::Hrem(_) => "hrem",
            Command::AdaptiveDemo(_) => "adaptive-demo",
            Command::Verify(_) => "verify",
        }
    }
}

/// Resolved global settings shared by all commands.
pub struct Context {
    pub params: Params,
    pub seed: u64,
    pub force: bool,
    pub quick: bool,
    pub dump_trace: Option<PathBuf>,
    json: bool,
    out: Option<PathBuf>,
    command: &'static str,
    sink: Option<Box<dyn Write + Send>>,
    hash: Option<String>,
}

impl Context {
    pub fn json(&self) -> bool {
        self.json
    }

    /// Fixes the parameter hash; call once all parameters are resolved.
    fn seal(&mut self) -> Result<()> {
        for k in self.params.unused() {
            eprintln!("warning: config key `{k}` is not used by `{}`", self.command);
        }
        self.hash = Some(self.params.hash(self.command));
        let sink: Box<dyn Write + Send> = match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout())),
        };
        self.sink = Some(sink);
        Ok(())
    }

    fn sink(&mut self) -> Result<&mut Box<dyn Write + Send>> {
        if self.sink.is_none() {
            self.seal()?;
        }
        Ok(self.sink.as_mut().expect("sealed"))
    }

    /// One JSON record: the header fields followed by `body`.
    pub fn record_value(&mut self, kind: &str, body: Value) -> Result<Value> {
        if self.hash.is_none() {
            self.seal()?;
        }
        let mut m = Map::new();
        m.insert("schema_version".into(), json!(SCHEMA_VERSION));
        m.insert("command".into(), json!(self.command));
        m.insert("kind".into(), json!(kind));
        m.insert("seed".into(), json!(self.seed));
        m.insert("config_hash".into(), json!(self.hash.clone().expect("sealed")));
        match body {
            Value::Object(b) => m.extend(b),
            other => {
                m.insert("value".into(), other);
            }
        }
        Ok(Value::Object(m))
    }

    /// Writes `body` as a JSON line, or `human` in table mode. Records
    /// with an empty `kind` are table-only.
    pub fn emit(&mut self, kind: &str, body: Value, human: &str) -> Result<()> {
        if self.json {
            if kind.is_empty() {
                return Ok(());
            }
            let rec = self.record_value(kind, body)?;
            let s = self.sink()?;
            serde_json::to_writer(&mut *s, &rec).map_err(|e| Error::Io(e.into()))?;
            writeln!(s)?;
        } else if !human.is_empty() {
            let s = self.sink()?;
            writeln!(s, "{human}")?;
        }
        Ok(())
    }

    /// Table-mode header naming the seed and parameter hash.
    pub fn banner(&mut self) -> Result<()> {
        if self.json {
            return Ok(());
        }
        if self.hash.is_none() {
            self.seal()?;
        }
        let line = format!(
            "# mcmc-cert {} | schema {SCHEMA_VERSION} | seed {} | config {}",
            self.command,
            self.seed,
            self.hash.as_deref().unwrap_or("")
        );
        self.emit("", Value::Null, &line)
    }

    fn finish(&mut self) -> Result<()> {
        if let Some(s) = self.sink.as_mut() {
            s.flush()?;
        }
        Ok(())
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let file = match &cli.global.config {
        Some(p) => config::load_config(p)?,
        None => Default::default(),
    };
    let params = Params::new(file);
    let g = &cli.global;
    let seed = params.get("seed", g.seed, crate::seeds::DEFAULT_SEED)?;
    let workers = params.setting("workers", g.workers)?;
    let json = params.setting("json", g.json.then_some(true))?.unwrap_or(false);
    let out = params.setting("out", g.out.clone())?;
    let force = params.setting("force", g.force.then_some(true))?.unwrap_or(false);
    let quick = params.get("quick", g.quick.then_some(true), false)?;
    let dump_trace = params.setting("dump-trace", g.dump_trace.clone())?;
    let mut ctx = Context {
        params,
        seed,
        force,
        quick,
        dump_trace,
        json,
        out,
        command: cli.command.name(),
        sink: None,
        hash: None,
    };
    let run = |ctx: &mut Context| -> Result<i32> {
        let code = match &cli.command {
            Command::Rates(a) => commands::rates(a, ctx),
            Command::Plan(a) => commands::plan(a, ctx),
            Command::Simulate(a) => commands::simulate(a, ctx),
            Command::Hrem(a) => commands::hrem(a, ctx),
            Command::AdaptiveDemo(a) => commands::adaptive_demo(a, ctx),
            Command::Verify(a) => commands::verify(a, ctx),
        };
        let flushed = ctx.finish();
        let code = code?;
        flushed?;
        Ok(code)
    };
    match workers {
        Some(0) => Err(Error::Validation("--workers must be at least 1".into())),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::Validation(format!("cannot start {w} workers: {e}")))?;
            pool.install(|| run(&mut ctx))
        }
        None => run(&mut ctx),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
