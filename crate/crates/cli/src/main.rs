use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use tkgqa::eval::{efficiency_table, render_report};
use tkgqa::pipeline::{Pipeline, PipelineError, RunConfig};

#[derive(Parser)]
#[command(
    name = "tkgqa",
    version,
    about = "Question answering over temporal knowledge graphs by recursive decomposition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the corpus and write the normalized fact list.
    Ingest(Common),
    /// Embed the facts and report the index.
    Index(Common),
    /// Decompose every question into a tree.
    Decompose(Common),
    /// Solve the decomposed trees.
    Solve(Common),
    /// Score solved questions against the gold answers.
    Eval(Common),
    /// Average tree depth, branching and API calls.
    Stats(Common),
    /// All stages in order.
    Run(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// scripted, cached or live.
    #[arg(long)]
    llm_mode: Option<String>,
    #[arg(long)]
    top_k: Option<usize>,
    /// Keep only the first n questions (a seeded sample with --seed).
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Model for reasoning and aggregation.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    decompose_model: Option<String>,
    #[arg(long)]
    temperature: Option<f32>,
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Write every served response to this fixture file.
    #[arg(long)]
    record_fixtures: Option<PathBuf>,
    #[arg(long)]
    parallelism: Option<usize>,
    /// rules or llm-assisted.
    #[arg(long)]
    aggregation: Option<String>,
    /// Flag answers that contradict a date bound in their question.
    #[arg(long)]
    verify_temporal: bool,
}

impl Common {
    fn load(&self) -> Result<Pipeline, PipelineError> {
        let mut cfg = RunConfig::load(&self.config)?;
        let cwd = std::env::current_dir().unwrap_or_default();
        if let Some(v) = &self.llm_mode {
            cfg.llm_mode = v.clone();
        }
        if let Some(v) = self.top_k {
            cfg.top_k = v;
        }
        if let Some(v) = self.limit {
            cfg.limit = Some(v);
        }
        if let Some(v) = self.seed {
            cfg.seed = Some(v);
        }
        if let Some(v) = &self.model {
            cfg.models.reason = v.clone();
            cfg.models.aggregate = v.clone();
        }
        if let Some(v) = &self.decompose_model {
            cfg.models.decompose = v.clone();
        }
        if let Some(v) = self.temperature {
            cfg.temperature = v;
        }
        if let Some(v) = &self.fixtures {
            cfg.fixture_path = Some(cwd.join(v));
        }
        if let Some(v) = &self.record_fixtures {
            cfg.record_fixtures = Some(cwd.join(v));
        }
        if let Some(v) = self.parallelism {
            cfg.parallelism = v;
        }
        if let Some(v) = &self.aggregation {
            cfg.aggregation = v.clone();
        }
        cfg.verify_temporal |= self.verify_temporal;
        Pipeline::new(cfg)
    }
}

fn print_json(value: serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(&value).expect("output serializes"));
}

fn execute(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Ingest(c) => print_json(json!(c.load()?.ingest()?)),
        Command::Index(c) => print_json(json!(c.load()?.index()?)),
        Command::Decompose(c) => {
            let p = c.load()?;
            let gw = p.gateway()?;
            let result = p.decompose(&gw);
            p.save_recording(&gw)?;
            let trees = result?;
            let fallbacks = trees.iter().filter(|t| t.note.is_some()).count();
            p.write_manifest("decompose", trees.len(), gw.calls())?;
            print_json(json!({ "questions": trees.len(), "fallbacks": fallbacks, "llm_calls": gw.calls() }));
        }
        Command::Solve(c) => {
            let p = c.load()?;
            let gw = p.gateway()?;
            let result = p.solve(&gw);
            p.save_recording(&gw)?;
            let solved = result?;
            p.write_manifest("solve", solved.len(), gw.calls())?;
            print_json(json!({
                "questions": solved.len(),
                "llm_calls": gw.calls(),
                "backend": gw.backend_name(),
            }));
        }
        Command::Eval(c) => {
            let p = c.load()?;
            let summary = p.eval()?;
            p.write_manifest("eval", summary.overall.count, 0)?;
            print!("{}", render_report(&summary));
        }
        Command::Stats(c) => print!("{}", efficiency_table(&c.load()?.stats()?)),
        Command::Run(c) => {
            let p = c.load()?;
            let outcome = p.run()?;
            print!("{}", render_report(&outcome.summary));
            eprintln!(
                "llm calls: {}; manifest: {}",
                outcome.llm_calls,
                p.artifact(tkgqa::pipeline::MANIFEST_FILE).display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::from(if e.kind() == "config" { 2 } else { 1 })
        }
    }
}
