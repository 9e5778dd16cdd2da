//! `ttsa`: one binary for every stage of the pipeline.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 runtime failure.

mod campaign;
mod eval;
mod failure;
mod model;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use failure::Failure;

#[derive(Parser, Debug)]
#[command(name = "ttsa", version, about = "Frozen-backbone TTS adapter toolkit")]
struct Cli {
    /// Print a machine-readable JSON result on stdout.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded letter-to-sound corpus (manifest.jsonl + mels/).
    GenCorpus(model::GenCorpusArgs),
    /// Train the adapter against the frozen backbone.
    Train(model::TrainArgs),
    /// Dump the adapter output h_ctx for a text.
    Embed(model::EmbedArgs),
    /// Dump the merged code-switch conditioning for `~`-annotated text.
    MergeCs(model::MergeArgs),
    /// Synthesize a mel spectrogram by Euler sampling.
    Synth(model::SynthArgs),
    /// Word error metrics over line-aligned reference/hypothesis files.
    EvalWer(eval::WerArgs),
    /// Cosine-similarity statistics over embedding pairs.
    EvalSim(eval::SimArgs),
    /// Listening-test campaigns.
    #[command(subcommand)]
    Campaign(CampaignCommand),
}

#[derive(Subcommand, Debug)]
enum CampaignCommand {
    /// Validate a manifest and write the built campaign.
    Build(campaign::BuildArgs),
    /// Serve campaigns over HTTP.
    Serve(campaign::ServeArgs),
    /// Aggregate a rating log into CSV.
    Report(campaign::ReportArgs),
}

/// Common output switch passed to every command.
#[derive(Debug, Clone, Copy)]
pub struct Output {
    pub json: bool,
}

impl Output {
    /// Prints `value` as JSON, or `human` otherwise.
    pub fn emit(self, value: serde_json::Value, human: impl FnOnce() -> String) {
        if self.json {
            println!("{}", serde_json::to_string(&value).expect("json value serializes"));
        } else {
            println!("{}", human());
        }
    }
}

pub fn out_parent(path: &std::path::Path) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::runtime(format!("{}: {e}", dir.display())))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let out = Output { json: cli.json };
    match cli.command {
        Command::GenCorpus(a) => model::gen_corpus(a, out),
        Command::Train(a) => model::train(a, out),
        Command::Embed(a) => model::embed(a, out),
        Command::MergeCs(a) => model::merge_cs(a, out),
        Command::Synth(a) => model::synth(a, out),
        Command::EvalWer(a) => eval::wer(a, out),
        Command::EvalSim(a) => eval::sim(a, out),
        Command::Campaign(CampaignCommand::Build(a)) => campaign::build(a, out),
        Command::Campaign(CampaignCommand::Serve(a)) => campaign::serve(a, out),
        Command::Campaign(CampaignCommand::Report(a)) => campaign::report(a, out),
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
    let json = cli.json;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if json {
                println!("{}", serde_json::json!({ "error": f.message(), "code": f.code() }));
            }
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
