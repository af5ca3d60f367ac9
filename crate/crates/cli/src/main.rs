use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use newsbias::pipeline::toy::write_toy_corpus;
use newsbias::pipeline::{err_chain, RunOptions, Runner, Stage};

/// Measures look-ahead bias and distraction in news-sentiment backtests by
/// scoring every headline twice, as published and with the company
/// anonymized.
///
/// Without a subcommand every stage runs in order. Exit codes: 0 ok,
/// 2 configuration error, 3 stage failure.
#[derive(Parser, Debug)]
#[command(name = "newsbias", version)]
struct Cli {
    /// Run config (TOML); relative paths inside it resolve against its directory.
    #[arg(long, global = true, value_name = "PATH", default_value = "newsbias.toml")]
    config: PathBuf,

    /// Score only from the response cache; no network calls.
    #[arg(long, global = true)]
    offline: bool,

    /// Seed for the synthetic world, overriding `synthetic.seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Run only this stage: synth, anonymize, score, backtest, stats or report.
    #[arg(long, global = true, value_name = "NAME", value_parser = parse_stage)]
    stage: Option<Stage>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Every stage in order (the default).
    Run,
    /// Generate a synthetic world into the corpus paths.
    Synth,
    /// Write anonymized.csv (with span counts) and replaced_headlines.csv.
    Anonymize,
    /// Score original and replaced headlines into scores.csv.
    Score,
    /// Aggregate signals and write daily and cumulative return CSVs.
    Backtest,
    /// Run the statistical comparisons into stats.json.
    Stats,
    /// Render report tables from stats.json.
    Report,
    /// Write the bundled 200-headline toy corpus and a config into DIR.
    Toy {
        #[arg(value_name = "DIR")]
        dir: PathBuf,
    },
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    Stage::parse(s).ok_or_else(|| format!("unknown stage {s:?}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stage = match (&cli.command, cli.stage) {
        (Some(Command::Toy { dir }), _) => {
            return match std::fs::create_dir_all(dir)
                .map_err(|e| e.to_string())
                .and_then(|_| write_toy_corpus(dir).map_err(|e| err_chain(&e)))
            {
                Ok(cfg) => {
                    println!("{}", cfg.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("newsbias: {e}");
                    ExitCode::from(3)
                }
            };
        }
        (None | Some(Command::Run), s) => s,
        (Some(c), s) => {
            let from_command = match c {
                Command::Synth => Stage::Synth,
                Command::Anonymize => Stage::Anonymize,
                Command::Score => Stage::Score,
                Command::Backtest => Stage::Backtest,
                Command::Stats => Stage::Stats,
                Command::Report => Stage::Report,
                Command::Run | Command::Toy { .. } => unreachable!(),
            };
            if s.is_some_and(|s| s != from_command) {
                eprintln!(
                    "newsbias: --stage {} conflicts with the {from_command} subcommand",
                    s.unwrap()
                );
                return ExitCode::from(2);
            }
            Some(from_command)
        }
    };
    let options = RunOptions {
        offline: cli.offline,
        seed: cli.seed,
    };
    let result = Runner::from_path(&cli.config, options).and_then(|r| {
        r.run(stage)?;
        Ok(r.output_dir())
    });
    match result {
        Ok(out) => {
            println!("{}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("newsbias: {}", err_chain(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
