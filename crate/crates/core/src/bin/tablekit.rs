use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use tablekit::format::TableFormat;
use tablekit::pipeline::{cmd_convert, cmd_eval, cmd_render, cmd_stats, cmd_synth, PipelineConfig};
use tablekit::render::StyleFamily;

#[derive(Parser)]
#[command(name = "tablekit", version, about = "Build table-image benchmarks and score predictions on them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a corpus, render it and write train/eval samples plus a manifest.
    Synth {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `master_seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Score a predictions file against gold samples.
    Eval {
        predictions: PathBuf,
        gold: PathBuf,
        /// Where the JSON report goes.
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Summarize a samples file or a synth output directory.
    Stats {
        path: PathBuf,
        /// Print JSON instead of the text table.
        #[arg(long)]
        json: bool,
    },
    /// Render one table file to SVG (or PNG when --out ends in .png).
    Render {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// WebPage, Excel or Markdown; drawn from the default mix if absent.
        #[arg(long)]
        style: Option<StyleFamily>,
    },
    /// Convert a table file between HTML, Markdown and LaTeX.
    Convert {
        input: PathBuf,
        /// Target format.
        #[arg(long)]
        format: TableFormat,
        /// Source format; guessed from the extension if absent.
        #[arg(long)]
        from: Option<TableFormat>,
        /// Output file; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Synth { config, seed, out, workers } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            } else {
                cfg.output_dir = cfg.resolve(&cfg.output_dir.clone());
            }
            let m = cmd_synth(&cfg, workers)?;
            for (task, c) in &m.counts {
                println!("{:<7} train {:>6}  eval {:>6}", task.as_str(), c.train, c.eval);
            }
            println!(
                "{} tables ingested, {} skipped, {} rendered, {} conversations",
                m.tables.ingested, m.tables.skipped, m.tables.rendered, m.conversations
            );
            for (task, s) in &m.shortfall {
                println!("shortfall {task}: train {} eval {}", s.train, s.eval);
            }
            println!("wrote {}", cfg.output_dir.display());
        }
        Command::Eval { predictions, gold, out, workers } => {
            let report = cmd_eval(&predictions, &gold, &out, workers)?;
            print!("{}", report.summary_table());
        }
        Command::Stats { path, json } => {
            let r = cmd_stats(&path)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                print!("{r}");
            }
        }
        Command::Render { input, out, seed, style } => {
            let s = cmd_render(&input, &out, style, seed)?;
            println!("{} ({} style)", out.display(), s.family);
        }
        Command::Convert { input, format, from, out } => {
            let text = cmd_convert(&input, from, format)?;
            match out {
                Some(p) => std::fs::write(&p, text).with_context(|| p.display().to_string())?,
                None => println!("{text}"),
            }
        }
    }
    Ok(())
}
