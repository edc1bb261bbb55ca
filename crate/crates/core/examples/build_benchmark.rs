//! End to end: write a random corpus, synthesize a benchmark with images
//! and a manifest, then check the manifest against the files.
//!
//! cargo run --release --example build_benchmark -- [out_dir] [tables] [train] [eval] [workers]
//!
//! Full scale (8000 train / 1000 eval per task) needs about 12000 tables
//! so that enough of them land in the eval split.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tablekit::format::{serialize, TableFormat};
use tablekit::gen::{random_table, TableShape};
use tablekit::pipeline::{cmd_stats, cmd_synth, PipelineConfig};

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let out: String = arg(1, "bench_out".to_string());
    let (n_tables, train, eval, workers) = (arg(2, 500usize), arg(3, 80usize), arg(4, 10usize), arg(5, 0usize));
    let root = std::path::Path::new(&out);
    let corpus = root.join("corpus");
    std::fs::create_dir_all(&corpus)?;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let shape = TableShape { rows: (3, 9), cols: (2, 6), ..TableShape::default() };
    for i in 0..n_tables {
        let t = random_table(&mut rng, &shape);
        std::fs::write(corpus.join(format!("table{i:05}.html")), serialize(&t, TableFormat::Html)?)?;
    }

    let counts: String = ["TSD", "TCE", "TCL", "MCD", "RCE", "TR"]
        .iter()
        .map(|t| format!("{t} = {{ train = {train}, eval = {eval} }}\n"))
        .collect();
    let config = format!("master_seed = 17\noutput_dir = \"dataset\"\n[synth.counts]\n{counts}[[corpus]]\npath = \"corpus\"\n");
    std::fs::write(root.join("config.toml"), &config)?;
    let cfg = PipelineConfig::load(&root.join("config.toml"))?;
    let cfg = PipelineConfig { output_dir: cfg.resolve(&cfg.output_dir), ..cfg };

    let start = Instant::now();
    let manifest = cmd_synth(&cfg, workers)?;
    let took = start.elapsed();

    print!("{}", cmd_stats(&cfg.output_dir)?);
    println!("shortfall: {:?}", manifest.shortfall);
    println!("{} files, {} mismatched digests", manifest.files.len(), manifest.verify(&cfg.output_dir).len());
    println!("synthesized {} tables in {took:.1?}", manifest.tables.ingested);
    Ok(())
}
