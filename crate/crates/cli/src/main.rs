//! `apiscope`: discover API endpoints in captured HTTP traffic.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use apiscope_core::bench::{run_bench, to_csv};
use apiscope_core::eval::{csv_row, report, MatchMode, CSV_HEADER};
use apiscope_core::ingest::{parse_har, parse_jsonl, write_dataset};
use apiscope_core::noise::{inject, synth_corpus, NoiseKind};
use apiscope_core::pipeline::{
    cluster_document, discover, dropped_lines, normalized_lines, parse_cluster_document,
    template_document,
};
use apiscope_core::Dataset;
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{FileConfig, Overrides};

#[derive(Parser)]
#[command(name = "apiscope", version, about = "Discover API endpoints in captured HTTP traffic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a capture to canonical JSONL.
    Ingest {
        #[command(flatten)]
        input: Input,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the discovery pipeline and write the cluster document.
    Discover {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        tuning: Tuning,
        /// Write mined templates as JSON.
        #[arg(long, value_name = "FILE")]
        dump_templates: Option<PathBuf>,
        /// Write normalized requests as METHOD<TAB>path lines.
        #[arg(long, value_name = "FILE")]
        dump_normalized: Option<PathBuf>,
        /// Write filtered-out requests and their reasons as JSONL.
        #[arg(long, value_name = "FILE")]
        emit_dropped: Option<PathBuf>,
    },
    /// Inject Lexify or Interfere noise into a dataset.
    Noise {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score a cluster document against a labeled dataset.
    Evaluate {
        #[command(flatten)]
        input: Input,
        /// Cluster document produced by `discover`.
        #[arg(long)]
        clusters: PathBuf,
        /// JSON report; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a one-row CSV report.
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
        /// Majority-overlap matching instead of exact request sets.
        #[arg(long)]
        lenient: bool,
        /// Recorded in the CSV row.
        #[arg(long, value_enum)]
        kind: Option<Kind>,
        #[arg(long, default_value_t = 0.0)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sweep noise kinds, ratios and seeds; one CSV row per run.
    Bench {
        /// Labeled dataset; a synthetic corpus is generated if omitted.
        #[arg(long = "in", value_name = "FILE")]
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        tuning: Tuning,
        /// Noise kinds to sweep (comma separated).
        #[arg(long, value_enum, value_delimiter = ',')]
        kind: Vec<Kind>,
        /// Noise ratios (comma separated).
        #[arg(long, value_delimiter = ',')]
        ratio: Vec<f64>,
        /// Injection seeds (comma separated).
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long)]
        lenient: bool,
    },
}

#[derive(Args)]
struct Input {
    #[arg(long = "in", value_name = "FILE")]
    path: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct Tuning {
    /// TOML configuration file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Edge threshold of the similarity graph.
    #[arg(long)]
    theta: Option<f64>,
    /// Weight of the clustering term.
    #[arg(long)]
    lambda: Option<f64>,
    /// Logistic gate cut-off.
    #[arg(long)]
    tau: Option<f64>,
    /// Skip the noise filter.
    #[arg(long)]
    disable_nf: bool,
    /// Put every request in a single group before refinement.
    #[arg(long)]
    disable_templates: bool,
    /// Use k-means instead of graph training.
    #[arg(long)]
    force_kmeans: bool,
}

impl Tuning {
    fn resolve(&self) -> Result<FileConfig> {
        let mut file = FileConfig::load(self.config.as_deref())?;
        Overrides {
            seed: self.seed,
            theta: self.theta,
            lambda: self.lambda,
            tau: self.tau,
            disable_nf: self.disable_nf,
            disable_templates: self.disable_templates,
            force_kmeans: self.force_kmeans,
        }
        .apply(&mut file);
        Ok(file)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Har,
    Jsonl,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Lexify,
    Interfere,
}

impl From<Kind> for NoiseKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Lexify => NoiseKind::Lexify,
            Kind::Interfere => NoiseKind::Interfere,
        }
    }
}

fn load(path: &Path, format: Option<Format>) -> Result<Dataset> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let format = format.unwrap_or_else(|| {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
            Some(e) if e == "har" => Format::Har,
            _ => Format::Jsonl,
        }
    });
    let mut dataset = match format {
        Format::Har => {
            let ingested = parse_har(&bytes).with_context(|| format!("in {}", path.display()))?;
            for w in &ingested.warnings {
                eprintln!("warning: {w}");
            }
            ingested.dataset
        }
        Format::Jsonl => {
            let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
            parse_jsonl(&text).with_context(|| format!("in {}", path.display()))?
        }
    };
    dataset.source = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(dataset)
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest { input, out } => {
            let dataset = load(&input.path, input.format)?;
            emit(out.as_deref(), &write_dataset(&dataset))
        }
        Command::Discover {
            input,
            out,
            tuning,
            dump_templates,
            dump_normalized,
            emit_dropped,
        } => {
            let dataset = load(&input.path, input.format)?;
            let config = tuning.resolve()?.pipeline();
            let found = discover(&dataset, &config)?;
            if let Some(p) = dump_templates {
                emit(Some(&p), &template_document(&found.groups))?;
            }
            if let Some(p) = dump_normalized {
                emit(Some(&p), &normalized_lines(&found.normalized))?;
            }
            if let Some(p) = emit_dropped {
                emit(Some(&p), &dropped_lines(&found.filter.dropped))?;
            }
            emit(out.as_deref(), &cluster_document(&found.clusters))
        }
        Command::Noise {
            input,
            out,
            kind,
            ratio,
            seed,
        } => {
            let dataset = load(&input.path, input.format)?;
            let noisy = inject(&dataset, kind.into(), ratio, seed)?;
            emit(out.as_deref(), &write_dataset(&noisy))
        }
        Command::Evaluate {
            input,
            clusters,
            out,
            csv,
            lenient,
            kind,
            ratio,
            seed,
        } => {
            let dataset = load(&input.path, input.format)?;
            let Some(truth) = dataset.ground_truth() else {
                bail!(
                    "evaluation needs ground truth: no record in {} carries a label",
                    input.path.display()
                );
            };
            let text = fs::read_to_string(&clusters)
                .with_context(|| format!("cannot read {}", clusters.display()))?;
            let found = parse_cluster_document(&text)?;
            let mode = if lenient { MatchMode::Lenient } else { MatchMode::Exact };
            let noise_type = kind.map_or("none".to_string(), |k| NoiseKind::from(k).to_string());
            let echo = serde_json::json!({
                "dataset": dataset.source,
                "clusters": clusters.display().to_string(),
                "match_mode": mode,
                "noise_type": noise_type,
                "noise_ratio": ratio,
                "seed": seed,
            });
            let r = report(&found, &truth, mode, echo)?;
            if let Some(p) = csv {
                let row = csv_row(&dataset.source, &noise_type, ratio, seed, &r);
                emit(Some(&p), &format!("{CSV_HEADER}\n{row}\n"))?;
            }
            emit(out.as_deref(), &(serde_json::to_string_pretty(&r)? + "\n"))
        }
        Command::Bench {
            input,
            format,
            out,
            tuning,
            kind,
            ratio,
            seeds,
            lenient,
        } => {
            let file = tuning.resolve()?;
            let dataset = match &input {
                Some(p) => load(p, format)?,
                None => synth_corpus(&file.corpus)?,
            };
            let mut bench = file.bench.clone();
            if input.is_some() {
                bench.dataset_name = dataset.source.clone();
            }
            if !kind.is_empty() {
                bench.kinds = kind.into_iter().map(NoiseKind::from).collect();
            }
            if !ratio.is_empty() {
                bench.ratios = ratio;
            }
            if !seeds.is_empty() {
                bench.seeds = seeds;
            }
            if lenient {
                bench.match_mode = MatchMode::Lenient;
            }
            let rows = run_bench(&dataset, &file.pipeline(), &bench)?;
            emit(out.as_deref(), &to_csv(&rows))
        }
    }
}
