use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use trendsum::detect::{detect_all, DetectionConfig};
use trendsum::infer::UtilityModel;
use trendsum::learn::ClassifierKind;
use trendsum::pipeline::{eval_scenario, train_scenario};
use trendsum::policy::{builtin_scenario, builtin_scenario_ids};
use trendsum::series::read_series_csv;
use trendsum::summarize::{summarize, TemplateSet};
use trendsum::synth::{
    generate_dataset, label_dataset, read_dataset_jsonl, write_dataset_jsonl, GenConfig,
};
use trendsum::{Error, Result};

/// Trend detection, utility-model training, and time-series summarization.
#[derive(Parser)]
#[command(name = "trendsum", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutputArgs {
    /// Output path (stdout when omitted, where applicable).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled corpus (JSON-lines).
    Generate {
        /// Master seed; all randomness derives from it.
        #[arg(long)]
        seed: u64,
        /// Number of series.
        #[arg(long, default_value_t = 2000)]
        n: usize,
        /// Scenarios to label (default: every built-in preset).
        #[arg(long)]
        scenario: Vec<String>,
        /// Probability of flipping each label.
        #[arg(long, default_value_t = 0.0)]
        label_noise: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Detect trends in a CSV series and print the trend set as JSON.
    Detect {
        /// Input CSV with header `t,value`.
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Train a scenario's utility model on a generated corpus.
    Train {
        /// Corpus produced by `generate`.
        #[arg(long)]
        dataset: PathBuf,
        /// Scenario preset id (e.g. exp1-pi1, exp2-p1p2).
        #[arg(long)]
        scenario: String,
        /// Classifier: logistic or naive_bayes.
        #[arg(long, default_value = "logistic")]
        classifier: String,
        /// Training seed, recorded in the model file.
        #[arg(long)]
        seed: u64,
        /// Model output path.
        #[arg(long)]
        out_model: PathBuf,
        /// Metrics report output path (stdout when omitted).
        #[arg(long)]
        out_report: Option<PathBuf>,
        /// Overwrite existing output files.
        #[arg(long)]
        force: bool,
    },
    /// Evaluate a trained model on a corpus's held-out split.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Summarize a CSV series with a trained model.
    Summarize {
        /// Input CSV with header `t,value`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Number of trends in the summary.
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Optional template-set JSON overriding the built-in phrasing.
        #[arg(long)]
        templates: Option<PathBuf>,
    },
}

fn check_overwrite(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::InvalidConfig(format!(
            "{} exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

fn emit_json<T: serde::Serialize>(value: &T, out: &OutputArgs) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    match &out.out {
        Some(path) => {
            check_overwrite(path, out.force)?;
            std::fs::write(path, json + "\n")?;
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn open_named(path: &Path) -> Result<UtilityModel> {
    UtilityModel::load(path).map_err(|e| match e {
        Error::Io(io) => Error::InvalidConfig(format!("model file {}: {io}", path.display())),
        other => other,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { seed, n, scenario, label_noise, output } => {
            let out = output
                .out
                .clone()
                .ok_or_else(|| Error::InvalidConfig("generate requires --out".into()))?;
            check_overwrite(&out, output.force)?;
            let cfg = GenConfig { n_series: n, label_noise, ..Default::default() };
            cfg.validate()?;
            let dataset = generate_dataset(seed, &cfg)?;
            let ids: Vec<String> = if scenario.is_empty() {
                builtin_scenario_ids().iter().map(|s| s.to_string()).collect()
            } else {
                scenario
            };
            let mut labels: BTreeMap<String, Vec<Vec<u8>>> = BTreeMap::new();
            for id in &ids {
                let sc = builtin_scenario(id)?;
                let labeled = label_dataset(&dataset, &sc, label_noise, seed)?;
                let mut per_series = Vec::with_capacity(dataset.len());
                let mut it = labeled.into_iter();
                for (_, set) in &dataset {
                    per_series.push((0..set.len()).map(|_| it.next().unwrap().y).collect());
                }
                labels.insert(id.clone(), per_series);
            }
            write_dataset_jsonl(&out, &dataset, &labels)?;
            eprintln!("wrote {} series to {}", dataset.len(), out.display());
        }
        Command::Detect { input, output } => {
            let series = read_series_csv(&input)?;
            let set = detect_all(&series, &DetectionConfig::default())?;
            emit_json(&set, &output)?;
        }
        Command::Train { dataset, scenario, classifier, seed, out_model, out_report, force } => {
            check_overwrite(&out_model, force)?;
            let kind: ClassifierKind = classifier.parse()?;
            let sc = builtin_scenario(&scenario)?;
            let data = read_dataset_jsonl(&dataset)?;
            let (model, report) = train_scenario(&data, &sc, kind, seed)?;
            model.save(&out_model)?;
            emit_json(&report, &OutputArgs { out: out_report, force })?;
        }
        Command::Eval { model, dataset, output } => {
            let model = open_named(&model)?;
            let sc = builtin_scenario(&model.scenario)?;
            let data = read_dataset_jsonl(&dataset)?;
            let report = eval_scenario(&model, &data, &sc, model.training.seed)?;
            emit_json(&report, &output)?;
        }
        Command::Summarize { input, model, k, templates } => {
            let series = read_series_csv(&input)?;
            let model = open_named(&model)?;
            let templates = match templates {
                Some(p) => TemplateSet::load(&p)?,
                None => TemplateSet::default(),
            };
            let text = summarize(&series, &model, &templates, &DetectionConfig::default(), k)?;
            println!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
