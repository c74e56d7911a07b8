use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pulseprop::error::Result;
use pulseprop::labelprop::Solver;
use pulseprop::pipeline::{self, InputSpec, PipelineConfig, Workspace};
use pulseprop::rebalance::ResampleMethod;
use pulseprop::synth::{self, SynthSpec};

#[derive(Parser)]
#[command(name = "pulseprop", version, about = "Semi-supervised PPG artifact detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic PPG record and its beat truth.
    Synth(SynthArgs),
    /// Filter, segment, resample and normalise pulses.
    Preprocess(StageArgs),
    /// Statistical seed labels and the train/test split.
    Label(StageArgs),
    /// Rebalance seeds and run label propagation.
    Propagate(StageArgs),
    /// Fit and apply the supervised baselines.
    Classify(StageArgs),
    /// Score every predictions file in the workspace.
    Evaluate(EvaluateArgs),
    /// All stages end to end.
    Run(StageArgs),
    /// LP over the seed-fraction and resampling grids.
    Sweep(StageArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for waveform.csv and beats.csv.
    #[arg(long, default_value = "synth")]
    out: PathBuf,
    #[arg(long)]
    beats: Option<usize>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    artifact_fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Include baseline jumps among the artifact kinds.
    #[arg(long)]
    all_kinds: bool,
}

#[derive(Args)]
struct StageArgs {
    /// Working directory for stage files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON configuration; defaults to <out>/config.json when present.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Waveform CSVs to use instead of synthetic input.
    #[arg(long = "waveform", num_args = 1..)]
    waveforms: Vec<PathBuf>,
    /// Beat truth CSVs, one per waveform.
    #[arg(long = "beat-truth", num_args = 1..)]
    beat_truth: Vec<PathBuf>,
    #[arg(long)]
    sampling_rate: Option<f64>,
    /// Number of synthetic beats when no waveform is given.
    #[arg(long)]
    beats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    seed_label_fraction: Option<f64>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    lp_resample: Option<ResampleMethod>,
    #[arg(long)]
    baseline_resample: Option<ResampleMethod>,
    #[arg(long)]
    n_neighbors: Option<usize>,
    #[arg(long, value_parser = parse_solver)]
    solver: Option<Solver>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    stage: StageArgs,
    /// Score one predictions file against a truth annotation file instead.
    #[arg(long, requires = "truth")]
    predictions: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value = "method")]
    method: String,
    /// Report path for the single-file form; stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn parse_solver(s: &str) -> std::result::Result<Solver, String> {
    match s {
        "iterative" => Ok(Solver::Iterative),
        "closed_form" | "closed-form" => Ok(Solver::ClosedForm),
        "auto" => Ok(Solver::Auto),
        _ => Err(format!("unknown solver {s:?}")),
    }
}

impl StageArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let from_out = self.out.as_ref().map(|o| o.join("config.json")).filter(|p| p.exists());
        let mut cfg = match self.config.as_ref().or(from_out.as_ref()) {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if !self.waveforms.is_empty() {
            cfg.input = InputSpec::Files {
                waveforms: self.waveforms.clone(),
                sampling_rate_hz: self.sampling_rate.unwrap_or(pulseprop::ingest::DEFAULT_SAMPLING_RATE_HZ),
                beat_truth: self.beat_truth.clone(),
            };
        } else if let Some(n) = self.beats {
            let seed = match &cfg.input {
                InputSpec::Synth(s) => s.seed,
                _ => 0,
            };
            cfg.input = InputSpec::Synth(SynthSpec::beats(n, seed));
        }
        macro_rules! set {
            ($field:ident, $($path:tt)+) => {
                if let Some(v) = self.$field {
                    cfg.$($path)+ = v;
                }
            };
        }
        set!(seed, seed);
        set!(seed_label_fraction, seed_label_fraction);
        set!(train_fraction, train_fraction);
        set!(lp_resample, lp_resample.method);
        set!(baseline_resample, baseline_resample.method);
        set!(n_neighbors, propagation.n_neighbors);
        set!(solver, propagation.solver);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_reports(reports: &[pulseprop::metrics::EvaluationReport]) {
    println!("{:<20} {:>6} {:>8} {:>8} {:>8}", "method", "n", "f1", "auroc", "mcc");
    for r in reports {
        println!("{:<20} {:>6} {:>8.4} {:>8.4} {:>8.4}", r.method, r.n, r.f1, r.auroc, r.mcc);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => {
            let mut spec = match a.beats {
                Some(n) => SynthSpec::beats(n, a.seed),
                None => SynthSpec {
                    seed: a.seed,
                    ..SynthSpec::default()
                },
            };
            if let Some(d) = a.duration {
                spec.duration_s = d;
            }
            if let Some(f) = a.artifact_fraction {
                spec.artifact_fraction = f;
            }
            if a.all_kinds {
                spec = spec.with_all_kinds();
            }
            let out = synth::generate_ppg(&spec)?;
            std::fs::create_dir_all(&a.out).map_err(|e| pulseprop::error::Error::io(&a.out, e))?;
            pulseprop::ingest::save_waveform_csv(&out.record, a.out.join("waveform.csv"))?;
            synth::save_truth_csv(&out.beats, a.out.join("beats.csv"))?;
            let flagged = out.beats.iter().filter(|b| b.flag).count();
            println!("{} beats ({flagged} flagged) -> {}", out.beats.len(), a.out.display());
        }
        Command::Preprocess(a) => pipeline::file_preprocess(&a.config()?)?,
        Command::Label(a) => pipeline::file_label(&a.config()?)?,
        Command::Propagate(a) => {
            let info = pipeline::file_propagate(&a.config()?)?;
            println!("{}", serde_json::to_string(&info)?);
        }
        Command::Classify(a) => pipeline::file_classify(&a.config()?)?,
        Command::Evaluate(a) => match (&a.predictions, &a.truth) {
            (Some(p), Some(t)) => {
                let pred = pipeline::read_predictions_file(p, &a.method)?;
                let ann = pulseprop::ingest::load_annotations(t)?;
                let ids: Vec<String> = ann.entries.iter().map(|(id, _)| id.clone()).collect();
                let report = pipeline::evaluate_predictions(&pred, &ids, &ann.labels())?;
                match &a.report {
                    Some(r) => report.save(r)?,
                    None => println!("{}", report.to_json()?),
                }
            }
            _ => print_reports(&pipeline::file_evaluate(&a.stage.config()?)?),
        },
        Command::Run(a) => {
            let cfg = a.config()?;
            let out = pipeline::run_pipeline(&cfg)?;
            print_reports(&out.reports);
        }
        Command::Sweep(a) => {
            let cfg = a.config()?;
            let _ = Workspace::new(&cfg.output_dir)?;
            let cells = pipeline::run_sweep(&cfg)?;
            let reports: Vec<_> = cells.into_iter().map(|c| c.report).collect();
            print_reports(&reports);
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
