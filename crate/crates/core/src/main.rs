use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use oodmix::harness::{
    build_data, evaluate, export_score_grid, parse_list, run_sweep, train_with_observer, write_history_csv,
    write_results_csv, write_score_grid, write_scores_csv, Bounds, ExperimentConfig, Method, MethodSpec,
    RunResult, SweepCell, SweepRow, TrainObserver,
};
use oodmix::mixing::MixedBatch;
use oodmix::nn::{load_checkpoint, save_checkpoint, MlpModel};
use oodmix::oodcore::{score_rows, ScoreKind};
use oodmix::{Error, Result};

#[derive(Parser)]
#[command(name = "oodmix", version, about = "Synthetic OOD detection lab with score-adaptive outlier mixup")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model; writes model.ckpt, history.csv, report.csv and scores.csv.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Write the mixed outlier batch of this iteration to mix.csv (i,j,lambda,x,y).
        #[arg(long)]
        dump_mix: Option<usize>,
    },
    /// Evaluate a checkpoint on the test sets of a config.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export a score lattice as x,y,score.
    Grid {
        #[arg(long)]
        checkpoint: PathBuf,
        /// xmin,xmax,ymin,ymax
        #[arg(long, allow_hyphen_values = true)]
        bounds: String,
        #[arg(long)]
        res: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "energy")]
        score: String,
        /// Number of ID classes (the model may carry one extra outlier head).
        #[arg(long, default_value_t = 3)]
        classes: usize,
    },
    /// Train and evaluate every (method, k, seed) cell; writes results.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// e.g. `no-aux,aux:10,aux:1000,diversemix:10`
        #[arg(long)]
        methods: String,
        #[arg(long, default_value = "")]
        k: String,
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the default config as JSON.
    DefaultConfig,
}

struct MixDump {
    at: Option<usize>,
    batch: Option<MixedBatch>,
}

impl TrainObserver for MixDump {
    fn on_mix(&mut self, iteration: usize, batch: &MixedBatch) {
        if self.at == Some(iteration) {
            self.batch = Some(batch.clone());
        }
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn write_report(dir: &Path, cfg: &ExperimentConfig, result: &RunResult) -> Result<()> {
    let row = SweepRow {
        cell: SweepCell { method: Method::infer(cfg), k: cfg.aux.as_ref().map_or(0, |a| a.k), seed: cfg.seed },
        result: Ok(result.clone()),
    };
    write_results_csv(&[row], File::create(dir.join("report.csv"))?)
}

fn write_scores(dir: &Path, cfg: &ExperimentConfig, model: &MlpModel) -> Result<()> {
    let data = build_data(cfg)?;
    let k = cfg.num_classes();
    let id = score_rows(&model.forward(data.id_test.points())?, cfg.score, k)?;
    let mut ood = Vec::new();
    for (_, set) in &data.ood_tests {
        ood.extend(score_rows(&model.forward(&set.points)?, cfg.score, k)?);
    }
    write_scores_csv(&id, &ood, File::create(dir.join("scores.csv"))?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, seed, out, dump_mix } => {
            let cfg = load_config(&config, seed)?;
            std::fs::create_dir_all(&out)?;
            let start = std::time::Instant::now();
            let data = build_data(&cfg)?;
            let mut dump = MixDump { at: dump_mix, batch: None };
            let (model, history) = train_with_observer(&cfg, &data, &mut dump)?;
            if let Some(batch) = dump.batch {
                batch.write_csv(File::create(out.join("mix.csv"))?)?;
            }
            let mut result =
                evaluate(&model, &data.id_test, &data.ood_tests, cfg.score, cfg.num_classes())?;
            result.wall_ms = start.elapsed().as_millis();
            save_checkpoint(&model, out.join("model.ckpt"))?;
            write_history_csv(&history, File::create(out.join("history.csv"))?)?;
            write_report(&out, &cfg, &result)?;
            write_scores(&out, &cfg, &model)?;
            let a = result.aggregate;
            println!(
                "fpr95={:.4} auroc={:.4} aupr={:.4} id_acc={:.4}",
                a.fpr95, a.auroc, a.aupr, a.id_acc
            );
        }
        Command::Eval { checkpoint, config, seed, out } => {
            let cfg = load_config(&config, seed)?;
            let model = load_checkpoint(&checkpoint)?;
            if model.output_dim() != cfg.layer_dims().last().copied().unwrap_or(0) {
                return Err(Error::Config(format!(
                    "checkpoint has {} outputs, config expects {:?}",
                    model.output_dim(),
                    cfg.layer_dims()
                )));
            }
            std::fs::create_dir_all(&out)?;
            let data = build_data(&cfg)?;
            let result =
                evaluate(&model, &data.id_test, &data.ood_tests, cfg.score, cfg.num_classes())?;
            write_report(&out, &cfg, &result)?;
            write_scores(&out, &cfg, &model)?;
            for s in &result.per_set {
                println!(
                    "{}: fpr95={:.4} auroc={:.4} aupr={:.4}",
                    s.name, s.report.fpr95, s.report.auroc, s.report.aupr
                );
            }
        }
        Command::Grid { checkpoint, bounds, res, out, score, classes } => {
            let model = load_checkpoint(&checkpoint)?;
            let bounds: Bounds = bounds.parse()?;
            let kind: ScoreKind = score.parse()?;
            let grid = export_score_grid(&model, kind, classes, bounds, res)?;
            write_score_grid(&grid, File::create(&out)?)?;
        }
        Command::Sweep { config, methods, k, seeds, out } => {
            let cfg = load_config(&config, None)?;
            let methods: Vec<MethodSpec> = parse_list(&methods)?;
            let ks: Vec<usize> = parse_list(&k)?;
            let seeds: Vec<u64> = parse_list(&seeds)?;
            let rows = run_sweep(&cfg, &methods, &ks, &seeds, Some(&out))?;
            let failed = rows.iter().filter(|r| r.result.is_err()).count();
            println!("{} cells, {} failed; wrote {}", rows.len(), failed, out.join("results.csv").display());
        }
        Command::DefaultConfig => println!("{}", ExperimentConfig::default().to_json()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                Error::Divergence { .. } => 3,
                _ => 1,
            })
        }
    }
}
