use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use wsrnet::dataset::{read_dataset, write_dataset};
use wsrnet::harness::{
    evaluate, generate_dataset, solve_dataset, sweep, train_model, with_jobs, write_csv,
    write_summary, ExperimentConfig, Solver, Split, SweepAxis,
};
use wsrnet::unfolded::{load_model, save_model};
use wsrnet::{Error, Scenario};

#[derive(Parser)]
#[command(
    name = "wsrnet",
    version,
    about = "Weighted sum-rate beamforming solvers and the unfolded RNN-PGP network"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (JSON); defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    scenario: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a (labeled) dataset.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// train (l samples) or test (l_test samples).
        #[arg(long, default_value = "train")]
        split: String,
        /// Number of samples, overriding the configuration.
        #[arg(long)]
        count: Option<usize>,
        /// Label solver, overriding the configuration.
        #[arg(long)]
        solver: Option<String>,
        /// Write channels only.
        #[arg(long)]
        no_labels: bool,
    },
    /// Run one solver over a dataset.
    Solve {
        #[command(flatten)]
        common: Common,
        dataset: PathBuf,
        #[arg(long)]
        solver: String,
        /// Iterations (unroll depth for rnn-pgp).
        #[arg(long, short = 'T')]
        iterations: Option<usize>,
        /// Trained model, required by rnn-pgp.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Metrics CSV.
        #[arg(long)]
        out: PathBuf,
        /// Per-iteration trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Train an RNN-PGP model.
    Train {
        #[command(flatten)]
        common: Common,
        dataset: PathBuf,
        /// Model file.
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch CSV (default: next to the model).
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        stage1: Option<usize>,
        #[arg(long)]
        stage2: Option<usize>,
        /// Learn step sizes only, with exact gradient directions.
        #[arg(long)]
        stepsize_only: bool,
    },
    /// Score a model against WMMSE on a test dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate along one axis: nt, k, d (needs --model) or l (retrains).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(j) = c.jobs {
        cfg.jobs = Some(j);
    }
    if let Some(s) = &c.scenario {
        cfg.scenario = s.parse::<Scenario>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn open_model(path: &Path) -> Result<wsrnet::unfolded::Model> {
    load_model(path).with_context(|| format!("reading {}", path.display()))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            common,
            out,
            split,
            count,
            solver,
            no_labels,
        } => {
            let mut cfg = load_config(&common)?;
            let split: Split = split.parse()?;
            if let Some(n) = count {
                match split {
                    Split::Train => cfg.l = n,
                    Split::Test => cfg.l_test = n,
                }
            }
            if let Some(s) = solver {
                cfg.label_solver = Some(s.parse::<Solver>()?.name().to_string());
            }
            if no_labels {
                cfg.label_solver = None;
            }
            let (meta, records) = with_jobs(cfg.jobs, || generate_dataset(&cfg, split))?;
            let header = write_dataset(&out, &meta, &records)?;
            let summary = json!({
                "command": "gen",
                "path": out.display().to_string(),
                "scenario": header.scenario,
                "l": header.l,
                "k_t": header.k_t,
                "k_r": header.k_r,
                "nt": cfg.nt,
                "d": cfg.d,
                "label_solver": header.label_solver,
                "seed": cfg.seed,
            });
            write_summary(&sibling(&out, "summary.json"), &summary)?;
            println!(
                "wrote {} samples (scenario {}, K_t {}, K_r {}, Nt {}, d {} km, labels {}) to {}",
                header.l,
                header.scenario,
                header.k_t,
                header.k_r,
                serde_json::to_string(&cfg.nt)?,
                serde_json::to_string(&cfg.d)?,
                header.label_solver.as_deref().unwrap_or("none"),
                out.display()
            );
        }
        Command::Solve {
            common,
            dataset,
            solver,
            iterations,
            model,
            out,
            trace,
        } => {
            let cfg = load_config(&common)?;
            let solver: Solver = solver.parse()?;
            let ds =
                read_dataset(&dataset).with_context(|| format!("reading {}", dataset.display()))?;
            let model = model.map(|p| open_model(&p)).transpose()?;
            let t = iterations.unwrap_or(match (&model, solver) {
                (Some(m), Solver::RnnPgp) => m.config.unroll_depth(),
                _ => cfg.iterations,
            });
            let report = with_jobs(cfg.jobs, || {
                solve_dataset(&ds, solver, t, &cfg, model.as_ref())
            })?;
            write_csv(&out, &report.rows)?;
            if let Some(p) = trace {
                write_csv(&p, &report.trace)?;
            }
            write_summary(&sibling(&out, "summary.json"), &report.summary)?;
            let agg = report.rows.last().expect("aggregate row");
            println!(
                "{}: T = {t}, mean WSR {:.4}, accuracy {:.2}%, mean runtime {:.3e} s over {} instances",
                agg.scheme, agg.wsr, agg.accuracy, agg.runtime_s, report.summary.instances
            );
        }
        Command::Train {
            common,
            dataset,
            out,
            log,
            stage1,
            stage2,
            stepsize_only,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(s) = stage1 {
                cfg.train.stage1_epochs = s;
            }
            if let Some(s) = stage2 {
                cfg.train.stage2_epochs = s;
            }
            cfg.train.seed = common.seed.unwrap_or(cfg.train.seed);
            cfg.rnn.stepsize_only |= stepsize_only;
            let ds =
                read_dataset(&dataset).with_context(|| format!("reading {}", dataset.display()))?;
            let (model, run) = with_jobs(cfg.jobs, || train_model(&ds, &cfg))?;
            save_model(&out, &model)?;
            run.write_csv(&log.unwrap_or_else(|| sibling(&out, "train.csv")))?;
            let summary = json!({
                "command": "train",
                "scenario": model.config.scenario(),
                "training": model.training,
                "epochs": run.epochs.len(),
                "final_loss": run.epochs.last().map(|e| e.loss),
                "initial_val_accuracy": run.initial_val_accuracy,
                "val_accuracy": run.final_val_accuracy(),
                "num_params": model.params.num_params(),
                "wall_clock_s": run.wall_clock_s,
            });
            write_summary(&sibling(&out, "summary.json"), &summary)?;
            match run.final_val_accuracy() {
                Some(a) => println!(
                    "validation accuracy: {a:.2}% ({} epochs, {:.1} s)",
                    run.epochs.len(),
                    run.wall_clock_s
                ),
                None => println!(
                    "trained {} epochs in {:.1} s (no validation set)",
                    run.epochs.len(),
                    run.wall_clock_s
                ),
            }
        }
        Command::Eval {
            common,
            model,
            dataset,
            out,
        } => {
            let cfg = load_config(&common)?;
            let model = open_model(&model)?;
            let ds =
                read_dataset(&dataset).with_context(|| format!("reading {}", dataset.display()))?;
            let report = with_jobs(cfg.jobs, || evaluate(&model, &ds, &cfg))?;
            write_csv(&out, &report.rows)?;
            write_summary(&sibling(&out, "summary.json"), &report.summary)?;
            for r in &report.rows {
                println!(
                    "{:8} T = {:3}  WSR {:9.4}  accuracy {:6.2}%  runtime {:.3e} s",
                    r.scheme, r.iterations, r.wsr, r.accuracy, r.runtime_s
                );
            }
        }
        Command::Sweep {
            common,
            axis,
            values,
            model,
            out,
        } => {
            let cfg = load_config(&common)?;
            let axis: SweepAxis = axis.parse()?;
            let model = model.map(|p| open_model(&p)).transpose()?;
            let rows = with_jobs(cfg.jobs, || sweep(&cfg, axis, &values, model.as_ref()))?;
            write_csv(&out, &rows)?;
            write_summary(
                &sibling(&out, "summary.json"),
                &json!({ "command": "sweep", "axis": axis, "rows": rows }),
            )?;
            for r in &rows {
                println!(
                    "{} = {:<8} {:8} accuracy {:6.2}%  WSR {:9.4}",
                    r.axis, r.value, r.scheme, r.accuracy, r.wsr
                );
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::InvalidArgument(_) | Error::DegenerateChannel { .. }) => 2,
        Some(Error::NumericalFailure(_)) => 3,
        Some(Error::Io(_) | Error::Header(_) | Error::Parse { .. }) => 4,
        None if err
            .chain()
            .any(|e| e.is::<std::io::Error>() || e.is::<serde_json::Error>()) =>
        {
            4
        }
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
