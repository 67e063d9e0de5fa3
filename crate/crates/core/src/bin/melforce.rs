use clap::{Parser, Subcommand, ValueEnum};
use melforce::checkpoint::{Checkpoint, ModelKind};
use melforce::control::{
    letter_a_path, press_path, run_closed_loop, FeedbackMode, ForceEstimator, LoopConfig, PathParams,
};
use melforce::experiment::{
    build_id, check_overwrite, dataset_path, hysteresis_loop, mel_heatmap, median, rmse, rmse_bars,
    run_grid, run_log_traces, train_column, write_atomic, Column, DatasetSet, ExperimentConfig,
    ExperimentError, Predictor, ResultTable,
};
use melforce::plant::{generate_dataset, GrindDataset, HysteresisOperator, Split};
use melforce::service::{Client, Server};
use melforce::{Estimator, FeatureKind, Scenario, SpectrogramConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::time::Duration;

#[derive(Parser)]
#[command(name = "melforce", version, about = "Drift-robust force estimation experiments")]
struct Cli {
    /// Base seed for data generation, training and simulation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON file with `experiment` and `control` sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate Data1..Data4 as JSONL files.
    GenData {
        #[arg(long, value_delimiter = ',', default_value = "data1,data2,data3,data4")]
        scenarios: Vec<Scenario>,
    },
    /// Train one model on a dataset's train split.
    Train {
        #[arg(long, default_value = "cnn")]
        model: ModelKind,
        #[arg(long, default_value = "ms_lc")]
        feature: FeatureKind,
        /// Defaults to `<out>/data1.jsonl`, generated if missing.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score checkpoints and the LPF on test splits.
    Eval {
        #[arg(long, required = true, num_args = 1..)]
        checkpoint: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "data1,data2,data3,data4")]
        scenarios: Vec<Scenario>,
        /// Directory holding dataN.jsonl; defaults to `--out`.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// CNN over raw, STFT, MFCC, MS(all) and MS(LC) inputs.
    CompareFeatures,
    /// CNN on MS with 0..5 low channels removed.
    TrimSweep,
    /// UDP estimator server.
    Serve {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:9870")]
        addr: String,
        /// Stop after this many seconds; runs until killed otherwise.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Closed-loop grinding run; writes a CSV log and a JSON summary.
    RunControl {
        #[arg(long, default_value = "estimator")]
        feedback: FeedbackMode,
        #[arg(long, default_value = "data2")]
        scenario: Scenario,
        #[arg(long, value_enum, default_value = "letter-a")]
        trajectory: TrajectoryKind,
        /// Required for estimator feedback unless `--server` is given.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Query a running `serve` instance instead of estimating in-process.
        #[arg(long)]
        server: Option<String>,
        #[arg(long, default_value_t = 5)]
        timeout_ms: u64,
    },
    /// Plot-ready CSV bundles.
    PlotData {
        #[arg(value_enum)]
        kind: PlotKind,
        /// Result table JSON, used by `rmse`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TrajectoryKind {
    LetterA,
    Press,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    /// 0 -> 100 N -> 0 sensor trace.
    Hysteresis,
    /// Log-mel grid of the first Data1 window.
    Mel,
    /// Bars from a result table JSON given by `--input`.
    Rmse,
    /// Force traces of a fresh letter-A run with estimator feedback.
    Run,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct CliConfig {
    experiment: ExperimentConfig,
    control: LoopConfig,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<CliConfig, ExperimentError> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ExperimentError::Usage(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<CliConfig>(&text)
                .map_err(|e| ExperimentError::Usage(format!("{}: {e}", p.display())))?
        }
        None => CliConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.experiment.seeds = vec![s];
        cfg.control.seed = s;
    }
    cfg.experiment.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    let cfg = load_config(&cli)?;
    let seed = cli.seed.unwrap_or(0);
    std::fs::create_dir_all(&cli.out)?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::GenData { scenarios } => {
            for &s in scenarios {
                let path = dataset_path(out, s);
                check_overwrite(&path, cli.force)?;
                generate_dataset(s, seed)?.save(&path)?;
                log::info!("wrote {}", path.display());
            }
        }
        Command::Train { model, feature, dataset, epochs } => {
            let path = out.join(format!("{model}_{feature}.json"));
            check_overwrite(&path, cli.force)?;
            let data = match dataset {
                Some(p) => GrindDataset::load(p)?,
                None => dataset_or_generate(out, Scenario::Data1, seed)?,
            };
            let train: Vec<_> = data.split(Split::Train).collect();
            let epochs = epochs.unwrap_or(cfg.experiment.epochs);
            let ck = train_column(*model, *feature, &train, epochs, cfg.experiment.learning_rate, seed)?;
            let pred = Predictor::Net(Box::new(Estimator::from_checkpoint(&ck)?));
            println!("train RMSE {:.4} N", rmse(&pred, &train)?);
            write_atomic(&path, ck.to_json().as_bytes())?;
            println!("wrote {}", path.display());
        }
        Command::Eval { checkpoint, scenarios, data } => {
            let dir = data.as_deref().unwrap_or(out);
            let sets = scenarios
                .iter()
                .map(|&s| dataset_or_generate(dir, s, seed))
                .collect::<Result<Vec<_>, _>>()?;
            let mut columns = vec![Column::Lpf { cutoff_hz: cfg.experiment.lpf_cutoff_hz }.to_string()];
            let mut preds = vec![Predictor::Lpf { cutoff_hz: cfg.experiment.lpf_cutoff_hz }];
            for p in checkpoint {
                let ck = Checkpoint::load(p)?;
                columns.push(format!("{}_{}", ck.model_kind, ck.feature));
                preds.push(Predictor::Net(Box::new(Estimator::from_checkpoint(&ck)?)));
            }
            let mut per_seed = Vec::new();
            for set in &sets {
                let test = set.test();
                per_seed.push(preds.iter().map(|p| rmse(p, &test).map(|v| vec![v])).collect::<Result<Vec<_>, _>>()?);
            }
            check_table(out, "eval", cli.force)?;
            let table = ResultTable {
                title: "eval".into(),
                rows: scenarios.clone(),
                columns,
                median: per_seed.iter().map(|r| r.iter().map(|v| median(v)).collect()).collect(),
                per_seed,
                seeds: vec![seed],
                epochs: 0,
                build_id: build_id(),
            };
            save_table(&table, out, "eval", cli.force)?;
        }
        Command::CompareFeatures => {
            let e = &cfg.experiment;
            check_table(out, "compare_features", cli.force)?;
            let mut columns = vec![Column::Lpf { cutoff_hz: e.lpf_cutoff_hz }];
            columns.extend(e.feature_columns());
            save_table(&run_grid(e, &columns, "feature comparison")?, out, "compare_features", cli.force)?;
        }
        Command::TrimSweep => {
            let e = &cfg.experiment;
            check_table(out, "trim_sweep", cli.force)?;
            save_table(&run_grid(e, &e.trim_columns(), "trim sweep")?, out, "trim_sweep", cli.force)?;
        }
        Command::Serve { checkpoint, addr, duration } => {
            let est = checkpoint.as_ref().map(|p| Checkpoint::load(p).and_then(|c| Estimator::from_checkpoint(&c))).transpose()?;
            if est.is_none() {
                log::warn!("no checkpoint: every request is answered with model-not-loaded");
            }
            let server = Server::bind(addr.as_str(), est)?;
            log::info!("serving on {}", server.local_addr()?);
            let stats = match duration {
                Some(secs) => {
                    let running = server.spawn()?;
                    std::thread::sleep(Duration::from_secs_f64(secs.max(0.0)));
                    running.stop()?
                }
                None => server.serve(&AtomicBool::new(false))?,
            };
            println!("{stats:?}");
        }
        Command::RunControl { feedback, scenario, trajectory, checkpoint, server, timeout_ms } => {
            let csv = out.join("run.csv");
            let summary_path = out.join("run_summary.json");
            check_overwrite(&csv, cli.force)?;
            check_overwrite(&summary_path, cli.force)?;
            let loop_cfg = LoopConfig { feedback: *feedback, scenario: *scenario, ..cfg.control.clone() };
            let params = PathParams::for_force(2.0, loop_cfg.plant.env_stiffness);
            let traj = match trajectory {
                TrajectoryKind::LetterA => letter_a_path(0.05, 2.0, &params),
                TrajectoryKind::Press => press_path(2.0, &params, 0.0, 6.0, [0.0, 0.0]),
            }
            .map_err(ExperimentError::Usage)?;
            let mut local;
            let mut remote;
            let est: Option<&mut dyn ForceEstimator> = match (server, checkpoint) {
                (Some(addr), _) => {
                    remote = Client::connect(addr.as_str(), Duration::from_millis(*timeout_ms))?;
                    Some(&mut remote)
                }
                (None, Some(p)) => {
                    local = Estimator::from_checkpoint(&Checkpoint::load(p)?)?;
                    Some(&mut local)
                }
                (None, None) if *feedback == FeedbackMode::Estimator => {
                    return Err(ExperimentError::Usage("estimator feedback needs --checkpoint or --server".into()))
                }
                (None, None) => None,
            };
            let log = run_closed_loop(&traj, &loop_cfg, est)?;
            write_atomic(&csv, log.to_csv_string().as_bytes())?;
            let summary = log.summary(1e-3, 2.0);
            write_atomic(&summary_path, serde_json::to_string_pretty(&summary).expect("summary serialises").as_bytes())?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serialises"));
        }
        Command::PlotData { kind, input } => {
            let (name, body) = match kind {
                PlotKind::Hysteresis => ("hysteresis.csv", hysteresis_loop(&HysteresisOperator::default(), 100.0, 200)),
                PlotKind::Mel => {
                    let d = dataset_or_generate(out, Scenario::Data1, seed)?;
                    ("mel_heatmap.csv", mel_heatmap(&d.records[0].window()?, &SpectrogramConfig::default())?)
                }
                PlotKind::Rmse => {
                    let p = input.as_ref().ok_or_else(|| ExperimentError::Usage("rmse plots need --input <table.json>".into()))?;
                    let text = std::fs::read_to_string(p).map_err(|e| ExperimentError::Data(format!("{}: {e}", p.display())))?;
                    let t: ResultTable = serde_json::from_str(&text).map_err(|e| ExperimentError::Data(format!("{}: {e}", p.display())))?;
                    ("rmse_bars.csv", rmse_bars(&t))
                }
                PlotKind::Run => {
                    let data = dataset_or_generate(out, Scenario::Data1, seed)?;
                    let train: Vec<_> = data.split(Split::Train).collect();
                    let e = &cfg.experiment;
                    let ck = train_column(ModelKind::Cnn, FeatureKind::MS_LC, &train, e.epochs, e.learning_rate, seed)?;
                    let mut est = Estimator::from_checkpoint(&ck)?;
                    let loop_cfg = LoopConfig { feedback: FeedbackMode::Estimator, ..cfg.control.clone() };
                    let traj = letter_a_path(0.05, 2.0, &PathParams::for_force(2.0, loop_cfg.plant.env_stiffness))
                        .map_err(ExperimentError::Usage)?;
                    ("run_traces.csv", run_log_traces(&run_closed_loop(&traj, &loop_cfg, Some(&mut est))?, 10))
                }
            };
            let path = out.join(name);
            check_overwrite(&path, cli.force)?;
            write_atomic(&path, body.as_bytes())?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn dataset_or_generate(dir: &Path, s: Scenario, seed: u64) -> Result<GrindDataset, ExperimentError> {
    let p = dataset_path(dir, s);
    if p.exists() {
        Ok(GrindDataset::load(&p)?)
    } else {
        log::info!("{} not found, generating {s} with seed {seed}", p.display());
        Ok(DatasetSet::generate(seed, &[s])?.sets.remove(&s).expect("generated"))
    }
}

fn check_table(out: &Path, stem: &str, force: bool) -> Result<(), ExperimentError> {
    check_overwrite(&out.join(format!("{stem}.csv")), force)?;
    check_overwrite(&out.join(format!("{stem}.json")), force)
}

fn save_table(t: &ResultTable, out: &Path, stem: &str, force: bool) -> Result<(), ExperimentError> {
    check_table(out, stem, force)?;
    t.save(out, stem)?;
    println!("{}", t.render());
    Ok(())
}
