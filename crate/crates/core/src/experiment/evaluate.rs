use super::{build_id, median, ExperimentConfig, ExperimentError, ResultTable};
use crate::checkpoint::{Checkpoint, Estimator, ModelKind};
use crate::dsp::{lpf_first_order, ForceWindow};
use crate::features::{FeatureExtractor, FeatureKind, Normalization};
use crate::neural::{train, Tensor2, TrainConfig};
use crate::plant::{generate_dataset, GrindDataset, Record, Scenario, Split};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

/// One estimator family in a results table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Column {
    Lpf { cutoff_hz: f64 },
    Model { model: ModelKind, feature: FeatureKind },
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Column::Lpf { .. } => f.write_str("lpf"),
            Column::Model { model, feature } => write!(f, "{model}_{feature}"),
        }
    }
}

/// All scenario datasets generated from one seed.
#[derive(Debug, Clone)]
pub struct DatasetSet {
    pub seed: u64,
    pub sets: BTreeMap<Scenario, GrindDataset>,
}

impl DatasetSet {
    pub fn generate(seed: u64, scenarios: &[Scenario]) -> Result<Self, ExperimentError> {
        let mut sets = BTreeMap::new();
        for &s in scenarios {
            log::info!("generating {s} (seed {seed})");
            sets.insert(s, generate_dataset(s, seed)?);
        }
        Ok(Self { seed, sets })
    }

    pub fn load(dir: &Path, seed: u64, scenarios: &[Scenario]) -> Result<Self, ExperimentError> {
        let mut sets = BTreeMap::new();
        for &s in scenarios {
            sets.insert(s, GrindDataset::load(&super::dataset_path(dir, s))?);
        }
        Ok(Self { seed, sets })
    }

    pub fn get(&self, s: Scenario) -> Result<&GrindDataset, ExperimentError> {
        self.sets.get(&s).ok_or_else(|| ExperimentError::Data(format!("{s} missing from dataset set")))
    }
}

pub enum Predictor {
    Lpf { cutoff_hz: f64 },
    Net(Box<Estimator>),
}

impl Predictor {
    pub fn predict(&self, window: &ForceWindow) -> Result<f64, ExperimentError> {
        match self {
            Predictor::Lpf { cutoff_hz } => Ok(predict_lpf(window, *cutoff_hz)),
            Predictor::Net(e) => Ok(e.estimate(window)?),
        }
    }
}

/// Final output of a first-order low-pass run over the window.
pub fn predict_lpf(window: &ForceWindow, cutoff_hz: f64) -> f64 {
    *lpf_first_order(window.samples(), cutoff_hz, window.sample_period()).last().expect("windows are non-empty")
}

pub fn rmse(pred: &Predictor, records: &[&Record]) -> Result<f64, ExperimentError> {
    if records.is_empty() {
        return Err(ExperimentError::Data("no records to evaluate".into()));
    }
    let mut sq = 0.0;
    for r in records {
        let e = pred.predict(&r.window()?)? - r.label_n;
        sq += e * e;
    }
    Ok((sq / records.len() as f64).sqrt())
}

/// Feature extraction, normalisation fit and training on `records`.
pub fn train_column(
    model: ModelKind,
    feature: FeatureKind,
    records: &[&Record],
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<Checkpoint, ExperimentError> {
    let arch = model
        .architecture(feature)
        .ok_or_else(|| ExperimentError::Usage(format!("{model} is not trainable")))?;
    let extractor = FeatureExtractor::new(feature);
    let mut inputs: Vec<Tensor2> = Vec::with_capacity(records.len());
    for r in records {
        inputs.push(extractor.extract(&r.window()?).map_err(|e| ExperimentError::Data(e.to_string()))?);
    }
    let norm = if feature.is_spectral() { Normalization::fit(&inputs) } else { Normalization::raw() };
    for x in &mut inputs {
        norm.apply(x);
    }
    let targets: Vec<f64> = records.iter().map(|r| r.label_n).collect();
    let out = train(arch, &inputs, &targets, &TrainConfig { epochs, learning_rate, seed })?;
    log::info!("trained {model}_{feature} seed {seed}: final loss {:.5}", out.final_loss());
    Ok(Checkpoint::new(model, feature, &out.network, norm, seed, epochs))
}

/// Trains (if needed) one column on Data1 and scores it on each test scenario.
pub fn evaluate_column(
    column: Column,
    data: &DatasetSet,
    test_on: &[Scenario],
    cfg: &ExperimentConfig,
) -> Result<Vec<f64>, ExperimentError> {
    let pred = match column {
        Column::Lpf { cutoff_hz } => Predictor::Lpf { cutoff_hz },
        Column::Model { model, feature } => {
            let train_set = data.get(cfg.train_on)?;
            let records: Vec<&Record> = train_set.split(Split::Train).collect();
            let ck = train_column(model, feature, &records, cfg.epochs, cfg.learning_rate, data.seed)?;
            Predictor::Net(Box::new(Estimator::from_checkpoint(&ck)?))
        }
    };
    test_on.iter().map(|&s| rmse(&pred, &data.get(s)?.test())).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    /// `rmse[row][col]`
    pub rmse: Vec<Vec<f64>>,
}

/// Every column over every seed, datasets regenerated per seed.
pub fn run_grid(cfg: &ExperimentConfig, columns: &[Column], title: &str) -> Result<ResultTable, ExperimentError> {
    cfg.validate()?;
    let mut scenarios = cfg.test_on.clone();
    if !scenarios.contains(&cfg.train_on) {
        scenarios.push(cfg.train_on);
    }
    let mut per_seed: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); columns.len()]; cfg.test_on.len()];
    for &seed in &cfg.seeds {
        let data = DatasetSet::generate(seed, &scenarios)?;
        for (c, &col) in columns.iter().enumerate() {
            let scores = evaluate_column(col, &data, &cfg.test_on, cfg)?;
            for (r, v) in scores.into_iter().enumerate() {
                per_seed[r][c].push(v);
            }
        }
    }
    let median = per_seed.iter().map(|row| row.iter().map(|v| median(v)).collect()).collect();
    Ok(ResultTable {
        title: title.to_string(),
        rows: cfg.test_on.clone(),
        columns: columns.iter().map(Column::to_string).collect(),
        median,
        per_seed,
        seeds: cfg.seeds.clone(),
        epochs: cfg.epochs,
        build_id: build_id(),
    })
}
