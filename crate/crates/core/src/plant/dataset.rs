use super::Scenario;
use crate::control::{press_path, run_closed_loop, ControlError, FeedbackMode, LoopConfig, PathParams, SegmentKind};
use crate::dsp::{DspError, ForceWindow, WINDOW_LEN};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

/// Z command offsets, mm, relative to the nominal contact command.
pub const COMMAND_LEVELS_MM: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];
pub const WINDOWS_PER_LEVEL: usize = 20;
/// Every `TEST_EVERY`-th window of a level goes to the test split.
pub const TEST_EVERY: usize = 4;
pub const FORCE_CMD: f64 = 2.0;
const SETTLE_TIME: f64 = 2.0;
/// XY excursion for Data4, m.
pub const LATERAL_MOTION: [f64; 2] = [0.02, -0.03];
/// Force gain used while recording, m/(s^2 N). Keeps the +-2 mm levels in contact.
pub const RECORDING_FORCE_GAIN: f64 = 0.3;
/// Relative spread of the Data3 pre-load peak.
const PRELOAD_JITTER: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("controller failed while recording {scenario} at {offset_mm} mm: {source}")]
    Control { scenario: Scenario, offset_mm: f64, source: ControlError },
    #[error("invalid record: {0}")]
    Invalid(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub scenario: Scenario,
    pub split: Split,
    pub command_offset_mm: f64,
    /// Mean worktable force over the window, N.
    pub label_n: f64,
    pub eef: Vec<f64>,
    pub t_end: f64,
}

impl Record {
    pub fn window(&self) -> Result<ForceWindow, DspError> {
        ForceWindow::from_samples(self.eef.clone(), self.t_end)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrindDataset {
    pub scenario: Scenario,
    pub records: Vec<Record>,
}

impl GrindDataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn train(&self) -> Vec<&Record> {
        self.split(Split::Train).collect()
    }

    pub fn test(&self) -> Vec<&Record> {
        self.split(Split::Test).collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialise"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, DatasetError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let r: Record = serde_json::from_str(line).map_err(|source| DatasetError::Json { line: i + 1, source })?;
            if r.eef.len() != WINDOW_LEN {
                return Err(DatasetError::Invalid(format!("line {}: {} samples, expected {WINDOW_LEN}", i + 1, r.eef.len())));
            }
            records.push(r);
        }
        let scenario = records.first().map(|r| r.scenario).ok_or_else(|| DatasetError::Invalid("empty dataset".into()))?;
        if records.iter().any(|r| r.scenario != scenario) {
            return Err(DatasetError::Invalid("mixed scenarios in one file".into()));
        }
        Ok(Self { scenario, records })
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.display().to_string(), source })?;
        Self::from_jsonl(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        crate::experiment::write_atomic(path, self.to_jsonl().as_bytes())
            .map_err(|source| DatasetError::Io { path: path.display().to_string(), source })
    }

    /// Mean of `eef window mean - label` over all records.
    pub fn mean_offset(&self) -> f64 {
        let n = self.records.len().max(1) as f64;
        self.records.iter().map(|r| r.eef.iter().sum::<f64>() / r.eef.len() as f64 - r.label_n).sum::<f64>() / n
    }
}

/// Loop settings used to record a scenario.
pub fn recording_config_for(scenario: Scenario, seed: u64) -> LoopConfig {
    recording_config(scenario, seed)
}

pub fn recording_config(scenario: Scenario, seed: u64) -> LoopConfig {
    let mut cfg = LoopConfig { feedback: FeedbackMode::Worktable, scenario, seed, ..Default::default() };
    cfg.gains.kf = RECORDING_FORCE_GAIN;
    cfg
}

fn level_seed(seed: u64, level: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(level as u64 + 1)
}

/// Records one scenario: for each command level, approach, settle, then cut
/// 20 consecutive 512-sample windows; every 4th window goes to the test split.
pub fn generate_dataset(scenario: Scenario, seed: u64) -> Result<GrindDataset, DatasetError> {
    generate_with(scenario, seed, &recording_config(scenario, seed))
}

pub fn generate_with(scenario: Scenario, seed: u64, base: &LoopConfig) -> Result<GrindDataset, DatasetError> {
    let dt = base.plant.sample_period;
    let hold = (WINDOWS_PER_LEVEL * WINDOW_LEN) as f64 * dt;
    let mut params = PathParams::for_force(FORCE_CMD, base.plant.env_stiffness);
    params.settle_time = SETTLE_TIME;
    let lateral = if scenario == Scenario::Data4 { LATERAL_MOTION } else { [0.0, 0.0] };
    let mut preload_rng = ChaCha8Rng::seed_from_u64(seed);
    preload_rng.set_stream(17);

    let mut records = Vec::with_capacity(COMMAND_LEVELS_MM.len() * WINDOWS_PER_LEVEL);
    for (li, &offset_mm) in COMMAND_LEVELS_MM.iter().enumerate() {
        let traj = press_path(FORCE_CMD, &params, offset_mm * 1e-3, hold, lateral).map_err(DatasetError::Invalid)?;
        let mut cfg = base.clone();
        cfg.scenario = scenario;
        cfg.seed = level_seed(seed, li);
        let jitter: f64 = preload_rng.random_range(-PRELOAD_JITTER..=PRELOAD_JITTER);
        if scenario == Scenario::Data3 {
            cfg.preload_residual = base.preload_residual * (1.0 + jitter);
        }
        let log = run_closed_loop(&traj, &cfg, None)
            .map_err(|source| DatasetError::Control { scenario, offset_mm, source })?;
        let stroke: Vec<_> = log.samples.iter().filter(|s| s.kind == SegmentKind::Stroke).collect();
        if stroke.len() < WINDOWS_PER_LEVEL * WINDOW_LEN {
            return Err(DatasetError::Invalid(format!("only {} stroke samples recorded", stroke.len())));
        }
        for w in 0..WINDOWS_PER_LEVEL {
            let chunk = &stroke[w * WINDOW_LEN..(w + 1) * WINDOW_LEN];
            let label = chunk.iter().map(|s| s.worktable_force).sum::<f64>() / WINDOW_LEN as f64;
            records.push(Record {
                scenario,
                split: if w % TEST_EVERY == TEST_EVERY - 1 { Split::Test } else { Split::Train },
                command_offset_mm: offset_mm,
                label_n: label,
                eef: chunk.iter().map(|s| s.eef_force).collect(),
                t_end: chunk[WINDOW_LEN - 1].time,
            });
        }
    }
    Ok(GrindDataset { scenario, records })
}
