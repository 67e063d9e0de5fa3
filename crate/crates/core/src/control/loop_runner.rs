use super::trajectory::{SegmentKind, Trajectory};
use super::{ControllerGains, ImpedanceController};
use crate::checkpoint::Estimator;
use crate::dsp::{ForceWindow, WINDOW_LEN};
use crate::plant::{Plant, PlantConfig, Scenario};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::f64::consts::TAU;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::time::Instant;

/// Tool position beyond which a run counts as diverged, m.
pub const DIVERGENCE_LIMIT: f64 = 1.0;

#[derive(Debug, thiserror::Error)]
pub enum ControlError {
    #[error("closed loop diverged at t = {time:.3} s (z = {z:e} m, force = {force:e} N)")]
    Divergence { time: f64, z: f64, force: f64 },
    #[error("estimator feedback requested but no estimator was supplied")]
    MissingEstimator,
    #[error("invalid loop configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackMode {
    /// End-effector sensor as read.
    Raw,
    /// End-effector sensor through a first-order low-pass.
    Lpf,
    /// Network estimate from the last 512 ms of end-effector samples.
    Estimator,
    /// Clean worktable sensor; used to record datasets.
    Worktable,
}

impl fmt::Display for FeedbackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeedbackMode::Raw => "raw",
            FeedbackMode::Lpf => "lpf",
            FeedbackMode::Estimator => "estimator",
            FeedbackMode::Worktable => "worktable",
        })
    }
}

impl FromStr for FeedbackMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "raw" => Ok(FeedbackMode::Raw),
            "lpf" => Ok(FeedbackMode::Lpf),
            "estimator" | "est" => Ok(FeedbackMode::Estimator),
            "worktable" => Ok(FeedbackMode::Worktable),
            _ => Err(format!("unknown feedback mode '{s}' (raw, lpf, estimator, worktable)")),
        }
    }
}

/// Anything that turns a window of end-effector samples into a force.
/// `None` means no fresh value; the loop keeps the previous one.
pub trait ForceEstimator {
    fn estimate(&mut self, window: &ForceWindow) -> Option<f64>;
}

impl ForceEstimator for Estimator {
    fn estimate(&mut self, window: &ForceWindow) -> Option<f64> {
        match Estimator::estimate(self, window) {
            Ok(v) => Some(v),
            Err(e) => {
                log::warn!("estimate failed: {e}");
                None
            }
        }
    }
}

impl<F: FnMut(&ForceWindow) -> Option<f64>> ForceEstimator for F {
    fn estimate(&mut self, window: &ForceWindow) -> Option<f64> {
        self(window)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopConfig {
    pub gains: ControllerGains,
    pub plant: PlantConfig,
    pub feedback: FeedbackMode,
    pub scenario: Scenario,
    pub seed: u64,
    pub lpf_cutoff_hz: f64,
    /// Samples between estimator updates.
    pub estimator_hop: usize,
    /// Residual left by the Data3 pre-load, N.
    pub preload_residual: f64,
    pub programmatic_offset: f64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            gains: ControllerGains::default(),
            plant: PlantConfig::default(),
            feedback: FeedbackMode::Raw,
            scenario: Scenario::Data1,
            seed: 0,
            lpf_cutoff_hz: 5.0,
            estimator_hop: 16,
            preload_residual: 2.0,
            programmatic_offset: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSample {
    pub time: f64,
    pub p: [f64; 3],
    pub true_force: f64,
    pub eef_force: f64,
    pub worktable_force: f64,
    pub feedback_force: f64,
    pub cmd_force: f64,
    pub z_cmd: f64,
    pub kind: SegmentKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub samples: Vec<RunSample>,
    /// Wall-clock seconds spent in each estimator call.
    pub estimate_latency: Vec<f64>,
    pub stale_estimates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub duration: f64,
    pub stroke_time: f64,
    /// Integral of |true force - command| over stroke segments, N s.
    pub integrated_error: f64,
    pub mean_stroke_force: f64,
    /// Mean true force over the steady tail of the last stroke.
    pub steady_state_force: f64,
    pub max_force: f64,
    pub estimator_calls: usize,
    pub stale_estimates: usize,
}

pub const CSV_HEADER: &str = "time_s,px,py,pz,true_force_n,eef_force_n,feedback_force_n,cmd_force_n";

impl RunLog {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                s.time, s.p[0], s.p[1], s.p[2], s.true_force, s.eef_force, s.feedback_force, s.cmd_force
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }

    /// Mean true force over `[t0, t1)`.
    pub fn mean_true_force(&self, t0: f64, t1: f64) -> Option<f64> {
        let sel: Vec<f64> = self.samples.iter().filter(|s| s.time >= t0 && s.time < t1).map(|s| s.true_force).collect();
        (!sel.is_empty()).then(|| sel.iter().sum::<f64>() / sel.len() as f64)
    }

    /// `steady_tail` is the length of the final stretch of the last stroke that counts as steady state, s.
    pub fn summary(&self, dt: f64, steady_tail: f64) -> RunSummary {
        let strokes: Vec<&RunSample> = self.samples.iter().filter(|s| s.kind == SegmentKind::Stroke).collect();
        let integrated_error = strokes.iter().map(|s| (s.true_force - s.cmd_force).abs() * dt).sum();
        let mean_stroke_force = if strokes.is_empty() {
            0.0
        } else {
            strokes.iter().map(|s| s.true_force).sum::<f64>() / strokes.len() as f64
        };
        let steady_state_force = strokes
            .last()
            .and_then(|last| self.mean_true_force(last.time - steady_tail, last.time + dt / 2.0))
            .unwrap_or(0.0);
        RunSummary {
            duration: self.samples.last().map_or(0.0, |s| s.time),
            stroke_time: strokes.len() as f64 * dt,
            integrated_error,
            mean_stroke_force,
            steady_state_force,
            max_force: self.samples.iter().map(|s| s.true_force).fold(0.0, f64::max),
            estimator_calls: self.estimate_latency.len(),
            stale_estimates: self.stale_estimates,
        }
    }

    /// Latency quantile in seconds, `q` in [0, 1].
    pub fn latency_quantile(&self, q: f64) -> Option<f64> {
        if self.estimate_latency.is_empty() {
            return None;
        }
        let mut v = self.estimate_latency.clone();
        v.sort_by(f64::total_cmp);
        let idx = ((v.len() - 1) as f64 * q.clamp(0.0, 1.0)).round() as usize;
        Some(v[idx])
    }
}

/// Applies the scenario's sensor corruption to a freshly built plant.
pub fn corrupt_plant(plant: &mut Plant, scenario: Scenario, offset: f64, preload_residual: f64) {
    match scenario {
        Scenario::Data2 => plant.state.offset_drift = offset,
        Scenario::Data3 => {
            if let Some(peak) = plant.state.hysteresis.peak_for_residual(preload_residual) {
                plant.preload_excursion(&[0.0, peak, 0.0]);
            }
        }
        Scenario::Data1 | Scenario::Data4 => {}
    }
}

/// Steps plant and controller at the plant sample rate along `traj`.
pub fn run_closed_loop(
    traj: &Trajectory,
    cfg: &LoopConfig,
    mut estimator: Option<&mut dyn ForceEstimator>,
) -> Result<RunLog, ControlError> {
    if cfg.feedback == FeedbackMode::Estimator && estimator.is_none() {
        return Err(ControlError::MissingEstimator);
    }
    cfg.plant.validate().map_err(ControlError::Config)?;
    if (cfg.gains.dt - cfg.plant.sample_period).abs() > 1e-15 {
        return Err(ControlError::Config(format!(
            "controller dt {} differs from plant sample period {}",
            cfg.gains.dt, cfg.plant.sample_period
        )));
    }
    if cfg.estimator_hop == 0 {
        return Err(ControlError::Config("estimator hop must be >= 1".into()));
    }
    let dt = cfg.gains.dt;
    let start = traj.point_at(0.0);
    let mut plant = Plant::new(cfg.plant.clone(), cfg.seed, -start.p[2]);
    corrupt_plant(&mut plant, cfg.scenario, cfg.programmatic_offset, cfg.preload_residual);
    let mut ctrl = ImpedanceController::new(cfg.gains);
    let lpf_a = (-TAU * cfg.lpf_cutoff_hz * dt).exp();

    let n_ticks = (traj.duration() / dt).round() as usize;
    let mut log = RunLog { samples: Vec::with_capacity(n_ticks), ..Default::default() };
    let mut ring: VecDeque<f64> = VecDeque::with_capacity(WINDOW_LEN);
    let (mut eef, mut worktable) = (0.0, 0.0);
    let mut lpf_state: Option<f64> = None;
    let mut held: Option<f64> = None;
    let mut since_estimate = 0usize;

    for tick in 0..n_ticks {
        let t = tick as f64 * dt;
        let cmd = traj.point_at(t);
        let feedback = match cfg.feedback {
            FeedbackMode::Raw => eef,
            FeedbackMode::Worktable => worktable,
            FeedbackMode::Lpf => lpf_state.unwrap_or(eef),
            FeedbackMode::Estimator => held.unwrap_or(eef),
        };
        let drive = ctrl.tick(cmd.p[2], cmd.v[2], traj.force_cmd, plant.state.z_tool, plant.state.v_tool, feedback);
        let xy_speed = cmd.v[0].hypot(cmd.v[1]);
        let s = plant.step(drive, dt, if cmd.kind.in_contact() { xy_speed } else { 0.0 });
        let z = plant.state.z_tool;
        if !z.is_finite() || z.abs() > DIVERGENCE_LIMIT || !s.eef.is_finite() {
            return Err(ControlError::Divergence { time: t + dt, z, force: s.true_force });
        }
        eef = s.eef;
        worktable = s.worktable;
        lpf_state = Some(match lpf_state {
            None => eef,
            Some(y) => lpf_a * y + (1.0 - lpf_a) * eef,
        });
        if ring.len() == WINDOW_LEN {
            ring.pop_front();
        }
        ring.push_back(eef);

        if let (FeedbackMode::Estimator, Some(est)) = (cfg.feedback, estimator.as_deref_mut()) {
            if ring.len() == WINDOW_LEN {
                if since_estimate % cfg.estimator_hop == 0 {
                    let window = ForceWindow::new(ring.iter().copied().collect(), dt, t + dt)
                        .expect("ring holds finite samples");
                    let started = Instant::now();
                    let value = est.estimate(&window);
                    log.estimate_latency.push(started.elapsed().as_secs_f64());
                    match value {
                        Some(v) if v.is_finite() => held = Some(v),
                        _ => log.stale_estimates += 1,
                    }
                }
                since_estimate += 1;
            }
        }

        log.samples.push(RunSample {
            time: t + dt,
            p: [cmd.p[0], cmd.p[1], z],
            true_force: s.true_force,
            eef_force: s.eef,
            worktable_force: s.worktable,
            feedback_force: feedback,
            cmd_force: traj.force_cmd,
            z_cmd: cmd.p[2],
            kind: cmd.kind,
        });
    }
    Ok(log)
}
