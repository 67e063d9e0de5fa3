//! Synthetic grinding plant: a 1-DOF tool against a spring-damper surface,
//! a force-dependent tool vibration, and two force sensors. The end-effector
//! sensor sees vibration, noise, offset and hysteresis; the worktable sensor
//! sees only the contact force plus a little white noise.

mod dataset;
mod hysteresis;

pub use dataset::{generate_dataset, generate_with, recording_config, recording_config_for, DatasetError, GrindDataset, Record, Split, COMMAND_LEVELS_MM};
pub use hysteresis::{excursion_peaks, play, residual_statistics, HysteresisOperator, EXCURSION_PEAKS, CALIBRATED_WEIGHTS, CALIBRATED_WIDTHS};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

/// The four recording conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// Clean grinding, no XY motion.
    Data1,
    /// +2 N offset added to the end-effector channel.
    Data2,
    /// ~2 N offset left by a pre-load excursion through the hysteresis operator.
    Data3,
    /// Lateral motion (2 cm, -3 cm) while grinding.
    Data4,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::Data1, Scenario::Data2, Scenario::Data3, Scenario::Data4];

    pub fn has_offset(&self) -> bool {
        matches!(self, Scenario::Data2 | Scenario::Data3)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self {
            Scenario::Data1 => 1,
            Scenario::Data2 => 2,
            Scenario::Data3 => 3,
            Scenario::Data4 => 4,
        };
        write!(f, "Data{n}")
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "data1" | "1" => Ok(Scenario::Data1),
            "data2" | "2" => Ok(Scenario::Data2),
            "data3" | "3" => Ok(Scenario::Data3),
            "data4" | "4" => Ok(Scenario::Data4),
            _ => Err(format!("unknown scenario '{s}' (Data1..Data4)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantConfig {
    /// N/m
    pub env_stiffness: f64,
    /// N s/m
    pub env_damping: f64,
    /// Unloaded tool vibration frequency, Hz.
    pub f_high: f64,
    /// Frequency reached at `force_at_f_low`, Hz.
    pub f_low: f64,
    pub force_at_f_low: f64,
    /// Vibration amplitude per newton of contact force.
    pub vib_amp_coeff: f64,
    /// Vibration amplitude of the unloaded tool, N.
    pub vib_amp_floor: f64,
    /// Relative amplitudes of the 2nd, 3rd, ... harmonics.
    pub harmonic_weights: Vec<f64>,
    /// Relative RMS and correlation time of the slow amplitude modulation.
    pub amp_jitter_rms: f64,
    pub amp_jitter_tau: f64,
    /// End-effector white noise, N RMS.
    pub noise_rms: f64,
    pub worktable_noise_rms: f64,
    /// Surface height wander, m RMS, and its correlation time, s.
    pub surface_waviness_rms: f64,
    pub surface_waviness_tau: f64,
    /// Scales the motion-induced disturbances below.
    pub lateral_noise_gain: f64,
    /// Broadband noise while sliding in contact, N RMS.
    pub lateral_noise_rms: f64,
    /// Friction-induced bias on the Z reading while sliding, N.
    pub lateral_friction_bias: f64,
    pub hysteresis_widths: Vec<f64>,
    pub hysteresis_weights: Vec<f64>,
    /// Mean residual after a ~100 N excursion the weights were fitted to.
    pub hysteresis_residual_target: f64,
    pub sample_period: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            env_stiffness: 10_000.0,
            env_damping: 20.0,
            f_high: 300.0,
            f_low: 100.0,
            force_at_f_low: 4.0,
            vib_amp_coeff: 0.3,
            vib_amp_floor: 0.05,
            harmonic_weights: vec![0.3, 0.1],
            amp_jitter_rms: 0.2,
            amp_jitter_tau: 0.05,
            noise_rms: 0.05,
            worktable_noise_rms: 0.01,
            surface_waviness_rms: 0.1e-3,
            surface_waviness_tau: 3.0,
            lateral_noise_gain: 1.0,
            lateral_noise_rms: 0.15,
            lateral_friction_bias: 0.1,
            hysteresis_widths: CALIBRATED_WIDTHS.to_vec(),
            hysteresis_weights: CALIBRATED_WEIGHTS.to_vec(),
            hysteresis_residual_target: 4.31,
            sample_period: 0.001,
        }
    }
}

impl PlantConfig {
    /// Deterministic plant: no noise, jitter or waviness.
    pub fn noiseless() -> Self {
        Self {
            amp_jitter_rms: 0.0,
            noise_rms: 0.0,
            worktable_noise_rms: 0.0,
            surface_waviness_rms: 0.0,
            lateral_noise_gain: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let nyquist = 0.5 / self.sample_period;
        if !(self.env_stiffness > 0.0) {
            return Err("env_stiffness must be > 0".into());
        }
        if !(self.f_low > 0.0 && self.f_low < self.f_high && self.f_high <= nyquist) {
            return Err(format!("need 0 < f_low < f_high <= {nyquist} Hz"));
        }
        if !(self.force_at_f_low > 0.0) {
            return Err("force_at_f_low must be > 0".into());
        }
        if self.hysteresis_widths.len() != self.hysteresis_weights.len() {
            return Err("one hysteresis weight per width".into());
        }
        if self.hysteresis_weights.iter().any(|&w| w < 0.0) {
            return Err("hysteresis weights must be >= 0".into());
        }
        Ok(())
    }

    /// Affine force -> frequency map clamped to `[f_low, f_high]`.
    pub fn vib_frequency(&self, true_force: f64) -> f64 {
        let slope = (self.f_high - self.f_low) / self.force_at_f_low;
        (self.f_high - slope * true_force.max(0.0)).clamp(self.f_low, self.f_high)
    }

    pub fn vib_amplitude(&self, true_force: f64) -> f64 {
        self.vib_amp_coeff * true_force.max(0.0) + self.vib_amp_floor
    }

    /// Sensor anti-alias response: flat to 80 % of Nyquist, linear roll-off to zero at Nyquist.
    fn anti_alias(&self, f: f64) -> f64 {
        let nyq = 0.5 / self.sample_period;
        ((nyq - f) / (0.2 * nyq)).clamp(0.0, 1.0)
    }

    pub fn hysteresis(&self) -> HysteresisOperator {
        HysteresisOperator::new(self.hysteresis_widths.clone(), self.hysteresis_weights.clone())
    }
}

/// Tool vibration frequency for the default plant.
pub fn vib_frequency(true_force: f64) -> f64 {
    PlantConfig::default().vib_frequency(true_force)
}

/// Mutable physical state. `z` grows into the surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub z_tool: f64,
    pub v_tool: f64,
    pub z_surface: f64,
    /// Nominal surface height the waviness wanders around.
    pub z_surface_nominal: f64,
    pub v_surface: f64,
    pub true_force: f64,
    pub vib_phase: f64,
    pub amp_mod: f64,
    pub hysteresis: HysteresisOperator,
    /// Load the hysteresis element is currently exposed to outside the process force.
    pub preload: f64,
    pub offset_drift: f64,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantSample {
    pub eef: f64,
    pub worktable: f64,
    pub true_force: f64,
}

/// Independent random streams so that scenarios built from one seed share
/// every draw they have in common.
#[derive(Debug, Clone)]
struct NoiseStreams {
    eef: ChaCha8Rng,
    worktable: ChaCha8Rng,
    surface: ChaCha8Rng,
    amplitude: ChaCha8Rng,
    lateral: ChaCha8Rng,
}

impl NoiseStreams {
    fn new(seed: u64) -> Self {
        let stream = |id: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(id);
            r
        };
        Self { eef: stream(1), worktable: stream(2), surface: stream(3), amplitude: stream(4), lateral: stream(5) }
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

#[derive(Debug, Clone)]
pub struct Plant {
    pub config: PlantConfig,
    pub state: PlantState,
    noise: NoiseStreams,
}

impl Plant {
    /// Tool at rest `clearance` metres above a surface at height 0.
    pub fn new(config: PlantConfig, seed: u64, clearance: f64) -> Self {
        let hysteresis = config.hysteresis();
        let state = PlantState {
            z_tool: -clearance,
            v_tool: 0.0,
            z_surface: 0.0,
            z_surface_nominal: 0.0,
            v_surface: 0.0,
            true_force: 0.0,
            vib_phase: 0.0,
            amp_mod: 1.0,
            hysteresis,
            preload: 0.0,
            offset_drift: 0.0,
            time: 0.0,
        };
        Self { config, state, noise: NoiseStreams::new(seed) }
    }

    pub fn penetration(&self) -> f64 {
        self.state.z_tool - self.state.z_surface
    }

    fn contact_force(&self) -> f64 {
        let pen = self.penetration();
        if pen <= 0.0 {
            return 0.0;
        }
        let rate = self.state.v_tool - self.state.v_surface;
        (self.config.env_stiffness * pen + self.config.env_damping * rate).max(0.0)
    }

    /// Runs a load excursion through the hysteresis element (e.g. a weight
    /// placed on and removed from the sensor) and returns the residual it leaves.
    pub fn preload_excursion(&mut self, vertices: &[f64]) -> f64 {
        self.state.hysteresis.apply_path(vertices, 200);
        self.state.preload = vertices.last().copied().unwrap_or(0.0);
        self.hysteresis_residual()
    }

    /// Sensor reading error contributed by the hysteresis element.
    pub fn hysteresis_residual(&self) -> f64 {
        self.state.hysteresis.output() - self.state.preload
    }

    /// Advances one sample. `drive` is the actuator force on the unit-mass tool
    /// (numerically its commanded acceleration); `xy_speed` only modulates noise.
    pub fn step(&mut self, drive: f64, dt: f64, xy_speed: f64) -> PlantSample {
        debug_assert!(dt > 0.0);
        let cfg = &self.config;

        // surface waviness, Ornstein-Uhlenbeck around the nominal height
        if cfg.surface_waviness_rms > 0.0 {
            let a = (-dt / cfg.surface_waviness_tau).exp();
            let dev = self.state.z_surface - self.state.z_surface_nominal;
            let next = a * dev + cfg.surface_waviness_rms * (1.0 - a * a).sqrt() * gauss(&mut self.noise.surface);
            let z_new = self.state.z_surface_nominal + next;
            self.state.v_surface = (z_new - self.state.z_surface) / dt;
            self.state.z_surface = z_new;
        } else {
            self.state.v_surface = 0.0;
        }

        // unit mass, semi-implicit Euler
        let f_contact = self.contact_force();
        self.state.v_tool += (drive - f_contact) * dt;
        self.state.z_tool += self.state.v_tool * dt;
        self.state.time += dt;

        let cfg = &self.config;
        let force = self.contact_force();
        self.state.true_force = force;

        let freq = cfg.vib_frequency(force);
        let mut vib = self.state.vib_phase.sin();
        for (h, w) in cfg.harmonic_weights.iter().enumerate() {
            let k = (h + 2) as f64;
            vib += w * cfg.anti_alias(k * freq) * (k * self.state.vib_phase).sin();
        }
        if cfg.amp_jitter_rms > 0.0 {
            let a = (-dt / cfg.amp_jitter_tau).exp();
            let dev = self.state.amp_mod - 1.0;
            self.state.amp_mod =
                1.0 + a * dev + cfg.amp_jitter_rms * (1.0 - a * a).sqrt() * gauss(&mut self.noise.amplitude);
        }
        let mut eef = force + cfg.vib_amplitude(force) * self.state.amp_mod.max(0.0) * vib;
        eef += self.state.hysteresis.apply(self.state.preload) - self.state.preload;
        eef += self.state.offset_drift;
        eef += cfg.noise_rms * gauss(&mut self.noise.eef);
        if xy_speed > 1e-9 && force > 0.0 && cfg.lateral_noise_gain > 0.0 {
            eef += cfg.lateral_noise_gain
                * (cfg.lateral_friction_bias + cfg.lateral_noise_rms * gauss(&mut self.noise.lateral));
        }
        let worktable = force + cfg.worktable_noise_rms * gauss(&mut self.noise.worktable);

        self.state.vib_phase = (self.state.vib_phase + TAU * freq * dt).rem_euclid(TAU);
        PlantSample { eef, worktable, true_force: force }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::{num_complex::Complex, FftPlanner};

    #[test]
    fn frequency_map_endpoints() {
        assert_eq!(vib_frequency(0.0), 300.0);
        assert!((vib_frequency(4.0) - 100.0).abs() < 1e-12);
        assert!((vib_frequency(2.0) - 200.0).abs() < 1e-12);
        assert_eq!(vib_frequency(9.0), 100.0);
    }

    #[test]
    fn scenario_names() {
        for s in Scenario::ALL {
            assert_eq!(s.to_string().parse::<Scenario>().unwrap(), s);
        }
        assert!("Data5".parse::<Scenario>().is_err());
    }

    #[test]
    fn free_tool_has_no_force() {
        let mut p = Plant::new(PlantConfig::default(), 1, 0.005);
        for _ in 0..200 {
            let s = p.step(0.0, 1e-3, 0.0);
            assert_eq!(s.true_force, 0.0);
            assert!(s.worktable.abs() < 0.06);
        }
    }

    #[test]
    fn hookes_law_at_rest() {
        let mut p = Plant::new(PlantConfig::noiseless(), 1, 0.0);
        p.state.z_tool = 0.2e-3;
        for _ in 0..1000 {
            let s = p.step(2.0, 1e-3, 0.0);
            assert!((s.true_force - 2.0).abs() < 1e-9, "{}", s.true_force);
        }
    }

    fn dominant_frequency(x: &[f64]) -> f64 {
        let n = x.len();
        let mean = x.iter().sum::<f64>() / n as f64;
        let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let k = (1..n / 2).max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm())).unwrap();
        k as f64 * 1000.0 / n as f64
    }

    #[test]
    fn steady_contact_peaks_at_map_frequency() {
        for force in [0.5, 1.3, 2.0, 2.9, 3.5] {
            let cfg = PlantConfig::noiseless();
            let mut p = Plant::new(cfg.clone(), 1, 0.0);
            p.state.z_tool = force / cfg.env_stiffness;
            let eef: Vec<f64> = (0..512).map(|_| p.step(force, 1e-3, 0.0).eef).collect();
            let f = dominant_frequency(&eef);
            // 512-point bins are 1.95 Hz apart
            assert!((f - cfg.vib_frequency(force)).abs() <= 2.0, "F={force}: peak {f}");
        }
    }

    #[test]
    fn worktable_is_unbiased() {
        let mut p = Plant::new(PlantConfig::default(), 7, 0.0);
        p.config.surface_waviness_rms = 0.0;
        p.state.z_tool = 1.5e-4;
        let n = 100_000;
        let mut bias = 0.0;
        for _ in 0..n {
            let s = p.step(p.state.true_force.max(1.5), 1e-3, 0.0);
            bias += s.worktable - s.true_force;
        }
        assert!((bias / n as f64).abs() < 0.005);
    }

    #[test]
    fn preload_leaves_offset() {
        let mut p = Plant::new(PlantConfig::noiseless(), 1, 0.0);
        let peak = p.state.hysteresis.peak_for_residual(2.0).unwrap();
        let r = p.preload_excursion(&[0.0, peak, 0.0]);
        assert!((r - 2.0).abs() < 1e-6);
        p.state.z_tool = 1e-4;
        let s = p.step(1.0, 1e-3, 0.0);
        let vib = s.eef - s.true_force - 2.0;
        assert!(vib.abs() <= PlantConfig::default().vib_amplitude(1.0) * 1.5);
    }
}
