//! Contact-force estimation for grinding from the frequency content of a
//! vibrating force-sensor signal.
//!
//! The crate is organised bottom-up:
//!
//! * [`dsp`] windowing, STFT, Mel filterbank, Mel spectrogram, MFCC and the
//!   first-order low-pass baseline.
//! * [`neural`] a small from-scratch network engine (1D-CNN / TDNN and FNN),
//!   Adam and full-batch MSE training.
//! * [`features`] turns a [`dsp::ForceWindow`] into the network input for each
//!   feature kind, including per-channel normalisation.
//! * [`plant`] the synthetic grinding plant, sensor corruption and the
//!   Data1..Data4 dataset generator.
//! * [`control`] impedance control with a disturbance observer and the
//!   closed-loop runner.
//! * [`service`] the UDP estimator protocol, server and client.
//! * [`experiment`] the experiment runner behind the `melforce` binary.

pub mod checkpoint;
pub mod control;
pub mod dsp;
pub mod experiment;
pub mod features;
pub mod neural;
pub mod plant;
pub mod service;

pub use checkpoint::{Checkpoint, Estimator};
pub use dsp::{ForceWindow, MelSpectrogram, SpectrogramConfig};
pub use features::FeatureKind;
pub use plant::Scenario;
