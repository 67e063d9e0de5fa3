//! Fixed-size little-endian frames.
//!
//! Request (2067 bytes): magic `MELF`, version u8, seq u32, t_end_us u64,
//! n_samples u16 (= 512), 512 x f32.
//! Response (14 bytes): magic, version, seq u32, estimate f32, status u8.

use crate::dsp::{ForceWindow, WINDOW_LEN};

pub const MAGIC: [u8; 4] = *b"MELF";
pub const VERSION: u8 = 1;
pub const REQUEST_HEADER_LEN: usize = 4 + 1 + 4 + 8 + 2;
pub const REQUEST_LEN: usize = REQUEST_HEADER_LEN + 4 * WINDOW_LEN;
pub const RESPONSE_LEN: usize = 4 + 1 + 4 + 4 + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("bad length: expected {expected} bytes, got {got}")]
    Length { expected: usize, got: usize },
    #[error("bad magic")]
    Magic,
    #[error("bad version {0}")]
    Version(u8),
    #[error("bad sample count {0}")]
    SampleCount(u16),
    #[error("bad status {0}")]
    Status(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error("bad sample count {0}")]
    SampleCount(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Status {
    Ok = 0,
    ModelNotLoaded = 1,
    BadRequest = 2,
}

impl TryFrom<u8> for Status {
    type Error = DecodeError;
    fn try_from(b: u8) -> Result<Self, DecodeError> {
        match b {
            0 => Ok(Status::Ok),
            1 => Ok(Status::ModelNotLoaded),
            2 => Ok(Status::BadRequest),
            other => Err(DecodeError::Status(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRequest {
    pub seq: u32,
    pub t_end_us: u64,
    pub samples: Vec<f32>,
}

impl EstimateRequest {
    pub fn from_window(seq: u32, window: &ForceWindow) -> Self {
        Self {
            seq,
            t_end_us: (window.t_end() * 1e6).round().max(0.0) as u64,
            samples: window.samples().iter().map(|&x| x as f32).collect(),
        }
    }

    /// The window the server reconstructs from this request.
    pub fn to_window(&self) -> Result<ForceWindow, crate::dsp::DspError> {
        ForceWindow::from_samples(self.samples.iter().map(|&x| f64::from(x)).collect(), self.t_end_us as f64 * 1e-6)
    }

    pub fn encode(&self) -> Result<Vec<u8>, EncodeError> {
        if self.samples.len() != WINDOW_LEN {
            return Err(EncodeError::SampleCount(self.samples.len()));
        }
        let mut b = Vec::with_capacity(REQUEST_LEN);
        b.extend_from_slice(&MAGIC);
        b.push(VERSION);
        b.extend_from_slice(&self.seq.to_le_bytes());
        b.extend_from_slice(&self.t_end_us.to_le_bytes());
        b.extend_from_slice(&(WINDOW_LEN as u16).to_le_bytes());
        for s in &self.samples {
            b.extend_from_slice(&s.to_le_bytes());
        }
        Ok(b)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        check_prefix(bytes)?;
        if bytes.len() >= REQUEST_HEADER_LEN {
            let n = u16::from_le_bytes([bytes[17], bytes[18]]);
            if n as usize != WINDOW_LEN {
                return Err(DecodeError::SampleCount(n));
            }
        }
        if bytes.len() != REQUEST_LEN {
            return Err(DecodeError::Length { expected: REQUEST_LEN, got: bytes.len() });
        }
        let seq = u32::from_le_bytes(bytes[5..9].try_into().unwrap());
        let t_end_us = u64::from_le_bytes(bytes[9..17].try_into().unwrap());
        let samples = bytes[REQUEST_HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { seq, t_end_us, samples })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateResponse {
    pub seq: u32,
    pub estimate: f32,
    pub status: Status,
}

impl EstimateResponse {
    pub fn encode(&self) -> [u8; RESPONSE_LEN] {
        let mut b = [0u8; RESPONSE_LEN];
        b[..4].copy_from_slice(&MAGIC);
        b[4] = VERSION;
        b[5..9].copy_from_slice(&self.seq.to_le_bytes());
        b[9..13].copy_from_slice(&self.estimate.to_le_bytes());
        b[13] = self.status as u8;
        b
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        check_prefix(bytes)?;
        if bytes.len() != RESPONSE_LEN {
            return Err(DecodeError::Length { expected: RESPONSE_LEN, got: bytes.len() });
        }
        Ok(Self {
            seq: u32::from_le_bytes(bytes[5..9].try_into().unwrap()),
            estimate: f32::from_le_bytes(bytes[9..13].try_into().unwrap()),
            status: Status::try_from(bytes[13])?,
        })
    }
}

fn check_prefix(bytes: &[u8]) -> Result<(), DecodeError> {
    if bytes.len() < 5 {
        return Err(DecodeError::Length { expected: 5, got: bytes.len() });
    }
    if bytes[..4] != MAGIC {
        return Err(DecodeError::Magic);
    }
    if bytes[4] != VERSION {
        return Err(DecodeError::Version(bytes[4]));
    }
    Ok(())
}

/// Sequence number of a malformed frame, if its magic and seq field survived.
pub fn recover_seq(bytes: &[u8]) -> Option<u32> {
    (bytes.len() >= 9 && bytes[..4] == MAGIC).then(|| u32::from_le_bytes(bytes[5..9].try_into().unwrap()))
}
