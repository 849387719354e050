use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Predictor architecture and training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictorHyper {
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Mixture modes L.
    pub modes: usize,
    /// Hidden size.
    pub hidden: usize,
    /// History steps t_h.
    pub history: usize,
    /// Prediction steps t_f.
    pub horizon: usize,
    /// Step period Δt, s. Scenario frames are subsampled to this period.
    pub dt: f64,
    pub batch_size: usize,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    /// Message-passing neighbor radius, meters.
    pub radius: f64,
    /// Window stride in (subsampled) steps.
    pub stride: usize,
    /// World-frame y of lane centerlines for the lateral-offset feature;
    /// empty means no lane reference (offset 0).
    pub lane_centers: Vec<f64>,
}

impl Default for PredictorHyper {
    fn default() -> Self {
        Self {
            lr: 0.01,
            epochs: 200,
            seed: 0,
            modes: 3,
            hidden: 32,
            history: 10,
            horizon: 15,
            dt: 0.2,
            batch_size: 8,
            clip_norm: 5.0,
            radius: 50.0,
            stride: 1,
            lane_centers: Vec::new(),
        }
    }
}

impl PredictorHyper {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::BadParams(m.to_string()));
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return bad("lr must be > 0");
        }
        if self.modes == 0 || self.hidden == 0 || self.history == 0 || self.horizon == 0 {
            return bad("modes, hidden, history and horizon must be >= 1");
        }
        if !(self.dt > 0.0) || !(self.radius > 0.0) || !(self.clip_norm > 0.0) {
            return bad("dt, radius and clip_norm must be > 0");
        }
        if self.batch_size == 0 || self.stride == 0 {
            return bad("batch_size and stride must be >= 1");
        }
        Ok(())
    }

    /// Scenario frames per model step for a given frame rate.
    pub fn frame_step(&self, frame_rate: f64) -> Result<i64> {
        let ratio = self.dt * frame_rate;
        let step = ratio.round();
        if step < 1.0 || (ratio - step).abs() > 1e-6 * ratio.max(1.0) {
            return Err(Error::BadParams(format!(
                "step period {} s is not a whole number of frames at {frame_rate} Hz",
                self.dt
            )));
        }
        Ok(step as i64)
    }
}
