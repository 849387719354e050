//! Synthetic training corpus of isolated constant-velocity and
//! constant-turn-rate tracks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::geom::Vec2;
use crate::predictor::hyper::PredictorHyper;
use crate::scalar::Real;
use crate::scenario::{AgentId, AgentState, Scenario};

/// Spacing between tracks; far beyond any interaction radius.
pub const TRACK_SPACING: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackSpec {
    pub speed: f64,
    pub heading: f64,
    /// Yaw rate, rad/s; zero for a straight track.
    pub yaw_rate: f64,
}

impl TrackSpec {
    /// Position, velocity and acceleration at time `t` from the origin.
    pub fn kinematics(&self, t: f64) -> (Vec2<f64>, Vec2<f64>, Vec2<f64>) {
        let (v, w, h0) = (self.speed, self.yaw_rate, self.heading);
        let h = h0 + w * t;
        let vel = Vec2::new(v * h.cos(), v * h.sin());
        if w == 0.0 {
            return (vel.scale(t), vel, Vec2::zero());
        }
        let pos = Vec2::new(v / w * (h.sin() - h0.sin()), -v / w * (h.cos() - h0.cos()));
        let acc = Vec2::new(-v * w * h.sin(), v * w * h.cos());
        (pos, vel, acc)
    }
}

/// Track parameters: even indices straight, odd indices turning. Speeds are
/// uniform in [5, 15] m/s, yaw-rate magnitudes in [0.03, 0.1] rad/s.
pub fn track_specs(n: usize, seed: u64) -> Vec<TrackSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|k| {
            let speed = rng.gen_range(5.0..15.0);
            let heading = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let mag = rng.gen_range(0.03..0.1);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let yaw_rate = if k % 2 == 0 { 0.0 } else { sign * mag };
            TrackSpec {
                speed,
                heading,
                yaw_rate,
            }
        })
        .collect()
}

/// One scenario holding `n` tracks of `history + horizon` frames each, sampled
/// at the model step period.
pub fn synthetic_corpus<T: Real>(n: usize, hyper: &PredictorHyper, seed: u64) -> Result<Scenario<T>> {
    hyper.validate()?;
    let frames = (hyper.history + hyper.horizon) as i64;
    let mut states = Vec::with_capacity(n * frames as usize);
    for (k, spec) in track_specs(n, seed).iter().enumerate() {
        let origin = Vec2::new(k as f64 * TRACK_SPACING, 0.0);
        for f in 0..frames {
            let (p, v, a) = spec.kinematics(f as f64 * hyper.dt);
            let mut s = AgentState::new(k as AgentId + 1, f, (origin + p).cast(), v.cast());
            s.acceleration = a.cast();
            states.push(s);
        }
    }
    Scenario::from_states(T::lit(1.0 / hyper.dt), states, "synthetic")
}
