//! Per-agent feature vectors and history/future windows cut from scenarios.
//!
//! Windows are expressed in the target agent's frame at the prediction time:
//! origin at its position, +x along its heading. Negative-log-likelihoods and
//! displacement errors are invariant under this rigid transform.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::predictor::hyper::PredictorHyper;
use crate::predictor::linalg::Mat4;
use crate::scalar::Real;
use crate::scenario::{scene_graph, AgentId, AgentState, InteractionGraph, Scenario, EPS_SPEED};

pub const D_IN: usize = 7;
const POS_SCALE: f64 = 10.0;
const VEL_SCALE: f64 = 10.0;

/// Position (2), velocity (2), acceleration (2) and lateral lane offset (1)
/// of one agent at one step, in the window's local frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector<T>(pub [T; D_IN]);

impl<T: Real> FeatureVector<T> {
    pub fn zero() -> Self {
        Self([T::zero(); D_IN])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Rigid transform between world coordinates and a window's local frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame<T> {
    pub origin: Vec2<T>,
    pub cos: T,
    pub sin: T,
}

impl<T: Real> LocalFrame<T> {
    pub fn identity() -> Self {
        Self {
            origin: Vec2::zero(),
            cos: T::one(),
            sin: T::zero(),
        }
    }

    /// Frame at `s`'s position aligned with its heading (+x when stationary).
    pub fn of(s: &AgentState<T>) -> Self {
        let v = s.speed();
        let (cos, sin) = if v < T::lit(EPS_SPEED) {
            (T::one(), T::zero())
        } else {
            (s.velocity.x / v, s.velocity.y / v)
        };
        Self {
            origin: s.position,
            cos,
            sin,
        }
    }

    pub fn vec_to_local(&self, v: Vec2<T>) -> Vec2<T> {
        v.rotate(self.cos, -self.sin)
    }

    pub fn point_to_local(&self, p: Vec2<T>) -> Vec2<T> {
        self.vec_to_local(p - self.origin)
    }

    pub fn vec_to_world(&self, v: Vec2<T>) -> Vec2<T> {
        v.rotate(self.cos, self.sin)
    }

    pub fn point_to_world(&self, p: Vec2<T>) -> Vec2<T> {
        self.vec_to_world(p) + self.origin
    }

    /// `T Λ Tᵀ` with `T = blockdiag(R, R)`.
    pub fn cov_to_world(&self, m: &Mat4<T>) -> Mat4<T> {
        let (c, s) = (self.cos, self.sin);
        let r = [[c, -s], [s, c]];
        let t = |i: usize, j: usize| -> T {
            if i / 2 == j / 2 {
                r[i % 2][j % 2]
            } else {
                T::zero()
            }
        };
        let mut tm = [[T::zero(); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                tm[i][j] = (0..4).map(|k| t(i, k) * m[k][j]).sum();
            }
        }
        let mut out = [[T::zero(); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = (0..4).map(|k| tm[i][k] * t(j, k)).sum();
            }
        }
        for i in 0..4 {
            for j in i + 1..4 {
                let avg = (out[i][j] + out[j][i]) / T::lit(2.0);
                out[i][j] = avg;
                out[j][i] = avg;
            }
        }
        out
    }
}

/// Feature vector of `s` in `frame`.
pub fn features_of<T: Real>(s: &AgentState<T>, frame: &LocalFrame<T>, lane_centers: &[f64]) -> FeatureVector<T> {
    let p = frame.point_to_local(s.position) / T::lit(POS_SCALE);
    let v = frame.vec_to_local(s.velocity) / T::lit(VEL_SCALE);
    let a = frame.vec_to_local(s.acceleration);
    let offset = lane_centers
        .iter()
        .map(|&c| s.position.y - T::lit(c))
        .min_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or(T::zero());
    FeatureVector([p.x, p.y, v.x, v.y, a.x, a.y, offset])
}

/// One history step: the agents taking part, their features and the
/// message-passing neighborhoods (indices into `ids`).
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryStep<T> {
    pub frame: i64,
    pub ids: Vec<AgentId>,
    pub features: Vec<FeatureVector<T>>,
    pub neighbors: Vec<Vec<usize>>,
}

impl<T: Real> HistoryStep<T> {
    /// Neighborhoods come from the graph's edges `(j, w)`, restricted to
    /// agents that have features.
    pub fn new(frame: i64, features: &BTreeMap<AgentId, FeatureVector<T>>, graph: &InteractionGraph<T>) -> Self {
        let ids: Vec<AgentId> = features.keys().copied().collect();
        let neighbors = ids
            .iter()
            .map(|&j| {
                graph
                    .neighbors(j)
                    .filter(|&w| w != j)
                    .filter_map(|w| ids.binary_search(&w).ok())
                    .collect()
            })
            .collect();
        Self {
            frame,
            features: features.values().copied().collect(),
            ids,
            neighbors,
        }
    }

    pub fn index_of(&self, id: AgentId) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }
}

/// History plus (optionally) the ground-truth future of one target agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub target: AgentId,
    /// Scenario frame of the prediction time t.
    pub frame: i64,
    pub steps: Vec<HistoryStep<T>>,
    /// Target state `[x, y, vx, vy]` at t in the local frame.
    pub initial: [T; 4],
    /// Future target positions in the local frame; empty when unknown.
    pub truth: Vec<Vec2<T>>,
    pub local: LocalFrame<T>,
    pub dt: T,
}

impl<T: Real> Sample<T> {
    pub fn truth_world(&self) -> Vec<Vec2<T>> {
        self.truth.iter().map(|&p| self.local.point_to_world(p)).collect()
    }
}

/// Churn handling when cutting a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Churn {
    /// Drop the window if any involved agent is missing from a history step.
    Reject,
    /// Keep it; agents entering mid-history start from a zero hidden state.
    Allow,
}

/// Cuts the window ending at frame `t` for `target`. Returns `None` when the
/// target lacks the history (or, with `with_truth`, the future) or when churn
/// rejects it.
pub fn build_sample<T: Real>(
    scenario: &Scenario<T>,
    target: AgentId,
    t: i64,
    hyper: &PredictorHyper,
    with_truth: bool,
    churn: Churn,
) -> Result<Option<Sample<T>>> {
    let step = hyper.frame_step(scenario.frame_rate.as_f64())?;
    let hist_frames: Vec<i64> = (0..hyper.history as i64)
        .map(|k| t - (hyper.history as i64 - 1 - k) * step)
        .collect();
    let Some(now) = scenario.state(target, t) else {
        return Ok(None);
    };
    if hist_frames.iter().any(|&f| scenario.state(target, f).is_none()) {
        return Ok(None);
    }
    let mut truth_world = Vec::new();
    if with_truth {
        for p in 1..=hyper.horizon as i64 {
            match scenario.state(target, t + p * step) {
                Some(s) => truth_world.push(s.position),
                None => return Ok(None),
            }
        }
    }
    let radius = T::lit(hyper.radius);
    let mut involved = BTreeSet::new();
    for &f in &hist_frames {
        let states = scenario.frame(f).unwrap_or(&[]);
        let tgt = scenario.state(target, f).expect("checked above");
        for s in states {
            if (s.position - tgt.position).norm() <= radius {
                involved.insert(s.agent_id);
            }
        }
    }
    if churn == Churn::Reject
        && involved
            .iter()
            .any(|&id| hist_frames.iter().any(|&f| scenario.state(id, f).is_none()))
    {
        return Ok(None);
    }
    let local = LocalFrame::of(now);
    let mut steps = Vec::with_capacity(hist_frames.len());
    for &f in &hist_frames {
        let present: Vec<AgentState<T>> = scenario
            .frame(f)
            .unwrap_or(&[])
            .iter()
            .filter(|s| involved.contains(&s.agent_id))
            .cloned()
            .collect();
        let feats: BTreeMap<AgentId, FeatureVector<T>> = present
            .iter()
            .map(|s| (s.agent_id, features_of(s, &local, &hyper.lane_centers)))
            .collect();
        if feats.values().any(|fv| !fv.is_finite()) {
            return Err(Error::NonFinite(f as usize));
        }
        let graph = scene_graph(target, f, &present, radius);
        steps.push(HistoryStep::new(f, &feats, &graph));
    }
    let v = local.vec_to_local(now.velocity);
    Ok(Some(Sample {
        target,
        frame: t,
        steps,
        initial: [T::zero(), T::zero(), v.x, v.y],
        truth: truth_world.iter().map(|&p| local.point_to_local(p)).collect(),
        local,
        dt: T::lit(hyper.dt),
    }))
}

/// Sliding windows over every agent, dropping windows with churn.
pub fn extract_windows<T: Real>(scenario: &Scenario<T>, hyper: &PredictorHyper) -> Result<Vec<Sample<T>>> {
    hyper.validate()?;
    let step = hyper.frame_step(scenario.frame_rate.as_f64())?;
    let mut out = Vec::new();
    for (&id, info) in scenario.agents() {
        let first_t = info.first_frame + (hyper.history as i64 - 1) * step;
        let last_t = info.last_frame - hyper.horizon as i64 * step;
        let mut t = first_t;
        while t <= last_t {
            if let Some(s) = build_sample(scenario, id, t, hyper, true, Churn::Reject)? {
                out.push(s);
            }
            t += hyper.stride as i64 * step;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyper() -> PredictorHyper {
        PredictorHyper {
            history: 3,
            horizon: 2,
            dt: 0.2,
            ..Default::default()
        }
    }

    fn line(id: AgentId, frames: std::ops::Range<i64>, y: f64, v: (f64, f64)) -> Vec<AgentState<f64>> {
        frames
            .map(|f| {
                let t = f as f64 * 0.2;
                AgentState::new(id, f, Vec2::new(10.0 + v.0 * t, y + v.1 * t), Vec2::new(v.0, v.1))
            })
            .collect()
    }

    #[test]
    fn local_frame_round_trip() {
        let s = AgentState::<f64>::new(0, 0, Vec2::new(3.0, 4.0), Vec2::new(0.0, 5.0));
        let f = LocalFrame::of(&s);
        let p = Vec2::new(-1.5, 7.25);
        let back = f.point_to_world(f.point_to_local(p));
        assert!((back - p).norm() < 1e-12);
        let v = f.vec_to_local(s.velocity);
        assert!((v.x - 5.0).abs() < 1e-12 && v.y.abs() < 1e-12);
    }

    #[test]
    fn windows_and_churn() {
        let mut states = line(1, 0..10, 0.0, (10.0, 0.0));
        states.extend(line(2, 0..10, 3.0, (10.0, 0.0)));
        // agent 3 appears mid-scene close to agent 1
        states.extend(line(3, 4..10, -3.0, (10.0, 0.0)));
        let s = Scenario::from_states(5.0, states, "t").unwrap();
        let w = extract_windows(&s, &hyper()).unwrap();
        // t ranges over 2..=7 for agents 1,2 and 6..=7 for agent 3; agent 3
        // enters inside the history of t = 4 and t = 5, which are dropped
        let count = |id| w.iter().filter(|x| x.target == id).count();
        assert_eq!(count(1), 4);
        assert_eq!(count(2), 4);
        assert!(w.iter().all(|x| x.frame != 4 && x.frame != 5));
        assert_eq!(count(3), 2);
        let first = &w[0];
        assert_eq!(first.steps.len(), 3);
        assert_eq!(first.truth.len(), 2);
        assert!((first.truth[0].x - 2.0).abs() < 1e-12);
        assert_eq!(first.initial, [0.0, 0.0, 10.0, 0.0]);
    }

    #[test]
    fn allow_churn_keeps_window() {
        let mut states = line(1, 0..10, 0.0, (10.0, 0.0));
        states.extend(line(3, 4..10, -3.0, (10.0, 0.0)));
        let s = Scenario::from_states(5.0, states, "t").unwrap();
        let h = hyper();
        assert!(build_sample(&s, 1, 5, &h, true, Churn::Reject).unwrap().is_none());
        let kept = build_sample(&s, 1, 5, &h, true, Churn::Allow).unwrap().unwrap();
        assert_eq!(kept.steps[0].ids, vec![1]);
        assert_eq!(kept.steps[2].ids, vec![1, 3]);
        assert_eq!(kept.steps[2].neighbors[0], vec![1]);
    }

    #[test]
    fn frame_step_checks() {
        let h = PredictorHyper::default();
        assert_eq!(h.frame_step(25.0).unwrap(), 5);
        assert!(h.frame_step(12.0).is_err());
    }
}
