//! Fusion of multimodal forecasts with the directional interaction field:
//! per-mode predicted risk, expectation over modes, multi-agent totals over
//! the horizon, time-weighted cumulative risk and probabilistic rasters.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::predictor::{build_sample, Churn, MixturePrediction, Model};
use crate::risk_field::{directional_force, sample_grid, GridSpec, RiskFieldParams, RiskRaster};
use crate::scalar::Real;
use crate::scenario::{AgentId, AgentState, InteractionGraph, Scenario, EPS_SPEED};

/// Where the predicted velocity of a mode comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VelocitySource {
    /// Average velocity from the current position to the predicted one.
    #[default]
    FiniteDifference,
    /// The velocity component of the mode's state.
    ModeState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightPreset {
    /// `1 / t_f` at every step.
    #[default]
    Uniform,
    /// `exp(−λ p)`.
    ExpDecay,
}

impl fmt::Display for WeightPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightPreset::Uniform => "uniform",
            WeightPreset::ExpDecay => "exp_decay",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    pub velocity: VelocitySource,
    pub weights: WeightPreset,
    /// λ of the exponential-decay preset.
    pub decay_lambda: f64,
    /// Replace the reduced mass by 1 kg in the predicted energy.
    pub unit_mass_energy: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            velocity: VelocitySource::FiniteDifference,
            weights: WeightPreset::Uniform,
            decay_lambda: 0.1,
            unit_mass_energy: false,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.decay_lambda >= 0.0) || !self.decay_lambda.is_finite() {
            return Err(Error::BadParams("decay_lambda must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Forecast for one agent, in world coordinates, plus its state at the
/// prediction time (position, size, mass and kind are taken from it).
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPrediction<T> {
    pub current: AgentState<T>,
    pub mixture: MixturePrediction<T>,
    /// Prediction step period, s.
    pub dt: T,
}

/// Ego motion over the horizon.
#[derive(Debug, Clone, PartialEq)]
pub enum EgoMotion<T> {
    ConstantVelocity,
    /// Ego state at steps `1..=t_f`.
    Planned(Vec<AgentState<T>>),
}

/// Ego state at step `p` (`p = 0` is the current state).
pub fn ego_at_step<T: Real>(ego: &AgentState<T>, motion: &EgoMotion<T>, p: usize, dt: T) -> Result<AgentState<T>> {
    if p == 0 {
        return Ok(ego.clone());
    }
    match motion {
        EgoMotion::ConstantVelocity => {
            let mut s = ego.clone();
            s.position = ego.position + ego.velocity.scale(T::lit(p as f64) * dt);
            s.acceleration = Vec2::zero();
            Ok(s)
        }
        EgoMotion::Planned(states) => states
            .get(p - 1)
            .cloned()
            .ok_or_else(|| Error::BadParams(format!("planned ego trajectory has no step {p}"))),
    }
}

/// `(x̂_p − x_now) / (p Δt)`.
pub fn estimate_velocity<T: Real>(x_now: Vec2<T>, x_pred: Vec2<T>, p: usize, dt: T) -> Result<Vec2<T>> {
    if p == 0 || !(dt > T::zero()) {
        return Err(Error::BadParams("velocity estimate needs p >= 1 and dt > 0".into()));
    }
    Ok((x_pred - x_now) / (T::lit(p as f64) * dt))
}

/// Angle between the ego velocity and a predicted velocity, in `[0, π]`.
pub fn predicted_angle<T: Real>(v_ego: Vec2<T>, v_hat: Vec2<T>) -> T {
    v_ego.angle_to(v_hat, T::lit(EPS_SPEED))
}

/// The agent as predicted by mode `l` at step `p` (1-based).
pub fn predicted_state<T: Real>(pred: &AgentPrediction<T>, l: usize, p: usize, velocity: VelocitySource) -> Result<AgentState<T>> {
    let mode = pred
        .mixture
        .modes
        .get(l)
        .ok_or_else(|| Error::ShapeMismatch(format!("mode {l} out of range")))?;
    if p == 0 || p > mode.states.len() {
        return Err(Error::ShapeMismatch(format!("step {p} outside horizon {}", mode.states.len())));
    }
    let mut s = pred.current.clone();
    s.position = mode.position(p - 1);
    s.velocity = match velocity {
        VelocitySource::FiniteDifference => estimate_velocity(pred.current.position, s.position, p, pred.dt)?,
        VelocitySource::ModeState => mode.velocity(p - 1),
    };
    s.acceleration = Vec2::zero();
    Ok(s)
}

fn summand<T: Real>(ego: &AgentState<T>, other: &AgentState<T>, params: &RiskFieldParams<T>, unit_mass: bool) -> T {
    let c = params.c_for(other.agent_id);
    if unit_mass {
        // reduced mass of two 2 kg bodies is exactly 1 kg
        let (mut e, mut o) = (ego.clone(), other.clone());
        e.mass = T::lit(2.0);
        o.mass = T::lit(2.0);
        directional_force(&e, &o, params, c).directional_force
    } else {
        directional_force(ego, other, params, c).directional_force
    }
}

/// Directional force on `ego_p` (the ego at step `p`) from mode `l` of an
/// agent's forecast at that step. Independent of the mode's weight.
pub fn mode_risk<T: Real>(
    ego_p: &AgentState<T>,
    pred: &AgentPrediction<T>,
    l: usize,
    p: usize,
    params: &RiskFieldParams<T>,
    cfg: &FusionConfig,
) -> Result<T> {
    let other = predicted_state(pred, l, p, cfg.velocity)?;
    Ok(summand(ego_p, &other, params, cfg.unit_mass_energy))
}

/// `Σ_l π_l · mode_risk(l)`.
pub fn expected_pair_risk<T: Real>(
    ego_p: &AgentState<T>,
    pred: &AgentPrediction<T>,
    p: usize,
    params: &RiskFieldParams<T>,
    cfg: &FusionConfig,
) -> Result<T> {
    let mut acc = T::zero();
    for (l, m) in pred.mixture.modes.iter().enumerate() {
        acc += m.pi * mode_risk(ego_p, pred, l, p, params, cfg)?;
    }
    Ok(acc)
}

/// Expected force from one agent with the interaction indicator applied per
/// mode: a mode contributes only if its predicted position lies within the
/// interaction radius of the ego at that step.
fn gated_pair_risk<T: Real>(
    ego_p: &AgentState<T>,
    pred: &AgentPrediction<T>,
    p: usize,
    params: &RiskFieldParams<T>,
    cfg: &FusionConfig,
) -> Result<T> {
    let mut acc = T::zero();
    for (l, m) in pred.mixture.modes.iter().enumerate() {
        let other = predicted_state(pred, l, p, cfg.velocity)?;
        if (other.position - ego_p.position).norm() <= params.radius {
            acc += m.pi * summand(ego_p, &other, params, cfg.unit_mass_energy);
        }
    }
    Ok(acc)
}

/// `Σ_{j ∈ N_i} Σ_l π_l I_ij(l, p) · mode_risk`. Candidates are the ego's
/// neighbors in `graph` that have a forecast; the indicator is the radius
/// gate evaluated on the predicted geometry at step `p`.
pub fn total_expected_risk<T: Real>(
    predictions: &BTreeMap<AgentId, AgentPrediction<T>>,
    graph: &InteractionGraph<T>,
    p: usize,
    ego_p: &AgentState<T>,
    params: &RiskFieldParams<T>,
    cfg: &FusionConfig,
) -> Result<T> {
    let mut total = T::zero();
    for (&id, pred) in predictions {
        if id == ego_p.agent_id || !graph.indicator(graph.ego_id, id) {
            continue;
        }
        total += gated_pair_risk(ego_p, pred, p, params, cfg)?;
    }
    Ok(total)
}

/// Graph linking the ego to every agent that has a forecast.
pub fn candidate_graph<T: Real>(
    ego_id: AgentId,
    frame: i64,
    predictions: &BTreeMap<AgentId, AgentPrediction<T>>,
    radius: T,
) -> InteractionGraph<T> {
    let mut g = InteractionGraph::empty(ego_id, frame, radius);
    g.edges = predictions.keys().filter(|&&j| j != ego_id).map(|&j| (ego_id, j)).collect();
    g
}

/// Step weights `ω_1..ω_{t_f}`.
pub fn step_weights<T: Real>(preset: WeightPreset, horizon: usize, lambda: f64) -> Vec<T> {
    (1..=horizon)
        .map(|p| match preset {
            WeightPreset::Uniform => T::one() / T::lit(horizon as f64),
            WeightPreset::ExpDecay => T::lit((-lambda * p as f64).exp()),
        })
        .collect()
}

/// `Σ_p ω_p F̃(p)`.
pub fn cumulative_risk<T: Real>(series: &[T], weights: &[T]) -> Result<T> {
    if series.len() != weights.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} series values vs {} weights",
            series.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= T::zero())) {
        return Err(Error::BadParams("risk weights must be >= 0".into()));
    }
    Ok(series.iter().zip(weights).fold(T::zero(), |acc, (&f, &w)| acc + w * f))
}

/// Expected total force per prediction step and its weighted sum.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskTimeSeries<T> {
    pub ego_id: AgentId,
    /// Scenario frame of the prediction time.
    pub frame: i64,
    pub dt: T,
    /// Steps `1..=t_f`.
    pub steps: Vec<usize>,
    /// N
    pub values: Vec<T>,
    pub weights: Vec<T>,
    pub preset: WeightPreset,
    pub cumulative: T,
}

pub const SERIES_HEADER: &str = "step,time_s,expected_force_N";

impl<T: Real> RiskTimeSeries<T> {
    /// CSV with one row per step (time relative to the prediction time) and
    /// a trailing `# cumulative=...,weights=...` line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{SERIES_HEADER}")?;
        for (&p, v) in self.steps.iter().zip(&self.values) {
            let t = self.dt.as_f64() * p as f64;
            writeln!(w, "{p},{t},{}", v.as_f64())?;
        }
        writeln!(w, "# cumulative={},weights={}", self.cumulative.as_f64(), self.preset)?;
        Ok(())
    }
}

/// Runs the fusion over every step of the horizon.
#[allow(clippy::too_many_arguments)]
pub fn risk_series<T: Real>(
    ego: &AgentState<T>,
    motion: &EgoMotion<T>,
    predictions: &BTreeMap<AgentId, AgentPrediction<T>>,
    horizon: usize,
    dt: T,
    params: &RiskFieldParams<T>,
    cfg: &FusionConfig,
) -> Result<RiskTimeSeries<T>> {
    params.validate()?;
    cfg.validate()?;
    let graph = candidate_graph(ego.agent_id, ego.frame, predictions, params.radius);
    let mut values = Vec::with_capacity(horizon);
    for p in 1..=horizon {
        let ego_p = ego_at_step(ego, motion, p, dt)?;
        values.push(total_expected_risk(predictions, &graph, p, &ego_p, params, cfg)?);
    }
    let weights = step_weights(cfg.weights, horizon, cfg.decay_lambda);
    let cumulative = cumulative_risk(&values, &weights)?;
    Ok(RiskTimeSeries {
        ego_id: ego.agent_id,
        frame: ego.frame,
        dt,
        steps: (1..=horizon).collect(),
        values,
        weights,
        preset: cfg.weights,
        cumulative,
    })
}

/// Probabilistic field on a probe at each cell center: for every forecast
/// agent (ascending id) and mode, `π_l` times the directional force, gated by
/// the interaction radius around the cell.
pub fn probabilistic_raster<T: Real>(
    predictions: &BTreeMap<AgentId, AgentPrediction<T>>,
    probe: &AgentState<T>,
    p: usize,
    frame: i64,
    grid: &GridSpec<T>,
    params: &RiskFieldParams<T>,
    cfg: &FusionConfig,
) -> Result<RiskRaster<T>> {
    params.validate()?;
    let mut sources: Vec<(T, AgentState<T>)> = Vec::new();
    let mut bounds = Vec::with_capacity(predictions.len());
    for pred in predictions.values() {
        let start = sources.len();
        for (l, m) in pred.mixture.modes.iter().enumerate() {
            sources.push((m.pi, predicted_state(pred, l, p, cfg.velocity)?));
        }
        bounds.push(start..sources.len());
    }
    sample_grid(grid, frame, probe, |pr| {
        let mut total = T::zero();
        for range in &bounds {
            let mut agent = T::zero();
            let mut any = false;
            for (pi, other) in &sources[range.clone()] {
                if (other.position - pr.position).norm() <= params.radius {
                    agent += *pi * summand(pr, other, params, cfg.unit_mass_energy);
                    any = true;
                }
            }
            if any {
                total = total + agent;
            }
        }
        total
    })
}

/// One π = 1 mode per agent replaying the recorded states at
/// `t + p · frame_step`, and the ego's recorded trajectory. Agents whose
/// future is not fully recorded are left out.
pub fn replay_predictions<T: Real>(
    scenario: &Scenario<T>,
    ego_id: Option<AgentId>,
    t: i64,
    frame_step: i64,
    horizon: usize,
) -> Result<(BTreeMap<AgentId, AgentPrediction<T>>, EgoMotion<T>)> {
    if frame_step < 1 {
        return Err(Error::BadParams("frame step must be >= 1".into()));
    }
    let now = scenario.frame(t).ok_or(Error::EmptyFrame(t))?;
    let dt = scenario.dt() * T::lit(frame_step as f64);
    let future = |id: AgentId| -> Option<Vec<AgentState<T>>> {
        (1..=horizon as i64)
            .map(|p| scenario.state(id, t + p * frame_step).cloned())
            .collect()
    };
    let mut preds = BTreeMap::new();
    for s in now {
        if Some(s.agent_id) == ego_id {
            continue;
        }
        if let Some(fut) = future(s.agent_id) {
            let pos: Vec<Vec2<T>> = fut.iter().map(|f| f.position).collect();
            let vel: Vec<Vec2<T>> = fut.iter().map(|f| f.velocity).collect();
            preds.insert(
                s.agent_id,
                AgentPrediction {
                    current: s.clone(),
                    mixture: MixturePrediction::deterministic(&pos, &vel),
                    dt,
                },
            );
        }
    }
    let motion = match ego_id {
        Some(id) => {
            scenario.state(id, t).ok_or(Error::EgoAbsent(t))?;
            EgoMotion::Planned(future(id).ok_or_else(|| {
                Error::BadParams(format!("ego {id} future not recorded for {horizon} steps after frame {t}"))
            })?)
        }
        None => EgoMotion::ConstantVelocity,
    };
    Ok((preds, motion))
}

/// Constant-velocity single-mode forecast from the agent's current state.
pub fn constant_velocity_prediction<T: Real>(s: &AgentState<T>, horizon: usize, dt: T) -> AgentPrediction<T> {
    let pos: Vec<Vec2<T>> = (1..=horizon)
        .map(|p| s.position + s.velocity.scale(T::lit(p as f64) * dt))
        .collect();
    let vel = vec![s.velocity; horizon];
    AgentPrediction {
        current: s.clone(),
        mixture: MixturePrediction::deterministic(&pos, &vel),
        dt,
    }
}

/// Model forecasts for every agent present at `t` other than `exclude`.
/// Agents without a full history fall back to constant velocity.
pub fn model_predictions<T: Real>(
    model: &Model<T>,
    scenario: &Scenario<T>,
    t: i64,
    exclude: Option<AgentId>,
) -> Result<BTreeMap<AgentId, AgentPrediction<T>>> {
    let hyper = &model.hyper;
    let dt = T::lit(hyper.dt);
    let now = scenario.frame(t).ok_or(Error::EmptyFrame(t))?;
    let mut out = BTreeMap::new();
    for s in now {
        if Some(s.agent_id) == exclude {
            continue;
        }
        let pred = match build_sample(scenario, s.agent_id, t, hyper, false, Churn::Allow)? {
            Some(sample) => AgentPrediction {
                current: s.clone(),
                mixture: model.predict_world(&sample)?,
                dt,
            },
            None => constant_velocity_prediction(s, hyper.horizon, dt),
        };
        out.insert(s.agent_id, pred);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::Mode;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn params_unit() -> RiskFieldParams<f64> {
        let mut p = RiskFieldParams::default();
        p.k.car = 1.0;
        p
    }

    #[test]
    fn velocity_estimates() {
        let z = Vec2::<f64>::new(0.0, 0.0);
        assert_eq!(estimate_velocity(z, z, 3, 0.2).unwrap(), z);
        let v = estimate_velocity(z, Vec2::new(10.0, 0.0), 5, 0.2).unwrap();
        assert!((v.x - 10.0).abs() < 1e-12 && v.y == 0.0);
        let v2 = estimate_velocity(z, Vec2::new(20.0, 0.0), 5, 0.2).unwrap();
        assert!((v2.x - 2.0 * v.x).abs() < 1e-12);
        assert!(estimate_velocity(z, z, 0, 0.2).is_err());
    }

    #[test]
    fn angles() {
        let e = Vec2::new(3.0, 0.0);
        assert_eq!(predicted_angle(e, Vec2::new(9.0, 0.0)), 0.0);
        assert!((predicted_angle(e, Vec2::new(0.0, 2.0)) - FRAC_PI_2).abs() < 1e-15);
        assert!((predicted_angle(e, Vec2::new(-1.0, 0.0)) - PI).abs() < 1e-15);
    }

    fn single(current: AgentState<f64>, pos: Vec2<f64>, vel: Vec2<f64>) -> AgentPrediction<f64> {
        AgentPrediction {
            current,
            mixture: MixturePrediction::deterministic(&[pos], &[vel]),
            dt: 0.2,
        }
    }

    #[test]
    fn mode_risk_hand_case() {
        let ego = AgentState::new(1, 0, Vec2::new(0.0, 0.0), Vec2::new(20.0, 0.0));
        // x_now chosen so the finite difference gives 30 m/s over one step
        let cur = AgentState::new(2, 0, Vec2::new(24.0, 0.0), Vec2::new(30.0, 0.0));
        let pred = single(cur, Vec2::new(30.0, 0.0), Vec2::new(30.0, 0.0));
        let r = mode_risk(&ego, &pred, 0, 1, &params_unit(), &FusionConfig::default()).unwrap();
        // E = ½·750·10² = 37500 J, r = 30 m, θ = 0, pole ⇒ α_lon = 10, α_lat = 1
        assert!((r - 12500.0).abs() < 1e-9);
        // same velocity as the ego: no relative motion
        let cur = AgentState::new(2, 0, Vec2::new(26.0, 0.0), Vec2::new(20.0, 0.0));
        let pred = single(cur, Vec2::new(30.0, 0.0), Vec2::new(20.0, 0.0));
        assert_eq!(mode_risk(&ego, &pred, 0, 1, &params_unit(), &FusionConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn unit_mass_variant() {
        let ego = AgentState::new(1, 0, Vec2::new(0.0, 0.0), Vec2::new(20.0, 0.0));
        let cur = AgentState::new(2, 0, Vec2::new(24.0, 0.0), Vec2::new(30.0, 0.0));
        let pred = single(cur, Vec2::new(30.0, 0.0), Vec2::new(30.0, 0.0));
        let cfg = FusionConfig {
            unit_mass_energy: true,
            ..Default::default()
        };
        let r = mode_risk(&ego, &pred, 0, 1, &params_unit(), &cfg).unwrap();
        assert!((r - 12500.0 / 750.0).abs() < 1e-9);
    }

    #[test]
    fn expectation_is_weighted_sum() {
        let ego = AgentState::new(1, 0, Vec2::new(0.0, 0.0), Vec2::new(20.0, 0.0));
        let cur = AgentState::new(2, 0, Vec2::new(20.0, 2.0), Vec2::new(15.0, 0.0));
        let mk = |pi: f64, x: f64| Mode {
            pi,
            states: vec![[x, 2.0, 15.0, 0.0]],
            covariances: vec![[[0.0; 4]; 4]],
        };
        let pred = AgentPrediction {
            current: cur,
            mixture: MixturePrediction {
                modes: vec![mk(0.25, 22.0), mk(0.75, 40.0)],
            },
            dt: 0.2,
        };
        let cfg = FusionConfig {
            velocity: VelocitySource::ModeState,
            ..Default::default()
        };
        let p = params_unit();
        let r0 = mode_risk(&ego, &pred, 0, 1, &p, &cfg).unwrap();
        let r1 = mode_risk(&ego, &pred, 1, 1, &p, &cfg).unwrap();
        let e = expected_pair_risk(&ego, &pred, 1, &p, &cfg).unwrap();
        assert!((e - (0.25 * r0 + 0.75 * r1)).abs() < 1e-9 * e);
        assert!(r0.min(r1) <= e && e <= r0.max(r1));
    }

    #[test]
    fn cumulative_examples() {
        let s = vec![2.0f64; 5];
        assert!((cumulative_risk(&s, &[1.0; 5]).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(cumulative_risk(&s, &[0.0; 5]).unwrap(), 0.0);
        assert!(cumulative_risk(&s, &[1.0; 4]).is_err());
        let w: Vec<f64> = step_weights(WeightPreset::Uniform, 4, 0.1);
        assert_eq!(w, vec![0.25; 4]);
        let w: Vec<f64> = step_weights(WeightPreset::ExpDecay, 2, 0.1);
        assert!((w[1] - (-0.2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn empty_predictions_give_zero() {
        let ego = AgentState::new(1, 0, Vec2::new(0.0, 0.0), Vec2::new(20.0, 0.0));
        let preds = BTreeMap::new();
        let s = risk_series(&ego, &EgoMotion::ConstantVelocity, &preds, 3, 0.2, &params_unit(), &FusionConfig::default())
            .unwrap();
        assert_eq!(s.values, vec![0.0; 3]);
        assert_eq!(s.cumulative, 0.0);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,time_s,expected_force_N\n1,0.2,0\n"));
        assert!(text.ends_with("# cumulative=0,weights=uniform\n"));
    }
}
