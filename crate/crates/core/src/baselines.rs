//! Classical surrogate safety metrics used as comparison baselines, plus a
//! non-directional forward-only field proxy ("NC Field").
//!
//! TTC, THW and RSS are longitudinal: they only apply to a lead agent ahead
//! of the ego (along its heading) inside the ego's lane band. Gaps are
//! bumper-to-bumper.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::risk_field::{pairwise_force, total_directional_force, RiskFieldParams};
use crate::scalar::{percentile, Real};
use crate::scenario::{build_graph, AgentId, AgentState, InteractionGraph, Scenario, EPS_SPEED};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[serde(bound(deserialize = "T: Real"))]
pub struct RssParams<T> {
    /// Response time, s.
    pub rho: T,
    /// Worst-case acceleration of the rear vehicle during the response, m/s².
    pub a_max_accel: T,
    /// Minimum braking the rear vehicle applies, m/s².
    pub b_min_brake: T,
    /// Maximum braking of the front vehicle, m/s².
    pub b_max_brake: T,
}

impl<T: Real> Default for RssParams<T> {
    fn default() -> Self {
        Self {
            rho: T::lit(0.5),
            a_max_accel: T::lit(2.0),
            b_min_brake: T::lit(4.0),
            b_max_brake: T::lit(8.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct BaselineConfig<T> {
    pub rss: RssParams<T>,
    /// Lateral half-width of the lane band, meters.
    pub lane_half_width: T,
    /// Detection: TTC below this, s.
    #[serde(with = "crate::scalar::extended_float")]
    pub ttc_threshold: T,
    /// Detection: THW below this, s.
    #[serde(with = "crate::scalar::extended_float")]
    pub thw_threshold: T,
    /// Detection: RSS margin above this, meters.
    #[serde(with = "crate::scalar::extended_float")]
    pub rss_margin_threshold: T,
    /// Detection: NC-field proxy above this, N.
    #[serde(with = "crate::scalar::extended_float")]
    pub nc_field_threshold: T,
    /// Detection: directional field force above this, N.
    #[serde(with = "crate::scalar::extended_float")]
    pub risknet_threshold: T,
}

impl<T: Real> Default for BaselineConfig<T> {
    fn default() -> Self {
        Self {
            rss: RssParams::default(),
            lane_half_width: T::lit(1.75),
            ttc_threshold: T::lit(3.0),
            thw_threshold: T::lit(1.0),
            rss_margin_threshold: T::zero(),
            nc_field_threshold: T::lit(2000.0),
            risknet_threshold: T::lit(2000.0),
        }
    }
}

impl<T: Real> BaselineConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let r = &self.rss;
        for (v, name) in [
            (r.rho, "rss.rho"),
            (r.a_max_accel, "rss.a_max_accel"),
            (r.b_min_brake, "rss.b_min_brake"),
            (r.b_max_brake, "rss.b_max_brake"),
            (self.lane_half_width, "lane_half_width"),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::BadParams(format!("{name} must be positive")));
            }
        }
        // infinite thresholds are allowed and disable detection
        for (v, name) in [(self.ttc_threshold, "ttc_threshold"), (self.thw_threshold, "thw_threshold")] {
            if !(v > T::zero()) {
                return Err(Error::BadParams(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Unit heading of an agent; +x when it is (nearly) stationary.
pub fn heading<T: Real>(s: &AgentState<T>) -> Vec2<T> {
    let v = s.speed();
    if v < T::lit(EPS_SPEED) {
        Vec2::new(T::one(), T::zero())
    } else {
        s.velocity / v
    }
}

/// Bumper gap and closing speed to `lead` when it is ahead of `ego` inside
/// the lane band; `None` otherwise.
pub fn lead_gap<T: Real>(ego: &AgentState<T>, lead: &AgentState<T>, half_width: T) -> Option<(T, T)> {
    let h = heading(ego);
    let d = lead.position - ego.position;
    let along = d.dot(h);
    let across = h.cross(d);
    if along <= T::zero() || across.abs() >= half_width {
        return None;
    }
    let gap = (along - (ego.length + lead.length) / T::lit(2.0)).max(T::zero());
    let closing = (ego.velocity - lead.velocity).dot(h);
    Some((gap, closing))
}

/// Time to collision, s. `None` when not applicable or not closing.
pub fn ttc<T: Real>(ego: &AgentState<T>, lead: &AgentState<T>, cfg: &BaselineConfig<T>) -> Option<T> {
    let (gap, closing) = lead_gap(ego, lead, cfg.lane_half_width)?;
    (closing > T::zero()).then(|| gap / closing)
}

/// Time headway, s. `None` when not applicable or the ego is stationary.
pub fn thw<T: Real>(ego: &AgentState<T>, lead: &AgentState<T>, cfg: &BaselineConfig<T>) -> Option<T> {
    let (gap, _) = lead_gap(ego, lead, cfg.lane_half_width)?;
    let v = ego.speed();
    (v >= T::lit(EPS_SPEED)).then(|| gap / v)
}

/// Minimum safe longitudinal distance for a rear vehicle at `v_rear`
/// following a front vehicle at `v_front`, floored at zero.
pub fn rss_safe_distance<T: Real>(v_rear: T, v_front: T, p: &RssParams<T>) -> T {
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let v_resp = v_rear + p.rho * p.a_max_accel;
    let d = v_rear * p.rho + half * p.a_max_accel * p.rho * p.rho + v_resp * v_resp / (two * p.b_min_brake)
        - v_front * v_front / (two * p.b_max_brake);
    d.max(T::zero())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RssVerdict<T> {
    Safe,
    /// Shortfall `d_safe − gap`, meters.
    Unsafe(T),
}

/// Signed RSS margin `d_safe − gap` (positive = violation) and the verdict.
pub fn rss_check<T: Real>(ego: &AgentState<T>, lead: &AgentState<T>, cfg: &BaselineConfig<T>) -> Option<(T, RssVerdict<T>)> {
    let (gap, _) = lead_gap(ego, lead, cfg.lane_half_width)?;
    let h = heading(ego);
    let v_r = ego.velocity.dot(h).max(T::zero());
    let v_f = lead.velocity.dot(h).max(T::zero());
    let d_safe = rss_safe_distance(v_r, v_f, &cfg.rss);
    let margin = d_safe - gap;
    let verdict = if gap < d_safe {
        RssVerdict::Unsafe(margin)
    } else {
        RssVerdict::Safe
    };
    Some((margin, verdict))
}

pub fn rss_longitudinal_violation<T: Real>(
    ego: &AgentState<T>,
    lead: &AgentState<T>,
    cfg: &BaselineConfig<T>,
) -> Option<RssVerdict<T>> {
    rss_check(ego, lead, cfg).map(|(_, v)| v)
}

/// Nearest in-band agent ahead of the ego.
pub fn nearest_lead<'a, T: Real>(
    ego: &AgentState<T>,
    states: &'a [AgentState<T>],
    cfg: &BaselineConfig<T>,
) -> Option<&'a AgentState<T>> {
    states
        .iter()
        .filter(|s| s.agent_id != ego.agent_id)
        .filter_map(|s| lead_gap(ego, s, cfg.lane_half_width).map(|(g, _)| (g, s)))
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(_, s)| s)
}

/// Non-directional cumulative force restricted to neighbors strictly ahead of
/// the ego (forward half-plane along its heading).
pub fn nc_field_risk<T: Real>(
    ego: &AgentState<T>,
    graph: &InteractionGraph<T>,
    states: &[AgentState<T>],
    params: &RiskFieldParams<T>,
) -> T {
    let h = heading(ego);
    states
        .iter()
        .filter(|o| o.agent_id != ego.agent_id && graph.indicator(ego.agent_id, o.agent_id))
        .filter(|o| (o.position - ego.position).dot(h) > T::zero())
        .map(|o| pairwise_force(ego, o, params, params.c_for(o.agent_id)))
        .fold(T::zero(), |a, b| a + b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow<T> {
    pub frame: i64,
    pub ttc: Option<T>,
    pub thw: Option<T>,
    pub rss_margin: Option<T>,
    pub nc_field: T,
    pub risknet_force: T,
}

/// One row per frame in which the ego exists.
pub fn evaluate_all<T: Real>(
    scenario: &Scenario<T>,
    ego_id: AgentId,
    cfg: &BaselineConfig<T>,
    params: &RiskFieldParams<T>,
) -> Result<Vec<ComparisonRow<T>>> {
    let info = scenario.agent(ego_id).ok_or(Error::EgoAbsent(scenario.first_frame().unwrap_or(0)))?;
    let frames: Vec<i64> = (info.first_frame..=info.last_frame).collect();
    frames
        .par_iter()
        .map(|&frame| {
            let states = scenario.frame(frame).ok_or(Error::EgoAbsent(frame))?;
            let ego = scenario.state(ego_id, frame).ok_or(Error::EgoAbsent(frame))?;
            let graph = build_graph(scenario, ego_id, frame, params.radius)?;
            let lead = nearest_lead(ego, states, cfg);
            Ok(ComparisonRow {
                frame,
                ttc: lead.and_then(|l| ttc(ego, l, cfg)),
                thw: lead.and_then(|l| thw(ego, l, cfg)),
                rss_margin: lead.and_then(|l| rss_check(ego, l, cfg)).map(|(m, _)| m),
                nc_field: nc_field_risk(ego, &graph, states, params),
                risknet_force: total_directional_force(ego, &graph, states, params),
            })
        })
        .collect()
}

pub const COMPARISON_HEADER: &str = "frame,ttc,thw,rss_margin,nc_field,risknet_force";

pub fn write_comparison_csv<T: Real, W: Write>(rows: &[ComparisonRow<T>], mut w: W) -> Result<()> {
    writeln!(w, "{COMPARISON_HEADER}")?;
    let opt = |v: Option<T>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.frame,
            opt(r.ttc),
            opt(r.thw),
            opt(r.rss_margin),
            r.nc_field,
            r.risknet_force
        )?;
    }
    Ok(())
}

/// First frame each metric crosses its configured threshold. A non-finite
/// threshold disables that metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct DetectionSummary {
    pub ttc: Option<i64>,
    pub thw: Option<i64>,
    pub rss: Option<i64>,
    pub nc_field: Option<i64>,
    pub risknet: Option<i64>,
}

pub fn first_detection<T: Real>(rows: &[ComparisonRow<T>], cfg: &BaselineConfig<T>) -> DetectionSummary {
    fn first<T: Real>(
        rows: &[ComparisonRow<T>],
        threshold: T,
        hit: impl Fn(&ComparisonRow<T>, T) -> bool,
    ) -> Option<i64> {
        if !threshold.is_finite() {
            return None;
        }
        rows.iter().find(|r| hit(r, threshold)).map(|r| r.frame)
    }
    DetectionSummary {
        ttc: first(rows, cfg.ttc_threshold, |r, t| r.ttc.is_some_and(|v| v < t)),
        thw: first(rows, cfg.thw_threshold, |r, t| r.thw.is_some_and(|v| v < t)),
        rss: first(rows, cfg.rss_margin_threshold, |r, t| r.rss_margin.is_some_and(|v| v > t)),
        nc_field: first(rows, cfg.nc_field_threshold, |r, t| r.nc_field > t),
        risknet: first(rows, cfg.risknet_threshold, |r, t| r.risknet_force > t),
    }
}

/// First frame whose value is strictly above the `q`-th percentile of all
/// values in the series.
pub fn first_above_percentile<T: Real>(series: &[(i64, T)], q: f64) -> Option<i64> {
    let values: Vec<T> = series.iter().map(|&(_, v)| v).collect();
    let p = percentile(&values, q)?;
    series.iter().find(|&&(_, v)| v > p).map(|&(f, _)| f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn veh(id: AgentId, x: f64, y: f64, vx: f64) -> AgentState<f64> {
        AgentState::new(id, 0, Vec2::new(x, y), Vec2::new(vx, 0.0))
    }

    #[test]
    fn ttc_and_thw_examples() {
        let cfg = BaselineConfig::default();
        // 20 m bumper gap between two 4.5 m cars
        let ego = veh(0, 0.0, 0.0, 25.0);
        let lead = veh(1, 24.5, 0.0, 15.0);
        assert!((ttc(&ego, &lead, &cfg).unwrap() - 2.0).abs() < 1e-12);
        assert!(ttc(&ego, &veh(1, 24.5, 0.0, 30.0), &cfg).is_none());
        assert_eq!(ttc(&ego, &veh(1, 4.5, 0.0, 15.0), &cfg), Some(0.0));
        let ego15 = veh(0, 0.0, 0.0, 15.0);
        assert!((thw(&ego15, &veh(1, 34.5, 0.0, 15.0), &cfg).unwrap() - 2.0).abs() < 1e-12);
        assert!(thw(&veh(0, 0.0, 0.0, 0.0), &lead, &cfg).is_none());
        assert_eq!(thw(&ego15, &veh(1, 4.5, 0.0, 15.0), &cfg), Some(0.0));
        // out of lane band or behind
        assert!(ttc(&ego, &veh(1, 24.5, 1.75, 15.0), &cfg).is_none());
        assert!(ttc(&ego, &veh(1, -24.5, 0.0, 35.0), &cfg).is_none());
    }

    #[test]
    fn rss_examples() {
        let cfg = BaselineConfig::default();
        assert_eq!(rss_safe_distance(0.0, 0.0, &cfg.rss), 0.25 + 1.0 / 8.0);
        let d: f64 = rss_safe_distance(20.0, 20.0, &cfg.rss);
        assert!((d - 40.375).abs() < 1e-12);
        let ego = veh(0, 0.0, 0.0, 20.0);
        let lead = veh(1, 34.5, 0.0, 20.0);
        match rss_longitudinal_violation(&ego, &lead, &cfg) {
            Some(RssVerdict::Unsafe(m)) => assert!((m - 10.375).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        let at_boundary = veh(1, 40.375 + 4.5, 0.0, 20.0);
        assert_eq!(rss_longitudinal_violation(&ego, &at_boundary, &cfg), Some(RssVerdict::Safe));
    }

    #[test]
    fn rss_stationary_pair_is_safe() {
        // d_safe = ½·a·ρ² + (ρ·a)²/(2·b_min) at zero speed
        let cfg = BaselineConfig::default();
        let ego = veh(0, 0.0, 0.0, 0.0);
        let lead = veh(1, 5.0, 0.0, 0.0);
        assert_eq!(rss_longitudinal_violation(&ego, &lead, &cfg), Some(RssVerdict::Safe));
    }

    #[test]
    fn detection_disabled_by_infinite_threshold() {
        let rows = vec![ComparisonRow {
            frame: 4,
            ttc: Some(0.5),
            thw: Some(0.2),
            rss_margin: Some(3.0),
            nc_field: 1e9,
            risknet_force: 1e9,
        }];
        let d = first_detection(&rows, &BaselineConfig::default());
        assert_eq!(d.ttc, Some(4));
        assert_eq!(d.risknet, Some(4));
        let cfg = BaselineConfig {
            ttc_threshold: f64::INFINITY,
            thw_threshold: f64::INFINITY,
            rss_margin_threshold: f64::INFINITY,
            nc_field_threshold: f64::INFINITY,
            risknet_threshold: f64::INFINITY,
            ..Default::default()
        };
        assert_eq!(first_detection(&rows, &cfg), DetectionSummary::default());
    }

    #[test]
    fn infinite_thresholds_roundtrip_through_json() {
        let cfg = BaselineConfig::<f64> {
            ttc_threshold: f64::INFINITY,
            ..Default::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"ttc_threshold\":\"inf\""));
        let back: BaselineConfig<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let parsed: BaselineConfig<f64> = serde_json::from_str(r#"{"thw_threshold": 1.5}"#).unwrap();
        assert_eq!(parsed.thw_threshold, 1.5);
    }
}
