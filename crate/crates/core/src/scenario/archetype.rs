//! Closed-form synthetic interaction scenarios.
//!
//! Lanes run along +x with width `lane_width`; lane `k` is centred at
//! `(k + 0.5) * lane_width`. The ego always drives in lane 1 and has id
//! [`EGO_ID`]. Gaps are bumper-to-bumper along x.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::scalar::Real;
use crate::scenario::types::{AgentId, AgentKind, AgentState, Scenario};

pub const EGO_ID: AgentId = 1;
const EGO_X0: f64 = 100.0;
const CAR: (f64, f64, f64) = (4.5, 1.8, 1500.0);
const TRUCK: (f64, f64, f64) = (12.0, 2.5, 15000.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Archetype {
    /// Ego changes into the right lane between a slower front vehicle, a
    /// faster rear vehicle and a slow vehicle already in the target lane.
    BlockedLaneChange,
    /// Ego truck keeps its lane while a car in the right lane accelerates
    /// alongside, moves across at constant lateral speed, then brakes in
    /// front of it.
    LateralCutIn,
    /// A faster car starts behind the ego, overtakes on the left, cuts back
    /// in ahead and brakes.
    RearOvertakeCutIn,
}

impl Archetype {
    pub const ALL: [Archetype; 3] = [
        Archetype::BlockedLaneChange,
        Archetype::LateralCutIn,
        Archetype::RearOvertakeCutIn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Archetype::BlockedLaneChange => "blocked_lane_change",
            Archetype::LateralCutIn => "lateral_cut_in",
            Archetype::RearOvertakeCutIn => "rear_overtake_cut_in",
        }
    }

    /// Length in seconds that covers the whole maneuver with the default
    /// parameters.
    pub fn default_duration(self) -> f64 {
        match self {
            Archetype::BlockedLaneChange => 10.0,
            Archetype::LateralCutIn => 10.0,
            Archetype::RearOvertakeCutIn => 12.0,
        }
    }

    /// Parameter names and their defaults.
    pub fn defaults(self) -> BTreeMap<&'static str, f64> {
        let common = [("lane_width", 3.5)];
        let specific: &[(&str, f64)] = match self {
            Archetype::BlockedLaneChange => &[
                ("ego_speed", 25.0),
                ("front_speed", 23.0),
                ("rear_speed", 26.0),
                ("target_speed", 22.0),
                ("front_gap", 15.0),
                ("rear_gap", 10.0),
                ("target_offset", 30.0),
                ("lc_start", 2.0),
                ("lc_duration", 4.0),
            ],
            Archetype::LateralCutIn => &[
                ("ego_speed", 20.0),
                ("merger_speed", 20.0),
                ("merger_accel", 1.5),
                ("merger_top_speed", 26.0),
                ("merger_lead", 2.0),
                ("offset", 3.5),
                ("lateral_speed", 1.0),
                ("merge_start", 0.0),
                ("merger_decel", 2.0),
                ("merger_final_speed", 18.0),
                ("lead_gap", 80.0),
            ],
            Archetype::RearOvertakeCutIn => &[
                ("ego_speed", 20.0),
                ("rear_speed", 27.0),
                ("rear_gap", 20.0),
                ("pull_out_time", 0.0),
                ("lateral_speed", 1.0),
                ("cut_in_lead", 12.0),
                ("rear_decel", 3.0),
                ("rear_final_speed", 16.0),
                ("ambient_gap", 40.0),
            ],
        };
        common.iter().chain(specific.iter()).copied().collect()
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Archetype {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Archetype::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::BadParams(format!("unknown archetype `{s}`")))
    }
}

/// Longitudinal motion: constant `v0` until `t0`, then a constant-magnitude
/// acceleration `a` toward `v1`, then constant `v1`.
#[derive(Debug, Clone, Copy)]
struct Longitudinal {
    x0: f64,
    v0: f64,
    t0: f64,
    v1: f64,
    a: f64,
}

impl Longitudinal {
    fn constant(x0: f64, v: f64) -> Self {
        Self {
            x0,
            v0: v,
            t0: f64::INFINITY,
            v1: v,
            a: 1.0,
        }
    }

    /// (position, velocity, acceleration) at time `t`.
    fn at(&self, t: f64) -> (f64, f64, f64) {
        if t <= self.t0 || self.v1 == self.v0 {
            return (self.x0 + self.v0 * t, self.v0, 0.0);
        }
        let sign = (self.v1 - self.v0).signum();
        let ramp = (self.v1 - self.v0).abs() / self.a;
        let base = self.x0 + self.v0 * self.t0;
        let tau = t - self.t0;
        if tau <= ramp {
            (
                base + self.v0 * tau + 0.5 * sign * self.a * tau * tau,
                self.v0 + sign * self.a * tau,
                sign * self.a,
            )
        } else {
            let ramp_dist = self.v0 * ramp + 0.5 * sign * self.a * ramp * ramp;
            (base + ramp_dist + self.v1 * (tau - ramp), self.v1, 0.0)
        }
    }
}

/// Lateral motion as a sequence of constant-speed moves between lane
/// positions; `moves` are `(start time, target y)` and must not overlap.
#[derive(Debug, Clone)]
struct Lateral {
    y0: f64,
    speed: f64,
    moves: Vec<(f64, f64)>,
}

impl Lateral {
    fn at(&self, t: f64) -> (f64, f64) {
        let mut y = self.y0;
        for &(start, target) in &self.moves {
            if t <= start {
                break;
            }
            let dur = (target - y).abs() / self.speed;
            let dir = (target - y).signum();
            if t < start + dur {
                return (y + dir * self.speed * (t - start), dir * self.speed);
            }
            y = target;
        }
        (y, 0.0)
    }
}

/// Smooth (half-cosine) lane change from `y0` to `y1` over `[t0, t0 + dur]`.
fn cosine_lane_change(t: f64, y0: f64, y1: f64, t0: f64, dur: f64) -> (f64, f64, f64) {
    if t <= t0 {
        return (y0, 0.0, 0.0);
    }
    if t >= t0 + dur {
        return (y1, 0.0, 0.0);
    }
    let w = std::f64::consts::PI / dur;
    let tau = t - t0;
    let d = y1 - y0;
    (
        y0 + d * (1.0 - (w * tau).cos()) / 2.0,
        d * w / 2.0 * (w * tau).sin(),
        d * w * w / 2.0 * (w * tau).cos(),
    )
}

struct Track {
    id: AgentId,
    kind: AgentKind,
    dims: (f64, f64, f64),
    /// t → (position, velocity, acceleration)
    motion: Box<dyn Fn(f64) -> ([f64; 2], [f64; 2], [f64; 2])>,
}

fn lane_center(k: f64, w: f64) -> f64 {
    (k + 0.5) * w
}

/// Time at which the lateral cut-in merger reaches the ego lane centre.
pub fn lateral_cut_in_entry_time(params: &BTreeMap<String, f64>) -> Result<f64> {
    let p = resolve(Archetype::LateralCutIn, params)?;
    Ok(p["merge_start"] + p["offset"] / p["lateral_speed"])
}

fn resolve(which: Archetype, params: &BTreeMap<String, f64>) -> Result<BTreeMap<&'static str, f64>> {
    let mut p = which.defaults();
    for (k, &v) in params {
        let slot = p
            .iter_mut()
            .find(|(name, _)| **name == k.as_str())
            .map(|(_, v)| v)
            .ok_or_else(|| Error::BadParams(format!("{which}: unknown parameter `{k}`")))?;
        *slot = v;
    }
    for (k, &v) in &p {
        if !v.is_finite() {
            return Err(Error::BadParams(format!("{which}: `{k}` must be finite")));
        }
        let positive = k.ends_with("gap")
            || k.ends_with("decel")
            || k.ends_with("accel")
            || k.ends_with("duration")
            || *k == "lateral_speed"
            || *k == "lane_width"
            || *k == "offset";
        if positive && v <= 0.0 {
            return Err(Error::BadParams(format!("{which}: `{k}` must be > 0")));
        }
        if k.ends_with("speed") && v < 0.0 {
            return Err(Error::BadParams(format!("{which}: `{k}` must be >= 0")));
        }
    }
    Ok(p)
}

/// Generates the archetype scenario; identical inputs give bitwise identical
/// output.
pub fn make_archetype<T: Real>(
    which: Archetype,
    params: &BTreeMap<String, f64>,
    frame_rate: f64,
    duration: f64,
) -> Result<Scenario<T>> {
    if !(frame_rate > 0.0) || !frame_rate.is_finite() {
        return Err(Error::BadParams("frame rate must be > 0".into()));
    }
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::BadParams("duration must be > 0".into()));
    }
    let p = resolve(which, params)?;
    let w = p["lane_width"];
    let ego_y = lane_center(1.0, w);
    let tracks = match which {
        Archetype::BlockedLaneChange => blocked_lane_change(&p, ego_y, w),
        Archetype::LateralCutIn => lateral_cut_in(&p, ego_y),
        Archetype::RearOvertakeCutIn => rear_overtake(&p, ego_y, w),
    };
    let n = (duration * frame_rate).floor() as i64 + 1;
    let mut states = Vec::with_capacity(tracks.len() * n as usize);
    for f in 0..n {
        let t = f as f64 / frame_rate;
        for tr in &tracks {
            let (pos, vel, acc) = (tr.motion)(t);
            let (length, width, mass) = tr.dims;
            states.push(AgentState {
                agent_id: tr.id,
                frame: f,
                position: Vec2::new(T::lit(pos[0]), T::lit(pos[1])),
                velocity: Vec2::new(T::lit(vel[0]), T::lit(vel[1])),
                acceleration: Vec2::new(T::lit(acc[0]), T::lit(acc[1])),
                length: T::lit(length),
                width: T::lit(width),
                mass: T::lit(mass),
                kind: tr.kind.clone(),
            });
        }
    }
    let source = format!(
        "archetype:{which} rate={frame_rate} duration={duration} params={}",
        p.iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    );
    Scenario::from_states(T::lit(frame_rate), states, source)
}

fn straight(id: AgentId, kind: AgentKind, dims: (f64, f64, f64), lon: Longitudinal, y: f64) -> Track {
    Track {
        id,
        kind,
        dims,
        motion: Box::new(move |t| {
            let (x, v, a) = lon.at(t);
            ([x, y], [v, 0.0], [a, 0.0])
        }),
    }
}

fn blocked_lane_change(p: &BTreeMap<&str, f64>, ego_y: f64, w: f64) -> Vec<Track> {
    let half = CAR.0 / 2.0;
    let ego_lon = Longitudinal::constant(EGO_X0, p["ego_speed"]);
    let (t0, dur) = (p["lc_start"], p["lc_duration"]);
    let target_y = ego_y - w;
    let ego = Track {
        id: EGO_ID,
        kind: AgentKind::Car,
        dims: CAR,
        motion: Box::new(move |t| {
            let (x, v, a) = ego_lon.at(t);
            let (y, vy, ay) = cosine_lane_change(t, ego_y, target_y, t0, dur.max(1e-9));
            ([x, y], [v, vy], [a, ay])
        }),
    };
    let front_x = EGO_X0 + p["front_gap"] + 2.0 * half;
    let rear_x = EGO_X0 - p["rear_gap"] - 2.0 * half;
    vec![
        ego,
        straight(2, AgentKind::Car, CAR, Longitudinal::constant(front_x, p["front_speed"]), ego_y),
        straight(3, AgentKind::Car, CAR, Longitudinal::constant(rear_x, p["rear_speed"]), ego_y),
        straight(
            4,
            AgentKind::Car,
            CAR,
            Longitudinal::constant(EGO_X0 + p["target_offset"], p["target_speed"]),
            target_y,
        ),
    ]
}

fn lateral_cut_in(p: &BTreeMap<&str, f64>, ego_y: f64) -> Vec<Track> {
    let entry = p["merge_start"] + p["offset"] / p["lateral_speed"];
    // accelerate from the start, brake once in the ego lane
    let speed_up = Longitudinal {
        x0: EGO_X0 + p["merger_lead"],
        v0: p["merger_speed"],
        t0: 0.0,
        v1: p["merger_top_speed"],
        a: p["merger_accel"],
    };
    let (x_entry, v_entry, _) = speed_up.at(entry);
    let slow_down = Longitudinal {
        x0: x_entry - v_entry * entry,
        v0: v_entry,
        t0: entry,
        v1: p["merger_final_speed"],
        a: p["merger_decel"],
    };
    let merger_lon = move |t: f64| if t <= entry { speed_up.at(t) } else { slow_down.at(t) };
    let lat = Lateral {
        y0: ego_y - p["offset"],
        speed: p["lateral_speed"],
        moves: vec![(p["merge_start"], ego_y)],
    };
    let merger = Track {
        id: 2,
        kind: AgentKind::Car,
        dims: CAR,
        motion: Box::new(move |t| {
            let (x, v, a) = merger_lon(t);
            let (y, vy) = lat.at(t);
            ([x, y], [v, vy], [a, 0.0])
        }),
    };
    let lead_x = EGO_X0 + TRUCK.0 / 2.0 + p["lead_gap"] + CAR.0 / 2.0;
    vec![
        straight(EGO_ID, AgentKind::Truck, TRUCK, Longitudinal::constant(EGO_X0, p["ego_speed"]), ego_y),
        merger,
        straight(3, AgentKind::Car, CAR, Longitudinal::constant(lead_x, p["ego_speed"]), ego_y),
    ]
}

fn rear_overtake(p: &BTreeMap<&str, f64>, ego_y: f64, w: f64) -> Vec<Track> {
    let (ve, vr, lat_speed) = (p["ego_speed"], p["rear_speed"], p["lateral_speed"]);
    let x_rear0 = EGO_X0 - p["rear_gap"] - CAR.0;
    let left_y = ego_y + w;
    let pull_out = p["pull_out_time"];
    let pulled_out = pull_out + w / lat_speed;
    let mut moves = vec![(pull_out, left_y)];
    let mut brake_at = f64::INFINITY;
    if vr > ve {
        // centre lead over the ego reaches cut_in_lead
        let t_lead = (p["cut_in_lead"] + EGO_X0 - x_rear0) / (vr - ve);
        let t_cut = t_lead.max(pulled_out);
        moves.push((t_cut, ego_y));
        brake_at = t_cut + w / lat_speed;
    }
    let lon = Longitudinal {
        x0: x_rear0,
        v0: vr,
        t0: brake_at,
        v1: p["rear_final_speed"],
        a: p["rear_decel"],
    };
    let lat = Lateral {
        y0: ego_y,
        speed: lat_speed,
        moves,
    };
    let overtaker = Track {
        id: 2,
        kind: AgentKind::Car,
        dims: CAR,
        motion: Box::new(move |t| {
            let (x, v, a) = lon.at(t);
            let (y, vy) = lat.at(t);
            ([x, y], [v, vy], [a, 0.0])
        }),
    };
    let ambient_x = EGO_X0 + CAR.0 + p["ambient_gap"];
    vec![
        straight(EGO_ID, AgentKind::Car, CAR, Longitudinal::constant(EGO_X0, ve), ego_y),
        overtaker,
        straight(3, AgentKind::Car, CAR, Longitudinal::constant(ambient_x, ve), ego_y - w),
    ]
}
