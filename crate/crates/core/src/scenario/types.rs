use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::scalar::Real;

pub type AgentId = u64;

/// Traffic participant class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgentKind {
    Pedestrian,
    Bicycle,
    Car,
    Truck,
    Other(String),
}

impl AgentKind {
    /// Maps a class label from a track log. Matching is case-insensitive and
    /// accepts the common dataset spellings; anything else is kept verbatim.
    pub fn parse(label: &str) -> Self {
        match label.trim().to_ascii_lowercase().as_str() {
            "pedestrian" => AgentKind::Pedestrian,
            "bicycle" | "cyclist" => AgentKind::Bicycle,
            "car" => AgentKind::Car,
            "truck" | "truck_bus" | "bus" => AgentKind::Truck,
            _ => AgentKind::Other(label.trim().to_string()),
        }
    }

    pub fn label(&self) -> &str {
        match self {
            AgentKind::Pedestrian => "pedestrian",
            AgentKind::Bicycle => "bicycle",
            AgentKind::Car => "car",
            AgentKind::Truck => "truck",
            AgentKind::Other(s) => s,
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One value per agent kind; used for default masses and danger coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KindTable<T> {
    pub pedestrian: T,
    pub bicycle: T,
    pub car: T,
    pub truck: T,
    pub other: T,
}

impl<T: Real> KindTable<T> {
    pub fn get(&self, kind: &AgentKind) -> T {
        match kind {
            AgentKind::Pedestrian => self.pedestrian,
            AgentKind::Bicycle => self.bicycle,
            AgentKind::Car => self.car,
            AgentKind::Truck => self.truck,
            AgentKind::Other(_) => self.other,
        }
    }

    /// Default masses in kg.
    pub fn default_masses() -> Self {
        Self {
            pedestrian: T::lit(75.0),
            bicycle: T::lit(90.0),
            car: T::lit(1500.0),
            truck: T::lit(15000.0),
            other: T::lit(1500.0),
        }
    }

    pub fn values(&self) -> [T; 5] {
        [self.pedestrian, self.bicycle, self.car, self.truck, self.other]
    }
}

/// Kinematic and physical record of one participant at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState<T = f64> {
    pub agent_id: AgentId,
    pub frame: i64,
    pub position: Vec2<T>,
    pub velocity: Vec2<T>,
    pub acceleration: Vec2<T>,
    /// Along-track extent, meters.
    pub length: T,
    /// Across-track extent, meters.
    pub width: T,
    pub mass: T,
    pub kind: AgentKind,
}

impl<T: Real> AgentState<T> {
    /// A car-sized agent with default mass, zero acceleration.
    pub fn new(agent_id: AgentId, frame: i64, position: Vec2<T>, velocity: Vec2<T>) -> Self {
        Self {
            agent_id,
            frame,
            position,
            velocity,
            acceleration: Vec2::zero(),
            length: T::lit(4.5),
            width: T::lit(1.8),
            mass: T::lit(1500.0),
            kind: AgentKind::Car,
        }
    }

    pub fn with_kind(mut self, kind: AgentKind, mass: T, length: T, width: T) -> Self {
        self.kind = kind;
        self.mass = mass;
        self.length = length;
        self.width = width;
        self
    }

    pub fn speed(&self) -> T {
        self.velocity.norm()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > T::zero()) || !(self.length > T::zero()) || !(self.width > T::zero()) {
            return Err(Error::BadParams(format!(
                "agent {} frame {}: mass and extents must be positive",
                self.agent_id, self.frame
            )));
        }
        if !self.position.is_finite() || !self.velocity.is_finite() || !self.acceleration.is_finite()
        {
            return Err(Error::BadParams(format!(
                "agent {} frame {}: non-finite kinematics",
                self.agent_id, self.frame
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentInfo<T> {
    pub kind: AgentKind,
    pub mass: T,
    pub length: T,
    pub width: T,
    pub first_frame: i64,
    pub last_frame: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect<T> {
    pub min: Vec2<T>,
    pub max: Vec2<T>,
}

/// Time-indexed scene. Immutable once built; every agent occupies one
/// contiguous frame interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T = f64> {
    pub frame_rate: T,
    frames: BTreeMap<i64, Vec<AgentState<T>>>,
    agents: BTreeMap<AgentId, AgentInfo<T>>,
    pub bounds: Rect<T>,
    pub source: String,
    /// Translation added to logged positions at ingestion.
    pub offset: Vec2<T>,
}

impl<T: Real> Scenario<T> {
    /// Builds a scenario from loose states, enforcing the frame-rate,
    /// uniqueness and contiguity invariants.
    pub fn from_states(
        frame_rate: T,
        states: impl IntoIterator<Item = AgentState<T>>,
        source: impl Into<String>,
    ) -> Result<Self> {
        if !(frame_rate > T::zero()) || !frame_rate.is_finite() {
            return Err(Error::BadParams("frame rate must be positive".into()));
        }
        let mut frames: BTreeMap<i64, Vec<AgentState<T>>> = BTreeMap::new();
        for s in states {
            s.validate()?;
            frames.entry(s.frame).or_default().push(s);
        }
        let mut per_agent: BTreeMap<AgentId, Vec<i64>> = BTreeMap::new();
        for (&frame, list) in frames.iter_mut() {
            list.sort_by_key(|s| s.agent_id);
            for w in list.windows(2) {
                if w[0].agent_id == w[1].agent_id {
                    return Err(Error::DuplicateAgent {
                        agent_id: w[0].agent_id,
                        frame,
                    });
                }
            }
            for s in list.iter() {
                per_agent.entry(s.agent_id).or_default().push(frame);
            }
        }
        let mut agents = BTreeMap::new();
        for (&id, fs) in &per_agent {
            for w in fs.windows(2) {
                if w[1] != w[0] + 1 {
                    return Err(Error::NonContiguousTrack {
                        agent_id: id,
                        gap_frame: w[0] + 1,
                    });
                }
            }
            let first = &frames[&fs[0]];
            let s = first
                .iter()
                .find(|s| s.agent_id == id)
                .expect("agent listed in its own frame");
            agents.insert(
                id,
                AgentInfo {
                    kind: s.kind.clone(),
                    mass: s.mass,
                    length: s.length,
                    width: s.width,
                    first_frame: fs[0],
                    last_frame: *fs.last().expect("non-empty"),
                },
            );
        }
        let bounds = bounds_of(frames.values().flatten());
        Ok(Self {
            frame_rate,
            frames,
            agents,
            bounds,
            source: source.into(),
            offset: Vec2::zero(),
        })
    }

    /// Frame period Δt in seconds.
    pub fn dt(&self) -> T {
        T::one() / self.frame_rate
    }

    pub fn frames(&self) -> impl Iterator<Item = (i64, &[AgentState<T>])> {
        self.frames.iter().map(|(&f, v)| (f, v.as_slice()))
    }

    pub fn frame_ids(&self) -> impl Iterator<Item = i64> + '_ {
        self.frames.keys().copied()
    }

    pub fn first_frame(&self) -> Option<i64> {
        self.frames.keys().next().copied()
    }

    pub fn last_frame(&self) -> Option<i64> {
        self.frames.keys().next_back().copied()
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    /// States in `frame`, sorted by agent id.
    pub fn frame(&self, frame: i64) -> Option<&[AgentState<T>]> {
        self.frames.get(&frame).map(Vec::as_slice)
    }

    pub fn state(&self, agent: AgentId, frame: i64) -> Option<&AgentState<T>> {
        let list = self.frames.get(&frame)?;
        list.binary_search_by_key(&agent, |s| s.agent_id)
            .ok()
            .map(|i| &list[i])
    }

    pub fn agents(&self) -> &BTreeMap<AgentId, AgentInfo<T>> {
        &self.agents
    }

    pub fn agent(&self, id: AgentId) -> Option<&AgentInfo<T>> {
        self.agents.get(&id)
    }

    /// Timestamp of `frame` relative to the first frame, seconds.
    pub fn time_of(&self, frame: i64) -> T {
        let first = self.first_frame().unwrap_or(frame);
        T::lit((frame - first) as f64) * self.dt()
    }

    /// Shifts all positions by `offset`, accumulating it so export can undo it.
    pub(crate) fn translate(&mut self, offset: Vec2<T>) {
        for list in self.frames.values_mut() {
            for s in list.iter_mut() {
                s.position += offset;
            }
        }
        self.offset += offset;
        self.bounds = bounds_of(self.frames.values().flatten());
    }
}

fn bounds_of<'a, T: Real>(states: impl Iterator<Item = &'a AgentState<T>>) -> Rect<T> {
    let mut min = Vec2::new(T::infinity(), T::infinity());
    let mut max = Vec2::new(T::neg_infinity(), T::neg_infinity());
    let mut any = false;
    for s in states {
        any = true;
        min.x = min.x.min(s.position.x);
        min.y = min.y.min(s.position.y);
        max.x = max.x.max(s.position.x);
        max.y = max.y.max(s.position.y);
    }
    if !any {
        return Rect {
            min: Vec2::zero(),
            max: Vec2::zero(),
        };
    }
    Rect { min, max }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(id: AgentId, frame: i64) -> AgentState<f64> {
        AgentState::new(id, frame, Vec2::new(frame as f64, id as f64), Vec2::new(1.0, 0.0))
    }

    #[test]
    fn kind_labels() {
        assert_eq!(AgentKind::parse("Car"), AgentKind::Car);
        assert_eq!(AgentKind::parse("truck_bus"), AgentKind::Truck);
        assert_eq!(AgentKind::parse("cyclist"), AgentKind::Bicycle);
        let k = AgentKind::parse("Tram");
        assert_eq!(k, AgentKind::Other("Tram".into()));
        assert_eq!(AgentKind::parse(k.label()), k);
    }

    #[test]
    fn rejects_duplicates_and_gaps() {
        let dup = Scenario::from_states(10.0, vec![st(1, 0), st(1, 0)], "t");
        assert!(matches!(dup, Err(Error::DuplicateAgent { .. })));
        let gap = Scenario::from_states(10.0, vec![st(1, 0), st(1, 1), st(1, 3)], "t");
        assert!(matches!(
            gap,
            Err(Error::NonContiguousTrack {
                agent_id: 1,
                gap_frame: 2
            })
        ));
    }

    #[test]
    fn lookups() {
        let s = Scenario::from_states(25.0, vec![st(2, 0), st(1, 0), st(1, 1)], "t").unwrap();
        assert_eq!(s.frame(0).unwrap()[0].agent_id, 1);
        assert!(s.state(2, 1).is_none());
        assert_eq!(s.agent(1).unwrap().last_frame, 1);
        assert!((s.dt() - 0.04).abs() < 1e-15);
    }
}
