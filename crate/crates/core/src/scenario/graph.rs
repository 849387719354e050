use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::scenario::types::{AgentId, AgentState, Scenario};

/// Speed below which a velocity has no usable direction (m/s).
pub const EPS_SPEED: f64 = 0.1;

/// Directed interaction edges at one frame. An edge `(i, j)` means the
/// interaction indicator for `j` acting on `i` is 1; absent pairs are 0.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionGraph<T> {
    pub ego_id: AgentId,
    pub frame: i64,
    pub radius: T,
    pub edges: BTreeSet<(AgentId, AgentId)>,
}

impl<T: Real> InteractionGraph<T> {
    pub fn empty(ego_id: AgentId, frame: i64, radius: T) -> Self {
        Self {
            ego_id,
            frame,
            radius,
            edges: BTreeSet::new(),
        }
    }

    /// Agents `j` with an edge `(i, j)`, ascending.
    pub fn neighbors(&self, i: AgentId) -> impl Iterator<Item = AgentId> + '_ {
        self.edges.range((i, 0)..=(i, AgentId::MAX)).map(|&(_, j)| j)
    }

    pub fn indicator(&self, i: AgentId, j: AgentId) -> bool {
        self.edges.contains(&(i, j))
    }

    pub fn ego_neighbors(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.neighbors(self.ego_id)
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Ids of agents in `others` (excluding `ego` itself) whose center distance
/// to `ego` is at most `radius`.
pub fn neighbors_within<'a, T: Real>(
    ego: &'a AgentState<T>,
    others: &'a [AgentState<T>],
    radius: T,
) -> impl Iterator<Item = &'a AgentState<T>> + 'a {
    others.iter().filter(move |o| {
        o.agent_id != ego.agent_id && (o.position - ego.position).norm() <= radius
    })
}

/// Ego-centred graph: edges `(ego, j)` for every `j` within `radius`.
pub fn build_graph<T: Real>(
    scenario: &Scenario<T>,
    ego_id: AgentId,
    frame: i64,
    radius: T,
) -> Result<InteractionGraph<T>> {
    if !(radius > T::zero()) {
        return Err(Error::BadParams("radius must be positive".into()));
    }
    let states = scenario.frame(frame).ok_or(Error::EgoAbsent(frame))?;
    let ego = scenario.state(ego_id, frame).ok_or(Error::EgoAbsent(frame))?;
    Ok(graph_for(ego, states, radius))
}

/// Same as [`build_graph`] for a free-standing ego (e.g. a virtual probe).
pub fn graph_for<T: Real>(ego: &AgentState<T>, others: &[AgentState<T>], radius: T) -> InteractionGraph<T> {
    let edges = neighbors_within(ego, others, radius)
        .map(|o| (ego.agent_id, o.agent_id))
        .collect();
    InteractionGraph {
        ego_id: ego.agent_id,
        frame: ego.frame,
        radius,
        edges,
    }
}

/// Symmetric all-pairs radius graph over every agent in `states`, used for
/// message passing. `ego_id` is carried along as the prediction target.
pub fn scene_graph<T: Real>(ego_id: AgentId, frame: i64, states: &[AgentState<T>], radius: T) -> InteractionGraph<T> {
    let mut edges = BTreeSet::new();
    for (a, sa) in states.iter().enumerate() {
        for sb in &states[a + 1..] {
            if (sa.position - sb.position).norm() <= radius {
                edges.insert((sa.agent_id, sb.agent_id));
                edges.insert((sb.agent_id, sa.agent_id));
            }
        }
    }
    InteractionGraph {
        ego_id,
        frame,
        radius,
        edges,
    }
}

/// Center distance and the angle between the two velocity vectors.
pub fn relative_geometry<T: Real>(a: &AgentState<T>, b: &AgentState<T>) -> (T, T) {
    let r = (a.position - b.position).norm();
    let theta = a.velocity.angle_to(b.velocity, T::lit(EPS_SPEED));
    (r, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn at(id: AgentId, x: f64, y: f64) -> AgentState<f64> {
        AgentState::new(id, 0, Vec2::new(x, y), Vec2::new(10.0, 0.0))
    }

    #[test]
    fn radius_gate_inclusive() {
        let states = vec![at(0, 0.0, 0.0), at(1, 10.0, 0.0), at(2, 0.0, 49.9), at(3, 50.1, 0.0), at(4, 30.0, 40.0)];
        let s = Scenario::from_states(10.0, states, "t").unwrap();
        let g = build_graph(&s, 0, 0, 50.0).unwrap();
        assert_eq!(g.ego_neighbors().collect::<Vec<_>>(), vec![1, 2, 4]);
        assert!(g.indicator(0, 4));
        assert!(!g.indicator(0, 0));
        assert!(matches!(build_graph(&s, 9, 0, 50.0), Err(Error::EgoAbsent(0))));
    }

    #[test]
    fn lone_ego() {
        let s = Scenario::from_states(10.0, vec![at(5, 1.0, 1.0)], "t").unwrap();
        assert!(build_graph(&s, 5, 0, 50.0).unwrap().is_empty());
    }

    #[test]
    fn scene_graph_is_symmetric() {
        let states = vec![at(0, 0.0, 0.0), at(1, 10.0, 0.0), at(2, 100.0, 0.0)];
        let g = scene_graph(0, 0, &states, 50.0);
        assert!(g.indicator(0, 1) && g.indicator(1, 0));
        assert_eq!(g.neighbors(2).count(), 0);
    }

    #[test]
    fn geometry_cases() {
        let a = at(0, 0.0, 0.0);
        assert_eq!(relative_geometry(&a, &a), (0.0, 0.0));
        let mut b = at(1, 3.0, 4.0);
        b.velocity = Vec2::new(0.0, 10.0);
        let (r, th) = relative_geometry(&a, &b);
        assert_eq!(r, 5.0);
        assert!((th - FRAC_PI_2).abs() < 1e-15);
        b.velocity = -a.velocity;
        assert!((relative_geometry(&a, &b).1 - PI).abs() < 1e-15);
        b.velocity = Vec2::new(0.05, 0.0);
        assert_eq!(relative_geometry(&a, &b).1, 0.0);
    }
}
