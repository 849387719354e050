use crate::error::{Error, Result};
use crate::risk_field::params::RiskFieldParams;
use crate::scalar::Real;
use crate::scenario::{relative_geometry, AgentId, AgentState, InteractionGraph};

/// Evaluated pairwise interaction of `other` acting on `ego`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSample<T> {
    pub ego_id: AgentId,
    pub other_id: AgentId,
    pub frame: i64,
    /// J
    pub energy: T,
    /// N
    pub force: T,
    pub alpha_lon: T,
    pub alpha_lat: T,
    /// N
    pub directional_force: T,
}

/// Collision energy between the two agents:
/// `½ k C μ |v_i − v_j|²` with reduced mass `μ = m_i m_j / (m_i + m_j)`.
pub fn interaction_energy<T: Real>(
    ego: &AgentState<T>,
    other: &AgentState<T>,
    params: &RiskFieldParams<T>,
    c: T,
) -> T {
    let k = params.k.get(&other.kind);
    let reduced = ego.mass * other.mass / (ego.mass + other.mass);
    let dv = (ego.velocity - other.velocity).norm_sq();
    T::lit(0.5) * k * c * reduced * dv
}

/// Cumulative energy over the ego's graph neighbors.
pub fn total_energy<T: Real>(
    ego: &AgentState<T>,
    graph: &InteractionGraph<T>,
    states: &[AgentState<T>],
    params: &RiskFieldParams<T>,
) -> T {
    graph_neighbors(ego, graph, states)
        .map(|o| interaction_energy(ego, o, params, params.c_for(o.agent_id)))
        .fold(T::zero(), |a, b| a + b)
}

/// Contact distance below which the field is clamped.
pub fn distance_floor<T: Real>(ego: &AgentState<T>, other: &AgentState<T>, params: &RiskFieldParams<T>) -> T {
    params.r_min.max((ego.length + other.length) / T::lit(2.0))
}

/// Energy divided by the floored center distance.
pub fn pairwise_force<T: Real>(
    ego: &AgentState<T>,
    other: &AgentState<T>,
    params: &RiskFieldParams<T>,
    c: T,
) -> T {
    let r = (ego.position - other.position).norm();
    interaction_energy(ego, other, params, c) / r.max(distance_floor(ego, other, params))
}

/// Non-directional cumulative force over graph neighbors.
pub fn total_force<T: Real>(
    ego: &AgentState<T>,
    graph: &InteractionGraph<T>,
    states: &[AgentState<T>],
    params: &RiskFieldParams<T>,
) -> T {
    graph_neighbors(ego, graph, states)
        .map(|o| pairwise_force(ego, o, params, params.c_for(o.agent_id)))
        .fold(T::zero(), |a, b| a + b)
}

/// Raw Doppler frequency ratio `(v0 + v_i cosθ) / (v0 − v_j cosθ)`.
pub fn doppler_ratio<T: Real>(v0: T, v_i: T, v_j: T, theta: T, eps: T) -> Result<T> {
    let c = theta.cos();
    let den = v0 - v_j * c;
    if den.abs() < eps {
        return Err(Error::DegenerateDenominator);
    }
    Ok((v0 + v_i * c) / den)
}

/// Longitudinal coefficient: the Doppler ratio clamped to `[0, cap]`, and
/// equal to `cap` at or beyond the pole `v_j cosθ ≥ v0 − eps`.
pub fn alpha_lon<T: Real>(v0: T, v_i: T, v_j: T, theta: T, eps: T, cap: T) -> T {
    if v_j * theta.cos() >= v0 - eps {
        return cap;
    }
    match doppler_ratio(v0, v_i, v_j, theta, eps) {
        Ok(r) => r.max(T::zero()).min(cap),
        Err(_) => cap,
    }
}

/// Lateral attenuation `exp(−β sin²θ)`.
pub fn alpha_lat<T: Real>(theta: T, beta: T) -> T {
    let s = theta.sin();
    (-beta * s * s).exp()
}

/// Pairwise force with both directional coefficients applied.
pub fn directional_force<T: Real>(
    ego: &AgentState<T>,
    other: &AgentState<T>,
    params: &RiskFieldParams<T>,
    c: T,
) -> RiskSample<T> {
    let (r, theta) = relative_geometry(ego, other);
    let energy = interaction_energy(ego, other, params, c);
    let force = energy / r.max(distance_floor(ego, other, params));
    let lon = alpha_lon(
        params.wave_speed,
        ego.speed(),
        other.speed(),
        theta,
        params.eps_doppler,
        params.alpha_cap,
    );
    let lat = alpha_lat(theta, params.beta);
    RiskSample {
        ego_id: ego.agent_id,
        other_id: other.agent_id,
        frame: ego.frame,
        energy,
        force,
        alpha_lon: lon,
        alpha_lat: lat,
        directional_force: lon * lat * force,
    }
}

/// Sum of directional forces over the ego's graph neighbors.
pub fn total_directional_force<T: Real>(
    ego: &AgentState<T>,
    graph: &InteractionGraph<T>,
    states: &[AgentState<T>],
    params: &RiskFieldParams<T>,
) -> T {
    graph_neighbors(ego, graph, states)
        .map(|o| directional_force(ego, o, params, params.c_for(o.agent_id)).directional_force)
        .fold(T::zero(), |a, b| a + b)
}

/// Per-neighbor samples, in ascending neighbor id order.
pub fn directional_samples<T: Real>(
    ego: &AgentState<T>,
    graph: &InteractionGraph<T>,
    states: &[AgentState<T>],
    params: &RiskFieldParams<T>,
) -> Vec<RiskSample<T>> {
    graph_neighbors(ego, graph, states)
        .map(|o| directional_force(ego, o, params, params.c_for(o.agent_id)))
        .collect()
}

/// States of the ego's neighbors, honoring duplicates in `states` (every
/// state whose id carries an edge contributes).
fn graph_neighbors<'a, T: Real>(
    ego: &'a AgentState<T>,
    graph: &'a InteractionGraph<T>,
    states: &'a [AgentState<T>],
) -> impl Iterator<Item = &'a AgentState<T>> + 'a {
    states
        .iter()
        .filter(move |o| o.agent_id != ego.agent_id && graph.indicator(ego.agent_id, o.agent_id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;
    use crate::scenario::graph_for;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn car(id: AgentId, pos: (f64, f64), vel: (f64, f64)) -> AgentState<f64> {
        AgentState::new(id, 0, Vec2::new(pos.0, pos.1), Vec2::new(vel.0, vel.1))
    }

    fn unit_k() -> RiskFieldParams<f64> {
        let mut p = RiskFieldParams::default();
        p.k.car = 1.0;
        p
    }

    #[test]
    fn energy_examples() {
        let p = unit_k();
        let a = car(0, (0.0, 0.0), (30.0, 0.0));
        let b = car(1, (50.0, 0.0), (20.0, 0.0));
        assert_eq!(interaction_energy(&a, &b, &p, 1.0), 37500.0);
        assert_eq!(interaction_energy(&a, &a, &p, 1.0), 0.0);
        assert_eq!(interaction_energy(&a, &b, &p, 2.0), 75000.0);
        assert_eq!(pairwise_force(&a, &b, &p, 1.0), 750.0);
        let coincident = car(1, (0.0, 0.0), (20.0, 0.0));
        assert_eq!(pairwise_force(&a, &coincident, &p, 1.0), 37500.0 / 4.5);
    }

    #[test]
    fn doppler_examples() {
        assert_eq!(doppler_ratio(30.0, 20.0, 10.0, 0.0, 1e-6).unwrap(), 2.5);
        let r = doppler_ratio(30.0, 20.0, 10.0, FRAC_PI_2, 1e-6).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
        assert!(matches!(
            doppler_ratio(30.0, 20.0, 30.0, 0.0, 1e-6),
            Err(Error::DegenerateDenominator)
        ));
        assert_eq!(alpha_lon(30.0, 20.0, 10.0, 0.0, 1e-6, 10.0), 2.5);
        assert_eq!(alpha_lon(30.0, 35.0, 10.0, PI, 1e-6, 10.0), 0.0);
        assert_eq!(alpha_lon(30.0, 20.0, 31.0, 0.0, 1e-6, 10.0), 10.0);
        assert_eq!(alpha_lon(30.0, 20.0, 29.0, 0.0, 1e-6, 10.0), 10.0);
    }

    #[test]
    fn alpha_lat_examples() {
        assert_eq!(alpha_lat(0.0, 1.0), 1.0);
        assert!((alpha_lat(FRAC_PI_2, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((alpha_lat(PI, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn totals_and_duplicates() {
        let p = unit_k();
        let ego = car(0, (0.0, 0.0), (30.0, 0.0));
        let n = car(1, (20.0, 0.0), (20.0, 0.0));
        let g = graph_for(&ego, &[n.clone()], 50.0);
        let single = total_directional_force(&ego, &g, &[n.clone()], &p);
        let double = total_directional_force(&ego, &g, &[n.clone(), n.clone()], &p);
        assert_eq!(double, 2.0 * single);
        assert_eq!(total_energy(&ego, &g, &[n.clone(), n], &p), 2.0 * 37500.0);
        let empty = graph_for(&ego, &[], 50.0);
        assert_eq!(total_directional_force(&ego, &empty, &[], &p), 0.0);
    }

    #[test]
    fn generic_over_f32() {
        let p32 = RiskFieldParams::<f32>::default();
        let a = AgentState::<f32>::new(0, 0, Vec2::new(0.0, 0.0), Vec2::new(30.0, 0.0));
        let b = AgentState::<f32>::new(1, 0, Vec2::new(10.0, 3.0), Vec2::new(20.0, 1.0));
        let a64 = AgentState::<f64>::new(0, 0, Vec2::new(0.0, 0.0), Vec2::new(30.0, 0.0));
        let b64 = AgentState::<f64>::new(1, 0, Vec2::new(10.0, 3.0), Vec2::new(20.0, 1.0));
        let f32v = directional_force(&a, &b, &p32, 1.0).directional_force as f64;
        let f64v = directional_force(&a64, &b64, &RiskFieldParams::default(), 1.0).directional_force;
        assert!((f32v - f64v).abs() / f64v < 1e-5);
    }
}
