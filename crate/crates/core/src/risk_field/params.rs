use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::scenario::{AgentId, KindTable};

/// Physical constants of the interaction field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[serde(bound(deserialize = "T: Real"))]
pub struct RiskFieldParams<T> {
    /// Danger coefficient per kind, each in `[0, 1]`.
    pub k: KindTable<T>,
    /// Environmental constraint factor used when no override exists.
    pub c_default: T,
    /// Per-agent constraint factor overrides.
    pub c_overrides: BTreeMap<AgentId, T>,
    /// Lateral decay coefficient.
    pub beta: T,
    /// Wave speed of the Doppler analogy, m/s.
    pub wave_speed: T,
    /// Lower bound of the distance floor, meters. The effective floor for a
    /// pair is the larger of this and half the sum of their lengths.
    pub r_min: T,
    /// Interaction radius, meters.
    pub radius: T,
    /// Value the longitudinal coefficient saturates at.
    pub alpha_cap: T,
    /// Width of the Doppler pole guard, m/s.
    pub eps_doppler: T,
}

impl<T: Real> Default for RiskFieldParams<T> {
    fn default() -> Self {
        Self {
            k: KindTable {
                pedestrian: T::lit(1.0),
                bicycle: T::lit(0.9),
                car: T::lit(0.6),
                truck: T::lit(0.8),
                other: T::lit(0.6),
            },
            c_default: T::one(),
            c_overrides: BTreeMap::new(),
            beta: T::one(),
            wave_speed: T::lit(30.0),
            r_min: T::one(),
            radius: T::lit(50.0),
            alpha_cap: T::lit(10.0),
            eps_doppler: T::lit(1e-6),
        }
    }
}

impl<T: Real> RiskFieldParams<T> {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: T| v >= T::zero() && v <= T::one();
        if !self.k.values().into_iter().all(unit) {
            return Err(Error::BadParams("danger coefficients must lie in [0, 1]".into()));
        }
        let checks = [
            (self.beta, "beta"),
            (self.wave_speed, "wave_speed"),
            (self.r_min, "r_min"),
            (self.radius, "radius"),
            (self.alpha_cap, "alpha_cap"),
            (self.eps_doppler, "eps_doppler"),
        ];
        for (v, name) in checks {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::BadParams(format!("{name} must be positive and finite")));
            }
        }
        let cs = std::iter::once(self.c_default).chain(self.c_overrides.values().copied());
        for c in cs {
            if !(c >= T::zero()) || !c.is_finite() {
                return Err(Error::BadParams("constraint factors must be >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn c_for(&self, agent: AgentId) -> T {
        self.c_overrides.get(&agent).copied().unwrap_or(self.c_default)
    }
}
