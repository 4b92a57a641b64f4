//! Encounter quantities, threat gating and the vision cone.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::AgentState;
use crate::geometry::Vec3;

/// Relative speed below which two agents are treated as moving in lockstep.
pub const RELATIVE_MOTION_TOL: f64 = 1e-12;
/// Negative radicands of the minimal-distance formula down to this value are
/// rounding noise and clamp to zero.
pub const RADICAND_CLAMP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("safety radius must be positive, got {0}")]
    SafetyRadius(f64),
    #[error("cone threshold kappa must lie in [-1, 1], got {0}")]
    Kappa(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceptionParams {
    /// Safety radius `R`: pairs whose closest approach is at most `R` apart
    /// are threatening.
    pub safety_radius: f64,
    /// Cosine of the vision-cone half angle.
    pub kappa: f64,
    pub relative_motion_tol: f64,
    pub radicand_clamp: f64,
}

impl Default for PerceptionParams {
    fn default() -> Self {
        PerceptionParams {
            safety_radius: 1.0,
            kappa: (2.0 * std::f64::consts::PI / 3.0).cos(),
            relative_motion_tol: RELATIVE_MOTION_TOL,
            radicand_clamp: RADICAND_CLAMP,
        }
    }
}

impl PerceptionParams {
    pub fn new(safety_radius: f64, kappa: f64) -> Result<Self, PerceptionError> {
        let p = PerceptionParams {
            safety_radius,
            kappa,
            ..Default::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PerceptionError> {
        if !(self.safety_radius > 0.0) || !self.safety_radius.is_finite() {
            return Err(PerceptionError::SafetyRadius(self.safety_radius));
        }
        if !(-1.0..=1.0).contains(&self.kappa) {
            return Err(PerceptionError::Kappa(self.kappa));
        }
        Ok(())
    }
}

/// Closest-approach data for an ordered pair under ballistic extrapolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Encounter {
    /// Time until closest approach; negative when it lies in the past.
    pub tau: f64,
    /// Separation at closest approach.
    pub d_min: f64,
    /// Signed path length of agent i up to the closest approach.
    pub d_bar: f64,
}

impl Encounter {
    pub fn is_threat(&self, safety_radius: f64) -> bool {
        self.tau > 0.0 && self.d_min <= safety_radius
    }
}

/// `None` when the relative velocity vanishes (the separation is constant).
pub fn encounter(x_i: Vec3, v_i: Vec3, x_j: Vec3, v_j: Vec3) -> Option<Encounter> {
    encounter_with(x_i, v_i, x_j, v_j, &PerceptionParams::default())
}

pub fn encounter_with(
    x_i: Vec3,
    v_i: Vec3,
    x_j: Vec3,
    v_j: Vec3,
    params: &PerceptionParams,
) -> Option<Encounter> {
    let z = x_j - x_i;
    let u = v_j - v_i;
    let u_norm = u.norm();
    if !(u_norm >= params.relative_motion_tol) {
        return None;
    }
    let zu = z.dot(u);
    let tau = -zu / (u_norm * u_norm);
    let along = zu / u_norm;
    let radicand = z.norm_squared() - along * along;
    // Cauchy-Schwarz makes the radicand nonnegative in exact arithmetic.
    debug_assert!(radicand >= -params.radicand_clamp * z.norm_squared().max(1.0));
    let d_min = radicand.max(0.0).sqrt();
    Some(Encounter {
        tau,
        d_min,
        d_bar: tau * v_i.norm(),
    })
}

/// Inclusive test `⟨z, v⟩ ≥ κ|z||v|`. A zero-speed agent has no cone.
pub fn in_vision_cone(v_i: Vec3, z: Vec3, kappa: f64) -> bool {
    let speed = v_i.norm();
    if !(speed > 0.0) {
        return false;
    }
    z.dot(v_i) >= kappa * z.norm() * speed
}

/// Partners agent `owner` reacts to, in ascending index order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InteractionSet {
    pub owner: usize,
    pub members: Vec<usize>,
}

impl InteractionSet {
    pub fn contains(&self, j: usize) -> bool {
        self.members.binary_search(&j).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }
}

/// Whether `j` passes all three gates for `i`: future closest approach,
/// closest approach inside the safety radius, and `j` inside `i`'s cone.
pub fn perceives(i: &AgentState, j: &AgentState, params: &PerceptionParams) -> bool {
    let z = j.x - i.x;
    if z.norm_squared() == 0.0 {
        return false;
    }
    match encounter_with(i.x, i.v, j.x, j.v, params) {
        Some(enc) => enc.is_threat(params.safety_radius) && in_vision_cone(i.v, z, params.kappa),
        None => false,
    }
}

pub fn interaction_set(
    i: usize,
    states: &[AgentState],
    params: &PerceptionParams,
) -> InteractionSet {
    let me = &states[i];
    let members = states
        .iter()
        .enumerate()
        .filter(|&(j, other)| j != i && perceives(me, other, params))
        .map(|(j, _)| j)
        .collect();
    InteractionSet { owner: i, members }
}

pub fn interaction_sets(states: &[AgentState], params: &PerceptionParams) -> Vec<InteractionSet> {
    (0..states.len())
        .map(|i| interaction_set(i, states, params))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent(id: u32, x: [f64; 3], v: [f64; 3]) -> AgentState {
        AgentState::new(id, x.into(), v.into(), Vec3::ZERO)
    }

    #[test]
    fn head_on_encounter() {
        let e = encounter(Vec3::ZERO, Vec3::X, Vec3::new(4.0, 0.0, 0.0), -Vec3::X).unwrap();
        assert_eq!(e.tau, 2.0);
        assert_eq!(e.d_min, 0.0);
        assert_eq!(e.d_bar, 2.0);
    }

    #[test]
    fn offset_encounter() {
        let e = encounter(Vec3::ZERO, Vec3::X, Vec3::new(2.0, 1.0, 0.0), -Vec3::X).unwrap();
        assert!((e.tau - 1.0).abs() < 1e-15);
        assert!((e.d_min - 1.0).abs() < 1e-15);
        assert!((e.d_bar - 1.0).abs() < 1e-15);
    }

    #[test]
    fn parallel_motion_has_no_encounter() {
        let v = Vec3::new(0.5, 0.1, 0.0);
        assert!(encounter(Vec3::ZERO, v, Vec3::new(1.0, 1.0, 1.0), v).is_none());
    }

    #[test]
    fn cone_examples() {
        assert!(in_vision_cone(Vec3::X, Vec3::Y, -0.5));
        assert!(!in_vision_cone(Vec3::X, -Vec3::X, -0.5));
        assert!(in_vision_cone(Vec3::X, Vec3::X, -0.5));
        assert!(!in_vision_cone(Vec3::ZERO, Vec3::X, -1.0));
    }

    #[test]
    fn cone_boundary_is_inclusive() {
        // 90 degrees off axis with kappa = 0
        assert!(in_vision_cone(Vec3::X, Vec3::Y, 0.0));
    }

    #[test]
    fn overtaking_pair_sets() {
        let states = [
            agent(1, [-4.0, 1e-6, 0.0], [1.0, 0.0, 0.0]),
            agent(2, [-2.0, 0.0, 0.0], [0.5, 0.0, 0.0]),
        ];
        let p = PerceptionParams::new(1.0, -0.5).unwrap();
        assert_eq!(interaction_set(0, &states, &p).members, vec![1]);
        assert!(interaction_set(1, &states, &p).is_empty());
        let e = encounter(states[0].x, states[0].v, states[1].x, states[1].v).unwrap();
        assert!((e.tau - 4.0).abs() < 1e-12);
        assert!(e.d_min < 1e-5);
    }

    #[test]
    fn single_agent_has_no_partners() {
        let states = [agent(0, [0.0; 3], [1.0, 0.0, 0.0])];
        assert!(interaction_set(0, &states, &PerceptionParams::default()).is_empty());
    }

    #[test]
    fn receding_agents_have_no_partners() {
        let states = [
            agent(0, [-1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]),
            agent(1, [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]),
        ];
        let sets = interaction_sets(&states, &PerceptionParams::default());
        assert!(sets.iter().all(InteractionSet::is_empty));
    }

    #[test]
    fn params_validation() {
        assert!(PerceptionParams::new(0.0, 0.0).is_err());
        assert!(PerceptionParams::new(1.0, 1.5).is_err());
        assert!(PerceptionParams::new(1.0, -1.0).is_ok());
    }
}
