//! Interaction field `Ω` evaluated against an empirical ensemble.
//!
//! `Ω(x, v)` is built from the kinetic-level ingredients: the closest-approach
//! functions of a displacement `z` and relative velocity `u`, the axis
//! `R(z, u) = u ∧ z / |z|²` and the kernel `m(z, v, w)`. An agent's pairwise
//! avoidance force equals `v ∧ Ω` over the ensemble of all agents, which makes
//! this module an independent check of the agent-level sum.

use crate::avoidance::{direct_self_force, AvoidanceParams};
use crate::dynamics::AgentState;
use crate::geometry::{RelativePose, Vec3};
use crate::perception::{in_vision_cone, interaction_sets, PerceptionParams};

/// Uniformly weighted particles `(x_j, v_j)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmpiricalEnsemble {
    pub particles: Vec<(Vec3, Vec3)>,
}

impl EmpiricalEnsemble {
    pub fn new(particles: Vec<(Vec3, Vec3)>) -> Self {
        EmpiricalEnsemble { particles }
    }

    pub fn from_agents(agents: &[AgentState]) -> Self {
        EmpiricalEnsemble {
            particles: agents.iter().map(|a| (a.x, a.v)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }
}

/// Time to closest approach `−⟨z, u⟩ / |u|²`.
pub fn time_to_interaction(z: Vec3, u: Vec3) -> f64 {
    -z.dot(u) / u.norm_squared()
}

/// Closest-approach distance `(|z|² − ⟨z, u/|u|⟩²)^½`.
pub fn minimal_distance(z: Vec3, u: Vec3) -> f64 {
    let along = z.dot(u) / u.norm();
    (z.norm_squared() - along * along).max(0.0).sqrt()
}

/// `R(z, u) = u ∧ z / |z|²`
pub fn rotation_axis(z: Vec3, u: Vec3) -> Vec3 {
    u.cross(z) / z.norm_squared()
}

/// Whether displacement `z` lies in `K(v, w) = I(w − v) ∩ C(v)`.
pub fn in_interaction_region(z: Vec3, v: Vec3, w: Vec3, perception: &PerceptionParams) -> bool {
    let u = w - v;
    if z.norm_squared() == 0.0 || !(u.norm() >= perception.relative_motion_tol) {
        return false;
    }
    time_to_interaction(z, u) > 0.0
        && minimal_distance(z, u) <= perception.safety_radius
        && in_vision_cone(v, z, perception.kappa)
}

/// Kernel `m(z, v, w) = gain·H·e^(−τ(z, w − v)) / |R(z, w − v)|`, where `H = 1`
/// when the partner at `z` moving with `w` sees the origin, and `cos(alpha)`
/// of `z` in the frame of `v` otherwise. `None` on a degenerate axis.
pub fn mobility_kernel(
    z: Vec3,
    v: Vec3,
    w: Vec3,
    perception: &PerceptionParams,
    params: &AvoidanceParams,
) -> Option<f64> {
    let u = w - v;
    let axis_norm = rotation_axis(z, u).norm();
    if !(axis_norm >= params.degeneracy_threshold) {
        return None;
    }
    let weight = if in_vision_cone(w, -z, perception.kappa) {
        1.0
    } else {
        RelativePose::new(Vec3::ZERO, v, z, &params.frame)
            .ok()?
            .cos_alpha
    };
    Some(params.pair_gain * weight * (-time_to_interaction(z, u)).exp() / axis_norm)
}

/// `Ω = −(1/N) Σ_j m(z_j, v, v_j)·1_K(z_j)·R(z_j, v_j − v)`, `z_j = x_j − x`.
/// The `1/N` factor follows the avoidance parameters' scaling switch.
pub fn omega_empirical(
    x: Vec3,
    v: Vec3,
    ensemble: &EmpiricalEnsemble,
    perception: &PerceptionParams,
    params: &AvoidanceParams,
) -> Vec3 {
    if ensemble.is_empty() || !(v.norm() > 0.0) {
        return Vec3::ZERO;
    }
    let mut sum = Vec3::ZERO;
    for &(xj, vj) in &ensemble.particles {
        let z = xj - x;
        if !in_interaction_region(z, v, vj, perception) {
            continue;
        }
        if let Some(m) = mobility_kernel(z, v, vj, perception, params) {
            sum += rotation_axis(z, vj - v) * m;
        }
    }
    let scale = if params.mean_field_scaling {
        1.0 / ensemble.len() as f64
    } else {
        1.0
    };
    -sum * scale
}

/// Largest relative difference, over all agents, between the direct
/// pairwise force (no fallback) and `v ∧ Ω` evaluated on the same agents.
pub fn force_equivalence_report(
    agents: &[AgentState],
    perception: &PerceptionParams,
    params: &AvoidanceParams,
) -> f64 {
    let sets = interaction_sets(agents, perception);
    let ensemble = EmpiricalEnsemble::from_agents(agents);
    let mut worst = 0.0f64;
    for (i, a) in agents.iter().enumerate() {
        let pairwise = direct_self_force(i, agents, &sets, perception, params);
        let field =
            a.v.cross(omega_empirical(a.x, a.v, &ensemble, perception, params));
        let scale = pairwise.norm().max(field.norm());
        if scale > 0.0 {
            worst = worst.max((pairwise - field).norm() / scale);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::avoidance::self_force;

    fn offset_pair() -> Vec<AgentState> {
        vec![
            AgentState::new(0, Vec3::ZERO, Vec3::X, Vec3::ZERO),
            AgentState::new(1, Vec3::new(2.0, 1.0, 0.0), -Vec3::X, Vec3::ZERO),
        ]
    }

    #[test]
    fn empty_ensemble_gives_zero() {
        let p = PerceptionParams::default();
        let a = AvoidanceParams::default();
        assert_eq!(
            omega_empirical(Vec3::ZERO, Vec3::X, &EmpiricalEnsemble::default(), &p, &a),
            Vec3::ZERO
        );
    }

    #[test]
    fn self_term_is_excluded() {
        let p = PerceptionParams::default();
        let a = AvoidanceParams::default();
        let ens = EmpiricalEnsemble::new(vec![(Vec3::ZERO, Vec3::X)]);
        assert_eq!(
            omega_empirical(Vec3::ZERO, Vec3::X, &ens, &p, &a),
            Vec3::ZERO
        );
    }

    #[test]
    fn single_partner_matches_pair_force() {
        let agents = offset_pair();
        let p = PerceptionParams::default();
        let a = AvoidanceParams::default();
        let sets = interaction_sets(&agents, &p);
        let pair = self_force(0, &agents, &sets, &p, &a, 0.0);
        let ens = EmpiricalEnsemble::from_agents(&agents);
        let field = agents[0]
            .v
            .cross(omega_empirical(agents[0].x, agents[0].v, &ens, &p, &a));
        assert!((pair - field).norm() <= 1e-12 * pair.norm());
        assert!(force_equivalence_report(&agents, &p, &a) <= 1e-12);
    }

    #[test]
    fn all_degenerate_world_reports_zero() {
        let agents = vec![
            AgentState::new(
                0,
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(-0.5, 0.0, 0.0),
                Vec3::ZERO,
            ),
            AgentState::new(
                1,
                Vec3::new(-1.0, 0.0, 0.0),
                Vec3::new(0.5, 0.0, 0.0),
                Vec3::ZERO,
            ),
        ];
        let p = PerceptionParams::default();
        let a = AvoidanceParams::default();
        assert_eq!(force_equivalence_report(&agents, &p, &a), 0.0);
    }

    #[test]
    fn closest_approach_functions() {
        let z = Vec3::new(2.0, 1.0, 0.0);
        let u = Vec3::new(-2.0, 0.0, 0.0);
        assert_eq!(time_to_interaction(z, u), 1.0);
        assert_eq!(minimal_distance(z, u), 1.0);
        assert_eq!(rotation_axis(z, u), Vec3::new(0.0, 0.0, -0.4));
    }
}
