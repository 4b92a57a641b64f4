//! Gyroscopic avoidance: rotation axes, turning frequencies, cooperation
//! weights and the resulting forces against agents and obstacles.
//!
//! Every force here has the form `v ∧ R` and is therefore orthogonal to the
//! agent's velocity: avoidance turns an agent without changing its speed.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{AgentState, ObstacleSpec};
use crate::geometry::{angle_rates, FrameTolerances, GeometryError, RelativePose, Vec3};
use crate::perception::{
    encounter_with, in_vision_cone, Encounter, InteractionSet, PerceptionParams,
};

pub const PAIR_GAIN: f64 = 8.0 * PI;
pub const OBSTACLE_GAIN: f64 = 16.0 * PI;
pub const DEGENERACY_THRESHOLD: f64 = 1e-9;
pub const FALLBACK_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AvoidanceError {
    #[error("rotation axis is degenerate (relative velocity parallel to the bearing)")]
    DegenerateAxis,
    #[error("agent {agent} is inside obstacle {obstacle}")]
    Penetration { agent: u32, obstacle: usize },
    #[error("pair is not a gated cooperative pair")]
    NotGated,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvoidanceParams {
    pub pair_gain: f64,
    pub obstacle_gain: f64,
    /// Magnitude of the symmetry-breaking fallback force.
    pub epsilon: f64,
    pub degeneracy_threshold: f64,
    /// Divide the pairwise sum by the number of agents.
    pub mean_field_scaling: bool,
    pub frame: FrameTolerances,
}

impl Default for AvoidanceParams {
    fn default() -> Self {
        AvoidanceParams {
            pair_gain: PAIR_GAIN,
            obstacle_gain: OBSTACLE_GAIN,
            epsilon: FALLBACK_EPSILON,
            degeneracy_threshold: DEGENERACY_THRESHOLD,
            mean_field_scaling: true,
            frame: FrameTolerances::default(),
        }
    }
}

impl AvoidanceParams {
    fn pair_scale(&self, n: usize) -> f64 {
        if self.mean_field_scaling && n > 0 {
            1.0 / n as f64
        } else {
            1.0
        }
    }
}

/// Rotation data of one gated pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairInteraction {
    /// `R_ij = −(v_j − v_i) ∧ k_ij / d_ij`
    pub axis: Vec3,
    /// `gain·e^(−τ) / |R_ij|`
    pub freq: f64,
    /// 1 for a cooperative pair, `cos(alpha_ij)` otherwise.
    pub weight: f64,
    pub cooperative: bool,
}

impl PairInteraction {
    /// `freq·weight·(v ∧ axis)`
    pub fn force_on(&self, v: Vec3) -> Vec3 {
        v.cross(self.axis) * (self.freq * self.weight)
    }
}

/// `R_ij = −(v_j − v_i) ∧ k_ij / d_ij`
pub fn rotation_axis(pose: &RelativePose, v_i: Vec3, v_j: Vec3) -> Vec3 {
    -(v_j - v_i).cross(pose.k) / pose.d
}

fn interaction_from(
    axis: Vec3,
    tau: f64,
    gain: f64,
    pose: &RelativePose,
    cooperative: bool,
    threshold: f64,
) -> Result<PairInteraction, AvoidanceError> {
    let axis_norm = axis.norm();
    if !(axis_norm >= threshold) {
        return Err(AvoidanceError::DegenerateAxis);
    }
    Ok(PairInteraction {
        axis,
        freq: gain * (-tau).exp() / axis_norm,
        weight: if cooperative { 1.0 } else { pose.cos_alpha },
        cooperative,
    })
}

pub fn pair_interaction(
    i: &AgentState,
    j: &AgentState,
    enc: &Encounter,
    pose: &RelativePose,
    mutual_visible: bool,
    params: &AvoidanceParams,
) -> Result<PairInteraction, AvoidanceError> {
    let axis = rotation_axis(pose, i.v, j.v);
    interaction_from(
        axis,
        enc.tau,
        params.pair_gain,
        pose,
        mutual_visible,
        params.degeneracy_threshold,
    )
}

/// Direct pairwise sum and the ingredients of the degeneracy fallback for
/// one agent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SelfForceParts {
    /// `scale·Σ ω H (v ∧ R)` over non-degenerate partners.
    pub direct: Vec3,
    /// `scale·Σ e^(−τ) H (v ∧ e_z)` over all partners, before the ε factor.
    pub fallback_unit: Vec3,
    pub partners: usize,
    pub degenerate_pairs: usize,
}

pub fn self_force_parts(
    i: usize,
    states: &[AgentState],
    sets: &[InteractionSet],
    perception: &PerceptionParams,
    params: &AvoidanceParams,
) -> SelfForceParts {
    let me = &states[i];
    let mut parts = SelfForceParts::default();
    if !(me.v.norm() > 0.0) {
        return parts;
    }
    let scale = params.pair_scale(states.len());
    let lateral = me.v.cross(Vec3::Z);
    for &j in &sets[i].members {
        let other = &states[j];
        let Some(enc) = encounter_with(me.x, me.v, other.x, other.v, perception) else {
            continue;
        };
        let Ok(pose) = RelativePose::new(me.x, me.v, other.x, &params.frame) else {
            continue;
        };
        let mutual = sets[j].contains(i);
        parts.partners += 1;
        let weight = if mutual { 1.0 } else { pose.cos_alpha };
        parts.fallback_unit += lateral * ((-enc.tau).exp() * weight);
        match pair_interaction(me, other, &enc, &pose, mutual, params) {
            Ok(pair) => parts.direct += pair.force_on(me.v),
            Err(_) => parts.degenerate_pairs += 1,
        }
    }
    parts.direct = parts.direct * scale;
    parts.fallback_unit = parts.fallback_unit * scale;
    parts
}

/// Pairwise avoidance force without the fallback.
pub fn direct_self_force(
    i: usize,
    states: &[AgentState],
    sets: &[InteractionSet],
    perception: &PerceptionParams,
    params: &AvoidanceParams,
) -> Vec3 {
    self_force_parts(i, states, sets, perception, params).direct
}

/// Pairwise avoidance force on agent `i`. When the direct sum cancels (by
/// symmetry or colinearity) while partners remain, a small turn about the
/// vertical axis of size `eps_draw` is applied instead.
pub fn self_force(
    i: usize,
    states: &[AgentState],
    sets: &[InteractionSet],
    perception: &PerceptionParams,
    params: &AvoidanceParams,
    eps_draw: f64,
) -> Vec3 {
    let parts = self_force_parts(i, states, sets, perception, params);
    if parts.partners > 0 && parts.direct.norm() < params.degeneracy_threshold {
        parts.fallback_unit * eps_draw
    } else {
        parts.direct
    }
}

/// Closest point of the sphere surface to `x` among the points inside the
/// vision cone of velocity `v`. `None` if the cone misses the sphere or `x`
/// is not outside it.
pub fn obstacle_contact_point(
    x: Vec3,
    v: Vec3,
    obstacle: &ObstacleSpec,
    kappa: f64,
) -> Option<Vec3> {
    let heading = v.normalized()?;
    let w = obstacle.center - x;
    let dist = w.norm();
    let r = obstacle.radius;
    if !(dist > r) {
        return None;
    }
    let to_center = w / dist;
    let cos_psi = heading.dot(to_center).clamp(-1.0, 1.0);
    if cos_psi >= kappa {
        return Some(x + to_center * (dist - r));
    }
    // Centre direction is outside the cone: the nearest visible surface point
    // lies on the cone boundary, in the plane of heading and centre direction.
    let psi = cos_psi.acos();
    let half_angle = kappa.clamp(-1.0, 1.0).acos();
    let angular_radius = (r / dist).asin();
    if psi - half_angle > angular_radius {
        return None;
    }
    let perp = (to_center - heading * cos_psi)
        .normalized()
        .or_else(|| crate::geometry::local_frame_of(v).ok().map(|f| f.e_phi))?;
    let ray = heading * kappa + perp * (1.0 - kappa * kappa).max(0.0).sqrt();
    let b = ray.dot(w);
    let disc = (b * b - (dist * dist - r * r)).max(0.0);
    let t = b - disc.sqrt();
    if t < 0.0 {
        return None;
    }
    Some(x + ray * t)
}

/// Turning force of a single agent against a spherical obstacle. The obstacle
/// never cooperates, so the weight is `cos(alpha)` of the contact point.
pub fn obstacle_force(
    agent: &AgentState,
    obstacle_index: usize,
    obstacle: &ObstacleSpec,
    params: &AvoidanceParams,
    perception: &PerceptionParams,
    eps_draw: f64,
) -> Result<Vec3, AvoidanceError> {
    if obstacle.contains(agent.x) {
        return Err(AvoidanceError::Penetration {
            agent: agent.id,
            obstacle: obstacle_index,
        });
    }
    let Some(contact) = obstacle_contact_point(agent.x, agent.v, obstacle, perception.kappa) else {
        return Ok(Vec3::ZERO);
    };
    let Some(enc) = encounter_with(agent.x, agent.v, contact, obstacle.velocity, perception) else {
        return Ok(Vec3::ZERO);
    };
    if !enc.is_threat(perception.safety_radius) {
        return Ok(Vec3::ZERO);
    }
    let pose = RelativePose::new(agent.x, agent.v, contact, &params.frame)?;
    let axis = rotation_axis(&pose, agent.v, obstacle.velocity);
    match interaction_from(
        axis,
        enc.tau,
        params.obstacle_gain,
        &pose,
        false,
        params.degeneracy_threshold,
    ) {
        Ok(pair) => Ok(pair.force_on(agent.v)),
        Err(AvoidanceError::DegenerateAxis) => {
            Ok(agent.v.cross(Vec3::Z) * (eps_draw * (-enc.tau).exp() * pose.cos_alpha))
        }
        Err(e) => Err(e),
    }
}

/// Result of the finite-difference check of the angle-rate growth bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthCheck {
    /// Central difference of `A²` along the isolated cooperative dynamics.
    pub lhs: f64,
    /// `(gamma / 2)·A²` at the initial instant.
    pub rhs: f64,
    pub a_squared: f64,
    pub gamma: f64,
}

#[derive(Clone, Copy)]
struct PairState {
    xi: Vec3,
    vi: Vec3,
    xj: Vec3,
    vj: Vec3,
}

impl PairState {
    fn axpy(&self, h: f64, d: &PairState) -> PairState {
        PairState {
            xi: self.xi + d.xi * h,
            vi: self.vi + d.vi * h,
            xj: self.xj + d.xj * h,
            vj: self.vj + d.vj * h,
        }
    }
}

/// Both agents turn about the shared axis `R_ij` with the shared frequency.
fn cooperative_pair_rhs(s: &PairState, params: &AvoidanceParams) -> PairState {
    let z = s.xj - s.xi;
    let u = s.vj - s.vi;
    let d2 = z.norm_squared();
    let u2 = u.norm_squared();
    let axis = -u.cross(z) / d2;
    let axis_norm = axis.norm();
    let (ai, aj) = if axis_norm >= params.degeneracy_threshold && u2 > 0.0 {
        let tau = -z.dot(u) / u2;
        let freq = params.pair_gain * (-tau).exp() / axis_norm;
        (s.vi.cross(axis) * freq, s.vj.cross(axis) * freq)
    } else {
        (Vec3::ZERO, Vec3::ZERO)
    };
    PairState {
        xi: s.vi,
        vi: ai,
        xj: s.vj,
        vj: aj,
    }
}

fn rk4_pair(s: &PairState, h: f64, params: &AvoidanceParams) -> PairState {
    let k1 = cooperative_pair_rhs(s, params);
    let k2 = cooperative_pair_rhs(&s.axpy(h / 2.0, &k1), params);
    let k3 = cooperative_pair_rhs(&s.axpy(h / 2.0, &k2), params);
    let k4 = cooperative_pair_rhs(&s.axpy(h, &k3), params);
    PairState {
        xi: s.xi + (k1.xi + k2.xi * 2.0 + k3.xi * 2.0 + k4.xi) * (h / 6.0),
        vi: s.vi + (k1.vi + k2.vi * 2.0 + k3.vi * 2.0 + k4.vi) * (h / 6.0),
        xj: s.xj + (k1.xj + k2.xj * 2.0 + k3.xj * 2.0 + k4.xj) * (h / 6.0),
        vj: s.vj + (k1.vj + k2.vj * 2.0 + k3.vj * 2.0 + k4.vj) * (h / 6.0),
    }
}

fn a_squared_of(s: &PairState, tol: &FrameTolerances) -> Result<f64, AvoidanceError> {
    let pose = RelativePose::new(s.xi, s.vi, s.xj, tol)?;
    Ok(angle_rates(&pose, s.vi, s.vj, 0.0)?.a_squared)
}

/// Compares `d(A²)/dt` against `(gamma/2)·A²` for an isolated pair that
/// sees each other and is on a threatening course.
pub fn a_squared_growth_check(
    i: &AgentState,
    j: &AgentState,
    perception: &PerceptionParams,
    params: &AvoidanceParams,
    h: f64,
) -> Result<GrowthCheck, AvoidanceError> {
    let enc = encounter_with(i.x, i.v, j.x, j.v, perception).ok_or(AvoidanceError::NotGated)?;
    let cooperative = enc.is_threat(perception.safety_radius)
        && in_vision_cone(i.v, j.x - i.x, perception.kappa)
        && in_vision_cone(j.v, i.x - j.x, perception.kappa);
    if !cooperative {
        return Err(AvoidanceError::NotGated);
    }
    let pose = RelativePose::new(i.x, i.v, j.x, &params.frame)?;
    let freq = match pair_interaction(i, j, &enc, &pose, true, params) {
        Ok(pair) => pair.freq,
        Err(AvoidanceError::DegenerateAxis) => 0.0,
        Err(e) => return Err(e),
    };
    let rates = angle_rates(&pose, i.v, j.v, freq)?;
    let start = PairState {
        xi: i.x,
        vi: i.v,
        xj: j.x,
        vj: j.v,
    };
    let ahead = a_squared_of(&rk4_pair(&start, h, params), &params.frame)?;
    let behind = a_squared_of(&rk4_pair(&start, -h, params), &params.frame)?;
    Ok(GrowthCheck {
        lhs: (ahead - behind) / (2.0 * h),
        rhs: 0.5 * rates.gamma * rates.a_squared,
        a_squared: rates.a_squared,
        gamma: rates.gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{encounter, interaction_sets};

    fn agent(id: u32, x: [f64; 3], v: [f64; 3]) -> AgentState {
        AgentState::new(id, x.into(), v.into(), Vec3::ZERO)
    }

    fn offset_pair() -> Vec<AgentState> {
        vec![
            agent(0, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]),
            agent(1, [2.0, 1.0, 0.0], [-1.0, 0.0, 0.0]),
        ]
    }

    #[test]
    fn offset_pair_interaction() {
        let s = offset_pair();
        let enc = encounter(s[0].x, s[0].v, s[1].x, s[1].v).unwrap();
        let pose = crate::geometry::relative_pose(s[0].x, s[0].v, s[1].x).unwrap();
        let p =
            pair_interaction(&s[0], &s[1], &enc, &pose, true, &AvoidanceParams::default()).unwrap();
        assert!((p.axis - Vec3::new(0.0, 0.0, 0.4)).norm() < 1e-15);
        let expected = 20.0 * PI * (-1.0f64).exp();
        assert!((p.freq - expected).abs() < 1e-12 * expected);
        assert_eq!(p.weight, 1.0);
        assert!(p.cooperative);
    }

    #[test]
    fn colinear_pair_is_degenerate() {
        let i = agent(0, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]);
        let j = agent(1, [4.0, 0.0, 0.0], [-1.0, 0.0, 0.0]);
        let enc = encounter(i.x, i.v, j.x, j.v).unwrap();
        let pose = crate::geometry::relative_pose(i.x, i.v, j.x).unwrap();
        assert_eq!(
            pair_interaction(&i, &j, &enc, &pose, true, &AvoidanceParams::default()),
            Err(AvoidanceError::DegenerateAxis)
        );
    }

    #[test]
    fn axis_scales_inversely_with_distance() {
        let v_i = Vec3::X;
        let v_j = Vec3::new(-1.0, 0.3, 0.0);
        let z = Vec3::new(2.0, 1.0, 0.5);
        let near = rotation_axis(
            &crate::geometry::relative_pose(Vec3::ZERO, v_i, z).unwrap(),
            v_i,
            v_j,
        );
        let far = rotation_axis(
            &crate::geometry::relative_pose(Vec3::ZERO, v_i, z * 2.0).unwrap(),
            v_i,
            v_j,
        );
        assert!((near.norm() - 2.0 * far.norm()).abs() < 1e-15);
    }

    #[test]
    fn offset_pair_self_force() {
        let s = offset_pair();
        let per = PerceptionParams::default();
        let sets = interaction_sets(&s, &per);
        assert_eq!(sets[0].members, vec![1]);
        let f = self_force(0, &s, &sets, &per, &AvoidanceParams::default(), 0.0);
        let expected = Vec3::new(0.0, -4.0 * PI * (-1.0f64).exp(), 0.0);
        assert!((f - expected).norm() < 1e-12);
        assert!((f.y + 4.62291).abs() < 1e-5);
    }

    #[test]
    fn lone_agent_feels_nothing() {
        let s = vec![agent(0, [0.0; 3], [1.0, 0.0, 0.0])];
        let per = PerceptionParams::default();
        let sets = interaction_sets(&s, &per);
        assert_eq!(
            self_force(0, &s, &sets, &per, &AvoidanceParams::default(), 1e-6),
            Vec3::ZERO
        );
    }

    #[test]
    fn head_on_pair_uses_fallback() {
        let s = vec![
            agent(0, [1.0, 0.0, 0.0], [-0.5, 0.0, 0.0]),
            agent(1, [-1.0, 0.0, 0.0], [0.5, 0.0, 0.0]),
        ];
        let per = PerceptionParams::default();
        let sets = interaction_sets(&s, &per);
        let params = AvoidanceParams::default();
        let eps = 0.7e-6;
        let f = self_force(0, &s, &sets, &per, &params, eps);
        // tau = 2, H = 1, N = 2
        let expected = Vec3::new(-0.5, 0.0, 0.0).cross(Vec3::Z) * (eps * (-2.0f64).exp() / 2.0);
        assert!((f - expected).norm() < 1e-20);
        let g = self_force(1, &s, &sets, &per, &params, eps);
        assert!((g + f).norm() < 1e-20);
    }

    #[test]
    fn obstacle_astern_exerts_nothing() {
        let a = agent(0, [3.0, 5.0, 0.0], [1.0, 0.0, 0.0]);
        let o = ObstacleSpec::fixed(Vec3::new(0.0, 5.0, 0.0), 1.0);
        let f = obstacle_force(
            &a,
            0,
            &o,
            &AvoidanceParams::default(),
            &PerceptionParams::default(),
            1e-6,
        )
        .unwrap();
        assert_eq!(f, Vec3::ZERO);
    }

    #[test]
    fn obstacle_dead_ahead_is_degenerate() {
        let a = agent(0, [3.0, 5.0, 0.0], [1.0, 0.0, 0.0]);
        let o = ObstacleSpec::fixed(Vec3::new(5.0, 5.0, 0.0), 1.0);
        let per = PerceptionParams::default();
        let contact = obstacle_contact_point(a.x, a.v, &o, per.kappa).unwrap();
        assert!((contact - Vec3::new(4.0, 5.0, 0.0)).norm() < 1e-15);
        let eps = 1e-6;
        let f = obstacle_force(&a, 0, &o, &AvoidanceParams::default(), &per, eps).unwrap();
        // tau = 1, cos(alpha) = 1
        let expected = Vec3::X.cross(Vec3::Z) * (eps * (-1.0f64).exp());
        assert!((f - expected).norm() < 1e-20);
    }

    #[test]
    fn static_obstacle_axis_matches_agent_side_form() {
        let a = agent(0, [0.0, 0.0, 0.0], [1.0, 0.2, 0.1]);
        let o = ObstacleSpec::fixed(Vec3::new(3.0, 1.5, 0.0), 1.0);
        let contact = obstacle_contact_point(a.x, a.v, &o, -0.5).unwrap();
        let pose = crate::geometry::relative_pose(a.x, a.v, contact).unwrap();
        let axis = rotation_axis(&pose, a.v, Vec3::ZERO);
        let direct = a.v.cross(pose.k) / pose.d;
        assert!((axis - direct).norm() < 1e-15);
    }

    #[test]
    fn obstacle_pushes_agent_away() {
        let a = agent(0, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]);
        let o = ObstacleSpec::fixed(Vec3::new(2.0, 0.8, 0.0), 0.5);
        let f = obstacle_force(
            &a,
            0,
            &o,
            &AvoidanceParams::default(),
            &PerceptionParams::default(),
            0.0,
        )
        .unwrap();
        assert!(f.y < 0.0);
        assert!(f.dot(a.v).abs() < 1e-12);
    }

    #[test]
    fn obstacle_penetration_is_reported() {
        let a = agent(3, [5.2, 5.0, 0.0], [1.0, 0.0, 0.0]);
        let o = ObstacleSpec::fixed(Vec3::new(5.0, 5.0, 0.0), 1.0);
        let r = obstacle_force(
            &a,
            1,
            &o,
            &AvoidanceParams::default(),
            &PerceptionParams::default(),
            0.0,
        );
        assert_eq!(
            r,
            Err(AvoidanceError::Penetration {
                agent: 3,
                obstacle: 1
            })
        );
    }

    #[test]
    fn contact_point_on_cone_boundary() {
        // Sphere centre at 90 degrees, cone half angle 60 degrees: the
        // nearest visible point lies on the 60 degree ray.
        let o = ObstacleSpec::fixed(Vec3::new(0.0, 3.0, 0.0), 2.0);
        let p = obstacle_contact_point(Vec3::ZERO, Vec3::X, &o, 0.5).unwrap();
        assert!(((p - o.center).norm() - 2.0).abs() < 1e-12);
        let dir = p.normalized().unwrap();
        assert!((dir.dot(Vec3::X) - 0.5).abs() < 1e-12);
        // A narrower cone misses the sphere entirely.
        assert!(obstacle_contact_point(Vec3::ZERO, Vec3::X, &o, 0.95).is_none());
    }

    #[test]
    fn growth_check_offset_pair() {
        let s = offset_pair();
        let g = a_squared_growth_check(
            &s[0],
            &s[1],
            &PerceptionParams::default(),
            &AvoidanceParams::default(),
            1e-6,
        )
        .unwrap();
        assert!(g.lhs >= g.rhs - 1e-3);
        assert!((g.a_squared - 0.16).abs() < 1e-14);
    }

    #[test]
    fn growth_check_zero_rates() {
        let i = agent(0, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]);
        let j = agent(1, [4.0, 0.0, 0.0], [-1.0, 0.0, 0.0]);
        let g = a_squared_growth_check(
            &i,
            &j,
            &PerceptionParams::default(),
            &AvoidanceParams::default(),
            1e-6,
        )
        .unwrap();
        assert_eq!(g.rhs, 0.0);
        assert!(g.lhs >= -1e-3);
    }

    #[test]
    fn growth_check_skips_receding_pair() {
        let i = agent(0, [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]);
        let j = agent(1, [4.0, 0.5, 0.0], [1.0, 0.0, 0.0]);
        assert_eq!(
            a_squared_growth_check(
                &i,
                &j,
                &PerceptionParams::default(),
                &AvoidanceParams::default(),
                1e-6
            ),
            Err(AvoidanceError::NotGated)
        );
    }
}
