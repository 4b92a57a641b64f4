//! Built-in experiment configurations and the JSON scenario file format.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    self, AgentState, DynamicsError, ObstacleSpec, SimParams, TrajectoryLog, World,
};
use crate::external::PotentialKind;
use crate::geometry::Vec3;
use crate::json;

pub const CIRCLE_HORIZON: f64 = 40.0;
pub const OBSTACLE_HORIZON: f64 = 20.0;
/// Lateral offset used to make the overtaking agents almost aligned.
pub const OVERTAKE_OFFSET: f64 = 1e-6;
pub const OBSTACLE_TARGET: Vec3 = Vec3::new(7.0, 7.0, 0.0);

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?}")]
    Unknown(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("malformed scenario file: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
}

pub const SCENARIOS: &[(&str, &str)] = &[
    (
        "circle",
        "agents on the unit circle heading for their antipodes (options: n, alpha)",
    ),
    (
        "overtake",
        "fast agents catching up with a slower one on the x axis (options: n = 2 or 3)",
    ),
    (
        "ball3d",
        "agents on the unit sphere heading for their antipodes (options: n)",
    ),
    (
        "obstacles",
        "agents crossing two fixed balls towards (7, 7, 0) (options: n, seed)",
    ),
];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScenarioOptions {
    pub n: Option<usize>,
    /// Initial speed factor of the circle scenario, `v(0) = −alpha·x(0)`.
    pub alpha: Option<f64>,
    /// Run seed; overrides the seed stored in a scenario file when given.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub agents: Vec<AgentState>,
    pub obstacles: Vec<ObstacleSpec>,
    pub params: SimParams,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut ids = HashSet::new();
        for a in &self.agents {
            if !ids.insert(a.id) {
                return Err(ScenarioError::Invalid(format!(
                    "duplicate agent id {}",
                    a.id
                )));
            }
            if !a.is_finite() || !a.target.is_finite() {
                return Err(ScenarioError::Invalid(format!(
                    "agent {} has non-finite data",
                    a.id
                )));
            }
            for (k, o) in self.obstacles.iter().enumerate() {
                if o.contains(a.x) {
                    return Err(ScenarioError::Invalid(format!(
                        "agent {} starts inside obstacle {k}",
                        a.id
                    )));
                }
            }
        }
        for (k, o) in self.obstacles.iter().enumerate() {
            if !(o.radius > 0.0) || !o.center.is_finite() || !o.velocity.is_finite() {
                return Err(ScenarioError::Invalid(format!("obstacle {k} is malformed")));
            }
        }
        self.params
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))
    }

    pub fn world(&self) -> World {
        World::new(self.agents.clone(), self.obstacles.clone())
    }

    pub fn run(&self) -> Result<TrajectoryLog, DynamicsError> {
        dynamics::run(self.world(), &self.params)
    }

    pub fn to_file(&self) -> ScenarioFile {
        let p = &self.params;
        ScenarioFile {
            agents: self
                .agents
                .iter()
                .map(|a| AgentEntry {
                    x: a.x,
                    v: a.v,
                    target: a.target,
                })
                .collect(),
            obstacles: self.obstacles.clone(),
            params: ParamsEntry {
                safety_radius: Some(p.perception.safety_radius),
                kappa: Some(p.perception.kappa),
                sigma: Some(p.damping.sigma),
                nu: Some(p.damping.nu),
                dt: Some(p.dt),
                t_end: Some(p.t_end),
                seed: Some(p.seed),
                mean_field_scaling: Some(p.avoidance.mean_field_scaling),
                potential: Some(p.potential),
                avoidance_enabled: Some(p.avoidance_enabled),
            },
        }
    }

    pub fn to_json(&self) -> String {
        json::to_string_pretty(&self.to_file())
    }

    pub fn save(&self, path: &Path) -> Result<(), ScenarioError> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

/// On-disk scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub agents: Vec<AgentEntry>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    pub params: ParamsEntry,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEntry {
    pub x: Vec3,
    pub v: Vec3,
    pub target: Vec3,
}

/// Parameter overrides; anything left out keeps its default.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsEntry {
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub safety_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_field_scaling: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub avoidance_enabled: Option<bool>,
}

impl ParamsEntry {
    pub fn apply(&self, params: &mut SimParams) {
        if let Some(r) = self.safety_radius {
            params.perception.safety_radius = r;
        }
        if let Some(k) = self.kappa {
            params.perception.kappa = k;
        }
        if let Some(s) = self.sigma {
            params.damping.sigma = s;
        }
        if let Some(nu) = self.nu {
            params.damping.nu = nu;
        }
        if let Some(dt) = self.dt {
            params.dt = dt;
        }
        if let Some(t) = self.t_end {
            params.t_end = t;
        }
        if let Some(seed) = self.seed {
            params.seed = seed;
        }
        if let Some(m) = self.mean_field_scaling {
            params.avoidance.mean_field_scaling = m;
        }
        if let Some(p) = self.potential {
            params.potential = p;
        }
        if let Some(a) = self.avoidance_enabled {
            params.avoidance_enabled = a;
        }
    }
}

pub fn parse_scenario(name: &str, text: &str) -> Result<ScenarioSpec, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    let mut params = SimParams::default();
    file.params.apply(&mut params);
    let spec = ScenarioSpec {
        name: name.to_string(),
        agents: file
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| AgentState::new(i as u32, a.x, a.v, a.target))
            .collect(),
        obstacles: file.obstacles,
        params,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioSpec, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "file".into());
    parse_scenario(&name, &text)
}

/// Snap rounding residue of `sin`/`cos` at multiples of π/2 to zero.
fn snap(c: f64) -> f64 {
    if c.abs() < 1e-15 {
        0.0
    } else {
        c
    }
}

fn unit_circle(n: usize, i: usize) -> Vec3 {
    let (s, c) = (2.0 * PI * i as f64 / n as f64).sin_cos();
    Vec3::new(snap(c), snap(s), 0.0)
}

/// Near-uniform points on the unit sphere (golden-angle spiral).
fn fibonacci_sphere(n: usize, i: usize) -> Vec3 {
    let golden = PI * (3.0 - 5f64.sqrt());
    let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let (s, c) = (golden * i as f64).sin_cos();
    Vec3::new(r * c, r * s, z)
}

fn default_params(t_end: f64, seed: u64) -> SimParams {
    SimParams {
        t_end,
        seed,
        ..Default::default()
    }
}

/// `n` agents on the unit circle, `v(0) = −alpha·x(0)`, each heading for the
/// antipode of its start.
pub fn circle(n: usize, alpha: f64, seed: u64) -> ScenarioSpec {
    let agents = (0..n)
        .map(|i| {
            let x = unit_circle(n, i);
            AgentState::new(i as u32, x, -x * alpha, -x)
        })
        .collect();
    ScenarioSpec {
        name: "circle".into(),
        agents,
        obstacles: Vec::new(),
        params: default_params(CIRCLE_HORIZON, seed),
    }
}

/// Agents almost aligned on the x axis, the rear ones faster. With `n = 3`
/// a third, fastest agent closes in from behind.
pub fn overtake(n: usize, seed: u64) -> ScenarioSpec {
    let eps = OVERTAKE_OFFSET;
    let mut agents = vec![
        AgentState::new(
            0,
            Vec3::new(-4.0, eps, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::ZERO,
        ),
        AgentState::new(
            1,
            Vec3::new(-2.0, 0.0, 0.0),
            Vec3::new(0.5, 0.0, 0.0),
            Vec3::ZERO,
        ),
    ];
    if n >= 3 {
        agents.push(AgentState::new(
            2,
            Vec3::new(-6.0, 2.0 * eps, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::ZERO,
        ));
    }
    for a in agents.iter_mut() {
        a.target = Vec3::new(OVERTAKE_TARGET_X, 0.0, 0.0);
    }
    ScenarioSpec {
        name: "overtake".into(),
        agents,
        obstacles: Vec::new(),
        params: default_params(CIRCLE_HORIZON, seed),
    }
}

/// Shared target of the overtaking agents, far enough ahead that nobody
/// reaches it within the horizon.
pub const OVERTAKE_TARGET_X: f64 = 100.0;

/// `n` agents spread over the unit sphere, heading for their antipodes with
/// `v(0) = −x(0)/2`.
pub fn ball3d(n: usize, seed: u64) -> ScenarioSpec {
    let agents = (0..n)
        .map(|i| {
            let x = fibonacci_sphere(n, i);
            AgentState::new(i as u32, x, -x * 0.5, -x)
        })
        .collect();
    ScenarioSpec {
        name: "ball3d".into(),
        agents,
        obstacles: Vec::new(),
        params: default_params(CIRCLE_HORIZON, seed),
    }
}

/// Two fixed balls on the diagonal between the start sphere around
/// `(−1, −1, 0)` and the shared target `(7, 7, 0)`. Initial velocities are
/// unit vectors in seeded random directions.
pub fn obstacles(n: usize, seed: u64) -> ScenarioSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = Vec3::new(-1.0, -1.0, 0.0);
    let agents = (0..n)
        .map(|i| {
            let x = center + fibonacci_sphere(n, i);
            let v = loop {
                let g = Vec3::new(
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                );
                if let Some(dir) = g.normalized() {
                    break dir;
                }
            };
            AgentState::new(i as u32, x, v, OBSTACLE_TARGET)
        })
        .collect();
    ScenarioSpec {
        name: "obstacles".into(),
        agents,
        obstacles: vec![
            ObstacleSpec::fixed(Vec3::new(2.0, 2.0, 0.0), 0.5),
            ObstacleSpec::fixed(Vec3::new(5.0, 5.0, 0.0), 1.0),
        ],
        params: default_params(OBSTACLE_HORIZON, seed),
    }
}

/// Builds a named scenario, or loads one from a file when `name` is an
/// existing path.
pub fn build_scenario(
    name: &str,
    options: &ScenarioOptions,
) -> Result<ScenarioSpec, ScenarioError> {
    let seed = options.seed.unwrap_or(0);
    let spec = match name {
        "circle" => circle(options.n.unwrap_or(4), options.alpha.unwrap_or(0.5), seed),
        "overtake" => overtake(options.n.unwrap_or(2), seed),
        "ball3d" => ball3d(options.n.unwrap_or(3), seed),
        "obstacles" => obstacles(options.n.unwrap_or(12), seed),
        other => {
            let path = Path::new(other);
            if path.is_file() {
                let mut spec = load_scenario(path)?;
                if let Some(seed) = options.seed {
                    spec.params.seed = seed;
                }
                return Ok(spec);
            }
            return Err(ScenarioError::Unknown(other.to_string()));
        }
    };
    if name == "overtake" && !matches!(options.n, None | Some(2) | Some(3)) {
        return Err(ScenarioError::Invalid(
            "overtake supports 2 or 3 agents".into(),
        ));
    }
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_of_two() {
        let s = circle(2, 0.5, 0);
        assert_eq!(s.agents[0].x, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(s.agents[0].v, Vec3::new(-0.5, 0.0, 0.0));
        assert_eq!(s.agents[1].x, Vec3::new(-1.0, 0.0, 0.0));
        assert_eq!(s.agents[1].v, Vec3::new(0.5, 0.0, 0.0));
        assert_eq!(s.agents[0].target, -s.agents[0].x);
    }

    #[test]
    fn circle_of_four_is_equally_spaced() {
        let s = circle(4, 0.5, 0);
        let expected = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        for (a, e) in s.agents.iter().zip(expected) {
            assert_eq!((a.x.x, a.x.y, a.x.z), (e[0], e[1], 0.0));
        }
    }

    #[test]
    fn circle_is_rotationally_symmetric() {
        let n = 9;
        let s = circle(n, 0.5, 0);
        for i in 0..n {
            let next = &s.agents[(i + 1) % n];
            let rotated = s.agents[i].x.rotated_z(2.0 * PI / n as f64);
            assert!((rotated - next.x).norm() < 1e-15);
        }
    }

    #[test]
    fn obstacle_layout() {
        let s = obstacles(8, 3);
        assert_eq!(s.obstacles[0].center, Vec3::new(2.0, 2.0, 0.0));
        assert_eq!(s.obstacles[0].radius, 0.5);
        assert_eq!(s.obstacles[1].center, Vec3::new(5.0, 5.0, 0.0));
        assert_eq!(s.obstacles[1].radius, 1.0);
        assert!(s.agents.iter().all(|a| a.target == OBSTACLE_TARGET));
        assert!(s.agents.iter().all(|a| (a.v.norm() - 1.0).abs() < 1e-15));
        assert!(s
            .agents
            .iter()
            .all(|a| ((a.x - Vec3::new(-1.0, -1.0, 0.0)).norm() - 1.0).abs() < 1e-15));
        assert_eq!(s.params.t_end, OBSTACLE_HORIZON);
    }

    #[test]
    fn overtake_layout() {
        let s = overtake(3, 0);
        assert_eq!(s.agents[0].x, Vec3::new(-4.0, 1e-6, 0.0));
        assert_eq!(s.agents[1].v, Vec3::new(0.5, 0.0, 0.0));
        assert_eq!(s.agents[2].x, Vec3::new(-6.0, 2e-6, 0.0));
        assert_eq!(s.agents[2].v, Vec3::new(2.0, 0.0, 0.0));
    }

    #[test]
    fn unknown_name_is_rejected() {
        let err = build_scenario("nosuch", &ScenarioOptions::default()).unwrap_err();
        assert!(matches!(err, ScenarioError::Unknown(_)));
        assert!(err.to_string().contains("unknown scenario"));
    }

    #[test]
    fn file_rejects_unknown_keys() {
        let text =
            r#"{"agents": [{"x": [0,0,0], "v": [1,0,0], "target": [1,1,1]}], "colour": "red"}"#;
        assert!(matches!(
            parse_scenario("t", text),
            Err(ScenarioError::Malformed(_))
        ));
        let text = r#"{"agents": [], "params": {"R": 2.0, "gamma": 1}}"#;
        assert!(parse_scenario("t", text).is_err());
    }

    #[test]
    fn file_defaults_and_overrides() {
        let text = r#"{"agents": [{"x": [0,0,0], "v": [1,0,0], "target": [1,1,1]}],
                       "params": {"R": 2.5, "potential": "distance", "seed": 9}}"#;
        let s = parse_scenario("t", text).unwrap();
        assert_eq!(s.params.perception.safety_radius, 2.5);
        assert_eq!(s.params.potential, PotentialKind::Distance);
        assert_eq!(s.params.seed, 9);
        assert_eq!(s.params.damping.sigma, 0.25);
        assert!(s.obstacles.is_empty());
    }

    #[test]
    fn file_rejects_initial_penetration() {
        let text = r#"{"agents": [{"x": [0,0,0], "v": [1,0,0], "target": [1,1,1]}],
                       "obstacles": [{"center": [0.1,0,0], "radius": 1.0}]}"#;
        assert!(matches!(
            parse_scenario("t", text),
            Err(ScenarioError::Invalid(_))
        ));
    }

    #[test]
    fn export_reload_is_exact() {
        let s = obstacles(5, 42);
        let back = parse_scenario("obstacles", &s.to_json()).unwrap();
        assert_eq!(back.agents, s.agents);
        assert_eq!(back.obstacles, s.obstacles);
        assert_eq!(back.params, s.params);
    }
}
