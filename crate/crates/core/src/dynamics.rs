//! World state, the full right-hand side, time stepping and diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::avoidance::{obstacle_force, self_force, AvoidanceParams};
use crate::external::{external_force, potential, DampingNoise, PotentialKind};
use crate::geometry::{angle_rates, RelativePose, Vec3};
use crate::perception::{interaction_sets, InteractionSet, PerceptionParams};

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_SAMPLE_INTERVAL: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite state for agent {agent} at t = {t}")]
    NonFinite { t: f64, agent: u32 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: u32,
    pub x: Vec3,
    pub v: Vec3,
    pub target: Vec3,
}

impl AgentState {
    pub fn new(id: u32, x: Vec3, v: Vec3, target: Vec3) -> Self {
        AgentState { id, x, v, target }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.v.is_finite()
    }
}

/// Solid ball moving with constant velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub center: Vec3,
    pub radius: f64,
    #[serde(default)]
    pub velocity: Vec3,
}

impl ObstacleSpec {
    pub fn fixed(center: Vec3, radius: f64) -> Self {
        ObstacleSpec {
            center,
            radius,
            velocity: Vec3::ZERO,
        }
    }

    /// Strict interior test.
    pub fn contains(&self, x: Vec3) -> bool {
        (x - self.center).norm() < self.radius
    }

    fn advanced(&self, dt: f64) -> ObstacleSpec {
        ObstacleSpec {
            center: self.center + self.velocity * dt,
            ..*self
        }
    }
}

/// Time integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// Classical Runge-Kutta.
    Rk4,
    /// Runge-Kutta for the state plus the same four stages applied to
    /// `d|v|²/dt = 2⟨v, F_ext⟩`; the speed of every agent that was turned
    /// during the step is reset to that value. Avoidance forces are
    /// orthogonal to `v`, so this removes the amplitude error plain RK4
    /// makes on fast rotations without touching the heading.
    #[default]
    Rk4SpeedProjected,
}

impl std::str::FromStr for Integrator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rk4" => Ok(Integrator::Rk4),
            "rk4-speed-projected" => Ok(Integrator::Rk4SpeedProjected),
            other => Err(format!(
                "unknown integrator {other:?} (expected rk4 or rk4-speed-projected)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub perception: PerceptionParams,
    pub avoidance: AvoidanceParams,
    pub damping: DampingNoise,
    pub potential: PotentialKind,
    pub dt: f64,
    pub t_end: f64,
    pub sample_interval: f64,
    pub seed: u64,
    pub avoidance_enabled: bool,
    pub integrator: Integrator,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            perception: PerceptionParams::default(),
            avoidance: AvoidanceParams::default(),
            damping: DampingNoise::default(),
            potential: PotentialKind::Smooth,
            dt: DEFAULT_DT,
            t_end: 40.0,
            sample_interval: DEFAULT_SAMPLE_INTERVAL,
            seed: 0,
            avoidance_enabled: true,
            integrator: Integrator::default(),
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |msg: String| Err(DynamicsError::InvalidParams(msg));
        self.perception
            .validate()
            .map_err(|e| DynamicsError::InvalidParams(e.to_string()))?;
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end must be nonnegative, got {}", self.t_end));
        }
        if !(self.sample_interval > 0.0) {
            return bad(format!(
                "sample interval must be positive, got {}",
                self.sample_interval
            ));
        }
        if !(self.damping.sigma >= 0.0) || !(self.damping.nu >= 0.0) {
            return bad("sigma and nu must be nonnegative".into());
        }
        let a = &self.avoidance;
        if !(a.pair_gain > 0.0) || !(a.obstacle_gain > 0.0) || !(a.epsilon > 0.0) {
            return bad("avoidance gains and epsilon must be positive".into());
        }
        Ok(())
    }

    pub fn total_steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }

    pub fn sample_stride(&self) -> u64 {
        ((self.sample_interval / self.dt).round() as u64).max(1)
    }
}

/// Agents and obstacles at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub t: f64,
    pub agents: Vec<AgentState>,
    pub obstacles: Vec<ObstacleSpec>,
}

impl World {
    pub fn new(agents: Vec<AgentState>, obstacles: Vec<ObstacleSpec>) -> Self {
        World {
            t: 0.0,
            agents,
            obstacles,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Derivative {
    pub dx: Vec3,
    pub dv: Vec3,
    /// `d|v|²/dt` from the non-gyroscopic forces alone.
    pub dspeed2: f64,
    /// Whether any avoidance force acted on the agent.
    pub turning: bool,
}

/// Deterministic part of the equations of motion: `dx/dt = v`,
/// `dv/dt = F_self + Σ F_obstacle − ∇V − σv`.
pub fn rhs(
    agents: &[AgentState],
    obstacles: &[ObstacleSpec],
    params: &SimParams,
    eps_draw: f64,
) -> Vec<Derivative> {
    let sets = if params.avoidance_enabled {
        interaction_sets(agents, &params.perception)
    } else {
        Vec::new()
    };
    agents
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let ext = external_force(params.potential, &params.damping, a.x, a.v, a.target);
            let mut turn = Vec3::ZERO;
            if params.avoidance_enabled {
                turn += self_force(
                    i,
                    agents,
                    &sets,
                    &params.perception,
                    &params.avoidance,
                    eps_draw,
                );
                for (k, o) in obstacles.iter().enumerate() {
                    // A penetrating agent gets no obstacle force; the run
                    // loop records the event.
                    if let Ok(f) =
                        obstacle_force(a, k, o, &params.avoidance, &params.perception, eps_draw)
                    {
                        turn += f;
                    }
                }
            }
            Derivative {
                dx: a.v,
                dv: ext + turn,
                dspeed2: 2.0 * a.v.dot(ext),
                turning: turn != Vec3::ZERO,
            }
        })
        .collect()
}

/// Stage state `agents + h·k`. With speed projection on, a turned agent's
/// stage velocity is rescaled to the matching stage value of `|v|²`.
fn shifted(agents: &[AgentState], k: &[Derivative], h: f64, project: bool) -> Vec<AgentState> {
    agents
        .iter()
        .zip(k)
        .map(|(a, d)| {
            let mut v = a.v + d.dv * h;
            if project && d.turning {
                v = with_speed2(v, a.v.norm_squared() + d.dspeed2 * h);
            }
            AgentState {
                x: a.x + d.dx * h,
                v,
                ..*a
            }
        })
        .collect()
}

fn with_speed2(v: Vec3, speed2: f64) -> Vec3 {
    let now = v.norm();
    if speed2 > 0.0 && now > 0.0 {
        v * (speed2.sqrt() / now)
    } else {
        v
    }
}

fn shifted_obstacles(obstacles: &[ObstacleSpec], h: f64) -> Vec<ObstacleSpec> {
    obstacles.iter().map(|o| o.advanced(h)).collect()
}

/// Draws the run-level fallback amplitude `ε·u`, `u ~ U[−1, 1]`.
pub fn draw_epsilon(rng: &mut ChaCha8Rng, params: &AvoidanceParams) -> f64 {
    params.epsilon * rng.random_range(-1.0..=1.0)
}

/// One classical Runge-Kutta step with interaction sets rebuilt at every
/// stage, followed by an additive Gaussian velocity kick when `nu > 0`.
pub fn step(
    world: &mut World,
    params: &SimParams,
    rng: &mut ChaCha8Rng,
    eps_draw: f64,
) -> Result<(), DynamicsError> {
    let dt = params.dt;
    let half = shifted_obstacles(&world.obstacles, dt / 2.0);
    let full = shifted_obstacles(&world.obstacles, dt);

    let project = params.integrator == Integrator::Rk4SpeedProjected;
    let k1 = rhs(&world.agents, &world.obstacles, params, eps_draw);
    let k2 = rhs(
        &shifted(&world.agents, &k1, dt / 2.0, project),
        &half,
        params,
        eps_draw,
    );
    let k3 = rhs(
        &shifted(&world.agents, &k2, dt / 2.0, project),
        &half,
        params,
        eps_draw,
    );
    let k4 = rhs(
        &shifted(&world.agents, &k3, dt, project),
        &full,
        params,
        eps_draw,
    );

    for (i, a) in world.agents.iter_mut().enumerate() {
        let speed2 = a.v.norm_squared();
        a.x += (k1[i].dx + k2[i].dx * 2.0 + k3[i].dx * 2.0 + k4[i].dx) * dt / 6.0;
        a.v += (k1[i].dv + k2[i].dv * 2.0 + k3[i].dv * 2.0 + k4[i].dv) * dt / 6.0;
        let turned = k1[i].turning || k2[i].turning || k3[i].turning || k4[i].turning;
        if project && turned {
            let ds = (k1[i].dspeed2 + 2.0 * k2[i].dspeed2 + 2.0 * k3[i].dspeed2 + k4[i].dspeed2)
                * dt
                / 6.0;
            a.v = with_speed2(a.v, speed2 + ds);
        }
    }
    if params.damping.nu > 0.0 {
        let kick = (2.0 * params.damping.nu * dt).sqrt();
        for a in world.agents.iter_mut() {
            let xi = Vec3::new(
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            );
            a.v += xi * kick;
        }
    }
    world.obstacles = full;
    world.t += dt;
    if let Some(a) = world.agents.iter().find(|a| !a.is_finite()) {
        return Err(DynamicsError::NonFinite {
            t: world.t,
            agent: a.id,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy: f64,
    pub kinetic: f64,
    pub potential: f64,
    /// Smallest distance between two agents; infinite with fewer than two.
    pub min_pair_dist: f64,
    /// Largest `A²` over gated, non-degenerate pairs; zero if none.
    pub max_a_squared: f64,
}

/// Kinetic, potential and total energy `Σ |v|²/2 + V(x)`.
pub fn energy(agents: &[AgentState], params: &SimParams) -> (f64, f64, f64) {
    let kinetic: f64 = agents.iter().map(|a| 0.5 * a.v.norm_squared()).sum();
    let pot: f64 = agents
        .iter()
        .map(|a| potential(params.potential, a.x, a.target))
        .sum();
    (kinetic + pot, kinetic, pot)
}

pub fn min_pair_distance(agents: &[AgentState]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in agents.iter().enumerate() {
        for b in &agents[i + 1..] {
            best = best.min((a.x - b.x).norm());
        }
    }
    best
}

fn max_a_squared(agents: &[AgentState], sets: &[InteractionSet], params: &SimParams) -> f64 {
    let mut best = 0.0f64;
    for set in sets {
        let a = &agents[set.owner];
        for &j in &set.members {
            let b = &agents[j];
            if let Ok(pose) = RelativePose::new(a.x, a.v, b.x, &params.avoidance.frame) {
                if let Ok(r) = angle_rates(&pose, a.v, b.v, 0.0) {
                    best = best.max(r.a_squared);
                }
            }
        }
    }
    best
}

pub fn diagnostics(world: &World, params: &SimParams) -> DiagnosticsRecord {
    let (e, kinetic, pot) = energy(&world.agents, params);
    let sets = interaction_sets(&world.agents, &params.perception);
    DiagnosticsRecord {
        t: world.t,
        energy: e,
        kinetic,
        potential: pot,
        min_pair_dist: min_pair_distance(&world.agents),
        max_a_squared: max_a_squared(&world.agents, &sets, params),
    }
}

/// An agent entering an obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PenetrationEvent {
    pub t: f64,
    pub agent: u32,
    pub obstacle: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub times: Vec<f64>,
    /// `states[s][i]` is agent `i` at `times[s]`.
    pub states: Vec<Vec<AgentState>>,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub penetrations: Vec<PenetrationEvent>,
    /// Run-level fallback amplitude actually used.
    pub eps_draw: f64,
}

impl TrajectoryLog {
    pub fn agent_count(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn final_states(&self) -> &[AgentState] {
        self.states.last().map_or(&[], Vec::as_slice)
    }

    /// Smallest pairwise distance over all samples.
    pub fn min_pair_dist(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| d.min_pair_dist)
            .fold(f64::INFINITY, f64::min)
    }

    /// Trajectory of one agent across samples.
    pub fn track(&self, agent: usize) -> impl Iterator<Item = &AgentState> + '_ {
        self.states.iter().map(move |s| &s[agent])
    }
}

/// Stateful driver: a world, its parameters and the seeded generator.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub world: World,
    pub params: SimParams,
    rng: ChaCha8Rng,
    eps_draw: f64,
    steps: u64,
    inside: Vec<bool>,
}

impl Simulation {
    pub fn new(world: World, params: SimParams) -> Result<Self, DynamicsError> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let eps_draw = draw_epsilon(&mut rng, &params.avoidance);
        let inside = vec![false; world.agents.len() * world.obstacles.len()];
        let mut sim = Simulation {
            world,
            params,
            rng,
            eps_draw,
            steps: 0,
            inside,
        };
        sim.scan_penetrations();
        Ok(sim)
    }

    pub fn eps_draw(&self) -> f64 {
        self.eps_draw
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    fn scan_penetrations(&mut self) -> Vec<PenetrationEvent> {
        let mut events = Vec::new();
        let n_obs = self.world.obstacles.len();
        for (i, a) in self.world.agents.iter().enumerate() {
            for (k, o) in self.world.obstacles.iter().enumerate() {
                let now = o.contains(a.x);
                let slot = &mut self.inside[i * n_obs + k];
                if now && !*slot {
                    events.push(PenetrationEvent {
                        t: self.world.t,
                        agent: a.id,
                        obstacle: k,
                    });
                }
                *slot = now;
            }
        }
        events
    }

    /// Advances one step and returns any obstacle entries that occurred.
    pub fn step(&mut self) -> Result<Vec<PenetrationEvent>, DynamicsError> {
        step(&mut self.world, &self.params, &mut self.rng, self.eps_draw)?;
        self.steps += 1;
        // Recompute from the step count so sample times do not drift.
        self.world.t = self.steps as f64 * self.params.dt;
        Ok(self.scan_penetrations())
    }

    pub fn diagnostics(&self) -> DiagnosticsRecord {
        diagnostics(&self.world, &self.params)
    }

    /// Integrates to `t_end`, sampling every `sample_interval`.
    pub fn run(mut self) -> Result<TrajectoryLog, DynamicsError> {
        let total = self.params.total_steps();
        let stride = self.params.sample_stride();
        let mut log = TrajectoryLog {
            times: vec![self.world.t],
            states: vec![self.world.agents.clone()],
            diagnostics: vec![self.diagnostics()],
            penetrations: Vec::new(),
            eps_draw: self.eps_draw,
        };
        for (i, a) in self.world.agents.iter().enumerate() {
            for k in 0..self.world.obstacles.len() {
                if self.inside[i * self.world.obstacles.len() + k] {
                    log.penetrations.push(PenetrationEvent {
                        t: 0.0,
                        agent: a.id,
                        obstacle: k,
                    });
                }
            }
        }
        for n in 1..=total {
            let events = self.step()?;
            log.penetrations.extend(events);
            if n % stride == 0 || n == total {
                log.times.push(self.world.t);
                log.states.push(self.world.agents.clone());
                log.diagnostics.push(self.diagnostics());
            }
        }
        Ok(log)
    }
}

pub fn run(world: World, params: &SimParams) -> Result<TrajectoryLog, DynamicsError> {
    Simulation::new(world, *params)?.run()
}
