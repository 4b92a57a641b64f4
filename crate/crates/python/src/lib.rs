//! Python bindings: build or load scenarios, run them, and evaluate the
//! perception and avoidance primitives on raw coordinates.

use std::path::PathBuf;

use gyroswarm::avoidance::{self_force, AvoidanceParams};
use gyroswarm::dynamics::{AgentState, Integrator, TrajectoryLog};
use gyroswarm::external::PotentialKind;
use gyroswarm::geometry::{relative_pose as pose_of, Vec3};
use gyroswarm::meanfield::force_equivalence_report;
use gyroswarm::output::{diagnostics_csv, trajectory_csv, write_run};
use gyroswarm::perception::{encounter_with, interaction_sets, PerceptionParams};
use gyroswarm::scenarios::{
    build_scenario, load_scenario, parse_scenario, ScenarioError, ScenarioOptions, ScenarioSpec,
    SCENARIOS,
};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

type Triple = [f64; 3];

fn scenario_err(e: ScenarioError) -> PyErr {
    match e {
        ScenarioError::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Defaults to the built-in safety radius and cone when not given.
fn perception(radius: Option<f64>, kappa: Option<f64>) -> PyResult<PerceptionParams> {
    let d = PerceptionParams::default();
    PerceptionParams::new(radius.unwrap_or(d.safety_radius), kappa.unwrap_or(d.kappa))
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn agents_from(positions: &[Triple], velocities: &[Triple]) -> PyResult<Vec<AgentState>> {
    if positions.len() != velocities.len() {
        return Err(PyValueError::new_err(
            "positions and velocities differ in length",
        ));
    }
    Ok(positions
        .iter()
        .zip(velocities)
        .enumerate()
        .map(|(i, (x, v))| AgentState::new(i as u32, Vec3::from(*x), Vec3::from(*v), Vec3::ZERO))
        .collect())
}

/// A fully resolved scenario: agents, obstacles and parameters.
#[pyclass(name = "Scenario", module = "gyroswarm_py", skip_from_py_object)]
#[derive(Clone)]
struct PyScenario {
    spec: ScenarioSpec,
}

#[pymethods]
impl PyScenario {
    /// Built-in scenario by name, or a scenario file when `name` is a path.
    #[staticmethod]
    #[pyo3(signature = (name, n=None, alpha=None, seed=None))]
    fn build(
        name: &str,
        n: Option<usize>,
        alpha: Option<f64>,
        seed: Option<u64>,
    ) -> PyResult<Self> {
        let spec =
            build_scenario(name, &ScenarioOptions { n, alpha, seed }).map_err(scenario_err)?;
        Ok(PyScenario { spec })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyScenario {
            spec: load_scenario(&path).map_err(scenario_err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (text, name="custom"))]
    fn from_json(text: &str, name: &str) -> PyResult<Self> {
        Ok(PyScenario {
            spec: parse_scenario(name, text).map_err(scenario_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.spec.to_json()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.spec.save(&path).map_err(scenario_err)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.spec.name
    }

    #[getter]
    fn positions(&self) -> Vec<Triple> {
        self.spec.agents.iter().map(|a| a.x.to_array()).collect()
    }

    #[getter]
    fn velocities(&self) -> Vec<Triple> {
        self.spec.agents.iter().map(|a| a.v.to_array()).collect()
    }

    #[getter]
    fn targets(&self) -> Vec<Triple> {
        self.spec
            .agents
            .iter()
            .map(|a| a.target.to_array())
            .collect()
    }

    /// `(center, radius)` of each obstacle.
    #[getter]
    fn obstacles(&self) -> Vec<(Triple, f64)> {
        self.spec
            .obstacles
            .iter()
            .map(|o| (o.center.to_array(), o.radius))
            .collect()
    }

    /// Overrides parameters; unknown keys raise `ValueError`.
    #[pyo3(signature = (**overrides))]
    fn configure(&mut self, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<()> {
        let Some(overrides) = overrides else {
            return Ok(());
        };
        let mut p = self.spec.params;
        for (key, value) in overrides.iter() {
            let key: String = key.extract()?;
            match key.as_str() {
                "t_end" => p.t_end = value.extract()?,
                "dt" => p.dt = value.extract()?,
                "sample_interval" => p.sample_interval = value.extract()?,
                "seed" => p.seed = value.extract()?,
                "radius" => p.perception.safety_radius = value.extract()?,
                "kappa" => p.perception.kappa = value.extract()?,
                "sigma" => p.damping.sigma = value.extract()?,
                "nu" => p.damping.nu = value.extract()?,
                "avoidance" => p.avoidance_enabled = value.extract()?,
                "mean_field_scaling" => p.avoidance.mean_field_scaling = value.extract()?,
                "potential" => {
                    p.potential = value
                        .extract::<String>()?
                        .parse::<PotentialKind>()
                        .map_err(PyValueError::new_err)?
                }
                "integrator" => {
                    p.integrator = value
                        .extract::<String>()?
                        .parse::<Integrator>()
                        .map_err(PyValueError::new_err)?
                }
                other => {
                    return Err(PyValueError::new_err(format!(
                        "unknown parameter {other:?}"
                    )))
                }
            }
        }
        let mut spec = self.spec.clone();
        spec.params = p;
        spec.validate().map_err(scenario_err)?;
        self.spec = spec;
        Ok(())
    }

    fn run(&self, py: Python<'_>) -> PyResult<PyTrajectory> {
        let spec = self.spec.clone();
        let log = py.detach(move || spec.run()).map_err(runtime_err)?;
        Ok(PyTrajectory {
            spec: self.spec.clone(),
            log,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario({:?}, agents={}, obstacles={}, seed={})",
            self.spec.name,
            self.spec.agents.len(),
            self.spec.obstacles.len(),
            self.spec.params.seed
        )
    }
}

/// Sampled result of a run.
#[pyclass(name = "Trajectory", module = "gyroswarm_py", frozen)]
struct PyTrajectory {
    spec: ScenarioSpec,
    log: TrajectoryLog,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.log.times.clone()
    }

    /// Positions indexed `[sample][agent]`.
    #[getter]
    fn positions(&self) -> Vec<Vec<Triple>> {
        self.log
            .states
            .iter()
            .map(|s| s.iter().map(|a| a.x.to_array()).collect())
            .collect()
    }

    #[getter]
    fn velocities(&self) -> Vec<Vec<Triple>> {
        self.log
            .states
            .iter()
            .map(|s| s.iter().map(|a| a.v.to_array()).collect())
            .collect()
    }

    #[getter]
    fn energy(&self) -> Vec<f64> {
        self.log.diagnostics.iter().map(|d| d.energy).collect()
    }

    #[getter]
    fn min_pair_dist(&self) -> f64 {
        self.log.min_pair_dist()
    }

    /// `(t, agent_id, obstacle_index)` for every obstacle entry.
    #[getter]
    fn penetrations(&self) -> Vec<(f64, u32, usize)> {
        self.log
            .penetrations
            .iter()
            .map(|p| (p.t, p.agent, p.obstacle))
            .collect()
    }

    #[getter]
    fn eps_draw(&self) -> f64 {
        self.log.eps_draw
    }

    fn trajectory_csv(&self) -> String {
        trajectory_csv(&self.log)
    }

    fn diagnostics_csv(&self) -> String {
        diagnostics_csv(&self.log)
    }

    /// Writes the CSV, metadata and optional SVG files; returns their paths.
    #[pyo3(signature = (prefix, plot=false))]
    fn write(&self, prefix: PathBuf, plot: bool) -> PyResult<Vec<PathBuf>> {
        let files = write_run(&prefix, &self.spec, &self.log, plot)
            .map_err(|e| PyIOError::new_err(e.to_string()))?;
        let mut paths = vec![files.trajectory, files.diagnostics, files.meta];
        paths.extend(files.plots);
        Ok(paths)
    }

    fn __len__(&self) -> usize {
        self.log.times.len()
    }
}

/// `(tau, D, D_bar)` of the ballistic encounter, or `None` without relative
/// motion.
#[pyfunction]
fn encounter(x_i: Triple, v_i: Triple, x_j: Triple, v_j: Triple) -> Option<(f64, f64, f64)> {
    encounter_with(
        x_i.into(),
        v_i.into(),
        x_j.into(),
        v_j.into(),
        &PerceptionParams::default(),
    )
    .map(|e| (e.tau, e.d_min, e.d_bar))
}

/// Distance and angles of `x_j` seen from an agent at `x_i` moving with `v_i`.
#[pyfunction]
fn relative_pose<'py>(
    py: Python<'py>,
    x_i: Triple,
    v_i: Triple,
    x_j: Triple,
) -> PyResult<Bound<'py, PyDict>> {
    let p = pose_of(x_i.into(), v_i.into(), x_j.into())
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let d = PyDict::new(py);
    d.set_item("d", p.d)?;
    d.set_item("k", p.k.to_array())?;
    d.set_item("cos_beta", p.cos_beta)?;
    d.set_item("sin_beta", p.sin_beta)?;
    d.set_item("cos_alpha", p.cos_alpha)?;
    d.set_item("sin_alpha", p.sin_alpha)?;
    d.set_item("degenerate", p.degenerate)?;
    Ok(d)
}

/// Avoidance force on every agent of a world.
#[pyfunction]
#[pyo3(signature = (positions, velocities, radius=None, kappa=None, eps_draw=0.0))]
fn self_forces(
    positions: Vec<Triple>,
    velocities: Vec<Triple>,
    radius: Option<f64>,
    kappa: Option<f64>,
    eps_draw: f64,
) -> PyResult<Vec<Triple>> {
    let per = perception(radius, kappa)?;
    let agents = agents_from(&positions, &velocities)?;
    let params = AvoidanceParams::default();
    let sets = interaction_sets(&agents, &per);
    Ok((0..agents.len())
        .map(|i| self_force(i, &agents, &sets, &per, &params, eps_draw).to_array())
        .collect())
}

/// Largest relative gap between the pairwise force and its mean-field form.
#[pyfunction]
#[pyo3(signature = (positions, velocities, radius=None, kappa=None))]
fn mean_field_gap(
    positions: Vec<Triple>,
    velocities: Vec<Triple>,
    radius: Option<f64>,
    kappa: Option<f64>,
) -> PyResult<f64> {
    let per = perception(radius, kappa)?;
    let agents = agents_from(&positions, &velocities)?;
    Ok(force_equivalence_report(
        &agents,
        &per,
        &AvoidanceParams::default(),
    ))
}

/// Names and one-line descriptions of the built-in scenarios.
#[pyfunction]
fn list_scenarios() -> Vec<(&'static str, &'static str)> {
    SCENARIOS.to_vec()
}

#[pymodule]
fn gyroswarm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(encounter, m)?)?;
    m.add_function(wrap_pyfunction!(relative_pose, m)?)?;
    m.add_function(wrap_pyfunction!(self_forces, m)?)?;
    m.add_function(wrap_pyfunction!(mean_field_gap, m)?)?;
    m.add_function(wrap_pyfunction!(list_scenarios, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
