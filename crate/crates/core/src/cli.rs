//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dynamics::{Integrator, TrajectoryLog};
use crate::external::PotentialKind;
use crate::output;
use crate::scenarios::{build_scenario, ScenarioError, ScenarioOptions, ScenarioSpec, SCENARIOS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "gyroswarm",
    version,
    about = "Vision-cone collision avoidance for 3D swarms"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write trajectory, diagnostics and metadata files.
    Run(RunConfig),
    /// Run a scenario with avoidance on and off and compare the outcomes.
    Compare(RunConfig),
    /// List the built-in scenarios.
    ListScenarios,
    /// Write a scenario as a JSON file that `--scenario <path>` accepts.
    ExportScenario {
        #[command(flatten)]
        config: RunConfig,
        /// Destination file.
        #[arg(long)]
        to: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Built-in scenario name or path to a scenario file.
    #[arg(long, default_value = "circle")]
    pub scenario: String,
    /// Number of agents.
    #[arg(long)]
    pub n: Option<usize>,
    /// Initial speed factor of the circle scenario.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Time between stored samples.
    #[arg(long)]
    pub sample_interval: Option<f64>,
    /// Safety radius R.
    #[arg(long = "radius")]
    pub safety_radius: Option<f64>,
    /// Vision-cone cosine.
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    /// Friction coefficient.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Velocity noise intensity.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Target potential: smooth, distance or none.
    #[arg(long)]
    pub potential: Option<PotentialKind>,
    /// Time integrator: rk4-speed-projected (default) or rk4.
    #[arg(long)]
    pub integrator: Option<Integrator>,
    /// Drop the 1/N normalisation of the avoidance sum.
    #[arg(long)]
    pub no_mean_field_scaling: bool,
    /// Disable avoidance (agents only feel the target and friction).
    #[arg(long)]
    pub no_avoidance: bool,
    /// Write xy and xz trajectory plots.
    #[arg(long)]
    pub plot: bool,
    /// Output file prefix.
    #[arg(long, default_value = "gyroswarm")]
    pub out: PathBuf,
}

impl RunConfig {
    pub fn for_scenario(name: &str) -> Self {
        Cli::parse_from(["gyroswarm", "run", "--scenario", name])
            .command
            .into_run_config()
            .expect("run command")
    }

    /// Builds the scenario and applies the parameter overrides.
    pub fn resolve(&self) -> Result<ScenarioSpec, ScenarioError> {
        let options = ScenarioOptions {
            n: self.n,
            alpha: self.alpha,
            seed: self.seed,
        };
        let mut spec = build_scenario(&self.scenario, &options)?;
        let p = &mut spec.params;
        if let Some(t) = self.t_end {
            p.t_end = t;
        }
        if let Some(dt) = self.dt {
            p.dt = dt;
        }
        if let Some(s) = self.sample_interval {
            p.sample_interval = s;
        }
        if let Some(r) = self.safety_radius {
            p.perception.safety_radius = r;
        }
        if let Some(k) = self.kappa {
            p.perception.kappa = k;
        }
        if let Some(s) = self.sigma {
            p.damping.sigma = s;
        }
        if let Some(nu) = self.nu {
            p.damping.nu = nu;
        }
        if let Some(pot) = self.potential {
            p.potential = pot;
        }
        if let Some(i) = self.integrator {
            p.integrator = i;
        }
        if self.no_mean_field_scaling {
            p.avoidance.mean_field_scaling = false;
        }
        if self.no_avoidance {
            p.avoidance_enabled = false;
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl Command {
    fn into_run_config(self) -> Option<RunConfig> {
        match self {
            Command::Run(c) | Command::Compare(c) => Some(c),
            Command::ExportScenario { config, .. } => Some(config),
            Command::ListScenarios => None,
        }
    }
}

fn scenario_exit(err: &ScenarioError) -> i32 {
    match err {
        ScenarioError::Io(_) => EXIT_RUNTIME,
        _ => EXIT_USAGE,
    }
}

/// Outcome of one side of a paired comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub min_pair_dist: f64,
    pub final_target_dist: Vec<f64>,
    pub penetrations: usize,
}

impl RunSummary {
    pub fn of(log: &TrajectoryLog) -> Self {
        RunSummary {
            min_pair_dist: log.min_pair_dist(),
            final_target_dist: log
                .final_states()
                .iter()
                .map(|a| (a.x - a.target).norm())
                .collect(),
            penetrations: log.penetrations.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub on: RunSummary,
    pub off: RunSummary,
}

/// Runs `spec` with avoidance on and then off, under the same seed.
pub fn compare(spec: &ScenarioSpec) -> Result<Comparison, crate::dynamics::DynamicsError> {
    let mut on = spec.clone();
    on.params.avoidance_enabled = true;
    let mut off = spec.clone();
    off.params.avoidance_enabled = false;
    Ok(Comparison {
        on: RunSummary::of(&on.run()?),
        off: RunSummary::of(&off.run()?),
    })
}

fn cmd_run(config: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let spec = match config.resolve() {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return scenario_exit(&e);
        }
    };
    let log = match spec.run() {
        Ok(l) => l,
        Err(e) => {
            let _ = writeln!(err, "error: run aborted: {e}");
            return EXIT_RUNTIME;
        }
    };
    let files = match output::write_run(&config.out, &spec, &log, config.plot) {
        Ok(f) => f,
        Err(e) => {
            let _ = writeln!(
                err,
                "error: cannot write output under {}: {e}",
                config.out.display()
            );
            return EXIT_RUNTIME;
        }
    };
    let _ = writeln!(
        out,
        "{}: {} agents, {} samples, min pair distance {:.6}",
        spec.name,
        log.agent_count(),
        log.times.len(),
        log.min_pair_dist()
    );
    for path in [&files.trajectory, &files.diagnostics, &files.meta]
        .into_iter()
        .chain(&files.plots)
    {
        let _ = writeln!(out, "wrote {}", path.display());
    }
    if !log.penetrations.is_empty() {
        let _ = writeln!(
            err,
            "warning: {} obstacle penetration events",
            log.penetrations.len()
        );
        for p in &log.penetrations {
            let _ = writeln!(
                err,
                "  t = {:.2}: agent {} entered obstacle {}",
                p.t, p.agent, p.obstacle
            );
        }
    }
    EXIT_OK
}

fn cmd_compare(config: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let spec = match config.resolve() {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return scenario_exit(&e);
        }
    };
    let cmp = match compare(&spec) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: run aborted: {e}");
            return EXIT_RUNTIME;
        }
    };
    let _ = writeln!(
        out,
        "{} ({} agents, seed {})",
        spec.name,
        spec.agents.len(),
        spec.params.seed
    );
    let _ = writeln!(
        out,
        "{:<28}{:>16}{:>16}",
        "", "avoidance on", "avoidance off"
    );
    let _ = writeln!(
        out,
        "{:<28}{:>16.6}{:>16.6}",
        "min pairwise distance", cmp.on.min_pair_dist, cmp.off.min_pair_dist
    );
    let _ = writeln!(
        out,
        "{:<28}{:>16}{:>16}",
        "penetrations", cmp.on.penetrations, cmp.off.penetrations
    );
    for (i, (a, b)) in cmp
        .on
        .final_target_dist
        .iter()
        .zip(&cmp.off.final_target_dist)
        .enumerate()
    {
        let label = format!("agent {} distance to target", spec.agents[i].id);
        let _ = writeln!(out, "{label:<28}{a:>16.6}{b:>16.6}");
    }
    EXIT_OK
}

fn cmd_export(config: &RunConfig, to: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let spec = match config.resolve() {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return scenario_exit(&e);
        }
    };
    match spec.save(to) {
        Ok(()) => {
            let _ = writeln!(out, "wrote {}", to.display());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    match &cli.command {
        Command::Run(c) => cmd_run(c, out, err),
        Command::Compare(c) => cmd_compare(c, out, err),
        Command::ListScenarios => {
            for (name, about) in SCENARIOS {
                let _ = writeln!(out, "{name:<10} {about}");
            }
            EXIT_OK
        }
        Command::ExportScenario { config, to } => cmd_export(config, to, out, err),
    }
}
