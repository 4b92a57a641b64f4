//! Trajectory and diagnostics files: CSV tables, run metadata and SVG plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dynamics::{PenetrationEvent, SimParams, TrajectoryLog};
use crate::json::{self, fmt_f64};
use crate::scenarios::{ScenarioFile, ScenarioSpec};

pub const TRAJ_HEADER: &str = "t,agent_id,x,y,z,vx,vy,vz,speed";
pub const DIAG_HEADER: &str = "t,energy,kinetic,potential,min_pair_dist,max_a_squared";

/// Trajectory table, one row per sample and agent.
pub fn trajectory_csv(log: &TrajectoryLog) -> String {
    let mut out = String::with_capacity(64 + log.times.len() * log.agent_count() * 200);
    out.push_str(TRAJ_HEADER);
    out.push('\n');
    for (t, states) in log.times.iter().zip(&log.states) {
        for a in states {
            let cols = [*t, a.x.x, a.x.y, a.x.z, a.v.x, a.v.y, a.v.z, a.v.norm()];
            let _ = write!(out, "{},{}", fmt_f64(cols[0]), a.id);
            for c in &cols[1..] {
                out.push(',');
                out.push_str(&fmt_f64(*c));
            }
            out.push('\n');
        }
    }
    out
}

pub fn diagnostics_csv(log: &TrajectoryLog) -> String {
    let mut out = String::new();
    out.push_str(DIAG_HEADER);
    out.push('\n');
    for d in &log.diagnostics {
        let cols = [
            d.t,
            d.energy,
            d.kinetic,
            d.potential,
            d.min_pair_dist,
            d.max_a_squared,
        ];
        let row: Vec<String> = cols.iter().map(|c| fmt_f64(*c)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct Meta<'a> {
    scenario: &'a str,
    params: &'a SimParams,
    eps_draw: f64,
    samples: usize,
    agents: usize,
    min_pair_dist: f64,
    penetrations: &'a [PenetrationEvent],
    initial: ScenarioFile,
}

/// Fully resolved parameters, seed, initial state and run summary.
pub fn meta_json(spec: &ScenarioSpec, log: &TrajectoryLog) -> String {
    json::to_string_pretty(&Meta {
        scenario: &spec.name,
        params: &spec.params,
        eps_draw: log.eps_draw,
        samples: log.times.len(),
        agents: log.agent_count(),
        min_pair_dist: log.min_pair_dist(),
        penetrations: &log.penetrations,
        initial: spec.to_file(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    Xy,
    Xz,
}

impl Projection {
    fn coords(self, p: crate::geometry::Vec3) -> (f64, f64) {
        match self {
            Projection::Xy => (p.x, p.y),
            Projection::Xz => (p.x, p.z),
        }
    }

    fn labels(self) -> (&'static str, &'static str) {
        match self {
            Projection::Xy => ("x", "y"),
            Projection::Xz => ("x", "z"),
        }
    }
}

const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
    "#bcbd22", "#7f7f7f",
];

#[derive(Debug, Clone, Copy)]
struct Bounds {
    min: (f64, f64),
    max: (f64, f64),
}

impl Bounds {
    fn empty() -> Self {
        Bounds {
            min: (f64::INFINITY, f64::INFINITY),
            max: (f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    fn include(&mut self, (a, b): (f64, f64)) {
        if a.is_finite() && b.is_finite() {
            self.min = (self.min.0.min(a), self.min.1.min(b));
            self.max = (self.max.0.max(a), self.max.1.max(b));
        }
    }

    /// Adds a 10% margin; a flat or empty extent is widened to one unit.
    fn padded(self) -> Bounds {
        let pad = |lo: f64, hi: f64| {
            if !lo.is_finite() {
                return (-0.5, 0.5);
            }
            let span = hi - lo;
            if span < 1e-9 {
                let mid = 0.5 * (lo + hi);
                (mid - 0.5, mid + 0.5)
            } else {
                (lo - 0.1 * span, hi + 0.1 * span)
            }
        };
        let (x0, x1) = pad(self.min.0, self.max.0);
        let (y0, y1) = pad(self.min.1, self.max.1);
        Bounds {
            min: (x0, y0),
            max: (x1, y1),
        }
    }
}

/// Static line drawing of the trajectories projected on a coordinate plane,
/// with start dots, target crosses and obstacle outlines.
pub fn trajectory_svg(spec: &ScenarioSpec, log: &TrajectoryLog, proj: Projection) -> String {
    let mut bounds = Bounds::empty();
    for states in &log.states {
        for a in states {
            bounds.include(proj.coords(a.x));
        }
    }
    for a in &spec.agents {
        bounds.include(proj.coords(a.target));
    }
    let end_time = log.times.last().copied().unwrap_or(0.0);
    for o in &spec.obstacles {
        for c in [o.center, o.center + o.velocity * end_time] {
            let (cx, cy) = proj.coords(c);
            bounds.include((cx - o.radius, cy - o.radius));
            bounds.include((cx + o.radius, cy + o.radius));
        }
    }
    let b = bounds.padded();
    let (w, h) = (b.max.0 - b.min.0, b.max.1 - b.min.1);
    let px_width = 640.0;
    let px_height = (px_width * h / w).clamp(160.0, 1280.0);
    let glyph = 0.015 * w.max(h);
    // Screen y grows downwards, so the vertical coordinate is negated.
    let pt = |p: (f64, f64)| (p.0, -p.1);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{px_width:.0}" height="{px_height:.0}" viewBox="{} {} {} {}" preserveAspectRatio="xMidYMid meet">"#,
        b.min.0, -b.max.1, w, h
    );
    let (lx, ly) = proj.labels();
    let _ = writeln!(
        s,
        "<title>{} trajectories, {lx}{ly} projection</title>",
        spec.name
    );
    let _ = writeln!(
        s,
        r#"<rect x="{}" y="{}" width="{w}" height="{h}" fill="white"/>"#,
        b.min.0, -b.max.1
    );
    for o in &spec.obstacles {
        let (cx, cy) = pt(proj.coords(o.center));
        let _ = writeln!(
            s,
            r##"<circle cx="{cx}" cy="{cy}" r="{}" fill="#cccccc" stroke="#555555" stroke-width="1" vector-effect="non-scaling-stroke"/>"##,
            o.radius
        );
    }
    for i in 0..log.agent_count() {
        let colour = PALETTE[i % PALETTE.len()];
        let mut points = String::new();
        for a in log.track(i) {
            let (x, y) = pt(proj.coords(a.x));
            let _ = write!(points, "{x},{y} ");
        }
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5" vector-effect="non-scaling-stroke"/>"#,
            points.trim_end()
        );
        if let Some(first) = log.states.first() {
            let (x, y) = pt(proj.coords(first[i].x));
            let _ = writeln!(
                s,
                r#"<circle cx="{x}" cy="{y}" r="{glyph}" fill="{colour}"/>"#
            );
            let (tx, ty) = pt(proj.coords(first[i].target));
            let _ = writeln!(
                s,
                r#"<path d="M {} {} L {} {} M {} {} L {} {}" stroke="{colour}" stroke-width="1.5" vector-effect="non-scaling-stroke"/>"#,
                tx - glyph,
                ty - glyph,
                tx + glyph,
                ty + glyph,
                tx - glyph,
                ty + glyph,
                tx + glyph,
                ty - glyph
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Paths written by [`write_run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunFiles {
    pub trajectory: PathBuf,
    pub diagnostics: PathBuf,
    pub meta: PathBuf,
    pub plots: Vec<PathBuf>,
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `<prefix>_traj.csv`, `<prefix>_diag.csv`, `<prefix>_meta.json` and,
/// with `plot`, `<prefix>_xy.svg` and `<prefix>_xz.svg`.
pub fn write_run(
    prefix: &Path,
    spec: &ScenarioSpec,
    log: &TrajectoryLog,
    plot: bool,
) -> std::io::Result<RunFiles> {
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let files = RunFiles {
        trajectory: with_suffix(prefix, "_traj.csv"),
        diagnostics: with_suffix(prefix, "_diag.csv"),
        meta: with_suffix(prefix, "_meta.json"),
        plots: if plot {
            vec![
                with_suffix(prefix, "_xy.svg"),
                with_suffix(prefix, "_xz.svg"),
            ]
        } else {
            Vec::new()
        },
    };
    std::fs::write(&files.trajectory, trajectory_csv(log))?;
    std::fs::write(&files.diagnostics, diagnostics_csv(log))?;
    std::fs::write(&files.meta, meta_json(spec, log) + "\n")?;
    if plot {
        std::fs::write(&files.plots[0], trajectory_svg(spec, log, Projection::Xy))?;
        std::fs::write(&files.plots[1], trajectory_svg(spec, log, Projection::Xz))?;
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::circle;

    fn short_circle() -> (ScenarioSpec, TrajectoryLog) {
        let mut spec = circle(3, 0.5, 0);
        spec.params.t_end = 0.5;
        let log = spec.run().unwrap();
        (spec, log)
    }

    #[test]
    fn csv_row_count() {
        let (_, log) = short_circle();
        let text = trajectory_csv(&log);
        assert_eq!(text.lines().count(), 1 + log.times.len() * 3);
        assert_eq!(text.lines().next().unwrap(), TRAJ_HEADER);
        assert_eq!(diagnostics_csv(&log).lines().count(), 1 + log.times.len());
    }

    #[test]
    fn csv_values_parse_back_exactly() {
        let (_, log) = short_circle();
        let text = trajectory_csv(&log);
        let row: Vec<&str> = text.lines().nth(4).unwrap().split(',').collect();
        let a = &log.states[1][0];
        assert_eq!(row[1], "0");
        assert_eq!(row[2].parse::<f64>().unwrap().to_bits(), a.x.x.to_bits());
        assert_eq!(row[7].parse::<f64>().unwrap().to_bits(), a.v.z.to_bits());
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let (spec, log) = short_circle();
        let svg = trajectory_svg(&spec, &log, Projection::Xz);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn meta_has_resolved_params() {
        let (spec, log) = short_circle();
        let v: serde_json::Value = serde_json::from_str(&meta_json(&spec, &log)).unwrap();
        assert_eq!(v["params"]["seed"], 0);
        assert_eq!(
            v["params"]["perception"]["safety_radius"].as_f64(),
            Some(1.0)
        );
        assert_eq!(v["samples"].as_u64(), Some(log.times.len() as u64));
    }
}
