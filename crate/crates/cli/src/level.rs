use std::collections::BTreeMap;

use clap::Args;
use serde::Serialize;

use singular_cotangent::dynamics::sample_level;
use singular_cotangent::geometry::PointRef;

use crate::report::{coords_header, num};
use crate::systems::{build, start_point, SystemKind, DEFAULT_EPSILON};
use crate::{positive, CliError, CliResult, GlobalArgs, Output, MODEL_HELP};

#[derive(Args, Debug, Clone)]
pub struct LevelArgs {
    #[arg(long, help = MODEL_HELP)]
    pub model: String,

    /// Parameter of the sphere system
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,

    /// Total number of integration steps
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,

    #[arg(long, default_value_t = 1e-2)]
    pub step: f64,

    /// Use the local cotangent model without its gluings
    #[arg(long)]
    pub unglued: bool,

    /// Seed coordinates, comma separated; the level is the one through the seed
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<String>,

    /// Chart of the seed
    #[arg(long)]
    pub chart: Option<String>,
}

#[derive(Debug, Serialize)]
struct LevelReport {
    system: String,
    seed_point: PointRef,
    values: Vec<f64>,
    budget: usize,
    steps_taken: usize,
    step: f64,
    points: usize,
    boundary_hit: bool,
    boundary_events: Vec<String>,
    diameter: f64,
    chart_extents: BTreeMap<String, f64>,
    max_level_residual: f64,
}

/// Exploration is diagnostic: a boundary hit is reported, not a failure.
pub fn run(args: &LevelArgs, _global: &GlobalArgs, out: &Output) -> CliResult<bool> {
    let kind = SystemKind::parse(&args.model, args.epsilon)?;
    let step = positive("--step", args.step)?;
    if args.samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    if args.unglued && !matches!(kind, SystemKind::Model(_)) {
        return Err(CliError::Usage("--unglued applies to model strings; use figure-eight-unglued".into()));
    }
    let sys = build(&kind, false, args.unglued)?;
    let seed = start_point(&kind, &sys, false, args.chart.as_deref(), args.start.as_deref())?;
    let values: Vec<f64> = sys.functions_on(&seed.chart)?.iter().map(|g| g.value(&seed.coords)).collect();
    let s = sample_level(&sys, &values, std::slice::from_ref(&seed), args.samples, step)?;
    let name = if args.unglued { format!("{} (unglued)", kind.name()) } else { kind.name() };

    out.line(format!("system {name} level {:?} through {} {:?}", values, seed.chart, seed.coords));
    out.line(format!("  steps {} of {}, {} points", s.steps_taken, s.budget, s.points.len()));
    out.line(format!("  boundary hit {}", s.boundary_hit));
    for e in &s.boundary_events {
        out.line(format!("    {e}"));
    }
    out.line(format!("  diameter {:.6} max level residual {:.3e}", s.diameter, s.max_level_residual));

    let dim = seed.coords.len();
    out.csv(
        "level.csv",
        coords_header(&["chart"], dim),
        s.points.iter().map(|p| {
            let mut r = vec![p.chart.to_string()];
            r.extend(p.coords.iter().copied().map(num));
            r
        }),
    )?;
    let report = LevelReport {
        system: name,
        seed_point: seed,
        values,
        budget: s.budget,
        steps_taken: s.steps_taken,
        step,
        points: s.points.len(),
        boundary_hit: s.boundary_hit,
        boundary_events: s.boundary_events,
        diameter: s.diameter,
        chart_extents: s.chart_extents,
        max_level_residual: s.max_level_residual,
    };
    out.report("level.json", &report)?;
    Ok(true)
}
