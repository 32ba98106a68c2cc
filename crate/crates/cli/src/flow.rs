use clap::{Args, ValueEnum};
use serde::Serialize;

use singular_cotangent::dynamics::{
    conservation_report, integrate_flow_with, ChartSwitch, ConservationReport, FlowOptions, Integrator,
};
use singular_cotangent::geometry::PointRef;

use crate::report::{coords_header, num};
use crate::systems::{build, start_point, SystemKind, DEFAULT_EPSILON};
use crate::{positive, verdict, CliError, CliResult, GlobalArgs, Output, MODEL_HELP};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum IntegratorArg {
    Midpoint,
    Composition4,
}

#[derive(Args, Debug, Clone)]
pub struct FlowArgs {
    #[arg(long, help = MODEL_HELP)]
    pub model: String,

    /// Parameter of the sphere system
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,

    /// Which function generates the flow (1-based)
    #[arg(long, default_value_t = 1)]
    pub function: usize,

    /// Flow time (may be negative)
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub time: f64,

    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,

    /// Start coordinates, comma separated
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<String>,

    /// Chart of the start point
    #[arg(long)]
    pub chart: Option<String>,

    /// Largest accepted drift of any function along the trajectory
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,

    #[arg(long, value_enum, default_value_t = IntegratorArg::Composition4)]
    pub integrator: IntegratorArg,

    /// Keep every k-th state in the exported trajectory
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
}

#[derive(Debug, Serialize)]
struct FlowReport {
    system: String,
    function: usize,
    time: f64,
    step: f64,
    integrator: Integrator,
    start: PointRef,
    end: PointRef,
    recorded_samples: usize,
    switches: Vec<ChartSwitch>,
    conservation: ConservationReport,
    drift_tolerance: f64,
    passed: bool,
}

pub fn run(args: &FlowArgs, _global: &GlobalArgs, out: &Output) -> CliResult<bool> {
    let kind = SystemKind::parse(&args.model, args.epsilon)?;
    let step = positive("--step", args.step)?;
    let tol = positive("--tol", args.tol)?;
    if !args.time.is_finite() {
        return Err(CliError::Usage("--time must be finite".into()));
    }
    let sys = build(&kind, true, false)?;
    if args.function == 0 || args.function > sys.n {
        return Err(CliError::Usage(format!("--function must be in 1..={}", sys.n)));
    }
    let start = start_point(&kind, &sys, true, args.chart.as_deref(), args.start.as_deref())?;
    let opts = FlowOptions {
        integrator: match args.integrator {
            IntegratorArg::Midpoint => Integrator::Midpoint,
            IntegratorArg::Composition4 => Integrator::Composition4,
        },
        record_every: args.record_every.max(1),
    };
    let traj = integrate_flow_with(&sys, args.function - 1, &start, args.time, step, opts)?;
    let conservation = conservation_report(&sys, &traj)?;
    let worst = conservation.drifts.iter().copied().fold(0.0, f64::max);
    let passed = worst <= tol;

    let end = traj.end().clone();
    out.line(format!("system {} flow of g{} for t = {} (step {step:e})", kind.name(), args.function, args.time));
    out.line(format!("  start {} {:?}", start.chart, start.coords));
    out.line(format!("  end   {} {:?}", end.chart, end.coords));
    out.line(format!("  chart switches {}", traj.switches.len()));
    out.line(format!("  max drift {worst:.3e} (tol {tol:e})   {}", verdict(passed)));

    let dim = start.coords.len();
    out.csv(
        "trajectory.csv",
        coords_header(&["t", "chart"], dim),
        traj.rows().into_iter().map(|(t, chart, z)| {
            let mut r = vec![num(t), chart];
            r.extend(z.into_iter().map(num));
            r
        }),
    )?;
    let report = FlowReport {
        system: kind.name(),
        function: args.function,
        time: args.time,
        step,
        integrator: traj.integrator,
        start,
        end,
        recorded_samples: traj.samples.len(),
        switches: traj.switches,
        conservation,
        drift_tolerance: tol,
        passed,
    };
    out.report("flow.json", &report)?;
    Ok(passed)
}
