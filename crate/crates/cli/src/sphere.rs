use clap::Args;
use serde::Serialize;

use singular_cotangent::cotangent::{verify_commutation, CommutationReport, GlueOptions, GlueReport, DESCENT_SAMPLES};
use singular_cotangent::dynamics::{conservation_report, flow_partial, ConservationReport, FlowOptions, Trajectory};
use singular_cotangent::Error;
use singular_cotangent::geometry::PointRef;
use singular_cotangent::sphere::{
    build_glued_sphere_system_with, build_profile, check_profile_zeros, regular_point, singular_scan,
    ProfileZeroCheck, SingularScanReport,
};

use crate::report::{cols, coords_header, num};
use crate::systems::DEFAULT_EPSILON;
use crate::{positive, verdict, CliResult, GlobalArgs, Output};

#[derive(Args, Debug, Clone)]
pub struct SphereArgs {
    /// Blending width, 0 < epsilon < pi/8
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,

    /// Commutation samples per chart
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,

    /// Momentum descent tolerance through the gluings
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,

    /// Longitudes in the singular scan
    #[arg(long, default_value_t = 48)]
    pub theta_samples: usize,

    /// Latitude steps per quarter in the singular scan
    #[arg(long, default_value_t = 8)]
    pub resolution: usize,

    /// Rows of the exported profile table
    #[arg(long, default_value_t = 1001)]
    pub profile_samples: usize,

    /// Duration of the conservation flows
    #[arg(long, default_value_t = 10.0)]
    pub flow_time: f64,

    /// Step of the conservation flows
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,

    /// Largest accepted drift along the conservation flows
    #[arg(long, default_value_t = 1e-8)]
    pub drift_tol: f64,
}

#[derive(Debug, Serialize)]
struct FlowSummary {
    function: usize,
    time: f64,
    step: f64,
    start: PointRef,
    end: PointRef,
    switches: usize,
    /// Time at which the orbit reached the edge of the atlas, if it did.
    left_atlas_at: Option<f64>,
    conservation: ConservationReport,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct SphereReport {
    epsilon: f64,
    seed: u64,
    descent_tolerance: f64,
    drift_tolerance: f64,
    profile: ProfileZeroCheck,
    glue: GlueReport,
    commutation: CommutationReport,
    scan: SingularScanReport,
    flows: Vec<FlowSummary>,
    passed: bool,
}

fn flow_summary(
    sys: &singular_cotangent::cotangent::MomentumSystem,
    i: usize,
    start: &PointRef,
    t: f64,
    step: f64,
    tol: f64,
) -> CliResult<(FlowSummary, Trajectory)> {
    // g-orbits off the zero level reach the edge of the fibre boxes near the
    // poles in finite time; conservation is judged on the part inside
    let (traj, err) = flow_partial(sys, i, start, t, step, FlowOptions::default())?;
    let left_atlas_at = match err {
        None => None,
        Some(Error::LeftAtlas { .. }) => Some(traj.samples.last().map_or(0.0, |s| s.t)),
        Some(e) => return Err(e.into()),
    };
    let conservation = conservation_report(sys, &traj)?;
    let passed = conservation.drifts.iter().all(|&d| d <= tol);
    Ok((
        FlowSummary {
            function: i + 1,
            time: t,
            step,
            start: start.clone(),
            end: traj.end().clone(),
            switches: traj.switches.len(),
            left_atlas_at,
            conservation,
            passed,
        },
        traj,
    ))
}

pub fn run(args: &SphereArgs, global: &GlobalArgs, out: &Output) -> CliResult<bool> {
    let eps = args.epsilon;
    let profile = build_profile(eps)?;
    let tol = positive("--tol", args.tol)?;
    let step = positive("--step", args.step)?;
    let drift_tol = positive("--drift-tol", args.drift_tol)?;
    let zeros = check_profile_zeros(&profile, 1e-3, 1e-2, 1e-6);
    let opts = GlueOptions {
        samples: DESCENT_SAMPLES,
        tolerance: tol,
        seed: global.seed,
    };
    let sys = build_glued_sphere_system_with(eps, opts)?;
    let glue = sys.glue_report.clone().expect("glued systems carry a report");
    let commutation = verify_commutation(&sys, args.samples, f64::INFINITY, global.seed);
    let scan = singular_scan(&sys, eps, args.theta_samples, args.resolution, global.seed)?;
    let start = regular_point(eps);
    let (f_flow, f_traj) = flow_summary(&sys, 0, &start, args.flow_time, step, drift_tol)?;
    let (g_flow, g_traj) = flow_summary(&sys, 1, &start, args.flow_time, step, drift_tol)?;
    let passed = zeros.passed && glue.passed && commutation.passed && scan.passed && f_flow.passed && g_flow.passed;

    out.line(format!("sphere eps = {eps}"));
    out.line(format!(
        "  profile zeros exact {}, min |h| away {:.3e} at {:.4}   {}",
        zeros.exact_zeros,
        zeros.min_abs_away,
        zeros.argmin,
        verdict(zeros.passed)
    ));
    out.line(format!(
        "  gluings {} (descent <= {tol:e}), atlas {} transitions   {}",
        glue.gluings.len(),
        glue.atlas.transitions.len(),
        verdict(glue.passed)
    ));
    out.line(format!(
        "  commutation max |{{f,g}}| = {:.3e} over {} charts   {}",
        commutation.max_abs,
        commutation.charts.len(),
        verdict(commutation.passed)
    ));
    out.line(format!(
        "  scan {} points, ranks {:?}: {} focus-focus point(s), {} hyperbolic circle(s)   {}",
        scan.points_scanned,
        scan.rank_counts,
        scan.focus_focus_points,
        scan.hyperbolic_circles,
        verdict(scan.passed)
    ));
    for c in &scan.components {
        let lt = c.leaf_type;
        out.line(format!(
            "    rank {} type {} {:?} ({} samples) leaf ({},{},{},{},{}) valid {}",
            c.rank, c.williamson, c.shape, c.samples, lt.k_e, lt.k_h, lt.k_f, lt.c, lt.o, c.leaf_type_valid
        ));
    }
    for f in [&f_flow, &g_flow] {
        out.line(format!(
            "  flow g{} t = {}{}: drifts {:?}   {}",
            f.function,
            f.time,
            f.left_atlas_at.map(|t| format!(" (left the atlas at t = {t:.3})")).unwrap_or_default(),
            f.conservation.drifts.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>(),
            verdict(f.passed)
        ));
    }
    out.line(verdict(passed));
    if !passed {
        for e in &scan.failures {
            eprintln!("scan failure at {} {:?}: {}", e.point.chart, e.point.coords, e.error);
        }
        for c in commutation.charts.iter().filter(|c| c.max_abs > commutation.tolerance) {
            eprintln!("commutation fails on chart {} (max {:e})", c.chart, c.max_abs);
        }
    }

    out.csv(
        "profile.csv",
        cols(&["phi", "h", "dh"]),
        profile.table(args.profile_samples).into_iter().map(|r| r.iter().copied().map(num).collect()),
    )?;
    out.csv(
        "scan.csv",
        coords_header(&["component", "rank", "williamson", "shape", "samples", "closed", "chart"], 4),
        scan.components.iter().enumerate().map(|(k, c)| {
            let mut r = vec![
                k.to_string(),
                c.rank.to_string(),
                c.williamson.to_string(),
                format!("{:?}", c.shape).to_lowercase(),
                c.samples.to_string(),
                c.closed.to_string(),
                c.representative.chart.to_string(),
            ];
            r.extend(c.representative.coords.iter().copied().map(num));
            r
        }),
    )?;
    for (name, traj) in [("flow_f.csv", &f_traj), ("flow_g.csv", &g_traj)] {
        out.csv(
            name,
            coords_header(&["t", "chart"], 4),
            traj.rows().into_iter().map(|(t, chart, z)| {
                let mut r = vec![num(t), chart];
                r.extend(z.into_iter().map(num));
                r
            }),
        )?;
    }
    let report = SphereReport {
        epsilon: eps,
        seed: global.seed,
        descent_tolerance: tol,
        drift_tolerance: drift_tol,
        profile: zeros,
        glue,
        commutation,
        scan,
        flows: vec![f_flow, g_flow],
        passed,
    };
    out.report("sphere.json", &report)?;
    Ok(passed)
}
