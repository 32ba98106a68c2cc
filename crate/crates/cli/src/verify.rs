use clap::Args;
use serde::Serialize;

use singular_cotangent::cotangent::{
    glue_with, local_cotangent_model, model_gluings, verify_commutation, CommutationReport, GlueOptions, GlueReport,
    COMMUTATION_TOL, DESCENT_SAMPLES, LOCAL_RADIUS,
};
use singular_cotangent::normal_forms::{enumerate_branches, tangent_plane_limit, LocalModel, TangentLimitReport};

use crate::report::{cols, num};
use crate::{positive, verdict, CliResult, GlobalArgs, Output, MODEL_HELP};

/// Parameters along which branch tangent planes are tracked.
pub const TANGENT_SEQUENCE: [f64; 3] = [1e-1, 1e-2, 1e-3];

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[arg(long, help = MODEL_HELP)]
    pub model: String,

    /// Commutation samples per chart
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,

    /// Momentum descent tolerance through the gluings
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,

    /// Half-width of the sampling box for commutation
    #[arg(long, default_value_t = LOCAL_RADIUS)]
    pub box_radius: f64,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    model: String,
    n: usize,
    seed: u64,
    descent_tolerance: f64,
    commutation_tolerance: f64,
    branches: Vec<TangentLimitReport>,
    glue: GlueReport,
    commutation: CommutationReport,
    passed: bool,
}

pub fn run(args: &VerifyArgs, global: &GlobalArgs, out: &Output) -> CliResult<bool> {
    let model: LocalModel = args.model.parse()?;
    let tol = positive("--tol", args.tol)?;
    positive("--box-radius", args.box_radius)?;
    let opts = GlueOptions {
        samples: DESCENT_SAMPLES,
        tolerance: tol,
        seed: global.seed,
    };
    let sys = glue_with(local_cotangent_model(&model)?, model_gluings(&model), opts)?;
    let glue = sys.glue_report.clone().expect("glued systems carry a report");
    let commutation = verify_commutation(&sys, args.samples, args.box_radius, global.seed);
    let branches = enumerate_branches(&model)
        .iter()
        .map(|l| tangent_plane_limit(&model, l, &TANGENT_SEQUENCE))
        .collect::<Result<Vec<_>, _>>()?;
    let branches_ok = branches.iter().all(|b| b.passed);
    let passed = glue.passed && commutation.passed && branches_ok;

    out.line(format!("model {model} (n = {})", model.n()));
    out.line(format!(
        "  gluings      {} maps, descent <= {:e} on {} samples each   {}",
        glue.gluings.len(),
        tol,
        DESCENT_SAMPLES,
        verdict(glue.passed)
    ));
    out.line(format!(
        "  atlas        {} transitions, {} cocycles checked   {}",
        glue.atlas.transitions.len(),
        glue.atlas.cocycles.len(),
        verdict(glue.atlas.passed)
    ));
    out.line(format!(
        "  commutation  max |{{g_i,g_j}}| = {:.3e} over {} charts x {} samples   {}",
        commutation.max_abs,
        commutation.charts.len(),
        args.samples,
        verdict(commutation.passed)
    ));
    for b in &branches {
        out.line(format!(
            "  branch {:<6} angle at t = {:e}: {:.3e}, monotone {}   {}",
            b.label.to_string(),
            TANGENT_SEQUENCE[2],
            b.final_angle,
            b.monotone,
            verdict(b.passed)
        ));
    }
    out.line(verdict(passed));
    if !passed {
        for c in commutation.charts.iter().filter(|c| c.max_abs > commutation.tolerance) {
            eprintln!("commutation fails on chart {} (max {:e})", c.chart, c.max_abs);
        }
        for b in branches.iter().filter(|b| !b.passed) {
            eprintln!("tangent limit fails for branch {}", b.label);
        }
    }

    let rows = commutation.charts.iter().flat_map(|c| {
        c.pairs
            .iter()
            .map(move |p| vec![c.chart.to_string(), (p.i + 1).to_string(), (p.j + 1).to_string(), num(p.max_abs)])
    });
    out.csv("verify_commutation.csv", cols(&["chart", "i", "j", "max_abs"]), rows)?;
    let report = VerifyReport {
        model: model.to_string(),
        n: model.n(),
        seed: global.seed,
        descent_tolerance: tol,
        commutation_tolerance: COMMUTATION_TOL,
        branches,
        glue,
        commutation,
        passed,
    };
    out.report("verify.json", &report)?;
    Ok(passed)
}
