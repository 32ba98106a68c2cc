//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Runs without the libtest harness so the lines are always shown.

use std::f64::consts::{E, PI};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use singular_cotangent::cotangent::{
    focus_gluing, glue, glued_local_model, hyperbolic_gluing, local_cotangent_model, verify_commutation, GluingMap,
    MomentumSystem,
};
use singular_cotangent::dynamics::{
    commuting_flows_check, conservation_report, integrate_flow, integrate_flow_with, model_system, FlowOptions,
    Integrator,
};
use singular_cotangent::figure_eight::properness_contrast;
use singular_cotangent::geometry::PointRef;
use singular_cotangent::normal_forms::{
    classify_fixed_point, enumerate_branches, model_functions, tangent_plane_limit, LeafType, LocalModel,
    WilliamsonType, DEFAULT_TRIALS, MODEL_CHART,
};
use singular_cotangent::sampling::stream_seed;
use singular_cotangent::sphere::{
    band_gluing, build_glued_sphere_system, build_profile, check_profile_zeros, pole_gluing, regular_point,
    singular_scan, SOUTH,
};

const SEED: u64 = 42;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn model(s: &str) -> LocalModel {
    s.parse().expect("valid model string")
}

fn commutation() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for m in ["h", "ff", "h*ff", "h*h*r"] {
        let sys = glued_local_model(&model(m)).unwrap();
        let r = verify_commutation(&sys, 10_000, 2.0, SEED);
        worst = worst.max(r.max_abs);
        parts.push(format!("{m}: {:.1e} on {} charts", r.max_abs, r.charts.len()));
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-9 && elapsed <= Duration::from_secs(10),
        format!("max |{{g_i,g_j}}| = {worst:.1e} ({}) in {:.2}s", parts.join(", "), elapsed.as_secs_f64()),
    )
}

fn descent(sys: &MomentumSystem) -> (usize, f64) {
    let report = sys.glue_report.as_ref().unwrap();
    let worst = report
        .gluings
        .iter()
        .flat_map(|g| g.max_residuals.iter().copied())
        .fold(0.0, f64::max);
    (report.gluings.iter().map(|g| g.samples).min().unwrap_or(0), worst)
}

fn gluing_correctness() -> Outcome {
    let start = Instant::now();
    let maps: [GluingMap; 4] = [hyperbolic_gluing(), focus_gluing(), pole_gluing(), band_gluing()];
    let exact = maps.iter().all(|m| m.matrix.symplectic_defect() == Some(0));
    let h = glue(local_cotangent_model(&model("h")).unwrap(), vec![hyperbolic_gluing()]).unwrap();
    let ff = glue(local_cotangent_model(&model("ff")).unwrap(), vec![focus_gluing()]).unwrap();
    let sphere = build_glued_sphere_system(PI / 16.0).unwrap();
    let mut samples = usize::MAX;
    let mut worst: f64 = 0.0;
    for sys in [&h, &ff, &sphere] {
        let (n, w) = descent(sys);
        samples = samples.min(n);
        worst = worst.max(w);
    }
    let elapsed = start.elapsed();
    outcome(
        exact && samples >= 1000 && worst <= 1e-12 && elapsed <= Duration::from_secs(1),
        format!(
            "M^T J M = J exactly: {exact}; descent residual {worst:.1e} over >= {samples} samples per gluing; {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn branches() -> Outcome {
    let m = model("h*ff");
    let labels = enumerate_branches(&m);
    let mut ok = labels.len() == 4;
    let mut parts = Vec::new();
    for l in &labels {
        let r = tangent_plane_limit(&m, l, &[1e-1, 1e-2, 1e-3]).unwrap();
        ok &= r.final_angle <= 1e-4 && r.monotone;
        parts.push(format!("{}: {:.1e}", l, r.final_angle));
    }
    outcome(ok, format!("{} labels; angle at t = 1e-3: {}", labels.len(), parts.join(", ")))
}

fn classification() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (m, expected) in [("e", (1, 0, 0)), ("h", (0, 1, 0)), ("ff", (0, 0, 1))] {
        let lm = model(m);
        let fs = model_functions(&lm);
        let origin = vec![0.0; 2 * lm.n()];
        let hits = (0..100)
            .filter(|&k| {
                classify_fixed_point(&fs, &origin, DEFAULT_TRIALS, stream_seed(SEED, k))
                    .map(|c| c.williamson == WilliamsonType::new(expected.0, expected.1, expected.2))
                    .unwrap_or(false)
            })
            .count();
        ok &= hits == 100;
        parts.push(format!("{m}: {hits}/100"));
    }
    let sys = build_glued_sphere_system(PI / 16.0).unwrap();
    let scan = singular_scan(&sys, PI / 16.0, 48, 8, SEED).unwrap();
    let tuples: Vec<LeafType> = scan.components.iter().map(|c| c.leaf_type).collect();
    let identity = scan.components.iter().all(|c| c.leaf_type_valid && c.leaf_type.total() == 2);
    let expected = [LeafType::new(0, 0, 1, 0, 0), LeafType::new(0, 1, 0, 1, 0)];
    let found = expected.iter().all(|e| tuples.contains(e));
    ok &= identity && found && !tuples.is_empty();
    let shown: Vec<String> = tuples
        .iter()
        .map(|t| format!("({},{},{},{},{})", t.k_e, t.k_h, t.k_f, t.c, t.o))
        .collect();
    outcome(ok, format!("{}; sphere leaf types {} sum to n = 2: {identity}", parts.join(", "), shown.join(" ")))
}

fn sphere() -> Outcome {
    let start = Instant::now();
    let eps = PI / 16.0;
    let zeros = check_profile_zeros(&build_profile(eps).unwrap(), 1e-3, 1e-2, 1e-6);
    let sys = build_glued_sphere_system(eps).unwrap();
    let comm = verify_commutation(&sys, 10_000, f64::INFINITY, SEED);
    let scan = singular_scan(&sys, eps, 48, 8, SEED).unwrap();
    let rank0 = scan.components.iter().filter(|c| c.rank == 0).count();
    let rank1 = scan.components.iter().filter(|c| c.rank == 1).count();
    let elapsed = start.elapsed();
    outcome(
        zeros.passed
            && comm.passed
            && comm.charts.len() == 6
            && scan.passed
            && scan.focus_focus_points == 1
            && scan.hyperbolic_circles == 1
            && rank0 == 1
            && rank1 == 1
            && elapsed <= Duration::from_secs(60),
        format!(
            "zeros exact {}, min |h| {:.1e}; max |{{f,g}}| {:.1e} on {} charts; {} focus-focus point, {} hyperbolic circle; {:.2}s",
            zeros.exact_zeros,
            zeros.min_abs_away,
            comm.max_abs,
            comm.charts.len(),
            scan.focus_focus_points,
            scan.hyperbolic_circles,
            elapsed.as_secs_f64()
        ),
    )
}

fn properness() -> Outcome {
    let c = properness_contrast(10_000, 1e-2).unwrap();
    outcome(
        c.passed && c.unglued.budget == c.glued.budget,
        format!(
            "budget {}: unglued boundary hit {} after {} steps, glued boundary hit {} (diameter {:.3})",
            c.budget, c.unglued.boundary_hit, c.unglued.steps_taken, c.glued.boundary_hit, c.glued.diameter
        ),
    )
}

fn g_drift_along_f(sys: &MomentumSystem, p: &PointRef) -> f64 {
    let tr = integrate_flow(sys, 0, p, 10.0, 1e-2).unwrap();
    conservation_report(sys, &tr).unwrap().drifts[1]
}

fn dynamics() -> Outcome {
    let hsys = model_system(&model("h")).unwrap();
    let start = PointRef::new(MODEL_CHART, vec![1.0, 1.0]);
    let end = integrate_flow(&hsys, 0, &start, 1.0, 1e-3).unwrap().end().coords.clone();
    let endpoint = (end[0] - E).abs().max((end[1] - 1.0 / E).abs());

    let eps = PI / 16.0;
    let sphere = build_glued_sphere_system(eps).unwrap();
    let near_pole = PointRef::new(SOUTH, vec![0.02, -0.01, 0.01, 0.03]);
    let drift = g_drift_along_f(&sphere, &regular_point(eps)).max(g_drift_along_f(&sphere, &near_pole));

    let ffsys = glued_local_model(&model("ff")).unwrap();
    let ff_start = PointRef::new("T*[X]", vec![0.3, -0.2, 0.4, 0.1]);
    let sep = [
        commuting_flows_check(&sphere, &regular_point(eps), 0, 1, 0.7, 0.5, 1e-3, 1e-6).unwrap(),
        commuting_flows_check(&ffsys, &ff_start, 0, 1, 0.5, 0.4, 1e-3, 1e-6).unwrap(),
    ]
    .iter()
    .map(|r| r.distance)
    .fold(0.0, f64::max);

    let opts = FlowOptions {
        integrator: Integrator::Midpoint,
        record_every: 1,
    };
    let err = |h: f64| {
        integrate_flow_with(&hsys, 0, &start, 1.0, h, opts)
            .unwrap()
            .samples
            .iter()
            .map(|s| (s.point.coords[0] - s.t.exp()).abs().max((s.point.coords[1] - (-s.t).exp()).abs()))
            .fold(0.0, f64::max)
    };
    let factor = err(1e-2) / err(5e-3);
    outcome(
        endpoint <= 1e-8 && drift <= 1e-8 && sep <= 1e-6 && (3.5..=4.5).contains(&factor),
        format!(
            "endpoint error {endpoint:.1e}; g drift along f-flow {drift:.1e}; flow separation {sep:.1e}; halving factor {factor:.3}"
        ),
    )
}

fn run_cli(bin: &str, args: &[&str], out: &Path) -> (Option<i32>, Vec<Vec<u8>>) {
    let status = Command::new(bin)
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("cli runs")
        .status
        .code();
    let mut files: Vec<_> = fs::read_dir(out)
        .map(|d| d.map(|e| e.unwrap().path()).collect())
        .unwrap_or_default();
    files.sort();
    (status, files.iter().map(|f| fs::read(f).unwrap()).collect())
}

fn cli_suite() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_singcot");
    let dir = std::env::temp_dir().join(format!("singcot-acceptance-{}", std::process::id()));
    let start = Instant::now();
    let suite: [&[&str]; 7] = [
        &["verify", "--model", "h"],
        &["verify", "--model", "ff"],
        &["verify", "--model", "h*ff"],
        &["classify", "--model", "h"],
        &["classify", "--model", "ff"],
        &["classify", "--model", "h*h"],
        &["sphere"],
    ];
    let mut ok = true;
    let mut failures = Vec::new();
    for (k, args) in suite.iter().enumerate() {
        let (c1, f1) = run_cli(bin, args, &dir.join(format!("{k}a")));
        let (c2, f2) = run_cli(bin, args, &dir.join(format!("{k}b")));
        let good = c1 == Some(0) && c2 == Some(0) && !f1.is_empty() && f1 == f2;
        if !good {
            failures.push(args.join(" "));
        }
        ok &= good;
    }
    let elapsed = start.elapsed();
    let _ = fs::remove_dir_all(&dir);
    outcome(
        ok && elapsed <= Duration::from_secs(180),
        format!(
            "{} commands twice each, exit 0 and byte-identical reports{}; {:.2}s",
            suite.len(),
            if failures.is_empty() { String::new() } else { format!(" except [{}]", failures.join("; ")) },
            elapsed.as_secs_f64()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("commutation", commutation),
        ("gluing correctness", gluing_correctness),
        ("branches", branches),
        ("classification", classification),
        ("sphere", sphere),
        ("properness contrast", properness),
        ("dynamics", dynamics),
        ("cli suite", cli_suite),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        println!("{} criterion {} {}: {}", if o.passed { "PASS" } else { "FAIL" }, k + 1, name, o.detail);
        failed += usize::from(!o.passed);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
