//! Hamiltonian flows of the momentum functions across a (glued) atlas.
//!
//! Steps are taken in one chart; after each full step the state moves to the
//! best-placed chart once it has left the current trust box.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cotangent::MomentumSystem;
use crate::error::{Error, Result};
use crate::geometry::{Atlas, Chart, ChartId, PointRef};
use crate::normal_forms::{model_functions, LocalModel, MODEL_CHART};
use crate::parallel::par_map;
use crate::symplectic::{hamiltonian_from_gradient, poisson_bracket, ScalarField};

pub const NEWTON_MAX_ITER: usize = 50;
pub const NEWTON_TOL: f64 = 1e-12;
pub const PROJECTION_MAX_ITER: usize = 20;
pub const PROJECTION_TOL: f64 = 1e-10;
pub const SEED_TOL: f64 = 1e-6;
pub const MODEL_SYSTEM_RADIUS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// Implicit midpoint rule, second order.
    Midpoint,
    /// Symmetric triple-jump composition of midpoint steps, fourth order.
    Composition4,
}

impl Integrator {
    fn substeps(self) -> &'static [f64] {
        const CBRT2: f64 = 1.259_921_049_894_873_2;
        const G1: f64 = 1.0 / (2.0 - CBRT2);
        const G2: f64 = -CBRT2 / (2.0 - CBRT2);
        match self {
            Integrator::Midpoint => &[1.0],
            Integrator::Composition4 => &[G1, G2, G1],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub point: PointRef,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChartSwitch {
    pub t: f64,
    pub from: ChartId,
    pub to: ChartId,
    pub transition: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub function: usize,
    pub step: f64,
    pub integrator: Integrator,
    pub samples: Vec<TrajectorySample>,
    pub switches: Vec<ChartSwitch>,
}

impl Trajectory {
    pub fn end(&self) -> &PointRef {
        &self.samples.last().expect("trajectories hold the start point").point
    }

    /// Rows `(t, chart, coords...)` for tabular export.
    pub fn rows(&self) -> Vec<(f64, String, Vec<f64>)> {
        self.samples
            .iter()
            .map(|s| (s.t, s.point.chart.to_string(), s.point.coords.clone()))
            .collect()
    }
}

/// One implicit-midpoint step `z1 = z0 + h X((z0 + z1) / 2)` solved by Newton's method.
pub fn midpoint_step(g: &ScalarField, z0: &[f64], h: f64) -> Result<Vec<f64>> {
    let dim = z0.len();
    let n = dim / 2;
    let field = |z: &[f64]| hamiltonian_from_gradient(&g.gradient(z));
    let mut z1: Vec<f64> = z0.iter().zip(field(z0)).map(|(a, v)| a + h * v).collect();
    let mut update = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        let mid: Vec<f64> = z0.iter().zip(&z1).map(|(a, b)| 0.5 * (a + b)).collect();
        let v = field(&mid);
        let residual = DVector::from_fn(dim, |k, _| z1[k] - z0[k] - h * v[k]);
        let hess = g.hessian(&mid);
        // D(J grad g) = J Hess, rows (d/dp, -d/dq)
        let mut dv = DMatrix::zeros(dim, dim);
        dv.view_mut((0, 0), (n, dim)).copy_from(&hess.view((n, 0), (n, dim)));
        dv.view_mut((n, 0), (n, dim)).copy_from(&(-hess.view((0, 0), (n, dim))));
        let jac = DMatrix::identity(dim, dim) - dv * (0.5 * h);
        let delta = jac.lu().solve(&residual).ok_or(Error::NoConvergence {
            iterations: 0,
            update: f64::NAN,
        })?;
        update = delta.amax();
        for (z, d) in z1.iter_mut().zip(delta.iter()) {
            *z -= d;
        }
        let scale = z1.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        if update <= NEWTON_TOL * scale {
            return Ok(z1);
        }
        if !update.is_finite() {
            break;
        }
    }
    Err(Error::NoConvergence {
        iterations: NEWTON_MAX_ITER,
        update,
    })
}

fn integrator_step(g: &ScalarField, z: &[f64], h: f64, integrator: Integrator) -> Result<Vec<f64>> {
    let mut z = z.to_vec();
    for &c in integrator.substeps() {
        z = midpoint_step(g, &z, c * h)?;
    }
    Ok(z)
}

/// Picks the chart for a freshly stepped state: stay while inside the trust
/// box, otherwise move to the chart one transition away (or stay) with the
/// smallest normalised trust distance. Ties go to the smaller chart id.
fn settle(atlas: &Atlas, chart: &ChartId, coords: Vec<f64>) -> Result<(ChartId, Vec<f64>, Option<String>)> {
    let current = atlas.chart(chart)?;
    let coords = current.normalized(&coords);
    if current.contains(&coords) && current.in_trust(&coords) {
        return Ok((chart.clone(), coords, None));
    }
    let mut best: Option<(f64, ChartId, Vec<f64>, Option<String>)> = None;
    let mut consider = |nd: f64, id: &ChartId, c: Vec<f64>, name: Option<String>| {
        let better = match &best {
            None => true,
            Some((bd, bid, _, _)) => nd < *bd || (nd == *bd && id < bid),
        };
        if better {
            best = Some((nd, id.clone(), c, name));
        }
    };
    if current.contains(&coords) {
        consider(current.trust_distance(&coords), chart, coords.clone(), None);
    }
    for (idx, t) in atlas.outgoing(chart) {
        if let Ok(y) = atlas.apply_transition(idx, &coords) {
            let target = atlas.chart(&t.to)?;
            consider(target.trust_distance(&y), &t.to, y, Some(t.name.clone()));
        }
    }
    match best {
        Some((_, id, c, name)) => Ok((id, c, name)),
        None => Err(Error::LeftAtlas {
            chart: chart.to_string(),
            coords,
        }),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    pub integrator: Integrator,
    /// Keep every `record_every`-th state (the end point is always kept).
    pub record_every: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            integrator: Integrator::Composition4,
            record_every: 1,
        }
    }
}

/// Flow of `H_{g_i}` (0-based `i`) from `start` for time `t_end` (may be negative).
pub fn integrate_flow(sys: &MomentumSystem, i: usize, start: &PointRef, t_end: f64, step: f64) -> Result<Trajectory> {
    integrate_flow_with(sys, i, start, t_end, step, FlowOptions::default())
}

pub fn integrate_flow_with(
    sys: &MomentumSystem,
    i: usize,
    start: &PointRef,
    t_end: f64,
    step: f64,
    opts: FlowOptions,
) -> Result<Trajectory> {
    let (traj, err) = flow_partial(sys, i, start, t_end, step, opts)?;
    match err {
        Some(e) => Err(e),
        None => Ok(traj),
    }
}

/// Like [`integrate_flow_with`], but returns what was integrated before a
/// runtime failure together with that failure.
pub fn flow_partial(
    sys: &MomentumSystem,
    i: usize,
    start: &PointRef,
    t_end: f64,
    step: f64,
    opts: FlowOptions,
) -> Result<(Trajectory, Option<Error>)> {
    if !(step > 0.0) || !step.is_finite() || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("step {step} and time {t_end} must be finite, step > 0")));
    }
    if i >= sys.n {
        return Err(Error::InvalidArgument(format!("function index {} out of range 1..={}", i + 1, sys.n)));
    }
    sys.atlas.chart(&start.chart)?.check(&start.coords)?;
    let steps = (t_end.abs() / step).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    let every = opts.record_every.max(1);
    let mut traj = Trajectory {
        function: i,
        step: h.abs(),
        integrator: opts.integrator,
        samples: vec![TrajectorySample {
            t: 0.0,
            point: PointRef::new(start.chart.clone(), sys.atlas.chart(&start.chart)?.normalized(&start.coords)),
        }],
        switches: Vec::new(),
    };
    let mut chart = start.chart.clone();
    let mut z = traj.samples[0].point.coords.clone();
    for k in 1..=steps {
        let t = k as f64 * h;
        let g = &sys.functions_on(&chart)?[i];
        let stepped = match integrator_step(g, &z, h, opts.integrator) {
            Ok(s) => s,
            Err(e) => return Ok((traj, Some(e))),
        };
        match settle(&sys.atlas, &chart, stepped) {
            Ok((next, coords, name)) => {
                if let Some(name) = name {
                    traj.switches.push(ChartSwitch {
                        t,
                        from: chart.clone(),
                        to: next.clone(),
                        transition: name,
                    });
                }
                chart = next;
                z = coords;
            }
            Err(e) => return Ok((traj, Some(e))),
        }
        if k % every == 0 || k == steps {
            traj.samples.push(TrajectorySample {
                t,
                point: PointRef::new(chart.clone(), z.clone()),
            });
        }
    }
    Ok((traj, None))
}

#[derive(Debug, Clone, Serialize)]
pub struct ConservationReport {
    /// Max `|g_j(z(t)) - g_j(z(0))|` for every function.
    pub drifts: Vec<f64>,
    /// Drift of the function that generated the flow.
    pub energy_drift: f64,
}

pub fn conservation_report(sys: &MomentumSystem, traj: &Trajectory) -> Result<ConservationReport> {
    let first = traj
        .samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
    let eval = |p: &PointRef| -> Result<Vec<f64>> {
        Ok(sys.functions_on(&p.chart)?.iter().map(|g| g.value(&p.coords)).collect())
    };
    let v0 = eval(&first.point)?;
    let mut drifts = vec![0.0_f64; v0.len()];
    for s in &traj.samples {
        for (d, (a, b)) in drifts.iter_mut().zip(eval(&s.point)?.iter().zip(&v0)) {
            *d = d.max((a - b).abs());
        }
    }
    Ok(ConservationReport {
        energy_drift: drifts[traj.function],
        drifts,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutingFlowsReport {
    pub i: usize,
    pub j: usize,
    pub s: f64,
    pub t: f64,
    pub chart: ChartId,
    pub distance: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Rank of the differentials of all functions at a point.
pub fn differential_rank(sys: &MomentumSystem, p: &PointRef, tol: f64) -> Result<usize> {
    let fs = sys.functions_on(&p.chart)?;
    let rows: Vec<Vec<f64>> = fs.iter().map(|f| f.gradient(&p.coords)).collect();
    let m = DMatrix::from_fn(rows.len(), p.coords.len(), |r, c| rows[r][c]);
    Ok(m.singular_values().iter().filter(|&&s| s > tol).count())
}

/// Distance between `phi_i^s o phi_j^t (start)` and `phi_j^t o phi_i^s (start)`.
#[allow(clippy::too_many_arguments)]
pub fn commuting_flows_check(
    sys: &MomentumSystem,
    start: &PointRef,
    i: usize,
    j: usize,
    s: f64,
    t: f64,
    step: f64,
    tol: f64,
) -> Result<CommutingFlowsReport> {
    let rank = differential_rank(sys, start, 1e-8)?;
    if rank < sys.n {
        return Err(Error::InvalidArgument(format!(
            "start point is not regular (rank {rank} < {})",
            sys.n
        )));
    }
    let a = integrate_flow(sys, j, start, t, step)?;
    let a = integrate_flow(sys, i, a.end(), s, step)?;
    let b = integrate_flow(sys, i, start, s, step)?;
    let b = integrate_flow(sys, j, b.end(), t, step)?;
    let (pa, pb) = (a.end(), b.end());
    let pb = sys.atlas.chart_to(pb, &pa.chart)?;
    let chart = sys.atlas.chart(&pa.chart)?;
    let distance = chart.distance(&pa.coords, &pb.coords);
    Ok(CommutingFlowsReport {
        i,
        j,
        s,
        t,
        chart: pa.chart.clone(),
        distance,
        tolerance: tol,
        passed: distance <= tol,
    })
}

/// Newton projection of a point onto `{g = values}` (minimum-norm updates).
pub fn project_to_level(sys: &MomentumSystem, p: &PointRef, values: &[f64]) -> Result<(PointRef, f64)> {
    let fs = sys.functions_on(&p.chart)?;
    let chart = sys.atlas.chart(&p.chart)?;
    let mut z = p.coords.clone();
    let residual = |z: &[f64]| -> DVector<f64> { DVector::from_fn(fs.len(), |k, _| fs[k].value(z) - values[k]) };
    let mut r = residual(&z);
    for _ in 0..PROJECTION_MAX_ITER {
        if r.amax() <= PROJECTION_TOL {
            break;
        }
        let rows: Vec<Vec<f64>> = fs.iter().map(|f| f.gradient(&z)).collect();
        let g = DMatrix::from_fn(rows.len(), z.len(), |a, b| rows[a][b]);
        let Ok(pinv) = g.pseudo_inverse(1e-12) else { break };
        let dz = pinv * &r;
        for (x, d) in z.iter_mut().zip(dz.iter()) {
            *x -= d;
        }
        chart.normalize(&mut z);
        r = residual(&z);
    }
    Ok((PointRef::new(p.chart.clone(), z), r.amax()))
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSample {
    pub values: Vec<f64>,
    pub budget: usize,
    pub steps_taken: usize,
    pub step: f64,
    pub points: Vec<PointRef>,
    /// True if some exploring flow ran off the atlas.
    pub boundary_hit: bool,
    pub boundary_events: Vec<String>,
    /// Largest coordinate extent of the cloud within any single chart.
    pub diameter: f64,
    pub chart_extents: BTreeMap<String, f64>,
    pub max_level_residual: f64,
}

impl LevelSample {
    pub fn bounded(&self) -> bool {
        !self.boundary_hit
    }
}

/// Explores the level through `seeds` along every flow, forwards and
/// backwards, spending at most `budget` integration steps in total.
pub fn sample_level(
    sys: &MomentumSystem,
    values: &[f64],
    seeds: &[PointRef],
    budget: usize,
    step: f64,
) -> Result<LevelSample> {
    if values.len() != sys.n {
        return Err(Error::DimensionMismatch {
            expected: sys.n,
            got: values.len(),
        });
    }
    let mut starts = Vec::with_capacity(seeds.len());
    for (k, s) in seeds.iter().enumerate() {
        let (p, res) = project_to_level(sys, s, values)?;
        if !(res <= SEED_TOL) || !sys.atlas.chart(&p.chart)?.contains(&p.coords) {
            return Err(Error::SeedOffLevel { index: k, residual: res });
        }
        starts.push(p);
    }
    let runs: Vec<(PointRef, usize, f64)> = starts
        .iter()
        .flat_map(|p| (0..sys.n).flat_map(move |i| [(p.clone(), i, 1.0), (p.clone(), i, -1.0)]))
        .collect();
    let per_run = if runs.is_empty() { 0 } else { budget / runs.len() };
    let opts = FlowOptions {
        integrator: Integrator::Midpoint,
        record_every: 1,
    };
    let results = par_map(&runs, |(p, i, dir)| {
        flow_partial(sys, *i, p, dir * per_run as f64 * step, step, opts)
    });

    let mut points: Vec<PointRef> = starts.clone();
    let mut boundary_events = Vec::new();
    let mut steps_taken = 0;
    for r in results {
        let (traj, err) = r?;
        steps_taken += traj.samples.len() - 1;
        points.extend(traj.samples.into_iter().skip(1).map(|s| s.point));
        match err {
            Some(e @ Error::LeftAtlas { .. }) => boundary_events.push(e.to_string()),
            Some(e) => return Err(e),
            None => {}
        }
    }

    let mut boxes: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut max_level_residual: f64 = 0.0;
    for p in &points {
        let fs = sys.functions_on(&p.chart)?;
        for (g, v) in fs.iter().zip(values) {
            max_level_residual = max_level_residual.max((g.value(&p.coords) - v).abs());
        }
        let e = boxes
            .entry(p.chart.to_string())
            .or_insert_with(|| (p.coords.clone(), p.coords.clone()));
        for (k, &c) in p.coords.iter().enumerate() {
            e.0[k] = e.0[k].min(c);
            e.1[k] = e.1[k].max(c);
        }
    }
    let chart_extents: BTreeMap<String, f64> = boxes
        .into_iter()
        .map(|(k, (lo, hi))| (k, lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max)))
        .collect();
    let diameter = chart_extents.values().copied().fold(0.0, f64::max);
    Ok(LevelSample {
        values: values.to_vec(),
        budget,
        steps_taken,
        step,
        points,
        boundary_hit: !boundary_events.is_empty(),
        boundary_events,
        diameter,
        chart_extents,
        max_level_residual,
    })
}

/// A system on a single chart holding the given functions.
pub fn single_chart_system(name: &str, chart: Chart, functions: Vec<ScalarField>) -> MomentumSystem {
    let mut atlas = Atlas::new();
    atlas.add_chart(chart.clone());
    let mut sys = MomentumSystem::new(name, functions.len(), atlas);
    sys.functions
        .insert(chart.id.clone(), functions.into_iter().map(|f| f.restricted_to(&chart)).collect());
    sys
}

/// The normal-form functions of a local model on one large chart.
pub fn model_system(model: &LocalModel) -> Result<MomentumSystem> {
    let dim = 2 * model.n();
    let chart = Chart::cube(MODEL_CHART, format!("normal form {model}"), dim, MODEL_SYSTEM_RADIUS)?;
    Ok(single_chart_system(&model.to_string(), chart, model_functions(model)))
}

/// `f = p1`, `g = q1 p2` on R^4: a pair that does not commute, `{f, g} = -p2`.
pub fn noncommuting_pair() -> MomentumSystem {
    let chart = Chart::cube(MODEL_CHART, "non-commuting control", 4, MODEL_SYSTEM_RADIUS).expect("valid cube");
    let f = ScalarField::quadratic(MODEL_CHART, "p1", vec![0.0, 0.0, 1.0, 0.0], DMatrix::zeros(4, 4));
    let mut a = DMatrix::zeros(4, 4);
    a[(0, 3)] = 1.0;
    let g = ScalarField::quadratic(MODEL_CHART, "q1 p2", vec![0.0; 4], a);
    debug_assert!(poisson_bracket(&f, &g, &[0.0, 0.0, 0.0, 1.0]).map_or(false, |b| b != 0.0));
    single_chart_system("non-commuting", chart, vec![f, g])
}
