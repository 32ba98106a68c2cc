//! Momentum functions on cotangent charts over the branches of a singular
//! level, the linear gluings that identify those charts, and the checks that
//! the functions commute and descend through the gluings.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::IntMatrix;
use crate::geometry::maps::IntLinearMap;
use crate::geometry::{validate_atlas, Atlas, AtlasReport, AtlasSummary, Chart, ChartId, TransitionMap, DEFAULT_OVERLAP_SAMPLES};
use crate::normal_forms::{branch_chart, enumerate_branches, BranchChoice, BranchLabel, LocalModel, ModelFactor};
use crate::parallel::par_map;
use crate::sampling;
use crate::symplectic::{bracket_from_gradients, ScalarField, VectorField};

/// Half-width of the cotangent charts of the local models.
pub const LOCAL_RADIUS: f64 = 2.0;
/// Half-width of their trust boxes.
pub const LOCAL_TRUST: f64 = 1.0;
pub const DESCENT_SAMPLES: usize = 1000;
pub const DESCENT_TOL: f64 = 1e-12;
pub const COMMUTATION_TOL: f64 = 1e-9;
pub const COMMUTATION_TOL_FD: f64 = 1e-5;

/// The field `X_i` induced on one branch chart.
#[derive(Debug, Clone)]
pub struct LiftedField {
    pub index: usize,
    pub field: VectorField,
}

/// `g(q, p) = sum_k p_k X^k(q)` on the cotangent chart over the chart of `x`.
///
/// The gradient is `(DX^T p, X)`; the Hessian is analytic whenever `x`
/// carries second derivatives.
pub fn momentum_function(x: &VectorField) -> ScalarField {
    let n = x.dim();
    let (xv, xg, xh) = (x.clone(), x.clone(), x.clone());
    let g = ScalarField::new(
        x.chart.clone(),
        format!("<{}, p>", x.name),
        2 * n,
        move |z| {
            let (q, p) = z.split_at(n);
            xv.value(q).iter().zip(p).map(|(a, b)| a * b).sum()
        },
        move |z| {
            let (q, p) = z.split_at(n);
            let dq = xg.jacobian(q).transpose() * DVector::from_column_slice(p);
            dq.iter().copied().chain(xg.value(q)).collect()
        },
    );
    if !x.has_second_derivatives() {
        return g;
    }
    g.with_hessian(move |z| {
        let (q, p) = z.split_at(n);
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        if let Some(second) = xh.second_derivatives(q) {
            for (k, hk) in second.iter().enumerate() {
                h.view_mut((0, 0), (n, n)).zip_apply(hk, |a, b| *a += p[k] * b);
            }
        }
        let dx = xh.jacobian(q);
        h.view_mut((n, 0), (n, n)).copy_from(&dx);
        h.view_mut((0, n), (n, n)).copy_from(&dx.transpose());
        h
    })
}

/// Restrictions of the Hamiltonian fields of the normal form to a branch,
/// in branch-chart coordinates (chart coordinates follow the base indices).
pub fn lifted_fields(model: &LocalModel, label: &BranchLabel) -> Result<Vec<LiftedField>> {
    if !label.belongs_to(model) {
        return Err(Error::UnknownLabel(label.to_string()));
    }
    let n = model.n();
    let chart = label.chart_id();
    let mut out = Vec::with_capacity(n);
    for ((factor, off), choice) in model.factors().iter().zip(model.offsets()).zip(label.choices()) {
        let mut a = DMatrix::zeros(n, n);
        match (factor, choice) {
            (ModelFactor::Regular, _) => {
                let mut v = vec![0.0; n];
                v[off] = 1.0;
                out.push(LiftedField {
                    index: off,
                    field: VectorField::constant(chart.clone(), "d/dx", v),
                });
            }
            (ModelFactor::Elliptic, _) => return Err(Error::EllipticFactorUnsupported),
            (ModelFactor::Hyperbolic, c) => {
                let (s, name) = if *c == BranchChoice::XAxis { (1.0, "x d/dx") } else { (-1.0, "-y d/dy") };
                a[(off, off)] = s;
                out.push(LiftedField {
                    index: off,
                    field: VectorField::linear(chart.clone(), name, a),
                });
            }
            (ModelFactor::FocusFocus, c) => {
                let s = if *c == BranchChoice::XPlane { 1.0 } else { -1.0 };
                a[(off, off)] = s;
                a[(off + 1, off + 1)] = s;
                out.push(LiftedField {
                    index: off,
                    field: VectorField::linear(chart.clone(), "radial", a),
                });
                let mut r = DMatrix::zeros(n, n);
                r[(off, off + 1)] = -1.0;
                r[(off + 1, off)] = 1.0;
                out.push(LiftedField {
                    index: off + 1,
                    field: VectorField::linear(chart.clone(), "rotation", r),
                });
            }
        }
    }
    Ok(out)
}

/// Linear identification `z -> M z + b` between two cotangent charts.
#[derive(Debug, Clone, Serialize)]
pub struct GluingMap {
    pub name: String,
    pub source: ChartId,
    pub target: ChartId,
    pub matrix: IntMatrix,
    pub offset: Vec<f64>,
    /// Where descent samples are drawn (source coordinates); defaults to the
    /// source domain clipped to `[-1, 1]`.
    #[serde(skip)]
    pub sample_box: Option<Vec<(f64, f64)>>,
}

impl GluingMap {
    pub fn new(name: impl Into<String>, source: impl Into<ChartId>, target: impl Into<ChartId>, matrix: IntMatrix) -> Self {
        let dim = matrix.nrows();
        Self {
            name: name.into(),
            source: source.into(),
            target: target.into(),
            matrix,
            offset: vec![0.0; dim],
            sample_box: None,
        }
    }

    pub fn with_sample_box(mut self, b: Vec<(f64, f64)>) -> Self {
        self.sample_box = Some(b);
        self
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.matrix.apply(z);
        for (o, b) in out.iter_mut().zip(&self.offset) {
            *o += b;
        }
        out
    }

    pub fn is_symplectic(&self) -> bool {
        self.matrix.is_symplectic()
    }

    fn transition(&self) -> Result<TransitionMap> {
        let inv = self.matrix.symplectic_inverse().ok_or_else(|| Error::NonSymplecticMap {
            name: self.name.clone(),
        })?;
        if self.offset.iter().any(|&b| b != 0.0) {
            return Err(Error::InvalidArgument(format!("gluing `{}` has a non-zero offset", self.name)));
        }
        Ok(TransitionMap::new(
            self.name.clone(),
            self.source.clone(),
            self.target.clone(),
            Arc::new(IntLinearMap(self.matrix.clone())),
            Arc::new(IntLinearMap(inv)),
        )
        .gluing())
    }
}

fn swap_block(s: usize, sign: i64) -> IntMatrix {
    // [[0, -sign I], [sign I, 0]]
    let mut m = IntMatrix::zeros(2 * s, 2 * s);
    for i in 0..s {
        m.set(i, s + i, -sign);
        m.set(s + i, i, sign);
    }
    m
}

/// `(x, y) -> (-y, x)` from the x-branch chart to the y-branch chart.
pub fn hyperbolic_gluing() -> GluingMap {
    GluingMap::new("hyperbolic", "T*[X]", "T*[Y]", swap_block(1, 1))
}

/// `(x1, x2, xi1, xi2) -> (-xi1, -xi2, x1, x2)` from the x-plane chart to the y-plane chart.
pub fn focus_gluing() -> GluingMap {
    GluingMap::new("focus-focus", "T*[X]", "T*[Y]", swap_block(2, 1))
}

/// Gluings between every pair of distinct branch charts of a product model:
/// each differing factor is swapped by its block map, the rest is fixed.
pub fn model_gluings(model: &LocalModel) -> Vec<GluingMap> {
    let n = model.n();
    let labels = enumerate_branches(model);
    let mut out = Vec::new();
    for (ia, a) in labels.iter().enumerate() {
        for b in &labels[ia + 1..] {
            let mut m = IntMatrix::identity(2 * n);
            for (((factor, off), ca), cb) in model.factors().iter().zip(model.offsets()).zip(a.choices()).zip(b.choices()) {
                if ca == cb {
                    continue;
                }
                let s = factor.half_dim();
                let idx: Vec<usize> = (off..off + s).chain(n + off..n + off + s).collect();
                let sign = if ca.is_x_branch() { 1 } else { -1 };
                m = swap_block(s, sign).embed(2 * n, &idx).mul(&m);
            }
            out.push(GluingMap::new(format!("{a}->{b}"), a.chart_id(), b.chart_id(), m));
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct GluingCheck {
    pub name: String,
    pub source: String,
    pub target: String,
    pub symplectic_defect: i64,
    pub samples: usize,
    /// Worst `|g_i' o Phi - g_i|` per function.
    pub max_residuals: Vec<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GlueReport {
    pub tolerance: f64,
    pub gluings: Vec<GluingCheck>,
    pub atlas: AtlasReport,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct GlueOptions {
    pub samples: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for GlueOptions {
    fn default() -> Self {
        Self {
            samples: DESCENT_SAMPLES,
            tolerance: DESCENT_TOL,
            seed: sampling::DEFAULT_SEED,
        }
    }
}

/// Cotangent charts carrying `n` momentum functions each, plus the gluings
/// applied so far.
#[derive(Debug, Clone)]
pub struct MomentumSystem {
    pub name: String,
    pub n: usize,
    pub atlas: Atlas,
    pub functions: BTreeMap<ChartId, Vec<ScalarField>>,
    /// Base fields the functions were built from, when they came from fields.
    pub generators: BTreeMap<ChartId, Vec<LiftedField>>,
    pub gluings: Vec<GluingMap>,
    pub glue_report: Option<GlueReport>,
}

impl MomentumSystem {
    pub fn new(name: impl Into<String>, n: usize, atlas: Atlas) -> Self {
        Self {
            name: name.into(),
            n,
            atlas,
            functions: BTreeMap::new(),
            generators: BTreeMap::new(),
            gluings: Vec::new(),
            glue_report: None,
        }
    }

    pub fn functions_on(&self, chart: &ChartId) -> Result<&[ScalarField]> {
        self.functions
            .get(chart)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownChart(chart.to_string()))
    }

    pub fn chart(&self, id: &ChartId) -> Result<&Chart> {
        self.atlas.chart(id)
    }

    /// Adds functions built from generator fields on a cotangent chart.
    pub fn insert_generators(&mut self, chart: &Chart, fields: Vec<LiftedField>) {
        let fs = fields
            .iter()
            .map(|f| momentum_function(&f.field).restricted_to(chart).renamed(format!("g{}", f.index + 1)))
            .collect();
        self.functions.insert(chart.id.clone(), fs);
        self.generators.insert(chart.id.clone(), fields);
    }

    pub fn summary(&self) -> SystemSummary {
        SystemSummary {
            name: self.name.clone(),
            n: self.n,
            atlas: self.atlas.summary(),
            functions: self
                .functions
                .iter()
                .map(|(k, v)| (k.to_string(), v.iter().map(|f| f.name.clone()).collect()))
                .collect(),
            gluings: self
                .gluings
                .iter()
                .map(|g| GluingSummary {
                    name: g.name.clone(),
                    source: g.source.to_string(),
                    target: g.target.to_string(),
                    matrix: (0..g.matrix.nrows())
                        .map(|r| (0..g.matrix.ncols()).map(|c| g.matrix.get(r, c)).collect())
                        .collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GluingSummary {
    pub name: String,
    pub source: String,
    pub target: String,
    pub matrix: Vec<Vec<i64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemSummary {
    pub name: String,
    pub n: usize,
    pub atlas: AtlasSummary,
    pub functions: BTreeMap<String, Vec<String>>,
    pub gluings: Vec<GluingSummary>,
}

/// Un-glued cotangent charts over every branch of a local model.
pub fn local_cotangent_model(model: &LocalModel) -> Result<MomentumSystem> {
    if model.has_elliptic() {
        return Err(Error::EllipticFactorUnsupported);
    }
    let n = model.n();
    let mut atlas = Atlas::new();
    let mut pieces = Vec::new();
    for label in enumerate_branches(model) {
        // the branch chart only validates the label here
        branch_chart(model, &label, LOCAL_RADIUS)?;
        let chart = Chart::cube(label.chart_id(), format!("T* over branch {label} of {model}"), 2 * n, LOCAL_RADIUS)?
            .with_trust_radii(&vec![LOCAL_TRUST; 2 * n])?;
        atlas.add_chart(chart.clone());
        pieces.push((chart, lifted_fields(model, &label)?));
    }
    let mut sys = MomentumSystem::new(model.to_string(), n, atlas);
    for (chart, fields) in pieces {
        sys.insert_generators(&chart, fields);
    }
    Ok(sys)
}

/// Identifies charts of `pieces` through `maps`. Every map must be exactly
/// symplectic and every momentum function must descend through it.
pub fn glue(pieces: MomentumSystem, maps: Vec<GluingMap>) -> Result<MomentumSystem> {
    glue_with(pieces, maps, GlueOptions::default())
}

pub fn glue_with(mut sys: MomentumSystem, maps: Vec<GluingMap>, opts: GlueOptions) -> Result<MomentumSystem> {
    let mut checks = Vec::with_capacity(maps.len());
    for (k, m) in maps.iter().enumerate() {
        let src = sys.atlas.chart(&m.source)?.clone();
        let dst = sys.atlas.chart(&m.target)?.clone();
        if m.matrix.nrows() != src.dim() || m.matrix.ncols() != dst.dim() {
            return Err(Error::DimensionMismatch {
                expected: src.dim(),
                got: m.matrix.nrows(),
            });
        }
        let defect = m.matrix.symplectic_defect().unwrap_or(i64::MAX);
        if defect != 0 {
            return Err(Error::NonSymplecticMap { name: m.name.clone() });
        }
        let (fs, ft) = (sys.functions_on(&m.source)?, sys.functions_on(&m.target)?);
        let region = m.sample_box.clone().unwrap_or_else(|| src.sampling_bounds(Some(1.0)));
        let mut rng = sampling::rng(sampling::stream_seed(opts.seed, k as u64));
        let mut residuals = vec![0.0_f64; fs.len()];
        let mut count = 0;
        let mut tries = 0;
        while count < opts.samples && tries < 100 * opts.samples.max(1) {
            tries += 1;
            let z = src.normalized(&sampling::uniform_in_box(&mut rng, &region));
            let w = dst.normalized(&m.apply(&z));
            if !src.contains(&z) || !dst.contains(&w) {
                continue;
            }
            count += 1;
            for (i, (g, g2)) in fs.iter().zip(ft).enumerate() {
                let r = (g2.value(&w) - g.value(&z)).abs();
                let r = if r.is_nan() { f64::INFINITY } else { r };
                if r > opts.tolerance {
                    return Err(Error::MomentumMismatch {
                        gluing: m.name.clone(),
                        index: i + 1,
                        sample: z,
                        residual: r,
                    });
                }
                residuals[i] = residuals[i].max(r);
            }
        }
        if count == 0 {
            return Err(Error::InvalidArgument(format!("gluing `{}` has an empty overlap", m.name)));
        }
        checks.push(GluingCheck {
            name: m.name.clone(),
            source: m.source.to_string(),
            target: m.target.to_string(),
            symplectic_defect: defect,
            samples: count,
            max_residuals: residuals,
            passed: true,
        });
        sys.atlas.add_transition(m.transition()?)?;
    }
    sys.atlas.generate_overlap_samples(opts.seed, DEFAULT_OVERLAP_SAMPLES);
    let atlas_report = validate_atlas(&sys.atlas);
    if !atlas_report.passed {
        return Err(Error::AtlasInvalid {
            failures: atlas_report.failures(),
        });
    }
    sys.gluings.extend(maps);
    sys.glue_report = Some(GlueReport {
        tolerance: opts.tolerance,
        passed: true,
        gluings: checks,
        atlas: atlas_report,
    });
    Ok(sys)
}

/// The local model with all of its branch charts identified.
pub fn glued_local_model(model: &LocalModel) -> Result<MomentumSystem> {
    let sys = local_cotangent_model(model)?;
    glue(sys, model_gluings(model))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairCheck {
    pub i: usize,
    pub j: usize,
    pub max_abs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChartCommutation {
    pub chart: String,
    pub samples: usize,
    pub pairs: Vec<PairCheck>,
    pub max_abs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutationReport {
    pub samples_per_chart: usize,
    pub box_radius: f64,
    pub gradients: GradientMode,
    pub tolerance: f64,
    pub charts: Vec<ChartCommutation>,
    pub max_abs: f64,
    pub passed: bool,
}

pub fn verify_commutation(sys: &MomentumSystem, sample_count: usize, box_radius: f64, seed: u64) -> CommutationReport {
    verify_commutation_with(sys, sample_count, box_radius, seed, GradientMode::Analytic)
}

/// Max `|{g_i, g_j}|` over seeded samples in every chart.
pub fn verify_commutation_with(
    sys: &MomentumSystem,
    sample_count: usize,
    box_radius: f64,
    seed: u64,
    mode: GradientMode,
) -> CommutationReport {
    let tolerance = match mode {
        GradientMode::Analytic => COMMUTATION_TOL,
        GradientMode::FiniteDifference => COMMUTATION_TOL_FD,
    };
    let mut charts = Vec::new();
    for (ci, chart) in sys.atlas.charts().enumerate() {
        let Some(fs) = sys.functions.get(&chart.id) else { continue };
        let bounds = chart.sampling_bounds(Some(box_radius));
        let mut rng = sampling::rng(sampling::stream_seed(seed, ci as u64));
        let samples: Vec<Vec<f64>> = (0..sample_count)
            .map(|_| sampling::uniform_in_box(&mut rng, &bounds))
            .collect();
        let m = fs.len();
        let per_sample: Vec<Vec<f64>> = par_map(&samples, |z| {
            let grads: Vec<Vec<f64>> = fs
                .iter()
                .map(|f| match mode {
                    GradientMode::Analytic => f.gradient(z),
                    GradientMode::FiniteDifference => fd_gradient(f, z),
                })
                .collect();
            let mut out = Vec::with_capacity(m * (m.saturating_sub(1)) / 2);
            for i in 0..m {
                for j in i + 1..m {
                    let b = bracket_from_gradients(&grads[i], &grads[j]).abs();
                    out.push(if b.is_nan() { f64::INFINITY } else { b });
                }
            }
            out
        });
        let mut pairs = Vec::new();
        let mut k = 0;
        for i in 0..m {
            for j in i + 1..m {
                let max_abs = per_sample.iter().map(|v| v[k]).fold(0.0, f64::max);
                pairs.push(PairCheck { i: i + 1, j: j + 1, max_abs });
                k += 1;
            }
        }
        let max_abs = pairs.iter().map(|p| p.max_abs).fold(0.0, f64::max);
        charts.push(ChartCommutation {
            chart: chart.id.to_string(),
            samples: samples.len(),
            pairs,
            max_abs,
        });
    }
    let max_abs = charts.iter().map(|c| c.max_abs).fold(0.0, f64::max);
    CommutationReport {
        samples_per_chart: sample_count,
        box_radius,
        gradients: mode,
        tolerance,
        passed: sample_count >= 1 && max_abs <= tolerance,
        charts,
        max_abs,
    }
}

fn fd_gradient(f: &ScalarField, z: &[f64]) -> Vec<f64> {
    let j = crate::geometry::maps::fd_jacobian(|x| vec![f.value(x)], z, crate::geometry::maps::FD_STEP);
    j.row(0).iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::maps::{fd_jacobian, FD_STEP};
    use crate::normal_forms::model_functions;
    use crate::symplectic::hamiltonian_vector_field;

    fn model(s: &str) -> LocalModel {
        s.parse().unwrap()
    }

    fn label(m: &LocalModel, s: &str) -> BranchLabel {
        enumerate_branches(m).into_iter().find(|l| l.to_string() == s).unwrap()
    }

    #[test]
    fn momentum_function_values() {
        let x = VectorField::linear("c", "q d/dq", DMatrix::from_element(1, 1, 1.0));
        let g = momentum_function(&x);
        assert_eq!(g.value(&[2.0, 0.5]), 1.0);
        assert_eq!(g.value(&[2.0, 0.0]), 0.0);
        let theta = VectorField::constant("c", "d/dtheta", vec![1.0, 0.0]);
        assert_eq!(momentum_function(&theta).value(&[0.3, 0.2, 2.0, -1.0]), 2.0);
    }

    #[test]
    fn momentum_derivatives_match_finite_differences() {
        let x = VectorField::new(
            "c",
            "nonlinear",
            2,
            |q| vec![q[0] * q[1], q[0].sin()],
            |q| DMatrix::from_row_slice(2, 2, &[q[1], q[0], q[0].cos(), 0.0]),
        )
        .with_second_derivatives(|q| {
            vec![
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
                DMatrix::from_row_slice(2, 2, &[-q[0].sin(), 0.0, 0.0, 0.0]),
            ]
        });
        let g = momentum_function(&x);
        let z = [0.4, -0.3, 1.2, 0.7];
        assert!(g.gradient_fd_error(&z) < 1e-8);
        let fd = fd_jacobian(|w| g.gradient(w), &z, FD_STEP);
        assert!((g.hessian(&z) - fd).amax() < 1e-7);
    }

    #[test]
    fn lifted_fields_examples() {
        let h = model("h");
        let fx = lifted_fields(&h, &label(&h, "X")).unwrap();
        assert_eq!(fx[0].field.value(&[2.0]), vec![2.0]);
        let fy = lifted_fields(&h, &label(&h, "Y")).unwrap();
        assert_eq!(fy[0].field.value(&[2.0]), vec![-2.0]);
        let ff = model("ff");
        let f = lifted_fields(&ff, &label(&ff, "X")).unwrap();
        assert_eq!(f[1].field.value(&[1.0, 0.0]), vec![0.0, 1.0]);
        let r = model("r");
        let f = lifted_fields(&r, &label(&r, "r")).unwrap();
        assert_eq!(f[0].field.value(&[0.7]), vec![1.0]);
        assert!(matches!(
            lifted_fields(&h, &BranchLabel(vec![BranchChoice::XPlane])),
            Err(Error::UnknownLabel(_))
        ));
    }

    #[test]
    fn lifted_fields_are_pushforwards_of_hamiltonian_fields() {
        for s in ["h", "ff", "h*ff*r", "r*h*h"] {
            let m = model(s);
            let hs = model_functions(&m);
            let mut rng = sampling::rng(3);
            for l in enumerate_branches(&m) {
                let b = branch_chart(&m, &l, 1.0).unwrap();
                let fields = lifted_fields(&m, &l).unwrap();
                for _ in 0..100 {
                    let c = sampling::uniform_cube(&mut rng, m.n(), 1.0);
                    let z = b.immerse(&c);
                    for lf in &fields {
                        let xh = hamiltonian_vector_field(&hs[lf.index], &z).unwrap();
                        let pushed = b.immerse(&lf.field.value(&c));
                        for (a, e) in pushed.iter().zip(&xh) {
                            assert!((a - e).abs() <= 1e-10, "{s} {l}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn gluing_examples() {
        let h = hyperbolic_gluing();
        assert_eq!(h.apply(&[2.0, 0.5]), vec![-0.5, 2.0]);
        assert!(h.is_symplectic());
        let w = h.apply(&[2.0, 0.5]);
        assert_eq!(-w[0] * w[1], 2.0 * 0.5);

        let f = focus_gluing();
        let w = f.apply(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(w, vec![-3.0, -4.0, 1.0, 2.0]);
        assert!(f.is_symplectic());
        assert_eq!(-(w[0] * w[2] + w[1] * w[3]), 11.0);
        assert_eq!(f.matrix, IntMatrix::from_rows(&[&[0, 0, -1, 0], &[0, 0, 0, -1], &[1, 0, 0, 0], &[0, 1, 0, 0]]));
    }

    #[test]
    fn glued_single_points_are_valid() {
        let h = glued_local_model(&model("h")).unwrap();
        assert_eq!(h.atlas.charts().count(), 2);
        assert!(h.glue_report.as_ref().unwrap().passed);
        let ff = glued_local_model(&model("ff")).unwrap();
        let report = ff.glue_report.unwrap();
        assert!(report.atlas.passed);
        assert_eq!(report.gluings[0].samples, DESCENT_SAMPLES);
        assert!(report.gluings[0].max_residuals.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn product_gluings_descend_and_satisfy_cocycles() {
        let m = model("h*h*r");
        let sys = glued_local_model(&m).unwrap();
        let report = sys.glue_report.unwrap();
        assert_eq!(report.gluings.len(), 6);
        assert!(!report.atlas.cocycles.is_empty());
        assert!(report.atlas.cocycles.iter().all(|c| c.max_error == 0.0));
        for g in model_gluings(&model("h*ff")) {
            assert!(g.is_symplectic());
        }
    }

    #[test]
    fn scaled_map_is_rejected() {
        let m = model("h");
        let sys = local_cotangent_model(&m).unwrap();
        let mut bad = hyperbolic_gluing();
        bad.matrix = IntMatrix::from_rows(&[&[0, -2], &[1, 0]]);
        assert!(matches!(glue(sys, vec![bad]), Err(Error::NonSymplecticMap { .. })));
    }

    #[test]
    fn symplectic_map_breaking_descent_is_rejected() {
        let m = model("h");
        let sys = local_cotangent_model(&m).unwrap();
        let mut bad = hyperbolic_gluing();
        bad.matrix = IntMatrix::from_rows(&[&[0, 1], &[-1, 0]]);
        bad.target = label(&m, "X").chart_id();
        assert!(matches!(glue(sys, vec![bad]), Err(Error::MomentumMismatch { index: 1, .. })));
    }

    #[test]
    fn elliptic_models_are_rejected() {
        assert!(matches!(local_cotangent_model(&model("e*h")), Err(Error::EllipticFactorUnsupported)));
    }

    #[test]
    fn commutation_sweeps() {
        let h = glued_local_model(&model("h")).unwrap();
        let r = verify_commutation(&h, 10, 2.0, 1);
        assert!(r.passed && r.charts.iter().all(|c| c.pairs.is_empty()));
        for s in ["ff", "h*ff"] {
            let sys = glued_local_model(&model(s)).unwrap();
            let r = verify_commutation(&sys, 2000, 2.0, 42);
            assert!(r.passed, "{s}: {}", r.max_abs);
            let fd = verify_commutation_with(&sys, 200, 2.0, 42, GradientMode::FiniteDifference);
            assert!(fd.passed, "{s}: {}", fd.max_abs);
        }
        let hff = glued_local_model(&model("h*ff")).unwrap();
        assert_eq!(verify_commutation(&hff, 1, 2.0, 0).charts[0].pairs.len(), 3);
    }

    #[test]
    fn commutation_report_is_deterministic() {
        let sys = glued_local_model(&model("h*ff")).unwrap();
        let a = verify_commutation(&sys, 500, 2.0, 7);
        let b = verify_commutation(&sys, 500, 2.0, 7);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn momentum_functions_are_fiber_linear() {
        let sys = glued_local_model(&model("h*ff*r")).unwrap();
        let mut rng = sampling::rng(11);
        for (_, fs) in &sys.functions {
            for _ in 0..200 {
                let z = sampling::uniform_cube(&mut rng, 8, 2.0);
                for g in fs {
                    let base = g.value(&z);
                    for lambda in [-1.0, 0.0, 0.5, 2.0] {
                        let mut w = z.clone();
                        w[4..].iter_mut().for_each(|p| *p *= lambda);
                        assert!((g.value(&w) - lambda * base).abs() <= 1e-14 * (1.0 + base.abs()));
                    }
                }
            }
        }
    }
}
