//! Local normal forms of non-degenerate singularities, their classification,
//! and the branch structure of the desingularized level.
//!
//! A [`LocalModel`] is an ordered product of factors. Factor `k` owns a block
//! of base indices; phase-space coordinates are `(x_1..x_n, y_1..y_n)` with
//! `x` the positions and `y` the momenta.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::maps::{fd_jacobian, FD_STEP};
use crate::geometry::{Chart, ChartId};
use crate::sampling;
use crate::subspace::{max_principal_angle, null_space, SubspaceRep};
use crate::symplectic::{standard_j, ScalarField};

pub const EIGEN_TOL: f64 = 1e-8;
pub const CRITICAL_TOL: f64 = 1e-10;
pub const DEFAULT_TRIALS: usize = 7;
pub const MODEL_CHART: &str = "phase";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFactor {
    Regular,
    Elliptic,
    Hyperbolic,
    FocusFocus,
}

impl ModelFactor {
    /// Number of base coordinates (half the phase-space dimension).
    pub fn half_dim(self) -> usize {
        match self {
            ModelFactor::FocusFocus => 2,
            _ => 1,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            ModelFactor::Regular => "r",
            ModelFactor::Elliptic => "e",
            ModelFactor::Hyperbolic => "h",
            ModelFactor::FocusFocus => "ff",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LocalModel {
    factors: Vec<ModelFactor>,
}

impl LocalModel {
    pub fn new(factors: Vec<ModelFactor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Parse {
                input: String::new(),
                reason: "a model needs at least one factor".into(),
            });
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[ModelFactor] {
        &self.factors
    }

    pub fn n(&self) -> usize {
        self.factors.iter().map(|f| f.half_dim()).sum()
    }

    /// First base index of each factor.
    pub fn offsets(&self) -> Vec<usize> {
        self.factors
            .iter()
            .scan(0, |acc, f| {
                let o = *acc;
                *acc += f.half_dim();
                Some(o)
            })
            .collect()
    }

    pub fn count(&self, kind: ModelFactor) -> usize {
        self.factors.iter().filter(|&&f| f == kind).count()
    }

    pub fn has_elliptic(&self) -> bool {
        self.count(ModelFactor::Elliptic) > 0
    }

    /// The type the normal form is built to have at the origin.
    pub fn williamson(&self) -> WilliamsonType {
        WilliamsonType {
            k_e: self.count(ModelFactor::Elliptic),
            k_h: self.count(ModelFactor::Hyperbolic),
            k_f: self.count(ModelFactor::FocusFocus),
        }
    }

    /// Leaf type of the origin: regular factors contribute open directions.
    pub fn origin_leaf_type(&self) -> LeafType {
        let w = self.williamson();
        LeafType {
            k_e: w.k_e,
            k_h: w.k_h,
            k_f: w.k_f,
            c: 0,
            o: self.count(ModelFactor::Regular),
        }
    }
}

impl FromStr for LocalModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = |reason: String| Error::Parse {
            input: s.to_string(),
            reason,
        };
        if s.trim().is_empty() {
            return Err(err("empty model string".into()));
        }
        let factors = s
            .split('*')
            .map(|tok| match tok.trim() {
                "r" => Ok(ModelFactor::Regular),
                "e" => Ok(ModelFactor::Elliptic),
                "h" => Ok(ModelFactor::Hyperbolic),
                "ff" => Ok(ModelFactor::FocusFocus),
                other => Err(err(format!("unknown factor `{other}` (expected r, e, h or ff)"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(factors)
    }
}

impl fmt::Display for LocalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.factors.iter().map(|k| k.symbol()).collect();
        f.write_str(&parts.join("*"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WilliamsonType {
    pub k_e: usize,
    pub k_h: usize,
    pub k_f: usize,
}

impl WilliamsonType {
    pub fn new(k_e: usize, k_h: usize, k_f: usize) -> Self {
        Self { k_e, k_h, k_f }
    }

    pub fn fits(&self, n: usize) -> bool {
        self.k_e + self.k_h + 2 * self.k_f <= n
    }
}

impl fmt::Display for WilliamsonType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.k_e, self.k_h, self.k_f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafType {
    pub k_e: usize,
    pub k_h: usize,
    pub k_f: usize,
    pub c: usize,
    pub o: usize,
}

impl LeafType {
    pub fn new(k_e: usize, k_h: usize, k_f: usize, c: usize, o: usize) -> Self {
        Self { k_e, k_h, k_f, c, o }
    }

    pub fn total(&self) -> usize {
        self.k_e + self.k_h + 2 * self.k_f + self.c + self.o
    }
}

pub fn leaf_type_valid(lt: &LeafType, n: usize) -> bool {
    lt.total() == n
}

fn x_index(i: usize) -> usize {
    i
}

fn y_index(n: usize, i: usize) -> usize {
    n + i
}

/// The normal-form functions `h_1..h_n` on `R^{2n}`.
pub fn model_functions(model: &LocalModel) -> Vec<ScalarField> {
    let n = model.n();
    let dim = 2 * n;
    let mut out = Vec::with_capacity(n);
    for (factor, off) in model.factors().iter().zip(model.offsets()) {
        let (x, y) = (x_index(off), y_index(n, off));
        match factor {
            ModelFactor::Regular => {
                let mut lin = vec![0.0; dim];
                lin[y] = 1.0;
                out.push(ScalarField::quadratic(MODEL_CHART, format!("h{} = y", off + 1), lin, DMatrix::zeros(dim, dim)));
            }
            ModelFactor::Elliptic => {
                let mut a = DMatrix::zeros(dim, dim);
                a[(x, x)] = 1.0;
                a[(y, y)] = 1.0;
                out.push(ScalarField::quadratic(MODEL_CHART, format!("h{} = x^2 + y^2", off + 1), vec![0.0; dim], a));
            }
            ModelFactor::Hyperbolic => {
                let mut a = DMatrix::zeros(dim, dim);
                a[(x, y)] = 1.0;
                out.push(ScalarField::quadratic(MODEL_CHART, format!("h{} = xy", off + 1), vec![0.0; dim], a));
            }
            ModelFactor::FocusFocus => {
                let (x2, y2) = (x_index(off + 1), y_index(n, off + 1));
                let mut a = DMatrix::zeros(dim, dim);
                a[(x, y)] = 1.0;
                a[(x2, y2)] = 1.0;
                out.push(ScalarField::quadratic(
                    MODEL_CHART,
                    format!("h{} = x1 y1 + x2 y2", off + 1),
                    vec![0.0; dim],
                    a,
                ));
                let mut b = DMatrix::zeros(dim, dim);
                b[(x, y2)] = 1.0;
                b[(y, x2)] = -1.0;
                out.push(ScalarField::quadratic(
                    MODEL_CHART,
                    format!("h{} = x1 y2 - y1 x2", off + 2),
                    vec![0.0; dim],
                    b,
                ));
            }
        }
    }
    out
}

/// Result of classifying a point of a system of commuting functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PointClassification {
    /// Rank of the differentials at the point.
    pub rank: usize,
    pub williamson: WilliamsonType,
    pub agreeing: usize,
    pub trials: usize,
}

/// Eigenvalue pattern of `J Hess` with a given number of expected zero eigenvalues.
fn spectrum_pattern(a: &DMatrix<f64>, zeros_expected: usize) -> Option<WilliamsonType> {
    let eig = a.clone().complex_eigenvalues();
    let scale = a.amax().max(1.0);
    let tol = EIGEN_TOL * scale;
    let (mut zero, mut real, mut imag, mut cplx) = (0, 0, 0, 0);
    for l in eig.iter() {
        match (l.re.abs() <= tol, l.im.abs() <= tol) {
            (true, true) => zero += 1,
            (false, true) => real += 1,
            (true, false) => imag += 1,
            (false, false) => cplx += 1,
        }
    }
    if zero != zeros_expected || real % 2 != 0 || imag % 2 != 0 || cplx % 4 != 0 {
        return None;
    }
    Some(WilliamsonType::new(imag / 2, real / 2, cplx / 4))
}

fn gradient_matrix(functions: &[ScalarField], z: &[f64]) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = functions.iter().map(|f| f.gradient(z)).collect();
    DMatrix::from_fn(rows.len(), z.len(), |r, c| rows[r][c])
}

/// Williamson type of a point of arbitrary rank: random combinations of the
/// functions whose differentials cancel at `z` are linearised, and the
/// eigenvalue pattern of `J Hess` is majority-voted over `trials`.
pub fn classify_point(functions: &[ScalarField], z: &[f64], trials: usize, seed: u64) -> Result<PointClassification> {
    if functions.is_empty() {
        return Err(Error::InvalidArgument("no functions to classify".into()));
    }
    let dim = z.len();
    if dim % 2 != 0 || functions.iter().any(|f| f.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: functions[0].dim(),
            got: dim,
        });
    }
    let trials = trials.max(1);
    let n = functions.len();
    let g = gradient_matrix(functions, z);
    let svd = g.clone().svd(true, false);
    let u = svd.u.expect("svd requested U");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max).max(1.0);
    let critical_dirs: Vec<DVector<f64>> = (0..n)
        .filter(|&i| i >= svd.singular_values.len() || svd.singular_values[i] <= CRITICAL_TOL * smax)
        .map(|i| u.column(i).into_owned())
        .collect();
    let rank = n - critical_dirs.len();
    if critical_dirs.is_empty() {
        return Ok(PointClassification {
            rank,
            williamson: WilliamsonType::new(0, 0, 0),
            agreeing: trials,
            trials,
        });
    }
    let j = standard_j(dim / 2);
    let hessians: Vec<DMatrix<f64>> = functions.iter().map(|f| f.hessian(z)).collect();
    let mut rng = sampling::rng(seed);
    let mut votes: BTreeMap<Option<WilliamsonType>, usize> = BTreeMap::new();
    for _ in 0..trials {
        let mut coeffs = DVector::zeros(n);
        for dir in &critical_dirs {
            let w: f64 = rng.gen_range(0.5..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            coeffs += dir * w;
        }
        let mut hess = DMatrix::zeros(dim, dim);
        for (h, c) in hessians.iter().zip(coeffs.iter()) {
            hess += h * *c;
        }
        let pattern = spectrum_pattern(&(&j * hess), 2 * rank);
        *votes.entry(pattern).or_default() += 1;
    }
    let (best, count) = votes
        .iter()
        .filter_map(|(k, v)| k.map(|w| (w, *v)))
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .unwrap_or((WilliamsonType::new(0, 0, 0), 0));
    if 2 * count <= trials {
        return Err(Error::DegenerateSpectrum {
            agreeing: count,
            trials,
        });
    }
    Ok(PointClassification {
        rank,
        williamson: best,
        agreeing: count,
        trials,
    })
}

/// Williamson type of a common critical point of all `functions`.
pub fn classify_fixed_point(
    functions: &[ScalarField],
    z: &[f64],
    trials: usize,
    seed: u64,
) -> Result<PointClassification> {
    for (i, f) in functions.iter().enumerate() {
        let norm = f.gradient(z).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if norm > CRITICAL_TOL {
            return Err(Error::NotCritical { index: i + 1, norm });
        }
    }
    classify_point(functions, z, trials, seed)
}

/// Choice of level branch for one factor of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BranchChoice {
    /// Regular factor: the level `y = 0` is the x-line.
    Line,
    /// Elliptic factor: the level is a point.
    Point,
    XAxis,
    YAxis,
    XPlane,
    YPlane,
}

impl BranchChoice {
    fn letter(self) -> &'static str {
        match self {
            BranchChoice::Line => "r",
            BranchChoice::Point => "o",
            BranchChoice::XAxis | BranchChoice::XPlane => "X",
            BranchChoice::YAxis | BranchChoice::YPlane => "Y",
        }
    }

    fn choices(factor: ModelFactor) -> &'static [BranchChoice] {
        match factor {
            ModelFactor::Regular => &[BranchChoice::Line],
            ModelFactor::Elliptic => &[BranchChoice::Point],
            ModelFactor::Hyperbolic => &[BranchChoice::XAxis, BranchChoice::YAxis],
            ModelFactor::FocusFocus => &[BranchChoice::XPlane, BranchChoice::YPlane],
        }
    }

    /// The flipped choice on the same factor, if the factor has two branches.
    pub fn partner(self) -> Option<BranchChoice> {
        match self {
            BranchChoice::XAxis => Some(BranchChoice::YAxis),
            BranchChoice::YAxis => Some(BranchChoice::XAxis),
            BranchChoice::XPlane => Some(BranchChoice::YPlane),
            BranchChoice::YPlane => Some(BranchChoice::XPlane),
            _ => None,
        }
    }

    pub fn is_x_branch(self) -> bool {
        matches!(self, BranchChoice::XAxis | BranchChoice::XPlane | BranchChoice::Line)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BranchLabel(pub Vec<BranchChoice>);

impl fmt::Display for BranchLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.0 {
            f.write_str(c.letter())?;
        }
        Ok(())
    }
}

impl BranchLabel {
    pub fn choices(&self) -> &[BranchChoice] {
        &self.0
    }

    pub fn chart_id(&self) -> ChartId {
        ChartId(format!("T*[{self}]"))
    }

    pub fn belongs_to(&self, model: &LocalModel) -> bool {
        self.0.len() == model.factors().len()
            && self
                .0
                .iter()
                .zip(model.factors())
                .all(|(c, f)| BranchChoice::choices(*f).contains(c))
    }
}

/// All `2^(h+f)` branch labels, lexicographically ordered.
pub fn enumerate_branches(model: &LocalModel) -> Vec<BranchLabel> {
    let mut labels = vec![Vec::new()];
    for &factor in model.factors() {
        labels = labels
            .into_iter()
            .flat_map(|prefix: Vec<BranchChoice>| {
                BranchChoice::choices(factor).iter().map(move |&c| {
                    let mut l = prefix.clone();
                    l.push(c);
                    l
                })
            })
            .collect();
    }
    let mut out: Vec<BranchLabel> = labels.into_iter().map(BranchLabel).collect();
    out.sort();
    out
}

/// A branch of the desingularized level through the model singularity: an
/// n-dimensional chart, its (linear) immersion into phase space, and the tangent plane there.
#[derive(Debug, Clone)]
pub struct BranchChart {
    pub label: BranchLabel,
    pub chart: Chart,
    /// Phase-space index that each chart coordinate is sent to.
    pub immersion_indices: Vec<usize>,
    pub plane: SubspaceRep,
}

impl BranchChart {
    pub fn immerse(&self, coords: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.plane.ambient_dim()];
        for (&i, &c) in self.immersion_indices.iter().zip(coords) {
            z[i] = c;
        }
        z
    }
}

/// Phase-space indices that chart coordinates map to under a branch label.
pub(crate) fn branch_indices(model: &LocalModel, label: &BranchLabel) -> Vec<usize> {
    let n = model.n();
    let mut idx = Vec::with_capacity(n);
    for ((factor, off), choice) in model.factors().iter().zip(model.offsets()).zip(label.choices()) {
        for k in 0..factor.half_dim() {
            let i = off + k;
            idx.push(if choice.is_x_branch() { x_index(i) } else { y_index(n, i) });
        }
    }
    idx
}

pub fn branch_chart(model: &LocalModel, label: &BranchLabel, radius: f64) -> Result<BranchChart> {
    if !label.belongs_to(model) {
        return Err(Error::UnknownLabel(label.to_string()));
    }
    if model.has_elliptic() {
        return Err(Error::EllipticFactorUnsupported);
    }
    let n = model.n();
    let idx = branch_indices(model, label);
    let chart = Chart::cube(ChartId(format!("L[{label}]")), format!("branch {label} of {model}"), n, radius)?;
    Ok(BranchChart {
        label: label.clone(),
        chart,
        plane: SubspaceRep::coordinate(2 * n, &idx),
        immersion_indices: idx,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TangentSample {
    pub t: f64,
    /// Max principal angle between the pushed-forward chart frame and the limit plane.
    pub chart_angle: f64,
    /// Max principal angle between ker dH at the point and the limit plane.
    pub kernel_angle: f64,
    /// Per-factor angles of the chart frame.
    pub factor_angles: Vec<f64>,
    /// max |h_i(j(t u))|.
    pub level_residual: f64,
}

impl TangentSample {
    pub fn angle(&self) -> f64 {
        self.chart_angle.max(self.kernel_angle)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TangentLimitReport {
    pub label: String,
    pub samples: Vec<TangentSample>,
    pub final_angle: f64,
    pub monotone: bool,
    pub passed: bool,
}

pub const TANGENT_LIMIT_TOL: f64 = 1e-4;
/// Round-off slack when testing that angles do not increase.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Tangent planes of the level at the regular points `j(t u)` along a branch,
/// compared with the branch's limit plane at the singular point.
pub fn tangent_plane_limit(model: &LocalModel, label: &BranchLabel, t_sequence: &[f64]) -> Result<TangentLimitReport> {
    if t_sequence.is_empty()
        || t_sequence.iter().any(|&t| !(t > 0.0) || !t.is_finite())
        || t_sequence.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::SequenceInvalid);
    }
    let branch = branch_chart(model, label, 2.0 * t_sequence[0].max(1.0))?;
    let n = model.n();
    let funcs = model_functions(model);
    let u = vec![1.0 / (n as f64).sqrt(); n];
    let factor_rows: Vec<Vec<usize>> = model
        .factors()
        .iter()
        .zip(model.offsets())
        .map(|(f, off)| {
            (off..off + f.half_dim())
                .flat_map(|i| [x_index(i), y_index(n, i)])
                .collect()
        })
        .collect();

    let mut samples = Vec::with_capacity(t_sequence.len());
    for &t in t_sequence {
        let c: Vec<f64> = u.iter().map(|v| v * t).collect();
        let dj = fd_jacobian(|x| branch.immerse(x), &c, FD_STEP.min(t * 1e-3));
        let frame = SubspaceRep::span_of(dj)?;
        let chart_angle = max_principal_angle(&frame, &branch.plane)?;

        let z = branch.immerse(&c);
        let level_residual = funcs.iter().map(|h| h.value(&z).abs()).fold(0.0, f64::max);
        let grads = gradient_matrix(&funcs, &z);
        let kernel = null_space(&grads, 1e-12).ok_or(Error::SequenceInvalid)?;
        let kernel_angle = if kernel.dim() == n {
            max_principal_angle(&kernel, &branch.plane)?
        } else {
            f64::INFINITY
        };

        let factor_angles = factor_rows
            .iter()
            .map(|rows| match (frame.project(rows), branch.plane.project(rows)) {
                (Some(a), Some(b)) if a.dim() == b.dim() => max_principal_angle(&a, &b).unwrap_or(f64::INFINITY),
                _ => f64::INFINITY,
            })
            .collect();
        samples.push(TangentSample {
            t,
            chart_angle,
            kernel_angle,
            factor_angles,
            level_residual,
        });
    }
    let final_angle = samples.last().map_or(f64::INFINITY, |s| s.angle());
    let monotone = samples
        .windows(2)
        .all(|w| w[1].angle() <= w[0].angle() + MONOTONE_SLACK);
    Ok(TangentLimitReport {
        label: label.to_string(),
        passed: final_angle <= TANGENT_LIMIT_TOL && monotone,
        samples,
        final_angle,
        monotone,
    })
}
