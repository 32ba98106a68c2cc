//! A system on a neighbourhood of the zero section of `T*S^2` whose singular
//! level carries one focus-focus point (the glued poles) and one circle of
//! hyperbolic points (the glued latitudes `phi = +-pi/4`).
//!
//! Base charts: polar `(theta, phi)` with latitude `phi`, the two bands
//! `u = phi + pi/4`, `u = phi - pi/4`, and cartesian `(x1, x2) = cos(phi) (cos theta, sin theta)`
//! at each pole. Fibre coordinates are the canonical lifts.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI, TAU};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::cotangent::{glue_with, GlueOptions, GluingMap, LiftedField, MomentumSystem};
use crate::dynamics::{integrate_flow, differential_rank};
use crate::error::{Error, Result};
use crate::exact::IntMatrix;
use crate::geometry::maps::{AffineMap, BaseMap, CotangentLift, IdentityMap};
use crate::geometry::{Atlas, Axis, Chart, ChartId, PointRef, TransitionMap};
use crate::normal_forms::{classify_point, leaf_type_valid, LeafType, WilliamsonType, DEFAULT_TRIALS};
use crate::parallel::par_map;
use crate::profile::BlendedProfile;
use crate::symplectic::VectorField;

pub const SOUTH: &str = "T*S";
pub const NORTH: &str = "T*N";
pub const POLAR_A: &str = "T*A";
pub const POLAR_B: &str = "T*B";
pub const BAND_1: &str = "T*V1";
pub const BAND_2: &str = "T*V2";

/// Latitude profile `h(phi)` of the field `Y = h(phi) d/dphi`.
#[derive(Debug, Clone)]
pub struct LatitudeProfile {
    pub epsilon: f64,
    profile: BlendedProfile,
}

fn south_expr(phi: f64) -> [f64; 3] {
    let (s, c) = phi.sin_cos();
    [-c / s, 1.0 / (s * s), -2.0 * c / (s * s * s)]
}

fn north_expr(phi: f64) -> [f64; 3] {
    let (s, c) = phi.sin_cos();
    [c / s, -1.0 / (s * s), 2.0 * c / (s * s * s)]
}

fn band1_expr(phi: f64) -> [f64; 3] {
    [-(phi + FRAC_PI_4), -1.0, 0.0]
}

fn band2_expr(phi: f64) -> [f64; 3] {
    [phi - FRAC_PI_4, 1.0, 0.0]
}

pub fn check_epsilon(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < FRAC_PI_8 {
        Ok(())
    } else {
        Err(Error::EpsilonOutOfRange(eps))
    }
}

impl LatitudeProfile {
    pub fn value(&self, phi: f64) -> f64 {
        self.profile.value(phi)
    }

    pub fn derivative(&self, phi: f64) -> f64 {
        self.profile.derivative(phi)
    }

    pub fn second_derivative(&self, phi: f64) -> f64 {
        self.profile.second_derivative(phi)
    }

    pub fn eval(&self, phi: f64) -> [f64; 3] {
        self.profile.eval(phi)
    }

    pub fn seams(&self) -> Vec<f64> {
        self.profile.seams()
    }

    /// Rows `(phi, h, h')` on a uniform grid over `[-pi/2, pi/2]`.
    pub fn table(&self, samples: usize) -> Vec<[f64; 3]> {
        let samples = samples.max(2);
        (0..samples)
            .map(|k| {
                let phi = if k == samples - 1 {
                    FRAC_PI_2
                } else {
                    -FRAC_PI_2 + PI * k as f64 / (samples - 1) as f64
                };
                let [h, d, _] = self.eval(phi);
                [phi, h, d]
            })
            .collect()
    }
}

pub fn build_profile(eps: f64) -> Result<LatitudeProfile> {
    check_epsilon(eps)?;
    let profile = BlendedProfile::new()
        .exact(-FRAC_PI_2, -FRAC_PI_2 + eps, south_expr)
        .blend(-FRAC_PI_2 + eps, -FRAC_PI_4 - eps, south_expr, band1_expr)
        .exact(-FRAC_PI_4 - eps, -FRAC_PI_4 + eps, band1_expr)
        .blend(-FRAC_PI_4 + eps, FRAC_PI_4 - eps, band1_expr, band2_expr)
        .exact(FRAC_PI_4 - eps, FRAC_PI_4 + eps, band2_expr)
        .blend(FRAC_PI_4 + eps, FRAC_PI_2 - eps, band2_expr, north_expr)
        .exact(FRAC_PI_2 - eps, FRAC_PI_2, north_expr)
        .pin_zero(-FRAC_PI_2)
        .pin_zero(FRAC_PI_2);
    Ok(LatitudeProfile { epsilon: eps, profile })
}

/// `(theta, phi) -> cos(phi) (cos theta, sin theta)` near one pole.
#[derive(Debug, Clone, Copy)]
pub struct PolarToPole {
    pub north: bool,
}

impl BaseMap for PolarToPole {
    fn dim(&self) -> usize {
        2
    }

    fn apply(&self, q: &[f64]) -> Vec<f64> {
        let (st, ct) = q[0].sin_cos();
        let c = q[1].cos();
        vec![c * ct, c * st]
    }

    fn inverse(&self, x: &[f64]) -> Vec<f64> {
        let r = x[0].hypot(x[1]).min(1.0);
        let theta = x[1].atan2(x[0]).rem_euclid(TAU);
        let phi = if self.north { r.acos() } else { -r.acos() };
        vec![theta, phi]
    }

    fn jacobian(&self, q: &[f64]) -> DMatrix<f64> {
        let (st, ct) = q[0].sin_cos();
        let (sp, cp) = q[1].sin_cos();
        DMatrix::from_row_slice(2, 2, &[-cp * st, -sp * ct, cp * ct, -sp * st])
    }

    fn jacobian_derivatives(&self, q: &[f64]) -> Vec<DMatrix<f64>> {
        let (st, ct) = q[0].sin_cos();
        let (sp, cp) = q[1].sin_cos();
        vec![
            DMatrix::from_row_slice(2, 2, &[-cp * ct, sp * st, -cp * st, -sp * ct]),
            DMatrix::from_row_slice(2, 2, &[sp * st, -cp * ct, -sp * ct, -cp * st]),
        ]
    }
}

/// Half-width of the pole charts, base and fibre.
pub fn pole_radius(eps: f64) -> f64 {
    0.5 * eps.sin()
}

fn pole_chart(id: &str, label: &str, eps: f64) -> Result<Chart> {
    let a = pole_radius(eps);
    Chart::cube(id, label, 4, a)?.with_trust_radii(&[0.8 * a, 0.8 * a, 0.5 * a, 0.5 * a])
}

fn polar_chart(id: &str, label: &str, phi: (f64, f64), trust_phi: (f64, f64), eps: f64) -> Result<Chart> {
    Chart::new(
        id,
        label,
        vec![Axis::periodic(0.0, TAU), Axis::open(phi.0, phi.1), Axis::symmetric(1.0), Axis::symmetric(eps)],
    )?
    .with_trust(vec![(0.0, TAU), trust_phi, (-0.9, 0.9), (-0.4 * eps, 0.4 * eps)])
}

fn band_chart(id: &str, label: &str, eps: f64) -> Result<Chart> {
    Chart::new(
        id,
        label,
        vec![Axis::periodic(0.0, TAU), Axis::symmetric(eps), Axis::symmetric(1.0), Axis::symmetric(eps)],
    )?
    .with_trust(vec![(0.0, TAU), (-0.9 * eps, 0.9 * eps), (-0.9, 0.9), (-0.5 * eps, 0.5 * eps)])
}

fn polar_generators(chart: &ChartId, profile: &LatitudeProfile) -> Vec<LiftedField> {
    let (p1, p2, p3) = (profile.clone(), profile.clone(), profile.clone());
    let y = VectorField::new(
        chart.clone(),
        "h(phi) d/dphi",
        2,
        move |q| vec![0.0, p1.value(q[1])],
        move |q| DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, p2.derivative(q[1])]),
    )
    .with_second_derivatives(move |q| {
        vec![
            DMatrix::zeros(2, 2),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, p3.second_derivative(q[1])]),
        ]
    });
    vec![
        LiftedField {
            index: 0,
            field: VectorField::constant(chart.clone(), "d/dtheta", vec![1.0, 0.0]),
        },
        LiftedField { index: 1, field: y },
    ]
}

fn linear_generators(chart: &ChartId, rotation: DMatrix<f64>, radial: DMatrix<f64>, names: [&str; 2]) -> Vec<LiftedField> {
    vec![
        LiftedField {
            index: 0,
            field: VectorField::linear(chart.clone(), names[0], rotation),
        },
        LiftedField {
            index: 1,
            field: VectorField::linear(chart.clone(), names[1], radial),
        },
    ]
}

fn lift_transition(name: &str, from: &str, to: &str, base: PolarToPole) -> TransitionMap {
    let lift = CotangentLift::new(Arc::new(base));
    let inv = lift.inverse();
    TransitionMap::new(name, from, to, Arc::new(lift), Arc::new(inv))
}

fn shift_transition(name: &str, from: &str, to: &str, shift: f64) -> TransitionMap {
    TransitionMap::new(
        name,
        from,
        to,
        Arc::new(AffineMap::translation(vec![0.0, shift, 0.0, 0.0])),
        Arc::new(AffineMap::translation(vec![0.0, -shift, 0.0, 0.0])),
    )
}

/// Cotangent charts with `f = <d/dtheta, p>` and `g = <h(phi) d/dphi, p>`, before any gluing.
pub fn build_sphere_system(eps: f64) -> Result<MomentumSystem> {
    let profile = build_profile(eps)?;
    let a = pole_radius(eps);
    let south = pole_chart(SOUTH, "T* near the south pole", eps)?;
    let north = pole_chart(NORTH, "T* near the north pole", eps)?;
    let pa = polar_chart(
        POLAR_A,
        "T* polar, southern cap to pi/8",
        (-FRAC_PI_2 + 0.25 * eps, FRAC_PI_8),
        (-FRAC_PI_2 + 0.3 * eps, FRAC_PI_8 / 2.0),
        eps,
    )?;
    let pb = polar_chart(
        POLAR_B,
        "T* polar, -pi/8 to northern cap",
        (-FRAC_PI_8, FRAC_PI_2 - 0.25 * eps),
        (-FRAC_PI_8 / 2.0, FRAC_PI_2 - 0.3 * eps),
        eps,
    )?;
    let v1 = band_chart(BAND_1, "T* band u = phi + pi/4", eps)?;
    let v2 = band_chart(BAND_2, "T* band u = phi - pi/4", eps)?;

    let mut atlas = Atlas::new();
    for c in [&south, &north, &pa, &pb, &v1, &v2] {
        atlas.add_chart(c.clone());
    }
    let collar = |lo: f64, hi: f64| {
        vec![
            (0.0, TAU),
            (lo, hi),
            (-0.3 * a * (0.25 * eps).sin(), 0.3 * a * (0.25 * eps).sin()),
            (-0.3 * a, 0.3 * a),
        ]
    };
    atlas.add_transition(
        lift_transition("A->S", POLAR_A, SOUTH, PolarToPole { north: false })
            .with_sample_region(collar(-FRAC_PI_2 + 0.25 * eps, -FRAC_PI_2 + 0.5 * eps)),
    )?;
    atlas.add_transition(
        lift_transition("B->N", POLAR_B, NORTH, PolarToPole { north: true })
            .with_sample_region(collar(FRAC_PI_2 - 0.5 * eps, FRAC_PI_2 - 0.25 * eps)),
    )?;
    let full_fibre = |lo: f64, hi: f64| vec![(0.0, TAU), (lo, hi), (-1.0, 1.0), (-eps, eps)];
    atlas.add_transition(
        shift_transition("A->V1", POLAR_A, BAND_1, FRAC_PI_4).with_sample_region(full_fibre(-FRAC_PI_4 - eps, -FRAC_PI_4 + eps)),
    )?;
    atlas.add_transition(
        shift_transition("B->V2", POLAR_B, BAND_2, -FRAC_PI_4).with_sample_region(full_fibre(FRAC_PI_4 - eps, FRAC_PI_4 + eps)),
    )?;
    atlas.add_transition(
        TransitionMap::new("A->B", POLAR_A, POLAR_B, Arc::new(IdentityMap(4)), Arc::new(IdentityMap(4)))
            .with_sample_region(full_fibre(-FRAC_PI_8, FRAC_PI_8)),
    )?;

    let rot = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let mut sys = MomentumSystem::new(format!("sphere(eps={eps})"), 2, atlas);
    sys.insert_generators(
        &south,
        linear_generators(&south.id, rot.clone(), DMatrix::identity(2, 2), ["-x2 d/dx1 + x1 d/dx2", "x1 d/dx1 + x2 d/dx2"]),
    );
    sys.insert_generators(
        &north,
        linear_generators(&north.id, rot, -DMatrix::identity(2, 2), ["-x2 d/dx1 + x1 d/dx2", "-x1 d/dx1 - x2 d/dx2"]),
    );
    sys.insert_generators(&pa, polar_generators(&pa.id, &profile));
    sys.insert_generators(&pb, polar_generators(&pb.id, &profile));
    let theta = |c: &Chart| VectorField::constant(c.id.clone(), "d/dtheta", vec![1.0, 0.0]);
    for (c, s, name) in [(&v1, -1.0, "-u d/du"), (&v2, 1.0, "u d/du")] {
        sys.insert_generators(
            c,
            vec![
                LiftedField { index: 0, field: theta(c) },
                LiftedField {
                    index: 1,
                    field: VectorField::linear(c.id.clone(), name, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, s])),
                },
            ],
        );
    }
    Ok(sys)
}

/// `(x1, x2, y1, y2) -> (-y1, -y2, x1, x2)` from the south to the north pole chart.
pub fn pole_gluing() -> GluingMap {
    GluingMap::new(
        "pole",
        SOUTH,
        NORTH,
        IntMatrix::from_rows(&[&[0, 0, -1, 0], &[0, 0, 0, -1], &[1, 0, 0, 0], &[0, 1, 0, 0]]),
    )
}

/// `(theta, u, Theta, Phi) -> (theta, Phi, Theta, -u)` from band 1 to band 2.
pub fn band_gluing() -> GluingMap {
    GluingMap::new(
        "band",
        BAND_1,
        BAND_2,
        IntMatrix::from_rows(&[&[1, 0, 0, 0], &[0, 0, 0, 1], &[0, 0, 1, 0], &[0, -1, 0, 0]]),
    )
}

pub fn build_glued_sphere_system(eps: f64) -> Result<MomentumSystem> {
    build_glued_sphere_system_with(eps, GlueOptions::default())
}

pub fn build_glued_sphere_system_with(eps: f64, opts: GlueOptions) -> Result<MomentumSystem> {
    glue_with(build_sphere_system(eps)?, vec![pole_gluing(), band_gluing()], opts)
}

/// A point of the sphere (with fibre coordinates in a polar or band chart,
/// zero fibre at the poles) in the chart that suits it best.
pub fn sphere_point(eps: f64, theta: f64, phi: f64) -> PointRef {
    let a = pole_radius(eps);
    let theta = theta.rem_euclid(TAU);
    if phi.abs() == FRAC_PI_2 {
        let id = if phi < 0.0 { SOUTH } else { NORTH };
        return PointRef::new(id, vec![0.0; 4]);
    }
    let r = phi.cos();
    if r < 0.5 * a {
        let id = if phi < 0.0 { SOUTH } else { NORTH };
        let (s, c) = theta.sin_cos();
        return PointRef::new(id, vec![r * c, r * s, 0.0, 0.0]);
    }
    if (phi + FRAC_PI_4).abs() < 0.5 * eps {
        return PointRef::new(BAND_1, vec![theta, phi + FRAC_PI_4, 0.0, 0.0]);
    }
    if (phi - FRAC_PI_4).abs() < 0.5 * eps {
        return PointRef::new(BAND_2, vec![theta, phi - FRAC_PI_4, 0.0, 0.0]);
    }
    PointRef::new(if phi < 0.0 { POLAR_A } else { POLAR_B }, vec![theta, phi, 0.0, 0.0])
}

/// Latitude grid with `4 * resolution` steps containing `0, +-pi/4, +-pi/2` exactly.
pub fn latitude_grid(resolution: usize) -> Vec<f64> {
    let m = resolution.max(1);
    (0..=4 * m)
        .map(|k| match k {
            0 => -FRAC_PI_2,
            k if k == m => -FRAC_PI_4,
            k if k == 2 * m => 0.0,
            k if k == 3 * m => FRAC_PI_4,
            k if k == 4 * m => FRAC_PI_2,
            k => -FRAC_PI_2 + PI * k as f64 / (4 * m) as f64,
        })
        .collect()
}

/// Latitudes where the profile is required to vanish.
pub const PROFILE_ZEROS: [f64; 4] = [-FRAC_PI_2, -FRAC_PI_4, FRAC_PI_4, FRAC_PI_2];

#[derive(Debug, Clone, Serialize)]
pub struct ProfileZeroCheck {
    pub step: f64,
    pub margin: f64,
    pub floor: f64,
    /// `h` is exactly zero at every entry of [`PROFILE_ZEROS`].
    pub exact_zeros: bool,
    pub points_checked: usize,
    /// Smallest `|h|` over grid points at least `margin` away from the zeros.
    pub min_abs_away: f64,
    pub argmin: f64,
    /// Grid points away from the zeros where the sign differs from `+, -, +`.
    pub sign_errors: usize,
    pub passed: bool,
}

/// Checks the zero set of `h` on the grid `-pi/2 + k step`.
pub fn check_profile_zeros(h: &LatitudeProfile, step: f64, margin: f64, floor: f64) -> ProfileZeroCheck {
    let exact_zeros = PROFILE_ZEROS.iter().all(|&z| h.value(z) == 0.0);
    let (mut min_abs_away, mut argmin) = (f64::INFINITY, f64::NAN);
    let (mut points_checked, mut sign_errors) = (0, 0);
    let count = (PI / step).floor() as usize;
    for k in 0..=count {
        let phi = -FRAC_PI_2 + step * k as f64;
        if PROFILE_ZEROS.iter().any(|z| (phi - z).abs() < margin) {
            continue;
        }
        points_checked += 1;
        let v = h.value(phi);
        if v.abs() < min_abs_away {
            min_abs_away = v.abs();
            argmin = phi;
        }
        let expected = if phi.abs() > FRAC_PI_4 { 1.0 } else { -1.0 };
        if v.signum() != expected {
            sign_errors += 1;
        }
    }
    ProfileZeroCheck {
        step,
        margin,
        floor,
        exact_zeros,
        points_checked,
        min_abs_away,
        argmin,
        sign_errors,
        passed: exact_zeros && sign_errors == 0 && min_abs_away >= floor,
    }
}

/// A regular point of the sphere system with non-zero fibre, well inside `T*B`.
pub fn regular_point(eps: f64) -> PointRef {
    PointRef::new(POLAR_B, vec![0.3, 0.05, 0.5, 0.1 * eps])
}

/// A regular point whose level is small enough to close up inside the
/// fibre boxes (its torus passes through both gluings).
pub fn small_level_point() -> PointRef {
    PointRef::new(POLAR_B, vec![0.3, 0.05, 1e-4, 1e-3])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentShape {
    Point,
    Circle,
}

#[derive(Debug, Clone, Serialize)]
pub struct SingularComponent {
    pub rank: usize,
    pub williamson: WilliamsonType,
    pub shape: ComponentShape,
    pub samples: usize,
    pub representative: PointRef,
    /// Whether the f-orbit through the representative closes up within `2 pi`.
    pub closed: bool,
    /// Largest distance from the representative along that orbit at which the rank was still singular.
    pub orbit_return_error: f64,
    pub leaf_type: LeafType,
    pub leaf_type_valid: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanFailure {
    pub point: PointRef,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SingularScanReport {
    pub epsilon: f64,
    pub theta_samples: usize,
    pub phi_samples: usize,
    pub points_scanned: usize,
    /// Number of grid samples of rank 0, 1, 2.
    pub rank_counts: [usize; 3],
    pub components: Vec<SingularComponent>,
    pub failures: Vec<ScanFailure>,
    pub focus_focus_points: usize,
    pub hyperbolic_circles: usize,
    pub passed: bool,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut j = i;
        while self.0[j] != r {
            let next = self.0[j];
            self.0[j] = r;
            j = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Expresses a point in the source chart of any gluing that targets its chart.
fn canonical(sys: &MomentumSystem, p: &PointRef) -> PointRef {
    for g in &sys.gluings {
        if g.target == p.chart {
            if let Some(inv) = g.matrix.symplectic_inverse() {
                let chart = sys.atlas.chart(&g.source).expect("gluing source exists");
                return PointRef::new(g.source.clone(), chart.normalized(&inv.apply(&p.coords)));
            }
        }
    }
    p.clone()
}

/// Samples the zero section, finds where `df, dg` drop rank, classifies those
/// points and groups them into components of the glued space.
pub fn singular_scan(sys: &MomentumSystem, eps: f64, theta_samples: usize, resolution: usize, seed: u64) -> Result<SingularScanReport> {
    check_epsilon(eps)?;
    let thetas: Vec<f64> = (0..theta_samples.max(1)).map(|j| TAU * j as f64 / theta_samples.max(1) as f64).collect();
    let phis = latitude_grid(resolution);
    let grid: Vec<PointRef> = phis
        .iter()
        .flat_map(|&phi| thetas.iter().map(move |&th| sphere_point(eps, th, phi)))
        .collect();
    let results = par_map(&grid, |p| -> Result<_> {
        let fs = sys.functions_on(&p.chart)?;
        classify_point(fs, &p.coords, DEFAULT_TRIALS, seed)
    });

    let mut rank_counts = [0usize; 3];
    let mut failures = Vec::new();
    let mut singular = Vec::new();
    for (p, r) in grid.iter().zip(results) {
        match r {
            Ok(c) => {
                rank_counts[c.rank.min(2)] += 1;
                if c.rank < 2 {
                    singular.push((canonical(sys, p), p.clone(), c));
                }
            }
            Err(e) => failures.push(ScanFailure {
                point: p.clone(),
                error: e.to_string(),
            }),
        }
    }

    let link = 1.5 * (TAU / thetas.len() as f64).max(PI / (4 * resolution.max(1)) as f64);
    let mut uf = UnionFind((0..singular.len()).collect());
    for a in 0..singular.len() {
        for b in a + 1..singular.len() {
            let (pa, pb) = (&singular[a].0, &singular[b].0);
            if pa.chart == pb.chart && singular[a].2.rank == singular[b].2.rank {
                let chart = sys.atlas.chart(&pa.chart)?;
                if chart.distance(&pa.coords, &pb.coords) <= link {
                    uf.union(a, b);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for k in 0..singular.len() {
        let root = uf.find(k);
        groups.entry(root).or_default().push(k);
    }

    let mut components = Vec::new();
    for members in groups.values() {
        let (rep_canon, rep, class) = &singular[members[0]];
        let chart = sys.atlas.chart(&rep_canon.chart)?;
        let spread = members
            .iter()
            .map(|&k| chart.distance(&singular[k].0.coords, &rep_canon.coords))
            .fold(0.0, f64::max);
        let shape = if spread == 0.0 { ComponentShape::Point } else { ComponentShape::Circle };
        let (closed, err) = orbit_closes(sys, rep)?;
        let c = if closed { class.rank } else { 0 };
        let w = class.williamson;
        let leaf_type = LeafType::new(w.k_e, w.k_h, w.k_f, c, class.rank - c);
        components.push(SingularComponent {
            rank: class.rank,
            williamson: w,
            shape,
            samples: members.len(),
            representative: rep.clone(),
            closed,
            orbit_return_error: err,
            leaf_type_valid: leaf_type_valid(&leaf_type, 2),
            leaf_type,
        });
    }
    let focus_focus_points = components
        .iter()
        .filter(|c| c.rank == 0 && c.williamson == WilliamsonType::new(0, 0, 1) && c.shape == ComponentShape::Point)
        .count();
    let hyperbolic_circles = components
        .iter()
        .filter(|c| c.rank == 1 && c.williamson == WilliamsonType::new(0, 1, 0) && c.shape == ComponentShape::Circle && c.closed)
        .count();
    let passed = failures.is_empty()
        && components.len() == 2
        && focus_focus_points == 1
        && hyperbolic_circles == 1
        && components.iter().all(|c| c.leaf_type_valid);
    Ok(SingularScanReport {
        epsilon: eps,
        theta_samples: thetas.len(),
        phi_samples: phis.len(),
        points_scanned: grid.len(),
        rank_counts,
        components,
        failures,
        focus_focus_points,
        hyperbolic_circles,
        passed,
    })
}

/// Follows the f-flow for `2 pi` and reports whether it returns to its start
/// while staying singular. Fixed points count as closed.
fn orbit_closes(sys: &MomentumSystem, p: &PointRef) -> Result<(bool, f64)> {
    let start_rank = differential_rank(sys, p, 1e-10)?;
    let tr = integrate_flow(sys, 0, p, TAU, 1e-2)?;
    let mut stays = true;
    for s in tr.samples.iter().step_by(25) {
        stays &= differential_rank(sys, &s.point, 1e-10)? == start_rank;
    }
    let back = sys.atlas.chart_to(tr.end(), &p.chart)?;
    let err = sys.atlas.chart(&p.chart)?.distance(&back.coords, &p.coords);
    Ok((stays && err <= 1e-8, err))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cotangent::verify_commutation;
    use crate::geometry::validate_atlas;
    use crate::symplectic::poisson_bracket;

    const EPS: f64 = PI / 16.0;

    #[test]
    fn epsilon_range() {
        assert!(matches!(build_profile(FRAC_PI_4), Err(Error::EpsilonOutOfRange(_))));
        assert!(matches!(build_profile(0.0), Err(Error::EpsilonOutOfRange(_))));
        assert!(build_profile(PI / 10.0).is_ok());
    }

    #[test]
    fn profile_examples() {
        let h = build_profile(EPS).unwrap();
        for z in [-FRAC_PI_2, -FRAC_PI_4, FRAC_PI_4, FRAC_PI_2] {
            assert_eq!(h.value(z), 0.0);
        }
        assert_eq!(h.value(-FRAC_PI_4 + EPS / 2.0), -(-FRAC_PI_4 + EPS / 2.0 + FRAC_PI_4));
        assert!((h.value(-FRAC_PI_4 + EPS / 2.0) + EPS / 2.0).abs() < 1e-15);
        assert!(h.value(0.0) < 0.0);
        let phi: f64 = -1.5;
        assert_eq!(h.value(phi), -phi.cos() / phi.sin());
        assert_eq!(h.value(0.7), 0.7 - FRAC_PI_4);
    }

    #[test]
    fn profile_zero_set_and_signs() {
        let h = build_profile(EPS).unwrap();
        let c = check_profile_zeros(&h, 1e-3, 1e-2, 1e-6);
        assert!(c.passed, "{c:?}");
        assert!(c.points_checked > 3000);
        assert!(!check_profile_zeros(&h, 1e-3, 1e-2, 0.1).passed);
    }

    #[test]
    fn small_regular_level_is_bounded() {
        let sys = build_glued_sphere_system(EPS).unwrap();
        let p = small_level_point();
        let values: Vec<f64> = sys.functions_on(&p.chart).unwrap().iter().map(|g| g.value(&p.coords)).collect();
        let s = crate::dynamics::sample_level(&sys, &values, &[p], 10_000, 1e-2).unwrap();
        assert!(s.bounded(), "{:?}", s.boundary_events);
        assert!(s.points.iter().any(|q| q.chart.as_str() == SOUTH));
        assert!(s.points.iter().any(|q| q.chart.as_str() == NORTH));
    }

    #[test]
    fn regular_point_flows_conserve() {
        let sys = build_glued_sphere_system(EPS).unwrap();
        let p = regular_point(EPS);
        assert_eq!(differential_rank(&sys, &p, 1e-10).unwrap(), 2);
        let tr = integrate_flow(&sys, 0, &p, 10.0, 1e-2).unwrap();
        let g = sys.functions_on(&p.chart).unwrap()[1].value(&p.coords);
        let end = tr.end();
        let g_end = sys.functions_on(&end.chart).unwrap()[1].value(&end.coords);
        assert!((g - g_end).abs() <= 1e-8);
    }

    #[test]
    fn profile_is_c2_across_seams() {
        for eps in [EPS, PI / 10.0] {
            let h = build_profile(eps).unwrap();
            let d = 1e-6;
            let second = |x: f64| (h.value(x + d) - 2.0 * h.value(x) + h.value(x - d)) / (d * d);
            for s in h.seams() {
                let (l, r) = (h.eval(s - 1e-9), h.eval(s + 1e-9));
                for k in 0..3 {
                    assert!((l[k] - r[k]).abs() < 1e-3, "{s} {k}");
                }
                assert!((second(s - 2.0 * d) - second(s + 2.0 * d)).abs() < 1e-2, "{s}");
            }
        }
    }

    #[test]
    fn profile_derivatives_match_finite_differences() {
        let h = build_profile(PI / 10.0).unwrap();
        let d = 1e-6;
        for k in 1..300 {
            let phi = -FRAC_PI_2 + PI * k as f64 / 300.0;
            let d1 = (h.value(phi + d) - h.value(phi - d)) / (2.0 * d);
            let d2 = (h.derivative(phi + d) - h.derivative(phi - d)) / (2.0 * d);
            assert!((d1 - h.derivative(phi)).abs() < 1e-6 * (1.0 + d1.abs()), "{phi}");
            // the third derivative jumps at seams, so the quotient is only O(d) accurate there
            assert!((d2 - h.second_derivative(phi)).abs() < 1e-3 * (1.0 + d2.abs()), "{phi}");
        }
    }

    #[test]
    fn unglued_atlas_validates_and_functions_agree() {
        let sys = build_sphere_system(EPS).unwrap();
        let mut atlas = sys.atlas.clone();
        atlas.generate_overlap_samples(42, 200);
        let report = validate_atlas(&atlas);
        assert!(report.passed, "{:?}", report.failures());
        for (idx, t) in atlas.transitions().iter().enumerate() {
            let (fa, fb) = (sys.functions_on(&t.from).unwrap(), sys.functions_on(&t.to).unwrap());
            for z in atlas.overlap_samples(idx) {
                let w = atlas.apply_transition(idx, z).unwrap();
                for (a, b) in fa.iter().zip(fb) {
                    assert!((a.value(z) - b.value(&w)).abs() <= 1e-9, "{}", t.name);
                }
            }
        }
    }

    #[test]
    fn polar_function_examples() {
        let sys = build_sphere_system(EPS).unwrap();
        let fs = sys.functions_on(&ChartId::new(POLAR_A)).unwrap();
        assert_eq!(fs[0].value(&[1.0, -0.5, 0.7, -0.1]), 0.7);
        assert_eq!(fs[1].value(&[2.0, -FRAC_PI_4, 0.3, 0.1]), 0.0);
        // the example fibre (2, -1) lies outside the germ, but f is still the pairing
        assert_eq!(fs[0].value(&[0.3, 0.2, 2.0, -1.0]), 2.0);
    }

    #[test]
    fn gluing_examples() {
        let p = pole_gluing();
        assert_eq!(p.apply(&[1.0, 2.0, 3.0, 4.0]), vec![-3.0, -4.0, 1.0, 2.0]);
        assert!(p.is_symplectic());
        let sys = build_sphere_system(EPS).unwrap();
        let fs = sys.functions_on(&ChartId::new(SOUTH)).unwrap();
        let fn_ = sys.functions_on(&ChartId::new(NORTH)).unwrap();
        assert_eq!(fs[0].value(&[1.0, 2.0, 3.0, 4.0]), -2.0);
        assert_eq!(fn_[0].value(&[-3.0, -4.0, 1.0, 2.0]), -2.0);

        let b = band_gluing();
        assert_eq!(b.apply(&[0.3, 0.1, 2.0, -1.5]), vec![0.3, -1.5, 2.0, -0.1]);
        assert!(b.is_symplectic());
        let g1 = &sys.functions_on(&ChartId::new(BAND_1)).unwrap()[1];
        let g2 = &sys.functions_on(&ChartId::new(BAND_2)).unwrap()[1];
        assert!((g1.value(&[0.3, 0.1, 2.0, -1.5]) - 0.15).abs() < 1e-16);
        assert!((g2.value(&[0.3, -1.5, 2.0, -0.1]) - 0.15).abs() < 1e-16);
    }

    #[test]
    fn glued_system_builds_for_two_parameters() {
        for eps in [EPS, PI / 10.0] {
            let sys = build_glued_sphere_system(eps).unwrap();
            let report = sys.glue_report.as_ref().unwrap();
            assert!(report.passed && report.atlas.passed);
            let tight = GlueOptions {
                tolerance: 1e-14,
                ..GlueOptions::default()
            };
            assert!(build_glued_sphere_system_with(eps, tight).is_ok());
        }
    }

    #[test]
    fn sphere_functions_commute() {
        let sys = build_glued_sphere_system(EPS).unwrap();
        let r = verify_commutation(&sys, 2000, f64::INFINITY, 42);
        assert!(r.passed, "{}", r.max_abs);
        assert_eq!(r.charts.len(), 6);
    }

    #[test]
    fn scan_classifies_sample_points() {
        let sys = build_glued_sphere_system(EPS).unwrap();
        let pole = sphere_point(EPS, 0.0, -FRAC_PI_2);
        let c = classify_point(sys.functions_on(&pole.chart).unwrap(), &pole.coords, 100, 1).unwrap();
        assert_eq!((c.rank, c.williamson), (0, WilliamsonType::new(0, 0, 1)));
        let band = sphere_point(EPS, 1.0, -FRAC_PI_4);
        assert_eq!(band.chart, ChartId::new(BAND_1));
        let c = classify_point(sys.functions_on(&band.chart).unwrap(), &band.coords, 100, 1).unwrap();
        assert_eq!((c.rank, c.williamson), (1, WilliamsonType::new(0, 1, 0)));
        let eq = sphere_point(EPS, 1.0, 0.0);
        let c = classify_point(sys.functions_on(&eq.chart).unwrap(), &eq.coords, 7, 1).unwrap();
        assert_eq!(c.rank, 2);
        let fs = sys.functions_on(&eq.chart).unwrap();
        assert_eq!(poisson_bracket(&fs[0], &fs[1], &eq.coords).unwrap(), 0.0);
    }

    #[test]
    fn singular_scan_finds_one_point_and_one_circle() {
        let sys = build_glued_sphere_system(EPS).unwrap();
        let r = singular_scan(&sys, EPS, 48, 8, 42).unwrap();
        assert!(r.passed, "{:#?}", r.components);
        assert_eq!(r.rank_counts[0], 2 * 48);
        assert_eq!(r.rank_counts[1], 2 * 48);
        let ff = r.components.iter().find(|c| c.rank == 0).unwrap();
        assert_eq!(ff.leaf_type, LeafType::new(0, 0, 1, 0, 0));
        let circle = r.components.iter().find(|c| c.rank == 1).unwrap();
        assert_eq!(circle.leaf_type, LeafType::new(0, 1, 0, 1, 0));
        assert_eq!(circle.samples, 2 * 48);
    }
}
