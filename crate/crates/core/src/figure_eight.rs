//! A compact contrast case: `T*S^1` with the momentum of `a(theta) d/dtheta`,
//! where `a` vanishes (hyperbolically) at `theta = 0` and `theta = pi`.
//!
//! Without gluing, the zero level contains the two fibres over the zeros of
//! `a`, which run off any compact piece of `T*S^1`. Gluing the fibre over `0`
//! to the zero section near `pi` (and vice versa) closes them up into a
//! figure eight.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::cotangent::{glue, GluingMap, LiftedField, MomentumSystem};
use crate::dynamics::{sample_level, LevelSample};
use crate::error::Result;
use crate::exact::IntMatrix;
use crate::geometry::maps::{AffineMap, IdentityMap};
use crate::geometry::{Atlas, Axis, Chart, PointRef, TransitionMap};
use crate::profile::BlendedProfile;
use crate::symplectic::VectorField;

/// Half-width of the charts around the zeros of `a`.
pub const DELTA: f64 = 0.3;

pub const ZERO: &str = "T*C0";
pub const HALF: &str = "T*Cpi";
const MIDDLE: [&str; 4] = ["T*A0", "T*A1", "T*B0", "T*B1"];

fn up(t: f64) -> [f64; 3] {
    [t, 1.0, 0.0]
}

fn down(t: f64) -> [f64; 3] {
    [PI - t, -1.0, 0.0]
}

fn up_again(t: f64) -> [f64; 3] {
    [t - TAU, 1.0, 0.0]
}

/// `a(theta)` on `[0, 2 pi]`: `theta` near 0, `pi - theta` near `pi`, `theta - 2 pi` near `2 pi`.
pub fn profile() -> BlendedProfile {
    BlendedProfile::new()
        .exact(0.0, DELTA, up)
        .blend(DELTA, PI - DELTA, up, down)
        .exact(PI - DELTA, PI + DELTA, down)
        .blend(PI + DELTA, TAU - DELTA, down, up_again)
        .exact(TAU - DELTA, TAU, up_again)
}

fn middle_chart(id: &str, lo: f64, hi: f64, trust: (f64, f64)) -> Result<Chart> {
    Chart::new(id, format!("T* on ({lo:.3}, {hi:.3})"), vec![Axis::open(lo, hi), Axis::symmetric(DELTA)])?
        .with_trust(vec![trust, (-0.5 * DELTA, 0.5 * DELTA)])
}

fn shift(name: &str, from: &str, to: &str, by: f64, region: (f64, f64)) -> TransitionMap {
    TransitionMap::new(
        name,
        from,
        to,
        Arc::new(AffineMap::translation(vec![by, 0.0])),
        Arc::new(AffineMap::translation(vec![-by, 0.0])),
    )
    .with_sample_region(vec![region, (-DELTA, DELTA)])
}

fn identity(name: &str, from: &str, to: &str, region: (f64, f64)) -> TransitionMap {
    TransitionMap::new(name, from, to, Arc::new(IdentityMap(2)), Arc::new(IdentityMap(2)))
        .with_sample_region(vec![region, (-DELTA, DELTA)])
}

fn profile_field(chart: &Chart, a: &BlendedProfile) -> VectorField {
    let (a0, a1, a2) = (a.clone(), a.clone(), a.clone());
    VectorField::new(
        chart.id.clone(),
        "a(theta) d/dtheta",
        1,
        move |q| vec![a0.value(q[0])],
        move |q| DMatrix::from_element(1, 1, a1.derivative(q[0])),
    )
    .with_second_derivatives(move |q| vec![DMatrix::from_element(1, 1, a2.second_derivative(q[0]))])
}

/// The un-glued system; pass `glued = true` to add the gluing `(x, xi) -> (-xi, x)`
/// from the chart at `0` to the chart at `pi`.
pub fn build_figure_eight(glued: bool) -> Result<MomentumSystem> {
    let d = DELTA;
    let local = |id: &str, label: &str| {
        Chart::cube(id, label, 2, d)?.with_trust_radii(&[0.8 * d, 0.5 * d])
    };
    let c0 = local(ZERO, "T* near theta = 0, x = theta")?;
    let cpi = local(HALF, "T* near theta = pi, y = theta - pi")?;
    let middles = [
        middle_chart(MIDDLE[0], 0.5 * d, FRAC_PI_2 + d, (0.7 * d, FRAC_PI_2 + 0.8 * d))?,
        middle_chart(MIDDLE[1], FRAC_PI_2 - d, PI - 0.5 * d, (FRAC_PI_2 - 0.8 * d, PI - 0.7 * d))?,
        middle_chart(MIDDLE[2], PI + 0.5 * d, 1.5 * PI + d, (PI + 0.7 * d, 1.5 * PI + 0.8 * d))?,
        middle_chart(MIDDLE[3], 1.5 * PI - d, TAU - 0.5 * d, (1.5 * PI - 0.8 * d, TAU - 0.7 * d))?,
    ];

    let mut atlas = Atlas::new();
    atlas.add_chart(c0.clone()).add_chart(cpi.clone());
    for c in &middles {
        atlas.add_chart(c.clone());
    }
    atlas.add_transition(identity("C0->A0", ZERO, MIDDLE[0], (0.5 * d, d)))?;
    atlas.add_transition(identity("A0->A1", MIDDLE[0], MIDDLE[1], (FRAC_PI_2 - d, FRAC_PI_2 + d)))?;
    atlas.add_transition(shift("A1->Cpi", MIDDLE[1], HALF, -PI, (PI - d, PI - 0.5 * d)))?;
    atlas.add_transition(shift("Cpi->B0", HALF, MIDDLE[2], PI, (0.5 * d, d)))?;
    atlas.add_transition(identity("B0->B1", MIDDLE[2], MIDDLE[3], (1.5 * PI - d, 1.5 * PI + d)))?;
    atlas.add_transition(shift("B1->C0", MIDDLE[3], ZERO, -TAU, (TAU - d, TAU - 0.5 * d)))?;

    let name = if glued { "figure-eight" } else { "figure-eight (unglued)" };
    let mut sys = MomentumSystem::new(name, 1, atlas);
    let lifted = |field| vec![LiftedField { index: 0, field }];
    sys.insert_generators(
        &c0,
        lifted(VectorField::linear(c0.id.clone(), "x d/dx", DMatrix::from_element(1, 1, 1.0))),
    );
    sys.insert_generators(
        &cpi,
        lifted(VectorField::linear(cpi.id.clone(), "-y d/dy", DMatrix::from_element(1, 1, -1.0))),
    );
    let a = profile();
    for c in &middles {
        sys.insert_generators(c, lifted(profile_field(c, &a)));
    }
    if glued {
        glue(sys, vec![figure_eight_gluing()])
    } else {
        Ok(sys)
    }
}

pub fn figure_eight_gluing() -> GluingMap {
    GluingMap::new("fibre-swap", ZERO, HALF, IntMatrix::from_rows(&[&[0, -1], &[1, 0]]))
}

/// A point on the fibre over `theta = 0`, which lies on the zero level.
pub fn fibre_seed() -> PointRef {
    PointRef::new(ZERO, vec![0.0, 0.2 * DELTA])
}

#[derive(Debug, Clone, Serialize)]
pub struct PropernessContrast {
    pub budget: usize,
    pub step: f64,
    pub unglued: LevelSample,
    pub glued: LevelSample,
    /// The un-glued level ran off the atlas while the glued one stayed inside.
    pub passed: bool,
}

/// Samples the zero level from [`fibre_seed`] with and without the gluing.
pub fn properness_contrast(budget: usize, step: f64) -> Result<PropernessContrast> {
    let seeds = [fibre_seed()];
    let unglued = sample_level(&build_figure_eight(false)?, &[0.0], &seeds, budget, step)?;
    let glued = sample_level(&build_figure_eight(true)?, &[0.0], &seeds, budget, step)?;
    Ok(PropernessContrast {
        budget,
        step,
        passed: unglued.boundary_hit && !glued.boundary_hit,
        unglued,
        glued,
    })
}
