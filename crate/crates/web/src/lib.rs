//! wasm-bindgen exports for the static demo page in `www/`.
//!
//! Every export returns a flat `Float64Array`; the layouts are documented per function.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use wasm_bindgen::prelude::*;

use singular_cotangent::dynamics::{flow_partial, sample_level, FlowOptions};
use singular_cotangent::figure_eight::{build_figure_eight, fibre_seed, HALF};
use singular_cotangent::geometry::PointRef;
use singular_cotangent::sphere::{
    build_glued_sphere_system, build_profile, regular_point, small_level_point, BAND_1, BAND_2, NORTH, POLAR_A,
    POLAR_B, SOUTH,
};

// `String` errors become JS exceptions in the generated glue and stay usable natively
fn js_err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Profile samples as `[phi0, h0, dh0, phi1, h1, dh1, ...]`.
#[wasm_bindgen]
pub fn profile_curve(epsilon: f64, samples: usize) -> Result<Vec<f64>, String> {
    let h = build_profile(epsilon).map_err(js_err)?;
    Ok(h.table(samples.max(2)).into_iter().flatten().collect())
}

/// Base point of a sphere chart point on the unit sphere.
pub fn sphere_xyz(p: &PointRef) -> [f64; 3] {
    let z = &p.coords;
    let from_angles = |theta: f64, phi: f64| [phi.cos() * theta.cos(), phi.cos() * theta.sin(), phi.sin()];
    match p.chart.as_str() {
        SOUTH | NORTH => {
            let r2 = (z[0] * z[0] + z[1] * z[1]).min(1.0);
            let h = (1.0 - r2).sqrt();
            [z[0], z[1], if p.chart.as_str() == SOUTH { -h } else { h }]
        }
        BAND_1 => from_angles(z[0], z[1] - FRAC_PI_4),
        BAND_2 => from_angles(z[0], z[1] + FRAC_PI_4),
        POLAR_A | POLAR_B => from_angles(z[0], z[1]),
        _ => [f64::NAN; 3],
    }
}

/// Orbit of `g1` (`function = 1`) or `g2` (`function = 2`) on the glued sphere,
/// projected to the base sphere, as `[x, y, z, ...]`. `small` starts on the
/// small level that closes up through both gluings. The orbit stops early if
/// it leaves the atlas.
#[wasm_bindgen]
pub fn sphere_orbit(epsilon: f64, function: usize, small: bool, time: f64, step: f64) -> Result<Vec<f64>, String> {
    if !(function == 1 || function == 2) {
        return Err(js_err("function must be 1 or 2"));
    }
    let sys = build_glued_sphere_system(epsilon).map_err(js_err)?;
    let start = if small { small_level_point() } else { regular_point(epsilon) };
    let opts = FlowOptions {
        record_every: ((time.abs() / step / 2000.0).ceil() as usize).max(1),
        ..FlowOptions::default()
    };
    let (traj, _) = flow_partial(&sys, function - 1, &start, time, step, opts).map_err(js_err)?;
    Ok(traj.samples.iter().flat_map(|s| sphere_xyz(&s.point)).collect())
}

/// Figure-eight chart point as `(theta, fibre)` with `theta` in `[-pi/2, 3pi/2)`.
pub fn figure_eight_coords(p: &PointRef) -> [f64; 2] {
    let theta = if p.chart.as_str() == HALF { p.coords[0] + PI } else { p.coords[0] };
    let theta = (theta + FRAC_PI_2).rem_euclid(2.0 * PI) - FRAC_PI_2;
    [theta, p.coords[1]]
}

/// Zero level of the figure-eight system sampled from a point on the fibre
/// over `theta = 0`. Layout: `[boundary_hit, steps_taken, theta0, fibre0, ...]`.
#[wasm_bindgen]
pub fn figure_eight_level(glued: bool, budget: usize, step: f64) -> Result<Vec<f64>, String> {
    let sys = build_figure_eight(glued).map_err(js_err)?;
    let s = sample_level(&sys, &[0.0], &[fibre_seed()], budget, step).map_err(js_err)?;
    let mut out = vec![f64::from(u8::from(s.boundary_hit)), s.steps_taken as f64];
    out.extend(s.points.iter().flat_map(figure_eight_coords));
    Ok(out)
}
