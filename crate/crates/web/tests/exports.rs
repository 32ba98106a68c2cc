use std::f64::consts::PI;

use singular_cotangent::geometry::PointRef;
use singular_cotangent::sphere::{sphere_point, BAND_1, NORTH, SOUTH};
use singular_cotangent_web::{figure_eight_level, profile_curve, sphere_orbit, sphere_xyz};

#[test]
fn profile_curve_layout() {
    let v = profile_curve(PI / 16.0, 101).unwrap();
    assert_eq!(v.len(), 3 * 101);
    assert!((v[0] + PI / 2.0).abs() < 1e-15);
    assert!((v[300] - PI / 2.0).abs() < 1e-15);
    assert_eq!(v[1], 0.0);
}

#[test]
fn chart_points_land_on_the_unit_sphere() {
    let eps = PI / 16.0;
    for &(theta, phi) in &[(0.3, -1.5), (1.0, -0.78), (2.0, 0.2), (5.0, 0.8), (0.4, 1.56)] {
        let p = sphere_point(eps, theta, phi);
        let x = sphere_xyz(&p);
        let want = [phi.cos() * theta.cos(), phi.cos() * theta.sin(), phi.sin()];
        for k in 0..3 {
            assert!((x[k] - want[k]).abs() < 1e-12, "{} {theta} {phi}", p.chart);
        }
    }
    assert_eq!(sphere_xyz(&PointRef::new(SOUTH, vec![0.0; 4]))[2], -1.0);
    assert_eq!(sphere_xyz(&PointRef::new(NORTH, vec![0.0; 4]))[2], 1.0);
    assert!(sphere_xyz(&PointRef::new(BAND_1, vec![0.0, 0.0, 0.0, 0.0]))[2] < 0.0);
}

#[test]
fn sphere_orbits_stay_on_the_sphere() {
    let v = sphere_orbit(PI / 16.0, 1, false, 2.0 * PI, 1e-2).unwrap();
    assert!(v.len() >= 3 * 100);
    for x in v.chunks(3) {
        assert!(((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt() - 1.0).abs() < 1e-9);
    }
    // the f-flow rotates in theta, so it comes back to its start
    let n = v.len();
    assert!((v[n - 3] - v[0]).abs() < 1e-6 && (v[n - 2] - v[1]).abs() < 1e-6);
    assert!(sphere_orbit(PI / 16.0, 2, true, 5.0, 1e-2).unwrap().len() > 3);
    assert!(sphere_orbit(PI / 16.0, 3, false, 1.0, 1e-2).is_err());
    assert!(sphere_orbit(1.0, 1, false, 1.0, 1e-2).is_err());
}

#[test]
fn figure_eight_contrast() {
    let unglued = figure_eight_level(false, 10_000, 1e-2).unwrap();
    let glued = figure_eight_level(true, 10_000, 1e-2).unwrap();
    assert_eq!(unglued[0], 1.0);
    assert_eq!(glued[0], 0.0);
    assert_eq!(glued[1], 10_000.0);
    assert!(glued.len() > 2 && glued.len() % 2 == 0);
    for p in glued[2..].chunks(2) {
        assert!((-PI / 2.0..1.5 * PI).contains(&p[0]));
    }
}
