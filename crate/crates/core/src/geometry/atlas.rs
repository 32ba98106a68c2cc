use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use super::chart::{Chart, ChartId, PointRef};
use super::maps::{fd_jacobian, CoordMap, FD_STEP};
use crate::error::{Error, Result};
use crate::sampling;

pub const INVERSE_TOL: f64 = 1e-10;
pub const JACOBIAN_TOL: f64 = 1e-5;
pub const VALIDATION_TOL: f64 = 1e-8;
pub const DEFAULT_OVERLAP_SAMPLES: usize = 256;
const SINGULAR_DET: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    /// Change of coordinates on the same underlying manifold.
    Chart,
    /// Identification between distinct regions (a gluing symplectomorphism).
    Gluing,
}

#[derive(Debug, Clone)]
pub struct TransitionMap {
    pub name: String,
    pub from: ChartId,
    pub to: ChartId,
    pub kind: TransitionKind,
    pub forward: Arc<dyn CoordMap>,
    pub inverse: Arc<dyn CoordMap>,
    /// Where overlap samples are drawn from, in source coordinates. Defaults
    /// to the source domain. Validity is always decided by the domains.
    pub sample_region: Option<Vec<(f64, f64)>>,
}

impl TransitionMap {
    pub fn new(
        name: impl Into<String>,
        from: impl Into<ChartId>,
        to: impl Into<ChartId>,
        forward: Arc<dyn CoordMap>,
        inverse: Arc<dyn CoordMap>,
    ) -> Self {
        Self {
            name: name.into(),
            from: from.into(),
            to: to.into(),
            kind: TransitionKind::Chart,
            forward,
            inverse,
            sample_region: None,
        }
    }

    pub fn gluing(mut self) -> Self {
        self.kind = TransitionKind::Gluing;
        self
    }

    pub fn with_sample_region(mut self, region: Vec<(f64, f64)>) -> Self {
        self.sample_region = Some(region);
        self
    }

    pub fn reversed(&self) -> Self {
        Self {
            name: format!("{}^-1", self.name),
            from: self.to.clone(),
            to: self.from.clone(),
            kind: self.kind,
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
            sample_region: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Atlas {
    charts: BTreeMap<ChartId, Chart>,
    transitions: Vec<TransitionMap>,
    overlap_samples: Vec<Vec<Vec<f64>>>,
}

impl Atlas {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_chart(&mut self, chart: Chart) -> &mut Self {
        self.charts.insert(chart.id.clone(), chart);
        self
    }

    /// Registers a transition together with its reverse, keeping the
    /// transition graph closed under inversion.
    pub fn add_transition(&mut self, t: TransitionMap) -> Result<&mut Self> {
        for id in [&t.from, &t.to] {
            if !self.charts.contains_key(id) {
                return Err(Error::UnknownChart(id.to_string()));
            }
        }
        let (d_from, d_to) = (self.charts[&t.from].dim(), self.charts[&t.to].dim());
        if t.forward.dim_in() != d_from || t.forward.dim_out() != d_to {
            return Err(Error::DimensionMismatch {
                expected: d_from,
                got: t.forward.dim_in(),
            });
        }
        let rev = t.reversed();
        self.transitions.push(t);
        self.transitions.push(rev);
        self.overlap_samples.resize(self.transitions.len(), Vec::new());
        Ok(self)
    }

    /// Draws `count` seeded overlap samples for every transition.
    pub fn generate_overlap_samples(&mut self, seed: u64, count: usize) {
        let samples: Vec<Vec<Vec<f64>>> = (0..self.transitions.len())
            .map(|i| self.draw_overlap(i, sampling::stream_seed(seed, i as u64), count))
            .collect();
        self.overlap_samples = samples;
    }

    fn draw_overlap(&self, idx: usize, seed: u64, count: usize) -> Vec<Vec<f64>> {
        let t = &self.transitions[idx];
        let src = &self.charts[&t.from];
        let region = t
            .sample_region
            .clone()
            .unwrap_or_else(|| src.sampling_bounds(None));
        let mut rng = sampling::rng(seed);
        let mut out = Vec::with_capacity(count);
        let max_tries = count.saturating_mul(400).max(1000);
        for _ in 0..max_tries {
            if out.len() == count {
                break;
            }
            let x = sampling::uniform_in_box(&mut rng, &region);
            if self.apply_transition(idx, &x).is_ok() {
                out.push(x);
            }
        }
        out
    }

    pub fn charts(&self) -> impl Iterator<Item = &Chart> {
        self.charts.values()
    }

    pub fn chart(&self, id: &ChartId) -> Result<&Chart> {
        self.charts
            .get(id)
            .ok_or_else(|| Error::UnknownChart(id.to_string()))
    }

    pub fn transitions(&self) -> &[TransitionMap] {
        &self.transitions
    }

    pub fn overlap_samples(&self, idx: usize) -> &[Vec<f64>] {
        &self.overlap_samples[idx]
    }

    pub fn set_overlap_samples(&mut self, idx: usize, samples: Vec<Vec<f64>>) {
        self.overlap_samples[idx] = samples;
    }

    pub fn find_transition(&self, from: &ChartId, to: &ChartId) -> Option<usize> {
        self.transitions
            .iter()
            .position(|t| &t.from == from && &t.to == to)
    }

    /// Outgoing transitions of a chart, in registration order.
    pub fn outgoing<'a>(&'a self, from: &'a ChartId) -> impl Iterator<Item = (usize, &'a TransitionMap)> + 'a {
        self.transitions
            .iter()
            .enumerate()
            .filter(move |(_, t)| &t.from == from)
    }

    /// Applies transition `idx`, failing if the point is not in its overlap.
    pub fn apply_transition(&self, idx: usize, x: &[f64]) -> Result<Vec<f64>> {
        let t = &self.transitions[idx];
        let src = &self.charts[&t.from];
        let dst = &self.charts[&t.to];
        let out_of_overlap = || Error::OutOfOverlap {
            from: t.from.to_string(),
            to: t.to.to_string(),
            coords: x.to_vec(),
        };
        if !src.contains(x) {
            return Err(out_of_overlap());
        }
        let mut y = t.forward.apply(&src.normalized(x));
        dst.normalize(&mut y);
        if dst.contains(&y) {
            Ok(y)
        } else {
            Err(out_of_overlap())
        }
    }

    /// Re-expresses `p` in the chart `target`, following the first transition
    /// path (breadth first) along which the point stays in every overlap.
    pub fn chart_to(&self, p: &PointRef, target: &ChartId) -> Result<PointRef> {
        let start = self.chart(&p.chart)?;
        start.check(&p.coords)?;
        self.chart(target)?;
        if &p.chart == target {
            return Ok(PointRef::new(target.clone(), start.normalized(&p.coords)));
        }
        if !self.graph_connected(&p.chart, target) {
            return Err(Error::NoPath {
                from: p.chart.to_string(),
                to: target.to_string(),
            });
        }
        let mut visited = vec![p.chart.clone()];
        let mut queue = VecDeque::from([(p.chart.clone(), start.normalized(&p.coords))]);
        while let Some((chart, x)) = queue.pop_front() {
            for (idx, t) in self.outgoing(&chart) {
                if visited.contains(&t.to) {
                    continue;
                }
                if let Ok(y) = self.apply_transition(idx, &x) {
                    if &t.to == target {
                        return Ok(PointRef::new(target.clone(), y));
                    }
                    visited.push(t.to.clone());
                    queue.push_back((t.to.clone(), y));
                }
            }
        }
        Err(Error::OutOfOverlap {
            from: p.chart.to_string(),
            to: target.to_string(),
            coords: p.coords.clone(),
        })
    }

    fn graph_connected(&self, from: &ChartId, to: &ChartId) -> bool {
        let mut seen = vec![from.clone()];
        let mut queue = VecDeque::from([from.clone()]);
        while let Some(c) = queue.pop_front() {
            if &c == to {
                return true;
            }
            for (_, t) in self.outgoing(&c) {
                if !seen.contains(&t.to) {
                    seen.push(t.to.clone());
                    queue.push_back(t.to.clone());
                }
            }
        }
        false
    }

    pub fn transition_jacobian(&self, from: &ChartId, to: &ChartId, coords: &[f64]) -> Result<DMatrix<f64>> {
        let idx = self.find_transition(from, to).ok_or_else(|| Error::NoPath {
            from: from.to_string(),
            to: to.to_string(),
        })?;
        self.apply_transition(idx, coords)?;
        let t = &self.transitions[idx];
        let x = self.charts[from].normalized(coords);
        let jac = t
            .forward
            .jacobian(&x)
            .unwrap_or_else(|| fd_jacobian(|y| t.forward.apply(y), &x, FD_STEP));
        let det = if jac.is_square() { jac.determinant() } else { 0.0 };
        if det.abs() < SINGULAR_DET {
            return Err(Error::SingularJacobian {
                from: from.to_string(),
                to: to.to_string(),
                det,
            });
        }
        Ok(jac)
    }

    pub fn summary(&self) -> AtlasSummary {
        AtlasSummary {
            charts: self
                .charts
                .values()
                .map(|c| ChartSummary {
                    id: c.id.to_string(),
                    label: c.label.clone(),
                    dim: c.dim(),
                    domain: c.axes().iter().map(|a| [a.lo, a.hi]).collect(),
                    periodic: c.axes().iter().map(|a| a.periodic).collect(),
                })
                .collect(),
            transitions: self
                .transitions
                .iter()
                .map(|t| TransitionSummary {
                    name: t.name.clone(),
                    from: t.from.to_string(),
                    to: t.to.to_string(),
                    kind: t.kind,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChartSummary {
    pub id: String,
    pub label: String,
    pub dim: usize,
    pub domain: Vec<[f64; 2]>,
    pub periodic: Vec<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransitionSummary {
    pub name: String,
    pub from: String,
    pub to: String,
    pub kind: TransitionKind,
}

#[derive(Debug, Clone, Serialize)]
pub struct AtlasSummary {
    pub charts: Vec<ChartSummary>,
    pub transitions: Vec<TransitionSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransitionCheck {
    pub name: String,
    pub from: String,
    pub to: String,
    pub samples: usize,
    pub max_inverse_error: f64,
    /// `None` when the transition has no analytic Jacobian.
    pub max_jacobian_error: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CocycleCheck {
    pub charts: [String; 3],
    pub samples: usize,
    pub max_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AtlasReport {
    pub tolerance: f64,
    pub transitions: Vec<TransitionCheck>,
    pub cocycles: Vec<CocycleCheck>,
    pub passed: bool,
}

impl AtlasReport {
    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .transitions
            .iter()
            .filter(|t| !t.passed)
            .map(|t| format!("transition {} ({} -> {})", t.name, t.from, t.to))
            .collect();
        out.extend(
            self.cocycles
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("cocycle {} -> {} -> {}", c.charts[0], c.charts[1], c.charts[2])),
        );
        out
    }
}

/// Sample-based consistency check: inverse round trips, analytic Jacobians
/// against finite differences, and the cocycle condition on triple overlaps.
pub fn validate_atlas(atlas: &Atlas) -> AtlasReport {
    let mut transitions = Vec::new();
    for (idx, t) in atlas.transitions.iter().enumerate() {
        let src = &atlas.charts[&t.from];
        let samples = &atlas.overlap_samples[idx];
        let mut inv_err: f64 = 0.0;
        let mut jac_err: Option<f64> = None;
        for x in samples {
            let x = src.normalized(x);
            let y = t.forward.apply(&x);
            let back = t.inverse.apply(&y);
            let e = src.distance(&back, &x);
            inv_err = inv_err.max(if e.is_nan() { f64::INFINITY } else { e });
            if let Some(j) = t.forward.jacobian(&x) {
                let fd = fd_jacobian(|z| t.forward.apply(z), &x, FD_STEP);
                let e = (j - fd).amax();
                jac_err = Some(jac_err.unwrap_or(0.0).max(e));
            }
        }
        let passed = !samples.is_empty()
            && inv_err <= VALIDATION_TOL
            && jac_err.map_or(true, |e| e <= JACOBIAN_TOL);
        transitions.push(TransitionCheck {
            name: t.name.clone(),
            from: t.from.to_string(),
            to: t.to.to_string(),
            samples: samples.len(),
            max_inverse_error: inv_err,
            max_jacobian_error: jac_err,
            passed,
        });
    }

    let mut cocycles = Vec::new();
    for (ab, t_ab) in atlas.transitions.iter().enumerate() {
        for (bc, t_bc) in atlas.outgoing(&t_ab.to) {
            if t_bc.to == t_ab.from {
                continue;
            }
            let Some(ac) = atlas.find_transition(&t_ab.from, &t_bc.to) else {
                continue;
            };
            let dst = &atlas.charts[&t_bc.to];
            let mut count = 0;
            let mut max_err: f64 = 0.0;
            for x in &atlas.overlap_samples[ab] {
                let Ok(y) = atlas.apply_transition(ab, x) else { continue };
                let Ok(z1) = atlas.apply_transition(bc, &y) else { continue };
                let Ok(z2) = atlas.apply_transition(ac, x) else { continue };
                count += 1;
                max_err = max_err.max(dst.distance(&z1, &z2));
            }
            if count > 0 {
                cocycles.push(CocycleCheck {
                    charts: [t_ab.from.to_string(), t_ab.to.to_string(), t_bc.to.to_string()],
                    samples: count,
                    max_error: max_err,
                    passed: max_err <= VALIDATION_TOL,
                });
            }
        }
    }

    let passed = transitions.iter().all(|t| t.passed) && cocycles.iter().all(|c| c.passed);
    AtlasReport {
        tolerance: VALIDATION_TOL,
        transitions,
        cocycles,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::maps::{AffineMap, FnMap, IdentityMap};
    use crate::geometry::Axis;

    fn single_chart() -> Atlas {
        let mut a = Atlas::new();
        a.add_chart(Chart::cube("A", "", 2, 1.0).unwrap());
        a
    }

    #[test]
    fn identity_chart_to_is_identity() {
        let a = single_chart();
        let p = PointRef::new("A", vec![0.25, -0.5]);
        assert_eq!(a.chart_to(&p, &ChartId::from("A")).unwrap(), p);
    }

    #[test]
    fn single_chart_atlas_validates() {
        let mut a = single_chart();
        a.generate_overlap_samples(1, 16);
        let r = validate_atlas(&a);
        assert!(r.passed);
        assert!(r.transitions.is_empty() && r.cocycles.is_empty());
    }

    #[test]
    fn linear_transition_has_constant_jacobian() {
        let mut a = single_chart();
        a.add_chart(Chart::cube("B", "", 2, 10.0).unwrap());
        let m = nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        let f = AffineMap::new(m.clone(), nalgebra::DVector::zeros(2));
        a.add_transition(TransitionMap::new("lin", "A", "B", Arc::new(f.clone()), Arc::new(f.inverse())))
            .unwrap();
        for x in [[0.1, 0.2], [-0.5, 0.9]] {
            let j = a.transition_jacobian(&"A".into(), &"B".into(), &x).unwrap();
            assert_eq!(j, m);
        }
    }

    #[test]
    fn out_of_overlap_and_no_path() {
        let mut a = single_chart();
        a.add_chart(Chart::cube("B", "", 2, 0.5).unwrap());
        a.add_chart(Chart::cube("C", "", 2, 0.5).unwrap());
        a.add_transition(TransitionMap::new(
            "id",
            "A",
            "B",
            Arc::new(IdentityMap(2)),
            Arc::new(IdentityMap(2)),
        ))
        .unwrap();
        let p = PointRef::new("A", vec![0.9, 0.0]);
        assert!(matches!(a.chart_to(&p, &"B".into()), Err(Error::OutOfOverlap { .. })));
        assert!(matches!(a.chart_to(&p, &"C".into()), Err(Error::NoPath { .. })));
    }

    #[test]
    fn wrong_inverse_is_located() {
        let mut a = single_chart();
        a.add_chart(Chart::cube("B", "", 2, 4.0).unwrap());
        let fwd = FnMap::new("double", 2, 2, |x| vec![2.0 * x[0], x[1]]);
        let bad = FnMap::new("not-half", 2, 2, |x| vec![x[0] / 3.0, x[1]]);
        a.add_transition(TransitionMap::new("scale", "A", "B", Arc::new(fwd), Arc::new(bad)))
            .unwrap();
        a.generate_overlap_samples(7, 32);
        let r = validate_atlas(&a);
        assert!(!r.passed);
        let failures = r.failures();
        assert!(failures.iter().any(|f| f.contains("scale")));
    }

    #[test]
    fn periodic_shift_round_trips() {
        let mut a = Atlas::new();
        let tau = std::f64::consts::TAU;
        a.add_chart(Chart::new("P", "", vec![Axis::periodic(0.0, tau), Axis::open(-1.0, 1.0)]).unwrap());
        a.add_chart(Chart::new("Q", "", vec![Axis::periodic(-1.0, tau - 1.0), Axis::open(-1.0, 1.0)]).unwrap());
        let f = AffineMap::translation(vec![1.0, 0.0]);
        a.add_transition(TransitionMap::new("shift", "P", "Q", Arc::new(f.clone()), Arc::new(f.inverse())))
            .unwrap();
        a.generate_overlap_samples(3, 64);
        assert!(validate_atlas(&a).passed);
        let p = PointRef::new("P", vec![tau - 0.5, 0.0]);
        let q = a.chart_to(&p, &"Q".into()).unwrap();
        assert!((q.coords[0] - 0.5).abs() < 1e-12);
    }
}
