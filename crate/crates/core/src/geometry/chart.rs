use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChartId(pub String);

impl ChartId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ChartId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ChartId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

/// One coordinate axis of a box domain.
///
/// Bounded axes are open intervals `(lo, hi)`. Periodic axes use the
/// half-open fundamental interval `[lo, hi)` and wrap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
}

impl Axis {
    pub fn open(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            periodic: false,
        }
    }

    pub fn symmetric(radius: f64) -> Self {
        Self::open(-radius, radius)
    }

    pub fn periodic(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            periodic: true,
        }
    }

    pub fn period(&self) -> f64 {
        self.hi - self.lo
    }

    fn wrap(&self, x: f64) -> f64 {
        let p = self.period();
        let mut y = (x - self.lo).rem_euclid(p) + self.lo;
        if y >= self.hi {
            y -= p;
        }
        y
    }

    /// Signed difference `a - b`, reduced to `[-p/2, p/2]` on periodic axes.
    fn diff(&self, a: f64, b: f64) -> f64 {
        let d = a - b;
        if self.periodic {
            let p = self.period();
            d - p * (d / p).round()
        } else {
            d
        }
    }
}

/// A coordinate chart with an axis-aligned box domain and a trust box used
/// by the flow integrator to decide when to switch charts.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub id: ChartId,
    pub label: String,
    axes: Vec<Axis>,
    trust: Vec<(f64, f64)>,
}

impl Chart {
    pub fn new(id: impl Into<ChartId>, label: impl Into<String>, axes: Vec<Axis>) -> Result<Self> {
        let id = id.into();
        if axes.is_empty() {
            return Err(Error::InvalidArgument(format!("chart `{id}` has dimension 0")));
        }
        if let Some(ax) = axes.iter().find(|a| !(a.lo < a.hi) || !a.lo.is_finite() || !a.hi.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "chart `{id}` has an empty or unbounded axis [{}, {}]",
                ax.lo, ax.hi
            )));
        }
        let trust = axes.iter().map(|a| (a.lo, a.hi)).collect();
        Ok(Self {
            id,
            label: label.into(),
            axes,
            trust,
        })
    }

    /// Cube `(-radius, radius)^dim`.
    pub fn cube(id: impl Into<ChartId>, label: impl Into<String>, dim: usize, radius: f64) -> Result<Self> {
        Self::new(id, label, vec![Axis::symmetric(radius); dim])
    }

    pub fn with_trust(mut self, trust: Vec<(f64, f64)>) -> Result<Self> {
        if trust.len() != self.axes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.axes.len(),
                got: trust.len(),
            });
        }
        self.trust = trust;
        Ok(self)
    }

    /// Trust box `(-r_i, r_i)` per axis.
    pub fn with_trust_radii(self, radii: &[f64]) -> Result<Self> {
        let trust = radii.iter().map(|&r| (-r, r)).collect();
        self.with_trust(trust)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn trust(&self) -> &[(f64, f64)] {
        &self.trust
    }

    pub fn normalize(&self, coords: &mut [f64]) {
        for (x, ax) in coords.iter_mut().zip(&self.axes) {
            if ax.periodic {
                *x = ax.wrap(*x);
            }
        }
    }

    pub fn normalized(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = coords.to_vec();
        self.normalize(&mut out);
        out
    }

    pub fn contains(&self, coords: &[f64]) -> bool {
        coords.len() == self.dim()
            && coords.iter().zip(&self.axes).all(|(&x, ax)| {
                x.is_finite() && (ax.periodic || (x > ax.lo && x < ax.hi))
            })
    }

    /// Sup-norm distance honouring periodic axes.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.axes)
            .map(|((&x, &y), ax)| ax.diff(x, y).abs())
            .fold(0.0, f64::max)
    }

    /// Sup over bounded axes of `|x - c| / half_width` for the trust box.
    /// Values below 1 are inside the trust region.
    pub fn trust_distance(&self, coords: &[f64]) -> f64 {
        coords
            .iter()
            .zip(&self.axes)
            .zip(&self.trust)
            .filter(|((_, ax), _)| !ax.periodic)
            .map(|((&x, _), &(lo, hi))| {
                let c = 0.5 * (lo + hi);
                let half = 0.5 * (hi - lo);
                (x - c).abs() / half
            })
            .fold(0.0, f64::max)
    }

    pub fn in_trust(&self, coords: &[f64]) -> bool {
        self.trust_distance(coords) < 1.0
    }

    /// Sampling bounds: the domain, clipped to `(-radius, radius)` on bounded axes.
    pub fn sampling_bounds(&self, radius: Option<f64>) -> Vec<(f64, f64)> {
        self.axes
            .iter()
            .map(|ax| match radius {
                Some(r) if !ax.periodic => (ax.lo.max(-r), ax.hi.min(r)),
                _ => (ax.lo, ax.hi),
            })
            .collect()
    }

    pub fn check(&self, coords: &[f64]) -> Result<()> {
        if coords.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: coords.len(),
            });
        }
        if !self.contains(coords) {
            return Err(Error::OutOfDomain {
                chart: self.id.to_string(),
                coords: coords.to_vec(),
            });
        }
        Ok(())
    }
}

/// A point expressed in a particular chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRef {
    pub chart: ChartId,
    pub coords: Vec<f64>,
}

impl PointRef {
    pub fn new(chart: impl Into<ChartId>, coords: Vec<f64>) -> Self {
        Self {
            chart: chart.into(),
            coords,
        }
    }
}
