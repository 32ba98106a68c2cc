use std::f64::consts::PI;

use singular_cotangent::cotangent::{glued_local_model, local_cotangent_model, MomentumSystem};
use singular_cotangent::dynamics::model_system;
use singular_cotangent::figure_eight::{build_figure_eight, fibre_seed};
use singular_cotangent::geometry::{ChartId, PointRef};
use singular_cotangent::normal_forms::{LocalModel, MODEL_CHART};
use singular_cotangent::sphere::{build_glued_sphere_system, check_epsilon, regular_point, small_level_point};

use crate::{CliError, CliResult};

pub const DEFAULT_EPSILON: f64 = PI / 16.0;

#[derive(Debug, Clone)]
pub enum SystemKind {
    Model(LocalModel),
    Sphere(f64),
    FigureEight { glued: bool },
}

impl SystemKind {
    pub fn parse(s: &str, epsilon: f64) -> CliResult<Self> {
        Ok(match s.trim() {
            "sphere" => {
                check_epsilon(epsilon)?;
                SystemKind::Sphere(epsilon)
            }
            "figure-eight" => SystemKind::FigureEight { glued: true },
            "figure-eight-unglued" => SystemKind::FigureEight { glued: false },
            m => SystemKind::Model(m.parse()?),
        })
    }

    pub fn name(&self) -> String {
        match self {
            SystemKind::Model(m) => m.to_string(),
            SystemKind::Sphere(e) => format!("sphere(eps={e})"),
            SystemKind::FigureEight { glued: true } => "figure-eight".into(),
            SystemKind::FigureEight { glued: false } => "figure-eight-unglued".into(),
        }
    }
}

/// Builds the system. For flows, model strings give the flat phase space;
/// otherwise their (glued unless `unglued`) cotangent model.
pub fn build(kind: &SystemKind, for_flow: bool, unglued: bool) -> CliResult<MomentumSystem> {
    Ok(match kind {
        SystemKind::Model(m) if for_flow => model_system(m)?,
        SystemKind::Model(m) if unglued => local_cotangent_model(m)?,
        SystemKind::Model(m) => glued_local_model(m)?,
        SystemKind::Sphere(e) => build_glued_sphere_system(*e)?,
        SystemKind::FigureEight { glued } => build_figure_eight(*glued)?,
    })
}

pub fn default_start(kind: &SystemKind, sys: &MomentumSystem, for_flow: bool) -> PointRef {
    match kind {
        SystemKind::Model(m) if for_flow => PointRef::new(MODEL_CHART, vec![1.0; 2 * m.n()]),
        SystemKind::Model(m) => {
            let chart = sys.atlas.charts().next().expect("models have charts");
            let n = m.n();
            let coords = (0..2 * n).map(|k| if k < n { 0.0 } else { 0.2 }).collect();
            PointRef::new(chart.id.clone(), coords)
        }
        SystemKind::Sphere(e) if for_flow => regular_point(*e),
        SystemKind::Sphere(_) => small_level_point(),
        SystemKind::FigureEight { .. } => fibre_seed(),
    }
}

/// `--chart` / `--start` override of the default start point.
pub fn start_point(
    kind: &SystemKind,
    sys: &MomentumSystem,
    for_flow: bool,
    chart: Option<&str>,
    start: Option<&str>,
) -> CliResult<PointRef> {
    let default = default_start(kind, sys, for_flow);
    let chart = chart.map(|c| c.to_string()).unwrap_or_else(|| default.chart.to_string());
    let coords = match start {
        None => default.coords,
        Some(s) => s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Usage(format!("--start: {e}")))?,
    };
    let chart = ChartId::new(chart);
    let c = sys.atlas.chart(&chart)?;
    c.check(&coords)?;
    Ok(PointRef::new(chart, coords))
}
