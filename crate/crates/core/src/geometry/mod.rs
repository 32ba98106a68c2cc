//! Charts, atlases, transition maps.

mod atlas;
mod chart;
pub mod maps;

pub use atlas::{
    validate_atlas, Atlas, AtlasReport, AtlasSummary, CocycleCheck, TransitionCheck, TransitionKind,
    TransitionMap, DEFAULT_OVERLAP_SAMPLES, INVERSE_TOL, JACOBIAN_TOL, VALIDATION_TOL,
};
pub use chart::{Axis, Chart, ChartId, PointRef};
pub use maps::{AffineMap, BaseMap, CoordMap, CotangentLift, CotangentLiftInverse, FnMap, IdentityMap, IntLinearMap};
