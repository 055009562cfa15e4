//! Planar geometry: curves, needles, tubes and obstacle scenes.

pub mod curve;
pub mod needle;
pub mod scene;

pub use curve::{CurveError, CurveSpec, DiscretizedCurve};
pub use needle::{
    classify_needle, dist_to_needle, NeedleClass, NeedleSpec, NeedleViolation, TubeSet,
};
pub use scene::{
    BoundaryCondition, ImpedanceFn, ObstacleScene, SceneError, SceneLimits,
};
