//! Obstacle scenes: outer domain, obstacle components and boundary condition.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::curve::CurveSpec;
use crate::vec2::Vec2;

/// Impedance coefficient on an obstacle boundary: a complex constant plus an
/// optional low-order Fourier dependence on the boundary parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceFn {
    pub constant: Complex64,
    #[serde(default)]
    pub cos_terms: Vec<Complex64>,
    #[serde(default)]
    pub sin_terms: Vec<Complex64>,
}

impl ImpedanceFn {
    pub fn constant(value: Complex64) -> Self {
        ImpedanceFn { constant: value, cos_terms: Vec::new(), sin_terms: Vec::new() }
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        let mut v = self.constant;
        for (j, c) in self.cos_terms.iter().enumerate() {
            v += c * ((j + 1) as f64 * t).cos();
        }
        for (j, s) in self.sin_terms.iter().enumerate() {
            v += s * ((j + 1) as f64 * t).sin();
        }
        v
    }

    /// Minimum of `Im lambda` over the boundary parameter (sampled).
    pub fn min_im(&self) -> f64 {
        (0..512)
            .map(|i| self.eval(2.0 * std::f64::consts::PI * i as f64 / 512.0).im)
            .fold(f64::MAX, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BoundaryCondition {
    SoundSoft,
    /// One impedance function per obstacle component (a single entry is
    /// broadcast to all components).
    Impedance { lambda: Vec<ImpedanceFn> },
}

impl BoundaryCondition {
    pub fn impedance_constant(value: Complex64) -> Self {
        BoundaryCondition::Impedance { lambda: vec![ImpedanceFn::constant(value)] }
    }

    pub fn lambda_for(&self, component: usize) -> Option<&ImpedanceFn> {
        match self {
            BoundaryCondition::SoundSoft => None,
            BoundaryCondition::Impedance { lambda } => {
                Some(if lambda.len() == 1 { &lambda[0] } else { &lambda[component] })
            }
        }
    }

    pub fn is_sound_soft(&self) -> bool {
        matches!(self, BoundaryCondition::SoundSoft)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error(transparent)]
    Curve(#[from] super::curve::CurveError),
    #[error("wavenumber {0} must be nonnegative")]
    NegativeWavenumber(f64),
    #[error("obstacle {index} is not inside the domain with clearance {required:e} (got {got:e})")]
    ObstacleTooClose { index: usize, required: f64, got: f64 },
    #[error("obstacles {a} and {b} are not separated (distance {dist:e})")]
    ObstaclesTouch { a: usize, b: usize, dist: f64 },
    #[error("impedance entry count {got} does not match {expected} obstacle components")]
    ImpedanceCountMismatch { got: usize, expected: usize },
    #[error(
        "Im lambda has minimum {min_im:e} on component {component}; dissipative scenes require \
         a positive lower bound (set allow_indefinite_impedance to override)"
    )]
    NonDissipativeImpedance { component: usize, min_im: f64 },
}

/// Validation limits for scene construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLimits {
    /// Required clearance between each obstacle and the outer boundary,
    /// relative to the outer diameter.
    pub clearance_rel: f64,
    /// Required pairwise obstacle separation, relative to the outer diameter.
    pub separation_rel: f64,
    /// Lower bound demanded of `Im lambda` unless overridden.
    pub lambda_min_im: f64,
    /// Accept impedance functions without a positive imaginary part.
    pub allow_indefinite_impedance: bool,
}

impl Default for SceneLimits {
    fn default() -> Self {
        SceneLimits {
            clearance_rel: 0.02,
            separation_rel: 0.02,
            lambda_min_im: 1e-8,
            allow_indefinite_impedance: false,
        }
    }
}

/// The full forward-problem description: domain, obstacles, boundary
/// condition and wavenumber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleScene {
    pub outer: CurveSpec,
    #[serde(default)]
    pub obstacles: Vec<CurveSpec>,
    pub bc: BoundaryCondition,
    pub k: f64,
}

impl ObstacleScene {
    pub fn new(
        outer: CurveSpec,
        obstacles: Vec<CurveSpec>,
        bc: BoundaryCondition,
        k: f64,
    ) -> Self {
        ObstacleScene { outer, obstacles, bc, k }
    }

    pub fn empty(outer: CurveSpec, k: f64) -> Self {
        ObstacleScene { outer, obstacles: Vec::new(), bc: BoundaryCondition::SoundSoft, k }
    }

    pub fn validate(&self, limits: &SceneLimits) -> Result<(), SceneError> {
        self.outer.validate()?;
        if self.k < 0.0 {
            return Err(SceneError::NegativeWavenumber(self.k));
        }
        let diam = self.outer.diameter();
        let clearance = limits.clearance_rel * diam;
        for (i, obs) in self.obstacles.iter().enumerate() {
            obs.validate()?;
            // clearance to the outer boundary, sampled along the obstacle
            let mut min_d = f64::MAX;
            let mut all_inside = true;
            for s in 0..256 {
                let t = 2.0 * std::f64::consts::PI * s as f64 / 256.0;
                let p = obs.point(t);
                if !self.outer.contains(p) {
                    all_inside = false;
                }
                min_d = min_d.min(self.outer.distance_to(p));
            }
            if !all_inside || min_d < clearance {
                return Err(SceneError::ObstacleTooClose {
                    index: i,
                    required: clearance,
                    got: if all_inside { min_d } else { 0.0 },
                });
            }
        }
        let separation = limits.separation_rel * diam;
        for i in 0..self.obstacles.len() {
            for j in (i + 1)..self.obstacles.len() {
                let d = curve_pair_distance(&self.obstacles[i], &self.obstacles[j]);
                if d < separation {
                    return Err(SceneError::ObstaclesTouch { a: i, b: j, dist: d });
                }
            }
        }
        if let BoundaryCondition::Impedance { lambda } = &self.bc {
            if lambda.len() != 1 && lambda.len() != self.obstacles.len() {
                return Err(SceneError::ImpedanceCountMismatch {
                    got: lambda.len(),
                    expected: self.obstacles.len(),
                });
            }
            if !limits.allow_indefinite_impedance {
                for c in 0..self.obstacles.len().max(1) {
                    let lam = if lambda.len() == 1 { &lambda[0] } else { &lambda[c] };
                    let min_im = lam.min_im();
                    if min_im < limits.lambda_min_im {
                        return Err(SceneError::NonDissipativeImpedance { component: c, min_im });
                    }
                }
            }
        }
        Ok(())
    }

    /// True when `z` is inside (or on) the closure of some obstacle.
    pub fn in_obstacle_closure(&self, z: Vec2) -> bool {
        let tol = 1e-9 * self.outer.diameter();
        self.obstacles
            .iter()
            .any(|c| c.contains(z) || c.distance_to(z) <= tol)
    }

    /// Distance from `z` to the obstacle closure (`infinity` when empty).
    pub fn dist_to_obstacles(&self, z: Vec2) -> f64 {
        self.obstacles
            .iter()
            .map(|c| if c.contains(z) { 0.0 } else { c.distance_to(z) })
            .fold(f64::INFINITY, f64::min)
    }

    /// True when `z` lies strictly inside the computational domain
    /// (inside the outer curve and outside every obstacle closure).
    pub fn in_domain(&self, z: Vec2) -> bool {
        self.outer.contains(z) && !self.in_obstacle_closure(z)
    }

    /// Scene with the obstacles removed (the background configuration).
    pub fn background(&self) -> ObstacleScene {
        ObstacleScene::empty(self.outer.clone(), self.k)
    }
}

/// Minimum distance between two closed curves (sampled).
fn curve_pair_distance(a: &CurveSpec, b: &CurveSpec) -> f64 {
    let mut best = f64::MAX;
    for s in 0..256 {
        let t = 2.0 * std::f64::consts::PI * s as f64 / 256.0;
        best = best.min(b.distance_to(a.point(t)));
    }
    best
}
