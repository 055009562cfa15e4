//! Needles (piecewise-linear probe curves) and their tube neighbourhoods.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::curve::CurveSpec;
use super::scene::ObstacleScene;
use crate::vec2::{dist_point_segment, segments_cross, Vec2};

/// Relative tolerance for "starts on the outer boundary".
pub const ON_BOUNDARY_REL_TOL: f64 = 1e-9;
/// Starting points within this relative distance of the boundary are snapped.
pub const SNAP_REL_TOL: f64 = 1e-6;

/// A piecewise-linear, non-self-intersecting curve from the outer boundary to
/// an interior tip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeedleSpec {
    pub vertices: Vec<Vec2>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeedleViolation {
    #[error("needle must have at least two vertices")]
    TooFewVertices,
    #[error("start not on the outer boundary (distance {dist:e})")]
    StartNotOnBoundary { dist: f64 },
    #[error("vertex {index} is not interior to the domain")]
    VertexNotInterior { index: usize },
    #[error("consecutive vertices {index} and {} coincide", index + 1)]
    DuplicateVertex { index: usize },
    #[error("needle is self-intersecting")]
    SelfIntersecting,
    #[error("grazing needle: touches obstacle component {component} without entering it")]
    Grazing { component: usize },
}

impl NeedleSpec {
    pub fn new(vertices: Vec<Vec2>) -> Self {
        NeedleSpec { vertices }
    }

    /// Straight needle from a boundary point to the tip.
    pub fn segment(start: Vec2, tip: Vec2) -> Self {
        NeedleSpec { vertices: vec![start, tip] }
    }

    pub fn tip(&self) -> Vec2 {
        *self.vertices.last().expect("needle has vertices")
    }

    pub fn start(&self) -> Vec2 {
        self.vertices[0]
    }

    /// Exact Euclidean distance from `z` to the polyline.
    pub fn distance(&self, z: Vec2) -> f64 {
        if self.vertices.len() == 1 {
            return z.dist(self.vertices[0]);
        }
        self.vertices
            .windows(2)
            .map(|w| dist_point_segment(z, w[0], w[1]))
            .fold(f64::MAX, f64::min)
    }

    pub fn total_length(&self) -> f64 {
        self.vertices.windows(2).map(|w| w[0].dist(w[1])).sum()
    }

    /// Equally spaced sample points along the polyline (including endpoints).
    pub fn sample(&self, spacing: f64) -> Vec<Vec2> {
        let mut out = Vec::new();
        for w in self.vertices.windows(2) {
            let len = w[0].dist(w[1]);
            let steps = (len / spacing).ceil().max(1.0) as usize;
            for s in 0..steps {
                out.push(w[0] + (w[1] - w[0]) * (s as f64 / steps as f64));
            }
        }
        out.push(self.tip());
        out
    }

    /// Validates the needle against the outer boundary, snapping the start
    /// point onto it when it is within the snap tolerance. Returns the
    /// (possibly snapped) needle.
    pub fn validated(
        &self,
        outer: &CurveSpec,
        scene: Option<&ObstacleScene>,
    ) -> Result<NeedleSpec, NeedleViolation> {
        if self.vertices.len() < 2 {
            return Err(NeedleViolation::TooFewVertices);
        }
        for (i, w) in self.vertices.windows(2).enumerate() {
            if w[0].dist(w[1]) == 0.0 {
                return Err(NeedleViolation::DuplicateVertex { index: i });
            }
        }
        let diam = outer.diameter();
        let mut fixed = self.clone();
        let (t0, d0) = outer.nearest_point(self.vertices[0]);
        if d0 > ON_BOUNDARY_REL_TOL * diam {
            if d0 <= SNAP_REL_TOL * diam {
                fixed.vertices[0] = outer.point(t0);
            } else {
                return Err(NeedleViolation::StartNotOnBoundary { dist: d0 });
            }
        }
        for (i, v) in fixed.vertices.iter().enumerate().skip(1) {
            if !outer.contains(*v) {
                return Err(NeedleViolation::VertexNotInterior { index: i });
            }
        }
        let n = fixed.vertices.len();
        for i in 0..n.saturating_sub(1) {
            for j in (i + 2)..n.saturating_sub(1) {
                if segments_cross(
                    fixed.vertices[i],
                    fixed.vertices[i + 1],
                    fixed.vertices[j],
                    fixed.vertices[j + 1],
                ) {
                    return Err(NeedleViolation::SelfIntersecting);
                }
            }
        }
        if let Some(scene) = scene {
            if let NeedleClass::Grazing { component } = classify_needle(fixed.tip(), &fixed, scene)
            {
                return Err(NeedleViolation::Grazing { component });
            }
        }
        Ok(fixed)
    }
}

/// Free-function form of the polyline distance.
pub fn dist_to_needle(z: Vec2, needle: &NeedleSpec) -> f64 {
    needle.distance(z)
}

/// The closed tube of radius `eps` around a needle.
#[derive(Debug, Clone, PartialEq)]
pub struct TubeSet {
    pub needle: NeedleSpec,
    pub radius: f64,
}

impl TubeSet {
    pub fn new(needle: NeedleSpec, radius: f64) -> Self {
        assert!(radius > 0.0, "tube radius must be positive");
        TubeSet { needle, radius }
    }

    pub fn contains(&self, z: Vec2) -> bool {
        self.needle.distance(z) <= self.radius
    }
}

/// How a needle with a given tip relates to the obstacle set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeedleClass {
    /// The tip lies in the obstacle closure.
    TipInObstacle { component: usize },
    /// The tip is outside but the needle passes through an obstacle.
    CrossesObstacle { component: usize },
    /// The needle stays clear of the obstacle closure.
    Avoids,
    /// The needle touches an obstacle boundary without entering (rejected input).
    Grazing { component: usize },
}

/// Classifies `(x, needle)` against the scene's obstacles by the sign of the
/// minimum signed distance along the needle (negative inside an obstacle).
pub fn classify_needle(x: Vec2, needle: &NeedleSpec, scene: &ObstacleScene) -> NeedleClass {
    let graze_tol = 1e-9 * scene.outer.diameter();
    for (ci, comp) in scene.obstacles.iter().enumerate() {
        let tip_dist = comp.distance_to(x);
        if comp.contains(x) || tip_dist <= graze_tol {
            return NeedleClass::TipInObstacle { component: ci };
        }
    }
    let mut grazing: Option<usize> = None;
    for (ci, comp) in scene.obstacles.iter().enumerate() {
        let m = min_signed_distance(needle, comp);
        if m < -graze_tol {
            return NeedleClass::CrossesObstacle { component: ci };
        }
        if m <= graze_tol && grazing.is_none() {
            grazing = Some(ci);
        }
    }
    match grazing {
        Some(component) => NeedleClass::Grazing { component },
        None => NeedleClass::Avoids,
    }
}

/// Minimum of the signed distance (negative inside) from needle points to a
/// closed curve. Circles admit the exact segment formula; other curves use
/// dense sampling plus local ternary refinement.
fn min_signed_distance(needle: &NeedleSpec, curve: &CurveSpec) -> f64 {
    if let crate::geometry::CurveSpec::Circle { center, radius } = curve {
        return needle
            .vertices
            .windows(2)
            .map(|w| crate::vec2::dist_point_segment(*center, w[0], w[1]) - radius)
            .fold(f64::MAX, f64::min);
    }
    let signed = |z: Vec2| {
        let d = curve.distance_to(z);
        if curve.contains(z) {
            -d
        } else {
            d
        }
    };
    let mut best = f64::MAX;
    for w in needle.vertices.windows(2) {
        let len = w[0].dist(w[1]);
        let steps = ((len / (0.01 * curve.diameter().max(1e-12))).ceil() as usize).clamp(8, 800);
        let at = |s: f64| w[0] + (w[1] - w[0]) * s;
        let mut best_s = 0.0;
        let mut best_d = f64::MAX;
        for i in 0..=steps {
            let s = i as f64 / steps as f64;
            let d = signed(at(s));
            if d < best_d {
                best_d = d;
                best_s = s;
            }
        }
        // ternary refinement around the best sample
        let mut lo = (best_s - 1.0 / steps as f64).max(0.0);
        let mut hi = (best_s + 1.0 / steps as f64).min(1.0);
        for _ in 0..48 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if signed(at(m1)) < signed(at(m2)) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        best = best.min(signed(at(0.5 * (lo + hi)))).min(best_d);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::scene::{BoundaryCondition, ObstacleScene};

    fn unit_disk() -> CurveSpec {
        CurveSpec::circle(Vec2::ZERO, 1.0)
    }

    fn disk_scene(cx: f64, cy: f64, r: f64) -> ObstacleScene {
        ObstacleScene::new(
            unit_disk(),
            vec![CurveSpec::circle(Vec2::new(cx, cy), r)],
            BoundaryCondition::SoundSoft,
            1.0,
        )
    }

    #[test]
    fn distance_examples() {
        let sigma = NeedleSpec::new(vec![Vec2::ZERO, Vec2::new(1.0, 0.0)]);
        assert_eq!(dist_to_needle(Vec2::new(0.5, 1.0), &sigma), 1.0);
        assert_eq!(dist_to_needle(Vec2::new(0.5, 0.0), &sigma), 0.0);
        assert_eq!(dist_to_needle(Vec2::new(2.0, 0.0), &sigma), 1.0);
    }

    #[test]
    fn distance_is_lipschitz() {
        let sigma = NeedleSpec::new(vec![
            Vec2::new(1.0, 0.0),
            Vec2::new(0.2, 0.3),
            Vec2::new(-0.4, -0.1),
        ]);
        let mut state = 123456789u64;
        let mut rnd = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..500 {
            let z1 = Vec2::new(rnd(), rnd());
            let z2 = Vec2::new(rnd(), rnd());
            let lhs = (sigma.distance(z1) - sigma.distance(z2)).abs();
            assert!(lhs <= z1.dist(z2) + 1e-12);
        }
    }

    #[test]
    fn tube_membership_and_monotonicity() {
        let sigma = NeedleSpec::new(vec![Vec2::new(1.0, 0.0), Vec2::new(0.0, 0.0)]);
        let t1 = TubeSet::new(sigma.clone(), 0.1);
        let t2 = TubeSet::new(sigma.clone(), 0.3);
        let mut state = 42u64;
        let mut rnd = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..10_000 {
            let z = Vec2::new(rnd(), rnd());
            assert_eq!(t1.contains(z), sigma.distance(z) <= 0.1);
            if t1.contains(z) {
                assert!(t2.contains(z), "tube monotonicity violated at {z:?}");
            }
        }
    }

    #[test]
    fn validation_ok_and_snapping() {
        let outer = unit_disk();
        let ok = NeedleSpec::segment(Vec2::new(1.0, 0.0), Vec2::ZERO);
        assert!(ok.validated(&outer, None).is_ok());

        // slightly off the boundary: snapped
        let off = NeedleSpec::segment(Vec2::new(1.0 + 1e-7, 0.0), Vec2::ZERO);
        let snapped = off.validated(&outer, None).unwrap();
        assert!((snapped.vertices[0].norm() - 1.0).abs() < 1e-12);

        // interior start: rejected
        let bad = NeedleSpec::segment(Vec2::new(0.5, 0.0), Vec2::ZERO);
        assert!(matches!(
            bad.validated(&outer, None),
            Err(NeedleViolation::StartNotOnBoundary { .. })
        ));
    }

    #[test]
    fn validation_rejects_self_intersection_and_duplicates() {
        let outer = unit_disk();
        let zigzag = NeedleSpec::new(vec![
            Vec2::new(1.0, 0.0),
            Vec2::new(-0.5, 0.1),
            Vec2::new(-0.5, -0.1),
            Vec2::new(0.5, 0.05),
        ]);
        assert!(matches!(
            zigzag.validated(&outer, None),
            Err(NeedleViolation::SelfIntersecting)
        ));
        let dup = NeedleSpec::new(vec![Vec2::new(1.0, 0.0), Vec2::new(1.0, 0.0), Vec2::ZERO]);
        assert!(matches!(
            dup.validated(&outer, None),
            Err(NeedleViolation::DuplicateVertex { index: 0 })
        ));
    }

    #[test]
    fn classify_basic_cases() {
        let scene = disk_scene(0.0, 0.0, 0.4);
        // tip at the obstacle center
        let n1 = NeedleSpec::segment(Vec2::new(1.0, 0.0), Vec2::ZERO);
        assert!(matches!(
            classify_needle(n1.tip(), &n1, &scene),
            NeedleClass::TipInObstacle { component: 0 }
        ));
        // stops before the obstacle
        let n2 = NeedleSpec::segment(Vec2::new(1.0, 0.0), Vec2::new(0.6, 0.0));
        assert!(matches!(classify_needle(n2.tip(), &n2, &scene), NeedleClass::Avoids));
        // passes straight through
        let n3 = NeedleSpec::segment(Vec2::new(1.0, 0.0), Vec2::new(-0.6, 0.0));
        assert!(matches!(
            classify_needle(n3.tip(), &n3, &scene),
            NeedleClass::CrossesObstacle { component: 0 }
        ));
    }

    #[test]
    fn grazing_detected_and_rejected() {
        let scene = disk_scene(0.0, 0.0, 0.4);
        // tangent line y = 0.4 touches the obstacle at (0, 0.4)
        let start = Vec2::new(-(1.0f64 - 0.16).sqrt(), 0.4);
        let graze = NeedleSpec::segment(start, Vec2::new(0.5, 0.4));
        assert!(matches!(
            classify_needle(graze.tip(), &graze, &scene),
            NeedleClass::Grazing { component: 0 }
        ));
        assert!(matches!(
            graze.validated(&scene.outer, Some(&scene)),
            Err(NeedleViolation::Grazing { component: 0 })
        ));
    }

    #[test]
    fn classification_is_rigid_motion_invariant() {
        let scene = disk_scene(0.2, -0.1, 0.3);
        let needles = [
            NeedleSpec::segment(Vec2::new(1.0, 0.0), Vec2::new(0.2, -0.1)),
            NeedleSpec::segment(Vec2::new(1.0, 0.0), Vec2::new(0.7, 0.0)),
            NeedleSpec::segment(Vec2::new(1.0, 0.0), Vec2::new(-0.5, -0.2)),
        ];
        let angle = 1.1;
        let shift = Vec2::new(0.4, -2.0);
        let moved_scene = ObstacleScene::new(
            scene.outer.transformed(angle, shift),
            scene.obstacles.iter().map(|c| c.transformed(angle, shift)).collect(),
            scene.bc.clone(),
            scene.k,
        );
        for n in &needles {
            let moved = NeedleSpec::new(
                n.vertices.iter().map(|v| v.rotated(angle) + shift).collect(),
            );
            let a = classify_needle(n.tip(), n, &scene);
            let b = classify_needle(moved.tip(), &moved, &moved_scene);
            assert_eq!(a, b, "classification changed under rigid motion for {n:?}");
        }
    }
}
