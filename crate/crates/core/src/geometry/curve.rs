//! Smooth closed parametrized curves and their discretization.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vec2::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("invalid curve: {0}")]
    Invalid(String),
    #[error("discretization size {0} must be even and at least 16")]
    BadNodeCount(usize),
}

/// A smooth closed curve given by a 2pi-periodic parametrization with
/// continuous second derivative, oriented counterclockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveSpec {
    Circle {
        center: Vec2,
        radius: f64,
    },
    Ellipse {
        center: Vec2,
        semi_axes: [f64; 2],
        #[serde(default)]
        rotation: f64,
    },
    /// Trigonometric-polynomial curve: each coordinate is a finite cosine/sine
    /// series in the parameter. Covers kite-shaped and similar smooth shapes.
    Trig {
        center: Vec2,
        x_cos: Vec<f64>,
        x_sin: Vec<f64>,
        y_cos: Vec<f64>,
        y_sin: Vec<f64>,
    },
}

impl CurveSpec {
    pub fn circle(center: Vec2, radius: f64) -> Self {
        CurveSpec::Circle { center, radius }
    }

    /// The classic kite shape, scaled and translated.
    pub fn kite(center: Vec2, scale: f64) -> Self {
        CurveSpec::Trig {
            center,
            x_cos: vec![-0.65 * scale, scale, 0.65 * scale],
            x_sin: vec![0.0, 0.0, 0.0],
            y_cos: vec![0.0, 0.0, 0.0],
            y_sin: vec![0.0, 1.5 * scale, 0.0],
        }
    }

    pub fn validate(&self) -> Result<(), CurveError> {
        match self {
            CurveSpec::Circle { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(CurveError::Invalid(format!("radius {radius} must be positive")));
                }
            }
            CurveSpec::Ellipse { semi_axes, .. } => {
                if !(semi_axes[0] > 0.0 && semi_axes[1] > 0.0) {
                    return Err(CurveError::Invalid(format!(
                        "semi-axes {semi_axes:?} must be positive"
                    )));
                }
            }
            CurveSpec::Trig { x_cos, x_sin, y_cos, y_sin, .. } => {
                if x_cos.len() != x_sin.len() || y_cos.len() != y_sin.len() {
                    return Err(CurveError::Invalid(
                        "cosine/sine coefficient lists must have equal length".into(),
                    ));
                }
                if x_cos.is_empty() || y_cos.is_empty() {
                    return Err(CurveError::Invalid("empty coefficient lists".into()));
                }
                // orientation and regularity checked on samples
                let n = 1024;
                let mut min_speed = f64::MAX;
                for i in 0..n {
                    let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    min_speed = min_speed.min(self.derivative(t).norm());
                }
                if min_speed < 1e-10 {
                    return Err(CurveError::Invalid("parametrization is singular".into()));
                }
                if self.signed_area() <= 0.0 {
                    return Err(CurveError::Invalid(
                        "curve must be oriented counterclockwise".into(),
                    ));
                }
                if self.self_intersects() {
                    return Err(CurveError::Invalid("curve is self-intersecting".into()));
                }
            }
        }
        Ok(())
    }

    pub fn point(&self, t: f64) -> Vec2 {
        match self {
            CurveSpec::Circle { center, radius } => {
                *center + Vec2::new(radius * t.cos(), radius * t.sin())
            }
            CurveSpec::Ellipse { center, semi_axes, rotation } => {
                let p = Vec2::new(semi_axes[0] * t.cos(), semi_axes[1] * t.sin());
                *center + p.rotated(*rotation)
            }
            CurveSpec::Trig { center, x_cos, x_sin, y_cos, y_sin } => {
                let mut p = *center;
                for (j, (&c, &s)) in x_cos.iter().zip(x_sin).enumerate() {
                    let a = j as f64 * t;
                    p.x += c * a.cos() + s * a.sin();
                }
                for (j, (&c, &s)) in y_cos.iter().zip(y_sin).enumerate() {
                    let a = j as f64 * t;
                    p.y += c * a.cos() + s * a.sin();
                }
                p
            }
        }
    }

    pub fn derivative(&self, t: f64) -> Vec2 {
        match self {
            CurveSpec::Circle { radius, .. } => {
                Vec2::new(-radius * t.sin(), radius * t.cos())
            }
            CurveSpec::Ellipse { semi_axes, rotation, .. } => {
                let p = Vec2::new(-semi_axes[0] * t.sin(), semi_axes[1] * t.cos());
                p.rotated(*rotation)
            }
            CurveSpec::Trig { x_cos, x_sin, y_cos, y_sin, .. } => {
                let mut p = Vec2::ZERO;
                for (j, (&c, &s)) in x_cos.iter().zip(x_sin).enumerate() {
                    let w = j as f64;
                    let a = w * t;
                    p.x += w * (-c * a.sin() + s * a.cos());
                }
                for (j, (&c, &s)) in y_cos.iter().zip(y_sin).enumerate() {
                    let w = j as f64;
                    let a = w * t;
                    p.y += w * (-c * a.sin() + s * a.cos());
                }
                p
            }
        }
    }

    pub fn second_derivative(&self, t: f64) -> Vec2 {
        match self {
            CurveSpec::Circle { radius, .. } => {
                Vec2::new(-radius * t.cos(), -radius * t.sin())
            }
            CurveSpec::Ellipse { semi_axes, rotation, .. } => {
                let p = Vec2::new(-semi_axes[0] * t.cos(), -semi_axes[1] * t.sin());
                p.rotated(*rotation)
            }
            CurveSpec::Trig { x_cos, x_sin, y_cos, y_sin, .. } => {
                let mut p = Vec2::ZERO;
                for (j, (&c, &s)) in x_cos.iter().zip(x_sin).enumerate() {
                    let w = j as f64;
                    let a = w * t;
                    p.x -= w * w * (c * a.cos() + s * a.sin());
                }
                for (j, (&c, &s)) in y_cos.iter().zip(y_sin).enumerate() {
                    let w = j as f64;
                    let a = w * t;
                    p.y -= w * w * (c * a.cos() + s * a.sin());
                }
                p
            }
        }
    }

    /// Unit outward normal for a counterclockwise parametrization.
    pub fn outward_normal(&self, t: f64) -> Vec2 {
        self.derivative(t).perp_cw().normalized()
    }

    /// Signed enclosed area (positive for counterclockwise orientation).
    pub fn signed_area(&self) -> f64 {
        match self {
            CurveSpec::Circle { radius, .. } => std::f64::consts::PI * radius * radius,
            CurveSpec::Ellipse { semi_axes, .. } => {
                std::f64::consts::PI * semi_axes[0] * semi_axes[1]
            }
            CurveSpec::Trig { .. } => {
                let n = 4096;
                let mut area = 0.0;
                for i in 0..n {
                    let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    area += self.point(t).cross(self.derivative(t));
                }
                0.5 * area * 2.0 * std::f64::consts::PI / n as f64
            }
        }
    }

    fn self_intersects(&self) -> bool {
        let n = 512;
        let pts: Vec<Vec2> = (0..n)
            .map(|i| self.point(2.0 * std::f64::consts::PI * i as f64 / n as f64))
            .collect();
        for i in 0..n {
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                if crate::vec2::segments_cross(
                    pts[i],
                    pts[(i + 1) % n],
                    pts[j],
                    pts[(j + 1) % n],
                ) {
                    return true;
                }
            }
        }
        false
    }

    /// Strict interior test.
    pub fn contains(&self, z: Vec2) -> bool {
        match self {
            CurveSpec::Circle { center, radius } => z.dist(*center) < *radius,
            CurveSpec::Ellipse { center, semi_axes, rotation } => {
                let q = (z - *center).rotated(-rotation);
                let u = q.x / semi_axes[0];
                let v = q.y / semi_axes[1];
                u * u + v * v < 1.0
            }
            CurveSpec::Trig { .. } => self.winding_number(z) == 1,
        }
    }

    /// Winding number of the curve around `z` by summed angle increments,
    /// escalating the sampling until the total is unambiguous.
    pub fn winding_number(&self, z: Vec2) -> i32 {
        let mut n = 256;
        loop {
            let mut total = 0.0;
            let mut prev = self.point(0.0) - z;
            for i in 1..=n {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                let cur = self.point(t) - z;
                total += prev.cross(cur).atan2(prev.dot(cur));
                prev = cur;
            }
            let w = total / (2.0 * std::f64::consts::PI);
            let rounded = w.round();
            if (w - rounded).abs() < 1e-6 || n >= 4096 {
                return rounded as i32;
            }
            n *= 4;
        }
    }

    /// Distance from `z` to the curve (sampled and locally refined).
    pub fn distance_to(&self, z: Vec2) -> f64 {
        self.nearest_point(z).1
    }

    /// Returns `(t, distance)` of the closest curve point to `z`.
    pub fn nearest_point(&self, z: Vec2) -> (f64, f64) {
        if let CurveSpec::Circle { center, radius } = self {
            let d = z - *center;
            let r = d.norm();
            if r < 1e-300 {
                return (0.0, *radius);
            }
            return (d.y.atan2(d.x).rem_euclid(2.0 * std::f64::consts::PI), (r - radius).abs());
        }
        let n = if matches!(self, CurveSpec::Ellipse { .. }) { 256 } else { 512 };
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut best_i = 0;
        let mut best = f64::MAX;
        let dist_sq = |t: f64| (self.point(t) - z).norm_sq();
        for i in 0..n {
            let d = dist_sq(two_pi * i as f64 / n as f64);
            if d < best {
                best = d;
                best_i = i;
            }
        }
        // golden-section refinement on the bracketing interval
        let mut a = two_pi * (best_i as f64 - 1.0) / n as f64;
        let mut b = two_pi * (best_i as f64 + 1.0) / n as f64;
        let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let mut fc = dist_sq(c);
        let mut fd = dist_sq(d);
        for _ in 0..56 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = dist_sq(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = dist_sq(d);
            }
        }
        let t = 0.5 * (a + b);
        (t.rem_euclid(two_pi), dist_sq(t).sqrt())
    }

    /// Loose upper bound on the curve diameter.
    pub fn diameter(&self) -> f64 {
        match self {
            CurveSpec::Circle { radius, .. } => 2.0 * radius,
            CurveSpec::Ellipse { semi_axes, .. } => 2.0 * semi_axes[0].max(semi_axes[1]),
            CurveSpec::Trig { .. } => {
                let (lo, hi) = self.bounding_box();
                (hi - lo).norm()
            }
        }
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let n = 1024;
        let mut lo = Vec2::new(f64::MAX, f64::MAX);
        let mut hi = Vec2::new(f64::MIN, f64::MIN);
        for i in 0..n {
            let p = self.point(2.0 * std::f64::consts::PI * i as f64 / n as f64);
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    /// Approximate centroid of the enclosed region.
    pub fn centroid(&self) -> Vec2 {
        match self {
            CurveSpec::Circle { center, .. } | CurveSpec::Ellipse { center, .. } => *center,
            CurveSpec::Trig { .. } => {
                // Green's theorem: A cx = (1/2) oint x^2 dy, A cy = -(1/2) oint y^2 dx
                let n = 4096;
                let mut area = 0.0;
                let mut cx = 0.0;
                let mut cy = 0.0;
                for i in 0..n {
                    let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    let p = self.point(t);
                    let dp = self.derivative(t);
                    area += p.cross(dp);
                    cx += p.x * p.x * dp.y;
                    cy -= p.y * p.y * dp.x;
                }
                Vec2::new(cx / area, cy / area)
            }
        }
    }

    /// Rigid motion: rotate by `angle` about the origin, then translate.
    pub fn transformed(&self, angle: f64, shift: Vec2) -> CurveSpec {
        match self {
            CurveSpec::Circle { center, radius } => CurveSpec::Circle {
                center: center.rotated(angle) + shift,
                radius: *radius,
            },
            CurveSpec::Ellipse { center, semi_axes, rotation } => CurveSpec::Ellipse {
                center: center.rotated(angle) + shift,
                semi_axes: *semi_axes,
                rotation: rotation + angle,
            },
            CurveSpec::Trig { center, x_cos, x_sin, y_cos, y_sin } => {
                let (s, c) = angle.sin_cos();
                let rot = |xc: &Vec<f64>, yc: &Vec<f64>, sx: f64, sy: f64| -> Vec<f64> {
                    xc.iter().zip(yc).map(|(&x, &y)| sx * x + sy * y).collect()
                };
                CurveSpec::Trig {
                    center: center.rotated(angle) + shift,
                    x_cos: rot(x_cos, y_cos, c, -s),
                    x_sin: rot(x_sin, y_sin, c, -s),
                    y_cos: rot(x_cos, y_cos, s, c),
                    y_sin: rot(x_sin, y_sin, s, c),
                }
            }
        }
    }
}

/// A closed curve sampled at equispaced parameter values, with the analytic
/// data needed by quadrature rules and layer-potential kernels.
#[derive(Debug, Clone)]
pub struct DiscretizedCurve {
    pub spec: CurveSpec,
    pub nodes: Vec<Vec2>,
    pub derivatives: Vec<Vec2>,
    pub second_derivatives: Vec<Vec2>,
    /// Unit outward normals per node.
    pub normals: Vec<Vec2>,
    /// Arc-length Jacobians |gamma'(t_j)| per node.
    pub jacobians: Vec<f64>,
}

impl DiscretizedCurve {
    pub fn new(spec: &CurveSpec, m: usize) -> Result<Self, CurveError> {
        if m < 16 || m % 2 != 0 {
            return Err(CurveError::BadNodeCount(m));
        }
        spec.validate()?;
        let mut nodes = Vec::with_capacity(m);
        let mut derivatives = Vec::with_capacity(m);
        let mut second_derivatives = Vec::with_capacity(m);
        let mut normals = Vec::with_capacity(m);
        let mut jacobians = Vec::with_capacity(m);
        for i in 0..m {
            let t = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
            let d = spec.derivative(t);
            nodes.push(spec.point(t));
            derivatives.push(d);
            second_derivatives.push(spec.second_derivative(t));
            normals.push(spec.outward_normal(t));
            jacobians.push(d.norm());
        }
        Ok(DiscretizedCurve {
            spec: spec.clone(),
            nodes,
            derivatives,
            second_derivatives,
            normals,
            jacobians,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn param(&self, i: usize) -> f64 {
        2.0 * std::f64::consts::PI * i as f64 / self.len() as f64
    }

    pub fn spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.len() as f64
    }

    /// Trapezoid quadrature weight of node `i` for arc-length integrals.
    pub fn weight(&self, i: usize) -> f64 {
        self.spacing() * self.jacobians[i]
    }

    /// Integrates a node-sampled function over the curve.
    pub fn integrate(&self, samples: &[f64]) -> f64 {
        assert_eq!(samples.len(), self.len());
        samples
            .iter()
            .enumerate()
            .map(|(i, &v)| v * self.weight(i))
            .sum()
    }

    pub fn length(&self) -> f64 {
        (0..self.len()).map(|i| self.weight(i)).sum()
    }
}
