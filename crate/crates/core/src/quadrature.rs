//! Area quadrature over curve interiors and clipped subregions.
//!
//! Disk and ellipse interiors get a polar tensor rule (Gauss-Legendre in the
//! radial direction, trapezoid in the angle) which is spectrally accurate for
//! smooth integrands. General curve interiors and masked regions (tube
//! excisions, balls and cones clipped to the domain) fall back to a midpoint
//! tensor grid restricted by inside tests, which converges under refinement.

use crate::geometry::{CurveSpec, TubeSet};
use crate::vec2::Vec2;

/// Gauss-Legendre nodes and weights on `[0, 1]` by Newton iteration.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // initial guess (Chebyshev-like) on [-1, 1]
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Legendre P_n(x) and derivative via the three-term recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let pj = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = pj;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let mut p0 = 1.0;
        let mut p1 = x;
        for j in 2..=n {
            let pj = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
            p0 = p1;
            p1 = pj;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (x + 1.0), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// A region of the plane that supports area quadrature.
#[derive(Debug, Clone)]
pub enum Region {
    /// Interior of a closed curve.
    CurveInterior(CurveSpec),
    /// Interior of a curve minus a needle tube.
    CurveMinusTube { curve: CurveSpec, tube: TubeSet },
    /// Open ball clipped to the interior of `domain`.
    BallInDomain { center: Vec2, radius: f64, domain: CurveSpec },
    /// Finite open cone (circular sector) clipped to the interior of `domain`.
    ConeInDomain {
        vertex: Vec2,
        axis_angle: f64,
        half_angle: f64,
        radius: f64,
        domain: CurveSpec,
    },
}

impl Region {
    pub fn contains(&self, z: Vec2) -> bool {
        match self {
            Region::CurveInterior(c) => c.contains(z),
            Region::CurveMinusTube { curve, tube } => curve.contains(z) && !tube.contains(z),
            Region::BallInDomain { center, radius, domain } => {
                z.dist(*center) < *radius && domain.contains(z)
            }
            Region::ConeInDomain { vertex, axis_angle, half_angle, radius, domain } => {
                let d = z - *vertex;
                let r = d.norm();
                if r == 0.0 || r >= *radius || !domain.contains(z) {
                    return false;
                }
                let mut ang = d.angle() - axis_angle;
                while ang > std::f64::consts::PI {
                    ang -= 2.0 * std::f64::consts::PI;
                }
                while ang < -std::f64::consts::PI {
                    ang += 2.0 * std::f64::consts::PI;
                }
                ang.abs() < *half_angle
            }
        }
    }

    /// Quadrature nodes and weights at the given refinement level.
    ///
    /// `level = 0` is the base resolution; each extra level doubles the node
    /// count per direction.
    pub fn quadrature(&self, level: u32) -> Vec<(Vec2, f64)> {
        let refine = 1usize << level;
        match self {
            Region::CurveInterior(CurveSpec::Circle { center, radius }) => {
                polar_rule(*center, *radius, 24 * refine, 48 * refine, None)
            }
            Region::CurveInterior(CurveSpec::Ellipse { center, semi_axes, rotation }) => {
                // affine image of the unit-disk rule
                let base = polar_rule(Vec2::ZERO, 1.0, 24 * refine, 48 * refine, None);
                let det = semi_axes[0] * semi_axes[1];
                base.into_iter()
                    .map(|(p, w)| {
                        let q = Vec2::new(p.x * semi_axes[0], p.y * semi_axes[1])
                            .rotated(*rotation)
                            + *center;
                        (q, w * det)
                    })
                    .collect()
            }
            Region::CurveInterior(curve) => masked_grid(curve, 96 * refine, |_| true),
            Region::CurveMinusTube { curve, tube } => match curve {
                CurveSpec::Circle { center, radius } => polar_rule(
                    *center,
                    *radius,
                    24 * refine,
                    48 * refine,
                    Some(&|z| !tube.contains(z)),
                ),
                _ => masked_grid(curve, 96 * refine, |z| !tube.contains(z)),
            },
            Region::BallInDomain { center, radius, domain } => {
                let d = domain.clone();
                polar_rule(*center, *radius, 24 * refine, 48 * refine, Some(&move |z| {
                    d.contains(z)
                }))
            }
            Region::ConeInDomain { vertex, axis_angle, half_angle, radius, domain } => {
                // polar rule over the sector
                let nr = 24 * refine;
                let nt = 32 * refine;
                let mut out = Vec::new();
                for (rs, rw) in gauss_legendre_unit(nr) {
                    let r = rs * radius;
                    for it in 0..nt {
                        let frac = (it as f64 + 0.5) / nt as f64;
                        let theta = axis_angle - half_angle + 2.0 * half_angle * frac;
                        let z = *vertex + Vec2::new(r * theta.cos(), r * theta.sin());
                        if domain.contains(z) {
                            let w = rw * radius * r * (2.0 * half_angle / nt as f64);
                            out.push((z, w));
                        }
                    }
                }
                out
            }
        }
    }
}

/// Polar tensor rule over a disk, with an optional mask.
fn polar_rule(
    center: Vec2,
    radius: f64,
    nr: usize,
    nt: usize,
    mask: Option<&dyn Fn(Vec2) -> bool>,
) -> Vec<(Vec2, f64)> {
    let mut out = Vec::with_capacity(nr * nt);
    for (rs, rw) in gauss_legendre_unit(nr) {
        let r = rs * radius;
        for it in 0..nt {
            let theta = 2.0 * std::f64::consts::PI * (it as f64 + 0.5) / nt as f64;
            let z = center + Vec2::new(r * theta.cos(), r * theta.sin());
            if mask.map_or(true, |m| m(z)) {
                // dA = r dr dtheta
                let w = rw * radius * r * (2.0 * std::f64::consts::PI / nt as f64);
                out.push((z, w));
            }
        }
    }
    out
}

/// Midpoint tensor grid over the curve's bounding box, restricted by the
/// inside test and an extra mask. Inside-ness is resolved by scanline
/// rasterization against a dense polygon approximation of the curve.
fn masked_grid(
    curve: &CurveSpec,
    n_per_side: usize,
    mask: impl Fn(Vec2) -> bool,
) -> Vec<(Vec2, f64)> {
    let (lo, hi) = curve.bounding_box();
    let hx = (hi.x - lo.x) / n_per_side as f64;
    let hy = (hi.y - lo.y) / n_per_side as f64;
    let w = hx * hy;
    let n_poly = 4096;
    let poly: Vec<Vec2> = (0..n_poly)
        .map(|i| curve.point(2.0 * std::f64::consts::PI * i as f64 / n_poly as f64))
        .collect();
    let mut out = Vec::new();
    let mut crossings: Vec<f64> = Vec::new();
    for j in 0..n_per_side {
        let y = lo.y + (j as f64 + 0.5) * hy;
        crossings.clear();
        for e in 0..n_poly {
            let a = poly[e];
            let b = poly[(e + 1) % n_poly];
            // half-open rule avoids double counting at shared vertices
            if (a.y <= y) != (b.y <= y) {
                crossings.push(a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x));
            }
        }
        crossings.sort_by(|p, q| p.partial_cmp(q).unwrap());
        for pair in crossings.chunks_exact(2) {
            let i_lo = ((pair[0] - lo.x) / hx - 0.5).ceil().max(0.0) as usize;
            let i_hi = (((pair[1] - lo.x) / hx - 0.5).floor() as isize).min(n_per_side as isize - 1);
            let mut i = i_lo as isize;
            while i <= i_hi {
                let z = Vec2::new(lo.x + (i as f64 + 0.5) * hx, y);
                if mask(z) {
                    out.push((z, w));
                }
                i += 1;
            }
        }
    }
    out
}

/// Integrates `f` over the region at the given refinement level.
pub fn area_quadrature(region: &Region, f: impl Fn(Vec2) -> f64, level: u32) -> f64 {
    region
        .quadrature(level)
        .iter()
        .map(|&(z, w)| w * f(z))
        .sum()
}
