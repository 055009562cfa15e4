//! Layer-potential operator assembly on discretized curves.
//!
//! Same-curve operators use the spectrally accurate periodic quadrature that
//! splits each kernel into a smooth part and a `ln(4 sin^2((t-tau)/2))`
//! part with dedicated weights. Cross-curve operators have smooth kernels
//! and plain trapezoid sums suffice. The hypersingular operator is realised
//! through its tangential-derivative decomposition
//! `T = d/ds S d/ds + k^2 S_{nu nu}` with spectral differentiation.

use num_complex::Complex64;

use crate::geometry::DiscretizedCurve;
use crate::specfun::{bessel_j, hankel1, EULER_GAMMA};
use crate::vec2::Vec2;

pub type CMatrix = nalgebra::DMatrix<Complex64>;

const FRAC_1_4PI: f64 = 1.0 / (4.0 * std::f64::consts::PI);

/// Weights for the product quadrature of `ln(4 sin^2((t - tau)/2))` against
/// smooth periodic factors on a 2n-point grid, evaluated at node offsets.
fn log_weights(m: usize) -> Vec<f64> {
    let n = m / 2;
    let mut weights = Vec::with_capacity(m);
    for d in 0..m {
        let td = std::f64::consts::PI * d as f64 / n as f64;
        let mut acc = 0.0;
        for j in 1..n {
            acc += (j as f64 * td).cos() / j as f64;
        }
        let w = -2.0 * std::f64::consts::PI / n as f64 * acc
            - std::f64::consts::PI / (n * n) as f64 * (n as f64 * td).cos();
        weights.push(w);
    }
    weights
}

/// Spectral differentiation matrix with respect to the curve parameter on an
/// even periodic grid.
pub fn trig_diff_matrix(m: usize) -> nalgebra::DMatrix<f64> {
    let mut d = nalgebra::DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            if i != j {
                let s = std::f64::consts::PI * (i as f64 - j as f64) / m as f64;
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                d[(i, j)] = 0.5 * sign / s.tan();
            }
        }
    }
    d
}

/// Which layer-potential trace to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// Single layer `S`.
    Single,
    /// Double layer `K` (normal derivative at the source point).
    Double,
    /// Adjoint double layer `K'` (normal derivative at the target point).
    AdjointDouble,
    /// Single layer with the `nu(t) . nu(tau)` factor (used by the
    /// hypersingular decomposition).
    SingleNormals,
}

/// Assembles the Nystrom matrix of a boundary operator from `source` to
/// collocation nodes of `target`. Pass the same curve for the singular
/// same-curve case.
pub fn assemble(
    kernel: Kernel,
    k: f64,
    target: &DiscretizedCurve,
    source: &DiscretizedCurve,
    same: bool,
) -> CMatrix {
    if same {
        assemble_same(kernel, k, target)
    } else {
        assemble_cross(kernel, k, target, source)
    }
}

fn assemble_cross(
    kernel: Kernel,
    k: f64,
    target: &DiscretizedCurve,
    source: &DiscretizedCurve,
) -> CMatrix {
    let nt = target.len();
    let ns = source.len();
    let dt = source.spacing();
    let mut a = CMatrix::zeros(nt, ns);
    for i in 0..nt {
        let x = target.nodes[i];
        for j in 0..ns {
            let y = source.nodes[j];
            let jac = source.jacobians[j];
            let value = match kernel {
                Kernel::Single => green_value(k, x, y),
                Kernel::Double => dlp_kernel(k, x, y, source.normals[j]),
                Kernel::AdjointDouble => adlp_kernel(k, x, y, target.normals[i]),
                Kernel::SingleNormals => {
                    green_value(k, x, y) * target.normals[i].dot(source.normals[j])
                }
            };
            a[(i, j)] = value * jac * dt;
        }
    }
    a
}

fn green_value(k: f64, x: Vec2, y: Vec2) -> Complex64 {
    Complex64::new(0.0, 0.25) * hankel1(0, k * x.dist(y))
}

/// `dG/dnu(y)` for distinct points.
fn dlp_kernel(k: f64, x: Vec2, y: Vec2, nu_y: Vec2) -> Complex64 {
    let e = x - y;
    let r = e.norm();
    Complex64::new(0.0, 0.25) * k * hankel1(1, k * r) * (e.dot(nu_y) / r)
}

/// `dG/dnu(x)` for distinct points.
fn adlp_kernel(k: f64, x: Vec2, y: Vec2, nu_x: Vec2) -> Complex64 {
    let e = y - x;
    let r = e.norm();
    Complex64::new(0.0, 0.25) * k * hankel1(1, k * r) * (e.dot(nu_x) / r)
}

fn assemble_same(kernel: Kernel, k: f64, curve: &DiscretizedCurve) -> CMatrix {
    let m = curve.len();
    let rw = log_weights(m);
    let dt = curve.spacing();
    let mut a = CMatrix::zeros(m, m);
    for i in 0..m {
        let ti = curve.param(i);
        let x = curve.nodes[i];
        for j in 0..m {
            let tj = curve.param(j);
            let y = curve.nodes[j];
            let jac = curve.jacobians[j];
            let d = (i + m - j) % m;
            let (log_part, smooth_part) = if i == j {
                diagonal_split(kernel, k, curve, i)
            } else {
                off_diagonal_split(kernel, k, x, y, ti, tj, curve, i, j)
            };
            a[(i, j)] = (rw[d] * log_part + dt * smooth_part) * jac;
        }
    }
    a
}

/// Kernel split `F = F1 * ln(4 sin^2((t-tau)/2)) + F2` away from the diagonal
/// (per unit Jacobian; the caller multiplies by `|x'(tau)|`).
#[allow(clippy::too_many_arguments)]
fn off_diagonal_split(
    kernel: Kernel,
    k: f64,
    x: Vec2,
    y: Vec2,
    ti: f64,
    tj: f64,
    curve: &DiscretizedCurve,
    i: usize,
    j: usize,
) -> (Complex64, Complex64) {
    let r = x.dist(y);
    let log_term = (4.0 * (0.5 * (ti - tj)).sin().powi(2)).ln();
    match kernel {
        Kernel::Single => {
            let full = green_value(k, x, y);
            let f1 = Complex64::new(-FRAC_1_4PI * bessel_j(0, k * r), 0.0);
            (f1, full - f1 * log_term)
        }
        Kernel::SingleNormals => {
            let dot = curve.normals[i].dot(curve.normals[j]);
            let full = green_value(k, x, y) * dot;
            let f1 = Complex64::new(-FRAC_1_4PI * bessel_j(0, k * r) * dot, 0.0);
            (f1, full - f1 * log_term)
        }
        Kernel::Double => {
            let full = dlp_kernel(k, x, y, curve.normals[j]);
            let dval = (x - y).dot(curve.normals[j]);
            let f1 = Complex64::new(-k * FRAC_1_4PI * bessel_j(1, k * r) * dval / r, 0.0);
            (f1, full - f1 * log_term)
        }
        Kernel::AdjointDouble => {
            let full = adlp_kernel(k, x, y, curve.normals[i]);
            let dval = (y - x).dot(curve.normals[i]);
            let f1 = Complex64::new(-k * FRAC_1_4PI * bessel_j(1, k * r) * dval / r, 0.0);
            (f1, full - f1 * log_term)
        }
    }
}

/// Diagonal limits of the split kernels (per unit Jacobian).
fn diagonal_split(
    kernel: Kernel,
    k: f64,
    curve: &DiscretizedCurve,
    i: usize,
) -> (Complex64, Complex64) {
    let jac = curve.jacobians[i];
    match kernel {
        Kernel::Single | Kernel::SingleNormals => {
            let f1 = Complex64::new(-FRAC_1_4PI, 0.0);
            let f2 = Complex64::new(
                -(EULER_GAMMA + (0.5 * k * jac).ln()) / (2.0 * std::f64::consts::PI),
                0.25,
            );
            (f1, f2)
        }
        Kernel::Double | Kernel::AdjointDouble => {
            // the log coefficient vanishes at the diagonal; the smooth part
            // tends to the curvature limit of the static double layer
            let dprime = curve.derivatives[i];
            let dsecond = curve.second_derivatives[i];
            let n_tilde = Vec2::new(dprime.y, -dprime.x);
            let f2 = FRAC_1_4PI * dsecond.dot(n_tilde) / (jac * jac * jac);
            (Complex64::new(0.0, 0.0), Complex64::new(f2, 0.0))
        }
    }
}

/// Hypersingular operator on a single curve via the decomposition
/// `T = (1/J) D S [(1/J) D phi] + k^2 S_{nu nu} phi`.
pub fn assemble_hypersingular_same(k: f64, curve: &DiscretizedCurve) -> CMatrix {
    let m = curve.len();
    let s = assemble_same(Kernel::Single, k, curve);
    let s_nn = assemble_same(Kernel::SingleNormals, k, curve);
    let d = trig_diff_matrix(m);
    let mut ds = CMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            ds[(i, j)] = Complex64::new(d[(i, j)] / curve.jacobians[i], 0.0);
        }
    }
    &ds * s * &ds + s_nn * Complex64::new(k * k, 0.0)
}

/// Cross-curve hypersingular kernel `d2 G / dnu(x) dnu(y)` (smooth).
pub fn assemble_hypersingular_cross(
    k: f64,
    target: &DiscretizedCurve,
    source: &DiscretizedCurve,
) -> CMatrix {
    let nt = target.len();
    let ns = source.len();
    let dt = source.spacing();
    let mut a = CMatrix::zeros(nt, ns);
    for i in 0..nt {
        let x = target.nodes[i];
        let nu_x = target.normals[i];
        for j in 0..ns {
            let y = source.nodes[j];
            let nu_y = source.normals[j];
            let e = x - y;
            let r = e.norm();
            let h0 = hankel1(0, k * r);
            let h1 = hankel1(1, k * r);
            let a_dot = e.dot(nu_y);
            let b_dot = e.dot(nu_x);
            let ik4 = Complex64::new(0.0, 0.25) * k;
            let val = ik4
                * (h0 * (k * a_dot * b_dot / (r * r))
                    - h1 * (2.0 * a_dot * b_dot / (r * r * r))
                    + h1 * (nu_x.dot(nu_y) / r));
            a[(i, j)] = val * source.jacobians[j] * dt;
        }
    }
    a
}

/// Gradient (in the target point) of the combined-layer representation
/// kernels, for interior field evaluation.
pub fn grad_slp_kernel(k: f64, z: Vec2, y: Vec2) -> [Complex64; 2] {
    let e = z - y;
    let r = e.norm();
    let factor = -Complex64::new(0.0, 0.25) * k * hankel1(1, k * r) / r;
    [factor * e.x, factor * e.y]
}

pub fn grad_dlp_kernel(k: f64, z: Vec2, y: Vec2, nu_y: Vec2) -> [Complex64; 2] {
    let e = z - y;
    let r = e.norm();
    let a = e.dot(nu_y);
    let h0 = hankel1(0, k * r);
    let h1 = hankel1(1, k * r);
    let ik4 = Complex64::new(0.0, 0.25) * k;
    let radial = ik4 * (k * h0 * a / (r * r) - 2.0 * h1 * a / (r * r * r));
    let along_nu = ik4 * h1 / r;
    [radial * e.x + along_nu * nu_y.x, radial * e.y + along_nu * nu_y.y]
}
