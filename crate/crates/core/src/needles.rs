//! Constructive needle sequences: entire Helmholtz solutions fitted to the
//! fundamental solution away from a shrinking tube around the needle.
//!
//! Elements are finite Fourier-Bessel expansions about a fixed center. Each
//! schedule step excises the tube `sigma_eps` from a fixed sampling lattice,
//! matches values and (h-weighted) gradients of `G_k(., x)` on the remaining
//! cloud, and solves the regularized normal equations. The lattice, the
//! basis samples and the full-cloud Gram matrix are precomputed once and
//! shared across tips, which makes grid scans cheap: an element fit only
//! subtracts the excised rows from the Gram matrix.

use num_complex::Complex64;
use thiserror::Error;

use crate::forward::ops::CMatrix;
use crate::geometry::{CurveSpec, DiscretizedCurve, NeedleSpec};
use crate::quadrature::{area_quadrature, gauss_legendre_unit, Region};
use crate::specfun::{bessel_j_upto, green2d};
use crate::vec2::Vec2;

type CVector = nalgebra::DVector<Complex64>;

/// Columns with a smaller peak basis magnitude than this are dropped: their
/// coefficients would leave the representable range.
const SCALE_FLOOR: f64 = 1e-220;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeedleError {
    #[error("matching cloud has {rows} usable points for {cols} coefficients")]
    RankDeficient { rows: usize, cols: usize },
    #[error(
        "schedule too aggressive at step {n}: residual {residual:e} vs previous {previous:e}"
    )]
    ScheduleTooAggressive { n: usize, residual: f64, previous: f64 },
    #[error("coefficient norm {norm:e} exceeds the overflow guard {guard:e} at step {n}")]
    CoefficientBlowup { n: usize, norm: f64, guard: f64 },
    #[error("tip must lie inside the domain: {0:?}")]
    TipOutside(Vec2),
}

/// A finite Fourier-Bessel expansion `sum c_m J_|m|(k r) e^{i m theta}`
/// about `center`; an entire solution of the Helmholtz equation.
#[derive(Debug, Clone, PartialEq)]
pub struct EntireSolution {
    pub center: Vec2,
    pub k: f64,
    /// Coefficients for orders `-order ..= order`, index `m + order`.
    pub coeffs: Vec<Complex64>,
}

impl EntireSolution {
    pub fn new(center: Vec2, k: f64, coeffs: Vec<Complex64>) -> Self {
        assert!(coeffs.len() % 2 == 1, "coefficients must cover -M..=M");
        assert!(k > 0.0);
        EntireSolution { center, k, coeffs }
    }

    /// Single-mode solution `c J_|m|(kr) e^{im theta}`.
    pub fn single_mode(center: Vec2, k: f64, mode: i32, c: Complex64) -> Self {
        let order = mode.unsigned_abs() as usize;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * order + 1];
        coeffs[(mode + order as i32) as usize] = c;
        EntireSolution { center, k, coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() / 2
    }

    /// Value and Cartesian gradient at `z`.
    pub fn eval(&self, z: Vec2) -> (Complex64, [Complex64; 2]) {
        let order = self.order();
        let d = z - self.center;
        let r = d.norm();
        let j = bessel_j_upto(order + 1, self.k * r);
        let u = signed_basis_values(&j, d, r, order + 1);
        let at = |m: i32| u[(m + order as i32 + 1) as usize];
        let mut value = Complex64::new(0.0, 0.0);
        let mut gx = Complex64::new(0.0, 0.0);
        let mut gy = Complex64::new(0.0, 0.0);
        let half_k = 0.5 * self.k;
        let i_half_k = Complex64::new(0.0, half_k);
        for (idx, &c) in self.coeffs.iter().enumerate() {
            if c == Complex64::new(0.0, 0.0) {
                continue;
            }
            let m = idx as i32 - order as i32;
            // J_|m| e^{im t} = sign * u_m
            let sign = if m < 0 && m.unsigned_abs() % 2 == 1 { -1.0 } else { 1.0 };
            let cm = c * sign;
            let um_minus = at(m - 1);
            let um_plus = at(m + 1);
            value += cm * at(m);
            gx += cm * half_k * (um_minus - um_plus);
            gy += cm * i_half_k * (um_minus + um_plus);
        }
        (value, [gx, gy])
    }

    pub fn value(&self, z: Vec2) -> Complex64 {
        self.eval(z).0
    }

    /// Dirichlet trace on the nodes of a discretized curve.
    pub fn trace(&self, curve: &DiscretizedCurve) -> Vec<Complex64> {
        curve.nodes.iter().map(|&p| self.eval(p).0).collect()
    }

    /// Normal-derivative trace (with respect to the curve's outward normal).
    pub fn normal_trace(&self, curve: &DiscretizedCurve) -> Vec<Complex64> {
        curve
            .nodes
            .iter()
            .zip(&curve.normals)
            .map(|(&p, &nu)| {
                let (_, g) = self.eval(p);
                g[0] * nu.x + g[1] * nu.y
            })
            .collect()
    }

    /// Coefficients rotated so the solution is evaluated in a frame rotated
    /// by `angle` about the center.
    pub fn rotated_coeffs(&self, angle: f64) -> EntireSolution {
        let order = self.order() as i32;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, &c)| {
                let m = idx as i32 - order;
                c * Complex64::from_polar(1.0, m as f64 * angle)
            })
            .collect();
        EntireSolution { center: self.center, k: self.k, coeffs }
    }
}

/// Table of the signed-order basis values `u_m = J_m(kr) e^{im theta}` for
/// `m` in `-top ..= top`, index `m + top`, with `J_{-n} = (-1)^n J_n`.
fn signed_basis_values(j: &[f64], d: Vec2, r: f64, top: usize) -> Vec<Complex64> {
    let phase = if r == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(d.x / r, d.y / r)
    };
    let mut u = vec![Complex64::new(0.0, 0.0); 2 * top + 1];
    let mut p = Complex64::new(1.0, 0.0);
    for m in 0..=top {
        u[top + m] = j[m] * p;
        let sign = if m % 2 == 1 { -1.0 } else { 1.0 };
        u[top - m] = sign * j[m] * p.conj();
        p *= phase;
    }
    u
}

/// One step of a needle schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleStep {
    pub eps: f64,
    pub order: usize,
    pub alpha: f64,
}

/// Parameters generating the default geometric schedule.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScheduleParams {
    pub n_max: usize,
    pub eps0: f64,
    pub eps_ratio: f64,
    pub m0: usize,
    pub m_step: usize,
    pub alpha0: f64,
    pub alpha_ratio: f64,
    /// Interior sampling-lattice spacing of the matching cloud.
    pub cloud_spacing: f64,
    /// Abort guard on the equilibrated coefficient norm.
    #[serde(default = "default_coef_guard")]
    pub coef_guard: f64,
    /// Abort guard on residual growth between consecutive steps.
    #[serde(default = "default_residual_growth")]
    pub residual_growth: f64,
}

fn default_coef_guard() -> f64 {
    1e12
}

fn default_residual_growth() -> f64 {
    10.0
}

impl Default for ScheduleParams {
    fn default() -> Self {
        ScheduleParams {
            n_max: 10,
            eps0: 0.15,
            eps_ratio: 0.7,
            m0: 8,
            m_step: 4,
            alpha0: 1e-6,
            alpha_ratio: 0.5,
            cloud_spacing: 0.045,
            coef_guard: 1e12,
            residual_growth: 10.0,
        }
    }
}

/// `eps_n = eps0 q^n`, `M_n = M0 + n dM`, `alpha_n = alpha0 r^n`.
pub fn default_schedule(params: &ScheduleParams) -> Vec<ScheduleStep> {
    assert!(params.n_max >= 4, "schedule needs at least 4 steps");
    assert!(params.eps0 > 0.0 && params.eps_ratio > 0.0 && params.eps_ratio < 1.0);
    assert!(params.alpha0 > 0.0 && params.alpha_ratio > 0.0 && params.alpha_ratio < 1.0);
    (0..params.n_max)
        .map(|n| ScheduleStep {
            eps: params.eps0 * params.eps_ratio.powi(n as i32),
            order: params.m0 + n * params.m_step,
            alpha: params.alpha0 * params.alpha_ratio.powi(n as i32),
        })
        .collect()
}

/// Diagnostics of one fitted element.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub n: usize,
    pub eps: f64,
    pub order: usize,
    pub alpha: f64,
    /// Relative matching residual on the retained cloud.
    pub residual: f64,
    /// Equilibrated coefficient norm (basis columns scaled to unit peak).
    pub coef_norm: f64,
    /// Discrete H1 distance to the fundamental solution on each registered
    /// compact set.
    pub h1_on_compacts: Vec<f64>,
}

/// A fixed compact test set (a closed disk) with its quadrature.
#[derive(Debug, Clone)]
pub struct CompactSet {
    pub center: Vec2,
    pub radius: f64,
    nodes: Vec<(Vec2, f64)>,
}

impl CompactSet {
    pub fn disk(center: Vec2, radius: f64) -> Self {
        let nodes = Region::CurveInterior(CurveSpec::circle(center, radius)).quadrature(1);
        CompactSet { center, radius, nodes }
    }

    /// Discrete `L2 + H1-seminorm` distance between an element and the
    /// fundamental solution with pole `x`.
    pub fn h1_distance(&self, v: &EntireSolution, x: Vec2) -> f64 {
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        for &(z, w) in &self.nodes {
            let (val, grad) = v.eval(z);
            let g = green2d(v.k, z, x).expect("compact set avoids the pole");
            l2 += w * (val - g.value).norm_sqr();
            h1 += w * ((grad[0] - g.gradient[0]).norm_sqr()
                + (grad[1] - g.gradient[1]).norm_sqr());
        }
        l2.sqrt() + h1.sqrt()
    }
}

/// Shared fitting workspace: lattice, basis samples and full-cloud Gram.
pub struct NeedleFitter {
    pub outer: CurveSpec,
    pub k: f64,
    pub center: Vec2,
    pub m_max: usize,
    h: f64,
    points: Vec<Vec2>,
    /// Per-column basis scale: peak-magnitude times cloud-norm equilibration.
    scales: Vec<f64>,
    /// Row-major basis samples: `vals[p * cols + c]`, column `c = m + m_max`.
    vals: Vec<Complex64>,
    gx: Vec<Complex64>,
    gy: Vec<Complex64>,
    gram_full: CMatrix,
}

impl NeedleFitter {
    /// Builds the lattice and basis for fitting with orders up to `m_max`.
    pub fn new(outer: &CurveSpec, k: f64, m_max_requested: usize, cloud_spacing: f64) -> Self {
        let center = outer.centroid();
        let h = cloud_spacing;
        let (lo, hi) = outer.bounding_box();
        let mut points = Vec::new();
        // interior lattice, half-spacing clearance from the boundary
        let nx = ((hi.x - lo.x) / h).ceil() as usize;
        let ny = ((hi.y - lo.y) / h).ceil() as usize;
        for i in 0..=nx {
            for jj in 0..=ny {
                let z = Vec2::new(lo.x + i as f64 * h, lo.y + jj as f64 * h);
                if outer.contains(z) && outer.distance_to(z) >= 0.5 * h {
                    points.push(z);
                }
            }
        }
        // boundary nodes at comparable density
        let perimeter = DiscretizedCurve::new(outer, 64).expect("valid outer").length();
        let mut m_bnd = ((perimeter / h).ceil() as usize).max(16);
        if m_bnd % 2 == 1 {
            m_bnd += 1;
        }
        let bnd = DiscretizedCurve::new(outer, m_bnd).expect("valid outer");
        points.extend(bnd.nodes.iter().copied());

        // per-order scales over the occurring radii
        let r_max = points
            .iter()
            .map(|p| (*p - center).norm())
            .fold(0.0, f64::max);
        let mut scales = vec![0.0_f64; m_max_requested + 1];
        for s in 0..=200 {
            let r = r_max * s as f64 / 200.0;
            let j = bessel_j_upto(m_max_requested, k * r);
            for (n, sc) in scales.iter_mut().enumerate() {
                *sc = sc.max(j[n].abs());
            }
        }
        let m_max = scales
            .iter()
            .position(|&s| s < SCALE_FLOOR)
            .map_or(m_max_requested, |p| p.saturating_sub(1));
        scales.truncate(m_max + 1);

        let cols = 2 * m_max + 1;
        let n_pts = points.len();
        let mut vals = vec![Complex64::new(0.0, 0.0); n_pts * cols];
        let mut gx = vec![Complex64::new(0.0, 0.0); n_pts * cols];
        let mut gy = vec![Complex64::new(0.0, 0.0); n_pts * cols];
        for (p, &z) in points.iter().enumerate() {
            let d = z - center;
            let r = d.norm();
            let j = bessel_j_upto(m_max + 1, k * r);
            let u = signed_basis_values(&j, d, r, m_max + 1);
            let at = |m: i32| u[(m + m_max as i32 + 1) as usize];
            let half_k = 0.5 * k;
            let i_half_k = Complex64::new(0.0, half_k);
            for c in 0..cols {
                let m = c as i32 - m_max as i32;
                let sign = if m < 0 && m.unsigned_abs() % 2 == 1 { -1.0 } else { 1.0 };
                let scale = sign / scales[m.unsigned_abs() as usize];
                vals[p * cols + c] = at(m) * scale;
                gx[p * cols + c] = half_k * (at(m - 1) - at(m + 1)) * scale;
                gy[p * cols + c] = i_half_k * (at(m - 1) + at(m + 1)) * scale;
            }
        }

        // full-cloud Gram with value weight 1 and gradient weight h^2
        let h2 = h * h;
        let mut gram_full = CMatrix::zeros(cols, cols);
        for p in 0..n_pts {
            let row = p * cols;
            for i in 0..cols {
                let vi = vals[row + i].conj();
                let gxi = gx[row + i].conj();
                let gyi = gy[row + i].conj();
                for jj in i..cols {
                    gram_full[(i, jj)] += vi * vals[row + jj]
                        + h2 * (gxi * gx[row + jj] + gyi * gy[row + jj]);
                }
            }
        }
        for i in 0..cols {
            for jj in 0..i {
                gram_full[(i, jj)] = gram_full[(jj, i)].conj();
            }
        }

        // equilibrate columns to unit cloud norm so the ridge penalty acts
        // uniformly across orders
        let mut col_norms = vec![1.0_f64; cols];
        for (c, cn) in col_norms.iter_mut().enumerate() {
            *cn = gram_full[(c, c)].re.max(1e-300).sqrt();
        }
        for p in 0..n_pts {
            let row = p * cols;
            for c in 0..cols {
                let d = col_norms[c];
                vals[row + c] /= d;
                gx[row + c] /= d;
                gy[row + c] /= d;
            }
        }
        for i in 0..cols {
            for jj in 0..cols {
                gram_full[(i, jj)] /= col_norms[i] * col_norms[jj];
            }
        }
        // fold the equilibration into the per-column coefficient scales
        let scales: Vec<f64> = (0..cols)
            .map(|c| {
                let m = (c as i32 - m_max as i32).unsigned_abs() as usize;
                scales[m] * col_norms[c]
            })
            .collect();

        NeedleFitter { outer: outer.clone(), k, center, m_max, h, points, scales, vals, gx, gy, gram_full }
    }

    pub fn cloud_len(&self) -> usize {
        self.points.len()
    }

    /// Fits one element for tip `x` and needle `sigma` at schedule step
    /// `step`, returning the element and its report (without compact-set
    /// distances; the sequence builder fills those in).
    pub fn fit_element(
        &self,
        x: Vec2,
        sigma: &NeedleSpec,
        step: ScheduleStep,
    ) -> Result<(EntireSolution, FitReport), NeedleError> {
        let k = self.k;
        self.fit_to_target(
            |z| {
                let g = green2d(k, z, x).expect("pole is inside the excised tube");
                (g.value, g.gradient)
            },
            sigma,
            step,
        )
    }

    /// Fits an arbitrary value/gradient target over the cloud minus the
    /// tube. Exposed for tests: targets inside the basis span must be
    /// recovered exactly.
    pub fn fit_to_target(
        &self,
        target: impl Fn(Vec2) -> (Complex64, [Complex64; 2]),
        sigma: &NeedleSpec,
        step: ScheduleStep,
    ) -> Result<(EntireSolution, FitReport), NeedleError> {
        let order = step.order.min(self.m_max);
        let cols = 2 * order + 1;
        let full_cols = 2 * self.m_max + 1;
        let col0 = self.m_max - order;

        // start from the central block of the full Gram, subtract excised rows
        let mut gram = CMatrix::zeros(cols, cols);
        for i in 0..cols {
            for jj in 0..cols {
                gram[(i, jj)] = self.gram_full[(col0 + i, col0 + jj)];
            }
        }
        let h2 = self.h * self.h;
        let mut excluded = vec![false; self.points.len()];
        let mut n_excluded = 0;
        for (p, &z) in self.points.iter().enumerate() {
            if sigma.distance(z) <= step.eps {
                excluded[p] = true;
                n_excluded += 1;
                let row = p * full_cols + col0;
                for i in 0..cols {
                    let vi = self.vals[row + i].conj();
                    let gxi = self.gx[row + i].conj();
                    let gyi = self.gy[row + i].conj();
                    for jj in 0..cols {
                        gram[(i, jj)] -= vi * self.vals[row + jj]
                            + h2 * (gxi * self.gx[row + jj] + gyi * self.gy[row + jj]);
                    }
                }
            }
        }
        let rows_kept = self.points.len() - n_excluded;
        if rows_kept < cols {
            return Err(NeedleError::RankDeficient { rows: rows_kept, cols });
        }

        // right-hand side and target norm over the retained cloud
        let mut rhs = CVector::zeros(cols);
        let mut target_sq = 0.0;
        let mut targets: Vec<(Complex64, Complex64, Complex64)> =
            Vec::with_capacity(self.points.len());
        for (p, &z) in self.points.iter().enumerate() {
            if excluded[p] {
                targets.push((Complex64::default(), Complex64::default(), Complex64::default()));
                continue;
            }
            let (val, grad) = target(z);
            targets.push((val, grad[0], grad[1]));
            target_sq += val.norm_sqr() + h2 * (grad[0].norm_sqr() + grad[1].norm_sqr());
            let row = p * full_cols + col0;
            for i in 0..cols {
                rhs[i] += self.vals[row + i].conj() * val
                    + h2 * (self.gx[row + i].conj() * grad[0]
                        + self.gy[row + i].conj() * grad[1]);
            }
        }

        for i in 0..cols {
            gram[(i, i)] += Complex64::new(step.alpha, 0.0);
        }
        let chol = match nalgebra::Cholesky::new(gram) {
            Some(c) => c,
            None => return Err(NeedleError::RankDeficient { rows: rows_kept, cols }),
        };
        let scaled = chol.solve(&rhs);

        // residual over the retained cloud
        let mut resid_sq = 0.0;
        for (p, t) in targets.iter().enumerate() {
            if excluded[p] {
                continue;
            }
            let row = p * full_cols + col0;
            let mut v = Complex64::new(0.0, 0.0);
            let mut dx = Complex64::new(0.0, 0.0);
            let mut dy = Complex64::new(0.0, 0.0);
            for i in 0..cols {
                v += self.vals[row + i] * scaled[i];
                dx += self.gx[row + i] * scaled[i];
                dy += self.gy[row + i] * scaled[i];
            }
            resid_sq += (v - t.0).norm_sqr()
                + h2 * ((dx - t.1).norm_sqr() + (dy - t.2).norm_sqr());
        }
        let residual = (resid_sq / target_sq.max(1e-300)).sqrt();
        let coef_norm = scaled.norm();

        // un-equilibrate into true coefficients
        let coeffs: Vec<Complex64> =
            (0..cols).map(|c| scaled[c] / self.scales[col0 + c]).collect();
        let element = EntireSolution::new(self.center, self.k, coeffs);
        let report = FitReport {
            n: 0,
            eps: step.eps,
            order,
            alpha: step.alpha,
            residual,
            coef_norm,
            h1_on_compacts: Vec::new(),
        };
        Ok((element, report))
    }
}

impl NeedleFitter {
    /// Row-space (QR) variant of the fit for accuracy comparisons: solves
    /// the same ridge problem without forming normal equations.
    pub fn fit_to_target_qr(
        &self,
        target: impl Fn(Vec2) -> (Complex64, [Complex64; 2]),
        sigma: &NeedleSpec,
        step: ScheduleStep,
    ) -> Result<(EntireSolution, FitReport), NeedleError> {
        let order = step.order.min(self.m_max);
        let cols = 2 * order + 1;
        let full_cols = 2 * self.m_max + 1;
        let col0 = self.m_max - order;
        let h = self.h;
        let mut rows: Vec<Vec<Complex64>> = Vec::new();
        let mut rhs: Vec<Complex64> = Vec::new();
        let mut target_sq = 0.0;
        for (p, &z) in self.points.iter().enumerate() {
            if sigma.distance(z) <= step.eps {
                continue;
            }
            let (val, grad) = target(z);
            let row = p * full_cols + col0;
            rows.push((0..cols).map(|i| self.vals[row + i]).collect());
            rhs.push(val);
            rows.push((0..cols).map(|i| self.gx[row + i] * h).collect());
            rhs.push(grad[0] * h);
            rows.push((0..cols).map(|i| self.gy[row + i] * h).collect());
            rhs.push(grad[1] * h);
            target_sq += val.norm_sqr() + h * h * (grad[0].norm_sqr() + grad[1].norm_sqr());
        }
        if rows.len() < cols {
            return Err(NeedleError::RankDeficient { rows: rows.len(), cols });
        }
        let n_rows = rows.len() + cols;
        let mut a = CMatrix::zeros(n_rows, cols);
        let mut b = CVector::zeros(n_rows);
        for (r, row) in rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                a[(r, c)] = *v;
            }
            b[r] = rhs[r];
        }
        let sq = step.alpha.sqrt();
        for c in 0..cols {
            a[(rows.len() + c, c)] = Complex64::new(sq, 0.0);
        }
        let qr = a.qr();
        let qtb = qr.q().adjoint() * &b;
        let scaled = qr
            .r()
            .solve_upper_triangular(&qtb)
            .ok_or(NeedleError::RankDeficient { rows: n_rows, cols })?;

        let mut resid_sq = 0.0;
        for (r, row) in rows.iter().enumerate() {
            let mut v = Complex64::new(0.0, 0.0);
            for (c, a_val) in row.iter().enumerate() {
                v += a_val * scaled[c];
            }
            resid_sq += (v - rhs[r]).norm_sqr();
        }
        let residual = (resid_sq / target_sq.max(1e-300)).sqrt();
        let coef_norm = scaled.norm();
        let coeffs: Vec<Complex64> =
            (0..cols).map(|c| scaled[c] / self.scales[col0 + c]).collect();
        let element = EntireSolution::new(self.center, self.k, coeffs);
        let report = FitReport {
            n: 0,
            eps: step.eps,
            order,
            alpha: step.alpha,
            residual,
            coef_norm,
            h1_on_compacts: Vec::new(),
        };
        Ok((element, report))
    }
}

/// A computed needle-sequence prefix with per-step diagnostics.
#[derive(Debug, Clone)]
pub struct NeedleSequence {
    pub x: Vec2,
    pub needle: NeedleSpec,
    pub schedule: Vec<ScheduleStep>,
    pub elements: Vec<EntireSolution>,
    pub reports: Vec<FitReport>,
}

/// Fits the whole schedule for `(x, sigma)`, recording the discrete H1
/// distance to the fundamental solution on every registered compact set.
pub fn build_sequence(
    fitter: &NeedleFitter,
    x: Vec2,
    sigma: &NeedleSpec,
    schedule: &[ScheduleStep],
    compacts: &[CompactSet],
    guards: &ScheduleParams,
) -> Result<NeedleSequence, NeedleError> {
    if !fitter.outer.contains(x) {
        return Err(NeedleError::TipOutside(x));
    }
    let mut elements = Vec::with_capacity(schedule.len());
    let mut reports: Vec<FitReport> = Vec::with_capacity(schedule.len());
    for (n, &step) in schedule.iter().enumerate() {
        let (element, mut report) = fitter.fit_element(x, sigma, step)?;
        report.n = n;
        if report.coef_norm > guards.coef_guard {
            return Err(NeedleError::CoefficientBlowup {
                n,
                norm: report.coef_norm,
                guard: guards.coef_guard,
            });
        }
        if let Some(prev) = reports.last() {
            if report.residual > guards.residual_growth * prev.residual {
                return Err(NeedleError::ScheduleTooAggressive {
                    n,
                    residual: report.residual,
                    previous: prev.residual,
                });
            }
        }
        report.h1_on_compacts = compacts.iter().map(|k| k.h1_distance(&element, x)).collect();
        elements.push(element);
        reports.push(report);
    }
    Ok(NeedleSequence {
        x,
        needle: sigma.clone(),
        schedule: schedule.to_vec(),
        elements,
        reports,
    })
}

/// One-off element fit (constructs a private fitter; prefer reusing a
/// [`NeedleFitter`] when fitting many elements).
pub fn fit_needle_element(
    x: Vec2,
    sigma: &NeedleSpec,
    eps: f64,
    order: usize,
    alpha: f64,
    outer: &CurveSpec,
    k: f64,
    cloud_spacing: f64,
) -> Result<(EntireSolution, FitReport), NeedleError> {
    let fitter = NeedleFitter::new(outer, k, order, cloud_spacing);
    fitter.fit_element(x, sigma, ScheduleStep { eps, order, alpha })
}

/// L2 norm and H1 seminorm of an entire solution over a curve interior.
///
/// The seminorm is boundary-reduced through the first Green identity,
/// `|grad v|^2_R = Re oint dv/dnu conj(v) ds + k^2 |v|^2_R`, which is exact
/// for Helmholtz solutions; only the L2 term needs area quadrature.
pub fn needle_norms(v: &EntireSolution, region: &CurveSpec, level: u32) -> (f64, f64) {
    let l2_sq = area_quadrature(
        &Region::CurveInterior(region.clone()),
        |z| v.value(z).norm_sqr(),
        level,
    );
    let m_bd = (6 * v.order() + 32).next_multiple_of(2).max(64);
    let bd = DiscretizedCurve::new(region, m_bd).expect("valid region curve");
    let mut pairing = 0.0;
    for i in 0..bd.len() {
        let (val, grad) = v.eval(bd.nodes[i]);
        let dn = grad[0] * bd.normals[i].x + grad[1] * bd.normals[i].y;
        pairing += (dn * val.conj()).re * bd.weight(i);
    }
    let h1_sq = (pairing + v.k * v.k * l2_sq).max(0.0);
    (l2_sq.sqrt(), h1_sq.sqrt())
}

/// Gradient energy over an arbitrary region by direct area quadrature.
pub fn gradient_energy(v: &EntireSolution, region: &Region, level: u32) -> f64 {
    region
        .quadrature(level)
        .iter()
        .map(|&(z, w)| {
            let (_, g) = v.eval(z);
            w * (g[0].norm_sqr() + g[1].norm_sqr())
        })
        .sum::<f64>()
        .sqrt()
}

/// Radial Gauss-Legendre oracle for `2 pi int_0^R |f(r)|^2 r dr` (test aid
/// for rotationally symmetric profiles).
pub fn radial_l2_oracle(f: impl Fn(f64) -> f64, r_max: f64, n: usize) -> f64 {
    let rule = gauss_legendre_unit(n);
    let mut acc = 0.0;
    for &(s, w) in &rule {
        let r = s * r_max;
        acc += w * r_max * f(r).powi(2) * r;
    }
    (2.0 * std::f64::consts::PI * acc).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_matches_definition() {
        let k = 1.7;
        let v = EntireSolution::single_mode(Vec2::ZERO, k, 0, Complex64::new(1.0, 0.0));
        for &(x, y) in &[(0.3, 0.1), (0.0, 0.0), (-0.5, 0.8)] {
            let z = Vec2::new(x, y);
            let want = crate::specfun::bessel_j(0, k * z.norm());
            let got = v.value(z);
            assert!((got.re - want).abs() < 1e-14 && got.im.abs() < 1e-14);
        }
        let v3 = EntireSolution::single_mode(Vec2::ZERO, k, 3, Complex64::new(1.0, 0.0));
        let z = Vec2::new(0.4, 0.25);
        let r = z.norm();
        let th = z.angle();
        let want = crate::specfun::bessel_j(3, k * r) * Complex64::from_polar(1.0, 3.0 * th);
        assert!((v3.value(z) - want).norm() < 1e-14);
        // negative mode uses J_|m| by definition
        let vm3 = EntireSolution::single_mode(Vec2::ZERO, k, -3, Complex64::new(1.0, 0.0));
        let wantm = crate::specfun::bessel_j(3, k * r) * Complex64::from_polar(1.0, -3.0 * th);
        assert!((vm3.value(z) - wantm).norm() < 1e-14);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let k = 2.0;
        let coeffs: Vec<Complex64> = (0..11)
            .map(|i| Complex64::new(0.3 * (i as f64 - 5.0), 0.1 * i as f64))
            .collect();
        let v = EntireSolution::new(Vec2::new(0.1, -0.05), k, coeffs);
        let h = 1e-6;
        let mut state = 7u64;
        let mut rnd = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 1.6 - 0.8
        };
        for _ in 0..100 {
            let z = Vec2::new(rnd(), rnd());
            let (_, g) = v.eval(z);
            let fx = (v.value(Vec2::new(z.x + h, z.y)) - v.value(Vec2::new(z.x - h, z.y)))
                / (2.0 * h);
            let fy = (v.value(Vec2::new(z.x, z.y + h)) - v.value(Vec2::new(z.x, z.y - h)))
                / (2.0 * h);
            let scale = g[0].norm().max(g[1].norm()).max(1e-9);
            assert!((g[0] - fx).norm() / scale < 1e-6, "z {z:?}");
            assert!((g[1] - fy).norm() / scale < 1e-6, "z {z:?}");
        }
    }

    #[test]
    fn helmholtz_residual_small() {
        let k = 2.0;
        let v = EntireSolution::new(
            Vec2::ZERO,
            k,
            vec![
                Complex64::new(0.5, 0.0),
                Complex64::new(1.0, -0.3),
                Complex64::new(0.2, 0.8),
                Complex64::new(-0.6, 0.1),
                Complex64::new(0.9, 0.4),
            ],
        );
        let h = 1e-4;
        for &(x, y) in &[(0.3, 0.2), (-0.4, 0.5), (0.0, -0.6)] {
            let z = Vec2::new(x, y);
            let c = v.value(z);
            let lap = (v.value(Vec2::new(z.x + h, z.y))
                + v.value(Vec2::new(z.x - h, z.y))
                + v.value(Vec2::new(z.x, z.y + h))
                + v.value(Vec2::new(z.x, z.y - h))
                - 4.0 * c)
                / (h * h);
            let resid = lap + k * k * c;
            assert!(resid.norm() < 1e-4 * (1.0 + c.norm() * k * k), "residual {resid}");
        }
    }

    #[test]
    fn rotation_maps_coefficients_by_phase() {
        let k = 1.3;
        let coeffs: Vec<Complex64> =
            (0..7).map(|i| Complex64::new(1.0 / (i + 1) as f64, 0.2)).collect();
        let v = EntireSolution::new(Vec2::ZERO, k, coeffs);
        let phi = 0.83;
        let v_rot = v.rotated_coeffs(phi);
        for &(x, y) in &[(0.4, 0.1), (-0.2, 0.6)] {
            let z = Vec2::new(x, y);
            let got = v_rot.value(z);
            let want = v.value(z.rotated(phi));
            assert!((got - want).norm() < 1e-13, "{got} vs {want}");
        }
    }

    #[test]
    fn schedule_formulas() {
        let params = ScheduleParams {
            n_max: 8,
            eps0: 0.4,
            eps_ratio: 0.7,
            m0: 8,
            m_step: 4,
            alpha0: 1e-6,
            alpha_ratio: 0.5,
            ..ScheduleParams::default()
        };
        let sched = default_schedule(&params);
        assert_eq!(sched.len(), 8);
        assert!((sched[7].eps - 0.4 * 0.7f64.powi(7)).abs() < 1e-15);
        assert!((sched[7].eps - 0.03294).abs() < 5e-5);
        assert_eq!(sched[7].order, 36);
        assert!((sched[7].alpha - 7.8125e-9).abs() < 1e-20);
    }

    #[test]
    fn span_target_recovers_exact_coefficients() {
        // fitting an entire function that lies in the basis span must give
        // back its coefficients with a vanishing residual
        let outer = CurveSpec::circle(Vec2::ZERO, 1.0);
        let k = 2.0;
        let fitter = NeedleFitter::new(&outer, k, 8, 0.07);
        let sigma = NeedleSpec::segment(Vec2::new(1.0, 0.0), Vec2::new(0.4, 0.0));
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 9];
        coeffs[4] = Complex64::new(1.0, 0.0); // mode 0
        coeffs[6] = Complex64::new(0.4, -0.2); // mode 2
        let truth = EntireSolution::new(fitter.center, k, coeffs.clone());
        let (element, report) = fitter
            .fit_to_target(
                |z| truth.eval(z),
                &sigma,
                ScheduleStep { eps: 0.15, order: 4, alpha: 1e-14 },
            )
            .unwrap();
        assert!(report.residual < 1e-10, "residual {:e}", report.residual);
        for (got, want) in element.coeffs.iter().zip(&coeffs) {
            assert!((got - want).norm() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn far_pole_target_is_well_approximated() {
        // a pole far outside the domain is analytic on the disk, so a
        // moderate-order fit reproduces it to high accuracy
        let outer = CurveSpec::circle(Vec2::ZERO, 1.0);
        let k = 2.0;
        let fitter = NeedleFitter::new(&outer, k, 12, 0.06);
        let far_pole = Vec2::new(6.0, 0.0);
        let sigma = NeedleSpec::segment(Vec2::new(1.0, 0.0), Vec2::new(0.99, 0.0));
        let (element, report) = fitter
            .fit_element(far_pole, &sigma, ScheduleStep { eps: 1e-6, order: 12, alpha: 1e-14 })
            .unwrap();
        assert!(report.residual < 1e-8, "residual {:e}", report.residual);
        let g = green2d(k, Vec2::new(0.2, 0.3), far_pole).unwrap();
        let got = element.value(Vec2::new(0.2, 0.3));
        assert!((got - g.value).norm() < 1e-8, "{got} vs {}", g.value);
    }

    #[test]
    fn needle_norms_radial_oracle() {
        // c0 = 1, k = 1: l2 over the disk r <= 0.4 equals the 1D quadrature
        let k = 1.0;
        let v = EntireSolution::single_mode(Vec2::ZERO, k, 0, Complex64::new(1.0, 0.0));
        let region = CurveSpec::circle(Vec2::ZERO, 0.4);
        let (l2, h1) = needle_norms(&v, &region, 1);
        let want = radial_l2_oracle(|r| crate::specfun::bessel_j(0, k * r), 0.4, 64);
        assert!((l2 - want).abs() < 1e-8, "l2 {l2} vs {want}");
        // gradient of J_0(kr) is -k J_1(kr) r-hat
        let want_h1 = radial_l2_oracle(|r| k * crate::specfun::bessel_j(1, k * r), 0.4, 64);
        assert!((h1 - want_h1).abs() < 1e-8, "h1 {h1} vs {want_h1}");
        // scaling: norms scale linearly in |c|
        let v2 = EntireSolution::single_mode(Vec2::ZERO, k, 0, Complex64::new(-3.0, 4.0));
        let (l2b, h1b) = needle_norms(&v2, &region, 1);
        assert!((l2b - 5.0 * l2).abs() < 1e-8 * 5.0);
        assert!((h1b - 5.0 * h1).abs() < 1e-8 * 5.0);
    }

    #[test]
    fn norms_stable_under_refinement_away_from_tube() {
        let k = 2.0;
        let coeffs: Vec<Complex64> =
            (0..9).map(|i| Complex64::new(0.1 * i as f64, -0.05)).collect();
        let v = EntireSolution::new(Vec2::ZERO, k, coeffs);
        let region = CurveSpec::circle(Vec2::new(0.3, 0.1), 0.25);
        let (l2a, h1a) = needle_norms(&v, &region, 1);
        let (l2b, h1b) = needle_norms(&v, &region, 2);
        assert!((l2a - l2b).abs() < 1e-6 * l2b.max(1.0));
        assert!((h1a - h1b).abs() < 1e-6 * h1b.max(1.0));
    }
}
