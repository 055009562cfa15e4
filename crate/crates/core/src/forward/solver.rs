//! The discrete forward problem: combined-layer Nystrom system, DtN action,
//! interior evaluation and reflected solutions.

use num_complex::Complex64;
use std::sync::OnceLock;
use thiserror::Error;

use super::ops::{
    assemble, assemble_hypersingular_cross, assemble_hypersingular_same, grad_dlp_kernel,
    grad_slp_kernel, CMatrix, Kernel,
};
use crate::geometry::{
    BoundaryCondition, CurveError, DiscretizedCurve, ObstacleScene, SceneError, SceneLimits,
};
use crate::specfun::green2d;
use crate::vec2::Vec2;

type CVector = nalgebra::DVector<Complex64>;

#[derive(Debug, Error)]
pub enum ForwardError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("2D solver requires k > 0 (got {0})")]
    ZeroWavenumber(f64),
    #[error(
        "system is ill-conditioned (estimate {cond:.3e} above ceiling {ceiling:.3e}); \
         k^2 may be close to an interior eigenvalue or the curves are under-resolved"
    )]
    IllConditioned { cond: f64, ceiling: f64 },
    #[error("factorization failed")]
    SingularSystem,
    #[error("source tip at distance {dist:e} from the obstacle closure (margin {margin:e})")]
    TipTooClose { dist: f64, margin: f64 },
    #[error("boundary data has {got} samples, expected {expected}")]
    DataSizeMismatch { got: usize, expected: usize },
    #[error("evaluation point {0:?} is outside the computational domain")]
    OutsideDomain(Vec2),
    #[error("evaluation point {0:?} is too close to a boundary curve for the representation")]
    TooCloseToBoundary(Vec2),
}

/// Resolution and safety parameters of the forward solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub m_outer: usize,
    pub m_obstacle: usize,
    /// Combined-layer coupling; defaults to the wavenumber.
    pub eta: Option<f64>,
    /// Condition-estimate ceiling for `build`.
    pub cond_ceiling: f64,
    /// Minimum distance of a reflected-solution source from the obstacles.
    pub tip_margin: f64,
    pub limits: SceneLimits,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            m_outer: 128,
            m_obstacle: 64,
            eta: None,
            cond_ceiling: 1e8,
            tip_margin: 0.01,
            limits: SceneLimits::default(),
        }
    }
}

/// Dirichlet or Neumann samples on the outer-boundary nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub samples: Vec<Complex64>,
}

impl BoundaryData {
    pub fn new(samples: Vec<Complex64>) -> Self {
        BoundaryData { samples }
    }

    pub fn zeros(n: usize) -> Self {
        BoundaryData { samples: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Assembled and factored forward-problem operator for one scene.
///
/// Immutable after construction; solves may run concurrently.
pub struct DtnSolver {
    pub scene: ObstacleScene,
    pub config: SolverConfig,
    /// Discretizations: index 0 is the outer boundary, then the obstacles.
    pub curves: Vec<DiscretizedCurve>,
    offsets: Vec<usize>,
    n_total: usize,
    eta: f64,
    lu: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    cond_estimate: f64,
    /// Value-trace operators per curve (domain side).
    value_ops: Vec<CMatrix>,
    /// Normal-derivative trace operators per curve, with respect to each
    /// curve's own outward normal (domain side).
    deriv_ops: Vec<CMatrix>,
    dtn_cache: OnceLock<CMatrix>,
}

impl DtnSolver {
    /// Assembles and factors the combined-layer system for the scene.
    pub fn build(scene: &ObstacleScene, config: SolverConfig) -> Result<Self, ForwardError> {
        scene.validate(&config.limits)?;
        if scene.k <= 0.0 {
            return Err(ForwardError::ZeroWavenumber(scene.k));
        }
        let k = scene.k;
        let eta = config.eta.unwrap_or(k);

        let mut curves = Vec::with_capacity(1 + scene.obstacles.len());
        curves.push(DiscretizedCurve::new(&scene.outer, config.m_outer)?);
        for obs in &scene.obstacles {
            curves.push(DiscretizedCurve::new(obs, config.m_obstacle)?);
        }
        let mut offsets = Vec::with_capacity(curves.len());
        let mut acc = 0;
        for c in &curves {
            offsets.push(acc);
            acc += c.len();
        }
        let n_total = acc;

        let (value_ops, deriv_ops) = assemble_traces(&curves, k, eta);

        // system rows: Dirichlet trace on the outer curve, boundary condition
        // rows on each obstacle
        let mut a = CMatrix::zeros(n_total, n_total);
        a.view_mut((0, 0), (curves[0].len(), n_total))
            .copy_from(&value_ops[0]);
        for (ci, curve) in curves.iter().enumerate().skip(1) {
            let row0 = offsets[ci];
            match &scene.bc {
                BoundaryCondition::SoundSoft => {
                    a.view_mut((row0, 0), (curve.len(), n_total))
                        .copy_from(&value_ops[ci]);
                }
                BoundaryCondition::Impedance { .. } => {
                    let lam = scene.bc.lambda_for(ci - 1).expect("impedance");
                    let mut block = -deriv_ops[ci].clone();
                    for i in 0..curve.len() {
                        let l = lam.eval(curve.param(i));
                        for j in 0..n_total {
                            block[(i, j)] += l * value_ops[ci][(i, j)];
                        }
                    }
                    a.view_mut((row0, 0), (curve.len(), n_total)).copy_from(&block);
                }
            }
        }

        let norm_a = a.norm();
        let lu = a.clone().lu();
        let lu_adj = a.adjoint().lu();
        let cond_estimate = estimate_condition(&lu, &lu_adj, norm_a, n_total);
        if cond_estimate > config.cond_ceiling {
            return Err(ForwardError::IllConditioned {
                cond: cond_estimate,
                ceiling: config.cond_ceiling,
            });
        }

        Ok(DtnSolver {
            scene: scene.clone(),
            config,
            curves,
            offsets,
            n_total,
            eta,
            lu,
            cond_estimate,
            value_ops,
            deriv_ops,
            dtn_cache: OnceLock::new(),
        })
    }

    pub fn cond_estimate(&self) -> f64 {
        self.cond_estimate
    }

    pub fn outer(&self) -> &DiscretizedCurve {
        &self.curves[0]
    }

    pub fn n_outer(&self) -> usize {
        self.curves[0].len()
    }

    /// Solves the Dirichlet problem for outer data `f`.
    pub fn solve_dirichlet(&self, f: &BoundaryData) -> Result<FieldSolution<'_>, ForwardError> {
        if f.len() != self.n_outer() {
            return Err(ForwardError::DataSizeMismatch {
                got: f.len(),
                expected: self.n_outer(),
            });
        }
        let mut rhs = CVector::zeros(self.n_total);
        for (i, v) in f.samples.iter().enumerate() {
            rhs[i] = *v;
        }
        let densities = self.lu.solve(&rhs).ok_or(ForwardError::SingularSystem)?;
        Ok(FieldSolution { solver: self, densities })
    }

    /// Solves for the reflected field of a point source at `x`: zero outer
    /// data, obstacle data correcting the fundamental solution.
    pub fn solve_reflected(&self, x: Vec2) -> Result<FieldSolution<'_>, ForwardError> {
        let dist = self.scene.dist_to_obstacles(x);
        if dist < self.config.tip_margin {
            return Err(ForwardError::TipTooClose { dist, margin: self.config.tip_margin });
        }
        if !self.scene.outer.contains(x) {
            return Err(ForwardError::OutsideDomain(x));
        }
        let k = self.scene.k;
        let mut rhs = CVector::zeros(self.n_total);
        for (ci, curve) in self.curves.iter().enumerate().skip(1) {
            let row0 = self.offsets[ci];
            for i in 0..curve.len() {
                let y = curve.nodes[i];
                let g = green2d(k, y, x).expect("source off the boundary");
                match &self.scene.bc {
                    BoundaryCondition::SoundSoft => {
                        // w = -G on the obstacle boundary
                        rhs[row0 + i] = -g.value;
                    }
                    BoundaryCondition::Impedance { .. } => {
                        // -dw/dnu + lambda w must absorb the source term:
                        // g = dG/dnu - lambda G with nu the curve normal
                        let lam = self.scene.bc.lambda_for(ci - 1).expect("impedance");
                        let nu = curve.normals[i];
                        let dn = g.gradient[0] * nu.x + g.gradient[1] * nu.y;
                        rhs[row0 + i] = dn - lam.eval(curve.param(i)) * g.value;
                    }
                }
            }
        }
        let densities = self.lu.solve(&rhs).ok_or(ForwardError::SingularSystem)?;
        Ok(FieldSolution { solver: self, densities })
    }

    /// The discrete DtN matrix on the outer nodes (built once, cached).
    pub fn dtn_matrix(&self) -> &CMatrix {
        self.dtn_cache.get_or_init(|| {
            let n = self.n_outer();
            let mut out = CMatrix::zeros(n, n);
            let mut rhs = CVector::zeros(self.n_total);
            for col in 0..n {
                rhs.fill(Complex64::new(0.0, 0.0));
                rhs[col] = Complex64::new(1.0, 0.0);
                let phi = self.lu.solve(&rhs).expect("factored system");
                let neumann = &self.deriv_ops[0] * &phi;
                out.column_mut(col).copy_from(&neumann);
            }
            out
        })
    }

    /// Boundary pairing `int_dOmega a conj(b) ds` on outer nodes.
    pub fn outer_pairing(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        let outer = self.outer();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..outer.len() {
            acc += a[i] * b[i].conj() * outer.weight(i);
        }
        acc
    }
}

/// Builds value and normal-derivative trace operators for every curve,
/// taking the jump from the domain side.
fn assemble_traces(
    curves: &[DiscretizedCurve],
    k: f64,
    eta: f64,
) -> (Vec<CMatrix>, Vec<CMatrix>) {
    let n_total: usize = curves.iter().map(|c| c.len()).sum();
    let mut offsets = Vec::with_capacity(curves.len());
    let mut acc = 0;
    for c in curves {
        offsets.push(acc);
        acc += c.len();
    }
    let ieta = Complex64::new(0.0, eta);
    let mut value_ops = Vec::with_capacity(curves.len());
    let mut deriv_ops = Vec::with_capacity(curves.len());
    for (ti, target) in curves.iter().enumerate() {
        // the domain lies inside the outer curve and outside the obstacles
        let side = if ti == 0 { -1.0 } else { 1.0 };
        let mt = target.len();
        let mut v = CMatrix::zeros(mt, n_total);
        let mut d = CMatrix::zeros(mt, n_total);
        for (si, source) in curves.iter().enumerate() {
            let same = ti == si;
            let s = assemble(Kernel::Single, k, target, source, same);
            let kk = assemble(Kernel::Double, k, target, source, same);
            let kp = assemble(Kernel::AdjointDouble, k, target, source, same);
            let t = if same {
                assemble_hypersingular_same(k, target)
            } else {
                assemble_hypersingular_cross(k, target, source)
            };
            let mut vb = kk - s * ieta;
            let mut db = t - kp * ieta;
            if same {
                for i in 0..mt {
                    // double-layer jump +/- phi/2, single-layer derivative jump
                    vb[(i, i)] += Complex64::new(0.5 * side, 0.0);
                    db[(i, i)] += ieta * Complex64::new(0.5 * side, 0.0);
                }
            }
            v.view_mut((0, offsets[si]), (mt, source.len())).copy_from(&vb);
            d.view_mut((0, offsets[si]), (mt, source.len())).copy_from(&db);
        }
        value_ops.push(v);
        deriv_ops.push(d);
    }
    (value_ops, deriv_ops)
}

/// Power iteration for `1/sigma_min` through the factored system.
fn estimate_condition(
    lu: &nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    lu_adj: &nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    norm_a: f64,
    n: usize,
) -> f64 {
    // deterministic pseudo-random start vector
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut v = CVector::from_fn(n, |_, _| {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let re = ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let im = ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
        Complex64::new(re, im)
    });
    v /= Complex64::new(v.norm(), 0.0);
    let mut inv_sigma_sq = 0.0;
    for _ in 0..8 {
        let w = match lu_adj.solve(&v) {
            Some(w) => w,
            None => return f64::INFINITY,
        };
        let u = match lu.solve(&w) {
            Some(u) => u,
            None => return f64::INFINITY,
        };
        inv_sigma_sq = u.norm();
        if inv_sigma_sq == 0.0 {
            break;
        }
        v = u / Complex64::new(inv_sigma_sq, 0.0);
    }
    norm_a * inv_sigma_sq.sqrt()
}

/// A solved field: layer densities plus evaluators.
pub struct FieldSolution<'a> {
    solver: &'a DtnSolver,
    densities: CVector,
}

impl FieldSolution<'_> {
    /// Outward Neumann trace on the outer boundary nodes.
    pub fn neumann_trace(&self) -> BoundaryData {
        let n = &self.solver.deriv_ops[0] * &self.densities;
        BoundaryData::new(n.iter().copied().collect())
    }

    /// Dirichlet trace on the outer boundary nodes (round-trip check).
    pub fn dirichlet_trace(&self) -> BoundaryData {
        let v = &self.solver.value_ops[0] * &self.densities;
        BoundaryData::new(v.iter().copied().collect())
    }

    /// Value trace on obstacle `m` (domain side).
    pub fn obstacle_value_trace(&self, m: usize) -> Vec<Complex64> {
        let v = &self.solver.value_ops[m + 1] * &self.densities;
        v.iter().copied().collect()
    }

    /// Normal-derivative trace on obstacle `m` with respect to the curve's
    /// outward normal (pointing out of the obstacle).
    pub fn obstacle_normal_trace(&self, m: usize) -> Vec<Complex64> {
        let v = &self.solver.deriv_ops[m + 1] * &self.densities;
        v.iter().copied().collect()
    }

    fn check_eval_point(&self, z: Vec2) -> Result<(), ForwardError> {
        if !self.solver.scene.in_domain(z) {
            return Err(ForwardError::OutsideDomain(z));
        }
        for curve in &self.solver.curves {
            // trapezoid evaluation of the layer kernels decays like
            // exp(-2 pi d / h_arc); two arc spacings keep it below ~1e-6
            let clearance =
                2.0 * curve.spacing() * curve.jacobians.iter().cloned().fold(0.0, f64::max);
            if curve.spec.distance_to(z) < clearance {
                return Err(ForwardError::TooCloseToBoundary(z));
            }
        }
        Ok(())
    }

    /// Field value at an interior point (away from all curves).
    pub fn eval(&self, z: Vec2) -> Result<Complex64, ForwardError> {
        self.check_eval_point(z)?;
        Ok(self.eval_unchecked(z))
    }

    pub(crate) fn eval_unchecked(&self, z: Vec2) -> Complex64 {
        let k = self.solver.scene.k;
        let ieta = Complex64::new(0.0, self.solver.eta);
        let mut acc = Complex64::new(0.0, 0.0);
        for (ci, curve) in self.solver.curves.iter().enumerate() {
            let off = self.solver.offsets[ci];
            for j in 0..curve.len() {
                let y = curve.nodes[j];
                let g = green2d(k, z, y).expect("point off the curve");
                let dlp = g.gradient[0] * (-curve.normals[j].x)
                    + g.gradient[1] * (-curve.normals[j].y);
                // dG/dnu(y) = -grad_z G . nu(y) by the kernel's antisymmetry
                let kernel = dlp - ieta * g.value;
                acc += kernel * self.densities[off + j] * curve.weight(j);
            }
        }
        acc
    }

    /// Field gradient at an interior point.
    pub fn eval_gradient(&self, z: Vec2) -> Result<[Complex64; 2], ForwardError> {
        self.check_eval_point(z)?;
        let k = self.solver.scene.k;
        let ieta = Complex64::new(0.0, self.solver.eta);
        let mut acc = [Complex64::new(0.0, 0.0); 2];
        for (ci, curve) in self.solver.curves.iter().enumerate() {
            let off = self.solver.offsets[ci];
            for j in 0..curve.len() {
                let y = curve.nodes[j];
                let gd = grad_dlp_kernel(k, z, y, curve.normals[j]);
                let gs = grad_slp_kernel(k, z, y);
                let w = self.densities[off + j] * curve.weight(j);
                acc[0] += (gd[0] - ieta * gs[0]) * w;
                acc[1] += (gd[1] - ieta * gs[1]) * w;
            }
        }
        Ok(acc)
    }

    /// Maximum boundary-condition residual, checked on a doubled grid with
    /// trigonometric upsampling of the densities (exercises off-node points).
    pub fn boundary_residual(&self, f: Option<&BoundaryData>) -> Result<f64, ForwardError> {
        let solver = self.solver;
        let k = solver.scene.k;
        let refined: Vec<DiscretizedCurve> = solver
            .curves
            .iter()
            .map(|c| DiscretizedCurve::new(&c.spec, 2 * c.len()))
            .collect::<Result<_, _>>()?;
        // upsample densities curve by curve
        let mut dens_fine = CVector::zeros(2 * solver.n_total);
        let mut off_fine = 0;
        for (ci, curve) in solver.curves.iter().enumerate() {
            let m = curve.len();
            let off = solver.offsets[ci];
            let part: Vec<Complex64> =
                (0..m).map(|i| self.densities[off + i]).collect();
            let fine = trig_upsample(&part);
            for (i, v) in fine.iter().enumerate() {
                dens_fine[off_fine + i] = *v;
            }
            off_fine += 2 * m;
        }
        let (value_ops, deriv_ops) = assemble_traces(&refined, k, solver.eta);
        let mut worst: f64 = 0.0;
        for (ci, curve) in refined.iter().enumerate() {
            let vals = &value_ops[ci] * &dens_fine;
            let ders = &deriv_ops[ci] * &dens_fine;
            if ci == 0 {
                let f_fine = match f {
                    Some(f) => trig_upsample(&f.samples),
                    None => vec![Complex64::new(0.0, 0.0); curve.len()],
                };
                for i in 0..curve.len() {
                    worst = worst.max((vals[i] - f_fine[i]).norm());
                }
            } else {
                match &solver.scene.bc {
                    BoundaryCondition::SoundSoft => {
                        for i in 0..curve.len() {
                            worst = worst.max(vals[i].norm());
                        }
                    }
                    BoundaryCondition::Impedance { .. } => {
                        let lam = solver.scene.bc.lambda_for(ci - 1).expect("impedance");
                        for i in 0..curve.len() {
                            let r = -ders[i] + lam.eval(curve.param(i)) * vals[i];
                            worst = worst.max(r.norm());
                        }
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// Exact trigonometric interpolation onto the doubled grid.
fn trig_upsample(samples: &[Complex64]) -> Vec<Complex64> {
    let coeffs = crate::oracle::dft(samples);
    let m = samples.len();
    let mut padded = vec![Complex64::new(0.0, 0.0); 2 * m];
    for (idx, &c) in coeffs.iter().enumerate() {
        // signed mode of index in the m-point transform
        let mode = if idx <= m / 2 { idx as i64 } else { idx as i64 - m as i64 };
        let new_idx = mode.rem_euclid(2 * m as i64) as usize;
        if idx == m / 2 {
            // Nyquist mode splits evenly between +m/2 and -m/2
            padded[m / 2] += c * 0.5;
            padded[2 * m - m / 2] += c * 0.5;
        } else {
            padded[new_idx] += c;
        }
    }
    crate::oracle::idft(&padded)
}

/// Background DtN action: Neumann trace of the obstacle-free solution.
pub fn dtn_background(
    outer: &crate::geometry::CurveSpec,
    k: f64,
    f: &BoundaryData,
    m_outer: usize,
) -> Result<BoundaryData, ForwardError> {
    let scene = ObstacleScene::empty(outer.clone(), k);
    let config = SolverConfig { m_outer, ..SolverConfig::default() };
    let solver = DtnSolver::build(&scene, config)?;
    Ok(solver.solve_dirichlet(f)?.neumann_trace())
}
