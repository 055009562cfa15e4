//! Closed-form mode solutions for concentric-disk scenes.
//!
//! With the outer boundary a circle of radius `R` and a single concentric
//! obstacle of radius `rho`, the annulus solution separates into Fourier
//! modes `u_m(r) e^{i m theta}` with radial part `a J_|m|(kr) + b Y_|m|(kr)`.
//! These serve as the independent oracle for the boundary-integral solver,
//! the reflected solution and the indicator quantities.

use num_complex::Complex64;
use thiserror::Error;

use crate::specfun::{bessel_j_upto, bessel_y_upto};
use crate::vec2::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("mode {mode} system is singular (normalized determinant {det:e})")]
    ModeResonance { mode: i32, det: f64 },
    #[error("boundary data has spectral tail {tail:e} beyond mode {max_mode} (limit {limit:e})")]
    TailTooLarge { tail: f64, max_mode: usize, limit: f64 },
    #[error("series truncation failed: term {term:e} at order {order} above target {target:e}")]
    TruncationFailed { order: usize, term: f64, target: f64 },
}

/// Obstacle condition on the inner circle. The normal there points toward
/// the origin (outward with respect to the annulus), so the impedance
/// condition reads `-du/dr + lambda u = 0` at `r = rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnnulusBc {
    SoundSoft,
    Impedance(Complex64),
}

/// One Fourier mode of the annulus solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSolution {
    pub mode: i32,
    /// Coefficient of `J_|m|(kr)`.
    pub a: Complex64,
    /// Coefficient of `Y_|m|(kr)`.
    pub b: Complex64,
    pub bc: AnnulusBc,
}

/// Concentric scene parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusOracle {
    pub r_outer: f64,
    pub r_inner: f64,
    pub k: f64,
    pub bc: AnnulusBc,
}

/// Bessel data at a fixed argument for all orders up to a cap.
struct RadialTable {
    j: Vec<f64>,
    y: Vec<f64>,
    x: f64,
}

impl RadialTable {
    fn new(x: f64, m_max: usize) -> Self {
        RadialTable { j: bessel_j_upto(m_max, x), y: bessel_y_upto(m_max, x), x }
    }

    fn j_prime(&self, m: usize) -> f64 {
        if m == 0 {
            -self.j[1]
        } else {
            self.j[m - 1] - m as f64 / self.x * self.j[m]
        }
    }

    fn y_prime(&self, m: usize) -> f64 {
        if m == 0 {
            -self.y[1]
        } else {
            self.y[m - 1] - m as f64 / self.x * self.y[m]
        }
    }
}

impl AnnulusOracle {
    pub fn new(r_outer: f64, r_inner: f64, k: f64, bc: AnnulusBc) -> Self {
        assert!(0.0 < r_inner && r_inner < r_outer, "requires 0 < rho < R");
        assert!(k > 0.0);
        AnnulusOracle { r_outer, r_inner, k, bc }
    }

    /// Solves the 2x2 mode system for outer Dirichlet data `f_m`.
    pub fn mode_solve(&self, mode: i32, f_m: Complex64) -> Result<ModeSolution, OracleError> {
        let m = mode.unsigned_abs() as usize;
        let outer = RadialTable::new(self.k * self.r_outer, m + 1);
        let inner = RadialTable::new(self.k * self.r_inner, m + 1);
        self.mode_solve_with(mode, f_m, &outer, &inner)
    }

    fn mode_solve_with(
        &self,
        mode: i32,
        f_m: Complex64,
        outer: &RadialTable,
        inner: &RadialTable,
    ) -> Result<ModeSolution, OracleError> {
        let m = mode.unsigned_abs() as usize;
        // row 1: Dirichlet trace at r = R equals f_m
        let r1 = [Complex64::new(outer.j[m], 0.0), Complex64::new(outer.y[m], 0.0)];
        // row 2: obstacle condition at r = rho
        let r2 = match self.bc {
            AnnulusBc::SoundSoft => {
                [Complex64::new(inner.j[m], 0.0), Complex64::new(inner.y[m], 0.0)]
            }
            AnnulusBc::Impedance(lambda) => [
                -self.k * inner.j_prime(m) + lambda * inner.j[m],
                -self.k * inner.y_prime(m) + lambda * inner.y[m],
            ],
        };
        let (a, b) = solve_2x2(r1, r2, f_m, Complex64::new(0.0, 0.0))
            .map_err(|det| OracleError::ModeResonance { mode, det })?;
        Ok(ModeSolution { mode, a, b, bc: self.bc })
    }

    /// Radial value `a J_|m|(kr) + b Y_|m|(kr)`.
    pub fn value_at(&self, sol: &ModeSolution, r: f64) -> Complex64 {
        let m = sol.mode.unsigned_abs() as usize;
        let t = RadialTable::new(self.k * r, m + 1);
        sol.a * t.j[m] + sol.b * t.y[m]
    }

    /// Radial derivative `d/dr` of the mode.
    pub fn radial_derivative_at(&self, sol: &ModeSolution, r: f64) -> Complex64 {
        let m = sol.mode.unsigned_abs() as usize;
        let t = RadialTable::new(self.k * r, m + 1);
        self.k * (sol.a * t.j_prime(m) + sol.b * t.y_prime(m))
    }

    /// Outward Neumann coefficient at `r = R` for this mode.
    pub fn neumann_coefficient(&self, sol: &ModeSolution) -> Complex64 {
        self.radial_derivative_at(sol, self.r_outer)
    }

    /// Neumann trace at the outer-circle nodes for sampled Dirichlet data.
    ///
    /// The data must be spectrally resolved by at most `max_mode` Fourier
    /// modes; a larger tail is an error.
    pub fn neumann_trace(
        &self,
        f: &[Complex64],
        max_mode: usize,
        tail_limit: f64,
    ) -> Result<Vec<Complex64>, OracleError> {
        let coeffs = dft(f);
        check_tail(&coeffs, max_mode, tail_limit)?;
        let n = f.len();
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mut neumann_modes = vec![Complex64::new(0.0, 0.0); n];
        for (idx, &fm) in coeffs.iter().enumerate() {
            let m = signed_mode(idx, n);
            if m.unsigned_abs() as usize > max_mode || fm.norm() <= 1e-14 * scale {
                continue;
            }
            let sol = self.mode_solve(m, fm)?;
            neumann_modes[idx] = self.neumann_coefficient(&sol);
        }
        Ok(idft(&neumann_modes))
    }

    /// Value of the full annulus solution at a point, for sampled outer data.
    pub fn field_at(
        &self,
        f: &[Complex64],
        max_mode: usize,
        tail_limit: f64,
        z: Vec2,
    ) -> Result<Complex64, OracleError> {
        let coeffs = dft(f);
        check_tail(&coeffs, max_mode, tail_limit)?;
        let n = f.len();
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let r = z.norm();
        let theta = z.angle();
        let mut total = Complex64::new(0.0, 0.0);
        for (idx, &fm) in coeffs.iter().enumerate() {
            let m = signed_mode(idx, n);
            if m.unsigned_abs() as usize > max_mode || fm.norm() <= 1e-14 * scale {
                continue;
            }
            let sol = self.mode_solve(m, fm)?;
            total += self.value_at(&sol, r) * Complex64::from_polar(1.0, m as f64 * theta);
        }
        Ok(total)
    }

    /// Reflected solution `w` for a point source at `x` (outside the
    /// obstacle), evaluated at `z` in the annulus. Built mode by mode from
    /// the addition-theorem expansion of the fundamental solution about the
    /// origin, truncated once terms drop below `tol`.
    pub fn reflected_at(&self, x: Vec2, z: Vec2, tol: f64) -> Result<Complex64, OracleError> {
        let r_x = x.norm();
        assert!(
            r_x > self.r_inner && r_x < self.r_outer,
            "source must lie in the annulus"
        );
        let theta_x = x.angle();
        let r_z = z.norm();
        let theta_z = z.angle();

        // upper bound on the truncation order before f64 range runs out
        let m_cap = 400usize;
        let inner = RadialTable::new(self.k * self.r_inner, m_cap + 1);
        let outer = RadialTable::new(self.k * self.r_outer, m_cap + 1);
        let source_j = bessel_j_upto(m_cap + 1, self.k * r_x);
        let source_y = bessel_y_upto(m_cap + 1, self.k * r_x);
        let z_j = bessel_j_upto(m_cap + 1, self.k * r_z);
        let z_y = bessel_y_upto(m_cap + 1, self.k * r_z);

        let i4 = Complex64::new(0.0, 0.25);
        let mut total = Complex64::new(0.0, 0.0);
        let mut last_term = f64::MAX;
        for m in 0..=m_cap {
            if !source_y[m].is_finite() || !inner.y[m].is_finite() {
                return Err(OracleError::TruncationFailed {
                    order: m,
                    term: last_term,
                    target: tol,
                });
            }
            let h_x = Complex64::new(source_j[m], source_y[m]);
            // obstacle-condition data of -G corrected for the annulus BC
            let g_m = match self.bc {
                AnnulusBc::SoundSoft => -i4 * inner.j[m] * h_x,
                AnnulusBc::Impedance(lambda) => {
                    i4 * (self.k * inner.j_prime(m) - lambda * inner.j[m]) * h_x
                }
            };
            // mode system with zero outer data
            let r1 = [Complex64::new(outer.j[m], 0.0), Complex64::new(outer.y[m], 0.0)];
            let r2 = match self.bc {
                AnnulusBc::SoundSoft => {
                    [Complex64::new(inner.j[m], 0.0), Complex64::new(inner.y[m], 0.0)]
                }
                AnnulusBc::Impedance(lambda) => [
                    -self.k * inner.j_prime(m) + lambda * inner.j[m],
                    -self.k * inner.y_prime(m) + lambda * inner.y[m],
                ],
            };
            let (alpha, beta) = solve_2x2(r1, r2, Complex64::new(0.0, 0.0), g_m)
                .map_err(|det| OracleError::ModeResonance { mode: m as i32, det })?;
            let radial = alpha * z_j[m] + beta * z_y[m];
            let phase = Complex64::from_polar(1.0, m as f64 * (theta_z - theta_x));
            let contrib = if m == 0 {
                radial
            } else {
                // +m and -m contributions are equal up to the conjugate phase
                radial * (phase + phase.conj())
            };
            total += contrib;
            last_term = contrib.norm();
            if m > 4 && last_term < tol && radial.norm() * 2.0 < tol {
                return Ok(total);
            }
        }
        Err(OracleError::TruncationFailed { order: m_cap, term: last_term, target: tol })
    }

    /// Neumann coefficient of the obstacle-free disk: `k J'_m(kR)/J_m(kR) f_m`.
    pub fn background_neumann_coefficient(
        k: f64,
        r_outer: f64,
        mode: i32,
        f_m: Complex64,
    ) -> Result<Complex64, OracleError> {
        let m = mode.unsigned_abs() as usize;
        let t = RadialTable::new(k * r_outer, m + 1);
        if t.j[m].abs() < 1e-300 {
            return Err(OracleError::ModeResonance { mode, det: t.j[m].abs() });
        }
        Ok(k * t.j_prime(m) / t.j[m] * f_m)
    }
}

fn solve_2x2(
    r1: [Complex64; 2],
    r2: [Complex64; 2],
    rhs1: Complex64,
    rhs2: Complex64,
) -> Result<(Complex64, Complex64), f64> {
    // column equilibration: J and Y entries differ by many orders of
    // magnitude at high modes without the system being near-singular
    let c1 = r1[0].norm().max(r2[0].norm()).max(1e-300);
    let c2 = r1[1].norm().max(r2[1].norm()).max(1e-300);
    let s1 = (r1[0].norm() / c1).max(r1[1].norm() / c2).max(1e-300);
    let s2 = (r2[0].norm() / c1).max(r2[1].norm() / c2).max(1e-300);
    let a = [r1[0] / (c1 * s1), r1[1] / (c2 * s1)];
    let b = [r2[0] / (c1 * s2), r2[1] / (c2 * s2)];
    let det = a[0] * b[1] - a[1] * b[0];
    if det.norm() < 1e-10 {
        return Err(det.norm());
    }
    let f1 = rhs1 / s1;
    let f2 = rhs2 / s2;
    Ok((
        (f1 * b[1] - a[1] * f2) / det / c1,
        (a[0] * f2 - f1 * b[0]) / det / c2,
    ))
}

fn signed_mode(idx: usize, n: usize) -> i32 {
    if idx <= n / 2 {
        idx as i32
    } else {
        idx as i32 - n as i32
    }
}

/// Forward DFT normalised so the output holds Fourier coefficients.
pub fn dft(samples: &[Complex64]) -> Vec<Complex64> {
    let n = samples.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (m, slot) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &s) in samples.iter().enumerate() {
            let phase = -2.0 * std::f64::consts::PI * (m * j) as f64 / n as f64;
            acc += s * Complex64::from_polar(1.0, phase);
        }
        *slot = acc / n as f64;
    }
    out
}

/// Inverse DFT matching [`dft`].
pub fn idft(coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (j, slot) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, &c) in coeffs.iter().enumerate() {
            let phase = 2.0 * std::f64::consts::PI * (m * j) as f64 / n as f64;
            acc += c * Complex64::from_polar(1.0, phase);
        }
        *slot = acc;
    }
    out
}

fn check_tail(coeffs: &[Complex64], max_mode: usize, limit: f64) -> Result<(), OracleError> {
    let n = coeffs.len();
    let total: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    let tail: f64 = coeffs
        .iter()
        .enumerate()
        .filter(|(idx, _)| signed_mode(*idx, n).unsigned_abs() as usize > max_mode)
        .map(|(_, c)| c.norm_sqr())
        .sum();
    let rel = (tail / total.max(1e-300)).sqrt();
    if rel > limit {
        return Err(OracleError::TailTooLarge { tail: rel, max_mode, limit });
    }
    Ok(())
}
