//! Mass-matrix charge correction.
//!
//! After reconstruction the particles' deposited charge differs from the
//! checkpointed grid density because positions were redrawn. Scaling each
//! particle weight by `1 + Σ_g S_g(x_p) λ_g` changes the deposit linearly in
//! `λ`, through the mass matrix
//!
//! ```text
//! M_gh = (q/Δx) Σ_p α_p S_g(x_p) S_h(x_p)
//! ```
//!
//! so solving `M λ = ρ_target − ρ` restores the target density at every node
//! and with it Gauss' law for the stored field. Positions and velocities are
//! never touched.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::particle::Particle;

/// Particle shape used for charge deposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DepositionScheme {
    /// Cloud-in-cell: two nodes per particle.
    #[default]
    Linear,
    /// Quadratic spline: three nodes per particle.
    Quadratic,
}

impl DepositionScheme {
    pub fn order(self) -> usize {
        match self {
            DepositionScheme::Linear => 1,
            DepositionScheme::Quadratic => 2,
        }
    }

    fn half_bandwidth(self) -> usize {
        self.order()
    }

    /// First (unwrapped) node index and the weights of the nodes it touches.
    #[inline]
    pub fn weights(self, x: f64, grid: &Grid) -> (isize, [f64; 3], usize) {
        let s = x / grid.dx;
        match self {
            DepositionScheme::Linear => {
                let c = s.floor();
                let f = s - c;
                (c as isize, [1.0 - f, f, 0.0], 2)
            }
            DepositionScheme::Quadratic => {
                let g = s.round();
                let d = s - g;
                (
                    g as isize - 1,
                    [0.5 * (0.5 - d) * (0.5 - d), 0.75 - d * d, 0.5 * (0.5 + d) * (0.5 + d)],
                    3,
                )
            }
        }
    }
}

#[inline]
fn wrap_node(g: isize, n: usize) -> usize {
    g.rem_euclid(n as isize) as usize
}

/// Node charge density `ρ_g = (q/Δx) Σ_p α_p S_g(x_p)`.
pub fn deposit_charge(
    particles: &[Particle],
    grid: &Grid,
    scheme: DepositionScheme,
    charge: f64,
) -> Result<Vec<f64>> {
    let mut rho = vec![0.0; grid.nx];
    for (i, p) in particles.iter().enumerate() {
        if !grid.contains(p.x) {
            return Err(Error::InvalidParticle { index: i, x: p.x });
        }
        let (first, w, count) = scheme.weights(p.x, grid);
        for (k, wk) in w.iter().enumerate().take(count) {
            rho[wrap_node(first + k as isize, grid.nx)] += p.weight * wk;
        }
    }
    let scale = charge / grid.dx;
    rho.iter_mut().for_each(|r| *r *= scale);
    Ok(rho)
}

/// Symmetric periodic banded matrix; entry `(g, o)` is `M[g][g+o mod n]`
/// for `o` in `-b..=b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassMatrix {
    n: usize,
    half_band: usize,
    band: Vec<f64>,
}

impl MassMatrix {
    pub fn assemble(particles: &[Particle], grid: &Grid, scheme: DepositionScheme, charge: f64) -> Result<Self> {
        let n = grid.nx;
        let b = scheme.half_bandwidth();
        let width = 2 * b + 1;
        let mut band = vec![0.0; n * width];
        for (i, p) in particles.iter().enumerate() {
            if !grid.contains(p.x) {
                return Err(Error::InvalidParticle { index: i, x: p.x });
            }
            let (first, w, count) = scheme.weights(p.x, grid);
            for r in 0..count {
                let g = wrap_node(first + r as isize, n);
                for c in 0..count {
                    let o = c as isize - r as isize + b as isize;
                    band[g * width + o as usize] += p.weight * w[r] * w[c];
                }
            }
        }
        let scale = charge / grid.dx;
        band.iter_mut().for_each(|x| *x *= scale);
        Ok(Self { n, half_band: b, band })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn entry(&self, g: usize, offset: isize) -> f64 {
        let width = 2 * self.half_band + 1;
        self.band[g * width + (offset + self.half_band as isize) as usize]
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let b = self.half_band as isize;
        (0..self.n)
            .map(|g| {
                (-b..=b)
                    .map(|o| self.entry(g, o) * x[wrap_node(g as isize + o, self.n)])
                    .sum()
            })
            .collect()
    }

    /// Dense form with periodic aliasing resolved (entries that wrap onto the
    /// same column add up).
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let b = self.half_band as isize;
        let mut a = vec![0.0; n * n];
        for g in 0..n {
            for o in -b..=b {
                a[g * n + wrap_node(g as isize + o, n)] += self.entry(g, o);
            }
        }
        a
    }

    /// Nodes with an empty row.
    pub fn empty_nodes(&self) -> Vec<usize> {
        (0..self.n).filter(|&g| self.entry(g, 0) == 0.0).collect()
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn residual(m: &MassMatrix, x: &[f64], rhs: &[f64]) -> f64 {
    let mx = m.mul(x);
    let r: Vec<f64> = mx.iter().zip(rhs).map(|(a, b)| a - b).collect();
    norm(&r) / norm(rhs).max(f64::MIN_POSITIVE)
}

/// Thomas algorithm on a non-periodic tridiagonal system.
fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return None;
    }
    d[0] = rhs[0] / beta;
    for i in 1..n {
        c[i] = sup[i - 1] / beta;
        beta = diag[i] - sub[i] * c[i];
        if beta == 0.0 {
            return None;
        }
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i + 1] * d[i + 1];
    }
    Some(d)
}

/// Periodic tridiagonal solve via Sherman–Morrison. `sub[i] = A[i][i-1]`,
/// `sup[i] = A[i][i+1]`, indices wrapping.
pub fn solve_cyclic_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    if n < 3 {
        return None;
    }
    let alpha = sub[0]; // A[0][n-1]
    let beta = sup[n - 1]; // A[n-1][0]
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= alpha * beta / gamma;
    let x = thomas(sub, &bb, sup, rhs)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = beta;
    let z = thomas(sub, &bb, sup, &u)?;
    let fact = (x[0] + alpha * x[n - 1] / gamma) / (1.0 + z[0] + alpha * z[n - 1] / gamma);
    Some(x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect())
}

fn dense_solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[piv * n + col] == 0.0 {
            return None;
        }
        for k in 0..n {
            a.swap(col * n + k, piv * n + k);
        }
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row * n + k] * b[k]).sum();
        b[row] = (b[row] - s) / a[row * n + row];
    }
    Some(b)
}

/// Conjugate gradients for `±M` (the sign of `q` makes `M` negative definite
/// for negative charges; CG runs on `sign · M`).
fn conjugate_gradient(m: &MassMatrix, rhs: &[f64], x0: Vec<f64>, tol: f64) -> (Vec<f64>, f64) {
    let sign = if m.entry(0, 0) < 0.0 { -1.0 } else { 1.0 };
    let b: Vec<f64> = rhs.iter().map(|v| sign * v).collect();
    let apply = |x: &[f64]| -> Vec<f64> { m.mul(x).into_iter().map(|v| sign * v).collect() };
    let bnorm = norm(&b).max(f64::MIN_POSITIVE);
    let mut x = x0;
    let ax = apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
    let mut p = r.clone();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    for _ in 0..(10 * m.size() + 100) {
        if rr.sqrt() <= tol * bnorm {
            break;
        }
        let ap = apply(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap == 0.0 {
            break;
        }
        let step = rr / pap;
        for i in 0..x.len() {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
    }
    let res = residual(m, &x, rhs);
    (x, res)
}

/// Solves `M λ = rhs`: direct periodic factorization for linear shapes,
/// conjugate gradients otherwise or when the direct result misses `tol`.
pub fn solve_mass_system(m: &MassMatrix, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    let empty = m.empty_nodes();
    if !empty.is_empty() {
        return Err(Error::UncorrectableNodes(empty));
    }
    if rhs.iter().all(|&r| r == 0.0) {
        return Ok(vec![0.0; m.n]);
    }
    let n = m.n;
    let direct = if n <= 2 * m.half_band + 1 {
        dense_solve(m.to_dense(), rhs.to_vec())
    } else if m.half_band == 1 {
        let sub: Vec<f64> = (0..n).map(|g| m.entry(g, -1)).collect();
        let diag: Vec<f64> = (0..n).map(|g| m.entry(g, 0)).collect();
        let sup: Vec<f64> = (0..n).map(|g| m.entry(g, 1)).collect();
        solve_cyclic_tridiagonal(&sub, &diag, &sup, rhs)
    } else {
        None
    };
    let (x, res) = match direct {
        Some(x) => {
            let res = residual(m, &x, rhs);
            if res <= tol {
                (x, res)
            } else {
                conjugate_gradient(m, rhs, x, tol)
            }
        }
        None => conjugate_gradient(m, rhs, vec![0.0; n], tol),
    };
    if !(res <= tol) {
        return Err(Error::SolverFailure { residual: res });
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussReport {
    /// `max_g |ρ_g − ρ_target,g| / max_g |ρ_target,g|` after correction.
    pub max_relative_residual: f64,
    pub negative_weights: usize,
    /// `Σ_g (ρ_target − ρ_before)_g Δx`.
    pub charge_change: f64,
    pub max_relative_weight_change: f64,
}

/// Default relative tolerance of the λ solve.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-12;

/// Adjusts particle weights so their deposit equals `rho_target`.
pub fn enforce_gauss(
    particles: &mut [Particle],
    rho_target: &[f64],
    grid: &Grid,
    scheme: DepositionScheme,
    charge: f64,
    solver_tol: f64,
) -> Result<GaussReport> {
    if rho_target.len() != grid.nx {
        return Err(Error::DimensionMismatch {
            expected: grid.nx,
            found: rho_target.len(),
        });
    }
    let rho = deposit_charge(particles, grid, scheme, charge)?;
    let rhs: Vec<f64> = rho_target.iter().zip(&rho).map(|(t, r)| t - r).collect();
    let charge_change = rhs.iter().sum::<f64>() * grid.dx;
    let scale = rho_target.iter().fold(0.0f64, |m, r| m.max(r.abs())).max(f64::MIN_POSITIVE);

    let lambda = if rhs.iter().all(|&r| r == 0.0) {
        vec![0.0; grid.nx]
    } else {
        let m = MassMatrix::assemble(particles, grid, scheme, charge)?;
        solve_mass_system(&m, &rhs, solver_tol)?
    };

    let factors: Vec<f64> = particles
        .iter()
        .map(|p| {
            let (first, w, count) = scheme.weights(p.x, grid);
            (0..count)
                .map(|k| w[k] * lambda[wrap_node(first + k as isize, grid.nx)])
                .sum::<f64>()
        })
        .collect();
    let too_large = factors.iter().filter(|f| f.abs() > 1.0).count();
    if too_large * 100 > particles.len() {
        return Err(Error::CorrectionTooLarge {
            count: too_large,
            total: particles.len(),
        });
    }
    let mut negative = 0;
    for (p, f) in particles.iter_mut().zip(&factors) {
        if *f != 0.0 {
            p.weight *= 1.0 + f;
        }
        if p.weight < 0.0 {
            negative += 1;
        }
    }
    if negative > 0 {
        log::warn!("charge correction left {negative} particles with negative weight");
    }
    let after = deposit_charge(particles, grid, scheme, charge)?;
    let max_res = after
        .iter()
        .zip(rho_target)
        .fold(0.0f64, |m, (a, t)| m.max((a - t).abs()))
        / scale;
    Ok(GaussReport {
        max_relative_residual: max_res,
        negative_weights: negative,
        charge_change,
        max_relative_weight_change: factors.iter().fold(0.0f64, |m, f| m.max(f.abs())),
    })
}
