//! 1D-1V periodic electrostatic PIC.
//!
//! Normalized units: lengths in Debye lengths, time in inverse plasma
//! frequency, velocities in thermal speeds. Electrons have `q = -1`, `m = 1`
//! and unit mean density; ions are an immobile neutralizing background.
//!
//! Layout: charge density on nodes `g·Δx` with linear shapes, field and
//! current on faces, one per cell. Node `g` sits between faces `g-1` and `g`,
//! so the discrete Gauss law reads `(E_g − E_{g-1})/Δx = ρ_g`.
//!
//! The step is Crank–Nicolson in both particles and field, closed by Picard
//! iteration. Each particle orbit is split at cell faces and every piece
//! deposits `qα·seg/(ΔtΔx)` into the face current of its cell, which makes
//! the discrete continuity equation hold exactly. The velocity sees the
//! path-averaged face field, which makes field work and kinetic energy change
//! cancel exactly at convergence.

pub mod diagnostics;
pub mod restart;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::codec::DEFAULT_MIN_PARTICLES;
use crate::em::{derive_seed, FitConfig};
use crate::error::{Error, Result};
use crate::gauss::{deposit_charge, DepositionScheme, DEFAULT_SOLVER_TOL};
use crate::grid::Grid;
use crate::particle::Particle;

pub use diagnostics::DiagnosticsRow;

/// Absolute floor of the Picard convergence test, for fields at round-off.
const PICARD_ATOL: f64 = 1e-14;
/// Particles per parallel work item; fixes the reduction order.
const CHUNK: usize = 2048;
/// Face crossings allowed per particle and step.
const MAX_SUBSTEPS: usize = 10_000;
/// Zero-length hand-overs between cells before a particle is treated as
/// resting on a face.
const MAX_IDLE_MOVES: usize = 4;
/// Neutrality tolerance of the field solve, relative to `max(1, Σ|ρ|Δx)`.
const NEUTRALITY_TOL: f64 = 1e-12;

/// Position and velocity after a push.
type PhasePoint = (f64, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub length: f64,
    pub nx: usize,
    pub dt: f64,
    /// Particles per cell, split evenly between the two beams.
    pub particles_per_cell: usize,
    pub beam_speed: f64,
    pub end_time: f64,
    /// Relative field change that ends the Picard loop.
    pub picard_tol: f64,
    pub picard_max_iters: usize,
    pub seed: u64,
    /// Uniform random displacement of the lattice, in cells.
    pub jitter: f64,
    /// Displacement amplitude of the seeded growing mode, in cells.
    pub perturbation: f64,
    pub fit: FitConfig,
    pub min_particles: usize,
    /// Relative residual of the restart charge-correction solve.
    pub solver_tol: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            length: 2.0 * std::f64::consts::PI,
            nx: 32,
            dt: 0.2,
            particles_per_cell: 156,
            beam_speed: 3f64.sqrt() / 2.0,
            end_time: 20.0,
            picard_tol: 1e-10,
            picard_max_iters: 50,
            seed: 1,
            jitter: 1e-4,
            perturbation: 0.07,
            fit: FitConfig::default(),
            min_particles: DEFAULT_MIN_PARTICLES,
            solver_tol: DEFAULT_SOLVER_TOL,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        Grid::new(self.nx, self.length)?;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.particles_per_cell < 1 {
            return bad("particles_per_cell must be at least 1".into());
        }
        if !self.beam_speed.is_finite() || !self.end_time.is_finite() {
            return bad("beam_speed and end_time must be finite".into());
        }
        if !(self.picard_tol > 0.0) || self.picard_max_iters < 1 {
            return bad("picard_tol must be positive and picard_max_iters at least 1".into());
        }
        if !(self.jitter >= 0.0) || !self.perturbation.is_finite() {
            return bad("jitter must be nonnegative and perturbation finite".into());
        }
        if !(self.solver_tol > 0.0) {
            return bad("solver_tol must be positive".into());
        }
        self.fit.validate()
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.nx, self.length)
    }

    /// Step index closest to time `t`.
    pub fn step_at(&self, t: f64) -> u64 {
        (t / self.dt).round().max(0.0) as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub charge: f64,
    pub mass: f64,
    pub particles: Vec<Particle>,
}

impl Species {
    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.mass * self.particles.iter().map(|p| p.weight * p.v[0] * p.v[0]).sum::<f64>()
    }

    pub fn momentum(&self) -> f64 {
        self.mass * self.particles.iter().map(|p| p.weight * p.v[0]).sum::<f64>()
    }

    pub fn total_charge(&self) -> f64 {
        self.charge * self.particles.iter().map(|p| p.weight).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub cfg: SimConfig,
    pub grid: Grid,
    pub species: Vec<Species>,
    /// Face field, one value per cell.
    pub efield: Vec<f64>,
    /// Uniform background charge density (ions).
    pub background: f64,
    pub step: u64,
    /// Face current of the last step, before the mean is removed.
    pub current: Vec<f64>,
    pub last_picard_iterations: usize,
    last_continuity_rms: f64,
    last_energy_before_step: f64,
    /// Records loaded at restart, reused verbatim until the first step.
    pub(crate) restored: Option<crate::checkpoint::CheckpointFile>,
}

fn wrap_cell(c: f64, nx: usize) -> usize {
    (c as i64).rem_euclid(nx as i64) as usize
}

/// Smallest strictly positive time at which `ξ(τ) = ξ + uτ + ½aτ²` has
/// moved by `d`.
#[inline]
fn time_to_face(u: f64, a: f64, d: f64) -> Option<f64> {
    let disc = u * u + 2.0 * a * d;
    if disc < 0.0 {
        return None;
    }
    let q = u + disc.sqrt().copysign(if u >= 0.0 { 1.0 } else { -1.0 });
    let roots = [2.0 * d / q, -q / a];
    roots
        .into_iter()
        .filter(|t| t.is_finite() && *t > 0.0)
        .fold(None, |best: Option<f64>, t| Some(best.map_or(t, |b| b.min(t))))
}

/// Moves one particle through a time step in the half-step field `e`
/// (grid units: position in cells, `u` in cells per unit time, `accel` the
/// acceleration per unit field in cells per unit time squared). Within a cell
/// the field is constant and the motion is integrated exactly; the step is
/// cut wherever the particle reaches a face. `deposit(cell, seg)` receives
/// every in-cell displacement. Returns the unwrapped end position and
/// velocity.
#[inline]
fn push_orbit(xi0: f64, u0: f64, accel: f64, dt: f64, e: &[f64], mut deposit: impl FnMut(usize, f64)) -> (f64, f64) {
    let nx = e.len();
    let acc = |c: f64| accel * e[wrap_cell(c, nx)];
    let mut c = xi0.floor();
    let mut pos = xi0;
    let mut u = u0;
    let mut t_left = dt;
    let mut idle_moves = 0;
    for _ in 0..MAX_SUBSTEPS {
        if t_left <= 0.0 || idle_moves > MAX_IDLE_MOVES {
            break;
        }
        // on a face: hand over to the neighbouring cell if heading there
        if pos >= c + 1.0 {
            if u > 0.0 || (u == 0.0 && acc(c + 1.0) > 0.0) {
                c += 1.0;
                pos = c;
                idle_moves += 1;
                continue;
            }
            if u == 0.0 && acc(c) >= 0.0 {
                break;
            }
        }
        if pos <= c {
            if u < 0.0 || (u == 0.0 && acc(c - 1.0) < 0.0) {
                c -= 1.0;
                pos = c + 1.0;
                idle_moves += 1;
                continue;
            }
            if u == 0.0 && acc(c) <= 0.0 {
                break;
            }
        }
        let a = acc(c);
        let hit_right = time_to_face(u, a, c + 1.0 - pos);
        let hit_left = time_to_face(u, a, c - pos);
        let hit = match (hit_right, hit_left) {
            (Some(r), Some(l)) if l < r => Some((l, c, -1.0)),
            (Some(r), _) => Some((r, c + 1.0, 1.0)),
            (None, Some(l)) => Some((l, c, -1.0)),
            (None, None) => None,
        };
        match hit {
            Some((tau, face, dir)) if tau <= t_left => {
                let seg = face - pos;
                deposit(wrap_cell(c, nx), seg);
                // energy: u'² = u² + 2a·seg exactly
                u = dir * (u * u + 2.0 * a * seg).max(0.0).sqrt();
                pos = face;
                t_left -= tau;
                idle_moves = 0;
            }
            _ => {
                let u_new = u + a * t_left;
                let end = (pos + 0.5 * (u + u_new) * t_left).clamp(c, c + 1.0);
                deposit(wrap_cell(c, nx), end - pos);
                pos = end;
                u = u_new;
                break;
            }
        }
    }
    (pos, u)
}

/// Integrates the periodic Gauss law. Fails unless `ρ` is neutral.
pub fn field_solve(rho_total: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    let total: f64 = rho_total.iter().sum::<f64>() * grid.dx;
    let scale: f64 = rho_total.iter().map(|r| r.abs()).sum::<f64>() * grid.dx;
    if total.abs() > NEUTRALITY_TOL * scale.max(1.0) {
        return Err(Error::NonNeutral { total });
    }
    let mut e = Vec::with_capacity(grid.nx);
    let mut acc = 0.0;
    for r in rho_total {
        acc += grid.dx * r;
        e.push(acc);
    }
    let mean = e.iter().sum::<f64>() / grid.nx as f64;
    e.iter_mut().for_each(|v| *v -= mean);
    Ok(e)
}

/// `rms_g((E_g − E_{g-1})/Δx − ρ_g)`.
pub fn gauss_rms(efield: &[f64], rho_total: &[f64], grid: &Grid) -> f64 {
    let n = grid.nx;
    let s: f64 = (0..n)
        .map(|g| {
            let r = (efield[g] - efield[(g + n - 1) % n]) / grid.dx - rho_total[g];
            r * r
        })
        .sum();
    (s / n as f64).sqrt()
}

/// `rms_g((ρ^{n+1}_g − ρ^n_g)/Δt + (j_g − j_{g-1})/Δx)`.
pub fn continuity_rms(rho_new: &[f64], rho_old: &[f64], current: &[f64], dt: f64, grid: &Grid) -> f64 {
    let n = grid.nx;
    let s: f64 = (0..n)
        .map(|g| {
            let r = (rho_new[g] - rho_old[g]) / dt + (current[g] - current[(g + n - 1) % n]) / grid.dx;
            r * r
        })
        .sum();
    (s / n as f64).sqrt()
}

pub fn field_energy(efield: &[f64], grid: &Grid) -> f64 {
    0.5 * grid.dx * efield.iter().map(|e| e * e).sum::<f64>()
}

/// Two cold counter-streaming electron beams on a lattice.
pub fn init_two_stream(cfg: &SimConfig) -> Result<Simulation> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let per_beam = cfg.particles_per_cell / 2;
    if cfg.particles_per_cell % 2 == 1 {
        log::warn!(
            "odd particles_per_cell {}; using {} per beam",
            cfg.particles_per_cell,
            per_beam
        );
    }
    if per_beam == 0 {
        return Err(Error::InvalidConfig("need at least 2 particles per cell".into()));
    }
    let total = 2 * per_beam * grid.nx;
    let weight = grid.length / total as f64;
    let k = 2.0 * std::f64::consts::PI / grid.length;
    // Linear eigenmode of mode 1: beam displacements ξ± = Ê/(ω ∓ kv)² with
    // ω = iγ, i.e. equal amplitude and phases ±φ; velocities follow from
    // δv = −i(ω ∓ kv)ξ.
    let a = k * cfg.beam_speed;
    let gamma = diagnostics::cold_two_stream_growth_rate(k, cfg.beam_speed);
    let phase = (2.0 * a * gamma).atan2(a * a - gamma * gamma);
    let amp = cfg.perturbation * grid.dx;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0));
    let mut particles = Vec::with_capacity(total);
    for c in 0..grid.nx {
        for i in 0..per_beam {
            let x0 = (c as f64 + (i as f64 + 0.5) / per_beam as f64) * grid.dx;
            for sign in [1.0, -1.0] {
                let theta = k * x0 + sign * phase;
                let mut x = x0 + amp * theta.cos();
                let v = sign * cfg.beam_speed + amp * (gamma * theta.cos() - sign * a * theta.sin());
                if cfg.jitter > 0.0 {
                    x += cfg.jitter * grid.dx * rng.random_range(-1.0..1.0);
                }
                particles.push(Particle::new_1d(grid.wrap(x), v, weight, 0));
            }
        }
    }
    let electrons = Species {
        charge: -1.0,
        mass: 1.0,
        particles,
    };
    Simulation::new(cfg.clone(), grid, vec![electrons], None)
}

impl Simulation {
    /// Builds a state from particles; solves for `E` unless one is given.
    /// The background neutralizes the deposited particle charge.
    pub fn new(cfg: SimConfig, grid: Grid, species: Vec<Species>, efield: Option<Vec<f64>>) -> Result<Self> {
        let mut net = 0.0;
        for sp in &species {
            net += deposit_charge(&sp.particles, &grid, DepositionScheme::Linear, sp.charge)?
                .iter()
                .sum::<f64>();
        }
        Self::with_background(cfg, grid, species, efield, -net / grid.nx as f64)
    }

    pub fn with_background(
        cfg: SimConfig,
        grid: Grid,
        species: Vec<Species>,
        efield: Option<Vec<f64>>,
        background: f64,
    ) -> Result<Self> {
        let mut sim = Self {
            cfg,
            grid,
            species,
            efield: vec![0.0; grid.nx],
            background,
            step: 0,
            current: vec![0.0; grid.nx],
            last_picard_iterations: 0,
            last_continuity_rms: 0.0,
            last_energy_before_step: 0.0,
            restored: None,
        };
        sim.efield = match efield {
            Some(e) => {
                if e.len() != grid.nx {
                    return Err(Error::DimensionMismatch {
                        expected: grid.nx,
                        found: e.len(),
                    });
                }
                e
            }
            None => field_solve(&sim.total_rho()?, &grid)?,
        };
        sim.last_energy_before_step = sim.total_energy();
        Ok(sim)
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.dt
    }

    pub fn species_rho(&self, s: usize) -> Result<Vec<f64>> {
        let sp = &self.species[s];
        deposit_charge(&sp.particles, &self.grid, DepositionScheme::Linear, sp.charge)
    }

    /// Node charge density of all species plus the background.
    pub fn total_rho(&self) -> Result<Vec<f64>> {
        let mut rho = vec![self.background; self.grid.nx];
        for s in 0..self.species.len() {
            for (r, d) in rho.iter_mut().zip(self.species_rho(s)?) {
                *r += d;
            }
        }
        Ok(rho)
    }

    pub fn field_energy(&self) -> f64 {
        field_energy(&self.efield, &self.grid)
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.species.iter().map(|s| s.kinetic_energy()).sum()
    }

    pub fn total_energy(&self) -> f64 {
        self.field_energy() + self.kinetic_energy()
    }

    pub fn momentum(&self) -> f64 {
        self.species.iter().map(|s| s.momentum()).sum()
    }

    pub fn particle_count(&self) -> usize {
        self.species.iter().map(|s| s.particles.len()).sum()
    }

    pub fn gauss_rms(&self) -> Result<f64> {
        Ok(gauss_rms(&self.efield, &self.total_rho()?, &self.grid))
    }

    /// Diagnostics of the current state; `dE_total` is relative to the
    /// previous step.
    pub fn diagnostics(&self, event: diagnostics::Event) -> Result<DiagnosticsRow> {
        Ok(DiagnosticsRow {
            step: self.step,
            time: self.time(),
            field_energy: self.field_energy(),
            gauss_rms: self.gauss_rms()?,
            continuity_rms: if event == diagnostics::Event::Step { self.last_continuity_rms } else { 0.0 },
            energy_change: if event == diagnostics::Event::Step {
                self.total_energy() - self.last_energy_before_step
            } else {
                0.0
            },
            event,
        })
    }

    /// Pushes every particle through the half-step field `e_half` without
    /// touching the stored state. Returns the face current and the new
    /// (position, velocity) pairs per species.
    fn push_all(&self, e_half: &[f64]) -> (Vec<f64>, Vec<Vec<PhasePoint>>) {
        let nx = self.grid.nx;
        let (dt, dx) = (self.cfg.dt, self.grid.dx);
        let grid = self.grid;
        let mut j = vec![0.0; nx];
        let mut ends = Vec::with_capacity(self.species.len());
        for sp in &self.species {
            let accel = sp.charge / sp.mass / dx;
            let coef = sp.charge / dt;
            let partial: Vec<(Vec<f64>, Vec<PhasePoint>)> = sp
                .particles
                .par_chunks(CHUNK)
                .map(|ps| {
                    let mut local = vec![0.0; nx];
                    let mut out = Vec::with_capacity(ps.len());
                    for p in ps {
                        let w = coef * p.weight;
                        let (xi, u) = push_orbit(p.x / dx, p.v[0] / dx, accel, dt, e_half, |c, seg| {
                            local[c] += w * seg
                        });
                        out.push((grid.wrap(xi * dx), u * dx));
                    }
                    (local, out)
                })
                .collect();
            let mut sp_ends = Vec::with_capacity(sp.particles.len());
            for (local, out) in partial {
                for (a, b) in j.iter_mut().zip(local) {
                    *a += b;
                }
                sp_ends.extend(out);
            }
            ends.push(sp_ends);
        }
        (j, ends)
    }

    /// Advances one time step.
    pub fn step(&mut self) -> Result<()> {
        let nx = self.grid.nx;
        let dt = self.cfg.dt;
        let rho_old = self.total_rho()?;
        let energy_old = self.total_energy();
        let e_old = self.efield.clone();
        let e_old_norm = norm(&e_old);

        let mut e_new = e_old.clone();
        let mut trace = Vec::new();
        let mut result = None;
        for _ in 0..self.cfg.picard_max_iters {
            let e_half: Vec<f64> = e_old.iter().zip(&e_new).map(|(a, b)| 0.5 * (a + b)).collect();
            let (j, ends) = self.push_all(&e_half);
            let mean_j = j.iter().sum::<f64>() / nx as f64;
            let next: Vec<f64> = e_old.iter().zip(&j).map(|(e, jj)| e - dt * (jj - mean_j)).collect();
            let change = norm(&next.iter().zip(&e_new).map(|(a, b)| a - b).collect::<Vec<_>>());
            let scale = norm(&next).max(e_old_norm);
            trace.push(change / scale.max(f64::MIN_POSITIVE));
            e_new = next;
            if change <= self.cfg.picard_tol * scale + PICARD_ATOL {
                result = Some((j, ends));
                break;
            }
        }
        let Some((j, ends)) = result else {
            return Err(Error::StepFailure {
                iterations: trace.len(),
                trace,
            });
        };
        self.last_picard_iterations = trace.len();

        for (sp, ends) in self.species.iter_mut().zip(ends) {
            for (p, (x, v)) in sp.particles.iter_mut().zip(ends) {
                p.x = x;
                p.v[0] = v;
            }
        }
        self.efield = e_new;
        self.current = j;
        self.step += 1;
        self.restored = None;
        let rho_new = self.total_rho()?;
        self.last_continuity_rms = continuity_rms(&rho_new, &rho_old, &self.current, dt, &self.grid);
        self.last_energy_before_step = energy_old;
        Ok(())
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> SimConfig {
        SimConfig {
            particles_per_cell: 20,
            ..SimConfig::default()
        }
    }

    #[test]
    fn zero_density_gives_zero_field() {
        let g = Grid::new(16, 1.0).unwrap();
        assert!(field_solve(&[0.0; 16], &g).unwrap().iter().all(|&e| e == 0.0));
    }

    #[test]
    fn cosine_density_integrates_to_sine() {
        let g = Grid::new(64, 2.0 * std::f64::consts::PI).unwrap();
        let k = 2.0 * std::f64::consts::PI / g.length;
        let rho: Vec<f64> = (0..64).map(|i| (k * g.node_position(i)).cos()).collect();
        let e = field_solve(&rho, &g).unwrap();
        for (c, ec) in e.iter().enumerate() {
            let xf = (c as f64 + 0.5) * g.dx;
            let exact = (k * xf).sin() / k;
            assert!((ec - exact).abs() < 2.0 * g.dx * g.dx, "{c}: {ec} vs {exact}");
        }
        assert!(gauss_rms(&e, &rho, &g) < 1e-13);
    }

    #[test]
    fn non_neutral_density_is_rejected() {
        let g = Grid::new(8, 1.0).unwrap();
        assert!(matches!(field_solve(&[1.0; 8], &g), Err(Error::NonNeutral { .. })));
    }

    #[test]
    fn free_orbit_crosses_faces() {
        let e = vec![0.0; 32];
        let mut cells = Vec::new();
        let mut total = 0.0;
        let (xi, u) = push_orbit(30.5, 15.0, -1.0, 0.2, &e, |c, s| {
            cells.push(c);
            total += s;
        });
        assert_eq!(cells, vec![30, 31, 0, 1]);
        assert!((total - 3.0).abs() < 1e-14 && (xi - 33.5).abs() < 1e-14);
        assert_eq!(u, 15.0);
    }

    #[test]
    fn orbit_energy_matches_field_work() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let e: Vec<f64> = (0..16).map(|_| rng.random_range(-2.0..2.0)).collect();
        for _ in 0..500 {
            let xi0 = rng.random_range(0.0..16.0);
            let u0 = rng.random_range(-3.0..3.0);
            let accel = -1.0;
            let mut work = 0.0;
            let (_, u1) = push_orbit(xi0, u0, accel, 0.7, &e, |c, s| work += accel * e[c] * s);
            assert!((0.5 * (u1 * u1 - u0 * u0) - work).abs() < 1e-12 * (1.0 + u0 * u0));
        }
    }

    #[test]
    fn orbit_turns_around_in_a_cell() {
        // decelerated from the right face, turns and leaves through it again
        let e = vec![0.0, 1.0, 0.0, 0.0];
        let mut segs = Vec::new();
        let (xi, u) = push_orbit(1.9, -0.5, 1.0, 2.0, &e, |c, s| segs.push((c, s)));
        assert_eq!(segs[0].0, 1);
        assert!((segs[0].1 - 0.1).abs() < 1e-15);
        let t_back = 0.5 + 0.45f64.sqrt();
        assert!((u - 0.45f64.sqrt()).abs() < 1e-15);
        assert!((xi - (2.0 + u * (2.0 - t_back))).abs() < 1e-14);
    }

    #[test]
    fn initial_state_is_symmetric_and_neutral() {
        let sim = init_two_stream(&small_cfg()).unwrap();
        assert_eq!(sim.particle_count(), 20 * 32);
        assert!(sim.momentum().abs() < 1e-13);
        assert!(sim.gauss_rms().unwrap() < 1e-13);
        let w: f64 = sim.species[0].particles.iter().map(|p| p.weight).sum();
        assert!((w - sim.grid.length).abs() < 1e-12);
    }

    #[test]
    fn odd_particle_count_rounds_down() {
        let sim = init_two_stream(&SimConfig {
            particles_per_cell: 7,
            ..small_cfg()
        })
        .unwrap();
        assert_eq!(sim.particle_count(), 6 * 32);
    }

    #[test]
    fn free_streaming_without_field() {
        let cfg = SimConfig {
            nx: 8,
            length: 1.0,
            ..small_cfg()
        };
        let grid = cfg.grid().unwrap();
        // one uniform beam: density stays uniform, so E stays zero
        let ps: Vec<Particle> = (0..64)
            .map(|i| Particle::new_1d((i as f64 + 0.5) / 64.0, 0.3, 1.0 / 64.0, 0))
            .collect();
        let sp = Species {
            charge: -1.0,
            mass: 1.0,
            particles: ps.clone(),
        };
        let mut sim = Simulation::new(cfg.clone(), grid, vec![sp], None).unwrap();
        let e0 = sim.total_energy();
        sim.step().unwrap();
        for (a, b) in ps.iter().zip(&sim.species[0].particles) {
            assert!((grid.wrap(a.x + 0.3 * cfg.dt) - b.x).abs() < 1e-15);
            assert_eq!(b.v[0], 0.3);
        }
        assert_eq!(sim.total_energy(), e0);
    }

    #[test]
    fn stationary_plasma_stays_quiet() {
        let mut sim = init_two_stream(&SimConfig {
            beam_speed: 0.0,
            jitter: 0.0,
            perturbation: 0.0,
            ..small_cfg()
        })
        .unwrap();
        for _ in 0..20 {
            sim.step().unwrap();
        }
        assert!(sim.efield.iter().all(|e| e.abs() < 1e-13));
    }

    #[test]
    fn step_conserves_charge_and_energy() {
        let mut sim = init_two_stream(&small_cfg()).unwrap();
        for _ in 0..30 {
            let e0 = sim.total_energy();
            sim.step().unwrap();
            let row = sim.diagnostics(diagnostics::Event::Step).unwrap();
            assert!(row.continuity_rms < 1e-13, "{}", row.continuity_rms);
            assert!(row.gauss_rms < 1e-12, "{}", row.gauss_rms);
            assert!((sim.total_energy() - e0).abs() < 1e-8 * e0);
        }
    }

    #[test]
    fn picard_failure_reports_trace() {
        let mut sim = init_two_stream(&SimConfig {
            picard_max_iters: 1,
            perturbation: 0.1,
            ..small_cfg()
        })
        .unwrap();
        match sim.step() {
            Err(Error::StepFailure { iterations, trace }) => {
                assert_eq!(iterations, 1);
                assert_eq!(trace.len(), 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let run = || {
            let mut s = init_two_stream(&small_cfg()).unwrap();
            for _ in 0..5 {
                s.step().unwrap();
            }
            s.efield
        };
        assert_eq!(run(), run());
    }
}
