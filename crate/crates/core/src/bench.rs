//! Unit cost of mixture fitting against the particle push on the same data.

use std::time::Instant;

use crate::codec::{bin_by_cell, compress_species};
use crate::em::FitConfig;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::particle::Particle;
use crate::pic::{SimConfig, Simulation, Species};
use crate::pipeline::SpeciesParams;

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub particles: usize,
    /// Cells that were fitted (not stored raw).
    pub fitted_cells: usize,
    /// EM sweeps summed over fitted cells.
    pub em_sweeps: usize,
    /// Particle-sweeps: Σ over fitted cells of particles × sweeps.
    pub em_particle_sweeps: f64,
    pub em_seconds: f64,
    pub push_steps: usize,
    /// Particle pushes: particles × Picard iterations, summed over steps.
    pub pushes: f64,
    pub push_seconds: f64,
}

impl CostReport {
    pub fn us_per_particle_sweep(&self) -> f64 {
        1e6 * self.em_seconds / self.em_particle_sweeps
    }

    pub fn us_per_particle_push(&self) -> f64 {
        1e6 * self.push_seconds / self.pushes
    }

    /// EM unit cost over push unit cost.
    pub fn ratio(&self) -> f64 {
        self.us_per_particle_sweep() / self.us_per_particle_push()
    }

    pub fn sweeps_per_cell(&self) -> f64 {
        self.em_sweeps as f64 / self.fitted_cells.max(1) as f64
    }
}

impl std::fmt::Display for CostReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "particles              {}", self.particles)?;
        writeln!(f, "fitted cells           {}", self.fitted_cells)?;
        writeln!(f, "EM sweeps per cell     {:.1}", self.sweeps_per_cell())?;
        writeln!(f, "EM   us/particle/sweep {:.4}", self.us_per_particle_sweep())?;
        writeln!(
            f,
            "push us/particle/push  {:.4}  ({} steps, {:.1} pushes per step)",
            self.us_per_particle_push(),
            self.push_steps,
            self.pushes / (self.particles as f64 * self.push_steps as f64)
        )?;
        write!(f, "ratio EM/push          {:.3}", self.ratio())
    }
}

/// Times a full compression of `particles` and `push_steps` implicit steps
/// started from the same particles, both on a single worker thread.
pub fn measure_costs(
    particles: &[Particle],
    cfg: &SimConfig,
    params: SpeciesParams,
    push_steps: usize,
) -> Result<CostReport> {
    if particles.is_empty() {
        return Err(Error::InvalidSample("no particles to benchmark".into()));
    }
    if push_steps == 0 {
        return Err(Error::InvalidConfig("push_steps must be at least 1".into()));
    }
    cfg.validate()?;
    let grid = cfg.grid()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| measure_serial(particles, cfg, grid, params, push_steps))
}

fn measure_serial(
    particles: &[Particle],
    cfg: &SimConfig,
    grid: Grid,
    params: SpeciesParams,
    push_steps: usize,
) -> Result<CostReport> {
    let n_species = particles.iter().map(|p| p.species as usize + 1).max().unwrap_or(0);
    let by_species: Vec<Vec<Particle>> = (0..n_species)
        .map(|s| particles.iter().filter(|p| p.species as usize == s).copied().collect())
        .collect();
    let fit = FitConfig {
        seed: cfg.seed,
        ..cfg.fit.clone()
    };

    let (mut fitted_cells, mut em_sweeps, mut em_particle_sweeps) = (0, 0, 0.0);
    let mut em_seconds = 0.0;
    for ps in &by_species {
        let counts: Vec<usize> = bin_by_cell(ps, &grid)?.iter().map(Vec::len).collect();
        let t = Instant::now();
        let (_, reports) = compress_species(ps, &grid, 1, &fit, cfg.min_particles)?;
        em_seconds += t.elapsed().as_secs_f64();
        for (r, n) in reports.iter().zip(counts) {
            if let Some(r) = r {
                fitted_cells += 1;
                em_sweeps += r.em_iterations;
                em_particle_sweeps += (n * r.em_iterations) as f64;
            }
        }
    }
    if fitted_cells == 0 {
        return Err(Error::InvalidSample(format!(
            "no cell has more than {} particles; nothing to fit",
            cfg.min_particles
        )));
    }

    let species = by_species
        .into_iter()
        .map(|particles| Species {
            charge: params.charge,
            mass: params.mass,
            particles,
        })
        .collect();
    let mut sim = Simulation::new(cfg.clone(), grid, species, None)?;
    let n = sim.particle_count() as f64;
    let mut pushes = 0.0;
    let t = Instant::now();
    for _ in 0..push_steps {
        sim.step()?;
        pushes += n * sim.last_picard_iterations as f64;
    }
    let push_seconds = t.elapsed().as_secs_f64();

    Ok(CostReport {
        particles: particles.len(),
        fitted_cells,
        em_sweeps,
        em_particle_sweeps,
        em_seconds,
        push_steps,
        pushes,
        push_seconds,
    })
}
