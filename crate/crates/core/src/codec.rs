//! Per-cell particle compression and reconstruction.
//!
//! A cell with more than `min_particles` particles is replaced by the Gaussian
//! mixture of its velocity distribution; smaller cells are stored verbatim.
//! Reconstruction draws the original number of particles from the mixture,
//! places them uniformly inside the cell, and applies the Lemons moment
//! correction so the cell's momentum and energy come back exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::em::{self, FitConfig, FitReport, WeightedSampleSet};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg;
use crate::mixture::{GaussianComponent, GaussianMixture, MAX_DIM};
use crate::particle::{velocities_and_weights, Particle};

/// Default threshold: cells need more than this many particles to be modeled.
pub const DEFAULT_MIN_PARTICLES: usize = 10;

/// How many times a degenerate velocity draw is retried before giving up.
const MAX_REDRAWS: usize = 8;

/// A Gaussian as checkpointed: absolute mass instead of a normalized weight.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredGaussian {
    pub mass: f64,
    pub mean: Vec<f64>,
    /// Full symmetric `d * d`; only the upper triangle is serialized.
    pub covariance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellPayload {
    Raw(Vec<Particle>),
    Mixture(Vec<StoredGaussian>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellMode {
    Raw,
    Mixture,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub cell_index: usize,
    pub dim: usize,
    pub particle_count: u64,
    pub payload: CellPayload,
}

impl CellRecord {
    pub fn raw(cell_index: usize, dim: usize, particles: Vec<Particle>) -> Self {
        Self {
            cell_index,
            dim,
            particle_count: particles.len() as u64,
            payload: CellPayload::Raw(particles),
        }
    }

    pub fn mode(&self) -> CellMode {
        match self.payload {
            CellPayload::Raw(_) => CellMode::Raw,
            CellPayload::Mixture(_) => CellMode::Mixture,
        }
    }

    /// Number of stored Gaussians; zero for raw cells.
    pub fn gaussian_count(&self) -> usize {
        match &self.payload {
            CellPayload::Raw(_) => 0,
            CellPayload::Mixture(g) => g.len(),
        }
    }

    pub fn total_weight(&self) -> f64 {
        match &self.payload {
            CellPayload::Raw(ps) => ps.iter().map(|p| p.weight).sum(),
            CellPayload::Mixture(g) => g.iter().map(|g| g.mass).sum(),
        }
    }

    /// The normalized velocity mixture of a GM-mode cell.
    pub fn mixture(&self) -> Result<Option<GaussianMixture>> {
        let CellPayload::Mixture(gs) = &self.payload else {
            return Ok(None);
        };
        let comps = gs
            .iter()
            .map(|g| GaussianComponent::new(g.mass, g.mean.clone(), g.covariance.clone()))
            .collect::<Result<Vec<_>>>()?;
        GaussianMixture::from_unnormalized(comps).map(Some)
    }

    /// Extensive momentum and second-moment targets stored in the record.
    pub fn moment_target(&self) -> MomentTarget {
        let d = self.dim;
        let mut momentum = vec![0.0; d];
        let mut second = vec![0.0; d * d];
        match &self.payload {
            CellPayload::Raw(ps) => {
                for p in ps {
                    for i in 0..d {
                        momentum[i] += p.weight * p.v[i];
                        for j in 0..d {
                            second[i * d + j] += p.weight * p.v[i] * p.v[j];
                        }
                    }
                }
            }
            CellPayload::Mixture(gs) => {
                for g in gs {
                    for i in 0..d {
                        momentum[i] += g.mass * g.mean[i];
                        for j in 0..d {
                            second[i * d + j] +=
                                g.mass * (g.covariance[i * d + j] + g.mean[i] * g.mean[j]);
                        }
                    }
                }
            }
        }
        MomentTarget::with_matrix(momentum, second)
    }
}

/// Extensive moment targets for the Lemons correction.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTarget {
    /// `Σ α v`.
    pub momentum: Vec<f64>,
    pub second: SecondMoment,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SecondMoment {
    /// `Σ α |v|²`; matched with a scalar velocity scaling.
    Energy(f64),
    /// `Σ α v vᵀ`, row-major; matched with a full affine map.
    Matrix(Vec<f64>),
}

impl MomentTarget {
    pub fn with_energy(momentum: Vec<f64>, energy: f64) -> Self {
        Self {
            momentum,
            second: SecondMoment::Energy(energy),
        }
    }

    pub fn with_matrix(momentum: Vec<f64>, second: Vec<f64>) -> Self {
        Self {
            momentum,
            second: SecondMoment::Matrix(second),
        }
    }

    pub fn energy(&self) -> f64 {
        match &self.second {
            SecondMoment::Energy(e) => *e,
            SecondMoment::Matrix(m) => linalg::trace(m, self.momentum.len()),
        }
    }

    /// Reduces a matrix target to the scalar (momentum + energy) form.
    pub fn scalar(&self) -> Self {
        Self::with_energy(self.momentum.clone(), self.energy())
    }

    /// Same mean velocity and energy per unit weight, for a different total weight.
    pub fn rescaled(&self, factor: f64) -> Self {
        Self {
            momentum: self.momentum.iter().map(|p| p * factor).collect(),
            second: match &self.second {
                SecondMoment::Energy(e) => SecondMoment::Energy(e * factor),
                SecondMoment::Matrix(m) => SecondMoment::Matrix(m.iter().map(|x| x * factor).collect()),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LemonsMode {
    /// Shift and isotropic scale: exact momentum and total energy.
    #[default]
    Scalar,
    /// Shift and Cholesky map: exact momentum and full second-moment matrix.
    Covariance,
}

impl MomentTarget {
    pub fn for_mode(&self, mode: LemonsMode) -> Self {
        match mode {
            LemonsMode::Scalar => self.scalar(),
            LemonsMode::Covariance => self.clone(),
        }
    }
}

/// Affine velocity correction `v ← μ_t + A (v − v̄)` matching `target`
/// exactly with the given weights. Weights are not modified.
///
/// `velocities` is row-major `N * dim`.
pub fn lemons_correct(
    velocities: &mut [f64],
    dim: usize,
    weights: &[f64],
    target: &MomentTarget,
) -> Result<()> {
    let d = dim;
    if velocities.len() != weights.len() * d || target.momentum.len() != d {
        return Err(Error::DimensionMismatch {
            expected: weights.len() * d,
            found: velocities.len(),
        });
    }
    let w: f64 = weights.iter().sum();
    if !(w > 0.0) {
        return Err(Error::InvalidSample("total weight must be positive".into()));
    }
    let mut mean = [0.0; MAX_DIM];
    for (v, &a) in velocities.chunks(d).zip(weights) {
        for i in 0..d {
            mean[i] += a * v[i];
        }
    }
    for m in mean.iter_mut().take(d) {
        *m /= w;
    }
    let target_mean: Vec<f64> = target.momentum.iter().map(|p| p / w).collect();

    let mut cov = vec![0.0; d * d];
    for (v, &a) in velocities.chunks(d).zip(weights) {
        for i in 0..d {
            for j in i..d {
                cov[i * d + j] += a * (v[i] - mean[i]) * (v[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i * d + j] /= w;
            cov[j * d + i] = cov[i * d + j];
        }
    }

    // A as a row-major matrix
    let map: Vec<f64> = match &target.second {
        SecondMoment::Energy(energy) => {
            let mean_sq: f64 = target_mean.iter().map(|m| m * m).sum();
            let target_var = energy / w - mean_sq;
            let sample_var = linalg::trace(&cov, d);
            let slack = 1e-13 * (energy / w).abs();
            if target_var < -slack {
                return Err(Error::InfeasibleTarget(format!(
                    "energy {energy:e} is below the kinetic energy of the target mean"
                )));
            }
            let target_var = target_var.max(0.0);
            let scale = if sample_var > 0.0 {
                (target_var / sample_var).sqrt()
            } else if target_var <= slack {
                0.0
            } else {
                return Err(Error::DegenerateSample);
            };
            let mut a = vec![0.0; d * d];
            for i in 0..d {
                a[i * d + i] = scale;
            }
            a
        }
        SecondMoment::Matrix(second) => {
            let mut target_cov = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    target_cov[i * d + j] = second[i * d + j] / w - target_mean[i] * target_mean[j];
                }
            }
            for i in 0..d {
                for j in 0..i {
                    let s = 0.5 * (target_cov[i * d + j] + target_cov[j * d + i]);
                    target_cov[i * d + j] = s;
                    target_cov[j * d + i] = s;
                }
            }
            let lt = linalg::cholesky(&target_cov, d)
                .map_err(|_| Error::InfeasibleTarget("target covariance is not positive definite".into()))?;
            let ls = linalg::cholesky(&cov, d).map_err(|_| Error::DegenerateSample)?;
            // A = L_t L_s⁻¹, column by column
            let mut a = vec![0.0; d * d];
            let mut e = [0.0; MAX_DIM];
            let mut col = [0.0; MAX_DIM];
            let mut out = [0.0; MAX_DIM];
            for c in 0..d {
                e[..d].iter_mut().for_each(|x| *x = 0.0);
                e[c] = 1.0;
                linalg::lower_solve(&ls, d, &e[..d], &mut col[..d]);
                linalg::lower_mul(&lt, d, &col[..d], &mut out[..d]);
                for r in 0..d {
                    a[r * d + c] = out[r];
                }
            }
            a
        }
    };

    let mut diff = [0.0; MAX_DIM];
    for v in velocities.chunks_mut(d) {
        for i in 0..d {
            diff[i] = v[i] - mean[i];
        }
        for i in 0..d {
            v[i] = target_mean[i] + (0..d).map(|k| map[i * d + k] * diff[k]).sum::<f64>();
        }
    }
    Ok(())
}

/// Compresses one cell. `particles` must all lie inside the cell.
pub fn compress_cell(
    particles: &[Particle],
    cell_index: usize,
    dim: usize,
    fit: &FitConfig,
    min_particles: usize,
) -> Result<(CellRecord, Option<FitReport>)> {
    if particles.len() <= min_particles {
        return Ok((CellRecord::raw(cell_index, dim, particles.to_vec()), None));
    }
    let (v, w) = velocities_and_weights(particles, dim);
    let samples = WeightedSampleSet::new(dim, v, w)?;
    let cfg = FitConfig {
        seed: em::derive_seed(fit.seed, cell_index as u64),
        ..fit.clone()
    };
    let (mixture, report) = match em::fit_adaptive(&samples, &cfg) {
        Ok(r) => r,
        Err(Error::TooFewSamples { .. }) => {
            return Ok((CellRecord::raw(cell_index, dim, particles.to_vec()), None));
        }
        Err(e) => return Err(e),
    };
    let total = samples.total_weight();
    let stored = mixture
        .into_components()
        .into_iter()
        .map(|c| StoredGaussian {
            mass: c.weight * total,
            mean: c.mean,
            covariance: c.covariance,
        })
        .collect();
    Ok((
        CellRecord {
            cell_index,
            dim,
            particle_count: particles.len() as u64,
            payload: CellPayload::Mixture(stored),
        },
        Some(report),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecompressOptions {
    /// `None` skips the moment correction (raw Monte Carlo velocities).
    pub lemons: Option<LemonsMode>,
}

impl Default for DecompressOptions {
    fn default() -> Self {
        Self {
            lemons: Some(LemonsMode::Scalar),
        }
    }
}

/// Reconstructs the particles of one cell on `[lo, hi)`.
pub fn decompress_cell<R: Rng + ?Sized>(
    record: &CellRecord,
    bounds: (f64, f64),
    species: u16,
    opts: DecompressOptions,
    rng: &mut R,
) -> Result<Vec<Particle>> {
    let gaussians = match &record.payload {
        CellPayload::Raw(ps) => return Ok(ps.clone()),
        CellPayload::Mixture(g) => g,
    };
    let d = record.dim;
    let n = record.particle_count as usize;
    let mixture = record
        .mixture()?
        .expect("mixture payload");
    let total: f64 = gaussians.iter().map(|g| g.mass).sum();
    let weight = total / n as f64;
    let weights = vec![weight; n];
    let target = record.moment_target();

    let mut velocities = mixture.sample_flat(n, rng)?;
    if let Some(mode) = opts.lemons {
        let target = target.for_mode(mode);
        let mut attempts = 0;
        loop {
            match lemons_correct(&mut velocities, d, &weights, &target) {
                Ok(()) => break,
                Err(Error::DegenerateSample) if attempts < MAX_REDRAWS => {
                    attempts += 1;
                    velocities = mixture.sample_flat(n, rng)?;
                }
                Err(e) => return Err(e),
            }
        }
    }

    let (lo, hi) = bounds;
    Ok(velocities
        .chunks(d)
        .map(|v| {
            let mut x = lo + (hi - lo) * rng.random::<f64>();
            if x >= hi {
                x = lo;
            }
            let mut vel = [0.0; MAX_DIM];
            vel[..d].copy_from_slice(v);
            Particle {
                x,
                v: vel,
                weight,
                species,
            }
        })
        .collect())
}

/// Bins particles by cell. Particles must lie in `[0, L)`.
pub fn bin_by_cell(particles: &[Particle], grid: &Grid) -> Result<Vec<Vec<Particle>>> {
    let mut cells = vec![Vec::new(); grid.nx];
    for (i, p) in particles.iter().enumerate() {
        if !grid.contains(p.x) {
            return Err(Error::InvalidParticle { index: i, x: p.x });
        }
        cells[grid.cell_of(p.x)].push(*p);
    }
    Ok(cells)
}

/// Compresses every cell of one species, in parallel over cells.
pub fn compress_species(
    particles: &[Particle],
    grid: &Grid,
    dim: usize,
    fit: &FitConfig,
    min_particles: usize,
) -> Result<(Vec<CellRecord>, Vec<Option<FitReport>>)> {
    fit.validate()?;
    let cells = bin_by_cell(particles, grid)?;
    let out = cells
        .par_iter()
        .enumerate()
        .map(|(c, ps)| compress_cell(ps, c, dim, fit, min_particles))
        .collect::<Result<Vec<_>>>()?;
    Ok(out.into_iter().unzip())
}

/// Reconstructs every cell of one species with per-cell derived seeds.
pub fn decompress_species(
    records: &[CellRecord],
    grid: &Grid,
    species: u16,
    opts: DecompressOptions,
    seed: u64,
) -> Result<Vec<Particle>> {
    let parts = records
        .par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(em::derive_seed(seed, r.cell_index as u64));
            decompress_cell(r, grid.cell_bounds(r.cell_index), species, opts, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.concat())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weighted_sums(ps: &[Particle], d: usize) -> (f64, Vec<f64>, f64) {
        let mass = ps.iter().map(|p| p.weight).sum();
        let mom = (0..d).map(|i| ps.iter().map(|p| p.weight * p.v[i]).sum()).collect();
        let energy = ps.iter().map(|p| p.weight * p.speed_sq(d)).sum();
        (mass, mom, energy)
    }

    fn two_beam_cell(n: usize, rng: &mut ChaCha8Rng) -> Vec<Particle> {
        (0..n)
            .map(|i| {
                let v = if i % 2 == 0 { 0.866 } else { -0.866 } + 1e-3 * (rng.random::<f64>() - 0.5);
                Particle::new_1d(0.1 + 0.05 * rng.random::<f64>(), v, 1.26e-3, 0)
            })
            .collect()
    }

    #[test]
    fn small_cell_is_stored_raw() {
        let ps: Vec<Particle> = (0..5).map(|i| Particle::new_1d(0.1 * i as f64, i as f64, 0.5, 0)).collect();
        let (rec, rep) = compress_cell(&ps, 3, 1, &FitConfig::default(), 10).unwrap();
        assert_eq!(rec.mode(), CellMode::Raw);
        assert!(rep.is_none());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let back = decompress_cell(&rec, (0.0, 1.0), 0, DecompressOptions::default(), &mut rng).unwrap();
        assert_eq!(back, ps);
    }

    #[test]
    fn empty_cell_is_raw_with_zero_count() {
        let (rec, _) = compress_cell(&[], 0, 1, &FitConfig::default(), 10).unwrap();
        assert_eq!(rec.mode(), CellMode::Raw);
        assert_eq!(rec.particle_count, 0);
    }

    #[test]
    fn two_beam_cell_conserves_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ps = two_beam_cell(156, &mut rng);
        let (rec, rep) = compress_cell(&ps, 0, 1, &FitConfig::default(), 10).unwrap();
        assert_eq!(rec.mode(), CellMode::Mixture);
        assert!(rep.unwrap().final_k >= 2);
        let (mass, mom, energy) = weighted_sums(&ps, 1);
        let t = rec.moment_target();
        let scale = (mass * energy).sqrt();
        assert!((rec.total_weight() - mass).abs() < 1e-12 * mass);
        assert!((t.momentum[0] - mom[0]).abs() < 1e-12 * scale);
        assert!((t.energy() - energy).abs() < 1e-12 * energy);

        let back = decompress_cell(&rec, (0.1, 0.15), 0, DecompressOptions::default(), &mut rng).unwrap();
        assert_eq!(back.len(), 156);
        let (m2, p2, e2) = weighted_sums(&back, 1);
        assert!((m2 - mass).abs() < 1e-12 * mass);
        assert!((p2[0] - mom[0]).abs() < 1e-12 * scale);
        assert!((e2 - energy).abs() < 1e-12 * energy);
        assert!(back.iter().all(|p| (0.1..0.15).contains(&p.x)));
    }

    #[test]
    fn lemons_identity_when_on_target() {
        let mut v = vec![-1.3, 0.2, 2.5, 0.7];
        let w = vec![1.0, 2.0, 0.5, 1.5];
        let p: f64 = v.iter().zip(&w).map(|(v, w)| v * w).sum();
        let e: f64 = v.iter().zip(&w).map(|(v, w)| v * v * w).sum();
        let before = v.clone();
        lemons_correct(&mut v, 1, &w, &MomentTarget::with_energy(vec![p], e)).unwrap();
        for (a, b) in v.iter().zip(&before) {
            assert!((a - b).abs() <= 1e-15 * 4.0, "{a} vs {b}");
        }
    }

    #[test]
    fn lemons_scales_and_shifts() {
        let w = vec![1.0, 1.0];
        let mut v = vec![-1.0, 1.0];
        lemons_correct(&mut v, 1, &w, &MomentTarget::with_energy(vec![0.0], 8.0)).unwrap();
        assert_eq!(v, vec![-2.0, 2.0]);

        let mut v = vec![-1.0, 1.0];
        // mean 1, variance 1 → Σv = 2, Σv² = 2·(1 + 1)
        lemons_correct(&mut v, 1, &w, &MomentTarget::with_energy(vec![2.0], 4.0)).unwrap();
        assert_eq!(v, vec![0.0, 2.0]);
    }

    #[test]
    fn lemons_degenerate_and_infeasible() {
        let w = vec![1.0, 1.0];
        let mut v = vec![0.5, 0.5];
        assert!(matches!(
            lemons_correct(&mut v, 1, &w, &MomentTarget::with_energy(vec![1.0], 4.0)),
            Err(Error::DegenerateSample)
        ));
        let mut v = vec![-1.0, 1.0];
        assert!(matches!(
            lemons_correct(&mut v, 1, &w, &MomentTarget::with_energy(vec![4.0], 1.0)),
            Err(Error::InfeasibleTarget(_))
        ));
        // zero variance to zero variance is a pure shift
        let mut v = vec![0.5, 0.5];
        lemons_correct(&mut v, 1, &w, &MomentTarget::with_energy(vec![2.0], 2.0)).unwrap();
        assert_eq!(v, vec![1.0, 1.0]);
    }

    #[test]
    fn lemons_full_covariance_matches_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 50;
        let mut v: Vec<f64> = (0..2 * n).map(|_| rng.random::<f64>() - 0.5).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
        let target = MomentTarget::with_matrix(vec![3.0, -1.0], vec![40.0, 5.0, 5.0, 30.0]);
        lemons_correct(&mut v, 2, &w, &target).unwrap();
        let mut p = [0.0; 2];
        let mut s = [0.0; 4];
        for (row, &a) in v.chunks(2).zip(&w) {
            for i in 0..2 {
                p[i] += a * row[i];
                for j in 0..2 {
                    s[i * 2 + j] += a * row[i] * row[j];
                }
            }
        }
        assert!((p[0] - 3.0).abs() < 1e-12 && (p[1] + 1.0).abs() < 1e-12);
        for (a, b) in s.iter().zip([40.0, 5.0, 5.0, 30.0]) {
            assert!((a - b).abs() < 1e-12 * 40.0, "{s:?}");
        }
    }

    #[test]
    fn positions_are_uniform_in_cell() {
        // two-sided KS test against U(lo, hi) at α = 0.01
        let rec = CellRecord {
            cell_index: 0,
            dim: 1,
            particle_count: 10_000,
            payload: CellPayload::Mixture(vec![StoredGaussian {
                mass: 1.0,
                mean: vec![0.0],
                covariance: vec![1.0],
            }]),
        };
        let (lo, hi) = (2.0, 2.5);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let ps = decompress_cell(&rec, (lo, hi), 0, DecompressOptions::default(), &mut rng).unwrap();
        let mut xs: Vec<f64> = ps.iter().map(|p| (p.x - lo) / (hi - lo)).collect();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
            .fold(0.0, f64::max);
        assert!(ks < 1.628 / n.sqrt(), "KS statistic {ks}");
        assert!(ps.iter().all(|p| (lo..hi).contains(&p.x)));
    }

    #[test]
    fn decompress_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ps = two_beam_cell(100, &mut rng);
        let (rec, _) = compress_cell(&ps, 0, 1, &FitConfig::default(), 10).unwrap();
        let a = decompress_cell(&rec, (0.0, 1.0), 0, DecompressOptions::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = decompress_cell(&rec, (0.0, 1.0), 0, DecompressOptions::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn species_round_trip_keeps_counts() {
        let grid = Grid::new(4, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ps: Vec<Particle> = (0..200)
            .map(|_| Particle::new_1d(rng.random::<f64>(), rng.random::<f64>() - 0.5, 0.01, 0))
            .collect();
        let (recs, reps) = compress_species(&ps, &grid, 1, &FitConfig::default(), 10).unwrap();
        assert_eq!(recs.len(), 4);
        assert_eq!(reps.len(), 4);
        let back = decompress_species(&recs, &grid, 0, DecompressOptions::default(), 3).unwrap();
        assert_eq!(back.len(), 200);
        for r in &recs {
            let (lo, hi) = grid.cell_bounds(r.cell_index);
            let n = back.iter().filter(|p| (lo..hi).contains(&p.x)).count();
            assert_eq!(n as u64, r.particle_count);
        }
    }
}
