//! Helpers shared by the integration tests.
#![allow(dead_code)]

use gmcr::checkpoint::{CheckpointFile, CheckpointHeader, SpeciesRecord};
use gmcr::codec::{CellPayload, CellRecord, StoredGaussian};
use gmcr::em::FitConfig;
use gmcr::{Grid, Particle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Mass, momentum and raw second moment matrix (row-major).
pub type Moments = (f64, Vec<f64>, Vec<f64>);

/// Weighted sums computed directly: mass, momentum and raw second moment
/// matrix (row-major).
pub fn sums(v: &[f64], w: &[f64], d: usize) -> Moments {
    let mut mass = 0.0;
    let mut p = vec![0.0; d];
    let mut s = vec![0.0; d * d];
    for (row, &a) in v.chunks(d).zip(w) {
        mass += a;
        for i in 0..d {
            p[i] += a * row[i];
            for j in 0..d {
                s[i * d + j] += a * row[i] * row[j];
            }
        }
    }
    (mass, p, s)
}

pub fn clustered(rng: &mut ChaCha8Rng, d: usize, n: usize, k: usize) -> (Vec<f64>, Vec<f64>) {
    let centers: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
    let sigma: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let mut v = Vec::with_capacity(n * d);
    for i in 0..n {
        let c = i % k;
        let nd = Normal::new(0.0, sigma[c]).unwrap();
        for x in &centers[c] {
            v.push(x + nd.sample(rng));
        }
    }
    let w = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
    (v, w)
}

/// Worst deviation between two `sums` results: mass relative to the mass,
/// momentum relative to `sqrt(mass · trace)`, second moments relative to the
/// trace.
pub fn moment_error(a: &Moments, b: &Moments) -> f64 {
    let d = a.1.len();
    let trace: f64 = (0..d).map(|i| a.2[i * d + i]).sum();
    let pscale = (a.0 * trace).sqrt();
    let mut worst = (a.0 - b.0).abs() / a.0;
    for i in 0..d {
        worst = worst.max((a.1[i] - b.1[i]).abs() / pscale);
    }
    for i in 0..d * d {
        worst = worst.max((a.2[i] - b.2[i]).abs() / trace);
    }
    worst
}

pub fn symmetric(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let mut c = vec![0.0; d * d];
    for i in 0..d {
        for j in i..d {
            let x = if i == j { rng.random_range(0.5..1.0) } else { rng.random_range(-0.1..0.1) };
            c[i * d + j] = x;
            c[j * d + i] = x;
        }
    }
    c
}

/// Random multi-species checkpoint with raw and mixture cells in 1 to 3
/// velocity dimensions.
pub fn random_checkpoint(seed: u64) -> CheckpointFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = rng.random_range(2..20);
    let grid = Grid::new(nx, rng.random_range(0.1..100.0)).unwrap();
    let n_species = rng.random_range(0..4);
    let species = (0..n_species)
        .map(|s| {
            let d = rng.random_range(1..=3);
            let cells = (0..nx)
                .map(|c| {
                    let (lo, hi) = grid.cell_bounds(c);
                    if rng.random::<f64>() < 0.3 {
                        let n = rng.random_range(0..10);
                        let ps = (0..n)
                            .map(|_| {
                                let mut p = Particle::new_1d(rng.random_range(lo..hi), 0.0, rng.random_range(0.1..1.0), s);
                                for j in 0..d {
                                    p.v[j] = rng.random_range(-5.0..5.0);
                                }
                                p
                            })
                            .collect();
                        CellRecord::raw(c, d, ps)
                    } else {
                        let k = rng.random_range(1..=8);
                        let gs = (0..k)
                            .map(|_| StoredGaussian {
                                mass: rng.random_range(0.01..3.0),
                                mean: (0..d).map(|_| rng.random_range(-2.0..2.0)).collect(),
                                covariance: symmetric(&mut rng, d),
                            })
                            .collect();
                        CellRecord {
                            cell_index: c,
                            dim: d,
                            particle_count: rng.random_range(11..1000),
                            payload: CellPayload::Mixture(gs),
                        }
                    }
                })
                .collect();
            SpeciesRecord {
                charge: rng.random_range(-2.0..2.0),
                mass: rng.random_range(0.1..2000.0),
                dim: d,
                rho_target: (0..nx).map(|_| rng.random_range(-1.0..1.0)).collect(),
                cells,
            }
        })
        .collect();
    let seed: u64 = rng.random();
    CheckpointFile {
        header: CheckpointHeader {
            time: rng.random_range(0.0..100.0),
            step: rng.random(),
            dt: rng.random_range(0.01..1.0),
            grid,
            periodic: true,
            seed,
            fit: FitConfig {
                k_max: rng.random_range(1..=16),
                tol: 10f64.powi(-rng.random_range(3..10)),
                max_iters: rng.random_range(1..5000),
                annihilate: rng.random(),
                covariance_floor: rng.random_range(0.0..1e-6),
                seed,
            },
            min_particles: rng.random_range(0..50),
        },
        efield: (0..nx).map(|_| rng.random_range(-1.0..1.0)).collect(),
        species,
    }
}
