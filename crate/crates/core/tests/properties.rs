//! Randomized invariants of the compression and restart pipeline.

mod common;

use common::{clustered, moment_error, random_checkpoint, sums};
use gmcr::checkpoint::CheckpointFile;
use gmcr::codec::{compress_cell, decompress_cell, DecompressOptions};
use gmcr::em::{fit_adaptive, FitConfig, WeightedSampleSet};
use gmcr::gauss::{deposit_charge, enforce_gauss, DepositionScheme};
use gmcr::{Grid, Particle};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fit_conserves_moments(seed in any::<u64>(), d in 1usize..=3, n in 20usize..600, k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (v, w) = clustered(&mut rng, d, n, k);
        let s = WeightedSampleSet::new(d, v.clone(), w.clone()).unwrap();
        let (m, _) = fit_adaptive(&s, &FitConfig { seed, ..FitConfig::default() }).unwrap();
        let mo = m.moments();
        let total: f64 = w.iter().sum();
        let fitted = (
            total,
            mo.mean.iter().map(|x| x * total).collect::<Vec<_>>(),
            mo.second_raw().iter().map(|x| x * total).collect::<Vec<_>>(),
        );
        let err = moment_error(&sums(&v, &w, d), &fitted);
        prop_assert!(err <= 1e-12, "{err:e}");
    }

    #[test]
    fn clean_sweeps_never_lower_the_score(seed in any::<u64>(), n in 50usize..400, k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (v, w) = clustered(&mut rng, 1, n, k);
        let s = WeightedSampleSet::new(1, v, w).unwrap();
        let (_, rep) = fit_adaptive(&s, &FitConfig { seed, ..FitConfig::default() }).unwrap();
        for pair in rep.sweeps.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if b.clean && a.k == b.k {
                prop_assert!(b.score >= a.score - 1e-9 * a.score.abs(), "{} -> {}", a.score, b.score);
            }
        }
    }

    #[test]
    fn cell_round_trip_conserves(seed in any::<u64>(), d in 1usize..=3, n in 11usize..400) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (v, _) = clustered(&mut rng, d, n, 2);
        let weight = rng.random_range(1e-4..1.0);
        let ps: Vec<Particle> = v
            .chunks(d)
            .map(|row| {
                let mut p = Particle::new_1d(rng.random_range(0.0..1.0), 0.0, weight, 0);
                p.v[..d].copy_from_slice(row);
                p
            })
            .collect();
        let (rec, _) = compress_cell(&ps, 0, d, &FitConfig::default(), 10).unwrap();
        let back = decompress_cell(&rec, (0.0, 1.0), 0, DecompressOptions::default(), &mut rng).unwrap();
        prop_assert_eq!(back.len(), n);
        let flat = |ps: &[Particle]| -> (Vec<f64>, Vec<f64>) {
            (ps.iter().flat_map(|p| p.v[..d].to_vec()).collect(), ps.iter().map(|p| p.weight).collect())
        };
        let (va, wa) = flat(&ps);
        let (vb, wb) = flat(&back);
        let (a, b) = (sums(&va, &wa, d), sums(&vb, &wb, d));
        let ta: f64 = (0..d).map(|i| a.2[i * d + i]).sum();
        let tb: f64 = (0..d).map(|i| b.2[i * d + i]).sum();
        prop_assert!((a.0 - b.0).abs() <= 1e-12 * a.0);
        for i in 0..d {
            prop_assert!((a.1[i] - b.1[i]).abs() <= 1e-12 * (a.0 * ta).sqrt());
        }
        prop_assert!((ta - tb).abs() <= 1e-12 * ta);
    }

    #[test]
    fn gauss_matches_target(seed in any::<u64>(), nx in 2usize..40, ppc in 3usize..30, quadratic in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = Grid::new(nx, rng.random_range(0.5..10.0)).unwrap();
        let scheme = if quadratic { DepositionScheme::Quadratic } else { DepositionScheme::Linear };
        let charge = if rng.random::<bool>() { -1.0 } else { 2.0 };
        // a lattice keeps every node covered
        let mut ps: Vec<Particle> = (0..nx * ppc)
            .map(|i| {
                let x = (i as f64 + rng.random_range(0.0..1.0)) * grid.length / (nx * ppc) as f64;
                Particle::new_1d(x.min(grid.length * (1.0 - 1e-15)), rng.random_range(-1.0..1.0), rng.random_range(0.5..1.5), 0)
            })
            .collect();
        let perturbed: Vec<Particle> = ps
            .iter()
            .map(|p| Particle { weight: p.weight * rng.random_range(0.8..1.2), ..*p })
            .collect();
        let target = deposit_charge(&perturbed, &grid, scheme, charge).unwrap();
        let before: Vec<(f64, f64)> = ps.iter().map(|p| (p.x, p.v[0])).collect();
        let rep = enforce_gauss(&mut ps, &target, &grid, scheme, charge, 1e-13).unwrap();
        let rho = deposit_charge(&ps, &grid, scheme, charge).unwrap();
        let scale = target.iter().map(|r| r.abs()).fold(0.0, f64::max);
        for (a, b) in rho.iter().zip(&target) {
            prop_assert!((a - b).abs() <= 1e-10 * scale, "{a} vs {b}");
        }
        prop_assert!(rep.max_relative_residual < 1e-10);
        prop_assert!(ps.iter().zip(&before).all(|(p, &(x, v))| p.x == x && p.v[0] == v));
    }

    #[test]
    fn checkpoint_round_trip_is_bit_identical(seed in any::<u64>()) {
        let file = random_checkpoint(seed);
        let bytes = file.encode().unwrap();
        prop_assert_eq!(bytes.len(), file.encoded_len());
        let back = CheckpointFile::decode(&bytes).unwrap();
        prop_assert_eq!(&back, &file);
        prop_assert_eq!(back.encode().unwrap(), bytes);
    }
}

#[test]
fn separated_components_are_recovered() {
    // three unit-variance 1D Gaussians 8σ apart, 500 samples each
    let mut hits = 0;
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
        let mut v = Vec::new();
        for c in [-8.0, 0.0, 8.0] {
            let nd = Normal::new(c, 1.0).unwrap();
            v.extend((0..500).map(|_| nd.sample(&mut rng)));
        }
        let s = WeightedSampleSet::unweighted(1, v).unwrap();
        let (_, rep) = fit_adaptive(&s, &FitConfig { seed: trial, ..FitConfig::default() }).unwrap();
        hits += (rep.final_k == 3) as usize;
    }
    assert!(hits >= 95, "recovered K=3 in {hits} of 100 trials");
}
