//! Gaussian mixtures over velocity space.
//!
//! A [`GaussianMixture`] is a convex combination of [`GaussianComponent`]s in
//! one to three velocity dimensions. Covariances are kept in full symmetric
//! row-major form; the on-disk format stores only the upper triangle.
//!
//! Normal deviates come from [`rand_distr::StandardNormal`] (ziggurat), and
//! all sampling routines take the generator explicitly so a fixed seed gives a
//! bit-identical sequence.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;

/// Largest supported velocity dimension.
pub const MAX_DIM: usize = 3;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

pub(crate) fn check_dim(d: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&d) {
        Ok(())
    } else {
        Err(Error::InvalidMixture(format!(
            "velocity dimension must be 1..={MAX_DIM}, got {d}"
        )))
    }
}

/// Number of free parameters of one `d`-dimensional Gaussian: `d(d+3)/2`.
pub fn params_per_component(d: usize) -> usize {
    d * (d + 3) / 2
}

/// One weighted Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Row-major `d * d`, exactly symmetric.
    pub covariance: Vec<f64>,
}

impl GaussianComponent {
    pub fn new(weight: f64, mean: Vec<f64>, covariance: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        check_dim(d)?;
        if covariance.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: covariance.len(),
            });
        }
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::InvalidMixture(format!("weight {weight} is not a finite nonnegative number")));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidMixture("non-finite mean".into()));
        }
        if !linalg::is_symmetric(&covariance, d) {
            return Err(Error::InvalidCovariance);
        }
        linalg::cholesky(&covariance, d)?;
        Ok(Self {
            weight,
            mean,
            covariance,
        })
    }

    /// Unit-weight component, mostly for tests.
    pub fn standard(d: usize) -> Self {
        let mut covariance = vec![0.0; d * d];
        for i in 0..d {
            covariance[i * d + i] = 1.0;
        }
        Self {
            weight: 1.0,
            mean: vec![0.0; d],
            covariance,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn density(&self) -> Result<ComponentDensity> {
        ComponentDensity::new(&self.mean, &self.covariance)
    }

    /// Normalized density at `v`, ignoring the component weight.
    pub fn pdf(&self, v: &[f64]) -> Result<f64> {
        self.check_point(v)?;
        Ok(self.density()?.log_pdf(v).exp())
    }

    pub fn log_pdf(&self, v: &[f64]) -> Result<f64> {
        self.check_point(v)?;
        Ok(self.density()?.log_pdf(v))
    }

    /// Draws `μ + L z` with `L` the Cholesky factor of the covariance.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let density = self.density()?;
        let mut out = vec![0.0; self.dim()];
        density.sample_into(rng, &mut out);
        Ok(out)
    }

    fn check_point(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(())
    }
}

/// A component with its Cholesky factor and normalizing constant cached.
#[derive(Debug, Clone)]
pub struct ComponentDensity {
    dim: usize,
    mean: [f64; MAX_DIM],
    chol: Vec<f64>,
    log_norm: f64,
}

impl ComponentDensity {
    pub fn new(mean: &[f64], covariance: &[f64]) -> Result<Self> {
        let d = mean.len();
        let chol = linalg::cholesky(covariance, d)?;
        let log_norm = -0.5 * (d as f64 * LN_2PI + linalg::log_det_from_cholesky(&chol, d));
        let mut m = [0.0; MAX_DIM];
        m[..d].copy_from_slice(mean);
        Ok(Self {
            dim: d,
            mean: m,
            chol,
            log_norm,
        })
    }

    #[inline]
    pub fn log_pdf(&self, v: &[f64]) -> f64 {
        let d = self.dim;
        if d == 1 {
            let z = (v[0] - self.mean[0]) / self.chol[0];
            return self.log_norm - 0.5 * z * z;
        }
        let mut diff = [0.0; MAX_DIM];
        for i in 0..d {
            diff[i] = v[i] - self.mean[i];
        }
        self.log_norm - 0.5 * linalg::mahalanobis_sq(&self.chol, d, &diff[..d])
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let d = self.dim;
        let mut z = [0.0; MAX_DIM];
        for zi in z.iter_mut().take(d) {
            *zi = rng.sample(StandardNormal);
        }
        linalg::lower_mul(&self.chol, d, &z[..d], out);
        for (o, m) in out.iter_mut().zip(&self.mean) {
            *o += m;
        }
    }
}

/// First and second moments of a mixture or a weighted sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureMoments {
    pub mass: f64,
    pub mean: Vec<f64>,
    pub covariance: Vec<f64>,
    /// Second raw moment per unit mass: `trace(covariance) + |mean|²`.
    pub energy: f64,
}

impl MixtureMoments {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Raw second-moment matrix per unit mass, `covariance + mean meanᵀ`.
    pub fn second_raw(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = self.covariance.clone();
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] += self.mean[i] * self.mean[j];
            }
        }
        out
    }
}

/// Convex combination of Gaussian components sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<GaussianComponent>,
    dim: usize,
}

impl GaussianMixture {
    /// Tolerance on `|Σ ω_k − 1|`.
    pub const WEIGHT_SUM_TOL: f64 = 1e-12;

    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidMixture("a mixture needs at least one component".into()))?;
        let dim = first.dim();
        check_dim(dim)?;
        for c in &components {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: c.dim(),
                });
            }
            if !(c.weight > 0.0) {
                return Err(Error::InvalidMixture(format!(
                    "component weight {} is not positive",
                    c.weight
                )));
            }
        }
        let sum: f64 = components.iter().map(|c| c.weight).sum();
        if (sum - 1.0).abs() > Self::WEIGHT_SUM_TOL {
            return Err(Error::InvalidMixture(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self { components, dim })
    }

    /// Builds a mixture from unnormalized positive weights.
    pub fn from_unnormalized(mut components: Vec<GaussianComponent>) -> Result<Self> {
        let sum: f64 = components.iter().map(|c| c.weight).sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::InvalidMixture(format!("weight total {sum} is not positive")));
        }
        for c in &mut components {
            c.weight /= sum;
        }
        Self::new(components)
    }

    pub fn single(component: GaussianComponent) -> Result<Self> {
        Self::new(vec![GaussianComponent {
            weight: 1.0,
            ..component
        }])
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn into_components(self) -> Vec<GaussianComponent> {
        self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn densities(&self) -> Result<Vec<ComponentDensity>> {
        self.components.iter().map(GaussianComponent::density).collect()
    }

    pub fn pdf(&self, v: &[f64]) -> Result<f64> {
        Ok(self.log_pdf(v)?.exp())
    }

    /// `ln p(v)` evaluated with log-sum-exp.
    pub fn log_pdf(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        let terms: Vec<f64> = self
            .components
            .iter()
            .zip(self.densities()?)
            .map(|(c, dens)| c.weight.ln() + dens.log_pdf(v))
            .collect();
        Ok(log_sum_exp(&terms))
    }

    /// Mass-normalized mean, covariance and second raw moment.
    pub fn moments(&self) -> MixtureMoments {
        let d = self.dim;
        let mut mean = vec![0.0; d];
        let mut second = vec![0.0; d * d];
        for c in &self.components {
            for i in 0..d {
                mean[i] += c.weight * c.mean[i];
                for j in 0..d {
                    second[i * d + j] += c.weight * (c.covariance[i * d + j] + c.mean[i] * c.mean[j]);
                }
            }
        }
        let mut covariance = second;
        for i in 0..d {
            for j in 0..d {
                covariance[i * d + j] -= mean[i] * mean[j];
            }
        }
        for i in 0..d {
            for j in 0..i {
                let s = 0.5 * (covariance[i * d + j] + covariance[j * d + i]);
                covariance[i * d + j] = s;
                covariance[j * d + i] = s;
            }
        }
        let energy = linalg::trace(&covariance, d) + mean.iter().map(|m| m * m).sum::<f64>();
        MixtureMoments {
            mass: 1.0,
            mean,
            covariance,
            energy,
        }
    }

    /// Draws `n` velocities; each picks a component with probability `ω_k`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        let flat = self.sample_flat(n, rng)?;
        Ok(flat.chunks(self.dim).map(<[f64]>::to_vec).collect())
    }

    /// Same draws as [`sample`](Self::sample), packed row-major `n * d`.
    pub fn sample_flat<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        let densities = self.densities()?;
        let mut cumulative = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for c in &self.components {
            acc += c.weight;
            cumulative.push(acc);
        }
        let d = self.dim;
        let mut out = vec![0.0; n * d];
        for row in out.chunks_mut(d) {
            let u: f64 = rng.random::<f64>() * acc;
            let k = cumulative.partition_point(|&c| c <= u).min(self.len() - 1);
            densities[k].sample_into(rng, row);
        }
        Ok(out)
    }
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn comp1(w: f64, mu: f64, var: f64) -> GaussianComponent {
        GaussianComponent::new(w, vec![mu], vec![var]).unwrap()
    }

    #[test]
    fn standard_normal_values() {
        let c = GaussianComponent::standard(1);
        assert!((c.pdf(&[0.0]).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((c.pdf(&[1.0]).unwrap() - 0.241_970_724_519_143_37).abs() < 1e-15);
        let c2 = GaussianComponent::standard(2);
        assert!((c2.pdf(&[0.0, 0.0]).unwrap() - 0.159_154_943_091_895_34).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_covariance() {
        assert!(matches!(
            GaussianComponent::new(1.0, vec![0.0], vec![-1.0]),
            Err(Error::InvalidCovariance)
        ));
        assert!(matches!(
            GaussianComponent::new(1.0, vec![0.0, 0.0], vec![1.0, 0.5, 0.4, 1.0]),
            Err(Error::InvalidCovariance)
        ));
        assert!(GaussianComponent::new(1.0, vec![0.0; 4], vec![0.0; 16]).is_err());
    }

    #[test]
    fn mixture_pdf_symmetric_pair() {
        let m = GaussianMixture::new(vec![comp1(0.5, -1.0, 1.0), comp1(0.5, 1.0, 1.0)]).unwrap();
        let expected = (-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((m.pdf(&[0.0]).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn single_component_mixture_matches_component() {
        let c = GaussianComponent::new(1.0, vec![0.3, -0.2], vec![2.0, 0.3, 0.3, 0.5]).unwrap();
        let m = GaussianMixture::single(c.clone()).unwrap();
        for v in [[0.0, 0.0], [1.0, -3.0], [0.3, -0.2]] {
            assert!((m.pdf(&v).unwrap() - c.pdf(&v).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn weight_sum_violation_is_rejected() {
        let r = GaussianMixture::new(vec![comp1(0.6, 0.0, 1.0), comp1(0.5, 0.0, 1.0)]);
        assert!(matches!(r, Err(Error::InvalidMixture(_))));
    }

    #[test]
    fn moments_of_small_mixtures() {
        let m = GaussianMixture::new(vec![comp1(0.5, -1.0, 1.0), comp1(0.5, 1.0, 1.0)]).unwrap();
        let mo = m.moments();
        assert_eq!(mo.mean, vec![0.0]);
        assert!((mo.covariance[0] - 2.0).abs() < 1e-15);

        let m = GaussianMixture::new(vec![comp1(0.25, 0.0, 1.0), comp1(0.75, 0.0, 2.0)]).unwrap();
        let mo = m.moments();
        assert!((mo.covariance[0] - 1.75).abs() < 1e-15);
        assert!((mo.energy - 1.75).abs() < 1e-15);

        let c = GaussianComponent::new(1.0, vec![1.0, 2.0], vec![2.0, 0.3, 0.3, 0.5]).unwrap();
        let mo = GaussianMixture::single(c.clone()).unwrap().moments();
        assert_eq!(mo.mean, c.mean);
        for (a, b) in mo.covariance.iter().zip(&c.covariance) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn near_degenerate_samples_collapse_to_mean() {
        let c = comp1(1.0, 5.0, 1e-30);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert!((c.sample(&mut rng).unwrap()[0] - 5.0).abs() < 1e-14);
        }
    }

    #[test]
    fn standard_normal_sample_moments() {
        let c = GaussianComponent::standard(1);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| c.sample(&mut rng).unwrap()[0]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn component_selection_frequency() {
        let m = GaussianMixture::new(vec![comp1(0.9, -100.0, 1.0), comp1(0.1, 100.0, 1.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = m.sample(100_000, &mut rng).unwrap();
        let first = draws.iter().filter(|v| v[0] < 0.0).count() as f64 / 1e5;
        assert!((0.885..=0.915).contains(&first), "fraction {first}");
        assert!(m.sample(0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = GaussianMixture::new(vec![comp1(0.3, -1.0, 0.5), comp1(0.7, 2.0, 1.5)]).unwrap();
        let a = m.sample_flat(1000, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = m.sample_flat(1000, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(
            a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn quadrature_normalization() {
        // midpoint rule over ±8σ of the widest component
        let m = GaussianMixture::new(vec![
            comp1(0.2, -3.0, 0.25),
            comp1(0.3, 0.0, 1.0),
            comp1(0.5, 4.0, 2.0),
        ])
        .unwrap();
        let (lo, hi) = (-3.0 - 8.0 * 2f64.sqrt(), 4.0 + 8.0 * 2f64.sqrt());
        let n = 200_000;
        let h = (hi - lo) / n as f64;
        let total: f64 = (0..n)
            .map(|i| m.pdf(&[lo + (i as f64 + 0.5) * h]).unwrap() * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-6, "integral {total}");
    }
}
