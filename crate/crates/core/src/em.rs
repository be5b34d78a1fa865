//! Weighted, penalized, adaptive expectation-maximization for Gaussian mixtures.
//!
//! [`fit_adaptive`] starts from `k_max` components and runs component-wise EM
//! on the penalized log-likelihood
//!
//! ```text
//! L(θ) = Σ_p α_p ln Σ_k ω_k f_k(v_p) − (d/2) ln N − (T/2) Σ_k ln ω_k
//! ```
//!
//! with `T = D(D+3)/2` parameters per Gaussian and `d = K·T + K − 1` in total.
//! Components whose responsibility mass drops to `T/2` or below are
//! annihilated, and so are components left with no more mass than their `T`
//! free parameters. After a level converges, the lightest component is removed
//! and the fit re-converges, down to `K = 1`; the best-scoring mixture wins.
//! A final unpenalized EM pass ([`conservation_pass`]) makes the mixture's
//! mass, mean and second moment coincide with the weighted sample's.
//!
//! The fitter rescales particle weights to unit mean before the penalized
//! phase so the `T/2` thresholds are measured in particle counts regardless
//! of the physical weight normalization.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::mixture::{self, log_sum_exp, ComponentDensity, GaussianComponent, GaussianMixture, MAX_DIM};

/// Velocities with positive statistical weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSampleSet {
    dim: usize,
    velocities: Vec<f64>,
    weights: Vec<f64>,
}

/// Extensive moments of a weighted sample: `Σα`, `Σα v`, `Σα v vᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMoments {
    pub mass: f64,
    pub momentum: Vec<f64>,
    pub second: Vec<f64>,
}

impl SampleMoments {
    pub fn energy(&self) -> f64 {
        let d = self.momentum.len();
        linalg::trace(&self.second, d)
    }
}

impl WeightedSampleSet {
    /// `velocities` is row-major `N * dim`.
    pub fn new(dim: usize, velocities: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        mixture::check_dim(dim)?;
        if velocities.len() != weights.len() * dim {
            return Err(Error::InvalidSample(format!(
                "{} velocity entries for {} weights in dimension {dim}",
                velocities.len(),
                weights.len()
            )));
        }
        if weights.is_empty() {
            return Err(Error::InvalidSample("empty sample set".into()));
        }
        if let Some(i) = velocities.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSample(format!("non-finite velocity at sample {}", i / dim)));
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidSample(format!(
                "weight {} at sample {i} is not positive",
                weights[i]
            )));
        }
        Ok(Self {
            dim,
            velocities,
            weights,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], weights: Vec<f64>) -> Result<Self> {
        let dim = rows.first().map_or(1, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: r.len(),
            });
        }
        Self::new(dim, rows.concat(), weights)
    }

    /// Unit weights.
    pub fn unweighted(dim: usize, velocities: Vec<f64>) -> Result<Self> {
        let n = velocities.len() / dim.max(1);
        Self::new(dim, velocities, vec![1.0; n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn velocity(&self, p: usize) -> &[f64] {
        &self.velocities[p * self.dim..(p + 1) * self.dim]
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn moments(&self) -> SampleMoments {
        let d = self.dim;
        let mut momentum = vec![0.0; d];
        let mut second = vec![0.0; d * d];
        for (v, &a) in self.velocities.chunks(d).zip(&self.weights) {
            for i in 0..d {
                momentum[i] += a * v[i];
                for j in 0..d {
                    second[i * d + j] += a * v[i] * v[j];
                }
            }
        }
        SampleMoments {
            mass: self.total_weight(),
            momentum,
            second,
        }
    }

    /// Weighted mean and covariance.
    pub fn mean_covariance(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let w = self.total_weight();
        let mut mean = vec![0.0; d];
        for (v, &a) in self.velocities.chunks(d).zip(&self.weights) {
            for i in 0..d {
                mean[i] += a * v[i];
            }
        }
        mean.iter_mut().for_each(|m| *m /= w);
        let mut cov = vec![0.0; d * d];
        for (v, &a) in self.velocities.chunks(d).zip(&self.weights) {
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
        (mean, cov)
    }

    /// Squared velocity-spread scale used by the covariance floor.
    pub fn spread_scale_sq(&self) -> f64 {
        let d = self.dim;
        let (mean, cov) = self.mean_covariance();
        let per_dim = linalg::trace(&cov, d) / d as f64;
        if per_dim > 0.0 {
            return per_dim;
        }
        let m2 = mean.iter().map(|m| m * m).sum::<f64>() / d as f64;
        if m2 > 0.0 {
            m2
        } else {
            1.0
        }
    }

    /// Same velocities with weights rescaled to unit mean.
    pub fn with_unit_mean_weights(&self) -> Self {
        let scale = self.len() as f64 / self.total_weight();
        Self {
            dim: self.dim,
            velocities: self.velocities.clone(),
            weights: self.weights.iter().map(|w| w * scale).collect(),
        }
    }
}

/// Knobs for [`fit_adaptive`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Initial number of components.
    pub k_max: usize,
    /// Relative change of the penalized score that counts as converged.
    pub tol: f64,
    /// Sweep cap per component-count level.
    pub max_iters: usize,
    /// Penalized weight update with annihilation. `false` runs plain EM at `k_max`.
    pub annihilate: bool,
    /// Covariance eigenvalue floor relative to the sample's squared spread.
    pub covariance_floor: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            k_max: 8,
            tol: 1e-6,
            max_iters: 1000,
            annihilate: true,
            covariance_floor: 1e-10,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_max < 1 || self.k_max > 255 {
            return Err(Error::InvalidConfig(format!("k_max must be in 1..=255, got {}", self.k_max)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.covariance_floor >= 0.0) {
            return Err(Error::InvalidConfig("covariance_floor must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One full component-wise sweep, for convergence inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub k: usize,
    pub score: f64,
    /// No annihilation, no non-positive weight numerator and no covariance
    /// clamping happened during the sweep; the penalized score cannot drop.
    pub clean: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub final_k: usize,
    /// Penalized score of the selected mixture on unit-mean weights.
    pub score: f64,
    /// Full component-wise sweeps across all levels.
    pub em_iterations: usize,
    pub annihilations: usize,
    pub wall_seconds: f64,
    /// `T = D(D+3)/2`.
    pub params_per_component: usize,
    /// `d = K·T + K − 1` for the final `K`.
    pub total_params: usize,
    pub sweeps: Vec<SweepRecord>,
}

/// Responsibility table, row-major `N * K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    n: usize,
    k: usize,
    values: Vec<f64>,
}

impl Responsibilities {
    pub fn new(n: usize, k: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * k || k == 0 {
            return Err(Error::InvalidSample(format!(
                "responsibility table has {} entries, expected {n} x {k}",
                values.len()
            )));
        }
        Ok(Self { n, k, values })
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> usize {
        self.k
    }

    pub fn row(&self, p: usize) -> &[f64] {
        &self.values[p * self.k..(p + 1) * self.k]
    }

    pub fn get(&self, p: usize, k: usize) -> f64 {
        self.values[p * self.k + k]
    }

    /// Weighted responsibility mass `W_k = Σ_p α_p r_pk`.
    pub fn masses(&self, s: &WeightedSampleSet) -> Vec<f64> {
        let mut w = vec![0.0; self.k];
        for (p, &a) in s.weights().iter().enumerate() {
            for (k, wk) in w.iter_mut().enumerate() {
                *wk += a * self.get(p, k);
            }
        }
        w
    }
}

fn check_compat(s: &WeightedSampleSet, m: &GaussianMixture) -> Result<()> {
    if s.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: s.dim(),
        });
    }
    Ok(())
}

/// Posterior component probabilities in the log domain.
pub fn e_step(s: &WeightedSampleSet, m: &GaussianMixture) -> Result<Responsibilities> {
    check_compat(s, m)?;
    let densities = m.densities()?;
    let log_w: Vec<f64> = m.weights().iter().map(|w| w.ln()).collect();
    let k = m.len();
    let mut values = vec![0.0; s.len() * k];
    let mut terms = vec![0.0; k];
    for p in 0..s.len() {
        let v = s.velocity(p);
        for j in 0..k {
            terms[j] = log_w[j] + densities[j].log_pdf(v);
        }
        let lse = log_sum_exp(&terms);
        if !lse.is_finite() {
            return Err(Error::InvalidSample(format!("sample {p} has no finite likelihood")));
        }
        for j in 0..k {
            values[p * k + j] = (terms[j] - lse).exp();
        }
    }
    Responsibilities::new(s.len(), k, values)
}

/// Mean and floored covariance of one component from its responsibility column.
fn component_update(
    s: &WeightedSampleSet,
    resp: impl Fn(usize) -> f64,
    floor: f64,
) -> Option<(f64, Vec<f64>, Vec<f64>, bool)> {
    let d = s.dim();
    let mut mass = 0.0;
    let mut mean = [0.0; MAX_DIM];
    for p in 0..s.len() {
        let w = s.weights()[p] * resp(p);
        if w == 0.0 {
            continue;
        }
        mass += w;
        let v = s.velocity(p);
        for i in 0..d {
            mean[i] += w * v[i];
        }
    }
    if !(mass > 0.0) {
        return None;
    }
    for m in mean.iter_mut().take(d) {
        *m /= mass;
    }
    let mut cov = vec![0.0; d * d];
    for p in 0..s.len() {
        let w = s.weights()[p] * resp(p);
        if w == 0.0 {
            continue;
        }
        let v = s.velocity(p);
        for i in 0..d {
            let di = v[i] - mean[i];
            for j in i..d {
                cov[i * d + j] += w * di * (v[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i * d + j] /= mass;
            cov[j * d + i] = cov[i * d + j];
        }
    }
    let clamped = linalg::clamp_eigenvalues(&mut cov, d, floor);
    Some((mass, mean[..d].to_vec(), cov, clamped))
}

fn absolute_floor(s: &WeightedSampleSet, relative: f64) -> f64 {
    (relative * s.spread_scale_sq()).max(f64::MIN_POSITIVE)
}

/// Unpenalized M-step. Components with zero responsibility mass are dropped.
///
/// `covariance_floor` is relative to the sample's squared velocity spread.
pub fn m_step_standard(
    s: &WeightedSampleSet,
    r: &Responsibilities,
    covariance_floor: f64,
) -> Result<GaussianMixture> {
    m_step_standard_inner(s, r, absolute_floor(s, covariance_floor)).map(|(m, _)| m)
}

fn m_step_standard_inner(
    s: &WeightedSampleSet,
    r: &Responsibilities,
    floor: f64,
) -> Result<(GaussianMixture, bool)> {
    if r.rows() != s.len() {
        return Err(Error::InvalidSample(format!(
            "{} responsibility rows for {} samples",
            r.rows(),
            s.len()
        )));
    }
    let mut comps = Vec::with_capacity(r.components());
    let mut any_clamped = false;
    for k in 0..r.components() {
        if let Some((mass, mean, cov, clamped)) = component_update(s, |p| r.get(p, k), floor) {
            any_clamped |= clamped;
            comps.push(GaussianComponent {
                weight: mass,
                mean,
                covariance: cov,
            });
        }
    }
    Ok((GaussianMixture::from_unnormalized(comps)?, any_clamped))
}

/// Penalized M-step: `ω_k ∝ max(0, W_k − T/2)`; zero-weight components are
/// annihilated. If nothing survives, a single Gaussian over all samples is
/// returned.
pub fn m_step_penalized(
    s: &WeightedSampleSet,
    r: &Responsibilities,
    params_per_component: usize,
    covariance_floor: f64,
) -> Result<GaussianMixture> {
    let floor = absolute_floor(s, covariance_floor);
    let half_t = params_per_component as f64 / 2.0;
    let masses = r.masses(s);
    let mut comps = Vec::new();
    for (k, &wk) in masses.iter().enumerate() {
        let numer = (wk - half_t).max(0.0);
        if numer == 0.0 {
            continue;
        }
        if let Some((_, mean, cov, _)) = component_update(s, |p| r.get(p, k), floor) {
            comps.push(GaussianComponent {
                weight: numer,
                mean,
                covariance: cov,
            });
        }
    }
    if comps.is_empty() {
        let all = Responsibilities::new(s.len(), 1, vec![1.0; s.len()])?;
        return m_step_standard(s, &all, covariance_floor);
    }
    GaussianMixture::from_unnormalized(comps)
}

/// Penalized log-likelihood `L(θ)`; `ln N` uses the raw sample count.
pub fn mml_score(s: &WeightedSampleSet, m: &GaussianMixture) -> Result<f64> {
    check_compat(s, m)?;
    if m.weights().iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidMixture("annihilated component present".into()));
    }
    let densities = m.densities()?;
    let log_w: Vec<f64> = m.weights().iter().map(|w| w.ln()).collect();
    let mut terms = vec![0.0; m.len()];
    let mut loglik = 0.0;
    for p in 0..s.len() {
        let v = s.velocity(p);
        for j in 0..m.len() {
            terms[j] = log_w[j] + densities[j].log_pdf(v);
        }
        loglik += s.weights()[p] * log_sum_exp(&terms);
    }
    Ok(loglik - penalty(s.len(), s.dim(), &log_w))
}

fn total_params(k: usize, d: usize) -> usize {
    k * mixture::params_per_component(d) + k - 1
}

fn penalty(n: usize, d: usize, log_weights: &[f64]) -> f64 {
    let t = mixture::params_per_component(d) as f64;
    let k = log_weights.len();
    0.5 * total_params(k, d) as f64 * (n as f64).ln() + 0.5 * t * log_weights.iter().sum::<f64>()
}

/// One unpenalized EM iteration. Afterwards the mixture's moments times `W`
/// equal the sample's mass, momentum and second moment to round-off.
pub fn conservation_pass(
    s: &WeightedSampleSet,
    m: &GaussianMixture,
    covariance_floor: f64,
) -> Result<GaussianMixture> {
    let r = e_step(s, m)?;
    let (mixture, clamped) = m_step_standard_inner(s, &r, absolute_floor(s, covariance_floor))?;
    if !clamped {
        return Ok(mixture);
    }
    Ok(restore_spread(s, mixture))
}

/// Clamping a covariance adds spread; pull the component means toward the
/// sample mean so the total trace variance is matched again.
fn restore_spread(s: &WeightedSampleSet, mixture: GaussianMixture) -> GaussianMixture {
    let d = s.dim();
    let (mean, cov) = s.mean_covariance();
    let target = linalg::trace(&cov, d);
    let within: f64 = mixture
        .components()
        .iter()
        .map(|c| c.weight * linalg::trace(&c.covariance, d))
        .sum();
    let between: f64 = mixture
        .components()
        .iter()
        .map(|c| c.weight * c.mean.iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        .sum();
    if !(between > 0.0) || target < within {
        return mixture;
    }
    let shrink = ((target - within) / between).sqrt();
    let comps = mixture
        .into_components()
        .into_iter()
        .map(|mut c| {
            for (m, &g) in c.mean.iter_mut().zip(&mean) {
                *m = g + shrink * (*m - g);
            }
            c
        })
        .collect();
    GaussianMixture::new(comps).expect("weights unchanged")
}

/// Derives an independent stream seed, e.g. per cell.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over a combined key
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Component {
    weight: f64,
    mean: Vec<f64>,
    cov: Vec<f64>,
    density: ComponentDensity,
}

impl Component {
    fn new(weight: f64, mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let density = ComponentDensity::new(&mean, &cov)?;
        Ok(Self {
            weight,
            mean,
            cov,
            density,
        })
    }
}

/// Range of a per-particle mixture density, relative to its shift, outside
/// which the particle is rebased.
const TOTAL_MIN: f64 = 1e-280;
const TOTAL_MAX: f64 = 1e280;

/// Component-wise EM working state.
///
/// `scaled[k][p] = exp(ln f_k(v_p) − shift_p)` with a per-particle shift, so
/// the mixture density of particle `p` is `exp(shift_p) · Σ_k ω_k scaled[k][p]`
/// without overflow; only the updated component's column is recomputed.
struct ComponentwiseEm<'a> {
    s: &'a WeightedSampleSet,
    comps: Vec<Component>,
    scaled: Vec<Vec<f64>>,
    shift: Vec<f64>,
    total: Vec<f64>,
    /// Responsibility mass `W_k`, kept in step with `total`.
    masses: Vec<f64>,
    floor: f64,
    half_t: f64,
    annihilate: bool,
}

impl<'a> ComponentwiseEm<'a> {
    fn new(s: &'a WeightedSampleSet, comps: Vec<Component>, floor: f64, annihilate: bool) -> Self {
        let n = s.len();
        let mut em = Self {
            s,
            scaled: vec![vec![0.0; n]; comps.len()],
            comps,
            shift: vec![0.0; n],
            total: vec![0.0; n],
            masses: Vec::new(),
            floor,
            half_t: mixture::params_per_component(s.dim()) as f64 / 2.0,
            annihilate,
        };
        em.rebase_all();
        em
    }

    fn k(&self) -> usize {
        self.comps.len()
    }

    fn rebase(&mut self, p: usize) {
        let v = self.s.velocity(p);
        let mut max = f64::NEG_INFINITY;
        for (k, c) in self.comps.iter().enumerate() {
            let l = c.density.log_pdf(v);
            self.scaled[k][p] = l;
            max = max.max(l);
        }
        self.shift[p] = max;
        let mut total = 0.0;
        for (k, c) in self.comps.iter().enumerate() {
            let e = (self.scaled[k][p] - max).exp();
            self.scaled[k][p] = e;
            total += c.weight * e;
        }
        self.total[p] = total;
    }

    fn rebase_all(&mut self) {
        for p in 0..self.s.len() {
            self.rebase(p);
        }
        self.refresh_totals();
    }

    /// Recomputes the mixture density of every particle and the
    /// responsibility masses in one pass.
    fn refresh_totals(&mut self) {
        let w = self.s.weights();
        let mut masses = vec![0.0; self.k()];
        for p in 0..self.s.len() {
            let mut t: f64 = self
                .comps
                .iter()
                .zip(&self.scaled)
                .map(|(c, col)| c.weight * col[p])
                .sum();
            if !(t > TOTAL_MIN && t < TOTAL_MAX) {
                self.rebase(p);
                t = self.total[p];
            }
            self.total[p] = t;
            let inv = w[p] / t;
            for ((m, c), col) in masses.iter_mut().zip(&self.comps).zip(&self.scaled) {
                *m += c.weight * col[p] * inv;
            }
        }
        self.masses = masses;
    }

    fn remove(&mut self, k: usize) {
        self.comps.remove(k);
        self.scaled.remove(k);
        let sum: f64 = self.comps.iter().map(|c| c.weight).sum();
        for c in &mut self.comps {
            c.weight /= sum;
        }
        self.refresh_totals();
    }

    /// Updates component `m`. Returns `(annihilated, clean)`.
    fn update(&mut self, m: usize) -> Result<(bool, bool)> {
        let masses = &self.masses;
        let mut clean = true;
        let new_weight = if self.annihilate {
            let numer: Vec<f64> = masses.iter().map(|w| (w - self.half_t).max(0.0)).collect();
            clean &= numer.iter().all(|&x| x > 0.0);
            let denom: f64 = numer.iter().sum();
            // fewer effective samples than free parameters
            let unsupported = masses[m] <= 2.0 * self.half_t;
            if numer[m] == 0.0 || denom == 0.0 || unsupported {
                if self.k() > 1 {
                    self.remove(m);
                    return Ok((true, false));
                }
                1.0
            } else {
                numer[m] / denom
            }
        } else {
            masses[m] / masses.iter().sum::<f64>()
        };

        let wm = self.comps[m].weight;
        let resp: Vec<f64> = self.scaled[m].iter().zip(&self.total).map(|(c, t)| wm * c / t).collect();
        let updated = component_update(self.s, |p| resp[p], self.floor);
        let Some((_, mean, cov, clamped)) = updated else {
            if self.k() > 1 {
                self.remove(m);
                return Ok((true, false));
            }
            return Ok((false, false));
        };
        clean &= !clamped;

        let others: f64 = (0..self.k()).filter(|&j| j != m).map(|j| self.comps[j].weight).sum();
        if others > 0.0 {
            let scale = (1.0 - new_weight) / others;
            for (j, c) in self.comps.iter_mut().enumerate() {
                if j != m {
                    c.weight *= scale;
                }
            }
        }
        let new_weight = if others > 0.0 { new_weight } else { 1.0 };
        self.comps[m] = Component::new(new_weight, mean, cov)?;

        let s = self.s;
        for p in 0..s.len() {
            let l = self.comps[m].density.log_pdf(s.velocity(p)) - self.shift[p];
            if l > 600.0 {
                self.rebase(p);
                continue;
            }
            self.scaled[m][p] = l.exp();
        }
        self.refresh_totals();
        Ok((false, clean))
    }

    fn score(&self) -> f64 {
        let w = self.s.weights();
        let loglik: f64 = (0..self.s.len())
            .map(|p| w[p] * (self.shift[p] + self.total[p].ln()))
            .sum();
        let log_w: Vec<f64> = self.comps.iter().map(|c| c.weight.ln()).collect();
        loglik - penalty(self.s.len(), self.s.dim(), &log_w)
    }

    fn mixture(&self) -> Result<GaussianMixture> {
        GaussianMixture::from_unnormalized(
            self.comps
                .iter()
                .map(|c| GaussianComponent {
                    weight: c.weight,
                    mean: c.mean.clone(),
                    covariance: c.cov.clone(),
                })
                .collect(),
        )
    }
}

/// Picks up to `k` distinct velocities: samples are ordered by their first
/// coordinate, split into `k` equal strata, and one random member is drawn
/// from each.
fn stratified_pick(s: &WeightedSampleSet, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = s.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s.velocity(a)[0].total_cmp(&s.velocity(b)[0]).then(a.cmp(&b)));
    let k = k.min(n);
    let mut picked: Vec<Vec<f64>> = Vec::with_capacity(k);
    for stratum in 0..k {
        let lo = stratum * n / k;
        let hi = ((stratum + 1) * n / k).max(lo + 1);
        let start = rng.random_range(lo..hi);
        let candidate = (lo..hi)
            .map(|i| lo + (start - lo + i - lo) % (hi - lo))
            .map(|i| s.velocity(order[i]))
            .find(|v| !picked.iter().any(|q| q.as_slice() == *v));
        if let Some(v) = candidate {
            picked.push(v.to_vec());
        }
    }
    picked
}

/// Fits a mixture with automatic selection of the number of components.
pub fn fit_adaptive(s: &WeightedSampleSet, cfg: &FitConfig) -> Result<(GaussianMixture, FitReport)> {
    cfg.validate()?;
    if s.len() < 2 {
        return Err(Error::TooFewSamples { n: s.len() });
    }
    let started = Instant::now();
    let d = s.dim();
    let unit = s.with_unit_mean_weights();
    let floor = absolute_floor(&unit, cfg.covariance_floor);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let (_, mut global_cov) = unit.mean_covariance();
    linalg::clamp_eigenvalues(&mut global_cov, d, floor);
    let means = stratified_pick(&unit, cfg.k_max, &mut rng);
    let k0 = means.len();
    let comps = means
        .into_iter()
        .map(|m| Component::new(1.0 / k0 as f64, m, global_cov.clone()))
        .collect::<Result<Vec<_>>>()?;

    let mut em = ComponentwiseEm::new(&unit, comps, floor, cfg.annihilate);
    let mut sweeps = Vec::new();
    let mut annihilations = 0;
    let mut best: Option<(f64, GaussianMixture)> = None;

    loop {
        let mut prev: Option<(usize, f64)> = None;
        for _ in 0..cfg.max_iters {
            let mut clean = true;
            let mut m = 0;
            while m < em.k() {
                let (removed, c) = em.update(m)?;
                clean &= c;
                if removed {
                    annihilations += 1;
                } else {
                    m += 1;
                }
            }
            let score = em.score();
            sweeps.push(SweepRecord {
                k: em.k(),
                score,
                clean,
            });
            let converged = matches!(prev, Some((k, p)) if k == em.k() && (score - p).abs() < cfg.tol * p.abs());
            prev = Some((em.k(), score));
            if converged {
                break;
            }
        }
        let score = em.score();
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, em.mixture()?));
        }
        if em.k() == 1 || !cfg.annihilate {
            break;
        }
        let lightest = (0..em.k())
            .min_by(|&a, &b| em.comps[a].weight.total_cmp(&em.comps[b].weight))
            .expect("k > 1");
        em.remove(lightest);
        em.rebase_all();
        annihilations += 1;
    }

    let (score, selected) = best.expect("at least one level ran");
    let fitted = conservation_pass(s, &selected, cfg.covariance_floor)?;
    let final_k = fitted.len();
    let report = FitReport {
        final_k,
        score,
        em_iterations: sweeps.len(),
        annihilations,
        wall_seconds: started.elapsed().as_secs_f64(),
        params_per_component: mixture::params_per_component(d),
        total_params: total_params(final_k, d),
        sweeps,
    };
    Ok((fitted, report))
}
