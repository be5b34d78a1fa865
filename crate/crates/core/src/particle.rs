use crate::mixture::MAX_DIM;

/// A macro-particle. Only the first `dim` velocity entries are meaningful;
/// the dimension belongs to the species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub x: f64,
    pub v: [f64; MAX_DIM],
    pub weight: f64,
    pub species: u16,
}

impl Particle {
    pub fn new_1d(x: f64, v: f64, weight: f64, species: u16) -> Self {
        Self {
            x,
            v: [v, 0.0, 0.0],
            weight,
            species,
        }
    }

    pub fn speed_sq(&self, dim: usize) -> f64 {
        self.v[..dim].iter().map(|c| c * c).sum()
    }
}

/// Row-major velocities and weights of a particle slice.
pub fn velocities_and_weights(particles: &[Particle], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = Vec::with_capacity(particles.len() * dim);
    let mut w = Vec::with_capacity(particles.len());
    for p in particles {
        v.extend_from_slice(&p.v[..dim]);
        w.push(p.weight);
    }
    (v, w)
}
