use rand::Rng;
use rand_distr::{Distribution, Normal};

/// He-normal weights: zero mean, standard deviation `sqrt(2 / fan_in)`.
pub fn he_normal<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, len: usize) -> Vec<f64> {
    let std = (2.0 / fan_in.max(1) as f64).sqrt();
    let dist = Normal::new(0.0, std).expect("finite std");
    (0..len).map(|_| dist.sample(rng)).collect()
}
