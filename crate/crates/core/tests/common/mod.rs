#![allow(dead_code)]

use cvdist_core::channels::{GaussianChannel, Port};
use cvdist_core::phase::CovMatrix;
use cvdist_core::state::{thermal, GaussianState};
use cvdist_core::symplectic::{random_symplectic, SymplecticMatrix};
use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::Rng;

/// Random symplectic applied to a thermal state with `nu` in `[1, 1 + spread]`.
pub fn random_state<R: Rng>(modes: usize, squeeze: f64, spread: f64, rng: &mut R) -> GaussianState<f64> {
    let nus: Vec<f64> = (0..modes).map(|_| 1.0 + spread * rng.random::<f64>()).collect();
    let s: SymplecticMatrix<f64> = random_symplectic(modes, squeeze, rng);
    thermal(&nus).unwrap().apply_symplectic(&s).unwrap()
}

pub fn random_pure_state<R: Rng>(modes: usize, squeeze: f64, rng: &mut R) -> GaussianState<f64> {
    random_state(modes, squeeze, 0.0, rng)
}

pub fn random_mean<R: Rng>(modes: usize, scale: f64, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(2 * modes, |_, _| scale * (2.0 * rng.random::<f64>() - 1.0))
}

/// Channel with a random physical Choi state and shuffled port assignment.
pub fn random_channel<R: Rng>(n_in: usize, n_out: usize, rng: &mut R) -> GaussianChannel<f64> {
    let choi = random_state(n_in + n_out, 0.5, 1.5, rng);
    let mut partition = vec![Port::In; n_in];
    partition.extend(std::iter::repeat_n(Port::Out, n_out));
    partition.shuffle(rng);
    GaussianChannel::new(partition, choi).unwrap()
}

pub fn max_diff(a: &CovMatrix<f64>, b: &CovMatrix<f64>) -> f64 {
    (a.as_matrix() - b.as_matrix()).amax()
}
