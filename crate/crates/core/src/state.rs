//! Gaussian states: mean quadratures plus covariance matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::phase::{quad_indices, select_entries, CovMatrix, QuadVector};
use crate::scalar::Real;
use crate::symplectic::{two_mode_squeezer, SymplecticMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState<T: Real> {
    mean: QuadVector<T>,
    cov: CovMatrix<T>,
}

impl<T: Real> GaussianState<T> {
    /// Builds a state, rejecting mismatched sizes and unphysical covariances.
    pub fn new(mean: QuadVector<T>, cov: CovMatrix<T>) -> Result<Self> {
        if mean.modes() != cov.modes() {
            return Err(Error::DimensionMismatch {
                expected: cov.modes(),
                found: mean.modes(),
            });
        }
        cov.check_physical()?;
        Ok(Self { mean, cov })
    }

    /// Zero-mean state with the given covariance.
    pub fn centered(cov: CovMatrix<T>) -> Result<Self> {
        let mean = QuadVector::zeros(cov.modes());
        Self::new(mean, cov)
    }

    /// Internal constructor for results that are physical by construction.
    pub(crate) fn from_parts(mean: DVector<T>, cov: DMatrix<T>) -> Self {
        Self {
            mean: QuadVector::new(mean).expect("even length"),
            cov: CovMatrix::symmetrized(cov),
        }
    }

    pub fn modes(&self) -> usize {
        self.cov.modes()
    }

    pub fn mean(&self) -> &QuadVector<T> {
        &self.mean
    }

    pub fn cov(&self) -> &CovMatrix<T> {
        &self.cov
    }

    pub fn with_mean(&self, mean: DVector<T>) -> Result<Self> {
        let mean = QuadVector::new(mean)?;
        if mean.modes() != self.modes() {
            return Err(Error::DimensionMismatch {
                expected: self.modes(),
                found: mean.modes(),
            });
        }
        Ok(Self {
            mean,
            cov: self.cov.clone(),
        })
    }

    /// Shifts the mean by `delta`.
    pub fn displace(&self, delta: &DVector<T>) -> Result<Self> {
        self.with_mean(self.mean.as_vector() + delta)
    }

    /// `G -> S G S^T`, `d -> S d`.
    pub fn apply_symplectic(&self, s: &SymplecticMatrix<T>) -> Result<Self> {
        if s.modes() != self.modes() {
            return Err(Error::DimensionMismatch {
                expected: self.modes(),
                found: s.modes(),
            });
        }
        let deviation = s.deviation();
        if !(deviation <= T::tol(crate::symplectic::SYMPLECTIC_TOL)) {
            return Err(Error::NotSymplectic {
                deviation: deviation.as_f64(),
            });
        }
        Ok(self.apply_symplectic_unchecked(s.as_matrix()))
    }

    pub(crate) fn apply_symplectic_unchecked(&self, s: &DMatrix<T>) -> Self {
        let cov = s * self.cov.as_matrix() * s.transpose();
        let mean = s * self.mean.as_vector();
        Self::from_parts(mean, cov)
    }

    /// Applies `s` to the listed modes only.
    pub fn apply_symplectic_on(&self, s: &SymplecticMatrix<T>, modes: &[usize]) -> Result<Self> {
        let full = s.embed(modes, self.modes())?;
        self.apply_symplectic(&full)
    }

    /// Product state `self (x) other`.
    pub fn tensor(&self, other: &Self) -> Self {
        let n = self.cov.as_matrix().nrows();
        let m = other.cov.as_matrix().nrows();
        let mut cov = DMatrix::zeros(n + m, n + m);
        cov.view_mut((0, 0), (n, n)).copy_from(self.cov.as_matrix());
        cov.view_mut((n, n), (m, m)).copy_from(other.cov.as_matrix());
        let mut mean = DVector::zeros(n + m);
        mean.rows_mut(0, n).copy_from(self.mean.as_vector());
        mean.rows_mut(n, m).copy_from(other.mean.as_vector());
        Self::from_parts(mean, cov)
    }

    /// Marginal on `keep`, with modes reordered as listed.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::EmptyKeepSet);
        }
        validate_modes(keep, self.modes())?;
        let cov = self.cov.select_modes(keep);
        let mean = select_entries(self.mean.as_vector(), keep);
        Ok(Self::from_parts(mean, cov))
    }

    /// Reorders modes by a permutation.
    pub fn permute(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.modes() {
            return Err(Error::InvalidModes(format!(
                "permutation of {} modes has length {}",
                self.modes(),
                order.len()
            )));
        }
        self.partial_trace(order)
    }

    pub fn symplectic_eigenvalues(&self) -> Vec<T> {
        self.cov
            .symplectic_eigenvalues()
            .expect("physical covariance is positive definite")
    }

    /// All symplectic eigenvalues equal to 1 within `1e-7`.
    pub fn is_pure(&self) -> bool {
        self.symplectic_eigenvalues()
            .iter()
            .all(|nu| (*nu - T::one()).abs() <= T::tol(PURITY_TOL))
    }
}

/// Purity tolerance on symplectic eigenvalues.
pub const PURITY_TOL: f64 = 1e-7;

/// Rejects out-of-range or repeated mode indices.
pub(crate) fn validate_modes(modes: &[usize], total: usize) -> Result<()> {
    let mut seen = vec![false; total];
    for &m in modes {
        if m >= total {
            return Err(Error::InvalidModes(format!("mode {m} out of range for {total} modes")));
        }
        if seen[m] {
            return Err(Error::InvalidModes(format!("mode {m} listed twice")));
        }
        seen[m] = true;
    }
    Ok(())
}

/// Modes of `0..total` not listed in `modes`, ascending.
pub(crate) fn complement(modes: &[usize], total: usize) -> Vec<usize> {
    (0..total).filter(|m| !modes.contains(m)).collect()
}

pub fn vacuum<T: Real>(modes: usize) -> Result<GaussianState<T>> {
    if modes == 0 {
        return Err(Error::Dimension("vacuum needs at least one mode".into()));
    }
    Ok(GaussianState::from_parts(
        DVector::zeros(2 * modes),
        DMatrix::identity(2 * modes, 2 * modes),
    ))
}

/// Product of thermal states, one symplectic eigenvalue `nu >= 1` per mode.
pub fn thermal<T: Real>(nus: &[T]) -> Result<GaussianState<T>> {
    if nus.is_empty() {
        return Err(Error::Dimension("thermal state needs at least one mode".into()));
    }
    let d = DVector::from_iterator(2 * nus.len(), nus.iter().flat_map(|&v| [v, v]));
    GaussianState::centered(CovMatrix::new(DMatrix::from_diagonal(&d))?)
}

/// Two-mode squeezed vacuum: diagonal blocks `cosh(2r) I`, off-diagonal
/// `sinh(2r) Z`.
pub fn tmsv<T: Real>(r: T) -> GaussianState<T> {
    let v = vacuum::<T>(2).expect("two modes");
    v.apply_symplectic_unchecked(two_mode_squeezer(r).as_matrix())
}

/// Single-mode squeezed vacuum `diag(e^{2r}, e^{-2r})`.
pub fn squeezed_vacuum<T: Real>(r: T) -> GaussianState<T> {
    let d = DVector::from_vec(vec![(r + r).exp(), (-(r + r)).exp()]);
    GaussianState::from_parts(DVector::zeros(2), DMatrix::from_diagonal(&d))
}

/// Coherent state with quadrature mean `(x, p)` per mode.
pub fn coherent<T: Real>(mean: &[T]) -> Result<GaussianState<T>> {
    let mean = QuadVector::from_slice(mean)?;
    let n = mean.modes();
    GaussianState::new(mean, CovMatrix::identity(n))
}

/// Adds `noise * I` to the covariance (additive Gaussian noise channel).
pub fn add_noise<T: Real>(state: &GaussianState<T>, noise: T) -> Result<GaussianState<T>> {
    if noise < T::zero() {
        return Err(Error::ParamOutOfRange(format!("noise {noise} must be nonnegative")));
    }
    let n = 2 * state.modes();
    let cov = state.cov().as_matrix() + DMatrix::identity(n, n) * noise;
    Ok(GaussianState::from_parts(state.mean().as_vector().clone(), cov))
}

/// Indices of the `2N` quadratures belonging to `modes`.
pub fn quadratures_of(modes: &[usize]) -> Vec<usize> {
    quad_indices(modes)
}
