//! Phase-space conventions.
//!
//! Quadratures are ordered `(x1, p1, ..., xN, pN)` with `hbar = 1` and
//! `[x, p] = i`. The covariance matrix is the doubled symmetrized second
//! moment `G_ij = <dr_i dr_j> + <dr_j dr_i>`, so the vacuum has `G = I`
//! and a state is physical iff every symplectic eigenvalue is at least 1.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Physicality floor on symplectic eigenvalues.
pub const PHYSICAL_TOL: f64 = 1e-9;
/// Relative tolerance on covariance symmetry.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Quadrature vector of length `2N` in xpxp order.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadVector<T: Real>(DVector<T>);

impl<T: Real> QuadVector<T> {
    pub fn new(entries: DVector<T>) -> Result<Self> {
        if entries.is_empty() || entries.len() % 2 != 0 {
            return Err(Error::Dimension(format!(
                "quadrature vector length must be even and positive, got {}",
                entries.len()
            )));
        }
        Ok(Self(entries))
    }

    pub fn zeros(modes: usize) -> Self {
        Self(DVector::zeros(2 * modes))
    }

    pub fn from_slice(entries: &[T]) -> Result<Self> {
        Self::new(DVector::from_column_slice(entries))
    }

    pub fn modes(&self) -> usize {
        self.0.len() / 2
    }

    pub fn as_vector(&self) -> &DVector<T> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<T> {
        self.0
    }

    pub fn max_abs(&self) -> T {
        self.0.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Real symmetric `2N x 2N` covariance matrix.
///
/// Construction checks symmetry; physicality is a separate question
/// answered by [`CovMatrix::check_physical`].
#[derive(Clone, Debug, PartialEq)]
pub struct CovMatrix<T: Real>(DMatrix<T>);

impl<T: Real> CovMatrix<T> {
    pub fn new(m: DMatrix<T>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 || m.nrows() % 2 != 0 {
            return Err(Error::Dimension(format!(
                "covariance must be square with even positive size, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.amax().max(T::one());
        let asym = (&m - m.transpose()).amax() / scale;
        if asym > T::tol(SYMMETRY_TOL) {
            return Err(Error::NotSymmetric {
                asymmetry: asym.as_f64(),
            });
        }
        Ok(Self::symmetrized(m))
    }

    /// Wraps a matrix that is symmetric up to rounding, averaging it with
    /// its transpose.
    pub(crate) fn symmetrized(m: DMatrix<T>) -> Self {
        let half = T::lit(0.5);
        let s = (&m + m.transpose()) * half;
        Self(s)
    }

    pub fn identity(modes: usize) -> Self {
        Self(DMatrix::identity(2 * modes, 2 * modes))
    }

    pub fn modes(&self) -> usize {
        self.0.nrows() / 2
    }

    pub fn as_matrix(&self) -> &DMatrix<T> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<T> {
        self.0
    }

    /// Symplectic eigenvalues sorted in descending order.
    pub fn symplectic_eigenvalues(&self) -> Result<Vec<T>> {
        symplectic_eigenvalues(&self.0)
    }

    /// Fails with [`Error::NotPhysical`] unless every symplectic eigenvalue
    /// is at least `1 - 1e-9`.
    pub fn check_physical(&self) -> Result<()> {
        let nus = self.symplectic_eigenvalues().map_err(|e| match e {
            Error::NotPositiveDefinite { .. } => Error::NotPhysical {
                index: 0,
                value: 0.0,
            },
            other => other,
        })?;
        let floor = T::one() - T::tol(PHYSICAL_TOL);
        for (i, nu) in nus.iter().enumerate().rev() {
            if *nu < floor {
                return Err(Error::NotPhysical {
                    index: i,
                    value: nu.as_f64(),
                });
            }
        }
        Ok(())
    }

    pub fn is_physical(&self) -> bool {
        self.check_physical().is_ok()
    }

    pub fn min_symplectic_eigenvalue(&self) -> Result<T> {
        Ok(*self.symplectic_eigenvalues()?.last().expect("nonempty"))
    }

    /// Sub-block on the given modes (rows and columns, in the given order).
    pub fn select_modes(&self, modes: &[usize]) -> DMatrix<T> {
        select_block(&self.0, modes, modes)
    }
}

/// Symplectic form `Omega = (+) [[0, 1], [-1, 0]]`.
pub fn omega<T: Real>(modes: usize) -> DMatrix<T> {
    let mut m = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        m[(2 * k, 2 * k + 1)] = T::one();
        m[(2 * k + 1, 2 * k)] = -T::one();
    }
    m
}

/// Phase-space transposition `R = diag(1, -1, ..., 1, -1)`.
pub fn transposition<T: Real>(modes: usize) -> DMatrix<T> {
    DMatrix::from_diagonal(&transposition_diag(modes))
}

pub(crate) fn transposition_diag<T: Real>(modes: usize) -> DVector<T> {
    DVector::from_fn(2 * modes, |i, _| if i % 2 == 0 { T::one() } else { -T::one() })
}

/// Quadrature indices of a list of modes, in order.
pub(crate) fn quad_indices(modes: &[usize]) -> Vec<usize> {
    modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect()
}

pub(crate) fn select_block<T: Real>(m: &DMatrix<T>, row_modes: &[usize], col_modes: &[usize]) -> DMatrix<T> {
    let rows = quad_indices(row_modes);
    let cols = quad_indices(col_modes);
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub(crate) fn select_entries<T: Real>(v: &DVector<T>, modes: &[usize]) -> DVector<T> {
    let idx = quad_indices(modes);
    DVector::from_fn(idx.len(), |i, _| v[idx[i]])
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted
/// ascending and eigenvectors permuted to match.
pub(crate) fn sorted_eigen<T: Real>(m: &DMatrix<T>) -> (Vec<T>, DMatrix<T>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Symmetric square root and inverse square root of a positive-definite
/// matrix.
pub(crate) fn sqrt_and_inv_sqrt<T: Real>(m: &DMatrix<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let (values, vectors) = sorted_eigen(m);
    let min = values[0];
    let scale = values[values.len() - 1].abs().max(T::one());
    if !(min > T::tol(1e-14) * scale) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min.as_f64(),
        });
    }
    let sq = DVector::from_iterator(values.len(), values.iter().map(|v| v.sqrt()));
    let isq = sq.map(|v| T::one() / v);
    let root = &vectors * DMatrix::from_diagonal(&sq) * vectors.transpose();
    let inv_root = &vectors * DMatrix::from_diagonal(&isq) * vectors.transpose();
    Ok((root, inv_root))
}

/// Symplectic eigenvalues of a positive-definite matrix, descending.
///
/// Uses the antisymmetric matrix `A = G^{1/2} Omega G^{1/2}`, whose
/// squared singular values are the `nu_k^2`, each twice.
pub fn symplectic_eigenvalues<T: Real>(m: &DMatrix<T>) -> Result<Vec<T>> {
    let n = m.nrows() / 2;
    let (root, _) = sqrt_and_inv_sqrt(m)?;
    let a = &root * omega::<T>(n) * &root;
    let ata = a.transpose() * &a;
    let (values, _) = sorted_eigen(&ata);
    let mut nus: Vec<T> = values
        .chunks(2)
        .map(|pair| ((pair[0] + pair[1]) * T::lit(0.5)).max(T::zero()).sqrt())
        .collect();
    nus.reverse();
    Ok(nus)
}

/// Solves `m x = rhs` for a symmetric positive-definite `m`, refusing
/// matrices whose smallest eigenvalue is below `1e-12` or whose condition
/// number exceeds [`Real::max_condition`].
pub(crate) fn solve_spd<T: Real>(m: &DMatrix<T>, rhs: &DMatrix<T>) -> Result<DMatrix<T>> {
    let eig = SymmetricEigen::new(m.clone());
    let mut lo = T::max_value().unwrap_or(T::lit(f64::MAX));
    let mut hi = T::zero();
    for v in eig.eigenvalues.iter() {
        lo = lo.min(v.abs());
        hi = hi.max(v.abs());
    }
    let condition = if lo > T::zero() { hi / lo } else { T::lit(f64::INFINITY) };
    let min_eig = eig.eigenvalues.iter().fold(hi, |a, b| a.min(*b));
    if lo < T::tol(1e-12) || condition > T::max_condition() || min_eig <= T::zero() {
        return Err(Error::SingularConditioning {
            min_singular: lo.as_f64(),
            condition: condition.as_f64(),
        });
    }
    match m.clone().cholesky() {
        Some(ch) => Ok(ch.solve(rhs)),
        None => Err(Error::SingularConditioning {
            min_singular: lo.as_f64(),
            condition: condition.as_f64(),
        }),
    }
}
