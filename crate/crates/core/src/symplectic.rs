//! Symplectic matrices, standard optical generators and the Williamson and
//! Bloch-Messiah decompositions.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::phase::{omega, sorted_eigen, sqrt_and_inv_sqrt, CovMatrix};
use crate::scalar::Real;

/// Tolerance on `max |S Omega S^T - Omega|`.
pub const SYMPLECTIC_TOL: f64 = 1e-10;

/// Real `2N x 2N` matrix with `S Omega S^T = Omega`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticMatrix<T: Real>(DMatrix<T>);

impl<T: Real> SymplecticMatrix<T> {
    /// Validates the symplectic condition to `1e-10`.
    pub fn new(m: DMatrix<T>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 || m.nrows() % 2 != 0 {
            return Err(Error::Dimension(format!(
                "symplectic matrix must be square with even size, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let deviation = symplectic_deviation(&m);
        if !(deviation <= T::tol(SYMPLECTIC_TOL)) {
            return Err(Error::NotSymplectic {
                deviation: deviation.as_f64(),
            });
        }
        Ok(Self(m))
    }

    /// Wraps a matrix that is symplectic by construction.
    pub(crate) fn from_raw(m: DMatrix<T>) -> Self {
        debug_assert!(symplectic_deviation(&m) <= T::tol(1e-8));
        Self(m)
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

    pub fn deviation(&self) -> T {
        symplectic_deviation(&self.0)
    }

    /// Matrix product `self * rhs`.
    pub fn compose(&self, rhs: &Self) -> Result<Self> {
        if self.modes() != rhs.modes() {
            return Err(Error::DimensionMismatch {
                expected: self.modes(),
                found: rhs.modes(),
            });
        }
        Ok(Self(&self.0 * &rhs.0))
    }

    /// Inverse via `S^{-1} = Omega S^T Omega^T`.
    pub fn inverse(&self) -> Self {
        let w = omega::<T>(self.modes());
        Self(&w * self.0.transpose() * w.transpose())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Block-diagonal direct sum acting on `self` modes first.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let n = self.0.nrows();
        let m = other.0.nrows();
        let mut out = DMatrix::zeros(n + m, n + m);
        out.view_mut((0, 0), (n, n)).copy_from(&self.0);
        out.view_mut((n, n), (m, m)).copy_from(&other.0);
        Self(out)
    }

    /// Embeds this transformation on `modes` of a `total`-mode system,
    /// acting as the identity elsewhere.
    pub fn embed(&self, modes: &[usize], total: usize) -> Result<Self> {
        if modes.len() != self.modes() {
            return Err(Error::DimensionMismatch {
                expected: self.modes(),
                found: modes.len(),
            });
        }
        crate::state::validate_modes(modes, total)?;
        let idx = crate::phase::quad_indices(modes);
        let mut out = DMatrix::identity(2 * total, 2 * total);
        for (i, &gi) in idx.iter().enumerate() {
            for (j, &gj) in idx.iter().enumerate() {
                out[(gi, gj)] = self.0[(i, j)];
            }
        }
        Ok(Self(out))
    }

    /// True when the matrix is also orthogonal to `1e-10`.
    pub fn is_passive(&self) -> bool {
        let n = self.0.nrows();
        (&self.0 * self.0.transpose() - DMatrix::<T>::identity(n, n)).amax() <= T::tol(SYMPLECTIC_TOL)
    }
}

pub fn symplectic_deviation<T: Real>(m: &DMatrix<T>) -> T {
    let w = omega::<T>(m.nrows() / 2);
    (m * &w * m.transpose() - w).amax()
}

/// Standard Gaussian unitaries in phase-space form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StandardKind<T> {
    /// `(x, p) -> (x cos t + p sin t, -x sin t + p cos t)`.
    PhaseRotation { theta: T },
    /// `diag(e^r, e^-r)`.
    Squeezer { r: T },
    /// `[[cosh r I, sinh r Z], [sinh r Z, cosh r I]]` with `Z = diag(1, -1)`.
    TwoModeSqueezer { r: T },
    /// `[[t I, s I], [-s I, t I]]` with `t = sqrt(T)`, `s = sqrt(1 - T)`.
    Beamsplitter { transmittance: T },
}

impl<T: Real> StandardKind<T> {
    /// Looks a generator up by name: `rotation`, `squeezer`,
    /// `two-mode-squeezer` or `beamsplitter`, each taking one parameter.
    pub fn from_name(name: &str, params: &[T]) -> Result<Self> {
        let one = |p: &[T]| -> Result<T> {
            match p {
                [v] => Ok(*v),
                _ => Err(Error::ParamOutOfRange(format!(
                    "`{name}` takes exactly one parameter, got {}",
                    p.len()
                ))),
            }
        };
        match name {
            "rotation" | "phase-rotation" => Ok(Self::PhaseRotation { theta: one(params)? }),
            "squeezer" => Ok(Self::Squeezer { r: one(params)? }),
            "two-mode-squeezer" | "tms" => Ok(Self::TwoModeSqueezer { r: one(params)? }),
            "beamsplitter" | "bs" => Ok(Self::Beamsplitter {
                transmittance: one(params)?,
            }),
            other => Err(Error::UnknownKind(other.to_string())),
        }
    }

    pub fn build(self) -> Result<SymplecticMatrix<T>> {
        match self {
            Self::PhaseRotation { theta } => Ok(phase_rotation(theta)),
            Self::Squeezer { r } => Ok(squeezer(r)),
            Self::TwoModeSqueezer { r } => Ok(two_mode_squeezer(r)),
            Self::Beamsplitter { transmittance } => beamsplitter(transmittance),
        }
    }
}

pub fn phase_rotation<T: Real>(theta: T) -> SymplecticMatrix<T> {
    let (s, c) = theta.sin_cos();
    SymplecticMatrix(DMatrix::from_row_slice(2, 2, &[c, s, -s, c]))
}

pub fn squeezer<T: Real>(r: T) -> SymplecticMatrix<T> {
    SymplecticMatrix(DMatrix::from_row_slice(2, 2, &[r.exp(), T::zero(), T::zero(), (-r).exp()]))
}

pub fn two_mode_squeezer<T: Real>(r: T) -> SymplecticMatrix<T> {
    let (c, s) = (r.cosh(), r.sinh());
    let z = T::zero();
    SymplecticMatrix(DMatrix::from_row_slice(
        4,
        4,
        &[c, z, s, z, z, c, z, -s, s, z, c, z, z, -s, z, c],
    ))
}

/// Beamsplitter with power transmittance in `[0, 1]`.
pub fn beamsplitter<T: Real>(transmittance: T) -> Result<SymplecticMatrix<T>> {
    if !(transmittance >= T::zero() && transmittance <= T::one()) {
        return Err(Error::ParamOutOfRange(format!(
            "beamsplitter transmittance {transmittance} outside [0, 1]"
        )));
    }
    let t = transmittance.sqrt();
    let s = (T::one() - transmittance).sqrt();
    Ok(beamsplitter_cs(t, s))
}

/// Beamsplitter by mixing angle: `t = cos(theta)`, `s = sin(theta)`.
pub fn beamsplitter_angle<T: Real>(theta: T) -> SymplecticMatrix<T> {
    let (s, c) = theta.sin_cos();
    beamsplitter_cs(c, s)
}

fn beamsplitter_cs<T: Real>(t: T, s: T) -> SymplecticMatrix<T> {
    let z = T::zero();
    SymplecticMatrix(DMatrix::from_row_slice(
        4,
        4,
        &[t, z, s, z, z, t, z, s, -s, z, t, z, z, -s, z, t],
    ))
}

/// Random symplectic `exp(Omega H)` with `H` symmetric, entries drawn from
/// a normal law scaled by `scale`.
pub fn random_symplectic<T: Real, R: Rng + ?Sized>(modes: usize, scale: f64, rng: &mut R) -> SymplecticMatrix<T> {
    let n = 2 * modes;
    let mut h = DMatrix::<T>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = rng.sample(StandardNormal);
            h[(i, j)] = T::lit(v * scale);
            h[(j, i)] = h[(i, j)];
        }
    }
    let generator = omega::<T>(modes) * h;
    SymplecticMatrix(generator.exp())
}

/// Random orthogonal symplectic (passive) transformation.
pub fn random_passive<T: Real, R: Rng + ?Sized>(modes: usize, rng: &mut R) -> SymplecticMatrix<T> {
    // Symmetric H commuting with Omega has 2x2 blocks [[a, b], [-b, a]] off the
    // diagonal and a I on it; Omega H is then antisymmetric and Hamiltonian.
    let mut h = DMatrix::<T>::zeros(2 * modes, 2 * modes);
    for j in 0..modes {
        let a: f64 = rng.sample(StandardNormal);
        h[(2 * j, 2 * j)] = T::lit(a);
        h[(2 * j + 1, 2 * j + 1)] = T::lit(a);
        for k in j + 1..modes {
            let a = T::lit(rng.sample::<f64, _>(StandardNormal));
            let b = T::lit(rng.sample::<f64, _>(StandardNormal));
            h[(2 * j, 2 * k)] = a;
            h[(2 * j + 1, 2 * k + 1)] = a;
            h[(2 * j, 2 * k + 1)] = b;
            h[(2 * j + 1, 2 * k)] = -b;
            h[(2 * k, 2 * j)] = a;
            h[(2 * k + 1, 2 * j + 1)] = a;
            h[(2 * k + 1, 2 * j)] = b;
            h[(2 * k, 2 * j + 1)] = -b;
        }
    }
    let generator = omega::<T>(modes) * h;
    SymplecticMatrix(generator.exp())
}

/// `G = S (+)_k nu_k I_2 S^T`.
#[derive(Clone, Debug)]
pub struct WilliamsonDecomp<T: Real> {
    pub s: SymplecticMatrix<T>,
    /// Symplectic eigenvalues, descending.
    pub nus: Vec<T>,
}

impl<T: Real> WilliamsonDecomp<T> {
    pub fn reconstruct(&self) -> DMatrix<T> {
        let d = DVector::from_iterator(2 * self.nus.len(), self.nus.iter().flat_map(|&v| [v, v]));
        self.s.as_matrix() * DMatrix::from_diagonal(&d) * self.s.as_matrix().transpose()
    }
}

/// Groups sorted values into contiguous clusters that agree to a relative
/// tolerance; `chunk` forces cluster boundaries onto multiples of it.
fn clusters<T: Real>(values: &[T], chunk: usize, rel_tol: f64) -> Vec<Range<usize>> {
    let tol = T::tol(rel_tol);
    let mut out: Vec<Range<usize>> = Vec::new();
    let mut start = 0;
    let mut i = chunk;
    while i < values.len() {
        let prev = values[i - 1];
        let cur = values[i];
        let scale = prev.abs().max(cur.abs()).max(T::one());
        if (cur - prev).abs() > tol * scale {
            out.push(start..i);
            start = i;
        }
        i += chunk;
    }
    out.push(start..values.len());
    out
}

/// Unit vector in the column span of `basis`, orthogonal to `chosen`, taken
/// as the normalized residual projection of the standard basis vector with
/// the largest such residual. Deterministic, and returns `e_j` itself when
/// `e_j` lies in the span.
fn pick_direction<T: Real>(basis: &DMatrix<T>, chosen: &[DVector<T>]) -> DVector<T> {
    let n = basis.nrows();
    let mut best: Option<(T, DVector<T>)> = None;
    for j in 0..n {
        let mut v = basis * basis.row(j).transpose();
        for c in chosen {
            let d = c.dot(&v);
            v -= c * d;
        }
        let norm = v.norm();
        let better = match &best {
            None => true,
            Some((b, _)) => norm > *b + T::lit(1e-9),
        };
        if better {
            best = Some((norm, v));
        }
    }
    let (_, v) = best.expect("nonempty basis");
    orthonormalize(v, chosen)
}

fn orthonormalize<T: Real>(mut v: DVector<T>, chosen: &[DVector<T>]) -> DVector<T> {
    for _ in 0..2 {
        for c in chosen {
            let d = c.dot(&v);
            v -= c * d;
        }
        let norm = v.norm();
        v /= norm;
    }
    v
}

/// Williamson normal form of a positive-definite covariance matrix.
///
/// Works with `K = G^{-1/2} Omega G^{-1/2}`: the eigenvalues of `K^T K`
/// are `1/nu_k^2` in degenerate pairs. An orthogonal `O` bringing `K` to
/// `(+)_k J / nu_k` gives `S = G^{1/2} O D^{-1/2}`. Degenerate subspaces
/// are resolved by deterministic Gram-Schmidt.
pub fn williamson<T: Real>(cov: &CovMatrix<T>) -> Result<WilliamsonDecomp<T>> {
    let g = cov.as_matrix();
    let modes = cov.modes();
    let (root, inv_root) = sqrt_and_inv_sqrt(g)?;
    let k = &inv_root * omega::<T>(modes) * &inv_root;
    let ktk = k.transpose() * &k;
    let (values, vectors) = sorted_eigen(&ktk);

    let mut o = DMatrix::<T>::zeros(2 * modes, 2 * modes);
    let mut nus = Vec::with_capacity(modes);
    let mut col = 0;
    for range in clusters(&values, 2, 1e-9) {
        let basis = vectors.columns(range.start, range.len()).into_owned();
        let mut local: Vec<DVector<T>> = Vec::new();
        for _ in 0..range.len() / 2 {
            let o1 = pick_direction(&basis, &local);
            let lambda = o1.dot(&(&ktk * &o1));
            let nu = T::one() / lambda.sqrt();
            let mut with_o1 = local.clone();
            with_o1.push(o1.clone());
            let o2 = orthonormalize(&k * &o1 * (-nu), &with_o1);
            o.set_column(col, &o1);
            o.set_column(col + 1, &o2);
            col += 2;
            nus.push(nu);
            local.push(o1);
            local.push(o2);
        }
    }
    let d = DVector::from_iterator(2 * modes, nus.iter().flat_map(|&v| {
        let w = T::one() / v.sqrt();
        [w, w]
    }));
    let s = root * o * DMatrix::from_diagonal(&d);
    Ok(WilliamsonDecomp {
        s: SymplecticMatrix(s),
        nus,
    })
}

/// `S = K1 (+)_k diag(e^{r_k}, e^{-r_k}) K2` with `K1, K2` passive.
#[derive(Clone, Debug)]
pub struct BlochMessiahDecomp<T: Real> {
    pub passive_out: SymplecticMatrix<T>,
    /// Nonnegative, descending.
    pub squeeze_params: Vec<T>,
    pub passive_in: SymplecticMatrix<T>,
}

impl<T: Real> BlochMessiahDecomp<T> {
    pub fn squeezing_matrix(&self) -> DMatrix<T> {
        let d = DVector::from_iterator(
            2 * self.squeeze_params.len(),
            self.squeeze_params.iter().flat_map(|&r| [r.exp(), (-r).exp()]),
        );
        DMatrix::from_diagonal(&d)
    }

    pub fn reconstruct(&self) -> DMatrix<T> {
        self.passive_out.as_matrix() * self.squeezing_matrix() * self.passive_in.as_matrix()
    }
}

/// Bloch-Messiah decomposition.
///
/// The eigenvectors `u_k` of `S S^T` with eigenvalues `e^{2 r_k} >= 1` and
/// their partners `-Omega u_k` form the columns of `K1`; then
/// `K2 = D^{-1} K1^T S`.
pub fn bloch_messiah<T: Real>(s: &SymplecticMatrix<T>) -> Result<BlochMessiahDecomp<T>> {
    let deviation = s.deviation();
    if !(deviation <= T::tol(SYMPLECTIC_TOL)) {
        return Err(Error::NotSymplectic {
            deviation: deviation.as_f64(),
        });
    }
    let m = s.as_matrix();
    let modes = s.modes();
    let w = omega::<T>(modes);
    let sst = m * m.transpose();
    let (mut values, vectors) = sorted_eigen(&sst);
    values.reverse();
    let vectors = DMatrix::from_fn(2 * modes, 2 * modes, |r, c| vectors[(r, 2 * modes - 1 - c)]);

    let mut chosen: Vec<DVector<T>> = Vec::new();
    let mut k1 = DMatrix::<T>::zeros(2 * modes, 2 * modes);
    let mut squeeze = Vec::with_capacity(modes);
    let mut mode = 0;
    for range in clusters(&values, 1, 1e-9) {
        if range.start >= modes {
            break;
        }
        let slots = range.end.min(modes) - range.start;
        let basis = vectors.columns(range.start, range.len()).into_owned();
        for _ in 0..slots {
            let u = pick_direction(&basis, &chosen);
            let partner = -(&w * &u);
            let stretch = u.dot(&(&sst * &u));
            squeeze.push((stretch.ln() * T::lit(0.5)).max(T::zero()));
            k1.set_column(2 * mode, &u);
            k1.set_column(2 * mode + 1, &partner);
            chosen.push(u);
            chosen.push(partner);
            mode += 1;
        }
    }
    if mode != modes {
        return Err(Error::NotSymplectic {
            deviation: deviation.as_f64(),
        });
    }
    let inv_d = DVector::from_iterator(2 * modes, squeeze.iter().flat_map(|&r| [(-r).exp(), r.exp()]));
    let k2 = DMatrix::from_diagonal(&inv_d) * k1.transpose() * m;
    Ok(BlochMessiahDecomp {
        passive_out: SymplecticMatrix(k1),
        squeeze_params: squeeze,
        passive_in: SymplecticMatrix(k2),
    })
}
