//! Log-negativity and PPT separability for bipartite Gaussian states.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{symplectic_eigenvalues, CovMatrix, PHYSICAL_TOL};
use crate::scalar::Real;
use crate::state::GaussianState;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipartiteSplit {
    alice: Vec<usize>,
    bob: Vec<usize>,
}

impl BipartiteSplit {
    /// Validates that the two sides are nonempty, disjoint and cover
    /// `0..modes`.
    pub fn new(alice: Vec<usize>, bob: Vec<usize>, modes: usize) -> Result<Self> {
        if alice.is_empty() || bob.is_empty() {
            return Err(Error::InvalidSplit("both parties must hold at least one mode".into()));
        }
        let mut seen = vec![false; modes];
        for &m in alice.iter().chain(&bob) {
            if m >= modes {
                return Err(Error::InvalidSplit(format!("mode {m} out of range for {modes} modes")));
            }
            if seen[m] {
                return Err(Error::InvalidSplit(format!("mode {m} assigned twice")));
            }
            seen[m] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidSplit("split does not cover every mode".into()));
        }
        Ok(Self { alice, bob })
    }

    /// Mode 0 against mode 1.
    pub fn one_by_one() -> Self {
        Self {
            alice: vec![0],
            bob: vec![1],
        }
    }

    pub fn alice(&self) -> &[usize] {
        &self.alice
    }

    pub fn bob(&self) -> &[usize] {
        &self.bob
    }

    pub fn modes(&self) -> usize {
        self.alice.len() + self.bob.len()
    }

    /// Werner-Wolf: PPT is sufficient for separability when one side holds
    /// a single mode.
    pub fn ppt_is_sufficient(&self) -> bool {
        self.alice.len() == 1 || self.bob.len() == 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementReport {
    /// Natural-log units.
    pub log_negativity: f64,
    #[serde(rename = "nu_tilde_min")]
    pub min_pt_symplectic_eigenvalue: f64,
    pub ppt: bool,
    /// False when `ppt == true` is only a necessary condition for
    /// separability (both parties hold several modes).
    #[serde(skip, default = "default_true")]
    pub ppt_sufficient: bool,
}

fn default_true() -> bool {
    true
}

/// Conjugation by `diag(1, -1)` on each of Bob's modes.
pub fn partial_transpose_cov<T: Real>(cov: &CovMatrix<T>, split: &BipartiteSplit) -> Result<CovMatrix<T>> {
    if split.modes() != cov.modes() {
        return Err(Error::InvalidSplit(format!(
            "split covers {} modes, state has {}",
            split.modes(),
            cov.modes()
        )));
    }
    let mut sign = vec![T::one(); 2 * cov.modes()];
    for &m in split.bob() {
        sign[2 * m + 1] = -T::one();
    }
    let g = cov.as_matrix();
    Ok(CovMatrix::symmetrized(DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| {
        sign[i] * g[(i, j)] * sign[j]
    })))
}

/// Symplectic eigenvalues of the partial transpose, descending.
pub fn pt_symplectic_eigenvalues<T: Real>(state: &GaussianState<T>, split: &BipartiteSplit) -> Result<Vec<T>> {
    let pt = partial_transpose_cov(state.cov(), split)?;
    symplectic_eigenvalues(pt.as_matrix())
}

/// `E_N = sum_k max(0, -ln nu~_k)`.
pub fn log_negativity<T: Real>(state: &GaussianState<T>, split: &BipartiteSplit) -> Result<EntanglementReport> {
    state.cov().check_physical()?;
    let nus = pt_symplectic_eigenvalues(state, split)?;
    let en = nus
        .iter()
        .map(|nu| (-nu.ln()).max(T::zero()))
        .fold(T::zero(), |a, b| a + b);
    let min = *nus.last().expect("nonempty");
    Ok(EntanglementReport {
        log_negativity: en.as_f64(),
        min_pt_symplectic_eigenvalue: min.as_f64(),
        ppt: min >= T::one() - T::tol(PHYSICAL_TOL),
        ppt_sufficient: split.ppt_is_sufficient(),
    })
}

/// Log-negativity computed without the physicality check, for hot loops
/// over states that are physical by construction.
pub(crate) fn log_negativity_value<T: Real>(cov: &DMatrix<T>, split: &BipartiteSplit) -> T {
    let mut sign = vec![T::one(); cov.nrows()];
    for &m in split.bob() {
        sign[2 * m + 1] = -T::one();
    }
    let pt = DMatrix::from_fn(cov.nrows(), cov.ncols(), |i, j| sign[i] * cov[(i, j)] * sign[j]);
    let pt = (&pt + pt.transpose()) * T::lit(0.5);
    match symplectic_eigenvalues(&pt) {
        Ok(nus) => nus
            .iter()
            .map(|nu| (-nu.ln()).max(T::zero()))
            .fold(T::zero(), |a, b| a + b),
        Err(_) => T::lit(f64::NAN),
    }
}

/// PPT test: true iff `min nu~ >= 1 - 1e-9`. Exact for 1 x N splits,
/// necessary-only otherwise (see [`EntanglementReport::ppt_sufficient`]).
pub fn ppt_separable<T: Real>(state: &GaussianState<T>, split: &BipartiteSplit) -> Result<bool> {
    Ok(log_negativity(state, split)?.ppt)
}
