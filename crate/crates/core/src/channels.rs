//! Gaussian CP maps represented by their Choi covariance matrix.
//!
//! A channel is a Gaussian state on input and output modes with covariance
//! `[[A, C], [C^T, B]]`. Feeding an input with covariance `G` produces
//! `B - C^T (A + R G R)^{-1} C`, and a Bell-measurement outcome `r_d`
//! displaces the output by `C^T (A + R G R)^{-1} r_d`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{select_block, select_entries, solve_spd, sorted_eigen, transposition_diag, CovMatrix};
use crate::scalar::Real;
use crate::state::{complement, tmsv, vacuum, validate_modes, GaussianState};
use crate::symplectic::{beamsplitter, random_symplectic, SymplecticMatrix};

/// Role of a Choi mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Port {
    In,
    Out,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianChannel<T: Real> {
    partition: Vec<Port>,
    choi: GaussianState<T>,
}

/// Input-input, output-output and input-output Choi blocks.
#[derive(Clone, Debug)]
pub struct ChoiBlocks<T: Real> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
}

impl<T: Real> GaussianChannel<T> {
    pub fn new(partition: Vec<Port>, choi: GaussianState<T>) -> Result<Self> {
        if partition.len() != choi.modes() {
            return Err(Error::DimensionMismatch {
                expected: choi.modes(),
                found: partition.len(),
            });
        }
        if !partition.contains(&Port::In) || !partition.contains(&Port::Out) {
            return Err(Error::InvalidModes(
                "a channel needs at least one input and one output mode".into(),
            ));
        }
        Ok(Self { partition, choi })
    }

    /// Channel from blocks, with inputs listed before outputs.
    pub fn from_blocks(a: DMatrix<T>, b: DMatrix<T>, c: DMatrix<T>) -> Result<Self> {
        let (ni, no) = (a.nrows(), b.nrows());
        if c.nrows() != ni || c.ncols() != no {
            return Err(Error::DimensionMismatch {
                expected: ni * no,
                found: c.nrows() * c.ncols(),
            });
        }
        let mut g = DMatrix::zeros(ni + no, ni + no);
        g.view_mut((0, 0), (ni, ni)).copy_from(&a);
        g.view_mut((ni, ni), (no, no)).copy_from(&b);
        g.view_mut((0, ni), (ni, no)).copy_from(&c);
        g.view_mut((ni, 0), (no, ni)).copy_from(&c.transpose());
        let choi = GaussianState::centered(CovMatrix::new(g)?)?;
        let mut partition = vec![Port::In; ni / 2];
        partition.extend(std::iter::repeat_n(Port::Out, no / 2));
        Self::new(partition, choi)
    }

    pub fn partition(&self) -> &[Port] {
        &self.partition
    }

    pub fn choi(&self) -> &GaussianState<T> {
        &self.choi
    }

    pub fn n_in(&self) -> usize {
        self.input_modes().len()
    }

    pub fn n_out(&self) -> usize {
        self.output_modes().len()
    }

    /// Choi-mode indices of the inputs, in order.
    pub fn input_modes(&self) -> Vec<usize> {
        self.modes_with(Port::In)
    }

    /// Choi-mode indices of the outputs, in order.
    pub fn output_modes(&self) -> Vec<usize> {
        self.modes_with(Port::Out)
    }

    fn modes_with(&self, port: Port) -> Vec<usize> {
        self.partition
            .iter()
            .enumerate()
            .filter_map(|(i, p)| (*p == port).then_some(i))
            .collect()
    }

    pub fn blocks(&self) -> ChoiBlocks<T> {
        let (ins, outs) = (self.input_modes(), self.output_modes());
        let g = self.choi.cov().as_matrix();
        ChoiBlocks {
            a: select_block(g, &ins, &ins),
            b: select_block(g, &outs, &outs),
            c: select_block(g, &ins, &outs),
        }
    }

    /// Replaces the Choi displacement. Displacements are local and do not
    /// change any entanglement figure.
    pub fn with_choi_mean(&self, mean: DVector<T>) -> Result<Self> {
        Ok(Self {
            partition: self.partition.clone(),
            choi: self.choi.with_mean(mean)?,
        })
    }

    /// `A + R G R` for an input covariance `G`.
    fn conditioning_matrix(&self, a: &DMatrix<T>, input_cov: &DMatrix<T>) -> DMatrix<T> {
        let r = transposition_diag::<T>(input_cov.nrows() / 2);
        let rgr = DMatrix::from_fn(input_cov.nrows(), input_cov.ncols(), |i, j| r[i] * input_cov[(i, j)] * r[j]);
        a + rgr
    }

    fn check_input(&self, state: &GaussianState<T>) -> Result<()> {
        if state.modes() != self.n_in() {
            return Err(Error::DimensionMismatch {
                expected: self.n_in(),
                found: state.modes(),
            });
        }
        Ok(())
    }

    /// Output state for an input on exactly the channel's input modes.
    pub fn apply(&self, state: &GaussianState<T>) -> Result<GaussianState<T>> {
        self.check_input(state)?;
        let modes: Vec<usize> = (0..state.modes()).collect();
        self.apply_on_modes(state, &modes)
    }

    /// Applies the channel to `modes` of a larger state, leaving the other
    /// modes as spectators.
    ///
    /// When the channel has as many outputs as inputs, outputs take the
    /// place of the acted-on modes; otherwise outputs come first, followed
    /// by the spectators in their original order.
    pub fn apply_on_modes(&self, state: &GaussianState<T>, modes: &[usize]) -> Result<GaussianState<T>> {
        if modes.len() != self.n_in() {
            return Err(Error::DimensionMismatch {
                expected: self.n_in(),
                found: modes.len(),
            });
        }
        validate_modes(modes, state.modes())?;
        let spect = complement(modes, state.modes());
        let ChoiBlocks { a, b, c } = self.blocks();
        let g = state.cov().as_matrix();
        let d = state.mean().as_vector();
        let g_tt = select_block(g, modes, modes);
        let g_te = select_block(g, modes, &spect);
        let g_ee = select_block(g, &spect, &spect);
        let r = transposition_diag::<T>(modes.len());

        let cond = self.conditioning_matrix(&a, &g_tt);
        // Cross-covariance of the Bell observables m = r_c - R r_T with the
        // spectators is -R G_TE; with the outputs it is C.
        let r_gte = DMatrix::from_fn(g_te.nrows(), g_te.ncols(), |i, j| r[i] * g_te[(i, j)]);
        let ncols = c.ncols() + r_gte.ncols() + 1;
        let nin = c.nrows();
        let mut rhs = DMatrix::zeros(nin, ncols);
        rhs.view_mut((0, 0), (nin, c.ncols())).copy_from(&c);
        rhs.view_mut((0, c.ncols()), (nin, r_gte.ncols())).copy_from(&r_gte);
        let choi_mean = self.choi.mean().as_vector();
        let d_c = select_entries(choi_mean, &self.input_modes());
        let d_o = select_entries(choi_mean, &self.output_modes());
        let d_t = select_entries(d, modes);
        let offset = d_t.component_mul(&r) - &d_c;
        rhs.set_column(ncols - 1, &offset);
        let sol = solve_spd(&cond, &rhs)?;
        let s_c = sol.columns(0, c.ncols()).into_owned();
        let s_e = sol.columns(c.ncols(), r_gte.ncols()).into_owned();
        let s_off = sol.column(ncols - 1).into_owned();

        let oo = &b - c.transpose() * &s_c;
        let oe = c.transpose() * &s_e;
        let ee = &g_ee - r_gte.transpose() * &s_e;
        let mean_o = &d_o + c.transpose() * &s_off;
        let mean_e = select_entries(d, &spect) - r_gte.transpose() * &s_off;

        let no = oo.nrows();
        let ne = ee.nrows();
        let mut cov = DMatrix::zeros(no + ne, no + ne);
        cov.view_mut((0, 0), (no, no)).copy_from(&oo);
        cov.view_mut((0, no), (no, ne)).copy_from(&oe);
        cov.view_mut((no, 0), (ne, no)).copy_from(&oe.transpose());
        cov.view_mut((no, no), (ne, ne)).copy_from(&ee);
        let mut mean = DVector::zeros(no + ne);
        mean.rows_mut(0, no).copy_from(&mean_o);
        mean.rows_mut(no, ne).copy_from(&mean_e);
        let out = GaussianState::from_parts(mean, cov);

        if self.n_in() == self.n_out() && !spect.is_empty() {
            // Output k sits at the position of acted mode k.
            let total = state.modes();
            let mut slot = vec![0usize; total];
            for (k, &m) in modes.iter().enumerate() {
                slot[m] = k;
            }
            for (k, &m) in spect.iter().enumerate() {
                slot[m] = self.n_out() + k;
            }
            return out.permute(&slot);
        }
        Ok(out)
    }

    /// `C^T (A + R G R)^{-1}`, the map from Bell outcomes to output
    /// displacement.
    pub fn displacement_gain(&self, state: &GaussianState<T>) -> Result<DMatrix<T>> {
        self.check_input(state)?;
        let ChoiBlocks { a, c, .. } = self.blocks();
        let cond = self.conditioning_matrix(&a, state.cov().as_matrix());
        Ok(solve_spd(&cond, &c)?.transpose())
    }

    /// Output displacement induced by the Bell outcome `r_d`.
    pub fn conditional_displacement(&self, state: &GaussianState<T>, r_d: &DVector<T>) -> Result<DVector<T>> {
        if r_d.len() != 2 * self.n_in() {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.n_in(),
                found: r_d.len(),
            });
        }
        Ok(self.displacement_gain(state)? * r_d)
    }
}

/// Identity-channel approximation: a product of `n` two-mode squeezed
/// vacua with squeezing `r_approx`, the first member of each pair serving
/// as input.
pub fn choi_from_truncated_epr<T: Real>(n: usize, r_approx: T) -> Result<GaussianChannel<T>> {
    if n == 0 {
        return Err(Error::Dimension("channel needs at least one mode".into()));
    }
    if !(r_approx > T::zero()) {
        return Err(Error::ParamOutOfRange(format!("approximation squeezing {r_approx} must be positive")));
    }
    let pair = tmsv(r_approx);
    let mut choi = pair.clone();
    for _ in 1..n {
        choi = choi.tensor(&pair);
    }
    let partition = (0..n).flat_map(|_| [Port::In, Port::Out]).collect();
    GaussianChannel::new(partition, choi)
}

/// Noiseless filter whose Choi state is `tmsv(r)`: maps `tmsv(s)` to
/// `tmsv(s')` with `tanh s' = tanh s tanh r`.
pub fn filter<T: Real>(r: T) -> Result<GaussianChannel<T>> {
    choi_from_truncated_epr(1, r)
}

/// Attenuation with transmittance `eta` into a thermal environment with
/// symplectic eigenvalue `env_nu`, built on an identity approximation of
/// squeezing `r_approx`.
pub fn attenuation<T: Real>(eta: T, env_nu: T, r_approx: T) -> Result<GaussianChannel<T>> {
    let base = choi_from_truncated_epr(1, r_approx)?;
    let env = crate::state::thermal(&[env_nu])?;
    let joint = base.choi().tensor(&env);
    let mixed = joint.apply_symplectic_on(&beamsplitter(eta)?, &[1, 2])?;
    let choi = mixed.partial_trace(&[0, 1])?;
    GaussianChannel::new(vec![Port::In, Port::Out], choi)
}

/// Channel with `C = 0`: discards its `n_in` inputs and prepares `output`.
pub fn discard_and_replace<T: Real>(n_in: usize, output: &GaussianState<T>) -> Result<GaussianChannel<T>> {
    let choi = vacuum::<T>(n_in)?.tensor(output);
    let mut partition = vec![Port::In; n_in];
    partition.extend(std::iter::repeat_n(Port::Out, output.modes()));
    GaussianChannel::new(partition, choi)
}

/// Parallel composition; inputs and outputs of `a` precede those of `b`.
pub fn tensor_channels<T: Real>(a: &GaussianChannel<T>, b: &GaussianChannel<T>) -> GaussianChannel<T> {
    let mut partition = a.partition.clone();
    partition.extend_from_slice(&b.partition);
    GaussianChannel {
        partition,
        choi: a.choi.tensor(&b.choi),
    }
}

/// Constructive separable Choi state `(gamma_A (+) gamma_B) + Y`.
#[derive(Clone, Debug)]
pub struct LoccChannelSpec<T: Real> {
    pub partition: Vec<Port>,
    pub alice_modes: Vec<usize>,
    pub bob_modes: Vec<usize>,
    pub gamma_a: DMatrix<T>,
    pub gamma_b: DMatrix<T>,
    /// Classical correlation matrix, positive semidefinite.
    pub noise: DMatrix<T>,
}

/// Eigenvalue floor for the classical noise matrix.
pub const WITNESS_PSD_FLOOR: f64 = -1e-10;

pub fn make_separable_channel<T: Real>(spec: &LoccChannelSpec<T>) -> Result<GaussianChannel<T>> {
    let total = spec.partition.len();
    let mut all: Vec<usize> = spec.alice_modes.iter().chain(&spec.bob_modes).copied().collect();
    validate_modes(&all, total).map_err(|e| Error::NotPhysicalWitness(e.to_string()))?;
    all.sort_unstable();
    if all.len() != total || spec.alice_modes.is_empty() || spec.bob_modes.is_empty() {
        return Err(Error::NotPhysicalWitness(
            "Alice and Bob must each hold modes and together cover the Choi state".into(),
        ));
    }
    let check_local = |name: &str, g: &DMatrix<T>, modes: &[usize]| -> Result<()> {
        if g.nrows() != 2 * modes.len() || !g.is_square() {
            return Err(Error::NotPhysicalWitness(format!(
                "gamma_{name} must be {0}x{0}",
                2 * modes.len()
            )));
        }
        let cov = CovMatrix::new(g.clone()).map_err(|e| Error::NotPhysicalWitness(format!("gamma_{name}: {e}")))?;
        cov.check_physical()
            .map_err(|e| Error::NotPhysicalWitness(format!("gamma_{name}: {e}")))
    };
    check_local("A", &spec.gamma_a, &spec.alice_modes)?;
    check_local("B", &spec.gamma_b, &spec.bob_modes)?;
    if spec.noise.nrows() != 2 * total || !spec.noise.is_square() {
        return Err(Error::NotPhysicalWitness(format!("Y must be {0}x{0}", 2 * total)));
    }
    let y = CovMatrix::new(spec.noise.clone()).map_err(|e| Error::NotPhysicalWitness(format!("Y: {e}")))?;
    let (eigs, _) = sorted_eigen(y.as_matrix());
    if eigs[0] < T::lit(WITNESS_PSD_FLOOR) {
        return Err(Error::NotPhysicalWitness(format!(
            "Y has negative eigenvalue {}",
            eigs[0]
        )));
    }

    let mut g = y.into_inner();
    for (block, modes) in [(&spec.gamma_a, &spec.alice_modes), (&spec.gamma_b, &spec.bob_modes)] {
        let idx = crate::phase::quad_indices(modes);
        for (i, &gi) in idx.iter().enumerate() {
            for (j, &gj) in idx.iter().enumerate() {
                g[(gi, gj)] += block[(i, j)];
            }
        }
    }
    let choi = GaussianState::centered(CovMatrix::new(g)?)?;
    GaussianChannel::new(spec.partition.clone(), choi)
}

/// Modes held by one party of a random LOCC channel.
#[derive(Clone, Copy, Debug)]
pub struct PartyPorts {
    pub n_in: usize,
    pub n_out: usize,
}

/// Random witness: each party holds a random local state (random symplectic
/// on a thermal state with eigenvalues in `[1, 1 + thermal_spread]`), plus
/// classical noise `Y = noise_scale * G G^T`. Alice's Choi modes come
/// first, inputs before outputs within each party.
pub fn random_locc_spec<T: Real, R: Rng + ?Sized>(
    alice: PartyPorts,
    bob: PartyPorts,
    squeeze_scale: f64,
    thermal_spread: f64,
    noise_scale: f64,
    rng: &mut R,
) -> LoccChannelSpec<T> {
    let local = |p: PartyPorts, rng: &mut R| -> DMatrix<T> {
        let n = p.n_in + p.n_out;
        let s: SymplecticMatrix<T> = random_symplectic(n, squeeze_scale, rng);
        let d = DVector::from_iterator(
            2 * n,
            (0..n).flat_map(|_| {
                let nu = T::lit(1.0 + thermal_spread * rng.random::<f64>());
                [nu, nu]
            }).collect::<Vec<_>>(),
        );
        s.as_matrix() * DMatrix::from_diagonal(&d) * s.as_matrix().transpose()
    };
    let gamma_a = local(alice, rng);
    let gamma_b = local(bob, rng);
    let na = alice.n_in + alice.n_out;
    let nb = bob.n_in + bob.n_out;
    let total = 2 * (na + nb);
    let gm = DMatrix::<T>::from_fn(total, total, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)));
    let noise = (&gm * gm.transpose()) * T::lit(noise_scale / total as f64);
    let noise = (&noise + noise.transpose()) * T::lit(0.5);

    let mut partition = vec![Port::In; alice.n_in];
    partition.extend(std::iter::repeat_n(Port::Out, alice.n_out));
    partition.extend(std::iter::repeat_n(Port::In, bob.n_in));
    partition.extend(std::iter::repeat_n(Port::Out, bob.n_out));
    LoccChannelSpec {
        partition,
        alice_modes: (0..na).collect(),
        bob_modes: (na..na + nb).collect(),
        gamma_a,
        gamma_b,
        noise,
    }
}
