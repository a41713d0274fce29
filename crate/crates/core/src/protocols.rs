//! Protocol engines.
//!
//! * [`run_fig1`]: deterministic implementation of a Gaussian CP map by
//!   Bell-measuring the input against the Choi state's input modes and
//!   undoing the outcome-dependent displacement on the outputs.
//! * [`canonicalize_pure_3mode`] and [`decompose_alice_map`]: the
//!   structure of a pure two-input, one-output local map, which reduces to a
//!   two-mode symplectic, a vacuum projection and a single-mode map.
//! * [`build_fig2`]: the two-copy distillation protocol. Each party applies
//!   a two-mode symplectic to its halves of both copies, heterodynes the
//!   second mode and displaces the remaining one.

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channels::{GaussianChannel, Port};
use crate::entanglement::{log_negativity, log_negativity_value, BipartiteSplit, EntanglementReport};
use crate::error::{Error, Result};
use crate::measurements::{bell_measure_pairs, condition, sample_outcome, DyneKind, DyneSpec};
use crate::phase::{select_block, transposition, CovMatrix};
use crate::scalar::Real;
use crate::state::{GaussianState, PURITY_TOL};
use crate::symplectic::{williamson, SymplecticMatrix, SYMPLECTIC_TOL};

/// One simulated Bell outcome of the deterministic scheme.
#[derive(Clone, Debug)]
pub struct Fig1Sample<T: Real> {
    /// `(x_d, p_d)` per input mode, concatenated.
    pub outcome: DVector<T>,
    /// Displacement subtracted from the outputs.
    pub correction: DVector<T>,
    pub corrected_output: GaussianState<T>,
}

#[derive(Clone, Debug)]
pub struct Fig1Run<T: Real> {
    pub channel: GaussianChannel<T>,
    pub input: GaussianState<T>,
    pub samples: Vec<Fig1Sample<T>>,
    /// Output of the channel computed in closed form.
    pub reference_output: GaussianState<T>,
    pub max_cov_deviation: T,
    pub max_mean_deviation: T,
}

impl<T: Real> Fig1Run<T> {
    /// Both deviations below `tol`.
    pub fn verified(&self, tol: f64) -> bool {
        self.max_cov_deviation <= T::lit(tol) && self.max_mean_deviation <= T::lit(tol)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Fig1Options {
    /// Multiplies the feed-forward gain; anything but 1 breaks the scheme
    /// and exists for negative controls.
    pub gain_scale: f64,
}

impl Default for Fig1Options {
    fn default() -> Self {
        Self { gain_scale: 1.0 }
    }
}

/// Simulates the deterministic scheme `n_samples` times.
///
/// For each sample the joint state `input (x) choi` is Bell-measured pair by
/// pair (input mode `k` against the Choi state's `k`-th input mode), the
/// outputs are conditioned on the sampled outcome, and the displacement
/// `C^T (A + R G R)^{-1} r_d` is subtracted.
pub fn run_fig1<T: Real>(
    channel: &GaussianChannel<T>,
    input: &GaussianState<T>,
    n_samples: usize,
    seed: u64,
    options: Fig1Options,
) -> Result<Fig1Run<T>> {
    let reference = channel.apply(input)?;
    let gain = channel.displacement_gain(input)? * T::lit(options.gain_scale);
    let n_in = input.modes();
    let joint = input.tensor(channel.choi());
    let pairs: Vec<(usize, usize)> = channel
        .input_modes()
        .iter()
        .enumerate()
        .map(|(k, &c)| (n_in + c, k))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n_samples);
    let mut max_cov = T::zero();
    let mut max_mean = T::zero();
    for _ in 0..n_samples {
        let rec = bell_measure_pairs(&joint, &pairs, rng.next_u64())?;
        let correction = &gain * &rec.outcome;
        let out = rec.conditioned_state.expect("Choi outputs stay unmeasured").displace(&(-&correction))?;
        max_cov = max_cov.max((out.cov().as_matrix() - reference.cov().as_matrix()).amax());
        max_mean = max_mean.max((out.mean().as_vector() - reference.mean().as_vector()).amax());
        samples.push(Fig1Sample {
            outcome: rec.outcome,
            correction,
            corrected_output: out,
        });
    }
    Ok(Fig1Run {
        channel: channel.clone(),
        input: input.clone(),
        samples,
        reference_output: reference,
        max_cov_deviation: max_cov,
        max_mean_deviation: max_mean,
    })
}

/// Normal form of a pure three-mode state split into two input modes and
/// one output mode, reached by local symplectics on the inputs and on the
/// output:
///
/// ```text
///  a  0  0  0  d1 0
///  0  a  0  0  0  d2
///  0  0  b  0  e1 0
///  0  0  0  b  e3 e2
///  d1 0  e1 e3 c  0
///  0  d2 0  e2 0  c
/// ```
///
/// Orientation: `a >= b`, `d1 >= |d2|`, `d1 >= 0`, `e1 >= 0`.
#[derive(Clone, Debug)]
pub struct ThreeModeCanonicalForm<T: Real> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d1: T,
    pub d2: T,
    pub e1: T,
    pub e2: T,
    pub e3: T,
    /// Acts on the two input modes, in the order given.
    pub input_symplectic: SymplecticMatrix<T>,
    pub output_symplectic: SymplecticMatrix<T>,
    /// Transformed covariance, modes ordered (input 1, input 2, output).
    pub canonical_cov: CovMatrix<T>,
}

impl<T: Real> ThreeModeCanonicalForm<T> {
    /// Largest deviation of `canonical_cov` from the sparsity and equality
    /// pattern of the normal form.
    pub fn pattern_residual(&self) -> T {
        let g = self.canonical_cov.as_matrix();
        let mut expect = DMatrix::<T>::zeros(6, 6);
        for (i, v) in [self.a, self.a, self.b, self.b, self.c, self.c].into_iter().enumerate() {
            expect[(i, i)] = v;
        }
        for (i, j, v) in [
            (0, 4, self.d1),
            (1, 5, self.d2),
            (2, 4, self.e1),
            (3, 5, self.e2),
            (3, 4, self.e3),
        ] {
            expect[(i, j)] = v;
            expect[(j, i)] = v;
        }
        (g - expect).amax()
    }
}

fn rotation<T: Real>(c: T, s: T) -> DMatrix<T> {
    DMatrix::from_row_slice(2, 2, &[c, s, -s, c])
}

/// Rotations `U, V` and sign `s` with `m = U diag(s1, s * s2) V^T`,
/// `s1 >= s2 >= 0`.
fn rotation_svd<T: Real>(m: &DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
    let scale = m.amax().max(T::one());
    let svd = m.clone().svd(true, true);
    let (mut u, mut vt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    let sv = svd.singular_values;
    let (s0, s1) = (sv[0], sv[1]);
    if (s0 - s1).abs() <= T::tol(1e-9) * scale {
        let det = m.determinant();
        if s0 <= T::tol(1e-12) * scale {
            return (DMatrix::identity(2, 2), DMatrix::identity(2, 2));
        }
        // m = s0 Q with Q orthogonal: take U = I and V^T = diag(1, sign det) Q.
        let sign = if det < T::zero() { -T::one() } else { T::one() };
        let q = m / s0;
        let mut vt = q.clone();
        vt.row_mut(1).scale_mut(sign);
        return (DMatrix::identity(2, 2), vt.transpose());
    }
    if s0 < s1 {
        u.swap_columns(0, 1);
        vt.swap_rows(0, 1);
    }
    if u.determinant() < T::zero() {
        u.column_mut(1).neg_mut();
    }
    let mut v = vt.transpose();
    if v.determinant() < T::zero() {
        v.column_mut(1).neg_mut();
    }
    (u, v)
}

/// Brings a pure three-mode state to the normal form of
/// [`ThreeModeCanonicalForm`].
///
/// Williamson on the input marginal diagonalizes it to `diag(a, a, b, b)`
/// with no input-input correlations; Williamson on the output marginal
/// gives `c I`; the remaining phase rotations diagonalize the first input's
/// correlation block and zero one entry of the second's.
pub fn canonicalize_pure_3mode<T: Real>(
    state: &GaussianState<T>,
    input_modes: [usize; 2],
    output_mode: usize,
) -> Result<ThreeModeCanonicalForm<T>> {
    if state.modes() != 3 {
        return Err(Error::NotThreeMode(state.modes()));
    }
    for nu in state.symplectic_eigenvalues() {
        if (nu - T::one()).abs() > T::tol(PURITY_TOL) {
            return Err(Error::NotPure { value: nu.as_f64() });
        }
    }
    let ordered = state.permute(&[input_modes[0], input_modes[1], output_mode])?;
    let g = ordered.cov().as_matrix();
    let w_in = williamson(&CovMatrix::symmetrized(select_block(g, &[0, 1], &[0, 1])))?;
    let w_out = williamson(&CovMatrix::symmetrized(select_block(g, &[2], &[2])))?;
    let t_in0 = w_in.s.inverse();
    let t_out0 = w_out.s.inverse();
    let t0 = t_in0.direct_sum(&t_out0);
    let g1 = t0.as_matrix() * g * t0.as_matrix().transpose();

    let m1 = g1.view((0, 4), (2, 2)).into_owned();
    let m2 = g1.view((2, 4), (2, 2)).into_owned();
    let (u, v) = rotation_svd(&m1);
    let m2v = &m2 * &v;
    let (m12, m22) = (m2v[(0, 1)], m2v[(1, 1)]);
    let norm = (m12 * m12 + m22 * m22).sqrt();
    let mut r2 = if norm > T::tol(1e-14) * g1.amax().max(T::one()) {
        rotation(m22 / norm, -m12 / norm)
    } else {
        DMatrix::identity(2, 2)
    };
    if (&r2 * &m2v)[(0, 0)] < T::zero() {
        r2 = -r2;
    }

    let mut local_in = DMatrix::<T>::zeros(4, 4);
    local_in.view_mut((0, 0), (2, 2)).copy_from(&u.transpose());
    local_in.view_mut((2, 2), (2, 2)).copy_from(&r2);
    let t_in = SymplecticMatrix::from_raw(local_in * t_in0.as_matrix());
    let t_out = SymplecticMatrix::from_raw(v.transpose() * t_out0.as_matrix());
    let t = t_in.direct_sum(&t_out);
    let gc = CovMatrix::symmetrized(t.as_matrix() * g * t.as_matrix().transpose());
    let m = gc.as_matrix();
    let half = T::lit(0.5);
    Ok(ThreeModeCanonicalForm {
        a: (m[(0, 0)] + m[(1, 1)]) * half,
        b: (m[(2, 2)] + m[(3, 3)]) * half,
        c: (m[(4, 4)] + m[(5, 5)]) * half,
        d1: m[(0, 4)],
        d2: m[(1, 5)],
        e1: m[(2, 4)],
        e2: m[(3, 5)],
        e3: m[(3, 4)],
        input_symplectic: t_in,
        output_symplectic: t_out,
        canonical_cov: gc,
    })
}

/// Projects `mode` onto the vacuum (a coherent-state projection at the
/// origin), returning the remaining modes.
pub fn project_vacuum<T: Real>(state: &GaussianState<T>, mode: usize) -> Result<GaussianState<T>> {
    let spec = DyneSpec {
        measured_modes: vec![mode],
        kind: DyneKind::General(DMatrix::identity(2, 2)),
    };
    condition(state, &spec, &DVector::zeros(2))
}

/// A pure two-input, one-output map written as: symplectic on the inputs,
/// vacuum projection of the second input, single-mode map on the first.
#[derive(Clone, Debug)]
pub struct AliceMapDecomposition<T: Real> {
    /// Symplectic acting on the Choi state's input modes (`S_i`).
    pub choi_input_symplectic: SymplecticMatrix<T>,
    /// The same transformation seen by the input state:
    /// `R S_i^{-1} R`, with `R` the phase-space transposition.
    pub input_symplectic: SymplecticMatrix<T>,
    /// One-input, one-output map applied after the vacuum projection.
    pub residual: GaussianChannel<T>,
    pub canonical: ThreeModeCanonicalForm<T>,
}

impl<T: Real> AliceMapDecomposition<T> {
    /// Runs the three-step replay on a two-mode input.
    pub fn replay(&self, state: &GaussianState<T>) -> Result<GaussianState<T>> {
        let rotated = state.apply_symplectic(&self.input_symplectic)?;
        let projected = project_vacuum(&rotated, 1)?;
        self.residual.apply(&projected)
    }
}

pub fn decompose_alice_map<T: Real>(chi: &GaussianChannel<T>) -> Result<AliceMapDecomposition<T>> {
    if chi.n_in() != 2 || chi.n_out() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: chi.choi().modes(),
        });
    }
    let ins = chi.input_modes();
    let out = chi.output_modes()[0];
    let canonical = canonicalize_pure_3mode(chi.choi(), [ins[0], ins[1]], out)?;
    let t_in = canonical.input_symplectic.as_matrix();
    let r = transposition::<T>(2);
    let input_symplectic = SymplecticMatrix::new(&r * t_in * &r)?;
    let choi_input_symplectic = canonical.input_symplectic.inverse();

    let gc = canonical.canonical_cov.as_matrix();
    let pair = select_block(gc, &[0, 2], &[0, 2]);
    let undo = SymplecticMatrix::identity(1).direct_sum(&canonical.output_symplectic.inverse());
    let residual_cov = undo.as_matrix() * pair * undo.as_matrix().transpose();
    let residual = GaussianChannel::new(
        vec![Port::In, Port::Out],
        GaussianState::centered(CovMatrix::symmetrized(residual_cov))?,
    )?;
    Ok(AliceMapDecomposition {
        choi_input_symplectic,
        input_symplectic,
        residual,
        canonical,
    })
}

/// How the two heterodyne outcomes of the protocol are chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum HeterodyneOutcome<T: Real> {
    /// Both outcomes at the origin.
    Zero,
    /// `(x, p)` for A2 followed by B2.
    Forced(DVector<T>),
    Sampled { seed: u64 },
}

#[derive(Clone, Debug)]
pub struct Fig2Protocol<T: Real> {
    pub s_a: SymplecticMatrix<T>,
    pub s_b: SymplecticMatrix<T>,
    pub input_pair: [GaussianState<T>; 2],
    /// Heterodyne outcomes on A2 and B2.
    pub outcome: DVector<T>,
    /// Displacement removed from (A1, B1) after communicating the outcomes.
    pub correction: DVector<T>,
    pub output: GaussianState<T>,
    pub report: EntanglementReport,
}

/// Joint four-mode state ordered `(A1, A2, B1, B2)` from two copies whose
/// mode 0 belongs to Alice and mode 1 to Bob.
pub fn assemble_copies<T: Real>(copy1: &GaussianState<T>, copy2: &GaussianState<T>) -> Result<GaussianState<T>> {
    for c in [copy1, copy2] {
        if c.modes() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: c.modes(),
            });
        }
    }
    copy1.tensor(copy2).permute(&[0, 2, 1, 3])
}

fn check_two_mode_symplectic<T: Real>(s: &SymplecticMatrix<T>) -> Result<()> {
    if s.modes() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: s.modes(),
        });
    }
    let dev = s.deviation();
    if !(dev <= T::tol(SYMPLECTIC_TOL)) {
        return Err(Error::NotSymplectic { deviation: dev.as_f64() });
    }
    Ok(())
}

pub fn build_fig2<T: Real>(
    s_a: &SymplecticMatrix<T>,
    s_b: &SymplecticMatrix<T>,
    copy1: &GaussianState<T>,
    copy2: &GaussianState<T>,
    outcomes: &HeterodyneOutcome<T>,
) -> Result<Fig2Protocol<T>> {
    check_two_mode_symplectic(s_a)?;
    check_two_mode_symplectic(s_b)?;
    let joint = assemble_copies(copy1, copy2)?;
    let local = s_a.direct_sum(s_b);
    let transformed = joint.apply_symplectic(&local)?;
    let spec = DyneSpec::heterodyne(&[1, 3]);
    let (outcome, conditioned) = match outcomes {
        HeterodyneOutcome::Zero => {
            let o = DVector::zeros(4);
            let st = condition(&transformed, &spec, &o)?;
            (o, st)
        }
        HeterodyneOutcome::Forced(o) => (o.clone(), condition(&transformed, &spec, o)?),
        HeterodyneOutcome::Sampled { seed } => {
            let rec = sample_outcome(&transformed, &spec, *seed)?;
            (rec.outcome, rec.conditioned_state.expect("A1 and B1 stay unmeasured"))
        }
    };
    let baseline = condition(&transformed, &spec, &DVector::zeros(4))?;
    let correction = conditioned.mean().as_vector() - baseline.mean().as_vector();
    let output = conditioned.displace(&(-&correction))?;
    let report = log_negativity(&output, &BipartiteSplit::one_by_one())?;
    Ok(Fig2Protocol {
        s_a: s_a.clone(),
        s_b: s_b.clone(),
        input_pair: [copy1.clone(), copy2.clone()],
        outcome,
        correction,
        output,
        report,
    })
}

/// Log-negativity of the protocol output for many symplectic pairs on
/// fixed copies, skipping validation.
#[derive(Clone, Debug)]
pub struct Fig2Evaluator<T: Real> {
    joint_cov: DMatrix<T>,
    split: BipartiteSplit,
}

impl<T: Real> Fig2Evaluator<T> {
    pub fn new(copy1: &GaussianState<T>, copy2: &GaussianState<T>) -> Result<Self> {
        let joint = assemble_copies(copy1, copy2)?;
        Ok(Self {
            joint_cov: joint.cov().as_matrix().clone(),
            split: BipartiteSplit::one_by_one(),
        })
    }

    /// Output covariance on (A1, B1); outcome-independent.
    pub fn output_cov(&self, s_a: &DMatrix<T>, s_b: &DMatrix<T>) -> DMatrix<T> {
        let mut s = DMatrix::<T>::zeros(8, 8);
        s.view_mut((0, 0), (4, 4)).copy_from(s_a);
        s.view_mut((4, 4), (4, 4)).copy_from(s_b);
        let g = &s * &self.joint_cov * s.transpose();
        let kept = [0usize, 1, 4, 5];
        let meas = [2usize, 3, 6, 7];
        let ga = DMatrix::from_fn(4, 4, |i, j| g[(kept[i], kept[j])]);
        let gab = DMatrix::from_fn(4, 4, |i, j| g[(kept[i], meas[j])]);
        let gb = DMatrix::from_fn(4, 4, |i, j| g[(meas[i], meas[j])]) + DMatrix::identity(4, 4);
        match gb.cholesky() {
            Some(ch) => &ga - &gab * ch.solve(&gab.transpose()),
            None => DMatrix::from_element(4, 4, T::lit(f64::NAN)),
        }
    }

    pub fn log_negativity(&self, s_a: &DMatrix<T>, s_b: &DMatrix<T>) -> T {
        let out = self.output_cov(s_a, s_b);
        log_negativity_value(&out, &self.split)
    }
}
