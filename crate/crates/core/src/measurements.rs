//! Conditional Gaussian states after general-dyne measurements.
//!
//! Every measurement here is linear: observables `m = M r_b` on the measured
//! block `b`, read out with added Gaussian noise of covariance `N` (in the
//! doubled convention). Heterodyne is `M = I, N = I`; ideal homodyne selects
//! one quadrature with `N = 0`; a general dyne projecting onto a Gaussian
//! state of covariance `G_m` uses `N = G_m`. Conditioning on outcome `m`:
//!
//! ```text
//! G' = G_a - G_ab M^T (M G_b M^T + N)^{-1} M G_ba
//! d' = d_a + G_ab M^T (M G_b M^T + N)^{-1} (m - M d_b)
//! ```
//!
//! Outcomes are distributed as `N(M d_b, (M G_b M^T + N) / 2)`; the factor
//! one half undoes the doubling in the covariance convention.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::phase::{quad_indices, select_block, select_entries, sorted_eigen, CovMatrix};
use crate::scalar::Real;
use crate::state::{complement, validate_modes, GaussianState};
use crate::symplectic::beamsplitter;

/// Variance below which a measured quadrature is treated as degenerate.
pub const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum DyneKind<T: Real> {
    /// Eight-port homodyne: projection onto coherent states.
    Heterodyne,
    HomodyneX,
    HomodyneP,
    /// Projection onto displaced copies of a Gaussian state with this
    /// covariance (one block over all measured modes).
    General(DMatrix<T>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DyneSpec<T: Real> {
    pub measured_modes: Vec<usize>,
    pub kind: DyneKind<T>,
}

impl<T: Real> DyneSpec<T> {
    pub fn heterodyne(modes: &[usize]) -> Self {
        Self {
            measured_modes: modes.to_vec(),
            kind: DyneKind::Heterodyne,
        }
    }

    pub fn homodyne_x(modes: &[usize]) -> Self {
        Self {
            measured_modes: modes.to_vec(),
            kind: DyneKind::HomodyneX,
        }
    }

    pub fn homodyne_p(modes: &[usize]) -> Self {
        Self {
            measured_modes: modes.to_vec(),
            kind: DyneKind::HomodyneP,
        }
    }

    /// Number of real outcomes.
    pub fn outcome_len(&self) -> usize {
        match self.kind {
            DyneKind::HomodyneX | DyneKind::HomodyneP => self.measured_modes.len(),
            _ => 2 * self.measured_modes.len(),
        }
    }

    fn linear(&self) -> Result<LinearMeasurement<T>> {
        let k = self.measured_modes.len();
        let (map, noise) = match &self.kind {
            DyneKind::Heterodyne => (DMatrix::identity(2 * k, 2 * k), DMatrix::identity(2 * k, 2 * k)),
            DyneKind::HomodyneX | DyneKind::HomodyneP => {
                let off = usize::from(self.kind == DyneKind::HomodyneP);
                let mut m = DMatrix::zeros(k, 2 * k);
                for i in 0..k {
                    m[(i, 2 * i + off)] = T::one();
                }
                (m, DMatrix::zeros(k, k))
            }
            DyneKind::General(gm) => {
                if gm.nrows() != 2 * k || !gm.is_square() {
                    return Err(Error::DimensionMismatch {
                        expected: 2 * k,
                        found: gm.nrows(),
                    });
                }
                CovMatrix::new(gm.clone())?.check_physical()?;
                (DMatrix::identity(2 * k, 2 * k), gm.clone())
            }
        };
        Ok(LinearMeasurement {
            measured_modes: self.measured_modes.clone(),
            map,
            noise,
        })
    }
}

/// Observables `m = map * r_b` read with noise covariance `noise`.
#[derive(Clone, Debug)]
struct LinearMeasurement<T: Real> {
    measured_modes: Vec<usize>,
    map: DMatrix<T>,
    noise: DMatrix<T>,
}

struct Conditioner<T: Real> {
    /// `G_ab M^T Sigma^{-1}`.
    gain: DMatrix<T>,
    cov: DMatrix<T>,
    prior_mean_a: DVector<T>,
    prior_mean_m: DVector<T>,
    outcome_cov: DMatrix<T>,
}

impl<T: Real> Conditioner<T> {
    fn new(state: &GaussianState<T>, meas: &LinearMeasurement<T>) -> Result<Self> {
        let total = state.modes();
        if meas.measured_modes.is_empty() {
            return Err(Error::EmptyKeepSet);
        }
        validate_modes(&meas.measured_modes, total)?;
        let kept = complement(&meas.measured_modes, total);
        let g = state.cov().as_matrix();
        let d = state.mean().as_vector();
        let g_a = select_block(g, &kept, &kept);
        let g_ab = select_block(g, &kept, &meas.measured_modes);
        let g_b = select_block(g, &meas.measured_modes, &meas.measured_modes);
        let m = &meas.map;
        let sigma = m * &g_b * m.transpose() + &meas.noise;
        let sigma = (&sigma + sigma.transpose()) * T::lit(0.5);
        let (eigs, _) = sorted_eigen(&sigma);
        if eigs[0] < T::tol(DEGENERATE_TOL) {
            return Err(Error::DegenerateQuadrature {
                variance: eigs[0].as_f64(),
            });
        }
        let cross = &g_ab * m.transpose();
        let chol = sigma.clone().cholesky().ok_or(Error::DegenerateQuadrature {
            variance: eigs[0].as_f64(),
        })?;
        let gain = chol.solve(&cross.transpose()).transpose();
        let cov = &g_a - &gain * cross.transpose();
        Ok(Self {
            prior_mean_a: select_entries(d, &kept),
            prior_mean_m: m * select_entries(d, &meas.measured_modes),
            gain,
            cov,
            outcome_cov: sigma * T::lit(0.5),
        })
    }

    fn condition(&self, outcome: &DVector<T>) -> Result<GaussianState<T>> {
        if self.prior_mean_a.is_empty() {
            return Err(Error::InvalidModes("measurement leaves no unmeasured mode".into()));
        }
        if outcome.len() != self.prior_mean_m.len() {
            return Err(Error::DimensionMismatch {
                expected: self.prior_mean_m.len(),
                found: outcome.len(),
            });
        }
        let mean = &self.prior_mean_a + &self.gain * (outcome - &self.prior_mean_m);
        Ok(GaussianState::from_parts(mean, self.cov.clone()))
    }

    fn condition_if_any(&self, outcome: &DVector<T>) -> Result<Option<GaussianState<T>>> {
        if self.prior_mean_a.is_empty() {
            Ok(None)
        } else {
            self.condition(outcome).map(Some)
        }
    }

    fn sample(&self, seed: u64) -> DVector<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (vals, vecs) = sorted_eigen(&self.outcome_cov);
        let root = DVector::from_iterator(vals.len(), vals.iter().map(|v| v.max(T::zero()).sqrt()));
        let z = DVector::from_iterator(
            vals.len(),
            (0..vals.len()).map(|_| T::lit(StandardNormal.sample(&mut rng))),
        );
        &self.prior_mean_m + vecs * z.component_mul(&root)
    }
}

/// Outcome of a sampled measurement.
#[derive(Clone, Debug)]
pub struct MeasurementRecord<T: Real> {
    pub outcome: DVector<T>,
    /// Observables `m = observable_map * r` over all quadratures of the
    /// measured state.
    pub observable_map: DMatrix<T>,
    /// State of the unmeasured modes, in ascending mode order; `None` when
    /// every mode was measured.
    pub conditioned_state: Option<GaussianState<T>>,
}

fn full_map<T: Real>(meas: &LinearMeasurement<T>, total: usize) -> DMatrix<T> {
    let idx = quad_indices(&meas.measured_modes);
    let mut full = DMatrix::zeros(meas.map.nrows(), 2 * total);
    for (j, &gj) in idx.iter().enumerate() {
        full.set_column(gj, &meas.map.column(j));
    }
    full
}

/// Conditional state of the unmeasured modes given `outcome`.
pub fn condition<T: Real>(state: &GaussianState<T>, spec: &DyneSpec<T>, outcome: &DVector<T>) -> Result<GaussianState<T>> {
    Conditioner::new(state, &spec.linear()?)?.condition(outcome)
}

/// Draws an outcome from its Gaussian law and conditions on it.
/// Deterministic for a fixed seed.
pub fn sample_outcome<T: Real>(state: &GaussianState<T>, spec: &DyneSpec<T>, seed: u64) -> Result<MeasurementRecord<T>> {
    let meas = spec.linear()?;
    let cond = Conditioner::new(state, &meas)?;
    let outcome = cond.sample(seed);
    Ok(MeasurementRecord {
        conditioned_state: cond.condition_if_any(&outcome)?,
        observable_map: full_map(&meas, state.modes()),
        outcome,
    })
}

/// Mean and covariance of a measurement's outcome law.
pub fn outcome_distribution<T: Real>(state: &GaussianState<T>, spec: &DyneSpec<T>) -> Result<(DVector<T>, DMatrix<T>)> {
    let cond = Conditioner::new(state, &spec.linear()?)?;
    Ok((cond.prior_mean_m, cond.outcome_cov))
}

/// Bell measurement of pairs `(a, b)`: each pair is mixed on a balanced
/// beamsplitter (`a' = (a + b)/sqrt 2`, `b' = (b - a)/sqrt 2`), then `x` of
/// `b'` and `p` of `a'` are homodyned. Outcomes are rescaled so that each
/// pair contributes exactly `(x_a - x_b, p_a + p_b)`.
struct BellSetup<T: Real> {
    rotated: GaussianState<T>,
    meas: LinearMeasurement<T>,
    observable_map: DMatrix<T>,
}

fn bell_setup<T: Real>(state: &GaussianState<T>, pairs: &[(usize, usize)]) -> Result<BellSetup<T>> {
    if pairs.is_empty() {
        return Err(Error::EmptyKeepSet);
    }
    let measured: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    validate_modes(&measured, state.modes())?;
    let bs = beamsplitter(T::lit(0.5))?;
    let mut full = DMatrix::<T>::identity(2 * state.modes(), 2 * state.modes());
    for &(a, b) in pairs {
        full = bs.embed(&[a, b], state.modes())?.as_matrix() * full;
    }
    let rotated = state.apply_symplectic_unchecked(&full);
    let k = pairs.len();
    let root2 = T::lit(2.0).sqrt();
    let mut map = DMatrix::zeros(2 * k, 4 * k);
    for i in 0..k {
        // Block quadratures for pair i: a at 4i..4i+2, b at 4i+2..4i+4.
        map[(2 * i, 4 * i + 2)] = -root2;
        map[(2 * i + 1, 4 * i + 1)] = root2;
    }
    let meas = LinearMeasurement {
        measured_modes: measured,
        map,
        noise: DMatrix::zeros(2 * k, 2 * k),
    };
    let observable_map = full_map(&meas, state.modes()) * &full;
    Ok(BellSetup {
        rotated,
        meas,
        observable_map,
    })
}

/// Conditional state after Bell measurements with outcome
/// `(x_d, p_d)` per pair, concatenated.
pub fn condition_bell<T: Real>(state: &GaussianState<T>, pairs: &[(usize, usize)], outcome: &DVector<T>) -> Result<GaussianState<T>> {
    let setup = bell_setup(state, pairs)?;
    Conditioner::new(&setup.rotated, &setup.meas)?.condition(outcome)
}

/// Samples a Bell measurement on one pair.
pub fn bell_measure<T: Real>(state: &GaussianState<T>, pair: (usize, usize), seed: u64) -> Result<MeasurementRecord<T>> {
    if pair.0 == pair.1 {
        return Err(Error::InvalidModes("Bell measurement needs two distinct modes".into()));
    }
    bell_measure_pairs(state, &[pair], seed)
}

/// Samples joint Bell measurements on disjoint pairs.
pub fn bell_measure_pairs<T: Real>(state: &GaussianState<T>, pairs: &[(usize, usize)], seed: u64) -> Result<MeasurementRecord<T>> {
    let setup = bell_setup(state, pairs)?;
    let cond = Conditioner::new(&setup.rotated, &setup.meas)?;
    let outcome = cond.sample(seed);
    Ok(MeasurementRecord {
        conditioned_state: cond.condition_if_any(&outcome)?,
        observable_map: setup.observable_map,
        outcome,
    })
}

/// Mean and covariance of the Bell outcome law.
pub fn bell_outcome_distribution<T: Real>(state: &GaussianState<T>, pairs: &[(usize, usize)]) -> Result<(DVector<T>, DMatrix<T>)> {
    let setup = bell_setup(state, pairs)?;
    let cond = Conditioner::new(&setup.rotated, &setup.meas)?;
    Ok((cond.prior_mean_m, cond.outcome_cov))
}

/// Largest state handled by the integration oracle.
pub const ORACLE_MAX_MODES: usize = 3;

/// Measurement specification for the integration oracle.
#[derive(Clone, Debug)]
pub enum OracleMeasurement<'a, T: Real> {
    Dyne(&'a DyneSpec<T>),
    Bell(&'a [(usize, usize)]),
}

/// Conditional state by direct numerical integration of the Wigner
/// function against the measurement's Wigner kernel.
///
/// The unnormalized conditional Wigner function
/// `F(a) = int W(a, b) K(b) db` is integrated with the trapezoidal rule on
/// a grid aligned with the integrand's curvature (measured by differencing
/// the integrand), refined and widened until the result settles. Moments
/// follow from `ln F` being quadratic: central differences give its
/// gradient `g` and Hessian `H`, whence `G' = -2 H^{-1}` and
/// `d' = a0 - H^{-1} g`. No Schur complements are involved.
pub fn oracle_condition<T: Real>(
    state: &GaussianState<T>,
    measurement: OracleMeasurement<'_, T>,
    outcome: &DVector<T>,
) -> Result<GaussianState<T>> {
    let n = state.modes();
    if n > ORACLE_MAX_MODES {
        return Err(Error::TooManyModes {
            max: ORACLE_MAX_MODES,
            found: n,
        });
    }
    let problem = oracle::Problem::new(state, measurement, outcome)?;
    let (mean, cov) = problem.solve()?;
    Ok(GaussianState::from_parts(
        DVector::from_iterator(mean.len(), mean.iter().map(|&v| T::lit(v))),
        DMatrix::from_fn(cov.nrows(), cov.ncols(), |i, j| T::lit(cov[(i, j)])),
    ))
}

mod oracle {
    use super::*;

    /// Each measured quadrature is an affine function of the free
    /// integration variables `u`.
    #[derive(Clone, Copy)]
    struct Affine {
        index: usize,
        coeffs: [f64; 4],
        constant: f64,
    }

    pub(super) struct Problem {
        dim: usize,
        kept_idx: Vec<usize>,
        measured: Vec<Affine>,
        precision: DMatrix<f64>,
        mean: Vec<f64>,
        /// Kernel `exp(-(u - beta)^T kinv (u - beta))`, if any.
        kernel: Option<(DMatrix<f64>, Vec<f64>)>,
        q: usize,
        /// Rough location of the integrand's mass in `u`.
        centers: Vec<f64>,
    }

    struct Frame {
        curv: DMatrix<f64>,
        l: DMatrix<f64>,
        log_det: f64,
    }

    impl Problem {
        pub(super) fn new<T: Real>(
            state: &GaussianState<T>,
            measurement: OracleMeasurement<'_, T>,
            outcome: &DVector<T>,
        ) -> Result<Self> {
            let n = state.modes();
            let g = state.cov().as_matrix().map(|v| v.as_f64());
            let d: Vec<f64> = state.mean().as_vector().iter().map(|v| v.as_f64()).collect();
            let o: Vec<f64> = outcome.iter().map(|v| v.as_f64()).collect();
            let precision = g
                .clone()
                .try_inverse()
                .ok_or(Error::NotPositiveDefinite { min_eigenvalue: 0.0 })?;

            let mut measured = Vec::new();
            let mut centers = Vec::new();
            let mut kernel = None;
            let measured_modes: Vec<usize>;
            let expect_len;
            match measurement {
                OracleMeasurement::Dyne(spec) => {
                    measured_modes = spec.measured_modes.clone();
                    expect_len = spec.outcome_len();
                    validate_modes(&measured_modes, n)?;
                    if o.len() != expect_len {
                        return Err(Error::DimensionMismatch {
                            expected: expect_len,
                            found: o.len(),
                        });
                    }
                    match &spec.kind {
                        DyneKind::Heterodyne | DyneKind::General(_) => {
                            let idx = quad_indices(&measured_modes);
                            for (u, &gi) in idx.iter().enumerate() {
                                let mut coeffs = [0.0; 4];
                                coeffs[u] = 1.0;
                                measured.push(Affine { index: gi, coeffs, constant: 0.0 });
                                centers.push(0.5 * (d[gi] + o[u]));
                            }
                            let kinv = match &spec.kind {
                                DyneKind::General(gm) => gm
                                    .map(|v| v.as_f64())
                                    .try_inverse()
                                    .ok_or(Error::NotPositiveDefinite { min_eigenvalue: 0.0 })?,
                                _ => DMatrix::identity(idx.len(), idx.len()),
                            };
                            kernel = Some((kinv, o.clone()));
                        }
                        DyneKind::HomodyneX | DyneKind::HomodyneP => {
                            let off = usize::from(spec.kind == DyneKind::HomodyneP);
                            for (u, &m) in measured_modes.iter().enumerate() {
                                let fixed = 2 * m + off;
                                let free = 2 * m + 1 - off;
                                measured.push(Affine { index: fixed, coeffs: [0.0; 4], constant: o[u] });
                                let mut coeffs = [0.0; 4];
                                coeffs[u] = 1.0;
                                measured.push(Affine { index: free, coeffs, constant: 0.0 });
                                centers.push(d[free]);
                            }
                        }
                    }
                }
                OracleMeasurement::Bell(pairs) => {
                    measured_modes = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
                    validate_modes(&measured_modes, n)?;
                    if o.len() != 2 * pairs.len() {
                        return Err(Error::DimensionMismatch {
                            expected: 2 * pairs.len(),
                            found: o.len(),
                        });
                    }
                    for (i, &(a, b)) in pairs.iter().enumerate() {
                        let (ux, up) = (2 * i, 2 * i + 1);
                        let (xd, pd) = (o[2 * i], o[2 * i + 1]);
                        let mut cx = [0.0; 4];
                        cx[ux] = 1.0;
                        let mut cp = [0.0; 4];
                        cp[up] = 1.0;
                        // x_b = x_a - x_d, p_b = p_d - p_a.
                        let mut cxb = [0.0; 4];
                        cxb[ux] = 1.0;
                        let mut cpb = [0.0; 4];
                        cpb[up] = -1.0;
                        measured.push(Affine { index: 2 * a, coeffs: cx, constant: 0.0 });
                        measured.push(Affine { index: 2 * a + 1, coeffs: cp, constant: 0.0 });
                        measured.push(Affine { index: 2 * b, coeffs: cxb, constant: -xd });
                        measured.push(Affine { index: 2 * b + 1, coeffs: cpb, constant: pd });
                        centers.push(0.5 * (d[2 * a] + d[2 * b] + xd));
                        centers.push(0.5 * (d[2 * a + 1] - d[2 * b + 1] + pd));
                    }
                }
            }
            let kept = complement(&measured_modes, n);
            if kept.is_empty() {
                return Err(Error::InvalidModes("measurement leaves no unmeasured mode".into()));
            }
            let q = centers.len();
            if q > 4 {
                return Err(Error::TooManyModes { max: ORACLE_MAX_MODES, found: n });
            }
            Ok(Self {
                dim: 2 * n,
                kept_idx: quad_indices(&kept),
                measured,
                precision,
                mean: d,
                kernel,
                q,
                centers,
            })
        }

        /// Log of the integrand at a full phase-space point.
        fn log_integrand(&self, r: &mut [f64], a: &[f64], u: &[f64]) -> f64 {
            for (k, &gi) in self.kept_idx.iter().enumerate() {
                r[gi] = a[k];
            }
            for m in &self.measured {
                let mut v = m.constant;
                for (c, uu) in m.coeffs.iter().zip(u) {
                    v += c * uu;
                }
                r[m.index] = v;
            }
            let mut quad = 0.0;
            for i in 0..self.dim {
                let di = r[i] - self.mean[i];
                let row = self.precision.row(i);
                let mut acc = 0.0;
                for j in 0..self.dim {
                    acc += row[j] * (r[j] - self.mean[j]);
                }
                quad += di * acc;
            }
            let mut val = -quad;
            if let Some((kinv, beta)) = &self.kernel {
                let mut kq = 0.0;
                for i in 0..self.q {
                    for j in 0..self.q {
                        kq += (u[i] - beta[i]) * kinv[(i, j)] * (u[j] - beta[j]);
                    }
                }
                val -= kq;
            }
            val
        }

        /// `ln int exp(log_integrand) du` over `u = center + L z` on a
        /// tensor grid in `z` with `points` nodes per axis on
        /// `[-half, half]`, plus the largest boundary-to-peak log ratio.
        fn log_integral(&self, a: &[f64], frame: &Frame, center: &[f64], half: f64, points: usize) -> (f64, f64) {
            let q = self.q;
            let step = 2.0 * half / (points - 1) as f64;
            let total = points.pow(q as u32);
            let mut r = vec![0.0; self.dim];
            let mut u = vec![0.0; q];
            let mut z = vec![0.0; q];
            let mut values = Vec::with_capacity(total);
            let mut boundary = f64::NEG_INFINITY;
            for flat in 0..total {
                let mut rem = flat;
                let mut edge = false;
                let mut weight = 0.0;
                for zk in z.iter_mut() {
                    let i = rem % points;
                    rem /= points;
                    *zk = -half + step * i as f64;
                    if i == 0 || i == points - 1 {
                        edge = true;
                        weight += 0.5f64.ln();
                    }
                }
                for k in 0..q {
                    u[k] = center[k] + (0..q).map(|j| frame.l[(k, j)] * z[j]).sum::<f64>();
                }
                let v = self.log_integrand(&mut r, a, &u);
                if edge {
                    boundary = boundary.max(v);
                }
                values.push(v + weight);
            }
            let peak = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = values.iter().map(|v| (v - peak).exp()).sum();
            (peak + sum.ln() + q as f64 * step.ln() + frame.log_det, boundary - peak)
        }

        /// The integrand is Gaussian in `u`; its curvature and, per probe
        /// point, its peak are read off central differences of the
        /// integrand itself.
        fn frame(&self, a: &[f64]) -> Result<Frame> {
            let q = self.q;
            let mut r = vec![0.0; self.dim];
            let u0 = self.centers.clone();
            let at = |r: &mut Vec<f64>, du: &[(usize, f64)]| {
                let mut u = u0.clone();
                for &(k, d) in du {
                    u[k] += d;
                }
                self.log_integrand(r, a, &u)
            };
            let f0 = at(&mut r, &[]);
            let mut curv = DMatrix::zeros(q, q);
            for i in 0..q {
                let fp = at(&mut r, &[(i, 1.0)]);
                let fm = at(&mut r, &[(i, -1.0)]);
                curv[(i, i)] = -(fp - 2.0 * f0 + fm) / 2.0;
                for j in i + 1..q {
                    let pp = at(&mut r, &[(i, 1.0), (j, 1.0)]);
                    let pm = at(&mut r, &[(i, 1.0), (j, -1.0)]);
                    let mp = at(&mut r, &[(i, -1.0), (j, 1.0)]);
                    let mm = at(&mut r, &[(i, -1.0), (j, -1.0)]);
                    let v = -(pp - pm - mp + mm) / 8.0;
                    curv[(i, j)] = v;
                    curv[(j, i)] = v;
                }
            }
            let eig = curv.clone().symmetric_eigen();
            let min = eig.eigenvalues.min();
            if !(min > 0.0) {
                return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
            }
            // u^T Q u = z^T z / 2 for u = L z.
            let scale = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / (2.0 * v).sqrt()));
            let l = &eig.eigenvectors * scale;
            let log_det = l.determinant().abs().ln();
            Ok(Frame { curv, l, log_det })
        }

        fn peak(&self, a: &[f64], frame: &Frame) -> Vec<f64> {
            let q = self.q;
            let mut r = vec![0.0; self.dim];
            let mut grad = DVector::zeros(q);
            for i in 0..q {
                let mut up = self.centers.clone();
                let mut dn = self.centers.clone();
                up[i] += 1.0;
                dn[i] -= 1.0;
                grad[i] = (self.log_integrand(&mut r, a, &up) - self.log_integrand(&mut r, a, &dn)) / 2.0;
            }
            // grad l = -2 Q (u - u*) at u0.
            let shift = frame.curv.clone().lu().solve(&grad).unwrap_or_else(|| DVector::zeros(q)) * 0.5;
            self.centers.iter().zip(shift.iter()).map(|(c, s)| c + s).collect()
        }

        fn probe_points(&self, h: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
            let na = self.kept_idx.len();
            let a0: Vec<f64> = self.kept_idx.iter().map(|&i| self.mean[i]).collect();
            let mut pts = vec![a0.clone()];
            for i in 0..na {
                for s in [1.0, -1.0] {
                    let mut p = a0.clone();
                    p[i] += s * h;
                    pts.push(p);
                }
            }
            for i in 0..na {
                for j in i + 1..na {
                    for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                        let mut p = a0.clone();
                        p[i] += si * h;
                        p[j] += sj * h;
                        pts.push(p);
                    }
                }
            }
            (a0, pts)
        }

        pub(super) fn solve(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
            const H: f64 = 0.5;
            let (a0, pts) = self.probe_points(H);
            let frame = self.frame(&a0)?;
            let peaks: Vec<Vec<f64>> = pts.iter().map(|p| self.peak(p, &frame)).collect();
            let max_points = match self.q {
                1 => 1025,
                2 => 257,
                3 => 65,
                _ => 33,
            };
            let mut half = 12.0;
            let mut points = 17;
            let mut prev: Option<Vec<f64>> = None;
            let values = loop {
                let mut vals = Vec::with_capacity(pts.len());
                let mut worst_edge = f64::NEG_INFINITY;
                for (p, c) in pts.iter().zip(&peaks) {
                    let (v, edge) = self.log_integral(p, &frame, c, half, points);
                    vals.push(v);
                    worst_edge = worst_edge.max(edge);
                }
                if worst_edge > -60.0 && half < 100.0 {
                    half *= 1.5;
                    prev = None;
                    continue;
                }
                let settled = prev
                    .as_ref()
                    .is_some_and(|p| p.iter().zip(&vals).all(|(a, b)| (a - b).abs() < 1e-13));
                if settled || points >= max_points {
                    break vals;
                }
                prev = Some(vals);
                points = 2 * points - 1;
            };

            let na = self.kept_idx.len();
            let f0 = values[0];
            let mut grad = DVector::zeros(na);
            let mut hess = DMatrix::zeros(na, na);
            for i in 0..na {
                let fp = values[1 + 2 * i];
                let fm = values[2 + 2 * i];
                grad[i] = (fp - fm) / (2.0 * H);
                hess[(i, i)] = (fp - 2.0 * f0 + fm) / (H * H);
            }
            let mut k = 1 + 2 * na;
            for i in 0..na {
                for j in i + 1..na {
                    let (pp, pm, mp, mm) = (values[k], values[k + 1], values[k + 2], values[k + 3]);
                    k += 4;
                    let v = (pp - pm - mp + mm) / (4.0 * H * H);
                    hess[(i, j)] = v;
                    hess[(j, i)] = v;
                }
            }
            let inv = hess
                .clone()
                .try_inverse()
                .ok_or(Error::NotPositiveDefinite { min_eigenvalue: 0.0 })?;
            let cov = &inv * -2.0;
            let mean = DVector::from_vec(a0) - &inv * grad;
            Ok((mean, cov))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{thermal, tmsv, vacuum};

    #[test]
    fn heterodyne_on_tmsv_leaves_coherent_state() {
        let st = tmsv(0.5f64);
        let out = condition(&st, &DyneSpec::heterodyne(&[1]), &DVector::from_vec(vec![0.4, -0.2])).unwrap();
        assert!((out.cov().as_matrix() - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn homodyne_x_on_tmsv() {
        let st = tmsv(0.5f64);
        let out = condition(&st, &DyneSpec::homodyne_x(&[1]), &DVector::from_vec(vec![0.0])).unwrap();
        let c = 1.0f64.cosh();
        assert!((out.cov().as_matrix()[(0, 0)] - 1.0 / c).abs() < 1e-12);
        assert!((out.cov().as_matrix()[(1, 1)] - c).abs() < 1e-12);
        assert!((1.0 / c - 0.6480542736638855).abs() < 1e-15);
    }

    #[test]
    fn product_state_factor_unchanged() {
        let st = thermal(&[2.0f64]).unwrap().tensor(&tmsv(0.3));
        for spec in [DyneSpec::heterodyne(&[1]), DyneSpec::homodyne_p(&[2])] {
            let out = condition(&st, &spec, &DVector::from_element(spec.outcome_len(), 0.7)).unwrap();
            assert!((out.cov().as_matrix()[(0, 0)] - 2.0).abs() < 1e-14);
            assert!(out.mean().as_vector().rows(0, 2).amax() < 1e-14);
        }
    }

    #[test]
    fn degenerate_quadrature() {
        let zero_x = crate::state::GaussianState::from_parts(
            DVector::zeros(4),
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0, 1e14])),
        );
        assert!(matches!(
            condition(&zero_x, &DyneSpec::homodyne_x(&[1]), &DVector::zeros(1)),
            Err(Error::DegenerateQuadrature { .. })
        ));
    }

    #[test]
    fn measure_errors() {
        let st = vacuum::<f64>(2).unwrap();
        assert!(condition(&st, &DyneSpec::heterodyne(&[0, 1]), &DVector::zeros(4)).is_err());
        assert!(condition(&st, &DyneSpec::heterodyne(&[0]), &DVector::zeros(1)).is_err());
        assert!(condition(&st, &DyneSpec::heterodyne(&[5]), &DVector::zeros(2)).is_err());
        assert!(bell_measure(&vacuum::<f64>(3).unwrap(), (1, 1), 0).is_err());
        let big = vacuum::<f64>(4).unwrap();
        assert!(matches!(
            oracle_condition(&big, OracleMeasurement::Dyne(&DyneSpec::heterodyne(&[0])), &DVector::zeros(2)),
            Err(Error::TooManyModes { .. })
        ));
    }

    #[test]
    fn bell_observable_map_is_exactly_difference_and_sum() {
        let rec = bell_measure(&vacuum::<f64>(3).unwrap(), (0, 2), 1).unwrap();
        let expect = DMatrix::from_row_slice(2, 6, &[1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!((rec.observable_map - expect).amax() < 1e-15);
    }

    #[test]
    fn bell_variances() {
        let (_, cov) = bell_outcome_distribution(&vacuum::<f64>(2).unwrap().tensor(&vacuum(1).unwrap()), &[(0, 1)]).unwrap();
        assert!((cov[(0, 0)] - 1.0).abs() < 1e-14 && (cov[(1, 1)] - 1.0).abs() < 1e-14);
        let st = tmsv(0.5f64).tensor(&vacuum(1).unwrap());
        let (_, cov) = bell_outcome_distribution(&st, &[(0, 1)]).unwrap();
        // Rescaled observable x_a - x_b: (2 cosh 2r - 2 sinh 2r) / 2 = e^{-2r}.
        assert!((cov[(0, 0)] - (-1.0f64).exp()).abs() < 1e-12);
        // The raw homodyne output (x_b - x_a)/sqrt 2 behind the beamsplitter carries half of it.
        let mixed = st.apply_symplectic_on(&beamsplitter(0.5).unwrap(), &[0, 1]).unwrap();
        let (_, raw) = outcome_distribution(&mixed, &DyneSpec::homodyne_x(&[1])).unwrap();
        assert!((raw[(0, 0)] - 0.18393972058572117).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic() {
        let st = tmsv(0.4f64);
        let a = sample_outcome(&st, &DyneSpec::heterodyne(&[0]), 42).unwrap();
        let b = sample_outcome(&st, &DyneSpec::heterodyne(&[0]), 42).unwrap();
        assert_eq!(a.outcome, b.outcome);
        let c = sample_outcome(&st, &DyneSpec::heterodyne(&[0]), 43).unwrap();
        assert_ne!(a.outcome, c.outcome);
    }

    #[test]
    fn oracle_matches_heterodyne_on_tmsv() {
        let st = tmsv(0.5f64);
        let o = DVector::from_vec(vec![0.3, -0.8]);
        let spec = DyneSpec::heterodyne(&[1]);
        let exact = condition(&st, &spec, &o).unwrap();
        let num = oracle_condition(&st, OracleMeasurement::Dyne(&spec), &o).unwrap();
        assert!((exact.cov().as_matrix() - num.cov().as_matrix()).amax() < 1e-6);
        assert!((exact.mean().as_vector() - num.mean().as_vector()).amax() < 1e-6);
    }
}
