//! Multi-start search over the two-copy protocol's local symplectics.
//!
//! Each party's two-mode symplectic is parametrized as
//! `passive_out * (squeezer(r1) (+) squeezer(r2)) * passive_in`, every
//! passive factor being `(R(phi1) (+) R(phi2)) * BS(theta) * (R(phi3) (+) I)`.
//! Every parameter vector therefore realizes a symplectic matrix.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entanglement::{log_negativity, BipartiteSplit};
use crate::error::{Error, Result};
use crate::nelder_mead::NelderMead;
use crate::protocols::{build_fig2, Fig2Evaluator, HeterodyneOutcome};
use crate::state::{add_noise, tmsv, GaussianState};
use crate::symplectic::{beamsplitter_angle, phase_rotation, squeezer, SymplecticMatrix};

pub const SQUEEZE_CLAMP: f64 = 3.0;
/// A certificate holds when `gap >= GAP_TOL`.
pub const GAP_TOL: f64 = -1e-6;
pub const PARAMS_PER_PARTY: usize = 10;
pub const SCOPE_NOTE: &str = "maximum over local two-mode symplectics followed by heterodyne of the second mode \
     on each side (pure local maps); mixed local maps are not searched";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartyParams {
    pub passive_in: [f64; 4],
    pub squeezes: [f64; 2],
    pub passive_out: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymplecticParams {
    pub alice: PartyParams,
    pub bob: PartyParams,
}

fn passive(angles: &[f64; 4]) -> DMatrix<f64> {
    let [phi1, phi2, theta, phi3] = *angles;
    let outer = phase_rotation(phi1).direct_sum(&phase_rotation(phi2));
    let inner = phase_rotation(phi3).direct_sum(&SymplecticMatrix::identity(1));
    outer.as_matrix() * beamsplitter_angle(theta).as_matrix() * inner.as_matrix()
}

impl PartyParams {
    pub fn identity() -> Self {
        Self {
            passive_in: [0.0; 4],
            squeezes: [0.0; 2],
            passive_out: [0.0; 4],
        }
    }

    fn from_slice(x: &[f64]) -> Self {
        let clamp = |v: f64| v.clamp(-SQUEEZE_CLAMP, SQUEEZE_CLAMP);
        Self {
            passive_in: [x[0], x[1], x[2], x[3]],
            squeezes: [clamp(x[4]), clamp(x[5])],
            passive_out: [x[6], x[7], x[8], x[9]],
        }
    }

    fn to_vec(&self) -> Vec<f64> {
        let mut v = self.passive_in.to_vec();
        v.extend_from_slice(&self.squeezes);
        v.extend_from_slice(&self.passive_out);
        v
    }

    /// Squeezes are clamped before use.
    pub fn matrix(&self) -> DMatrix<f64> {
        let clamp = |v: f64| v.clamp(-SQUEEZE_CLAMP, SQUEEZE_CLAMP);
        let sq = squeezer(clamp(self.squeezes[0])).direct_sum(&squeezer(clamp(self.squeezes[1])));
        passive(&self.passive_out) * sq.as_matrix() * passive(&self.passive_in)
    }

    pub fn symplectic(&self) -> Result<SymplecticMatrix<f64>> {
        SymplecticMatrix::new(self.matrix())
    }
}

impl SymplecticParams {
    pub fn identity() -> Self {
        Self {
            alice: PartyParams::identity(),
            bob: PartyParams::identity(),
        }
    }

    /// Alice's ten parameters then Bob's; squeezes are clamped.
    pub fn from_slice(x: &[f64]) -> Self {
        assert_eq!(x.len(), 2 * PARAMS_PER_PARTY);
        Self {
            alice: PartyParams::from_slice(&x[..PARAMS_PER_PARTY]),
            bob: PartyParams::from_slice(&x[PARAMS_PER_PARTY..]),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.alice.to_vec();
        v.extend(self.bob.to_vec());
        v
    }
}

/// Two copies shared between Alice (mode 0 of each) and Bob (mode 1).
#[derive(Clone, Debug)]
pub struct NogoInput {
    pub description: String,
    pub copy1: GaussianState<f64>,
    pub copy2: GaussianState<f64>,
}

impl NogoInput {
    pub fn new(description: impl Into<String>, copy1: GaussianState<f64>, copy2: GaussianState<f64>) -> Self {
        Self {
            description: description.into(),
            copy1,
            copy2,
        }
    }

    pub fn tmsv_pair(r: f64) -> Self {
        Self::new(format!("tmsv({r}) x tmsv({r})"), tmsv(r), tmsv(r))
    }

    /// Both copies `tmsv(r)` with `noise * I` added to the covariance.
    pub fn noisy_tmsv_pair(r: f64, noise: f64) -> Result<Self> {
        let c = add_noise(&tmsv(r), noise)?;
        Ok(Self::new(format!("tmsv({r}) + {noise} I, two copies"), c.clone(), c))
    }

    /// Larger of the two single-copy log-negativities.
    pub fn input_log_negativity(&self) -> Result<f64> {
        let split = BipartiteSplit::one_by_one();
        let a = log_negativity(&self.copy1, &split)?.log_negativity;
        let b = log_negativity(&self.copy2, &split)?.log_negativity;
        Ok(a.max(b))
    }
}

/// Log-negativity of the protocol output for `params`.
pub fn objective(params: &SymplecticParams, input: &NogoInput) -> Result<f64> {
    let p = build_fig2(
        &params.alice.symplectic()?,
        &params.bob.symplectic()?,
        &input.copy1,
        &input.copy2,
        &HeterodyneOutcome::Zero,
    )?;
    Ok(p.report.log_negativity)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub n_starts: usize,
    /// Evaluations per start.
    pub budget: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NogoCertificate {
    pub input_description: String,
    #[serde(rename = "input_E_N")]
    pub input_e_n: f64,
    #[serde(rename = "best_E_N")]
    pub best_e_n: f64,
    pub best_params: SymplecticParams,
    /// Start that found `best_params`; 0 is the identity point.
    pub best_start: usize,
    pub n_starts: usize,
    /// Total evaluations over all starts.
    pub n_evals: usize,
    pub budget_per_start: usize,
    pub gap: f64,
    pub seed: u64,
    pub squeeze_clamp: f64,
    /// Starts with at least one non-finite evaluation.
    pub failed_starts: Vec<usize>,
    pub scope: String,
}

impl NogoCertificate {
    pub fn holds(&self) -> bool {
        self.gap >= GAP_TOL
    }
}

struct StartResult {
    index: usize,
    x: Vec<f64>,
    value: f64,
    evals: usize,
    failures: usize,
}

fn start_point(seed: u64, index: usize) -> Vec<f64> {
    if index == 0 {
        return vec![0.0; 2 * PARAMS_PER_PARTY];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    (0..2 * PARAMS_PER_PARTY)
        .map(|k| {
            if k % PARAMS_PER_PARTY == 4 || k % PARAMS_PER_PARTY == 5 {
                rng.random_range(-SQUEEZE_CLAMP..SQUEEZE_CLAMP)
            } else {
                rng.random_range(0.0..TAU)
            }
        })
        .collect()
}

fn steps() -> Vec<f64> {
    (0..2 * PARAMS_PER_PARTY)
        .map(|k| if k % PARAMS_PER_PARTY == 4 || k % PARAMS_PER_PARTY == 5 { 0.3 } else { 0.6 })
        .collect()
}

/// Maximizes the output log-negativity from the identity point and
/// `n_starts - 1` uniform random points. Starts run in parallel; each owns
/// the RNG stream `start_index` of `seed`.
pub fn optimize(input: &NogoInput, config: &SearchConfig) -> Result<NogoCertificate> {
    if config.n_starts == 0 {
        return Err(Error::ParamOutOfRange("n_starts must be at least 1".into()));
    }
    let evaluator = Fig2Evaluator::new(&input.copy1, &input.copy2)?;
    let input_e_n = input.input_log_negativity()?;
    let nm = NelderMead::default();
    let step = steps();
    let results: Vec<StartResult> = (0..config.n_starts)
        .into_par_iter()
        .map(|index| {
            let x0 = start_point(config.seed, index);
            let f = |x: &[f64]| {
                let p = SymplecticParams::from_slice(x);
                -evaluator.log_negativity(&p.alice.matrix(), &p.bob.matrix())
            };
            let m = nm.minimize(f, &x0, &step, config.budget);
            StartResult {
                index,
                x: m.x,
                value: -m.f,
                evals: m.evals,
                failures: m.failures,
            }
        })
        .collect();

    let mut best: Option<&StartResult> = None;
    for r in &results {
        let better = match best {
            None => true,
            Some(b) => r.value > b.value || (r.value == b.value && r.index < b.index),
        };
        if better && r.value.is_finite() {
            best = Some(r);
        }
    }
    let best = best.ok_or_else(|| Error::ParamOutOfRange("no start produced a finite objective".into()))?;
    let best_params = SymplecticParams::from_slice(&best.x);
    Ok(NogoCertificate {
        input_description: input.description.clone(),
        input_e_n,
        best_e_n: best.value,
        best_params,
        best_start: best.index,
        n_starts: config.n_starts,
        n_evals: results.iter().map(|r| r.evals).sum(),
        budget_per_start: config.budget,
        gap: input_e_n - best.value,
        seed: config.seed,
        squeeze_clamp: SQUEEZE_CLAMP,
        failed_starts: results.iter().filter(|r| r.failures > 0).map(|r| r.index).collect(),
        scope: SCOPE_NOTE.into(),
    })
}

/// One certificate per `r`, copies `tmsv(r) x tmsv(r)`, all with the same
/// configuration.
pub fn sweep(r_values: &[f64], config: &SearchConfig) -> Result<Vec<(f64, NogoCertificate)>> {
    if r_values.is_empty() {
        return Err(Error::ParamOutOfRange("r list is empty".into()));
    }
    r_values
        .iter()
        .map(|&r| optimize(&NogoInput::tmsv_pair(r), config).map(|c| (r, c)))
        .collect()
}

pub const CSV_HEADER: &str = "r,input_EN,best_EN,gap,n_starts,n_evals,seed";

/// Shortest round-trip form, scientific outside `[1e-4, 1e15)`.
fn fmt_float(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// CSV with [`CSV_HEADER`].
pub fn sweep_csv(rows: &[(f64, NogoCertificate)]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for (r, c) in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            fmt_float(*r),
            fmt_float(c.input_e_n),
            fmt_float(c.best_e_n),
            fmt_float(c.gap),
            c.n_starts,
            c.n_evals,
            c.seed
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::vacuum;

    #[test]
    fn identity_params_give_input_value() {
        let v = objective(&SymplecticParams::identity(), &NogoInput::tmsv_pair(0.5)).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parametrization_is_symplectic_and_periodic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x: Vec<f64> = (0..20).map(|_| rng.random_range(-4.0..4.0)).collect();
            let p = SymplecticParams::from_slice(&x);
            for party in [&p.alice, &p.bob] {
                assert!(party.symplectic().unwrap().deviation() < 1e-10);
                assert!(party.squeezes.iter().all(|s| s.abs() <= SQUEEZE_CLAMP));
            }
            let input = NogoInput::tmsv_pair(0.6);
            let base = objective(&p, &input).unwrap();
            for k in [0usize, 2, 8, 13] {
                let mut y = x.clone();
                y[k] += TAU;
                let shifted = objective(&SymplecticParams::from_slice(&y), &input).unwrap();
                assert!((base - shifted).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn product_copies_stay_unentangled() {
        let v = vacuum(2).unwrap();
        let input = NogoInput::new("vacuum", v.clone(), v);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let x: Vec<f64> = (0..20).map(|_| rng.random_range(-3.0..3.0)).collect();
            assert!(objective(&SymplecticParams::from_slice(&x), &input).unwrap() < 1e-12);
        }
    }

    #[test]
    fn minimal_budget_reports_identity_value() {
        let cfg = SearchConfig {
            n_starts: 1,
            budget: 0,
            seed: 1,
        };
        let c = optimize(&NogoInput::tmsv_pair(0.5), &cfg).unwrap();
        assert!((c.best_e_n - 1.0).abs() < 1e-12);
        assert_eq!(c.n_evals, 1);
    }

    #[test]
    fn small_search_is_deterministic_and_holds() {
        let cfg = SearchConfig {
            n_starts: 4,
            budget: 300,
            seed: 11,
        };
        let a = sweep(&[0.0, 0.5], &cfg).unwrap();
        let b = sweep(&[0.0, 0.5], &cfg).unwrap();
        assert_eq!(sweep_csv(&a), sweep_csv(&b));
        assert_eq!(a[1].1.best_params, b[1].1.best_params);
        assert_eq!(a[0].1.input_e_n, 0.0);
        assert!(a[0].1.best_e_n.abs() < 1e-9, "{:?}", a[0].1);
        for (_, c) in &a {
            assert!(c.holds(), "{c:?}");
            assert!(c.best_e_n >= c.input_e_n - 1e-12);
        }
        assert_eq!(sweep_csv(&a).lines().count(), 3);
    }

    #[test]
    fn certificate_json_keys() {
        let cfg = SearchConfig {
            n_starts: 1,
            budget: 10,
            seed: 1,
        };
        let c = optimize(&NogoInput::tmsv_pair(0.3), &cfg).unwrap();
        let v = serde_json::to_value(&c).unwrap();
        for key in ["input_E_N", "best_E_N", "best_params", "gap", "seed", "n_evals", "n_starts"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let back: NogoCertificate = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn csv_floats_round_trip() {
        for v in [0.0, 0.2, -2.1649348980190553e-15, 1.0000000000000056, 3e20, 1e-4] {
            assert_eq!(fmt_float(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_float(-2.5e-15), "-2.5e-15");
        assert_eq!(fmt_float(0.5), "0.5");
    }

    #[test]
    fn empty_sweep_is_an_error() {
        let cfg = SearchConfig {
            n_starts: 1,
            budget: 10,
            seed: 1,
        };
        assert!(sweep(&[], &cfg).is_err());
    }
}
