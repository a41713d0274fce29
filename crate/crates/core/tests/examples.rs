mod common;

use common::{max_diff, random_pure_state, random_state};
use cvdist_core::channels::{
    choi_from_truncated_epr, filter, make_separable_channel, tensor_channels, GaussianChannel, LoccChannelSpec, Port,
};
use cvdist_core::entanglement::{log_negativity, ppt_separable, BipartiteSplit};
use cvdist_core::measurements::{condition, outcome_distribution, sample_outcome, DyneSpec};
use cvdist_core::phase::CovMatrix;
use cvdist_core::protocols::{
    build_fig2, canonicalize_pure_3mode, decompose_alice_map, project_vacuum, run_fig1, Fig1Options,
    HeterodyneOutcome,
};
use cvdist_core::state::{squeezed_vacuum, tmsv, vacuum, GaussianState};
use cvdist_core::symplectic::{random_symplectic, SymplecticMatrix};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Covariance of `sum_n c_n |n, n>` (normalized internally).
fn fock_two_mode_cov(coeffs: &[f64]) -> DMatrix<f64> {
    let norm: f64 = coeffs.iter().map(|c| c * c).sum();
    let n_bar: f64 = coeffs.iter().enumerate().map(|(n, c)| n as f64 * c * c).sum::<f64>() / norm;
    // <ab> = sum_n n c_{n-1} c_n
    let ab: f64 = (1..coeffs.len()).map(|n| n as f64 * coeffs[n - 1] * coeffs[n]).sum::<f64>() / norm;
    let d = 1.0 + 2.0 * n_bar;
    let c = 2.0 * ab;
    DMatrix::from_row_slice(4, 4, &[d, 0.0, c, 0.0, 0.0, d, 0.0, -c, c, 0.0, d, 0.0, 0.0, -c, 0.0, d])
}

/// `sum_n lambda^n |n, n>` truncated at 400 photons.
fn fock_filtered(lambda: f64) -> DMatrix<f64> {
    let coeffs: Vec<f64> = (0..400).map(|n| lambda.powi(n)).collect();
    fock_two_mode_cov(&coeffs)
}

#[test]
fn fock_oracle_reproduces_tmsv() {
    let s = 0.5f64;
    assert!((fock_filtered(s.tanh()) - tmsv(s).cov().as_matrix()).amax() < 1e-12);
}

#[test]
fn filter_on_one_arm_of_tmsv() {
    let (s, r) = (0.5f64, 0.5f64);
    let out = filter(r).unwrap().apply_on_modes(&tmsv(s), &[0]).unwrap();
    let oracle = fock_filtered(s.tanh() * r.tanh());
    assert!((out.cov().as_matrix() - &oracle).amax() < 1e-10);
    // tanh s' read back from the covariance.
    let cosh2 = out.cov().as_matrix()[(0, 0)];
    let s_prime = 0.5 * cosh2.acosh();
    assert!((s_prime.tanh() - 0.21355226703407257).abs() < 1e-12);
    assert!((s.tanh() * r.tanh() - 0.21355226703407257).abs() < 1e-15);
}

#[test]
fn separable_two_filter_channel() {
    let (s, r) = (0.6f64, 0.4f64);
    let g = tmsv(r).cov().as_matrix().clone();
    let spec = LoccChannelSpec {
        partition: vec![Port::In, Port::Out, Port::In, Port::Out],
        alice_modes: vec![0, 1],
        bob_modes: vec![2, 3],
        gamma_a: g.clone(),
        gamma_b: g,
        noise: DMatrix::zeros(8, 8),
    };
    let ch = make_separable_channel(&spec).unwrap();
    let out = ch.apply(&tmsv(s)).unwrap();
    let oracle = fock_filtered(s.tanh() * r.tanh() * r.tanh());
    assert!((out.cov().as_matrix() - &oracle).amax() < 1e-10);
    assert!(ppt_separable(ch.choi(), &BipartiteSplit::new(vec![0, 1], vec![2, 3], 4).unwrap()).unwrap());
}

#[test]
fn truncated_epr_converges_to_identity() {
    let gin = GaussianState::centered(CovMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5]))).unwrap())
        .unwrap();
    let mut prev = f64::INFINITY;
    for r in [1.0, 2.0, 3.0, 4.0, 5.0] {
        let out = choi_from_truncated_epr(1, r).unwrap().apply(&gin).unwrap();
        let err = max_diff(out.cov(), gin.cov());
        assert!(err < prev);
        prev = err;
    }
    assert!(prev < 1e-3);
    let id = choi_from_truncated_epr(1, 8.0f64).unwrap();
    let both = tensor_channels(&id, &id);
    let out = both.apply(&tmsv(0.5)).unwrap();
    assert!(max_diff(out.cov(), tmsv(0.5).cov()) < 1e-5);
}

#[test]
fn homodyne_sampling_variance_on_vacuum() {
    let v = vacuum::<f64>(1).unwrap();
    let spec = DyneSpec::homodyne_x(&[0]);
    let n = 100_000;
    let xs: Vec<f64> = (0..n)
        .map(|k| sample_outcome(&v, &spec, k as u64).unwrap().outcome[0])
        .collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((var - 0.5).abs() < 0.01, "{var}");
    // Three-sigma band for the sample mean.
    assert!(mean.abs() < 3.0 * (0.5f64 / n as f64).sqrt());
}

#[test]
fn heterodyne_sampling_matches_outcome_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let st = random_state(2, 0.4, 1.0, &mut rng);
    let spec = DyneSpec::heterodyne(&[1]);
    let (mu, sigma) = outcome_distribution(&st, &spec).unwrap();
    let n = 100_000;
    let mut acc = DMatrix::<f64>::zeros(2, 2);
    let mut m = DVector::<f64>::zeros(2);
    for k in 0..n {
        let o = sample_outcome(&st, &spec, 1_000_000 + k as u64).unwrap().outcome;
        m += &o;
        acc += &o * o.transpose();
    }
    m /= n as f64;
    let cov = acc / n as f64 - &m * m.transpose();
    for i in 0..2 {
        // Var of a sample variance is 2 sigma^4 / n.
        let band = 3.0 * (2.0f64 / n as f64).sqrt() * sigma[(i, i)];
        assert!((cov[(i, i)] - sigma[(i, i)]).abs() < band);
        assert!((m[i] - mu[i]).abs() < 3.0 * (sigma[(i, i)] / n as f64).sqrt());
    }
}

#[test]
fn squeezed_homodyne_concentrates_at_mean() {
    let st = squeezed_vacuum(-0.5 * (1e6f64).ln())
        .displace(&DVector::from_vec(vec![0.7, 0.0]))
        .unwrap();
    // Variance 1e-6 in x: outcome within 1e-2 of the mean.
    for seed in 0..50 {
        let x = sample_outcome(&st, &DyneSpec::homodyne_x(&[0]), seed).unwrap().outcome[0];
        assert!((x - 0.7).abs() < 1e-2);
    }
}

fn eq12_state(s_in: &SymplecticMatrix<f64>, s_out: &SymplecticMatrix<f64>, r: f64) -> GaussianState<f64> {
    // tmsv on (in1, out), vacuum on in2; reordered to (in1, in2, out).
    let base = tmsv(r).tensor(&vacuum(1).unwrap()).permute(&[0, 2, 1]).unwrap();
    base.apply_symplectic(&s_in.direct_sum(s_out)).unwrap()
}

#[test]
fn canonical_form_of_constructed_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let expected = 1.4f64.cosh();
    for _ in 0..100 {
        let s_in = random_symplectic(2, 0.6, &mut rng);
        let s_out = random_symplectic(1, 0.6, &mut rng);
        let cf = canonicalize_pure_3mode(&eq12_state(&s_in, &s_out, 0.7), [0, 1], 2).unwrap();
        assert!((cf.a - expected).abs() < 1e-8 && (cf.c - expected).abs() < 1e-8);
        assert!((cf.b - 1.0).abs() < 1e-8);
        for e in [cf.e1, cf.e2, cf.e3] {
            assert!(e.abs() < 1e-8);
        }
        assert!(cf.pattern_residual() < 1e-8);
        assert!(cf.d1 >= cf.d2.abs() - 1e-12);
        assert!(cf.input_symplectic.deviation() < 1e-10);
    }
}

#[test]
fn canonical_form_is_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..30 {
        let st = random_pure_state(3, 0.6, &mut rng);
        let cf = canonicalize_pure_3mode(&st, [2, 0], 1).unwrap();
        assert!(cf.pattern_residual() < 1e-8);
        assert!(cf.a >= cf.b - 1e-12 && cf.e1 >= -1e-12 && cf.d1 >= cf.d2.abs() - 1e-12);
        let again = canonicalize_pure_3mode(&GaussianState::centered(cf.canonical_cov.clone()).unwrap(), [0, 1], 2).unwrap();
        for (x, y) in [
            (cf.a, again.a),
            (cf.b, again.b),
            (cf.c, again.c),
            (cf.d1, again.d1),
            (cf.d2, again.d2),
            (cf.e1, again.e1),
            (cf.e2, again.e2),
            (cf.e3, again.e3),
        ] {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
    }
}

#[test]
fn alice_map_replay_matches_apply() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let s_in = random_symplectic(2, 0.5, &mut rng);
        let s_out = random_symplectic(1, 0.5, &mut rng);
        let choi = eq12_state(&s_in, &s_out, 0.6);
        let chi = GaussianChannel::new(vec![Port::In, Port::In, Port::Out], choi).unwrap();
        let dec = decompose_alice_map(&chi).unwrap();
        assert!(dec.input_symplectic.deviation() < 1e-10);
        for _ in 0..20 {
            let input = random_state(2, 0.5, 1.0, &mut rng);
            let direct = chi.apply(&input).unwrap();
            let replay = dec.replay(&input).unwrap();
            assert!(max_diff(direct.cov(), replay.cov()) < 1e-7);
        }
    }
}

#[test]
fn decomposition_rejects_mixed_choi() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let choi = random_state(3, 0.4, 1.0, &mut rng);
    let chi = GaussianChannel::new(vec![Port::In, Port::In, Port::Out], choi).unwrap();
    assert!(decompose_alice_map(&chi).is_err());
}

#[test]
fn vacuum_projection_cross_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let st = random_state(3, 0.5, 1.0, &mut rng);
        let a = project_vacuum(&st, 2).unwrap();
        let b = condition(&st, &DyneSpec::heterodyne(&[2]), &DVector::zeros(2)).unwrap();
        assert!(max_diff(a.cov(), b.cov()) < 1e-13);
        assert!((a.mean().as_vector() - b.mean().as_vector()).amax() < 1e-13);
    }
}

#[test]
fn fig1_on_separable_two_by_two_channel() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let spec = cvdist_core::channels::random_locc_spec(
        cvdist_core::channels::PartyPorts { n_in: 1, n_out: 1 },
        cvdist_core::channels::PartyPorts { n_in: 1, n_out: 1 },
        0.5,
        0.5,
        0.3,
        &mut rng,
    );
    let ch = make_separable_channel(&spec).unwrap();
    let run = run_fig1(&ch, &tmsv(0.5), 100, 77, Fig1Options::default()).unwrap();
    assert_eq!(run.samples.len(), 100);
    assert!(run.verified(1e-9), "{} {}", run.max_cov_deviation, run.max_mean_deviation);
    let first = run.samples[0].corrected_output.cov();
    for s in &run.samples {
        assert!(max_diff(s.corrected_output.cov(), first) < 1e-10);
    }
}

#[test]
fn fig2_output_is_outcome_independent_and_product_stays_separable() {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let copy = tmsv(0.6);
    for _ in 0..5 {
        let sa = random_symplectic(2, 0.6, &mut rng);
        let sb = random_symplectic(2, 0.6, &mut rng);
        let base = build_fig2(&sa, &sb, &copy, &copy, &HeterodyneOutcome::Zero).unwrap();
        for seed in 0..10 {
            let p = build_fig2(&sa, &sb, &copy, &copy, &HeterodyneOutcome::Sampled { seed }).unwrap();
            assert!(max_diff(p.output.cov(), base.output.cov()) < 1e-10);
            assert!(p.output.mean().max_abs() < 1e-9);
        }
        assert!(base.output.cov().is_physical());
    }
    let product = vacuum(1).unwrap().tensor(&random_state(1, 0.5, 1.0, &mut rng));
    for _ in 0..20 {
        let sa = random_symplectic(2, 0.8, &mut rng);
        let sb = random_symplectic(2, 0.8, &mut rng);
        let p = build_fig2(&sa, &sb, &product, &product, &HeterodyneOutcome::Zero).unwrap();
        assert!(p.report.log_negativity < 1e-12);
    }
}

#[test]
fn fig2_forced_outcome_is_corrected() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let sa = random_symplectic(2, 0.5, &mut rng);
    let sb = random_symplectic(2, 0.5, &mut rng);
    let o = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.5]);
    let p = build_fig2(&sa, &sb, &tmsv(0.5), &tmsv(0.5), &HeterodyneOutcome::Forced(o.clone())).unwrap();
    assert_eq!(p.outcome, o);
    assert!(p.correction.amax() > 1e-3);
    assert!(p.output.mean().max_abs() < 1e-12);
}

#[test]
fn log_negativity_of_tmsv() {
    let rep = log_negativity(&tmsv(0.5f64), &BipartiteSplit::one_by_one()).unwrap();
    assert!((rep.min_pt_symplectic_eigenvalue - 0.36787944117144233).abs() < 1e-12);
    assert!((rep.log_negativity - 1.0).abs() < 1e-12);
    assert!(!ppt_separable(&tmsv(0.3f64), &BipartiteSplit::one_by_one()).unwrap());
}
