mod common;

use common::*;
use gradecast::mftci::{fit, prox, Fitter, MftciHyper};
use gradecast::{generate_synthetic, SyntheticConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_hyper() -> MftciHyper {
    MftciHyper {
        k: 2,
        outer_max_iters: 10,
        ..MftciHyper::default()
    }
}

/// A fitter on the dense instance with random `A` (on the mask) and random
/// auxiliaries, so every gradient term is exercised.
fn perturbed_fitter(seed: u64, previous_terms: usize) -> (gradecast::RecordSet, Fitter) {
    let train = dense_instance(5, 4, 3, seed);
    let hyper = MftciHyper {
        previous_terms,
        rho: 0.7,
        alpha: 0.3,
        ..small_hyper()
    };
    let mut fitter = Fitter::new(&train, hyper).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let pairs = fitter.model().mask.pairs().to_vec();
    for (i, j) in pairs {
        fitter.model_mut().a[(i, j)] = rng.random_range(0.0..0.5);
    }
    let m = fitter.model().n_courses();
    let state = fitter.state_mut();
    state.z1 = random_matrix(&mut rng, m, m, -0.2, 0.4);
    state.z2 = random_matrix(&mut rng, m, m, 0.0, 0.4);
    state.u1 = random_matrix(&mut rng, m, m, -0.1, 0.1);
    state.u2 = random_matrix(&mut rng, m, m, -0.1, 0.1);
    (train, fitter)
}

#[test]
fn influence_gradient_matches_finite_differences() {
    for previous_terms in [1, 2] {
        let (train, fitter) = perturbed_fitter(3, previous_terms);
        let grad = fitter.influence_gradient();
        let h = 1e-5;
        for &(i, j) in fitter.model().mask.pairs() {
            let mut plus = fitter.model().a.clone();
            plus[(i, j)] += h;
            let mut minus = fitter.model().a.clone();
            minus[(i, j)] -= h;
            let fd = (influence_objective_oracle(&train, fitter.model(), fitter.state(), &plus)
                - influence_objective_oracle(&train, fitter.model(), fitter.state(), &minus))
                / (2.0 * h);
            let rel = (grad[(i, j)] - fd).abs() / fd.abs().max(1.0);
            assert!(rel <= 1e-6, "({i},{j}): analytic {} vs fd {fd}", grad[(i, j)]);
        }
    }
}

#[test]
fn gradient_is_zero_off_the_mask() {
    let cfg = SyntheticConfig {
        n_students: 30,
        m_courses: 15,
        n_terms: 3,
        courses_per_term: 2,
        ..SyntheticConfig::default()
    };
    let (data, _) = generate_synthetic(&cfg).unwrap();
    let fitter = Fitter::new(&data, small_hyper()).unwrap();
    let grad = fitter.influence_gradient();
    let mask = &fitter.model().mask;
    let m = fitter.model().n_courses();
    assert!(mask.len() < m * m, "test needs a sparse mask");
    for i in 0..m {
        for j in 0..m {
            if !mask.contains(i, j) {
                assert_eq!(grad[(i, j)], 0.0);
            }
        }
    }
}

#[test]
fn fitted_influence_stays_on_the_mask() {
    let cfg = SyntheticConfig {
        n_students: 40,
        m_courses: 15,
        n_terms: 4,
        courses_per_term: 2,
        ..SyntheticConfig::default()
    };
    let (data, _) = generate_synthetic(&cfg).unwrap();
    let (model, _) = fit(&data, small_hyper()).unwrap();
    let m = model.n_courses();
    for i in 0..m {
        for j in 0..m {
            let a = model.a[(i, j)];
            assert!(a >= 0.0);
            if !model.mask.contains(i, j) {
                assert_eq!(a, 0.0, "({i},{j}) outside the mask");
            }
        }
    }
}

#[test]
fn fit_is_deterministic_for_a_seed() {
    let (data, _) = generate_synthetic(&SyntheticConfig {
        n_students: 40,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let (a, sa) = fit(&data, small_hyper()).unwrap();
    let (b, sb) = fit(&data, small_hyper()).unwrap();
    assert_eq!(a.to_json_string().unwrap(), b.to_json_string().unwrap());
    assert_eq!(sa, sb);
    let (c, _) = fit(&data, MftciHyper { rng_seed: 1, ..small_hyper() }).unwrap();
    assert_ne!(a.u, c.u);
}

#[test]
fn influence_step_descends_the_step_objective() {
    let (train, mut fitter) = perturbed_fitter(5, 2);
    fitter.model_mut().hyper.lr = 1e-3;
    fitter.model_mut().hyper.inner_a_iters = 1;
    let mut before = influence_objective_oracle(&train, fitter.model(), fitter.state(), &fitter.model().a);
    for _ in 0..20 {
        fitter.update_influence().unwrap();
        let after = influence_objective_oracle(&train, fitter.model(), fitter.state(), &fitter.model().a);
        assert!(after <= before + 1e-12, "{after} > {before}");
        before = after;
    }
}

#[test]
fn auxiliary_updates_are_the_proximal_maps() {
    let (_, mut fitter) = perturbed_fitter(7, 2);
    fitter.update_auxiliaries().unwrap();
    let hyper = fitter.model().hyper.clone();
    let state = fitter.state();
    let a = &fitter.model().a;

    // Z1 solves the nuclear prox of A + U1: no other candidate does better.
    let x1 = a + &state.u1;
    let (tau, rho) = (hyper.tau, hyper.rho);
    let best = nuclear_prox_objective(&state.z1, &x1, tau, rho);
    let oracle = nuclear_prox_oracle(&x1, tau, rho, 20_000);
    assert!(best <= nuclear_prox_objective(&oracle, &x1, tau, rho) + 1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let probe = &state.z1 + random_matrix(&mut rng, x1.nrows(), x1.ncols(), -1e-3, 1e-3);
        assert!(best <= nuclear_prox_objective(&probe, &x1, tau, rho) + 1e-12);
    }

    // Z2 solves the non-negative L1 prox of A + U2 entrywise.
    let x2 = a + &state.u2;
    let thr = hyper.lambda / hyper.rho;
    for (z, x) in state.z2.iter().zip(x2.iter()) {
        assert!((z - scalar_prox_oracle(*x, thr)).abs() < 1e-12);
    }
}

#[test]
fn duals_accumulate_primal_residuals() {
    let (_, mut fitter) = perturbed_fitter(9, 2);
    fitter.update_auxiliaries().unwrap();
    let before = fitter.state().clone();
    fitter.update_duals();
    let a = fitter.model().a.clone();
    let s = fitter.state();
    assert!((&s.u1 - (&before.u1 + &a - &before.z1)).amax() < 1e-15);
    assert!((&s.u2 - (&before.u2 + &a - &before.z2)).amax() < 1e-15);
}

#[test]
fn zero_penalties_leave_auxiliaries_equal_to_their_inputs() {
    let (_, mut fitter) = perturbed_fitter(13, 2);
    fitter.model_mut().hyper.tau = 0.0;
    fitter.model_mut().hyper.lambda = 0.0;
    fitter.update_auxiliaries().unwrap();
    let a = &fitter.model().a;
    let s = fitter.state();
    assert!((&s.z1 - (a + &s.u1)).amax() < 1e-10);
    let projected = (a + &s.u2).map(|v| v.max(0.0));
    assert_eq!(s.z2, projected);
}

#[test]
fn decay_shrinks_with_depth_and_alpha() {
    for alpha in [0.1, 0.5, 2.0] {
        let h = MftciHyper { alpha, ..MftciHyper::default() };
        assert!(h.decay(1) < 1.0);
        assert!(h.decay(2) < h.decay(1));
        assert!((h.decay(2) - h.decay(1).powi(2)).abs() < 1e-15);
    }
    let low = MftciHyper { alpha: 0.1, ..MftciHyper::default() };
    let high = MftciHyper { alpha: 1.0, ..MftciHyper::default() };
    assert!(high.decay(1) < low.decay(1));
}

#[test]
fn residual_trace_has_one_entry_per_iteration() {
    let (data, _) = generate_synthetic(&SyntheticConfig {
        n_students: 40,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let (_, state) = fit(&data, small_hyper()).unwrap();
    assert!(state.iterations() >= 1 && state.iterations() <= 10);
    assert_eq!(state.primal_r1.len(), state.iterations());
    assert_eq!(state.primal_r2.len(), state.iterations());
    let mut csv = Vec::new();
    state.write_trace_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), state.iterations() + 1);
    assert!(text.starts_with("iter,objective,primal_r1,primal_r2\n"));
}

#[test]
fn too_few_terms_is_rejected() {
    let data = dense_instance(3, 3, 2, 0);
    assert!(Fitter::new(&data, MftciHyper::default()).is_err());
    assert!(Fitter::new(&data, MftciHyper { previous_terms: 1, ..MftciHyper::default() }).is_ok());
}

#[test]
fn svd_shrinkage_rejects_non_finite_input() {
    let mut x = DMatrix::zeros(3, 3);
    x[(1, 1)] = f64::NAN;
    assert!(prox::shrink_singular_values(&x, 0.1).is_err());
}
