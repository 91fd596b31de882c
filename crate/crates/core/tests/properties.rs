//! Structural invariants over seeded random pencils and pairs.

mod common;

use gsma::direct::{algorithm5, algorithm6};
use gsma::generalized::{HForm, SolverOptions, algorithm3, algorithm4, h_general};
use gsma::linalg::{C64, CMat, CVec};
use gsma::pencil::{oracle_full_spectrum, projectors, residual};
use gsma::problems::{random_pair, random_solvable_pencil};
use gsma::report::order_fit;
use gsma::select::{Selector, pair_modes};
use gsma::verify::{Suite, VerifyConfig, run_suite};
use proptest::prelude::*;
use rand::RngExt;

use common::{near_mode, rng};

fn frob(m: &CMat) -> f64 {
    m.norm()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn normalized_pair_is_biorthogonal(seed in any::<u64>(), m in 6usize..24, n in 1usize..4) {
        let mut r = rng(seed);
        let rank = r.random_range(n.max(m / 2)..=m);
        let pencil = random_solvable_pencil(&mut r, m, rank, seed % 2 == 0).unwrap();
        let pair = random_pair(&mut r, &pencil, n, false).unwrap();
        let g = pair.left().ad_mul(&pencil.e().mul(pair.right()));
        prop_assert!(frob(&(g - CMat::identity(n, n))) <= 1e-10);
    }

    #[test]
    fn projector_is_idempotent_and_absorbs_e(seed in any::<u64>(), m in 6usize..24, n in 1usize..4) {
        let mut r = rng(seed);
        let rank = r.random_range(n.max(m / 2)..=m);
        let pencil = random_solvable_pencil(&mut r, m, rank, true).unwrap();
        let pair = random_pair(&mut r, &pencil, n, false).unwrap();
        let pr = projectors(&pair, &pencil).unwrap();
        let e = pencil.e_dense();
        let scale = 1.0 + frob(&pr.q);
        prop_assert!(frob(&(&pr.q * &pr.q - &pr.q)) <= 1e-9 * scale);
        prop_assert!(frob(&(e * &pr.q - &pr.q)) <= 1e-9 * scale);
        prop_assert!(frob(&(&pr.q * e - &pr.q)) <= 1e-9 * scale);
        prop_assert!(frob(&(&pr.p + &pr.q - CMat::identity(m, m))) <= 1e-12);
    }

    #[test]
    fn correction_forms_agree(seed in any::<u64>(), m in 6usize..20, n in 1usize..4, re in -3.0f64..3.0, im in 0.1f64..2.0) {
        let mut r = rng(seed);
        let rank = r.random_range(n.max(m / 2)..=m);
        let pencil = random_solvable_pencil(&mut r, m, rank, true).unwrap();
        let pair = random_pair(&mut r, &pencil, n, false).unwrap();
        let lambda = C64::new(re, im);
        let qa = h_general(&pencil, &pair, lambda, HForm::Qa).unwrap();
        for form in [HForm::Aq, HForm::Anticommutator] {
            let other = h_general(&pencil, &pair, lambda, form).unwrap();
            prop_assert!(frob(&(&other - &qa)) <= 1e-8 * (1.0 + frob(&qa)));
        }
    }

    #[test]
    fn identity_suites_hold_for_any_seed(seed in any::<u64>()) {
        let cfg = VerifyConfig { seed, instances: Some(3), fault: 0.0 };
        for suite in [Suite::Classical, Suite::Invariance, Suite::DirectInverse, Suite::DirectCorrection] {
            let res = run_suite(suite, &cfg).unwrap();
            prop_assert!(res.passed, "{} deviation {:.2e}", suite.name(), res.max_deviation);
        }
    }

    #[test]
    fn oracle_modes_satisfy_the_pencil(seed in any::<u64>(), m in 4usize..24) {
        let mut r = rng(seed);
        let rank = r.random_range(1..=m);
        let pencil = random_solvable_pencil(&mut r, m, rank, seed % 2 == 1).unwrap();
        let spectrum = oracle_full_spectrum(&pencil).unwrap();
        prop_assert_eq!(spectrum.modes.len(), rank);
        for mode in &spectrum.modes {
            let (rv, rw) = residual(&pencil, mode.lambda, &mode.v, &mode.w);
            prop_assert!(rv.max(rw) <= 1e-8 * (1.0 + mode.lambda.norm()));
        }
    }

    #[test]
    fn iterations_reach_the_nearby_mode(seed in any::<u64>(), m in 8usize..24) {
        let mut r = rng(seed);
        let case = near_mode(&mut r, m, seed % 2 == 0, 0.3);
        let opts = SolverOptions { max_iter: 500, ..SolverOptions::default() };
        let runs = [
            algorithm3(&case.pencil, &case.pair, &Selector::default(), &opts),
            algorithm4(&case.pencil, &case.pair, &Selector::default(), &opts),
            algorithm5(&case.pencil, &case.pair, &Selector::default(), &opts),
            algorithm6(&case.pencil, &case.pair, &Selector::default(), &opts),
        ];
        for run in runs {
            let (est, _) = run.unwrap();
            prop_assert!((est.lambda - case.mode.lambda).norm() <= 1e-8 * (1.0 + case.mode.lambda.norm()));
        }
    }

    #[test]
    fn order_fit_recovers_the_exponent(p in 1.2f64..3.0, e0 in 0.01f64..0.5) {
        let mut errors = vec![e0];
        while errors.len() < 6 {
            let last = *errors.last().unwrap();
            errors.push(last.powf(p));
        }
        let tail: Vec<f64> = errors.into_iter().filter(|&e| e > 1e-280).collect();
        prop_assume!(tail.len() >= 4);
        prop_assert!((order_fit(&tail, 4).unwrap() - p).abs() <= 1e-6);
    }

    #[test]
    fn pairing_recovers_a_permutation(seed in any::<u64>(), k in 1usize..6) {
        let mut r = rng(seed);
        let prev: Vec<CVec> = (0..k).map(|j| {
            let mut v = CVec::from_fn(k, |_, _| C64::new(r.random_range(-0.1..0.1), 0.0));
            v[j] = C64::new(1.0, 0.0);
            v
        }).collect();
        let mut perm: Vec<usize> = (0..k).collect();
        for i in (1..k).rev() {
            perm.swap(i, r.random_range(0..=i));
        }
        let mut new = vec![CVec::zeros(k); k];
        for (i, &j) in perm.iter().enumerate() {
            new[j] = prev[i].clone() * C64::new(0.0, -2.0);
        }
        prop_assert_eq!(pair_modes(&prev, &new).unwrap(), perm);
    }
}
