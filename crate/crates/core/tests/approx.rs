mod common;

use common::random_system;
use cvxq::approx::{
    eval_j, eval_q, greedy_policy, min_q, project_constraints, Architecture, BinnedBasis, BinnedSpec, ConstraintSpec,
    FnBasis, QuadBasis, Tabular, TabularForm, ThetaFile,
};
use cvxq::env::{FiniteSystem, InputSet, MountainCar};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn small_binned(enrichment: bool) -> BinnedBasis {
    BinnedBasis::new(BinnedSpec {
        nz: 8,
        nv: 6,
        enrichment,
        ..BinnedSpec::default()
    })
}

fn any_input() -> InputSet {
    InputSet::Box {
        lo: vec![f64::NEG_INFINITY],
        hi: vec![f64::INFINITY],
    }
}

#[test]
fn zero_theta_gives_zero_functions() {
    let sys = random_system(5, 3, 1);
    let tab = Tabular::new(&sys, TabularForm::Advantage);
    let quad = QuadBasis::new(2, 1, true);
    let bin = small_binned(true);
    assert_eq!(eval_j(&tab, &vec![0.0; tab.dim()], &[3.0]).unwrap(), 0.0);
    assert_eq!(eval_q(&tab, &vec![0.0; tab.dim()], &[3.0], &[2.0]).unwrap(), 0.0);
    assert_eq!(eval_q(&quad, &vec![0.0; quad.dim()], &[0.3, -2.0], &[1.5]).unwrap(), 0.0);
    assert_eq!(eval_q(&bin, &vec![0.0; bin.dim()], &[-0.3, 0.01], &[1.0]).unwrap(), 0.0);
}

#[test]
fn tabular_features_are_one_hot() {
    let sys = random_system(4, 3, 2);
    let tab = Tabular::new(&sys, TabularForm::Plain);
    assert_eq!(tab.dim(), 3 + 12);
    for (x, u) in sys.pairs() {
        let psi: Vec<(usize, f64)> = tab.psi(&[x as f64], &[u as f64]).iter().collect();
        assert_eq!(psi, vec![(tab.q_index(x, u), 1.0)]);
    }
    assert_eq!(tab.psi_j(&[0.0]).nnz(), 0);
    assert_eq!(tab.psi_j(&[2.0]).iter().collect::<Vec<_>>(), vec![(1, 1.0)]);
    let unpinned = Tabular::unpinned(4, 3, TabularForm::Plain);
    assert_eq!(unpinned.d_j(), 4);
}

#[test]
fn scalar_quadratic_examples() {
    let b = QuadBasis::new(1, 1, false);
    let theta = [2.0, 1.0, 1.0];
    assert_eq!(eval_q(&b, &theta, &[1.0], &[1.0]).unwrap(), 5.0);
    for x in [-2.0, 0.5, 1.0, 3.0] {
        let (u, v) = min_q(&b, &theta, &[x], &any_input()).unwrap();
        assert!((u[0] + x).abs() < 1e-14);
        assert!((v - x * x).abs() < 1e-12);
    }
    assert!(min_q(&b, &[1.0, 0.0, -1.0], &[1.0], &any_input()).is_err());
    let (mq, mj) = b.matrices(&theta);
    assert_eq!(mq, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]));
    assert_eq!(mj, DMatrix::zeros(1, 1));
}

#[test]
fn quadratic_encode_round_trip() {
    let b = QuadBasis::new(2, 1, true);
    let mq = DMatrix::from_row_slice(3, 3, &[3.0, 0.5, -1.0, 0.5, 2.0, 0.2, -1.0, 0.2, 4.0]);
    let mj = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 5.0]);
    let theta = b.encode(&mq, Some(&mj));
    assert_eq!(theta.len(), b.dim());
    let (mq2, mj2) = b.matrices(&theta);
    assert_eq!(mq, mq2);
    assert_eq!(mj, mj2);
    let x = [0.7, -1.3];
    let z = nalgebra::DVector::from_column_slice(&[0.7, -1.3, 0.4]);
    let xv = nalgebra::DVector::from_column_slice(&x);
    assert!((eval_q(&b, &theta, &x, &[0.4]).unwrap() - z.dot(&(&mq * &z))).abs() < 1e-12);
    assert!((eval_j(&b, &theta, &x).unwrap() - xv.dot(&(&mj * &xv))).abs() < 1e-12);
}

#[test]
fn finite_minimum_breaks_ties_low() {
    let sys = random_system(3, 3, 3);
    let tab = Tabular::new(&sys, TabularForm::Plain);
    let q = vec![vec![0.0, 0.0, 0.0], vec![2.0, 1.0, 1.0], vec![3.0, 4.0, 0.5]];
    let theta = tab.encode(&[0.0, 0.0, 0.0], &q);
    let inputs = InputSet::Finite((0..3).map(|u| vec![u as f64]).collect());
    assert_eq!(min_q(&tab, &theta, &[1.0], &inputs).unwrap(), (vec![1.0], 1.0));
    assert_eq!(min_q(&tab, &theta, &[2.0], &inputs).unwrap(), (vec![2.0], 0.5));
    assert_eq!(min_q(&tab, &theta, &[0.0], &inputs).unwrap(), (vec![0.0], 0.0));
    let policy = greedy_policy(&tab, &theta, &sys);
    assert_eq!(policy(&[1.0]).unwrap(), vec![1.0]);
}

#[test]
fn advantage_projection_examples() {
    let arch = FnBasis::new("pair", 2, |_| vec![1.0, 0.0], |_, u| vec![1.0, u[0]])
        .with_constraint(ConstraintSpec::AdvantageCone { d_j: 1 });
    assert_eq!(project_constraints(&arch, &[1.0, -2.0]).unwrap(), vec![1.0, 0.0]);
    assert_eq!(project_constraints(&arch, &[-1.0, 2.0]).unwrap(), vec![-1.0, 2.0]);
    assert!(project_constraints(&arch, &[1.0]).is_err());
}

#[test]
fn custom_cone_projection() {
    // Y θ ≤ 0 with Y = [1 1]: projection of (1, 1) is (0, 0).
    let y = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
    let arch = FnBasis::new("halfplane", 2, |_| vec![0.0, 0.0], |x, _| vec![x[0], 1.0]).with_constraint(ConstraintSpec::Custom(y));
    let p = project_constraints(&arch, &[1.0, 1.0]).unwrap();
    assert!(p[0].abs() < 1e-6 && p[1].abs() < 1e-6, "{p:?}");
    assert_eq!(project_constraints(&arch, &[-1.0, 0.5]).unwrap(), vec![-1.0, 0.5]);
}

#[test]
fn theta_file_checks_fingerprint() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("theta.json");
    let a = small_binned(true);
    let b = small_binned(false);
    let theta: Vec<f64> = (0..a.dim()).map(|i| i as f64 * 0.25).collect();
    ThetaFile::new(&a, &theta).save(&path).unwrap();
    let back = ThetaFile::load(&path).unwrap();
    assert_eq!(back.theta_for(&a).unwrap(), theta);
    assert!(matches!(back.theta_for(&b), Err(cvxq::Error::FingerprintMismatch { .. })));
    assert_ne!(a.fingerprint(), b.fingerprint());
}

#[test]
fn binned_goal_normalization() {
    let mc = MountainCar::default();
    for enrichment in [false, true] {
        let bin = small_binned(enrichment);
        assert_eq!(bin.psi_j(&mc.goal()).nnz(), 0);
        assert_eq!(bin.psi(&mc.goal(), &[1.0]).nnz(), 0);
        assert_eq!(bin.cell(&mc.goal()), None);
    }
}

#[test]
fn pathology_theta_is_flat() {
    let bin = small_binned(true);
    let theta = bin.pathology_theta(5.0);
    for x in [[-1.1, 0.0], [-0.2, 0.05], [0.45, 0.069]] {
        assert_eq!(eval_j(&bin, &theta, &x).unwrap(), 5.0);
    }
}

fn mc_state() -> impl Strategy<Value = Vec<f64>> {
    (-1.2f64..0.5, -0.07f64..0.07).prop_map(|(z, v)| vec![z, v])
}

proptest! {
    #[test]
    fn binned_value_bins_partition(x in mc_state()) {
        let bin = small_binned(false);
        let psi = bin.psi_j(&x);
        prop_assert_eq!(psi.nnz(), 1);
        let (i, v) = psi.iter().next().unwrap();
        prop_assert_eq!(v, 1.0);
        prop_assert_eq!(Some(i), bin.bin_index(&x));
        let (iz, iv) = bin.cell(&x).unwrap();
        prop_assert_eq!(i, iz * 6 + iv);
    }

    #[test]
    fn binned_enriched_features_are_nonnegative(x in mc_state(), right in prop::bool::ANY) {
        let bin = small_binned(true);
        let u = [if right { 1.0 } else { -1.0 }];
        for (_, v) in bin.psi(&x, &u).iter() {
            prop_assert!(v >= 0.0);
        }
    }

    #[test]
    fn same_pattern_same_indicators(a in mc_state(), dz in -0.02f64..0.02, dv in -0.002f64..0.002, right in prop::bool::ANY) {
        let bin = small_binned(false);
        let b = vec![(a[0] + dz).min(0.499), (a[1] + dv).clamp(-0.07, 0.07)];
        let u = [if right { 1.0 } else { -1.0 }];
        if bin.pattern_key(&a, &u) == bin.pattern_key(&b, &u) {
            prop_assert_eq!(bin.psi(&a, &u), bin.psi(&b, &u));
        }
        prop_assert_eq!(bin.pattern_key(&a, &u), bin.pattern_key(&a, &u));
    }

    #[test]
    fn cone_theta_keeps_q_above_j(
        theta in proptest::collection::vec(-5.0f64..5.0, 3 * 48),
        x in mc_state(),
        right in prop::bool::ANY,
    ) {
        let bin = small_binned(false);
        let theta = project_constraints(&bin, &theta).unwrap();
        let u = [if right { 1.0 } else { -1.0 }];
        prop_assert!(eval_q(&bin, &theta, &x, &u).unwrap() >= eval_j(&bin, &theta, &x).unwrap() - 1e-12);
    }

    #[test]
    fn projection_is_idempotent(theta in proptest::collection::vec(-5.0f64..5.0, 3 * 48)) {
        let bin = small_binned(true);
        let once = project_constraints(&bin, &theta).unwrap();
        let twice = project_constraints(&bin, &once).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn equilibrium_is_normalized(seed in 0u64..500, theta in proptest::collection::vec(-5.0f64..5.0, 30)) {
        let sys = random_system(5, 3, seed);
        for form in [TabularForm::Plain, TabularForm::Advantage] {
            let tab = Tabular::new(&sys, form);
            let th = &theta[..tab.dim()];
            prop_assert_eq!(eval_j(&tab, th, &[0.0]).unwrap(), 0.0);
        }
        let quad = QuadBasis::new(2, 1, true);
        prop_assert_eq!(eval_j(&quad, &theta[..quad.dim()], &[0.0, 0.0]).unwrap(), 0.0);
        prop_assert_eq!(eval_q(&quad, &theta[..quad.dim()], &[0.0, 0.0], &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn greedy_is_scale_invariant(seed in 0u64..500, theta in proptest::collection::vec(-5.0f64..5.0, 29), scale in 0.01f64..100.0) {
        let sys = random_system(6, 4, seed);
        let tab = Tabular::new(&sys, TabularForm::Plain);
        let th = &theta[..tab.dim()];
        let scaled: Vec<f64> = th.iter().map(|v| v * scale).collect();
        let inputs = InputSet::Finite((0..4).map(|u| vec![u as f64]).collect());
        for x in 0..6 {
            let a = min_q(&tab, th, &[x as f64], &inputs).unwrap();
            let b = min_q(&tab, &scaled, &[x as f64], &inputs).unwrap();
            prop_assert_eq!(a.0, b.0);
        }
    }

    #[test]
    fn tabular_encode_decode(seed in 0u64..500, vals in proptest::collection::vec(0.0f64..10.0, 24)) {
        let sys = random_system(6, 3, seed);
        let mut j: Vec<f64> = vals[..6].to_vec();
        j[0] = 0.0;
        let q: Vec<Vec<f64>> = (0..6).map(|x| vals[6 + 3 * x..9 + 3 * x].to_vec()).collect();
        for form in [TabularForm::Plain, TabularForm::Advantage] {
            let tab = Tabular::new(&sys, form);
            let theta = tab.encode(&j, &q);
            let (j2, q2) = tab.decode(&theta);
            for x in 0..6 {
                prop_assert!((j2[x] - j[x]).abs() < 1e-12);
                for u in 0..3 {
                    prop_assert!((q2[x][u] - q[x][u]).abs() < 1e-12);
                    prop_assert!((eval_q(&tab, &theta, &[x as f64], &[u as f64]).unwrap() - q[x][u]).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn finite_system_states_round_trip() {
    for i in 0..10 {
        assert_eq!(FiniteSystem::index(&FiniteSystem::state(i)), i);
    }
}
