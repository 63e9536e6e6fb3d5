mod common;

use common::*;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use tlrr_core::solver::{prox_l21, prox_tensor_nuclear, solve_j_subproblem, JSolveCache};
use tlrr_core::solver_missing::{prox_l1_masked, prox_l21_masked, ObservationMask};
use tlrr_core::synth::lift_vector_representation;
use tlrr_core::tlinalg::{conj_transpose, identity_tensor, t_product};
use tlrr_core::{Tensor3, TransformKind};

fn kind_strategy() -> impl Strategy<Value = TransformKind> {
    prop_oneof![
        Just(TransformKind::Dft),
        Just(TransformKind::Dct),
        Just(TransformKind::RandomOrthogonal),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn nuclear_prox_matches_eigen_oracle(
        kind in kind_strategy(), n1 in 1usize..7, n2 in 1usize..7, n3 in 1usize..7,
        thresh in 0.05f64..2.0, seed in any::<u64>(),
    ) {
        let spec = spec(kind, n3, seed);
        let b = normal(&mut rng(seed), n1, n2, n3);
        let fast = prox_tensor_nuclear(&b, thresh, &spec).unwrap();
        let slices: Vec<_> = forward(&b, &spec).iter().map(|m| svt(m, thresh)).collect();
        prop_assert!(fast.max_abs_diff(&inverse(&slices, &spec)).unwrap() <= 1e-6);
    }

    #[test]
    fn nuclear_prox_beats_perturbations(
        kind in kind_strategy(), n3 in 1usize..5, thresh in 0.05f64..1.5, seed in any::<u64>(),
    ) {
        // the prox objective is strongly convex, so nearby points cannot do better
        let spec = spec(kind, n3, seed);
        let mut r = rng(seed);
        let b = normal(&mut r, 3, 4, n3);
        let out = prox_tensor_nuclear(&b, thresh, &spec).unwrap();
        let f = |z: &Tensor3| thresh * nuclear_norm(z, &spec) + 0.5 * z.sub(&b).unwrap().frobenius().powi(2);
        let best = f(&out);
        for _ in 0..5 {
            let step = r.random_range(1e-4..1e-1);
            let z = out.add_scaled(step, &normal(&mut r, 3, 4, n3)).unwrap();
            prop_assert!(f(&z) >= best - 1e-9);
        }
    }

    #[test]
    fn l21_prox_matches_scalar_minimization(
        n1 in 1usize..7, n2 in 1usize..7, n3 in 1usize..7,
        thresh in 0.05f64..4.0, seed in any::<u64>(),
    ) {
        let b = normal(&mut rng(seed), n1, n2, n3);
        let fast = prox_l21(&b, thresh).unwrap();
        // each column of the minimizer is a shrunk copy of B's column
        let scales: Vec<f64> = b
            .column_sq_norms()
            .iter()
            .map(|&s| golden_min(|t| thresh * t * s.sqrt() + 0.5 * (1.0 - t).powi(2) * s, 0.0, 1.0))
            .collect();
        let mut slow = b.clone();
        slow.scale_columns(&scales);
        prop_assert!(fast.max_abs_diff(&slow).unwrap() <= 1e-6);
    }

    #[test]
    fn masked_proxes_reduce_under_full_mask(
        n1 in 1usize..7, n2 in 1usize..7, n3 in 1usize..7,
        thresh in 0.05f64..4.0, seed in any::<u64>(),
    ) {
        let b = normal(&mut rng(seed), n1, n2, n3);
        let full = ObservationMask::full(b.dims());
        prop_assert_eq!(prox_l21_masked(&b, &full, thresh).unwrap(), prox_l21(&b, thresh).unwrap());
        let soft = Tensor3::from_fn(n1, n2, n3, |i, j, k| {
            let v = b.get(i, j, k);
            v.signum() * (v.abs() - thresh).max(0.0)
        });
        prop_assert_eq!(prox_l1_masked(&b, &full, thresh).unwrap(), soft);
    }

    #[test]
    fn masked_proxes_leave_hidden_entries(
        n1 in 1usize..6, n2 in 1usize..6, n3 in 1usize..6,
        thresh in 0.05f64..2.0, seed in any::<u64>(),
    ) {
        let mut r = rng(seed);
        let b = normal(&mut r, n1, n2, n3);
        let bits: Vec<bool> = (0..b.len()).map(|_| r.random_bool(0.7)).collect();
        let mask = ObservationMask::from_bits(b.dims(), bits).unwrap();
        let out = prox_l21_masked(&b, &mask, thresh).unwrap();
        // observed part equals the plain prox of the zero-filled tensor
        let zero_filled = Tensor3::from_fn(n1, n2, n3, |i, j, k| {
            if mask.is_observed(i, j, k) { b.get(i, j, k) } else { 0.0 }
        });
        let plain = prox_l21(&zero_filled, thresh).unwrap();
        for i in 0..n1 {
            for j in 0..n2 {
                for k in 0..n3 {
                    let want = if mask.is_observed(i, j, k) { plain.get(i, j, k) } else { b.get(i, j, k) };
                    prop_assert!((out.get(i, j, k) - want).abs() <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn lift_reproduces_vector_representation(
        kind in kind_strategy(), n1 in 1usize..6, n3 in 1usize..6, p in 1usize..6,
        n2 in 1usize..6, seed in any::<u64>(),
    ) {
        let spec = spec(kind, n3, seed);
        let mut r = rng(seed);
        let a_mat = Array2::from_shape_fn((n1 * n3, p), |_| r.random_range(-1.0..1.0));
        let z_mat = Array2::from_shape_fn((p, n2), |_| r.random_range(-1.0..1.0));
        let (a, z) = lift_vector_representation(&a_mat, &z_mat, &spec).unwrap();
        let x = t_product(&a, &z, &spec).unwrap();
        let y = a_mat.dot(&z_mat);
        for j in 0..n2 {
            for k in 0..n3 {
                for i in 0..n1 {
                    prop_assert!((x.get(i, j, k) - y[[i + n1 * k, j]]).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn j_subproblem_solves_normal_equation(
        kind in kind_strategy(), n1 in 1usize..7, r_ in 1usize..5, n2 in 1usize..7,
        n3 in 1usize..6, seed in any::<u64>(),
    ) {
        let spec = spec(kind, n3, seed);
        let mut r = rng(seed);
        let d = normal(&mut r, n1, r_, n3);
        let p1 = normal(&mut r, r_, n2, n3);
        let p2 = normal(&mut r, n1, n2, n3);
        let cache = JSolveCache::new(&d, &spec).unwrap();
        let j = solve_j_subproblem(&p1, &p2, &d, &cache, &spec).unwrap();
        let dh = conj_transpose(&d, &spec).unwrap();
        let m = |x: &Tensor3, y: &Tensor3| t_product(x, y, &spec).unwrap();
        let lhs = m(&m(&dh, &d), &j).add(&j).unwrap();
        let rhs = p1.add(&m(&dh, &p2)).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-8 * rhs.max_abs().max(1.0));
    }
}

#[test]
fn scalar_prox_examples() {
    for kind in KINDS {
        let spec = spec(kind, 1, 3);
        let b = Tensor3::from_vec((1, 1, 1), vec![3.0]).unwrap();
        let out = prox_tensor_nuclear(&b, 2.0, &spec).unwrap();
        assert!((out.get(0, 0, 0) - 1.0).abs() < 1e-12, "{kind:?}");
        let small = Tensor3::from_vec((1, 1, 1), vec![1.0]).unwrap();
        assert!(prox_tensor_nuclear(&small, 2.0, &spec).unwrap().max_abs() < 1e-12);
    }
    let col = Tensor3::from_vec((2, 1, 1), vec![3.0, 4.0]).unwrap();
    let out = prox_l21(&col, 2.0).unwrap();
    assert!((out.get(0, 0, 0) - 1.8).abs() < 1e-15 && (out.get(1, 0, 0) - 2.4).abs() < 1e-15);
}

#[test]
fn single_atom_lift_is_ivec() {
    for kind in KINDS {
        let spec = spec(kind, 4, 5);
        let a_mat = Array2::from_shape_fn((12, 1), |(i, _)| i as f64 - 5.5);
        let z_mat = Array2::from_elem((1, 1), 1.0);
        let (a, z) = lift_vector_representation(&a_mat, &z_mat, &spec).unwrap();
        // Z is the identity tube
        assert!(z.max_abs_diff(&identity_tensor(1, &spec).unwrap()).unwrap() < 1e-12);
        assert!(t_product(&a, &z, &spec).unwrap().max_abs_diff(&a).unwrap() < 1e-12);
        assert!(lift_vector_representation(&Array2::zeros((10, 1)), &z_mat, &spec).is_err());
    }
}

#[test]
fn j_subproblem_degenerate_cases() {
    let dft = spec(TransformKind::Dft, 3, 0);
    let mut r = rng(2);
    let d = Tensor3::zeros(4, 2, 3);
    let p1 = normal(&mut r, 2, 5, 3);
    let p2 = normal(&mut r, 4, 5, 3);
    let cache = JSolveCache::new(&d, &dft).unwrap();
    let j = solve_j_subproblem(&p1, &p2, &d, &cache, &dft).unwrap();
    assert!(j.max_abs_diff(&p1).unwrap() < 1e-14);
    let zero = solve_j_subproblem(
        &Tensor3::zeros(2, 5, 3),
        &Tensor3::zeros(4, 5, 3),
        &d,
        &cache,
        &dft,
    )
    .unwrap();
    assert!(zero.is_zero());
    // a cache built for another transform is refused
    let other = spec(TransformKind::Dct, 3, 0);
    assert!(solve_j_subproblem(&p1, &p2, &d, &cache, &other).is_err());
}
