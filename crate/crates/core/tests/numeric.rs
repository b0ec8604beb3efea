use alpha_rim::gradcheck::{finite_diff_grad, DEFAULT_EPS};
use alpha_rim::init::{glorot_limit, glorot_uniform, orthogonal_init, InitSpec};
use alpha_rim::matrix::{matmul, softmax_rows};
use alpha_rim::{Error, Matrix, SeededRng};
use proptest::prelude::*;

fn naive_product(a: &Matrix, b: &Matrix) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; b.cols()]; a.rows()];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            for k in 0..a.cols() {
                *cell += a.get(i, k) * b.get(k, j);
            }
        }
    }
    out
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn jacobi_eigenvalues(m: &Matrix) -> Vec<f64> {
    let n = m.rows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).to_vec()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

#[test]
fn identity_product() {
    let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
    assert_eq!(matmul(&Matrix::identity(2), &m).unwrap(), m);
}

#[test]
fn hand_product() {
    let a = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
    let b = Matrix::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
    assert_eq!(matmul(&a, &b).unwrap().data(), &[11.0]);
}

#[test]
fn product_matches_triple_loop() {
    let mut rng = SeededRng::new(11);
    let a = rng.normal_matrix(3, 4);
    let b = rng.normal_matrix(4, 2);
    let got = matmul(&a, &b).unwrap();
    for (i, row) in naive_product(&a, &b).iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert!((got.get(i, j) - v).abs() <= 1e-12);
        }
    }
}

#[test]
fn mismatch_names_both_shapes() {
    let err = matmul(&Matrix::zeros(2, 3), &Matrix::zeros(2, 3)).unwrap_err();
    match &err {
        Error::Shape { left, right, .. } => assert_eq!((*left, *right), ((2, 3), (2, 3))),
        other => panic!("unexpected error {other:?}"),
    }
    assert!(err.to_string().contains("(2, 3)"));
}

#[test]
fn softmax_examples() {
    let m = Matrix::from_rows(&[
        vec![0.0, 0.0, 0.0],
        vec![1000.0, 0.0, 0.0],
        vec![1.0, 2.0, 3.0],
    ])
    .unwrap();
    let s = softmax_rows(&m);
    for v in s.row(0) {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
    assert!((s.get(1, 0) - 1.0).abs() < 1e-12);
    assert!(s.get(1, 1).abs() < 1e-12);
    let expected = [0.09003057317038046, 0.24472847105479767, 0.6652409557748219];
    for (v, e) in s.row(2).iter().zip(expected) {
        assert!((v - e).abs() < 1e-12);
    }
}

#[test]
fn glorot_examples() {
    let mut rng = SeededRng::new(1);
    assert!(glorot_uniform(1, 5, &mut rng).data().iter().all(|v| v.abs() <= 1.0));
    assert!(glorot_uniform(3, 3, &mut rng).max_abs() <= 1.0);
    let big = glorot_uniform(100, 100, &mut SeededRng::new(42));
    let limit = glorot_limit(100, 100);
    let mean = big.data().iter().sum::<f64>() / 10_000.0;
    assert!(mean.abs() <= 3.0 * (limit / 3f64.sqrt()) / 100.0);
}

#[test]
fn orthogonal_examples() {
    let one = orthogonal_init(1, &mut SeededRng::new(3));
    assert!((one.get(0, 0).abs() - 1.0).abs() < 1e-15);

    let w = orthogonal_init(8, &mut SeededRng::new(8));
    let gram = matmul(&w.transpose(), &w).unwrap();
    for ev in jacobi_eigenvalues(&gram) {
        // singular values are square roots of the Gram eigenvalues
        assert!((ev.sqrt() - 1.0).abs() < 1e-8, "singular value {}", ev.sqrt());
    }
}

#[test]
fn orthogonal_needs_square_target() {
    let mut rng = SeededRng::new(0);
    assert!(InitSpec::Orthogonal.build(3, 4, &mut rng).is_err());
    assert!(InitSpec::Orthogonal.build(3, 3, &mut rng).is_ok());
    assert_eq!(InitSpec::Zeros.build(2, 2, &mut rng).unwrap(), Matrix::zeros(2, 2));
}

#[test]
fn finite_difference_examples() {
    let g = finite_diff_grad(|t| t[0] * t[0], &[3.0], DEFAULT_EPS).unwrap();
    assert!((g[0] - 6.0).abs() < 1e-6);
    let g = finite_diff_grad(|t| t[0] * t[1], &[2.0, 5.0], DEFAULT_EPS).unwrap();
    assert!((g[0] - 5.0).abs() < 1e-6 && (g[1] - 2.0).abs() < 1e-6);
}

#[test]
fn finite_difference_reports_bad_coordinate() {
    let err = finite_diff_grad(|t| if t[1] > 1.0 { f64::NAN } else { t[0] }, &[0.0, 1.0], 1e-3)
        .unwrap_err();
    assert!(matches!(err, Error::NonFiniteOracle { coordinate: 1 }));
}

#[test]
fn draws_are_reproducible() {
    let a = glorot_uniform(4, 6, &mut SeededRng::new(77));
    let b = glorot_uniform(4, 6, &mut SeededRng::new(77));
    assert_eq!(a.data(), b.data());
    let a = orthogonal_init(5, &mut SeededRng::new(77));
    let b = orthogonal_init(5, &mut SeededRng::new(77));
    assert_eq!(a.data(), b.data());
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-10.0f64..10.0, rows * cols)
        .prop_map(move |d| Matrix::new(rows, cols, d).unwrap())
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one(m in (1usize..6, 1usize..8).prop_flat_map(|(r, c)| matrix(r, c))) {
        let s = softmax_rows(&m);
        for r in 0..s.rows() {
            let sum: f64 = s.row(r).iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(s.row(r).iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn softmax_shift_invariant(m in matrix(3, 5), shift in -500.0f64..500.0) {
        let shifted = m.map(|v| v + shift);
        prop_assert!(softmax_rows(&m).max_abs_diff(&softmax_rows(&shifted)) <= 1e-12);
    }

    #[test]
    fn orthogonal_gram_is_identity(n in 1usize..=16, seed in any::<u64>()) {
        let w = orthogonal_init(n, &mut SeededRng::new(seed));
        let gram = matmul(&w.transpose(), &w).unwrap();
        prop_assert!(gram.max_abs_diff(&Matrix::identity(n)) <= 1e-10);
    }

    #[test]
    fn glorot_never_exceeds_limit(rows in 1usize..40, cols in 1usize..40, seed in any::<u64>()) {
        let w = glorot_uniform(rows, cols, &mut SeededRng::new(seed));
        prop_assert!(w.max_abs() <= glorot_limit(rows, cols));
    }

    #[test]
    fn product_is_associative(
        (a, b, c) in (1usize..5, 1usize..5, 1usize..5, 1usize..5)
            .prop_flat_map(|(p, q, r, s)| (matrix(p, q), matrix(q, r), matrix(r, s)))
    ) {
        let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
        let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
        let scale = left.max_abs().max(1.0);
        prop_assert!(left.max_abs_diff(&right) <= 1e-9 * scale);
    }
}
