use lowrank::aca::{aca2_dense, AcaOptions, RowRule};
use lowrank::eim::{eim_greedy, eim_interpolate, EimOptions, Norm};
use lowrank::gappy::gappy_gram;
use lowrank::kernels::*;
use lowrank::pod::{pod_basis, pod_error, pod_project, Truncation};
use lowrank::sampling::{format_matrix_csv, parse_matrix_csv, Grid};
use lowrank::verify::{check_equivalence_aca_eim, random_low_rank};
use lowrank::SnapshotMatrix;
use proptest::prelude::*;

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = DenseMatrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(m, n)| {
        prop::collection::vec(-10.0f64..10.0, m * n).prop_map(move |d| DenseMatrix::new(m, n, d).unwrap())
    })
}

fn symmetric(max: usize) -> impl Strategy<Value = DenseMatrix> {
    (1..=max).prop_flat_map(|n| {
        prop::collection::vec(-5.0f64..5.0, n * n).prop_map(move |d| {
            let a = DenseMatrix::new(n, n, d).unwrap();
            DenseMatrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
        })
    })
}

/// Seed, shape and rank of a noisy low-rank matrix.
fn low_rank() -> impl Strategy<Value = (u64, usize, usize, usize)> {
    (any::<u64>(), 4usize..14, 4usize..12, 1usize..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eig_reconstructs(c in symmetric(30)) {
        let e = sym_eig(&c).unwrap();
        let v = &e.eigenvectors;
        let n = c.rows();
        let vtv = v.transpose().matmul(v).unwrap();
        prop_assert!(vtv.sub(&DenseMatrix::identity(n)).unwrap().max_abs() <= 1e-10);
        let lam = DenseMatrix::from_fn(n, n, |i, j| if i == j { e.eigenvalues[i] } else { 0.0 });
        let back = v.matmul(&lam).unwrap().matmul(&v.transpose()).unwrap();
        prop_assert!(back.sub(&c).unwrap().frobenius_norm() <= 1e-10 * c.frobenius_norm().max(1e-300));
        prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn singular_values_are_roots_of_gram_eigenvalues(a in matrix(12, 12)) {
        let s = svd(&a).unwrap().singular_values;
        let e = sym_eig(&a.transpose().matmul(&a).unwrap()).unwrap().eigenvalues;
        let top = s[0].max(1e-300);
        for (k, sv) in s.iter().enumerate() {
            let root = e[k].max(0.0).sqrt();
            // relative where the value is resolvable through the Gram matrix
            prop_assert!((sv - root).abs() <= 1e-8 * sv.max(1e-6 * top), "k {}: {} vs {}", k, sv, root);
        }
    }

    #[test]
    fn unit_lower_solve_inverts_multiplication(n in 1usize..12, d in prop::collection::vec(-1.0f64..1.0, 144), x in prop::collection::vec(-3.0f64..3.0, 12)) {
        let b = DenseMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Greater => d[i * 12 + j],
            std::cmp::Ordering::Less => 0.0,
        });
        let rhs = b.mul_vec(&x[..n]).unwrap();
        let got = solve_unit_lower_triangular(&b, &rhs).unwrap();
        for (g, e) in got.iter().zip(&x) {
            prop_assert!((g - e).abs() <= 1e-11 * (1.0 + e.abs()) * 10f64.powi(n as i32 / 4));
        }
    }

    #[test]
    fn pod_error_identity_and_projector((seed, m, n, r) in low_rank(), q in 0usize..6) {
        let s = SnapshotMatrix::from_matrix(random_low_rank(seed, m, n, r, 1e-2)).unwrap();
        let q = q.min(n).min(m);
        let b = pod_basis(&s, Truncation::Rank(q)).unwrap();
        let err = pod_error(&s, &b).unwrap();
        let predicted = b.trailing_error();
        prop_assert!((err - predicted).abs() <= 1e-8 * s.max_abs().max(err));
        if q > 0 {
            let f = s.snapshot(0);
            let (_, p) = pod_project(&b, &f).unwrap();
            let (_, pp) = pod_project(&b, &p).unwrap();
            for (a, c) in p.iter().zip(&pp) {
                prop_assert!((a - c).abs() <= 1e-10 * s.max_abs());
            }
            let resid: Vec<f64> = f.iter().zip(&p).map(|(a, c)| a - c).collect();
            for h in &b.basis {
                prop_assert!(s.inner(&resid, h).abs() <= 1e-10 * s.max_abs());
            }
        }
    }

    #[test]
    fn cross_approximation_interpolates_its_crosses((seed, m, n, r) in low_rank(), partial in any::<bool>()) {
        let a = random_low_rank(seed, m, n, r, 1e-3);
        let opts = if partial { AcaOptions::partial(1e-300, RowRule::Cyclic) } else { AcaOptions::global(1e-300) };
        let ca = aca2_dense(&a, None, &opts.with_max_rank(r)).unwrap();
        let approx = ca.approximation();
        let tol = 1e-10 * a.max_abs();
        for &i in &ca.tau {
            for j in 0..n {
                prop_assert!((approx[(i, j)] - a[(i, j)]).abs() <= tol);
            }
        }
        for &j in &ca.sigma {
            for i in 0..m {
                prop_assert!((approx[(i, j)] - a[(i, j)]).abs() <= tol);
            }
        }
    }

    #[test]
    fn eim_b_is_unit_lower_and_bounded((seed, m, n, r) in low_rank(), p in 0usize..3) {
        let norm = [Norm::L1, Norm::L2, Norm::Inf][p];
        let s = SnapshotMatrix::from_matrix(random_low_rank(seed, m, n, r, 1e-3)).unwrap();
        let e = eim_greedy(&s, &EimOptions::new(1e-300, norm).with_max_rank(r)).unwrap();
        for i in 0..e.rank() {
            prop_assert_eq!(e.b[(i, i)], 1.0);
            for j in 0..e.rank() {
                prop_assert!(e.b[(i, j)].abs() <= 1.0 + 1e-12);
                if j > i {
                    prop_assert!(e.b[(i, j)].abs() <= 1e-12);
                }
            }
        }
        let f = s.snapshot(n - 1);
        let (_, v) = eim_interpolate(&e, &f).unwrap();
        for &x in &e.interp_indices {
            prop_assert!((v[x] - f[x]).abs() <= 1e-10 * s.max_abs());
        }
    }

    #[test]
    fn gappy_gram_is_psd((seed, m, n, r) in low_rank(), picks in prop::collection::vec(any::<prop::sample::Index>(), 1..8)) {
        let s = SnapshotMatrix::from_matrix(random_low_rank(seed, m, n, r, 1e-3)).unwrap();
        let b = pod_basis(&s, Truncation::Rank(r.min(n))).unwrap();
        let mut sensors: Vec<usize> = picks.iter().map(|p| p.index(m)).collect();
        sensors.sort_unstable();
        sensors.dedup();
        let g = gappy_gram(&b.basis, &sensors, 1.0).unwrap();
        let e = sym_eig(&g).unwrap();
        prop_assert!(*e.eigenvalues.last().unwrap() >= -1e-12 * e.eigenvalues[0].abs().max(1e-300));
    }

    #[test]
    fn global_cross_and_sup_interpolation_agree((seed, m, n, r) in low_rank()) {
        let s = SnapshotMatrix::from_matrix(random_low_rank(seed, m, n, r, 1e-3)).unwrap();
        let rep = check_equivalence_aca_eim(&s, m.min(n)).unwrap();
        prop_assert!(rep.passed, "{:?}", rep.divergence);
    }

    #[test]
    fn csv_round_trip(a in matrix(8, 8), with_grids in any::<bool>()) {
        let s = if with_grids {
            let gx = Grid::from_points((0..a.rows()).map(|i| i as f64 * 0.37 - 1.0).collect()).unwrap();
            let gy = Grid::from_points((0..a.cols()).map(|j| (j as f64).exp()).collect()).unwrap();
            SnapshotMatrix::new(a, gx, gy).unwrap()
        } else {
            SnapshotMatrix::from_matrix(a).unwrap()
        };
        let back = parse_matrix_csv(&format_matrix_csv(&s)).unwrap();
        prop_assert_eq!(back.values(), s.values());
        prop_assert_eq!(back.grid_x().points(), s.grid_x().points());
        prop_assert_eq!(back.grid_y().points(), s.grid_y().points());
    }
}
