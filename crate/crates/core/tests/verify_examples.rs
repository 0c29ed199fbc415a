use lowrank::kernels::DenseMatrix;
use lowrank::sampling::{materialize_family, uniform_grid, Family};
use lowrank::verify::*;
use lowrank::SnapshotMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn family(f: Family, m: usize, n: usize) -> SnapshotMatrix {
    materialize_family(&f, &uniform_grid(0.0, 1.0, m).unwrap(), &uniform_grid(0.0, 1.0, n).unwrap()).unwrap()
}

#[test]
fn equivalence_on_hundred_seeded_twelve_by_ten() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for seed in 0..100u64 {
        let rank = rng.random_range(1..=6);
        let s = SnapshotMatrix::from_matrix(random_low_rank(1000 + seed, 12, 10, rank, 1e-3)).unwrap();
        let r = check_equivalence_aca_eim(&s, 10).unwrap();
        assert!(r.passed, "seed {seed}: {:?}", r.divergence);
        assert_eq!(r.rank_aca, r.rank_eim);
    }
}

#[test]
fn equivalence_rank_one_stops_at_one() {
    let s = SnapshotMatrix::from_matrix(DenseMatrix::from_fn(5, 4, |i, j| (i as f64 - 1.5) * (j as f64 + 0.5))).unwrap();
    let r = check_equivalence_aca_eim(&s, 4).unwrap();
    assert!(r.passed);
    assert_eq!((r.rank_aca, r.rank_eim), (1, 1));
    assert_eq!(r.aca_rows, r.eim_points);
    assert_eq!(r.aca_cols, r.eim_params);
}

#[test]
fn equivalence_with_tied_maximum() {
    // |3| appears at (0, 2) and (2, 1); column 1 comes first
    let a = DenseMatrix::from_rows(&[vec![1.0, 0.5, 3.0], vec![0.2, -1.0, 0.4], vec![0.1, -3.0, 0.7]]).unwrap();
    let r = check_equivalence_aca_eim(&SnapshotMatrix::from_matrix(a).unwrap(), 3).unwrap();
    assert!(r.passed, "{:?}", r.divergence);
    assert_eq!(r.aca_cols[0], 1);
    assert_eq!(r.aca_rows[0], 2);
}

#[test]
fn nwidth_of_identity_and_low_rank() {
    let s = SnapshotMatrix::from_matrix(DenseMatrix::identity(5)).unwrap().unit_weight();
    for q in 0..5 {
        assert!((nwidth_oracle(&s, q).unwrap() - 1.0 / 5f64.sqrt()).abs() < 1e-14);
    }
    let s = SnapshotMatrix::from_matrix(DenseMatrix::identity(5)).unwrap();
    // weight 1/M and N = 5 scale every singular value by 1/5
    assert!((nwidth_oracle(&s, 2).unwrap() - 0.2).abs() < 1e-14);
    assert!(nwidth_oracle(&s, 5).is_err());

    let s = SnapshotMatrix::from_matrix(random_low_rank(9, 10, 8, 3, 0.0)).unwrap();
    for q in 3..8 {
        assert!(nwidth_oracle(&s, q).unwrap() <= 1e-12 * nwidth_oracle(&s, 0).unwrap());
    }
}

#[test]
fn analytic_nwidth_decreases_fast() {
    let s = family(Family::Analytic, 20, 20);
    let w: Vec<f64> = (0..8).map(|q| nwidth_oracle(&s, q).unwrap()).collect();
    for p in w.windows(2) {
        assert!(p[1] < p[0]);
        assert!(p[1] / p[0] < 0.1, "{w:?}");
    }
}

#[test]
fn rank_three_family_decays_to_zero_at_three() {
    let s = SnapshotMatrix::from_matrix(random_low_rank(5, 14, 11, 3, 0.0)).unwrap();
    let t = decay_report(&s, &DecayMethod::ALL, 6).unwrap();
    let scale = s.max_abs();
    for m in DecayMethod::ALL {
        let c = t.column(m).unwrap();
        assert!(c[3] <= 1e-10 * scale, "{m}: {c:?}");
    }
}

#[test]
fn l2_type_errors_stay_above_the_floor() {
    for s in [family(Family::Cauchy { c: 1.0 }, 15, 12), SnapshotMatrix::from_matrix(random_low_rank(3, 12, 10, 4, 1e-3)).unwrap()] {
        let t = decay_report(&s, &DecayMethod::ALL, 8).unwrap();
        for m in [DecayMethod::Pod, DecayMethod::Eim2] {
            let c = t.column(m).unwrap();
            for (e, row) in c.iter().zip(&t.rows) {
                assert!(*e >= (1.0 - 1e-8) * row.nwidth, "{m} q {}: {e:e} < {:e}", row.q, row.nwidth);
            }
        }
    }
}

#[test]
fn cauchy_decays_geometrically() {
    let s = family(Family::Cauchy { c: 1.0 }, 20, 20);
    let t = decay_report(&s, &DecayMethod::ALL, 8).unwrap();
    for m in DecayMethod::ALL {
        let c = t.column(m).unwrap();
        let ratio = (c[8] / c[0]).powf(1.0 / 8.0);
        assert!(ratio < 0.15, "{m}: mean ratio {ratio}");
        assert!(c[8] < 1e-6 * c[0]);
    }
}

#[test]
fn decay_csv_layout() {
    let s = family(Family::Analytic, 6, 6);
    let t = decay_report(&s, &[DecayMethod::Pod, DecayMethod::EimInf], 2).unwrap();
    let csv = t.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "q,pod,eim_inf,nwidth");
    assert_eq!(lines.len(), 4);
    let cells: Vec<f64> = lines[2].split(',').skip(1).map(|c| c.parse().unwrap()).collect();
    assert_eq!(cells, vec![t.rows[1].errors[0], t.rows[1].errors[1], t.rows[1].nwidth]);
    assert!(decay_report(&s, &[], 2).is_err());
    assert_eq!("aca_partial".parse::<DecayMethod>().unwrap(), DecayMethod::AcaPartial);
    assert!("svd".parse::<DecayMethod>().is_err());
}

#[test]
fn leja_and_max_volume_oracles() {
    let x: Vec<f64> = (0..5).map(|i| i as f64).collect();
    // empty product ties everywhere, so the first point starts
    assert_eq!(brute_force_leja(&x, 3), vec![0, 4, 2]);
    let a = DenseMatrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 5.0, 0.0], vec![0.0, 0.0, 2.0]]).unwrap();
    let (rows, cols, vol) = max_volume_exhaustive(&a, 2).unwrap();
    assert_eq!((rows, cols), (vec![1, 2], vec![1, 2]));
    assert!((vol - 10.0).abs() < 1e-12);
}
