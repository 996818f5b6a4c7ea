use phieq::ellipsoid::{cut_cap, log_ball_volume, volume_ratio, EllipsoidState};
use phieq::numerics::DenseMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Determinant by Gaussian elimination with partial pivoting.
fn det(m: &DenseMatrix) -> f64 {
    let n = m.rows();
    let mut a = m.to_rows();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    d
}

/// Gamma-free volume ratio: `vol(E') / vol(E) = sqrt(det Q' / det Q)`.
fn measured_ratio(before: &EllipsoidState, after: &EllipsoidState) -> f64 {
    (det(after.shape()) / det(before.shape())).sqrt()
}

/// Closed form `(k/(k+1)) (k^2/(k^2-1))^((k-1)/2)` evaluated directly.
fn closed_form(k: usize) -> f64 {
    let kf = k as f64;
    kf / (kf + 1.0) * (kf * kf / (kf * kf - 1.0)).powf((kf - 1.0) / 2.0)
}

fn random_direction(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        if w.iter().map(|v| v * v).sum::<f64>() > 1e-3 {
            return w;
        }
    }
}

#[test]
fn initial_balls() {
    let e = EllipsoidState::init_ball(2, 1.0).unwrap();
    assert_eq!(e.center(), &[0.0, 0.0]);
    assert_eq!(e.shape(), &DenseMatrix::identity(2));
    let e = EllipsoidState::init_ball(3, 2.0).unwrap();
    assert_eq!(e.shape(), &DenseMatrix::identity(3).scaled(4.0));
    assert!((log_ball_volume(2, 2.0) - (4.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
}

#[test]
fn ratio_matches_closed_form_along_a_chain_of_cuts() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 2..=10 {
        assert!((volume_ratio(k) - closed_form(k)).abs() < 1e-12);
        let mut e = EllipsoidState::init_ball(k, 3.0).unwrap();
        for _ in 0..5 {
            let next = e.central_cut(&random_direction(&mut rng, k)).unwrap();
            assert!((measured_ratio(&e, &next) - closed_form(k)).abs() < 1e-9, "k = {k}");
            let log_drop = next.log_volume().unwrap() - e.log_volume().unwrap();
            assert!((log_drop - closed_form(k).ln()).abs() < 1e-9);
            e = next;
        }
    }
}

#[test]
fn cut_cap_grows_with_precision() {
    assert!(cut_cap(3, 1.0, 1.0, 1e-6) > cut_cap(3, 1.0, 1.0, 1e-2));
    assert!(cut_cap(4, 1.0, 1.0, 1e-3) > cut_cap(3, 1.0, 1.0, 1e-3));
}

#[test]
fn degenerate_cut_is_rejected() {
    let e = EllipsoidState::init_ball(3, 1.0).unwrap();
    assert!(e.central_cut(&[0.0, 0.0, 0.0]).is_err());
    assert!(EllipsoidState::from_parts(vec![0.0; 2], DenseMatrix::zeros(2, 2)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kept_half_stays_inside(seed in any::<u64>(), k in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e = EllipsoidState::init_ball(k, 1.0).unwrap();
        for _ in 0..3 {
            e = e.central_cut(&random_direction(&mut rng, k)).unwrap();
        }
        let w = random_direction(&mut rng, k);
        let next = e.central_cut(&w).unwrap();
        let l = e.shape().cholesky().unwrap();
        for _ in 0..200 {
            let z: Vec<f64> = phieq::geometry::uniform_in_ball(&mut rng, k);
            let y: Vec<f64> = (0..k).map(|i| e.center()[i] + (0..k).map(|j| l.get(i, j) * z[j]).sum::<f64>()).collect();
            let side: f64 = (0..k).map(|i| w[i] * (y[i] - e.center()[i])).sum();
            if side <= 0.0 {
                prop_assert!(next.contains(&y, 1e-9).unwrap());
            }
        }
    }
}
