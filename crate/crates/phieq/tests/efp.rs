use phieq::efp::{
    eah_solve, efp_eah, efp_error, efp_iterative, efp_iterative_steps, iterative_steps, semi_separate, CertDomain,
    GFunction, GerOrSep, SemiSepResult,
};
use phieq::geometry::{ConvexBody, SparseDistribution};
use phieq::numerics::DenseMatrix;
use proptest::prelude::*;

/// `||sum_i w_i (phi(x_i) - x_i)||_1` computed atom by atom.
fn l1_residual(mu: &SparseDistribution, phi: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
    let mut acc = vec![0.0; mu.dim()];
    for (x, w) in mu.atoms() {
        for (a, (p, q)) in acc.iter_mut().zip(phi(x).iter().zip(x)) {
            *a += w * (p - q);
        }
    }
    acc.iter().map(|v| v.abs()).sum()
}

/// Stationary distribution of a column-stochastic matrix by power iteration.
fn stationary(p: &DenseMatrix) -> Vec<f64> {
    let n = p.rows();
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..10_000 {
        let next: Vec<f64> = (0..n)
            .map(|i| 0.5 * v[i] + 0.5 * (0..n).map(|j| p.get(i, j) * v[j]).sum::<f64>())
            .collect();
        v = next;
    }
    v
}

#[test]
fn identity_is_its_own_fixed_point() {
    for body in [
        ConvexBody::cube(3, 1.0),
        ConvexBody::simplex(3).unwrap(),
        ConvexBody::unit_ball(2),
    ] {
        let sol = efp_eah(&body, |x: &[f64]| Ok(x.to_vec()), 1e-9).unwrap();
        assert_eq!(sol.error, 0.0);
        assert_eq!(sol.cuts, 1);
        let x0 = body.bounds().inner_center.clone();
        let mu = efp_iterative_steps(&body, |x: &[f64]| Ok(x.to_vec()), &x0, 10).unwrap();
        assert_eq!(mu.len(), 1);
        assert_eq!(mu.points()[0], x0);
    }
}

#[test]
fn reported_error_matches_atoms() {
    let body = ConvexBody::cube(2, 1.0);
    let phi = |x: &[f64]| vec![0.5 * x[1] + 0.2, -0.8 * x[0]];
    let sol = efp_eah(&body, |x: &[f64]| Ok(phi(x)), 1e-7).unwrap();
    assert!((sol.error - l1_residual(&sol.distribution, phi)).abs() < 1e-15);
    assert!(sol.error <= 1e-7);
    assert_eq!(efp_error(&sol.distribution, |x: &[f64]| Ok(phi(x))).unwrap(), sol.error);
    assert!(sol.distribution.check_members(&body, 1e-9).unwrap().is_none());
}

#[test]
fn markov_chain_fixed_point_is_stationary() {
    let p = DenseMatrix::from_rows(&[vec![0.5, 0.2, 0.3], vec![0.3, 0.6, 0.1], vec![0.2, 0.2, 0.6]]).unwrap();
    let body = ConvexBody::simplex(3).unwrap();
    let sol = efp_eah(&body, |x: &[f64]| phieq::numerics::matvec(&p, x), 1e-9).unwrap();
    let mean = sol.distribution.mean();
    let pi = stationary(&p);
    let gap: f64 = mean.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
    // The mean is an approximate fixed point of the linear map, hence close
    // to the unique stationary distribution.
    assert!(gap < 1e-7, "{mean:?} vs {pi:?}");
}

#[test]
fn iterative_step_count() {
    let body = ConvexBody::cube(2, 1.0);
    assert_eq!(
        iterative_steps(&body, 0.1),
        (2.0 * 2f64.sqrt() * 2.0 / 0.1f64).ceil() as usize
    );
    let mu = efp_iterative(&body, |x: &[f64]| Ok(vec![-x[1], x[0]]), 0.05, &[1.0, 0.0]).unwrap();
    assert!(efp_error(&mu, |x: &[f64]| Ok(vec![-x[1], x[0]])).unwrap() <= 0.05);
}

#[test]
fn witness_leaves_the_body() {
    let body = ConvexBody::unit_ball(2);
    match semi_separate(&body, |x: &[f64]| Ok(vec![2.0 * x[0], 2.0 * x[1]]), 1e-6).unwrap() {
        SemiSepResult::Witness { x, image } => {
            assert!(body.membership(&x, 1e-9).unwrap());
            assert!(!body.membership(&image, 1e-9).unwrap());
        }
        SemiSepResult::Efp(_) => panic!("doubling must produce a witness"),
    }
    assert!(efp_eah(&body, |x: &[f64]| Ok(vec![x[0] + 3.0, x[1]]), 1e-6).is_err());
}

#[test]
fn zero_payoff_needs_one_response() {
    let g = GFunction::new(|_: &[f64]| Ok(vec![0.0, 0.0]), 1.0);
    let (mu, log) = eah_solve(
        &g,
        2,
        |_: &[f64]| Ok(GerOrSep::GoodEnough(SparseDistribution::point_mass(vec![0.25]))),
        CertDomain::Box { half_width: 1.0 },
        2f64.sqrt(),
        1e-6,
    )
    .unwrap();
    assert_eq!(mu.len(), 1);
    assert_eq!(log.len(), 1);
}

#[test]
fn balancing_a_coin() {
    // E[x] = 1/2 over x in {0, 1}: each query is answered by the point whose
    // sign agrees with y.
    let g = GFunction::new(|x: &[f64]| Ok(vec![x[0] - 0.5]), 0.5);
    let (mu, _) = eah_solve(
        &g,
        1,
        |y: &[f64]| {
            Ok(GerOrSep::GoodEnough(SparseDistribution::point_mass(vec![
                if y[0] >= 0.0 { 1.0 } else { 0.0 },
            ])))
        },
        CertDomain::Box { half_width: 1.0 },
        1.0,
        1e-6,
    )
    .unwrap();
    assert!((mu.mean()[0] - 0.5).abs() <= 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn affine_self_maps_of_the_box(entries in prop::collection::vec(-1.0..1.0f64, 4), shift in prop::collection::vec(-1.0..1.0f64, 2), t in 0.05..0.95f64) {
        // x -> (1 - t) (A x / ||A||_inf) + t s stays in [-1, 1]^2.
        let row_sum = (entries[0].abs() + entries[1].abs()).max(entries[2].abs() + entries[3].abs());
        let scale = row_sum.max(1e-9);
        let phi = move |x: &[f64]| -> Vec<f64> {
            (0..2)
                .map(|i| (1.0 - t) * (entries[2 * i] * x[0] + entries[2 * i + 1] * x[1]) / scale + t * shift[i])
                .collect()
        };
        let body = ConvexBody::cube(2, 1.0);
        let sol = efp_eah(&body, |x: &[f64]| Ok(phi(x)), 1e-6).unwrap();
        prop_assert!(l1_residual(&sol.distribution, &phi) <= 1e-6);
        prop_assert!(sol.distribution.check_members(&body, 1e-9).unwrap().is_none());
    }
}
