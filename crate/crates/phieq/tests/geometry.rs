use phieq::geometry::{uniform_in_ball, AffineMap, BodyKind, ConvexBody, Frame, Halfspace, SparseDistribution};
use phieq::numerics::{dot, DenseMatrix};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Support function computed from a vertex list.
fn support(vertices: &[Vec<f64>], u: &[f64]) -> f64 {
    vertices.iter().map(|v| dot(u, v)).fold(f64::NEG_INFINITY, f64::max)
}

fn cube_vertices(d: usize) -> Vec<Vec<f64>> {
    (0..1usize << d)
        .map(|m| (0..d).map(|j| if m >> j & 1 == 1 { 1.0 } else { -1.0 }).collect())
        .collect()
}

fn bodies() -> Vec<ConvexBody> {
    let a = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![-1.0, 0.5], vec![0.0, -1.0], vec![2.0, -1.0]]).unwrap();
    vec![
        ConvexBody::unit_ball(3),
        ConvexBody::ball(vec![1.0, -2.0], 0.5).unwrap(),
        ConvexBody::cube(3, 1.0),
        ConvexBody::box_body(vec![0.0, -1.0], vec![2.0, 3.0]).unwrap(),
        ConvexBody::simplex(4).unwrap(),
        ConvexBody::corner_simplex(3).unwrap(),
        ConvexBody::hpolytope(a, vec![2.0, 1.0, 1.0, 3.0]).unwrap(),
        ConvexBody::product(vec![ConvexBody::cube(1, 1.0), ConvexBody::simplex(2).unwrap()]).unwrap(),
    ]
}

#[test]
fn small_membership_cases() {
    let ball = ConvexBody::unit_ball(2);
    assert!(ball.membership(&[0.0, 0.0], 0.0).unwrap());
    assert!(!ball.membership(&[2.0, 0.0], 0.0).unwrap());
    assert!(ConvexBody::simplex(3)
        .unwrap()
        .membership(&[0.5, 0.25, 0.25], 1e-12)
        .unwrap());
}

#[test]
fn small_separation_cases() {
    let h = ConvexBody::unit_ball(2).separate(&[2.0, 0.0], 0.0).unwrap().unwrap();
    let n = h.normal();
    assert!((n[0] / n[0].hypot(n[1]) - 1.0).abs() < 1e-12);
    assert!(h.offset() / n[0] < 2.0);
    let cube = ConvexBody::cube(2, 1.0);
    assert!(cube.separate(&[0.2, -0.3], 0.0).unwrap().is_none());
    let h = cube.separate(&[0.0, 1.5], 0.0).unwrap().unwrap();
    assert_eq!(h.normal()[0], 0.0);
    assert!(h.normal()[1] > 0.0);
}

#[test]
fn small_linopt_cases() {
    assert_eq!(ConvexBody::cube(2, 1.0).linopt(&[1.0, -2.0]).unwrap(), vec![1.0, -1.0]);
    assert_eq!(
        ConvexBody::simplex(3).unwrap().linopt(&[5.0, 1.0, 0.0]).unwrap(),
        vec![1.0, 0.0, 0.0]
    );
}

#[test]
fn product_decomposes() {
    let p = ConvexBody::product(vec![ConvexBody::cube(2, 1.0), ConvexBody::cube(2, 1.0)]).unwrap();
    assert_eq!(p.dim(), 4);
    assert!(p.membership(&[1.0, -1.0, 0.5, 0.0], 1e-12).unwrap());
    assert!(!p.membership(&[0.0, 0.0, 1.5, 0.0], 1e-12).unwrap());
    assert_eq!(p.linopt(&[1.0, -1.0, -3.0, 2.0]).unwrap(), vec![1.0, -1.0, -1.0, 1.0]);
}

#[test]
fn vertices_match_support_function() {
    let cube = ConvexBody::cube(3, 1.0);
    let mut vs = cube.vertices().unwrap();
    vs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut oracle = cube_vertices(3);
    oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(vs, oracle);
}

#[test]
fn certified_radii_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for body in bodies() {
        let b = body.bounds().clone();
        for _ in 0..500 {
            let x = body.sample_member(&mut rng).unwrap();
            assert!(body.membership(&x, 1e-9).unwrap());
            assert!(phieq::numerics::norm2(&x) <= b.outer_radius + 1e-9);
        }
        if !matches!(body.kind(), BodyKind::Simplex { .. }) && !matches!(body.kind(), BodyKind::Product { .. }) {
            for _ in 0..500 {
                let z = uniform_in_ball(&mut rng, body.dim());
                let x: Vec<f64> = z
                    .iter()
                    .zip(&b.inner_center)
                    .map(|(z, c)| c + b.inner_radius * z)
                    .collect();
                assert!(body.membership(&x, 1e-9).unwrap());
            }
        }
    }
}

#[test]
fn frame_round_trips_and_local_ball() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for body in bodies() {
        if matches!(body.kind(), BodyKind::Product { .. }) {
            assert!(Frame::new(&body).is_err());
            continue;
        }
        let frame = Frame::new(&body).unwrap();
        for _ in 0..200 {
            let x = body.sample_member(&mut rng).unwrap();
            let z = frame.to_local(&x).unwrap();
            let back = frame.to_ambient(&z).unwrap();
            assert!(x.iter().zip(&back).all(|(p, q)| (p - q).abs() < 1e-12));
            let w = uniform_in_ball(&mut rng, frame.local_dim());
            assert!(body.membership(&frame.to_ambient(&w).unwrap(), 1e-9).unwrap());
        }
    }
}

#[test]
fn affine_map_inverts() {
    let m = AffineMap::new(
        DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![0.0, 0.5]]).unwrap(),
        vec![1.0, -1.0],
    )
    .unwrap();
    let y = m.apply(&[0.3, 0.4]).unwrap();
    assert_eq!(y, vec![2.0, -0.8]);
    let x = m.apply_inverse(&y).unwrap();
    assert!((x[0] - 0.3).abs() < 1e-15 && (x[1] - 0.4).abs() < 1e-15);
}

#[test]
fn distribution_algebra() {
    let a = SparseDistribution::new(vec![vec![0.0], vec![1.0]], vec![0.25, 0.75]).unwrap();
    let b = SparseDistribution::uniform(vec![vec![2.0], vec![4.0]]).unwrap();
    let p = SparseDistribution::product(&[a.clone(), b.clone()]).unwrap();
    assert_eq!(p.len(), 4);
    assert!((p.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    assert_eq!(p.mean(), vec![0.75, 3.0]);
    let mix = SparseDistribution::mixture(&[a.clone(), a.clone()], &[0.5, 0.5])
        .unwrap()
        .merged();
    assert_eq!(mix.len(), 2);
    assert_eq!(mix.weights(), &[0.25, 0.75]);
    let (pruned, dropped) = a.pruned(1);
    assert_eq!(pruned.points(), &[vec![1.0]]);
    assert_eq!(dropped, 0.25);
    assert!(SparseDistribution::new(vec![vec![0.0]], vec![0.5]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn linopt_attains_support(u in prop::collection::vec(-1.0..1.0f64, 3)) {
        let cube = ConvexBody::cube(3, 1.0);
        let x = cube.linopt(&u).unwrap();
        prop_assert!((dot(&u, &x) - support(&cube_vertices(3), &u)).abs() < 1e-12);
        let ball = ConvexBody::unit_ball(3);
        let y = ball.linopt(&u).unwrap();
        prop_assert!((dot(&u, &y) - phieq::numerics::norm2(&u)).abs() < 1e-12);
    }

    #[test]
    fn separating_halfspaces_contain_the_body(x in prop::collection::vec(-3.0..3.0f64, 2), which in 0usize..8) {
        let body = &bodies()[which];
        let x: Vec<f64> = x.iter().cycle().take(body.dim()).copied().collect();
        match body.separate(&x, 0.0).unwrap() {
            None => prop_assert!(body.membership(&x, 1e-9).unwrap()),
            Some(h) => {
                prop_assert!(!h.contains(&x, 0.0));
                let best = dot(h.normal(), &body.linopt(h.normal()).unwrap());
                prop_assert!(best <= h.offset() + 1e-9);
            }
        }
    }

    #[test]
    fn halfspace_violation_is_signed_distance_scaled(n in prop::collection::vec(-2.0..2.0f64, 2), x in prop::collection::vec(-2.0..2.0f64, 2)) {
        prop_assume!(phieq::numerics::norm2(&n) > 1e-3);
        let h = Halfspace::new(n.clone(), 0.5).unwrap();
        prop_assert_eq!(h.contains(&x, 0.0), dot(&n, &x) <= 0.5);
    }
}
