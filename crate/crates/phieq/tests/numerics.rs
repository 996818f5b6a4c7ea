use phieq::numerics::{
    frobenius, lp_solve, matmat, matvec, norm1, norm2, norm_inf, DenseMatrix, LpOutcome, LpProblem, Relation, Sense,
};
use proptest::prelude::*;

/// Brute-force LP over `x >= 0`, `A x <= b` in two or three variables:
/// enumerates every intersection of `n` tight constraints.
fn vertex_enumeration(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<f64> {
    let n = c.len();
    let mut rows: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        rows.push((e, 0.0));
    }
    let feasible = |x: &[f64]| {
        rows.iter()
            .all(|(r, h)| r.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() <= h + 1e-9)
    };
    let mut best: Option<f64> = None;
    let m = rows.len();
    let mut pick = vec![0usize; n];
    fn next(pick: &mut [usize], m: usize) -> bool {
        let n = pick.len();
        let mut i = n;
        while i > 0 {
            i -= 1;
            if pick[i] < m - (n - i) {
                pick[i] += 1;
                for j in i + 1..n {
                    pick[j] = pick[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
    for (i, p) in pick.iter_mut().enumerate() {
        *p = i;
    }
    loop {
        let sys: Vec<Vec<f64>> = pick.iter().map(|&i| rows[i].0.clone()).collect();
        let rhs: Vec<f64> = pick.iter().map(|&i| rows[i].1).collect();
        if let Some(x) = DenseMatrix::from_rows(&sys).unwrap().solve(&rhs) {
            if feasible(&x) {
                let v: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                best = Some(best.map_or(v, |w: f64| w.max(v)));
            }
        }
        if !next(&mut pick, m) {
            break;
        }
    }
    best
}

#[test]
fn norms_and_products() {
    assert_eq!(norm1(&[1.0, -2.0, 3.0]), 6.0);
    assert_eq!(norm_inf(&[1.0, -4.0, 3.0]), 4.0);
    assert_eq!(norm2(&[3.0, 4.0]), 5.0);
    assert_eq!(frobenius(&DenseMatrix::identity(2)), 2f64.sqrt());
    let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
    assert_eq!(matvec(&a, &[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
    assert_eq!(matmat(&a, &DenseMatrix::identity(2)).unwrap(), a);
}

#[test]
fn textbook_lp() {
    let mut lp = LpProblem::new(Sense::Maximize, vec![3.0, 5.0]);
    lp.add(vec![1.0, 0.0], Relation::Le, 4.0)
        .add(vec![0.0, 2.0], Relation::Le, 12.0)
        .add(vec![3.0, 2.0], Relation::Le, 18.0);
    let (x, v) = lp_solve(&lp, 1e-9).unwrap().optimal().unwrap();
    assert!((v - 36.0).abs() < 1e-9);
    assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
}

#[test]
fn equality_and_ge_rows() {
    let mut lp = LpProblem::new(Sense::Minimize, vec![1.0, 1.0, 1.0]);
    lp.add(vec![1.0, 1.0, 0.0], Relation::Ge, 1.0)
        .add(vec![0.0, 1.0, 1.0], Relation::Eq, 2.0);
    let (_, v) = lp_solve(&lp, 1e-9).unwrap().optimal().unwrap();
    assert!((v - 2.0).abs() < 1e-9);
}

#[test]
fn infeasible_lp_has_farkas_certificate() {
    let mut lp = LpProblem::new(Sense::Maximize, vec![1.0, 1.0]);
    lp.add(vec![1.0, 1.0], Relation::Ge, 3.0)
        .add(vec![1.0, 1.0], Relation::Le, 2.0);
    match lp_solve(&lp, 1e-9).unwrap() {
        LpOutcome::Infeasible { farkas } => {
            let ta: Vec<f64> = (0..2)
                .map(|j| lp.constraints.iter().zip(&farkas).map(|(c, y)| c.coeffs[j] * y).sum())
                .collect();
            let tb: f64 = lp.constraints.iter().zip(&farkas).map(|(c, y)| c.rhs * y).sum();
            assert!(ta.iter().all(|v| *v >= -1e-9));
            assert!(tb < 0.0);
        }
        other => panic!("expected infeasible, got {other:?}"),
    }
}

#[test]
fn unbounded_lp() {
    let mut lp = LpProblem::new(Sense::Maximize, vec![1.0, 0.0]);
    lp.add(vec![0.0, 1.0], Relation::Le, 1.0);
    assert_eq!(lp_solve(&lp, 1e-9).unwrap(), LpOutcome::Unbounded);
}

#[test]
fn degenerate_lp_terminates() {
    // Beale's cycling example for the textbook pivot rule.
    let mut lp = LpProblem::new(Sense::Maximize, vec![0.75, -150.0, 0.02, -6.0]);
    lp.add(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0)
        .add(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0)
        .add(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
    let (_, v) = lp_solve(&lp, 1e-9).unwrap().optimal().unwrap();
    assert!((v - 0.05).abs() < 1e-9);
}

#[test]
fn cholesky_and_inverse() {
    let a = DenseMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
    let l = a.cholesky().unwrap();
    let llt = matmat(&l, &l.transpose()).unwrap();
    assert!(llt.data().iter().zip(a.data()).all(|(p, q)| (p - q).abs() < 1e-14));
    let inv = a.inverse().unwrap();
    let id = matmat(&a, &inv).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert!((id.get(i, j) - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
        }
    }
    assert!(DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]])
        .unwrap()
        .inverse()
        .is_none());
}

fn small_lp() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
    (2usize..=3).prop_flat_map(|n| {
        (
            prop::collection::vec(-3.0..3.0f64, n),
            prop::collection::vec(prop::collection::vec(-2.0..3.0f64, n), 1..5),
        )
            .prop_flat_map(move |(c, a)| {
                let m = a.len();
                (Just(c), Just(a), prop::collection::vec(0.1..4.0f64, m))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simplex_matches_vertex_enumeration((c, a, b) in small_lp()) {
        // Bounding box keeps every instance bounded.
        let n = c.len();
        let mut rows = a.clone();
        let mut rhs = b.clone();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            rows.push(e);
            rhs.push(5.0);
        }
        let mut lp = LpProblem::new(Sense::Maximize, c.clone());
        for (r, h) in rows.iter().zip(&rhs) {
            lp.add(r.clone(), Relation::Le, *h);
        }
        let oracle = vertex_enumeration(&c, &rows, &rhs).unwrap();
        let (x, v) = lp_solve(&lp, 1e-9).unwrap().optimal().unwrap();
        prop_assert!((v - oracle).abs() <= 1e-7 * (1.0 + oracle.abs()));
        for (r, h) in rows.iter().zip(&rhs) {
            prop_assert!(r.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= h + 1e-8);
        }
        prop_assert!(x.iter().all(|v| *v >= -1e-12));
    }

    #[test]
    fn solve_inverts_matvec(vals in prop::collection::vec(-1.0..1.0f64, 9), x in prop::collection::vec(-5.0..5.0f64, 3)) {
        let mut m = DenseMatrix::new(3, 3, vals).unwrap();
        for i in 0..3 {
            m.set(i, i, m.get(i, i) + 4.0);
        }
        let b = matvec(&m, &x).unwrap();
        let y = m.solve(&b).unwrap();
        for (p, q) in x.iter().zip(&y) {
            prop_assert!((p - q).abs() < 1e-10);
        }
    }
}
