use phieq::deviations::{random_endomorphism, Features};
use phieq::efp::Answer;
use phieq::games::{
    compute_phi_equilibrium, equilibrium_gap, hit_and_run, zero_sum_value, EquilibriumProblem, GapMethod,
    JointDistribution, MultilinearGame, NormalFormGame,
};
use phieq::geometry::{ConvexBody, Halfspace, SparseDistribution};
use phieq::numerics::DenseMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Value of a 2 x n zero-sum game: the maximum over p of the lower envelope
/// of n lines, attained at an endpoint or a pairwise crossing.
fn two_row_value(a: &[Vec<f64>]) -> f64 {
    let n = a[0].len();
    let envelope = |p: f64| {
        (0..n)
            .map(|j| p * a[0][j] + (1.0 - p) * a[1][j])
            .fold(f64::INFINITY, f64::min)
    };
    let mut candidates = vec![0.0, 1.0];
    for j in 0..n {
        for l in j + 1..n {
            let (s1, s2) = (a[0][j] - a[1][j], a[0][l] - a[1][l]);
            if (s1 - s2).abs() > 1e-12 {
                let p = (a[1][l] - a[1][j]) / (s1 - s2);
                if (0.0..=1.0).contains(&p) {
                    candidates.push(p);
                }
            }
        }
    }
    candidates.into_iter().map(envelope).fold(f64::NEG_INFINITY, f64::max)
}

/// Swap regret of player `i` under a distribution over pure profiles:
/// `sum_a max_b sum_{x : x_i = a} mu(x) (u_i(b, x_-i) - u_i(x))`.
fn swap_regret(game: &NormalFormGame, i: usize, mu: &[(Vec<usize>, f64)]) -> f64 {
    let acts = game.actions();
    let index = |profile: &[usize]| profile.iter().zip(acts).fold(0, |acc, (p, n)| acc * n + p);
    let u = game.payoffs(i);
    (0..acts[i])
        .map(|a| {
            (0..acts[i])
                .map(|b| {
                    mu.iter()
                        .filter(|(x, _)| x[i] == a)
                        .map(|(x, w)| {
                            let mut dev = x.clone();
                            dev[i] = b;
                            w * (u[index(&dev)] - u[index(x)])
                        })
                        .sum::<f64>()
                })
                .fold(0.0, f64::max)
        })
        .sum()
}

fn joint_of(game: &NormalFormGame, mu: &[(Vec<usize>, f64)]) -> JointDistribution {
    let acts = game.actions();
    let points = mu
        .iter()
        .map(|(x, _)| {
            x.iter()
                .zip(acts)
                .flat_map(|(a, n)| (0..*n).map(move |j| if j == *a { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    let weights = mu.iter().map(|(_, w)| *w).collect();
    JointDistribution::new(SparseDistribution::new(points, weights).unwrap(), acts.to_vec()).unwrap()
}

fn all_profiles(acts: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for n in acts {
        out = out
            .into_iter()
            .flat_map(|p: Vec<usize>| {
                (0..*n).map(move |a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    out
}

#[test]
fn known_game_values() {
    let mp = NormalFormGame::matching_pennies();
    assert!(zero_sum_value(&mp.matrix(0).unwrap()).unwrap().abs() < 1e-12);
    let rps = NormalFormGame::rock_paper_scissors();
    assert!(zero_sum_value(&rps.matrix(0).unwrap()).unwrap().abs() < 1e-12);
    // Saddle point at (row 1, column 0).
    let a = DenseMatrix::from_rows(&[vec![0.1, 0.9], vec![0.4, 0.5]]).unwrap();
    assert!((zero_sum_value(&a).unwrap() - 0.4).abs() < 1e-12);
    // Mixed 2 x 2: (ad - bc) / (a + d - b - c).
    let a = DenseMatrix::from_rows(&[vec![0.8, -0.2], vec![-0.4, 0.6]]).unwrap();
    let closed = (0.8 * 0.6 - (-0.2) * (-0.4)) / (0.8 + 0.6 + 0.2 + 0.4);
    assert!((zero_sum_value(&a).unwrap() - closed).abs() < 1e-12);
}

#[test]
fn payoff_range_is_enforced() {
    assert!(NormalFormGame::new(vec![2, 2], vec![vec![2.0, 0.0, 0.0, 0.0], vec![0.0; 4]]).is_err());
    let g = NormalFormGame::rescaled(vec![2, 2], vec![vec![4.0, 0.0, 0.0, -2.0], vec![0.0; 4]]).unwrap();
    assert_eq!(g.payoffs(0), &[1.0, 0.0, 0.0, -0.5]);
}

#[test]
fn single_player_gradient_is_constant() {
    let g = MultilinearGame::normal_form(NormalFormGame::new(vec![3], vec![vec![0.2, -0.5, 1.0]]).unwrap()).unwrap();
    assert_eq!(g.gradient(0, &[vec![1.0, 0.0, 0.0]]).unwrap(), vec![0.2, -0.5, 1.0]);
    assert_eq!(g.gradient(0, &[vec![0.0, 0.5, 0.5]]).unwrap(), vec![0.2, -0.5, 1.0]);
}

#[test]
fn bilinear_gradients() {
    let a = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.5, -1.0]]).unwrap();
    let b = a.scaled(-1.0);
    let g = MultilinearGame::bilinear(ConvexBody::cube(2, 1.0), ConvexBody::cube(2, 1.0), a, b).unwrap();
    let x = vec![vec![1.0, -1.0], vec![0.5, 1.0]];
    assert_eq!(g.gradient(0, &x).unwrap(), vec![0.5, -0.75]);
    assert_eq!(g.gradient(1, &x).unwrap(), vec![-0.5, -1.0]);
    assert!((g.utility(0, &x).unwrap() - 1.25).abs() < 1e-15);
}

#[test]
fn identity_candidate_is_good_enough() {
    let game = MultilinearGame::normal_form(NormalFormGame::rock_paper_scissors()).unwrap();
    let problem = EquilibriumProblem::new(game, &[Features::Linear, Features::Linear], 1e-3).unwrap();
    let y = problem.identity_point().unwrap();
    match problem.query(&y).unwrap() {
        Answer::Good { normal, offset, .. } => {
            let v: f64 = normal.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() + offset;
            assert!(v.abs() < 1e-12);
        }
        _ => panic!("identity must be answered with a response"),
    }
}

#[test]
fn escaping_candidate_is_separated() {
    let game = MultilinearGame::normal_form(NormalFormGame::matching_pennies()).unwrap();
    let problem = EquilibriumProblem::new(game, &[Features::Linear, Features::Linear], 1e-3).unwrap();
    let mut y = problem.identity_point().unwrap();
    // Push player one's constant term far outside the local body.
    let k1 = problem.feature_maps()[0].param_dim();
    let d1 = problem.frames()[0].local_dim();
    y[k1 - d1] = 50.0;
    match problem.query(&y).unwrap() {
        Answer::Sep(h) => assert!(!h.contains(&y, 0.0)),
        _ => panic!("expected a separating halfspace"),
    }
}

#[test]
fn exact_gap_matches_swap_regret() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let games = [
        NormalFormGame::matching_pennies(),
        NormalFormGame::rock_paper_scissors(),
        {
            use rand::Rng;
            let payoffs = (0..3)
                .map(|_| (0..12).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            NormalFormGame::new(vec![2, 3, 2], payoffs).unwrap()
        },
    ];
    for game in games {
        let profiles = all_profiles(game.actions());
        for trial in 0..5 {
            use rand::Rng;
            let raw: Vec<f64> = profiles
                .iter()
                .map(|_| rng.random_range(0.0..1.0f64).powi(trial + 1))
                .collect();
            let total: f64 = raw.iter().sum();
            let mu: Vec<(Vec<usize>, f64)> = profiles.iter().cloned().zip(raw.iter().map(|w| w / total)).collect();
            let ml = MultilinearGame::normal_form(game.clone()).unwrap();
            let features = vec![Features::Linear; game.players()];
            let gaps = equilibrium_gap(&ml, &joint_of(&game, &mu), &features, GapMethod::ExactLp).unwrap();
            for (i, g) in gaps.iter().enumerate() {
                assert!((g - swap_regret(&game, i, &mu)).abs() < 1e-9, "player {i}");
            }
        }
    }
}

#[test]
fn identity_only_deviations_have_no_gap() {
    let game = NormalFormGame::matching_pennies();
    let mu = vec![(vec![0, 0], 1.0)];
    // A pure profile that is not an equilibrium still has zero gap against
    // the identity, which the swap gap dominates.
    let ml = MultilinearGame::normal_form(game.clone()).unwrap();
    let gaps = equilibrium_gap(&ml, &joint_of(&game, &mu), &[Features::Linear; 2], GapMethod::ExactLp).unwrap();
    assert_eq!(gaps[0], 0.0);
    assert!(gaps[1] > 1.9);
}

#[test]
fn exact_mode_needs_simplices() {
    let a = DenseMatrix::from_rows(&[vec![0.5]]).unwrap();
    let g = MultilinearGame::bilinear(ConvexBody::cube(1, 1.0), ConvexBody::cube(1, 1.0), a.clone(), a).unwrap();
    let mu = JointDistribution::new(SparseDistribution::point_mass(vec![0.0, 0.0]), vec![1, 1]).unwrap();
    assert!(equilibrium_gap(&g, &mu, &[Features::Linear; 2], GapMethod::ExactLp).is_err());
    assert!(equilibrium_gap(&g, &mu, &[Features::Linear; 2], GapMethod::SampledLp).is_ok());
}

#[test]
fn three_player_correlated_equilibrium() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    use rand::Rng;
    let payoffs = (0..3)
        .map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let nf = NormalFormGame::new(vec![2, 2, 2], payoffs).unwrap();
    let game = MultilinearGame::normal_form(nf.clone()).unwrap();
    let run = compute_phi_equilibrium(&game, &[Features::Linear; 3], 1e-4).unwrap();
    let mu: Vec<(Vec<usize>, f64)> = (0..run.joint.len())
        .map(|t| {
            let blocks = run.joint.blocks(t);
            let profile = blocks
                .iter()
                .map(|b| b.iter().position(|v| *v > 0.5).unwrap())
                .collect();
            (profile, run.joint.weight(t))
        })
        .collect();
    for i in 0..3 {
        assert!(swap_regret(&nf, i, &mu) <= 1e-4 + 1e-9);
    }
}

#[test]
fn hit_and_run_stays_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cuts = vec![
        Halfspace::new(vec![1.0, 1.0, 0.0], 0.5).unwrap(),
        Halfspace::new(vec![0.0, -1.0, 1.0], 0.2).unwrap(),
    ];
    let pts = hit_and_run(&[0.0, 0.0, 0.0], 2.0, &cuts, 500, 50, 3, &mut rng).unwrap();
    assert_eq!(pts.len(), 500);
    for p in &pts {
        assert!(phieq::numerics::norm2(p) <= 2.0 + 1e-9);
        assert!(cuts.iter().all(|h| h.contains(p, 1e-9)));
    }
    let far = pts.iter().map(|p| phieq::numerics::norm2(p)).fold(0.0, f64::max);
    assert!(far > 1.0);
    assert!(hit_and_run(&[3.0, 0.0, 0.0], 2.0, &cuts, 1, 0, 1, &mut rng).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_value_matches_envelope(entries in prop::collection::vec(-1.0..1.0f64, 8)) {
        let rows = vec![entries[..4].to_vec(), entries[4..].to_vec()];
        let v = zero_sum_value(&DenseMatrix::from_rows(&rows).unwrap()).unwrap();
        prop_assert!((v - two_row_value(&rows)).abs() < 1e-9);
    }

    #[test]
    fn witness_cuts_exclude_the_query(y in prop::collection::vec(-2.0..2.0f64, 4), seed in 0u64..1000) {
        let game = MultilinearGame::normal_form(NormalFormGame::matching_pennies()).unwrap();
        let problem = EquilibriumProblem::new(game, &[Features::Linear, Features::Linear], 1e-3).unwrap();
        if let Answer::Sep(h) = problem.query(&y).unwrap() {
            let excess: f64 = h.normal().iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() - h.offset();
            prop_assert!(excess > 1e-9, "excess {excess}");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..20 {
                let mut inside = Vec::new();
                for (fm, r) in problem.feature_maps().iter().zip(problem.radii()) {
                    inside.extend(random_endomorphism(fm, r, 1.0, &mut rng).unwrap().to_flat());
                }
                prop_assert!(h.contains(&inside, 1e-9));
            }
            prop_assert!(h.contains(&problem.identity_point().unwrap(), 1e-9));
        }
    }
}
