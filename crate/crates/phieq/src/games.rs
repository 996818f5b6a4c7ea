//! Multilinear games, the deviation-parameter equilibrium solver and its
//! verification.

use std::convert::Infallible;
use std::time::Instant;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::deviations::{identity_params, lift_halfspace, phi_radii, DeviationParams, FeatureMap, Features, PhiRadii};
use crate::efp::{eah_run, semi_separate, Answer, CertDomain, Certificate, EahOutcome, EahSettings, SemiSepResult};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{uniform_on_sphere, ConvexBody, Frame, Halfspace, SparseDistribution, DEFAULT_TOL};
use crate::numerics::{dot, frobenius, lp_solve, norm2, DenseMatrix, LpOutcome, LpProblem, Relation, Sense};

/// Cap on the atom count of one product response.
pub const PRODUCT_ATOM_CAP: usize = 100_000;
/// Random points per player added to the sampled verification program.
pub const VERIFY_SAMPLES: usize = 1_000;
const VERIFY_SEED: u64 = 0x00c0_ffee;

/// Finite game with payoff tensors indexed by action profiles, last player
/// fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalFormGame {
    actions: Vec<usize>,
    payoffs: Vec<Vec<f64>>,
}

impl NormalFormGame {
    /// Payoffs must already lie in `[-1, 1]`.
    pub fn new(actions: Vec<usize>, payoffs: Vec<Vec<f64>>) -> Result<Self> {
        let g = Self::unchecked(actions, payoffs)?;
        if g.payoffs.iter().flatten().any(|v| v.abs() > 1.0) {
            return Err(Error::InvalidInput("payoffs must lie in [-1, 1]".into()));
        }
        Ok(g)
    }

    /// Divides all payoffs by their largest magnitude when it exceeds 1.
    pub fn rescaled(actions: Vec<usize>, payoffs: Vec<Vec<f64>>) -> Result<Self> {
        let mut g = Self::unchecked(actions, payoffs)?;
        let top = g.payoffs.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        if top > 1.0 {
            for row in &mut g.payoffs {
                for v in row {
                    *v /= top;
                }
            }
        }
        Ok(g)
    }

    fn unchecked(actions: Vec<usize>, payoffs: Vec<Vec<f64>>) -> Result<Self> {
        if actions.is_empty() || actions.iter().any(|a| *a < 2) {
            return Err(Error::InvalidInput("every player needs at least two actions".into()));
        }
        check_dim(actions.len(), payoffs.len())?;
        let profiles: usize = actions.iter().product();
        for p in &payoffs {
            check_dim(profiles, p.len())?;
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("payoffs must be finite".into()));
            }
        }
        Ok(Self { actions, payoffs })
    }

    pub fn matching_pennies() -> Self {
        Self::new(vec![2, 2], vec![vec![1.0, -1.0, -1.0, 1.0], vec![-1.0, 1.0, 1.0, -1.0]]).expect("valid game")
    }

    pub fn rock_paper_scissors() -> Self {
        let row = vec![0.0, -1.0, 1.0, 1.0, 0.0, -1.0, -1.0, 1.0, 0.0];
        let col = row.iter().map(|v| -v).collect();
        Self::new(vec![3, 3], vec![row, col]).expect("valid game")
    }

    pub fn players(&self) -> usize {
        self.actions.len()
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn payoffs(&self, i: usize) -> &[f64] {
        &self.payoffs[i]
    }

    /// Row player's payoff matrix of a two-player game.
    pub fn matrix(&self, i: usize) -> Result<DenseMatrix> {
        if self.players() != 2 {
            return Err(Error::InvalidInput("payoff matrix needs two players".into()));
        }
        DenseMatrix::new(self.actions[0], self.actions[1], self.payoffs[i].clone())
    }

    fn gradient(&self, i: usize, x: &[Vec<f64>]) -> Vec<f64> {
        let n = self.players();
        let mut g = vec![0.0; self.actions[i]];
        let mut profile = vec![0usize; n];
        for (idx, u) in self.payoffs[i].iter().enumerate() {
            let mut rem = idx;
            for j in (0..n).rev() {
                profile[j] = rem % self.actions[j];
                rem /= self.actions[j];
            }
            let mut w = *u;
            for j in 0..n {
                if j != i {
                    w *= x[j][profile[j]];
                }
            }
            g[profile[i]] += w;
        }
        g
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GameModel {
    NormalForm(NormalFormGame),
    /// `u_1 = x_1^T A x_2` and `u_2 = x_1^T B x_2`.
    Bilinear {
        a: DenseMatrix,
        b: DenseMatrix,
    },
}

/// Game whose utilities are linear in each player's own strategy, exposed
/// through per-player gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct MultilinearGame {
    bodies: Vec<ConvexBody>,
    model: GameModel,
    bound: f64,
}

impl MultilinearGame {
    pub fn normal_form(game: NormalFormGame) -> Result<Self> {
        let bodies = game
            .actions
            .iter()
            .map(|a| ConvexBody::simplex(*a))
            .collect::<Result<Vec<_>>>()?;
        let bound = game
            .payoffs
            .iter()
            .zip(&game.actions)
            .map(|(p, a)| {
                let top = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                top * (*a as f64).sqrt()
            })
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        Ok(Self {
            bodies,
            model: GameModel::NormalForm(game),
            bound,
        })
    }

    pub fn bilinear(x1: ConvexBody, x2: ConvexBody, a: DenseMatrix, b: DenseMatrix) -> Result<Self> {
        check_dim(x1.dim(), a.rows())?;
        check_dim(x2.dim(), a.cols())?;
        check_dim(a.rows(), b.rows())?;
        check_dim(a.cols(), b.cols())?;
        let bound = (frobenius(&a) * x2.bounds().outer_radius)
            .max(frobenius(&b) * x1.bounds().outer_radius)
            .max(f64::MIN_POSITIVE);
        Ok(Self {
            bodies: vec![x1, x2],
            model: GameModel::Bilinear { a, b },
            bound,
        })
    }

    pub fn players(&self) -> usize {
        self.bodies.len()
    }

    pub fn body(&self, i: usize) -> &ConvexBody {
        &self.bodies[i]
    }

    pub fn bodies(&self) -> &[ConvexBody] {
        &self.bodies
    }

    pub fn model(&self) -> &GameModel {
        &self.model
    }

    /// `B` with `||g_i|| <= B` for all players and strategies.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// `g_i(x_{-i})`; `x[i]` is ignored.
    pub fn gradient(&self, i: usize, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_dim(self.players(), x.len())?;
        for (j, xj) in x.iter().enumerate() {
            if j != i && !self.bodies[j].membership(xj, 1e-7)? {
                return Err(Error::NotMember(j));
            }
        }
        self.gradient_unchecked(i, x)
    }

    fn gradient_unchecked(&self, i: usize, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        let g = match &self.model {
            GameModel::NormalForm(nf) => nf.gradient(i, x),
            GameModel::Bilinear { a, b } => {
                if i == 0 {
                    crate::numerics::matvec(a, &x[1])?
                } else {
                    crate::numerics::matvec_t(b, &x[0])?
                }
            }
        };
        let n = norm2(&g);
        if n > self.bound * (1.0 + 1e-9) + 1e-12 {
            return Err(Error::NumericalBreakdown(format!(
                "gradient norm {n} exceeds bound {}",
                self.bound
            )));
        }
        Ok(g)
    }

    /// `u_i(x) = <g_i(x_{-i}), x_i>`.
    pub fn utility(&self, i: usize, x: &[Vec<f64>]) -> Result<f64> {
        Ok(dot(&self.gradient(i, x)?, &x[i]))
    }
}

/// Distribution over joint strategies, stored as concatenated blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    dist: SparseDistribution,
    dims: Vec<usize>,
}

impl JointDistribution {
    pub fn new(dist: SparseDistribution, dims: Vec<usize>) -> Result<Self> {
        check_dim(dims.iter().sum(), dist.dim())?;
        Ok(Self { dist, dims })
    }

    /// Independent play.
    pub fn product(parts: &[SparseDistribution]) -> Result<Self> {
        let dims = parts.iter().map(|p| p.dim()).collect();
        Self::new(SparseDistribution::product(parts)?, dims)
    }

    pub fn distribution(&self) -> &SparseDistribution {
        &self.dist
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }

    /// Atom `t` split into player blocks.
    pub fn blocks(&self, t: usize) -> Vec<Vec<f64>> {
        let p = &self.dist.points()[t];
        let mut out = Vec::with_capacity(self.dims.len());
        let mut off = 0;
        for d in &self.dims {
            out.push(p[off..off + d].to_vec());
            off += d;
        }
        out
    }

    pub fn weight(&self, t: usize) -> f64 {
        self.dist.weights()[t]
    }

    /// Index of the first atom failing membership, with the player.
    pub fn check_members(&self, game: &MultilinearGame, tol: f64) -> Result<Option<(usize, usize)>> {
        for t in 0..self.len() {
            for (i, b) in self.blocks(t).iter().enumerate() {
                if !game.body(i).membership(b, tol)? {
                    return Ok(Some((t, i)));
                }
            }
        }
        Ok(None)
    }

    pub fn expected_utility(&self, game: &MultilinearGame, i: usize) -> Result<f64> {
        let mut acc = 0.0;
        for t in 0..self.len() {
            acc += self.weight(t) * game.utility(i, &self.blocks(t))?;
        }
        Ok(acc)
    }
}

/// One player's factor of a product response, in local frame coordinates.
#[derive(Clone, Debug)]
pub struct ProductResponse {
    pub factors: Vec<SparseDistribution>,
}

/// The deviation-parameter problem of a game: frames, feature maps, radii
/// and the parameter layout `y = (K_1, c_1, ..., K_n, c_n)` in local
/// coordinates.
#[derive(Clone, Debug)]
pub struct EquilibriumProblem {
    game: MultilinearGame,
    frames: Vec<Frame>,
    fms: Vec<FeatureMap>,
    radii: Vec<PhiRadii>,
    offsets: Vec<usize>,
    local_bounds: Vec<f64>,
    eps: f64,
    eps_inner: f64,
    radius: f64,
    column_bound: f64,
}

impl EquilibriumProblem {
    pub fn new(game: MultilinearGame, features: &[Features], eps: f64) -> Result<Self> {
        check_dim(game.players(), features.len())?;
        if !(eps > 0.0) {
            return Err(Error::InvalidInput("eps must be positive".into()));
        }
        let n = game.players();
        let mut frames = Vec::with_capacity(n);
        let mut fms = Vec::with_capacity(n);
        let mut radii = Vec::with_capacity(n);
        let mut offsets = vec![0];
        let mut local_bounds = Vec::with_capacity(n);
        for (body, feat) in game.bodies.iter().zip(features) {
            let frame = Frame::new(body)?;
            let d = frame.local_dim();
            let fm = feat.build(d, frame.local().bounds())?;
            let r = phi_radii(&fm, frame.local().bounds(), d)?;
            let p_norm = frobenius(frame.matrix());
            local_bounds.push(p_norm * game.bound());
            offsets.push(offsets.last().unwrap() + fm.param_dim());
            frames.push(frame);
            fms.push(fm);
            radii.push(r);
        }
        let b_max = local_bounds.iter().fold(0.0f64, |m, v| m.max(*v));
        let eps_inner = eps / (4.0 * n as f64 * b_max);
        let radius = radii.iter().map(|r| r.outer * r.outer).sum::<f64>().sqrt();
        let column_bound = local_bounds
            .iter()
            .zip(&fms)
            .map(|(b, fm)| b * b * (fm.norm_bound() * fm.norm_bound() + 1.0))
            .sum::<f64>()
            .sqrt();
        Ok(Self {
            game,
            frames,
            fms,
            radii,
            offsets,
            local_bounds,
            eps,
            eps_inner,
            radius,
            column_bound,
        })
    }

    pub fn game(&self) -> &MultilinearGame {
        &self.game
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn feature_maps(&self) -> &[FeatureMap] {
        &self.fms
    }

    pub fn radii(&self) -> &[PhiRadii] {
        &self.radii
    }

    /// Total parameter dimension `k`.
    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Outer radius `sqrt(sum R'_i^2)` of the parameter search.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Bound on the norm of any payoff column.
    pub fn column_bound(&self) -> f64 {
        self.column_bound
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Bounds on the local gradient norms `||P_i^T g_i||`.
    pub fn local_bounds(&self) -> &[f64] {
        &self.local_bounds
    }

    /// Per-player expected-fixed-point precision `eps / (4 n B)`.
    pub fn inner_eps(&self) -> f64 {
        self.eps_inner
    }

    pub fn block<'a>(&self, y: &'a [f64], i: usize) -> &'a [f64] {
        &y[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn params(&self, y: &[f64], i: usize) -> Result<DeviationParams> {
        DeviationParams::from_flat(&self.fms[i], self.block(y, i))
    }

    /// Every player's identity map.
    pub fn identity_point(&self) -> Result<Vec<f64>> {
        let mut y = Vec::with_capacity(self.dim());
        for fm in &self.fms {
            y.extend(identity_params(fm)?.to_flat());
        }
        Ok(y)
    }

    /// Every player's constant map to their frame origin.
    pub fn center_constant_point(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    fn to_ambient(&self, i: usize, z: &[f64]) -> Result<Vec<f64>> {
        self.frames[i].to_ambient(z)
    }

    /// Local gradient of player `i` at ambient strategies `x`.
    fn local_gradient(&self, i: usize, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        let g = self.game.gradient_unchecked(i, x)?;
        self.frames[i].pull_gradient(&g)
    }

    /// `(a, b)` with `a . y + b = -E[sum_i gain_i(y)]` under a product of
    /// local factors. Multilinearity gives `E g_i = g_i(E x_{-i})`.
    pub fn product_column(&self, factors: &[SparseDistribution]) -> Result<(Vec<f64>, f64)> {
        let n = self.game.players();
        check_dim(n, factors.len())?;
        let means: Vec<Vec<f64>> = (0..n)
            .map(|i| self.to_ambient(i, &factors[i].mean()))
            .collect::<Result<_>>()?;
        let mut a = Vec::with_capacity(self.dim());
        let mut b = 0.0;
        for i in 0..n {
            let g = self.local_gradient(i, &means)?;
            let fm = &self.fms[i];
            let mut feat = vec![0.0; fm.output_dim()];
            let mut zbar = vec![0.0; fm.input_dim()];
            for (z, w) in factors[i].atoms() {
                let m = fm.eval(z)?;
                for (f, v) in feat.iter_mut().zip(&m) {
                    *f += w * v;
                }
                for (s, v) in zbar.iter_mut().zip(z) {
                    *s += w * v;
                }
            }
            for gr in &g {
                for f in &feat {
                    a.push(-gr * f);
                }
            }
            a.extend(g.iter().map(|v| -v));
            b += dot(&g, &zbar);
        }
        Ok((a, b))
    }

    /// Good-enough response or separation at a parameter candidate `y`:
    /// semi-separation per player, then either a parameter halfspace from
    /// the first witness or the product of the expected fixed points.
    pub fn query(&self, y: &[f64]) -> Result<Answer<ProductResponse, Infallible>> {
        check_dim(self.dim(), y.len())?;
        let n = self.game.players();
        let mut factors = Vec::with_capacity(n);
        for i in 0..n {
            let p = self.params(y, i)?;
            let fm = &self.fms[i];
            let local = self.frames[i].local();
            match semi_separate(local, |z| p.apply(fm, z), self.eps_inner)? {
                SemiSepResult::Efp(sol) => factors.push(sol.distribution),
                SemiSepResult::Witness { x, image } => {
                    return Ok(Answer::Sep(self.witness_cut(i, &x, &image)?));
                }
            }
        }
        let (normal, offset) = self.product_column(&factors)?;
        Ok(Answer::Good {
            payload: ProductResponse { factors },
            normal,
            offset,
        })
    }

    /// Halfspace `<w, K m(z) + c> <= beta` in parameter space, valid for all
    /// endomorphisms, where `<w, .> <= beta` separates `image` from the
    /// player's local body.
    pub fn witness_cut(&self, i: usize, z: &[f64], image: &[f64]) -> Result<Halfspace> {
        let local = self.frames[i].local();
        let h = local
            .separate(image, DEFAULT_TOL)?
            .ok_or_else(|| Error::NumericalBreakdown("witness image is a member".into()))?;
        let lifted = lift_halfspace(&self.fms[i], z, &h)?;
        let mut normal = vec![0.0; self.dim()];
        let off = self.offsets[i];
        normal[off..off + lifted.dim()].copy_from_slice(lifted.normal());
        Halfspace::new(normal, lifted.offset())
    }

    /// Mixture of product responses as a joint distribution in ambient
    /// coordinates, with the mass dropped by pruning.
    pub fn assemble(&self, cert: &Certificate<ProductResponse>) -> Result<(JointDistribution, f64)> {
        let mut parts = Vec::with_capacity(cert.payloads.len());
        let mut dropped = 0.0;
        for (resp, w) in cert.payloads.iter().zip(&cert.weights) {
            let mut factors: Vec<SparseDistribution> = resp
                .factors
                .iter()
                .enumerate()
                .map(|(i, f)| f.map_points(|z| self.to_ambient(i, z)))
                .collect::<Result<_>>()?;
            while factors.iter().map(|f| f.len()).product::<usize>() > PRODUCT_ATOM_CAP {
                let (j, _) = factors
                    .iter()
                    .enumerate()
                    .max_by_key(|(_, f)| f.len())
                    .expect("nonempty");
                let (p, lost) = factors[j].pruned(factors[j].len() / 2);
                factors[j] = p;
                dropped += w * lost;
            }
            parts.push(SparseDistribution::product(&factors)?);
        }
        let dist = SparseDistribution::mixture(&parts, &cert.weights)?.merged();
        let dims = self.game.bodies.iter().map(|b| b.dim()).collect();
        Ok((JointDistribution::new(dist, dims)?, dropped))
    }

    /// `E_mu[-sum_i gain_i(y)]` recomputed atom by atom.
    pub fn payoff(&self, mu: &JointDistribution, y: &[f64]) -> Result<f64> {
        let n = self.game.players();
        let params: Vec<DeviationParams> = (0..n).map(|i| self.params(y, i)).collect::<Result<_>>()?;
        let mut acc = 0.0;
        for t in 0..mu.len() {
            let x = mu.blocks(t);
            let mut v = 0.0;
            for i in 0..n {
                let g = self.local_gradient(i, &x)?;
                let z = self.frames[i].to_local(&x[i])?;
                let moved = params[i].apply(&self.fms[i], &z)?;
                v -= dot(&g, &moved) - dot(&g, &z);
            }
            acc += mu.weight(t) * v;
        }
        Ok(acc)
    }
}

/// Solver statistics and verification of an equilibrium run.
#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumReport {
    pub gaps: Vec<f64>,
    pub method: GapMethod,
    pub values: Vec<f64>,
    pub cuts: usize,
    pub ger_cuts: usize,
    pub sep_cuts: usize,
    pub certificate_value: f64,
    pub pruned_mass: f64,
    pub support: usize,
    pub runtime_secs: f64,
    pub eps: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GapMethod {
    /// Exact swap-deviation gap over column-stochastic matrices.
    ExactLp,
    /// Deviation gap with endomorphism constraints imposed on sampled
    /// points only; an optimistic estimate.
    SampledLp,
}

/// Full solver output.
#[derive(Clone, Debug)]
pub struct EquilibriumRun {
    pub problem: EquilibriumProblem,
    pub certificate: Certificate<ProductResponse>,
    pub joint: JointDistribution,
    pub report: EquilibriumReport,
}

/// Correlated distribution under which no player gains more than `eps` by
/// any deviation `x -> K m(x) + c` of their feature class.
pub fn compute_phi_equilibrium(game: &MultilinearGame, features: &[Features], eps: f64) -> Result<EquilibriumRun> {
    let start = Instant::now();
    let problem = EquilibriumProblem::new(game.clone(), features, eps)?;
    let k = problem.dim();
    let settings = EahSettings::new(
        k,
        problem.radius(),
        eps,
        problem.column_bound(),
        CertDomain::Ball {
            radius: problem.radius(),
        },
    )?;
    info!(
        "equilibrium: k = {k}, R_y = {:.4}, column bound = {:.4}, inner eps = {:e}",
        problem.radius(),
        problem.column_bound(),
        problem.inner_eps()
    );
    let certificate = match eah_run(k, &settings, |y: &[f64]| problem.query(y))? {
        EahOutcome::Certified(c) => c,
        EahOutcome::Stopped { stop, .. } => match stop {},
    };
    let (joint, pruned_mass) = problem.assemble(&certificate)?;
    let method = if all_exact(game, features) {
        GapMethod::ExactLp
    } else {
        GapMethod::SampledLp
    };
    let gaps = equilibrium_gap(game, &joint, features, method)?;
    let values = (0..game.players())
        .map(|i| joint.expected_utility(game, i))
        .collect::<Result<Vec<_>>>()?;
    let report = EquilibriumReport {
        gaps,
        method,
        values,
        cuts: certificate.log.len(),
        ger_cuts: certificate.log.ger_count(),
        sep_cuts: certificate.log.sep_count(),
        certificate_value: certificate.value,
        pruned_mass,
        support: joint.len(),
        runtime_secs: start.elapsed().as_secs_f64(),
        eps,
    };
    let worst = report.gaps.iter().fold(0.0f64, |m, g| m.max(*g));
    if worst > 2.0 * eps {
        return Err(Error::VerificationFailed {
            gap: worst,
            limit: 2.0 * eps,
        });
    }
    Ok(EquilibriumRun {
        problem,
        certificate,
        joint,
        report,
    })
}

fn all_exact(game: &MultilinearGame, features: &[Features]) -> bool {
    game.bodies
        .iter()
        .all(|b| matches!(b.kind(), crate::geometry::BodyKind::Simplex { .. }))
        && features.iter().all(|f| *f == Features::Linear)
}

/// Per-player deviation gaps `max_phi E_mu[u_i(phi(x_i), x_{-i}) - u_i(x)]`.
pub fn equilibrium_gap(
    game: &MultilinearGame,
    mu: &JointDistribution,
    features: &[Features],
    method: GapMethod,
) -> Result<Vec<f64>> {
    check_dim(game.players(), features.len())?;
    match method {
        GapMethod::ExactLp => {
            if !all_exact(game, features) {
                return Err(Error::ModeUnavailable(
                    "exact gaps need simplex strategies and linear features".into(),
                ));
            }
            (0..game.players()).map(|i| exact_swap_gap(game, mu, i)).collect()
        }
        GapMethod::SampledLp => {
            let mut rng = ChaCha8Rng::seed_from_u64(VERIFY_SEED);
            (0..game.players())
                .map(|i| sampled_gap(game, mu, i, features[i], &mut rng))
                .collect()
        }
    }
}

/// `max_K sum_{a,b} K[a][b] E[g[a] x[b]] - E<g, x>` over column-stochastic `K`.
fn exact_swap_gap(game: &MultilinearGame, mu: &JointDistribution, i: usize) -> Result<f64> {
    let n = game.body(i).dim();
    let mut c = vec![0.0; n * n];
    let mut base = 0.0;
    for t in 0..mu.len() {
        let x = mu.blocks(t);
        let g = game.gradient(i, &x)?;
        let w = mu.weight(t);
        for a in 0..n {
            for b in 0..n {
                c[a * n + b] += w * g[a] * x[i][b];
            }
        }
        base += w * dot(&g, &x[i]);
    }
    let mut lp = LpProblem::new(Sense::Maximize, c);
    for b in 0..n {
        let mut row = vec![0.0; n * n];
        for a in 0..n {
            row[a * n + b] = 1.0;
        }
        lp.add(row, Relation::Eq, 1.0);
    }
    let (_, best) = lp_solve(&lp, 1e-12)?
        .optimal()
        .ok_or_else(|| Error::NumericalBreakdown("swap program has no optimum".into()))?;
    Ok((best - base).max(0.0))
}

/// Maximizes the local-frame deviation gain over `(K, c)` with the
/// endomorphism constraint imposed at sampled points, solved through its
/// dual `min h^T pi` subject to `A^T pi = obj`, `pi >= 0`.
fn sampled_gap<R: Rng + ?Sized>(
    game: &MultilinearGame,
    mu: &JointDistribution,
    i: usize,
    feature: Features,
    rng: &mut R,
) -> Result<f64> {
    let frame = Frame::new(game.body(i))?;
    let local = frame.local();
    let (h, beta) = local
        .inequalities()
        .ok_or_else(|| Error::ModeUnavailable("sampled gaps need a polyhedral strategy set".into()))?;
    let fm = feature.build(frame.local_dim(), local.bounds())?;
    let d = fm.input_dim();
    let kp = fm.output_dim();
    let k = fm.param_dim();
    let mut obj = vec![0.0; k];
    let mut base = 0.0;
    let mut points: Vec<Vec<f64>> = Vec::new();
    for t in 0..mu.len() {
        let x = mu.blocks(t);
        let g = frame.pull_gradient(&game.gradient(i, &x)?)?;
        let z = frame.to_local(&x[i])?;
        let m = fm.eval(&z)?;
        let w = mu.weight(t);
        for r in 0..d {
            for c in 0..kp {
                obj[r * kp + c] += w * g[r] * m[c];
            }
            obj[d * kp + r] += w * g[r];
        }
        base += w * dot(&g, &z);
        points.push(z);
    }
    if let Some(vs) = local.vertices() {
        points.extend(vs);
    }
    for j in 0..d {
        for s in [1.0, -1.0] {
            let mut u = vec![0.0; d];
            u[j] = s;
            points.push(local.linopt(&u)?);
        }
    }
    for _ in 0..VERIFY_SAMPLES {
        if rng.random::<f64>() < 0.5 {
            points.push(local.linopt(&uniform_on_sphere(rng, d))?);
        } else {
            points.push(local.sample_member(rng)?);
        }
    }
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut costs = Vec::new();
    for z in &points {
        let m = fm.eval(z)?;
        for row in 0..h.rows() {
            let hr = h.row(row);
            let mut col = vec![0.0; k];
            for r in 0..d {
                for c in 0..kp {
                    col[r * kp + c] = hr[r] * m[c];
                }
                col[d * kp + r] = hr[r];
            }
            cols.push(col);
            costs.push(beta[row]);
        }
    }
    let mut lp = LpProblem::new(Sense::Minimize, costs);
    for j in 0..k {
        lp.add(cols.iter().map(|c| c[j]).collect(), Relation::Eq, obj[j]);
    }
    match lp_solve(&lp, 1e-10)? {
        LpOutcome::Optimal { value, .. } => Ok((value - base).max(0.0)),
        LpOutcome::Infeasible { .. } => Err(Error::NumericalBreakdown(
            "sampled deviation program is unbounded; add samples".into(),
        )),
        LpOutcome::Unbounded => Err(Error::NumericalBreakdown(
            "sampled deviation program is infeasible".into(),
        )),
    }
}

/// Value of the zero-sum game with row-player payoff matrix `a`.
pub fn zero_sum_value(a: &DenseMatrix) -> Result<f64> {
    let (m, n) = (a.rows(), a.cols());
    let shift = a.data().iter().fold(0.0f64, |s, v| s.max(v.abs())) + 1.0;
    let mut obj = vec![0.0; m + 1];
    obj[m] = 1.0;
    let mut lp = LpProblem::new(Sense::Maximize, obj);
    for j in 0..n {
        let mut row: Vec<f64> = (0..m).map(|i| -(a.get(i, j) + shift)).collect();
        row.push(1.0);
        lp.add(row, Relation::Le, 0.0);
    }
    let mut simplex = vec![1.0; m];
    simplex.push(0.0);
    lp.add(simplex, Relation::Eq, 1.0);
    let (_, v) = lp_solve(&lp, 1e-12)?
        .optimal()
        .ok_or_else(|| Error::NumericalBreakdown("game value program has no optimum".into()))?;
    Ok(v - shift)
}

/// Hit-and-run samples from `B_R(0)` intersected with halfspaces, started
/// at an interior point, keeping every `thin`-th step after `burn` steps.
pub fn hit_and_run<R: Rng + ?Sized>(
    start: &[f64],
    radius: f64,
    cuts: &[Halfspace],
    count: usize,
    burn: usize,
    thin: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let k = start.len();
    if norm2(start) > radius || cuts.iter().any(|h| h.violation(start) > 1e-9) {
        return Err(Error::InvalidInput("hit-and-run start must be feasible".into()));
    }
    let mut y = start.to_vec();
    let mut out = Vec::with_capacity(count);
    let mut step = 0usize;
    while out.len() < count {
        let u = uniform_on_sphere(rng, k);
        let uy = dot(&u, &y);
        let disc = (uy * uy - (dot(&y, &y) - radius * radius)).max(0.0).sqrt();
        let (mut lo, mut hi) = (-uy - disc, -uy + disc);
        for h in cuts {
            let nu = dot(h.normal(), &u);
            let slack = h.offset() - dot(h.normal(), &y);
            if nu > 1e-15 {
                hi = hi.min(slack / nu);
            } else if nu < -1e-15 {
                lo = lo.max(slack / nu);
            }
        }
        if hi > lo {
            let t = lo + (hi - lo) * rng.random::<f64>();
            for (a, b) in y.iter_mut().zip(&u) {
                *a += t * b;
            }
        }
        step += 1;
        if step > burn && (step - burn) % thin.max(1) == 0 {
            out.push(y.clone());
        }
    }
    Ok(out)
}
