use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::deviations::{identity_params, lift_halfspace, phi_radii, DeviationParams, FeatureMap, Features, PhiRadii};
use crate::efp::{efp_eah, semi_separate, EfpSolution, SemiSepResult};
use crate::ellipsoid::{log_ball_volume, log_volume_ratio, EllipsoidState};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{BodyKind, ConvexBody, Frame, Halfspace, RegretMinimizer, SparseDistribution, DEFAULT_TOL};
use crate::numerics::{dot, lp_solve, norm2, sub, DenseMatrix, LpOutcome, LpProblem, Relation, Sense};

const SHELL_TOL: f64 = 1e-9;
const PROJECTION_TOL: f64 = 1e-13;
const ACTIVE_SET_STEPS: usize = 100_000;
const MU_BISECTIONS: usize = 200;
const LP_TOL: f64 = 1e-10;

/// Rejects utilities outside `[-1, 1]^d` instead of clamping them.
pub fn check_utility(u: &[f64], d: usize) -> Result<()> {
    check_dim(d, u.len())?;
    if u.iter().any(|v| !v.is_finite() || v.abs() > 1.0) {
        return Err(Error::InvalidInput(format!("utility {u:?} leaves [-1, 1]^d")));
    }
    Ok(())
}

/// Deviation parameters `y = (K, c)` acting on the local chart of a body.
#[derive(Clone, Debug)]
pub struct DeviationSpace {
    frame: Frame,
    fm: FeatureMap,
    radii: PhiRadii,
    utility_scale: f64,
}

/// Result of testing one parameter vector with semi-separation.
#[derive(Clone, Debug)]
pub enum ParamTest {
    /// An expected fixed point in local coordinates.
    Efp(EfpSolution),
    /// A parameter halfspace valid for every endomorphism and violated by
    /// the tested point.
    Cut(Halfspace),
}

impl DeviationSpace {
    pub fn new(body: &ConvexBody, features: Features) -> Result<Self> {
        let frame = Frame::new(body)?;
        let d = frame.local_dim();
        let fm = features.build(d, frame.local().bounds())?;
        let radii = phi_radii(&fm, frame.local().bounds(), d)?;
        let p = frame.matrix();
        let utility_scale = (0..p.cols())
            .map(|j| (0..p.rows()).map(|i| p.get(i, j).abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
        Ok(Self {
            frame,
            fm,
            radii,
            utility_scale,
        })
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn feature_map(&self) -> &FeatureMap {
        &self.fm
    }

    pub fn radii(&self) -> &PhiRadii {
        &self.radii
    }

    /// Parameter dimension `k = k' d + d`.
    pub fn dim(&self) -> usize {
        self.fm.param_dim()
    }

    /// Bound on `||P^T u||_inf` over `u` in `[-1, 1]^d`.
    pub fn utility_scale(&self) -> f64 {
        self.utility_scale
    }

    pub fn identity(&self) -> Result<Vec<f64>> {
        Ok(identity_params(&self.fm)?.to_flat())
    }

    pub fn apply(&self, y: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        DeviationParams::from_flat(&self.fm, y)?.apply(&self.fm, z)
    }

    /// The deviation in ambient coordinates, `x -> P phi(P^-1 (x - x_0)) + x_0`.
    pub fn apply_ambient(&self, y: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.frame.to_ambient(&self.apply(y, &self.frame.to_local(x)?)?)
    }

    /// Semi-separation of the map with parameters `y` over the local body.
    pub fn test(&self, y: &[f64], eps: f64) -> Result<ParamTest> {
        let params = DeviationParams::from_flat(&self.fm, y)?;
        let local = self.frame.local();
        match semi_separate(local, |z| params.apply(&self.fm, z), eps)? {
            SemiSepResult::Efp(sol) => Ok(ParamTest::Efp(sol)),
            SemiSepResult::Witness { x, image } => {
                let h = local
                    .separate(&image, DEFAULT_TOL)?
                    .ok_or_else(|| Error::NumericalBreakdown("witness image is a member".into()))?;
                Ok(ParamTest::Cut(lift_halfspace(&self.fm, &x, &h)?))
            }
        }
    }

    /// Lifted utility `(E[u~ (x) m(z)], u~)` with `u~ = P^T u`, for a local
    /// distribution.
    pub fn lift_utility(&self, mu_local: &SparseDistribution, u: &[f64]) -> Result<Vec<f64>> {
        let ul = self.frame.pull_gradient(u)?;
        let kp = self.fm.output_dim();
        let mut out = vec![0.0; self.dim()];
        for (z, w) in mu_local.atoms() {
            let m = self.fm.eval(z)?;
            for (r, ur) in ul.iter().enumerate() {
                for (c, mc) in m.iter().enumerate() {
                    out[r * kp + c] += w * ur * mc;
                }
            }
        }
        out[ul.len() * kp..].copy_from_slice(&ul);
        Ok(out)
    }

    /// Builds the ledger entry of one round from its ambient strategy and
    /// utility.
    pub fn record(
        &self,
        strategy: &SparseDistribution,
        u: &[f64],
        params: &[f64],
        efp_error: f64,
        cuts: usize,
    ) -> Result<RoundRecord> {
        let local = strategy.map_points(|x| self.frame.to_local(x))?;
        let lifted = self.lift_utility(&local, u)?;
        let origin = self.frame.to_ambient(&vec![0.0; self.frame.local_dim()])?;
        let offset = dot(u, &origin);
        let learner_payoff = expected_payoff(strategy, u);
        let deviation_payoff = dot(params, &lifted) + offset;
        Ok(RoundRecord {
            strategy: strategy.clone(),
            utility: u.to_vec(),
            lifted,
            offset,
            learner_payoff,
            deviation_payoff,
            params: params.to_vec(),
            efp_error,
            cuts,
        })
    }

    /// Outer relaxation of the endomorphism set: the body's facets lifted at
    /// a finite set of test points. Exact for linear features on polytopes
    /// with known vertices.
    pub fn relaxation(&self, resolution: usize) -> Result<Comparators> {
        let local = self.frame.local();
        let d = local.dim();
        let facets = facets(local)?;
        let mut points = local_vertices(local).unwrap_or_default();
        if !self.fm.is_linear() || points.is_empty() {
            match local.kind() {
                BodyKind::Box { lo, hi } if resolution.checked_pow(d as u32).is_some_and(|n| n <= 1 << 16) => {
                    points.extend(grid(lo, hi, resolution.max(2)));
                }
                _ => {
                    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
                    for _ in 0..resolution.max(2) * resolution.max(2) * d {
                        points.push(local.sample_member(&mut rng)?);
                    }
                }
            }
        }
        let mut rows = Vec::with_capacity(points.len() * facets.len());
        for z in &points {
            for h in &facets {
                rows.push(lift_halfspace(&self.fm, z, h)?);
            }
        }
        Ok(Comparators::Polyhedral(rows))
    }
}

fn expected_payoff(mu: &SparseDistribution, u: &[f64]) -> f64 {
    mu.atoms().map(|(x, w)| w * dot(u, x)).sum()
}

fn facets(body: &ConvexBody) -> Result<Vec<Halfspace>> {
    if let Some((a, b)) = body.inequalities() {
        return (0..a.rows()).map(|i| Halfspace::new(a.row(i).to_vec(), b[i])).collect();
    }
    let d = body.dim();
    let mut dirs = Vec::new();
    for j in 0..d {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[j] = s;
            dirs.push(e);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xd1);
    for _ in 0..8 * d {
        dirs.push(crate::geometry::uniform_on_sphere(&mut rng, d));
    }
    dirs.into_iter()
        .map(|n| {
            let x = body.linopt(&n)?;
            let h = dot(&n, &x);
            Halfspace::new(n, h)
        })
        .collect()
}

/// Vertices from the closed form, or by enumerating `d`-subsets of facets
/// for small polytopes.
fn local_vertices(body: &ConvexBody) -> Option<Vec<Vec<f64>>> {
    if let Some(v) = body.vertices() {
        return Some(v);
    }
    let (a, b) = body.inequalities()?;
    let (m, d) = (a.rows(), a.cols());
    if crate::deviations::binomial(m, d) > 20_000 {
        return None;
    }
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| a.row(i).to_vec()).collect();
        if let Ok(sys) = DenseMatrix::from_rows(&rows) {
            let rhs: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
            if let Some(x) = sys.solve(&rhs) {
                let feasible = (0..m).all(|i| dot(a.row(i), &x) <= b[i] + 1e-9 * (1.0 + b[i].abs()));
                let fresh = out
                    .iter()
                    .all(|v| v.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum::<f64>() > 1e-9);
                if feasible && fresh {
                    out.push(x);
                }
            }
        }
        let mut i = d;
        loop {
            if i == 0 {
                return Some(out);
            }
            i -= 1;
            if idx[i] < m - d + i {
                idx[i] += 1;
                for j in i + 1..d {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn grid(lo: &[f64], hi: &[f64], n: usize) -> Vec<Vec<f64>> {
    let d = lo.len();
    let total = n.pow(d as u32);
    (0..total)
        .map(|mut t| {
            (0..d)
                .map(|j| {
                    let i = t % n;
                    t /= n;
                    lo[j] + (hi[j] - lo[j]) * i as f64 / (n - 1) as f64
                })
                .collect()
        })
        .collect()
}

/// Convex superset of the endomorphism parameters: the ball `B_D(0)` cut by
/// witness halfspaces.
#[derive(Clone, Debug, PartialEq)]
pub struct ShellSet {
    dim: usize,
    radius: f64,
    cuts: Vec<Halfspace>,
}

impl ShellSet {
    pub fn new(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 || !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidInput(
                "shell needs a positive dimension and radius".into(),
            ));
        }
        Ok(Self {
            dim,
            radius,
            cuts: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn cuts(&self) -> &[Halfspace] {
        &self.cuts
    }

    pub fn add_cut(&mut self, h: Halfspace) -> Result<()> {
        check_dim(self.dim, h.dim())?;
        self.cuts.push(h);
        Ok(())
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        norm2(y) <= self.radius * (1.0 + tol) && self.cuts.iter().all(|h| h.contains(y, tol))
    }

    /// A violated constraint, the ball first, then the most violated cut.
    pub fn separate(&self, y: &[f64], tol: f64) -> Option<Halfspace> {
        let n = norm2(y);
        if n > self.radius * (1.0 + tol) {
            return Halfspace::new(y.iter().map(|v| v / n).collect(), self.radius).ok();
        }
        self.cuts
            .iter()
            .filter(|h| !h.contains(y, tol))
            .max_by(|a, b| a.violation(y).total_cmp(&b.violation(y)))
            .cloned()
    }

    /// Euclidean projection onto the shell: the polyhedron projection of
    /// `y / (1 + mu)`, with the multiplier `mu >= 0` of the ball found by
    /// bisection. Needs `0` inside every cut.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, y.len())?;
        let p = project_polyhedron(&self.cuts, y)?;
        if norm2(&p) <= self.radius {
            return Ok(p);
        }
        let at = |mu: f64| {
            let scaled: Vec<f64> = y.iter().map(|v| v / (1.0 + mu)).collect();
            project_polyhedron(&self.cuts, &scaled)
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut best = at(hi)?;
        while norm2(&best) > self.radius {
            lo = hi;
            hi *= 2.0;
            best = at(hi)?;
        }
        for _ in 0..MU_BISECTIONS {
            if hi - lo <= PROJECTION_TOL * (1.0 + hi) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let p = at(mid)?;
            if norm2(&p) > self.radius {
                lo = mid;
            } else {
                hi = mid;
                best = p;
            }
        }
        Ok(best)
    }
}

fn project_ball(y: &[f64], radius: f64) -> Vec<f64> {
    let n = norm2(y);
    if n <= radius {
        y.to_vec()
    } else {
        y.iter().map(|v| v * radius / n).collect()
    }
}

/// Dual active-set (Goldfarb-Idnani) projection onto
/// `{x : <n_i, x> <= h_i}`.
fn project_polyhedron(cuts: &[Halfspace], y: &[f64]) -> Result<Vec<f64>> {
    let tol = PROJECTION_TOL * (1.0 + norm2(y));
    let slack = |i: usize, x: &[f64]| cuts[i].offset() - dot(cuts[i].normal(), x);
    let mut x = y.to_vec();
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    for _ in 0..ACTIVE_SET_STEPS {
        let worst = (0..cuts.len())
            .filter(|i| !active.contains(i))
            .map(|i| (i, slack(i, &x)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let p = match worst {
            Some((p, s)) if s < -tol => p,
            _ => return Ok(x),
        };
        let c: Vec<f64> = cuts[p].normal().iter().map(|v| -v).collect();
        let mut up = 0.0;
        loop {
            let (z, r) = active_directions(cuts, &active, &c)?;
            let zc = dot(&z, &c);
            let full = if norm2(&z) > 1e-10 && zc > 0.0 {
                -slack(p, &x) / zc
            } else {
                f64::INFINITY
            };
            let mut partial = f64::INFINITY;
            let mut blocking = None;
            for (j, rj) in r.iter().enumerate() {
                if *rj > 1e-14 && u[j] / rj < partial {
                    partial = u[j] / rj;
                    blocking = Some(j);
                }
            }
            let t = full.min(partial);
            if !t.is_finite() {
                return Err(Error::NumericalBreakdown("shell cuts are inconsistent".into()));
            }
            if full.is_finite() {
                for (xi, zi) in x.iter_mut().zip(&z) {
                    *xi += t * zi;
                }
            }
            for (uj, rj) in u.iter_mut().zip(&r) {
                *uj -= t * rj;
            }
            up += t;
            if full <= partial {
                active.push(p);
                u.push(up);
                break;
            }
            let l = blocking.expect("finite partial step has a blocking constraint");
            active.remove(l);
            u.remove(l);
        }
    }
    Err(Error::NumericalBreakdown("shell projection did not settle".into()))
}

/// Primal step `z = c - N r` and dual step `r = (N^T N)^-1 N^T c` for the
/// active constraint columns `N` (negated cut normals).
fn active_directions(cuts: &[Halfspace], active: &[usize], c: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if active.is_empty() {
        return Ok((c.to_vec(), Vec::new()));
    }
    let q = active.len();
    let mut gram = DenseMatrix::zeros(q, q);
    for (a, &i) in active.iter().enumerate() {
        for (b, &j) in active.iter().enumerate() {
            gram.set(a, b, dot(cuts[i].normal(), cuts[j].normal()));
        }
    }
    let rhs: Vec<f64> = active.iter().map(|&i| -dot(cuts[i].normal(), c)).collect();
    let r = gram
        .solve(&rhs)
        .ok_or_else(|| Error::NumericalBreakdown("active shell cuts are dependent".into()))?;
    let mut z = c.to_vec();
    for (&i, rj) in active.iter().zip(&r) {
        for (zk, nk) in z.iter_mut().zip(cuts[i].normal()) {
            *zk += rj * nk;
        }
    }
    Ok((z, r))
}

/// The region `shell ∩ B_q(center)` searched by [`shell_ellipsoid`].
#[derive(Clone, Copy, Debug)]
pub struct ShellRegion<'a> {
    pub shell: &'a ShellSet,
    pub center: &'a [f64],
    pub radius: f64,
}

impl ShellRegion<'_> {
    fn separate(&self, y: &[f64]) -> Result<Option<Halfspace>> {
        let diff = sub(y, self.center);
        let n = norm2(&diff);
        if n > self.radius * (1.0 + SHELL_TOL) {
            let normal: Vec<f64> = diff.iter().map(|v| v / n).collect();
            let offset = dot(&normal, self.center) + self.radius;
            return Ok(Some(Halfspace::new(normal, offset)?));
        }
        Ok(self.shell.separate(y, SHELL_TOL))
    }
}

#[derive(Clone, Debug)]
pub enum ShellOutcome {
    Found {
        params: Vec<f64>,
        efp: EfpSolution,
        queries: usize,
    },
    /// Witness cuts whose intersection with the region has volume below
    /// the requested precision.
    Shrunk { cuts: Vec<Halfspace>, queries: usize },
}

/// Ellipsoid search of `F = shell ∩ B_q(center)` for parameters admitting an
/// expected fixed point. Stops with `Shrunk` once the ellipsoid volume drops
/// below the volume of `B_{eps_prime}`.
pub fn shell_ellipsoid(space: &DeviationSpace, region: &ShellRegion, eps: f64, eps_prime: f64) -> Result<ShellOutcome> {
    let k = space.dim();
    check_dim(k, region.shell.dim())?;
    check_dim(k, region.center.len())?;
    if !(region.radius > 0.0) || !(eps_prime > 0.0) {
        return Err(Error::InvalidInput(
            "region radius and precision must be positive".into(),
        ));
    }
    let target = log_ball_volume(k, eps_prime);
    let ratio = log_volume_ratio(k);
    let mut log_vol = log_ball_volume(k, region.radius);
    let mut ell = EllipsoidState::ball(region.center.to_vec(), region.radius)?;
    let mut cuts: Vec<Halfspace> = Vec::new();
    let mut queries = 0;
    while log_vol >= target {
        let c = ell.center().to_vec();
        let normal = match region.separate(&c)? {
            Some(h) => h.normal().to_vec(),
            None => match cuts.iter().find(|h| !h.contains(&c, SHELL_TOL)) {
                Some(h) => h.normal().to_vec(),
                None => {
                    queries += 1;
                    match space.test(&c, eps)? {
                        ParamTest::Efp(efp) => {
                            return Ok(ShellOutcome::Found {
                                params: c,
                                efp,
                                queries,
                            })
                        }
                        ParamTest::Cut(h) => {
                            let n = h.normal().to_vec();
                            cuts.push(h);
                            n
                        }
                    }
                }
            },
        };
        match ell.central_cut(&normal) {
            Ok(next) => {
                ell = next;
                log_vol += ratio;
            }
            Err(Error::DegenerateCut(_) | Error::NotPositiveDefinite) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(ShellOutcome::Shrunk { cuts, queries })
}

/// Precision settings of [`shell_project`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectSettings {
    pub eps: f64,
    pub eps_prime: f64,
    /// Projection-and-test rounds tried before the radius sweep.
    pub fast_rounds: usize,
}

impl ProjectSettings {
    /// `eps' = eps r / (32 M D^2)`.
    pub fn new(space: &DeviationSpace, shell: &ShellSet, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidInput("eps must be positive".into()));
        }
        let r = space.frame().local().bounds().inner_radius;
        let m = space.feature_map().norm_bound();
        let d = shell.radius();
        Ok(Self {
            eps,
            eps_prime: eps * r / (32.0 * m * d * d),
            fast_rounds: 256,
        })
    }
}

#[derive(Clone, Debug)]
pub struct Projection {
    pub shell: ShellSet,
    pub params: Vec<f64>,
    /// Expected fixed point of `params` in local coordinates.
    pub efp: EfpSolution,
    /// `||params - phi||`.
    pub distance: f64,
    /// Largest radius known to contain no parameters with an expected fixed
    /// point inside the returned shell.
    pub certified_below: f64,
    pub new_cuts: usize,
    pub ellipsoid_calls: usize,
}

/// Moves `phi` into a tightened shell at a point admitting an expected fixed
/// point, within `eps` of the projection onto that shell.
pub fn shell_project(
    space: &DeviationSpace,
    shell: &ShellSet,
    phi: &[f64],
    settings: &ProjectSettings,
) -> Result<Projection> {
    check_dim(space.dim(), phi.len())?;
    check_dim(space.dim(), shell.dim())?;
    let mut shell = shell.clone();
    let mut new_cuts = 0;
    if shell.contains(phi, SHELL_TOL) {
        match space.test(phi, settings.eps)? {
            ParamTest::Efp(efp) => return finish(phi, shell, phi.to_vec(), efp, None, 0, 0),
            ParamTest::Cut(h) => {
                shell.add_cut(h)?;
                new_cuts += 1;
            }
        }
    }
    for _ in 0..settings.fast_rounds {
        let p = shell.project(phi)?;
        match space.test(&p, settings.eps)? {
            ParamTest::Efp(efp) => return finish(phi, shell, p, efp, None, new_cuts, 0),
            ParamTest::Cut(h) => {
                shell.add_cut(h)?;
                new_cuts += 1;
            }
        }
    }
    let delta = settings.eps / (4.0 * shell.radius());
    let max_j = (2.0 * shell.radius() / delta).ceil() as u64;
    let dist = norm2(&sub(&shell.project(phi)?, phi));
    let mut fail = (dist / delta).floor() as u64;
    let mut step = 1u64;
    let mut found: Option<(u64, Vec<f64>, EfpSolution)> = None;
    let mut calls = 0;
    loop {
        let j = match &found {
            Some((js, ..)) if js - fail <= 1 => break,
            Some((js, ..)) => fail + (js - fail) / 2,
            None => fail + step,
        };
        if j > max_j {
            return Err(Error::SweepExhausted(j as f64 * delta));
        }
        calls += 1;
        let region = ShellRegion {
            shell: &shell,
            center: phi,
            radius: j as f64 * delta,
        };
        match shell_ellipsoid(space, &region, settings.eps, settings.eps_prime)? {
            ShellOutcome::Found { params, efp, .. } => found = Some((j, params, efp)),
            ShellOutcome::Shrunk { cuts, .. } => {
                new_cuts += cuts.len();
                for h in cuts {
                    shell.add_cut(h)?;
                }
                fail = j;
                match &found {
                    Some((_, p, _)) if !shell.contains(p, SHELL_TOL) => {
                        found = None;
                        step = 1;
                    }
                    Some(_) => {}
                    None => step *= 2,
                }
            }
        }
    }
    let (_, params, efp) = found.expect("sweep ends with a success");
    debug!("shell sweep: {calls} ellipsoid runs, {new_cuts} new cuts");
    finish(phi, shell, params, efp, Some(fail as f64 * delta), new_cuts, calls)
}

fn finish(
    phi: &[f64],
    shell: ShellSet,
    params: Vec<f64>,
    efp: EfpSolution,
    below: Option<f64>,
    new_cuts: usize,
    ellipsoid_calls: usize,
) -> Result<Projection> {
    let distance = norm2(&sub(&params, phi));
    Ok(Projection {
        shell,
        certified_below: below.unwrap_or(distance),
        params,
        efp,
        distance,
        new_cuts,
        ellipsoid_calls,
    })
}

/// One step of gradient ascent over the shell: projects `y + eta U`.
pub fn shell_gd_step(
    space: &DeviationSpace,
    shell: &ShellSet,
    y: &[f64],
    lifted: &[f64],
    eta: f64,
    settings: &ProjectSettings,
) -> Result<Projection> {
    check_dim(y.len(), lifted.len())?;
    if !(eta > 0.0) {
        return Err(Error::InvalidInput("step size must be positive".into()));
    }
    let target: Vec<f64> = y.iter().zip(lifted).map(|(a, b)| a + eta * b).collect();
    shell_project(space, shell, &target, settings)
}

/// One round of a regret ledger. Payoffs are in ambient coordinates; a
/// comparator `y` earns `<y, lifted> + offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub strategy: SparseDistribution,
    pub utility: Vec<f64>,
    pub lifted: Vec<f64>,
    pub offset: f64,
    /// `E<u, x>`.
    pub learner_payoff: f64,
    /// `E<u, phi_t(x)>` for the deviation played this round.
    pub deviation_payoff: f64,
    pub params: Vec<f64>,
    pub efp_error: f64,
    pub cuts: usize,
}

/// Append-only per-round accounting.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegretLedger {
    rounds: Vec<RoundRecord>,
}

impl RegretLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, r: RoundRecord) {
        self.rounds.push(r);
    }

    pub fn rounds(&self) -> &[RoundRecord] {
        &self.rounds
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn lifted_total(&self) -> Vec<f64> {
        self.lifted_prefix(self.len())
    }

    fn lifted_prefix(&self, t: usize) -> Vec<f64> {
        let k = self.rounds.first().map_or(0, |r| r.lifted.len());
        let mut acc = vec![0.0; k];
        for r in &self.rounds[..t] {
            for (a, b) in acc.iter_mut().zip(&r.lifted) {
                *a += b;
            }
        }
        acc
    }

    pub fn offset_total(&self) -> f64 {
        self.rounds.iter().map(|r| r.offset).sum()
    }

    pub fn learner_total(&self) -> f64 {
        self.rounds.iter().map(|r| r.learner_payoff).sum()
    }

    pub fn deviation_total(&self) -> f64 {
        self.rounds.iter().map(|r| r.deviation_payoff).sum()
    }

    /// Total payoff of the best comparator.
    pub fn best_total(&self, comparators: &Comparators) -> Result<f64> {
        Ok(comparators.best(&self.lifted_total())? + self.offset_total())
    }

    /// `max_phi sum_t E<u_t, phi(x_t) - x_t>` over the comparators.
    pub fn phi_regret(&self, comparators: &Comparators) -> Result<f64> {
        Ok(self.best_total(comparators)? - self.learner_total())
    }

    /// External regret of the played deviations against the comparators.
    pub fn external_regret(&self, comparators: &Comparators) -> Result<f64> {
        Ok(self.best_total(comparators)? - self.deviation_total())
    }

    /// `sum_t (E<u_t, phi_t(x_t)> - E<u_t, x_t>)`, the gap between the two
    /// regrets for any comparator set.
    pub fn drift(&self) -> f64 {
        self.deviation_total() - self.learner_total()
    }

    pub fn max_efp_error(&self) -> f64 {
        self.rounds.iter().map(|r| r.efp_error).fold(0.0, f64::max)
    }

    /// Per-round cumulative regrets, evaluated every `stride` rounds and at
    /// the last round.
    pub fn trajectory(&self, comparators: &Comparators, stride: usize) -> Result<Vec<TrajectoryRow>> {
        let stride = stride.max(1);
        let mut out = Vec::new();
        let k = self.rounds.first().map_or(0, |r| r.lifted.len());
        let mut lifted = vec![0.0; k];
        let (mut offset, mut learner, mut deviation) = (0.0, 0.0, 0.0);
        for (t, r) in self.rounds.iter().enumerate() {
            for (a, b) in lifted.iter_mut().zip(&r.lifted) {
                *a += b;
            }
            offset += r.offset;
            learner += r.learner_payoff;
            deviation += r.deviation_payoff;
            if (t + 1) % stride == 0 || t + 1 == self.len() {
                let best = comparators.best(&lifted)? + offset;
                out.push(TrajectoryRow {
                    round: t + 1,
                    utility: r.learner_payoff,
                    phi_regret: best - learner,
                    external_regret: best - deviation,
                    cuts: r.cuts,
                });
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub round: usize,
    pub utility: f64,
    pub phi_regret: f64,
    pub external_regret: f64,
    pub cuts: usize,
}

/// Comparator classes for regret estimates. Each maps a cumulative lifted
/// utility to the best comparator payoff.
#[derive(Clone, Debug)]
pub enum Comparators {
    Finite(Vec<Vec<f64>>),
    /// `{y : <n_i, y> <= h_i}`, assumed bounded.
    Polyhedral(Vec<Halfspace>),
    /// Column-stochastic `n x n` matrices with zero shift.
    ColumnStochastic {
        n: usize,
    },
    /// Constant maps onto the body.
    Constants(ConvexBody),
}

impl Comparators {
    pub fn best(&self, objective: &[f64]) -> Result<f64> {
        match self {
            Comparators::Finite(list) => {
                if list.is_empty() {
                    return Err(Error::InvalidInput("empty comparator list".into()));
                }
                list.iter().try_fold(f64::NEG_INFINITY, |m, y| {
                    check_dim(objective.len(), y.len())?;
                    Ok(m.max(dot(y, objective)))
                })
            }
            Comparators::Polyhedral(rows) => polyhedral_max(rows, objective),
            Comparators::ColumnStochastic { n } => {
                check_dim(n * n + n, objective.len())?;
                Ok((0..*n)
                    .map(|j| (0..*n).map(|i| objective[i * n + j]).fold(f64::NEG_INFINITY, f64::max))
                    .sum())
            }
            Comparators::Constants(body) => {
                let d = body.dim();
                check_dim(d * d + d, objective.len())?;
                let s = &objective[d * d..];
                Ok(dot(s, &body.linopt(s)?))
            }
        }
    }
}

/// `max <c, y>` over `{y : G y <= h}` through the dual
/// `min h^T pi` subject to `G^T pi = c`, `pi >= 0`.
fn polyhedral_max(rows: &[Halfspace], c: &[f64]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("empty comparator polyhedron".into()));
    }
    let mut lp = LpProblem::new(Sense::Minimize, rows.iter().map(|h| h.offset()).collect());
    for (j, cj) in c.iter().enumerate() {
        check_dim(c.len(), rows[0].dim())?;
        lp.add(rows.iter().map(|h| h.normal()[j]).collect(), Relation::Eq, *cj);
    }
    match lp_solve(&lp, LP_TOL)? {
        LpOutcome::Optimal { value, .. } => Ok(value),
        LpOutcome::Infeasible { .. } => Err(Error::NumericalBreakdown("comparator set is unbounded".into())),
        LpOutcome::Unbounded => Err(Error::NumericalBreakdown("comparator set is empty".into())),
    }
}

/// Settings of [`phi_regret_minimizer`]; `None` picks the defaults
/// `eta = D / sqrt(T k)` and `eps = 1 / (100 k T)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearnerSettings {
    pub horizon: usize,
    pub eta: Option<f64>,
    pub eps: Option<f64>,
    pub eps_prime: Option<f64>,
    pub fast_rounds: usize,
}

impl LearnerSettings {
    pub fn new(horizon: usize) -> Self {
        Self {
            horizon,
            eta: None,
            eps: None,
            eps_prime: None,
            fast_rounds: 256,
        }
    }
}

/// Gradient ascent over shell sets, playing an expected fixed point of the
/// current deviation each round.
#[derive(Clone, Debug)]
pub struct PhiRegretMinimizer {
    space: DeviationSpace,
    shell: ShellSet,
    settings: ProjectSettings,
    eta: f64,
    eps: f64,
    y: Vec<f64>,
    mu: SparseDistribution,
    efp_error: f64,
    ledger: RegretLedger,
    ellipsoid_calls: usize,
}

pub fn phi_regret_minimizer(
    body: &ConvexBody,
    features: Features,
    settings: LearnerSettings,
) -> Result<PhiRegretMinimizer> {
    if settings.horizon == 0 {
        return Err(Error::InvalidInput("horizon must be positive".into()));
    }
    let space = DeviationSpace::new(body, features)?;
    let k = space.dim();
    let big_d = space.radii().outer;
    let t = settings.horizon as f64;
    let eta = settings.eta.unwrap_or(big_d / (t * k as f64).sqrt());
    let eps = settings.eps.unwrap_or(1.0 / (100.0 * k as f64 * t));
    if !(eta > 0.0) || !(eps > 0.0) {
        return Err(Error::InvalidInput("eta and eps must be positive".into()));
    }
    let shell = ShellSet::new(k, big_d)?;
    let local_eps = eps / space.utility_scale().max(1.0);
    let mut project = ProjectSettings::new(&space, &shell, local_eps)?;
    if let Some(e) = settings.eps_prime {
        project.eps_prime = e;
    }
    project.fast_rounds = settings.fast_rounds;
    let y = space.identity()?;
    let sol = match space.test(&y, local_eps)? {
        ParamTest::Efp(sol) => sol,
        ParamTest::Cut(_) => return Err(Error::NumericalBreakdown("identity produced a witness".into())),
    };
    Ok(PhiRegretMinimizer {
        space,
        shell,
        settings: project,
        eta,
        eps,
        y,
        mu: sol.distribution,
        efp_error: sol.error,
        ledger: RegretLedger::new(),
        ellipsoid_calls: 0,
    })
}

impl PhiRegretMinimizer {
    pub fn space(&self) -> &DeviationSpace {
        &self.space
    }

    pub fn shell(&self) -> &ShellSet {
        &self.shell
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Ambient-coordinate precision of every expected fixed point.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn params(&self) -> &[f64] {
        &self.y
    }

    pub fn ledger(&self) -> &RegretLedger {
        &self.ledger
    }

    pub fn ellipsoid_calls(&self) -> usize {
        self.ellipsoid_calls
    }

    /// Rebuilds every record from its strategy, utility and parameters.
    pub fn replay(&self) -> Result<RegretLedger> {
        let mut out = RegretLedger::new();
        for r in self.ledger.rounds() {
            out.push(
                self.space
                    .record(&r.strategy, &r.utility, &r.params, r.efp_error, r.cuts)?,
            );
        }
        Ok(out)
    }

    /// `D^2 / (2 eta) + eta sum_t ||U_t||^2 + 3 eps D T`.
    pub fn gd_bound(&self) -> f64 {
        let d = self.shell.radius();
        let sq: f64 = self.ledger.rounds().iter().map(|r| dot(&r.lifted, &r.lifted)).sum();
        d * d / (2.0 * self.eta) + self.eta * sq + 3.0 * self.settings.eps * d * self.ledger.len() as f64
    }

    fn ambient_strategy(&self) -> Result<SparseDistribution> {
        self.mu.map_points(|z| self.space.frame().to_ambient(z))
    }
}

impl RegretMinimizer for PhiRegretMinimizer {
    fn dim(&self) -> usize {
        self.space.frame().ambient().dim()
    }

    fn next_strategy(&mut self) -> Result<SparseDistribution> {
        self.ambient_strategy()
    }

    fn observe(&mut self, u: &[f64]) -> Result<()> {
        check_utility(u, self.dim())?;
        let strategy = self.ambient_strategy()?;
        let record = self
            .space
            .record(&strategy, u, &self.y, self.efp_error, self.shell.cuts().len())?;
        let step = shell_gd_step(
            &self.space,
            &self.shell,
            &self.y,
            &record.lifted,
            self.eta,
            &self.settings,
        )?;
        self.ledger.push(record);
        self.ellipsoid_calls += step.ellipsoid_calls;
        self.shell = step.shell;
        self.y = step.params;
        self.mu = step.efp.distribution;
        self.efp_error = step.efp.error;
        Ok(())
    }
}

/// Affine deviation `x -> M x + s` in ambient coordinates, flattened as
/// row-major `M` followed by `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineDeviation {
    pub matrix: DenseMatrix,
    pub shift: Vec<f64>,
}

impl AffineDeviation {
    pub fn new(matrix: DenseMatrix, shift: Vec<f64>) -> Result<Self> {
        check_dim(matrix.rows(), shift.len())?;
        check_dim(matrix.rows(), matrix.cols())?;
        Ok(Self { matrix, shift })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            matrix: DenseMatrix::identity(d),
            shift: vec![0.0; d],
        }
    }

    pub fn constant(c: Vec<f64>) -> Self {
        Self {
            matrix: DenseMatrix::zeros(c.len(), c.len()),
            shift: c,
        }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = crate::numerics::matvec(&self.matrix, x)?;
        for (a, b) in y.iter_mut().zip(&self.shift) {
            *a += b;
        }
        Ok(y)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.matrix.data().iter().chain(&self.shift).copied().collect()
    }
}

/// Feedback `(E[u x^T], u)` flattened like [`AffineDeviation::to_flat`].
pub fn affine_feedback(mu: &SparseDistribution, u: &[f64]) -> Result<Vec<f64>> {
    let d = u.len();
    check_dim(d, mu.dim())?;
    let mut out = vec![0.0; d * d + d];
    for (x, w) in mu.atoms() {
        for (i, ui) in u.iter().enumerate() {
            for (j, xj) in x.iter().enumerate() {
                out[i * d + j] += w * ui * xj;
            }
        }
    }
    out[d * d..].copy_from_slice(u);
    Ok(out)
}

/// External-regret learner over a set of affine deviations.
pub trait ExternalMinimizer {
    fn dim(&self) -> usize;
    fn current(&self) -> AffineDeviation;
    /// Receives the linear utility `phi -> <phi, feedback>`.
    fn observe(&mut self, feedback: &[f64]) -> Result<()>;
}

/// The single deviation it was built with.
#[derive(Clone, Debug)]
pub struct FixedDeviation(pub AffineDeviation);

impl ExternalMinimizer for FixedDeviation {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn current(&self) -> AffineDeviation {
        self.0.clone()
    }

    fn observe(&mut self, feedback: &[f64]) -> Result<()> {
        check_dim(self.dim() * self.dim() + self.dim(), feedback.len())
    }
}

/// Projected gradient ascent over column-stochastic matrices.
#[derive(Clone, Debug)]
pub struct ColumnStochasticGd {
    q: DenseMatrix,
    eta: f64,
}

impl ColumnStochasticGd {
    /// Starts at the identity.
    pub fn new(n: usize, eta: f64) -> Result<Self> {
        if n == 0 || !(eta > 0.0) {
            return Err(Error::InvalidInput("need n >= 1 and a positive step".into()));
        }
        Ok(Self {
            q: DenseMatrix::identity(n),
            eta,
        })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.q
    }
}

impl ExternalMinimizer for ColumnStochasticGd {
    fn dim(&self) -> usize {
        self.q.rows()
    }

    fn current(&self) -> AffineDeviation {
        AffineDeviation {
            matrix: self.q.clone(),
            shift: vec![0.0; self.dim()],
        }
    }

    fn observe(&mut self, feedback: &[f64]) -> Result<()> {
        let n = self.dim();
        check_dim(n * n + n, feedback.len())?;
        for j in 0..n {
            let col: Vec<f64> = (0..n)
                .map(|i| self.q.get(i, j) + self.eta * feedback[i * n + j])
                .collect();
            for (i, v) in project_simplex(&col).into_iter().enumerate() {
                self.q.set(i, j, v);
            }
        }
        Ok(())
    }
}

/// Projected gradient ascent over constant maps `x -> c` with `c` in a box,
/// ball or probability simplex.
#[derive(Clone, Debug)]
pub struct ConstantGd {
    body: ConvexBody,
    c: Vec<f64>,
    eta: f64,
}

impl ConstantGd {
    pub fn new(body: ConvexBody, start: Vec<f64>, eta: f64) -> Result<Self> {
        check_dim(body.dim(), start.len())?;
        if !(eta > 0.0) {
            return Err(Error::InvalidInput("step size must be positive".into()));
        }
        let c = project_onto(&body, &start)?;
        Ok(Self { body, c, eta })
    }

    pub fn point(&self) -> &[f64] {
        &self.c
    }
}

impl ExternalMinimizer for ConstantGd {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn current(&self) -> AffineDeviation {
        AffineDeviation::constant(self.c.clone())
    }

    fn observe(&mut self, feedback: &[f64]) -> Result<()> {
        let d = self.dim();
        check_dim(d * d + d, feedback.len())?;
        let step: Vec<f64> = self
            .c
            .iter()
            .zip(&feedback[d * d..])
            .map(|(c, u)| c + self.eta * u)
            .collect();
        self.c = project_onto(&self.body, &step)?;
        Ok(())
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, x) in s.iter().enumerate() {
        acc += x;
        let t = (acc - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

fn project_onto(body: &ConvexBody, x: &[f64]) -> Result<Vec<f64>> {
    match body.kind() {
        BodyKind::Box { lo, hi } => Ok(x
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(v, (l, h))| v.clamp(*l, *h))
            .collect()),
        BodyKind::Ball { center, radius } => {
            let diff = sub(x, center);
            Ok(center
                .iter()
                .zip(project_ball(&diff, *radius))
                .map(|(c, v)| c + v)
                .collect())
        }
        BodyKind::Simplex { .. } => Ok(project_simplex(x)),
        _ => Err(Error::ModeUnavailable(
            "exact projection needs a box, ball or simplex".into(),
        )),
    }
}

/// Plays an expected fixed point of each deviation proposed by an external
/// minimizer.
#[derive(Clone, Debug)]
pub struct GordonLearner<E> {
    body: ConvexBody,
    external: E,
    eps: f64,
    current: Option<(AffineDeviation, EfpSolution)>,
    ledger: RegretLedger,
}

pub fn gordon_efp_wrapper<E: ExternalMinimizer>(body: ConvexBody, external: E, eps: f64) -> Result<GordonLearner<E>> {
    check_dim(body.dim(), external.dim())?;
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("eps must be positive".into()));
    }
    Ok(GordonLearner {
        body,
        external,
        eps,
        current: None,
        ledger: RegretLedger::new(),
    })
}

impl<E: ExternalMinimizer> GordonLearner<E> {
    pub fn external(&self) -> &E {
        &self.external
    }

    pub fn ledger(&self) -> &RegretLedger {
        &self.ledger
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    fn ensure_current(&mut self) -> Result<()> {
        if self.current.is_none() {
            let phi = self.external.current();
            let sol = efp_eah(&self.body, |x| phi.apply(x), self.eps)?;
            self.current = Some((phi, sol));
        }
        Ok(())
    }
}

impl<E: ExternalMinimizer> RegretMinimizer for GordonLearner<E> {
    fn dim(&self) -> usize {
        self.body.dim()
    }

    fn next_strategy(&mut self) -> Result<SparseDistribution> {
        self.ensure_current()?;
        Ok(self.current.as_ref().expect("set above").1.distribution.clone())
    }

    fn observe(&mut self, u: &[f64]) -> Result<()> {
        check_utility(u, self.dim())?;
        self.ensure_current()?;
        let (phi, sol) = self.current.take().expect("set above");
        let lifted = affine_feedback(&sol.distribution, u)?;
        let params = phi.to_flat();
        self.ledger.push(RoundRecord {
            learner_payoff: expected_payoff(&sol.distribution, u),
            deviation_payoff: dot(&params, &lifted),
            strategy: sol.distribution,
            utility: u.to_vec(),
            lifted: lifted.clone(),
            offset: 0.0,
            params,
            efp_error: sol.error,
            cuts: 0,
        });
        self.external.observe(&lifted)
    }
}

/// Source of utility vectors in `[-1, 1]^d`.
pub trait Adversary {
    fn dim(&self) -> usize;
    fn utility(&mut self, round: usize, strategy: &SparseDistribution) -> Result<Vec<f64>>;
}

#[derive(Clone, Debug)]
pub struct ConstantAdversary(pub Vec<f64>);

impl Adversary for ConstantAdversary {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn utility(&mut self, _: usize, _: &SparseDistribution) -> Result<Vec<f64>> {
        check_utility(&self.0, self.0.len())?;
        Ok(self.0.clone())
    }
}

/// `u_j(t) = sin(2 pi (t / period + j / d))`.
#[derive(Clone, Debug)]
pub struct SinusoidalAdversary {
    pub d: usize,
    pub period: f64,
}

impl Adversary for SinusoidalAdversary {
    fn dim(&self) -> usize {
        self.d
    }

    fn utility(&mut self, round: usize, _: &SparseDistribution) -> Result<Vec<f64>> {
        if !(self.period > 0.0) {
            return Err(Error::InvalidInput("period must be positive".into()));
        }
        let tau = 2.0 * std::f64::consts::PI;
        Ok((0..self.d)
            .map(|j| (tau * (round as f64 / self.period + j as f64 / self.d as f64)).sin())
            .collect())
    }
}

/// Independent uniform draws from `[-1, 1]^d`.
#[derive(Clone, Debug)]
pub struct RandomAdversary {
    d: usize,
    rng: ChaCha8Rng,
}

impl RandomAdversary {
    pub fn new(d: usize, seed: u64) -> Self {
        Self {
            d,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Adversary for RandomAdversary {
    fn dim(&self) -> usize {
        self.d
    }

    fn utility(&mut self, _: usize, _: &SparseDistribution) -> Result<Vec<f64>> {
        Ok((0..self.d).map(|_| self.rng.random_range(-1.0..=1.0)).collect())
    }
}

/// Opponent in the zero-sum game `x^T A z`: best-responds to the learner's
/// mean with `z` minimizing `E[x]^T A z`, then hands out `u = A z`.
#[derive(Clone, Debug)]
pub struct BestResponseAdversary {
    pub a: DenseMatrix,
    pub opponent: ConvexBody,
}

impl BestResponseAdversary {
    pub fn new(a: DenseMatrix, opponent: ConvexBody) -> Result<Self> {
        check_dim(a.cols(), opponent.dim())?;
        Ok(Self { a, opponent })
    }
}

impl Adversary for BestResponseAdversary {
    fn dim(&self) -> usize {
        self.a.rows()
    }

    fn utility(&mut self, _: usize, strategy: &SparseDistribution) -> Result<Vec<f64>> {
        let g = crate::numerics::matvec_t(&self.a, &strategy.mean())?;
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let z = self.opponent.linopt(&neg)?;
        let u = crate::numerics::matvec(&self.a, &z)?;
        check_utility(&u, self.dim())?;
        Ok(u)
    }
}

/// Runs `rounds` rounds of a learner against an adversary.
pub fn play<L: RegretMinimizer + ?Sized, A: Adversary + ?Sized>(
    learner: &mut L,
    adversary: &mut A,
    rounds: usize,
) -> Result<()> {
    check_dim(learner.dim(), adversary.dim())?;
    for t in 0..rounds {
        let mu = learner.next_strategy()?;
        let u = adversary.utility(t, &mu)?;
        learner.observe(&u)?;
    }
    Ok(())
}
