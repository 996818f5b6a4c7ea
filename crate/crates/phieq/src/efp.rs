//! Ellipsoid against hope, expected fixed points and semi-separation.

use std::collections::{BTreeMap, HashMap};

use log::debug;

use crate::ellipsoid::{cut_cap, log_ball_volume, EllipsoidState};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{ConvexBody, Halfspace, SparseDistribution, DEFAULT_TOL};
use crate::numerics::{bits_key, dot, lp_solve, norm1, norm2, LpProblem, Relation, Sense};

const LP_TOL: f64 = 1e-11;
const KELLEY_ROUNDS: usize = 200;
const PROBE_ROUNDS: usize = 8;

/// Answer of a good-enough-response-or-separation oracle at a query `y`.
///
/// A good-enough response carries the affine payoff `y' -> <normal, y'> +
/// offset` it induces, which must be at least `-eps` at the query.
#[derive(Clone, Debug)]
pub enum Answer<P, S> {
    Good {
        payload: P,
        normal: Vec<f64>,
        offset: f64,
    },
    Sep(Halfspace),
    /// Abort the run and hand `S` back to the caller.
    Stop(S),
}

/// Set over which the final certificate must hold.
#[derive(Clone, Debug, PartialEq)]
pub enum CertDomain {
    /// `[-w, w]^k`.
    Box { half_width: f64 },
    /// `B_R(0)` intersected with the recorded separating halfspaces.
    Ball { radius: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EahSettings {
    /// Radius of the initial ball.
    pub radius: f64,
    pub eps: f64,
    /// Bound on the norm of any response column.
    pub bound: f64,
    pub domain: CertDomain,
    pub cap: usize,
}

impl EahSettings {
    pub fn new(k: usize, radius: f64, eps: f64, bound: f64, domain: CertDomain) -> Result<Self> {
        if !(radius > 0.0 && eps > 0.0 && bound > 0.0) || k == 0 {
            return Err(Error::InvalidInput("radius, eps and bound must be positive".into()));
        }
        Ok(Self {
            radius,
            eps,
            bound,
            domain,
            cap: cut_cap(k, radius, bound, eps),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutKind {
    Ger,
    Sep,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutRecord {
    pub kind: CutKind,
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// Every cut taken by a run, in order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CutLog {
    pub cuts: Vec<CutRecord>,
}

impl CutLog {
    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn ger_count(&self) -> usize {
        self.cuts.iter().filter(|c| c.kind == CutKind::Ger).count()
    }

    pub fn sep_count(&self) -> usize {
        self.cuts.iter().filter(|c| c.kind == CutKind::Sep).count()
    }

    pub fn separations(&self) -> Vec<Halfspace> {
        self.cuts
            .iter()
            .filter(|c| c.kind == CutKind::Sep)
            .filter_map(|c| Halfspace::new(c.normal.clone(), c.offset).ok())
            .collect()
    }
}

/// Convex combination of good-enough responses whose payoff is at least
/// `value >= -eps` everywhere on the certificate domain.
#[derive(Clone, Debug)]
pub struct Certificate<P> {
    pub payloads: Vec<P>,
    pub weights: Vec<f64>,
    /// `(normal, offset)` of each payload.
    pub columns: Vec<(Vec<f64>, f64)>,
    pub value: f64,
    pub log: CutLog,
}

impl<P> Certificate<P> {
    /// Combined payoff `y -> sum_t w_t (<a_t, y> + b_t)`.
    pub fn payoff(&self, y: &[f64]) -> f64 {
        self.columns
            .iter()
            .zip(&self.weights)
            .map(|((a, b), w)| w * (dot(a, y) + b))
            .sum()
    }
}

#[derive(Clone, Debug)]
pub enum EahOutcome<P, S> {
    Certified(Certificate<P>),
    Stopped { stop: S, log: CutLog },
}

/// Runs the ellipsoid method against a good-enough-response-or-separation
/// oracle in `R^k` and extracts a mixture of responses by linear
/// programming once the ellipsoid is smaller than `B_{eps/2B}`.
pub fn eah_run<P: Clone, S, F>(k: usize, settings: &EahSettings, mut oracle: F) -> Result<EahOutcome<P, S>>
where
    F: FnMut(&[f64]) -> Result<Answer<P, S>>,
{
    let eps = settings.eps;
    let mut ell = EllipsoidState::init_ball(k, settings.radius)?;
    let mut log_vol = ell.log_volume()?;
    let ratio = crate::ellipsoid::log_volume_ratio(k);
    let mut target = log_ball_volume(k, eps / (2.0 * settings.bound));
    let mut log = CutLog::default();
    let mut payloads: Vec<P> = Vec::new();
    let mut columns: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut seen: BTreeMap<(Vec<u64>, u64), usize> = BTreeMap::new();
    let mut last_value = f64::NEG_INFINITY;
    loop {
        let mut stalled = None;
        while log_vol >= target && log.len() < settings.cap {
            let y = ell.center().to_vec();
            let normal = match oracle(&y)? {
                Answer::Stop(stop) => return Ok(EahOutcome::Stopped { stop, log }),
                Answer::Sep(h) => {
                    log.cuts.push(CutRecord {
                        kind: CutKind::Sep,
                        normal: h.normal().to_vec(),
                        offset: h.offset(),
                    });
                    h.normal().to_vec()
                }
                Answer::Good {
                    payload,
                    normal,
                    offset,
                } => {
                    check_dim(k, normal.len())?;
                    if normal.iter().all(|v| *v == 0.0) && offset >= -eps {
                        log.cuts.push(CutRecord {
                            kind: CutKind::Ger,
                            normal: normal.clone(),
                            offset,
                        });
                        return Ok(EahOutcome::Certified(Certificate {
                            payloads: vec![payload],
                            weights: vec![1.0],
                            columns: vec![(normal, offset)],
                            value: offset,
                            log,
                        }));
                    }
                    log.cuts.push(CutRecord {
                        kind: CutKind::Ger,
                        normal: normal.clone(),
                        offset,
                    });
                    let key = (bits_key(&normal), offset.to_bits());
                    if !seen.contains_key(&key) {
                        seen.insert(key, columns.len());
                        columns.push((normal.clone(), offset));
                        payloads.push(payload);
                    }
                    normal
                }
            };
            match ell.central_cut(&normal) {
                Ok(next) => {
                    ell = next;
                    log_vol += ratio;
                }
                Err(e @ (Error::DegenerateCut(_) | Error::NotPositiveDefinite)) => {
                    stalled = Some(e);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        let mut probes = 0;
        while !columns.is_empty() {
            let seps = log.separations();
            let (weights, value, worst) = certify(&columns, &seps, &settings.domain, k, eps)?;
            debug!("certificate after {} cuts: value {value:e}", log.len());
            if value >= -eps {
                let mut kept_payloads = Vec::new();
                let mut kept_columns = Vec::new();
                let mut kept_weights = Vec::new();
                for (i, w) in weights.iter().enumerate() {
                    if *w > 0.0 {
                        kept_payloads.push(payloads[i].clone());
                        kept_columns.push(columns[i].clone());
                        kept_weights.push(*w);
                    }
                }
                return Ok(EahOutcome::Certified(Certificate {
                    payloads: kept_payloads,
                    weights: kept_weights,
                    columns: kept_columns,
                    value,
                    log,
                }));
            }
            last_value = value;
            if probes >= PROBE_ROUNDS * k || log.len() >= settings.cap {
                break;
            }
            probes += 1;
            match oracle(&worst)? {
                Answer::Stop(stop) => return Ok(EahOutcome::Stopped { stop, log }),
                Answer::Sep(h) => log.cuts.push(CutRecord {
                    kind: CutKind::Sep,
                    normal: h.normal().to_vec(),
                    offset: h.offset(),
                }),
                Answer::Good {
                    payload,
                    normal,
                    offset,
                } => {
                    check_dim(k, normal.len())?;
                    log.cuts.push(CutRecord {
                        kind: CutKind::Ger,
                        normal: normal.clone(),
                        offset,
                    });
                    let key = (bits_key(&normal), offset.to_bits());
                    if !seen.contains_key(&key) {
                        seen.insert(key, columns.len());
                        columns.push((normal, offset));
                        payloads.push(payload);
                    }
                }
            }
        }
        if let Some(e) = stalled {
            return Err(e);
        }
        if log.len() >= settings.cap {
            if columns.is_empty() {
                return Err(Error::IterationCapExceeded(settings.cap));
            }
            return Err(Error::CertificateInfeasible { value: last_value, eps });
        }
        target -= k as f64 * 4f64.ln();
    }
}

/// Best mixture of `columns` and its guaranteed worst-case payoff over the
/// domain, both recomputed after solving.
fn certify(
    columns: &[(Vec<f64>, f64)],
    seps: &[Halfspace],
    domain: &CertDomain,
    k: usize,
    eps: f64,
) -> Result<(Vec<f64>, f64, Vec<f64>)> {
    match domain {
        CertDomain::Box { half_width } => {
            let rows = box_rows(k, *half_width);
            let lambda = certificate_lp(columns, &rows, k)?;
            let (v, beta) = combine(columns, &lambda);
            let worst = v
                .iter()
                .map(|t| if *t > 0.0 { -half_width } else { *half_width })
                .collect();
            Ok((lambda, beta - half_width * norm1(&v), worst))
        }
        CertDomain::Ball { radius } => {
            let mut rows = box_rows(k, *radius);
            rows.extend(seps.iter().map(|h| (h.normal().to_vec(), h.offset())));
            let mut best: Option<(Vec<f64>, f64, Vec<f64>)> = None;
            for _ in 0..KELLEY_ROUNDS {
                let lambda = certificate_lp(columns, &rows, k)?;
                let (v, beta) = combine(columns, &lambda);
                let y = polytope_argmin(&v, &rows, *radius)?;
                let value = beta + dot(&v, &y);
                if best.as_ref().is_none_or(|b| value > b.1) {
                    best = Some((lambda, value, y.clone()));
                }
                let n = norm2(&y);
                if value >= -eps || n <= radius * (1.0 + 1e-9) {
                    break;
                }
                rows.push((y.iter().map(|t| t / n).collect(), *radius));
            }
            Ok(best.expect("at least one round"))
        }
    }
}

fn box_rows(k: usize, w: f64) -> Vec<(Vec<f64>, f64)> {
    let mut rows = Vec::with_capacity(2 * k);
    for j in 0..k {
        for s in [1.0, -1.0] {
            let mut r = vec![0.0; k];
            r[j] = s;
            rows.push((r, w));
        }
    }
    rows
}

fn combine(columns: &[(Vec<f64>, f64)], lambda: &[f64]) -> (Vec<f64>, f64) {
    let k = columns[0].0.len();
    let mut v = vec![0.0; k];
    let mut beta = 0.0;
    for ((a, b), l) in columns.iter().zip(lambda) {
        if *l == 0.0 {
            continue;
        }
        for (vi, ai) in v.iter_mut().zip(a) {
            *vi += l * ai;
        }
        beta += l * b;
    }
    (v, beta)
}

/// Maximizes `sum_t b_t l_t - h^T pi` subject to `sum_t a_t l_t + H^T pi = 0`,
/// `l` in the simplex and `pi >= 0`; returns the normalized `l`.
fn certificate_lp(columns: &[(Vec<f64>, f64)], rows: &[(Vec<f64>, f64)], k: usize) -> Result<Vec<f64>> {
    let t = columns.len();
    let m = rows.len();
    let mut obj: Vec<f64> = columns.iter().map(|c| c.1).collect();
    obj.extend(rows.iter().map(|r| -r.1));
    let mut lp = LpProblem::new(Sense::Maximize, obj);
    for j in 0..k {
        let mut coeffs = Vec::with_capacity(t + m);
        coeffs.extend(columns.iter().map(|c| c.0[j]));
        coeffs.extend(rows.iter().map(|r| r.0[j]));
        lp.add(coeffs, Relation::Eq, 0.0);
    }
    let mut simplex = vec![1.0; t];
    simplex.extend(std::iter::repeat_n(0.0, m));
    lp.add(simplex, Relation::Eq, 1.0);
    let (x, _) = lp_solve(&lp, LP_TOL)?
        .optimal()
        .ok_or_else(|| Error::NumericalBreakdown("certificate program has no optimum".into()))?;
    let mut lambda: Vec<f64> = x[..t].iter().map(|v| v.max(0.0)).collect();
    let s: f64 = lambda.iter().sum();
    if !(s > 0.0) {
        return Err(Error::NumericalBreakdown("certificate weights vanish".into()));
    }
    for l in &mut lambda {
        *l /= s;
    }
    Ok(lambda)
}

/// `argmin <v, y>` over `{y : <n_i, y> <= h_i}`, a polytope inside the box
/// `[-w, w]^k`. Rows enter lazily, most violated first.
fn polytope_argmin(v: &[f64], rows: &[(Vec<f64>, f64)], w: f64) -> Result<Vec<f64>> {
    let k = v.len();
    let mut active: Vec<usize> = Vec::new();
    let mut in_active = vec![false; rows.len()];
    loop {
        let mut lp = LpProblem::new(Sense::Minimize, v.to_vec());
        for j in 0..k {
            lp.upper_bound(j, 2.0 * w);
        }
        for &i in &active {
            let (n, h) = &rows[i];
            let shift: f64 = n.iter().sum::<f64>() * w;
            lp.add(n.clone(), Relation::Le, h + shift);
        }
        let (z, _) = lp_solve(&lp, LP_TOL)?
            .optimal()
            .ok_or_else(|| Error::NumericalBreakdown("certificate domain is empty".into()))?;
        let y: Vec<f64> = (0..k).map(|j| z[j] - w).collect();
        let mut violated: Vec<(f64, usize)> = rows
            .iter()
            .enumerate()
            .filter(|(i, _)| !in_active[*i])
            .filter_map(|(i, (n, h))| {
                let excess = dot(n, &y) - h;
                (excess > LP_TOL * (1.0 + h.abs())).then_some((excess, i))
            })
            .collect();
        if violated.is_empty() {
            return Ok(y);
        }
        violated.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, i) in violated.iter().take(k.max(8)) {
            in_active[i] = true;
            active.push(i);
        }
    }
}

/// Vector-valued payoff `G` with a norm bound.
pub struct GFunction<'a> {
    eval: Box<dyn Fn(&[f64]) -> Result<Vec<f64>> + 'a>,
    bound: f64,
}

impl<'a> GFunction<'a> {
    pub fn new<F: Fn(&[f64]) -> Result<Vec<f64>> + 'a>(eval: F, bound: f64) -> Self {
        Self {
            eval: Box::new(eval),
            bound,
        }
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Evaluates `G(x)` and checks `||G(x)|| <= B`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let g = (self.eval)(x)?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBreakdown("G returned a non-finite value".into()));
        }
        let n = norm2(&g);
        if n > self.bound * (1.0 + 1e-9) {
            return Err(Error::InvalidInput(format!(
                "||G(x)|| = {n} exceeds bound {}",
                self.bound
            )));
        }
        Ok(g)
    }
}

/// Response of a classic oracle for the payoff `<y, G(x)>`.
#[derive(Clone, Debug)]
pub enum GerOrSep {
    GoodEnough(SparseDistribution),
    Separation(Halfspace),
}

/// Finds `mu` with `E_mu <y, G(x)> >= -eps` for every `y` in the domain,
/// where `G` maps into `R^k`.
pub fn eah_solve<F>(
    g: &GFunction,
    k: usize,
    mut oracle: F,
    domain: CertDomain,
    radius: f64,
    eps: f64,
) -> Result<(SparseDistribution, CutLog)>
where
    F: FnMut(&[f64]) -> Result<GerOrSep>,
{
    let settings = EahSettings::new(k, radius, eps, g.bound, domain)?;
    let outcome = eah_run(
        k,
        &settings,
        |y: &[f64]| -> Result<Answer<SparseDistribution, std::convert::Infallible>> {
            match oracle(y)? {
                GerOrSep::Separation(h) => Ok(Answer::Sep(h)),
                GerOrSep::GoodEnough(mu) => {
                    let mut normal = vec![0.0; k];
                    for (x, w) in mu.atoms() {
                        let gx = g.eval(x)?;
                        check_dim(k, gx.len())?;
                        for (n, v) in normal.iter_mut().zip(&gx) {
                            *n += w * v;
                        }
                    }
                    Ok(Answer::Good {
                        payload: mu,
                        normal,
                        offset: 0.0,
                    })
                }
            }
        },
    )?;
    match outcome {
        EahOutcome::Certified(cert) => {
            let mu = SparseDistribution::mixture(&cert.payloads, &cert.weights)?.merged();
            Ok((mu, cert.log))
        }
        EahOutcome::Stopped { stop, .. } => match stop {},
    }
}

/// Outcome of semi-separation.
#[derive(Clone, Debug)]
pub enum SemiSepResult {
    Efp(EfpSolution),
    /// A member `x` whose image leaves the body.
    Witness {
        x: Vec<f64>,
        image: Vec<f64>,
    },
}

#[derive(Clone, Debug)]
pub struct EfpSolution {
    pub distribution: SparseDistribution,
    /// `||E[phi(x) - x]||_1`, recomputed from the atoms.
    pub error: f64,
    pub cuts: usize,
    pub ger_cuts: usize,
}

/// `||sum_i w_i (phi(x_i) - x_i)||_1`.
pub fn efp_error<F: FnMut(&[f64]) -> Result<Vec<f64>>>(mu: &SparseDistribution, mut phi: F) -> Result<f64> {
    let mut acc = vec![0.0; mu.dim()];
    for (x, w) in mu.atoms() {
        let y = phi(x)?;
        check_dim(x.len(), y.len())?;
        for j in 0..acc.len() {
            acc[j] += w * (y[j] - x[j]);
        }
    }
    Ok(norm1(&acc))
}

/// Memoized map evaluation keyed by exact input bits.
struct Memo<F> {
    phi: F,
    cache: HashMap<Vec<u64>, Vec<f64>>,
}

impl<F: FnMut(&[f64]) -> Result<Vec<f64>>> Memo<F> {
    fn eval(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let key = bits_key(x);
        if let Some(v) = self.cache.get(&key) {
            return Ok(v.clone());
        }
        let v = (self.phi)(x)?;
        check_dim(x.len(), v.len())?;
        self.cache.insert(key, v.clone());
        Ok(v)
    }
}

/// Returns an `eps`-expected fixed point of `phi` over `body`, or a member
/// whose image leaves the body.
pub fn semi_separate<F>(body: &ConvexBody, phi: F, eps: f64) -> Result<SemiSepResult>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let d = body.dim();
    let big_r = body.bounds().outer_radius;
    let settings = EahSettings::new(
        d,
        (d as f64).sqrt(),
        eps,
        2.0 * big_r,
        CertDomain::Box { half_width: 1.0 },
    )?;
    let mut memo = Memo {
        phi,
        cache: HashMap::new(),
    };
    let outcome = eah_run(
        d,
        &settings,
        |y: &[f64]| -> Result<Answer<Vec<f64>, (Vec<f64>, Vec<f64>)>> {
            if let Some(j) = (0..d).max_by(|&a, &b| y[a].abs().total_cmp(&y[b].abs())) {
                if y[j].abs() > 1.0 {
                    let mut n = vec![0.0; d];
                    n[j] = y[j].signum();
                    return Ok(Answer::Sep(Halfspace::new(n, 1.0)?));
                }
            }
            let neg: Vec<f64> = if y.iter().all(|v| *v == 0.0) {
                vec![-1.0; d]
            } else {
                y.iter().map(|v| -v).collect()
            };
            let x = body.linopt(&neg)?;
            let image = memo.eval(&x)?;
            if !body.membership(&image, DEFAULT_TOL)? {
                return Ok(Answer::Stop((x, image)));
            }
            let normal = image.iter().zip(&x).map(|(a, b)| a - b).collect();
            Ok(Answer::Good {
                payload: x,
                normal,
                offset: 0.0,
            })
        },
    )?;
    match outcome {
        EahOutcome::Stopped { stop: (x, image), .. } => Ok(SemiSepResult::Witness { x, image }),
        EahOutcome::Certified(cert) => {
            let distribution = SparseDistribution::new(cert.payloads.clone(), cert.weights.clone())?.merged();
            let error = efp_error(&distribution, |x| memo.eval(x))?;
            Ok(SemiSepResult::Efp(EfpSolution {
                distribution,
                error,
                cuts: cert.log.len(),
                ger_cuts: cert.log.ger_count(),
            }))
        }
    }
}

/// `eps`-expected fixed point of an endomorphism by the ellipsoid method.
pub fn efp_eah<F>(body: &ConvexBody, phi: F, eps: f64) -> Result<EfpSolution>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    match semi_separate(body, phi, eps)? {
        SemiSepResult::Efp(sol) => Ok(sol),
        SemiSepResult::Witness { x, image } => Err(Error::NotEndomorphism { x, image }),
    }
}

/// Number of iterates `ceil(2 R d / eps)` used by [`efp_iterative`].
pub fn iterative_steps(body: &ConvexBody, eps: f64) -> usize {
    (2.0 * body.bounds().outer_radius * body.dim() as f64 / eps).ceil() as usize
}

/// Uniform distribution over `x0, phi(x0), ..., phi^{T-1}(x0)` with
/// `T = ceil(2 R d / eps)`.
pub fn efp_iterative<F>(body: &ConvexBody, phi: F, eps: f64, x0: &[f64]) -> Result<SparseDistribution>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("eps must be positive".into()));
    }
    efp_iterative_steps(body, phi, x0, iterative_steps(body, eps))
}

/// Uniform distribution over the first `steps` iterates from `x0`, with
/// repeated points merged.
pub fn efp_iterative_steps<F>(body: &ConvexBody, mut phi: F, x0: &[f64], steps: usize) -> Result<SparseDistribution>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    check_dim(body.dim(), x0.len())?;
    if steps == 0 {
        return Err(Error::InvalidInput("need at least one step".into()));
    }
    if !body.membership(x0, DEFAULT_TOL)? {
        return Err(Error::InvalidInput("starting point is not a member".into()));
    }
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut x = x0.to_vec();
    for t in 0..steps {
        match index.get(&bits_key(&x)) {
            Some(&i) => counts[i] += 1,
            None => {
                index.insert(bits_key(&x), points.len());
                points.push(x.clone());
                counts.push(1);
            }
        }
        if t + 1 == steps {
            break;
        }
        let y = phi(&x)?;
        check_dim(x.len(), y.len())?;
        if !body.membership(&y, DEFAULT_TOL)? {
            return Err(Error::NotEndomorphism { x, image: y });
        }
        x = y;
    }
    let weights = counts.iter().map(|c| *c as f64 / steps as f64).collect();
    SparseDistribution::new(points, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negation_on_interval() {
        let body = ConvexBody::cube(1, 1.0);
        let sol = efp_eah(&body, |x| Ok(vec![-x[0]]), 1e-6).unwrap();
        assert!(sol.error <= 1e-6);
        assert!(sol.distribution.mean()[0].abs() <= 5e-7);
    }

    #[test]
    fn identity_stops_at_first_query() {
        let body = ConvexBody::cube(3, 1.0);
        let sol = efp_eah(&body, |x| Ok(x.to_vec()), 1e-6).unwrap();
        assert_eq!(sol.cuts, 1);
        assert_eq!(sol.error, 0.0);
    }

    #[test]
    fn constant_map_mean_matches() {
        let body = ConvexBody::unit_ball(2);
        let c = vec![0.3, -0.2];
        let sol = efp_eah(&body, |_| Ok(c.clone()), 1e-6).unwrap();
        let m = sol.distribution.mean();
        assert!((m[0] - c[0]).abs() + (m[1] - c[1]).abs() <= 1e-6);
    }

    #[test]
    fn doubling_gives_witness() {
        let body = ConvexBody::unit_ball(2);
        match semi_separate(&body, |x| Ok(x.iter().map(|v| 2.0 * v).collect()), 1e-6).unwrap() {
            SemiSepResult::Witness { x, image } => {
                assert!(body.membership(&x, 1e-9).unwrap());
                assert!(!body.membership(&image, 1e-9).unwrap());
            }
            SemiSepResult::Efp(_) => panic!("expected a witness"),
        }
    }

    #[test]
    fn iterative_two_step_negation() {
        let body = ConvexBody::cube(1, 1.0);
        let mu = efp_iterative_steps(&body, |x| Ok(vec![-x[0]]), &[1.0], 2).unwrap();
        assert_eq!(mu.points(), &[vec![1.0], vec![-1.0]]);
        assert_eq!(efp_error(&mu, |x| Ok(vec![-x[0]])).unwrap(), 0.0);
    }
}
