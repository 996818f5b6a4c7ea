use rand::Rng;
use rand_distr::StandardNormal;

use super::{AffineMap, BallBounds, Halfspace};
use crate::error::{check_dim, Error, Result};
use crate::numerics::{
    dot, lp_solve, matvec, matvec_t, norm2, sub, DenseMatrix, LpOutcome, LpProblem, Relation, Sense,
};

#[derive(Clone, Debug, PartialEq)]
pub enum BodyKind {
    /// `{x : A x <= b}`.
    HPolytope {
        a: DenseMatrix,
        b: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// Probability simplex `{x >= 0, sum x = 1}` in `R^dim`.
    Simplex {
        dim: usize,
    },
    /// `{A x + b : x in inner}`.
    Affine {
        map: AffineMap,
        inner: Box<ConvexBody>,
    },
    Product {
        parts: Vec<ConvexBody>,
    },
}

/// Convex compact body with certified radii and native oracles.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexBody {
    dim: usize,
    bounds: BallBounds,
    kind: BodyKind,
}

const LP_TOL: f64 = 1e-10;

impl ConvexBody {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || !(radius > 0.0) {
            return Err(Error::InvalidInput("ball needs a center and a positive radius".into()));
        }
        let bounds = BallBounds::new(radius, center.clone(), norm2(&center) + radius)?;
        Ok(Self {
            dim: center.len(),
            bounds,
            kind: BodyKind::Ball { center, radius },
        })
    }

    pub fn unit_ball(d: usize) -> Self {
        Self::ball(vec![0.0; d], 1.0).expect("unit ball is valid")
    }

    pub fn box_body(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() || lo.iter().zip(&hi).any(|(l, h)| !(h > l)) {
            return Err(Error::InvalidInput("box needs lo < hi in every coordinate".into()));
        }
        let center: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect();
        let r = lo.iter().zip(&hi).fold(f64::INFINITY, |m, (l, h)| m.min(0.5 * (h - l)));
        let far: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| l.abs().max(h.abs())).collect();
        let bounds = BallBounds::new(r, center, norm2(&far))?;
        Ok(Self {
            dim: lo.len(),
            bounds,
            kind: BodyKind::Box { lo, hi },
        })
    }

    pub fn cube(d: usize, half_width: f64) -> Self {
        Self::box_body(vec![-half_width; d], vec![half_width; d]).expect("cube is valid")
    }

    /// Probability simplex in `R^n`, `n >= 2`.
    pub fn simplex(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput("simplex needs at least two vertices".into()));
        }
        let nf = n as f64;
        let bounds = BallBounds::new(1.0 / (nf * (nf - 1.0)).sqrt(), vec![1.0 / nf; n], 1.0)?;
        Ok(Self {
            dim: n,
            bounds,
            kind: BodyKind::Simplex { dim: n },
        })
    }

    /// Full-dimensional simplex `{z >= 0, sum z <= 1}` in `R^m`.
    pub fn corner_simplex(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("corner simplex needs m >= 1".into()));
        }
        let mut rows = Vec::with_capacity(m + 1);
        let mut b = Vec::with_capacity(m + 1);
        for j in 0..m {
            let mut r = vec![0.0; m];
            r[j] = -1.0;
            rows.push(r);
            b.push(0.0);
        }
        rows.push(vec![1.0; m]);
        b.push(1.0);
        let mf = m as f64;
        let rho = 1.0 / (mf + mf.sqrt());
        let bounds = BallBounds::new(rho, vec![rho; m], 1.0)?;
        Self::hpolytope_with_bounds(DenseMatrix::from_rows(&rows)?, b, bounds)
    }

    pub fn hpolytope_with_bounds(a: DenseMatrix, b: Vec<f64>, bounds: BallBounds) -> Result<Self> {
        check_dim(a.rows(), b.len())?;
        check_dim(a.cols(), bounds.inner_center.len())?;
        for i in 0..a.rows() {
            if norm2(a.row(i)) == 0.0 {
                return Err(Error::InvalidInput("polytope rows must be nonzero".into()));
            }
        }
        Ok(Self {
            dim: a.cols(),
            bounds,
            kind: BodyKind::HPolytope { a, b },
        })
    }

    /// H-polytope with radii derived by linear programming: the Chebyshev
    /// ball gives the inner radius and the coordinate extremes give `R`.
    pub fn hpolytope(a: DenseMatrix, b: Vec<f64>) -> Result<Self> {
        check_dim(a.rows(), b.len())?;
        let d = a.cols();
        let m = a.rows();
        let mut obj = vec![0.0; 2 * d + 1];
        obj[2 * d] = 1.0;
        let mut lp = LpProblem::new(Sense::Maximize, obj);
        for i in 0..m {
            let row = a.row(i);
            let mut coeffs: Vec<f64> = row
                .iter()
                .chain(row.iter().map(|v| -v).collect::<Vec<_>>().iter())
                .copied()
                .collect();
            coeffs.push(norm2(row));
            lp.add(coeffs, Relation::Le, b[i]);
        }
        let (sol, r) = lp_solve(&lp, LP_TOL)?
            .optimal()
            .ok_or_else(|| Error::InvalidInput("polytope is empty or unbounded".into()))?;
        if !(r > 0.0) {
            return Err(Error::InvalidInput("polytope has empty interior".into()));
        }
        let center: Vec<f64> = (0..d).map(|j| sol[j] - sol[d + j]).collect();
        let provisional = Self {
            dim: d,
            bounds: BallBounds::new(r, center.clone(), f64::MAX)?,
            kind: BodyKind::HPolytope { a, b },
        };
        let mut far = vec![0.0; d];
        for j in 0..d {
            for s in [1.0, -1.0] {
                let mut u = vec![0.0; d];
                u[j] = s;
                let x = provisional.linopt(&u)?;
                far[j] = f64::max(far[j], x[j].abs());
            }
        }
        let bounds = BallBounds::new(r, center, norm2(&far))?;
        Ok(Self { bounds, ..provisional })
    }

    /// Image of `inner` under `map`, with radii transported by norm bounds.
    pub fn affine_image(map: AffineMap, inner: ConvexBody) -> Result<Self> {
        check_dim(inner.dim, map.dim())?;
        let a_norm = crate::numerics::frobenius(map.matrix());
        let inv_norm = crate::numerics::frobenius(map.inverse_matrix());
        let center = map.apply(&inner.bounds.inner_center)?;
        let r = inner.bounds.inner_radius / inv_norm;
        let big_r = a_norm * inner.bounds.outer_radius + norm2(map.shift());
        let bounds = BallBounds::new(r, center, big_r.max(r))?;
        Self::affine_image_with_bounds(map, inner, bounds)
    }

    pub fn affine_image_with_bounds(map: AffineMap, inner: ConvexBody, bounds: BallBounds) -> Result<Self> {
        check_dim(inner.dim, map.dim())?;
        Ok(Self {
            dim: map.dim(),
            bounds,
            kind: BodyKind::Affine {
                map,
                inner: Box::new(inner),
            },
        })
    }

    pub fn product(parts: Vec<ConvexBody>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidInput("product needs at least one part".into()));
        }
        let dim = parts.iter().map(|p| p.dim).sum();
        let r = parts.iter().fold(f64::INFINITY, |m, p| m.min(p.bounds.inner_radius));
        let big_r = parts
            .iter()
            .map(|p| p.bounds.outer_radius * p.bounds.outer_radius)
            .sum::<f64>()
            .sqrt();
        let center = parts.iter().flat_map(|p| p.bounds.inner_center.clone()).collect();
        let bounds = BallBounds::new(r, center, big_r)?;
        Ok(Self {
            dim,
            bounds,
            kind: BodyKind::Product { parts },
        })
    }

    /// The body shifted by `v`, keeping closed-form radii where possible.
    pub fn translated(&self, v: &[f64]) -> Result<Self> {
        check_dim(self.dim, v.len())?;
        let shift = |x: &[f64]| -> Vec<f64> { x.iter().zip(v).map(|(a, b)| a + b).collect() };
        match &self.kind {
            BodyKind::Ball { center, radius } => Self::ball(shift(center), *radius),
            BodyKind::Box { lo, hi } => Self::box_body(shift(lo), shift(hi)),
            BodyKind::HPolytope { a, b } => {
                let nb = (0..a.rows()).map(|i| b[i] + dot(a.row(i), v)).collect();
                let center = shift(&self.bounds.inner_center);
                let bounds = BallBounds::new(self.bounds.inner_radius, center, self.bounds.outer_radius + norm2(v))?;
                Self::hpolytope_with_bounds(a.clone(), nb, bounds)
            }
            BodyKind::Product { parts } => {
                let mut off = 0;
                let mut moved = Vec::with_capacity(parts.len());
                for p in parts {
                    moved.push(p.translated(&v[off..off + p.dim])?);
                    off += p.dim;
                }
                Self::product(moved)
            }
            _ => {
                let map = AffineMap::new(DenseMatrix::identity(self.dim), v.to_vec())?;
                let bounds = BallBounds::new(
                    self.bounds.inner_radius,
                    shift(&self.bounds.inner_center),
                    self.bounds.outer_radius + norm2(v),
                )?;
                Self::affine_image_with_bounds(map, self.clone(), bounds)
            }
        }
    }

    pub fn with_bounds(mut self, bounds: BallBounds) -> Result<Self> {
        check_dim(self.dim, bounds.inner_center.len())?;
        self.bounds = bounds;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self) -> &BallBounds {
        &self.bounds
    }

    pub fn kind(&self) -> &BodyKind {
        &self.kind
    }

    /// Whether `x` lies within distance `tol` of the body.
    pub fn membership(&self, x: &[f64], tol: f64) -> Result<bool> {
        check_dim(self.dim, x.len())?;
        Ok(match &self.kind {
            BodyKind::HPolytope { a, b } => (0..a.rows()).all(|i| dot(a.row(i), x) - b[i] <= tol * norm2(a.row(i))),
            BodyKind::Ball { center, radius } => norm2(&sub(x, center)) <= radius + tol,
            BodyKind::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol),
            BodyKind::Simplex { dim } => {
                let s: f64 = x.iter().sum();
                x.iter().all(|v| *v >= -tol) && (s - 1.0).abs() <= tol * (*dim as f64).sqrt()
            }
            BodyKind::Affine { map, inner } => {
                let scale = crate::numerics::frobenius(map.matrix()).max(1e-300);
                inner.membership(&map.apply_inverse(x)?, tol / scale)?
            }
            BodyKind::Product { parts } => {
                let mut off = 0;
                for p in parts {
                    if !p.membership(&x[off..off + p.dim], tol)? {
                        return Ok(false);
                    }
                    off += p.dim;
                }
                true
            }
        })
    }

    /// `None` for members, otherwise a halfspace containing the body that
    /// `x` violates.
    pub fn separate(&self, x: &[f64], tol: f64) -> Result<Option<Halfspace>> {
        if self.membership(x, tol)? {
            return Ok(None);
        }
        let h = match &self.kind {
            BodyKind::HPolytope { a, b } => {
                let mut best = (0, f64::NEG_INFINITY);
                for i in 0..a.rows() {
                    let v = (dot(a.row(i), x) - b[i]) / norm2(a.row(i));
                    if v > best.1 {
                        best = (i, v);
                    }
                }
                Halfspace::new(a.row(best.0).to_vec(), b[best.0])?
            }
            BodyKind::Ball { center, radius } => {
                let dir = sub(x, center);
                let n = norm2(&dir);
                let unit: Vec<f64> = dir.iter().map(|v| v / n).collect();
                let off = dot(&unit, center) + radius;
                Halfspace::new(unit, off)?
            }
            BodyKind::Box { lo, hi } => {
                let mut best = (0, 1.0, f64::NEG_INFINITY);
                for j in 0..self.dim {
                    if x[j] - hi[j] > best.2 {
                        best = (j, 1.0, x[j] - hi[j]);
                    }
                    if lo[j] - x[j] > best.2 {
                        best = (j, -1.0, lo[j] - x[j]);
                    }
                }
                let mut n = vec![0.0; self.dim];
                n[best.0] = best.1;
                let off = if best.1 > 0.0 { hi[best.0] } else { -lo[best.0] };
                Halfspace::new(n, off)?
            }
            BodyKind::Simplex { dim } => {
                let s: f64 = x.iter().sum();
                let root = (*dim as f64).sqrt();
                let mut best = (usize::MAX, f64::NEG_INFINITY);
                for j in 0..*dim {
                    if -x[j] > best.1 {
                        best = (j, -x[j]);
                    }
                }
                let up = (s - 1.0) / root;
                let down = (1.0 - s) / root;
                if up >= best.1 && up >= down {
                    Halfspace::new(vec![1.0; *dim], 1.0)?
                } else if down >= best.1 {
                    Halfspace::new(vec![-1.0; *dim], -1.0)?
                } else {
                    let mut n = vec![0.0; *dim];
                    n[best.0] = -1.0;
                    Halfspace::new(n, 0.0)?
                }
            }
            BodyKind::Affine { map, inner } => {
                let pre = map.apply_inverse(x)?;
                let scale = crate::numerics::frobenius(map.matrix()).max(1e-300);
                let hin = match inner.separate(&pre, tol / scale)? {
                    Some(h) => h,
                    None => inner.nearest_violated(&pre)?,
                };
                let normal = matvec_t(map.inverse_matrix(), hin.normal())?;
                let shift_term = dot(&normal, map.shift());
                Halfspace::new(normal, hin.offset() + shift_term)?
            }
            BodyKind::Product { parts } => {
                let mut off = 0;
                let mut found = None;
                for p in parts {
                    if let Some(h) = p.separate(&x[off..off + p.dim], tol)? {
                        let mut n = vec![0.0; self.dim];
                        n[off..off + p.dim].copy_from_slice(h.normal());
                        found = Some(Halfspace::new(n, h.offset())?);
                        break;
                    }
                    off += p.dim;
                }
                match found {
                    Some(h) => h,
                    None => return Ok(None),
                }
            }
        };
        Ok(Some(h))
    }

    fn nearest_violated(&self, x: &[f64]) -> Result<Halfspace> {
        self.separate(x, 0.0)?
            .ok_or_else(|| Error::NumericalBreakdown("separation disagrees with membership".into()))
    }

    /// A maximizer of `<u, x>` over the body; a vertex for polytopes.
    pub fn linopt(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, u.len())?;
        match &self.kind {
            BodyKind::HPolytope { a, b } => {
                let d = self.dim;
                let obj: Vec<f64> = u.iter().copied().chain(u.iter().map(|v| -v)).collect();
                let mut lp = LpProblem::new(Sense::Maximize, obj);
                for i in 0..a.rows() {
                    let row = a.row(i);
                    let coeffs = row.iter().copied().chain(row.iter().map(|v| -v)).collect();
                    lp.add(coeffs, Relation::Le, b[i]);
                }
                match lp_solve(&lp, LP_TOL)? {
                    LpOutcome::Optimal { x, .. } => Ok((0..d).map(|j| x[j] - x[d + j]).collect()),
                    _ => Err(Error::InvalidInput("polytope is empty or unbounded".into())),
                }
            }
            BodyKind::Ball { center, radius } => {
                let n = norm2(u);
                if n == 0.0 {
                    return Ok(center.clone());
                }
                Ok(center.iter().zip(u).map(|(c, v)| c + radius * v / n).collect())
            }
            BodyKind::Box { lo, hi } => Ok((0..self.dim).map(|j| if u[j] > 0.0 { hi[j] } else { lo[j] }).collect()),
            BodyKind::Simplex { dim } => {
                let mut best = 0;
                for j in 1..*dim {
                    if u[j] > u[best] {
                        best = j;
                    }
                }
                let mut x = vec![0.0; *dim];
                x[best] = 1.0;
                Ok(x)
            }
            BodyKind::Affine { map, inner } => {
                let pulled = matvec_t(map.matrix(), u)?;
                map.apply(&inner.linopt(&pulled)?)
            }
            BodyKind::Product { parts } => {
                let mut out = Vec::with_capacity(self.dim);
                let mut off = 0;
                for p in parts {
                    out.extend(p.linopt(&u[off..off + p.dim])?);
                    off += p.dim;
                }
                Ok(out)
            }
        }
    }

    /// Inequality description `{x : A x <= b}` when the body is polyhedral.
    pub fn inequalities(&self) -> Option<(DenseMatrix, Vec<f64>)> {
        match &self.kind {
            BodyKind::HPolytope { a, b } => Some((a.clone(), b.clone())),
            BodyKind::Ball { .. } => None,
            BodyKind::Box { lo, hi } => {
                let d = self.dim;
                let mut rows = Vec::with_capacity(2 * d);
                let mut rhs = Vec::with_capacity(2 * d);
                for j in 0..d {
                    let mut r = vec![0.0; d];
                    r[j] = 1.0;
                    rows.push(r.clone());
                    rhs.push(hi[j]);
                    r[j] = -1.0;
                    rows.push(r);
                    rhs.push(-lo[j]);
                }
                Some((DenseMatrix::from_rows(&rows).ok()?, rhs))
            }
            BodyKind::Simplex { dim } => {
                let mut rows = Vec::with_capacity(dim + 2);
                let mut rhs = Vec::with_capacity(dim + 2);
                for j in 0..*dim {
                    let mut r = vec![0.0; *dim];
                    r[j] = -1.0;
                    rows.push(r);
                    rhs.push(0.0);
                }
                rows.push(vec![1.0; *dim]);
                rhs.push(1.0);
                rows.push(vec![-1.0; *dim]);
                rhs.push(-1.0);
                Some((DenseMatrix::from_rows(&rows).ok()?, rhs))
            }
            BodyKind::Affine { map, inner } => {
                let (a, b) = inner.inequalities()?;
                let composed = crate::numerics::matmat(&a, map.inverse_matrix()).ok()?;
                let shift = matvec(&composed, map.shift()).ok()?;
                let rhs = b.iter().zip(&shift).map(|(x, s)| x + s).collect();
                Some((composed, rhs))
            }
            BodyKind::Product { parts } => {
                let mut rows = Vec::new();
                let mut rhs = Vec::new();
                let mut off = 0;
                for p in parts {
                    let (a, b) = p.inequalities()?;
                    for i in 0..a.rows() {
                        let mut r = vec![0.0; self.dim];
                        r[off..off + p.dim].copy_from_slice(a.row(i));
                        rows.push(r);
                        rhs.push(b[i]);
                    }
                    off += p.dim;
                }
                Some((DenseMatrix::from_rows(&rows).ok()?, rhs))
            }
        }
    }

    /// Vertex list for bodies whose vertices are known in closed form.
    pub fn vertices(&self) -> Option<Vec<Vec<f64>>> {
        match &self.kind {
            BodyKind::Box { lo, hi } => {
                if self.dim > 16 {
                    return None;
                }
                Some(
                    (0..1usize << self.dim)
                        .map(|mask| {
                            (0..self.dim)
                                .map(|j| if mask >> j & 1 == 1 { hi[j] } else { lo[j] })
                                .collect()
                        })
                        .collect(),
                )
            }
            BodyKind::Simplex { dim } => Some(
                (0..*dim)
                    .map(|j| {
                        let mut e = vec![0.0; *dim];
                        e[j] = 1.0;
                        e
                    })
                    .collect(),
            ),
            BodyKind::Affine { map, inner } => inner.vertices()?.iter().map(|v| map.apply(v).ok()).collect(),
            BodyKind::Product { parts } => {
                let mut acc: Vec<Vec<f64>> = vec![Vec::new()];
                for p in parts {
                    let vs = p.vertices()?;
                    if acc.len() * vs.len() > 4096 {
                        return None;
                    }
                    acc = acc
                        .iter()
                        .flat_map(|a| vs.iter().map(move |v| a.iter().chain(v).copied().collect()))
                        .collect();
                }
                Some(acc)
            }
            _ => None,
        }
    }

    /// A random member, for test harnesses and sampled verification.
    pub fn sample_member<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        match &self.kind {
            BodyKind::Ball { center, radius } => {
                let u = uniform_in_ball(rng, self.dim);
                Ok(center.iter().zip(&u).map(|(c, v)| c + radius * v).collect())
            }
            BodyKind::Box { lo, hi } => Ok(lo
                .iter()
                .zip(hi)
                .map(|(l, h)| l + (h - l) * rng.random::<f64>())
                .collect()),
            BodyKind::Simplex { dim } => {
                let e: Vec<f64> = (0..*dim).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                let s: f64 = e.iter().sum();
                Ok(e.iter().map(|v| v / s).collect())
            }
            BodyKind::HPolytope { .. } => {
                let big_r = self.bounds.outer_radius;
                for _ in 0..100_000 {
                    let x: Vec<f64> = uniform_in_ball(rng, self.dim).iter().map(|v| v * big_r).collect();
                    if self.membership(&x, 0.0)? {
                        return Ok(x);
                    }
                }
                let u = uniform_in_ball(rng, self.dim);
                Ok(self
                    .bounds
                    .inner_center
                    .iter()
                    .zip(&u)
                    .map(|(c, v)| c + self.bounds.inner_radius * v)
                    .collect())
            }
            BodyKind::Affine { map, inner } => map.apply(&inner.sample_member(rng)?),
            BodyKind::Product { parts } => {
                let mut out = Vec::with_capacity(self.dim);
                for p in parts {
                    out.extend(p.sample_member(rng)?);
                }
                Ok(out)
            }
        }
    }
}

/// Uniform sample from the unit ball in `R^d`.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = norm2(&g).max(1e-300);
    let radius = rng.random::<f64>().powf(1.0 / d as f64);
    g.iter().map(|v| v * radius / n).collect()
}

/// Uniform sample from the unit sphere in `R^d`.
pub fn uniform_on_sphere<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = norm2(&g).max(1e-300);
    g.iter().map(|v| v / n).collect()
}
