//! Feature maps, deviation parameters `x -> K m(x) + c` and the radii of
//! the parameter set of endomorphisms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::geometry::{uniform_in_ball, uniform_on_sphere, BallBounds, Halfspace};
use crate::numerics::{matvec, norm2, DenseMatrix};

/// Samples used to estimate the feature norm bound.
pub const NORM_SAMPLES: usize = 100_000;
/// Inflation applied to the sampled feature norm bound.
pub const NORM_INFLATION: f64 = 1.1;
const NORM_SEED: u64 = 0x5eed_0f_fea7;

/// `P_l(x)` by the three-term recurrence.
pub fn legendre(l: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if l == 0 {
        return prev;
    }
    for n in 1..l {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0) * x * cur - nf * prev) / (nf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `sqrt((2l + 1) / 2) P_l(x)`, orthonormal on `[-1, 1]`.
pub fn legendre_rescaled(l: usize, x: f64) -> f64 {
    ((2 * l + 1) as f64 / 2.0).sqrt() * legendre(l, x)
}

/// All `P_0(x), ..., P_l(x)` rescaled.
fn legendre_table(l: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(l + 1);
    let (mut prev, mut cur) = (1.0, x);
    out.push(0.5f64.sqrt());
    if l >= 1 {
        out.push(1.5f64.sqrt() * x);
    }
    for n in 1..l {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0) * x * cur - nf * prev) / (nf + 1.0);
        prev = cur;
        cur = next;
        out.push(((2 * n + 3) as f64 / 2.0).sqrt() * cur);
    }
    out
}

/// Multi-indices with total degree in `1..=degree`, graded by degree and
/// ordered within a degree by decreasing first exponent, then second, and
/// so on: `(2,0), (1,1), (0,2)`.
pub fn multi_indices(d: usize, degree: usize) -> Vec<Vec<usize>> {
    fn fill(rest: usize, slots: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(rest);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=rest).rev() {
            prefix.push(e);
            fill(rest - e, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for s in 1..=degree {
        fill(s, d, &mut Vec::with_capacity(d), &mut out);
    }
    out
}

/// `C(n, k)`.
pub fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k.min(n));
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Feature family, independent of the body it is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Features {
    Linear,
    Legendre { degree: usize },
}

impl Features {
    /// Builds the feature map for a body with the given radii around the
    /// origin.
    pub fn build(self, d: usize, bounds: &BallBounds) -> Result<FeatureMap> {
        match self {
            Features::Linear => FeatureMap::linear(d, bounds),
            Features::Legendre { degree } => FeatureMap::legendre(d, degree, bounds.outer_radius),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FeatureKind {
    Linear,
    /// Products of rescaled Legendre polynomials evaluated at `sqrt(d) x`.
    Legendre {
        degree: usize,
        indices: Vec<Vec<usize>>,
    },
}

/// Feature map `m : R^d -> R^k'` with its norm bound `M` on `B_R(0)` and
/// inner radius `delta` of `co m(B_1(0))`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    kind: FeatureKind,
    d: usize,
    out_dim: usize,
    norm_bound: f64,
    inner_radius: f64,
}

impl FeatureMap {
    /// `m(x) = x` on a body with inner radius `r` around the origin and outer
    /// radius `R`; `M = max(R, 1)` and `delta = r`.
    pub fn linear(d: usize, bounds: &BallBounds) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("feature map needs d >= 1".into()));
        }
        Ok(Self {
            kind: FeatureKind::Linear,
            d,
            out_dim: d,
            norm_bound: bounds.outer_radius.max(1.0),
            inner_radius: bounds.inner_radius,
        })
    }

    /// Legendre features of total degree `1..=degree`. `M` is the sampled
    /// maximum of the feature norm over `B_R(0)`, inflated and at least 1,
    /// and `delta = 1 / M`.
    pub fn legendre(d: usize, degree: usize, outer_radius: f64) -> Result<Self> {
        if d == 0 || degree == 0 {
            return Err(Error::InvalidInput(
                "legendre features need d >= 1 and degree >= 1".into(),
            ));
        }
        if !(outer_radius > 0.0) || !outer_radius.is_finite() {
            return Err(Error::InvalidInput("outer radius must be positive".into()));
        }
        let indices = multi_indices(d, degree);
        let mut fm = Self {
            out_dim: indices.len(),
            kind: FeatureKind::Legendre { degree, indices },
            d,
            norm_bound: 1.0,
            inner_radius: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(NORM_SEED);
        let mut best = norm2(&fm.eval_unchecked(&vec![0.0; d]));
        for i in 0..NORM_SAMPLES {
            let unit = if i % 2 == 0 {
                uniform_on_sphere(&mut rng, d)
            } else {
                uniform_in_ball(&mut rng, d)
            };
            let x: Vec<f64> = unit.iter().map(|v| v * outer_radius).collect();
            best = best.max(norm2(&fm.eval_unchecked(&x)));
        }
        let m = (NORM_INFLATION * best).max(1.0);
        fm.norm_bound = m;
        fm.inner_radius = 1.0 / m;
        Ok(fm)
    }

    pub fn kind(&self) -> &FeatureKind {
        &self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    /// `k'`.
    pub fn output_dim(&self) -> usize {
        self.out_dim
    }

    /// Parameter count `k = k' d + d`.
    pub fn param_dim(&self) -> usize {
        self.out_dim * self.d + self.d
    }

    /// `M`.
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    /// `delta`.
    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.kind, FeatureKind::Linear)
    }

    /// `||m(0)||`; zero for linear features, nonzero for Legendre features
    /// with an even-degree pure power.
    pub fn norm_at_origin(&self) -> f64 {
        norm2(&self.eval_unchecked(&vec![0.0; self.d]))
    }

    pub fn preserves_zero(&self) -> bool {
        self.norm_at_origin() <= 1e-12
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.d, x.len())?;
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            FeatureKind::Linear => x.to_vec(),
            FeatureKind::Legendre { degree, indices } => {
                let s = (self.d as f64).sqrt();
                let tables: Vec<Vec<f64>> = x.iter().map(|v| legendre_table(*degree, s * v)).collect();
                indices
                    .iter()
                    .map(|idx| idx.iter().enumerate().map(|(j, e)| tables[j][*e]).product())
                    .collect()
            }
        }
    }
}

/// Deviation `x -> K m(x) + c` with `K` of shape `d x k'`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviationParams {
    k: DenseMatrix,
    c: Vec<f64>,
}

impl DeviationParams {
    pub fn new(k: DenseMatrix, c: Vec<f64>) -> Result<Self> {
        check_dim(k.rows(), c.len())?;
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("params must be finite".into()));
        }
        Ok(Self { k, c })
    }

    pub fn zeros(fm: &FeatureMap) -> Self {
        Self {
            k: DenseMatrix::zeros(fm.d, fm.out_dim),
            c: vec![0.0; fm.d],
        }
    }

    pub fn constant(fm: &FeatureMap, c: Vec<f64>) -> Result<Self> {
        Self::new(DenseMatrix::zeros(fm.d, fm.out_dim), c)
    }

    /// Inverse of [`DeviationParams::to_flat`].
    pub fn from_flat(fm: &FeatureMap, v: &[f64]) -> Result<Self> {
        check_dim(fm.param_dim(), v.len())?;
        let split = fm.d * fm.out_dim;
        Self::new(
            DenseMatrix::new(fm.d, fm.out_dim, v[..split].to_vec())?,
            v[split..].to_vec(),
        )
    }

    /// Row-major `K` followed by `c`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.k.data().iter().chain(&self.c).copied().collect()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.k
    }

    pub fn offset(&self) -> &[f64] {
        &self.c
    }

    /// `sqrt(||K||_F^2 + ||c||^2)`.
    pub fn norm(&self) -> f64 {
        norm2(&self.to_flat())
    }

    pub fn apply(&self, fm: &FeatureMap, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(fm.d, self.k.rows())?;
        check_dim(fm.out_dim, self.k.cols())?;
        let mut y = matvec(&self.k, &fm.eval(x)?)?;
        for (a, b) in y.iter_mut().zip(&self.c) {
            *a += b;
        }
        Ok(y)
    }
}

/// Parameters of the identity map under `fm`.
pub fn identity_params(fm: &FeatureMap) -> Result<DeviationParams> {
    let mut k = DenseMatrix::zeros(fm.d, fm.out_dim);
    // The degree-one features come first, with `e_j` in slot `j`.
    let coeff = match &fm.kind {
        FeatureKind::Linear => 1.0,
        FeatureKind::Legendre { degree, .. } => {
            if *degree == 0 {
                return Err(Error::IdentityUnrepresentable);
            }
            {
                // Slot `j` holds `sqrt(3/2) sqrt(d) x_j` times `d - 1` factors of
                // `sqrt(1/2)`.
                let d = fm.d as f64;
                2f64.powf((d - 1.0) / 2.0) / (1.5f64.sqrt() * d.sqrt())
            }
        }
    };
    for j in 0..fm.d {
        k.set(j, j, coeff);
    }
    DeviationParams::new(k, vec![0.0; fm.d])
}

/// Lifts a halfspace `<w, x> <= beta` containing the body to the parameter
/// halfspace `<w, K m(z) + c> <= beta`, which every endomorphism satisfies.
pub fn lift_halfspace(fm: &FeatureMap, z: &[f64], h: &Halfspace) -> Result<Halfspace> {
    check_dim(fm.d, h.dim())?;
    let m = fm.eval(z)?;
    let w = h.normal();
    let mut normal = Vec::with_capacity(fm.param_dim());
    for wr in w {
        normal.extend(m.iter().map(|mc| wr * mc));
    }
    normal.extend_from_slice(w);
    Halfspace::new(normal, h.offset())
}

/// Inner and outer radii of the endomorphism parameter set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiRadii {
    pub inner: f64,
    pub outer: f64,
}

/// `r' = r / (2M)` and `R' = R (2 sqrt(d) / delta + 1)`.
pub fn phi_radii(fm: &FeatureMap, bounds: &BallBounds, d: usize) -> Result<PhiRadii> {
    let (r, big_r) = (bounds.inner_radius, bounds.outer_radius);
    if !(r < big_r) {
        return Err(Error::BadBounds { r, big_r });
    }
    check_dim(fm.d, d)?;
    Ok(PhiRadii {
        inner: r / (2.0 * fm.norm_bound),
        outer: big_r * (2.0 * (d as f64).sqrt() / fm.inner_radius + 1.0),
    })
}

/// `(1 - mix) * identity + mix * Q` with `Q` uniform on the sphere of radius
/// `r'`. Both endpoints are endomorphisms of a body containing `B_r(0)`,
/// hence so is the mixture.
pub fn random_endomorphism<R: Rng + ?Sized>(
    fm: &FeatureMap,
    radii: &PhiRadii,
    mix: f64,
    rng: &mut R,
) -> Result<DeviationParams> {
    if !(0.0..=1.0).contains(&mix) {
        return Err(Error::InvalidInput("mix must lie in [0, 1]".into()));
    }
    let id = identity_params(fm)?.to_flat();
    let q = uniform_on_sphere(rng, fm.param_dim());
    let v: Vec<f64> = id
        .iter()
        .zip(&q)
        .map(|(a, b)| (1.0 - mix) * a + mix * radii.inner * b)
        .collect();
    DeviationParams::from_flat(fm, &v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_values() {
        assert_eq!(legendre(0, 0.7), 1.0);
        assert_eq!(legendre(1, 0.3), 0.3);
        assert_eq!(legendre(2, 0.5), -0.125);
        assert!((legendre_rescaled(2, 0.0) + 2.5f64.sqrt() / 2.0).abs() < 1e-15);
        let t = legendre_table(4, 0.37);
        for (l, v) in t.iter().enumerate() {
            assert!((v - legendre_rescaled(l, 0.37)).abs() < 1e-14);
        }
    }

    #[test]
    fn graded_order() {
        assert_eq!(
            multi_indices(2, 2),
            vec![vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        assert_eq!(multi_indices(3, 3).len(), binomial(6, 3) - 1);
        assert_eq!(binomial(4, 2), 6);
    }

    #[test]
    fn identity_is_recovered() {
        let b = BallBounds::new(1.0, vec![0.0, 0.0], 2.0).unwrap();
        for fm in [
            FeatureMap::linear(2, &b).unwrap(),
            FeatureMap::legendre(2, 2, 2.0).unwrap(),
        ] {
            let id = identity_params(&fm).unwrap();
            let x = vec![0.3, -0.8];
            let y = id.apply(&fm, &x).unwrap();
            assert!((y[0] - x[0]).abs() < 1e-14 && (y[1] - x[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn flat_round_trip() {
        let fm = FeatureMap::legendre(2, 2, 1.0).unwrap();
        let v: Vec<f64> = (0..fm.param_dim()).map(|i| i as f64).collect();
        assert_eq!(DeviationParams::from_flat(&fm, &v).unwrap().to_flat(), v);
    }

    #[test]
    fn linear_radii() {
        let b = BallBounds::new(1.0, vec![0.0, 0.0], 2.0).unwrap();
        let fm = FeatureMap::linear(2, &b).unwrap();
        let r = phi_radii(&fm, &b, 2).unwrap();
        assert_eq!(r.inner, 0.25);
        assert!((r.outer - 2.0 * (2.0 * 2f64.sqrt() + 1.0)).abs() < 1e-14);
        let bad = BallBounds::new(1.0, vec![0.0], 1.0).unwrap();
        assert!(matches!(
            phi_radii(&FeatureMap::linear(1, &bad).unwrap(), &bad, 1),
            Err(Error::BadBounds { .. })
        ));
    }
}
