use std::collections::BTreeMap;

use super::ConvexBody;
use crate::error::{check_dim, Error, Result};
use crate::numerics::bits_key;

/// Weight-sum tolerance for a valid distribution.
pub const WEIGHT_TOL: f64 = 1e-9;

/// Finite distribution over points of a common dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseDistribution {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl SparseDistribution {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        check_dim(points.len(), weights.len())?;
        if points.is_empty() {
            return Err(Error::InvalidInput("distribution needs at least one atom".into()));
        }
        let d = points[0].len();
        for p in &points {
            check_dim(d, p.len())?;
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("atoms must be finite".into()));
            }
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { points, weights })
    }

    pub fn point_mass(x: Vec<f64>) -> Self {
        Self {
            points: vec![x],
            weights: vec![1.0],
        }
    }

    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let w = 1.0 / points.len().max(1) as f64;
        let n = points.len();
        Self::new(points, vec![w; n])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.points
            .iter()
            .map(|p| p.as_slice())
            .zip(self.weights.iter().copied())
    }

    pub fn mean(&self) -> Vec<f64> {
        self.expect(|x| x.to_vec())
    }

    /// `E[f(x)]` for a vector-valued `f`, summed in atom order.
    pub fn expect<F: FnMut(&[f64]) -> Vec<f64>>(&self, mut f: F) -> Vec<f64> {
        let mut acc: Vec<f64> = Vec::new();
        for (p, w) in self.atoms() {
            let v = f(p);
            if acc.is_empty() {
                acc = vec![0.0; v.len()];
            }
            for (a, b) in acc.iter_mut().zip(&v) {
                *a += w * b;
            }
        }
        acc
    }

    /// Combines atoms with bit-identical points and drops zero weights,
    /// keeping first-occurrence order.
    pub fn merged(&self) -> Self {
        let mut index: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
        let mut points = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (p, w) in self.atoms() {
            if w == 0.0 {
                continue;
            }
            match index.get(&bits_key(p)) {
                Some(&i) => weights[i] += w,
                None => {
                    index.insert(bits_key(p), points.len());
                    points.push(p.to_vec());
                    weights.push(w);
                }
            }
        }
        if points.is_empty() {
            return self.clone();
        }
        Self { points, weights }
    }

    /// Keeps the `cap` heaviest atoms, renormalized. Returns the pruned
    /// distribution and the dropped mass.
    pub fn pruned(&self, cap: usize) -> (Self, f64) {
        if self.len() <= cap || cap == 0 {
            return (self.clone(), 0.0);
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.weights[b].total_cmp(&self.weights[a]).then(a.cmp(&b)));
        let mut keep = order[..cap].to_vec();
        keep.sort_unstable();
        let kept: f64 = keep.iter().map(|&i| self.weights[i]).sum();
        let dist = Self {
            points: keep.iter().map(|&i| self.points[i].clone()).collect(),
            weights: keep.iter().map(|&i| self.weights[i] / kept).collect(),
        };
        (dist, 1.0 - kept)
    }

    /// Product distribution with concatenated atoms, last factor fastest.
    pub fn product(parts: &[SparseDistribution]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidInput("product needs at least one factor".into()));
        }
        let mut points: Vec<Vec<f64>> = vec![Vec::new()];
        let mut weights = vec![1.0];
        for part in parts {
            let mut np = Vec::with_capacity(points.len() * part.len());
            let mut nw = Vec::with_capacity(points.len() * part.len());
            for (p, w) in points.iter().zip(&weights) {
                for (q, v) in part.atoms() {
                    np.push(p.iter().chain(q).copied().collect());
                    nw.push(w * v);
                }
            }
            points = np;
            weights = nw;
        }
        Ok(Self { points, weights })
    }

    /// Pushes every atom through `f`.
    pub fn map_points<F: FnMut(&[f64]) -> Result<Vec<f64>>>(&self, mut f: F) -> Result<Self> {
        let points = self.points.iter().map(|p| f(p)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            points,
            weights: self.weights.clone(),
        })
    }

    /// Index of the first atom failing `body` membership.
    pub fn check_members(&self, body: &ConvexBody, tol: f64) -> Result<Option<usize>> {
        for (i, p) in self.points.iter().enumerate() {
            if !body.membership(p, tol)? {
                return Ok(Some(i));
            }
        }
        Ok(None)
    }

    /// Mixture `sum_j lambda_j * parts_j`, flattening atoms.
    pub fn mixture(parts: &[SparseDistribution], lambda: &[f64]) -> Result<Self> {
        check_dim(parts.len(), lambda.len())?;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (part, l) in parts.iter().zip(lambda) {
            if *l <= 0.0 {
                continue;
            }
            for (p, w) in part.atoms() {
                points.push(p.to_vec());
                weights.push(l * w);
            }
        }
        let total: f64 = weights.iter().sum();
        if points.is_empty() || !(total > 0.0) {
            return Err(Error::InvalidInput("mixture has no mass".into()));
        }
        for w in &mut weights {
            *w /= total;
        }
        Ok(Self { points, weights })
    }
}
