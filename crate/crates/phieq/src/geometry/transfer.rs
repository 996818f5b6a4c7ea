use super::{AffineMap, SparseDistribution};
use crate::error::{check_dim, Error, Result};
use crate::numerics::matvec_t;

/// Online learner over a convex body facing linear utilities.
pub trait RegretMinimizer {
    fn dim(&self) -> usize;
    fn next_strategy(&mut self) -> Result<SparseDistribution>;
    fn observe(&mut self, u: &[f64]) -> Result<()>;
}

/// Runs a learner built for `psi(X)` as a learner over `X`.
///
/// Utilities are forwarded as `(A^-1)^T u / (2 R sqrt(d))` and strategies are
/// pulled back atomwise through `psi^-1`.
#[derive(Debug)]
pub struct IsotropicTransfer<M> {
    map: AffineMap,
    inner: M,
    factor: f64,
}

pub fn isotropic_transfer<M: RegretMinimizer>(
    map: AffineMap,
    inner: M,
    big_r: f64,
    d: usize,
) -> Result<IsotropicTransfer<M>> {
    check_dim(map.dim(), d)?;
    check_dim(d, inner.dim())?;
    if !(big_r > 0.0) || !big_r.is_finite() {
        return Err(Error::InvalidInput("outer radius must be positive".into()));
    }
    Ok(IsotropicTransfer {
        map,
        inner,
        factor: 1.0 / (2.0 * big_r * (d as f64).sqrt()),
    })
}

impl<M: RegretMinimizer> IsotropicTransfer<M> {
    /// Regret on `X` equals this multiple of regret on `psi(X)`.
    pub fn scale(&self) -> f64 {
        1.0 / self.factor
    }

    pub fn map(&self) -> &AffineMap {
        &self.map
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }

    pub fn rescale_utility(&self, u: &[f64]) -> Result<Vec<f64>> {
        let v = matvec_t(self.map.inverse_matrix(), u)?;
        Ok(v.iter().map(|x| x * self.factor).collect())
    }
}

impl<M: RegretMinimizer> RegretMinimizer for IsotropicTransfer<M> {
    fn dim(&self) -> usize {
        self.map.dim()
    }

    fn next_strategy(&mut self) -> Result<SparseDistribution> {
        let mu = self.inner.next_strategy()?;
        mu.map_points(|p| self.map.apply_inverse(p))
    }

    fn observe(&mut self, u: &[f64]) -> Result<()> {
        let tilde = self.rescale_utility(u)?;
        self.inner.observe(&tilde)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::DenseMatrix;

    struct Fixed(Vec<f64>, Vec<Vec<f64>>);

    impl RegretMinimizer for Fixed {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn next_strategy(&mut self) -> Result<SparseDistribution> {
            Ok(SparseDistribution::point_mass(self.0.clone()))
        }
        fn observe(&mut self, u: &[f64]) -> Result<()> {
            self.1.push(u.to_vec());
            Ok(())
        }
    }

    #[test]
    fn identity_halves_utilities() {
        let mut t = isotropic_transfer(AffineMap::identity(1), Fixed(vec![0.5], vec![]), 1.0, 1).unwrap();
        t.observe(&[0.8]).unwrap();
        assert_eq!(t.inner().1[0], vec![0.4]);
    }

    #[test]
    fn doubling_quarters_utilities_and_pulls_back_points() {
        let map = AffineMap::new(DenseMatrix::identity(1).scaled(2.0), vec![0.0]).unwrap();
        let mut t = isotropic_transfer(map, Fixed(vec![1.0], vec![]), 1.0, 1).unwrap();
        t.observe(&[1.0]).unwrap();
        assert_eq!(t.inner().1[0], vec![0.25]);
        assert_eq!(t.next_strategy().unwrap().points()[0], vec![0.5]);
    }
}
