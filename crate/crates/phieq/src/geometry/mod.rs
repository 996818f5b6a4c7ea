//! Convex bodies accessed through membership, separation and linear
//! optimization oracles, plus affine maps and finite distributions.

mod body;
mod distribution;
mod frame;
mod transfer;

pub use body::{uniform_in_ball, uniform_on_sphere, BodyKind, ConvexBody};
pub use distribution::SparseDistribution;
pub use frame::Frame;
pub use transfer::{isotropic_transfer, IsotropicTransfer, RegretMinimizer};

use crate::error::{check_dim, Error, Result};
use crate::numerics::{dot, frobenius, matmat, matvec, norm2, sub, DenseMatrix};

/// Default oracle tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// The closed halfspace `{x : <normal, x> <= offset}` with a unit normal.
#[derive(Clone, Debug, PartialEq)]
pub struct Halfspace {
    normal: Vec<f64>,
    offset: f64,
}

impl Halfspace {
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        let n = norm2(&normal);
        if !(n > 0.0) || !n.is_finite() || !offset.is_finite() {
            return Err(Error::InvalidInput(
                "halfspace normal must be nonzero and finite".into(),
            ));
        }
        Ok(Self {
            normal: normal.iter().map(|v| v / n).collect(),
            offset: offset / n,
        })
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// Signed violation `<normal, x> - offset`; positive outside.
    pub fn violation(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) - self.offset
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.violation(x) <= tol
    }
}

/// Certified radii: `B_r(inner_center)` lies in the body and the body lies
/// in `B_R(0)`. For the probability simplex the inner ball is taken
/// relative to its affine hull.
#[derive(Clone, Debug, PartialEq)]
pub struct BallBounds {
    pub inner_radius: f64,
    pub inner_center: Vec<f64>,
    pub outer_radius: f64,
}

impl BallBounds {
    pub fn new(inner_radius: f64, inner_center: Vec<f64>, outer_radius: f64) -> Result<Self> {
        if !(inner_radius > 0.0) || !(outer_radius >= inner_radius) || !outer_radius.is_finite() {
            return Err(Error::BadBounds {
                r: inner_radius,
                big_r: outer_radius,
            });
        }
        Ok(Self {
            inner_radius,
            inner_center,
            outer_radius,
        })
    }
}

/// Invertible affine map `x -> A x + b` with a verified cached inverse.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    a: DenseMatrix,
    b: Vec<f64>,
    a_inv: DenseMatrix,
}

impl AffineMap {
    pub fn new(a: DenseMatrix, b: Vec<f64>) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::InvalidInput("affine map matrix must be square".into()));
        }
        check_dim(a.rows(), b.len())?;
        let a_inv = a.inverse().ok_or(Error::SingularMap)?;
        let prod = matmat(&a, &a_inv)?;
        let resid = DenseMatrix::new(
            a.rows(),
            a.rows(),
            sub(prod.data(), DenseMatrix::identity(a.rows()).data()),
        )?;
        if frobenius(&resid) > 1e-10 {
            return Err(Error::SingularMap);
        }
        Ok(Self { a, b, a_inv })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            a: DenseMatrix::identity(d),
            b: vec![0.0; d],
            a_inv: DenseMatrix::identity(d),
        }
    }

    /// `x -> s (x - center)`.
    pub fn recentre(center: &[f64], s: f64) -> Result<Self> {
        let d = center.len();
        Self::new(
            DenseMatrix::identity(d).scaled(s),
            center.iter().map(|c| -s * c).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn inverse_matrix(&self) -> &DenseMatrix {
        &self.a_inv
    }

    pub fn shift(&self) -> &[f64] {
        &self.b
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = matvec(&self.a, x)?;
        for (yi, bi) in y.iter_mut().zip(&self.b) {
            *yi += bi;
        }
        Ok(y)
    }

    pub fn apply_inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), y.len())?;
        matvec(&self.a_inv, &sub(y, &self.b))
    }
}
