//! Central-cut ellipsoid method with exact volume bookkeeping.

use crate::error::{check_dim, Error, Result};
use crate::numerics::{dot, matvec, DenseMatrix};

/// Ellipsoid `{y : (y - c)^T Q^-1 (y - c) <= 1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct EllipsoidState {
    center: Vec<f64>,
    shape: DenseMatrix,
}

/// `log vol(B_1)` in `R^k`.
pub fn log_unit_ball_volume(k: usize) -> f64 {
    let half = k as f64 / 2.0;
    half * std::f64::consts::PI.ln() - ln_gamma_half_integer(k + 2)
}

/// `log vol(B_radius)` in `R^k`.
pub fn log_ball_volume(k: usize, radius: f64) -> f64 {
    log_unit_ball_volume(k) + k as f64 * radius.ln()
}

/// `ln Gamma(n / 2)` for a positive integer `n`.
fn ln_gamma_half_integer(n: usize) -> f64 {
    let mut acc = if n % 2 == 0 {
        0.0
    } else {
        0.5 * std::f64::consts::PI.ln()
    };
    let mut m = if n % 2 == 0 { 2 } else { 1 };
    while m + 2 <= n {
        acc += (m as f64 / 2.0).ln();
        m += 2;
    }
    acc
}

/// Exact per-cut volume ratio `(k/(k+1)) (k^2/(k^2-1))^((k-1)/2)`.
pub fn volume_ratio(k: usize) -> f64 {
    log_volume_ratio(k).exp()
}

pub fn log_volume_ratio(k: usize) -> f64 {
    let kf = k as f64;
    if k == 1 {
        return 0.5f64.ln();
    }
    (kf / (kf + 1.0)).ln() + 0.5 * (kf - 1.0) * (kf * kf / (kf * kf - 1.0)).ln()
}

/// Hard cap `ceil(20 k^2 ln(R B / eps))` on ellipsoid loops.
pub fn cut_cap(k: usize, big_r: f64, b: f64, eps: f64) -> usize {
    let l = (big_r * b / eps).ln().max(1.0);
    (20.0 * (k * k) as f64 * l).ceil() as usize
}

impl EllipsoidState {
    pub fn init_ball(k: usize, radius: f64) -> Result<Self> {
        Self::ball(vec![0.0; k], radius)
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidInput(
                "ellipsoid needs k >= 1 and a positive radius".into(),
            ));
        }
        let k = center.len();
        Ok(Self {
            center,
            shape: DenseMatrix::identity(k).scaled(radius * radius),
        })
    }

    pub fn from_parts(center: Vec<f64>, shape: DenseMatrix) -> Result<Self> {
        check_dim(center.len(), shape.rows())?;
        check_dim(center.len(), shape.cols())?;
        shape.cholesky().ok_or(Error::NotPositiveDefinite)?;
        Ok(Self { center, shape })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn shape(&self) -> &DenseMatrix {
        &self.shape
    }

    /// Exact log-volume through a Cholesky log-determinant.
    pub fn log_volume(&self) -> Result<f64> {
        let l = self.shape.cholesky().ok_or(Error::NotPositiveDefinite)?;
        let mut logdet = 0.0;
        for i in 0..self.dim() {
            logdet += 2.0 * l.get(i, i).ln();
        }
        Ok(log_unit_ball_volume(self.dim()) + 0.5 * logdet)
    }

    /// `(y - c)^T Q^-1 (y - c)`.
    pub fn norm_sq(&self, y: &[f64]) -> Result<f64> {
        check_dim(self.dim(), y.len())?;
        let diff: Vec<f64> = y.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let z = self.shape.solve(&diff).ok_or(Error::NotPositiveDefinite)?;
        Ok(dot(&diff, &z))
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> Result<bool> {
        Ok(self.norm_sq(y)? <= 1.0 + tol)
    }

    /// `sqrt(w^T Q w)`, the half-width of the ellipsoid along `w`.
    pub fn width(&self, w: &[f64]) -> Result<f64> {
        let qw = matvec(&self.shape, w)?;
        Ok(dot(w, &qw).max(0.0).sqrt())
    }

    /// Minimum-volume ellipsoid containing `{y in E : <w, y - c> <= 0}`.
    pub fn central_cut(&self, w: &[f64]) -> Result<Self> {
        let k = self.dim();
        check_dim(k, w.len())?;
        let qw = matvec(&self.shape, w)?;
        let wqw = dot(w, &qw);
        if !(wqw > 1e-300) || !wqw.is_finite() {
            return Err(Error::DegenerateCut(wqw));
        }
        let root = wqw.sqrt();
        let kf = k as f64;
        let center: Vec<f64> = self
            .center
            .iter()
            .zip(&qw)
            .map(|(c, q)| c - q / ((kf + 1.0) * root))
            .collect();
        if k == 1 {
            let shape = self.shape.scaled(0.25);
            return Ok(Self { center, shape });
        }
        let factor = kf * kf / (kf * kf - 1.0);
        let beta = 2.0 / ((kf + 1.0) * wqw);
        let mut data = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                data.push(factor * (self.shape.get(i, j) - beta * qw[i] * qw[j]));
            }
        }
        let mut shape = DenseMatrix::new(k, k, data)?;
        shape.symmetrize();
        if shape.cholesky().is_none() {
            let jitter = 1e-14 * shape.trace() / kf;
            for i in 0..k {
                shape.set(i, i, shape.get(i, i) + jitter);
            }
            shape.cholesky().ok_or(Error::NotPositiveDefinite)?;
        }
        Ok(Self { center, shape })
    }
}
