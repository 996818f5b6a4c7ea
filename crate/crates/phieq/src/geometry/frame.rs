use super::{AffineMap, BallBounds, BodyKind, ConvexBody};
use crate::error::{check_dim, Error, Result};
use crate::numerics::{matvec, matvec_t, norm2, DenseMatrix};

/// Affine chart `x = P z + x_c` from local coordinates `z`, in which the
/// body contains `B_1(0)`, to ambient coordinates.
///
/// Full-dimensional bodies use `z = (x - x_0) / r` around their inner ball.
/// The probability simplex in `R^n` uses the `n - 1` leading coordinates,
/// giving the local body `{z >= -1, sum z <= sqrt(n - 1)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    ambient: ConvexBody,
    local: ConvexBody,
    p: DenseMatrix,
    left: DenseMatrix,
    origin: Vec<f64>,
}

fn has_flat_part(body: &ConvexBody) -> bool {
    match body.kind() {
        BodyKind::Simplex { .. } => true,
        BodyKind::Product { parts } => parts.iter().any(has_flat_part),
        BodyKind::Affine { inner, .. } => has_flat_part(inner),
        _ => false,
    }
}

impl Frame {
    pub fn new(body: &ConvexBody) -> Result<Self> {
        match body.kind() {
            BodyKind::Simplex { dim } => Self::simplex(body, *dim),
            _ if has_flat_part(body) => Err(Error::InvalidInput(
                "frames need a full-dimensional body or a single simplex".into(),
            )),
            _ => Self::full(body),
        }
    }

    fn full(body: &ConvexBody) -> Result<Self> {
        let d = body.dim();
        let b = body.bounds();
        let s = 1.0 / b.inner_radius;
        let x0 = b.inner_center.clone();
        let local = match body.kind() {
            BodyKind::Box { lo, hi } => ConvexBody::box_body(
                lo.iter().zip(&x0).map(|(l, c)| s * (l - c)).collect(),
                hi.iter().zip(&x0).map(|(h, c)| s * (h - c)).collect(),
            )?,
            BodyKind::Ball { .. } => ConvexBody::unit_ball(d),
            _ => {
                let big_r = s * (b.outer_radius + norm2(&x0));
                let bounds = BallBounds::new(1.0, vec![0.0; d], big_r.max(1.0))?;
                ConvexBody::affine_image_with_bounds(AffineMap::recentre(&x0, s)?, body.clone(), bounds)?
            }
        };
        let local = loosen(local)?;
        Ok(Self {
            ambient: body.clone(),
            local,
            p: DenseMatrix::identity(d).scaled(1.0 / s),
            left: DenseMatrix::identity(d).scaled(s),
            origin: x0,
        })
    }

    fn simplex(body: &ConvexBody, n: usize) -> Result<Self> {
        let m = n - 1;
        let mf = m as f64;
        let rho = 1.0 / (mf + mf.sqrt());
        let mut rows = Vec::with_capacity(m + 1);
        let mut rhs = Vec::with_capacity(m + 1);
        for j in 0..m {
            let mut r = vec![0.0; m];
            r[j] = -1.0;
            rows.push(r);
            rhs.push(1.0);
        }
        rows.push(vec![1.0; m]);
        rhs.push(mf.sqrt());
        let corner = (mf + mf.sqrt() - 1.0).powi(2) + (mf - 1.0);
        let big_r = corner.sqrt().max(mf.sqrt());
        let bounds = BallBounds::new(1.0, vec![0.0; m], big_r)?;
        let local = loosen(ConvexBody::hpolytope_with_bounds(
            DenseMatrix::from_rows(&rows)?,
            rhs,
            bounds,
        )?)?;
        let mut p = DenseMatrix::zeros(n, m);
        let mut left = DenseMatrix::zeros(m, n);
        for j in 0..m {
            p.set(j, j, rho);
            p.set(m, j, -rho);
            left.set(j, j, 1.0 / rho);
        }
        let mut origin = vec![rho; n];
        origin[m] = 1.0 - mf * rho;
        Ok(Self {
            ambient: body.clone(),
            local,
            p,
            left,
            origin,
        })
    }

    pub fn ambient(&self) -> &ConvexBody {
        &self.ambient
    }

    pub fn local(&self) -> &ConvexBody {
        &self.local
    }

    pub fn local_dim(&self) -> usize {
        self.local.dim()
    }

    /// Linear part `P` of the chart.
    pub fn matrix(&self) -> &DenseMatrix {
        &self.p
    }

    pub fn to_ambient(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut x = matvec(&self.p, z)?;
        for (a, o) in x.iter_mut().zip(&self.origin) {
            *a += o;
        }
        Ok(x)
    }

    pub fn to_local(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.ambient.dim(), x.len())?;
        let diff: Vec<f64> = x.iter().zip(&self.origin).map(|(a, b)| a - b).collect();
        matvec(&self.left, &diff)
    }

    /// Gradient in local coordinates, `P^T g`, so that
    /// `<g, x> = <P^T g, z> + <g, x_c>`.
    pub fn pull_gradient(&self, g: &[f64]) -> Result<Vec<f64>> {
        matvec_t(&self.p, g)
    }
}

/// The radius bounds need `r < R`; a body with `R = r` gets `R` raised by a
/// relative `1e-9`.
fn loosen(body: ConvexBody) -> Result<ConvexBody> {
    let b = body.bounds().clone();
    if b.outer_radius > b.inner_radius {
        return Ok(body);
    }
    let big_r = b.inner_radius * (1.0 + 1e-9);
    body.with_bounds(BallBounds::new(b.inner_radius, b.inner_center, big_r)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DEFAULT_TOL;

    #[test]
    fn simplex_chart_round_trip() {
        let s = ConvexBody::simplex(3).unwrap();
        let f = Frame::new(&s).unwrap();
        assert_eq!(f.local_dim(), 2);
        let x = vec![0.2, 0.5, 0.3];
        let z = f.to_local(&x).unwrap();
        let back = f.to_ambient(&z).unwrap();
        assert!(back.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-14));
        assert!(f.local().membership(&z, DEFAULT_TOL).unwrap());
        for v in [vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]] {
            let zv = f.to_local(&v).unwrap();
            assert!(f.local().membership(&zv, 1e-12).unwrap());
            assert!(norm2(&zv) <= f.local().bounds().outer_radius + 1e-12);
        }
        let g = vec![1.0, -2.0, 0.5];
        let gz = f.pull_gradient(&g).unwrap();
        let lhs: f64 = g.iter().zip(&x).map(|(a, b)| a * b).sum();
        let base: f64 = g
            .iter()
            .zip(&f.to_ambient(&[0.0, 0.0]).unwrap())
            .map(|(a, b)| a * b)
            .sum();
        let rhs = gz.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() + base;
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn interval_frame_is_loosened() {
        let f = Frame::new(&ConvexBody::cube(1, 0.5)).unwrap();
        let b = f.local().bounds();
        assert_eq!(b.inner_radius, 1.0);
        assert!(b.outer_radius > 1.0 && b.outer_radius < 1.0 + 1e-8);
    }
}
