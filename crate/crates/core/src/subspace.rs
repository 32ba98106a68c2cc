//! Subspaces of R^l as orthonormal frames, and principal angles between them.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// A k-plane in R^l, stored as an l x k matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceRep {
    frame: DMatrix<f64>,
}

impl SubspaceRep {
    pub fn from_orthonormal(frame: DMatrix<f64>) -> Result<Self> {
        let k = frame.ncols();
        let err = (frame.transpose() * &frame - DMatrix::identity(k, k)).amax();
        if err > ORTHONORMAL_TOL {
            return Err(Error::InvalidArgument(format!(
                "frame is not orthonormal (defect {err:e})"
            )));
        }
        Ok(Self { frame })
    }

    /// Orthonormalises the columns of `spanning` (assumed independent) with a QR factorisation.
    pub fn span_of(spanning: DMatrix<f64>) -> Result<Self> {
        let k = spanning.ncols();
        let q = spanning.qr().q();
        Self::from_orthonormal(q.columns(0, k).into_owned())
    }

    /// Span of the listed standard basis vectors of R^l.
    pub fn coordinate(l: usize, indices: &[usize]) -> Self {
        let mut frame = DMatrix::zeros(l, indices.len());
        for (col, &i) in indices.iter().enumerate() {
            frame[(i, col)] = 1.0;
        }
        Self { frame }
    }

    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn ambient_dim(&self) -> usize {
        self.frame.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frame.ncols()
    }

    /// Restriction to a subset of ambient coordinates, re-orthonormalised.
    /// `None` if the projected frame loses rank.
    pub fn project(&self, rows: &[usize]) -> Option<Self> {
        let sub = DMatrix::from_fn(rows.len(), self.dim(), |r, c| self.frame[(rows[r], c)]);
        let svd = sub.svd(true, false);
        let u = svd.u?;
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > 1e-8)
            .collect();
        if keep.is_empty() {
            return None;
        }
        let frame = DMatrix::from_fn(rows.len(), keep.len(), |r, c| u[(r, keep[c])]);
        Some(Self { frame })
    }
}

/// Principal angles between two subspaces of equal ambient dimension, in
/// ascending order. Computed from the sines, which stays accurate for tiny angles.
pub fn principal_angles(a: &SubspaceRep, b: &SubspaceRep) -> Result<Vec<f64>> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: a.ambient_dim(),
            got: b.ambient_dim(),
        });
    }
    let (small, large) = if a.dim() <= b.dim() { (a, b) } else { (b, a) };
    let l = a.ambient_dim();
    let proj = DMatrix::identity(l, l) - large.frame() * large.frame().transpose();
    let residual = proj * small.frame();
    let mut sines: Vec<f64> = residual.singular_values().iter().copied().collect();
    sines.sort_by(|x, y| x.total_cmp(y));
    // cosines resolve the large angles, sines the small ones
    let cos = (large.frame().transpose() * small.frame()).singular_values();
    let mut cosines: Vec<f64> = cos.iter().copied().collect();
    cosines.sort_by(|x, y| y.total_cmp(x));
    Ok(sines
        .iter()
        .zip(cosines.iter().chain(std::iter::repeat(&0.0)))
        .map(|(&s, &c)| s.min(1.0).atan2(c.min(1.0).max(0.0)))
        .collect())
}

pub fn max_principal_angle(a: &SubspaceRep, b: &SubspaceRep) -> Result<f64> {
    Ok(principal_angles(a, b)?.into_iter().fold(0.0, f64::max))
}

/// Null space of `m` (right kernel) as an orthonormal frame, using singular
/// values below `tol * max(1, sigma_max)` as zero.
pub fn null_space(m: &DMatrix<f64>, tol: f64) -> Option<SubspaceRep> {
    let cols = m.ncols();
    // pad with zero rows so the SVD returns a full V
    let padded = if m.nrows() < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t?;
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max).max(1.0);
    let idx: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= tol * smax)
        .collect();
    if idx.is_empty() {
        return None;
    }
    let frame = DMatrix::from_fn(cols, idx.len(), |r, c| v_t[(idx[c], r)]);
    Some(SubspaceRep { frame })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn orthogonal_axes_are_a_right_angle_apart() {
        let x = SubspaceRep::coordinate(2, &[0]);
        let y = SubspaceRep::coordinate(2, &[1]);
        assert!((max_principal_angle(&x, &y).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(max_principal_angle(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn small_angles_are_resolved() {
        let t: f64 = 1e-9;
        let a = SubspaceRep::coordinate(2, &[0]);
        let b = SubspaceRep::span_of(DMatrix::from_column_slice(2, 1, &[t.cos(), t.sin()])).unwrap();
        let ang = max_principal_angle(&a, &b).unwrap();
        assert!((ang - t).abs() < 1e-20);
    }

    #[test]
    fn plane_angles_against_rotation_oracle() {
        // span{e0, cos(a) e1 + sin(a) e2} against span{e0, e1}
        let a: f64 = 0.3;
        let b = SubspaceRep::span_of(DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, a.cos(), 0.0, a.sin()])).unwrap();
        let e = SubspaceRep::coordinate(3, &[0, 1]);
        let angles = principal_angles(&e, &b).unwrap();
        assert!(angles[0].abs() < 1e-15);
        assert!((angles[1] - a).abs() < 1e-14);
    }

    #[test]
    fn null_space_of_gradient_rows() {
        let m = DMatrix::from_row_slice(1, 3, &[0.0, 0.0, 2.0]);
        let k = null_space(&m, 1e-10).unwrap();
        assert_eq!(k.dim(), 2);
        let e = SubspaceRep::coordinate(3, &[0, 1]);
        assert!(max_principal_angle(&k, &e).unwrap() < 1e-14);
    }
}
