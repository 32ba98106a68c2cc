//! Coordinate maps used as chart transitions.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::exact::IntMatrix;

/// Central finite-difference step used by every Jacobian and gradient oracle.
pub const FD_STEP: f64 = 1e-6;

pub trait CoordMap: Send + Sync + fmt::Debug {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;

    /// Analytic Jacobian, when the map provides one.
    fn jacobian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
}

pub fn fd_jacobian<F>(f: F, x: &[f64], step: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let m = f(x).len();
    let mut jac = DMatrix::zeros(m, x.len());
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        xp[j] = x[j] + step;
        let fp = f(&xp);
        xp[j] = x[j] - step;
        let fm = f(&xp);
        xp[j] = x[j];
        for i in 0..m {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
        }
    }
    jac
}

#[derive(Debug, Clone)]
pub struct IdentityMap(pub usize);

impl CoordMap for IdentityMap {
    fn dim_in(&self) -> usize {
        self.0
    }
    fn dim_out(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
    fn jacobian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::identity(self.0, self.0))
    }
}

/// `x -> A x + b`.
#[derive(Debug, Clone)]
pub struct AffineMap {
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl AffineMap {
    pub fn new(matrix: DMatrix<f64>, offset: DVector<f64>) -> Self {
        assert_eq!(matrix.nrows(), offset.len());
        Self { matrix, offset }
    }

    pub fn translation(offset: Vec<f64>) -> Self {
        let n = offset.len();
        Self::new(DMatrix::identity(n, n), DVector::from_vec(offset))
    }

    /// Inverse map; panics if the matrix is singular.
    pub fn inverse(&self) -> Self {
        let inv = self
            .matrix
            .clone()
            .try_inverse()
            .expect("affine transition must be invertible");
        let offset = -(&inv * &self.offset);
        Self::new(inv, offset)
    }
}

impl CoordMap for AffineMap {
    fn dim_in(&self) -> usize {
        self.matrix.ncols()
    }
    fn dim_out(&self) -> usize {
        self.matrix.nrows()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let y = &self.matrix * DVector::from_column_slice(x) + &self.offset;
        y.iter().copied().collect()
    }
    fn jacobian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        Some(self.matrix.clone())
    }
}

/// Linear map with an exact integer coefficient matrix.
#[derive(Debug, Clone)]
pub struct IntLinearMap(pub IntMatrix);

impl CoordMap for IntLinearMap {
    fn dim_in(&self) -> usize {
        self.0.ncols()
    }
    fn dim_out(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.0.apply(x)
    }
    fn jacobian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        Some(self.0.to_dmatrix())
    }
}

type VecFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type MatFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Closure-backed map, mostly for tests and ad-hoc transitions.
#[derive(Clone)]
pub struct FnMap {
    name: String,
    dim_in: usize,
    dim_out: usize,
    f: VecFn,
    jac: Option<MatFn>,
}

impl FnMap {
    pub fn new(
        name: impl Into<String>,
        dim_in: usize,
        dim_out: usize,
        f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim_in,
            dim_out,
            f: Arc::new(f),
            jac: None,
        }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.jac = Some(Arc::new(jac));
        self
    }
}

impl fmt::Debug for FnMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnMap({})", self.name)
    }
}

impl CoordMap for FnMap {
    fn dim_in(&self) -> usize {
        self.dim_in
    }
    fn dim_out(&self) -> usize {
        self.dim_out
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }
    fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        self.jac.as_ref().map(|j| j(x))
    }
}

/// A diffeomorphism between base charts, with enough derivatives to lift it
/// to the cotangent bundle.
pub trait BaseMap: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn apply(&self, q: &[f64]) -> Vec<f64>;
    fn inverse(&self, x: &[f64]) -> Vec<f64>;
    fn jacobian(&self, q: &[f64]) -> DMatrix<f64>;
    /// `d_j[k]` is the derivative of the Jacobian with respect to `q_k`.
    fn jacobian_derivatives(&self, q: &[f64]) -> Vec<DMatrix<f64>>;
}

/// Canonical cotangent lift `(q, p) -> (F(q), DF(q)^{-T} p)`.
#[derive(Debug, Clone)]
pub struct CotangentLift {
    base: Arc<dyn BaseMap>,
}

/// Inverse of [`CotangentLift`]: `(x, P) -> (G(x), DF(G(x))^T P)`.
#[derive(Debug, Clone)]
pub struct CotangentLiftInverse {
    base: Arc<dyn BaseMap>,
}

impl CotangentLift {
    pub fn new(base: Arc<dyn BaseMap>) -> Self {
        Self { base }
    }

    pub fn inverse(&self) -> CotangentLiftInverse {
        CotangentLiftInverse {
            base: self.base.clone(),
        }
    }

    fn full_jacobian(base: &dyn BaseMap, q: &[f64], p: &[f64]) -> DMatrix<f64> {
        let n = base.dim();
        let jac = base.jacobian(q);
        let jinv_t = jac
            .clone()
            .try_inverse()
            .expect("base transition jacobian must be invertible")
            .transpose();
        let pv = DVector::from_column_slice(p);
        let new_p = &jinv_t * &pv;
        let mut out = DMatrix::zeros(2 * n, 2 * n);
        out.view_mut((0, 0), (n, n)).copy_from(&jac);
        out.view_mut((n, n), (n, n)).copy_from(&jinv_t);
        for (k, dj) in base.jacobian_derivatives(q).iter().enumerate() {
            let col = -(&jinv_t * dj.transpose() * &new_p);
            out.view_mut((n, k), (n, 1)).copy_from(&col);
        }
        out
    }
}

impl CoordMap for CotangentLift {
    fn dim_in(&self) -> usize {
        2 * self.base.dim()
    }
    fn dim_out(&self) -> usize {
        2 * self.base.dim()
    }
    fn apply(&self, z: &[f64]) -> Vec<f64> {
        let n = self.base.dim();
        let (q, p) = z.split_at(n);
        let jac = self.base.jacobian(q);
        let p_new = jac
            .transpose()
            .lu()
            .solve(&DVector::from_column_slice(p))
            .unwrap_or_else(|| DVector::from_element(n, f64::NAN));
        let mut out = self.base.apply(q);
        out.extend(p_new.iter());
        out
    }
    fn jacobian(&self, z: &[f64]) -> Option<DMatrix<f64>> {
        let n = self.base.dim();
        let (q, p) = z.split_at(n);
        Some(Self::full_jacobian(self.base.as_ref(), q, p))
    }
}

impl CoordMap for CotangentLiftInverse {
    fn dim_in(&self) -> usize {
        2 * self.base.dim()
    }
    fn dim_out(&self) -> usize {
        2 * self.base.dim()
    }
    fn apply(&self, z: &[f64]) -> Vec<f64> {
        let n = self.base.dim();
        let (x, big_p) = z.split_at(n);
        let q = self.base.inverse(x);
        let p = self.base.jacobian(&q).transpose() * DVector::from_column_slice(big_p);
        let mut out = q;
        out.extend(p.iter());
        out
    }
    fn jacobian(&self, z: &[f64]) -> Option<DMatrix<f64>> {
        let n = self.base.dim();
        let pre = self.apply(z);
        let (q, p) = pre.split_at(n);
        CotangentLift::full_jacobian(self.base.as_ref(), q, p).try_inverse()
    }
}
