//! Canonical symplectic structure on cotangent charts.
//!
//! Coordinates on a `2n`-dimensional chart are `(q_1..q_n, p_1..p_n)`, base
//! positions first. The symplectic form is `sum dq_i ^ dp_i`, Hamiltonian
//! fields are `H_f = (df/dp, -df/dq)` and
//! `{f, g} = sum (df/dq_i dg/dp_i - df/dp_i dg/dq_i)`.
//! With this convention `H_{qp} = q d/dq - p d/dp`, so the hyperbolic leaf
//! branches are the coordinate axes.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::IntMatrix;
use crate::geometry::maps::{fd_jacobian, FD_STEP};
use crate::geometry::{Chart, ChartId, CoordMap};

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VecFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type MatFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
type TensorFn = Arc<dyn Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync>;

/// Smooth function on one chart, with an analytic gradient and optionally an
/// analytic Hessian (otherwise the Hessian is finite-differenced from the gradient).
#[derive(Clone)]
pub struct ScalarField {
    pub chart: ChartId,
    pub name: String,
    dim: usize,
    domain: Option<Chart>,
    value: ValueFn,
    gradient: VecFn,
    hessian: Option<MatFn>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({} on {}, dim {})", self.name, self.chart, self.dim)
    }
}

impl ScalarField {
    pub fn new(
        chart: impl Into<ChartId>,
        name: impl Into<String>,
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            chart: chart.into(),
            name: name.into(),
            dim,
            domain: None,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: None,
        }
    }

    pub fn with_hessian(mut self, hessian: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.hessian = Some(Arc::new(hessian));
        self
    }

    /// Attaches a domain; evaluation through the checked operations then
    /// rejects points outside it.
    pub fn restricted_to(mut self, chart: &Chart) -> Self {
        self.chart = chart.id.clone();
        self.domain = Some(chart.clone());
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// `c . z + z^T A z`.
    pub fn quadratic(chart: impl Into<ChartId>, name: impl Into<String>, linear: Vec<f64>, quad: DMatrix<f64>) -> Self {
        let dim = linear.len();
        assert_eq!(quad.shape(), (dim, dim));
        let sym = &quad + quad.transpose();
        let c = DVector::from_vec(linear);
        let (c1, c2, a) = (c.clone(), c.clone(), quad.clone());
        let (s1, s2) = (sym.clone(), sym.clone());
        Self::new(
            chart,
            name,
            dim,
            move |z| {
                let v = DVector::from_column_slice(z);
                c1.dot(&v) + v.dot(&(&a * &v))
            },
            move |z| {
                let v = DVector::from_column_slice(z);
                (&c2 + &s1 * v).iter().copied().collect()
            },
        )
        .with_hessian(move |_| s2.clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Option<&Chart> {
        self.domain.as_ref()
    }

    pub fn has_analytic_hessian(&self) -> bool {
        self.hessian.is_some()
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        (self.value)(z)
    }

    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        (self.gradient)(z)
    }

    pub fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        match &self.hessian {
            Some(h) => h(z),
            None => {
                let h = fd_jacobian(|x| self.gradient(x), z, FD_STEP);
                (&h + h.transpose()) * 0.5
            }
        }
    }

    pub fn check(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: z.len(),
            });
        }
        if let Some(c) = &self.domain {
            c.check(z)?;
        }
        Ok(())
    }

    /// Largest deviation between the analytic gradient and central differences of the value.
    pub fn gradient_fd_error(&self, z: &[f64]) -> f64 {
        let fd = fd_jacobian(|x| vec![self.value(x)], z, FD_STEP);
        self.gradient(z)
            .iter()
            .enumerate()
            .map(|(i, g)| (g - fd[(0, i)]).abs())
            .fold(0.0, f64::max)
    }

    pub fn product(&self, other: &Self) -> Self {
        let (a, b) = (self.clone(), other.clone());
        let (a2, b2) = (self.clone(), other.clone());
        let field = Self::new(
            self.chart.clone(),
            format!("({})*({})", self.name, other.name),
            self.dim,
            move |z| a.value(z) * b.value(z),
            move |z| {
                let (fa, fb) = (a2.value(z), b2.value(z));
                a2.gradient(z)
                    .iter()
                    .zip(b2.gradient(z))
                    .map(|(ga, gb)| fb * ga + fa * gb)
                    .collect()
            },
        );
        if self.hessian.is_some() && other.hessian.is_some() {
            let (a, b) = (self.clone(), other.clone());
            field.with_hessian(move |z| {
                let (fa, fb) = (a.value(z), b.value(z));
                let ga = DVector::from_vec(a.gradient(z));
                let gb = DVector::from_vec(b.gradient(z));
                a.hessian(z) * fb + b.hessian(z) * fa + &ga * gb.transpose() + &gb * ga.transpose()
            })
        } else {
            field
        }
    }

    /// `sum c_i f_i` over fields on a common chart.
    pub fn linear_combination(fields: &[ScalarField], coeffs: &[f64]) -> Self {
        assert_eq!(fields.len(), coeffs.len());
        assert!(!fields.is_empty());
        let dim = fields[0].dim;
        let fs: Vec<ScalarField> = fields.to_vec();
        let cs: Vec<f64> = coeffs.to_vec();
        let (f1, c1) = (fs.clone(), cs.clone());
        let (f2, c2) = (fs.clone(), cs.clone());
        let combo = Self::new(
            fields[0].chart.clone(),
            "combination",
            dim,
            move |z| f1.iter().zip(&c1).map(|(f, c)| c * f.value(z)).sum(),
            move |z| {
                let mut g = vec![0.0; z.len()];
                for (f, c) in f2.iter().zip(&c2) {
                    for (gi, fi) in g.iter_mut().zip(f.gradient(z)) {
                        *gi += c * fi;
                    }
                }
                g
            },
        );
        if fs.iter().all(|f| f.hessian.is_some()) {
            combo.with_hessian(move |z| {
                let mut h = DMatrix::zeros(dim, dim);
                for (f, c) in fs.iter().zip(&cs) {
                    h += f.hessian(z) * *c;
                }
                h
            })
        } else {
            combo
        }
    }
}

/// Smooth vector field on one chart with analytic Jacobian and, optionally,
/// the Hessians of its components.
#[derive(Clone)]
pub struct VectorField {
    pub chart: ChartId,
    pub name: String,
    dim: usize,
    value: VecFn,
    jacobian: MatFn,
    second: Option<TensorFn>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorField({} on {}, dim {})", self.name, self.chart, self.dim)
    }
}

impl VectorField {
    pub fn new(
        chart: impl Into<ChartId>,
        name: impl Into<String>,
        dim: usize,
        value: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        jacobian: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            chart: chart.into(),
            name: name.into(),
            dim,
            value: Arc::new(value),
            jacobian: Arc::new(jacobian),
            second: None,
        }
    }

    pub fn with_second_derivatives(
        mut self,
        second: impl Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.second = Some(Arc::new(second));
        self
    }

    /// `X(q) = A q`.
    pub fn linear(chart: impl Into<ChartId>, name: impl Into<String>, a: DMatrix<f64>) -> Self {
        let dim = a.nrows();
        let (a1, a2) = (a.clone(), a);
        Self::new(
            chart,
            name,
            dim,
            move |q| (&a1 * DVector::from_column_slice(q)).iter().copied().collect(),
            move |_| a2.clone(),
        )
        .with_second_derivatives(move |_| vec![DMatrix::zeros(dim, dim); dim])
    }

    pub fn constant(chart: impl Into<ChartId>, name: impl Into<String>, v: Vec<f64>) -> Self {
        let dim = v.len();
        Self::new(chart, name, dim, move |_| v.clone(), move |_| DMatrix::zeros(dim, dim))
            .with_second_derivatives(move |_| vec![DMatrix::zeros(dim, dim); dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, q: &[f64]) -> Vec<f64> {
        (self.value)(q)
    }

    pub fn jacobian(&self, q: &[f64]) -> DMatrix<f64> {
        (self.jacobian)(q)
    }

    pub fn second_derivatives(&self, q: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        self.second.as_ref().map(|s| s(q))
    }

    pub fn has_second_derivatives(&self) -> bool {
        self.second.is_some()
    }
}

pub fn standard_j(n: usize) -> DMatrix<f64> {
    IntMatrix::standard_symplectic(n).to_dmatrix()
}

fn half_dim(dim: usize) -> Result<usize> {
    if dim == 0 || dim % 2 != 0 {
        return Err(Error::DimensionMismatch {
            expected: dim + dim % 2,
            got: dim,
        });
    }
    Ok(dim / 2)
}

pub fn hamiltonian_from_gradient(grad: &[f64]) -> Vec<f64> {
    let n = grad.len() / 2;
    let (dq, dp) = grad.split_at(n);
    dp.iter().copied().chain(dq.iter().map(|v| -v)).collect()
}

/// `H_f(z) = (df/dp, -df/dq)`.
pub fn hamiltonian_vector_field(f: &ScalarField, z: &[f64]) -> Result<Vec<f64>> {
    half_dim(f.dim())?;
    f.check(z)?;
    Ok(hamiltonian_from_gradient(&f.gradient(z)))
}

pub fn bracket_from_gradients(df: &[f64], dg: &[f64]) -> f64 {
    let n = df.len() / 2;
    (0..n).map(|i| df[i] * dg[n + i] - df[n + i] * dg[i]).sum()
}

/// Canonical Poisson bracket `{f, g}(z)`.
pub fn poisson_bracket(f: &ScalarField, g: &ScalarField, z: &[f64]) -> Result<f64> {
    if f.chart != g.chart {
        return Err(Error::ChartMismatch {
            left: f.chart.to_string(),
            right: g.chart.to_string(),
        });
    }
    if f.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: g.dim(),
        });
    }
    half_dim(f.dim())?;
    f.check(z)?;
    g.check(z)?;
    Ok(bracket_from_gradients(&f.gradient(z), &g.gradient(z)))
}

/// Pairing of a covector with a base tangent vector, `sum p_i v_i`.
pub fn liouville_eval(vector: &[f64], covector: &[f64]) -> Result<f64> {
    if vector.len() != covector.len() {
        return Err(Error::DimensionMismatch {
            expected: vector.len(),
            got: covector.len(),
        });
    }
    Ok(vector.iter().zip(covector).map(|(v, p)| v * p).sum())
}

#[derive(Debug, Clone, Serialize)]
pub struct SymplecticReport {
    pub samples: usize,
    pub max_error: f64,
    pub tolerance: f64,
    /// True when the check was carried out in integer arithmetic.
    pub exact: bool,
    pub passed: bool,
}

/// `max |D^T J D - J|` over sampled points, Jacobians analytic when available.
pub fn is_symplectomorphism(map: &dyn CoordMap, samples: &[Vec<f64>], tol: f64) -> Result<SymplecticReport> {
    if map.dim_in() != map.dim_out() {
        return Err(Error::DimensionMismatch {
            expected: map.dim_in(),
            got: map.dim_out(),
        });
    }
    let n = half_dim(map.dim_in())?;
    let j = standard_j(n);
    let mut max_error: f64 = 0.0;
    for z in samples {
        let d = map
            .jacobian(z)
            .unwrap_or_else(|| fd_jacobian(|x| map.apply(x), z, FD_STEP));
        max_error = max_error.max((d.transpose() * &j * &d - &j).amax());
    }
    Ok(SymplecticReport {
        samples: samples.len(),
        max_error,
        tolerance: tol,
        exact: false,
        passed: max_error <= tol,
    })
}

/// Exact check for a linear map given by its integer coefficient matrix.
pub fn is_linear_symplectomorphism(m: &IntMatrix) -> Result<SymplecticReport> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    half_dim(m.nrows())?;
    let defect = m.symplectic_defect().unwrap_or(i64::MAX);
    Ok(SymplecticReport {
        samples: 1,
        max_error: defect as f64,
        tolerance: 0.0,
        exact: true,
        passed: defect == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{FnMap, IdentityMap, IntLinearMap};
    use proptest::prelude::*;

    fn quad2(lin: [f64; 2], a: [f64; 4]) -> ScalarField {
        ScalarField::quadratic("R2", "f", lin.to_vec(), DMatrix::from_row_slice(2, 2, &a))
    }

    fn fd_hamiltonian(f: &ScalarField, z: &[f64]) -> Vec<f64> {
        let g = fd_jacobian(|x| vec![f.value(x)], z, FD_STEP);
        let grad: Vec<f64> = (0..z.len()).map(|i| g[(0, i)]).collect();
        (standard_j(z.len() / 2) * DVector::from_vec(grad)).iter().copied().collect()
    }

    #[test]
    fn hamiltonian_fields_of_normal_forms() {
        let regular = quad2([0.0, 1.0], [0.0; 4]);
        assert_eq!(hamiltonian_vector_field(&regular, &[0.3, -2.0]).unwrap(), vec![1.0, 0.0]);

        let hyperbolic = quad2([0.0, 0.0], [0.0, 1.0, 0.0, 0.0]);
        let h = hamiltonian_vector_field(&hyperbolic, &[2.0, 3.0]).unwrap();
        assert_eq!(h, vec![2.0, -3.0]);
        let fd = fd_hamiltonian(&hyperbolic, &[2.0, 3.0]);
        assert!((fd[0] - 2.0).abs() < 1e-8 && (fd[1] + 3.0).abs() < 1e-8);

        let elliptic = quad2([0.0, 0.0], [1.0, 0.0, 0.0, 1.0]);
        let h = hamiltonian_vector_field(&elliptic, &[1.0, 0.0]).unwrap();
        assert_eq!(h, vec![0.0, -2.0]);
        let fd = fd_hamiltonian(&elliptic, &[1.0, 0.0]);
        assert!(fd[0].abs() < 1e-8 && (fd[1] + 2.0).abs() < 1e-8);
    }

    #[test]
    fn canonical_pair_bracket() {
        let q = quad2([1.0, 0.0], [0.0; 4]);
        let p = quad2([0.0, 1.0], [0.0; 4]);
        for z in [[0.0, 0.0], [1.5, -3.0]] {
            assert_eq!(poisson_bracket(&q, &p, &z).unwrap(), 1.0);
            assert_eq!(poisson_bracket(&q, &q, &z).unwrap(), 0.0);
        }
    }

    #[test]
    fn bracket_rejects_mismatched_charts() {
        let f = quad2([1.0, 0.0], [0.0; 4]);
        let g = ScalarField::quadratic("other", "g", vec![0.0, 1.0], DMatrix::zeros(2, 2));
        assert!(matches!(poisson_bracket(&f, &g, &[0.0, 0.0]), Err(Error::ChartMismatch { .. })));
    }

    #[test]
    fn restricted_field_rejects_outside_points() {
        let chart = Chart::cube("box", "", 2, 1.0).unwrap();
        let f = quad2([0.0, 1.0], [0.0; 4]).restricted_to(&chart);
        assert!(matches!(hamiltonian_vector_field(&f, &[2.0, 0.0]), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn liouville_pairing() {
        assert_eq!(liouville_eval(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(liouville_eval(&[1.0, 0.0], &[3.0, 7.0]).unwrap(), 3.0);
        // X = q d/dq at q = 2, paired with p = 0.5
        assert_eq!(liouville_eval(&[2.0], &[0.5]).unwrap(), 1.0);
        assert!(liouville_eval(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn symplectomorphism_checks() {
        let id = is_symplectomorphism(&IdentityMap(2), &[vec![0.1, 0.2]], 1e-12).unwrap();
        assert_eq!(id.max_error, 0.0);

        let turn = IntMatrix::from_rows(&[&[0, -1], &[1, 0]]);
        let r = is_linear_symplectomorphism(&turn).unwrap();
        assert!(r.passed && r.exact && r.max_error == 0.0);
        let r = is_symplectomorphism(&IntLinearMap(turn), &[vec![2.0, 0.5]], 0.0).unwrap();
        assert!(r.passed);

        let scale = IntMatrix::from_rows(&[&[2, 0], &[0, 1]]);
        let r = is_linear_symplectomorphism(&scale).unwrap();
        assert!(!r.passed && r.max_error == 1.0);
        let r = is_symplectomorphism(&FnMap::new("scale", 2, 2, |z| vec![2.0 * z[0], z[1]]), &[vec![0.3, 0.1]], 1e-6)
            .unwrap();
        assert!(!r.passed && (r.max_error - 1.0).abs() < 1e-6);

        let odd = FnMap::new("odd", 3, 3, |z| z.to_vec());
        assert!(is_symplectomorphism(&odd, &[], 1e-6).is_err());
        let uneven = FnMap::new("uneven", 2, 4, |z| z.to_vec());
        assert!(is_symplectomorphism(&uneven, &[], 1e-6).is_err());
    }

    fn poly_field(c: [f64; 4], a: [f64; 16]) -> ScalarField {
        ScalarField::quadratic("R4", "poly", c.to_vec(), DMatrix::from_row_slice(4, 4, &a))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn bracket_is_antisymmetric_and_leibniz(
            c1 in prop::array::uniform4(-2.0..2.0f64),
            a1 in prop::array::uniform16(-2.0..2.0f64),
            c2 in prop::array::uniform4(-2.0..2.0f64),
            a2 in prop::array::uniform16(-2.0..2.0f64),
            c3 in prop::array::uniform4(-2.0..2.0f64),
            z in prop::array::uniform4(-2.0..2.0f64),
        ) {
            let f = poly_field(c1, a1);
            let g = poly_field(c2, a2);
            let h = poly_field(c3, [0.0; 16]);
            let fg = poisson_bracket(&f, &g, &z).unwrap();
            let gf = poisson_bracket(&g, &f, &z).unwrap();
            prop_assert!((fg + gf).abs() <= 1e-12);

            let gh = g.product(&h);
            let lhs = poisson_bracket(&f, &gh, &z).unwrap();
            let rhs = g.value(&z) * poisson_bracket(&f, &h, &z).unwrap() + h.value(&z) * fg;
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));

            // {f, g} = df(H_g) = -dg(H_f)
            let hg = hamiltonian_vector_field(&g, &z).unwrap();
            let df: f64 = f.gradient(&z).iter().zip(&hg).map(|(a, b)| a * b).sum();
            prop_assert!((fg - df).abs() <= 1e-9);
            let hf = hamiltonian_vector_field(&f, &z).unwrap();
            let dg: f64 = g.gradient(&z).iter().zip(&hf).map(|(a, b)| a * b).sum();
            prop_assert!((fg + dg).abs() <= 1e-9);

            prop_assert!(f.gradient_fd_error(&z) <= 1e-5);
            prop_assert!(gh.gradient_fd_error(&z) <= 1e-5);
        }
    }
}
