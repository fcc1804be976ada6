//! Dense small-matrix numerics.
//!
//! Matrices here are tiny (n ≤ 8 in practice), so everything favours accuracy
//! over speed: the skew exponential uses scaling-and-squaring with an
//! order-18 Taylor core, and numerical spans go through a full SVD.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite real n×n matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix(DMatrix<f64>);

impl SquareMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        if m.nrows() == 0 {
            return Err(Error::EmptyInput);
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(m))
    }

    /// Builds an n×n matrix from `n*n` reals in row-major order.
    pub fn from_row_major(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: entries.len() });
        }
        Self::new(DMatrix::from_row_slice(n, n, entries))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * s)
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self(&self.0 + &other.0))
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self(&self.0 - &other.0))
    }

    pub fn try_matmul(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self(&self.0 * &other.0))
    }

    /// Product for operands already known to share a dimension.
    pub(crate) fn matmul(&self, other: &Self) -> Self {
        Self(&self.0 * &other.0)
    }

    /// `M v` written into a caller-owned buffer.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let mut acc = 0.0;
            for (j, vj) in v.iter().enumerate().take(n) {
                acc += self.0[(i, j)] * vj;
            }
            *o = acc;
        }
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.0 * v
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    /// Max-entry norm.
    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    /// Max-entry distance to another matrix of the same size.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(other.0.iter()).fold(0.0, |acc, (a, b)| f64::max(acc, (a - b).abs()))
    }

    /// `max |A + Aᵀ|`.
    pub fn skew_defect(&self) -> f64 {
        (&self.0 + self.0.transpose()).amax()
    }

    /// `max |MᵀM - I|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.dim();
        (self.0.transpose() * &self.0 - DMatrix::<f64>::identity(n, n)).amax()
    }

    /// Spectral norm (largest singular value).
    pub fn operator_norm(&self) -> f64 {
        self.0.singular_values().max()
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(())
    }
}

impl Serialize for SquareMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_row_major().serialize(s)
    }
}

/// Orthonormal basis of a numerical span.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubspaceBasis {
    pub n: usize,
    #[serde(with = "crate::vecser::vectors")]
    pub vectors: Vec<DVector<f64>>,
    pub dim: usize,
    pub sigma_threshold: f64,
    /// Singular values of the spanning set divided by the largest one,
    /// in decreasing order (all of them, not just the retained ones).
    pub relative_singular_values: Vec<f64>,
}

impl SubspaceBasis {
    /// Distance from `x` to the subspace.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        let mut r = x.clone();
        for b in &self.vectors {
            let c = b.dot(x);
            r.axpy(-c, b, 1.0);
        }
        r.norm()
    }
}

/// `exp(tA)` for skew-symmetric `A`.
///
/// Scaling-and-squaring: `tA` is scaled by `2^-s` until its 1-norm is at most
/// 1/2, exponentiated with an order-18 Taylor polynomial and squared back.
pub fn exp_skew(a: &SquareMatrix, t: f64) -> Result<SquareMatrix> {
    let defect = a.skew_defect();
    if defect > crate::tolerances::SKEW_TOL {
        return Err(Error::NotSkewSymmetric { defect });
    }
    if !t.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(SquareMatrix(expm_taylor(&(a.as_matrix() * t))))
}

pub(crate) fn expm_taylor(b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = b.nrows();
    let norm1 = (0..n).map(|j| b.column(j).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    if norm1 == 0.0 {
        return DMatrix::identity(n, n);
    }
    let squarings = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as i32 } else { 0 };
    let c = b / 2f64.powi(squarings);
    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=18 {
        term = &term * &c / k as f64;
        sum += &term;
        if term.amax() < 1e-20 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// `[A, B] = AB - BA`.
pub fn commutator(a: &SquareMatrix, b: &SquareMatrix) -> Result<SquareMatrix> {
    a.check_same_dim(b)?;
    Ok(SquareMatrix(a.as_matrix() * b.as_matrix() - b.as_matrix() * a.as_matrix()))
}

/// Orthonormal basis of the numerical column span of `vectors`.
///
/// The dimension counts singular values above `sigma_threshold` times the
/// largest singular value.
pub fn span_basis(vectors: &[DVector<f64>], sigma_threshold: f64) -> Result<SubspaceBasis> {
    let first = vectors.first().ok_or(Error::EmptyInput)?;
    let n = first.len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: bad.len() });
    }
    if !(sigma_threshold > 0.0) {
        return Err(Error::BadParams(format!("sigma_threshold must be positive, got {sigma_threshold}")));
    }
    // The left singular vectors of X (n×m) are the eigenvectors of X Xᵀ; going
    // through the n×n Gram matrix keeps wide inputs cheap but squares the
    // conditioning, so the SVD of X itself is used whenever it is small.
    let (u, sigma) = if vectors.len() <= 4 * n.max(8) {
        let x = DMatrix::from_columns(vectors);
        let svd = x.svd(true, false);
        (svd.u.expect("u requested"), svd.singular_values.iter().copied().collect::<Vec<_>>())
    } else {
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for v in vectors {
            gram.ger(1.0, v, v, 1.0);
        }
        let svd = gram.svd(true, false);
        (
            svd.u.expect("u requested"),
            svd.singular_values.iter().map(|s| s.max(0.0).sqrt()).collect::<Vec<_>>(),
        )
    };
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]).then(i.cmp(&j)));
    let smax = order.first().map(|&i| sigma[i]).unwrap_or(0.0);
    let relative: Vec<f64> = order.iter().map(|&i| if smax > 0.0 { sigma[i] / smax } else { 0.0 }).collect();
    let dim = if smax > 0.0 { relative.iter().filter(|&&s| s > sigma_threshold).count() } else { 0 };
    let basis = order.iter().take(dim).map(|&i| u.column(i).into_owned()).collect();
    Ok(SubspaceBasis { n, vectors: basis, dim, sigma_threshold, relative_singular_values: relative })
}

/// `‖MᵀM − I‖_max ≤ tol`.
pub fn is_orthogonal(m: &SquareMatrix, tol: f64) -> bool {
    m.orthogonality_defect() <= tol
}

/// Planar rotation by `angle`.
pub fn rotation2(angle: f64) -> SquareMatrix {
    let (s, c) = angle.sin_cos();
    SquareMatrix(DMatrix::from_row_slice(2, 2, &[c, -s, s, c]))
}

/// Block-diagonal matrix assembled from square blocks.
pub fn block_diag(blocks: &[SquareMatrix]) -> SquareMatrix {
    let n: usize = blocks.iter().map(SquareMatrix::dim).sum();
    let mut m = DMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        let k = b.dim();
        m.view_mut((off, off), (k, k)).copy_from(b.as_matrix());
        off += k;
    }
    SquareMatrix(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn m1() -> SquareMatrix {
        SquareMatrix::from_row_major(4, &[0., 0., 0., 0., 0., 0., 0., 0., 0., 0., 0., 1., 0., 0., -1., 0.]).unwrap()
    }

    /// Plain power series, no scaling; only used as an oracle.
    fn power_series_exp(a: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let mut sum = DMatrix::identity(n, n);
        let mut term = DMatrix::identity(n, n);
        for k in 1..80 {
            term = &term * a / k as f64;
            sum += &term;
        }
        sum
    }

    #[test]
    fn exp_of_zero_is_identity() {
        for n in 1..5 {
            let e = exp_skew(&SquareMatrix::zeros(n), 3.7).unwrap();
            assert_eq!(e, SquareMatrix::identity(n));
        }
    }

    #[test]
    fn exp_planar_quarter_turn() {
        let j = SquareMatrix::from_row_major(2, &[0., -1., 1., 0.]).unwrap();
        let e = exp_skew(&j, PI / 2.0).unwrap();
        assert!(e.max_abs_diff(&rotation2(PI / 2.0)) < 1e-15);
        assert!((e.get(0, 1) + 1.0).abs() < 1e-15 && (e.get(1, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exp_m1_half_turn_matches_power_series() {
        let e = exp_skew(&m1(), PI).unwrap();
        let oracle = power_series_exp(&(m1().as_matrix() * PI));
        assert!((e.as_matrix() - &oracle).amax() < 1e-12);
        let expected = block_diag(&[SquareMatrix::identity(2), SquareMatrix::identity(2).scale(-1.0)]);
        assert!(e.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn exp_rejects_non_skew() {
        let a = SquareMatrix::from_row_major(2, &[0., 1., 1., 0.]).unwrap();
        assert!(matches!(exp_skew(&a, 1.0), Err(Error::NotSkewSymmetric { .. })));
    }

    #[test]
    fn commutator_cases() {
        let a = m1();
        assert_eq!(commutator(&a, &a).unwrap().max_abs(), 0.0);
        let b = SquareMatrix::identity(3);
        assert!(matches!(commutator(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn span_examples() {
        let v = |xs: &[f64]| DVector::from_column_slice(xs);
        assert_eq!(span_basis(&[v(&[1., 0., 0.])], 1e-8).unwrap().dim, 1);
        assert_eq!(span_basis(&[v(&[1., 0.]), v(&[1., 1e-14])], 1e-8).unwrap().dim, 1);
        let b = span_basis(&[v(&[1., 0., 0., 0.]), v(&[0., 1., 0., 0.]), v(&[1., 1., 0., 0.])], 1e-8).unwrap();
        assert_eq!(b.dim, 2);
        assert!(matches!(span_basis(&[], 1e-8), Err(Error::EmptyInput)));
    }

    #[test]
    fn span_wide_input_uses_same_threshold() {
        let vs: Vec<DVector<f64>> = (0..200)
            .map(|k| {
                let t = k as f64 * 0.1;
                DVector::from_column_slice(&[t.cos(), t.sin(), 0.0])
            })
            .collect();
        let b = span_basis(&vs, 1e-8).unwrap();
        assert_eq!(b.dim, 2);
        assert!(b.residual(&DVector::from_column_slice(&[0.6, 0.8, 0.0])) < 1e-12);
    }

    #[test]
    fn orthogonality_checks() {
        assert!(is_orthogonal(&SquareMatrix::identity(3), 1e-12));
        let d = SquareMatrix::from_row_major(2, &[2., 0., 0., 1.]).unwrap();
        assert!(!is_orthogonal(&d, 1e-8));
    }

    #[test]
    fn rejects_nan() {
        assert!(matches!(SquareMatrix::from_row_major(1, &[f64::NAN]), Err(Error::NonFinite)));
    }
}
