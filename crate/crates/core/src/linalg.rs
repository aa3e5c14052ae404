//! Thin helpers over `faer` for the small dense complex matrices used here.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, Side};

use crate::error::{Error, Result};

pub use faer::c64;

/// Dense complex matrix.
pub type CMat = Mat<c64>;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const I: c64 = c64 { re: 0.0, im: 1.0 };

pub fn zeros(n: usize) -> CMat {
    Mat::zeros(n, n)
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

/// `|i><j|` in dimension `n`.
pub fn outer_basis(n: usize, i: usize, j: usize) -> CMat {
    let mut m = zeros(n);
    m[(i, j)] = ONE;
    m
}

/// `|u><v|` for column vectors given as slices.
pub fn outer(u: &[c64], v: &[c64]) -> CMat {
    Mat::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
}

pub fn dagger(a: &CMat) -> CMat {
    a.adjoint().to_owned()
}

pub fn scale(a: &CMat, k: c64) -> CMat {
    faer::Scale(k) * a
}

pub fn scale_re(a: &CMat, k: f64) -> CMat {
    scale(a, c64::new(k, 0.0))
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

pub fn trace(a: &CMat) -> c64 {
    (0..a.nrows()).map(|i| a[(i, i)]).sum()
}

/// Column-stacking vectorization.
pub fn vec_of(a: &CMat) -> Vec<c64> {
    let n = a.nrows();
    let mut v = Vec::with_capacity(n * a.ncols());
    for j in 0..a.ncols() {
        for i in 0..n {
            v.push(a[(i, j)]);
        }
    }
    v
}

/// Inverse of [`vec_of`] for a square matrix.
pub fn unvec(v: &[c64]) -> CMat {
    let n = (v.len() as f64).sqrt().round() as usize;
    assert_eq!(n * n, v.len(), "vector length is not a perfect square");
    Mat::from_fn(n, n, |i, j| v[j * n + i])
}

pub fn matvec(a: &CMat, x: &[c64]) -> Vec<c64> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum())
        .collect()
}

/// Largest absolute entry.
pub fn max_abs(a: &CMat) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm1(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `max |a - a†|`.
pub fn hermiticity_defect(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut d = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            d = d.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    d
}

/// `(a + a†)/2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    let n = a.nrows();
    Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues ascending, eigenvectors in columns.
pub fn hermitian_eigen(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("hermitian eigendecomposition: {e:?}")))?;
    let vals = evd.S().column_vector().iter().map(|z| z.re).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> Result<Vec<f64>> {
    Ok(hermitian_eigen(a)?.0)
}

/// Eigen-decomposition of a general complex matrix: `a = V diag(λ) V⁻¹`.
pub fn general_eigen(a: &CMat) -> Result<(Vec<c64>, CMat)> {
    let evd = a
        .eigen()
        .map_err(|e| Error::Linalg(format!("eigendecomposition: {e:?}")))?;
    let vals = evd.S().column_vector().iter().copied().collect();
    Ok((vals, evd.U().to_owned()))
}

pub fn inverse(a: &CMat) -> CMat {
    a.partial_piv_lu().inverse()
}

pub fn solve(a: &CMat, b: &CMat) -> CMat {
    a.partial_piv_lu().solve(b)
}

/// Right null vector of `a` from its SVD, together with the two smallest
/// singular values relative to the largest.
pub struct NullSpace {
    pub vector: Vec<c64>,
    pub smallest_rel: f64,
    pub second_smallest_rel: f64,
}

pub fn null_space(a: &CMat) -> Result<NullSpace> {
    let svd = a
        .svd()
        .map_err(|e| Error::Linalg(format!("svd: {e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().map(|z| z.re).collect();
    let n = s.len();
    let largest = s[0].max(f64::MIN_POSITIVE);
    let v = svd.V();
    let vector = (0..v.nrows()).map(|i| v[(i, n - 1)]).collect();
    Ok(NullSpace {
        vector,
        smallest_rel: s[n - 1] / largest,
        second_smallest_rel: if n >= 2 { s[n - 2] / largest } else { f64::INFINITY },
    })
}

/// Matrix exponential by scaling and squaring with a diagonal (6,6) Padé
/// approximant. The scaled matrix has 1-norm at most 1/2, for which the Padé
/// truncation error is below 4e-16.
pub fn expm(a: &CMat) -> CMat {
    const Q: usize = 6;
    let n = a.nrows();
    let norm = norm1(a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let a = scale_re(a, 0.5f64.powi(squarings));

    let mut c = 1.0;
    let mut x = identity(n);
    let mut num = identity(n);
    let mut den = identity(n);
    for k in 1..=Q {
        c *= (Q - k + 1) as f64 / (k * (2 * Q - k + 1)) as f64;
        x = &a * &x;
        let term = scale_re(&x, c);
        num = &num + &term;
        if k % 2 == 0 {
            den = &den + &term;
        } else {
            den = &den - &term;
        }
    }
    let mut e = solve(&den, &num);
    for _ in 0..squarings {
        e = &e * &e;
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_diagonal_matches_scalar_exponentials() {
        let mut a = zeros(3);
        a[(0, 0)] = c64::new(-2.0, 5.0);
        a[(1, 1)] = c64::new(0.3, 0.0);
        a[(2, 2)] = c64::new(-40.0, -100.0);
        let e = expm(&a);
        for i in 0..3 {
            let want = a[(i, i)].exp();
            assert!((e[(i, i)] - want).norm() < 1e-13 * want.norm().max(1.0));
        }
    }

    #[test]
    fn expm_of_nilpotent_is_exact_polynomial() {
        let mut a = zeros(2);
        a[(0, 1)] = c64::new(3.0, -1.0);
        let e = expm(&a);
        assert!((e[(0, 1)] - a[(0, 1)]).norm() < 1e-14);
        assert!((e[(0, 0)] - ONE).norm() < 1e-14);
        assert!(e[(1, 0)].norm() < 1e-14);
    }

    #[test]
    fn expm_rotation_generator() {
        // exp(-i θ σx) = cos θ - i sin θ σx
        let theta = 7.3;
        let mut a = zeros(2);
        a[(0, 1)] = c64::new(0.0, -theta);
        a[(1, 0)] = c64::new(0.0, -theta);
        let e = expm(&a);
        assert!((e[(0, 0)].re - theta.cos()).abs() < 1e-13);
        assert!((e[(0, 1)].im + theta.sin()).abs() < 1e-13);
    }

    #[test]
    fn vec_unvec_roundtrip_uses_column_stacking() {
        let a = Mat::from_fn(3, 3, |i, j| c64::new(i as f64, j as f64));
        let v = vec_of(&a);
        assert_eq!(v[1], c64::new(1.0, 0.0));
        assert_eq!(v[3], c64::new(0.0, 1.0));
        let b = unvec(&v);
        assert_eq!(max_abs(&(&a - &b)), 0.0);
    }

    #[test]
    fn kron_identity_structure() {
        let a = Mat::from_fn(2, 2, |i, j| c64::new((i + 2 * j) as f64, 0.0));
        let k = kron(&identity(2), &a);
        assert_eq!(k[(2, 3)], a[(0, 1)]);
        assert_eq!(k[(0, 2)], ZERO);
    }
}
