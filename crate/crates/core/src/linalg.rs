//! Dense real (and, where evaluation on the unit circle needs it, complex)
//! linear-algebra kernels.
//!
//! Matrices are `nalgebra::DMatrix` values. Factorizations that carry a
//! contract (pivot thresholds, convergence limits) are implemented here;
//! the rest is delegated to nalgebra.

use nalgebra::{ComplexField, DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

pub type Matrix = DMatrix<f64>;
pub type CMatrix = DMatrix<Complex64>;

/// Absolute floor applied to every relative tolerance.
pub const ABS_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is singular to working precision (pivot {pivot:e})")]
    SingularMatrix { pivot: f64 },
    #[error("QR iteration did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("spectra overlap (min eigenvalue gap {gap:e})")]
    SpectraOverlap { gap: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix contains non-finite entries")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Builds a matrix from row slices. Panics on ragged input; meant for
/// literals in code and tests.
pub fn mat(rows: &[&[f64]]) -> Matrix {
    let r = rows.len();
    let c = if r == 0 { 0 } else { rows[0].len() };
    Matrix::from_fn(r, c, |i, j| {
        assert_eq!(rows[i].len(), c, "ragged matrix literal");
        rows[i][j]
    })
}

pub fn is_finite<T: ComplexField<RealField = f64> + Copy>(a: &DMatrix<T>) -> bool {
    a.iter().all(|v| v.modulus().is_finite())
}

fn frobenius<T: ComplexField<RealField = f64> + Copy>(a: &DMatrix<T>) -> f64 {
    a.iter().map(|v| v.modulus_squared()).sum::<f64>().sqrt()
}

/// LU factorization with partial pivoting, `P·A = L·U`, stored compactly.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: DMatrix<T>,
    perm: Vec<usize>,
    min_pivot: f64,
}

impl<T: ComplexField<RealField = f64> + Copy> Lu<T> {
    /// Factors `a`; fails when a pivot magnitude drops below `rel_tol·‖a‖_F`.
    pub fn new(a: &DMatrix<T>, rel_tol: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(LinalgError::DimensionMismatch(format!(
                "LU of non-square {}x{} matrix",
                n,
                a.ncols()
            )));
        }
        if !is_finite(a) {
            return Err(LinalgError::NonFinite);
        }
        let threshold = (rel_tol * frobenius(a)).max(ABS_FLOOR);
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].modulus();
            for i in k + 1..n {
                let v = lu[(i, k)].modulus();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            min_pivot = min_pivot.min(best);
            if best < threshold {
                return Err(LinalgError::SingularMatrix { pivot: best });
            }
            if p != k {
                lu.swap_rows(p, k);
                perm.swap(p, k);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor.modulus() == 0.0 {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= factor * u;
                }
            }
        }
        Ok(Self { lu, perm, min_pivot })
    }

    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve(&self, b: &DMatrix<T>) -> Result<DMatrix<T>> {
        let n = self.lu.nrows();
        if b.nrows() != n {
            return Err(LinalgError::DimensionMismatch(format!(
                "right-hand side has {} rows, expected {}",
                b.nrows(),
                n
            )));
        }
        let mut x = DMatrix::<T>::from_fn(n, b.ncols(), |i, j| b[(self.perm[i], j)]);
        for col in 0..x.ncols() {
            for i in 0..n {
                let mut s = x[(i, col)];
                for k in 0..i {
                    let l = self.lu[(i, k)];
                    if l.modulus() != 0.0 {
                        s -= l * x[(k, col)];
                    }
                }
                x[(i, col)] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[(i, col)];
                for k in i + 1..n {
                    let u = self.lu[(i, k)];
                    if u.modulus() != 0.0 {
                        s -= u * x[(k, col)];
                    }
                }
                x[(i, col)] = s / self.lu[(i, i)];
            }
        }
        Ok(x)
    }
}

/// Solves `A·X = B` by LU with partial pivoting.
pub fn solve_linear(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    Lu::new(a, 1e-12)?.solve(b)
}

/// Complex variant of [`solve_linear`], used for evaluation off the real axis.
pub fn solve_linear_complex(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    Lu::new(a, 1e-12)?.solve(b)
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    solve_linear(a, &Matrix::identity(a.nrows(), a.nrows()))
}

/// All eigenvalues of a square matrix, with multiplicity, via Hessenberg
/// reduction followed by shifted QR iteration to real Schur form.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "eigenvalues of non-square {}x{} matrix",
            n,
            a.ncols()
        )));
    }
    if !is_finite(a) {
        return Err(LinalgError::NonFinite);
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let sweeps = 100 * n;
    let schur = Schur::try_new(a.clone(), f64::EPSILON, sweeps)
        .ok_or(LinalgError::NoConvergence { sweeps })?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(s: &Matrix) -> Vec<f64> {
    if s.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(s.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

pub fn min_symmetric_eigenvalue(s: &Matrix) -> f64 {
    symmetric_eigenvalues(s).first().copied().unwrap_or(f64::INFINITY)
}

/// Largest singular value.
pub fn spectral_norm(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().max()
}

pub fn spectral_norm_complex(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().max()
}

pub fn singular_values(a: &Matrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Numerical rank with singular-value threshold `rel_tol·σ_max`.
pub fn numerical_rank(a: &Matrix, rel_tol: f64) -> usize {
    let sv = singular_values(a);
    let Some(&top) = sv.first() else { return 0 };
    if top <= ABS_FLOOR {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// 2-norm condition number; infinite for singular input.
pub fn condition_number(a: &Matrix) -> f64 {
    let sv = singular_values(a);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (None, None) => 1.0,
        _ => f64::INFINITY,
    }
}

pub fn max_asymmetry(s: &Matrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..s.nrows() {
        for j in 0..i {
            worst = worst.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    worst
}

fn check_symmetric(s: &Matrix) -> Result<()> {
    if s.nrows() != s.ncols() {
        return Err(LinalgError::DimensionMismatch("symmetric test on non-square matrix".into()));
    }
    let asym = max_asymmetry(s);
    if asym > 1e-12 * s.norm() + ABS_FLOOR {
        return Err(LinalgError::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

/// Lower Cholesky factor of a symmetric matrix, or `None` if some pivot is
/// not strictly positive.
pub fn cholesky(s: &Matrix) -> Option<Matrix> {
    let n = s.nrows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut v = s[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / d;
        }
    }
    Some(l)
}

pub fn is_positive_definite(s: &Matrix) -> Result<bool> {
    check_symmetric(s)?;
    Ok(cholesky(s).is_some())
}

/// Solves `A·X − X·Λ = C` through the Kronecker form
/// `(I ⊗ A − Λᵀ ⊗ I)·vec(X) = vec(C)`.
pub fn solve_sylvester(a: &Matrix, lambda: &Matrix, c: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    let k = lambda.nrows();
    if a.ncols() != n || lambda.ncols() != k || c.nrows() != n || c.ncols() != k {
        return Err(LinalgError::DimensionMismatch(format!(
            "sylvester: A {}x{}, Λ {}x{}, C {}x{}",
            a.nrows(),
            a.ncols(),
            lambda.nrows(),
            lambda.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    let ea = eigenvalues(a)?;
    let el = eigenvalues(lambda)?;
    let gap = ea
        .iter()
        .flat_map(|x| el.iter().map(move |y| (x - y).norm()))
        .fold(f64::INFINITY, f64::min);
    let scale = a.norm() + lambda.norm();
    if gap < (1e-10 * scale).max(ABS_FLOOR) {
        return Err(LinalgError::SpectraOverlap { gap });
    }
    let dim = n * k;
    let mut op = Matrix::zeros(dim, dim);
    for bj in 0..k {
        for bi in 0..k {
            // block (bi, bj) = δ_ij·A − Λ[bj, bi]·I
            let l = lambda[(bj, bi)];
            for r in 0..n {
                if bi == bj {
                    for s in 0..n {
                        op[(bi * n + r, bj * n + s)] += a[(r, s)];
                    }
                }
                op[(bi * n + r, bj * n + r)] -= l;
            }
        }
    }
    let rhs = Matrix::from_column_slice(dim, 1, c.as_slice());
    let x = solve_linear(&op, &rhs)?;
    Ok(Matrix::from_column_slice(n, k, x.as_slice()))
}

/// Block-diagonal concatenation.
pub fn block_diag(blocks: &[&Matrix]) -> Matrix {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

pub fn to_complex(a: &Matrix) -> CMatrix {
    a.map(|v| Complex64::new(v, 0.0))
}
