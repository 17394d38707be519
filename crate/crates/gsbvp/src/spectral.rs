//! Dense complex linear algebra for fibre-sized matrices: Hermitian
//! eigendecomposition, functions of Hermitian matrices, and definiteness
//! tests. All operations are pure; matrices are plain dense `nalgebra`
//! matrices over `Complex<f64>`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

/// Dense complex matrix — the container for every fibre endomorphism.
pub type CMatrix = DMatrix<Complex64>;

/// Relative tolerance for the Hermitian-input precondition.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Absolute tolerance on the smallest eigenvalue in definiteness tests.
pub const POSDEF_TOL: f64 = 1e-12;
/// Largest supported matrix order for the fibre-level API.
pub const MAX_ORDER: usize = 64;

/// Eigendecomposition of a Hermitian matrix: ascending real eigenvalues and
/// a unitary basis whose columns are the matching eigenvectors.
#[derive(Debug, Clone)]
pub struct HermEig {
    pub eigenvalues: DVector<f64>,
    pub basis: CMatrix,
}

impl HermEig {
    /// Reassemble `basis * diag(f(lambda)) * basis^H` for a real scalar map.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.eigenvalues.len();
        let mut scaled = self.basis.clone();
        for j in 0..n {
            let fj = Complex64::new(f(self.eigenvalues[j]), 0.0);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        &scaled * self.basis.adjoint()
    }

    /// Reassemble with a complex-valued scalar map (used by resolvent-type
    /// expressions); the result is not Hermitian in general.
    pub fn apply_complex(&self, f: impl Fn(f64) -> Complex64) -> CMatrix {
        let n = self.eigenvalues.len();
        let mut scaled = self.basis.clone();
        for j in 0..n {
            let fj = f(self.eigenvalues[j]);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        &scaled * self.basis.adjoint()
    }
}

/// Frobenius norm.
pub fn frob(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Frobenius distance from Hermitian symmetry, `|M - M^H|`.
pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    frob(&(m - m.adjoint()))
}

/// True if `M` is Hermitian within the relative tolerance `tol`.
pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    hermiticity_residual(m) <= tol * frob(m).max(1.0)
}

/// Complex identity of order `n`.
pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

fn check_hermitian_input(m: &CMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch {
            context: format!("expected square matrix, got {}x{}", m.nrows(), m.ncols()),
        });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::ShapeMismatch {
            context: "matrix has non-finite entries".to_string(),
        });
    }
    let residual = hermiticity_residual(m);
    let tol = HERMITICITY_TOL * frob(m).max(1.0);
    if residual > tol {
        return Err(Error::NotHermitian { residual, tol });
    }
    Ok(())
}

/// Eigendecomposition without the fibre-order cap — shared by the PDE oracle,
/// whose discretized operators are large.
pub(crate) fn herm_eig_any_order(m: &CMatrix) -> Result<HermEig> {
    check_hermitian_input(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(HermEig {
            eigenvalues: DVector::zeros(0),
            basis: CMatrix::zeros(0, 0),
        });
    }
    // Exact symmetrization so the solver sees a numerically Hermitian input.
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, 100_000)
        .ok_or(Error::ConvergenceFailure { order: n })?;
    // Sort ascending, permuting basis columns in step.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&j| eig.eigenvalues[j]));
    let mut basis = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        basis.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermEig { eigenvalues, basis })
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Errors with [`Error::NotHermitian`] when `|M - M^H|` exceeds
/// [`HERMITICITY_TOL`] relative to `|M|`, and with
/// [`Error::ConvergenceFailure`] if the tridiagonal QL iteration stalls.
pub fn herm_eig(m: &CMatrix) -> Result<HermEig> {
    if m.nrows() > MAX_ORDER {
        return Err(Error::ShapeMismatch {
            context: format!("order {} exceeds fibre cap {}", m.nrows(), MAX_ORDER),
        });
    }
    herm_eig_any_order(m)
}

/// `f(M)` for Hermitian `M` via spectral decomposition:
/// `basis * diag(f(lambda_j)) * basis^H`.
///
/// Errors with [`Error::DomainError`] if `f` returns a non-finite value at
/// some eigenvalue.
pub fn matfun(m: &CMatrix, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    let eig = herm_eig(m)?;
    for &lambda in eig.eigenvalues.iter() {
        let v = f(lambda);
        if !v.is_finite() {
            return Err(Error::DomainError {
                eigenvalue: lambda,
                reason: format!("function value {v} is not finite"),
            });
        }
    }
    Ok(eig.apply(f))
}

/// Smallest eigenvalue of a Hermitian matrix; the matrix is positive-definite
/// iff the result exceeds [`POSDEF_TOL`].
pub fn min_eigenvalue(m: &CMatrix) -> Result<f64> {
    let eig = herm_eig(m)?;
    Ok(if eig.eigenvalues.is_empty() {
        f64::INFINITY
    } else {
        eig.eigenvalues[0]
    })
}

/// Real symmetric eigendecomposition — the fast path for real discretized
/// operators inside the PDE oracle.
pub(crate) fn sym_eig_real(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let sym = (m + m.transpose()).scale(0.5);
    let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, 100_000)
        .ok_or(Error::ConvergenceFailure { order: n })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&j| eig.eigenvalues[j]));
    let mut basis = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        basis.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((eigenvalues, basis))
}
