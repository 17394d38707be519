//! The frozen-coefficient oblique boundary data: a Dirichlet projector `pi`,
//! anti-self-adjoint tangential matrices `gamma[j]`, and optional lower-order
//! endomorphisms `s` (boundary) and `q` (interior potential). The module
//! validates the algebraic constraints, forms the tangential and graded
//! leading symbols, and provides the standard built-in models.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::spectral::{frob, identity, CMatrix, HERMITICITY_TOL};
use crate::{Error, Result};

/// A tangential cotangent vector (the boundary metric is frozen to the
/// identity, so `|zeta|^2` is the plain Euclidean square).
#[derive(Debug, Clone, PartialEq)]
pub struct Covector {
    pub zeta: DVector<f64>,
}

impl Covector {
    pub fn new(components: Vec<f64>) -> Self {
        Self {
            zeta: DVector::from_vec(components),
        }
    }

    pub fn dim(&self) -> usize {
        self.zeta.len()
    }

    pub fn norm(&self) -> f64 {
        self.zeta.norm()
    }

    pub fn is_zero(&self) -> bool {
        self.zeta.iter().all(|&c| c == 0.0)
    }
}

/// Frozen-coefficient boundary data at one boundary point.
#[derive(Debug, Clone)]
pub struct BoundarySetup {
    /// Manifold dimension (the boundary is (m-1)-dimensional).
    pub m: usize,
    /// Fibre dimension.
    pub dim_v: usize,
    /// Dirichlet projector.
    pub pi: CMatrix,
    /// Anti-self-adjoint tangential matrices, one per boundary direction.
    pub gamma: Vec<CMatrix>,
    /// Optional boundary endomorphism (self-adjoint, orthogonal to `pi`).
    pub s: Option<CMatrix>,
    /// Optional constant interior potential (self-adjoint).
    pub q: Option<CMatrix>,
}

/// One violated invariant with the Frobenius norm of its residual.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationIssue {
    pub invariant: String,
    pub residual: f64,
}

/// Outcome of structural validation: empty means valid.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

impl BoundarySetup {
    /// Assemble a setup, checking shapes only (`validate_setup` checks the
    /// algebraic invariants).
    pub fn new(
        m: usize,
        pi: CMatrix,
        gamma: Vec<CMatrix>,
        s: Option<CMatrix>,
        q: Option<CMatrix>,
    ) -> Result<Self> {
        if m < 2 {
            return Err(Error::ShapeMismatch {
                context: format!("manifold dimension {m} < 2"),
            });
        }
        let dim_v = pi.nrows();
        if dim_v == 0 || !pi.is_square() {
            return Err(Error::ShapeMismatch {
                context: format!("projector must be square and nonempty, got {}x{}", pi.nrows(), pi.ncols()),
            });
        }
        if gamma.len() != m - 1 {
            return Err(Error::ShapeMismatch {
                context: format!("expected {} tangential matrices, got {}", m - 1, gamma.len()),
            });
        }
        for (j, g) in gamma.iter().enumerate() {
            if g.nrows() != dim_v || g.ncols() != dim_v {
                return Err(Error::ShapeMismatch {
                    context: format!("gamma[{j}] is {}x{}, fibre is {dim_v}", g.nrows(), g.ncols()),
                });
            }
        }
        for (name, mat) in [("s", &s), ("q", &q)] {
            if let Some(mm) = mat {
                if mm.nrows() != dim_v || mm.ncols() != dim_v {
                    return Err(Error::ShapeMismatch {
                        context: format!("{name} is {}x{}, fibre is {dim_v}", mm.nrows(), mm.ncols()),
                    });
                }
            }
        }
        Ok(Self { m, dim_v, pi, gamma, s, q })
    }

    /// Rank of the Dirichlet projector (trace of `pi`, rounded).
    pub fn pi_rank(&self) -> usize {
        self.pi.diagonal().iter().map(|z| z.re).sum::<f64>().round().max(0.0) as usize
    }
}

/// Check every structural invariant of the boundary data and list violations
/// with residual norms. The order of reported issues is fixed.
pub fn validate_setup(setup: &BoundarySetup) -> ValidationReport {
    let mut issues = Vec::new();
    let scale = |m: &CMatrix| frob(m).max(1.0);
    let mut push = |name: String, residual: f64, tol: f64| {
        if residual > tol {
            issues.push(ValidationIssue { invariant: name, residual });
        }
    };

    let pi = &setup.pi;
    for (k, z) in pi.iter().enumerate() {
        if !z.re.is_finite() || !z.im.is_finite() {
            push(format!("pi entry {k} not finite"), f64::INFINITY, 0.0);
            break;
        }
    }
    push(
        "pi not idempotent (pi^2 != pi)".to_string(),
        frob(&(pi * pi - pi)),
        HERMITICITY_TOL * scale(pi),
    );
    push(
        "pi not self-adjoint".to_string(),
        frob(&(pi - pi.adjoint())),
        HERMITICITY_TOL * scale(pi),
    );
    for (j, g) in setup.gamma.iter().enumerate() {
        if g.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            push(format!("gamma[{j}] not finite"), f64::INFINITY, 0.0);
            continue;
        }
        push(
            format!("gamma[{j}] not anti-self-adjoint"),
            frob(&(g.adjoint() + g)),
            HERMITICITY_TOL * scale(g),
        );
        push(
            format!("pi*gamma[{j}] != 0"),
            frob(&(pi * g)),
            HERMITICITY_TOL * scale(g).max(scale(pi)),
        );
        push(
            format!("gamma[{j}]*pi != 0"),
            frob(&(g * pi)),
            HERMITICITY_TOL * scale(g).max(scale(pi)),
        );
    }
    if let Some(s) = &setup.s {
        push(
            "s not self-adjoint".to_string(),
            frob(&(s - s.adjoint())),
            HERMITICITY_TOL * scale(s),
        );
        push(
            "pi*s != 0".to_string(),
            frob(&(pi * s)),
            HERMITICITY_TOL * scale(s).max(scale(pi)),
        );
        push(
            "s*pi != 0".to_string(),
            frob(&(s * pi)),
            HERMITICITY_TOL * scale(s).max(scale(pi)),
        );
    }
    if let Some(q) = &setup.q {
        push(
            "q not self-adjoint".to_string(),
            frob(&(q - q.adjoint())),
            HERMITICITY_TOL * scale(q),
        );
    }
    ValidationReport { issues }
}

fn check_zeta_dim(setup: &BoundarySetup, zeta: &Covector) -> Result<()> {
    if zeta.dim() != setup.m - 1 {
        return Err(Error::ShapeMismatch {
            context: format!(
                "covector has {} components, boundary has {} directions",
                zeta.dim(),
                setup.m - 1
            ),
        });
    }
    Ok(())
}

/// The tangential symbol `gamma . zeta = sum_j gamma[j] zeta_j`
/// (anti-Hermitian, linear in `zeta`).
pub fn tangential_symbol(setup: &BoundarySetup, zeta: &Covector) -> Result<CMatrix> {
    check_zeta_dim(setup, zeta)?;
    let mut acc = CMatrix::zeros(setup.dim_v, setup.dim_v);
    for (g, &z) in setup.gamma.iter().zip(zeta.zeta.iter()) {
        acc += g.map(|e| e * Complex64::new(z, 0.0));
    }
    Ok(acc)
}

/// The Hermitian matrix `i * gamma . zeta`, whose spectrum controls strong
/// ellipticity.
pub fn hermitian_symbol(setup: &BoundarySetup, zeta: &Covector) -> Result<CMatrix> {
    let g = tangential_symbol(setup, zeta)?;
    Ok(g.map(|e| e * Complex64::new(0.0, 1.0)))
}

/// The graded leading symbol of the boundary operator as a block 2x2 matrix
/// `[[pi, 0], [i gamma.zeta, 1 - pi]]` of order `2 dim_v`.
pub fn graded_symbol(setup: &BoundarySetup, zeta: &Covector) -> Result<CMatrix> {
    let h = hermitian_symbol(setup, zeta)?;
    let n = setup.dim_v;
    let mut block = CMatrix::zeros(2 * n, 2 * n);
    let complement = identity(n) - &setup.pi;
    for i in 0..n {
        for j in 0..n {
            block[(i, j)] = setup.pi[(i, j)];
            block[(n + i, j)] = h[(i, j)];
            block[(n + i, n + j)] = complement[(i, j)];
        }
    }
    Ok(block)
}

/// Hermitian generators of a Clifford algebra on `C^d`:
/// `sigma_i sigma_j + sigma_j sigma_i = 2 delta_ij`.
///
/// A single generator is realized on `C^2` (as `diag(1,-1)`) so that the
/// tangential-symbol spectrum keeps its +/- pair structure; `k` generators
/// need `d = 2^ceil(k/2)` except `k=3` which still fits on `C^2`.
pub fn clifford_generators(k: usize) -> Vec<CMatrix> {
    let c = Complex64::new;
    let sigma1 = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
    let sigma2 = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]);
    let sigma3 = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
    match k {
        0 => Vec::new(),
        1 => vec![sigma3],
        2 => vec![sigma1, sigma2],
        3 => vec![sigma1, sigma2, sigma3],
        _ => {
            // Doubling: from generators g_i on C^d build
            // {sigma1 (x) g_i, sigma2 (x) 1, sigma3 (x) 1} on C^(2d).
            let inner = clifford_generators(k - 2);
            let d = inner[0].nrows();
            let id = identity(d);
            let mut out: Vec<CMatrix> = inner.iter().map(|g| sigma1.kronecker(g)).collect();
            out.push(sigma2.kronecker(&id));
            out.push(sigma3.kronecker(&id));
            out
        }
    }
}

/// Pure Dirichlet conditions: `pi = 1`, no tangential part.
pub fn dirichlet(dim_v: usize) -> BoundarySetup {
    BoundarySetup::new(2, identity(dim_v), vec![CMatrix::zeros(dim_v, dim_v)], None, None)
        .expect("static construction")
}

/// Pure Neumann conditions: `pi = 0`, no tangential part.
pub fn neumann(dim_v: usize) -> BoundarySetup {
    BoundarySetup::new(2, CMatrix::zeros(dim_v, dim_v), vec![CMatrix::zeros(dim_v, dim_v)], None, None)
        .expect("static construction")
}

/// Mixed Dirichlet/Neumann conditions from a given projector, with no
/// tangential part, in manifold dimension `m`.
pub fn mixed(pi: CMatrix, m: usize) -> Result<BoundarySetup> {
    let n = pi.nrows();
    BoundarySetup::new(m, pi, vec![CMatrix::zeros(n, n); m - 1], None, None)
}

/// The 2x2 single-direction oblique model on the half-plane (`m = 2`):
/// `gamma = a * [[0, 1], [-1, 0]]`, `pi = 0`. Strongly elliptic iff |a| < 1.
pub fn pure_skew_2d(a: f64) -> BoundarySetup {
    let c = Complex64::new;
    let gamma = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(a, 0.0), c(-a, 0.0), c(0.0, 0.0)]);
    BoundarySetup::new(2, CMatrix::zeros(2, 2), vec![gamma], None, None).expect("static construction")
}

/// The Pauli model on the half-space of dimension 3: `gamma[j] = i a sigma_j`
/// for the two tangential directions, `pi = 0`. The tangential matrices do
/// not commute; their symbol spectrum is +/- a |zeta|.
pub fn pauli_3d(a: f64) -> BoundarySetup {
    let gens = clifford_generators(2);
    let gamma: Vec<CMatrix> = gens
        .iter()
        .map(|s| s.map(|e| e * Complex64::new(0.0, a)))
        .collect();
    BoundarySetup::new(3, CMatrix::zeros(2, 2), gamma, None, None).expect("static construction")
}

/// The pure Dirac-type model in manifold dimension `m`: on top of a rank-`p`
/// Dirichlet block, the Neumann block carries `gamma[j] = i sqrt(kappa) g_j`
/// with `g_j` Clifford generators, so that
/// `gamma^2 = -kappa (m-1) (1 - pi)`. Strongly elliptic iff `kappa < 1`.
pub fn pure_dirac(kappa: f64, m: usize, pi_rank: usize) -> Result<BoundarySetup> {
    if m < 2 {
        return Err(Error::ShapeMismatch {
            context: format!("manifold dimension {m} < 2"),
        });
    }
    if kappa < 0.0 {
        return Err(Error::UnsupportedModel {
            context: format!("pure Dirac coupling kappa = {kappa} must be nonnegative"),
        });
    }
    let gens = clifford_generators(m - 1);
    let d_cliff = gens[0].nrows();
    let dim_v = pi_rank + d_cliff;
    let sq = kappa.sqrt();
    let mut pi = CMatrix::zeros(dim_v, dim_v);
    for i in 0..pi_rank {
        pi[(i, i)] = Complex64::new(1.0, 0.0);
    }
    let gamma: Vec<CMatrix> = gens
        .iter()
        .map(|g| {
            let mut full = CMatrix::zeros(dim_v, dim_v);
            for i in 0..d_cliff {
                for j in 0..d_cliff {
                    full[(pi_rank + i, pi_rank + j)] = g[(i, j)] * Complex64::new(0.0, sq);
                }
            }
            full
        })
        .collect();
    BoundarySetup::new(m, pi, gamma, None, None)
}
