//! The half-order boundary heat-kernel coefficient.
//!
//! The coefficient is the fibre endomorphism
//!
//! ```text
//! b = -(sqrt(pi)/2) (I + 2 pi) + sqrt(pi) * Int dzeta pi^{-(m-1)/2}
//!         exp{-|zeta|^2 - (gamma.zeta)^2}
//! ```
//!
//! computed four independent ways: a tensor Gauss-Hermite product rule, a
//! spherical rule with the radial Gaussian integral done exactly, a
//! combinatorial expansion in moments of the tangential matrices, and closed
//! forms for commuting / Dirac-type / scalar-coupling structures. The
//! independent routes cross-validate each other; none is derived from
//! another.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::boundary::{hermitian_symbol, BoundarySetup, Covector};
use crate::ellipticity::{check_strong_ellipticity, Classification, DEFAULT_DIRECTION_SAMPLES};
use crate::quad::{gauss_hermite, unit_directions, MatrixSum, NeumaierSum};
use crate::spectral::{frob, herm_eig, identity, CMatrix, POSDEF_TOL};
use crate::{Error, Result};

/// Default Gauss-Hermite points per axis for the tensor path.
pub const DEFAULT_TENSOR_ORDER: usize = 40;
/// Default number of unit directions for the spherical path.
pub const DEFAULT_SPHERICAL_DIRECTIONS: usize = 512;
/// Residual tolerance for the closed-form structure tests.
const STRUCTURE_TOL: f64 = 1e-10;

/// Which quadrature discretization to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadPath {
    /// Gauss-Hermite product rule over the tangential plane, rescaled by the
    /// worst-case Gaussian width so node exponents stay nonpositive.
    Tensor,
    /// Exact radial reduction, averaged over sampled unit directions.
    Spherical,
}

/// Quadrature configuration. `order` is points per axis for the tensor path
/// and the direction count for the spherical path.
#[derive(Debug, Clone, Copy)]
pub struct QuadCfg {
    pub path: QuadPath,
    pub order: usize,
}

impl Default for QuadCfg {
    fn default() -> Self {
        Self {
            path: QuadPath::Spherical,
            order: DEFAULT_SPHERICAL_DIRECTIONS,
        }
    }
}

impl QuadCfg {
    pub fn tensor(order: usize) -> Self {
        Self { path: QuadPath::Tensor, order }
    }

    pub fn spherical(order: usize) -> Self {
        Self { path: QuadPath::Spherical, order }
    }
}

/// How a result was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    QuadratureTensor,
    QuadratureSpherical,
    Series,
    ClosedMixed,
    ClosedAbelian,
    ClosedDirac,
    ClosedPureDirac,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::QuadratureTensor => "quadrature-tensor",
            Method::QuadratureSpherical => "quadrature-spherical",
            Method::Series => "series",
            Method::ClosedMixed => "closed-mixed",
            Method::ClosedAbelian => "closed-abelian",
            Method::ClosedDirac => "closed-dirac",
            Method::ClosedPureDirac => "closed-pure-dirac",
        }
    }
}

/// The computed coefficient with its fibre trace and an error estimate
/// (rule-halving difference for quadrature, last-term magnitude for the
/// series, zero for closed forms).
#[derive(Debug, Clone)]
pub struct BHalfResult {
    pub value: CMatrix,
    pub trace: f64,
    pub method: Method,
    pub err_estimate: f64,
}

/// A piecewise-frozen boundary: cells with areas.
#[derive(Debug, Clone)]
pub struct BoundaryMesh {
    pub cells: Vec<(BoundarySetup, f64)>,
}

impl BoundaryMesh {
    /// All cells must share the manifold and fibre dimensions and carry
    /// positive areas.
    pub fn new(cells: Vec<(BoundarySetup, f64)>) -> Result<Self> {
        let first = cells.first().ok_or_else(|| Error::ShapeMismatch {
            context: "boundary mesh has no cells".to_string(),
        })?;
        let (m, dim_v) = (first.0.m, first.0.dim_v);
        for (i, (setup, area)) in cells.iter().enumerate() {
            if setup.m != m || setup.dim_v != dim_v {
                return Err(Error::ShapeMismatch {
                    context: format!(
                        "cell {i} has (m, dim_v) = ({}, {}), mesh has ({m}, {dim_v})",
                        setup.m, setup.dim_v
                    ),
                });
            }
            if !(*area > 0.0) {
                return Err(Error::ShapeMismatch {
                    context: format!("cell {i} has non-positive area {area}"),
                });
            }
        }
        Ok(Self { cells })
    }
}

/// Method choice for mesh aggregation.
#[derive(Debug, Clone, Copy)]
pub enum MethodSelector {
    /// Closed form when a structure matches, spherical quadrature otherwise.
    Auto,
    Quadrature(QuadCfg),
    Series(usize),
    Closed,
}

/// Volume coefficient of the heat trace: `vol * dim_v`.
pub fn a0(vol_m: f64, dim_v: usize) -> f64 {
    vol_m * dim_v as f64
}

fn sqrt_pi() -> f64 {
    PI.sqrt()
}

/// `-(sqrt(pi)/2)(I + 2 pi)`.
fn base_term(setup: &BoundarySetup) -> CMatrix {
    let half = Complex64::new(-0.5 * sqrt_pi(), 0.0);
    (identity(setup.dim_v) + &setup.pi + &setup.pi).map(|e| e * half)
}

fn assemble(setup: &BoundarySetup, integral: &CMatrix, method: Method, err: f64) -> BHalfResult {
    let value = base_term(setup) + integral.map(|e| e * Complex64::new(sqrt_pi(), 0.0));
    finish(value, method, err)
}

fn finish(value: CMatrix, method: Method, err_estimate: f64) -> BHalfResult {
    let scale = frob(&value).max(1.0);
    let herm_residual = frob(&(&value - value.adjoint()));
    assert!(
        herm_residual <= 1e-8 * scale,
        "coefficient lost Hermiticity: residual {herm_residual:.3e}"
    );
    let sym = (&value + value.adjoint()).map(|e| e * Complex64::new(0.5, 0.0));
    let tr: Complex64 = sym.diagonal().iter().sum();
    assert!(
        tr.im.abs() <= 1e-10 * scale,
        "coefficient trace has imaginary part {:.3e}",
        tr.im
    );
    BHalfResult {
        value: sym,
        trace: tr.re,
        method,
        err_estimate,
    }
}

fn require_elliptic(setup: &BoundarySetup) -> Result<f64> {
    let report = check_strong_ellipticity(setup, DEFAULT_DIRECTION_SAMPLES)?;
    if report.classification != Classification::StronglyElliptic {
        return Err(Error::NotElliptic {
            margin: report.min_margin,
        });
    }
    Ok(report.min_margin)
}

/// Evaluate the coefficient by numerical quadrature of the defining
/// integral. Requires strong ellipticity (the integrand grows otherwise).
pub fn bhalf_quadrature(setup: &BoundarySetup, cfg: QuadCfg) -> Result<BHalfResult> {
    if cfg.order == 0 {
        return Err(Error::ShapeMismatch {
            context: "quadrature order must be positive".to_string(),
        });
    }
    let margin = require_elliptic(setup)?;
    let nu_max = (1.0 - margin).clamp(0.0, 1.0);
    match cfg.path {
        QuadPath::Tensor => {
            let hi = tensor_integral(setup, cfg.order, nu_max)?;
            let lo = tensor_integral(setup, (cfg.order / 2).max(1), nu_max)?;
            let err = frob(&(&hi - &lo)) * sqrt_pi();
            Ok(assemble(setup, &hi, Method::QuadratureTensor, err))
        }
        QuadPath::Spherical => {
            let hi = spherical_integral(setup, cfg.order)?;
            let lo = spherical_integral(setup, (cfg.order / 2).max(1))?;
            let err = frob(&(&hi - &lo)) * sqrt_pi();
            Ok(assemble(setup, &hi, Method::QuadratureSpherical, err))
        }
    }
}

/// The Gaussian integral over the tangential plane by a Gauss-Hermite
/// product rule after the substitution `zeta = u / s`, `s^2 = 1 - nu_max^2`:
/// every node exponent `(lambda^2 - nu_max^2 |u|^2) / s^2` is nonpositive in
/// the elliptic regime, so nodes cannot overflow.
fn tensor_integral(setup: &BoundarySetup, order: usize, nu_max: f64) -> Result<CMatrix> {
    let k = setup.m - 1;
    let n = setup.dim_v;
    let s_sq = (1.0 - nu_max * nu_max).max(f64::MIN_POSITIVE);
    let (nodes, weights) = gauss_hermite(order)?;
    let norm = PI.powf(-(k as f64) / 2.0);
    let inner: usize = order.pow(k as u32 - 1);

    // Chunk by the leading digit: the partition is independent of the worker
    // count, and each partial plus the final fold is a compensated sum in a
    // fixed order, so the result is bit-reproducible.
    let partials: Vec<Result<CMatrix>> = (0..order)
        .into_par_iter()
        .map(|lead| {
            let mut acc = MatrixSum::zeros(n, n);
            let mut digits = vec![0usize; k];
            for rest in 0..inner {
                digits[0] = lead;
                let mut r = rest;
                for d in digits.iter_mut().skip(1) {
                    *d = r % order;
                    r /= order;
                }
                let u: Vec<f64> = digits.iter().map(|&d| nodes[d]).collect();
                let w: f64 = digits.iter().map(|&d| weights[d]).product::<f64>() * norm;
                let u_sq: f64 = u.iter().map(|c| c * c).sum();
                let h = hermitian_symbol(setup, &Covector::new(u))?;
                let eig = herm_eig(&h)?;
                let node = eig.apply(|lambda| {
                    ((lambda * lambda - nu_max * nu_max * u_sq) / s_sq).exp()
                });
                if node.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::QuadratureDivergence {
                        context: format!("tensor node at |u| = {:.3}", u_sq.sqrt()),
                    });
                }
                acc.add_scaled(&node, w);
            }
            Ok(acc.value())
        })
        .collect();

    let mut total = MatrixSum::zeros(n, n);
    for partial in partials {
        total.add_scaled(&partial?, 1.0);
    }
    let scale = s_sq.sqrt().powi(-(k as i32));
    Ok(total.value().map(|e| e * Complex64::new(scale, 0.0)))
}

/// The same integral with the radial part done exactly: the average over
/// unit directions of `(I - (i gamma.theta)^2)^{-(m-1)/2}`.
fn spherical_integral(setup: &BoundarySetup, n_dirs: usize) -> Result<CMatrix> {
    let k = setup.m - 1;
    let n = setup.dim_v;
    let dirs = if setup.m == 2 {
        vec![
            nalgebra::DVector::from_vec(vec![1.0]),
            nalgebra::DVector::from_vec(vec![-1.0]),
        ]
    } else {
        unit_directions(k, n_dirs)?
    };
    let count = dirs.len();
    let power = -(k as f64) / 2.0;

    let partials: Vec<Result<CMatrix>> = dirs
        .par_iter()
        .map(|dir| {
            let h = hermitian_symbol(setup, &Covector { zeta: dir.clone() })?;
            let eig = herm_eig(&h)?;
            let rho = eig
                .eigenvalues
                .iter()
                .fold(0.0f64, |acc, &l| acc.max(l.abs()));
            if 1.0 - rho * rho <= POSDEF_TOL {
                return Err(Error::NotElliptic { margin: 1.0 - rho });
            }
            Ok(eig.apply(|lambda| (1.0 - lambda * lambda).powf(power)))
        })
        .collect();

    let mut total = MatrixSum::zeros(n, n);
    let weight = 1.0 / count as f64;
    for partial in partials {
        total.add_scaled(&partial?, weight);
    }
    Ok(total.value())
}

/// Partial sums of the moment expansion
/// `(sqrt(pi)/2) { I - 2 pi + 2 sum_n (-1)^n (2n)!/((n!)^2 4^n) C_n }`,
/// where `C_n` contracts the fully symmetrized `2n`-fold product of the
/// tangential matrices. Valid as a formal expansion regardless of
/// ellipticity.
pub fn bhalf_series(setup: &BoundarySetup, n_max: usize) -> Result<BHalfResult> {
    if n_max > 4 {
        return Err(Error::OrderTooHigh {
            requested: n_max,
            max: 4,
        });
    }
    let n = setup.dim_v;
    let half = Complex64::new(0.5 * sqrt_pi(), 0.0);
    let mut brace = identity(n) - &setup.pi - &setup.pi;
    let mut last_term_norm = frob(&brace) * 0.5 * sqrt_pi();
    for order in 1..=n_max {
        let c_n = symmetrized_contraction(setup, order);
        let coef = 2.0 * central_coefficient(order) * if order % 2 == 0 { 1.0 } else { -1.0 };
        let term = c_n.map(|e| e * Complex64::new(coef, 0.0));
        last_term_norm = frob(&term) * 0.5 * sqrt_pi();
        brace += term;
    }
    let value = brace.map(|e| e * half);
    Ok(finish(value, Method::Series, last_term_norm))
}

/// `(2n)! / ((n!)^2 4^n)`, the normalized central binomial coefficient.
fn central_coefficient(n: usize) -> f64 {
    let mut v = 1.0;
    for j in 1..=n {
        // (2j-1)(2j) / (j^2 * 4) = (2j-1)/(2j)
        v *= (2 * j - 1) as f64 / (2 * j) as f64;
    }
    v
}

/// The full contraction `C_n`: for each way of assigning `n` tangential
/// indices, average the ordered product of the `2n` matrices (each index
/// twice) over all distinct arrangements, then sum over assignments.
fn symmetrized_contraction(setup: &BoundarySetup, n: usize) -> CMatrix {
    let k = setup.m - 1;
    let dim = setup.dim_v;
    let mut acc = CMatrix::zeros(dim, dim);
    for multiset in index_multisets(k, n) {
        // Number of ordered index assignments collapsing to this multiset.
        let mut counts = vec![0usize; k];
        for &idx in &multiset {
            counts[idx] += 1;
        }
        let multiplicity = factorial(n)
            / counts
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| factorial(c))
                .product::<usize>();
        // Each index appears twice in the product.
        let mut pattern: Vec<usize> = multiset.iter().flat_map(|&i| [i, i]).collect();
        pattern.sort_unstable();
        let arrangements = multiset_permutations(&pattern);
        let mut sum = CMatrix::zeros(dim, dim);
        for arr in &arrangements {
            let mut prod = identity(dim);
            for &idx in arr {
                prod = prod * &setup.gamma[idx];
            }
            sum += prod;
        }
        let w = multiplicity as f64 / arrangements.len() as f64;
        acc += sum.map(|e| e * Complex64::new(w, 0.0));
    }
    acc
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// All nondecreasing index lists of length `n` over `0..k`.
fn index_multisets(k: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(n);
    fn rec(k: usize, n: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == n {
            out.push(current.clone());
            return;
        }
        for v in start..k {
            current.push(v);
            rec(k, n, v, current, out);
            current.pop();
        }
    }
    rec(k, n, 0, &mut current, &mut out);
    out
}

/// All distinct permutations of a sorted multiset.
fn multiset_permutations(sorted: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut pool = sorted.to_vec();
    let mut current = Vec::with_capacity(sorted.len());
    fn rec(pool: &mut Vec<usize>, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pool.is_empty() {
            out.push(current.clone());
            return;
        }
        let mut last: Option<usize> = None;
        for idx in 0..pool.len() {
            let v = pool[idx];
            if last == Some(v) {
                continue;
            }
            last = Some(v);
            pool.remove(idx);
            current.push(v);
            rec(pool, current, out);
            current.pop();
            pool.insert(idx, v);
        }
    }
    rec(&mut pool, &mut current, &mut out);
    out
}

/// A closed-form family the coefficient can be evaluated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedBranch {
    /// No tangential part: `(sqrt(pi)/2)(I - 2 pi)`.
    Mixed,
    /// Commuting tangential matrices: `(sqrt(pi)/2){-I - 2 pi + 2 (I + G)^{-1/2}}`
    /// with `G` the summed square of the tangential matrices.
    Abelian,
    /// Dirac-type anticommutator structure:
    /// `(sqrt(pi)/2){-I - 2 pi + 2 (I + G/(m-1))^{-(m-1)/2}}`.
    Dirac,
    /// Scalar coupling `G = -kappa (m-1)(I - pi)`:
    /// `(sqrt(pi)/2){-pi + (I - pi)[2 (1-kappa)^{-(m-1)/2} - 1]}`.
    PureDirac,
}

impl ClosedBranch {
    fn method(self) -> Method {
        match self {
            ClosedBranch::Mixed => Method::ClosedMixed,
            ClosedBranch::Abelian => Method::ClosedAbelian,
            ClosedBranch::Dirac => Method::ClosedDirac,
            ClosedBranch::PureDirac => Method::ClosedPureDirac,
        }
    }
}

fn gamma_square(setup: &BoundarySetup) -> CMatrix {
    let mut acc = CMatrix::zeros(setup.dim_v, setup.dim_v);
    for g in &setup.gamma {
        acc += g * g;
    }
    acc
}

fn all_gamma_zero(setup: &BoundarySetup) -> bool {
    setup.gamma.iter().all(|g| frob(g) == 0.0)
}

fn is_dirac_type(setup: &BoundarySetup, gamma_sq: &CMatrix) -> bool {
    let tol = STRUCTURE_TOL * frob(gamma_sq).max(1.0);
    let scale = 1.0 / (setup.m - 1) as f64;
    for i in 0..setup.gamma.len() {
        for j in i..setup.gamma.len() {
            let anti = &setup.gamma[i] * &setup.gamma[j] + &setup.gamma[j] * &setup.gamma[i];
            let target = if i == j {
                gamma_sq.map(|e| e * Complex64::new(2.0 * scale, 0.0))
            } else {
                CMatrix::zeros(setup.dim_v, setup.dim_v)
            };
            if frob(&(anti - target)) > tol {
                return false;
            }
        }
    }
    true
}

fn is_abelian(setup: &BoundarySetup) -> bool {
    for i in 0..setup.gamma.len() {
        for j in (i + 1)..setup.gamma.len() {
            let tol =
                STRUCTURE_TOL * (frob(&setup.gamma[i]) * frob(&setup.gamma[j])).max(1.0);
            let comm = &setup.gamma[i] * &setup.gamma[j] - &setup.gamma[j] * &setup.gamma[i];
            if frob(&comm) > tol {
                return false;
            }
        }
    }
    true
}

/// The scalar coupling of the summed square on the complement of the
/// projector, when the square is exactly that scalar: returns `kappa` with
/// `G = -kappa (m-1)(I - pi)`.
fn pure_dirac_coupling(setup: &BoundarySetup, gamma_sq: &CMatrix) -> Option<f64> {
    let p = setup.pi_rank();
    let q = setup.dim_v - p;
    if q == 0 {
        return None;
    }
    let tr: f64 = gamma_sq.diagonal().iter().map(|z| z.re).sum();
    let kappa = -tr / ((setup.m - 1) as f64 * q as f64);
    if kappa <= 0.0 {
        return None;
    }
    let target = (identity(setup.dim_v) - &setup.pi)
        .map(|e| e * Complex64::new(-kappa * (setup.m - 1) as f64, 0.0));
    let tol = STRUCTURE_TOL * frob(gamma_sq).max(1.0);
    if frob(&(gamma_sq - target)) <= tol {
        Some(kappa)
    } else {
        None
    }
}

/// Evaluate one closed-form formula, without testing whether the structure
/// actually holds. The domain requirement (the resummed matrix must be
/// positive) still applies and failing it reports the ellipticity margin.
pub fn bhalf_closed_in_branch(setup: &BoundarySetup, branch: ClosedBranch) -> Result<BHalfResult> {
    let n = setup.dim_v;
    let half = Complex64::new(0.5 * sqrt_pi(), 0.0);
    let value = match branch {
        ClosedBranch::Mixed => (identity(n) - &setup.pi - &setup.pi).map(|e| e * half),
        ClosedBranch::Abelian | ClosedBranch::Dirac => {
            let gamma_sq = gamma_square(setup);
            let eig = herm_eig(&gamma_sq)?;
            let denom = if branch == ClosedBranch::Dirac {
                (setup.m - 1) as f64
            } else {
                1.0
            };
            let power = if branch == ClosedBranch::Dirac {
                (setup.m - 1) as f64 / 2.0
            } else {
                0.5
            };
            let floor = eig
                .eigenvalues
                .iter()
                .map(|&mu| 1.0 + mu / denom)
                .fold(f64::INFINITY, f64::min);
            if floor <= POSDEF_TOL {
                // mu = -nu^2 * denom on the worst eigenspace.
                let nu = (1.0 - floor).max(0.0).sqrt();
                return Err(Error::NotElliptic { margin: 1.0 - nu });
            }
            let resummed = eig.apply(|mu| (1.0 + mu / denom).powf(-power));
            (resummed.map(|e| e * Complex64::new(2.0, 0.0))
                - identity(n)
                - &setup.pi
                - &setup.pi)
                .map(|e| e * half)
        }
        ClosedBranch::PureDirac => {
            let gamma_sq = gamma_square(setup);
            let p = setup.pi_rank();
            let q = setup.dim_v - p;
            if q == 0 {
                return Err(Error::NoClosedForm {
                    context: "scalar-coupling formula needs a nontrivial complement".to_string(),
                });
            }
            let tr: f64 = gamma_sq.diagonal().iter().map(|z| z.re).sum();
            let kappa = -tr / ((setup.m - 1) as f64 * q as f64);
            if 1.0 - kappa <= POSDEF_TOL {
                return Err(Error::NotElliptic {
                    margin: 1.0 - kappa.max(0.0).sqrt(),
                });
            }
            let factor = 2.0 * (1.0 - kappa).powf(-((setup.m - 1) as f64) / 2.0) - 1.0;
            let complement = identity(n) - &setup.pi;
            (complement.map(|e| e * Complex64::new(factor, 0.0)) - &setup.pi).map(|e| e * half)
        }
    };
    Ok(finish(value, branch.method(), 0.0))
}

/// Evaluate the coefficient in closed form, choosing the most specific
/// structure that holds: scalar coupling, then Dirac-type, then commuting,
/// with no tangential part as the degenerate case. When several structures
/// hold their formulas must coincide, which is asserted.
pub fn bhalf_closed(setup: &BoundarySetup) -> Result<BHalfResult> {
    if all_gamma_zero(setup) {
        return bhalf_closed_in_branch(setup, ClosedBranch::Mixed);
    }
    let gamma_sq = gamma_square(setup);
    let dirac = is_dirac_type(setup, &gamma_sq);
    let mut applicable = Vec::new();
    if dirac {
        if pure_dirac_coupling(setup, &gamma_sq).is_some() {
            applicable.push(ClosedBranch::PureDirac);
        }
        applicable.push(ClosedBranch::Dirac);
    }
    if is_abelian(setup) {
        applicable.push(ClosedBranch::Abelian);
    }
    let Some(&first) = applicable.first() else {
        return Err(Error::NoClosedForm {
            context: "tangential matrices are neither commuting nor Dirac-type".to_string(),
        });
    };
    let result = bhalf_closed_in_branch(setup, first)?;
    for &other in &applicable[1..] {
        let alt = bhalf_closed_in_branch(setup, other)?;
        let dev = frob(&(&result.value - &alt.value));
        assert!(
            dev <= 1e-10 * frob(&result.value).max(1.0),
            "closed branches {:?} and {:?} disagree by {dev:.3e}",
            first,
            other
        );
    }
    Ok(result)
}

/// Aggregate the half-order coefficient over a boundary mesh:
/// `sum_cells area * trace(b(cell))`, in cell order.
pub fn a_half(mesh: &BoundaryMesh, selector: MethodSelector) -> Result<f64> {
    let mut acc = NeumaierSum::default();
    for (index, (setup, area)) in mesh.cells.iter().enumerate() {
        let result = match selector {
            MethodSelector::Auto => match bhalf_closed(setup) {
                Err(Error::NoClosedForm { .. }) => bhalf_quadrature(setup, QuadCfg::default()),
                other => other,
            },
            MethodSelector::Quadrature(cfg) => bhalf_quadrature(setup, cfg),
            MethodSelector::Series(n_max) => bhalf_series(setup, n_max),
            MethodSelector::Closed => bhalf_closed(setup),
        }
        .map_err(|e| e.at_cell(index))?;
        acc.add(result.trace * area);
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{dirichlet, mixed, neumann, pauli_3d, pure_dirac, pure_skew_2d, BoundarySetup};
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn diag2(a: Complex64, b: Complex64) -> CMatrix {
        CMatrix::from_diagonal(&DVector::from_vec(vec![a, b]))
    }

    fn commuting_diagonal() -> BoundarySetup {
        let g1 = diag2(Complex64::new(0.0, 0.5), Complex64::new(0.0, -0.5));
        let g2 = diag2(Complex64::new(0.0, 0.3), Complex64::new(0.0, -0.3));
        BoundarySetup::new(3, CMatrix::zeros(2, 2), vec![g1, g2], None, None).unwrap()
    }

    #[test]
    fn a0_values() {
        assert_relative_eq!(a0(1.0, 1), 1.0);
        assert_relative_eq!(a0(2.0 * PI, 2), 4.0 * PI);
        assert_relative_eq!(a0(PI, 3), 3.0 * PI);
    }

    #[test]
    fn dirichlet_neumann_anchors() {
        let half = 0.5 * sqrt_pi();
        for cfg in [QuadCfg::tensor(20), QuadCfg::spherical(8)] {
            let b = bhalf_quadrature(&dirichlet(2), cfg).unwrap();
            assert_relative_eq!(b.trace, -2.0 * half, max_relative = 1e-12);
            let b = bhalf_quadrature(&neumann(3), cfg).unwrap();
            assert_relative_eq!(b.trace, 3.0 * half, max_relative = 1e-12);
        }
        let b = bhalf_closed(&dirichlet(2)).unwrap();
        assert_eq!(b.method, Method::ClosedMixed);
        assert_relative_eq!(b.trace, -2.0 * half, max_relative = 1e-14);
        let b = bhalf_series(&neumann(1), 4).unwrap();
        assert_relative_eq!(b.trace, half, max_relative = 1e-14);
    }

    #[test]
    fn pauli_quadrature_matches_closed_value() {
        let setup = pauli_3d(0.5);
        let expected = 0.5 * sqrt_pi() * (5.0 / 3.0);
        for cfg in [QuadCfg::tensor(40), QuadCfg::spherical(64)] {
            let b = bhalf_quadrature(&setup, cfg).unwrap();
            assert_relative_eq!(b.value[(0, 0)].re, expected, max_relative = 1e-6);
            assert_relative_eq!(b.value[(1, 1)].re, expected, max_relative = 1e-6);
            assert!(b.value[(0, 1)].norm() < 1e-8);
            assert_relative_eq!(b.trace, 2.0 * expected, max_relative = 1e-6);
        }
    }

    #[test]
    fn pauli_closed_uses_scalar_coupling_branch() {
        let b = bhalf_closed(&pauli_3d(0.5)).unwrap();
        assert_eq!(b.method, Method::ClosedPureDirac);
        assert_relative_eq!(b.trace, sqrt_pi() * (5.0 / 3.0), max_relative = 1e-13);
        assert_eq!(b.err_estimate, 0.0);
    }

    #[test]
    fn forced_commuting_formula_on_pauli_is_wrong() {
        // The commuting formula applied to non-commuting matrices gives a
        // substantially different number; the auto path must never do this.
        let setup = pauli_3d(0.5);
        let fair = bhalf_closed(&setup).unwrap();
        let forced = bhalf_closed_in_branch(&setup, ClosedBranch::Abelian).unwrap();
        let expected_forced = 0.5 * sqrt_pi() * (2.0 / 0.5f64.sqrt() - 1.0);
        assert_relative_eq!(forced.value[(0, 0)].re, expected_forced, max_relative = 1e-12);
        let rel = (forced.trace - fair.trace).abs() / fair.trace.abs();
        assert!(rel > 0.05, "misuse deviation {rel:.4} unexpectedly small");
    }

    #[test]
    fn commuting_diagonal_value() {
        let setup = commuting_diagonal();
        let b = bhalf_closed(&setup).unwrap();
        assert_eq!(b.method, Method::ClosedAbelian);
        let expected = 0.5 * sqrt_pi() * (2.0 / 0.66f64.sqrt() - 1.0);
        assert_relative_eq!(b.value[(0, 0)].re, expected, max_relative = 1e-13);
        assert_relative_eq!(b.value[(1, 1)].re, expected, max_relative = 1e-13);

        for cfg in [QuadCfg::tensor(40), QuadCfg::spherical(96)] {
            let q = bhalf_quadrature(&setup, cfg).unwrap();
            assert_relative_eq!(q.trace, b.trace, max_relative = 1e-7);
        }
    }

    #[test]
    fn dirac_sum_model_uses_dirac_branch() {
        // A block sum of two scalar couplings is Dirac-type without being a
        // single scalar coupling.
        let b1 = pure_dirac(0.25, 3, 0).unwrap();
        let b2 = pure_dirac(0.64, 3, 0).unwrap();
        let n = b1.dim_v + b2.dim_v;
        let embed = |top: &CMatrix, bottom: &CMatrix| {
            let mut full = CMatrix::zeros(n, n);
            for i in 0..top.nrows() {
                for j in 0..top.ncols() {
                    full[(i, j)] = top[(i, j)];
                }
            }
            for i in 0..bottom.nrows() {
                for j in 0..bottom.ncols() {
                    full[(top.nrows() + i, top.ncols() + j)] = bottom[(i, j)];
                }
            }
            full
        };
        let gamma: Vec<CMatrix> = b1
            .gamma
            .iter()
            .zip(&b2.gamma)
            .map(|(g1, g2)| embed(g1, g2))
            .collect();
        let setup = BoundarySetup::new(3, CMatrix::zeros(n, n), gamma, None, None).unwrap();
        let b = bhalf_closed(&setup).unwrap();
        assert_eq!(b.method, Method::ClosedDirac);
        let expected = 0.5
            * sqrt_pi()
            * (2.0 * (2.0 / 0.75 - 1.0) + 2.0 * (2.0 / 0.36 - 1.0));
        assert_relative_eq!(b.trace, expected, max_relative = 1e-12);

        let q = bhalf_quadrature(&setup, QuadCfg::spherical(64)).unwrap();
        assert_relative_eq!(q.trace, expected, max_relative = 1e-8);
    }

    #[test]
    fn series_first_order_skew() {
        // First correction is +a^2 (I - pi): the closed form
        // 2(1-a^2)^{-1/2} - 1 = 1 + a^2 + 3a^4/4 + ... term by term.
        let a = 0.2;
        let b0 = bhalf_series(&pure_skew_2d(a), 0).unwrap();
        let b1 = bhalf_series(&pure_skew_2d(a), 1).unwrap();
        let delta = (b1.value[(0, 0)].re - b0.value[(0, 0)].re) / (0.5 * sqrt_pi());
        assert_relative_eq!(delta, a * a, max_relative = 1e-12);
    }

    #[test]
    fn series_matches_closed_taylor() {
        let a = 0.3;
        let closed = bhalf_closed(&pure_skew_2d(a)).unwrap();
        let s4 = bhalf_series(&pure_skew_2d(a), 4).unwrap();
        // Remainder is bounded by a geometric multiple of the last term.
        assert!((s4.trace - closed.trace).abs() < s4.err_estimate);
        assert!(s4.err_estimate < 1e-2);
    }

    #[test]
    fn series_matches_quadrature_for_pauli() {
        let setup = pauli_3d(0.3);
        let s = bhalf_series(&setup, 4).unwrap();
        let q = bhalf_quadrature(&setup, QuadCfg::tensor(40)).unwrap();
        assert!((s.trace - q.trace).abs() <= s.err_estimate.max(1e-6) * 2.0);
    }

    #[test]
    fn quadrature_refuses_non_elliptic() {
        let err = bhalf_quadrature(&pure_skew_2d(1.5), QuadCfg::default()).unwrap_err();
        match err {
            Error::NotElliptic { margin } => assert_relative_eq!(margin, -0.5, max_relative = 1e-12),
            other => panic!("expected NotElliptic, got {other:?}"),
        }
        assert!(bhalf_quadrature(&pure_skew_2d(1.0), QuadCfg::default()).is_err());
    }

    #[test]
    fn closed_refuses_non_elliptic() {
        let err = bhalf_closed(&pure_dirac(1.2, 3, 0).unwrap()).unwrap_err();
        match err {
            Error::NotElliptic { margin } => {
                assert_relative_eq!(margin, 1.0 - 1.2f64.sqrt(), max_relative = 1e-12);
            }
            other => panic!("expected NotElliptic, got {other:?}"),
        }
    }

    #[test]
    fn series_order_cap() {
        assert!(matches!(
            bhalf_series(&pure_skew_2d(0.1), 5),
            Err(Error::OrderTooHigh { requested: 5, max: 4 })
        ));
    }

    #[test]
    fn monotone_divergence_in_coupling() {
        let mut last = f64::NEG_INFINITY;
        for kappa in [0.2, 0.4, 0.6, 0.8, 0.9, 0.95] {
            let b = bhalf_closed(&pure_dirac(kappa, 3, 0).unwrap()).unwrap();
            assert!(b.trace > last, "trace not increasing at kappa = {kappa}");
            last = b.trace;
        }
        assert!(last > 10.0);
    }

    #[test]
    fn projector_commutation() {
        let mut pi = CMatrix::zeros(3, 3);
        pi[(0, 0)] = Complex64::new(1.0, 0.0);
        let setup = pure_dirac(0.36, 3, 1).unwrap();
        for result in [
            bhalf_closed(&setup).unwrap(),
            bhalf_quadrature(&setup, QuadCfg::spherical(32)).unwrap(),
            bhalf_series(&setup, 3).unwrap(),
        ] {
            let comm = &result.value * &pi - &pi * &result.value;
            assert!(frob(&comm) < 1e-8, "commutator {:.2e}", frob(&comm));
        }
    }

    #[test]
    fn mesh_aggregation() {
        let mesh = BoundaryMesh::new(vec![
            (dirichlet(1), PI),
            (dirichlet(1), PI),
        ])
        .unwrap();
        let total = a_half(&mesh, MethodSelector::Closed).unwrap();
        assert_relative_eq!(total, -sqrt_pi() * PI, max_relative = 1e-13);

        let single = BoundaryMesh::new(vec![(neumann(2), 1.0)]).unwrap();
        assert_relative_eq!(
            a_half(&single, MethodSelector::Auto).unwrap(),
            sqrt_pi(),
            max_relative = 1e-13
        );

        let cancel = BoundaryMesh::new(vec![(dirichlet(2), 0.7), (neumann(2), 0.7)]).unwrap();
        assert_relative_eq!(
            a_half(&cancel, MethodSelector::Quadrature(QuadCfg::spherical(4))).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn mesh_error_carries_cell_index() {
        let mesh = BoundaryMesh::new(vec![
            (pure_skew_2d(0.5), 1.0),
            (pure_skew_2d(1.5), 1.0),
        ])
        .unwrap();
        let err = a_half(&mesh, MethodSelector::Auto).unwrap_err();
        match err {
            Error::Cell { index, source } => {
                assert_eq!(index, 1);
                assert!(matches!(*source, Error::NotElliptic { .. }));
            }
            other => panic!("expected Cell, got {other:?}"),
        }
    }

    #[test]
    fn mesh_rejects_mixed_dimensions() {
        assert!(BoundaryMesh::new(vec![(dirichlet(1), 1.0), (dirichlet(2), 1.0)]).is_err());
        assert!(BoundaryMesh::new(vec![(dirichlet(1), 0.0)]).is_err());
        assert!(BoundaryMesh::new(Vec::new()).is_err());
    }

    #[test]
    fn mixed_projector_series_and_closed_agree() {
        let mut pi = CMatrix::zeros(2, 2);
        pi[(0, 0)] = Complex64::new(1.0, 0.0);
        let setup = mixed(pi, 3).unwrap();
        let c = bhalf_closed(&setup).unwrap();
        let s = bhalf_series(&setup, 2).unwrap();
        let q = bhalf_quadrature(&setup, QuadCfg::tensor(10)).unwrap();
        assert_relative_eq!(c.trace, 0.0, epsilon = 1e-13);
        assert_relative_eq!(s.trace, 0.0, epsilon = 1e-13);
        assert_relative_eq!(q.trace, 0.0, epsilon = 1e-12);
    }
}
