//! Independent finite-difference verification of the boundary heat kernel:
//! each tangential frequency gives a half-line mode problem, discretized with
//! second-order centered differences and a ghost-point-eliminated oblique
//! boundary stencil, exponentiated by dense eigendecomposition (with a
//! Crank-Nicolson stepper as a second path). Fourier synthesis over the
//! frequency grid reconstructs the two-dimensional heat-kernel diagonal and a
//! small-time fit extracts the boundary coefficient — no closed form from
//! the profile or coefficient modules enters.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::boundary::{hermitian_symbol, BoundarySetup, Covector};
use crate::ellipticity::{check_strong_ellipticity, Classification, DEFAULT_DIRECTION_SAMPLES};
use crate::quad::{adaptive_gk, NeumaierSum};
use crate::special::{erfc, erfcx};
use crate::spectral::{
    frob, herm_eig, herm_eig_any_order, identity, is_hermitian, sym_eig_real, CMatrix,
    HERMITICITY_TOL,
};
use crate::{Error, Result};

/// Smallest accepted spatial grid.
const MIN_GRID: usize = 100;
/// Largest grid the dense eigendecomposition path accepts.
const MAX_GRID: usize = 2000;
/// Eigenvalues of the discrete operator below this threshold signal
/// instability when the boundary condition is strongly elliptic.
const STABILITY_TOL: f64 = -1e-8;
/// Number of Crank-Nicolson steps.
const CN_STEPS: usize = 2048;

/// Default small-time sweep for the boundary-coefficient fit.
pub const DEFAULT_T_SWEEP: [f64; 6] = [0.05, 0.03, 0.02, 0.012, 0.008, 0.005];

/// One half-line mode problem: `-d^2/dr^2 + |zeta|^2 + Q` on `[0, L]` with
/// the projected oblique condition at `r = 0` and Dirichlet truncation at
/// `r = L`.
#[derive(Debug, Clone)]
pub struct ModeProblem {
    pub setup: BoundarySetup,
    pub zeta: Covector,
    pub length: f64,
    pub n_grid: usize,
    /// Extra constant potential, added to any potential already carried by
    /// the setup.
    pub q_shift: Option<CMatrix>,
}

/// Frequency-synthesis parameters for the two-dimensional reconstruction.
#[derive(Debug, Clone, Copy)]
pub struct SynthesisGrid {
    pub n_grid: usize,
    pub length: f64,
    /// Frequency cutoff `Z`; the grid covers `[-Z, Z]`.
    pub cutoff: f64,
    /// Frequency spacing.
    pub spacing: f64,
}

impl SynthesisGrid {
    /// Defaults tuned for diffusion time `t`: spatial step `sqrt(t)/32`,
    /// domain `8 sqrt(t)`, cutoff `8/sqrt(t)` resolved by 18 steps.
    pub fn for_time(t: f64) -> Self {
        let cutoff = 8.0 / t.sqrt();
        Self {
            n_grid: 257,
            length: 8.0 * t.sqrt(),
            cutoff,
            spacing: cutoff / 18.0,
        }
    }
}

/// Result of the small-time boundary-coefficient fit.
#[derive(Debug, Clone, Copy)]
pub struct OracleBHalf {
    /// Fitted fibre trace of the boundary coefficient per unit boundary
    /// length.
    pub estimate: f64,
    /// Root-mean-square residual of the two-term fit.
    pub fit_residual: f64,
}

/// Orthonormal basis of the subspace the projector annihilates (the oblique
/// sector carrying the node-0 unknowns).
fn boundary_basis(pi: &CMatrix) -> Result<CMatrix> {
    let eig = herm_eig(pi)?;
    let r0 = eig.eigenvalues.iter().filter(|&&l| l < 0.5).count();
    Ok(eig.basis.columns(0, r0).into_owned())
}

/// The discretized mode operator in its weighted-symmetric form, plus the
/// data needed to map spectral results back to kernel values.
struct Assembled {
    /// Hermitian `N x N` operator, `N = r0 + (n-2) dim_v`.
    s: CMatrix,
    /// Fibre embedding of the reduced node-0 unknowns.
    b0: CMatrix,
    h: f64,
    n: usize,
    dim_v: usize,
    r0: usize,
}

fn assemble(
    setup: &BoundarySetup,
    zeta: &Covector,
    length: f64,
    n_grid: usize,
    q_shift: Option<&CMatrix>,
) -> Result<Assembled> {
    if n_grid < MIN_GRID {
        return Err(Error::GridTooCoarse {
            n_grid,
            min: MIN_GRID,
        });
    }
    if n_grid > MAX_GRID {
        return Err(Error::ShapeMismatch {
            context: format!("grid {n_grid} exceeds dense-eigendecomposition cap {MAX_GRID}"),
        });
    }
    if !(length > 0.0) {
        return Err(Error::ShapeMismatch {
            context: format!("domain length {length} must be positive"),
        });
    }
    let d = setup.dim_v;
    let h = length / (n_grid - 1) as f64;
    let sym = hermitian_symbol(setup, zeta)?;
    let mut q_eff = CMatrix::zeros(d, d);
    if let Some(q) = &setup.q {
        q_eff += q;
    }
    if let Some(q) = q_shift {
        if q.nrows() != d || q.ncols() != d {
            return Err(Error::ShapeMismatch {
                context: format!("potential shift is {}x{}, fibre is {d}", q.nrows(), q.ncols()),
            });
        }
        if !is_hermitian(q, HERMITICITY_TOL) {
            return Err(Error::NotHermitian {
                residual: frob(&(q - q.adjoint())),
                tol: HERMITICITY_TOL * frob(q).max(1.0),
            });
        }
        q_eff += q;
    }
    let b0 = boundary_basis(&setup.pi)?;
    let r0 = b0.ncols();
    let norm_sq = zeta.norm() * zeta.norm();
    let inv_h2 = 1.0 / (h * h);
    let diag_int =
        identity(d).map(|e| e * Complex64::new(2.0 * inv_h2 + norm_sq, 0.0)) + &q_eff;
    let nb = n_grid - 2;
    let nn = r0 + nb * d;
    let mut s = CMatrix::zeros(nn, nn);

    // Node 0, projected onto the oblique sector: ghost elimination at second
    // order turns the centered stencil into
    // (2/h^2 + |zeta|^2) I - (2/h) H + Q on the reduced unknowns, coupled to
    // node 1 by -2/h^2; the sqrt(w) similarity (w_0 = h/2, w_i = h) balances
    // the off-diagonal pair at -sqrt(2)/h^2.
    let s00 = b0.adjoint()
        * (&diag_int - sym.map(|e| e * Complex64::new(2.0 / h, 0.0)))
        * &b0;
    s.view_mut((0, 0), (r0, r0)).copy_from(&s00);
    let coupling = b0
        .adjoint()
        .map(|e| e * Complex64::new(-std::f64::consts::SQRT_2 * inv_h2, 0.0));
    s.view_mut((0, r0), (r0, d)).copy_from(&coupling);
    s.view_mut((r0, 0), (d, r0)).copy_from(&coupling.adjoint());

    let off_diag = identity(d).map(|e| e * Complex64::new(-inv_h2, 0.0));
    for i in 1..=nb {
        let off = r0 + (i - 1) * d;
        s.view_mut((off, off), (d, d)).copy_from(&diag_int);
        if i < nb {
            s.view_mut((off, off + d), (d, d)).copy_from(&off_diag);
            s.view_mut((off + d, off), (d, d)).copy_from(&off_diag);
        }
    }
    Ok(Assembled {
        s,
        b0,
        h,
        n: n_grid,
        dim_v: d,
        r0,
    })
}

/// Spectral data of an assembled mode, with a real fast path when the
/// operator has no imaginary part.
struct ModeEig {
    lambda: DVector<f64>,
    basis: CMatrix,
    b0: CMatrix,
    h: f64,
    n: usize,
    dim_v: usize,
    r0: usize,
}

impl ModeEig {
    fn new(a: Assembled) -> Result<Self> {
        let real = a.s.iter().all(|z| z.im == 0.0);
        let (lambda, basis) = if real {
            let sr = DMatrix::from_fn(a.s.nrows(), a.s.ncols(), |i, j| a.s[(i, j)].re);
            let (l, b) = sym_eig_real(&sr)?;
            (l, b.map(|e| Complex64::new(e, 0.0)))
        } else {
            let eig = herm_eig_any_order(&a.s)?;
            (eig.eigenvalues, eig.basis)
        };
        Ok(Self {
            lambda,
            basis,
            b0: a.b0,
            h: a.h,
            n: a.n,
            dim_v: a.dim_v,
            r0: a.r0,
        })
    }

    fn min_lambda(&self) -> f64 {
        self.lambda.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn weight(&self, node: usize) -> f64 {
        if node == 0 {
            self.h / 2.0
        } else {
            self.h
        }
    }

    /// Rows of the eigenbasis belonging to a node, and the column scaling
    /// `e^{-t lambda / 2}` so a block is just `R R^H`.
    fn scaled_rows(&self, node: usize, t: f64) -> CMatrix {
        let (off, width) = if node == 0 {
            (0, self.r0)
        } else {
            (self.r0 + (node - 1) * self.dim_v, self.dim_v)
        };
        let mut rows = self.basis.rows(off, width).into_owned();
        for j in 0..self.lambda.len() {
            let f = Complex64::new((-0.5 * t * self.lambda[j]).exp(), 0.0);
            for i in 0..width {
                rows[(i, j)] *= f;
            }
        }
        rows
    }

    /// Diagonal kernel block at one node, in fibre coordinates.
    fn block(&self, node: usize, t: f64) -> CMatrix {
        if node == self.n - 1 {
            return CMatrix::zeros(self.dim_v, self.dim_v);
        }
        let rows = self.scaled_rows(node, t);
        let core = &rows * rows.adjoint();
        let w = Complex64::new(1.0 / self.weight(node), 0.0);
        if node == 0 {
            (&self.b0 * core * self.b0.adjoint()).map(|e| e * w)
        } else {
            core.map(|e| e * w)
        }
    }

    /// Fibre trace of the diagonal kernel at nodes `0..=cut`.
    fn node_traces(&self, t: f64, cut: usize) -> Vec<f64> {
        let phase: Vec<f64> = self.lambda.iter().map(|&l| (-t * l).exp()).collect();
        let mut traces = Vec::with_capacity(cut + 1);
        for node in 0..=cut.min(self.n - 1) {
            if node == self.n - 1 {
                traces.push(0.0);
                continue;
            }
            let (off, width) = if node == 0 {
                (0, self.r0)
            } else {
                (self.r0 + (node - 1) * self.dim_v, self.dim_v)
            };
            let mut acc = NeumaierSum::new();
            for a in off..off + width {
                for j in 0..self.lambda.len() {
                    acc.add(phase[j] * self.basis[(a, j)].norm_sqr());
                }
            }
            traces.push(acc.value() / self.weight(node));
        }
        traces
    }
}

fn classify(setup: &BoundarySetup) -> Result<Classification> {
    Ok(check_strong_ellipticity(setup, DEFAULT_DIRECTION_SAMPLES)?.classification)
}

fn check_mode_times(length: f64, t: f64) -> Result<()> {
    if !(t > 0.0) {
        return Err(Error::ShapeMismatch {
            context: format!("diffusion time {t} must be positive"),
        });
    }
    let required = 8.0 * t.sqrt();
    if length < required {
        return Err(Error::CutoffTooSmall {
            cutoff: length,
            required,
        });
    }
    Ok(())
}

/// Diagonal blocks of the discrete mode heat kernel at every grid node, via
/// dense eigendecomposition.
pub fn mode_diagonal(problem: &ModeProblem, t: f64) -> Result<Vec<CMatrix>> {
    check_mode_times(problem.length, t)?;
    let classification = classify(&problem.setup)?;
    let assembled = assemble(
        &problem.setup,
        &problem.zeta,
        problem.length,
        problem.n_grid,
        problem.q_shift.as_ref(),
    )?;
    let eig = ModeEig::new(assembled)?;
    if classification == Classification::StronglyElliptic && eig.min_lambda() < STABILITY_TOL {
        return Err(Error::InstabilityDetected {
            min_eigenvalue: eig.min_lambda(),
        });
    }
    Ok((0..eig.n).map(|i| eig.block(i, t)).collect())
}

/// Diagonal blocks at selected nodes via the Crank-Nicolson stepper — an
/// independent second path that never forms the eigendecomposition.
pub fn mode_diagonal_cn(problem: &ModeProblem, t: f64, nodes: &[usize]) -> Result<Vec<CMatrix>> {
    check_mode_times(problem.length, t)?;
    let a = assemble(
        &problem.setup,
        &problem.zeta,
        problem.length,
        problem.n_grid,
        problem.q_shift.as_ref(),
    )?;
    let nn = a.s.nrows();
    for &node in nodes {
        if node >= a.n {
            return Err(Error::ShapeMismatch {
                context: format!("node {node} outside grid of {} points", a.n),
            });
        }
    }
    let dt = t / CN_STEPS as f64;
    let half = Complex64::new(0.5 * dt, 0.0);
    let a_plus = identity(nn) + a.s.map(|e| e * half);
    let a_minus = identity(nn) - a.s.map(|e| e * half);
    let lu = a_plus.lu();

    // Columns to evolve: the identity columns spanning each requested node.
    let mut spans = Vec::new();
    let mut total = 0usize;
    for &node in nodes {
        let (off, width) = if node == a.n - 1 {
            (0, 0)
        } else if node == 0 {
            (0, a.r0)
        } else {
            (a.r0 + (node - 1) * a.dim_v, a.dim_v)
        };
        spans.push((off, width));
        total += width;
    }
    let mut u = CMatrix::zeros(nn, total);
    let mut col = 0;
    for &(off, width) in &spans {
        for k in 0..width {
            u[(off + k, col)] = Complex64::new(1.0, 0.0);
            col += 1;
        }
    }
    for _ in 0..CN_STEPS {
        let rhs = &a_minus * &u;
        u = lu
            .solve(&rhs)
            .ok_or(Error::ConvergenceFailure { order: nn })?;
    }
    let mut out = Vec::with_capacity(nodes.len());
    let mut col = 0;
    for (&node, &(off, width)) in nodes.iter().zip(&spans) {
        if width == 0 {
            out.push(CMatrix::zeros(a.dim_v, a.dim_v));
            continue;
        }
        let mut core = CMatrix::zeros(width, width);
        for j in 0..width {
            for i in 0..width {
                core[(i, j)] = u[(off + i, col + j)];
            }
        }
        let w = Complex64::new(
            1.0 / if node == 0 { a.h / 2.0 } else { a.h },
            0.0,
        );
        let block = if node == 0 {
            (&a.b0 * core * a.b0.adjoint()).map(|e| e * w)
        } else {
            core.map(|e| e * w)
        };
        out.push(block);
        col += width;
    }
    Ok(out)
}

/// Closed-form constant-coefficient mode diagonal: free part, image part
/// through the projector, and the oblique Robin tail obtained by inverse
/// Laplace transform of the reflected resolvent.
pub fn analytic_mode_diagonal(
    setup: &BoundarySetup,
    zeta: &Covector,
    t: f64,
    r: f64,
) -> Result<CMatrix> {
    if !(t > 0.0) || r < 0.0 {
        return Err(Error::ShapeMismatch {
            context: "need t > 0 and r >= 0".to_string(),
        });
    }
    let sym = hermitian_symbol(setup, zeta)?;
    let eig = herm_eig(&sym)?;
    let sqrt_t = t.sqrt();
    let tail = eig.apply(|mu| {
        let x = r / sqrt_t - mu * sqrt_t;
        if x >= 0.0 {
            mu * (-r * r / t).exp() * erfcx(x)
        } else {
            mu * (-2.0 * r * mu + mu * mu * t).exp() * erfc(x)
        }
    });
    let d = setup.dim_v;
    let free = 1.0 / (4.0 * PI * t).sqrt();
    let image = free * (-r * r / t).exp();
    let core = identity(d).map(|e| e * Complex64::new(free, 0.0))
        + (identity(d) - &setup.pi - &setup.pi).map(|e| e * Complex64::new(image, 0.0))
        + tail;
    let damp = Complex64::new((-t * zeta.norm() * zeta.norm()).exp(), 0.0);
    Ok(core.map(|e| e * damp))
}

/// Diagonal of the free infinite-lattice heat kernel for the same spatial
/// discretization — subtracting it from the half-line kernel cancels the
/// interior discretization error in the boundary-layer integral.
fn free_lattice_diagonal(t: f64, h: f64) -> f64 {
    let integrand = |k: f64| (-t * (2.0 - 2.0 * (k * h).cos()) / (h * h)).exp();
    let (value, _) = adaptive_gk(&integrand, 0.0, PI / h, 1e-12);
    value / PI
}

/// One-sided frequency schedule (the conjugate-symmetric synthesis maps
/// `-zeta` to the conjugate mode for real setups): `(zeta_k, weight, paired)`.
fn zeta_schedule(cutoff: f64, spacing: f64) -> Result<Vec<(f64, f64, bool)>> {
    if !(spacing > 0.0) || !(cutoff > 0.0) {
        return Err(Error::ShapeMismatch {
            context: "frequency grid needs positive cutoff and spacing".to_string(),
        });
    }
    let k_max = (cutoff / spacing + 1e-9).floor() as usize;
    Ok((0..=k_max)
        .map(|k| {
            let w = if k == k_max { 0.5 * spacing } else { spacing };
            (k as f64 * spacing, w, k > 0)
        })
        .collect())
}

fn is_real_setup(setup: &BoundarySetup) -> bool {
    let real = |m: &CMatrix| m.iter().all(|z| z.im == 0.0);
    real(&setup.pi)
        && setup.gamma.iter().all(|g| real(g))
        && setup.q.as_ref().map_or(true, real)
        && setup.s.as_ref().map_or(true, real)
}

fn require_planar(setup: &BoundarySetup) -> Result<()> {
    if setup.m != 2 {
        return Err(Error::ShapeMismatch {
            context: format!(
                "frequency synthesis covers one tangential direction (m = 2), got m = {}",
                setup.m
            ),
        });
    }
    Ok(())
}

fn check_synthesis(setup: &BoundarySetup, t: f64, grid: &SynthesisGrid) -> Result<()> {
    require_planar(setup)?;
    check_mode_times(grid.length, t)?;
    let required = 8.0 / t.sqrt();
    if grid.cutoff < required {
        return Err(Error::CutoffTooSmall {
            cutoff: grid.cutoff,
            required,
        });
    }
    Ok(())
}

/// Mode data evaluated per frequency, combining a node with its mirror for
/// real setups.
fn synthesize_blocks(
    setup: &BoundarySetup,
    t: f64,
    grid: &SynthesisGrid,
    indices: &[usize],
    enforce_stability: bool,
) -> Result<Vec<CMatrix>> {
    let real = is_real_setup(setup);
    let schedule = zeta_schedule(grid.cutoff, grid.spacing)?;
    let d = setup.dim_v;
    let tasks: Vec<(f64, f64, bool)> = if real {
        schedule
    } else {
        // Evaluate both signs explicitly.
        schedule
            .into_iter()
            .flat_map(|(z, w, paired)| {
                if paired {
                    vec![(z, w, false), (-z, w, false)]
                } else {
                    vec![(z, w, false)]
                }
            })
            .collect()
    };
    let per_mode: Vec<Result<Vec<CMatrix>>> = tasks
        .par_iter()
        .map(|&(zk, _, _)| {
            let assembled = assemble(setup, &Covector::new(vec![zk]), grid.length, grid.n_grid, None)?;
            let eig = ModeEig::new(assembled)?;
            if enforce_stability && eig.min_lambda() < STABILITY_TOL {
                return Err(Error::InstabilityDetected {
                    min_eigenvalue: eig.min_lambda(),
                });
            }
            Ok(indices.iter().map(|&i| eig.block(i, t)).collect())
        })
        .collect();

    let mut acc: Vec<CMatrix> = (0..indices.len()).map(|_| CMatrix::zeros(d, d)).collect();
    for (blocks, &(_, w, paired)) in per_mode.into_iter().zip(&tasks) {
        let blocks = blocks?;
        for (slot, block) in acc.iter_mut().zip(blocks) {
            if real && paired {
                // K(-zeta) = conj(K(zeta)): the pair contributes twice the
                // real part.
                *slot += block.map(|e| Complex64::new(2.0 * w * e.re, 0.0));
            } else {
                *slot += block.map(|e| e * Complex64::new(w, 0.0));
            }
        }
    }
    let norm = Complex64::new(1.0 / (2.0 * PI), 0.0);
    Ok(acc.into_iter().map(|m| m.map(|e| e * norm)).collect())
}

fn node_index(r: f64, h: f64, n: usize) -> Result<usize> {
    let idx = (r / h).round();
    if !(idx >= 0.0) || idx as usize >= n {
        return Err(Error::ShapeMismatch {
            context: format!("distance {r} outside the spatial grid"),
        });
    }
    Ok(idx as usize)
}

/// Heat-diagonal brackets `(4 pi t) U(t | r, r)` reconstructed by frequency
/// synthesis at each requested distance (snapped to the nearest grid node).
pub fn oracle_bracket_profile(
    setup: &BoundarySetup,
    t: f64,
    rs: &[f64],
    grid: &SynthesisGrid,
) -> Result<Vec<CMatrix>> {
    check_synthesis(setup, t, grid)?;
    let report = check_strong_ellipticity(setup, DEFAULT_DIRECTION_SAMPLES)?;
    if report.classification != Classification::StronglyElliptic {
        return Err(Error::NotElliptic {
            margin: report.min_margin,
        });
    }
    let h = grid.length / (grid.n_grid - 1) as f64;
    let indices: Vec<usize> = rs
        .iter()
        .map(|&r| node_index(r, h, grid.n_grid))
        .collect::<Result<_>>()?;
    let u = synthesize_blocks(setup, t, grid, &indices, true)?;
    let scale = Complex64::new(4.0 * PI * t, 0.0);
    Ok(u.into_iter().map(|m| m.map(|e| e * scale)).collect())
}

/// Single-point variant of [`oracle_bracket_profile`].
pub fn oracle_diagonal(
    setup: &BoundarySetup,
    t: f64,
    r: f64,
    grid: &SynthesisGrid,
) -> Result<CMatrix> {
    Ok(oracle_bracket_profile(setup, t, &[r], grid)?.remove(0))
}

/// Small-time fit of the boundary heat coefficient from the discretized
/// modes: integrate the free-kernel-subtracted diagonal trace over the near
/// half of the domain, rescale, and fit `c0 + c1 sqrt(t)`.
pub fn oracle_bhalf(setup: &BoundarySetup, t_sweep: &[f64]) -> Result<OracleBHalf> {
    oracle_bhalf_with(setup, t_sweep, None, None)
}

/// [`oracle_bhalf`] with explicit overrides for the spatial resolution and
/// the domain truncation length; `None` keeps the sweep-derived default.
pub fn oracle_bhalf_with(
    setup: &BoundarySetup,
    t_sweep: &[f64],
    n_grid_override: Option<usize>,
    length_override: Option<f64>,
) -> Result<OracleBHalf> {
    require_planar(setup)?;
    if t_sweep.len() < 3 {
        return Err(Error::FitIllConditioned {
            context: format!("need at least 3 times, got {}", t_sweep.len()),
        });
    }
    if t_sweep.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::FitIllConditioned {
            context: "times must be positive".to_string(),
        });
    }
    let t_min = t_sweep.iter().copied().fold(f64::INFINITY, f64::min);
    let t_max = t_sweep.iter().copied().fold(0.0, f64::max);
    if t_max / t_min < 10.0 {
        return Err(Error::FitIllConditioned {
            context: format!(
                "sweep {t_min:.3e}..{t_max:.3e} spans less than one decade"
            ),
        });
    }
    let report = check_strong_ellipticity(setup, DEFAULT_DIRECTION_SAMPLES)?;
    if report.classification != Classification::StronglyElliptic {
        return Err(Error::NotElliptic {
            margin: report.min_margin,
        });
    }

    let length_target = length_override.unwrap_or(8.0 * t_max.sqrt());
    if !(length_target > 0.0) {
        return Err(Error::ShapeMismatch {
            context: "domain length must be positive".to_string(),
        });
    }
    let n_grid = match n_grid_override {
        Some(n) => n,
        None => (length_target / (t_min.sqrt() / 12.0)).ceil() as usize + 1,
    };
    if n_grid > MAX_GRID {
        return Err(Error::ShapeMismatch {
            context: format!("sweep needs {n_grid} grid points, cap is {MAX_GRID}"),
        });
    }
    if n_grid < MIN_GRID {
        return Err(Error::GridTooCoarse {
            n_grid,
            min: MIN_GRID,
        });
    }
    let (h, length) = match n_grid_override {
        Some(n) => (length_target / (n - 1) as f64, length_target),
        None => {
            let h = t_min.sqrt() / 12.0;
            (h, (n_grid - 1) as f64 * h)
        }
    };
    let cutoff = 8.0 / t_min.sqrt();
    let spacing = 1.0 / (3.0 * t_max.sqrt());
    // Integrate only the near half of the domain so the far Dirichlet
    // truncation wall does not contribute its own boundary layer.
    let cut = (n_grid - 1) / 2;
    let d = setup.dim_v;
    let real = is_real_setup(setup);
    let schedule = zeta_schedule(cutoff, spacing)?;
    let tasks: Vec<(f64, f64, bool)> = if real {
        schedule
    } else {
        schedule
            .into_iter()
            .flat_map(|(z, w, paired)| {
                if paired {
                    vec![(z, w, false), (-z, w, false)]
                } else {
                    vec![(z, w, false)]
                }
            })
            .collect()
    };

    // Per frequency: the trapezoid r-integral of the diagonal trace at every
    // sweep time, from one eigendecomposition.
    let per_mode: Vec<Result<Vec<f64>>> = tasks
        .par_iter()
        .map(|&(zk, _, _)| {
            let assembled = assemble(setup, &Covector::new(vec![zk]), length, n_grid, None)?;
            let eig = ModeEig::new(assembled)?;
            if eig.min_lambda() < STABILITY_TOL {
                return Err(Error::InstabilityDetected {
                    min_eigenvalue: eig.min_lambda(),
                });
            }
            let mut sums = Vec::with_capacity(t_sweep.len());
            for &t in t_sweep {
                let traces = eig.node_traces(t, cut);
                let mut acc = NeumaierSum::new();
                for (i, &tr) in traces.iter().enumerate() {
                    let w_trap = if i == 0 || i == cut { 0.5 * h } else { h };
                    acc.add(w_trap * tr);
                }
                sums.push(acc.value());
            }
            Ok(sums)
        })
        .collect();
    let per_mode: Vec<Vec<f64>> = per_mode.into_iter().collect::<Result<_>>()?;

    let r_cut = cut as f64 * h;
    let mut ys = Vec::with_capacity(t_sweep.len());
    for (j, &t) in t_sweep.iter().enumerate() {
        let free = free_lattice_diagonal(t, h);
        let mut acc = NeumaierSum::new();
        for (sums, &(zk, w, paired)) in per_mode.iter().zip(&tasks) {
            let pair_factor = if real && paired { 2.0 } else { 1.0 };
            let excess = sums[j] - (-t * zk * zk).exp() * free * d as f64 * r_cut;
            acc.add(pair_factor * w * excess);
        }
        let diff = acc.value() / (2.0 * PI);
        ys.push(4.0 * PI * t * diff / t.sqrt());
    }

    // Least-squares fit y = c0 + c1 sqrt(t).
    let n = t_sweep.len() as f64;
    let sx: f64 = t_sweep.iter().map(|t| t.sqrt()).sum();
    let sxx: f64 = t_sweep.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxy: f64 = t_sweep.iter().zip(&ys).map(|(t, y)| t.sqrt() * y).sum();
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-12 * (n * sxx).abs().max(1.0) {
        return Err(Error::FitIllConditioned {
            context: "normal equations singular".to_string(),
        });
    }
    let c0 = (sxx * sy - sx * sxy) / det;
    let c1 = (n * sxy - sx * sy) / det;
    let mut rss = 0.0;
    for (t, y) in t_sweep.iter().zip(&ys) {
        let fit = c0 + c1 * t.sqrt();
        rss += (y - fit) * (y - fit);
    }
    Ok(OracleBHalf {
        estimate: c0,
        fit_residual: (rss / n).sqrt(),
    })
}

/// Divergence probe for violated setups: the near-boundary integral of the
/// absolute bracket trace under coupled refinement of the spatial grid and
/// the frequency cutoff (fixed spacing). For a strongly elliptic setup the
/// sequence converges; past the borderline it grows without bound.
pub fn breakdown_probe(
    setup: &BoundarySetup,
    t: f64,
    n0: usize,
    length: f64,
    z0: f64,
    levels: usize,
) -> Result<Vec<f64>> {
    require_planar(setup)?;
    if !(t > 0.0) || !(length > 0.0) || !(z0 > 0.0) {
        return Err(Error::ShapeMismatch {
            context: "probe needs positive t, length, cutoff".to_string(),
        });
    }
    if levels == 0 || levels > 4 {
        return Err(Error::ShapeMismatch {
            context: format!("refinement levels {levels} outside 1..=4"),
        });
    }
    let spacing = z0 / 18.0;
    let mut out = Vec::with_capacity(levels);
    for level in 0..levels {
        let n_grid = ((n0 - 1) << level) + 1;
        if n_grid > MAX_GRID {
            return Err(Error::ShapeMismatch {
                context: format!("level {level} needs {n_grid} grid points, cap is {MAX_GRID}"),
            });
        }
        let cutoff = z0 * (1usize << level) as f64;
        let h = length / (n_grid - 1) as f64;
        let cut = (n_grid - 1) / 4;
        let indices: Vec<usize> = (0..=cut).collect();
        let grid = SynthesisGrid {
            n_grid,
            length,
            cutoff,
            spacing,
        };
        // No ellipticity or stability gate, and no far-wall accuracy
        // requirement: the probe quantifies divergence, not convergence.
        let u = synthesize_blocks(setup, t, &grid, &indices, false)?;
        let mut acc = NeumaierSum::new();
        for (i, block) in u.iter().enumerate() {
            let w_trap = if i == 0 || i == cut { 0.5 * h } else { h };
            let tr: f64 = block.diagonal().iter().map(|e| e.re).sum();
            acc.add(w_trap * (4.0 * PI * t * tr).abs());
        }
        out.push(acc.value());
    }
    Ok(out)
}
