//! Induced boundary problems of linearized gauge theories.
//!
//! A first-order gauge generator enters the boundary analysis only through
//! the boundary restriction of its leading symbol: a normal component `nu`
//! and tangential components `mu^j`, each mapping the gauge fibre into the
//! field fibre, together with positive-definite fibre metrics `E` (field)
//! and `gamma` (gauge).  Writing `nubar = gamma^{-1} nu^* E` for the metric
//! adjoint, the gauge-invariant boundary conditions of the associated
//! Laplace-type operator are the oblique conditions with
//!
//! ```text
//! Pi      = I - nu nubar,
//! Gamma^j = -nu nubar mu^j nubar .
//! ```
//!
//! Strong ellipticity of that induced problem can equivalently be decided by
//! the projected quadratic form `(I-Pi)[|zeta|^2 I - mu(zeta) mubar(zeta)](I-Pi)`
//! on the range of `I-Pi`; [`gauge_ellipticity`] evaluates both routes and
//! reports them side by side.
//!
//! All computations happen in metric-orthonormal frames (`nu -> E^{1/2} nu
//! gamma^{-1/2}` and likewise for `mu^j`), where `nubar` reduces to the plain
//! conjugate transpose.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::boundary::{validate_setup, BoundarySetup, Covector, ValidationIssue, ValidationReport};
use crate::ellipticity::{check_strong_ellipticity, EllipticityReport};
use crate::error::{Error, Result};
use crate::quad::unit_directions;
use crate::spectral::{
    frob, hermiticity_residual, identity, matfun, min_eigenvalue, CMatrix, POSDEF_TOL,
};

/// Tolerance for the structural identities of gauge data: the normalization
/// `nubar nu = I`, the Laplace-type requirement on the composite symbol, and
/// the postconditions of the induced boundary construction.
pub const GAUGE_TOL: f64 = 1e-10;

/// Boundary restriction of the leading symbol of a first-order gauge
/// generator, together with the fibre metrics that define its adjoint.
#[derive(Debug, Clone)]
pub struct GaugeSymbol {
    /// Field-fibre dimension.
    pub dim_v: usize,
    /// Gauge-fibre dimension (strictly smaller than `dim_v`).
    pub dim_g: usize,
    /// Normal component of the generator symbol, `dim_v x dim_g`.
    pub nu: CMatrix,
    /// Tangential components, one per boundary direction, each `dim_v x dim_g`.
    pub mu: Vec<CMatrix>,
    /// Positive-definite metric on the field fibre.
    pub e_metric: CMatrix,
    /// Positive-definite metric on the gauge fibre.
    pub g_metric: CMatrix,
}

impl GaugeSymbol {
    /// Manifold dimension implied by the number of tangential components.
    pub fn m(&self) -> usize {
        self.mu.len() + 1
    }

    fn check_shapes(&self) -> Result<()> {
        if self.dim_g == 0 || self.dim_v <= self.dim_g {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "gauge fibre must satisfy 0 < dim_g < dim_v, got dim_g={} dim_v={}",
                    self.dim_g, self.dim_v
                ),
            });
        }
        if self.mu.is_empty() {
            return Err(Error::ShapeMismatch {
                context: "at least one tangential component is required (m >= 2)".to_string(),
            });
        }
        let want = (self.dim_v, self.dim_g);
        if self.nu.shape() != want {
            return Err(Error::ShapeMismatch {
                context: format!("nu is {:?}, expected {want:?}", self.nu.shape()),
            });
        }
        for (j, mu) in self.mu.iter().enumerate() {
            if mu.shape() != want {
                return Err(Error::ShapeMismatch {
                    context: format!("mu[{j}] is {:?}, expected {want:?}", mu.shape()),
                });
            }
        }
        if self.e_metric.shape() != (self.dim_v, self.dim_v) {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "e_metric is {:?}, expected square of side {}",
                    self.e_metric.shape(),
                    self.dim_v
                ),
            });
        }
        if self.g_metric.shape() != (self.dim_g, self.dim_g) {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "g_metric is {:?}, expected square of side {}",
                    self.g_metric.shape(),
                    self.dim_g
                ),
            });
        }
        Ok(())
    }
}

/// Ellipticity analysis of the induced boundary problem: the induced setup
/// itself, its sampled strong-ellipticity report, and the margin of the
/// direct quadratic-form criterion evaluated on the gauge symbol.
#[derive(Debug, Clone)]
pub struct GaugeEllipticityReport {
    /// Induced oblique boundary setup.
    pub induced: BoundarySetup,
    /// Classification of the induced setup's boundary symbol.
    pub report: EllipticityReport,
    /// Smallest sampled eigenvalue of `(I-Pi)[I - mu(zeta) mubar(zeta)](I-Pi)`
    /// restricted to the range of `I-Pi`, over unit `zeta`.  Positive iff the
    /// direct criterion certifies strong ellipticity.
    pub direct_margin: f64,
}

/// Check the structural invariants of gauge data and list violations with
/// residuals: metric self-adjointness and definiteness, and the normalization
/// `nubar nu = I` on the gauge fibre.  Shape errors are hard failures.
pub fn validate_gauge(sym: &GaugeSymbol) -> Result<ValidationReport> {
    sym.check_shapes()?;
    let mut issues = Vec::new();

    let mut metric_ok = [false; 2];
    for (slot, (name, metric)) in [("e_metric", &sym.e_metric), ("g_metric", &sym.g_metric)]
        .into_iter()
        .enumerate()
    {
        let herm = hermiticity_residual(metric);
        if herm > GAUGE_TOL * frob(metric).max(1.0) {
            issues.push(ValidationIssue {
                invariant: format!("{name} self-adjoint"),
                residual: herm,
            });
        }
        let sym_part = (metric + metric.adjoint()).scale(0.5);
        let min = min_eigenvalue(&sym_part)?;
        if min <= POSDEF_TOL {
            issues.push(ValidationIssue {
                invariant: format!("{name} positive-definite"),
                residual: (POSDEF_TOL - min).max(0.0),
            });
        } else {
            metric_ok[slot] = true;
        }
    }

    // The normalization needs gamma^{-1}; only meaningful for usable metrics.
    if metric_ok[0] && metric_ok[1] {
        let gram = sym.nu.adjoint() * &sym.e_metric * &sym.nu;
        let lu = sym.g_metric.clone().lu();
        if let Some(nubar_nu) = lu.solve(&gram) {
            let residual = frob(&(nubar_nu - identity(sym.dim_g)));
            if residual > GAUGE_TOL {
                issues.push(ValidationIssue {
                    invariant: "normalization nubar nu = identity".to_string(),
                    residual,
                });
            }
        } else {
            issues.push(ValidationIssue {
                invariant: "g_metric invertible".to_string(),
                residual: f64::INFINITY,
            });
        }
    }

    Ok(ValidationReport { issues })
}

/// Gauge data transported to metric-orthonormal frames, where the metric
/// adjoint is the plain conjugate transpose.
struct Frame {
    nu_t: CMatrix,
    mu_t: Vec<CMatrix>,
    dim_v: usize,
    dim_g: usize,
}

impl Frame {
    fn m(&self) -> usize {
        self.mu_t.len() + 1
    }
}

fn metric_roots(metric: &CMatrix, name: &str) -> Result<(CMatrix, CMatrix)> {
    let min = min_eigenvalue(metric)?;
    if min <= POSDEF_TOL {
        return Err(Error::DomainError {
            eigenvalue: min,
            reason: format!("{name} must be positive-definite"),
        });
    }
    Ok((matfun(metric, f64::sqrt)?, matfun(metric, |x| 1.0 / x.sqrt())?))
}

fn ortho_frame(sym: &GaugeSymbol) -> Result<Frame> {
    sym.check_shapes()?;
    let (e_half, _) = metric_roots(&sym.e_metric, "e_metric")?;
    let (_, g_inv_half) = metric_roots(&sym.g_metric, "g_metric")?;
    let nu_t = &e_half * &sym.nu * &g_inv_half;
    let mu_t = sym
        .mu
        .iter()
        .map(|mu| &e_half * mu * &g_inv_half)
        .collect();
    Ok(Frame {
        nu_t,
        mu_t,
        dim_v: sym.dim_v,
        dim_g: sym.dim_g,
    })
}

/// Build the induced oblique boundary setup `Pi = I - nu nubar`,
/// `Gamma^j = -nu nubar mu^j nubar`, expressed in the field-metric
/// orthonormal frame.
///
/// The structural claims of the construction are asserted as postconditions:
/// each `Gamma^j` must come out anti-self-adjoint and orthogonal to `Pi`, and
/// the assembled setup must pass full validation.  A violation signals input
/// that does not satisfy the construction's assumptions (for example an
/// unnormalized `nu`, or a generator whose composite symbol is not
/// Laplace-type) and is reported as [`Error::ClaimViolated`].
pub fn induced_boundary_setup(sym: &GaugeSymbol) -> Result<BoundarySetup> {
    let frame = ortho_frame(sym)?;
    induced_from_frame(&frame)
}

fn induced_from_frame(frame: &Frame) -> Result<BoundarySetup> {
    let nubar = frame.nu_t.adjoint();
    let normal_proj = &frame.nu_t * &nubar;
    let pi = identity(frame.dim_v) - &normal_proj;

    let gammas: Vec<CMatrix> = frame
        .mu_t
        .iter()
        .map(|mu| -(&frame.nu_t * (&nubar * mu) * &nubar))
        .collect();

    let scale = gammas.iter().map(frob).fold(1.0_f64, f64::max);
    let mut worst_anti = 0.0_f64;
    let mut worst_ortho = 0.0_f64;
    for gamma in &gammas {
        worst_anti = worst_anti.max(frob(&(gamma + gamma.adjoint())));
        worst_ortho = worst_ortho
            .max(frob(&(&pi * gamma)))
            .max(frob(&(gamma * &pi)));
    }
    if worst_anti > GAUGE_TOL * scale {
        return Err(Error::ClaimViolated {
            claim: "induced tangential matrices are anti-self-adjoint".to_string(),
            residual: worst_anti,
        });
    }
    if worst_ortho > GAUGE_TOL * scale {
        return Err(Error::ClaimViolated {
            claim: "induced tangential matrices are orthogonal to the projector".to_string(),
            residual: worst_ortho,
        });
    }

    let setup = BoundarySetup::new(frame.m(), pi, gammas, None, None)?;
    let validation = validate_setup(&setup);
    if let Some(issue) = validation.issues.first() {
        return Err(Error::ClaimViolated {
            claim: format!("induced setup invariant '{}'", issue.invariant),
            residual: issue.residual,
        });
    }
    Ok(setup)
}

fn direct_margin_in_frame(frame: &Frame, zeta: &Covector) -> Result<f64> {
    if zeta.dim() != frame.m() - 1 {
        return Err(Error::ShapeMismatch {
            context: format!(
                "covector has {} components, boundary is {}-dimensional",
                zeta.dim(),
                frame.m() - 1
            ),
        });
    }
    if zeta.is_zero() {
        return Err(Error::ZeroCovector);
    }
    let norm = zeta.norm();
    let mut mu_z = CMatrix::zeros(frame.dim_v, frame.dim_g);
    for (j, mu) in frame.mu_t.iter().enumerate() {
        mu_z += mu.scale(zeta.zeta[j] / norm);
    }
    // Compression of (I-Pi)[I - mu mubar](I-Pi) to the range of I-Pi by the
    // isometry nu: the margin matrix is I - (mubar nu)^* (mubar nu).
    let d = mu_z.adjoint() * &frame.nu_t;
    let margin = identity(frame.dim_g) - d.adjoint() * &d;
    min_eigenvalue(&margin)
}

/// Margin of the direct quadratic-form criterion at one direction: the
/// smallest eigenvalue of `(I-Pi)[I - mu(zeta) mubar(zeta)](I-Pi)` on the
/// range of `I-Pi`, with `zeta` normalized to unit length internally.
pub fn direct_margin(sym: &GaugeSymbol, zeta: &Covector) -> Result<f64> {
    let frame = ortho_frame(sym)?;
    direct_margin_in_frame(&frame, zeta)
}

/// Classify the induced boundary problem by both available routes: the
/// boundary-symbol spectral-radius test on the induced setup, and the direct
/// projected quadratic form evaluated on the gauge symbol over the same
/// direction sampling.
pub fn gauge_ellipticity(sym: &GaugeSymbol, n_samples: usize) -> Result<GaugeEllipticityReport> {
    let frame = ortho_frame(sym)?;
    let induced = induced_from_frame(&frame)?;
    let report = check_strong_ellipticity(&induced, n_samples)?;

    let dirs = if frame.m() == 2 {
        // The direct form is even in zeta, so one representative suffices.
        vec![DVector::from_vec(vec![1.0])]
    } else {
        unit_directions(frame.m() - 1, n_samples.max(1))?
    };
    let mut margin = f64::INFINITY;
    for dir in dirs {
        margin = margin.min(direct_margin_in_frame(&frame, &Covector { zeta: dir })?);
    }

    Ok(GaugeEllipticityReport {
        induced,
        report,
        direct_margin: margin,
    })
}

/// Worst deviation of the generator from squaring to a Laplace-type operator:
/// with `B_a` the frame-orthonormal symbol components (tangential ones first,
/// the normal one last), returns the largest Frobenius norm of
/// `B_a^* B_b + B_b^* B_a - 2 delta_ab I` over all pairs.  Zero exactly when
/// the composite second-order symbol equals `|xi|^2 I` on the gauge fibre for
/// every real direction `xi`.
pub fn ghost_symbol_defect(sym: &GaugeSymbol) -> Result<f64> {
    let frame = ortho_frame(sym)?;
    Ok(ghost_defect_in_frame(&frame))
}

fn ghost_defect_in_frame(frame: &Frame) -> f64 {
    let mut components: Vec<&CMatrix> = frame.mu_t.iter().collect();
    components.push(&frame.nu_t);
    let eye2 = identity(frame.dim_g).scale(2.0);
    let mut worst = 0.0_f64;
    for (a, ba) in components.iter().enumerate() {
        for (b, bb) in components.iter().enumerate().skip(a) {
            let mut gram = ba.adjoint() * *bb + bb.adjoint() * *ba;
            if a == b {
                gram -= &eye2;
            }
            worst = worst.max(frob(&gram));
        }
    }
    worst
}

/// Construct one of the built-in gauge models.
///
/// `abelian-vector` (any `m >= 2`): fields are covectors, the gauge fibre is
/// scalar, and the generator symbol is `xi |-> i xi`; the induced conditions
/// are the mixed Dirichlet/Neumann ones with no tangential coupling.
///
/// `graviton` (any `m >= 3`): fields are symmetric 2-tensors, the gauge fibre
/// is covectors, the normal symbol is the symmetrized tensor product
/// `eps |-> i c (N (x) eps + eps (x) N)`, and the field metric is drawn from
/// the positive-definite family `I + lambda g (x) g` with `lambda > -1/m`
/// (`lambda` defaults to 0).  The plain symmetrized tangential symbols cannot
/// make the composite symbol Laplace-type anywhere in that family, so the
/// tangential components carry an exterior-product completion in the
/// orthogonal complement of the normal range that restores the Laplace-type
/// identity exactly; the construction verifies the identity and the
/// normalization before returning and raises [`Error::NormalizationFailure`]
/// if the requested `lambda` degenerates the metric.
pub fn builtin_model(name: &str, m: usize, lambda: Option<f64>) -> Result<GaugeSymbol> {
    match name {
        "abelian-vector" => {
            if m < 2 {
                return Err(Error::UnsupportedModel {
                    context: format!("abelian-vector model needs m >= 2, got {m}"),
                });
            }
            abelian_vector(m)
        }
        "graviton" => {
            if m < 3 {
                return Err(Error::UnsupportedModel {
                    context: format!("graviton model needs m >= 3, got {m}"),
                });
            }
            graviton(m, lambda.unwrap_or(0.0))
        }
        other => Err(Error::UnsupportedModel {
            context: format!("unknown model '{other}' (available: abelian-vector, graviton)"),
        }),
    }
}

fn abelian_vector(m: usize) -> Result<GaugeSymbol> {
    let mut nu = CMatrix::zeros(m, 1);
    nu[(m - 1, 0)] = Complex64::i();
    let mu = (0..m - 1)
        .map(|j| {
            let mut col = CMatrix::zeros(m, 1);
            col[(j, 0)] = Complex64::i();
            col
        })
        .collect();
    let sym = GaugeSymbol {
        dim_v: m,
        dim_g: 1,
        nu,
        mu,
        e_metric: identity(m),
        g_metric: identity(1),
    };
    verify_builtin(sym)
}

/// Row-major index into the upper triangle (including the diagonal) of an
/// `m x m` symmetric array, enumerating the orthonormal fibre basis of
/// symmetric 2-tensors.
fn sym_index(m: usize) -> impl Fn(usize, usize) -> usize {
    move |a: usize, b: usize| {
        debug_assert!(a <= b && b < m);
        a * m - a * (a + 1) / 2 + b
    }
}

/// Row-major index into the strict upper triangle of an `n x n` array,
/// enumerating the exterior-product basis on the tangential directions.
fn wedge_index(n: usize) -> impl Fn(usize, usize) -> usize {
    move |p: usize, q: usize| {
        debug_assert!(p < q && q < n);
        p * n - p * (p + 1) / 2 + q - p - 1
    }
}

fn graviton(m: usize, lambda: f64) -> Result<GaugeSymbol> {
    let dim_g = m;
    let dim_v = m * (m + 1) / 2;
    let mt = m - 1;
    let trace_scale = 1.0 + lambda * m as f64;
    if trace_scale <= 1e-9 {
        return Err(Error::NormalizationFailure {
            context: format!(
                "field metric I + lambda g(x)g degenerates: need lambda > -1/{m}, got {lambda}"
            ),
        });
    }
    let idx = sym_index(m);

    // Unit trace direction in the symmetric-tensor fibre.
    let mut trace_dir = CMatrix::zeros(dim_v, 1);
    for a in 0..m {
        trace_dir[(idx(a, a), 0)] = Complex64::new(1.0 / (m as f64).sqrt(), 0.0);
    }
    let e_metric = identity(dim_v) + (&trace_dir * trace_dir.adjoint()).scale(lambda * m as f64);

    // Gauge metric tuned so nubar nu = I for the symmetrized normal symbol
    // with c = 1/sqrt(2): tangential weights 2c^2, normal weight 4c^2(1+lambda).
    let mut g_metric = identity(dim_g);
    g_metric[(mt, mt)] = Complex64::new(2.0 * (1.0 + lambda), 0.0);

    // Normal symbol eps |-> i c (N (x) eps + eps (x) N) on the orthonormal
    // tensor basis.
    let mut nu = CMatrix::zeros(dim_v, dim_g);
    for j in 0..mt {
        nu[(idx(j, m - 1), j)] = Complex64::i();
    }
    nu[(idx(m - 1, m - 1), mt)] = Complex64::i() * std::f64::consts::SQRT_2;

    let (e_half, e_inv_half) = metric_roots(&e_metric, "e_metric")?;
    let (g_half, g_inv_half) = metric_roots(&g_metric, "g_metric")?;
    let nu_t = &e_half * &nu * &g_inv_half;

    // Isometric completion target: tangential-tangential off-diagonal tensor
    // directions, exactly orthogonal to the range of the normal symbol for
    // every lambda in the family.
    let n_wedge = mt * (mt - 1) / 2;
    let widx = wedge_index(mt);
    let mut w = CMatrix::zeros(dim_v, n_wedge);
    for p in 0..mt {
        for q in (p + 1)..mt {
            w[(idx(p, q), widx(p, q))] = Complex64::new(1.0, 0.0);
        }
    }

    // Tangential symbols mu~^j = nu~ S_j + W T_j: the rotation part S_j feeds
    // the induced tangential matrices, the wedge part T_j makes the composite
    // symbol exactly Laplace-type (the polarized products of the pair close
    // to 2 delta_ij on the gauge fibre).
    let mut mu = Vec::with_capacity(mt);
    for j in 0..mt {
        let mut s_j = CMatrix::zeros(dim_g, dim_g);
        s_j[(j, mt)] = Complex64::new(1.0, 0.0);
        s_j[(mt, j)] = Complex64::new(-1.0, 0.0);
        let mut t_j = CMatrix::zeros(n_wedge, dim_g);
        for k in 0..mt {
            if k < j {
                t_j[(widx(k, j), k)] = Complex64::new(-1.0, 0.0);
            } else if k > j {
                t_j[(widx(j, k), k)] = Complex64::new(1.0, 0.0);
            }
        }
        let mu_t = &nu_t * &s_j + &w * &t_j;
        mu.push(&e_inv_half * &mu_t * &g_half);
    }

    let sym = GaugeSymbol {
        dim_v,
        dim_g,
        nu,
        mu,
        e_metric,
        g_metric,
    };
    verify_builtin(sym)
}

fn verify_builtin(sym: GaugeSymbol) -> Result<GaugeSymbol> {
    let frame = ortho_frame(&sym)?;
    let norm_residual = frob(&(frame.nu_t.adjoint() * &frame.nu_t - identity(sym.dim_g)));
    if norm_residual > GAUGE_TOL {
        return Err(Error::NormalizationFailure {
            context: format!("normal symbol fails nubar nu = identity by {norm_residual:.3e}"),
        });
    }
    let defect = ghost_defect_in_frame(&frame);
    if defect > GAUGE_TOL {
        return Err(Error::NormalizationFailure {
            context: format!("composite symbol deviates from Laplace type by {defect:.3e}"),
        });
    }
    Ok(sym)
}

/// Draw a seeded random gauge symbol with `dim_v = m * dim_g + extra` that
/// satisfies the normalization and the Laplace-type requirement by
/// construction: random anti-Hermitian rotation parts scaled for strong
/// ellipticity, a square-root completion of their polarized Gram deficit in a
/// random orthogonal complement, and random well-conditioned fibre metrics.
pub fn random_gauge_symbol(seed: u64, m: usize, dim_g: usize, extra: usize) -> Result<GaugeSymbol> {
    if m < 2 || dim_g == 0 {
        return Err(Error::ShapeMismatch {
            context: format!("random gauge symbol needs m >= 2 and dim_g >= 1, got m={m} dim_g={dim_g}"),
        });
    }
    let mt = m - 1;
    let aux = mt * dim_g;
    let dim_v = m * dim_g + extra;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut draw = |rows: usize, cols: usize| -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
    };

    // Anti-Hermitian rotation parts, scaled so that every tangential
    // combination stays strictly inside the ellipticity bound.
    let raw: Vec<CMatrix> = (0..mt)
        .map(|_| {
            let a = draw(dim_g, dim_g);
            (&a - a.adjoint()).scale(0.5)
        })
        .collect();
    let mut top = 0.0_f64;
    for s in &raw {
        // Spectral norm through the Hermitian companion i S.
        let herm = s.map(|z| z * Complex64::i());
        let min = min_eigenvalue(&herm)?;
        let max = -min_eigenvalue(&(-&herm))?;
        top = top.max(min.abs().max(max.abs()));
    }
    let scale = if top > 0.0 {
        0.8 / ((mt as f64).sqrt() * top)
    } else {
        1.0
    };
    let s_parts: Vec<CMatrix> = raw.iter().map(|s| s.scale(scale)).collect();

    // Polarized Gram deficit 2 delta_ij I + {S_i, S_j}; positive-definite by
    // the scaling, so its square root supplies the completion blocks.
    let mut gram = CMatrix::zeros(aux, aux);
    for i in 0..mt {
        for j in 0..mt {
            let mut block = &s_parts[i] * &s_parts[j] + &s_parts[j] * &s_parts[i];
            if i == j {
                block += identity(dim_g).scale(2.0);
            }
            gram
                .view_mut((i * dim_g, j * dim_g), (dim_g, dim_g))
                .copy_from(&block);
        }
    }
    let gram = (&gram + gram.adjoint()).scale(0.5);
    let root = matfun(&gram, |x| x.max(0.0).sqrt())?;
    let t_parts: Vec<CMatrix> = (0..mt)
        .map(|i| {
            root.view((0, i * dim_g), (aux, dim_g))
                .into_owned()
                .scale(std::f64::consts::FRAC_1_SQRT_2)
        })
        .collect();

    // Random orthonormal ranges for the normal symbol and the completion.
    let q = draw(dim_v, dim_v).qr().q();
    let nu_t = q.view((0, 0), (dim_v, dim_g)).into_owned();
    let w = q.view((0, dim_g), (dim_v, aux)).into_owned();
    let mu_t: Vec<CMatrix> = (0..mt)
        .map(|j| &nu_t * &s_parts[j] + &w * &t_parts[j])
        .collect();

    // Well-conditioned random metrics, then transport back to the raw frame.
    let mut metric = |n: usize| -> Result<CMatrix> {
        let a = draw(n, n);
        let herm = (&a + a.adjoint()).scale(0.5);
        let spread = frob(&herm).max(1e-12);
        Ok(identity(n) + herm.scale(0.5 / spread))
    };
    let e_metric = metric(dim_v)?;
    let g_metric = metric(dim_g)?;
    let (_, e_inv_half) = metric_roots(&e_metric, "e_metric")?;
    let (g_half, _) = metric_roots(&g_metric, "g_metric")?;

    let nu = &e_inv_half * &nu_t * &g_half;
    let mu = mu_t
        .iter()
        .map(|m_t| &e_inv_half * m_t * &g_half)
        .collect();
    Ok(GaugeSymbol {
        dim_v,
        dim_g,
        nu,
        mu,
        e_metric,
        g_metric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ellipticity::{natural_spectrum, sufficient_condition, Classification};
    use approx::assert_relative_eq;

    fn unit_dirs(m: usize, n: usize) -> Vec<Covector> {
        if m == 2 {
            vec![Covector::new(vec![1.0])]
        } else {
            unit_directions(m - 1, n)
                .unwrap()
                .into_iter()
                .map(|zeta| Covector { zeta })
                .collect()
        }
    }

    #[test]
    fn abelian_vector_is_maximally_elliptic() {
        for m in [2, 3, 5] {
            let sym = builtin_model("abelian-vector", m, None).unwrap();
            assert_eq!((sym.dim_v, sym.dim_g), (m, 1));
            assert!(validate_gauge(&sym).unwrap().is_valid());
            let induced = induced_boundary_setup(&sym).unwrap();
            assert_eq!(induced.pi_rank(), m - 1);
            for gamma in &induced.gamma {
                assert!(frob(gamma) < 1e-14, "tangential coupling should vanish");
            }
            let analysis = gauge_ellipticity(&sym, 64).unwrap();
            assert_eq!(
                analysis.report.classification,
                Classification::StronglyElliptic
            );
            assert_relative_eq!(analysis.report.min_margin, 1.0, max_relative = 1e-12);
            assert_relative_eq!(analysis.direct_margin, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn scaling_nu_breaks_normalization() {
        let mut sym = builtin_model("abelian-vector", 3, None).unwrap();
        sym.nu *= Complex64::new(2.0, 0.0);
        let report = validate_gauge(&sym).unwrap();
        let issue = report
            .issues
            .iter()
            .find(|i| i.invariant.contains("normalization"))
            .expect("normalization issue");
        assert_relative_eq!(issue.residual, 3.0, max_relative = 1e-12);
        assert!(matches!(
            induced_boundary_setup(&sym),
            Err(Error::ClaimViolated { .. })
        ));
    }

    #[test]
    fn indefinite_field_metric_is_flagged() {
        let mut sym = builtin_model("abelian-vector", 3, None).unwrap();
        sym.e_metric[(2, 2)] = Complex64::new(-1.0, 0.0);
        let report = validate_gauge(&sym).unwrap();
        assert!(report
            .issues
            .iter()
            .any(|i| i.invariant == "e_metric positive-definite"));
        assert!(matches!(
            induced_boundary_setup(&sym),
            Err(Error::DomainError { .. })
        ));
    }

    #[test]
    fn bad_shapes_are_rejected() {
        let good = builtin_model("abelian-vector", 3, None).unwrap();
        let mut short = good.clone();
        short.mu.pop();
        short.mu.pop();
        assert!(matches!(
            validate_gauge(&short),
            Err(Error::ShapeMismatch { .. })
        ));
        let mut flat = good;
        flat.dim_g = 3;
        assert!(matches!(
            validate_gauge(&flat),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn graviton_builtin_satisfies_structural_identities() {
        for m in [3, 4, 5] {
            let sym = builtin_model("graviton", m, None).unwrap();
            assert_eq!((sym.dim_v, sym.dim_g), (m * (m + 1) / 2, m));
            assert!(validate_gauge(&sym).unwrap().is_valid());
            assert!(ghost_symbol_defect(&sym).unwrap() < 1e-12);
        }
    }

    #[test]
    fn graviton_induced_problem_is_borderline() {
        let sym = builtin_model("graviton", 4, None).unwrap();
        let analysis = gauge_ellipticity(&sym, 128).unwrap();
        assert_eq!(analysis.report.classification, Classification::Borderline);
        assert!(analysis.direct_margin.abs() <= 1e-9);

        let induced = &analysis.induced;
        let commutator = &induced.gamma[0] * &induced.gamma[1]
            - &induced.gamma[1] * &induced.gamma[0];
        assert!(
            frob(&commutator) > 0.1,
            "tangential matrices should not commute"
        );
        let spectrum = natural_spectrum(induced, 64, 1e-8).unwrap();
        assert!(spectrum.isotropic);
        assert_eq!(spectrum.zero_mult, 8);
        assert_eq!(spectrum.branches.len(), 1);
        assert_relative_eq!(spectrum.branches[0].0, 1.0, max_relative = 1e-12);
        assert_eq!(spectrum.branches[0].1, 1);
    }

    #[test]
    fn graviton_lambda_family_is_uniformly_borderline() {
        for lambda in [-0.2, 0.5, 3.0] {
            let sym = builtin_model("graviton", 4, Some(lambda)).unwrap();
            assert!(validate_gauge(&sym).unwrap().is_valid());
            let analysis = gauge_ellipticity(&sym, 64).unwrap();
            assert_eq!(
                analysis.report.classification,
                Classification::Borderline,
                "lambda = {lambda}"
            );
        }
        for lambda in [-0.25, -0.5] {
            assert!(matches!(
                builtin_model("graviton", 4, Some(lambda)),
                Err(Error::NormalizationFailure { .. })
            ));
        }
        assert!(matches!(
            builtin_model("graviton", 2, None),
            Err(Error::UnsupportedModel { .. })
        ));
        assert!(matches!(
            builtin_model("pion", 3, None),
            Err(Error::UnsupportedModel { .. })
        ));
    }

    #[test]
    fn random_symbols_satisfy_the_induced_claims() {
        let cases = [(2, 1, 0), (2, 2, 1), (3, 1, 0), (3, 2, 2), (4, 2, 1)];
        for (m, dim_g, extra) in cases {
            for seed in 0..3 {
                let sym = random_gauge_symbol(1000 * seed + 7, m, dim_g, extra).unwrap();
                assert!(
                    validate_gauge(&sym).unwrap().is_valid(),
                    "m={m} g={dim_g} seed={seed}"
                );
                assert!(ghost_symbol_defect(&sym).unwrap() < 1e-10);
                let analysis = gauge_ellipticity(&sym, 32).unwrap();
                // The rotation parts are scaled to stay inside the bound.
                assert_eq!(
                    analysis.report.classification,
                    Classification::StronglyElliptic
                );
                assert!(analysis.report.min_margin > 0.1);
                assert!(analysis.direct_margin > 0.1);
            }
        }
    }

    #[test]
    fn criteria_agree_on_every_direction() {
        let base = random_gauge_symbol(42, 3, 2, 1).unwrap();
        let mut hot = base.clone();
        for mu in &mut hot.mu {
            *mu *= Complex64::new(3.0, 0.0);
        }
        for sym in [&base, &hot] {
            let induced = induced_boundary_setup(sym).unwrap();
            for zeta in unit_dirs(sym.m(), 48) {
                let sufficient = sufficient_condition(&induced, &zeta).unwrap();
                let margin = direct_margin(sym, &zeta).unwrap();
                assert_eq!(
                    sufficient,
                    margin > POSDEF_TOL,
                    "direction {:?} margin {margin}",
                    zeta.zeta
                );
            }
        }
        let analysis = gauge_ellipticity(&hot, 64).unwrap();
        assert_eq!(analysis.report.classification, Classification::Violated);
        assert!(analysis.direct_margin < 0.0);
    }

    #[test]
    fn classification_is_frame_covariant() {
        let sym = random_gauge_symbol(9, 4, 2, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let ginibre = CMatrix::from_fn(sym.dim_v, sym.dim_v, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        });
        let u = ginibre.qr().q();

        let rotated = GaugeSymbol {
            dim_v: sym.dim_v,
            dim_g: sym.dim_g,
            nu: &u * &sym.nu,
            mu: sym.mu.iter().map(|mu| &u * mu).collect(),
            e_metric: &u * &sym.e_metric * u.adjoint(),
            g_metric: sym.g_metric.clone(),
        };
        assert!(validate_gauge(&rotated).unwrap().is_valid());

        let a = gauge_ellipticity(&sym, 64).unwrap();
        let b = gauge_ellipticity(&rotated, 64).unwrap();
        assert_eq!(a.report.classification, b.report.classification);
        assert_relative_eq!(a.report.min_margin, b.report.min_margin, epsilon = 1e-9);
        assert_relative_eq!(a.direct_margin, b.direct_margin, epsilon = 1e-9);

        let conjugated = &u * &a.induced.pi * u.adjoint();
        assert!(frob(&(&b.induced.pi - conjugated)) < 1e-9);
    }
}
