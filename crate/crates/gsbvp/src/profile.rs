//! The leading-order boundary parametrix: the resolvent kernel in the mode
//! representation, the boundary-layer profile functions `Psi(z)` and
//! `Phi(z)`, the heat-kernel diagonal bracket, and the fibre-trace profile
//! `J(z)` with its borderline singularity law.
//!
//! All inner (half-line) integrals are closed forms in the complementary
//! error function; the remaining tangential integral is a Gauss-Hermite
//! product rule rescaled so that every node exponent is nonpositive in the
//! elliptic regime, and the radial integral of `J` is adaptive
//! Gauss-Kronrod.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::boundary::{hermitian_symbol, BoundarySetup, Covector};
use crate::ellipticity::{
    check_strong_ellipticity, natural_spectrum, Classification, NaturalSpectrum,
    DEFAULT_DIRECTION_SAMPLES,
};
use crate::quad::{adaptive_gk, gauss_hermite, MatrixSum};
use crate::special::{erfc, erfcx, gamma_half};
use crate::spectral::{frob, herm_eig, identity, CMatrix, HermEig};
use crate::{Error, Result};

/// Absolute tolerance of the radial integral in `trace_profile_j`.
const RADIAL_TOL: f64 = 1e-10;
/// Width of the band around `nu = 1` treated as exactly borderline.
const BORDERLINE_NU_TOL: f64 = 1e-12;

/// Quadrature configuration for the profile functions: Gauss-Hermite points
/// per tangential axis.
#[derive(Debug, Clone, Copy)]
pub struct ProfileCfg {
    pub order: usize,
}

impl Default for ProfileCfg {
    fn default() -> Self {
        Self { order: 40 }
    }
}

/// One row of a profile sweep.
#[derive(Debug, Clone)]
pub struct ProfileSample {
    pub z: f64,
    pub psi: CMatrix,
    pub phi: CMatrix,
    pub j: Option<f64>,
}

/// The scale-invariant heat-diagonal factor at scaled boundary distance.
#[derive(Debug, Clone)]
pub struct HeatDiagonal {
    pub t: f64,
    pub r: f64,
    pub bracket: CMatrix,
}

/// Result of fitting the borderline singularity law.
#[derive(Debug, Clone, Copy)]
pub struct SingularityProbe {
    pub fitted_coeff: f64,
    pub expected: f64,
    pub rel_err: f64,
}

/// The resolvent kernel of the half-line mode problem at frequency `zeta`,
/// spectral parameter `lambda`, and normal coordinates `u`, `v`:
///
/// ```text
/// G = (1/(2s)) { e^{-|u-v| s} I
///              + [I - 2 pi + 2 H (s I - H)^{-1}] e^{-(u+v) s} }
/// ```
///
/// with `H = i gamma.zeta` and `s = sqrt(|zeta|^2 - lambda)` on the
/// principal branch.
pub fn resolvent_kernel(
    setup: &BoundarySetup,
    lambda: Complex64,
    zeta: &Covector,
    u: f64,
    v: f64,
) -> Result<CMatrix> {
    if lambda.im == 0.0 && lambda.re >= 0.0 {
        return Err(Error::BranchCut {
            lambda: format!("{}+{}i", lambda.re, lambda.im),
        });
    }
    if u < 0.0 || v < 0.0 {
        return Err(Error::DomainError {
            eigenvalue: u.min(v),
            reason: "normal coordinates must be nonnegative".to_string(),
        });
    }
    let norm_sq = zeta.norm() * zeta.norm();
    let s = (Complex64::new(norm_sq, 0.0) - lambda).sqrt();
    let h = hermitian_symbol(setup, zeta)?;
    let eig = herm_eig(&h)?;
    let distance = eig
        .eigenvalues
        .iter()
        .map(|&l| (s - Complex64::new(l, 0.0)).norm())
        .fold(f64::INFINITY, f64::min);
    if distance <= 1e-12 * s.norm().max(1.0) {
        return Err(Error::ResolventPole {
            s: format!("{}+{}i", s.re, s.im),
            distance,
        });
    }
    // 2 H (s - H)^{-1} as a function of the eigenvalues of H.
    let oblique = eig.apply_complex(|l| {
        Complex64::new(2.0 * l, 0.0) / (s - Complex64::new(l, 0.0))
    });
    let n = setup.dim_v;
    let bracket = identity(n) - &setup.pi - &setup.pi + oblique;
    let direct = (-(u - v).abs() * s).exp();
    let reflected = (-(u + v) * s).exp();
    let half_s = (2.0 * s).finv();
    Ok((identity(n).map(|e| e * direct) + bracket.map(|e| e * reflected)).map(|e| e * half_s))
}

/// Shared per-node data of the tangential quadrature: normalized weight,
/// eigendecomposition of the symbol at the node, and the squared node norm.
struct NodeCache {
    entries: Vec<(f64, HermEig, f64)>,
    /// `s = sqrt(1 - nu_max^2)`, the rescaling of the integration variable.
    s: f64,
    /// `s^{-(m-1)}`, the Jacobian of the rescaling.
    jacobian: f64,
    dim_v: usize,
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

fn build_cache(setup: &BoundarySetup, order: usize) -> Result<NodeCache> {
    let margin = require_elliptic(setup)?;
    let nu_max = (1.0 - margin).clamp(0.0, 1.0);
    let s_sq = (1.0 - nu_max * nu_max).max(f64::MIN_POSITIVE);
    let s = s_sq.sqrt();
    let k = setup.m - 1;
    let (nodes, weights) = gauss_hermite(order)?;
    let norm = PI.powf(-(k as f64) / 2.0);
    let total: usize = order.pow(k as u32);

    let entries: Vec<Result<(f64, HermEig, f64)>> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut digits = vec![0usize; k];
            let mut r = flat;
            for d in digits.iter_mut() {
                *d = r % order;
                r /= order;
            }
            let u: Vec<f64> = digits.iter().map(|&d| nodes[d]).collect();
            let w: f64 = digits.iter().map(|&d| weights[d]).product::<f64>() * norm;
            let u_sq: f64 = u.iter().map(|c| c * c).sum();
            let h = hermitian_symbol(setup, &Covector::new(u))?;
            Ok((w, herm_eig(&h)?, u_sq))
        })
        .collect();
    let entries: Vec<(f64, HermEig, f64)> = entries.into_iter().collect::<Result<_>>()?;
    Ok(NodeCache {
        entries,
        s,
        jacobian: s.powi(-(k as i32)),
        dim_v: setup.dim_v,
    })
}

/// The half-line integral `int_0^inf exp{-(p+z)^2 + 2 p mu} dp`
/// `= e^{mu^2 - 2 z mu} (sqrt(pi)/2) erfc(z - mu)`, evaluated on the branch
/// that keeps every exponent nonpositive, with the Gaussian damping
/// `exp(w)` of the node (`w <= 0`) folded in.
fn damped_half_line(z: f64, mu: f64, w: f64) -> f64 {
    let half_sqrt_pi = 0.5 * PI.sqrt();
    if z - mu >= 0.0 {
        half_sqrt_pi * (w - z * z).exp() * erfcx(z - mu)
    } else {
        half_sqrt_pi * (w + mu * mu - 2.0 * z * mu).exp() * erfc(z - mu)
    }
}

impl NodeCache {
    /// Accumulate `matfun(H(node), f)` over the nodes with the Gaussian
    /// weights, with a fixed chunked compensated reduction.
    fn integrate(&self, f: impl Fn(f64, f64, f64) -> f64 + Sync) -> Result<CMatrix> {
        let n = self.dim_v;
        let partials: Vec<Result<CMatrix>> = self
            .entries
            .par_chunks(64)
            .map(|chunk| {
                let mut acc = MatrixSum::zeros(n, n);
                for (w, eig, u_sq) in chunk {
                    // w_damp = |u|^2 (1 - 1/s^2) <= 0: the residue of the
                    // Gaussian after rescaling.
                    let w_damp = u_sq * (1.0 - 1.0 / (self.s * self.s));
                    let node = eig.apply(|lambda| f(lambda / self.s, w_damp, *u_sq));
                    if node.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                        return Err(Error::QuadratureDivergence {
                            context: "profile node overflow".to_string(),
                        });
                    }
                    acc.add_scaled(&node, *w);
                }
                Ok(acc.value())
            })
            .collect();
        let mut total = MatrixSum::zeros(n, n);
        for partial in partials {
            total.add_scaled(&partial?, 1.0);
        }
        Ok(total
            .value()
            .map(|e| e * Complex64::new(self.jacobian, 0.0)))
    }

    /// `Psi(z)`: the node function is the `zeta -> -zeta` symmetrized
    /// half-line integral.
    fn psi_at(&self, z: f64) -> Result<CMatrix> {
        let m = self.integrate(|mu, w, _| {
            0.5 * (damped_half_line(z, mu, w) + damped_half_line(z, -mu, w))
        })?;
        Ok(symmetrize_checked(m, "psi"))
    }

    /// `Phi(z) = -2 e^{-z^2} I - 2 d/dz Psi(z)`, with the derivative taken
    /// under the integral sign: the constants cancel and the node function
    /// collapses to `4 mu h(z, mu)`, symmetrized.
    fn phi_at(&self, z: f64) -> Result<CMatrix> {
        let m = self.integrate(|mu, w, _| {
            2.0 * mu * (damped_half_line(z, mu, w) - damped_half_line(z, -mu, w))
        })?;
        Ok(symmetrize_checked(m, "phi"))
    }
}

fn symmetrize_checked(m: CMatrix, what: &str) -> CMatrix {
    let scale = frob(&m).max(1.0);
    let residual = frob(&(&m - m.adjoint()));
    assert!(
        residual <= 1e-8 * scale,
        "{what} lost Hermiticity: residual {residual:.3e}"
    );
    (&m + m.adjoint()).map(|e| e * Complex64::new(0.5, 0.0))
}

fn check_z(z: f64) -> Result<()> {
    if !(z >= 0.0) {
        return Err(Error::DomainError {
            eigenvalue: z,
            reason: "scaled distance z must be nonnegative".to_string(),
        });
    }
    Ok(())
}

/// The boundary-layer profile `Psi(z)`; requires strong ellipticity.
pub fn psi(setup: &BoundarySetup, z: f64, cfg: ProfileCfg) -> Result<CMatrix> {
    check_z(z)?;
    build_cache(setup, cfg.order)?.psi_at(z)
}

/// The boundary-layer profile `Phi(z)`; requires strong ellipticity.
pub fn phi(setup: &BoundarySetup, z: f64, cfg: ProfileCfg) -> Result<CMatrix> {
    check_z(z)?;
    build_cache(setup, cfg.order)?.phi_at(z)
}

/// Sweep the profile functions over a list of `z` values, reusing the
/// tangential quadrature across the sweep. With `with_j` the fibre-trace
/// profile is evaluated from the sampled eigenvalue structure, which must be
/// isotropic.
pub fn profile_samples(
    setup: &BoundarySetup,
    z_values: &[f64],
    cfg: ProfileCfg,
    with_j: bool,
) -> Result<Vec<ProfileSample>> {
    for &z in z_values {
        check_z(z)?;
    }
    let cache = build_cache(setup, cfg.order)?;
    let spectrum = if with_j {
        let spec = natural_spectrum(setup, DEFAULT_DIRECTION_SAMPLES, 1e-8)?;
        if !spec.isotropic {
            return Err(Error::IsotropyRequired);
        }
        Some(spec)
    } else {
        None
    };
    let mut out = Vec::with_capacity(z_values.len());
    for &z in z_values {
        let j = match &spectrum {
            Some(spec) => Some(trace_profile_j(spec, setup.m, z)?),
            None => None,
        };
        out.push(ProfileSample {
            z,
            psi: cache.psi_at(z)?,
            phi: cache.phi_at(z)?,
            j,
        });
    }
    Ok(out)
}

/// The scale-invariant heat-diagonal bracket
/// `I + e^{-r^2/t} (I - 2 pi) + Phi(r / sqrt(t))`.
pub fn heat_diagonal(setup: &BoundarySetup, t: f64, r: f64) -> Result<HeatDiagonal> {
    if !(t > 0.0) {
        return Err(Error::DomainError {
            eigenvalue: t,
            reason: "diffusion time must be positive".to_string(),
        });
    }
    if r < 0.0 {
        return Err(Error::DomainError {
            eigenvalue: r,
            reason: "boundary distance must be nonnegative".to_string(),
        });
    }
    let z = r / t.sqrt();
    let phi_z = phi(setup, z, ProfileCfg::default())?;
    let n = setup.dim_v;
    let damp = Complex64::new((-z * z).exp(), 0.0);
    let bracket = identity(n)
        + (identity(n) - &setup.pi - &setup.pi).map(|e| e * damp)
        + phi_z;
    Ok(HeatDiagonal { t, r, bracket })
}

/// The scalar branch profile: the radial integral of the symmetrized,
/// sign-odd half-line closed form against the spherical measure.
fn branch_profile(nu: f64, m: usize, z: f64) -> Result<f64> {
    if nu > 1.0 + BORDERLINE_NU_TOL {
        return Err(Error::NonellipticDivergence { nu });
    }
    let nu = nu.min(1.0);
    // Measure factor |S^{m-2}| / pi^{(m-1)/2} = 2 / Gamma((m-1)/2).
    let measure = 2.0 / gamma_half(m - 1);
    let half_sqrt_pi = 0.5 * PI.sqrt();

    // Cutoff: the integrand decays like e^{(nu^2-1) rho^2 - 2 z nu rho}
    // past the turning point; take the earlier of the two decay scales.
    let tail_gaussian = if nu < 1.0 {
        (50.0 / (1.0 - nu * nu)).sqrt() + 5.0
    } else {
        f64::INFINITY
    };
    let tail_linear = if z * nu > 0.0 {
        30.0 / (z * nu) + 5.0
    } else {
        f64::INFINITY
    };
    let cutoff = tail_gaussian.min(tail_linear).max(12.0);
    if !cutoff.is_finite() {
        return Err(Error::QuadratureDivergence {
            context: "borderline branch needs z > 0".to_string(),
        });
    }

    let integrand = |rho: f64| -> f64 {
        let mu = nu * rho;
        // e^{-rho^2} [h(z, mu) - h(z, -mu)] on overflow-safe branches.
        let e1 = if z - mu >= 0.0 {
            (-rho * rho - z * z).exp() * erfcx(z - mu)
        } else {
            ((nu * nu - 1.0) * rho * rho - 2.0 * z * mu).exp() * erfc(z - mu)
        };
        let e2 = (-rho * rho - z * z).exp() * erfcx(z + mu);
        rho.powi(m as i32 - 2) * 4.0 * mu * half_sqrt_pi * (e1 - e2)
    };
    let (value, _err) = adaptive_gk(&integrand, 0.0, cutoff, RADIAL_TOL);
    Ok(measure * value)
}

/// The fibre-trace profile `J(z) = sum_k d_k j(nu_k, z)` of an isotropic
/// eigenvalue structure. Divergent (and refused) when any branch exceeds 1.
pub fn trace_profile_j(spectrum: &NaturalSpectrum, m: usize, z: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::ShapeMismatch {
            context: format!("manifold dimension {m} < 2"),
        });
    }
    check_z(z)?;
    if !spectrum.isotropic {
        return Err(Error::IsotropyRequired);
    }
    for &(nu, _) in &spectrum.branches {
        if nu > 1.0 + BORDERLINE_NU_TOL {
            return Err(Error::NonellipticDivergence { nu });
        }
    }
    let mut total = 0.0;
    for &(nu, d) in &spectrum.branches {
        total += d as f64 * branch_profile(nu, m, z)?;
    }
    Ok(total)
}

/// Polynomial extrapolation of `(x_i, y_i)` to `x = 0`.
fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let mut p = ys.to_vec();
    for level in 1..n {
        for i in 0..n - level {
            p[i] = (xs[i] * p[i + 1] - xs[i + level] * p[i]) / (xs[i] - xs[i + level]);
        }
    }
    p[0]
}

/// Fit the borderline singularity law `J(z) ~ C / z^m` on a decreasing list
/// of `z` values and compare the extrapolated coefficient against the
/// predicted `2 d (m-1) Gamma(m/2)` for the unit-speed branch.
pub fn singularity_probe(
    spectrum: &NaturalSpectrum,
    m: usize,
    z_list: &[f64],
) -> Result<SingularityProbe> {
    if z_list.len() < 2 {
        return Err(Error::ShapeMismatch {
            context: "singularity probe needs at least two z values".to_string(),
        });
    }
    for pair in z_list.windows(2) {
        if !(pair[0] > pair[1]) || !(pair[1] > 0.0) {
            return Err(Error::ShapeMismatch {
                context: "z list must be positive and strictly decreasing".to_string(),
            });
        }
    }
    let d = spectrum
        .branches
        .iter()
        .find(|&&(nu, _)| (nu - 1.0).abs() <= 1e-6)
        .map(|&(_, d)| d)
        .ok_or_else(|| Error::DomainError {
            eigenvalue: spectrum.nu_max(),
            reason: "spectrum has no borderline branch (nu = 1)".to_string(),
        })?;
    let expected = 2.0 * d as f64 * (m - 1) as f64 * gamma_half(m);
    let mut ys = Vec::with_capacity(z_list.len());
    for &z in z_list {
        ys.push(z.powi(m as i32) * trace_profile_j(spectrum, m, z)?);
    }
    let fitted = extrapolate_to_zero(z_list, &ys);
    Ok(SingularityProbe {
        fitted_coeff: fitted,
        expected,
        rel_err: (fitted - expected).abs() / expected.abs(),
    })
}
