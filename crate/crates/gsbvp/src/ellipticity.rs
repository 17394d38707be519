//! Strong-ellipticity classification of the boundary symbol, and extraction
//! of its natural eigenvalue structure.
//!
//! The boundary problem is strongly elliptic iff `|zeta| I - i gamma.zeta` is
//! positive definite for every nonzero tangential `zeta`; by homogeneity the
//! check reduces to the unit sphere, where the margin of the pair `{zeta,
//! -zeta}` is `1 - rho(i gamma.zeta)` with `rho` the spectral radius. Sampled
//! minimization under-approximates violation detection: a reported
//! `StronglyElliptic` certifies all *sampled* directions only, though for the
//! built-in isotropic models the sampled minimum is exact.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::boundary::{hermitian_symbol, tangential_symbol, BoundarySetup, Covector};
use crate::quad::unit_directions;
use crate::spectral::{herm_eig, identity, min_eigenvalue, POSDEF_TOL};
use crate::{Error, Result};

/// Default number of sampled unit directions for `m >= 3`.
pub const DEFAULT_DIRECTION_SAMPLES: usize = 512;
/// Default half-width of the borderline band around zero margin.
pub const DEFAULT_BORDERLINE_BAND: f64 = 1e-9;
/// Absolute tolerance for clustering eigenvalues into multiplicity groups.
pub const CLUSTER_TOL: f64 = 1e-8;

/// Outcome of the strong-ellipticity test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    StronglyElliptic,
    Borderline,
    Violated,
}

/// Report of the sampled minimization of the symbol margin.
#[derive(Debug, Clone)]
pub struct EllipticityReport {
    pub classification: Classification,
    /// Infimum over sampled unit `zeta` of the smallest eigenvalue of
    /// `I - i gamma.zeta`.
    pub min_margin: f64,
    /// The sampled unit direction attaining the minimum (signed: the member
    /// of the antipodal pair on which the minimum is attained).
    pub worst_direction: Covector,
    /// Number of unit directions covered (each evaluated direction covers its
    /// antipode through the spectral radius, and both are counted).
    pub samples_used: usize,
}

/// Eigenvalue structure of `i gamma.zeta` on unit directions: a zero group
/// and symmetric branches `+/- nu_k`, each with a multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalSpectrum {
    /// Multiplicity of the zero eigenvalue.
    pub zero_mult: usize,
    /// `(nu_k, d_k)` sorted by `nu` ascending, all `nu > 0`;
    /// `zero_mult + 2 * sum(d_k) = dim_v`.
    pub branches: Vec<(f64, usize)>,
    /// True iff the structure agrees across all sampled directions within the
    /// requested tolerance; when false, `branches` holds the worst direction
    /// (largest `nu_max`) and callers must treat `nu_k` as
    /// direction-dependent.
    pub isotropic: bool,
}

impl NaturalSpectrum {
    /// Largest branch eigenvalue (0 when there are no branches).
    pub fn nu_max(&self) -> f64 {
        self.branches.last().map_or(0.0, |&(nu, _)| nu)
    }
}

fn sample_directions(setup: &BoundarySetup, n_samples: usize) -> Result<Vec<DVector<f64>>> {
    if setup.m == 2 {
        // One representative per antipodal pair; the pair {+1, -1} is
        // exhaustive.
        Ok(vec![DVector::from_vec(vec![1.0])])
    } else {
        unit_directions(setup.m - 1, n_samples.max(1))
    }
}

/// Per-direction data: eigenvalues of the Hermitian symbol, ascending.
fn direction_eigenvalues(setup: &BoundarySetup, dir: &DVector<f64>) -> Result<Vec<f64>> {
    let h = hermitian_symbol(setup, &Covector { zeta: dir.clone() })?;
    let eig = herm_eig(&h)?;
    Ok(eig.eigenvalues.iter().copied().collect())
}

/// Classify strong ellipticity with the default borderline band.
pub fn check_strong_ellipticity(setup: &BoundarySetup, n_samples: usize) -> Result<EllipticityReport> {
    check_strong_ellipticity_with_band(setup, n_samples, DEFAULT_BORDERLINE_BAND)
}

/// Classify strong ellipticity, declaring `Borderline` when the sampled
/// margin lies within `band` of zero.
pub fn check_strong_ellipticity_with_band(
    setup: &BoundarySetup,
    n_samples: usize,
    band: f64,
) -> Result<EllipticityReport> {
    let dirs = sample_directions(setup, n_samples)?;
    let per_dir: Vec<Result<(f64, f64)>> = dirs
        .par_iter()
        .map(|dir| {
            let eigs = direction_eigenvalues(setup, dir)?;
            let lo = *eigs.first().expect("nonempty spectrum");
            let hi = *eigs.last().expect("nonempty spectrum");
            // Margin of the antipodal pair, and the sign on which it is
            // attained: +1 when the top eigenvalue dominates.
            let rho = hi.max(-lo);
            let sign = if hi >= -lo { 1.0 } else { -1.0 };
            Ok((1.0 - rho, sign))
        })
        .collect();

    let mut min_margin = f64::INFINITY;
    let mut worst = DVector::from_vec(vec![0.0; setup.m - 1]);
    for (dir, entry) in dirs.iter().zip(per_dir) {
        let (margin, sign) = entry?;
        if margin < min_margin {
            min_margin = margin;
            worst = dir.map(|c| sign * c);
        }
    }

    let classification = if min_margin.abs() <= band {
        Classification::Borderline
    } else if min_margin > 0.0 {
        Classification::StronglyElliptic
    } else {
        Classification::Violated
    };
    Ok(EllipticityReport {
        classification,
        min_margin,
        worst_direction: Covector { zeta: worst },
        samples_used: 2 * dirs.len(),
    })
}

/// The sufficient condition for strong ellipticity at a single covector:
/// `|zeta|^2 I + (gamma.zeta)^2` positive definite.
pub fn sufficient_condition(setup: &BoundarySetup, zeta: &Covector) -> Result<bool> {
    if zeta.is_zero() {
        return Err(Error::ZeroCovector);
    }
    let g = tangential_symbol(setup, zeta)?;
    let norm_sq = zeta.norm() * zeta.norm();
    let mat = identity(setup.dim_v).map(|e| e * norm_sq) + &g * &g;
    Ok(min_eigenvalue(&mat)? > POSDEF_TOL)
}

/// Structure of one direction after symmetrized clustering.
#[derive(Debug, Clone, PartialEq)]
struct DirectionStructure {
    zero_mult: usize,
    branches: Vec<(f64, usize)>,
}

/// Cluster the symmetrized union `spec(H) U -spec(H)` (2 dim_v values) into
/// the zero group and positive branches.
fn cluster_direction(eigs: &[f64]) -> Result<DirectionStructure> {
    let mut sym: Vec<f64> = eigs.iter().flat_map(|&l| [l, -l]).collect();
    sym.sort_by(f64::total_cmp);
    // Group consecutive values whose gap is below the tolerance.
    let mut clusters: Vec<(f64, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=sym.len() {
        if i == sym.len() || sym[i] - sym[i - 1] > CLUSTER_TOL {
            let count = i - start;
            let mean = sym[start..i].iter().sum::<f64>() / count as f64;
            clusters.push((mean, count));
            start = i;
        }
    }
    let mut zero_mult = 0;
    let mut branches = Vec::new();
    for &(mean, count) in &clusters {
        if mean.abs() <= CLUSTER_TOL {
            // The symmetrized union always contains this group twice over.
            zero_mult = count / 2;
        } else if mean > 0.0 {
            if count % 2 != 0 {
                return Err(Error::NonNaturalSpectrum { nu: mean, count });
            }
            branches.push((mean, count / 2));
        }
    }
    Ok(DirectionStructure { zero_mult, branches })
}

fn structures_agree(a: &DirectionStructure, b: &DirectionStructure, iso_tol: f64) -> bool {
    a.zero_mult == b.zero_mult
        && a.branches.len() == b.branches.len()
        && a.branches
            .iter()
            .zip(&b.branches)
            .all(|(&(nu_a, d_a), &(nu_b, d_b))| d_a == d_b && (nu_a - nu_b).abs() <= iso_tol)
}

/// Extract the `{0, +/- nu_k}` eigenvalue structure of the boundary symbol on
/// sampled unit directions.
pub fn natural_spectrum(
    setup: &BoundarySetup,
    n_samples: usize,
    iso_tol: f64,
) -> Result<NaturalSpectrum> {
    let dirs = sample_directions(setup, n_samples)?;
    let per_dir: Vec<Result<DirectionStructure>> = dirs
        .par_iter()
        .map(|dir| cluster_direction(&direction_eigenvalues(setup, dir)?))
        .collect();
    let structures: Vec<DirectionStructure> = per_dir.into_iter().collect::<Result<_>>()?;

    let isotropic = structures
        .iter()
        .all(|s| structures_agree(s, &structures[0], iso_tol));
    // Report the most dangerous direction: largest top branch.
    let worst = structures
        .into_iter()
        .max_by(|a, b| {
            let top = |s: &DirectionStructure| s.branches.last().map_or(0.0, |&(nu, _)| nu);
            top(a).total_cmp(&top(b))
        })
        .expect("at least one sampled direction");
    Ok(NaturalSpectrum {
        zero_mult: worst.zero_mult,
        branches: worst.branches,
        isotropic,
    })
}
