//! Problem-file schema: JSON structures with strict field checking and
//! conversions to the library types.
//!
//! Matrices are nested row-major arrays; every entry is either a plain
//! number (a real) or a two-element array `[re, im]`.

use gsbvp::boundary::BoundarySetup;
use gsbvp::gauge::GaugeSymbol;
use gsbvp::spectral::{identity, CMatrix};
use gsbvp::Error;
use nalgebra::Complex;
use serde::{Deserialize, Serialize};

type Complex64 = Complex<f64>;

/// One matrix entry: `0.25` or `[0.0, 0.25]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Pair([f64; 2]),
}

impl Entry {
    fn value(self) -> Complex64 {
        match self {
            Entry::Real(re) => Complex64::new(re, 0.0),
            Entry::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

pub type MatrixDto = Vec<Vec<Entry>>;

pub fn to_cmatrix(mat: &MatrixDto, context: &str) -> Result<CMatrix, Error> {
    let rows = mat.len();
    if rows == 0 {
        return Err(Error::ShapeMismatch {
            context: format!("{context}: matrix has no rows"),
        });
    }
    let cols = mat[0].len();
    if cols == 0 || mat.iter().any(|row| row.len() != cols) {
        return Err(Error::ShapeMismatch {
            context: format!("{context}: rows must be nonempty and of equal length"),
        });
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| mat[i][j].value()))
}

/// Canonical serialization of a matrix: always `[re, im]` pairs.
pub fn from_cmatrix(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Boundary,
    Gauge,
    Mesh,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema_version: u32,
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<GaugeDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<Vec<MeshCellDto>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<ParamsDto>,
}

impl ProblemFile {
    /// Structural checks beyond what serde enforces: version pinning and
    /// kind/payload consistency.
    pub fn check_consistency(&self) -> Result<(), Error> {
        if self.schema_version != 1 {
            return Err(Error::ShapeMismatch {
                context: format!("unsupported schema_version {} (expected 1)", self.schema_version),
            });
        }
        let fail = |context: &str| {
            Err(Error::ShapeMismatch {
                context: context.to_string(),
            })
        };
        match self.kind {
            Kind::Boundary => {
                if self.boundary.is_none() {
                    return fail("kind \"boundary\" requires a \"boundary\" payload");
                }
                if self.gauge.is_some() || self.mesh.is_some() {
                    return fail("kind \"boundary\" admits only a \"boundary\" payload");
                }
            }
            Kind::Gauge => {
                if self.gauge.is_none() {
                    return fail("kind \"gauge\" requires a \"gauge\" payload");
                }
                if self.boundary.is_some() || self.mesh.is_some() {
                    return fail("kind \"gauge\" admits only a \"gauge\" payload");
                }
            }
            Kind::Mesh => {
                if self.mesh.is_none() {
                    return fail("kind \"mesh\" requires a \"mesh\" payload");
                }
                if self.boundary.is_some() || self.gauge.is_some() {
                    return fail("kind \"mesh\" admits only a \"mesh\" payload");
                }
            }
        }
        Ok(())
    }

    pub fn params(&self) -> ParamsDto {
        self.parameters.clone().unwrap_or_default()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryDto {
    pub m: usize,
    pub dim_v: usize,
    pub pi: MatrixDto,
    pub gamma: Vec<MatrixDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<MatrixDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<MatrixDto>,
}

impl BoundaryDto {
    pub fn to_setup(&self) -> Result<BoundarySetup, Error> {
        let pi = to_cmatrix(&self.pi, "pi")?;
        if pi.nrows() != self.dim_v {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "pi is {}x{} but dim_v = {}",
                    pi.nrows(),
                    pi.ncols(),
                    self.dim_v
                ),
            });
        }
        let gamma = self
            .gamma
            .iter()
            .enumerate()
            .map(|(j, g)| to_cmatrix(g, &format!("gamma[{j}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let s = self.s.as_ref().map(|m| to_cmatrix(m, "s")).transpose()?;
        let q = self.q.as_ref().map(|m| to_cmatrix(m, "q")).transpose()?;
        BoundarySetup::new(self.m, pi, gamma, s, q)
    }
}

/// Canonical echo of a library setup (used for induced problems).
pub fn boundary_echo(setup: &BoundarySetup) -> InducedDto {
    InducedDto {
        m: setup.m,
        dim_v: setup.dim_v,
        pi: from_cmatrix(&setup.pi),
        gamma: setup.gamma.iter().map(from_cmatrix).collect(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InducedDto {
    pub m: usize,
    pub dim_v: usize,
    pub pi: Vec<Vec<[f64; 2]>>,
    pub gamma: Vec<Vec<Vec<[f64; 2]>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeDto {
    pub m: usize,
    pub dim_v: usize,
    pub dim_g: usize,
    pub nu: MatrixDto,
    pub mu: Vec<MatrixDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_metric: Option<MatrixDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_metric: Option<MatrixDto>,
}

impl GaugeDto {
    pub fn to_symbol(&self) -> Result<GaugeSymbol, Error> {
        if self.mu.len() + 1 != self.m {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "m = {} requires {} tangential matrices, got {}",
                    self.m,
                    self.m - 1,
                    self.mu.len()
                ),
            });
        }
        let nu = to_cmatrix(&self.nu, "nu")?;
        let mu = self
            .mu
            .iter()
            .enumerate()
            .map(|(j, m)| to_cmatrix(m, &format!("mu[{j}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let e_metric = match &self.e_metric {
            Some(m) => to_cmatrix(m, "e_metric")?,
            None => identity(self.dim_v),
        };
        let g_metric = match &self.g_metric {
            Some(m) => to_cmatrix(m, "g_metric")?,
            None => identity(self.dim_g),
        };
        Ok(GaugeSymbol {
            dim_v: self.dim_v,
            dim_g: self.dim_g,
            nu,
            mu,
            e_metric,
            g_metric,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshCellDto {
    pub boundary: BoundaryDto,
    pub area: f64,
}

/// Optional analysis parameters carried by the file; command-line flags take
/// precedence over these, which take precedence over built-in defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsDto {
    /// Gauss-Hermite points per axis (tensor quadrature, profile functions).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    /// Unit direction samples for ellipticity scans.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Truncation order for the series method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_max: Option<usize>,
    /// Scaled boundary distances for profile tables in reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_values: Option<Vec<f64>>,
    /// Diffusion time for bracket tables in reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Boundary distances for bracket tables in reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_values: Option<Vec<f64>>,
    /// Diffusion times for the finite-difference coefficient fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_sweep: Option<Vec<f64>>,
    /// Grid size override for the finite-difference oracle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Domain length override for the finite-difference oracle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
}
