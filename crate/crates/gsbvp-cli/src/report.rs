//! Output documents and deterministic serialization.
//!
//! Every float is written in scientific notation with 17 significant
//! digits, which round-trips `f64` exactly and is identical across
//! platforms and worker counts.

use std::io::{self, Write};

use gsbvp::bhalf::BHalfResult;
use gsbvp::boundary::ValidationReport;
use gsbvp::ellipticity::{EllipticityReport, NaturalSpectrum};
use gsbvp::oracle::OracleBHalf;
use gsbvp::profile::ProfileSample;
use gsbvp::spectral::CMatrix;
use serde::Serialize;
use serde_json::ser::Formatter;

use crate::schema::{from_cmatrix, InducedDto, ProblemFile};

/// `serde_json` formatter that writes every float as `{:.16e}`.
struct SciFormatter;

impl Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.8e}")
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter);
    value
        .serialize(&mut ser)
        .expect("in-memory serialization cannot fail");
    String::from_utf8(out).expect("serialized JSON is UTF-8")
}

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Serialize)]
pub struct IssueOut {
    pub invariant: String,
    pub residual: f64,
}

#[derive(Serialize)]
pub struct ValidationOut {
    pub valid: bool,
    pub issues: Vec<IssueOut>,
}

impl ValidationOut {
    pub fn from_report(report: &ValidationReport) -> Self {
        Self {
            valid: report.is_valid(),
            issues: report
                .issues
                .iter()
                .map(|issue| IssueOut {
                    invariant: issue.invariant.clone(),
                    residual: issue.residual,
                })
                .collect(),
        }
    }
}

#[derive(Serialize)]
pub struct EllipticityOut {
    pub classification: String,
    pub min_margin: f64,
    pub worst_direction: Vec<f64>,
    pub samples_used: usize,
}

impl EllipticityOut {
    pub fn from_report(report: &EllipticityReport) -> Self {
        Self {
            classification: format!("{:?}", report.classification),
            min_margin: report.min_margin,
            worst_direction: report.worst_direction.zeta.iter().copied().collect(),
            samples_used: report.samples_used,
        }
    }
}

#[derive(Serialize)]
pub struct BranchOut {
    pub nu: f64,
    pub multiplicity: usize,
}

#[derive(Serialize)]
pub struct SpectrumOut {
    pub zero_mult: usize,
    pub branches: Vec<BranchOut>,
    pub isotropic: bool,
}

impl SpectrumOut {
    pub fn from_spectrum(spectrum: &NaturalSpectrum) -> Self {
        Self {
            zero_mult: spectrum.zero_mult,
            branches: spectrum
                .branches
                .iter()
                .map(|&(nu, multiplicity)| BranchOut { nu, multiplicity })
                .collect(),
            isotropic: spectrum.isotropic,
        }
    }
}

#[derive(Serialize)]
pub struct BHalfOut {
    pub method: String,
    pub trace: f64,
    pub err_estimate: f64,
    pub value: Vec<Vec<[f64; 2]>>,
}

impl BHalfOut {
    pub fn from_result(result: &BHalfResult) -> Self {
        Self {
            method: result.method.name().to_string(),
            trace: result.trace,
            err_estimate: result.err_estimate,
            value: from_cmatrix(&result.value),
        }
    }
}

#[derive(Serialize)]
pub struct OracleOut {
    pub t_sweep: Vec<f64>,
    pub estimate: f64,
    pub fit_residual: f64,
}

impl OracleOut {
    pub fn from_fit(t_sweep: &[f64], fit: &OracleBHalf) -> Self {
        Self {
            t_sweep: t_sweep.to_vec(),
            estimate: fit.estimate,
            fit_residual: fit.fit_residual,
        }
    }
}

#[derive(Serialize)]
pub struct ProfileRowOut {
    pub z: f64,
    pub psi: Vec<Vec<[f64; 2]>>,
    pub phi: Vec<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
}

impl ProfileRowOut {
    pub fn from_sample(sample: &ProfileSample) -> Self {
        Self {
            z: sample.z,
            psi: from_cmatrix(&sample.psi),
            phi: from_cmatrix(&sample.phi),
            j: sample.j,
        }
    }
}

#[derive(Serialize)]
pub struct BracketRowOut {
    pub r: f64,
    pub bracket: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize)]
pub struct GaugeOut {
    pub validation: ValidationOut,
    pub induced: InducedDto,
    pub ellipticity: EllipticityOut,
    pub direct_margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub natural_spectrum: Option<SpectrumOut>,
}

#[derive(Serialize)]
pub struct CellOut {
    pub index: usize,
    pub area: f64,
    pub validation: ValidationOut,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ellipticity: Option<EllipticityOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bhalf: Option<BHalfOut>,
}

/// The one-document output: populated sections depend on the subcommand and
/// on what is applicable to the input kind.
#[derive(Serialize)]
pub struct ReportDoc {
    pub input: ProblemFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ellipticity: Option<EllipticityOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub natural_spectrum: Option<SpectrumOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bhalf: Option<BHalfOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<Vec<ProfileRowOut>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bracket: Option<Vec<BracketRowOut>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gauge: Option<GaugeOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<CellOut>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_half: Option<f64>,
}

impl ReportDoc {
    pub fn new(input: ProblemFile) -> Self {
        Self {
            input,
            validation: None,
            ellipticity: None,
            natural_spectrum: None,
            bhalf: None,
            profile: None,
            bracket: None,
            oracle: None,
            gauge: None,
            cells: None,
            a_half: None,
        }
    }
}

/// Output document for builtin gauge models, which have no input file.
#[derive(Serialize)]
pub struct GaugeDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<ProblemFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gauge: Option<GaugeOut>,
}

/// CSV column headers for one matrix-valued quantity, row-major with
/// interleaved real and imaginary parts: `psi_re_0_0, psi_im_0_0, ...`.
pub fn matrix_headers(prefix: &str, dim: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(2 * dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            out.push(format!("{prefix}_re_{i}_{j}"));
            out.push(format!("{prefix}_im_{i}_{j}"));
        }
    }
    out
}

/// The matching CSV cells for one matrix.
pub fn matrix_cells(m: &CMatrix) -> Vec<String> {
    let mut out = Vec::with_capacity(2 * m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(fmt_float(m[(i, j)].re));
            out.push(fmt_float(m[(i, j)].im));
        }
    }
    out
}
