//! Command-line front end: reads JSON problem files, dispatches to the
//! analysis library, and emits deterministic JSON reports or CSV tables.

mod report;
mod schema;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use gsbvp::bhalf::{
    a_half, bhalf_closed, bhalf_quadrature, bhalf_series, BHalfResult, BoundaryMesh,
    MethodSelector, QuadCfg,
};
use gsbvp::boundary::{validate_setup, BoundarySetup};
use gsbvp::ellipticity::{
    check_strong_ellipticity, natural_spectrum, Classification, EllipticityReport, NaturalSpectrum,
};
use gsbvp::gauge::{gauge_ellipticity, validate_gauge, GaugeSymbol};
use gsbvp::oracle::{oracle_bhalf_with, DEFAULT_T_SWEEP};
use gsbvp::profile::{heat_diagonal, profile_samples, ProfileCfg};
use gsbvp::Error;
use serde::Serialize;

use report::{
    fmt_float, matrix_cells, matrix_headers, to_json_string, BHalfOut, BracketRowOut, CellOut,
    EllipticityOut, GaugeDoc, GaugeOut, OracleOut, ProfileRowOut, ReportDoc, SpectrumOut,
    ValidationOut,
};
use schema::{boundary_echo, Kind, ParamsDto, ProblemFile};

const DEFAULT_ORDER: usize = 40;
const DEFAULT_SAMPLES: usize = 512;
const DEFAULT_SERIES_MAX: usize = 4;
const DEFAULT_Z_GRID: [f64; 6] = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0];
const SPECTRUM_ISO_TOL: f64 = 1e-8;

#[derive(Parser)]
#[command(
    name = "gsbvp",
    version,
    about = "Ellipticity classification, heat-kernel boundary coefficients, and \
             parametrix profiles for oblique boundary-value problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a problem file and classify its boundary symbol.
    Check {
        /// Problem file (JSON).
        file: PathBuf,
    },
    /// Compute the half-order boundary heat coefficient.
    Bhalf {
        /// Problem file (JSON).
        file: PathBuf,
        /// Computation route.
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
        /// Quadrature points per axis, or truncation order for the series.
        #[arg(long)]
        order: Option<usize>,
    },
    /// Tabulate the boundary profile functions as CSV.
    Profile {
        /// Problem file (JSON).
        file: PathBuf,
        /// Scaled distance grid start:stop:count.
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        /// Append the integrated profile column.
        #[arg(long = "with-j")]
        with_j: bool,
    },
    /// Tabulate the scaled heat-diagonal bracket as CSV.
    Diag {
        /// Problem file (JSON).
        file: PathBuf,
        /// Diffusion time.
        #[arg(long)]
        t: f64,
        /// Boundary distance grid start:stop:count.
        #[arg(long, allow_hyphen_values = true)]
        r: String,
    },
    /// Fit the boundary coefficient from the finite-difference solver.
    Oracle {
        /// Problem file (JSON).
        file: PathBuf,
        /// Comma-separated diffusion times.
        #[arg(long = "t-sweep", value_delimiter = ',')]
        t_sweep: Option<Vec<f64>>,
        /// Spatial grid size override.
        #[arg(long)]
        grid: Option<usize>,
        /// Domain length override.
        #[arg(long)]
        length: Option<f64>,
    },
    /// Analyze a gauge generator symbol (builtin model name or file).
    Gauge {
        /// Builtin model name (abelian-vector, graviton) or a problem file.
        target: String,
        /// Manifold dimension for builtin models.
        #[arg(long)]
        m: Option<usize>,
        /// Metric deformation parameter for builtin models.
        #[arg(long, allow_negative_numbers = true)]
        lambda: Option<f64>,
    },
    /// Emit every applicable analysis as one JSON document.
    Report {
        /// Problem file (JSON).
        file: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Quad,
    Series,
    Closed,
}

/// A diagnosed failure: exit code plus the machine-readable error document.
struct Failure {
    code: i32,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn schema(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            kind: "schema",
            message: message.into(),
        }
    }
}

fn classify(error: &Error) -> (i32, &'static str) {
    match error {
        Error::NotElliptic { .. } => (3, "not-elliptic"),
        Error::Cell { source, .. } => (classify(source).0, "cell"),
        Error::ShapeMismatch { .. } => (2, "shape-mismatch"),
        Error::NotHermitian { .. } => (2, "not-hermitian"),
        Error::ZeroCovector => (2, "zero-covector"),
        Error::OrderTooHigh { .. } => (2, "order-too-high"),
        Error::NoClosedForm { .. } => (2, "no-closed-form"),
        Error::IsotropyRequired => (2, "isotropy-required"),
        Error::NonNaturalSpectrum { .. } => (2, "non-natural-spectrum"),
        Error::GridTooCoarse { .. } => (2, "grid-too-coarse"),
        Error::CutoffTooSmall { .. } => (2, "cutoff-too-small"),
        Error::ClaimViolated { .. } => (2, "claim-violated"),
        Error::UnsupportedModel { .. } => (2, "unsupported-model"),
        Error::NormalizationFailure { .. } => (2, "normalization-failure"),
        Error::ConvergenceFailure { .. } => (4, "convergence-failure"),
        Error::DomainError { .. } => (4, "domain-error"),
        Error::QuadratureDivergence { .. } => (4, "quadrature-divergence"),
        Error::BranchCut { .. } => (4, "branch-cut"),
        Error::ResolventPole { .. } => (4, "resolvent-pole"),
        Error::NonellipticDivergence { .. } => (4, "nonelliptic-divergence"),
        Error::InstabilityDetected { .. } => (4, "instability"),
        Error::FitIllConditioned { .. } => (4, "fit-ill-conditioned"),
    }
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let (code, kind) = classify(&error);
        Self {
            code,
            kind,
            message: error.to_string(),
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: i32,
    kind: &'a str,
    message: &'a str,
}

#[derive(Serialize)]
struct ErrorDoc<'a> {
    error: ErrorBody<'a>,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    if let Err(failure) = configure_threads() {
        emit_failure(&failure);
        return failure.code;
    }
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(failure) => {
            emit_failure(&failure);
            failure.code
        }
    }
}

fn emit_failure(failure: &Failure) {
    let doc = ErrorDoc {
        error: ErrorBody {
            code: failure.code,
            kind: failure.kind,
            message: &failure.message,
        },
    };
    eprintln!("{}", to_json_string(&doc));
}

fn configure_threads() -> Result<(), Failure> {
    match std::env::var("GSBVP_THREADS") {
        Ok(raw) => {
            let n: usize = raw
                .trim()
                .parse()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| {
                    Failure::schema(format!(
                        "GSBVP_THREADS must be a positive integer, got {raw:?}"
                    ))
                })?;
            // A second initialization in the same process is harmless here:
            // the pool is configured once per CLI invocation.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
            Ok(())
        }
        Err(std::env::VarError::NotPresent) => Ok(()),
        Err(std::env::VarError::NotUnicode(_)) => {
            Err(Failure::schema("GSBVP_THREADS is not valid unicode"))
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Check { file } => run_check(&file),
        Command::Bhalf {
            file,
            method,
            order,
        } => run_bhalf(&file, method, order),
        Command::Profile { file, z, with_j } => run_profile(&file, &z, with_j),
        Command::Diag { file, t, r } => run_diag(&file, t, &r),
        Command::Oracle {
            file,
            t_sweep,
            grid,
            length,
        } => run_oracle(&file, t_sweep, grid, length),
        Command::Gauge { target, m, lambda } => run_gauge(&target, m, lambda),
        Command::Report { file } => run_report(&file),
    }
}

fn load(path: &Path) -> Result<ProblemFile, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::schema(format!("cannot read {}: {e}", path.display())))?;
    let file: ProblemFile = serde_json::from_str(&text)
        .map_err(|e| Failure::schema(format!("{}: {e}", path.display())))?;
    file.check_consistency()?;
    Ok(file)
}

fn samples_of(params: &ParamsDto) -> usize {
    params.samples.unwrap_or(DEFAULT_SAMPLES)
}

fn profile_cfg(params: &ParamsDto) -> ProfileCfg {
    ProfileCfg {
        order: params.order.unwrap_or(DEFAULT_ORDER),
    }
}

/// Parse a `start:stop:count` grid description.
fn parse_grid(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Failure::schema(format!("--{what} expects start:stop:count, got {text:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    if count == 0 || !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let step = (stop - start) / (count - 1) as f64;
    Ok((0..count).map(|k| start + step * k as f64).collect())
}

/// The classification gate for analyses whose integrals require strong
/// ellipticity outright.
fn require_strongly_elliptic(
    setup: &BoundarySetup,
    samples: usize,
) -> Result<EllipticityReport, Failure> {
    let report = check_strong_ellipticity(setup, samples)?;
    if report.classification != Classification::StronglyElliptic {
        return Err(Error::NotElliptic {
            margin: report.min_margin,
        }
        .into());
    }
    Ok(report)
}

/// The weaker gate for pointwise profile evaluation, which stays finite on
/// the borderline.
fn require_not_violated(
    setup: &BoundarySetup,
    samples: usize,
) -> Result<EllipticityReport, Failure> {
    let report = check_strong_ellipticity(setup, samples)?;
    if report.classification == Classification::Violated {
        return Err(Error::NotElliptic {
            margin: report.min_margin,
        }
        .into());
    }
    Ok(report)
}

fn spectrum_of(setup: &BoundarySetup, samples: usize) -> Result<Option<NaturalSpectrum>, Failure> {
    match natural_spectrum(setup, samples, SPECTRUM_ISO_TOL) {
        Ok(spectrum) => Ok(Some(spectrum)),
        Err(Error::NonNaturalSpectrum { .. }) => Ok(None),
        Err(error) => Err(error.into()),
    }
}

fn bhalf_auto(setup: &BoundarySetup) -> Result<BHalfResult, Error> {
    match bhalf_closed(setup) {
        Err(Error::NoClosedForm { .. }) => bhalf_quadrature(setup, QuadCfg::default()),
        other => other,
    }
}

/// The setup a problem file's analyses act on: the boundary payload itself,
/// or the induced boundary problem of a gauge payload.
fn setup_of(file: &ProblemFile) -> Result<BoundarySetup, Failure> {
    match file.kind {
        Kind::Boundary => Ok(file.boundary.as_ref().expect("checked").to_setup()?),
        Kind::Gauge => {
            let symbol = file.gauge.as_ref().expect("checked").to_symbol()?;
            Ok(gsbvp::gauge::induced_boundary_setup(&symbol)?)
        }
        Kind::Mesh => Err(Failure::schema(
            "this subcommand needs a single setup; got a mesh",
        )),
    }
}

fn mesh_of(file: &ProblemFile) -> Result<Vec<(BoundarySetup, f64)>, Failure> {
    let cells = file.mesh.as_ref().expect("checked");
    if cells.is_empty() {
        return Err(Failure::schema("mesh has no cells"));
    }
    cells
        .iter()
        .map(|cell| Ok((cell.boundary.to_setup()?, cell.area)))
        .collect()
}

fn emit<T: Serialize>(doc: &T) {
    println!("{}", to_json_string(doc));
}

// ---------------------------------------------------------------------------
// check

fn run_check(path: &Path) -> Result<(), Failure> {
    let file = load(path)?;
    build_document(file, false)
}

// ---------------------------------------------------------------------------
// report

fn run_report(path: &Path) -> Result<(), Failure> {
    let file = load(path)?;
    build_document(file, true)
}

/// Shared builder: `check` emits the validation/classification sections,
/// `report` additionally computes everything applicable.
fn build_document(file: ProblemFile, full: bool) -> Result<(), Failure> {
    let params = file.params();
    let samples = samples_of(&params);
    match file.kind {
        Kind::Boundary => {
            let setup = file.boundary.as_ref().expect("checked").to_setup()?;
            let mut doc = ReportDoc::new(file);
            let validation = validate_setup(&setup);
            let valid = validation.is_valid();
            doc.validation = Some(ValidationOut::from_report(&validation));
            if !valid {
                emit(&doc);
                return Err(Failure {
                    code: 2,
                    kind: "validation",
                    message: format!(
                        "boundary setup violates {} invariant(s)",
                        validation.issues.len()
                    ),
                });
            }
            let ellipticity = check_strong_ellipticity(&setup, samples)?;
            doc.ellipticity = Some(EllipticityOut::from_report(&ellipticity));
            let spectrum = spectrum_of(&setup, samples)?;
            doc.natural_spectrum = spectrum.as_ref().map(SpectrumOut::from_spectrum);
            if full {
                fill_analysis_sections(&mut doc, &setup, &params, &ellipticity, &spectrum)?;
            }
            emit(&doc);
            Ok(())
        }
        Kind::Gauge => {
            let symbol = file.gauge.as_ref().expect("checked").to_symbol()?;
            let mut doc = ReportDoc::new(file);
            let gauge = gauge_sections(&symbol, samples)?;
            match gauge {
                GaugeSections::Invalid(validation) => {
                    let count = validation.issues.len();
                    doc.validation = Some(validation);
                    emit(&doc);
                    Err(Failure {
                        code: 2,
                        kind: "validation",
                        message: format!("gauge symbol violates {count} invariant(s)"),
                    })
                }
                GaugeSections::Valid(out) => {
                    if full {
                        let induced = gsbvp::gauge::induced_boundary_setup(&symbol)?;
                        let ellipticity = check_strong_ellipticity(&induced, samples)?;
                        let spectrum = spectrum_of(&induced, samples)?;
                        fill_analysis_sections(
                            &mut doc,
                            &induced,
                            &params,
                            &ellipticity,
                            &spectrum,
                        )?;
                    }
                    doc.gauge = Some(*out);
                    emit(&doc);
                    Ok(())
                }
            }
        }
        Kind::Mesh => {
            let cells = mesh_of(&file)?;
            let mut doc = ReportDoc::new(file);
            let mut outs = Vec::with_capacity(cells.len());
            let mut invalid = 0usize;
            let mut all_se = true;
            for (index, (setup, area)) in cells.iter().enumerate() {
                let validation = validate_setup(setup);
                let valid = validation.is_valid();
                let mut out = CellOut {
                    index,
                    area: *area,
                    validation: ValidationOut::from_report(&validation),
                    ellipticity: None,
                    bhalf: None,
                };
                if valid {
                    let ellipticity = check_strong_ellipticity(setup, samples)?;
                    let se = ellipticity.classification == Classification::StronglyElliptic;
                    all_se &= se;
                    out.ellipticity = Some(EllipticityOut::from_report(&ellipticity));
                    if full && se {
                        out.bhalf = Some(BHalfOut::from_result(&bhalf_auto(setup)?));
                    }
                } else {
                    invalid += 1;
                    all_se = false;
                }
                outs.push(out);
            }
            doc.cells = Some(outs);
            if full && all_se {
                let mesh = BoundaryMesh::new(cells)?;
                doc.a_half = Some(a_half(&mesh, MethodSelector::Auto)?);
            }
            emit(&doc);
            if invalid > 0 {
                return Err(Failure {
                    code: 2,
                    kind: "validation",
                    message: format!("{invalid} mesh cell(s) violate invariants"),
                });
            }
            Ok(())
        }
    }
}

/// Report-only sections for one strongly-checked setup: the coefficient, the
/// profile table, the bracket table, and the solver fit, each where
/// applicable.
fn fill_analysis_sections(
    doc: &mut ReportDoc,
    setup: &BoundarySetup,
    params: &ParamsDto,
    ellipticity: &EllipticityReport,
    spectrum: &Option<NaturalSpectrum>,
) -> Result<(), Failure> {
    let strongly = ellipticity.classification == Classification::StronglyElliptic;
    if strongly {
        doc.bhalf = Some(BHalfOut::from_result(&bhalf_auto(setup)?));
    }
    if ellipticity.classification != Classification::Violated {
        let zs: Vec<f64> = params
            .z_values
            .clone()
            .unwrap_or_else(|| DEFAULT_Z_GRID.to_vec());
        let with_j = spectrum
            .as_ref()
            .is_some_and(|s| s.isotropic && s.nu_max() < 1.0 - 1e-9);
        let rows = profile_samples(setup, &zs, profile_cfg(params), with_j)?;
        doc.profile = Some(rows.iter().map(ProfileRowOut::from_sample).collect());
        if let (Some(t), Some(rs)) = (params.t, params.r_values.as_ref()) {
            let mut bracket_rows = Vec::with_capacity(rs.len());
            for &r in rs {
                let diag = heat_diagonal(setup, t, r)?;
                bracket_rows.push(BracketRowOut {
                    r,
                    bracket: schema::from_cmatrix(&diag.bracket),
                });
            }
            doc.bracket = Some(bracket_rows);
        }
    }
    if let Some(sweep) = params.t_sweep.clone() {
        if strongly {
            let fit = oracle_bhalf_with(setup, &sweep, params.grid, params.length)?;
            doc.oracle = Some(OracleOut::from_fit(&sweep, &fit));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// bhalf

fn run_bhalf(path: &Path, method: MethodArg, order: Option<usize>) -> Result<(), Failure> {
    let file = load(path)?;
    let params = file.params();
    let samples = samples_of(&params);
    if file.kind == Kind::Mesh {
        let cells = mesh_of(&file)?;
        for (index, (setup, _)) in cells.iter().enumerate() {
            require_strongly_elliptic(setup, samples)
                .map_err(|failure| prefix_cell(failure, index))?;
        }
        let selector = match method {
            MethodArg::Auto => MethodSelector::Auto,
            MethodArg::Quad => {
                MethodSelector::Quadrature(QuadCfg::tensor(quad_order(order, &params)))
            }
            MethodArg::Series => MethodSelector::Series(series_order(order, &params)),
            MethodArg::Closed => MethodSelector::Closed,
        };
        let mut doc = ReportDoc::new(file);
        let mut outs = Vec::with_capacity(cells.len());
        for (index, (setup, area)) in cells.iter().enumerate() {
            let result = single_bhalf(setup, method, order, &params)
                .map_err(|failure| prefix_cell(failure, index))?;
            outs.push(CellOut {
                index,
                area: *area,
                validation: ValidationOut::from_report(&validate_setup(setup)),
                ellipticity: None,
                bhalf: Some(BHalfOut::from_result(&result)),
            });
        }
        let mesh = BoundaryMesh::new(cells)?;
        doc.a_half = Some(a_half(&mesh, selector)?);
        doc.cells = Some(outs);
        emit(&doc);
        return Ok(());
    }
    let setup = setup_of(&file)?;
    require_strongly_elliptic(&setup, samples)?;
    let result = single_bhalf(&setup, method, order, &params)?;
    let mut doc = ReportDoc::new(file);
    doc.bhalf = Some(BHalfOut::from_result(&result));
    emit(&doc);
    Ok(())
}

fn prefix_cell(failure: Failure, index: usize) -> Failure {
    Failure {
        code: failure.code,
        kind: failure.kind,
        message: format!("cell {index}: {}", failure.message),
    }
}

fn quad_order(order: Option<usize>, params: &ParamsDto) -> usize {
    order.or(params.order).unwrap_or(DEFAULT_ORDER)
}

fn series_order(order: Option<usize>, params: &ParamsDto) -> usize {
    order.or(params.series_max).unwrap_or(DEFAULT_SERIES_MAX)
}

fn single_bhalf(
    setup: &BoundarySetup,
    method: MethodArg,
    order: Option<usize>,
    params: &ParamsDto,
) -> Result<BHalfResult, Failure> {
    let result = match method {
        MethodArg::Auto => bhalf_auto(setup)?,
        MethodArg::Quad => bhalf_quadrature(setup, QuadCfg::tensor(quad_order(order, params)))?,
        MethodArg::Series => bhalf_series(setup, series_order(order, params))?,
        MethodArg::Closed => bhalf_closed(setup)?,
    };
    Ok(result)
}

// ---------------------------------------------------------------------------
// profile / diag (CSV)

fn run_profile(path: &Path, z_spec: &str, with_j: bool) -> Result<(), Failure> {
    let file = load(path)?;
    let params = file.params();
    let zs = parse_grid(z_spec, "z")?;
    let setup = setup_of(&file)?;
    require_not_violated(&setup, samples_of(&params))?;
    let rows = profile_samples(&setup, &zs, profile_cfg(&params), with_j)?;
    let dim = setup.dim_v;
    let mut header = vec!["z".to_string()];
    header.extend(matrix_headers("psi", dim));
    header.extend(matrix_headers("phi", dim));
    if with_j {
        header.push("j".to_string());
    }
    let mut lines = vec![header.join(",")];
    for row in &rows {
        let mut cells = vec![fmt_float(row.z)];
        cells.extend(matrix_cells(&row.psi));
        cells.extend(matrix_cells(&row.phi));
        if with_j {
            cells.push(fmt_float(row.j.expect("requested")));
        }
        lines.push(cells.join(","));
    }
    println!("{}", lines.join("\n"));
    Ok(())
}

fn run_diag(path: &Path, t: f64, r_spec: &str) -> Result<(), Failure> {
    let file = load(path)?;
    let params = file.params();
    let rs = parse_grid(r_spec, "r")?;
    let setup = setup_of(&file)?;
    require_not_violated(&setup, samples_of(&params))?;
    let dim = setup.dim_v;
    let mut header = vec!["r".to_string()];
    header.extend(matrix_headers("bracket", dim));
    let mut lines = vec![header.join(",")];
    for &r in &rs {
        let diag = heat_diagonal(&setup, t, r)?;
        let mut cells = vec![fmt_float(r)];
        cells.extend(matrix_cells(&diag.bracket));
        lines.push(cells.join(","));
    }
    println!("{}", lines.join("\n"));
    Ok(())
}

// ---------------------------------------------------------------------------
// oracle

fn run_oracle(
    path: &Path,
    t_sweep: Option<Vec<f64>>,
    grid: Option<usize>,
    length: Option<f64>,
) -> Result<(), Failure> {
    let file = load(path)?;
    let params = file.params();
    let sweep = t_sweep
        .or_else(|| params.t_sweep.clone())
        .unwrap_or_else(|| DEFAULT_T_SWEEP.to_vec());
    let setup = setup_of(&file)?;
    let fit = oracle_bhalf_with(
        &setup,
        &sweep,
        grid.or(params.grid),
        length.or(params.length),
    )?;
    let mut doc = ReportDoc::new(file);
    doc.oracle = Some(OracleOut::from_fit(&sweep, &fit));
    emit(&doc);
    Ok(())
}

// ---------------------------------------------------------------------------
// gauge

enum GaugeSections {
    Invalid(ValidationOut),
    Valid(Box<GaugeOut>),
}

fn gauge_sections(symbol: &GaugeSymbol, samples: usize) -> Result<GaugeSections, Failure> {
    let validation = validate_gauge(symbol)?;
    if !validation.is_valid() {
        return Ok(GaugeSections::Invalid(ValidationOut::from_report(
            &validation,
        )));
    }
    let analysis = gauge_ellipticity(symbol, samples)?;
    let spectrum = spectrum_of(&analysis.induced, samples)?;
    Ok(GaugeSections::Valid(Box::new(GaugeOut {
        validation: ValidationOut::from_report(&validation),
        induced: boundary_echo(&analysis.induced),
        ellipticity: EllipticityOut::from_report(&analysis.report),
        direct_margin: analysis.direct_margin,
        natural_spectrum: spectrum.as_ref().map(SpectrumOut::from_spectrum),
    })))
}

fn run_gauge(target: &str, m: Option<usize>, lambda: Option<f64>) -> Result<(), Failure> {
    let path = Path::new(target);
    if path.is_file() {
        if m.is_some() || lambda.is_some() {
            return Err(Failure::schema(
                "--m and --lambda apply only to builtin models, not files",
            ));
        }
        let file = load(path)?;
        if file.kind != Kind::Gauge {
            return Err(Failure::schema(format!(
                "gauge expects a file of kind \"gauge\", {} is not one",
                path.display()
            )));
        }
        let symbol = file.gauge.as_ref().expect("checked").to_symbol()?;
        let samples = samples_of(&file.params());
        let sections = gauge_sections(&symbol, samples)?;
        emit_gauge_doc(None, None, None, Some(file), sections)
    } else {
        let dim = m.unwrap_or(4);
        let symbol = gsbvp::gauge::builtin_model(target, dim, lambda)?;
        let sections = gauge_sections(&symbol, DEFAULT_SAMPLES)?;
        emit_gauge_doc(Some(target.to_string()), Some(dim), lambda, None, sections)
    }
}

fn emit_gauge_doc(
    model: Option<String>,
    m: Option<usize>,
    lambda: Option<f64>,
    input: Option<ProblemFile>,
    sections: GaugeSections,
) -> Result<(), Failure> {
    match sections {
        GaugeSections::Invalid(validation) => {
            let count = validation.issues.len();
            let doc = GaugeDoc {
                model,
                m,
                lambda,
                input,
                validation: Some(validation),
                gauge: None,
            };
            emit(&doc);
            Err(Failure {
                code: 2,
                kind: "validation",
                message: format!("gauge symbol violates {count} invariant(s)"),
            })
        }
        GaugeSections::Valid(gauge) => {
            let doc = GaugeDoc {
                model,
                m,
                lambda,
                input,
                validation: None,
                gauge: Some(*gauge),
            };
            emit(&doc);
            Ok(())
        }
    }
}

