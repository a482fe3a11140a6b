//! One function per subcommand; each returns a finished report.

use std::fs;
use std::path::{Path, PathBuf};

use multizip::catalog;
use multizip::digraph::{GraphError, DEFAULT_PATH_CAP};
use multizip::gdifs::{collatz_wielandt_lower, collatz_wielandt_upper, Seeds, SystemError};
use multizip::geometry::Vector;
use multizip::multizipper::{Multizipper, SegmentEvidence, ZipperError};
use multizip::specfile::{Loaded, SpecError, SystemSpec};
use multizip::transversality::{
    cell_tolerance, direction_scan, invariant_hyperplanes, NormalGrid, Scan, TransversalityError,
};
use nalgebra::DVector;
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::render::{self, Drawing};
use crate::report::{Report, Stage};

/// Relative slack of the polyline length identity.
const LENGTH_IDENTITY_TOLERANCE: f64 = 1e-10;

/// Largest conjugacy residual accepted from a projection.
const CONJUGACY_TOLERANCE: f64 = 1e-12;

/// Agreement required between the dimensions of a zipper and its projection.
const QUOTIENT_DIMENSION_TOLERANCE: f64 = 1e-9;

/// Deepest dyadic level tried when none is given.
const DEFAULT_DYADIC_DEPTH: usize = 4;

/// `s₁` within this of 1 counts as the segment case.
const UNIT_DIMENSION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Spec { path: PathBuf, source: SpecError },
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Spec { source: SpecError::Field { .. } | SpecError::Zipper(_), .. } | CliError::Invalid(_) => 2,
            _ => 4,
        }
    }
}

impl From<ZipperError> for CliError {
    fn from(e: ZipperError) -> Self {
        match e {
            ZipperError::System(SystemError::Graph(GraphError::CapExceeded { .. })) => CliError::Usage(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<SystemError> for CliError {
    fn from(e: SystemError) -> Self {
        ZipperError::from(e).into()
    }
}

impl From<TransversalityError> for CliError {
    fn from(e: TransversalityError) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Input {
    loaded: Loaded,
    name: Option<String>,
    digest: String,
}

fn read_spec(path: &Path) -> Result<Input, CliError> {
    let bytes = fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let text =
        String::from_utf8(bytes.clone()).map_err(|e| CliError::Usage(format!("{}: not UTF-8: {e}", path.display())))?;
    let spec_error = |source| CliError::Spec { path: path.to_path_buf(), source };
    let spec = SystemSpec::from_json(&text).map_err(spec_error)?;
    let loaded = spec.load().map_err(spec_error)?;
    Ok(Input { loaded, name: spec.name, digest: sha256_hex(&bytes) })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn require_zipper(input: &Input) -> Result<&Multizipper, CliError> {
    input
        .loaded
        .zipper
        .as_ref()
        .ok_or_else(|| CliError::Usage("spec has no node chains, so it is not a multizipper".into()))
}

fn vertex_index(loaded: &Loaded, name: Option<&str>) -> Result<usize, CliError> {
    match name {
        None => Ok(0),
        Some(n) => loaded.vertex(n).ok_or_else(|| CliError::Usage(format!("unknown vertex {n:?}"))),
    }
}

fn address(loaded: &Loaded, edges: &[usize]) -> String {
    edges.iter().map(|&e| loaded.edge_names[e].as_str()).collect::<Vec<_>>().join(".")
}

pub fn dimension(command: Vec<String>, spec: &Path) -> Result<Report, CliError> {
    let input = read_spec(spec)?;
    let system = &input.loaded.system;
    let mut report = Report::new(command, Some(input.digest.clone()));
    let validation = system.validate();
    report.result("validation", &validation);
    if !validation.accepted() {
        let detail = validation.unreachable.map(|(u, v)| {
            let names = &input.loaded.vertex_names;
            format!("no path from {} to {}", names[u], names[v])
        });
        report.verdict("system is regular", Stage::Validation, false, detail);
        return Ok(report);
    }
    report.verdict("system is regular", Stage::Validation, true, None);
    let dim = system.similarity_dimension()?;
    report.result("s1", dim.s1);
    report.result("phi_at_s1", dim.phi_at_s1);
    report.result("bracket", dim.bracket);
    report.result("bisection_steps", dim.iterations);
    report.result("spectral_radius_b1", system.phi(1.0)?);
    if let Some(z) = &input.loaded.zipper {
        let l = DVector::from_fn(z.vertex_count(), |u, _| z.end_to_end(u));
        let b1 = system.ratio_matrix(1.0)?;
        let lower = collatz_wielandt_lower(b1.entries(), &l).map_err(SystemError::from)?;
        let upper = collatz_wielandt_upper(b1.entries(), &l).map_err(SystemError::from)?;
        report.result("end_to_end", l.as_slice());
        report.result("collatz_wielandt_b1", json!({ "lower": lower, "upper": upper }));
    }
    Ok(report)
}

pub fn render(
    command: Vec<String>,
    spec: &Path,
    vertex: Option<&str>,
    depth: usize,
    out: &Path,
) -> Result<Report, CliError> {
    let input = read_spec(spec)?;
    let loaded = &input.loaded;
    let u = vertex_index(loaded, vertex)?;
    let svg = match out.extension().and_then(|e| e.to_str()) {
        Some("svg") => true,
        Some("csv") => false,
        _ => return Err(CliError::Usage(format!("{}: output must end in .svg or .csv", out.display()))),
    };
    if svg && loaded.system.dim() != 2 {
        return Err(CliError::Usage(format!(
            "SVG needs a planar system, this one has dimension {}",
            loaded.system.dim()
        )));
    }
    let (points, addresses, connected) = match &loaded.zipper {
        Some(z) => {
            let sample = z.sample_arc(u, depth, DEFAULT_PATH_CAP)?;
            (sample.points, sample.addresses, true)
        }
        None => {
            let seeds = Seeds::loop_fixed_points(&loaded.system)?;
            let approx = loaded.system.approximate_attractor(u, depth, &seeds, DEFAULT_PATH_CAP)?;
            (approx.points, approx.addresses, false)
        }
    };
    let addresses: Vec<String> = addresses.iter().map(|p| address(loaded, p.edges())).collect();
    let drawing = Drawing { points: &points, addresses: &addresses, connected };
    let text = if svg { render::svg(&drawing) } else { render::csv(&drawing) };
    write_file(out, &text)?;

    let mut report = Report::new(command, Some(input.digest));
    report.param("vertex", &loaded.vertex_names[u]);
    report.param("depth", depth);
    report.result("output", out.display().to_string());
    report.result("format", if svg { "svg" } else { "csv" });
    report.result("kind", if connected { "ordered arc" } else { "attractor points" });
    report.result("points", points.len());
    report.result("output_sha256", sha256_hex(text.as_bytes()));
    Ok(report)
}

pub fn verify(command: Vec<String>, spec: &Path) -> Result<Report, CliError> {
    let input = read_spec(spec)?;
    let z = require_zipper(&input)?;
    let names = &input.loaded.vertex_names;
    let mut report = Report::new(command, Some(input.digest.clone()));
    let axioms = z.validate();
    report.result("axioms", &axioms);
    let first = axioms.violations.first().map(|v| serde_json::to_string(v).expect("violations serialize"));
    for (name, ok) in [("MZ1 gaps", axioms.mz1), ("MZ2 assignment", axioms.mz2), ("MZ3 endpoints", axioms.mz3)] {
        let detail = if ok { None } else { first.clone() };
        report.verdict(name, Stage::Validation, ok, detail);
    }
    if !axioms.passed() {
        return Ok(report);
    }

    let mut identities = Vec::new();
    let mut worst: Option<String> = None;
    for (u, name) in names.iter().enumerate() {
        let (length, predicted) = z.length_identity(u);
        let error = (length - predicted).abs();
        if error > LENGTH_IDENTITY_TOLERANCE * length.max(1.0) && worst.is_none() {
            worst = Some(format!("vertex {name}: length {length} vs predicted {predicted}"));
        }
        identities.push(json!({ "vertex": name, "length": length, "predicted": predicted, "error": error }));
    }
    report.result("length_identity", identities);
    report.verdict("polyline length identity", Stage::Theorem, worst.is_none(), worst);

    let verdict = z.segment_verdict()?;
    report.result("segment_verdict", &verdict);
    let detail = (!verdict.pass).then(|| match &verdict.evidence {
        SegmentEvidence::Segments { components } => components
            .iter()
            .find(|c| !c.segment)
            .map(|c| format!("component {} deviates from its chord by {:e}", names[c.vertex], c.max_chord_distance))
            .unwrap_or_default(),
        SegmentEvidence::LengthWitness { witness, level, .. } => match witness {
            Some(w) => format!("length witness {w} at refinement level {level} does not exceed 1"),
            None => format!("some polyline is still straight at refinement level {level}"),
        },
        SegmentEvidence::Inconsistent => {
            format!("dimension {} is below 1", verdict.dimension.s1)
        }
    });
    report.verdict("segments iff dimension one", Stage::Theorem, verdict.pass, detail);
    Ok(report)
}

pub struct ScanArgs<'a> {
    pub vertex: Option<&'a str>,
    pub depth: usize,
    pub grid: Option<usize>,
    pub dyadic: Option<usize>,
    pub tol: Option<f64>,
}

pub fn scan(command: Vec<String>, spec: &Path, args: ScanArgs) -> Result<Report, CliError> {
    let input = read_spec(spec)?;
    let z = require_zipper(&input)?;
    let u = vertex_index(&input.loaded, args.vertex)?;
    z.ensure_valid()?;
    let grid = match args.grid {
        Some(n) => NormalGrid::with_count(z.dim(), n)?,
        None => NormalGrid::default_for(z.dim())?,
    };
    let tol = match args.tol {
        Some(t) if t.is_finite() && t >= 0.0 => t,
        Some(t) => return Err(CliError::Usage(format!("tolerance {t} must be finite and nonnegative"))),
        None => cell_tolerance(z, u, args.depth)?,
    };
    let sample = z.sample_arc(u, args.depth, DEFAULT_PATH_CAP)?;
    let s1 = z.system().similarity_dimension()?.s1;

    let mut report = Report::new(command, Some(input.digest.clone()));
    report.param("vertex", &input.loaded.vertex_names[u]);
    report.param("depth", args.depth);
    report.param("grid", grid.description());
    report.param("tol", tol);
    report.result("s1", s1);
    report.result("sample_points", sample.points.len());

    let directions = direction_scan(&sample.points, &grid)?;
    report.result("monotone_directions", directions.monotone.len());
    let scan = Scan::new(&sample.points, &grid, tol)?;
    let density = match args.dyadic {
        Some(d) => scan.density_report(d)?,
        None => (1..=DEFAULT_DYADIC_DEPTH)
            .rev()
            .map(|d| scan.density_report(d))
            .find(|r| !matches!(r, Err(TransversalityError::InsufficientDensity { .. })))
            .unwrap_or_else(|| scan.density_report(1))?,
    };
    report.param("dyadic_depth", density.dyadic_depth);
    report.result("interior_points", density.interior_points);
    report.result("transverse_points", density.transverse_indices.len());
    report.result("dyadic_subarcs", density.dyadic_table.len());
    report.result(
        "subarcs_without_non_transverse_point",
        density.dyadic_table.iter().filter(|s| !s.has_non_transverse).count(),
    );
    report.result("nowhere_dense", density.verdict);

    let curved = s1 > 1.0 + UNIT_DIMENSION_TOLERANCE;
    let pass = !curved || directions.monotone.is_empty();
    let detail = (!pass).then(|| {
        let g = directions.monotone[0];
        let n = &grid.normals()[g];
        format!(
            "dimension {s1} > 1 yet the projection onto {:?} is monotone ({} directions)",
            n.as_slice(),
            directions.monotone.len()
        )
    });
    report.verdict("curved arcs have no monotone projection", Stage::Theorem, pass, detail);
    Ok(report)
}

pub fn project(command: Vec<String>, spec: &Path, normal: &str, out: Option<&Path>) -> Result<Report, CliError> {
    let input = read_spec(spec)?;
    let z = require_zipper(&input)?;
    let loaded = &input.loaded;
    let coords = normal
        .split(',')
        .map(|c| c.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(format!("--normal {normal:?}: {e}")))?;
    if coords.len() != z.dim() {
        return Err(CliError::Usage(format!("--normal has {} coordinates, expected {}", coords.len(), z.dim())));
    }
    let n = Vector::from_vec(coords);
    let norm = n.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(CliError::Usage("--normal must be a nonzero finite vector".into()));
    }
    let n = n / norm;
    z.ensure_valid()?;

    let mut report = Report::new(command, Some(input.digest.clone()));
    report.param("normal", n.as_slice());
    let invariant = invariant_hyperplanes(z.system());
    let representatives: Vec<Vec<f64>> = invariant.representatives().iter().map(|v| v.as_slice().to_vec()).collect();
    report.result("invariant_normal_representatives", representatives);
    let projection = match z.project(&n) {
        Ok(p) => p,
        Err(ZipperError::NormalNotInvariant { edge, deviation }) => {
            let rows: Vec<Vec<f64>> =
                z.system().map(edge).orthogonal().matrix().row_iter().map(|r| r.iter().copied().collect()).collect();
            let detail = format!(
                "edge {} has orthogonal part {rows:?}, which moves the normal by {deviation:e}",
                loaded.edge_names[edge]
            );
            report.verdict("normal is invariant", Stage::Validation, false, Some(detail));
            return Ok(report);
        }
        Err(ZipperError::DegenerateProjection { vertex }) => {
            let detail = format!("both ends of vertex {} project to the same point", loaded.vertex_names[vertex]);
            report.verdict("projection is nondegenerate", Stage::Validation, false, Some(detail));
            return Ok(report);
        }
        Err(e) => return Err(e.into()),
    };
    report.verdict("normal is invariant", Stage::Validation, true, None);
    let quotient_valid = projection.zipper.validate();
    report.verdict(
        "projected zipper satisfies its axioms",
        Stage::Validation,
        quotient_valid.passed(),
        quotient_valid.violations.first().map(|v| serde_json::to_string(v).expect("violations serialize")),
    );

    let s1 = z.system().similarity_dimension()?.s1;
    let quotient_s1 = projection.zipper.system().similarity_dimension()?.s1;
    report.result("signs", &projection.signs);
    report.result("residual", projection.residual);
    report.result("residual_samples", projection.samples);
    report.result("s1", s1);
    report.result("quotient_s1", quotient_s1);
    let name = input.name.as_ref().map(|n| format!("{n}_projected"));
    let quotient = SystemSpec::from_zipper(&projection.zipper, &loaded.vertex_names, &loaded.edge_names, name);
    match out {
        Some(path) => {
            let text = quotient.to_json();
            write_file(path, &text)?;
            report.result("output", path.display().to_string());
            report.result("output_sha256", sha256_hex(text.as_bytes()));
        }
        None => report.result("quotient_spec", &quotient),
    }
    let residual_ok = projection.residual < CONJUGACY_TOLERANCE;
    report.verdict(
        "projection conjugates the maps",
        Stage::Theorem,
        residual_ok,
        (!residual_ok).then(|| format!("residual {:e}", projection.residual)),
    );
    let dims_ok = (quotient_s1 - s1).abs() <= QUOTIENT_DIMENSION_TOLERANCE;
    report.verdict(
        "projection keeps the dimension",
        Stage::Theorem,
        dims_ok,
        (!dims_ok).then(|| format!("{quotient_s1} vs {s1}")),
    );
    Ok(report)
}

pub fn catalog_cmd(command: Vec<String>, out: &Path, cesaro_apex: f64) -> Result<Report, CliError> {
    if !(cesaro_apex > 0.0 && cesaro_apex < 180.0) {
        return Err(CliError::Usage(format!("Cesàro apex {cesaro_apex} must lie strictly between 0 and 180 degrees")));
    }
    fs::create_dir_all(out).map_err(|source| CliError::Io { path: out.to_path_buf(), source })?;
    let specs: Vec<SystemSpec> = catalog::catalog()
        .into_iter()
        .map(|s| if s.name.as_deref() == Some("cesaro") { catalog::cesaro(cesaro_apex) } else { s })
        .collect();
    let mut report = Report::new(command, None);
    report.param("out", out.display().to_string());
    report.param("cesaro_apex_deg", cesaro_apex);
    let mut files = Vec::new();
    for spec in &specs {
        let name = spec.name.clone().expect("catalog specs are named");
        let text = spec.to_json();
        let path = out.join(format!("{name}.json"));
        write_file(&path, &text)?;
        let axioms = spec.load().ok().and_then(|l| l.zipper).map(|z| z.validate());
        let ok = axioms.as_ref().is_some_and(|a| a.passed());
        report.verdict(&format!("{name} satisfies the axioms"), Stage::Validation, ok, None);
        files.push(json!({ "name": name, "file": path.display().to_string(), "sha256": sha256_hex(text.as_bytes()) }));
    }
    report.result("count", specs.len());
    report.result("specs", files);
    Ok(report)
}
