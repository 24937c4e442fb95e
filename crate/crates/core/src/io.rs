//! File formats: triple documents, Steklov problem configs, solution JSON,
//! and the eigencurve CSV export.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::forms::{BasisMeta, FormTriple, ValidationReport};
use crate::linear::LinearSolution;
use crate::nonlinear::{NonlinearSolution, NonlinearSpec, PowerTerm};
use crate::spectrum::EigencurveTable;
use crate::steklov::{
    assemble_forms, build_nemytskii_term, Mesh1D, NemytskiiFn, NemytskiiLocation,
    SteklovCoefficients,
};

/// Raw triple document: row-major dense arrays.
#[derive(Debug, Clone, Deserialize)]
pub struct TripleDoc {
    pub dim: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "M")]
    pub m: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct MeshDoc {
    pub n: usize,
    #[serde(default = "default_interval")]
    pub interval: [f64; 2],
}

fn default_interval() -> [f64; 2] {
    [0.0, 1.0]
}

#[derive(Debug, Clone, Deserialize)]
pub struct NemytskiiDoc {
    #[serde(rename = "fn")]
    pub func: String,
    #[serde(default = "default_location")]
    pub on: String,
}

fn default_location() -> String {
    "interior".into()
}

#[derive(Debug, Clone, Deserialize)]
pub struct PowerDoc {
    pub c: f64,
    pub ell: Vec<f64>,
    pub p: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct NonlinearDoc {
    #[serde(default)]
    pub affine: Option<Vec<f64>>,
    #[serde(default)]
    pub power_terms: Vec<PowerDoc>,
    #[serde(default)]
    pub nemytskii: Option<NemytskiiDoc>,
}

/// Steklov problem document.
#[derive(Debug, Clone, Deserialize)]
pub struct ProblemDoc {
    pub mesh: MeshDoc,
    pub coeffs: SteklovCoefficients,
    #[serde(default)]
    pub nonlinearity: Option<NonlinearDoc>,
}

/// A config file holds either an assembled-problem document or a raw triple.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ConfigDoc {
    Steklov(ProblemDoc),
    Triple(TripleDoc),
}

/// A loaded and validated problem ready for the solvers.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub triple: FormTriple,
    pub mesh: Option<Mesh1D>,
    pub coeffs: Option<SteklovCoefficients>,
    pub nonlinearity: Option<NonlinearSpec>,
}

pub fn parse_config(text: &str) -> Result<ConfigDoc> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("unrecognized config: {e}")))
}

pub fn read_config(path: &Path) -> Result<ConfigDoc> {
    parse_config(&std::fs::read_to_string(path)?)
}

fn matrix_from_rows(name: &str, dim: usize, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch(format!(
            "{name}: expected {dim} rows of {dim} entries"
        )));
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
}

impl TripleDoc {
    pub fn matrices(&self) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
        Ok((
            matrix_from_rows("A", self.dim, &self.a)?,
            matrix_from_rows("B", self.dim, &self.b)?,
            matrix_from_rows("M", self.dim, &self.m)?,
        ))
    }

    pub fn validation_report(&self) -> Result<ValidationReport> {
        let (a, b, m) = self.matrices()?;
        ValidationReport::for_matrices(&a, &b, &m)
    }

    pub fn triple(&self) -> Result<FormTriple> {
        let (a, b, m) = self.matrices()?;
        FormTriple::new(a, b, m, BasisMeta::UserSupplied)
    }
}

fn build_nonlinearity(
    doc: &NonlinearDoc,
    dim: usize,
    mesh: Option<&Mesh1D>,
) -> Result<NonlinearSpec> {
    let affine = match &doc.affine {
        Some(v) => {
            if v.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "affine functional has length {}, problem dimension is {dim}",
                    v.len()
                )));
            }
            Some(DVector::from_vec(v.clone()))
        }
        None => None,
    };
    let mut power_terms = Vec::new();
    for t in &doc.power_terms {
        if t.ell.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "power-term functional has length {}, problem dimension is {dim}",
                t.ell.len()
            )));
        }
        power_terms.push(PowerTerm::new(t.c, DVector::from_vec(t.ell.clone()), t.p)?);
    }
    let nemytskii = match &doc.nemytskii {
        Some(nd) => {
            let mesh = mesh.ok_or_else(|| {
                Error::Config("nemytskii terms need a mesh-based (steklov) config".into())
            })?;
            let func = NemytskiiFn::by_name(&nd.func)
                .ok_or_else(|| Error::Config(format!("unknown nemytskii fn '{}'", nd.func)))?;
            let location = match nd.on.as_str() {
                "interior" => NemytskiiLocation::Interior,
                "boundary" => NemytskiiLocation::Boundary,
                other => {
                    return Err(Error::Config(format!(
                        "nemytskii location must be interior|boundary, got '{other}'"
                    )))
                }
            };
            Some(build_nemytskii_term(mesh, func, location))
        }
        None => None,
    };
    Ok(NonlinearSpec {
        affine,
        power_terms,
        nemytskii,
    })
}

/// Assembles/validates a parsed config into a solvable problem.
pub fn load_problem(doc: &ConfigDoc) -> Result<LoadedProblem> {
    match doc {
        ConfigDoc::Triple(td) => Ok(LoadedProblem {
            triple: td.triple()?,
            mesh: None,
            coeffs: None,
            nonlinearity: None,
        }),
        ConfigDoc::Steklov(pd) => {
            let mesh = Mesh1D::uniform(pd.mesh.n, pd.mesh.interval)?;
            let triple = assemble_forms(&mesh, &pd.coeffs)?;
            let nonlinearity = match &pd.nonlinearity {
                Some(nd) => Some(build_nonlinearity(nd, triple.dim(), Some(&mesh))?),
                None => None,
            };
            Ok(LoadedProblem {
                triple,
                mesh: Some(mesh),
                coeffs: Some(pd.coeffs.clone()),
                nonlinearity,
            })
        }
    }
}

pub fn load_problem_from_path(path: &Path) -> Result<LoadedProblem> {
    load_problem(&read_config(path)?)
}

/// Full-precision float formatting (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the eigencurve table as CSV with header `lambda,k,mu`, lambda-major
/// rows and 17-significant-digit floats. An aligned oracle column appends as
/// `mu_oracle` when provided.
pub fn write_eigencurves_csv<W: Write>(
    w: &mut W,
    table: &EigencurveTable,
    oracle: Option<&[f64]>,
) -> Result<()> {
    if let Some(vals) = oracle {
        if vals.len() != table.rows.len() {
            return Err(Error::DimensionMismatch(
                "oracle column length does not match the table".into(),
            ));
        }
        writeln!(w, "lambda,k,mu,mu_oracle")?;
        for (row, o) in table.rows.iter().zip(vals) {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_f64(row.lambda),
                row.k,
                fmt_f64(row.mu),
                fmt_f64(*o)
            )?;
        }
    } else {
        writeln!(w, "lambda,k,mu")?;
        for row in &table.rows {
            writeln!(w, "{},{},{}", fmt_f64(row.lambda), row.k, fmt_f64(row.mu))?;
        }
    }
    Ok(())
}

/// Linear solution export: mode, coefficient vector of the solution, modal
/// coefficients, residual and (resonant mode only) the solvability defect.
pub fn linear_solution_json(sol: &LinearSolution) -> Value {
    json!({
        "mode": sol.mode.as_str(),
        "u": sol.u.as_slice(),
        "coefficients": sol.coefficients.as_slice(),
        "residual": sol.residual,
        "solvability_defect": sol.solvability_defect,
    })
}

/// Nonlinear solution export, including the resonant branch trace when
/// present.
pub fn nonlinear_solution_json(sol: &NonlinearSolution, side_defect: Option<f64>) -> Value {
    let branch = sol.branch_info.as_ref().map(|b| {
        json!({
            "u0": b.u0.as_slice(),
            "trace": b.trace.iter().map(|p| json!({
                "eps": p.eps,
                "distance_to_u0": p.distance_to_u0,
                "residual": p.residual,
                "iterations": p.iterations,
            })).collect::<Vec<_>>(),
        })
    });
    json!({
        "method": sol.method.as_str(),
        "eps": sol.eps,
        "u": sol.u.as_slice(),
        "iterations": sol.iterations,
        "residual": sol.residual,
        "side_defect": side_defect,
        "branch_info": branch,
    })
}
