//! JSON instance files: a structure block, a curvature block and metadata.
//!
//! Matrices are flat row-major arrays; nested arrays are accepted on input.
//! Curvature is either dense (`components`, length `dim^4`) or sparse
//! (`entries`, expanded through the skew and pair symmetries).

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::curvature::{validate_curvature, worst_residuals, CurvatureTensor};
use crate::error::GeomError;
use crate::linalg::{ScalarProduct, Vector};
use crate::report::ValidationReport;
use crate::structure::GffStructure;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid {what}: {source}")]
    Shape {
        what: &'static str,
        #[source]
        source: GeomError,
    },
    #[error("{what} failed validation: {summary}")]
    Validation {
        what: &'static str,
        summary: String,
        report: ValidationReport,
    },
}

impl LoadError {
    pub fn is_validation(&self) -> bool {
        matches!(self, LoadError::Validation { .. } | LoadError::Shape { .. })
    }
}

/// A matrix written either flat row-major or as nested rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixJson {
    Flat(Vec<f64>),
    Nested(Vec<Vec<f64>>),
}

impl MatrixJson {
    fn to_matrix(&self, dim: usize, what: &str) -> Result<DMatrix<f64>, GeomError> {
        let flat: Vec<f64> = match self {
            MatrixJson::Flat(v) => v.clone(),
            MatrixJson::Nested(rows) => {
                if rows.iter().any(|r| r.len() != dim) {
                    return Err(GeomError::Structure(format!("{what}: every row needs {dim} entries")));
                }
                rows.iter().flatten().cloned().collect()
            }
        };
        if flat.len() != dim * dim {
            return Err(GeomError::Structure(format!(
                "{what}: expected {} entries, found {}",
                dim * dim,
                flat.len()
            )));
        }
        Ok(DMatrix::from_row_slice(dim, dim, &flat))
    }

    fn from_matrix(m: &DMatrix<f64>) -> Self {
        MatrixJson::Flat(m.transpose().iter().cloned().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureJson {
    pub dim: usize,
    pub n: usize,
    pub s: usize,
    pub metric: MatrixJson,
    pub phi: MatrixJson,
    pub xi: Vec<Vec<f64>>,
    pub eta: Vec<Vec<f64>>,
    pub epsilon: Vec<f64>,
}

impl StructureJson {
    pub fn from_structure(st: &GffStructure) -> Self {
        let vecs = |vs: &[Vector]| vs.iter().map(|v| v.iter().cloned().collect()).collect();
        Self {
            dim: st.dim(),
            n: st.n(),
            s: st.s(),
            metric: MatrixJson::from_matrix(st.metric().components()),
            phi: MatrixJson::from_matrix(st.phi()),
            xi: vecs(st.xi()),
            eta: vecs(st.eta()),
            epsilon: st.epsilon().to_vec(),
        }
    }

    /// Builds the structure with the timelike characteristic vector first,
    /// without checking the axioms.
    pub fn to_structure(&self) -> Result<GffStructure, GeomError> {
        if self.dim != 2 * self.n + self.s {
            return Err(GeomError::Structure(format!(
                "dim {} != 2n + s = {}",
                self.dim,
                2 * self.n + self.s
            )));
        }
        let metric = ScalarProduct::new(self.metric.to_matrix(self.dim, "metric")?)?;
        let phi = self.phi.to_matrix(self.dim, "phi")?;
        let vecs = |vs: &[Vec<f64>]| vs.iter().map(|v| Vector::from_column_slice(v)).collect::<Vec<_>>();
        for v in self.xi.iter().chain(&self.eta) {
            if v.len() != self.dim {
                return Err(GeomError::Structure(format!("xi/eta entries need {} components", self.dim)));
            }
        }
        let mut st = GffStructure::from_parts(
            self.n,
            self.s,
            metric,
            phi,
            vecs(&self.xi),
            vecs(&self.eta),
            self.epsilon.clone(),
        )?;
        st.normalize_timelike_first();
        Ok(st)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CurvatureJson {
    Dense { dim: usize, components: Vec<f64> },
    Sparse { dim: usize, entries: Vec<CurvatureEntry> },
}

impl CurvatureJson {
    pub fn from_tensor(r: &CurvatureTensor) -> Self {
        CurvatureJson::Dense {
            dim: r.dim(),
            components: r.components().to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            CurvatureJson::Dense { dim, .. } | CurvatureJson::Sparse { dim, .. } => *dim,
        }
    }

    pub fn to_tensor(&self) -> Result<CurvatureTensor, GeomError> {
        match self {
            CurvatureJson::Dense { dim, components } => CurvatureTensor::from_components(*dim, components.clone()),
            CurvatureJson::Sparse { dim, entries } => {
                let mut r = CurvatureTensor::zeros(*dim);
                for e in entries {
                    if [e.i, e.j, e.k, e.l].iter().any(|&x| x >= *dim) {
                        return Err(GeomError::DimensionMismatch {
                            expected: *dim,
                            found: e.i.max(e.j).max(e.k).max(e.l) + 1,
                        });
                    }
                    r.set_with_symmetries(e.i, e.j, e.k, e.l, e.value);
                }
                Ok(r)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "canonical+constant")]
    CanonicalConstant,
    #[serde(rename = "canonical+phi_model")]
    CanonicalPhiModel,
    #[serde(rename = "canonical+random")]
    CanonicalRandom,
    #[serde(rename = "external")]
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub name: String,
    pub seed: u64,
    pub family: Family,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceJson {
    pub metadata: Metadata,
    pub structure: StructureJson,
    pub curvature: CurvatureJson,
}

/// A loaded instance whose blocks passed their validators.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub metadata: Metadata,
    pub structure: GffStructure,
    pub curvature: CurvatureTensor,
    pub structure_report: ValidationReport,
    pub curvature_report: ValidationReport,
}

impl Instance {
    pub fn to_json(&self) -> InstanceJson {
        InstanceJson {
            metadata: self.metadata.clone(),
            structure: StructureJson::from_structure(&self.structure),
            curvature: CurvatureJson::from_tensor(&self.curvature),
        }
    }
}

fn summarize(report: &ValidationReport) -> String {
    report
        .failing()
        .map(|c| format!("{} (residual {:e})", c.name, c.residual))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Validates both blocks; the curvature summary names the worst index tuple.
pub fn check_instance(json: &InstanceJson) -> Result<Instance, LoadError> {
    let structure = json.structure.to_structure().map_err(|source| LoadError::Shape {
        what: "structure",
        source,
    })?;
    let structure_report = structure.validate();
    if !structure_report.passed() {
        return Err(LoadError::Validation {
            what: "structure",
            summary: summarize(&structure_report),
            report: structure_report,
        });
    }
    let curvature = json.curvature.to_tensor().map_err(|source| LoadError::Shape {
        what: "curvature",
        source,
    })?;
    if curvature.dim() != structure.dim() {
        return Err(LoadError::Shape {
            what: "curvature",
            source: GeomError::DimensionMismatch {
                expected: structure.dim(),
                found: curvature.dim(),
            },
        });
    }
    let curvature_report = validate_curvature(&curvature, structure.metric());
    if !curvature_report.passed() {
        let worst = worst_residuals(&curvature)
            .into_iter()
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .expect("four residuals");
        let summary = format!("{} at R[{:?}]", summarize(&curvature_report), worst.1);
        return Err(LoadError::Validation {
            what: "curvature",
            summary,
            report: curvature_report,
        });
    }
    Ok(Instance {
        metadata: json.metadata.clone(),
        structure,
        curvature,
        structure_report,
        curvature_report,
    })
}

pub fn parse_instance(text: &str) -> Result<Instance, LoadError> {
    let json: InstanceJson = serde_json::from_str(text)?;
    check_instance(&json)
}

pub fn load_instance(path: &Path) -> Result<Instance, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_instance(&text)
}

/// Pretty JSON with a trailing newline; stable for identical input.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}
