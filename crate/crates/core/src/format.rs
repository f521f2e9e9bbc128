//! JSON scenario documents.
//!
//! ```json
//! { "version": 1, "dimension": 2,
//!   "hamiltonian": [ { "start": 0.0, "matrix": [[[0,0],[1,0]],[[1,0],[0,0]]] } ],
//!   "measurements": [ { "time": 1.0, "label": "z", "matrix": [[[1,0],[0,0]],[[0,0],[-1,0]]] } ],
//!   "preparation": { "kind": "pure", "vector": [[1,0],[0,0]] } }
//! ```
//!
//! Complex numbers are `[re, im]`, matrices are row-major nested arrays.
//! Two optional extensions:
//!
//! * `"basis"` on a measurement lists an orthonormal eigenbasis of its matrix
//!   (row per vector) through which virtual paths run; without it the
//!   canonical eigenbasis is used.
//! * top-level `"postselect": { "time": t, "vector": [...] }` is the final
//!   selection used by weak-value evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Diagnostics, Error, Result};
use crate::linalg::{c64, ComplexMatrix, ComplexVector, DensityOperator, HermitianObservable, StateVector, C64};
use crate::scenario::{HamiltonianSegment, MeasurementEvent, PostSelection, Preparation, Scenario};

pub const FORMAT_VERSION: u32 = 1;

type Complex = [f64; 2];
type VectorDoc = Vec<Complex>;
type MatrixDoc = Vec<Vec<Complex>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    version: u32,
    dimension: usize,
    #[serde(default)]
    hamiltonian: Vec<SegmentDoc>,
    measurements: Vec<MeasurementDoc>,
    preparation: PreparationDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    postselect: Option<PostSelectDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentDoc {
    start: f64,
    matrix: MatrixDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasurementDoc {
    time: f64,
    label: String,
    matrix: MatrixDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    basis: Option<Vec<VectorDoc>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum PreparationDoc {
    Pure {
        vector: VectorDoc,
    },
    Subspace {
        basis: Vec<VectorDoc>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    Density {
        matrix: MatrixDoc,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PostSelectDoc {
    time: f64,
    vector: VectorDoc,
}

/// Parses a scenario document and validates the result.
pub fn parse(text: &str, cluster_tol: f64) -> Result<Scenario> {
    let doc: Document = serde_json::from_str(text).map_err(json_error)?;
    if doc.version != FORMAT_VERSION {
        return Err(Error::Schema {
            field: "version".into(),
            message: format!("unsupported version {} (expected {FORMAT_VERSION})", doc.version),
        });
    }
    let scenario = build(doc, cluster_tol)?;
    scenario.validate().map_err(Error::Validation)?;
    Ok(scenario)
}

/// Pretty-printed document with a trailing newline.
pub fn serialize(scenario: &Scenario) -> String {
    let doc = Document {
        version: FORMAT_VERSION,
        dimension: scenario.dimension,
        hamiltonian: scenario
            .hamiltonian
            .iter()
            .map(|s| SegmentDoc {
                start: s.start,
                matrix: matrix_doc(&s.matrix),
            })
            .collect(),
        measurements: scenario
            .measurements
            .iter()
            .map(|m| MeasurementDoc {
                time: m.time,
                label: m.label.clone(),
                matrix: matrix_doc(m.observable.matrix()),
                basis: m
                    .observable
                    .has_explicit_basis()
                    .then(|| m.observable.basis_vectors().iter().map(|v| vector_doc(v.as_vector())).collect()),
            })
            .collect(),
        preparation: match &scenario.preparation {
            Preparation::Pure(v) => PreparationDoc::Pure {
                vector: vector_doc(v.as_vector()),
            },
            Preparation::Subspace { basis, weights } => PreparationDoc::Subspace {
                basis: basis.iter().map(|v| vector_doc(v.as_vector())).collect(),
                weights: Some(weights.clone()),
            },
            Preparation::Density(rho) => PreparationDoc::Density {
                matrix: matrix_doc(rho.matrix()),
            },
        },
        postselect: scenario.postselection.as_ref().map(|p| PostSelectDoc {
            time: p.time,
            vector: vector_doc(p.state.as_vector()),
        }),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("documents always serialize");
    out.push('\n');
    out
}

fn json_error(e: serde_json::Error) -> Error {
    use serde_json::error::Category;
    match e.classify() {
        Category::Data => {
            let text = e.to_string();
            let field = text
                .split('`')
                .nth(1)
                .filter(|_| text.contains("field"))
                .unwrap_or("document")
                .to_string();
            Error::Schema { field, message: text }
        }
        _ => {
            let text = e.to_string();
            let message = text.split(" at line ").next().unwrap_or(&text).to_string();
            Error::Parse {
                line: e.line(),
                column: e.column(),
                message,
            }
        }
    }
}

fn complex(c: &Complex) -> C64 {
    c64(c[0], c[1])
}

fn matrix_doc(m: &ComplexMatrix) -> MatrixDoc {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

fn vector_doc(v: &ComplexVector) -> VectorDoc {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn matrix_from_doc(rows: &MatrixDoc, n: usize) -> std::result::Result<ComplexMatrix, String> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        let cols = rows.first().map_or(0, Vec::len);
        return Err(format!("expected {n}x{n}, found {}x{cols}", rows.len()));
    }
    Ok(ComplexMatrix::from_fn(n, n, |r, c| complex(&rows[r][c])))
}

fn vector_from_doc(v: &VectorDoc, n: usize) -> std::result::Result<ComplexVector, String> {
    if v.len() != n {
        return Err(format!("expected length {n}, found {}", v.len()));
    }
    Ok(ComplexVector::from_iterator(n, v.iter().map(complex)))
}

fn state(v: &VectorDoc, n: usize) -> std::result::Result<StateVector, String> {
    StateVector::new(vector_from_doc(v, n)?).map_err(|e| e.to_string())
}

fn rule_of(e: &Error) -> &'static str {
    match e {
        Error::NotHermitian { .. } => "not Hermitian",
        Error::NotNormalized { .. } => "not normalized",
        Error::DimensionMismatch { .. } => "dimension mismatch",
        Error::NonFinite(_) => "non-finite entry",
        _ => "invalid",
    }
}

fn build(doc: Document, cluster_tol: f64) -> Result<Scenario> {
    let n = doc.dimension;
    let mut d = Diagnostics::default();
    if n == 0 {
        d.push("dimension", None, "invalid dimension", "must be positive");
        return Err(Error::Validation(d));
    }

    let mut hamiltonian = Vec::new();
    for (k, s) in doc.hamiltonian.iter().enumerate() {
        match matrix_from_doc(&s.matrix, n) {
            Ok(matrix) => hamiltonian.push(HamiltonianSegment { start: s.start, matrix }),
            Err(msg) => d.push("hamiltonian", Some(k), "dimension mismatch", msg),
        }
    }

    let mut measurements = Vec::new();
    for (k, m) in doc.measurements.iter().enumerate() {
        let matrix = match matrix_from_doc(&m.matrix, n) {
            Ok(matrix) => matrix,
            Err(msg) => {
                d.push("measurements", Some(k), "dimension mismatch", msg);
                continue;
            }
        };
        let observable = match &m.basis {
            None => HermitianObservable::new(m.label.clone(), matrix, cluster_tol),
            Some(rows) => {
                let basis: std::result::Result<Vec<_>, _> = rows.iter().map(|v| state(v, n)).collect();
                match basis {
                    Ok(basis) => HermitianObservable::from_matrix_and_basis(m.label.clone(), matrix, basis, cluster_tol),
                    Err(msg) => {
                        d.push("measurements.basis", Some(k), "invalid basis", msg);
                        continue;
                    }
                }
            }
        };
        match observable {
            Ok(obs) => measurements.push(MeasurementEvent::new(m.time, m.label.clone(), obs)),
            Err(e) => d.push("measurements", Some(k), rule_of(&e), e.to_string()),
        }
    }

    let preparation = match &doc.preparation {
        PreparationDoc::Pure { vector } => match state(vector, n) {
            Ok(v) => Some(Preparation::Pure(v)),
            Err(msg) => {
                d.push("preparation.vector", None, "invalid state", msg);
                None
            }
        },
        PreparationDoc::Subspace { basis, weights } => {
            let mut vectors = Vec::new();
            for (k, v) in basis.iter().enumerate() {
                match state(v, n) {
                    Ok(v) => vectors.push(v),
                    Err(msg) => d.push("preparation.basis", Some(k), "invalid state", msg),
                }
            }
            match weights {
                None if !vectors.is_empty() => Some(Preparation::uniform(vectors)),
                None => {
                    d.push("preparation.basis", None, "empty subspace", "at least one vector is required");
                    None
                }
                Some(w) => Some(Preparation::Subspace {
                    basis: vectors,
                    weights: w.clone(),
                }),
            }
        }
        PreparationDoc::Density { matrix } => match matrix_from_doc(matrix, n).map(DensityOperator::new) {
            Ok(Ok(rho)) => Some(Preparation::Density(rho)),
            Ok(Err(e)) => {
                d.push("preparation.matrix", None, "invalid density operator", e.to_string());
                None
            }
            Err(msg) => {
                d.push("preparation.matrix", None, "dimension mismatch", msg);
                None
            }
        },
    };

    let postselection = match &doc.postselect {
        None => None,
        Some(p) => match state(&p.vector, n) {
            Ok(state) => Some(PostSelection { time: p.time, state }),
            Err(msg) => {
                d.push("postselect.vector", None, "invalid state", msg);
                None
            }
        },
    };

    if !d.is_empty() {
        return Err(Error::Validation(d));
    }
    Ok(Scenario {
        dimension: n,
        hamiltonian,
        measurements,
        preparation: preparation.expect("diagnosed above"),
        postselection,
    })
}
