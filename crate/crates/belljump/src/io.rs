//! JSON model files.
//!
//! A model file carries the generator, the label measurement, and the initial
//! state in one document. Complex numbers are `[re, im]` pairs; matrices are
//! row-major. POVM elements either all carry a `matrix` (dense form) or all
//! omit it (projectors onto the standard basis, one per dimension, in order).
//!
//! ```json
//! {
//!   "name": "two_level",
//!   "dim": 2,
//!   "hamiltonian": [[0,0],[1,0],[1,0],[0,0]],
//!   "povm": [{"label": "0"}, {"label": "1"}],
//!   "psi0": [[1,0],[0,0]],
//!   "closed_forms": {"weight:0": "cos(t/2)^2"}
//! }
//! ```
//!
//! Validation failures cite the JSON path of the offending entry, so a bad
//! file is diagnosable without a debugger.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{HermitianOperator, Povm, StateVector};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawPovmElement {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<[f64; 2]>>,
}

/// On-disk model document, before validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawModel {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dim: usize,
    pub hamiltonian: Vec<[f64; 2]>,
    pub povm: Vec<RawPovmElement>,
    pub psi0: Vec<[f64; 2]>,
    /// Human-readable closed-form annotations, keyed by quantity
    /// (e.g. `"weight:0"`). Informational only; never parsed.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub closed_forms: BTreeMap<String, String>,
}

/// Validated model parts, ready to seed a rate context.
#[derive(Debug, Clone)]
pub struct ModelParts {
    pub name: Option<String>,
    pub hamiltonian: HermitianOperator,
    pub povm: Povm,
    pub psi0: StateVector,
    pub closed_forms: BTreeMap<String, String>,
}

fn pack_complex(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn unpack_matrix(path: &str, dim: usize, entries: &[[f64; 2]]) -> Result<DMatrix<Complex64>> {
    if entries.len() != dim * dim {
        return Err(Error::validation(
            path,
            format!(
                "expected {} entries for a {dim} x {dim} row-major matrix, found {}",
                dim * dim,
                entries.len()
            ),
        ));
    }
    for (i, e) in entries.iter().enumerate() {
        if !(e[0].is_finite() && e[1].is_finite()) {
            return Err(Error::validation(
                format!("{path}[{i}]"),
                format!("non-finite entry [{}, {}]", e[0], e[1]),
            ));
        }
    }
    Ok(DMatrix::from_row_iterator(
        dim,
        dim,
        entries.iter().map(|e| Complex64::new(e[0], e[1])),
    ))
}

impl RawModel {
    /// Validate and build operator-level parts. Errors cite JSON paths.
    pub fn build(&self) -> Result<ModelParts> {
        let dim = self.dim;
        if dim == 0 {
            return Err(Error::validation("dim", "dimension must be at least 1"));
        }
        let hamiltonian =
            HermitianOperator::new(unpack_matrix("hamiltonian", dim, &self.hamiltonian)?)?;
        if self.psi0.len() != dim {
            return Err(Error::validation(
                "psi0",
                format!("expected {dim} amplitudes, found {}", self.psi0.len()),
            ));
        }
        for (i, e) in self.psi0.iter().enumerate() {
            if !(e[0].is_finite() && e[1].is_finite()) {
                return Err(Error::validation(
                    format!("psi0[{i}]"),
                    format!("non-finite amplitude [{}, {}]", e[0], e[1]),
                ));
            }
        }
        let psi0 = StateVector {
            amplitudes: DVector::from_iterator(
                dim,
                self.psi0.iter().map(|e| Complex64::new(e[0], e[1])),
            ),
        };
        if self.povm.is_empty() {
            return Err(Error::validation("povm", "at least one element required"));
        }
        let labels: Vec<String> = self.povm.iter().map(|e| e.label.clone()).collect();
        let dense_count = self.povm.iter().filter(|e| e.matrix.is_some()).count();
        let povm = if dense_count == 0 {
            if labels.len() != dim {
                return Err(Error::validation(
                    "povm",
                    format!(
                        "basis form requires exactly {dim} elements (one per dimension), found {}",
                        labels.len()
                    ),
                ));
            }
            Povm::basis_with_labels(labels)?
        } else if dense_count == self.povm.len() {
            let mut elements = Vec::with_capacity(self.povm.len());
            for (i, e) in self.povm.iter().enumerate() {
                let m = unpack_matrix(
                    &format!("povm[{i}].matrix"),
                    dim,
                    e.matrix.as_ref().expect("counted above"),
                )?;
                elements.push(m);
            }
            Povm::from_elements(labels, elements)?
        } else {
            return Err(Error::validation(
                "povm",
                format!(
                    "elements must all carry a matrix or all omit it; found {dense_count} of {}",
                    self.povm.len()
                ),
            ));
        };
        Ok(ModelParts {
            name: self.name.clone(),
            hamiltonian,
            povm,
            psi0,
            closed_forms: self.closed_forms.clone(),
        })
    }

    /// Inverse of [`RawModel::build`]; the dense/basis form of the POVM is
    /// preserved so a round trip is structure-identical.
    pub fn from_parts(parts: &ModelParts) -> Self {
        let dim = parts.povm.dim();
        let hamiltonian = pack_complex(parts.hamiltonian.matrix().transpose().as_slice());
        let povm = if parts.povm.is_basis() {
            parts
                .povm
                .labels()
                .iter()
                .map(|l| RawPovmElement {
                    label: l.clone(),
                    matrix: None,
                })
                .collect()
        } else {
            (0..parts.povm.len())
                .map(|x| RawPovmElement {
                    label: parts.povm.labels()[x].clone(),
                    matrix: Some(pack_complex(
                        parts
                            .povm
                            .element(x)
                            .expect("index in range")
                            .transpose()
                            .as_slice(),
                    )),
                })
                .collect()
        };
        RawModel {
            name: parts.name.clone(),
            dim,
            hamiltonian,
            povm,
            psi0: pack_complex(parts.psi0.amplitudes.as_slice()),
            closed_forms: parts.closed_forms.clone(),
        }
    }
}

/// Parse a model document; JSON syntax errors are reported at path `$`.
pub fn parse_model(text: &str) -> Result<RawModel> {
    serde_json::from_str(text).map_err(|e| Error::validation("$", e.to_string()))
}

pub fn read_model_file(path: &Path) -> Result<RawModel> {
    let text = std::fs::read_to_string(path)?;
    parse_model(&text)
}

/// Serialize with a trailing newline; key order follows the struct and is
/// stable across runs.
pub fn model_to_json(raw: &RawModel) -> Result<String> {
    let mut s = serde_json::to_string_pretty(raw)?;
    s.push('\n');
    Ok(s)
}

pub fn write_model_file(path: &Path, raw: &RawModel) -> Result<()> {
    std::fs::write(path, model_to_json(raw)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sample_json() -> &'static str {
        r#"{
            "name": "pair",
            "dim": 2,
            "hamiltonian": [[0,0],[1,0],[1,0],[0,0]],
            "povm": [{"label": "a"}, {"label": "b"}],
            "psi0": [[1,0],[0,0]],
            "closed_forms": {"weight:a": "cos(t/2)^2"}
        }"#
    }

    #[test]
    fn parses_and_builds_basis_model() {
        let raw = parse_model(sample_json()).unwrap();
        let parts = raw.build().unwrap();
        assert_eq!(parts.name.as_deref(), Some("pair"));
        assert!(parts.povm.is_basis());
        assert_eq!(parts.povm.labels(), ["a", "b"]);
        assert_abs_diff_eq!(parts.hamiltonian.matrix()[(0, 1)].re, 1.0);
        assert_eq!(parts.closed_forms["weight:a"], "cos(t/2)^2");
    }

    #[test]
    fn round_trip_preserves_structure() {
        let raw = parse_model(sample_json()).unwrap();
        let parts = raw.build().unwrap();
        let json = model_to_json(&RawModel::from_parts(&parts)).unwrap();
        let reparsed = parse_model(&json).unwrap().build().unwrap();
        assert!(reparsed.povm.is_basis());
        assert_eq!(reparsed.povm.labels(), parts.povm.labels());
        assert_eq!(reparsed.hamiltonian.matrix(), parts.hamiltonian.matrix());
        assert_eq!(reparsed.psi0.amplitudes, parts.psi0.amplitudes);
        assert_eq!(reparsed.closed_forms, parts.closed_forms);
    }

    #[test]
    fn round_trip_preserves_dense_form() {
        let labels = vec!["u".to_string(), "v".to_string()];
        let half = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.5, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.5, 0.0),
            ],
        );
        let pov = Povm::from_elements(labels, vec![half.clone(), half]).unwrap();
        let parts = ModelParts {
            name: None,
            hamiltonian: HermitianOperator::zero(2),
            povm: pov,
            psi0: StateVector::basis_state(2, 0),
            closed_forms: BTreeMap::new(),
        };
        let raw = RawModel::from_parts(&parts);
        assert!(raw.povm.iter().all(|e| e.matrix.is_some()));
        let rebuilt = raw.build().unwrap();
        assert!(!rebuilt.povm.is_basis());
        assert_eq!(
            rebuilt.povm.element(0).unwrap(),
            parts.povm.element(0).unwrap()
        );
    }

    #[test]
    fn syntax_error_reported_at_root() {
        let err = parse_model("{ not json").unwrap_err();
        match err {
            Error::Validation { path, .. } => assert_eq!(path, "$"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn shape_errors_cite_paths() {
        let mut raw = parse_model(sample_json()).unwrap();
        raw.hamiltonian.pop();
        match raw.build().unwrap_err() {
            Error::Validation { path, message } => {
                assert_eq!(path, "hamiltonian");
                assert!(message.contains("expected 4"), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }

        let mut raw = parse_model(sample_json()).unwrap();
        raw.psi0.push([0.0, 0.0]);
        match raw.build().unwrap_err() {
            Error::Validation { path, .. } => assert_eq!(path, "psi0"),
            other => panic!("unexpected error {other:?}"),
        }

        let mut raw = parse_model(sample_json()).unwrap();
        raw.povm[1].matrix = Some(vec![[1.0, 0.0]; 4]);
        match raw.build().unwrap_err() {
            Error::Validation { path, .. } => assert_eq!(path, "povm"),
            other => panic!("unexpected error {other:?}"),
        }

        let mut raw = parse_model(sample_json()).unwrap();
        raw.povm[0].matrix = Some(vec![[1.0, 0.0]; 3]);
        raw.povm[1].matrix = Some(vec![[0.0, 0.0]; 4]);
        match raw.build().unwrap_err() {
            Error::Validation { path, .. } => assert_eq!(path, "povm[0].matrix"),
            other => panic!("unexpected error {other:?}"),
        }

        let mut raw = parse_model(sample_json()).unwrap();
        raw.hamiltonian[2] = [f64::NAN, 0.0];
        match raw.build().unwrap_err() {
            Error::Validation { path, .. } => assert_eq!(path, "hamiltonian[2]"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn non_hermitian_matrix_rejected_on_build() {
        let mut raw = parse_model(sample_json()).unwrap();
        raw.hamiltonian[1] = [0.0, 1.0];
        raw.hamiltonian[2] = [0.0, 1.0];
        assert!(matches!(raw.build(), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn serialized_key_order_is_stable() {
        let raw = parse_model(sample_json()).unwrap();
        let json = model_to_json(&raw).unwrap();
        let dim_pos = json.find("\"dim\"").unwrap();
        let ham_pos = json.find("\"hamiltonian\"").unwrap();
        let povm_pos = json.find("\"povm\"").unwrap();
        let psi_pos = json.find("\"psi0\"").unwrap();
        assert!(dim_pos < ham_pos && ham_pos < povm_pos && povm_pos < psi_pos);
        assert!(json.ends_with('\n'));
    }
}
