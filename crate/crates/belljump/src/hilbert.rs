//! Finite-dimensional Hilbert space primitives: state vectors, Hermitian
//! operators with validated spectral decompositions, unitary propagation, and
//! positive-operator-valued measures (POVMs).
//!
//! Unit convention, stated once for the whole crate: time is measured so that
//! the reduced Planck constant is 2. The propagator is `exp(-i H t / 2)`, and
//! the jump-rate formula downstream then carries an overall prefactor of
//! exactly 1. [`REDUCED_PLANCK`] is the single source of that constant.
//!
//! Basis PVMs (projectors onto the standard basis) are represented by a tag
//! rather than by materialized matrices; at the supported scale (up to a few
//! thousand labels) storing every projector densely would need hundreds of
//! gigabytes. `Povm::element` materializes the same dense matrix on demand, so
//! callers observe identical semantics either way.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Reduced Planck constant in the time units used throughout.
pub const REDUCED_PLANCK: f64 = 2.0;

/// Relative Hermiticity tolerance for operator construction.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Max-norm tolerance for `U Lambda U* = H` after decomposition.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;
/// Max-norm tolerance for `U* U = I`.
pub const UNITARITY_TOL: f64 = 1e-10;
/// Max-norm tolerance for POVM completeness `sum_x P(x) = I`.
pub const COMPLETENESS_TOL: f64 = 1e-10;
/// Smallest admissible eigenvalue of a POVM element.
pub const EIGENVALUE_FLOOR: f64 = -1e-10;
/// Relative clamp window for weights that round slightly negative.
pub const WEIGHT_CLAMP: f64 = 1e-12;
/// Max-norm tolerance for `V* V = I` when compressing a POVM.
pub const ISOMETRY_TOL: f64 = 1e-10;

/// State vector; not necessarily normalized. Weight profiles downstream are
/// reported relative to `norm_sq`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amplitudes: DVector<Complex64>,
}

impl StateVector {
    #[must_use]
    pub fn new(amplitudes: Vec<Complex64>) -> Self {
        StateVector {
            amplitudes: DVector::from_vec(amplitudes),
        }
    }

    /// Basis vector `e_k`.
    #[must_use]
    pub fn basis_state(dim: usize, k: usize) -> Self {
        let mut amplitudes = DVector::from_element(dim, Complex64::ZERO);
        amplitudes[k] = Complex64::ONE;
        StateVector { amplitudes }
    }

    #[must_use]
    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    #[must_use]
    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Hermitian operator, validated at construction.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    entries: DMatrix<Complex64>,
}

impl HermitianOperator {
    /// Accepts a square matrix with `|A[i][j] - conj(A[j][i])|` at most
    /// `HERMITICITY_TOL` relative to the largest entry, then symmetrizes the
    /// stored copy so later arithmetic sees an exactly Hermitian matrix.
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                context: "Hermitian operator",
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        let scale = entries
            .iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max)
            .max(1.0);
        let tolerance = HERMITICITY_TOL * scale;
        for i in 0..entries.nrows() {
            for j in i..entries.ncols() {
                let violation = (entries[(i, j)] - entries[(j, i)].conj()).norm();
                if violation > tolerance {
                    return Err(Error::NonHermitian {
                        row: i,
                        col: j,
                        violation,
                        tolerance,
                    });
                }
            }
        }
        let mut sym = entries.clone();
        for i in 0..sym.nrows() {
            sym[(i, i)] = Complex64::new(sym[(i, i)].re, 0.0);
            for j in (i + 1)..sym.ncols() {
                let avg = 0.5 * (entries[(i, j)] + entries[(j, i)].conj());
                sym[(i, j)] = avg;
                sym[(j, i)] = avg.conj();
            }
        }
        Ok(HermitianOperator { entries: sym })
    }

    #[must_use]
    pub fn zero(dim: usize) -> Self {
        HermitianOperator {
            entries: DMatrix::from_element(dim, dim, Complex64::ZERO),
        }
    }

    #[must_use]
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    #[must_use]
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// `tr(H^2) = sum |H[i][j]|^2`, real and nonnegative for Hermitian input.
    #[must_use]
    pub fn trace_square(&self) -> f64 {
        self.entries.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Eigendecomposition `H = U Lambda U*` with eigenvalues ascending and `U`
/// unitary; both properties are validated before the value is handed out.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<Complex64>,
}

impl SpectralDecomposition {
    #[must_use]
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Decompose a Hermitian operator; fails if the factors do not reproduce the
/// operator to `RECONSTRUCTION_TOL` or the eigenvector matrix is not unitary
/// to `UNITARITY_TOL`.
pub fn spectral_decompose(h: &HermitianOperator) -> Result<SpectralDecomposition> {
    let eig = h.matrix().clone().symmetric_eigen();
    let dim = h.dim();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(dim, order.iter().map(|&i| eig.eigenvalues[i]));
    let eigenvectors = eig.eigenvectors.select_columns(order.iter());

    let max_abs_eig = eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
    let lambda = DMatrix::from_diagonal(&eigenvalues.map(|l| Complex64::new(l, 0.0)));
    let recon = &eigenvectors * lambda * eigenvectors.adjoint();
    let recon_err = (&recon - h.matrix())
        .iter()
        .map(|c| c.norm())
        .fold(0.0f64, f64::max);
    let recon_tol = RECONSTRUCTION_TOL * max_abs_eig.max(1.0);
    if recon_err > recon_tol {
        return Err(Error::SpectralAccuracy {
            detail: format!("reconstruction error {recon_err:.3e} exceeds {recon_tol:.3e}"),
        });
    }
    let gram = eigenvectors.adjoint() * &eigenvectors;
    let mut unitarity_err = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            let target = if i == j {
                Complex64::ONE
            } else {
                Complex64::ZERO
            };
            unitarity_err = unitarity_err.max((gram[(i, j)] - target).norm());
        }
    }
    if unitarity_err > UNITARITY_TOL {
        return Err(Error::SpectralAccuracy {
            detail: format!(
                "eigenvector Gram defect {unitarity_err:.3e} exceeds {UNITARITY_TOL:.3e}"
            ),
        });
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Evolve `psi` for time `t` under the generator behind `spec`:
/// `U exp(-i Lambda t / REDUCED_PLANCK) U* psi`. Exact at arbitrary `t`; no
/// step-size error accumulates.
pub fn propagate(psi: &StateVector, spec: &SpectralDecomposition, t: f64) -> Result<StateVector> {
    if psi.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            context: "propagate",
            expected: spec.dim(),
            found: psi.dim(),
        });
    }
    let mut coeffs = spec.eigenvectors.adjoint() * &psi.amplitudes;
    for (k, c) in coeffs.iter_mut().enumerate() {
        let phase = -spec.eigenvalues[k] * t / REDUCED_PLANCK;
        *c *= Complex64::from_polar(1.0, phase);
    }
    Ok(StateVector {
        amplitudes: &spec.eigenvectors * coeffs,
    })
}

#[derive(Debug, Clone)]
enum PovmElements {
    /// Element `x` is the rank-one projector onto basis vector `x`.
    BasisProjectors,
    /// Arbitrary positive elements, stored densely.
    Dense(Vec<DMatrix<Complex64>>),
}

/// Positive-operator-valued measure over an ordered label set. Labels are
/// addressed by index; display names ride along for IO.
#[derive(Debug, Clone)]
pub struct Povm {
    labels: Vec<String>,
    dim: usize,
    elements: PovmElements,
}

impl Povm {
    /// PVM of projectors onto the standard basis, one label per dimension.
    #[must_use]
    pub fn standard_basis(dim: usize) -> Self {
        Povm {
            labels: (0..dim).map(|i| i.to_string()).collect(),
            dim,
            elements: PovmElements::BasisProjectors,
        }
    }

    /// Basis PVM with caller-supplied label names (one per dimension).
    pub fn basis_with_labels(labels: Vec<String>) -> Result<Self> {
        check_distinct_labels(&labels)?;
        Ok(Povm {
            dim: labels.len(),
            labels,
            elements: PovmElements::BasisProjectors,
        })
    }

    /// General POVM from dense elements. Validates that every element is
    /// Hermitian with spectrum above `EIGENVALUE_FLOOR` and that the elements
    /// sum to the identity within `COMPLETENESS_TOL`.
    pub fn from_elements(labels: Vec<String>, elements: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if labels.len() != elements.len() {
            return Err(Error::DimensionMismatch {
                context: "POVM labels vs elements",
                expected: labels.len(),
                found: elements.len(),
            });
        }
        if elements.is_empty() {
            return Err(Error::validation("povm", "POVM needs at least one element"));
        }
        check_distinct_labels(&labels)?;
        let dim = elements[0].nrows();
        for (i, el) in elements.iter().enumerate() {
            if el.nrows() != dim || el.ncols() != dim {
                return Err(Error::validation(
                    format!("povm[{i}].matrix"),
                    format!(
                        "element is {}x{}, expected {dim}x{dim}",
                        el.nrows(),
                        el.ncols()
                    ),
                ));
            }
            let herm = HermitianOperator::new(el.clone())
                .map_err(|e| Error::validation(format!("povm[{i}].matrix"), e.to_string()))?;
            let spec = spectral_decompose(&herm)?;
            let min_eig = spec.eigenvalues.min();
            if min_eig < EIGENVALUE_FLOOR {
                return Err(Error::validation(
                    format!("povm[{i}].matrix"),
                    format!("smallest eigenvalue {min_eig:.3e} below {EIGENVALUE_FLOOR:.3e}"),
                ));
            }
        }
        let mut sum = DMatrix::from_element(dim, dim, Complex64::ZERO);
        for el in &elements {
            sum += el;
        }
        let mut completeness_err = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                let target = if i == j {
                    Complex64::ONE
                } else {
                    Complex64::ZERO
                };
                completeness_err = completeness_err.max((sum[(i, j)] - target).norm());
            }
        }
        if completeness_err > COMPLETENESS_TOL {
            return Err(Error::validation(
                "povm",
                format!(
                    "elements sum to identity only within {completeness_err:.3e} \
                     (tolerance {COMPLETENESS_TOL:.3e})"
                ),
            ));
        }
        Ok(Povm {
            labels,
            dim,
            elements: PovmElements::Dense(elements),
        })
    }

    /// Number of labels (POVM outcomes); can exceed `dim`.
    #[must_use]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Hilbert-space dimension the elements act on.
    #[must_use]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[must_use]
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, x: usize) -> Result<&str> {
        self.labels
            .get(x)
            .map(String::as_str)
            .ok_or(Error::UnknownLabel {
                index: x,
                count: self.labels.len(),
            })
    }

    pub fn label_index(&self, name: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == name)
            .ok_or_else(|| Error::UnknownLabelName {
                label: name.to_string(),
            })
    }

    /// True when every element is a standard-basis projector.
    #[must_use]
    pub fn is_basis(&self) -> bool {
        matches!(self.elements, PovmElements::BasisProjectors)
    }

    /// Dense matrix of element `x`, materialized on demand for basis PVMs.
    pub fn element(&self, x: usize) -> Result<DMatrix<Complex64>> {
        match &self.elements {
            PovmElements::BasisProjectors => {
                if x >= self.dim {
                    return Err(Error::UnknownLabel {
                        index: x,
                        count: self.dim,
                    });
                }
                let mut m = DMatrix::from_element(self.dim, self.dim, Complex64::ZERO);
                m[(x, x)] = Complex64::ONE;
                Ok(m)
            }
            PovmElements::Dense(els) => els.get(x).cloned().ok_or(Error::UnknownLabel {
                index: x,
                count: els.len(),
            }),
        }
    }

    /// `out = P(x) v` without allocating.
    pub fn apply_into(
        &self,
        x: usize,
        v: &DVector<Complex64>,
        out: &mut DVector<Complex64>,
    ) -> Result<()> {
        if x >= self.len() {
            return Err(Error::UnknownLabel {
                index: x,
                count: self.len(),
            });
        }
        match &self.elements {
            PovmElements::BasisProjectors => {
                out.fill(Complex64::ZERO);
                out[x] = v[x];
            }
            PovmElements::Dense(els) => {
                out.gemv(Complex64::ONE, &els[x], v, Complex64::ZERO);
            }
        }
        Ok(())
    }

    /// `P(x) v` (allocating convenience wrapper).
    pub fn apply(&self, x: usize, v: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        let mut out = DVector::from_element(self.dim, Complex64::ZERO);
        self.apply_into(x, v, &mut out)?;
        Ok(out)
    }

    /// Raw weight `<v|P(x) v>` as a real number, before any clamping.
    pub fn raw_weight(&self, x: usize, v: &DVector<Complex64>) -> Result<f64> {
        match &self.elements {
            PovmElements::BasisProjectors => {
                if x >= self.dim {
                    return Err(Error::UnknownLabel {
                        index: x,
                        count: self.dim,
                    });
                }
                Ok(v[x].norm_sqr())
            }
            PovmElements::Dense(_) => {
                let pv = self.apply(x, v)?;
                Ok(v.dotc(&pv).re)
            }
        }
    }
}

fn check_distinct_labels(labels: &[String]) -> Result<()> {
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(Error::validation(
                format!("povm[{i}].label"),
                format!("duplicate label {l:?}"),
            ));
        }
    }
    Ok(())
}

/// Weight of label `x` in state `psi`: `<psi|P(x) psi>`.
///
/// Exact arithmetic gives a nonnegative real; floating-point round-off may
/// leave a tiny negative residue, which is clamped to zero within
/// `WEIGHT_CLAMP * norm_sq(psi)`. Anything more negative means the POVM
/// element itself is broken and is a hard error.
pub fn quantum_weight(psi: &StateVector, pov: &Povm, x: usize) -> Result<f64> {
    if psi.dim() != pov.dim() {
        return Err(Error::DimensionMismatch {
            context: "quantum_weight",
            expected: pov.dim(),
            found: psi.dim(),
        });
    }
    let w = pov.raw_weight(x, &psi.amplitudes)?;
    let clamp = WEIGHT_CLAMP * psi.norm_sq().max(f64::MIN_POSITIVE);
    if w < -clamp {
        return Err(Error::NegativeWeight {
            label: pov.label(x)?.to_string(),
            value: w,
            tolerance: clamp,
        });
    }
    Ok(w.max(0.0))
}

/// Transition matrix element `<psi|P(y) H P(x) psi>`, evaluated as
/// `(P(y) psi)* H (P(x) psi)`.
pub fn matrix_element(
    psi: &StateVector,
    pov: &Povm,
    y: usize,
    x: usize,
    h: &HermitianOperator,
) -> Result<Complex64> {
    if psi.dim() != pov.dim() || h.dim() != pov.dim() {
        return Err(Error::DimensionMismatch {
            context: "matrix_element",
            expected: pov.dim(),
            found: psi.dim().min(h.dim()),
        });
    }
    let px = pov.apply(x, &psi.amplitudes)?;
    let py = pov.apply(y, &psi.amplitudes)?;
    Ok(py.dotc(&(h.matrix() * px)))
}

/// Compress a POVM through an isometry `V` (columns orthonormal,
/// `V* V = I`): each element becomes `V* P(x) V` on the smaller space. Labels
/// are preserved; the result is generally no longer projective. A square
/// identity isometry returns the input unchanged.
pub fn povm_from_compression(pov: &Povm, isometry: &DMatrix<Complex64>) -> Result<Povm> {
    if isometry.nrows() != pov.dim() {
        return Err(Error::DimensionMismatch {
            context: "povm_from_compression isometry rows",
            expected: pov.dim(),
            found: isometry.nrows(),
        });
    }
    let small = isometry.ncols();
    if small == 0 || small > pov.dim() {
        return Err(Error::InvalidParameter {
            name: "isometry",
            message: format!("column count {small} must be in 1..={}", pov.dim()),
        });
    }
    let gram = isometry.adjoint() * isometry;
    let mut defect = 0.0f64;
    for i in 0..small {
        for j in 0..small {
            let target = if i == j {
                Complex64::ONE
            } else {
                Complex64::ZERO
            };
            defect = defect.max((gram[(i, j)] - target).norm());
        }
    }
    if defect > ISOMETRY_TOL {
        return Err(Error::InvalidParameter {
            name: "isometry",
            message: format!("columns not orthonormal: defect {defect:.3e}"),
        });
    }
    if small == pov.dim() {
        let mut is_identity = true;
        'outer: for i in 0..small {
            for j in 0..small {
                let target = if i == j {
                    Complex64::ONE
                } else {
                    Complex64::ZERO
                };
                if isometry[(i, j)] != target {
                    is_identity = false;
                    break 'outer;
                }
            }
        }
        if is_identity {
            return Ok(pov.clone());
        }
    }
    let mut elements = Vec::with_capacity(pov.len());
    for x in 0..pov.len() {
        let el = pov.element(x)?;
        elements.push(isometry.adjoint() * el * isometry);
    }
    Povm::from_elements(pov.labels().to_vec(), elements)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal_pair, trajectory_rng};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pauli_x() -> HermitianOperator {
        HermitianOperator::new(DMatrix::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        ))
        .unwrap()
    }

    fn random_hermitian(dim: usize, seed: u64) -> HermitianOperator {
        let mut rng = trajectory_rng(seed, 999);
        let mut m = DMatrix::from_element(dim, dim, Complex64::ZERO);
        for i in 0..dim {
            for j in 0..dim {
                let (re, im) = normal_pair(&mut rng);
                m[(i, j)] = c(re, im);
            }
        }
        let herm = (&m + m.adjoint()).map(|z| 0.5 * z);
        HermitianOperator::new(herm).unwrap()
    }

    #[test]
    fn rate_prefactor_is_exactly_one() {
        assert_eq!(2.0 / REDUCED_PLANCK, 1.0);
    }

    #[test]
    fn pauli_x_spectrum_ascending() {
        // Hand diagonalization: eigenvalues -1 and +1, eigenvectors
        // (1, -1)/sqrt(2) and (1, 1)/sqrt(2) up to phase.
        let spec = spectral_decompose(&pauli_x()).unwrap();
        assert_abs_diff_eq!(spec.eigenvalues[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(spec.eigenvalues[1], 1.0, epsilon = 1e-12);
        let v0 = spec.eigenvectors.column(0);
        assert_relative_eq!((v0[0] / v0[1]).re, -1.0, epsilon = 1e-10);
    }

    #[test]
    fn decomposition_invariants_on_random_operators() {
        for dim in [2usize, 3, 5, 8] {
            let h = random_hermitian(dim, dim as u64);
            let spec = spectral_decompose(&h).unwrap();
            for k in 1..dim {
                assert!(spec.eigenvalues[k] >= spec.eigenvalues[k - 1]);
            }
            // Constructor already enforces reconstruction and unitarity; spot
            // check the reconstruction independently.
            let lambda = DMatrix::from_diagonal(&spec.eigenvalues.map(|l| Complex64::new(l, 0.0)));
            let recon = &spec.eigenvectors * lambda * spec.eigenvectors.adjoint();
            let err = (&recon - h.matrix())
                .iter()
                .map(|z| z.norm())
                .fold(0.0f64, f64::max);
            assert!(err < 1e-10, "dim {dim}: reconstruction error {err:.3e}");
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let bad =
            DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(0.0, 0.0)]);
        assert!(matches!(
            HermitianOperator::new(bad),
            Err(Error::NonHermitian { .. })
        ));
    }

    #[test]
    fn propagation_preserves_norm_and_composes() {
        let h = random_hermitian(4, 11);
        let spec = spectral_decompose(&h).unwrap();
        let mut rng = trajectory_rng(5, 0);
        let psi = StateVector::new(
            (0..4)
                .map(|_| {
                    let (re, im) = normal_pair(&mut rng);
                    c(re, im)
                })
                .collect(),
        );
        let n0 = psi.norm_sq();
        for &t in &[0.3, 1.7, 12.5] {
            let moved = propagate(&psi, &spec, t).unwrap();
            assert_relative_eq!(moved.norm_sq(), n0, max_relative = 1e-12);
        }
        let one_shot = propagate(&psi, &spec, 2.3).unwrap();
        let two_step = propagate(&propagate(&psi, &spec, 1.5).unwrap(), &spec, 0.8).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(
                one_shot.amplitudes[i].re,
                two_step.amplitudes[i].re,
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(
                one_shot.amplitudes[i].im,
                two_step.amplitudes[i].im,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn two_level_state_at_quarter_and_half_period() {
        // exp(-i X t / 2) e_0 = (cos(t/2), -i sin(t/2)).
        let spec = spectral_decompose(&pauli_x()).unwrap();
        let psi0 = StateVector::basis_state(2, 0);
        let at_half_pi = propagate(&psi0, &spec, PI / 2.0).unwrap();
        assert_abs_diff_eq!(
            at_half_pi.amplitudes[0].re,
            (PI / 4.0).cos(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            at_half_pi.amplitudes[1].im,
            -(PI / 4.0).sin(),
            epsilon = 1e-12
        );
        let at_pi = propagate(&psi0, &spec, PI).unwrap();
        assert_abs_diff_eq!(at_pi.amplitudes[0].norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(at_pi.amplitudes[1].re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(at_pi.amplitudes[1].im, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn propagate_dimension_mismatch() {
        let spec = spectral_decompose(&pauli_x()).unwrap();
        let psi = StateVector::basis_state(3, 0);
        assert!(matches!(
            propagate(&psi, &spec, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn basis_pvm_elements_and_weights() {
        let pov = Povm::standard_basis(3);
        assert!(pov.is_basis());
        assert_eq!(pov.labels(), &["0", "1", "2"]);
        let e1 = pov.element(1).unwrap();
        assert_eq!(e1[(1, 1)], Complex64::ONE);
        assert_eq!(e1[(0, 0)], Complex64::ZERO);
        let psi = StateVector::new(vec![c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.0)]);
        assert_abs_diff_eq!(
            quantum_weight(&psi, &pov, 0).unwrap(),
            0.36,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            quantum_weight(&psi, &pov, 1).unwrap(),
            0.64,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(quantum_weight(&psi, &pov, 2).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn dense_povm_validation_catches_defects() {
        let half = DMatrix::from_diagonal(&DVector::from_vec(vec![c(0.5, 0.0), c(0.5, 0.0)]));
        // Two equal halves are a valid (non-projective) POVM.
        assert!(Povm::from_elements(
            vec!["a".into(), "b".into()],
            vec![half.clone(), half.clone()]
        )
        .is_ok());
        // One half alone fails completeness.
        let bad = Povm::from_elements(vec!["a".into()], vec![half.clone()]);
        assert!(matches!(bad, Err(Error::Validation { ref path, .. }) if path == "povm"));
        // Negative eigenvalue beyond the floor.
        let neg = DMatrix::from_diagonal(&DVector::from_vec(vec![c(-1e-6, 0.0), c(0.5, 0.0)]));
        let fix = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0 + 1e-6, 0.0), c(0.5, 0.0)]));
        let bad = Povm::from_elements(vec!["a".into(), "b".into()], vec![neg, fix]);
        assert!(matches!(bad, Err(Error::Validation { ref path, .. }) if path == "povm[0].matrix"));
        // Duplicate labels.
        let dup = Povm::from_elements(vec!["a".into(), "a".into()], vec![half.clone(), half]);
        assert!(matches!(dup, Err(Error::Validation { ref path, .. }) if path == "povm[1].label"));
    }

    #[test]
    fn weight_clamp_and_hard_negative() {
        // A slightly negative diagonal element within the eigenvalue floor:
        // the weight clamps to zero.
        let tiny = -5e-13;
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![c(tiny, 0.0)]));
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0 - tiny, 0.0)]));
        let pov = Povm::from_elements(vec!["a".into(), "b".into()], vec![a, b]).unwrap();
        let psi = StateVector::new(vec![c(1.0, 0.0)]);
        assert_eq!(quantum_weight(&psi, &pov, 0).unwrap(), 0.0);
        // More negative than the clamp window but above the construction
        // floor: constructing succeeds, the weight is a hard error.
        let worse = -5e-11;
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![c(worse, 0.0)]));
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0 - worse, 0.0)]));
        let pov = Povm::from_elements(vec!["a".into(), "b".into()], vec![a, b]).unwrap();
        assert!(matches!(
            quantum_weight(&psi, &pov, 0),
            Err(Error::NegativeWeight { .. })
        ));
    }

    #[test]
    fn transition_element_two_level_frozen_value() {
        // At t = pi/2 the off-diagonal element is i sin(pi/4) cos(pi/4) = i/2.
        let spec = spectral_decompose(&pauli_x()).unwrap();
        let psi = propagate(&StateVector::basis_state(2, 0), &spec, PI / 2.0).unwrap();
        let pov = Povm::standard_basis(2);
        let m = matrix_element(&psi, &pov, 1, 0, &pauli_x()).unwrap();
        assert_abs_diff_eq!(m.re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.im, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn compression_of_three_dim_basis() {
        // Columns e_0 and (e_1 + e_2)/sqrt(2): the compressed elements are
        // diag(1, 0), diag(0, 1/2), diag(0, 1/2).
        let pov = Povm::standard_basis(3);
        let s = 1.0 / 2.0f64.sqrt();
        let v = DMatrix::from_row_slice(
            3,
            2,
            &[
                c(1.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(s, 0.0),
                c(0.0, 0.0),
                c(s, 0.0),
            ],
        );
        let compressed = povm_from_compression(&pov, &v).unwrap();
        assert_eq!(compressed.dim(), 2);
        assert_eq!(compressed.len(), 3);
        assert!(!compressed.is_basis());
        let e0 = compressed.element(0).unwrap();
        assert_abs_diff_eq!(e0[(0, 0)].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e0[(1, 1)].re, 0.0, epsilon = 1e-12);
        for x in [1, 2] {
            let el = compressed.element(x).unwrap();
            assert_abs_diff_eq!(el[(0, 0)].re, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(el[(1, 1)].re, 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(el[(0, 1)].norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_isometry_returns_input_unchanged() {
        let pov = Povm::standard_basis(3);
        let id = DMatrix::from_diagonal(&DVector::from_element(3, Complex64::ONE));
        let out = povm_from_compression(&pov, &id).unwrap();
        assert!(out.is_basis());
        assert_eq!(out.labels(), pov.labels());
    }

    #[test]
    fn non_isometry_rejected() {
        let pov = Povm::standard_basis(3);
        let v = DMatrix::from_row_slice(
            3,
            2,
            &[
                c(1.0, 0.0),
                c(1.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
            ],
        );
        assert!(matches!(
            povm_from_compression(&pov, &v),
            Err(Error::InvalidParameter {
                name: "isometry",
                ..
            })
        ));
    }
}
