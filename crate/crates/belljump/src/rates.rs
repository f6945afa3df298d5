//! Jump rates driven by the evolving state.
//!
//! For labels `x`, `y` and state `psi_t` the transition rate is
//!
//! ```text
//! sigma_t(y|x) = [Im <psi_t|P(y) H P(x) psi_t>]^+ / <psi_t|P(x) psi_t>
//! ```
//!
//! with the convention of `hilbert` (reduced Planck constant 2) making the
//! overall prefactor exactly 1. The denominator vanishes on the node set; a
//! label whose weight lies at or below `node_epsilon * norm_sq(psi_0)` is
//! treated as a node and its outgoing rates are the distinguished
//! [`Rate::Infinite`] value, never a floating-point infinity that could leak
//! into arithmetic.
//!
//! Numerator positive parts are exact at the kink: values `<= 0` (including
//! round-off residue in `[-1e-14, 0)`) map to rate 0 with no warning.
//!
//! Basis PVMs take an `O(dim)` closed-form path per source label,
//! `conj(psi[y]) H[y][x] psi[x]`; dense POVMs go through materialized
//! elements. Both paths are pinned against each other in tests.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{
    propagate, quantum_weight, spectral_decompose, HermitianOperator, Povm, SpectralDecomposition,
    StateVector, REDUCED_PLANCK,
};

/// Default relative node threshold.
pub const DEFAULT_NODE_EPSILON: f64 = 1e-12;

/// A jump or total rate: finite nonnegative, or the distinguished infinite
/// value produced on the node set. Consumers must branch explicitly; there is
/// no arithmetic on `Infinite`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Finite(f64),
    Infinite,
}

impl Rate {
    #[must_use]
    pub fn is_infinite(self) -> bool {
        matches!(self, Rate::Infinite)
    }

    #[must_use]
    pub fn finite(self) -> Option<f64> {
        match self {
            Rate::Finite(v) => Some(v),
            Rate::Infinite => None,
        }
    }

    /// Panics on `Infinite`; for call sites that have already excluded nodes.
    #[must_use]
    pub fn expect_finite(self, context: &str) -> f64 {
        match self {
            Rate::Finite(v) => v,
            Rate::Infinite => panic!("unexpected infinite rate in {context}"),
        }
    }
}

impl std::fmt::Display for Rate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rate::Finite(v) => write!(f, "{v}"),
            Rate::Infinite => write!(f, "inf"),
        }
    }
}

/// Weight profile at a fixed time; `weights[x]` is `<psi_t|P(x) psi_t>`,
/// summing to `norm_sq(psi_0)`.
#[derive(Debug, Clone)]
pub struct DistributionSnapshot {
    pub t: f64,
    pub weights: Vec<f64>,
}

/// Destination law out of a label: either a probability vector over labels or
/// the cemetery signal (total rate zero or infinite).
#[derive(Debug, Clone)]
pub enum DestinationLaw {
    Probabilities(Vec<f64>),
    Cemetery,
}

/// Single draw from a destination law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DestinationPick {
    Label(usize),
    Cemetery,
}

/// Reusable buffers for rate evaluation; one per worker thread. Holding these
/// outside the context keeps `RateContext` shareable across threads.
#[derive(Debug, Clone)]
pub struct Workspace {
    /// Propagated state at the requested time.
    pub psi: DVector<Complex64>,
    a: DVector<Complex64>,
    b: DVector<Complex64>,
    /// Numerators `n(y|x)` for the most recent source label.
    pub rates: Vec<f64>,
    /// Dense-path cache of `P(y) psi` vectors, built on demand.
    proj: Vec<DVector<Complex64>>,
}

/// Precomputed context: generator, POVM, initial state, and the spectral
/// decomposition that makes propagation to arbitrary times exact.
#[derive(Debug, Clone)]
pub struct RateContext {
    h: HermitianOperator,
    pov: Povm,
    psi0: StateVector,
    spec: SpectralDecomposition,
    coeffs0: DVector<Complex64>,
    norm0_sq: f64,
    node_epsilon: f64,
    node_threshold: f64,
}

impl RateContext {
    pub fn new(
        h: HermitianOperator,
        pov: Povm,
        psi0: StateVector,
        node_epsilon: f64,
    ) -> Result<Self> {
        if h.dim() != pov.dim() {
            return Err(Error::DimensionMismatch {
                context: "RateContext generator vs POVM",
                expected: pov.dim(),
                found: h.dim(),
            });
        }
        if psi0.dim() != pov.dim() {
            return Err(Error::DimensionMismatch {
                context: "RateContext initial state vs POVM",
                expected: pov.dim(),
                found: psi0.dim(),
            });
        }
        if !(node_epsilon.is_finite() && node_epsilon > 0.0 && node_epsilon < 1.0) {
            return Err(Error::InvalidParameter {
                name: "node_epsilon",
                message: format!("{node_epsilon} not in (0, 1)"),
            });
        }
        let norm0_sq = psi0.norm_sq();
        if norm0_sq <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "psi0",
                message: "initial state has zero norm".to_string(),
            });
        }
        let spec = spectral_decompose(&h)?;
        let coeffs0 = spec.eigenvectors.adjoint() * &psi0.amplitudes;
        let node_threshold = node_epsilon * norm0_sq;
        Ok(RateContext {
            h,
            pov,
            psi0,
            spec,
            coeffs0,
            norm0_sq,
            node_epsilon,
            node_threshold,
        })
    }

    #[must_use]
    pub fn dim(&self) -> usize {
        self.pov.dim()
    }

    /// Number of labels.
    #[must_use]
    pub fn len(&self) -> usize {
        self.pov.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.pov.is_empty()
    }

    #[must_use]
    pub fn povm(&self) -> &Povm {
        &self.pov
    }

    #[must_use]
    pub fn hamiltonian(&self) -> &HermitianOperator {
        &self.h
    }

    #[must_use]
    pub fn spectral(&self) -> &SpectralDecomposition {
        &self.spec
    }

    #[must_use]
    pub fn initial_state(&self) -> &StateVector {
        &self.psi0
    }

    #[must_use]
    pub fn norm0_sq(&self) -> f64 {
        self.norm0_sq
    }

    #[must_use]
    pub fn node_epsilon(&self) -> f64 {
        self.node_epsilon
    }

    /// Absolute weight threshold below which a label counts as a node.
    #[must_use]
    pub fn node_threshold(&self) -> f64 {
        self.node_threshold
    }

    #[must_use]
    pub fn labels(&self) -> &[String] {
        self.pov.labels()
    }

    #[must_use]
    pub fn workspace(&self) -> Workspace {
        let d = self.dim();
        Workspace {
            psi: DVector::from_element(d, Complex64::ZERO),
            a: DVector::from_element(d, Complex64::ZERO),
            b: DVector::from_element(d, Complex64::ZERO),
            rates: vec![0.0; self.len()],
            proj: Vec::new(),
        }
    }

    /// Propagated state at `t` (allocating convenience path).
    pub fn psi_at(&self, t: f64) -> Result<StateVector> {
        propagate(&self.psi0, &self.spec, t)
    }

    /// Write the propagated state at `t` into `ws.psi` without allocating:
    /// `U (exp(-i lambda t / hbar) .* coeffs0)`. Hand-rolled column sweep;
    /// this is the innermost kernel of hazard quadrature, and the generic
    /// gemv costs several times more at typical dimensions.
    pub fn psi_into(&self, t: f64, ws: &mut Workspace) {
        let dim = self.dim();
        let cols = self.spec.eigenvectors.as_slice();
        let psi = ws.psi.as_mut_slice();
        psi.fill(Complex64::ZERO);
        for k in 0..dim {
            let (s, c) = (-self.spec.eigenvalues[k] * t / REDUCED_PLANCK).sin_cos();
            let ck = self.coeffs0[k] * Complex64::new(c, s);
            for (p, &v) in psi.iter_mut().zip(&cols[k * dim..(k + 1) * dim]) {
                *p += ck * v;
            }
        }
    }

    /// Raw weight of label `x` in the state currently held by `ws.psi`,
    /// clamped at zero. POVM validity was established at construction, so
    /// larger negative residue cannot occur here.
    fn weight_ws(&self, x: usize, ws: &mut Workspace) -> f64 {
        if self.pov.is_basis() {
            ws.psi[x].norm_sqr()
        } else {
            self.pov
                .apply_into(x, &ws.psi, &mut ws.a)
                .expect("label bounds checked by caller");
            let w = ws.psi.dotc(&ws.a).re;
            debug_assert!(!w.is_nan());
            w.max(0.0)
        }
    }

    /// Fill `ws.rates[y]` with the numerators `[Im <psi|P(y) H P(x) psi>]^+`
    /// for every destination `y`, and return the weight of `x`. `ws.psi` must
    /// already hold the state.
    fn numerators_ws(&self, x: usize, ws: &mut Workspace) -> f64 {
        let hm = self.h.matrix();
        if self.pov.is_basis() {
            let psi_x = ws.psi[x];
            for y in 0..self.len() {
                let m = (ws.psi[y].conj() * hm[(y, x)] * psi_x).im;
                ws.rates[y] = if m > 0.0 { m } else { 0.0 };
                debug_assert!(!m.is_nan());
            }
            ws.rates[x] = 0.0;
            psi_x.norm_sqr()
        } else {
            let mu_x = self.weight_ws(x, ws);
            // ws.a holds P(x) psi after weight_ws on the dense path; recompute
            // so the basis branch cannot be misused.
            self.pov
                .apply_into(x, &ws.psi, &mut ws.a)
                .expect("label bounds checked by caller");
            ws.b.gemv(Complex64::ONE, hm, &ws.a, Complex64::ZERO);
            for y in 0..self.len() {
                self.pov
                    .apply_into(y, &ws.psi, &mut ws.a)
                    .expect("label bounds checked by caller");
                let m = ws.a.dotc(&ws.b).im;
                debug_assert!(!m.is_nan());
                ws.rates[y] = if m > 0.0 { m } else { 0.0 };
            }
            ws.rates[x] = 0.0;
            mu_x
        }
    }

    /// Total rate out of `x` at time `t`, reusing workspace buffers.
    /// `Infinite` when `x` is a node at `t`.
    pub fn total_rate_ws(&self, t: f64, x: usize, ws: &mut Workspace) -> Rate {
        self.psi_into(t, ws);
        let mu_x = self.numerators_ws(x, ws);
        if mu_x <= self.node_threshold {
            return Rate::Infinite;
        }
        let total: f64 = ws.rates.iter().sum();
        Rate::Finite(total / mu_x)
    }

    /// Weight of `x` at `t`, reusing workspace buffers.
    pub fn weight_at_ws(&self, t: f64, x: usize, ws: &mut Workspace) -> f64 {
        self.psi_into(t, ws);
        self.weight_ws(x, ws)
    }

    /// Weight of `x` in whatever state `ws.psi` currently holds; pair with
    /// [`RateContext::psi_into`] to scan many labels at one time point.
    pub fn weight_in_current_state(&self, x: usize, ws: &mut Workspace) -> f64 {
        self.weight_ws(x, ws)
    }

    /// Time derivative of the weight of `x` at `t`, allocation free:
    /// `Im (P(x) psi)* H psi`.
    pub fn weight_derivative_ws(&self, t: f64, x: usize, ws: &mut Workspace) -> f64 {
        self.psi_into(t, ws);
        ws.b.gemv(Complex64::ONE, self.h.matrix(), &ws.psi, Complex64::ZERO);
        if self.pov.is_basis() {
            (ws.psi[x].conj() * ws.b[x]).im
        } else {
            self.pov
                .apply_into(x, &ws.psi, &mut ws.a)
                .expect("label bounds checked by caller");
            ws.a.dotc(&ws.b).im
        }
    }

    /// Signed numerator matrix entry helper for the full-matrix path below.
    fn ensure_proj(&self, ws: &mut Workspace) {
        if self.pov.is_basis() {
            return;
        }
        if ws.proj.len() != self.len() {
            ws.proj = vec![DVector::from_element(self.dim(), Complex64::ZERO); self.len()];
        }
        for y in 0..self.len() {
            let mut v = std::mem::replace(&mut ws.proj[y], DVector::zeros(0));
            self.pov
                .apply_into(y, &ws.psi, &mut v)
                .expect("label in range");
            ws.proj[y] = v;
        }
    }

    /// Inverse-CDF draw from the destination law out of `x` at time `t`,
    /// using the uniform variate `u` and reusing workspace buffers. Labels at
    /// or below the node threshold are excluded from the support. Agrees with
    /// [`destination_distribution`] by construction.
    pub fn sample_destination_ws(
        &self,
        t: f64,
        x: usize,
        u: f64,
        ws: &mut Workspace,
    ) -> DestinationPick {
        self.psi_into(t, ws);
        let mu_x = self.numerators_ws(x, ws);
        if mu_x <= self.node_threshold {
            return DestinationPick::Cemetery;
        }
        for y in 0..self.len() {
            if ws.rates[y] > 0.0 {
                // weight_ws reads ws.psi and scratch a only; ws.rates survives.
                let mu_y = self.weight_ws(y, ws);
                if mu_y <= self.node_threshold {
                    ws.rates[y] = 0.0;
                }
            }
        }
        let total: f64 = ws.rates.iter().sum();
        if total <= 0.0 {
            return DestinationPick::Cemetery;
        }
        let target = u * total;
        let mut acc = 0.0;
        let mut last_positive = None;
        for y in 0..self.len() {
            if ws.rates[y] > 0.0 {
                acc += ws.rates[y];
                last_positive = Some(y);
                if acc >= target {
                    return DestinationPick::Label(y);
                }
            }
        }
        // Round-off can leave acc a hair under target at u near 1.
        DestinationPick::Label(last_positive.expect("total > 0 implies a positive entry"))
    }

    /// Fill `out[y * len + x]` with the positive-part numerators `n(y|x)` for
    /// all ordered pairs at time `t`. The products `weight * rate` the
    /// verification oracles need are exactly these numerators, so no
    /// infinite-rate-times-vanishing-weight expression ever forms.
    pub fn numerator_matrix_into(&self, t: f64, ws: &mut Workspace, out: &mut [f64]) {
        let l = self.len();
        assert_eq!(out.len(), l * l, "numerator matrix buffer size");
        self.psi_into(t, ws);
        let hm = self.h.matrix();
        if self.pov.is_basis() {
            for x in 0..l {
                let psi_x = ws.psi[x];
                for y in 0..l {
                    let m = (ws.psi[y].conj() * hm[(y, x)] * psi_x).im;
                    out[y * l + x] = if y != x && m > 0.0 { m } else { 0.0 };
                }
            }
        } else {
            self.ensure_proj(ws);
            for x in 0..l {
                ws.b.gemv(Complex64::ONE, hm, &ws.proj[x], Complex64::ZERO);
                for y in 0..l {
                    let m = ws.proj[y].dotc(&ws.b).im;
                    out[y * l + x] = if y != x && m > 0.0 { m } else { 0.0 };
                }
            }
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter {
            name: "t",
            message: format!("time {t} is not finite"),
        });
    }
    Ok(())
}

fn check_label(ctx: &RateContext, x: usize) -> Result<()> {
    if x >= ctx.len() {
        return Err(Error::UnknownLabel {
            index: x,
            count: ctx.len(),
        });
    }
    Ok(())
}

/// Jump rate `sigma_t(y|x)` from `x` to `y` at time `t`.
/// `Rate::Infinite` when `x` is a node at `t`. The self-rate is exactly zero.
pub fn jump_rate(ctx: &RateContext, t: f64, x: usize, y: usize) -> Result<Rate> {
    check_time(t)?;
    check_label(ctx, x)?;
    check_label(ctx, y)?;
    let mut ws = ctx.workspace();
    ctx.psi_into(t, &mut ws);
    let mu_x = ctx.numerators_ws(x, &mut ws);
    if mu_x <= ctx.node_threshold {
        return Ok(Rate::Infinite);
    }
    let rate = ws.rates[y] / mu_x;
    if rate.is_nan() {
        return Err(Error::InvalidParameter {
            name: "jump_rate",
            message: format!("rate evaluated to NaN at t = {t}, x = {x}, y = {y}"),
        });
    }
    Ok(Rate::Finite(rate))
}

/// Total outgoing rate `gamma_x(t) = sum_y sigma_t(y|x)`.
pub fn total_rate(ctx: &RateContext, t: f64, x: usize) -> Result<Rate> {
    check_time(t)?;
    check_label(ctx, x)?;
    let mut ws = ctx.workspace();
    let rate = ctx.total_rate_ws(t, x, &mut ws);
    if let Rate::Finite(v) = rate {
        if v.is_nan() {
            return Err(Error::InvalidParameter {
                name: "total_rate",
                message: format!("rate evaluated to NaN at t = {t}, x = {x}"),
            });
        }
    }
    Ok(rate)
}

/// Weight profile at time `t`; sums to `norm_sq(psi_0)` up to round-off.
pub fn distribution(ctx: &RateContext, t: f64) -> Result<DistributionSnapshot> {
    check_time(t)?;
    let psi = ctx.psi_at(t)?;
    let mut weights = Vec::with_capacity(ctx.len());
    for x in 0..ctx.len() {
        weights.push(quantum_weight(&psi, ctx.povm(), x)?);
    }
    Ok(DistributionSnapshot { t, weights })
}

/// Time derivative of the weight profile,
/// `d/dt <psi_t|P(x) psi_t> = Im (P(x) psi_t)* H psi_t`
/// (the prefactor `2 / REDUCED_PLANCK` is exactly 1).
pub fn distribution_derivative(ctx: &RateContext, t: f64) -> Result<Vec<f64>> {
    check_time(t)?;
    let psi = ctx.psi_at(t)?;
    let h_psi = ctx.hamiltonian().matrix() * &psi.amplitudes;
    let mut out = Vec::with_capacity(ctx.len());
    for x in 0..ctx.len() {
        let px = ctx.povm().apply(x, &psi.amplitudes)?;
        out.push(px.dotc(&h_psi).im);
    }
    Ok(out)
}

/// Labels whose weight exceeds the node threshold at time `t`.
pub fn admissible_set(ctx: &RateContext, t: f64) -> Result<Vec<usize>> {
    let snap = distribution(ctx, t)?;
    Ok((0..ctx.len())
        .filter(|&x| snap.weights[x] > ctx.node_threshold())
        .collect())
}

/// Destination law out of `x` at time `t`: numerators normalized over the
/// admissible labels. Cemetery when `x` is a node (total rate infinite) or no
/// admissible destination carries positive numerator (total rate zero).
pub fn destination_distribution(ctx: &RateContext, t: f64, x: usize) -> Result<DestinationLaw> {
    check_time(t)?;
    check_label(ctx, x)?;
    let mut ws = ctx.workspace();
    ctx.psi_into(t, &mut ws);
    let mu_x = ctx.numerators_ws(x, &mut ws);
    if mu_x <= ctx.node_threshold {
        return Ok(DestinationLaw::Cemetery);
    }
    let mut probs = ws.rates.clone();
    for (y, p) in probs.iter_mut().enumerate() {
        if *p > 0.0 && ctx.weight_ws(y, &mut ws) <= ctx.node_threshold() {
            *p = 0.0;
        }
    }
    let total: f64 = probs.iter().sum();
    if total <= 0.0 {
        return Ok(DestinationLaw::Cemetery);
    }
    for p in &mut probs {
        *p /= total;
    }
    Ok(DestinationLaw::Probabilities(probs))
}
