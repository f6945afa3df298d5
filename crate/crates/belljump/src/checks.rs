//! Verifiable sufficient conditions for non-explosion.
//!
//! The mean number of jumps over a window is bounded by the time integral of
//! the summed absolute coupling elements `|<psi_t|P(y) H P(x) psi_t>|`, and
//! that integrand is in turn bounded by `norm_sq(psi) * sqrt(tr H^2)` for any
//! measurement whose elements are orthogonal projections (and more generally
//! whenever the elements are contractions). These checks evaluate each link
//! in that chain numerically so a model certificate never rests on untested
//! algebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{matrix_element, StateVector};
use crate::numeric::adaptive_simpson;
use crate::rates::RateContext;

/// Outcome of the integrated-coupling bound over a window.
#[derive(Debug, Clone)]
pub struct CouplingIntegral {
    pub t0: f64,
    pub t_end: f64,
    /// Integral of the summed absolute couplings over the window.
    pub value: f64,
    /// Uniform-in-time bound `norm_sq(psi) * sqrt(tr H^2)` on the integrand.
    pub integrand_bound: f64,
    /// Largest integrand value seen at a quadrature point.
    pub integrand_max: f64,
}

/// Summed absolute couplings at one time:
/// `sum_{x,y} |<psi_t|P(y) H P(x) psi_t>|`.
pub fn coupling_strength(ctx: &RateContext, t: f64) -> Result<f64> {
    let psi = ctx.psi_at(t)?;
    let l = ctx.len();
    let mut total = 0.0;
    for x in 0..l {
        for y in 0..l {
            total += matrix_element(&psi, ctx.povm(), y, x, ctx.hamiltonian())?.norm();
        }
    }
    Ok(total)
}

/// Integrate the summed absolute couplings over `[t0, t_end]`. The mean jump
/// count of the process over the window can never exceed this value, so a
/// finite result certifies non-explosion.
pub fn check_coupling_integral(ctx: &RateContext, t0: f64, t_end: f64) -> Result<CouplingIntegral> {
    if !(t0.is_finite() && t_end.is_finite() && t_end > t0) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            message: format!("need finite t0 < t_end, got [{t0}, {t_end}]"),
        });
    }
    let mut integrand_max = 0.0f64;
    let mut f = |t: f64| {
        let v = coupling_strength(ctx, t).expect("time is finite, labels in range");
        integrand_max = integrand_max.max(v);
        v
    };
    let value = adaptive_simpson(&mut f, t0, t_end, 1e-10, 1e-12).map_err(|e| {
        Error::QuadratureNonConvergence {
            a: t0,
            b: t_end,
            worst_a: e.worst_a,
            worst_b: e.worst_b,
            local_error: e.local_error,
        }
    })?;
    let integrand_bound = ctx.norm0_sq() * ctx.hamiltonian().trace_square().sqrt();
    Ok(CouplingIntegral {
        t0,
        t_end,
        value,
        integrand_bound,
        integrand_max,
    })
}

/// Worst ratio of the summed absolute couplings to the uniform bound
/// `norm_sq(psi) * sqrt(tr H^2)` over a set of states. At most 1 (up to
/// round-off) for projection-valued measurements; a zero generator gives
/// ratio 0 by convention.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub worst_ratio: f64,
    pub samples: usize,
}

pub fn check_coupling_bound(ctx: &RateContext, states: &[StateVector]) -> Result<BoundReport> {
    let hs = ctx.hamiltonian().trace_square().sqrt();
    let mut worst: f64 = 0.0;
    for psi in states {
        if psi.dim() != ctx.dim() {
            return Err(Error::DimensionMismatch {
                context: "coupling bound state",
                expected: ctx.dim(),
                found: psi.dim(),
            });
        }
        let l = ctx.len();
        let mut total = 0.0;
        for x in 0..l {
            for y in 0..l {
                total += matrix_element(psi, ctx.povm(), y, x, ctx.hamiltonian())?.norm();
            }
        }
        let bound = psi.norm_sq() * hs;
        let ratio = if bound == 0.0 {
            if total > 0.0 {
                return Err(Error::validation(
                    "coupling_bound",
                    format!("positive coupling {total} with zero bound"),
                ));
            }
            0.0
        } else {
            total / bound
        };
        worst = worst.max(ratio);
    }
    Ok(BoundReport {
        worst_ratio: worst,
        samples: states.len(),
    })
}

/// Verify that every measurement element is a contraction on a set of probe
/// matrices: `tr(C* P(x) C) <= tr(C* C)` up to relative round-off. This is
/// the structural property the uniform bound rests on.
pub fn check_element_contraction(ctx: &RateContext, probes: &[DMatrix<Complex64>]) -> Result<f64> {
    const REL_TOL: f64 = 1e-10;
    let mut worst_excess: f64 = 0.0;
    for (i, probe) in probes.iter().enumerate() {
        if probe.nrows() != ctx.dim() {
            return Err(Error::DimensionMismatch {
                context: "contraction probe",
                expected: ctx.dim(),
                found: probe.nrows(),
            });
        }
        let base: f64 = probe.iter().map(|z| z.norm_sqr()).sum();
        for x in 0..ctx.len() {
            let element = ctx.povm().element(x)?;
            // tr(C* P C) for Hermitian PSD P.
            let pc = &element * probe;
            let value: f64 = probe
                .column_iter()
                .zip(pc.column_iter())
                .map(|(c, p)| c.dotc(&p).re)
                .sum();
            let excess = (value - base) / base.max(1e-300);
            if excess > REL_TOL {
                return Err(Error::validation(
                    format!("povm[{x}]"),
                    format!("element expands probe {i}: tr(C*PC) = {value} vs tr(C*C) = {base}"),
                ));
            }
            worst_excess = worst_excess.max(excess);
        }
    }
    Ok(worst_excess)
}
