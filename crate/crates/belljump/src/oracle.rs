//! Semi-analytic references for the label-weight evolution.
//!
//! Two independent constructions of the same curve family:
//!
//! * a balance ODE whose right-hand side is assembled purely from the
//!   positive-part rate numerators (gains minus losses), integrated with an
//!   adaptive Runge-Kutta pair, and
//! * a jump-expansion (Picard-style) series whose k-th term is the
//!   contribution of paths with exactly k jumps, built from survival factors
//!   and arrival fluxes on a fixed grid.
//!
//! Both work at the raw weight scale (summing to `norm_sq(psi_0)`). Every
//! product that would naively pair an infinite rate with a vanishing weight
//! is formed from numerators instead, so no infinity enters arithmetic; at a
//! node the corresponding numerators vanish identically.

use crate::error::{Error, Result};
use crate::numeric::{composite_simpson_uniform, rk45_integrate, OdeOptions};
use crate::rates::{distribution, RateContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    MasterOde,
    Picard,
}

impl OracleMethod {
    #[must_use]
    pub fn as_str(self) -> &'static str {
        match self {
            OracleMethod::MasterOde => "master_ode",
            OracleMethod::Picard => "picard",
        }
    }
}

/// Weight curves on a uniform time grid; `weights[j][x]` is the weight of
/// label `x` at `times[j]`, on the same scale as [`distribution`].
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub method: OracleMethod,
    pub times: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
}

impl OracleSolution {
    /// Uniform grid spacing.
    #[must_use]
    pub fn step(&self) -> f64 {
        if self.times.len() < 2 {
            return 0.0;
        }
        (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64
    }
}

fn check_window(t0: f64, t_end: f64, n_intervals: usize) -> Result<f64> {
    if !(t0.is_finite() && t_end.is_finite() && t_end > t0) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            message: format!("need finite t0 < t_end, got [{t0}, {t_end}]"),
        });
    }
    if n_intervals == 0 {
        return Err(Error::InvalidParameter {
            name: "n_intervals",
            message: "at least one grid interval required".to_string(),
        });
    }
    Ok((t_end - t0) / n_intervals as f64)
}

const MASS_TOL: f64 = 1e-8;

/// Integrate the weight-balance ODE from the exact profile at `t0`, taking
/// snapshots on a uniform grid with `n_intervals` intervals. The right-hand
/// side depends only on time, so the solution is the running integral of the
/// net numerator flow; total mass is checked at every snapshot.
pub fn solve_master_equation(
    ctx: &RateContext,
    t0: f64,
    t_end: f64,
    n_intervals: usize,
) -> Result<OracleSolution> {
    let h = check_window(t0, t_end, n_intervals)?;
    let l = ctx.len();
    let mut ws = ctx.workspace();
    let mut numer = vec![0.0; l * l];
    let mut rhs = |t: f64, _y: &[f64], dy: &mut [f64]| {
        ctx.numerator_matrix_into(t, &mut ws, &mut numer);
        for x in 0..l {
            let gain: f64 = (0..l).map(|y| numer[x * l + y]).sum();
            let loss: f64 = (0..l).map(|y| numer[y * l + x]).sum();
            dy[x] = gain - loss;
        }
    };
    let mut y = distribution(ctx, t0)?.weights;
    let mut times = Vec::with_capacity(n_intervals + 1);
    let mut weights = Vec::with_capacity(n_intervals + 1);
    times.push(t0);
    weights.push(y.clone());
    let opts = OdeOptions {
        rel_tol: 1e-10,
        abs_tol: 1e-12,
        h_init: h / 8.0,
        h_min: 1e-13,
    };
    let mass0 = ctx.norm0_sq();
    for j in 1..=n_intervals {
        let a = t0 + (j - 1) as f64 * h;
        let b = if j == n_intervals {
            t_end
        } else {
            t0 + j as f64 * h
        };
        rk45_integrate(&mut rhs, a, b, &mut y, &opts).map_err(|e| Error::StepSizeUnderflow {
            t: e.t,
            label: ctx.labels()[e.worst_component].clone(),
        })?;
        let mass: f64 = y.iter().sum();
        if (mass - mass0).abs() > MASS_TOL * mass0.max(1.0) {
            return Err(Error::validation(
                "master_equation",
                format!(
                    "total weight drifted to {mass} (started at {mass0}) by t = {b}; \
                     drift {:.3e} exceeds {MASS_TOL:.0e}",
                    (mass - mass0).abs()
                ),
            ));
        }
        times.push(b);
        weights.push(y.clone());
    }
    Ok(OracleSolution {
        method: OracleMethod::MasterOde,
        times,
        weights,
    })
}

/// Jump expansion on a uniform grid: `terms[k][j][x]` is the weight carried
/// at `times[j]` by paths that started in the profile at `times[0]` and have
/// jumped exactly `k` times.
#[derive(Debug, Clone)]
pub struct PicardIterate {
    pub times: Vec<f64>,
    pub terms: Vec<Vec<Vec<f64>>>,
    /// Set when the expansion was truncated before the stop tolerance.
    pub warning: Option<String>,
}

impl PicardIterate {
    #[must_use]
    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// Largest entry of term `k` over the whole grid.
    #[must_use]
    pub fn term_sup(&self, k: usize) -> f64 {
        self.terms[k]
            .iter()
            .flat_map(|row| row.iter())
            .fold(0.0, |acc, &v| acc.max(v))
    }

    /// Sum of the first `n + 1` terms: the weight carried by paths with at
    /// most `n` jumps. Nondecreasing in `n`, bounded by the exact weights.
    #[must_use]
    pub fn partial_sum(&self, n: usize) -> Vec<Vec<f64>> {
        let j_count = self.times.len();
        let l = self.terms[0][0].len();
        let mut out = vec![vec![0.0; l]; j_count];
        for term in self.terms.iter().take(n + 1) {
            for j in 0..j_count {
                for x in 0..l {
                    out[j][x] += term[j][x];
                }
            }
        }
        out
    }

    /// Full partial sum packaged as an oracle solution.
    #[must_use]
    pub fn solution(&self) -> OracleSolution {
        OracleSolution {
            method: OracleMethod::Picard,
            times: self.times.clone(),
            weights: self.partial_sum(self.n_terms().saturating_sub(1)),
        }
    }
}

/// Hazard values beyond this are treated as total absorption of the
/// survival factor.
const SURVIVAL_HAZARD_CAP: f64 = 700.0;

/// Build the jump expansion with at most `n_max` terms on a grid with
/// `n_intervals` intervals, stopping once a term's supremum drops to
/// `stop_tol` (raw weight scale). Survival factors come from a trapezoid
/// cumulative-hazard table per label; a label on the node set from some grid
/// point onward simply has survival zero past that point. Arrival fluxes are
/// assembled as `(term / weight) * numerator`, never as weight times an
/// infinite rate.
pub fn solve_integral_equation_picard(
    ctx: &RateContext,
    t0: f64,
    t_end: f64,
    n_intervals: usize,
    n_max: usize,
    stop_tol: f64,
) -> Result<PicardIterate> {
    let h = check_window(t0, t_end, n_intervals)?;
    if n_max == 0 {
        return Err(Error::InvalidParameter {
            name: "n_max",
            message: "at least one expansion term required".to_string(),
        });
    }
    let l = ctx.len();
    let j_count = n_intervals + 1;
    let times: Vec<f64> = (0..j_count)
        .map(|j| {
            if j == n_intervals {
                t_end
            } else {
                t0 + j as f64 * h
            }
        })
        .collect();
    let thr = ctx.node_threshold();
    let mut ws = ctx.workspace();

    // Grid tables: weights, numerator matrices, total rates (None on nodes),
    // cumulative hazard per label (None once infinite or beyond the cap).
    let mut mu = vec![vec![0.0; l]; j_count];
    let mut numer = vec![vec![0.0; l * l]; j_count];
    for ((&t, numer_j), mu_j) in times.iter().zip(&mut numer).zip(&mut mu) {
        ctx.numerator_matrix_into(t, &mut ws, numer_j);
        for (x, m) in mu_j.iter_mut().enumerate() {
            *m = ctx.weight_in_current_state(x, &mut ws);
        }
    }
    // A label on the node set with vanishing outflow numerators is a
    // removable singularity (zero weight, zero rate: nothing departs), not a
    // divergence; only sub-threshold weight with genuinely positive outflow
    // marks an infinite rate. Round-off keeps "vanishing" from being exact,
    // hence the scale-aware floor.
    let numer_floor = 1e-12 * ctx.norm0_sq() * ctx.hamiltonian().trace_square().sqrt();
    let rate = |j: usize, x: usize| -> Option<f64> {
        let total: f64 = (0..l).map(|y| numer[j][y * l + x]).sum();
        if mu[j][x] > thr {
            Some(total / mu[j][x])
        } else if total <= numer_floor {
            Some(0.0)
        } else {
            None
        }
    };
    let mut cum: Vec<Vec<Option<f64>>> = vec![vec![None; j_count]; l];
    for (x, cum_x) in cum.iter_mut().enumerate() {
        cum_x[0] = Some(0.0);
        for j in 1..j_count {
            cum_x[j] = match (cum_x[j - 1], rate(j - 1, x), rate(j, x)) {
                (Some(c), Some(r0), Some(r1)) => {
                    let c = c + 0.5 * h * (r0 + r1);
                    (c < SURVIVAL_HAZARD_CAP).then_some(c)
                }
                _ => None,
            };
        }
    }
    let survival = |x: usize, i: usize, j: usize| -> f64 {
        match (cum[x][i], cum[x][j]) {
            (Some(a), Some(b)) => (a - b).exp(),
            _ => 0.0,
        }
    };

    let mut terms: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut a0 = vec![vec![0.0; l]; j_count];
    for (j, row) in a0.iter_mut().enumerate() {
        for (x, v) in row.iter_mut().enumerate() {
            *v = mu[0][x] * survival(x, 0, j);
        }
    }
    terms.push(a0);
    let mut warning = None;
    for _k in 1..n_max {
        let prev = terms.last().expect("at least the zeroth term");
        if prev
            .iter()
            .flat_map(|row| row.iter())
            .all(|&v| v <= stop_tol)
        {
            break;
        }
        // Arrival flux of the previous term: flux[i][y] = sum_x ratio * numer.
        let mut flux = vec![vec![0.0; l]; j_count];
        for (((flux_i, prev_i), mu_i), numer_i) in flux.iter_mut().zip(prev).zip(&mu).zip(&numer) {
            for (x, (&p, &m)) in prev_i.iter().zip(mu_i).enumerate() {
                if m <= thr {
                    continue;
                }
                let ratio = (p / m).clamp(0.0, 1.0);
                if ratio == 0.0 {
                    continue;
                }
                for (y, f) in flux_i.iter_mut().enumerate() {
                    *f += ratio * numer_i[y * l + x];
                }
            }
        }
        let mut next = vec![vec![0.0; l]; j_count];
        for (j, next_j) in next.iter_mut().enumerate().skip(1) {
            for (y, out) in next_j.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (i, flux_i) in flux.iter().enumerate().take(j + 1) {
                    let w = if i == 0 || i == j { 0.5 } else { 1.0 };
                    acc += w * flux_i[y] * survival(y, i, j);
                }
                *out = h * acc;
            }
        }
        terms.push(next);
    }
    let last_sup = terms
        .last()
        .expect("nonempty")
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |acc, &v| acc.max(v));
    if terms.len() == n_max && last_sup > stop_tol {
        warning = Some(format!(
            "expansion truncated at {n_max} terms with supremum {last_sup:.3e} \
             still above stop tolerance {stop_tol:.0e}"
        ));
    }
    Ok(PicardIterate {
        times,
        terms,
        warning,
    })
}

/// Expected number of jumps over the solution's window: the time integral of
/// the mean total jump intensity under the occupancy law the solution
/// carries. The intensity is assembled as `(occupancy / weight) * numerator`
/// summed over ordered pairs; on the node set the ratio falls back to 1,
/// where the numerators vanish anyway.
pub fn expected_jump_count(ctx: &RateContext, solution: &OracleSolution) -> Result<f64> {
    let j_count = solution.times.len();
    if j_count < 2 {
        return Err(Error::InvalidParameter {
            name: "solution",
            message: "need at least two grid points".to_string(),
        });
    }
    let l = ctx.len();
    let thr = ctx.node_threshold();
    let norm = ctx.norm0_sq();
    let mut ws = ctx.workspace();
    let mut numer = vec![0.0; l * l];
    let mut integrand = Vec::with_capacity(j_count);
    for j in 0..j_count {
        ctx.numerator_matrix_into(solution.times[j], &mut ws, &mut numer);
        let mut total = 0.0;
        for x in 0..l {
            let mu_x = ctx.weight_in_current_state(x, &mut ws);
            let ratio = if mu_x <= thr {
                1.0
            } else {
                solution.weights[j][x] / mu_x
            };
            let outflow: f64 = (0..l).map(|y| numer[y * l + x]).sum();
            total += ratio * outflow;
        }
        integrand.push(total / norm);
    }
    Ok(composite_simpson_uniform(&integrand, solution.step()))
}
