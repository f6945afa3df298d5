//! Trajectory sampling by hazard inversion.
//!
//! A trajectory holds its label until the accumulated hazard (the time
//! integral of the total outgoing rate) reaches an Exp(1) draw, then jumps to
//! a destination picked proportionally to the positive rate numerators. The
//! hazard integral is computed with an adaptive rule that understands the
//! distinguished infinite rate: any evaluation on the node set, or an
//! accumulated hazard beyond `hazard_ceiling`, short-circuits to
//! [`Rate::Infinite`] instead of feeding a floating infinity into arithmetic.
//!
//! Per-trajectory RNG draw order is fixed and part of the reproducibility
//! contract: one uniform for the initial label, then per holding period one
//! Exp(1) target, plus one uniform for the destination when a jump occurs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::bisect_root;
use crate::rates::{DestinationPick, Rate, RateContext, Workspace};
use crate::rng::{exp1, trajectory_rng, uniform_f64};

pub const DEFAULT_MAX_JUMPS: usize = 10_000;
pub const DEFAULT_QUAD_REL_TOL: f64 = 1e-9;
pub const DEFAULT_QUAD_ABS_TOL: f64 = 1e-12;
pub const DEFAULT_ROOT_TOL: f64 = 1e-10;
/// Cumulative hazard beyond which survival (`exp(-700) ~ 1e-304`) is
/// indistinguishable from zero; treated as infinite.
pub const DEFAULT_HAZARD_CEILING: f64 = 700.0;

const MAX_HAZARD_DEPTH: u32 = 48;
const NODE_SCAN_STEPS: usize = 1024;
const NODE_ROOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationParams {
    pub t0: f64,
    pub t_end: f64,
    pub seed: u64,
    pub max_jumps: usize,
    pub quad_rel_tol: f64,
    pub quad_abs_tol: f64,
    pub root_tol: f64,
    pub hazard_ceiling: f64,
}

impl SimulationParams {
    pub fn new(t0: f64, t_end: f64, seed: u64) -> Self {
        SimulationParams {
            t0,
            t_end,
            seed,
            max_jumps: DEFAULT_MAX_JUMPS,
            quad_rel_tol: DEFAULT_QUAD_REL_TOL,
            quad_abs_tol: DEFAULT_QUAD_ABS_TOL,
            root_tol: DEFAULT_ROOT_TOL,
            hazard_ceiling: DEFAULT_HAZARD_CEILING,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0.is_finite() && self.t_end.is_finite() && self.t_end > self.t0) {
            return Err(Error::InvalidParameter {
                name: "t_end",
                message: format!("need finite t0 < t_end, got [{}, {}]", self.t0, self.t_end),
            });
        }
        if self.max_jumps == 0 {
            return Err(Error::InvalidParameter {
                name: "max_jumps",
                message: "must allow at least one jump".to_string(),
            });
        }
        for (name, v) in [
            ("quad_rel_tol", self.quad_rel_tol),
            ("quad_abs_tol", self.quad_abs_tol),
            ("root_tol", self.root_tol),
            ("hazard_ceiling", self.hazard_ceiling),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name: match name {
                        "quad_rel_tol" => "quad_rel_tol",
                        "quad_abs_tol" => "quad_abs_tol",
                        "root_tol" => "root_tol",
                        _ => "hazard_ceiling",
                    },
                    message: format!("{name} must be positive and finite, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// One leaf panel of an adaptive hazard integration.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HazardPanel {
    pub a: f64,
    pub b: f64,
    pub value: f64,
}

/// Partition view of a finite hazard integral: disjoint panels, each with a
/// nonnegative contribution, summing exactly to `total`.
#[derive(Debug, Clone, Serialize)]
pub struct HazardIntegral {
    pub x: usize,
    pub a: f64,
    pub b: f64,
    pub panels: Vec<HazardPanel>,
    pub total: f64,
}

/// Adaptive Simpson over a rate-valued integrand. Any infinite evaluation or
/// an accumulated total beyond `ceiling` yields `Rate::Infinite`. Leaf panels
/// carry the Richardson-corrected value floored at zero, so collected panels
/// are nonnegative and sum exactly to the returned total. Leaves are emitted
/// left to right; on an `Infinite` short-circuit the sink still holds the
/// finite leaves already settled, which cover a left-contiguous prefix of
/// `[a, b]`.
fn integrate_rate(
    eval: &mut impl FnMut(f64) -> Rate,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    ceiling: f64,
    mut panels: Option<&mut Vec<HazardPanel>>,
) -> Result<Rate> {
    debug_assert!(b >= a);
    if b <= a {
        return Ok(Rate::Finite(0.0));
    }
    macro_rules! sample {
        ($t:expr) => {
            match eval($t) {
                Rate::Finite(v) => v,
                Rate::Infinite => return Ok(Rate::Infinite),
            }
        };
    }
    let fa = sample!(a);
    let m0 = 0.5 * (a + b);
    let fm = sample!(m0);
    let fb = sample!(b);
    let coarse = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut stack = vec![(
        a,
        fa,
        m0,
        fm,
        b,
        fb,
        coarse,
        abs_tol.max(rel_tol * coarse.abs()),
        0u32,
    )];
    let mut total = 0.0;
    while let Some((a, fa, m, fm, b, fb, coarse, tol, depth)) = stack.pop() {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = sample!(lm);
        let frm = sample!(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let refined = left + right;
        let err = (refined - coarse) / 15.0;
        if err.abs() <= tol || depth >= MAX_HAZARD_DEPTH {
            if err.abs() > tol {
                return Err(Error::QuadratureNonConvergence {
                    a,
                    b,
                    worst_a: a,
                    worst_b: b,
                    local_error: err.abs(),
                });
            }
            let value = (refined + err).max(0.0);
            total += value;
            if total >= ceiling {
                return Ok(Rate::Infinite);
            }
            if let Some(sink) = panels.as_deref_mut() {
                sink.push(HazardPanel { a, b, value });
            }
        } else {
            let half = 0.5 * tol;
            stack.push((m, fm, rm, frm, b, fb, right, half, depth + 1));
            stack.push((a, fa, lm, flm, m, fm, left, half, depth + 1));
        }
    }
    Ok(Rate::Finite(total))
}

/// Incrementally evaluated cumulative hazard of a fixed label from a fixed
/// start time. Finite evaluations are anchored so later queries only
/// integrate the gap from the nearest anchor on the left; root finding over
/// the hold interval therefore re-integrates almost nothing.
pub struct CumulativeHazard<'a> {
    ctx: &'a RateContext,
    x: usize,
    rel_tol: f64,
    abs_tol: f64,
    ceiling: f64,
    /// Sorted `(time, hazard)` pairs, starting at `(start, 0)`.
    anchors: Vec<(f64, f64)>,
}

impl<'a> CumulativeHazard<'a> {
    pub fn new(ctx: &'a RateContext, params: &SimulationParams, x: usize, start: f64) -> Self {
        CumulativeHazard {
            ctx,
            x,
            rel_tol: params.quad_rel_tol,
            abs_tol: params.quad_abs_tol,
            ceiling: params.hazard_ceiling,
            anchors: vec![(start, 0.0)],
        }
    }

    pub fn start(&self) -> f64 {
        self.anchors[0].0
    }

    /// Hazard accumulated from the start time to `t`. Every refined leaf
    /// boundary becomes an anchor, so repeated queries during root finding
    /// integrate only slivers; an infinite result still anchors the finite
    /// prefix that was settled before the blow-up.
    pub fn eval(&mut self, t: f64, ws: &mut Workspace) -> Result<Rate> {
        assert!(
            t >= self.start(),
            "hazard query at {t} precedes start {}",
            self.start()
        );
        let idx = self.anchors.partition_point(|&(ti, _)| ti <= t) - 1;
        let (t_anchor, gamma_anchor) = self.anchors[idx];
        if t == t_anchor {
            return Ok(Rate::Finite(gamma_anchor));
        }
        let ctx = self.ctx;
        let x = self.x;
        let mut eval = |s: f64| ctx.total_rate_ws(s, x, ws);
        let mut panels = Vec::new();
        let piece = integrate_rate(
            &mut eval,
            t_anchor,
            t,
            self.rel_tol,
            self.abs_tol,
            self.ceiling,
            Some(&mut panels),
        )?;
        // Leaves cover [t_anchor, ..] contiguously and sum exactly, so the
        // running sums are valid anchors as far as they stay finite.
        let mut acc = gamma_anchor;
        let cut = panels
            .iter()
            .position(|p| {
                acc += p.value;
                acc >= self.ceiling
            })
            .unwrap_or(panels.len());
        let mut acc = gamma_anchor;
        let new_anchors: Vec<(f64, f64)> = panels[..cut]
            .iter()
            .map(|p| {
                acc += p.value;
                (p.b, acc)
            })
            .collect();
        self.anchors.splice(idx + 1..idx + 1, new_anchors);
        match piece {
            Rate::Infinite => Ok(Rate::Infinite),
            Rate::Finite(p) => {
                let gamma = gamma_anchor + p.max(0.0);
                if gamma >= self.ceiling {
                    return Ok(Rate::Infinite);
                }
                Ok(Rate::Finite(gamma))
            }
        }
    }
}

/// Hazard of label `x` accumulated over `[a, b]`.
pub fn cumulative_hazard(
    ctx: &RateContext,
    params: &SimulationParams,
    x: usize,
    a: f64,
    b: f64,
) -> Result<Rate> {
    if b < a {
        return Err(Error::InvalidParameter {
            name: "t_end",
            message: format!("hazard interval [{a}, {b}] is reversed"),
        });
    }
    let mut cum = CumulativeHazard::new(ctx, params, x, a);
    let mut ws = ctx.workspace();
    cum.eval(b, &mut ws)
}

/// Panel decomposition of a finite hazard integral; errors if the hazard is
/// infinite on the interval.
pub fn hazard_partition(
    ctx: &RateContext,
    params: &SimulationParams,
    x: usize,
    a: f64,
    b: f64,
) -> Result<HazardIntegral> {
    let mut ws = ctx.workspace();
    let mut panels = Vec::new();
    let mut eval = |s: f64| ctx.total_rate_ws(s, x, &mut ws);
    let total = integrate_rate(
        &mut eval,
        a,
        b,
        params.quad_rel_tol,
        params.quad_abs_tol,
        params.hazard_ceiling,
        Some(&mut panels),
    )?;
    match total {
        Rate::Infinite => Err(Error::InvalidParameter {
            name: "hazard_partition",
            message: format!("hazard of label {x} is infinite on [{a}, {b}]"),
        }),
        Rate::Finite(total) => {
            panels.sort_by(|p, q| p.a.partial_cmp(&q.a).expect("finite endpoints"));
            Ok(HazardIntegral {
                x,
                a,
                b,
                panels,
                total,
            })
        }
    }
}

/// Outcome of one holding period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HoldingOutcome {
    /// Hazard reaches the target before the horizon; jump at the given time.
    Jump(f64),
    /// Hazard over the whole remaining window stays below the target.
    Frozen,
}

/// Invert the cumulative hazard of label `x` from time `t` against the Exp(1)
/// draw `target`. The returned jump time is at least `t + root_tol / 2`, so
/// event times are strictly increasing even when the hazard blows up
/// immediately; accuracy in time is `root_tol`.
pub fn sample_holding_time(
    ctx: &RateContext,
    params: &SimulationParams,
    x: usize,
    t: f64,
    target: f64,
    ws: &mut Workspace,
) -> Result<HoldingOutcome> {
    debug_assert!(target >= 0.0);
    let end = params.t_end;
    if t >= end {
        return Ok(HoldingOutcome::Frozen);
    }
    let mut cum = CumulativeHazard::new(ctx, params, x, t);
    // Grow the bracket geometrically from a probe-sized first step instead of
    // integrating the whole remaining window up front: for a roughly constant
    // rate the first probe already straddles the jump, and the anchors laid
    // down on the way serve the root search. lo always carries finite hazard
    // below target; hi carries hazard at or above target, or infinite hazard
    // (None).
    let remaining = end - t;
    let gamma0 = ctx.total_rate_ws(t, x, ws).finite().unwrap_or(0.0);
    let first_step = if gamma0 > 0.0 {
        (2.0 * target / gamma0).clamp(remaining / 1024.0, remaining)
    } else {
        remaining
    };
    let mut lo = t;
    let mut f_lo = -target;
    let mut hi = (t + first_step).min(end);
    let mut f_hi: Option<f64>;
    loop {
        match cum.eval(hi, ws)? {
            Rate::Finite(g) if g < target && hi < end => {
                lo = hi;
                f_lo = g - target;
                hi = (t + 2.0 * (hi - t)).min(end);
            }
            Rate::Finite(g) if g < target => return Ok(HoldingOutcome::Frozen),
            Rate::Finite(g) => {
                f_hi = Some(g - target);
                break;
            }
            Rate::Infinite => {
                f_hi = None;
                break;
            }
        }
    }
    // Alternating false position and bisection: the even steps guarantee
    // geometric shrinkage, the odd steps give fast convergence on the smooth
    // stretches.
    let mut iter = 0u32;
    while hi - lo > params.root_tol {
        iter += 1;
        if iter > 256 {
            return Err(Error::InvalidParameter {
                name: "root_tol",
                message: format!(
                    "hazard inversion failed to converge on [{lo}, {hi}] for label {x}"
                ),
            });
        }
        let gap = hi - lo;
        let mid = match f_hi {
            Some(fh) if iter % 2 == 1 && fh > f_lo => {
                let fp = lo + gap * (-f_lo) / (fh - f_lo);
                fp.clamp(lo + 0.05 * gap, hi - 0.05 * gap)
            }
            _ => lo + 0.5 * gap,
        };
        if mid <= lo || mid >= hi {
            break;
        }
        match cum.eval(mid, ws)? {
            Rate::Infinite => {
                hi = mid;
                f_hi = None;
            }
            Rate::Finite(g) => {
                let fm = g - target;
                if fm >= 0.0 {
                    hi = mid;
                    f_hi = Some(fm);
                } else {
                    lo = mid;
                    f_lo = fm;
                }
            }
        }
    }
    let jump = (0.5 * (lo + hi)).max(t + 0.5 * params.root_tol).min(end);
    Ok(HoldingOutcome::Jump(jump))
}

/// First time in `[t0, t_end]` at which the weight of `x` drops to the node
/// threshold.
///
/// Weights typically touch zero quadratically, so the sub-threshold window is
/// far narrower than any affordable scan step (width `~2 sqrt(eps)` for a
/// clean zero). The scan therefore looks for two kinds of evidence on a
/// 1024-point grid: a grid value already at or below the threshold, and a
/// local minimum bracket whose interior minimum (located by bisecting the
/// weight derivative) dips to the threshold. Either way the returned time is
/// the entry crossing, found by bisection on the left flank. Dips strictly
/// between grid points that do not register as a grid local minimum are
/// beyond the scan resolution; that limit is part of this diagnostic's
/// contract.
pub fn first_node_time(ctx: &RateContext, x: usize, t0: f64, t_end: f64) -> Result<Option<f64>> {
    if x >= ctx.len() {
        return Err(Error::UnknownLabel {
            index: x,
            count: ctx.len(),
        });
    }
    if !(t0.is_finite() && t_end.is_finite() && t_end > t0) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            message: format!("need finite t0 < t_end, got [{t0}, {t_end}]"),
        });
    }
    let thr = ctx.node_threshold();
    let mut ws = ctx.workspace();
    let n = NODE_SCAN_STEPS;
    let h = (t_end - t0) / n as f64;
    let grid_t = |k: usize| if k == n { t_end } else { t0 + k as f64 * h };
    let mut mu = Vec::with_capacity(n + 1);
    for k in 0..=n {
        mu.push(ctx.weight_at_ws(grid_t(k), x, &mut ws));
    }
    if mu[0] <= thr {
        return Ok(Some(t0));
    }
    for k in 1..=n {
        if mu[k] <= thr {
            let mut g = |s: f64| ctx.weight_at_ws(s, x, &mut ws) - thr;
            return Ok(Some(bisect_root(
                &mut g,
                grid_t(k - 1),
                grid_t(k),
                NODE_ROOT_TOL,
            )));
        }
        if k < n && mu[k] <= mu[k - 1] && mu[k] <= mu[k + 1] {
            let (a, b) = (grid_t(k - 1), grid_t(k + 1));
            let da = ctx.weight_derivative_ws(a, x, &mut ws);
            let db = ctx.weight_derivative_ws(b, x, &mut ws);
            let t_min = if da < 0.0 && db > 0.0 {
                let mut d = |s: f64| ctx.weight_derivative_ws(s, x, &mut ws);
                bisect_root(&mut d, a, b, NODE_ROOT_TOL)
            } else {
                grid_t(k)
            };
            if ctx.weight_at_ws(t_min, x, &mut ws) <= thr {
                let mut g = |s: f64| ctx.weight_at_ws(s, x, &mut ws) - thr;
                return Ok(Some(bisect_root(&mut g, a, t_min, NODE_ROOT_TOL)));
            }
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TrajectoryStatus {
    /// Simulated through `t_end`.
    ReachedHorizon,
    /// Stopped at `max_jumps` before the horizon.
    Exploded,
    /// Total rate at a jump time was zero or infinite with no admissible
    /// destination; the trajectory is absorbed.
    HitCemetery,
}

/// Position of a trajectory at a query time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    Label(usize),
    Cemetery,
}

/// One sampled path. `events[0]` is the initial `(t0, label)` pair; each
/// later entry records a jump, with strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub index: u64,
    pub status: TrajectoryStatus,
    pub events: Vec<(f64, usize)>,
    pub final_time: f64,
    /// Smallest occupied-label weight seen at any event time.
    pub min_weight_visited: f64,
    pub diagnostic: Option<String>,
}

impl Trajectory {
    #[must_use]
    pub fn jump_count(&self) -> usize {
        self.events.len() - 1
    }

    /// Jump times only (event times after the initial one).
    pub fn jump_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().skip(1).map(|&(t, _)| t)
    }

    /// Right-continuous position lookup. Querying at or beyond `final_time`
    /// yields the last label for a horizon trajectory and the cemetery for an
    /// absorbed or truncated one.
    pub fn position_at(&self, t: f64) -> Result<Position> {
        let t0 = self.events[0].0;
        if t < t0 {
            return Err(Error::TimeBeforeStart { t, t0 });
        }
        if self.status != TrajectoryStatus::ReachedHorizon && t >= self.final_time {
            return Ok(Position::Cemetery);
        }
        let idx = self.events.partition_point(|&(ti, _)| ti <= t) - 1;
        Ok(Position::Label(self.events[idx].1))
    }

    pub fn to_record(&self, labels: &[String]) -> TrajectoryRecord {
        TrajectoryRecord {
            index: self.index,
            status: self.status,
            final_time: self.final_time,
            min_weight_visited: self.min_weight_visited,
            events: self
                .events
                .iter()
                .map(|&(t, x)| (t, labels[x].clone()))
                .collect(),
            diagnostic: self.diagnostic.clone(),
        }
    }
}

/// Serialization view of a trajectory with human-readable labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub index: u64,
    pub status: TrajectoryStatus,
    pub final_time: f64,
    pub min_weight_visited: f64,
    pub events: Vec<(f64, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// One JSON document per line, in trajectory order.
pub fn write_trajectories_jsonl(
    out: &mut impl std::io::Write,
    trajectories: &[Trajectory],
    labels: &[String],
) -> Result<()> {
    for traj in trajectories {
        serde_json::to_writer(&mut *out, &traj.to_record(labels))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn sample_initial_label(ctx: &RateContext, t0: f64, u: f64, ws: &mut Workspace) -> usize {
    ctx.psi_into(t0, ws);
    let mut total = 0.0;
    for x in 0..ctx.len() {
        ws.rates[x] = ctx.weight_in_current_state(x, ws);
        total += ws.rates[x];
    }
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for x in 0..ctx.len() {
        if ws.rates[x] > 0.0 {
            acc += ws.rates[x];
            last_positive = x;
            if acc >= target {
                return x;
            }
        }
    }
    last_positive
}

/// Sample trajectory `index` of the ensemble defined by `(ctx, params)`.
/// Fully deterministic in `(params.seed, index)`.
pub fn simulate_trajectory(
    ctx: &RateContext,
    params: &SimulationParams,
    index: u64,
) -> Result<Trajectory> {
    params.validate()?;
    let mut rng = trajectory_rng(params.seed, index);
    let mut ws = ctx.workspace();
    let u0 = uniform_f64(&mut rng);
    let z0 = sample_initial_label(ctx, params.t0, u0, &mut ws);
    let mut events = vec![(params.t0, z0)];
    let mut t = params.t0;
    let mut z = z0;
    let mut min_w = ctx.weight_at_ws(params.t0, z0, &mut ws);
    let mut diagnostic = None;
    let status = loop {
        if t >= params.t_end {
            break TrajectoryStatus::ReachedHorizon;
        }
        if events.len() > params.max_jumps {
            diagnostic = Some(format!(
                "stopped after {} jumps at t = {t}",
                params.max_jumps
            ));
            break TrajectoryStatus::Exploded;
        }
        let target = exp1(&mut rng);
        match sample_holding_time(ctx, params, z, t, target, &mut ws)? {
            HoldingOutcome::Frozen => break TrajectoryStatus::ReachedHorizon,
            HoldingOutcome::Jump(u) => {
                let du = uniform_f64(&mut rng);
                let w_dep = ctx.weight_at_ws(u, z, &mut ws);
                min_w = min_w.min(w_dep);
                match ctx.sample_destination_ws(u, z, du, &mut ws) {
                    DestinationPick::Cemetery => {
                        t = u;
                        diagnostic = Some(format!(
                            "no admissible destination out of label {z} at t = {u}"
                        ));
                        break TrajectoryStatus::HitCemetery;
                    }
                    DestinationPick::Label(y) => {
                        t = u;
                        z = y;
                        events.push((t, z));
                        let w_arr = ctx.weight_at_ws(u, y, &mut ws);
                        min_w = min_w.min(w_arr);
                    }
                }
            }
        }
    };
    let final_time = match status {
        TrajectoryStatus::ReachedHorizon => params.t_end,
        _ => t,
    };
    Ok(Trajectory {
        index,
        status,
        events,
        final_time,
        min_weight_visited: min_w,
        diagnostic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{HermitianOperator, Povm, StateVector};
    use crate::models;
    use crate::stats::ks_distance_to_cdf;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    fn two_level_ctx() -> RateContext {
        models::two_level().context(1e-12).unwrap()
    }

    #[test]
    fn hazard_matches_log_secant_closed_form() {
        // Integral of tan(s/2) from 0 to t is -2 ln cos(t/2).
        let ctx = two_level_ctx();
        let params = SimulationParams::new(0.0, PI, 1);
        let half = cumulative_hazard(&ctx, &params, 0, 0.0, PI / 2.0)
            .unwrap()
            .finite()
            .unwrap();
        assert_abs_diff_eq!(half, std::f64::consts::LN_2, epsilon = 1e-8);
        let late = cumulative_hazard(&ctx, &params, 0, 0.0, 3.0)
            .unwrap()
            .finite()
            .unwrap();
        assert_relative_eq!(late, -2.0 * (1.5f64).cos().ln(), epsilon = 1e-8);
    }

    #[test]
    fn hazard_is_additive_over_subintervals() {
        let ctx = two_level_ctx();
        let params = SimulationParams::new(0.0, PI, 1);
        let a = cumulative_hazard(&ctx, &params, 0, 0.0, 1.0)
            .unwrap()
            .finite()
            .unwrap();
        let b = cumulative_hazard(&ctx, &params, 0, 1.0, 2.5)
            .unwrap()
            .finite()
            .unwrap();
        let full = cumulative_hazard(&ctx, &params, 0, 0.0, 2.5)
            .unwrap()
            .finite()
            .unwrap();
        assert_abs_diff_eq!(a + b, full, epsilon = 1e-9);
    }

    #[test]
    fn hazard_across_node_is_infinite() {
        let ctx = two_level_ctx();
        let params = SimulationParams::new(0.0, 4.0, 1);
        assert!(cumulative_hazard(&ctx, &params, 0, 0.0, PI)
            .unwrap()
            .is_infinite());
        assert!(cumulative_hazard(&ctx, &params, 0, 0.0, 3.5)
            .unwrap()
            .is_infinite());
        // Just short of the node the weight is still above threshold. The
        // integrand peaks near 1e6 here, which costs a few digits of
        // quadrature accuracy relative to the smooth region.
        let t_near = PI - 3e-6;
        let near = cumulative_hazard(&ctx, &params, 0, 0.0, t_near).unwrap();
        let g = near.finite().expect("finite just before the node");
        assert_relative_eq!(g, -2.0 * (t_near / 2.0).cos().ln(), max_relative = 1e-5);
    }

    #[test]
    fn partition_panels_tile_the_interval() {
        let ctx = two_level_ctx();
        let params = SimulationParams::new(0.0, PI, 1);
        let part = hazard_partition(&ctx, &params, 0, 0.0, 2.0).unwrap();
        assert!(!part.panels.is_empty());
        assert_abs_diff_eq!(part.panels[0].a, 0.0);
        assert_abs_diff_eq!(part.panels.last().unwrap().b, 2.0);
        let mut sum = 0.0;
        for w in part.panels.windows(2) {
            assert_abs_diff_eq!(w[0].b, w[1].a, epsilon = 1e-12);
        }
        for p in &part.panels {
            assert!(p.value >= 0.0);
            sum += p.value;
        }
        assert_abs_diff_eq!(sum, part.total, epsilon = 1e-12);
        assert_relative_eq!(part.total, -2.0 * (1.0f64).cos().ln(), epsilon = 1e-8);
    }

    #[test]
    fn holding_times_follow_closed_form_law() {
        // CDF of the first jump time from label 0 at t = 0 is sin(t/2)^2 on
        // [0, pi]; the node at pi forces every draw to produce a jump.
        let ctx = two_level_ctx();
        let params = SimulationParams::new(0.0, PI, 77);
        let mut ws = ctx.workspace();
        let n = 20_000;
        let mut samples = Vec::with_capacity(n);
        for i in 0..n {
            let mut rng = trajectory_rng(params.seed, i as u64);
            let target = exp1(&mut rng);
            match sample_holding_time(&ctx, &params, 0, 0.0, target, &mut ws).unwrap() {
                HoldingOutcome::Jump(u) => samples.push(u),
                HoldingOutcome::Frozen => panic!("jump is certain before the node"),
            }
        }
        let d = ks_distance_to_cdf(&samples, |t| (t / 2.0).sin().powi(2));
        assert!(d < 0.015, "KS distance {d} against the closed-form law");
    }

    #[test]
    fn zero_generator_freezes_everything() {
        let ctx = RateContext::new(
            HermitianOperator::zero(3),
            Povm::standard_basis(3),
            StateVector::basis_state(3, 1),
            1e-12,
        )
        .unwrap();
        let params = SimulationParams::new(0.0, 10.0, 3);
        let mut ws = ctx.workspace();
        match sample_holding_time(&ctx, &params, 1, 0.0, 5.0, &mut ws).unwrap() {
            HoldingOutcome::Frozen => {}
            HoldingOutcome::Jump(u) => panic!("spurious jump at {u}"),
        }
        let traj = simulate_trajectory(&ctx, &params, 0).unwrap();
        assert_eq!(traj.status, TrajectoryStatus::ReachedHorizon);
        assert_eq!(traj.events, vec![(0.0, 1)]);
        assert_eq!(traj.final_time, 10.0);
    }

    #[test]
    fn two_level_trajectories_jump_exactly_once() {
        let ctx = two_level_ctx();
        let params = SimulationParams::new(0.0, PI, 5);
        for index in 0..200 {
            let traj = simulate_trajectory(&ctx, &params, index).unwrap();
            assert_eq!(
                traj.status,
                TrajectoryStatus::ReachedHorizon,
                "index {index}"
            );
            assert_eq!(traj.jump_count(), 1, "index {index}");
            assert_eq!(traj.events[0], (0.0, 0));
            let (jump_t, dest) = traj.events[1];
            assert_eq!(dest, 1);
            assert!(jump_t > 0.0 && jump_t < PI);
            assert!(traj.min_weight_visited > ctx.node_threshold());
        }
    }

    #[test]
    fn trajectories_are_deterministic_in_seed_and_index() {
        let ctx = models::bell_lattice(3, 2, 1.0, 0.5)
            .unwrap()
            .context(1e-12)
            .unwrap();
        let params = SimulationParams::new(0.0, 2.0, 42);
        let a = simulate_trajectory(&ctx, &params, 7).unwrap();
        let b = simulate_trajectory(&ctx, &params, 7).unwrap();
        assert_eq!(a, b);
        let c = simulate_trajectory(&ctx, &params, 8).unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn jump_times_strictly_increase() {
        let ctx = models::bell_lattice(3, 2, 1.0, 0.5)
            .unwrap()
            .context(1e-12)
            .unwrap();
        let params = SimulationParams::new(0.0, 3.0, 11);
        for index in 0..50 {
            let traj = simulate_trajectory(&ctx, &params, index).unwrap();
            for w in traj.events.windows(2) {
                assert!(w[1].0 > w[0].0, "index {index}: {:?}", traj.events);
            }
            assert!(traj.events[0].0 >= 0.0);
            assert!(traj.final_time <= 3.0);
        }
    }

    #[test]
    fn position_lookup_is_right_continuous() {
        let horizon = Trajectory {
            index: 0,
            status: TrajectoryStatus::ReachedHorizon,
            events: vec![(0.0, 0), (1.5, 1)],
            final_time: 3.0,
            min_weight_visited: 0.5,
            diagnostic: None,
        };
        assert_eq!(horizon.position_at(0.0).unwrap(), Position::Label(0));
        assert_eq!(horizon.position_at(1.4999).unwrap(), Position::Label(0));
        assert_eq!(horizon.position_at(1.5).unwrap(), Position::Label(1));
        assert_eq!(horizon.position_at(3.0).unwrap(), Position::Label(1));
        assert!(matches!(
            horizon.position_at(-0.1),
            Err(Error::TimeBeforeStart { .. })
        ));

        let absorbed = Trajectory {
            status: TrajectoryStatus::HitCemetery,
            final_time: 2.0,
            ..horizon.clone()
        };
        assert_eq!(absorbed.position_at(1.9).unwrap(), Position::Label(1));
        assert_eq!(absorbed.position_at(2.0).unwrap(), Position::Cemetery);
        assert_eq!(absorbed.position_at(2.5).unwrap(), Position::Cemetery);
    }

    #[test]
    fn first_node_location_on_closed_form_weights() {
        let ctx = two_level_ctx();
        // Weight of label 0 crosses the threshold just short of pi.
        let node = first_node_time(&ctx, 0, 0.0, 4.0).unwrap().unwrap();
        assert_abs_diff_eq!(node, PI, epsilon = 1e-5);
        // Label 1 has no node on (0.1, 3.0).
        assert_eq!(first_node_time(&ctx, 1, 0.1, 3.0).unwrap(), None);
        // Its weight sin(t/2)^2 vanishes at 2 pi.
        let second = first_node_time(&ctx, 1, 0.1, 7.0).unwrap().unwrap();
        assert_abs_diff_eq!(second, 2.0 * PI, epsilon = 1e-5);
        // Starting on a node reports the start itself.
        assert_eq!(first_node_time(&ctx, 1, 0.0, 1.0).unwrap(), Some(0.0));
    }

    #[test]
    fn initial_label_follows_weight_profile() {
        let ctx = two_level_ctx();
        let params = SimulationParams::new(0.0, 1.0, 9);
        for index in 0..100 {
            let traj = simulate_trajectory(&ctx, &params, index).unwrap();
            assert_eq!(
                traj.events[0].1, 0,
                "weight is concentrated on label 0 at t = 0"
            );
        }
        // At t0 = pi / 2 the two labels have equal weight.
        let params = SimulationParams::new(PI / 2.0, PI / 2.0 + 0.1, 9);
        let mut ones = 0;
        for index in 0..2000 {
            let traj = simulate_trajectory(&ctx, &params, index).unwrap();
            ones += traj.events[0].1;
        }
        let frac = ones as f64 / 2000.0;
        assert!((frac - 0.5).abs() < 0.04, "label-1 fraction {frac}");
    }

    #[test]
    fn record_serializes_with_named_labels() {
        let ctx = two_level_ctx();
        let params = SimulationParams::new(0.0, PI, 5);
        let traj = simulate_trajectory(&ctx, &params, 0).unwrap();
        let mut buf = Vec::new();
        write_trajectories_jsonl(&mut buf, &[traj], ctx.labels()).unwrap();
        let line = String::from_utf8(buf).unwrap();
        assert!(line.ends_with('\n'));
        assert!(line.contains("\"REACHED_HORIZON\""), "{line}");
        let parsed: TrajectoryRecord = serde_json::from_str(line.trim()).unwrap();
        assert_eq!(parsed.events[0].1, "0");
        assert_eq!(parsed.events[1].1, "1");
        assert_eq!(parsed.index, 0);
    }

    #[test]
    fn memoryless_restart_reproduces_conditional_law() {
        // Holding times restarted at t = 1 follow the law conditioned on
        // surviving past 1: CDF (sin(t/2)^2 - sin(1/2)^2) / cos(1/2)^2.
        let ctx = two_level_ctx();
        let params = SimulationParams::new(0.0, PI, 13);
        let mut ws = ctx.workspace();
        let mut samples = Vec::with_capacity(4000);
        for i in 0..4000 {
            let mut rng = trajectory_rng(params.seed, i as u64);
            let target = exp1(&mut rng);
            match sample_holding_time(&ctx, &params, 0, 1.0, target, &mut ws).unwrap() {
                HoldingOutcome::Jump(u) => samples.push(u),
                HoldingOutcome::Frozen => panic!("jump certain before the node"),
            }
        }
        let s1 = (0.5f64).sin().powi(2);
        let c1 = 1.0 - s1;
        let d = ks_distance_to_cdf(&samples, |t| {
            (((t / 2.0).sin().powi(2) - s1) / c1).clamp(0.0, 1.0)
        });
        assert!(d < 0.03, "KS distance {d} against the conditional law");
    }
}
