//! Shared numerical kernels: adaptive Simpson quadrature, composite rules on
//! uniform grids, an embedded Runge-Kutta 4(5) step (Dormand-Prince
//! coefficients), and bracketed root refinement.
//!
//! Everything here works on plain `f64`; the hazard-specific integration with
//! its divergence ceiling lives in the sampler where the rate semantics are
//! known.

/// Failure report from adaptive quadrature: the subinterval that refused to
/// converge at maximum depth.
#[derive(Debug, Clone, Copy)]
pub struct QuadFailure {
    pub worst_a: f64,
    pub worst_b: f64,
    pub local_error: f64,
}

const MAX_SIMPSON_DEPTH: u32 = 48;

/// Adaptive Simpson integration of `f` over `[a, b]`.
///
/// Subintervals are accepted when the Richardson error estimate
/// `(S2 - S1)/15` drops below the local tolerance share; the share halves with
/// each split, so the total error is bounded by `abs_tol + rel_tol * |I|`.
pub fn adaptive_simpson(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64, QuadFailure> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let mut total: f64 = 0.0;
    // Stack entries: (a, fa, m, fm, b, fb, coarse estimate, abs tol share, depth).
    let mut stack = vec![(a, fa, m, fm, b, fb, whole, abs_tol, 0u32)];
    while let Some((a, fa, m, fm, b, fb, coarse, tol, depth)) = stack.pop() {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, m, fa, flm, fm);
        let right = simpson(m, b, fm, frm, fb);
        let err = (left + right - coarse) / 15.0;
        let scale = rel_tol * (total.abs() + (left + right).abs());
        if err.abs() <= tol.max(scale) {
            total += left + right + err;
        } else if depth >= MAX_SIMPSON_DEPTH {
            return Err(QuadFailure {
                worst_a: a,
                worst_b: b,
                local_error: err.abs(),
            });
        } else {
            let half = 0.5 * tol;
            stack.push((a, fa, lm, flm, m, fm, left, half, depth + 1));
            stack.push((m, fm, rm, frm, b, fb, right, half, depth + 1));
        }
    }
    Ok(total)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Composite quadrature of samples on a uniform grid with spacing `h`.
/// Uses Simpson pairs, closing an odd interval count with the 3/8 rule;
/// degenerates to the trapezoid rule when fewer than three points are given.
pub fn composite_simpson_uniform(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return 0.5 * h * (values[0] + values[1]);
    }
    let intervals = n - 1;
    let (simpson_intervals, tail) = if intervals.is_multiple_of(2) {
        (intervals, 0)
    } else if intervals >= 3 {
        (intervals - 3, 3)
    } else {
        (0, 0)
    };
    let mut total: f64 = 0.0;
    let mut i = 0;
    while i + 2 <= simpson_intervals {
        total += h / 3.0 * (values[i] + 4.0 * values[i + 1] + values[i + 2]);
        i += 2;
    }
    if tail == 3 {
        let j = n - 4;
        total +=
            3.0 * h / 8.0 * (values[j] + 3.0 * values[j + 1] + 3.0 * values[j + 2] + values[j + 3]);
    } else if simpson_intervals == 0 && intervals == 1 {
        total += 0.5 * h * (values[0] + values[1]);
    }
    total
}

/// Step-size underflow report from the ODE driver.
#[derive(Debug, Clone, Copy)]
pub struct OdeFailure {
    /// Time at which no acceptable step could be taken.
    pub t: f64,
    /// Index of the state component with the largest error contribution.
    pub worst_component: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub h_min: f64,
}

// Dormand-Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate `y' = rhs(t, y)` from `t0` to `t1` (t1 > t0) with the embedded
/// Dormand-Prince 4(5) pair and elementwise error control. Overwrites `y` with
/// the solution at `t1`.
pub fn rk45_integrate(
    rhs: &mut impl FnMut(f64, &[f64], &mut [f64]),
    t0: f64,
    t1: f64,
    y: &mut [f64],
    opts: &OdeOptions,
) -> Result<(), OdeFailure> {
    let dim = y.len();
    let mut k = vec![vec![0.0; dim]; 7];
    let mut y_stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut t = t0;
    let mut h = opts.h_init.min(t1 - t0).max(opts.h_min);
    let mut first = true;
    while t < t1 {
        if h > t1 - t {
            h = t1 - t;
        }
        // FSAL: stage 0 of a fresh step equals stage 6 of the accepted one.
        if first {
            let (head, _) = k.split_at_mut(1);
            rhs(t, y, &mut head[0]);
            first = false;
        }
        for stage in 1..7 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (prev, a) in DP_A[stage].iter().enumerate().take(stage) {
                    acc += a * k[prev][i];
                }
                y_stage[i] = y[i] + h * acc;
            }
            let (done, rest) = k.split_at_mut(stage);
            let _ = done;
            rhs(t + DP_C[stage] * h, &y_stage, &mut rest[0]);
        }
        let mut err_norm: f64 = 0.0;
        let mut worst = 0;
        for i in 0..dim {
            let mut y5 = 0.0;
            let mut y4 = 0.0;
            for s in 0..7 {
                y5 += DP_B5[s] * k[s][i];
                y4 += DP_B4[s] * k[s][i];
            }
            y_new[i] = y[i] + h * y5;
            let scale = opts.abs_tol + opts.rel_tol * y[i].abs().max(y_new[i].abs());
            let e = (h * (y5 - y4)).abs() / scale;
            if e > err_norm {
                err_norm = e;
                worst = i;
            }
        }
        if err_norm <= 1.0 {
            t += h;
            y.copy_from_slice(&y_new);
            k.swap(0, 6);
        } else if h <= opts.h_min * 1.0001 {
            return Err(OdeFailure {
                t,
                worst_component: worst,
            });
        }
        let factor = if err_norm > 0.0 {
            (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h = (h * factor).max(opts.h_min);
    }
    Ok(())
}

/// Shrink a bracket `[lo, hi]` around a sign change of `f` (with `f(lo)` and
/// `f(hi)` of opposite sign or zero at `hi`) down to width `tol` by bisection.
/// Returns the midpoint of the final bracket.
pub fn bisect_root(f: &mut impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let mut lo = lo;
    let mut hi = hi;
    let rising = f(hi) >= f(lo);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        let above = if rising { fm >= 0.0 } else { fm <= 0.0 };
        if above {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
