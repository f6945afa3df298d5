//! Ensemble simulation and empirical-versus-expected comparison.
//!
//! Aggregation is integer-exact: per-checkpoint occupancy counts are `u64`,
//! jump-count moments are `u64`/`u128` sums, and the only floating merge is a
//! minimum. All of those are associative and commutative, so the report is
//! bitwise identical for any thread count or work split; floating division
//! happens once, at the end, in a fixed order.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rates::{distribution, RateContext};
use crate::sampler::{
    simulate_trajectory, Position, SimulationParams, Trajectory, TrajectoryStatus,
};

#[derive(Debug, Clone)]
pub struct EnsembleOptions {
    pub n: u64,
    /// Times at which empirical occupancy is compared with the weights.
    pub checkpoints: Vec<f64>,
    /// Keep every sampled trajectory in the report (index order).
    pub keep_trajectories: bool,
}

/// Totals that merge exactly regardless of work split.
#[derive(Debug, Clone)]
struct Accum {
    /// Flattened checkpoint-major label counts.
    counts: Vec<u64>,
    cemetery_at: Vec<u64>,
    jumps_sum: u64,
    jumps_sq_sum: u128,
    max_jumps: u64,
    explosions: u64,
    cemeteries: u64,
    min_weight: f64,
}

impl Accum {
    fn new(n_checkpoints: usize, n_labels: usize) -> Self {
        Accum {
            counts: vec![0; n_checkpoints * n_labels],
            cemetery_at: vec![0; n_checkpoints],
            jumps_sum: 0,
            jumps_sq_sum: 0,
            max_jumps: 0,
            explosions: 0,
            cemeteries: 0,
            min_weight: f64::INFINITY,
        }
    }

    fn add(&mut self, traj: &Trajectory, checkpoints: &[f64], n_labels: usize) -> Result<()> {
        for (c, &t) in checkpoints.iter().enumerate() {
            match traj.position_at(t)? {
                Position::Label(x) => self.counts[c * n_labels + x] += 1,
                Position::Cemetery => self.cemetery_at[c] += 1,
            }
        }
        let jumps = traj.jump_count() as u64;
        self.jumps_sum += jumps;
        self.jumps_sq_sum += (jumps as u128) * (jumps as u128);
        self.max_jumps = self.max_jumps.max(jumps);
        match traj.status {
            TrajectoryStatus::Exploded => self.explosions += 1,
            TrajectoryStatus::HitCemetery => self.cemeteries += 1,
            TrajectoryStatus::ReachedHorizon => {}
        }
        self.min_weight = self.min_weight.min(traj.min_weight_visited);
        Ok(())
    }

    fn merge(mut self, other: Accum) -> Accum {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        for (a, b) in self.cemetery_at.iter_mut().zip(&other.cemetery_at) {
            *a += b;
        }
        self.jumps_sum += other.jumps_sum;
        self.jumps_sq_sum += other.jumps_sq_sum;
        self.max_jumps = self.max_jumps.max(other.max_jumps);
        self.explosions += other.explosions;
        self.cemeteries += other.cemeteries;
        self.min_weight = self.min_weight.min(other.min_weight);
        self
    }
}

/// Ensemble summary. `empirical[c][x]` is the fraction of trajectories on
/// label `x` at checkpoint `c`; `expected[c][x]` is the weight profile
/// normalized to 1; `tv[c]` is half the L1 gap between them.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleReport {
    pub n: u64,
    pub checkpoints: Vec<f64>,
    pub labels: Vec<String>,
    pub empirical: Vec<Vec<f64>>,
    pub expected: Vec<Vec<f64>>,
    pub tv: Vec<f64>,
    pub cemetery_fraction_at: Vec<f64>,
    pub mean_jumps: f64,
    pub jumps_se: f64,
    pub max_jumps_observed: u64,
    pub explosion_count: u64,
    pub cemetery_count: u64,
    pub min_weight_visited: f64,
    #[serde(skip)]
    pub trajectories: Option<Vec<Trajectory>>,
}

pub fn run_ensemble(
    ctx: &RateContext,
    params: &SimulationParams,
    opts: &EnsembleOptions,
) -> Result<EnsembleReport> {
    params.validate()?;
    if opts.n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            message: "at least one trajectory required".to_string(),
        });
    }
    for &t in &opts.checkpoints {
        if !(t >= params.t0 && t <= params.t_end) {
            return Err(Error::InvalidParameter {
                name: "checkpoints",
                message: format!(
                    "checkpoint {t} outside the window [{}, {}]",
                    params.t0, params.t_end
                ),
            });
        }
    }
    let n_labels = ctx.len();
    let n_checkpoints = opts.checkpoints.len();

    let accum = if opts.keep_trajectories {
        // Collect in index order, then fold sequentially; the totals are the
        // same integers either way.
        let trajectories: Vec<Trajectory> = (0..opts.n)
            .into_par_iter()
            .map(|i| simulate_trajectory(ctx, params, i))
            .collect::<Result<_>>()?;
        let mut acc = Accum::new(n_checkpoints, n_labels);
        for traj in &trajectories {
            acc.add(traj, &opts.checkpoints, n_labels)?;
        }
        (acc, Some(trajectories))
    } else {
        let acc = (0..opts.n)
            .into_par_iter()
            .try_fold(
                || Accum::new(n_checkpoints, n_labels),
                |mut acc, i| -> Result<Accum> {
                    let traj = simulate_trajectory(ctx, params, i)?;
                    acc.add(&traj, &opts.checkpoints, n_labels)?;
                    Ok(acc)
                },
            )
            .try_reduce(
                || Accum::new(n_checkpoints, n_labels),
                |a, b| Ok(a.merge(b)),
            )?;
        (acc, None)
    };
    let (acc, trajectories) = accum;

    let nf = opts.n as f64;
    let norm = ctx.norm0_sq();
    let mut empirical = Vec::with_capacity(n_checkpoints);
    let mut expected = Vec::with_capacity(n_checkpoints);
    let mut tv = Vec::with_capacity(n_checkpoints);
    for (c, &t) in opts.checkpoints.iter().enumerate() {
        let emp: Vec<f64> = (0..n_labels)
            .map(|x| acc.counts[c * n_labels + x] as f64 / nf)
            .collect();
        let exp: Vec<f64> = distribution(ctx, t)?
            .weights
            .iter()
            .map(|w| w / norm)
            .collect();
        let dist = 0.5
            * emp
                .iter()
                .zip(&exp)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        empirical.push(emp);
        expected.push(exp);
        tv.push(dist);
    }
    let mean_jumps = acc.jumps_sum as f64 / nf;
    let jumps_se = if opts.n > 1 {
        let sum = acc.jumps_sum as f64;
        let sum_sq = acc.jumps_sq_sum as f64;
        let var = ((sum_sq - sum * sum / nf) / (nf - 1.0)).max(0.0);
        (var / nf).sqrt()
    } else {
        0.0
    };
    Ok(EnsembleReport {
        n: opts.n,
        checkpoints: opts.checkpoints.clone(),
        labels: ctx.labels().to_vec(),
        empirical,
        expected,
        tv,
        cemetery_fraction_at: acc.cemetery_at.iter().map(|&c| c as f64 / nf).collect(),
        mean_jumps,
        jumps_se,
        max_jumps_observed: acc.max_jumps,
        explosion_count: acc.explosions,
        cemetery_count: acc.cemeteries,
        min_weight_visited: acc.min_weight,
        trajectories,
    })
}
