//! Command-line interface.
//!
//! Exit codes: 0 success, 1 a verification or check reported a violation,
//! 2 invalid input or runtime failure. Output files carry no timestamps or
//! environment detail, so a rerun with the same arguments is byte-identical.

use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use crate::checks::{check_coupling_bound, check_coupling_integral, check_element_contraction};
use crate::ensemble::{run_ensemble, EnsembleOptions, EnsembleReport};
use crate::error::{Error, Result};
use crate::hilbert::StateVector;
use crate::models::{self, ModelSpec};
use crate::oracle::{
    expected_jump_count, solve_integral_equation_picard, solve_master_equation, OracleSolution,
};
use crate::rates::{distribution, jump_rate, RateContext};
use crate::rng::{normal_pair, trajectory_rng};
use crate::sampler::{write_trajectories_jsonl, SimulationParams, DEFAULT_MAX_JUMPS};

const EXIT_OK: i32 = 0;
const EXIT_VIOLATION: i32 = 1;
const EXIT_ERROR: i32 = 2;

#[derive(Parser)]
#[command(
    name = "belljump",
    version,
    about = "Sample and verify a stochastic jump process driven by unitary dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a trajectory ensemble and compare occupancy with the weights.
    Simulate(SimulateArgs),
    /// Run every oracle and inequality for one model; exit 1 on violation.
    Verify(VerifyArgs),
    /// Print oracle weight curves as CSV.
    Oracle(OracleArgs),
    /// Evaluate the non-explosion inequalities; exit 1 on violation.
    Check(CheckArgs),
    /// Dump the pairwise jump rates at one time as CSV.
    Rates(RatesArgs),
    /// Inspect or export bundled models.
    Model(ModelArgs),
}

#[derive(Args)]
struct ModelSelect {
    /// Bundled model name, or path to a model JSON file.
    #[arg(long, default_value = "two_level")]
    model: String,
    /// Node threshold relative to the initial norm squared.
    #[arg(long, default_value_t = 1e-12)]
    node_epsilon: f64,
}

impl ModelSelect {
    fn spec(&self) -> Result<ModelSpec> {
        load_model(&self.model)
    }

    fn context(&self) -> Result<RateContext> {
        self.spec()?.context(self.node_epsilon)
    }
}

fn load_model(name_or_path: &str) -> Result<ModelSpec> {
    let path = Path::new(name_or_path);
    if name_or_path.ends_with(".json") || path.is_file() {
        ModelSpec::from_file(path)
    } else {
        models::by_name(name_or_path)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    select: ModelSelect,
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    #[arg(long, default_value_t = std::f64::consts::PI)]
    t_end: f64,
    /// Number of trajectories.
    #[arg(long, default_value_t = 1000)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comparison times, comma separated; defaults to the horizon.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Vec<f64>,
    /// Worker threads; all cores when absent.
    #[arg(long, env = "BELLJUMP_THREADS")]
    threads: Option<usize>,
    /// Directory for report.json and empirical.csv; stdout JSON when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write every trajectory to trajectories.jsonl.
    #[arg(long, requires = "output")]
    keep_paths: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_JUMPS)]
    max_jumps: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    select: ModelSelect,
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    #[arg(long, default_value_t = std::f64::consts::PI)]
    t_end: f64,
    /// Trajectories for the sampling comparison.
    #[arg(long, default_value_t = 2000)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comparison times; defaults to four interior quarter points.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Vec<f64>,
    /// Oracle grid intervals.
    #[arg(long, default_value_t = 256)]
    grid: usize,
    /// Jump-expansion terms.
    #[arg(long, default_value_t = 12)]
    terms: usize,
    /// Allowed total-variation gap at each checkpoint.
    #[arg(long, default_value_t = 0.05)]
    tv_tol: f64,
    /// Sup-norm tolerance for the weight-balance oracle.
    #[arg(long, default_value_t = 1e-6)]
    master_tol: f64,
    /// Allowed overshoot of partial sums above the weights. Discretization
    /// error scales with the square of the grid step and grows near a node;
    /// the default absorbs a horizon touching the first node at the default
    /// grid. Tighten together with --grid.
    #[arg(long, default_value_t = 5e-5)]
    domination_tol: f64,
    /// When set, require the jump expansion within this of the balance oracle.
    #[arg(long)]
    picard_tol: Option<f64>,
    #[arg(long, env = "BELLJUMP_THREADS")]
    threads: Option<usize>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Master,
    Picard,
    Both,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    select: ModelSelect,
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    #[arg(long, default_value_t = std::f64::consts::PI)]
    t_end: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Master)]
    method: MethodArg,
    /// Grid intervals.
    #[arg(long, default_value_t = 256)]
    grid: usize,
    /// Jump-expansion terms.
    #[arg(long, default_value_t = 12)]
    terms: usize,
    /// CSV file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    select: ModelSelect,
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    #[arg(long, default_value_t = std::f64::consts::PI)]
    t_end: f64,
    /// Random probe states for the uniform bound.
    #[arg(long, default_value_t = 40)]
    states: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct RatesArgs {
    #[command(flatten)]
    select: ModelSelect,
    /// Evaluation time.
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// CSV file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    #[command(subcommand)]
    command: ModelCommand,
}

#[derive(Subcommand)]
enum ModelCommand {
    /// Names and sizes of the bundled models.
    List,
    /// Print a model as JSON.
    Export {
        /// Bundled model name, or path to a model JSON file.
        name: String,
        /// JSON file; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_VIOLATION,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Simulate(args) => simulate(&args).map(|()| true),
        Command::Verify(args) => verify(&args),
        Command::Oracle(args) => oracle(&args).map(|()| true),
        Command::Check(args) => check(&args),
        Command::Rates(args) => rates(&args).map(|()| true),
        Command::Model(args) => model(&args.command).map(|()| true),
    }
}

/// Run `f` on a private pool of `threads` workers; on the global pool when
/// no count was requested. The aggregation is order-independent either way,
/// the count only controls resources.
fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::InvalidParameter {
                    name: "threads",
                    message: e.to_string(),
                })?;
            Ok(pool.install(f))
        }
    }
}

fn write_or_print(path: Option<&PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(p) => {
            fs::write(p, content)?;
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

#[derive(serde::Serialize)]
struct SimulateReport<'a> {
    model: &'a str,
    t0: f64,
    t_end: f64,
    seed: u64,
    max_jumps: usize,
    node_epsilon: f64,
    ensemble: &'a EnsembleReport,
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let spec = args.select.spec()?;
    let ctx = spec.context(args.select.node_epsilon)?;
    let mut params = SimulationParams::new(args.t0, args.t_end, args.seed);
    params.max_jumps = args.max_jumps;
    let checkpoints = if args.checkpoints.is_empty() {
        vec![args.t_end]
    } else {
        args.checkpoints.clone()
    };
    let opts = EnsembleOptions {
        n: args.n,
        checkpoints,
        keep_trajectories: args.keep_paths,
    };
    let report = with_pool(args.threads, || run_ensemble(&ctx, &params, &opts))??;
    let doc = SimulateReport {
        model: &spec.name,
        t0: args.t0,
        t_end: args.t_end,
        seed: args.seed,
        max_jumps: args.max_jumps,
        node_epsilon: args.select.node_epsilon,
        ensemble: &report,
    };
    let json = serde_json::to_string_pretty(&doc)? + "\n";
    match &args.output {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("report.json"), &json)?;
            fs::write(dir.join("empirical.csv"), empirical_csv(&report))?;
            if args.keep_paths {
                let trajectories = report
                    .trajectories
                    .as_ref()
                    .expect("keep_paths retains trajectories");
                let file = fs::File::create(dir.join("trajectories.jsonl"))?;
                let mut out = BufWriter::new(file);
                write_trajectories_jsonl(&mut out, trajectories, &report.labels)?;
                out.flush()?;
            }
            eprintln!("wrote {}", dir.display());
        }
        None => print!("{json}"),
    }
    Ok(())
}

fn empirical_csv(report: &EnsembleReport) -> String {
    let mut out = String::from("t,label,empirical,expected\n");
    for (c, &t) in report.checkpoints.iter().enumerate() {
        for (x, label) in report.labels.iter().enumerate() {
            out.push_str(&format!(
                "{t},{label},{},{}\n",
                report.empirical[c][x], report.expected[c][x]
            ));
        }
    }
    out
}

fn verify(args: &VerifyArgs) -> Result<bool> {
    let ctx = args.select.context()?;
    let norm = ctx.norm0_sq();
    let mut all_pass = true;
    let mut line = |name: &str, pass: bool, detail: String| {
        all_pass &= pass;
        println!(
            "VERIFY {name}: {} ({detail})",
            if pass { "PASS" } else { "FAIL" }
        );
    };

    let master = solve_master_equation(&ctx, args.t0, args.t_end, args.grid)?;
    let mut sup = 0.0f64;
    for (row, &t) in master.weights.iter().zip(&master.times) {
        let direct = distribution(&ctx, t)?.weights;
        for (w, d) in row.iter().zip(&direct) {
            sup = sup.max((w - d).abs());
        }
    }
    line(
        "weight-balance",
        sup <= args.master_tol * norm,
        format!("sup gap {sup:.3e}, tol {:.3e}", args.master_tol * norm),
    );

    let picard =
        solve_integral_equation_picard(&ctx, args.t0, args.t_end, args.grid, args.terms, 1e-12)?;
    let mut dominated = true;
    let mut worst_excess = 0.0f64;
    let full = picard.partial_sum(picard.n_terms() - 1);
    for (row, &t) in full.iter().zip(&picard.times) {
        let direct = distribution(&ctx, t)?.weights;
        for (f, d) in row.iter().zip(&direct) {
            let excess = f - d;
            worst_excess = worst_excess.max(excess);
            if excess > args.domination_tol * norm {
                dominated = false;
            }
        }
    }
    line(
        "jump-expansion-domination",
        dominated,
        format!(
            "worst excess {worst_excess:.3e} over {} terms",
            picard.n_terms()
        ),
    );
    if let Some(tol) = args.picard_tol {
        let mut gap = 0.0f64;
        for (frow, mrow) in full.iter().zip(&master.weights) {
            for (f, m) in frow.iter().zip(mrow) {
                gap = gap.max((f - m).abs());
            }
        }
        line(
            "jump-expansion-convergence",
            gap <= tol,
            format!("sup gap to balance oracle {gap:.3e}, tol {tol:.3e}"),
        );
    }

    let coupling = check_coupling_integral(&ctx, args.t0, args.t_end)?;
    line(
        "coupling-integral",
        coupling.value.is_finite()
            && coupling.integrand_max <= coupling.integrand_bound * (1.0 + 1e-9),
        format!(
            "integral {:.6}, integrand max {:.6} <= bound {:.6}",
            coupling.value, coupling.integrand_max, coupling.integrand_bound
        ),
    );

    let probes = vec![nalgebra::DMatrix::identity(ctx.dim(), ctx.dim())];
    let excess = check_element_contraction(&ctx, &probes)?;
    line(
        "element-contraction",
        excess <= 1e-10,
        format!("worst relative excess {excess:.3e}"),
    );

    let checkpoints = if args.checkpoints.is_empty() {
        (1..=4)
            .map(|k| args.t0 + k as f64 * (args.t_end - args.t0) / 4.0)
            .collect()
    } else {
        args.checkpoints.clone()
    };
    let params = SimulationParams::new(args.t0, args.t_end, args.seed);
    let opts = EnsembleOptions {
        n: args.n,
        checkpoints,
        keep_trajectories: false,
    };
    let report = with_pool(args.threads, || run_ensemble(&ctx, &params, &opts))??;
    line(
        "no-explosion",
        report.explosion_count == 0 && report.cemetery_count == 0,
        format!(
            "{} explosions, {} absorptions, max jumps {}, min weight {:.3e}",
            report.explosion_count,
            report.cemetery_count,
            report.max_jumps_observed,
            report.min_weight_visited
        ),
    );
    let worst_tv = report.tv.iter().cloned().fold(0.0f64, f64::max);
    line(
        "occupancy",
        worst_tv <= args.tv_tol,
        format!("worst TV {worst_tv:.4}, tol {}", args.tv_tol),
    );
    let expected_jumps = expected_jump_count(&ctx, &master)?;
    let jump_gap = (report.mean_jumps - expected_jumps).abs();
    let jump_tol = 4.0 * report.jumps_se + 1e-5;
    line(
        "jump-count",
        jump_gap <= jump_tol,
        format!(
            "mean {:.6} vs expected {expected_jumps:.6}, gap {jump_gap:.3e}, tol {jump_tol:.3e}",
            report.mean_jumps
        ),
    );
    line(
        "jump-count-bound",
        expected_jumps <= coupling.value / norm + 1e-6,
        format!(
            "expected jumps {expected_jumps:.6} <= normalized coupling integral {:.6}",
            coupling.value / norm
        ),
    );
    Ok(all_pass)
}

fn oracle_csv(out: &mut String, labels: &[String], solution: &OracleSolution) {
    for (j, &t) in solution.times.iter().enumerate() {
        for (x, label) in labels.iter().enumerate() {
            out.push_str(&format!(
                "{t},{label},{},{}\n",
                solution.weights[j][x],
                solution.method.as_str()
            ));
        }
    }
}

fn oracle(args: &OracleArgs) -> Result<()> {
    let ctx = args.select.context()?;
    let mut out = String::from("t,label,weight,method\n");
    if args.method != MethodArg::Picard {
        let solution = solve_master_equation(&ctx, args.t0, args.t_end, args.grid)?;
        oracle_csv(&mut out, ctx.labels(), &solution);
    }
    if args.method != MethodArg::Master {
        let picard = solve_integral_equation_picard(
            &ctx, args.t0, args.t_end, args.grid, args.terms, 1e-12,
        )?;
        oracle_csv(&mut out, ctx.labels(), &picard.solution());
        if let Some(warning) = &picard.warning {
            eprintln!("warning: {warning}");
        }
    }
    write_or_print(args.output.as_ref(), &out)
}

fn check(args: &CheckArgs) -> Result<bool> {
    let ctx = args.select.context()?;
    let mut all_pass = true;
    let mut line = |name: &str, pass: bool, detail: String| {
        all_pass &= pass;
        println!(
            "CHECK {name}: {} ({detail})",
            if pass { "PASS" } else { "FAIL" }
        );
    };

    let coupling = check_coupling_integral(&ctx, args.t0, args.t_end)?;
    line(
        "coupling-integral",
        coupling.value.is_finite(),
        format!(
            "integral {:.6} over [{}, {}]",
            coupling.value, args.t0, args.t_end
        ),
    );
    line(
        "integrand-bound",
        coupling.integrand_max <= coupling.integrand_bound * (1.0 + 1e-9),
        format!(
            "integrand max {:.6} <= bound {:.6}",
            coupling.integrand_max, coupling.integrand_bound
        ),
    );

    let mut rng = trajectory_rng(args.seed, 0);
    let states: Vec<StateVector> = (0..args.states)
        .map(|_| {
            StateVector::new(
                (0..ctx.dim())
                    .map(|_| {
                        let (re, im) = normal_pair(&mut rng);
                        Complex64::new(re, im)
                    })
                    .collect(),
            )
        })
        .collect();
    let bound = check_coupling_bound(&ctx, &states)?;
    line(
        "uniform-bound",
        bound.worst_ratio <= 1.0 + 1e-9,
        format!(
            "worst ratio {:.6} over {} states",
            bound.worst_ratio, bound.samples
        ),
    );

    let mut probes = vec![nalgebra::DMatrix::identity(ctx.dim(), ctx.dim())];
    for _ in 0..8 {
        let mut m = nalgebra::DMatrix::from_element(ctx.dim(), ctx.dim(), Complex64::ZERO);
        for i in 0..ctx.dim() {
            for j in 0..ctx.dim() {
                let (re, im) = normal_pair(&mut rng);
                m[(i, j)] = Complex64::new(re, im);
            }
        }
        probes.push(m);
    }
    let excess = check_element_contraction(&ctx, &probes)?;
    line(
        "element-contraction",
        excess <= 1e-10,
        format!(
            "worst relative excess {excess:.3e} over {} probes",
            probes.len()
        ),
    );
    Ok(all_pass)
}

fn rates(args: &RatesArgs) -> Result<()> {
    let ctx = args.select.context()?;
    let labels = ctx.labels();
    let mut out = String::from("from,to,rate\n");
    for x in 0..ctx.len() {
        for y in 0..ctx.len() {
            if y == x {
                continue;
            }
            let rate = jump_rate(&ctx, args.t, x, y)?;
            out.push_str(&format!("{},{},{rate}\n", labels[x], labels[y]));
        }
    }
    write_or_print(args.output.as_ref(), &out)
}

fn model(command: &ModelCommand) -> Result<()> {
    match command {
        ModelCommand::List => {
            for spec in models::bundled() {
                let kind = if spec.povm.is_basis() {
                    "basis"
                } else {
                    "dense"
                };
                println!(
                    "{}  dim {}  labels {}  {}  closed forms {}",
                    spec.name,
                    spec.hamiltonian.dim(),
                    spec.povm.len(),
                    kind,
                    spec.closed_forms.len()
                );
            }
            Ok(())
        }
        ModelCommand::Export { name, output } => {
            let spec = load_model(name)?;
            let json = crate::io::model_to_json(&spec.to_raw())?;
            write_or_print(output.as_ref(), &json)
        }
    }
}
