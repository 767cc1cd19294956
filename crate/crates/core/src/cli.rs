//! Command-line front end: `solve`, `validate` and `stats`.
//!
//! Exit codes: 0 success, 1 input or I/O error, 2 solve finished without
//! converging (outputs still written), 3 validation failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::assignment::{verify_power_consistency, ScaledCostPolicy, DEFAULT_SCALE};
use crate::error::Error;
use crate::geometry::{compute_cells, diagram_stats, ConvexCell, DiagramStats, Frame};
use crate::ingest_io::{self, ReadOptions, ResultSet};
use crate::lloyd::{centroid_step, run_restarts, LloydConfig, DEFAULT_MAX_ITERATIONS};
use crate::model::{assignment_cost, balanced_capacities, squared_distance, Instance};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "power-districts", version, about = "Balanced convex districts from weighted blocks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a balanced centroidal power diagram and write the result set.
    Solve(SolveArgs),
    /// Re-check a result directory.
    Validate(DirArgs),
    /// Print diagram statistics for a result directory.
    Stats(DirArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long = "max-iters", default_value_t = DEFAULT_MAX_ITERATIONS)]
    pub max_iterations: usize,
    /// Center displacement threshold in planar units (default: 1e-9 of the
    /// bounding-box diameter).
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SCALE)]
    pub scale: f64,
    /// Input columns are lon,lat degrees; project them to the plane.
    #[arg(long)]
    pub lonlat: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Instance name recorded in summary.json (default: input file stem).
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct DirArgs {
    #[arg(long)]
    pub dir: PathBuf,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Validate(args) => cmd_validate(&args.dir),
        Command::Stats(args) => cmd_stats(&args.dir),
    }
}

fn frame_for(inst: &Instance) -> Frame {
    Frame::around(inst.blocks().iter().map(|b| b.location))
        .expect("instances are nonempty")
}

pub fn cmd_solve(args: &SolveArgs) -> i32 {
    match solve(args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn solve(args: &SolveArgs) -> Result<i32, Error> {
    if args.k == 0 {
        return Err(Error::InvalidInstance("--k must be at least 1".into()));
    }
    let started = Instant::now();
    let inst = ingest_io::read_blocks(&args.input, &ReadOptions { lonlat: args.lonlat }, args.k)?;
    let policy = ScaledCostPolicy::new(args.scale)?;
    let cfg = LloydConfig {
        seed: args.seed,
        max_iterations: args.max_iterations,
        threshold: args.threshold,
    };
    let run = run_restarts(&inst, &cfg, &policy, args.restarts)?;
    let cells = compute_cells(&run.centers, &run.weights, &frame_for(&run.instance));
    let name = args.name.clone().unwrap_or_else(|| {
        args.input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let summary = ingest_io::write_outputs(
        &args.out,
        &name,
        &run,
        &cells,
        started.elapsed().as_secs_f64(),
    )?;
    println!(
        "{}: k={} m={} seed={} iterations={} cost={} converged={}",
        summary.instance,
        summary.k,
        summary.m,
        summary.seed,
        summary.iterations,
        summary.final_cost,
        summary.converged
    );
    if summary.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "warning: no convergence within {} iterations; outputs hold the last iterate",
            args.max_iterations
        );
        Ok(EXIT_NOT_CONVERGED)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        CheckResult { name, passed, detail }
    }
}

/// Every machine check `validate` performs, in order.
pub fn validation_checks(set: &ResultSet) -> Vec<CheckResult> {
    let inst = &set.instance;
    let mut checks = Vec::new();

    let balance = (|| -> Result<(), String> {
        let expected = balanced_capacities(inst.total_population(), inst.k()).map_err(|e| e.to_string())?;
        if set.centers.capacities() != expected.as_slice() {
            return Err(format!("capacities {:?} are not the balanced pattern {expected:?}", set.centers.capacities()));
        }
        if set.summary.m != inst.total_population() {
            return Err(format!("summary m = {} but blocks sum to {}", set.summary.m, inst.total_population()));
        }
        set.assignment.validate(inst, &set.centers).map_err(|e| e.to_string())?;
        let pops = set.assignment.center_populations(inst.k());
        let spread = pops.iter().max().unwrap() - pops.iter().min().unwrap();
        if spread > 1 {
            return Err(format!("district populations differ by {spread}"));
        }
        Ok(())
    })();
    let balanced = balance.is_ok();
    checks.push(CheckResult::new(
        "balance",
        balanced,
        balance.err().unwrap_or_else(|| "per-center populations equal capacities".into()),
    ));

    let tolerance = 2.0 / set.summary.cost_scale;
    let report = verify_power_consistency(inst, &set.centers, &set.assignment, &set.weights, tolerance);
    checks.push(CheckResult::new(
        "power_consistency",
        report.is_consistent(),
        match report.violations.first() {
            None => format!("all assigned blocks inside their power cells (tolerance {tolerance:e})"),
            Some(v) => format!(
                "{} violations, e.g. block {} -> center {} exceeds by {:e}",
                report.violations.len(),
                v.block_id,
                v.center,
                v.excess
            ),
        },
    ));

    // A lattice center sits within half a cell diagonal of its centroid.
    let allowance = set.summary.threshold + set.summary.lattice_step * std::f64::consts::FRAC_1_SQRT_2;
    match centroid_step(inst, &set.assignment, &set.centers) {
        Ok(centroids) => {
            let worst = set
                .centers
                .centers()
                .iter()
                .zip(centroids.centers())
                .map(|(a, b)| squared_distance(*a, *b).sqrt())
                .fold(0.0, f64::max);
            checks.push(CheckResult::new(
                "centroid",
                worst <= allowance,
                format!("max center-to-centroid distance {worst:e} (allowed {allowance:e})"),
            ));
        }
        Err(e) => checks.push(CheckResult::new("centroid", false, e.to_string())),
    }

    if balanced {
        let cost = assignment_cost(inst, &set.centers, &set.assignment).unwrap_or(f64::NAN);
        let reported = set.summary.final_cost;
        let rel = (cost - reported).abs() / reported.abs().max(f64::MIN_POSITIVE);
        checks.push(CheckResult::new(
            "cost",
            rel <= 1e-6 || cost == reported,
            format!("recomputed {cost} vs reported {reported}"),
        ));
    }

    let stats = stats_for(set);
    let p2 = stats.nonempty_cells < 3 || stats.average_sides < 6.0;
    checks.push(CheckResult::new(
        "sides",
        p2,
        format!(
            "average internal sides {:.3} over {} nonempty cells",
            stats.average_sides, stats.nonempty_cells
        ),
    ));
    checks
}

fn cells_for(set: &ResultSet) -> Vec<ConvexCell> {
    compute_cells(&set.centers, &set.weights, &frame_for(&set.instance))
}

fn stats_for(set: &ResultSet) -> DiagramStats {
    diagram_stats(&cells_for(set))
}

fn load(dir: &Path) -> Result<ResultSet, i32> {
    ingest_io::read_result_set(dir).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_INPUT
    })
}

pub fn cmd_validate(dir: &Path) -> i32 {
    let set = match load(dir) {
        Ok(set) => set,
        Err(code) => return code,
    };
    let checks = validation_checks(&set);
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if checks.iter().all(|c| c.passed) {
        EXIT_OK
    } else {
        EXIT_INVALID
    }
}

pub fn cmd_stats(dir: &Path) -> i32 {
    let set = match load(dir) {
        Ok(set) => set,
        Err(code) => return code,
    };
    let stats = stats_for(&set);
    println!("cells: {} nonempty of {}", stats.nonempty_cells, stats.side_counts.len());
    println!("average internal sides: {:.4}", stats.average_sides);
    for (i, s) in stats.side_counts.iter().enumerate() {
        println!("cell {i}: {s} sides");
    }
    let adjacency: Vec<String> = stats.adjacency.iter().map(|(a, b)| format!("{a}-{b}")).collect();
    println!("adjacency: {}", adjacency.join(" "));
    println!("instance\tk\tm\titerations");
    println!(
        "{}\t{}\t{}\t{}",
        set.summary.instance, set.summary.k, set.summary.m, set.summary.iterations
    );
    EXIT_OK
}
