//! Capacitated Lloyd iteration: k-means++ seeding, then alternating
//! minimum-cost balanced assignment and centroid moves.
//!
//! The run works on a copy of the instance snapped to the cost lattice and
//! keeps centers on lattice points, so every arc cost is an exact integer.
//! The centroid move picks the lattice point nearest the exact centroid and
//! keeps the current center unless the new point is strictly closer; the
//! recorded scaled cost therefore never increases and strictly decreases
//! whenever a center moves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{assign_on_lattice, CostLattice, ScaledCostPolicy};
use crate::error::{Error, Result};
use crate::model::{
    squared_distance, BalancedAssignment, CenterSet, Instance, IterationRecord, Point2,
    PowerWeights, RunTrace,
};

pub const DEFAULT_MAX_ITERATIONS: usize = 500;
/// Default displacement threshold as a fraction of the bounding-box diameter.
pub const DEFAULT_RELATIVE_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LloydConfig {
    pub seed: u64,
    pub max_iterations: usize,
    /// Absolute displacement threshold in planar units; `None` uses
    /// [`DEFAULT_RELATIVE_THRESHOLD`] times the instance diameter.
    pub threshold: Option<f64>,
}

impl Default for LloydConfig {
    fn default() -> Self {
        LloydConfig {
            seed: 0,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            threshold: None,
        }
    }
}

impl LloydConfig {
    pub fn with_seed(seed: u64) -> Self {
        LloydConfig {
            seed,
            ..Default::default()
        }
    }

    pub fn threshold_for(&self, inst: &Instance) -> f64 {
        self.threshold
            .unwrap_or(DEFAULT_RELATIVE_THRESHOLD * inst.diameter())
    }

    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidInstance("max_iterations must be positive".into()));
        }
        if let Some(t) = self.threshold {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidInstance(format!("invalid threshold {t}")));
            }
        }
        Ok(())
    }
}

/// Unnormalized D² sampling weights: population times squared distance to
/// the nearest already-chosen center (or plain population when none is
/// chosen yet).
pub fn seeding_weights(inst: &Instance, chosen: &[Point2]) -> Vec<f64> {
    inst.blocks()
        .iter()
        .map(|b| {
            let pop = b.population as f64;
            if chosen.is_empty() {
                pop
            } else {
                let d2 = chosen
                    .iter()
                    .map(|&c| squared_distance(b.location, c))
                    .fold(f64::INFINITY, f64::min);
                pop * d2
            }
        })
        .collect()
}

fn sample(weights: &[f64], rng: &mut ChaCha8Rng) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let target = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = Some(i);
        if target < acc {
            return Some(i);
        }
    }
    last
}

/// k-means++ seeding over block locations weighted by population.
pub fn seed_centers(inst: &Instance, k: usize, seed: u64) -> Result<CenterSet> {
    if k == 0 {
        return Err(Error::Seeding("k must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<Point2> = Vec::with_capacity(k);
    while chosen.len() < k {
        let weights = seeding_weights(inst, &chosen);
        let Some(i) = sample(&weights, &mut rng) else {
            return Err(Error::Seeding(format!(
                "only {} distinct populated locations for k = {k}",
                chosen.len()
            )));
        };
        chosen.push(inst.blocks()[i].location);
    }
    CenterSet::balanced(chosen, inst.total_population())
}

fn center_populations_checked(asg: &BalancedAssignment, centers: &CenterSet) -> Result<Vec<u64>> {
    let pops = asg.center_populations(centers.k());
    if let Some(x) = pops.iter().position(|&p| p == 0) {
        return Err(Error::Internal(format!("center {x} has no assigned residents")));
    }
    Ok(pops)
}

/// Moves each center to the flow-weighted mean of its assigned blocks.
pub fn centroid_step(
    inst: &Instance,
    asg: &BalancedAssignment,
    centers: &CenterSet,
) -> Result<CenterSet> {
    let pops = center_populations_checked(asg, centers)?;
    let mut sums = vec![Point2::default(); centers.k()];
    for (b, x, f) in asg.iter() {
        sums[x] = sums[x] + inst.blocks()[b].location * f as f64;
    }
    let moved = sums
        .iter()
        .zip(&pops)
        .map(|(s, &p)| *s * (1.0 / p as f64))
        .collect();
    centers.moved_to(moved)
}

/// Centroid move restricted to lattice points.
///
/// Each center goes to the lattice point nearest its exact centroid (blocks
/// must lie on the lattice), unless its current position is at least as
/// close, in which case it stays.
pub fn lattice_centroid_step(
    inst: &Instance,
    asg: &BalancedAssignment,
    centers: &CenterSet,
    lattice: &CostLattice,
) -> Result<CenterSet> {
    let pops = center_populations_checked(asg, centers)?;
    let k = centers.k();
    let mut sums = vec![(0i128, 0i128); k];
    for (b, x, f) in asg.iter() {
        let g = lattice.to_grid(inst.blocks()[b].location);
        sums[x].0 += f as i128 * g.0 as i128;
        sums[x].1 += f as i128 * g.1 as i128;
    }
    let nearest = |num: i128, den: i128| (2 * num + den).div_euclid(2 * den);
    let moved = (0..k)
        .map(|x| {
            let mu = pops[x] as i128;
            let (sx, sy) = sums[x];
            let here = lattice.to_grid(centers.centers()[x]);
            let cand = (nearest(sx, mu), nearest(sy, mu));
            // μ² |c - g|² compared exactly.
            let err = |c: (i128, i128)| (mu * c.0 - sx).pow(2) + (mu * c.1 - sy).pow(2);
            let keep = err((here.0 as i128, here.1 as i128)) <= err(cand);
            if keep {
                centers.centers()[x]
            } else {
                lattice.from_grid((cand.0 as i64, cand.1 as i64))
            }
        })
        .collect();
    centers.moved_to(moved)
}

/// Result of one Lloyd run, expressed on the snapped instance.
#[derive(Debug, Clone)]
pub struct LloydRun {
    /// The input snapped to the cost lattice; all outputs refer to it.
    pub instance: Instance,
    pub lattice: CostLattice,
    pub centers: CenterSet,
    pub assignment: BalancedAssignment,
    pub weights: PowerWeights,
    pub potentials: Vec<i64>,
    pub scaled_cost: i64,
    pub threshold: f64,
    pub trace: RunTrace,
}

impl LloydRun {
    pub fn converged(&self) -> bool {
        self.trace.converged
    }

    pub fn iterations(&self) -> usize {
        self.trace.iterations.len()
    }

    pub fn cost(&self) -> f64 {
        self.lattice.unscaled(self.scaled_cost)
    }
}

pub fn run(inst: &Instance, cfg: &LloydConfig, policy: &ScaledCostPolicy) -> Result<LloydRun> {
    cfg.validate()?;
    let lattice = policy.lattice_for(inst)?;
    let snapped = lattice.snap_instance(inst)?;
    let centers = seed_centers(&snapped, inst.k(), cfg.seed)?;
    run_from(&snapped, centers, cfg, &lattice)
}

/// Runs from explicit starting centers. `inst` must already lie on `lattice`;
/// the centers are snapped to it.
pub fn run_from(
    inst: &Instance,
    start: CenterSet,
    cfg: &LloydConfig,
    lattice: &CostLattice,
) -> Result<LloydRun> {
    cfg.validate()?;
    if start.k() != inst.k() {
        return Err(Error::InvalidCenters(format!(
            "{} starting centers for k = {}",
            start.k(),
            inst.k()
        )));
    }
    let threshold = cfg.threshold_for(inst);
    let mut centers = lattice.snap_centers(&start)?;
    let mut trace = RunTrace::new(cfg.seed);
    let mut warm: Option<Vec<i64>> = None;
    let mut iteration = 0;
    loop {
        let outcome = assign_on_lattice(inst, &centers, lattice, warm.as_deref())?;
        let next = lattice_centroid_step(inst, &outcome.assignment, &centers, lattice)?;
        let displacement = centers.max_displacement(&next);
        trace.iterations.push(IterationRecord {
            iteration,
            cost: lattice.unscaled(outcome.scaled_cost),
            scaled_cost: outcome.scaled_cost,
            max_displacement: displacement,
        });
        iteration += 1;
        let done = displacement <= threshold;
        if done || iteration >= cfg.max_iterations {
            trace.converged = done;
            return Ok(LloydRun {
                instance: inst.clone(),
                lattice: *lattice,
                centers,
                assignment: outcome.assignment,
                weights: outcome.weights,
                potentials: outcome.potentials,
                scaled_cost: outcome.scaled_cost,
                threshold,
                trace,
            });
        }
        warm = Some(outcome.potentials);
        centers = next;
    }
}

/// Best of `restarts` runs seeded `seed, seed + 1, ...`, by final scaled
/// cost with ties going to the earliest seed. Runs execute in parallel.
pub fn run_restarts(
    inst: &Instance,
    cfg: &LloydConfig,
    policy: &ScaledCostPolicy,
    restarts: usize,
) -> Result<LloydRun> {
    if restarts == 0 {
        return Err(Error::InvalidInstance("restarts must be at least 1".into()));
    }
    let runs: Vec<Result<LloydRun>> = (0..restarts as u64)
        .into_par_iter()
        .map(|i| {
            let cfg = LloydConfig {
                seed: cfg.seed.wrapping_add(i),
                ..*cfg
            };
            run(inst, &cfg, policy)
        })
        .collect();
    let mut best: Option<LloydRun> = None;
    for r in runs {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.scaled_cost < b.scaled_cost) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one restart"))
}
