//! Minimum-cost balanced assignment through the transshipment solver, with
//! power weights read off the optimal demand-side duals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{solve_mcf_warm, TransshipmentInstance};
use crate::model::{
    squared_distance, BalancedAssignment, Block, CenterSet, Instance, Point2, PowerWeights,
};

pub const DEFAULT_SCALE: f64 = 1e9;
const MAX_SCALE: f64 = 1e14;

/// How real squared distances become integer arc costs.
///
/// Coordinates are measured against the instance's bounding-box diameter;
/// a squared distance spanning the whole box maps to about `scale` cost
/// units. The cost of an arc is `round(d² · cost_scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledCostPolicy {
    pub scale: f64,
}

impl Default for ScaledCostPolicy {
    fn default() -> Self {
        ScaledCostPolicy {
            scale: DEFAULT_SCALE,
        }
    }
}

impl ScaledCostPolicy {
    pub fn new(scale: f64) -> Result<Self> {
        if !(1.0..=MAX_SCALE).contains(&scale) {
            return Err(Error::InvalidInstance(format!(
                "cost scale must lie in [1, {MAX_SCALE:e}], got {scale}"
            )));
        }
        Ok(ScaledCostPolicy { scale })
    }

    /// The integer lattice this policy induces on `inst`.
    ///
    /// The spacing is the largest power of two not exceeding
    /// `diameter / sqrt(scale)`, so on lattice points squared distances
    /// times `cost_scale` are exact integers.
    pub fn lattice_for(&self, inst: &Instance) -> Result<CostLattice> {
        ScaledCostPolicy::new(self.scale)?;
        let (lo, hi) = inst
            .bounding_box()
            .ok_or_else(|| Error::InvalidInstance("instance has no blocks".into()))?;
        let mut diameter = squared_distance(lo, hi).sqrt();
        if diameter == 0.0 {
            diameter = lo.x.abs().max(lo.y.abs()).max(1.0);
        }
        let step = 2f64.powi((diameter / self.scale.sqrt()).log2().floor() as i32);
        let lattice = CostLattice {
            step,
            origin: Point2::new((lo.x / step).floor() * step, (lo.y / step).floor() * step),
        };
        let far = hi - lattice.origin;
        if far.x.max(far.y) / step > (1u64 << 26) as f64 {
            return Err(Error::Overflow(format!(
                "lattice extent {} steps",
                far.x.max(far.y) / step
            )));
        }
        Ok(lattice)
    }
}

/// Square lattice of spacing `step` (a power of two) anchored at `origin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostLattice {
    pub step: f64,
    pub origin: Point2,
}

impl CostLattice {
    /// Cost units per squared planar unit.
    pub fn cost_scale(&self) -> f64 {
        1.0 / (self.step * self.step)
    }

    /// Power-consistency tolerance in squared planar units: two rounding
    /// units of the arc costs.
    pub fn tolerance(&self) -> f64 {
        2.0 * self.step * self.step
    }

    pub fn arc_cost(&self, a: Point2, b: Point2) -> i64 {
        let dx = (a.x - b.x) / self.step;
        let dy = (a.y - b.y) / self.step;
        (dx * dx + dy * dy).round() as i64
    }

    pub fn to_grid(&self, p: Point2) -> (i64, i64) {
        (
            ((p.x - self.origin.x) / self.step).round() as i64,
            ((p.y - self.origin.y) / self.step).round() as i64,
        )
    }

    pub fn from_grid(&self, g: (i64, i64)) -> Point2 {
        Point2::new(
            self.origin.x + g.0 as f64 * self.step,
            self.origin.y + g.1 as f64 * self.step,
        )
    }

    pub fn snap(&self, p: Point2) -> Point2 {
        self.from_grid(self.to_grid(p))
    }

    pub fn snap_instance(&self, inst: &Instance) -> Result<Instance> {
        inst.map_locations(|p| self.snap(p))
    }

    pub fn snap_centers(&self, centers: &CenterSet) -> Result<CenterSet> {
        centers.moved_to(centers.centers().iter().map(|&c| self.snap(c)).collect())
    }

    pub fn unscaled(&self, scaled: i64) -> f64 {
        scaled as f64 * self.step * self.step
    }
}

#[derive(Debug, Clone)]
pub struct AssignmentOutcome {
    pub assignment: BalancedAssignment,
    pub weights: PowerWeights,
    /// Objective in integer cost units.
    pub scaled_cost: i64,
    /// Demand-side duals in integer cost units.
    pub potentials: Vec<i64>,
    pub lattice: CostLattice,
}

pub fn min_cost_balanced_assignment(
    inst: &Instance,
    centers: &CenterSet,
    policy: &ScaledCostPolicy,
) -> Result<AssignmentOutcome> {
    let lattice = policy.lattice_for(inst)?;
    assign_on_lattice(inst, centers, &lattice, None)
}

/// Same as [`min_cost_balanced_assignment`] with an explicit lattice and an
/// optional warm start for the demand potentials.
pub fn assign_on_lattice(
    inst: &Instance,
    centers: &CenterSet,
    lattice: &CostLattice,
    warm: Option<&[i64]>,
) -> Result<AssignmentOutcome> {
    if inst.is_empty() {
        return Err(Error::InvalidInstance("instance has no blocks".into()));
    }
    if centers.total_capacity() != inst.total_population() {
        return Err(Error::Infeasible {
            supply: inst.total_population() as i64,
            demand: centers.total_capacity() as i64,
        });
    }
    let k = centers.k();
    let mut costs = vec![0i64; inst.len() * k];
    costs
        .par_chunks_mut(k)
        .zip(inst.blocks().par_iter())
        .for_each(|(row, block)| {
            for (cost, &c) in row.iter_mut().zip(centers.centers()) {
                *cost = lattice.arc_cost(block.location, c);
            }
        });
    let supplies = inst
        .blocks()
        .iter()
        .map(|b| to_i64(b.population))
        .collect::<Result<Vec<_>>>()?;
    let demands = centers
        .capacities()
        .iter()
        .map(|&c| to_i64(c))
        .collect::<Result<Vec<_>>>()?;
    let problem = TransshipmentInstance::new(supplies, demands, costs)?;
    let solution = solve_mcf_warm(&problem, warm)?;

    let flows = solution
        .flows
        .iter()
        .map(|row| row.iter().map(|&(x, f)| (x, f as u64)).collect())
        .collect();
    let assignment = BalancedAssignment::from_block_flows(flows);
    let weights = PowerWeights::new(
        solution
            .demand_potentials
            .iter()
            .map(|&w| lattice.unscaled(w))
            .collect(),
    )?;
    Ok(AssignmentOutcome {
        assignment,
        weights,
        scaled_cost: solution.objective,
        potentials: solution.demand_potentials,
        lattice: *lattice,
    })
}

fn to_i64(v: u64) -> Result<i64> {
    i64::try_from(v).map_err(|_| Error::Overflow(format!("population {v}")))
}

/// A positive-flow pair whose block lies outside its center's power cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub block: usize,
    pub block_id: String,
    pub center: usize,
    /// Power distance to the assigned center minus the best power distance.
    pub excess: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub violations: Vec<Violation>,
}

impl ConsistencyReport {
    pub fn is_consistent(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every positive-flow pair `(y, x)` with
/// `d²(y, x) - w_x > min_x' [d²(y, x') - w_x'] + tolerance`.
pub fn verify_power_consistency(
    inst: &Instance,
    centers: &CenterSet,
    asg: &BalancedAssignment,
    weights: &PowerWeights,
    tolerance: f64,
) -> ConsistencyReport {
    let power = |b: &Block, x: usize| squared_distance(b.location, centers.centers()[x]) - weights.w[x];
    let k = centers.k().min(weights.len());
    let mut violations = Vec::new();
    for (b, x, _) in asg.iter() {
        let Some(block) = inst.blocks().get(b) else {
            continue;
        };
        if x >= k {
            continue;
        }
        let best = (0..k).map(|x2| power(block, x2)).fold(f64::INFINITY, f64::min);
        let excess = power(block, x) - best;
        if excess > tolerance {
            violations.push(Violation {
                block: b,
                block_id: block.id.clone(),
                center: x,
                excess,
            });
        }
    }
    ConsistencyReport { violations }
}
