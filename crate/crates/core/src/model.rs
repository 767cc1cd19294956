//! Domain types shared by the engine: weighted blocks, centers with
//! capacities, balanced assignments, power weights and run traces.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the projected plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(&self, other: &Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

pub fn squared_distance(a: Point2, b: Point2) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    dx * dx + dy * dy
}

/// A census block reduced to a weighted point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: String,
    pub location: Point2,
    pub population: u64,
}

impl Block {
    pub fn new(id: impl Into<String>, location: Point2, population: u64) -> Self {
        Block {
            id: id.into(),
            location,
            population,
        }
    }
}

/// A validated set of blocks to be split into `k` districts.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    blocks: Vec<Block>,
    k: usize,
    total_population: u64,
}

impl Instance {
    pub fn new(blocks: Vec<Block>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInstance("k must be at least 1".into()));
        }
        let mut seen = HashSet::with_capacity(blocks.len());
        let mut total: u64 = 0;
        for block in &blocks {
            if !block.location.is_finite() {
                return Err(Error::InvalidInstance(format!(
                    "block {} has a non-finite coordinate",
                    block.id
                )));
            }
            if !seen.insert(block.id.as_str()) {
                return Err(Error::InvalidInstance(format!(
                    "duplicate block id {}",
                    block.id
                )));
            }
            total = total.checked_add(block.population).ok_or_else(|| {
                Error::Overflow("total population does not fit in 64 bits".into())
            })?;
        }
        if total < k as u64 {
            return Err(Error::InvalidInstance(format!(
                "total population {total} is smaller than k = {k}"
            )));
        }
        Ok(Instance {
            blocks,
            k,
            total_population: total,
        })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn total_population(&self) -> u64 {
        self.total_population
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Same blocks, different district count.
    pub fn with_k(&self, k: usize) -> Result<Self> {
        Instance::new(self.blocks.clone(), k)
    }

    /// Replaces every block location through `f`, keeping ids and populations.
    pub fn map_locations(&self, mut f: impl FnMut(Point2) -> Point2) -> Result<Self> {
        let blocks = self
            .blocks
            .iter()
            .map(|b| Block::new(b.id.clone(), f(b.location), b.population))
            .collect();
        Instance::new(blocks, self.k)
    }

    /// Axis-aligned bounding box of all block locations, as (min, max).
    pub fn bounding_box(&self) -> Option<(Point2, Point2)> {
        let mut iter = self.blocks.iter().map(|b| b.location);
        let first = iter.next()?;
        Some(iter.fold((first, first), |(lo, hi), p| {
            (
                Point2::new(lo.x.min(p.x), lo.y.min(p.y)),
                Point2::new(hi.x.max(p.x), hi.y.max(p.y)),
            )
        }))
    }

    pub fn diameter(&self) -> f64 {
        match self.bounding_box() {
            Some((lo, hi)) => squared_distance(lo, hi).sqrt(),
            None => 0.0,
        }
    }
}

/// `k` ordered centers, each with the number of residents it must receive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterSet {
    centers: Vec<Point2>,
    capacities: Vec<u64>,
}

impl CenterSet {
    pub fn new(centers: Vec<Point2>, capacities: Vec<u64>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidCenters("no centers".into()));
        }
        if centers.len() != capacities.len() {
            return Err(Error::InvalidCenters(format!(
                "{} centers but {} capacities",
                centers.len(),
                capacities.len()
            )));
        }
        if let Some(i) = capacities.iter().position(|&c| c == 0) {
            return Err(Error::InvalidCenters(format!("center {i} has zero capacity")));
        }
        if let Some(i) = centers.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidCenters(format!("center {i} is not finite")));
        }
        Ok(CenterSet {
            centers,
            capacities,
        })
    }

    /// Centers with the balanced capacity pattern for `total` residents.
    pub fn balanced(centers: Vec<Point2>, total: u64) -> Result<Self> {
        let capacities = balanced_capacities(total, centers.len())?;
        CenterSet::new(centers, capacities)
    }

    pub fn centers(&self) -> &[Point2] {
        &self.centers
    }

    pub fn capacities(&self) -> &[u64] {
        &self.capacities
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn total_capacity(&self) -> u64 {
        self.capacities.iter().sum()
    }

    /// Same capacities, new locations.
    pub fn moved_to(&self, centers: Vec<Point2>) -> Result<Self> {
        CenterSet::new(centers, self.capacities.clone())
    }

    /// Largest Euclidean distance between corresponding centers.
    pub fn max_displacement(&self, other: &CenterSet) -> f64 {
        self.centers
            .iter()
            .zip(&other.centers)
            .map(|(a, b)| squared_distance(*a, *b).sqrt())
            .fold(0.0, f64::max)
    }
}

/// `⌊m/k⌋` for the first `i` centers and `⌈m/k⌉` for the rest, summing to `m`.
pub fn balanced_capacities(m: u64, k: usize) -> Result<Vec<u64>> {
    if k == 0 {
        return Err(Error::InvalidCenters("k must be at least 1".into()));
    }
    let k64 = k as u64;
    if m < k64 {
        return Err(Error::InvalidInstance(format!(
            "population {m} is smaller than k = {k}; some district would be empty"
        )));
    }
    let low = m / k64;
    let high_count = (m % k64) as usize;
    let low_count = k - high_count;
    let mut caps = vec![low; low_count];
    caps.extend(std::iter::repeat_n(low + 1, high_count));
    Ok(caps)
}

/// Integral distribution of each block's residents over the centers.
///
/// Flows are stored per block (indexed like `Instance::blocks`) as a short
/// list of `(center, persons)` pairs sorted by center with positive counts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BalancedAssignment {
    flows: Vec<Vec<(usize, u64)>>,
}

impl BalancedAssignment {
    pub fn from_block_flows(mut flows: Vec<Vec<(usize, u64)>>) -> Self {
        for row in &mut flows {
            row.retain(|&(_, f)| f > 0);
            row.sort_unstable_by_key(|&(c, _)| c);
            row.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
        }
        BalancedAssignment { flows }
    }

    /// Every block wholly assigned to the listed center.
    pub fn from_labels(inst: &Instance, labels: &[usize]) -> Self {
        let flows = inst
            .blocks()
            .iter()
            .zip(labels)
            .map(|(b, &c)| vec![(c, b.population)])
            .collect();
        BalancedAssignment::from_block_flows(flows)
    }

    pub fn num_blocks(&self) -> usize {
        self.flows.len()
    }

    pub fn block_flows(&self, block: usize) -> &[(usize, u64)] {
        &self.flows[block]
    }

    pub fn flow(&self, block: usize, center: usize) -> u64 {
        self.flows[block]
            .iter()
            .find(|&&(c, _)| c == center)
            .map_or(0, |&(_, f)| f)
    }

    /// All positive flows as `(block, center, persons)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.flows
            .iter()
            .enumerate()
            .flat_map(|(b, row)| row.iter().map(move |&(c, f)| (b, c, f)))
    }

    pub fn center_populations(&self, k: usize) -> Vec<u64> {
        let mut pops = vec![0u64; k];
        for (_, c, f) in self.iter() {
            if c < k {
                pops[c] += f;
            }
        }
        pops
    }

    /// Blocks whose residents are divided between two or more centers.
    pub fn split_blocks(&self) -> Vec<usize> {
        self.flows
            .iter()
            .enumerate()
            .filter(|(_, row)| row.len() > 1)
            .map(|(b, _)| b)
            .collect()
    }

    /// Checks conservation per block and exact totals per center.
    pub fn validate(&self, inst: &Instance, centers: &CenterSet) -> Result<()> {
        if self.flows.len() != inst.len() {
            return Err(Error::InvalidAssignment(format!(
                "assignment covers {} blocks, instance has {}",
                self.flows.len(),
                inst.len()
            )));
        }
        let k = centers.k();
        for (b, (row, block)) in self.flows.iter().zip(inst.blocks()).enumerate() {
            if let Some(&(c, _)) = row.iter().find(|&&(c, _)| c >= k) {
                return Err(Error::InvalidAssignment(format!(
                    "block {} assigned to nonexistent center {c}",
                    inst.blocks()[b].id
                )));
            }
            let total: u64 = row.iter().map(|&(_, f)| f).sum();
            if total != block.population {
                return Err(Error::InvalidAssignment(format!(
                    "block {} has population {} but {} persons assigned",
                    block.id, block.population, total
                )));
            }
        }
        let pops = self.center_populations(k);
        for (x, (&got, &want)) in pops.iter().zip(centers.capacities()).enumerate() {
            if got != want {
                return Err(Error::InvalidAssignment(format!(
                    "center {x} receives {got} persons, capacity is {want}"
                )));
            }
        }
        Ok(())
    }
}

/// Σ flow · d²(block, center) for a balanced assignment.
pub fn assignment_cost(
    inst: &Instance,
    centers: &CenterSet,
    asg: &BalancedAssignment,
) -> Result<f64> {
    asg.validate(inst, centers)?;
    Ok(unchecked_cost(inst, centers.centers(), asg))
}

pub(crate) fn unchecked_cost(inst: &Instance, centers: &[Point2], asg: &BalancedAssignment) -> f64 {
    asg.iter()
        .map(|(b, c, f)| f as f64 * squared_distance(inst.blocks()[b].location, centers[c]))
        .sum()
}

/// One weight per center; the power distance is `d²(p, x) - w_x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerWeights {
    pub w: Vec<f64>,
}

impl PowerWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(i) = w.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidCenters(format!("weight {i} is not finite")));
        }
        Ok(PowerWeights { w })
    }

    pub fn zeros(k: usize) -> Self {
        PowerWeights { w: vec![0.0; k] }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Assignment cost in original squared units.
    pub cost: f64,
    /// The same cost in exact scaled integers.
    pub scaled_cost: i64,
    pub max_displacement: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunTrace {
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    pub seed: u64,
}

impl RunTrace {
    pub fn new(seed: u64) -> Self {
        RunTrace {
            iterations: Vec::new(),
            converged: false,
            seed,
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.iterations
            .windows(2)
            .all(|w| w[1].scaled_cost <= w[0].scaled_cost)
    }

    pub fn final_scaled_cost(&self) -> Option<i64> {
        self.iterations.last().map(|r| r.scaled_cost)
    }
}
