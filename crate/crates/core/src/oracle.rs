//! Brute-force references for tests.
//!
//! Nothing here shares code with the solver path: enumeration works directly
//! from the problem definitions and is only usable on tiny inputs.

use crate::error::{Error, Result};
use crate::flow::TransshipmentInstance;
use crate::model::{squared_distance, BalancedAssignment, CenterSet, Instance, Point2};

const MAX_PERSONS: u64 = 10;
const MAX_CENTERS: usize = 3;

/// Minimum-cost balanced assignment by enumerating every person-level
/// assignment that respects the capacities. Costs are unscaled reals.
pub fn brute_force_balanced(
    inst: &Instance,
    centers: &CenterSet,
) -> Result<(BalancedAssignment, f64)> {
    if inst.total_population() > MAX_PERSONS || centers.k() > MAX_CENTERS {
        return Err(Error::TooLarge(format!(
            "{} persons and {} centers exceed {MAX_PERSONS} / {MAX_CENTERS}",
            inst.total_population(),
            centers.k()
        )));
    }
    if centers.total_capacity() != inst.total_population() {
        return Err(Error::Infeasible {
            supply: inst.total_population() as i64,
            demand: centers.total_capacity() as i64,
        });
    }
    // One entry per person: the block it lives in.
    let persons: Vec<usize> = inst
        .blocks()
        .iter()
        .enumerate()
        .flat_map(|(b, block)| std::iter::repeat_n(b, block.population as usize))
        .collect();
    let cost: Vec<Vec<f64>> = persons
        .iter()
        .map(|&b| {
            centers
                .centers()
                .iter()
                .map(|&c| squared_distance(inst.blocks()[b].location, c))
                .collect()
        })
        .collect();

    struct Search<'a> {
        cost: &'a [Vec<f64>],
        remaining: Vec<u64>,
        current: Vec<usize>,
        best: Option<(f64, Vec<usize>)>,
    }
    impl Search<'_> {
        fn go(&mut self, i: usize, partial: f64) {
            if let Some((best, _)) = &self.best {
                if partial >= *best {
                    return;
                }
            }
            if i == self.cost.len() {
                self.best = Some((partial, self.current.clone()));
                return;
            }
            for x in 0..self.remaining.len() {
                if self.remaining[x] == 0 {
                    continue;
                }
                self.remaining[x] -= 1;
                self.current.push(x);
                self.go(i + 1, partial + self.cost[i][x]);
                self.current.pop();
                self.remaining[x] += 1;
            }
        }
    }

    let mut search = Search {
        cost: &cost,
        remaining: centers.capacities().to_vec(),
        current: Vec::with_capacity(persons.len()),
        best: None,
    };
    search.go(0, 0.0);
    let (best, labels) = search
        .best
        .ok_or_else(|| Error::Internal("no balanced assignment exists".into()))?;
    let mut flows = vec![Vec::new(); inst.len()];
    for (&b, &x) in persons.iter().zip(&labels) {
        flows[b].push((x, 1));
    }
    Ok((BalancedAssignment::from_block_flows(flows), best))
}

/// Optimal objective of a small transshipment instance by enumerating every
/// integral flow.
pub fn brute_force_transshipment(inst: &TransshipmentInstance) -> Result<i64> {
    if inst.num_supplies() > 8 || inst.num_demands() > 8 {
        return Err(Error::TooLarge("more than 8 nodes per side".into()));
    }
    fn distribute(
        inst: &TransshipmentInstance,
        y: usize,
        x: usize,
        left: i64,
        remaining: &mut [i64],
        partial: i64,
        best: &mut Option<i64>,
    ) {
        let k = inst.num_demands();
        if y == inst.num_supplies() {
            if remaining.iter().all(|&r| r == 0) {
                *best = Some(best.map_or(partial, |b| b.min(partial)));
            }
            return;
        }
        if x == k - 1 {
            // Last demand node takes whatever is left of this supply.
            if left > remaining[x] {
                return;
            }
            remaining[x] -= left;
            let next = inst.supplies().get(y + 1).copied().unwrap_or(0);
            distribute(inst, y + 1, 0, next, remaining, partial + left * inst.cost(y, x), best);
            remaining[x] += left;
            return;
        }
        for amount in 0..=left.min(remaining[x]) {
            remaining[x] -= amount;
            distribute(inst, y, x + 1, left - amount, remaining, partial + amount * inst.cost(y, x), best);
            remaining[x] += amount;
        }
    }
    let mut remaining = inst.demands().to_vec();
    let mut best = None;
    let first = inst.supplies().first().copied().unwrap_or(0);
    distribute(inst, 0, 0, first, &mut remaining, 0, &mut best);
    best.ok_or_else(|| Error::Internal("no feasible integral flow".into()))
}

/// Weighted mean of the given points.
pub fn naive_centroid(points: &[(Point2, f64)]) -> Result<Point2> {
    let total: f64 = points.iter().map(|(_, w)| w).sum();
    if total <= 0.0 {
        return Err(Error::InvalidAssignment("centroid of zero total weight".into()));
    }
    let sx: f64 = points.iter().map(|(p, w)| p.x * w).sum();
    let sy: f64 = points.iter().map(|(p, w)| p.y * w).sum();
    Ok(Point2::new(sx / total, sy / total))
}

/// Person-level pairwise-swap local search for the balanced assignment
/// step. Starting from `start`, repeatedly exchanges two persons assigned to
/// different centers while that strictly lowers the cost. Used to show the
/// heuristic can stall away from the optimum.
pub fn swap_local_search(
    inst: &Instance,
    centers: &CenterSet,
    start: &BalancedAssignment,
) -> Result<BalancedAssignment> {
    start.validate(inst, centers)?;
    let mut persons: Vec<(usize, usize)> = start
        .iter()
        .flat_map(|(b, x, f)| std::iter::repeat_n((b, x), f as usize))
        .collect();
    let d = |b: usize, x: usize| squared_distance(inst.blocks()[b].location, centers.centers()[x]);
    loop {
        let mut improved = false;
        for i in 0..persons.len() {
            for j in i + 1..persons.len() {
                let (bi, xi) = persons[i];
                let (bj, xj) = persons[j];
                if xi == xj {
                    continue;
                }
                let before = d(bi, xi) + d(bj, xj);
                let after = d(bi, xj) + d(bj, xi);
                if after < before {
                    persons[i].1 = xj;
                    persons[j].1 = xi;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    let mut flows = vec![Vec::new(); inst.len()];
    for (b, x) in persons {
        flows[b].push((x, 1));
    }
    Ok(BalancedAssignment::from_block_flows(flows))
}
