//! Exact minimum-cost flow for dense bipartite transshipment.
//!
//! Every supply node is connected to every demand node. The solver is a
//! primal-dual successive-shortest-path method that works on the demand side
//! only: supply nodes always sit at their cheapest reduced-cost demand, so
//! residual paths reduce to walks between demand nodes, each hop carried by
//! one supply node. Hop lengths come from per-pair heaps keyed by
//! `cost(y, x') - cost(y, x)`, which do not depend on the potentials.
//!
//! Dual convention: `z_y <= cost(y, x) - w_x` for every arc, with equality on
//! every arc carrying flow.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransshipmentInstance {
    supplies: Vec<i64>,
    demands: Vec<i64>,
    /// Row-major `supplies.len() x demands.len()`.
    costs: Vec<i64>,
}

impl TransshipmentInstance {
    pub fn new(supplies: Vec<i64>, demands: Vec<i64>, costs: Vec<i64>) -> Result<Self> {
        if demands.is_empty() {
            return Err(Error::InvalidInstance("no demand nodes".into()));
        }
        if costs.len() != supplies.len() * demands.len() {
            return Err(Error::InvalidInstance(format!(
                "cost matrix has {} entries, expected {} x {}",
                costs.len(),
                supplies.len(),
                demands.len()
            )));
        }
        if supplies.iter().chain(&demands).any(|&v| v < 0) {
            return Err(Error::InvalidInstance(
                "supplies and demands must be nonnegative".into(),
            ));
        }
        let supply = supplies
            .iter()
            .try_fold(0i64, |acc, &s| acc.checked_add(s))
            .ok_or_else(|| Error::Overflow("total supply".into()))?;
        let demand = demands
            .iter()
            .try_fold(0i64, |acc, &d| acc.checked_add(d))
            .ok_or_else(|| Error::Overflow("total demand".into()))?;
        if supply != demand {
            return Err(Error::Infeasible { supply, demand });
        }
        let max_cost = costs.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0) as i128;
        // Objective and potentials must stay well inside i64.
        let k = demands.len() as i128;
        let limit = (i64::MAX / 4) as i128;
        if max_cost * supply as i128 > limit || max_cost * 4 * (k + 1) > limit {
            return Err(Error::Overflow(format!(
                "max arc cost {max_cost} with total supply {supply}"
            )));
        }
        Ok(TransshipmentInstance {
            supplies,
            demands,
            costs,
        })
    }

    pub fn num_supplies(&self) -> usize {
        self.supplies.len()
    }

    pub fn num_demands(&self) -> usize {
        self.demands.len()
    }

    pub fn supplies(&self) -> &[i64] {
        &self.supplies
    }

    pub fn demands(&self) -> &[i64] {
        &self.demands
    }

    #[inline]
    pub fn cost(&self, supply: usize, demand: usize) -> i64 {
        self.costs[supply * self.demands.len() + demand]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowSolution {
    /// Per supply node, `(demand, amount)` pairs with positive amount, sorted.
    pub flows: Vec<Vec<(usize, i64)>>,
    pub supply_potentials: Vec<i64>,
    pub demand_potentials: Vec<i64>,
    pub objective: i64,
}

impl FlowSolution {
    pub fn flow(&self, supply: usize, demand: usize) -> i64 {
        self.flows[supply]
            .iter()
            .find(|&&(d, _)| d == demand)
            .map_or(0, |&(_, f)| f)
    }

    /// Exact optimality certificate: conservation, objective, dual
    /// feasibility and complementary slackness.
    pub fn certify(&self, inst: &TransshipmentInstance) -> std::result::Result<(), String> {
        let n = inst.num_supplies();
        let k = inst.num_demands();
        if self.flows.len() != n || self.supply_potentials.len() != n {
            return Err("solution size does not match instance".into());
        }
        if self.demand_potentials.len() != k {
            return Err("demand potential count does not match instance".into());
        }
        let mut inflow = vec![0i64; k];
        let mut objective: i128 = 0;
        for (y, row) in self.flows.iter().enumerate() {
            let mut out = 0;
            for &(x, f) in row {
                if f <= 0 {
                    return Err(format!("nonpositive stored flow on ({y}, {x})"));
                }
                out += f;
                inflow[x] += f;
                objective += f as i128 * inst.cost(y, x) as i128;
            }
            if out != inst.supplies[y] {
                return Err(format!("supply node {y} ships {out}, supply {}", inst.supplies[y]));
            }
        }
        if inflow != inst.demands {
            return Err("demand totals not met".into());
        }
        if objective != self.objective as i128 {
            return Err(format!("objective {} != recomputed {objective}", self.objective));
        }
        for y in 0..n {
            let z = self.supply_potentials[y];
            for x in 0..k {
                let reduced = inst.cost(y, x) - self.demand_potentials[x] - z;
                if reduced < 0 {
                    return Err(format!("dual infeasible on ({y}, {x}): reduced cost {reduced}"));
                }
                if reduced != 0 && self.flow(y, x) > 0 {
                    return Err(format!("slackness fails on ({y}, {x}): reduced cost {reduced}"));
                }
            }
        }
        Ok(())
    }
}

pub fn solve_mcf(inst: &TransshipmentInstance) -> Result<FlowSolution> {
    solve_mcf_warm(inst, None)
}

/// Solves starting from the given demand potentials. Any vector is a valid
/// start; one close to the optimum (e.g. from a neighbouring instance) cuts
/// the number of augmentations.
pub fn solve_mcf_warm(
    inst: &TransshipmentInstance,
    demand_potentials: Option<&[i64]>,
) -> Result<FlowSolution> {
    let k = inst.num_demands();
    let mut w = match demand_potentials {
        Some(p) if p.len() == k => p.to_vec(),
        Some(p) => {
            return Err(Error::InvalidInstance(format!(
                "{} warm-start potentials for {k} demand nodes",
                p.len()
            )))
        }
        None => vec![0; k],
    };
    // Keep the warm start in a range the overflow check covers.
    if let Some(&lo) = w.iter().min() {
        w.iter_mut().for_each(|v| *v -= lo);
    }
    let bound = (i64::MAX / 4) / (4 * (k as i64 + 1));
    if w.iter().any(|&v| v > bound) {
        w = vec![0; k];
    }

    let mut state = Solver::new(inst, w);
    state.run()?;
    state.into_solution()
}

struct Solver<'a> {
    inst: &'a TransshipmentInstance,
    k: usize,
    w: Vec<i64>,
    flows: Vec<Vec<(usize, i64)>>,
    inflow: Vec<i64>,
    /// `heaps[x * k + x2]`: supply nodes with flow on `x`, keyed by
    /// `cost(y, x2) - cost(y, x)`. Stale entries are dropped lazily.
    heaps: Vec<BinaryHeap<Reverse<(i64, usize)>>>,
}

impl<'a> Solver<'a> {
    fn new(inst: &'a TransshipmentInstance, w: Vec<i64>) -> Self {
        let k = inst.num_demands();
        let n = inst.num_supplies();
        let mut flows = vec![Vec::new(); n];
        let mut inflow = vec![0i64; k];
        let mut buckets: Vec<Vec<Reverse<(i64, usize)>>> = vec![Vec::new(); k * k];
        for y in 0..n {
            let s = inst.supplies[y];
            if s == 0 {
                continue;
            }
            let x = (0..k)
                .min_by_key(|&x| inst.cost(y, x) - w[x])
                .expect("at least one demand node");
            flows[y].push((x, s));
            inflow[x] += s;
            let base = inst.cost(y, x);
            for x2 in (0..k).filter(|&x2| x2 != x) {
                buckets[x * k + x2].push(Reverse((inst.cost(y, x2) - base, y)));
            }
        }
        let heaps = buckets.into_iter().map(BinaryHeap::from).collect();
        Solver {
            inst,
            k,
            w,
            flows,
            inflow,
            heaps,
        }
    }

    fn flow(&self, y: usize, x: usize) -> i64 {
        self.flows[y]
            .iter()
            .find(|&&(d, _)| d == x)
            .map_or(0, |&(_, f)| f)
    }

    /// Cheapest valid hop `x -> x2`: (delta, supply node).
    fn best_hop(&mut self, x: usize, x2: usize) -> Option<(i64, usize)> {
        let idx = x * self.k + x2;
        while let Some(&Reverse((delta, y))) = self.heaps[idx].peek() {
            if self.flow(y, x) > 0 {
                return Some((delta, y));
            }
            self.heaps[idx].pop();
        }
        None
    }

    fn excess(&self, x: usize) -> i64 {
        self.inflow[x] - self.inst.demands[x]
    }

    fn run(&mut self) -> Result<()> {
        let k = self.k;
        let mut dist = vec![i64::MAX; k];
        let mut done = vec![false; k];
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; k];
        loop {
            if (0..k).all(|x| self.excess(x) == 0) {
                return Ok(());
            }
            for x in 0..k {
                dist[x] = if self.excess(x) > 0 { 0 } else { i64::MAX };
                done[x] = false;
                prev[x] = None;
            }
            // Dense Dijkstra over the demand nodes.
            let target = loop {
                let next = (0..k)
                    .filter(|&x| !done[x] && dist[x] != i64::MAX)
                    .min_by_key(|&x| dist[x]);
                let Some(x) = next else {
                    return Err(Error::Internal(
                        "no residual path from an over-full demand node".into(),
                    ));
                };
                done[x] = true;
                if self.excess(x) < 0 {
                    break x;
                }
                for x2 in 0..k {
                    if done[x2] || x2 == x {
                        continue;
                    }
                    if let Some((delta, y)) = self.best_hop(x, x2) {
                        let len = delta + self.w[x] - self.w[x2];
                        debug_assert!(len >= 0, "negative reduced hop {len}");
                        let nd = dist[x] + len;
                        if nd < dist[x2] {
                            dist[x2] = nd;
                            prev[x2] = Some((x, y));
                        }
                    }
                }
            };
            let reach = dist[target];
            for x in 0..k {
                self.w[x] += if done[x] { dist[x].min(reach) } else { reach };
            }

            let mut path = Vec::new();
            let mut x = target;
            while let Some((from, y)) = prev[x] {
                path.push((from, x, y));
                x = from;
            }
            let source = x;
            let mut amount = self.excess(source).min(-self.excess(target));
            for &(from, _, y) in &path {
                amount = amount.min(self.flow(y, from));
            }
            debug_assert!(amount > 0);
            for &(from, to, y) in path.iter().rev() {
                self.shift(y, from, to, amount);
            }
            self.inflow[source] -= amount;
            self.inflow[target] += amount;
        }
    }

    fn shift(&mut self, y: usize, from: usize, to: usize, amount: i64) {
        let row = &mut self.flows[y];
        let i = row.iter().position(|&(d, _)| d == from).expect("flow on hop");
        row[i].1 -= amount;
        if row[i].1 == 0 {
            row.swap_remove(i);
        }
        match row.iter_mut().find(|(d, _)| *d == to) {
            Some(entry) => entry.1 += amount,
            None => {
                row.push((to, amount));
                let base = self.inst.cost(y, to);
                for x2 in (0..self.k).filter(|&x2| x2 != to) {
                    self.heaps[to * self.k + x2]
                        .push(Reverse((self.inst.cost(y, x2) - base, y)));
                }
            }
        }
    }

    fn into_solution(self) -> Result<FlowSolution> {
        let inst = self.inst;
        let k = self.k;
        let mut w = self.w;
        if let Some(&lo) = w.iter().min() {
            w.iter_mut().for_each(|v| *v -= lo);
        }
        let z: Vec<i64> = (0..inst.num_supplies())
            .map(|y| (0..k).map(|x| inst.cost(y, x) - w[x]).min().unwrap())
            .collect();
        let mut flows = self.flows;
        let mut objective: i128 = 0;
        for (y, row) in flows.iter_mut().enumerate() {
            row.sort_unstable_by_key(|&(d, _)| d);
            for &(x, f) in row.iter() {
                objective += f as i128 * inst.cost(y, x) as i128;
            }
        }
        let objective = i64::try_from(objective)
            .map_err(|_| Error::Overflow("objective exceeds 64 bits".into()))?;
        Ok(FlowSolution {
            flows,
            supply_potentials: z,
            demand_potentials: w,
            objective,
        })
    }
}
