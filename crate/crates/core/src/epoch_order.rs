//! Epoch visiting order as an open-path TSP over the reuse graph.
//!
//! [`pso_order`] is a swap-sequence particle swarm: a particle's position is a
//! permutation and its velocity is a list of transpositions. Each iteration a
//! particle walks toward its personal best (each mismatched slot fixed with
//! probability `p_personal`) and then toward the global best (`p_global`),
//! then takes one random segment reversal. A particle that lands on the
//! global best is reshuffled. Every improved personal best is pushed to a
//! local optimum by [`descend`] before it is stored.

use crate::error::{Error, Result};
use crate::reuse_graph::ReuseGraph;
use crate::rng::SplitMix64;

/// Exhaustive search refuses graphs larger than this.
pub const MAX_EXACT_EPOCHS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochOrder {
    pub order: Vec<usize>,
    pub cost: u64,
}

impl EpochOrder {
    pub fn identity(graph: &ReuseGraph) -> Self {
        let order: Vec<usize> = (0..graph.num_epochs).collect();
        let cost = raw_cost(graph, &order);
        Self { order, cost }
    }

    /// `order: i0 i1 ...` and `cost: c` lines.
    pub fn to_text(&self) -> String {
        let ids: Vec<String> = self.order.iter().map(usize::to_string).collect();
        format!("order: {}\ncost: {}\n", ids.join(" "), self.cost)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut order = None;
        let mut cost = None;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix("order:") {
                order = Some(
                    rest.split_whitespace()
                        .map(str::parse)
                        .collect::<std::result::Result<Vec<usize>, _>>()
                        .map_err(|_| Error::parse(i + 1, "bad epoch index"))?,
                );
            } else if let Some(rest) = line.strip_prefix("cost:") {
                cost = Some(
                    rest.trim()
                        .parse()
                        .map_err(|_| Error::parse(i + 1, "bad cost"))?,
                );
            }
        }
        match (order, cost) {
            (Some(order), Some(cost)) => {
                check_permutation(&order, order.len())?;
                Ok(Self { order, cost })
            }
            _ => Err(Error::parse(0, "missing `order:` or `cost:` line")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsoParams {
    pub swarm_size: usize,
    pub max_iters: usize,
    pub p_personal: f64,
    pub p_global: f64,
    pub stagnation_limit: usize,
    pub seed: u64,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self {
            swarm_size: 32,
            max_iters: 500,
            p_personal: 0.5,
            p_global: 0.5,
            stagnation_limit: 100,
            seed: 0,
        }
    }
}

impl PsoParams {
    pub fn validate(&self) -> Result<()> {
        if self.swarm_size == 0 || self.max_iters == 0 || self.stagnation_limit == 0 {
            return Err(Error::Config("PSO counts must be >= 1".into()));
        }
        for (name, p) in [("p_personal", self.p_personal), ("p_global", self.p_global)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is not in [0, 1]")));
            }
        }
        Ok(())
    }
}

fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(Error::Validation(format!(
            "order has {} entries, expected {n}",
            order.len()
        )));
    }
    let mut seen = vec![false; n];
    for &v in order {
        match seen.get_mut(v) {
            Some(slot) if !*slot => *slot = true,
            _ => return Err(Error::Validation(format!("{order:?} is not a permutation"))),
        }
    }
    Ok(())
}

#[inline]
fn raw_cost(graph: &ReuseGraph, order: &[usize]) -> u64 {
    order.windows(2).map(|w| graph.weight(w[0], w[1])).sum()
}

/// Sum of consecutive edge weights; no return edge.
pub fn path_cost(graph: &ReuseGraph, order: &[usize]) -> Result<u64> {
    check_permutation(order, graph.num_epochs)?;
    Ok(raw_cost(graph, order))
}

/// Lexicographic successor in place; false once the last permutation is reached.
fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Global optimum by enumeration in lexicographic order; the first minimum
/// found is kept, so ties resolve to the lexicographically smallest order.
pub fn brute_force_order(graph: &ReuseGraph) -> Result<EpochOrder> {
    let n = graph.num_epochs;
    if n > MAX_EXACT_EPOCHS {
        return Err(Error::Capability(format!(
            "exhaustive ordering supports at most {MAX_EXACT_EPOCHS} epochs, got {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = EpochOrder {
        cost: raw_cost(graph, &perm),
        order: perm.clone(),
    };
    while next_permutation(&mut perm) {
        let c = raw_cost(graph, &perm);
        if c < best.cost {
            best.cost = c;
            best.order.copy_from_slice(&perm);
        }
    }
    Ok(best)
}

/// Result of a PSO run plus the global-best cost after every iteration.
#[derive(Debug, Clone)]
pub struct PsoRun {
    pub best: EpochOrder,
    pub history: Vec<u64>,
    pub iterations: usize,
}

/// Fix `pos[slot]` to `target[slot]` with one transposition.
#[inline]
fn swap_toward(pos: &mut [usize], where_is: &mut [usize], target: &[usize], slot: usize) {
    let want = target[slot];
    if pos[slot] == want {
        return;
    }
    let other = where_is[want];
    let displaced = pos[slot];
    pos.swap(slot, other);
    where_is[want] = slot;
    where_is[displaced] = other;
}

/// First-improvement descent over transpositions, segment reversals and
/// single-element moves; returns the local optimum's cost.
fn descend(graph: &ReuseGraph, order: &mut [usize], mut cost: u64) -> u64 {
    let n = order.len();
    let mut trial = order.to_vec();
    loop {
        let mut better = false;
        'scan: for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                for kind in 0..3 {
                    trial.copy_from_slice(order);
                    match kind {
                        0 if a < b => trial.swap(a, b),
                        1 if a < b => trial[a..=b].reverse(),
                        2 => {
                            let v = trial.remove(a);
                            trial.insert(b, v);
                        }
                        _ => continue,
                    }
                    let c = raw_cost(graph, &trial);
                    if c < cost {
                        cost = c;
                        order.copy_from_slice(&trial);
                        better = true;
                        break 'scan;
                    }
                }
            }
        }
        if !better {
            return cost;
        }
    }
}

pub fn pso_order(graph: &ReuseGraph, params: &PsoParams) -> Result<EpochOrder> {
    Ok(pso_order_traced(graph, params)?.best)
}

pub fn pso_order_traced(graph: &ReuseGraph, params: &PsoParams) -> Result<PsoRun> {
    params.validate()?;
    let n = graph.num_epochs;
    if n == 0 {
        return Err(Error::Validation("graph has no epochs".into()));
    }
    let mut rng = SplitMix64::new(params.seed);

    let mut positions: Vec<Vec<usize>> = (0..params.swarm_size)
        .map(|i| {
            let mut p: Vec<usize> = (0..n).collect();
            if i > 0 {
                rng.shuffle(&mut p);
            }
            p
        })
        .collect();
    let mut pbest = positions.clone();
    let mut pbest_cost: Vec<u64> = positions.iter().map(|p| raw_cost(graph, p)).collect();

    let mut gbest_idx = 0;
    for i in 1..params.swarm_size {
        if pbest_cost[i] < pbest_cost[gbest_idx] {
            gbest_idx = i;
        }
    }
    let mut gbest = pbest[gbest_idx].clone();
    let mut gbest_cost = pbest_cost[gbest_idx];

    let mut history = Vec::new();
    let mut stagnant = 0;
    let mut iterations = 0;
    let mut where_is = vec![0usize; n];

    if n > 1 {
        while iterations < params.max_iters && stagnant < params.stagnation_limit {
            iterations += 1;
            for i in 0..params.swarm_size {
                let pos = &mut positions[i];
                for (slot, &v) in pos.iter().enumerate() {
                    where_is[v] = slot;
                }
                for slot in 0..n {
                    if rng.next_f64() < params.p_personal {
                        swap_toward(pos, &mut where_is, &pbest[i], slot);
                    }
                }
                for slot in 0..n {
                    if rng.next_f64() < params.p_global {
                        swap_toward(pos, &mut where_is, &gbest, slot);
                    }
                }
                // A particle sitting on the global best restarts elsewhere;
                // any other takes one random segment reversal.
                if pos[..] == gbest[..] {
                    rng.shuffle(pos);
                } else {
                    let a = rng.below(n as u64) as usize;
                    let b = (a + 1 + rng.below(n as u64 - 1) as usize) % n;
                    let (a, b) = (a.min(b), a.max(b));
                    pos[a..=b].reverse();
                }
                let c = raw_cost(graph, pos);
                if c < pbest_cost[i] {
                    pbest[i].copy_from_slice(pos);
                    pbest_cost[i] = descend(graph, &mut pbest[i], c);
                }
            }

            // Sequential best selection; earlier particles win ties.
            let mut improved = false;
            for i in 0..params.swarm_size {
                if pbest_cost[i] < gbest_cost {
                    gbest_cost = pbest_cost[i];
                    gbest.copy_from_slice(&pbest[i]);
                    improved = true;
                }
            }
            history.push(gbest_cost);
            stagnant = if improved { 0 } else { stagnant + 1 };
        }
    }

    let mut best = gbest;
    for (p, &c) in pbest.iter().zip(&pbest_cost) {
        if c == gbest_cost && *p < best {
            best.clone_from(p);
        }
    }
    Ok(PsoRun {
        best: EpochOrder {
            order: best,
            cost: gbest_cost,
        },
        history,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_graph() -> ReuseGraph {
        ReuseGraph::from_matrix(vec![vec![0, 2, 5], vec![1, 0, 3], vec![4, 2, 0]]).unwrap()
    }

    fn uniform(n: usize, w: u64) -> ReuseGraph {
        ReuseGraph::from_matrix(
            (0..n)
                .map(|u| (0..n).map(|v| if u == v { 0 } else { w }).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn path_cost_examples() {
        let g = sample_graph();
        assert_eq!(path_cost(&g, &[1, 2, 0]).unwrap(), 7);
        assert_eq!(path_cost(&uniform(1, 0), &[0]).unwrap(), 0);
        let u = uniform(5, 3);
        assert_eq!(path_cost(&u, &[4, 2, 0, 1, 3]).unwrap(), 12);
    }

    #[test]
    fn path_cost_rejects_non_permutations() {
        let g = sample_graph();
        assert!(matches!(path_cost(&g, &[0, 0, 1]), Err(Error::Validation(_))));
        assert!(path_cost(&g, &[0, 1]).is_err());
        assert!(path_cost(&g, &[0, 1, 3]).is_err());
    }

    #[test]
    fn brute_force_examples() {
        // All six orders by hand: 012=5 021=7 102=6 120=7 201=6 210=3.
        let best = brute_force_order(&sample_graph()).unwrap();
        assert_eq!(best.order, vec![2, 1, 0]);
        assert_eq!(best.cost, 3);

        let two = ReuseGraph::from_matrix(vec![vec![0, 9], vec![4, 0]]).unwrap();
        assert_eq!(brute_force_order(&two).unwrap().order, vec![1, 0]);

        let u = brute_force_order(&uniform(4, 2)).unwrap();
        assert_eq!(u.order, vec![0, 1, 2, 3]);
        assert_eq!(u.cost, 6);
    }

    #[test]
    fn brute_force_guard() {
        let g = uniform(MAX_EXACT_EPOCHS + 1, 1);
        assert!(matches!(brute_force_order(&g), Err(Error::Capability(_))));
    }

    #[test]
    fn pso_trivial_cases() {
        let one = pso_order(&uniform(1, 0), &PsoParams::default()).unwrap();
        assert_eq!(one, EpochOrder { order: vec![0], cost: 0 });
        let u = pso_order(&uniform(6, 4), &PsoParams::default()).unwrap();
        assert_eq!(u.cost, 20);
        assert_eq!(u.order, (0..6).collect::<Vec<_>>());
        assert_eq!(pso_order(&sample_graph(), &PsoParams::default()).unwrap().cost, 3);
    }

    #[test]
    fn pso_history_is_non_increasing() {
        let mut rng = SplitMix64::new(11);
        let rows = (0..9)
            .map(|u| (0..9).map(|v| if u == v { 0 } else { rng.below(50) }).collect())
            .collect();
        let g = ReuseGraph::from_matrix(rows).unwrap();
        let run = pso_order_traced(&g, &PsoParams::default()).unwrap();
        assert!(run.history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(path_cost(&g, &run.best.order).unwrap(), run.best.cost);
        assert!(run.best.cost <= EpochOrder::identity(&g).cost);
    }

    #[test]
    fn pso_rejects_bad_params() {
        let p = PsoParams {
            p_global: 1.5,
            ..PsoParams::default()
        };
        assert!(pso_order(&sample_graph(), &p).is_err());
        let p = PsoParams {
            swarm_size: 0,
            ..PsoParams::default()
        };
        assert!(pso_order(&sample_graph(), &p).is_err());
    }

    #[test]
    fn order_text_round_trip() {
        let o = EpochOrder {
            order: vec![2, 0, 1],
            cost: 17,
        };
        assert_eq!(o.to_text(), "order: 2 0 1\ncost: 17\n");
        assert_eq!(EpochOrder::from_text(&o.to_text()).unwrap(), o);
        assert!(EpochOrder::from_text("order: 0 0\ncost: 1\n").is_err());
    }
}
