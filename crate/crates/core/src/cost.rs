//! Expected cost of searching a random tree until a node at the target level
//! is found: exact downward recursions for the conditional costs and an
//! independent Monte Carlo simulator of the search protocol.
//!
//! Protocol: entering a node costs 1; discovering the children of a node
//! below the target level costs `price` per child; a node at the target
//! level ends the search. Children are tried in uniformly random order,
//! backtracking is free, and an exhausted unsuccessful tree triggers a
//! restart on a fresh tree with its cost kept on the bill.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::offspring::OffspringSchedule;
use crate::survival::SurvivalTable;

/// Default cap on simulator restarts before giving up.
pub const DEFAULT_RESTART_CAP: u64 = 10_000_000;

/// Exact expected search costs: `d[l]` conditioned on reaching the target
/// level from level l, `e[l]` conditioned on not reaching it (full
/// exploration), and the total `c` including restarts.
#[derive(Debug, Clone)]
pub struct CostTable {
    k: usize,
    price: f64,
    d: Vec<f64>,
    e: Vec<f64>,
    /// Levels where extinction is impossible: `e` is stored as 0 there and
    /// never enters any used term.
    e_unused: Vec<usize>,
    c: f64,
    /// Survival probabilities p[0..=k] the table was built from.
    p: Vec<f64>,
}

impl CostTable {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Price per discovered child.
    pub fn price(&self) -> f64 {
        self.price
    }

    /// Expected cost to reach the target level from level l, conditioned on
    /// the subtree reaching it; `d(k) = 1`.
    pub fn d(&self, l: usize) -> f64 {
        self.d[l]
    }

    pub fn d_slice(&self) -> &[f64] {
        &self.d
    }

    /// Expected cost of fully exploring a subtree at level l conditioned on
    /// not reaching the target level; `e(k-1) = 1`. Stored as 0 and listed
    /// in [`CostTable::e_unused_levels`] when extinction is impossible.
    pub fn e(&self, l: usize) -> f64 {
        self.e[l]
    }

    pub fn e_slice(&self) -> &[f64] {
        &self.e
    }

    pub fn e_unused_levels(&self) -> &[usize] {
        &self.e_unused
    }

    /// Total expected cost including restarts.
    pub fn total(&self) -> f64 {
        self.c
    }

    pub fn survival(&self, l: usize) -> f64 {
        self.p[l]
    }

    pub fn survival_slice(&self) -> &[f64] {
        &self.p
    }
}

/// Builds the cost table by the downward recursions
///   e[l] = 1 + (price + e[l+1]) E[W | X = 0]
///   d[l] = 1 + d[l+1] + price E[W | X >= 1] + e[l+1] E[(W-X)/(1+X) | X >= 1]
/// with d[k] = 1, e[k-1] = 1, and total (1/p[0] - 1) e[0] + d[0].
pub fn build_cost_table(sched: &OffspringSchedule, k: usize, price: f64) -> Result<CostTable> {
    if !(price >= 0.0) {
        return Err(Error::Domain(format!(
            "inspection price must be nonnegative, got {price}"
        )));
    }
    let table = SurvivalTable::build(sched, k)?;
    build_cost_from_parts(
        k,
        price,
        table.p_slice().to_vec(),
        |l| table.p_extinct(l),
        |l| table.mean_children_given_extinct(l),
        |l| table.mean_children_given_survive(l),
        |l| table.mean_deadend_ratio(l),
    )
}

/// Shared recursion core, parameterized over the conditional moments so the
/// generic (enumerated) path and the Poisson closed-form path build the same
/// table type.
pub(crate) fn build_cost_from_parts(
    k: usize,
    price: f64,
    p: Vec<f64>,
    p_extinct: impl Fn(usize) -> f64,
    mean_extinct: impl Fn(usize) -> Result<f64>,
    mean_survive: impl Fn(usize) -> Result<f64>,
    deadend_ratio: impl Fn(usize) -> Result<f64>,
) -> Result<CostTable> {
    if p[0] <= 0.0 {
        return Err(Error::ImpossibleSearch(format!(
            "the target level {k} is unreachable: p[0] = {}",
            p[0]
        )));
    }
    let mut e = vec![0.0; k];
    let mut e_unused = Vec::new();
    if k >= 1 {
        e[k - 1] = 1.0;
    }
    for l in (0..k.saturating_sub(1)).rev() {
        if p_extinct(l) == 0.0 {
            // Extinction from this level is impossible; the value can never
            // be used because every coefficient that would multiply it is an
            // exact zero.
            e[l] = 0.0;
            e_unused.push(l);
            continue;
        }
        let m0 = mean_extinct(l)?;
        let e_next = if m0 > 0.0 { e[l + 1] } else { 0.0 };
        e[l] = 1.0 + (price + e_next) * m0;
    }
    e_unused.reverse();

    let mut d = vec![0.0; k + 1];
    d[k] = 1.0;
    // The d recursion is a running sum of per-level increments; accumulate
    // with compensation since tiny-mean schedules span many magnitudes.
    let mut comp = 0.0;
    for l in (0..k).rev() {
        let m1 = mean_survive(l)?;
        let ratio = deadend_ratio(l)?;
        // At l = k-1 every child survives, so the ratio is an exact zero and
        // the out-of-range e[k] never contributes.
        let e_next = if l + 1 < k { e[l + 1] } else { 0.0 };
        let e_term = if ratio > 0.0 { e_next * ratio } else { 0.0 };
        let increment = 1.0 + price * m1 + e_term;
        let y = increment - comp;
        let t = d[l + 1] + y;
        comp = (t - d[l + 1]) - y;
        d[l] = t;
    }

    let c = if k == 0 {
        1.0
    } else {
        // (1/p - 1) e[0] without cancellation: the extinction mass is summed
        // directly. The coefficient is an exact zero when p[0] = 1.
        let failures = p_extinct(0) / p[0];
        let e0 = if failures > 0.0 { e[0] } else { 0.0 };
        failures * e0 + d[0]
    };
    Ok(CostTable {
        k,
        price,
        d,
        e,
        e_unused,
        c,
        p,
    })
}

/// Outcome of one simulated search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOutcome {
    pub total_cost: f64,
    pub restarts: u64,
    pub nodes_visited: u64,
}

/// Simulates the search protocol on lazily generated trees. Children are
/// generated as they are visited; subtrees are exchangeable, so this equals
/// fixing the tree first and visiting children in uniformly random order.
/// Deterministic per seed.
pub fn simulate_search(
    sched: &OffspringSchedule,
    k: usize,
    price: f64,
    seed: u64,
) -> Result<SearchOutcome> {
    simulate_search_with_cap(sched, k, price, seed, DEFAULT_RESTART_CAP)
}

pub fn simulate_search_with_cap(
    sched: &OffspringSchedule,
    k: usize,
    price: f64,
    seed: u64,
    restart_cap: u64,
) -> Result<SearchOutcome> {
    check_searchable(sched, k)?;
    simulate_unchecked(sched, k, price, seed, restart_cap)
}

/// Refuses schedules that cannot reach the target at all.
fn check_searchable(sched: &OffspringSchedule, k: usize) -> Result<()> {
    if k > sched.depth() {
        return Err(Error::Domain(format!(
            "target level {k} exceeds schedule depth {}",
            sched.depth()
        )));
    }
    let survival = SurvivalTable::build(sched, k)?;
    if survival.p(0) == 0.0 {
        return Err(Error::ImpossibleSearch(format!(
            "the target level {k} is unreachable from the root"
        )));
    }
    Ok(())
}

fn simulate_unchecked(
    sched: &OffspringSchedule,
    k: usize,
    price: f64,
    seed: u64,
    restart_cap: u64,
) -> Result<SearchOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = 0u64;
    let mut children_discovered = 0u64;
    let mut restarts = 0u64;
    loop {
        if search_one_tree(sched, k, &mut rng, &mut nodes, &mut children_discovered) {
            break;
        }
        restarts += 1;
        if restarts >= restart_cap {
            return Err(Error::RestartCapExceeded(restart_cap));
        }
    }
    Ok(SearchOutcome {
        total_cost: nodes as f64 + price * children_discovered as f64,
        restarts,
        nodes_visited: nodes,
    })
}

/// Depth-first search of one fresh tree; true on reaching level k.
fn search_one_tree<R: Rng>(
    sched: &OffspringSchedule,
    k: usize,
    rng: &mut R,
    nodes: &mut u64,
    children_discovered: &mut u64,
) -> bool {
    // Stack of pending child counts per open node, by level.
    let mut pending: Vec<u32> = Vec::new();
    *nodes += 1;
    if k == 0 {
        return true;
    }
    let w = sched.law(0).sample(rng);
    *children_discovered += u64::from(w);
    pending.push(w);
    while let Some(remaining) = pending.last_mut() {
        if *remaining == 0 {
            pending.pop();
            continue;
        }
        *remaining -= 1;
        let level = pending.len();
        *nodes += 1;
        if level == k {
            return true;
        }
        let w = sched.law(level).sample(rng);
        *children_discovered += u64::from(w);
        pending.push(w);
    }
    false
}

/// Sample mean and standard error of the simulated total cost over
/// independent replications; replication r uses seed `seed + r`.
/// Replications run in parallel with a deterministic aggregation order.
pub fn monte_carlo_cost(
    sched: &OffspringSchedule,
    k: usize,
    price: f64,
    reps: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    if reps == 0 {
        return Err(Error::Domain("at least one replication is required".into()));
    }
    check_searchable(sched, k)?;
    let costs: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            simulate_unchecked(sched, k, price, seed.wrapping_add(r), DEFAULT_RESTART_CAP)
                .map(|o| o.total_cost)
        })
        .collect::<Result<_>>()?;
    let n = reps as f64;
    let mean = costs.iter().sum::<f64>() / n;
    let var = if reps > 1 {
        costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok((mean, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offspring::Pmf;
    use std::collections::BTreeMap;

    fn pmf(pairs: &[(u32, f64)]) -> Pmf {
        let w: BTreeMap<u32, f64> = pairs.iter().copied().collect();
        Pmf::from_weights(&w).unwrap()
    }

    #[test]
    fn boundary_values() {
        let sched = OffspringSchedule::uniform(pmf(&[(0, 1.0), (1, 1.0), (2, 1.0)]), 4).unwrap();
        let table = build_cost_table(&sched, 4, 2.0).unwrap();
        assert_eq!(table.d(4), 1.0);
        assert_eq!(table.e(3), 1.0);
    }

    #[test]
    fn deterministic_chain_by_hand() {
        // Every node has one child: d[l] = 1 + (price+1)(k-l), no dead ends.
        let sched = OffspringSchedule::uniform(Pmf::point_mass(1), 3).unwrap();
        let table = build_cost_table(&sched, 3, 2.0).unwrap();
        for l in 0..=3 {
            assert_eq!(table.d(l), 1.0 + 3.0 * (3 - l) as f64);
        }
        assert_eq!(table.total(), 10.0);
        // Extinction is impossible everywhere below k-1: e flagged unused.
        assert_eq!(table.e_unused_levels(), &[0, 1]);
        assert_eq!(table.e(0), 0.0);
    }

    #[test]
    fn impossible_search_is_an_error() {
        let sched =
            OffspringSchedule::from_laws(vec![Pmf::point_mass(0), Pmf::point_mass(1)]).unwrap();
        assert!(matches!(
            build_cost_table(&sched, 2, 1.0),
            Err(Error::ImpossibleSearch(_))
        ));
    }

    #[test]
    fn certain_next_level_drops_deadend_term() {
        // All children always survive (support excludes 0 below the target):
        // d[l] = 1 + price E[W] + d[l+1] exactly.
        let law = pmf(&[(1, 1.0), (2, 1.0)]);
        let sched = OffspringSchedule::uniform(law.clone(), 3).unwrap();
        let table = build_cost_table(&sched, 3, 2.0).unwrap();
        let mean = law.mean();
        let mut expected = 1.0;
        for l in (0..3).rev() {
            expected += 1.0 + 2.0 * mean;
            assert!((table.d(l) - expected).abs() < 1e-12, "level {l}");
        }
    }

    #[test]
    fn bernoulli_k2_by_hand() {
        // p = (1/4, 1/2, 1), e[0] = 5/3, d = (5, 3, 1), total = 10.
        let sched = OffspringSchedule::uniform(pmf(&[(0, 1.0), (1, 1.0)]), 2).unwrap();
        let table = build_cost_table(&sched, 2, 1.0).unwrap();
        assert!((table.e(0) - 5.0 / 3.0).abs() < 1e-12);
        assert!((table.d(1) - 3.0).abs() < 1e-12);
        assert!((table.d(0) - 5.0).abs() < 1e-12);
        assert!((table.total() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn chain_simulation_is_deterministic() {
        let sched = OffspringSchedule::uniform(Pmf::point_mass(1), 3).unwrap();
        for seed in 0..5 {
            let out = simulate_search(&sched, 3, 2.0, seed).unwrap();
            assert_eq!(out.total_cost, 10.0);
            assert_eq!(out.restarts, 0);
            assert_eq!(out.nodes_visited, 4);
        }
    }

    #[test]
    fn target_level_zero_costs_one() {
        let sched = OffspringSchedule::uniform(pmf(&[(0, 1.0), (2, 1.0)]), 1).unwrap();
        let out = simulate_search(&sched, 0, 5.0, 9).unwrap();
        assert_eq!(out.total_cost, 1.0);
        assert_eq!(out.nodes_visited, 1);
        assert_eq!(build_cost_table(&sched, 0, 5.0).unwrap().total(), 1.0);
    }

    #[test]
    fn unreachable_target_is_guarded() {
        let sched =
            OffspringSchedule::from_laws(vec![Pmf::point_mass(0), Pmf::point_mass(1)]).unwrap();
        assert!(matches!(
            simulate_search(&sched, 2, 1.0, 0),
            Err(Error::ImpossibleSearch(_))
        ));
    }

    #[test]
    fn restart_cap_triggers() {
        // Survival chance 2^-20 per tree with a cap of 4 restarts.
        let law = pmf(&[(0, 1.0), (1, 1.0)]);
        let sched = OffspringSchedule::uniform(law, 20).unwrap();
        assert!(matches!(
            simulate_search_with_cap(&sched, 20, 1.0, 3, 4),
            Err(Error::RestartCapExceeded(4))
        ));
    }

    #[test]
    fn deterministic_chain_monte_carlo_has_zero_stderr() {
        let sched = OffspringSchedule::uniform(Pmf::point_mass(1), 3).unwrap();
        let (mean, stderr) = monte_carlo_cost(&sched, 3, 2.0, 1000, 1).unwrap();
        assert_eq!(mean, 10.0);
        assert_eq!(stderr, 0.0);
    }

    #[test]
    fn recursion_matches_simulation_bernoulli() {
        let sched = OffspringSchedule::uniform(pmf(&[(0, 1.0), (1, 1.0)]), 2).unwrap();
        let table = build_cost_table(&sched, 2, 1.0).unwrap();
        let (mean, stderr) = monte_carlo_cost(&sched, 2, 1.0, 100_000, 7).unwrap();
        assert!(
            (mean - table.total()).abs() <= 3.0 * stderr,
            "mean {mean} vs exact {} (stderr {stderr})",
            table.total()
        );
    }

    #[test]
    fn recursion_matches_simulation_poisson() {
        let law = Pmf::poisson(2.0, 1e-12).unwrap();
        let sched = OffspringSchedule::uniform(law, 4).unwrap();
        let table = build_cost_table(&sched, 4, 10.0).unwrap();
        let (mean, stderr) = monte_carlo_cost(&sched, 4, 10.0, 100_000, 11).unwrap();
        assert!(
            (mean - table.total()).abs() <= 3.0 * stderr,
            "mean {mean} vs exact {} (stderr {stderr})",
            table.total()
        );
    }

    #[test]
    fn cost_is_monotone_in_price() {
        let law = Pmf::poisson(1.5, 1e-12).unwrap();
        let sched = OffspringSchedule::uniform(law, 4).unwrap();
        let cheap = build_cost_table(&sched, 4, 1.0).unwrap().total();
        let dear = build_cost_table(&sched, 4, 10.0).unwrap().total();
        assert!(dear >= cheap);
    }

    #[test]
    fn costs_are_at_least_one() {
        let law = Pmf::poisson(1.5, 1e-12).unwrap();
        let sched = OffspringSchedule::uniform(law, 5).unwrap();
        let table = build_cost_table(&sched, 5, 2.0).unwrap();
        for l in 0..=5 {
            assert!(table.d(l) >= 1.0);
        }
        for l in 0..5 {
            assert!(table.e(l) >= 1.0);
        }
    }
}
