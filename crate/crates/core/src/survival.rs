//! Conditioning on survival to the target level: the survival-probability
//! recursion, the conditioned measures on surviving and extinct trees, their
//! samplers and exact evaluators, and the enumeration-based equivalence
//! check against the unconditioned measure.
//!
//! A node at level l is type 1 if its subtree reaches level k and type 2
//! otherwise. The `surviving` quantities belong to the measure conditioned
//! on reaching the target level, the `extinct` quantities to the measure
//! conditioned on missing it; the p-weighted mixture of the two reproduces
//! the unconditioned measure exactly.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::offspring::{JointWx, OffspringSchedule, Pmf};
use crate::tree::{self, Tree};

/// Binomial coefficient as f64, exact for the small arguments used here.
fn choose(n: u32, m: u32) -> f64 {
    let mut v = 1.0;
    for i in 0..m.min(n - m) {
        v = v * f64::from(n - i) / f64::from(i + 1);
    }
    v
}

/// Per-level laws derived from the offspring law and the survival
/// probability one level down.
#[derive(Debug, Clone)]
struct LevelLaws {
    joint: JointWx,
    /// P(X = 0), as an exact sum; equals 1 - p[l].
    prob_extinct: f64,
    /// P(X >= 1), as an exact sum; equals p[l].
    prob_survive: f64,
    /// (W, X) | X >= 1, absent when survival from this level is impossible.
    survive: Option<JointWx>,
    /// W | X = 0, absent when extinction from this level is impossible.
    extinct: Option<Pmf>,
}

/// Survival probabilities p[l] for l = 0..=k together with the conditioned
/// per-level child laws they induce.
#[derive(Debug, Clone)]
pub struct SurvivalTable {
    k: usize,
    p: Vec<f64>,
    sched: OffspringSchedule,
    levels: Vec<LevelLaws>,
}

impl SurvivalTable {
    /// Downward recursion p[k] = 1, p[l] = 1 - sum_n mu_l(n) (1 - p[l+1])^n.
    pub fn build(sched: &OffspringSchedule, k: usize) -> Result<SurvivalTable> {
        if k > sched.depth() {
            return Err(Error::Domain(format!(
                "target level {k} exceeds schedule depth {}",
                sched.depth()
            )));
        }
        let mut p = vec![1.0; k + 1];
        let mut levels: Vec<LevelLaws> = Vec::with_capacity(k);
        for l in (0..k).rev() {
            let joint = JointWx::from_pmf(sched.law(l), p[l + 1])?;
            let prob_extinct = joint.prob_x_zero();
            let prob_survive = joint.prob_x_at_least_one();
            p[l] = prob_survive;
            levels.push(LevelLaws {
                survive: joint.given_x_at_least_one().ok(),
                extinct: joint.given_x_zero().ok(),
                joint,
                prob_extinct,
                prob_survive,
            });
        }
        levels.reverse();
        Ok(SurvivalTable {
            k,
            p,
            sched: sched.clone(),
            levels,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// P(a tree rooted at level l reaches level k).
    pub fn p(&self, l: usize) -> f64 {
        self.p[l]
    }

    pub fn p_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn schedule(&self) -> &OffspringSchedule {
        &self.sched
    }

    /// 1 - p[l] as the exact extinction sum (no cancellation).
    pub fn p_extinct(&self, l: usize) -> f64 {
        if l == self.k {
            0.0
        } else {
            self.levels[l].prob_extinct
        }
    }

    /// The joint (W, X) law at level l.
    pub fn joint(&self, l: usize) -> &JointWx {
        &self.levels[l].joint
    }

    /// E[W | X = 0] at level l.
    pub fn mean_children_given_extinct(&self, l: usize) -> Result<f64> {
        let law = self.extinct_law(l)?;
        Ok(law.mean())
    }

    /// E[W | X >= 1] at level l.
    pub fn mean_children_given_survive(&self, l: usize) -> Result<f64> {
        let law = self.survive_law(l)?;
        Ok(law.iter().map(|(n, _, v)| f64::from(n) * v).sum())
    }

    /// E[(W - X)/(1 + X) | X >= 1] at level l.
    pub fn mean_deadend_ratio(&self, l: usize) -> Result<f64> {
        let law = self.survive_law(l)?;
        Ok(law
            .iter()
            .map(|(n, m, v)| f64::from(n - m) / f64::from(1 + m) * v)
            .sum())
    }

    fn survive_law(&self, l: usize) -> Result<&JointWx> {
        if l >= self.k {
            return Err(Error::Domain(format!(
                "level {l} has no child law (target level {})",
                self.k
            )));
        }
        self.levels[l].survive.as_ref().ok_or_else(|| {
            Error::ImpossibleConditioning(format!("survival from level {l} has probability zero"))
        })
    }

    fn extinct_law(&self, l: usize) -> Result<&Pmf> {
        if l >= self.k {
            return Err(Error::Domain(format!(
                "extinction law is undefined at level {l} >= target level {}",
                self.k
            )));
        }
        self.levels[l].extinct.as_ref().ok_or_else(|| {
            Error::ImpossibleConditioning(format!("extinction from level {l} has probability zero"))
        })
    }

    /// Test hook: returns a copy whose mixture weight p[l] is shifted by
    /// `delta` (clamped to [0, 1]) while the conditioned child laws are left
    /// untouched. Used as a negative control for the equivalence checks.
    pub fn with_perturbed_p(&self, l: usize, delta: f64) -> SurvivalTable {
        let mut out = self.clone();
        out.p[l] = (out.p[l] + delta).clamp(0.0, 1.0);
        out
    }
}

/// Node kinds during conditioned sampling.
#[derive(Clone, Copy)]
enum NodeKind {
    Survive,
    Extinct,
}

/// Draws a tree conditioned to reach level k from level `l`. At l = k the
/// draw is the leaf. Otherwise draw (W, X) | X >= 1, place the X surviving
/// children at a uniformly random subset of the W positions, and recurse:
/// surviving children from the survival measure, the rest from the
/// extinction measure. Nodes are expanded breadth-first; deterministic per
/// seed.
pub fn sample_surviving(table: &SurvivalTable, l: usize, seed: u64) -> Result<Tree> {
    check_level(table, l)?;
    if l < table.k {
        // Fail before consuming randomness.
        table.survive_law(l)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_conditioned(table, l, NodeKind::Survive, &mut rng)
}

/// Draws a tree conditioned to die out before level k: all children follow
/// the extinction measure one level down.
pub fn sample_extinct(table: &SurvivalTable, l: usize, seed: u64) -> Result<Tree> {
    check_level(table, l)?;
    if l == table.k {
        return Err(Error::Domain(
            "the extinction measure plays no role at the target level".into(),
        ));
    }
    table.extinct_law(l)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_conditioned(table, l, NodeKind::Extinct, &mut rng)
}

/// Coin toss with probability p[l] for the survival measure, then the
/// corresponding conditioned draw. Reproduces the unconditioned measure.
pub fn sample_mixture(table: &SurvivalTable, l: usize, seed: u64) -> Result<Tree> {
    check_level(table, l)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Clamp against rounding; impossible-conditioning decisions elsewhere use
    // the exact sums, not this value.
    let p = table.p(l).clamp(1e-15, 1.0 - 1e-15);
    let kind = if l == table.k || rng.random::<f64>() < p {
        NodeKind::Survive
    } else {
        NodeKind::Extinct
    };
    sample_conditioned(table, l, kind, &mut rng)
}

fn check_level(table: &SurvivalTable, l: usize) -> Result<()> {
    if l > table.k {
        return Err(Error::Domain(format!(
            "level {l} exceeds target level {}",
            table.k
        )));
    }
    Ok(())
}

fn sample_conditioned<R: Rng>(
    table: &SurvivalTable,
    root_level: usize,
    root_kind: NodeKind,
    rng: &mut R,
) -> Result<Tree> {
    let k = table.k;
    let mut child_lists: Vec<Vec<usize>> = vec![Vec::new()];
    let mut frontier = std::collections::VecDeque::from([(0usize, root_level, root_kind)]);
    while let Some((node_idx, l, kind)) = frontier.pop_front() {
        if l == k {
            continue;
        }
        match kind {
            NodeKind::Survive => {
                let law = table.survive_law(l)?;
                let (w, x) = sample_joint(law, rng);
                let surviving = sample_indices(rng, w as usize, x as usize);
                let mut kinds = vec![NodeKind::Extinct; w as usize];
                for i in surviving {
                    kinds[i] = NodeKind::Survive;
                }
                for child_kind in kinds {
                    let idx = child_lists.len();
                    child_lists.push(Vec::new());
                    child_lists[node_idx].push(idx);
                    frontier.push_back((idx, l + 1, child_kind));
                }
            }
            NodeKind::Extinct => {
                let law = table.extinct_law(l)?;
                let w = law.sample(rng);
                for _ in 0..w {
                    let idx = child_lists.len();
                    child_lists.push(Vec::new());
                    child_lists[node_idx].push(idx);
                    frontier.push_back((idx, l + 1, NodeKind::Extinct));
                }
            }
        }
    }
    Ok(tree::assemble(child_lists))
}

fn sample_joint<R: Rng>(law: &JointWx, rng: &mut R) -> (u32, u32) {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last = (0, 0);
    for (n, m, v) in law.iter() {
        if v <= 0.0 {
            continue;
        }
        cum += v;
        last = (n, m);
        if u < cum {
            return (n, m);
        }
    }
    last
}

/// Log-mass of `t` under the survival-conditioned measure at level `l`;
/// `NEG_INFINITY` when `t` does not reach level k.
pub fn log_mass_surviving(table: &SurvivalTable, l: usize, t: &Tree) -> Result<f64> {
    check_tree(table, l, t)?;
    if l < table.k {
        table.survive_law(l)?;
    }
    Ok(log_mass_pair(table, l, t).0)
}

/// Log-mass of `t` under the extinction-conditioned measure at level `l`;
/// `NEG_INFINITY` when `t` reaches level k.
pub fn log_mass_extinct(table: &SurvivalTable, l: usize, t: &Tree) -> Result<f64> {
    check_tree(table, l, t)?;
    if l == table.k {
        return Err(Error::Domain(
            "the extinction measure plays no role at the target level".into(),
        ));
    }
    table.extinct_law(l)?;
    Ok(log_mass_pair(table, l, t).1)
}

/// Log-mass of `t` under the p-weighted mixture of the two conditioned
/// measures; by the equivalence theorem this is the unconditioned log-mass.
pub fn log_mass_mixture(table: &SurvivalTable, l: usize, t: &Tree) -> Result<f64> {
    check_tree(table, l, t)?;
    if l == table.k {
        return Ok(0.0);
    }
    // The two supports are disjoint, so only one branch contributes.
    if t.reaches_level(table.k - l) {
        let p = table.p(l);
        if p == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(p.ln() + log_mass_pair(table, l, t).0)
    } else {
        let pe = table.p_extinct(l);
        if pe == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(pe.ln() + log_mass_pair(table, l, t).1)
    }
}

fn check_tree(table: &SurvivalTable, l: usize, t: &Tree) -> Result<()> {
    check_level(table, l)?;
    if t.height() > table.k - l {
        return Err(Error::Domain(format!(
            "tree of height {} cannot lie in a space of height {}",
            t.height(),
            table.k - l
        )));
    }
    Ok(())
}

/// Returns (log surviving-mass, log extinct-mass, subtree height). At most
/// one of the two masses is finite; both recursions are evaluated in one
/// pass.
fn log_mass_pair(table: &SurvivalTable, l: usize, t: &Tree) -> (f64, f64) {
    fn rec(table: &SurvivalTable, l: usize, t: &Tree) -> (f64, f64, usize) {
        let k = table.k;
        if l == k {
            // Only the leaf lives here; it has survival mass one. The
            // extinction measure at the target level is unreachable from any
            // parent recursion.
            return (0.0, f64::NEG_INFINITY, 0);
        }
        let level = &table.levels[l];
        if t.children.is_empty() {
            // The leaf never reaches level k from l < k; its extinction mass
            // is P(W = 0 | X = 0).
            let lr = if level.prob_extinct > 0.0 {
                let mass = level.joint.mass(0, 0) / level.prob_extinct;
                if mass > 0.0 {
                    mass.ln()
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                f64::NEG_INFINITY
            };
            return (f64::NEG_INFINITY, lr, 0);
        }
        let n = t.children.len() as u32;
        let mut surviving = 0u32;
        let mut sum_q_children = 0.0;
        let mut sum_r_children = 0.0;
        let mut height = 0usize;
        for child in &t.children {
            let (lq_c, lr_c, h_c) = rec(table, l + 1, child);
            height = height.max(h_c + 1);
            if h_c >= k - l - 1 {
                surviving += 1;
                sum_q_children += lq_c;
            } else {
                sum_r_children += lr_c;
            }
        }
        if surviving >= 1 {
            // In the survival support: weight by the conditioned joint mass
            // over the uniform arrangement count.
            let lq = if level.prob_survive > 0.0 {
                let mass = level.joint.mass(n, surviving) / level.prob_survive;
                if mass > 0.0 {
                    mass.ln() - choose(n, surviving).ln() + sum_q_children + sum_r_children
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                f64::NEG_INFINITY
            };
            (lq, f64::NEG_INFINITY, height)
        } else {
            let lr = if level.prob_extinct > 0.0 {
                let mass = level.joint.mass(n, 0) / level.prob_extinct;
                if mass > 0.0 {
                    mass.ln() + sum_r_children
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                f64::NEG_INFINITY
            };
            (f64::NEG_INFINITY, lr, height)
        }
    }
    let (lq, lr, _) = rec(table, l, t);
    (lq, lr)
}

/// Total-variation distance between the unconditioned measure and the
/// two-type mixture over the fully enumerated space of height <= k with at
/// most `max_children` children. Zero (to rounding) by the equivalence
/// theorem.
pub fn check_equivalence(sched: &OffspringSchedule, k: usize, max_children: u32) -> Result<f64> {
    let table = SurvivalTable::build(sched, k)?;
    check_equivalence_with_table(&table, max_children).map(|r| r.tv_distance)
}

/// Result of an enumeration-based equivalence check.
#[derive(Debug, Clone, Copy)]
pub struct EquivalenceReport {
    pub tv_distance: f64,
    /// Largest per-tree gap between the exact and reconstructed masses.
    pub pointwise_max: f64,
    pub atoms: usize,
}

pub fn check_equivalence_with_table(
    table: &SurvivalTable,
    max_children: u32,
) -> Result<EquivalenceReport> {
    let sched = table.schedule();
    if sched.max_support() > max_children {
        return Err(Error::Domain(format!(
            "schedule support {} exceeds enumeration bound {max_children}",
            sched.max_support()
        )));
    }
    let trees = tree::enumerate_trees(table.k(), max_children)?;
    let mut tv = 0.0;
    let mut pointwise = 0.0f64;
    for t in &trees {
        let exact = tree::log_prob(t, sched, 0, table.k())?.exp();
        let mixed = log_mass_mixture(table, 0, t)?.exp();
        tv += (exact - mixed).abs();
        pointwise = pointwise.max((exact - mixed).abs());
    }
    Ok(EquivalenceReport {
        tv_distance: tv / 2.0,
        pointwise_max: pointwise,
        atoms: trees.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn pmf(pairs: &[(u32, f64)]) -> Pmf {
        let w: BTreeMap<u32, f64> = pairs.iter().copied().collect();
        Pmf::from_weights(&w).unwrap()
    }

    fn bernoulli_half(k: usize) -> OffspringSchedule {
        OffspringSchedule::uniform(pmf(&[(0, 1.0), (1, 1.0)]), k).unwrap()
    }

    #[test]
    fn deterministic_chain_always_survives() {
        let sched = OffspringSchedule::uniform(Pmf::point_mass(1), 4).unwrap();
        let table = SurvivalTable::build(&sched, 4).unwrap();
        for l in 0..=4 {
            assert_eq!(table.p(l), 1.0);
        }
    }

    #[test]
    fn extinct_root_never_survives() {
        let sched = OffspringSchedule::from_laws(vec![Pmf::point_mass(0)]).unwrap();
        let table = SurvivalTable::build(&sched, 1).unwrap();
        assert_eq!(table.p(0), 0.0);
        assert_eq!(table.p(1), 1.0);
    }

    #[test]
    fn bernoulli_two_levels_by_hand() {
        let table = SurvivalTable::build(&bernoulli_half(2), 2).unwrap();
        assert!((table.p(1) - 0.5).abs() < 1e-15);
        assert!((table.p(0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn survive_sample_at_target_level_is_leaf() {
        let table = SurvivalTable::build(&bernoulli_half(2), 2).unwrap();
        for seed in 0..5 {
            assert_eq!(sample_surviving(&table, 2, seed).unwrap(), Tree::leaf());
        }
    }

    #[test]
    fn survive_sample_of_chain_schedule() {
        let sched = OffspringSchedule::uniform(Pmf::point_mass(1), 2).unwrap();
        let table = SurvivalTable::build(&sched, 2).unwrap();
        for seed in 0..5 {
            assert_eq!(
                sample_surviving(&table, 0, seed).unwrap().serialize(),
                "((()))"
            );
        }
    }

    #[test]
    fn survive_sample_one_level_bernoulli() {
        let table = SurvivalTable::build(&bernoulli_half(1), 1).unwrap();
        for seed in 0..20 {
            assert_eq!(
                sample_surviving(&table, 0, seed).unwrap().serialize(),
                "(())"
            );
        }
    }

    #[test]
    fn survive_sample_errors_on_null_event() {
        let sched = OffspringSchedule::from_laws(vec![Pmf::point_mass(0)]).unwrap();
        let table = SurvivalTable::build(&sched, 1).unwrap();
        assert!(matches!(
            sample_surviving(&table, 0, 0),
            Err(Error::ImpossibleConditioning(_))
        ));
    }

    #[test]
    fn extinct_sample_one_below_target_is_leaf() {
        let table = SurvivalTable::build(&bernoulli_half(3), 3).unwrap();
        for seed in 0..10 {
            assert_eq!(sample_extinct(&table, 2, seed).unwrap(), Tree::leaf());
        }
    }

    #[test]
    fn extinct_sample_errors() {
        let sched = OffspringSchedule::uniform(Pmf::point_mass(1), 2).unwrap();
        let table = SurvivalTable::build(&sched, 2).unwrap();
        assert!(matches!(
            sample_extinct(&table, 0, 0),
            Err(Error::ImpossibleConditioning(_))
        ));
        assert!(matches!(
            sample_extinct(&table, 2, 0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn extinct_sample_ratio_bernoulli_k2() {
        // R-masses at level 0, k = 2: leaf 2/3, single-child chain 1/3.
        let table = SurvivalTable::build(&bernoulli_half(2), 2).unwrap();
        let mut leaf = 0u32;
        let mut one = 0u32;
        let reps = 100_000u32;
        for seed in 0..reps {
            match sample_extinct(&table, 0, u64::from(seed))
                .unwrap()
                .serialize()
                .as_str()
            {
                "()" => leaf += 1,
                "(())" => one += 1,
                other => panic!("unexpected extinct tree {other}"),
            }
        }
        let freq = f64::from(leaf) / f64::from(reps);
        let sigma = (2.0 / 3.0 * (1.0 / 3.0) / f64::from(reps)).sqrt();
        assert!((freq - 2.0 / 3.0).abs() < 4.0 * sigma, "freq {freq}");
        assert!(one > 0);
    }

    #[test]
    fn log_q_examples() {
        let table = SurvivalTable::build(&bernoulli_half(2), 2).unwrap();
        assert_eq!(log_mass_surviving(&table, 2, &Tree::leaf()).unwrap(), 0.0);
        // Too short to reach the target level: zero survival mass.
        assert_eq!(
            log_mass_surviving(&table, 0, &Tree::parse("(())").unwrap()).unwrap(),
            f64::NEG_INFINITY
        );
        // Too tall for the space rooted at this level.
        assert!(matches!(
            log_mass_surviving(&table, 1, &Tree::parse("((()))").unwrap()),
            Err(Error::Domain(_))
        ));
        // The extinction evaluator plays no role at the target level.
        assert!(matches!(
            log_mass_extinct(&table, 2, &Tree::leaf()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn log_r_bernoulli_by_hand() {
        // 1 - p[0] = 0.75: of that, the leaf carries 0.5 and the height-one
        // chain 0.25, so the conditioned masses are 2/3 and 1/3.
        let table = SurvivalTable::build(&bernoulli_half(2), 2).unwrap();
        let leaf = log_mass_extinct(&table, 0, &Tree::leaf()).unwrap().exp();
        assert!((leaf - 2.0 / 3.0).abs() < 1e-12);
        let one = log_mass_extinct(&table, 0, &Tree::parse("(())").unwrap())
            .unwrap()
            .exp();
        assert!((one - 1.0 / 3.0).abs() < 1e-12);
        // A surviving tree has zero extinction mass.
        let tall = log_mass_extinct(&table, 0, &Tree::parse("((()))").unwrap()).unwrap();
        assert_eq!(tall, f64::NEG_INFINITY);
    }

    #[test]
    fn conditioned_masses_sum_to_one_over_enumeration() {
        let laws = vec![
            pmf(&[(0, 1.0), (1, 2.0), (2, 1.0)]),
            pmf(&[(0, 1.0), (2, 1.0)]),
            pmf(&[(0, 2.0), (1, 1.0), (2, 1.0)]),
        ];
        let sched = OffspringSchedule::from_laws(laws).unwrap();
        let k = 3;
        let table = SurvivalTable::build(&sched, k).unwrap();
        let trees = tree::enumerate_trees(k, 2).unwrap();
        for l in 0..=k {
            let mut q_total = 0.0;
            let mut r_total = 0.0;
            for t in &trees {
                if t.height() > k - l {
                    continue;
                }
                if t.reaches_level(k - l) {
                    q_total += log_mass_surviving(&table, l, t).unwrap().exp();
                } else if l < k {
                    r_total += log_mass_extinct(&table, l, t).unwrap().exp();
                }
            }
            assert!(
                (q_total - 1.0).abs() < 1e-10,
                "surviving mass at level {l}: {q_total}"
            );
            if l < k {
                assert!(
                    (r_total - 1.0).abs() < 1e-10,
                    "extinct mass at level {l}: {r_total}"
                );
            }
        }
    }

    #[test]
    fn pointwise_mixture_equals_unconditioned() {
        let laws = vec![
            pmf(&[(0, 1.0), (1, 1.0)]),
            pmf(&[(0, 1.0), (1, 1.0), (2, 2.0)]),
        ];
        let sched = OffspringSchedule::from_laws(laws).unwrap();
        let table = SurvivalTable::build(&sched, 2).unwrap();
        for t in tree::enumerate_trees(2, 2).unwrap() {
            let exact = tree::log_prob(&t, &sched, 0, 2).unwrap().exp();
            let q = log_mass_surviving(&table, 0, &t).unwrap().exp();
            let r = log_mass_extinct(&table, 0, &t).unwrap().exp();
            let mixed = table.p(0) * q + table.p_extinct(0) * r;
            assert!(
                (mixed - exact).abs() < 1e-12,
                "tree {}: {mixed} vs {exact}",
                t.serialize()
            );
        }
    }

    #[test]
    fn equivalence_bernoulli_k2() {
        let tv = check_equivalence(&bernoulli_half(2), 2, 1).unwrap();
        assert!(tv < 1e-12, "tv {tv}");
    }

    #[test]
    fn equivalence_single_atom_chain() {
        let sched = OffspringSchedule::uniform(Pmf::point_mass(1), 3).unwrap();
        let tv = check_equivalence(&sched, 3, 1).unwrap();
        assert_eq!(tv, 0.0);
    }

    #[test]
    fn equivalence_rejects_unbounded_support() {
        let sched = OffspringSchedule::uniform(pmf(&[(0, 1.0), (3, 1.0)]), 2).unwrap();
        assert!(check_equivalence(&sched, 2, 2).is_err());
    }

    #[test]
    fn perturbed_table_breaks_equivalence() {
        let table = SurvivalTable::build(&bernoulli_half(2), 2).unwrap();
        let bad = table.with_perturbed_p(0, 1e-3);
        let report = check_equivalence_with_table(&bad, 1).unwrap();
        assert!(report.tv_distance > 1e-8, "tv {}", report.tv_distance);
    }

    #[test]
    fn samples_respect_their_support() {
        let sched = OffspringSchedule::uniform(pmf(&[(0, 1.0), (1, 1.0), (2, 1.0)]), 3).unwrap();
        let table = SurvivalTable::build(&sched, 3).unwrap();
        for seed in 0..10_000 {
            let t = sample_surviving(&table, 0, seed).unwrap();
            assert!(t.reaches_level(3));
            let t = sample_extinct(&table, 0, seed).unwrap();
            assert!(!t.reaches_level(3));
        }
    }

    #[test]
    fn mixture_sampler_matches_unconditioned_law() {
        // k = 1 Bernoulli: mixture over {leaf, one-child chain} is 1/2 each.
        let table = SurvivalTable::build(&bernoulli_half(1), 1).unwrap();
        let reps = 100_000u32;
        let mut leaf = 0u32;
        for seed in 0..reps {
            if sample_mixture(&table, 0, u64::from(seed)).unwrap() == Tree::leaf() {
                leaf += 1;
            }
        }
        let freq = f64::from(leaf) / f64::from(reps);
        let sigma = (0.25 / f64::from(reps)).sqrt();
        assert!((freq - 0.5).abs() < 4.0 * sigma, "freq {freq}");
    }
}
