//! Finite rooted ordered trees of bounded height: the sample space of the
//! branching measures, exact enumeration of small tree spaces (the
//! brute-force oracle), unconditioned sampling, and exact evaluation of the
//! level-indexed Galton-Watson measure.
//!
//! Traversals that can meet deep or adversarial input (parsing, height,
//! probability evaluation) use explicit stacks; samplers build nodes
//! breadth-first and assemble the tree without recursion.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::offspring::OffspringSchedule;

/// A rooted ordered tree. The empty child list is the single-node tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Tree {
    pub children: Vec<Tree>,
}

impl Tree {
    /// The single-node tree.
    pub fn leaf() -> Tree {
        Tree {
            children: Vec::new(),
        }
    }

    pub fn new(children: Vec<Tree>) -> Tree {
        Tree { children }
    }

    /// Height: 0 for a leaf, otherwise 1 + the maximal child height.
    pub fn height(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(self, 0usize)];
        while let Some((node, depth)) = stack.pop() {
            if node.children.is_empty() {
                best = best.max(depth);
            } else {
                for child in &node.children {
                    stack.push((child, depth + 1));
                }
            }
        }
        best
    }

    pub fn node_count(&self) -> usize {
        let mut count = 0;
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            count += 1;
            stack.extend(node.children.iter());
        }
        count
    }

    /// Whether the tree has at least one node at depth `level`. This is the
    /// recursive survival event: every tree reaches level 0, and a tree
    /// reaches level l iff some child reaches level l - 1 — equivalently,
    /// height >= l.
    pub fn reaches_level(&self, level: usize) -> bool {
        if level == 0 {
            return true;
        }
        // Early-exit depth search rather than a full height computation.
        let mut stack = vec![(self, 0usize)];
        while let Some((node, depth)) = stack.pop() {
            if depth == level {
                return true;
            }
            for child in &node.children {
                stack.push((child, depth + 1));
            }
        }
        false
    }

    /// Nested-bracket serialization: a leaf is `()`, a node is `(` followed
    /// by the serializations of its children and `)`.
    pub fn serialize(&self) -> String {
        enum Step<'a> {
            Open(&'a Tree),
            Close,
        }
        let mut out = String::new();
        let mut stack = vec![Step::Open(self)];
        while let Some(step) = stack.pop() {
            match step {
                Step::Open(node) => {
                    out.push('(');
                    stack.push(Step::Close);
                    for child in node.children.iter().rev() {
                        stack.push(Step::Open(child));
                    }
                }
                Step::Close => out.push(')'),
            }
        }
        out
    }

    /// Parses the nested-bracket format. Errors report the byte position of
    /// the offending character.
    pub fn parse(text: &str) -> Result<Tree> {
        let mut stack: Vec<Vec<Tree>> = Vec::new();
        let mut root: Option<Tree> = None;
        for (pos, ch) in text.char_indices() {
            match ch {
                '(' => {
                    if root.is_some() {
                        return Err(Error::Domain(format!(
                            "parse error at position {pos}: content after the root tree"
                        )));
                    }
                    stack.push(Vec::new());
                }
                ')' => {
                    let children = stack.pop().ok_or_else(|| {
                        Error::Domain(format!(
                            "parse error at position {pos}: unmatched closing bracket"
                        ))
                    })?;
                    let node = Tree::new(children);
                    match stack.last_mut() {
                        Some(parent) => parent.push(node),
                        None => root = Some(node),
                    }
                }
                _ => {
                    return Err(Error::Domain(format!(
                        "parse error at position {pos}: expected '(' or ')', found {ch:?}"
                    )));
                }
            }
        }
        if !stack.is_empty() {
            return Err(Error::Domain(format!(
                "parse error at position {}: unclosed bracket",
                text.len()
            )));
        }
        root.ok_or_else(|| Error::Domain("parse error at position 0: empty input".into()))
    }
}

/// Guardrails for exhaustive tree enumeration.
#[derive(Debug, Clone, Copy)]
pub struct EnumLimits {
    pub max_height: usize,
    pub max_children: u32,
    /// Cap on the projected number of trees.
    pub max_count: u64,
}

impl Default for EnumLimits {
    fn default() -> Self {
        EnumLimits {
            max_height: 4,
            max_children: 3,
            max_count: 1_000_000,
        }
    }
}

/// Projected size of the space of trees of height <= h with at most b
/// children per node: c_0 = 1, c_h = sum_{j=0..=b} c_{h-1}^j.
pub fn projected_tree_count(height: usize, max_children: u32) -> f64 {
    let mut count = 1.0f64;
    for _ in 0..height {
        let mut next = 0.0;
        let mut power = 1.0;
        for _ in 0..=max_children {
            next += power;
            power *= count;
            if !next.is_finite() {
                return f64::INFINITY;
            }
        }
        count = next;
    }
    count
}

/// All trees of height <= `height` in which every node has at most
/// `max_children` children, under the default guardrails, in canonical order
/// (node count, then lexicographic on the serialization).
pub fn enumerate_trees(height: usize, max_children: u32) -> Result<Vec<Tree>> {
    enumerate_trees_with_limits(height, max_children, EnumLimits::default())
}

pub fn enumerate_trees_with_limits(
    height: usize,
    max_children: u32,
    limits: EnumLimits,
) -> Result<Vec<Tree>> {
    let projected = projected_tree_count(height, max_children);
    if height > limits.max_height
        || max_children > limits.max_children
        || projected > limits.max_count as f64
    {
        return Err(Error::EnumerationTooLarge {
            what: "trees",
            projected,
            limit: limits.max_count,
        });
    }
    let mut layer = vec![Tree::leaf()];
    for _ in 0..height {
        let mut next = vec![Tree::leaf()];
        // Cartesian products: one child list per (arity, choice of children).
        for n in 1..=max_children as usize {
            let mut idx = vec![0usize; n];
            loop {
                next.push(Tree::new(idx.iter().map(|&i| layer[i].clone()).collect()));
                let mut pos = n;
                while pos > 0 {
                    pos -= 1;
                    idx[pos] += 1;
                    if idx[pos] < layer.len() {
                        break;
                    }
                    idx[pos] = 0;
                    if pos == 0 {
                        pos = usize::MAX;
                        break;
                    }
                }
                if pos == usize::MAX {
                    break;
                }
            }
        }
        layer = next;
    }
    let mut keyed: Vec<(usize, String, Tree)> = layer
        .into_iter()
        .map(|t| (t.node_count(), t.serialize(), t))
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    Ok(keyed.into_iter().map(|(_, _, t)| t).collect())
}

/// Log-probability of `t` under the Galton-Watson measure rooted at `level`
/// with target depth `k`: every node at depth d contributes the log-mass of
/// its child count under the law at level `level + d`; nodes at level `k`
/// contribute nothing and must be leaves.
pub fn log_prob(t: &Tree, sched: &OffspringSchedule, level: usize, k: usize) -> Result<f64> {
    check_levels(sched, level, k)?;
    if t.height() > k - level {
        return Err(Error::Domain(format!(
            "tree of height {} cannot lie in a space of height {}",
            t.height(),
            k - level
        )));
    }
    let mut log = 0.0;
    let mut stack = vec![(t, level)];
    while let Some((node, l)) = stack.pop() {
        if l == k {
            continue;
        }
        let mass = sched.law(l).mass(node.children.len() as u32);
        if mass == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        log += mass.ln();
        for child in &node.children {
            stack.push((child, l + 1));
        }
    }
    Ok(log)
}

fn check_levels(sched: &OffspringSchedule, level: usize, k: usize) -> Result<()> {
    if level > k || k > sched.depth() {
        return Err(Error::Domain(format!(
            "levels (l={level}, k={k}) out of range for a schedule of depth {}",
            sched.depth()
        )));
    }
    Ok(())
}

/// Draws a tree from the unconditioned measure rooted at `level` with target
/// depth `k`. Deterministic in the seed: nodes are expanded breadth-first,
/// left to right, each consuming one uniform draw from a ChaCha8 stream.
pub fn sample_unconditioned(
    sched: &OffspringSchedule,
    level: usize,
    k: usize,
    seed: u64,
) -> Result<Tree> {
    check_levels(sched, level, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut child_lists: Vec<Vec<usize>> = vec![Vec::new()];
    let mut frontier = std::collections::VecDeque::from([(0usize, level)]);
    while let Some((node_idx, l)) = frontier.pop_front() {
        if l == k {
            continue;
        }
        let w = sched.law(l).sample(&mut rng);
        for _ in 0..w {
            let idx = child_lists.len();
            child_lists.push(Vec::new());
            child_lists[node_idx].push(idx);
            frontier.push_back((idx, l + 1));
        }
    }
    Ok(assemble(child_lists))
}

/// Rebuilds a tree from parent -> children index lists, where children always
/// carry larger indices than their parent.
pub(crate) fn assemble(child_lists: Vec<Vec<usize>>) -> Tree {
    let n = child_lists.len();
    let mut built: Vec<Option<Tree>> = (0..n).map(|_| None).collect();
    for i in (0..n).rev() {
        let children = child_lists[i]
            .iter()
            .map(|&c| {
                built[c]
                    .take()
                    .expect("children are assembled before parents")
            })
            .collect();
        built[i] = Some(Tree::new(children));
    }
    built[0].take().expect("a root always exists")
}
