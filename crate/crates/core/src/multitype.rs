//! The m-type generalization: partition the trees of a base height into m
//! classes, lift the partition level by level through counting vectors
//! (how many children of each type a node has), and condition the branching
//! measure on any class. Includes the type-probability recursion, exact
//! evaluators, samplers, the enumeration-based equivalence check, and the
//! built-in example systems.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::offspring::{
    for_each_composition, multinomial_mass, MultinomialLimits, OffspringSchedule,
};
use crate::tree::{self, EnumLimits, Tree};

type BaseClassifier = Box<dyn Fn(&Tree) -> usize + Send + Sync>;
type Membership = Box<dyn Fn(usize, usize, &[u64]) -> bool + Send + Sync>;

/// An m-type classification scheme: a total classifier on the trees of
/// height <= `k0`, plus per-level set predicates on counting vectors that
/// lift the classification to greater heights.
pub struct TypeSystem {
    name: String,
    m: usize,
    k0: usize,
    base: BaseClassifier,
    membership: Membership,
}

impl std::fmt::Debug for TypeSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TypeSystem")
            .field("name", &self.name)
            .field("m", &self.m)
            .field("k0", &self.k0)
            .finish()
    }
}

impl TypeSystem {
    /// `base` classifies trees of height <= k0 into 0..m; `membership(l, i,
    /// counts)` decides whether a counting vector at tree height l > k0
    /// belongs to type i. The membership sets must partition the reachable
    /// vectors; this is validated when a table is built.
    pub fn new(
        name: impl Into<String>,
        m: usize,
        k0: usize,
        base: BaseClassifier,
        membership: Membership,
    ) -> Result<TypeSystem> {
        if m < 2 {
            return Err(Error::InvalidSystem(format!(
                "at least two types are required, got {m}"
            )));
        }
        Ok(TypeSystem {
            name: name.into(),
            m,
            k0,
            base,
            membership,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_types(&self) -> usize {
        self.m
    }

    pub fn k0(&self) -> usize {
        self.k0
    }

    pub fn membership(&self, level: usize, ty: usize, counts: &[u64]) -> bool {
        (self.membership)(level, ty, counts)
    }
}

/// Conditioned to contain a full binary subtree reaching the target level:
/// two types over base height 1. Type 0 holds the trees whose root has at
/// least two children; lifting requires at least two type-0 children.
pub fn binary_subtree_system() -> TypeSystem {
    TypeSystem::new(
        "binary-subtree",
        2,
        1,
        Box::new(|t: &Tree| usize::from(t.children.len() < 2)),
        Box::new(|_l, ty, n: &[u64]| match ty {
            0 => n[0] >= 2,
            _ => n[0] < 2,
        }),
    )
    .expect("built-in system is valid")
}

/// Conditioned so that every node above the last two levels has at least two
/// grandchildren: three types over base height 2. Type 0: one child and at
/// least two grandchildren; type 1: at least two children and at least two
/// grandchildren; type 2: at most one grandchild.
pub fn grandchildren_system() -> TypeSystem {
    TypeSystem::new(
        "grandchildren",
        3,
        2,
        Box::new(|t: &Tree| {
            let grandchildren: usize = t.children.iter().map(|c| c.children.len()).sum();
            if grandchildren >= 2 {
                if t.children.len() == 1 {
                    0
                } else {
                    1
                }
            } else {
                2
            }
        }),
        Box::new(|_l, ty, n: &[u64]| match ty {
            0 => n == [0, 1, 0],
            1 => n[0] + n[1] >= 2,
            _ => n != [0, 1, 0] && n[0] + n[1] < 2,
        }),
    )
    .expect("built-in system is valid")
}

/// Conditioned to reach level k-1 but not level k: three types over base
/// height 2 (reaches one level but not two / reaches neither / reaches both),
/// lifted so type 0 asks for a type-0 child and no type-2 child.
pub fn height_band_system() -> TypeSystem {
    TypeSystem::new(
        "height-band",
        3,
        2,
        Box::new(|t: &Tree| match t.height() {
            1 => 0,
            0 => 1,
            _ => 2,
        }),
        Box::new(|_l, ty, n: &[u64]| match ty {
            0 => n[0] >= 1 && n[2] == 0,
            1 => n[0] == 0 && n[2] == 0,
            _ => n[2] >= 1,
        }),
    )
    .expect("built-in system is valid")
}

/// The two-type survival event lifted into the m-type machinery (base height
/// 1: reaches level 1 or not). Reproduces the survival table exactly.
pub fn survival_system() -> TypeSystem {
    TypeSystem::new(
        "survival",
        2,
        1,
        Box::new(|t: &Tree| usize::from(t.height() < 1)),
        Box::new(|_l, ty, n: &[u64]| match ty {
            0 => n[0] >= 1,
            _ => n[0] == 0,
        }),
    )
    .expect("built-in system is valid")
}

/// A built-in system by name.
pub fn builtin_system(name: &str) -> Result<TypeSystem> {
    match name {
        "binary-subtree" => Ok(binary_subtree_system()),
        "grandchildren" => Ok(grandchildren_system()),
        "height-band" => Ok(height_band_system()),
        "survival" => Ok(survival_system()),
        other => Err(Error::InvalidSystem(format!(
            "unknown system {other:?}; available: binary-subtree, grandchildren, height-band, survival"
        ))),
    }
}

/// Counting vector of `t` viewed at tree height `level`: entry i is the
/// number of children classified as type i at height level - 1.
pub fn counting_vector(system: &TypeSystem, t: &Tree, level: usize) -> Result<Vec<u64>> {
    if level <= system.k0 {
        return Err(Error::Domain(format!(
            "counting vectors are defined above the base height {}, got level {level}",
            system.k0
        )));
    }
    let mut counts = vec![0u64; system.m];
    for child in &t.children {
        counts[classify(system, child, level - 1)?] += 1;
    }
    Ok(counts)
}

/// Type of `t` viewed as an element of the trees of height <= `level`.
pub fn classify(system: &TypeSystem, t: &Tree, level: usize) -> Result<usize> {
    if level < system.k0 {
        return Err(Error::Domain(format!(
            "classification starts at the base height {}, got level {level}",
            system.k0
        )));
    }
    if t.height() > level {
        return Err(Error::Domain(format!(
            "tree of height {} is not in the space of height {level}",
            t.height()
        )));
    }
    if level == system.k0 {
        let ty = (system.base)(t);
        if ty >= system.m {
            return Err(Error::InvalidSystem(format!(
                "base classifier returned type {ty} for a {}-type system",
                system.m
            )));
        }
        return Ok(ty);
    }
    let counts = counting_vector(system, t, level)?;
    unique_type(system, level, &counts)
}

fn unique_type(system: &TypeSystem, level: usize, counts: &[u64]) -> Result<usize> {
    let mut found = None;
    for i in 0..system.m {
        if system.membership(level, i, counts) {
            if found.is_some() {
                return Err(Error::InvalidSystem(format!(
                    "counting vector {counts:?} at level {level} matches more than one type"
                )));
            }
            found = Some(i);
        }
    }
    found.ok_or_else(|| {
        Error::InvalidSystem(format!(
            "counting vector {counts:?} at level {level} matches no type"
        ))
    })
}

/// Guardrails for building type tables: the base space of height k0 is
/// enumerated exhaustively, so both the base height and the offspring
/// support feeding it are capped, and the counting-vector recursion obeys
/// the composition-enumeration caps.
#[derive(Debug, Clone, Copy)]
pub struct TypeTableLimits {
    pub max_k0: usize,
    pub max_base_support: u32,
    pub max_base_trees: u64,
    pub multinomial: MultinomialLimits,
}

impl Default for TypeTableLimits {
    fn default() -> Self {
        TypeTableLimits {
            max_k0: 2,
            max_base_support: 4,
            max_base_trees: 200_000,
            multinomial: MultinomialLimits::default(),
        }
    }
}

/// One base atom: a tree of the base space with its exact mass and type.
#[derive(Debug, Clone)]
struct BaseAtom {
    tree: Tree,
    mass: f64,
    ty: usize,
}

/// Conditioned law of the counting vector given membership in one type's
/// set; atoms are normalized. Empty when the type has probability zero.
#[derive(Debug, Clone, Default)]
struct TypedChildLaw {
    atoms: Vec<(Vec<u64>, f64)>,
}

/// Type probabilities p[l][i] for l = 0..=k-k0 plus the cached conditioned
/// laws needed for sampling and exact evaluation.
pub struct TypeProbTable {
    k: usize,
    system: TypeSystem,
    sched: OffspringSchedule,
    rows: Vec<Vec<f64>>,
    base_atoms: Vec<BaseAtom>,
    base_index: HashMap<String, usize>,
    base_by_type: Vec<Vec<(usize, f64)>>,
    typed_laws: Vec<Vec<TypedChildLaw>>,
}

impl std::fmt::Debug for TypeProbTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TypeProbTable")
            .field("k", &self.k)
            .field("system", &self.system)
            .field("rows", &self.rows)
            .finish()
    }
}

/// Builds the table under the default guardrails.
pub fn build_type_table(
    system: TypeSystem,
    sched: &OffspringSchedule,
    k: usize,
) -> Result<TypeProbTable> {
    build_type_table_with_limits(system, sched, k, TypeTableLimits::default())
}

pub fn build_type_table_with_limits(
    system: TypeSystem,
    sched: &OffspringSchedule,
    k: usize,
    limits: TypeTableLimits,
) -> Result<TypeProbTable> {
    let k0 = system.k0;
    let m = system.m;
    if k <= k0 {
        return Err(Error::Domain(format!(
            "target level {k} must exceed the base height {k0}"
        )));
    }
    if k > sched.depth() {
        return Err(Error::Domain(format!(
            "target level {k} exceeds schedule depth {}",
            sched.depth()
        )));
    }
    if k0 > limits.max_k0 {
        return Err(Error::EnumerationTooLarge {
            what: "base tree space",
            projected: tree::projected_tree_count(k0, sched.max_support()),
            limit: limits.max_base_trees,
        });
    }
    if m > limits.multinomial.max_types || sched.max_support() > limits.multinomial.max_count {
        return Err(Error::EnumerationTooLarge {
            what: "multinomial compositions",
            projected: f64::from(sched.max_support()),
            limit: u64::from(limits.multinomial.max_count),
        });
    }
    // The base row enumerates every tree the levels k-k0..k can produce.
    let base_support = (k - k0..k)
        .map(|l| sched.law(l).max_value())
        .max()
        .unwrap_or(0);
    if base_support > limits.max_base_support {
        return Err(Error::EnumerationTooLarge {
            what: "base tree space",
            projected: tree::projected_tree_count(k0, base_support),
            limit: limits.max_base_trees,
        });
    }
    let enum_limits = EnumLimits {
        max_height: k0,
        max_children: base_support,
        max_count: limits.max_base_trees,
    };
    let base_trees = tree::enumerate_trees_with_limits(k0, base_support, enum_limits)?;

    // Partition validation over every counting vector the schedule can reach.
    for row_l in 0..k - k0 {
        let level = k - row_l;
        let max_n = sched.law(row_l).max_value();
        let mut bad: Option<Error> = None;
        for n in 0..=max_n {
            for_each_composition(n, m, &mut |counts| {
                if bad.is_none() {
                    if let Err(e) = unique_type(&system, level, counts) {
                        bad = Some(e);
                    }
                }
            });
        }
        if let Some(e) = bad {
            return Err(e);
        }
    }

    let mut base_atoms = Vec::with_capacity(base_trees.len());
    let mut base_row = vec![0.0; m];
    for t in base_trees {
        let mass = tree::log_prob(&t, sched, k - k0, k)?.exp();
        let ty = classify(&system, &t, k0)?;
        base_row[ty] += mass;
        base_atoms.push(BaseAtom { tree: t, mass, ty });
    }
    let base_index = base_atoms
        .iter()
        .enumerate()
        .map(|(i, a)| (a.tree.serialize(), i))
        .collect();
    let mut base_by_type = vec![Vec::new(); m];
    for (idx, atom) in base_atoms.iter().enumerate() {
        if atom.mass > 0.0 {
            base_by_type[atom.ty].push((idx, atom.mass / base_row[atom.ty]));
        }
    }

    // Downward recursion through the counting-vector laws.
    let mut rows = vec![vec![0.0; m]; k - k0 + 1];
    rows[k - k0] = base_row;
    let mut typed_laws: Vec<Vec<TypedChildLaw>> = Vec::with_capacity(k - k0);
    for l in (0..k - k0).rev() {
        let q = rows[l + 1].clone();
        let level = k - l;
        let mut laws: Vec<TypedChildLaw> = (0..m).map(|_| TypedChildLaw::default()).collect();
        for (n, w_mass) in sched.law(l).iter() {
            for_each_composition(n, m, &mut |counts| {
                let mass = w_mass * multinomial_mass(counts, &q);
                if mass > 0.0 {
                    for (i, law) in laws.iter_mut().enumerate() {
                        if system.membership(level, i, counts) {
                            law.atoms.push((counts.to_vec(), mass));
                            break;
                        }
                    }
                }
            });
        }
        for (i, law) in laws.iter_mut().enumerate() {
            let total: f64 = law.atoms.iter().map(|(_, v)| v).sum();
            rows[l][i] = total;
            if total > 0.0 {
                for (_, v) in &mut law.atoms {
                    *v /= total;
                }
            }
        }
        typed_laws.push(laws);
    }
    typed_laws.reverse();

    Ok(TypeProbTable {
        k,
        system,
        sched: sched.clone(),
        rows,
        base_atoms,
        base_index,
        base_by_type,
        typed_laws,
    })
}

impl TypeProbTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn k0(&self) -> usize {
        self.system.k0
    }

    pub fn num_types(&self) -> usize {
        self.system.m
    }

    pub fn system(&self) -> &TypeSystem {
        &self.system
    }

    /// p[l][i] = P(a tree rooted at level l is of type i); rows are indexed
    /// l = 0..=k-k0 and sum to one.
    pub fn prob(&self, l: usize, ty: usize) -> f64 {
        self.rows[l][ty]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    fn check_args(&self, l: usize, ty: usize) -> Result<()> {
        if l > self.k - self.system.k0 {
            return Err(Error::Domain(format!(
                "level {l} exceeds k - k0 = {}",
                self.k - self.system.k0
            )));
        }
        if ty >= self.system.m {
            return Err(Error::Domain(format!(
                "type {ty} out of range for {} types",
                self.system.m
            )));
        }
        Ok(())
    }
}

/// Draws a tree from the measure conditioned on type `ty` at level `l`.
/// At the base boundary the draw is a base atom; above it the counting
/// vector is drawn from its conditioned law and the typed children are
/// arranged uniformly at random. Deterministic per seed (breadth-first
/// expansion).
pub fn sample_type(table: &TypeProbTable, l: usize, ty: usize, seed: u64) -> Result<Tree> {
    table.check_args(l, ty)?;
    if table.rows[l][ty] == 0.0 {
        return Err(Error::ImpossibleConditioning(format!(
            "type {ty} at level {l} has probability zero"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let boundary = table.k - table.system.k0;

    enum Slot {
        Pending(Vec<usize>),
        Fixed(Tree),
    }
    let mut slots: Vec<Slot> = vec![Slot::Pending(Vec::new())];
    let mut frontier = std::collections::VecDeque::from([(0usize, l, ty)]);
    while let Some((slot_idx, l, ty)) = frontier.pop_front() {
        if l == boundary {
            let choices = &table.base_by_type[ty];
            if choices.is_empty() {
                return Err(Error::ImpossibleConditioning(format!(
                    "type {ty} at the base boundary has probability zero"
                )));
            }
            let u: f64 = rng.random();
            let mut cum = 0.0;
            let mut pick = choices[choices.len() - 1].0;
            for &(atom_idx, p) in choices {
                cum += p;
                if u < cum {
                    pick = atom_idx;
                    break;
                }
            }
            slots[slot_idx] = Slot::Fixed(table.base_atoms[pick].tree.clone());
            continue;
        }
        let law = &table.typed_laws[l][ty];
        if law.atoms.is_empty() {
            return Err(Error::ImpossibleConditioning(format!(
                "type {ty} at level {l} has probability zero"
            )));
        }
        let u: f64 = rng.random();
        let mut cum = 0.0;
        let mut counts = &law.atoms[law.atoms.len() - 1].0;
        for (c, p) in &law.atoms {
            cum += p;
            if u < cum {
                counts = c;
                break;
            }
        }
        // A uniformly random permutation of the multiset of child types.
        let mut labels: Vec<usize> = Vec::new();
        for (j, &c) in counts.iter().enumerate() {
            labels.extend(std::iter::repeat_n(j, c as usize));
        }
        labels.shuffle(&mut rng);
        for child_ty in labels {
            let idx = slots.len();
            slots.push(Slot::Pending(Vec::new()));
            if let Slot::Pending(children) = &mut slots[slot_idx] {
                children.push(idx);
            }
            frontier.push_back((idx, l + 1, child_ty));
        }
    }
    // Assemble children before parents (children always have larger indices).
    let n = slots.len();
    let mut built: Vec<Option<Tree>> = (0..n).map(|_| None).collect();
    for i in (0..n).rev() {
        let tree = match std::mem::replace(&mut slots[i], Slot::Pending(Vec::new())) {
            Slot::Fixed(t) => t,
            Slot::Pending(children) => Tree::new(
                children
                    .iter()
                    .map(|&c| built[c].take().expect("child assembled"))
                    .collect(),
            ),
        };
        built[i] = Some(tree);
    }
    Ok(built[0].take().expect("root exists"))
}

/// Exact log-mass of `t` under the type-conditioned measure; `NEG_INFINITY`
/// off the support (in particular when `t` is not of type `ty`).
pub fn log_mass_type(table: &TypeProbTable, l: usize, ty: usize, t: &Tree) -> Result<f64> {
    table.check_args(l, ty)?;
    if table.rows[l][ty] == 0.0 {
        return Err(Error::ImpossibleConditioning(format!(
            "type {ty} at level {l} has probability zero"
        )));
    }
    if t.height() > table.k - l {
        return Err(Error::Domain(format!(
            "tree of height {} cannot lie in a space of height {}",
            t.height(),
            table.k - l
        )));
    }
    log_q_type_rec(table, l, ty, t)
}

fn log_q_type_rec(table: &TypeProbTable, l: usize, ty: usize, t: &Tree) -> Result<f64> {
    let boundary = table.k - table.system.k0;
    if classify(&table.system, t, table.k - l)? != ty {
        return Ok(f64::NEG_INFINITY);
    }
    let p_type = table.rows[l][ty];
    if p_type == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if l == boundary {
        let mass = match table.base_index.get(&t.serialize()) {
            Some(&idx) => table.base_atoms[idx].mass,
            None => 0.0,
        };
        return Ok(if mass > 0.0 {
            mass.ln() - p_type.ln()
        } else {
            f64::NEG_INFINITY
        });
    }
    // Q(T) = mu(n) prod_j q_j^{N_j} / p_type * prod over children; the
    // uniform-arrangement count cancels against the multinomial coefficient.
    let n = t.children.len() as u32;
    let w_mass = table.sched.law(l).mass(n);
    if w_mass == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let mut log = w_mass.ln() - p_type.ln();
    let q = &table.rows[l + 1];
    for child in &t.children {
        let child_ty = classify(&table.system, child, table.k - l - 1)?;
        if q[child_ty] == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        log += q[child_ty].ln();
        let child_log = log_q_type_rec(table, l + 1, child_ty, child)?;
        if child_log == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        log += child_log;
    }
    Ok(log)
}

/// Total-variation distance between the unconditioned measure and the
/// type-mixture over the fully enumerated space; zero (to rounding) by the
/// m-type equivalence theorem.
pub fn check_equivalence_multitype(
    system: TypeSystem,
    sched: &OffspringSchedule,
    k: usize,
    max_children: u32,
) -> Result<f64> {
    let table = build_type_table(system, sched, k)?;
    check_equivalence_with_type_table(&table, max_children).map(|r| r.tv_distance)
}

pub fn check_equivalence_with_type_table(
    table: &TypeProbTable,
    max_children: u32,
) -> Result<crate::survival::EquivalenceReport> {
    let sched = &table.sched;
    if sched.max_support() > max_children {
        return Err(Error::Domain(format!(
            "schedule support {} exceeds enumeration bound {max_children}",
            sched.max_support()
        )));
    }
    let trees = tree::enumerate_trees(table.k, max_children)?;
    let mut tv = 0.0;
    let mut pointwise = 0.0f64;
    for t in &trees {
        let exact = tree::log_prob(t, sched, 0, table.k)?.exp();
        let ty = classify(&table.system, t, table.k)?;
        let mixed = if table.rows[0][ty] > 0.0 {
            table.rows[0][ty] * log_mass_type(table, 0, ty, t)?.exp()
        } else {
            0.0
        };
        tv += (exact - mixed).abs();
        pointwise = pointwise.max((exact - mixed).abs());
    }
    Ok(crate::survival::EquivalenceReport {
        tv_distance: tv / 2.0,
        pointwise_max: pointwise,
        atoms: trees.len(),
    })
}
