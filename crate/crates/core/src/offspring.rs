//! Offspring laws and the conditional laws of (total children, surviving
//! children) used by the two-type and m-type constructions.
//!
//! All laws have finite support; infinite-support inputs (Poisson) are
//! truncated at a configurable tail mass and renormalized, so every
//! downstream sum is exact over a finite support.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};

/// Default tail mass at which infinite-support laws are truncated.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// A finite-support probability mass function on the nonnegative integers.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    support: Vec<u32>,
    probs: Vec<f64>,
}

impl Pmf {
    /// Normalizes positive weights into a distribution. Keys with zero weight
    /// are dropped; a negative, non-finite or all-zero weight set is rejected.
    pub fn from_weights(weights: &BTreeMap<u32, f64>) -> Result<Pmf> {
        let mut support = Vec::new();
        let mut probs = Vec::new();
        let mut total = 0.0;
        for (&n, &w) in weights {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "weight {w} for count {n} is negative or not finite"
                )));
            }
            if w > 0.0 {
                support.push(n);
                probs.push(w);
                total += w;
            }
        }
        if support.is_empty() {
            return Err(Error::InvalidDistribution(
                "no strictly positive weight".into(),
            ));
        }
        for p in &mut probs {
            *p /= total;
        }
        Ok(Pmf { support, probs })
    }

    /// Point mass at `n`.
    pub fn point_mass(n: u32) -> Pmf {
        Pmf {
            support: vec![n],
            probs: vec![1.0],
        }
    }

    /// Poisson(mu) truncated at the smallest N with tail mass below
    /// `tail_tol`, then renormalized over `0..=N`.
    pub fn poisson(mu: f64, tail_tol: f64) -> Result<Pmf> {
        if !(mu > 0.0) {
            return Err(Error::Domain(format!(
                "poisson mean must be positive, got {mu}"
            )));
        }
        if !(tail_tol > 0.0 && tail_tol < 1e-6) {
            return Err(Error::Domain(format!(
                "tail tolerance must lie in (0, 1e-6), got {tail_tol}"
            )));
        }
        let mut probs = Vec::new();
        let mut mass = (-mu).exp();
        if mass == 0.0 {
            return Err(Error::Domain(format!(
                "poisson mean {mu} too large: P(0) underflows"
            )));
        }
        let mut cum = 0.0;
        let mut n = 0u32;
        loop {
            probs.push(mass);
            cum += mass;
            if 1.0 - cum < tail_tol {
                break;
            }
            n += 1;
            mass *= mu / f64::from(n);
        }
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        Ok(Pmf {
            support: (0..=n).collect(),
            probs,
        })
    }

    pub fn support(&self) -> &[u32] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// P(W = n); zero off the support.
    pub fn mass(&self, n: u32) -> f64 {
        match self.support.binary_search(&n) {
            Ok(i) => self.probs[i],
            Err(_) => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(n, p)| f64::from(n) * p).sum()
    }

    /// Largest value in the support.
    pub fn max_value(&self) -> u32 {
        *self.support.last().expect("support is never empty")
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    /// Inverse-CDF draw; consumes one uniform variate from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        for (n, p) in self.iter() {
            cum += p;
            if u < cum {
                return n;
            }
        }
        self.max_value()
    }
}

/// The family of per-level offspring laws for trees of depth `k`: `law(l)`
/// governs the number of children of a node at level `l`, for `l < k`.
#[derive(Debug, Clone)]
pub struct OffspringSchedule {
    laws: Vec<Pmf>,
}

impl OffspringSchedule {
    /// A schedule with one law per level; the depth is `laws.len()`.
    pub fn from_laws(laws: Vec<Pmf>) -> Result<OffspringSchedule> {
        if laws.is_empty() {
            return Err(Error::Domain("schedule needs at least one level".into()));
        }
        Ok(OffspringSchedule { laws })
    }

    /// The same law at every level `0..k`.
    pub fn uniform(law: Pmf, k: usize) -> Result<OffspringSchedule> {
        if k == 0 {
            return Err(Error::Domain("schedule needs at least one level".into()));
        }
        OffspringSchedule::from_laws(vec![law; k])
    }

    /// Depth `k`: laws exist for levels `0..k`.
    pub fn depth(&self) -> usize {
        self.laws.len()
    }

    pub fn law(&self, level: usize) -> &Pmf {
        &self.laws[level]
    }

    /// Largest child count with positive mass at any level.
    pub fn max_support(&self) -> u32 {
        self.laws.iter().map(Pmf::max_value).max().unwrap_or(0)
    }
}

/// Joint law of (W, X) where W is the number of children and
/// X | W ~ Bin(W, p) counts the surviving ones. Entries are kept sorted by
/// (n, m) with m <= n.
#[derive(Debug, Clone)]
pub struct JointWx {
    entries: Vec<(u32, u32, f64)>,
}

/// One row of binomial masses P(Bin(n, p) = m), m = 0..=n, built with the
/// stable multiplicative recurrence; falls back to log space if the first
/// term underflows.
fn binomial_row(n: u32, p: f64) -> Vec<f64> {
    let n_us = n as usize;
    if p == 0.0 {
        let mut row = vec![0.0; n_us + 1];
        row[0] = 1.0;
        return row;
    }
    if p == 1.0 {
        let mut row = vec![0.0; n_us + 1];
        row[n_us] = 1.0;
        return row;
    }
    let q = 1.0 - p;
    let mut row = Vec::with_capacity(n_us + 1);
    let b0 = q.powi(n as i32);
    if b0 > 0.0 {
        let ratio = p / q;
        let mut b = b0;
        for m in 0..=n {
            row.push(b);
            if m < n {
                b *= ratio * f64::from(n - m) / f64::from(m + 1);
            }
        }
    } else {
        // q^n underflowed; evaluate each mass in log space.
        let mut ln_fact = vec![0.0f64; n_us + 1];
        for i in 1..=n_us {
            ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
        }
        for m in 0..=n_us {
            let ln = ln_fact[n_us] - ln_fact[m] - ln_fact[n_us - m]
                + m as f64 * p.ln()
                + (n_us - m) as f64 * q.ln();
            row.push(ln.exp());
        }
    }
    row
}

impl JointWx {
    /// Joint law with entry(n, m) = pmf(n) * C(n, m) p^m (1-p)^(n-m).
    pub fn from_pmf(pmf: &Pmf, p: f64) -> Result<JointWx> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!(
                "survival probability must lie in [0, 1], got {p}"
            )));
        }
        let mut entries = Vec::new();
        for (n, w_mass) in pmf.iter() {
            for (m, b) in binomial_row(n, p).into_iter().enumerate() {
                entries.push((n, m as u32, w_mass * b));
            }
        }
        Ok(JointWx { entries })
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.entries.iter().copied()
    }

    /// P(W = n, X = m); zero off the support.
    pub fn mass(&self, n: u32, m: u32) -> f64 {
        self.entries
            .binary_search_by_key(&(n, m), |&(a, b, _)| (a, b))
            .map(|i| self.entries[i].2)
            .unwrap_or(0.0)
    }

    /// P(X = 0), summed directly so an impossible event is an exact zero.
    pub fn prob_x_zero(&self) -> f64 {
        self.iter()
            .filter(|&(_, m, _)| m == 0)
            .map(|(_, _, v)| v)
            .sum()
    }

    /// P(X >= 1), summed directly.
    pub fn prob_x_at_least_one(&self) -> f64 {
        self.iter()
            .filter(|&(_, m, _)| m >= 1)
            .map(|(_, _, v)| v)
            .sum()
    }

    /// Marginal law of W.
    pub fn marginal_w(&self) -> Pmf {
        let mut weights = BTreeMap::new();
        for (n, _, v) in self.iter() {
            *weights.entry(n).or_insert(0.0) += v;
        }
        Pmf::from_weights(&weights).expect("marginal of a joint law is a distribution")
    }

    /// Law of W conditioned on X = 0.
    pub fn given_x_zero(&self) -> Result<Pmf> {
        let total = self.prob_x_zero();
        if total == 0.0 {
            return Err(Error::ImpossibleConditioning(
                "P(X = 0) is zero: every tree at this level survives".into(),
            ));
        }
        let mut weights = BTreeMap::new();
        for (n, m, v) in self.iter() {
            if m == 0 && v > 0.0 {
                *weights.entry(n).or_insert(0.0) += v;
            }
        }
        Pmf::from_weights(&weights)
    }

    /// Joint law of (W, X) conditioned on X >= 1.
    pub fn given_x_at_least_one(&self) -> Result<JointWx> {
        let total = self.prob_x_at_least_one();
        if total == 0.0 {
            return Err(Error::ImpossibleConditioning(
                "P(X >= 1) is zero: survival from this level is impossible".into(),
            ));
        }
        let entries = self
            .iter()
            .filter(|&(_, m, _)| m >= 1)
            .map(|(n, m, v)| (n, m, v / total))
            .collect();
        Ok(JointWx { entries })
    }
}

/// E[W | X = 0] for X | W ~ Bin(W, p), W ~ pmf.
pub fn expect_w_given_x0(pmf: &Pmf, p: f64) -> Result<f64> {
    let joint = JointWx::from_pmf(pmf, p)?;
    let total = joint.prob_x_zero();
    if total == 0.0 {
        return Err(Error::ImpossibleConditioning("P(X = 0) is zero".into()));
    }
    let num: f64 = joint
        .iter()
        .filter(|&(_, m, _)| m == 0)
        .map(|(n, _, v)| f64::from(n) * v)
        .sum();
    Ok(num / total)
}

/// E[W | X >= 1] for X | W ~ Bin(W, p), W ~ pmf.
pub fn expect_w_given_xge1(pmf: &Pmf, p: f64) -> Result<f64> {
    let joint = JointWx::from_pmf(pmf, p)?;
    let total = joint.prob_x_at_least_one();
    if total == 0.0 {
        return Err(Error::ImpossibleConditioning("P(X >= 1) is zero".into()));
    }
    let num: f64 = joint
        .iter()
        .filter(|&(_, m, _)| m >= 1)
        .map(|(n, _, v)| f64::from(n) * v)
        .sum();
    Ok(num / total)
}

/// E[(W - X) / (1 + X) | X >= 1]: the expected number of dead ends a searcher
/// tries before the first surviving child.
pub fn expect_deadend_ratio(pmf: &Pmf, p: f64) -> Result<f64> {
    let joint = JointWx::from_pmf(pmf, p)?;
    let total = joint.prob_x_at_least_one();
    if total == 0.0 {
        return Err(Error::ImpossibleConditioning("P(X >= 1) is zero".into()));
    }
    let num: f64 = joint
        .iter()
        .filter(|&(_, m, _)| m >= 1)
        .map(|(n, m, v)| f64::from(n - m) / f64::from(1 + m) * v)
        .sum();
    Ok(num / total)
}

/// Caps for the composition enumeration behind [`multinomial_event_prob`].
#[derive(Debug, Clone, Copy)]
pub struct MultinomialLimits {
    pub max_types: usize,
    pub max_count: u32,
}

impl Default for MultinomialLimits {
    fn default() -> Self {
        MultinomialLimits {
            max_types: 6,
            max_count: 64,
        }
    }
}

/// Exact factorial as f64; valid through 170!.
fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Number of arrangements of a multiset with the given counts:
/// (sum N_i)! / prod N_i!. Uses log space once the total exceeds 170.
pub fn multinomial_coeff(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total <= 170 {
        let mut v = factorial(total as u32);
        for &c in counts {
            v /= factorial(c as u32);
        }
        v
    } else {
        let ln_fact = |n: u64| -> f64 { (1..=n).map(|i| (i as f64).ln()).sum() };
        let mut ln = ln_fact(total);
        for &c in counts {
            ln -= ln_fact(c);
        }
        ln.exp()
    }
}

/// Visits every composition of `n` into `m` nonnegative parts.
pub(crate) fn for_each_composition<F: FnMut(&[u64])>(n: u32, m: usize, f: &mut F) {
    let mut parts = vec![0u64; m];
    fn rec<F: FnMut(&[u64])>(parts: &mut [u64], idx: usize, rest: u64, f: &mut F) {
        if idx + 1 == parts.len() {
            parts[idx] = rest;
            f(parts);
            return;
        }
        for v in 0..=rest {
            parts[idx] = v;
            rec(parts, idx + 1, rest - v, f);
        }
    }
    if m == 0 {
        if n == 0 {
            f(&[]);
        }
        return;
    }
    rec(&mut parts, 0, u64::from(n), f);
}

/// Multinomial mass P(Multi(n, q) = counts) with sum(counts) = n.
pub(crate) fn multinomial_mass(counts: &[u64], q: &[f64]) -> f64 {
    let mut v = multinomial_coeff(counts);
    for (&c, &qi) in counts.iter().zip(q) {
        if c > 0 {
            v *= qi.powi(c as i32);
        }
    }
    v
}

/// P(Multi(W, q) in B) for W ~ pmf: the probability that the vector of typed
/// children falls in the event `B`, enumerating all compositions.
pub fn multinomial_event_prob<B>(pmf: &Pmf, q: &[f64], in_event: B) -> Result<f64>
where
    B: Fn(&[u64]) -> bool,
{
    multinomial_event_prob_with_limits(pmf, q, in_event, MultinomialLimits::default())
}

pub fn multinomial_event_prob_with_limits<B>(
    pmf: &Pmf,
    q: &[f64],
    in_event: B,
    limits: MultinomialLimits,
) -> Result<f64>
where
    B: Fn(&[u64]) -> bool,
{
    let m = q.len();
    if m == 0 || m > limits.max_types {
        return Err(Error::Domain(format!(
            "number of types {m} outside 1..={}",
            limits.max_types
        )));
    }
    let sum: f64 = q.iter().sum();
    if q.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "type probabilities must be a probability vector, got sum {sum}"
        )));
    }
    if pmf.max_value() > limits.max_count {
        return Err(Error::EnumerationTooLarge {
            what: "multinomial compositions",
            projected: f64::from(pmf.max_value()),
            limit: u64::from(limits.max_count),
        });
    }
    let mut total = 0.0;
    for (n, w_mass) in pmf.iter() {
        let mut event_mass = 0.0;
        for_each_composition(n, m, &mut |counts| {
            if in_event(counts) {
                event_mass += multinomial_mass(counts, q);
            }
        });
        total += w_mass * event_mass;
    }
    Ok(total)
}
