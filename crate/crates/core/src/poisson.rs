//! Closed-form analysis for level-independent Poisson offspring: the
//! survival recursion and conditional moments in closed form, the resulting
//! cost tables, asymptotic reference curves, offspring-mean optimization,
//! the infinite-tree cost with its fixed-point survival probability, and the
//! Lambert W lower branch used by the closed-form optimal mean in the
//! double limit of deep trees and expensive inspection.

use crate::cost::{build_cost_from_parts, CostTable};
use crate::error::{Error, Result};

/// Survival probabilities p[l], l = 0..=k, for Poisson(mu) offspring at
/// every level: p[k] = 1 and p[l] = 1 - exp(-mu p[l+1]).
pub fn poisson_survival(mu: f64, k: usize) -> Result<Vec<f64>> {
    if !(mu > 0.0) {
        return Err(Error::Domain(format!(
            "offspring mean must be positive, got {mu}"
        )));
    }
    let mut p = vec![1.0; k + 1];
    for l in (0..k).rev() {
        p[l] = -(-mu * p[l + 1]).exp_m1();
    }
    Ok(p)
}

/// Cost table for Poisson(mu) offspring built from the closed-form
/// conditional moments instead of enumerated joint laws:
///   E[W | X = 0]            = mu (1 - p')
///   E[W | X >= 1]           = (mu - mu (1 - p')(1 - p)) / p
///   E[(W-X)/(1+X) | X >= 1] = (1 - p')/p' - mu (1 - p')(1 - p)/p
/// with p = p[l], p' = p[l+1].
pub fn poisson_cost(mu: f64, k: usize, price: f64) -> Result<CostTable> {
    if !(mu > 0.0) {
        return Err(Error::Domain(format!(
            "offspring mean must be positive, got {mu}"
        )));
    }
    if !(price >= 0.0) {
        return Err(Error::Domain(format!(
            "inspection price must be nonnegative, got {price}"
        )));
    }
    let p = poisson_survival(mu, k)?;
    if k > 0 && p[0] == 0.0 {
        return Err(Error::ImpossibleSearch(format!(
            "survival probability underflows to zero for mu = {mu}, k = {k}; \
             the expected cost exceeds the floating-point range"
        )));
    }
    let extinct = |l: usize| (-mu * p[l + 1]).exp();
    build_cost_from_parts(
        k,
        price,
        p.clone(),
        extinct,
        |l| Ok(mu * (1.0 - p[l + 1])),
        |l| Ok((mu - mu * (1.0 - p[l + 1]) * (1.0 - p[l])) / p[l]),
        |l| {
            let pp = p[l + 1];
            Ok((1.0 - pp) / pp - mu * (1.0 - pp) * (1.0 - p[l]) / p[l])
        },
    )
}

/// Outcome of a scalar minimization over the offspring mean.
#[derive(Debug, Clone, Copy)]
pub struct OptimizeResult {
    pub mu_opt: f64,
    pub cost_opt: f64,
    /// True when the minimum sits on an edge of the search bracket.
    pub at_boundary: bool,
}

pub const DEFAULT_BRACKET: (f64, f64) = (0.05, 100.0);
pub const DEFAULT_TOL: f64 = 1e-4;

/// Minimizes the total search cost over the offspring mean: a 64-point
/// log-spaced scan locates the pocket, golden-section refines it to `tol`.
/// Means whose cost is not representable are skipped.
pub fn optimize_mu(k: usize, price: f64, bracket: (f64, f64), tol: f64) -> Result<OptimizeResult> {
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Domain(format!("invalid bracket ({lo}, {hi})")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let objective = |mu: f64| -> f64 {
        match poisson_cost(mu, k, price) {
            Ok(table) if table.total().is_finite() => table.total(),
            _ => f64::INFINITY,
        }
    };
    const SCAN: usize = 64;
    let ratio = (hi / lo).ln() / (SCAN - 1) as f64;
    let grid: Vec<f64> = (0..SCAN).map(|i| lo * (ratio * i as f64).exp()).collect();
    let mut best = 0;
    let mut best_cost = f64::INFINITY;
    for (i, &mu) in grid.iter().enumerate() {
        let c = objective(mu);
        if c < best_cost {
            best_cost = c;
            best = i;
        }
    }
    if !best_cost.is_finite() {
        return Err(Error::ImpossibleSearch(
            "no representable cost anywhere in the bracket".into(),
        ));
    }
    let at_boundary = best == 0 || best == SCAN - 1;
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(SCAN - 1)];
    let (mu_opt, cost_opt) = golden_section(objective, a, b, tol);
    Ok(OptimizeResult {
        mu_opt,
        cost_opt,
        at_boundary,
    })
}

/// Golden-section minimization on [a, b] to width `tol`; assumes the pocket
/// found by the coarse scan is unimodal.
fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - (b - a) * INV_PHI;
    let mut x2 = a + (b - a) * INV_PHI;
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - (b - a) * INV_PHI;
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + (b - a) * INV_PHI;
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (a + b);
    (mid, f(mid))
}

/// Largest fixed point of p = 1 - exp(-p mu): the survival probability of
/// the infinite tree. Zero for mu <= 1. Fixed-point iteration from p = 1
/// (so the nontrivial root is found), polished by Newton steps on
/// g(p) = p + expm1(-mu p).
pub fn infinite_survival(mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::Domain(format!(
            "offspring mean must be positive, got {mu}"
        )));
    }
    if mu <= 1.0 {
        return Ok(0.0);
    }
    let mut p = 1.0f64;
    for _ in 0..10_000 {
        let next = -(-mu * p).exp_m1();
        if (next - p).abs() < 1e-9 {
            p = next;
            break;
        }
        p = next;
    }
    // Newton: g(p) = p + expm1(-mu p), g'(p) = 1 - mu exp(-mu p); the slope
    // is bounded away from zero at the supercritical root.
    for _ in 0..50 {
        let g = p + (-mu * p).exp_m1();
        let slope = 1.0 - mu * (-mu * p).exp();
        if slope <= 0.0 {
            break;
        }
        let next = p - g / slope;
        if (next - p).abs() <= 1e-16 * p.abs() {
            p = next;
            break;
        }
        p = next;
    }
    Ok(p)
}

/// Expected costs in the infinite tree for supercritical mean `mu`.
#[derive(Debug, Clone, Copy)]
pub struct InfiniteTreeResult {
    pub mu: f64,
    pub price: f64,
    /// Fixed-point survival probability.
    pub p: f64,
    /// Expected cost of fully exploring an unsuccessful subtree.
    pub unsuccessful_cost: f64,
    /// Expected cost to move the searcher one successful step deeper.
    pub cost_per_step: f64,
}

/// Expected cost per successful step in the infinite tree:
/// C = 1 + price E[W | X >= 1] + E_unsucc E[(W-X)/(1+X) | X >= 1], which
/// collapses to (price mu + 1)/p. Verifies the collapse internally.
pub fn infinite_cost(mu: f64, price: f64) -> Result<InfiniteTreeResult> {
    if !(mu > 1.0) {
        return Err(Error::Domain(format!(
            "the infinite tree needs a supercritical mean, got {mu}"
        )));
    }
    if !(price >= 0.0) {
        return Err(Error::Domain(format!(
            "inspection price must be nonnegative, got {price}"
        )));
    }
    let p = infinite_survival(mu)?;
    let q = 1.0 - p;
    // mu q < 1 at the supercritical root, so the unsuccessful cost is finite.
    let unsuccessful = (1.0 + price * mu * q) / (1.0 - mu * q);
    let mean_survive = (mu - mu * q * q) / p;
    let deadend = (q - mu * q * q) / p;
    let long_form = 1.0 + price * mean_survive + unsuccessful * deadend;
    let short_form = (price * mu + 1.0) / p;
    debug_assert!(
        (long_form - short_form).abs() <= 1e-9 * short_form.abs(),
        "cost expressions diverged: {long_form} vs {short_form}"
    );
    Ok(InfiniteTreeResult {
        mu,
        price,
        p,
        unsuccessful_cost: unsuccessful,
        cost_per_step: long_form,
    })
}

/// The infinite-tree cost written in the survival probability alone:
/// (-price ln(1-p) + p) / p^2, using mu = -ln(1-p)/p at the fixed point.
pub fn infinite_cost_from_p(p: f64, price: f64) -> Result<f64> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::Domain(format!(
            "survival probability must lie in (0, 1), got {p}"
        )));
    }
    Ok((-price * (1.0 - p).ln() + p) / (p * p))
}

/// Lower real branch of the Lambert W function: the solution w <= -1 of
/// w e^w = x for x in [-1/e, 0). Branch-point series near -1/e, the
/// log-asymptotic guess elsewhere, then bracketed Halley iteration.
pub fn lambert_w_minus1(x: f64) -> Result<f64> {
    let branch_point = -(-1.0f64).exp();
    if !(x >= branch_point && x < 0.0) {
        return Err(Error::Domain(format!(
            "lower Lambert branch needs x in [-1/e, 0), got {x}"
        )));
    }
    // eta = sqrt(2 (1 + e x)) vanishes at the branch point.
    let eta = (2.0 * (1.0 + std::f64::consts::E * x)).max(0.0).sqrt();
    let mut w = if eta < 1e-3 {
        // Series about the branch point; accurate to O(eta^4) here.
        -1.0 - eta - eta * eta / 3.0 - 11.0 / 72.0 * eta * eta * eta
    } else {
        let l1 = (-x).ln();
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1
    };
    if eta == 0.0 {
        return Ok(-1.0);
    }
    w = w.min(-1.0);
    // g(w) = w e^w decreases from 0- to -1/e on (-inf, -1], so x brackets
    // between w_lo (very negative) and -1.
    let (mut lo, mut hi) = (f64::NEG_INFINITY, -1.0f64);
    for _ in 0..100 {
        let ew = w.exp();
        let g = w * ew - x;
        if g == 0.0 {
            break;
        }
        if g > 0.0 {
            // w e^w > x means w is too far left.
            lo = lo.max(w);
        } else {
            hi = hi.min(w);
        }
        let gp = ew * (w + 1.0);
        let gpp = ew * (w + 2.0);
        let halley = w - g * gp / (gp * gp - 0.5 * g * gpp);
        w = if halley.is_finite() && halley < hi && (lo.is_infinite() || halley > lo) {
            halley
        } else if lo.is_infinite() {
            2.0 * w
        } else {
            0.5 * (lo + hi)
        };
        if (w * w.exp() - x).abs() <= 1e-14 * x.abs() {
            break;
        }
    }
    Ok(w)
}

/// The closed-form double limit of the optimal offspring mean (deep trees,
/// expensive inspection): with s = 1/2 + W_{-1}(-1/(2 sqrt(e))),
/// mu = s / (e^s - 1), approximately 1.756.
pub fn mu_opt_limit() -> f64 {
    let arg = -0.5 / 0.5f64.exp();
    let s = 0.5 + lambert_w_minus1(arg).expect("-1/(2 sqrt(e)) is inside the branch domain");
    s / s.exp_m1()
}

/// One evaluated point of a cost curve.
#[derive(Debug, Clone, Copy)]
pub struct CurvePoint {
    pub mu: f64,
    /// Total expected cost; absent when not representable at this mean.
    pub cost: Option<f64>,
    /// Large-mean reference k * price * mu.
    pub asym_large: f64,
    /// Small-mean reference mu^-k.
    pub asym_small: f64,
}

/// The cost curve over a grid of offspring means, with the two asymptotic
/// reference curves and the refined optimum inside the grid bracket.
#[derive(Debug, Clone)]
pub struct PoissonCostCurve {
    pub k: usize,
    pub price: f64,
    pub points: Vec<CurvePoint>,
    pub mu_opt: f64,
    pub cost_opt: f64,
}

/// Evaluates the cost on `mu_grid` and refines the optimum within the grid's
/// bracket. Points where the cost is not representable are kept as missing.
pub fn cost_curve(k: usize, price: f64, mu_grid: &[f64]) -> Result<PoissonCostCurve> {
    if mu_grid.is_empty() {
        return Err(Error::Domain("the mean grid is empty".into()));
    }
    if mu_grid.iter().any(|&mu| !(mu > 0.0)) {
        return Err(Error::Domain("grid means must be positive".into()));
    }
    let mut points = Vec::with_capacity(mu_grid.len());
    for &mu in mu_grid {
        let cost = poisson_cost(mu, k, price)
            .ok()
            .map(|t| t.total())
            .filter(|c| c.is_finite());
        points.push(CurvePoint {
            mu,
            cost,
            asym_large: k as f64 * price * mu,
            asym_small: mu.powi(-(k as i32)),
        });
    }
    let lo = mu_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = mu_grid.iter().cloned().fold(0.0, f64::max);
    let opt = optimize_mu(k, price, (lo, hi.max(lo * (1.0 + 1e-9))), DEFAULT_TOL)?;
    Ok(PoissonCostCurve {
        k,
        price,
        points,
        mu_opt: opt.mu_opt,
        cost_opt: opt.cost_opt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::build_cost_table;
    use crate::offspring::Pmf;
    use crate::survival::SurvivalTable;
    use crate::OffspringSchedule;

    #[test]
    fn survival_one_level() {
        let p = poisson_survival(1.0, 1).unwrap();
        assert!((p[0] - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert_eq!(p[1], 1.0);
    }

    #[test]
    fn survival_matches_generic_recursion() {
        for &mu in &[0.5, 1.0, 2.0, 5.0] {
            for k in 1..=6 {
                let closed = poisson_survival(mu, k).unwrap();
                let sched =
                    OffspringSchedule::uniform(Pmf::poisson(mu, 1e-12).unwrap(), k).unwrap();
                let table = SurvivalTable::build(&sched, k).unwrap();
                for l in 0..=k {
                    assert!(
                        (closed[l] - table.p(l)).abs() < 1e-9,
                        "mu={mu} k={k} l={l}: {} vs {}",
                        closed[l],
                        table.p(l)
                    );
                }
            }
        }
    }

    #[test]
    fn cost_matches_generic_path() {
        for &mu in &[0.5, 1.0, 2.0] {
            for k in 1..=6 {
                for &price in &[1.0, 10.0] {
                    let closed = poisson_cost(mu, k, price).unwrap();
                    let sched =
                        OffspringSchedule::uniform(Pmf::poisson(mu, 1e-12).unwrap(), k).unwrap();
                    let generic = build_cost_table(&sched, k, price).unwrap();
                    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
                    assert!(
                        rel(closed.total(), generic.total()) < 1e-8,
                        "mu={mu} k={k} price={price}: {} vs {}",
                        closed.total(),
                        generic.total()
                    );
                    for l in 0..=k {
                        assert!(rel(closed.d(l), generic.d(l)) < 1e-8);
                    }
                    for l in 0..k {
                        assert!(rel(closed.e(l), generic.e(l)) < 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn large_mean_regime() {
        let c = poisson_cost(50.0, 10, 10.0).unwrap().total();
        let ref_value = 10.0 * 10.0 * 50.0;
        assert!(
            c / ref_value > 0.95 && c / ref_value < 1.05,
            "ratio {}",
            c / ref_value
        );
    }

    #[test]
    fn small_mean_regime() {
        let c = poisson_cost(0.01, 3, 1.0).unwrap().total();
        let scaled = c * 0.01f64.powi(3);
        assert!(scaled > 0.95 && scaled < 1.05, "scaled {scaled}");
    }

    #[test]
    fn tiny_mean_deep_tree_underflows_cleanly() {
        assert!(matches!(
            poisson_cost(1e-3, 300, 1.0),
            Err(Error::ImpossibleSearch(_))
        ));
    }

    #[test]
    fn optimum_for_the_reference_configuration() {
        let opt = optimize_mu(10, 10.0, DEFAULT_BRACKET, DEFAULT_TOL).unwrap();
        assert!(
            (opt.mu_opt - 1.68).abs() <= 0.01,
            "mu_opt {} cost {}",
            opt.mu_opt,
            opt.cost_opt
        );
        assert!(!opt.at_boundary);
    }

    #[test]
    fn optimum_grows_as_inspection_gets_cheap() {
        let cheap = optimize_mu(6, 1e-6, DEFAULT_BRACKET, DEFAULT_TOL).unwrap();
        let dear = optimize_mu(6, 16.0, DEFAULT_BRACKET, DEFAULT_TOL).unwrap();
        assert!(cheap.mu_opt > dear.mu_opt);
    }

    #[test]
    fn optimum_nondecreasing_in_depth() {
        let mut prev = 0.0;
        for k in [4, 8, 16] {
            let opt = optimize_mu(k, 16.0, DEFAULT_BRACKET, DEFAULT_TOL).unwrap();
            assert!(
                opt.mu_opt >= prev - 1e-3,
                "k={k}: {} after {prev}",
                opt.mu_opt
            );
            prev = opt.mu_opt;
        }
    }

    #[test]
    fn fixed_point_critical_and_supercritical() {
        assert_eq!(infinite_survival(1.0).unwrap(), 0.0);
        assert_eq!(infinite_survival(0.5).unwrap(), 0.0);
        let p = infinite_survival(2.0).unwrap();
        assert!((p - 0.796812).abs() < 1e-6, "p {p}");
        let residual = p + (-2.0 * p).exp_m1();
        assert!(residual.abs() < 1e-14);
        // 1 - 1e-20 is not representable below 1.0; assert the gap instead.
        assert!(1.0 - infinite_survival(50.0).unwrap() < 1e-20);
    }

    #[test]
    fn infinite_cost_reference_value() {
        let res = infinite_cost(2.0, 1.0).unwrap();
        let expected = 3.0 / res.p;
        assert!((res.cost_per_step - expected).abs() < 1e-10);
        assert!((res.cost_per_step - 3.765).abs() < 1e-3);
    }

    #[test]
    fn infinite_cost_expressions_agree() {
        for &mu in &[1.1, 1.5, 2.0, 3.0, 5.0] {
            for &price in &[1.0, 10.0, 100.0] {
                let res = infinite_cost(mu, price).unwrap();
                let short = (price * mu + 1.0) / res.p;
                let from_p = infinite_cost_from_p(res.p, price).unwrap();
                assert!(
                    (res.cost_per_step - short).abs() <= 1e-10 * short,
                    "mu={mu} price={price}: long {} short {short}",
                    res.cost_per_step
                );
                assert!(
                    (from_p - short).abs() <= 1e-10 * short,
                    "mu={mu} price={price}: from_p {from_p} short {short}"
                );
            }
        }
    }

    #[test]
    fn infinite_cost_rejects_subcritical() {
        assert!(matches!(infinite_cost(1.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(infinite_cost(0.9, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn lambert_branch_point_and_known_value() {
        let e = std::f64::consts::E;
        assert_eq!(lambert_w_minus1(-1.0 / e).unwrap(), -1.0);
        let w = lambert_w_minus1(-2.0 * (-2.0f64).exp()).unwrap();
        assert!((w - (-2.0)).abs() < 1e-12, "w {w}");
    }

    #[test]
    fn lambert_residuals_on_log_grid() {
        let lo = (1e-8f64).ln();
        let hi = (1.0 / std::f64::consts::E).ln();
        for i in 0..100 {
            // Open at the branch point: start one step in.
            let s = hi + (lo - hi) * (i + 1) as f64 / 100.0;
            let x = -s.exp();
            let w = lambert_w_minus1(x).unwrap();
            assert!(w <= -1.0, "x={x}: w={w} above the branch");
            let residual = (w * w.exp() - x).abs();
            assert!(residual <= 1e-12 * x.abs(), "x={x}: residual {residual}");
        }
    }

    #[test]
    fn lambert_rejects_out_of_domain() {
        assert!(lambert_w_minus1(-1.0).is_err());
        assert!(lambert_w_minus1(0.0).is_err());
        assert!(lambert_w_minus1(0.5).is_err());
    }

    #[test]
    fn double_limit_value() {
        let mu = mu_opt_limit();
        assert!((mu - 1.756).abs() < 1e-3, "mu {mu}");
        assert!((1.75..=1.76).contains(&mu));
    }

    #[test]
    fn curve_has_minimum_near_the_reference() {
        let grid: Vec<f64> = (0..46).map(|i| 0.5 + 0.1 * i as f64).collect();
        let curve = cost_curve(10, 10.0, &grid).unwrap();
        assert!(
            (curve.mu_opt - 1.68).abs() < 0.02,
            "mu_opt {}",
            curve.mu_opt
        );
        // Unimodal on the computed points: strictly falls then rises.
        let costs: Vec<f64> = curve.points.iter().map(|p| p.cost.unwrap()).collect();
        let argmin = costs
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        for i in 1..=argmin {
            assert!(costs[i] <= costs[i - 1]);
        }
        for i in argmin + 1..costs.len() {
            assert!(costs[i] >= costs[i - 1]);
        }
    }

    #[test]
    fn curve_tracks_large_mean_asymptote() {
        let curve = cost_curve(10, 10.0, &[50.0]).unwrap();
        let point = curve.points[0];
        let cost = point.cost.unwrap();
        assert!((cost - point.asym_large).abs() / point.asym_large < 0.05);
    }

    #[test]
    fn curve_records_unrepresentable_points_as_missing() {
        let curve = cost_curve(300, 1.0, &[1e-3, 2.0]).unwrap();
        assert!(curve.points[0].cost.is_none());
        assert!(curve.points[1].cost.is_some());
    }
}
