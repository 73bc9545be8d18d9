//! Thin JSON bindings for the browser demo: each function takes plain
//! numbers, returns a JSON string, and reports problems as
//! `{"error": "..."}` so the page stays framework-free.

use wasm_bindgen::prelude::wasm_bindgen;

use gw_core::poisson;
use gw_core::survival::{sample_extinct, sample_mixture, sample_surviving, SurvivalTable};
use gw_core::tree::sample_unconditioned;
use gw_core::{OffspringSchedule, Pmf};

fn err_json(msg: impl std::fmt::Display) -> String {
    format!("{{\"error\":{:?}}}", msg.to_string())
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        "null".into()
    }
}

/// Survival probabilities p[0..=k] for Poisson(mu) offspring:
/// `{"p": [...]}`
#[wasm_bindgen]
pub fn survival_curve(mu: f64, k: u32) -> String {
    if k > 1000 {
        return err_json("k is capped at 1000 in the demo");
    }
    match poisson::poisson_survival(mu, k as usize) {
        Ok(p) => {
            let values: Vec<String> = p.iter().map(|&v| num(v)).collect();
            format!("{{\"p\":[{}]}}", values.join(","))
        }
        Err(e) => err_json(e),
    }
}

/// Expected search cost over a log-spaced grid of offspring means, with the
/// asymptotic reference curves and the refined optimum:
/// `{"points":[{"mu":..,"cost":..,"asym_large":..,"asym_small":..},...],
///   "mu_opt":..,"cost_opt":..}`
#[wasm_bindgen]
pub fn cost_curve(k: u32, price: f64, mu_min: f64, mu_max: f64, points: u32) -> String {
    if !(mu_min > 0.0 && mu_max > mu_min) || !(2..=512).contains(&points) || k > 200 {
        return err_json("need 0 < mu_min < mu_max, 2..=512 points, k <= 200");
    }
    let step = (mu_max / mu_min).ln() / (points - 1) as f64;
    let grid: Vec<f64> = (0..points)
        .map(|i| mu_min * (step * f64::from(i)).exp())
        .collect();
    match poisson::cost_curve(k as usize, price, &grid) {
        Ok(curve) => {
            let entries: Vec<String> = curve
                .points
                .iter()
                .map(|p| {
                    format!(
                        "{{\"mu\":{},\"cost\":{},\"asym_large\":{},\"asym_small\":{}}}",
                        num(p.mu),
                        p.cost.map(num).unwrap_or_else(|| "null".into()),
                        num(p.asym_large),
                        num(p.asym_small)
                    )
                })
                .collect();
            format!(
                "{{\"points\":[{}],\"mu_opt\":{},\"cost_opt\":{}}}",
                entries.join(","),
                num(curve.mu_opt),
                num(curve.cost_opt)
            )
        }
        Err(e) => err_json(e),
    }
}

/// One tree from Poisson(mu) offspring truncated to depth `k`, in the
/// requested mode (`unconditioned`, `mixture`, `survive`, `extinct`):
/// `{"tree":"(...)","nodes":n,"height":h,"reaches_target":bool}`
#[wasm_bindgen]
pub fn sample_tree(mu: f64, k: u32, mode: &str, seed: u32) -> String {
    if k > 12 || mu > 4.0 {
        return err_json("the demo caps k at 12 and mu at 4");
    }
    let k = k as usize;
    let seed = u64::from(seed);
    let law = match Pmf::poisson(mu, 1e-12) {
        Ok(law) => law,
        Err(e) => return err_json(e),
    };
    let sched = match OffspringSchedule::uniform(law, k.max(1)) {
        Ok(s) => s,
        Err(e) => return err_json(e),
    };
    let tree = match mode {
        "unconditioned" => sample_unconditioned(&sched, 0, k, seed),
        _ => match SurvivalTable::build(&sched, k) {
            Ok(table) => match mode {
                "mixture" => sample_mixture(&table, 0, seed),
                "survive" => sample_surviving(&table, 0, seed),
                "extinct" => sample_extinct(&table, 0, seed),
                other => return err_json(format!("unknown mode {other:?}")),
            },
            Err(e) => Err(e),
        },
    };
    match tree {
        Ok(t) => format!(
            "{{\"tree\":\"{}\",\"nodes\":{},\"height\":{},\"reaches_target\":{}}}",
            t.serialize(),
            t.node_count(),
            t.height(),
            t.reaches_level(k)
        ),
        Err(e) => err_json(e),
    }
}

/// Infinite-tree quantities for a supercritical mean:
/// `{"p":..,"unsuccessful_cost":..,"cost_per_step":..,"mu_opt_limit":..}`
#[wasm_bindgen]
pub fn infinite_tree(mu: f64, price: f64) -> String {
    match poisson::infinite_cost(mu, price) {
        Ok(res) => format!(
            "{{\"p\":{},\"unsuccessful_cost\":{},\"cost_per_step\":{},\"mu_opt_limit\":{}}}",
            num(res.p),
            num(res.unsuccessful_cost),
            num(res.cost_per_step),
            num(poisson::mu_opt_limit())
        ),
        Err(e) => err_json(e),
    }
}
