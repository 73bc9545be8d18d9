//! Subcommand implementations. Each command returns the text it wants on
//! stdout; tables go to --out when given (falling back to stdout).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gw_core::cost::{build_cost_table, monte_carlo_cost, simulate_search_with_cap};
use gw_core::multitype::{
    build_type_table_with_limits, builtin_system, check_equivalence_with_type_table, sample_type,
    TypeTableLimits,
};
use gw_core::poisson::{cost_curve, infinite_cost, optimize_mu, DEFAULT_BRACKET, DEFAULT_TOL};
use gw_core::survival::{
    check_equivalence_with_table, sample_extinct, sample_mixture, sample_surviving, SurvivalTable,
};
use gw_core::tree::sample_unconditioned;

use crate::config::{fmt12, RunConfig};
use crate::CliError;

/// Destination for the primary table of a command.
pub struct Sink {
    out: Option<PathBuf>,
}

impl Sink {
    pub fn new(out: Option<PathBuf>) -> Sink {
        Sink { out }
    }

    fn path(&self) -> Option<&Path> {
        self.out.as_deref()
    }

    /// Writes `table` to the out path, or returns it for stdout.
    fn deliver(&self, table: String) -> Result<Option<String>, CliError> {
        match self.path() {
            Some(path) => {
                std::fs::write(path, table).map_err(|e| {
                    CliError::Config(format!("cannot write {}: {e}", path.display()))
                })?;
                Ok(None)
            }
            None => Ok(Some(table)),
        }
    }
}

pub fn cmd_survival(cfg: &RunConfig, sink: &Sink) -> Result<String, CliError> {
    let k = cfg.require_k()?;
    let sched = cfg.build_schedule(k)?;
    let table = SurvivalTable::build(&sched, k)?;
    let mut csv = String::from("l,p_lk\n");
    for l in 0..=k {
        writeln!(csv, "{l},{}", fmt12(table.p(l))).unwrap();
    }
    Ok(sink.deliver(csv)?.unwrap_or_default())
}

pub fn cmd_sample(
    cfg: &RunConfig,
    sink: &Sink,
    seed_flag: Option<u64>,
) -> Result<String, CliError> {
    let k = cfg.require_k()?;
    let sched = cfg.build_schedule(k)?;
    let seed = cfg.require_seed(seed_flag)?;
    let count = cfg.samples.unwrap_or(1);
    let mode = cfg.mode.as_deref().unwrap_or("unconditioned");
    let mut lines = String::new();
    // Sample s uses stream seed + s.
    if let Some(type_arg) = mode.strip_prefix("type:") {
        let index: usize = type_arg
            .parse()
            .map_err(|_| CliError::Config(format!("bad type index in mode {mode:?}")))?;
        let system_name = cfg
            .system
            .as_deref()
            .ok_or_else(|| CliError::Config("mode type:i needs a \"system\"".into()))?;
        let system = builtin_system(system_name).map_err(|e| CliError::Config(e.to_string()))?;
        if index < 1 || index > system.num_types() {
            return Err(CliError::Config(format!(
                "type index {index} outside 1..={}",
                system.num_types()
            )));
        }
        let table = build_type_table_with_limits(system, &sched, k, type_limits(cfg))?;
        for s in 0..count {
            let tree = sample_type(&table, 0, index - 1, seed.wrapping_add(s))?;
            lines.push_str(&tree.serialize());
            lines.push('\n');
        }
    } else {
        let table = SurvivalTable::build(&sched, k)?;
        for s in 0..count {
            let stream = seed.wrapping_add(s);
            let tree = match mode {
                "unconditioned" => sample_unconditioned(&sched, 0, k, stream)?,
                "mixture" => sample_mixture(&table, 0, stream)?,
                "survive" => sample_surviving(&table, 0, stream)?,
                "extinct" => sample_extinct(&table, 0, stream)?,
                other => {
                    return Err(CliError::Config(format!(
                        "unknown mode {other:?}; expected unconditioned, mixture, survive, extinct or type:i"
                    )))
                }
            };
            lines.push_str(&tree.serialize());
            lines.push('\n');
        }
    }
    Ok(sink.deliver(lines)?.unwrap_or_default())
}

fn type_limits(cfg: &RunConfig) -> TypeTableLimits {
    let mut limits = TypeTableLimits::default();
    if let Some(cap) = cfg.base_support_limit {
        limits.max_base_support = cap;
    }
    limits
}

pub fn cmd_check(cfg: &RunConfig) -> Result<String, CliError> {
    let k = cfg.require_k()?;
    let sched = cfg.build_schedule(k)?;
    let bound = cfg.max_children.unwrap_or_else(|| sched.max_support());
    let mut table = SurvivalTable::build(&sched, k)?;
    if let Some(level) = cfg.corrupt_p_level {
        if level > k {
            return Err(CliError::Config(format!(
                "corrupt_p_level {level} exceeds k = {k}"
            )));
        }
        table = table.with_perturbed_p(level, 1e-3);
    }
    let two_type = check_equivalence_with_table(&table, bound)?;
    let mut report = format!(
        "{{\"two_type_tv\":{},\"two_type_pointwise_max\":{},\"atoms\":{}",
        fmt12(two_type.tv_distance),
        fmt12(two_type.pointwise_max),
        two_type.atoms
    );
    let mut worst = two_type.tv_distance;
    if let Some(system_name) = &cfg.system {
        let system = builtin_system(system_name).map_err(|e| CliError::Config(e.to_string()))?;
        let type_table = build_type_table_with_limits(system, &sched, k, type_limits(cfg))?;
        let multi = check_equivalence_with_type_table(&type_table, bound)?;
        write!(
            report,
            ",\"multitype_tv\":{},\"multitype_pointwise_max\":{}",
            fmt12(multi.tv_distance),
            fmt12(multi.pointwise_max)
        )
        .unwrap();
        worst = worst.max(multi.tv_distance);
    }
    let pass = worst <= 1e-8;
    write!(report, ",\"pass\":{pass}}}").unwrap();
    report.push('\n');
    if pass {
        Ok(report)
    } else {
        Err(CliError::Check(report.trim_end().to_string()))
    }
}

pub fn cmd_cost(cfg: &RunConfig, sink: &Sink) -> Result<String, CliError> {
    let k = cfg.require_k()?;
    let price = cfg.require_price()?;
    let sched = cfg.build_schedule(k)?;
    let table = build_cost_table(&sched, k, price)?;
    let mut csv = String::from("l,D,E\n");
    for l in 0..=k {
        let e = if l < k {
            fmt12(table.e(l))
        } else {
            String::new()
        };
        writeln!(csv, "{l},{},{e}", fmt12(table.d(l))).unwrap();
    }
    let unused: Vec<String> = table
        .e_unused_levels()
        .iter()
        .map(usize::to_string)
        .collect();
    let scalars = format!(
        "{{\"p_0k\":{},\"C_k\":{},\"e_unused_levels\":[{}]}}\n",
        fmt12(table.survival(0)),
        fmt12(table.total()),
        unused.join(",")
    );
    Ok(match sink.deliver(csv)? {
        Some(csv) => format!("{csv}{scalars}"),
        None => scalars,
    })
}

pub fn cmd_simulate(
    cfg: &RunConfig,
    sink: &Sink,
    seed_flag: Option<u64>,
    reps_flag: Option<u64>,
) -> Result<String, CliError> {
    let k = cfg.require_k()?;
    let price = cfg.require_price()?;
    let sched = cfg.build_schedule(k)?;
    let seed = cfg.require_seed(seed_flag)?;
    let reps = reps_flag.or(cfg.reps).unwrap_or(1);
    if reps < 1 {
        return Err(CliError::Config("\"reps\" must be at least 1".into()));
    }
    let cap = cfg
        .restart_cap
        .unwrap_or(gw_core::cost::DEFAULT_RESTART_CAP);
    let (mean, stderrformatted) = if cfg.emit_reps.unwrap_or(false) {
        // Per-replication records; sequential so the CSV order is the
        // replication order.
        let mut csv = String::from("rep,cost,restarts\n");
        let mut costs = Vec::with_capacity(reps as usize);
        for r in 0..reps {
            let outcome = simulate_search_with_cap(&sched, k, price, seed.wrapping_add(r), cap)?;
            writeln!(
                csv,
                "{r},{},{}",
                fmt12(outcome.total_cost),
                outcome.restarts
            )
            .unwrap();
            costs.push(outcome.total_cost);
        }
        if sink.path().is_none() {
            return Err(CliError::Config(
                "emit_reps needs --out for the per-replication table".into(),
            ));
        }
        sink.deliver(csv)?;
        let n = reps as f64;
        let mean = costs.iter().sum::<f64>() / n;
        let var = if reps > 1 {
            costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        (mean, (var / n).sqrt())
    } else {
        monte_carlo_cost(&sched, k, price, reps, seed)?
    };
    Ok(format!(
        "{{\"mean\":{},\"stderr\":{},\"reps\":{reps}}}\n",
        fmt12(mean),
        fmt12(stderrformatted)
    ))
}

pub fn cmd_curve(cfg: &RunConfig, sink: &Sink) -> Result<String, CliError> {
    let k = cfg.require_k()?;
    let price = cfg.require_price()?;
    let spec = cfg
        .curve
        .as_ref()
        .ok_or_else(|| CliError::Config("missing field \"curve\"".into()))?;
    if !(spec.mu_min > 0.0 && spec.mu_max > spec.mu_min && spec.points >= 2) {
        return Err(CliError::Config(
            "curve needs 0 < mu_min < mu_max and at least 2 points".into(),
        ));
    }
    let dir = sink
        .path()
        .ok_or_else(|| CliError::Config("curve writes CSV files; pass --out DIR".into()))?;
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;

    // Log-spaced grid for the cost-versus-mean table.
    let step = (spec.mu_max / spec.mu_min).ln() / (spec.points - 1) as f64;
    let grid: Vec<f64> = (0..spec.points)
        .map(|i| spec.mu_min * (step * i as f64).exp())
        .collect();
    let curve = cost_curve(k, price, &grid)?;
    let mut csv = String::from("mu,C,asym_large,asym_small\n");
    for point in &curve.points {
        let cost = point.cost.map(fmt12).unwrap_or_default();
        writeln!(
            csv,
            "{},{cost},{},{}",
            fmt12(point.mu),
            fmt12(point.asym_large),
            fmt12(point.asym_small)
        )
        .unwrap();
    }
    write_file(dir, "cost_curve.csv", &csv)?;

    let bracket = cfg.bracket.unwrap_or(DEFAULT_BRACKET);
    let tol = cfg.tol.unwrap_or(DEFAULT_TOL);
    if !spec.k_list.is_empty() {
        let mut table = String::from("k,mu_opt\n");
        for &depth in &spec.k_list {
            let opt = optimize_mu(depth, price, bracket, tol)?;
            writeln!(table, "{depth},{}", fmt12(opt.mu_opt)).unwrap();
        }
        write_file(dir, "mu_opt_vs_k.csv", &table)?;
    }
    if !spec.price_list.is_empty() {
        let mut table = String::from("K,mu_opt\n");
        for &p in &spec.price_list {
            let opt = optimize_mu(k, p, bracket, tol)?;
            writeln!(table, "{},{}", fmt12(p), fmt12(opt.mu_opt)).unwrap();
        }
        write_file(dir, "mu_opt_vs_K.csv", &table)?;
    }
    Ok(format!(
        "{{\"mu_opt\":{},\"C_opt\":{},\"points\":{}}}\n",
        fmt12(curve.mu_opt),
        fmt12(curve.cost_opt),
        curve.points.len()
    ))
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, content)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

pub fn cmd_optimize(cfg: &RunConfig) -> Result<String, CliError> {
    let k = cfg.require_k()?;
    let price = cfg.require_price()?;
    let bracket = cfg.bracket.unwrap_or(DEFAULT_BRACKET);
    let tol = cfg.tol.unwrap_or(DEFAULT_TOL);
    let opt = optimize_mu(k, price, bracket, tol)?;
    Ok(format!(
        "{{\"mu_opt\":{},\"C_opt\":{},\"at_boundary\":{}}}\n",
        fmt12(opt.mu_opt),
        fmt12(opt.cost_opt),
        opt.at_boundary
    ))
}

pub fn cmd_infinite(cfg: &RunConfig) -> Result<String, CliError> {
    let mu = cfg
        .mu
        .ok_or_else(|| CliError::Config("missing field \"mu\"".into()))?;
    let price = cfg.require_price()?;
    let res = infinite_cost(mu, price)?;
    Ok(format!(
        "{{\"mu\":{},\"K\":{},\"p\":{},\"E\":{},\"C_inf\":{}}}\n",
        fmt12(res.mu),
        fmt12(res.price),
        fmt12(res.p),
        fmt12(res.unsuccessful_cost),
        fmt12(res.cost_per_step)
    ))
}
