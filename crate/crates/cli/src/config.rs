//! JSON run configuration: offspring schedules, targets, and
//! command-specific options.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;

use gw_core::offspring::DEFAULT_TAIL_TOL;
use gw_core::{OffspringSchedule, Pmf};

use crate::CliError;

/// One offspring law: `{"kind":"poisson","mu":x}` or
/// `{"kind":"table","weights":{"0":w0,...}}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LawSpec {
    Poisson { mu: f64 },
    Table { weights: BTreeMap<String, f64> },
}

/// Per-level laws with a default applied to unspecified levels.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    #[serde(default)]
    pub default: Option<LawSpec>,
    #[serde(default)]
    pub levels: BTreeMap<String, LawSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub mu_min: f64,
    pub mu_max: f64,
    pub points: usize,
    /// Depths to scan for the optimal-mean-versus-depth table.
    #[serde(default)]
    pub k_list: Vec<usize>,
    /// Prices to scan for the optimal-mean-versus-price table.
    #[serde(default, rename = "K_list")]
    pub price_list: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default, rename = "K")]
    pub price: Option<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub system: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub reps: Option<u64>,
    #[serde(default)]
    pub samples: Option<u64>,
    #[serde(default)]
    pub mode: Option<String>,
    #[serde(default)]
    pub max_children: Option<u32>,
    #[serde(default)]
    pub tail_tol: Option<f64>,
    #[serde(default)]
    pub curve: Option<CurveSpec>,
    #[serde(default)]
    pub bracket: Option<(f64, f64)>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub restart_cap: Option<u64>,
    /// Raises the base-support guardrail for m-type tables.
    #[serde(default)]
    pub base_support_limit: Option<u32>,
    /// Test hook: corrupts the survival probability at this level before
    /// running `check`, as a negative control.
    #[serde(default)]
    pub corrupt_p_level: Option<usize>,
    /// Emit per-replication records from `simulate` (requires --out).
    #[serde(default)]
    pub emit_reps: Option<bool>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn require_k(&self) -> Result<usize, CliError> {
        let k = self
            .k
            .ok_or_else(|| CliError::Config("missing field \"k\"".into()))?;
        if k < 1 {
            return Err(CliError::Config("\"k\" must be at least 1".into()));
        }
        Ok(k)
    }

    pub fn require_price(&self) -> Result<f64, CliError> {
        let price = self
            .price
            .ok_or_else(|| CliError::Config("missing field \"K\"".into()))?;
        if !(price >= 0.0) {
            return Err(CliError::Config("\"K\" must be nonnegative".into()));
        }
        Ok(price)
    }

    pub fn require_seed(&self, flag: Option<u64>) -> Result<u64, CliError> {
        flag.or(self.seed).ok_or_else(|| {
            CliError::Config("sampling commands need a seed (config \"seed\" or --seed)".into())
        })
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol.unwrap_or(DEFAULT_TAIL_TOL)
    }

    /// Materializes the schedule for levels 0..k, applying the default law
    /// to unspecified levels. Diagnostics name the offending level.
    pub fn build_schedule(&self, k: usize) -> Result<OffspringSchedule, CliError> {
        let spec = self
            .schedule
            .as_ref()
            .ok_or_else(|| CliError::Config("missing field \"schedule\"".into()))?;
        let mut by_level: BTreeMap<usize, &LawSpec> = BTreeMap::new();
        for (key, law) in &spec.levels {
            let level: usize = key.parse().map_err(|_| {
                CliError::Config(format!("schedule level {key:?} is not an integer"))
            })?;
            by_level.insert(level, law);
        }
        let mut laws = Vec::with_capacity(k);
        for level in 0..k {
            let law_spec = by_level
                .get(&level)
                .copied()
                .or(spec.default.as_ref())
                .ok_or_else(|| {
                    CliError::Config(format!(
                        "schedule level {level}: no law given and no default"
                    ))
                })?;
            laws.push(self.build_law(law_spec, level)?);
        }
        OffspringSchedule::from_laws(laws).map_err(|e| CliError::Config(format!("schedule: {e}")))
    }

    fn build_law(&self, spec: &LawSpec, level: usize) -> Result<Pmf, CliError> {
        match spec {
            LawSpec::Poisson { mu } => Pmf::poisson(*mu, self.tail_tol())
                .map_err(|e| CliError::Config(format!("schedule level {level}: {e}"))),
            LawSpec::Table { weights } => {
                let mut parsed = BTreeMap::new();
                for (key, &w) in weights {
                    let n: u32 = key.parse().map_err(|_| {
                        CliError::Config(format!(
                            "schedule level {level}: weight key {key:?} is not a count"
                        ))
                    })?;
                    parsed.insert(n, w);
                }
                Pmf::from_weights(&parsed)
                    .map_err(|e| CliError::Config(format!("schedule level {level}: {e}")))
            }
        }
    }
}

/// A float with 12 significant digits, stable across runs.
pub fn fmt12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.11e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt12_is_stable() {
        assert_eq!(fmt12(0.0), "0");
        assert_eq!(fmt12(0.25), "2.50000000000e-1");
        assert_eq!(fmt12(1.0), "1.00000000000e0");
    }

    #[test]
    fn schedule_with_default_and_override() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{
                "schedule": {
                    "default": {"kind": "table", "weights": {"1": 1.0}},
                    "levels": {"1": {"kind": "table", "weights": {"0": 1.0, "2": 1.0}}}
                },
                "k": 3
            }"#,
        )
        .unwrap();
        let sched = cfg.build_schedule(3).unwrap();
        assert_eq!(sched.law(0).support(), &[1]);
        assert_eq!(sched.law(1).support(), &[0, 2]);
        assert_eq!(sched.law(2).support(), &[1]);
    }

    #[test]
    fn schedule_missing_level_names_it() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"schedule": {"levels": {"0": {"kind": "poisson", "mu": 1.0}}}, "k": 2}"#,
        )
        .unwrap();
        let err = cfg.build_schedule(2).unwrap_err();
        assert!(err.to_string().contains("level 1"), "{err}");
    }

    #[test]
    fn bad_weight_is_a_config_error_naming_the_level() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"schedule": {"default": {"kind": "table", "weights": {"0": -1.0}}}}"#,
        )
        .unwrap();
        let err = cfg.build_schedule(1).unwrap_err();
        assert!(err.to_string().contains("level 0"), "{err}");
    }
}
