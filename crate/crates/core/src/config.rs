//! Scenario files, summary files and the per-slot trace.
//!
//! Scenarios are JSON documents such as
//!
//! ```json
//! { "n1": 30, "l_total": 50, "l1": "adaptive", "lambda": 0.2,
//!   "arrival_law": "bernoulli", "mu": 0.000333333333,
//!   "horizon": 100000, "warmup": 10000, "seed": 1 }
//! ```
//!
//! `l1` is either a fixed pool size or `"adaptive"`, `lambda` a common rate or
//! one rate per device. Numbers written by this module carry at most nine
//! significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{run, PoolPolicy, RunMetrics, RunSummary, ScenarioConfig};
use crate::error::{invalid, Result};
use crate::model::ArrivalLaw;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdaptiveKeyword {
    #[serde(rename = "adaptive")]
    Adaptive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PoolSetting {
    Fixed(u32),
    Adaptive(AdaptiveKeyword),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateSetting {
    Common(f64),
    PerDevice(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub n1: usize,
    pub l_total: u32,
    pub l1: PoolSetting,
    pub lambda: RateSetting,
    #[serde(default)]
    pub arrival_law: ArrivalLaw,
    /// Step size of the adaptive pool; ignored for a fixed pool.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    pub horizon: u64,
    /// Defaults to a tenth of the horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup: Option<u64>,
    pub seed: u64,
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_scenario(&self) -> Result<ScenarioConfig> {
        if self.n1 < 1 {
            return Err(invalid("n1", "at least one device is required"));
        }
        let rates = match &self.lambda {
            RateSetting::Common(r) => vec![*r; self.n1],
            RateSetting::PerDevice(rs) if rs.len() == self.n1 => rs.clone(),
            RateSetting::PerDevice(rs) => {
                return Err(invalid(
                    "lambda",
                    format!("{} rates for {} devices", rs.len(), self.n1),
                ))
            }
        };
        let pool = match self.l1 {
            PoolSetting::Fixed(l1) => PoolPolicy::Fixed(l1),
            PoolSetting::Adaptive(_) => PoolPolicy::Adaptive { mu: self.mu },
        };
        let config = ScenarioConfig {
            rates,
            l_total: self.l_total,
            pool,
            law: self.arrival_law,
            horizon: self.horizon,
            warmup: self.warmup.unwrap_or(self.horizon / 10),
            seed: self.seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_scenario(config: &ScenarioConfig) -> Self {
        let first = config.rates[0];
        let lambda = if config.rates.iter().all(|&r| r == first) {
            RateSetting::Common(first)
        } else {
            RateSetting::PerDevice(config.rates.clone())
        };
        let (l1, mu) = match config.pool {
            PoolPolicy::Fixed(l1) => (PoolSetting::Fixed(l1), None),
            PoolPolicy::Adaptive { mu } => (PoolSetting::Adaptive(AdaptiveKeyword::Adaptive), mu),
        };
        Self {
            n1: config.n1(),
            l_total: config.l_total,
            l1,
            lambda,
            arrival_law: config.law,
            mu,
            horizon: config.horizon,
            warmup: Some(config.warmup),
            seed: config.seed,
        }
    }
}

/// Rounds to nine significant digits.
pub fn sig9(x: f64) -> f64 {
    if x.is_finite() && x != 0.0 {
        format!("{x:.8e}").parse().unwrap_or(x)
    } else {
        x
    }
}

/// Text form of a number for CSV output.
pub fn fmt_num(x: f64) -> String {
    sig9(x).to_string()
}

fn round_summary(s: &RunSummary) -> RunSummary {
    RunSummary {
        mean_queue: sig9(s.mean_queue),
        mean_queue_stderr: sig9(s.mean_queue_stderr),
        mean_delay: s.mean_delay.map(sig9),
        collision_rate: sig9(s.collision_rate),
        throughput: sig9(s.throughput),
        arrival_rate: sig9(s.arrival_rate),
        mean_l1: sig9(s.mean_l1),
        final_z: s.final_z.map(sig9),
        drift_slope: s.drift_slope.map(sig9),
        ..s.clone()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryFile {
    pub scenario: ScenarioFile,
    pub summary: RunSummary,
}

impl SummaryFile {
    pub fn new(config: &ScenarioConfig, metrics: &RunMetrics) -> Self {
        let mut scenario = ScenarioFile::from_scenario(config);
        scenario.mu = scenario.mu.map(sig9);
        if let RateSetting::Common(r) = &mut scenario.lambda {
            *r = sig9(*r);
        }
        Self {
            scenario,
            summary: round_summary(&metrics.summary),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub const TRACE_HEADER: &str = "slot,k1,successes,collisions,l1,z,mean_queue,max_queue";

pub fn trace_csv(metrics: &RunMetrics) -> String {
    let mut out = String::with_capacity(metrics.horizon() * 40);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for t in 0..metrics.horizon() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            t,
            metrics.k1_by_slot[t],
            metrics.successes_by_slot[t],
            metrics.collisions_by_slot[t],
            metrics.l1_by_slot[t],
            fmt_num(metrics.z_by_slot[t]),
            fmt_num(metrics.mean_queue_by_slot[t]),
            metrics.max_queue_by_slot[t],
        );
    }
    out
}

pub struct SimulationOutput {
    pub trace_path: PathBuf,
    pub summary_path: PathBuf,
    pub summary: SummaryFile,
}

/// Runs the scenario in `config_path` and writes `trace.csv` and
/// `summary.json` into `out_dir`.
pub fn simulate(config_path: &Path, out_dir: &Path) -> Result<SimulationOutput> {
    let file = ScenarioFile::load(config_path)?;
    let config = file.to_scenario()?;
    let metrics = run(&config)?;
    let summary = SummaryFile::new(&config, &metrics);

    fs::create_dir_all(out_dir)?;
    let trace_path = out_dir.join("trace.csv");
    let summary_path = out_dir.join("summary.json");
    fs::write(&trace_path, trace_csv(&metrics))?;
    fs::write(&summary_path, summary.to_json()? + "\n")?;
    Ok(SimulationOutput {
        trace_path,
        summary_path,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> Result<ScenarioConfig> {
        serde_json::from_str::<ScenarioFile>(json)?.to_scenario()
    }

    #[test]
    fn fixed_and_adaptive_forms() {
        let c = parse(r#"{"n1":3,"l_total":10,"l1":4,"lambda":0.1,"horizon":100,"seed":5}"#).unwrap();
        assert_eq!(c.pool, PoolPolicy::Fixed(4));
        assert_eq!(c.rates, vec![0.1; 3]);
        assert_eq!(c.warmup, 10);
        assert_eq!(c.law, ArrivalLaw::Bernoulli);

        let c = parse(
            r#"{"n1":2,"l_total":10,"l1":"adaptive","lambda":[0.1,0.3],
                "arrival_law":"poisson","mu":0.01,"horizon":100,"warmup":0,"seed":5}"#,
        )
        .unwrap();
        assert_eq!(c.pool, PoolPolicy::Adaptive { mu: Some(0.01) });
        assert_eq!(c.rates, vec![0.1, 0.3]);
        assert_eq!(c.law, ArrivalLaw::Poisson);
    }

    #[test]
    fn invalid_scenarios() {
        // l1 must leave a preamble for type-2 devices
        assert!(parse(r#"{"n1":3,"l_total":10,"l1":10,"lambda":0.1,"horizon":100,"seed":5}"#).is_err());
        assert!(parse(r#"{"n1":3,"l_total":10,"l1":"fixed","lambda":0.1,"horizon":100,"seed":5}"#).is_err());
        assert!(parse(r#"{"n1":3,"l_total":10,"l1":4,"lambda":[0.1],"horizon":100,"seed":5}"#).is_err());
        assert!(parse(r#"{"n1":3,"l_total":10,"l1":4,"lambda":0.1,"horizon":100,"warmup":100,"seed":5}"#).is_err());
        assert!(parse(r#"{"n1":3,"l_total":10,"l1":4,"lambda":0.1,"horizon":100,"seed":5,"extra":1}"#).is_err());
        assert!(parse(r#"{"n1":3,"l_total":1,"l1":1,"lambda":0.1,"horizon":100,"seed":5}"#).is_err());
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(1.0 / 3.0), 0.333333333);
        assert_eq!(fmt_num(2.0 / 3.0), "0.666666667");
        assert_eq!(fmt_num(123456789012.0), "123456789000");
        assert_eq!(fmt_num(0.0), "0");
    }

    #[test]
    fn scenario_round_trip() {
        let c = parse(r#"{"n1":3,"l_total":10,"l1":"adaptive","lambda":0.1,"horizon":100,"seed":5}"#).unwrap();
        let back = ScenarioFile::from_scenario(&c).to_scenario().unwrap();
        assert_eq!(c, back);
    }
}
