//! Figure presets. Each preset produces one plot-ready CSV whose leading
//! `#` lines record the preset, seed and fixed parameters.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::config::fmt_num;
use crate::engine::{run, sweep, PoolPolicy, RunMetrics, ScenarioConfig, SweepParameter};
use crate::error::{invalid, Result};
use crate::stability::{check_stability, min_stable_l1};

pub const L_TOTAL: u32 = 50;
pub const LAMBDA: f64 = 0.2;
pub const FIXED_L1: u32 = 20;
pub const FIXED_N1: usize = 30;
pub const SWEEP_HORIZON: u64 = 200_000;
pub const ADAPTIVE_HORIZON: u64 = 100_000;
pub const REPLICAS: u64 = 3;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Mean queue against the arrival rate, fixed pool.
    Fig3a,
    /// Mean queue against the device count, fixed pool.
    Fig3b,
    /// Max-queue and pool-size trajectories of one adaptive run.
    Fig4,
    /// Time-averaged adaptive pool size against the device count.
    Fig5,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Fig3a, Preset::Fig3b, Preset::Fig4, Preset::Fig5];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig3a => "fig3a",
            Preset::Fig3b => "fig3b",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
        }
    }
}

impl FromStr for Preset {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| invalid("preset", format!("unknown preset `{s}` (fig3a, fig3b, fig4, fig5)")))
    }
}

pub fn lambda_grid() -> Vec<f64> {
    (0..=8).map(|i| 0.05 + 0.025 * f64::from(i)).collect()
}

pub fn fixed_n1_grid() -> Vec<usize> {
    (1..=8).map(|i| 5 * i).collect()
}

pub fn adaptive_n1_grid() -> Vec<usize> {
    (2..=6).map(|i| 5 * i).collect()
}

fn header(out: &mut String, preset: Preset, seed: u64, params: &str) {
    let _ = writeln!(out, "# preset={}", preset.name());
    let _ = writeln!(out, "# seed={seed}");
    let _ = writeln!(out, "# {params}");
}

/// Runs `values` of `parameter` once per replica; replica `r` uses base seed
/// `seed + r`. Returns, per value, the metrics of every replica.
fn replicated_sweep(base: &ScenarioConfig, parameter: SweepParameter, values: &[f64]) -> Result<Vec<Vec<RunMetrics>>> {
    let mut per_value: Vec<Vec<RunMetrics>> = values.iter().map(|_| Vec::new()).collect();
    for r in 0..REPLICAS {
        let mut config = base.clone();
        config.seed = base.seed.wrapping_add(r);
        for (slot, (_, m)) in per_value.iter_mut().zip(sweep(&config, parameter, values)?) {
            slot.push(m);
        }
    }
    Ok(per_value)
}

fn mean_of(runs: &[RunMetrics], f: impl Fn(&RunMetrics) -> f64) -> f64 {
    runs.iter().map(f).sum::<f64>() / runs.len() as f64
}

fn queue_row(out: &mut String, x: String, runs: &[RunMetrics], analytic_stable: bool) {
    let max_queue = runs.iter().map(|m| m.summary.max_queue).max().unwrap_or(0);
    let unstable = runs.iter().filter(|m| m.summary.stable == Some(false)).count();
    let _ = writeln!(
        out,
        "{x},{},{max_queue},{},{},{unstable},{analytic_stable}",
        fmt_num(mean_of(runs, |m| m.summary.mean_queue)),
        fmt_num(mean_of(runs, |m| m.summary.mean_delay.unwrap_or(f64::NAN))),
        fmt_num(mean_of(runs, |m| m.summary.collision_rate)),
    );
}

fn fig3a(seed: u64) -> Result<String> {
    let base = ScenarioConfig::uniform(FIXED_N1, LAMBDA, L_TOTAL, PoolPolicy::Fixed(FIXED_L1), SWEEP_HORIZON, seed);
    let grid = lambda_grid();
    let runs = replicated_sweep(&base, SweepParameter::Lambda, &grid)?;
    let mut out = String::new();
    header(
        &mut out,
        Preset::Fig3a,
        seed,
        &format!(
            "n1={FIXED_N1} l1={FIXED_L1} l_total={L_TOTAL} arrival_law=bernoulli horizon={SWEEP_HORIZON} warmup={} replicas={REPLICAS}",
            base.warmup
        ),
    );
    out.push_str("lambda,mean_queue,max_queue,mean_delay,collision_rate,unstable_runs,analytic_stable\n");
    for (&lambda, runs) in grid.iter().zip(&runs) {
        let analytic = check_stability(&vec![lambda; FIXED_N1], FIXED_L1)?.stable;
        queue_row(&mut out, fmt_num(lambda), runs, analytic);
    }
    Ok(out)
}

fn fig3b(seed: u64) -> Result<String> {
    let base = ScenarioConfig::uniform(FIXED_N1, LAMBDA, L_TOTAL, PoolPolicy::Fixed(FIXED_L1), SWEEP_HORIZON, seed);
    let grid = fixed_n1_grid();
    let values: Vec<f64> = grid.iter().map(|&n| n as f64).collect();
    let runs = replicated_sweep(&base, SweepParameter::N1, &values)?;
    let mut out = String::new();
    header(
        &mut out,
        Preset::Fig3b,
        seed,
        &format!(
            "lambda={LAMBDA} l1={FIXED_L1} l_total={L_TOTAL} arrival_law=bernoulli horizon={SWEEP_HORIZON} warmup={} replicas={REPLICAS}",
            base.warmup
        ),
    );
    out.push_str("n1,mean_queue,max_queue,mean_delay,collision_rate,unstable_runs,analytic_stable\n");
    for (&n1, runs) in grid.iter().zip(&runs) {
        let analytic = check_stability(&vec![LAMBDA; n1], FIXED_L1)?.stable;
        queue_row(&mut out, n1.to_string(), runs, analytic);
    }
    Ok(out)
}

fn fig4(seed: u64) -> Result<String> {
    let config = ScenarioConfig::uniform(
        FIXED_N1,
        LAMBDA,
        L_TOTAL,
        PoolPolicy::Adaptive { mu: None },
        ADAPTIVE_HORIZON,
        seed,
    );
    let m = run(&config)?;
    let mut out = String::new();
    header(
        &mut out,
        Preset::Fig4,
        seed,
        &format!(
            "n1={FIXED_N1} lambda={LAMBDA} l_total={L_TOTAL} mu=0.01/n1 arrival_law=bernoulli horizon={ADAPTIVE_HORIZON}"
        ),
    );
    out.push_str("slot,max_queue,l1,z,mean_queue\n");
    for t in 0..m.horizon() {
        let _ = writeln!(
            out,
            "{t},{},{},{},{}",
            m.max_queue_by_slot[t],
            m.l1_by_slot[t],
            fmt_num(m.z_by_slot[t]),
            fmt_num(m.mean_queue_by_slot[t]),
        );
    }
    Ok(out)
}

fn fig5(seed: u64) -> Result<String> {
    let base = ScenarioConfig::uniform(
        FIXED_N1,
        LAMBDA,
        L_TOTAL,
        PoolPolicy::Adaptive { mu: None },
        ADAPTIVE_HORIZON,
        seed,
    );
    let grid = adaptive_n1_grid();
    let values: Vec<f64> = grid.iter().map(|&n| n as f64).collect();
    let runs = replicated_sweep(&base, SweepParameter::N1, &values)?;
    let mut out = String::new();
    header(
        &mut out,
        Preset::Fig5,
        seed,
        &format!(
            "lambda={LAMBDA} l_total={L_TOTAL} mu=0.01/n1 arrival_law=bernoulli horizon={ADAPTIVE_HORIZON} warmup={} replicas={REPLICAS}",
            base.warmup
        ),
    );
    out.push_str("n1,mean_l1,min_stable_l1,mean_queue,max_queue\n");
    for (&n1, runs) in grid.iter().zip(&runs) {
        let _ = writeln!(
            out,
            "{n1},{},{},{},{}",
            fmt_num(mean_of(runs, |m| m.summary.mean_l1)),
            min_stable_l1(LAMBDA, n1)?,
            fmt_num(mean_of(runs, |m| m.summary.mean_queue)),
            runs.iter().map(|m| m.summary.max_queue).max().unwrap_or(0),
        );
    }
    Ok(out)
}

/// CSV text of a preset.
pub fn preset_csv(preset: Preset, seed: u64) -> Result<String> {
    match preset {
        Preset::Fig3a => fig3a(seed),
        Preset::Fig3b => fig3b(seed),
        Preset::Fig4 => fig4(seed),
        Preset::Fig5 => fig5(seed),
    }
}

/// Writes `<out_dir>/<preset>.csv`.
pub fn run_preset(preset: Preset, out_dir: &Path, seed: u64) -> Result<PathBuf> {
    let csv = preset_csv(preset, seed)?;
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("{}.csv", preset.name()));
    fs::write(&path, csv)?;
    Ok(path)
}
