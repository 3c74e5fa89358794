//! Runs the slot model over a horizon, optionally closing the loop through
//! the adaptive pool controller, and gathers queue and delay metrics.

use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{default_step_size, ControllerState};
use crate::error::{invalid, Error, Result};
use crate::model::{step_slot, ArrivalLaw, ArrivalModel, DeviceState};

/// Shortest series [`detect_instability`] accepts.
pub const MIN_SERIES_LEN: usize = 10_000;
/// Least-squares slope (requests per slot) above which a queue is growing.
pub const SLOPE_THRESHOLD: f64 = 1e-3;
/// Required ratio of the final value to the first-quartile mean.
pub const GROWTH_FACTOR: f64 = 4.0;
/// Batches used for the batch-means standard error of the mean queue.
pub const BATCHES: usize = 40;
/// Seed spacing between consecutive runs of a sweep.
pub const SWEEP_SEED_STRIDE: u64 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolPolicy {
    Fixed(u32),
    /// Closed loop; `mu: None` means `0.01 / n1`.
    Adaptive { mu: Option<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Per-device mean arrival rates; the length is the device count.
    pub rates: Vec<f64>,
    pub l_total: u32,
    pub pool: PoolPolicy,
    pub law: ArrivalLaw,
    pub horizon: u64,
    /// Leading slots excluded from summaries.
    pub warmup: u64,
    pub seed: u64,
}

impl ScenarioConfig {
    /// `n1` devices at a common rate, Bernoulli arrivals, 10% warmup.
    pub fn uniform(n1: usize, lambda: f64, l_total: u32, pool: PoolPolicy, horizon: u64, seed: u64) -> Self {
        Self {
            rates: vec![lambda; n1],
            l_total,
            pool,
            law: ArrivalLaw::Bernoulli,
            horizon,
            warmup: horizon / 10,
            seed,
        }
    }

    pub fn n1(&self) -> usize {
        self.rates.len()
    }

    pub fn mean_rate(&self) -> f64 {
        self.rates.iter().sum::<f64>() / self.rates.len().max(1) as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.rates.is_empty() {
            return Err(invalid("n1", "at least one device is required"));
        }
        if self.l_total < 2 {
            return Err(invalid("l_total", "at least two preambles are required"));
        }
        match self.pool {
            PoolPolicy::Fixed(l1) if l1 < 1 || l1 > self.l_total - 1 => {
                return Err(invalid(
                    "l1",
                    format!("{l1} is outside [1, {}]", self.l_total - 1),
                ))
            }
            PoolPolicy::Adaptive { mu: Some(mu) } if !(mu.is_finite() && mu > 0.0) => {
                return Err(invalid("mu", format!("{mu} is not a positive step size")))
            }
            _ => {}
        }
        if self.horizon == 0 {
            return Err(invalid("horizon", "must be positive"));
        }
        if self.warmup >= self.horizon {
            return Err(invalid(
                "warmup",
                format!("{} must be below the horizon {}", self.warmup, self.horizon),
            ));
        }
        ArrivalModel::new(self.law, self.rates.clone()).map(|_| ())
    }
}

/// Histogram of access delays: entry `d` counts requests served `d` slots
/// after arriving.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayHistogram(Vec<u64>);

impl DelayHistogram {
    pub fn record(&mut self, delay: u64) {
        let d = delay as usize;
        if d >= self.0.len() {
            self.0.resize(d + 1, 0);
        }
        self.0[d] += 1;
    }

    pub fn count(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn max(&self) -> Option<u64> {
        self.0.iter().rposition(|&c| c > 0).map(|d| d as u64)
    }

    pub fn mean(&self) -> Option<f64> {
        let n = self.count();
        (n > 0).then(|| {
            let total: f64 = self.0.iter().enumerate().map(|(d, &c)| d as f64 * c as f64).sum();
            total / n as f64
        })
    }

    /// `(delay, count)` pairs with nonzero count.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(d, &c)| (d as u64, c))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstabilityVerdict {
    pub unstable: bool,
    /// Least-squares slope over the second half of the series.
    pub slope: f64,
}

/// Flags a mean-queue series as unstable when its second half trends upward
/// faster than [`SLOPE_THRESHOLD`] and its last value exceeds
/// [`GROWTH_FACTOR`] times the mean of its first quarter.
pub fn detect_instability(series: &[f64]) -> Result<InstabilityVerdict> {
    if series.len() < MIN_SERIES_LEN {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            min: MIN_SERIES_LEN,
        });
    }
    let tail = &series[series.len() / 2..];
    let slope = least_squares_slope(tail);
    let quarter = &series[..series.len() / 4];
    let early = quarter.iter().sum::<f64>() / quarter.len() as f64;
    let last = *series.last().unwrap();
    Ok(InstabilityVerdict {
        unstable: slope > SLOPE_THRESHOLD && last > GROWTH_FACTOR * early,
        slope,
    })
}

fn least_squares_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = ys.iter().sum::<f64>() / n;
    let (sxy, sxx) = ys.iter().enumerate().fold((0.0, 0.0), |(sxy, sxx), (i, &y)| {
        let dx = i as f64 - x_mean;
        (sxy + dx * (y - y_mean), sxx + dx * dx)
    });
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Mean and batch-means standard error.
fn batch_mean(values: &[f64], batches: usize) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let size = n / batches;
    if size == 0 || batches < 2 {
        return (mean, f64::NAN);
    }
    let means: Vec<f64> = values
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// Slots after warmup.
    pub measured_slots: u64,
    /// Time average of the per-device mean queue after warmup.
    pub mean_queue: f64,
    pub mean_queue_stderr: f64,
    pub max_queue: u64,
    /// Mean access delay of requests served after warmup.
    pub mean_delay: Option<f64>,
    pub served_requests: u64,
    /// Fraction of transmissions after warmup that collided.
    pub collision_rate: f64,
    /// Successes per device per slot after warmup.
    pub throughput: f64,
    /// Arrivals per device per slot after warmup.
    pub arrival_rate: f64,
    pub mean_l1: f64,
    pub final_l1: u32,
    pub final_z: Option<f64>,
    /// `None` when the horizon is too short to judge.
    pub stable: Option<bool>,
    pub drift_slope: Option<f64>,
}

/// Per-slot series plus summary of one run. Queue figures are taken at the
/// end of each slot, after service.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub n1: usize,
    pub k1_by_slot: Vec<u32>,
    pub successes_by_slot: Vec<u32>,
    pub collisions_by_slot: Vec<u32>,
    /// Pool size in force during each slot.
    pub l1_by_slot: Vec<u32>,
    /// Control value that produced the pool size of each slot; for a fixed
    /// pool this is `1 - 1/l1`.
    pub z_by_slot: Vec<f64>,
    pub mean_queue_by_slot: Vec<f64>,
    pub max_queue_by_slot: Vec<u32>,
    pub access_delays: DelayHistogram,
    pub total_arrivals: u64,
    pub total_successes: u64,
    pub summary: RunSummary,
}

impl RunMetrics {
    pub fn horizon(&self) -> usize {
        self.k1_by_slot.len()
    }
}

pub fn run(config: &ScenarioConfig) -> Result<RunMetrics> {
    config.validate()?;
    let n1 = config.n1();
    let model = ArrivalModel::new(config.law, config.rates.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut devices = vec![DeviceState::new(); n1];

    let (mut controller, mut l1) = match config.pool {
        PoolPolicy::Fixed(l1) => (None, l1),
        PoolPolicy::Adaptive { mu } => {
            let mu = mu.unwrap_or_else(|| default_step_size(n1));
            let c = ControllerState::new(n1, config.l_total, mu)?;
            let l1 = c.l1();
            (Some(c), l1)
        }
    };

    let horizon = config.horizon as usize;
    let mut m = RunMetrics {
        n1,
        k1_by_slot: Vec::with_capacity(horizon),
        successes_by_slot: Vec::with_capacity(horizon),
        collisions_by_slot: Vec::with_capacity(horizon),
        l1_by_slot: Vec::with_capacity(horizon),
        z_by_slot: Vec::with_capacity(horizon),
        mean_queue_by_slot: Vec::with_capacity(horizon),
        max_queue_by_slot: Vec::with_capacity(horizon),
        access_delays: DelayHistogram::default(),
        total_arrivals: 0,
        total_successes: 0,
        summary: RunSummary {
            measured_slots: 0,
            mean_queue: 0.0,
            mean_queue_stderr: 0.0,
            max_queue: 0,
            mean_delay: None,
            served_requests: 0,
            collision_rate: 0.0,
            throughput: 0.0,
            arrival_rate: 0.0,
            mean_l1: 0.0,
            final_l1: l1,
            final_z: None,
            stable: None,
            drift_slope: None,
        },
    };
    let mut measured_arrivals = 0u64;
    let mut measured_successes = 0u64;
    let mut measured_transmissions = 0u64;
    let mut measured_collisions = 0u64;

    for t in 0..config.horizon {
        let z = controller
            .as_ref()
            .map_or(1.0 - 1.0 / f64::from(l1), ControllerState::z);
        let out = step_slot(&mut devices, &model, l1, t, &mut rng)?;

        let arrivals: u64 = out.arrivals.iter().map(|&a| u64::from(a)).sum();
        let successes = out.successes.len() as u64;
        m.total_arrivals += arrivals;
        m.total_successes += successes;
        if t >= config.warmup {
            measured_arrivals += arrivals;
            measured_successes += successes;
            measured_transmissions += out.k1() as u64;
            measured_collisions += out.collisions.len() as u64;
            for &d in &out.delays {
                m.access_delays.record(d);
            }
        }

        let (sum, max) = devices.iter().fold((0usize, 0usize), |(s, mx), d| {
            (s + d.queue_len(), mx.max(d.queue_len()))
        });
        m.k1_by_slot.push(out.k1() as u32);
        m.successes_by_slot.push(out.successes.len() as u32);
        m.collisions_by_slot.push(out.collisions.len() as u32);
        m.l1_by_slot.push(l1);
        m.z_by_slot.push(z);
        m.mean_queue_by_slot.push(sum as f64 / n1 as f64);
        m.max_queue_by_slot.push(max as u32);

        if let Some(c) = controller.as_mut() {
            l1 = c.update(out.k1());
        }
    }

    let w = config.warmup as usize;
    let measured = (horizon - w) as f64;
    let (mean_queue, stderr) = batch_mean(&m.mean_queue_by_slot[w..], BATCHES);
    let verdict = detect_instability(&m.mean_queue_by_slot).ok();
    m.summary = RunSummary {
        measured_slots: (horizon - w) as u64,
        mean_queue,
        mean_queue_stderr: stderr,
        max_queue: m.max_queue_by_slot[w..].iter().copied().max().unwrap_or(0).into(),
        mean_delay: m.access_delays.mean(),
        served_requests: m.access_delays.count(),
        collision_rate: if measured_transmissions > 0 {
            measured_collisions as f64 / measured_transmissions as f64
        } else {
            0.0
        },
        throughput: measured_successes as f64 / (measured * n1 as f64),
        arrival_rate: measured_arrivals as f64 / (measured * n1 as f64),
        mean_l1: m.l1_by_slot[w..].iter().map(|&l| f64::from(l)).sum::<f64>() / measured,
        final_l1: l1,
        final_z: controller.as_ref().map(ControllerState::z),
        stable: verdict.map(|v| !v.unstable),
        drift_slope: verdict.map(|v| v.slope),
    };
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    Lambda,
    N1,
    L1,
    Seed,
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(Self::Lambda),
            "n1" => Ok(Self::N1),
            "l1" => Ok(Self::L1),
            "seed" => Ok(Self::Seed),
            other => Err(Error::UnknownParameter(other.to_string())),
        }
    }
}

fn as_count(name: &'static str, value: f64) -> Result<u64> {
    if value.is_finite() && value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
        Ok(value as u64)
    } else {
        Err(invalid(name, format!("{value} is not a non-negative integer")))
    }
}

/// The configuration a sweep uses for `value` at position `index`.
pub fn sweep_point(base: &ScenarioConfig, parameter: SweepParameter, value: f64, index: usize) -> Result<ScenarioConfig> {
    let mut config = base.clone();
    config.seed = base
        .seed
        .wrapping_add(SWEEP_SEED_STRIDE.wrapping_mul(index as u64));
    match parameter {
        SweepParameter::Lambda => config.rates = vec![value; base.n1()],
        SweepParameter::N1 => {
            let n1 = as_count("n1", value)? as usize;
            config.rates = vec![base.mean_rate(); n1];
        }
        SweepParameter::L1 => config.pool = PoolPolicy::Fixed(as_count("l1", value)? as u32),
        SweepParameter::Seed => config.seed = as_count("seed", value)?,
    }
    config.validate()?;
    Ok(config)
}

/// Independent runs, one per value, returned in input order.
pub fn sweep(base: &ScenarioConfig, parameter: SweepParameter, values: &[f64]) -> Result<Vec<(f64, RunMetrics)>> {
    let configs = values
        .iter()
        .enumerate()
        .map(|(i, &v)| sweep_point(base, parameter, v, i))
        .collect::<Result<Vec<_>>>()?;
    configs
        .par_iter()
        .zip(values.par_iter())
        .map(|(config, &v)| run(config).map(|m| (v, m)))
        .collect()
}
