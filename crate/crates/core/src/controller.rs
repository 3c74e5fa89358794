//! Adaptive sizing of the type-1 preamble pool.
//!
//! The base station never sees the arrival rates. After each slot it observes
//! the number of active devices `k1`, estimates the aggregate rate as
//! `k1 exp(-k1 / l1)` and takes one stochastic-gradient ascent step on
//! `z = 1 - 1/l1`. The emitted pool size is `ceil(max(1, 1/(1 - z)))`, clamped
//! so that at least one preamble stays with type-2 devices.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Upper projection bound on `z` is `1 - Z_MARGIN`.
pub const Z_MARGIN: f64 = 1e-6;

/// Step size used when none is configured: `0.01 / n1`.
pub fn default_step_size(n1: usize) -> f64 {
    0.01 / n1 as f64
}

/// Aggregate arrival-rate estimate from one observed active count, under a
/// Poisson model of the active count.
pub fn estimate_total_rate(k1: usize, l1: u32) -> f64 {
    let k = k1 as f64;
    k * (-k / f64::from(l1.max(1))).exp()
}

/// Pool size for a control value, clamped to `[floor, cap]`.
pub fn pool_size_for(z: f64, floor: u32, cap: u32) -> u32 {
    let raw = (1.0 / (1.0 - z)).max(1.0).ceil();
    let raw = if raw.is_finite() && raw < f64::from(u32::MAX) {
        raw as u32
    } else {
        u32::MAX
    };
    raw.clamp(floor, cap)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    z: f64,
    mu: f64,
    n1: usize,
    l1_floor: u32,
    l1_cap: u32,
    /// Pool size in force for the slot being observed.
    l1: u32,
}

impl ControllerState {
    /// Controller for `n1` devices sharing `l_total` preambles with type-2
    /// devices. Starts from the largest admissible pool, `l_total - 1`.
    pub fn new(n1: usize, l_total: u32, mu: f64) -> Result<Self> {
        if l_total < 2 {
            return Err(invalid("l_total", "at least two preambles are required"));
        }
        let cap = l_total - 1;
        Self::from_parts(n1, mu, 1, cap, 1.0 - 1.0 / f64::from(cap), cap)
    }

    /// Controller with explicit control value and pool size in force.
    pub fn from_parts(n1: usize, mu: f64, l1_floor: u32, l1_cap: u32, z: f64, l1: u32) -> Result<Self> {
        if n1 < 1 {
            return Err(invalid("n1", "at least one device is required"));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(invalid("mu", format!("{mu} is not a positive step size")));
        }
        if l1_floor < 1 || l1_floor > l1_cap {
            return Err(invalid(
                "l1_floor",
                format!("floor {l1_floor} must be in [1, {l1_cap}]"),
            ));
        }
        if !(0.0..=1.0 - Z_MARGIN).contains(&z) {
            return Err(invalid("z", format!("{z} is outside [0, 1 - {Z_MARGIN}]")));
        }
        if !(l1_floor..=l1_cap).contains(&l1) {
            return Err(invalid("l1", format!("{l1} is outside [{l1_floor}, {l1_cap}]")));
        }
        Ok(Self {
            z,
            mu,
            n1,
            l1_floor,
            l1_cap,
            l1,
        })
    }

    pub fn with_floor(mut self, floor: u32) -> Result<Self> {
        if floor < 1 || floor > self.l1_cap {
            return Err(invalid("l1_floor", format!("floor {floor} must be in [1, {}]", self.l1_cap)));
        }
        self.l1_floor = floor;
        self.l1 = self.l1.max(floor);
        Ok(self)
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn l1(&self) -> u32 {
        self.l1
    }

    pub fn l1_floor(&self) -> u32 {
        self.l1_floor
    }

    pub fn l1_cap(&self) -> u32 {
        self.l1_cap
    }

    /// Feeds the active count seen in the last slot and returns the pool size
    /// for the next one.
    pub fn update(&mut self, k1: usize) -> u32 {
        let estimate = estimate_total_rate(k1, self.l1);
        let n = self.n1 as f64;
        let penalty = n * self.z.powi(self.n1 as i32 - 1);
        let next = self.z + self.mu / n * (estimate - penalty);
        self.z = if next.is_nan() {
            self.z
        } else {
            next.clamp(0.0, 1.0 - Z_MARGIN)
        };
        self.l1 = pool_size_for(self.z, self.l1_floor, self.l1_cap);
        self.l1
    }
}
