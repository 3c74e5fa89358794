//! Closed-form stability conditions for fast retrial on a pool of `l1`
//! preambles shared by `n1` type-1 devices.
//!
//! The queue vector is positive recurrent when the mean per-device arrival
//! rate is strictly below the full-load success probability
//! `(1 - 1/l1)^(n1 - 1)`, i.e. the success chance of a device when all `n1`
//! devices transmit.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Probability that a device's preamble is not picked by any of the other
/// `n1 - 1` devices when all of them transmit.
pub fn full_load_success_prob(n1: usize, l1: u32) -> Result<f64> {
    if n1 < 1 {
        return Err(invalid("n1", "at least one device is required"));
    }
    if l1 < 1 {
        return Err(invalid("l1", "pool size must be at least 1"));
    }
    Ok(success_prob(n1, f64::from(l1)))
}

/// `(1 - 1/l1)^(n1-1)` for a real-valued pool size.
fn success_prob(n1: usize, l1: f64) -> f64 {
    let exponent = i32::try_from(n1 - 1).unwrap_or(i32::MAX);
    (1.0 - 1.0 / l1).powi(exponent)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub n1: usize,
    pub l1: u32,
    pub mean_rate: f64,
    pub full_load_success: f64,
    pub stable: bool,
    /// `full_load_success - mean_rate`.
    pub margin: f64,
}

fn validate_rates(rates: &[f64]) -> Result<f64> {
    if rates.is_empty() {
        return Err(invalid("rates", "at least one device is required"));
    }
    if let Some(r) = rates.iter().find(|r| !r.is_finite() || **r < 0.0) {
        return Err(invalid("rates", format!("{r} is not a finite rate >= 0")));
    }
    Ok(rates.iter().sum::<f64>() / rates.len() as f64)
}

pub fn check_stability(rates: &[f64], l1: u32) -> Result<StabilityReport> {
    let mean_rate = validate_rates(rates)?;
    let full_load_success = full_load_success_prob(rates.len(), l1)?;
    Ok(StabilityReport {
        n1: rates.len(),
        l1,
        mean_rate,
        full_load_success,
        stable: mean_rate < full_load_success,
        margin: full_load_success - mean_rate,
    })
}

/// Bounds on the number of type-1 devices a pool of `l1` preambles keeps
/// stable when every device has rate at most `lambda_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceBound {
    /// Largest `n1` with `lambda_max < (1 - 1/l1)^(n1-1)`; 0 when even a
    /// single device fails the strict inequality (`lambda_max == 1`).
    pub exact: usize,
    /// `1 + l1 ln(1/lambda_max)`, from `(1 - 1/l1)^k <= exp(-k/l1)`.
    pub exponential: f64,
}

pub fn max_stable_n1(lambda_max: f64, l1: u32) -> Result<DeviceBound> {
    if !(lambda_max > 0.0 && lambda_max <= 1.0) {
        return Err(invalid("lambda_max", format!("{lambda_max} is not in (0, 1]")));
    }
    if l1 < 2 {
        return Err(invalid("l1", "pool size must be at least 2"));
    }
    let z = 1.0 - 1.0 / f64::from(l1);
    let exponential = 1.0 + f64::from(l1) * (1.0 / lambda_max).ln();

    // Largest k = n1 - 1 with z^k > lambda_max, starting from the log estimate
    // and corrected by direct evaluation.
    let estimate = (lambda_max.ln() / z.ln()).floor().max(0.0) as i64;
    let holds = |k: i64| k >= 0 && z.powi(k as i32) > lambda_max;
    let mut k = estimate;
    while holds(k + 1) {
        k += 1;
    }
    while k >= 0 && !holds(k) {
        k -= 1;
    }
    Ok(DeviceBound {
        exact: (k + 1) as usize,
        exponential,
    })
}

/// Smallest pool size keeping `n1` devices with mean rate `mean_rate` stable.
pub fn min_stable_l1(mean_rate: f64, n1: usize) -> Result<u32> {
    if !(0.0..1.0).contains(&mean_rate) {
        return Err(invalid(
            "mean_rate",
            format!("{mean_rate} is not in [0, 1); no finite pool is stable"),
        ));
    }
    if n1 < 1 {
        return Err(invalid("n1", "at least one device is required"));
    }
    if n1 == 1 {
        return Ok(1);
    }
    let stable = |l1: u32| mean_rate < success_prob(n1, f64::from(l1));
    let root = mean_rate.powf(1.0 / (n1 - 1) as f64);
    let guess = (1.0 / (1.0 - root)).ceil();
    if !guess.is_finite() || guess > f64::from(u32::MAX - 1) {
        return Err(invalid("mean_rate", "required pool size overflows"));
    }
    let mut l1 = (guess as u32).max(1);
    while !stable(l1) {
        l1 += 1;
    }
    while l1 > 1 && stable(l1 - 1) {
        l1 -= 1;
    }
    Ok(l1)
}

/// `f(z) = (total_rate z - z^n1) / n1`, the objective whose maximiser gives
/// the smallest stable pool.
pub fn objective(z: f64, total_rate: f64, n1: usize) -> f64 {
    (total_rate * z - z.powi(n1 as i32)) / n1 as f64
}

/// `df/dz = total_rate/n1 - z^(n1-1)`.
pub fn objective_slope(z: f64, total_rate: f64, n1: usize) -> f64 {
    total_rate / n1 as f64 - z.powi(n1 as i32 - 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalPool {
    /// Maximiser of the objective on `[0, 1)`.
    pub z: f64,
    /// Continuous pool size `1 / (1 - z)`; the stability condition holds with
    /// equality here.
    pub l1: f64,
}

pub fn optimal_z(total_rate: f64, n1: usize) -> Result<OptimalPool> {
    if n1 < 2 {
        return Err(invalid("n1", "at least two devices are required"));
    }
    if !(total_rate >= 0.0 && total_rate < n1 as f64) {
        return Err(invalid(
            "total_rate",
            format!("{total_rate} is not in [0, {n1})"),
        ));
    }
    let z = (total_rate / n1 as f64).powf(1.0 / (n1 - 1) as f64);
    Ok(OptimalPool {
        z,
        l1: 1.0 / (1.0 - z),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_load_edge_cases() {
        assert_eq!(full_load_success_prob(1, 7).unwrap(), 1.0);
        assert_eq!(full_load_success_prob(1, 1).unwrap(), 1.0);
        assert_eq!(full_load_success_prob(5, 1).unwrap(), 0.0);
        assert!((full_load_success_prob(30, 20).unwrap() - 0.2259).abs() < 1e-4);
        assert!(full_load_success_prob(0, 3).is_err());
        assert!(full_load_success_prob(3, 0).is_err());
    }

    #[test]
    fn stability_reports() {
        let r = check_stability(&[0.2; 30], 20).unwrap();
        assert!(r.stable);
        assert!((r.margin - 0.0259).abs() < 1e-4);
        let r = check_stability(&[0.23; 30], 20).unwrap();
        assert!(!r.stable);
        let r = check_stability(&[0.999], 3).unwrap();
        assert!(r.stable);
        assert_eq!(r.full_load_success, 1.0);
        assert!(check_stability(&[], 3).is_err());
    }

    #[test]
    fn device_bounds() {
        let b = max_stable_n1(1.0, 20).unwrap();
        assert_eq!(b.exponential, 1.0);
        assert_eq!(b.exact, 0);
        let b = max_stable_n1(0.2, 20).unwrap();
        assert!((b.exponential - (1.0 + 20.0 * 5f64.ln())).abs() < 1e-12);
        assert!((b.exponential - 33.19).abs() < 0.01);
        assert_eq!(b.exact, 32);
        assert!(max_stable_n1(0.0, 20).is_err());
        assert!(max_stable_n1(1.1, 20).is_err());
        assert!(max_stable_n1(0.5, 1).is_err());
    }

    #[test]
    fn minimum_pool() {
        assert_eq!(min_stable_l1(0.7, 1).unwrap(), 1);
        assert_eq!(min_stable_l1(0.2, 30).unwrap(), 19);
        assert!(check_stability(&[0.2; 30], 19).unwrap().stable);
        assert!(!check_stability(&[0.2; 30], 18).unwrap().stable);
        assert!(min_stable_l1(1.0, 5).is_err());
        assert_eq!(min_stable_l1(0.0, 5).unwrap(), 2);
    }

    #[test]
    fn optimal_z_values() {
        assert_eq!(optimal_z(0.0, 30).unwrap().z, 0.0);
        let opt = optimal_z(6.0, 30).unwrap();
        assert!((opt.z - 0.9460).abs() < 1e-4);
        assert!((opt.l1 - 18.52).abs() < 0.01);
        assert!(optimal_z(30.0, 30).is_err());
        assert!(optimal_z(1.0, 1).is_err());
    }

    #[test]
    fn optimum_meets_condition_with_equality() {
        for n1 in [2usize, 5, 30, 100] {
            for total in [0.1, 0.5, 0.2 * n1 as f64] {
                let opt = optimal_z(total, n1).unwrap();
                let p = success_prob(n1, opt.l1);
                assert!((p - total / n1 as f64).abs() < 1e-10, "n1={n1} total={total}");
            }
        }
    }
}
