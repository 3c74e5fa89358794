//! Test-only oracles, independent of the library's closed forms.
#![allow(dead_code)]

/// Sign of `f(a) - f(b)` for `f(z) = (total z - z^n) / n`, using
/// `a^n - b^n = (a - b) sum_k a^k b^(n-1-k)` so that nearly equal values
/// still compare correctly.
fn objective_cmp(a: f64, b: f64, total: f64, n: usize) -> std::cmp::Ordering {
    let mut sum = 0.0;
    let mut ak = 1.0;
    for k in 0..n {
        sum += ak * b.powi((n - 1 - k) as i32);
        ak *= a;
    }
    let diff = (a - b) * (total - sum);
    diff.partial_cmp(&0.0).unwrap()
}

/// Golden-section maximisation of the pool objective on `[0, 1)`.
pub fn golden_section_argmax(total: f64, n: usize) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    while hi - lo > 1e-13 {
        if objective_cmp(x1, x2, total, n) == std::cmp::Ordering::Less {
            lo = x1;
            x1 = x2;
            x2 = lo + inv_phi * (hi - lo);
        } else {
            hi = x2;
            x2 = x1;
            x1 = hi - inv_phi * (hi - lo);
        }
    }
    0.5 * (lo + hi)
}

/// Smallest pool size satisfying the strict stability condition, by
/// scanning upward from 1.
pub fn brute_force_min_l1(mean_rate: f64, n1: usize) -> u32 {
    (1u32..)
        .find(|&l| mean_rate < (1.0 - 1.0 / f64::from(l)).powi(n1 as i32 - 1))
        .unwrap()
}
