use fastretrial::engine::*;
use fastretrial::stability::{check_stability, max_stable_n1, min_stable_l1};

fn fixed(n1: usize, lambda: f64, l1: u32, horizon: u64, seed: u64) -> ScenarioConfig {
    ScenarioConfig::uniform(n1, lambda, 50, PoolPolicy::Fixed(l1), horizon, seed)
}

#[test]
fn stable_regime_has_short_queues() {
    let m = run(&fixed(30, 0.15, 20, 200_000, 1)).unwrap();
    assert!(m.summary.mean_queue.is_finite() && m.summary.mean_queue < 3.0);
    assert_eq!(m.summary.stable, Some(true));
    assert!(check_stability(&[0.15; 30], 20).unwrap().stable);
}

#[test]
fn overloaded_regime_is_flagged() {
    let m = run(&fixed(30, 0.25, 20, 200_000, 1)).unwrap();
    assert_eq!(m.summary.stable, Some(false));
    assert!(m.summary.drift_slope.unwrap() > SLOPE_THRESHOLD);
}

#[test]
fn runs_are_deterministic() {
    let c = ScenarioConfig::uniform(12, 0.2, 20, PoolPolicy::Adaptive { mu: None }, 20_000, 42);
    assert_eq!(run(&c).unwrap(), run(&c).unwrap());
    let mut other = c.clone();
    other.seed = 43;
    assert_ne!(run(&c).unwrap().k1_by_slot, run(&other).unwrap().k1_by_slot);
}

#[test]
fn littles_law_holds_on_stable_runs() {
    for (n1, lambda, l1) in [(30, 0.15, 20), (10, 0.3, 8), (5, 0.1, 3)] {
        let m = run(&fixed(n1, lambda, l1, 200_000, 5)).unwrap();
        let s = &m.summary;
        let predicted = lambda * s.mean_delay.unwrap();
        assert!(
            (s.mean_queue - predicted).abs() <= 0.1 * s.mean_queue,
            "n1={n1}: queue {} vs lambda x delay {predicted}",
            s.mean_queue
        );
    }
}

#[test]
fn metric_invariants() {
    let m = run(&fixed(20, 0.25, 10, 30_000, 8)).unwrap();
    assert!(m
        .mean_queue_by_slot
        .iter()
        .zip(&m.max_queue_by_slot)
        .all(|(&mean, &max)| mean <= f64::from(max)));
    assert!(m.total_successes <= m.total_arrivals);
    assert_eq!(m.horizon(), 30_000);
    assert!(m.k1_by_slot.iter().all(|&k| k <= 20));
    assert!(m
        .successes_by_slot
        .iter()
        .zip(&m.collisions_by_slot)
        .zip(&m.k1_by_slot)
        .all(|((&s, &c), &k)| s + c == k));
}

#[test]
fn stable_throughput_matches_arrivals() {
    let m = run(&fixed(30, 0.15, 20, 200_000, 3)).unwrap();
    let rel = (m.summary.throughput - 0.15).abs() / 0.15;
    assert!(rel < 0.02, "throughput {}", m.summary.throughput);
}

#[test]
fn closed_loop_pool_stays_in_band() {
    for n1 in [10usize, 30] {
        let c = ScenarioConfig::uniform(n1, 0.2, 50, PoolPolicy::Adaptive { mu: None }, 100_000, 4);
        let m = run(&c).unwrap();
        let lower = min_stable_l1(0.2, n1).unwrap() - 1;
        let burn_in = 10_000;
        assert!(
            m.l1_by_slot[burn_in..].iter().all(|&l| (lower..=49).contains(&l)),
            "n1={n1}"
        );
    }
}

#[test]
fn lambda_sweep_is_monotone() {
    let values: Vec<f64> = (0..=8).map(|i| 0.05 + 0.025 * f64::from(i)).collect();
    let mut means = vec![0.0; values.len()];
    for seed in 0..3 {
        let base = fixed(30, 0.2, 20, 200_000, 100 + seed);
        for (i, (v, m)) in sweep(&base, SweepParameter::Lambda, &values).unwrap().into_iter().enumerate() {
            assert_eq!(v, values[i]);
            means[i] += m.summary.mean_queue / 3.0;
        }
    }
    assert!(means.windows(2).all(|w| w[1] >= w[0]), "{means:?}");
}

#[test]
fn device_count_sweep_matches_bound() {
    let bound = max_stable_n1(0.2, 20).unwrap().exact;
    assert_eq!(bound, 32);
    let values: Vec<f64> = (1..=8).map(|i| 5.0 * f64::from(i)).collect();
    let base = fixed(30, 0.2, 20, 200_000, 11);
    for (v, m) in sweep(&base, SweepParameter::N1, &values).unwrap() {
        let n1 = v as usize;
        assert_eq!(m.n1, n1);
        if n1 > bound {
            assert_eq!(m.summary.stable, Some(false), "n1={n1}");
        } else if n1 <= 30 {
            assert_eq!(m.summary.stable, Some(true), "n1={n1}");
        }
    }
}

#[test]
fn sweep_matches_individual_runs() {
    let base = fixed(6, 0.2, 4, 5_000, 9);
    let values = [3.0, 5.0, 4.0];
    let results = sweep(&base, SweepParameter::L1, &values).unwrap();
    for (i, (v, m)) in results.iter().enumerate() {
        assert_eq!(*v, values[i]);
        let c = sweep_point(&base, SweepParameter::L1, values[i], i).unwrap();
        assert_eq!(c.seed, 9 + 1000 * i as u64);
        assert_eq!(m, &run(&c).unwrap());
    }
    assert!(sweep(&base, SweepParameter::L1, &[50.0]).is_err());
}

#[test]
fn poisson_arrivals_supported() {
    let mut c = fixed(10, 0.1, 8, 50_000, 2);
    c.law = fastretrial::model::ArrivalLaw::Poisson;
    let m = run(&c).unwrap();
    assert!((m.summary.arrival_rate - 0.1).abs() < 0.01);
    assert_eq!(m.summary.stable, Some(true));
}
