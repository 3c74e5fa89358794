use fastretrial::engine::{run, PoolPolicy, ScenarioConfig};
use fastretrial::oracle::*;

#[test]
fn simulator_matches_exact_chain() {
    let exact = exact_mean_queue(2, 2, 0.1, DEFAULT_CAP).unwrap();
    let mut c = ScenarioConfig::uniform(2, 0.1, 3, PoolPolicy::Fixed(2), 1_000_000, 77);
    c.warmup = 1_000;
    let s = run(&c).unwrap().summary;
    let z = (s.mean_queue - exact).abs() / s.mean_queue_stderr;
    println!("exact {exact:.6} simulated {:.6} +- {:.6}", s.mean_queue, s.mean_queue_stderr);
    assert!(z <= 3.0, "{z} standard errors apart");
}

#[test]
fn stable_mean_does_not_depend_on_cap() {
    for (n1, l1, lambda) in [(2, 2, 0.15), (3, 3, 0.1), (3, 2, 0.05)] {
        let a = exact_mean_queue(n1, l1, lambda, 15).unwrap();
        let b = exact_mean_queue(n1, l1, lambda, 30).unwrap();
        assert!((a - b).abs() < 0.01 * b, "n1={n1} l1={l1}: {a} vs {b}");
    }
}

#[test]
fn stationary_vector_is_a_fixed_point() {
    let model = fastretrial::model::ArrivalModel::uniform(fastretrial::model::ArrivalLaw::Bernoulli, 3, 0.1).unwrap();
    let chain = build_chain(3, 3, &model, 10).unwrap();
    let pi = stationary_distribution(&chain).unwrap();
    assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let m = chain.transition();
    let mut next = vec![0.0; pi.len()];
    for (i, &p) in pi.iter().enumerate() {
        for (j, q) in m.row(i) {
            next[j] += p * q;
        }
    }
    let residual: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
    assert!(residual < 1e-10);
}
