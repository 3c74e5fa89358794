//! Exact analysis of tiny instances. The joint queue vector of up to three
//! devices is a Markov chain; truncating each queue at a cap gives a finite
//! chain whose stationary distribution yields exact mean queue lengths to
//! check the simulator against.

use std::collections::BTreeMap;

use crate::error::{invalid, Error, Result};
use crate::model::{ArrivalLaw, ArrivalModel};

pub const MAX_DEVICES: usize = 3;
pub const MAX_STATES: usize = 100_000;
pub const DEFAULT_CAP: u32 = 30;
pub const TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 1_000_000;

/// Row-stochastic matrix in compressed sparse row form.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticMatrix {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    probs: Vec<f64>,
}

impl StochasticMatrix {
    /// Builds from sparse rows of `(column, probability)`; duplicate columns
    /// are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        let mut row_start = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut probs = Vec::new();
        row_start.push(0);
        for (i, row) in rows.into_iter().enumerate() {
            let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
            for (j, p) in row {
                if j >= n {
                    return Err(invalid("matrix", format!("column {j} out of range in row {i}")));
                }
                if !(p >= 0.0 && p.is_finite()) {
                    return Err(invalid("matrix", format!("entry ({i}, {j}) is {p}")));
                }
                *merged.entry(j).or_default() += p;
            }
            let sum: f64 = merged.values().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(invalid("matrix", format!("row {i} sums to {sum}")));
            }
            for (j, p) in merged {
                if p > 0.0 {
                    cols.push(j);
                    probs.push(p);
                }
            }
            row_start.push(cols.len());
        }
        Ok(Self {
            row_start,
            cols,
            probs,
        })
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().copied().enumerate().collect())
                .collect(),
        )
    }

    pub fn identity(n: usize) -> Self {
        Self {
            row_start: (0..=n).collect(),
            cols: (0..n).collect(),
            probs: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.row_start.len() - 1
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_start[i]..self.row_start[i + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.probs[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, p)| p)
    }

    /// Writes `pi P` into `out`.
    fn left_mul(&self, pi: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (i, &mass) in pi.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for k in self.row_start[i]..self.row_start[i + 1] {
                out[self.cols[k]] += mass * self.probs[k];
            }
        }
    }
}

/// Power iteration from `initial` until `||pi P - pi||_1 < TOLERANCE`.
pub fn stationary_from(matrix: &StochasticMatrix, initial: &[f64]) -> Result<Vec<f64>> {
    let n = matrix.dim();
    if initial.len() != n {
        return Err(invalid("initial", format!("length {} for {n} states", initial.len())));
    }
    let total: f64 = initial.iter().sum();
    if total.is_nan() || total <= 0.0 || initial.iter().any(|&p| p.is_nan() || p < 0.0) {
        return Err(invalid("initial", "must be a non-negative, nonzero vector"));
    }
    let mut pi: Vec<f64> = initial.iter().map(|p| p / total).collect();
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        matrix.left_mul(&pi, &mut next);
        residual = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        if residual < TOLERANCE {
            let s: f64 = pi.iter().sum();
            pi.iter_mut().for_each(|p| *p /= s);
            return Ok(pi);
        }
        std::mem::swap(&mut pi, &mut next);
    }
    Err(Error::NotConverged {
        iterations: MAX_ITERATIONS,
        residual,
    })
}

/// Truncated joint-queue chain for `n1 <= 3` devices with Bernoulli arrivals.
#[derive(Clone, Debug)]
pub struct TruncatedChain {
    n1: usize,
    l1: u32,
    cap: u32,
    rates: Vec<f64>,
    transition: StochasticMatrix,
}

impl TruncatedChain {
    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn l1(&self) -> u32 {
        self.l1
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn transition(&self) -> &StochasticMatrix {
        &self.transition
    }

    pub fn num_states(&self) -> usize {
        self.transition.dim()
    }

    /// State index of a queue vector (device 0 is the least significant digit).
    pub fn index_of(&self, queues: &[u32]) -> usize {
        encode(queues, self.cap)
    }

    pub fn queues_of(&self, index: usize) -> Vec<u32> {
        decode(index, self.n1, self.cap)
    }

    /// Per-device mean queue length, averaged over devices, under `pi`.
    pub fn mean_queue(&self, pi: &[f64]) -> f64 {
        pi.iter()
            .enumerate()
            .map(|(s, &p)| {
                let total: u32 = self.queues_of(s).iter().sum();
                p * f64::from(total)
            })
            .sum::<f64>()
            / self.n1 as f64
    }
}

fn encode(queues: &[u32], cap: u32) -> usize {
    let base = cap as usize + 1;
    queues.iter().rev().fold(0, |acc, &q| acc * base + q as usize)
}

fn decode(mut index: usize, n1: usize, cap: u32) -> Vec<u32> {
    let base = cap as usize + 1;
    (0..n1)
        .map(|_| {
            let q = (index % base) as u32;
            index /= base;
            q
        })
        .collect()
}

/// Distribution of the success set among `k` transmitting devices, as
/// bitmasks over their positions, from all `l1^k` equiprobable choices.
fn success_patterns(k: usize, l1: u32) -> Vec<(u32, f64)> {
    let total = (l1 as usize).pow(k as u32);
    let weight = 1.0 / total as f64;
    let mut by_mask: BTreeMap<u32, f64> = BTreeMap::new();
    let mut choice = vec![0u32; k];
    for code in 0..total {
        let mut c = code;
        for slot in choice.iter_mut() {
            *slot = (c % l1 as usize) as u32;
            c /= l1 as usize;
        }
        let mask = (0..k)
            .filter(|&i| choice.iter().filter(|&&p| p == choice[i]).count() == 1)
            .fold(0u32, |m, i| m | (1 << i));
        *by_mask.entry(mask).or_default() += weight;
    }
    by_mask.into_iter().collect()
}

/// Exact transition matrix of the truncated chain. Slot order matches the
/// simulator: arrivals (saturating at `cap`), activity check, uniform
/// preamble draws, one departure per successful device.
pub fn build_chain(n1: usize, l1: u32, model: &ArrivalModel, cap: u32) -> Result<TruncatedChain> {
    if !(1..=MAX_DEVICES).contains(&n1) {
        return Err(invalid("n1", format!("{n1} is outside [1, {MAX_DEVICES}]")));
    }
    if l1 < 1 {
        return Err(invalid("l1", "pool size must be at least 1"));
    }
    if model.law() != ArrivalLaw::Bernoulli {
        return Err(invalid("law", "the exact chain supports Bernoulli arrivals only"));
    }
    if model.n1() != n1 {
        return Err(invalid(
            "rates",
            format!("{} rates for {n1} devices", model.n1()),
        ));
    }
    let states = (cap as usize + 1)
        .checked_pow(n1 as u32)
        .filter(|&s| s <= MAX_STATES)
        .ok_or(Error::StateSpaceTooLarge {
            states: (cap as usize + 1).saturating_pow(n1 as u32),
            limit: MAX_STATES,
        })?;

    let rates = model.rates().to_vec();
    let patterns: Vec<Vec<(u32, f64)>> = (0..=n1).map(|k| success_patterns(k, l1)).collect();
    let arrival_patterns: Vec<(u32, f64)> = (0..1u32 << n1)
        .map(|bits| {
            let p = rates
                .iter()
                .enumerate()
                .map(|(n, &r)| if bits >> n & 1 == 1 { r } else { 1.0 - r })
                .product();
            (bits, p)
        })
        .filter(|&(_, p)| p > 0.0)
        .collect();

    let mut rows = Vec::with_capacity(states);
    let mut after = vec![0u32; n1];
    let mut active = Vec::with_capacity(n1);
    for s in 0..states {
        let q = decode(s, n1, cap);
        let mut row: BTreeMap<usize, f64> = BTreeMap::new();
        for &(bits, p_arr) in &arrival_patterns {
            active.clear();
            for n in 0..n1 {
                after[n] = (q[n] + (bits >> n & 1)).min(cap);
                if after[n] > 0 {
                    active.push(n);
                }
            }
            for &(mask, p_succ) in &patterns[active.len()] {
                let mut next = after.clone();
                for (pos, &n) in active.iter().enumerate() {
                    if mask >> pos & 1 == 1 {
                        next[n] -= 1;
                    }
                }
                *row.entry(encode(&next, cap)).or_default() += p_arr * p_succ;
            }
        }
        rows.push(row.into_iter().collect());
    }

    Ok(TruncatedChain {
        n1,
        l1,
        cap,
        rates,
        transition: StochasticMatrix::from_rows(rows)?,
    })
}

/// Stationary distribution by power iteration from the uniform vector.
pub fn stationary_distribution(chain: &TruncatedChain) -> Result<Vec<f64>> {
    let n = chain.num_states();
    stationary_from(chain.transition(), &vec![1.0 / n as f64; n])
}

/// Stationary mean queue length per device.
pub fn exact_mean_queue(n1: usize, l1: u32, lambda: f64, cap: u32) -> Result<f64> {
    let model = ArrivalModel::uniform(ArrivalLaw::Bernoulli, n1, lambda)?;
    let chain = build_chain(n1, l1, &model, cap)?;
    let pi = stationary_distribution(&chain)?;
    Ok(chain.mean_queue(&pi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bern(n1: usize, rate: f64) -> ArrivalModel {
        ArrivalModel::uniform(ArrivalLaw::Bernoulli, n1, rate).unwrap()
    }

    #[test]
    fn encoding_round_trips() {
        for s in 0..(7usize.pow(3)) {
            assert_eq!(encode(&decode(s, 3, 6), 6), s);
        }
    }

    #[test]
    fn success_patterns_two_devices_two_preambles() {
        let p = success_patterns(2, 2);
        assert_eq!(p, vec![(0b00, 0.5), (0b11, 0.5)]);
        assert_eq!(success_patterns(0, 3), vec![(0, 1.0)]);
        assert_eq!(success_patterns(1, 3), vec![(1, 1.0)]);
    }

    #[test]
    fn collision_row_from_both_busy() {
        let chain = build_chain(2, 2, &bern(2, 0.0), 5).unwrap();
        let from = chain.index_of(&[1, 1]);
        let m = chain.transition();
        assert_eq!(m.get(from, chain.index_of(&[1, 1])), 0.5);
        assert_eq!(m.get(from, chain.index_of(&[0, 0])), 0.5);
    }

    #[test]
    fn rows_are_stochastic() {
        for (n1, l1) in [(1, 1), (2, 3), (3, 2)] {
            let chain = build_chain(n1, l1, &bern(n1, 0.3), 8).unwrap();
            for i in 0..chain.num_states() {
                let row: Vec<_> = chain.transition().row(i).collect();
                assert!(row.iter().all(|&(_, p)| p >= 0.0));
                let sum: f64 = row.iter().map(|&(_, p)| p).sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_device_stays_empty() {
        let chain = build_chain(1, 4, &bern(1, 0.6), 10).unwrap();
        let pi = stationary_distribution(&chain).unwrap();
        assert!((pi[0] - 1.0).abs() < 1e-9);
        assert!(chain.mean_queue(&pi) < 1e-9);
    }

    #[test]
    fn identity_keeps_initial_distribution() {
        let m = StochasticMatrix::identity(4);
        let init = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(stationary_from(&m, &init).unwrap(), init.to_vec());
    }

    #[test]
    fn two_state_chain() {
        let m = StochasticMatrix::from_dense(&[vec![0.9, 0.1], vec![0.5, 0.5]]).unwrap();
        let pi = stationary_from(&m, &[0.5, 0.5]).unwrap();
        assert!((pi[0] - 5.0 / 6.0).abs() < 1e-9);
        assert!(StochasticMatrix::from_dense(&[vec![0.9, 0.2], vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn unstable_chain_saturates() {
        let chain = build_chain(2, 2, &bern(2, 0.9), DEFAULT_CAP).unwrap();
        let pi = stationary_distribution(&chain).unwrap();
        assert!(chain.mean_queue(&pi) > 0.8 * f64::from(DEFAULT_CAP));
    }

    #[test]
    fn rejects_oversized_or_unsupported() {
        assert!(matches!(
            build_chain(3, 2, &bern(3, 0.1), 50),
            Err(Error::StateSpaceTooLarge { .. })
        ));
        assert!(build_chain(4, 2, &bern(4, 0.1), 3).is_err());
        let poisson = ArrivalModel::uniform(ArrivalLaw::Poisson, 2, 0.1).unwrap();
        assert!(build_chain(2, 2, &poisson, 3).is_err());
    }

    #[test]
    fn stable_mean_insensitive_to_cap() {
        let a = exact_mean_queue(2, 3, 0.15, 30).unwrap();
        let b = exact_mean_queue(2, 3, 0.15, 60).unwrap();
        assert!((a - b).abs() < 0.01 * a, "{a} vs {b}");
    }
}
