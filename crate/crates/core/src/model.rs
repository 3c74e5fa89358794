//! Slot mechanics for type-1 devices: arrivals, preamble selection, collision
//! resolution and the per-device queue update.
//!
//! Within a slot the order of events is fixed:
//!
//! 1. new requests are appended to each device queue,
//! 2. every device with a nonempty queue becomes active,
//! 3. each active device draws a preamble uniformly from `1..=l1`,
//! 4. a device succeeds iff no other active device drew the same preamble,
//! 5. each successful device removes its oldest pending request.
//!
//! A request can therefore be served in the slot it arrives in (delay 0), and
//! a collided device simply draws a fresh preamble in the next slot.

use std::collections::VecDeque;

use rand::distr::{Bernoulli, Distribution};
use rand::Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Zero-based index of a type-1 device.
pub type DeviceId = usize;

/// One-based preamble index within the type-1 pool.
pub type Preamble = u32;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrivalLaw {
    #[default]
    Bernoulli,
    Poisson,
}

#[derive(Clone, Debug)]
enum Sampler {
    Zero,
    Bernoulli(Bernoulli),
    Poisson(Poisson<f64>),
}

/// Per-device iid arrival process, one mean rate per device.
#[derive(Clone, Debug)]
pub struct ArrivalModel {
    law: ArrivalLaw,
    rates: Vec<f64>,
    samplers: Vec<Sampler>,
}

impl ArrivalModel {
    pub fn new(law: ArrivalLaw, rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(invalid("rates", "at least one device is required"));
        }
        let samplers = rates
            .iter()
            .enumerate()
            .map(|(n, &rate)| {
                if !rate.is_finite() || rate < 0.0 {
                    return Err(invalid(
                        "rates",
                        format!("rate of device {n} is {rate}, expected a finite value >= 0"),
                    ));
                }
                match law {
                    ArrivalLaw::Bernoulli => Bernoulli::new(rate)
                        .map(Sampler::Bernoulli)
                        .map_err(|_| {
                            invalid(
                                "rates",
                                format!("Bernoulli rate of device {n} is {rate}, expected <= 1"),
                            )
                        }),
                    ArrivalLaw::Poisson if rate == 0.0 => Ok(Sampler::Zero),
                    ArrivalLaw::Poisson => Poisson::new(rate).map(Sampler::Poisson).map_err(|e| {
                        invalid("rates", format!("Poisson rate of device {n}: {e}"))
                    }),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            law,
            rates,
            samplers,
        })
    }

    /// Same rate for all `n1` devices.
    pub fn uniform(law: ArrivalLaw, n1: usize, rate: f64) -> Result<Self> {
        Self::new(law, vec![rate; n1])
    }

    pub fn law(&self) -> ArrivalLaw {
        self.law
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn n1(&self) -> usize {
        self.rates.len()
    }

    pub fn mean_rate(&self) -> f64 {
        self.rates.iter().sum::<f64>() / self.rates.len() as f64
    }

    pub fn total_rate(&self) -> f64 {
        self.rates.iter().sum()
    }
}

/// Draws one slot of arrivals, consuming `rng` in device order.
pub fn sample_arrivals<R: Rng + ?Sized>(model: &ArrivalModel, rng: &mut R) -> Vec<u32> {
    model
        .samplers
        .iter()
        .map(|sampler| match sampler {
            Sampler::Zero => 0,
            Sampler::Bernoulli(b) => u32::from(b.sample(rng)),
            Sampler::Poisson(p) => p.sample(rng) as u32,
        })
        .collect()
}

/// Pending requests of one device, oldest first. Each entry is the slot the
/// request arrived in.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DeviceState {
    arrival_slots: VecDeque<u64>,
}

impl DeviceState {
    pub fn new() -> Self {
        Self::default()
    }

    /// A device holding `count` requests that all arrived at `slot`.
    pub fn with_backlog(count: usize, slot: u64) -> Self {
        Self {
            arrival_slots: std::iter::repeat_n(slot, count).collect(),
        }
    }

    pub fn queue_len(&self) -> usize {
        self.arrival_slots.len()
    }

    pub fn is_active(&self) -> bool {
        !self.arrival_slots.is_empty()
    }

    pub fn arrival_slots(&self) -> impl Iterator<Item = u64> + '_ {
        self.arrival_slots.iter().copied()
    }

    fn push(&mut self, slot: u64, count: u32) {
        self.arrival_slots
            .extend(std::iter::repeat_n(slot, count as usize));
    }

    fn pop(&mut self) -> Option<u64> {
        self.arrival_slots.pop_front()
    }
}

/// What happened in one slot.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SlotOutcome {
    pub slot: u64,
    /// New requests per device.
    pub arrivals: Vec<u32>,
    /// Devices with a nonempty queue after arrivals, ascending.
    pub active: Vec<DeviceId>,
    /// Preamble drawn by each active device, in `active` order.
    pub choices: Vec<(DeviceId, Preamble)>,
    pub successes: Vec<DeviceId>,
    pub collisions: Vec<DeviceId>,
    /// Access delay of the request served by each entry of `successes`.
    pub delays: Vec<u64>,
}

impl SlotOutcome {
    /// Number of active devices, K1(t).
    pub fn k1(&self) -> usize {
        self.active.len()
    }
}

/// Each active device draws an independent uniform preamble from `1..=l1`;
/// `rng` is consumed in the order of `active`.
pub fn select_preambles<R: Rng + ?Sized>(
    active: &[DeviceId],
    l1: u32,
    rng: &mut R,
) -> Result<Vec<(DeviceId, Preamble)>> {
    if l1 < 1 {
        return Err(invalid("l1", "pool size must be at least 1"));
    }
    Ok(active
        .iter()
        .map(|&n| (n, rng.random_range(1..=l1)))
        .collect())
}

/// Splits the transmitting devices into those whose preamble is unique
/// (successes) and the rest (collisions). Input order is preserved.
pub fn resolve_collisions(choices: &[(DeviceId, Preamble)]) -> (Vec<DeviceId>, Vec<DeviceId>) {
    let max = choices.iter().map(|&(_, p)| p).max().unwrap_or(0) as usize;
    let mut counts = vec![0u32; max + 1];
    for &(_, p) in choices {
        counts[p as usize] += 1;
    }
    let mut successes = Vec::new();
    let mut collisions = Vec::new();
    for &(n, p) in choices {
        if counts[p as usize] == 1 {
            successes.push(n);
        } else {
            collisions.push(n);
        }
    }
    (successes, collisions)
}

/// Runs one slot with the arrivals given and preamble choices produced by
/// `choose`, which receives the active set. Used directly for scripted
/// replays; [`step_slot`] wraps it with random arrivals and choices.
pub fn apply_slot<F>(
    devices: &mut [DeviceState],
    arrivals: &[u32],
    slot: u64,
    choose: F,
) -> Result<SlotOutcome>
where
    F: FnOnce(&[DeviceId]) -> Result<Vec<(DeviceId, Preamble)>>,
{
    if arrivals.len() != devices.len() {
        return Err(invalid(
            "arrivals",
            format!("{} counts for {} devices", arrivals.len(), devices.len()),
        ));
    }
    for (device, &count) in devices.iter_mut().zip(arrivals) {
        device.push(slot, count);
    }
    let active: Vec<DeviceId> = devices
        .iter()
        .enumerate()
        .filter(|(_, d)| d.is_active())
        .map(|(n, _)| n)
        .collect();

    let choices = choose(&active)?;
    if choices.len() != active.len()
        || choices.iter().zip(&active).any(|(&(n, _), &a)| n != a)
    {
        return Err(invalid("choices", "must assign one preamble to each active device"));
    }

    let (successes, collisions) = resolve_collisions(&choices);
    let delays = successes
        .iter()
        .map(|&n| {
            let arrived = devices[n].pop().expect("active device has a pending request");
            slot - arrived
        })
        .collect();

    Ok(SlotOutcome {
        slot,
        arrivals: arrivals.to_vec(),
        active,
        choices,
        successes,
        collisions,
        delays,
    })
}

/// One slot of the random system: arrivals, then selection, then service.
/// `rng` is consumed for arrivals first (device order) and then for the
/// preamble draws (ascending device order).
pub fn step_slot<R: Rng + ?Sized>(
    devices: &mut [DeviceState],
    model: &ArrivalModel,
    l1: u32,
    slot: u64,
    rng: &mut R,
) -> Result<SlotOutcome> {
    if l1 < 1 {
        return Err(invalid("l1", "pool size must be at least 1"));
    }
    if devices.len() != model.n1() {
        return Err(invalid(
            "devices",
            format!("{} devices for an arrival model of {}", devices.len(), model.n1()),
        ));
    }
    let arrivals = sample_arrivals(model, rng);
    apply_slot(devices, &arrivals, slot, |active| {
        select_preambles(active, l1, rng)
    })
}
