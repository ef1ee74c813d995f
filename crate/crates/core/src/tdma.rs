//! Synchronous TDMA sense-then-offload allocation.
//!
//! The frame is split into `N` offloading slots followed by one computing
//! window `t^c`. The device in slot `i` senses from the start of the frame
//! until its slot arrives; the first device also senses for `t_1^s` inside
//! slot 1. For a fixed sequence and `t^c`, the best time split makes every
//! causality constraint tight, which gives closed forms in terms of
//! `q_j = r_j / (s_j + r_j)`:
//!
//! ```text
//! t_1^s = (T - t^c) * q_1 q_2 ... q_N
//! t_1   = (T - t^c) * q_2 ... q_N
//! t_i   = (T - t^c) * s_i / (s_i + r_i) * q_{i+1} ... q_N
//! ```
//!
//! The device in slot `i` then offloads `(T - t^c) * mu_i` bits with
//! `mu_i = s_i * q_i ... q_N`. Sizing each compute share so every device
//! finishes exactly at the frame end gives `t^c = T λ / (λ + C)` and
//! `C_i = C mu_i / λ`, where `λ = Σ mu_i`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::scenario::{Scenario, SystemParams};

/// Largest device count the exhaustive search accepts by default.
pub const DEFAULT_MAX_EXHAUSTIVE: usize = 9;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffloadingSequence {
    /// Entry `i` is the device offloading in slot `i + 1`.
    slot_to_device: Vec<usize>,
}

impl OffloadingSequence {
    pub fn new(slot_to_device: Vec<usize>) -> Result<Self> {
        let n = slot_to_device.len();
        let mut seen = vec![false; n];
        for &d in &slot_to_device {
            if d >= n || std::mem::replace(&mut seen[d], true) {
                return Err(param(format!("{slot_to_device:?} is not a permutation")));
            }
        }
        Ok(Self { slot_to_device })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            slot_to_device: (0..n).collect(),
        }
    }

    pub fn slot_to_device(&self) -> &[usize] {
        &self.slot_to_device
    }

    pub fn len(&self) -> usize {
        self.slot_to_device.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slot_to_device.is_empty()
    }

    pub(crate) fn check_for(&self, scenario: &Scenario) -> Result<()> {
        if self.len() != scenario.len() {
            return Err(param(format!(
                "sequence covers {} devices, scenario has {}",
                self.len(),
                scenario.len()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TdmaAllocation {
    pub sequence: OffloadingSequence,
    /// Sensing part of slot 1.
    pub sense_t1s: f64,
    /// Length of each slot, in slot order.
    pub slot_times: Vec<f64>,
    pub compute_tc: f64,
    /// Compute share `C_n` per device id.
    pub compute_share: Vec<f64>,
    /// Bits offloaded per device id.
    pub offloaded_bits: Vec<f64>,
    pub weighted_throughput: f64,
}

impl TdmaAllocation {
    pub fn total_bits(&self) -> f64 {
        self.offloaded_bits.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlotTimes {
    pub sense_t1s: f64,
    pub slot_times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlotCoefficients {
    /// `mu_i` per slot, bits/s.
    pub mu: Vec<f64>,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComputeSplit {
    pub compute_tc: f64,
    /// `C_i` per slot.
    pub shares: Vec<f64>,
}

/// Slot order by ascending `w_n * r_n`. Ties go to zero-rate devices first,
/// then to the smaller id.
pub fn schedule_ascending_weighted_rate(scenario: &Scenario) -> OffloadingSequence {
    let rates = scenario.link_rates();
    let mut order: Vec<usize> = (0..scenario.len()).collect();
    order.sort_by(|&a, &b| {
        let ka = scenario.devices[a].weight * rates[a];
        let kb = scenario.devices[b].weight * rates[b];
        ka.total_cmp(&kb)
            .then((rates[a] > 0.0).cmp(&(rates[b] > 0.0)))
            .then(a.cmp(&b))
    });
    OffloadingSequence {
        slot_to_device: order,
    }
}

/// Per-slot `(s, r)` pairs and suffix products `q_i ... q_N` (with a
/// trailing 1 for the empty product).
fn slot_profile(scenario: &Scenario, sequence: &OffloadingSequence) -> Result<(Vec<(f64, f64)>, Vec<f64>)> {
    sequence.check_for(scenario)?;
    let rates = scenario.link_rates();
    let sr: Vec<(f64, f64)> = sequence
        .slot_to_device
        .iter()
        .map(|&d| (scenario.devices[d].sensing_rate, rates[d]))
        .collect();
    let n = sr.len();
    let mut suffix = vec![1.0; n + 1];
    for i in (0..n).rev() {
        let (s, r) = sr[i];
        if s + r <= 0.0 {
            return Err(Error::Singular(format!("slot {} has s + r = 0", i + 1)));
        }
        suffix[i] = suffix[i + 1] * r / (s + r);
    }
    Ok((sr, suffix))
}

/// Extreme-point time split for a fixed sequence and computing window.
pub fn closed_form_times(scenario: &Scenario, sequence: &OffloadingSequence, compute_tc: f64) -> Result<SlotTimes> {
    let frame = scenario.system.frame;
    if !(0.0..=frame).contains(&compute_tc) {
        return Err(param(format!("compute_tc {compute_tc} outside [0, {frame}]")));
    }
    let (sr, suffix) = slot_profile(scenario, sequence)?;
    let window = frame - compute_tc;
    let slot_times = (0..sr.len())
        .map(|i| {
            if i == 0 {
                window * suffix[1]
            } else {
                let (s, r) = sr[i];
                window * s / (s + r) * suffix[i + 1]
            }
        })
        .collect();
    Ok(SlotTimes {
        sense_t1s: window * suffix[0],
        slot_times,
    })
}

pub fn slot_data_coefficients(scenario: &Scenario, sequence: &OffloadingSequence) -> Result<SlotCoefficients> {
    let (sr, suffix) = slot_profile(scenario, sequence)?;
    let mu: Vec<f64> = sr.iter().zip(&suffix).map(|(&(s, _), q)| s * q).collect();
    let lambda = mu.iter().sum();
    Ok(SlotCoefficients { mu, lambda })
}

/// Computing window and shares that let every slot's data finish exactly
/// at the end of the frame. A zero `lambda` yields an all-zero split.
pub fn compute_split(lambda: f64, mu: &[f64], system: &SystemParams) -> ComputeSplit {
    if lambda <= 0.0 {
        return ComputeSplit {
            compute_tc: 0.0,
            shares: vec![0.0; mu.len()],
        };
    }
    let c = system.edge_capacity;
    ComputeSplit {
        compute_tc: system.frame * lambda / (lambda + c),
        shares: mu.iter().map(|m| c * m / lambda).collect(),
    }
}

/// Optimal allocation for a sequence (ascending `w r` when `None`).
pub fn solve_tdma(scenario: &Scenario, sequence: Option<&OffloadingSequence>) -> Result<TdmaAllocation> {
    let sequence = match sequence {
        Some(s) => s.clone(),
        None => schedule_ascending_weighted_rate(scenario),
    };
    let SlotCoefficients { mu, lambda } = slot_data_coefficients(scenario, &sequence)?;
    let split = compute_split(lambda, &mu, &scenario.system);
    let times = closed_form_times(scenario, &sequence, split.compute_tc)?;
    let window = scenario.system.frame - split.compute_tc;

    let n = scenario.len();
    let mut compute_share = vec![0.0; n];
    let mut offloaded_bits = vec![0.0; n];
    let mut weighted = 0.0;
    for (slot, &d) in sequence.slot_to_device.iter().enumerate() {
        compute_share[d] = split.shares[slot];
        offloaded_bits[d] = window * mu[slot];
        weighted += scenario.devices[d].weight * mu[slot];
    }
    Ok(TdmaAllocation {
        sense_t1s: times.sense_t1s,
        slot_times: times.slot_times,
        compute_tc: split.compute_tc,
        compute_share,
        offloaded_bits,
        weighted_throughput: window * weighted,
        sequence,
    })
}

/// Weighted throughput of a sequence without building the allocation.
fn sequence_value(s: &[f64], r: &[f64], w: &[f64], order: &[usize], system: &SystemParams) -> f64 {
    let mut suffix = 1.0;
    let (mut lambda, mut weighted) = (0.0, 0.0);
    for &d in order.iter().rev() {
        suffix *= r[d] / (s[d] + r[d]);
        let mu = s[d] * suffix;
        lambda += mu;
        weighted += w[d] * mu;
    }
    if lambda <= 0.0 {
        return 0.0;
    }
    let tc = system.frame * lambda / (lambda + system.edge_capacity);
    (system.frame - tc) * weighted
}

/// Best sequence over all `N!` permutations. Ties keep the
/// lexicographically first permutation.
pub fn exhaustive_sequence_search(scenario: &Scenario, max_n: usize) -> Result<(OffloadingSequence, TdmaAllocation)> {
    let n = scenario.len();
    if n > max_n {
        return Err(Error::TooLarge { n, max: max_n });
    }
    let s = scenario.sensing_rates();
    let r = scenario.link_rates();
    if s.iter().zip(&r).any(|(a, b)| a + b <= 0.0) {
        return Err(Error::Singular("a device has s + r = 0".into()));
    }
    let w: Vec<f64> = scenario.devices.iter().map(|d| d.weight).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = (perm.clone(), f64::NEG_INFINITY);
    loop {
        let v = sequence_value(&s, &r, &w, &perm, &scenario.system);
        if v > best.1 {
            best = (perm.clone(), v);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    let sequence = OffloadingSequence {
        slot_to_device: best.0,
    };
    let alloc = solve_tdma(scenario, Some(&sequence))?;
    Ok((sequence, alloc))
}

/// Rearranges into the next lexicographic permutation; false after the last.
pub(crate) fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let Some(i) = (0..n - 1).rev().find(|&i| p[i] < p[i + 1]) else {
        return false;
    };
    let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).expect("successor exists");
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkOrder {
    Random { seed: u64 },
    AscendingSensing,
    DescendingRate,
}

/// Reference sequences: a seeded uniform permutation, ascending sensing
/// rate, or descending link rate (ties by id).
pub fn benchmark_sequence(scenario: &Scenario, kind: BenchmarkOrder) -> OffloadingSequence {
    let mut order: Vec<usize> = (0..scenario.len()).collect();
    match kind {
        BenchmarkOrder::Random { seed } => {
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }
        BenchmarkOrder::AscendingSensing => {
            let s = scenario.sensing_rates();
            order.sort_by(|&a, &b| s[a].total_cmp(&s[b]).then(a.cmp(&b)));
        }
        BenchmarkOrder::DescendingRate => {
            let r = scenario.link_rates();
            order.sort_by(|&a, &b| r[b].total_cmp(&r[a]).then(a.cmp(&b)));
        }
    }
    OffloadingSequence {
        slot_to_device: order,
    }
}

/// Two devices with a common sensing rate `s0`, slot order `(1, 2)`:
/// `s0 (T - t^c) [(w1 + w2) r1 r2 + s0 w2 r2] / ((s0 + r1)(s0 + r2))`.
pub fn two_device_throughput(s0: f64, rates: [f64; 2], weights: [f64; 2], frame: f64, compute_tc: f64) -> f64 {
    let [r1, r2] = rates;
    let [w1, w2] = weights;
    s0 * (frame - compute_tc) * ((w1 + w2) * r1 * r2 + s0 * w2 * r2) / ((s0 + r1) * (s0 + r2))
}
