//! NOMA offloading with a fixed successive-interference-cancellation order.
//!
//! All devices sense for `t^s`, then transmit together for `t^o`, then the
//! server computes for `t^c`. The receiver decodes in descending gain order,
//! so a device only sees interference from devices decoded after it. For a
//! ratio `beta = t^s / t^o`, the power that makes device `n` offload exactly
//! what it sensed is
//!
//! ```text
//! P_n(beta) = N0 / h_n * (2^(s_n beta / B) - 1) * 2^(Σ_{k decoded after n} s_k beta / B)
//! ```
//!
//! Power grows with `beta`, so each device has a largest feasible ratio
//! `beta_n*` (where its power hits the cap) and the whole system runs at
//! `beta* = min_n beta_n*`. With rates `r_n* = s_n beta*` the phases follow
//! `t^s : t^o : t^c = 1 : 1/beta* : Σ r_n* / (C beta*)`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::scenario::Scenario;

/// Relative width of the final bisection bracket on `beta`.
pub const DEFAULT_BETA_TOLERANCE: f64 = 1e-12;
/// The bracket search gives up below this ratio.
pub const MIN_BETA: f64 = 1.0 / (1u64 << 60) as f64;
/// The bracket search gives up past this ratio.
pub const MAX_BETA: f64 = (1u64 << 60) as f64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NomaAllocation {
    /// Device ids in decoding order.
    pub decode_order: Vec<usize>,
    pub sense_ts: f64,
    pub offload_to: f64,
    pub compute_tc: f64,
    /// Largest feasible ratio per device id.
    pub beta_n: Vec<f64>,
    pub beta_star: f64,
    pub power: Vec<f64>,
    pub rates: Vec<f64>,
    pub compute_share: Vec<f64>,
    /// Offloaded bits per device id, `s_n t^s`.
    pub device_bits: Vec<f64>,
    pub throughput: f64,
}

/// Device ids by descending channel gain, ties by id.
pub fn sic_decode_order(scenario: &Scenario) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scenario.len()).collect();
    order.sort_by(|&a, &b| {
        scenario.devices[b]
            .gain
            .total_cmp(&scenario.devices[a].gain)
            .then(a.cmp(&b))
    });
    order
}

/// For each device id, the summed sensing rate of devices decoded after it.
fn later_sensing(scenario: &Scenario, order: &[usize]) -> Vec<f64> {
    let mut later = vec![0.0; scenario.len()];
    let mut acc = 0.0;
    for &d in order.iter().rev() {
        later[d] = acc;
        acc += scenario.devices[d].sensing_rate;
    }
    later
}

/// Transmit powers that equalize sensed and offloaded bits at ratio `beta`,
/// reported per device id.
pub fn power_for_ratio(scenario: &Scenario, beta: f64) -> Result<Vec<f64>> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(param(format!("beta must be a nonnegative finite ratio, got {beta}")));
    }
    let order = sic_decode_order(scenario);
    let later = later_sensing(scenario, &order);
    let b = scenario.system.bandwidth;
    Ok(scenario
        .devices
        .iter()
        .map(|d| {
            let own = d.sensing_rate * beta / b;
            let rest = later[d.id] * beta / b;
            scenario.system.noise / d.gain * (own * LN_2).exp_m1() * rest.exp2()
        })
        .collect())
}

/// Rates under descending-gain decoding, per device id.
pub fn sic_rates(scenario: &Scenario, power: &[f64]) -> Vec<f64> {
    sic_rates_in_order(scenario, power, &sic_decode_order(scenario))
}

/// Rates when the receiver decodes in `decode_order` (first entry first);
/// every device still undecoded counts as interference.
pub fn sic_rates_in_order(scenario: &Scenario, power: &[f64], decode_order: &[usize]) -> Vec<f64> {
    let sys = &scenario.system;
    let mut rates = vec![0.0; scenario.len()];
    let mut interference = 0.0;
    for &d in decode_order.iter().rev() {
        let rx = power[d] * scenario.devices[d].gain;
        rates[d] = sys.bandwidth * (rx / (sys.noise + interference)).ln_1p() / LN_2;
        interference += rx;
    }
    rates
}

/// `ln P_n(beta)` evaluated in log space so huge exponents do not overflow.
fn log_power(scenario: &Scenario, device: usize, later: f64, beta: f64) -> f64 {
    let d = &scenario.devices[device];
    let b = scenario.system.bandwidth;
    let own = d.sensing_rate * beta / b * LN_2;
    let rest = later * beta / b * LN_2;
    let log_own = if own > 30.0 {
        own + (-(-own).exp()).ln_1p()
    } else {
        own.exp_m1().ln()
    };
    (scenario.system.noise / d.gain).ln() + log_own + rest
}

/// `H_n(beta) = P̄_n - P_n(beta)`; positive while device `n` stays under its cap.
pub fn power_slack(scenario: &Scenario, device: usize, beta: f64) -> f64 {
    let order = sic_decode_order(scenario);
    let later = later_sensing(scenario, &order)[device];
    scenario.devices[device].max_power - log_power(scenario, device, later, beta).exp()
}

/// Root of `H_n` by doubling or halving from `beta = 1` to get a bracket,
/// then bisecting until its width is below `tolerance` relative to its top.
/// Returns the lower end of the final bracket, which is always feasible.
pub fn solve_beta_n(scenario: &Scenario, device: usize, tolerance: f64) -> Result<f64> {
    let d = scenario
        .devices
        .get(device)
        .ok_or_else(|| param(format!("no device {device}")))?;
    if !(d.max_power > 0.0) {
        return Err(param(format!("device {device} needs a positive power cap")));
    }
    if !(tolerance > 0.0) {
        return Err(param("tolerance must be positive"));
    }
    let order = sic_decode_order(scenario);
    let later = later_sensing(scenario, &order)[device];
    let log_cap = d.max_power.ln();
    let under_cap = |beta: f64| -> Result<bool> {
        let lp = log_power(scenario, device, later, beta);
        if lp.is_nan() {
            return Err(Error::Numeric(format!("power of device {device} at beta {beta} is NaN")));
        }
        Ok(lp < log_cap)
    };

    let (mut lo, mut hi) = if under_cap(1.0)? {
        let mut hi = 2.0;
        while under_cap(hi)? {
            hi *= 2.0;
            if hi > MAX_BETA {
                return Err(Error::Numeric(format!("no bracket for device {device} below {MAX_BETA}")));
            }
        }
        (hi / 2.0, hi)
    } else {
        let mut lo = 0.5;
        while !under_cap(lo)? {
            lo *= 0.5;
            if lo < MIN_BETA {
                return Err(Error::Numeric(format!("device {device} cannot reach beta {MIN_BETA}")));
            }
        }
        (lo, 2.0 * lo)
    };
    while hi - lo >= tolerance * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if under_cap(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Optimal fixed-order allocation.
pub fn solve_noma(scenario: &Scenario) -> Result<NomaAllocation> {
    solve_noma_with(scenario, DEFAULT_BETA_TOLERANCE)
}

pub fn solve_noma_with(scenario: &Scenario, tolerance: f64) -> Result<NomaAllocation> {
    let beta_n = (0..scenario.len())
        .map(|n| solve_beta_n(scenario, n, tolerance))
        .collect::<Result<Vec<_>>>()?;
    let beta_star = beta_n.iter().copied().fold(f64::INFINITY, f64::min);
    let power = power_for_ratio(scenario, beta_star)?;
    let rates = sic_rates(scenario, &power);
    let sum_rate: f64 = rates.iter().sum();
    let sys = &scenario.system;
    let c = sys.edge_capacity;

    let sense_ts = sys.frame / (1.0 + 1.0 / beta_star + sum_rate / (c * beta_star));
    let offload_to = sense_ts / beta_star;
    let compute_tc = sense_ts * sum_rate / (c * beta_star);
    let compute_share = rates.iter().map(|r| c * r / sum_rate).collect();
    let device_bits: Vec<f64> = scenario
        .devices
        .iter()
        .map(|d| d.sensing_rate * sense_ts)
        .collect();
    Ok(NomaAllocation {
        decode_order: sic_decode_order(scenario),
        sense_ts,
        offload_to,
        compute_tc,
        beta_n,
        beta_star,
        power,
        rates,
        compute_share,
        throughput: device_bits.iter().sum(),
        device_bits,
    })
}
