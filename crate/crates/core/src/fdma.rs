//! FDMA benchmark: devices sense for `t^s`, offload in parallel on disjoint
//! subbands for `t^o`, then the server computes for `t^c`.
//!
//! Device `n` on a fraction `alpha_n` of the band gets
//! `g_n(alpha) = alpha B log2(1 + P h / (alpha N0))`, which is concave. Its
//! throughput is capped by what it sensed, what it sent and what the
//! server can process:
//!
//! ```text
//! l_n <= t^s s_n,   l_n <= t^o g_n(alpha_n),   Σ l_n <= t^c C,   Σ alpha_n <= 1
//! ```
//!
//! For fixed times the problem in `(l, alpha)` is solved two ways:
//! [`inner_value`] replaces each `g_n` by tangent cuts and solves an LP,
//! which gives an upper bound, and [`water_fill`] solves it exactly by
//! equalizing the marginal rate `g_n'` over uncapped devices.
//!
//! Without the computing cap, the best `Σ l` is homogeneous of degree one
//! in `(t^s, t^o)`, so it equals `t^o w(beta)` with `beta = t^s / t^o`.
//! For a fixed `beta` the frame is best split where offloaded and
//! processable data meet, which gives
//!
//! ```text
//! value(beta) = T C w(beta) / (C (1 + beta) + w(beta))
//! ```
//!
//! `w` is concave and nondecreasing, so `(1 + beta) / w(beta)` has convex
//! sublevel sets and `value` is unimodal. A golden-section search over
//! `ln beta` finds the optimum.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::lp::{self, LinearProgram, Relation, Tolerances};
use crate::scenario::{Device, Scenario, SystemParams};

pub const DEFAULT_TANGENTS: usize = 64;
/// Smallest tangent abscissa.
pub const MIN_TANGENT_ALPHA: f64 = 1e-4;

const LN_BETA_RANGE: (f64, f64) = (-30.0, 30.0);
const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdmaOptions {
    /// Tangent cuts per device for the reported upper bound.
    pub tangents: usize,
    /// Width of the final bracket on `ln beta`.
    pub ln_beta_tolerance: f64,
}

impl Default for FdmaOptions {
    fn default() -> Self {
        FdmaOptions {
            tangents: DEFAULT_TANGENTS,
            ln_beta_tolerance: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdmaAllocation {
    pub sense_ts: f64,
    pub offload_to: f64,
    pub compute_tc: f64,
    pub alpha: Vec<f64>,
    pub compute_share: Vec<f64>,
    /// Throughput per device, `l_n`.
    pub bits_l: Vec<f64>,
    pub total: f64,
    /// Tangent-cut bound at the chosen times.
    pub upper_bound: f64,
}

/// Result of one inner problem at fixed times.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerSolution {
    pub value: f64,
    pub alpha: Vec<f64>,
    pub bits_l: Vec<f64>,
    pub upper_bound: f64,
}

fn snr(device: &Device, system: &SystemParams) -> f64 {
    device.max_power * device.gain / system.noise
}

/// `alpha B log2(1 + x / alpha)` with `g(0) = 0`.
fn rate(alpha: f64, x: f64, bandwidth: f64) -> f64 {
    if alpha <= 0.0 || x <= 0.0 {
        return 0.0;
    }
    alpha * bandwidth * (x / alpha).ln_1p() / LN_2
}

/// `ln(1 + u) - u / (1 + u)`, so that `g'(alpha) = B phi(x / alpha) / ln 2`.
fn phi(u: f64) -> f64 {
    if u < 1e-4 {
        // u^2/2 - 2u^3/3 + ...
        u * u * (0.5 - 2.0 * u / 3.0 + 0.75 * u * u)
    } else {
        u.ln_1p() - u / (1.0 + u)
    }
}

/// Subband rate of a device in bits/s. `alpha = 1` gives its TDMA rate.
pub fn subband_rate(alpha: f64, device: &Device, system: &SystemParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(param(format!("bandwidth fraction {alpha} outside [0, 1]")));
    }
    Ok(rate(alpha, snr(device, system), system.bandwidth))
}

/// `g'(alpha)`, infinite at zero.
pub fn subband_rate_slope(alpha: f64, device: &Device, system: &SystemParams) -> f64 {
    let x = snr(device, system);
    if x <= 0.0 {
        return 0.0;
    }
    if alpha <= 0.0 {
        return f64::INFINITY;
    }
    system.bandwidth * phi(x / alpha) / LN_2
}

/// `k` points log-spaced on `[MIN_TANGENT_ALPHA, 1]`.
pub fn tangent_abscissae(k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => {
            let lo = MIN_TANGENT_ALPHA.ln();
            (0..k)
                .map(|i| (lo * (1.0 - i as f64 / (k - 1) as f64)).exp())
                .collect()
        }
    }
}

fn check_times(system: &SystemParams, times: (f64, f64, f64)) -> Result<()> {
    let (ts, to, tc) = times;
    if ts < 0.0 || to < 0.0 || tc < 0.0 || ts + to + tc > system.frame * (1.0 + 1e-12) {
        return Err(param(format!("times {times:?} do not fit the frame")));
    }
    Ok(())
}

/// Tangent-cut LP over `(l_1..l_N, alpha_1..alpha_N)` at fixed times.
///
/// The LP value is an upper bound because each concave `g_n` lies below
/// its tangents. `value` re-evaluates the true `g_n` at the LP's `alpha`.
pub fn inner_value(scenario: &Scenario, times: (f64, f64, f64), tangents: usize) -> Result<InnerSolution> {
    let sys = &scenario.system;
    check_times(sys, times)?;
    let (ts, to, tc) = times;
    let n = scenario.len();
    if to <= 0.0 || ts <= 0.0 || tc <= 0.0 {
        return Ok(InnerSolution {
            value: 0.0,
            alpha: vec![0.0; n],
            bits_l: vec![0.0; n],
            upper_bound: 0.0,
        });
    }
    // Bits in units of C T.
    let unit = sys.edge_capacity * sys.frame;
    let mut objective = vec![0.0; 2 * n];
    objective[..n].fill(1.0);
    let mut prog = LinearProgram::maximize(objective);
    let abscissae = tangent_abscissae(tangents);
    for (i, d) in scenario.devices.iter().enumerate() {
        prog.add_sparse_row(&[(i, 1.0)], Relation::Le, ts * d.sensing_rate / unit);
        for &a in &abscissae {
            // l <= to (g(a) + g'(a) (alpha - a))
            let g = subband_rate(a, d, sys)?;
            let slope = subband_rate_slope(a, d, sys);
            prog.add_sparse_row(
                &[(i, 1.0), (n + i, -to * slope / unit)],
                Relation::Le,
                to * (g - slope * a) / unit,
            );
        }
        // alpha <= 1 also bounds l through the tangent at 1.
        let g1 = subband_rate(1.0, d, sys)?;
        prog.add_sparse_row(&[(i, 1.0)], Relation::Le, to * g1 / unit);
    }
    let alphas: Vec<(usize, f64)> = (n..2 * n).map(|j| (j, 1.0)).collect();
    prog.add_sparse_row(&alphas, Relation::Le, 1.0);
    let ells: Vec<(usize, f64)> = (0..n).map(|j| (j, 1.0)).collect();
    prog.add_sparse_row(&ells, Relation::Le, tc / sys.frame);

    let (x, bound) = lp::solve(&prog, &Tolerances::default())?.into_optimal("FDMA tangent LP")?;
    let alpha: Vec<f64> = x[n..].iter().map(|a| a.clamp(0.0, 1.0)).collect();
    let bits_l: Vec<f64> = scenario
        .devices
        .iter()
        .enumerate()
        .map(|(i, d)| (x[i].max(0.0) * unit).min(to * rate(alpha[i], snr(d, sys), sys.bandwidth)))
        .collect();
    Ok(InnerSolution {
        value: bits_l.iter().sum(),
        alpha,
        bits_l,
        upper_bound: bound * unit,
    })
}

/// Optimal value of the tangent-cut LP of [`inner_value`], without the LP.
///
/// Each device contributes `min(t^s s_n, t^o ĝ_n(alpha_n))` with `ĝ_n` the
/// lower envelope of its tangents, a concave piecewise-linear function, so
/// spending the single budget `Σ alpha <= 1` on the steepest pieces first is
/// optimal. The computing cap only clips the sum.
pub fn tangent_bound(scenario: &Scenario, times: (f64, f64, f64), tangents: usize) -> Result<f64> {
    let sys = &scenario.system;
    check_times(sys, times)?;
    let (ts, to, tc) = times;
    if to <= 0.0 || ts <= 0.0 || tc <= 0.0 {
        return Ok(0.0);
    }
    let abscissae = tangent_abscissae(tangents.max(1));
    let mut base = 0.0;
    // (slope, length) pieces of every device, in bits per unit alpha.
    let mut pieces: Vec<(f64, f64)> = Vec::new();
    for d in &scenario.devices {
        let cap = ts * d.sensing_rate;
        let lines: Vec<(f64, f64)> = abscissae
            .iter()
            .map(|&a| {
                let g = rate(a, snr(d, sys), sys.bandwidth);
                let m = subband_rate_slope(a, d, sys);
                (m * to, (g - m * a) * to)
            })
            .collect();
        // Walk the lower envelope from alpha = 0.
        let mut k = (0..lines.len())
            .min_by(|&i, &j| lines[i].1.total_cmp(&lines[j].1).then(lines[i].0.total_cmp(&lines[j].0)))
            .expect("at least one tangent");
        let mut at = 0.0;
        let mut value = lines[k].1;
        if value >= cap {
            base += cap;
            continue;
        }
        base += value;
        while at < 1.0 && value < cap {
            let (m, c) = lines[k];
            let next = (0..lines.len())
                .filter(|&j| lines[j].0 < m)
                .map(|j| (j, (lines[j].1 - c) / (m - lines[j].0)))
                .filter(|&(_, x)| x >= at)
                .min_by(|p, q| p.1.total_cmp(&q.1).then(lines[q.0].0.total_cmp(&lines[p.0].0)));
            let end = next.map_or(1.0, |(_, x)| x.min(1.0));
            let mut len = end - at;
            if m > 0.0 && value + m * len > cap {
                len = (cap - value) / m;
            }
            if len > 0.0 && m > 0.0 {
                pieces.push((m, len));
                value += m * len;
            }
            at = end;
            match next {
                Some((j, _)) => k = j,
                None => break,
            }
        }
    }
    pieces.sort_by(|p, q| q.0.total_cmp(&p.0));
    let mut budget = 1.0;
    let mut total = base;
    for (m, len) in pieces {
        let used = len.min(budget);
        total += m * used;
        budget -= used;
        if budget <= 0.0 {
            break;
        }
    }
    Ok(total.min(tc * sys.edge_capacity))
}

/// Exact per-unit-offloading-time allocation for sensing ratio `beta`:
/// maximizes `Σ min(beta s_n, g_n(alpha_n))` over `Σ alpha <= 1`.
/// Returns `(w, alpha, per-device rates)`.
pub fn water_fill(scenario: &Scenario, beta: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let sys = &scenario.system;
    let b = sys.bandwidth;
    let x: Vec<f64> = scenario.devices.iter().map(|d| snr(d, sys)).collect();
    let cap: Vec<f64> = scenario.devices.iter().map(|d| beta * d.sensing_rate).collect();

    // Fraction at which each device reaches its sensing cap.
    let alpha_cap: Vec<f64> = x
        .iter()
        .zip(&cap)
        .map(|(&x, &c)| {
            if x <= 0.0 {
                return 0.0;
            }
            if rate(1.0, x, b) <= c {
                return 1.0;
            }
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if rate(mid, x, b) < c {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            hi
        })
        .collect();

    let finish = |alpha: Vec<f64>| {
        let r: Vec<f64> = alpha
            .iter()
            .zip(&x)
            .zip(&cap)
            .map(|((&a, &x), &c)| rate(a, x, b).min(c))
            .collect();
        (r.iter().sum(), alpha, r)
    };
    if alpha_cap.iter().sum::<f64>() <= 1.0 {
        return finish(alpha_cap);
    }

    // Equal marginal rates g_n' means equal u = x_n / alpha_n across
    // uncapped devices, so bisect on ln u.
    let at_level = |lu: f64| -> Vec<f64> {
        let u = lu.exp();
        x.iter().zip(&alpha_cap).map(|(&x, &ac)| (x / u).min(ac)).collect()
    };
    let total = |lu: f64| at_level(lu).iter().sum::<f64>();
    // At u = Σ x the uncapped total is exactly one; below min x / cap every
    // device sits at its cap, which overshoots.
    let mut hi = x.iter().sum::<f64>().ln();
    let mut lo = x
        .iter()
        .zip(&alpha_cap)
        .filter(|(&x, _)| x > 0.0)
        .map(|(&x, &ac)| (x / ac).ln())
        .fold(f64::INFINITY, f64::min);
    lo = lo.min(hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.abs().max(1.0) {
            break;
        }
    }
    // The upper end always satisfies the budget.
    let mut alpha = at_level(hi);
    let spare = 1.0 - alpha.iter().sum::<f64>();
    if spare > 0.0 {
        // Hand leftovers to uncapped devices; rates only improve.
        let open: Vec<usize> = (0..alpha.len()).filter(|&i| alpha[i] < alpha_cap[i]).collect();
        if let Some(&i) = open.first() {
            alpha[i] = (alpha[i] + spare).min(alpha_cap[i]);
        }
    }
    finish(alpha)
}

/// Throughput for ratio `beta` with the frame split optimally.
fn split_value(scenario: &Scenario, beta: f64) -> f64 {
    let sys = &scenario.system;
    let (w, _, _) = water_fill(scenario, beta);
    if w <= 0.0 {
        return 0.0;
    }
    sys.frame * sys.edge_capacity * w / (sys.edge_capacity * (1.0 + beta) + w)
}

pub fn solve_fdma(scenario: &Scenario) -> Result<FdmaAllocation> {
    solve_fdma_with(scenario, &FdmaOptions::default())
}

pub fn solve_fdma_with(scenario: &Scenario, options: &FdmaOptions) -> Result<FdmaAllocation> {
    scenario.validate()?;
    let sys = &scenario.system;
    let n = scenario.len();
    let f = |lb: f64| split_value(scenario, lb.exp());

    // Coarse scan to seed the bracket away from flat ends.
    let (lo0, hi0) = LN_BETA_RANGE;
    let steps = 60;
    let grid: Vec<f64> = (0..=steps).map(|i| lo0 + (hi0 - lo0) * i as f64 / steps as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&g| f(g)).collect();
    let k = (0..vals.len()).fold(0, |best, i| if vals[i] > vals[best] { i } else { best });
    if vals[k] <= 0.0 {
        return Ok(FdmaAllocation {
            sense_ts: 0.0,
            offload_to: 0.0,
            compute_tc: 0.0,
            alpha: vec![0.0; n],
            compute_share: vec![0.0; n],
            bits_l: vec![0.0; n],
            total: 0.0,
            upper_bound: 0.0,
        });
    }
    let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(steps)]);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > options.ln_beta_tolerance {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let beta = if fc >= fd { c } else { d }.exp();

    let (w, alpha, per_unit) = water_fill(scenario, beta);
    let cap = sys.edge_capacity;
    let offload_to = sys.frame * cap / (cap * (1.0 + beta) + w);
    let sense_ts = beta * offload_to;
    let compute_tc = (sys.frame - sense_ts - offload_to).max(0.0);
    // Offloaded and processable data meet; trim rounding so Σ l <= t^c C.
    let scale = (compute_tc * cap / (w * offload_to)).min(1.0);
    let bits_l: Vec<f64> = per_unit.iter().map(|r| r * offload_to * scale).collect();
    let total: f64 = bits_l.iter().sum();
    let compute_share = if compute_tc > 0.0 {
        bits_l.iter().map(|l| l / compute_tc).collect()
    } else {
        vec![0.0; n]
    };
    let upper = if options.tangents > 0 {
        tangent_bound(scenario, (sense_ts, offload_to, compute_tc), options.tangents)?
    } else {
        f64::INFINITY
    };
    Ok(FdmaAllocation {
        sense_ts,
        offload_to,
        compute_tc,
        alpha,
        compute_share,
        bits_l,
        total,
        upper_bound: upper.max(total),
    })
}
