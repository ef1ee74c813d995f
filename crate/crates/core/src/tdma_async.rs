//! TDMA with asynchronous computing.
//!
//! The server starts on a device's data as soon as that device finishes
//! offloading, so the frame is cut into `t_0` (everyone senses), one
//! offloading slot `t_i` per device and a trailing computing interval
//! `t_{N+1}`. Device `i` in the sequence must satisfy
//!
//! ```text
//! r_i t_i <= s_i (t_0 + ... + t_{i-1})        sensing causality
//! r_i t_i <= C_i (t_{i+1} + ... + t_{N+1})    computing deadline
//! ```
//!
//! The second row is bilinear. It is replaced by `r_i t_i <= l_i` plus the
//! McCormick envelope of `l_i = C_i S_i` over `C_i in [0, C]` and
//! `S_i in [0, T]`, which gives an LP whose value bounds the true optimum.
//! The shares `C_i` from that LP are then fixed, which makes the original
//! problem linear in the times.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lp::{self, LinearProgram, Relation, ScaledProgram, Tolerances};
use crate::scenario::Scenario;
use crate::tdma::{schedule_ascending_weighted_rate, solve_tdma, OffloadingSequence};

/// Shares below this fraction of `C` are lifted to it when the device can
/// transmit at all.
pub const SHARE_FLOOR: f64 = 1e-6;

/// Where the shares used for the final time split came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareSource {
    Relaxation,
    /// The synchronous optimum's shares gave a better time split.
    Synchronous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsyncAllocation {
    pub sequence: OffloadingSequence,
    /// `t_0 .. t_{N+1}`; `times[i]` for `1 <= i <= N` is slot `i`'s offloading time.
    pub times: Vec<f64>,
    /// Per device id.
    pub compute_share: Vec<f64>,
    /// Per device id.
    pub offloaded_bits: Vec<f64>,
    pub weighted_throughput: f64,
    pub relaxation_bound: f64,
    pub share_floor_applied: bool,
    pub share_source: ShareSource,
}

impl AsyncAllocation {
    pub fn total_bits(&self) -> f64 {
        self.offloaded_bits.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsyncOptions {
    /// Also try the synchronous shares in the second stage and keep the
    /// better split. The synchronous point is always feasible here, so this
    /// guarantees the result never falls below [`solve_tdma`].
    pub sync_fallback: bool,
    pub tolerances: Tolerances,
}

impl Default for AsyncOptions {
    fn default() -> Self {
        AsyncOptions {
            sync_fallback: true,
            tolerances: Tolerances::default(),
        }
    }
}

/// Slot `(s, r, w)` in units where `T = 1` and `C = 1`.
struct Slots {
    s: Vec<f64>,
    r: Vec<f64>,
    w: Vec<f64>,
    rate_unit: f64,
    time_unit: f64,
}

impl Slots {
    fn new(scenario: &Scenario, sequence: &OffloadingSequence) -> Result<Self> {
        sequence.check_for(scenario)?;
        let rates = scenario.link_rates();
        let rate_unit = scenario.system.edge_capacity;
        let pick = |f: &dyn Fn(usize) -> f64| sequence.slot_to_device().iter().map(|&d| f(d)).collect();
        Ok(Slots {
            s: pick(&|d| scenario.devices[d].sensing_rate / rate_unit),
            r: pick(&|d| rates[d] / rate_unit),
            w: pick(&|d| scenario.devices[d].weight),
            rate_unit,
            time_unit: scenario.system.frame,
        })
    }

    fn len(&self) -> usize {
        self.s.len()
    }

    /// Frame budget and sensing causality, shared by both stages. Time
    /// variables are `0..=N+1` in every program built here.
    fn add_time_rows(&self, lp: &mut LinearProgram) {
        let n = self.len();
        let all: Vec<(usize, f64)> = (0..n + 2).map(|j| (j, 1.0)).collect();
        lp.add_sparse_row(&all, Relation::Le, 1.0);
        for i in 1..=n {
            let mut row: Vec<(usize, f64)> = (0..i).map(|k| (k, -self.s[i - 1])).collect();
            row.push((i, self.r[i - 1]));
            lp.add_sparse_row(&row, Relation::Le, 0.0);
        }
    }

    fn objective(&self, n_vars: usize) -> Vec<f64> {
        let mut c = vec![0.0; n_vars];
        for i in 1..=self.len() {
            c[i] = self.w[i - 1] * self.r[i - 1];
        }
        c
    }
}

/// Relaxed program over `(t_0..t_{N+1}, C_1..C_N, l_1..l_N)`, slot-indexed,
/// with times in units of `T` and rates in units of `C`.
pub fn build_relaxed_lp(scenario: &Scenario, sequence: &OffloadingSequence) -> Result<ScaledProgram> {
    let slots = Slots::new(scenario, sequence)?;
    let n = slots.len();
    let share = |i: usize| n + 2 + i - 1;
    let ell = |i: usize| 2 * n + 2 + i - 1;
    let mut lp = LinearProgram::maximize(slots.objective(3 * n + 2));
    slots.add_time_rows(&mut lp);

    // Box: C_i in [0, 1], S_i in [0, 1].
    for i in 1..=n {
        let after: Vec<usize> = (i + 1..n + 2).collect();
        lp.add_sparse_row(&[(i, slots.r[i - 1]), (ell(i), -1.0)], Relation::Le, 0.0);

        // l <= C_up S + C S_lo - C_up S_lo  ->  l - S <= 0
        let mut row = vec![(ell(i), 1.0)];
        row.extend(after.iter().map(|&k| (k, -1.0)));
        lp.add_sparse_row(&row, Relation::Le, 0.0);
        // l <= C S_up + C_lo S - C_lo S_up  ->  l - C <= 0
        lp.add_sparse_row(&[(ell(i), 1.0), (share(i), -1.0)], Relation::Le, 0.0);
        // l >= C_lo S + C S_lo - C_lo S_lo  ->  l >= 0
        lp.add_sparse_row(&[(ell(i), 1.0)], Relation::Ge, 0.0);
        // l >= C_up S + C S_up - C_up S_up  ->  l - S - C >= -1
        let mut row = vec![(ell(i), 1.0), (share(i), -1.0)];
        row.extend(after.iter().map(|&k| (k, -1.0)));
        lp.add_sparse_row(&row, Relation::Ge, -1.0);
    }
    let shares: Vec<(usize, f64)> = (1..=n).map(|i| (share(i), 1.0)).collect();
    lp.add_sparse_row(&shares, Relation::Le, 1.0);

    Ok(ScaledProgram {
        lp,
        value_unit: slots.rate_unit * slots.time_unit,
    })
}

/// The original problem with slot shares fixed (in bits/s), over `t_0..t_{N+1}`.
pub fn build_time_lp(
    scenario: &Scenario,
    sequence: &OffloadingSequence,
    slot_shares: &[f64],
) -> Result<ScaledProgram> {
    let slots = Slots::new(scenario, sequence)?;
    let n = slots.len();
    if slot_shares.len() != n {
        return Err(crate::error::param(format!(
            "{} shares for {n} slots",
            slot_shares.len()
        )));
    }
    let mut lp = LinearProgram::maximize(slots.objective(n + 2));
    slots.add_time_rows(&mut lp);
    for i in 1..=n {
        let c = slot_shares[i - 1] / slots.rate_unit;
        let mut row = vec![(i, slots.r[i - 1])];
        row.extend((i + 1..n + 2).map(|k| (k, -c)));
        lp.add_sparse_row(&row, Relation::Le, 0.0);
    }
    Ok(ScaledProgram {
        lp,
        value_unit: slots.rate_unit * slots.time_unit,
    })
}

pub fn solve_async(scenario: &Scenario, sequence: Option<&OffloadingSequence>) -> Result<AsyncAllocation> {
    solve_async_with(scenario, sequence, &AsyncOptions::default())
}

pub fn solve_async_with(
    scenario: &Scenario,
    sequence: Option<&OffloadingSequence>,
    options: &AsyncOptions,
) -> Result<AsyncAllocation> {
    let sequence = match sequence {
        Some(s) => s.clone(),
        None => schedule_ascending_weighted_rate(scenario),
    };
    let n = scenario.len();
    let capacity = scenario.system.edge_capacity;
    let rates = scenario.link_rates();
    let order = sequence.slot_to_device();

    let relaxed = build_relaxed_lp(scenario, &sequence)?;
    let (x, bound) = lp::solve(&relaxed.lp, &options.tolerances)?.into_optimal("async relaxation")?;
    let mut slot_shares: Vec<f64> = (0..n).map(|i| x[n + 2 + i].max(0.0) * capacity).collect();

    let mut floor_applied = false;
    for (i, &d) in order.iter().enumerate() {
        if rates[d] > 0.0 && slot_shares[i] < SHARE_FLOOR * capacity {
            slot_shares[i] = SHARE_FLOOR * capacity;
            floor_applied = true;
        }
    }
    let total: f64 = slot_shares.iter().sum();
    if floor_applied || total > capacity {
        for c in &mut slot_shares {
            *c *= capacity / total;
        }
    }
    if floor_applied {
        debug!("relaxation left a transmitting device without computing share; floor applied");
    }

    let mut best = stage_two(scenario, &sequence, &slot_shares, &options.tolerances)?;
    let mut source = ShareSource::Relaxation;
    if options.sync_fallback {
        let sync = solve_tdma(scenario, Some(&sequence))?;
        let sync_shares: Vec<f64> = order.iter().map(|&d| sync.compute_share[d]).collect();
        let alt = stage_two(scenario, &sequence, &sync_shares, &options.tolerances)?;
        if alt.1 > best.1 {
            debug!("synchronous shares beat the relaxation shares ({} > {})", alt.1, best.1);
            best = alt;
            slot_shares = sync_shares;
            source = ShareSource::Synchronous;
        }
    }
    let (times, value) = best;

    let mut compute_share = vec![0.0; n];
    let mut offloaded_bits = vec![0.0; n];
    for (i, &d) in order.iter().enumerate() {
        compute_share[d] = slot_shares[i];
        offloaded_bits[d] = rates[d] * times[i + 1];
    }
    Ok(AsyncAllocation {
        sequence,
        times,
        compute_share,
        offloaded_bits,
        weighted_throughput: value,
        relaxation_bound: bound * relaxed.value_unit,
        share_floor_applied: floor_applied,
        share_source: source,
    })
}

/// Times in seconds and the weighted throughput for fixed slot shares.
fn stage_two(
    scenario: &Scenario,
    sequence: &OffloadingSequence,
    slot_shares: &[f64],
    tolerances: &Tolerances,
) -> Result<(Vec<f64>, f64)> {
    let program = build_time_lp(scenario, sequence, slot_shares)?;
    let (tau, value) = lp::solve(&program.lp, tolerances)?.into_optimal("async time split")?;
    let frame = scenario.system.frame;
    Ok((tau.iter().map(|t| t.max(0.0) * frame).collect(), value * program.value_unit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, Device, SystemParams};
    use proptest::prelude::*;

    fn rel_le(a: f64, b: f64, slack: f64) -> bool {
        a <= b + slack * b.abs().max(1e-300)
    }

    fn hand_scenario(s: &[f64], r: &[f64], capacity: f64) -> Scenario {
        let system = SystemParams {
            frame: 1.0,
            bandwidth: 1.0,
            noise: 1.0,
            edge_capacity: capacity,
            ..SystemParams::default()
        };
        let devices = s
            .iter()
            .zip(r)
            .enumerate()
            .map(|(id, (&s, &r))| Device::new(id, r.exp2() - 1.0, s, 1.0))
            .collect();
        Scenario::new(system, devices).unwrap()
    }

    #[test]
    fn single_device_structure() {
        let sc = hand_scenario(&[1.0], &[2.0], 3.0);
        let p = build_relaxed_lp(&sc, &OffloadingSequence::identity(1)).unwrap();
        assert_eq!(p.lp.n_vars(), 5);
        // budget, causality, l link, four envelope rows, share budget
        assert_eq!(p.lp.rows.len(), 8);
        assert!(lp::solve(&p.lp, &Tolerances::default()).unwrap().is_optimal());
    }

    #[test]
    fn envelope_is_tight_at_the_upper_corner() {
        let sc = hand_scenario(&[1.0], &[2.0], 3.0);
        let p = build_relaxed_lp(&sc, &OffloadingSequence::identity(1)).unwrap();
        // t = (0, 0, 1), C = 1 (scaled), so S = 1 and l must equal 1.
        let x = |l: f64| vec![0.0, 0.0, 1.0, 1.0, l];
        assert!(p.lp.is_feasible(&x(1.0), 1e-12));
        assert!(!p.lp.is_feasible(&x(0.999), 1e-12));
        assert!(!p.lp.is_feasible(&x(1.001), 1e-12));
    }

    #[test]
    fn single_device_matches_synchronous() {
        let sc = hand_scenario(&[1.0], &[3.0], 2.0);
        let a = solve_async(&sc, None).unwrap();
        let s = solve_tdma(&sc, None).unwrap();
        assert!((a.weighted_throughput - s.weighted_throughput).abs() < 1e-9);
        assert!(rel_le(a.weighted_throughput, a.relaxation_bound, 1e-9));
    }

    #[test]
    fn tiny_capacity_starves_throughput() {
        let mut sc = generate_scenario(SystemParams::default(), 4, (1e5, 1e6), 1).unwrap();
        sc.system.edge_capacity = 1e-3;
        let a = solve_async(&sc, None).unwrap();
        assert!(a.weighted_throughput < 1e-2);
    }

    #[test]
    fn shares_have_wrong_length() {
        let sc = hand_scenario(&[1.0, 1.0], &[1.0, 2.0], 1.0);
        assert!(build_time_lp(&sc, &OffloadingSequence::identity(2), &[1.0]).is_err());
    }

    /// Checks the original bilinear constraints directly.
    fn check_feasible(sc: &Scenario, a: &AsyncAllocation) {
        let t = &a.times;
        let n = sc.len();
        let frame = sc.system.frame;
        assert!(t.iter().all(|&v| v >= 0.0));
        assert!(rel_le(t.iter().sum(), frame, 1e-9));
        let rates = sc.link_rates();
        let tol = 1e-9 * frame * sc.system.edge_capacity;
        for (i, &d) in a.sequence.slot_to_device().iter().enumerate() {
            let bits = rates[d] * t[i + 1];
            let sensed = sc.devices[d].sensing_rate * t[..=i].iter().sum::<f64>();
            let computed = a.compute_share[d] * t[i + 2..n + 2].iter().sum::<f64>();
            assert!(bits <= sensed * (1.0 + 1e-9) + tol, "slot {i}: {bits} > sensed {sensed}");
            assert!(bits <= computed * (1.0 + 1e-9) + tol, "slot {i}: {bits} > computed {computed}");
        }
        assert!(rel_le(a.compute_share.iter().sum(), sc.system.edge_capacity, 1e-9));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn sandwich(seed in any::<u64>(), n in 1usize..10) {
            let sc = generate_scenario(SystemParams::default(), n, (1e5, 1e6), seed).unwrap();
            let a = solve_async(&sc, None).unwrap();
            let s = solve_tdma(&sc, None).unwrap();
            check_feasible(&sc, &a);
            prop_assert!(rel_le(s.weighted_throughput, a.weighted_throughput, 1e-9));
            prop_assert!(rel_le(a.weighted_throughput, a.relaxation_bound, 1e-9));
        }

        #[test]
        fn relaxation_dominates_synchronous(seed in any::<u64>(), n in 1usize..10) {
            let sc = generate_scenario(SystemParams::default(), n, (1e5, 1e6), seed).unwrap();
            let bound = solve_async_with(&sc, None, &AsyncOptions { sync_fallback: false, ..Default::default() })
                .unwrap()
                .relaxation_bound;
            let s = solve_tdma(&sc, None).unwrap();
            prop_assert!(rel_le(s.weighted_throughput, bound, 1e-9));
        }
    }

    #[test]
    fn throughput_grows_with_capacity() {
        for seed in 0..20 {
            let base = generate_scenario(SystemParams::default(), 6, (1e5, 1e6), seed).unwrap();
            let mut last = 0.0;
            for c in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
                let mut sc = base.clone();
                sc.system.edge_capacity = c * 1e7;
                let v = solve_async(&sc, None).unwrap().weighted_throughput;
                assert!(v >= last * (1.0 - 1e-9), "seed {seed} C {c}: {v} < {last}");
                last = v;
            }
        }
    }

    #[test]
    fn badly_scaled_rates_still_solve() {
        // Link rates spanning five decades once broke the simplex.
        for seed in [6793344243670897154, 14492959311470927180, 10867975736419451612] {
            let sc = generate_scenario(SystemParams::default(), 24, (1e5, 1e6), seed).unwrap();
            let a = solve_async_with(&sc, None, &AsyncOptions { sync_fallback: false, ..Default::default() }).unwrap();
            let s = solve_tdma(&sc, None).unwrap();
            assert!(a.weighted_throughput >= s.weighted_throughput * (1.0 - 1e-9));
            assert!(a.weighted_throughput <= a.relaxation_bound * (1.0 + 1e-9));
        }
    }
}
