//! NOMA with time sharing among SIC orders, for devices with a common
//! sensing rate `s0`.
//!
//! All devices transmit at full power. The offloading window is split into
//! fractions `tau_m`, each decoded with its own order, so a device's
//! average rate is `Σ_m tau_m r_{n,m}`. Writing `y_m = tau_m t^o` and
//! `z_n = C_n t^c` turns the bilinear problem into an LP:
//!
//! ```text
//! max  N s0 t^s
//! s.t. t^s + Σ_m y_m + t^c <= T
//!      s0 t^s <= Σ_m y_m r_{n,m}       for every n
//!      load_n <= z_n                   for every n
//!      Σ_n z_n <= C t^c
//! ```
//!
//! Every column of the rate matrix sums to the same full-power sum rate, so
//! time sharing only redistributes rate between devices.
//!
//! The computing load `load_n` is the data the server has to process for
//! device `n`. By default it is the sensed data `s0 t^s`: a device cannot
//! offload bits it never sensed, whatever its link could carry. The stricter
//! [`ComputeLoad::Transmitted`] charges the full link capacity
//! `Σ_m y_m r_{n,m}` instead. With that choice, full power can be worse than
//! the power-controlled fixed order, because strong devices then load the
//! server with capacity they have no data for.

use std::f64::consts::LN_2;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::lp::{self, LinearProgram, Relation, ScaledProgram, Tolerances};
use crate::noma::{self, sic_decode_order, sic_rates_in_order};
use crate::scenario::Scenario;
use crate::tdma::next_permutation;

/// Largest device count for which the greedy scans every permutation.
pub const FULL_POOL_MAX_N: usize = 6;
/// Relative gain below which a new order is not worth adding.
pub const IMPROVEMENT_TOLERANCE: f64 = 1e-9;

const STAGE: &str = "time-sharing LP";

/// What the server must process for each device.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComputeLoad {
    /// `s0 t^s`, the data actually sensed.
    #[default]
    Sensed,
    /// `Σ_m tau_m t^o r_{n,m}`, everything the link could carry.
    Transmitted,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TimeSharingOptions {
    pub compute_load: ComputeLoad,
    /// Cap on the greedy order set, [`default_max_orders`] when `None`.
    pub max_orders: Option<usize>,
}

/// One decoding order. `decode_position[n]` is where device `n` is decoded,
/// `0` being first (and so seeing every other device as interference).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SicOrder {
    decode_position: Vec<usize>,
}

impl SicOrder {
    pub fn from_positions(decode_position: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; decode_position.len()];
        for &p in &decode_position {
            if p >= seen.len() || std::mem::replace(&mut seen[p], true) {
                return Err(param(format!("{decode_position:?} is not a permutation")));
            }
        }
        Ok(SicOrder { decode_position })
    }

    /// From device ids listed in decoding order.
    pub fn from_sequence(sequence: &[usize]) -> Result<Self> {
        let mut pos = vec![usize::MAX; sequence.len()];
        for (k, &d) in sequence.iter().enumerate() {
            if d >= pos.len() || pos[d] != usize::MAX {
                return Err(param(format!("{sequence:?} is not a permutation")));
            }
            pos[d] = k;
        }
        Ok(SicOrder { decode_position: pos })
    }

    pub fn decode_position(&self) -> &[usize] {
        &self.decode_position
    }

    /// Device ids in decoding order.
    pub fn sequence(&self) -> Vec<usize> {
        let mut seq = vec![0; self.decode_position.len()];
        for (d, &p) in self.decode_position.iter().enumerate() {
            seq[p] = d;
        }
        seq
    }

    /// Descending channel gain, the fixed-order receiver's choice.
    pub fn descending_gain(scenario: &Scenario) -> Self {
        SicOrder::from_sequence(&sic_decode_order(scenario)).expect("sort yields a permutation")
    }

    pub fn len(&self) -> usize {
        self.decode_position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decode_position.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSharingAllocation {
    pub orders: Vec<SicOrder>,
    /// `tau_m`, one per order, summing to one.
    pub fractions: Vec<f64>,
    pub sense_ts: f64,
    pub offload_to: f64,
    pub compute_tc: f64,
    pub compute_share: Vec<f64>,
    /// Time-averaged rate per device.
    pub average_rates: Vec<f64>,
    pub device_bits: Vec<f64>,
    pub throughput: f64,
}

/// `r[n][m]`: rate of device `n` under order `m` at full power.
pub fn rate_matrix(scenario: &Scenario, orders: &[SicOrder]) -> Vec<Vec<f64>> {
    let power: Vec<f64> = scenario.devices.iter().map(|d| d.max_power).collect();
    let columns: Vec<Vec<f64>> = orders
        .iter()
        .map(|o| sic_rates_in_order(scenario, &power, &o.sequence()))
        .collect();
    (0..scenario.len())
        .map(|n| columns.iter().map(|c| c[n]).collect())
        .collect()
}

/// Full-power sum rate, the common column sum of every rate matrix.
pub fn full_power_sum_rate(scenario: &Scenario) -> f64 {
    let rx: f64 = scenario.devices.iter().map(|d| d.max_power * d.gain).sum();
    scenario.system.bandwidth * (rx / scenario.system.noise).ln_1p() / LN_2
}

fn common_rate(scenario: &Scenario) -> Result<f64> {
    scenario.common_sensing_rate().ok_or_else(|| {
        Error::Precondition("time sharing needs every device to sense at the same rate".into())
    })
}

/// The LP over `(t^s, t^c, y_1..y_M, z_1..z_N)` with times in units of `T`
/// and bits in units of `C T`.
pub fn build_p21_lp(scenario: &Scenario, orders: &[SicOrder]) -> Result<ScaledProgram> {
    build_p21_lp_with(scenario, orders, ComputeLoad::default())
}

pub fn build_p21_lp_with(scenario: &Scenario, orders: &[SicOrder], load: ComputeLoad) -> Result<ScaledProgram> {
    let s0 = common_rate(scenario)?;
    let n = scenario.len();
    if orders.is_empty() || orders.iter().any(|o| o.len() != n) {
        return Err(param(format!("need at least one order over {n} devices")));
    }
    let unit = scenario.system.edge_capacity;
    let r = rate_matrix(scenario, orders);
    Ok(p21_from_matrix(s0 / unit, &r, unit, scenario.system.frame, load))
}

fn p21_from_matrix(s0: f64, rates: &[Vec<f64>], unit: f64, frame: f64, load: ComputeLoad) -> ScaledProgram {
    let n = rates.len();
    let m = rates[0].len();
    let y = |k: usize| 2 + k;
    let z = |i: usize| 2 + m + i;
    let mut objective = vec![0.0; 2 + m + n];
    objective[0] = n as f64 * s0;
    let mut lp = LinearProgram::maximize(objective);

    let mut budget = vec![(0, 1.0), (1, 1.0)];
    budget.extend((0..m).map(|k| (y(k), 1.0)));
    lp.add_sparse_row(&budget, Relation::Le, 1.0);
    for row in rates {
        let mut sense = vec![(0, s0)];
        sense.extend(row.iter().enumerate().map(|(k, r)| (y(k), -r / unit)));
        lp.add_sparse_row(&sense, Relation::Le, 0.0);
    }
    for (i, row) in rates.iter().enumerate() {
        let mut compute: Vec<(usize, f64)> = match load {
            ComputeLoad::Sensed => vec![(0, s0)],
            ComputeLoad::Transmitted => row.iter().enumerate().map(|(k, r)| (y(k), r / unit)).collect(),
        };
        compute.push((z(i), -1.0));
        lp.add_sparse_row(&compute, Relation::Le, 0.0);
    }
    let mut cap: Vec<(usize, f64)> = (0..n).map(|i| (z(i), 1.0)).collect();
    cap.push((1, -1.0));
    lp.add_sparse_row(&cap, Relation::Le, 0.0);
    ScaledProgram {
        lp,
        value_unit: unit * frame,
    }
}

/// Growing order set solved incrementally by the greedy.
struct OrderSet<'a> {
    scenario: &'a Scenario,
    s0: f64,
    unit: f64,
    orders: Vec<SicOrder>,
    /// `rates[n][m]`
    rates: Vec<Vec<f64>>,
    power: Vec<f64>,
    load: ComputeLoad,
    tol: Tolerances,
}

impl<'a> OrderSet<'a> {
    fn new(scenario: &'a Scenario, s0: f64, load: ComputeLoad) -> Self {
        OrderSet {
            scenario,
            s0,
            unit: scenario.system.edge_capacity,
            orders: Vec::new(),
            rates: vec![Vec::new(); scenario.len()],
            power: scenario.devices.iter().map(|d| d.max_power).collect(),
            load,
            tol: Tolerances::default(),
        }
    }

    fn column(&self, order: &SicOrder) -> Vec<f64> {
        sic_rates_in_order(self.scenario, &self.power, &order.sequence())
    }

    fn push(&mut self, order: SicOrder, column: &[f64]) {
        for (row, r) in self.rates.iter_mut().zip(column) {
            row.push(*r);
        }
        self.orders.push(order);
    }

    fn remove(&mut self, k: usize) {
        self.orders.remove(k);
        for row in &mut self.rates {
            row.remove(k);
        }
    }

    fn program(&self) -> ScaledProgram {
        p21_from_matrix(self.s0 / self.unit, &self.rates, self.unit, self.scenario.system.frame, self.load)
    }

    /// Scaled LP optimum and point.
    fn solve(&self) -> Result<(Vec<f64>, f64)> {
        lp::solve(&self.program().lp, &self.tol)?.into_optimal(STAGE)
    }

    /// Scaled value with one extra column appended.
    fn value_with(&self, column: &[f64]) -> Result<f64> {
        let rates: Vec<Vec<f64>> = self
            .rates
            .iter()
            .zip(column)
            .map(|(row, r)| row.iter().copied().chain(std::iter::once(*r)).collect())
            .collect();
        let p = p21_from_matrix(self.s0 / self.unit, &rates, self.unit, self.scenario.system.frame, self.load);
        Ok(lp::solve(&p.lp, &self.tol)?.into_optimal(STAGE)?.1)
    }

    /// The order with the largest reduced cost under the current duals,
    /// with that reduced cost (scaled units).
    ///
    /// A new column gains `Σ_n (a_n - b_n) r_n - u_0`, where `a` and `b` are
    /// the duals of the sensing and computing rows and `u_0` prices the
    /// frame budget. `b` drops out when the load is the sensed data. Rates of SIC orders are the vertices of the full-power
    /// capacity polymatroid, so a weighted sum is maximized by decoding the
    /// devices in ascending weight order.
    fn price(&self) -> Result<(SicOrder, f64)> {
        let n = self.scenario.len();
        let dual = self.program().lp.dual()?;
        let (u, _) = lp::solve(&dual, &self.tol)?.into_optimal("time-sharing dual")?;
        let weight: Vec<f64> = (0..n)
            .map(|i| match self.load {
                ComputeLoad::Sensed => u[1 + i],
                ComputeLoad::Transmitted => u[1 + i] - u[1 + n + i],
            })
            .collect();
        let mut seq: Vec<usize> = (0..n).collect();
        seq.sort_by(|&a, &b| weight[a].total_cmp(&weight[b]).then(a.cmp(&b)));
        let order = SicOrder::from_sequence(&seq)?;
        let column = self.column(&order);
        let gain = (0..n).map(|i| weight[i] * column[i] / self.unit).sum::<f64>() - u[0];
        Ok((order, gain))
    }

    /// Drops orders with zero share (never the first). True if any went.
    fn prune(&mut self, x: &[f64]) -> bool {
        let dead: Vec<usize> = (1..self.orders.len()).filter(|&k| x[2 + k] <= 0.0).collect();
        for &k in dead.iter().rev() {
            self.remove(k);
        }
        !dead.is_empty()
    }
}

/// Default cap on the number of orders: `2N`.
pub fn default_max_orders(n: usize) -> usize {
    2 * n.max(1)
}

/// Order set built greedily from the descending-gain order.
///
/// For up to [`FULL_POOL_MAX_N`] devices each step tries every permutation
/// and keeps the one that raises the LP value most. When that stalls, or
/// for larger `N`, the next order comes from pricing against the LP duals,
/// which finds the best permutation without enumerating them. The loop
/// stops when no order improves the value by [`IMPROVEMENT_TOLERANCE`]
/// relative, or when the set is full and has no idle order to drop.
pub fn greedy_sic_set(scenario: &Scenario, max_orders: usize) -> Result<Vec<SicOrder>> {
    greedy_sic_set_with(scenario, max_orders, ComputeLoad::default())
}

pub fn greedy_sic_set_with(scenario: &Scenario, max_orders: usize, load: ComputeLoad) -> Result<Vec<SicOrder>> {
    let s0 = common_rate(scenario)?;
    let n = scenario.len();
    let max_orders = max_orders.max(1);
    let mut set = OrderSet::new(scenario, s0, load);
    let anchor = SicOrder::descending_gain(scenario);
    let col = set.column(&anchor);
    set.push(anchor, &col);
    if n == 1 {
        return Ok(set.orders);
    }

    let pool: Vec<SicOrder> = if n <= FULL_POOL_MAX_N {
        let mut p: Vec<usize> = (0..n).collect();
        let mut all = vec![SicOrder::from_sequence(&p)?];
        while next_permutation(&mut p) {
            all.push(SicOrder::from_sequence(&p)?);
        }
        all
    } else {
        Vec::new()
    };
    let mut pool_exhausted = pool.is_empty();

    let max_steps = 4 * max_orders + 16;
    for _ in 0..max_steps {
        let (x, value) = set.solve()?;
        let threshold = IMPROVEMENT_TOLERANCE * value.abs().max(f64::MIN_POSITIVE);
        if set.orders.len() >= max_orders && !set.prune(&x) {
            break;
        }

        if !pool_exhausted {
            let mut best: Option<(usize, f64)> = None;
            for (k, cand) in pool.iter().enumerate() {
                if set.orders.contains(cand) {
                    continue;
                }
                let v = set.value_with(&set.column(cand))?;
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((k, v));
                }
            }
            match best {
                Some((k, v)) if v - value > threshold => {
                    let col = set.column(&pool[k]);
                    set.push(pool[k].clone(), &col);
                    continue;
                }
                _ => pool_exhausted = true,
            }
        }

        let (order, gain) = set.price()?;
        if gain <= threshold || set.orders.contains(&order) {
            break;
        }
        debug!("priced order {:?} with reduced cost {gain}", order.sequence());
        let col = set.column(&order);
        set.push(order, &col);
    }
    Ok(set.orders)
}

pub fn solve_timesharing(scenario: &Scenario, orders: Option<&[SicOrder]>) -> Result<TimeSharingAllocation> {
    solve_timesharing_with(scenario, orders, &TimeSharingOptions::default())
}

pub fn solve_timesharing_with(
    scenario: &Scenario,
    orders: Option<&[SicOrder]>,
    options: &TimeSharingOptions,
) -> Result<TimeSharingAllocation> {
    let load = options.compute_load;
    let orders = match orders {
        Some(o) => o.to_vec(),
        None => {
            let cap = options.max_orders.unwrap_or_else(|| default_max_orders(scenario.len()));
            greedy_sic_set_with(scenario, cap, load)?
        }
    };
    let program = build_p21_lp_with(scenario, &orders, load)?;
    let (x, value) = lp::solve(&program.lp, &Tolerances::default())?.into_optimal(STAGE)?;

    let sys = &scenario.system;
    let n = scenario.len();
    let m = orders.len();
    let s0 = common_rate(scenario)?;
    let frame = sys.frame;
    let sense_ts = x[0] * frame;
    let compute_tc = x[1] * frame;
    let y: Vec<f64> = x[2..2 + m].iter().map(|v| v.max(0.0) * frame).collect();
    let offload_to: f64 = y.iter().sum();
    let fractions: Vec<f64> = if offload_to > 0.0 {
        y.iter().map(|v| v / offload_to).collect()
    } else {
        let mut f = vec![0.0; m];
        f[0] = 1.0;
        f
    };
    let compute_share: Vec<f64> = if x[1] > 0.0 {
        x[2 + m..].iter().map(|z| z.max(0.0) * sys.edge_capacity / x[1]).collect()
    } else {
        vec![sys.edge_capacity / n as f64; n]
    };
    let r = rate_matrix(scenario, &orders);
    let average_rates: Vec<f64> = r
        .iter()
        .map(|row| row.iter().zip(&fractions).map(|(a, b)| a * b).sum())
        .collect();
    let device_bits = average_rates
        .iter()
        .map(|rate| (s0 * sense_ts).min(rate * offload_to))
        .collect();
    Ok(TimeSharingAllocation {
        orders,
        fractions,
        sense_ts,
        offload_to,
        compute_tc,
        compute_share,
        average_rates,
        device_bits,
        throughput: value * program.value_unit,
    })
}

/// `N s0 T / (1 + N s0 / R + N s0 / C)` for a sum rate `R`.
fn equal_rate_throughput(scenario: &Scenario, s0: f64, sum_rate: f64) -> f64 {
    let sys = &scenario.system;
    let load = scenario.len() as f64 * s0;
    if sum_rate <= 0.0 {
        return 0.0;
    }
    load * sys.frame / (1.0 + load / sum_rate + load / sys.edge_capacity)
}

/// Fixed-order throughput in bits from the sum rate at the optimal powers.
pub fn closed_form_fixed(scenario: &Scenario) -> Result<f64> {
    let s0 = common_rate(scenario)?;
    let a = noma::solve_noma(scenario)?;
    let rx: f64 = a.power.iter().zip(&scenario.devices).map(|(p, d)| p * d.gain).sum();
    let sum_rate = scenario.system.bandwidth * (rx / scenario.system.noise).ln_1p() / LN_2;
    Ok(equal_rate_throughput(scenario, s0, sum_rate))
}

/// The same expression at full power, in bits.
pub fn closed_form_sharing_prime(scenario: &Scenario) -> Result<f64> {
    let s0 = common_rate(scenario)?;
    Ok(equal_rate_throughput(scenario, s0, full_power_sum_rate(scenario)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, Device, SystemParams};
    use proptest::prelude::*;

    fn equal_s(n: usize, seed: u64) -> Scenario {
        generate_scenario(SystemParams::default(), n, (5e5, 5e5), seed).unwrap()
    }

    fn unit_system(capacity: f64) -> SystemParams {
        SystemParams {
            frame: 1.0,
            bandwidth: 1.0,
            noise: 1.0,
            edge_capacity: capacity,
            ..SystemParams::default()
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    fn all_orders(n: usize) -> Vec<SicOrder> {
        let mut p: Vec<usize> = (0..n).collect();
        let mut v = vec![SicOrder::from_sequence(&p).unwrap()];
        while next_permutation(&mut p) {
            v.push(SicOrder::from_sequence(&p).unwrap());
        }
        v
    }

    #[test]
    fn order_round_trip() {
        let o = SicOrder::from_sequence(&[2, 0, 1]).unwrap();
        assert_eq!(o.decode_position(), &[1, 2, 0]);
        assert_eq!(o.sequence(), vec![2, 0, 1]);
        assert_eq!(SicOrder::from_positions(vec![1, 2, 0]).unwrap(), o);
        assert!(SicOrder::from_sequence(&[0, 0]).is_err());
        assert!(SicOrder::from_positions(vec![0, 2]).is_err());
    }

    #[test]
    fn descending_column_matches_fixed_order_rates() {
        let sc = equal_s(5, 4);
        let r = rate_matrix(&sc, &[SicOrder::descending_gain(&sc)]);
        let power: Vec<f64> = sc.devices.iter().map(|d| d.max_power).collect();
        let fixed = noma::sic_rates(&sc, &power);
        for (row, f) in r.iter().zip(&fixed) {
            assert_eq!(row[0], *f);
        }
    }

    #[test]
    fn symmetric_pair_shares_evenly() {
        let sc = Scenario::new(
            unit_system(1.0),
            vec![Device::new(0, 1.0, 1.0, 1.0), Device::new(1, 1.0, 1.0, 1.0)],
        )
        .unwrap();
        let orders = all_orders(2);
        let r = rate_matrix(&sc, &orders);
        assert!(rel(0.5 * (r[0][0] + r[0][1]), 0.5 * (r[1][0] + r[1][1])) < 1e-15);

        // Average rate log2(3) / 2 each; sum rate log2(3).
        let a = solve_timesharing(&sc, Some(&orders)).unwrap();
        let avg = 3f64.log2() / 2.0;
        let ts = 1.0 / (1.0 + 1.0 / avg + 2.0);
        assert!(rel(a.throughput, 2.0 * ts) < 1e-12);
        assert!((a.fractions[0] - 0.5).abs() < 1e-12);
        assert!(a.compute_tc > 0.0);
    }

    #[test]
    fn symmetric_pair_greedy_takes_both_orders() {
        let sc = Scenario::new(
            unit_system(1.0),
            vec![Device::new(0, 1.0, 1.0, 1.0), Device::new(1, 1.0, 1.0, 1.0)],
        )
        .unwrap();
        assert_eq!(greedy_sic_set(&sc, 4).unwrap().len(), 2);
    }

    #[test]
    fn single_order_matches_min_rate_closed_form() {
        let sc = equal_s(4, 19);
        let order = SicOrder::descending_gain(&sc);
        let r = rate_matrix(&sc, std::slice::from_ref(&order));
        let r_min = r.iter().map(|row| row[0]).fold(f64::INFINITY, f64::min);
        let sum: f64 = r.iter().map(|row| row[0]).sum();
        let s0 = 5e5;
        let sys = &sc.system;
        let orders = [order];

        let ts = sys.frame / (1.0 + s0 / r_min + 4.0 * s0 / sys.edge_capacity);
        let a = solve_timesharing(&sc, Some(&orders)).unwrap();
        assert!(rel(a.throughput, 4.0 * s0 * ts) < 1e-9);

        // Charging the link capacity, the window is sized by the whole column.
        let ts = sys.frame / (1.0 + s0 / r_min + s0 * sum / (r_min * sys.edge_capacity));
        let strict = TimeSharingOptions {
            compute_load: ComputeLoad::Transmitted,
            max_orders: None,
        };
        let a = solve_timesharing_with(&sc, Some(&orders), &strict).unwrap();
        assert!(rel(a.throughput, 4.0 * s0 * ts) < 1e-9);
    }

    #[test]
    fn transmitted_load_never_beats_sensed_load() {
        let strict = TimeSharingOptions {
            compute_load: ComputeLoad::Transmitted,
            max_orders: None,
        };
        for seed in 0..10 {
            let sc = equal_s(6, seed);
            let loose = solve_timesharing(&sc, None).unwrap().throughput;
            let tight = solve_timesharing_with(&sc, None, &strict).unwrap().throughput;
            assert!(tight <= loose * (1.0 + 1e-9));
        }
    }

    #[test]
    fn single_device_is_the_fixed_solution() {
        let sc = equal_s(1, 2);
        let a = solve_timesharing(&sc, None).unwrap();
        let f = noma::solve_noma(&sc).unwrap();
        assert_eq!(a.orders.len(), 1);
        assert!(rel(a.throughput, f.throughput) < 1e-9);
    }

    #[test]
    fn unequal_sensing_is_rejected() {
        let sc = generate_scenario(SystemParams::default(), 3, (1e5, 1e6), 1).unwrap();
        assert!(matches!(solve_timesharing(&sc, None), Err(Error::Precondition(_))));
        assert!(matches!(closed_form_fixed(&sc), Err(Error::Precondition(_))));
    }

    #[test]
    fn greedy_reaches_full_enumeration() {
        for n in 2..=5 {
            for seed in 0..4 {
                let sc = equal_s(n, seed);
                let greedy = solve_timesharing(&sc, None).unwrap().throughput;
                let full = solve_timesharing(&sc, Some(&all_orders(n))).unwrap().throughput;
                assert!(greedy <= full * (1.0 + 1e-9), "n {n} seed {seed}");
                assert!(rel(greedy, full) < 1e-7, "n {n} seed {seed}: {greedy} vs {full}");
            }
        }
    }

    #[test]
    fn closed_forms_limits() {
        let sc = equal_s(4, 3);
        let base = closed_form_fixed(&sc).unwrap();
        let mut big = sc.clone();
        big.system.edge_capacity *= 10.0;
        assert!(closed_form_fixed(&big).unwrap() > base);
        let mut tiny = sc.clone();
        for d in &mut tiny.devices {
            d.sensing_rate = 1e-6;
        }
        assert!(closed_form_fixed(&tiny).unwrap() < 1e-5);
    }

    #[test]
    fn closed_forms_coincide_when_every_device_hits_its_cap() {
        // One device: beta* puts it exactly at the cap.
        let sc = Scenario::new(unit_system(2.0), vec![Device::new(0, 3.0, 1.0, 1.0)]).unwrap();
        let fixed = closed_form_fixed(&sc).unwrap();
        let prime = closed_form_sharing_prime(&sc).unwrap();
        assert!(rel(fixed, prime) < 1e-9);
    }

    fn check(sc: &Scenario, a: &TimeSharingAllocation) {
        let sys = &sc.system;
        let s0 = sc.devices[0].sensing_rate;
        assert!((a.fractions.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(a.fractions.iter().all(|&f| f >= 0.0));
        assert!(a.sense_ts + a.offload_to + a.compute_tc <= sys.frame * (1.0 + 1e-9));
        for (n, rate) in a.average_rates.iter().enumerate() {
            let sent = rate * a.offload_to;
            assert!(s0 * a.sense_ts <= sent * (1.0 + 1e-8) + 1e-9);
            assert!(a.device_bits[n] <= a.compute_share[n] * a.compute_tc * (1.0 + 1e-8) + 1e-6);
        }
        assert!(a.compute_share.iter().sum::<f64>() <= sys.edge_capacity * (1.0 + 1e-8));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn column_sums_equal_sum_rate(seed in any::<u64>(), n in 1usize..7) {
            let sc = equal_s(n, seed);
            let total = full_power_sum_rate(&sc);
            for col in 0..all_orders(n).len().min(24) {
                let r = rate_matrix(&sc, &all_orders(n)[col..=col]);
                let sum: f64 = r.iter().map(|row| row[0]).sum();
                prop_assert!(rel(sum, total) < 1e-12);
            }
        }

        #[test]
        fn dominates_fixed_order(seed in any::<u64>(), n in 1usize..12) {
            let sc = equal_s(n, seed);
            let a = solve_timesharing(&sc, None).unwrap();
            check(&sc, &a);
            let fixed = noma::solve_noma(&sc).unwrap().throughput;
            prop_assert!(a.throughput >= fixed * (1.0 - 1e-9), "{} < {}", a.throughput, fixed);
        }

        #[test]
        fn fixed_closed_form_matches_solver(seed in any::<u64>(), n in 1usize..16) {
            let sc = equal_s(n, seed);
            let f = noma::solve_noma(&sc).unwrap().throughput;
            prop_assert!(rel(closed_form_fixed(&sc).unwrap(), f) < 1e-6);
            prop_assert!(closed_form_sharing_prime(&sc).unwrap() >= closed_form_fixed(&sc).unwrap());
        }

        #[test]
        fn more_orders_never_hurt(seed in any::<u64>(), n in 2usize..5) {
            let sc = equal_s(n, seed);
            let orders = all_orders(n);
            let mut last = 0.0;
            for m in 1..=orders.len() {
                let v = solve_timesharing(&sc, Some(&orders[..m])).unwrap().throughput;
                prop_assert!(v >= last * (1.0 - 1e-9));
                last = v;
            }
        }
    }
}
