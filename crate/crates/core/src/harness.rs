//! Monte Carlo sweeps over the allocation schemes.
//!
//! Every (sweep value, trial) pair draws one scenario from a seed derived
//! from the base seed, and every scheme runs on that same scenario. Trials
//! are independent, so they run on the rayon pool and are sorted before
//! anything is written.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::fdma::{solve_fdma, FdmaAllocation};
use crate::noma::{solve_noma, NomaAllocation};
use crate::noma_timesharing::{solve_timesharing, TimeSharingAllocation};
use crate::scenario::{generate_scenario, Scenario, SystemParams};
use crate::tdma::{
    benchmark_sequence, exhaustive_sequence_search, solve_tdma, BenchmarkOrder, TdmaAllocation,
};
use crate::tdma_async::{solve_async, AsyncAllocation};

/// Largest `N` for which `tdma_exhaustive` still runs in a sweep.
pub const SWEEP_MAX_EXHAUSTIVE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Tdma,
    TdmaExhaustive,
    TdmaRandom,
    TdmaAscS,
    TdmaDescR,
    TdmaAsync,
    NomaFixed,
    NomaTimesharing,
    Fdma,
}

impl Scheme {
    pub const ALL: [Scheme; 9] = [
        Scheme::Tdma,
        Scheme::TdmaExhaustive,
        Scheme::TdmaRandom,
        Scheme::TdmaAscS,
        Scheme::TdmaDescR,
        Scheme::TdmaAsync,
        Scheme::NomaFixed,
        Scheme::NomaTimesharing,
        Scheme::Fdma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Tdma => "tdma",
            Scheme::TdmaExhaustive => "tdma_exhaustive",
            Scheme::TdmaRandom => "tdma_random",
            Scheme::TdmaAscS => "tdma_asc_s",
            Scheme::TdmaDescR => "tdma_desc_r",
            Scheme::TdmaAsync => "tdma_async",
            Scheme::NomaFixed => "noma_fixed",
            Scheme::NomaTimesharing => "noma_timesharing",
            Scheme::Fdma => "fdma",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| param(format!("unknown scheme {s:?}")))
    }
}

/// Parses a comma-separated scheme list.
pub fn parse_schemes(list: &str) -> Result<Vec<Scheme>> {
    list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "values")]
pub enum Sweep {
    DeviceCount(Vec<usize>),
    /// Upper end of the sensing range in bits/s.
    SensingMax(Vec<f64>),
    /// Edge capacity in bits/s.
    Capacity(Vec<f64>),
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Sweep::DeviceCount(v) => v.iter().map(|&n| n as f64).collect(),
            Sweep::SensingMax(v) | Sweep::Capacity(v) => v.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Sweep::DeviceCount(v) => v.len(),
            Sweep::SensingMax(v) | Sweep::Capacity(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn default_device_counts() -> Self {
        Sweep::DeviceCount(vec![4, 8, 12, 16, 20, 24])
    }

    pub fn default_sensing_max() -> Self {
        Sweep::SensingMax(vec![3e5, 8e5, 13e5, 18e5, 23e5])
    }

    pub fn default_capacity() -> Self {
        Sweep::Capacity([0.25, 0.5, 1.0, 2.0, 4.0].iter().map(|c| c * 1e7).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub system: SystemParams,
    pub trials: usize,
    pub seed: u64,
    pub sweep: Sweep,
    pub schemes: Vec<Scheme>,
    /// Common sensing rate for every device, in bits/s.
    pub equal_sensing: Option<f64>,
    /// Device count when the sweep is not over `N`.
    pub devices: usize,
    /// Sensing range `[s_min, s_max]`; a sensing sweep replaces `s_max`.
    pub sensing_range: (f64, f64),
    /// Record solver wall time. Off makes output byte-for-byte reproducible.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            system: SystemParams::default(),
            trials: 500,
            seed: 1,
            sweep: Sweep::default_device_counts(),
            schemes: vec![Scheme::Tdma, Scheme::TdmaAsync, Scheme::NomaFixed, Scheme::Fdma],
            equal_sensing: None,
            devices: 8,
            sensing_range: (1e5, 1e6),
            timing: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.trials == 0 {
            return Err(param("trials must be at least 1"));
        }
        if self.sweep.is_empty() {
            return Err(param("sweep has no values"));
        }
        if self.schemes.is_empty() {
            return Err(param("no schemes selected"));
        }
        if self.schemes.contains(&Scheme::NomaTimesharing) && self.equal_sensing.is_none() {
            return Err(param("noma_timesharing needs an equal sensing rate"));
        }
        if let Some(s) = self.equal_sensing {
            if !(s > 0.0 && s.is_finite()) {
                return Err(param(format!("equal sensing rate must be positive, got {s}")));
            }
        }
        match &self.sweep {
            Sweep::DeviceCount(v) if v.contains(&0) => return Err(param("device count 0 in sweep")),
            Sweep::SensingMax(v) if v.iter().any(|&s| !(s >= self.sensing_range.0)) => {
                return Err(param("sensing sweep value below s_min"))
            }
            Sweep::Capacity(v) if v.iter().any(|&c| !(c > 0.0)) => {
                return Err(param("capacity sweep value must be positive"))
            }
            _ => {}
        }
        if self.devices == 0 && !matches!(self.sweep, Sweep::DeviceCount(_)) {
            return Err(param("devices must be at least 1"));
        }
        Ok(())
    }

    pub fn from_json(src: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(src)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Scenario for one sweep point and trial, with the seed it came from.
    ///
    /// A capacity sweep keeps the same devices at every grid point, so the
    /// curve over `C` compares like with like; its seed ignores the value.
    pub fn scenario_for(&self, sweep_value: f64, trial: usize) -> Result<(Scenario, u64)> {
        let key = match self.sweep {
            Sweep::Capacity(_) => 0.0,
            _ => sweep_value,
        };
        let seed = trial_seed(self.seed, key, trial);
        let mut system = self.system;
        let mut n = self.devices;
        let mut range = self.sensing_range;
        match self.sweep {
            Sweep::DeviceCount(_) => n = sweep_value as usize,
            Sweep::SensingMax(_) => range.1 = sweep_value,
            Sweep::Capacity(_) => system.edge_capacity = sweep_value,
        }
        if let Some(s) = self.equal_sensing {
            range = (s, s);
        }
        Ok((generate_scenario(system, n, range, seed)?, seed))
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one trial, stable across runs and platforms.
pub fn trial_seed(seed: u64, sweep_value: f64, trial: usize) -> u64 {
    let a = mix(seed ^ 0x9e37_79b9_7f4a_7c15);
    let b = mix(a ^ sweep_value.to_bits());
    mix(b ^ trial as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub scheme: Scheme,
    pub sweep_value: f64,
    pub trial: usize,
    pub sum_throughput_bits: f64,
    pub jfi: Option<f64>,
    pub runtime_ms: f64,
    pub seed_used: u64,
    pub failed: bool,
}

/// Jain's index `(Σ R)^2 / (N Σ R^2)`; `None` when nothing was delivered.
pub fn jain_index(per_device_bits: &[f64]) -> Option<f64> {
    if per_device_bits.is_empty() || per_device_bits.iter().any(|&r| r < 0.0 || !r.is_finite()) {
        return None;
    }
    let sum: f64 = per_device_bits.iter().sum();
    let sq: f64 = per_device_bits.iter().map(|r| r * r).sum();
    if sq <= 0.0 {
        return None;
    }
    Some((sum * sum / (per_device_bits.len() as f64 * sq)).min(1.0))
}

/// A scheme's full allocation, for `single` dumps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Allocation {
    Tdma(TdmaAllocation),
    TdmaAsync(AsyncAllocation),
    Noma(NomaAllocation),
    TimeSharing(TimeSharingAllocation),
    Fdma(FdmaAllocation),
}

impl Allocation {
    /// Delivered bits per device id.
    pub fn device_bits(&self) -> Vec<f64> {
        match self {
            Allocation::Tdma(a) => a.offloaded_bits.clone(),
            Allocation::TdmaAsync(a) => a.offloaded_bits.clone(),
            Allocation::Noma(a) => a.device_bits.clone(),
            Allocation::TimeSharing(a) => a.device_bits.clone(),
            Allocation::Fdma(a) => a.bits_l.clone(),
        }
    }

    pub fn total_bits(&self) -> f64 {
        self.device_bits().iter().sum()
    }
}

/// Runs one scheme. `seed` drives the random benchmark order.
pub fn run_scheme(scheme: Scheme, scenario: &Scenario, seed: u64) -> Result<Allocation> {
    Ok(match scheme {
        Scheme::Tdma => Allocation::Tdma(solve_tdma(scenario, None)?),
        Scheme::TdmaExhaustive => {
            Allocation::Tdma(exhaustive_sequence_search(scenario, SWEEP_MAX_EXHAUSTIVE)?.1)
        }
        Scheme::TdmaRandom => {
            let seq = benchmark_sequence(scenario, BenchmarkOrder::Random { seed: mix(seed ^ 1) });
            Allocation::Tdma(solve_tdma(scenario, Some(&seq))?)
        }
        Scheme::TdmaAscS => {
            let seq = benchmark_sequence(scenario, BenchmarkOrder::AscendingSensing);
            Allocation::Tdma(solve_tdma(scenario, Some(&seq))?)
        }
        Scheme::TdmaDescR => {
            let seq = benchmark_sequence(scenario, BenchmarkOrder::DescendingRate);
            Allocation::Tdma(solve_tdma(scenario, Some(&seq))?)
        }
        Scheme::TdmaAsync => Allocation::TdmaAsync(solve_async(scenario, None)?),
        Scheme::NomaFixed => Allocation::Noma(solve_noma(scenario)?),
        Scheme::NomaTimesharing => Allocation::TimeSharing(solve_timesharing(scenario, None)?),
        Scheme::Fdma => Allocation::Fdma(solve_fdma(scenario)?),
    })
}

fn run_trial(config: &ExperimentConfig, sweep_value: f64, trial: usize) -> Vec<ExperimentRow> {
    let (scenario, seed) = match config.scenario_for(sweep_value, trial) {
        Ok(s) => s,
        Err(e) => {
            warn!("scenario for {sweep_value} trial {trial} failed: {e}");
            return config
                .schemes
                .iter()
                .map(|&scheme| failed_row(scheme, sweep_value, trial, 0, 0.0))
                .collect();
        }
    };
    let mut rows = Vec::with_capacity(config.schemes.len());
    for &scheme in &config.schemes {
        if scheme == Scheme::TdmaExhaustive && scenario.len() > SWEEP_MAX_EXHAUSTIVE {
            continue;
        }
        let start = Instant::now();
        let outcome = run_scheme(scheme, &scenario, seed);
        let runtime_ms = if config.timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        rows.push(match outcome {
            Ok(a) => {
                let bits = a.device_bits();
                ExperimentRow {
                    scheme,
                    sweep_value,
                    trial,
                    sum_throughput_bits: bits.iter().sum(),
                    jfi: jain_index(&bits),
                    runtime_ms,
                    seed_used: seed,
                    failed: false,
                }
            }
            Err(e) => {
                warn!("{scheme} failed at {sweep_value} trial {trial} (seed {seed}): {e}");
                failed_row(scheme, sweep_value, trial, seed, runtime_ms)
            }
        });
    }
    rows
}

fn failed_row(scheme: Scheme, sweep_value: f64, trial: usize, seed: u64, runtime_ms: f64) -> ExperimentRow {
    ExperimentRow {
        scheme,
        sweep_value,
        trial,
        sum_throughput_bits: 0.0,
        jfi: None,
        runtime_ms,
        seed_used: seed,
        failed: true,
    }
}

/// Every scheme on every trial of every sweep value, sorted by
/// `(scheme, sweep_value, trial)`. Solver failures become flagged rows.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    config.validate()?;
    if let Sweep::DeviceCount(v) = &config.sweep {
        if config.schemes.contains(&Scheme::TdmaExhaustive) && v.iter().any(|&n| n > SWEEP_MAX_EXHAUSTIVE) {
            info!("tdma_exhaustive skipped for N > {SWEEP_MAX_EXHAUSTIVE}");
        }
    }
    let jobs: Vec<(f64, usize)> = config
        .sweep
        .values()
        .into_iter()
        .flat_map(|v| (0..config.trials).map(move |t| (v, t)))
        .collect();
    let mut rows: Vec<ExperimentRow> = jobs
        .into_par_iter()
        .flat_map_iter(|(v, t)| run_trial(config, v, t))
        .collect();
    sort_rows(&mut rows);
    Ok(rows)
}

fn sort_rows(rows: &mut [ExperimentRow]) {
    rows.sort_by(|a, b| {
        a.scheme
            .cmp(&b.scheme)
            .then(a.sweep_value.total_cmp(&b.sweep_value))
            .then(a.trial.cmp(&b.trial))
    });
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub scheme: Scheme,
    pub sweep_value: f64,
    /// `None` when every row in the cell failed.
    pub mean_throughput: Option<f64>,
    pub mean_jfi: Option<f64>,
    pub rows: usize,
    pub failures: usize,
}

/// Mean throughput and JFI per `(scheme, sweep_value)`, excluding failed
/// rows. Rows are ordered by trial before summing, so the result does not
/// depend on the input order.
pub fn summarize(rows: &[ExperimentRow]) -> Result<Vec<SummaryCell>> {
    if rows.is_empty() {
        return Err(param("nothing to summarize"));
    }
    let mut cells: BTreeMap<(Scheme, u64), Vec<&ExperimentRow>> = BTreeMap::new();
    for r in rows {
        cells.entry((r.scheme, ordered_bits(r.sweep_value))).or_default().push(r);
    }
    Ok(cells
        .into_values()
        .map(|mut cell| {
            cell.sort_by(|a, b| a.trial.cmp(&b.trial).then(a.seed_used.cmp(&b.seed_used)));
            let ok: Vec<&&ExperimentRow> = cell.iter().filter(|r| !r.failed).collect();
            let mean = |vals: Vec<f64>| (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
            SummaryCell {
                scheme: cell[0].scheme,
                sweep_value: cell[0].sweep_value,
                mean_throughput: mean(ok.iter().map(|r| r.sum_throughput_bits).collect()),
                mean_jfi: mean(ok.iter().filter_map(|r| r.jfi).collect()),
                rows: cell.len(),
                failures: cell.len() - ok.len(),
            }
        })
        .collect())
}

/// Maps an `f64` to a `u64` with the same ordering.
fn ordered_bits(v: f64) -> u64 {
    let b = v.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    scheme: Scheme,
    sweep_value: f64,
    trial: usize,
    sum_throughput_bits: f64,
    jfi: Option<f64>,
    runtime_ms: f64,
    seed_used: u64,
    failed: bool,
}

pub fn write_csv<W: Write>(rows: &[ExperimentRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(CsvRow {
            scheme: r.scheme,
            sweep_value: r.sweep_value,
            trial: r.trial,
            sum_throughput_bits: r.sum_throughput_bits,
            jfi: r.jfi,
            runtime_ms: r.runtime_ms,
            seed_used: r.seed_used,
            failed: r.failed,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ExperimentRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    rdr.deserialize::<CsvRow>()
        .map(|r| {
            let r = r?;
            Ok(ExperimentRow {
                scheme: r.scheme,
                sweep_value: r.sweep_value,
                trial: r.trial,
                sum_throughput_bits: r.sum_throughput_bits,
                jfi: r.jfi,
                runtime_ms: r.runtime_ms,
                seed_used: r.seed_used,
                failed: r.failed,
            })
        })
        .collect()
}

/// Scenario plus one allocation (or error message) per scheme.
#[derive(Clone, Debug, Serialize)]
pub struct SingleReport {
    pub scenario: Scenario,
    pub allocations: BTreeMap<String, serde_json::Value>,
}

pub fn solve_single(scenario: &Scenario, schemes: &[Scheme], seed: u64) -> Result<SingleReport> {
    scenario.validate()?;
    let mut allocations = BTreeMap::new();
    for &scheme in schemes {
        let value = match run_scheme(scheme, scenario, seed) {
            Ok(a) => serde_json::to_value(&a)?,
            Err(e) => serde_json::json!({ "error": e.to_string() }),
        };
        allocations.insert(scheme.name().to_string(), value);
    }
    Ok(SingleReport {
        scenario: scenario.clone(),
        allocations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(sweep: Sweep, schemes: Vec<Scheme>) -> ExperimentConfig {
        ExperimentConfig {
            trials: 3,
            seed: 11,
            sweep,
            schemes,
            timing: false,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn jain_examples() {
        assert_eq!(jain_index(&[2.0, 2.0, 2.0]), Some(1.0));
        assert!((jain_index(&[0.0, 5.0, 0.0, 0.0]).unwrap() - 0.25).abs() < 1e-15);
        assert!((jain_index(&[1.0, 3.0]).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(jain_index(&[0.0, 0.0]), None);
        assert_eq!(jain_index(&[]), None);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
        assert!("tdmaa".parse::<Scheme>().is_err());
        assert_eq!(parse_schemes("tdma, fdma").unwrap(), vec![Scheme::Tdma, Scheme::Fdma]);
    }

    #[test]
    fn validation() {
        assert!(small(Sweep::default_device_counts(), vec![Scheme::Tdma]).validate().is_ok());
        let mut c = small(Sweep::default_device_counts(), vec![Scheme::NomaTimesharing]);
        assert!(c.validate().is_err());
        c.equal_sensing = Some(5e5);
        assert!(c.validate().is_ok());
        assert!(small(Sweep::DeviceCount(vec![]), vec![Scheme::Tdma]).validate().is_err());
        assert!(small(Sweep::DeviceCount(vec![2]), vec![]).validate().is_err());
        let mut c = small(Sweep::DeviceCount(vec![2]), vec![Scheme::Tdma]);
        c.trials = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let mut c = small(Sweep::default_capacity(), vec![Scheme::Tdma, Scheme::Fdma]);
        c.equal_sensing = Some(5e5);
        assert_eq!(ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap(), c);
        // Missing fields take defaults.
        let c = ExperimentConfig::from_json(r#"{"trials": 7}"#).unwrap();
        assert_eq!(c.trials, 7);
        assert_eq!(c.sweep, Sweep::default_device_counts());
    }

    #[test]
    fn sweep_rows_are_sorted_and_complete() {
        let c = small(Sweep::DeviceCount(vec![3, 2]), vec![Scheme::NomaFixed, Scheme::Tdma]);
        let rows = run_sweep(&c).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 3);
        assert_eq!(rows[0].scheme, Scheme::Tdma);
        assert_eq!(rows[0].sweep_value, 2.0);
        assert!(rows.iter().all(|r| !r.failed));
    }

    #[test]
    fn exhaustive_matches_ascending_order_with_equal_sensing() {
        let mut c = small(Sweep::DeviceCount(vec![4, 6]), vec![Scheme::Tdma, Scheme::TdmaExhaustive]);
        c.equal_sensing = Some(5e5);
        let rows = run_sweep(&c).unwrap();
        let (a, b) = rows.split_at(rows.len() / 2);
        for (x, y) in a.iter().zip(b) {
            assert_eq!((x.sweep_value, x.trial), (y.sweep_value, y.trial));
            let rel = (x.sum_throughput_bits - y.sum_throughput_bits).abs() / y.sum_throughput_bits;
            assert!(rel <= 1e-12);
        }
    }

    #[test]
    fn exhaustive_is_skipped_for_large_n() {
        let c = small(Sweep::DeviceCount(vec![SWEEP_MAX_EXHAUSTIVE + 1]), vec![Scheme::TdmaExhaustive, Scheme::Tdma]);
        let rows = run_sweep(&c).unwrap();
        assert!(rows.iter().all(|r| r.scheme == Scheme::Tdma));
    }

    #[test]
    fn timesharing_rows_dominate_fixed_rows() {
        let mut c = small(Sweep::DeviceCount(vec![4, 8]), vec![Scheme::NomaFixed, Scheme::NomaTimesharing]);
        c.equal_sensing = Some(5e5);
        let rows = run_sweep(&c).unwrap();
        let (fixed, shared) = rows.split_at(rows.len() / 2);
        for (f, s) in fixed.iter().zip(shared) {
            assert!(s.sum_throughput_bits >= f.sum_throughput_bits * (1.0 - 1e-9));
        }
    }

    #[test]
    fn csv_is_reproducible() {
        let c = small(Sweep::SensingMax(vec![3e5, 8e5]), vec![Scheme::Tdma, Scheme::Fdma]);
        let render = || {
            let mut buf = Vec::new();
            write_csv(&run_sweep(&c).unwrap(), &mut buf).unwrap();
            buf
        };
        let a = render();
        assert_eq!(a, render());
        let text = String::from_utf8(a.clone()).unwrap();
        assert!(text.starts_with("scheme,sweep_value,trial,sum_throughput_bits,jfi,runtime_ms,seed_used,failed\n"));
        let back = read_csv(a.as_slice()).unwrap();
        assert_eq!(back, run_sweep(&c).unwrap());
    }

    #[test]
    fn capacity_sweep_sets_capacity() {
        let c = small(Sweep::Capacity(vec![2e7]), vec![Scheme::Tdma]);
        let (sc, _) = c.scenario_for(2e7, 0).unwrap();
        assert_eq!(sc.system.edge_capacity, 2e7);
        assert_eq!(sc.len(), c.devices);
        let (other, _) = c.scenario_for(5e6, 0).unwrap();
        assert_eq!(other.devices, sc.devices);
    }

    fn row(value: f64, trial: usize, bits: f64, failed: bool) -> ExperimentRow {
        ExperimentRow {
            scheme: Scheme::Tdma,
            sweep_value: value,
            trial,
            sum_throughput_bits: bits,
            jfi: Some(bits / 10.0),
            runtime_ms: 0.0,
            seed_used: 0,
            failed,
        }
    }

    #[test]
    fn summary_means_and_failures() {
        let s = summarize(&[row(1.0, 0, 1.0, false)]).unwrap();
        assert_eq!(s[0].mean_throughput, Some(1.0));
        let s = summarize(&[row(1.0, 0, 1.0, false), row(1.0, 1, 3.0, false), row(1.0, 2, 0.0, true)]).unwrap();
        assert_eq!(s[0].mean_throughput, Some(2.0));
        assert_eq!((s[0].rows, s[0].failures), (3, 1));
        let s = summarize(&[row(1.0, 0, 0.0, true)]).unwrap();
        assert_eq!(s[0].mean_throughput, None);
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn summary_ignores_row_order() {
        let c = small(Sweep::DeviceCount(vec![2, 5]), vec![Scheme::Tdma, Scheme::NomaFixed]);
        let rows = run_sweep(&c).unwrap();
        let mut shuffled = rows.clone();
        shuffled.reverse();
        shuffled.swap(0, 3);
        assert_eq!(summarize(&rows).unwrap(), summarize(&shuffled).unwrap());
    }

    #[test]
    fn single_report_has_every_scheme() {
        let sc = generate_scenario(SystemParams::default(), 3, (1e5, 1e6), 4).unwrap();
        let r = solve_single(&sc, &[Scheme::Tdma, Scheme::NomaTimesharing, Scheme::Fdma], 0).unwrap();
        assert_eq!(r.allocations.len(), 3);
        assert!(r.allocations["noma_timesharing"].get("error").is_some());
        assert_eq!(r.allocations["tdma"]["type"], "tdma");
    }
}
