//! Sensing and offloading allocation for edge devices sharing one server.
//!
//! Devices sense data, upload it, and the server processes it inside a
//! fixed frame. The crate solves the resulting throughput problems under
//! several multiple-access schemes and compares them by simulation.

pub mod error;
pub mod fdma;
pub mod harness;
pub mod lp;
pub mod noma;
pub mod noma_timesharing;
pub mod scenario;
pub mod tdma;
pub mod tdma_async;

pub use error::{Error, Result};
pub use scenario::{generate_scenario, Device, Fading, Scenario, SystemParams};
pub use harness::{
    jain_index, run_sweep, summarize, ExperimentConfig, ExperimentRow, Scheme, SummaryCell, Sweep,
};
pub use noma::NomaAllocation;
pub use noma_timesharing::TimeSharingAllocation;
pub use tdma::{OffloadingSequence, TdmaAllocation};
pub use tdma_async::AsyncAllocation;
pub use fdma::FdmaAllocation;
