//! Requirements-driven verification flow for a configurable memory IP.

pub mod configspec;
pub mod dut;
pub mod flow;
pub mod regression;
pub mod report;
pub mod rmt;
pub mod vplan;
pub mod xml;

pub use configspec::{IpConfiguration, Predicate};
pub use dut::{EccScheme, MemoryModel};
pub use flow::{cmd_flow, cmd_sweep, FlowOptions, FlowOutcome};
pub use regression::{SessionResult, TestDescriptor};
pub use report::RmtReport;
pub use rmt::{RmtItem, SharedStore, Store, SubsetReport};
pub use vplan::{PlanItem, VPlan};

/// FNV-1a 64 over `bytes`.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    use std::hash::Hasher;
    let mut h = fnv::FnvHasher::default();
    h.write(bytes);
    h.finish()
}
