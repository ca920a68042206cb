//! Executable model of the configurable memory subsystem: bus decode,
//! EDC/ECC, array with technology latencies, low-power modes, fault
//! injection and seeded bug mutations.

pub mod ecc;
mod model;

pub use ecc::{
    build_ecc, check_capability, expected_status, shared_scheme, CapabilityReport, Decoded,
    EccError, EccScheme, EccStatus, Violation,
};
pub use model::{
    invalidation_pattern, BusResponse, Counters, MemoryModel, ModelError, Op, PowerMode,
    RespStatus, Transaction,
};
