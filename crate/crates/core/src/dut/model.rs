use std::collections::BTreeSet;
use std::sync::Arc;

use thiserror::Error;

use super::ecc::{shared_scheme, EccError, EccScheme, EccStatus};
use crate::configspec::{BugMutation, Burst, IpConfiguration, LpMode};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Ecc(#[from] EccError),
    #[error("power mode {0} is not configured")]
    ModeNotConfigured(&'static str),
    #[error("address {addr} outside 0..{words}")]
    OutOfRange { addr: u32, words: u32 },
    #[error("flip mask {mask:#x} wider than {n} bits")]
    MaskTooWide { mask: u64, n: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PowerMode {
    Active,
    Retention,
    Shutdown,
}

impl PowerMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PowerMode::Active => "active",
            PowerMode::Retention => "retention",
            PowerMode::Shutdown => "shutdown",
        }
    }

    fn lp(self) -> Option<LpMode> {
        match self {
            PowerMode::Active => None,
            PowerMode::Retention => Some(LpMode::Retention),
            PowerMode::Shutdown => Some(LpMode::Shutdown),
        }
    }
}

impl From<LpMode> for PowerMode {
    fn from(m: LpMode) -> Self {
        match m {
            LpMode::Retention => PowerMode::Retention,
            LpMode::Shutdown => PowerMode::Shutdown,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Op {
    Read,
    Write,
    Idle,
}

impl Op {
    pub const ALL: [Op; 3] = [Op::Read, Op::Write, Op::Idle];

    pub fn as_str(self) -> &'static str {
        match self {
            Op::Read => "read",
            Op::Write => "write",
            Op::Idle => "idle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub op: Op,
    pub addr: u32,
    /// One value per beat for writes; ignored otherwise.
    pub data: Vec<u32>,
    pub burst: Burst,
}

impl Transaction {
    pub fn read(addr: u32, burst: Burst) -> Self {
        Transaction {
            op: Op::Read,
            addr,
            data: Vec::new(),
            burst,
        }
    }

    pub fn write(addr: u32, burst: Burst, data: Vec<u32>) -> Self {
        Transaction {
            op: Op::Write,
            addr,
            data,
            burst,
        }
    }

    pub fn idle() -> Self {
        Transaction {
            op: Op::Idle,
            addr: 0,
            data: Vec::new(),
            burst: Burst::Single,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RespStatus {
    Okay,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BusResponse {
    pub status: RespStatus,
    pub data: Vec<u32>,
    pub ecc_flags: Vec<EccStatus>,
    pub latency: u32,
}

impl BusResponse {
    pub const ERROR_LATENCY: u32 = 1;

    fn error() -> Self {
        BusResponse {
            status: RespStatus::Error,
            data: Vec::new(),
            ecc_flags: Vec::new(),
            latency: Self::ERROR_LATENCY,
        }
    }

    fn okay(latency: u32) -> Self {
        BusResponse {
            status: RespStatus::Okay,
            data: Vec::new(),
            ecc_flags: Vec::new(),
            latency,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub reads: u64,
    pub writes: u64,
    pub corrected: u64,
    pub detected: u64,
}

/// Transaction-level model of one configured memory subsystem instance.
#[derive(Debug, Clone)]
pub struct MemoryModel {
    config: IpConfiguration,
    scheme: Arc<EccScheme>,
    array: Vec<u64>,
    power_mode: PowerMode,
    /// `(read, write)` cycles per beat.
    latency: (u32, u32),
    counters: Counters,
    transitions: Vec<(PowerMode, PowerMode)>,
}

/// Codeword written over every word on entry to shutdown.
pub fn invalidation_pattern(scheme: &EccScheme) -> u64 {
    scheme.codeword_mask()
}

impl MemoryModel {
    pub fn new(config: &IpConfiguration) -> Result<Self, ModelError> {
        let clean = shared_scheme(config.ecc, config.data_width)?;
        let scheme = if config.bug_mutations.contains(&BugMutation::SyndromeSwap)
            && clean.capability().0 > 0
        {
            Arc::new(clean.with_swapped_syndromes(0, 1))
        } else {
            clean
        };
        Ok(MemoryModel {
            config: config.clone(),
            scheme,
            array: vec![0; config.addr_words as usize],
            power_mode: PowerMode::Active,
            latency: config.tech.latency(),
            counters: Counters::default(),
            transitions: Vec::new(),
        })
    }

    pub fn config(&self) -> &IpConfiguration {
        &self.config
    }

    /// The scheme the model decodes with (mutated if syndrome_swap is on).
    pub fn scheme(&self) -> &EccScheme {
        &self.scheme
    }

    pub fn power_mode(&self) -> PowerMode {
        self.power_mode
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn transitions(&self) -> &[(PowerMode, PowerMode)] {
        &self.transitions
    }

    pub fn array(&self) -> &[u64] {
        &self.array
    }

    pub fn mutations(&self) -> &BTreeSet<BugMutation> {
        &self.config.bug_mutations
    }

    fn beat_addr(&self, txn: &Transaction, beat: u32) -> usize {
        let wraps = txn.burst != Burst::Single
            && self.config.bug_mutations.contains(&BugMutation::BurstWrap);
        if wraps {
            ((txn.addr & !7) | (txn.addr.wrapping_add(beat) & 7)) as usize
        } else {
            (txn.addr + beat) as usize
        }
    }

    pub fn exec_transaction(&mut self, txn: &Transaction) -> BusResponse {
        if txn.op == Op::Idle {
            return BusResponse::okay(0);
        }
        if !self.config.ahb_bursts.contains(&txn.burst) {
            return BusResponse::error();
        }
        let beats = txn.burst.beats();
        if u64::from(txn.addr) + u64::from(beats) > u64::from(self.config.addr_words) {
            return BusResponse::error();
        }
        if self.power_mode != PowerMode::Active {
            return BusResponse::error();
        }
        match txn.op {
            Op::Write => {
                if txn.data.len() != beats as usize {
                    return BusResponse::error();
                }
                for beat in 0..beats {
                    let a = self.beat_addr(txn, beat);
                    self.array[a] = self.scheme.encode(txn.data[beat as usize]);
                }
                self.counters.writes += u64::from(beats);
                BusResponse::okay(beats * self.latency.1)
            }
            Op::Read => {
                let mut resp = BusResponse::okay(beats * self.latency.0);
                for beat in 0..beats {
                    let a = self.beat_addr(txn, beat);
                    let decoded = self.scheme.decode(self.array[a]);
                    match decoded.status {
                        EccStatus::Ok => {}
                        EccStatus::Corrected => self.counters.corrected += 1,
                        EccStatus::DetectedUncorrectable => self.counters.detected += 1,
                    }
                    resp.data.push(decoded.data);
                    resp.ecc_flags.push(decoded.status);
                }
                self.counters.reads += u64::from(beats);
                resp
            }
            Op::Idle => unreachable!(),
        }
    }

    pub fn set_power_mode(&mut self, mode: PowerMode) -> Result<(), ModelError> {
        if let Some(lp) = mode.lp() {
            if !self.config.lp_modes.contains(&lp) {
                return Err(ModelError::ModeNotConfigured(mode.as_str()));
            }
        }
        let from = self.power_mode;
        if from == mode {
            return Ok(());
        }
        if from == PowerMode::Retention
            && self.config.bug_mutations.contains(&BugMutation::RetentionLoss)
        {
            self.array[0] ^= 1;
        }
        if mode == PowerMode::Shutdown {
            let fill = invalidation_pattern(&self.scheme);
            self.array.iter_mut().for_each(|w| *w = fill);
        }
        self.power_mode = mode;
        self.transitions.push((from, mode));
        Ok(())
    }

    pub fn inject_fault(&mut self, addr: u32, flip_mask: u64) -> Result<(), ModelError> {
        if addr >= self.config.addr_words {
            return Err(ModelError::OutOfRange {
                addr,
                words: self.config.addr_words,
            });
        }
        if flip_mask & !self.scheme.codeword_mask() != 0 {
            return Err(ModelError::MaskTooWide {
                mask: flip_mask,
                n: self.scheme.n(),
            });
        }
        self.array[addr as usize] ^= flip_mask;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspec::parse_config;
    use crate::dut::ecc::build_ecc;
    use crate::configspec::EccLevel;

    fn model(extra: &str) -> MemoryModel {
        let text = format!(
            "ip_name=t\ndata_width=8\naddr_words=32\necc=secded\ntech=rram\n\
             lp_modes=retention,shutdown\nahb_bursts=single,incr4,incr8\n{extra}"
        );
        MemoryModel::new(&parse_config(&text).unwrap()).unwrap()
    }

    fn single_write(m: &mut MemoryModel, addr: u32, v: u32) -> BusResponse {
        m.exec_transaction(&Transaction::write(addr, Burst::Single, vec![v]))
    }

    #[test]
    fn write_then_read_round_trips() {
        let mut m = model("");
        let w = single_write(&mut m, 5, 0xa5);
        assert_eq!(w.status, RespStatus::Okay);
        assert_eq!(w.latency, 5);
        let r = m.exec_transaction(&Transaction::read(5, Burst::Single));
        assert_eq!(r.status, RespStatus::Okay);
        assert_eq!(r.data, vec![0xa5]);
        assert_eq!(r.ecc_flags, vec![EccStatus::Ok]);
        assert_eq!(r.latency, 3);
    }

    #[test]
    fn idle_is_zero_beat_okay() {
        let mut m = model("");
        let r = m.exec_transaction(&Transaction::idle());
        assert_eq!((r.status, r.data.len(), r.latency), (RespStatus::Okay, 0, 0));
    }

    #[test]
    fn range_errors_leave_array_untouched() {
        let mut m = model("");
        let r = m.exec_transaction(&Transaction::read(32, Burst::Single));
        assert_eq!(r.status, RespStatus::Error);
        assert!(r.data.is_empty());
        let before = m.array().to_vec();
        let r = m.exec_transaction(&Transaction::write(30, Burst::Incr4, vec![1, 2, 3, 4]));
        assert_eq!(r.status, RespStatus::Error);
        assert_eq!(m.array(), &before[..]);
        assert_eq!(m.counters(), Counters::default());
    }

    #[test]
    fn unconfigured_burst_is_a_decode_error() {
        let text = "ip_name=t\ndata_width=8\naddr_words=32\necc=none\ntech=sram_hs";
        let mut m = MemoryModel::new(&parse_config(text).unwrap()).unwrap();
        let r = m.exec_transaction(&Transaction::write(0, Burst::Incr4, vec![1, 2, 3, 4]));
        assert_eq!(r.status, RespStatus::Error);
        assert!(m.array().iter().all(|&w| w == 0));
    }

    #[test]
    fn retention_preserves_contents() {
        let mut m = model("");
        single_write(&mut m, 3, 0x3c);
        m.set_power_mode(PowerMode::Retention).unwrap();
        assert_eq!(
            m.exec_transaction(&Transaction::read(3, Burst::Single)).status,
            RespStatus::Error
        );
        assert_eq!(single_write(&mut m, 3, 0).status, RespStatus::Error);
        m.set_power_mode(PowerMode::Active).unwrap();
        let r = m.exec_transaction(&Transaction::read(3, Burst::Single));
        assert_eq!((r.data[0], r.ecc_flags[0]), (0x3c, EccStatus::Ok));
    }

    #[test]
    fn shutdown_invalidates_to_all_ones() {
        let mut m = model("");
        single_write(&mut m, 3, 0x3c);
        m.set_power_mode(PowerMode::Shutdown).unwrap();
        m.set_power_mode(PowerMode::Active).unwrap();
        let r = m.exec_transaction(&Transaction::read(3, Burst::Single));
        // textbook Hamming(13,8): syndrome of all ones is position 12 with odd
        // overall parity, a data bit, so the word is "corrected" to 0x7f
        let oracle = build_ecc(EccLevel::Secded, 8).unwrap().decode(0x1fff);
        assert_eq!((oracle.status, oracle.data), (EccStatus::Corrected, 0x7f));
        assert_eq!((r.ecc_flags[0], r.data[0]), (oracle.status, oracle.data));
        assert_eq!(m.transitions().len(), 2);
    }

    #[test]
    fn unconfigured_mode_rejected() {
        let text = "ip_name=t\ndata_width=8\naddr_words=32\necc=none\ntech=sram_hs\nlp_modes=retention";
        let mut m = MemoryModel::new(&parse_config(text).unwrap()).unwrap();
        assert_eq!(
            m.set_power_mode(PowerMode::Shutdown),
            Err(ModelError::ModeNotConfigured("shutdown"))
        );
        assert_eq!(m.power_mode(), PowerMode::Active);
        assert!(m.transitions().is_empty());
    }

    #[test]
    fn fault_injection() {
        let mut m = model("");
        single_write(&mut m, 7, 0x81);
        let before = m.array()[7];
        m.inject_fault(7, 0).unwrap();
        assert_eq!(m.array()[7], before);
        m.inject_fault(7, 1 << 4).unwrap();
        let r = m.exec_transaction(&Transaction::read(7, Burst::Single));
        assert_eq!((r.data[0], r.ecc_flags[0]), (0x81, EccStatus::Corrected));
        assert_eq!(m.counters().corrected, 1);
        assert!(m.inject_fault(32, 1).is_err());
        assert!(m.inject_fault(0, 1 << 13).is_err());
    }

    #[test]
    fn dected_weight3_detected() {
        let text = "ip_name=t\ndata_width=8\naddr_words=16\necc=dected\ntech=sram_hd";
        let mut m = MemoryModel::new(&parse_config(text).unwrap()).unwrap();
        single_write(&mut m, 0, 0x42);
        m.inject_fault(0, 0b1_0000_0001_0001).unwrap();
        let r = m.exec_transaction(&Transaction::read(0, Burst::Single));
        assert_eq!(r.ecc_flags[0], EccStatus::DetectedUncorrectable);
    }

    #[test]
    fn burst_wrap_mutation_folds_addresses() {
        let mut m = model("[debug]\nbug_mutations=burst_wrap");
        m.exec_transaction(&Transaction::write(6, Burst::Incr4, vec![1, 2, 3, 4]));
        let r = m.exec_transaction(&Transaction::read(0, Burst::Single));
        assert_eq!(r.data, vec![3]);
        let clean_read = m.exec_transaction(&Transaction::read(8, Burst::Single));
        assert_eq!(clean_read.data, vec![0]);
    }

    #[test]
    fn retention_loss_mutation_flips_word_zero() {
        let mut m = model("[debug]\nbug_mutations=retention_loss");
        single_write(&mut m, 0, 0x10);
        m.set_power_mode(PowerMode::Retention).unwrap();
        m.set_power_mode(PowerMode::Active).unwrap();
        let r = m.exec_transaction(&Transaction::read(0, Burst::Single));
        assert_eq!(r.ecc_flags[0], EccStatus::Corrected);
    }

    #[test]
    fn read_counter_counts_okay_beats() {
        let mut m = model("");
        m.exec_transaction(&Transaction::read(0, Burst::Incr8));
        m.exec_transaction(&Transaction::read(31, Burst::Incr4));
        m.exec_transaction(&Transaction::read(31, Burst::Single));
        assert_eq!(m.counters().reads, 9);
    }
}
