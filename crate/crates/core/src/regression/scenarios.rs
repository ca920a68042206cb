use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Coverpoint, RegressionError, RunResult, Scenario, TestDescriptor};
use crate::configspec::{Burst, IpConfiguration};
use crate::dut::ecc::for_each_pattern;
use crate::dut::{
    expected_status, invalidation_pattern, shared_scheme, EccStatus, MemoryModel, Op, PowerMode,
    RespStatus, Transaction,
};
use crate::regression::result::{CheckResult, Verdict};

const MAX_DETAILS: usize = 32;
const RANDOM_RW_OPS: usize = 200;
const BURST_RW_ITERS: u32 = 16;
const POWER_CYCLES: usize = 8;
const FAULT_ITERS: u32 = 64;
const ECC_SAMPLES: usize = 64;

const ADDR_CLASSES: [&str; 5] = ["zero", "mid", "last_fit", "first_overflow", "end"];

fn addr_of_class(class: &str, words: u32, beats: u32) -> u32 {
    match class {
        "zero" => 0,
        "mid" => words / 2,
        "last_fit" => words - beats,
        "first_overflow" => words - beats + 1,
        _ => words,
    }
}

fn region(addr: u32, words: u32) -> &'static str {
    if addr < words / 4 {
        "low"
    } else if addr >= words - words / 4 {
        "high"
    } else {
        "mid"
    }
}

fn modes(cfg: &IpConfiguration) -> Vec<PowerMode> {
    std::iter::once(PowerMode::Active)
        .chain(cfg.lp_modes.iter().map(|&m| PowerMode::from(m)))
        .collect()
}

fn bins<S: ToString>(name: &str, bins: impl IntoIterator<Item = S>) -> Coverpoint {
    Coverpoint {
        name: name.to_string(),
        bins: bins.into_iter().map(|b| b.to_string()).collect(),
    }
}

fn weight_bins(range: std::ops::RangeInclusive<u32>) -> Vec<String> {
    range.map(|w| format!("w{w}")).collect()
}

fn sim_bursts(cfg: &IpConfiguration) -> Vec<Burst> {
    let multi: Vec<Burst> = cfg
        .ahb_bursts
        .iter()
        .copied()
        .filter(|b| *b != Burst::Single)
        .collect();
    if multi.is_empty() {
        vec![Burst::Single]
    } else {
        multi
    }
}

fn fault_weights(cfg: &IpConfiguration) -> u32 {
    cfg.ecc.capability().1.max(1)
}

/// Coverpoints a scenario declares under `cfg`.
pub(super) fn coverpoints(scenario: Scenario, cfg: &IpConfiguration) -> Vec<Coverpoint> {
    let (tc, td) = cfg.ecc.capability();
    let bursts = || cfg.ahb_bursts.iter().map(|b| b.as_str());
    let mode_names = || modes(cfg).into_iter().map(PowerMode::as_str);
    match scenario {
        Scenario::EccExhaustive => vec![bins("weight", weight_bins(0..=tc + td))],
        Scenario::BusDecodeExhaustive => vec![
            bins("op", Op::ALL.map(Op::as_str)),
            bins("burst", bursts()),
            bins("addr", ADDR_CLASSES),
            bins("mode", mode_names()),
        ],
        Scenario::RandomRw => vec![
            bins("op", Op::ALL.map(Op::as_str)),
            bins("burst", bursts()),
            bins("region", ["low", "mid", "high"]),
        ],
        Scenario::BurstRw => {
            let b = sim_bursts(cfg);
            let boundary: &[&str] = if b.iter().any(|b| b.beats() > 1) {
                &["aligned", "crossing"]
            } else {
                &["aligned"]
            };
            vec![bins("burst", b.iter().map(|b| b.as_str())), bins("boundary", boundary)]
        }
        Scenario::PowerCycle => {
            let lp: Vec<&str> = cfg.lp_modes.iter().map(|m| m.as_str()).collect();
            let mut points = vec![bins("mode", mode_names())];
            if !lp.is_empty() {
                points.push(bins(
                    "transition",
                    lp.iter()
                        .flat_map(|m| [format!("active_{m}"), format!("{m}_active")]),
                ));
            }
            points
        }
        Scenario::FaultSweep => vec![bins("weight", weight_bins(1..=fault_weights(cfg)))],
    }
}

struct Recorder<'a> {
    test: &'a str,
    checks: BTreeMap<String, bool>,
    hits: BTreeSet<String>,
    details: Vec<String>,
    dropped: usize,
}

impl<'a> Recorder<'a> {
    fn new(test: &'a str) -> Self {
        Recorder {
            test,
            checks: BTreeMap::new(),
            hits: BTreeSet::new(),
            details: Vec::new(),
            dropped: 0,
        }
    }

    fn declare(&mut self, check: &str) {
        self.checks.entry(check.to_string()).or_insert(true);
    }

    fn check(&mut self, check: &str, ok: bool, detail: impl FnOnce() -> String) {
        let entry = self.checks.entry(check.to_string()).or_insert(true);
        if !ok {
            *entry = false;
            if self.details.len() < MAX_DETAILS {
                self.details.push(format!("{check}: {}", detail()));
            } else {
                self.dropped += 1;
            }
        }
    }

    fn hit(&mut self, point: &str, bin: &str) {
        self.hits.insert(format!("cov.{}.{point}.{bin}", self.test));
    }

    fn finish(mut self, index: u32, seed: Option<u64>) -> RunResult {
        if self.dropped > 0 {
            self.details.push(format!("... {} more mismatches", self.dropped));
        }
        let checks = self
            .checks
            .iter()
            .map(|(name, ok)| CheckResult {
                name: format!("chk.{}.{name}", self.test),
                verdict: Verdict::of(*ok),
            })
            .collect();
        RunResult::from_checks(self.test, index, seed, checks, self.hits, &self.details)
    }
}

/// Executes run `index` of `desc`. `seed` is `None` for exhaustive runs.
pub(super) fn execute(
    desc: &TestDescriptor,
    cfg: &IpConfiguration,
    index: u32,
    seed: Option<u64>,
) -> Result<RunResult, RegressionError> {
    let mut model = MemoryModel::new(cfg)?;
    let mut rec = Recorder::new(&desc.name);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
    match desc.scenario {
        Scenario::EccExhaustive => ecc_exhaustive(&mut model, &mut rec)?,
        Scenario::BusDecodeExhaustive => bus_decode_exhaustive(&mut model, &mut rec)?,
        Scenario::RandomRw => random_rw(&mut model, &mut rec, &mut rng),
        Scenario::BurstRw => burst_rw(&mut model, &mut rec, &mut rng),
        Scenario::PowerCycle => power_cycle(&mut model, &mut rec, &mut rng)?,
        Scenario::FaultSweep => fault_sweep(&mut model, &mut rec, &mut rng)?,
    }
    Ok(rec.finish(index, seed))
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Data values for the capability check: all of them at k=8, otherwise a
/// fixed sample that includes both extremes.
pub fn ecc_data_samples(k: u32, count: usize, stream: u64) -> Vec<u32> {
    let mask = if k == 32 { u32::MAX } else { (1 << k) - 1 };
    if k == 8 {
        return (0..=mask).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    let mut out = vec![0, mask];
    while out.len() < count {
        out.push(rng.random::<u32>() & mask);
    }
    out
}

fn ecc_exhaustive(model: &mut MemoryModel, rec: &mut Recorder<'_>) -> Result<(), RegressionError> {
    let cfg = model.config().clone();
    let clean = shared_scheme(cfg.ecc, cfg.data_width)?;
    let cap = clean.capability();
    let max_w = cap.0 + cap.1;
    let n = clean.n();
    let data = ecc_data_samples(cfg.data_width, ECC_SAMPLES, crate::fnv1a64(b"ecc_exhaustive"));
    for w in 0..=max_w {
        rec.declare(&format!("w{w}"));
    }
    let mut cases = 0u64;
    let mut bad_writes = 0u64;
    for &d in &data {
        if model.exec_transaction(&Transaction::write(0, Burst::Single, vec![d])).status != RespStatus::Okay {
            bad_writes += 1;
            continue;
        }
        for w in 0..=max_w {
            let expect = expected_status(cap, w);
            let check = format!("w{w}");
            for_each_pattern(n, w, |e| {
                cases += 1;
                model.inject_fault(0, e).expect("address 0 and n-bit mask are valid");
                let r = model.exec_transaction(&Transaction::read(0, Burst::Single));
                model.inject_fault(0, e).expect("restore");
                let Some(exp) = expect else { return };
                let (flag, got) = (r.ecc_flags.first().copied(), r.data.first().copied());
                let ok = r.status == RespStatus::Okay
                    && flag == Some(exp)
                    && (exp == EccStatus::DetectedUncorrectable || got == Some(d));
                rec.check(&check, ok, || {
                    format!(
                        "syndrome {:#x} (pattern {e:#x}, data {d:#x}): expected {} with data {d:#x}, got {} with data {}",
                        clean.syndrome(e),
                        exp.as_str(),
                        flag.map_or("error response", EccStatus::as_str),
                        got.map_or("-".to_string(), |g| format!("{g:#x}")),
                    )
                });
            });
        }
    }
    for w in 0..=max_w {
        rec.hit("weight", &format!("w{w}"));
    }
    let analytic: u64 =
        data.len() as u64 * (0..=max_w).map(|w| binomial(n as u64, w as u64)).sum::<u64>();
    rec.check("case_count", cases == analytic && bad_writes == 0, || {
        format!("enumerated {cases} cases, expected {analytic}; {bad_writes} setup writes failed")
    });
    Ok(())
}

fn bus_decode_exhaustive(model: &mut MemoryModel, rec: &mut Recorder<'_>) -> Result<(), RegressionError> {
    let cfg = model.config().clone();
    let (rl, wl) = cfg.tech.latency();
    let words = cfg.addr_words;
    let modes = modes(&cfg);
    let mut cases = 0u64;
    for &mode in &modes {
        model.set_power_mode(PowerMode::Active)?;
        model.set_power_mode(mode)?;
        for op in Op::ALL {
            for &burst in &cfg.ahb_bursts {
                let beats = burst.beats();
                for class in ADDR_CLASSES {
                    cases += 1;
                    let addr = addr_of_class(class, words, beats);
                    let txn = match op {
                        Op::Read => Transaction::read(addr, burst),
                        Op::Write => Transaction::write(addr, burst, vec![0x5a & cfg_mask(&cfg); beats as usize]),
                        Op::Idle => Transaction::idle(),
                    };
                    let resp = model.exec_transaction(&txn);
                    let in_range = u64::from(addr) + u64::from(beats) <= u64::from(words);
                    let (status, latency, data_beats) = match op {
                        Op::Idle => (RespStatus::Okay, 0, 0),
                        _ if mode != PowerMode::Active || !in_range => (RespStatus::Error, 1, 0),
                        Op::Read => (RespStatus::Okay, beats * rl, beats as usize),
                        Op::Write => (RespStatus::Okay, beats * wl, 0),
                    };
                    let case = || {
                        format!(
                            "{} {} addr {addr} ({class}) in {}",
                            op.as_str(),
                            burst.as_str(),
                            mode.as_str()
                        )
                    };
                    rec.check("response", resp.status == status, || {
                        format!("{}: expected {status:?}, got {:?}", case(), resp.status)
                    });
                    rec.check("latency", resp.latency == latency, || {
                        format!("{}: expected latency {latency}, got {}", case(), resp.latency)
                    });
                    rec.check(
                        "read_beats",
                        resp.data.len() == data_beats && resp.ecc_flags.len() == data_beats,
                        || format!("{}: expected {data_beats} beats, got {}", case(), resp.data.len()),
                    );
                    rec.hit("op", op.as_str());
                    rec.hit("burst", burst.as_str());
                    rec.hit("addr", class);
                    rec.hit("mode", mode.as_str());
                }
            }
        }
    }
    model.set_power_mode(PowerMode::Active)?;
    let analytic = (Op::ALL.len() * cfg.ahb_bursts.len() * ADDR_CLASSES.len() * modes.len()) as u64;
    rec.check("case_count", cases == analytic, || {
        format!("enumerated {cases} cases, expected {analytic}")
    });
    Ok(())
}

fn cfg_mask(cfg: &IpConfiguration) -> u32 {
    if cfg.data_width == 32 {
        u32::MAX
    } else {
        (1 << cfg.data_width) - 1
    }
}

fn random_rw(model: &mut MemoryModel, rec: &mut Recorder<'_>, rng: &mut ChaCha8Rng) {
    let cfg = model.config().clone();
    let (rl, wl) = cfg.tech.latency();
    let words = cfg.addr_words;
    let mask = cfg_mask(&cfg);
    let bursts: Vec<Burst> = cfg.ahb_bursts.iter().copied().collect();
    let mut shadow = vec![0u32; words as usize];
    for check in ["resp_legal", "read_data", "ecc_flag"] {
        rec.declare(check);
    }
    for _ in 0..RANDOM_RW_OPS {
        let roll = rng.random_range(0..20);
        let op = match roll {
            0..=8 => Op::Read,
            9..=17 => Op::Write,
            _ => Op::Idle,
        };
        let burst = *bursts.choose(rng).expect("single is always configured");
        let beats = burst.beats();
        let addr = rng.random_range(0..=words - beats);
        rec.hit("op", op.as_str());
        match op {
            Op::Idle => {
                let r = model.exec_transaction(&Transaction::idle());
                rec.check("resp_legal", r.status == RespStatus::Okay && r.latency == 0, || {
                    format!("idle answered {:?} latency {}", r.status, r.latency)
                });
                continue;
            }
            Op::Write => {
                let data: Vec<u32> = (0..beats).map(|_| rng.random::<u32>() & mask).collect();
                let r = model.exec_transaction(&Transaction::write(addr, burst, data.clone()));
                rec.check("resp_legal", r.status == RespStatus::Okay && r.latency == beats * wl, || {
                    format!("write {} @{addr}: {:?} latency {}", burst.as_str(), r.status, r.latency)
                });
                for (i, d) in data.into_iter().enumerate() {
                    shadow[addr as usize + i] = d;
                }
            }
            Op::Read => {
                let r = model.exec_transaction(&Transaction::read(addr, burst));
                rec.check("resp_legal", r.status == RespStatus::Okay && r.latency == beats * rl, || {
                    format!("read {} @{addr}: {:?} latency {}", burst.as_str(), r.status, r.latency)
                });
                for i in 0..beats as usize {
                    let want = shadow[addr as usize + i];
                    let got = r.data.get(i).copied();
                    rec.check("read_data", got == Some(want), || {
                        format!("@{}: expected {want:#x}, got {got:?}", addr as usize + i)
                    });
                    let flag = r.ecc_flags.get(i).copied();
                    rec.check("ecc_flag", flag == Some(EccStatus::Ok), || {
                        format!("@{}: flag {flag:?} without injected fault", addr as usize + i)
                    });
                }
            }
        }
        rec.hit("burst", burst.as_str());
        rec.hit("region", region(addr, words));
    }
}

fn burst_rw(model: &mut MemoryModel, rec: &mut Recorder<'_>, rng: &mut ChaCha8Rng) {
    let cfg = model.config().clone();
    let (_, wl) = cfg.tech.latency();
    let words = cfg.addr_words;
    let mask = cfg_mask(&cfg);
    let bursts = sim_bursts(&cfg);
    for check in ["resp_legal", "single_readback", "burst_readback"] {
        rec.declare(check);
    }
    for i in 0..BURST_RW_ITERS {
        let burst = bursts[i as usize % bursts.len()];
        let beats = burst.beats();
        let crossing = i % 2 == 1 && beats > 1;
        let addr = if crossing {
            let base = 8 * rng.random_range(0..words / 8 - 1);
            base + rng.random_range(9 - beats..=7)
        } else {
            beats * rng.random_range(0..words / beats)
        };
        let data: Vec<u32> = (0..beats).map(|_| rng.random::<u32>() & mask).collect();
        let w = model.exec_transaction(&Transaction::write(addr, burst, data.clone()));
        rec.check("resp_legal", w.status == RespStatus::Okay && w.latency == beats * wl, || {
            format!("write {} @{addr}: {:?} latency {}", burst.as_str(), w.status, w.latency)
        });
        for (j, want) in data.iter().enumerate() {
            let a = addr + j as u32;
            let r = model.exec_transaction(&Transaction::read(a, Burst::Single));
            let got = r.data.first().copied();
            rec.check("single_readback", got == Some(*want), || {
                format!("{} @{addr} beat {j} (word {a}): expected {want:#x}, got {got:?}", burst.as_str())
            });
        }
        let r = model.exec_transaction(&Transaction::read(addr, burst));
        rec.check("burst_readback", r.data == data, || {
            format!("{} @{addr}: wrote {data:x?}, read {:x?}", burst.as_str(), r.data)
        });
        rec.hit("burst", burst.as_str());
        rec.hit("boundary", if crossing { "crossing" } else { "aligned" });
    }
}

fn power_cycle(
    model: &mut MemoryModel,
    rec: &mut Recorder<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<(), RegressionError> {
    let cfg = model.config().clone();
    let words = cfg.addr_words;
    let mask = cfg_mask(&cfg);
    let clean = shared_scheme(cfg.ecc, cfg.data_width)?;
    let after_shutdown = clean.decode(invalidation_pattern(&clean));
    let lp: Vec<PowerMode> = cfg.lp_modes.iter().map(|&m| PowerMode::from(m)).collect();

    rec.declare("unconfigured_rejected");
    for mode in [PowerMode::Retention, PowerMode::Shutdown] {
        if !lp.contains(&mode) {
            let rejected = model.set_power_mode(mode).is_err();
            rec.check("unconfigured_rejected", rejected, || {
                format!("{} accepted although not configured", mode.as_str())
            });
            model.set_power_mode(PowerMode::Active)?;
        }
    }
    rec.hit("mode", "active");
    if lp.is_empty() {
        return Ok(());
    }
    rec.declare("lowpower_blocked");
    for c in 0..POWER_CYCLES {
        let mode = lp[c % lp.len()];
        let mut written: BTreeMap<u32, u32> = BTreeMap::new();
        written.insert(0, rng.random::<u32>() & mask);
        while written.len() < 4 {
            written.insert(rng.random_range(1..words), rng.random::<u32>() & mask);
        }
        for (&a, &d) in &written {
            model.exec_transaction(&Transaction::write(a, Burst::Single, vec![d]));
        }
        model.set_power_mode(mode)?;
        rec.hit("mode", mode.as_str());
        rec.hit("transition", &format!("active_{}", mode.as_str()));
        let r = model.exec_transaction(&Transaction::read(0, Burst::Single));
        let w = model.exec_transaction(&Transaction::write(0, Burst::Single, vec![0]));
        rec.check(
            "lowpower_blocked",
            r.status == RespStatus::Error && w.status == RespStatus::Error,
            || format!("access in {} answered {:?}/{:?}", mode.as_str(), r.status, w.status),
        );
        model.set_power_mode(PowerMode::Active)?;
        rec.hit("transition", &format!("{}_active", mode.as_str()));
        for (&a, &d) in &written {
            let r = model.exec_transaction(&Transaction::read(a, Burst::Single));
            let got = (r.data.first().copied(), r.ecc_flags.first().copied());
            match mode {
                PowerMode::Retention => rec.check("retention_hold", got == (Some(d), Some(EccStatus::Ok)), || {
                    format!("word {a} after retention: expected ({d:#x}, ok), got {got:?}")
                }),
                _ => {
                    let want = (Some(after_shutdown.data), Some(after_shutdown.status));
                    rec.check("shutdown_invalidate", got == want, || {
                        format!("word {a} after shutdown: expected {want:?}, got {got:?}")
                    })
                }
            }
        }
    }
    Ok(())
}

fn fault_sweep(
    model: &mut MemoryModel,
    rec: &mut Recorder<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<(), RegressionError> {
    let cfg = model.config().clone();
    let clean = shared_scheme(cfg.ecc, cfg.data_width)?;
    let n = clean.n();
    let max_w = fault_weights(&cfg);
    let mask = cfg_mask(&cfg);
    for check in ["flag_expect", "data_expect"] {
        rec.declare(check);
    }
    for i in 0..FAULT_ITERS {
        let addr = rng.random_range(0..cfg.addr_words);
        let d = rng.random::<u32>() & mask;
        let w = 1 + i % max_w;
        let e = rand::seq::index::sample(rng, n as usize, w as usize)
            .iter()
            .fold(0u64, |acc, b| acc | 1 << b);
        model.exec_transaction(&Transaction::write(addr, Burst::Single, vec![d]));
        model.inject_fault(addr, e)?;
        let r = model.exec_transaction(&Transaction::read(addr, Burst::Single));
        let want = clean.decode(clean.encode(d) ^ e);
        let flag = r.ecc_flags.first().copied();
        rec.check("flag_expect", flag == Some(want.status), || {
            format!(
                "word {addr} data {d:#x} pattern {e:#x} (syndrome {:#x}): expected {}, got {flag:?}",
                clean.syndrome(e),
                want.status.as_str()
            )
        });
        if want.status != EccStatus::DetectedUncorrectable {
            let got = r.data.first().copied();
            rec.check("data_expect", got == Some(want.data), || {
                format!("word {addr} pattern {e:#x}: expected {:#x}, got {got:?}", want.data)
            });
        }
        rec.hit("weight", &format!("w{w}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(13, 0), 1);
        assert_eq!(binomial(13, 2), 78);
        assert_eq!(binomial(27, 5), 80730);
    }

    #[test]
    fn samples_are_fixed() {
        assert_eq!(ecc_data_samples(8, 64, 1).len(), 256);
        let a = ecc_data_samples(16, 64, 9);
        assert_eq!(a, ecc_data_samples(16, 64, 9));
        assert_eq!(a.len(), 64);
        assert!(a.iter().all(|&d| d <= 0xffff));
    }
}
