//! Test generation from a derived subset, the session file, and a
//! deterministic parallel runner over the DUT model.

mod result;
mod scenarios;
mod session;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::configspec::{EccLevel, IpConfiguration};
use crate::dut::{EccError, ModelError};
use crate::rmt::{Domain, ItemKind};
use crate::xml::{self, XmlError};

pub use result::{CheckResult, RunResult, SessionResult, Verdict};
pub use scenarios::ecc_data_samples;
pub use session::{SessionFile, SessionGroup, SessionTest};

pub const DEFAULT_SIM_COUNT: u32 = 4;
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURES: i32 = 1;
pub const EXIT_INFRA: i32 = 2;

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error("session file line {line}: {msg}")]
    SessionSyntax { line: usize, msg: String },
    #[error("session `{session}` was generated for another configuration (expected tag {expected})")]
    ConfigMismatch { session: String, expected: String },
    #[error("session test `{0}` has no descriptor")]
    UnknownTest(String),
    #[error("session test `{test}` uses runner {got}, descriptor says {want}")]
    RunnerMismatch {
        test: String,
        got: &'static str,
        want: &'static str,
    },
    #[error("session test `{0}` has count 0")]
    ZeroCount(String),
    #[error("testcase `{0}` has no domain")]
    NoDomain(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ecc(#[from] EccError),
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error("failure bundle: {0}")]
    Io(#[from] io::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Runner {
    Sim,
    Exhaustive,
}

impl Runner {
    pub fn as_str(self) -> &'static str {
        match self {
            Runner::Sim => "sim",
            Runner::Exhaustive => "exhaustive",
        }
    }

    fn group(self) -> &'static str {
        match self {
            Runner::Sim => "sim",
            Runner::Exhaustive => "formal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scenario {
    EccExhaustive,
    BusDecodeExhaustive,
    BurstRw,
    RandomRw,
    PowerCycle,
    FaultSweep,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::EccExhaustive,
        Scenario::BusDecodeExhaustive,
        Scenario::BurstRw,
        Scenario::RandomRw,
        Scenario::PowerCycle,
        Scenario::FaultSweep,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::EccExhaustive => "ecc_exhaustive",
            Scenario::BusDecodeExhaustive => "bus_decode_exhaustive",
            Scenario::BurstRw => "burst_rw",
            Scenario::RandomRw => "random_rw",
            Scenario::PowerCycle => "power_cycle",
            Scenario::FaultSweep => "fault_sweep",
        }
    }

    pub fn runner(self) -> Runner {
        match self {
            Scenario::EccExhaustive | Scenario::BusDecodeExhaustive => Runner::Exhaustive,
            _ => Runner::Sim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coverpoint {
    pub name: String,
    pub bins: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestDescriptor {
    /// The subset testcase id.
    pub name: String,
    pub runner: Runner,
    pub scenario: Scenario,
    pub count: u32,
    pub coverpoints: Vec<Coverpoint>,
}

impl TestDescriptor {
    /// `cov.<test>.<point>.<bin>` for every declared bin.
    pub fn declared_bins(&self) -> impl Iterator<Item = String> + '_ {
        self.coverpoints.iter().flat_map(move |p| {
            p.bins
                .iter()
                .map(move |b| format!("cov.{}.{}.{b}", self.name, p.name))
        })
    }
}

/// The parts of a subset testcase that test generation looks at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestcaseInfo {
    pub id: String,
    pub title: String,
    pub domain: Domain,
}

/// Subset testcases listed in an ipvs document, with its config tag.
pub fn testcases_from_ipvs(ipvs: &str) -> Result<(String, Vec<TestcaseInfo>), RegressionError> {
    let root = xml::parse(ipvs)?;
    root.expect_name("ipvs")?;
    let mut out = Vec::new();
    for el in root.children_named("item") {
        if el.req_attr("kind")? != ItemKind::Testcase.as_str() {
            continue;
        }
        let id = el.req_attr("id")?.to_string();
        let domain = el
            .attr("domain")
            .ok_or_else(|| RegressionError::NoDomain(id.clone()))?;
        let domain: Domain = domain.parse().map_err(|_| el.invalid("domain", domain))?;
        out.push(TestcaseInfo {
            title: el.child_text("title").unwrap_or_default().to_string(),
            id,
            domain,
        });
    }
    Ok((root.req_attr("config_tag")?.to_string(), out))
}

fn formal_scenario(title: &str, cfg: &IpConfiguration) -> Option<Scenario> {
    if title.contains("ecc") {
        (cfg.ecc != EccLevel::None).then_some(Scenario::EccExhaustive)
    } else {
        Some(Scenario::BusDecodeExhaustive)
    }
}

fn sim_scenario(title: &str) -> Scenario {
    if title.contains("burst") {
        Scenario::BurstRw
    } else if title.contains("power") {
        Scenario::PowerCycle
    } else if title.contains("fault") {
        Scenario::FaultSweep
    } else {
        Scenario::RandomRw
    }
}

/// Scenario for a testcase under `cfg`, or `None` when nothing applies
/// (an ECC proof on a configuration without ECC).
pub fn scenario_for(tc: &TestcaseInfo, cfg: &IpConfiguration) -> Option<Scenario> {
    let title = tc.title.to_lowercase();
    match tc.domain {
        Domain::Formal => formal_scenario(&title, cfg),
        Domain::Simulation => Some(sim_scenario(&title)),
        Domain::Both => formal_scenario(&title, cfg).or(Some(sim_scenario(&title))),
    }
}

/// Session name for `cfg`; run_session checks it against the config tag.
pub fn session_name(cfg: &IpConfiguration) -> String {
    format!("{}-{}", cfg.ip_name, cfg.config_tag())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    /// Sorted by name.
    pub descriptors: Vec<TestDescriptor>,
    pub session: SessionFile,
    /// Testcases without an applicable scenario; they stay `not_run`.
    pub skipped: Vec<String>,
}

impl Generated {
    pub fn session_text(&self) -> String {
        self.session.to_text()
    }
}

pub fn generate_tests(tcs: &[TestcaseInfo], cfg: &IpConfiguration, seed: u64) -> Generated {
    let mut descriptors = Vec::new();
    let mut skipped = Vec::new();
    for tc in tcs {
        match scenario_for(tc, cfg) {
            Some(scenario) => {
                let runner = scenario.runner();
                descriptors.push(TestDescriptor {
                    name: tc.id.clone(),
                    runner,
                    scenario,
                    count: if runner == Runner::Sim { DEFAULT_SIM_COUNT } else { 1 },
                    coverpoints: scenarios::coverpoints(scenario, cfg),
                });
            }
            None => skipped.push(tc.id.clone()),
        }
    }
    descriptors.sort_by(|a, b| a.name.cmp(&b.name));
    skipped.sort();
    let groups = [Runner::Exhaustive, Runner::Sim]
        .into_iter()
        .map(|runner| SessionGroup {
            name: runner.group().to_string(),
            tests: descriptors
                .iter()
                .filter(|d| d.runner == runner)
                .map(|d| SessionTest {
                    name: d.name.clone(),
                    runner,
                    count: d.count,
                })
                .collect(),
        })
        .filter(|g| !g.tests.is_empty())
        .collect();
    Generated {
        session: SessionFile {
            name: session_name(cfg),
            seed,
            groups,
        },
        descriptors,
        skipped,
    }
}

/// FNV-1a 64 of `"<session_seed>/<test>/<run_index>"`.
pub fn run_seed(session_seed: u64, test: &str, index: u32) -> u64 {
    crate::fnv1a64(format!("{session_seed}/{test}/{index}").as_bytes())
}

/// Parses and executes a session. Descriptors supply each test's scenario
/// and coverpoints; the session text decides which tests run and how often.
/// `jobs` bounds the worker pool (0 means one worker per core). Output does
/// not depend on `jobs`.
pub fn run_session(
    text: &str,
    cfg: &IpConfiguration,
    descriptors: &[TestDescriptor],
    jobs: usize,
) -> Result<SessionResult, RegressionError> {
    let session = SessionFile::parse(text)?;
    let tag = cfg.config_tag();
    if session.name.strip_suffix(&tag).is_none_or(|p| !p.ends_with('-')) {
        return Err(RegressionError::ConfigMismatch {
            session: session.name,
            expected: tag,
        });
    }
    let mut units = Vec::new();
    let mut declared_bins = std::collections::BTreeSet::new();
    for t in session.tests() {
        let desc = descriptors
            .iter()
            .find(|d| d.name == t.name)
            .ok_or_else(|| RegressionError::UnknownTest(t.name.clone()))?;
        if desc.runner != t.runner {
            return Err(RegressionError::RunnerMismatch {
                test: t.name.clone(),
                got: t.runner.as_str(),
                want: desc.runner.as_str(),
            });
        }
        if t.count == 0 {
            return Err(RegressionError::ZeroCount(t.name.clone()));
        }
        declared_bins.extend(desc.declared_bins());
        for index in 0..t.count {
            let seed = (t.runner == Runner::Sim).then(|| run_seed(session.seed, &t.name, index));
            units.push((desc, index, seed));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| RegressionError::Pool(e.to_string()))?;
    let mut runs = pool.install(|| {
        units
            .par_iter()
            .map(|(desc, index, seed)| scenarios::execute(desc, cfg, *index, *seed))
            .collect::<Result<Vec<_>, _>>()
    })?;
    runs.sort_by(|a, b| (&a.test, a.index).cmp(&(&b.test, b.index)));
    Ok(SessionResult {
        name: session.name,
        config_tag: tag,
        seed: session.seed,
        runs,
        declared_bins,
        unmapped: None,
    })
}

pub fn exit_code(session: &SessionResult) -> i32 {
    if session.fail_count() == 0 {
        EXIT_OK
    } else {
        EXIT_FAILURES
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailureBundle {
    pub summary: PathBuf,
    /// One per failing run, in run order.
    pub logs: Vec<PathBuf>,
}

/// Writes `summary.txt` and one `<test>.<index>.log` per failing run into
/// `dir`, replacing any earlier bundle there.
pub fn collect_failures(session: &SessionResult, dir: &Path) -> Result<FailureBundle, RegressionError> {
    fs::create_dir_all(dir)?;
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "log") {
            fs::remove_file(path)?;
        }
    }
    let mut summary = format!(
        "session {} config_tag {}\n{} failures in {} runs\n",
        session.name,
        session.config_tag,
        session.fail_count(),
        session.run_count()
    );
    let mut logs = Vec::new();
    for run in session.failing_runs() {
        let file = format!("{}.{}.log", run.test, run.index);
        let path = dir.join(&file);
        fs::write(&path, run.log.as_deref().unwrap_or_default())?;
        summary.push_str(&format!("{} run {}: {file}\n", run.test, run.index));
        logs.push(path);
    }
    let summary_path = dir.join("summary.txt");
    fs::write(&summary_path, summary)?;
    Ok(FailureBundle {
        summary: summary_path,
        logs,
    })
}
