//! End-to-end orchestration: derive, plan, generate, run, report.

mod sweep;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::configspec::{parse_config, IpConfiguration};
use crate::regression::{
    self, collect_failures, generate_tests, run_session, testcases_from_ipvs, Generated,
    SessionResult, TestDescriptor, EXIT_INFRA, EXIT_OK,
};
use crate::report::{self, Endpoint, Stamp};
use crate::rmt::{subset_report_to_xml, SharedStore, Store};
use crate::vplan::{self, build_vplan, Pct, VPlan};

pub use sweep::{cmd_sweep, parse_matrix, Matrix, SweepError, SweepRow, SweepSummary, SUMMARY_FILE};

/// The shipped superset: every item approved, predicates and relationships
/// in place.
pub const FIXTURE_SUPERSET: &str = include_str!("../../fixtures/superset.xml");

pub const STORE_FILE: &str = "store.xml";
pub const SUBSET_REPORT_FILE: &str = "subset-report.xml";
pub const IPVS_FILE: &str = "ipvs.xml";
pub const VPLAN_FILE: &str = "vplan.xml";
pub const SESSION_FILE: &str = "session.vsif";
pub const SESSION_RESULT_FILE: &str = "session-result.xml";
pub const ROLLUP_FILE: &str = "vplan-rollup.xml";
pub const FAILURES_DIR: &str = "failures";
pub const HTML_FILE: &str = "vplan.html";
pub const RMT_REPORT_FILE: &str = "rmt-report.xml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Step {
    Load,
    Derive,
    Plan,
    Generate,
    Run,
    Report,
}

impl Step {
    pub const ALL: [Step; 6] = [
        Step::Load,
        Step::Derive,
        Step::Plan,
        Step::Generate,
        Step::Run,
        Step::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Step::Load => "load",
            Step::Derive => "derive",
            Step::Plan => "plan",
            Step::Generate => "generate",
            Step::Run => "run",
            Step::Report => "report",
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepStatus {
    Ok,
    Failed(String),
    NotReached,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowOptions {
    pub config: PathBuf,
    pub superset: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    /// Defaults to `<out>/archive`.
    pub archive: Option<PathBuf>,
    pub stamp: bool,
    /// Worker threads for the regression; 0 means one per core.
    pub jobs: usize,
}

impl FlowOptions {
    pub fn new(config: &Path, superset: &Path, out: &Path, seed: u64) -> Self {
        FlowOptions {
            config: config.to_path_buf(),
            superset: superset.to_path_buf(),
            out: out.to_path_buf(),
            seed,
            archive: None,
            stamp: false,
            jobs: 0,
        }
    }

    pub fn archive_dir(&self) -> PathBuf {
        self.archive
            .clone()
            .unwrap_or_else(|| self.out.join("archive"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowOutcome {
    pub steps: Vec<(Step, StepStatus)>,
    pub exit_code: i32,
    /// Artifact name -> path, for everything written.
    pub artifacts: BTreeMap<String, PathBuf>,
    pub config_tag: Option<String>,
    pub runs: usize,
    pub fails: usize,
    /// Mean testcase coverage, when the flow got that far.
    pub coverage_mean: Option<Pct>,
    pub pushed: usize,
    pub archive_link: Option<String>,
}

impl FlowOutcome {
    fn new() -> Self {
        FlowOutcome {
            steps: Step::ALL.iter().map(|s| (*s, StepStatus::NotReached)).collect(),
            exit_code: EXIT_INFRA,
            artifacts: BTreeMap::new(),
            config_tag: None,
            runs: 0,
            fails: 0,
            coverage_mean: None,
            pushed: 0,
            archive_link: None,
        }
    }

    fn mark(&mut self, step: Step, status: StepStatus) {
        if let Some(slot) = self.steps.iter_mut().find(|(s, _)| *s == step) {
            slot.1 = status;
        }
    }

    pub fn status(&self, step: Step) -> &StepStatus {
        &self
            .steps
            .iter()
            .find(|(s, _)| *s == step)
            .expect("every step is listed")
            .1
    }

    /// The failed step and its message, if any.
    pub fn error(&self) -> Option<(Step, &str)> {
        self.steps.iter().find_map(|(s, st)| match st {
            StepStatus::Failed(m) => Some((*s, m.as_str())),
            _ => None,
        })
    }
}

struct Failed(Step, String);

fn at<E: fmt::Display>(step: Step) -> impl FnOnce(E) -> Failed {
    move |e| Failed(step, e.to_string())
}

fn write_artifact(dir: &Path, name: &str, text: &str) -> Result<PathBuf, FlowError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| FlowError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Error from a single step.
#[derive(Debug, thiserror::Error)]
pub enum FlowError {
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Config(#[from] crate::configspec::ConfigError),
    #[error(transparent)]
    Rmt(#[from] crate::rmt::RmtError),
    #[error(transparent)]
    VPlan(#[from] vplan::VPlanError),
    #[error(transparent)]
    Regression(#[from] regression::RegressionError),
    #[error(transparent)]
    Report(#[from] report::ReportError),
}

/// Reads a file into a string, naming the path on failure.
pub fn read_artifact(path: &Path) -> Result<String, FlowError> {
    fs::read_to_string(path).map_err(|e| FlowError::Io(format!("{}: {e}", path.display())))
}

pub fn read_config(path: &Path) -> Result<IpConfiguration, FlowError> {
    Ok(parse_config(&read_artifact(path)?)?)
}

/// Derives the subset for `cfg` and writes the subset report and IPVS.
/// Returns the IPVS text.
pub fn step_derive(store: &SharedStore, cfg: &IpConfiguration, out: &Path) -> Result<String, FlowError> {
    let subset = store.write(|s| s.derive_subset(cfg))?;
    write_artifact(out, SUBSET_REPORT_FILE, &subset_report_to_xml(&subset))?;
    let ipvs = store.read(|s| s.export_ipvs(&subset.config_tag))?;
    write_artifact(out, IPVS_FILE, &ipvs)?;
    Ok(ipvs)
}

pub fn step_plan(ipvs: &str, out: &Path) -> Result<VPlan, FlowError> {
    let mut plan = build_vplan(ipvs)?;
    plan.auto_map();
    write_artifact(out, VPLAN_FILE, &plan.to_xml())?;
    Ok(plan)
}

pub fn step_generate(ipvs: &str, cfg: &IpConfiguration, seed: u64, out: &Path) -> Result<Generated, FlowError> {
    let (_, tcs) = testcases_from_ipvs(ipvs)?;
    let generated = generate_tests(&tcs, cfg, seed);
    write_artifact(out, SESSION_FILE, &generated.session_text())?;
    Ok(generated)
}

/// Runs the session, rolls results into the plan and writes the session
/// result, the rolled-up plan and the failure bundle.
pub fn step_run(
    session_text: &str,
    cfg: &IpConfiguration,
    descriptors: &[TestDescriptor],
    plan: &VPlan,
    jobs: usize,
    out: &Path,
) -> Result<(SessionResult, VPlan), FlowError> {
    let mut session = run_session(session_text, cfg, descriptors, jobs)?;
    let rolled = vplan::rollup(plan, &session);
    session.unmapped = rolled.unmapped;
    write_artifact(out, SESSION_RESULT_FILE, &session.to_xml())?;
    write_artifact(out, ROLLUP_FILE, &rolled.to_xml())?;
    collect_failures(&session, &out.join(FAILURES_DIR))?;
    Ok((session, rolled))
}

/// Emits and archives the HTML plan, emits the RMT report and pushes it.
/// Returns the archive link and the number of items updated.
pub fn step_report(
    rolled: &VPlan,
    session_name: &str,
    store: &SharedStore,
    archive_dir: &Path,
    stamp: bool,
    out: &Path,
) -> Result<(String, usize), FlowError> {
    let stamp = stamp.then(Stamp::now);
    let html = report::emit_vplan_html(rolled, stamp.as_ref());
    write_artifact(out, HTML_FILE, &html)?;
    let tag = rolled.config_tag.clone();
    let link = report::archive_report(&html, archive_dir, &tag, session_name)?;
    let xml = report::emit_rmt_xml(rolled, session_name, &link, stamp.as_ref());
    write_artifact(out, RMT_REPORT_FILE, &xml)?;
    let pushed = report::push_results(&xml, Endpoint::InProcess(store))?;
    Ok((link, pushed))
}

/// Runs the whole flow for one configuration, writing every intermediate
/// artifact under `opts.out`. The superset is copied to `<out>/store.xml`
/// and all updates land there. Nothing is written when the inputs cannot be
/// read. Exit code: 0 clean, 1 test failures, 2 infrastructure error.
pub fn cmd_flow(opts: &FlowOptions) -> FlowOutcome {
    let mut outcome = FlowOutcome::new();
    if let Err(Failed(step, msg)) = flow_steps(opts, &mut outcome) {
        log::error!("{step}: {msg}");
        outcome.mark(step, StepStatus::Failed(msg));
        outcome.exit_code = EXIT_INFRA;
    }
    outcome
}

fn flow_steps(opts: &FlowOptions, outcome: &mut FlowOutcome) -> Result<(), Failed> {
    let cfg = read_config(&opts.config).map_err(at(Step::Load))?;
    let superset = Store::load(&opts.superset)
        .map_err(|e| Failed(Step::Load, format!("{}: {e}", opts.superset.display())))?;
    outcome.config_tag = Some(cfg.config_tag());
    let out = &opts.out;
    fs::create_dir_all(out).map_err(|e| Failed(Step::Load, format!("{}: {e}", out.display())))?;
    let store_path = out.join(STORE_FILE);
    superset.save(&store_path).map_err(at(Step::Load))?;
    let store = SharedStore::open(&store_path).map_err(at(Step::Load))?;
    outcome.mark(Step::Load, StepStatus::Ok);

    let ipvs = step_derive(&store, &cfg, out).map_err(at(Step::Derive))?;
    outcome.mark(Step::Derive, StepStatus::Ok);
    let plan = step_plan(&ipvs, out).map_err(at(Step::Plan))?;
    outcome.mark(Step::Plan, StepStatus::Ok);
    let generated = step_generate(&ipvs, &cfg, opts.seed, out).map_err(at(Step::Generate))?;
    outcome.mark(Step::Generate, StepStatus::Ok);
    let (session, rolled) = step_run(
        &generated.session_text(),
        &cfg,
        &generated.descriptors,
        &plan,
        opts.jobs,
        out,
    )
    .map_err(at(Step::Run))?;
    outcome.runs = session.run_count();
    outcome.fails = session.fail_count();
    outcome.mark(Step::Run, StepStatus::Ok);
    let (link, pushed) = step_report(&rolled, &session.name, &store, &opts.archive_dir(), opts.stamp, out)
        .map_err(at(Step::Report))?;
    outcome.archive_link = Some(link);
    outcome.pushed = pushed;
    outcome.coverage_mean = mean_coverage(&rolled);
    outcome.mark(Step::Report, StepStatus::Ok);

    for name in [
        STORE_FILE,
        SUBSET_REPORT_FILE,
        IPVS_FILE,
        VPLAN_FILE,
        SESSION_FILE,
        SESSION_RESULT_FILE,
        ROLLUP_FILE,
        HTML_FILE,
        RMT_REPORT_FILE,
    ] {
        outcome.artifacts.insert(name.to_string(), out.join(name));
    }
    outcome
        .artifacts
        .insert(format!("{FAILURES_DIR}/summary.txt"), out.join(FAILURES_DIR).join("summary.txt"));
    outcome.exit_code = regression::exit_code(&session);
    debug_assert_eq!(outcome.exit_code == EXIT_OK, outcome.fails == 0);
    Ok(())
}

/// Mean of the testcase coverages in a rolled-up plan.
pub fn mean_coverage(plan: &VPlan) -> Option<Pct> {
    let covs: Vec<Pct> = plan
        .testcases
        .iter()
        .filter_map(|t| t.rollup.as_ref().map(|r| r.coverage))
        .collect();
    (!covs.is_empty()).then(|| covs.iter().sum::<Pct>() / Pct::from_integer(covs.len() as u128))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_shape() {
        let store = Store::from_xml(FIXTURE_SUPERSET).unwrap();
        let count = |k| store.items().filter(|i| i.kind == k).count();
        use crate::rmt::{ItemKind, ReviewState};
        assert!(count(ItemKind::Hwrq) >= 30);
        assert!(count(ItemKind::Testcase) >= 60);
        for item in store.items() {
            assert_eq!(item.state, ReviewState::Approved, "{}", item.id);
            assert_eq!(
                item.history,
                [ReviewState::Draft, ReviewState::InReview, ReviewState::Approved]
            );
            crate::configspec::parse_predicate(item.applicability.as_deref().unwrap()).unwrap();
        }
    }

    #[test]
    fn missing_config_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let sup = dir.path().join("superset.xml");
        fs::write(&sup, FIXTURE_SUPERSET).unwrap();
        let out = dir.path().join("out");
        let o = cmd_flow(&FlowOptions::new(&dir.path().join("nope.cfg"), &sup, &out, 1));
        assert_eq!(o.exit_code, EXIT_INFRA);
        assert!(matches!(o.error(), Some((Step::Load, _))));
        assert!(!out.exists());
    }

    const CLEAN: &str = "ip_name = mem\ndata_width = 16\naddr_words = 256\necc = secded\ntech = rram\nlp_modes = retention,shutdown\nahb_bursts = single,incr4,incr8\n";

    fn run(dir: &Path, cfg: &str, out: &str) -> FlowOutcome {
        let sup = dir.join("superset.xml");
        fs::write(&sup, FIXTURE_SUPERSET).unwrap();
        let cfg_path = dir.join(format!("{out}.cfg"));
        fs::write(&cfg_path, cfg).unwrap();
        let mut opts = FlowOptions::new(&cfg_path, &sup, &dir.join(out), 11);
        opts.archive = Some(dir.join("archive"));
        cmd_flow(&opts)
    }

    #[test]
    fn clean_flow_passes_and_writes_everything() {
        let dir = tempfile::tempdir().unwrap();
        let o = run(dir.path(), CLEAN, "a");
        assert_eq!(o.error(), None);
        assert_eq!(o.exit_code, EXIT_OK);
        assert!(o.steps.iter().all(|(_, s)| *s == StepStatus::Ok));
        assert!(o.pushed > 0);
        assert_eq!(o.coverage_mean, Some(Pct::from_integer(100)));
        for p in o.artifacts.values() {
            assert!(p.is_file(), "{}", p.display());
        }
        let link = o.archive_link.unwrap();
        let archived = report::resolve_link(&link).unwrap();
        assert_eq!(
            fs::read(archived).unwrap(),
            fs::read(dir.path().join("a").join(HTML_FILE)).unwrap()
        );
    }

    #[test]
    fn rerun_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        run(dir.path(), CLEAN, "a");
        run(dir.path(), CLEAN, "b");
        for name in [IPVS_FILE, VPLAN_FILE, SESSION_FILE, SESSION_RESULT_FILE, ROLLUP_FILE, HTML_FILE, RMT_REPORT_FILE] {
            assert_eq!(
                fs::read(dir.path().join("a").join(name)).unwrap(),
                fs::read(dir.path().join("b").join(name)).unwrap(),
                "{name}"
            );
        }
    }

    #[test]
    fn mutation_fails_the_flow() {
        let dir = tempfile::tempdir().unwrap();
        let o = run(dir.path(), &format!("{CLEAN}[debug]\nbug_mutations = burst_wrap\n"), "m");
        assert_eq!(o.exit_code, regression::EXIT_FAILURES);
        assert!(o.fails > 0);
        assert!(o.steps.iter().all(|(_, s)| *s == StepStatus::Ok));
        let logs = fs::read_dir(dir.path().join("m").join(FAILURES_DIR)).unwrap().count();
        assert!(logs > 1);
    }

    #[test]
    fn corrupt_superset_is_infrastructure_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.cfg");
        fs::write(&cfg, CLEAN).unwrap();
        let sup = dir.path().join("bad.xml");
        fs::write(&sup, "<store>").unwrap();
        let out = dir.path().join("out");
        let o = cmd_flow(&FlowOptions::new(&cfg, &sup, &out, 1));
        assert_eq!(o.exit_code, EXIT_INFRA);
        assert!(matches!(o.error(), Some((Step::Load, _))));
        assert!(!out.exists());
    }
}
