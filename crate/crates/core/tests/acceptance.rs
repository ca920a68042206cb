//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

use reqflow_core::configspec::{parse_config, BugMutation, EccLevel};
use reqflow_core::dut::{build_ecc, EccScheme, EccStatus};
use reqflow_core::flow::{
    cmd_flow, cmd_sweep, parse_matrix, FlowOptions, FAILURES_DIR, FIXTURE_SUPERSET, HTML_FILE,
    IPVS_FILE, RMT_REPORT_FILE, SESSION_FILE, STORE_FILE,
};
use reqflow_core::regression::{
    ecc_data_samples, CheckResult, RunResult, SessionResult, Verdict, EXIT_FAILURES, EXIT_OK,
};
use reqflow_core::report::{emit_rmt_xml, resolve_link, RmtReport};
use reqflow_core::rmt::{
    Domain, ItemKind, RelKind, Relationship, ReviewState, RmtItem, Store, TestStatus,
};
use reqflow_core::vplan::{build_vplan, format_pct, rollup, PlanItem, Pct, VPlan};

const SWEEP_MIN_CONFIGS: usize = 100;
const SWEEP_BUDGET: Duration = Duration::from_secs(10 * 60);
const ECC_BUDGET: Duration = Duration::from_secs(60);
const K16_SAMPLES: usize = 1000;
const SECDED8_R: u32 = 5;
const SECDED8_N: u32 = 13;
const SECDED8_DMIN: u32 = 4;
const DECTED8_DMIN_AT_LEAST: u32 = 6;
const ROLLUP_INSTANCES: u64 = 50;

const BASE_CFG: &str = "ip_name = mem\ndata_width = 16\naddr_words = 256\necc = secded\ntech = rram\nlp_modes = retention,shutdown\nahb_bursts = single,incr4,incr8\n";

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn superset_in(dir: &Path) -> PathBuf {
    let p = dir.join("superset.xml");
    fs::write(&p, FIXTURE_SUPERSET).unwrap();
    p
}

fn flow_in(dir: &Path, name: &str, cfg: &str, seed: u64, archive: &Path) -> reqflow_core::FlowOutcome {
    let superset = superset_in(dir);
    let cfg_path = dir.join(format!("{name}.cfg"));
    fs::write(&cfg_path, cfg).unwrap();
    let mut opts = FlowOptions::new(&cfg_path, &superset, &dir.join(name), seed);
    opts.archive = Some(archive.to_path_buf());
    cmd_flow(&opts)
}

/// Every derived hwrq is verified or carries an approved waiver; every
/// testcase row is in the store with the reported status, coverage and a
/// link resolving to the emitted HTML.
fn check_closure(out: &Path) -> Result<usize, String> {
    let store = Store::load(&out.join(STORE_FILE)).map_err(|e| e.to_string())?;
    let report = RmtReport::from_xml(&fs::read_to_string(out.join(RMT_REPORT_FILE)).unwrap())
        .map_err(|e| e.to_string())?;
    let html = fs::read(out.join(HTML_FILE)).unwrap();
    let tag = &report.config_tag;
    for h in store.query(Some(ItemKind::Hwrq), Some(tag)) {
        let verified = !store.verifying_testcases(&h.id).is_empty();
        let waived = store
            .waivers_for(&h.id)
            .iter()
            .any(|w| w.state == ReviewState::Approved);
        if !verified && !waived {
            return Err(format!("{} neither verified nor waived", h.id));
        }
    }
    if report.testcases.is_empty() {
        return Err("report has no testcase rows".into());
    }
    for row in &report.testcases {
        let item = store.get(&row.id).ok_or(format!("{} missing from store", row.id))?;
        let r = item.result.as_ref().ok_or(format!("{} has no result", row.id))?;
        if r.status != row.status || format!("{:.1}", r.coverage_pct) != row.coverage {
            return Err(format!("{} store {:?}/{} vs report {:?}/{}", row.id, r.status, r.coverage_pct, row.status, row.coverage));
        }
        let path = resolve_link(&r.report_link).ok_or(format!("{}: bad link {}", row.id, r.report_link))?;
        if fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))? != html {
            return Err(format!("{}: archived HTML differs", row.id));
        }
    }
    Ok(report.testcases.len())
}

fn criterion_sweep() -> Result<String, String> {
    let dir = tempfile::tempdir().unwrap();
    let superset = superset_in(dir.path());
    let matrix = parse_matrix(&fs::read_to_string(fixtures().join("sweep-matrix.cfg")).unwrap())
        .map_err(|e| e.to_string())?;
    let out = dir.path().join("sweep");
    let start = Instant::now();
    let summary = cmd_sweep(&matrix, &superset, &out, 1, 0, None).map_err(|e| e.to_string())?;
    let wall = start.elapsed();
    let n = summary.rows.len();
    if n < SWEEP_MIN_CONFIGS {
        return Err(format!("{n} valid configurations < {SWEEP_MIN_CONFIGS}"));
    }
    for r in &summary.rows {
        if r.exit_code != EXIT_OK || r.pushed == 0 {
            return Err(format!("{}: exit {} pushed {} {}", r.config_tag, r.exit_code, r.pushed, r.error));
        }
        if !out.join(&r.config_tag).join(RMT_REPORT_FILE).is_file() {
            return Err(format!("{}: no rmt report", r.config_tag));
        }
    }
    if wall > SWEEP_BUDGET {
        return Err(format!("{n} configurations took {:.1} s > {} s", wall.as_secs_f64(), SWEEP_BUDGET.as_secs()));
    }
    Ok(format!(
        "{n} configurations ({} invalid skipped), all exit 0 with pushed reports, {:.1} s",
        summary.skipped,
        wall.as_secs_f64()
    ))
}

/// Capability table: (t_correct, t_detect).
fn table(level: EccLevel) -> (u32, u32) {
    match level {
        EccLevel::None => (0, 0),
        EccLevel::Sed => (0, 1),
        EccLevel::Secded => (1, 2),
        EccLevel::Dected => (2, 3),
    }
}

/// Calls `f` with every `n`-bit word of exactly `w` set bits.
fn each_error(n: u32, w: u32, f: &mut impl FnMut(u64)) {
    fn go(from: u32, n: u32, left: u32, acc: u64, f: &mut impl FnMut(u64)) {
        if left == 0 {
            f(acc);
            return;
        }
        for b in from..=n - left {
            go(b + 1, n, left - 1, acc | 1 << b, f);
        }
    }
    go(0, n, w, 0, f)
}

#[derive(Default)]
struct CapTally {
    cases: u64,
    violations: u64,
    first: Option<String>,
    beyond: u64,
    beyond_claimed: u64,
}

/// Exhaustive weight classes `0..=tc+td` over `data`, decoded and judged
/// against the table: clean words are `ok`; up to `tc` errors are
/// corrected to the original data; beyond `tc` up to `td` total errors
/// are flagged uncorrectable. Weights past `td` carry no guarantee and are
/// tallied separately.
fn capability(scheme: &EccScheme, level: EccLevel, data: &[u32]) -> CapTally {
    let (tc, td) = table(level);
    let mut t = CapTally::default();
    for &d in data {
        let cw = scheme.encode(d);
        for w in 0..=tc + td {
            each_error(scheme.n(), w, &mut |e| {
                let got = scheme.decode(cw ^ e);
                if w > td {
                    t.beyond += 1;
                    if got.status != EccStatus::DetectedUncorrectable {
                        t.beyond_claimed += 1;
                    }
                    return;
                }
                t.cases += 1;
                let ok = if w == 0 {
                    got.status == EccStatus::Ok && got.data == d
                } else if w <= tc {
                    got.status == EccStatus::Corrected && got.data == d
                } else {
                    got.status == EccStatus::DetectedUncorrectable
                };
                if !ok {
                    t.violations += 1;
                    t.first.get_or_insert_with(|| {
                        format!("{level}/k={} d={d:#x} e={e:#x} got {:?}", scheme.k(), got)
                    });
                }
            });
        }
    }
    t
}

fn criterion_capability() -> Result<String, String> {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut violations = 0;
    let mut first = None;
    for level in EccLevel::ALL.iter().copied() {
        for (k, data) in [
            (8u32, (0..256u32).collect::<Vec<_>>()),
            (16, ecc_data_samples(16, K16_SAMPLES, 0x16)),
        ] {
            let scheme = build_ecc(level, k).map_err(|e| e.to_string())?;
            if k == 16 && data.len() != K16_SAMPLES {
                return Err(format!("{} samples for k=16", data.len()));
            }
            let t = capability(&scheme, level, &data);
            violations += t.violations;
            if first.is_none() {
                first = t.first;
            }
            lines.push(format!(
                "{level}/{k}: {} cases, {} past the detect bound ({} decoded as ok/corrected)",
                t.cases, t.beyond, t.beyond_claimed
            ));
        }
    }
    let wall = start.elapsed();
    for l in &lines {
        println!("    {l}");
    }
    if violations > 0 {
        return Err(format!("{violations} violations, first {}", first.unwrap_or_default()));
    }
    if wall > ECC_BUDGET {
        return Err(format!("{:.1} s > {} s", wall.as_secs_f64(), ECC_BUDGET.as_secs()));
    }
    Ok(format!("0 violations across all levels, k=8 exhaustive and k=16 x {K16_SAMPLES}, {:.1} s", wall.as_secs_f64()))
}

/// Minimum Hamming weight over all non-zero codewords.
fn min_distance(scheme: &EccScheme) -> u32 {
    (1..=scheme.data_mask())
        .map(|d| scheme.encode(d).count_ones())
        .min()
        .unwrap()
}

fn criterion_construction() -> Result<String, String> {
    let secded = build_ecc(EccLevel::Secded, 8).map_err(|e| e.to_string())?;
    let dected = build_ecc(EccLevel::Dected, 8).map_err(|e| e.to_string())?;
    for d in 0..256u32 {
        for s in [&secded, &dected] {
            if s.syndrome(s.encode(d)) != 0 || s.extract(s.encode(d)) != d {
                return Err(format!("{d:#x} does not encode to a clean codeword"));
            }
        }
    }
    let (r, n, dmin) = (secded.r(), secded.n(), min_distance(&secded));
    if (r, n, dmin) != (SECDED8_R, SECDED8_N, SECDED8_DMIN) {
        return Err(format!("secded(8): r={r} n={n} dmin={dmin}"));
    }
    let ddmin = min_distance(&dected);
    if ddmin < DECTED8_DMIN_AT_LEAST {
        return Err(format!("dected(8): dmin={ddmin}"));
    }
    Ok(format!("secded(8) r={r} n={n} dmin={dmin}; dected(8) r={} n={} dmin={ddmin}", dected.r(), dected.n()))
}

fn criterion_mutations() -> Result<String, String> {
    let dir = tempfile::tempdir().unwrap();
    let archive = dir.path().join("archive");
    let mut notes = Vec::new();
    for m in BugMutation::ALL.iter().copied() {
        let cfg = format!("{BASE_CFG}[debug]\nbug_mutations = {m}\n");
        let o = flow_in(dir.path(), m.as_str(), &cfg, 3, &archive);
        if o.exit_code != EXIT_FAILURES {
            return Err(format!("{m}: exit {} {:?}", o.exit_code, o.error()));
        }
        let out = dir.path().join(m.as_str());
        let summary = fs::read_to_string(out.join(FAILURES_DIR).join("summary.txt")).unwrap();
        let named = summary.lines().filter(|l| l.contains(" run ")).count();
        if named == 0 {
            return Err(format!("{m}: failure bundle names no run"));
        }
        let report = RmtReport::from_xml(&fs::read_to_string(out.join(RMT_REPORT_FILE)).unwrap())
            .map_err(|e| e.to_string())?;
        let failed = report.testcases.iter().filter(|t| t.status == TestStatus::Fail).count();
        if failed == 0 {
            return Err(format!("{m}: no failed testcase row"));
        }
        notes.push(format!("{m}: {named} failing runs, {failed} failed testcases"));
    }
    Ok(notes.join("; "))
}

fn criterion_closure() -> Result<String, String> {
    let dir = tempfile::tempdir().unwrap();
    let archive = dir.path().join("archive");
    let configs = [
        BASE_CFG.to_string(),
        BASE_CFG.replace("rram", "sram_hd").replace("secded", "sed"),
        BASE_CFG.replace("secded", "dected").replace("retention,shutdown", ""),
        BASE_CFG.replace("16", "32").replace("secded", "none").replace("single,incr4,incr8", "single"),
        BASE_CFG.replace("16", "8").replace("secded", "dected").replace("retention,shutdown", "shutdown"),
    ];
    let mut rows = 0;
    for (i, cfg) in configs.iter().enumerate() {
        let name = format!("c{i}");
        let o = flow_in(dir.path(), &name, cfg, 7, &archive);
        if o.exit_code != EXIT_OK {
            return Err(format!("{name}: exit {} {:?}", o.exit_code, o.error()));
        }
        rows += check_closure(&dir.path().join(&name)).map_err(|e| format!("{name}: {e}"))?;
    }
    Ok(format!("{} configurations, {rows} testcase rows traced to store and archive", configs.len()))
}

fn criterion_determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().unwrap();
    let archive = dir.path().join("archive");
    let cases = [
        ("clean", BASE_CFG.to_string()),
        ("bug", format!("{BASE_CFG}[debug]\nbug_mutations = burst_wrap\n")),
    ];
    for (name, cfg) in &cases {
        let a = flow_in(dir.path(), &format!("{name}-a"), cfg, 99, &archive);
        let b = flow_in(dir.path(), &format!("{name}-b"), cfg, 99, &archive);
        if a.error().is_some() || a.exit_code != b.exit_code {
            return Err(format!("{name}: exit {} vs {}", a.exit_code, b.exit_code));
        }
        for f in [IPVS_FILE, SESSION_FILE, HTML_FILE, RMT_REPORT_FILE] {
            let x = fs::read(dir.path().join(format!("{name}-a")).join(f)).unwrap();
            let y = fs::read(dir.path().join(format!("{name}-b")).join(f)).unwrap();
            if x != y {
                return Err(format!("{name}: {f} differs"));
            }
        }
    }
    Ok("ipvs, session file, HTML and RMT XML byte-identical across reruns".into())
}

/// Pattern to anchored regex: `*` is one segment, `**` one or more.
fn pattern_regex(p: &str) -> Regex {
    let parts: Vec<String> = p
        .split('.')
        .map(|s| match s {
            "*" => "[^.]+".to_string(),
            "**" => "[^.]+(?:\\.[^.]+)*".to_string(),
            lit => regex::escape(lit),
        })
        .collect();
    Regex::new(&format!("^{}$", parts.join("\\."))).unwrap()
}

type Expected = (TestStatus, Pct, usize, bool);
type Criterion = (&'static str, fn() -> Result<String, String>);

struct Instance {
    plan: VPlan,
    session: SessionResult,
    patterns: BTreeMap<String, Vec<String>>,
}

fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tests = ["t0", "t1", "t2", "t3"];
    let checks = ["c0", "c1", "c2"];
    let points = ["p0", "p1"];
    let bins = ["b0", "b1", "b2"];
    let mut declared = BTreeSet::new();
    for t in tests {
        for p in points {
            for b in bins {
                if rng.random_bool(0.6) {
                    declared.insert(format!("cov.{t}.{p}.{b}"));
                }
            }
        }
    }
    let mut runs = Vec::new();
    for (i, t) in tests.iter().enumerate() {
        for index in 0..rng.random_range(0..3u32) {
            let mut emitted = Vec::new();
            for c in checks {
                if rng.random_bool(0.7) {
                    let verdict = if rng.random_bool(0.15) { Verdict::Fail } else { Verdict::Pass };
                    emitted.push(CheckResult {
                        name: format!("chk.{t}.{c}"),
                        verdict,
                    });
                }
            }
            let mut hits = BTreeSet::new();
            for p in points {
                for b in bins {
                    if rng.random_bool(0.4) {
                        hits.insert(format!("cov.{t}.{p}.{b}"));
                    }
                }
            }
            if rng.random_bool(0.2) {
                hits.insert(format!("cov.{t}.extra.x{i}"));
            }
            runs.push(RunResult::from_checks(t, index, Some(seed), emitted, hits, &[]));
        }
    }
    let session = SessionResult {
        name: "mem-r".into(),
        config_tag: "r".into(),
        seed,
        runs,
        declared_bins: declared,
        unmapped: None,
    };

    let item = |id: &str, kind| PlanItem {
        id: id.into(),
        kind,
        title: id.into(),
        state: ReviewState::Approved,
        patterns: vec![],
        verified_by: vec![],
        waivers: vec![],
        target: None,
        rollup: None,
    };
    let n_tc = rng.random_range(1..6usize);
    let tc_ids: Vec<String> = (0..n_tc).map(|i| format!("r-TC-{i:03}")).collect();
    let mut hwrqs = Vec::new();
    for h in 0..rng.random_range(1..5usize) {
        let mut it = item(&format!("r-HWRQ-{h:03}"), ItemKind::Hwrq);
        it.verified_by = tc_ids.iter().filter(|_| rng.random_bool(0.5)).cloned().collect();
        hwrqs.push(it);
    }
    let mut plan = VPlan {
        config_tag: "r".into(),
        requirements: hwrqs,
        testcases: tc_ids.iter().map(|id| item(id, ItemKind::Testcase)).collect(),
        unmapped: None,
    };
    let mut patterns = BTreeMap::new();
    for id in &tc_ids {
        let mut mine = Vec::new();
        for _ in 0..rng.random_range(1..4) {
            let t = tests.choose(&mut rng).unwrap();
            let c = checks.choose(&mut rng).unwrap();
            let p = points.choose(&mut rng).unwrap();
            let b = bins.choose(&mut rng).unwrap();
            let pat = match rng.random_range(0..8) {
                0 => format!("chk.{t}.**"),
                1 => format!("cov.{t}.**"),
                2 => format!("cov.{t}.*.{b}"),
                3 => format!("chk.*.{c}"),
                4 => format!("cov.*.{p}.**"),
                5 => format!("cov.{t}.{p}.{b}"),
                6 => "**".to_string(),
                _ => format!("*.{t}.*"),
            };
            plan.add_mapping_pattern(id, &pat).unwrap();
            if rng.random_bool(0.2) {
                plan.add_mapping_pattern(id, &pat).unwrap();
            }
            mine.push(pat);
        }
        patterns.insert(id.clone(), mine);
    }
    Instance {
        plan,
        session,
        patterns,
    }
}

/// Expected `(status, coverage, matched, no_bins)` per testcase, by direct
/// scan of every emission against every pattern.
fn recount(inst: &Instance) -> (BTreeMap<String, Expected>, usize) {
    let mut names: BTreeSet<&str> = inst.session.declared_bins.iter().map(String::as_str).collect();
    for run in &inst.session.runs {
        names.extend(run.checks.iter().map(|c| c.name.as_str()));
        names.extend(run.hits.iter().map(String::as_str));
    }
    let mut out = BTreeMap::new();
    let mut mapped: BTreeSet<&str> = BTreeSet::new();
    for (id, pats) in &inst.patterns {
        let res: Vec<Regex> = pats.iter().map(|p| pattern_regex(p)).collect();
        let hit = |n: &str| res.iter().any(|r| r.is_match(n));
        let matched: Vec<&str> = names.iter().copied().filter(|n| hit(n)).collect();
        mapped.extend(&matched);
        let mut any_check = false;
        let mut any_fail = false;
        for run in &inst.session.runs {
            for c in &run.checks {
                if hit(&c.name) {
                    any_check = true;
                    any_fail |= c.verdict == Verdict::Fail;
                }
            }
        }
        let declared: Vec<&String> = inst.session.declared_bins.iter().filter(|b| hit(b)).collect();
        let covered = declared
            .iter()
            .filter(|b| inst.session.runs.iter().any(|r| r.hits.contains(b.as_str())))
            .count();
        let status = if any_fail {
            TestStatus::Fail
        } else if any_check {
            TestStatus::Pass
        } else {
            TestStatus::NotRun
        };
        let cov = if declared.is_empty() {
            Pct::from_integer(100)
        } else {
            Pct::new(100 * covered as u128, declared.len() as u128)
        };
        out.insert(id.clone(), (status, cov, matched.len(), declared.is_empty()));
    }
    (out, names.len() - mapped.len())
}

fn criterion_rollup() -> Result<String, String> {
    let mut compared = 0;
    for seed in 0..ROLLUP_INSTANCES {
        let inst = random_instance(seed);
        let rolled = rollup(&inst.plan, &inst.session);
        let (expect, unmapped) = recount(&inst);
        if rolled.unmapped != Some(unmapped) {
            return Err(format!("instance {seed}: unmapped {:?} vs {unmapped}", rolled.unmapped));
        }
        for tc in &rolled.testcases {
            let r = tc.rollup.as_ref().ok_or(format!("{}: no rollup", tc.id))?;
            let e = &expect[&tc.id];
            if (r.status, r.coverage, r.matched, r.no_bins) != *e {
                return Err(format!("instance {seed} {}: {:?} vs {:?}", tc.id, r, e));
            }
            compared += 1;
        }
        for h in rolled.hwrqs() {
            let r = h.rollup.as_ref().ok_or(format!("{}: no rollup", h.id))?;
            let parts: Vec<&Expected> = h.verified_by.iter().map(|id| &expect[id]).collect();
            let (status, cov) = if parts.is_empty() {
                (TestStatus::NotRun, Pct::from_integer(0))
            } else {
                let status = if parts.iter().any(|p| p.0 == TestStatus::Fail) {
                    TestStatus::Fail
                } else if parts.iter().any(|p| p.0 == TestStatus::NotRun) {
                    TestStatus::NotRun
                } else {
                    TestStatus::Pass
                };
                let sum = parts.iter().fold(Pct::from_integer(0), |a, p| a + p.1);
                (status, sum / Pct::from_integer(parts.len() as u128))
            };
            if (r.status, r.coverage) != (status, cov) {
                return Err(format!("instance {seed} {}: {:?} vs {:?}/{}", h.id, r, status, cov));
            }
            compared += 1;
        }
        let xml = emit_rmt_xml(&rolled, "mem-r", "file:///r/vplan.html", None);
        let report = RmtReport::from_xml(&xml).map_err(|e| e.to_string())?;
        for row in &report.testcases {
            if row.coverage != format_pct(&expect[&row.id].1) {
                return Err(format!("instance {seed} {}: formatted {}", row.id, row.coverage));
            }
        }
    }
    Ok(format!("{ROLLUP_INSTANCES} instances, {compared} items equal to the recount"))
}

fn legal(from: ReviewState, to: ReviewState) -> bool {
    use ReviewState::*;
    matches!((from, to), (Draft, InReview) | (InReview, Approved) | (InReview, Draft))
}

fn any_state() -> impl Strategy<Value = ReviewState> {
    prop_oneof![
        Just(ReviewState::Draft),
        Just(ReviewState::InReview),
        Just(ReviewState::Approved)
    ]
}

/// Store with one approved hwrq (applicable everywhere, no testcase) and
/// one approved hwrq/testcase pair, derived for the base configuration.
fn waiver_store() -> (Store, String, String) {
    let mut s = Store::new();
    let bare = s.post_item(RmtItem::superset_hwrq("Unverifiable corner", "true")).unwrap();
    let h = s.post_item(RmtItem::superset_hwrq("Reads return written data", "true")).unwrap();
    let t = s
        .post_item(RmtItem::superset_testcase("Random read write", Domain::Simulation, "true"))
        .unwrap();
    s.post_relationship(Relationship::new(&t, &h, RelKind::Verifies)).unwrap();
    for id in [&bare, &h, &t] {
        s.set_review_state(id, ReviewState::InReview).unwrap();
        s.set_review_state(id, ReviewState::Approved).unwrap();
    }
    let cfg = parse_config(BASE_CFG).unwrap();
    let tag = s.derive_subset(&cfg).unwrap().config_tag;
    let target = format!("{tag}-{bare}");
    (s, tag, target)
}

fn blocking_flag(store: &Store, tag: &str, hwrq: &str) -> String {
    let plan = build_vplan(&store.export_ipvs(tag).unwrap()).unwrap();
    let session = SessionResult {
        name: format!("mem-{tag}"),
        config_tag: tag.into(),
        seed: 0,
        runs: vec![],
        declared_bins: BTreeSet::new(),
        unmapped: None,
    };
    let xml = emit_rmt_xml(&rollup(&plan, &session), &session.name, "file:///w/vplan.html", None);
    let report = RmtReport::from_xml(&xml).unwrap();
    let row = report.hwrqs.iter().find(|h| h.id == hwrq).expect("hwrq row");
    let attr = format!("id=\"{hwrq}\"");
    let line = xml.lines().find(|l| l.contains(&attr)).unwrap();
    let flag = if line.contains("blocking=\"true\"") { "true" } else { "false" };
    assert_eq!(row.blocking, flag == "true");
    flag.to_string()
}

fn criterion_state_machine() -> Result<String, String> {
    let mut runner = TestRunner::new(PropConfig {
        cases: 256,
        failure_persistence: None,
        ..PropConfig::default()
    });
    runner
        .run(&prop::collection::vec(any_state(), 1..12), |walk| {
            let mut s = Store::new();
            let id = s.post_item(RmtItem::superset_hwrq("walk", "true")).unwrap();
            let mut cur = ReviewState::Draft;
            let mut history = vec![ReviewState::Draft];
            for to in walk {
                let res = s.set_review_state(&id, to);
                prop_assert_eq!(res.is_ok(), legal(cur, to), "{:?} -> {:?}", cur, to);
                if res.is_ok() {
                    cur = to;
                    history.push(to);
                }
                let item = s.get(&id).unwrap();
                prop_assert_eq!(item.state, cur);
                prop_assert_eq!(&item.history, &history);
            }
            Ok(())
        })
        .map_err(|e| format!("review walk: {e}"))?;

    let (base, tag, target) = waiver_store();
    if blocking_flag(&base, &tag, &target) != "true" {
        return Err("unwaived hwrq without testcase is not blocking".into());
    }
    let mut runner = TestRunner::new(PropConfig {
        cases: 64,
        failure_persistence: None,
        ..PropConfig::default()
    });
    runner
        .run(&prop::collection::vec(any_state(), 0..8), |walk| {
            let mut s = base.clone();
            let w = s.post_item(RmtItem::config_waiver("Waived corner", &tag, &target)).unwrap();
            for to in walk {
                let _ = s.set_review_state(&w, to);
                let state = s.get(&w).unwrap().state;
                let want = if state == ReviewState::Approved { "false" } else { "true" };
                prop_assert_eq!(blocking_flag(&s, &tag, &target), want, "waiver {:?}", state);
            }
            Ok(())
        })
        .map_err(|e| format!("waiver walk: {e}"))?;

    let mut s = base;
    let w = s.post_item(RmtItem::config_waiver("Waived corner", &tag, &target)).unwrap();
    s.set_review_state(&w, ReviewState::InReview).unwrap();
    let before = blocking_flag(&s, &tag, &target);
    s.set_review_state(&w, ReviewState::Approved).unwrap();
    let after = blocking_flag(&s, &tag, &target);
    if (before.as_str(), after.as_str()) != ("true", "false") {
        return Err(format!("approval flips blocking {before} -> {after}"));
    }
    Ok("only draft->in_review, in_review->approved, in_review->draft succeed; approval clears blocking".into())
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 configuration sweep", criterion_sweep),
        ("2 ECC capability", criterion_capability),
        ("3 SECDED construction", criterion_construction),
        ("4 mutation visibility", criterion_mutations),
        ("5 traceability closure", criterion_closure),
        ("6 determinism", criterion_determinism),
        ("7 rollup oracle", criterion_rollup),
        ("8 review and waiver state machine", criterion_state_machine),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
