use std::collections::{BTreeMap, BTreeSet};

use super::{MappingPattern, Pct, PlanItem, Rollup, VPlan};
use crate::regression::{SessionResult, Verdict};
use crate::rmt::{ItemKind, TestStatus};

struct Entities<'a> {
    /// name -> any emission failed
    checks: BTreeMap<&'a str, bool>,
    declared: &'a BTreeSet<String>,
    hits: BTreeSet<&'a str>,
    /// every distinct name, pre-split
    all: BTreeMap<&'a str, Vec<&'a str>>,
}

impl<'a> Entities<'a> {
    fn of(session: &'a SessionResult) -> Self {
        let mut checks: BTreeMap<&str, bool> = BTreeMap::new();
        let mut hits = BTreeSet::new();
        for run in &session.runs {
            for c in &run.checks {
                *checks.entry(c.name.as_str()).or_default() |= c.verdict == Verdict::Fail;
            }
            hits.extend(run.hits.iter().map(String::as_str));
        }
        let all = checks
            .keys()
            .copied()
            .chain(session.declared_bins.iter().map(String::as_str))
            .chain(hits.iter().copied())
            .map(|n| (n, n.split('.').collect()))
            .collect();
        Entities {
            checks,
            declared: &session.declared_bins,
            hits,
            all,
        }
    }
}

fn any_match(patterns: &[MappingPattern], segs: &[&str]) -> bool {
    patterns.iter().any(|p| p.matches_segments(segs))
}

fn testcase_rollup(item: &PlanItem, ent: &Entities<'_>) -> Rollup {
    let matched: Vec<&str> = ent
        .all
        .iter()
        .filter(|(_, segs)| any_match(&item.patterns, segs))
        .map(|(n, _)| *n)
        .collect();
    let mut checks = 0;
    let mut failed = false;
    let mut declared = 0u128;
    let mut hit = 0u128;
    for name in &matched {
        if let Some(f) = ent.checks.get(name) {
            checks += 1;
            failed |= *f;
        }
        if ent.declared.contains(*name) {
            declared += 1;
            if ent.hits.contains(name) {
                hit += 1;
            }
        }
    }
    let status = match (checks, failed) {
        (0, _) => TestStatus::NotRun,
        (_, true) => TestStatus::Fail,
        _ => TestStatus::Pass,
    };
    let (coverage, no_bins) = if declared == 0 {
        (Pct::from_integer(100), true)
    } else {
        (Pct::new(100 * hit, declared), false)
    };
    Rollup {
        status,
        coverage,
        matched: matched.len(),
        no_bins,
    }
}

/// Worst-of status and mean coverage over verifying testcases. An hwrq
/// without any is `not_run` at 0 %.
fn hwrq_rollup(item: &PlanItem, tcs: &BTreeMap<&str, &Rollup>) -> Rollup {
    let parts: Vec<&Rollup> = item
        .verified_by
        .iter()
        .filter_map(|id| tcs.get(id.as_str()).copied())
        .collect();
    if parts.is_empty() {
        return Rollup {
            status: TestStatus::NotRun,
            coverage: Pct::from_integer(0),
            matched: 0,
            no_bins: true,
        };
    }
    let status = parts
        .iter()
        .map(|r| r.status)
        .min_by_key(|s| s.rank())
        .expect("non-empty");
    let sum: Pct = parts.iter().map(|r| r.coverage).sum();
    Rollup {
        status,
        coverage: sum / Pct::from_integer(parts.len() as u128),
        matched: parts.iter().map(|r| r.matched).sum(),
        no_bins: parts.iter().all(|r| r.no_bins),
    }
}

/// Rolls `session` up onto a copy of `plan`. Waiver items carry no rollup.
pub fn rollup(plan: &VPlan, session: &SessionResult) -> VPlan {
    let ent = Entities::of(session);
    let mut out = plan.clone();
    for tc in &mut out.testcases {
        tc.rollup = Some(testcase_rollup(tc, &ent));
    }
    let tcs: BTreeMap<&str, &Rollup> = out
        .testcases
        .iter()
        .map(|t| (t.id.as_str(), t.rollup.as_ref().expect("just set")))
        .collect();
    let hw: Vec<Option<Rollup>> = out
        .requirements
        .iter()
        .map(|r| (r.kind == ItemKind::Hwrq).then(|| hwrq_rollup(r, &tcs)))
        .collect();
    for (item, r) in out.requirements.iter_mut().zip(hw) {
        item.rollup = r;
    }
    let unmapped = ent
        .all
        .values()
        .filter(|segs| !out.testcases.iter().any(|t| any_match(&t.patterns, segs)))
        .count();
    out.unmapped = Some(unmapped);
    out
}

/// One decimal place, rounding half up on the exact value.
pub fn format_pct(p: &Pct) -> String {
    let tenths = (p.numer() * 20 + p.denom()) / (2 * p.denom());
    format!("{}.{}", tenths / 10, tenths % 10)
}
