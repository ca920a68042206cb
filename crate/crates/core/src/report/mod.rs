//! HTML vPlan report, XML RMT report, archiving, and pushing statuses back
//! into the store.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::rmt::http::{Client, ClientError};
use crate::rmt::{ItemKind, ReviewState, RmtError, SharedStore, TestStatus};
use crate::vplan::{format_pct, PlanItem, VPlan};
use crate::xml::{self, a, XmlError, XmlWriter};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("archive: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error(transparent)]
    Rmt(#[from] RmtError),
    #[error("store endpoint: {0}")]
    Client(#[from] ClientError),
    #[error("report: {0}")]
    Invalid(String),
}

/// Optional provenance for reports. Off by default so that reports are
/// byte-for-byte reproducible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stamp {
    pub timestamp: String,
    pub host: String,
}

impl Stamp {
    pub fn now() -> Self {
        Stamp {
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            host: gethostname::gethostname().to_string_lossy().into_owned(),
        }
    }
}

fn html_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn status_of(item: &PlanItem) -> Option<TestStatus> {
    item.rollup.as_ref().map(|r| r.status)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Totals {
    pub items: usize,
    pub hwrq: usize,
    pub testcase: usize,
    pub waiver: usize,
    pub pass: usize,
    pub fail: usize,
    pub not_run: usize,
    pub blocking: usize,
}

pub fn totals(plan: &VPlan) -> Totals {
    let mut t = Totals::default();
    for item in plan.items() {
        t.items += 1;
        match item.kind {
            ItemKind::Hwrq => t.hwrq += 1,
            ItemKind::Testcase => t.testcase += 1,
            ItemKind::Waiver => t.waiver += 1,
        }
        match status_of(item) {
            Some(TestStatus::Pass) => t.pass += 1,
            Some(TestStatus::Fail) => t.fail += 1,
            Some(TestStatus::NotRun) => t.not_run += 1,
            None => {}
        }
        if item.is_blocking() {
            t.blocking += 1;
        }
    }
    t
}

/// Static HTML with one table row per plan item; each row's element id is
/// the item id.
pub fn emit_vplan_html(plan: &VPlan, stamp: Option<&Stamp>) -> String {
    let t = totals(plan);
    let tag = html_escape(&plan.config_tag);
    let mut h = String::new();
    h.push_str("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n");
    writeln!(h, "<title>vPlan {tag}</title>").unwrap();
    h.push_str("<style>td,th{border:1px solid #999;padding:2px 6px}table{border-collapse:collapse}.fail{color:#b00}.pass{color:#070}</style>\n");
    h.push_str("</head>\n<body>\n");
    writeln!(h, "<h1>vPlan {tag}</h1>").unwrap();
    writeln!(
        h,
        "<p id=\"totals\">items {} | hwrq {} | testcases {} | waivers {} | pass {} | fail {} | not_run {} | blocking {} | unmapped {}</p>",
        t.items,
        t.hwrq,
        t.testcase,
        t.waiver,
        t.pass,
        t.fail,
        t.not_run,
        t.blocking,
        plan.unmapped.map_or("-".to_string(), |u| u.to_string())
    )
    .unwrap();
    if let Some(s) = stamp {
        writeln!(
            h,
            "<p id=\"stamp\">generated {} on {}</p>",
            html_escape(&s.timestamp),
            html_escape(&s.host)
        )
        .unwrap();
    }
    h.push_str("<table>\n<tr><th>id</th><th>kind</th><th>title</th><th>state</th><th>status</th><th>coverage</th><th>matched</th><th>mapping</th><th>links</th></tr>\n");
    for item in plan.items() {
        let (status, cov, matched) = match &item.rollup {
            Some(r) => (
                r.status.as_str(),
                if r.no_bins {
                    format!("{} (no bins)", format_pct(&r.coverage))
                } else {
                    format_pct(&r.coverage)
                },
                r.matched.to_string(),
            ),
            None => ("-", "-".to_string(), "-".to_string()),
        };
        let mapping: Vec<String> = item.patterns.iter().map(|p| html_escape(p.as_str())).collect();
        let mut links: Vec<String> = item
            .verified_by
            .iter()
            .map(|id| format!("<a href=\"#{0}\">{0}</a>", html_escape(id)))
            .collect();
        links.extend(
            item.waivers
                .iter()
                .map(|(id, s)| format!("<a href=\"#{0}\">{0}</a> ({1})", html_escape(id), s.as_str())),
        );
        if let Some(t) = &item.target {
            links.push(format!("waives <a href=\"#{0}\">{0}</a>", html_escape(t)));
        }
        if item.is_blocking() {
            links.push("<b>blocking</b>".to_string());
        }
        writeln!(
            h,
            "<tr id=\"{id}\"><td>{id}</td><td>{kind}</td><td>{title}</td><td>{state}</td><td class=\"{status}\">{status}</td><td>{cov}</td><td>{matched}</td><td>{map}</td><td>{links}</td></tr>",
            id = html_escape(&item.id),
            kind = item.kind.as_str(),
            title = html_escape(&item.title),
            state = item.state.as_str(),
            map = mapping.join("<br>"),
            links = links.join(" "),
        )
        .unwrap();
    }
    h.push_str("</table>\n</body>\n</html>\n");
    h
}

/// Path the report for `(config_tag, session)` is archived under.
pub fn archive_path(archive_dir: &Path, config_tag: &str, session: &str) -> PathBuf {
    archive_dir.join(config_tag).join(session).join("vplan.html")
}

/// Stores `html` at `<archive_dir>/<config_tag>/<session>/vplan.html`,
/// overwriting, and returns its `file:` URI.
pub fn archive_report(
    html: &str,
    archive_dir: &Path,
    config_tag: &str,
    session: &str,
) -> Result<String, ReportError> {
    let path = archive_path(archive_dir, config_tag, session);
    let parent = path.parent().expect("has parent");
    fs::create_dir_all(parent)?;
    let abs = fs::canonicalize(parent)?.join("vplan.html");
    let tmp = abs.with_extension("html.tmp");
    fs::write(&tmp, html)?;
    fs::rename(&tmp, &abs)?;
    url::Url::from_file_path(&abs)
        .map(|u| u.to_string())
        .map_err(|_| ReportError::Invalid(format!("no file URI for {}", abs.display())))
}

/// Resolves a `file:` link to a local path.
pub fn resolve_link(link: &str) -> Option<PathBuf> {
    url::Url::parse(link).ok()?.to_file_path().ok()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestcaseRow {
    pub id: String,
    pub status: TestStatus,
    /// One decimal place.
    pub coverage: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HwrqRow {
    pub id: String,
    pub status: TestStatus,
    pub blocking: bool,
    /// Most advanced review state among the hwrq's waivers.
    pub waiver: Option<ReviewState>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RmtReport {
    pub session: String,
    pub config_tag: String,
    pub archive: String,
    pub testcases: Vec<TestcaseRow>,
    pub hwrqs: Vec<HwrqRow>,
    pub stamp: Option<Stamp>,
}

impl RmtReport {
    pub fn from_plan(plan: &VPlan, session: &str, archive_link: &str) -> Self {
        let mut testcases: Vec<TestcaseRow> = plan
            .testcases
            .iter()
            .map(|i| TestcaseRow {
                id: i.id.clone(),
                status: status_of(i).unwrap_or(TestStatus::NotRun),
                coverage: i.rollup.as_ref().map_or("0.0".into(), |r| format_pct(&r.coverage)),
            })
            .collect();
        let mut hwrqs: Vec<HwrqRow> = plan
            .hwrqs()
            .map(|i| HwrqRow {
                id: i.id.clone(),
                status: status_of(i).unwrap_or(TestStatus::NotRun),
                blocking: i.is_blocking(),
                waiver: i.waivers.iter().map(|(_, s)| *s).max(),
            })
            .collect();
        testcases.sort_by(|a, b| a.id.cmp(&b.id));
        hwrqs.sort_by(|a, b| a.id.cmp(&b.id));
        RmtReport {
            session: session.to_string(),
            config_tag: plan.config_tag.clone(),
            archive: archive_link.to_string(),
            testcases,
            hwrqs,
            stamp: None,
        }
    }

    pub fn to_xml(&self) -> String {
        let mut w = XmlWriter::new();
        let mut attrs = vec![
            a("session", self.session.as_str()),
            a("config_tag", self.config_tag.as_str()),
            a("archive", self.archive.as_str()),
        ];
        if let Some(s) = &self.stamp {
            attrs.push(a("generated", s.timestamp.as_str()));
            attrs.push(a("host", s.host.as_str()));
        }
        w.open("rmt-report", &attrs);
        for r in &self.testcases {
            w.empty(
                "testcase",
                &[
                    a("id", r.id.as_str()),
                    a("status", r.status.as_str()),
                    a("coverage", r.coverage.as_str()),
                ],
            );
        }
        for r in &self.hwrqs {
            let mut attrs = vec![
                a("id", r.id.as_str()),
                a("status", r.status.as_str()),
                a("blocking", if r.blocking { "true" } else { "false" }),
            ];
            if let Some(s) = r.waiver {
                attrs.push(a("waiver", s.as_str()));
            }
            w.empty("hwrq", &attrs);
        }
        w.close("rmt-report");
        w.finish()
    }

    pub fn from_xml(text: &str) -> Result<Self, ReportError> {
        let root = xml::parse(text)?;
        root.expect_name("rmt-report")?;
        let enum_attr = |el: &xml::Element, key: &str| -> Result<TestStatus, ReportError> {
            let v = el.req_attr(key)?;
            v.parse().map_err(|_| ReportError::Xml(el.invalid(key, v)))
        };
        let mut testcases = Vec::new();
        for el in root.children_named("testcase") {
            let coverage = el.req_attr("coverage")?.to_string();
            let ok = coverage
                .parse::<f64>()
                .is_ok_and(|c| (0.0..=100.0).contains(&c));
            if !ok {
                return Err(ReportError::Xml(el.invalid("coverage", &coverage)));
            }
            testcases.push(TestcaseRow {
                id: el.req_attr("id")?.to_string(),
                status: enum_attr(el, "status")?,
                coverage,
            });
        }
        let mut hwrqs = Vec::new();
        for el in root.children_named("hwrq") {
            let blocking = el.req_attr("blocking")?;
            hwrqs.push(HwrqRow {
                id: el.req_attr("id")?.to_string(),
                status: enum_attr(el, "status")?,
                blocking: blocking
                    .parse()
                    .map_err(|_| ReportError::Xml(el.invalid("blocking", blocking)))?,
                waiver: match el.attr("waiver") {
                    Some(w) => Some(w.parse()?),
                    None => None,
                },
            });
        }
        let stamp = match (root.attr("generated"), root.attr("host")) {
            (Some(t), Some(h)) => Some(Stamp {
                timestamp: t.to_string(),
                host: h.to_string(),
            }),
            _ => None,
        };
        Ok(RmtReport {
            session: root.req_attr("session")?.to_string(),
            config_tag: root.req_attr("config_tag")?.to_string(),
            archive: root.req_attr("archive")?.to_string(),
            testcases,
            hwrqs,
            stamp,
        })
    }
}

/// The XML RMT report for a rolled-up plan.
pub fn emit_rmt_xml(plan: &VPlan, session: &str, archive_link: &str, stamp: Option<&Stamp>) -> String {
    let mut report = RmtReport::from_plan(plan, session, archive_link);
    report.stamp = stamp.cloned();
    report.to_xml()
}

/// Where [`push_results`] applies testcase rows.
#[derive(Debug, Clone, Copy)]
pub enum Endpoint<'a> {
    InProcess(&'a SharedStore),
    Http(&'a Client),
}

fn coverage_value(row: &TestcaseRow) -> Result<f64, ReportError> {
    row.coverage
        .parse()
        .map_err(|_| ReportError::Invalid(format!("coverage `{}` of {}", row.coverage, row.id)))
}

/// Applies every testcase row of `rmt_xml` via `update_test_status`, with
/// the report's archive link. All rows are validated before any is applied.
/// Returns the number of rows applied.
pub fn push_results(rmt_xml: &str, endpoint: Endpoint<'_>) -> Result<usize, ReportError> {
    let report = RmtReport::from_xml(rmt_xml)?;
    let rows: Vec<(&TestcaseRow, f64)> = report
        .testcases
        .iter()
        .map(|r| Ok((r, coverage_value(r)?)))
        .collect::<Result<_, ReportError>>()?;
    match endpoint {
        Endpoint::InProcess(store) => store.write(|s| {
            for (row, cov) in &rows {
                s.check_test_status(&row.id, *cov)?;
            }
            for (row, cov) in &rows {
                s.update_test_status(&row.id, row.status, *cov, &report.archive)?;
            }
            Ok(())
        })?,
        Endpoint::Http(client) => {
            for (row, _) in &rows {
                let item = client
                    .get_item(&row.id)?
                    .ok_or_else(|| RmtError::UnknownId(row.id.clone()))?;
                if item.kind != ItemKind::Testcase || !item.is_subset() {
                    return Err(RmtError::FieldMismatch(format!("`{}` is not a subset testcase", row.id)).into());
                }
            }
            for (row, cov) in &rows {
                client.update_test_status(&row.id, row.status, *cov, &report.archive)?;
            }
        }
    }
    Ok(rows.len())
}
