use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::xml::{self, a, Element, XmlError, XmlWriter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        }
    }

    pub fn of(passed: bool) -> Self {
        if passed {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

impl FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pass" => Ok(Verdict::Pass),
            "fail" => Ok(Verdict::Fail),
            _ => Err(format!("`{s}` is not a verdict")),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    /// `chk.<test>.<check>`
    pub name: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub test: String,
    pub index: u32,
    /// Sim runs only.
    pub seed: Option<u64>,
    pub verdict: Verdict,
    pub checks: Vec<CheckResult>,
    /// `cov.<test>.<point>.<bin>`, sorted.
    pub hits: BTreeSet<String>,
    /// Present iff the run failed.
    pub log: Option<String>,
}

impl RunResult {
    /// Builds a run whose verdict and log follow from `checks`.
    pub fn from_checks(
        test: &str,
        index: u32,
        seed: Option<u64>,
        checks: Vec<CheckResult>,
        hits: BTreeSet<String>,
        details: &[String],
    ) -> Self {
        let failed: Vec<&CheckResult> = checks
            .iter()
            .filter(|c| c.verdict == Verdict::Fail)
            .collect();
        let log = (!failed.is_empty()).then(|| {
            let mut log = format!("test {test} run {index}");
            if let Some(s) = seed {
                log.push_str(&format!(" seed {s}"));
            }
            log.push('\n');
            for c in &failed {
                log.push_str(&format!("FAIL {}\n", c.name));
            }
            for d in details {
                log.push_str(d);
                log.push('\n');
            }
            log
        });
        RunResult {
            test: test.to_string(),
            index,
            seed,
            verdict: Verdict::of(failed.is_empty()),
            checks,
            hits,
            log,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionResult {
    pub name: String,
    pub config_tag: String,
    pub seed: u64,
    /// Sorted by `(test, index)`.
    pub runs: Vec<RunResult>,
    /// Every coverage bin declared by the executed tests.
    pub declared_bins: BTreeSet<String>,
    pub unmapped: Option<usize>,
}

impl SessionResult {
    pub fn run_count(&self) -> usize {
        self.runs.len()
    }

    pub fn fail_count(&self) -> usize {
        self.runs
            .iter()
            .filter(|r| r.verdict == Verdict::Fail)
            .count()
    }

    pub fn failing_runs(&self) -> impl Iterator<Item = &RunResult> {
        self.runs.iter().filter(|r| r.verdict == Verdict::Fail)
    }

    pub fn to_xml(&self) -> String {
        let mut w = XmlWriter::new();
        let mut attrs = vec![
            a("name", self.name.as_str()),
            a("config_tag", self.config_tag.as_str()),
            a("seed", self.seed.to_string()),
            a("runs", self.run_count().to_string()),
            a("fails", self.fail_count().to_string()),
        ];
        if let Some(u) = self.unmapped {
            attrs.push(a("unmapped", u.to_string()));
        }
        w.open("session-result", &attrs);
        for bin in &self.declared_bins {
            w.empty("declared", &[a("name", bin.as_str())]);
        }
        for run in &self.runs {
            let mut attrs = vec![
                a("test", run.test.as_str()),
                a("index", run.index.to_string()),
            ];
            if let Some(s) = run.seed {
                attrs.push(a("seed", s.to_string()));
            }
            attrs.push(a("verdict", run.verdict.as_str()));
            w.open("run", &attrs);
            for c in &run.checks {
                w.empty(
                    "check",
                    &[a("name", c.name.as_str()), a("verdict", c.verdict.as_str())],
                );
            }
            for h in &run.hits {
                w.empty("hit", &[a("name", h.as_str())]);
            }
            if let Some(log) = &run.log {
                w.leaf("log", &[], log);
            }
            w.close("run");
        }
        w.close("session-result");
        w.finish()
    }

    pub fn from_xml(text: &str) -> Result<Self, XmlError> {
        let root = xml::parse(text)?;
        root.expect_name("session-result")?;
        let verdict = |el: &Element| -> Result<Verdict, XmlError> {
            let v = el.req_attr("verdict")?;
            v.parse().map_err(|_| el.invalid("verdict", v))
        };
        let mut runs = Vec::new();
        for r in root.children_named("run") {
            let checks = r
                .children_named("check")
                .map(|c| {
                    Ok(CheckResult {
                        name: c.req_attr("name")?.to_string(),
                        verdict: verdict(c)?,
                    })
                })
                .collect::<Result<Vec<_>, XmlError>>()?;
            let hits = r
                .children_named("hit")
                .map(|h| h.req_attr("name").map(str::to_string))
                .collect::<Result<BTreeSet<_>, _>>()?;
            runs.push(RunResult {
                test: r.req_attr("test")?.to_string(),
                index: r.parse_attr("index")?,
                seed: match r.attr("seed") {
                    Some(_) => Some(r.parse_attr("seed")?),
                    None => None,
                },
                verdict: verdict(r)?,
                checks,
                hits,
                log: r.child_text("log").map(str::to_string),
            });
        }
        let declared_bins = root
            .children_named("declared")
            .map(|d| d.req_attr("name").map(str::to_string))
            .collect::<Result<BTreeSet<_>, _>>()?;
        let session = SessionResult {
            name: root.req_attr("name")?.to_string(),
            config_tag: root.req_attr("config_tag")?.to_string(),
            seed: root.parse_attr("seed")?,
            runs,
            declared_bins,
            unmapped: match root.attr("unmapped") {
                Some(_) => Some(root.parse_attr("unmapped")?),
                None => None,
            },
        };
        let (runs, fails): (usize, usize) = (root.parse_attr("runs")?, root.parse_attr("fails")?);
        if runs != session.run_count() || fails != session.fail_count() {
            return Err(root.invalid("aggregates", &format!("{runs}/{fails}")));
        }
        Ok(session)
    }
}
