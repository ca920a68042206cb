//! Verification plan built from an ipvs export, mapped onto run entities
//! and rolled up into per-item status and coverage.

mod pattern;
mod rollup;

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use thiserror::Error;

use crate::rmt::{ItemKind, RelKind, ReviewState, TestStatus};
use crate::xml::{self, a, Element, XmlError, XmlWriter};

pub use pattern::{is_entity_name, MappingPattern};
pub use rollup::{format_pct, rollup};

/// Exact percentage in `[0, 100]`.
pub type Pct = Ratio<u128>;

#[derive(Debug, Error)]
pub enum VPlanError {
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error("duplicate item id `{0}`")]
    DuplicateId(String),
    #[error("unknown plan item `{0}`")]
    UnknownItem(String),
    #[error("malformed pattern `{pattern}`: {reason}")]
    MalformedPattern { pattern: String, reason: String },
    #[error("mapping patterns attach to testcases only; `{0}` is not one")]
    NotTestcase(String),
    #[error("schema: {0}")]
    Schema(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rollup {
    pub status: TestStatus,
    pub coverage: Pct,
    /// Distinct entities matched by the item's patterns (summed over
    /// testcases for an hwrq).
    pub matched: usize,
    /// No declared bin matched; coverage holds the convention value.
    pub no_bins: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanItem {
    pub id: String,
    pub kind: ItemKind,
    pub title: String,
    pub state: ReviewState,
    /// Sorted, no duplicates.
    pub patterns: Vec<MappingPattern>,
    /// hwrq: ids of verifying testcases.
    pub verified_by: Vec<String>,
    /// hwrq: `(waiver id, waiver state)`.
    pub waivers: Vec<(String, ReviewState)>,
    /// waiver: the waived hwrq.
    pub target: Option<String>,
    pub rollup: Option<Rollup>,
}

impl PlanItem {
    fn new(id: &str, kind: ItemKind, title: &str, state: ReviewState) -> Self {
        PlanItem {
            id: id.to_string(),
            kind,
            title: title.to_string(),
            state,
            patterns: Vec::new(),
            verified_by: Vec::new(),
            waivers: Vec::new(),
            target: None,
            rollup: None,
        }
    }

    pub fn has_approved_waiver(&self) -> bool {
        self.waivers.iter().any(|(_, s)| *s == ReviewState::Approved)
    }

    /// An hwrq with no verifying testcase and no approved waiver.
    pub fn is_blocking(&self) -> bool {
        self.kind == ItemKind::Hwrq && self.verified_by.is_empty() && !self.has_approved_waiver()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VPlan {
    pub config_tag: String,
    /// hwrqs and waivers, sorted by id.
    pub requirements: Vec<PlanItem>,
    /// Sorted by id.
    pub testcases: Vec<PlanItem>,
    /// Session entities no pattern matched; set by [`rollup`].
    pub unmapped: Option<usize>,
}

impl VPlan {
    pub fn items(&self) -> impl Iterator<Item = &PlanItem> {
        self.requirements.iter().chain(&self.testcases)
    }

    pub fn item(&self, id: &str) -> Option<&PlanItem> {
        find(&self.requirements, id).or_else(|| find(&self.testcases, id))
    }

    pub fn hwrqs(&self) -> impl Iterator<Item = &PlanItem> {
        self.requirements.iter().filter(|i| i.kind == ItemKind::Hwrq)
    }

    pub fn add_mapping_pattern(&mut self, item_id: &str, pattern: &str) -> Result<(), VPlanError> {
        let pattern: MappingPattern = pattern.parse()?;
        if find(&self.requirements, item_id).is_some() {
            return Err(VPlanError::NotTestcase(item_id.to_string()));
        }
        let item = self
            .testcases
            .iter_mut()
            .find(|i| i.id == item_id)
            .ok_or_else(|| VPlanError::UnknownItem(item_id.to_string()))?;
        if let Err(pos) = item.patterns.binary_search(&pattern) {
            item.patterns.insert(pos, pattern);
        }
        Ok(())
    }

    /// Gives every testcase without patterns `chk.T.**` and `cov.T.**`.
    pub fn auto_map(&mut self) {
        let ids: Vec<String> = self
            .testcases
            .iter()
            .filter(|i| i.patterns.is_empty())
            .map(|i| i.id.clone())
            .collect();
        for id in ids {
            for ns in ["chk", "cov"] {
                self.add_mapping_pattern(&id, &format!("{ns}.{id}.**"))
                    .expect("testcase ids form valid segments");
            }
        }
    }

    pub fn to_xml(&self) -> String {
        let mut w = XmlWriter::new();
        let mut attrs = vec![a("config_tag", self.config_tag.as_str())];
        if let Some(u) = self.unmapped {
            attrs.push(a("unmapped", u.to_string()));
        }
        w.open("vplan", &attrs);
        for (name, items) in [("requirements", &self.requirements), ("testcases", &self.testcases)] {
            w.open("section", &[a("name", name)]);
            for item in items {
                write_item(&mut w, item);
            }
            w.close("section");
        }
        w.close("vplan");
        w.finish()
    }

    pub fn from_xml(text: &str) -> Result<Self, VPlanError> {
        let root = xml::parse(text)?;
        root.expect_name("vplan")?;
        let mut plan = VPlan {
            config_tag: root.req_attr("config_tag")?.to_string(),
            unmapped: match root.attr("unmapped") {
                Some(_) => Some(root.parse_attr("unmapped")?),
                None => None,
            },
            ..VPlan::default()
        };
        let mut seen = BTreeSet::new();
        for section in root.children_named("section") {
            let items = match section.req_attr("name")? {
                "requirements" => &mut plan.requirements,
                "testcases" => &mut plan.testcases,
                other => return Err(VPlanError::Schema(format!("unknown section `{other}`"))),
            };
            for el in section.children_named("item") {
                let item = read_item(el)?;
                if !seen.insert(item.id.clone()) {
                    return Err(VPlanError::DuplicateId(item.id));
                }
                items.push(item);
            }
        }
        Ok(plan)
    }
}

fn find<'a>(items: &'a [PlanItem], id: &str) -> Option<&'a PlanItem> {
    items
        .binary_search_by(|i| i.id.as_str().cmp(id))
        .ok()
        .map(|k| &items[k])
}

fn write_item(w: &mut XmlWriter, item: &PlanItem) {
    w.open(
        "item",
        &[
            a("id", item.id.as_str()),
            a("kind", item.kind.as_str()),
            a("state", item.state.as_str()),
        ],
    );
    w.leaf("title", &[], &item.title);
    for p in &item.patterns {
        w.empty("map", &[a("pattern", p.as_str())]);
    }
    for tc in &item.verified_by {
        w.empty("verified-by", &[a("id", tc.as_str())]);
    }
    for (id, state) in &item.waivers {
        w.empty("waiver", &[a("id", id.as_str()), a("state", state.as_str())]);
    }
    if let Some(t) = &item.target {
        w.empty("target", &[a("id", t.as_str())]);
    }
    if let Some(r) = &item.rollup {
        w.empty(
            "rollup",
            &[
                a("status", r.status.as_str()),
                a("coverage", format!("{}/{}", r.coverage.numer(), r.coverage.denom())),
                a("matched", r.matched.to_string()),
                a("no_bins", r.no_bins.to_string()),
            ],
        );
    }
    w.close("item");
}

fn enum_attr<T: std::str::FromStr>(el: &Element, key: &str) -> Result<T, XmlError> {
    let v = el.req_attr(key)?;
    v.parse().map_err(|_| el.invalid(key, v))
}

fn read_item(el: &Element) -> Result<PlanItem, VPlanError> {
    let mut item = PlanItem::new(
        el.req_attr("id")?,
        enum_attr(el, "kind")?,
        el.child_text("title").unwrap_or_default(),
        enum_attr(el, "state")?,
    );
    for m in el.children_named("map") {
        let p: MappingPattern = m.req_attr("pattern")?.parse()?;
        if let Err(pos) = item.patterns.binary_search(&p) {
            item.patterns.insert(pos, p);
        }
    }
    for v in el.children_named("verified-by") {
        item.verified_by.push(v.req_attr("id")?.to_string());
    }
    for v in el.children_named("waiver") {
        item.waivers
            .push((v.req_attr("id")?.to_string(), enum_attr(v, "state")?));
    }
    if let Some(t) = el.child("target") {
        item.target = Some(t.req_attr("id")?.to_string());
    }
    if let Some(r) = el.child("rollup") {
        let cov = r.req_attr("coverage")?;
        let coverage = cov
            .split_once('/')
            .and_then(|(n, d)| Some(Pct::new(n.parse().ok()?, d.parse().ok()?)))
            .ok_or_else(|| r.invalid("coverage", cov))?;
        item.rollup = Some(Rollup {
            status: enum_attr(r, "status")?,
            coverage,
            matched: r.parse_attr("matched")?,
            no_bins: r.parse_attr("no_bins")?,
        });
    }
    Ok(item)
}

/// One plan item per ipvs item, grouped into sections and sorted by id.
/// No mapping patterns are attached.
pub fn build_vplan(ipvs: &str) -> Result<VPlan, VPlanError> {
    let root = xml::parse(ipvs)?;
    root.expect_name("ipvs")?;
    let mut items: BTreeMap<String, PlanItem> = BTreeMap::new();
    for el in root.children_named("item") {
        let item = PlanItem::new(
            el.req_attr("id")?,
            enum_attr(el, "kind")?,
            el.child_text("title")
                .ok_or_else(|| XmlError::MissingChild {
                    element: "item".into(),
                    child: "title".into(),
                })?,
            enum_attr(el, "state")?,
        );
        if items.contains_key(&item.id) {
            return Err(VPlanError::DuplicateId(item.id));
        }
        items.insert(item.id.clone(), item);
    }
    for el in root.children_named("rel") {
        let (from, to) = (el.req_attr("from")?, el.req_attr("to")?);
        let kind: RelKind = enum_attr(el, "kind")?;
        let kind_of = |id: &str| {
            items
                .get(id)
                .map(|i| i.kind)
                .ok_or_else(|| VPlanError::Schema(format!("relationship endpoint `{id}` not in export")))
        };
        match (kind, kind_of(from)?, kind_of(to)?) {
            (RelKind::Verifies, ItemKind::Testcase, ItemKind::Hwrq) => {
                items.get_mut(to).unwrap().verified_by.push(from.to_string());
            }
            (RelKind::Waives, ItemKind::Waiver, ItemKind::Hwrq) => {
                let state = items[from].state;
                items.get_mut(to).unwrap().waivers.push((from.to_string(), state));
                items.get_mut(from).unwrap().target = Some(to.to_string());
            }
            (k, f, t) => {
                return Err(VPlanError::Schema(format!(
                    "unexpected {k} relationship {f} `{from}` -> {t} `{to}`"
                )))
            }
        }
    }
    let mut plan = VPlan {
        config_tag: root.req_attr("config_tag")?.to_string(),
        ..VPlan::default()
    };
    for (_, mut item) in items {
        item.verified_by.sort();
        item.verified_by.dedup();
        item.waivers.sort();
        item.waivers.dedup();
        match item.kind {
            ItemKind::Testcase => plan.testcases.push(item),
            _ => plan.requirements.push(item),
        }
    }
    Ok(plan)
}
