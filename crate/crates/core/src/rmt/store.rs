use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::{
    ItemKind, KindCounts, RelKind, Relationship, ReviewState, RmtError, RmtItem, SubsetReport,
    TestResult, TestStatus,
};
use crate::configspec::{parse_predicate, IpConfiguration};

/// The requirements store. All maps are ordered so every export is
/// byte-deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Store {
    pub(super) items: BTreeMap<String, RmtItem>,
    pub(super) rels: BTreeSet<Relationship>,
    /// Next superset sequence number per id prefix.
    pub(super) next_seq: BTreeMap<ItemKind, u32>,
    /// config_tag -> canonical configuration text of every derivation.
    pub(super) derivations: BTreeMap<String, String>,
}

impl Store {
    pub fn new() -> Self {
        Store::default()
    }

    pub fn get(&self, id: &str) -> Option<&RmtItem> {
        self.items.get(id)
    }

    pub fn items(&self) -> impl Iterator<Item = &RmtItem> {
        self.items.values()
    }

    pub fn relationships(&self) -> impl Iterator<Item = &Relationship> {
        self.rels.iter()
    }

    pub fn config_tags(&self) -> impl Iterator<Item = &str> {
        self.derivations.keys().map(String::as_str)
    }

    pub fn derivation_config(&self, tag: &str) -> Option<&str> {
        self.derivations.get(tag).map(String::as_str)
    }

    /// Items filtered by kind and/or config tag (`Some("")` selects superset
    /// items).
    pub fn query(&self, kind: Option<ItemKind>, config_tag: Option<&str>) -> Vec<&RmtItem> {
        self.items
            .values()
            .filter(|i| kind.is_none_or(|k| i.kind == k))
            .filter(|i| match config_tag {
                None => true,
                Some("") => i.config_tag.is_none(),
                Some(t) => i.config_tag.as_deref() == Some(t),
            })
            .collect()
    }

    fn next_id(&mut self, kind: ItemKind) -> String {
        let seq = self.next_seq.entry(kind).or_insert(1);
        loop {
            let id = format!("{}-{:03}", kind.id_prefix(), *seq);
            *seq += 1;
            if !self.items.contains_key(&id) {
                return id;
            }
        }
    }

    fn check_shape(&self, item: &RmtItem) -> Result<(), RmtError> {
        let mismatch = |msg: &str| Err(RmtError::FieldMismatch(msg.to_string()));
        match (item.kind, item.domain) {
            (super::ItemKind::Testcase, None) => return mismatch("testcases need a domain"),
            (k, Some(_)) if k != ItemKind::Testcase => {
                return mismatch("only testcases carry a domain")
            }
            _ => {}
        }
        if (item.kind == ItemKind::Waiver) != item.target.is_some() {
            return mismatch("waivers, and only waivers, carry a target");
        }
        if item.result.is_some() {
            return mismatch("results are set through update_test_status");
        }
        match (&item.applicability, &item.origin, &item.config_tag) {
            (Some(src), None, None) => {
                parse_predicate(src)?;
            }
            (None, Some(_), Some(_)) => {
                return mismatch("subset items are created by derive_subset")
            }
            (None, None, Some(tag)) if item.kind == ItemKind::Waiver => {
                if !self.derivations.contains_key(tag) {
                    return Err(RmtError::UnknownConfigTag(tag.clone()));
                }
            }
            (Some(_), _, _) => return mismatch("superset items carry no origin or config_tag"),
            _ => return mismatch("item is neither a superset item nor a configuration waiver"),
        }
        if let Some(target) = &item.target {
            let t = self
                .items
                .get(target)
                .ok_or_else(|| RmtError::DanglingEndpoint(target.clone()))?;
            if t.kind != ItemKind::Hwrq {
                return Err(RmtError::KindViolation(format!("waiver target `{target}` is not an hwrq")));
            }
            if t.config_tag != item.config_tag {
                return Err(RmtError::KindViolation(format!(
                    "waiver target `{target}` belongs to a different configuration"
                )));
            }
        }
        Ok(())
    }

    /// Stores a new superset item or configuration waiver. Items start in
    /// `draft`; an empty id is assigned from the `HWRQ-/TC-/WVR-%03d` scheme.
    pub fn post_item(&mut self, mut item: RmtItem) -> Result<String, RmtError> {
        if item.state != ReviewState::Draft {
            return Err(RmtError::FieldMismatch("new items start in draft".into()));
        }
        if !item.id.is_empty() && self.items.contains_key(&item.id) {
            return Err(RmtError::DuplicateId(item.id));
        }
        if !item.id.is_empty() && !crate::configspec::is_identifier(&item.id) {
            return Err(RmtError::Validation(format!("`{}` is not a valid id", item.id)));
        }
        self.check_shape(&item)?;
        if item.id.is_empty() {
            item.id = self.next_id(item.kind);
        }
        item.history = vec![ReviewState::Draft];
        let id = item.id.clone();
        if let Some(target) = item.target.clone() {
            self.rels
                .insert(Relationship::new(&id, &target, RelKind::Waives));
        }
        self.items.insert(id.clone(), item);
        Ok(id)
    }

    fn check_relationship(&self, rel: &Relationship) -> Result<(), RmtError> {
        let from = self
            .items
            .get(&rel.from)
            .ok_or_else(|| RmtError::DanglingEndpoint(rel.from.clone()))?;
        let to = self
            .items
            .get(&rel.to)
            .ok_or_else(|| RmtError::DanglingEndpoint(rel.to.clone()))?;
        let violation = |msg: String| Err(RmtError::KindViolation(msg));
        match rel.kind {
            RelKind::Verifies => {
                if from.kind != ItemKind::Testcase || to.kind != ItemKind::Hwrq {
                    return violation(format!(
                        "verifies runs testcase -> hwrq, got {} -> {}",
                        from.kind, to.kind
                    ));
                }
                if from.config_tag != to.config_tag {
                    return violation("verifies must stay within one configuration".into());
                }
            }
            RelKind::DerivedFrom => {
                if from.origin.as_deref() != Some(rel.to.as_str()) {
                    return violation(format!("`{}` does not derive from `{}`", rel.from, rel.to));
                }
            }
            RelKind::Waives => {
                if from.kind != ItemKind::Waiver || to.kind != ItemKind::Hwrq {
                    return violation(format!(
                        "waives runs waiver -> hwrq, got {} -> {}",
                        from.kind, to.kind
                    ));
                }
                if from.target.as_deref() != Some(rel.to.as_str()) {
                    return violation(format!("`{}` targets a different hwrq", rel.from));
                }
            }
        }
        Ok(())
    }

    /// Idempotent on exact duplicates.
    pub fn post_relationship(&mut self, rel: Relationship) -> Result<(), RmtError> {
        self.check_relationship(&rel)?;
        self.rels.insert(rel);
        Ok(())
    }

    pub fn set_review_state(&mut self, id: &str, to: ReviewState) -> Result<(), RmtError> {
        let item = self
            .items
            .get_mut(id)
            .ok_or_else(|| RmtError::UnknownId(id.to_string()))?;
        if !item.state.can_move_to(to) {
            return Err(RmtError::IllegalTransition {
                id: id.to_string(),
                from: item.state,
                to,
            });
        }
        item.state = to;
        item.history.push(to);
        Ok(())
    }

    /// Creates the configuration-specific subset from approved superset
    /// items. Repeating a derivation with an unchanged superset creates
    /// nothing and returns the same report.
    pub fn derive_subset(&mut self, cfg: &IpConfiguration) -> Result<SubsetReport, RmtError> {
        let tag = cfg.config_tag();
        let approved: Vec<&RmtItem> = self
            .items
            .values()
            .filter(|i| i.is_superset() && i.state == ReviewState::Approved)
            .collect();
        if approved.is_empty() {
            return Err(RmtError::NoApprovedSuperset);
        }

        let mut selected: BTreeMap<String, RmtItem> = BTreeMap::new();
        let mut skipped = Vec::new();
        for item in &approved {
            let src = item.applicability.as_deref().unwrap_or_default();
            let pred = parse_predicate(src).map_err(|source| RmtError::CorruptPredicate {
                id: item.id.clone(),
                source,
            })?;
            if pred.eval(cfg) {
                selected.insert(item.id.clone(), (*item).clone());
            } else {
                skipped.push(item.id.clone());
            }
        }
        let subset_id = |origin: &str| format!("{tag}-{origin}");

        // waivers whose hwrq did not survive selection are dropped
        let orphaned: Vec<String> = selected
            .values()
            .filter(|i| {
                i.kind == ItemKind::Waiver
                    && !i.target.as_ref().is_some_and(|t| selected.contains_key(t))
            })
            .map(|i| i.id.clone())
            .collect();
        for id in orphaned {
            selected.remove(&id);
            skipped.push(id);
        }
        skipped.sort();

        let mut created = KindCounts::default();
        for (origin, src) in &selected {
            let id = subset_id(origin);
            if self.items.contains_key(&id) {
                continue;
            }
            let derived = RmtItem {
                id: id.clone(),
                kind: src.kind,
                title: src.title.clone(),
                text: src.text.clone(),
                domain: src.domain,
                applicability: None,
                state: src.state,
                history: vec![src.state],
                origin: Some(origin.clone()),
                config_tag: Some(tag.clone()),
                target: src.target.as_deref().map(subset_id),
                result: None,
            };
            created.bump(derived.kind);
            self.items.insert(id.clone(), derived);
            self.rels
                .insert(Relationship::new(&id, origin, RelKind::DerivedFrom));
        }

        let copied: Vec<Relationship> = self
            .rels
            .iter()
            .filter(|r| matches!(r.kind, RelKind::Verifies | RelKind::Waives))
            .filter(|r| selected.contains_key(&r.from) && selected.contains_key(&r.to))
            .map(|r| Relationship::new(&subset_id(&r.from), &subset_id(&r.to), r.kind))
            .collect();
        self.rels.extend(copied);
        self.derivations
            .insert(tag.clone(), cfg.to_canonical_text());

        let mut counts = KindCounts::default();
        let mut waiver_required = Vec::new();
        for origin in selected.keys() {
            let id = subset_id(origin);
            let item = &self.items[&id];
            counts.bump(item.kind);
            if item.kind == ItemKind::Hwrq && self.verifying_testcases(&id).is_empty() {
                waiver_required.push(id);
            }
        }
        Ok(SubsetReport {
            config_tag: tag,
            counts,
            created,
            waiver_required,
            skipped,
        })
    }

    /// Ids of testcases with a `verifies` edge into `hwrq`.
    pub fn verifying_testcases(&self, hwrq: &str) -> Vec<&str> {
        self.rels
            .iter()
            .filter(|r| r.kind == RelKind::Verifies && r.to == hwrq)
            .map(|r| r.from.as_str())
            .collect()
    }

    pub fn waivers_for(&self, hwrq: &str) -> Vec<&RmtItem> {
        self.rels
            .iter()
            .filter(|r| r.kind == RelKind::Waives && r.to == hwrq)
            .filter_map(|r| self.items.get(&r.from))
            .collect()
    }

    fn subset_testcase_mut(&mut self, id: &str) -> Result<&mut RmtItem, RmtError> {
        let item = self
            .items
            .get_mut(id)
            .ok_or_else(|| RmtError::UnknownId(id.to_string()))?;
        if item.kind != ItemKind::Testcase || !item.is_subset() {
            return Err(RmtError::FieldMismatch(format!(
                "`{id}` is not a subset testcase"
            )));
        }
        Ok(item)
    }

    pub fn check_test_status(&self, id: &str, coverage_pct: f64) -> Result<(), RmtError> {
        let item = self
            .items
            .get(id)
            .ok_or_else(|| RmtError::UnknownId(id.to_string()))?;
        if item.kind != ItemKind::Testcase || !item.is_subset() {
            return Err(RmtError::FieldMismatch(format!(
                "`{id}` is not a subset testcase"
            )));
        }
        if !(0.0..=100.0).contains(&coverage_pct) {
            return Err(RmtError::Validation(format!(
                "coverage {coverage_pct} outside 0..100"
            )));
        }
        Ok(())
    }

    pub fn update_test_status(
        &mut self,
        id: &str,
        status: TestStatus,
        coverage_pct: f64,
        report_link: &str,
    ) -> Result<(), RmtError> {
        self.check_test_status(id, coverage_pct)?;
        self.subset_testcase_mut(id)?.result = Some(TestResult {
            status,
            coverage_pct,
            report_link: report_link.to_string(),
        });
        Ok(())
    }

    /// The ipvs document for one configuration's subset.
    pub fn export_ipvs(&self, config_tag: &str) -> Result<String, RmtError> {
        if !self.derivations.contains_key(config_tag) {
            return Err(RmtError::UnknownConfigTag(config_tag.to_string()));
        }
        Ok(super::persist::write_ipvs(self, config_tag))
    }

    pub fn save(&self, path: &Path) -> Result<(), RmtError> {
        let text = self.to_xml();
        let tmp = path.with_extension("xml.tmp");
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RmtError> {
        Self::from_xml(&std::fs::read_to_string(path)?)
    }

    pub fn to_xml(&self) -> String {
        super::persist::write_store(self)
    }

    pub fn from_xml(text: &str) -> Result<Self, RmtError> {
        super::persist::read_store(text)
    }
}
