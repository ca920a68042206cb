//! XML forms of the store: the on-disk document, the item element shared
//! with the HTTP API, the ipvs export and the subset report.

use std::collections::BTreeMap;

use super::{
    ItemKind, KindCounts, RelKind, Relationship, ReviewState, RmtError, RmtItem, Store,
    SubsetReport, TestResult,
};
use crate::xml::{self, a, Element, XmlWriter};

fn opt_attr<'a>(
    attrs: &mut Vec<(&'a str, std::borrow::Cow<'a, str>)>,
    key: &'a str,
    value: Option<&'a str>,
) {
    if let Some(v) = value {
        attrs.push(a(key, v));
    }
}

pub fn item_to_xml(w: &mut XmlWriter, item: &RmtItem) {
    let history = item
        .history
        .iter()
        .map(|s| s.as_str())
        .collect::<Vec<_>>()
        .join(",");
    let mut attrs = vec![a("id", item.id.as_str()), a("kind", item.kind.as_str())];
    attrs.push(a("state", item.state.as_str()));
    opt_attr(&mut attrs, "domain", item.domain.map(|d| d.as_str()));
    opt_attr(&mut attrs, "origin", item.origin.as_deref());
    opt_attr(&mut attrs, "config_tag", item.config_tag.as_deref());
    opt_attr(&mut attrs, "target", item.target.as_deref());
    attrs.push(a("history", history));
    w.open("item", &attrs);
    w.leaf("title", &[], &item.title);
    w.leaf("text", &[], &item.text);
    if let Some(src) = &item.applicability {
        w.leaf("applicability", &[], src);
    }
    if let Some(r) = &item.result {
        w.empty(
            "result",
            &[
                a("status", r.status.as_str()),
                a("coverage", r.coverage_pct.to_string()),
                a("link", r.report_link.as_str()),
            ],
        );
    }
    w.close("item");
}

pub fn item_from_xml(el: &Element) -> Result<RmtItem, RmtError> {
    el.expect_name("item")?;
    let state: ReviewState = el.attr("state").unwrap_or("draft").parse()?;
    let history = match el.attr("history") {
        Some(h) if !h.is_empty() => h
            .split(',')
            .map(str::parse)
            .collect::<Result<Vec<ReviewState>, _>>()?,
        _ => vec![state],
    };
    let result = match el.child("result") {
        Some(r) => {
            let raw = r.req_attr("coverage")?;
            Some(TestResult {
                status: r.req_attr("status")?.parse()?,
                coverage_pct: raw
                    .parse()
                    .map_err(|_| RmtError::Validation(format!("coverage `{raw}`")))?,
                report_link: r.attr("link").unwrap_or_default().to_string(),
            })
        }
        None => None,
    };
    Ok(RmtItem {
        id: el.attr("id").unwrap_or_default().to_string(),
        kind: el.req_attr("kind")?.parse()?,
        title: el.child_text("title").unwrap_or_default().to_string(),
        text: el.child_text("text").unwrap_or_default().to_string(),
        domain: el.attr("domain").map(str::parse).transpose()?,
        applicability: el.child_text("applicability").map(str::to_string),
        state,
        history,
        origin: el.attr("origin").map(str::to_string),
        config_tag: el.attr("config_tag").map(str::to_string),
        target: el.attr("target").map(str::to_string),
        result,
    })
}

pub(super) fn rel_to_xml(w: &mut XmlWriter, rel: &Relationship) {
    w.empty(
        "rel",
        &[
            a("from", rel.from.as_str()),
            a("to", rel.to.as_str()),
            a("kind", rel.kind.as_str()),
        ],
    );
}

pub(super) fn rel_from_xml(el: &Element) -> Result<Relationship, RmtError> {
    el.expect_name("rel")?;
    Ok(Relationship {
        from: el.req_attr("from")?.to_string(),
        to: el.req_attr("to")?.to_string(),
        kind: el.req_attr("kind")?.parse()?,
    })
}

pub(super) fn write_store(store: &Store) -> String {
    let mut w = XmlWriter::new();
    w.open("rmt-store", &[]);
    for (kind, next) in &store.next_seq {
        w.empty(
            "sequence",
            &[a("kind", kind.as_str()), a("next", next.to_string())],
        );
    }
    for (tag, text) in &store.derivations {
        w.leaf("derivation", &[a("config_tag", tag.as_str())], text);
    }
    for item in store.items.values() {
        item_to_xml(&mut w, item);
    }
    for rel in &store.rels {
        rel_to_xml(&mut w, rel);
    }
    w.close("rmt-store");
    w.finish()
}

pub(super) fn read_store(text: &str) -> Result<Store, RmtError> {
    let root = xml::parse(text)?;
    root.expect_name("rmt-store")?;
    let mut store = Store::new();
    for el in root.children_named("sequence") {
        let kind: ItemKind = el.req_attr("kind")?.parse()?;
        store.next_seq.insert(kind, el.parse_attr("next")?);
    }
    for el in root.children_named("derivation") {
        store
            .derivations
            .insert(el.req_attr("config_tag")?.to_string(), el.text.clone());
    }
    for el in root.children_named("item") {
        let item = item_from_xml(el)?;
        if item.id.is_empty() {
            return Err(RmtError::Validation("stored item without id".into()));
        }
        if store.items.contains_key(&item.id) {
            return Err(RmtError::DuplicateId(item.id));
        }
        store.items.insert(item.id.clone(), item);
    }
    for el in root.children_named("rel") {
        let rel = rel_from_xml(el)?;
        store.post_relationship(rel)?;
    }
    Ok(store)
}

pub(super) fn write_ipvs(store: &Store, tag: &str) -> String {
    let items: BTreeMap<&str, &RmtItem> = store
        .items
        .values()
        .filter(|i| i.config_tag.as_deref() == Some(tag))
        .map(|i| (i.id.as_str(), i))
        .collect();

    let mut w = XmlWriter::new();
    w.open("ipvs", &[a("config_tag", tag)]);
    for item in items.values() {
        let mut attrs = vec![
            a("id", item.id.as_str()),
            a("kind", item.kind.as_str()),
            a("state", item.state.as_str()),
        ];
        opt_attr(&mut attrs, "domain", item.domain.map(|d| d.as_str()));
        opt_attr(&mut attrs, "origin", item.origin.as_deref());
        w.open("item", &attrs);
        w.leaf("title", &[], &item.title);
        w.leaf("text", &[], &item.text);
        if item.kind == ItemKind::Testcase {
            let (status, coverage, link) = match &item.result {
                Some(r) => (r.status.as_str(), r.coverage_pct.to_string(), Some(&r.report_link)),
                None => ("not_run", "0".to_string(), None),
            };
            w.leaf("status", &[], status);
            w.leaf("coverage", &[], &coverage);
            if let Some(link) = link.filter(|l| !l.is_empty()) {
                w.leaf("link", &[], link);
            }
        }
        w.close("item");
    }
    // BTreeSet order is (from, to, kind)
    for rel in store.rels.iter().filter(|r| {
        r.kind != RelKind::DerivedFrom
            && items.contains_key(r.from.as_str())
            && items.contains_key(r.to.as_str())
    }) {
        rel_to_xml(&mut w, rel);
    }
    w.close("ipvs");
    w.finish()
}

fn counts_attrs(c: &KindCounts) -> [(&'static str, std::borrow::Cow<'static, str>); 3] {
    [
        a("hwrq", c.hwrq.to_string()),
        a("testcase", c.testcase.to_string()),
        a("waiver", c.waiver.to_string()),
    ]
}

fn counts_from(el: &Element) -> Result<KindCounts, RmtError> {
    Ok(KindCounts {
        hwrq: el.parse_attr("hwrq")?,
        testcase: el.parse_attr("testcase")?,
        waiver: el.parse_attr("waiver")?,
    })
}

pub fn subset_report_to_xml(report: &SubsetReport) -> String {
    let mut w = XmlWriter::new();
    w.open("subset-report", &[a("config_tag", report.config_tag.as_str())]);
    w.empty("counts", &counts_attrs(&report.counts));
    w.empty("created", &counts_attrs(&report.created));
    for id in &report.waiver_required {
        w.empty("waiver-required", &[a("id", id.as_str())]);
    }
    for id in &report.skipped {
        w.empty("skipped", &[a("id", id.as_str())]);
    }
    w.close("subset-report");
    w.finish()
}

pub fn subset_report_from_xml(text: &str) -> Result<SubsetReport, RmtError> {
    let root = xml::parse(text)?;
    root.expect_name("subset-report")?;
    let ids = |name: &str| -> Result<Vec<String>, RmtError> {
        root.children_named(name)
            .map(|e| Ok(e.req_attr("id")?.to_string()))
            .collect()
    };
    Ok(SubsetReport {
        config_tag: root.req_attr("config_tag")?.to_string(),
        counts: counts_from(root.req_child("counts")?)?,
        created: counts_from(root.req_child("created")?)?,
        waiver_required: ids("waiver-required")?,
        skipped: ids("skipped")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspec::parse_config;
    use crate::rmt::{Domain, TestStatus};

    fn derived_store() -> (Store, String) {
        let mut s = Store::new();
        let h = s.post_item(RmtItem::superset_hwrq("Decode <AHB>", "true").with_text("a & b")).unwrap();
        let t = s
            .post_item(RmtItem::superset_testcase("decode proof", Domain::Formal, "ecc != \"sed\""))
            .unwrap();
        s.post_relationship(Relationship::new(&t, &h, RelKind::Verifies)).unwrap();
        for id in [&h, &t] {
            s.set_review_state(id, ReviewState::InReview).unwrap();
            s.set_review_state(id, ReviewState::Approved).unwrap();
        }
        let cfg = parse_config("ip_name=m\ndata_width=8\naddr_words=16\necc=none\ntech=rram").unwrap();
        let tag = s.derive_subset(&cfg).unwrap().config_tag;
        (s, tag)
    }

    #[test]
    fn ipvs_has_items_and_verifies_only() {
        let (s, tag) = derived_store();
        let doc = s.export_ipvs(&tag).unwrap();
        let root = xml::parse(&doc).unwrap();
        assert_eq!(root.attr("config_tag"), Some(tag.as_str()));
        assert_eq!(root.children.len(), 3);
        let tc = root
            .children_named("item")
            .find(|i| i.attr("kind") == Some("testcase"))
            .unwrap();
        assert_eq!(tc.attr("domain"), Some("formal"));
        assert_eq!(tc.attr("origin"), Some("TC-001"));
        assert_eq!(tc.child_text("status"), Some("not_run"));
        assert_eq!(root.children_named("rel").next().unwrap().attr("kind"), Some("verifies"));
        assert_eq!(doc, s.export_ipvs(&tag).unwrap());
        assert!(matches!(s.export_ipvs("ffff"), Err(RmtError::UnknownConfigTag(_))));
    }

    #[test]
    fn status_visible_in_export() {
        let (mut s, tag) = derived_store();
        let tc = format!("{tag}-TC-001");
        s.update_test_status(&tc, TestStatus::Pass, 100.0, "file:///a/vplan.html").unwrap();
        let root = xml::parse(&s.export_ipvs(&tag).unwrap()).unwrap();
        let item = root.children_named("item").find(|i| i.attr("id") == Some(tc.as_str())).unwrap();
        assert_eq!(item.child_text("status"), Some("pass"));
        assert_eq!(item.child_text("coverage"), Some("100"));
        assert_eq!(item.child_text("link"), Some("file:///a/vplan.html"));
    }

    #[test]
    fn store_save_load_is_byte_identical() {
        let (mut s, tag) = derived_store();
        s.update_test_status(&format!("{tag}-TC-001"), TestStatus::Fail, 37.5, "l").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.xml");
        s.save(&path).unwrap();
        let loaded = Store::load(&path).unwrap();
        assert_eq!(loaded, s);
        assert_eq!(loaded.to_xml(), s.to_xml());
        assert_eq!(loaded.export_ipvs(&tag).unwrap(), s.export_ipvs(&tag).unwrap());
        assert!(!dir.path().join("store.xml.tmp").exists());
    }

    #[test]
    fn subset_report_round_trip() {
        let (mut s, _) = derived_store();
        let cfg = parse_config("ip_name=m\ndata_width=8\naddr_words=16\necc=sed\ntech=rram").unwrap();
        let r = s.derive_subset(&cfg).unwrap();
        assert_eq!(r.skipped, vec!["TC-001"]);
        assert_eq!(subset_report_from_xml(&subset_report_to_xml(&r)).unwrap(), r);
    }

    #[test]
    fn load_rejects_dangling_relationships() {
        let doc = "<rmt-store><rel from=\"TC-001\" to=\"HWRQ-001\" kind=\"verifies\"/></rmt-store>";
        assert!(matches!(Store::from_xml(doc), Err(RmtError::DanglingEndpoint(_))));
    }
}
