//! Embedded requirements-management store.
//!
//! Holds superset and subset HWRQs, testcases and waivers, their
//! relationships and review states. [`Store`] is the system of record;
//! [`SharedStore`] enforces single-writer access for concurrent callers and
//! [`http`] is a thin façade over it.

pub mod http;
mod persist;
mod shared;
mod store;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::configspec::{ConfigError, PredicateError};
use crate::xml::XmlError;

pub use persist::{item_from_xml, item_to_xml, subset_report_from_xml, subset_report_to_xml};
pub use shared::SharedStore;
pub use store::Store;

#[derive(Debug, Error)]
pub enum RmtError {
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("unknown id `{0}`")]
    UnknownId(String),
    #[error("malformed applicability predicate: {0}")]
    MalformedPredicate(#[from] PredicateError),
    #[error("field mismatch: {0}")]
    FieldMismatch(String),
    #[error("relationship endpoint `{0}` does not exist")]
    DanglingEndpoint(String),
    #[error("relationship kind violation: {0}")]
    KindViolation(String),
    #[error("illegal review transition {from} -> {to} for `{id}`")]
    IllegalTransition {
        id: String,
        from: ReviewState,
        to: ReviewState,
    },
    #[error("store holds no approved superset items")]
    NoApprovedSuperset,
    #[error("stored predicate of `{id}` no longer parses: {source}")]
    CorruptPredicate {
        id: String,
        source: PredicateError,
    },
    #[error("unknown config tag `{0}`")]
    UnknownConfigTag(String),
    #[error("invalid value: {0}")]
    Validation(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error("store i/o: {0}")]
    Io(#[from] std::io::Error),
}

macro_rules! text_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl FromStr for $name {
            type Err = RmtError;

            fn from_str(s: &str) -> Result<Self, RmtError> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(RmtError::Validation(format!(
                        concat!("`{}` is not a valid ", stringify!($name)), s
                    ))),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

text_enum!(ItemKind {
    Hwrq => "hwrq",
    Testcase => "testcase",
    Waiver => "waiver",
});

text_enum!(Domain {
    Simulation => "simulation",
    Formal => "formal",
    Both => "both",
});

text_enum!(ReviewState {
    Draft => "draft",
    InReview => "in_review",
    Approved => "approved",
});

text_enum!(TestStatus {
    Pass => "pass",
    Fail => "fail",
    NotRun => "not_run",
});

text_enum!(RelKind {
    Verifies => "verifies",
    DerivedFrom => "derived_from",
    Waives => "waives",
});

impl ItemKind {
    pub fn id_prefix(self) -> &'static str {
        match self {
            ItemKind::Hwrq => "HWRQ",
            ItemKind::Testcase => "TC",
            ItemKind::Waiver => "WVR",
        }
    }
}

impl ReviewState {
    pub fn can_move_to(self, to: ReviewState) -> bool {
        use ReviewState::*;
        matches!(
            (self, to),
            (Draft, InReview) | (InReview, Approved) | (InReview, Draft)
        )
    }
}

impl TestStatus {
    /// Rank for worst-of aggregation: `fail < not_run < pass`.
    pub fn rank(self) -> u8 {
        match self {
            TestStatus::Fail => 0,
            TestStatus::NotRun => 1,
            TestStatus::Pass => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub status: TestStatus,
    pub coverage_pct: f64,
    pub report_link: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmtItem {
    /// Empty on post means "assign one".
    pub id: String,
    pub kind: ItemKind,
    pub title: String,
    pub text: String,
    /// Testcases only.
    pub domain: Option<Domain>,
    /// Predicate source; superset items only.
    pub applicability: Option<String>,
    pub state: ReviewState,
    pub history: Vec<ReviewState>,
    /// Superset item a subset item derives from.
    pub origin: Option<String>,
    pub config_tag: Option<String>,
    /// Waivers only: the waived hwrq.
    pub target: Option<String>,
    /// Subset testcases only.
    pub result: Option<TestResult>,
}

impl RmtItem {
    fn blank(kind: ItemKind, title: &str) -> Self {
        RmtItem {
            id: String::new(),
            kind,
            title: title.to_string(),
            text: String::new(),
            domain: None,
            applicability: None,
            state: ReviewState::Draft,
            history: Vec::new(),
            origin: None,
            config_tag: None,
            target: None,
            result: None,
        }
    }

    pub fn superset_hwrq(title: &str, applicability: &str) -> Self {
        RmtItem {
            applicability: Some(applicability.to_string()),
            ..Self::blank(ItemKind::Hwrq, title)
        }
    }

    pub fn superset_testcase(title: &str, domain: Domain, applicability: &str) -> Self {
        RmtItem {
            domain: Some(domain),
            applicability: Some(applicability.to_string()),
            ..Self::blank(ItemKind::Testcase, title)
        }
    }

    pub fn superset_waiver(title: &str, target: &str, applicability: &str) -> Self {
        RmtItem {
            target: Some(target.to_string()),
            applicability: Some(applicability.to_string()),
            ..Self::blank(ItemKind::Waiver, title)
        }
    }

    /// A waiver raised against one derived hwrq of one configuration.
    pub fn config_waiver(title: &str, config_tag: &str, target: &str) -> Self {
        RmtItem {
            target: Some(target.to_string()),
            config_tag: Some(config_tag.to_string()),
            ..Self::blank(ItemKind::Waiver, title)
        }
    }

    pub fn with_text(mut self, text: &str) -> Self {
        self.text = text.to_string();
        self
    }

    pub fn with_id(mut self, id: &str) -> Self {
        self.id = id.to_string();
        self
    }

    pub fn is_superset(&self) -> bool {
        self.applicability.is_some()
    }

    pub fn is_subset(&self) -> bool {
        self.origin.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Relationship {
    pub from: String,
    pub to: String,
    pub kind: RelKind,
}

impl Relationship {
    pub fn new(from: &str, to: &str, kind: RelKind) -> Self {
        Relationship {
            from: from.to_string(),
            to: to.to_string(),
            kind,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KindCounts {
    pub hwrq: usize,
    pub testcase: usize,
    pub waiver: usize,
}

impl KindCounts {
    pub fn bump(&mut self, kind: ItemKind) {
        match kind {
            ItemKind::Hwrq => self.hwrq += 1,
            ItemKind::Testcase => self.testcase += 1,
            ItemKind::Waiver => self.waiver += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.hwrq + self.testcase + self.waiver
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubsetReport {
    pub config_tag: String,
    /// Derived items per kind now present for this configuration.
    pub counts: KindCounts,
    /// Items this particular call added (zero on a repeat derivation).
    pub created: KindCounts,
    /// Derived hwrqs with no derived verifying testcase.
    pub waiver_required: Vec<String>,
    /// Approved superset items whose predicate is false for the config.
    pub skipped: Vec<String>,
}
