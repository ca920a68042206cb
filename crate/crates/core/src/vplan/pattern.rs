use std::fmt;
use std::str::FromStr;

use super::VPlanError;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Segment {
    Lit(String),
    /// `*`
    One,
    /// `**`
    Many,
}

/// Dot-separated pattern over entity names. `*` matches exactly one
/// segment, `**` one or more.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MappingPattern {
    text: String,
    segments: Vec<Segment>,
}

impl MappingPattern {
    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn matches(&self, name: &str) -> bool {
        let parts: Vec<&str> = name.split('.').collect();
        self.matches_segments(&parts)
    }

    /// Same as [`matches`](Self::matches) on a pre-split name.
    pub fn matches_segments(&self, name: &[&str]) -> bool {
        match_from(&self.segments, name)
    }
}

fn match_from(pat: &[Segment], name: &[&str]) -> bool {
    match pat.split_first() {
        None => name.is_empty(),
        Some((Segment::Lit(l), rest)) => {
            name.first().is_some_and(|s| s == l) && match_from(rest, &name[1..])
        }
        Some((Segment::One, rest)) => !name.is_empty() && match_from(rest, &name[1..]),
        Some((Segment::Many, rest)) => (1..=name.len()).any(|take| match_from(rest, &name[take..])),
    }
}

impl FromStr for MappingPattern {
    type Err = VPlanError;

    fn from_str(s: &str) -> Result<Self, VPlanError> {
        let bad = |reason: &str| VPlanError::MalformedPattern {
            pattern: s.to_string(),
            reason: reason.to_string(),
        };
        if s.is_empty() {
            return Err(bad("empty pattern"));
        }
        let segments = s
            .split('.')
            .map(|seg| match seg {
                "" => Err(bad("empty segment")),
                "*" => Ok(Segment::One),
                "**" => Ok(Segment::Many),
                _ if seg.contains('*') => Err(bad("wildcard inside a segment")),
                _ if seg.chars().any(char::is_whitespace) => Err(bad("whitespace in segment")),
                _ => Ok(Segment::Lit(seg.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(MappingPattern {
            text: s.to_string(),
            segments,
        })
    }
}

impl fmt::Display for MappingPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl PartialOrd for MappingPattern {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MappingPattern {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.text.cmp(&other.text)
    }
}

/// Whether `name` is a well-formed entity name: at least two non-empty
/// segments, the first being `chk` or `cov`.
pub fn is_entity_name(name: &str) -> bool {
    let parts: Vec<&str> = name.split('.').collect();
    parts.len() >= 2
        && matches!(parts[0], "chk" | "cov")
        && parts.iter().all(|p| !p.is_empty() && !p.contains('*'))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(p: &str, n: &str) -> bool {
        p.parse::<MappingPattern>().unwrap().matches(n)
    }

    #[test]
    fn wildcard_arity() {
        assert!(m("chk.t1.*", "chk.t1.c0"));
        assert!(!m("chk.t1.*", "chk.t1.c0.sub"));
        assert!(m("chk.t1.**", "chk.t1.c0.sub"));
        assert!(!m("chk.t1.**", "chk.t1"));
        assert!(!m("cov.**", "chk.t1.c0"));
        assert!(m("cov.*.addr.**", "cov.t9.addr.low"));
        assert!(m("**.low", "cov.t9.addr.low"));
    }

    #[test]
    fn malformed() {
        for p in ["", "cov..x", "a.b*", ".a", "a.", "a. b"] {
            assert!(p.parse::<MappingPattern>().is_err(), "{p:?}");
        }
    }

    #[test]
    fn entity_names() {
        assert!(is_entity_name("chk.t.c"));
        assert!(is_entity_name("cov.t"));
        assert!(!is_entity_name("chk"));
        assert!(!is_entity_name("foo.t.c"));
        assert!(!is_entity_name("cov..c"));
    }

    // reference: translate the pattern to an anchored regex
    fn regex_of(p: &str) -> regex::Regex {
        let body: Vec<String> = p
            .split('.')
            .map(|s| match s {
                "*" => "[^.]+".to_string(),
                "**" => "[^.]+(?:\\.[^.]+)*".to_string(),
                lit => regex::escape(lit),
            })
            .collect();
        regex::Regex::new(&format!("^{}$", body.join("\\."))).unwrap()
    }

    proptest! {
        #[test]
        fn agrees_with_regex(
            pat in prop::collection::vec(prop::sample::select(vec!["a", "b", "*", "**"]), 1..5),
            name in prop::collection::vec(prop::sample::select(vec!["a", "b", "c"]), 1..6),
        ) {
            let p = pat.join(".");
            let n = name.join(".");
            prop_assert_eq!(m(&p, &n), regex_of(&p).is_match(&n));
        }
    }
}
