//! Minimal element tree over quick-xml, plus a deterministic writer.
//!
//! Every document this crate emits goes through [`XmlWriter`] so that byte
//! equality between runs only depends on the data.

use std::borrow::Cow;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum XmlError {
    #[error("xml syntax: {0}")]
    Syntax(String),
    #[error("expected root <{expected}>, found <{found}>")]
    Root { expected: String, found: String },
    #[error("<{element}> is missing attribute `{attr}`")]
    MissingAttr { element: String, attr: String },
    #[error("<{element}> is missing child <{child}>")]
    MissingChild { element: String, child: String },
    #[error("<{element}>: invalid value `{value}` for {what}")]
    Invalid {
        element: String,
        what: String,
        value: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Element>,
    /// Text content of leaf elements. Whitespace between child elements is
    /// dropped.
    pub text: String,
}

impl Element {
    pub fn attr(&self, key: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn req_attr(&self, key: &str) -> Result<&str, XmlError> {
        self.attr(key).ok_or_else(|| XmlError::MissingAttr {
            element: self.name.clone(),
            attr: key.to_string(),
        })
    }

    /// Parses a required attribute with `FromStr`.
    pub fn parse_attr<T: std::str::FromStr>(&self, key: &str) -> Result<T, XmlError> {
        let raw = self.req_attr(key)?;
        raw.parse().map_err(|_| self.invalid(key, raw))
    }

    pub fn child(&self, name: &str) -> Option<&Element> {
        self.children.iter().find(|c| c.name == name)
    }

    pub fn req_child(&self, name: &str) -> Result<&Element, XmlError> {
        self.child(name).ok_or_else(|| XmlError::MissingChild {
            element: self.name.clone(),
            child: name.to_string(),
        })
    }

    pub fn child_text(&self, name: &str) -> Option<&str> {
        self.child(name).map(|c| c.text.as_str())
    }

    pub fn children_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Element> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }

    pub fn invalid(&self, what: &str, value: &str) -> XmlError {
        XmlError::Invalid {
            element: self.name.clone(),
            what: what.to_string(),
            value: value.to_string(),
        }
    }

    pub fn expect_name(&self, name: &str) -> Result<(), XmlError> {
        if self.name == name {
            Ok(())
        } else {
            Err(XmlError::Root {
                expected: name.to_string(),
                found: self.name.clone(),
            })
        }
    }
}

fn start_element(e: &BytesStart<'_>) -> Result<Element, XmlError> {
    let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
    let mut attrs = Vec::new();
    for attr in e.attributes() {
        let attr = attr.map_err(|err| XmlError::Syntax(err.to_string()))?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr
            .unescape_value()
            .map_err(|err| XmlError::Syntax(err.to_string()))?
            .into_owned();
        attrs.push((key, value));
    }
    Ok(Element {
        name,
        attrs,
        ..Element::default()
    })
}

/// Parses a document and returns its root element.
pub fn parse(text: &str) -> Result<Element, XmlError> {
    let mut reader = Reader::from_str(text);
    let mut stack: Vec<Element> = Vec::new();
    let mut root = None;

    let mut finish = |stack: &mut Vec<Element>, mut el: Element| -> Result<(), XmlError> {
        if !el.children.is_empty() {
            if !el.text.trim().is_empty() {
                return Err(XmlError::Syntax(format!("mixed content in <{}>", el.name)));
            }
            el.text.clear();
        }
        match stack.last_mut() {
            Some(parent) => parent.children.push(el),
            None => {
                if root.is_some() {
                    return Err(XmlError::Syntax("multiple root elements".into()));
                }
                root = Some(el);
            }
        }
        Ok(())
    };

    loop {
        match reader.read_event() {
            Ok(Event::Start(e)) => stack.push(start_element(&e)?),
            Ok(Event::Empty(e)) => {
                let el = start_element(&e)?;
                finish(&mut stack, el)?;
            }
            Ok(Event::End(_)) => {
                let el = stack
                    .pop()
                    .ok_or_else(|| XmlError::Syntax("unbalanced end tag".into()))?;
                finish(&mut stack, el)?;
            }
            Ok(Event::Text(t)) => {
                let s = t.unescape().map_err(|e| XmlError::Syntax(e.to_string()))?;
                match stack.last_mut() {
                    Some(el) => el.text.push_str(&s),
                    None if s.trim().is_empty() => {}
                    None => return Err(XmlError::Syntax("text outside root".into())),
                }
            }
            Ok(Event::CData(t)) => {
                if let Some(el) = stack.last_mut() {
                    el.text.push_str(&String::from_utf8_lossy(&t.into_inner()));
                }
            }
            Ok(Event::Eof) => break,
            Ok(_) => {}
            Err(e) => {
                return Err(XmlError::Syntax(format!(
                    "at byte {}: {e}",
                    reader.error_position()
                )))
            }
        }
    }
    if !stack.is_empty() {
        return Err(XmlError::Syntax("unexpected end of document".into()));
    }
    root.ok_or_else(|| XmlError::Syntax("empty document".into()))
}

pub fn escape(s: &str) -> Cow<'_, str> {
    quick_xml::escape::escape(s)
}

/// Indenting writer with a fixed layout: two-space indent, attributes in the
/// order given, `\n` line endings.
#[derive(Debug, Default)]
pub struct XmlWriter {
    out: String,
    depth: usize,
}

pub type Attrs<'a> = [(&'a str, Cow<'a, str>)];

impl XmlWriter {
    pub fn new() -> Self {
        let mut w = XmlWriter::default();
        w.out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        w
    }

    /// A writer for an XML fragment (no declaration).
    pub fn fragment() -> Self {
        XmlWriter::default()
    }

    fn tag(&mut self, name: &str, attrs: &Attrs<'_>) {
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
        self.out.push('<');
        self.out.push_str(name);
        for (k, v) in attrs {
            self.out.push(' ');
            self.out.push_str(k);
            self.out.push_str("=\"");
            self.out.push_str(&escape(v));
            self.out.push('"');
        }
    }

    pub fn open(&mut self, name: &str, attrs: &Attrs<'_>) {
        self.tag(name, attrs);
        self.out.push_str(">\n");
        self.depth += 1;
    }

    pub fn close(&mut self, name: &str) {
        self.depth -= 1;
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
        self.out.push_str("</");
        self.out.push_str(name);
        self.out.push_str(">\n");
    }

    pub fn empty(&mut self, name: &str, attrs: &Attrs<'_>) {
        self.tag(name, attrs);
        self.out.push_str("/>\n");
    }

    pub fn leaf(&mut self, name: &str, attrs: &Attrs<'_>, text: &str) {
        self.tag(name, attrs);
        self.out.push('>');
        self.out.push_str(&escape(text));
        self.out.push_str("</");
        self.out.push_str(name);
        self.out.push_str(">\n");
    }

    pub fn finish(self) -> String {
        self.out
    }
}

/// Shorthand for building attribute lists.
pub fn a<'a>(key: &'a str, value: impl Into<Cow<'a, str>>) -> (&'a str, Cow<'a, str>) {
    (key, value.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writer_output_parses_back() {
        let mut w = XmlWriter::new();
        w.open("root", &[a("k", "a<b&\"c\"")]);
        w.leaf("title", &[], "  spaced & <odd>  ");
        w.empty("rel", &[a("from", "x"), a("to", "y")]);
        w.close("root");
        let doc = w.finish();
        let root = parse(&doc).unwrap();
        assert_eq!(root.attr("k"), Some("a<b&\"c\""));
        assert_eq!(root.child_text("title"), Some("  spaced & <odd>  "));
        assert_eq!(root.children_named("rel").count(), 1);
        assert!(root.text.is_empty());
    }

    #[test]
    fn rejects_broken_documents() {
        assert!(parse("<a><b></a>").is_err());
        assert!(parse("").is_err());
        assert!(parse("<a>text<b/></a>").is_err());
    }
}
