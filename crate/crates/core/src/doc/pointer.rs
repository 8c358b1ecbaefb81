use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::value::DocValue;

/// A path into a document: an ordered list of text segments. The serialized
/// form prefixes every segment with `/`; `~0` decodes to `~` and `~1` to `/`.
/// The empty string is the root pointer (zero segments).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Pointer {
    segments: Vec<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PointerParseError {
    #[error("pointer must start with '/' (got {0:?})")]
    MissingSlash(String),
    #[error("bad escape {0:?}: '~' must be followed by '0' or '1'")]
    BadEscape(String),
}

/// A failed resolution: where it stopped and why.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("pointer miss at {at}: {kind}")]
pub struct Miss {
    pub at: Pointer,
    pub kind: MissKind,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MissKind {
    #[error("absent key {0:?}")]
    AbsentKey(String),
    #[error("index {index} out of range for sequence of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("segment {0:?} is not a valid sequence index")]
    BadIndex(String),
    #[error("cannot traverse into {0}")]
    NonContainer(&'static str),
}

impl Pointer {
    pub fn root() -> Pointer {
        Pointer::default()
    }

    pub fn from_segments<I, S>(segments: I) -> Pointer
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Pointer {
            segments: segments.into_iter().map(Into::into).collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Pointer, PointerParseError> {
        if text.is_empty() {
            return Ok(Pointer::root());
        }
        if !text.starts_with('/') {
            return Err(PointerParseError::MissingSlash(text.to_owned()));
        }
        let mut segments = Vec::new();
        for raw in text[1..].split('/') {
            segments.push(unescape(raw)?);
        }
        Ok(Pointer { segments })
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    pub fn is_root(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn first(&self) -> Option<&str> {
        self.segments.first().map(String::as_str)
    }

    pub fn child(&self, segment: impl Into<String>) -> Pointer {
        let mut segments = self.segments.clone();
        segments.push(segment.into());
        Pointer { segments }
    }

    /// Pointer to the parent container plus the final segment, if any.
    pub fn split_last(&self) -> Option<(Pointer, &str)> {
        let (last, head) = self.segments.split_last()?;
        Some((
            Pointer {
                segments: head.to_vec(),
            },
            last,
        ))
    }

    /// Walks the document, yielding the addressed value or a typed miss.
    pub fn resolve<'d>(&self, doc: &'d DocValue) -> Result<&'d DocValue, Miss> {
        let mut cur = doc;
        for (depth, seg) in self.segments.iter().enumerate() {
            let at = || Pointer {
                segments: self.segments[..=depth].to_vec(),
            };
            match cur {
                DocValue::Map(m) => match m.get(seg) {
                    Some(v) => cur = v,
                    None => {
                        return Err(Miss {
                            at: at(),
                            kind: MissKind::AbsentKey(seg.clone()),
                        })
                    }
                },
                DocValue::Seq(s) => {
                    let index = seq_index(seg).ok_or_else(|| Miss {
                        at: at(),
                        kind: MissKind::BadIndex(seg.clone()),
                    })?;
                    cur = s.get(index).ok_or_else(|| Miss {
                        at: at(),
                        kind: MissKind::IndexOutOfRange {
                            index,
                            len: s.len(),
                        },
                    })?;
                }
                other => {
                    return Err(Miss {
                        at: at(),
                        kind: MissKind::NonContainer(other.type_name()),
                    })
                }
            }
        }
        Ok(cur)
    }
}

/// Sequence index per pointer syntax: decimal digits, no leading zeros.
pub(super) fn seq_index(segment: &str) -> Option<usize> {
    if segment.is_empty() || (segment.len() > 1 && segment.starts_with('0')) {
        return None;
    }
    if !segment.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    segment.parse().ok()
}

fn unescape(raw: &str) -> Result<String, PointerParseError> {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars();
    while let Some(c) = chars.next() {
        if c != '~' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('0') => out.push('~'),
            Some('1') => out.push('/'),
            _ => return Err(PointerParseError::BadEscape(raw.to_owned())),
        }
    }
    Ok(out)
}

fn escape(segment: &str) -> String {
    segment.replace('~', "~0").replace('/', "~1")
}

impl fmt::Display for Pointer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for seg in &self.segments {
            write!(f, "/{}", escape(seg))?;
        }
        Ok(())
    }
}

impl FromStr for Pointer {
    type Err = PointerParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pointer::parse(s)
    }
}

impl Serialize for Pointer {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Pointer {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Pointer, D::Error> {
        let text = String::deserialize(de)?;
        Pointer::parse(&text).map_err(serde::de::Error::custom)
    }
}
