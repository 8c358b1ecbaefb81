use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, Deserialize, Deserializer, MapAccess, SeqAccess, Visitor};
use serde::ser::{Serialize, SerializeMap, SerializeSeq, Serializer};

/// A JSON-shaped tree value. All numerics share one double-precision tower;
/// integer-valued doubles serialize without a fractional part. Map keys are
/// kept sorted so serialization and iteration order are canonical.
#[derive(Debug, Clone, PartialEq)]
pub enum DocValue {
    Null,
    Bool(bool),
    Num(f64),
    Text(String),
    Seq(Vec<DocValue>),
    Map(BTreeMap<String, DocValue>),
}

impl DocValue {
    pub fn type_name(&self) -> &'static str {
        match self {
            DocValue::Null => "null",
            DocValue::Bool(_) => "boolean",
            DocValue::Num(_) => "number",
            DocValue::Text(_) => "text",
            DocValue::Seq(_) => "sequence",
            DocValue::Map(_) => "map",
        }
    }

    pub fn is_container(&self) -> bool {
        matches!(self, DocValue::Seq(_) | DocValue::Map(_))
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            DocValue::Num(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            DocValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            DocValue::Text(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_seq(&self) -> Option<&[DocValue]> {
        match self {
            DocValue::Seq(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_map(&self) -> Option<&BTreeMap<String, DocValue>> {
        match self {
            DocValue::Map(m) => Some(m),
            _ => None,
        }
    }

    /// Convenience lookup of a top-level map key.
    pub fn key(&self, name: &str) -> Option<&DocValue> {
        self.as_map().and_then(|m| m.get(name))
    }

    pub fn empty_map() -> DocValue {
        DocValue::Map(BTreeMap::new())
    }

    pub fn from_json_str(text: &str) -> Result<DocValue, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Canonical JSON text: sorted map keys, integers without fraction.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("document values always serialize")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("document values always serialize")
    }
}

impl fmt::Display for DocValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json_string())
    }
}

impl From<f64> for DocValue {
    fn from(n: f64) -> Self {
        DocValue::Num(n)
    }
}

impl From<i64> for DocValue {
    fn from(n: i64) -> Self {
        DocValue::Num(n as f64)
    }
}

impl From<bool> for DocValue {
    fn from(b: bool) -> Self {
        DocValue::Bool(b)
    }
}

impl From<&str> for DocValue {
    fn from(t: &str) -> Self {
        DocValue::Text(t.to_owned())
    }
}

impl From<String> for DocValue {
    fn from(t: String) -> Self {
        DocValue::Text(t)
    }
}

impl From<serde_json::Value> for DocValue {
    fn from(v: serde_json::Value) -> Self {
        match v {
            serde_json::Value::Null => DocValue::Null,
            serde_json::Value::Bool(b) => DocValue::Bool(b),
            serde_json::Value::Number(n) => DocValue::Num(n.as_f64().unwrap_or(f64::NAN)),
            serde_json::Value::String(s) => DocValue::Text(s),
            serde_json::Value::Array(a) => DocValue::Seq(a.into_iter().map(Into::into).collect()),
            serde_json::Value::Object(o) => {
                DocValue::Map(o.into_iter().map(|(k, v)| (k, v.into())).collect())
            }
        }
    }
}

// Largest double-precision integer range where every value is exact.
const MAX_SAFE_INT: f64 = 9_007_199_254_740_992.0;

impl Serialize for DocValue {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            DocValue::Null => ser.serialize_unit(),
            DocValue::Bool(b) => ser.serialize_bool(*b),
            DocValue::Num(n) => {
                if n.fract() == 0.0 && n.abs() <= MAX_SAFE_INT {
                    ser.serialize_i64(*n as i64)
                } else {
                    ser.serialize_f64(*n)
                }
            }
            DocValue::Text(t) => ser.serialize_str(t),
            DocValue::Seq(items) => {
                let mut seq = ser.serialize_seq(Some(items.len()))?;
                for item in items {
                    seq.serialize_element(item)?;
                }
                seq.end()
            }
            DocValue::Map(entries) => {
                let mut map = ser.serialize_map(Some(entries.len()))?;
                for (k, v) in entries {
                    map.serialize_entry(k, v)?;
                }
                map.end()
            }
        }
    }
}

struct DocVisitor;

impl<'de> Visitor<'de> for DocVisitor {
    type Value = DocValue;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a JSON value")
    }

    fn visit_unit<E: de::Error>(self) -> Result<DocValue, E> {
        Ok(DocValue::Null)
    }

    fn visit_none<E: de::Error>(self) -> Result<DocValue, E> {
        Ok(DocValue::Null)
    }

    fn visit_bool<E: de::Error>(self, b: bool) -> Result<DocValue, E> {
        Ok(DocValue::Bool(b))
    }

    fn visit_i64<E: de::Error>(self, n: i64) -> Result<DocValue, E> {
        Ok(DocValue::Num(n as f64))
    }

    fn visit_u64<E: de::Error>(self, n: u64) -> Result<DocValue, E> {
        Ok(DocValue::Num(n as f64))
    }

    fn visit_f64<E: de::Error>(self, n: f64) -> Result<DocValue, E> {
        Ok(DocValue::Num(n))
    }

    fn visit_str<E: de::Error>(self, s: &str) -> Result<DocValue, E> {
        Ok(DocValue::Text(s.to_owned()))
    }

    fn visit_string<E: de::Error>(self, s: String) -> Result<DocValue, E> {
        Ok(DocValue::Text(s))
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut access: A) -> Result<DocValue, A::Error> {
        let mut items = Vec::with_capacity(access.size_hint().unwrap_or(0));
        while let Some(item) = access.next_element()? {
            items.push(item);
        }
        Ok(DocValue::Seq(items))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<DocValue, A::Error> {
        let mut entries = BTreeMap::new();
        while let Some((k, v)) = access.next_entry::<String, DocValue>()? {
            entries.insert(k, v);
        }
        Ok(DocValue::Map(entries))
    }
}

impl<'de> Deserialize<'de> for DocValue {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<DocValue, D::Error> {
        de.deserialize_any(DocVisitor)
    }
}
