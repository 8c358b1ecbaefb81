use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::pointer::{seq_index, Pointer};
use super::value::DocValue;

/// One patch operation. Only `add`, `remove`, and `replace` are representable;
/// `add` at an existing path behaves as replace (including sequence indices,
/// where index == len appends and anything beyond errors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum PatchOp {
    Add { path: Pointer, value: DocValue },
    Remove { path: Pointer },
    Replace { path: Pointer, value: DocValue },
}

impl PatchOp {
    pub fn path(&self) -> &Pointer {
        match self {
            PatchOp::Add { path, .. } => path,
            PatchOp::Remove { path } => path,
            PatchOp::Replace { path, .. } => path,
        }
    }

    pub fn op_name(&self) -> &'static str {
        match self {
            PatchOp::Add { .. } => "add",
            PatchOp::Remove { .. } => "remove",
            PatchOp::Replace { .. } => "replace",
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("patch op {op_index} ({op} {path}): {kind}")]
pub struct PatchError {
    pub op_index: usize,
    pub op: &'static str,
    pub path: Pointer,
    pub kind: PatchErrorKind,
}

#[derive(Debug, Error, PartialEq)]
pub enum PatchErrorKind {
    #[error("path does not exist")]
    MissingPath,
    #[error("parent container does not exist")]
    MissingParent,
    #[error("add index {index} beyond sequence length {len}")]
    BeyondLength { index: usize, len: usize },
    #[error("segment {0:?} is not a valid sequence index")]
    BadIndex(String),
    #[error("cannot address into a {0}")]
    NonContainer(&'static str),
    #[error("cannot remove the document root")]
    RootRemove,
}

/// Applies the ops in order to a copy of `doc`; the input is untouched.
pub fn apply_patch(doc: &DocValue, ops: &[PatchOp]) -> Result<DocValue, PatchError> {
    let mut out = doc.clone();
    for (op_index, op) in ops.iter().enumerate() {
        apply_one(&mut out, op).map_err(|kind| PatchError {
            op_index,
            op: op.op_name(),
            path: op.path().clone(),
            kind,
        })?;
    }
    Ok(out)
}

fn apply_one(doc: &mut DocValue, op: &PatchOp) -> Result<(), PatchErrorKind> {
    match op {
        PatchOp::Add { path, value } => add(doc, path, value.clone()),
        PatchOp::Replace { path, value } => replace(doc, path, value.clone()),
        PatchOp::Remove { path } => remove(doc, path),
    }
}

fn add(doc: &mut DocValue, path: &Pointer, value: DocValue) -> Result<(), PatchErrorKind> {
    let Some((parent_path, last)) = path.split_last() else {
        *doc = value;
        return Ok(());
    };
    let parent = navigate(doc, &parent_path).ok_or(PatchErrorKind::MissingParent)?;
    match parent {
        DocValue::Map(m) => {
            m.insert(last.to_owned(), value);
            Ok(())
        }
        DocValue::Seq(s) => {
            let index = seq_index(last).ok_or_else(|| PatchErrorKind::BadIndex(last.to_owned()))?;
            match index.cmp(&s.len()) {
                std::cmp::Ordering::Less => {
                    s[index] = value;
                    Ok(())
                }
                std::cmp::Ordering::Equal => {
                    s.push(value);
                    Ok(())
                }
                std::cmp::Ordering::Greater => Err(PatchErrorKind::BeyondLength {
                    index,
                    len: s.len(),
                }),
            }
        }
        other => Err(PatchErrorKind::NonContainer(other.type_name())),
    }
}

fn replace(doc: &mut DocValue, path: &Pointer, value: DocValue) -> Result<(), PatchErrorKind> {
    let target = navigate(doc, path).ok_or(PatchErrorKind::MissingPath)?;
    *target = value;
    Ok(())
}

fn remove(doc: &mut DocValue, path: &Pointer) -> Result<(), PatchErrorKind> {
    let Some((parent_path, last)) = path.split_last() else {
        return Err(PatchErrorKind::RootRemove);
    };
    let parent = navigate(doc, &parent_path).ok_or(PatchErrorKind::MissingParent)?;
    match parent {
        DocValue::Map(m) => {
            m.remove(last).ok_or(PatchErrorKind::MissingPath)?;
            Ok(())
        }
        DocValue::Seq(s) => {
            let index = seq_index(last).ok_or_else(|| PatchErrorKind::BadIndex(last.to_owned()))?;
            if index >= s.len() {
                return Err(PatchErrorKind::MissingPath);
            }
            s.remove(index);
            Ok(())
        }
        other => Err(PatchErrorKind::NonContainer(other.type_name())),
    }
}

fn navigate<'d>(doc: &'d mut DocValue, path: &Pointer) -> Option<&'d mut DocValue> {
    let mut cur = doc;
    for seg in path.segments() {
        cur = match cur {
            DocValue::Map(m) => m.get_mut(seg)?,
            DocValue::Seq(s) => {
                let index = seq_index(seg)?;
                s.get_mut(index)?
            }
            _ => return None,
        };
    }
    Some(cur)
}
