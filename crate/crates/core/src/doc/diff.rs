use serde::{Deserialize, Serialize};

use super::patch::PatchOp;
use super::pointer::Pointer;
use super::value::DocValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffKind {
    ValuesChanged,
    ItemAdded,
    ItemRemoved,
    TypeChanged,
}

/// One point of divergence between two documents. Entries carrying container
/// values (additions, removals, type changes) are whole subtrees; the diff
/// never descends past them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffEntry {
    pub path: Pointer,
    pub kind: DiffKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub old_value: Option<DocValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub new_value: Option<DocValue>,
}

impl DiffEntry {
    /// A values_changed entry whose two sides are both numbers.
    pub fn is_numerical(&self) -> bool {
        self.kind == DiffKind::ValuesChanged
            && matches!(self.old_value, Some(DocValue::Num(_)))
            && matches!(self.new_value, Some(DocValue::Num(_)))
    }
}

/// Structural diff. Maps and sequences of the same kind are recursed;
/// same-type scalar differences are values_changed; differing types are a
/// single type_changed entry at that path. Output is sorted by serialized
/// path, so identical inputs always yield the identical entry list.
pub fn deep_diff(before: &DocValue, after: &DocValue) -> Vec<DiffEntry> {
    let mut out = Vec::new();
    walk(&Pointer::root(), before, after, &mut out);
    out.sort_by_key(|e| e.path.to_string());
    out
}

fn walk(path: &Pointer, before: &DocValue, after: &DocValue, out: &mut Vec<DiffEntry>) {
    if before == after {
        return;
    }
    match (before, after) {
        (DocValue::Map(bm), DocValue::Map(am)) => {
            for (key, bv) in bm {
                match am.get(key) {
                    Some(av) => walk(&path.child(key.clone()), bv, av, out),
                    None => out.push(DiffEntry {
                        path: path.child(key.clone()),
                        kind: DiffKind::ItemRemoved,
                        old_value: Some(bv.clone()),
                        new_value: None,
                    }),
                }
            }
            for (key, av) in am {
                if !bm.contains_key(key) {
                    out.push(DiffEntry {
                        path: path.child(key.clone()),
                        kind: DiffKind::ItemAdded,
                        old_value: None,
                        new_value: Some(av.clone()),
                    });
                }
            }
        }
        (DocValue::Seq(bs), DocValue::Seq(as_)) => {
            let common = bs.len().min(as_.len());
            for i in 0..common {
                walk(&path.child(i.to_string()), &bs[i], &as_[i], out);
            }
            for (i, bv) in bs.iter().enumerate().skip(common) {
                out.push(DiffEntry {
                    path: path.child(i.to_string()),
                    kind: DiffKind::ItemRemoved,
                    old_value: Some(bv.clone()),
                    new_value: None,
                });
            }
            for (i, av) in as_.iter().enumerate().skip(common) {
                out.push(DiffEntry {
                    path: path.child(i.to_string()),
                    kind: DiffKind::ItemAdded,
                    old_value: None,
                    new_value: Some(av.clone()),
                });
            }
        }
        (b, a) if same_type(b, a) => out.push(DiffEntry {
            path: path.clone(),
            kind: DiffKind::ValuesChanged,
            old_value: Some(b.clone()),
            new_value: Some(a.clone()),
        }),
        (b, a) => out.push(DiffEntry {
            path: path.clone(),
            kind: DiffKind::TypeChanged,
            old_value: Some(b.clone()),
            new_value: Some(a.clone()),
        }),
    }
}

fn same_type(a: &DocValue, b: &DocValue) -> bool {
    std::mem::discriminant(a) == std::mem::discriminant(b)
}

/// Synthesizes a patch that transforms the diff's `before` document into its
/// `after`. Replaces come first; removals run in descending path order so
/// tail removals on one sequence do not shift each other; additions run in
/// ascending order so sequence tails append onto the right lengths.
pub fn patch_from_diff(diff: &[DiffEntry]) -> Vec<PatchOp> {
    let mut replaces = Vec::new();
    let mut removes = Vec::new();
    let mut adds = Vec::new();
    for entry in diff {
        match entry.kind {
            DiffKind::ValuesChanged | DiffKind::TypeChanged => replaces.push(PatchOp::Replace {
                path: entry.path.clone(),
                value: entry.new_value.clone().expect("changed entry has new value"),
            }),
            DiffKind::ItemRemoved => removes.push(PatchOp::Remove {
                path: entry.path.clone(),
            }),
            DiffKind::ItemAdded => adds.push(PatchOp::Add {
                path: entry.path.clone(),
                value: entry.new_value.clone().expect("added entry has new value"),
            }),
        }
    }
    let key = |op: &PatchOp| op.path().to_string();
    replaces.sort_by_key(key);
    removes.sort_by_key(key);
    removes.reverse();
    adds.sort_by_key(key);
    replaces.extend(removes);
    replaces.extend(adds);
    replaces
}
