//! Structured-document values, pointer addressing, patch application, and deep
//! structural diff. This is the substrate for observation states, program
//! outputs, and diff-based refinement scoring.

mod diff;
mod patch;
mod pointer;
mod value;

pub use diff::{deep_diff, patch_from_diff, DiffEntry, DiffKind};
pub use patch::{apply_patch, PatchError, PatchErrorKind, PatchOp};
pub use pointer::{Miss, MissKind, Pointer, PointerParseError};
pub use value::DocValue;
