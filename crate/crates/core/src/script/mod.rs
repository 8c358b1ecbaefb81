//! PatchScript: the sandboxed expression language transition programs are
//! written in. Bodies are statement lists; patch-producing bodies accumulate
//! `emit` operations, precondition bodies finish with `return (bool, text)`.
//! The interpreter is a budgeted tree walker over document values; there is
//! no recursion and the only iteration is bounded sequence aggregation, so
//! every evaluation terminates.
//!
//! The grammar is documented in `docs/patchscript.md` at the repo root.

mod ast;
mod eval;
mod lex;
mod parse;

pub use ast::{AggKind, BinOp, Builtin, EmitOp, Expr, Stmt, UnaryOp};
pub use eval::{eval_patch_body, eval_precondition_body, Fault, StepBudget};
pub use parse::{parse_body, ParseError};

/// Interpreter step allowance per function call. Orders of magnitude above
/// what the bundled environments need; runaway programs become faults.
pub const DEFAULT_STEP_BUDGET: usize = 10_000;
