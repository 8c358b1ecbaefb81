use crate::doc::{DocValue, Pointer};

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Let {
        name: String,
        value: Expr,
    },
    Emit {
        op: EmitOp,
        path: Pointer,
        value: Option<Expr>,
    },
    Return {
        valid: Expr,
        feedback: Expr,
    },
    If {
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Vec<Stmt>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitOp {
    Add,
    Remove,
    Replace,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(DocValue),
    Var(String),
    /// State access; the default fires only on a pointer miss.
    Get {
        path: Pointer,
        default: Option<Box<Expr>>,
    },
    /// Action-document access.
    AGet {
        path: Pointer,
        default: Option<Box<Expr>>,
    },
    /// Pointer resolution inside a bound variable's value.
    Field {
        var: String,
        path: Pointer,
        default: Option<Box<Expr>>,
    },
    Unary {
        op: UnaryOp,
        expr: Box<Expr>,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Call {
        func: Builtin,
        args: Vec<Expr>,
    },
    IfExpr {
        cond: Box<Expr>,
        then_val: Box<Expr>,
        else_val: Box<Expr>,
    },
    /// Bounded aggregation over the sequence at `path` in the state document,
    /// with the element bound to `binder` inside `body`.
    Agg {
        kind: AggKind,
        binder: String,
        path: Pointer,
        body: Option<Box<Expr>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Min,
    Max,
    Abs,
    Floor,
    Clamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggKind {
    Sum,
    Count,
    Filter,
}
