use thiserror::Error;

use super::ast::*;
use super::DEFAULT_STEP_BUDGET;
use crate::doc::{DocValue, PatchOp, Pointer};

/// Runtime failure of a script body. Evaluation never panics and never hangs:
/// every abnormal condition surfaces as one of these.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Fault {
    #[error("missing path {path}")]
    MissingPath { path: String },
    #[error("type mismatch: expected {expected}, got {got}")]
    TypeMismatch {
        expected: &'static str,
        got: String,
    },
    #[error("division by zero")]
    DivideByZero,
    #[error("non-finite arithmetic result")]
    NonFinite,
    #[error("step budget exceeded")]
    BudgetExceeded,
    #[error("precondition body finished without return")]
    NoReturn,
    #[error("return statement in a patch-producing body")]
    UnexpectedReturn,
    #[error("emit statement in a precondition body")]
    UnexpectedEmit,
}

/// Interpreter step allowance. Each statement, expression node, and
/// aggregation element costs one step; exhaustion is a [`Fault`], not a hang.
#[derive(Debug, Clone, Copy)]
pub struct StepBudget {
    remaining: usize,
}

impl StepBudget {
    pub fn new(limit: usize) -> Self {
        Self { remaining: limit }
    }

    pub fn remaining(&self) -> usize {
        self.remaining
    }

    fn charge(&mut self) -> Result<(), Fault> {
        if self.remaining == 0 {
            return Err(Fault::BudgetExceeded);
        }
        self.remaining -= 1;
        Ok(())
    }
}

impl Default for StepBudget {
    fn default() -> Self {
        Self::new(DEFAULT_STEP_BUDGET)
    }
}

/// Runs a patch-producing body (action or dynamic function) against a state
/// and action document, returning the accumulated patch in emit order.
pub fn eval_patch_body(
    body: &[Stmt],
    state: &DocValue,
    action: &DocValue,
    budget: &mut StepBudget,
) -> Result<Vec<PatchOp>, Fault> {
    let mut interp = Interp {
        state,
        action,
        locals: Vec::new(),
        patch: Vec::new(),
        allow_emit: true,
        budget,
    };
    match interp.exec_stmts(body)? {
        Some(_) => Err(Fault::UnexpectedReturn),
        None => Ok(interp.patch),
    }
}

/// Runs a precondition body, returning the verdict and its feedback text.
pub fn eval_precondition_body(
    body: &[Stmt],
    state: &DocValue,
    action: &DocValue,
    budget: &mut StepBudget,
) -> Result<(bool, String), Fault> {
    let mut interp = Interp {
        state,
        action,
        locals: Vec::new(),
        patch: Vec::new(),
        allow_emit: false,
        budget,
    };
    match interp.exec_stmts(body)? {
        Some(verdict) => Ok(verdict),
        None => Err(Fault::NoReturn),
    }
}

struct Interp<'a> {
    state: &'a DocValue,
    action: &'a DocValue,
    locals: Vec<(String, DocValue)>,
    patch: Vec<PatchOp>,
    allow_emit: bool,
    budget: &'a mut StepBudget,
}

fn type_mismatch(expected: &'static str, got: &DocValue) -> Fault {
    Fault::TypeMismatch {
        expected,
        got: got.type_name().to_string(),
    }
}

fn as_num(v: &DocValue) -> Result<f64, Fault> {
    v.as_num().ok_or_else(|| type_mismatch("number", v))
}

fn as_bool(v: &DocValue) -> Result<bool, Fault> {
    v.as_bool().ok_or_else(|| type_mismatch("boolean", v))
}

fn finite(n: f64) -> Result<f64, Fault> {
    if n.is_finite() {
        Ok(n)
    } else {
        Err(Fault::NonFinite)
    }
}

impl Interp<'_> {
    fn exec_stmts(&mut self, stmts: &[Stmt]) -> Result<Option<(bool, String)>, Fault> {
        let depth = self.locals.len();
        for stmt in stmts {
            self.budget.charge()?;
            match stmt {
                Stmt::Let { name, value } => {
                    let v = self.eval(value)?;
                    self.locals.push((name.clone(), v));
                }
                Stmt::Emit { op, path, value } => {
                    if !self.allow_emit {
                        return Err(Fault::UnexpectedEmit);
                    }
                    let op = match op {
                        EmitOp::Remove => PatchOp::Remove { path: path.clone() },
                        EmitOp::Add => PatchOp::Add {
                            path: path.clone(),
                            value: self.eval(value.as_ref().expect("parser enforces arity"))?,
                        },
                        EmitOp::Replace => PatchOp::Replace {
                            path: path.clone(),
                            value: self.eval(value.as_ref().expect("parser enforces arity"))?,
                        },
                    };
                    self.patch.push(op);
                }
                Stmt::Return { valid, feedback } => {
                    let verdict = as_bool(&self.eval(valid)?)?;
                    let text = match self.eval(feedback)? {
                        DocValue::Text(t) => t,
                        other => return Err(type_mismatch("text", &other)),
                    };
                    self.locals.truncate(depth);
                    return Ok(Some((verdict, text)));
                }
                Stmt::If {
                    cond,
                    then_body,
                    else_body,
                } => {
                    let taken = if as_bool(&self.eval(cond)?)? {
                        then_body
                    } else {
                        else_body
                    };
                    if let Some(ret) = self.exec_stmts(taken)? {
                        self.locals.truncate(depth);
                        return Ok(Some(ret));
                    }
                }
            }
        }
        self.locals.truncate(depth);
        Ok(None)
    }

    fn lookup(&self, name: &str) -> &DocValue {
        self.locals
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
            .expect("parser enforces bound identifiers")
    }

    fn read(
        &mut self,
        root: &DocValue,
        path: &Pointer,
        default: Option<&Expr>,
    ) -> Result<DocValue, Fault> {
        match path.resolve(root) {
            Ok(v) => Ok(v.clone()),
            Err(_) => match default {
                Some(d) => self.eval(d),
                None => Err(Fault::MissingPath {
                    path: path.to_string(),
                }),
            },
        }
    }

    fn eval(&mut self, expr: &Expr) -> Result<DocValue, Fault> {
        self.budget.charge()?;
        match expr {
            Expr::Lit(v) => Ok(v.clone()),
            Expr::Var(name) => Ok(self.lookup(name).clone()),
            Expr::Get { path, default } => {
                let root = self.state;
                self.read(root, path, default.as_deref())
            }
            Expr::AGet { path, default } => {
                let root = self.action;
                self.read(root, path, default.as_deref())
            }
            Expr::Field { var, path, default } => {
                let root = self.lookup(var).clone();
                self.read(&root, path, default.as_deref())
            }
            Expr::Unary { op, expr } => {
                let v = self.eval(expr)?;
                match op {
                    UnaryOp::Neg => Ok(DocValue::Num(finite(-as_num(&v)?)?)),
                    UnaryOp::Not => Ok(DocValue::Bool(!as_bool(&v)?)),
                }
            }
            Expr::Binary { op, lhs, rhs } => self.eval_binary(*op, lhs, rhs),
            Expr::Call { func, args } => {
                let mut nums = Vec::with_capacity(args.len());
                for a in args {
                    nums.push(as_num(&self.eval(a)?)?);
                }
                let out = match func {
                    Builtin::Min => nums[0].min(nums[1]),
                    Builtin::Max => nums[0].max(nums[1]),
                    Builtin::Abs => nums[0].abs(),
                    Builtin::Floor => nums[0].floor(),
                    Builtin::Clamp => nums[0].max(nums[1]).min(nums[2].max(nums[1])),
                };
                Ok(DocValue::Num(finite(out)?))
            }
            Expr::IfExpr {
                cond,
                then_val,
                else_val,
            } => {
                if as_bool(&self.eval(cond)?)? {
                    self.eval(then_val)
                } else {
                    self.eval(else_val)
                }
            }
            Expr::Agg {
                kind,
                binder,
                path,
                body,
            } => self.eval_agg(*kind, binder, path, body.as_deref()),
        }
    }

    fn eval_binary(&mut self, op: BinOp, lhs: &Expr, rhs: &Expr) -> Result<DocValue, Fault> {
        // Short-circuit forms first: the right side must not run (or fault)
        // when the left side already decides.
        match op {
            BinOp::And => {
                let l = as_bool(&self.eval(lhs)?)?;
                if !l {
                    return Ok(DocValue::Bool(false));
                }
                return Ok(DocValue::Bool(as_bool(&self.eval(rhs)?)?));
            }
            BinOp::Or => {
                let l = as_bool(&self.eval(lhs)?)?;
                if l {
                    return Ok(DocValue::Bool(true));
                }
                return Ok(DocValue::Bool(as_bool(&self.eval(rhs)?)?));
            }
            _ => {}
        }
        let l = self.eval(lhs)?;
        let r = self.eval(rhs)?;
        let out = match op {
            BinOp::Add => DocValue::Num(finite(as_num(&l)? + as_num(&r)?)?),
            BinOp::Sub => DocValue::Num(finite(as_num(&l)? - as_num(&r)?)?),
            BinOp::Mul => DocValue::Num(finite(as_num(&l)? * as_num(&r)?)?),
            BinOp::Div => {
                let d = as_num(&r)?;
                if d == 0.0 {
                    return Err(Fault::DivideByZero);
                }
                DocValue::Num(finite(as_num(&l)? / d)?)
            }
            BinOp::Eq => DocValue::Bool(l == r),
            BinOp::Ne => DocValue::Bool(l != r),
            BinOp::Lt => DocValue::Bool(as_num(&l)? < as_num(&r)?),
            BinOp::Le => DocValue::Bool(as_num(&l)? <= as_num(&r)?),
            BinOp::Gt => DocValue::Bool(as_num(&l)? > as_num(&r)?),
            BinOp::Ge => DocValue::Bool(as_num(&l)? >= as_num(&r)?),
            BinOp::And | BinOp::Or => unreachable!("handled above"),
        };
        Ok(out)
    }

    fn eval_agg(
        &mut self,
        kind: AggKind,
        binder: &str,
        path: &Pointer,
        body: Option<&Expr>,
    ) -> Result<DocValue, Fault> {
        let seq = match path.resolve(self.state) {
            Ok(DocValue::Seq(items)) => items.clone(),
            Ok(other) => return Err(type_mismatch("sequence", other)),
            Err(_) => {
                return Err(Fault::MissingPath {
                    path: path.to_string(),
                })
            }
        };
        let mut sum = 0.0;
        let mut count = 0.0;
        let mut kept = Vec::new();
        for item in seq {
            self.budget.charge()?;
            self.locals.push((binder.to_string(), item.clone()));
            let step = (|interp: &mut Self| -> Result<(), Fault> {
                match kind {
                    AggKind::Sum => {
                        let body = body.expect("parser enforces sum body");
                        sum += as_num(&interp.eval(body)?)?;
                        Ok(())
                    }
                    AggKind::Count => {
                        let keep = match body {
                            Some(cond) => as_bool(&interp.eval(cond)?)?,
                            None => true,
                        };
                        if keep {
                            count += 1.0;
                        }
                        Ok(())
                    }
                    AggKind::Filter => {
                        let cond = body.expect("parser enforces filter condition");
                        if as_bool(&interp.eval(cond)?)? {
                            kept.push(item.clone());
                        }
                        Ok(())
                    }
                }
            })(self);
            self.locals.pop();
            step?;
        }
        match kind {
            AggKind::Sum => Ok(DocValue::Num(finite(sum)?)),
            AggKind::Count => Ok(DocValue::Num(count)),
            AggKind::Filter => Ok(DocValue::Seq(kept)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::script::parse_body;

    fn doc(json: &str) -> DocValue {
        DocValue::from_json_str(json).unwrap()
    }

    fn run_patch(src: &str, state: &str, action: &str) -> Result<Vec<PatchOp>, Fault> {
        let body = parse_body(src).unwrap();
        eval_patch_body(
            &body,
            &doc(state),
            &doc(action),
            &mut StepBudget::default(),
        )
    }

    fn run_pre(src: &str, state: &str, action: &str) -> Result<(bool, String), Fault> {
        let body = parse_body(src).unwrap();
        eval_precondition_body(
            &body,
            &doc(state),
            &doc(action),
            &mut StepBudget::default(),
        )
    }

    #[test]
    fn action_body_emits_money_deduction() {
        let patch =
            run_patch(r#"emit replace "/money" (get "/money" - 100);"#, r#"{"money":250}"#, "{}")
                .unwrap();
        assert_eq!(
            patch,
            vec![PatchOp::Replace {
                path: "/money".parse().unwrap(),
                value: DocValue::Num(150.0),
            }]
        );
    }

    #[test]
    fn failing_precondition_returns_feedback() {
        let (valid, feedback) = run_pre(
            r#"return (get "/money" >= 100, "insufficient funds");"#,
            r#"{"money":50}"#,
            "{}",
        )
        .unwrap();
        assert!(!valid);
        assert_eq!(feedback, "insufficient funds");
    }

    #[test]
    fn passing_precondition() {
        let (valid, _) = run_pre(
            r#"return (get "/money" >= 100, "insufficient funds");"#,
            r#"{"money":250}"#,
            "{}",
        )
        .unwrap();
        assert!(valid);
    }

    #[test]
    fn division_by_zero_faults() {
        let err = run_patch(r#"emit replace "/x" (1 / (get "/n" - 2));"#, r#"{"n":2}"#, "{}")
            .unwrap_err();
        assert_eq!(err, Fault::DivideByZero);
    }

    #[test]
    fn missing_path_without_default_faults() {
        let err = run_patch(r#"emit replace "/x" (get "/absent");"#, "{}", "{}").unwrap_err();
        assert_eq!(
            err,
            Fault::MissingPath {
                path: "/absent".into()
            }
        );
    }

    #[test]
    fn missing_path_with_default_recovers() {
        let patch =
            run_patch(r#"emit replace "/x" (get "/absent" default 7);"#, "{}", "{}").unwrap();
        assert_eq!(
            patch,
            vec![PatchOp::Replace {
                path: "/x".parse().unwrap(),
                value: DocValue::Num(7.0),
            }]
        );
    }

    #[test]
    fn aget_reads_action_document() {
        let patch = run_patch(
            r#"emit replace "/price" (aget "/amount");"#,
            "{}",
            r#"{"type":"set_price","amount":3.5}"#,
        )
        .unwrap();
        assert_eq!(
            patch,
            vec![PatchOp::Replace {
                path: "/price".parse().unwrap(),
                value: DocValue::Num(3.5),
            }]
        );
    }

    #[test]
    fn budget_exhaustion_faults_instead_of_hanging() {
        let body = parse_body(r#"emit replace "/x" (1 + 2 + 3 + 4);"#).unwrap();
        let err = eval_patch_body(&body, &doc("{}"), &doc("{}"), &mut StepBudget::new(3))
            .unwrap_err();
        assert_eq!(err, Fault::BudgetExceeded);
    }

    #[test]
    fn aggregation_sum_count_filter() {
        let state = r#"{"orders":[{"qty":2},{"qty":5},{"qty":1}]}"#;
        let patch = run_patch(
            r#"
            emit replace "/total" (sum o in "/orders" of field o "/qty");
            emit replace "/big" (count o in "/orders" where field o "/qty" >= 2);
            emit replace "/kept" (filter o in "/orders" where field o "/qty" >= 2);
            "#,
            state,
            "{}",
        )
        .unwrap();
        assert_eq!(patch[0].path().to_string(), "/total");
        assert!(matches!(&patch[0], PatchOp::Replace { value, .. } if value.as_num() == Some(8.0)));
        assert!(matches!(&patch[1], PatchOp::Replace { value, .. } if value.as_num() == Some(2.0)));
        let kept = doc(r#"[{"qty":2},{"qty":5}]"#);
        assert!(matches!(&patch[2], PatchOp::Replace { value, .. } if *value == kept));
    }

    #[test]
    fn logic_requires_booleans() {
        let err = run_pre(r#"return (1 and true, "x");"#, "{}", "{}").unwrap_err();
        assert!(matches!(err, Fault::TypeMismatch { expected: "boolean", .. }));
    }

    #[test]
    fn arithmetic_requires_numbers() {
        let err = run_patch(r#"emit replace "/x" ("a" + 1);"#, "{}", "{}").unwrap_err();
        assert!(matches!(err, Fault::TypeMismatch { expected: "number", .. }));
    }

    #[test]
    fn and_or_short_circuit() {
        let (valid, _) = run_pre(
            r#"return (true or (1 / 0) > 0, "never divides");"#,
            "{}",
            "{}",
        )
        .unwrap();
        assert!(valid);
        let (valid, _) = run_pre(
            r#"return (false and (1 / 0) > 0, "never divides");"#,
            "{}",
            "{}",
        )
        .unwrap();
        assert!(!valid);
    }

    #[test]
    fn overflow_is_a_non_finite_fault() {
        let big = format!("1{}", "0".repeat(300));
        let err = run_patch(
            &format!(r#"let a = {big}; emit replace "/x" (a * a);"#),
            "{}",
            "{}",
        )
        .unwrap_err();
        assert_eq!(err, Fault::NonFinite);
    }

    #[test]
    fn precondition_without_return_faults() {
        let err = run_pre(r#"let x = 1;"#, "{}", "{}").unwrap_err();
        assert_eq!(err, Fault::NoReturn);
    }

    #[test]
    fn emit_in_precondition_faults() {
        let err = run_pre(r#"emit replace "/x" 1;"#, "{}", "{}").unwrap_err();
        assert_eq!(err, Fault::UnexpectedEmit);
    }

    #[test]
    fn return_in_patch_body_faults() {
        let err = run_patch(r#"return (true, "no");"#, "{}", "{}").unwrap_err();
        assert_eq!(err, Fault::UnexpectedReturn);
    }

    #[test]
    fn builtins_and_clamp() {
        let patch = run_patch(
            r#"
            emit replace "/a" (min(3, 5));
            emit replace "/b" (max(3, 5));
            emit replace "/c" (abs(0 - 2));
            emit replace "/d" (floor(2.9));
            emit replace "/e" (clamp(12, 0, 10));
            emit replace "/f" (clamp(0 - 3, 0, 10));
            "#,
            "{}",
            "{}",
        )
        .unwrap();
        let nums: Vec<f64> = patch
            .iter()
            .map(|p| match p {
                PatchOp::Replace { value, .. } => value.as_num().unwrap(),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(nums, vec![3.0, 5.0, 2.0, 2.0, 10.0, 0.0]);
    }

    #[test]
    fn if_statement_branches() {
        let patch = run_patch(
            r#"
            if get "/money" >= 100 {
                emit replace "/tier" "rich";
            } else {
                emit replace "/tier" "poor";
            }
            "#,
            r#"{"money":40}"#,
            "{}",
        )
        .unwrap();
        assert!(matches!(
            &patch[0],
            PatchOp::Replace { value, .. } if value.as_text() == Some("poor")
        ));
    }

    #[test]
    fn evaluation_is_deterministic() {
        let src = r#"
            let base = get "/money";
            emit replace "/money" (base - aget "/cost" default 10);
            emit add "/log" "spent";
        "#;
        let a = run_patch(src, r#"{"money":100}"#, r#"{"cost":25}"#).unwrap();
        let b = run_patch(src, r#"{"money":100}"#, r#"{"cost":25}"#).unwrap();
        assert_eq!(a, b);
    }
}
