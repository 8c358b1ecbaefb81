use thiserror::Error;

use super::ast::*;
use super::lex::{lex, Kw, Lexeme, Punct, Tok};
use crate::doc::{DocValue, Pointer};

#[derive(Debug, Clone, Error, PartialEq)]
#[error("parse error at {line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

/// Parses a function body: a statement list with static checks (identifiers
/// bound before use, emit arity matching the op, pointer literals valid).
pub fn parse_body(source: &str) -> Result<Vec<Stmt>, ParseError> {
    let lexemes = lex(source)?;
    let mut p = Parser { lexemes, pos: 0 };
    let body = p.stmts_until_end()?;
    let mut scope = Vec::new();
    check_stmts(&body, &mut scope)?;
    Ok(body)
}

struct Parser {
    lexemes: Vec<Lexeme>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.lexemes.get(self.pos).map(|l| &l.tok)
    }

    fn bump(&mut self) -> Option<Lexeme> {
        let l = self.lexemes.get(self.pos).cloned();
        if l.is_some() {
            self.pos += 1;
        }
        l
    }

    fn here(&self) -> (usize, usize) {
        self.lexemes
            .get(self.pos)
            .or_else(|| self.lexemes.last())
            .map(|l| (l.line, l.col))
            .unwrap_or((1, 1))
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError {
            line,
            col,
            message: message.into(),
        }
    }

    fn eat_punct(&mut self, want: Punct) -> bool {
        if self.peek() == Some(&Tok::Punct(want)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, want: Punct, what: &str) -> Result<(), ParseError> {
        if self.eat_punct(want) {
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn eat_kw(&mut self, want: Kw) -> bool {
        if self.peek() == Some(&Tok::Kw(want)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, want: Kw, what: &str) -> Result<(), ParseError> {
        if self.eat_kw(want) {
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(_)) => match self.bump() {
                Some(Lexeme {
                    tok: Tok::Ident(name),
                    ..
                }) => Ok(name),
                _ => unreachable!(),
            },
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    fn expect_pointer(&mut self, what: &str) -> Result<Pointer, ParseError> {
        let err = self.error(format!("expected {what} as a string literal"));
        match self.peek() {
            Some(Tok::Str(_)) => {
                let (line, col) = self.here();
                let Some(Lexeme {
                    tok: Tok::Str(text),
                    ..
                }) = self.bump()
                else {
                    unreachable!()
                };
                Pointer::parse(&text).map_err(|e| ParseError {
                    line,
                    col,
                    message: e.to_string(),
                })
            }
            _ => Err(err),
        }
    }

    fn stmts_until_end(&mut self) -> Result<Vec<Stmt>, ParseError> {
        let mut out = Vec::new();
        while self.peek().is_some() {
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect_punct(Punct::LBrace, "'{'")?;
        let mut out = Vec::new();
        while !self.eat_punct(Punct::RBrace) {
            if self.peek().is_none() {
                return Err(self.error("unterminated block, expected '}'"));
            }
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        if self.eat_kw(Kw::Let) {
            let name = self.expect_ident("binding name after 'let'")?;
            self.expect_punct(Punct::Assign, "'=' in let binding")?;
            let value = self.expr()?;
            self.expect_punct(Punct::Semi, "';' after let binding")?;
            return Ok(Stmt::Let { name, value });
        }
        if self.eat_kw(Kw::Emit) {
            let op = if self.eat_kw(Kw::Add) {
                EmitOp::Add
            } else if self.eat_kw(Kw::Remove) {
                EmitOp::Remove
            } else if self.eat_kw(Kw::Replace) {
                EmitOp::Replace
            } else {
                return Err(self.error("expected add, remove, or replace after 'emit'"));
            };
            let path = self.expect_pointer("patch path")?;
            let value = match op {
                EmitOp::Remove => None,
                EmitOp::Add | EmitOp::Replace => Some(self.expr()?),
            };
            self.expect_punct(Punct::Semi, "';' after emit")?;
            return Ok(Stmt::Emit { op, path, value });
        }
        if self.eat_kw(Kw::Return) {
            self.expect_punct(Punct::LParen, "'(' after 'return'")?;
            let valid = self.expr()?;
            self.expect_punct(Punct::Comma, "',' between return values")?;
            let feedback = self.expr()?;
            self.expect_punct(Punct::RParen, "')' closing return")?;
            self.expect_punct(Punct::Semi, "';' after return")?;
            return Ok(Stmt::Return { valid, feedback });
        }
        if self.eat_kw(Kw::If) {
            return self.if_stmt();
        }
        Err(self.error("expected a statement (let, emit, return, if)"))
    }

    fn if_stmt(&mut self) -> Result<Stmt, ParseError> {
        let cond = self.expr()?;
        let then_body = self.block()?;
        let else_body = if self.eat_kw(Kw::Else) {
            if self.peek() == Some(&Tok::Kw(Kw::If)) {
                self.pos += 1;
                vec![self.if_stmt()?]
            } else {
                self.block()?
            }
        } else {
            Vec::new()
        };
        Ok(Stmt::If {
            cond,
            then_body,
            else_body,
        })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        if self.eat_kw(Kw::If) {
            let cond = self.expr()?;
            self.expect_kw(Kw::Then, "'then' in if expression")?;
            let then_val = self.expr()?;
            self.expect_kw(Kw::Else, "'else' in if expression")?;
            let else_val = self.expr()?;
            return Ok(Expr::IfExpr {
                cond: Box::new(cond),
                then_val: Box::new(then_val),
                else_val: Box::new(else_val),
            });
        }
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and_expr()?;
        while self.eat_kw(Kw::Or) {
            let rhs = self.and_expr()?;
            lhs = Expr::Binary {
                op: BinOp::Or,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.not_expr()?;
        while self.eat_kw(Kw::And) {
            let rhs = self.not_expr()?;
            lhs = Expr::Binary {
                op: BinOp::And,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, ParseError> {
        if self.eat_kw(Kw::Not) {
            let expr = self.not_expr()?;
            return Ok(Expr::Unary {
                op: UnaryOp::Not,
                expr: Box::new(expr),
            });
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Some(Tok::Punct(Punct::Eq)) => BinOp::Eq,
            Some(Tok::Punct(Punct::Ne)) => BinOp::Ne,
            Some(Tok::Punct(Punct::Lt)) => BinOp::Lt,
            Some(Tok::Punct(Punct::Le)) => BinOp::Le,
            Some(Tok::Punct(Punct::Gt)) => BinOp::Gt,
            Some(Tok::Punct(Punct::Ge)) => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.pos += 1;
        let rhs = self.add_expr()?;
        Ok(Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        })
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Punct(Punct::Plus)) => BinOp::Add,
                Some(Tok::Punct(Punct::Minus)) => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.mul_expr()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn mul_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Punct(Punct::Star)) => BinOp::Mul,
                Some(Tok::Punct(Punct::Slash)) => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_punct(Punct::Minus) {
            let expr = self.unary()?;
            return Ok(Expr::Unary {
                op: UnaryOp::Neg,
                expr: Box::new(expr),
            });
        }
        self.primary()
    }

    fn maybe_default(&mut self) -> Result<Option<Box<Expr>>, ParseError> {
        if self.eat_kw(Kw::Default) {
            Ok(Some(Box::new(self.primary()?)))
        } else {
            Ok(None)
        }
    }

    fn call_args(&mut self, n: usize, name: &str) -> Result<Vec<Expr>, ParseError> {
        self.expect_punct(Punct::LParen, &format!("'(' after {name}"))?;
        let mut args = Vec::with_capacity(n);
        for i in 0..n {
            if i > 0 {
                self.expect_punct(Punct::Comma, &format!("',' in {name} arguments"))?;
            }
            args.push(self.expr()?);
        }
        self.expect_punct(Punct::RParen, &format!("')' closing {name}"))?;
        Ok(args)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(Expr::Lit(DocValue::Num(n)))
            }
            Some(Tok::Str(s)) => {
                self.pos += 1;
                Ok(Expr::Lit(DocValue::Text(s)))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                Ok(Expr::Var(name))
            }
            Some(Tok::Kw(Kw::True)) => {
                self.pos += 1;
                Ok(Expr::Lit(DocValue::Bool(true)))
            }
            Some(Tok::Kw(Kw::False)) => {
                self.pos += 1;
                Ok(Expr::Lit(DocValue::Bool(false)))
            }
            Some(Tok::Kw(Kw::Null)) => {
                self.pos += 1;
                Ok(Expr::Lit(DocValue::Null))
            }
            Some(Tok::Punct(Punct::LParen)) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_punct(Punct::RParen, "')'")?;
                Ok(inner)
            }
            Some(Tok::Kw(Kw::Get)) => {
                self.pos += 1;
                let path = self.expect_pointer("state path after 'get'")?;
                let default = self.maybe_default()?;
                Ok(Expr::Get { path, default })
            }
            Some(Tok::Kw(Kw::AGet)) => {
                self.pos += 1;
                let path = self.expect_pointer("action path after 'aget'")?;
                let default = self.maybe_default()?;
                Ok(Expr::AGet { path, default })
            }
            Some(Tok::Kw(Kw::Field)) => {
                self.pos += 1;
                let var = self.expect_ident("bound variable after 'field'")?;
                let path = self.expect_pointer("path after 'field'")?;
                let default = self.maybe_default()?;
                Ok(Expr::Field { var, path, default })
            }
            Some(Tok::Kw(Kw::Min)) => {
                self.pos += 1;
                let args = self.call_args(2, "min")?;
                Ok(Expr::Call {
                    func: Builtin::Min,
                    args,
                })
            }
            Some(Tok::Kw(Kw::Max)) => {
                self.pos += 1;
                let args = self.call_args(2, "max")?;
                Ok(Expr::Call {
                    func: Builtin::Max,
                    args,
                })
            }
            Some(Tok::Kw(Kw::Abs)) => {
                self.pos += 1;
                let args = self.call_args(1, "abs")?;
                Ok(Expr::Call {
                    func: Builtin::Abs,
                    args,
                })
            }
            Some(Tok::Kw(Kw::Floor)) => {
                self.pos += 1;
                let args = self.call_args(1, "floor")?;
                Ok(Expr::Call {
                    func: Builtin::Floor,
                    args,
                })
            }
            Some(Tok::Kw(Kw::Clamp)) => {
                self.pos += 1;
                let args = self.call_args(3, "clamp")?;
                Ok(Expr::Call {
                    func: Builtin::Clamp,
                    args,
                })
            }
            Some(Tok::Kw(kw @ (Kw::Sum | Kw::Count | Kw::Filter))) => {
                self.pos += 1;
                let kind = match kw {
                    Kw::Sum => AggKind::Sum,
                    Kw::Count => AggKind::Count,
                    _ => AggKind::Filter,
                };
                let binder = self.expect_ident("element binder")?;
                self.expect_kw(Kw::In, "'in'")?;
                let path = self.expect_pointer("sequence path")?;
                let body = match kind {
                    AggKind::Sum => {
                        self.expect_kw(Kw::Of, "'of' in sum")?;
                        Some(Box::new(self.expr()?))
                    }
                    AggKind::Filter => {
                        self.expect_kw(Kw::Where, "'where' in filter")?;
                        Some(Box::new(self.expr()?))
                    }
                    AggKind::Count => {
                        if self.eat_kw(Kw::Where) {
                            Some(Box::new(self.expr()?))
                        } else {
                            None
                        }
                    }
                };
                Ok(Expr::Agg {
                    kind,
                    binder,
                    path,
                    body,
                })
            }
            _ => Err(self.error("expected an expression")),
        }
    }
}

fn check_stmts(stmts: &[Stmt], scope: &mut Vec<String>) -> Result<(), ParseError> {
    let depth = scope.len();
    for stmt in stmts {
        match stmt {
            Stmt::Let { name, value } => {
                check_expr(value, scope)?;
                scope.push(name.clone());
            }
            Stmt::Emit { value, .. } => {
                if let Some(v) = value {
                    check_expr(v, scope)?;
                }
            }
            Stmt::Return { valid, feedback } => {
                check_expr(valid, scope)?;
                check_expr(feedback, scope)?;
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
            } => {
                check_expr(cond, scope)?;
                check_stmts(then_body, scope)?;
                check_stmts(else_body, scope)?;
            }
        }
    }
    scope.truncate(depth);
    Ok(())
}

fn unbound(name: &str) -> ParseError {
    ParseError {
        line: 0,
        col: 0,
        message: format!("unbound identifier {name:?}"),
    }
}

fn check_expr(expr: &Expr, scope: &mut Vec<String>) -> Result<(), ParseError> {
    match expr {
        Expr::Lit(_) => Ok(()),
        Expr::Var(name) => {
            if scope.iter().any(|s| s == name) {
                Ok(())
            } else {
                Err(unbound(name))
            }
        }
        Expr::Get { default, .. } | Expr::AGet { default, .. } => match default {
            Some(d) => check_expr(d, scope),
            None => Ok(()),
        },
        Expr::Field { var, default, .. } => {
            if !scope.iter().any(|s| s == var) {
                return Err(unbound(var));
            }
            match default {
                Some(d) => check_expr(d, scope),
                None => Ok(()),
            }
        }
        Expr::Unary { expr, .. } => check_expr(expr, scope),
        Expr::Binary { lhs, rhs, .. } => {
            check_expr(lhs, scope)?;
            check_expr(rhs, scope)
        }
        Expr::Call { args, .. } => {
            for a in args {
                check_expr(a, scope)?;
            }
            Ok(())
        }
        Expr::IfExpr {
            cond,
            then_val,
            else_val,
        } => {
            check_expr(cond, scope)?;
            check_expr(then_val, scope)?;
            check_expr(else_val, scope)
        }
        Expr::Agg { binder, body, .. } => {
            if let Some(body) = body {
                scope.push(binder.clone());
                let r = check_expr(body, scope);
                scope.pop();
                r
            } else {
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_body_example_parses() {
        let body = parse_body(r#"emit replace "/money" (get "/money" - 100);"#).unwrap();
        assert_eq!(body.len(), 1);
        assert!(matches!(
            &body[0],
            Stmt::Emit {
                op: EmitOp::Replace,
                ..
            }
        ));
    }

    #[test]
    fn precondition_body_example_parses() {
        let body =
            parse_body(r#"return (get "/money" >= 100, "insufficient funds");"#).unwrap();
        assert!(matches!(&body[0], Stmt::Return { .. }));
    }

    #[test]
    fn missing_emit_args_is_syntax_error() {
        let err = parse_body("emit replace").unwrap_err();
        assert!(err.message.contains("patch path"), "{err}");
    }

    #[test]
    fn unbound_identifier_rejected() {
        let err = parse_body("emit replace \"/x\" y;").unwrap_err();
        assert!(err.message.contains("unbound identifier"), "{err}");
    }

    #[test]
    fn let_bindings_scope_through_statements() {
        parse_body(
            r#"
            let cost = aget "/quantity" * 2;
            emit replace "/money" (get "/money" - cost);
            "#,
        )
        .unwrap();
    }

    #[test]
    fn if_statement_and_expression_forms() {
        parse_body(
            r#"
            let x = if get "/a" > 0 then 1 else 2;
            if x == 1 {
                emit replace "/b" 1;
            } else if x == 2 {
                emit replace "/b" 2;
            } else {
                emit remove "/b";
            }
            "#,
        )
        .unwrap();
    }

    #[test]
    fn aggregation_forms_parse_and_bind() {
        parse_body(
            r#"
            let total = sum item in "/prices" of (field item "/amount" default 0);
            let n = count item in "/prices" where field item "/amount" > 2;
            emit replace "/expensive" (filter item in "/prices" where field item "/amount" > 2);
            emit replace "/total" total;
            emit replace "/n" n;
            "#,
        )
        .unwrap();
    }

    #[test]
    fn aggregation_binder_does_not_leak() {
        let err = parse_body(
            r#"
            let total = sum item in "/prices" of (field item "/amount" default 0);
            emit replace "/x" item;
            "#,
        )
        .unwrap_err();
        assert!(err.message.contains("unbound identifier"));
    }

    #[test]
    fn emit_remove_takes_no_value() {
        let body = parse_body(r#"emit remove "/x";"#).unwrap();
        assert!(matches!(&body[0], Stmt::Emit { value: None, .. }));
    }

    #[test]
    fn bad_pointer_literal_rejected_at_parse() {
        let err = parse_body(r#"emit replace "x" 1;"#).unwrap_err();
        assert!(err.message.contains("pointer"), "{err}");
    }

    #[test]
    fn comments_are_ignored() {
        parse_body(
            r#"
            # adjust the balance
            emit replace "/money" (get "/money" + 1); # trailing note
            "#,
        )
        .unwrap();
    }

    #[test]
    fn keywords_are_reserved() {
        assert!(parse_body("let get = 1;").is_err());
    }
}
