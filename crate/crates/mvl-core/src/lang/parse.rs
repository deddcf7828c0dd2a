//! Hand-rolled lexer and recursive-descent parser for `.mvl` sources.
//!
//! Statements are self-delimiting, so separators are optional (`;` is
//! skipped wherever it appears). Because the expression language has no
//! multiplication, `*` inside assertions is always separating conjunction.
//!
//! Inline `requires`/`ensures`/`invariant` clauses on bodied methods and
//! loops are collected into the returned source `Annotation`; contracts on
//! bodyless methods (including `?x` spec binders) become part of the
//! `MethodDecl` itself, since a library's contract is a program fact rather
//! than a searchable annotation.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ast::*;
use crate::config::Type;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub msg: String,
}

impl ParseError {
    pub fn render(&self) -> String {
        format!("{}:{}: {}", self.line, self.col, self.msg)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedFile {
    pub program: Program,
    /// Source annotation: inline specs of bodied methods and loop invariants.
    pub annotation: Annotation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: u32,
    col: u32,
}

const PUNCTS: &[&str] = &[
    "::", ":=", "==", "!=", "<=", ">=", "&&", "||", "(", ")", "{", "}", ",", ":", ".", "+", "-",
    "*", "/", "<", ">", "!", "?", ";",
];

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut toks = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && i + 1 < bytes.len() && bytes[i + 1] == b'/' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let (tl, tc) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' || c == '$' {
            let start = i;
            while i < bytes.len() {
                let c = bytes[i] as char;
                if c.is_ascii_alphanumeric() || c == '_' || c == '$' {
                    i += 1;
                    col += 1;
                } else {
                    break;
                }
            }
            toks.push(Token {
                tok: Tok::Ident(src[start..i].to_string()),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                i += 1;
                col += 1;
            }
            let n: i64 = src[start..i].parse().map_err(|_| ParseError {
                line: tl,
                col: tc,
                msg: "integer literal out of range".into(),
            })?;
            toks.push(Token { tok: Tok::Int(n), line: tl, col: tc });
            continue;
        }
        let rest = &src[i..];
        let mut matched = None;
        for p in PUNCTS {
            if rest.starts_with(p) {
                matched = Some(*p);
                break;
            }
        }
        match matched {
            Some(p) => {
                toks.push(Token { tok: Tok::Punct(p), line: tl, col: tc });
                i += p.len();
                col += p.len() as u32;
            }
            None => {
                return Err(ParseError {
                    line: tl,
                    col: tc,
                    msg: format!("unexpected character '{c}'"),
                })
            }
        }
    }
    toks.push(Token { tok: Tok::Eof, line, col });
    Ok(toks)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    loop_counter: usize,
    /// Invariants collected while parsing loops.
    loop_invs: BTreeMap<usize, Assertion>,
    /// Names introduced by `?x` in the current spec clause.
    binder_names: Vec<String>,
}

pub fn parse(src: &str) -> Result<ParsedFile, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        loop_counter: 0,
        loop_invs: BTreeMap::new(),
        binder_names: Vec::new(),
    };
    p.parse_file()
}

/// Parse a single statement block, for tests and internal construction.
/// Loop ids are assigned starting at `loop_base`.
pub fn parse_stmt_block(src: &str, loop_base: usize) -> Result<Stmt, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        loop_counter: loop_base,
        loop_invs: BTreeMap::new(),
        binder_names: Vec::new(),
    };
    let stmts = p.parse_stmts_until_eof()?;
    Ok(Stmt::Seq(stmts))
}

/// Parse a single assertion, for tests and the lattice builder.
pub fn parse_assertion_str(src: &str) -> Result<Assertion, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        loop_counter: 0,
        loop_invs: BTreeMap::new(),
        binder_names: Vec::new(),
    };
    let a = p.parse_assertion()?;
    p.expect_eof()?;
    Ok(a)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        if self.pos + 1 < self.toks.len() {
            &self.toks[self.pos + 1].tok
        } else {
            &Tok::Eof
        }
    }

    fn here(&self) -> (u32, u32) {
        (self.toks[self.pos].line, self.toks[self.pos].col)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError { line, col, msg: msg.into() })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Tok::Punct(q) if *q == p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.err(format!("expected '{p}'"))
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Tok::Ident(s) if s == kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.err(format!("expected '{kw}'"))
        }
    }

    fn expect_ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn expect_eof(&mut self) -> Result<(), ParseError> {
        if matches!(self.peek(), Tok::Eof) {
            Ok(())
        } else {
            self.err("expected end of input")
        }
    }

    fn skip_seps(&mut self) {
        while self.eat_punct(";") {}
    }

    fn parse_file(&mut self) -> Result<ParsedFile, ParseError> {
        let mut program = Program::default();
        let mut annotation = Annotation::default();
        let mut init_seen = false;
        loop {
            self.skip_seps();
            match self.peek() {
                Tok::Eof => break,
                Tok::Ident(s) if s == "predicate" => {
                    self.bump();
                    program.preds.push(self.parse_pred()?);
                }
                Tok::Ident(s) if s == "method" => {
                    self.bump();
                    let (m, spec) = self.parse_method()?;
                    if let Some(spec) = spec {
                        annotation.methods.insert(m.name.clone(), spec);
                    }
                    program.methods.push(m);
                }
                Tok::Ident(s) if s == "init" => {
                    self.bump();
                    if init_seen {
                        return self.err("duplicate init block");
                    }
                    init_seen = true;
                    self.expect_punct("{")?;
                    program.init = Stmt::Seq(self.parse_stmts_until("}")?);
                    self.expect_punct("}")?;
                }
                _ => return self.err("expected 'predicate', 'method', or 'init'"),
            }
        }
        if !init_seen {
            program.init = Stmt::Seq(Vec::new());
        }
        annotation.loops = core::mem::take(&mut self.loop_invs);
        self.resolve_binders(&mut program)?;
        Ok(ParsedFile { program, annotation })
    }

    fn parse_pred(&mut self) -> Result<PredDecl, ParseError> {
        let name = self.expect_ident()?;
        self.expect_punct("(")?;
        let params = self.parse_params(")")?;
        self.expect_punct(")")?;
        let body = if self.eat_punct("{") {
            let a = self.parse_assertion()?;
            self.expect_punct("}")?;
            Some(a)
        } else {
            None
        };
        Ok(PredDecl { name, params, body })
    }

    fn parse_params(&mut self, close: &str) -> Result<Vec<(String, Type)>, ParseError> {
        let mut out = Vec::new();
        if matches!(self.peek(), Tok::Punct(p) if *p == close) {
            return Ok(out);
        }
        loop {
            let x = self.expect_ident()?;
            self.expect_punct(":")?;
            let t = self.parse_type()?;
            out.push((x, t));
            if !self.eat_punct(",") {
                break;
            }
        }
        Ok(out)
    }

    fn parse_type(&mut self) -> Result<Type, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let t = match s.as_str() {
                    "Int" => Type::Int,
                    "Bool" => Type::Bool,
                    "Ref" => Type::Ref,
                    "Perm" => Type::Perm,
                    _ => return self.err(format!("unknown type '{s}'")),
                };
                self.bump();
                Ok(t)
            }
            _ => self.err("expected type"),
        }
    }

    fn parse_method(
        &mut self,
    ) -> Result<(MethodDecl, Option<(Assertion, Assertion)>), ParseError> {
        let name = self.expect_ident()?;
        self.expect_punct("(")?;
        let params = self.parse_params(")")?;
        self.expect_punct(")")?;
        let returns = if self.eat_kw("returns") {
            self.expect_punct("(")?;
            let r = self.parse_params(")")?;
            self.expect_punct(")")?;
            r
        } else {
            Vec::new()
        };
        let mut pre: Option<Assertion> = None;
        let mut post: Option<Assertion> = None;
        self.binder_names.clear();
        loop {
            if self.eat_kw("requires") {
                let a = self.parse_assertion()?;
                pre = Some(match pre {
                    None => a,
                    Some(p) => Assertion::star(p, a),
                });
            } else if self.eat_kw("ensures") {
                let a = self.parse_assertion()?;
                post = Some(match post {
                    None => a,
                    Some(p) => Assertion::star(p, a),
                });
            } else {
                break;
            }
        }
        let binder_names = core::mem::take(&mut self.binder_names);
        let body = if self.eat_punct("{") {
            let b = Stmt::Seq(self.parse_stmts_until("}")?);
            self.expect_punct("}")?;
            Some(b)
        } else {
            None
        };
        let has_spec = pre.is_some() || post.is_some();
        let pre = pre.unwrap_or(Assertion::tt());
        let post = post.unwrap_or(Assertion::tt());
        if body.is_some() {
            if !binder_names.is_empty() {
                return self.err("'?' binders are only allowed on bodyless library methods");
            }
            let ann = if has_spec { Some((pre, post)) } else { None };
            Ok((
                MethodDecl { name, params, returns, spec: None, body },
                ann,
            ))
        } else {
            // Binder types are resolved after all predicates are known.
            let binders = binder_names.into_iter().map(|b| (b, Type::Ref)).collect();
            let spec = has_spec.then_some(MethodSpec { binders, pre, post });
            Ok((MethodDecl { name, params, returns, spec, body: None }, None))
        }
    }

    fn parse_stmts_until(&mut self, close: &str) -> Result<Vec<Stmt>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_seps();
            if matches!(self.peek(), Tok::Punct(p) if *p == close) {
                break;
            }
            if matches!(self.peek(), Tok::Eof) {
                return self.err(format!("expected '{close}'"));
            }
            out.push(self.parse_stmt()?);
        }
        Ok(out)
    }

    fn parse_stmts_until_eof(&mut self) -> Result<Vec<Stmt>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_seps();
            if matches!(self.peek(), Tok::Eof) {
                break;
            }
            out.push(self.parse_stmt()?);
        }
        Ok(out)
    }

    fn parse_block(&mut self) -> Result<Stmt, ParseError> {
        self.expect_punct("{")?;
        let ss = self.parse_stmts_until("}")?;
        self.expect_punct("}")?;
        Ok(Stmt::Seq(ss))
    }

    fn parse_stmt(&mut self) -> Result<Stmt, ParseError> {
        match self.peek().clone() {
            Tok::Ident(kw) => match kw.as_str() {
                "skip" => {
                    self.bump();
                    Ok(Stmt::Skip)
                }
                "var" => {
                    self.bump();
                    let mut ds = Vec::new();
                    loop {
                        let x = self.expect_ident()?;
                        self.expect_punct(":")?;
                        let t = self.parse_type()?;
                        ds.push((x, t));
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                    Ok(Stmt::VarDecl(ds))
                }
                "havoc" => {
                    self.bump();
                    let mut xs = Vec::new();
                    loop {
                        xs.push(self.expect_ident()?);
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                    Ok(Stmt::Havoc(xs))
                }
                "assume" => {
                    self.bump();
                    Ok(Stmt::Assume(self.parse_assertion()?))
                }
                "assert" => {
                    self.bump();
                    Ok(Stmt::Assert(self.parse_assertion()?))
                }
                "inhale" => {
                    self.bump();
                    Ok(Stmt::Inhale(self.parse_assertion()?))
                }
                "exhale" => {
                    self.bump();
                    Ok(Stmt::Exhale(self.parse_assertion()?))
                }
                "if" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let cond = self.parse_expr()?;
                    self.expect_punct(")")?;
                    let then_s = self.parse_block()?;
                    let else_s = if self.eat_kw("else") {
                        self.parse_block()?
                    } else {
                        Stmt::Skip
                    };
                    Ok(Stmt::If {
                        cond,
                        then_s: Box::new(then_s),
                        else_s: Box::new(else_s),
                    })
                }
                "choose" => {
                    self.bump();
                    let a = self.parse_block()?;
                    self.expect_kw("or")?;
                    let b = self.parse_block()?;
                    Ok(Stmt::Choice(Box::new(a), Box::new(b)))
                }
                "while" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let cond = self.parse_expr()?;
                    self.expect_punct(")")?;
                    let id = self.loop_counter;
                    self.loop_counter += 1;
                    if self.eat_kw("invariant") {
                        let inv = self.parse_assertion()?;
                        self.loop_invs.insert(id, inv);
                    }
                    let body = self.parse_block()?;
                    Ok(Stmt::While { id, cond, body: Box::new(body) })
                }
                "fold" | "unfold" => {
                    let is_fold = kw == "fold";
                    self.bump();
                    self.expect_kw("acc")?;
                    self.expect_punct("(")?;
                    let pred = self.expect_ident()?;
                    self.expect_punct("(")?;
                    let args = self.parse_expr_list(")")?;
                    self.expect_punct(")")?;
                    let perm = if self.eat_punct(",") {
                        self.parse_perm_expr()?
                    } else {
                        PermExpr::Lit(1, 1)
                    };
                    self.expect_punct(")")?;
                    Ok(if is_fold {
                        Stmt::Fold { pred, args, perm }
                    } else {
                        Stmt::Unfold { pred, args, perm }
                    })
                }
                _ if is_keyword(&kw) => self.err(format!("unexpected keyword '{kw}'")),
                _ => self.parse_assign_or_call(),
            },
            _ => self.err("expected statement"),
        }
    }

    fn parse_assign_or_call(&mut self) -> Result<Stmt, ParseError> {
        let first = self.expect_ident()?;
        if self.eat_punct(".") {
            let f = self.expect_ident()?;
            self.expect_punct(":=")?;
            let e = self.parse_expr()?;
            return Ok(Stmt::FieldWrite(first, f, e));
        }
        if self.eat_punct("(") {
            let args = self.parse_ident_list(")")?;
            self.expect_punct(")")?;
            return Ok(Stmt::Call { rets: Vec::new(), method: first, args });
        }
        let mut rets = alloc::vec![first];
        while self.eat_punct(",") {
            rets.push(self.expect_ident()?);
        }
        self.expect_punct(":=")?;
        // `x := m(...)` is a call; any other right-hand side is assignment.
        if rets.len() == 1 {
            if let (Tok::Ident(m), Tok::Punct("(")) = (self.peek().clone(), self.peek2().clone()) {
                if !is_keyword(&m) {
                    self.bump();
                    self.bump();
                    let args = self.parse_ident_list(")")?;
                    self.expect_punct(")")?;
                    return Ok(Stmt::Call { rets, method: m, args });
                }
            }
            let e = self.parse_expr()?;
            let x = rets.pop().unwrap();
            return Ok(Stmt::Assign(x, e));
        }
        let m = self.expect_ident()?;
        self.expect_punct("(")?;
        let args = self.parse_ident_list(")")?;
        self.expect_punct(")")?;
        Ok(Stmt::Call { rets, method: m, args })
    }

    fn parse_ident_list(&mut self, close: &str) -> Result<Vec<String>, ParseError> {
        let mut out = Vec::new();
        if matches!(self.peek(), Tok::Punct(p) if *p == close) {
            return Ok(out);
        }
        loop {
            out.push(self.expect_ident()?);
            if !self.eat_punct(",") {
                break;
            }
        }
        Ok(out)
    }

    fn parse_expr_list(&mut self, close: &str) -> Result<Vec<Expr>, ParseError> {
        let mut out = Vec::new();
        if matches!(self.peek(), Tok::Punct(p) if *p == close) {
            return Ok(out);
        }
        loop {
            out.push(self.parse_expr()?);
            if !self.eat_punct(",") {
                break;
            }
        }
        Ok(out)
    }

    // ---- assertions ----

    pub(crate) fn parse_assertion(&mut self) -> Result<Assertion, ParseError> {
        let mut a = self.parse_assertion_atom()?;
        while self.eat_punct("*") {
            let b = self.parse_assertion_atom()?;
            a = Assertion::star(a, b);
        }
        Ok(a)
    }

    fn parse_assertion_atom(&mut self) -> Result<Assertion, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "acc" => {
                self.bump();
                self.parse_acc()
            }
            Tok::Ident(s) if s == "exists" => {
                self.bump();
                let v = self.expect_ident()?;
                self.expect_punct(":")?;
                let t = self.parse_type()?;
                self.expect_punct("::")?;
                let body = self.parse_assertion()?;
                Ok(Assertion::Exists(v, t, Box::new(body)))
            }
            Tok::Punct("(")
                if matches!(self.peek2(), Tok::Ident(s) if s == "exists" || s == "acc") =>
            {
                self.bump();
                let a = self.parse_assertion()?;
                self.expect_punct(")")?;
                Ok(a)
            }
            _ => {
                let e = self.parse_expr()?;
                Ok(match e {
                    Expr::BoolLit(b) => Assertion::Bool(b),
                    e => Assertion::Cond(e),
                })
            }
        }
    }

    fn parse_acc(&mut self) -> Result<Assertion, ParseError> {
        self.expect_punct("(")?;
        let first = self.expect_ident_or_binder()?;
        if self.eat_punct(".") {
            let var = match first {
                Expr::Var(x) => x,
                _ => return self.err("'?' binder cannot be a field receiver"),
            };
            let field = self.expect_ident()?;
            let perm = if self.eat_punct(",") {
                self.parse_perm_expr()?
            } else {
                PermExpr::Lit(1, 1)
            };
            self.expect_punct(")")?;
            let value = if self.eat_punct("==") {
                Some(self.parse_expr()?)
            } else {
                None
            };
            Ok(Assertion::AccField { var, field, perm, value })
        } else {
            let pred = match first {
                Expr::Var(x) => x,
                _ => return self.err("'?' binder cannot be a predicate name"),
            };
            self.expect_punct("(")?;
            let args = self.parse_pred_args(")")?;
            self.expect_punct(")")?;
            let perm = if self.eat_punct(",") {
                self.parse_perm_expr()?
            } else {
                PermExpr::Lit(1, 1)
            };
            self.expect_punct(")")?;
            Ok(Assertion::AccPred { pred, args, perm })
        }
    }

    fn parse_pred_args(&mut self, close: &str) -> Result<Vec<Expr>, ParseError> {
        let mut out = Vec::new();
        if matches!(self.peek(), Tok::Punct(p) if *p == close) {
            return Ok(out);
        }
        loop {
            if self.eat_punct("?") {
                let name = self.expect_ident()?;
                self.binder_names.push(name.clone());
                out.push(Expr::Var(name));
            } else {
                out.push(self.parse_expr()?);
            }
            if !self.eat_punct(",") {
                break;
            }
        }
        Ok(out)
    }

    fn expect_ident_or_binder(&mut self) -> Result<Expr, ParseError> {
        if self.eat_punct("?") {
            let name = self.expect_ident()?;
            self.binder_names.push(name.clone());
            Ok(Expr::FracLit(0, 1)) // placeholder, rejected by callers
        } else {
            Ok(Expr::Var(self.expect_ident()?))
        }
    }

    fn parse_perm_expr(&mut self) -> Result<PermExpr, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "wildcard" => {
                self.bump();
                Ok(PermExpr::Wildcard)
            }
            Tok::Ident(s) if s == "perm" => {
                self.bump();
                self.expect_punct("(")?;
                let loc = self.parse_perm_loc()?;
                self.expect_punct(")")?;
                Ok(PermExpr::Perm(loc))
            }
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(PermExpr::Var(s))
            }
            Tok::Punct("?") => {
                self.bump();
                let name = self.expect_ident()?;
                self.binder_names.push(name.clone());
                Ok(PermExpr::Var(name))
            }
            Tok::Int(n) => {
                self.bump();
                if self.eat_punct("/") {
                    match self.bump() {
                        Tok::Int(d) if d > 0 => Ok(PermExpr::Lit(n, d)),
                        _ => self.err("expected positive denominator"),
                    }
                } else {
                    Ok(PermExpr::Lit(n, 1))
                }
            }
            _ => self.err("expected permission expression"),
        }
    }

    fn parse_perm_loc(&mut self) -> Result<PermLoc, ParseError> {
        let x = self.expect_ident()?;
        if self.eat_punct(".") {
            let f = self.expect_ident()?;
            Ok(PermLoc::Field(x, f))
        } else {
            self.expect_punct("(")?;
            let args = self.parse_expr_list(")")?;
            self.expect_punct(")")?;
            Ok(PermLoc::Pred(x, args))
        }
    }

    // ---- expressions (precedence climbing) ----

    fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        self.parse_expr_prec(0)
    }

    fn parse_expr_prec(&mut self, min: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_expr_unary()?;
        loop {
            let (op, p) = match self.peek() {
                Tok::Punct("||") => (BinOp::Or, 0),
                Tok::Punct("&&") => (BinOp::And, 1),
                Tok::Punct("==") => (BinOp::Eq, 2),
                Tok::Punct("!=") => (BinOp::Ne, 2),
                Tok::Punct("<=") => (BinOp::Le, 2),
                Tok::Punct(">=") => (BinOp::Ge, 2),
                Tok::Punct("<") => (BinOp::Lt, 2),
                Tok::Punct(">") => (BinOp::Gt, 2),
                Tok::Punct("+") => (BinOp::Add, 3),
                Tok::Punct("-") => (BinOp::Sub, 3),
                _ => break,
            };
            if p < min {
                break;
            }
            self.bump();
            let rhs = self.parse_expr_prec(p + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_expr_unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_punct("!") {
            let e = self.parse_expr_unary()?;
            return Ok(Expr::Unary(UnOp::Not, Box::new(e)));
        }
        if self.eat_punct("-") {
            let e = self.parse_expr_unary()?;
            return Ok(Expr::Unary(UnOp::Neg, Box::new(e)));
        }
        self.parse_expr_atom()
    }

    fn parse_expr_atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                if self.eat_punct("/") {
                    match self.bump() {
                        Tok::Int(d) if d > 0 => Ok(Expr::FracLit(n, d)),
                        _ => self.err("expected positive denominator"),
                    }
                } else {
                    Ok(Expr::IntLit(n))
                }
            }
            Tok::Ident(s) if s == "true" => {
                self.bump();
                Ok(Expr::BoolLit(true))
            }
            Tok::Ident(s) if s == "false" => {
                self.bump();
                Ok(Expr::BoolLit(false))
            }
            Tok::Ident(s) if s == "null" => {
                self.bump();
                Ok(Expr::NullLit)
            }
            Tok::Ident(s) if s == "perm" => {
                self.bump();
                self.expect_punct("(")?;
                let loc = self.parse_perm_loc()?;
                self.expect_punct(")")?;
                Ok(Expr::Perm(loc))
            }
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                if self.eat_punct(".") {
                    let f = self.expect_ident()?;
                    Ok(Expr::Field(s, f))
                } else {
                    Ok(Expr::Var(s))
                }
            }
            Tok::Punct("?") => {
                self.bump();
                let name = self.expect_ident()?;
                self.binder_names.push(name.clone());
                Ok(Expr::Var(name))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.parse_expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            _ => self.err("expected expression"),
        }
    }

    /// Infer types for `?x` spec binders from their use sites (predicate
    /// argument positions and permission positions).
    fn resolve_binders(&self, program: &mut Program) -> Result<(), ParseError> {
        let preds = program.preds.clone();
        for m in &mut program.methods {
            let Some(spec) = &mut m.spec else { continue };
            if spec.binders.is_empty() {
                continue;
            }
            let mut types: BTreeMap<String, Type> = BTreeMap::new();
            infer_binder_types(&spec.pre, &preds, &mut types);
            infer_binder_types(&spec.post, &preds, &mut types);
            for (name, ty) in &mut spec.binders {
                match types.get(name) {
                    Some(t) => *ty = *t,
                    None => {
                        return Err(ParseError {
                            line: 0,
                            col: 0,
                            msg: format!(
                                "cannot infer type of spec binder '?{name}' in method {}",
                                m.name
                            ),
                        })
                    }
                }
            }
            // A binder marked twice stays a single binder.
            spec.binders.dedup_by(|a, b| a.0 == b.0);
        }
        Ok(())
    }
}

fn infer_binder_types(
    a: &Assertion,
    preds: &[PredDecl],
    types: &mut BTreeMap<String, Type>,
) {
    match a {
        Assertion::AccPred { pred, args, perm } => {
            if let Some(pd) = preds.iter().find(|p| &p.name == pred) {
                for (i, arg) in args.iter().enumerate() {
                    if let (Expr::Var(x), Some((_, t))) = (arg, pd.params.get(i)) {
                        types.entry(x.clone()).or_insert(*t);
                    }
                }
            }
            if let PermExpr::Var(x) = perm {
                types.entry(x.clone()).or_insert(Type::Perm);
            }
        }
        Assertion::AccField { perm, .. } => {
            if let PermExpr::Var(x) = perm {
                types.entry(x.clone()).or_insert(Type::Perm);
            }
        }
        Assertion::Star(x, y) => {
            infer_binder_types(x, preds, types);
            infer_binder_types(y, preds, types);
        }
        Assertion::Exists(_, _, b) => infer_binder_types(b, preds, types),
        _ => {}
    }
}

pub fn is_keyword(s: &str) -> bool {
    matches!(
        s,
        "predicate"
            | "method"
            | "returns"
            | "requires"
            | "ensures"
            | "invariant"
            | "init"
            | "var"
            | "havoc"
            | "inhale"
            | "exhale"
            | "assert"
            | "assume"
            | "if"
            | "else"
            | "choose"
            | "or"
            | "while"
            | "fold"
            | "unfold"
            | "acc"
            | "perm"
            | "wildcard"
            | "exists"
            | "true"
            | "false"
            | "null"
            | "skip"
            | "Int"
            | "Bool"
            | "Ref"
            | "Perm"
    )
}
