//! Syntactic preservation check: a feature scan.
//!
//! The scan rejects every construct that can make verification results
//! non-monotonic in the initial resources:
//!
//! - `perm(...)` introspection anywhere (it reads the amount held, so a
//!   larger state can observably differ);
//! - wildcard or otherwise existentially chosen permission amounts, and
//!   existentially chosen predicate arguments, in exhale positions (the
//!   demonic witness choice can differ between a state and its extension);
//! - `assume` of resource assertions (intuitionistic satisfaction is
//!   anti-monotonic in the position of an assumption);
//! - existential binders in method preconditions when a partial annotation
//!   is in play (the annotation's call-site asserts re-exhale them).
//!
//! Exhale positions are: `exhale` statements, preconditions of called
//! bodyless methods (their `?x` binders count as existentials), `fold`
//! amounts, and the bodies of predicates that get folded. A program that
//! passes the scan satisfies the semantic preservation condition for every
//! bound; the scan is deliberately coarse and rejects many fine programs.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::config::Type;
use crate::lang::assertion::expr_free_vars;
use crate::lang::ast::*;

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SyntacticVerdict {
    pub reasons: Vec<String>,
}

impl SyntacticVerdict {
    pub fn passes(&self) -> bool {
        self.reasons.is_empty()
    }
}

struct Scan {
    reasons: Vec<String>,
}

impl Scan {
    fn flag(&mut self, msg: String) {
        if !self.reasons.contains(&msg) {
            self.reasons.push(msg);
        }
    }

    // ---- perm introspection, anywhere ----

    fn perm_in_expr(&mut self, e: &Expr, loc: &str) {
        match e {
            Expr::Perm(_) => self.flag(format!("perm introspection in {loc}")),
            Expr::Unary(_, a) => self.perm_in_expr(a, loc),
            Expr::Binary(_, a, b) => {
                self.perm_in_expr(a, loc);
                self.perm_in_expr(b, loc);
            }
            _ => {}
        }
    }

    fn perm_in_perm_expr(&mut self, p: &PermExpr, loc: &str) {
        if let PermExpr::Perm(_) = p {
            self.flag(format!("perm introspection in {loc}"));
        }
    }

    fn perm_in_assertion(&mut self, a: &Assertion, loc: &str) {
        match a {
            Assertion::AccField { perm, value, .. } => {
                self.perm_in_perm_expr(perm, loc);
                if let Some(e) = value {
                    self.perm_in_expr(e, loc);
                }
            }
            Assertion::AccPred { args, perm, .. } => {
                args.iter().for_each(|e| self.perm_in_expr(e, loc));
                self.perm_in_perm_expr(perm, loc);
            }
            Assertion::Cond(e) => self.perm_in_expr(e, loc),
            Assertion::Star(x, y) => {
                self.perm_in_assertion(x, loc);
                self.perm_in_assertion(y, loc);
            }
            Assertion::Exists(_, _, b) => self.perm_in_assertion(b, loc),
            Assertion::Bool(_) | Assertion::Extensional(_) => {}
        }
    }

    // ---- existentials in exhale positions ----

    fn exhaled(&mut self, a: &Assertion, bound: &mut BTreeSet<String>, loc: &str) {
        match a {
            Assertion::AccField { perm, .. } => self.exhaled_amount(perm, bound, loc),
            Assertion::AccPred { args, perm, .. } => {
                self.exhaled_amount(perm, bound, loc);
                let mut fv = BTreeSet::new();
                args.iter().for_each(|e| expr_free_vars(e, &mut fv));
                if fv.iter().any(|x| bound.contains(x)) {
                    self.flag(format!(
                        "existentially chosen predicate argument in exhale position ({loc})"
                    ));
                }
            }
            Assertion::Star(x, y) => {
                self.exhaled(x, bound, loc);
                self.exhaled(y, bound, loc);
            }
            Assertion::Exists(v, t, b) => {
                if *t == Type::Perm {
                    self.flag(format!(
                        "existential permission amount in exhale position ({loc})"
                    ));
                }
                let fresh = bound.insert(v.clone());
                self.exhaled(b, bound, loc);
                if fresh {
                    bound.remove(v);
                }
            }
            Assertion::Bool(_) | Assertion::Cond(_) | Assertion::Extensional(_) => {}
        }
    }

    fn exhaled_amount(&mut self, p: &PermExpr, bound: &BTreeSet<String>, loc: &str) {
        match p {
            PermExpr::Wildcard => {
                self.flag(format!("wildcard permission in exhale position ({loc})"))
            }
            PermExpr::Var(x) if bound.contains(x) => {
                self.flag(format!("existential permission amount in exhale position ({loc})"))
            }
            _ => {}
        }
    }

    // ---- statements ----

    fn stmt(&mut self, s: &Stmt, p: &Program, loc: &str) {
        match s {
            Stmt::Seq(ss) => ss.iter().for_each(|s| self.stmt(s, p, loc)),
            Stmt::Assume(a) => {
                self.perm_in_assertion(a, loc);
                if !is_condition(a) {
                    self.flag(format!("assume of a resource assertion in {loc}"));
                }
            }
            Stmt::Assert(a) | Stmt::Inhale(a) => self.perm_in_assertion(a, loc),
            Stmt::Exhale(a) => {
                self.perm_in_assertion(a, loc);
                self.exhaled(a, &mut BTreeSet::new(), &format!("exhale in {loc}"));
            }
            Stmt::Assign(_, e) | Stmt::FieldWrite(_, _, e) => self.perm_in_expr(e, loc),
            Stmt::If { cond, then_s, else_s } => {
                self.perm_in_expr(cond, loc);
                self.stmt(then_s, p, loc);
                self.stmt(else_s, p, loc);
            }
            Stmt::Choice(a, b) => {
                self.stmt(a, p, loc);
                self.stmt(b, p, loc);
            }
            Stmt::While { cond, body, .. } => {
                self.perm_in_expr(cond, loc);
                self.stmt(body, p, loc);
            }
            Stmt::Fold { pred, args, perm } | Stmt::Unfold { pred, args, perm } => {
                args.iter().for_each(|e| self.perm_in_expr(e, loc));
                self.perm_in_perm_expr(perm, loc);
                if matches!(s, Stmt::Fold { .. }) {
                    let floc = format!("fold of '{pred}' in {loc}");
                    self.exhaled_amount(perm, &BTreeSet::new(), &floc);
                    if let Some(body) = p.pred(pred).and_then(|pd| pd.body.as_ref()) {
                        self.exhaled(body, &mut BTreeSet::new(), &floc);
                    }
                }
            }
            Stmt::Call { .. } | Stmt::Skip | Stmt::VarDecl(_) | Stmt::Havoc(_) => {}
        }
    }
}

fn is_condition(a: &Assertion) -> bool {
    match a {
        Assertion::Bool(_) | Assertion::Cond(_) => true,
        Assertion::Star(x, y) => is_condition(x) && is_condition(y),
        _ => false,
    }
}

fn called_methods(s: &Stmt, out: &mut BTreeSet<String>) {
    match s {
        Stmt::Seq(ss) => ss.iter().for_each(|s| called_methods(s, out)),
        Stmt::Call { method, .. } => {
            out.insert(method.clone());
        }
        Stmt::If { then_s, else_s, .. } => {
            called_methods(then_s, out);
            called_methods(else_s, out);
        }
        Stmt::Choice(a, b) => {
            called_methods(a, out);
            called_methods(b, out);
        }
        Stmt::While { body, .. } => called_methods(body, out),
        _ => {}
    }
}

fn contains_exists(a: &Assertion) -> bool {
    match a {
        Assertion::Exists(..) => true,
        Assertion::Star(x, y) => contains_exists(x) || contains_exists(y),
        _ => false,
    }
}

/// Run the feature scan over the whole program, including the partial
/// annotation whose assertions the preservation condition will exhale.
pub fn check_syntactic(p: &Program, ann: &Annotation) -> SyntacticVerdict {
    let mut scan = Scan { reasons: Vec::new() };

    for pd in &p.preds {
        if let Some(b) = &pd.body {
            scan.perm_in_assertion(b, &format!("predicate '{}'", pd.name));
        }
    }

    let mut called = BTreeSet::new();
    called_methods(&p.init, &mut called);
    for m in &p.methods {
        if let Some(b) = &m.body {
            called_methods(b, &mut called);
        }
    }

    for m in &p.methods {
        if let Some(spec) = &m.spec {
            let ploc = format!("precondition of method '{}'", m.name);
            scan.perm_in_assertion(&spec.pre, &ploc);
            scan.perm_in_assertion(&spec.post, &format!("postcondition of method '{}'", m.name));
            if m.is_library() && called.contains(&m.name) {
                // The call exhales the precondition; the binders are the
                // existentials of that exhale.
                let mut bound: BTreeSet<String> =
                    spec.binders.iter().map(|(x, _)| x.clone()).collect();
                if spec.binders.iter().any(|(_, t)| *t == Type::Perm) {
                    scan.flag(format!(
                        "existential permission amount in exhale position ({ploc})"
                    ));
                }
                scan.exhaled(&spec.pre, &mut bound, &ploc);
                if contains_exists(&spec.pre) || !spec.binders.is_empty() {
                    scan.flag(format!(
                        "existential binder in precondition of bodyless method '{}'",
                        m.name
                    ));
                }
            }
        }
        if let Some(b) = &m.body {
            scan.stmt(b, p, &format!("body of method '{}'", m.name));
        }
    }

    scan.stmt(&p.init, p, "init");

    // Under a partial annotation, call-site asserts of annotated
    // preconditions become exhale positions as well.
    if !ann.methods.is_empty() || !ann.loops.is_empty() {
        for (name, (pre, post)) in &ann.methods {
            let loc = format!("annotated precondition of method '{name}'");
            scan.perm_in_assertion(pre, &loc);
            scan.perm_in_assertion(post, &format!("annotated postcondition of method '{name}'"));
            scan.exhaled(pre, &mut BTreeSet::new(), &loc);
            if contains_exists(pre) {
                scan.flag(format!(
                    "existential binder in precondition of method '{name}' under a partial annotation"
                ));
            }
        }
        for (id, inv) in &ann.loops {
            let loc = format!("invariant of loop {id}");
            scan.perm_in_assertion(inv, &loc);
            scan.exhaled(inv, &mut BTreeSet::new(), &loc);
        }
    }

    SyntacticVerdict { reasons: scan.reasons }
}
