//! Well-formedness checks on parsed programs plus an annotation.
//!
//! These are the static errors a front end should reject before any
//! verification runs: name clashes, arity mismatches, undeclared variables,
//! calls to unspecified bodyless methods, and use of the reserved `$`
//! separator in user-written identifiers. Type errors inside expressions
//! are left to evaluation, where they surface as verification errors.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::assertion::assertion_free_vars;
use super::ast::*;
use crate::config::Type;

pub fn well_formed(p: &Program, ann: &Annotation) -> Vec<String> {
    let mut errs = Vec::new();
    let mut seen = BTreeSet::new();
    for pd in &p.preds {
        if !seen.insert(pd.name.clone()) {
            errs.push(format!("duplicate predicate '{}'", pd.name));
        }
        check_reserved(&pd.name, &format!("predicate {}", pd.name), &mut errs);
        let mut params = BTreeSet::new();
        for (x, _) in &pd.params {
            if !params.insert(x.clone()) {
                errs.push(format!("predicate {}: duplicate parameter '{x}'", pd.name));
            }
            check_reserved(x, &format!("predicate {}", pd.name), &mut errs);
        }
        if let Some(body) = &pd.body {
            let ctx = format!("predicate {} body", pd.name);
            check_assertion(body, p, &params, &ctx, &mut errs);
        }
    }
    let mut seen = BTreeSet::new();
    for m in &p.methods {
        if !seen.insert(m.name.clone()) {
            errs.push(format!("duplicate method '{}'", m.name));
        }
        check_reserved(&m.name, &format!("method {}", m.name), &mut errs);
        let mut scope = BTreeSet::new();
        for (x, _) in m.params.iter().chain(&m.returns) {
            if !scope.insert(x.clone()) {
                errs.push(format!("method {}: duplicate parameter '{x}'", m.name));
            }
            check_reserved(x, &format!("method {}", m.name), &mut errs);
        }
        if let Some(spec) = &m.spec {
            let mut spec_scope = scope.clone();
            for (b, _) in &spec.binders {
                if !spec_scope.insert(b.clone()) {
                    errs.push(format!("method {}: binder '?{b}' clashes", m.name));
                }
            }
            check_assertion(&spec.pre, p, &spec_scope, &format!("method {} requires", m.name), &mut errs);
            check_assertion(&spec.post, p, &spec_scope, &format!("method {} ensures", m.name), &mut errs);
        }
        if let Some((pre, post)) = ann.methods.get(&m.name) {
            if m.is_library() {
                errs.push(format!(
                    "method {}: annotation on a library method is ignored; use its contract",
                    m.name
                ));
            }
            check_assertion(pre, p, &scope, &format!("method {} requires", m.name), &mut errs);
            check_assertion(post, p, &scope, &format!("method {} ensures", m.name), &mut errs);
        }
        if let Some(body) = &m.body {
            check_stmt(body, p, ann, &mut scope.clone(), &format!("method {}", m.name), &mut errs);
        }
    }
    let mut scope = BTreeSet::new();
    check_stmt(&p.init, p, ann, &mut scope, "init", &mut errs);
    for id in ann.loops.keys() {
        if !loop_exists(p, *id) {
            errs.push(format!("invariant for unknown loop site {id}"));
        }
    }
    errs
}

fn loop_exists(p: &Program, id: usize) -> bool {
    fn in_stmt(s: &Stmt, id: usize) -> bool {
        match s {
            Stmt::Seq(ss) => ss.iter().any(|s| in_stmt(s, id)),
            Stmt::If { then_s, else_s, .. } => in_stmt(then_s, id) || in_stmt(else_s, id),
            Stmt::Choice(a, b) => in_stmt(a, id) || in_stmt(b, id),
            Stmt::While { id: i, body, .. } => *i == id || in_stmt(body, id),
            _ => false,
        }
    }
    p.methods
        .iter()
        .filter_map(|m| m.body.as_ref())
        .chain(core::iter::once(&p.init))
        .any(|s| in_stmt(s, id))
}

fn check_reserved(name: &str, ctx: &str, errs: &mut Vec<String>) {
    if name.contains('$') {
        errs.push(format!("{ctx}: identifier '{name}' uses the reserved '$' separator"));
    }
}

fn check_assertion(
    a: &Assertion,
    p: &Program,
    scope: &BTreeSet<String>,
    ctx: &str,
    errs: &mut Vec<String>,
) {
    check_assertion_arities(a, p, ctx, errs);
    let mut fv = BTreeSet::new();
    assertion_free_vars(a, &mut fv);
    for x in fv.difference(scope) {
        errs.push(format!("{ctx}: undeclared variable '{x}'"));
    }
}

fn check_assertion_arities(a: &Assertion, p: &Program, ctx: &str, errs: &mut Vec<String>) {
    match a {
        Assertion::AccPred { pred, args, .. } => {
            check_pred_use(pred, args.len(), p, ctx, errs);
            check_perm_arities(a, p, ctx, errs);
        }
        Assertion::AccField { .. } => check_perm_arities(a, p, ctx, errs),
        Assertion::Cond(e) => check_expr_arities(e, p, ctx, errs),
        Assertion::Star(x, y) => {
            check_assertion_arities(x, p, ctx, errs);
            check_assertion_arities(y, p, ctx, errs);
        }
        Assertion::Exists(_, _, b) => check_assertion_arities(b, p, ctx, errs),
        Assertion::Bool(_) | Assertion::Extensional(_) => {}
    }
}

fn check_perm_arities(a: &Assertion, p: &Program, ctx: &str, errs: &mut Vec<String>) {
    let perm = match a {
        Assertion::AccField { perm, .. } | Assertion::AccPred { perm, .. } => perm,
        _ => return,
    };
    if let PermExpr::Perm(PermLoc::Pred(name, args)) = perm {
        check_pred_use(name, args.len(), p, ctx, errs);
    }
}

fn check_expr_arities(e: &Expr, p: &Program, ctx: &str, errs: &mut Vec<String>) {
    match e {
        Expr::Perm(PermLoc::Pred(name, args)) => {
            check_pred_use(name, args.len(), p, ctx, errs);
            args.iter().for_each(|a| check_expr_arities(a, p, ctx, errs));
        }
        Expr::Unary(_, a) => check_expr_arities(a, p, ctx, errs),
        Expr::Binary(_, a, b) => {
            check_expr_arities(a, p, ctx, errs);
            check_expr_arities(b, p, ctx, errs);
        }
        _ => {}
    }
}

fn check_pred_use(name: &str, arity: usize, p: &Program, ctx: &str, errs: &mut Vec<String>) {
    match p.pred(name) {
        None => errs.push(format!("{ctx}: unknown predicate '{name}'")),
        Some(pd) if pd.params.len() != arity => errs.push(format!(
            "{ctx}: predicate '{name}' expects {} arguments, got {arity}",
            pd.params.len()
        )),
        _ => {}
    }
}

fn check_stmt(
    s: &Stmt,
    p: &Program,
    ann: &Annotation,
    scope: &mut BTreeSet<String>,
    ctx: &str,
    errs: &mut Vec<String>,
) {
    match s {
        Stmt::Seq(ss) => ss.iter().for_each(|s| check_stmt(s, p, ann, scope, ctx, errs)),
        Stmt::Skip => {}
        Stmt::Assume(a) | Stmt::Assert(a) | Stmt::Inhale(a) | Stmt::Exhale(a) => {
            check_assertion(a, p, scope, ctx, errs);
        }
        Stmt::VarDecl(ds) => {
            for (x, _) in ds {
                check_reserved(x, ctx, errs);
                if !scope.insert(x.clone()) {
                    errs.push(format!("{ctx}: redeclaration of '{x}'"));
                }
            }
        }
        Stmt::Havoc(xs) => {
            for x in xs {
                check_var(x, scope, ctx, errs);
            }
        }
        Stmt::Assign(x, e) => {
            check_var(x, scope, ctx, errs);
            check_expr_scope(e, p, scope, ctx, errs);
        }
        Stmt::FieldWrite(x, _, e) => {
            check_var(x, scope, ctx, errs);
            check_expr_scope(e, p, scope, ctx, errs);
        }
        Stmt::Call { rets, method, args } => match p.method(method) {
            None => errs.push(format!("{ctx}: call to unknown method '{method}'")),
            Some(m) => {
                if m.is_library() && m.spec.is_none() {
                    errs.push(format!(
                        "{ctx}: call to bodyless method '{method}' without a contract"
                    ));
                }
                if m.params.len() != args.len() {
                    errs.push(format!(
                        "{ctx}: '{method}' expects {} arguments, got {}",
                        m.params.len(),
                        args.len()
                    ));
                }
                if m.returns.len() != rets.len() {
                    errs.push(format!(
                        "{ctx}: '{method}' returns {} values, got {} targets",
                        m.returns.len(),
                        rets.len()
                    ));
                }
                for x in rets.iter().chain(args) {
                    check_var(x, scope, ctx, errs);
                }
            }
        },
        Stmt::If { cond, then_s, else_s } => {
            check_expr_scope(cond, p, scope, ctx, errs);
            // Declarations inside a branch do not escape it.
            check_stmt(then_s, p, ann, &mut scope.clone(), ctx, errs);
            check_stmt(else_s, p, ann, &mut scope.clone(), ctx, errs);
        }
        Stmt::Choice(a, b) => {
            check_stmt(a, p, ann, &mut scope.clone(), ctx, errs);
            check_stmt(b, p, ann, &mut scope.clone(), ctx, errs);
        }
        Stmt::While { id, cond, body } => {
            check_expr_scope(cond, p, scope, ctx, errs);
            if let Some(inv) = ann.loops.get(id) {
                check_assertion(inv, p, scope, &format!("{ctx} loop {id} invariant"), errs);
            }
            check_stmt(body, p, ann, &mut scope.clone(), ctx, errs);
        }
        Stmt::Fold { pred, args, .. } | Stmt::Unfold { pred, args, .. } => {
            match p.pred(pred) {
                None => errs.push(format!("{ctx}: unknown predicate '{pred}'")),
                Some(pd) => {
                    if pd.body.is_none() {
                        errs.push(format!(
                            "{ctx}: predicate '{pred}' is abstract and cannot be (un)folded"
                        ));
                    }
                    if pd.params.len() != args.len() {
                        errs.push(format!(
                            "{ctx}: predicate '{pred}' expects {} arguments, got {}",
                            pd.params.len(),
                            args.len()
                        ));
                    }
                }
            }
            for e in args {
                check_expr_scope(e, p, scope, ctx, errs);
            }
        }
    }
}

fn check_var(x: &str, scope: &BTreeSet<String>, ctx: &str, errs: &mut Vec<String>) {
    if !scope.contains(x) {
        errs.push(format!("{ctx}: undeclared variable '{x}'"));
    }
}

fn check_expr_scope(
    e: &Expr,
    p: &Program,
    scope: &BTreeSet<String>,
    ctx: &str,
    errs: &mut Vec<String>,
) {
    check_expr_arities(e, p, ctx, errs);
    let mut fv = BTreeSet::new();
    super::assertion::expr_free_vars(e, &mut fv);
    for x in fv.difference(scope) {
        errs.push(format!("{ctx}: undeclared variable '{x}'"));
    }
}

/// Types of every variable in scope at method entry plus body declarations,
/// for havoc and initial-state construction.
pub fn method_var_types(m: &MethodDecl) -> BTreeMap<String, Type> {
    let mut out = BTreeMap::new();
    for (x, t) in m.params.iter().chain(&m.returns) {
        out.insert(x.clone(), *t);
    }
    if let Some(b) = &m.body {
        declared_types(b, &mut out);
    }
    out
}
