//! Pretty-printer emitting the `.mvl` concrete syntax.
//!
//! Output re-parses to a structurally equal AST (round-trip property),
//! including inlined programs whose ghost variables use the reserved `$`
//! separator. Extensional assertions have no concrete syntax and render as
//! an opaque marker; they never occur in printable programs.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::ast::*;
use crate::config::Type;

pub fn pretty_program(p: &Program, ann: &Annotation) -> String {
    let mut out = String::new();
    for pd in &p.preds {
        out.push_str(&pretty_pred(pd));
        out.push('\n');
    }
    for m in &p.methods {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&pretty_method(m, ann));
    }
    if !out.is_empty() {
        out.push('\n');
    }
    out.push_str("init {\n");
    push_stmt_with_ann(&mut out, &p.init, 1, ann);
    out.push_str("}\n");
    out
}

fn pretty_pred(pd: &PredDecl) -> String {
    let params = params_list(&pd.params);
    match &pd.body {
        Some(b) => format!(
            "predicate {}({}) {{ {} }}",
            pd.name,
            params,
            pretty_assertion(b, &mut BTreeSet::new())
        ),
        None => format!("predicate {}({})", pd.name, params),
    }
}

fn params_list(ps: &[(String, Type)]) -> String {
    let parts: Vec<String> = ps.iter().map(|(x, t)| format!("{x}: {}", t.keyword())).collect();
    parts.join(", ")
}

fn pretty_method(m: &MethodDecl, ann: &Annotation) -> String {
    let mut out = format!("method {}({})", m.name, params_list(&m.params));
    if !m.returns.is_empty() {
        out.push_str(&format!(" returns ({})", params_list(&m.returns)));
    }
    out.push('\n');
    if let Some(spec) = &m.spec {
        // Library contract: mark each binder with `?` at its first
        // occurrence in the precondition.
        let mut pending: BTreeSet<String> =
            spec.binders.iter().map(|(x, _)| x.clone()).collect();
        out.push_str(&format!("  requires {}\n", pretty_assertion(&spec.pre, &mut pending)));
        out.push_str(&format!(
            "  ensures {}\n",
            pretty_assertion(&spec.post, &mut BTreeSet::new())
        ));
    } else if let Some((pre, post)) = ann.methods.get(&m.name) {
        let mut none = BTreeSet::new();
        out.push_str(&format!("  requires {}\n", pretty_assertion(pre, &mut none)));
        out.push_str(&format!("  ensures {}\n", pretty_assertion(post, &mut none)));
    }
    if let Some(body) = &m.body {
        out.push_str("{\n");
        push_stmt_with_ann(&mut out, body, 1, ann);
        out.push_str("}\n");
    }
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn push_stmt_with_ann(out: &mut String, s: &Stmt, level: usize, ann: &Annotation) {
    let mut none = BTreeSet::new();
    match s {
        Stmt::Seq(ss) => {
            for s in ss {
                push_stmt_with_ann(out, s, level, ann);
            }
        }
        Stmt::Skip => {
            indent(out, level);
            out.push_str("skip\n");
        }
        Stmt::Assume(a) => {
            indent(out, level);
            out.push_str(&format!("assume {}\n", pretty_assertion(a, &mut none)));
        }
        Stmt::Assert(a) => {
            indent(out, level);
            out.push_str(&format!("assert {}\n", pretty_assertion(a, &mut none)));
        }
        Stmt::Inhale(a) => {
            indent(out, level);
            out.push_str(&format!("inhale {}\n", pretty_assertion(a, &mut none)));
        }
        Stmt::Exhale(a) => {
            indent(out, level);
            out.push_str(&format!("exhale {}\n", pretty_assertion(a, &mut none)));
        }
        Stmt::VarDecl(ds) => {
            indent(out, level);
            out.push_str(&format!("var {}\n", params_list(ds)));
        }
        Stmt::Havoc(xs) => {
            indent(out, level);
            out.push_str(&format!("havoc {}\n", xs.join(", ")));
        }
        Stmt::Assign(x, e) => {
            indent(out, level);
            out.push_str(&format!("{x} := {}\n", pretty_expr(e, &mut none)));
        }
        Stmt::FieldWrite(x, f, e) => {
            indent(out, level);
            out.push_str(&format!("{x}.{f} := {}\n", pretty_expr(e, &mut none)));
        }
        Stmt::Call { rets, method, args } => {
            indent(out, level);
            if rets.is_empty() {
                out.push_str(&format!("{method}({})\n", args.join(", ")));
            } else {
                out.push_str(&format!("{} := {method}({})\n", rets.join(", "), args.join(", ")));
            }
        }
        Stmt::If { cond, then_s, else_s } => {
            indent(out, level);
            out.push_str(&format!("if ({}) {{\n", pretty_expr(cond, &mut none)));
            push_stmt_with_ann(out, then_s, level + 1, ann);
            indent(out, level);
            if matches!(**else_s, Stmt::Skip) {
                out.push_str("}\n");
            } else {
                out.push_str("} else {\n");
                push_stmt_with_ann(out, else_s, level + 1, ann);
                indent(out, level);
                out.push_str("}\n");
            }
        }
        Stmt::Choice(a, b) => {
            indent(out, level);
            out.push_str("choose {\n");
            push_stmt_with_ann(out, a, level + 1, ann);
            indent(out, level);
            out.push_str("} or {\n");
            push_stmt_with_ann(out, b, level + 1, ann);
            indent(out, level);
            out.push_str("}\n");
        }
        Stmt::While { id, cond, body } => {
            indent(out, level);
            out.push_str(&format!("while ({})", pretty_expr(cond, &mut none)));
            if let Some(inv) = ann.loops.get(id) {
                out.push_str(&format!(" invariant {}", pretty_assertion(inv, &mut none)));
            }
            out.push_str(" {\n");
            push_stmt_with_ann(out, body, level + 1, ann);
            indent(out, level);
            out.push_str("}\n");
        }
        Stmt::Fold { pred, args, perm } => {
            indent(out, level);
            out.push_str(&format!("fold {}\n", pretty_acc_pred(pred, args, perm, &mut none)));
        }
        Stmt::Unfold { pred, args, perm } => {
            indent(out, level);
            out.push_str(&format!("unfold {}\n", pretty_acc_pred(pred, args, perm, &mut none)));
        }
    }
}

fn pretty_acc_pred(
    pred: &str,
    args: &[Expr],
    perm: &PermExpr,
    pending: &mut BTreeSet<String>,
) -> String {
    let args: Vec<String> = args.iter().map(|e| pretty_expr(e, pending)).collect();
    format!("acc({pred}({}), {})", args.join(", "), pretty_perm_expr(perm, pending))
}

pub fn pretty_assertion(a: &Assertion, pending: &mut BTreeSet<String>) -> String {
    match a {
        Assertion::Bool(true) => "true".into(),
        Assertion::Bool(false) => "false".into(),
        Assertion::AccField { var, field, perm, value } => {
            let base = format!("acc({var}.{field}, {})", pretty_perm_expr(perm, pending));
            match value {
                Some(e) => format!("{base} == {}", pretty_expr(e, pending)),
                None => base,
            }
        }
        Assertion::AccPred { pred, args, perm } => pretty_acc_pred(pred, args, perm, pending),
        Assertion::Cond(e) => pretty_expr(e, pending),
        Assertion::Star(x, y) => {
            format!("{} * {}", star_operand(x, pending), star_operand(y, pending))
        }
        Assertion::Exists(v, t, b) => {
            format!("exists {v}: {} :: {}", t.keyword(), pretty_assertion(b, pending))
        }
        Assertion::Extensional(_) => "@extensional".into(),
    }
}

fn star_operand(a: &Assertion, pending: &mut BTreeSet<String>) -> String {
    match a {
        Assertion::Exists(..) => format!("({})", pretty_assertion(a, pending)),
        _ => pretty_assertion(a, pending),
    }
}

fn pretty_perm_expr(p: &PermExpr, pending: &mut BTreeSet<String>) -> String {
    match p {
        PermExpr::Lit(n, d) => format!("{n}/{d}"),
        PermExpr::Wildcard => "wildcard".into(),
        PermExpr::Perm(loc) => format!("perm({})", pretty_perm_loc(loc, pending)),
        PermExpr::Var(x) => binder_name(x, pending),
    }
}

fn pretty_perm_loc(loc: &PermLoc, pending: &mut BTreeSet<String>) -> String {
    match loc {
        PermLoc::Field(x, f) => format!("{x}.{f}"),
        PermLoc::Pred(p, args) => {
            let args: Vec<String> = args.iter().map(|e| pretty_expr(e, pending)).collect();
            format!("{p}({})", args.join(", "))
        }
    }
}

fn binder_name(x: &str, pending: &mut BTreeSet<String>) -> String {
    if pending.remove(x) {
        format!("?{x}")
    } else {
        x.into()
    }
}

// Expression precedence levels, loosest first:
// 0 = ||, 1 = &&, 2 = comparisons, 3 = + -, 4 = unary/atom.
fn prec(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 0,
        BinOp::And => 1,
        BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 2,
        BinOp::Add | BinOp::Sub => 3,
    }
}

pub fn pretty_expr(e: &Expr, pending: &mut BTreeSet<String>) -> String {
    pretty_expr_prec(e, 0, pending)
}

fn pretty_expr_prec(e: &Expr, min: u8, pending: &mut BTreeSet<String>) -> String {
    match e {
        Expr::IntLit(i) => format!("{i}"),
        Expr::BoolLit(b) => format!("{b}"),
        Expr::NullLit => "null".into(),
        Expr::FracLit(n, d) => format!("{n}/{d}"),
        Expr::Var(x) => binder_name(x, pending),
        Expr::Field(x, f) => format!("{x}.{f}"),
        Expr::Perm(loc) => format!("perm({})", pretty_perm_loc(loc, pending)),
        Expr::Unary(op, a) => {
            let inner = pretty_expr_prec(a, 4, pending);
            match op {
                UnOp::Not => format!("!{inner}"),
                UnOp::Neg => format!("-{inner}"),
            }
        }
        Expr::Binary(op, a, b) => {
            let p = prec(*op);
            // Left associative: left child at p, right child at p+1.
            let s = format!(
                "{} {} {}",
                pretty_expr_prec(a, p, pending),
                op.symbol(),
                pretty_expr_prec(b, p + 1, pending)
            );
            if p < min {
                format!("({s})")
            } else {
                s
            }
        }
    }
}
