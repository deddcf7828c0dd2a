//! AST of the abstract verification language.
//!
//! The AST carries no source positions: parse errors are positioned, but
//! parsed trees compare structurally so that pretty-print/re-parse
//! round-trips are equalities. Notes on the grammar:
//!
//! - `*` is always separating conjunction; the expression language has no
//!   multiplication, which keeps assertions unambiguous.
//! - `if` is kept as a node but is defined as sugar for nondeterministic
//!   choice with `assume`; the semantics desugars on the fly.
//! - library (bodyless) methods carry their contract on the declaration,
//!   including VeriFast-style `?x` binders scoping over both pre- and
//!   postcondition; bodied methods are specified through an `Annotation`.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::config::Type;
use crate::sepalg::StateSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    And,
    Or,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
        }
    }
}

/// A resource location a `perm(...)` introspection can name.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum PermLoc {
    Field(String, String),
    Pred(String, Vec<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Expr {
    IntLit(i64),
    BoolLit(bool),
    NullLit,
    /// Literal fraction k/d.
    FracLit(i64, i64),
    Var(String),
    /// Heap read x.f.
    Field(String, String),
    /// perm(x.f) or perm(P(args)).
    Perm(PermLoc),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

/// Permission amount position inside assertions and fold/unfold.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum PermExpr {
    Lit(i64, i64),
    Wildcard,
    Perm(PermLoc),
    /// A Perm-typed bound variable (exists binder or spec binder).
    Var(String),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Assertion {
    Bool(bool),
    AccField {
        var: String,
        field: String,
        perm: PermExpr,
        /// Optional value constraint `== e` (variables only).
        value: Option<Expr>,
    },
    AccPred {
        pred: String,
        args: Vec<Expr>,
        perm: PermExpr,
    },
    /// Pure atom or condition atom (may read heap / perm).
    Cond(Expr),
    Star(Box<Assertion>, Box<Assertion>),
    Exists(String, Type, Box<Assertion>),
    /// Explicit model set, constructed by the oracle; not parseable.
    Extensional(StateSet),
}

impl Assertion {
    pub fn tt() -> Assertion {
        Assertion::Bool(true)
    }

    pub fn star(a: Assertion, b: Assertion) -> Assertion {
        Assertion::Star(Box::new(a), Box::new(b))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    Seq(Vec<Stmt>),
    Skip,
    Assume(Assertion),
    Assert(Assertion),
    Inhale(Assertion),
    Exhale(Assertion),
    VarDecl(Vec<(String, Type)>),
    Havoc(Vec<String>),
    Assign(String, Expr),
    FieldWrite(String, String, Expr),
    Call {
        rets: Vec<String>,
        method: String,
        args: Vec<String>,
    },
    If {
        cond: Expr,
        then_s: Box<Stmt>,
        else_s: Box<Stmt>,
    },
    Choice(Box<Stmt>, Box<Stmt>),
    While {
        /// Program-wide loop site id; keys the Annotation's invariant map.
        id: usize,
        cond: Expr,
        body: Box<Stmt>,
    },
    Fold {
        pred: String,
        args: Vec<Expr>,
        perm: PermExpr,
    },
    Unfold {
        pred: String,
        args: Vec<Expr>,
        perm: PermExpr,
    },
}

impl Default for Stmt {
    fn default() -> Stmt {
        Stmt::Seq(Vec::new())
    }
}

impl Stmt {
    pub fn seq(stmts: Vec<Stmt>) -> Stmt {
        Stmt::Seq(stmts)
    }

    /// Flatten nested sequences into a canonical list.
    pub fn flatten(self) -> Vec<Stmt> {
        match self {
            Stmt::Seq(ss) => ss.into_iter().flat_map(Stmt::flatten).collect(),
            s => alloc::vec![s],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredDecl {
    pub name: String,
    pub params: Vec<(String, Type)>,
    /// None = abstract predicate (cannot be folded/unfolded).
    pub body: Option<Assertion>,
}

/// Contract of a bodyless (library) method. Binders are VeriFast-style
/// `?x` variables: bound by the precondition, visible in the postcondition,
/// resolved demonically over all exhale-feasible instantiations at a call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MethodSpec {
    pub binders: Vec<(String, Type)>,
    pub pre: Assertion,
    pub post: Assertion,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MethodDecl {
    pub name: String,
    pub params: Vec<(String, Type)>,
    pub returns: Vec<(String, Type)>,
    /// Library contract; always present on callable bodyless methods.
    pub spec: Option<MethodSpec>,
    pub body: Option<Stmt>,
}

impl MethodDecl {
    pub fn is_library(&self) -> bool {
        self.body.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Program {
    pub preds: Vec<PredDecl>,
    pub methods: Vec<MethodDecl>,
    pub init: Stmt,
}

impl Program {
    pub fn method(&self, name: &str) -> Option<&MethodDecl> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn pred(&self, name: &str) -> Option<&PredDecl> {
        self.preds.iter().find(|p| p.name == name)
    }

    /// All field names mentioned anywhere in the program; defines the heap
    /// cell universe.
    pub fn field_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let walk_stmt = |s: &Stmt, out: &mut BTreeSet<String>| collect_fields_stmt(s, out);
        for m in &self.methods {
            if let Some(b) = &m.body {
                walk_stmt(b, &mut out);
            }
            if let Some(sp) = &m.spec {
                collect_fields_assertion(&sp.pre, &mut out);
                collect_fields_assertion(&sp.post, &mut out);
            }
        }
        for p in &self.preds {
            if let Some(b) = &p.body {
                collect_fields_assertion(b, &mut out);
            }
        }
        walk_stmt(&self.init, &mut out);
        out
    }
}

/// Per-method pre/post plus per-loop invariants. Missing entries mean
/// `true`; `Annotation::default()` is the empty annotation epsilon.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Annotation {
    pub methods: BTreeMap<String, (Assertion, Assertion)>,
    pub loops: BTreeMap<usize, Assertion>,
}

impl Annotation {
    pub fn method_spec(&self, name: &str) -> (Assertion, Assertion) {
        self.methods
            .get(name)
            .cloned()
            .unwrap_or((Assertion::tt(), Assertion::tt()))
    }

    pub fn loop_inv(&self, id: usize) -> Assertion {
        self.loops.get(&id).cloned().unwrap_or(Assertion::tt())
    }
}

/// modif(s): syntactic over-approximation of the store variables s writes.
pub fn modified_vars(s: &Stmt) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_modified(s, &mut out);
    out
}

fn collect_modified(s: &Stmt, out: &mut BTreeSet<String>) {
    match s {
        Stmt::Seq(ss) => ss.iter().for_each(|s| collect_modified(s, out)),
        Stmt::VarDecl(ds) => out.extend(ds.iter().map(|(x, _)| x.clone())),
        Stmt::Havoc(xs) => out.extend(xs.iter().cloned()),
        Stmt::Assign(x, _) => {
            out.insert(x.clone());
        }
        Stmt::Call { rets, .. } => out.extend(rets.iter().cloned()),
        Stmt::If { then_s, else_s, .. } => {
            collect_modified(then_s, out);
            collect_modified(else_s, out);
        }
        Stmt::Choice(a, b) => {
            collect_modified(a, out);
            collect_modified(b, out);
        }
        Stmt::While { body, .. } => collect_modified(body, out),
        Stmt::Skip
        | Stmt::Assume(_)
        | Stmt::Assert(_)
        | Stmt::Inhale(_)
        | Stmt::Exhale(_)
        | Stmt::FieldWrite(..)
        | Stmt::Fold { .. }
        | Stmt::Unfold { .. } => {}
    }
}

/// Variable types declared anywhere inside a statement.
pub fn declared_types(s: &Stmt, out: &mut BTreeMap<String, Type>) {
    match s {
        Stmt::Seq(ss) => ss.iter().for_each(|s| declared_types(s, out)),
        Stmt::VarDecl(ds) => {
            for (x, t) in ds {
                out.insert(x.clone(), *t);
            }
        }
        Stmt::If { then_s, else_s, .. } => {
            declared_types(then_s, out);
            declared_types(else_s, out);
        }
        Stmt::Choice(a, b) => {
            declared_types(a, out);
            declared_types(b, out);
        }
        Stmt::While { body, .. } => declared_types(body, out),
        _ => {}
    }
}

fn collect_fields_expr(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::Field(_, f) => {
            out.insert(f.clone());
        }
        Expr::Perm(PermLoc::Field(_, f)) => {
            out.insert(f.clone());
        }
        Expr::Perm(PermLoc::Pred(_, args)) => {
            args.iter().for_each(|a| collect_fields_expr(a, out));
        }
        Expr::Unary(_, a) => collect_fields_expr(a, out),
        Expr::Binary(_, a, b) => {
            collect_fields_expr(a, out);
            collect_fields_expr(b, out);
        }
        _ => {}
    }
}

fn collect_fields_perm_expr(p: &PermExpr, out: &mut BTreeSet<String>) {
    match p {
        PermExpr::Perm(PermLoc::Field(_, f)) => {
            out.insert(f.clone());
        }
        PermExpr::Perm(PermLoc::Pred(_, args)) => {
            args.iter().for_each(|a| collect_fields_expr(a, out));
        }
        _ => {}
    }
}

pub fn collect_fields_assertion(a: &Assertion, out: &mut BTreeSet<String>) {
    match a {
        Assertion::AccField { field, perm, value, .. } => {
            out.insert(field.clone());
            collect_fields_perm_expr(perm, out);
            if let Some(e) = value {
                collect_fields_expr(e, out);
            }
        }
        Assertion::AccPred { args, perm, .. } => {
            args.iter().for_each(|e| collect_fields_expr(e, out));
            collect_fields_perm_expr(perm, out);
        }
        Assertion::Cond(e) => collect_fields_expr(e, out),
        Assertion::Star(x, y) => {
            collect_fields_assertion(x, out);
            collect_fields_assertion(y, out);
        }
        Assertion::Exists(_, _, b) => collect_fields_assertion(b, out),
        Assertion::Bool(_) | Assertion::Extensional(_) => {}
    }
}

fn collect_fields_stmt(s: &Stmt, out: &mut BTreeSet<String>) {
    match s {
        Stmt::Seq(ss) => ss.iter().for_each(|s| collect_fields_stmt(s, out)),
        Stmt::Assume(a) | Stmt::Assert(a) | Stmt::Inhale(a) | Stmt::Exhale(a) => {
            collect_fields_assertion(a, out)
        }
        Stmt::Assign(_, e) => collect_fields_expr(e, out),
        Stmt::FieldWrite(_, f, e) => {
            out.insert(f.clone());
            collect_fields_expr(e, out);
        }
        Stmt::If { cond, then_s, else_s } => {
            collect_fields_expr(cond, out);
            collect_fields_stmt(then_s, out);
            collect_fields_stmt(else_s, out);
        }
        Stmt::Choice(a, b) => {
            collect_fields_stmt(a, out);
            collect_fields_stmt(b, out);
        }
        Stmt::While { cond, body, .. } => {
            collect_fields_expr(cond, out);
            collect_fields_stmt(body, out);
        }
        Stmt::Fold { args, perm, .. } | Stmt::Unfold { args, perm, .. } => {
            args.iter().for_each(|e| collect_fields_expr(e, out));
            collect_fields_perm_expr(perm, out);
        }
        _ => {}
    }
}
