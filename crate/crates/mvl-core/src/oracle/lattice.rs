//! Finite annotation lattice and annotation-space search.
//!
//! The lattice holds a candidate assertion list per annotation slot (method
//! pre, method post, loop invariant), built from small atoms over the
//! variables in scope: field and predicate access atoms with grid
//! fractions, pure comparisons, and their separating conjunctions up to
//! size two. `true` is always a candidate, so the empty annotation is
//! always in the search space.
//!
//! "Stronger than" between candidates is decided semantically: A entails B
//! iff from every typed store, inhaling A and then exhaling B cannot fail.
//! This is the intuitionistic reading (every A-state dominates a B-state)
//! and is what the search uses to stay above a floor annotation.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::config::{Config, Type};
use crate::lang::ast::*;
use crate::semantics::{enumerate_stores, exec, verify_program, ExecCtx};

/// One annotation slot: the variables its assertions may mention and the
/// candidate assertions.
#[derive(Clone, Debug)]
pub struct Slot {
    pub vars: Vec<(String, Type)>,
    pub candidates: Vec<Assertion>,
}

/// Candidate assertions per method pre/post and per loop invariant.
#[derive(Clone, Debug, Default)]
pub struct AnnotationLattice {
    pub pres: BTreeMap<String, Slot>,
    pub posts: BTreeMap<String, Slot>,
    pub loops: BTreeMap<usize, Slot>,
}

/// Semantic entailment over the finite universe: from every typed store,
/// `inhale a; exhale b` never fails. Vacuously true where `a` cannot be
/// inhaled at all (its models conflict with the store).
pub fn entails(
    a: &Assertion,
    b: &Assertion,
    vars: &[(String, Type)],
    program: &Program,
    cfg: &Config,
) -> bool {
    let ann = Annotation::default();
    let tyenv: BTreeMap<String, Type> = vars.iter().cloned().collect();
    let ctx = ExecCtx::new(program, &ann, cfg, &tyenv);
    let probe = Stmt::Seq(alloc::vec![Stmt::Inhale(a.clone()), Stmt::Exhale(b.clone())]);
    let Ok(stores) = enumerate_stores(vars, cfg) else { return false };
    stores.iter().all(|s0| exec(&probe, s0, ctx).is_ok())
}

/// Pure atoms over a variable: comparisons against the (capped) universe.
fn pure_atoms(x: &str, t: Type, cfg: &Config) -> Vec<Assertion> {
    let var = || Expr::Var(x.into());
    let mut out = Vec::new();
    match t {
        Type::Bool => {
            out.push(Assertion::Cond(var()));
            out.push(Assertion::Cond(Expr::Unary(UnOp::Not, alloc::boxed::Box::new(var()))));
        }
        Type::Int => {
            for v in cfg.int_values().into_iter().take(3) {
                if let crate::sepalg::Value::Int(i) = v {
                    out.push(Assertion::Cond(Expr::Binary(
                        BinOp::Eq,
                        alloc::boxed::Box::new(var()),
                        alloc::boxed::Box::new(Expr::IntLit(i)),
                    )));
                }
            }
        }
        Type::Ref => {
            out.push(Assertion::Cond(Expr::Binary(
                BinOp::Ne,
                alloc::boxed::Box::new(var()),
                alloc::boxed::Box::new(Expr::NullLit),
            )));
        }
        Type::Perm => {}
    }
    out
}

/// Resource atoms: field access over Ref variables and predicate instances
/// whose arguments are in-scope variables of matching type.
fn resource_atoms(vars: &[(String, Type)], p: &Program, cfg: &Config) -> Vec<Assertion> {
    let mut out = Vec::new();
    let fields = p.field_names();
    for (x, t) in vars {
        if *t != Type::Ref {
            continue;
        }
        for f in &fields {
            for k in 1..=cfg.gran {
                out.push(Assertion::AccField {
                    var: x.clone(),
                    field: f.clone(),
                    perm: PermExpr::Lit(k, cfg.gran),
                    value: None,
                });
            }
        }
    }
    for pd in &p.preds {
        // Single-variable arguments only; tuples would blow up the lattice.
        let mut arg_choices: Vec<Vec<Expr>> = alloc::vec![Vec::new()];
        for (_, pt) in &pd.params {
            let mut next = Vec::new();
            for args in &arg_choices {
                for (x, t) in vars {
                    if t == pt {
                        let mut a2 = args.clone();
                        a2.push(Expr::Var(x.clone()));
                        next.push(a2);
                    }
                }
            }
            arg_choices = next;
        }
        for args in arg_choices {
            if args.len() != pd.params.len() {
                continue;
            }
            for k in 1..=cfg.gran {
                out.push(Assertion::AccPred {
                    pred: pd.name.clone(),
                    args: args.clone(),
                    perm: PermExpr::Lit(k, cfg.gran),
                });
            }
        }
    }
    out
}

/// Candidate assertions for one slot: true, single atoms, and pairwise
/// separating conjunctions of distinct resource atoms (optionally with one
/// pure conjunct), truncated to `cap` entries.
fn slot_candidates(vars: &[(String, Type)], p: &Program, cfg: &Config, cap: usize) -> Vec<Assertion> {
    let res = resource_atoms(vars, p, cfg);
    let mut pure = Vec::new();
    for (x, t) in vars {
        pure.extend(pure_atoms(x, *t, cfg));
    }
    let mut out = alloc::vec![Assertion::tt()];
    out.extend(res.iter().cloned());
    out.extend(pure.iter().cloned());
    for (i, a) in res.iter().enumerate() {
        for b in res.iter().skip(i + 1) {
            out.push(Assertion::star(a.clone(), b.clone()));
        }
    }
    for a in &res {
        for b in &pure {
            out.push(Assertion::star(a.clone(), b.clone()));
        }
    }
    out.truncate(cap);
    out
}

/// Loop sites of a statement, with the types declared around them. The
/// variable context is approximated by the full enclosing scope; candidates
/// mentioning variables not yet declared at the loop head simply fail
/// verification and are skipped by the search.
fn collect_loops(s: &Stmt, scope: &[(String, Type)], out: &mut BTreeMap<usize, Vec<(String, Type)>>) {
    match s {
        Stmt::Seq(ss) => ss.iter().for_each(|s| collect_loops(s, scope, out)),
        Stmt::If { then_s, else_s, .. } => {
            collect_loops(then_s, scope, out);
            collect_loops(else_s, scope, out);
        }
        Stmt::Choice(a, b) => {
            collect_loops(a, scope, out);
            collect_loops(b, scope, out);
        }
        Stmt::While { id, body, .. } => {
            out.insert(*id, scope.to_vec());
            collect_loops(body, scope, out);
        }
        _ => {}
    }
}

/// Build the default lattice for a program: one pre/post slot per bodied
/// method and one invariant slot per loop.
pub fn default_lattice(p: &Program, cfg: &Config) -> AnnotationLattice {
    default_lattice_capped(p, cfg, 48)
}

pub fn default_lattice_capped(p: &Program, cfg: &Config, cap: usize) -> AnnotationLattice {
    let mut lat = AnnotationLattice::default();
    let mut loops: BTreeMap<usize, Vec<(String, Type)>> = BTreeMap::new();
    for m in &p.methods {
        let Some(body) = &m.body else { continue };
        let pre_vars: Vec<(String, Type)> = m.params.clone();
        let post_vars: Vec<(String, Type)> =
            m.params.iter().chain(&m.returns).cloned().collect();
        lat.pres.insert(
            m.name.clone(),
            Slot {
                vars: pre_vars.clone(),
                candidates: slot_candidates(&pre_vars, p, cfg, cap),
            },
        );
        lat.posts.insert(
            m.name.clone(),
            Slot {
                vars: post_vars.clone(),
                candidates: slot_candidates(&post_vars, p, cfg, cap),
            },
        );
        let mut scope: Vec<(String, Type)> = post_vars.clone();
        let mut tys = BTreeMap::new();
        declared_types(body, &mut tys);
        for (x, t) in tys {
            if !scope.iter().any(|(v, _)| *v == x) {
                scope.push((x, t));
            }
        }
        collect_loops(body, &scope, &mut loops);
    }
    let mut init_scope = Vec::new();
    let mut tys = BTreeMap::new();
    declared_types(&p.init, &mut tys);
    for (x, t) in tys {
        init_scope.push((x, t));
    }
    collect_loops(&p.init, &init_scope, &mut loops);
    for (id, vars) in loops {
        lat.loops.insert(
            id,
            Slot { vars: vars.clone(), candidates: slot_candidates(&vars, p, cfg, cap) },
        );
    }
    lat
}

/// Search the lattice for an annotation making the program verify. With a
/// floor, only candidates entailing the floor's assertion at each slot are
/// considered (the "stronger than" direction of Theorem 2, applied to pre
/// and post alike), and the floor's own assertions are tried first.
/// Returns the first verifying annotation in lattice order, or None once
/// the space (capped at `limit` combinations) is exhausted.
pub fn search_annotation(
    p: &Program,
    lat: &AnnotationLattice,
    floor: Option<&Annotation>,
    cfg: &Config,
) -> Option<Annotation> {
    search_annotation_limited(p, lat, floor, cfg, 50_000)
}

pub fn search_annotation_limited(
    p: &Program,
    lat: &AnnotationLattice,
    floor: Option<&Annotation>,
    cfg: &Config,
    limit: usize,
) -> Option<Annotation> {
    // Assemble the slot list in a fixed order: per-method pre, post, then
    // loop invariants.
    enum Key {
        Pre(String),
        Post(String),
        Loop(usize),
    }
    let mut slots: Vec<(Key, Vec<Assertion>)> = Vec::new();
    let floor_slot = |key: &Key| -> Assertion {
        let Some(fl) = floor else { return Assertion::tt() };
        match key {
            Key::Pre(m) => fl.method_spec(m).0,
            Key::Post(m) => fl.method_spec(m).1,
            Key::Loop(id) => fl.loop_inv(*id),
        }
    };
    let all: Vec<(Key, &Slot)> = lat
        .pres
        .iter()
        .map(|(m, s)| (Key::Pre(m.clone()), s))
        .chain(lat.posts.iter().map(|(m, s)| (Key::Post(m.clone()), s)))
        .chain(lat.loops.iter().map(|(id, s)| (Key::Loop(*id), s)))
        .collect();
    for (key, slot) in all {
        let fl = floor_slot(&key);
        let mut cands = Vec::new();
        // The floor itself is always an admissible (reflexively stronger)
        // candidate.
        cands.push(fl.clone());
        for c in &slot.candidates {
            if *c == fl {
                continue;
            }
            if floor.is_none() || entails(c, &fl, &slot.vars, p, cfg) {
                cands.push(c.clone());
            }
        }
        slots.push((key, cands));
    }

    // Odometer over the candidate lists.
    let mut idx = alloc::vec![0usize; slots.len()];
    let mut tried = 0usize;
    loop {
        let mut ann = Annotation::default();
        for ((key, cands), i) in slots.iter().zip(&idx) {
            let a = cands[*i].clone();
            match key {
                Key::Pre(m) => {
                    let e = ann
                        .methods
                        .entry(m.clone())
                        .or_insert((Assertion::tt(), Assertion::tt()));
                    e.0 = a;
                }
                Key::Post(m) => {
                    let e = ann
                        .methods
                        .entry(m.clone())
                        .or_insert((Assertion::tt(), Assertion::tt()));
                    e.1 = a;
                }
                Key::Loop(id) => {
                    ann.loops.insert(*id, a);
                }
            }
        }
        if verify_program(p, &ann, cfg).is_ok() {
            return Some(ann);
        }
        tried += 1;
        if tried >= limit {
            return None;
        }
        // Advance the odometer; done when it wraps.
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return None;
            }
            idx[pos] += 1;
            if idx[pos] < slots[pos].1.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}
