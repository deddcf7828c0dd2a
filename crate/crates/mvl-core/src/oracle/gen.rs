//! Random program and annotation generation for the theorem harnesses.
//!
//! The generator stays inside the fragment every checker supports and is
//! deliberately small: a reference, a couple of integers, one field, an
//! optional bodied method and an optional loop. An `adversarial` switch
//! turns on the features the syntactic checker rejects (resource
//! introspection, wildcard amounts) to exercise the negative side of the
//! checker hierarchy; a `deterministic` switch pins inhaled heap values and
//! tags branch choices through the store, which keeps reachable-state sets
//! supported for the completeness (maximal-annotation) harness.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Config, Type};
use crate::lang::ast::*;

use super::lattice::AnnotationLattice;

#[derive(Clone, Copy, Debug)]
pub struct GenOptions {
    /// Statements per generated block.
    pub len: usize,
    /// Generate a bodied method plus a call to it from init.
    pub method: bool,
    /// Allow a while loop in init.
    pub loops: bool,
    /// Allow resource introspection and wildcard amounts.
    pub adversarial: bool,
    /// Pin inhaled heap values and tag branches through the store.
    pub deterministic: bool,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions { len: 4, method: true, loops: false, adversarial: false, deterministic: false }
    }
}

struct GenCtx {
    refvar: String,
    intvar: String,
    tagvar: Option<String>,
    /// Tagged choices remaining. With a tag variable, only one choice per
    /// block is generated: a second (sequential, nested, or loop-carried)
    /// choice would alias tag values in the small integer universe and the
    /// branch taken would no longer be visible at modular boundaries.
    choices_left: usize,
    loop_id: usize,
}

fn bx(e: Expr) -> alloc::boxed::Box<Expr> {
    alloc::boxed::Box::new(e)
}

fn var(x: &str) -> Expr {
    Expr::Var(x.to_string())
}

fn acc_field(x: &str, k: i64, g: i64, value: Option<i64>) -> Assertion {
    Assertion::AccField {
        var: x.to_string(),
        field: "f".to_string(),
        perm: PermExpr::Lit(k, g),
        value: value.map(Expr::IntLit),
    }
}

fn gen_stmt(rng: &mut ChaCha8Rng, cx: &mut GenCtx, opts: &GenOptions, cfg: &Config, depth: usize) -> Stmt {
    let g = cfg.gran;
    let k = rng.gen_range(1..=g);
    let c = rng.gen_range(cfg.int_min..=cfg.int_max);
    let x = cx.refvar.clone();
    let i = cx.intvar.clone();
    let roll = rng.gen_range(0..100);
    match roll {
        0..=14 => Stmt::Assign(i, Expr::IntLit(c)),
        15..=29 => {
            let value = if opts.deterministic { Some(c) } else { None };
            Stmt::Inhale(acc_field(&x, k, g, value))
        }
        30..=41 => Stmt::Exhale(acc_field(&x, k, g, None)),
        42..=53 => {
            let a = match rng.gen_range(0..3) {
                0 => Assertion::Cond(Expr::Binary(BinOp::Ne, bx(var(&x)), bx(Expr::NullLit))),
                1 => Assertion::Cond(Expr::Binary(BinOp::Le, bx(var(&i)), bx(Expr::IntLit(c)))),
                _ => Assertion::Cond(Expr::Binary(BinOp::Eq, bx(var(&i)), bx(Expr::IntLit(c)))),
            };
            Stmt::Assume(a)
        }
        54..=63 => {
            let a = if rng.gen_bool(0.7) {
                Assertion::Cond(Expr::Binary(
                    BinOp::Ge,
                    bx(var(&i)),
                    bx(Expr::IntLit(cfg.int_min)),
                ))
            } else {
                Assertion::Cond(Expr::Binary(BinOp::Eq, bx(var(&i)), bx(Expr::IntLit(c))))
            };
            Stmt::Assert(a)
        }
        64..=75 if depth < 2 => {
            let cond = Expr::Binary(BinOp::Eq, bx(var(&i)), bx(Expr::IntLit(c)));
            Stmt::If {
                cond,
                then_s: alloc::boxed::Box::new(gen_stmt(rng, cx, opts, cfg, depth + 1)),
                else_s: alloc::boxed::Box::new(gen_stmt(rng, cx, opts, cfg, depth + 1)),
            }
        }
        76..=83 if depth < 2 && cx.choices_left > 0 => {
            cx.choices_left -= 1;
            let a = gen_stmt(rng, cx, opts, cfg, depth + 1);
            let b = gen_stmt(rng, cx, opts, cfg, depth + 1);
            if let Some(tag) = cx.tagvar.clone() {
                // Tagged choice: the branch taken is visible in the store.
                let ta = cfg.int_min;
                let tb = (cfg.int_min + 1).min(cfg.int_max);
                Stmt::Choice(
                    alloc::boxed::Box::new(Stmt::Seq(alloc::vec![
                        Stmt::Assign(tag.clone(), Expr::IntLit(ta)),
                        a,
                    ])),
                    alloc::boxed::Box::new(Stmt::Seq(alloc::vec![
                        Stmt::Assign(tag, Expr::IntLit(tb)),
                        b,
                    ])),
                )
            } else {
                Stmt::Choice(alloc::boxed::Box::new(a), alloc::boxed::Box::new(b))
            }
        }
        84..=89 => Stmt::FieldWrite(x, "f".to_string(), Expr::IntLit(c)),
        _ => {
            if opts.adversarial {
                match rng.gen_range(0..3) {
                    0 => Stmt::Exhale(Assertion::AccField {
                        var: x.clone(),
                        field: "f".to_string(),
                        perm: PermExpr::Perm(PermLoc::Field(x, "f".to_string())),
                        value: None,
                    }),
                    1 => Stmt::Assume(Assertion::Cond(Expr::Binary(
                        BinOp::Le,
                        bx(Expr::Perm(PermLoc::Field(x, "f".to_string()))),
                        bx(Expr::FracLit(1, 2)),
                    ))),
                    _ => Stmt::Inhale(Assertion::AccField {
                        var: x,
                        field: "f".to_string(),
                        perm: PermExpr::Wildcard,
                        value: None,
                    }),
                }
            } else {
                let value = if opts.deterministic { Some(c) } else { None };
                Stmt::Inhale(acc_field(&x, k, g, value))
            }
        }
    }
}

fn gen_block(
    rng: &mut ChaCha8Rng,
    cx: &mut GenCtx,
    opts: &GenOptions,
    cfg: &Config,
    len: usize,
) -> Vec<Stmt> {
    (0..len).map(|_| gen_stmt(rng, cx, opts, cfg, 0)).collect()
}

/// Generate a program from the RNG. The same RNG state always yields the
/// same program.
pub fn gen_program(rng: &mut ChaCha8Rng, opts: &GenOptions, cfg: &Config) -> Program {
    let mut p = Program::default();
    let with_method = opts.method && rng.gen_bool(0.8);

    if with_method {
        let mut cx = GenCtx {
            refvar: "a".to_string(),
            intvar: "j".to_string(),
            // In deterministic mode the branch tag is a return value, so
            // the choice taken stays visible in the method's postcondition
            // scope (a local would be projected away).
            tagvar: opts.deterministic.then(|| "u".to_string()),
            choices_left: if opts.deterministic { 1 } else { usize::MAX },
            loop_id: 100,
        };
        let mut body = alloc::vec![Stmt::VarDecl(alloc::vec![("j".to_string(), Type::Int)])];
        body.push(Stmt::Assign("j".to_string(), Expr::IntLit(cfg.int_min)));
        body.extend(gen_block(rng, &mut cx, opts, cfg, opts.len));
        let mut params = alloc::vec![("a".to_string(), Type::Ref)];
        let mut returns = Vec::new();
        if opts.deterministic {
            // The caller's tag rides along as a parameter, distinguishing
            // pre-states of caller branches in the precondition scope.
            params.push(("t".to_string(), Type::Int));
            returns.push(("u".to_string(), Type::Int));
        }
        p.methods.push(MethodDecl {
            name: "m".to_string(),
            params,
            returns,
            spec: None,
            body: Some(Stmt::Seq(body)),
        });
    }

    let mut cx = GenCtx {
        refvar: "x".to_string(),
        intvar: "i".to_string(),
        tagvar: opts.deterministic.then(|| "t".to_string()),
        choices_left: if opts.deterministic { 1 } else { usize::MAX },
        loop_id: 0,
    };
    let mut init = alloc::vec![Stmt::VarDecl(alloc::vec![
        ("x".to_string(), Type::Ref),
        ("i".to_string(), Type::Int),
    ])];
    if let Some(tag) = &cx.tagvar {
        init.push(Stmt::VarDecl(alloc::vec![(tag.clone(), Type::Int)]));
        init.push(Stmt::Assign(tag.clone(), Expr::IntLit(cfg.int_min)));
    }
    init.push(Stmt::Assign("i".to_string(), Expr::IntLit(cfg.int_min)));
    if rng.gen_bool(0.7) {
        init.push(Stmt::Assume(Assertion::Cond(Expr::Binary(
            BinOp::Ne,
            bx(var("x")),
            bx(Expr::NullLit),
        ))));
    }
    init.extend(gen_block(rng, &mut cx, opts, cfg, opts.len));
    if opts.loops && rng.gen_bool(0.5) {
        let id = cx.loop_id;
        let bound = rng.gen_range((cfg.int_min + 1)..=cfg.int_max);
        let mut body = alloc::vec![Stmt::Assign(
            "i".to_string(),
            Expr::Binary(BinOp::Add, bx(var("i")), bx(Expr::IntLit(1))),
        )];
        if rng.gen_bool(0.4) {
            // Depth 2 keeps branching out of loop bodies: a choice taken
            // once per iteration would overwrite its own tag.
            body.push(gen_stmt(rng, &mut cx, opts, cfg, 2));
        }
        init.push(Stmt::Assign("i".to_string(), Expr::IntLit(cfg.int_min)));
        init.push(Stmt::While {
            id,
            cond: Expr::Binary(BinOp::Lt, bx(var("i")), bx(Expr::IntLit(bound))),
            body: alloc::boxed::Box::new(Stmt::Seq(body)),
        });
    }
    if with_method {
        let (rets, mut args) = (Vec::new(), alloc::vec!["x".to_string()]);
        let mut rets = rets;
        if opts.deterministic {
            init.push(Stmt::VarDecl(alloc::vec![("mu".to_string(), Type::Int)]));
            args.push("t".to_string());
            rets.push("mu".to_string());
        }
        init.push(Stmt::Call { rets, method: "m".to_string(), args });
    }
    p.init = Stmt::Seq(init);
    p
}

/// Pick a random annotation from the lattice: one candidate per slot.
pub fn gen_annotation(rng: &mut ChaCha8Rng, lat: &AnnotationLattice) -> Annotation {
    let mut ann = Annotation::default();
    let pick = |rng: &mut ChaCha8Rng, cands: &Vec<Assertion>| -> Assertion {
        cands[rng.gen_range(0..cands.len())].clone()
    };
    let names: Vec<String> = lat.pres.keys().cloned().collect();
    for m in names {
        let pre = pick(rng, &lat.pres[&m].candidates);
        let post = pick(rng, &lat.posts[&m].candidates);
        ann.methods.insert(m, (pre, post));
    }
    let ids: Vec<usize> = lat.loops.keys().copied().collect();
    for id in ids {
        let inv = pick(rng, &lat.loops[&id].candidates);
        ann.loops.insert(id, inv);
    }
    ann
}

/// A random floor: mostly trivial, sometimes a lattice candidate, so that
/// Theorem 2 cases exercise genuinely partial annotations.
pub fn gen_floor(rng: &mut ChaCha8Rng, lat: &AnnotationLattice) -> Annotation {
    let mut ann = Annotation::default();
    for (m, slot) in &lat.pres {
        let pre = if rng.gen_bool(0.5) {
            Assertion::tt()
        } else {
            slot.candidates[rng.gen_range(0..slot.candidates.len())].clone()
        };
        ann.methods.insert(m.clone(), (pre, Assertion::tt()));
    }
    ann
}

/// All typed variables a generated program declares, for re-checking.
pub fn program_tyenv(p: &Program) -> BTreeMap<String, Type> {
    let mut out = BTreeMap::new();
    declared_types(&p.init, &mut out);
    for m in &p.methods {
        if let Some(b) = &m.body {
            declared_types(b, &mut out);
            for (x, t) in m.params.iter().chain(&m.returns) {
                out.insert(x.clone(), *t);
            }
        }
    }
    out
}
