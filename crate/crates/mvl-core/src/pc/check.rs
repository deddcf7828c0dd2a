//! The bounded preservation-condition recursion.
//!
//! `check_pc` reduces "inlining to bound n can only shrink the set of
//! verifying annotations" to a family of mono and framing obligations over
//! the reachable state bounds:
//!
//! - sequences thread the bounds through the inlined semantics of each
//!   element and check the elements independently;
//! - conditionals and choices split under the same bounds;
//! - a call to a bodied method at positive bound demands framing of the
//!   inlined callee body and recurses into it at bound n-1;
//! - a loop at positive bound demands monotonicity of its condition over a
//!   full enumerated sub-universe (the condition survives at every residual
//!   depth, so its obligation is unbounded), framing of the inlined body,
//!   and recurses into body and remaining iterations;
//! - everything else is a leaf and demands monotonicity.
//!
//! The recursion runs on the annotation-asserted program, so a partial
//! annotation's asserted pre/post/invariants take part in the obligations,
//! and the leaves are discharged by either the semantic (brute-force) or
//! the structural (self-composition) checkers. All failing obligations are
//! collected, each tagged with the program path it arose at.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::config::{Config, Type};
use crate::lang::assertion::{eval_expr, expr_free_vars, Env, EvalVal};
use crate::lang::ast::*;
use crate::semantics::{exec, ExecCtx};
use crate::sepalg::{substates_within, State, StateSet, UniverseSpec, Value};
use crate::transform::{assert_annot, expand_call, inline_stmt_from, rename_locals};

use super::semantic::{check_framing_semantic, check_mono_over, check_mono_semantic};
use super::structural::{
    check_framing_structural, check_mono_structural, check_mono_structural_over,
};
use super::{error_failure, Clause, PCVerdict};

/// Which leaf checker discharges the mono and framing obligations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    /// Brute-force enumeration of substates and decompositions.
    Semantic,
    /// Traced self-composition probes.
    Structural,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Semantic => "semantic",
            Backend::Structural => "structural",
        }
    }
}

/// Does the statement contain anything the recursion must expand?
fn has_inlineable(s: &Stmt, p: &Program) -> bool {
    match s {
        Stmt::Seq(ss) => ss.iter().any(|s| has_inlineable(s, p)),
        Stmt::Call { method, .. } => {
            p.method(method).map_or(true, |m| !m.is_library())
        }
        Stmt::If { then_s, else_s, .. } => {
            has_inlineable(then_s, p) || has_inlineable(else_s, p)
        }
        Stmt::Choice(a, b) => has_inlineable(a, p) || has_inlineable(b, p),
        Stmt::While { .. } => true,
        _ => false,
    }
}

/// Every `perm(P(...))` introspection in an expression, by predicate name.
fn collect_perm_preds(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::Perm(PermLoc::Pred(name, args)) => {
            out.insert(name.clone());
            args.iter().for_each(|a| collect_perm_preds(a, out));
        }
        Expr::Unary(_, a) => collect_perm_preds(a, out),
        Expr::Binary(_, a, b) => {
            collect_perm_preds(a, out);
            collect_perm_preds(b, out);
        }
        _ => {}
    }
}

/// The sub-universe a loop condition's monotonicity is checked over: every
/// state the condition can read. Free variables range over their types,
/// mentioned fields over all cells and values, introspected predicates over
/// all argument combinations.
pub fn cond_universe(
    cond: &Expr,
    tyenv: &BTreeMap<String, Type>,
    program: &Program,
    cfg: &Config,
) -> UniverseSpec {
    let mut fv = BTreeSet::new();
    expr_free_vars(cond, &mut fv);
    let vars: Vec<(String, Vec<Value>)> = fv
        .into_iter()
        .filter_map(|x| tyenv.get(&x).map(|t| (x, cfg.values_of(*t))))
        .collect();

    let mut fields = BTreeSet::new();
    crate::lang::ast::collect_fields_assertion(&Assertion::Cond(cond.clone()), &mut fields);
    let mut cells = Vec::new();
    for f in &fields {
        for r in 0..cfg.refs {
            cells.push((r, f.clone()));
        }
    }

    let mut pred_names = BTreeSet::new();
    collect_perm_preds(cond, &mut pred_names);
    let mut preds = Vec::new();
    for name in pred_names {
        let Some(pd) = program.pred(&name) else { continue };
        let mut combos = alloc::vec![Vec::new()];
        for (_, t) in &pd.params {
            let dom = cfg.values_of(*t);
            let mut next = Vec::with_capacity(combos.len() * dom.len());
            for c in &combos {
                for v in &dom {
                    let mut c2 = c.clone();
                    c2.push(*v);
                    next.push(c2);
                }
            }
            combos = next;
        }
        for c in combos {
            preds.push((name.clone(), c));
        }
    }

    UniverseSpec {
        vars,
        cells,
        cell_values: cfg.all_values(),
        preds,
        gran: cfg.gran,
    }
}

struct Runner<'a> {
    program: &'a Program,
    eps: &'a Annotation,
    cfg: &'a Config,
    backend: Backend,
    tyenv: BTreeMap<String, Type>,
    counter: usize,
    verdict: PCVerdict,
}

impl Runner<'_> {
    fn inline(&mut self, s: &Stmt, n: usize, path: &str) -> Result<Stmt, String> {
        let u = inline_stmt_from(self.program, s, n, &mut self.counter, path)?;
        declared_types(&u.stmt, &mut self.tyenv);
        Ok(u.stmt)
    }

    /// Post-states of `s` from every verifying state in the closure of `t`.
    fn sem(&mut self, t: &StateSet, s: &Stmt) -> StateSet {
        declared_types(s, &mut self.tyenv);
        let tyenv = self.tyenv.clone();
        let ctx = ExecCtx::new(self.program, self.eps, self.cfg, &tyenv);
        let mut out = StateSet::new();
        for phi in substates_within(t, self.cfg.gran) {
            if let Ok(set) = exec(s, &phi, ctx) {
                out.extend(set);
            }
        }
        out
    }

    fn check_mono(&mut self, t: &StateSet, s: &Stmt, site: &str) {
        declared_types(s, &mut self.tyenv);
        let tyenv = self.tyenv.clone();
        let ctx = ExecCtx::new(self.program, self.eps, self.cfg, &tyenv);
        let v = match self.backend {
            Backend::Semantic => check_mono_semantic(t, s, ctx, site),
            Backend::Structural => check_mono_structural(t, s, ctx, site),
        };
        self.verdict.merge(v);
    }

    fn check_mono_universe(&mut self, universe: &StateSet, s: &Stmt, site: &str) {
        let tyenv = self.tyenv.clone();
        let ctx = ExecCtx::new(self.program, self.eps, self.cfg, &tyenv);
        let v = match self.backend {
            Backend::Semantic => {
                check_mono_over(universe, s, ctx, site, Clause::LoopCondMono)
            }
            Backend::Structural => {
                check_mono_structural_over(universe, s, ctx, site, Clause::LoopCondMono)
            }
        };
        self.verdict.merge(v);
    }

    fn check_framing(&mut self, t: &StateSet, s: &Stmt, site: &str) {
        declared_types(s, &mut self.tyenv);
        let tyenv = self.tyenv.clone();
        let ctx = ExecCtx::new(self.program, self.eps, self.cfg, &tyenv);
        let v = match self.backend {
            Backend::Semantic => check_framing_semantic(t, s, ctx, site),
            Backend::Structural => check_framing_structural(t, s, ctx, site),
        };
        self.verdict.merge(v);
    }

    fn assume_cond(e: Expr) -> Stmt {
        Stmt::Assume(Assertion::Cond(e))
    }

    fn pc(&mut self, t: &StateSet, s: &Stmt, n: usize, path: &str) -> Result<(), String> {
        if !has_inlineable(s, self.program) {
            self.check_mono(t, s, path);
            return Ok(());
        }
        match s {
            Stmt::Seq(ss) => {
                let mut cur = t.clone();
                for (i, si) in ss.iter().enumerate() {
                    let sub = format!("{path}.{i}");
                    self.pc(&cur, si, n, &sub)?;
                    let inl = self.inline(si, n, &sub)?;
                    cur = self.sem(&cur, &inl);
                }
                Ok(())
            }
            Stmt::If { cond, then_s, else_s } => {
                let not_cond =
                    Expr::Unary(UnOp::Not, alloc::boxed::Box::new(cond.clone()));
                let then_b = Stmt::Seq(alloc::vec![
                    Self::assume_cond(cond.clone()),
                    (**then_s).clone(),
                ]);
                let else_b = Stmt::Seq(alloc::vec![
                    Self::assume_cond(not_cond),
                    (**else_s).clone(),
                ]);
                self.pc(t, &then_b, n, &format!("{path}/then"))?;
                self.pc(t, &else_b, n, &format!("{path}/else"))
            }
            Stmt::Choice(a, b) => {
                self.pc(t, a, n, &format!("{path}/left"))?;
                self.pc(t, b, n, &format!("{path}/right"))
            }
            Stmt::Call { rets, method, args } => {
                if n == 0 {
                    // The call is cut off (assume false); trivially mono.
                    return Ok(());
                }
                let exp = expand_call(self.program, method, rets, args, &mut self.counter)?;
                let sub = format!("{path}/call {method}#{}", exp.unit);
                declared_types(&exp.prologue, &mut self.tyenv);
                let t1 = self.sem(t, &exp.prologue);
                let inl_body = self.inline(&exp.body, n - 1, &sub)?;
                self.check_framing(&t1, &inl_body, &sub);
                self.pc(&t1, &exp.body, n - 1, &sub)
            }
            Stmt::While { id, cond, body } => {
                let not_cond =
                    Expr::Unary(UnOp::Not, alloc::boxed::Box::new(cond.clone()));
                if n == 0 {
                    // Residual loops become `assume !b`.
                    self.check_mono(t, &Self::assume_cond(not_cond), path);
                    return Ok(());
                }
                let unit = self.counter;
                self.counter += 1;
                let sub = format!("{path}/loop {id}#{unit}");

                // The condition outlives every finite bound, so its
                // monotonicity is checked over the full sub-universe of
                // states it can read, both ways round.
                let universe: StateSet = cond_universe(cond, &self.tyenv, self.program, self.cfg)
                    .enumerate()
                    .into_iter()
                    .collect();
                self.check_mono_universe(&universe, &Self::assume_cond(cond.clone()), &sub);
                self.check_mono_universe(&universe, &Self::assume_cond(not_cond), &sub);

                // Bounds that actually enter the body.
                let t_b: StateSet = t
                    .iter()
                    .filter(|phi| {
                        matches!(
                            eval_expr(cond, phi, &Env::new(), &mut BTreeSet::new()),
                            Ok(EvalVal::Val(Value::Bool(true)))
                        )
                    })
                    .cloned()
                    .collect();

                let body_r = rename_locals(body, unit);
                declared_types(&body_r, &mut self.tyenv);
                let inl_body = self.inline(&body_r, n - 1, &sub)?;
                self.check_framing(&t_b, &inl_body, &sub);
                self.pc(&t_b, &body_r, n - 1, &sub)?;

                // Remaining iterations from the post-body bounds.
                let after = self.sem(&t_b, &inl_body);
                self.pc(&after, s, n - 1, path)
            }
            // has_inlineable is only true for the compound forms above.
            _ => unreachable!("leaf statement reported inlineable"),
        }
    }
}

/// Check the preservation condition of a program with a partial annotation
/// at inlining bound `n`: the annotation's assertions are inserted, and the
/// obligation recursion starts from the unit state at the initial statement.
pub fn check_pc(
    program: &Program,
    ann: &Annotation,
    n: usize,
    backend: Backend,
    cfg: &Config,
) -> PCVerdict {
    let p = assert_annot(program, ann);
    let mut tyenv = BTreeMap::new();
    declared_types(&p.init, &mut tyenv);
    for m in &p.methods {
        for (x, t) in m.params.iter().chain(&m.returns) {
            tyenv.insert(x.clone(), *t);
        }
        if let Some(b) = &m.body {
            declared_types(b, &mut tyenv);
        }
    }
    let eps = Annotation::default();
    let mut runner = Runner {
        program: &p,
        eps: &eps,
        cfg,
        backend,
        tyenv,
        counter: 0,
        verdict: PCVerdict::pass(),
    };
    let t0: StateSet = [State::unit()].into();
    let init = p.init.clone();
    if let Err(e) = runner.pc(&t0, &init, n, "init") {
        runner
            .verdict
            .failures
            .push(error_failure(Clause::Mono, "init", e.to_string()));
    }
    runner.verdict
}
