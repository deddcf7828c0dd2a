//! Maximal (extensional) annotation construction.
//!
//! The program is first put into bounded form (ghost loop countdowns and a
//! ghost call depth) and its call sites and loop iterations are indexed
//! with ghost variables. The initial statement of the result is then
//! executed exhaustively, unrolling loops and expanding calls in place, and
//! the state sets reached at every method entry/exit and every loop head
//! are recorded. Projected to the callee's (respectively the loop head's)
//! scope, these sets become extensional assertions: annotations whose model
//! set is exactly the reachable-state set. The ghost index variables live
//! in the recorded stores, so one extensional set per method naturally
//! decomposes into disjoint per-site parts.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::config::{Config, Type};
use crate::lang::wf::method_var_types;
use crate::lang::ast::*;
use crate::lang::{eval_expr, Env, EvalVal};
use crate::semantics::{exec, exec_all, ExecCtx};
use crate::sepalg::{State, StateSet, Value};
use crate::transform::{boundedize, expand_call, index_sites, rename_locals};

/// The instrumented program together with its extensional annotation.
#[derive(Clone, Debug)]
pub struct MaximalResult {
    pub program: Program,
    pub annotation: Annotation,
    /// Ghost call-site index -> called method.
    pub call_sites: Vec<(i64, String)>,
}

struct Collector<'a> {
    program: &'a Program,
    cfg: &'a Config,
    ann: Annotation,
    tyenv: BTreeMap<String, Type>,
    counter: usize,
    pre: BTreeMap<String, StateSet>,
    post: BTreeMap<String, StateSet>,
    inv: BTreeMap<usize, StateSet>,
}

/// Project a state into a modular scope: keep only store entries whose
/// walk-time name is in `frame`, renamed to their modular name, minus the
/// `exclude` set. The resource part carries over whole.
fn project(
    phi: &State,
    frame: &BTreeMap<String, String>,
    exclude: &BTreeSet<String>,
) -> State {
    let mut out = phi.clone();
    out.store = phi
        .store
        .iter()
        .filter_map(|(k, v)| {
            let name = frame.get(k)?;
            if exclude.contains(name) {
                return None;
            }
            Some((name.clone(), *v))
        })
        .collect();
    out
}

impl<'a> Collector<'a> {
    fn ctx(&self) -> ExecCtx<'_> {
        ExecCtx::new(self.program, &self.ann, self.cfg, &self.tyenv)
    }

    fn exec_all(&self, t: &StateSet, s: &Stmt) -> Result<StateSet, String> {
        exec_all(t, s, self.ctx()).map_err(|f| f.reason)
    }

    fn split_cond(&self, t: &StateSet, cond: &Expr) -> Result<(StateSet, StateSet), String> {
        let mut tt = StateSet::new();
        let mut ff = StateSet::new();
        for phi in t {
            match eval_expr(cond, phi, &Env::new(), &mut BTreeSet::new()) {
                Ok(EvalVal::Val(Value::Bool(true))) => {
                    tt.insert(phi.clone());
                }
                Ok(EvalVal::Val(Value::Bool(false))) => {
                    ff.insert(phi.clone());
                }
                Ok(_) => return Err("condition is not boolean".to_string()),
                Err(e) => return Err(format!("condition error: {}", e.msg)),
            }
        }
        Ok((tt, ff))
    }

    fn walk(
        &mut self,
        t: &StateSet,
        s: &Stmt,
        frame: &BTreeMap<String, String>,
        fuel: usize,
    ) -> Result<StateSet, String> {
        if t.is_empty() {
            return Ok(StateSet::new());
        }
        match s {
            Stmt::Seq(ss) => {
                let mut cur = t.clone();
                for s in ss {
                    cur = self.walk(&cur, s, frame, fuel)?;
                }
                Ok(cur)
            }
            Stmt::Call { rets, method, args }
                if self.program.method(method).is_some_and(|m| !m.is_library()) =>
            {
                if fuel == 0 {
                    return Err(format!("call depth exhausted expanding '{method}'"));
                }
                let m = self.program.method(method).unwrap();
                let body_modif = m.body.as_ref().map(modified_vars).unwrap_or_default();
                let params: Vec<String> = m.params.iter().map(|(p, _)| p.clone()).collect();
                let returns: Vec<String> = m.returns.iter().map(|(r, _)| r.clone()).collect();
                let exp = expand_call(self.program, method, rets, args, &mut self.counter)?;
                for (orig, new) in &exp.map {
                    if let Some(ty) = method_var_types(m).get(orig) {
                        self.tyenv.insert(new.clone(), *ty);
                    }
                }
                let t1 = self.exec_all(t, &exp.prologue)?;
                // Entry boundary: params only (returns are havocked junk).
                let pre_frame: BTreeMap<String, String> = params
                    .iter()
                    .map(|p| (exp.map[p].clone(), p.clone()))
                    .collect();
                let none = BTreeSet::new();
                let slot = self.pre.entry(method.clone()).or_default();
                for phi in &t1 {
                    slot.insert(project(phi, &pre_frame, &none));
                }
                // The callee body runs in its own modular frame.
                let inner_frame: BTreeMap<String, String> =
                    exp.map.iter().map(|(o, n)| (n.clone(), o.clone())).collect();
                let t2 = self.walk(&t1, &exp.body, &inner_frame, fuel - 1)?;
                // Exit boundary: returns plus parameters the body does not
                // modify (modified params do not survive the call in the
                // modular view).
                let post_frame: BTreeMap<String, String> = returns
                    .iter()
                    .chain(params.iter().filter(|p| !body_modif.contains(*p)))
                    .map(|v| (exp.map[v].clone(), v.clone()))
                    .collect();
                let slot = self.post.entry(method.clone()).or_default();
                for phi in &t2 {
                    slot.insert(project(phi, &post_frame, &none));
                }
                self.exec_all(&t2, &exp.epilogue)
            }
            Stmt::While { id, cond, body } => {
                // Loop-head scope excludes the body's own locals: they are
                // not declared yet when the modular semantics reaches the
                // loop statement.
                let mut body_decls = BTreeMap::new();
                declared_types(body, &mut body_decls);
                let exclude: BTreeSet<String> = body_decls
                    .keys()
                    .map(|d| frame.get(d).cloned().unwrap_or_else(|| d.clone()))
                    .collect();
                let mut cur = t.clone();
                let mut out = StateSet::new();
                let mut iter_fuel = fuel;
                loop {
                    if cur.is_empty() {
                        break;
                    }
                    let slot = self.inv.entry(*id).or_default();
                    for phi in &cur {
                        slot.insert(project(phi, frame, &exclude));
                    }
                    let (tt, ff) = self.split_cond(&cur, cond)?;
                    out.extend(ff);
                    if tt.is_empty() {
                        break;
                    }
                    if iter_fuel == 0 {
                        return Err(format!("iteration budget exhausted in loop {id}"));
                    }
                    iter_fuel -= 1;
                    let unit = self.counter;
                    self.counter += 1;
                    let renamed = rename_locals(body, unit);
                    let mut frame2 = frame.clone();
                    for (d, ty) in &body_decls {
                        let new = format!("{d}${unit}");
                        self.tyenv.insert(new.clone(), *ty);
                        frame2.insert(
                            new,
                            frame.get(d).cloned().unwrap_or_else(|| d.clone()),
                        );
                    }
                    cur = self.walk(&tt, &renamed, &frame2, fuel)?;
                }
                Ok(out)
            }
            Stmt::If { cond, then_s, else_s } => {
                let (tt, ff) = self.split_cond(t, cond)?;
                let mut out = self.walk(&tt, then_s, frame, fuel)?;
                out.extend(self.walk(&ff, else_s, frame, fuel)?);
                Ok(out)
            }
            Stmt::Choice(a, b) => {
                let mut out = self.walk(t, a, frame, fuel)?;
                out.extend(self.walk(t, b, frame, fuel)?);
                Ok(out)
            }
            _ => self.exec_all(t, s),
        }
    }
}

/// Build the bounded, indexed program and its maximal extensional
/// annotation at inlining depth `n`. Errors when the bounded inlined form
/// fails to verify (maximality is undefined for failing programs).
pub fn maximal_annotation(p: &Program, n: i64, cfg: &Config) -> Result<MaximalResult, String> {
    let bounded = boundedize(p, n);
    let ix = index_sites(&bounded);
    let q = ix.program;
    let mut tyenv = BTreeMap::new();
    declared_types(&q.init, &mut tyenv);
    let mut coll = Collector {
        program: &q,
        cfg,
        ann: Annotation::default(),
        tyenv,
        counter: 0,
        pre: BTreeMap::new(),
        post: BTreeMap::new(),
        inv: BTreeMap::new(),
    };
    let frame: BTreeMap<String, String> = {
        let mut tys = BTreeMap::new();
        declared_types(&q.init, &mut tys);
        tys.keys().map(|k| (k.clone(), k.clone())).collect()
    };
    let t0: StateSet = [State::unit()].into();
    let fuel = (n.max(0) as usize) + 4;
    coll.walk(&t0, &q.init.clone(), &frame, fuel)?;

    let mut ann = Annotation::default();
    for m in &q.methods {
        if m.is_library() {
            continue;
        }
        let pre = coll.pre.remove(&m.name).unwrap_or_default();
        let post = coll.post.remove(&m.name).unwrap_or_default();
        ann.methods
            .insert(m.name.clone(), (Assertion::Extensional(pre), Assertion::Extensional(post)));
    }
    for (id, set) in coll.inv {
        ann.loops.insert(id, Assertion::Extensional(set));
    }
    Ok(MaximalResult { program: q, annotation: ann, call_sites: ix.call_sites })
}

/// The supported-assertion requirement: exhaling an extensional assertion
/// from any of its own model states leaves exactly that state's core.
/// Non-extensional assertions are outside this check and pass trivially.
pub fn supported(a: &Assertion, program: &Program, cfg: &Config) -> bool {
    let Assertion::Extensional(set) = a else { return true };
    let ann = Annotation::default();
    let tyenv = BTreeMap::new();
    let ctx = ExecCtx::new(program, &ann, cfg, &tyenv);
    set.iter().all(|phi| match exec(&Stmt::Exhale(a.clone()), phi, ctx) {
        Ok(out) => out.len() == 1 && out.contains(&phi.core()),
        Err(_) => false,
    })
}

/// Supportedness of every extensional assertion in an annotation.
pub fn annotation_supported(ann: &Annotation, program: &Program, cfg: &Config) -> bool {
    ann.methods
        .values()
        .flat_map(|(pre, post)| [pre, post])
        .chain(ann.loops.values())
        .all(|a| supported(a, program, cfg))
}
