//! Structural mono and framing checks by self-composition.
//!
//! A probe compares two executions of the same call-free, loop-free
//! fragment: a guarded run from the smaller state phi1 that never fails
//! (it tracks feasibility of the original execution in an `exist` flag:
//! failed assumptions and infeasible exhales falsify the flag instead of
//! failing) and the real run from the larger state phi2. For mono the
//! probe requires every real post-state to dominate the guarded
//! post-state it ran alongside; for framing, the guarded post-state
//! recombined with the frame.
//!
//! Without further care the comparison is hopelessly conservative, because
//! the two runs resolve nondeterminism independently. Each path therefore
//! records its choices in a trace: initial/havocked variable values,
//! branch directions, inhaled wildcard fractions, inhaled heap values (free
//! where the run held no permission, forced otherwise; comparable runs
//! can never disagree on a forced value), and per-location exhaled amounts. Two
//! paths are compared only when their traces agree on every shared choice;
//! exhaled amounts use a weakened rule: if the larger run held no less
//! before the exhale, it must hold no less after, and otherwise the
//! amounts are unconstrained. A feasible real execution with no
//! comparable guarded path yields an inconclusive verdict, which the
//! preservation condition treats as a failure.
//!
//! Pairs whose smaller state does not verify are exempt, mirroring the
//! premise of the mono and framing properties themselves.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::config::Type;
use crate::lang::assertion::{
    eval_assertion_bool, eval_expr, model_set, scale_state, Env, EnvVal, EvalVal, ModelElem,
};
use crate::lang::ast::*;
use crate::lang::rename_assertion;
use crate::semantics::ExecCtx;
use crate::sepalg::{
    add, frac_one, frac_zero, geq, sub_impure, substates, substates_within, Frac, HeapKey,
    PredKey, State, StateSet, Value,
};

use super::{error_failure, single, Clause, FailureKind, PCFailure, PCVerdict};

/// A resource location an exhale removed permission from.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ResKey {
    Cell(HeapKey),
    Pred(PredKey),
}

/// One choice site. Site numbers are assigned by a deterministic counter
/// that advances identically along executions with the same branch
/// history, so shared keys refer to the same program point.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ChoiceKey {
    /// Declared or havocked variable value.
    Var(usize, String),
    /// Wildcard fraction chosen by an inhale; indexed by the expansion
    /// site the model set assigned.
    Wild(usize),
    /// Value a heap cell holds after an inhale covering it.
    HeapVal(usize, HeapKey),
    /// Direction of a nondeterministic choice.
    Branch(usize),
    /// Permission held on a location before and after an exhale.
    Exhaled(usize, ResKey),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ChoiceData {
    Val(Value),
    Frc(Frac),
    Dir(bool),
    Exh { before: Frac, after: Frac },
}

/// The recorded choices of one execution path.
pub type ChoiceTrace = BTreeMap<ChoiceKey, ChoiceData>;

/// Two traces are compatible when they agree on every shared key, with
/// the weakened comparison for exhaled amounts.
pub fn compatible(t1: &ChoiceTrace, t2: &ChoiceTrace) -> bool {
    for (k, v2) in t2 {
        let Some(v1) = t1.get(k) else { continue };
        let ok = match (v1, v2) {
            (
                ChoiceData::Exh { before: b1, after: a1 },
                ChoiceData::Exh { before: b2, after: a2 },
            ) => !(b2 >= b1 && a2 < a1),
            _ => v1 == v2,
        };
        if !ok {
            return false;
        }
    }
    true
}

#[derive(Clone, Debug)]
struct PathSt {
    state: State,
    exist: bool,
    trace: ChoiceTrace,
    ctr: usize,
}

impl PathSt {
    fn start(phi: &State) -> PathSt {
        PathSt { state: phi.clone(), exist: true, trace: ChoiceTrace::new(), ctr: 0 }
    }
}

#[derive(Clone, Debug)]
enum TOut {
    Done(PathSt),
    Failed(ChoiceTrace),
}

/// Wildcard expansion sites of an assertion; matches the counter
/// advancement of `model_set` so recorded indices stay aligned.
fn wild_count(a: &Assertion) -> usize {
    match a {
        Assertion::AccField { perm, .. } | Assertion::AccPred { perm, .. } => {
            matches!(perm, PermExpr::Wildcard) as usize
        }
        Assertion::Star(x, y) => wild_count(x) + wild_count(y),
        Assertion::Exists(_, _, b) => wild_count(b),
        _ => 0,
    }
}

fn record_exhale(trace: &mut ChoiceTrace, site: usize, before: &State, footprint: &State) {
    for (cell, (q, _)) in &footprint.heap {
        let held = before.heap_perm(cell);
        trace.insert(
            ChoiceKey::Exhaled(site, ResKey::Cell(cell.clone())),
            ChoiceData::Exh { before: held, after: held - *q },
        );
    }
    for (key, q) in &footprint.preds {
        let held = before.pred_perm(key);
        trace.insert(
            ChoiceKey::Exhaled(site, ResKey::Pred(key.clone())),
            ChoiceData::Exh { before: held, after: held - *q },
        );
    }
}

fn record_inhale(trace: &mut ChoiceTrace, site: usize, m: &ModelElem) {
    for (idx, f) in &m.wilds {
        trace.insert(ChoiceKey::Wild(*idx), ChoiceData::Frc(*f));
    }
    for (cell, (_, v)) in &m.state.heap {
        trace.insert(ChoiceKey::HeapVal(site, cell.clone()), ChoiceData::Val(*v));
    }
}

struct Tracer<'a> {
    ctx: ExecCtx<'a>,
    /// Guarded mode: never fail, track feasibility in `exist` instead.
    guarded: bool,
}

impl Tracer<'_> {
    /// A failure of the original execution: a real run reports it, a
    /// guarded run should never reach it with `exist` still true (such
    /// states are exempt), so the path is simply dropped.
    fn failed(&self, p: PathSt) -> Vec<TOut> {
        if self.guarded {
            Vec::new()
        } else {
            alloc::vec![TOut::Failed(p.trace)]
        }
    }

    fn value_domain(&self, t: Type) -> Option<Vec<Value>> {
        match t {
            Type::Perm => None,
            _ => Some(self.ctx.config.values_of(t)),
        }
    }

    /// Havoc the given variables one site at a time, recording the chosen
    /// values.
    fn havoc(&self, mut paths: Vec<PathSt>, vars: &[(String, Type)]) -> Option<Vec<PathSt>> {
        for (i, (x, t)) in vars.iter().enumerate() {
            let dom = self.value_domain(*t)?;
            let mut next = Vec::with_capacity(paths.len() * dom.len());
            for p in &paths {
                let site = p.ctr + i;
                for v in &dom {
                    let mut q = p.clone();
                    q.state.store.insert(x.clone(), *v);
                    q.trace.insert(ChoiceKey::Var(site, x.clone()), ChoiceData::Val(*v));
                    next.push(q);
                }
            }
            paths = next;
        }
        for p in &mut paths {
            p.ctr += vars.len();
        }
        Some(paths)
    }

    fn run(&self, s: &Stmt, p: PathSt) -> Result<Vec<TOut>, String> {
        let cfg = self.ctx.config;
        Ok(match s {
            Stmt::Seq(ss) => {
                let mut done = alloc::vec![p];
                let mut out = Vec::new();
                for s in ss {
                    let mut next = Vec::new();
                    for q in done {
                        for o in self.run(s, q)? {
                            match o {
                                TOut::Done(q2) => next.push(q2),
                                f => out.push(f),
                            }
                        }
                    }
                    done = next;
                }
                out.extend(done.into_iter().map(TOut::Done));
                out
            }
            Stmt::Skip => alloc::vec![TOut::Done(p)],
            Stmt::Assume(a) => match eval_assertion_bool(a, &p.state, &Env::new()) {
                Ok(true) => alloc::vec![TOut::Done(p)],
                Ok(false) => {
                    if self.guarded {
                        let mut q = p;
                        q.exist = false;
                        alloc::vec![TOut::Done(q)]
                    } else {
                        Vec::new()
                    }
                }
                Err(_) => self.failed(p),
            },
            Stmt::Assert(a) => {
                let span = wild_count(a);
                let mut q = p.clone();
                q.ctr += span;
                if self.guarded && !q.exist {
                    return Ok(alloc::vec![TOut::Done(q)]);
                }
                let mut c = p.ctr;
                match model_set(a, cfg, &p.state, &mut Env::new(), &mut c) {
                    Err(_) => self.failed(p),
                    Ok(models) => {
                        if models.iter().any(|m| geq(&p.state, &m.state)) {
                            alloc::vec![TOut::Done(q)]
                        } else if self.guarded {
                            // The guarded form assumes the assertion; an
                            // unsatisfied resource assumption prunes.
                            Vec::new()
                        } else {
                            self.failed(p)
                        }
                    }
                }
            }
            Stmt::Inhale(a) => {
                let site = p.ctr;
                let span = wild_count(a).max(1);
                if self.guarded && !p.exist {
                    let mut q = p;
                    q.ctr += span;
                    return Ok(alloc::vec![TOut::Done(q)]);
                }
                let mut c = site;
                let models = match model_set(a, cfg, &p.state, &mut Env::new(), &mut c) {
                    Ok(ms) => ms,
                    Err(_) => return Ok(self.failed(p)),
                };
                let mut out = Vec::new();
                for m in &models {
                    if let Some(s2) = add(&p.state, &m.state) {
                        let mut q = p.clone();
                        record_inhale(&mut q.trace, site, m);
                        q.state = s2;
                        q.ctr += span;
                        out.push(TOut::Done(q));
                    }
                }
                out
            }
            Stmt::Exhale(a) => {
                let site = p.ctr;
                let span = wild_count(a).max(1);
                if self.guarded && !p.exist {
                    let mut q = p;
                    q.ctr += span;
                    return Ok(alloc::vec![TOut::Done(q)]);
                }
                let mut c = site;
                let models = match model_set(a, cfg, &p.state, &mut Env::new(), &mut c) {
                    Ok(ms) => ms,
                    Err(_) => return Ok(self.failed(p)),
                };
                let feasible: Vec<&ModelElem> =
                    models.iter().filter(|m| geq(&p.state, &m.state)).collect();
                if feasible.is_empty() {
                    if self.guarded {
                        let mut q = p;
                        q.exist = false;
                        q.ctr += span;
                        return Ok(alloc::vec![TOut::Done(q)]);
                    }
                    return Ok(self.failed(p));
                }
                let mut out = Vec::new();
                for m in feasible {
                    let mut q = p.clone();
                    record_exhale(&mut q.trace, site, &p.state, &m.state);
                    q.state = sub_impure(&p.state, &m.state);
                    q.ctr += span;
                    out.push(TOut::Done(q));
                }
                out
            }
            Stmt::VarDecl(ds) => match self.havoc(alloc::vec![p.clone()], ds) {
                Some(paths) => paths.into_iter().map(TOut::Done).collect(),
                None => self.failed(p),
            },
            Stmt::Havoc(xs) => {
                let mut vars = Vec::with_capacity(xs.len());
                for x in xs {
                    let declared = p.state.store.contains_key(x);
                    match (declared, self.ctx.tyenv.get(x)) {
                        (true, Some(t)) => vars.push((x.clone(), *t)),
                        _ => return Ok(self.failed(p)),
                    }
                }
                match self.havoc(alloc::vec![p.clone()], &vars) {
                    Some(paths) => paths.into_iter().map(TOut::Done).collect(),
                    None => self.failed(p),
                }
            }
            Stmt::Assign(x, e) => {
                if self.guarded && !p.exist {
                    return Ok(alloc::vec![TOut::Done(p)]);
                }
                if !p.state.store.contains_key(x) {
                    return Ok(self.failed(p));
                }
                match eval_expr(e, &p.state, &Env::new(), &mut Default::default()) {
                    Ok(EvalVal::Val(v)) if cfg.contains_value(v) => {
                        let mut q = p;
                        q.state.store.insert(x.clone(), v);
                        alloc::vec![TOut::Done(q)]
                    }
                    _ => self.failed(p),
                }
            }
            Stmt::FieldWrite(x, f, e) => {
                if self.guarded && !p.exist {
                    return Ok(alloc::vec![TOut::Done(p)]);
                }
                let r = match p.state.store.get(x) {
                    Some(Value::Ref(r)) => *r,
                    _ => return Ok(self.failed(p)),
                };
                let key = (r, f.clone());
                if p.state.heap_perm(&key) != frac_one() {
                    return Ok(self.failed(p));
                }
                match eval_expr(e, &p.state, &Env::new(), &mut Default::default()) {
                    Ok(EvalVal::Val(v)) if cfg.contains_value(v) => {
                        let mut q = p;
                        q.state.set_heap(key, frac_one(), v);
                        alloc::vec![TOut::Done(q)]
                    }
                    _ => self.failed(p),
                }
            }
            Stmt::Call { rets, method, args } => self.run_call(rets, method, args, p)?,
            Stmt::If { cond, then_s, else_s } => {
                match eval_expr(cond, &p.state, &Env::new(), &mut Default::default()) {
                    Ok(EvalVal::Val(Value::Bool(true))) => self.run(then_s, p)?,
                    Ok(EvalVal::Val(Value::Bool(false))) => self.run(else_s, p)?,
                    _ => self.failed(p),
                }
            }
            Stmt::Choice(a, b) => {
                let site = p.ctr;
                let mut left = p.clone();
                left.ctr += 1;
                left.trace.insert(ChoiceKey::Branch(site), ChoiceData::Dir(false));
                let mut right = p;
                right.ctr += 1;
                right.trace.insert(ChoiceKey::Branch(site), ChoiceData::Dir(true));
                let mut out = self.run(a, left)?;
                out.extend(self.run(b, right)?);
                out
            }
            Stmt::While { .. } => {
                return Err("structural probes apply to loop-free fragments".to_string())
            }
            Stmt::Fold { pred, args, perm } => self.run_exchange(pred, args, perm, p, true)?,
            Stmt::Unfold { pred, args, perm } => self.run_exchange(pred, args, perm, p, false)?,
        })
    }

    fn run_call(
        &self,
        rets: &[String],
        method: &str,
        args: &[String],
        p: PathSt,
    ) -> Result<Vec<TOut>, String> {
        let cfg = self.ctx.config;
        let Some(m) = self.ctx.program.method(method) else {
            return Ok(self.failed(p));
        };
        if !m.is_library() {
            return Err(format!(
                "structural probes apply to call-free fragments (call to bodied '{method}')"
            ));
        }
        let Some(spec) = &m.spec else { return Ok(self.failed(p)) };
        if args.iter().chain(rets).any(|x| !p.state.store.contains_key(x))
            || m.params.len() != args.len()
            || m.returns.len() != rets.len()
        {
            return Ok(self.failed(p));
        }
        let mut map = BTreeMap::new();
        for ((f, _), a) in m.params.iter().zip(args) {
            map.insert(f.clone(), a.clone());
        }
        for ((f, _), r) in m.returns.iter().zip(rets) {
            map.insert(f.clone(), r.clone());
        }
        let ret_vars: Vec<(String, Type)> = m
            .returns
            .iter()
            .zip(rets)
            .map(|((_, t), r)| (r.clone(), *t))
            .collect();
        let pre = rename_assertion(&spec.pre, &map);
        let post = rename_assertion(&spec.post, &map);

        // Deterministic site layout: exhale site, then pre wildcards,
        // then one havoc site per return, then the post's inhale site
        // (and its wildcards), then one slot of padding.
        let site_ex = p.ctr;
        let havoc_base = site_ex + wild_count(&pre);
        let site_post = havoc_base + rets.len();
        let end = site_post + wild_count(&post) + 1;

        if self.guarded && !p.exist {
            // Skip the resource exchange but still havoc the returns.
            let mut q = p.clone();
            q.ctr = havoc_base;
            return Ok(match self.havoc(alloc::vec![q], &ret_vars) {
                Some(paths) => paths
                    .into_iter()
                    .map(|mut q| {
                        q.ctr = end;
                        TOut::Done(q)
                    })
                    .collect(),
                None => self.failed(p),
            });
        }

        // Binder instantiations, demonic over the exhale-feasible ones.
        let mut insts = alloc::vec![Env::new()];
        for (b, t) in &spec.binders {
            let mut next = Vec::new();
            for env in &insts {
                match t {
                    Type::Perm => {
                        for f in cfg.fracs_nonzero() {
                            let mut e2 = env.clone();
                            e2.insert(b.clone(), EnvVal::Frc(f));
                            next.push(e2);
                        }
                    }
                    _ => {
                        for v in cfg.values_of(*t) {
                            let mut e2 = env.clone();
                            e2.insert(b.clone(), EnvVal::Val(v));
                            next.push(e2);
                        }
                    }
                }
            }
            insts = next;
        }

        let mut out = Vec::new();
        let mut any_feasible = false;
        for mut env in insts {
            let mut c = site_ex;
            let models = match model_set(&pre, cfg, &p.state, &mut env, &mut c) {
                Ok(ms) => ms,
                Err(_) => continue,
            };
            let feasible: Vec<State> = models
                .into_iter()
                .filter(|m| geq(&p.state, &m.state))
                .map(|m| m.state)
                .collect();
            if feasible.is_empty() {
                continue;
            }
            any_feasible = true;
            for i in &feasible {
                let mut base = p.clone();
                record_exhale(&mut base.trace, site_ex, &p.state, i);
                base.state = sub_impure(&p.state, i);
                base.ctr = havoc_base;
                let Some(havocked) = self.havoc(alloc::vec![base], &ret_vars) else {
                    return Ok(self.failed(p));
                };
                for h in havocked {
                    let mut c2 = site_post;
                    let models2 =
                        match model_set(&post, cfg, &h.state, &mut env.clone(), &mut c2) {
                            Ok(ms) => ms,
                            Err(_) => return Ok(self.failed(p)),
                        };
                    for m2 in &models2 {
                        if let Some(s2) = add(&h.state, &m2.state) {
                            let mut q = h.clone();
                            record_inhale(&mut q.trace, site_post, m2);
                            q.state = s2;
                            q.ctr = end;
                            out.push(TOut::Done(q));
                        }
                    }
                }
            }
        }
        if !any_feasible {
            if self.guarded {
                // No instantiation can be exhaled: the original execution
                // fails here. Record infeasibility and havoc the returns.
                let mut q = p.clone();
                q.exist = false;
                q.ctr = havoc_base;
                return Ok(match self.havoc(alloc::vec![q], &ret_vars) {
                    Some(paths) => paths
                        .into_iter()
                        .map(|mut q| {
                            q.ctr = end;
                            TOut::Done(q)
                        })
                        .collect(),
                    None => self.failed(p),
                });
            }
            return Ok(self.failed(p));
        }
        Ok(out)
    }

    fn run_exchange(
        &self,
        pred: &str,
        args: &[Expr],
        perm: &PermExpr,
        p: PathSt,
        folding: bool,
    ) -> Result<Vec<TOut>, String> {
        let cfg = self.ctx.config;
        let site = p.ctr;
        let Some(pd) = self.ctx.program.pred(pred) else { return Ok(self.failed(p)) };
        let Some(body) = pd.body.clone() else { return Ok(self.failed(p)) };
        let span = wild_count(&body) + 1;
        if self.guarded && !p.exist {
            let mut q = p;
            q.ctr += span;
            return Ok(alloc::vec![TOut::Done(q)]);
        }
        let mut vals = Vec::with_capacity(args.len());
        for a in args {
            match eval_expr(a, &p.state, &Env::new(), &mut Default::default()) {
                Ok(EvalVal::Val(v)) => vals.push(v),
                _ => return Ok(self.failed(p)),
            }
        }
        let key = (pred.to_string(), vals.clone());
        let mut env = Env::new();
        for ((x, _), v) in pd.params.iter().zip(&vals) {
            env.insert(x.clone(), EnvVal::Val(*v));
        }
        let amounts: Vec<Frac> = match perm {
            PermExpr::Wildcard => cfg.fracs_nonzero(),
            PermExpr::Lit(n, d) => {
                let f = Frac::new(*n, *d);
                if !cfg.on_grid(f) {
                    return Ok(self.failed(p));
                }
                alloc::vec![f]
            }
            other => {
                let probe = match other {
                    PermExpr::Perm(loc) => Expr::Perm(loc.clone()),
                    PermExpr::Var(x) => Expr::Var(x.clone()),
                    _ => unreachable!(),
                };
                match eval_expr(&probe, &p.state, &env, &mut Default::default()) {
                    Ok(EvalVal::Frc(f)) if cfg.on_grid(f) => alloc::vec![f],
                    _ => return Ok(self.failed(p)),
                }
            }
        };
        let mut out = Vec::new();
        let mut any_feasible = false;
        for f in amounts {
            if f == frac_zero() {
                any_feasible = true;
                let mut q = p.clone();
                q.ctr += span;
                out.push(TOut::Done(q));
                continue;
            }
            let mut c = site;
            let body_models =
                match model_set(&body, cfg, &p.state, &mut env.clone(), &mut c) {
                    Ok(ms) => ms,
                    Err(_) => return Ok(self.failed(p)),
                };
            let scaled: Vec<State> = body_models
                .iter()
                .filter_map(|m| scale_state(&m.state, f, cfg))
                .collect();
            if folding {
                for i in scaled.iter().filter(|i| geq(&p.state, i)) {
                    any_feasible = true;
                    let mut q = p.clone();
                    record_exhale(&mut q.trace, site, &p.state, i);
                    let base = sub_impure(&p.state, i);
                    let mut gained = State::unit();
                    gained.set_pred(key.clone(), f);
                    if let Some(s2) = add(&base, &gained) {
                        q.state = s2;
                        q.ctr += span;
                        out.push(TOut::Done(q));
                    }
                }
            } else {
                if p.state.pred_perm(&key) < f {
                    continue;
                }
                any_feasible = true;
                let held = p.state.pred_perm(&key);
                let mut lost = State::unit();
                lost.set_pred(key.clone(), f);
                let base = sub_impure(&p.state, &lost);
                for i in &scaled {
                    if let Some(s2) = add(&base, i) {
                        let mut q = p.clone();
                        q.trace.insert(
                            ChoiceKey::Exhaled(site, ResKey::Pred(key.clone())),
                            ChoiceData::Exh { before: held, after: held - f },
                        );
                        for (cell, (_, v)) in &i.heap {
                            q.trace.insert(
                                ChoiceKey::HeapVal(site, cell.clone()),
                                ChoiceData::Val(*v),
                            );
                        }
                        q.state = s2;
                        q.ctr += span;
                        out.push(TOut::Done(q));
                    }
                }
            }
        }
        if !any_feasible {
            if self.guarded {
                let mut q = p;
                q.exist = false;
                q.ctr += span;
                return Ok(alloc::vec![TOut::Done(q)]);
            }
            return Ok(self.failed(p));
        }
        Ok(out)
    }
}

/// Memoized real and guarded runs of one fragment.
struct Runs<'a> {
    stmt: &'a Stmt,
    real_tr: Tracer<'a>,
    guard_tr: Tracer<'a>,
    real: BTreeMap<State, Result<Vec<TOut>, String>>,
    guard: BTreeMap<State, Result<Vec<PathSt>, String>>,
}

impl<'a> Runs<'a> {
    fn new(ctx: ExecCtx<'a>, stmt: &'a Stmt) -> Runs<'a> {
        Runs {
            stmt,
            real_tr: Tracer { ctx, guarded: false },
            guard_tr: Tracer { ctx, guarded: true },
            real: BTreeMap::new(),
            guard: BTreeMap::new(),
        }
    }

    fn real(&mut self, phi: &State) -> Result<Vec<TOut>, String> {
        let Runs { stmt, real_tr, real, .. } = self;
        real.entry(phi.clone())
            .or_insert_with(|| real_tr.run(stmt, PathSt::start(phi)))
            .clone()
    }

    fn guarded(&mut self, phi: &State) -> Result<Vec<PathSt>, String> {
        let Runs { stmt, guard_tr, guard, .. } = self;
        guard
            .entry(phi.clone())
            .or_insert_with(|| {
                guard_tr.run(stmt, PathSt::start(phi)).map(|outs| {
                    outs.into_iter()
                        .filter_map(|o| match o {
                            TOut::Done(q) => Some(q),
                            TOut::Failed(_) => None,
                        })
                        .collect()
                })
            })
            .clone()
    }
}

fn pair_failure(
    clause: Clause,
    kind: FailureKind,
    site: &str,
    phi1: &State,
    phi2: &State,
    frame: Option<&State>,
    detail: String,
) -> PCFailure {
    PCFailure {
        clause,
        kind,
        site: String::from(site),
        phi1: Some(phi1.clone()),
        phi2: Some(phi2.clone()),
        frame: frame.cloned(),
        detail,
    }
}

/// Compare the real run from phi2 against the guarded run from phi1,
/// requiring `ok(q1, q2)` on every compatible pair. Returns the first
/// failure, or the first inconclusive obligation if nothing failed.
#[allow(clippy::too_many_arguments)]
fn compare_runs(
    e1: &[PathSt],
    e2: &[TOut],
    determinize: bool,
    clause: Clause,
    site: &str,
    phi1: &State,
    phi2: &State,
    frame: Option<&State>,
    gran: i64,
    ok: &dyn Fn(&PathSt, &PathSt) -> bool,
    inconclusive: &mut Option<PCFailure>,
) -> Option<PCFailure> {
    for o2 in e2 {
        let trace2 = match o2 {
            TOut::Done(q2) => &q2.trace,
            TOut::Failed(t) => t,
        };
        let compat: Vec<&PathSt> = e1
            .iter()
            .filter(|q1| !determinize || compatible(&q1.trace, trace2))
            .collect();
        if compat.is_empty() {
            if inconclusive.is_none() {
                *inconclusive = Some(pair_failure(
                    clause,
                    FailureKind::Inconclusive,
                    site,
                    phi1,
                    phi2,
                    frame,
                    format!(
                        "execution from {} has no comparable execution from {}",
                        phi2.render(gran),
                        phi1.render(gran)
                    ),
                ));
            }
            continue;
        }
        match o2 {
            TOut::Failed(_) => {
                let kind = FailureKind::Safety;
                return Some(pair_failure(
                    clause,
                    kind,
                    site,
                    phi1,
                    phi2,
                    frame,
                    format!(
                        "{} verifies but a comparable execution from {} fails",
                        phi1.render(gran),
                        phi2.render(gran)
                    ),
                ));
            }
            TOut::Done(q2) => {
                for q1 in compat {
                    if !q1.exist {
                        let kind = if frame.is_some() {
                            FailureKind::Frame
                        } else {
                            FailureKind::Output
                        };
                        return Some(pair_failure(
                            clause,
                            kind,
                            site,
                            phi1,
                            phi2,
                            frame,
                            format!(
                                "feasible execution from {} runs alongside an infeasible one from {}",
                                phi2.render(gran),
                                phi1.render(gran)
                            ),
                        ));
                    }
                    if !ok(q1, q2) {
                        let kind = if frame.is_some() {
                            FailureKind::Frame
                        } else {
                            FailureKind::Output
                        };
                        return Some(pair_failure(
                            clause,
                            kind,
                            site,
                            phi1,
                            phi2,
                            frame,
                            format!(
                                "post-state {} does not dominate paired post-state {}",
                                q2.state.render(gran),
                                q1.state.render(gran)
                            ),
                        ));
                    }
                }
            }
        }
    }
    None
}

/// Structural mono check over the downward closure of `t`.
pub fn check_mono_structural(t: &StateSet, s: &Stmt, ctx: ExecCtx, site: &str) -> PCVerdict {
    check_mono_structural_over(
        &substates_within(t, ctx.config.gran),
        s,
        ctx,
        site,
        Clause::Mono,
    )
}

/// Structural mono over an explicitly given, already-closed universe.
pub fn check_mono_structural_over(
    closure: &StateSet,
    s: &Stmt,
    ctx: ExecCtx,
    site: &str,
    clause: Clause,
) -> PCVerdict {
    let gran = ctx.config.gran;
    let det = ctx.config.determinize;
    let mut runs = Runs::new(ctx, s);
    let mut inconclusive: Option<PCFailure> = None;
    for phi2 in closure {
        let mut subs = substates(phi2, gran);
        subs.sort();
        for phi1 in subs {
            let e1_real = match runs.real(&phi1) {
                Ok(v) => v,
                Err(e) => return single(error_failure(clause, site, e)),
            };
            if e1_real.iter().any(|o| matches!(o, TOut::Failed(_))) {
                continue; // phi1 does not verify: pair exempt
            }
            let e1 = match runs.guarded(&phi1) {
                Ok(v) => v,
                Err(e) => return single(error_failure(clause, site, e)),
            };
            let e2 = match runs.real(phi2) {
                Ok(v) => v,
                Err(e) => return single(error_failure(clause, site, e)),
            };
            let ok = |q1: &PathSt, q2: &PathSt| geq(&q2.state, &q1.state);
            if let Some(f) = compare_runs(
                &e1,
                &e2,
                det,
                clause,
                site,
                &phi1,
                phi2,
                None,
                gran,
                &ok,
                &mut inconclusive,
            ) {
                return single(f);
            }
        }
    }
    match inconclusive {
        Some(f) => single(f),
        None => PCVerdict::pass(),
    }
}

/// Structural framing check over the downward closure of `t`.
pub fn check_framing_structural(
    t: &StateSet,
    s: &Stmt,
    ctx: ExecCtx,
    site: &str,
) -> PCVerdict {
    let gran = ctx.config.gran;
    let det = ctx.config.determinize;
    let closure = substates_within(t, gran);
    let modif = modified_vars(s);
    let mut runs = Runs::new(ctx, s);
    let mut seen: alloc::collections::BTreeSet<(State, State)> = Default::default();
    let mut inconclusive: Option<PCFailure> = None;
    for psi in &closure {
        for (phi, r) in super::semantic::decompositions(psi, &modif, gran) {
            if !seen.insert((phi.clone(), r.clone())) {
                continue;
            }
            let e1_real = match runs.real(&phi) {
                Ok(v) => v,
                Err(e) => return single(error_failure(Clause::Framing, site, e)),
            };
            if e1_real.iter().any(|o| matches!(o, TOut::Failed(_))) {
                continue; // phi does not verify: pair exempt
            }
            let e1 = match runs.guarded(&phi) {
                Ok(v) => v,
                Err(e) => return single(error_failure(Clause::Framing, site, e)),
            };
            let e2 = match runs.real(psi) {
                Ok(v) => v,
                Err(e) => return single(error_failure(Clause::Framing, site, e)),
            };
            let frame = r.clone();
            let ok = move |q1: &PathSt, q2: &PathSt| match add(&q1.state, &frame) {
                Some(framed) => geq(&q2.state, &framed),
                None => false,
            };
            if let Some(f) = compare_runs(
                &e1,
                &e2,
                det,
                Clause::Framing,
                site,
                &phi,
                psi,
                Some(&r),
                gran,
                &ok,
                &mut inconclusive,
            ) {
                return single(f);
            }
        }
    }
    match inconclusive {
        Some(f) => single(f),
        None => PCVerdict::pass(),
    }
}
