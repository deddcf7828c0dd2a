//! Expression evaluation and assertion model sets.
//!
//! `model_set` computes the minimal-footprint models of an assertion. Pure
//! atoms enumerate satisfying stores over exactly their free variables, so
//! that lifted addition (inhale) or resource ordering (exhale) does the
//! filtering against the current state. Atoms that read the heap or use
//! `perm(...)` are instead evaluated two-staged against the evaluation
//! state and contribute `{u}`, `{}`, or an error.
//!
//! Wildcard permission amounts expand to a union over all nonzero grid
//! fractions; each expansion site gets a stable index and every resulting
//! element records which fraction it chose (`ModelElem::wilds`), which is
//! what lets the structural checkers match wildcard choices across the two
//! executions of a self-composition probe.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ast::*;
use crate::config::{Config, Type};
use crate::sepalg::{frac_zero, geq, lifted_add, Frac, State, StateSet, Value};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalError {
    pub msg: String,
}

fn err<T>(msg: impl Into<String>) -> Result<T, EvalError> {
    Err(EvalError { msg: msg.into() })
}

/// Environment for bound variables: exists binders and spec binders.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EnvVal {
    Val(Value),
    Frc(Frac),
}

pub type Env = BTreeMap<String, EnvVal>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalVal {
    Val(Value),
    Frc(Frac),
}

impl EvalVal {
    fn as_frac(self) -> Option<Frac> {
        match self {
            EvalVal::Frc(f) => Some(f),
            EvalVal::Val(Value::Int(i)) => Some(Frac::new(i, 1)),
            _ => None,
        }
    }
}

/// Evaluate an expression against `state` (store and heap) under `env`.
/// Store variables read along the way are recorded in `deps`; heap reads
/// require positive permission in `state`.
pub fn eval_expr(
    e: &Expr,
    state: &State,
    env: &Env,
    deps: &mut BTreeSet<String>,
) -> Result<EvalVal, EvalError> {
    match e {
        Expr::IntLit(i) => Ok(EvalVal::Val(Value::Int(*i))),
        Expr::BoolLit(b) => Ok(EvalVal::Val(Value::Bool(*b))),
        Expr::NullLit => Ok(EvalVal::Val(Value::Null)),
        Expr::FracLit(n, d) => Ok(EvalVal::Frc(Frac::new(*n, *d))),
        Expr::Var(x) => lookup_var(x, state, env, deps),
        Expr::Field(x, f) => {
            let recv = lookup_var(x, state, env, deps)?;
            let r = expect_ref(recv, x)?;
            let key = (r, f.clone());
            match state.heap.get(&key) {
                Some((p, v)) if *p > frac_zero() => Ok(EvalVal::Val(*v)),
                _ => err(format!("read of {x}.{f} without permission")),
            }
        }
        Expr::Perm(loc) => Ok(EvalVal::Frc(eval_perm_loc(loc, state, env, deps)?)),
        Expr::Unary(op, a) => {
            let v = eval_expr(a, state, env, deps)?;
            match (op, v) {
                (UnOp::Not, EvalVal::Val(Value::Bool(b))) => Ok(EvalVal::Val(Value::Bool(!b))),
                (UnOp::Neg, EvalVal::Val(Value::Int(i))) => Ok(EvalVal::Val(Value::Int(-i))),
                (UnOp::Neg, EvalVal::Frc(f)) => Ok(EvalVal::Frc(-f)),
                _ => err("type error in unary operation"),
            }
        }
        Expr::Binary(op, a, b) => eval_binary(*op, a, b, state, env, deps),
    }
}

fn lookup_var(
    x: &str,
    state: &State,
    env: &Env,
    deps: &mut BTreeSet<String>,
) -> Result<EvalVal, EvalError> {
    if let Some(ev) = env.get(x) {
        return Ok(match ev {
            EnvVal::Val(v) => EvalVal::Val(*v),
            EnvVal::Frc(f) => EvalVal::Frc(*f),
        });
    }
    match state.store.get(x) {
        Some(v) => {
            deps.insert(x.to_string());
            Ok(EvalVal::Val(*v))
        }
        None => err(format!("undefined variable '{x}'")),
    }
}

fn expect_ref(v: EvalVal, ctx: &str) -> Result<u32, EvalError> {
    match v {
        EvalVal::Val(Value::Ref(r)) => Ok(r),
        EvalVal::Val(Value::Null) => err(format!("null dereference via '{ctx}'")),
        _ => err(format!("'{ctx}' is not a reference")),
    }
}

fn eval_perm_loc(
    loc: &PermLoc,
    state: &State,
    env: &Env,
    deps: &mut BTreeSet<String>,
) -> Result<Frac, EvalError> {
    match loc {
        PermLoc::Field(x, f) => {
            let recv = lookup_var(x, state, env, deps)?;
            match recv {
                // perm on a null receiver is simply zero.
                EvalVal::Val(Value::Null) => Ok(frac_zero()),
                EvalVal::Val(Value::Ref(r)) => Ok(state.heap_perm(&(r, f.clone()))),
                _ => err(format!("'{x}' is not a reference")),
            }
        }
        PermLoc::Pred(name, args) => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                match eval_expr(a, state, env, deps)? {
                    EvalVal::Val(v) => vals.push(v),
                    EvalVal::Frc(_) => return err("permission-typed predicate argument value"),
                }
            }
            Ok(state.pred_perm(&(name.clone(), vals)))
        }
    }
}

fn eval_binary(
    op: BinOp,
    a: &Expr,
    b: &Expr,
    state: &State,
    env: &Env,
    deps: &mut BTreeSet<String>,
) -> Result<EvalVal, EvalError> {
    // Lazy boolean connectives: the right operand of a decided && or || is
    // not evaluated, so it may be undefined.
    if matches!(op, BinOp::And | BinOp::Or) {
        let l = eval_expr(a, state, env, deps)?;
        let lb = match l {
            EvalVal::Val(Value::Bool(b)) => b,
            _ => return err("type error: boolean operand expected"),
        };
        if (op == BinOp::And && !lb) || (op == BinOp::Or && lb) {
            return Ok(EvalVal::Val(Value::Bool(lb)));
        }
        let r = eval_expr(b, state, env, deps)?;
        return match r {
            EvalVal::Val(Value::Bool(rb)) => Ok(EvalVal::Val(Value::Bool(rb))),
            _ => err("type error: boolean operand expected"),
        };
    }
    let l = eval_expr(a, state, env, deps)?;
    let r = eval_expr(b, state, env, deps)?;
    match op {
        BinOp::Add | BinOp::Sub => match (l, r) {
            (EvalVal::Val(Value::Int(x)), EvalVal::Val(Value::Int(y))) => {
                Ok(EvalVal::Val(Value::Int(if op == BinOp::Add { x + y } else { x - y })))
            }
            _ => match (l.as_frac(), r.as_frac()) {
                (Some(x), Some(y)) => {
                    Ok(EvalVal::Frc(if op == BinOp::Add { x + y } else { x - y }))
                }
                _ => err("type error in arithmetic"),
            },
        },
        BinOp::Eq | BinOp::Ne => {
            let eq = match (l, r) {
                (EvalVal::Val(x), EvalVal::Val(y)) => match (x, y) {
                    (Value::Int(_), Value::Int(_))
                    | (Value::Bool(_), Value::Bool(_))
                    | (Value::Null | Value::Ref(_), Value::Null | Value::Ref(_)) => x == y,
                    _ => return err("type error in equality"),
                },
                _ => match (l.as_frac(), r.as_frac()) {
                    (Some(x), Some(y)) => x == y,
                    _ => return err("type error in equality"),
                },
            };
            Ok(EvalVal::Val(Value::Bool(if op == BinOp::Eq { eq } else { !eq })))
        }
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let (x, y) = match (l.as_frac(), r.as_frac()) {
                (Some(x), Some(y)) => (x, y),
                _ => return err("type error in comparison"),
            };
            let b = match op {
                BinOp::Lt => x < y,
                BinOp::Le => x <= y,
                BinOp::Gt => x > y,
                _ => x >= y,
            };
            Ok(EvalVal::Val(Value::Bool(b)))
        }
        BinOp::And | BinOp::Or => unreachable!(),
    }
}

/// One model element: a state plus the wildcard fractions it chose, keyed by
/// the expansion site's index.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ModelElem {
    pub state: State,
    pub wilds: BTreeMap<usize, Frac>,
}

impl ModelElem {
    fn unit() -> ModelElem {
        ModelElem { state: State::unit(), wilds: BTreeMap::new() }
    }

    fn from_state(state: State) -> ModelElem {
        ModelElem { state, wilds: BTreeMap::new() }
    }
}

/// Does the expression read the heap or introspect permissions? Such atoms
/// are evaluated against the current state rather than enumerated.
pub fn expr_reads_heap(e: &Expr) -> bool {
    match e {
        Expr::Field(..) | Expr::Perm(_) => true,
        Expr::Unary(_, a) => expr_reads_heap(a),
        Expr::Binary(_, a, b) => expr_reads_heap(a) || expr_reads_heap(b),
        _ => false,
    }
}

pub fn expr_free_vars(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::Var(x) => {
            out.insert(x.clone());
        }
        Expr::Field(x, _) => {
            out.insert(x.clone());
        }
        Expr::Perm(PermLoc::Field(x, _)) => {
            out.insert(x.clone());
        }
        Expr::Perm(PermLoc::Pred(_, args)) => {
            args.iter().for_each(|a| expr_free_vars(a, out));
        }
        Expr::Unary(_, a) => expr_free_vars(a, out),
        Expr::Binary(_, a, b) => {
            expr_free_vars(a, out);
            expr_free_vars(b, out);
        }
        _ => {}
    }
}

fn perm_expr_free_vars(p: &PermExpr, out: &mut BTreeSet<String>) {
    match p {
        PermExpr::Perm(PermLoc::Field(x, _)) => {
            out.insert(x.clone());
        }
        PermExpr::Perm(PermLoc::Pred(_, args)) => {
            args.iter().for_each(|a| expr_free_vars(a, out));
        }
        PermExpr::Var(x) => {
            out.insert(x.clone());
        }
        _ => {}
    }
}

pub fn assertion_free_vars(a: &Assertion, out: &mut BTreeSet<String>) {
    match a {
        Assertion::Bool(_) | Assertion::Extensional(_) => {}
        Assertion::AccField { var, perm, value, .. } => {
            out.insert(var.clone());
            perm_expr_free_vars(perm, out);
            if let Some(e) = value {
                expr_free_vars(e, out);
            }
        }
        Assertion::AccPred { args, perm, .. } => {
            args.iter().for_each(|e| expr_free_vars(e, out));
            perm_expr_free_vars(perm, out);
        }
        Assertion::Cond(e) => expr_free_vars(e, out),
        Assertion::Star(x, y) => {
            assertion_free_vars(x, out);
            assertion_free_vars(y, out);
        }
        Assertion::Exists(v, _, b) => {
            let mut inner = BTreeSet::new();
            assertion_free_vars(b, &mut inner);
            inner.remove(v);
            out.extend(inner);
        }
    }
}

enum PermAmount {
    Exact(Frac),
    Wild,
}

fn eval_perm_expr(
    p: &PermExpr,
    cfg: &Config,
    state: &State,
    env: &Env,
    deps: &mut BTreeSet<String>,
) -> Result<PermAmount, EvalError> {
    match p {
        PermExpr::Lit(n, d) => {
            let f = Frac::new(*n, *d);
            if !cfg.on_grid(f) {
                return err(format!("permission {n}/{d} not a multiple of 1/{}", cfg.gran));
            }
            Ok(PermAmount::Exact(f))
        }
        PermExpr::Wildcard => Ok(PermAmount::Wild),
        PermExpr::Perm(loc) => Ok(PermAmount::Exact(eval_perm_loc(loc, state, env, deps)?)),
        PermExpr::Var(x) => match env.get(x) {
            Some(EnvVal::Frc(f)) => Ok(PermAmount::Exact(*f)),
            Some(EnvVal::Val(_)) => err(format!("'{x}' is not permission-typed")),
            None => err(format!("unbound permission variable '{x}'")),
        },
    }
}

/// Store footprint of a set of variable reads, taken from the evaluation
/// state.
fn deps_store(deps: &BTreeSet<String>, state: &State) -> State {
    let mut s = State::unit();
    for x in deps {
        if let Some(v) = state.store.get(x) {
            s.store.insert(x.clone(), *v);
        }
    }
    s
}

/// The model set of an assertion, relative to an evaluation state (for
/// receiver variables, value constraints, and `perm(...)` introspection)
/// and an environment for bound variables.
///
/// `wild_counter` numbers wildcard expansion sites; callers that need
/// cross-execution matching pass the same starting counter to both sides.
pub fn model_set(
    a: &Assertion,
    cfg: &Config,
    state: &State,
    env: &mut Env,
    wild_counter: &mut usize,
) -> Result<Vec<ModelElem>, EvalError> {
    let mut out = match a {
        Assertion::Bool(true) => alloc::vec![ModelElem::unit()],
        Assertion::Bool(false) => Vec::new(),
        Assertion::Extensional(set) => set.iter().cloned().map(ModelElem::from_state).collect(),
        Assertion::AccField { var, field, perm, value } => {
            let mut deps = BTreeSet::new();
            let recv = lookup_var(var, state, env, &mut deps)?;
            let amount = eval_perm_expr(perm, cfg, state, env, &mut deps)?;
            let zero_amount = matches!(amount, PermAmount::Exact(f) if f == frac_zero());
            if zero_amount {
                // No ownership conveyed: only the store dependencies remain.
                alloc::vec![ModelElem::from_state(deps_store(&deps, state))]
            } else if matches!(recv, EvalVal::Val(Value::Null)) {
                // Positive permission to a null location is unsatisfiable:
                // inhaling it is infeasible, exhaling it fails for lack of
                // a model.
                Vec::new()
            } else {
                let r = expect_ref(recv, var)?;
                let key = (r, field.clone());
                let values: Vec<Value> = match value {
                    Some(e) => {
                        let v = eval_expr(e, state, env, &mut deps)?;
                        match v {
                            EvalVal::Val(v) => alloc::vec![v],
                            EvalVal::Frc(_) => return err("field value cannot be a permission"),
                        }
                    }
                    None => cfg.all_values(),
                };
                let base = deps_store(&deps, state);
                let fracs: Vec<(Frac, Option<usize>)> = match amount {
                    PermAmount::Exact(f) => alloc::vec![(f, None)],
                    PermAmount::Wild => {
                        let idx = *wild_counter;
                        *wild_counter += 1;
                        cfg.fracs_nonzero().into_iter().map(|f| (f, Some(idx))).collect()
                    }
                };
                let mut elems = Vec::new();
                for (f, widx) in &fracs {
                    for v in &values {
                        let mut s = base.clone();
                        s.set_heap(key.clone(), *f, *v);
                        let mut wilds = BTreeMap::new();
                        if let Some(i) = widx {
                            wilds.insert(*i, *f);
                        }
                        elems.push(ModelElem { state: s, wilds });
                    }
                }
                elems
            }
        }
        Assertion::AccPred { pred, args, perm } => {
            let mut deps = BTreeSet::new();
            let mut vals = Vec::with_capacity(args.len());
            for arg in args {
                match eval_expr(arg, state, env, &mut deps)? {
                    EvalVal::Val(v) => vals.push(v),
                    EvalVal::Frc(_) => return err("permission-typed predicate argument value"),
                }
            }
            let amount = eval_perm_expr(perm, cfg, state, env, &mut deps)?;
            let base = deps_store(&deps, state);
            let key = (pred.clone(), vals);
            match amount {
                PermAmount::Exact(f) if f == frac_zero() => {
                    alloc::vec![ModelElem::from_state(base)]
                }
                PermAmount::Exact(f) => {
                    let mut s = base;
                    s.set_pred(key, f);
                    alloc::vec![ModelElem::from_state(s)]
                }
                PermAmount::Wild => {
                    let idx = *wild_counter;
                    *wild_counter += 1;
                    cfg.fracs_nonzero()
                        .into_iter()
                        .map(|f| {
                            let mut s = base.clone();
                            s.set_pred(key.clone(), f);
                            let mut wilds = BTreeMap::new();
                            wilds.insert(idx, f);
                            ModelElem { state: s, wilds }
                        })
                        .collect()
                }
            }
        }
        Assertion::Cond(e) if expr_reads_heap(e) => {
            let mut deps = BTreeSet::new();
            match eval_expr(e, state, env, &mut deps)? {
                EvalVal::Val(Value::Bool(true)) => {
                    alloc::vec![ModelElem::from_state(deps_store(&deps, state))]
                }
                EvalVal::Val(Value::Bool(false)) => Vec::new(),
                _ => return err("condition is not boolean"),
            }
        }
        Assertion::Cond(e) => {
            // Pure atom: enumerate satisfying stores over the free variables
            // not already bound. Candidates whose evaluation is a type error
            // are excluded rather than failing the whole model set, since
            // variables are untyped at this point.
            let mut fv = BTreeSet::new();
            expr_free_vars(e, &mut fv);
            let free: Vec<String> =
                fv.into_iter().filter(|x| !env.contains_key(x)).collect();
            let mut stores = alloc::vec![State::unit()];
            for x in &free {
                let mut next = Vec::new();
                for s in &stores {
                    for v in cfg.all_values() {
                        let mut s2 = s.clone();
                        s2.store.insert(x.clone(), v);
                        next.push(s2);
                    }
                }
                stores = next;
            }
            let mut elems = Vec::new();
            for s in stores {
                let mut deps = BTreeSet::new();
                match eval_expr(e, &s, env, &mut deps) {
                    Ok(EvalVal::Val(Value::Bool(true))) => {
                        elems.push(ModelElem::from_state(s));
                    }
                    _ => {}
                }
            }
            // An atom with no free variables that errors even so (e.g. an
            // unbound permission variable) is a genuine error.
            if free.is_empty() && elems.is_empty() {
                let mut deps = BTreeSet::new();
                match eval_expr(e, &State::unit(), env, &mut deps) {
                    Ok(EvalVal::Val(Value::Bool(false))) => {}
                    Ok(EvalVal::Val(Value::Bool(true))) => unreachable!(),
                    _ => return err("condition evaluation failed"),
                }
            }
            elems
        }
        Assertion::Star(x, y) => {
            let left = model_set(x, cfg, state, env, wild_counter)?;
            let right = model_set(y, cfg, state, env, wild_counter)?;
            let mut elems = Vec::new();
            for l in &left {
                for r in &right {
                    if let Some(s) = crate::sepalg::add(&l.state, &r.state) {
                        let mut wilds = l.wilds.clone();
                        wilds.extend(r.wilds.iter().map(|(k, v)| (*k, *v)));
                        elems.push(ModelElem { state: s, wilds });
                    }
                }
            }
            elems
        }
        Assertion::Exists(v, t, body) => {
            let shadowed = env.get(v).copied();
            let candidates: Vec<EnvVal> = match t {
                Type::Perm => cfg.fracs_nonzero().into_iter().map(EnvVal::Frc).collect(),
                _ => cfg.values_of(*t).into_iter().map(EnvVal::Val).collect(),
            };
            // Every instantiation expands the same wildcard sites; number
            // them identically across branches.
            let start = *wild_counter;
            let mut max_end = start;
            let mut elems = Vec::new();
            for c in candidates {
                env.insert(v.clone(), c);
                let mut ctr = start;
                let sub = model_set(body, cfg, state, env, &mut ctr);
                match shadowed {
                    Some(old) => {
                        env.insert(v.clone(), old);
                    }
                    None => {
                        env.remove(v);
                    }
                }
                elems.extend(sub?);
                max_end = max_end.max(ctr);
            }
            *wild_counter = max_end;
            elems
        }
    };
    out.sort();
    out.dedup();
    Ok(out)
}

/// Plain model set as a state set, discarding wildcard tags.
pub fn model_states(
    a: &Assertion,
    cfg: &Config,
    state: &State,
    env: &mut Env,
) -> Result<StateSet, EvalError> {
    let mut ctr = 0;
    Ok(model_set(a, cfg, state, env, &mut ctr)?
        .into_iter()
        .map(|m| m.state)
        .collect())
}

/// Intuitionistic satisfaction: some model is a substate of `phi`.
pub fn sat_intuitionistic(a: &Assertion, phi: &State, cfg: &Config) -> Result<bool, EvalError> {
    let models = model_states(a, cfg, phi, &mut Env::new())?;
    Ok(models.iter().any(|m| geq(phi, m)))
}

/// Evaluate a condition-only assertion (booleans, conditions, and their
/// conjunctions) as a single boolean, for `assume`.
pub fn eval_assertion_bool(a: &Assertion, phi: &State, env: &Env) -> Result<bool, EvalError> {
    match a {
        Assertion::Bool(b) => Ok(*b),
        Assertion::Cond(e) => {
            let mut deps = BTreeSet::new();
            match eval_expr(e, phi, env, &mut deps)? {
                EvalVal::Val(Value::Bool(b)) => Ok(b),
                _ => err("condition is not boolean"),
            }
        }
        Assertion::Star(x, y) => {
            Ok(eval_assertion_bool(x, phi, env)? && eval_assertion_bool(y, phi, env)?)
        }
        _ => err("resource assertion used as a condition"),
    }
}

/// Scale a state's resources by a fraction, keeping the store. None if any
/// scaled amount falls off the permission grid.
pub fn scale_state(s: &State, p: Frac, cfg: &Config) -> Option<State> {
    let mut out = s.core();
    for (key, (q, v)) in &s.heap {
        let scaled = *q * p;
        if scaled > frac_zero() && !cfg.on_grid(scaled) {
            return None;
        }
        out.set_heap(key.clone(), scaled, *v);
    }
    for (key, q) in &s.preds {
        let scaled = *q * p;
        if scaled > frac_zero() && !cfg.on_grid(scaled) {
            return None;
        }
        out.set_pred(key.clone(), scaled);
    }
    Some(out)
}

// ---- variable renaming ----

fn rename(x: &str, map: &BTreeMap<String, String>) -> String {
    map.get(x).cloned().unwrap_or_else(|| x.to_string())
}

pub fn rename_expr(e: &Expr, map: &BTreeMap<String, String>) -> Expr {
    match e {
        Expr::Var(x) => Expr::Var(rename(x, map)),
        Expr::Field(x, f) => Expr::Field(rename(x, map), f.clone()),
        Expr::Perm(loc) => Expr::Perm(rename_perm_loc(loc, map)),
        Expr::Unary(op, a) => Expr::Unary(*op, Box::new(rename_expr(a, map))),
        Expr::Binary(op, a, b) => {
            Expr::Binary(*op, Box::new(rename_expr(a, map)), Box::new(rename_expr(b, map)))
        }
        _ => e.clone(),
    }
}

fn rename_perm_loc(loc: &PermLoc, map: &BTreeMap<String, String>) -> PermLoc {
    match loc {
        PermLoc::Field(x, f) => PermLoc::Field(rename(x, map), f.clone()),
        PermLoc::Pred(p, args) => {
            PermLoc::Pred(p.clone(), args.iter().map(|a| rename_expr(a, map)).collect())
        }
    }
}

pub fn rename_perm_expr(p: &PermExpr, map: &BTreeMap<String, String>) -> PermExpr {
    match p {
        PermExpr::Perm(loc) => PermExpr::Perm(rename_perm_loc(loc, map)),
        PermExpr::Var(x) => PermExpr::Var(rename(x, map)),
        _ => p.clone(),
    }
}

/// Capture-avoiding substitution of variable names. An `exists` binder
/// shadows any mapping of the same name.
pub fn rename_assertion(a: &Assertion, map: &BTreeMap<String, String>) -> Assertion {
    match a {
        Assertion::Bool(_) => a.clone(),
        Assertion::Extensional(set) => Assertion::Extensional(
            set.iter()
                .map(|s| {
                    let mut s2 = s.clone();
                    s2.store =
                        s.store.iter().map(|(x, v)| (rename(x, map), *v)).collect();
                    s2
                })
                .collect(),
        ),
        Assertion::AccField { var, field, perm, value } => Assertion::AccField {
            var: rename(var, map),
            field: field.clone(),
            perm: rename_perm_expr(perm, map),
            value: value.as_ref().map(|e| rename_expr(e, map)),
        },
        Assertion::AccPred { pred, args, perm } => Assertion::AccPred {
            pred: pred.clone(),
            args: args.iter().map(|e| rename_expr(e, map)).collect(),
            perm: rename_perm_expr(perm, map),
        },
        Assertion::Cond(e) => Assertion::Cond(rename_expr(e, map)),
        Assertion::Star(x, y) => {
            Assertion::star(rename_assertion(x, map), rename_assertion(y, map))
        }
        Assertion::Exists(v, t, body) => {
            if map.contains_key(v) {
                let mut inner = map.clone();
                inner.remove(v);
                Assertion::Exists(v.clone(), *t, Box::new(rename_assertion(body, &inner)))
            } else {
                Assertion::Exists(v.clone(), *t, Box::new(rename_assertion(body, map)))
            }
        }
    }
}

pub fn rename_stmt(s: &Stmt, map: &BTreeMap<String, String>) -> Stmt {
    match s {
        Stmt::Seq(ss) => Stmt::Seq(ss.iter().map(|s| rename_stmt(s, map)).collect()),
        Stmt::Skip => Stmt::Skip,
        Stmt::Assume(a) => Stmt::Assume(rename_assertion(a, map)),
        Stmt::Assert(a) => Stmt::Assert(rename_assertion(a, map)),
        Stmt::Inhale(a) => Stmt::Inhale(rename_assertion(a, map)),
        Stmt::Exhale(a) => Stmt::Exhale(rename_assertion(a, map)),
        Stmt::VarDecl(ds) => {
            Stmt::VarDecl(ds.iter().map(|(x, t)| (rename(x, map), *t)).collect())
        }
        Stmt::Havoc(xs) => Stmt::Havoc(xs.iter().map(|x| rename(x, map)).collect()),
        Stmt::Assign(x, e) => Stmt::Assign(rename(x, map), rename_expr(e, map)),
        Stmt::FieldWrite(x, f, e) => {
            Stmt::FieldWrite(rename(x, map), f.clone(), rename_expr(e, map))
        }
        Stmt::Call { rets, method, args } => Stmt::Call {
            rets: rets.iter().map(|x| rename(x, map)).collect(),
            method: method.clone(),
            args: args.iter().map(|x| rename(x, map)).collect(),
        },
        Stmt::If { cond, then_s, else_s } => Stmt::If {
            cond: rename_expr(cond, map),
            then_s: Box::new(rename_stmt(then_s, map)),
            else_s: Box::new(rename_stmt(else_s, map)),
        },
        Stmt::Choice(a, b) => {
            Stmt::Choice(Box::new(rename_stmt(a, map)), Box::new(rename_stmt(b, map)))
        }
        Stmt::While { id, cond, body } => Stmt::While {
            id: *id,
            cond: rename_expr(cond, map),
            body: Box::new(rename_stmt(body, map)),
        },
        Stmt::Fold { pred, args, perm } => Stmt::Fold {
            pred: pred.clone(),
            args: args.iter().map(|e| rename_expr(e, map)).collect(),
            perm: rename_perm_expr(perm, map),
        },
        Stmt::Unfold { pred, args, perm } => Stmt::Unfold {
            pred: pred.clone(),
            args: args.iter().map(|e| rename_expr(e, map)).collect(),
            perm: rename_perm_expr(perm, map),
        },
    }
}

/// Inhale successor states: lifted addition of the current state with the
/// assertion's models.
pub fn inhale_states(
    a: &Assertion,
    phi: &State,
    cfg: &Config,
) -> Result<StateSet, EvalError> {
    let models = model_states(a, cfg, phi, &mut Env::new())?;
    let singleton: StateSet = [phi.clone()].into();
    Ok(lifted_add(&singleton, &models))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse::parse_assertion_str;
    use crate::sepalg::frac;

    fn cfg() -> Config {
        Config { int_min: 0, int_max: 1, refs: 1, gran: 2, determinize: true }
    }

    fn models(src: &str, state: &State) -> Vec<ModelElem> {
        let a = parse_assertion_str(src).expect("parse");
        let mut env = Env::new();
        let mut ctr = 0;
        model_set(&a, &cfg(), state, &mut env, &mut ctr).expect("model set")
    }

    #[test]
    fn acc_field_models_enumerate_values() {
        let mut phi = State::unit();
        phi.store.insert("x".into(), Value::Ref(0));
        let ms = models("acc(x.f, 1/2)", &phi);
        // One element per universe value: ints 0..1, bools, null, r0.
        assert_eq!(ms.len(), 6);
        for m in &ms {
            assert_eq!(m.state.store.get("x"), Some(&Value::Ref(0)));
            assert_eq!(m.state.heap_perm(&(0, "f".into())), frac(1, 2));
        }
    }

    #[test]
    fn acc_field_value_constraint_pins_value() {
        let mut phi = State::unit();
        phi.store.insert("x".into(), Value::Ref(0));
        let ms = models("acc(x.f, 1/1) == 1", &phi);
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0].state.heap.get(&(0, "f".into())), Some(&(frac(1, 1), Value::Int(1))));
    }

    #[test]
    fn pure_condition_enumerates_free_vars() {
        let ms = models("y == 1", &State::unit());
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0].state.store.get("y"), Some(&Value::Int(1)));
        // Contradiction has the empty model set.
        assert!(models("false", &State::unit()).is_empty());
    }

    #[test]
    fn wildcard_expands_with_tags() {
        let mut phi = State::unit();
        phi.store.insert("x".into(), Value::Ref(0));
        let ms = models("acc(P(x), wildcard)", &phi);
        assert_eq!(ms.len(), 2); // 1/2 and 2/2
        for m in &ms {
            assert_eq!(m.wilds.len(), 1);
            let key = ("P".into(), alloc::vec![Value::Ref(0)]);
            assert_eq!(m.wilds[&0], m.state.pred_perm(&key));
        }
    }

    #[test]
    fn exists_unions_instantiations() {
        let mut phi = State::unit();
        phi.store.insert("x".into(), Value::Ref(0));
        let ms = models("exists v: Int :: acc(x.f, 1/1) == v", &phi);
        assert_eq!(ms.len(), 2); // v in {0, 1}
    }

    #[test]
    fn heap_reading_condition_is_two_staged() {
        let mut phi = State::unit();
        phi.store.insert("x".into(), Value::Ref(0));
        phi.set_heap((0, "f".into()), frac(1, 2), Value::Int(1));
        let ms = models("x.f == 1", &phi);
        assert_eq!(ms.len(), 1);
        // Footprint is just the store read; the heap read leaves no cell.
        assert!(ms[0].state.heap.is_empty());
        assert!(models("x.f == 0", &phi).is_empty());
        // Without permission the read errors.
        let a = parse_assertion_str("x.f == 1").unwrap();
        let mut bare = State::unit();
        bare.store.insert("x".into(), Value::Ref(0));
        assert!(model_set(&a, &cfg(), &bare, &mut Env::new(), &mut 0).is_err());
    }

    #[test]
    fn star_adds_disjointly() {
        let mut phi = State::unit();
        phi.store.insert("x".into(), Value::Ref(0));
        let ms = models("acc(x.f, 1/2) == 0 * acc(x.f, 1/2) == 0", &phi);
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0].state.heap_perm(&(0, "f".into())), frac(1, 1));
        // Incompatible values cannot combine.
        assert!(models("acc(x.f, 1/2) == 0 * acc(x.f, 1/2) == 1", &phi).is_empty());
    }

    #[test]
    fn sat_is_intuitionistic() {
        let mut phi = State::unit();
        phi.store.insert("x".into(), Value::Ref(0));
        phi.set_heap((0, "f".into()), frac(1, 1), Value::Int(1));
        let a = parse_assertion_str("acc(x.f, 1/2)").unwrap();
        assert_eq!(sat_intuitionistic(&a, &phi, &cfg()), Ok(true));
        let b = parse_assertion_str("acc(x.f, 1/2) == 0").unwrap();
        assert_eq!(sat_intuitionistic(&b, &phi, &cfg()), Ok(false));
    }

    #[test]
    fn scaling_drops_off_grid() {
        let mut s = State::unit();
        s.set_heap((0, "f".into()), frac(1, 2), Value::Int(0));
        let cfg = cfg();
        assert!(scale_state(&s, frac(1, 1), &cfg).is_some());
        // 1/2 * 1/2 = 1/4 is off the G=2 grid.
        assert_eq!(scale_state(&s, frac(1, 2), &cfg), None);
        let zero = scale_state(&s, frac(0, 1), &cfg).unwrap();
        assert!(zero.heap.is_empty());
    }
}
