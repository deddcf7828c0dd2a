//! Program-to-program transformations: bounded inlining, annotation
//! assertion insertion, guarded execution (for the structural checkers),
//! and the bounded-semantics / site-indexing instrumentation.
//!
//! All generated names use the reserved `$` separator, which the parser
//! accepts but well-formedness rejects in user sources, so transformed
//! programs can never clash with user identifiers.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::lang::assertion::{rename_assertion, rename_stmt};
use crate::lang::ast::*;
use crate::config::Type;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SiteKind {
    Call { method: String },
    LoopIter { loop_id: usize },
}

/// One residual program point of an inlined statement: the fresh-name unit
/// that identifies it, and the chain of sites it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SiteInfo {
    pub unit: usize,
    pub path: String,
    pub kind: SiteKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InlinedUnit {
    pub stmt: Stmt,
    pub sites: Vec<SiteInfo>,
}

/// Copy-in/copy-out expansion of one call, with the body renamed into a
/// fresh unit but not yet recursively inlined.
#[derive(Clone, Debug)]
pub struct CallExpansion {
    pub prologue: Stmt,
    pub body: Stmt,
    pub epilogue: Stmt,
    pub unit: usize,
    /// Renaming applied to the callee's variables.
    pub map: BTreeMap<String, String>,
}

fn unit_name(x: &str, unit: usize) -> String {
    format!("{x}${unit}")
}

/// All variables scoped to a method body: parameters, returns, and locals.
fn callee_vars(m: &MethodDecl) -> Vec<(String, Type)> {
    let mut vars: Vec<(String, Type)> = m.params.iter().chain(&m.returns).cloned().collect();
    if let Some(b) = &m.body {
        let mut tys = BTreeMap::new();
        declared_types(b, &mut tys);
        for (x, t) in tys {
            if !vars.iter().any(|(v, _)| *v == x) {
                vars.push((x, t));
            }
        }
    }
    vars
}

/// Expand a call to a bodied method into prologue / renamed body / epilogue.
pub fn expand_call(
    program: &Program,
    method: &str,
    rets: &[String],
    args: &[String],
    counter: &mut usize,
) -> Result<CallExpansion, String> {
    let m = program
        .method(method)
        .ok_or_else(|| format!("unknown method '{method}'"))?;
    let body = m
        .body
        .as_ref()
        .ok_or_else(|| format!("method '{method}' has no body to inline"))?;
    if m.params.len() != args.len() || m.returns.len() != rets.len() {
        return Err(format!("arity mismatch calling '{method}'"));
    }
    let unit = *counter;
    *counter += 1;
    let mut map = BTreeMap::new();
    for (x, _) in callee_vars(m) {
        map.insert(x.clone(), unit_name(&x, unit));
    }
    let mut prologue = Vec::new();
    for ((p, t), a) in m.params.iter().zip(args) {
        prologue.push(Stmt::VarDecl(alloc::vec![(map[p].clone(), *t)]));
        prologue.push(Stmt::Assign(map[p].clone(), Expr::Var(a.clone())));
    }
    for (r, t) in &m.returns {
        prologue.push(Stmt::VarDecl(alloc::vec![(map[r].clone(), *t)]));
    }
    let mut epilogue = Vec::new();
    for ((r, _), target) in m.returns.iter().zip(rets) {
        epilogue.push(Stmt::Assign(target.clone(), Expr::Var(map[r].clone())));
    }
    Ok(CallExpansion {
        prologue: Stmt::Seq(prologue),
        body: rename_stmt(body, &map),
        epilogue: Stmt::Seq(epilogue),
        unit,
        map,
    })
}

/// Rename the variables declared inside `s` (not its free variables) into a
/// fresh unit, for per-iteration loop unrolling.
pub(crate) fn rename_locals(s: &Stmt, unit: usize) -> Stmt {
    let mut tys = BTreeMap::new();
    declared_types(s, &mut tys);
    let map: BTreeMap<String, String> =
        tys.keys().map(|x| (x.clone(), unit_name(x, unit))).collect();
    rename_stmt(s, &map)
}

struct Inliner<'a> {
    program: &'a Program,
    counter: usize,
    sites: Vec<SiteInfo>,
}

impl Inliner<'_> {
    fn inline_stmt(&mut self, s: &Stmt, n: usize, path: &str) -> Result<Stmt, String> {
        match s {
            Stmt::Seq(ss) => {
                let mut out = Vec::with_capacity(ss.len());
                for (i, s) in ss.iter().enumerate() {
                    out.push(self.inline_stmt(s, n, &format!("{path}.{i}"))?);
                }
                Ok(Stmt::Seq(out))
            }
            Stmt::Call { rets, method, args } => {
                let m = self
                    .program
                    .method(method)
                    .ok_or_else(|| format!("unknown method '{method}'"))?;
                if m.is_library() {
                    return Ok(s.clone());
                }
                if n == 0 {
                    // Bound exhausted: the call site is cut off.
                    return Ok(Stmt::Assume(Assertion::Bool(false)));
                }
                let exp = expand_call(self.program, method, rets, args, &mut self.counter)?;
                let sub_path = format!("{path}/call {method}#{}", exp.unit);
                self.sites.push(SiteInfo {
                    unit: exp.unit,
                    path: sub_path.clone(),
                    kind: SiteKind::Call { method: method.clone() },
                });
                let body = self.inline_stmt(&exp.body, n - 1, &sub_path)?;
                Ok(Stmt::Seq(alloc::vec![exp.prologue, body, exp.epilogue]))
            }
            Stmt::While { id, cond, body } => {
                if n == 0 {
                    return Ok(Stmt::Assume(Assertion::Cond(Expr::Unary(
                        UnOp::Not,
                        Box::new(cond.clone()),
                    ))));
                }
                let unit = self.counter;
                self.counter += 1;
                let sub_path = format!("{path}/loop {id}#{unit}");
                self.sites.push(SiteInfo {
                    unit,
                    path: sub_path.clone(),
                    kind: SiteKind::LoopIter { loop_id: *id },
                });
                let iter_body = rename_locals(body, unit);
                let once = self.inline_stmt(&iter_body, n - 1, &sub_path)?;
                let rest = self.inline_stmt(s, n - 1, path)?;
                Ok(Stmt::If {
                    cond: cond.clone(),
                    then_s: Box::new(Stmt::Seq(alloc::vec![once, rest])),
                    else_s: Box::new(Stmt::Skip),
                })
            }
            Stmt::If { cond, then_s, else_s } => Ok(Stmt::If {
                cond: cond.clone(),
                then_s: Box::new(self.inline_stmt(then_s, n, &format!("{path}/then"))?),
                else_s: Box::new(self.inline_stmt(else_s, n, &format!("{path}/else"))?),
            }),
            Stmt::Choice(a, b) => Ok(Stmt::Choice(
                Box::new(self.inline_stmt(a, n, &format!("{path}/left"))?),
                Box::new(self.inline_stmt(b, n, &format!("{path}/right"))?),
            )),
            _ => Ok(s.clone()),
        }
    }
}

/// Inline the program's initial statement to the given bound. Calls to
/// bodied methods become renamed copies (bound-0 calls become
/// `assume false`), loops unroll into conditionals (bound-0 loops become
/// `assume !b`), and library calls stay modular.
pub fn inline_program(p: &Program, n: usize) -> Result<InlinedUnit, String> {
    inline_stmt_of(p, &p.init, n)
}

/// Inline an arbitrary statement of the program, for the PC recursion.
pub fn inline_stmt_of(p: &Program, s: &Stmt, n: usize) -> Result<InlinedUnit, String> {
    inline_stmt_from(p, s, n, &mut 0, "init")
}

/// Like `inline_stmt_of`, but drawing fresh-name units from a caller-owned
/// counter so that several inlining steps of one analysis never collide.
pub fn inline_stmt_from(
    p: &Program,
    s: &Stmt,
    n: usize,
    counter: &mut usize,
    path: &str,
) -> Result<InlinedUnit, String> {
    let mut inl = Inliner { program: p, counter: *counter, sites: Vec::new() };
    let stmt = inl.inline_stmt(s, n, path)?;
    *counter = inl.counter;
    Ok(InlinedUnit { stmt, sites: inl.sites })
}

// ---- assertAnnot ----

fn with_true(a: &Assertion) -> Assertion {
    Assertion::star(a.clone(), Assertion::tt())
}

fn assert_annot_stmt(s: &Stmt, p: &Program, ann: &Annotation) -> Stmt {
    match s {
        Stmt::Seq(ss) => Stmt::Seq(ss.iter().map(|s| assert_annot_stmt(s, p, ann)).collect()),
        Stmt::Call { rets, method, args } => {
            let Some(m) = p.method(method) else { return s.clone() };
            if m.is_library() {
                return s.clone();
            }
            let (pre, post) = ann.method_spec(method);
            let mut map = BTreeMap::new();
            for ((f, _), a) in m.params.iter().zip(args) {
                map.insert(f.clone(), a.clone());
            }
            for ((f, _), r) in m.returns.iter().zip(rets) {
                map.insert(f.clone(), r.clone());
            }
            Stmt::Seq(alloc::vec![
                Stmt::Assert(with_true(&rename_assertion(&pre, &map))),
                s.clone(),
                Stmt::Assert(with_true(&rename_assertion(&post, &map))),
            ])
        }
        Stmt::While { id, cond, body } => {
            let inv = ann.loop_inv(*id);
            let body = Stmt::Seq(alloc::vec![
                Stmt::Assert(with_true(&inv)),
                assert_annot_stmt(body, p, ann),
                Stmt::Assert(with_true(&inv)),
            ]);
            Stmt::Seq(alloc::vec![
                Stmt::Assert(with_true(&inv)),
                Stmt::While { id: *id, cond: cond.clone(), body: Box::new(body) },
                Stmt::Assert(with_true(&inv)),
            ])
        }
        Stmt::If { cond, then_s, else_s } => Stmt::If {
            cond: cond.clone(),
            then_s: Box::new(assert_annot_stmt(then_s, p, ann)),
            else_s: Box::new(assert_annot_stmt(else_s, p, ann)),
        },
        Stmt::Choice(a, b) => Stmt::Choice(
            Box::new(assert_annot_stmt(a, p, ann)),
            Box::new(assert_annot_stmt(b, p, ann)),
        ),
        _ => s.clone(),
    }
}

/// Insert the annotation's assertions into the program: each call to a
/// bodied method asserts the (renamed) pre- and postcondition around it,
/// each bodied method asserts its contract at entry and exit, and each loop
/// asserts its invariant before entry and at every iteration end.
/// Unannotated sites get `assert true`, keeping the shape uniform.
pub fn assert_annot(p: &Program, ann: &Annotation) -> Program {
    let mut out = p.clone();
    for m in &mut out.methods {
        let Some(body) = &m.body else { continue };
        let (pre, post) = ann.method_spec(&m.name);
        let transformed = assert_annot_stmt(body, p, ann);
        m.body = Some(Stmt::Seq(alloc::vec![
            Stmt::Assert(with_true(&pre)),
            transformed,
            Stmt::Assert(with_true(&post)),
        ]));
    }
    out.init = assert_annot_stmt(&p.init, p, ann);
    out
}

// ---- guardExecs ----

/// Render a condition-only assertion as a boolean expression.
fn assertion_as_expr(a: &Assertion) -> Result<Expr, String> {
    match a {
        Assertion::Bool(b) => Ok(Expr::BoolLit(*b)),
        Assertion::Cond(e) => Ok(e.clone()),
        Assertion::Star(x, y) => Ok(Expr::Binary(
            BinOp::And,
            Box::new(assertion_as_expr(x)?),
            Box::new(assertion_as_expr(y)?),
        )),
        _ => Err("resource assertion used as a condition".to_string()),
    }
}

/// A boolean expression equivalent to "this assertion can be exhaled here".
/// Conjunctions are approximated conjunct-wise, which is exact when the
/// conjuncts cover disjoint locations; fragments fed to the structural
/// checkers respect that.
fn exhale_feasible_expr(a: &Assertion) -> Result<Expr, String> {
    match a {
        Assertion::Bool(b) => Ok(Expr::BoolLit(*b)),
        Assertion::Cond(e) => Ok(e.clone()),
        Assertion::AccField { var, field, perm, value } => {
            let loc = PermLoc::Field(var.clone(), field.clone());
            let perm_e: Expr = match perm {
                PermExpr::Lit(n, d) => Expr::FracLit(*n, *d),
                PermExpr::Perm(l) => Expr::Perm(l.clone()),
                PermExpr::Wildcard => {
                    // Any nonzero amount: feasible iff some permission held.
                    let have = Expr::Perm(loc);
                    return Ok(Expr::Binary(
                        BinOp::Gt,
                        Box::new(have),
                        Box::new(Expr::FracLit(0, 1)),
                    ));
                }
                PermExpr::Var(_) => return Err("unbound permission variable".to_string()),
            };
            let mut cond = Expr::Binary(
                BinOp::Ge,
                Box::new(Expr::Perm(loc)),
                Box::new(perm_e.clone()),
            );
            if let Some(v) = value {
                // Guard the heap read behind a positive-permission check.
                let read_ok = Expr::Binary(
                    BinOp::Eq,
                    Box::new(Expr::Field(var.clone(), field.clone())),
                    Box::new(v.clone()),
                );
                let positive = Expr::Binary(
                    BinOp::Gt,
                    Box::new(perm_e),
                    Box::new(Expr::FracLit(0, 1)),
                );
                let value_ok = Expr::Binary(
                    BinOp::Or,
                    Box::new(Expr::Unary(UnOp::Not, Box::new(positive))),
                    Box::new(read_ok),
                );
                cond = Expr::Binary(BinOp::And, Box::new(cond), Box::new(value_ok));
            }
            // A null receiver holds nothing; perm(null.f) = 0 keeps the
            // comparison total, so no extra null check is needed.
            Ok(cond)
        }
        Assertion::AccPred { pred, args, perm } => {
            let loc = PermLoc::Pred(pred.clone(), args.clone());
            let perm_e = match perm {
                PermExpr::Lit(n, d) => Expr::FracLit(*n, *d),
                PermExpr::Perm(l) => Expr::Perm(l.clone()),
                PermExpr::Wildcard => {
                    return Ok(Expr::Binary(
                        BinOp::Gt,
                        Box::new(Expr::Perm(loc)),
                        Box::new(Expr::FracLit(0, 1)),
                    ))
                }
                PermExpr::Var(_) => return Err("unbound permission variable".to_string()),
            };
            Ok(Expr::Binary(BinOp::Ge, Box::new(Expr::Perm(loc)), Box::new(perm_e)))
        }
        Assertion::Star(x, y) => Ok(Expr::Binary(
            BinOp::And,
            Box::new(exhale_feasible_expr(x)?),
            Box::new(exhale_feasible_expr(y)?),
        )),
        _ => Err("unsupported assertion in guarded exhale".to_string()),
    }
}

fn guarded(flag: &str, s: Stmt) -> Stmt {
    Stmt::If {
        cond: Expr::Var(flag.to_string()),
        then_s: Box::new(s),
        else_s: Box::new(Stmt::Skip),
    }
}

/// Guarded-execution transformation: turn a call-free loop-free statement into one
/// that never fails, tracking feasibility of the original execution in the
/// boolean `flag` variable (which the caller declares and initializes to
/// true). Assumes fold into the flag; asserts become assumptions guarded by
/// it; exhale falsifies the flag when it would fail, removing resources
/// only when it would succeed.
pub fn guard_execs(s: &Stmt, flag: &str) -> Result<Stmt, String> {
    Ok(match s {
        Stmt::Seq(ss) => Stmt::Seq(
            ss.iter().map(|s| guard_execs(s, flag)).collect::<Result<Vec<_>, _>>()?,
        ),
        Stmt::Skip | Stmt::VarDecl(_) | Stmt::Havoc(_) => s.clone(),
        Stmt::Assume(a) => {
            let e = assertion_as_expr(a)?;
            Stmt::Assign(
                flag.to_string(),
                Expr::Binary(BinOp::And, Box::new(Expr::Var(flag.to_string())), Box::new(e)),
            )
        }
        Stmt::Assert(a) => guarded(flag, Stmt::Assume(a.clone())),
        Stmt::Inhale(a) => guarded(flag, Stmt::Inhale(a.clone())),
        Stmt::Exhale(a) => {
            let feasible = exhale_feasible_expr(a)?;
            let inner = Stmt::If {
                cond: feasible,
                then_s: Box::new(Stmt::Exhale(a.clone())),
                else_s: Box::new(Stmt::Assign(flag.to_string(), Expr::BoolLit(false))),
            };
            guarded(flag, inner)
        }
        Stmt::Assign(..) | Stmt::FieldWrite(..) | Stmt::Fold { .. } | Stmt::Unfold { .. } => {
            guarded(flag, s.clone())
        }
        Stmt::If { cond, then_s, else_s } => Stmt::If {
            cond: cond.clone(),
            then_s: Box::new(guard_execs(then_s, flag)?),
            else_s: Box::new(guard_execs(else_s, flag)?),
        },
        Stmt::Choice(a, b) => Stmt::Choice(
            Box::new(guard_execs(a, flag)?),
            Box::new(guard_execs(b, flag)?),
        ),
        Stmt::Call { .. } | Stmt::While { .. } => {
            return Err("guarded execution applies to call-free loop-free fragments".into())
        }
    })
}

// ---- boundedize ----

const DEPTH_PARAM: &str = "depth$";

struct Boundedizer {
    bound: i64,
    counter: usize,
}

impl Boundedizer {
    /// `depth_src`: expression for the depth to pass at call sites
    /// (the literal bound at top level, depth$ - 1 inside method bodies).
    fn stmt(&mut self, s: &Stmt, depth_src: &Expr) -> Stmt {
        match s {
            Stmt::Seq(ss) => Stmt::Seq(ss.iter().map(|s| self.stmt(s, depth_src)).collect()),
            Stmt::While { id, cond, body } => {
                let dep = format!("dep${id}");
                let body = Stmt::Seq(alloc::vec![
                    self.stmt(body, depth_src),
                    Stmt::Assign(
                        dep.clone(),
                        Expr::Binary(
                            BinOp::Sub,
                            Box::new(Expr::Var(dep.clone())),
                            Box::new(Expr::IntLit(1)),
                        ),
                    ),
                ]);
                let guard = Expr::Binary(
                    BinOp::And,
                    Box::new(cond.clone()),
                    Box::new(Expr::Binary(
                        BinOp::Gt,
                        Box::new(Expr::Var(dep.clone())),
                        Box::new(Expr::IntLit(0)),
                    )),
                );
                Stmt::Seq(alloc::vec![
                    Stmt::VarDecl(alloc::vec![(dep.clone(), Type::Int)]),
                    Stmt::Assign(dep, Expr::IntLit(self.bound)),
                    Stmt::While { id: *id, cond: guard, body: Box::new(body) },
                    Stmt::Assume(Assertion::Cond(Expr::Unary(
                        UnOp::Not,
                        Box::new(cond.clone()),
                    ))),
                ])
            }
            Stmt::Call { rets, method, args } => {
                // The ghost depth argument must be a variable, so thread it
                // through a fresh temporary.
                let tmp = format!("d${}", self.counter);
                self.counter += 1;
                let mut args = args.clone();
                args.push(tmp.clone());
                Stmt::Seq(alloc::vec![
                    Stmt::VarDecl(alloc::vec![(tmp.clone(), Type::Int)]),
                    Stmt::Assign(tmp, depth_src.clone()),
                    Stmt::Call { rets: rets.clone(), method: method.clone(), args },
                ])
            }
            Stmt::If { cond, then_s, else_s } => Stmt::If {
                cond: cond.clone(),
                then_s: Box::new(self.stmt(then_s, depth_src)),
                else_s: Box::new(self.stmt(else_s, depth_src)),
            },
            Stmt::Choice(a, b) => Stmt::Choice(
                Box::new(self.stmt(a, depth_src)),
                Box::new(self.stmt(b, depth_src)),
            ),
            _ => s.clone(),
        }
    }

    fn call_transform_needed(p: &Program) -> bool {
        fn has_call(s: &Stmt) -> bool {
            match s {
                Stmt::Seq(ss) => ss.iter().any(has_call),
                Stmt::Call { .. } => true,
                Stmt::If { then_s, else_s, .. } => has_call(then_s) || has_call(else_s),
                Stmt::Choice(a, b) => has_call(a) || has_call(b),
                Stmt::While { body, .. } => has_call(body),
                _ => false,
            }
        }
        p.methods
            .iter()
            .filter_map(|m| m.body.as_ref())
            .chain(core::iter::once(&p.init))
            .any(has_call)
    }
}

/// Bounded-semantics instrumentation: every loop gets a ghost
/// countdown initialized to `bound` and conjoined into its guard (with the
/// original exit condition assumed afterwards), and, if the program calls
/// bodied methods, every bodied method gains a ghost depth parameter that
/// shrinks across calls and cuts the body off at zero.
pub fn boundedize(p: &Program, bound: i64) -> Program {
    let mut out = p.clone();
    let mut b = Boundedizer { bound, counter: 0 };
    let thread_calls =
        Boundedizer::call_transform_needed(p) && p.methods.iter().any(|m| !m.is_library());
    let depth_var = Expr::Var(DEPTH_PARAM.to_string());
    let callee_src = Expr::Binary(
        BinOp::Sub,
        Box::new(depth_var.clone()),
        Box::new(Expr::IntLit(1)),
    );
    for m in &mut out.methods {
        let Some(body) = m.body.clone() else { continue };
        if thread_calls {
            m.params.push((DEPTH_PARAM.to_string(), Type::Int));
            let transformed = b.stmt(&body, &callee_src);
            m.body = Some(Stmt::If {
                cond: Expr::Binary(
                    BinOp::Gt,
                    Box::new(depth_var.clone()),
                    Box::new(Expr::IntLit(0)),
                ),
                then_s: Box::new(transformed),
                else_s: Box::new(Stmt::Assume(Assertion::Bool(false))),
            });
        } else {
            m.body = Some(b.stmt(&body, &depth_var));
        }
    }
    out.init = b.stmt(&p.init, &Expr::IntLit(bound));
    out
}

// ---- indexSites ----

#[derive(Clone, Debug)]
pub struct IndexedProgram {
    pub program: Program,
    /// Call-site index -> called method name.
    pub call_sites: Vec<(i64, String)>,
}

const SITE_PARAM: &str = "site$";

struct SiteIndexer {
    next_site: i64,
    counter: usize,
    call_sites: Vec<(i64, String)>,
    bodied: Vec<String>,
}

impl SiteIndexer {
    fn stmt(&mut self, s: &Stmt) -> Stmt {
        match s {
            Stmt::Seq(ss) => Stmt::Seq(ss.iter().map(|s| self.stmt(s)).collect()),
            Stmt::Call { rets, method, args } if self.bodied.contains(method) => {
                let idx = self.next_site;
                self.next_site += 1;
                self.call_sites.push((idx, method.clone()));
                let tmp = format!("idx${}", self.counter);
                self.counter += 1;
                let mut args = args.clone();
                args.push(tmp.clone());
                Stmt::Seq(alloc::vec![
                    Stmt::VarDecl(alloc::vec![(tmp.clone(), Type::Int)]),
                    Stmt::Assign(tmp, Expr::IntLit(idx)),
                    Stmt::Call { rets: rets.clone(), method: method.clone(), args },
                ])
            }
            Stmt::While { id, cond, body } => {
                let it = format!("it${id}");
                let body = Stmt::Seq(alloc::vec![
                    self.stmt(body),
                    Stmt::Assign(
                        it.clone(),
                        Expr::Binary(
                            BinOp::Add,
                            Box::new(Expr::Var(it.clone())),
                            Box::new(Expr::IntLit(1)),
                        ),
                    ),
                ]);
                Stmt::Seq(alloc::vec![
                    Stmt::VarDecl(alloc::vec![(it.clone(), Type::Int)]),
                    Stmt::Assign(it, Expr::IntLit(0)),
                    Stmt::While { id: *id, cond: cond.clone(), body: Box::new(body) },
                ])
            }
            Stmt::If { cond, then_s, else_s } => Stmt::If {
                cond: cond.clone(),
                then_s: Box::new(self.stmt(then_s)),
                else_s: Box::new(self.stmt(else_s)),
            },
            Stmt::Choice(a, b) => {
                Stmt::Choice(Box::new(self.stmt(a)), Box::new(self.stmt(b)))
            }
            _ => s.clone(),
        }
    }
}

/// Call-site and loop-iteration indexing: each call to a bodied
/// method passes a distinct ghost index, and each loop counts its
/// iterations in a ghost variable, so inlined occurrences are
/// distinguishable when computing per-site maximal annotations.
pub fn index_sites(p: &Program) -> IndexedProgram {
    let bodied: Vec<String> = p
        .methods
        .iter()
        .filter(|m| !m.is_library())
        .map(|m| m.name.clone())
        .collect();
    let mut ix = SiteIndexer {
        next_site: 0,
        counter: 0,
        call_sites: Vec::new(),
        bodied: bodied.clone(),
    };
    let mut out = p.clone();
    let any_bodied_called = !bodied.is_empty();
    for m in &mut out.methods {
        let Some(body) = m.body.clone() else { continue };
        m.body = Some(ix.stmt(&body));
        if any_bodied_called {
            m.params.push((SITE_PARAM.to_string(), Type::Int));
        }
    }
    out.init = ix.stmt(&p.init);
    IndexedProgram { program: out, call_sites: ix.call_sites }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::lang::{parse, pretty_program};
    use crate::semantics::{exec, verify_program, ExecCtx};
    use crate::sepalg::State;

    fn cfg() -> Config {
        Config { int_min: 0, int_max: 2, refs: 1, gran: 2, determinize: true }
    }

    #[test]
    fn call_free_program_unchanged() {
        let src = "init { var x: Int x := 1 assert x == 1 }";
        let pf = parse(src).unwrap();
        for n in 0..3 {
            let inl = inline_program(&pf.program, n).unwrap();
            assert_eq!(inl.stmt, pf.program.init);
            assert!(inl.sites.is_empty());
        }
    }

    #[test]
    fn inline_replaces_bodied_calls() {
        let src = r#"
method inc(a: Int) returns (b: Int) { b := a + 1 }
init {
  var x: Int, y: Int
  x := 0
  y := inc(x)
  assert y == 1
}
"#;
        let pf = parse(src).unwrap();
        let inl0 = inline_program(&pf.program, 0).unwrap();
        // Bound-0: the call is cut off.
        let flat = inl0.stmt.clone().flatten();
        assert!(flat.contains(&Stmt::Assume(Assertion::Bool(false))));
        let inl1 = inline_program(&pf.program, 1).unwrap();
        let flat = inl1.stmt.clone().flatten();
        assert!(!flat.iter().any(|s| matches!(s, Stmt::Call { .. })));
        assert_eq!(inl1.sites.len(), 1);
        // The inlined statement verifies from the unit state.
        let mut tyenv = alloc::collections::BTreeMap::new();
        declared_types(&inl1.stmt, &mut tyenv);
        let cfg = cfg();
        let ann = Annotation::default();
        let ctx = ExecCtx::new(&pf.program, &ann, &cfg, &tyenv);
        assert!(exec(&inl1.stmt, &State::unit(), ctx).is_ok());
        // The printed form re-parses (fresh names use `$`).
        let mut p2 = pf.program.clone();
        p2.init = inl1.stmt.clone();
        p2.methods.retain(|m| m.is_library());
        let printed = pretty_program(&p2, &Annotation::default());
        assert_eq!(
            parse(&printed).unwrap().program.init.flatten(),
            inl1.stmt.clone().flatten()
        );
    }

    #[test]
    fn inline_unrolls_loops() {
        let src = r#"
init {
  var i: Int
  i := 0
  while (i < 2) { i := i + 1 }
  assert i == 2
}
"#;
        let pf = parse(src).unwrap();
        let inl = inline_program(&pf.program, 3).unwrap();
        fn count_ifs(s: &Stmt) -> usize {
            match s {
                Stmt::Seq(ss) => ss.iter().map(count_ifs).sum(),
                Stmt::If { then_s, else_s, .. } => 1 + count_ifs(then_s) + count_ifs(else_s),
                _ => 0,
            }
        }
        fn has_while(s: &Stmt) -> bool {
            match s {
                Stmt::Seq(ss) => ss.iter().any(has_while),
                Stmt::If { then_s, else_s, .. } => has_while(then_s) || has_while(else_s),
                Stmt::While { .. } => true,
                _ => false,
            }
        }
        assert!(!has_while(&inl.stmt));
        assert_eq!(count_ifs(&inl.stmt), 3);
        // Two unrollings are enough for the loop to complete.
        let cfg = cfg();
        let mut tyenv = alloc::collections::BTreeMap::new();
        declared_types(&inl.stmt, &mut tyenv);
        let ann = Annotation::default();
        let ctx = ExecCtx::new(&pf.program, &ann, &cfg, &tyenv);
        assert!(exec(&inl.stmt, &State::unit(), ctx).is_ok());
        let inl1 = inline_program(&pf.program, 1).unwrap();
        let ctx = ExecCtx::new(&pf.program, &ann, &cfg, &tyenv);
        // One unrolling cannot: the residual assume !b cuts execution, and
        // the final assert sees only the infeasible i == 2 branch... which
        // is vacuous, so verification still passes.
        assert!(exec(&inl1.stmt, &State::unit(), ctx).is_ok());
    }

    #[test]
    fn assert_annot_wraps_sites() {
        let src = r#"
method m(a: Int)
  requires a >= 0
  ensures true
{ skip }
init {
  var x: Int
  x := 1
  m(x)
}
"#;
        let pf = parse(src).unwrap();
        let annotated = assert_annot(&pf.program, &pf.annotation);
        // Call site asserts the renamed precondition.
        let flat = annotated.init.clone().flatten();
        assert!(flat.iter().any(|s| matches!(
            s,
            Stmt::Assert(Assertion::Star(a, _))
                if matches!(&**a, Assertion::Cond(Expr::Binary(BinOp::Ge, l, _))
                    if matches!(&**l, Expr::Var(v) if v == "x"))
        )));
        // Body entry asserts the formal precondition; inlining the
        // annotated program therefore asserts it twice.
        let inl = inline_program(&annotated, 1).unwrap();
        fn count_ge_asserts(s: &Stmt) -> usize {
            match s {
                Stmt::Seq(ss) => ss.iter().map(count_ge_asserts).sum(),
                Stmt::If { then_s, else_s, .. } => {
                    count_ge_asserts(then_s) + count_ge_asserts(else_s)
                }
                Stmt::Assert(Assertion::Star(a, _)) => {
                    matches!(&**a, Assertion::Cond(Expr::Binary(BinOp::Ge, ..))) as usize
                }
                _ => 0,
            }
        }
        assert_eq!(count_ge_asserts(&inl.stmt), 2);
    }

    #[test]
    fn guard_execs_flagged_shape() {
        let src = "init { assume true skip assert true }";
        let pf = parse(src).unwrap();
        let g = guard_execs(&pf.program.init, "exist").unwrap();
        let flat = g.flatten();
        assert!(matches!(&flat[0], Stmt::Assign(f, Expr::Binary(BinOp::And, ..)) if f == "exist"));
        assert!(matches!(&flat[1], Stmt::Skip));
        assert!(matches!(&flat[2], Stmt::If { cond: Expr::Var(f), .. } if f == "exist"));
        assert!(guard_execs(&Stmt::Skip, "exist").unwrap() == Stmt::Skip);
    }

    #[test]
    fn guard_execs_never_fails() {
        // A failing fragment becomes a passing one with the flag false.
        let src = r#"init {
  var x: Ref
  assume x != null
  inhale acc(x.f, 1/2)
  exhale acc(x.f, 1/1)
  assert false
}"#;
        let pf = parse(src).unwrap();
        let g = guard_execs(&pf.program.init, "exist$").unwrap();
        let wrapped = Stmt::Seq(alloc::vec![
            Stmt::VarDecl(alloc::vec![("exist$".into(), Type::Bool)]),
            Stmt::Assign("exist$".into(), Expr::BoolLit(true)),
            g,
        ]);
        let cfg = cfg();
        let mut tyenv = alloc::collections::BTreeMap::new();
        declared_types(&wrapped, &mut tyenv);
        let ann = Annotation::default();
        let ctx = ExecCtx::new(&pf.program, &ann, &cfg, &tyenv);
        let out = exec(&wrapped, &State::unit(), ctx).expect("guarded execution fails");
        assert!(!out.is_empty());
        // Every surviving state records infeasibility.
        for s in &out {
            assert_eq!(s.store.get("exist$"), Some(&crate::sepalg::Value::Bool(false)));
        }
    }

    #[test]
    fn boundedize_loop_counts_down() {
        let src = r#"
init {
  var i: Int, n: Int
  i := 0
  while (i < n) { i := i + 1 }
  assert n <= 2
}
"#;
        let pf = parse(src).unwrap();
        let cfg = Config { int_max: 3, ..cfg() };
        // The original program fails: n = 3 forces a third iteration and
        // the final assert fails.
        assert!(verify_program(&pf.program, &pf.annotation, &cfg).is_err());
        let bounded = boundedize(&pf.program, 2);
        // With the right invariant the bounded program verifies.
        let mut ann = pf.annotation.clone();
        ann.loops.insert(
            0,
            crate::lang::parse_assertion_str(
                "dep$0 >= 0 * dep$0 <= 2 * dep$0 + i == 2",
            )
            .unwrap(),
        );
        verify_program(&bounded, &ann, &cfg).expect("bounded program verifies");
    }

    #[test]
    fn index_sites_numbers_calls() {
        let src = r#"
method m(a: Int) { skip }
init {
  var x: Int
  m(x)
  m(x)
}
"#;
        let pf = parse(src).unwrap();
        let ix = index_sites(&pf.program);
        assert_eq!(ix.call_sites.len(), 2);
        let m = ix.program.method("m").unwrap();
        assert_eq!(m.params.last().unwrap().0, "site$");
        let cfg = cfg();
        let ann = Annotation::default();
        verify_program(&ix.program, &ann, &cfg).expect("indexed program verifies");
    }
}
