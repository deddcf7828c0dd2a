//! Preservation-condition checkers.
//!
//! Three ways to establish that inlining can only shrink the set of
//! verifying annotations, ordered by cost and precision:
//!
//! - `syntactic`: a whole-program feature scan rejecting any construct that
//!   can break monotonicity or framing (permission introspection,
//!   existential amounts or predicate arguments in exhale positions,
//!   resource assumptions).
//! - `structural`: self-composition probes in the style of a program-level
//!   encoding: a guarded execution from the smaller state runs alongside
//!   the real execution from the larger state, with nondeterministic
//!   choices matched across the two runs.
//! - `semantic`: brute-force checks of the mono and framing properties by
//!   enumerating substates and decompositions and comparing execution
//!   results directly.
//!
//! `check::check_pc` drives the bounded proof-obligation recursion over a
//! program using either the semantic or the structural leaf checkers.

pub mod check;
pub mod semantic;
pub mod structural;
pub mod syntactic;

pub use check::{check_pc, cond_universe, Backend};
pub use semantic::{check_framing_semantic, check_mono_semantic};
pub use structural::{check_framing_structural, check_mono_structural, ChoiceTrace};
pub use syntactic::{check_syntactic, SyntacticVerdict};

use alloc::string::String;
use alloc::vec::Vec;

use crate::sepalg::State;

/// Which proof obligation a failure belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Clause {
    /// Monotonicity of a call-free, loop-free fragment.
    Mono,
    /// Framing of an inlined callee body or loop body.
    Framing,
    /// Unbounded monotonicity of a loop condition, checked over a full
    /// enumerated sub-universe rather than the reachable bounds.
    LoopCondMono,
}

impl Clause {
    pub fn name(self) -> &'static str {
        match self {
            Clause::Mono => "mono",
            Clause::Framing => "framing",
            Clause::LoopCondMono => "loop-cond-mono",
        }
    }
}

/// What exactly went wrong inside a clause.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum FailureKind {
    /// The smaller state verifies but the larger one fails.
    Safety,
    /// A post-state of the larger run dominates no post-state of the
    /// smaller run.
    Output,
    /// A post-state of the framed run does not dominate any small-run
    /// post-state recombined with the frame.
    Frame,
    /// A structural probe had a feasible second execution with nothing
    /// left to compare after choice matching; treated as a failure.
    Inconclusive,
    /// The checker could not analyze the fragment at all.
    Error,
}

impl FailureKind {
    pub fn name(self) -> &'static str {
        match self {
            FailureKind::Safety => "safety",
            FailureKind::Output => "output",
            FailureKind::Frame => "frame",
            FailureKind::Inconclusive => "inconclusive",
            FailureKind::Error => "error",
        }
    }
}

/// One failed (or inconclusive) proof obligation, with its witnesses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PCFailure {
    pub clause: Clause,
    pub kind: FailureKind,
    /// Program path of the obligation, e.g. `init.3/call n#0`.
    pub site: String,
    /// Smaller state of the witness pair.
    pub phi1: Option<State>,
    /// Larger state (for framing: the recombined state phi1 + frame).
    pub phi2: Option<State>,
    /// The frame, for framing obligations.
    pub frame: Option<State>,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
        }
    }
}

/// Outcome of a leaf check or of the whole preservation condition: the
/// collected failures, empty meaning the condition holds.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PCVerdict {
    pub failures: Vec<PCFailure>,
}

impl PCVerdict {
    pub fn pass() -> PCVerdict {
        PCVerdict::default()
    }

    pub fn passes(&self) -> bool {
        self.failures.is_empty()
    }

    /// Pass with no failures; Fail when any conclusive failure exists;
    /// Inconclusive when only structural probes came up empty. An
    /// inconclusive verdict still rejects the preservation condition.
    pub fn status(&self) -> Status {
        if self.failures.is_empty() {
            Status::Pass
        } else if self
            .failures
            .iter()
            .all(|f| f.kind == FailureKind::Inconclusive)
        {
            Status::Inconclusive
        } else {
            Status::Fail
        }
    }

    pub fn merge(&mut self, other: PCVerdict) {
        self.failures.extend(other.failures);
    }
}

pub(crate) fn single(f: PCFailure) -> PCVerdict {
    PCVerdict { failures: alloc::vec![f] }
}

pub(crate) fn error_failure(clause: Clause, site: &str, detail: String) -> PCFailure {
    PCFailure {
        clause,
        kind: FailureKind::Error,
        site: String::from(site),
        phi1: None,
        phi2: None,
        frame: None,
        detail,
    }
}

#[cfg(test)]
mod tests {
    use alloc::collections::BTreeMap;
    use alloc::vec::Vec;

    use super::semantic::{check_mono_over, recheck_framing_witness, recheck_mono_witness};
    use super::structural::check_mono_structural_over;
    use super::*;
    use crate::config::{Config, Type};
    use crate::lang::ast::{declared_types, Annotation, Program, Stmt};
    use crate::lang::{parse, parse_stmt_block};
    use crate::semantics::ExecCtx;
    use crate::sepalg::{frac, geq, State, StateSet, Value};

    fn cfg() -> Config {
        Config { int_min: 0, int_max: 1, refs: 1, gran: 2, determinize: true }
    }

    fn stmt(src: &str) -> Stmt {
        parse_stmt_block(src, 100).expect("parse fragment")
    }

    /// A state with x -> r0 and the given permission (in halves) on r0.f
    /// holding value 0.
    fn with_cell(halves: i64) -> State {
        let mut s = State::unit();
        s.store.insert("x".into(), Value::Ref(0));
        s.set_heap((0, "f".into()), frac(halves, 2), Value::Int(0));
        s
    }

    struct Rig {
        program: Program,
        ann: Annotation,
        cfg: Config,
        tyenv: BTreeMap<String, Type>,
    }

    impl Rig {
        fn new(s: &Stmt) -> Rig {
            let mut tyenv = BTreeMap::new();
            declared_types(s, &mut tyenv);
            tyenv.insert("x".into(), Type::Ref);
            Rig {
                program: Program::default(),
                ann: Annotation::default(),
                cfg: cfg(),
                tyenv,
            }
        }

        fn ctx(&self) -> ExecCtx<'_> {
            ExecCtx::new(&self.program, &self.ann, &self.cfg, &self.tyenv)
        }
    }

    fn both_mono(t: &StateSet, s: &Stmt, rig: &Rig) -> (PCVerdict, PCVerdict) {
        (
            check_mono_semantic(t, s, rig.ctx(), "t"),
            check_mono_structural(t, s, rig.ctx(), "t"),
        )
    }

    fn both_framing(t: &StateSet, s: &Stmt, rig: &Rig) -> (PCVerdict, PCVerdict) {
        (
            check_framing_semantic(t, s, rig.ctx(), "t"),
            check_framing_structural(t, s, rig.ctx(), "t"),
        )
    }

    #[test]
    fn exhale_perm_introspection_is_mono_but_not_framing() {
        // Exhaling everything currently held shrinks with the state, so it
        // is mono; but a frame adding permission gets consumed, so framing
        // fails, with the reported frame carrying permission to x.f.
        let s = stmt("exhale acc(x.f, perm(x.f))");
        let rig = Rig::new(&s);
        let t: StateSet = [with_cell(2)].into();
        let (sem, st) = both_mono(&t, &s, &rig);
        assert!(sem.passes(), "semantic mono: {:?}", sem.failures);
        assert!(st.passes(), "structural mono: {:?}", st.failures);
        let (sem, st) = both_framing(&t, &s, &rig);
        assert_eq!(sem.status(), Status::Fail);
        assert_eq!(st.status(), Status::Fail);
        let w = &sem.failures[0];
        assert_eq!(w.clause, Clause::Framing);
        let frame = w.frame.as_ref().expect("frame witness");
        assert!(frame.heap_perm(&(0, "f".into())) > frac(0, 1));
        assert!(recheck_framing_witness(w, &s, rig.ctx()));
    }

    #[test]
    fn perm_upper_bound_assert_breaks_mono() {
        let s = stmt("assert perm(x.f) <= 1/2");
        let rig = Rig::new(&s);
        let t: StateSet = [with_cell(2)].into();
        let (sem, st) = both_mono(&t, &s, &rig);
        assert_eq!(sem.status(), Status::Fail);
        assert_eq!(st.status(), Status::Fail);
        let w = &sem.failures[0];
        assert_eq!(w.kind, FailureKind::Safety);
        assert!(recheck_mono_witness(w, &s, rig.ctx()));
        // The witness pair is ordered.
        let (phi1, phi2) = (w.phi1.as_ref().unwrap(), w.phi2.as_ref().unwrap());
        assert!(geq(phi2, phi1) && phi1 != phi2);
    }

    #[test]
    fn wildcard_exhale_breaks_mono_semantically() {
        // Exhale a wildcard, then require nothing is left: from 1/2 the
        // only exhale-able wildcard amount is 1/2 itself... but from 1/1
        // the demon can pick 1/2 and keep 1/2, so the post-states of the
        // larger run do not all dominate a smaller-run post-state once we
        // pin the remainder.
        let s = stmt("exhale acc(x.f, wildcard) assert perm(x.f) == 0/1");
        let rig = Rig::new(&s);
        let t: StateSet = [with_cell(2)].into();
        let (sem, st) = both_mono(&t, &s, &rig);
        assert_eq!(sem.status(), Status::Fail);
        assert_eq!(st.status(), Status::Fail);
        assert!(recheck_mono_witness(&sem.failures[0], &s, rig.ctx()));
    }

    #[test]
    fn plain_resource_shuffle_passes_everything() {
        let s = stmt("exhale acc(x.f, 1/2) inhale acc(x.f, 1/2)");
        let rig = Rig::new(&s);
        let t: StateSet = [with_cell(2)].into();
        let (sem, st) = both_mono(&t, &s, &rig);
        assert!(sem.passes() && st.passes());
        let (sem, st) = both_framing(&t, &s, &rig);
        assert!(sem.passes(), "semantic framing: {:?}", sem.failures);
        assert!(st.passes(), "structural framing: {:?}", st.failures);
    }

    #[test]
    fn structural_matches_inhaled_values_and_wildcards() {
        // Unconstrained inhaled values and wildcard amounts are choices the
        // probe must match between the two runs, otherwise even this
        // trivially mono fragment would come out inconclusive.
        let s = stmt("inhale acc(x.f, wildcard) assert perm(x.f) > 0/1");
        let rig = Rig::new(&s);
        let t: StateSet = [with_cell(0)].into();
        let (sem, st) = both_mono(&t, &s, &rig);
        assert!(sem.passes(), "semantic mono: {:?}", sem.failures);
        assert!(st.passes(), "structural mono: {:?}", st.failures);
    }

    #[test]
    fn structural_without_determinization_is_coarser() {
        // With choice matching off, the same fragment fails structurally:
        // the two runs inhale unrelated values.
        let s = stmt("var y: Int inhale acc(x.f, 1/2) == y assert x.f == y");
        let mut rig = Rig::new(&s);
        let t: StateSet = [with_cell(0)].into();
        let det = check_mono_structural(&t, &s, rig.ctx(), "t");
        assert!(det.passes(), "determinized: {:?}", det.failures);
        rig.cfg.determinize = false;
        let loose = check_mono_structural(&t, &s, rig.ctx(), "t");
        assert!(!loose.passes());
        // Coarseness is still sound: the semantic check passes.
        rig.cfg.determinize = true;
        assert!(check_mono_semantic(&t, &s, rig.ctx(), "t").passes());
    }

    #[test]
    fn structural_implies_semantic_on_fragment_suite() {
        // Soundness direction of the hierarchy on a mixed bag of
        // fragments: wherever the structural probe passes, the brute-force
        // semantic check passes too (mono and framing).
        let frags = [
            "skip",
            "exhale acc(x.f, 1/2)",
            "exhale acc(x.f, perm(x.f))",
            "inhale acc(x.f, wildcard)",
            "assert perm(x.f) <= 1/2",
            "assert perm(x.f) >= 1/2",
            "var y: Int inhale acc(x.f, 1/2) == y exhale acc(x.f, 1/2) == y",
            "choose { exhale acc(x.f, 1/2) } or { skip }",
            "if (x == null) { skip } else { exhale acc(x.f, 1/2) }",
            "havoc x",
            "assume perm(x.f) == 1/2",
            "exhale acc(x.f, wildcard)",
        ];
        for src in frags {
            let s = stmt(src);
            let rig = Rig::new(&s);
            for halves in [1, 2] {
                let t: StateSet = [with_cell(halves)].into();
                let (sem, st) = both_mono(&t, &s, &rig);
                if st.passes() {
                    assert!(sem.passes(), "{src}: structural mono passed, semantic failed");
                }
                let (semf, stf) = both_framing(&t, &s, &rig);
                if stf.passes() {
                    assert!(
                        semf.passes(),
                        "{src}: structural framing passed, semantic failed"
                    );
                }
                // Framing implies mono at matching backends.
                if semf.passes() {
                    assert!(sem.passes(), "{src}: semantic framing passed, mono failed");
                }
            }
        }
    }

    #[test]
    fn syntactic_scan_features() {
        let src = r#"
init {
  var x: Ref
  assume x != null
  inhale acc(x.f, 1/1)
  exhale acc(x.f, wildcard)
  exhale acc(x.f, perm(x.f))
}
"#;
        let pf = parse(src).unwrap();
        let v = check_syntactic(&pf.program, &pf.annotation);
        assert!(!v.passes());
        assert!(v.reasons.iter().any(|r| r.contains("wildcard permission")));
        assert!(v.reasons.iter().any(|r| r.contains("perm introspection")));

        let clean = r#"
init {
  var x: Ref
  assume x != null
  inhale acc(x.f, 1/1)
  exhale acc(x.f, 1/2)
}
"#;
        let pf = parse(clean).unwrap();
        assert!(check_syntactic(&pf.program, &pf.annotation).passes());
    }

    #[test]
    fn syntactic_rejects_library_binders() {
        let src = r#"
predicate Q(a: Ref)

method pick() returns (c: Ref)
  requires acc(Q(?y), 1/1)
  ensures acc(Q(y), 1/1) * c == y

init {
  var a: Ref, b: Ref
  inhale acc(Q(a), 1/1)
  b := pick()
}
"#;
        let pf = parse(src).unwrap();
        let v = check_syntactic(&pf.program, &pf.annotation);
        assert!(!v.passes());
        assert!(v
            .reasons
            .iter()
            .any(|r| r.contains("existential binder in precondition of bodyless method 'pick'")));
    }

    #[test]
    fn check_pc_passes_benign_program_both_backends() {
        let src = r#"
method consume(a: Ref)
{
  exhale acc(a.f, 1/2)
}

init {
  var x: Ref
  assume x != null
  inhale acc(x.f, 1/1)
  consume(x)
}
"#;
        let pf = parse(src).unwrap();
        let c = cfg();
        for backend in [Backend::Semantic, Backend::Structural] {
            let v = check_pc(&pf.program, &pf.annotation, 1, backend, &c);
            assert!(v.passes(), "{}: {:?}", backend.name(), v.failures);
        }
    }

    #[test]
    fn check_pc_fails_introspecting_callee_body() {
        let src = r#"
method drain(a: Ref)
{
  exhale acc(a.f, perm(a.f))
}

init {
  var x: Ref
  assume x != null
  inhale acc(x.f, 1/1)
  drain(x)
}
"#;
        let pf = parse(src).unwrap();
        let c = cfg();
        for backend in [Backend::Semantic, Backend::Structural] {
            let v = check_pc(&pf.program, &pf.annotation, 1, backend, &c);
            assert_eq!(v.status(), Status::Fail, "{}", backend.name());
            let f = v
                .failures
                .iter()
                .find(|f| f.clause == Clause::Framing)
                .expect("framing failure");
            assert!(f.site.contains("call drain"), "site: {}", f.site);
        }
    }

    #[test]
    fn check_pc_flags_introspecting_loop_condition() {
        let src = r#"
init {
  var x: Ref
  assume x != null
  inhale acc(x.f, 1/1)
  while (perm(x.f) > 0/1) {
    exhale acc(x.f, 1/1)
  }
}
"#;
        let pf = parse(src).unwrap();
        let c = cfg();
        for backend in [Backend::Semantic, Backend::Structural] {
            let v = check_pc(&pf.program, &pf.annotation, 2, backend, &c);
            assert_eq!(v.status(), Status::Fail, "{}", backend.name());
            assert!(
                v.failures.iter().any(|f| f.clause == Clause::LoopCondMono),
                "{}: {:?}",
                backend.name(),
                v.failures
            );
        }
    }

    #[test]
    fn cond_universe_covers_condition_footprint() {
        let pf = parse("init { skip }").unwrap();
        let c = cfg();
        let mut tyenv = BTreeMap::new();
        tyenv.insert("i".into(), Type::Int);
        let cond = match stmt("if (i < 1) { skip } else { skip }").flatten().remove(0) {
            Stmt::If { cond, .. } => cond,
            _ => unreachable!(),
        };
        let spec = cond_universe(&cond, &tyenv, &pf.program, &c);
        let states: Vec<State> = spec.enumerate();
        // i absent, i = 0, i = 1; no heap, no predicates.
        assert_eq!(states.len(), 3);
        assert!(states.iter().any(|s| s.store.is_empty()));
    }

    #[test]
    fn loop_cond_mono_over_universe_passes_for_pure_condition() {
        let pf = parse("init { skip }").unwrap();
        let c = cfg();
        let mut tyenv = BTreeMap::new();
        tyenv.insert("i".into(), Type::Int);
        let s = stmt("assume i < 1");
        let universe: StateSet = cond_universe(
            &match stmt("if (i < 1) { skip } else { skip }").flatten().remove(0) {
                Stmt::If { cond, .. } => cond,
                _ => unreachable!(),
            },
            &tyenv,
            &pf.program,
            &c,
        )
        .enumerate()
        .into_iter()
        .collect();
        let ann = Annotation::default();
        let ctx = ExecCtx::new(&pf.program, &ann, &c, &tyenv);
        assert!(check_mono_over(&universe, &s, ctx, "t", Clause::LoopCondMono).passes());
        assert!(
            check_mono_structural_over(&universe, &s, ctx, "t", Clause::LoopCondMono).passes()
        );
    }
}
