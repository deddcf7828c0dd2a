//! Property harnesses for the preservation and completeness theorems.
//!
//! Each case is generated from a per-index seed, evaluated independently,
//! and reduced into a report; cases are therefore embarrassingly parallel
//! and reproducible regardless of scheduling. A violation of any
//! implication is an implementation bug: the report carries the seed, the
//! failing implication, and a greedily minimized program.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::lang::ast::*;
use crate::lang::pretty_program;
use crate::pc::{check_pc, Backend};
use crate::semantics::{exec, verify_program, ExecCtx};
use crate::sepalg::State;
use crate::transform::{assert_annot, inline_program};

use super::gen::{gen_annotation, gen_floor, gen_program, GenOptions};
use super::lattice::{default_lattice_capped, search_annotation_limited};
use super::maximal::{annotation_supported, maximal_annotation};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TheoremKind {
    T1,
    T2,
    T3,
    Corollary,
}

impl TheoremKind {
    pub fn name(self) -> &'static str {
        match self {
            TheoremKind::T1 => "T1",
            TheoremKind::T2 => "T2",
            TheoremKind::T3 => "T3",
            TheoremKind::Corollary => "corollary",
        }
    }

    pub fn parse(s: &str) -> Option<TheoremKind> {
        match s {
            "T1" | "t1" => Some(TheoremKind::T1),
            "T2" | "t2" => Some(TheoremKind::T2),
            "T3" | "t3" => Some(TheoremKind::T3),
            "corollary" => Some(TheoremKind::Corollary),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ViolationReport {
    pub seed: u64,
    pub detail: String,
    /// Greedily minimized program still exhibiting the violation.
    pub program: String,
}

#[derive(Clone, Debug)]
pub struct CaseOutcome {
    pub seed: u64,
    /// Whether the implication's premise held (non-vacuous case).
    pub premise: bool,
    pub violation: Option<ViolationReport>,
}

#[derive(Clone, Debug)]
pub struct HarnessReport {
    pub kind: TheoremKind,
    pub cases: usize,
    pub premise_held: usize,
    pub violations: Vec<ViolationReport>,
    pub base_seed: u64,
}

impl HarnessReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Default harness universe: small enough that a single case takes
/// milliseconds, rich enough for two distinct permission amounts.
pub fn harness_config() -> Config {
    Config { int_min: 0, int_max: 2, refs: 1, gran: 2, determinize: true }
}

/// Per-case seed: decorrelates neighboring indices.
pub fn case_seed(base: u64, index: usize) -> u64 {
    (base ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(index as u64)
}

fn inline_verifies(p: &Program, n: usize, cfg: &Config) -> Result<bool, String> {
    let inl = inline_program(p, n).map_err(|e| format!("inline: {e}"))?;
    let mut tyenv = BTreeMap::new();
    declared_types(&inl.stmt, &mut tyenv);
    let eps = Annotation::default();
    let ctx = ExecCtx::new(p, &eps, cfg, &tyenv);
    Ok(exec(&inl.stmt, &State::unit(), ctx).is_ok())
}

/// (premise held, violation detail if the conclusion failed).
type Eval = (bool, Option<String>);

fn eval_t1(p: &Program, ann: &Annotation, n: usize, cfg: &Config) -> Eval {
    let eps = Annotation::default();
    if !check_pc(p, &eps, n, Backend::Semantic, cfg).passes() {
        return (false, None);
    }
    if verify_program(p, ann, cfg).is_err() {
        return (false, None);
    }
    match inline_verifies(p, n, cfg) {
        Ok(true) => (true, None),
        Ok(false) => (
            true,
            Some("PC holds and the program verifies modularly, but its inlining fails".into()),
        ),
        Err(e) => (true, Some(e)),
    }
}

fn eval_t2(p: &Program, floor: &Annotation, n: usize, cfg: &Config) -> Eval {
    if !check_pc(p, floor, n, Backend::Semantic, cfg).passes() {
        return (false, None);
    }
    let lat = default_lattice_capped(p, cfg, 16);
    if search_annotation_limited(p, &lat, Some(floor), cfg, 2_000).is_none() {
        return (false, None);
    }
    let ap = assert_annot(p, floor);
    match inline_verifies(&ap, n, cfg) {
        Ok(true) => (true, None),
        Ok(false) => (
            true,
            Some(
                "PC holds and a stronger annotation verifies, but inlining the \
                 assert-annotated program fails"
                    .into(),
            ),
        ),
        Err(e) => (true, Some(e)),
    }
}

fn eval_corollary(p: &Program, n: usize, cfg: &Config) -> Eval {
    let eps = Annotation::default();
    if !check_pc(p, &eps, n, Backend::Semantic, cfg).passes() {
        return (false, None);
    }
    match inline_verifies(p, n, cfg) {
        Ok(true) => (false, None),
        Err(e) => (false, Some(e)),
        Ok(false) => {
            let lat = default_lattice_capped(p, cfg, 16);
            match search_annotation_limited(p, &lat, None, cfg, 2_000) {
                None => (true, None),
                Some(_) => (
                    true,
                    Some(
                        "PC holds and inlining fails, yet an annotation makes the \
                         program verify modularly"
                            .into(),
                    ),
                ),
            }
        }
    }
}

fn eval_t3(p: &Program, n: i64, cfg: &Config) -> Eval {
    match maximal_annotation(p, n, cfg) {
        Err(_) => (false, None),
        Ok(mr) => {
            if let Err(f) = verify_program(&mr.program, &mr.annotation, cfg) {
                return (
                    true,
                    Some(format!(
                        "maximal annotation does not verify modularly: {}",
                        f.reason
                    )),
                );
            }
            if !annotation_supported(&mr.annotation, &mr.program, cfg) {
                return (true, Some("maximal annotation is not supported".into()));
            }
            (true, None)
        }
    }
}

struct Case {
    program: Program,
    annotation: Annotation,
    kind: TheoremKind,
    n: usize,
}

impl Case {
    fn eval(&self, p: &Program, cfg: &Config) -> Eval {
        match self.kind {
            TheoremKind::T1 => eval_t1(p, &self.annotation, self.n, cfg),
            TheoremKind::T2 => eval_t2(p, &self.annotation, self.n, cfg),
            TheoremKind::Corollary => eval_corollary(p, self.n, cfg),
            TheoremKind::T3 => eval_t3(p, self.n as i64, cfg),
        }
    }
}

/// Greedy statement deletion: drop top-level statements of init and method
/// bodies while the violation persists.
fn minimize(case: &Case, cfg: &Config) -> Program {
    let violates = |p: &Program| -> bool {
        let (premise, v) = case.eval(p, cfg);
        premise && v.is_some()
    };
    let mut p = case.program.clone();
    loop {
        let mut changed = false;
        let flat = p.init.clone().flatten();
        for i in 0..flat.len() {
            let mut f2 = flat.clone();
            f2.remove(i);
            let mut p2 = p.clone();
            p2.init = Stmt::Seq(f2);
            if violates(&p2) {
                p = p2;
                changed = true;
                break;
            }
        }
        if changed {
            continue;
        }
        'methods: for mi in 0..p.methods.len() {
            let Some(body) = p.methods[mi].body.clone() else { continue };
            let flat = body.flatten();
            for i in 0..flat.len() {
                let mut f2 = flat.clone();
                f2.remove(i);
                let mut p2 = p.clone();
                p2.methods[mi].body = Some(Stmt::Seq(f2));
                if violates(&p2) {
                    p = p2;
                    changed = true;
                    break 'methods;
                }
            }
        }
        if !changed {
            return p;
        }
    }
}

fn gen_case(kind: TheoremKind, seed: u64, cfg: &Config) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        TheoremKind::T1 => {
            let opts = GenOptions {
                len: 4,
                method: true,
                loops: rng.gen_bool(0.15),
                adversarial: rng.gen_bool(0.25),
                deterministic: false,
            };
            let program = gen_program(&mut rng, &opts, cfg);
            let lat = default_lattice_capped(&program, cfg, 24);
            let annotation = gen_annotation(&mut rng, &lat);
            Case { program, annotation, kind, n: 1 }
        }
        TheoremKind::T2 => {
            let opts = GenOptions {
                len: 3,
                method: true,
                loops: false,
                adversarial: rng.gen_bool(0.2),
                deterministic: false,
            };
            let program = gen_program(&mut rng, &opts, cfg);
            let lat = default_lattice_capped(&program, cfg, 16);
            let annotation = gen_floor(&mut rng, &lat);
            Case { program, annotation, kind, n: 1 }
        }
        TheoremKind::Corollary => {
            let opts = GenOptions {
                len: 3,
                method: true,
                loops: false,
                adversarial: rng.gen_bool(0.3),
                deterministic: false,
            };
            let program = gen_program(&mut rng, &opts, cfg);
            Case { program, annotation: Annotation::default(), kind, n: 1 }
        }
        TheoremKind::T3 => {
            let opts = GenOptions {
                len: 3,
                method: rng.gen_bool(0.7),
                loops: rng.gen_bool(0.3),
                adversarial: false,
                deterministic: true,
            };
            let program = gen_program(&mut rng, &opts, cfg);
            let n = if rng.gen_bool(0.8) { 1 } else { 2 };
            Case { program, annotation: Annotation::default(), kind, n }
        }
    }
}

/// Run one harness case. Pure function of (kind, seed, cfg); safe to fan
/// out across workers.
pub fn run_case(kind: TheoremKind, seed: u64, cfg: &Config) -> CaseOutcome {
    let case = gen_case(kind, seed, cfg);
    let (premise, violation) = case.eval(&case.program, cfg);
    let violation = violation.map(|detail| {
        let min = minimize(&case, cfg);
        ViolationReport {
            seed,
            detail,
            program: pretty_program(&min, &case.annotation),
        }
    });
    CaseOutcome { seed, premise, violation }
}

/// Run the harness for a budget of cases. For T1/T2, exactly `budget`
/// cases are drawn. For T3 and the corollary, whose implications are often
/// vacuous on random programs, drawing continues until `budget` cases with
/// a true premise have been seen (capped at 40x the budget in attempts).
pub fn theorem_harness(
    kind: TheoremKind,
    budget: usize,
    base_seed: u64,
    cfg: &Config,
) -> HarnessReport {
    let mut report = HarnessReport {
        kind,
        cases: 0,
        premise_held: 0,
        violations: Vec::new(),
        base_seed,
    };
    let premise_target = matches!(kind, TheoremKind::T3 | TheoremKind::Corollary);
    let max_attempts = if premise_target { budget.saturating_mul(40) } else { budget };
    let mut index = 0;
    while index < max_attempts {
        if premise_target && report.premise_held >= budget {
            break;
        }
        let outcome = run_case(kind, case_seed(base_seed, index), cfg);
        report.cases += 1;
        if outcome.premise {
            report.premise_held += 1;
        }
        if let Some(v) = outcome.violation {
            report.violations.push(v);
        }
        index += 1;
    }
    report
}
