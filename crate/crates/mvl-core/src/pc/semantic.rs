//! Brute-force mono and framing checks.
//!
//! Both checks enumerate the downward closure of the given bounds and
//! compare demonic execution results directly, which makes them the ground
//! truth the other checkers are measured against. Witnesses are reported
//! in canonical (sorted) order: the first offending pair in the iteration
//! order of the closure, so results are deterministic and independent of
//! any parallel driver.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::lang::ast::{modified_vars, Stmt};
use crate::semantics::{exec, ExecCtx, ExecResult};
use crate::sepalg::{
    add, frac_zero, lifted_add, lifted_geq, substates, substates_within, Frac, State, StateSet,
};

use super::{single, Clause, FailureKind, PCFailure, PCVerdict};

fn exec_memo<'m>(
    memo: &'m mut BTreeMap<State, ExecResult>,
    s: &Stmt,
    phi: &State,
    ctx: ExecCtx,
) -> &'m ExecResult {
    memo.entry(phi.clone()).or_insert_with(|| exec(s, phi, ctx))
}

fn fail(
    clause: Clause,
    kind: FailureKind,
    site: &str,
    phi1: &State,
    phi2: &State,
    frame: Option<&State>,
    detail: String,
) -> PCVerdict {
    single(PCFailure {
        clause,
        kind,
        site: String::from(site),
        phi1: Some(phi1.clone()),
        phi2: Some(phi2.clone()),
        frame: frame.cloned(),
        detail,
    })
}

/// Does the mono property hold for `s` over the bounds `t`? For every
/// pair phi1 <= phi2 in the downward closure with phi1 verifying, phi2
/// must verify and every phi2 post-state must dominate some phi1
/// post-state.
pub fn check_mono_semantic(t: &StateSet, s: &Stmt, ctx: ExecCtx, site: &str) -> PCVerdict {
    check_mono_over(&substates_within(t, ctx.config.gran), s, ctx, site, Clause::Mono)
}

/// Mono over an explicitly given, already-closed universe (used for the
/// unbounded loop-condition obligation).
pub fn check_mono_over(
    closure: &StateSet,
    s: &Stmt,
    ctx: ExecCtx,
    site: &str,
    clause: Clause,
) -> PCVerdict {
    let gran = ctx.config.gran;
    let mut memo: BTreeMap<State, ExecResult> = BTreeMap::new();
    for phi2 in closure {
        let mut subs = substates(phi2, gran);
        subs.sort();
        for phi1 in subs {
            let out1 = match exec_memo(&mut memo, s, &phi1, ctx) {
                Ok(set) => set.clone(),
                Err(_) => continue, // phi1 does not verify: pair exempt
            };
            match exec_memo(&mut memo, s, phi2, ctx) {
                Err(f) => {
                    return fail(
                        clause,
                        FailureKind::Safety,
                        site,
                        &phi1,
                        phi2,
                        None,
                        format!(
                            "{} verifies but {} fails: {}",
                            phi1.render(gran),
                            phi2.render(gran),
                            f.reason
                        ),
                    );
                }
                Ok(out2) => {
                    if !lifted_geq(out2, &out1) {
                        let bad = out2
                            .iter()
                            .find(|o2| !out1.iter().any(|o1| crate::sepalg::geq(o2, o1)))
                            .expect("violating post-state");
                        return fail(
                            clause,
                            FailureKind::Output,
                            site,
                            &phi1,
                            phi2,
                            None,
                            format!(
                                "post-state {} of {} dominates no post-state of {}",
                                bad.render(gran),
                                phi2.render(gran),
                                phi1.render(gran)
                            ),
                        );
                    }
                }
            }
        }
    }
    PCVerdict::pass()
}

/// All decompositions psi = phi + r where the frame's store avoids the
/// modified variables. Deterministic order, phi-heavy first on stores.
pub(crate) fn decompositions(
    psi: &State,
    modif: &BTreeSet<String>,
    gran: i64,
) -> Vec<(State, State)> {
    let step = Frac::new(1, gran);
    let mut acc = alloc::vec![(State::unit(), State::unit())];
    for (x, v) in &psi.store {
        let mut next = Vec::with_capacity(acc.len() * 3);
        for (phi, r) in &acc {
            // Always available: the variable on phi's side only.
            let mut phi2 = phi.clone();
            phi2.store.insert(x.clone(), *v);
            next.push((phi2.clone(), r.clone()));
            if !modif.contains(x) {
                // Shared between both parts.
                let mut r2 = r.clone();
                r2.store.insert(x.clone(), *v);
                next.push((phi2, r2.clone()));
                // On the frame's side only.
                next.push((phi.clone(), r2));
            }
        }
        acc = next;
    }
    for (key, (p, v)) in &psi.heap {
        let steps = (*p / step).to_integer();
        let mut next = Vec::with_capacity(acc.len() * (steps as usize + 1));
        for (phi, r) in &acc {
            for k in 0..=steps {
                let mut phi2 = phi.clone();
                let mut r2 = r.clone();
                phi2.set_heap(key.clone(), step * Frac::new(steps - k, 1), *v);
                r2.set_heap(key.clone(), step * Frac::new(k, 1), *v);
                next.push((phi2, r2));
            }
        }
        acc = next;
    }
    for (key, p) in &psi.preds {
        let steps = (*p / step).to_integer();
        let mut next = Vec::with_capacity(acc.len() * (steps as usize + 1));
        for (phi, r) in &acc {
            for k in 0..=steps {
                let mut phi2 = phi.clone();
                let mut r2 = r.clone();
                phi2.set_pred(key.clone(), step * Frac::new(steps - k, 1));
                r2.set_pred(key.clone(), step * Frac::new(k, 1));
                next.push((phi2, r2));
            }
        }
        acc = next;
    }
    debug_assert!(acc.iter().all(|(phi, r)| add(phi, r).as_ref() == Some(psi)));
    acc
}

/// Does the framing property hold for `s` over the bounds `t`? For every
/// state in the closure and every decomposition into a verifying part phi
/// and a frame r (whose store avoids the modified variables), the whole
/// state must verify and every post-state must dominate some phi
/// post-state recombined with r.
pub fn check_framing_semantic(t: &StateSet, s: &Stmt, ctx: ExecCtx, site: &str) -> PCVerdict {
    let gran = ctx.config.gran;
    let closure = substates_within(t, gran);
    let modif = modified_vars(s);
    let mut memo: BTreeMap<State, ExecResult> = BTreeMap::new();
    let mut seen: BTreeSet<(State, State)> = BTreeSet::new();
    for psi in &closure {
        for (phi, r) in decompositions(psi, &modif, gran) {
            if !seen.insert((phi.clone(), r.clone())) {
                continue;
            }
            let out1 = match exec_memo(&mut memo, s, &phi, ctx) {
                Ok(set) => set.clone(),
                Err(_) => continue, // phi does not verify: pair exempt
            };
            match exec_memo(&mut memo, s, psi, ctx) {
                Err(f) => {
                    return fail(
                        Clause::Framing,
                        FailureKind::Safety,
                        site,
                        &phi,
                        psi,
                        Some(&r),
                        format!(
                            "{} verifies but with frame {} the run from {} fails: {}",
                            phi.render(gran),
                            r.render(gran),
                            psi.render(gran),
                            f.reason
                        ),
                    );
                }
                Ok(out2) => {
                    let frame_set: StateSet = [r.clone()].into();
                    let shifted = lifted_add(&out1, &frame_set);
                    if !lifted_geq(out2, &shifted) {
                        let bad = out2
                            .iter()
                            .find(|o2| !shifted.iter().any(|o1| crate::sepalg::geq(o2, o1)))
                            .expect("violating post-state");
                        return fail(
                            Clause::Framing,
                            FailureKind::Frame,
                            site,
                            &phi,
                            psi,
                            Some(&r),
                            format!(
                                "post-state {} of {} does not preserve the frame {}",
                                bad.render(gran),
                                psi.render(gran),
                                r.render(gran)
                            ),
                        );
                    }
                }
            }
        }
    }
    PCVerdict::pass()
}

/// Re-check a reported mono witness directly against the definition;
/// used by tests to validate witness soundness.
pub fn recheck_mono_witness(f: &PCFailure, s: &Stmt, ctx: ExecCtx) -> bool {
    let (Some(phi1), Some(phi2)) = (&f.phi1, &f.phi2) else { return false };
    if !crate::sepalg::geq(phi2, phi1) {
        return false;
    }
    let Ok(out1) = exec(s, phi1, ctx) else { return false };
    match exec(s, phi2, ctx) {
        Err(_) => f.kind == FailureKind::Safety,
        Ok(out2) => f.kind == FailureKind::Output && !lifted_geq(&out2, &out1),
    }
}

/// Re-check a reported framing witness directly against the definition.
pub fn recheck_framing_witness(f: &PCFailure, s: &Stmt, ctx: ExecCtx) -> bool {
    let (Some(phi), Some(psi), Some(r)) = (&f.phi1, &f.phi2, &f.frame) else {
        return false;
    };
    if add(phi, r).as_ref() != Some(psi) {
        return false;
    }
    let modif = modified_vars(s);
    if r.store.keys().any(|x| modif.contains(x)) {
        return false;
    }
    let Ok(out1) = exec(s, phi, ctx) else { return false };
    match exec(s, psi, ctx) {
        Err(_) => f.kind == FailureKind::Safety,
        Ok(out2) => {
            let frame_set: StateSet = [r.clone()].into();
            f.kind == FailureKind::Frame && !lifted_geq(&out2, &lifted_add(&out1, &frame_set))
        }
    }
}

/// Frames with zero resources are pure; exposed for tests probing the
/// perm-introspection counterexamples.
pub fn frame_is_pure(r: &State) -> bool {
    r.heap.values().all(|(p, _)| *p == frac_zero()) && r.preds.values().all(|p| *p == frac_zero())
}
