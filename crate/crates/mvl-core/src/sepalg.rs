//! The concrete separation algebra with a store.
//!
//! A state is a triple of partial maps: a variable store (the pure part), a
//! heap of fractionally-owned field cells, and a multiset of fractionally-
//! owned predicate instances. Addition is pointwise: stores must agree on
//! shared variables, permissions add up to at most 1, and positive-permission
//! entries for the same cell must agree on the value. Absence encodes zero
//! permission, which is what makes cancellativity on impure parts hold.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_rational::Ratio;

/// Exact permission amount; all amounts in live states are multiples of the
/// configured 1/G and lie in (0, 1].
pub type Frac = Ratio<i64>;

pub fn frac(num: i64, den: i64) -> Frac {
    Frac::new(num, den)
}

pub fn frac_zero() -> Frac {
    Frac::new(0, 1)
}

pub fn frac_one() -> Frac {
    Frac::new(1, 1)
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Null,
    Ref(u32),
}

impl Value {
    pub fn render(&self) -> String {
        match self {
            Value::Int(i) => format!("{i}"),
            Value::Bool(b) => format!("{b}"),
            Value::Null => "null".into(),
            Value::Ref(r) => format!("r{r}"),
        }
    }
}

pub type HeapKey = (u32, String);
pub type PredKey = (String, Vec<Value>);

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Default, Hash)]
pub struct State {
    pub store: BTreeMap<String, Value>,
    pub heap: BTreeMap<HeapKey, (Frac, Value)>,
    pub preds: BTreeMap<PredKey, Frac>,
}

pub type StateSet = BTreeSet<State>;

impl State {
    /// The unit u: empty store, no resources.
    pub fn unit() -> State {
        State::default()
    }

    pub fn is_unit(&self) -> bool {
        self.store.is_empty() && self.heap.is_empty() && self.preds.is_empty()
    }

    /// Core |phi|: the store part.
    pub fn core(&self) -> State {
        State {
            store: self.store.clone(),
            ..State::default()
        }
    }

    /// Impure part C(phi): heap and predicates.
    pub fn impure(&self) -> State {
        State {
            store: BTreeMap::new(),
            heap: self.heap.clone(),
            preds: self.preds.clone(),
        }
    }

    /// sigma(phi): the declared variables.
    pub fn vars(&self) -> BTreeSet<String> {
        self.store.keys().cloned().collect()
    }

    pub fn is_pure(&self) -> bool {
        self.heap.is_empty() && self.preds.is_empty()
    }

    /// Permission currently held on a heap cell (zero if absent).
    pub fn heap_perm(&self, key: &HeapKey) -> Frac {
        self.heap.get(key).map(|(p, _)| *p).unwrap_or_else(frac_zero)
    }

    pub fn pred_perm(&self, key: &PredKey) -> Frac {
        self.preds.get(key).copied().unwrap_or_else(frac_zero)
    }

    /// Insert a heap entry, dropping it if the permission is zero.
    pub fn set_heap(&mut self, key: HeapKey, p: Frac, v: Value) {
        if p > frac_zero() {
            self.heap.insert(key, (p, v));
        } else {
            self.heap.remove(&key);
        }
    }

    pub fn set_pred(&mut self, key: PredKey, p: Frac) {
        if p > frac_zero() {
            self.preds.insert(key, p);
        } else {
            self.preds.remove(&key);
        }
    }

    /// Canonical textual form: entries sorted, permissions printed as k/G.
    pub fn render(&self, gran: i64) -> String {
        let mut parts: Vec<String> = Vec::new();
        for (x, v) in &self.store {
            parts.push(format!("{x}↦{}", v.render()));
        }
        for ((r, f), (p, v)) in &self.heap {
            parts.push(format!("(r{r},{f})↦({},{})", render_frac(*p, gran), v.render()));
        }
        for ((name, args), p) in &self.preds {
            let args: Vec<String> = args.iter().map(Value::render).collect();
            parts.push(format!("{name}({})↦{}", args.join(","), render_frac(*p, gran)));
        }
        format!("{{{}}}", parts.join("; "))
    }
}

pub fn render_frac(p: Frac, gran: i64) -> String {
    let scaled = p * Frac::new(gran, 1);
    if scaled.is_integer() {
        format!("{}/{}", scaled.to_integer(), gran)
    } else {
        format!("{}/{}", p.numer(), p.denom())
    }
}

/// phi1 ⊕ phi2; None when undefined.
pub fn add(a: &State, b: &State) -> Option<State> {
    let mut out = a.clone();
    for (x, v) in &b.store {
        match out.store.get(x) {
            Some(v0) if v0 != v => return None,
            _ => {
                out.store.insert(x.clone(), *v);
            }
        }
    }
    for (key, (p, v)) in &b.heap {
        match out.heap.get(key) {
            Some((p0, v0)) => {
                if v0 != v {
                    return None;
                }
                let sum = *p0 + *p;
                if sum > frac_one() {
                    return None;
                }
                out.heap.insert(key.clone(), (sum, *v));
            }
            None => {
                out.heap.insert(key.clone(), (*p, *v));
            }
        }
    }
    for (key, p) in &b.preds {
        let sum = out.pred_perm(key) + *p;
        if sum > frac_one() {
            return None;
        }
        out.preds.insert(key.clone(), sum);
    }
    Some(out)
}

/// a ⪰ b: there exists c with a = b ⊕ c. Computed by pointwise subtraction.
pub fn geq(a: &State, b: &State) -> bool {
    for (x, v) in &b.store {
        if a.store.get(x) != Some(v) {
            return false;
        }
    }
    for (key, (p, v)) in &b.heap {
        match a.heap.get(key) {
            Some((pa, va)) => {
                if va != v || pa < p {
                    return false;
                }
            }
            None => return false,
        }
    }
    for (key, p) in &b.preds {
        if a.pred_perm(key) < *p {
            return false;
        }
    }
    true
}

/// (|phi|, C(phi), sigma(phi)).
pub fn decompose(phi: &State) -> (State, State, BTreeSet<String>) {
    (phi.core(), phi.impure(), phi.vars())
}

/// phi minus the impure part of i, keeping phi's full store.
///
/// This is exactly the single successor that exhaling footprint i from phi
/// produces: every decomposition phi = i ⊕ r yields the same |i| ⊕ r,
/// namely phi's store with i's resources subtracted.
pub fn sub_impure(phi: &State, i: &State) -> State {
    debug_assert!(geq(phi, i));
    let mut out = phi.clone();
    for (key, (p, _)) in &i.heap {
        let (p0, v0) = out.heap[key];
        out.set_heap(key.clone(), p0 - *p, v0);
    }
    for (key, p) in &i.preds {
        let p0 = out.pred_perm(key);
        out.set_pred(key.clone(), p0 - *p);
    }
    out
}

/// All substates of a single state: every sub-store combined with every
/// per-entry permission reduction (on the 1/G grid).
pub fn substates(phi: &State, gran: i64) -> Vec<State> {
    let step = Frac::new(1, gran);
    let mut acc = alloc::vec![State::unit()];
    for (x, v) in &phi.store {
        let mut next = Vec::with_capacity(acc.len() * 2);
        for s in &acc {
            next.push(s.clone());
            let mut s2 = s.clone();
            s2.store.insert(x.clone(), *v);
            next.push(s2);
        }
        acc = next;
    }
    for (key, (p, v)) in &phi.heap {
        let steps = (*p / step).to_integer();
        let mut next = Vec::with_capacity(acc.len() * (steps as usize + 1));
        for s in &acc {
            for k in 0..=steps {
                let mut s2 = s.clone();
                s2.set_heap(key.clone(), step * Frac::new(k, 1), *v);
                next.push(s2);
            }
        }
        acc = next;
    }
    for (key, p) in &phi.preds {
        let steps = (*p / step).to_integer();
        let mut next = Vec::with_capacity(acc.len() * (steps as usize + 1));
        for s in &acc {
            for k in 0..=steps {
                let mut s2 = s.clone();
                s2.set_pred(key.clone(), step * Frac::new(k, 1));
                next.push(s2);
            }
        }
        acc = next;
    }
    acc
}

/// Downward closure of a set: { phi | exists t in T. t ⪰ phi }.
pub fn substates_within(t: &StateSet, gran: i64) -> StateSet {
    let mut out = StateSet::new();
    for s in t {
        out.extend(substates(s, gran));
    }
    out
}

/// T ⊕ U keeping only defined sums.
pub fn lifted_add(t: &StateSet, u: &StateSet) -> StateSet {
    let mut out = StateSet::new();
    for a in t {
        for b in u {
            if let Some(s) = add(a, b) {
                out.insert(s);
            }
        }
    }
    out
}

/// T ⪰ U: every element of T dominates some element of U.
/// Vacuously true for empty T; false for nonempty T with empty U.
pub fn lifted_geq(t: &StateSet, u: &StateSet) -> bool {
    t.iter().all(|a| u.iter().any(|b| geq(a, b)))
}

/// A finite sub-universe of Sigma, used for exhaustive checks (axioms,
/// unbounded monotonicity of loop conditions).
#[derive(Clone, Debug)]
pub struct UniverseSpec {
    /// Per-variable candidate values (a variable may also be absent).
    pub vars: Vec<(String, Vec<Value>)>,
    /// Heap cells, each ranging over `cell_values` with any grid permission.
    pub cells: Vec<HeapKey>,
    pub cell_values: Vec<Value>,
    /// Predicate instances, each with any grid permission.
    pub preds: Vec<PredKey>,
    pub gran: i64,
}

impl UniverseSpec {
    /// Enumerate every state of the sub-universe.
    pub fn enumerate(&self) -> Vec<State> {
        let step = Frac::new(1, self.gran);
        let mut acc = alloc::vec![State::unit()];
        for (x, vals) in &self.vars {
            let mut next = Vec::with_capacity(acc.len() * (vals.len() + 1));
            for s in &acc {
                next.push(s.clone());
                for v in vals {
                    let mut s2 = s.clone();
                    s2.store.insert(x.clone(), *v);
                    next.push(s2);
                }
            }
            acc = next;
        }
        for key in &self.cells {
            let mut next = Vec::new();
            for s in &acc {
                next.push(s.clone());
                for k in 1..=self.gran {
                    for v in &self.cell_values {
                        let mut s2 = s.clone();
                        s2.set_heap(key.clone(), step * Frac::new(k, 1), *v);
                        next.push(s2);
                    }
                }
            }
            acc = next;
        }
        for key in &self.preds {
            let mut next = Vec::new();
            for s in &acc {
                next.push(s.clone());
                for k in 1..=self.gran {
                    let mut s2 = s.clone();
                    s2.set_pred(key.clone(), step * Frac::new(k, 1));
                    next.push(s2);
                }
            }
            acc = next;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(
        store: &[(&str, Value)],
        heap: &[(u32, &str, i64, i64, Value)],
        preds: &[(&str, &[Value], i64, i64)],
    ) -> State {
        let mut s = State::unit();
        for (x, v) in store {
            s.store.insert((*x).into(), *v);
        }
        for (r, f, n, d, v) in heap {
            s.set_heap((*r, (*f).into()), frac(*n, *d), *v);
        }
        for (name, args, n, d) in preds {
            s.set_pred(((*name).into(), args.to_vec()), frac(*n, *d));
        }
        s
    }

    #[test]
    fn add_unit_is_neutral() {
        let phi = st(
            &[("x", Value::Ref(0))],
            &[(0, "f", 1, 2, Value::Int(5))],
            &[("Q", &[Value::Ref(0)], 1, 1)],
        );
        assert_eq!(add(&State::unit(), &phi), Some(phi.clone()));
        assert_eq!(add(&phi, &State::unit()), Some(phi));
    }

    #[test]
    fn add_sums_permissions_with_value_agreement() {
        let half = st(&[("x", Value::Ref(0))], &[(0, "f", 1, 2, Value::Int(5))], &[]);
        let full = st(&[("x", Value::Ref(0))], &[(0, "f", 1, 1, Value::Int(5))], &[]);
        assert_eq!(add(&half, &half), Some(full.clone()));
        // Exceeding 1 is undefined.
        assert_eq!(add(&full, &half), None);
        // Value disagreement is undefined.
        let other = st(&[("x", Value::Ref(0))], &[(0, "f", 1, 2, Value::Int(7))], &[]);
        assert_eq!(add(&half, &other), None);
    }

    #[test]
    fn add_incompatible_stores_undefined() {
        let a = st(&[("x", Value::Ref(0))], &[], &[]);
        let b = st(&[("x", Value::Ref(1))], &[], &[]);
        assert_eq!(add(&a, &b), None);
    }

    #[test]
    fn geq_examples() {
        let full = st(&[], &[(0, "f", 1, 1, Value::Int(5))], &[]);
        let half5 = st(&[], &[(0, "f", 1, 2, Value::Int(5))], &[]);
        let half7 = st(&[], &[(0, "f", 1, 2, Value::Int(7))], &[]);
        assert!(geq(&full, &half5));
        assert!(!geq(&half5, &half7));
        assert!(geq(&full, &State::unit()));
    }

    #[test]
    fn decompose_splits_store_from_resources() {
        let phi = st(&[("x", Value::Int(1))], &[(0, "f", 1, 1, Value::Int(5))], &[]);
        let (core, impure, vars) = decompose(&phi);
        assert_eq!(core, st(&[("x", Value::Int(1))], &[], &[]));
        assert_eq!(impure, st(&[], &[(0, "f", 1, 1, Value::Int(5))], &[]));
        assert_eq!(vars.into_iter().collect::<Vec<_>>(), ["x"]);
        assert_eq!(add(&phi.core(), &phi.impure()), Some(phi));
    }

    #[test]
    fn substates_within_halves() {
        let half = st(&[], &[(0, "f", 1, 2, Value::Int(5))], &[]);
        let quarter = st(&[], &[(0, "f", 1, 4, Value::Int(5))], &[]);
        let t: StateSet = [half.clone()].into();
        let close = substates_within(&t, 4);
        assert_eq!(
            close,
            [State::unit(), quarter, half].into_iter().collect::<StateSet>()
        );
        assert_eq!(substates_within(&StateSet::new(), 4), StateSet::new());
        let u: StateSet = [State::unit()].into();
        assert_eq!(substates_within(&u, 4), u);
    }

    #[test]
    fn lifted_ops() {
        let half = st(&[], &[(0, "f", 1, 2, Value::Int(5))], &[]);
        let t: StateSet = [half.clone(), State::unit()].into();
        let u: StateSet = [State::unit()].into();
        assert_eq!(lifted_add(&u, &t), t);
        assert!(lifted_geq(&StateSet::new(), &t));
        assert!(!lifted_geq(&t, &StateSet::new()));
        assert!(lifted_geq(&t, &u));
    }

    #[test]
    fn geq_matches_existential_witness_oracle() {
        // geq by subtraction must agree with exists-c enumeration.
        let spec = UniverseSpec {
            vars: alloc::vec![("x".into(), alloc::vec![Value::Int(0), Value::Int(1)])],
            cells: alloc::vec![(0, "f".into())],
            cell_values: alloc::vec![Value::Int(0), Value::Int(1)],
            preds: alloc::vec![("Q".into(), alloc::vec![Value::Ref(0)])],
            gran: 2,
        };
        let all = spec.enumerate();
        for a in &all {
            for b in &all {
                let witness = all.iter().any(|c| add(b, c).as_ref() == Some(a));
                assert_eq!(geq(a, b), witness, "a={a:?} b={b:?}");
            }
        }
    }
}
