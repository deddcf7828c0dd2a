//! Run configuration: the finite value universe and permission granularity.
//!
//! Every enumeration in the toolkit (model sets, havoc, axiom checks, the
//! semantic PC probes) draws its candidates from here, which is what keeps
//! the whole state space finite and the checks decidable.

use alloc::vec::Vec;

use crate::sepalg::{Frac, Value};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Config {
    /// Inclusive integer range.
    pub int_min: i64,
    pub int_max: i64,
    /// Number of non-null references r0..r(k-1).
    pub refs: u32,
    /// Permission granularity G: all permission amounts are multiples of 1/G.
    pub gran: i64,
    /// Whether the structural checkers match nondeterministic choices
    /// between the two executions of a self-composition probe.
    pub determinize: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            int_min: 0,
            int_max: 2,
            refs: 2,
            gran: 4,
            determinize: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Type {
    Int,
    Bool,
    Ref,
    Perm,
}

impl Type {
    pub fn keyword(self) -> &'static str {
        match self {
            Type::Int => "Int",
            Type::Bool => "Bool",
            Type::Ref => "Ref",
            Type::Perm => "Perm",
        }
    }
}

impl Config {
    pub fn int_values(&self) -> Vec<Value> {
        (self.int_min..=self.int_max).map(Value::Int).collect()
    }

    /// Reference-typed values: null plus the configured references.
    pub fn ref_values(&self) -> Vec<Value> {
        let mut vs = Vec::with_capacity(self.refs as usize + 1);
        vs.push(Value::Null);
        for r in 0..self.refs {
            vs.push(Value::Ref(r));
        }
        vs
    }

    pub fn bool_values(&self) -> Vec<Value> {
        [Value::Bool(false), Value::Bool(true)].into()
    }

    /// The whole value universe; this is the domain of unconstrained heap
    /// cell values.
    pub fn all_values(&self) -> Vec<Value> {
        let mut vs = self.int_values();
        vs.extend(self.bool_values());
        vs.extend(self.ref_values());
        vs
    }

    pub fn values_of(&self, ty: Type) -> Vec<Value> {
        match ty {
            Type::Int => self.int_values(),
            Type::Bool => self.bool_values(),
            Type::Ref => self.ref_values(),
            Type::Perm => Vec::new(),
        }
    }

    /// All nonzero permission amounts k/G, k = 1..=G.
    pub fn fracs_nonzero(&self) -> Vec<Frac> {
        (1..=self.gran).map(|k| Frac::new(k, self.gran)).collect()
    }

    /// All permission amounts k/G including zero.
    pub fn fracs(&self) -> Vec<Frac> {
        (0..=self.gran).map(|k| Frac::new(k, self.gran)).collect()
    }

    /// Whether a fraction is representable at this granularity (a multiple
    /// of 1/G inside [0,1]).
    pub fn on_grid(&self, f: Frac) -> bool {
        f >= Frac::new(0, 1)
            && f <= Frac::new(1, 1)
            && (f * Frac::new(self.gran, 1)).is_integer()
    }

    pub fn contains_value(&self, v: Value) -> bool {
        match v {
            Value::Int(i) => i >= self.int_min && i <= self.int_max,
            Value::Bool(_) => true,
            Value::Null => true,
            Value::Ref(r) => r < self.refs,
        }
    }
}
