//! Language front end: AST, parser, pretty-printer, well-formedness, and
//! assertion semantics (model sets and expression evaluation).

pub mod assertion;
pub mod ast;
pub mod parse;
pub mod pretty;
pub mod wf;

pub use assertion::{
    eval_assertion_bool, eval_expr, model_set, model_states, rename_assertion, rename_expr,
    rename_stmt, sat_intuitionistic, scale_state, Env, EnvVal, EvalError, EvalVal, ModelElem,
};
pub use ast::*;
pub use parse::{parse, parse_assertion_str, parse_stmt_block, ParseError, ParsedFile};
pub use pretty::{pretty_assertion, pretty_expr, pretty_program};
pub use wf::{method_var_types, well_formed};

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1_SRC: &str = r#"
predicate Q(a: Ref)

method acquire(a: Ref)
  requires acc(Q(a), 1/1)
  ensures acc(Q(a), 1/1) * acc(a.crLock, 1/1)

method release(a: Ref)
  requires acc(Q(a), 1/1) * acc(a.crLock, 1/1)
  ensures acc(Q(a), 1/1)

method alloc() returns (c: Ref)
  ensures acc(Q(c), 1/1)

method n(a: Ref)
  requires acc(Q(a), 1/1)
  ensures true
{
  acquire(a)
  release(a)
}

init {
  var a: Ref, b: Ref
  a := alloc()
  b := alloc()
  n(a)
}
"#;

    #[test]
    fn parse_fig1_shape() {
        let pf = parse(FIG1_SRC).expect("parse");
        assert_eq!(pf.program.preds.len(), 1);
        assert_eq!(pf.program.methods.len(), 4);
        let n = pf.program.method("n").unwrap();
        assert!(n.body.is_some());
        assert!(n.spec.is_none());
        assert!(pf.annotation.methods.contains_key("n"));
        let acq = pf.program.method("acquire").unwrap();
        assert!(acq.is_library());
        assert!(acq.spec.is_some());
        assert_eq!(well_formed(&pf.program, &pf.annotation), Vec::<String>::new());
    }

    #[test]
    fn roundtrip_pretty_parse() {
        let pf = parse(FIG1_SRC).expect("parse");
        let printed = pretty_program(&pf.program, &pf.annotation);
        let pf2 = parse(&printed).expect("reparse");
        assert_eq!(pf.program, pf2.program);
        assert_eq!(pf.annotation, pf2.annotation);
    }

    #[test]
    fn binder_spec_parses_and_roundtrips() {
        let src = r#"
predicate L(a: Ref, v: Int)

method get(a: Ref) returns (x: Int)
  requires acc(L(a, ?v), 1/2)
  ensures acc(L(a, v), 1/2) * x == v

init { }
"#;
        let pf = parse(src).expect("parse");
        let get = pf.program.method("get").unwrap();
        let spec = get.spec.as_ref().unwrap();
        assert_eq!(spec.binders, alloc::vec![("v".into(), crate::config::Type::Int)]);
        let printed = pretty_program(&pf.program, &pf.annotation);
        let pf2 = parse(&printed).expect("reparse");
        assert_eq!(pf.program, pf2.program);
    }

    #[test]
    fn loop_invariants_and_ids() {
        let src = r#"
init {
  var i: Int, n: Int
  i := 0
  while (i < n) invariant i <= n {
    i := i + 1
  }
  while (true) { skip }
}
"#;
        let pf = parse(src).expect("parse");
        assert!(pf.annotation.loops.contains_key(&0));
        assert!(!pf.annotation.loops.contains_key(&1));
        let printed = pretty_program(&pf.program, &pf.annotation);
        let pf2 = parse(&printed).expect("reparse");
        assert_eq!(pf.annotation, pf2.annotation);
    }

    #[test]
    fn wf_rejects_errors() {
        let src = r#"
method m() { x := 1 }
init { m(); q() }
"#;
        let pf = parse(src).expect("parse");
        let errs = well_formed(&pf.program, &pf.annotation);
        assert!(errs.iter().any(|e| e.contains("undeclared variable 'x'")));
        assert!(errs.iter().any(|e| e.contains("unknown method 'q'")));
    }

    #[test]
    fn wf_rejects_reserved_separator() {
        let src = "init { var x$0: Int }";
        let pf = parse(src).expect("parse");
        let errs = well_formed(&pf.program, &pf.annotation);
        assert!(errs.iter().any(|e| e.contains("reserved")));
    }

    #[test]
    fn fold_statement_parses() {
        let src = r#"
predicate P(x: Ref) { acc(x.f, 1/1) }
init {
  var x: Ref
  inhale acc(x.f, 1/1)
  fold acc(P(x), 1/1)
  unfold acc(P(x), perm(P(x)))
}
"#;
        let pf = parse(src).expect("parse");
        assert_eq!(well_formed(&pf.program, &pf.annotation), Vec::<String>::new());
        let printed = pretty_program(&pf.program, &pf.annotation);
        assert_eq!(parse(&printed).unwrap().program, pf.program);
    }
}
