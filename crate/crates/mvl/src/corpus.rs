//! The `.mvl` corpus format: programs with a `// CONFIG:` line fixing the
//! finite universe and one or more `// EXPECT:` lines pinning the verdict
//! of each command on that file.
//!
//! Supported expectation items:
//!
//! - `verify=pass|fail`            modular verification with the file's
//!                                 annotation
//! - `inline(N)=pass|fail`         inlining at bound N under the empty
//!                                 annotation
//! - `inline+ann(N)=pass|fail`     assert the file's annotation, then
//!                                 inline at bound N
//! - `pc(semantic,N)=pass|fail`    preservation condition, semantic leaves
//! - `pc(structural,N)=pass|fail`  preservation condition, structural
//!                                 probes (inconclusive counts as fail)
//! - `pc(syntactic)=pass|fail`     whole-program syntactic scan
//! - `search=some|none`            annotation search over the default
//!                                 lattice, above the file's annotation
//!                                 when it has one
//! - `maximal(N)=pass|fail`        maximal extensional annotation at bound
//!                                 N verifies and is supported

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mvl_core::lang::{parse, well_formed, Annotation, Program};
use mvl_core::oracle::{
    annotation_supported, default_lattice, maximal_annotation, search_annotation_limited,
};
use mvl_core::pc::{check_pc, check_syntactic, Backend, Status};
use mvl_core::semantics::{exec, verify_program, ExecCtx};
use mvl_core::transform::{assert_annot, inline_program};
use mvl_core::lang::ast::declared_types;
use mvl_core::{Config, State};

use crate::report::{CheckOut, CorpusFileOut};
use crate::runcfg::parse_ints;

/// Cap on annotation-search combinations per corpus file.
const SEARCH_LIMIT: usize = 20_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expectation {
    pub item: String,
    pub expected: String,
}

#[derive(Clone, Debug)]
pub struct FileSpec {
    pub config: Config,
    pub expectations: Vec<Expectation>,
}

/// Parse the `// CONFIG:` and `// EXPECT:` header comments. The base
/// config supplies anything the header leaves out.
pub fn parse_header(src: &str, base: &Config) -> Result<FileSpec, String> {
    let mut config = base.clone();
    let mut expectations = Vec::new();
    for line in src.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("// CONFIG:") {
            for tok in rest.split_whitespace() {
                let (k, v) = tok
                    .split_once('=')
                    .ok_or_else(|| format!("bad CONFIG entry '{tok}'"))?;
                match k {
                    "ints" => {
                        let (lo, hi) = parse_ints(v)?;
                        config.int_min = lo;
                        config.int_max = hi;
                    }
                    "refs" => {
                        config.refs =
                            v.parse().map_err(|_| format!("bad refs '{v}'"))?;
                    }
                    "gran" => {
                        config.gran =
                            v.parse().map_err(|_| format!("bad gran '{v}'"))?;
                    }
                    "determinize" => {
                        config.determinize = match v {
                            "on" => true,
                            "off" => false,
                            _ => return Err(format!("bad determinize '{v}'")),
                        };
                    }
                    _ => return Err(format!("unknown CONFIG key '{k}'")),
                }
            }
        } else if let Some(rest) = line.strip_prefix("// EXPECT:") {
            for tok in rest.split_whitespace() {
                let (item, expected) = tok
                    .split_once('=')
                    .ok_or_else(|| format!("bad EXPECT entry '{tok}'"))?;
                expectations.push(Expectation {
                    item: item.to_string(),
                    expected: expected.to_string(),
                });
            }
        }
    }
    Ok(FileSpec { config, expectations })
}

fn pass_fail(ok: bool) -> String {
    if ok { "pass" } else { "fail" }.to_string()
}

/// Inlined execution from the unit state under the empty annotation.
fn inline_verdict(p: &Program, n: usize, cfg: &Config) -> Result<bool, String> {
    let inl = inline_program(p, n)?;
    let mut tyenv = BTreeMap::new();
    declared_types(&inl.stmt, &mut tyenv);
    let eps = Annotation::default();
    let ctx = ExecCtx::new(p, &eps, cfg, &tyenv);
    Ok(exec(&inl.stmt, &State::unit(), ctx).is_ok())
}

fn parse_item(item: &str) -> Result<(String, Vec<String>), String> {
    match item.split_once('(') {
        None => Ok((item.to_string(), Vec::new())),
        Some((head, rest)) => {
            let inner = rest
                .strip_suffix(')')
                .ok_or_else(|| format!("bad expectation item '{item}'"))?;
            Ok((
                head.to_string(),
                inner.split(',').map(|s| s.trim().to_string()).collect(),
            ))
        }
    }
}

fn bound_arg(args: &[String], at: usize, item: &str) -> Result<usize, String> {
    args.get(at)
        .ok_or_else(|| format!("missing bound in '{item}'"))?
        .parse()
        .map_err(|_| format!("bad bound in '{item}'"))
}

/// Evaluate one expectation item, returning the actual verdict string.
pub fn eval_item(
    item: &str,
    program: &Program,
    ann: &Annotation,
    cfg: &Config,
) -> Result<String, String> {
    let (head, args) = parse_item(item)?;
    match head.as_str() {
        "verify" => Ok(pass_fail(verify_program(program, ann, cfg).is_ok())),
        "inline" => {
            let n = bound_arg(&args, 0, item)?;
            Ok(pass_fail(inline_verdict(program, n, cfg)?))
        }
        "inline+ann" => {
            let n = bound_arg(&args, 0, item)?;
            let asserted = assert_annot(program, ann);
            Ok(pass_fail(inline_verdict(&asserted, n, cfg)?))
        }
        "pc" => {
            let backend = args
                .first()
                .ok_or_else(|| format!("missing backend in '{item}'"))?;
            match backend.as_str() {
                "syntactic" => Ok(pass_fail(check_syntactic(program, ann).passes())),
                "semantic" | "structural" => {
                    let n = bound_arg(&args, 1, item)?;
                    let b = if backend == "semantic" {
                        Backend::Semantic
                    } else {
                        Backend::Structural
                    };
                    let v = check_pc(program, ann, n, b, cfg);
                    Ok(pass_fail(v.status() == Status::Pass))
                }
                other => Err(format!("unknown pc backend '{other}'")),
            }
        }
        "search" => {
            let floor = if ann.methods.is_empty() && ann.loops.is_empty() {
                None
            } else {
                Some(ann)
            };
            let lat = default_lattice(program, cfg);
            let found =
                search_annotation_limited(program, &lat, floor, cfg, SEARCH_LIMIT);
            Ok(if found.is_some() { "some" } else { "none" }.to_string())
        }
        "maximal" => {
            let n: i64 = args
                .first()
                .ok_or_else(|| format!("missing bound in '{item}'"))?
                .parse()
                .map_err(|_| format!("bad bound in '{item}'"))?;
            let ok = match maximal_annotation(program, n, cfg) {
                Err(_) => false,
                Ok(mr) => {
                    verify_program(&mr.program, &mr.annotation, cfg).is_ok()
                        && annotation_supported(&mr.annotation, &mr.program, cfg)
                }
            };
            Ok(pass_fail(ok))
        }
        other => Err(format!("unknown expectation item '{other}'")),
    }
}

/// Run every expectation of one corpus file.
pub fn run_file(path: &Path, base: &Config) -> CorpusFileOut {
    let file = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let mut out = CorpusFileOut { file, ok: false, checks: Vec::new(), error: None };
    let run = || -> Result<Vec<CheckOut>, String> {
        let src = std::fs::read_to_string(path).map_err(|e| format!("read: {e}"))?;
        let spec = parse_header(&src, base)?;
        if spec.expectations.is_empty() {
            return Err("no EXPECT header".to_string());
        }
        let pf = parse(&src).map_err(|e| format!("parse: {}", e.render()))?;
        let errs = well_formed(&pf.program, &pf.annotation);
        if !errs.is_empty() {
            return Err(format!("ill-formed: {}", errs.join("; ")));
        }
        let mut checks = Vec::new();
        for e in &spec.expectations {
            let actual = eval_item(&e.item, &pf.program, &pf.annotation, &spec.config)?;
            checks.push(CheckOut {
                item: e.item.clone(),
                expected: e.expected.clone(),
                ok: actual == e.expected,
                actual,
            });
        }
        Ok(checks)
    };
    match run() {
        Ok(checks) => {
            out.ok = checks.iter().all(|c| c.ok);
            out.checks = checks;
        }
        Err(e) => out.error = Some(e),
    }
    out
}

/// The corpus directory shipped with the crate.
pub fn default_corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Config {
        Config { int_min: 0, int_max: 1, refs: 1, gran: 2, determinize: true }
    }

    #[test]
    fn header_parses_config_and_expectations() {
        let src = "// a comment\n// CONFIG: ints=0..1 refs=2 gran=4 determinize=off\n\
                   // EXPECT: verify=pass inline(1)=fail\n// EXPECT: search=none\ninit { skip }\n";
        let spec = parse_header(src, &Config::default()).expect("header");
        assert_eq!(
            (spec.config.int_min, spec.config.int_max, spec.config.refs, spec.config.gran),
            (0, 1, 2, 4)
        );
        assert!(!spec.config.determinize);
        let items: Vec<_> = spec.expectations.iter().map(|e| e.item.as_str()).collect();
        assert_eq!(items, ["verify", "inline(1)", "search"]);
        assert_eq!(spec.expectations[2].expected, "none");
    }

    #[test]
    fn header_rejects_unknown_keys() {
        assert!(parse_header("// CONFIG: bound=2\n", &Config::default()).is_err());
        assert!(parse_header("// EXPECT: verify\n", &Config::default()).is_err());
    }

    #[test]
    fn eval_items_on_a_tiny_program() {
        let pf = parse("init { var x: Int x := 1 assert x == 1 }").expect("parse");
        let cfg = small();
        assert_eq!(eval_item("verify", &pf.program, &pf.annotation, &cfg).unwrap(), "pass");
        assert_eq!(eval_item("inline(1)", &pf.program, &pf.annotation, &cfg).unwrap(), "pass");
        assert_eq!(
            eval_item("pc(syntactic)", &pf.program, &pf.annotation, &cfg).unwrap(),
            "pass"
        );
        assert_eq!(
            eval_item("pc(semantic,1)", &pf.program, &pf.annotation, &cfg).unwrap(),
            "pass"
        );
        assert_eq!(eval_item("search", &pf.program, &pf.annotation, &cfg).unwrap(), "some");
        assert!(eval_item("pc(zap,1)", &pf.program, &pf.annotation, &cfg).is_err());
        assert!(eval_item("inline", &pf.program, &pf.annotation, &cfg).is_err());
    }

    #[test]
    fn failing_assert_flips_verdicts() {
        let pf = parse("init { var x: Int x := 1 assert x == 0 }").expect("parse");
        let cfg = small();
        assert_eq!(eval_item("verify", &pf.program, &pf.annotation, &cfg).unwrap(), "fail");
        assert_eq!(eval_item("inline(2)", &pf.program, &pf.annotation, &cfg).unwrap(), "fail");
    }

    #[test]
    fn bundled_corpus_dir_exists() {
        let files = corpus_files(&default_corpus_dir()).expect("corpus dir");
        assert!(files.len() >= 8, "bundled corpus unexpectedly small: {files:?}");
    }
}

/// All `.mvl` files of a directory in name order.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>, String> {
    let mut files = Vec::new();
    let rd = std::fs::read_dir(dir)
        .map_err(|e| format!("cannot read corpus directory '{}': {e}", dir.display()))?;
    for entry in rd {
        let entry = entry.map_err(|e| format!("corpus directory: {e}"))?;
        let p = entry.path();
        if p.extension().is_some_and(|x| x == "mvl") {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}
