//! The `mvl` command line: verify, inline, check-pc, harness, corpus.
//!
//! Exit codes: 0 success/pass; verify and inline use 1 for a verification
//! failure; check-pc uses 2 for a rejected preservation condition; harness
//! and corpus use 1 for violations/mismatches; 3 means the command itself
//! could not run (bad arguments, unreadable or ill-formed input).
//!
//! Parallel work (`--jobs`) fans out over corpus files and harness case
//! indices; results are buffered per task and reduced in canonical order,
//! so the report bytes do not depend on the degree of parallelism.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use mvl_core::lang::ast::declared_types;
use mvl_core::lang::{parse, pretty_program, well_formed, Annotation, ParsedFile};
use mvl_core::oracle::{case_seed, harness_config, run_case, CaseOutcome, TheoremKind};
use mvl_core::pc::{check_pc, check_syntactic, Backend};
use mvl_core::semantics::{exec, verify_program, ExecCtx};
use mvl_core::transform::{assert_annot, inline_program};
use mvl_core::{Config, State};

use crate::corpus::{corpus_files, default_corpus_dir, run_file};
use crate::report::{FailureOut, HarnessOut, Report, ViolationOut};
use crate::runcfg::{resolve, Overrides, RunConfig, Settings};

/// Fixed fan-out unit for harness runs: chunk boundaries (and therefore
/// the exact set of seeds evaluated under early stopping) are independent
/// of the worker count.
const HARNESS_CHUNK: usize = 64;

#[derive(Parser, Debug)]
#[command(name = "mvl", version, about = "mini separation-logic verification toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    common: CommonFlags,
}

#[derive(Args, Debug, Clone)]
struct CommonFlags {
    /// Emit the report as JSON instead of plain text.
    #[arg(long, global = true)]
    json: bool,
    /// Integer universe as A..B.
    #[arg(long, global = true, value_name = "A..B")]
    ints: Option<String>,
    /// Number of non-null references.
    #[arg(long, global = true, value_name = "K")]
    refs: Option<u32>,
    /// Permission granularity G (amounts are multiples of 1/G).
    #[arg(long, global = true, value_name = "G")]
    gran: Option<i64>,
    /// Match nondeterministic choices in structural probes (true/false).
    #[arg(long, global = true, value_name = "BOOL")]
    determinize: Option<bool>,
    /// Base random seed.
    #[arg(long, global = true, value_name = "S")]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, value_name = "J")]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Modular verification of a .mvl file with its annotation.
    Verify {
        file: PathBuf,
    },
    /// Print the inlined program and verify it under the empty annotation.
    Inline {
        file: PathBuf,
        /// Inlining bound.
        #[arg(long, value_name = "N")]
        bound: Option<usize>,
        /// Assert the file's annotation before inlining.
        #[arg(long)]
        with_annotations: bool,
    },
    /// Check the preservation condition of a .mvl file.
    CheckPc {
        file: PathBuf,
        /// Inlining bound.
        #[arg(long, value_name = "N")]
        bound: Option<usize>,
        /// Checker backend: semantic, structural, or syntactic.
        #[arg(long, value_name = "M")]
        mode: Option<String>,
    },
    /// Run a theorem harness: T1, T2, T3, or corollary.
    Harness {
        kind: String,
        /// Number of cases (T1, T2) or cases with a true premise (T3,
        /// corollary).
        #[arg(long, value_name = "B")]
        budget: Option<usize>,
    },
    /// Check every corpus file against its EXPECT header.
    Corpus {
        /// Corpus directory; defaults to the bundled corpus.
        dir: Option<PathBuf>,
    },
}

fn overrides_from_flags(c: &CommonFlags) -> Overrides {
    Overrides {
        ints: c.ints.clone(),
        refs: c.refs,
        gran: c.gran,
        determinize: c.determinize,
        seed: c.seed,
        jobs: c.jobs,
        bound: None,
        mode: None,
        budget: None,
    }
}

fn load_file(path: &PathBuf) -> Result<ParsedFile, String> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read '{}': {e}", path.display()))?;
    let pf = parse(&src).map_err(|e| format!("{}: {}", path.display(), e.render()))?;
    let errs = well_formed(&pf.program, &pf.annotation);
    if !errs.is_empty() {
        return Err(format!("{}: {}", path.display(), errs.join("; ")));
    }
    Ok(pf)
}

fn exec_stmt_ok(
    stmt: &mvl_core::lang::Stmt,
    pf_program: &mvl_core::lang::Program,
    cfg: &Config,
) -> Result<(), String> {
    let mut tyenv = BTreeMap::new();
    declared_types(stmt, &mut tyenv);
    let eps = Annotation::default();
    let ctx = ExecCtx::new(pf_program, &eps, cfg, &tyenv);
    exec(stmt, &State::unit(), ctx).map(|_| ()).map_err(|f| f.reason)
}

fn cmd_verify(file: &PathBuf, s: &Settings, report: &mut Report) -> Result<i32, String> {
    let pf = load_file(file)?;
    match verify_program(&pf.program, &pf.annotation, &s.run.core()) {
        Ok(()) => {
            report.verdict = "pass".into();
            Ok(0)
        }
        Err(f) => {
            report.verdict = "fail".into();
            report.message = Some(f.reason);
            Ok(1)
        }
    }
}

fn cmd_inline(
    file: &PathBuf,
    bound: usize,
    with_annotations: bool,
    s: &Settings,
    report: &mut Report,
) -> Result<i32, String> {
    let pf = load_file(file)?;
    let base = if with_annotations {
        assert_annot(&pf.program, &pf.annotation)
    } else {
        pf.program.clone()
    };
    let inl = inline_program(&base, bound)?;
    let mut show = base.clone();
    show.methods.retain(|m| m.is_library());
    show.init = inl.stmt.clone();
    report.inlined = Some(pretty_program(&show, &Annotation::default()));
    match exec_stmt_ok(&inl.stmt, &base, &s.run.core()) {
        Ok(()) => {
            report.verdict = "pass".into();
            Ok(0)
        }
        Err(reason) => {
            report.verdict = "fail".into();
            report.message = Some(reason);
            Ok(1)
        }
    }
}

fn cmd_check_pc(
    file: &PathBuf,
    bound: usize,
    mode: &str,
    s: &Settings,
    report: &mut Report,
) -> Result<i32, String> {
    let pf = load_file(file)?;
    let cfg = s.run.core();
    match mode {
        "syntactic" => {
            let v = check_syntactic(&pf.program, &pf.annotation);
            if v.passes() {
                report.verdict = "pass".into();
                Ok(0)
            } else {
                report.verdict = "fail".into();
                report.failures = v
                    .reasons
                    .iter()
                    .map(|r| FailureOut {
                        site: "program".into(),
                        clause: "syntactic".into(),
                        kind: "reject".into(),
                        phi1: None,
                        phi2: None,
                        frame: None,
                        detail: r.clone(),
                    })
                    .collect();
                Ok(2)
            }
        }
        "semantic" | "structural" => {
            let backend =
                if mode == "semantic" { Backend::Semantic } else { Backend::Structural };
            let v = check_pc(&pf.program, &pf.annotation, bound, backend, &cfg);
            report.set_pc(&v, cfg.gran);
            Ok(if v.passes() { 0 } else { 2 })
        }
        other => Err(format!("unknown mode '{other}' (semantic, structural, syntactic)")),
    }
}

fn default_budget(kind: TheoremKind) -> usize {
    match kind {
        TheoremKind::T1 => 5_000,
        TheoremKind::T2 => 2_000,
        TheoremKind::T3 => 500,
        TheoremKind::Corollary => 300,
    }
}

/// Chunked harness run: evaluates whole fixed-size chunks of case indices
/// (in parallel within a chunk) and applies the early-stop rule only at
/// chunk boundaries, so the evaluated seed set is scheduling-independent.
fn run_harness_chunked(
    kind: TheoremKind,
    budget: usize,
    base_seed: u64,
    cfg: &Config,
) -> (Vec<CaseOutcome>, usize) {
    let premise_target = matches!(kind, TheoremKind::T3 | TheoremKind::Corollary);
    let max_attempts = if premise_target { budget.saturating_mul(40) } else { budget };
    let mut outcomes: Vec<CaseOutcome> = Vec::new();
    let mut premise_held = 0usize;
    let mut start = 0usize;
    while start < max_attempts {
        if premise_target && premise_held >= budget {
            break;
        }
        let end = (start + HARNESS_CHUNK).min(max_attempts);
        let chunk: Vec<CaseOutcome> = (start..end)
            .into_par_iter()
            .map(|i| run_case(kind, case_seed(base_seed, i), cfg))
            .collect();
        premise_held += chunk.iter().filter(|o| o.premise).count();
        outcomes.extend(chunk);
        start = end;
    }
    (outcomes, premise_held)
}

fn cmd_harness(kind: &str, budget: Option<usize>, s: &Settings, report: &mut Report) -> Result<i32, String> {
    let kind = TheoremKind::parse(kind)
        .ok_or_else(|| format!("unknown theorem kind '{kind}' (T1, T2, T3, corollary)"))?;
    let budget = budget.or(s.budget).unwrap_or_else(|| default_budget(kind));
    let cfg = s.run.core();
    let (outcomes, premise_held) = run_harness_chunked(kind, budget, s.run.seed, &cfg);
    let violations: Vec<ViolationOut> = outcomes
        .iter()
        .filter_map(|o| o.violation.as_ref())
        .map(|v| ViolationOut {
            seed: v.seed,
            detail: v.detail.clone(),
            program: v.program.clone(),
        })
        .collect();
    let ok = violations.is_empty();
    report.harness = Some(HarnessOut {
        kind: kind.name().to_string(),
        budget,
        cases: outcomes.len(),
        premise_held,
        base_seed: s.run.seed,
        violations,
    });
    report.verdict = if ok { "pass" } else { "fail" }.into();
    Ok(if ok { 0 } else { 1 })
}

fn cmd_corpus(dir: Option<&PathBuf>, s: &Settings, report: &mut Report) -> Result<i32, String> {
    let dir = dir.cloned().unwrap_or_else(default_corpus_dir);
    let files = corpus_files(&dir)?;
    if files.is_empty() {
        return Err(format!("no .mvl files in '{}'", dir.display()));
    }
    let base = s.run.core();
    let rows: Vec<_> = files.par_iter().map(|p| run_file(p, &base)).collect();
    let ok = rows.iter().all(|r| r.ok);
    report.corpus = rows;
    report.verdict = if ok { "pass" } else { "fail" }.into();
    Ok(if ok { 0 } else { 1 })
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // clap's own help/version output still goes to the right
            // stream; anything else is a usage error.
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if is_help { 0 } else { 3 };
        }
    };

    // The harness defaults to its own small universe; everything else to
    // the toolkit default.
    let base = if matches!(cli.cmd, Cmd::Harness { .. }) {
        let h = harness_config();
        RunConfig {
            int_min: h.int_min,
            int_max: h.int_max,
            refs: h.refs,
            gran: h.gran,
            determinize: h.determinize,
            seed: 0,
            jobs: 1,
        }
    } else {
        RunConfig::default()
    };
    let settings = match resolve(base, overrides_from_flags(&cli.common)) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 3;
        }
    };

    let command = match &cli.cmd {
        Cmd::Verify { .. } => "verify",
        Cmd::Inline { .. } => "inline",
        Cmd::CheckPc { .. } => "check-pc",
        Cmd::Harness { .. } => "harness",
        Cmd::Corpus { .. } => "corpus",
    };
    let mut report = Report::new(command, &settings.run);
    let started = Instant::now();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.run.jobs)
        .build();
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot build thread pool: {e}");
            return 3;
        }
    };

    let outcome = pool.install(|| match &cli.cmd {
        Cmd::Verify { file } => cmd_verify(file, &settings, &mut report),
        Cmd::Inline { file, bound, with_annotations } => {
            let bound = bound.or(settings.bound).unwrap_or(1);
            cmd_inline(file, bound, *with_annotations, &settings, &mut report)
        }
        Cmd::CheckPc { file, bound, mode } => {
            let bound = bound.or(settings.bound).unwrap_or(1);
            let mode = mode
                .clone()
                .or_else(|| settings.mode.clone())
                .unwrap_or_else(|| "semantic".to_string());
            cmd_check_pc(file, bound, &mode, &settings, &mut report)
        }
        Cmd::Harness { kind, budget } => cmd_harness(kind, *budget, &settings, &mut report),
        Cmd::Corpus { dir } => cmd_corpus(dir.as_ref(), &settings, &mut report),
    });

    let code = match outcome {
        Ok(code) => code,
        Err(e) => {
            report.verdict = "error".into();
            report.message = Some(e);
            3
        }
    };
    report.timing_ms = started.elapsed().as_millis();
    if cli.common.json {
        print!("{}", report.to_json());
    } else {
        print!("{}", report.to_text());
    }
    code
}
