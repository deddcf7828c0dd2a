//! The JSON report emitted by every command, plus its plain-text
//! rendering. Field order is fixed by the struct definitions and all
//! collections are emitted in canonical order, so reports are byte-stable
//! apart from the timing field.

use mvl_core::pc::{PCFailure, PCVerdict, Status};
use serde::Serialize;

use crate::runcfg::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub config: RunConfig,
    /// "pass", "fail", "inconclusive", or "error".
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<FailureOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inlined: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub harness: Option<HarnessOut>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub corpus: Vec<CorpusFileOut>,
    /// Wall-clock milliseconds; the one field excluded from determinism
    /// comparisons.
    pub timing_ms: u128,
}

#[derive(Clone, Debug, Serialize)]
pub struct FailureOut {
    pub site: String,
    pub clause: String,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi1: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi2: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<String>,
    pub detail: String,
}

impl FailureOut {
    pub fn from_pc(f: &PCFailure, gran: i64) -> FailureOut {
        FailureOut {
            site: f.site.clone(),
            clause: f.clause.name().to_string(),
            kind: f.kind.name().to_string(),
            phi1: f.phi1.as_ref().map(|s| s.render(gran)),
            phi2: f.phi2.as_ref().map(|s| s.render(gran)),
            frame: f.frame.as_ref().map(|s| s.render(gran)),
            detail: f.detail.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HarnessOut {
    pub kind: String,
    pub budget: usize,
    pub cases: usize,
    pub premise_held: usize,
    pub base_seed: u64,
    pub violations: Vec<ViolationOut>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ViolationOut {
    pub seed: u64,
    pub detail: String,
    pub program: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct CorpusFileOut {
    pub file: String,
    pub ok: bool,
    pub checks: Vec<CheckOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckOut {
    pub item: String,
    pub expected: String,
    pub actual: String,
    pub ok: bool,
}

impl Report {
    pub fn new(command: &str, config: &RunConfig) -> Report {
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config: config.clone(),
            verdict: String::new(),
            message: None,
            failures: Vec::new(),
            inlined: None,
            harness: None,
            corpus: Vec::new(),
            timing_ms: 0,
        }
    }

    pub fn set_pc(&mut self, v: &PCVerdict, gran: i64) {
        self.verdict = match v.status() {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
        }
        .to_string();
        self.failures = v.failures.iter().map(|f| FailureOut::from_pc(f, gran)).collect();
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Plain-text rendering for terminal use.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(text) = &self.inlined {
            out.push_str(text);
            if !text.ends_with('\n') {
                out.push('\n');
            }
        }
        out.push_str(&format!("{}: {}\n", self.command, self.verdict));
        if let Some(m) = &self.message {
            out.push_str(&format!("  {m}\n"));
        }
        for f in &self.failures {
            out.push_str(&format!("  [{}/{}] {}: {}\n", f.clause, f.kind, f.site, f.detail));
            if let Some(s) = &f.phi1 {
                out.push_str(&format!("    phi1:  {s}\n"));
            }
            if let Some(s) = &f.phi2 {
                out.push_str(&format!("    phi2:  {s}\n"));
            }
            if let Some(s) = &f.frame {
                out.push_str(&format!("    frame: {s}\n"));
            }
        }
        if let Some(h) = &self.harness {
            out.push_str(&format!(
                "  {}: {} cases, {} with premise, {} violations (seed {})\n",
                h.kind,
                h.cases,
                h.premise_held,
                h.violations.len(),
                h.base_seed
            ));
            for v in &h.violations {
                out.push_str(&format!("  violation (seed {}): {}\n", v.seed, v.detail));
                for line in v.program.lines() {
                    out.push_str(&format!("    | {line}\n"));
                }
            }
        }
        for c in &self.corpus {
            if c.ok {
                out.push_str(&format!("  {}: ok\n", c.file));
            } else if let Some(e) = &c.error {
                out.push_str(&format!("  {}: error: {e}\n", c.file));
            } else {
                out.push_str(&format!("  {}: MISMATCH\n", c.file));
                for ch in &c.checks {
                    if !ch.ok {
                        out.push_str(&format!(
                            "    {} expected {} but got {}\n",
                            ch.item, ch.expected, ch.actual
                        ));
                    }
                }
            }
        }
        out
    }
}
