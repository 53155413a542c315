//! Analysis reports and their canonical JSON form (`dfc-report/1`).

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::model_ir_emit::{canonical_json, ext_f64};

pub const REPORT_SCHEMA: &str = "dfc-report/1";
/// Witnesses kept in a report; the strongest is always kept separately.
pub const MAX_WITNESSES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    NotRefuted,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::NotRefuted => "not-refuted",
        }
    }

    /// CLI exit code: 0 unless refuted.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Fail => 2,
            _ => 0,
        }
    }
}

/// Evidence for one failing sample. `value` is the relaxation side, `reference`
/// the hull side, `margin = value − reference` unless a check documents
/// another gap.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub sample: usize,
    pub direction: Vec<f64>,
    pub point: Vec<f64>,
    pub value: f64,
    pub reference: f64,
    pub margin: f64,
    pub box_active: bool,
}

impl Witness {
    fn to_value(&self) -> Value {
        json!({
            "sample": self.sample,
            "direction": self.direction.iter().map(|v| ext_f64(*v)).collect::<Vec<_>>(),
            "point": self.point.iter().map(|v| ext_f64(*v)).collect::<Vec<_>>(),
            "value": ext_f64(self.value),
            "reference": ext_f64(self.reference),
            "margin": ext_f64(self.margin),
            "box_active": self.box_active,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub check: String,
    pub method: Option<String>,
    /// `sampled` or `exact`.
    pub mode: String,
    pub verdict: Verdict,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub box_radius: f64,
    /// Samples whose relaxation optimum touched the artificial box.
    pub box_active: usize,
    /// Number of failing samples; `witnesses` holds the first few by index.
    pub failures: usize,
    pub witnesses: Vec<Witness>,
    pub strongest: Option<Witness>,
    pub notes: Vec<String>,
    pub elapsed: Duration,
}

impl AnalysisReport {
    pub fn new(check: &str, mode: &str) -> Self {
        AnalysisReport {
            check: check.into(),
            method: None,
            mode: mode.into(),
            verdict: Verdict::NotRefuted,
            samples: 0,
            seed: 0,
            tol: 0.0,
            box_radius: 0.0,
            box_active: 0,
            failures: 0,
            witnesses: Vec::new(),
            strongest: None,
            notes: Vec::new(),
            elapsed: Duration::ZERO,
        }
    }

    /// Records failing samples (in sample order) and sets the verdict; `clean`
    /// is the verdict when nothing fails.
    pub fn conclude(&mut self, mut failing: Vec<Witness>, clean: Verdict) {
        failing.sort_by_key(|w| w.sample);
        self.failures = failing.len();
        self.strongest = failing.iter().max_by(|a, b| a.margin.total_cmp(&b.margin)).cloned();
        failing.truncate(MAX_WITNESSES);
        self.witnesses = failing;
        self.verdict = if self.failures > 0 { Verdict::Fail } else { clean };
    }

    pub fn is_fail(&self) -> bool {
        self.verdict == Verdict::Fail
    }

    pub fn to_value(&self, with_timing: bool) -> Value {
        let mut v = json!({
            "schema": REPORT_SCHEMA,
            "check": self.check,
            "method": self.method,
            "mode": self.mode,
            "verdict": self.verdict.name(),
            "samples": self.samples,
            "seed": self.seed,
            "tol": ext_f64(self.tol),
            "box_radius": ext_f64(self.box_radius),
            "box_active": self.box_active,
            "failures": self.failures,
            "witnesses": self.witnesses.iter().map(Witness::to_value).collect::<Vec<_>>(),
            "strongest": self.strongest.as_ref().map(Witness::to_value),
            "notes": self.notes,
        });
        if with_timing {
            v["elapsed_ms"] = json!(self.elapsed.as_secs_f64() * 1e3);
        }
        v
    }

    /// Canonical JSON without timings, byte-stable for fixed inputs.
    pub fn to_json(&self) -> String {
        canonical_json(&self.to_value(false))
    }

    /// One-line summary for terminals.
    pub fn summary(&self) -> String {
        let mut s = format!("{} [{}]: {} ({} samples", self.check, self.mode, self.verdict.name(), self.samples);
        if self.failures > 0 {
            s.push_str(&format!(", {} failing", self.failures));
        }
        s.push(')');
        if let Some(w) = &self.strongest {
            s.push_str(&format!("; strongest margin {:.6e} at sample {}", w.margin, w.sample));
        }
        s
    }
}
