//! Machine-readable result documents.
//!
//! A per-program [`Report`] and a corpus-level [`CorpusSummary`], both JSON
//! with a fixed key order and `"schema": 1`. Weights are exact and rendered as
//! strings (`"1.5"`, `"1/3"`). Timings are the only nondeterministic fields and
//! are kept under `timings_ms`, last in the document.

use serde::{Deserialize, Serialize};

use crate::frg::Frg;
use crate::partition::{residual_cost, saved_weight, PageAssignment};
use crate::psi::{code_size, OptimizedProgram};
use crate::weight::Weight;

pub const SCHEMA_VERSION: u32 = 1;

pub const MEAN_DEFINITION: &str =
    "unweighted arithmetic mean of per-program s_opt/s_naive over programs with a feasible naive placement";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageUsage {
    pub page: u32,
    pub used: u64,
    pub capacity: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub analysis: f64,
    pub frg: f64,
    pub partition: f64,
    pub psi: f64,
    pub naive: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub program: String,
    pub nof: usize,
    /// `None` when first-fit cannot place the naive program.
    pub s_naive: Option<u64>,
    pub s_opt: u64,
    pub psi_naive: Option<u64>,
    pub psi_opt: u64,
    pub ratio: Option<f64>,
    pub frg_total: Weight,
    pub residual: Weight,
    pub saved: Weight,
    pub pages: Vec<PageUsage>,
    pub timings_ms: Timings,
}

pub fn make_report(
    name: &str,
    naive: Option<&OptimizedProgram>,
    opt: &OptimizedProgram,
    frg: &Frg,
    assignment: &PageAssignment,
    timings: Timings,
) -> Report {
    let o = code_size(opt);
    let n = naive.map(code_size);
    let capacity = opt.program.config.page_size as u64;
    Report {
        schema: SCHEMA_VERSION,
        program: name.to_string(),
        nof: o.nof,
        s_naive: n.as_ref().map(|n| n.total),
        s_opt: o.total,
        psi_naive: n.as_ref().map(|n| n.psi_count),
        psi_opt: o.psi_count,
        ratio: n.as_ref().map(|n| ratio(o.total, n.total)),
        frg_total: frg.total_weight(),
        residual: residual_cost(frg, assignment),
        saved: saved_weight(frg, assignment),
        pages: o
            .page_used
            .iter()
            .enumerate()
            .map(|(page, &used)| PageUsage {
                page: page as u32,
                used,
                capacity,
            })
            .collect(),
        timings_ms: timings,
    }
}

fn ratio(opt: u64, naive: u64) -> f64 {
    if naive == 0 {
        1.0
    } else {
        opt as f64 / naive as f64
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Copy with zeroed timings, for byte comparisons.
    pub fn without_timings(&self) -> Report {
        Report {
            timings_ms: Timings::default(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub program: String,
    pub nof: usize,
    pub s_naive: Option<u64>,
    pub s_opt: u64,
    pub psi_naive: Option<u64>,
    pub psi_opt: u64,
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub schema: u32,
    pub programs: usize,
    pub with_naive: usize,
    pub mean_ratio: Option<f64>,
    pub mean_definition: String,
    pub total_s_naive: u64,
    pub total_s_opt: u64,
    pub total_psi_naive: u64,
    pub total_psi_opt: u64,
    pub entries: Vec<CorpusEntry>,
}

/// Merges reports, ordered by program name.
pub fn summarize(reports: &[Report]) -> CorpusSummary {
    let mut entries: Vec<CorpusEntry> = reports
        .iter()
        .map(|r| CorpusEntry {
            program: r.program.clone(),
            nof: r.nof,
            s_naive: r.s_naive,
            s_opt: r.s_opt,
            psi_naive: r.psi_naive,
            psi_opt: r.psi_opt,
            ratio: r.ratio,
        })
        .collect();
    entries.sort_by(|a, b| a.program.cmp(&b.program));
    let ratios: Vec<f64> = entries.iter().filter_map(|e| e.ratio).collect();
    let with_naive: Vec<&CorpusEntry> = entries.iter().filter(|e| e.s_naive.is_some()).collect();
    CorpusSummary {
        schema: SCHEMA_VERSION,
        programs: entries.len(),
        with_naive: ratios.len(),
        mean_ratio: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
        mean_definition: MEAN_DEFINITION.to_string(),
        total_s_naive: with_naive.iter().filter_map(|e| e.s_naive).sum(),
        total_s_opt: with_naive.iter().map(|e| e.s_opt).sum(),
        total_psi_naive: with_naive.iter().filter_map(|e| e.psi_naive).sum(),
        total_psi_opt: with_naive.iter().map(|e| e.psi_opt).sum(),
        entries,
    }
}

impl CorpusSummary {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}
