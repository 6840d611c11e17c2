//! Seeded random program generator.
//!
//! Programs have an acyclic call graph (function `i` only calls `j > i`), so
//! every run terminates once the decision stream is exhausted: gotos only go
//! forward and back edges are always conditional. Functions are grouped into
//! one cluster per page; with probability `cluster_factor` a call stays
//! inside the caller's cluster, which gives partitioning something to find.
//! Calls in tail position and on both arms of branches are common, so VOP
//! sets with several members show up regularly.

use std::fmt::Write;
use std::ops::RangeInclusive;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ir::{parse_program, Program};
use crate::psi::naive_placement;

#[derive(Clone, Debug)]
pub struct GenSpec {
    pub seed: u64,
    pub funcs: RangeInclusive<usize>,
    /// Blocks per function; ignored when `target_words` is set.
    pub blocks: RangeInclusive<usize>,
    pub pages: RangeInclusive<u32>,
    /// Fixed page size; chosen automatically when `None`.
    pub page_size: Option<u32>,
    pub psi_cost: u32,
    /// Probability that an instruction slot is a call.
    pub call_density: f64,
    /// Probability that a non-final block ends in an explicit branch.
    pub goto_density: f64,
    /// Probability that a call targets the caller's own cluster.
    pub cluster_factor: f64,
    /// Only forward branches.
    pub acyclic: bool,
    /// Largest `pti` run.
    pub pti_max: u32,
    /// Approximate total program size; blocks are added to every function
    /// until its share is used up.
    pub target_words: Option<u64>,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            seed: 42,
            funcs: 4..=16,
            blocks: 2..=6,
            pages: 2..=4,
            page_size: None,
            psi_cost: 1,
            call_density: 0.35,
            goto_density: 0.5,
            cluster_factor: 0.7,
            acyclic: false,
            pti_max: 12,
            target_words: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("empty range for {0}")]
    EmptyRange(&'static str),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl GenSpec {
    fn validate(&self) -> Result<(), GenError> {
        if self.funcs.is_empty() || *self.funcs.start() == 0 {
            return Err(GenError::EmptyRange("funcs"));
        }
        if self.blocks.is_empty() || *self.blocks.start() == 0 {
            return Err(GenError::EmptyRange("blocks"));
        }
        if self.pages.is_empty() || *self.pages.start() == 0 {
            return Err(GenError::EmptyRange("pages"));
        }
        for (name, v) in [
            ("call_density", self.call_density),
            ("goto_density", self.goto_density),
            ("cluster_factor", self.cluster_factor),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(GenError::Invalid(format!("{name} must be in [0, 1]")));
            }
        }
        if self.psi_cost == 0 || self.pti_max == 0 {
            return Err(GenError::Invalid("psi_cost and pti_max must be positive".into()));
        }
        Ok(())
    }
}

/// One program text, fully determined by `spec`.
pub fn generate(spec: &GenSpec) -> Result<String, GenError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    generate_with(spec, &mut rng)
}

/// `count` named programs; program `i` uses the `i`-th seed drawn from `spec.seed`.
pub fn generate_corpus(spec: &GenSpec, count: usize) -> Result<Vec<(String, String)>, GenError> {
    spec.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(master.next_u64());
            Ok((format!("prog_{i:03}"), generate_with(spec, &mut rng)?))
        })
        .collect()
}

struct Body {
    /// Per block: instructions as text, plus an optional terminator.
    blocks: Vec<Vec<String>>,
}

fn generate_with(spec: &GenSpec, rng: &mut ChaCha8Rng) -> Result<String, GenError> {
    let nof = rng.random_range(spec.funcs.clone());
    let pages = rng.random_range(spec.pages.clone());
    let clusters = (pages as usize).min(nof).max(1);
    let cluster: Vec<usize> = (0..nof).map(|_| rng.random_range(0..clusters)).collect();
    let names: Vec<String> = (0..nof)
        .map(|i| if i == 0 { "main".into() } else { format!("f{i}") })
        .collect();
    let mut called = vec![false; nof];

    let mut bodies = Vec::with_capacity(nof);
    for i in 0..nof {
        let mut body = Body { blocks: Vec::new() };
        let budget = spec.target_words.map(|t| (t / nof as u64).max(2));
        let nblocks = match budget {
            Some(_) => usize::MAX,
            None => rng.random_range(spec.blocks.clone()),
        };
        let mut used = 0u64;
        let mut b = 0;
        while b < nblocks && budget.is_none_or(|w| used < w || b == 0) {
            let mut instrs = Vec::new();
            let slots = rng.random_range(1..=3);
            for _ in 0..slots {
                if i + 1 < nof && rng.random_bool(spec.call_density) {
                    let callee = pick_callee(rng, i, nof, &cluster, spec.cluster_factor);
                    called[callee] = true;
                    instrs.push(format!("call {}", names[callee]));
                    used += 1;
                } else {
                    let k = rng.random_range(1..=spec.pti_max);
                    instrs.push(format!("pti {k}"));
                    used += k as u64;
                }
            }
            body.blocks.push(instrs);
            b += 1;
        }
        let n = body.blocks.len();
        for (bi, instrs) in body.blocks.iter_mut().enumerate() {
            if bi + 1 == n {
                // Tail calls make the function's exit relation its callee's.
                if i + 1 < nof && rng.random_bool(spec.call_density) {
                    let callee = pick_callee(rng, i, nof, &cluster, spec.cluster_factor);
                    called[callee] = true;
                    instrs.push(format!("call {}", names[callee]));
                }
                instrs.push("ret".into());
            } else if rng.random_bool(spec.goto_density) {
                let choice = rng.random_range(0..4);
                if choice == 0 {
                    instrs.push("ret".into());
                } else if choice == 1 && bi + 2 < n {
                    let t = rng.random_range(bi + 2..n);
                    instrs.push(format!("goto b{t}"));
                } else if spec.acyclic || rng.random_bool(0.5) {
                    let t = rng.random_range(bi + 1..n);
                    instrs.push(format!("cgoto b{t}"));
                } else {
                    let t = rng.random_range(0..=bi);
                    instrs.push(format!("cgoto b{t}"));
                }
            }
        }
        bodies.push(body);
    }

    // Make every function reachable from some earlier one.
    for j in 1..nof {
        if called[j] {
            continue;
        }
        let same: Vec<usize> = (0..j).filter(|&c| cluster[c] == cluster[j]).collect();
        let caller = if same.is_empty() {
            rng.random_range(0..j)
        } else {
            same[rng.random_range(0..same.len())]
        };
        let blocks = &mut bodies[caller].blocks;
        let bi = rng.random_range(0..blocks.len());
        let block = &mut blocks[bi];
        let has_term = block
            .last()
            .is_some_and(|s| s == "ret" || s.starts_with("goto ") || s.starts_with("cgoto "));
        let limit = block.len() - usize::from(has_term);
        let at = rng.random_range(0..=limit);
        block.insert(at, format!("call {}", names[j]));
        called[j] = true;
    }

    let mut text = String::new();
    let header = |text: &mut String, page_size: u32| {
        text.clear();
        writeln!(text, "pages {pages}").unwrap();
        writeln!(text, "page_size {page_size}").unwrap();
        writeln!(text, "psi_cost {}", spec.psi_cost).unwrap();
        for (i, body) in bodies.iter().enumerate() {
            writeln!(text, "func {}:", names[i]).unwrap();
            for (bi, instrs) in body.blocks.iter().enumerate() {
                writeln!(text, "b{bi}:").unwrap();
                for ins in instrs {
                    writeln!(text, "  {ins}").unwrap();
                }
            }
        }
    };

    let probe = |text: &str| -> Program { parse_program(text).expect("generator emits valid IR") };
    match spec.page_size {
        Some(size) => {
            header(&mut text, size);
            let p = probe(&text);
            if naive_placement(&p).is_err() {
                return Err(GenError::Infeasible(format!(
                    "{} words of naive code do not fit {pages} pages of {size}",
                    naive_total(&p)
                )));
            }
        }
        None => {
            header(&mut text, 1);
            let p = probe(&text);
            let total = naive_total(&p);
            let largest = p
                .functions
                .iter()
                .map(|f| f.base_size() + spec.psi_cost as u64 * f.pnti_count())
                .max()
                .unwrap_or(1);
            let mut size = ((total * 13).div_ceil(10 * pages as u64)).max(largest + largest / 4 + 2);
            loop {
                header(&mut text, size as u32);
                if naive_placement(&probe(&text)).is_ok() {
                    break;
                }
                size += size / 10 + 1;
            }
        }
    }
    Ok(text)
}

fn naive_total(p: &Program) -> u64 {
    p.functions
        .iter()
        .map(|f| f.base_size() + p.config.psi_cost as u64 * f.pnti_count())
        .sum()
}

fn pick_callee(rng: &mut ChaCha8Rng, caller: usize, nof: usize, cluster: &[usize], factor: f64) -> usize {
    let later = caller + 1..nof;
    let same: Vec<usize> = later.clone().filter(|&j| cluster[j] == cluster[caller]).collect();
    let other: Vec<usize> = later.clone().filter(|&j| cluster[j] != cluster[caller]).collect();
    let pool = if rng.random_bool(factor) {
        if same.is_empty() {
            &other
        } else {
            &same
        }
    } else if other.is_empty() {
        &same
    } else {
        &other
    };
    pool[rng.random_range(0..pool.len())]
}
