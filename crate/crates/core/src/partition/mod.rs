//! Function-to-page assignment.
//!
//! The objective is the residual weight: the total FRG weight of edges whose
//! endpoints land in different pages. Edges inside a page cost nothing.

mod exhaustive;
mod greedy;

use std::fmt;

use crate::frg::Frg;
use crate::ir::{FuncId, Program};
use crate::weight::Weight;

pub use exhaustive::{exhaustive_partition, Objective, MAX_EXHAUSTIVE_FUNCS, MAX_EXHAUSTIVE_PAGES};
pub use greedy::{greedy_partition, greedy_partition_with, GreedyOptions, GreedyStep};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PartitionError {
    #[error("not enough memory: function `{func}` ({size} words) fits in no page")]
    NotEnoughMemory { func: String, size: u64 },
    #[error("instance too large for exhaustive partitioning: {funcs} functions, {pages} pages (max {max_funcs} and {max_pages})")]
    TooLarge {
        funcs: usize,
        pages: u32,
        max_funcs: usize,
        max_pages: u32,
    },
    #[error("no capacity-feasible assignment exists")]
    NoFeasibleAssignment,
}

/// A total map from functions to pages, plus the words each page has left
/// according to the sizing model of the algorithm that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PageAssignment {
    pub func_page: Vec<u32>,
    pub page_free: Vec<u64>,
}

impl PageAssignment {
    pub fn page_of(&self, f: FuncId) -> u32 {
        self.func_page[f.index()]
    }

    pub fn page_count(&self) -> usize {
        self.page_free.len()
    }

    /// Functions of page `page` in id order.
    pub fn members(&self, page: u32) -> impl Iterator<Item = FuncId> + '_ {
        self.func_page
            .iter()
            .enumerate()
            .filter(move |(_, &pg)| pg == page)
            .map(|(i, _)| FuncId(i as u32))
    }

    /// Builds an assignment from explicit pages; free space is computed from
    /// the functions' base sizes.
    pub fn from_pages(p: &Program, func_page: Vec<u32>) -> Self {
        let mut page_free = vec![p.config.page_size as u64; p.config.page_count as usize];
        for (f, &pg) in p.functions.iter().zip(&func_page) {
            let free = &mut page_free[pg as usize];
            *free = free.saturating_sub(f.base_size());
        }
        PageAssignment { func_page, page_free }
    }

    /// `FuncPage` listing, one `name page` line per function.
    pub fn display<'a>(&'a self, p: &'a Program) -> impl fmt::Display + 'a {
        struct Listing<'a>(&'a PageAssignment, &'a Program);
        impl fmt::Display for Listing<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                for (i, pg) in self.0.func_page.iter().enumerate() {
                    writeln!(f, "{} {}", self.1.name(FuncId(i as u32)), pg)?;
                }
                Ok(())
            }
        }
        Listing(self, p)
    }
}

/// Total weight of edges crossing page boundaries.
pub fn residual_cost(frg: &Frg, a: &PageAssignment) -> Weight {
    frg.edges()
        .filter(|(g, h, _)| a.page_of(*g) != a.page_of(*h))
        .map(|(_, _, w)| w)
        .sum()
}

/// Total weight of edges kept inside a page.
pub fn saved_weight(frg: &Frg, a: &PageAssignment) -> Weight {
    frg.edges()
        .filter(|(g, h, _)| a.page_of(*g) == a.page_of(*h))
        .map(|(_, _, w)| w)
        .sum()
}

/// Pessimistic size: base words plus one PSI per PNTI.
pub fn estimated_size(p: &Program, f: FuncId) -> u64 {
    let func = p.function(f);
    func.base_size() + p.config.psi_cost as u64 * func.pnti_count()
}
