use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};

use super::{PageAssignment, PartitionError};
use crate::analysis::DataflowResult;
use crate::frg::{pnti_sites, Frg};
use crate::ir::Program;
use crate::psi::{exact_sizes, needs_psi};
use crate::weight::Weight;

pub const MAX_EXHAUSTIVE_FUNCS: usize = 10;
pub const MAX_EXHAUSTIVE_PAGES: u32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// Minimise cross-page FRG weight.
    ResidualWeight,
    /// Minimise the number of PSIs actually inserted.
    ActualPsiCount,
}

/// Optimal assignment by enumerating all `page_count^NOF` candidates.
///
/// A candidate is feasible when every page holds its functions at their exact
/// sizes after PSI insertion. Ties go to the lexicographically smallest page
/// vector.
pub fn exhaustive_partition(
    frg: &Frg,
    p: &Program,
    d: &DataflowResult,
    objective: Objective,
) -> Result<PageAssignment, PartitionError> {
    let nof = p.func_count();
    let pages = p.config.page_count;
    if nof > MAX_EXHAUSTIVE_FUNCS || pages > MAX_EXHAUSTIVE_PAGES {
        return Err(PartitionError::TooLarge {
            funcs: nof,
            pages,
            max_funcs: MAX_EXHAUSTIVE_FUNCS,
            max_pages: MAX_EXHAUSTIVE_PAGES,
        });
    }
    let sites = pnti_sites(p, d);
    let edges = ScaledEdges::new(frg);
    let capacity = p.config.page_size as u64;

    let mut candidate = vec![0u32; nof];
    let mut best: Option<(Cost, Vec<u32>, Vec<u64>)> = None;
    loop {
        let sizes = exact_sizes(p, &sites, &candidate);
        let mut used = vec![0u64; pages as usize];
        for (f, &pg) in candidate.iter().enumerate() {
            used[pg as usize] += sizes[f];
        }
        if used.iter().all(|&u| u <= capacity) {
            let cost = match objective {
                Objective::ResidualWeight => edges.residual(&candidate),
                Objective::ActualPsiCount => {
                    Cost::Count(sites.iter().filter(|s| needs_psi(s, &candidate)).count() as u64)
                }
            };
            if best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
                let free = used.iter().map(|u| capacity - u).collect();
                best = Some((cost, candidate.clone(), free));
            }
        }
        if !advance(&mut candidate, pages) {
            break;
        }
    }
    let (_, func_page, page_free) = best.ok_or(PartitionError::NoFeasibleAssignment)?;
    Ok(PageAssignment { func_page, page_free })
}

/// Next vector in lexicographic order; false after the last one.
fn advance(v: &mut [u32], base: u32) -> bool {
    for digit in v.iter_mut().rev() {
        *digit += 1;
        if *digit < base {
            return true;
        }
        *digit = 0;
    }
    false
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Cost {
    Count(u64),
    Scaled(i128),
    Exact(Weight),
}

/// FRG edges as integers over a common denominator when they fit in `i128`,
/// which keeps the enumeration loop free of big-number arithmetic.
struct ScaledEdges {
    edges: Vec<(usize, usize, Weight)>,
    scaled: Option<Vec<i128>>,
}

impl ScaledEdges {
    fn new(frg: &Frg) -> Self {
        let edges: Vec<(usize, usize, Weight)> =
            frg.edges().map(|(g, h, w)| (g.index(), h.index(), w.clone())).collect();
        let denom = edges
            .iter()
            .fold(BigInt::one(), |acc, (_, _, w)| acc.lcm(w.as_rational().denom()));
        let nums: Option<Vec<i128>> = edges
            .iter()
            .map(|(_, _, w)| {
                let r = w.as_rational();
                (r.numer() * (&denom / r.denom())).to_i128()
            })
            .collect();
        let scaled = nums.filter(|n| n.iter().try_fold(0i128, |acc, x| acc.checked_add(*x)).is_some());
        ScaledEdges { edges, scaled }
    }

    fn residual(&self, pages: &[u32]) -> Cost {
        let crossing = self
            .edges
            .iter()
            .enumerate()
            .filter(|(_, (g, h, _))| pages[*g] != pages[*h]);
        match &self.scaled {
            Some(n) => Cost::Scaled(crossing.map(|(i, _)| n[i]).sum()),
            None => Cost::Exact(crossing.map(|(_, (_, _, w))| w).sum()),
        }
    }
}
