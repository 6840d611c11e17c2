//! PSI insertion and the naive baseline.
//!
//! Given a page for every function, a PNTI needs a PSI in front of it unless
//! every function in its VOP set lives on the page the PNTI requires. The
//! naive baseline places functions first-fit and puts a PSI before every
//! PNTI.

use crate::analysis::DataflowResult;
use crate::frg::{pnti_sites, PntiSite};
use crate::ir::{FuncId, Instr, Pos, Program};
use crate::partition::PageAssignment;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CapacityError {
    #[error("page {page} overflows after PSI insertion: {used} words > {capacity}")]
    PageOverflow { page: u32, used: u64, capacity: u64 },
    #[error("naive placement: function `{func}` ({size} words) fits in no page")]
    NoFit { func: String, size: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OptimizedProgram {
    /// The program with PSIs inserted.
    pub program: Program,
    pub assignment: PageAssignment,
    /// PNTIs that received a PSI, as positions in the PSI-free input.
    pub psi_sites: Vec<Pos>,
    /// Words per function including PSIs.
    pub exact_sizes: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SizeSummary {
    pub total: u64,
    pub psi_count: u64,
    pub page_used: Vec<u64>,
    pub nof: usize,
}

/// The page a PNTI requires in the PSR.
pub fn required_page(instr: &Instr, current: FuncId, func_page: &[u32]) -> u32 {
    match *instr {
        Instr::Call(e) => func_page[e.index()],
        Instr::Goto(_) | Instr::Cgoto(_) => func_page[current.index()],
        _ => panic!("required_page called on page-transparent instruction {instr:?}"),
    }
}

/// True unless every function in the site's VOP maps to the required page.
/// An empty VOP (dead code) always needs a PSI.
pub fn needs_psi(site: &PntiSite, func_page: &[u32]) -> bool {
    let required = func_page[site.target.index()];
    site.vop.is_empty() || site.vop.iter().any(|g| func_page[g.index()] != required)
}

/// Exact size of each function once PSIs are inserted for `func_page`.
pub fn exact_sizes(p: &Program, sites: &[PntiSite], func_page: &[u32]) -> Vec<u64> {
    let psi_cost = p.config.psi_cost as u64;
    let mut sizes: Vec<u64> = p.functions.iter().map(|f| f.base_size()).collect();
    for s in sites {
        if needs_psi(s, func_page) {
            sizes[s.pos.func.index()] += psi_cost;
        }
    }
    sizes
}

pub fn insert_psi(p: &Program, a: &PageAssignment, d: &DataflowResult) -> Result<OptimizedProgram, CapacityError> {
    let sites: Vec<Pos> = pnti_sites(p, d)
        .into_iter()
        .filter(|s| needs_psi(s, &a.func_page))
        .map(|s| s.pos)
        .collect();
    materialize(p, a.clone(), sites)
}

/// First-fit over declaration order at naive size, one PSI per PNTI.
pub fn naive_placement(p: &Program) -> Result<OptimizedProgram, CapacityError> {
    let psi_cost = p.config.psi_cost as u64;
    let mut free = vec![p.config.page_size as u64; p.config.page_count as usize];
    let mut func_page = Vec::with_capacity(p.func_count());
    for f in &p.functions {
        let size = f.base_size() + psi_cost * f.pnti_count();
        let page = free
            .iter()
            .position(|&room| room >= size)
            .ok_or_else(|| CapacityError::NoFit {
                func: f.name.clone(),
                size,
            })?;
        free[page] -= size;
        func_page.push(page as u32);
    }
    let assignment = PageAssignment {
        func_page,
        page_free: free,
    };
    materialize(p, assignment, p.pnti_positions())
}

fn materialize(
    p: &Program,
    assignment: PageAssignment,
    psi_sites: Vec<Pos>,
) -> Result<OptimizedProgram, CapacityError> {
    let mut out = p.clone();
    let mut sites = psi_sites.iter().peekable();
    for (fi, func) in out.functions.iter_mut().enumerate() {
        let f = FuncId(fi as u32);
        for (bi, block) in func.blocks.iter_mut().enumerate() {
            let mut instrs = Vec::with_capacity(block.instrs.len());
            for (index, instr) in block.instrs.iter().enumerate() {
                let here = Pos {
                    func: f,
                    block: crate::ir::BlockId(bi as u32),
                    index,
                };
                if sites.peek() == Some(&&here) {
                    sites.next();
                    instrs.push(Instr::Psi(required_page(instr, f, &assignment.func_page)));
                }
                instrs.push(*instr);
            }
            block.instrs = instrs;
        }
    }
    debug_assert!(sites.next().is_none(), "PSI sites must be in canonical order");

    let psi_cost = p.config.psi_cost;
    let exact_sizes: Vec<u64> = out.functions.iter().map(|f| f.size(psi_cost)).collect();
    let capacity = p.config.page_size as u64;
    let mut used = vec![0u64; p.config.page_count as usize];
    for (f, size) in exact_sizes.iter().enumerate() {
        used[assignment.func_page[f] as usize] += size;
    }
    if let Some((page, &u)) = used.iter().enumerate().find(|(_, &u)| u > capacity) {
        return Err(CapacityError::PageOverflow {
            page: page as u32,
            used: u,
            capacity,
        });
    }
    let assignment = PageAssignment {
        func_page: assignment.func_page,
        page_free: used.iter().map(|u| capacity - u).collect(),
    };
    Ok(OptimizedProgram {
        program: out,
        assignment,
        psi_sites,
        exact_sizes,
    })
}

pub fn code_size(o: &OptimizedProgram) -> SizeSummary {
    let mut page_used = vec![0u64; o.assignment.page_count()];
    for (f, size) in o.exact_sizes.iter().enumerate() {
        page_used[o.assignment.func_page[f] as usize] += size;
    }
    SizeSummary {
        total: o.exact_sizes.iter().sum(),
        psi_count: o.psi_sites.len() as u64,
        page_used,
        nof: o.exact_sizes.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::solve;
    use crate::ir::{parse_program, BlockId};

    fn prog(text: &str) -> Program {
        parse_program(text).unwrap()
    }

    const CHAIN: &str =
        "pages 2\npage_size 64\nfunc main:\nb0: call g\n call h\n ret\nfunc g:\nb0: pti 2\n ret\nfunc h:\nb0: ret\n";

    #[test]
    fn required_page_rules() {
        let pages = [2, 0, 1];
        assert_eq!(required_page(&Instr::Goto(BlockId(0)), FuncId(0), &pages), 2);
        assert_eq!(required_page(&Instr::Cgoto(BlockId(0)), FuncId(0), &pages), 2);
        assert_eq!(required_page(&Instr::Call(FuncId(1)), FuncId(0), &pages), 0);
    }

    #[test]
    fn colocated_chain_needs_no_psi() {
        let p = prog(CHAIN);
        let d = solve(&p);
        let o = insert_psi(&p, &PageAssignment::from_pages(&p, vec![0, 0, 0]), &d).unwrap();
        assert!(o.psi_sites.is_empty());
        assert_eq!(o.exact_sizes, vec![3, 3, 1]);
        assert_eq!(o.program, p);
    }

    #[test]
    fn split_callee_gets_one_psi() {
        let p = prog(CHAIN);
        let d = solve(&p);
        let o = insert_psi(&p, &PageAssignment::from_pages(&p, vec![0, 0, 1]), &d).unwrap();
        assert_eq!(
            o.psi_sites,
            vec![Pos {
                func: FuncId(0),
                block: BlockId(0),
                index: 1
            }]
        );
        assert_eq!(o.program.functions[0].blocks[0].instrs[1], Instr::Psi(1));
        assert_eq!(o.exact_sizes[0], 4);
        assert_eq!(o.program.strip_psi(), p);
    }

    #[test]
    fn naive_counts_every_pnti() {
        let p = prog(CHAIN);
        let n = naive_placement(&p).unwrap();
        assert_eq!(n.psi_sites.len() as u64, p.pnti_count());
        assert_eq!(code_size(&n).total, p.base_size() + 2);

        let p = prog("pages 2\npage_size 10\nfunc a:\nb0: pti 6\n ret\nfunc b:\nb0: pti 5\n ret\n");
        let n = naive_placement(&p).unwrap();
        assert_eq!(n.assignment.func_page, vec![0, 1]);
    }

    #[test]
    fn sizes_and_ratio() {
        let p = prog("pages 1\npage_size 2048\nfunc main:\nb0: pti 10\n goto b1\nb1: ret\n");
        let n = naive_placement(&p).unwrap();
        assert_eq!(code_size(&n).total, 13);
        let d = solve(&p);
        let o = insert_psi(&p, &PageAssignment::from_pages(&p, vec![0]), &d).unwrap();
        assert_eq!(code_size(&o).total, 12);
        assert_eq!(code_size(&o).psi_count, 0);
    }

    #[test]
    fn dead_code_always_gets_psi() {
        let p = prog("pages 1\npage_size 64\nfunc f:\nb0: ret\ndead: call f\n ret\n");
        let d = solve(&p);
        let o = insert_psi(&p, &PageAssignment::from_pages(&p, vec![0]), &d).unwrap();
        assert_eq!(o.psi_sites.len(), 1);
    }

    #[test]
    fn overflow_is_reported() {
        let p = prog("pages 2\npage_size 4\nfunc a:\nb0: call b\n call b\n pti 1\n ret\nfunc b:\nb0: pti 1\n ret\n");
        let d = solve(&p);
        // a is 4 words; with b elsewhere the first call needs a PSI.
        let e = insert_psi(&p, &PageAssignment::from_pages(&p, vec![0, 1]), &d).unwrap_err();
        assert_eq!(
            e,
            CapacityError::PageOverflow {
                page: 0,
                used: 5,
                capacity: 4
            }
        );
        let p = prog("pages 1\npage_size 4\nfunc a:\nb0: pti 4\n ret\n");
        assert!(matches!(naive_placement(&p), Err(CapacityError::NoFit { .. })));
    }
}
