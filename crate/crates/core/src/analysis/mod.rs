//! Interprocedural PSR-value analysis.
//!
//! At every program point the PSR holds the page of some function. Which
//! function is known symbolically: after a `goto` it is the current function,
//! after `call e` it is whatever `e` leaves behind on return. This module
//! computes, for each point, the set of functions the PSR may be related to
//! (the VOP set) as a forward union dataflow over all blocks of all functions.
//!
//! Every function gets a pseudo exit block succeeding all of its `ret`
//! blocks; its Out set summarises the function's effect on the PSR and feeds
//! back into the Gen sets of callers' blocks ending in a call.

mod funcset;
pub mod oracle;

use crate::ir::{BasicBlock, BlockId, FuncId, Instr, Pos, Program};

pub use funcset::FuncSet;
pub use oracle::{oracle_vop_paths, OracleError, OracleVops};

/// VOP produced by a PNTI.
///
/// `goto`/`cgoto` leave the PSR at the current function's page; `call e`
/// leaves it wherever `e` returns with.
///
/// # Panics
///
/// Panics if `instr` is not a PNTI.
pub fn ret_vop(instr: &Instr, current: FuncId, out_psb: &[FuncSet]) -> FuncSet {
    let nof = out_psb.len();
    match *instr {
        Instr::Goto(_) | Instr::Cgoto(_) => FuncSet::singleton(nof, current),
        Instr::Call(e) => out_psb[e.index()].clone(),
        _ => panic!("ret_vop called on page-transparent instruction {instr:?}"),
    }
}

/// Gen and Kill for a real block: both empty for a PTB; otherwise Gen is the
/// VOP of the block's last PNTI and Kill is every other function.
pub fn gen_kill(block: &BasicBlock, current: FuncId, out_psb: &[FuncSet]) -> (FuncSet, FuncSet) {
    let nof = out_psb.len();
    match block.last_pnti() {
        Some(i) => {
            let gen = ret_vop(i, current, out_psb);
            let kill = gen.complement();
            (gen, kill)
        }
        None => (FuncSet::empty(nof), FuncSet::empty(nof)),
    }
}

/// Solved In/Out sets. Tables are indexed `[function][block]` and cover the
/// pseudo exit blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataflowResult {
    pub gen: Vec<Vec<FuncSet>>,
    pub kill: Vec<Vec<FuncSet>>,
    pub in_: Vec<Vec<FuncSet>>,
    pub out: Vec<Vec<FuncSet>>,
    /// Number of full passes over all blocks, including the final pass that
    /// observed no change.
    pub iterations: usize,
    nof: usize,
    pseudo: Vec<BlockId>,
}

impl DataflowResult {
    pub fn func_count(&self) -> usize {
        self.nof
    }

    pub fn out_psb(&self, f: FuncId) -> &FuncSet {
        &self.out[f.index()][self.pseudo[f.index()].index()]
    }

    pub fn out_psb_table(&self) -> Vec<FuncSet> {
        (0..self.nof).map(|f| self.out_psb(FuncId(f as u32)).clone()).collect()
    }

    /// VOP at each point of a block: entry `0` is the block entry, entry
    /// `k + 1` the point just after instruction `k`.
    pub fn block_vops(&self, p: &Program, f: FuncId, b: BlockId) -> Vec<FuncSet> {
        let block = p.function(f).block(b);
        let mut cur = self.in_[f.index()][b.index()].clone();
        let mut vops = Vec::with_capacity(block.instrs.len() + 1);
        vops.push(cur.clone());
        for i in &block.instrs {
            if i.is_pnti() {
                cur = match *i {
                    Instr::Call(e) => self.out_psb(e).clone(),
                    _ => FuncSet::singleton(self.nof, f),
                };
            }
            vops.push(cur.clone());
        }
        vops
    }

    pub fn vop_before(&self, p: &Program, pos: Pos) -> FuncSet {
        self.block_vops(p, pos.func, pos.block).swap_remove(pos.index)
    }

    pub fn vop_after(&self, p: &Program, pos: Pos) -> FuncSet {
        self.block_vops(p, pos.func, pos.block).swap_remove(pos.index + 1)
    }

    /// Upper bound on passes: every pass but the last two adds at least one
    /// element to some Out set.
    pub fn iteration_bound(p: &Program) -> usize {
        p.block_count() * p.func_count() + 2
    }
}

/// Solves the dataflow to its least fixpoint.
pub fn solve(p: &Program) -> DataflowResult {
    solve_observed(p, |_, _| {})
}

/// Like [`solve`], calling `observe(pass, state)` after every pass.
pub fn solve_observed(p: &Program, mut observe: impl FnMut(usize, &DataflowResult)) -> DataflowResult {
    let nof = p.func_count();
    let empty_tables = || -> Vec<Vec<FuncSet>> {
        p.functions
            .iter()
            .map(|f| vec![FuncSet::empty(nof); f.blocks.len()])
            .collect()
    };
    let mut r = DataflowResult {
        gen: empty_tables(),
        kill: empty_tables(),
        in_: empty_tables(),
        out: empty_tables(),
        iterations: 0,
        nof,
        pseudo: p.functions.iter().map(|f| f.pseudo_exit).collect(),
    };
    let preds: Vec<Vec<Vec<BlockId>>> = p.functions.iter().map(|f| f.predecessors()).collect();
    let order = visit_order(p);
    let mut out_psb = vec![FuncSet::empty(nof); nof];

    loop {
        r.iterations += 1;
        let mut changed = false;
        for &(f, b) in &order {
            let (fi, bi) = (f.index(), b.index());
            let func = p.function(f);
            let block = func.block(b);

            let mut in_set = FuncSet::empty(nof);
            for pred in &preds[fi][bi] {
                in_set.union_with(&r.out[fi][pred.index()]);
            }
            if b == func.entry {
                in_set.insert(f);
            }
            let (gen, kill) = if block.is_pseudo {
                (FuncSet::empty(nof), FuncSet::empty(nof))
            } else {
                gen_kill(block, f, &out_psb)
            };
            let mut out_set = in_set.difference(&kill);
            out_set.union_with(&gen);

            if in_set != r.in_[fi][bi] {
                r.in_[fi][bi] = in_set;
                changed = true;
            }
            if gen != r.gen[fi][bi] {
                r.gen[fi][bi] = gen;
                r.kill[fi][bi] = kill;
                changed = true;
            }
            if out_set != r.out[fi][bi] {
                if block.is_pseudo {
                    out_psb[fi] = out_set.clone();
                }
                r.out[fi][bi] = out_set;
                changed = true;
            }
        }
        observe(r.iterations, &r);
        if !changed {
            break;
        }
    }
    r
}

/// Callees before callers (call-graph postorder from each function in
/// declaration order); blocks in reverse postorder, then unreachable ones.
fn visit_order(p: &Program) -> Vec<(FuncId, BlockId)> {
    let nof = p.func_count();
    let mut seen = vec![false; nof];
    let mut funcs = Vec::with_capacity(nof);
    for root in p.func_ids() {
        if seen[root.index()] {
            continue;
        }
        seen[root.index()] = true;
        let mut stack = vec![(root, callees(p, root), 0usize)];
        while let Some((f, cs, next)) = stack.last_mut() {
            if let Some(&c) = cs.get(*next) {
                *next += 1;
                if !seen[c.index()] {
                    seen[c.index()] = true;
                    let cc = callees(p, c);
                    stack.push((c, cc, 0));
                }
            } else {
                funcs.push(*f);
                stack.pop();
            }
        }
    }

    let mut order = Vec::with_capacity(p.block_count());
    for f in funcs {
        let func = p.function(f);
        let n = func.blocks.len();
        let mut visited = vec![false; n];
        let mut post = Vec::with_capacity(n);
        let mut stack = vec![(func.entry, 0usize)];
        visited[func.entry.index()] = true;
        while let Some((b, next)) = stack.last_mut() {
            let succs = &func.block(*b).succs;
            if let Some(&s) = succs.get(*next) {
                *next += 1;
                if !visited[s.index()] {
                    visited[s.index()] = true;
                    stack.push((s, 0));
                }
            } else {
                post.push(*b);
                stack.pop();
            }
        }
        order.extend(post.iter().rev().map(|&b| (f, b)));
        order.extend((0..n).filter(|&i| !visited[i]).map(|i| (f, BlockId(i as u32))));
    }
    order
}

fn callees(p: &Program, f: FuncId) -> Vec<FuncId> {
    let mut cs: Vec<FuncId> = p
        .function(f)
        .instrs()
        .filter_map(|i| match i {
            Instr::Call(e) => Some(*e),
            _ => None,
        })
        .collect();
    cs.dedup();
    cs
}
