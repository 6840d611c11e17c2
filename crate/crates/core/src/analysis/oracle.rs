//! Path-enumeration oracle for the VOP analysis.
//!
//! Walks every acyclic path of every function and tracks, per path, the one
//! function the PSR is related to. A call forks the path once per function
//! the callee can return with; those return sets are themselves computed by
//! enumerating the callee's paths. Nothing here shares code with the
//! fixpoint solver.
//!
//! Paths start at the entry block (related to the function itself) and at
//! every other predecessor-free block (related to nothing, as such blocks are
//! dead code). Only acyclic CFGs and acyclic call graphs are accepted.

use std::collections::HashMap;

use super::FuncSet;
use crate::ir::{BlockId, FuncId, Instr, Pos, Program};

pub const MAX_FUNCS: usize = 10;
pub const MAX_BLOCKS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("control flow graph of `{0}` has a cycle")]
    CyclicCfg(String),
    #[error("call graph has a cycle through `{0}`")]
    RecursiveCalls(String),
    #[error("instance too large for path enumeration ({funcs} functions, {blocks} blocks max)")]
    TooLarge { funcs: usize, blocks: usize },
}

#[derive(Debug, Clone)]
pub struct OracleVops {
    pub before: HashMap<Pos, FuncSet>,
    pub after: HashMap<Pos, FuncSet>,
    /// Functions each function may return with.
    pub exit: Vec<FuncSet>,
}

pub fn oracle_vop_paths(p: &Program) -> Result<OracleVops, OracleError> {
    let nof = p.func_count();
    let max_blocks = p.functions.iter().map(|f| f.blocks.len() - 1).max().unwrap_or(0);
    if nof > MAX_FUNCS || max_blocks > MAX_BLOCKS {
        return Err(OracleError::TooLarge {
            funcs: nof,
            blocks: max_blocks,
        });
    }
    for f in &p.functions {
        if has_cycle(f.blocks.len(), |b| {
            f.blocks[b].succs.iter().map(|s| s.index()).collect()
        }) {
            return Err(OracleError::CyclicCfg(f.name.clone()));
        }
    }
    let callees = |fi: usize| -> Vec<usize> {
        p.functions[fi]
            .instrs()
            .filter_map(|i| match i {
                Instr::Call(e) => Some(e.index()),
                _ => None,
            })
            .collect()
    };
    if let Some(f) = find_cycle(nof, callees) {
        return Err(OracleError::RecursiveCalls(p.functions[f].name.clone()));
    }

    let mut walker = Walker {
        p,
        nof,
        exit: vec![None; nof],
        before: HashMap::new(),
        after: HashMap::new(),
    };
    for f in p.func_ids() {
        walker.exit_of(f);
    }
    Ok(OracleVops {
        before: walker.before,
        after: walker.after,
        exit: walker
            .exit
            .into_iter()
            .map(|e| e.expect("all functions walked"))
            .collect(),
    })
}

fn has_cycle(n: usize, succs: impl Fn(usize) -> Vec<usize>) -> bool {
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; n];
    fn dfs(v: usize, state: &mut [u8], succs: &dyn Fn(usize) -> Vec<usize>) -> bool {
        state[v] = 1;
        for s in succs(v) {
            if state[s] == 1 || (state[s] == 0 && dfs(s, state, succs)) {
                return true;
            }
        }
        state[v] = 2;
        false
    }
    (0..n).any(|v| state[v] == 0 && dfs(v, &mut state, &succs))
}

fn find_cycle(n: usize, succs: impl Fn(usize) -> Vec<usize>) -> Option<usize> {
    (0..n).find(|&root| {
        let mut seen = vec![false; n];
        let mut stack = succs(root);
        while let Some(v) = stack.pop() {
            if v == root {
                return true;
            }
            if !seen[v] {
                seen[v] = true;
                stack.extend(succs(v));
            }
        }
        false
    })
}

struct Walker<'a> {
    p: &'a Program,
    nof: usize,
    exit: Vec<Option<FuncSet>>,
    before: HashMap<Pos, FuncSet>,
    after: HashMap<Pos, FuncSet>,
}

impl Walker<'_> {
    fn exit_of(&mut self, f: FuncId) -> FuncSet {
        if let Some(e) = &self.exit[f.index()] {
            return e.clone();
        }
        let func = self.p.function(f);
        // Seed every position so unvisited ones report the empty set.
        for (b, block) in func.real_blocks() {
            for index in 0..block.instrs.len() {
                let pos = Pos {
                    func: f,
                    block: b,
                    index,
                };
                self.before.insert(pos, FuncSet::empty(self.nof));
                self.after.insert(pos, FuncSet::empty(self.nof));
            }
        }
        let mut has_pred = vec![false; func.blocks.len()];
        for b in &func.blocks {
            for s in &b.succs {
                has_pred[s.index()] = true;
            }
        }
        let mut exit = FuncSet::empty(self.nof);
        self.walk_block(f, func.entry, Some(f), &mut exit);
        for (b, _) in func.real_blocks() {
            if b != func.entry && !has_pred[b.index()] {
                self.walk_block(f, b, None, &mut exit);
            }
        }
        self.exit[f.index()] = Some(exit.clone());
        exit
    }

    fn walk_block(&mut self, f: FuncId, b: BlockId, state: Option<FuncId>, exit: &mut FuncSet) {
        self.walk_from(f, b, 0, state, exit);
    }

    fn walk_from(&mut self, f: FuncId, b: BlockId, start: usize, mut state: Option<FuncId>, exit: &mut FuncSet) {
        let p = self.p;
        let block = p.function(f).block(b);
        if block.is_pseudo {
            if let Some(g) = state {
                exit.insert(g);
            }
            return;
        }
        for index in start..block.instrs.len() {
            let pos = Pos {
                func: f,
                block: b,
                index,
            };
            if let Some(g) = state {
                self.before.get_mut(&pos).unwrap().insert(g);
            }
            match block.instrs[index] {
                Instr::Goto(_) | Instr::Cgoto(_) => state = Some(f),
                Instr::Call(e) => {
                    let returns = self.exit_of(e);
                    let outcomes: Vec<FuncId> = returns.iter().collect();
                    if outcomes.is_empty() {
                        // The callee never returns: this path ends here.
                        return;
                    }
                    for g in outcomes {
                        self.after.get_mut(&pos).unwrap().insert(g);
                        self.walk_rest(f, b, index + 1, Some(g), exit);
                    }
                    return;
                }
                _ => {}
            }
            if let Some(g) = state {
                self.after.get_mut(&pos).unwrap().insert(g);
            }
        }
        for s in block.succs.clone() {
            self.walk_block(f, s, state, exit);
        }
    }

    fn walk_rest(&mut self, f: FuncId, b: BlockId, index: usize, state: Option<FuncId>, exit: &mut FuncSet) {
        let block = self.p.function(f).block(b);
        if index < block.instrs.len() {
            self.walk_from(f, b, index, state, exit);
        } else {
            for s in block.succs.clone() {
                self.walk_block(f, s, state, exit);
            }
        }
    }
}
