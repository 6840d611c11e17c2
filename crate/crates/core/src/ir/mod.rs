//! The paged-MCU intermediate representation.
//!
//! A [`Program`] is a list of functions, each a list of basic blocks holding
//! word-sized instructions. Only three instruction kinds consume the page
//! selection register (PSR): `goto`, `cgoto` and `call`. Everything else is
//! aggregated into `pti <words>` runs, which is all the placement algorithms
//! need to know about ordinary code.

mod cfg;
mod display;
mod parse;

use std::fmt;

use crate::weight::Weight;

pub use cfg::build_cfg;
pub use parse::{parse_program, parse_program_with, ParseError, ParseOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FuncId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId(pub u32);

impl FuncId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl BlockId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// An instruction position: function, block, index within the block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pos {
    pub func: FuncId,
    pub block: BlockId,
    pub index: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}.b{}[{}]", self.func.0, self.block.0, self.index)
    }
}

/// Page geometry and cost model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Config {
    pub page_count: u32,
    /// Words per page.
    pub page_size: u32,
    /// Words occupied by one page selection instruction.
    pub psi_cost: u32,
    /// Weight unit credited per avoidable PSI site when building the FRG.
    pub prevalue: Weight,
}

impl Config {
    pub fn new(page_count: u32, page_size: u32) -> Self {
        Config {
            page_count,
            page_size,
            psi_cost: 1,
            prevalue: Weight::one(),
        }
    }

    /// 2K-word pages as found on PIC16/HR6P parts (11 in-page address bits).
    pub fn paged_2k(page_count: u32) -> Self {
        Config::new(page_count, 2048)
    }

    pub fn capacity(&self) -> u64 {
        self.page_count as u64 * self.page_size as u64
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.page_count == 0 {
            return Err("page count must be at least 1".into());
        }
        if self.page_size == 0 {
            return Err("page size must be at least 1".into());
        }
        if self.psi_cost == 0 {
            return Err("psi cost must be at least 1".into());
        }
        if !self.prevalue.is_positive() {
            return Err("prevalue must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Instr {
    /// A run of page-transparent words.
    Pti(u32),
    Call(FuncId),
    Goto(BlockId),
    /// Conditional goto: branches to the target or falls through.
    Cgoto(BlockId),
    Ret,
    /// Page selection: PSR := page.
    Psi(u32),
}

impl Instr {
    pub fn words(&self, psi_cost: u32) -> u64 {
        match *self {
            Instr::Pti(k) => k as u64,
            Instr::Psi(_) => psi_cost as u64,
            Instr::Call(_) | Instr::Goto(_) | Instr::Cgoto(_) | Instr::Ret => 1,
        }
    }

    /// Page nontransparent: the instruction reads the PSR.
    pub fn is_pnti(&self) -> bool {
        matches!(self, Instr::Call(_) | Instr::Goto(_) | Instr::Cgoto(_))
    }

    pub fn is_terminator(&self) -> bool {
        matches!(self, Instr::Goto(_) | Instr::Cgoto(_) | Instr::Ret)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasicBlock {
    pub name: String,
    pub instrs: Vec<Instr>,
    pub succs: Vec<BlockId>,
    pub is_pseudo: bool,
}

impl BasicBlock {
    pub fn is_pntb(&self) -> bool {
        self.instrs.iter().any(Instr::is_pnti)
    }

    pub fn last_pnti(&self) -> Option<&Instr> {
        self.instrs.iter().rev().find(|i| i.is_pnti())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    /// Real blocks in source order, followed by the pseudo exit block.
    pub blocks: Vec<BasicBlock>,
    pub entry: BlockId,
    pub pseudo_exit: BlockId,
}

impl Function {
    pub fn real_blocks(&self) -> impl Iterator<Item = (BlockId, &BasicBlock)> {
        self.blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| !b.is_pseudo)
            .map(|(i, b)| (BlockId(i as u32), b))
    }

    pub fn block(&self, id: BlockId) -> &BasicBlock {
        &self.blocks[id.index()]
    }

    /// Size in words, excluding any PSIs.
    pub fn base_size(&self) -> u64 {
        self.instrs()
            .filter(|i| !matches!(i, Instr::Psi(_)))
            .map(|i| i.words(0))
            .sum()
    }

    /// Size in words including PSIs at `psi_cost` each.
    pub fn size(&self, psi_cost: u32) -> u64 {
        self.instrs().map(|i| i.words(psi_cost)).sum()
    }

    pub fn pnti_count(&self) -> u64 {
        self.instrs().filter(|i| i.is_pnti()).count() as u64
    }

    pub fn psi_count(&self) -> u64 {
        self.instrs().filter(|i| matches!(i, Instr::Psi(_))).count() as u64
    }

    pub fn instrs(&self) -> impl Iterator<Item = &Instr> {
        self.blocks.iter().flat_map(|b| b.instrs.iter())
    }

    pub fn block_by_name(&self, name: &str) -> Option<BlockId> {
        self.real_blocks().find(|(_, b)| b.name == name).map(|(id, _)| id)
    }

    /// Predecessor lists indexed by block, including the pseudo block.
    pub fn predecessors(&self) -> Vec<Vec<BlockId>> {
        let mut preds = vec![Vec::new(); self.blocks.len()];
        for (i, b) in self.blocks.iter().enumerate() {
            for s in &b.succs {
                preds[s.index()].push(BlockId(i as u32));
            }
        }
        preds
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub config: Config,
    pub functions: Vec<Function>,
}

impl Program {
    /// The first function in the file.
    pub fn entry_function(&self) -> FuncId {
        FuncId(0)
    }

    pub fn function(&self, id: FuncId) -> &Function {
        &self.functions[id.index()]
    }

    pub fn func_count(&self) -> usize {
        self.functions.len()
    }

    pub fn func_ids(&self) -> impl Iterator<Item = FuncId> {
        (0..self.functions.len() as u32).map(FuncId)
    }

    pub fn func_by_name(&self, name: &str) -> Option<FuncId> {
        self.functions
            .iter()
            .position(|f| f.name == name)
            .map(|i| FuncId(i as u32))
    }

    pub fn name(&self, id: FuncId) -> &str {
        &self.function(id).name
    }

    pub fn base_size(&self) -> u64 {
        self.functions.iter().map(Function::base_size).sum()
    }

    pub fn pnti_count(&self) -> u64 {
        self.functions.iter().map(Function::pnti_count).sum()
    }

    pub fn block_count(&self) -> usize {
        self.functions.iter().map(|f| f.blocks.len()).sum()
    }

    pub fn instr(&self, pos: Pos) -> &Instr {
        &self.function(pos.func).block(pos.block).instrs[pos.index]
    }

    /// Every PNTI position in canonical (function, block, instruction) order.
    pub fn pnti_positions(&self) -> Vec<Pos> {
        let mut out = Vec::new();
        for (fi, f) in self.functions.iter().enumerate() {
            for (bid, b) in f.real_blocks() {
                for (index, instr) in b.instrs.iter().enumerate() {
                    if instr.is_pnti() {
                        out.push(Pos {
                            func: FuncId(fi as u32),
                            block: bid,
                            index,
                        });
                    }
                }
            }
        }
        out
    }

    /// Copy with every PSI removed; CFG shape is unchanged.
    pub fn strip_psi(&self) -> Program {
        let mut p = self.clone();
        for f in &mut p.functions {
            for b in &mut f.blocks {
                b.instrs.retain(|i| !matches!(i, Instr::Psi(_)));
            }
        }
        p
    }
}
