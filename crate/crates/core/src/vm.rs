//! Paged-memory machine used to check PSI placement.
//!
//! Functions are laid out contiguously inside their pages. Execution keeps a
//! PC, the PSR and a hardware stack of full return addresses. `goto`, taken
//! `cgoto` and `call` fault unless the PSR names the target's page; `ret`
//! pops a full address and ignores the PSR.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ir::{BlockId, FuncId, Instr, Pos};
use crate::psi::OptimizedProgram;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LayoutError {
    #[error("page {page} overflows: {used} words > {capacity}")]
    Overflow { page: u32, used: u64, capacity: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Op {
    Pti(u32),
    Call { func: FuncId, addr: u32 },
    Goto { block: BlockId, addr: u32 },
    Cgoto { block: BlockId, addr: u32 },
    Ret,
    Psi(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Slot {
    op: Op,
    pos: Pos,
    words: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    page_size: u32,
    /// Instruction starting at each address; `None` for the tail words of
    /// multi-word instructions and unused memory.
    words: Vec<Option<Slot>>,
    pub func_base: Vec<u32>,
    pub block_addr: Vec<Vec<u32>>,
    pub func_page: Vec<u32>,
    entry: FuncId,
}

impl Image {
    pub fn page_of(&self, addr: u32) -> u32 {
        addr / self.page_size
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub fn layout(o: &OptimizedProgram) -> Result<Image, LayoutError> {
    let p = &o.program;
    let cfg = &p.config;
    let psi_cost = cfg.psi_cost;
    let page_size = cfg.page_size;
    let mut next = vec![0u64; cfg.page_count as usize];
    let mut func_base = Vec::with_capacity(p.func_count());
    let mut block_addr = Vec::with_capacity(p.func_count());

    for (fi, f) in p.functions.iter().enumerate() {
        let page = o.assignment.func_page[fi];
        let offset = next[page as usize];
        let size = f.size(psi_cost);
        if offset + size > page_size as u64 {
            return Err(LayoutError::Overflow {
                page,
                used: offset + size,
                capacity: page_size as u64,
            });
        }
        let base = page as u64 * page_size as u64 + offset;
        func_base.push(base as u32);
        let mut addr = base as u32;
        let mut blocks = Vec::with_capacity(f.blocks.len());
        for b in &f.blocks {
            blocks.push(addr);
            addr += b.instrs.iter().map(|i| i.words(psi_cost) as u32).sum::<u32>();
        }
        block_addr.push(blocks);
        next[page as usize] = offset + size;
    }

    let total = cfg.page_count as usize * page_size as usize;
    let mut words = vec![None; total];
    for (fi, f) in p.functions.iter().enumerate() {
        let func = FuncId(fi as u32);
        for (b, block) in f.real_blocks() {
            let mut addr = block_addr[fi][b.index()];
            for (index, instr) in block.instrs.iter().enumerate() {
                let op = match *instr {
                    Instr::Pti(k) => Op::Pti(k),
                    Instr::Call(g) => Op::Call {
                        func: g,
                        addr: func_base[g.index()],
                    },
                    Instr::Goto(t) => Op::Goto {
                        block: t,
                        addr: block_addr[fi][t.index()],
                    },
                    Instr::Cgoto(t) => Op::Cgoto {
                        block: t,
                        addr: block_addr[fi][t.index()],
                    },
                    Instr::Ret => Op::Ret,
                    Instr::Psi(k) => Op::Psi(k),
                };
                let words_used = instr.words(psi_cost) as u32;
                words[addr as usize] = Some(Slot {
                    op,
                    pos: Pos { func, block: b, index },
                    words: words_used,
                });
                addr += words_used;
            }
        }
    }
    Ok(Image {
        page_size,
        words,
        func_base,
        block_addr,
        func_page: o.assignment.func_page.clone(),
        entry: p.entry_function(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Event {
    Call(FuncId),
    Goto { func: FuncId, block: BlockId },
    Ret,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Trace {
    pub events: Vec<Event>,
    /// Words executed, not counting PSIs.
    pub steps: u64,
    /// False when the run stopped at the step bound.
    pub halted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RunError {
    #[error("page fault at {pos}: PSR = {psr}, target page = {expected}")]
    PageFault { pos: Pos, psr: u32, expected: u32 },
    #[error("PC {0} does not hold an instruction")]
    BadPc(u32),
}

/// Executes `img` from the entry function until it returns or `max_steps`
/// words have executed.
///
/// Each taken/not-taken choice of a `cgoto` consumes the next decision; once
/// the decisions run out every `cgoto` falls through. PSIs cost no steps so
/// that images differing only in PSIs stop at the same point.
pub fn run(img: &Image, decisions: &[bool], max_steps: u64) -> Result<Trace, RunError> {
    let mut trace = Trace::default();
    let mut pc = img.func_base[img.entry.index()];
    let mut psr = img.func_page[img.entry.index()];
    let mut stack: Vec<u32> = Vec::new();
    let mut decisions = decisions.iter().copied();

    let check = |slot: &Slot, target: u32, psr: u32| -> Result<(), RunError> {
        let expected = img.page_of(target);
        if psr == expected {
            Ok(())
        } else {
            Err(RunError::PageFault {
                pos: slot.pos,
                psr,
                expected,
            })
        }
    };

    while trace.steps < max_steps {
        let slot = img
            .words
            .get(pc as usize)
            .copied()
            .flatten()
            .ok_or(RunError::BadPc(pc))?;
        match slot.op {
            Op::Psi(k) => {
                psr = k;
                pc += slot.words;
                continue;
            }
            Op::Pti(k) => {
                let k = (k as u64).min(max_steps - trace.steps);
                trace.steps += k;
                pc += k as u32;
                continue;
            }
            _ => trace.steps += 1,
        }
        match slot.op {
            Op::Call { func, addr } => {
                check(&slot, addr, psr)?;
                trace.events.push(Event::Call(func));
                stack.push(pc + 1);
                pc = addr;
            }
            Op::Goto { block, addr } => {
                check(&slot, addr, psr)?;
                trace.events.push(Event::Goto {
                    func: slot.pos.func,
                    block,
                });
                pc = addr;
            }
            Op::Cgoto { block, addr } => {
                if decisions.next().unwrap_or(false) {
                    check(&slot, addr, psr)?;
                    trace.events.push(Event::Goto {
                        func: slot.pos.func,
                        block,
                    });
                    pc = addr;
                } else {
                    pc += 1;
                }
            }
            Op::Ret => {
                trace.events.push(Event::Ret);
                match stack.pop() {
                    Some(addr) => pc = addr,
                    None => {
                        trace.halted = true;
                        return Ok(trace);
                    }
                }
            }
            Op::Psi(_) | Op::Pti(_) => unreachable!(),
        }
    }
    Ok(trace)
}

/// Same observable control flow.
pub fn equivalent(a: &Trace, b: &Trace) -> bool {
    a.events == b.events
}

/// Decisions drawn per stream by [`verify_streams`].
pub const STREAM_LEN: usize = 1024;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VerifySummary {
    pub runs: u64,
    /// Runs that reached a final `ret` in the optimised image.
    pub halted: u64,
    /// Faulting runs as (stream seed, which image, error).
    pub faults: Vec<(u64, &'static str, RunError)>,
    /// Stream seeds whose traces differ.
    pub divergences: Vec<u64>,
}

impl VerifySummary {
    pub fn passed(&self) -> bool {
        self.faults.is_empty() && self.divergences.is_empty()
    }
}

/// Runs both images over `count` decision streams seeded `base_seed..` and
/// compares the traces.
pub fn verify_streams(naive: &Image, opt: &Image, base_seed: u64, count: u64, max_steps: u64) -> VerifySummary {
    let mut summary = VerifySummary::default();
    for i in 0..count {
        let seed = base_seed.wrapping_add(i);
        let decisions = decision_stream(seed, STREAM_LEN);
        summary.runs += 1;
        let a = run(naive, &decisions, max_steps);
        let b = run(opt, &decisions, max_steps);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                if b.halted {
                    summary.halted += 1;
                }
                if !equivalent(&a, &b) {
                    summary.divergences.push(seed);
                }
            }
            (Err(e), _) => summary.faults.push((seed, "naive", e)),
            (_, Err(e)) => summary.faults.push((seed, "optimized", e)),
        }
    }
    summary
}

/// Replayable branch decisions: `len` fair coin flips drawn from `seed`.
pub fn decision_stream(seed: u64, len: usize) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_bool(0.5)).collect()
}
