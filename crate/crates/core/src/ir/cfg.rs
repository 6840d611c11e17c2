use super::{BasicBlock, BlockId, Function, Instr};

/// Fills in successor sets and appends the pseudo exit block.
///
/// Any block ending in `ret` flows to the pseudo block, which is the common
/// successor of all returning blocks and has no successors itself. An existing
/// pseudo block is rebuilt, so the call is idempotent.
pub fn build_cfg(f: &mut Function) {
    f.blocks.retain(|b| !b.is_pseudo);
    let real = f.blocks.len();
    let pseudo = BlockId(real as u32);
    for i in 0..real {
        let next = BlockId(i as u32 + 1);
        let succs = match f.blocks[i].instrs.last() {
            Some(Instr::Goto(t)) => vec![*t],
            Some(Instr::Cgoto(t)) => {
                if *t == next {
                    vec![*t]
                } else {
                    vec![*t, next]
                }
            }
            Some(Instr::Ret) => vec![pseudo],
            _ => vec![next],
        };
        f.blocks[i].succs = succs;
    }
    f.blocks.push(BasicBlock {
        name: String::from("<psb>"),
        instrs: Vec::new(),
        succs: Vec::new(),
        is_pseudo: true,
    });
    f.entry = BlockId(0);
    f.pseudo_exit = pseudo;
}
