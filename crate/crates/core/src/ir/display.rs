use std::fmt;

use super::{Function, Instr, Program};

impl fmt::Display for Program {
    /// Canonical text form; re-parses to an identical model.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.config;
        writeln!(f, "pages {}", c.page_count)?;
        writeln!(f, "page_size {}", c.page_size)?;
        writeln!(f, "psi_cost {}", c.psi_cost)?;
        writeln!(f, "prevalue {}", c.prevalue)?;
        for func in &self.functions {
            writeln!(f, "func {}:", func.name)?;
            for (_, b) in func.real_blocks() {
                writeln!(f, "{}:", b.name)?;
                for i in &b.instrs {
                    writeln!(
                        f,
                        "  {}",
                        InstrText {
                            instr: i,
                            prog: self,
                            func
                        }
                    )?;
                }
            }
        }
        Ok(())
    }
}

struct InstrText<'a> {
    instr: &'a Instr,
    prog: &'a Program,
    func: &'a Function,
}

impl fmt::Display for InstrText<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self.instr {
            Instr::Pti(k) => write!(f, "pti {k}"),
            Instr::Call(g) => write!(f, "call {}", self.prog.name(g)),
            Instr::Goto(b) => write!(f, "goto {}", self.func.block(b).name),
            Instr::Cgoto(b) => write!(f, "cgoto {}", self.func.block(b).name),
            Instr::Ret => f.write_str("ret"),
            Instr::Psi(p) => write!(f, "psi {p}"),
        }
    }
}

impl Program {
    /// Renders one instruction the way the text format spells it.
    pub fn instr_text(&self, func: super::FuncId, instr: &Instr) -> String {
        InstrText {
            instr,
            prog: self,
            func: self.function(func),
        }
        .to_string()
    }
}
