//! Line-oriented parser for the textual IR.
//!
//! ```text
//! pages 2
//! page_size 2048
//! psi_cost 1        # optional
//! prevalue 1        # optional, defaults to psi_cost
//! func main:
//! b0: pti 10
//!     call g
//!     ret
//! ```

use std::collections::HashMap;

use super::{build_cfg, BasicBlock, BlockId, Config, FuncId, Function, Instr, Program};
use crate::weight::Weight;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}: unresolved callee `{name}`")]
    UnresolvedCallee { line: usize, name: String },
    #[error("{line}: unresolved label `{name}` in function `{func}`")]
    UnresolvedLabel { line: usize, func: String, name: String },
    #[error("{line}: duplicate function `{name}`")]
    DuplicateFunction { line: usize, name: String },
    #[error("{line}: duplicate block `{name}` in function `{func}`")]
    DuplicateBlock { line: usize, func: String, name: String },
    #[error("function `{func}` falls through off its last block (must end in goto or ret)")]
    FallthroughOffEnd { func: String },
    #[error("{line}: Psi in input")]
    PsiInInput { line: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Accept `psi` instructions (for re-reading optimizer output).
    pub allow_psi: bool,
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    parse_program_with(text, &ParseOptions::default())
}

#[derive(Clone, Copy)]
struct Tok<'a> {
    text: &'a str,
    col: usize,
}

enum RawInstr {
    Pti(u32),
    Call(String),
    Goto(String),
    Cgoto(String),
    Ret,
    Psi(u32),
}

struct RawBlock {
    name: String,
    line: usize,
    instrs: Vec<(RawInstr, usize)>,
}

struct RawFunc {
    name: String,
    line: usize,
    blocks: Vec<RawBlock>,
}

fn tokenize(line: &str) -> Vec<Tok<'_>> {
    let code = line.split('#').next().unwrap_or("");
    let mut toks = Vec::new();
    let mut start = None;
    for (i, ch) in code.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                toks.push(Tok {
                    text: &code[s..i],
                    col: s + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        toks.push(Tok {
            text: &code[s..],
            col: s + 1,
        });
    }
    toks
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        col,
        msg: msg.into(),
    }
}

fn int_at(line: usize, tok: Tok<'_>, min: u32) -> Result<u32, ParseError> {
    if !tok.text.bytes().all(|b| b.is_ascii_digit()) {
        return Err(syntax(line, tok.col, format!("expected integer, found `{}`", tok.text)));
    }
    match tok.text.parse::<u32>() {
        Ok(v) if v >= min => Ok(v),
        Ok(_) => Err(syntax(line, tok.col, format!("integer must be at least {min}"))),
        Err(_) => Err(syntax(line, tok.col, "integer out of range")),
    }
}

fn ident_at(line: usize, tok: Tok<'_>) -> Result<String, ParseError> {
    if is_ident(tok.text) {
        Ok(tok.text.to_string())
    } else {
        Err(syntax(
            line,
            tok.col,
            format!("expected identifier, found `{}`", tok.text),
        ))
    }
}

fn parse_instr(line: usize, toks: &[Tok<'_>], opts: &ParseOptions, page_count: u32) -> Result<RawInstr, ParseError> {
    let op = toks[0];
    let arity = |n: usize| -> Result<(), ParseError> {
        if toks.len() == n + 1 {
            Ok(())
        } else if toks.len() <= n {
            Err(syntax(line, op.col, format!("`{}` expects {n} operand(s)", op.text)))
        } else {
            Err(syntax(line, toks[n + 1].col, "unexpected trailing token"))
        }
    };
    let instr = match op.text {
        "pti" => {
            arity(1)?;
            RawInstr::Pti(int_at(line, toks[1], 1)?)
        }
        "call" => {
            arity(1)?;
            RawInstr::Call(ident_at(line, toks[1])?)
        }
        "goto" => {
            arity(1)?;
            RawInstr::Goto(ident_at(line, toks[1])?)
        }
        "cgoto" => {
            arity(1)?;
            RawInstr::Cgoto(ident_at(line, toks[1])?)
        }
        "ret" => {
            arity(0)?;
            RawInstr::Ret
        }
        "psi" => {
            if !opts.allow_psi {
                return Err(ParseError::PsiInInput { line });
            }
            arity(1)?;
            let page = int_at(line, toks[1], 0)?;
            if page >= page_count {
                return Err(syntax(line, toks[1].col, "psi page out of range"));
            }
            RawInstr::Psi(page)
        }
        other => return Err(syntax(line, op.col, format!("unknown instruction `{other}`"))),
    };
    Ok(instr)
}

fn is_terminator(i: &RawInstr) -> bool {
    matches!(i, RawInstr::Goto(_) | RawInstr::Cgoto(_) | RawInstr::Ret)
}

pub fn parse_program_with(text: &str, opts: &ParseOptions) -> Result<Program, ParseError> {
    let mut header: Vec<(&str, Tok<'_>, usize)> = Vec::new();
    let mut funcs: Vec<RawFunc> = Vec::new();
    let mut config: Option<Config> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let toks = tokenize(raw_line);
        if toks.is_empty() {
            continue;
        }
        let first = toks[0];

        if funcs.is_empty() && first.text != "func" {
            const ORDER: [&str; 4] = ["pages", "page_size", "psi_cost", "prevalue"];
            let Some(rank) = ORDER.iter().position(|k| *k == first.text) else {
                return Err(syntax(
                    line,
                    first.col,
                    format!("expected header or `func`, found `{}`", first.text),
                ));
            };
            if let Some((prev, _, _)) = header.last() {
                let prev_rank = ORDER.iter().position(|k| k == prev).unwrap();
                if rank <= prev_rank {
                    return Err(syntax(
                        line,
                        first.col,
                        format!("header `{}` out of order or repeated", first.text),
                    ));
                }
            }
            if header.is_empty() && rank != 0 || header.len() == 1 && rank > 1 {
                return Err(syntax(
                    line,
                    first.col,
                    "header must start with `pages` then `page_size`",
                ));
            }
            if toks.len() != 2 {
                return Err(syntax(line, first.col, format!("`{}` expects one value", first.text)));
            }
            header.push((ORDER[rank], toks[1], line));
            continue;
        }

        if first.text == "func" {
            if config.is_none() {
                config = Some(build_config(&header, line)?);
            }
            let name_tok = match toks.len() {
                2 if toks[1].text.ends_with(':') => Tok {
                    text: &toks[1].text[..toks[1].text.len() - 1],
                    col: toks[1].col,
                },
                3 if toks[2].text == ":" => toks[1],
                _ => return Err(syntax(line, first.col, "expected `func <name>:`")),
            };
            let name = ident_at(line, name_tok)?;
            if funcs.iter().any(|f| f.name == name) {
                return Err(ParseError::DuplicateFunction { line, name });
            }
            if let Some(prev) = funcs.last() {
                if prev.blocks.is_empty() {
                    return Err(syntax(prev.line, 1, format!("function `{}` has no blocks", prev.name)));
                }
            }
            funcs.push(RawFunc {
                name,
                line,
                blocks: Vec::new(),
            });
            continue;
        }

        let func = funcs.last_mut().expect("header branch handles empty funcs");
        let mut rest = &toks[..];
        if let Some(label) = first.text.strip_suffix(':') {
            let name = ident_at(
                line,
                Tok {
                    text: label,
                    col: first.col,
                },
            )?;
            if func.blocks.iter().any(|b| b.name == name) {
                return Err(ParseError::DuplicateBlock {
                    line,
                    func: func.name.clone(),
                    name,
                });
            }
            if let Some(prev) = func.blocks.last() {
                if prev.instrs.is_empty() {
                    return Err(syntax(prev.line, 1, format!("block `{}` is empty", prev.name)));
                }
            }
            func.blocks.push(RawBlock {
                name,
                line,
                instrs: Vec::new(),
            });
            rest = &toks[1..];
            if rest.is_empty() {
                continue;
            }
        }
        let page_count = config.as_ref().map(|c| c.page_count).unwrap_or(1);
        let instr = parse_instr(line, rest, opts, page_count)?;
        let Some(block) = func.blocks.last_mut() else {
            return Err(syntax(line, rest[0].col, "instruction outside a block"));
        };
        if block.instrs.last().is_some_and(|(i, _)| is_terminator(i)) {
            return Err(syntax(
                line,
                rest[0].col,
                "instruction after terminator; start a new block",
            ));
        }
        block.instrs.push((instr, line));
    }

    let config = match config {
        Some(c) => c,
        None => build_config(&header, text.lines().count().max(1))?,
    };
    if funcs.is_empty() {
        return Err(syntax(text.lines().count().max(1), 1, "program has no functions"));
    }
    if let Some(f) = funcs.last() {
        if f.blocks.is_empty() {
            return Err(syntax(f.line, 1, format!("function `{}` has no blocks", f.name)));
        }
        if let Some(b) = f.blocks.last() {
            if b.instrs.is_empty() {
                return Err(syntax(b.line, 1, format!("block `{}` is empty", b.name)));
            }
        }
    }

    resolve(config, funcs)
}

fn build_config(header: &[(&str, Tok<'_>, usize)], line: usize) -> Result<Config, ParseError> {
    let get = |key: &str| header.iter().find(|(k, _, _)| *k == key);
    let (Some(&(_, pages, pl)), Some(&(_, size, sl))) = (get("pages"), get("page_size")) else {
        return Err(syntax(line, 1, "missing `pages` / `page_size` header"));
    };
    let page_count = int_at(pl, pages, 1)?;
    let page_size = int_at(sl, size, 1)?;
    let psi_cost = match get("psi_cost") {
        Some(&(_, t, l)) => int_at(l, t, 1)?,
        None => 1,
    };
    let prevalue = match get("prevalue") {
        Some(&(_, t, l)) => t.text.parse::<Weight>().map_err(|e| syntax(l, t.col, e.to_string()))?,
        None => Weight::from_integer(psi_cost as u64),
    };
    let config = Config {
        page_count,
        page_size,
        psi_cost,
        prevalue,
    };
    config.validate().map_err(ParseError::Config)?;
    Ok(config)
}

fn resolve(config: Config, raw: Vec<RawFunc>) -> Result<Program, ParseError> {
    let func_ids: HashMap<&str, FuncId> = raw
        .iter()
        .enumerate()
        .map(|(i, f)| (f.name.as_str(), FuncId(i as u32)))
        .collect();

    let mut functions = Vec::with_capacity(raw.len());
    for rf in &raw {
        let block_ids: HashMap<&str, BlockId> = rf
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| (b.name.as_str(), BlockId(i as u32)))
            .collect();
        let label = |name: &str, line: usize| {
            block_ids.get(name).copied().ok_or_else(|| ParseError::UnresolvedLabel {
                line,
                func: rf.name.clone(),
                name: name.to_string(),
            })
        };
        let mut blocks = Vec::with_capacity(rf.blocks.len() + 1);
        for rb in &rf.blocks {
            let mut instrs = Vec::with_capacity(rb.instrs.len());
            for (ri, line) in &rb.instrs {
                instrs.push(match ri {
                    RawInstr::Pti(k) => Instr::Pti(*k),
                    RawInstr::Call(name) => {
                        Instr::Call(
                            *func_ids
                                .get(name.as_str())
                                .ok_or_else(|| ParseError::UnresolvedCallee {
                                    line: *line,
                                    name: name.clone(),
                                })?,
                        )
                    }
                    RawInstr::Goto(name) => Instr::Goto(label(name, *line)?),
                    RawInstr::Cgoto(name) => Instr::Cgoto(label(name, *line)?),
                    RawInstr::Ret => Instr::Ret,
                    RawInstr::Psi(p) => Instr::Psi(*p),
                });
            }
            blocks.push(BasicBlock {
                name: rb.name.clone(),
                instrs,
                succs: Vec::new(),
                is_pseudo: false,
            });
        }
        let ends_ok = matches!(
            blocks.last().and_then(|b: &BasicBlock| b.instrs.last()),
            Some(Instr::Goto(_) | Instr::Ret)
        );
        if !ends_ok {
            return Err(ParseError::FallthroughOffEnd { func: rf.name.clone() });
        }
        let mut f = Function {
            name: rf.name.clone(),
            blocks,
            entry: BlockId(0),
            pseudo_exit: BlockId(0),
        };
        build_cfg(&mut f);
        functions.push(f);
    }
    Ok(Program { config, functions })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(text: &str) -> ParseError {
        parse_program(text).unwrap_err()
    }

    const HDR: &str = "pages 2\npage_size 2048\n";

    #[test]
    fn header_defaults() {
        let p = parse_program(&format!("{HDR}func m:\nb: ret\n")).unwrap();
        assert_eq!(p.config.page_count, 2);
        assert_eq!(p.config.page_size, 2048);
        assert_eq!(p.config.psi_cost, 1);
        assert_eq!(p.config.prevalue, Weight::one());

        let p = parse_program("pages 4\npage_size 2048\npsi_cost 2\nfunc m:\nb: ret\n").unwrap();
        assert_eq!(p.config.prevalue, Weight::from_integer(2));

        let p = parse_program("pages 4\npage_size 8\nprevalue 0.25\nfunc m:\nb: ret\n").unwrap();
        assert_eq!(p.config.prevalue, Weight::ratio(1, 4));
    }

    #[test]
    fn comments_and_whitespace() {
        let text =
            "# leading\n\npages 1   # one page\n  page_size\t16\nfunc   main :\n  entry:   pti 3 # body\n\n   ret\n";
        let p = parse_program(text).unwrap();
        assert_eq!(p.functions[0].base_size(), 4);
        assert_eq!(p.functions[0].blocks[0].name, "entry");
    }

    #[test]
    fn psi_rejected_unless_allowed() {
        let text = format!("{HDR}func m:\nb: psi 1\n ret\n");
        assert_eq!(err(&text), ParseError::PsiInInput { line: 4 });
        assert_eq!(err(&text).to_string(), "4: Psi in input");
        let p = parse_program_with(&text, &ParseOptions { allow_psi: true }).unwrap();
        assert_eq!(p.functions[0].blocks[0].instrs[0], Instr::Psi(1));

        let bad = format!("{HDR}func m:\nb: psi 2\n ret\n");
        assert!(matches!(
            parse_program_with(&bad, &ParseOptions { allow_psi: true }),
            Err(ParseError::Syntax { line: 4, .. })
        ));
    }

    #[test]
    fn resolution_errors() {
        assert!(matches!(
            err(&format!("{HDR}func m:\nb: call nope\n ret\n")),
            ParseError::UnresolvedCallee { line: 4, .. }
        ));
        assert!(matches!(
            err(&format!("{HDR}func m:\nb: goto nowhere\n")),
            ParseError::UnresolvedLabel { line: 4, .. }
        ));
        assert!(matches!(
            err(&format!("{HDR}func m:\nb: ret\nfunc m:\nb: ret\n")),
            ParseError::DuplicateFunction { line: 5, .. }
        ));
        assert!(matches!(
            err(&format!("{HDR}func m:\nb: pti 1\nb: ret\n")),
            ParseError::DuplicateBlock { line: 5, .. }
        ));
        assert!(matches!(
            err(&format!("{HDR}func m:\nb: pti 1\n")),
            ParseError::FallthroughOffEnd { .. }
        ));
        assert!(matches!(
            err(&format!("{HDR}func m:\nb: pti 1\nc: cgoto b\n")),
            ParseError::FallthroughOffEnd { .. }
        ));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let e = err(&format!("{HDR}func m:\nb: pti 0\n ret\n"));
        assert_eq!(
            e,
            ParseError::Syntax {
                line: 4,
                col: 8,
                msg: "integer must be at least 1".into()
            }
        );
        assert!(matches!(
            err(&format!("{HDR}func m:\nb: jump x\n")),
            ParseError::Syntax { line: 4, col: 4, .. }
        ));
        assert!(matches!(
            err(&format!("{HDR}func m:\nb: ret\n pti 1\n")),
            ParseError::Syntax { line: 5, .. }
        ));
        assert!(matches!(
            err(&format!("{HDR}func m:\n pti 1\n")),
            ParseError::Syntax { line: 4, .. }
        ));
        assert!(matches!(
            err(&format!("{HDR}func m:\nb:\nc: ret\n")),
            ParseError::Syntax { line: 4, .. }
        ));
        assert!(matches!(
            err("page_size 8\npages 1\nfunc m:\nb: ret\n"),
            ParseError::Syntax { line: 1, .. }
        ));
        assert!(matches!(
            err("pages 1\npage_size 8\nprevalue 1\npsi_cost 1\nfunc m:\nb: ret\n"),
            ParseError::Syntax { line: 4, .. }
        ));
        assert!(matches!(
            err("pages 0\npage_size 8\nfunc m:\nb: ret\n"),
            ParseError::Syntax { line: 1, .. }
        ));
        assert!(matches!(err("pages 1\npage_size 8\n"), ParseError::Syntax { .. }));
        assert!(matches!(
            err(&format!("{HDR}func 9m:\nb: ret\n")),
            ParseError::Syntax { line: 3, .. }
        ));
    }

    #[test]
    fn display_reparses_identically() {
        let text =
            format!("{HDR}func main:\nb0: pti 10\n call g\n cgoto b2\nb1: goto b2\nb2: ret\nfunc g:\nx: pti 5\n ret\n");
        let p = parse_program(&text).unwrap();
        let again = parse_program(&p.to_string()).unwrap();
        assert_eq!(p, again);
    }
}
