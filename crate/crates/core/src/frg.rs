//! Weighted function relation graph.
//!
//! Each PNTI whose incoming VOP set `V` differs from the set `T` it requires
//! (`{current}` for gotos, `{callee}` for calls) is a PSI site that placement
//! might make unnecessary. Every pair of distinct functions in `V ∪ T` gets
//! `prevalue / |V|` added to its edge.

use crate::analysis::{DataflowResult, FuncSet};
use crate::ir::{FuncId, Instr, Pos, Program};
use crate::weight::Weight;

/// Symmetric complete graph over a program's functions, stored densely.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frg {
    nof: usize,
    weights: Vec<Weight>,
}

impl Frg {
    pub fn new(nof: usize) -> Self {
        Frg {
            nof,
            weights: vec![Weight::zero(); nof * nof],
        }
    }

    pub fn func_count(&self) -> usize {
        self.nof
    }

    pub fn weight(&self, g: FuncId, h: FuncId) -> &Weight {
        &self.weights[g.index() * self.nof + h.index()]
    }

    /// Adds `w` to the edge `{g, h}`. Self-pairs are ignored.
    pub fn add(&mut self, g: FuncId, h: FuncId, w: &Weight) {
        if g == h {
            return;
        }
        let n = self.nof;
        self.weights[g.index() * n + h.index()] += w;
        self.weights[h.index() * n + g.index()] += w;
    }

    fn set(&mut self, g: usize, h: usize, w: Weight) {
        let n = self.nof;
        self.weights[h * n + g] = w.clone();
        self.weights[g * n + h] = w;
    }

    pub fn total_weight(&self) -> Weight {
        self.edges().map(|(_, _, w)| w).sum()
    }

    /// Nonzero edges `(g, h, w)` with `g < h`, in id order.
    pub fn edges(&self) -> impl Iterator<Item = (FuncId, FuncId, &Weight)> + '_ {
        (0..self.nof).flat_map(move |g| {
            (g + 1..self.nof).filter_map(move |h| {
                let w = &self.weights[g * self.nof + h];
                (!w.is_zero()).then_some((FuncId(g as u32), FuncId(h as u32), w))
            })
        })
    }
}

/// One PNTI with its incoming VOP and required relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PntiSite {
    pub pos: Pos,
    pub vop: FuncSet,
    pub target: FuncId,
}

/// All PNTIs of `p` in canonical order with their VOP-before sets.
pub fn pnti_sites(p: &Program, d: &DataflowResult) -> Vec<PntiSite> {
    let mut sites = Vec::with_capacity(p.pnti_count() as usize);
    for f in p.func_ids() {
        for (b, block) in p.function(f).real_blocks() {
            let vops = d.block_vops(p, f, b);
            for (index, instr) in block.instrs.iter().enumerate() {
                let target = match *instr {
                    Instr::Call(e) => e,
                    Instr::Goto(_) | Instr::Cgoto(_) => f,
                    _ => continue,
                };
                sites.push(PntiSite {
                    pos: Pos {
                        func: f,
                        block: b,
                        index,
                    },
                    vop: vops[index].clone(),
                    target,
                });
            }
        }
    }
    sites
}

pub fn build_frg(p: &Program, d: &DataflowResult) -> Frg {
    let nof = p.func_count();
    // Per unordered pair, how many sites contributed `prevalue / k`, keyed
    // by `k`. Summing exactly once per pair keeps rational arithmetic off
    // the per-site path.
    let mut terms: Vec<Vec<(u64, u64)>> = vec![Vec::new(); nof * nof];
    for site in pnti_sites(p, d) {
        let target = FuncSet::singleton(nof, site.target);
        // An empty VOP only occurs in dead code; no placement avoids that PSI.
        if site.vop.is_empty() || site.vop == target {
            continue;
        }
        let k = site.vop.len() as u64;
        let members: Vec<usize> = site.vop.union(&target).iter().map(|f| f.index()).collect();
        for (i, &g) in members.iter().enumerate() {
            for &h in &members[i + 1..] {
                let pair = &mut terms[g * nof + h];
                match pair.iter_mut().find(|(_, kk)| *kk == k) {
                    Some((count, _)) => *count += 1,
                    None => pair.push((1, k)),
                }
            }
        }
    }
    let unit = p.config.prevalue == Weight::one();
    let mut frg = Frg::new(nof);
    for g in 0..nof {
        for h in g + 1..nof {
            let pair = &terms[g * nof + h];
            if !pair.is_empty() {
                let sum = Weight::harmonic_sum(pair);
                let w = if unit { sum } else { &p.config.prevalue * &sum };
                frg.set(g, h, w);
            }
        }
    }
    frg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::solve;
    use crate::ir::parse_program;

    fn frg_of(body: &str) -> (Program, Frg) {
        let p = parse_program(&format!("pages 2\npage_size 64\n{body}")).unwrap();
        let d = solve(&p);
        let frg = build_frg(&p, &d);
        (p, frg)
    }

    fn w(p: &Program, frg: &Frg, a: &str, b: &str) -> Weight {
        frg.weight(p.func_by_name(a).unwrap(), p.func_by_name(b).unwrap())
            .clone()
    }

    #[test]
    fn call_chain_weights() {
        let (p, frg) = frg_of("func main:\nb0: call g\n call h\n ret\nfunc g:\nb0: pti 4\n ret\nfunc h:\nb0: ret\n");
        assert_eq!(w(&p, &frg, "main", "g"), Weight::one());
        assert_eq!(w(&p, &frg, "g", "h"), Weight::one());
        assert_eq!(w(&p, &frg, "main", "h"), Weight::zero());
        assert_eq!(w(&p, &frg, "h", "g"), Weight::one());
        assert_eq!(w(&p, &frg, "g", "g"), Weight::zero());
        assert_eq!(frg.total_weight(), Weight::from_integer(2));
    }

    #[test]
    fn merged_vop_splits_prevalue() {
        let (p, frg) =
            frg_of("func f:\nb0: cgoto b2\nb1: call g\nb2: call h\n ret\nfunc g:\nb0: pti 1\n ret\nfunc h:\nb0: ret\n");
        assert_eq!(w(&p, &frg, "f", "g"), "1.5".parse().unwrap());
        assert_eq!(w(&p, &frg, "f", "h"), "0.5".parse().unwrap());
        assert_eq!(w(&p, &frg, "g", "h"), "0.5".parse().unwrap());
    }

    #[test]
    fn satisfied_sites_add_nothing() {
        let (_, frg) = frg_of("func f:\nb0: pti 3\n cgoto b0\nb1: goto b2\nb2: ret\n");
        assert_eq!(frg.edges().count(), 0);
        assert!(frg.total_weight().is_zero());
    }

    #[test]
    fn prevalue_scales_weights() {
        let p = parse_program("pages 2\npage_size 64\nprevalue 2.5\nfunc m:\nb0: call g\n ret\nfunc g:\nb0: ret\n")
            .unwrap();
        let frg = build_frg(&p, &solve(&p));
        assert_eq!(frg.weight(FuncId(0), FuncId(1)), &"2.5".parse::<Weight>().unwrap());
    }
}
