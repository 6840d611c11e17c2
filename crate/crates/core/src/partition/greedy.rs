use super::{estimated_size, PageAssignment, PartitionError};
use crate::frg::Frg;
use crate::ir::{FuncId, Program};
use crate::weight::Weight;

#[derive(Clone, Copy, Debug, Default)]
pub struct GreedyOptions {
    /// Skip crediting a page with the PSIs its new function is expected to
    /// save. Every placement then reserves the pessimistic size.
    pub conservative_size: bool,
}

/// State after one placement, for inspection in tests.
#[derive(Clone, Debug)]
pub struct GreedyStep {
    pub placed: FuncId,
    pub page: u32,
    pub func_page: Vec<Option<u32>>,
    /// Affinity table indexed `[page][function]`.
    pub affinity: Vec<Vec<Weight>>,
}

pub fn greedy_partition(frg: &Frg, p: &Program) -> Result<PageAssignment, PartitionError> {
    greedy_partition_with(frg, p, GreedyOptions::default(), |_| {})
}

/// Greedy partitioning.
///
/// Functions are sorted by pessimistic size; the largest seeds page 0. Then,
/// repeatedly, the unplaced function with the greatest affinity to the
/// current page is chosen. If the current page has strictly more free words
/// than the function's size it goes there; otherwise it goes to the page with
/// room that it has the most affinity to, which becomes the current page.
///
/// Free space is charged the pessimistic size. Unless `conservative_size` is
/// set, every placement after the first credits back `psi_cost` words per
/// PNTI of the placed function, betting that co-location removes its PSIs.
/// The final layout is re-checked against exact sizes by the caller.
pub fn greedy_partition_with(
    frg: &Frg,
    p: &Program,
    opts: GreedyOptions,
    mut observe: impl FnMut(&GreedyStep),
) -> Result<PageAssignment, PartitionError> {
    let nof = p.func_count();
    let pages = p.config.page_count as usize;
    let sizes: Vec<u64> = p.func_ids().map(|f| estimated_size(p, f)).collect();
    let mut state = GreedyStep {
        placed: FuncId(0),
        page: 0,
        func_page: vec![None; nof],
        affinity: vec![vec![Weight::zero(); nof]; pages],
    };
    let mut free = vec![p.config.page_size as u64; pages];

    let mut by_size: Vec<FuncId> = p.func_ids().collect();
    by_size.sort_by(|a, b| sizes[b.index()].cmp(&sizes[a.index()]));
    let Some(&first) = by_size.first() else {
        return Ok(PageAssignment {
            func_page: Vec::new(),
            page_free: free,
        });
    };

    let mut current = 0usize;
    if free[current] <= sizes[first.index()] {
        return Err(not_enough(p, first, sizes[first.index()]));
    }
    free[current] -= sizes[first.index()];
    place(frg, &mut state, first, current);
    observe(&state);

    for _ in 1..nof {
        let f = (0..nof)
            .map(|i| FuncId(i as u32))
            .filter(|g| state.func_page[g.index()].is_none())
            .reduce(|best, g| {
                if state.affinity[current][g.index()] > state.affinity[current][best.index()] {
                    g
                } else {
                    best
                }
            })
            .expect("loop runs once per unplaced function");
        let size = sizes[f.index()];
        if free[current] <= size {
            let target = (0..pages)
                .filter(|&pg| free[pg] > size)
                .reduce(|best, pg| {
                    if state.affinity[pg][f.index()] > state.affinity[best][f.index()] {
                        pg
                    } else {
                        best
                    }
                })
                .ok_or_else(|| not_enough(p, f, size))?;
            current = target;
        }
        free[current] -= size;
        if !opts.conservative_size {
            free[current] += p.config.psi_cost as u64 * p.function(f).pnti_count();
        }
        place(frg, &mut state, f, current);
        observe(&state);
    }

    Ok(PageAssignment {
        func_page: state.func_page.into_iter().map(|pg| pg.expect("all placed")).collect(),
        page_free: free,
    })
}

fn place(frg: &Frg, state: &mut GreedyStep, f: FuncId, page: usize) {
    state.func_page[f.index()] = Some(page as u32);
    state.placed = f;
    state.page = page as u32;
    for g in 0..state.func_page.len() {
        if state.func_page[g].is_none() {
            let w = frg.weight(f, FuncId(g as u32));
            if !w.is_zero() {
                state.affinity[page][g] += w;
            }
        }
    }
}

fn not_enough(p: &Program, f: FuncId, size: u64) -> PartitionError {
    PartitionError::NotEnoughMemory {
        func: p.name(f).to_string(),
        size,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;
    use crate::partition::residual_cost;

    /// Functions of the given sizes with no PNTIs (sizes include the `ret`).
    fn sized_program(pages: u32, page_size: u32, sizes: &[(&str, u32)]) -> Program {
        let mut text = format!("pages {pages}\npage_size {page_size}\n");
        for (name, size) in sizes {
            text.push_str(&format!("func {name}:\nb0: pti {}\n ret\n", size - 1));
        }
        parse_program(&text).unwrap()
    }

    fn abcd() -> (Program, Frg) {
        let p = sized_program(2, 1500, &[("a", 1000), ("b", 600), ("c", 500), ("d", 400)]);
        let mut frg = Frg::new(4);
        frg.add(FuncId(0), FuncId(1), &Weight::from_integer(5));
        frg.add(FuncId(1), FuncId(2), &Weight::from_integer(4));
        frg.add(FuncId(2), FuncId(3), &Weight::from_integer(3));
        frg.add(FuncId(0), FuncId(2), &Weight::from_integer(1));
        (p, frg)
    }

    #[test]
    fn abcd_replay() {
        let (p, frg) = abcd();
        let mut order = Vec::new();
        let a =
            greedy_partition_with(&frg, &p, GreedyOptions::default(), |s| order.push((s.placed.0, s.page))).unwrap();
        assert_eq!(order, vec![(0, 0), (1, 1), (2, 1), (3, 0)]);
        assert_eq!(a.func_page, vec![0, 1, 1, 0]);
        assert_eq!(a.page_free, vec![100, 400]);
        assert_eq!(residual_cost(&frg, &a), Weight::from_integer(9));
    }

    #[test]
    fn strict_fit_rejects_exact_fill() {
        let p = sized_program(2, 100, &[("a", 60), ("b", 40)]);
        let a = greedy_partition(&Frg::new(2), &p).unwrap();
        assert_eq!(a.func_page, vec![0, 1]);
        let p = sized_program(1, 100, &[("a", 100)]);
        assert!(matches!(
            greedy_partition(&Frg::new(1), &p),
            Err(PartitionError::NotEnoughMemory { .. })
        ));
    }

    #[test]
    fn single_page_takes_everything() {
        let p = sized_program(1, 2048, &[("m", 10), ("x", 20), ("y", 30)]);
        let a = greedy_partition(&Frg::new(3), &p).unwrap();
        assert_eq!(a.func_page, vec![0, 0, 0]);
    }

    #[test]
    fn oversized_function_is_an_error() {
        let p = sized_program(4, 2048, &[("m", 10), ("huge", 3000)]);
        let e = greedy_partition(&Frg::new(2), &p).unwrap_err();
        assert_eq!(
            e,
            PartitionError::NotEnoughMemory {
                func: "huge".into(),
                size: 3000
            }
        );
    }

    #[test]
    fn complement_credits_pnti_words() {
        let p = parse_program("pages 2\npage_size 20\nfunc a:\nb0: pti 10\n ret\nfunc b:\nb0: call a\n call a\n ret\n")
            .unwrap();
        let mut frg = Frg::new(2);
        frg.add(FuncId(0), FuncId(1), &Weight::one());
        let a = greedy_partition(&frg, &p).unwrap();
        // a: 11 words; b: 3 + 2 PSIs = 5, credited back 2.
        assert_eq!(a.func_page, vec![0, 0]);
        assert_eq!(a.page_free[0], 20 - 11 - 5 + 2);
        let c = greedy_partition_with(
            &frg,
            &p,
            GreedyOptions {
                conservative_size: true,
            },
            |_| {},
        )
        .unwrap();
        assert_eq!(c.page_free[0], 20 - 11 - 5);
    }
}
