use std::fmt;

use fixedbitset::FixedBitSet;

use crate::ir::{FuncId, Program};

/// A set of functions of one program, the lattice element of the analysis.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FuncSet(FixedBitSet);

impl FuncSet {
    pub fn empty(nof: usize) -> Self {
        FuncSet(FixedBitSet::with_capacity(nof))
    }

    pub fn full(nof: usize) -> Self {
        let mut s = FixedBitSet::with_capacity(nof);
        s.insert_range(..);
        FuncSet(s)
    }

    pub fn singleton(nof: usize, f: FuncId) -> Self {
        let mut s = Self::empty(nof);
        s.insert(f);
        s
    }

    pub fn universe(&self) -> usize {
        self.0.len()
    }

    pub fn insert(&mut self, f: FuncId) {
        self.0.insert(f.index());
    }

    pub fn contains(&self, f: FuncId) -> bool {
        self.0.contains(f.index())
    }

    pub fn len(&self) -> usize {
        self.0.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_clear()
    }

    pub fn is_subset(&self, other: &FuncSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn union_with(&mut self, other: &FuncSet) {
        self.0.union_with(&other.0);
    }

    pub fn union(&self, other: &FuncSet) -> FuncSet {
        let mut s = self.clone();
        s.union_with(other);
        s
    }

    pub fn difference(&self, other: &FuncSet) -> FuncSet {
        let mut s = self.clone();
        s.0.difference_with(&other.0);
        s
    }

    pub fn complement(&self) -> FuncSet {
        let mut s = self.clone();
        s.0.toggle_range(..);
        s
    }

    /// Members in increasing id order.
    pub fn iter(&self) -> impl Iterator<Item = FuncId> + '_ {
        self.0.ones().map(|i| FuncId(i as u32))
    }

    /// `{a, b}` using function names.
    pub fn display<'a>(&'a self, p: &'a Program) -> impl fmt::Display + 'a {
        Named { set: self, prog: p }
    }
}

impl fmt::Debug for FuncSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.0.ones()).finish()
    }
}

struct Named<'a> {
    set: &'a FuncSet,
    prog: &'a Program,
}

impl fmt::Display for Named<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, id) in self.set.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(self.prog.name(id))?;
        }
        f.write_str("}")
    }
}
