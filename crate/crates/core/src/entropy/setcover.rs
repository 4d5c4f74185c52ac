//! Set-cover solvers used for covering and bracketing numbers.
//!
//! The greedy solver works on arbitrary universes through [`BitSet`]; the
//! exact branch-and-bound solver works on universes of at most 32 elements
//! encoded as `u32` masks and is seeded with the greedy solution.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Fixed-size bit set over `0..len`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitSet {
    words: Vec<u64>,
    len: usize,
}

impl BitSet {
    pub fn new(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn full(len: usize) -> Self {
        let mut s = Self::new(len);
        for i in 0..len {
            s.insert(i);
        }
        s
    }

    pub fn from_indices(len: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::new(len);
        for i in idx {
            s.insert(i);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn intersection_count(&self, other: &BitSet) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn intersect_with(&mut self, other: &BitSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn difference_with(&mut self, other: &BitSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.contains(i))
    }
}

/// Greedy set cover: repeatedly takes the set covering the most uncovered
/// elements, lowest index on ties. Returns `None` if the sets cannot cover
/// `universe`.
///
/// Gains only shrink as elements get covered, so stale heap keys are upper
/// bounds and a popped set whose fresh gain still beats the next key is the
/// greedy choice.
pub fn greedy_cover(universe: &BitSet, sets: &[BitSet]) -> Option<Vec<usize>> {
    let mut uncovered = universe.clone();
    let mut heap: BinaryHeap<(usize, Reverse<usize>)> = sets
        .iter()
        .enumerate()
        .map(|(i, s)| (s.intersection_count(&uncovered), Reverse(i)))
        .filter(|&(g, _)| g > 0)
        .collect();
    let mut chosen = Vec::new();
    while !uncovered.is_empty() {
        let (_, Reverse(i)) = heap.pop()?;
        let gain = sets[i].intersection_count(&uncovered);
        if gain == 0 {
            continue;
        }
        if heap.peek().is_some_and(|&top| top > (gain, Reverse(i))) {
            heap.push((gain, Reverse(i)));
            continue;
        }
        uncovered.difference_with(&sets[i]);
        chosen.push(i);
    }
    Some(chosen)
}

/// Largest universe accepted by [`exact_cover`].
pub const EXACT_UNIVERSE_CAP: usize = 32;

/// Minimum-cardinality cover of `0..universe` by `sets`, by branch and bound.
/// Returns indices into `sets`, or `None` when no cover exists.
pub fn exact_cover(universe: usize, sets: &[u32]) -> Option<Vec<usize>> {
    assert!(universe <= EXACT_UNIVERSE_CAP);
    let full: u32 = if universe == 32 {
        u32::MAX
    } else {
        (1u32 << universe) - 1
    };
    if full == 0 {
        return Some(Vec::new());
    }
    // Keep only maximal sets; among duplicates the lowest index survives.
    let mut cand: Vec<(u32, usize)> = Vec::new();
    for (i, &s) in sets.iter().enumerate() {
        let s = s & full;
        if s == 0 {
            continue;
        }
        let dominated = sets.iter().enumerate().any(|(j, &t)| {
            let t = t & full;
            (s & !t == 0) && (s != t || j < i)
        });
        if !dominated {
            cand.push((s, i));
        }
    }
    if cand.iter().fold(0, |acc, (s, _)| acc | s) != full {
        return None;
    }
    let max_size = cand.iter().map(|(s, _)| s.count_ones()).max().unwrap_or(1);

    let greedy = {
        let mut covered = 0u32;
        let mut picked = Vec::new();
        while covered != full {
            let &(s, i) = cand
                .iter()
                .max_by_key(|(s, i)| ((s & !covered).count_ones(), std::cmp::Reverse(*i)))
                .unwrap();
            covered |= s;
            picked.push(i);
        }
        picked
    };

    struct Search<'a> {
        full: u32,
        cand: &'a [(u32, usize)],
        max_size: u32,
        best: Vec<usize>,
        stack: Vec<usize>,
    }

    impl Search<'_> {
        fn run(&mut self, covered: u32) {
            if covered == self.full {
                if self.stack.len() < self.best.len() {
                    self.best = self.stack.clone();
                }
                return;
            }
            let missing = (self.full & !covered).count_ones();
            let lower = missing.div_ceil(self.max_size) as usize;
            if self.stack.len() + lower >= self.best.len() {
                return;
            }
            // Branch on the uncovered element with the fewest covering sets.
            let mut pivot = 0;
            let mut fewest = usize::MAX;
            let mut rest = self.full & !covered;
            while rest != 0 {
                let e = rest.trailing_zeros();
                rest &= rest - 1;
                let c = self.cand.iter().filter(|(s, _)| s >> e & 1 == 1).count();
                if c < fewest {
                    fewest = c;
                    pivot = e;
                }
            }
            let mut options: Vec<(u32, usize)> = self
                .cand
                .iter()
                .copied()
                .filter(|(s, _)| s >> pivot & 1 == 1)
                .collect();
            options.sort_by_key(|(s, i)| (std::cmp::Reverse((s & !covered).count_ones()), *i));
            for (s, i) in options {
                self.stack.push(i);
                self.run(covered | s);
                self.stack.pop();
            }
        }
    }

    let mut search = Search {
        full,
        cand: &cand,
        max_size,
        best: greedy,
        stack: Vec::new(),
    };
    search.run(0);
    let mut best = search.best;
    best.sort_unstable();
    Some(best)
}
