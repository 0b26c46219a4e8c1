//! Arc diagrams, loop and block decompositions, block trees and dot-bracket I/O.
//!
//! Vertices are 1-indexed: a structure on `n` vertices has arcs `(i, j)` with
//! `1 <= i < j <= n`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::energy::Loop;
use crate::error::StructureError;

/// Smallest admissible chord length `j - i`.
pub const MIN_CHORD: usize = 4;
/// Largest `n` accepted by [`enumerate_structures`].
pub const ENUMERATION_LIMIT: usize = 16;

/// A base pair `(i, j)` with `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Arc {
    pub i: usize,
    pub j: usize,
}

impl Arc {
    pub fn new(i: usize, j: usize) -> Self {
        Arc { i, j }
    }

    pub fn chord(&self) -> usize {
        self.j - self.i
    }
}

impl fmt::Display for Arc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

impl From<(usize, usize)> for Arc {
    fn from((i, j): (usize, usize)) -> Self {
        Arc { i, j }
    }
}

/// A valid non-crossing diagram; arcs are kept sorted by left end.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SecondaryStructure {
    n: usize,
    arcs: Vec<Arc>,
}

impl SecondaryStructure {
    pub fn empty(n: usize) -> Self {
        SecondaryStructure { n, arcs: Vec::new() }
    }

    /// Checks range, minimum chord length, vertex disjointness and
    /// non-crossing; reports the first violation found.
    pub fn validate<A: Into<Arc> + Copy>(n: usize, arcs: &[A]) -> Result<Self, StructureError> {
        let mut arcs: Vec<Arc> = arcs
            .iter()
            .map(|&a| {
                let a: Arc = a.into();
                if a.i < a.j {
                    a
                } else {
                    Arc::new(a.j, a.i)
                }
            })
            .collect();
        arcs.sort();
        let mut owner: Vec<Option<Arc>> = vec![None; n + 1];
        for &arc in &arcs {
            if arc.i < 1 || arc.j > n || arc.i == arc.j {
                return Err(StructureError::OutOfRange { arc, n });
            }
            if arc.chord() < MIN_CHORD {
                return Err(StructureError::ShortArc { arc });
            }
            for v in [arc.i, arc.j] {
                if let Some(first) = owner[v] {
                    return Err(StructureError::SharedVertex {
                        vertex: v,
                        first,
                        second: arc,
                    });
                }
                owner[v] = Some(arc);
            }
        }
        // arcs sorted by left end: a stack of open arcs detects crossings
        let mut open: Vec<Arc> = Vec::new();
        for &arc in &arcs {
            while let Some(&top) = open.last() {
                if top.j < arc.i {
                    open.pop();
                } else {
                    break;
                }
            }
            if let Some(&top) = open.last() {
                if arc.j > top.j {
                    return Err(StructureError::Crossing {
                        first: top,
                        second: arc,
                    });
                }
            }
            open.push(arc);
        }
        Ok(SecondaryStructure { n, arcs })
    }

    /// Builds from parts already known to be valid (debug-checked).
    pub(crate) fn from_sorted_unchecked(n: usize, arcs: Vec<Arc>) -> Self {
        debug_assert!(SecondaryStructure::validate(n, &arcs).is_ok());
        SecondaryStructure { n, arcs }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    /// `partner[v]` for `v` in `1..=n`; index 0 is unused.
    pub fn pair_table(&self) -> Vec<Option<usize>> {
        let mut t = vec![None; self.n + 1];
        for a in &self.arcs {
            t[a.i] = Some(a.j);
            t[a.j] = Some(a.i);
        }
        t
    }

    /// Shifts every vertex right by `by` on a backbone extended by `by + extra`.
    pub fn translated(&self, by: usize, extra: usize) -> Self {
        SecondaryStructure {
            n: self.n + by + extra,
            arcs: self.arcs.iter().map(|a| Arc::new(a.i + by, a.j + by)).collect(),
        }
    }

    /// Side-by-side concatenation.
    pub fn concat(&self, other: &SecondaryStructure) -> Self {
        let mut arcs = self.arcs.clone();
        arcs.extend(other.arcs.iter().map(|a| Arc::new(a.i + self.n, a.j + self.n)));
        SecondaryStructure {
            n: self.n + other.n,
            arcs,
        }
    }

    /// Arcs directly inside `(i, j)` and the number of unpaired vertices there.
    fn children(&self, pt: &[Option<usize>], i: usize, j: usize) -> (Vec<Arc>, usize) {
        let mut kids = Vec::new();
        let mut unpaired = 0;
        let mut k = i + 1;
        while k < j {
            match pt[k] {
                Some(l) if l > k => {
                    kids.push(Arc::new(k, l));
                    k = l + 1;
                }
                _ => {
                    unpaired += 1;
                    k += 1;
                }
            }
        }
        (kids, unpaired)
    }

    /// One loop per arc, in arc order.
    pub fn loop_decomposition(&self) -> Vec<Loop> {
        let pt = self.pair_table();
        self.arcs
            .iter()
            .map(|&closing| {
                let (kids, unpaired) = self.children(&pt, closing.i, closing.j);
                match kids.len() {
                    0 => Loop::Hairpin { closing, unpaired },
                    1 => Loop::Interior {
                        outer: closing,
                        inner: kids[0],
                        unpaired,
                    },
                    b => Loop::Multi {
                        closing,
                        branches: b + 1,
                        unpaired,
                    },
                }
            })
            .collect()
    }

    /// Maximal rainbow-covered intervals, left to right.
    pub fn irreducible_blocks(&self) -> Blocks {
        self.blocks_between(&self.pair_table(), 1, self.n)
    }

    fn blocks_between(&self, pt: &[Option<usize>], lo: usize, hi: usize) -> Blocks {
        let mut blocks = Vec::new();
        let mut exterior = Vec::new();
        let mut k = lo;
        while k <= hi {
            match pt[k] {
                Some(l) if l > k => {
                    blocks.push(IrreducibleBlock { a: k, b: l });
                    k = l + 1;
                }
                _ => {
                    exterior.push(k);
                    k += 1;
                }
            }
        }
        Blocks { blocks, exterior }
    }

    /// Number of irreducible blocks `X(s)`.
    pub fn block_count(&self) -> usize {
        self.irreducible_blocks().blocks.len()
    }

    /// The sub-structure covered by one block, relabelled to start at 1.
    pub fn restrict(&self, block: IrreducibleBlock) -> SecondaryStructure {
        let arcs = self
            .arcs
            .iter()
            .filter(|a| a.i >= block.a && a.j <= block.b)
            .map(|a| Arc::new(a.i - block.a + 1, a.j - block.a + 1))
            .collect();
        SecondaryStructure {
            n: block.b - block.a + 1,
            arcs,
        }
    }

    pub fn to_tree(&self) -> IrreducibleTree {
        let pt = self.pair_table();
        let roots = self
            .irreducible_blocks()
            .blocks
            .into_iter()
            .map(|b| self.node(&pt, b))
            .collect();
        IrreducibleTree { n: self.n, roots }
    }

    fn node(&self, pt: &[Option<usize>], block: IrreducibleBlock) -> TreeNode {
        let children = if block.b - block.a >= 2 {
            self.blocks_between(pt, block.a + 1, block.b - 1)
                .blocks
                .into_iter()
                .map(|b| self.node(pt, b))
                .collect()
        } else {
            Vec::new()
        };
        TreeNode {
            a: block.a,
            b: block.b,
            children,
        }
    }

    pub fn parse_dot_bracket(text: &str) -> Result<Self, StructureError> {
        let mut stack = Vec::new();
        let mut arcs = Vec::new();
        let mut n = 0;
        for (idx, ch) in text.trim().chars().enumerate() {
            let pos = idx + 1;
            n = pos;
            match ch {
                '(' => stack.push(pos),
                ')' => {
                    let i = stack.pop().ok_or(StructureError::Unbalanced { position: pos })?;
                    arcs.push(Arc::new(i, pos));
                }
                '.' => {}
                other => return Err(StructureError::InvalidChar { ch: other, position: pos }),
            }
        }
        if let Some(&open) = stack.last() {
            return Err(StructureError::Unbalanced { position: open });
        }
        SecondaryStructure::validate(n, &arcs)
    }

    pub fn to_dot_bracket(&self) -> String {
        let mut out = vec![b'.'; self.n];
        for a in &self.arcs {
            out[a.i - 1] = b'(';
            out[a.j - 1] = b')';
        }
        String::from_utf8(out).expect("ascii")
    }
}

impl fmt::Display for SecondaryStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_dot_bracket())
    }
}

impl FromStr for SecondaryStructure {
    type Err = StructureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SecondaryStructure::parse_dot_bracket(s)
    }
}

/// Interval `[a, b]` spanned by the rainbow arc `(a, b)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct IrreducibleBlock {
    pub a: usize,
    pub b: usize,
}

impl IrreducibleBlock {
    pub fn len(&self) -> usize {
        self.b - self.a + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Result of [`SecondaryStructure::irreducible_blocks`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Blocks {
    pub blocks: Vec<IrreducibleBlock>,
    pub exterior: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TreeNode {
    pub a: usize,
    pub b: usize,
    pub children: Vec<TreeNode>,
}

impl TreeNode {
    fn count(&self) -> usize {
        1 + self.children.iter().map(TreeNode::count).sum::<usize>()
    }

    fn depth(&self) -> usize {
        1 + self.children.iter().map(TreeNode::depth).max().unwrap_or(0)
    }

    fn render(&self, level: usize, out: &mut String) {
        out.push_str(&"  ".repeat(level));
        out.push_str(&format!("[{}, {}]\n", self.a, self.b));
        for c in &self.children {
            c.render(level + 1, out);
        }
    }
}

/// Forest of irreducible blocks; a node's children are the blocks strictly
/// inside its rainbow.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IrreducibleTree {
    pub n: usize,
    pub roots: Vec<TreeNode>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TreeStats {
    pub roots: usize,
    pub nodes: usize,
    pub depth: usize,
}

impl IrreducibleTree {
    pub fn stats(&self) -> TreeStats {
        TreeStats {
            roots: self.roots.len(),
            nodes: self.roots.iter().map(TreeNode::count).sum(),
            depth: self.roots.iter().map(TreeNode::depth).max().unwrap_or(0),
        }
    }

    /// Indented text, one node per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.roots {
            r.render(0, &mut out);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }
}

/// Every valid structure on `n` vertices, for `n <= 16`.
pub fn enumerate_structures(n: usize) -> Result<Vec<SecondaryStructure>, StructureError> {
    if n > ENUMERATION_LIMIT {
        return Err(StructureError::TooLarge {
            n,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(enumerate_arcs(1, n)
        .into_iter()
        .map(|mut arcs| {
            arcs.sort();
            SecondaryStructure::from_sorted_unchecked(n, arcs)
        })
        .collect())
}

/// All arc sets on the interval `[lo, hi]`: `lo` is unpaired or paired with some `j`.
fn enumerate_arcs(lo: usize, hi: usize) -> Vec<Vec<Arc>> {
    if lo > hi || hi - lo < MIN_CHORD {
        return vec![Vec::new()];
    }
    let mut out = enumerate_arcs(lo + 1, hi);
    for j in lo + MIN_CHORD..=hi {
        let inside = enumerate_arcs(lo + 1, j - 1);
        let outside = enumerate_arcs(j + 1, hi);
        for a in &inside {
            for b in &outside {
                let mut arcs = Vec::with_capacity(a.len() + b.len() + 1);
                arcs.push(Arc::new(lo, j));
                arcs.extend_from_slice(a);
                arcs.extend_from_slice(b);
                out.push(arcs);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::EnergyParams;
    use proptest::prelude::*;

    fn ss(n: usize, arcs: &[(usize, usize)]) -> SecondaryStructure {
        SecondaryStructure::validate(n, arcs).unwrap()
    }

    #[test]
    fn validation() {
        assert!(SecondaryStructure::validate(5, &[(1, 5)]).is_ok());
        let e = SecondaryStructure::validate(6, &[(1, 4)]).unwrap_err();
        assert!(matches!(e, StructureError::ShortArc { .. }));
        assert!(e.to_string().contains("short arc"));
        let e = SecondaryStructure::validate(10, &[(1, 6), (4, 10)]).unwrap_err();
        assert_eq!(
            e,
            StructureError::Crossing {
                first: Arc::new(1, 6),
                second: Arc::new(4, 10)
            }
        );
        assert!(e.to_string().contains("crossing"));
        let e = SecondaryStructure::validate(12, &[(1, 6), (6, 11)]).unwrap_err();
        assert!(matches!(e, StructureError::SharedVertex { vertex: 6, .. }));
        assert!(SecondaryStructure::validate(5, &[(1, 6)]).is_err());
    }

    #[test]
    fn loops() {
        assert_eq!(
            ss(5, &[(1, 5)]).loop_decomposition(),
            vec![Loop::Hairpin {
                closing: Arc::new(1, 5),
                unpaired: 3
            }]
        );
        let l = ss(9, &[(1, 9), (3, 7)]).loop_decomposition();
        assert!(matches!(l[0], Loop::Interior { unpaired: 2, .. }));
        assert!(matches!(l[1], Loop::Hairpin { unpaired: 3, .. }));
        let l = ss(14, &[(1, 14), (2, 6), (8, 12)]).loop_decomposition();
        assert!(matches!(
            l[0],
            Loop::Multi {
                branches: 3,
                unpaired: 2,
                ..
            }
        ));
        assert!(matches!(l[1], Loop::Hairpin { unpaired: 3, .. }));
        assert!(matches!(l[2], Loop::Hairpin { unpaired: 3, .. }));
    }

    #[test]
    fn energies_of_small_structures() {
        let sub = EnergyParams::subcritical();
        assert_eq!(sub.structure_energy(&SecondaryStructure::empty(9)), 0.0);
        assert_eq!(sub.structure_weight(&SecondaryStructure::empty(9)).to_f64(), 1.0);
        assert!((sub.structure_energy(&ss(5, &[(1, 5)])) + 5.03).abs() < 1e-12);
        assert!((sub.structure_energy(&ss(9, &[(1, 9), (3, 7)])) + 3.03).abs() < 1e-12);
        let w = sub.structure_weight(&ss(5, &[(1, 5)])).to_f64();
        assert!((w - 0.375 * sub.v().powf(-5.03)).abs() < 1e-15);
    }

    #[test]
    fn blocks_and_trees() {
        let b = SecondaryStructure::empty(4).irreducible_blocks();
        assert!(b.blocks.is_empty());
        assert_eq!(b.exterior, vec![1, 2, 3, 4]);
        let b = ss(7, &[(1, 5)]).irreducible_blocks();
        assert_eq!(b.blocks, vec![IrreducibleBlock { a: 1, b: 5 }]);
        assert_eq!(b.exterior, vec![6, 7]);
        assert_eq!(ss(10, &[(1, 5), (6, 10)]).block_count(), 2);

        let t = ss(5, &[(1, 5)]).to_tree().stats();
        assert_eq!((t.roots, t.nodes, t.depth), (1, 1, 1));
        let t = ss(9, &[(1, 9), (3, 7)]).to_tree().stats();
        assert_eq!((t.roots, t.nodes, t.depth), (1, 2, 2));
        let tree = ss(14, &[(1, 14), (2, 6), (8, 12)]).to_tree();
        assert_eq!(tree.roots[0].children.len(), 2);
        assert_eq!(tree.to_text(), "[1, 14]\n  [2, 6]\n  [8, 12]\n");
        let json: serde_json::Value = serde_json::from_str(&tree.to_json()).unwrap();
        assert_eq!(json["roots"][0]["children"][1]["a"], 8);
    }

    #[test]
    fn dot_bracket() {
        let s: SecondaryStructure = "(...)".parse().unwrap();
        assert_eq!(s.arcs(), &[Arc::new(1, 5)]);
        let s: SecondaryStructure = ".....".parse().unwrap();
        assert_eq!((s.len(), s.arcs().len()), (5, 0));
        assert!(matches!(
            "(..)".parse::<SecondaryStructure>(),
            Err(StructureError::ShortArc { .. })
        ));
        assert!("(((...)))".parse::<SecondaryStructure>().is_ok());
        assert!("(((..)))".parse::<SecondaryStructure>().is_err());
        assert!(matches!(
            "(...".parse::<SecondaryStructure>(),
            Err(StructureError::Unbalanced { position: 1 })
        ));
        assert!(matches!(
            "(...))".parse::<SecondaryStructure>(),
            Err(StructureError::Unbalanced { position: 6 })
        ));
        assert!(matches!(
            "(.x.)".parse::<SecondaryStructure>(),
            Err(StructureError::InvalidChar { ch: 'x', .. })
        ));
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_structures(4).unwrap().len(), 1);
        assert_eq!(enumerate_structures(5).unwrap().len(), 2);
        assert_eq!(enumerate_structures(6).unwrap().len(), 4);
        assert!(enumerate_structures(17).is_err());
    }

    #[test]
    fn exhaustive_invariants() {
        let sub = EnergyParams::subcritical();
        for n in 0..=13 {
            for s in enumerate_structures(n).unwrap() {
                let text = s.to_dot_bracket();
                assert_eq!(text.parse::<SecondaryStructure>().unwrap(), s);
                let loops = s.loop_decomposition();
                assert_eq!(loops.len(), s.arcs().len());
                let ext = s.irreducible_blocks();
                let inner: usize = loops.iter().map(Loop::unpaired).sum();
                assert_eq!(inner + ext.exterior.len() + 2 * s.arcs().len(), n);
                assert_eq!(ext.blocks.len(), s.to_tree().stats().roots);
                assert!(sub.structure_weight(&s) > crate::scaled::ScaledReal::ZERO);
            }
        }
    }

    fn arb_structure() -> impl Strategy<Value = SecondaryStructure> {
        // random walk over open/close/skip; unmatched opens are dropped
        (1usize..120, proptest::collection::vec(0u8..3, 120)).prop_map(|(n, moves)| {
            let mut stack: Vec<usize> = Vec::new();
            let mut arcs = Vec::new();
            for pos in 1..=n {
                let remaining = n - pos;
                match moves[pos - 1] {
                    0 if remaining >= MIN_CHORD => stack.push(pos),
                    1 if stack.last().is_some_and(|&i| pos - i >= MIN_CHORD) => {
                        arcs.push((stack.pop().unwrap(), pos))
                    }
                    _ => {}
                }
            }
            SecondaryStructure::validate(n, &arcs).unwrap()
        })
    }

    proptest! {
        #[test]
        fn dot_bracket_round_trip(s in arb_structure()) {
            let back: SecondaryStructure = s.to_dot_bracket().parse().unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn energy_is_translation_invariant(s in arb_structure(), by in 0usize..20, extra in 0usize..5) {
            let sub = EnergyParams::subcritical();
            let t = s.translated(by, extra);
            prop_assert!((sub.structure_energy(&s) - sub.structure_energy(&t)).abs() < 1e-9);
        }

        #[test]
        fn weight_is_multiplicative(a in arb_structure(), b in arb_structure()) {
            let sup = EnergyParams::supercritical();
            let joint = sup.structure_weight(&a.concat(&b));
            let prod = sup.structure_weight(&a) * sup.structure_weight(&b);
            prop_assert!(crate::scaled::ScaledReal::rel_diff(joint, prod) < 1e-12);
            prop_assert_eq!(a.concat(&b).block_count(), a.block_count() + b.block_count());
        }

        #[test]
        fn each_arc_closes_one_loop(s in arb_structure()) {
            let closing: Vec<Arc> = s.loop_decomposition().iter().map(Loop::closing_arc).collect();
            prop_assert_eq!(closing, s.arcs().to_vec());
        }
    }
}
