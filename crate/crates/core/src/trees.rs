//! Finite bounded trees: the clocks of the games, and the index
//! combinatorics of the stage constructions.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Node = usize;

/// A finite forest given by parent pointers.
///
/// Product trees remember the factor pair of each node in `labels`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tree {
    parent: Vec<Option<Node>>,
    height: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<(Node, Node)>>,
}

/// JSON form `{"parents":[null,0,1,...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeJson {
    pub parents: Vec<Option<Node>>,
}

pub type Antichain = BTreeSet<Node>;

/// Validates a parent array: every parent exists and no node is its own ancestor.
pub fn build_tree(parents: &[Option<Node>]) -> Result<Tree> {
    let n = parents.len();
    for (i, p) in parents.iter().enumerate() {
        if let Some(p) = *p {
            if p >= n {
                return Err(Error::InvalidTree(format!("node {i} has dangling parent {p}")));
            }
        }
    }
    let mut height = vec![usize::MAX; n];
    for start in 0..n {
        let mut path = Vec::new();
        let mut cur = start;
        loop {
            if height[cur] != usize::MAX {
                break;
            }
            if path.contains(&cur) {
                return Err(Error::InvalidTree(format!("cycle through node {cur}")));
            }
            path.push(cur);
            match parents[cur] {
                Some(p) => cur = p,
                None => {
                    height[cur] = 0;
                    path.pop();
                    break;
                }
            }
        }
        while let Some(v) = path.pop() {
            height[v] = height[parents[v].expect("non-root on path")] + 1;
        }
    }
    Ok(Tree {
        parent: parents.to_vec(),
        height,
        labels: None,
    })
}

impl Tree {
    pub fn from_json(j: &TreeJson) -> Result<Tree> {
        build_tree(&j.parents)
    }

    pub fn to_json(&self) -> TreeJson {
        TreeJson {
            parents: self.parent.clone(),
        }
    }

    /// Linear order `0 < 1 < … < n-1`.
    pub fn chain(n: usize) -> Tree {
        let parents: Vec<Option<Node>> = (0..n).map(|i| i.checked_sub(1)).collect();
        build_tree(&parents).expect("chain is a tree")
    }

    /// `n` pairwise incomparable roots.
    pub fn antichain(n: usize) -> Tree {
        build_tree(&vec![None; n]).expect("roots form a tree")
    }

    /// Full `k`-branching tree with levels `0..depth`, numbered breadth first.
    pub fn full(k: usize, depth: usize) -> Tree {
        let mut parents: Vec<Option<Node>> = Vec::new();
        if depth == 0 || k == 0 {
            return build_tree(&parents).expect("empty tree");
        }
        parents.push(None);
        let mut level = vec![0usize];
        for _ in 1..depth {
            let mut next = Vec::new();
            for &p in &level {
                for _ in 0..k {
                    next.push(parents.len());
                    parents.push(Some(p));
                }
            }
            level = next;
        }
        build_tree(&parents).expect("full tree")
    }

    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn parent(&self, v: Node) -> Option<Node> {
        self.parent[v]
    }

    pub fn parents(&self) -> &[Option<Node>] {
        &self.parent
    }

    pub fn height(&self, v: Node) -> usize {
        self.height[v]
    }

    pub fn depth(&self) -> usize {
        self.height.iter().map(|h| h + 1).max().unwrap_or(0)
    }

    /// Factor pair of a product node.
    pub fn label(&self, v: Node) -> Option<(Node, Node)> {
        self.labels.as_ref().map(|l| l[v])
    }

    pub fn roots(&self) -> Vec<Node> {
        (0..self.node_count()).filter(|&v| self.parent[v].is_none()).collect()
    }

    pub fn children(&self, v: Node) -> Vec<Node> {
        (0..self.node_count()).filter(|&c| self.parent[c] == Some(v)).collect()
    }

    /// Strict tree order `a <_T b`.
    pub fn is_below(&self, a: Node, b: Node) -> bool {
        let mut cur = self.parent[b];
        while let Some(c) = cur {
            if c == a {
                return true;
            }
            cur = self.parent[c];
        }
        false
    }

    pub fn comparable(&self, a: Node, b: Node) -> bool {
        a == b || self.is_below(a, b) || self.is_below(b, a)
    }

    /// Nodes strictly above `v`; all nodes when `v` is `None`.
    pub fn successors(&self, v: Option<Node>) -> Vec<Node> {
        match v {
            None => (0..self.node_count()).collect(),
            Some(v) => (0..self.node_count()).filter(|&t| self.is_below(v, t)).collect(),
        }
    }

    /// Root-to-`v` path.
    pub fn branch_to(&self, v: Node) -> Vec<Node> {
        let mut path = vec![v];
        let mut cur = self.parent[v];
        while let Some(c) = cur {
            path.push(c);
            cur = self.parent[c];
        }
        path.reverse();
        path
    }

    /// Maximal branches, one per leaf, in leaf order.
    pub fn maximal_branches(&self) -> Vec<Vec<Node>> {
        (0..self.node_count())
            .filter(|&v| self.children(v).is_empty())
            .map(|v| self.branch_to(v))
            .collect()
    }

    pub fn is_antichain(&self, nodes: &Antichain) -> bool {
        let v: Vec<Node> = nodes.iter().copied().collect();
        v.iter().all(|&a| a < self.node_count())
            && v.iter()
                .enumerate()
                .all(|(i, &a)| v[i + 1..].iter().all(|&b| !self.comparable(a, b)))
    }

    /// Does the numbering extend the tree order (`s <_T t ⇒ s < t`)?
    pub fn is_ordinal_numbered(&self) -> bool {
        self.parent
            .iter()
            .enumerate()
            .all(|(i, p)| p.map_or(true, |p| p < i))
    }

    /// Canonical string of the unordered forest, for isomorphism dedup.
    pub fn canonical_form(&self) -> String {
        fn enc(t: &Tree, v: Node) -> String {
            let mut kids: Vec<String> = t.children(v).into_iter().map(|c| enc(t, c)).collect();
            kids.sort();
            format!("({})", kids.concat())
        }
        let mut roots: Vec<String> = self.roots().into_iter().map(|r| enc(self, r)).collect();
        roots.sort();
        roots.concat()
    }
}

/// Pairs of same-height nodes ordered coordinatewise, numbered by height
/// and then lexicographically.
pub fn tree_product(t1: &Tree, t2: &Tree) -> Tree {
    let mut pairs: Vec<(usize, Node, Node)> = Vec::new();
    for a in 0..t1.node_count() {
        for b in 0..t2.node_count() {
            if t1.height(a) == t2.height(b) {
                pairs.push((t1.height(a), a, b));
            }
        }
    }
    pairs.sort();
    let index = |a: Node, b: Node| {
        pairs
            .iter()
            .position(|&(_, x, y)| x == a && y == b)
            .expect("parent pair has equal heights")
    };
    let parents: Vec<Option<Node>> = pairs
        .iter()
        .map(|&(_, a, b)| match (t1.parent(a), t2.parent(b)) {
            (Some(pa), Some(pb)) => Some(index(pa, pb)),
            _ => None,
        })
        .collect();
    let mut t = build_tree(&parents).expect("product of trees is a tree");
    t.labels = Some(pairs.iter().map(|&(_, a, b)| (a, b)).collect());
    t
}

/// The `<_T`-minimal elements of `{t : β ≤ t < δ}`.
pub fn minimal_antichain(t: &Tree, beta: Node, delta: Node) -> Result<Antichain> {
    if beta > delta {
        return Err(Error::InvalidAntichain(format!("β = {beta} exceeds δ = {delta}")));
    }
    let delta = delta.min(t.node_count());
    Ok((beta..delta)
        .filter(|&s| !(beta..delta).any(|r| t.is_below(r, s)))
        .collect())
}

/// `Θ₀ ⊆ Θ₁ ⊆ …` with `Θₙ` the first `n+1` members by ascending id,
/// truncated to `len` entries.
pub fn antichain_chain_cover(a: &Antichain, len: usize) -> Result<Vec<Antichain>> {
    if a.is_empty() {
        return Err(Error::InvalidAntichain("cover of an empty antichain".into()));
    }
    let v: Vec<Node> = a.iter().copied().collect();
    Ok((0..len)
        .map(|n| v[..(n + 1).min(v.len())].iter().copied().collect())
        .collect())
}

/// Strictly increasing stage sequence converging (finitely) to `target`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ladder {
    pub target: usize,
    pub steps: Vec<usize>,
}

impl Ladder {
    /// Checks monotonicity, the terminal step `target - 1`, and that no
    /// step is an E-stage.
    pub fn validate(&self, is_e: impl Fn(usize) -> bool) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::InvalidLadder("empty ladder".into()));
        }
        if self.steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidLadder(format!("steps {:?} not increasing", self.steps)));
        }
        if self.steps.last().map(|&s| s + 1) != Some(self.target) {
            return Err(Error::InvalidLadder(format!(
                "last step of {:?} is not δ - 1 = {}",
                self.steps,
                self.target.wrapping_sub(1)
            )));
        }
        if let Some(&s) = self.steps.iter().find(|&&s| is_e(s)) {
            return Err(Error::InvalidLadder(format!("step {s} is an E-stage")));
        }
        Ok(())
    }
}

/// All forests on `n` nodes with `parent < child`, one per isomorphism class.
pub fn forests_up_to_iso(n: usize) -> Vec<Tree> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut parents: Vec<Option<Node>> = Vec::with_capacity(n);
    fn rec(
        n: usize,
        parents: &mut Vec<Option<Node>>,
        seen: &mut BTreeSet<String>,
        out: &mut Vec<Tree>,
    ) {
        if parents.len() == n {
            let t = build_tree(parents).expect("parent < child");
            if seen.insert(t.canonical_form()) {
                out.push(t);
            }
            return;
        }
        let i = parents.len();
        for p in std::iter::once(None).chain((0..i).map(Some)) {
            parents.push(p);
            rec(n, parents, seen, out);
            parents.pop();
        }
    }
    rec(n, &mut parents, &mut seen, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[Node]) -> Antichain {
        v.iter().copied().collect()
    }

    #[test]
    fn build_examples() {
        let t = build_tree(&[None]).unwrap();
        assert_eq!(t.node_count(), 1);
        let t = build_tree(&[None, Some(0), Some(1)]).unwrap();
        assert_eq!(t.height(2), 2);
        assert!(t.is_below(0, 2));
        assert!(matches!(build_tree(&[Some(1), Some(0)]), Err(Error::InvalidTree(_))));
        assert!(matches!(build_tree(&[Some(5)]), Err(Error::InvalidTree(_))));
        // numbering need not follow the order
        let t = build_tree(&[Some(1), None]).unwrap();
        assert!(!t.is_ordinal_numbered());
        assert_eq!(t.height(0), 1);
    }

    #[test]
    fn product_examples() {
        let c1 = Tree::chain(1);
        assert_eq!(tree_product(&c1, &c1).node_count(), 1);
        let p = tree_product(&c1, &Tree::antichain(2));
        assert_eq!(p.roots().len(), 2);
        assert_eq!(tree_product(&Tree::antichain(2), &Tree::antichain(3)).roots().len(), 6);
        let p = tree_product(&Tree::chain(3), &Tree::full(2, 3));
        assert_eq!(p.node_count(), 1 + 2 + 4);
        assert_eq!(p.label(p.node_count() - 1), Some((2, 6)));
        assert!(p.is_ordinal_numbered());
    }

    #[test]
    fn antichain_examples() {
        assert_eq!(minimal_antichain(&Tree::chain(4), 1, 3).unwrap(), set(&[1]));
        let f = build_tree(&[None, Some(0), Some(0)]).unwrap();
        assert_eq!(minimal_antichain(&f, 1, 3).unwrap(), set(&[1, 2]));
        assert_eq!(minimal_antichain(&f, 0, 3).unwrap(), set(&[0]));
        assert!(minimal_antichain(&f, 2, 1).is_err());
    }

    #[test]
    fn cover_examples() {
        let c = antichain_chain_cover(&set(&[3, 5, 9]), 5).unwrap();
        assert_eq!(c, vec![set(&[3]), set(&[3, 5]), set(&[3, 5, 9]), set(&[3, 5, 9]), set(&[3, 5, 9])]);
        assert_eq!(antichain_chain_cover(&set(&[4]), 2).unwrap(), vec![set(&[4]), set(&[4])]);
        assert!(antichain_chain_cover(&set(&[]), 2).is_err());
    }

    #[test]
    fn ladder_validation() {
        let ok = Ladder { target: 4, steps: vec![0, 1, 3] };
        assert!(ok.validate(|s| s == 2).is_ok());
        assert!(ok.validate(|s| s == 1).is_err());
        assert!(Ladder { target: 4, steps: vec![1, 0, 3] }.validate(|_| false).is_err());
        assert!(Ladder { target: 5, steps: vec![0, 3] }.validate(|_| false).is_err());
    }

    #[test]
    fn forest_counts() {
        // rooted forests on n unlabeled nodes: 1, 2, 4, 9, 20, 48
        let counts: Vec<usize> = (1..=6).map(|n| forests_up_to_iso(n).len()).collect();
        assert_eq!(counts, vec![1, 2, 4, 9, 20, 48]);
    }
}
