//! The registry `W_α[Θ]` of gadget elements indexed by finite antichains.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trees::{Antichain, Node, Tree};

/// `w[σ,n]`, recorded by stage and index only; its value lives in the build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WName {
    pub sigma: usize,
    pub n: usize,
}

/// Cells keyed by the sorted antichain. A cell only ever grows.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WRegistry {
    cells: BTreeMap<Vec<Node>, Vec<WName>>,
}

fn key(theta: &Antichain) -> Vec<Node> {
    theta.iter().copied().collect()
}

impl WRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// `W_α[Θ]`: members contributed by gadget stages below `alpha`.
    pub fn at(&self, alpha: usize, theta: &Antichain) -> Vec<WName> {
        self.cells
            .get(&key(theta))
            .map(|v| v.iter().copied().filter(|w| w.sigma < alpha).collect())
            .unwrap_or_default()
    }

    pub fn cells(&self) -> impl Iterator<Item = (&Vec<Node>, &Vec<WName>)> {
        self.cells.iter()
    }

    /// Every registered `(Θ, w)` pair.
    pub fn entries(&self) -> Vec<(Antichain, WName)> {
        self.cells
            .iter()
            .flat_map(|(k, v)| v.iter().map(move |w| (k.iter().copied().collect(), *w)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.cells.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Is `W_α[Θ] ⊆ W_β[Θ]` for every cell whenever `α ≤ β`?
    pub fn is_monotone(&self, stages: usize) -> bool {
        self.cells.keys().all(|k| {
            let theta: Antichain = k.iter().copied().collect();
            (0..stages).all(|a| {
                let lower = self.at(a, &theta);
                let upper = self.at(a + 1, &theta);
                lower.iter().all(|w| upper.contains(w))
            })
        })
    }
}

/// Validates one `Υ(σ)` sequence: nonempty sets of nodes below `σ` whose
/// union is an antichain.
pub fn validate_upsilon(tree: &Tree, sigma: usize, thetas: &[Vec<Node>]) -> Result<()> {
    let mut union = Antichain::new();
    for (n, theta) in thetas.iter().enumerate() {
        if theta.is_empty() {
            return Err(Error::InvalidAntichain(format!("Θ_{n} at stage {sigma} is empty")));
        }
        if let Some(t) = theta.iter().find(|&&t| t >= sigma || t >= tree.node_count()) {
            return Err(Error::InvalidAntichain(format!(
                "Θ_{n} at stage {sigma} contains node {t}, not below {sigma}"
            )));
        }
        union.extend(theta.iter().copied());
    }
    if !tree.is_antichain(&union) {
        return Err(Error::InvalidAntichain(format!(
            "the sets chosen at stage {sigma} do not form an antichain"
        )));
    }
    Ok(())
}

/// Adds `w[σ,n]` to the cell `Θ_n^σ` for each `n`; other cells are copied.
pub fn update_w_registry(reg: &WRegistry, tree: &Tree, sigma: usize, thetas: &[Vec<Node>]) -> Result<WRegistry> {
    validate_upsilon(tree, sigma, thetas)?;
    let mut out = reg.clone();
    for (n, theta) in thetas.iter().enumerate() {
        let mut k = theta.clone();
        k.sort_unstable();
        k.dedup();
        out.cells.entry(k).or_default().push(WName { sigma, n });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[Node]) -> Antichain {
        v.iter().copied().collect()
    }

    #[test]
    fn fresh_registry_gains_one_w_per_cell() {
        let t = Tree::antichain(4);
        let r = update_w_registry(&WRegistry::new(), &t, 3, &[vec![0], vec![1], vec![2]]).unwrap();
        for n in 0..3 {
            assert_eq!(r.at(4, &set(&[n])), vec![WName { sigma: 3, n }]);
        }
        // not yet visible at stage 3 itself
        assert!(r.at(3, &set(&[0])).is_empty());
        assert!(r.is_monotone(5));
    }

    #[test]
    fn disjoint_upsilon_images_give_disjoint_cells() {
        let t = Tree::antichain(6);
        let r = update_w_registry(&WRegistry::new(), &t, 4, &[vec![0], vec![1]]).unwrap();
        let r = update_w_registry(&r, &t, 5, &[vec![2], vec![3]]).unwrap();
        let cells: Vec<_> = r.cells().map(|(_, v)| v.clone()).collect();
        for (i, a) in cells.iter().enumerate() {
            for b in &cells[i + 1..] {
                assert!(a.iter().all(|w| !b.contains(w)));
            }
        }
        assert!(r.entries().iter().all(|(_, w)| w.sigma == 4 || w.sigma == 5));
    }

    #[test]
    fn invalid_upsilon_is_rejected() {
        let chain = Tree::chain(4);
        assert!(update_w_registry(&WRegistry::new(), &chain, 3, &[vec![0], vec![1]]).is_err());
        assert!(update_w_registry(&WRegistry::new(), &chain, 1, &[vec![1]]).is_err());
        assert!(update_w_registry(&WRegistry::new(), &chain, 2, &[vec![]]).is_err());
        assert!(update_w_registry(&WRegistry::new(), &chain, 2, &[vec![0], vec![0]]).is_ok());
    }
}
