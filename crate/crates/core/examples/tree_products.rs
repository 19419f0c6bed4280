//! Small trees, their antichains and the product ordering.

use efsep::trees::{forests_up_to_iso, minimal_antichain, tree_product, Tree};

fn main() -> efsep::Result<()> {
    let chain = Tree::chain(3);
    let fork = Tree::full(2, 2);
    println!("chain(3) {}  depth {}", chain.canonical_form(), chain.depth());
    println!("full(2,2) {}  depth {}", fork.canonical_form(), fork.depth());
    for b in fork.maximal_branches() {
        println!("  branch {b:?}");
    }

    let p = tree_product(&chain, &Tree::chain(2));
    println!("chain(3) x chain(2): {} nodes, depth {}", p.node_count(), p.depth());
    for v in 0..p.node_count() {
        println!("  node {v} label {:?} parent {:?}", p.label(v), p.parent(v));
    }

    let a = minimal_antichain(&fork, 1, 2)?;
    println!("minimal antichain between 1 and 2 in full(2,2): {a:?}");

    for n in 1..=5 {
        println!("forests with {n} nodes: {}", forests_up_to_iso(n).len());
    }
    Ok(())
}
