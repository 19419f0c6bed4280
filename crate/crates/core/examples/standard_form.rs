//! Projections on both sides of a build with a divisibility chain, and the
//! congruence check along each admissible ladder.

use std::collections::BTreeMap;

use efsep::constructions::{build_projections, build_truncated_pair, canonical_ladders, check_standard_form, BuildOptions, GuessScript, HSpec, StageClass};
use efsep::trees::Tree;

fn main() -> efsep::Result<()> {
    use StageClass::*;
    let script = GuessScript {
        e0: BTreeMap::from([(1, vec![vec![0], vec![0]])]),
        e1: BTreeMap::from([(3, HSpec::Identity { swap_x: false })]),
    };
    let b = build_truncated_pair(&Tree::chain(5), &[Free, E0, Free, E1, Free], &script, BuildOptions::default())?;
    let chain = b.chain(3)?;
    println!("chain at stage 3: primes {:?}, cases {:?}", chain.primes(), chain.cases);
    println!("stages a ladder to 3 must pass through: {:?}", b.ladder_support(3));

    let (p0, p1) = build_projections(&b)?;
    println!("coherent: left {} right {}", p0.check_coherence()?, p1.check_coherence()?);
    for (side, p) in [("left", &p0), ("right", &p1)] {
        for ladder in b.valid_ladders(3) {
            let mut ladders = canonical_ladders(&b);
            ladders.insert(3, ladder.clone());
            println!("{side:<5} ladder {:?}: {}", ladder.steps, check_standard_form(&b, p, &ladders)?);
        }
    }

    // a ladder skipping the gadget stage loses the congruence
    let mut skip = canonical_ladders(&b);
    skip.get_mut(&3).expect("chain stage").steps = vec![0, 2];
    println!("left  ladder [0, 2]: {}", check_standard_form(&b, &p0, &skip)?);
    Ok(())
}
