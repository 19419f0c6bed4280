//! Level-preserving isomorphisms between the two filtrations of a build,
//! and a pair of filtrations whose quotients already differ.

use std::collections::BTreeMap;

use efsep::abgroup::{GroupElement, Presentation};
use efsep::constructions::{build_truncated_pair, BuildOptions, GuessScript, HSpec, StageClass};
use efsep::equivalences::{is_level_preserving, search_level_preserving, stable_quotient_equiv, Filtration, SearchOptions};
use efsep::trees::Tree;

fn main() -> efsep::Result<()> {
    use StageClass::*;
    let script = GuessScript {
        e0: BTreeMap::from([(1, vec![vec![0], vec![0]])]),
        e1: BTreeMap::from([(3, HSpec::Identity { swap_x: true })]),
    };
    let b = build_truncated_pair(&Tree::chain(5), &[Free, E0, Free, E1, Free], &script, BuildOptions::default())?;
    let (f, g) = (Filtration::from_build(&b, 0), Filtration::from_build(&b, 1));
    println!("quotients agree at every level: {}", stable_quotient_equiv(&f, &g)?);
    for alpha in 0..f.len() - 1 {
        let r = search_level_preserving(&f, &g, alpha, SearchOptions::default())?;
        let ok = match r.found() {
            Some(iso) => format!("found, level preserving {}", is_level_preserving(iso, &f, &g)?),
            None => "absent".to_string(),
        };
        println!("level {alpha}: {ok} after {} nodes", r.nodes);
    }

    // ⟨a, b | 3a = b, 3b = 0⟩ ≅ Z/9 against Z/3 + Z/3, one generator per level
    let e = |v: &[i64]| GroupElement::from_i64(v);
    let a = Filtration::new(Presentation::from_i64(2, &[&[3, -1], &[0, 3]])?, vec![vec![e(&[1, 0])], vec![e(&[0, 1])]], vec![false; 3])?;
    let c = Filtration::new(Presentation::cyclic_sum(&[3, 3]), vec![vec![e(&[1, 0])], vec![e(&[0, 1])]], vec![false; 3])?;
    println!("Z/9 vs Z/3+Z/3 quotients agree: {}", stable_quotient_equiv(&a, &c)?);
    for alpha in 0..a.len() - 1 {
        let r = search_level_preserving(&a, &c, alpha, SearchOptions::default())?;
        println!("level {alpha}: witness {}", r.found().is_some());
    }
    Ok(())
}
