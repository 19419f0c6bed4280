//! Builds a five-stage pair, turns the family of partial maps into a
//! strategy for ∃ and verifies it on every small forest, restricted to
//! elements of L1-norm 1 in the low stages.

use std::collections::BTreeMap;

use efsep::abgroup::GroupElement;
use efsep::constructions::{ball, build_truncated_pair, BuildOptions, GuessScript, HSpec, StageClass};
use efsep::efgame::{strategy_from_coherent_family, verify_strategy, CoherentFamily, GameSpec};
use efsep::trees::{forests_up_to_iso, Tree};

fn prefix_ball(total: usize, prefix: usize) -> Vec<GroupElement> {
    ball(prefix, 1).into_iter().map(|x| x.resized(total)).collect()
}

fn main() -> efsep::Result<()> {
    use StageClass::*;
    let script = GuessScript {
        e0: BTreeMap::from([(1, vec![vec![0], vec![0]])]),
        e1: BTreeMap::from([(3, HSpec::Family)]),
    };
    let b = build_truncated_pair(&Tree::chain(5), &[Free, E0, Free, E1, Free], &script, BuildOptions::default())?;
    let s = b.stage_count();
    let (left, right) = (b.presentation(0), b.presentation(1));
    println!("{} generators per side, stage sizes {:?}", b.gen_count(), (0..=s).map(|a| b.stage_size(a)).collect::<Vec<_>>());
    let family = CoherentFamily {
        left: left.clone(),
        right: right.clone(),
        maps: (0..s).map(|v| (v, b.family_map(v).clone())).collect(),
    };
    for n in 1..=3 {
        for t in forests_up_to_iso(n) {
            let prefix = b.stage_size(s + 1 - t.depth());
            let spec = GameSpec::on_balls(
                &left,
                &right,
                &t,
                &prefix_ball(left.gen_count(), prefix),
                &prefix_ball(right.gen_count(), prefix),
            )?;
            let st = strategy_from_coherent_family(&family, &t, b.tree())?;
            println!("{:<8} carriers {:>3}  exists wins: {}", t.canonical_form(), spec.carrier(efsep::efgame::Side::Left).len(), verify_strategy(&spec, &st, 10_000_000)?);
        }
    }
    Ok(())
}
