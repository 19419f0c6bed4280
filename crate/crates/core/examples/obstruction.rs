//! Installs a divisibility chain against a swapped guess and searches all
//! small triples `(r, d, g)` for one that escapes the congruence test.

use std::collections::BTreeMap;

use efsep::constructions::{
    ball, build_truncated_pair, extension_exists, BuildOptions, GuessScript, HSpec, StageClass, Triple,
};
use efsep::trees::Tree;

fn main() -> efsep::Result<()> {
    use StageClass::*;
    let plan = [Free, E0, Free, E1];
    let script = GuessScript {
        e0: BTreeMap::from([(1, vec![vec![0]])]),
        e1: BTreeMap::from([(3, HSpec::Identity { swap_x: true })]),
    };
    for n in 1..=8 {
        let opts = BuildOptions {
            gadget_len: 1,
            chain_len: n,
            prime_floor: 16,
        };
        let b = build_truncated_pair(&Tree::chain(4), &plan, &script, opts)?;
        let chain = b.chain(3)?;
        let m = b.stage_size(3);
        let g1 = b.companion_canonicalizer(3);
        let (mut total, mut escaped, mut exact) = (0usize, Vec::new(), 0usize);
        for r in 0..n {
            for d in (-5i64..=5).filter(|&d| d != 0) {
                for g in ball(m, 2) {
                    let t = Triple { r, d, g };
                    total += 1;
                    if !efsep::constructions::extension_obstruction(&chain.data, &g1, &t)? {
                        if extension_exists(&b, 3, &t)? {
                            exact += 1;
                        }
                        escaped.push(t);
                    }
                }
            }
        }
        println!(
            "N={n} primes={:?} cases={:?} triples={total} unblocked={} extendable={exact}",
            chain.primes(),
            chain.cases,
            escaped.len()
        );
        for t in escaped.iter().take(3) {
            println!("  r={} d={} g={}", t.r, t.d, t.g);
        }
    }
    Ok(())
}
