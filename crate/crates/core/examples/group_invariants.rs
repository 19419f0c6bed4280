//! Invariant factors, orders and isomorphism tests for a few presentations.

use efsep::abgroup::{are_isomorphic, p_height, Presentation, Subgroup};

fn main() -> efsep::Result<()> {
    let groups = [
        ("Z/6", Presentation::cyclic_sum(&[6])),
        ("Z/2+Z/3", Presentation::cyclic_sum(&[2, 3])),
        ("Z/4", Presentation::cyclic_sum(&[4])),
        ("Z/2+Z/2", Presentation::cyclic_sum(&[2, 2])),
        ("<a,b | 4a+6b>", Presentation::from_i64(2, &[&[4, 6]])?),
        ("Z^2", Presentation::free(2)),
    ];
    for (name, g) in &groups {
        let inv = g.invariant_factors();
        let torsion: Vec<String> = inv.torsion.iter().map(|d| d.to_string()).collect();
        let order = g.order().map_or("infinite".to_string(), |o| o.to_string());
        println!(
            "{name:<14} free rank {} torsion [{}] order {order}",
            inv.free_rank,
            torsion.join(", ")
        );
    }
    for (i, (a, g)) in groups.iter().enumerate() {
        for (b, h) in &groups[i + 1..] {
            if are_isomorphic(g, h) {
                println!("{a} ≅ {b}");
            }
        }
    }

    // heights of a generator of Z/8 inside itself
    let z8 = Presentation::cyclic_sum(&[8]);
    let none = Subgroup::trivial(&z8);
    for k in [1i64, 2, 4] {
        let x = z8.generator(0).scale(&k.into());
        println!("2-height of {k}·g in Z/8: {:?}", p_height(&z8, &none, &x, 2)?);
    }
    Ok(())
}
