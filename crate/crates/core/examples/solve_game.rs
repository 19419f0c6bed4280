//! Solves the game on small cyclic sums over every forest with up to four
//! nodes and checks the extracted strategy.

use efsep::abgroup::Presentation;
use efsep::efgame::{solve_game, verify_forall_strategy, verify_strategy, GameSpec, Player, SolveOptions, WinningStrategy};
use efsep::trees::forests_up_to_iso;

fn main() -> efsep::Result<()> {
    let pairs = [
        ("Z/4", Presentation::cyclic_sum(&[4]), "Z/2+Z/2", Presentation::cyclic_sum(&[2, 2])),
        ("Z/6", Presentation::cyclic_sum(&[6]), "Z/2+Z/3", Presentation::cyclic_sum(&[2, 3])),
        ("Z/8", Presentation::cyclic_sum(&[8]), "Z/2+Z/4", Presentation::cyclic_sum(&[2, 4])),
    ];
    let opts = SolveOptions::default();
    for (an, a, bn, b) in &pairs {
        println!("{an} vs {bn}");
        for n in 1..=4 {
            for t in forests_up_to_iso(n) {
                let spec = GameSpec::finite(a, b, &t, 64)?;
                let r = solve_game(&spec, opts)?;
                let checked = match &r.strategy {
                    WinningStrategy::Exists(s) => verify_strategy(&spec, s, opts.max_states)?,
                    WinningStrategy::Forall(s) => verify_forall_strategy(&spec, s, opts.max_states)?,
                };
                let who = if r.winner == Player::Exists { "exists" } else { "forall" };
                println!("  {:<12} {who:<6} states {:>5} verified {checked}", t.canonical_form(), r.states_explored);
            }
        }
    }
    Ok(())
}
