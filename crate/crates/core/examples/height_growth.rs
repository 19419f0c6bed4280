//! The 2-height of `u_0` in a gadget of length `N` is exactly `N`.

use efsep::constructions::gadget_height;

fn main() -> efsep::Result<()> {
    for n in [1, 2, 3, 5, 8, 13, 21, 34] {
        println!("N = {n:>2}: height {:?}", gadget_height(n)?);
    }
    Ok(())
}
