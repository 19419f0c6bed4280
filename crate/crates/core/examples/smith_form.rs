//! Smith and Hermite forms of a small integer matrix, with the multipliers
//! checked against the original.

use efsep::zlinalg::{hnf, rank, snf, IntMatrix};

fn show(label: &str, m: &IntMatrix) {
    println!("{label}:");
    for r in m.row_vecs() {
        let cells: Vec<String> = r.iter().map(|c| format!("{c:>5}")).collect();
        println!("  [{}]", cells.join(""));
    }
}

fn main() -> efsep::Result<()> {
    let m = IntMatrix::from_i64(&[&[2, 4, 4], &[-6, 6, 12], &[10, -4, -16]]);
    show("M", &m);

    let s = snf(&m);
    show("D = U M V", &s.d);
    let diag: Vec<String> = s.diagonal().iter().map(|d| d.to_string()).collect();
    println!("diagonal {}  rank {}", diag.join(" | "), rank(&m));
    assert_eq!(s.u.mul(&m)?.mul(&s.v)?, s.d);
    assert!(s.u.is_unimodular() && s.v.is_unimodular());

    let (h, u) = hnf(&m);
    show("H = U M", &h);
    assert_eq!(u.mul(&m)?, h);
    println!("det M = {}", m.det()?);
    Ok(())
}
