//! Divisibility chains `p_n z_{n+1} = z_n + k_n`, the prime and triple
//! bookkeeping that feeds them, and the gadget block isomorphisms.

use std::collections::VecDeque;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::abgroup::{is_prime, p_height, Canonicalizer, GroupElement, Height, Presentation, Subgroup};
use crate::error::{Error, Result};
use crate::zlinalg::IntMatrix;

/// Smallest prime above `floor` that does not divide `target` in `g`.
pub fn select_prime(target: &GroupElement, g: &Canonicalizer, floor: u64) -> Result<u64> {
    if g.is_zero(target) {
        return Err(Error::Construction("every prime divides 0".into()));
    }
    let mut p = floor + 1;
    let limit = floor.saturating_add(1_000_000);
    while p <= limit {
        if is_prime(p) && !g.divisible_by(target, &BigInt::from(p)) {
            return Ok(p);
        }
        p += 1;
    }
    Err(Error::Construction(format!("no prime in ({floor}, {limit}] avoids {target}")))
}

/// Appends `z_0..z_N` (`N = ks.len()`) with `p_n z_{n+1} = z_n + k_n`.
pub fn adjoin_z_chain(base: &Presentation, ks: &[GroupElement], primes: &[u64]) -> Result<Presentation> {
    if ks.len() != primes.len() {
        return Err(Error::Construction(format!(
            "{} chain elements for {} primes",
            ks.len(),
            primes.len()
        )));
    }
    if let Some(p) = primes.iter().find(|&&p| !is_prime(p)) {
        return Err(Error::NotPrime(p.to_string()));
    }
    let m = base.gen_count();
    let n = ks.len();
    let total = m + n + 1;
    let mut rows: Vec<Vec<BigInt>> = base
        .relations()
        .row_vecs()
        .into_iter()
        .map(|mut r| {
            r.resize(total, BigInt::zero());
            r
        })
        .collect();
    for (i, (k, &p)) in ks.iter().zip(primes).enumerate() {
        base.check_element(k)?;
        let mut r: Vec<BigInt> = k.coeffs.iter().map(|c| -c).collect();
        r.resize(total, BigInt::zero());
        r[m + i + 1] += BigInt::from(p);
        r[m + i] -= BigInt::one();
        rows.push(r);
    }
    Presentation::new(total, IntMatrix::from_rows(total, rows)?)
}

/// A guess `h(z_0) = d·z_r + g` for the image of the chain bottom.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub r: usize,
    pub d: i64,
    pub g: GroupElement,
}

/// `1, -1, 2, -2, …`
pub fn nonzero_int(index: usize) -> i64 {
    let mag = (index / 2 + 1) as i64;
    if index % 2 == 0 {
        mag
    } else {
        -mag
    }
}

/// Integer vectors of length `dim` and L1 norm exactly `l1`, sorted.
pub fn vectors_with_l1(dim: usize, l1: usize) -> Vec<Vec<i64>> {
    fn rec(dim: usize, left: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if cur.len() == dim {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for c in -left..=left {
            cur.push(c);
            rec(dim, left - c.abs(), cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, l1 as i64, &mut Vec::new(), &mut out);
    out
}

/// All vectors of L1 norm at most `radius`, by norm then lexicographically.
pub fn ball(dim: usize, radius: usize) -> Vec<GroupElement> {
    (0..=radius)
        .flat_map(|l| vectors_with_l1(dim, l))
        .map(|v| GroupElement::from_i64(&v))
        .collect()
}

/// Diagonal enumeration of `(r, d, g)` by `r + index(d) + |g|₁`, assigning
/// to position `n` the earliest triple with `r < n` not yet used.
pub struct TripleEnumerator {
    dim: usize,
    weight: usize,
    stream: VecDeque<Triple>,
    pending: Vec<Triple>,
}

impl TripleEnumerator {
    pub fn new(dim: usize) -> Self {
        TripleEnumerator {
            dim,
            weight: 0,
            stream: VecDeque::new(),
            pending: Vec::new(),
        }
    }

    fn refill(&mut self) {
        while self.stream.is_empty() {
            let w = self.weight;
            for r in 0..=w {
                for di in 0..=(w - r) {
                    for g in vectors_with_l1(self.dim, w - r - di) {
                        self.stream.push_back(Triple {
                            r,
                            d: nonzero_int(di),
                            g: GroupElement::from_i64(&g),
                        });
                    }
                }
            }
            self.weight += 1;
        }
    }

    /// Triple for position `n ≥ 1`.
    pub fn next_for(&mut self, n: usize) -> Triple {
        assert!(n >= 1, "position 0 carries no triple");
        if let Some(i) = self.pending.iter().position(|t| t.r < n) {
            return self.pending.remove(i);
        }
        loop {
            self.refill();
            let t = self.stream.pop_front().expect("refilled");
            if t.r < n {
                return t;
            }
            self.pending.push(t);
        }
    }
}

/// What the obstruction test needs from an installed chain, on the level
/// of `G_δ`: primes, `h(k_n)` and the companion elements `f(k_n)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainData {
    pub primes: Vec<u64>,
    pub hk: Vec<GroupElement>,
    pub k1: Vec<GroupElement>,
}

impl ChainData {
    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    fn check(&self) -> Result<()> {
        if self.hk.len() != self.primes.len() || self.k1.len() != self.primes.len() {
            return Err(Error::Construction("malformed chain data".into()));
        }
        Ok(())
    }

    /// `D_n = g + Σ_{j≤n} (Π_{i<j} p_i) h(k_j) − d Σ_{r≤j≤n} (Π_{r≤i<j} p_i) f(k_j)`
    /// for `n = r, …, N−1`. Entry `n - r` is `D_n`.
    pub fn discrepancies(&self, t: &Triple) -> Result<Vec<GroupElement>> {
        self.check()?;
        let n_len = self.len();
        if t.r >= n_len {
            return Err(Error::Construction(format!("r = {} outside a chain of length {n_len}", t.r)));
        }
        let mut acc = t.g.clone();
        let mut m = BigInt::one();
        let mut m2 = BigInt::from(t.d);
        let mut out = Vec::new();
        for j in 0..n_len {
            acc = acc.add(&self.hk[j].scale(&m));
            if j >= t.r {
                acc = acc.sub(&self.k1[j].scale(&m2));
                out.push(acc.clone());
                m2 *= self.primes[j];
            }
            m *= self.primes[j];
        }
        Ok(out)
    }
}

/// Is the guess `h(z_0) = d z_r + g` refuted, either by `Π_{i<r} p_i ∤ d`
/// (compare `z_N`-coordinates; the primes are distinct) or by some
/// `p_n ∤ D_n` with `r ≤ n < N`, divisibility taken in `G¹_δ`?
pub fn extension_obstruction(chain: &ChainData, g1: &Canonicalizer, t: &Triple) -> Result<bool> {
    let ds = chain.discrepancies(t)?;
    let head: BigInt = chain.primes[..t.r].iter().map(|&p| BigInt::from(p)).product();
    if !(BigInt::from(t.d) % head).is_zero() {
        return Ok(true);
    }
    Ok(ds
        .iter()
        .enumerate()
        .any(|(i, d)| !g1.divisible_by(d, &BigInt::from(chain.primes[t.r + i]))))
}

/// The single congruence at position `n`.
pub fn obstruction_at(chain: &ChainData, g1: &Canonicalizer, t: &Triple, n: usize) -> Result<bool> {
    if n < t.r || n >= chain.len() {
        return Err(Error::Construction(format!("position {n} outside [{}, {})", t.r, chain.len())));
    }
    let ds = chain.discrepancies(t)?;
    Ok(!g1.divisible_by(&ds[n - t.r], &BigInt::from(chain.primes[n])))
}

/// Gadget block map in block coordinates `u_0..u_L, v_0..v_{L-1}`:
/// `w_n ↦ v_n` for `n ≤ cut`, `u_n ↦ u_n` above the cut.
pub fn gadget_iso(len: usize, cut: Option<usize>) -> Result<Vec<GroupElement>> {
    if let Some(c) = cut {
        if c >= len {
            return Err(Error::Construction(format!("cut {c} exceeds gadget length {len}")));
        }
    }
    let dim = 2 * len + 1;
    let u = |n: usize| GroupElement::unit(dim, n);
    let v = |n: usize| GroupElement::unit(dim, len + 1 + n);
    let mut images: Vec<GroupElement> = (0..dim).map(|i| GroupElement::unit(dim, i)).collect();
    if let Some(c) = cut {
        for n in (0..=c).rev() {
            images[n] = images[n + 1].scale(&BigInt::from(2)).sub(&v(n));
            images[len + 1 + n] = u(n);
        }
    }
    Ok(images)
}

/// 2-height of `u_0` modulo `⟨w_0, …, w_{n-1}⟩` in `⊕_{j≤n} ℤu_j`, where
/// `w_j = 2u_{j+1} − u_j`.
pub fn gadget_height(n: usize) -> Result<Height> {
    let g = Presentation::free(n + 1);
    let ws: Vec<GroupElement> = (0..n)
        .map(|j| GroupElement::unit(n + 1, j + 1).scale(&BigInt::from(2)).sub(&GroupElement::unit(n + 1, j)))
        .collect();
    p_height(&g, &Subgroup::from_elements(&g, &ws)?, &GroupElement::unit(n + 1, 0), 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn el(c: &[i64]) -> GroupElement {
        GroupElement::from_i64(c)
    }

    #[test]
    fn prime_selection() {
        let g = Canonicalizer::new(&Presentation::free(2));
        assert_eq!(select_prime(&el(&[12, 24]), &g, 3).unwrap(), 5);
        assert_eq!(select_prime(&el(&[1, 0]), &g, 1).unwrap(), 2);
        assert!(select_prime(&el(&[0, 0]), &g, 1).is_err());
    }

    #[test]
    fn chain_of_length_zero_is_a_free_extension() {
        let g = adjoin_z_chain(&Presentation::free(2), &[], &[]).unwrap();
        assert_eq!(g.gen_count(), 3);
        assert_eq!(g.relations().rows(), 0);
        assert!(adjoin_z_chain(&Presentation::free(1), &[el(&[1])], &[4]).is_err());
    }

    #[test]
    fn chain_stays_free_of_rank_base_plus_one() {
        let k = vec![el(&[1, 0]), el(&[0, 1]), el(&[1, 1])];
        let g = adjoin_z_chain(&Presentation::free(2), &k, &[3, 5, 7]).unwrap();
        let inv = g.invariant_factors();
        assert_eq!((inv.free_rank, inv.torsion.len()), (3, 0));
    }

    #[test]
    fn gadget_heights() {
        for n in 0..=10 {
            assert_eq!(gadget_height(n).unwrap(), Height::Finite(n as u64));
        }
    }

    #[test]
    fn height_of_z0_over_two_step_chain() {
        // p = (2,2): z0 = 4 z2 - 2 k1 - k0
        let k = vec![el(&[1, 0]), el(&[0, 1])];
        let g = adjoin_z_chain(&Presentation::free(2), &k, &[2, 2]).unwrap();
        let ks = Subgroup::from_elements(&g, &[el(&[1, 0, 0, 0, 0]), el(&[0, 1, 0, 0, 0])]).unwrap();
        let z0 = el(&[0, 0, 1, 0, 0]);
        assert_eq!(p_height(&g, &ks, &z0, 2).unwrap(), Height::Finite(2));
        assert!(g.equal(&z0, &el(&[-1, -2, 0, 0, 4])).unwrap());
    }

    #[test]
    fn triple_enumeration_respects_position() {
        let mut e = TripleEnumerator::new(2);
        let first = e.next_for(1);
        assert_eq!(first, Triple { r: 0, d: 1, g: el(&[0, 0]) });
        let mut seen = vec![first];
        for n in 2..40 {
            let t = e.next_for(n);
            assert!(t.r < n);
            assert!(!seen.contains(&t));
            seen.push(t);
        }
        assert_eq!(nonzero_int(0), 1);
        assert_eq!(nonzero_int(3), -2);
        assert_eq!(vectors_with_l1(3, 2).len(), 18);
        assert_eq!(ball(2, 1).len(), 5);
    }

    #[test]
    fn toy_congruences_match_direct_arithmetic() {
        // ℤ, p = (2, 3), h(k) = 1, f(k) = 1 for both positions.
        let chain = ChainData {
            primes: vec![2, 3],
            hk: vec![el(&[1]), el(&[1])],
            k1: vec![el(&[1]), el(&[1])],
        };
        let g = Canonicalizer::new(&Presentation::free(1));
        // r = 0, d = 1, g = 0: D_0 = 1 - 1 = 0, D_1 = 0 + 2 - 2 = 0
        let t = Triple { r: 0, d: 1, g: el(&[0]) };
        assert_eq!(chain.discrepancies(&t).unwrap(), vec![el(&[0]), el(&[0])]);
        assert!(!extension_obstruction(&chain, &g, &t).unwrap());
        // r = 1, d = 1, g = 1: D_1 = 1 + 1 + 2 - 1 = 3, divisible by 3
        let t = Triple { r: 1, d: 1, g: el(&[1]) };
        assert_eq!(chain.discrepancies(&t).unwrap(), vec![el(&[3])]);
        assert!(!obstruction_at(&chain, &g, &t, 1).unwrap());
        // d = 2: D_1 = 1 + 1 + 2 - 2 = 2, not divisible by 3
        let t = Triple { r: 1, d: 2, g: el(&[1]) };
        assert!(extension_obstruction(&chain, &g, &t).unwrap());
        assert!(obstruction_at(&chain, &g, &t, 0).is_err());
    }

    #[test]
    fn gadget_iso_examples() {
        assert_eq!(gadget_iso(3, None).unwrap(), (0..7).map(|i| GroupElement::unit(7, i)).collect::<Vec<_>>());
        let g = gadget_iso(3, Some(1)).unwrap();
        // order: u0 u1 u2 u3 v0 v1 v2
        assert_eq!(g[1], el(&[0, 0, 2, 0, 0, -1, 0]));
        assert_eq!(g[0], el(&[0, 0, 4, 0, -1, -2, 0]));
        let m = IntMatrix::from_rows(7, g.iter().map(|e| e.coeffs.clone())).unwrap();
        assert!(m.is_unimodular());
        // w_n = 2u_{n+1} - u_n goes to v_n for n ≤ 1
        for n in 0..=1 {
            let w = g[n + 1].scale(&BigInt::from(2)).sub(&g[n]);
            assert_eq!(w, GroupElement::unit(7, 4 + n));
        }
        assert!(gadget_iso(3, Some(3)).is_err());
    }
}
