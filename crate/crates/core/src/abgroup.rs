//! Finitely presented abelian groups: classification, subgroups, quotients,
//! purity, heights, and partial isomorphisms between element tuples.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zlinalg::{lattice_basis, left_kernel, snf, snf_full, solve_linear, IntMatrix};

/// Coefficient vector of a coset representative over the generators.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupElement {
    #[serde(with = "plain_ints")]
    pub coeffs: Vec<BigInt>,
}

/// Coefficients as JSON integers, falling back to decimal strings past `i64`.
mod plain_ints {
    use num_bigint::BigInt;
    use num_traits::ToPrimitive;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Coeff {
        Small(i64),
        Big(String),
    }

    pub fn serialize<S: Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
        let out: Vec<Coeff> = v
            .iter()
            .map(|c| c.to_i64().map(Coeff::Small).unwrap_or_else(|| Coeff::Big(c.to_string())))
            .collect();
        out.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
        Vec::<Coeff>::deserialize(d)?
            .into_iter()
            .map(|c| match c {
                Coeff::Small(x) => Ok(BigInt::from(x)),
                Coeff::Big(t) => t.parse().map_err(|_| D::Error::custom(format!("`{t}` is not an integer"))),
            })
            .collect()
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coeffs.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl GroupElement {
    pub fn new(coeffs: Vec<BigInt>) -> Self {
        GroupElement { coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        GroupElement::new(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    pub fn zero(len: usize) -> Self {
        GroupElement::new(vec![BigInt::zero(); len])
    }

    pub fn unit(len: usize, i: usize) -> Self {
        let mut e = Self::zero(len);
        e.coeffs[i] = BigInt::one();
        e
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// True when every coefficient is zero (syntactic, not coset, zero).
    pub fn is_trivial(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    /// Zero-pads (or truncates zero tail) to `len` coordinates.
    pub fn resized(&self, len: usize) -> Self {
        let mut c = self.coeffs.clone();
        c.resize(len, BigInt::zero());
        GroupElement::new(c)
    }

    pub fn add(&self, other: &GroupElement) -> GroupElement {
        GroupElement::new(crate::zlinalg::add_vec(&self.coeffs, &other.coeffs))
    }

    pub fn sub(&self, other: &GroupElement) -> GroupElement {
        GroupElement::new(crate::zlinalg::sub_vec(&self.coeffs, &other.coeffs))
    }

    pub fn scale(&self, c: &BigInt) -> GroupElement {
        GroupElement::new(crate::zlinalg::scale_vec(c, &self.coeffs))
    }

    pub fn neg(&self) -> GroupElement {
        self.scale(&BigInt::from(-1))
    }

    /// Sum of absolute values of the coefficients.
    pub fn l1(&self) -> BigInt {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    /// Index of the last nonzero coefficient, if any.
    pub fn support_end(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|c| !c.is_zero())
            .map_or(0, |i| i + 1)
    }
}

/// Free rank and torsion coefficients `d₁ | d₂ | …` with every `dᵢ ≥ 2`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Invariants {
    pub free_rank: usize,
    pub torsion: Vec<BigInt>,
}

/// p-height of an element: finite or unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Height {
    Finite(u64),
    Infinite,
}

/// `⟨gens | relations⟩`: each relation row is a vanishing integer combination.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Presentation {
    gen_count: usize,
    relations: IntMatrix,
}

impl fmt::Debug for Presentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{} gens | {:?}>", self.gen_count, self.relations)
    }
}

/// Coordinates adapted to the Smith form of a relation matrix.
#[derive(Clone, Debug)]
struct SmithCoords {
    v: IntMatrix,
    v_inv: IntMatrix,
    /// One modulus per coordinate; zero marks a free coordinate.
    moduli: Vec<BigInt>,
}

impl SmithCoords {
    fn of(p: &Presentation) -> SmithCoords {
        let f = snf_full(&p.relations);
        let diag = f.d.diagonal();
        let moduli = (0..p.gen_count)
            .map(|i| diag.get(i).cloned().unwrap_or_default())
            .collect();
        SmithCoords {
            v: f.v,
            v_inv: f.v_inv,
            moduli,
        }
    }

    /// Reduced coordinates of `x` (free coordinates kept as they are).
    fn coords(&self, x: &GroupElement) -> Vec<BigInt> {
        let t = self.v.vec_mul(&x.coeffs).expect("element length checked by caller");
        t.into_iter()
            .zip(&self.moduli)
            .map(|(ti, m)| if m.is_zero() { ti } else { ti.mod_floor(m) })
            .collect()
    }

    fn element(&self, t: &[BigInt]) -> GroupElement {
        GroupElement::new(self.v_inv.vec_mul(t).expect("coordinate length"))
    }
}

/// Cached Smith coordinates for repeated canonicalization in one group.
#[derive(Clone, Debug)]
pub struct Canonicalizer {
    gen_count: usize,
    coords: SmithCoords,
}

impl Canonicalizer {
    pub fn new(p: &Presentation) -> Self {
        Canonicalizer {
            gen_count: p.gen_count,
            coords: SmithCoords::of(p),
        }
    }

    pub fn canonical(&self, x: &GroupElement) -> GroupElement {
        let x = x.resized(self.gen_count);
        self.coords.element(&self.coords.coords(&x))
    }

    pub fn equal(&self, a: &GroupElement, b: &GroupElement) -> bool {
        self.canonical(a) == self.canonical(b)
    }

    pub fn is_zero(&self, x: &GroupElement) -> bool {
        self.coords.coords(&x.resized(self.gen_count)).iter().all(Zero::is_zero)
    }

    /// Is `x ∈ k·G`?
    pub fn divisible_by(&self, x: &GroupElement, k: &BigInt) -> bool {
        let t = self.coords.coords(&x.resized(self.gen_count));
        t.iter().zip(&self.coords.moduli).all(|(ti, m)| {
            if m.is_one() {
                true
            } else if m.is_zero() {
                ti.is_multiple_of(k)
            } else {
                ti.is_multiple_of(&k.gcd(m))
            }
        })
    }
}

impl Presentation {
    pub fn new(gen_count: usize, relations: IntMatrix) -> Result<Self> {
        if relations.cols() != gen_count {
            return Err(Error::DimensionMismatch(format!(
                "relations have {} columns for {gen_count} generators",
                relations.cols()
            )));
        }
        Ok(Presentation {
            gen_count,
            relations,
        })
    }

    pub fn from_i64(gen_count: usize, relations: &[&[i64]]) -> Result<Self> {
        let m = IntMatrix::from_rows(
            gen_count,
            relations
                .iter()
                .map(|r| r.iter().map(|&x| BigInt::from(x)).collect()),
        )?;
        Self::new(gen_count, m)
    }

    pub fn free(rank: usize) -> Self {
        Presentation {
            gen_count: rank,
            relations: IntMatrix::zeros(0, rank),
        }
    }

    /// `ℤ/n₁ ⊕ ℤ/n₂ ⊕ …`; a zero order gives a free summand.
    pub fn cyclic_sum(orders: &[i64]) -> Self {
        let n = orders.len();
        let rows: Vec<Vec<BigInt>> = orders
            .iter()
            .enumerate()
            .filter(|(_, &o)| o != 0)
            .map(|(i, &o)| {
                let mut r = vec![BigInt::zero(); n];
                r[i] = BigInt::from(o);
                r
            })
            .collect();
        Presentation {
            gen_count: n,
            relations: IntMatrix::from_rows(n, rows).expect("square rows"),
        }
    }

    pub fn gen_count(&self) -> usize {
        self.gen_count
    }

    pub fn relations(&self) -> &IntMatrix {
        &self.relations
    }

    /// Appends relation rows.
    pub fn with_relations(&self, extra: &IntMatrix) -> Result<Presentation> {
        Presentation::new(self.gen_count, self.relations.stack(extra)?)
    }

    pub fn generator(&self, i: usize) -> GroupElement {
        GroupElement::unit(self.gen_count, i)
    }

    pub fn zero(&self) -> GroupElement {
        GroupElement::zero(self.gen_count)
    }

    pub fn check_element(&self, x: &GroupElement) -> Result<()> {
        if x.len() != self.gen_count {
            return Err(Error::DimensionMismatch(format!(
                "element with {} coefficients in a group on {} generators",
                x.len(),
                self.gen_count
            )));
        }
        Ok(())
    }

    pub fn invariant_factors(&self) -> Invariants {
        let d = snf(&self.relations).diagonal();
        let nonzero: Vec<BigInt> = d.into_iter().filter(|x| !x.is_zero()).collect();
        Invariants {
            free_rank: self.gen_count - nonzero.len(),
            torsion: nonzero.into_iter().filter(|x| !x.is_one()).collect(),
        }
    }

    pub fn is_free(&self) -> bool {
        self.invariant_factors().torsion.is_empty()
    }

    pub fn is_torsion_free(&self) -> bool {
        self.is_free()
    }

    /// Order of a finite group; `None` when the free rank is positive.
    pub fn order(&self) -> Option<BigInt> {
        let inv = self.invariant_factors();
        (inv.free_rank == 0).then(|| inv.torsion.iter().product())
    }

    /// Rank of the dual `Hom(G, ℤ)`.
    pub fn dual_rank(&self) -> usize {
        self.invariant_factors().free_rank
    }

    /// Coset equality test: `x ∈ rowspace(relations)`.
    pub fn is_zero(&self, x: &GroupElement) -> Result<bool> {
        self.check_element(x)?;
        if x.is_trivial() {
            return Ok(true);
        }
        if self.relations.rows() == 0 {
            return Ok(false);
        }
        Ok(solve_linear(&self.relations.transpose(), &x.coeffs)?.is_some())
    }

    pub fn equal(&self, a: &GroupElement, b: &GroupElement) -> Result<bool> {
        self.is_zero(&a.sub(b))
    }

    /// Canonical coset representative (well defined for any presentation).
    pub fn canonical(&self, x: &GroupElement) -> Result<GroupElement> {
        self.check_element(x)?;
        let sc = SmithCoords::of(self);
        Ok(sc.element(&sc.coords(x)))
    }

    /// All elements of a finite group as canonical representatives, ordered
    /// lexicographically in Smith coordinates. Fails on infinite groups or
    /// when the order exceeds `limit`.
    pub fn elements(&self, limit: usize) -> Result<Vec<GroupElement>> {
        let sc = SmithCoords::of(self);
        if sc.moduli.iter().any(Zero::is_zero) {
            return Err(Error::Unsupported("element enumeration of an infinite group".into()));
        }
        let order: BigInt = sc.moduli.iter().product();
        if order > BigInt::from(limit) {
            return Err(Error::Unsupported(format!("group of order {order} exceeds {limit}")));
        }
        let moduli: Vec<u64> = sc.moduli.iter().map(|m| m.to_u64().expect("small")).collect();
        let mut out = Vec::new();
        let mut t = vec![0u64; moduli.len()];
        loop {
            let big: Vec<BigInt> = t.iter().map(|&x| BigInt::from(x)).collect();
            out.push(sc.element(&big));
            let mut i = moduli.len();
            loop {
                if i == 0 {
                    return Ok(out);
                }
                i -= 1;
                t[i] += 1;
                if t[i] < moduli[i] {
                    break;
                }
                t[i] = 0;
            }
        }
    }

    /// Canonical basis of `{c : Σ cᵢ·tupleᵢ = 0 in G}`.
    pub fn relation_lattice(&self, tuple: &[GroupElement]) -> Result<IntMatrix> {
        let k = tuple.len();
        if k == 0 {
            return Ok(IntMatrix::zeros(0, 0));
        }
        for x in tuple {
            self.check_element(x)?;
        }
        let m = IntMatrix::from_rows(self.gen_count, tuple.iter().map(|x| x.coeffs.clone()))?
            .stack(&self.relations)?;
        let kernel = left_kernel(&m).truncate_cols(k);
        Ok(lattice_basis(&kernel))
    }
}

pub fn invariant_factors(g: &Presentation) -> Invariants {
    g.invariant_factors()
}

pub fn are_isomorphic(g: &Presentation, h: &Presentation) -> bool {
    g.invariant_factors() == h.invariant_factors()
}

pub fn dual_rank(g: &Presentation) -> usize {
    g.dual_rank()
}

/// Subgroup generated by the rows of `generators` inside `ambient`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgroup {
    ambient: Presentation,
    generators: IntMatrix,
}

impl Subgroup {
    pub fn new(ambient: Presentation, generators: IntMatrix) -> Result<Self> {
        if generators.cols() != ambient.gen_count() {
            return Err(Error::AmbientMismatch(format!(
                "subgroup generators have {} coordinates, ambient has {} generators",
                generators.cols(),
                ambient.gen_count()
            )));
        }
        Ok(Subgroup {
            ambient,
            generators,
        })
    }

    pub fn from_elements(ambient: &Presentation, elems: &[GroupElement]) -> Result<Self> {
        let m = IntMatrix::from_rows(ambient.gen_count(), elems.iter().map(|e| e.coeffs.clone()))?;
        Subgroup::new(ambient.clone(), m)
    }

    pub fn trivial(ambient: &Presentation) -> Self {
        Subgroup {
            ambient: ambient.clone(),
            generators: IntMatrix::zeros(0, ambient.gen_count()),
        }
    }

    pub fn whole(ambient: &Presentation) -> Self {
        Subgroup {
            ambient: ambient.clone(),
            generators: IntMatrix::identity(ambient.gen_count()),
        }
    }

    pub fn ambient(&self) -> &Presentation {
        &self.ambient
    }

    pub fn generators(&self) -> &IntMatrix {
        &self.generators
    }

    pub fn generator_elements(&self) -> Vec<GroupElement> {
        self.generators.row_vecs().into_iter().map(GroupElement::new).collect()
    }

    pub fn contains(&self, x: &GroupElement) -> Result<bool> {
        self.ambient.check_element(x)?;
        if x.is_trivial() {
            return Ok(true);
        }
        let m = self.generators.stack(self.ambient.relations())?;
        if m.rows() == 0 {
            return Ok(false);
        }
        Ok(solve_linear(&m.transpose(), &x.coeffs)?.is_some())
    }

    /// Coefficients `c` (over the generators) with `Σ cᵢ sᵢ = x`, if any.
    pub fn express(&self, x: &GroupElement) -> Result<Option<Vec<BigInt>>> {
        self.ambient.check_element(x)?;
        let k = self.generators.rows();
        let m = self.generators.stack(self.ambient.relations())?;
        if m.rows() == 0 {
            return Ok(x.is_trivial().then(Vec::new));
        }
        Ok(solve_linear(&m.transpose(), &x.coeffs)?.map(|mut c| {
            c.truncate(k);
            c
        }))
    }

    pub fn is_contained_in(&self, other: &Subgroup) -> Result<bool> {
        if self.ambient != other.ambient {
            return Err(Error::AmbientMismatch("subgroups of different groups".into()));
        }
        for g in self.generator_elements() {
            if !other.contains(&g)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The subgroup itself as an abstract group on its generators.
    pub fn as_presentation(&self) -> Result<Presentation> {
        quotient_of_subgroups(self, &Subgroup::trivial(&self.ambient))
    }
}

/// `outer / inner` presented on the generators of `outer`.
pub fn quotient_of_subgroups(outer: &Subgroup, inner: &Subgroup) -> Result<Presentation> {
    if outer.ambient != inner.ambient {
        return Err(Error::AmbientMismatch("quotient of subgroups of different groups".into()));
    }
    let k = outer.generators.rows();
    let m = outer
        .generators
        .stack(&inner.generators)?
        .stack(outer.ambient.relations())?;
    let rel = lattice_basis(&left_kernel(&m).truncate_cols(k));
    Presentation::new(k, rel)
}

pub fn subgroup_membership(s: &Subgroup, x: &GroupElement) -> Result<bool> {
    s.contains(x)
}

/// Presentation of `G/S`: the generators of `S` become extra relations.
pub fn quotient(g: &Presentation, s: &Subgroup) -> Result<Presentation> {
    if s.ambient() != g {
        return Err(Error::AmbientMismatch("subgroup does not live in this group".into()));
    }
    g.with_relations(s.generators())
}

/// Purity in a torsion-free ambient: `G/S` torsion-free.
pub fn purity_check(g: &Presentation, s: &Subgroup) -> Result<bool> {
    if !g.is_torsion_free() {
        return Err(Error::Unsupported("purity test needs a torsion-free ambient".into()));
    }
    Ok(quotient(g, s)?.is_torsion_free())
}

/// Summand test for finitely generated free ambients, where it coincides with purity.
pub fn is_direct_summand(g: &Presentation, s: &Subgroup) -> Result<bool> {
    if !g.is_free() {
        return Err(Error::Unsupported("summand test needs a free ambient".into()));
    }
    purity_check(g, s)
}

/// Basis completion for a pure subgroup of `ℤⁿ`: rows spanning a complement
/// of `S`, or `None` when `S` is not a summand. Ambient must be `ℤⁿ` with no
/// relations.
pub fn direct_complement(g: &Presentation, s: &Subgroup) -> Result<Option<IntMatrix>> {
    if g.relations().rows() != 0 {
        return Err(Error::Unsupported("complements are computed in ℤⁿ only".into()));
    }
    let f = snf_full(s.generators());
    let diag = f.d.diagonal();
    let r = diag.iter().filter(|d| !d.is_zero()).count();
    if diag.iter().take(r).any(|d| !d.is_one()) {
        return Ok(None);
    }
    let n = g.gen_count();
    Ok(Some(
        IntMatrix::from_rows(n, (r..n).map(|i| f.v_inv.row(i).to_vec()))
            .expect("rows of an n x n matrix"),
    ))
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

fn valuation(x: &BigInt, p: &BigInt) -> u64 {
    let mut x = x.clone();
    let mut n = 0;
    while !x.is_zero() && x.is_multiple_of(p) {
        x /= p;
        n += 1;
    }
    n
}

/// Largest `n` with `x ∈ pⁿ·G + S`, computed in Smith coordinates of `G/S`.
pub fn p_height(g: &Presentation, s: &Subgroup, x: &GroupElement, p: u64) -> Result<Height> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p.to_string()));
    }
    let q = quotient(g, s)?;
    q.check_element(x)?;
    let sc = SmithCoords::of(&q);
    let t = sc.coords(x);
    let pb = BigInt::from(p);
    let mut best = Height::Infinite;
    for (ti, m) in t.iter().zip(&sc.moduli) {
        if ti.is_zero() || m.is_one() {
            continue;
        }
        let h = if m.is_zero() {
            Height::Finite(valuation(ti, &pb))
        } else {
            // ℤ/m: divisible by pⁿ iff gcd(pⁿ, m) | t
            let e = valuation(m, &pb);
            let v = valuation(ti, &pb);
            if v >= e {
                Height::Infinite
            } else {
                Height::Finite(v)
            }
        };
        best = best.min(h);
    }
    Ok(best)
}

/// Does `aᵢ ↦ bᵢ` preserve and reflect every ℤ-linear relation?
pub fn is_partial_iso(
    a: &Presentation,
    b: &Presentation,
    a_tuple: &[GroupElement],
    b_tuple: &[GroupElement],
) -> Result<bool> {
    if a_tuple.len() != b_tuple.len() {
        return Err(Error::DimensionMismatch(format!(
            "tuples of lengths {} and {}",
            a_tuple.len(),
            b_tuple.len()
        )));
    }
    Ok(a.relation_lattice(a_tuple)? == b.relation_lattice(b_tuple)?)
}

/// A homomorphism given by the images of the source generators.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Homomorphism {
    source: Presentation,
    target: Presentation,
    matrix: IntMatrix,
}

impl Homomorphism {
    /// Validates that every source relation maps into the target relations.
    pub fn new(source: Presentation, target: Presentation, matrix: IntMatrix) -> Result<Self> {
        if matrix.rows() != source.gen_count() || matrix.cols() != target.gen_count() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} image matrix for {} -> {} generators",
                matrix.rows(),
                matrix.cols(),
                source.gen_count(),
                target.gen_count()
            )));
        }
        let h = Homomorphism {
            source,
            target,
            matrix,
        };
        for i in 0..h.source.relations().rows() {
            let r = GroupElement::new(h.source.relations().row(i).to_vec());
            if !h.target.is_zero(&h.apply_unchecked(&r))? {
                return Err(Error::InvalidHomomorphism(format!(
                    "source relation {i} does not map to zero"
                )));
            }
        }
        Ok(h)
    }

    pub fn from_images(source: &Presentation, target: &Presentation, images: &[GroupElement]) -> Result<Self> {
        let m = IntMatrix::from_rows(target.gen_count(), images.iter().map(|e| e.coeffs.clone()))?;
        Homomorphism::new(source.clone(), target.clone(), m)
    }

    pub fn zero(source: &Presentation, target: &Presentation) -> Self {
        Homomorphism {
            source: source.clone(),
            target: target.clone(),
            matrix: IntMatrix::zeros(source.gen_count(), target.gen_count()),
        }
    }

    pub fn source(&self) -> &Presentation {
        &self.source
    }

    pub fn target(&self) -> &Presentation {
        &self.target
    }

    pub fn matrix(&self) -> &IntMatrix {
        &self.matrix
    }

    pub fn image_of_generator(&self, i: usize) -> GroupElement {
        GroupElement::new(self.matrix.row(i).to_vec())
    }

    pub fn images(&self) -> Vec<GroupElement> {
        (0..self.matrix.rows()).map(|i| self.image_of_generator(i)).collect()
    }

    fn apply_unchecked(&self, x: &GroupElement) -> GroupElement {
        GroupElement::new(self.matrix.vec_mul(&x.coeffs).expect("length checked"))
    }

    pub fn apply(&self, x: &GroupElement) -> Result<GroupElement> {
        self.source.check_element(x)?;
        Ok(self.apply_unchecked(x))
    }

    pub fn image(&self) -> Subgroup {
        Subgroup {
            ambient: self.target.clone(),
            generators: self.matrix.clone(),
        }
    }

    pub fn image_of(&self, s: &Subgroup) -> Result<Subgroup> {
        if s.ambient() != &self.source {
            return Err(Error::AmbientMismatch("subgroup is not in the source".into()));
        }
        Ok(Subgroup {
            ambient: self.target.clone(),
            generators: s.generators().mul(&self.matrix)?,
        })
    }

    pub fn is_injective(&self) -> Result<bool> {
        let gens: Vec<GroupElement> = (0..self.source.gen_count()).map(|i| self.source.generator(i)).collect();
        is_partial_iso(&self.source, &self.target, &gens, &self.images())
    }

    pub fn is_surjective(&self) -> Result<bool> {
        let img = self.image();
        for i in 0..self.target.gen_count() {
            if !img.contains(&self.target.generator(i))? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn is_isomorphism(&self) -> Result<bool> {
        Ok(self.is_injective()? && self.is_surjective()?)
    }

    /// `other ∘ self`
    pub fn then(&self, other: &Homomorphism) -> Result<Homomorphism> {
        if self.target != other.source {
            return Err(Error::InvalidHomomorphism("composition of non-matching maps".into()));
        }
        Ok(Homomorphism {
            source: self.source.clone(),
            target: other.target.clone(),
            matrix: self.matrix.mul(&other.matrix)?,
        })
    }

    /// Preimage of `y` when it lies in the image.
    pub fn preimage(&self, y: &GroupElement) -> Result<Option<GroupElement>> {
        self.target.check_element(y)?;
        let k = self.source.gen_count();
        Ok(self.image().express(y)?.map(|mut c| {
            c.resize(k, BigInt::zero());
            GroupElement::new(c)
        }))
    }

    pub fn agrees_with(&self, other: &Homomorphism) -> Result<bool> {
        if self.source != other.source || self.target != other.target {
            return Ok(false);
        }
        for i in 0..self.source.gen_count() {
            if !self.target.equal(&self.image_of_generator(i), &other.image_of_generator(i))? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SteinHypothesis {
    /// `B/A` finite (its dual vanishes).
    FiniteQuotient,
    /// `C′/B′` torsion-free.
    TorsionFreeQuotient,
    /// `θ[A] ⊆ A′`.
    ImageOfA,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SteinVerdict {
    Holds,
    HypothesesFail {
        failed: Vec<SteinHypothesis>,
        conclusion_holds: bool,
    },
    ConclusionFails,
}

/// Checks the dual-vanishing confinement: with `B/A` finite, `C′/B′`
/// torsion-free and `θ[A] ⊆ A′`, the image `θ[B]` must lie in `B′`.
pub fn stein_check(
    theta: &Homomorphism,
    a: &Subgroup,
    b: &Subgroup,
    a2: &Subgroup,
    b2: &Subgroup,
    c2: &Subgroup,
) -> Result<SteinVerdict> {
    if !a.is_contained_in(b)? {
        return Err(Error::NestingViolated("A ⊄ B".into()));
    }
    if !a2.is_contained_in(b2)? || !b2.is_contained_in(c2)? {
        return Err(Error::NestingViolated("A′ ⊆ B′ ⊆ C′ fails".into()));
    }
    let image_b = theta.image_of(b)?;
    if !image_b.is_contained_in(c2)? {
        return Err(Error::NestingViolated("θ[B] ⊄ C′".into()));
    }
    let mut failed = Vec::new();
    if quotient_of_subgroups(b, a)?.invariant_factors().free_rank != 0 {
        failed.push(SteinHypothesis::FiniteQuotient);
    }
    if !quotient_of_subgroups(c2, b2)?.is_torsion_free() {
        failed.push(SteinHypothesis::TorsionFreeQuotient);
    }
    if !theta.image_of(a)?.is_contained_in(a2)? {
        failed.push(SteinHypothesis::ImageOfA);
    }
    let conclusion_holds = image_b.is_contained_in(b2)?;
    Ok(match (failed.is_empty(), conclusion_holds) {
        (true, true) => SteinVerdict::Holds,
        (true, false) => SteinVerdict::ConclusionFails,
        (false, c) => SteinVerdict::HypothesesFail {
            failed,
            conclusion_holds: c,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zlinalg::to_big;

    fn el(c: &[i64]) -> GroupElement {
        GroupElement::from_i64(c)
    }

    /// Multiset of element orders; determines a finite abelian group.
    fn order_census(g: &Presentation) -> Vec<u64> {
        let elems = g.elements(10_000).unwrap();
        let mut orders: Vec<u64> = elems
            .iter()
            .map(|x| {
                let mut k = 1u64;
                let mut acc = x.clone();
                while !g.is_zero(&acc).unwrap() {
                    acc = acc.add(x);
                    k += 1;
                }
                k
            })
            .collect();
        orders.sort();
        orders
    }

    #[test]
    fn invariant_factor_examples() {
        let z = Presentation::free(1);
        assert_eq!(z.invariant_factors(), Invariants { free_rank: 1, torsion: vec![] });
        let g = Presentation::cyclic_sum(&[2, 3]);
        assert_eq!(g.invariant_factors().torsion, to_big(&[6]));
        assert_eq!(order_census(&g), order_census(&Presentation::cyclic_sum(&[6])));
        let g = Presentation::cyclic_sum(&[2, 0]);
        assert_eq!(g.invariant_factors(), Invariants { free_rank: 1, torsion: to_big(&[2]) });
    }

    #[test]
    fn isomorphism_examples() {
        let z4 = Presentation::cyclic_sum(&[4]);
        let v4 = Presentation::cyclic_sum(&[2, 2]);
        assert!(are_isomorphic(&z4, &z4));
        assert_ne!(order_census(&z4), order_census(&v4));
        assert!(!are_isomorphic(&z4, &v4));
        let z6 = Presentation::cyclic_sum(&[6]);
        let z23 = Presentation::cyclic_sum(&[2, 3]);
        assert_eq!(order_census(&z6), order_census(&z23));
        assert!(are_isomorphic(&z6, &z23));
    }

    #[test]
    fn dual_rank_examples() {
        assert_eq!(dual_rank(&Presentation::free(3)), 3);
        assert_eq!(dual_rank(&Presentation::cyclic_sum(&[5])), 0);
        assert_eq!(dual_rank(&Presentation::cyclic_sum(&[0, 2])), 1);
    }

    #[test]
    fn membership_examples() {
        let z2 = Presentation::free(2);
        let s = Subgroup::from_elements(&z2, &[el(&[2, 0])]).unwrap();
        assert!(subgroup_membership(&s, &el(&[4, 0])).unwrap());
        assert!(!subgroup_membership(&s, &el(&[1, 0])).unwrap());
        let s = Subgroup::from_elements(&z2, &[el(&[2, 1]), el(&[0, 3])]).unwrap();
        assert!(subgroup_membership(&s, &el(&[2, 4])).unwrap());
        assert_eq!(s.express(&el(&[2, 4])).unwrap(), Some(to_big(&[1, 1])));
        let other = Subgroup::trivial(&Presentation::free(3));
        assert!(s.is_contained_in(&other).is_err());
    }

    fn w_span(n: usize) -> (Presentation, Subgroup) {
        // u_0..u_n in ℤ^{n+1}; w_k = 2u_{k+1} - u_k
        let g = Presentation::free(n + 1);
        let ws: Vec<GroupElement> = (0..n)
            .map(|k| {
                let mut c = vec![0i64; n + 1];
                c[k] = -1;
                c[k + 1] = 2;
                el(&c)
            })
            .collect();
        let s = Subgroup::from_elements(&g, &ws).unwrap();
        (g, s)
    }

    #[test]
    fn quotient_examples() {
        let g = Presentation::cyclic_sum(&[2, 0]);
        assert_eq!(quotient(&g, &Subgroup::trivial(&g)).unwrap().invariant_factors(), g.invariant_factors());
        let z2 = Presentation::free(2);
        let s = Subgroup::from_elements(&z2, &[el(&[2, 0])]).unwrap();
        assert_eq!(
            quotient(&z2, &s).unwrap().invariant_factors(),
            Invariants { free_rank: 1, torsion: to_big(&[2]) }
        );
        let (g, w) = w_span(3);
        assert_eq!(quotient(&g, &w).unwrap().invariant_factors(), Invariants { free_rank: 1, torsion: vec![] });
    }

    #[test]
    fn purity_and_summands() {
        let z2 = Presentation::free(2);
        let s1 = Subgroup::from_elements(&z2, &[el(&[1, 0])]).unwrap();
        let s2 = Subgroup::from_elements(&z2, &[el(&[2, 0])]).unwrap();
        assert!(purity_check(&z2, &s1).unwrap());
        assert!(!purity_check(&z2, &s2).unwrap());
        assert!(is_direct_summand(&z2, &s1).unwrap());
        assert!(!is_direct_summand(&z2, &s2).unwrap());
        let (g, w) = w_span(3);
        assert!(purity_check(&g, &w).unwrap());
        assert!(is_direct_summand(&g, &w).unwrap());
        assert!(direct_complement(&g, &w).unwrap().is_some());
        let torsion = Presentation::cyclic_sum(&[2]);
        assert!(purity_check(&torsion, &Subgroup::trivial(&torsion)).is_err());
    }

    #[test]
    fn height_examples() {
        let (g, w) = w_span(3);
        let u0 = el(&[1, 0, 0, 0]);
        assert_eq!(p_height(&g, &w, &u0, 2).unwrap(), Height::Finite(3));
        // u0 ≡ 8 u3 modulo the w-span, by elimination
        assert!(w.contains(&u0.sub(&el(&[0, 0, 0, 8]))).unwrap());
        let z2 = Presentation::free(2);
        assert_eq!(p_height(&z2, &Subgroup::trivial(&z2), &el(&[1, 0]), 2).unwrap(), Height::Finite(0));
        let s = Subgroup::from_elements(&z2, &[el(&[1, 0])]).unwrap();
        assert_eq!(p_height(&z2, &s, &el(&[5, 0]), 2).unwrap(), Height::Infinite);
        assert!(p_height(&z2, &s, &el(&[5, 0]), 4).is_err());
        // 2 is invertible modulo 3
        let z3 = Presentation::cyclic_sum(&[3]);
        assert_eq!(p_height(&z3, &Subgroup::trivial(&z3), &el(&[1]), 2).unwrap(), Height::Infinite);
    }

    #[test]
    fn partial_iso_examples() {
        let g = Presentation::cyclic_sum(&[2, 3]);
        let tuple = vec![el(&[1, 0]), el(&[0, 1])];
        assert!(is_partial_iso(&g, &g, &tuple, &tuple).unwrap());
        let z4 = Presentation::cyclic_sum(&[4]);
        assert!(!is_partial_iso(&z4, &z4, &[el(&[1])], &[el(&[2])]).unwrap());
        let z2 = Presentation::cyclic_sum(&[2]);
        let v4 = Presentation::cyclic_sum(&[2, 2]);
        assert!(is_partial_iso(&z2, &v4, &[el(&[1])], &[el(&[1, 0])]).unwrap());
        assert!(is_partial_iso(&z2, &v4, &[el(&[1])], &[]).is_err());
    }

    #[test]
    fn homomorphism_validation() {
        let z2 = Presentation::cyclic_sum(&[2]);
        let z4 = Presentation::cyclic_sum(&[4]);
        assert!(Homomorphism::from_images(&z2, &z4, &[el(&[2])]).is_ok());
        assert!(Homomorphism::from_images(&z2, &z4, &[el(&[1])]).is_err());
        let f = Homomorphism::from_images(&z4, &z4, &[el(&[3])]).unwrap();
        assert!(f.is_isomorphism().unwrap());
        assert_eq!(f.preimage(&el(&[1])).unwrap().map(|x| z4.canonical(&x).unwrap()), Some(el(&[3])));
    }

    #[test]
    fn stein_examples() {
        let z = Presentation::free(1);
        let z2 = Presentation::free(2);
        let b = Subgroup::whole(&z);
        let a = Subgroup::from_elements(&z, &[el(&[2])]).unwrap();
        let c2 = Subgroup::whole(&z2);
        let b2 = Subgroup::from_elements(&z2, &[el(&[1, 0])]).unwrap();
        let a2 = Subgroup::from_elements(&z2, &[el(&[2, 0])]).unwrap();
        let theta = Homomorphism::from_images(&z, &z2, &[el(&[1, 0])]).unwrap();
        assert_eq!(stein_check(&theta, &a, &b, &a2, &b2, &c2).unwrap(), SteinVerdict::Holds);

        let zero = Homomorphism::zero(&z, &z2);
        assert_eq!(stein_check(&zero, &a, &b, &a2, &b2, &c2).unwrap(), SteinVerdict::Holds);

        // C′ = ℤ, B′ = 2ℤ = A′: C′/B′ has torsion and θ escapes B′
        let c2 = Subgroup::whole(&z);
        let b2 = Subgroup::from_elements(&z, &[el(&[2])]).unwrap();
        let id = Homomorphism::from_images(&z, &z, &[el(&[1])]).unwrap();
        assert_eq!(
            stein_check(&id, &a, &b, &b2, &b2, &c2).unwrap(),
            SteinVerdict::HypothesesFail {
                failed: vec![SteinHypothesis::TorsionFreeQuotient],
                conclusion_holds: false
            }
        );
        assert!(stein_check(&id, &b, &a, &b2, &b2, &c2).is_err());
    }

    #[test]
    fn elements_of_small_groups() {
        let g = Presentation::from_i64(2, &[&[2, 4], &[0, 3]]).unwrap();
        let elems = g.elements(100).unwrap();
        assert_eq!(elems.len(), 6);
        for (i, x) in elems.iter().enumerate() {
            for y in &elems[i + 1..] {
                assert!(!g.equal(x, y).unwrap());
            }
            assert_eq!(&g.canonical(x).unwrap(), x);
        }
        assert!(Presentation::free(1).elements(100).is_err());
    }
}
