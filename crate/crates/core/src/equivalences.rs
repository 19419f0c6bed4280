//! Filtrations, quotient-equivalence and level-preserving isomorphisms.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::abgroup::{is_partial_iso, quotient_of_subgroups, GroupElement, Homomorphism, Presentation, Subgroup};
use crate::constructions::{vectors_with_l1, Build, StageClass, WName};
use crate::error::{Error, Result};
use crate::trees::Ladder;

/// `0 = A_0 ⊆ A_1 ⊆ … ⊆ A_n` inside `ambient`, with `A_{ν+1} = A_ν + ⟨blocks[ν]⟩`.
#[derive(Clone, Debug)]
pub struct Filtration {
    ambient: Presentation,
    blocks: Vec<Vec<GroupElement>>,
    e_flags: Vec<bool>,
}

/// Serialized filtration: relation rows, then generator blocks per level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiltrationJson {
    pub gen_count: usize,
    #[serde(default)]
    pub relations: Vec<Vec<i64>>,
    pub blocks: Vec<Vec<Vec<i64>>>,
    /// Levels flagged as non-summands.
    #[serde(default)]
    pub e: Vec<usize>,
}

impl Filtration {
    pub fn new(ambient: Presentation, blocks: Vec<Vec<GroupElement>>, e_flags: Vec<bool>) -> Result<Self> {
        if e_flags.len() != blocks.len() + 1 {
            return Err(Error::DimensionMismatch(format!(
                "{} E flags for {} levels",
                e_flags.len(),
                blocks.len() + 1
            )));
        }
        for x in blocks.iter().flatten() {
            ambient.check_element(x)?;
        }
        Ok(Filtration {
            ambient,
            blocks,
            e_flags,
        })
    }

    pub fn from_json(j: &FiltrationJson) -> Result<Self> {
        let rows: Vec<&[i64]> = j.relations.iter().map(|r| r.as_slice()).collect();
        let ambient = Presentation::from_i64(j.gen_count, &rows)?;
        let blocks = j
            .blocks
            .iter()
            .map(|b| b.iter().map(|x| GroupElement::from_i64(x)).collect())
            .collect::<Vec<Vec<_>>>();
        let mut e_flags = vec![false; blocks.len() + 1];
        for &i in &j.e {
            *e_flags
                .get_mut(i)
                .ok_or_else(|| Error::Schema(format!("E level {i} out of range")))? = true;
        }
        Filtration::new(ambient, blocks, e_flags)
    }

    /// Stage filtration of one side of a build.
    pub fn from_build(build: &Build, side: usize) -> Self {
        let total = build.gen_count();
        // gadget blocks in the basis w_0, …, w_{N-1}, u_N, v_0, …, v_{N-1}
        let blocks = (0..build.stage_count())
            .map(|a| {
                if build.plan()[a] != StageClass::E0 || build.block(a).is_empty() {
                    return build.block(a).map(|i| GroupElement::unit(total, i)).collect();
                }
                let n = build.options().gadget_len;
                (0..n)
                    .map(|k| build.w(WName { sigma: a, n: k }))
                    .chain(std::iter::once(build.u(a, n)))
                    .chain((0..n).map(|k| build.v(a, k)))
                    .collect()
            })
            .collect();
        let mut e_flags: Vec<bool> = build.plan().iter().map(|&c| c == StageClass::E1).collect();
        e_flags.push(false);
        Filtration {
            ambient: build.presentation(side),
            blocks,
            e_flags,
        }
    }

    pub fn ambient(&self) -> &Presentation {
        &self.ambient
    }

    /// Number of levels, `A_0` included.
    pub fn len(&self) -> usize {
        self.blocks.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_e(&self, level: usize) -> bool {
        self.e_flags[level]
    }

    pub fn block(&self, level: usize) -> &[GroupElement] {
        &self.blocks[level]
    }

    /// Generators of `A_ν`, blocks concatenated.
    pub fn generators(&self, level: usize) -> Vec<GroupElement> {
        self.blocks[..level].iter().flatten().cloned().collect()
    }

    pub fn generator_count(&self, level: usize) -> usize {
        self.blocks[..level].iter().map(|b| b.len()).sum()
    }

    pub fn level(&self, level: usize) -> Result<Subgroup> {
        if level >= self.len() {
            return Err(Error::DimensionMismatch(format!("level {level} of {}", self.len())));
        }
        Subgroup::from_elements(&self.ambient, &self.generators(level))
    }

    /// `A_{α+1}/A_α`.
    pub fn quotient(&self, alpha: usize) -> Result<Presentation> {
        quotient_of_subgroups(&self.level(alpha + 1)?, &self.level(alpha)?)
    }
}

/// Successive quotients agree after adding free summands, i.e. their
/// torsion parts match, at every stage.
pub fn stable_quotient_equiv(f: &Filtration, g: &Filtration) -> Result<bool> {
    if f.len() != g.len() {
        return Err(Error::DimensionMismatch(format!("filtrations of length {} and {}", f.len(), g.len())));
    }
    stable_quotient_equiv_upto(f, g, f.len() - 1)
}

/// The same, for stages `α < upto`.
pub fn stable_quotient_equiv_upto(f: &Filtration, g: &Filtration, upto: usize) -> Result<bool> {
    if upto >= f.len() || upto >= g.len() {
        return Err(Error::DimensionMismatch(format!("stage {upto} beyond a filtration")));
    }
    for alpha in 0..upto {
        if f.quotient(alpha)?.invariant_factors().torsion != g.quotient(alpha)?.invariant_factors().torsion {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `θ : A_top → B_top`, given by the images of the generators of `A_top`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelIso {
    pub top: usize,
    pub images: Vec<GroupElement>,
}

impl LevelIso {
    /// From a map on the first generators of the ambient group of a build filtration.
    pub fn from_homomorphism(top: usize, h: &Homomorphism, ambient_len: usize) -> Self {
        LevelIso {
            top,
            images: h.images().iter().map(|x| x.resized(ambient_len)).collect(),
        }
    }

    /// As a homomorphism out of the subgroup `A_top` (presented on its generators).
    pub fn as_homomorphism(&self, f: &Filtration, g: &Filtration) -> Result<Homomorphism> {
        let gens = f.generators(self.top);
        if gens.len() != self.images.len() {
            return Err(Error::DimensionMismatch("image count differs from generator count".into()));
        }
        let rel = f.ambient().relation_lattice(&gens)?;
        let source = Presentation::new(gens.len(), rel)?;
        Homomorphism::from_images(&source, g.ambient(), &self.images)
    }

    pub fn apply(&self, f: &Filtration, g: &Filtration, coeffs: &[BigInt]) -> Result<GroupElement> {
        self.as_homomorphism(f, g)?.apply(&GroupElement::new(coeffs.to_vec()))
    }
}

fn same_span(a: &Presentation, xs: &[GroupElement], ys: &[GroupElement]) -> Result<bool> {
    let sx = Subgroup::from_elements(a, xs)?;
    let sy = Subgroup::from_elements(a, ys)?;
    Ok(sx.is_contained_in(&sy)? && sy.is_contained_in(&sx)?)
}

/// `θ` is a well-defined injective map on `A_top` with `θ[A_ν] = B_ν` for all
/// `ν ≤ top`; at `ν = top` this is surjectivity.
pub fn is_level_preserving(iso: &LevelIso, f: &Filtration, g: &Filtration) -> Result<bool> {
    if iso.top >= f.len() || iso.top >= g.len() {
        return Err(Error::DimensionMismatch(format!("level {} outside the filtrations", iso.top)));
    }
    let gens = f.generators(iso.top);
    if iso.images.len() != gens.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} images for {} generators of level {}",
            iso.images.len(),
            gens.len(),
            iso.top
        )));
    }
    if !is_partial_iso(f.ambient(), g.ambient(), &gens, &iso.images)? {
        return Ok(false);
    }
    for nu in 0..=iso.top {
        let c = f.generator_count(nu);
        if !same_span(g.ambient(), &iso.images[..c], &g.generators(nu))? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchOptions {
    /// Bound on each coefficient of an image over the target's level generators.
    pub coeff_bound: i64,
    /// Largest `|·|₁` of a candidate coefficient vector.
    pub max_l1: usize,
    pub max_nodes: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            coeff_bound: 2,
            max_l1: 3,
            max_nodes: 200_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SearchOutcome {
    Found { iso: LevelIso },
    /// `bounded`: absence holds only within the coefficient bounds (or budget).
    Absent { bounded: bool, budget_exhausted: bool },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchReport {
    pub outcome: SearchOutcome,
    pub nodes: usize,
}

impl SearchReport {
    pub fn found(&self) -> Option<&LevelIso> {
        match &self.outcome {
            SearchOutcome::Found { iso } => Some(iso),
            SearchOutcome::Absent { .. } => None,
        }
    }
}

struct Search<'a> {
    f: &'a Filtration,
    g: &'a Filtration,
    top: usize,
    gens: Vec<GroupElement>,
    level_of: Vec<usize>,
    /// Assignment order: generators tied by relations come together.
    order: Vec<usize>,
    candidates: Vec<Vec<GroupElement>>,
    assigned: Vec<usize>,
    nodes: usize,
    max_nodes: usize,
}

/// Greedy order over the generators: repeatedly take the relation with the
/// fewest unplaced generators, then whatever is left in level order.
fn relation_order(f: &Filtration, gens: &[GroupElement]) -> Result<Vec<usize>> {
    let lattice = f.ambient().relation_lattice(gens)?;
    let supports: Vec<Vec<usize>> = (0..lattice.rows())
        .map(|r| (0..gens.len()).filter(|&j| !lattice.get(r, j).is_zero()).collect())
        .collect();
    let mut placed = vec![false; gens.len()];
    let mut order = Vec::with_capacity(gens.len());
    loop {
        let next = supports
            .iter()
            .map(|s| (s.iter().filter(|&&j| !placed[j]).count(), s))
            .filter(|(open, _)| *open > 0)
            .min_by_key(|(open, s)| (*open, s.iter().max().copied()));
        let Some((_, s)) = next else { break };
        for &j in s {
            if !placed[j] {
                placed[j] = true;
                order.push(j);
            }
        }
    }
    order.extend((0..gens.len()).filter(|&j| !placed[j]));
    Ok(order)
}

impl Search<'_> {
    /// Span checks for the levels completed by placing a generator of level `l`.
    fn levels_ok(&self, l: Option<usize>, images: &[Option<GroupElement>]) -> Result<bool> {
        let first = l.map_or(0, |l| l + 1);
        for nu in first..=self.top {
            if (0..nu).any(|b| self.assigned[b] < self.f.block(b).len()) {
                break;
            }
            let imgs: Vec<GroupElement> = images[..self.f.generator_count(nu)].iter().map(|x| x.clone().expect("assigned")).collect();
            if !same_span(self.g.ambient(), &imgs, &self.g.generators(nu))? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `None` when the budget runs out.
    fn dfs(&mut self, depth: usize, images: &mut Vec<Option<GroupElement>>) -> Result<Option<bool>> {
        if depth == self.gens.len() {
            return Ok(Some(true));
        }
        let i = self.order[depth];
        let lvl = self.level_of[i];
        // same position first, then the rest in enumeration order
        let pool = &self.candidates[lvl];
        let mut order: Vec<usize> = (0..pool.len()).collect();
        let preferred = self.g.generators(lvl + 1).get(i).cloned();
        if let Some(pos) = preferred.and_then(|p| pool.iter().position(|c| *c == p)) {
            order.remove(pos);
            order.insert(0, pos);
        }
        let placed: Vec<usize> = self.order[..=depth].to_vec();
        let src: Vec<GroupElement> = placed.iter().map(|&j| self.gens[j].clone()).collect();
        for idx in order {
            self.nodes += 1;
            if self.nodes > self.max_nodes {
                return Ok(None);
            }
            images[i] = Some(self.candidates[lvl][idx].clone());
            self.assigned[lvl] += 1;
            let tgt: Vec<GroupElement> = placed.iter().map(|&j| images[j].clone().expect("assigned")).collect();
            let ok = is_partial_iso(self.f.ambient(), self.g.ambient(), &src, &tgt)? && self.levels_ok(Some(lvl), images)?;
            if ok {
                match self.dfs(depth + 1, images)? {
                    Some(true) => return Ok(Some(true)),
                    None => return Ok(None),
                    Some(false) => {}
                }
            }
            self.assigned[lvl] -= 1;
            images[i] = None;
        }
        Ok(Some(false))
    }
}

/// Bounded backtracking for `θ : A_{α+1} → B_{α+1}` with `θ[A_ν] = B_ν`
/// for `ν ≤ α+1`. Non-isomorphic successive quotients give an unbounded
/// negative answer.
pub fn search_level_preserving(f: &Filtration, g: &Filtration, alpha: usize, opts: SearchOptions) -> Result<SearchReport> {
    let top = alpha + 1;
    if top >= f.len() || top >= g.len() {
        return Err(Error::DimensionMismatch(format!("level {top} outside the filtrations")));
    }
    for a in 0..top {
        if !crate::abgroup::are_isomorphic(&f.quotient(a)?, &g.quotient(a)?) {
            return Ok(SearchReport {
                outcome: SearchOutcome::Absent {
                    bounded: false,
                    budget_exhausted: false,
                },
                nodes: 0,
            });
        }
    }
    let gens = f.generators(top);
    let level_of: Vec<usize> = (0..top).flat_map(|nu| std::iter::repeat(nu).take(f.block(nu).len())).collect();
    let candidates = (0..top)
        .map(|nu| {
            let hs = g.generators(nu + 1);
            let mut out = Vec::new();
            for l1 in 1..=opts.max_l1 {
                for v in vectors_with_l1(hs.len(), l1) {
                    if v.iter().any(|c| c.abs() > opts.coeff_bound) {
                        continue;
                    }
                    let x = v.iter().zip(&hs).fold(g.ambient().zero(), |acc, (&c, h)| acc.add(&h.scale(&BigInt::from(c))));
                    out.push(x);
                }
            }
            out
        })
        .collect();
    let order = relation_order(f, &gens)?;
    let mut s = Search {
        f,
        g,
        top,
        level_of,
        order,
        candidates,
        assigned: vec![0; top],
        nodes: 0,
        max_nodes: opts.max_nodes,
        gens,
    };
    let mut images = vec![None; s.gens.len()];
    let outcome = if !s.levels_ok(None, &images)? {
        SearchOutcome::Absent {
            bounded: false,
            budget_exhausted: false,
        }
    } else {
        match s.dfs(0, &mut images)? {
            Some(true) => SearchOutcome::Found {
                iso: LevelIso {
                    top,
                    images: images.into_iter().map(|x| x.expect("assigned")).collect(),
                },
            },
            Some(false) => SearchOutcome::Absent {
                bounded: true,
                budget_exhausted: false,
            },
            None => SearchOutcome::Absent {
                bounded: true,
                budget_exhausted: true,
            },
        }
    };
    Ok(SearchReport { outcome, nodes: s.nodes })
}

/// `θ_δ : G⁰_{δ+1} → G¹_{δ+1}` together with the ladder it matches on.
#[derive(Clone, Debug)]
pub struct Patch {
    pub theta: Homomorphism,
    pub ladder: Ladder,
}

fn prefix_units(total: usize, count: usize) -> Vec<GroupElement> {
    (0..count).map(|i| GroupElement::unit(total, i)).collect()
}

/// Checks `θ[G_β] = G′_β` and `θ[G_{β+1}] = G′_{β+1}` along the ladder.
pub fn check_patch(build: &Build, delta: usize, patch: &Patch) -> Result<()> {
    patch.ladder.validate(|a| build.is_e1(a))?;
    if patch.ladder.target != delta {
        return Err(Error::InvalidLadder(format!("ladder targets {} not {delta}", patch.ladder.target)));
    }
    let m = build.stage_size(delta + 1);
    if patch.theta.source().gen_count() != m || patch.theta.target().gen_count() != m {
        return Err(Error::DimensionMismatch(format!("patch at {delta} must act on {m} generators")));
    }
    let target = patch.theta.target();
    for &b in &patch.ladder.steps {
        for level in [b, b + 1] {
            let c = build.stage_size(level);
            let imgs: Vec<GroupElement> = (0..c).map(|i| patch.theta.image_of_generator(i)).collect();
            if !same_span(target, &imgs, &prefix_units(m, c))? {
                return Err(Error::Construction(format!(
                    "patch at stage {delta} does not carry level {level} onto itself"
                )));
            }
        }
    }
    Ok(())
}

/// Extends `f : G⁰_μ → G¹_μ` to `G⁰_ν`, stage by stage: free and gadget
/// blocks by their names, ladder steps of a later chain stage by its patch
/// `θ_δ`, and the chain generators at `δ` by `θ_δ` itself.
pub fn extend_level_preserving(build: &Build, f: &LevelIso, nu: usize, patches: &BTreeMap<usize, Patch>) -> Result<LevelIso> {
    let (f0, f1) = (Filtration::from_build(build, 0), Filtration::from_build(build, 1));
    let mu = f.top;
    let s = build.stage_count();
    if mu > nu || nu > s {
        return Err(Error::Construction(format!("cannot extend from {mu} to {nu}")));
    }
    for a in [mu, nu] {
        if a < s && build.is_e1(a) {
            return Err(Error::Construction(format!("level {a} is an E1 stage")));
        }
    }
    if !is_level_preserving(f, &f0, &f1)? {
        return Err(Error::Construction("the map to extend is not level-preserving".into()));
    }
    let mut step_patch: BTreeMap<usize, &Patch> = BTreeMap::new();
    for delta in (mu..nu).filter(|d| build.chains().contains_key(d)) {
        let p = patches
            .get(&delta)
            .ok_or_else(|| Error::Construction(format!("no patch supplied for chain stage {delta}")))?;
        check_patch(build, delta, p)?;
        for &b in p.ladder.steps.iter().filter(|&&b| b >= mu) {
            step_patch.entry(b).or_insert(p);
        }
    }
    let total = build.gen_count();
    let mut images = f.images.clone();
    for tau in mu..nu {
        let via = if build.chains().contains_key(&tau) {
            patches.get(&tau)
        } else {
            step_patch.get(&tau).copied()
        };
        for i in build.block(tau) {
            images.push(match via {
                Some(p) => p.theta.image_of_generator(i).resized(total),
                None => GroupElement::unit(total, i),
            });
        }
    }
    let out = LevelIso { top: nu, images };
    out.as_homomorphism(&f0, &f1)?;
    if !is_level_preserving(&out, &f0, &f1)? {
        return Err(Error::Construction(format!("extension to level {nu} is not level-preserving")));
    }
    Ok(out)
}

/// The build's own family as patches, with ladders trimmed to start at or above `mu`.
pub fn family_patches(build: &Build, mu: usize) -> BTreeMap<usize, Patch> {
    build
        .chains()
        .keys()
        .map(|&d| {
            let mut ladder = build.canonical_ladder(d);
            ladder.steps.retain(|&b| b >= mu || b + 1 == d);
            (
                d,
                Patch {
                    theta: build.family_map(d).clone(),
                    ladder,
                },
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{build_truncated_pair, BuildOptions, GuessScript, HSpec, StageClass};
    use crate::trees::Tree;

    fn el(c: &[i64]) -> GroupElement {
        GroupElement::from_i64(c)
    }

    fn two_step(first: &[&[i64]], second: &[&[i64]]) -> Filtration {
        Filtration::new(
            Presentation::free(first[0].len()),
            vec![first.iter().map(|c| el(c)).collect(), second.iter().map(|c| el(c)).collect()],
            vec![false; 3],
        )
        .unwrap()
    }

    fn plan5(h: HSpec) -> Build {
        use StageClass::*;
        let script = GuessScript {
            e0: BTreeMap::from([(1, vec![vec![0], vec![0]])]),
            e1: BTreeMap::from([(3, h)]),
        };
        build_truncated_pair(&Tree::chain(5), &[Free, E0, Free, E1, Free], &script, BuildOptions::default()).unwrap()
    }

    #[test]
    fn stable_quotients() {
        let f = two_step(&[&[2]], &[&[1]]);
        let g = two_step(&[&[3]], &[&[1]]);
        assert!(stable_quotient_equiv(&f, &f).unwrap());
        assert!(!stable_quotient_equiv(&f, &g).unwrap());
        let a = Filtration::new(Presentation::free(7), vec![vec![], (0..2).map(|i| GroupElement::unit(7, i)).collect()], vec![false; 3]).unwrap();
        let b = Filtration::new(Presentation::free(7), vec![vec![], (0..5).map(|i| GroupElement::unit(7, i)).collect()], vec![false; 3]).unwrap();
        assert!(stable_quotient_equiv(&a, &b).unwrap());
        let short = Filtration::new(Presentation::free(1), vec![], vec![false]).unwrap();
        assert!(stable_quotient_equiv(&f, &short).is_err());
    }

    #[test]
    fn level_preservation() {
        let f = two_step(&[&[1, 0]], &[&[0, 1]]);
        let id = LevelIso { top: 2, images: vec![el(&[1, 0]), el(&[0, 1])] };
        assert!(is_level_preserving(&id, &f, &f).unwrap());
        let swap = LevelIso { top: 2, images: vec![el(&[0, 1]), el(&[1, 0])] };
        assert!(!is_level_preserving(&swap, &f, &f).unwrap());
        let short = LevelIso { top: 2, images: vec![el(&[1, 0])] };
        assert!(is_level_preserving(&short, &f, &f).is_err());
    }

    #[test]
    fn bounded_search() {
        let f = two_step(&[&[1, 0]], &[&[0, 1]]);
        let r = search_level_preserving(&f, &f, 1, SearchOptions::default()).unwrap();
        assert_eq!(r.found().unwrap().images, vec![el(&[1, 0]), el(&[0, 1])]);
        let g = two_step(&[&[3, 0]], &[&[1, 0], &[0, 1]]);
        let r = search_level_preserving(&f, &g, 1, SearchOptions::default()).unwrap();
        assert!(matches!(r.outcome, SearchOutcome::Absent { bounded: false, .. }));
        // B_1 = ⟨(5,0), (7,0)⟩: the image of (1,0) needs a coefficient 3
        let g = two_step(&[&[5, 0], &[7, 0]], &[&[0, 1]]);
        let tight = SearchOptions { coeff_bound: 2, ..SearchOptions::default() };
        let r = search_level_preserving(&f, &g, 1, tight).unwrap();
        assert!(matches!(r.outcome, SearchOutcome::Absent { bounded: true, budget_exhausted: false }));
        let loose = SearchOptions { coeff_bound: 3, max_l1: 5, ..SearchOptions::default() };
        let r = search_level_preserving(&f, &g, 1, loose).unwrap();
        assert!(is_level_preserving(r.found().unwrap(), &f, &g).unwrap());
    }

    #[test]
    fn build_sides_are_filtration_equivalent() {
        for h in [HSpec::Family, HSpec::Identity { swap_x: true }] {
            let b = plan5(h);
            let (f0, f1) = (Filtration::from_build(&b, 0), Filtration::from_build(&b, 1));
            assert!(stable_quotient_equiv(&f0, &f1).unwrap());
            for alpha in 0..b.stage_count() {
                let fam = LevelIso::from_homomorphism(alpha + 1, b.family_map(alpha), b.gen_count());
                assert!(is_level_preserving(&fam, &f0, &f1).unwrap());
                let r = search_level_preserving(&f0, &f1, alpha, SearchOptions::default()).unwrap();
                assert!(is_level_preserving(r.found().expect("witness"), &f0, &f1).unwrap());
            }
        }
    }

    #[test]
    fn extension_along_patches() {
        let b = plan5(HSpec::Identity { swap_x: true });
        let (f0, f1) = (Filtration::from_build(&b, 0), Filtration::from_build(&b, 1));
        let empty = LevelIso { top: 0, images: vec![] };
        // gadget stages are summands and need no patch
        let low = extend_level_preserving(&b, &empty, 2, &BTreeMap::new()).unwrap();
        assert!(is_level_preserving(&low, &f0, &f1).unwrap());
        assert!(extend_level_preserving(&b, &empty, 5, &BTreeMap::new()).is_err());
        let patches = family_patches(&b, 0);
        let full = extend_level_preserving(&b, &empty, 5, &patches).unwrap();
        let from4 = LevelIso { top: 4, images: full.images[..b.stage_size(4)].to_vec() };
        let step = extend_level_preserving(&b, &from4, 5, &BTreeMap::new()).unwrap();
        assert!(is_level_preserving(&step, &f0, &f1).unwrap());
        let from2 = LevelIso { top: 2, images: full.images[..b.stage_size(2)].to_vec() };
        let again = extend_level_preserving(&b, &from2, 5, &patches).unwrap();
        assert_eq!(again.images[..from2.images.len()], from2.images[..]);

        // x[0,0] ↦ x[0,0] + x[2,0] moves level 2
        let theta = b.family_map(3);
        let m = theta.source().gen_count();
        let mut imgs = theta.images();
        imgs[0] = imgs[0].add(&b.x(2, 0).resized(m));
        let bad = Homomorphism::from_images(theta.source(), theta.target(), &imgs).unwrap();
        let mut broken = patches.clone();
        broken.get_mut(&3).unwrap().theta = bad;
        let err = extend_level_preserving(&b, &empty, 5, &broken).unwrap_err();
        assert!(err.to_string().contains("level"));
    }
}
