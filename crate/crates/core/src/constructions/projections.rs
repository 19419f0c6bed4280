//! Coherent projections `π_ν : G → G_ν` of a finished build and the
//! standard-form check.

use std::collections::BTreeMap;

use num_bigint::BigInt;

use super::build::{Build, GenName, StageClass};
use crate::abgroup::{Canonicalizer, GroupElement, Homomorphism, Presentation, Subgroup};
use crate::error::{Error, Result};
use crate::trees::Ladder;

/// `π_ν` for `ν = 0..=S`, stored as endomorphisms of `G^ℓ = G^ℓ_S`.
#[derive(Clone, Debug)]
pub struct ProjectionSystem {
    side: usize,
    group: Presentation,
    stage_start: Vec<usize>,
    maps: Vec<Homomorphism>,
}

impl ProjectionSystem {
    /// Fixes `G_ν`; kills `x`, `u`, `v` from stage `ν` on; sends `z_N` to 0
    /// and `z_n` to `p_n π(z_{n+1}) − π(k_n)` for chains at `δ ≥ ν`.
    pub fn new(build: &Build, side: usize) -> Result<Self> {
        if side > 1 {
            return Err(Error::Construction(format!("side {side} is not 0 or 1")));
        }
        let group = build.presentation(side);
        let total = group.gen_count();
        let stage_start: Vec<usize> = (0..=build.stage_count()).map(|a| build.stage_size(a)).collect();
        let mut maps = Vec::with_capacity(stage_start.len());
        for nu in 0..=build.stage_count() {
            let cut = stage_start[nu];
            let mut images: Vec<GroupElement> = (0..total)
                .map(|i| if i < cut { GroupElement::unit(total, i) } else { GroupElement::zero(total) })
                .collect();
            for (&delta, chain) in build.chains() {
                if delta < nu {
                    continue;
                }
                let ks = if side == 0 { &chain.k0 } else { &chain.data.k1 };
                let zi: Vec<usize> = (0..=chain.len())
                    .map(|n| build.index_of(GenName::Z { stage: delta, n }).expect("chain generator"))
                    .collect();
                for n in (0..chain.len()).rev() {
                    let pk = apply_images(&images, &ks[n], total);
                    images[zi[n]] = images[zi[n + 1]].scale(&BigInt::from(chain.primes()[n])).sub(&pk);
                }
            }
            maps.push(Homomorphism::from_images(&group, &group, &images)?);
        }
        Ok(ProjectionSystem {
            side,
            group,
            stage_start,
            maps,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn group(&self) -> &Presentation {
        &self.group
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn pi(&self, nu: usize) -> &Homomorphism {
        &self.maps[nu]
    }

    pub fn apply(&self, nu: usize, y: &GroupElement) -> Result<GroupElement> {
        self.maps[nu].apply(&y.resized(self.group.gen_count()))
    }

    /// `π_{ν,μ} : G_μ → G_ν`.
    pub fn restricted(&self, nu: usize, mu: usize) -> Result<Homomorphism> {
        if nu > mu {
            return Err(Error::Construction(format!("π_{{{nu},{mu}}} needs ν ≤ μ")));
        }
        let (m, n) = (self.stage_start[mu], self.stage_start[nu]);
        let source = truncated(&self.group, m);
        let target = truncated(&self.group, n);
        let images: Vec<GroupElement> = (0..m).map(|i| self.maps[nu].image_of_generator(i).resized(n)).collect();
        Homomorphism::from_images(&source, &target, &images)
    }

    /// `K_ν = ker π_ν`, spanned by `e_i − π_ν(e_i)`.
    pub fn kernel(&self, nu: usize) -> Result<Subgroup> {
        self.kernel_upto(nu, self.group.gen_count())
    }

    /// `K_{ν,ν+1} = K_ν ∩ G_{ν+1}`.
    pub fn kernel_step(&self, nu: usize) -> Result<Subgroup> {
        self.kernel_upto(nu, self.stage_start[(nu + 1).min(self.stage_start.len() - 1)])
    }

    fn kernel_upto(&self, nu: usize, upto: usize) -> Result<Subgroup> {
        let total = self.group.gen_count();
        let gens: Vec<GroupElement> = (0..upto)
            .map(|i| GroupElement::unit(total, i).sub(&self.maps[nu].image_of_generator(i)))
            .collect();
        Subgroup::from_elements(&self.group, &gens)
    }

    /// `π_τ ∘ π_ν = π_τ` for `τ ≤ ν`, and `π_ν` fixes `G_ν`.
    pub fn check_coherence(&self) -> Result<bool> {
        let c = Canonicalizer::new(&self.group);
        for nu in 0..self.maps.len() {
            for i in 0..self.stage_start[nu] {
                if !c.equal(&self.maps[nu].image_of_generator(i), &GroupElement::unit(self.group.gen_count(), i)) {
                    return Ok(false);
                }
            }
            for tau in 0..=nu {
                let comp = self.maps[nu].then(&self.maps[tau])?;
                let ok = (0..self.group.gen_count())
                    .all(|i| c.equal(&comp.image_of_generator(i), &self.maps[tau].image_of_generator(i)));
                if !ok {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Replaces `π_ν(e_i)` without validating; for negative tests.
    pub fn with_image(&self, nu: usize, i: usize, image: GroupElement) -> Result<Self> {
        let mut images = self.maps[nu].images();
        images[i] = image.resized(self.group.gen_count());
        let mut out = self.clone();
        out.maps[nu] = Homomorphism::from_images(&self.group, &self.group, &images)?;
        Ok(out)
    }
}

fn truncated(p: &Presentation, m: usize) -> Presentation {
    let rows = p.relations().row_vecs().into_iter().filter(|r| r[m..].iter().all(|c| *c == BigInt::from(0))).map(|mut r| {
        r.truncate(m);
        r
    });
    Presentation::new(m, crate::zlinalg::IntMatrix::from_rows(m, rows).expect("row lengths")).expect("columns")
}

fn apply_images(images: &[GroupElement], x: &GroupElement, total: usize) -> GroupElement {
    x.coeffs.iter().enumerate().fold(GroupElement::zero(total), |acc, (i, c)| acc.add(&images[i].scale(c)))
}

/// Both sides of a build.
pub fn build_projections(build: &Build) -> Result<(ProjectionSystem, ProjectionSystem)> {
    Ok((ProjectionSystem::new(build, 0)?, ProjectionSystem::new(build, 1)?))
}

/// `Y_δ`: the chain generators at an E1 stage, the gadget block at an E0 stage.
pub fn y_set(build: &Build, delta: usize) -> Vec<GroupElement> {
    let total = build.gen_count();
    build.block(delta).map(|i| GroupElement::unit(total, i)).collect()
}

/// Coherence plus `π_ν(y) = Σ_{α ∈ S} (π_{α+1}(y) − π_α(y))`, `S` the ladder
/// steps below `ν`, for every `y ∈ Y_δ` and non-E `ν < δ`.
///
/// Every E-stage with a nonempty block needs a ladder.
pub fn check_standard_form(build: &Build, proj: &ProjectionSystem, ladders: &BTreeMap<usize, Ladder>) -> Result<bool> {
    for (&delta, l) in ladders {
        if l.target != delta {
            return Err(Error::InvalidLadder(format!("ladder for {delta} targets {}", l.target)));
        }
        l.validate(|a| a < build.stage_count() && build.is_e1(a))?;
    }
    if !proj.check_coherence()? {
        return Ok(false);
    }
    let c = Canonicalizer::new(proj.group());
    for delta in 0..build.stage_count() {
        if build.plan()[delta] == StageClass::Free || build.block(delta).is_empty() {
            continue;
        }
        let ladder = ladders
            .get(&delta)
            .ok_or_else(|| Error::InvalidLadder(format!("no ladder supplied for stage {delta}")))?;
        for y in y_set(build, delta) {
            for nu in (0..delta).filter(|&nu| !build.is_e1(nu)) {
                let lhs = proj.apply(nu, &y)?;
                let mut rhs = GroupElement::zero(y.len());
                for &a in ladder.steps.iter().filter(|&&a| a < nu) {
                    rhs = rhs.add(&proj.apply(a + 1, &y)?).sub(&proj.apply(a, &y)?);
                }
                if !c.equal(&lhs, &rhs) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Canonical ladders for every E-stage that has a nonempty block.
pub fn canonical_ladders(build: &Build) -> BTreeMap<usize, Ladder> {
    (0..build.stage_count())
        .filter(|&d| build.is_e(d) && !build.block(d).is_empty())
        .map(|d| (d, build.canonical_ladder(d)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{build_truncated_pair, BuildOptions, GuessScript, HSpec};
    use crate::trees::Tree;

    fn toy(h: HSpec, floor: u64) -> Build {
        use StageClass::*;
        let script = GuessScript {
            e0: BTreeMap::from([(1, vec![vec![0], vec![0]])]),
            e1: BTreeMap::from([(3, h)]),
        };
        let opts = BuildOptions {
            gadget_len: 2,
            chain_len: 2,
            prime_floor: floor,
        };
        build_truncated_pair(&Tree::chain(5), &[Free, E0, Free, E1, Free], &script, opts).unwrap()
    }

    #[test]
    fn kills_new_generators() {
        let b = toy(HSpec::Identity { swap_x: true }, 1);
        let (p0, p1) = build_projections(&b).unwrap();
        for p in [&p0, &p1] {
            for nu in 0..=b.stage_count() {
                for (i, name) in b.names().iter().enumerate() {
                    let img = p.pi(nu).image_of_generator(i);
                    match name {
                        GenName::Z { .. } => {}
                        _ if name.stage() >= nu => assert!(img.is_trivial(), "π_{nu}({name})"),
                        _ => assert_eq!(img, GroupElement::unit(b.gen_count(), i)),
                    }
                }
            }
        }
    }

    #[test]
    fn chain_projection_formula() {
        let b = toy(HSpec::Identity { swap_x: true }, 1);
        let chain = b.chain(3).unwrap();
        assert_eq!(chain.primes()[0], 2);
        let (p0, _) = build_projections(&b).unwrap();
        let total = b.gen_count();
        let k = |n: usize| chain.k0[n].resized(total);
        let expect = k(0).add(&k(1).scale(&BigInt::from(chain.primes()[0]))).neg();
        assert_eq!(p0.apply(3, &b.z(3, 0)).unwrap(), expect);
        assert!(p0.apply(3, &b.z(3, 2)).unwrap().is_trivial());
    }

    #[test]
    fn standard_form_and_tampering() {
        let b = toy(HSpec::Identity { swap_x: true }, 16);
        let ladders = canonical_ladders(&b);
        assert_eq!(ladders.keys().copied().collect::<Vec<_>>(), vec![1, 3]);
        let (p0, p1) = build_projections(&b).unwrap();
        assert!(check_standard_form(&b, &p0, &ladders).unwrap());
        assert!(check_standard_form(&b, &p1, &ladders).unwrap());
        assert!(p0.kernel_step(2).unwrap().contains(&b.x(2, 0)).unwrap());
        assert!(!p0.kernel(2).unwrap().contains(&b.x(0, 1)).unwrap());

        // E0 stages are summands, so they may sit on a ladder
        let mut through_gadget = ladders.clone();
        through_gadget.insert(3, Ladder { target: 3, steps: vec![1, 2] });
        assert!(check_standard_form(&b, &p0, &through_gadget).unwrap());
        let mut bad = ladders.clone();
        bad.insert(3, Ladder { target: 3, steps: vec![0, 1] });
        assert!(check_standard_form(&b, &p0, &bad).is_err());

        let flipped = p0.with_image(3, 0, b.x(0, 0).neg()).unwrap();
        assert!(!check_standard_form(&b, &flipped, &ladders).unwrap());
    }

    #[test]
    fn restriction_is_identity_on_the_image() {
        let b = toy(HSpec::Identity { swap_x: false }, 16);
        let (p0, _) = build_projections(&b).unwrap();
        // the chain's k's carry a w-part, so the congruence needs the gadget stage on the ladder
        assert_eq!(b.ladder_support(3).into_iter().collect::<Vec<_>>(), vec![1, 2]);
        let mut ladders = canonical_ladders(&b);
        assert!(check_standard_form(&b, &p0, &ladders).unwrap());
        ladders.insert(3, Ladder { target: 3, steps: vec![0, 2] });
        assert!(!check_standard_form(&b, &p0, &ladders).unwrap());
        assert!(b.valid_ladders(3).iter().all(|l| l.steps.contains(&1)));
        let r = p0.restricted(2, 4).unwrap();
        assert_eq!(r.source().gen_count(), b.stage_size(4));
        assert_eq!(r.target().gen_count(), b.stage_size(2));
        assert!(p0.restricted(3, 2).is_err());
    }
}
