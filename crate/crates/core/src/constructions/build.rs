//! Parallel builds `G⁰`, `G¹` over a finite stage plan.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::registry::{update_w_registry, WName, WRegistry};
use super::zchain::{gadget_iso, select_prime, ChainData, Triple, TripleEnumerator};
use crate::abgroup::{Canonicalizer, GroupElement, Homomorphism, Presentation, Subgroup};
use crate::error::{Error, Result};
use crate::trees::{antichain_chain_cover, build_tree, minimal_antichain, Antichain, Ladder, Node, Tree};
use crate::zlinalg::IntMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageClass {
    Free,
    E0,
    E1,
}

impl StageClass {
    pub fn is_e(self) -> bool {
        self != StageClass::Free
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenName {
    X { stage: usize, j: usize },
    U { stage: usize, n: usize },
    V { stage: usize, n: usize },
    Z { stage: usize, n: usize },
}

impl GenName {
    pub fn stage(self) -> usize {
        match self {
            GenName::X { stage, .. } | GenName::U { stage, .. } | GenName::V { stage, .. } | GenName::Z { stage, .. } => {
                stage
            }
        }
    }
}

impl fmt::Display for GenName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GenName::X { stage, j } => write!(f, "x[{stage},{j}]"),
            GenName::U { stage, n } => write!(f, "u[{stage},{n}]"),
            GenName::V { stage, n } => write!(f, "v[{stage},{n}]"),
            GenName::Z { stage, n } => write!(f, "z[{stage},{n}]"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildOptions {
    /// Number of `w`'s per gadget (`u_0..u_L`, `v_0..v_{L-1}`).
    pub gadget_len: usize,
    /// Number of chain relations (`z_0..z_N`).
    pub chain_len: usize,
    /// Chain primes are taken above this bound.
    pub prime_floor: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            gadget_len: 2,
            chain_len: 3,
            prime_floor: 16,
        }
    }
}

/// The guessed map `h : G⁰_δ → G¹_δ` at an E1 stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HSpec {
    /// The family member `f_{δ-1}`.
    Family,
    /// Same-named generators, optionally swapping the two `x`'s of stage `δ-1`.
    Identity {
        #[serde(default)]
        swap_x: bool,
    },
    /// Rows are images of the generators of `G⁰_δ`.
    Matrix { rows: Vec<Vec<i64>> },
}

/// Stand-in for the predictions: one `h` per E1 stage, one sequence
/// `Θ_0, Θ_1, …` per E0 stage.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuessScript {
    #[serde(default, with = "stage_keys")]
    pub e0: BTreeMap<usize, Vec<Vec<Node>>>,
    #[serde(default, with = "stage_keys")]
    pub e1: BTreeMap<usize, HSpec>,
}

// JSON object keys are strings; buffered (tagged) deserialization won't coerce them.
mod stage_keys {
    use std::collections::BTreeMap;

    use serde::de::{DeserializeOwned, Error};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<T: Serialize, S: Serializer>(m: &BTreeMap<usize, T>, s: S) -> Result<S::Ok, S::Error> {
        let m: BTreeMap<String, &T> = m.iter().map(|(k, v)| (k.to_string(), v)).collect();
        m.serialize(s)
    }

    pub fn deserialize<'de, T: DeserializeOwned, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<usize, T>, D::Error> {
        BTreeMap::<String, T>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| k.parse().map(|k| (k, v)).map_err(|_| D::Error::custom(format!("stage key `{k}` is not an index"))))
            .collect()
    }
}

/// `a0·x[s,0] + a1·x[s,1] ± w`; the companion side replaces `w` by `v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KForm {
    pub x_stage: usize,
    pub a0: i64,
    pub a1: i64,
    pub w: Option<(WName, i64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KCase {
    NonzeroY,
    UnequalMultipliers,
    EqualMultipliers,
    OppositeMultipliers,
}

#[derive(Clone, Debug)]
pub struct ZChain {
    pub stage: usize,
    pub beta: Node,
    pub thetas: Vec<Antichain>,
    pub ks: Vec<KForm>,
    pub cases: Vec<Option<KCase>>,
    pub triples: Vec<Option<Triple>>,
    /// `k_n` in `G⁰_δ`.
    pub k0: Vec<GroupElement>,
    pub data: ChainData,
}

impl ZChain {
    pub fn primes(&self) -> &[u64] {
        &self.data.primes
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct Build {
    plan: Vec<StageClass>,
    options: BuildOptions,
    tree: Tree,
    gens: Vec<GenName>,
    stage_start: Vec<usize>,
    rels: [Vec<(usize, Vec<BigInt>)>; 2],
    upsilon: BTreeMap<usize, Vec<Antichain>>,
    registry: WRegistry,
    guesses: BTreeMap<usize, Homomorphism>,
    chains: BTreeMap<usize, ZChain>,
    family: Vec<Homomorphism>,
}

fn scaled(x: &GroupElement, k: i64) -> GroupElement {
    x.scale(&BigInt::from(k))
}

impl Build {
    pub fn plan(&self) -> &[StageClass] {
        &self.plan
    }

    pub fn options(&self) -> BuildOptions {
        self.options
    }

    /// Index tree, padded with isolated roots up to the number of stages.
    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn stage_count(&self) -> usize {
        self.plan.len()
    }

    pub fn is_e(&self, stage: usize) -> bool {
        self.plan[stage].is_e()
    }

    /// E1 stages are the ones whose successor quotient is not free over them;
    /// E0 stages stay summands and carry projections.
    pub fn is_e1(&self, stage: usize) -> bool {
        self.plan[stage] == StageClass::E1
    }

    /// Stages below `δ` in which the chain data at `δ` lives: the x-stage and
    /// the w-gadget of every `k_n`.
    pub fn ladder_support(&self, delta: usize) -> std::collections::BTreeSet<usize> {
        self.chains
            .get(&delta)
            .map(|c| c.ks.iter().flat_map(|k| std::iter::once(k.x_stage).chain(k.w.map(|(w, _)| w.sigma))).collect())
            .unwrap_or_default()
    }

    pub fn gen_count(&self) -> usize {
        self.gens.len()
    }

    pub fn names(&self) -> &[GenName] {
        &self.gens
    }

    pub fn index_of(&self, name: GenName) -> Option<usize> {
        self.gens.iter().position(|&g| g == name)
    }

    /// Number of generators of `G_α` (`α ≤ stage_count`).
    pub fn stage_size(&self, alpha: usize) -> usize {
        self.stage_start[alpha]
    }

    pub fn block(&self, stage: usize) -> std::ops::Range<usize> {
        self.stage_start[stage]..self.stage_start[stage + 1]
    }

    /// `G^ℓ_α` on its first generators.
    pub fn stage_presentation(&self, side: usize, alpha: usize) -> Presentation {
        let m = self.stage_start[alpha];
        let rows = self.rels[side].iter().filter(|(s, _)| *s < alpha).map(|(_, r)| {
            let mut r = r.clone();
            r.resize(m, BigInt::zero());
            r
        });
        Presentation::new(m, IntMatrix::from_rows(m, rows).expect("row lengths")).expect("columns")
    }

    pub fn presentation(&self, side: usize) -> Presentation {
        self.stage_presentation(side, self.stage_count())
    }

    fn unit(&self, name: GenName) -> GroupElement {
        let i = self.index_of(name).unwrap_or_else(|| panic!("{name} is not a generator"));
        GroupElement::unit(self.gen_count(), i)
    }

    pub fn x(&self, stage: usize, j: usize) -> GroupElement {
        self.unit(GenName::X { stage, j })
    }

    pub fn u(&self, stage: usize, n: usize) -> GroupElement {
        self.unit(GenName::U { stage, n })
    }

    pub fn v(&self, stage: usize, n: usize) -> GroupElement {
        self.unit(GenName::V { stage, n })
    }

    pub fn z(&self, stage: usize, n: usize) -> GroupElement {
        self.unit(GenName::Z { stage, n })
    }

    /// `w[σ,n] = 2u[σ,n+1] − u[σ,n]`, an element of `G⁰`.
    pub fn w(&self, w: WName) -> GroupElement {
        scaled(&self.u(w.sigma, w.n + 1), 2).sub(&self.u(w.sigma, w.n))
    }

    /// `k` on the build side.
    pub fn k_element(&self, k: &KForm) -> GroupElement {
        let mut e = scaled(&self.x(k.x_stage, 0), k.a0).add(&scaled(&self.x(k.x_stage, 1), k.a1));
        if let Some((w, s)) = k.w {
            e = e.add(&scaled(&self.w(w), s));
        }
        e
    }

    /// `f_Θ(k)` on the companion side.
    pub fn k_companion(&self, k: &KForm) -> GroupElement {
        let mut e = scaled(&self.x(k.x_stage, 0), k.a0).add(&scaled(&self.x(k.x_stage, 1), k.a1));
        if let Some((w, s)) = k.w {
            e = e.add(&scaled(&self.v(w.sigma, w.n), s));
        }
        e
    }

    pub fn registry(&self) -> &WRegistry {
        &self.registry
    }

    /// `Θ_n^σ` actually used at each gadget stage.
    pub fn upsilon(&self) -> &BTreeMap<usize, Vec<Antichain>> {
        &self.upsilon
    }

    pub fn guesses(&self) -> &BTreeMap<usize, Homomorphism> {
        &self.guesses
    }

    pub fn chains(&self) -> &BTreeMap<usize, ZChain> {
        &self.chains
    }

    pub fn chain(&self, delta: usize) -> Result<&ZChain> {
        self.chains
            .get(&delta)
            .ok_or_else(|| Error::Construction(format!("no chain installed at stage {delta}")))
    }

    /// `f_ν : G⁰_{ν+1} → G¹_{ν+1}`.
    pub fn family_map(&self, nu: usize) -> &Homomorphism {
        &self.family[nu]
    }

    pub fn family(&self) -> &[Homomorphism] {
        &self.family
    }

    /// `G¹_δ` with cached coordinates, where chain obstructions live.
    pub fn companion_canonicalizer(&self, delta: usize) -> Canonicalizer {
        Canonicalizer::new(&self.stage_presentation(1, delta))
    }
}

/// Chooses `k_n` so that `m·h(k) ≠ m2·f(k) + y` in `G¹_δ`, trying the
/// cases in order: `y ≠ 0`, `m ≠ ±m2`, `m = m2`, `m = −m2`.
#[allow(clippy::too_many_arguments)]
pub fn select_k(
    build: &Build,
    h: &Homomorphism,
    g1: &Canonicalizer,
    x_stage: usize,
    witnesses: &[WName],
    m: &BigInt,
    m2: &BigInt,
    y: &GroupElement,
) -> Result<(KForm, KCase)> {
    let size = h.source().gen_count();
    let hk = |k: &KForm| h.apply(&build.k_element(k).resized(size));
    let serves = |k: &KForm| -> Result<bool> {
        let lhs = hk(k)?.scale(m);
        let rhs = build.k_companion(k).resized(size).scale(m2).add(y);
        Ok(!g1.equal(&lhs, &rhs))
    };
    let x = |a0, a1| KForm { x_stage, a0, a1, w: None };
    if !g1.is_zero(y) {
        for k in [x(1, 0), x(0, 1), x(1, -1)] {
            if serves(&k)? {
                return Ok((k, KCase::NonzeroY));
            }
        }
        return Err(Error::Construction("no x-combination avoids a nonzero y".into()));
    }
    if *m != *m2 && *m != -m2 {
        let k = x(1, 0);
        return if serves(&k)? {
            Ok((k, KCase::UnequalMultipliers))
        } else {
            Err(Error::Construction(format!("x[{x_stage},0] fails with multipliers {m}, {m2}")))
        };
    }
    let (case, sign) = if *m == *m2 {
        (KCase::EqualMultipliers, 1)
    } else {
        (KCase::OppositeMultipliers, -1)
    };
    if serves(&x(1, 0))? {
        return Ok((x(1, 0), case));
    }
    for &w in witnesses {
        let hw = h.apply(&build.w(w).resized(size))?;
        let fw = build.v(w.sigma, w.n).resized(size);
        if g1.equal(&fw, &scaled(&hw, sign)) {
            continue;
        }
        let k = KForm { w: Some((w, sign)), ..x(1, 0) };
        if serves(&k)? {
            return Ok((k, case));
        }
    }
    Err(Error::Construction(format!("no witness in the registry separates h from {}f", if sign > 0 { "" } else { "-" })))
}

/// `∃β`: the lowest `β < δ` whose minimal antichain supports, for both
/// signs `e` and every `n ≤ N`, a `w` in the exact cell `Θ_n` with
/// `h(w) ≠ e·f(w)`.
pub fn evaluate_ii2(build: &Build, delta: usize, h: &Homomorphism) -> Result<Option<(Node, Vec<Antichain>)>> {
    let n_len = build.options.chain_len;
    let g1 = build.companion_canonicalizer(delta);
    let size = build.stage_size(delta);
    for beta in 0..delta {
        let a = minimal_antichain(&build.tree, beta, delta)?;
        if a.is_empty() {
            continue;
        }
        let thetas = antichain_chain_cover(&a, n_len + 1)?;
        let mut ok = true;
        'outer: for e in [1i64, -1] {
            for theta in &thetas {
                let mut found = false;
                for w in build.registry.at(delta, theta) {
                    let hw = h.apply(&build.w(w).resized(size))?;
                    let fw = scaled(&build.v(w.sigma, w.n).resized(size), e);
                    if !g1.equal(&hw, &fw) {
                        found = true;
                        break;
                    }
                }
                if !found {
                    ok = false;
                    break 'outer;
                }
            }
        }
        if ok {
            return Ok(Some((beta, thetas)));
        }
    }
    Ok(None)
}

fn next_prime_above(floor: u64) -> u64 {
    (floor + 1..).find(|&p| crate::abgroup::is_prime(p)).expect("primes are unbounded")
}

/// Images of `z_0..z_N` under an extension of `g`, given `g(k_n)`: `z_n`
/// is fixed from `cut` upward and `z_n ↦ p_n·g(z_{n+1}) − g(k_n)` below.
fn z_images(primes: &[u64], gk: &[GroupElement], z_index: &[usize], cut: usize, total: usize) -> Vec<GroupElement> {
    let mut out: Vec<GroupElement> = z_index.iter().map(|&i| GroupElement::unit(total, i)).collect();
    for n in (0..cut.min(primes.len())).rev() {
        out[n] = out[n + 1].scale(&BigInt::from(primes[n])).sub(&gk[n].resized(total));
    }
    out
}

/// Runs the construction for `plan.len()` stages.
///
/// `t_index` must be numbered in the stage order (parents before children);
/// it is padded with isolated roots up to the number of stages.
pub fn build_truncated_pair(t_index: &Tree, plan: &[StageClass], script: &GuessScript, opts: BuildOptions) -> Result<Build> {
    if plan.first() != Some(&StageClass::Free) {
        return Err(Error::Construction("the plan must start with a free stage".into()));
    }
    if opts.gadget_len == 0 || opts.chain_len == 0 {
        return Err(Error::Construction("gadget and chain lengths must be positive".into()));
    }
    if !t_index.is_ordinal_numbered() {
        return Err(Error::InvalidTree("index tree is not numbered in stage order".into()));
    }
    if t_index.node_count() > plan.len() {
        return Err(Error::Construction(format!(
            "index tree has {} nodes but the plan has {} stages",
            t_index.node_count(),
            plan.len()
        )));
    }
    let stages_of = |c: StageClass| -> BTreeSet<usize> { (0..plan.len()).filter(|&i| plan[i] == c).collect() };
    if script.e0.keys().copied().collect::<BTreeSet<_>>() != stages_of(StageClass::E0) {
        return Err(Error::Construction("script gadget entries do not match the E0 stages".into()));
    }
    if script.e1.keys().copied().collect::<BTreeSet<_>>() != stages_of(StageClass::E1) {
        return Err(Error::Construction("script guesses do not match the E1 stages".into()));
    }
    let mut parents = t_index.parents().to_vec();
    parents.resize(plan.len(), None);
    let mut b = Build {
        plan: plan.to_vec(),
        options: opts,
        tree: build_tree(&parents)?,
        gens: Vec::new(),
        stage_start: vec![0],
        rels: [Vec::new(), Vec::new()],
        upsilon: BTreeMap::new(),
        registry: WRegistry::new(),
        guesses: BTreeMap::new(),
        chains: BTreeMap::new(),
        family: Vec::new(),
    };
    for alpha in 0..plan.len() {
        match plan[alpha] {
            StageClass::Free => {
                b.gens.push(GenName::X { stage: alpha, j: 0 });
                b.gens.push(GenName::X { stage: alpha, j: 1 });
            }
            StageClass::E0 => b.add_gadget(alpha, &script.e0[&alpha])?,
            StageClass::E1 => b.add_e1(alpha, &script.e1[&alpha])?,
        }
        b.stage_start.push(b.gens.len());
        let f = b.family_step(alpha)?;
        b.family.push(f);
    }
    Ok(b)
}

impl Build {
    fn push_relation(&mut self, side: usize, stage: usize, row: Vec<BigInt>) {
        self.rels[side].push((stage, row));
    }

    fn add_gadget(&mut self, sigma: usize, thetas: &[Vec<Node>]) -> Result<()> {
        let l = self.options.gadget_len;
        if thetas.len() < l {
            return Err(Error::Construction(format!(
                "stage {sigma} needs {l} antichains, the script gives {}",
                thetas.len()
            )));
        }
        let thetas = &thetas[..l];
        self.registry = update_w_registry(&self.registry, &self.tree, sigma, thetas)?;
        self.upsilon.insert(sigma, thetas.iter().map(|t| t.iter().copied().collect()).collect());
        for n in 0..=l {
            self.gens.push(GenName::U { stage: sigma, n });
        }
        for n in 0..l {
            self.gens.push(GenName::V { stage: sigma, n });
        }
        Ok(())
    }

    fn guess(&self, delta: usize, spec: &HSpec) -> Result<Homomorphism> {
        let p0 = self.stage_presentation(0, delta);
        let p1 = self.stage_presentation(1, delta);
        let m = p0.gen_count();
        match spec {
            HSpec::Family => {
                if delta == 0 {
                    return Err(Error::Construction("no family member below stage 0".into()));
                }
                Ok(self.family[delta - 1].clone())
            }
            HSpec::Identity { swap_x } => {
                let mut images: Vec<GroupElement> = (0..m).map(|i| GroupElement::unit(m, i)).collect();
                if *swap_x {
                    let s = delta
                        .checked_sub(1)
                        .filter(|&s| self.plan[s] == StageClass::Free)
                        .ok_or_else(|| Error::Construction(format!("stage {delta} does not follow a free stage")))?;
                    let a = self.stage_start[s];
                    images.swap(a, a + 1);
                }
                Homomorphism::from_images(&p0, &p1, &images)
            }
            HSpec::Matrix { rows } => {
                if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                    return Err(Error::DimensionMismatch(format!("guess at stage {delta} must be {m}x{m}")));
                }
                let images: Vec<GroupElement> = rows.iter().map(|r| GroupElement::from_i64(r)).collect();
                Homomorphism::from_images(&p0, &p1, &images)
            }
        }
    }

    fn add_e1(&mut self, delta: usize, spec: &HSpec) -> Result<()> {
        let h = self.guess(delta, spec)?;
        self.guesses.insert(delta, h.clone());
        if let Some((beta, thetas)) = evaluate_ii2(self, delta, &h)? {
            self.install_chain(delta, &h, beta, thetas)?;
        }
        Ok(())
    }
}

impl Build {
    fn install_chain(&mut self, delta: usize, h: &Homomorphism, beta: Node, thetas: Vec<Antichain>) -> Result<()> {
        let n_len = self.options.chain_len;
        let m = self.gens.len();
        let s = (0..delta)
            .rev()
            .find(|&a| self.plan[a] == StageClass::Free)
            .ok_or_else(|| Error::Construction(format!("no free stage below {delta}")))?;
        let g1 = self.companion_canonicalizer(delta);
        let mut enumerator = TripleEnumerator::new(m);
        let mut ks = Vec::with_capacity(n_len);
        let mut cases = Vec::with_capacity(n_len);
        let mut triples = Vec::with_capacity(n_len);
        let mut data = ChainData {
            primes: Vec::new(),
            hk: Vec::new(),
            k1: Vec::new(),
        };
        let mut k0 = Vec::with_capacity(n_len);
        for n in 0..n_len {
            let (k, case, triple, prime) = if n == 0 {
                let k = KForm { x_stage: s, a0: 1, a1: 0, w: None };
                (k, None, None, next_prime_above(self.options.prime_floor))
            } else {
                let t = enumerator.next_for(n);
                // partial sums of the discrepancy through position n − 1
                let mut partial = t.g.clone();
                let mut mm = BigInt::one();
                let mut mm2 = BigInt::from(t.d);
                for j in 0..n {
                    partial = partial.add(&data.hk[j].scale(&mm));
                    if j >= t.r {
                        partial = partial.sub(&data.k1[j].scale(&mm2));
                        mm2 *= data.primes[j];
                    }
                    mm *= data.primes[j];
                }
                let witnesses = self.registry.at(delta, &thetas[n]);
                let (k, case) = select_k(self, h, &g1, s, &witnesses, &mm, &mm2, &partial.neg())?;
                let hk = h.apply(&self.k_element(&k).resized(m))?;
                let dn = partial.add(&hk.scale(&mm)).sub(&self.k_companion(&k).resized(m).scale(&mm2));
                let floor = self.options.prime_floor.max(*data.primes.last().unwrap_or(&0));
                (k, Some(case), Some(t), select_prime(&dn, &g1, floor)?)
            };
            let e0 = self.k_element(&k).resized(m);
            data.hk.push(h.apply(&e0)?);
            data.k1.push(self.k_companion(&k).resized(m));
            data.primes.push(prime);
            k0.push(e0);
            ks.push(k);
            cases.push(case);
            triples.push(triple);
        }
        let total = m + n_len + 1;
        for n in 0..=n_len {
            self.gens.push(GenName::Z { stage: delta, n });
        }
        for side in 0..2 {
            for n in 0..n_len {
                let k = if side == 0 { &k0[n] } else { &data.k1[n] };
                let mut row = k.resized(total).neg().coeffs;
                row[m + n + 1] += BigInt::from(data.primes[n]);
                row[m + n] -= 1;
                self.push_relation(side, delta, row);
            }
        }
        self.chains.insert(
            delta,
            ZChain {
                stage: delta,
                beta,
                thetas,
                ks,
                cases,
                triples,
                k0,
                data,
            },
        );
        Ok(())
    }

    fn z_indices(&self, delta: usize) -> Vec<usize> {
        (0..=self.options.chain_len)
            .map(|n| self.index_of(GenName::Z { stage: delta, n }).expect("chain generator"))
            .collect()
    }

    /// `f_α` from `f_{parent}`: copy below `parent + 1`, then extend stage by
    /// stage (free: identity; gadget: largest meeting cut; chain: shortest
    /// correcting prefix).
    fn family_step(&self, alpha: usize) -> Result<Homomorphism> {
        let total = self.stage_start[alpha + 1];
        let p0 = self.stage_presentation(0, alpha + 1);
        let p1 = self.stage_presentation(1, alpha + 1);
        let g1 = Canonicalizer::new(&p1);
        let mut images: Vec<GroupElement> = (0..total).map(|i| GroupElement::unit(total, i)).collect();
        let parent = self.tree.parent(alpha);
        let tau = parent.map_or(0, |p| p + 1);
        if let Some(p) = parent {
            for (i, img) in images.iter_mut().enumerate().take(self.stage_start[tau]) {
                *img = self.family[p].image_of_generator(i).resized(total);
            }
        }
        for st in tau..=alpha {
            let start = self.stage_start[st];
            match self.plan[st] {
                StageClass::Free => {}
                StageClass::E0 => {
                    let l = self.options.gadget_len;
                    let below = |t: Node| t == alpha || self.tree.is_below(t, alpha);
                    let cut = self.upsilon[&st].iter().rposition(|th| th.iter().any(|&t| below(t)));
                    for (j, local) in gadget_iso(l, cut)?.into_iter().enumerate() {
                        let mut g = GroupElement::zero(total);
                        for (c, v) in local.coeffs.iter().enumerate() {
                            g.coeffs[start + c] = v.clone();
                        }
                        images[start + j] = g;
                    }
                }
                StageClass::E1 => {
                    let Some(chain) = self.chains.get(&st) else { continue };
                    let gk = self.apply_images(&images, &chain.k0, total);
                    let cut = (0..chain.len())
                        .rev()
                        .find(|&n| !g1.equal(&gk[n], &chain.data.k1[n].resized(total)))
                        .map_or(0, |n| n + 1);
                    let zi = self.z_indices(st);
                    for (n, img) in z_images(&chain.data.primes, &gk, &zi, cut, total).into_iter().enumerate() {
                        images[zi[n]] = img;
                    }
                }
            }
        }
        let f = Homomorphism::from_images(&p0, &p1, &images)?;
        if !f.is_isomorphism()? {
            return Err(Error::Construction(format!("f_{alpha} is not an isomorphism")));
        }
        Ok(f)
    }

    fn apply_images(&self, images: &[GroupElement], xs: &[GroupElement], total: usize) -> Vec<GroupElement> {
        xs.iter()
            .map(|x| {
                x.coeffs.iter().enumerate().fold(GroupElement::zero(total), |acc, (i, c)| {
                    if c.is_zero() {
                        acc
                    } else {
                        acc.add(&images[i].scale(c))
                    }
                })
            })
            .collect()
    }
}

/// Extends `g : G⁰_δ → G¹_δ` over the chain at `δ`, fixing `z_n` for
/// `n ≥ n_prime` and recursing downward below it.
pub fn extend_over_zchain(build: &Build, g: &Homomorphism, delta: usize, n_prime: usize) -> Result<Homomorphism> {
    let chain = build.chain(delta)?;
    let m = build.stage_size(delta);
    if g.source().gen_count() != m || g.target().gen_count() != m {
        return Err(Error::DimensionMismatch(format!("g must act on stage {delta} ({m} generators)")));
    }
    if n_prime > chain.len() {
        return Err(Error::Construction(format!("N′ = {n_prime} exceeds chain length {}", chain.len())));
    }
    let total = build.stage_size(delta + 1);
    let g1 = build.companion_canonicalizer(delta);
    let mut gk = Vec::with_capacity(chain.len());
    for (n, k) in chain.k0.iter().enumerate() {
        let img = g.apply(k)?;
        if n >= n_prime && !g1.equal(&img, &chain.data.k1[n]) {
            return Err(Error::Construction(format!("g(k_{n}) ≠ f(k_{n}) at n = {n} ≥ N′ = {n_prime}")));
        }
        gk.push(img);
    }
    let mut images: Vec<GroupElement> = g.images().iter().map(|x| x.resized(total)).collect();
    images.extend(z_images(&chain.data.primes, &gk, &build.z_indices(delta), n_prime, total));
    Homomorphism::from_images(&build.stage_presentation(0, delta + 1), &build.stage_presentation(1, delta + 1), &images)
}

/// Does the guess at `δ` extend to `G⁰_{δ+1}` with `z_0 ↦ d·z_r + g`?
/// Solved exactly, one division by `p_n` at a time.
pub fn extension_exists(build: &Build, delta: usize, t: &Triple) -> Result<bool> {
    let chain = build.chain(delta)?;
    if t.r > chain.len() {
        return Err(Error::Construction(format!("r = {} outside the chain", t.r)));
    }
    let total = build.stage_size(delta + 1);
    let p1 = build.stage_presentation(1, delta + 1);
    let zi = build.z_indices(delta);
    let mut cur = t.g.resized(total).add(&GroupElement::unit(total, zi[t.r]).scale(&BigInt::from(t.d)));
    for n in 0..chain.len() {
        let target = cur.add(&chain.data.hk[n].resized(total));
        let p = BigInt::from(chain.data.primes[n]);
        let multiples: Vec<GroupElement> = (0..total).map(|i| GroupElement::unit(total, i).scale(&p)).collect();
        let lattice = Subgroup::from_elements(&p1, &multiples)?;
        match lattice.express(&target)? {
            Some(c) => cur = GroupElement::new(c),
            None => return Ok(false),
        }
    }
    Ok(true)
}

impl Build {
    /// Congruence test for a triple against the installed chain at `δ`.
    pub fn obstruction(&self, delta: usize, t: &Triple) -> Result<bool> {
        super::zchain::extension_obstruction(&self.chain(delta)?.data, &self.companion_canonicalizer(delta), t)
    }

    /// Non-E stages below `δ`, increasing.
    pub fn canonical_ladder(&self, delta: usize) -> Ladder {
        Ladder {
            target: delta,
            steps: (0..delta).filter(|&a| !self.is_e1(a)).collect(),
        }
    }

    /// Every ladder on `δ` through the chain's support: subsets of the
    /// non-E1 stages below `δ` that contain `δ − 1` and every stage of
    /// `ladder_support(δ)`. Empty when `δ − 1` is an E1 stage.
    pub fn valid_ladders(&self, delta: usize) -> Vec<Ladder> {
        if delta == 0 || self.is_e1(delta - 1) {
            return Vec::new();
        }
        let support = self.ladder_support(delta);
        if support.iter().any(|&a| a >= delta || self.is_e1(a)) {
            return Vec::new();
        }
        let free: Vec<usize> = (0..delta - 1).filter(|&a| !self.is_e1(a) && !support.contains(&a)).collect();
        (0u64..1 << free.len())
            .map(|mask| {
                let mut steps: Vec<usize> = (0..free.len()).filter(|&i| mask >> i & 1 == 1).map(|i| free[i]).collect();
                steps.extend(support.iter().copied().filter(|&a| a + 1 < delta));
                steps.push(delta - 1);
                steps.sort_unstable();
                steps.dedup();
                Ladder { target: delta, steps }
            })
            .collect()
    }
}

/// Outcome of the family and registry checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyCheck {
    pub registry_monotone: bool,
    pub registry_w_forms: bool,
    pub x_fixed: bool,
    pub w_to_v: bool,
    pub coherent: bool,
}

impl FamilyCheck {
    pub fn all(&self) -> bool {
        self.registry_monotone && self.registry_w_forms && self.x_fixed && self.w_to_v && self.coherent
    }
}

/// Registry monotone, members are gadget `w`'s, `f_ν` fixes `x`'s and
/// sends registered `w` to `v` when its cell meets the branch below `ν`,
/// and `f_μ ⊆ f_ν` for `μ <_T ν`.
pub fn check_family(build: &Build) -> Result<FamilyCheck> {
    let s = build.stage_count();
    let registry_w_forms = build.registry.entries().iter().all(|(_, w)| {
        build.plan.get(w.sigma) == Some(&StageClass::E0) && w.n < build.options.gadget_len
    });
    let mut x_fixed = true;
    let mut w_to_v = true;
    let mut coherent = true;
    for nu in 0..s {
        let f = &build.family[nu];
        let size = build.stage_size(nu + 1);
        let g1 = Canonicalizer::new(f.target());
        for (i, name) in build.gens[..size].iter().enumerate() {
            if let GenName::X { .. } = name {
                x_fixed &= g1.equal(&f.image_of_generator(i), &GroupElement::unit(size, i));
            }
        }
        let meets = |theta: &Antichain| theta.iter().any(|&t| t == nu || build.tree.is_below(t, nu));
        for (theta, w) in build.registry.entries() {
            if w.sigma <= nu && meets(&theta) {
                let img = f.apply(&build.w(w).resized(size))?;
                w_to_v &= g1.equal(&img, &build.v(w.sigma, w.n).resized(size));
            }
        }
        for mu in 0..nu {
            if !build.tree.is_below(mu, nu) {
                continue;
            }
            let fm = &build.family[mu];
            for i in 0..build.stage_size(mu + 1) {
                coherent &= g1.equal(&f.image_of_generator(i), &fm.image_of_generator(i).resized(size));
            }
        }
    }
    Ok(FamilyCheck {
        registry_monotone: build.registry.is_monotone(s),
        registry_w_forms,
        x_fixed,
        w_to_v,
        coherent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan5() -> Vec<StageClass> {
        use StageClass::*;
        vec![Free, E0, Free, E1, Free]
    }

    fn script(h: HSpec) -> GuessScript {
        GuessScript {
            e0: BTreeMap::from([(1, vec![vec![0], vec![0]])]),
            e1: BTreeMap::from([(3, h)]),
        }
    }

    #[test]
    fn free_plan_gives_identities() {
        let b = build_truncated_pair(&Tree::chain(3), &[StageClass::Free; 3], &GuessScript::default(), BuildOptions::default())
            .unwrap();
        assert_eq!(b.gen_count(), 6);
        assert!(b.presentation(0).is_free() && b.presentation(1).is_free());
        for f in b.family() {
            let n = f.source().gen_count();
            assert!((0..n).all(|i| f.image_of_generator(i) == GroupElement::unit(n, i)));
        }
        assert!(check_family(&b).unwrap().all());
    }

    #[test]
    fn coherent_guess_installs_nothing() {
        let b = build_truncated_pair(&Tree::chain(5), &plan5(), &script(HSpec::Family), BuildOptions::default()).unwrap();
        assert!(b.chains().is_empty());
        assert_eq!(b.block(3).len(), 0);
        assert!(check_family(&b).unwrap().all());
    }

    #[test]
    fn identity_guess_installs_a_blocking_chain() {
        let opts = BuildOptions::default();
        let b = build_truncated_pair(&Tree::chain(5), &plan5(), &script(HSpec::Identity { swap_x: false }), opts).unwrap();
        let chain = b.chain(3).unwrap();
        assert_eq!(chain.len(), opts.chain_len);
        assert!(chain.primes().iter().all(|&p| p > opts.prime_floor));
        assert!(chain.primes().windows(2).all(|w| w[0] <= w[1]));
        assert!(b.presentation(0).is_free() && b.presentation(1).is_free());
        assert!(check_family(&b).unwrap().all());
        let m = b.stage_size(3);
        for r in 0..opts.chain_len {
            for d in [-2i64, -1, 1, 2] {
                for i in 0..m {
                    let t = Triple { r, d, g: GroupElement::unit(m, i) };
                    let blocked = b.obstruction(3, &t).unwrap();
                    if blocked {
                        assert!(!extension_exists(&b, 3, &t).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn select_k_cases() {
        let b = build_truncated_pair(&Tree::chain(5), &plan5(), &script(HSpec::Family), BuildOptions::default()).unwrap();
        let p = b.stage_presentation(0, 3);
        let id = Homomorphism::from_images(&p, &b.stage_presentation(1, 3), &(0..p.gen_count()).map(|i| p.generator(i)).collect::<Vec<_>>()).unwrap();
        let g1 = b.companion_canonicalizer(3);
        let m = p.gen_count();
        let one = BigInt::one();
        let (k, c) = select_k(&b, &id, &g1, 2, &[], &one, &BigInt::from(2), &GroupElement::zero(m)).unwrap();
        assert_eq!((k.a0, k.a1, k.w, c), (1, 0, None, KCase::UnequalMultipliers));
        // h = id, f(w) = v ≠ w = h(w): x alone fails for m = m′, x + w serves
        let ws = b.registry().at(3, &BTreeSet::from([0]));
        let (k, c) = select_k(&b, &id, &g1, 2, &ws, &one, &one, &GroupElement::zero(m)).unwrap();
        assert_eq!(c, KCase::EqualMultipliers);
        assert_eq!(k.w, Some((ws[0], 1)));
        assert!(select_k(&b, &id, &g1, 2, &[], &one, &one, &GroupElement::zero(m)).is_err());
        let y = GroupElement::unit(m, 0);
        assert_eq!(select_k(&b, &id, &g1, 2, &[], &one, &one, &y).unwrap().1, KCase::NonzeroY);
    }

    #[test]
    fn extension_over_chain() {
        let b = build_truncated_pair(&Tree::chain(5), &plan5(), &script(HSpec::Identity { swap_x: false }), BuildOptions::default())
            .unwrap();
        let chain = b.chain(3).unwrap();
        let g = b.guesses()[&3].clone();
        let n = chain.len();
        let ext = extend_over_zchain(&b, &g, 3, n).unwrap();
        assert!(ext.source().gen_count() == b.stage_size(4));
        let mismatches: Vec<usize> = (0..n).filter(|&i| chain.data.hk[i] != chain.data.k1[i]).collect();
        if let Some(&last) = mismatches.last() {
            assert!(extend_over_zchain(&b, &g, 3, last).is_err());
            let e = extend_over_zchain(&b, &g, 3, last + 1).unwrap();
            let zi = b.z_indices(3);
            assert_eq!(e.image_of_generator(zi[n]), GroupElement::unit(b.stage_size(4), zi[n]));
        }
    }

    #[test]
    fn script_mismatch_and_ladders() {
        let bad = GuessScript::default();
        assert!(build_truncated_pair(&Tree::chain(5), &plan5(), &bad, BuildOptions::default()).is_err());
        let b = build_truncated_pair(&Tree::chain(5), &plan5(), &script(HSpec::Family), BuildOptions::default()).unwrap();
        assert_eq!(b.canonical_ladder(3).steps, vec![0, 1, 2]);
        assert_eq!(b.valid_ladders(3).len(), 4);
        assert_eq!(b.valid_ladders(2).len(), 2);
        assert!(b.valid_ladders(4).is_empty());
        for l in b.valid_ladders(3) {
            l.validate(|a| b.is_e1(a)).unwrap();
        }
    }
}
