//! The game EF(A,B;T): ∀ climbs the tree and picks an element on either
//! side, ∃ answers on the other side, and ∃ wins a finished play when the
//! accumulated correspondence is a partial isomorphism.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::abgroup::{Canonicalizer, GroupElement, Presentation, Subgroup};
use crate::error::{Error, Result};
use crate::trees::{Node, Tree};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Player {
    Forall,
    Exists,
}

/// One round: ∀ picked `element` on `side` at `node`, ∃ answered `reply`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    pub node: Node,
    pub side: Side,
    pub element: GroupElement,
    pub reply: GroupElement,
}

impl Move {
    /// `(left element, right element)`.
    pub fn pair(&self) -> (GroupElement, GroupElement) {
        match self.side {
            Side::Left => (self.element.clone(), self.reply.clone()),
            Side::Right => (self.reply.clone(), self.element.clone()),
        }
    }
}

pub type Pairs = Vec<(GroupElement, GroupElement)>;

/// Decides whether a finite correspondence is a partial isomorphism.
pub trait PartialIsoOracle {
    fn check(&self, pairs: &[(GroupElement, GroupElement)]) -> Result<bool>;

    /// Failure persists under extension, so failed prefixes may be pruned.
    fn hereditary(&self) -> bool {
        true
    }
}

/// Relation-lattice equality, cached per canonical pair set.
pub struct AbelianOracle {
    a: Presentation,
    b: Presentation,
    ca: Canonicalizer,
    cb: Canonicalizer,
    cache: RefCell<HashMap<Pairs, bool>>,
}

impl AbelianOracle {
    pub fn new(a: &Presentation, b: &Presentation) -> Self {
        AbelianOracle {
            a: a.clone(),
            b: b.clone(),
            ca: Canonicalizer::new(a),
            cb: Canonicalizer::new(b),
            cache: RefCell::new(HashMap::new()),
        }
    }

    fn key(&self, pairs: &[(GroupElement, GroupElement)]) -> Pairs {
        let mut k: Pairs = pairs
            .iter()
            .map(|(x, y)| (self.ca.canonical(x), self.cb.canonical(y)))
            .collect();
        k.sort();
        k.dedup();
        k
    }
}

impl PartialIsoOracle for AbelianOracle {
    fn check(&self, pairs: &[(GroupElement, GroupElement)]) -> Result<bool> {
        let key = self.key(pairs);
        if let Some(&v) = self.cache.borrow().get(&key) {
            return Ok(v);
        }
        let (xs, ys): (Vec<_>, Vec<_>) = key.iter().cloned().unzip();
        let v = crate::abgroup::is_partial_iso(&self.a, &self.b, &xs, &ys)?;
        self.cache.borrow_mut().insert(key, v);
        Ok(v)
    }
}

/// Two structures, a clock tree, and the elements ∀ may pick from.
#[derive(Clone, Debug)]
pub struct GameSpec {
    pub left: Presentation,
    pub right: Presentation,
    pub tree: Tree,
    pub carrier_left: Vec<GroupElement>,
    pub carrier_right: Vec<GroupElement>,
    /// Carriers are finite balls in infinite groups, not whole groups.
    pub ball_restricted: bool,
}

fn canonical_carrier(g: &Presentation, elems: &[GroupElement]) -> Result<Vec<GroupElement>> {
    let c = Canonicalizer::new(g);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for e in elems {
        g.check_element(e)?;
        let k = c.canonical(e);
        if seen.insert(k.clone()) {
            out.push(k);
        }
    }
    Ok(out)
}

impl GameSpec {
    /// Whole finite groups as carriers.
    pub fn finite(left: &Presentation, right: &Presentation, tree: &Tree, max_order: usize) -> Result<Self> {
        Ok(GameSpec {
            carrier_left: left.elements(max_order)?,
            carrier_right: right.elements(max_order)?,
            left: left.clone(),
            right: right.clone(),
            tree: tree.clone(),
            ball_restricted: false,
        })
    }

    /// Play restricted to declared finite sets of elements.
    pub fn on_balls(
        left: &Presentation,
        right: &Presentation,
        tree: &Tree,
        ball_left: &[GroupElement],
        ball_right: &[GroupElement],
    ) -> Result<Self> {
        Ok(GameSpec {
            carrier_left: canonical_carrier(left, ball_left)?,
            carrier_right: canonical_carrier(right, ball_right)?,
            left: left.clone(),
            right: right.clone(),
            tree: tree.clone(),
            ball_restricted: true,
        })
    }

    pub fn structure(&self, side: Side) -> &Presentation {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn carrier(&self, side: Side) -> &[GroupElement] {
        match side {
            Side::Left => &self.carrier_left,
            Side::Right => &self.carrier_right,
        }
    }

    /// Nodes ∀ may move to after `node` (any node before the first move).
    pub fn successors(&self, node: Option<Node>) -> Vec<Node> {
        self.tree.successors(node)
    }

    /// Is `(node, side, element)` a legal ∀ move after `history`?
    pub fn check_forall_move(&self, history: &[Move], node: Node, side: Side, element: &GroupElement) -> Result<()> {
        let prev = history.last().map(|m| m.node);
        if node >= self.tree.node_count() {
            return Err(Error::IllegalMove(format!("node {node} is not in the tree")));
        }
        if !self.successors(prev).contains(&node) {
            return Err(Error::IllegalMove(match prev {
                Some(p) => format!("node {node} is not strictly above the previous node {p}"),
                None => format!("node {node} is not available"),
            }));
        }
        let g = self.structure(side);
        g.check_element(element)
            .map_err(|e| Error::IllegalMove(format!("element {element}: {e}")))?;
        if self.ball_restricted {
            let c = Canonicalizer::new(g).canonical(element);
            if !self.carrier(side).contains(&c) {
                return Err(Error::IllegalMove(format!("element {element} lies outside the declared ball")));
            }
        }
        Ok(())
    }
}

pub fn pairs_of(history: &[Move]) -> Pairs {
    history.iter().map(Move::pair).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolveOptions {
    pub max_states: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { max_states: 2_000_000 }
    }
}

type IdxPairs = Vec<(u32, u32)>;

fn with_pair(pairs: &IdxPairs, p: (u32, u32)) -> IdxPairs {
    let mut v = pairs.clone();
    if let Err(i) = v.binary_search(&p) {
        v.insert(i, p);
    }
    v
}

/// Backward induction over `(node, set of index pairs)`.
struct Solver<'a> {
    spec: &'a GameSpec,
    oracle: &'a dyn PartialIsoOracle,
    succ: HashMap<Option<Node>, Vec<Node>>,
    memo: HashMap<(Option<Node>, IdxPairs), bool>,
    iso: HashMap<IdxPairs, bool>,
    max_states: usize,
}

impl<'a> Solver<'a> {
    fn new(spec: &'a GameSpec, oracle: &'a dyn PartialIsoOracle, max_states: usize) -> Self {
        let mut succ = HashMap::new();
        succ.insert(None, spec.successors(None));
        for v in 0..spec.tree.node_count() {
            succ.insert(Some(v), spec.successors(Some(v)));
        }
        Solver {
            spec,
            oracle,
            succ,
            memo: HashMap::new(),
            iso: HashMap::new(),
            max_states,
        }
    }

    fn elements(&self, pairs: &IdxPairs) -> Pairs {
        pairs
            .iter()
            .map(|&(x, y)| {
                (
                    self.spec.carrier_left[x as usize].clone(),
                    self.spec.carrier_right[y as usize].clone(),
                )
            })
            .collect()
    }

    fn is_iso(&mut self, pairs: &IdxPairs) -> Result<bool> {
        if let Some(&v) = self.iso.get(pairs) {
            return Ok(v);
        }
        let v = self.oracle.check(&self.elements(pairs))?;
        self.iso.insert(pairs.clone(), v);
        Ok(v)
    }

    fn pair(side: Side, x: usize, y: usize) -> (u32, u32) {
        match side {
            Side::Left => (x as u32, y as u32),
            Side::Right => (y as u32, x as u32),
        }
    }

    /// Does ∃ win from here?
    fn value(&mut self, node: Option<Node>, pairs: &IdxPairs) -> Result<bool> {
        let key = (node, pairs.clone());
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        let v = self.compute(node, pairs)?;
        self.memo.insert(key, v);
        if self.memo.len() > self.max_states {
            return Err(Error::BudgetExceeded(self.max_states));
        }
        Ok(v)
    }

    fn compute(&mut self, node: Option<Node>, pairs: &IdxPairs) -> Result<bool> {
        if self.oracle.hereditary() && !self.is_iso(pairs)? {
            return Ok(false);
        }
        let succ = self.succ[&node].clone();
        if succ.is_empty() {
            return self.is_iso(pairs);
        }
        for t in succ {
            for side in [Side::Left, Side::Right] {
                for x in 0..self.spec.carrier(side).len() {
                    if self.best_reply(t, pairs, side, x)?.is_none() {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    fn best_reply(&mut self, t: Node, pairs: &IdxPairs, side: Side, x: usize) -> Result<Option<usize>> {
        for y in 0..self.spec.carrier(side.other()).len() {
            let next = with_pair(pairs, Self::pair(side, x, y));
            if self.value(Some(t), &next)? {
                return Ok(Some(y));
            }
        }
        Ok(None)
    }

    fn extract_exists(&mut self) -> Result<TableStrategy> {
        let mut table = BTreeMap::new();
        let mut seen = HashSet::new();
        let mut stack = vec![(None, IdxPairs::new())];
        while let Some((node, pairs)) = stack.pop() {
            if !seen.insert((node, pairs.clone())) {
                continue;
            }
            for t in self.succ[&node].clone() {
                for side in [Side::Left, Side::Right] {
                    for x in 0..self.spec.carrier(side).len() {
                        let y = self
                            .best_reply(t, &pairs, side, x)?
                            .ok_or_else(|| Error::Strategy("∃ position lost during extraction".into()))?;
                        table.insert((pairs.clone(), t, side, x as u32), y as u32);
                        stack.push((Some(t), with_pair(&pairs, Self::pair(side, x, y))));
                    }
                }
            }
        }
        Ok(TableStrategy::new(self.spec, table))
    }

    fn extract_forall(&mut self) -> Result<ForallStrategy> {
        let mut table = BTreeMap::new();
        let mut seen = HashSet::new();
        let mut stack = vec![(None, IdxPairs::new())];
        while let Some((node, pairs)) = stack.pop() {
            if !seen.insert((node, pairs.clone())) {
                continue;
            }
            if self.oracle.hereditary() && !self.is_iso(&pairs)? {
                continue;
            }
            let succ = self.succ[&node].clone();
            let mut chosen = None;
            'search: for t in succ {
                for side in [Side::Left, Side::Right] {
                    for x in 0..self.spec.carrier(side).len() {
                        if self.best_reply(t, &pairs, side, x)?.is_none() {
                            chosen = Some((t, side, x));
                            break 'search;
                        }
                    }
                }
            }
            let Some((t, side, x)) = chosen else { continue };
            table.insert((node, pairs.clone()), (t, side, x as u32));
            for y in 0..self.spec.carrier(side.other()).len() {
                stack.push((Some(t), with_pair(&pairs, Self::pair(side, x, y))));
            }
        }
        Ok(ForallStrategy::new(self.spec, table))
    }
}

#[derive(Clone, Debug)]
pub enum WinningStrategy {
    Exists(TableStrategy),
    Forall(ForallStrategy),
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub winner: Player,
    pub strategy: WinningStrategy,
    pub states_explored: usize,
}

pub fn solve_game(spec: &GameSpec, opts: SolveOptions) -> Result<SolveResult> {
    let oracle = AbelianOracle::new(&spec.left, &spec.right);
    solve_game_with(spec, &oracle, opts)
}

pub fn solve_game_with(spec: &GameSpec, oracle: &dyn PartialIsoOracle, opts: SolveOptions) -> Result<SolveResult> {
    let mut s = Solver::new(spec, oracle, opts.max_states);
    let exists_wins = s.value(None, &IdxPairs::new())?;
    let states_explored = s.memo.len();
    let (winner, strategy) = if exists_wins {
        (Player::Exists, WinningStrategy::Exists(s.extract_exists()?))
    } else {
        (Player::Forall, WinningStrategy::Forall(s.extract_forall()?))
    };
    Ok(SolveResult {
        winner,
        strategy,
        states_explored,
    })
}

/// Does ∃ win EF(A,B;T) with whole finite groups as carriers?
pub fn t_equivalent(a: &Presentation, b: &Presentation, tree: &Tree) -> Result<bool> {
    let spec = GameSpec::finite(a, b, tree, 4096)?;
    Ok(solve_game(&spec, SolveOptions::default())?.winner == Player::Exists)
}

/// Plain minimax over move sequences: no transposition table, no pruning.
/// Fails once more than `budget` positions have been visited.
pub fn minimax_winner(spec: &GameSpec, oracle: &dyn PartialIsoOracle, budget: usize) -> Result<Player> {
    fn go(
        spec: &GameSpec,
        oracle: &dyn PartialIsoOracle,
        node: Option<Node>,
        pairs: &mut Pairs,
        count: &mut usize,
        budget: usize,
    ) -> Result<bool> {
        *count += 1;
        if *count > budget {
            return Err(Error::BudgetExceeded(budget));
        }
        let succ = spec.successors(node);
        if succ.is_empty() {
            return oracle.check(pairs);
        }
        for t in succ {
            for side in [Side::Left, Side::Right] {
                for x in spec.carrier(side) {
                    let mut answered = false;
                    for y in spec.carrier(side.other()) {
                        let p = match side {
                            Side::Left => (x.clone(), y.clone()),
                            Side::Right => (y.clone(), x.clone()),
                        };
                        pairs.push(p);
                        let v = go(spec, oracle, Some(t), pairs, count, budget);
                        pairs.pop();
                        if v? {
                            answered = true;
                            break;
                        }
                    }
                    if !answered {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }
    let mut count = 0;
    let v = go(spec, oracle, None, &mut Vec::new(), &mut count, budget)?;
    Ok(if v { Player::Exists } else { Player::Forall })
}

/// ∃'s side of the game: an answer to each ∀ move.
pub trait ExistsStrategy {
    fn reply(&self, history: &[Move], node: Node, side: Side, element: &GroupElement) -> Result<GroupElement>;

    /// Whatever besides the current node and the set of played pairs the
    /// strategy's future answers depend on. `None` means the whole history.
    fn state_key(&self, _history: &[Move]) -> Option<Vec<usize>> {
        None
    }
}

type ExistsKey = (IdxPairs, Node, Side, u32);

#[derive(Clone, Debug)]
struct Indexer {
    canon: [Canonicalizer; 2],
    carriers: [Vec<GroupElement>; 2],
    index: [HashMap<GroupElement, u32>; 2],
}

impl Indexer {
    fn new(spec: &GameSpec) -> Self {
        let idx = |c: &[GroupElement]| c.iter().enumerate().map(|(i, e)| (e.clone(), i as u32)).collect();
        Indexer {
            canon: [Canonicalizer::new(&spec.left), Canonicalizer::new(&spec.right)],
            carriers: [spec.carrier_left.clone(), spec.carrier_right.clone()],
            index: [idx(&spec.carrier_left), idx(&spec.carrier_right)],
        }
    }

    fn slot(side: Side) -> usize {
        match side {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    fn lookup(&self, side: Side, x: &GroupElement) -> Result<u32> {
        let s = Self::slot(side);
        self.index[s]
            .get(&self.canon[s].canonical(x))
            .copied()
            .ok_or_else(|| Error::Strategy(format!("element {x} is outside the carrier")))
    }

    fn element(&self, side: Side, i: u32) -> GroupElement {
        self.carriers[Self::slot(side)][i as usize].clone()
    }

    fn idx_pairs(&self, history: &[Move]) -> Result<IdxPairs> {
        let mut v = Vec::new();
        for m in history {
            let (a, b) = m.pair();
            v.push((self.lookup(Side::Left, &a)?, self.lookup(Side::Right, &b)?));
        }
        v.sort();
        v.dedup();
        Ok(v)
    }
}

/// Positional ∃ strategy extracted by the solver.
#[derive(Clone, Debug)]
pub struct TableStrategy {
    indexer: Indexer,
    table: BTreeMap<ExistsKey, u32>,
}

impl TableStrategy {
    fn new(spec: &GameSpec, table: BTreeMap<ExistsKey, u32>) -> Self {
        TableStrategy {
            indexer: Indexer::new(spec),
            table,
        }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl ExistsStrategy for TableStrategy {
    fn reply(&self, history: &[Move], node: Node, side: Side, element: &GroupElement) -> Result<GroupElement> {
        let key = (
            self.indexer.idx_pairs(history)?,
            node,
            side,
            self.indexer.lookup(side, element)?,
        );
        let y = self
            .table
            .get(&key)
            .ok_or_else(|| Error::Strategy("position not covered by the strategy table".into()))?;
        Ok(self.indexer.element(side.other(), *y))
    }

    fn state_key(&self, _history: &[Move]) -> Option<Vec<usize>> {
        Some(Vec::new())
    }
}

/// Positional ∀ strategy extracted by the solver.
#[derive(Clone, Debug)]
pub struct ForallStrategy {
    indexer: Indexer,
    table: BTreeMap<(Option<Node>, IdxPairs), (Node, Side, u32)>,
}

impl ForallStrategy {
    fn new(spec: &GameSpec, table: BTreeMap<(Option<Node>, IdxPairs), (Node, Side, u32)>) -> Self {
        ForallStrategy {
            indexer: Indexer::new(spec),
            table,
        }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// ∀'s next move, or `None` when the position is already decided.
    pub fn choose(&self, history: &[Move]) -> Result<Option<(Node, Side, GroupElement)>> {
        let key = (history.last().map(|m| m.node), self.indexer.idx_pairs(history)?);
        Ok(self
            .table
            .get(&key)
            .map(|&(t, side, x)| (t, side, self.indexer.element(side, x))))
    }
}

/// Answers through a fixed isomorphism `left → right`.
pub struct IsoStrategy {
    map: crate::abgroup::Homomorphism,
}

impl IsoStrategy {
    pub fn new(map: crate::abgroup::Homomorphism) -> Result<Self> {
        if !map.is_isomorphism()? {
            return Err(Error::Strategy("map is not an isomorphism".into()));
        }
        Ok(IsoStrategy { map })
    }

    pub fn identity(g: &Presentation) -> Self {
        let gens: Vec<GroupElement> = (0..g.gen_count()).map(|i| g.generator(i)).collect();
        IsoStrategy {
            map: crate::abgroup::Homomorphism::from_images(g, g, &gens).expect("identity"),
        }
    }
}

impl ExistsStrategy for IsoStrategy {
    fn reply(&self, _history: &[Move], _node: Node, side: Side, element: &GroupElement) -> Result<GroupElement> {
        match side {
            Side::Left => self.map.apply(element),
            Side::Right => self
                .map
                .preimage(element)?
                .ok_or_else(|| Error::Strategy(format!("{element} has no preimage"))),
        }
    }

    fn state_key(&self, _history: &[Move]) -> Option<Vec<usize>> {
        Some(Vec::new())
    }
}

/// Always answers zero.
pub struct ZeroStrategy {
    pub left_gens: usize,
    pub right_gens: usize,
}

impl ExistsStrategy for ZeroStrategy {
    fn reply(&self, _history: &[Move], _node: Node, side: Side, _element: &GroupElement) -> Result<GroupElement> {
        Ok(GroupElement::zero(match side {
            Side::Left => self.right_gens,
            Side::Right => self.left_gens,
        }))
    }

    fn state_key(&self, _history: &[Move]) -> Option<Vec<usize>> {
        Some(Vec::new())
    }
}

struct Verifier<'a> {
    spec: &'a GameSpec,
    oracle: AbelianOracle,
    memo: HashMap<(Option<Node>, Pairs, Vec<usize>), bool>,
    count: usize,
    budget: usize,
}

impl<'a> Verifier<'a> {
    fn new(spec: &'a GameSpec, budget: usize) -> Self {
        Verifier {
            spec,
            oracle: AbelianOracle::new(&spec.left, &spec.right),
            memo: HashMap::new(),
            count: 0,
            budget,
        }
    }

    fn tick(&mut self) -> Result<()> {
        self.count += 1;
        if self.count > self.budget {
            return Err(Error::BudgetExceeded(self.budget));
        }
        Ok(())
    }

    fn exists_wins(&mut self, s: &dyn ExistsStrategy, history: &mut Vec<Move>) -> Result<bool> {
        self.tick()?;
        let node = history.last().map(|m| m.node);
        let pairs = self.oracle.key(&pairs_of(history));
        let key = s.state_key(history).map(|k| (node, pairs.clone(), k));
        if let Some(k) = &key {
            if let Some(&v) = self.memo.get(k) {
                return Ok(v);
            }
        }
        let v = self.exists_wins_at(s, node, &pairs, history)?;
        if let Some(k) = key {
            self.memo.insert(k, v);
        }
        Ok(v)
    }

    fn exists_wins_at(
        &mut self,
        s: &dyn ExistsStrategy,
        node: Option<Node>,
        pairs: &Pairs,
        history: &mut Vec<Move>,
    ) -> Result<bool> {
        if !self.oracle.check(pairs)? {
            return Ok(false);
        }
        let spec = self.spec;
        for t in spec.successors(node) {
            for side in [Side::Left, Side::Right] {
                for x in spec.carrier(side) {
                    let y = match s.reply(history, t, side, x) {
                        Ok(y) => y,
                        Err(Error::Strategy(_)) => return Ok(false),
                        Err(e) => return Err(e),
                    };
                    if spec.structure(side.other()).check_element(&y).is_err() {
                        return Ok(false);
                    }
                    history.push(Move {
                        node: t,
                        side,
                        element: x.clone(),
                        reply: y,
                    });
                    let v = self.exists_wins(s, history);
                    history.pop();
                    if !v? {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    fn forall_wins(&mut self, s: &ForallStrategy, history: &mut Vec<Move>) -> Result<bool> {
        self.tick()?;
        let node = history.last().map(|m| m.node);
        let pairs = self.oracle.key(&pairs_of(history));
        let key = (node, pairs.clone(), Vec::new());
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        let v = if !self.oracle.check(&pairs)? {
            true
        } else {
            match s.choose(history)? {
                None => false,
                Some((t, side, x)) => {
                    let mut all = true;
                    for y in self.spec.carrier(side.other()) {
                        history.push(Move {
                            node: t,
                            side,
                            element: x.clone(),
                            reply: y.clone(),
                        });
                        let v = self.forall_wins(s, history);
                        history.pop();
                        if !v? {
                            all = false;
                            break;
                        }
                    }
                    all
                }
            }
        };
        self.memo.insert(key, v);
        Ok(v)
    }
}

/// Does `s` win against every ∀ play over the carriers?
pub fn verify_strategy(spec: &GameSpec, s: &dyn ExistsStrategy, max_states: usize) -> Result<bool> {
    Verifier::new(spec, max_states).exists_wins(s, &mut Vec::new())
}

/// Does `s` beat every ∃ answer drawn from the carriers?
pub fn verify_forall_strategy(spec: &GameSpec, s: &ForallStrategy, max_states: usize) -> Result<bool> {
    Verifier::new(spec, max_states).forall_wins(s, &mut Vec::new())
}

/// Maps indexed by tree nodes; `maps[ν]` sends the first generators of the
/// left structure onto the first generators of the right one.
#[derive(Clone, Debug)]
pub struct CoherentFamily {
    pub left: Presentation,
    pub right: Presentation,
    pub maps: BTreeMap<Node, crate::abgroup::Homomorphism>,
}

fn prefix_subgroup(g: &Presentation, m: usize) -> Subgroup {
    let gens: Vec<GroupElement> = (0..m).map(|i| g.generator(i)).collect();
    Subgroup::from_elements(g, &gens).expect("generators of g")
}

/// ∃ keeps an index node; each answer moves it to the lowest admissible
/// node above the previous one whose map covers the element.
pub struct CoherentStrategy {
    family: CoherentFamily,
    t_index: Tree,
    dom_left: BTreeMap<Node, Subgroup>,
    dom_right: BTreeMap<Node, Subgroup>,
}

pub fn strategy_from_coherent_family(family: &CoherentFamily, t_play: &Tree, t_index: &Tree) -> Result<CoherentStrategy> {
    let mut dom_left = BTreeMap::new();
    let mut dom_right = BTreeMap::new();
    for (&v, f) in &family.maps {
        if v >= t_index.node_count() {
            return Err(Error::Strategy(format!("map indexed by {v} outside the index tree")));
        }
        if let Some((s, _)) = t_index.label(v) {
            if s >= t_play.node_count() {
                return Err(Error::Strategy(format!("index node {v} projects outside the play tree")));
            }
        }
        let (m, k) = (f.source().gen_count(), f.target().gen_count());
        if m > family.left.gen_count() || k > family.right.gen_count() {
            return Err(Error::Strategy(format!("map at {v} exceeds the structures")));
        }
        if !f.is_isomorphism()? {
            return Err(Error::Strategy(format!("map at {v} is not an isomorphism")));
        }
        dom_left.insert(v, prefix_subgroup(&family.left, m));
        dom_right.insert(v, prefix_subgroup(&family.right, k));
    }
    for (&v1, f1) in &family.maps {
        for (&v2, f2) in &family.maps {
            if !t_index.is_below(v1, v2) {
                continue;
            }
            let m1 = f1.source().gen_count();
            if m1 > f2.source().gen_count() {
                return Err(Error::Strategy(format!("domain at {v1} is not inside the domain at {v2}")));
            }
            let n = family.right.gen_count();
            for i in 0..m1 {
                let a = f1.image_of_generator(i).resized(n);
                let b = f2.image_of_generator(i).resized(n);
                if !family.right.equal(&a, &b)? {
                    return Err(Error::Strategy(format!(
                        "non-coherent family: maps at {v1} and {v2} differ on generator {i}"
                    )));
                }
            }
        }
    }
    Ok(CoherentStrategy {
        family: family.clone(),
        t_index: t_index.clone(),
        dom_left,
        dom_right,
    })
}

impl CoherentStrategy {
    fn choose(&self, prev: Option<Node>, play_node: Node, side: Side, y: &GroupElement) -> Result<Node> {
        let dom = match side {
            Side::Left => &self.dom_left,
            Side::Right => &self.dom_right,
        };
        for &v in self.family.maps.keys() {
            if prev.is_some_and(|p| !self.t_index.is_below(p, v)) {
                continue;
            }
            if self.t_index.label(v).is_some_and(|(s, _)| s != play_node) {
                continue;
            }
            if dom[&v].contains(y)? {
                return Ok(v);
            }
        }
        Err(Error::Strategy(format!("no admissible index node for {y}")))
    }

    fn replay(&self, history: &[Move]) -> Result<Option<Node>> {
        let mut prev = None;
        for m in history {
            prev = Some(self.choose(prev, m.node, m.side, &m.element)?);
        }
        Ok(prev)
    }

    fn apply(&self, v: Node, side: Side, y: &GroupElement) -> Result<GroupElement> {
        let f = &self.family.maps[&v];
        let missing = || Error::Strategy(format!("{y} escapes the map at {v}"));
        match side {
            Side::Left => {
                let c = self.dom_left[&v].express(y)?.ok_or_else(missing)?;
                Ok(f.apply(&GroupElement::new(c))?.resized(self.family.right.gen_count()))
            }
            Side::Right => {
                let c = self.dom_right[&v].express(y)?.ok_or_else(missing)?;
                let x = f.preimage(&GroupElement::new(c))?.ok_or_else(missing)?;
                Ok(x.resized(self.family.left.gen_count()))
            }
        }
    }

    /// Index node the strategy would use for each round of `history`.
    pub fn index_trace(&self, history: &[Move]) -> Result<Vec<Node>> {
        let mut prev = None;
        let mut out = Vec::new();
        for m in history {
            let v = self.choose(prev, m.node, m.side, &m.element)?;
            out.push(v);
            prev = Some(v);
        }
        Ok(out)
    }
}

impl ExistsStrategy for CoherentStrategy {
    fn reply(&self, history: &[Move], node: Node, side: Side, element: &GroupElement) -> Result<GroupElement> {
        let prev = self.replay(history)?;
        let v = self.choose(prev, node, side, element)?;
        self.apply(v, side, element)
    }

    fn state_key(&self, history: &[Move]) -> Option<Vec<usize>> {
        Some(vec![match self.replay(history) {
            Ok(p) => p.map_or(0, |p| p + 1),
            Err(_) => usize::MAX,
        }])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ExistsWins,
    ForallWins,
    Abandoned,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub moves: Vec<Move>,
    pub verdict: Verdict,
}

/// Winner of a finished play.
pub fn final_verdict(spec: &GameSpec, history: &[Move]) -> Result<Verdict> {
    let oracle = AbelianOracle::new(&spec.left, &spec.right);
    Ok(if oracle.check(&pairs_of(history))? {
        Verdict::ExistsWins
    } else {
        Verdict::ForallWins
    })
}

/// Plays ∀ (a callback; `None` abandons) against an ∃ strategy to the end.
pub fn play_out(
    spec: &GameSpec,
    mut forall: impl FnMut(&[Move]) -> Result<Option<(Node, Side, GroupElement)>>,
    exists: &dyn ExistsStrategy,
) -> Result<Transcript> {
    let mut moves = Vec::new();
    while !spec.successors(moves.last().map(|m: &Move| m.node)).is_empty() {
        let Some((node, side, element)) = forall(&moves)? else {
            return Ok(Transcript {
                moves,
                verdict: Verdict::Abandoned,
            });
        };
        spec.check_forall_move(&moves, node, side, &element)?;
        let reply = exists.reply(&moves, node, side, &element)?;
        moves.push(Move {
            node,
            side,
            element,
            reply,
        });
    }
    let verdict = final_verdict(spec, &moves)?;
    Ok(Transcript { moves, verdict })
}
