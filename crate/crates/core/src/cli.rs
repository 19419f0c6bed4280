//! Scenario files, reports, and the interactive game loop behind the `efsep` binary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::abgroup::{Canonicalizer, GroupElement, Height, Presentation};
use crate::constructions::{
    ball, build_projections, build_truncated_pair, canonical_ladders, check_family, check_standard_form, extension_exists,
    gadget_height, Build, BuildOptions, GuessScript, StageClass, Triple,
};
use crate::efgame::{
    AbelianOracle, PartialIsoOracle,
    final_verdict, pairs_of, play_out, solve_game, verify_forall_strategy, verify_strategy, ExistsStrategy, GameSpec, Move, Player, Side,
    SolveOptions, Transcript, Verdict, WinningStrategy,
};
use crate::equivalences::{
    is_level_preserving, search_level_preserving, stable_quotient_equiv, Filtration, FiltrationJson, SearchOptions, SearchOutcome,
};
use crate::error::{Error, Result};
use crate::trees::{Node, Tree, TreeJson};
use crate::zlinalg::{snf, IntMatrix};

/// `{"gens": n, "relations": [[...], ...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupJson {
    pub gens: usize,
    #[serde(default)]
    pub relations: Vec<Vec<i64>>,
}

impl GroupJson {
    pub fn to_presentation(&self) -> Result<Presentation> {
        if self.relations.iter().any(|r| r.len() != self.gens) {
            return Err(Error::Schema(format!("relation rows must have {} entries", self.gens)));
        }
        let rows: Vec<&[i64]> = self.relations.iter().map(|r| r.as_slice()).collect();
        Presentation::from_i64(self.gens, &rows)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameScenario {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub left: GroupJson,
    pub right: GroupJson,
    pub tree: TreeJson,
    #[serde(default = "default_max_order")]
    pub max_order: usize,
    #[serde(default)]
    pub expect_winner: Option<Player>,
}

fn default_max_order() -> usize {
    4096
}

/// A build: stage plan, optional index tree (default: a chain), guesses.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildSpec {
    pub plan: Vec<StageClass>,
    #[serde(default)]
    pub tree: Option<TreeJson>,
    #[serde(default)]
    pub script: GuessScript,
    #[serde(default)]
    pub options: BuildOptions,
}

impl BuildSpec {
    pub fn run(&self) -> Result<Build> {
        let tree = match &self.tree {
            Some(t) => Tree::from_json(t)?,
            None => Tree::chain(self.plan.len()),
        };
        build_truncated_pair(&tree, &self.plan, &self.script, self.options)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstructionQuery {
    pub max_abs_d: i64,
    pub radius: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildScenario {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub build: BuildSpec,
    /// Rows `N = 1..=heights` of the gadget height table.
    #[serde(default)]
    pub heights: Option<usize>,
    #[serde(default)]
    pub obstruction: Option<ObstructionQuery>,
    /// Stages expected to carry a chain.
    #[serde(default)]
    pub expect_chains: Option<Vec<usize>>,
    #[serde(default)]
    pub expect_all_blocked: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceScenario {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Compare the two sides of a build ...
    #[serde(default)]
    pub build: Option<BuildSpec>,
    /// ... or two explicit filtrations.
    #[serde(default)]
    pub left: Option<FiltrationJson>,
    #[serde(default)]
    pub right: Option<FiltrationJson>,
    /// Search levels `α = 0..levels`; default all.
    #[serde(default)]
    pub levels: Option<usize>,
    #[serde(default)]
    pub search: Option<SearchOptions>,
    #[serde(default)]
    pub expect_equivalent: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SuiteEntry {
    Path(String),
    Inline(Box<Scenario>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteScenario {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub scenarios: Vec<SuiteEntry>,
    /// Seeded random Smith-form checks.
    #[serde(default)]
    pub snf_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    Game(GameScenario),
    Build(BuildScenario),
    Equivalence(EquivalenceScenario),
    Suite(SuiteScenario),
}

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::Game(_) => "game",
            Scenario::Build(_) => "build",
            Scenario::Equivalence(_) => "equivalence",
            Scenario::Suite(_) => "suite",
        }
    }

    pub fn name(&self) -> String {
        let n = match self {
            Scenario::Game(s) => &s.name,
            Scenario::Build(s) => &s.name,
            Scenario::Equivalence(s) => &s.name,
            Scenario::Suite(s) => &s.name,
        };
        n.clone().unwrap_or_else(|| self.kind().to_string())
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Scenario::Game(s) => s.seed,
            Scenario::Build(s) => s.seed,
            Scenario::Equivalence(s) => s.seed,
            Scenario::Suite(s) => s.seed,
        }
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    pub fn new(name: &str, passed: bool) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: None,
        }
    }

    pub fn with(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: Some(detail.into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub kind: String,
    pub name: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub data: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<Report>,
}

impl Report {
    pub fn new(kind: &str, name: &str, seed: u64) -> Self {
        Report {
            kind: kind.into(),
            name: name.into(),
            seed,
            checks: Vec::new(),
            data: BTreeMap::new(),
            children: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed) && self.children.iter().all(Report::passed)
    }

    /// `(path, passed)` for every check, children prefixed by their names.
    pub fn verdicts(&self) -> Vec<(String, bool)> {
        let mut out: Vec<(String, bool)> = self.checks.iter().map(|c| (format!("{}/{}", self.name, c.name), c.passed)).collect();
        for ch in &self.children {
            out.extend(ch.verdicts().into_iter().map(|(p, v)| (format!("{}/{p}", self.name), v)));
        }
        out
    }

    fn put(&mut self, key: &str, v: Value) {
        self.data.insert(key.into(), v);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Text,
    Json,
}

pub fn emit_report(r: &Report, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(r).expect("reports serialize");
            s.push('\n');
            s
        }
        Format::Text => {
            let mut s = String::new();
            text_report(r, 0, &mut s);
            s
        }
    }
}

fn text_report(r: &Report, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    let status = if r.passed() { "PASS" } else { "FAIL" };
    let _ = writeln!(out, "{pad}{status} {} [{}] seed={}", r.name, r.kind, r.seed);
    for c in &r.checks {
        let mark = if c.passed { "ok  " } else { "FAIL" };
        match &c.detail {
            Some(d) => {
                let _ = writeln!(out, "{pad}  {mark} {}: {d}", c.name);
            }
            None => {
                let _ = writeln!(out, "{pad}  {mark} {}", c.name);
            }
        }
    }
    for (k, v) in &r.data {
        let _ = writeln!(out, "{pad}  {k} = {v}");
    }
    for ch in &r.children {
        text_report(ch, depth + 1, out);
    }
}

/// Parses the verdict lines of a text report back out.
pub fn text_verdicts(text: &str) -> Vec<bool> {
    text.lines()
        .filter_map(|l| {
            let t = l.trim_start();
            if t.starts_with("ok  ") {
                Some(true)
            } else if t.starts_with("FAIL ") && !t.contains(" seed=") {
                Some(false)
            } else {
                None
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    /// Overrides every scenario seed when set.
    pub seed: Option<u64>,
    pub max_states: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: None,
            max_states: SolveOptions::default().max_states,
        }
    }
}

/// 0: every check passed; 1: some property failed; 2: unreadable or invalid input.
pub fn exit_code(r: &Result<Report>) -> i32 {
    match r {
        Ok(rep) if rep.passed() => 0,
        Ok(_) => 1,
        Err(Error::Schema(_) | Error::Io(_)) => 2,
        Err(_) => 1,
    }
}

fn schema(e: Error) -> Error {
    match e {
        Error::Schema(_) | Error::Io(_) => e,
        other => Error::Schema(other.to_string()),
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

pub fn run_scenario_file(path: &Path, opts: &RunOptions) -> Result<Report> {
    let sc: Scenario = read_json(path)?;
    run_scenario(&sc, path.parent().unwrap_or(Path::new(".")), opts)
}

pub fn run_scenario(sc: &Scenario, base: &Path, opts: &RunOptions) -> Result<Report> {
    run_inherited(sc, base, opts, 0)
}

fn run_inherited(sc: &Scenario, base: &Path, opts: &RunOptions, inherited: u64) -> Result<Report> {
    let seed = opts.seed.or(sc.seed()).unwrap_or(inherited);
    let mut report = Report::new(sc.kind(), &sc.name(), seed);
    let outcome = match sc {
        Scenario::Game(g) => run_game(g, opts, &mut report),
        Scenario::Build(b) => run_build(b, seed, &mut report),
        Scenario::Equivalence(e) => run_equivalence(e, &mut report),
        Scenario::Suite(s) => run_suite(s, seed, base, opts, &mut report),
    };
    match outcome {
        Ok(()) => Ok(report),
        Err(e @ (Error::Schema(_) | Error::Io(_))) => Err(e),
        Err(e) => {
            report.checks.push(Check::with("pipeline", false, e.to_string()));
            Ok(report)
        }
    }
}

fn run_game(g: &GameScenario, opts: &RunOptions, report: &mut Report) -> Result<()> {
    let left = g.left.to_presentation().map_err(schema)?;
    let right = g.right.to_presentation().map_err(schema)?;
    let tree = Tree::from_json(&g.tree).map_err(schema)?;
    let spec = GameSpec::finite(&left, &right, &tree, g.max_order).map_err(schema)?;
    report.put("carrier_left", json!(spec.carrier_left.len()));
    report.put("carrier_right", json!(spec.carrier_right.len()));
    report.put("tree_nodes", json!(tree.node_count()));
    let solved = solve_game(&spec, SolveOptions { max_states: opts.max_states })?;
    report.put("winner", json!(solved.winner));
    report.put("states_explored", json!(solved.states_explored));
    let verified = match &solved.strategy {
        WinningStrategy::Exists(s) => verify_strategy(&spec, s, opts.max_states)?,
        WinningStrategy::Forall(s) => verify_forall_strategy(&spec, s, opts.max_states)?,
    };
    report.checks.push(Check::new("strategy_verified", verified));
    if let Some(w) = g.expect_winner {
        report.checks.push(Check::with(
            "expected_winner",
            w == solved.winner,
            format!("expected {}, solver says {}", player_name(w), player_name(solved.winner)),
        ));
    }
    Ok(())
}

fn player_name(p: Player) -> &'static str {
    match p {
        Player::Forall => "forall",
        Player::Exists => "exists",
    }
}

fn height_value(h: Height) -> Value {
    match h {
        Height::Finite(n) => json!(n),
        Height::Infinite => json!("infinite"),
    }
}

fn build_tables(b: &Build, report: &mut Report) -> Result<bool> {
    let mut stages = Vec::new();
    let mut free = true;
    for a in 0..b.stage_count() {
        let p0 = b.stage_presentation(0, a + 1);
        let p1 = b.stage_presentation(1, a + 1);
        free &= p0.is_torsion_free() && p1.is_torsion_free();
        stages.push(json!({
            "stage": a,
            "class": b.plan()[a],
            "generators": b.stage_size(a + 1),
            "rank0": p0.invariant_factors().free_rank,
            "rank1": p1.invariant_factors().free_rank,
        }));
    }
    report.put("stages", Value::Array(stages));
    let registry: Vec<Value> = b
        .registry()
        .cells()
        .map(|(theta, ws)| json!({"theta": theta, "w": ws.iter().map(|w| format!("w[{},{}]", w.sigma, w.n)).collect::<Vec<_>>()}))
        .collect();
    report.put("registry", Value::Array(registry));
    let chains: Vec<Value> = b
        .chains()
        .values()
        .map(|c| {
            json!({
                "stage": c.stage,
                "beta": c.beta,
                "primes": c.primes(),
                "cases": c.cases,
                "thetas": c.thetas,
            })
        })
        .collect();
    report.put("chains", Value::Array(chains));
    Ok(free)
}

fn run_build(s: &BuildScenario, seed: u64, report: &mut Report) -> Result<()> {
    let b = match s.build.run() {
        Ok(b) => b,
        Err(e @ Error::Construction(_)) => return Err(e),
        Err(e) => return Err(schema(e)),
    };
    let free = build_tables(&b, report)?;
    report.checks.push(Check::new("free_at_every_stage", free));
    let fam = check_family(&b)?;
    report.checks.push(Check::with("family_4abc", fam.all(), serde_json::to_string(&fam).expect("serialize")));
    let ladders = canonical_ladders(&b);
    let (p0, p1) = build_projections(&b)?;
    let sf = match (check_standard_form(&b, &p0, &ladders), check_standard_form(&b, &p1, &ladders)) {
        (Ok(a), Ok(c)) => Check::new("standard_form", a && c),
        (Err(e), _) | (_, Err(e)) => Check::with("standard_form", false, e.to_string()),
    };
    report.checks.push(sf);
    if let Some(n) = s.heights {
        let mut rows = Vec::new();
        let mut exact = true;
        for k in 1..=n {
            let h = gadget_height(k)?;
            exact &= h == Height::Finite(k as u64);
            rows.push(json!({"n": k, "height": height_value(h)}));
        }
        report.put("heights", Value::Array(rows));
        report.checks.push(Check::new("heights_exact", exact));
    }
    if let Some(q) = s.obstruction {
        let mut all_blocked = true;
        let mut sound = true;
        let mut rows = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (&delta, chain) in b.chains() {
            let m = b.stage_size(delta);
            let g1 = b.companion_canonicalizer(delta);
            let (mut total, mut blocked, mut extendable) = (0usize, Vec::new(), 0usize);
            for r in 0..chain.len() {
                for d in (-q.max_abs_d..=q.max_abs_d).filter(|&d| d != 0) {
                    for g in ball(m, q.radius) {
                        let t = Triple { r, d, g };
                        total += 1;
                        if crate::constructions::extension_obstruction(&chain.data, &g1, &t)? {
                            blocked.push(t);
                        } else if extension_exists(&b, delta, &t)? {
                            extendable += 1;
                        }
                    }
                }
            }
            // blocked ⇒ no extension, on a seeded sample
            let sample = 32.min(blocked.len());
            for _ in 0..sample {
                let t = &blocked[rng.gen_range(0..blocked.len())];
                sound &= !extension_exists(&b, delta, t)?;
            }
            all_blocked &= blocked.len() == total;
            rows.push(json!({
                "stage": delta,
                "triples": total,
                "blocked": blocked.len(),
                "unblocked_extendable": extendable,
                "sampled_blocked_checked": sample,
            }));
        }
        report.put("obstruction", Value::Array(rows));
        report.checks.push(Check::new("blocked_implies_no_extension", sound));
        if let Some(want) = s.expect_all_blocked {
            report.checks.push(Check::new("expected_all_blocked", want == all_blocked));
        }
    }
    if let Some(want) = &s.expect_chains {
        let got: Vec<usize> = b.chains().keys().copied().collect();
        report
            .checks
            .push(Check::with("expected_chains", *want == got, format!("expected {want:?}, got {got:?}")));
    }
    Ok(())
}

fn run_equivalence(s: &EquivalenceScenario, report: &mut Report) -> Result<()> {
    let (f, g) = match (&s.build, &s.left, &s.right) {
        (Some(spec), None, None) => {
            let b = spec.run().map_err(schema)?;
            (Filtration::from_build(&b, 0), Filtration::from_build(&b, 1))
        }
        (None, Some(l), Some(r)) => (
            Filtration::from_json(l).map_err(schema)?,
            Filtration::from_json(r).map_err(schema)?,
        ),
        _ => return Err(Error::Schema("give either `build` or both `left` and `right`".into())),
    };
    if f.len() != g.len() {
        return Err(Error::Schema(format!("filtrations of length {} and {}", f.len(), g.len())));
    }
    let levels = s.levels.unwrap_or(f.len() - 1).min(f.len() - 1);
    let opts = s.search.unwrap_or_default();
    let mut rows = Vec::new();
    let mut all_found = true;
    let mut round_trip = true;
    for alpha in 0..levels {
        let r = search_level_preserving(&f, &g, alpha, opts)?;
        match r.found() {
            Some(iso) => round_trip &= is_level_preserving(iso, &f, &g)?,
            None => all_found = false,
        }
        rows.push(json!({"alpha": alpha, "outcome": outcome_summary(&r.outcome), "nodes": r.nodes}));
    }
    let stable = stable_quotient_equiv(&f, &g)?;
    let stable_upto = crate::equivalences::stable_quotient_equiv_upto(&f, &g, levels)?;
    report.put("levels", Value::Array(rows));
    report.put("stable_quotient_equiv", json!(stable));
    report.checks.push(Check::new("witnesses_level_preserving", round_trip));
    report
        .checks
        .push(Check::new("search_implies_quotient_equiv", !all_found || stable_upto));
    if let Some(want) = s.expect_equivalent {
        let got = if want { all_found && stable } else { !all_found || !stable };
        let detail = format!("search found all levels: {all_found}, quotient-equivalent: {stable}");
        report.checks.push(Check::with("expected_equivalence", got, detail));
    }
    Ok(())
}

fn outcome_summary(o: &SearchOutcome) -> Value {
    match o {
        SearchOutcome::Found { iso } => json!({"found": true, "top": iso.top}),
        SearchOutcome::Absent { bounded, budget_exhausted } => {
            json!({"found": false, "bounded": bounded, "budget_exhausted": budget_exhausted})
        }
    }
}

fn snf_check(m: &IntMatrix) -> bool {
    let d = snf(m);
    let ok_eq = d.u.mul(m).and_then(|x| x.mul(&d.v)).map(|x| x == d.d).unwrap_or(false);
    let diag = d.d.diagonal();
    let chain = diag.windows(2).all(|w| {
        use num_traits::Zero;
        if w[0].is_zero() {
            w[1].is_zero()
        } else {
            (&w[1] % &w[0]).is_zero()
        }
    });
    let off = (0..d.d.rows()).all(|i| (0..d.d.cols()).all(|j| i == j || num_traits::Zero::is_zero(d.d.get(i, j))));
    ok_eq && d.u.is_unimodular() && d.v.is_unimodular() && chain && off && diag.iter().all(|x| x.sign() != num_bigint::Sign::Minus)
}

/// A seeded random matrix with at most 6 rows and columns and entries in `[-20, 20]`.
pub fn random_matrix(rng: &mut ChaCha8Rng) -> IntMatrix {
    let r = rng.gen_range(1..=6);
    let c = rng.gen_range(1..=6);
    let rows: Vec<Vec<i64>> = (0..r).map(|_| (0..c).map(|_| rng.gen_range(-20..=20)).collect()).collect();
    let refs: Vec<&[i64]> = rows.iter().map(|x| x.as_slice()).collect();
    IntMatrix::from_i64(&refs)
}

fn run_suite(s: &SuiteScenario, seed: u64, base: &Path, opts: &RunOptions, report: &mut Report) -> Result<()> {
    for entry in &s.scenarios {
        let child = match entry {
            SuiteEntry::Path(p) => {
                let path: PathBuf = base.join(p);
                let sc: Scenario = read_json(&path)?;
                run_inherited(&sc, path.parent().unwrap_or(base), opts, seed)?
            }
            SuiteEntry::Inline(sc) => run_inherited(sc, base, opts, seed)?,
        };
        report.children.push(child);
    }
    if s.snf_samples > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let passed = (0..s.snf_samples).filter(|_| snf_check(&random_matrix(&mut rng))).count();
        report.put("snf_samples", json!(s.snf_samples));
        report.put("snf_passed", json!(passed));
        report.checks.push(Check::new("snf_decompositions", passed == s.snf_samples));
    }
    Ok(())
}

/// Answers with the first carrier element that keeps the position a partial isomorphism.
struct GreedyExists<'a> {
    spec: &'a GameSpec,
    oracle: AbelianOracle,
}

impl ExistsStrategy for GreedyExists<'_> {
    fn reply(&self, history: &[Move], node: Node, side: Side, element: &GroupElement) -> Result<GroupElement> {
        let mut pairs = pairs_of(history);
        for cand in self.spec.carrier(side.other()) {
            let m = Move { node, side, element: element.clone(), reply: cand.clone() };
            pairs.push(m.pair());
            if self.oracle.check(&pairs)? {
                return Ok(cand.clone());
            }
            pairs.pop();
        }
        Ok(self.spec.structure(side.other()).zero())
    }
}

/// Parses `1 0 -2` or `#idx` (an index into the displayed carrier).
pub fn parse_element(spec: &GameSpec, side: Side, text: &str) -> Result<GroupElement> {
    let text = text.trim();
    if let Some(idx) = text.strip_prefix('#') {
        let i: usize = idx.trim().parse().map_err(|_| Error::IllegalMove(format!("bad index `{idx}`")))?;
        return spec
            .carrier(side)
            .get(i)
            .cloned()
            .ok_or_else(|| Error::IllegalMove(format!("index {i} is outside the carrier")));
    }
    let coeffs: std::result::Result<Vec<i64>, _> = text.split_whitespace().map(str::parse).collect();
    let coeffs = coeffs.map_err(|_| Error::IllegalMove(format!("cannot read `{text}` as integer coefficients")))?;
    let x = GroupElement::from_i64(&coeffs);
    spec.structure(side)
        .check_element(&x)
        .map_err(|e| Error::IllegalMove(e.to_string()))?;
    Ok(Canonicalizer::new(spec.structure(side)).canonical(&x))
}

fn parse_side(s: &str) -> Option<Side> {
    match s.to_ascii_lowercase().as_str() {
        "l" | "left" => Some(Side::Left),
        "r" | "right" => Some(Side::Right),
        _ => None,
    }
}

/// `node side element`, e.g. `0 left 1 0` or `2 r #5`.
pub fn parse_forall_move(spec: &GameSpec, history: &[Move], line: &str) -> Result<(Node, Side, GroupElement)> {
    let mut parts = line.trim().splitn(3, char::is_whitespace);
    let node: Node = parts
        .next()
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| Error::IllegalMove("expected `node side element`".into()))?;
    let side = parts
        .next()
        .and_then(parse_side)
        .ok_or_else(|| Error::IllegalMove("side must be `left` or `right`".into()))?;
    let element = parse_element(spec, side, parts.next().unwrap_or(""))?;
    spec.check_forall_move(history, node, side, &element)?;
    Ok((node, side, element))
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

fn show_position(spec: &GameSpec, history: &[Move], out: &mut dyn Write) -> Result<()> {
    let prev = history.last().map(|m| m.node);
    let mut s = String::new();
    for m in history {
        let (l, r) = m.pair();
        let _ = writeln!(s, "  node {}: {} <-> {}", m.node, l, r);
    }
    let _ = writeln!(s, "available nodes: {:?}", spec.successors(prev));
    out.write_all(s.as_bytes()).map_err(io_err)
}

fn show_carriers(spec: &GameSpec, out: &mut dyn Write) -> Result<()> {
    let mut s = String::new();
    for side in [Side::Left, Side::Right] {
        let c = spec.carrier(side);
        let _ = write!(s, "{side:?} carrier ({} elements):", c.len());
        for (i, x) in c.iter().take(32).enumerate() {
            let _ = write!(s, " #{i}={x}");
        }
        if c.len() > 32 {
            s.push_str(" ...");
        }
        s.push('\n');
    }
    out.write_all(s.as_bytes()).map_err(io_err)
}

/// Reads one non-empty line; `None` on EOF or `quit`.
fn next_line(input: &mut dyn BufRead, out: &mut dyn Write, prompt: &str) -> Result<Option<String>> {
    loop {
        out.write_all(prompt.as_bytes()).map_err(io_err)?;
        out.flush().map_err(io_err)?;
        let mut line = String::new();
        if input.read_line(&mut line).map_err(io_err)? == 0 {
            return Ok(None);
        }
        let t = line.trim();
        if t.eq_ignore_ascii_case("quit") || t.eq_ignore_ascii_case("q") {
            return Ok(None);
        }
        if !t.is_empty() {
            return Ok(Some(t.to_string()));
        }
    }
}

/// Plays `human` against the machine. Illegal input is explained and re-prompted;
/// EOF or `quit` abandons the play.
pub fn interactive_play(
    spec: &GameSpec,
    human: Player,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    max_states: usize,
) -> Result<Transcript> {
    let solved = solve_game(spec, SolveOptions { max_states })?;
    let msg = format!("solver: {} has a winning strategy\n", player_name(solved.winner));
    out.write_all(msg.as_bytes()).map_err(io_err)?;
    show_carriers(spec, out)?;
    let greedy = GreedyExists { spec, oracle: AbelianOracle::new(&spec.left, &spec.right) };
    let transcript = match human {
        Player::Forall => {
            let machine: &dyn ExistsStrategy = match &solved.strategy {
                WinningStrategy::Exists(t) => t,
                WinningStrategy::Forall(_) => &greedy,
            };
            let mut last_shown = usize::MAX;
            play_out(
                spec,
                |history| {
                    if let Some(m) = history.last() {
                        if last_shown != history.len() {
                            let s = format!("exists answers {} on {:?}\n", m.reply, m.side.other());
                            out.write_all(s.as_bytes()).map_err(io_err)?;
                        }
                    }
                    last_shown = history.len();
                    show_position(spec, history, out)?;
                    loop {
                        let Some(line) = next_line(input, out, "forall> ")? else {
                            return Ok(None);
                        };
                        match parse_forall_move(spec, history, &line) {
                            Ok(mv) => return Ok(Some(mv)),
                            Err(e) => out.write_all(format!("illegal: {e}\n").as_bytes()).map_err(io_err)?,
                        }
                    }
                },
                machine,
            )?
        }
        Player::Exists => {
            let mut moves: Vec<Move> = Vec::new();
            loop {
                let prev = moves.last().map(|m| m.node);
                let succ = spec.successors(prev);
                if succ.is_empty() {
                    break;
                }
                let (node, side, element) = match &solved.strategy {
                    WinningStrategy::Forall(f) => f.choose(&moves)?,
                    WinningStrategy::Exists(_) => None,
                }
                .unwrap_or_else(|| {
                    let c = spec.carrier(Side::Left);
                    (succ[0], Side::Left, c[(moves.len() + 1) % c.len()].clone())
                });
                show_position(spec, &moves, out)?;
                let s = format!("forall plays node {node}, {side:?} element {element}\n");
                out.write_all(s.as_bytes()).map_err(io_err)?;
                let reply = loop {
                    let Some(line) = next_line(input, out, "exists> ")? else {
                        return Ok(Transcript { moves, verdict: Verdict::Abandoned });
                    };
                    match parse_element(spec, side.other(), &line) {
                        Ok(x) => break x,
                        Err(e) => out.write_all(format!("illegal: {e}\n").as_bytes()).map_err(io_err)?,
                    }
                };
                moves.push(Move { node, side, element, reply });
            }
            let verdict = final_verdict(spec, &moves)?;
            Transcript { moves, verdict }
        }
    };
    let s = format!("verdict: {}\n", serde_json::to_value(transcript.verdict).expect("serialize"));
    out.write_all(s.as_bytes()).map_err(io_err)?;
    Ok(transcript)
}
