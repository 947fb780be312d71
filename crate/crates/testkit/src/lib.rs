//! Test support for hcatd: random models, projects and scripted testers,
//! plus brute-force oracles that recompute everything from first
//! principles. Nothing here calls the engine's enumeration, extension,
//! coverage or traversal code; oracles only read model data through the
//! public accessors.

use std::collections::{BTreeMap, BTreeSet};

use hcatd_core::{
    Assumption, AssumptionEdits, CombinatorialModel, Interaction, MetaLevel, Parameter, Project,
    Property, Scenario,
};
use itertools::Itertools;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

/// Restriction formula in test-side form. Evaluated independently of the
/// engine's parser and evaluator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Cmp { param: usize, eq: bool, rhs: Rhs },
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rhs {
    Value(usize),
    Param(usize),
}

impl Expr {
    /// Fully parenthesised source text with quoted values.
    pub fn render(&self, spec: &ModelSpec) -> String {
        match self {
            Expr::Cmp { param, eq, rhs } => {
                let op = if *eq { "=" } else { "!=" };
                let right = match rhs {
                    Rhs::Value(v) => format!("\"{}\"", spec.domains[*param][*v]),
                    Rhs::Param(q) => spec.names[*q].clone(),
                };
                format!("{} {op} {right}", spec.names[*param])
            }
            Expr::Not(e) => format!("!({})", e.render(spec)),
            Expr::And(a, b) => format!("({}) && ({})", a.render(spec), b.render(spec)),
            Expr::Or(a, b) => format!("({}) || ({})", a.render(spec), b.render(spec)),
        }
    }

    /// Kleene evaluation on a partial assignment; `None` is Unknown.
    pub fn eval(&self, spec: &ModelSpec, values: &[Option<usize>]) -> Option<bool> {
        match self {
            Expr::Cmp { param, eq, rhs } => {
                let left = &spec.domains[*param][values[*param]?];
                let equal = match rhs {
                    Rhs::Value(v) => *left == spec.domains[*param][*v],
                    Rhs::Param(q) => *left == spec.domains[*q][values[*q]?],
                };
                Some(equal == *eq)
            }
            Expr::Not(e) => e.eval(spec, values).map(|b| !b),
            Expr::And(a, b) => match (a.eval(spec, values), b.eval(spec, values)) {
                (Some(false), _) | (_, Some(false)) => Some(false),
                (Some(true), Some(true)) => Some(true),
                _ => None,
            },
            Expr::Or(a, b) => match (a.eval(spec, values), b.eval(spec, values)) {
                (Some(true), _) | (_, Some(true)) => Some(true),
                (Some(false), Some(false)) => Some(false),
                _ => None,
            },
        }
    }
}

/// Parameters `X0..`, each with domain `v0..v{k-1}`, and restrictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub names: Vec<String>,
    pub domains: Vec<Vec<String>>,
    pub restrictions: Vec<Expr>,
}

impl ModelSpec {
    pub fn sources(&self) -> Vec<String> {
        self.restrictions.iter().map(|r| r.render(self)).collect()
    }

    pub fn build(&self) -> CombinatorialModel {
        let params = self
            .names
            .iter()
            .zip(&self.domains)
            .map(|(n, d)| Parameter::new(n.clone(), d.clone()).expect("valid parameter"))
            .collect();
        let mut model = CombinatorialModel::new(params).expect("valid model");
        for source in self.sources() {
            model.add_restriction(&source).expect("generated restriction parses");
        }
        model
    }

    /// Two-valued check of a total assignment.
    pub fn holds(&self, s: &[usize]) -> bool {
        let values: Vec<Option<usize>> = s.iter().copied().map(Some).collect();
        self.restrictions
            .iter()
            .all(|r| r.eval(self, &values) == Some(true))
    }

    pub fn with_restriction(&self, e: Expr) -> ModelSpec {
        let mut out = self.clone();
        out.restrictions.push(e);
        out
    }
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_expr(rng: &mut StdRng, domains: &[Vec<String>], depth: u32) -> Expr {
    let n = domains.len();
    if depth == 0 || rng.gen_bool(0.45) {
        let param = rng.gen_range(0..n);
        let eq = rng.gen_bool(0.5);
        let rhs = if n > 1 && rng.gen_bool(0.25) {
            let mut q = rng.gen_range(0..n - 1);
            if q >= param {
                q += 1;
            }
            Rhs::Param(q)
        } else {
            Rhs::Value(rng.gen_range(0..domains[param].len()))
        };
        return Expr::Cmp { param, eq, rhs };
    }
    match rng.gen_range(0..3) {
        0 => Expr::Not(Box::new(random_expr(rng, domains, depth - 1))),
        1 => Expr::And(
            Box::new(random_expr(rng, domains, depth - 1)),
            Box::new(random_expr(rng, domains, depth - 1)),
        ),
        _ => Expr::Or(
            Box::new(random_expr(rng, domains, depth - 1)),
            Box::new(random_expr(rng, domains, depth - 1)),
        ),
    }
}

pub fn random_model(
    rng: &mut StdRng,
    max_params: usize,
    max_values: usize,
    max_restrictions: usize,
) -> ModelSpec {
    let n = rng.gen_range(1..=max_params);
    let names: Vec<String> = (0..n).map(|i| format!("X{i}")).collect();
    let domains: Vec<Vec<String>> = (0..n)
        .map(|_| {
            let k = rng.gen_range(1..=max_values);
            (0..k).map(|v| format!("v{v}")).collect()
        })
        .collect();
    let r = rng.gen_range(0..=max_restrictions);
    let restrictions = (0..r).map(|_| random_expr(rng, &domains, 2)).collect();
    ModelSpec {
        names,
        domains,
        restrictions,
    }
}

/// A random partial assignment over the model's parameters.
pub fn random_interaction(rng: &mut StdRng, spec: &ModelSpec) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (p, domain) in spec.domains.iter().enumerate() {
        if rng.gen_bool(0.5) {
            out.push((p, rng.gen_range(0..domain.len())));
        }
    }
    out
}

pub fn to_interaction(pairs: &[(usize, usize)]) -> Interaction {
    Interaction::from_pairs(pairs.iter().copied()).expect("distinct parameters")
}

pub fn to_scenario(values: &[usize]) -> Scenario {
    Scenario::new(values.to_vec())
}

/// Interactions as sorted `(parameter, value)` lists.
pub type Pairs = Vec<Vec<(usize, usize)>>;

/// Level → affected properties with their tests.
pub type RetestMap = BTreeMap<usize, Vec<(String, Vec<Scenario>)>>;

/// Brute-force reference implementations.
pub mod oracle {
    use super::*;

    /// Every member of the Cartesian product, in lexicographic order.
    pub fn product(spec: &ModelSpec) -> Vec<Vec<usize>> {
        spec.domains
            .iter()
            .map(|d| 0..d.len())
            .multi_cartesian_product()
            .collect()
    }

    /// The executable space: product filtered by the restrictions.
    pub fn space(spec: &ModelSpec) -> Vec<Vec<usize>> {
        product(spec).into_iter().filter(|s| spec.holds(s)).collect()
    }

    pub fn matches(s: &[usize], pairs: &[(usize, usize)]) -> bool {
        pairs.iter().all(|&(p, v)| s[p] == v)
    }

    pub fn extendable(spec: &ModelSpec, pairs: &[(usize, usize)]) -> bool {
        space(spec).iter().any(|s| matches(s, pairs))
    }

    /// All extendable size-`t` interactions, sorted.
    pub fn requirements(spec: &ModelSpec, t: usize) -> Vec<Vec<(usize, usize)>> {
        let space = space(spec);
        let mut out = Vec::new();
        for params in (0..spec.domains.len()).combinations(t) {
            for values in params
                .iter()
                .map(|&p| 0..spec.domains[p].len())
                .multi_cartesian_product()
            {
                let pairs: Vec<(usize, usize)> = params.iter().copied().zip(values).collect();
                if space.iter().any(|s| matches(s, &pairs)) {
                    out.push(pairs);
                }
            }
        }
        out.sort();
        out
    }

    /// `(covered, uncovered)` by a double loop.
    pub fn split(
        tests: &[Vec<usize>],
        reqs: &[Vec<(usize, usize)>],
    ) -> (Pairs, Pairs) {
        reqs.iter()
            .cloned()
            .partition(|r| tests.iter().any(|t| matches(t, r)))
    }

    /// Validity by double loops over requirements × tests and tests ×
    /// restrictions.
    pub fn valid(spec: &ModelSpec, tests: &[Vec<usize>], reqs: &[Vec<(usize, usize)>]) -> bool {
        let all_covered = reqs.iter().all(|r| tests.iter().any(|t| matches(t, r)));
        let all_executable = tests.iter().all(|t| {
            let values: Vec<Option<usize>> = t.iter().copied().map(Some).collect();
            spec.restrictions
                .iter()
                .all(|r| r.eval(spec, &values) == Some(true))
        });
        all_covered && all_executable
    }

    /// Smallest number of executable scenarios covering `reqs`, by
    /// exhaustive search over subsets of increasing size.
    pub fn min_cover_size(space: &[Vec<usize>], reqs: &[Vec<(usize, usize)>]) -> Option<usize> {
        if reqs.is_empty() {
            return Some(0);
        }
        (1..=space.len()).find(|&k| {
            space
                .iter()
                .combinations(k)
                .any(|tests| reqs.iter().all(|r| tests.iter().any(|t| matches(t, r))))
        })
    }

    /// Largest set of requirements over one parameter pair that pairwise
    /// conflict (no single scenario covers two of them). For a pair of
    /// parameters every two distinct value pairs conflict, so this is the
    /// number of requirements binding exactly that pair.
    pub fn pair_lower_bound(reqs: &[Vec<(usize, usize)>]) -> usize {
        let mut per_pair: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        for r in reqs {
            *per_pair.entry(r.iter().map(|&(p, _)| p).collect()).or_default() += 1;
        }
        per_pair.values().copied().max().unwrap_or(0)
    }

    /// Retest mapping recomputed from the raw level data: the assumption
    /// lineage is the fixpoint closure under strength-parent links, then
    /// every level in range is scanned directly.
    pub fn retest(
        project: &Project,
        assumption_id: &str,
        discovered_at: usize,
    ) -> Option<RetestMap> {
        let levels = project.levels();
        let intro = (0..=discovered_at).find(|&l| {
            levels[l]
                .assumptions()
                .iter()
                .any(|a| a.id == assumption_id)
        })?;
        let mut lineage: BTreeSet<String> = BTreeSet::from([assumption_id.to_string()]);
        loop {
            let before = lineage.len();
            for level in &levels[intro..=discovered_at] {
                for a in level.assumptions() {
                    if a.strength_parent.as_ref().is_some_and(|p| lineage.contains(p)) {
                        lineage.insert(a.id.clone());
                    }
                }
            }
            if lineage.len() == before {
                break;
            }
        }
        let mut out = BTreeMap::new();
        for (l, level) in levels.iter().enumerate().take(discovered_at + 1).skip(intro) {
            let session = project.session(level.session_ref()).ok()?;
            let reqs = session.requirements();
            let mut entries = Vec::new();
            for prop in level.lprop() {
                let depends = level
                    .assumptions()
                    .iter()
                    .any(|a| lineage.contains(&a.id) && a.supports.contains(prop));
                if !depends {
                    continue;
                }
                let links: Vec<&Interaction> = project.properties()[prop]
                    .links
                    .iter()
                    .filter(|link| reqs.requirements().contains(link))
                    .collect();
                let tests: Vec<Scenario> = session
                    .executable()
                    .iter()
                    .filter(|s| session.state_of(s) == hcatd_core::TestState::Validated)
                    .filter(|s| {
                        links
                            .iter()
                            .any(|link| link.pairs().iter().all(|&(p, v)| s.values()[p] == v))
                    })
                    .cloned()
                    .collect();
                entries.push((prop.clone(), tests));
            }
            if !entries.is_empty() {
                out.insert(l, entries);
            }
        }
        Some(out)
    }
}

/// Random universe of properties linked to random interactions of `model`.
pub fn random_properties(rng: &mut StdRng, spec: &ModelSpec, count: usize) -> Vec<Property> {
    (0..count)
        .map(|i| {
            let links = (0..rng.gen_range(0..4))
                .map(|_| to_interaction(&random_interaction(rng, spec)))
                .filter(|l| !l.is_empty())
                .collect();
            Property {
                id: format!("p{i}"),
                description: format!("property {i}"),
                links,
            }
        })
        .collect()
}

fn random_subset(rng: &mut StdRng, items: &[String], prob: f64) -> BTreeSet<String> {
    items.iter().filter(|_| rng.gen_bool(prob)).cloned().collect()
}

fn random_assumptions(
    rng: &mut StdRng,
    props: &[String],
    prefix: &str,
    parents: &[String],
) -> Vec<Assumption> {
    (0..rng.gen_range(0..3))
        .map(|i| {
            let mut a = Assumption::new(format!("{prefix}{i}"), format!("assumption {prefix}{i}"))
                .supporting(random_subset(rng, props, 0.4));
            if !parents.is_empty() && rng.gen_bool(0.4) {
                a = a.refining(parents.choose(rng).expect("non-empty").clone());
            }
            a
        })
        .collect()
}

/// One random mutation of a project's level chain; errors are expected
/// for some of them and returned to the caller.
pub fn random_level_mutation(
    rng: &mut StdRng,
    project: &mut Project,
    step: usize,
) -> Result<(), hcatd_core::LevelError> {
    let props: Vec<String> = project.properties().keys().cloned().collect();
    let metas = [MetaLevel::Abstract, MetaLevel::Virtual, MetaLevel::CyberPhysical];
    if project.levels().is_empty() {
        let lprop = random_subset(rng, &props, 0.3);
        let tracked = random_subset(rng, &props, 0.3);
        let assumptions = random_assumptions(rng, &props, &format!("s{step}a"), &[]);
        return project
            .create_level(0, *metas.choose(rng).unwrap(), lprop, tracked, assumptions)
            .map(|_| ());
    }
    let last = project.levels().len() - 1;
    match rng.gen_range(0..5) {
        0 => {
            // Direct creation with arbitrary sets, often invalid.
            let index = if rng.gen_bool(0.8) { last + 1 } else { rng.gen_range(0..=last + 2) };
            let lprop = random_subset(rng, &props, 0.5);
            let tracked = random_subset(rng, &props, 0.3);
            project
                .create_level(index, *metas.choose(rng).unwrap(), lprop, tracked, vec![])
                .map(|_| ())
        }
        1 => {
            let session = project.levels()[last].session_ref().to_string();
            let s = project.session(&session)?;
            let candidates: Vec<Scenario> = s.uncertain();
            if let Some(pick) = candidates.choose(rng).cloned() {
                project.session_mut(&session)?.add_test(pick)?;
            }
            Ok(())
        }
        _ => {
            let from = if rng.gen_bool(0.9) { last } else { rng.gen_range(0..=last) };
            let abstr: Vec<String> = project.abstr(from)?.into_iter().collect();
            let mut promote = random_subset(rng, &abstr, 0.4);
            if rng.gen_bool(0.15) {
                promote.insert(props.choose(rng).unwrap().clone());
            }
            let previous: Vec<String> = project.levels()[from]
                .assumptions()
                .iter()
                .map(|a| a.id.clone())
                .collect();
            let edits = AssumptionEdits {
                remove: random_subset(rng, &previous, 0.3).into_iter().collect(),
                add: random_assumptions(rng, &props, &format!("s{step}a"), &previous),
            };
            let meta = if rng.gen_bool(0.3) { Some(*metas.choose(rng).unwrap()) } else { None };
            project.refine_level(from, promote, edits, meta).map(|_| ())
        }
    }
}

/// Tester with a hidden ground truth: a test is accepted iff the hidden
/// restriction holds on it; suggested restrictions are accepted at random.
pub struct ScriptedTester {
    pub truth: ModelSpec,
    pub rng: StdRng,
    pub accept_suggestions: f64,
}

impl ScriptedTester {
    pub fn new(spec: &ModelSpec, seed: u64) -> Self {
        let mut rng = rng(seed);
        let hidden = random_expr(&mut rng, &spec.domains, 1);
        ScriptedTester {
            truth: spec.with_restriction(hidden),
            rng,
            accept_suggestions: 0.5,
        }
    }

    /// Answers up to `steps` queries, picking among the top few. Stops
    /// early when no query is open. Returns the number answered.
    pub fn drive(&mut self, session: &mut hcatd_core::Session, steps: usize) -> usize {
        use hcatd_core::{Answer, QueryCandidate, SessionError};
        let mut answered = 0;
        for _ in 0..steps {
            let queries = session.next_queries(3);
            let Some(q) = queries.choose(&mut self.rng).cloned() else {
                break;
            };
            let answer = match &q.candidate {
                QueryCandidate::Test(s) => {
                    if self.truth.holds(s.values()) {
                        Answer::Accept
                    } else {
                        Answer::Reject
                    }
                }
                QueryCandidate::Restriction(_) => {
                    if self.rng.gen_bool(self.accept_suggestions) {
                        Answer::Accept
                    } else {
                        Answer::Reject
                    }
                }
            };
            match session.answer_query(&q.id, answer) {
                Ok(()) => answered += 1,
                Err(SessionError::RestrictionConflict { .. }) => {
                    session
                        .answer_query(&q.id, Answer::Reject)
                        .expect("rejecting an open suggestion succeeds");
                    answered += 1;
                }
                Err(e) => panic!("unexpected answer error: {e}"),
            }
        }
        answered
    }
}

/// A random project: model, properties, a strength-2 "main" session driven
/// by a scripted tester, and a few levels built by random mutations.
pub fn random_project(seed: u64) -> Project {
    let mut rng = rng(seed);
    let spec = loop {
        let s = random_model(&mut rng, 4, 3, 2);
        if !oracle::space(&s).is_empty() {
            break s;
        }
    };
    let model = spec.build();
    let count = rng.gen_range(1..6);
    let props = random_properties(&mut rng, &spec, count);
    let mut project = Project::new(model.clone(), props).expect("valid properties");
    let t = spec.domains.len().min(2);
    let mut main = hcatd_core::Session::open(model, hcatd_core::RequirementSpec::Strength(t), vec![])
        .expect("session opens");
    let mut tester = ScriptedTester::new(&spec, seed ^ 0x5eed);
    let steps = rng.gen_range(0..6);
    tester.drive(&mut main, steps);
    project.insert_session(hcatd_core::MAIN_SESSION, main);
    for step in 0..rng.gen_range(0..6) {
        let _ = random_level_mutation(&mut rng, &mut project, step);
    }
    project
}
