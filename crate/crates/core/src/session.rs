//! Tester sessions: the Validated/Rejected/Uncertain classification of the
//! scenario space, query generation, and the replayable action log.
//!
//! Only explicit classifications are stored. Executable scenarios without an
//! entry are Uncertain; scenarios outside the executable space count as
//! rejected by the model.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::coverage::{
    t_wise_requirements, validate_plan, CoverageError, CoverageReport, CoverageRequirements,
    RequirementIndex, TestPlan,
};
use crate::model::{CombinatorialModel, Interaction, ModelError, Scenario};
use crate::restriction::{CompareOp, Operand, Restriction, RestrictionAst};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestState {
    Validated,
    Rejected,
    Uncertain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Answer {
    Accept,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QueryKind {
    ConfirmTest,
    SuggestRestriction,
}

impl TestState {
    pub fn as_str(self) -> &'static str {
        match self {
            TestState::Validated => "validated",
            TestState::Rejected => "rejected",
            TestState::Uncertain => "uncertain",
        }
    }
}

impl Answer {
    pub fn as_str(self) -> &'static str {
        match self {
            Answer::Accept => "accept",
            Answer::Reject => "reject",
        }
    }

    pub fn parse(s: &str) -> Option<Answer> {
        match s.trim() {
            "accept" => Some(Answer::Accept),
            "reject" => Some(Answer::Reject),
            _ => None,
        }
    }
}

impl QueryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            QueryKind::ConfirmTest => "confirm-test",
            QueryKind::SuggestRestriction => "suggest-restriction",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum QueryCandidate {
    Test(Scenario),
    Restriction(Restriction),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Query {
    pub id: String,
    pub candidate: QueryCandidate,
    /// Uncovered requirements an affirmative answer resolves.
    pub motivating_requirements: Vec<Interaction>,
    pub rank_score: usize,
}

impl Query {
    pub fn kind(&self) -> QueryKind {
        match self.candidate {
            QueryCandidate::Test(_) => QueryKind::ConfirmTest,
            QueryCandidate::Restriction(_) => QueryKind::SuggestRestriction,
        }
    }

    fn new(model: &CombinatorialModel, candidate: QueryCandidate, motivating: Vec<Interaction>) -> Self {
        let mut hasher = Sha256::new();
        match &candidate {
            QueryCandidate::Test(s) => {
                hasher.update(b"confirm-test\0");
                hasher.update(model.format_scenario(s).as_bytes());
            }
            QueryCandidate::Restriction(r) => {
                hasher.update(b"suggest-restriction\0");
                hasher.update(r.source().as_bytes());
            }
        }
        let digest = hasher.finalize();
        Query {
            id: format!("q-{}", &hex::encode(digest)[..12]),
            candidate,
            rank_score: motivating.len(),
            motivating_requirements: motivating,
        }
    }
}

/// How a session derives its coverage requirements from the current model.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RequirementSpec {
    /// All extendable interactions of the given size.
    Strength(usize),
    /// A fixed list, filtered to the extendable members.
    Interactions(Vec<Interaction>),
}

impl RequirementSpec {
    pub fn resolve(&self, model: &CombinatorialModel) -> Result<CoverageRequirements, CoverageError> {
        match self {
            RequirementSpec::Strength(t) => t_wise_requirements(model, *t),
            RequirementSpec::Interactions(list) => {
                CoverageRequirements::from_interactions(model, list.iter().cloned())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LogEvent {
    Answered { query: Query, answer: Answer },
    TestAdded { scenario: Scenario },
    RestrictionApplied { source: String },
    /// A Validated test returned to Uncertain, e.g. after an environment
    /// assumption it relied on was contradicted.
    Demoted { scenario: Scenario, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LogEntry {
    pub event: LogEvent,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Coverage(#[from] CoverageError),
    #[error("scenario `{0}` is not executable in the current model")]
    NotExecutable(String),
    #[error("scenario `{0}` was rejected and stays rejected in this session")]
    AlreadyRejected(String),
    #[error("unknown query `{0}`")]
    UnknownQuery(String),
    #[error("query `{0}` has already been answered")]
    AlreadyAnswered(String),
    #[error("restriction `{restriction}` would exclude validated tests: {}", conflicting.join("; "))]
    RestrictionConflict {
        restriction: String,
        conflicting: Vec<String>,
    },
    #[error("replayed session diverges from the recorded one: {0}")]
    ReplayMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    base_model: CombinatorialModel,
    spec: RequirementSpec,
    initial_tests: Vec<Scenario>,
    model: CombinatorialModel,
    requirements: CoverageRequirements,
    executable: Vec<Scenario>,
    states: BTreeMap<Scenario, TestState>,
    suppressed: BTreeSet<String>,
    log: Vec<LogEntry>,
}

fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or_default()
}

impl Session {
    /// Opens a session. `initial_tests` become Validated; every other
    /// executable scenario starts Uncertain.
    pub fn open(
        model: CombinatorialModel,
        spec: RequirementSpec,
        initial_tests: Vec<Scenario>,
    ) -> Result<Self, SessionError> {
        let requirements = spec.resolve(&model)?;
        let executable = model.enumerate_scenarios()?;
        let mut states = BTreeMap::new();
        let mut initial = Vec::new();
        for s in initial_tests {
            model.check_scenario(&s)?;
            if executable.binary_search(&s).is_err() {
                return Err(SessionError::NotExecutable(model.format_scenario(&s)));
            }
            if states.insert(s.clone(), TestState::Validated).is_none() {
                initial.push(s);
            }
        }
        Ok(Session {
            base_model: model.clone(),
            spec,
            initial_tests: initial,
            model,
            requirements,
            executable,
            states,
            suppressed: BTreeSet::new(),
            log: Vec::new(),
        })
    }

    pub fn model(&self) -> &CombinatorialModel {
        &self.model
    }

    /// The model the session was opened with, before any restriction edits.
    pub fn base_model(&self) -> &CombinatorialModel {
        &self.base_model
    }

    pub fn spec(&self) -> &RequirementSpec {
        &self.spec
    }

    pub fn initial_tests(&self) -> &[Scenario] {
        &self.initial_tests
    }

    pub fn requirements(&self) -> &CoverageRequirements {
        &self.requirements
    }

    /// The executable space of the current model, in lexicographic order.
    pub fn executable(&self) -> &[Scenario] {
        &self.executable
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn suppressed(&self) -> &BTreeSet<String> {
        &self.suppressed
    }

    /// Explicit tester classifications, including rejected scenarios that
    /// have since left the executable space.
    pub fn explicit_states(&self) -> &BTreeMap<Scenario, TestState> {
        &self.states
    }

    pub fn is_executable(&self, s: &Scenario) -> bool {
        self.executable.binary_search(s).is_ok()
    }

    /// State of `s`; scenarios outside the executable space are Rejected.
    pub fn state_of(&self, s: &Scenario) -> TestState {
        if !self.is_executable(s) {
            return TestState::Rejected;
        }
        self.states.get(s).copied().unwrap_or(TestState::Uncertain)
    }

    pub fn is_rejected_by_model(&self, s: &Scenario) -> bool {
        !self.is_executable(s)
    }

    fn in_state(&self, state: TestState) -> Vec<Scenario> {
        self.executable
            .iter()
            .filter(|s| self.state_of(s) == state)
            .cloned()
            .collect()
    }

    pub fn validated(&self) -> Vec<Scenario> {
        self.in_state(TestState::Validated)
    }

    pub fn rejected(&self) -> Vec<Scenario> {
        self.in_state(TestState::Rejected)
    }

    pub fn uncertain(&self) -> Vec<Scenario> {
        self.in_state(TestState::Uncertain)
    }

    /// Number of executable scenarios the tester has not classified.
    pub fn uncertainty(&self) -> usize {
        self.executable
            .iter()
            .filter(|s| !self.states.contains_key(*s))
            .count()
    }

    /// The plan formed by the Validated tests.
    pub fn plan(&self) -> TestPlan {
        TestPlan {
            model: self.model.clone(),
            requirements: self.requirements.clone(),
            tests: self.validated(),
        }
    }

    pub fn coverage_report(&self) -> CoverageReport {
        validate_plan(&self.plan())
    }

    fn uncovered(&self) -> Vec<Interaction> {
        self.coverage_report().uncovered.into_iter().collect()
    }

    /// Uncovered requirements whose every executable extension has been
    /// rejected, so no Validated test can ever cover them without a model
    /// edit.
    pub fn unreachable_requirements(&self) -> Vec<Interaction> {
        self.uncovered()
            .into_iter()
            .filter(|r| {
                self.executable
                    .iter()
                    .filter(|s| s.covers(r))
                    .all(|s| self.states.get(s) == Some(&TestState::Rejected))
            })
            .collect()
    }

    /// Every query the session would currently pose, best first.
    pub fn open_queries(&self) -> Vec<Query> {
        let uncovered = self.uncovered();
        if uncovered.is_empty() {
            return Vec::new();
        }
        let index = RequirementIndex::new(&uncovered);
        let mut queries = Vec::new();
        for s in &self.executable {
            if self.states.contains_key(s) {
                continue;
            }
            let mut motivating = Vec::new();
            index.for_each_covered(s, |i| motivating.push(uncovered[i].clone()));
            if !motivating.is_empty() {
                motivating.sort();
                queries.push(Query::new(&self.model, QueryCandidate::Test(s.clone()), motivating));
            }
        }
        queries.extend(self.suggestions(&uncovered));
        queries.sort_by(|a, b| {
            b.rank_score
                .cmp(&a.rank_score)
                .then(a.kind().cmp(&b.kind()))
                .then_with(|| match (&a.candidate, &b.candidate) {
                    (QueryCandidate::Test(x), QueryCandidate::Test(y)) => x.cmp(y),
                    (QueryCandidate::Restriction(x), QueryCandidate::Restriction(y)) => {
                        x.source().cmp(y.source())
                    }
                    _ => std::cmp::Ordering::Equal,
                })
        });
        queries
    }

    pub fn next_queries(&self, limit: usize) -> Vec<Query> {
        let mut queries = self.open_queries();
        queries.truncate(limit.max(1));
        queries
    }

    /// Restriction suggestions. A parameter-equality suggestion `A = B`
    /// fires for parameters with identical domains when at least one test is
    /// Validated, every Validated test has `A = B`, and some executable
    /// `A != B` scenario was Rejected. Remaining uncovered requirements
    /// whose executable extensions were all Rejected get a narrow exclusion.
    fn suggestions(&self, uncovered: &[Interaction]) -> Vec<Query> {
        let params = self.model.parameters();
        let validated = self.validated();
        let rejected = self.rejected();
        let mut out: Vec<Query> = Vec::new();
        let mut explained: BTreeSet<Interaction> = BTreeSet::new();

        let same_value = |s: &Scenario, a: usize, b: usize| {
            params[a].values()[s.values()[a]] == params[b].values()[s.values()[b]]
        };
        if !validated.is_empty() {
            for a in 0..params.len() {
                for b in a + 1..params.len() {
                    let mut da: Vec<&String> = params[a].values().iter().collect();
                    let mut db: Vec<&String> = params[b].values().iter().collect();
                    da.sort();
                    db.sort();
                    if da != db {
                        continue;
                    }
                    if !validated.iter().all(|s| same_value(s, a, b)) {
                        continue;
                    }
                    if !rejected.iter().any(|s| !same_value(s, a, b)) {
                        continue;
                    }
                    let source = format!("{} = {}", params[a].name(), params[b].name());
                    let Ok(restriction) = self.model.parse_restriction(&source) else {
                        continue;
                    };
                    if let Some(q) = self.suggestion_query(restriction, uncovered) {
                        explained.extend(q.motivating_requirements.iter().cloned());
                        out.push(q);
                    }
                }
            }
        }

        for r in self.unreachable_requirements() {
            if explained.contains(&r) {
                continue;
            }
            let restriction = Restriction::from_ast(exclusion(&r), params);
            if let Some(q) = self.suggestion_query(restriction, uncovered) {
                explained.extend(q.motivating_requirements.iter().cloned());
                out.push(q);
            }
        }
        out
    }

    fn suggestion_query(&self, restriction: Restriction, uncovered: &[Interaction]) -> Option<Query> {
        if self.suppressed.contains(restriction.source()) {
            return None;
        }
        if self
            .model
            .restrictions()
            .iter()
            .any(|r| r.source() == restriction.source())
        {
            return None;
        }
        let mut refined = self.model.clone();
        refined.push_restriction(restriction.clone());
        if self.states.iter().any(|(s, st)| *st == TestState::Validated && !refined.is_executable(s)) {
            return None;
        }
        let motivating: Vec<Interaction> = uncovered
            .iter()
            .filter(|r| !refined.is_extendable(r).unwrap_or(true))
            .cloned()
            .collect();
        if motivating.is_empty() {
            return None;
        }
        Some(Query::new(
            &self.model,
            QueryCandidate::Restriction(restriction),
            motivating,
        ))
    }

    pub fn answer_query(&mut self, query_id: &str, answer: Answer) -> Result<(), SessionError> {
        self.answer_query_at(query_id, answer, now_millis())
    }

    fn answer_query_at(&mut self, query_id: &str, answer: Answer, timestamp: u64) -> Result<(), SessionError> {
        let Some(query) = self.open_queries().into_iter().find(|q| q.id == query_id) else {
            let answered = self.log.iter().any(
                |e| matches!(&e.event, LogEvent::Answered { query, .. } if query.id == query_id),
            );
            return Err(if answered {
                SessionError::AlreadyAnswered(query_id.to_string())
            } else {
                SessionError::UnknownQuery(query_id.to_string())
            });
        };
        match (&query.candidate, answer) {
            (QueryCandidate::Test(s), Answer::Accept) => {
                self.states.insert(s.clone(), TestState::Validated);
            }
            (QueryCandidate::Test(s), Answer::Reject) => {
                self.states.insert(s.clone(), TestState::Rejected);
            }
            (QueryCandidate::Restriction(r), Answer::Accept) => {
                self.install_restriction(r.clone())?;
            }
            (QueryCandidate::Restriction(r), Answer::Reject) => {
                self.suppressed.insert(r.source().to_string());
            }
        }
        self.log.push(LogEntry {
            event: LogEvent::Answered { query, answer },
            timestamp,
        });
        Ok(())
    }

    /// Adds a restriction to the session model. Refused, leaving the session
    /// unchanged, if a Validated test would become non-executable.
    pub fn apply_restriction(&mut self, source: &str) -> Result<(), SessionError> {
        self.apply_restriction_at(source, now_millis())
    }

    fn apply_restriction_at(&mut self, source: &str, timestamp: u64) -> Result<(), SessionError> {
        let restriction = self.model.parse_restriction(source)?;
        self.install_restriction(restriction)?;
        self.log.push(LogEntry {
            event: LogEvent::RestrictionApplied {
                source: source.trim().to_string(),
            },
            timestamp,
        });
        Ok(())
    }

    fn install_restriction(&mut self, restriction: Restriction) -> Result<(), SessionError> {
        let mut refined = self.model.clone();
        refined.push_restriction(restriction.clone());
        let conflicting: Vec<String> = self
            .states
            .iter()
            .filter(|(s, st)| **st == TestState::Validated && !refined.is_executable(s))
            .map(|(s, _)| self.model.format_scenario(s))
            .collect();
        if !conflicting.is_empty() {
            return Err(SessionError::RestrictionConflict {
                restriction: restriction.source().to_string(),
                conflicting,
            });
        }
        let requirements = self.spec.resolve(&refined)?;
        let executable = refined.enumerate_scenarios()?;
        self.model = refined;
        self.requirements = requirements;
        self.executable = executable;
        Ok(())
    }

    /// Marks an executable scenario Validated. Idempotent.
    pub fn add_test(&mut self, s: Scenario) -> Result<(), SessionError> {
        self.add_test_at(s, now_millis())
    }

    fn add_test_at(&mut self, s: Scenario, timestamp: u64) -> Result<(), SessionError> {
        self.model.check_scenario(&s)?;
        if !self.is_executable(&s) {
            return Err(SessionError::NotExecutable(self.model.format_scenario(&s)));
        }
        match self.states.get(&s) {
            Some(TestState::Validated) => return Ok(()),
            Some(TestState::Rejected) => {
                return Err(SessionError::AlreadyRejected(self.model.format_scenario(&s)))
            }
            _ => {}
        }
        self.states.insert(s.clone(), TestState::Validated);
        self.log.push(LogEntry {
            event: LogEvent::TestAdded { scenario: s },
            timestamp,
        });
        Ok(())
    }

    /// Returns Validated tests to Uncertain. Scenarios that are not
    /// currently Validated are skipped. Returns the demoted scenarios.
    pub fn demote(&mut self, scenarios: &[Scenario], reason: &str) -> Vec<Scenario> {
        self.demote_at(scenarios, reason, now_millis())
    }

    fn demote_at(&mut self, scenarios: &[Scenario], reason: &str, timestamp: u64) -> Vec<Scenario> {
        let mut demoted = Vec::new();
        for s in scenarios {
            if self.states.get(s) == Some(&TestState::Validated) {
                self.states.remove(s);
                self.log.push(LogEntry {
                    event: LogEvent::Demoted {
                        scenario: s.clone(),
                        reason: reason.to_string(),
                    },
                    timestamp,
                });
                demoted.push(s.clone());
            }
        }
        demoted
    }

    /// Re-runs the log from the opening state.
    pub fn replay(&self) -> Result<Session, SessionError> {
        Session::rebuild(
            self.base_model.clone(),
            self.spec.clone(),
            self.initial_tests.clone(),
            &self.log,
        )
    }

    /// Opens a session and applies `log` to it.
    pub fn rebuild(
        base_model: CombinatorialModel,
        spec: RequirementSpec,
        initial_tests: Vec<Scenario>,
        log: &[LogEntry],
    ) -> Result<Session, SessionError> {
        let mut session = Session::open(base_model, spec, initial_tests)?;
        for entry in log {
            let before = session.log.len();
            match &entry.event {
                LogEvent::Answered { query, answer } => {
                    session.answer_query_at(&query.id, *answer, entry.timestamp)?;
                    let LogEvent::Answered { query: replayed, .. } = &session.log[before].event else {
                        unreachable!()
                    };
                    if replayed != query {
                        return Err(SessionError::ReplayMismatch(format!(
                            "query {} was recorded with different content",
                            query.id
                        )));
                    }
                }
                LogEvent::TestAdded { scenario } => {
                    session.add_test_at(scenario.clone(), entry.timestamp)?
                }
                LogEvent::RestrictionApplied { source } => {
                    session.apply_restriction_at(source, entry.timestamp)?
                }
                LogEvent::Demoted { scenario, reason } => {
                    session.demote_at(std::slice::from_ref(scenario), reason, entry.timestamp);
                }
            }
            if session.log.len() != before + 1 {
                return Err(SessionError::ReplayMismatch(format!(
                    "log entry {before} had no effect"
                )));
            }
        }
        Ok(session)
    }
}

/// `!(A = a && B = b && …)` for the bindings of `c`.
fn exclusion(c: &Interaction) -> RestrictionAst {
    let mut terms = c.pairs().iter().map(|&(param, value)| RestrictionAst::Compare {
        param,
        op: CompareOp::Eq,
        rhs: Operand::Value(value),
    });
    let first = terms.next().expect("requirements are non-empty");
    let conj = terms.fold(first, |acc, t| RestrictionAst::And(Box::new(acc), Box::new(t)));
    RestrictionAst::Not(Box::new(conj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Parameter;

    fn robots() -> CombinatorialModel {
        let pos = ["pos1", "pos2", "pos3"];
        let grip = ["open", "close"];
        CombinatorialModel::new(vec![
            Parameter::new("P1", pos).unwrap(),
            Parameter::new("P2", pos).unwrap(),
            Parameter::new("GM1", grip).unwrap(),
            Parameter::new("GM2", grip).unwrap(),
        ])
        .unwrap()
        .with_restriction("GM1 = close && GM2 = open")
        .unwrap()
    }

    fn sc(m: &CombinatorialModel, p1: &str, p2: &str) -> Scenario {
        m.scenario(&[p1, p2, "close", "open"]).unwrap()
    }

    fn robot_session() -> Session {
        let m = robots();
        let tests = vec![sc(&m, "pos1", "pos1"), sc(&m, "pos2", "pos2")];
        Session::open(m, RequirementSpec::Strength(2), tests).unwrap()
    }

    #[test]
    fn open_marks_initial_tests_validated() {
        let s = robot_session();
        assert_eq!(s.validated().len(), 2);
        assert_eq!(s.uncertain().len(), 7);
        assert_eq!(s.uncertainty(), 7);
        let m = robots();
        let empty = Session::open(m.clone(), RequirementSpec::Strength(2), vec![]).unwrap();
        assert_eq!(empty.uncertainty(), 9);
        let bad = m.scenario(&["pos1", "pos1", "open", "open"]).unwrap();
        assert!(matches!(
            Session::open(m.clone(), RequirementSpec::Strength(2), vec![bad.clone()]),
            Err(SessionError::NotExecutable(_))
        ));
        assert_eq!(empty.state_of(&bad), TestState::Rejected);
        assert!(empty.is_rejected_by_model(&bad));
    }

    #[test]
    fn top_query_confirms_the_missing_diagonal() {
        let s = robot_session();
        let queries = s.next_queries(3);
        assert_eq!(queries.len(), 3);
        let top = &queries[0];
        assert_eq!(top.kind(), QueryKind::ConfirmTest);
        assert_eq!(top.candidate, QueryCandidate::Test(sc(s.model(), "pos3", "pos3")));
        assert_eq!(top.rank_score, 5);
        assert!(queries.iter().all(|q| q.kind() == QueryKind::ConfirmTest));
    }

    #[test]
    fn accepting_the_top_query() {
        let mut s = robot_session();
        let before = s.coverage_report().uncovered.len();
        let top = s.next_queries(1).remove(0);
        s.answer_query(&top.id, Answer::Accept).unwrap();
        assert_eq!(s.validated().len(), 3);
        assert_eq!(s.coverage_report().uncovered.len(), before - 5);
        assert_eq!(
            s.answer_query(&top.id, Answer::Accept),
            Err(SessionError::AlreadyAnswered(top.id.clone()))
        );
        assert_eq!(
            s.answer_query("q-nope", Answer::Accept),
            Err(SessionError::UnknownQuery("q-nope".into()))
        );
    }

    fn answer_for(s: &mut Session, scenario: &Scenario, answer: Answer) {
        let q = s
            .open_queries()
            .into_iter()
            .find(|q| q.candidate == QueryCandidate::Test(scenario.clone()))
            .expect("query for scenario");
        s.answer_query(&q.id, answer).unwrap();
    }

    #[test]
    fn rejecting_flags_unreachable_requirement() {
        let mut s = robot_session();
        let m = s.model().clone();
        answer_for(&mut s, &sc(&m, "pos1", "pos2"), Answer::Reject);
        assert_eq!(s.state_of(&sc(&m, "pos1", "pos2")), TestState::Rejected);
        let pair = m.parse_interaction("P1:pos1,P2:pos2").unwrap();
        assert_eq!(s.unreachable_requirements(), vec![pair.clone()]);
        // Rejected is terminal.
        assert!(matches!(
            s.add_test(sc(&m, "pos1", "pos2")),
            Err(SessionError::AlreadyRejected(_))
        ));
    }

    #[test]
    fn generalization_suggests_parameter_equality() {
        let mut s = robot_session();
        let m = s.model().clone();
        let off: Vec<Scenario> = m
            .enumerate_scenarios()
            .unwrap()
            .into_iter()
            .filter(|x| x.values()[0] != x.values()[1])
            .collect();
        assert_eq!(off.len(), 6);
        for x in &off {
            answer_for(&mut s, x, Answer::Reject);
        }
        let queries = s.next_queries(10);
        let suggestion = queries
            .iter()
            .find(|q| matches!(&q.candidate, QueryCandidate::Restriction(r) if r.source() == "P1 = P2"))
            .expect("P1 = P2 suggested");
        assert_eq!(suggestion.rank_score, 6);
        // The equality explains every blocked pair, so no narrow exclusions.
        assert_eq!(
            queries.iter().filter(|q| q.kind() == QueryKind::SuggestRestriction).count(),
            1
        );
        let id = suggestion.id.clone();
        s.answer_query(&id, Answer::Accept).unwrap();
        assert_eq!(s.requirements().len(), 16);
        assert_eq!(s.uncertainty(), 1);
        assert!(s
            .coverage_report()
            .uncovered
            .iter()
            .all(|r| r.get(0) == Some(2) || r.get(1) == Some(2)));
    }

    #[test]
    fn narrow_exclusion_and_suppression() {
        let m = robots();
        let mut s = Session::open(m.clone(), RequirementSpec::Strength(2), vec![sc(&m, "pos1", "pos1")]).unwrap();
        // A mixed validated set blocks the equality rule.
        answer_for(&mut s, &sc(&m, "pos1", "pos2"), Answer::Accept);
        answer_for(&mut s, &sc(&m, "pos2", "pos3"), Answer::Reject);
        let suggestions: Vec<Query> = s
            .open_queries()
            .into_iter()
            .filter(|q| q.kind() == QueryKind::SuggestRestriction)
            .collect();
        assert_eq!(suggestions.len(), 1);
        let QueryCandidate::Restriction(r) = &suggestions[0].candidate else { unreachable!() };
        assert_eq!(r.source(), "!(P1 = pos2 && P2 = pos3)");
        assert_eq!(suggestions[0].rank_score, 1);
        s.answer_query(&suggestions[0].id, Answer::Reject).unwrap();
        assert!(s
            .open_queries()
            .iter()
            .all(|q| q.kind() == QueryKind::ConfirmTest));
        assert!(s.suppressed().contains("!(P1 = pos2 && P2 = pos3)"));
    }

    #[test]
    fn restriction_edits() {
        let mut s = robot_session();
        let m = s.model().clone();
        s.apply_restriction("P1 = P2").unwrap();
        assert_eq!(s.validated().len(), 2);
        assert_eq!(s.uncertainty(), 1);
        assert_eq!(s.requirements().len(), 16);
        assert_eq!(s.state_of(&sc(&m, "pos1", "pos2")), TestState::Rejected);

        let snapshot = s.clone();
        match s.apply_restriction("GM1 = open") {
            Err(SessionError::RestrictionConflict { conflicting, .. }) => assert_eq!(
                conflicting,
                vec![
                    "P1:pos1,P2:pos1,GM1:close,GM2:open".to_string(),
                    "P1:pos2,P2:pos2,GM1:close,GM2:open".to_string()
                ]
            ),
            other => panic!("{other:?}"),
        }
        assert_eq!(s, snapshot);

        s.apply_restriction("GM1 = close || GM1 = open").unwrap();
        assert_eq!(s.model().restrictions().len(), 3);
        assert_eq!(s.executable(), snapshot.executable());
        assert_eq!(s.requirements(), snapshot.requirements());

        s.add_test(sc(&m, "pos3", "pos3")).unwrap();
        assert!(s.coverage_report().valid);
        assert_eq!(s.uncertainty(), 0);
        assert!(s.next_queries(5).is_empty());
    }

    #[test]
    fn add_test_rules() {
        let mut s = robot_session();
        let m = s.model().clone();
        let log_len = s.log().len();
        s.add_test(sc(&m, "pos1", "pos1")).unwrap();
        assert_eq!(s.log().len(), log_len);
        assert_eq!(s.validated().len(), 2);
        let bad = m.scenario(&["pos1", "pos1", "open", "open"]).unwrap();
        assert!(matches!(s.add_test(bad), Err(SessionError::NotExecutable(_))));
    }

    #[test]
    fn replay_reproduces_state() {
        let mut s = robot_session();
        let m = s.model().clone();
        answer_for(&mut s, &sc(&m, "pos1", "pos2"), Answer::Reject);
        s.apply_restriction("P1 = P2").unwrap();
        let top = s.next_queries(1).remove(0);
        s.answer_query(&top.id, Answer::Accept).unwrap();
        s.demote(&[sc(&m, "pos1", "pos1")], "assumption a1 contradicted");
        assert_eq!(s.replay().unwrap(), s);
    }
}
