//! Abstraction levels over a fixed property universe.
//!
//! Each level models a subset `lprop` of the universe; the abstracted set is
//! always computed as the complement and never stored, so the partition of
//! the universe holds by construction. Properties link to coverage
//! requirements (interactions), and every level owns a [`Session`] whose
//! requirements are the links of its modelled properties.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::coverage::{CoverageError, CoverageRequirements};
use crate::model::{CombinatorialModel, Interaction, ModelError, Scenario};
use crate::session::{RequirementSpec, Session, SessionError};

/// Ordered stages of the testing process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetaLevel {
    Abstract,
    Virtual,
    CyberPhysical,
}

impl MetaLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            MetaLevel::Abstract => "abstract",
            MetaLevel::Virtual => "virtual",
            MetaLevel::CyberPhysical => "cyber-physical",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "abstract" => Some(MetaLevel::Abstract),
            "virtual" => Some(MetaLevel::Virtual),
            "cyber-physical" => Some(MetaLevel::CyberPhysical),
            _ => None,
        }
    }
}

impl fmt::Display for MetaLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Property {
    pub id: String,
    pub description: String,
    /// Coverage requirements exercising the property.
    pub links: Vec<Interaction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssumptionStatus {
    Assumed,
    Confirmed,
    Contradicted,
}

impl AssumptionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            AssumptionStatus::Assumed => "assumed",
            AssumptionStatus::Confirmed => "confirmed",
            AssumptionStatus::Contradicted => "contradicted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "assumed" => Some(AssumptionStatus::Assumed),
            "confirmed" => Some(AssumptionStatus::Confirmed),
            "contradicted" => Some(AssumptionStatus::Contradicted),
            _ => None,
        }
    }
}

/// An environment assumption in force at a level.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assumption {
    pub id: String,
    pub statement: String,
    /// Assumption of the previous level that this one strengthens or weakens.
    pub strength_parent: Option<String>,
    pub status: AssumptionStatus,
    /// Properties whose tests rely on this assumption.
    pub supports: BTreeSet<String>,
}

impl Assumption {
    pub fn new(id: impl Into<String>, statement: impl Into<String>) -> Self {
        Assumption {
            id: id.into(),
            statement: statement.into(),
            strength_parent: None,
            status: AssumptionStatus::Assumed,
            supports: BTreeSet::new(),
        }
    }

    pub fn refining(mut self, parent: impl Into<String>) -> Self {
        self.strength_parent = Some(parent.into());
        self
    }

    pub fn supporting<I, S>(mut self, properties: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.supports.extend(properties.into_iter().map(Into::into));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractionLevel {
    index: usize,
    meta_level: MetaLevel,
    lprop: BTreeSet<String>,
    tracked_abstr: BTreeSet<String>,
    assumptions: Vec<Assumption>,
    session_ref: String,
}

impl AbstractionLevel {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn meta_level(&self) -> MetaLevel {
        self.meta_level
    }

    pub fn lprop(&self) -> &BTreeSet<String> {
        &self.lprop
    }

    pub fn tracked_abstr(&self) -> &BTreeSet<String> {
        &self.tracked_abstr
    }

    /// Sorted by id.
    pub fn assumptions(&self) -> &[Assumption] {
        &self.assumptions
    }

    pub fn assumption(&self, id: &str) -> Option<&Assumption> {
        self.assumptions.iter().find(|a| a.id == id)
    }

    pub fn session_ref(&self) -> &str {
        &self.session_ref
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssumptionEdits {
    pub remove: Vec<String>,
    /// New or replacement assumptions; an id already present replaces it.
    pub add: Vec<Assumption>,
}

impl AssumptionEdits {
    pub fn is_empty(&self) -> bool {
        self.remove.is_empty() && self.add.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssumptionDiff {
    pub added: Vec<String>,
    pub removed: Vec<String>,
    /// `(previous id, new id)` for strengthened, weakened or reworded
    /// assumptions.
    pub modified: Vec<(String, String)>,
}

impl AssumptionDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.modified.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetestEntry {
    pub property: String,
    /// Validated tests covering the property's requirements at that level.
    pub tests: Vec<Scenario>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditReport {
    /// Abstracted properties nobody tracks.
    pub silently_abstracted: Vec<String>,
    /// Modelled properties no Validated test covers.
    pub coverage_debt: Vec<String>,
    /// Modelled properties without any reachable requirement link.
    pub untestable: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelRequirements {
    pub requirements: CoverageRequirements,
    /// Modelled properties that contribute no requirement.
    pub untestable: Vec<String>,
}

/// Property → requirement → test edges of one level, plus the
/// assumption → property dependencies in force there.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceGraph {
    pub property_requirements: BTreeMap<String, Vec<Interaction>>,
    pub requirement_tests: BTreeMap<Interaction, Vec<Scenario>>,
    pub assumption_properties: BTreeMap<String, BTreeSet<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LevelError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Coverage(#[from] CoverageError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("duplicate property `{0}`")]
    DuplicateProperty(String),
    #[error("properties not in the universe: {}", .0.join(", "))]
    NotInUniverse(Vec<String>),
    #[error("tracked properties are not abstracted at this level: {}", .0.join(", "))]
    TrackedNotAbstracted(Vec<String>),
    #[error("meta-level cannot go from {from} back to {to}")]
    MetaLevelRegression { from: MetaLevel, to: MetaLevel },
    #[error("next level index must be {expected}, got {got}")]
    BadIndex { expected: usize, got: usize },
    #[error("properties are not abstracted at level {level}: {}", props.join(", "))]
    PromoteNotAbstracted { level: usize, props: Vec<String> },
    #[error("level {level} drops properties modelled at the previous level: {}", props.join(", "))]
    DropsModelled { level: usize, props: Vec<String> },
    #[error("a refinement must promote properties or edit assumptions")]
    EmptyRefinement,
    #[error("only the last level ({last}) can be refined")]
    NotLastLevel { last: usize },
    #[error("no level {0}")]
    UnknownLevel(usize),
    #[error("unknown assumption `{0}`")]
    UnknownAssumption(String),
    #[error("duplicate assumption `{0}`")]
    DuplicateAssumption(String),
    #[error("assumption `{assumption}` refines `{parent}`, which the previous level does not have")]
    UnknownParent { assumption: String, parent: String },
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// A project: model, property universe, level chain and sessions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Project {
    model: CombinatorialModel,
    properties: BTreeMap<String, Property>,
    levels: Vec<AbstractionLevel>,
    sessions: BTreeMap<String, Session>,
}

/// Session used by plan-level commands when no level is selected.
pub const MAIN_SESSION: &str = "main";

impl Project {
    pub fn new(model: CombinatorialModel, properties: Vec<Property>) -> Result<Self, LevelError> {
        let mut map = BTreeMap::new();
        for mut p in properties {
            for link in &p.links {
                model.check_interaction(link)?;
            }
            p.links.sort();
            p.links.dedup();
            if map.contains_key(&p.id) {
                return Err(LevelError::DuplicateProperty(p.id));
            }
            map.insert(p.id.clone(), p);
        }
        Ok(Project {
            model,
            properties: map,
            levels: Vec::new(),
            sessions: BTreeMap::new(),
        })
    }

    pub fn model(&self) -> &CombinatorialModel {
        &self.model
    }

    pub fn properties(&self) -> &BTreeMap<String, Property> {
        &self.properties
    }

    pub fn levels(&self) -> &[AbstractionLevel] {
        &self.levels
    }

    pub fn level(&self, index: usize) -> Result<&AbstractionLevel, LevelError> {
        self.levels.get(index).ok_or(LevelError::UnknownLevel(index))
    }

    pub fn sessions(&self) -> &BTreeMap<String, Session> {
        &self.sessions
    }

    pub fn session(&self, id: &str) -> Result<&Session, LevelError> {
        self.sessions
            .get(id)
            .ok_or_else(|| LevelError::UnknownSession(id.to_string()))
    }

    pub fn session_mut(&mut self, id: &str) -> Result<&mut Session, LevelError> {
        self.sessions
            .get_mut(id)
            .ok_or_else(|| LevelError::UnknownSession(id.to_string()))
    }

    pub fn level_session(&self, index: usize) -> Result<&Session, LevelError> {
        let id = self.level(index)?.session_ref.clone();
        self.session(&id)
    }

    /// Adds or replaces a free-standing session (for example the main plan).
    pub fn insert_session(&mut self, id: impl Into<String>, session: Session) {
        self.sessions.insert(id.into(), session);
    }

    /// Abstracted properties at `index`: the universe minus `lprop`.
    pub fn abstr(&self, index: usize) -> Result<BTreeSet<String>, LevelError> {
        let level = self.level(index)?;
        Ok(self.complement(&level.lprop))
    }

    fn complement(&self, lprop: &BTreeSet<String>) -> BTreeSet<String> {
        self.properties
            .keys()
            .filter(|id| !lprop.contains(*id))
            .cloned()
            .collect()
    }

    /// True once the last level models the whole universe.
    pub fn is_complete(&self) -> bool {
        self.levels
            .last()
            .is_some_and(|l| self.complement(&l.lprop).is_empty())
    }

    fn links_of<'a>(&'a self, props: impl IntoIterator<Item = &'a String>) -> Vec<Interaction> {
        let mut links: Vec<Interaction> = props
            .into_iter()
            .filter_map(|id| self.properties.get(id))
            .flat_map(|p| p.links.iter().cloned())
            .collect();
        links.sort();
        links.dedup();
        links
    }

    fn check_assumptions(
        &self,
        assumptions: &[Assumption],
        previous: Option<&AbstractionLevel>,
    ) -> Result<(), LevelError> {
        let mut seen = BTreeSet::new();
        for a in assumptions {
            if !seen.insert(a.id.as_str()) {
                return Err(LevelError::DuplicateAssumption(a.id.clone()));
            }
            let unknown: Vec<String> = a
                .supports
                .iter()
                .filter(|p| !self.properties.contains_key(*p))
                .cloned()
                .collect();
            if !unknown.is_empty() {
                return Err(LevelError::NotInUniverse(unknown));
            }
            if let Some(parent) = &a.strength_parent {
                if previous.and_then(|l| l.assumption(parent)).is_none() {
                    return Err(LevelError::UnknownParent {
                        assumption: a.id.clone(),
                        parent: parent.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    fn check_level_sets(
        &self,
        lprop: &BTreeSet<String>,
        tracked_abstr: &BTreeSet<String>,
    ) -> Result<(), LevelError> {
        let outside: Vec<String> = lprop
            .iter()
            .chain(tracked_abstr)
            .filter(|p| !self.properties.contains_key(*p))
            .cloned()
            .collect();
        if !outside.is_empty() {
            return Err(LevelError::NotInUniverse(outside));
        }
        let modelled: Vec<String> = tracked_abstr.intersection(lprop).cloned().collect();
        if !modelled.is_empty() {
            return Err(LevelError::TrackedNotAbstracted(modelled));
        }
        Ok(())
    }

    /// Appends a level. Its session starts from the previous level's current
    /// model (or the project model for level 0) with no tests.
    pub fn create_level(
        &mut self,
        index: usize,
        meta_level: MetaLevel,
        lprop: BTreeSet<String>,
        tracked_abstr: BTreeSet<String>,
        mut assumptions: Vec<Assumption>,
    ) -> Result<&AbstractionLevel, LevelError> {
        if index != self.levels.len() {
            return Err(LevelError::BadIndex {
                expected: self.levels.len(),
                got: index,
            });
        }
        self.check_level_sets(&lprop, &tracked_abstr)?;
        let previous = self.levels.last();
        if let Some(prev) = previous {
            if meta_level < prev.meta_level {
                return Err(LevelError::MetaLevelRegression {
                    from: prev.meta_level,
                    to: meta_level,
                });
            }
            let dropped: Vec<String> = prev.lprop.difference(&lprop).cloned().collect();
            if !dropped.is_empty() {
                return Err(LevelError::DropsModelled {
                    level: index,
                    props: dropped,
                });
            }
        }
        self.check_assumptions(&assumptions, previous)?;
        assumptions.sort_by(|a, b| a.id.cmp(&b.id));
        let model = match previous {
            Some(prev) => self.session(&prev.session_ref)?.model().clone(),
            None => self.model.clone(),
        };
        let session = Session::open(
            model,
            RequirementSpec::Interactions(self.links_of(&lprop)),
            Vec::new(),
        )?;
        self.push_level(index, meta_level, lprop, tracked_abstr, assumptions, session)
    }

    fn push_level(
        &mut self,
        index: usize,
        meta_level: MetaLevel,
        lprop: BTreeSet<String>,
        tracked_abstr: BTreeSet<String>,
        assumptions: Vec<Assumption>,
        session: Session,
    ) -> Result<&AbstractionLevel, LevelError> {
        let session_ref = format!("level-{index}");
        self.sessions.insert(session_ref.clone(), session);
        self.levels.push(AbstractionLevel {
            index,
            meta_level,
            lprop,
            tracked_abstr,
            assumptions,
            session_ref,
        });
        debug_assert!(self.check_invariants().is_ok());
        Ok(self.levels.last().expect("just pushed"))
    }

    /// Refinement step: moves `promote` from the abstracted to the modelled
    /// set and applies assumption edits, producing the next level. The new
    /// session is seeded with the source level's Validated tests.
    pub fn refine_level(
        &mut self,
        from_index: usize,
        promote: BTreeSet<String>,
        edits: AssumptionEdits,
        meta_level: Option<MetaLevel>,
    ) -> Result<&AbstractionLevel, LevelError> {
        let last = self.levels.len().checked_sub(1).ok_or(LevelError::UnknownLevel(from_index))?;
        let from = self.level(from_index)?;
        if from_index != last {
            return Err(LevelError::NotLastLevel { last });
        }
        if promote.is_empty() && edits.is_empty() {
            return Err(LevelError::EmptyRefinement);
        }
        let abstr = self.complement(&from.lprop);
        let bad: Vec<String> = promote.difference(&abstr).cloned().collect();
        if !bad.is_empty() {
            return Err(LevelError::PromoteNotAbstracted {
                level: from_index,
                props: bad,
            });
        }
        let meta_level = meta_level.unwrap_or(from.meta_level);
        if meta_level < from.meta_level {
            return Err(LevelError::MetaLevelRegression {
                from: from.meta_level,
                to: meta_level,
            });
        }
        let lprop: BTreeSet<String> = from.lprop.union(&promote).cloned().collect();
        let tracked: BTreeSet<String> = from.tracked_abstr.difference(&promote).cloned().collect();

        let mut assumptions: BTreeMap<String, Assumption> = from
            .assumptions
            .iter()
            .filter(|a| !edits.remove.contains(&a.id))
            .map(|a| {
                // A parent link only relates a level to the one before it.
                let carried = Assumption {
                    strength_parent: None,
                    ..a.clone()
                };
                (a.id.clone(), carried)
            })
            .collect();
        for id in &edits.remove {
            if from.assumption(id).is_none() {
                return Err(LevelError::UnknownAssumption(id.clone()));
            }
        }
        let mut added = BTreeSet::new();
        for a in &edits.add {
            if !added.insert(a.id.as_str()) {
                return Err(LevelError::DuplicateAssumption(a.id.clone()));
            }
            assumptions.insert(a.id.clone(), a.clone());
        }
        let assumptions: Vec<Assumption> = assumptions.into_values().collect();
        self.check_assumptions(&assumptions, Some(from))?;

        let source = self.session(&from.session_ref)?;
        let seeded: Vec<Scenario> = source
            .validated()
            .into_iter()
            .filter(|s| source.model().is_executable(s))
            .collect();
        let session = Session::open(
            source.model().clone(),
            RequirementSpec::Interactions(self.links_of(&lprop)),
            seeded,
        )?;
        self.push_level(last + 1, meta_level, lprop, tracked, assumptions, session)
    }

    /// Union of the links of the modelled properties at `index`, restricted
    /// to requirements reachable in the level's current model.
    pub fn requirements_for_level(&self, index: usize) -> Result<LevelRequirements, LevelError> {
        let level = self.level(index)?;
        let session = self.session(&level.session_ref)?;
        let requirements =
            CoverageRequirements::from_interactions(session.model(), self.links_of(&level.lprop))?;
        let untestable = level
            .lprop
            .iter()
            .filter(|id| {
                self.properties[*id]
                    .links
                    .iter()
                    .all(|l| !requirements.contains(l))
            })
            .cloned()
            .collect();
        Ok(LevelRequirements {
            requirements,
            untestable,
        })
    }

    pub fn trace_graph(&self, index: usize) -> Result<TraceGraph, LevelError> {
        let level = self.level(index)?;
        let session = self.session(&level.session_ref)?;
        let requirements = session.requirements();
        let validated = session.validated();
        let mut graph = TraceGraph::default();
        for id in &level.lprop {
            let reqs: Vec<Interaction> = self.properties[id]
                .links
                .iter()
                .filter(|l| requirements.contains(l))
                .cloned()
                .collect();
            for r in &reqs {
                graph.requirement_tests.entry(r.clone()).or_insert_with(|| {
                    validated.iter().filter(|t| t.covers(r)).cloned().collect()
                });
            }
            graph.property_requirements.insert(id.clone(), reqs);
        }
        for a in &level.assumptions {
            graph
                .assumption_properties
                .insert(a.id.clone(), a.supports.clone());
        }
        Ok(graph)
    }

    /// Changes of the assumption set from level `l` to `l + 1`.
    pub fn assumption_diff(&self, l: usize) -> Result<AssumptionDiff, LevelError> {
        let prev = self.level(l)?;
        let next = self.level(l + 1)?;
        let mut diff = AssumptionDiff::default();
        let mut refined_parents = BTreeSet::new();
        for a in &next.assumptions {
            match prev.assumption(&a.id) {
                Some(old) => {
                    if old.statement != a.statement || old.supports != a.supports {
                        diff.modified.push((a.id.clone(), a.id.clone()));
                    }
                }
                None => match &a.strength_parent {
                    Some(parent) if prev.assumption(parent).is_some() => {
                        refined_parents.insert(parent.clone());
                        diff.modified.push((parent.clone(), a.id.clone()));
                    }
                    _ => diff.added.push(a.id.clone()),
                },
            }
        }
        for a in &prev.assumptions {
            if next.assumption(&a.id).is_none() && !refined_parents.contains(&a.id) {
                diff.removed.push(a.id.clone());
            }
        }
        diff.modified.sort();
        Ok(diff)
    }

    /// Properties and Validated tests affected by a contradiction of
    /// `assumption_id`, per level from the assumption's introduction up to
    /// `discovered_at`. Follows strength-parent chains forward, so refined
    /// versions of the assumption count as the same dependency.
    pub fn retest_plan(
        &self,
        assumption_id: &str,
        discovered_at: usize,
    ) -> Result<BTreeMap<usize, Vec<RetestEntry>>, LevelError> {
        self.level(discovered_at)?;
        let intro = (0..=discovered_at)
            .find(|&l| self.levels[l].assumption(assumption_id).is_some())
            .ok_or_else(|| LevelError::UnknownAssumption(assumption_id.to_string()))?;
        let mut lineage: BTreeSet<String> = BTreeSet::from([assumption_id.to_string()]);
        let mut out = BTreeMap::new();
        for l in intro..=discovered_at {
            let level = &self.levels[l];
            let relevant: Vec<&Assumption> = level
                .assumptions
                .iter()
                .filter(|a| {
                    lineage.contains(&a.id)
                        || a.strength_parent.as_ref().is_some_and(|p| lineage.contains(p))
                })
                .collect();
            lineage.extend(relevant.iter().map(|a| a.id.clone()));
            let props: BTreeSet<&String> = relevant
                .iter()
                .flat_map(|a| a.supports.iter())
                .filter(|p| level.lprop.contains(*p))
                .collect();
            if props.is_empty() {
                continue;
            }
            let graph = self.trace_graph(l)?;
            let entries: Vec<RetestEntry> = props
                .into_iter()
                .map(|p| {
                    let tests: BTreeSet<Scenario> = graph.property_requirements[p]
                        .iter()
                        .flat_map(|r| graph.requirement_tests[r].iter().cloned())
                        .collect();
                    RetestEntry {
                        property: p.clone(),
                        tests: tests.into_iter().collect(),
                    }
                })
                .collect();
            out.insert(l, entries);
        }
        Ok(out)
    }

    /// Computes the retest set, marks the affected assumptions contradicted
    /// and demotes the listed tests to Uncertain in their level sessions.
    pub fn retest_set(
        &mut self,
        assumption_id: &str,
        discovered_at: usize,
    ) -> Result<BTreeMap<usize, Vec<RetestEntry>>, LevelError> {
        let plan = self.retest_plan(assumption_id, discovered_at)?;
        let intro = (0..=discovered_at)
            .find(|&l| self.levels[l].assumption(assumption_id).is_some())
            .expect("checked by retest_plan");
        let mut lineage: BTreeSet<String> = BTreeSet::from([assumption_id.to_string()]);
        for l in intro..=discovered_at {
            for a in &mut self.levels[l].assumptions {
                let related = lineage.contains(&a.id)
                    || a.strength_parent.as_ref().is_some_and(|p| lineage.contains(p));
                if related {
                    a.status = AssumptionStatus::Contradicted;
                    lineage.insert(a.id.clone());
                }
            }
        }
        let reason = format!("assumption `{assumption_id}` contradicted at level {discovered_at}");
        for (l, entries) in &plan {
            let tests: Vec<Scenario> = entries
                .iter()
                .flat_map(|e| e.tests.iter().cloned())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let session_ref = self.levels[*l].session_ref.clone();
            self.session_mut(&session_ref)?.demote(&tests, &reason);
        }
        debug_assert!(self.check_invariants().is_ok());
        Ok(plan)
    }

    pub fn abstraction_audit(&self, index: usize) -> Result<AuditReport, LevelError> {
        let level = self.level(index)?;
        let abstr = self.complement(&level.lprop);
        let graph = self.trace_graph(index)?;
        let silently_abstracted = abstr.difference(&level.tracked_abstr).cloned().collect();
        let coverage_debt = level
            .lprop
            .iter()
            .filter(|p| {
                graph.property_requirements[*p]
                    .iter()
                    .all(|r| graph.requirement_tests[r].is_empty())
            })
            .cloned()
            .collect();
        let untestable = self.requirements_for_level(index)?.untestable;
        Ok(AuditReport {
            silently_abstracted,
            coverage_debt,
            untestable,
        })
    }

    /// Checks every structural invariant of the project.
    pub fn check_invariants(&self) -> Result<(), LevelError> {
        let mut prev: Option<&AbstractionLevel> = None;
        for (i, level) in self.levels.iter().enumerate() {
            if level.index != i {
                return Err(LevelError::Invariant(format!("level at position {i} has index {}", level.index)));
            }
            self.check_level_sets(&level.lprop, &level.tracked_abstr)?;
            let abstr = self.complement(&level.lprop);
            let union: BTreeSet<&String> = level.lprop.iter().chain(&abstr).collect();
            if union.len() != self.properties.len() || level.lprop.intersection(&abstr).next().is_some() {
                return Err(LevelError::Invariant(format!("level {i} does not partition the universe")));
            }
            if !level.tracked_abstr.is_subset(&abstr) {
                return Err(LevelError::Invariant(format!("level {i}: tracked properties are not abstracted")));
            }
            self.check_assumptions(&level.assumptions, prev)?;
            if let Some(p) = prev {
                if level.meta_level < p.meta_level {
                    return Err(LevelError::MetaLevelRegression {
                        from: p.meta_level,
                        to: level.meta_level,
                    });
                }
                let dropped: Vec<String> = p.lprop.difference(&level.lprop).cloned().collect();
                if !dropped.is_empty() {
                    return Err(LevelError::DropsModelled { level: i, props: dropped });
                }
            }
            self.session(&level.session_ref)?;
            prev = Some(level);
        }
        for (id, session) in &self.sessions {
            if session.model().parameters() != self.model.parameters() {
                return Err(LevelError::Invariant(format!("session `{id}` uses a different signature")));
            }
            for s in session.validated() {
                if !session.model().is_executable(&s) {
                    return Err(LevelError::Invariant(format!("session `{id}` has a non-executable validated test")));
                }
            }
        }
        Ok(())
    }

    /// Restores a level verbatim; used when loading a project file.
    pub(crate) fn restore_level(
        &mut self,
        index: usize,
        meta_level: MetaLevel,
        lprop: BTreeSet<String>,
        tracked_abstr: BTreeSet<String>,
        mut assumptions: Vec<Assumption>,
        session_ref: String,
    ) {
        assumptions.sort_by(|a, b| a.id.cmp(&b.id));
        self.levels.push(AbstractionLevel {
            index,
            meta_level,
            lprop,
            tracked_abstr,
            assumptions,
            session_ref,
        });
    }
}
