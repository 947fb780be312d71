//! Project file format.
//!
//! A project is one pretty-printed JSON document. Collections are written
//! in a canonical order and scenarios are keyed by their canonical string,
//! so saving a loaded project reproduces the file byte for byte. Sessions
//! are stored as their opening state plus the action log; on load the log
//! is replayed and must reproduce the recorded states.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::levels::{Assumption, AssumptionStatus, LevelError, MetaLevel, Project, Property};
use crate::model::{CombinatorialModel, ModelError, Parameter};
use crate::restriction::Restriction;
use crate::session::{
    Answer, LogEntry, LogEvent, Query, QueryCandidate, RequirementSpec, Session, SessionError,
    TestState,
};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("invariant `{rule}` violated: {message}")]
    Invariant { rule: &'static str, message: String },
}

impl ProjectError {
    fn field(field: impl Into<String>, message: impl ToString) -> Self {
        ProjectError::Field {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

impl From<LevelError> for ProjectError {
    fn from(e: LevelError) -> Self {
        ProjectError::Invariant {
            rule: rule_name(&e),
            message: e.to_string(),
        }
    }
}

fn rule_name(e: &LevelError) -> &'static str {
    match e {
        LevelError::NotInUniverse(_) => "lprop ⊆ universe",
        LevelError::TrackedNotAbstracted(_) => "tracked_abstr ⊆ abstr",
        LevelError::MetaLevelRegression { .. } => "meta_level non-decreasing",
        LevelError::BadIndex { .. } => "consecutive level indices",
        LevelError::DropsModelled { .. } => "lprop non-decreasing",
        LevelError::DuplicateProperty(_) => "unique property ids",
        LevelError::DuplicateAssumption(_) => "unique assumption ids",
        LevelError::UnknownParent { .. } => "strength_parent exists at previous level",
        LevelError::UnknownSession(_) => "session_ref names a session",
        LevelError::Session(SessionError::ReplayMismatch(_)) => "query_log replays to states",
        LevelError::Session(SessionError::NotExecutable(_)) => "validated tests are executable",
        LevelError::Session(_) => "session consistency",
        LevelError::Invariant(_) => "level chain consistency",
        _ => "project consistency",
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectFile {
    format_version: u32,
    parameters: Vec<ParameterRecord>,
    restrictions: Vec<String>,
    properties: Vec<PropertyRecord>,
    levels: Vec<LevelRecord>,
    sessions: Vec<SessionRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParameterRecord {
    name: String,
    values: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PropertyRecord {
    id: String,
    description: String,
    links: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelRecord {
    index: usize,
    meta_level: String,
    lprop: Vec<String>,
    tracked_abstr: Vec<String>,
    assumptions: Vec<AssumptionRecord>,
    session_ref: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssumptionRecord {
    id: String,
    statement: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    strength_parent: Option<String>,
    status: String,
    supports: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionRecord {
    id: String,
    /// Restrictions of the model the session was opened with.
    restrictions: Vec<String>,
    requirements: RequirementsRecord,
    initial_tests: Vec<String>,
    states: BTreeMap<String, String>,
    query_log: Vec<LogRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum RequirementsRecord {
    Strength(usize),
    Interactions(Vec<String>),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case", deny_unknown_fields)]
enum LogRecord {
    Answered {
        timestamp: u64,
        query: QueryRecord,
        answer: String,
    },
    TestAdded {
        timestamp: u64,
        scenario: String,
    },
    RestrictionApplied {
        timestamp: u64,
        source: String,
    },
    Demoted {
        timestamp: u64,
        scenario: String,
        reason: String,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryRecord {
    id: String,
    kind: String,
    candidate: String,
    motivating_requirements: Vec<String>,
    rank_score: usize,
}

impl Project {
    pub fn load(path: impl AsRef<Path>) -> Result<Project, ProjectError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ProjectError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Project::from_json_str(&text)
    }

    /// Writes the canonical serialization to `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ProjectError> {
        let path = path.as_ref();
        fs::write(path, self.to_json_string()).map_err(|source| ProjectError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn to_json_string(&self) -> String {
        let file = to_record(self);
        let mut text = serde_json::to_string_pretty(&file).expect("records serialize");
        text.push('\n');
        text
    }

    pub fn from_json_str(text: &str) -> Result<Project, ProjectError> {
        let file: ProjectFile = serde_json::from_str(text).map_err(|e| ProjectError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        from_record(file)
    }
}

fn to_record(project: &Project) -> ProjectFile {
    let model = project.model();
    ProjectFile {
        format_version: FORMAT_VERSION,
        parameters: model
            .parameters()
            .iter()
            .map(|p| ParameterRecord {
                name: p.name().to_string(),
                values: p.values().to_vec(),
            })
            .collect(),
        restrictions: model.restrictions().iter().map(|r| r.source().to_string()).collect(),
        properties: project
            .properties()
            .values()
            .map(|p| PropertyRecord {
                id: p.id.clone(),
                description: p.description.clone(),
                links: p.links.iter().map(|l| model.format_interaction(l)).collect(),
            })
            .collect(),
        levels: project
            .levels()
            .iter()
            .map(|l| LevelRecord {
                index: l.index(),
                meta_level: l.meta_level().as_str().to_string(),
                lprop: l.lprop().iter().cloned().collect(),
                tracked_abstr: l.tracked_abstr().iter().cloned().collect(),
                assumptions: l
                    .assumptions()
                    .iter()
                    .map(|a| AssumptionRecord {
                        id: a.id.clone(),
                        statement: a.statement.clone(),
                        strength_parent: a.strength_parent.clone(),
                        status: a.status.as_str().to_string(),
                        supports: a.supports.iter().cloned().collect(),
                    })
                    .collect(),
                session_ref: l.session_ref().to_string(),
            })
            .collect(),
        sessions: project
            .sessions()
            .iter()
            .map(|(id, s)| session_record(id, s))
            .collect(),
    }
}

fn session_record(id: &str, session: &Session) -> SessionRecord {
    let model = session.model();
    let requirements = match session.spec() {
        RequirementSpec::Strength(t) => RequirementsRecord::Strength(*t),
        RequirementSpec::Interactions(list) => {
            RequirementsRecord::Interactions(list.iter().map(|i| model.format_interaction(i)).collect())
        }
    };
    SessionRecord {
        id: id.to_string(),
        restrictions: session
            .base_model()
            .restrictions()
            .iter()
            .map(|r| r.source().to_string())
            .collect(),
        requirements,
        initial_tests: session
            .initial_tests()
            .iter()
            .map(|s| model.format_scenario(s))
            .collect(),
        states: session
            .explicit_states()
            .iter()
            .map(|(s, st)| (model.format_scenario(s), st.as_str().to_string()))
            .collect(),
        query_log: session
            .log()
            .iter()
            .map(|e| log_record(model, e))
            .collect(),
    }
}

fn log_record(model: &CombinatorialModel, entry: &LogEntry) -> LogRecord {
    let timestamp = entry.timestamp;
    match &entry.event {
        LogEvent::Answered { query, answer } => LogRecord::Answered {
            timestamp,
            query: QueryRecord {
                id: query.id.clone(),
                kind: query.kind().as_str().into(),
                candidate: match &query.candidate {
                    QueryCandidate::Test(s) => model.format_scenario(s),
                    QueryCandidate::Restriction(r) => r.source().to_string(),
                },
                motivating_requirements: query
                    .motivating_requirements
                    .iter()
                    .map(|i| model.format_interaction(i))
                    .collect(),
                rank_score: query.rank_score,
            },
            answer: answer.as_str().to_string(),
        },
        LogEvent::TestAdded { scenario } => LogRecord::TestAdded {
            timestamp,
            scenario: model.format_scenario(scenario),
        },
        LogEvent::RestrictionApplied { source } => LogRecord::RestrictionApplied {
            timestamp,
            source: source.clone(),
        },
        LogEvent::Demoted { scenario, reason } => LogRecord::Demoted {
            timestamp,
            scenario: model.format_scenario(scenario),
            reason: reason.clone(),
        },
    }
}

fn from_record(file: ProjectFile) -> Result<Project, ProjectError> {
    if file.format_version != FORMAT_VERSION {
        return Err(ProjectError::field(
            "format_version",
            format!("unsupported version {}, expected {FORMAT_VERSION}", file.format_version),
        ));
    }
    let params = file
        .parameters
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            Parameter::new(p.name, p.values).map_err(|e| ProjectError::field(format!("parameters[{i}]"), e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut model = CombinatorialModel::new(params).map_err(|e| ProjectError::field("parameters", e))?;
    for (i, r) in file.restrictions.iter().enumerate() {
        model
            .add_restriction(r)
            .map_err(|e| ProjectError::field(format!("restrictions[{i}]"), e))?;
    }

    let mut properties = Vec::new();
    for (i, p) in file.properties.into_iter().enumerate() {
        let links = p
            .links
            .iter()
            .map(|l| model.parse_interaction(l))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ProjectError::field(format!("properties[{i}].links"), e))?;
        properties.push(Property {
            id: p.id,
            description: p.description,
            links,
        });
    }
    let mut project = Project::new(model.clone(), properties)?;

    for record in file.sessions {
        let field = format!("sessions[{}]", record.id);
        let session = load_session(&model, record.restrictions.as_slice(), &record, &field)?;
        project.insert_session(record.id, session);
    }

    for (i, l) in file.levels.into_iter().enumerate() {
        let field = format!("levels[{i}]");
        let meta = MetaLevel::parse(&l.meta_level)
            .ok_or_else(|| ProjectError::field(format!("{field}.meta_level"), format!("unknown meta-level `{}`", l.meta_level)))?;
        let mut assumptions = Vec::new();
        for a in l.assumptions {
            let status = AssumptionStatus::parse(&a.status).ok_or_else(|| {
                ProjectError::field(format!("{field}.assumptions[{}].status", a.id), format!("unknown status `{}`", a.status))
            })?;
            assumptions.push(Assumption {
                id: a.id,
                statement: a.statement,
                strength_parent: a.strength_parent,
                status,
                supports: a.supports.into_iter().collect(),
            });
        }
        project.restore_level(
            l.index,
            meta,
            l.lprop.into_iter().collect(),
            l.tracked_abstr.into_iter().collect(),
            assumptions,
            l.session_ref,
        );
    }
    project.check_invariants()?;
    Ok(project)
}

fn load_session(
    project_model: &CombinatorialModel,
    restrictions: &[String],
    record: &SessionRecord,
    field: &str,
) -> Result<Session, ProjectError> {
    let mut base = CombinatorialModel::new(project_model.parameters().to_vec())
        .map_err(|e| ProjectError::field(field, e))?;
    for (i, r) in restrictions.iter().enumerate() {
        base.add_restriction(r)
            .map_err(|e| ProjectError::field(format!("{field}.restrictions[{i}]"), e))?;
    }
    let spec = match &record.requirements {
        RequirementsRecord::Strength(t) => RequirementSpec::Strength(*t),
        RequirementsRecord::Interactions(list) => RequirementSpec::Interactions(
            list.iter()
                .map(|l| base.parse_interaction(l))
                .collect::<Result<_, _>>()
                .map_err(|e| ProjectError::field(format!("{field}.requirements"), e))?,
        ),
    };
    let scenario = |text: &str, at: &str| {
        base.parse_scenario(text)
            .map_err(|e| ProjectError::field(format!("{field}.{at}"), e))
    };
    let initial = record
        .initial_tests
        .iter()
        .map(|t| scenario(t, "initial_tests"))
        .collect::<Result<Vec<_>, _>>()?;
    let mut log = Vec::new();
    for (i, entry) in record.query_log.iter().enumerate() {
        let at = format!("query_log[{i}]");
        let (event, timestamp) = match entry {
            LogRecord::Answered {
                timestamp,
                query,
                answer,
            } => {
                let candidate = match query.kind.as_str() {
                    "confirm-test" => QueryCandidate::Test(scenario(&query.candidate, &at)?),
                    "suggest-restriction" => QueryCandidate::Restriction(
                        Restriction::parse(&query.candidate, base.parameters())
                            .map_err(|e| ProjectError::field(format!("{field}.{at}"), e))?,
                    ),
                    other => {
                        return Err(ProjectError::field(format!("{field}.{at}.kind"), format!("unknown query kind `{other}`")))
                    }
                };
                let motivating_requirements = query
                    .motivating_requirements
                    .iter()
                    .map(|m| base.parse_interaction(m))
                    .collect::<Result<Vec<_>, ModelError>>()
                    .map_err(|e| ProjectError::field(format!("{field}.{at}"), e))?;
                let answer = Answer::parse(answer)
                    .ok_or_else(|| ProjectError::field(format!("{field}.{at}.answer"), format!("unknown answer `{answer}`")))?;
                (
                    LogEvent::Answered {
                        query: Query {
                            id: query.id.clone(),
                            candidate,
                            motivating_requirements,
                            rank_score: query.rank_score,
                        },
                        answer,
                    },
                    *timestamp,
                )
            }
            LogRecord::TestAdded {
                timestamp,
                scenario: s,
            } => (
                LogEvent::TestAdded {
                    scenario: scenario(s, &at)?,
                },
                *timestamp,
            ),
            LogRecord::RestrictionApplied { timestamp, source } => (
                LogEvent::RestrictionApplied {
                    source: source.clone(),
                },
                *timestamp,
            ),
            LogRecord::Demoted {
                timestamp,
                scenario: s,
                reason,
            } => (
                LogEvent::Demoted {
                    scenario: scenario(s, &at)?,
                    reason: reason.clone(),
                },
                *timestamp,
            ),
        };
        log.push(LogEntry { event, timestamp });
    }
    let session = Session::rebuild(base.clone(), spec, initial, &log).map_err(LevelError::from)?;

    let mut recorded = BTreeMap::new();
    for (key, state) in &record.states {
        let s = scenario(key, "states")?;
        let state = match state.as_str() {
            "validated" => TestState::Validated,
            "rejected" => TestState::Rejected,
            other => {
                return Err(ProjectError::field(format!("{field}.states"), format!("unknown state `{other}`")))
            }
        };
        recorded.insert(s, state);
    }
    if &recorded != session.explicit_states() {
        let differing: BTreeSet<String> = recorded
            .keys()
            .chain(session.explicit_states().keys())
            .filter(|s| recorded.get(*s) != session.explicit_states().get(*s))
            .map(|s| base.format_scenario(s))
            .collect();
        return Err(ProjectError::Invariant {
            rule: "query_log replays to states",
            message: format!(
                "session `{}`: replayed states differ for {}",
                record.id,
                differing.into_iter().collect::<Vec<_>>().join("; ")
            ),
        });
    }
    Ok(session)
}
