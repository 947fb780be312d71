use std::collections::BTreeSet;

use hcatd_core::{Answer, Assumption, AssumptionEdits, MetaLevel, Project};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::views;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionBody {
    pub id: String,
    pub statement: String,
    #[serde(default)]
    pub strength_parent: Option<String>,
    #[serde(default)]
    pub supports: BTreeSet<String>,
}

impl AssumptionBody {
    fn build(&self) -> Assumption {
        let mut a = Assumption::new(&self.id, &self.statement).supporting(self.supports.iter().cloned());
        a.strength_parent = self.strength_parent.clone();
        a
    }
}

/// A state change accepted by the service. The journal of applied
/// mutations replays to the current project.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Mutation {
    Answer {
        session: String,
        query_id: String,
        answer: String,
    },
    AddTest {
        session: String,
        scenario: String,
    },
    ApplyRestriction {
        session: String,
        source: String,
    },
    CreateLevel {
        meta_level: String,
        lprop: BTreeSet<String>,
        tracked_abstr: BTreeSet<String>,
        assumptions: Vec<AssumptionBody>,
    },
    RefineLevel {
        from: usize,
        promote: BTreeSet<String>,
        remove_assumptions: Vec<String>,
        add_assumptions: Vec<AssumptionBody>,
        meta_level: Option<String>,
    },
    Retest {
        assumption_id: String,
        level: usize,
    },
}

fn meta(s: &str) -> Result<MetaLevel, ApiError> {
    MetaLevel::parse(s).ok_or_else(|| {
        ApiError::bad_request(format!(
            "unknown meta-level `{s}`; expected abstract, virtual or cyber-physical"
        ))
    })
}

fn session_mut<'a>(project: &'a mut Project, id: &str) -> Result<&'a mut hcatd_core::Session, ApiError> {
    Ok(project.session_mut(id)?)
}

/// Applies `m` to `project`. On error the project may be partially
/// modified; callers apply to a copy.
pub fn apply(project: &mut Project, m: &Mutation) -> Result<Value, ApiError> {
    match m {
        Mutation::Answer {
            session,
            query_id,
            answer,
        } => {
            let answer = Answer::parse(answer)
                .ok_or_else(|| ApiError::bad_request(format!("answer must be accept or reject, got `{answer}`")))?;
            session_mut(project, session)?.answer_query(query_id, answer)?;
            Ok(json!({ "query": query_id, "answer": answer.as_str() }))
        }
        Mutation::AddTest { session, scenario } => {
            let s = session_mut(project, session)?;
            let parsed = s.model().parse_scenario(scenario)?;
            s.add_test(parsed.clone())?;
            Ok(json!({ "scenario": s.model().format_scenario(&parsed), "state": "validated" }))
        }
        Mutation::ApplyRestriction { session, source } => {
            let s = session_mut(project, session)?;
            let canonical = s.model().parse_restriction(source)?.source().to_string();
            s.apply_restriction(source)?;
            Ok(json!({ "restriction": canonical, "requirements": s.requirements().len() }))
        }
        Mutation::CreateLevel {
            meta_level,
            lprop,
            tracked_abstr,
            assumptions,
        } => {
            let index = project.levels().len();
            project.create_level(
                index,
                meta(meta_level)?,
                lprop.clone(),
                tracked_abstr.clone(),
                assumptions.iter().map(AssumptionBody::build).collect(),
            )?;
            Ok(json!({ "level": index }))
        }
        Mutation::RefineLevel {
            from,
            promote,
            remove_assumptions,
            add_assumptions,
            meta_level,
        } => {
            let edits = AssumptionEdits {
                remove: remove_assumptions.clone(),
                add: add_assumptions.iter().map(AssumptionBody::build).collect(),
            };
            let meta_level = meta_level.as_deref().map(meta).transpose()?;
            let level = project.refine_level(*from, promote.clone(), edits, meta_level)?.index();
            Ok(json!({ "level": level }))
        }
        Mutation::Retest {
            assumption_id,
            level,
        } => {
            let plan = project.retest_set(assumption_id, *level)?;
            Ok(views::retest(project.model(), &plan))
        }
    }
}

/// Replays `journal` on a copy of `initial`.
pub fn replay(initial: &Project, journal: &[Mutation]) -> Result<Project, ApiError> {
    let mut project = initial.clone();
    for m in journal {
        apply(&mut project, m)?;
    }
    Ok(project)
}
