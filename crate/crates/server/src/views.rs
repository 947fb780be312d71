//! JSON renderings of project state. Scenarios and interactions are shown
//! by their canonical keys.

use std::collections::BTreeMap;

use hcatd_core::{
    t_wise_requirements, validate_plan, Assumption, AssumptionDiff, AuditReport,
    CombinatorialModel, CoverageRequirements, Interaction, Project, Query, QueryCandidate,
    RetestEntry, Scenario, Session, TestPlan,
};
use itertools::Itertools;
use serde_json::{json, Value};

use crate::error::ApiError;

fn keys<'a>(model: &CombinatorialModel, it: impl IntoIterator<Item = &'a Interaction>) -> Vec<String> {
    it.into_iter().map(|i| model.format_interaction(i)).collect()
}

fn scenario_keys<'a>(model: &CombinatorialModel, it: impl IntoIterator<Item = &'a Scenario>) -> Vec<String> {
    it.into_iter().map(|s| model.format_scenario(s)).collect()
}

pub fn model(session_id: &str, session: &Session) -> Value {
    let m = session.model();
    json!({
        "session": session_id,
        "parameters": m.parameters().iter().map(|p| json!({
            "name": p.name(),
            "values": p.values(),
        })).collect::<Vec<_>>(),
        "base_restrictions": session.base_model().restrictions().iter().map(|r| r.source()).collect::<Vec<_>>(),
        "restrictions": m.restrictions().iter().map(|r| r.source()).collect::<Vec<_>>(),
        "space_size": m.space_size().to_string(),
        "executable": session.executable().len(),
    })
}

pub fn scenarios(session: &Session) -> Value {
    let m = session.model();
    let list: Vec<Value> = session
        .executable()
        .iter()
        .map(|s| {
            json!({
                "key": m.format_scenario(s),
                "values": s.values().iter().enumerate()
                    .map(|(p, v)| m.parameters()[p].values()[*v].clone())
                    .collect::<Vec<_>>(),
                "state": session.state_of(s).as_str(),
            })
        })
        .collect();
    json!({
        "scenarios": list,
        "validated": session.validated().len(),
        "rejected": session.rejected().len(),
        "uncertain": session.uncertainty(),
        "rejected_by_model": m.space_size().saturating_sub(session.executable().len() as u128).to_string(),
    })
}

/// Interactions over the same parameter sets as `reqs` (or of size `t`)
/// that no executable scenario extends.
fn excluded(model: &CombinatorialModel, reqs: &CoverageRequirements, base: &[Interaction]) -> Vec<Interaction> {
    let candidates: Vec<Interaction> = match reqs.strength() {
        Some(t) => {
            let n = model.parameters().len();
            (0..n)
                .combinations(t)
                .flat_map(|params| {
                    params
                        .iter()
                        .map(|&p| (0..model.parameters()[p].values().len()).map(move |v| (p, v)))
                        .multi_cartesian_product()
                        .collect::<Vec<_>>()
                })
                .filter_map(|pairs| Interaction::from_pairs(pairs).ok())
                .collect()
        }
        None => base.to_vec(),
    };
    candidates
        .into_iter()
        .filter(|i| !reqs.contains(i))
        .sorted()
        .dedup()
        .collect()
}

pub fn coverage(session: &Session, strength: Option<usize>) -> Result<Value, ApiError> {
    let m = session.model();
    let (requirements, base) = match strength {
        Some(t) => (
            t_wise_requirements(m, t).map_err(|e| ApiError::bad_request(e.to_string()))?,
            Vec::new(),
        ),
        None => {
            let base = match session.spec() {
                hcatd_core::RequirementSpec::Interactions(list) => list.clone(),
                hcatd_core::RequirementSpec::Strength(_) => Vec::new(),
            };
            (session.requirements().clone(), base)
        }
    };
    let report = validate_plan(&TestPlan {
        model: m.clone(),
        requirements: requirements.clone(),
        tests: session.validated(),
    });
    let unreachable = session.unreachable_requirements();
    Ok(json!({
        "strength": requirements.strength(),
        "requirements": requirements.len(),
        "covered": keys(m, &report.covered),
        "uncovered": keys(m, &report.uncovered),
        "excluded": keys(m, &excluded(m, &requirements, &base)),
        "unreachable": keys(m, unreachable.iter().filter(|i| report.uncovered.contains(*i))),
        "executable_violations": scenario_keys(m, &report.executable_violations),
        "tests": scenario_keys(m, &session.validated()),
        "valid": report.valid,
    }))
}

pub fn query(model: &CombinatorialModel, q: &Query) -> Value {
    let candidate = match &q.candidate {
        QueryCandidate::Test(s) => model.format_scenario(s),
        QueryCandidate::Restriction(r) => r.source().to_string(),
    };
    json!({
        "id": q.id,
        "kind": q.kind().as_str(),
        "candidate": candidate,
        "motivating_requirements": keys(model, &q.motivating_requirements),
        "rank_score": q.rank_score,
    })
}

pub fn queries(session: &Session, limit: usize) -> Value {
    let qs: Vec<Value> = session
        .next_queries(limit)
        .iter()
        .map(|q| query(session.model(), q))
        .collect();
    json!({ "queries": qs, "open": session.open_queries().len() })
}

pub fn assumption(a: &Assumption) -> Value {
    json!({
        "id": a.id,
        "statement": a.statement,
        "strength_parent": a.strength_parent,
        "status": a.status.as_str(),
        "supports": a.supports,
    })
}

pub fn levels(project: &Project) -> Result<Value, ApiError> {
    let m = project.model();
    let mut out = Vec::new();
    for (i, level) in project.levels().iter().enumerate() {
        let graph = project.trace_graph(i)?;
        let property_requirements: BTreeMap<&String, Vec<String>> = graph
            .property_requirements
            .iter()
            .map(|(p, rs)| (p, keys(m, rs)))
            .collect();
        let requirement_tests: BTreeMap<String, Vec<String>> = graph
            .requirement_tests
            .iter()
            .map(|(r, ts)| (m.format_interaction(r), scenario_keys(m, ts)))
            .collect();
        out.push(json!({
            "index": level.index(),
            "meta_level": level.meta_level().as_str(),
            "lprop": level.lprop(),
            "tracked_abstr": level.tracked_abstr(),
            "abstr": project.abstr(i)?,
            "assumptions": level.assumptions().iter().map(assumption).collect::<Vec<_>>(),
            "session_ref": level.session_ref(),
            "trace": {
                "property_requirements": property_requirements,
                "requirement_tests": requirement_tests,
            },
        }));
    }
    Ok(json!({
        "levels": out,
        "properties": project.properties().values().map(|p| json!({
            "id": p.id,
            "description": p.description,
            "links": keys(m, &p.links),
        })).collect::<Vec<_>>(),
        "complete": project.is_complete(),
    }))
}

pub fn audit(level: usize, report: &AuditReport) -> Value {
    json!({
        "level": level,
        "silently_abstracted": report.silently_abstracted,
        "coverage_debt": report.coverage_debt,
        "untestable": report.untestable,
    })
}

pub fn assumption_diff(level: usize, diff: &AssumptionDiff) -> Value {
    json!({
        "from": level,
        "to": level + 1,
        "added": diff.added,
        "removed": diff.removed,
        "modified": diff.modified.iter().map(|(a, b)| json!({ "from": a, "to": b })).collect::<Vec<_>>(),
    })
}

pub fn retest(model: &CombinatorialModel, plan: &BTreeMap<usize, Vec<RetestEntry>>) -> Value {
    let levels: Vec<Value> = plan
        .iter()
        .map(|(l, entries)| {
            json!({
                "level": l,
                "properties": entries.iter().map(|e| json!({
                    "property": e.property,
                    "tests": scenario_keys(model, &e.tests),
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({ "retest": levels })
}
