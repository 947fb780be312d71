//! Coverage requirements, plan validation and greedy covering-plan
//! generation.

use std::collections::{BTreeSet, HashMap};

use itertools::Itertools;
use thiserror::Error;

use crate::model::{CombinatorialModel, Interaction, ModelError, Scenario};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoverageError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("strength {strength} is outside 1..={parameters}")]
    InvalidStrength { strength: usize, parameters: usize },
    #[error("scenario `{0}` is not executable in the model")]
    NotExecutable(String),
    #[error("requirement `{0}` cannot be covered by any executable scenario")]
    Unreachable(String),
}

/// A set of interactions that a test plan must cover. Every member is
/// extendable to an executable scenario of the model it was built for.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CoverageRequirements {
    strength: Option<usize>,
    requirements: Vec<Interaction>,
}

impl CoverageRequirements {
    /// Keeps the extendable members of `interactions`, deduplicated and
    /// sorted. Non-extendable interactions are dropped.
    pub fn from_interactions(
        model: &CombinatorialModel,
        interactions: impl IntoIterator<Item = Interaction>,
    ) -> Result<Self, CoverageError> {
        let mut set = BTreeSet::new();
        for i in interactions {
            model.check_interaction(&i)?;
            if model.is_extendable(&i)? {
                set.insert(i);
            }
        }
        let requirements: Vec<Interaction> = set.into_iter().collect();
        let strength = requirements
            .first()
            .map(Interaction::len)
            .filter(|&k| requirements.iter().all(|r| r.len() == k));
        Ok(CoverageRequirements {
            strength,
            requirements,
        })
    }

    /// Drops members that are no longer extendable in `model`.
    pub fn restricted_to(&self, model: &CombinatorialModel) -> Result<Self, CoverageError> {
        let mut requirements = Vec::with_capacity(self.requirements.len());
        for r in &self.requirements {
            if model.is_extendable(r)? {
                requirements.push(r.clone());
            }
        }
        Ok(CoverageRequirements {
            strength: self.strength,
            requirements,
        })
    }

    /// Uniform interaction size, if all requirements share one.
    pub fn strength(&self) -> Option<usize> {
        self.strength
    }

    pub fn requirements(&self) -> &[Interaction] {
        &self.requirements
    }

    pub fn len(&self) -> usize {
        self.requirements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requirements.is_empty()
    }

    pub fn contains(&self, i: &Interaction) -> bool {
        self.requirements.binary_search(i).is_ok()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interaction> {
        self.requirements.iter()
    }
}

/// `(E, C, T)`. Invalid plans are representable on purpose.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestPlan {
    pub model: CombinatorialModel,
    pub requirements: CoverageRequirements,
    pub tests: Vec<Scenario>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CoverageReport {
    pub covered: BTreeSet<Interaction>,
    pub uncovered: BTreeSet<Interaction>,
    pub executable_violations: BTreeSet<Scenario>,
    pub valid: bool,
}

/// All size-`t` interactions that extend to an executable scenario, in
/// lexicographic order.
pub fn t_wise_requirements(
    model: &CombinatorialModel,
    t: usize,
) -> Result<CoverageRequirements, CoverageError> {
    let n = model.parameters().len();
    if t == 0 || t > n {
        return Err(CoverageError::InvalidStrength {
            strength: t,
            parameters: n,
        });
    }
    let space = model.enumerate_scenarios()?;
    let mut set = BTreeSet::new();
    for params in (0..n).combinations(t) {
        for s in &space {
            set.insert(s.project(&params));
        }
    }
    Ok(CoverageRequirements {
        strength: Some(t),
        requirements: set.into_iter().collect(),
    })
}

/// Covered/uncovered split of `requirements` under `tests`. The returned
/// report has no executable violations; `valid` reflects coverage only.
pub fn covers(tests: &[Scenario], requirements: &CoverageRequirements) -> CoverageReport {
    let index = RequirementIndex::new(requirements.requirements());
    let mut hit = vec![false; requirements.len()];
    for t in tests {
        index.for_each_covered(t, |i| hit[i] = true);
    }
    let mut report = CoverageReport::default();
    for (r, covered) in requirements.iter().zip(hit) {
        if covered {
            report.covered.insert(r.clone());
        } else {
            report.uncovered.insert(r.clone());
        }
    }
    report.valid = report.uncovered.is_empty();
    report
}

/// Checks both validity conditions: the tests cover every requirement and
/// every test is executable.
pub fn validate_plan(plan: &TestPlan) -> CoverageReport {
    let mut report = covers(&plan.tests, &plan.requirements);
    report.executable_violations = plan
        .tests
        .iter()
        .filter(|t| !plan.model.is_executable(t))
        .cloned()
        .collect();
    report.valid = report.uncovered.is_empty() && report.executable_violations.is_empty();
    report
}

/// Greedy one-test-at-a-time construction. Starts from `must_include`, then
/// repeatedly adds the executable scenario covering the most still-uncovered
/// requirements; ties go to the lexicographically smallest scenario.
pub fn generate_covering_plan(
    model: &CombinatorialModel,
    requirements: &CoverageRequirements,
    must_include: &[Scenario],
) -> Result<Vec<Scenario>, CoverageError> {
    let mut plan: Vec<Scenario> = Vec::new();
    for s in must_include {
        model.check_scenario(s)?;
        if !model.is_executable(s) {
            return Err(CoverageError::NotExecutable(model.format_scenario(s)));
        }
        if !plan.contains(s) {
            plan.push(s.clone());
        }
    }
    plan.sort();

    let index = RequirementIndex::new(requirements.requirements());
    let mut uncovered = vec![true; requirements.len()];
    let mut remaining = requirements.len();
    for s in &plan {
        index.for_each_covered(s, |i| {
            if std::mem::take(&mut uncovered[i]) {
                remaining -= 1;
            }
        });
    }
    if remaining == 0 {
        return Ok(plan);
    }

    let space = model.enumerate_scenarios()?;
    while remaining > 0 {
        let mut best: Option<(usize, &Scenario)> = None;
        for s in &space {
            let mut gain = 0;
            index.for_each_covered(s, |i| gain += usize::from(uncovered[i]));
            if gain > best.map_or(0, |(g, _)| g) {
                best = Some((gain, s));
            }
        }
        let Some((_, chosen)) = best else {
            let first = uncovered.iter().position(|&u| u).expect("remaining > 0");
            return Err(CoverageError::Unreachable(
                model.format_interaction(&requirements.requirements()[first]),
            ));
        };
        index.for_each_covered(chosen, |i| {
            if std::mem::take(&mut uncovered[i]) {
                remaining -= 1;
            }
        });
        plan.push(chosen.clone());
    }
    Ok(plan)
}

/// Requirements grouped by the parameters they bind, so the requirements
/// covered by a scenario are found with one lookup per group.
/// Parameter set and, per projected value tuple, the requirement index.
type Group = (Vec<usize>, HashMap<Vec<usize>, usize>);

pub(crate) struct RequirementIndex {
    groups: Vec<Group>,
}

impl RequirementIndex {
    pub(crate) fn new(requirements: &[Interaction]) -> Self {
        let mut by_params: HashMap<Vec<usize>, HashMap<Vec<usize>, usize>> = HashMap::new();
        for (idx, r) in requirements.iter().enumerate() {
            let params: Vec<usize> = r.pairs().iter().map(|&(p, _)| p).collect();
            let values: Vec<usize> = r.pairs().iter().map(|&(_, v)| v).collect();
            by_params.entry(params).or_default().insert(values, idx);
        }
        let mut groups: Vec<_> = by_params.into_iter().collect();
        groups.sort_by(|a, b| a.0.cmp(&b.0));
        RequirementIndex { groups }
    }

    pub(crate) fn for_each_covered(&self, s: &Scenario, mut f: impl FnMut(usize)) {
        let values = s.values();
        let mut key = Vec::new();
        for (params, members) in &self.groups {
            key.clear();
            key.extend(params.iter().map(|&p| values[p]));
            if let Some(&idx) = members.get(&key) {
                f(idx);
            }
        }
    }
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

    fn t1_t2(m: &CombinatorialModel) -> Vec<Scenario> {
        vec![
            m.scenario(&["pos1", "pos1", "close", "open"]).unwrap(),
            m.scenario(&["pos2", "pos2", "close", "open"]).unwrap(),
        ]
    }

    #[test]
    fn pairwise_requirement_counts() {
        let m = robots();
        let reqs = t_wise_requirements(&m, 2).unwrap();
        assert_eq!(reqs.len(), 22);
        assert_eq!(reqs.strength(), Some(2));
        assert!(reqs.requirements().windows(2).all(|w| w[0] < w[1]));
        let diag = m.clone().with_restriction("P1 = P2").unwrap();
        assert_eq!(t_wise_requirements(&diag, 2).unwrap().len(), 16);
        let full = t_wise_requirements(&m, 4).unwrap();
        let space: Vec<Interaction> = m
            .enumerate_scenarios()
            .unwrap()
            .iter()
            .map(Scenario::as_interaction)
            .collect();
        assert_eq!(full.requirements(), space.as_slice());
        assert!(matches!(
            t_wise_requirements(&m, 5),
            Err(CoverageError::InvalidStrength { strength: 5, parameters: 4 })
        ));
        assert!(t_wise_requirements(&m, 0).is_err());
    }

    #[test]
    fn seeded_robot_plan_leaves_eleven_pairs_uncovered() {
        let m = robots();
        let reqs = t_wise_requirements(&m, 2).unwrap();
        let report = covers(&t1_t2(&m), &reqs);
        assert_eq!(report.covered.len(), 11);
        assert_eq!(report.uncovered.len(), 11);
        assert!(report.uncovered.contains(&m.parse_interaction("P1:pos1,P2:pos2").unwrap()));
        assert!(report.uncovered.contains(&m.parse_interaction("P1:pos3,P2:pos3").unwrap()));
        assert_eq!(covers(&[], &reqs).uncovered.len(), 22);
    }

    #[test]
    fn validity_needs_coverage_and_executability() {
        let m = robots();
        let reqs = t_wise_requirements(&m, 2).unwrap();
        let mut plan = TestPlan {
            model: m.clone(),
            requirements: reqs,
            tests: t1_t2(&m),
        };
        let report = validate_plan(&plan);
        assert!(!report.valid);
        assert_eq!(report.uncovered.len(), 11);
        assert!(report.executable_violations.is_empty());

        plan.tests.push(m.scenario(&["pos3", "pos3", "open", "open"]).unwrap());
        let report = validate_plan(&plan);
        assert!(!report.valid);
        assert_eq!(report.executable_violations.len(), 1);

        let diag = m.with_restriction("P1 = P2").unwrap();
        let plan = TestPlan {
            requirements: t_wise_requirements(&diag, 2).unwrap(),
            tests: diag.enumerate_scenarios().unwrap(),
            model: diag,
        };
        assert!(validate_plan(&plan).valid);
    }

    #[test]
    fn greedy_generation() {
        let m = robots();
        let diag = m.clone().with_restriction("P1 = P2").unwrap();
        let reqs = t_wise_requirements(&diag, 2).unwrap();
        let plan = generate_covering_plan(&diag, &reqs, &[]).unwrap();
        assert_eq!(plan, diag.enumerate_scenarios().unwrap());

        let reqs = t_wise_requirements(&m, 2).unwrap();
        let plan = generate_covering_plan(&m, &reqs, &t1_t2(&m)).unwrap();
        assert!(plan.len() >= 9 && plan.len() <= 22);
        assert_eq!(&plan[..2], t1_t2(&m).as_slice());
        assert!(covers(&plan, &reqs).valid);

        let t1 = t1_t2(&m).remove(0);
        let plan = generate_covering_plan(&m, &CoverageRequirements::default(), std::slice::from_ref(&t1)).unwrap();
        assert_eq!(plan, vec![t1]);

        let bad = m.scenario(&["pos1", "pos1", "open", "open"]).unwrap();
        assert!(matches!(
            generate_covering_plan(&m, &reqs, &[bad]),
            Err(CoverageError::NotExecutable(_))
        ));
    }

    #[test]
    fn requirements_from_links_drop_unreachable_members() {
        let m = robots().with_restriction("P1 = P2").unwrap();
        let links = ["P1:pos1,P2:pos1", "P1:pos1,P2:pos2", "P1:pos1,P2:pos1", "GM1:close"]
            .iter()
            .map(|l| m.parse_interaction(l).unwrap());
        let reqs = CoverageRequirements::from_interactions(&m, links).unwrap();
        assert_eq!(reqs.len(), 2);
        assert_eq!(reqs.strength(), None);
    }
}
