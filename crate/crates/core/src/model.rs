//! Combinatorial models: parameters with finite domains, restrictions, and
//! the executable scenario space they induce.
//!
//! Parameters and values are addressed by index (declaration order).
//! [`Interaction`]s and [`Scenario`]s store indices only; the owning model
//! renders them to and from the canonical `P1:v1,P2:v2` text form.

use std::fmt;

use thiserror::Error;

use crate::restriction::{is_ident, ParseError, Restriction, TruthValue};

/// Default bound on the size of the unrestricted Cartesian space.
pub const DEFAULT_SCENARIO_CAP: u64 = 1_000_000;

/// Read access to a (possibly partial) assignment of value indices.
pub trait Assignment {
    fn value_of(&self, param: usize) -> Option<usize>;
}

impl Assignment for [Option<usize>] {
    fn value_of(&self, param: usize) -> Option<usize> {
        self.get(param).copied().flatten()
    }
}

impl Assignment for Vec<Option<usize>> {
    fn value_of(&self, param: usize) -> Option<usize> {
        self.as_slice().value_of(param)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Parameter {
    pub(crate) name: String,
    pub(crate) values: Vec<String>,
}

impl Parameter {
    pub fn new<I, S>(name: impl Into<String>, values: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let name = name.into();
        if !is_ident(&name) {
            return Err(ModelError::InvalidName {
                name,
                reason: "parameter names must be identifiers",
            });
        }
        let values: Vec<String> = values.into_iter().map(Into::into).collect();
        if values.is_empty() {
            return Err(ModelError::EmptyDomain(name));
        }
        for (i, v) in values.iter().enumerate() {
            if v.is_empty() || v.contains([',', ':', '"', '\\']) || v.trim() != v {
                return Err(ModelError::InvalidName {
                    name: v.clone(),
                    reason: "values must be non-empty without surrounding whitespace and must not contain `,` `:` `\"` or `\\`",
                });
            }
            if values[..i].contains(v) {
                return Err(ModelError::DuplicateValue {
                    parameter: name,
                    value: v.clone(),
                });
            }
        }
        Ok(Parameter { name, values })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }
}

/// Partial assignment: at most one value per parameter, kept sorted by
/// parameter index. The derived ordering is the lexicographic order over
/// `(parameter, value)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Interaction(Vec<(usize, usize)>);

impl Interaction {
    pub fn empty() -> Self {
        Interaction(Vec::new())
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, ModelError> {
        let mut pairs: Vec<(usize, usize)> = pairs.into_iter().collect();
        pairs.sort_unstable();
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(ModelError::DuplicateBinding(w[0].0.to_string()));
        }
        Ok(Interaction(pairs))
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, param: usize) -> Option<usize> {
        self.0
            .binary_search_by_key(&param, |&(p, _)| p)
            .ok()
            .map(|i| self.0[i].1)
    }

    /// `self ⊆ other`.
    pub fn is_subset_of(&self, other: &Interaction) -> bool {
        self.0.iter().all(|&(p, v)| other.get(p) == Some(v))
    }
}

impl Assignment for Interaction {
    fn value_of(&self, param: usize) -> Option<usize> {
        self.get(param)
    }
}

/// Total assignment, one value index per parameter in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scenario(Vec<usize>);

impl Scenario {
    pub fn new(values: Vec<usize>) -> Self {
        Scenario(values)
    }

    pub fn values(&self) -> &[usize] {
        &self.0
    }

    pub fn covers(&self, interaction: &Interaction) -> bool {
        interaction
            .pairs()
            .iter()
            .all(|&(p, v)| self.0.get(p) == Some(&v))
    }

    /// Restriction of the scenario to the given parameters.
    pub fn project(&self, params: &[usize]) -> Interaction {
        let mut pairs: Vec<(usize, usize)> = params.iter().map(|&p| (p, self.0[p])).collect();
        pairs.sort_unstable();
        pairs.dedup();
        Interaction(pairs)
    }

    pub fn as_interaction(&self) -> Interaction {
        Interaction(self.0.iter().copied().enumerate().collect())
    }
}

impl Assignment for Scenario {
    fn value_of(&self, param: usize) -> Option<usize> {
        self.0.get(param).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid name `{name}`: {reason}")]
    InvalidName { name: String, reason: &'static str },
    #[error("a model needs at least one parameter")]
    NoParameters,
    #[error("duplicate parameter `{0}`")]
    DuplicateParameter(String),
    #[error("parameter `{0}` has an empty domain")]
    EmptyDomain(String),
    #[error("duplicate value `{value}` in domain of `{parameter}`")]
    DuplicateValue { parameter: String, value: String },
    #[error("restriction `{source_text}`: {error}")]
    Restriction {
        source_text: String,
        #[source]
        error: ParseError,
    },
    #[error("scenario space has {size} candidates, above the cap of {cap}")]
    SpaceTooLarge { size: u128, cap: u64 },
    #[error("parameter `{0}` is bound more than once")]
    DuplicateBinding(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("value `{value}` is not in the domain of `{parameter}`")]
    ValueNotInDomain { parameter: String, value: String },
    #[error("scenario `{0}` does not assign every parameter")]
    NotTotal(String),
    #[error("malformed binding `{0}`; expected `PARAM:value`")]
    MalformedBinding(String),
}

/// Non-fatal observations about a model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelWarning {
    /// No scenario satisfies every restriction.
    EmptySpace,
}

impl fmt::Display for ModelWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelWarning::EmptySpace => f.write_str("the restrictions admit no executable scenario"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombinatorialModel {
    parameters: Vec<Parameter>,
    restrictions: Vec<Restriction>,
    scenario_cap: u64,
}

impl CombinatorialModel {
    pub fn new(parameters: Vec<Parameter>) -> Result<Self, ModelError> {
        if parameters.is_empty() {
            return Err(ModelError::NoParameters);
        }
        for (i, p) in parameters.iter().enumerate() {
            if parameters[..i].iter().any(|q| q.name == p.name) {
                return Err(ModelError::DuplicateParameter(p.name.clone()));
            }
        }
        Ok(CombinatorialModel {
            parameters,
            restrictions: Vec::new(),
            scenario_cap: DEFAULT_SCENARIO_CAP,
        })
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.scenario_cap = cap;
        self
    }

    pub fn with_restriction(mut self, source: &str) -> Result<Self, ModelError> {
        self.add_restriction(source)?;
        Ok(self)
    }

    /// Parses `source` against this model's signature without adding it.
    pub fn parse_restriction(&self, source: &str) -> Result<Restriction, ModelError> {
        Restriction::parse(source, &self.parameters).map_err(|error| ModelError::Restriction {
            source_text: source.to_string(),
            error,
        })
    }

    pub fn add_restriction(&mut self, source: &str) -> Result<&Restriction, ModelError> {
        let r = self.parse_restriction(source)?;
        self.restrictions.push(r);
        Ok(self.restrictions.last().expect("just pushed"))
    }

    /// Appends an already-parsed restriction. It must have been parsed
    /// against a signature identical to this model's.
    pub fn push_restriction(&mut self, restriction: Restriction) {
        self.restrictions.push(restriction);
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.parameters
    }

    pub fn restrictions(&self) -> &[Restriction] {
        &self.restrictions
    }

    pub fn scenario_cap(&self) -> u64 {
        self.scenario_cap
    }

    pub fn parameter_index(&self, name: &str) -> Option<usize> {
        self.parameters.iter().position(|p| p.name == name)
    }

    /// Size of the unrestricted Cartesian space.
    pub fn space_size(&self) -> u128 {
        self.parameters
            .iter()
            .fold(1u128, |acc, p| acc.saturating_mul(p.values.len() as u128))
    }

    fn check_cap(&self) -> Result<(), ModelError> {
        let size = self.space_size();
        if size > u128::from(self.scenario_cap) {
            return Err(ModelError::SpaceTooLarge {
                size,
                cap: self.scenario_cap,
            });
        }
        Ok(())
    }

    pub fn warnings(&self) -> Result<Vec<ModelWarning>, ModelError> {
        if self.is_extendable(&Interaction::empty())? {
            Ok(Vec::new())
        } else {
            Ok(vec![ModelWarning::EmptySpace])
        }
    }

    /// Conjunction of all restrictions under the given assignment.
    pub fn restrictions_hold<A: Assignment + ?Sized>(&self, assignment: &A) -> TruthValue {
        let mut acc = TruthValue::True;
        for r in &self.restrictions {
            acc = acc.and(r.evaluate(assignment));
            if acc == TruthValue::False {
                break;
            }
        }
        acc
    }

    pub fn is_executable(&self, s: &Scenario) -> bool {
        self.restrictions_hold(s) == TruthValue::True
    }

    /// Every executable scenario, in lexicographic order.
    pub fn enumerate_scenarios(&self) -> Result<Vec<Scenario>, ModelError> {
        self.extensions(&Interaction::empty())
    }

    /// Executable scenarios that extend `fixed`, in lexicographic order.
    pub fn extensions(&self, fixed: &Interaction) -> Result<Vec<Scenario>, ModelError> {
        self.check_cap()?;
        let mut out = Vec::new();
        self.search(fixed, &mut |s| {
            out.push(Scenario(s.to_vec()));
            true
        });
        Ok(out)
    }

    /// Whether some executable scenario extends `i`.
    pub fn is_extendable(&self, i: &Interaction) -> Result<bool, ModelError> {
        self.check_cap()?;
        let mut partial: Vec<Option<usize>> = vec![None; self.parameters.len()];
        for &(p, v) in i.pairs() {
            partial[p] = Some(v);
        }
        Ok(self.exists_completion(&mut partial, 0))
    }

    fn exists_completion(&self, partial: &mut Vec<Option<usize>>, next: usize) -> bool {
        match self.restrictions_hold(partial) {
            TruthValue::False => return false,
            // Kleene monotonicity: every completion stays True.
            TruthValue::True => return true,
            TruthValue::Unknown => {}
        }
        let Some(param) = (next..self.parameters.len()).find(|&p| partial[p].is_none()) else {
            return false;
        };
        for v in 0..self.parameters[param].values.len() {
            partial[param] = Some(v);
            if self.exists_completion(partial, param + 1) {
                partial[param] = None;
                return true;
            }
        }
        partial[param] = None;
        false
    }

    /// Depth-first walk over completions of `fixed` in declaration order,
    /// pruning as soon as a restriction is definitively false. `visit`
    /// returns false to stop.
    fn search(&self, fixed: &Interaction, visit: &mut dyn FnMut(&[usize]) -> bool) {
        let mut partial: Vec<Option<usize>> = vec![None; self.parameters.len()];
        for &(p, v) in fixed.pairs() {
            partial[p] = Some(v);
        }
        let mut scratch = vec![0usize; self.parameters.len()];
        self.search_from(&mut partial, 0, &mut scratch, visit);
    }

    fn search_from(
        &self,
        partial: &mut Vec<Option<usize>>,
        param: usize,
        scratch: &mut [usize],
        visit: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        if self.restrictions_hold(partial) == TruthValue::False {
            return true;
        }
        if param == self.parameters.len() {
            for (slot, v) in scratch.iter_mut().zip(partial.iter()) {
                *slot = v.expect("total at leaf");
            }
            return visit(scratch);
        }
        if partial[param].is_some() {
            return self.search_from(partial, param + 1, scratch, visit);
        }
        for v in 0..self.parameters[param].values.len() {
            partial[param] = Some(v);
            if !self.search_from(partial, param + 1, scratch, visit) {
                partial[param] = None;
                return false;
            }
        }
        partial[param] = None;
        true
    }

    /// Checks that every binding names a parameter and an in-domain value.
    pub fn check_interaction(&self, i: &Interaction) -> Result<(), ModelError> {
        for &(p, v) in i.pairs() {
            let param = self
                .parameters
                .get(p)
                .ok_or_else(|| ModelError::UnknownParameter(format!("#{p}")))?;
            if v >= param.values.len() {
                return Err(ModelError::ValueNotInDomain {
                    parameter: param.name.clone(),
                    value: format!("#{v}"),
                });
            }
        }
        Ok(())
    }

    pub fn check_scenario(&self, s: &Scenario) -> Result<(), ModelError> {
        if s.0.len() != self.parameters.len() {
            return Err(ModelError::NotTotal(format!("{:?}", s.0)));
        }
        self.check_interaction(&s.as_interaction())
    }

    pub fn format_interaction(&self, i: &Interaction) -> String {
        i.pairs()
            .iter()
            .map(|&(p, v)| {
                let param = &self.parameters[p];
                format!("{}:{}", param.name, param.values[v])
            })
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Canonical scenario key, `P1:v1,P2:v2,…` in declaration order.
    pub fn format_scenario(&self, s: &Scenario) -> String {
        self.format_interaction(&s.as_interaction())
    }

    pub fn parse_interaction(&self, text: &str) -> Result<Interaction, ModelError> {
        let text = text.trim();
        if text.is_empty() {
            return Ok(Interaction::empty());
        }
        let mut pairs = Vec::new();
        for binding in text.split(',') {
            let (name, value) = binding
                .split_once(':')
                .ok_or_else(|| ModelError::MalformedBinding(binding.trim().to_string()))?;
            let (name, value) = (name.trim(), value.trim());
            let p = self
                .parameter_index(name)
                .ok_or_else(|| ModelError::UnknownParameter(name.to_string()))?;
            let v = self.parameters[p]
                .values
                .iter()
                .position(|x| x == value)
                .ok_or_else(|| ModelError::ValueNotInDomain {
                    parameter: name.to_string(),
                    value: value.to_string(),
                })?;
            pairs.push((p, v));
        }
        Interaction::from_pairs(pairs).map_err(|e| match e {
            ModelError::DuplicateBinding(p) => {
                let idx: usize = p.parse().unwrap_or_default();
                ModelError::DuplicateBinding(self.parameters[idx].name.clone())
            }
            other => other,
        })
    }

    pub fn parse_scenario(&self, text: &str) -> Result<Scenario, ModelError> {
        let i = self.parse_interaction(text)?;
        if i.len() != self.parameters.len() {
            return Err(ModelError::NotTotal(text.trim().to_string()));
        }
        Ok(Scenario(i.pairs().iter().map(|&(_, v)| v).collect()))
    }

    /// Builds a scenario from value names given in declaration order.
    pub fn scenario<S: AsRef<str>>(&self, values: &[S]) -> Result<Scenario, ModelError> {
        if values.len() != self.parameters.len() {
            return Err(ModelError::NotTotal(
                values.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(","),
            ));
        }
        values
            .iter()
            .zip(&self.parameters)
            .map(|(v, p)| {
                p.values
                    .iter()
                    .position(|x| x == v.as_ref())
                    .ok_or_else(|| ModelError::ValueNotInDomain {
                        parameter: p.name.clone(),
                        value: v.as_ref().to_string(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

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

    #[test]
    fn executability() {
        let m = robots();
        let s = m.scenario(&["pos1", "pos1", "close", "open"]).unwrap();
        assert!(m.is_executable(&s));
        let s = m.scenario(&["pos1", "pos1", "open", "open"]).unwrap();
        assert!(!m.is_executable(&s));
        let m = m.with_restriction("P1 = P2").unwrap();
        let s = m.scenario(&["pos1", "pos2", "close", "open"]).unwrap();
        assert!(!m.is_executable(&s));
    }

    #[test]
    fn enumeration_counts() {
        let m = robots();
        let all = m.enumerate_scenarios().unwrap();
        assert_eq!(all.len(), 9);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(m.format_scenario(&all[0]), "P1:pos1,P2:pos1,GM1:close,GM2:open");
        assert_eq!(m.format_scenario(&all[8]), "P1:pos3,P2:pos3,GM1:close,GM2:open");

        let diag = m.clone().with_restriction("P1 = P2").unwrap();
        let e = diag.enumerate_scenarios().unwrap();
        assert_eq!(e.len(), 3);
        assert!(e.iter().all(|s| s.values()[0] == s.values()[1]));

        let single = CombinatorialModel::new(vec![Parameter::new("A", ["v"]).unwrap()]).unwrap();
        assert_eq!(single.enumerate_scenarios().unwrap().len(), 1);
    }

    #[test]
    fn extendability() {
        let m = robots();
        let i = m.parse_interaction("P1:pos1,P2:pos2").unwrap();
        assert!(m.is_extendable(&i).unwrap());
        let diag = m.clone().with_restriction("P1 = P2").unwrap();
        assert!(!diag.is_extendable(&i).unwrap());
        assert!(diag.is_extendable(&Interaction::empty()).unwrap());
        let empty = m.with_restriction("GM1 = open").unwrap();
        assert!(!empty.is_extendable(&Interaction::empty()).unwrap());
        assert_eq!(empty.warnings().unwrap(), vec![ModelWarning::EmptySpace]);
        assert!(empty.enumerate_scenarios().unwrap().is_empty());
    }

    #[test]
    fn cap_is_enforced() {
        let params = (0..7)
            .map(|i| Parameter::new(format!("X{i}"), ["a", "b", "c", "d", "e", "f", "g", "h"]).unwrap())
            .collect();
        let m = CombinatorialModel::new(params).unwrap();
        assert!(matches!(
            m.enumerate_scenarios(),
            Err(ModelError::SpaceTooLarge { size: 2_097_152, cap: 1_000_000 })
        ));
        assert!(m.clone().with_cap(3_000_000).is_extendable(&Interaction::empty()).unwrap());
        assert!(matches!(m.is_extendable(&Interaction::empty()), Err(ModelError::SpaceTooLarge { .. })));
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(Parameter::new("A", Vec::<String>::new()), Err(ModelError::EmptyDomain(_))));
        assert!(matches!(Parameter::new("A", ["x", "x"]), Err(ModelError::DuplicateValue { .. })));
        assert!(matches!(Parameter::new("1A", ["x"]), Err(ModelError::InvalidName { .. })));
        assert!(matches!(Parameter::new("A", ["x:y"]), Err(ModelError::InvalidName { .. })));
        let a = Parameter::new("A", ["x"]).unwrap();
        assert!(matches!(
            CombinatorialModel::new(vec![a.clone(), a]),
            Err(ModelError::DuplicateParameter(_))
        ));
        assert!(matches!(CombinatorialModel::new(vec![]), Err(ModelError::NoParameters)));
        assert!(matches!(
            robots().with_restriction("GM1 = sideways"),
            Err(ModelError::Restriction { .. })
        ));
    }

    #[test]
    fn interaction_literals() {
        let m = robots();
        let i = m.parse_interaction("P2:pos2, P1:pos1").unwrap();
        assert_eq!(m.format_interaction(&i), "P1:pos1,P2:pos2");
        assert!(matches!(
            m.parse_interaction("P1:pos1,P1:pos2"),
            Err(ModelError::DuplicateBinding(ref p)) if p == "P1"
        ));
        assert!(matches!(m.parse_interaction("P1=pos1"), Err(ModelError::MalformedBinding(_))));
        assert!(matches!(m.parse_scenario("P1:pos1"), Err(ModelError::NotTotal(_))));
        assert!(m.parse_interaction("").unwrap().is_empty());
        let s = m.parse_scenario("GM2:open,GM1:close,P2:pos3,P1:pos3").unwrap();
        assert_eq!(s, m.scenario(&["pos3", "pos3", "close", "open"]).unwrap());
        assert!(!s.covers(&i));
        assert!(s.covers(&m.parse_interaction("P1:pos3,GM2:open").unwrap()));
    }
}
