//! Core engine for human-centred agile combinatorial test design.
//!
//! A [`CombinatorialModel`] describes the executable scenario space through
//! parameters, finite value domains and restriction formulas. The coverage
//! engine derives t-wise requirements and checks or generates test plans, a
//! [`Session`] tracks the tester's Validated/Rejected/Uncertain
//! classification and proposes queries, and [`Project`] ties sessions to a
//! chain of abstraction levels with property traceability.

pub mod bundled;
pub mod coverage;
pub mod levels;
pub mod model;
pub mod project;
pub mod restriction;
pub mod session;

pub use coverage::{
    covers, generate_covering_plan, t_wise_requirements, validate_plan, CoverageError,
    CoverageReport, CoverageRequirements, TestPlan,
};

pub use model::{CombinatorialModel, Interaction, ModelError, Parameter, Scenario};
pub use restriction::{parse_restriction, ParseError, Restriction, RestrictionAst, TruthValue};
pub use session::{
    Answer, LogEntry, LogEvent, Query, QueryCandidate, QueryKind, RequirementSpec, Session,
    SessionError, TestState,
};
pub use levels::{
    AbstractionLevel, Assumption, AssumptionDiff, AssumptionEdits, AssumptionStatus, AuditReport,
    LevelError, LevelRequirements, MetaLevel, Project, Property, RetestEntry, TraceGraph,
    MAIN_SESSION,
};
pub use project::{ProjectError, FORMAT_VERSION};
