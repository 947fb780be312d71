//! Command implementations for the `hcatd` binary. Output goes to the
//! given writer so the commands can be exercised without a terminal.

use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use hcatd_core::{
    bundled, generate_covering_plan, t_wise_requirements, validate_plan, CombinatorialModel,
    CoverageReport, CoverageRequirements, Interaction, Project, QueryCandidate, Session, TestPlan,
    MAIN_SESSION,
};

#[derive(Debug, Parser)]
#[command(name = "hcatd", version, about = "Interactive combinatorial test design")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the session's Validated tests against its requirements.
    /// Exits 0 if the plan is valid, 1 if not.
    Validate {
        file: PathBuf,
        #[arg(long, default_value = MAIN_SESSION)]
        session: String,
    },
    /// Print covered and uncovered requirements.
    Coverage {
        file: PathBuf,
        /// Use all t-wise interactions instead of the session requirements.
        #[arg(long)]
        strength: Option<usize>,
        #[arg(long, default_value = MAIN_SESSION)]
        session: String,
    },
    /// Generate a covering test plan greedily.
    Plan {
        file: PathBuf,
        /// Start from the session's Validated tests.
        #[arg(long)]
        keep_validated: bool,
        #[arg(long)]
        strength: Option<usize>,
        #[arg(long, default_value = MAIN_SESSION)]
        session: String,
    },
    /// Answer queries interactively; the file is saved after each answer.
    Query {
        file: PathBuf,
        #[arg(long, default_value = MAIN_SESSION)]
        session: String,
    },
    /// Abstraction audit of one level.
    Audit {
        file: PathBuf,
        #[arg(long)]
        level: usize,
    },
    /// Assumption changes from a level to the next.
    DiffAssumptions {
        file: PathBuf,
        #[arg(long)]
        level: usize,
    },
    /// Tests to re-run after an assumption is contradicted at a level.
    /// Marks the assumptions contradicted, demotes the tests and saves.
    Retest {
        file: PathBuf,
        #[arg(long)]
        assumption: String,
        #[arg(long)]
        level: usize,
        /// Only print the retest set.
        #[arg(long)]
        dry_run: bool,
    },
    /// Serve the project over HTTP.
    Serve {
        file: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Write the bundled robot example project.
    Example { file: PathBuf },
}

const INVALID: u8 = 1;

pub fn load(path: &Path) -> Result<Project> {
    Project::load(path).map_err(Into::into)
}

fn session<'a>(project: &'a Project, id: &str) -> Result<&'a Session> {
    Ok(project.session(id)?)
}

fn requirements(session: &Session, strength: Option<usize>) -> Result<CoverageRequirements> {
    match strength {
        Some(t) => Ok(t_wise_requirements(session.model(), t)?),
        None => Ok(session.requirements().clone()),
    }
}

fn print_interactions<'a>(
    out: &mut dyn Write,
    model: &CombinatorialModel,
    title: &str,
    items: impl IntoIterator<Item = &'a Interaction>,
) -> Result<()> {
    writeln!(out, "{title}:")?;
    for i in items {
        writeln!(out, "  {}", model.format_interaction(i))?;
    }
    Ok(())
}

fn print_report(
    out: &mut dyn Write,
    model: &CombinatorialModel,
    reqs: &CoverageRequirements,
    report: &CoverageReport,
) -> Result<()> {
    let strength = reqs
        .strength()
        .map(|t| format!(" (strength {t})"))
        .unwrap_or_default();
    writeln!(
        out,
        "{} requirements{strength}: {} covered, {} uncovered",
        reqs.len(),
        report.covered.len(),
        report.uncovered.len()
    )?;
    if !report.uncovered.is_empty() {
        print_interactions(out, model, "uncovered", &report.uncovered)?;
    }
    if !report.executable_violations.is_empty() {
        writeln!(out, "non-executable tests:")?;
        for s in &report.executable_violations {
            writeln!(out, "  {}", model.format_scenario(s))?;
        }
    }
    Ok(())
}

fn validate(out: &mut dyn Write, file: &Path, session_id: &str) -> Result<ExitCode> {
    let project = load(file)?;
    let s = session(&project, session_id)?;
    let plan = s.plan();
    let report = validate_plan(&plan);
    writeln!(out, "{} tests", plan.tests.len())?;
    print_report(out, s.model(), &plan.requirements, &report)?;
    if report.valid {
        writeln!(out, "plan is valid")?;
        Ok(ExitCode::SUCCESS)
    } else {
        writeln!(out, "plan is invalid")?;
        Ok(ExitCode::from(INVALID))
    }
}

fn coverage(out: &mut dyn Write, file: &Path, strength: Option<usize>, session_id: &str) -> Result<ExitCode> {
    let project = load(file)?;
    let s = session(&project, session_id)?;
    let reqs = requirements(s, strength)?;
    let report = validate_plan(&TestPlan {
        model: s.model().clone(),
        requirements: reqs.clone(),
        tests: s.validated(),
    });
    print_report(out, s.model(), &reqs, &report)?;
    if !report.covered.is_empty() {
        print_interactions(out, s.model(), "covered", &report.covered)?;
    }
    let unreachable: Vec<Interaction> = s
        .unreachable_requirements()
        .into_iter()
        .filter(|i| report.uncovered.contains(i))
        .collect();
    if strength.is_none() && !unreachable.is_empty() {
        print_interactions(out, s.model(), "unreachable (every extension rejected)", &unreachable)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn plan(
    out: &mut dyn Write,
    file: &Path,
    keep_validated: bool,
    strength: Option<usize>,
    session_id: &str,
) -> Result<ExitCode> {
    let project = load(file)?;
    let s = session(&project, session_id)?;
    let reqs = requirements(s, strength)?;
    let seed = if keep_validated { s.validated() } else { Vec::new() };
    let tests = generate_covering_plan(s.model(), &reqs, &seed)?;
    writeln!(out, "{} tests for {} requirements", tests.len(), reqs.len())?;
    for t in &tests {
        let tag = if seed.contains(t) { " (validated)" } else { "" };
        writeln!(out, "  {}{tag}", s.model().format_scenario(t))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn query(out: &mut dyn Write, input: &mut dyn BufRead, file: &Path, session_id: &str) -> Result<ExitCode> {
    let mut project = load(file)?;
    loop {
        let s = session(&project, session_id)?;
        let Some(q) = s.next_queries(1).into_iter().next() else {
            let report = s.coverage_report();
            if report.valid {
                writeln!(out, "all requirements covered")?;
            } else {
                writeln!(out, "no open queries; {} requirements stay uncovered", report.uncovered.len())?;
            }
            return Ok(ExitCode::SUCCESS);
        };
        let m = s.model();
        match &q.candidate {
            QueryCandidate::Test(t) => writeln!(out, "confirm test {}", m.format_scenario(t))?,
            QueryCandidate::Restriction(r) => writeln!(out, "add restriction {}", r.source())?,
        }
        writeln!(out, "  resolves {} uncovered requirements", q.rank_score)?;
        for r in &q.motivating_requirements {
            writeln!(out, "    {}", m.format_interaction(r))?;
        }
        loop {
            write!(out, "accept/reject/quit> ")?;
            out.flush()?;
            let mut line = String::new();
            if input.read_line(&mut line)? == 0 {
                writeln!(out)?;
                return Ok(ExitCode::SUCCESS);
            }
            let answer = match line.trim() {
                "a" | "accept" | "y" | "yes" => hcatd_core::Answer::Accept,
                "r" | "reject" | "n" | "no" => hcatd_core::Answer::Reject,
                "q" | "quit" => return Ok(ExitCode::SUCCESS),
                other => {
                    writeln!(out, "unrecognised answer `{other}`")?;
                    continue;
                }
            };
            match project.session_mut(session_id)?.answer_query(&q.id, answer) {
                Ok(()) => {
                    project.save(file)?;
                    break;
                }
                Err(e) => {
                    writeln!(out, "{e}")?;
                    if answer == hcatd_core::Answer::Reject {
                        return Err(e.into());
                    }
                }
            }
        }
    }
}

fn audit(out: &mut dyn Write, file: &Path, level: usize) -> Result<ExitCode> {
    let project = load(file)?;
    let report = project.abstraction_audit(level)?;
    let lists = [
        ("silently abstracted", &report.silently_abstracted),
        ("coverage debt", &report.coverage_debt),
        ("untestable", &report.untestable),
    ];
    for (title, items) in lists {
        if items.is_empty() {
            writeln!(out, "{title}: none")?;
        } else {
            writeln!(out, "{title}: {}", items.join(", "))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn diff_assumptions(out: &mut dyn Write, file: &Path, level: usize) -> Result<ExitCode> {
    let project = load(file)?;
    let diff = project.assumption_diff(level)?;
    writeln!(out, "level {level} -> {}", level + 1)?;
    if diff.is_empty() {
        writeln!(out, "no changes")?;
    }
    for a in &diff.added {
        writeln!(out, "+ {a}")?;
    }
    for a in &diff.removed {
        writeln!(out, "- {a}")?;
    }
    for (from, to) in &diff.modified {
        if from == to {
            writeln!(out, "~ {from}")?;
        } else {
            writeln!(out, "~ {from} -> {to}")?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn retest(out: &mut dyn Write, file: &Path, assumption: &str, level: usize, dry_run: bool) -> Result<ExitCode> {
    let mut project = load(file)?;
    let plan = if dry_run {
        project.retest_plan(assumption, level)?
    } else {
        let plan = project.retest_set(assumption, level)?;
        project.save(file)?;
        plan
    };
    if plan.is_empty() {
        writeln!(out, "nothing to retest")?;
    }
    let model = project.model().clone();
    for (l, entries) in &plan {
        writeln!(out, "level {l}:")?;
        for e in entries {
            writeln!(out, "  {} ({} tests)", e.property, e.tests.len())?;
            for t in &e.tests {
                writeln!(out, "    {}", model.format_scenario(t))?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn serve(file: &Path, host: &str, port: u16) -> Result<ExitCode> {
    let project = load(file)?;
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .with_context(|| format!("invalid address {host}:{port}"))?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime
        .block_on(hcatd_server::serve(project, Some(file.to_path_buf()), addr))
        .with_context(|| format!("cannot serve on {addr}"))?;
    Ok(ExitCode::SUCCESS)
}

fn example(out: &mut dyn Write, file: &Path) -> Result<ExitCode> {
    if file.exists() {
        bail!("{} already exists", file.display());
    }
    std::fs::write(file, bundled::ROBOTS).with_context(|| format!("cannot write {}", file.display()))?;
    writeln!(out, "wrote {}", file.display())?;
    Ok(ExitCode::SUCCESS)
}

/// Runs one command. Errors are input errors (exit code 2).
pub fn run(cli: Cli, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { file, session } => validate(out, &file, &session),
        Command::Coverage {
            file,
            strength,
            session,
        } => coverage(out, &file, strength, &session),
        Command::Plan {
            file,
            keep_validated,
            strength,
            session,
        } => plan(out, &file, keep_validated, strength, &session),
        Command::Query { file, session } => query(out, input, &file, &session),
        Command::Audit { file, level } => audit(out, &file, level),
        Command::DiffAssumptions { file, level } => diff_assumptions(out, &file, level),
        Command::Retest {
            file,
            assumption,
            level,
            dry_run,
        } => retest(out, &file, &assumption, level, dry_run),
        Command::Serve { file, port, host } => serve(&file, &host, port),
        Command::Example { file } => example(out, &file),
    }
}
