//! Stateful depth-first exploration: shared scaffolding plus the static
//! safe-set explorer. The eager and lazy source-set explorers build on the
//! same context.

mod eager;
mod lazy;
mod spor;

pub use eager::{EagerFaults, explore_de_spor, explore_de_spor_faulty, update_back, update_curr};
pub use lazy::explore_dl_spor;
pub use spor::{explore_full_stateful, explore_spor};

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use crate::lts::{Fingerprint, ReducedLts};
use crate::program::{self, Action, Fault, Program, State, StepError, ThreadId};
use crate::strategy::{Chooser, StrategyConfig, StrategyError};

/// Exploration cost counters. Wall time is informational; the structural
/// fields are deterministic for a fixed program and configuration.
#[derive(Debug, Clone, Default)]
pub struct Metrics {
    pub states: usize,
    pub transitions: usize,
    pub retraversed_transitions: usize,
    pub wall_time: Duration,
    pub peak_book_count: usize,
}

impl Metrics {
    /// The deterministic part of the metrics, for run-to-run comparison.
    pub fn structural(&self) -> (usize, usize, usize, usize) {
        (
            self.states,
            self.transitions,
            self.retraversed_transitions,
            self.peak_book_count,
        )
    }
}

/// Why an exploration ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// The reduced graph is complete.
    Exhausted,
    /// A final state's outcome is outside the admitted set. The trace replays
    /// from the initial state to that final state.
    ViolationFound {
        trace: Vec<Action>,
        outcome: Vec<i64>,
    },
    /// A non-final state with no enabled threads.
    Deadlock { trace: Vec<Action> },
    /// A runtime fault (unlock of a lock not held, arithmetic overflow).
    ProgramError { trace: Vec<Action>, fault: Fault },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Exhausted => "exhausted",
            Verdict::ViolationFound { .. } => "violation",
            Verdict::Deadlock { .. } => "deadlock",
            Verdict::ProgramError { .. } => "program-error",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExploreMode {
    Exhaustive,
    UntilFirstError,
}

/// Result of one exploration run.
#[derive(Debug)]
pub struct ExploreOutcome {
    pub lts: ReducedLts,
    pub root: Fingerprint,
    pub metrics: Metrics,
    pub verdict: Verdict,
}

#[derive(Debug, thiserror::Error)]
pub enum ExploreError {
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("exploration timed out after {0:?}")]
    Timeout(Duration),
}

/// The exploration algorithms exposed by the tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Static safe sets only.
    Spor,
    /// Eager dynamic source sets on top of safe sets.
    DeSpor,
    /// Lazy dynamic source sets on top of safe sets.
    DlSpor,
    /// Every enabled thread at every state (visited-stop still applies).
    Full,
}

impl Algorithm {
    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::Spor => "spor",
            Algorithm::DeSpor => "de",
            Algorithm::DlSpor => "dl",
            Algorithm::Full => "full",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spor" => Ok(Algorithm::Spor),
            "de" | "despor" => Ok(Algorithm::DeSpor),
            "dl" | "dlspor" => Ok(Algorithm::DlSpor),
            "full" => Ok(Algorithm::Full),
            other => Err(format!("unknown algorithm {other:?}")),
        }
    }
}

/// Run the chosen algorithm with an optional deadline.
pub fn explore(
    p: &Program,
    alg: Algorithm,
    cfg: &StrategyConfig,
    mode: ExploreMode,
    deadline: Option<Instant>,
) -> Result<ExploreOutcome, ExploreError> {
    match alg {
        Algorithm::Spor => spor::explore_spor_bounded(p, cfg, mode, deadline),
        Algorithm::DeSpor => eager::explore_de_spor_bounded(p, cfg, mode, deadline),
        Algorithm::DlSpor => lazy::explore_dl_spor_bounded(p, cfg, mode, deadline),
        Algorithm::Full => spor::explore_full_stateful_bounded(p, cfg, mode, deadline),
    }
}

/// The static reduction of a state: a single enabled thread whose pending
/// action is invisible when one exists (chosen by the active strategy's fixed
/// order), otherwise every enabled thread. A state whose safe set equals its
/// enabled set with all pending actions visible is irreducible.
pub fn safe_set(p: &Program, s: &State, chooser: &Chooser) -> BTreeSet<ThreadId> {
    let en = program::enabled(p, s);
    let invisible: BTreeSet<ThreadId> = en
        .iter()
        .copied()
        .filter(|&t| p.pending_action(s, t).is_some_and(|a| !a.is_visible()))
        .collect();
    match chooser.first_by_order(&invisible) {
        Some(t) => BTreeSet::from([t]),
        None => en,
    }
}

/// Internal early-termination signal threaded through the DFS.
#[derive(Debug)]
pub(crate) enum Halt {
    Violation {
        trace: Vec<Action>,
        outcome: Vec<i64>,
    },
    Deadlock {
        trace: Vec<Action>,
    },
    Fault {
        trace: Vec<Action>,
        fault: Fault,
    },
    Timeout,
}

/// Shared exploration state for all three algorithms.
pub(crate) struct Ctx<'a> {
    pub p: &'a Program,
    pub chooser: Chooser,
    pub mode: ExploreMode,
    pub lts: ReducedLts,
    pub path: Vec<Action>,
    pub retraversed: usize,
    pub live_books: usize,
    pub peak_books: usize,
    pub(crate) root_fp: Option<Fingerprint>,
    deadline: Option<Instant>,
    ticks: u32,
    started: Instant,
}

impl<'a> Ctx<'a> {
    pub fn new(
        p: &'a Program,
        cfg: &StrategyConfig,
        mode: ExploreMode,
        deadline: Option<Instant>,
    ) -> Result<Self, ExploreError> {
        Ok(Ctx {
            p,
            chooser: Chooser::new(cfg, p.thread_count())?,
            mode,
            lts: ReducedLts::new(),
            path: Vec::new(),
            retraversed: 0,
            live_books: 0,
            peak_books: 0,
            root_fp: None,
            deadline,
            ticks: 0,
            started: Instant::now(),
        })
    }

    /// Periodic deadline check; cheap enough to call once per transition.
    pub fn tick(&mut self) -> Result<(), Halt> {
        self.ticks = self.ticks.wrapping_add(1);
        if self.ticks.is_multiple_of(64)
            && let Some(deadline) = self.deadline
            && Instant::now() >= deadline
        {
            return Err(Halt::Timeout);
        }
        Ok(())
    }

    pub fn note_book_allocated(&mut self) {
        self.live_books += 1;
        self.peak_books = self.peak_books.max(self.live_books);
    }

    pub fn note_book_dropped(&mut self) {
        self.live_books -= 1;
    }

    /// Execute `next(s, t)`, mapping runtime faults to a halt.
    pub fn step(&mut self, s: &State, t: ThreadId) -> Result<program::Step, Halt> {
        program::next(self.p, s, t).map_err(|e| match e {
            StepError::Fault(fault) => Halt::Fault {
                trace: self.path.clone(),
                fault,
            },
            StepError::Blocked(t) => unreachable!("scheduler picked blocked thread {t}"),
        })
    }

    /// Insert the successor state, checking for deadlocks and (in
    /// until-first-error mode) outcome violations at fresh final states.
    pub fn admit(&mut self, step: &program::Step) -> Result<(Fingerprint, bool), Halt> {
        let final_state = program::is_final(self.p, &step.dst);
        if !final_state && program::enabled(self.p, &step.dst).is_empty() {
            let mut trace = self.path.clone();
            trace.push(step.action);
            return Err(Halt::Deadlock { trace });
        }
        let (fp, fresh) = self.lts.insert_state(&step.dst, final_state);
        if fresh
            && final_state
            && self.mode == ExploreMode::UntilFirstError
            && let Some(spec) = self.p.spec()
        {
            let outcome = step.dst.outcome_tuple();
            if !spec.admitted.contains(&outcome) {
                let mut trace = self.path.clone();
                trace.push(step.action);
                return Err(Halt::Violation { trace, outcome });
            }
        }
        Ok((fp, fresh))
    }

    /// Pick one of `candidates`, preferring threads whose successor is
    /// already visited, then falling back to the strategy order. Returns the
    /// chosen thread together with its (possibly faulting) step so callers do
    /// not re-execute it.
    pub fn choose_next(
        &mut self,
        at: Fingerprint,
        s: &State,
        candidates: &BTreeSet<ThreadId>,
    ) -> (ThreadId, Result<program::Step, StepError>) {
        debug_assert!(!candidates.is_empty());
        let mut steps = Vec::with_capacity(candidates.len());
        let mut visited_leading = BTreeSet::new();
        for &t in candidates {
            let step = program::next(self.p, s, t);
            if let Ok(step) = &step {
                let fp = crate::lts::fingerprint(&step.dst);
                if self.lts.is_visited(fp) {
                    visited_leading.insert(t);
                }
            }
            steps.push((t, step));
        }
        let chosen = self.chooser.pick(candidates, &visited_leading, at);
        let step = steps
            .into_iter()
            .find(|(t, _)| *t == chosen)
            .expect("chosen thread came from candidates")
            .1;
        (chosen, step)
    }

    pub fn finish(self, verdict: Verdict) -> ExploreOutcome {
        let metrics = Metrics {
            states: self.lts.node_count(),
            transitions: self.lts.edge_count(),
            retraversed_transitions: self.retraversed,
            wall_time: self.started.elapsed(),
            peak_book_count: self.peak_books,
        };
        let root = self.root_fp.expect("root inserted before finish");
        ExploreOutcome {
            lts: self.lts,
            root,
            metrics,
            verdict,
        }
    }
}


/// Shared run harness: inserts the root, handles trivially final or deadlocked
/// initial states, delegates to the algorithm body, and converts halts.
pub(crate) fn run_exploration<'a>(
    p: &'a Program,
    cfg: &StrategyConfig,
    mode: ExploreMode,
    deadline: Option<Instant>,
    body: impl FnOnce(&mut Ctx<'a>, Fingerprint, &State) -> Result<(), Halt>,
) -> Result<ExploreOutcome, ExploreError> {
    let mut ctx = Ctx::new(p, cfg, mode, deadline)?;
    let root_state = program::initial_state(p);
    let root_final = program::is_final(p, &root_state);
    if !root_final && program::enabled(p, &root_state).is_empty() {
        let (fp, _) = ctx.lts.insert_state(&root_state, false);
        ctx.root_fp = Some(fp);
        return Ok(ctx.finish(Verdict::Deadlock { trace: Vec::new() }));
    }
    let (root, _) = ctx.lts.insert_state(&root_state, root_final);
    ctx.root_fp = Some(root);
    if root_final {
        if mode == ExploreMode::UntilFirstError
            && let Some(spec) = p.spec()
        {
            let outcome = root_state.outcome_tuple();
            if !spec.admitted.contains(&outcome) {
                return Ok(ctx.finish(Verdict::ViolationFound {
                    trace: Vec::new(),
                    outcome,
                }));
            }
        }
        return Ok(ctx.finish(Verdict::Exhausted));
    }
    match body(&mut ctx, root, &root_state) {
        Ok(()) => Ok(ctx.finish(Verdict::Exhausted)),
        Err(Halt::Violation { trace, outcome }) => {
            Ok(ctx.finish(Verdict::ViolationFound { trace, outcome }))
        }
        Err(Halt::Deadlock { trace }) => Ok(ctx.finish(Verdict::Deadlock { trace })),
        Err(Halt::Fault { trace, fault }) => Ok(ctx.finish(Verdict::ProgramError { trace, fault })),
        Err(Halt::Timeout) => Err(ExploreError::Timeout(ctx.started.elapsed())),
    }
}
