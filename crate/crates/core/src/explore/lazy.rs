//! Lazy dynamic source-set exploration.
//!
//! Dependencies are computed only when the search backtracks to a state:
//! the completion check walks the stored graph from the latest successor to
//! collect the threads whose actions depend on the just-explored transition,
//! then recomputes the backtrack set. Three shortcuts keep re-traversals
//! rare: no traversal when the explored thread completes the safe set; no
//! traversal when every remaining enabled thread leads to an already visited
//! state (those edges are recorded directly); and traversals stop early once
//! the current set covers the safe set or names a thread that is not enabled
//! here (which pins the backtrack set to the whole safe set).

use std::collections::BTreeSet;
use std::time::Instant;

use crate::lts::{Fingerprint, NodeBook, NodeStatus};
use crate::program::{Action, Program, State, ThreadId};
use crate::strategy::StrategyConfig;

use super::eager::update_back;
use super::{Ctx, ExploreError, ExploreMode, ExploreOutcome, Halt, run_exploration, safe_set};

/// Lazy source-set POR exploration.
pub fn explore_dl_spor(
    p: &Program,
    cfg: &StrategyConfig,
    mode: ExploreMode,
) -> Result<ExploreOutcome, ExploreError> {
    explore_dl_spor_bounded(p, cfg, mode, None)
}

pub(crate) fn explore_dl_spor_bounded(
    p: &Program,
    cfg: &StrategyConfig,
    mode: ExploreMode,
    deadline: Option<Instant>,
) -> Result<ExploreOutcome, ExploreError> {
    run_exploration(p, cfg, mode, deadline, |ctx, root, root_state| {
        expand(ctx, root, root_state)
    })
}

fn expand(ctx: &mut Ctx<'_>, fp: Fingerprint, s: &State) -> Result<(), Halt> {
    debug_assert!(ctx.lts.not_visited(fp));
    debug_assert_ne!(
        ctx.lts.status(fp),
        Some(NodeStatus::OnStack),
        "DFS re-entered a stack node"
    );
    ctx.lts.set_status(fp, NodeStatus::OnStack);
    let sset = safe_set(ctx.p, s, &ctx.chooser);
    let mut book = NodeBook::default();
    let mut book_counted = false;

    loop {
        ctx.tick()?;
        let pending: BTreeSet<ThreadId> = book.backtrack.difference(&book.done).copied().collect();
        let pool = if pending.is_empty() {
            let rest: BTreeSet<ThreadId> = sset.difference(&book.done).copied().collect();
            assert!(
                !rest.is_empty(),
                "safe set exhausted without completion at {fp}"
            );
            rest
        } else {
            pending
        };
        let (_, step) = ctx.choose_next(fp, s, &pool);
        let step = step.map_err(|e| match e {
            crate::program::StepError::Fault(fault) => Halt::Fault {
                trace: ctx.path.clone(),
                fault,
            },
            crate::program::StepError::Blocked(t) => {
                unreachable!("lazy scheduler picked blocked thread {t}")
            }
        })?;
        let (dst, _) = ctx.admit(&step)?;
        ctx.lts.add_edge(fp, step.action, dst);
        if ctx.lts.not_visited(dst) {
            ctx.path.push(step.action);
            expand(ctx, dst, &step.dst)?;
            ctx.path.pop();
        }
        if is_complete(ctx, fp, s, &sset, &mut book, &mut book_counted)? {
            break;
        }
    }

    if book_counted {
        ctx.note_book_dropped();
    }
    debug_assert!(
        book.backtrack == book.done,
        "completed with backtrack != done"
    );
    ctx.lts.set_status(fp, NodeStatus::Complete);
    Ok(())
}

/// Process every stored edge whose thread is not yet done (one per loop
/// iteration in practice), updating the book. Returns true when exploration
/// from `s` may stop, i.e. backtrack equals done.
fn is_complete(
    ctx: &mut Ctx<'_>,
    fp: Fingerprint,
    s: &State,
    sset: &BTreeSet<ThreadId>,
    book: &mut NodeBook,
    book_counted: &mut bool,
) -> Result<bool, Halt> {
    let unprocessed: Vec<(Action, Fingerprint)> = ctx
        .lts
        .edges(fp)
        .iter()
        .filter(|e| !book.done.contains(&e.action.tid))
        .map(|e| (e.action, e.dst))
        .collect();

    for (action, succ) in unprocessed {
        let t = action.tid;
        book.done.insert(t);

        if book.done == *sset {
            book.backtrack = book.done.clone();
            return Ok(true);
        }
        // Remaining enabled threads all lead to visited states: record their
        // transitions without pushing them and stop.
        let rest: Vec<ThreadId> = sset.difference(&book.done).copied().collect();
        let mut rest_steps = Vec::with_capacity(rest.len());
        let mut all_visited = true;
        for &t2 in &rest {
            let step = ctx.step(s, t2)?;
            let dfp = crate::lts::fingerprint(&step.dst);
            if !ctx.lts.is_visited(dfp) {
                all_visited = false;
                break;
            }
            rest_steps.push(step);
        }
        if all_visited {
            for step in rest_steps {
                let (dfp, fresh) = ctx.admit(&step)?;
                debug_assert!(!fresh, "shortcut successor was checked as visited");
                ctx.lts.add_edge(fp, step.action, dfp);
            }
            book.done = sset.clone();
            book.backtrack = book.done.clone();
            return Ok(true);
        }

        // Dependence re-traversal for this edge, one visit per transition,
        // with the two early exits (not-enabled first, then complete).
        if !*book_counted {
            *book_counted = true;
            ctx.note_book_allocated();
        }
        let mut not_enabled_hit = false;
        let res = ctx.lts.reachable_actions_bounded(succ, &action, |tids| {
            if !tids.is_subset(sset) {
                not_enabled_hit = true;
                return true;
            }
            sset.is_subset(tids)
        });
        ctx.retraversed += res.edges_walked;
        book.current.insert(t, res.tids);
        if not_enabled_hit {
            // A dependent thread that is not enabled here: its orderings can
            // only be reached through some other enabled thread, so fall back
            // to the whole safe set.
            book.backtrack = sset.clone();
        } else {
            book.backtrack = update_back(book, &action, sset);
        }
        if book.backtrack == book.done {
            return Ok(true);
        }
    }
    Ok(false)
}
