//! Static safe-set exploration: a stateful DFS that expands a single
//! invisible transition when one is enabled and every enabled transition
//! otherwise, stopping branches at visited states.

use std::collections::BTreeSet;
use std::time::Instant;

use crate::lts::{Fingerprint, NodeStatus};
use crate::program::{Program, State};
use crate::strategy::StrategyConfig;

use super::{Ctx, ExploreError, ExploreMode, ExploreOutcome, Halt, run_exploration, safe_set};

/// Safe-set POR exploration.
pub fn explore_spor(
    p: &Program,
    cfg: &StrategyConfig,
    mode: ExploreMode,
) -> Result<ExploreOutcome, ExploreError> {
    explore_spor_bounded(p, cfg, mode, None)
}

pub(crate) fn explore_spor_bounded(
    p: &Program,
    cfg: &StrategyConfig,
    mode: ExploreMode,
    deadline: Option<Instant>,
) -> Result<ExploreOutcome, ExploreError> {
    run_exploration(p, cfg, mode, deadline, |ctx, root, root_state| {
        expand(ctx, root, root_state, false)
    })
}

/// Full stateful exploration: identical DFS but every enabled thread is
/// expanded from every state. The visited-stop still applies, so this is the
/// no-reduction baseline rather than an execution enumerator.
pub fn explore_full_stateful(
    p: &Program,
    cfg: &StrategyConfig,
    mode: ExploreMode,
) -> Result<ExploreOutcome, ExploreError> {
    explore_full_stateful_bounded(p, cfg, mode, None)
}

pub(crate) fn explore_full_stateful_bounded(
    p: &Program,
    cfg: &StrategyConfig,
    mode: ExploreMode,
    deadline: Option<Instant>,
) -> Result<ExploreOutcome, ExploreError> {
    run_exploration(p, cfg, mode, deadline, |ctx, root, root_state| {
        expand(ctx, root, root_state, true)
    })
}

fn expand(ctx: &mut Ctx<'_>, fp: Fingerprint, s: &State, full_expansion: bool) -> Result<(), Halt> {
    debug_assert!(ctx.lts.not_visited(fp));
    debug_assert_ne!(
        ctx.lts.status(fp),
        Some(NodeStatus::OnStack),
        "DFS re-entered a stack node"
    );
    ctx.lts.set_status(fp, NodeStatus::OnStack);
    let mut remaining: BTreeSet<_> = if full_expansion {
        crate::program::enabled(ctx.p, s)
    } else {
        safe_set(ctx.p, s, &ctx.chooser)
    };
    while !remaining.is_empty() {
        ctx.tick()?;
        let (t, step) = ctx.choose_next(fp, s, &remaining);
        remaining.remove(&t);
        let step = step.map_err(|e| match e {
            crate::program::StepError::Fault(fault) => Halt::Fault {
                trace: ctx.path.clone(),
                fault,
            },
            crate::program::StepError::Blocked(t) => {
                unreachable!("safe set contained blocked thread {t}")
            }
        })?;
        let (dst, _) = ctx.admit(&step)?;
        ctx.lts.add_edge(fp, step.action, dst);
        if ctx.lts.not_visited(dst) {
            ctx.path.push(step.action);
            expand(ctx, dst, &step.dst, full_expansion)?;
            ctx.path.pop();
        }
    }
    ctx.lts.set_status(fp, NodeStatus::Complete);
    Ok(())
}
