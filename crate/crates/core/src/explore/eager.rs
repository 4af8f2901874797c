//! Eager dynamic source-set exploration.
//!
//! On top of the safe-set DFS, each irreducible state keeps a book of
//! `backtrack` / `done` / `current` sets. Every new visible transition updates
//! the current set of the deepest dependent transition source on the stack;
//! following an edge into a visited state replays that update for every
//! transition label reachable from it (walking each stored transition once,
//! with the conservative all-matches variant). When the search backtracks,
//! the backtrack set is recomputed; exploration from a state stops exactly
//! when backtrack equals done.

use std::collections::BTreeSet;
use std::time::Instant;

use crate::lts::{Fingerprint, NodeBook, NodeStatus};
use crate::program::{self, Action, Program, State, ThreadId};
use crate::strategy::StrategyConfig;

use super::{Ctx, ExploreError, ExploreMode, ExploreOutcome, Halt, run_exploration, safe_set};

/// Deliberately broken variants used to demonstrate that the soundness
/// oracle can catch real bugs. Never enabled in normal exploration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EagerFaults {
    /// Skip the conservative safe-set fallback in the backtrack update.
    pub skip_conservative_fallback: bool,
    /// Update only the deepest dependent stack transition instead of all of
    /// them. This is unsound: a lock handoff attributes the blocked thread's
    /// acquire to the unlock transition, whose source state has nothing else
    /// enabled, and the state where the acquisition order actually branches
    /// never learns about the other thread.
    pub last_match_updates: bool,
    /// Drop the highest thread id from every computed backtrack set of two
    /// or more threads.
    pub drop_backtrack_thread: bool,
}

impl EagerFaults {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn any(&self) -> bool {
        self.skip_conservative_fallback || self.last_match_updates || self.drop_backtrack_thread
    }
}

/// One entry of the DFS stack. `out_action` is the transition currently being
/// followed from this state; irreducible states own a book while on stack.
#[derive(Debug)]
struct Frame {
    out_action: Option<Action>,
    book: Option<NodeBook>,
}

/// Eager source-set POR exploration.
pub fn explore_de_spor(
    p: &Program,
    cfg: &StrategyConfig,
    mode: ExploreMode,
) -> Result<ExploreOutcome, ExploreError> {
    explore_de_spor_bounded(p, cfg, mode, None)
}

pub(crate) fn explore_de_spor_bounded(
    p: &Program,
    cfg: &StrategyConfig,
    mode: ExploreMode,
    deadline: Option<Instant>,
) -> Result<ExploreOutcome, ExploreError> {
    explore_de_spor_faulty(p, cfg, mode, deadline, EagerFaults::none())
}

/// Exploration with selectable deliberate faults; see [`EagerFaults`].
pub fn explore_de_spor_faulty(
    p: &Program,
    cfg: &StrategyConfig,
    mode: ExploreMode,
    deadline: Option<Instant>,
    faults: EagerFaults,
) -> Result<ExploreOutcome, ExploreError> {
    run_exploration(p, cfg, mode, deadline, |ctx, root, root_state| {
        let mut frames = Vec::new();
        expand(ctx, &mut frames, root, root_state, faults)
    })
}

fn expand(
    ctx: &mut Ctx<'_>,
    frames: &mut Vec<Frame>,
    fp: Fingerprint,
    s: &State,
    faults: EagerFaults,
) -> Result<(), Halt> {
    debug_assert!(ctx.lts.not_visited(fp));
    debug_assert_ne!(
        ctx.lts.status(fp),
        Some(NodeStatus::OnStack),
        "DFS re-entered a stack node"
    );
    ctx.lts.set_status(fp, NodeStatus::OnStack);
    let my = frames.len();
    frames.push(Frame {
        out_action: None,
        book: None,
    });

    let sset = safe_set(ctx.p, s, &ctx.chooser);
    let reducible = sset.len() == 1
        && sset
            .iter()
            .all(|&t| ctx.p.pending_action(s, t).is_some_and(|a| !a.is_visible()));

    if reducible {
        // A single invisible transition; no book is needed.
        let t = *sset.first().expect("reducible safe set is a singleton");
        follow(ctx, frames, my, fp, s, t, faults)?;
    } else {
        let first = ctx.chooser.first_by_order(&sset).expect("non-final state");
        let mut book = NodeBook::default();
        book.backtrack.insert(first);
        frames[my].book = Some(book);
        ctx.note_book_allocated();

        loop {
            let pending: BTreeSet<ThreadId> = {
                let book = frames[my].book.as_ref().expect("book while on stack");
                book.backtrack.difference(&book.done).copied().collect()
            };
            // With the conservative fallback disabled, the backtrack set may
            // contain threads that are not even enabled here; a correct run
            // never filters anything.
            let runnable: BTreeSet<ThreadId> = pending.intersection(&sset).copied().collect();
            debug_assert!(
                faults.skip_conservative_fallback || runnable.len() == pending.len(),
                "backtrack escaped the safe set"
            );
            if runnable.is_empty() {
                if !pending.is_empty() {
                    // Faulty mode only: discard unexecutable leftovers.
                    let book = frames[my].book.as_mut().expect("book while on stack");
                    book.backtrack = book.done.clone();
                }
                break;
            }
            ctx.tick()?;
            let (t, _) = ctx.choose_next(fp, s, &runnable);
            frames[my]
                .book
                .as_mut()
                .expect("book while on stack")
                .begin_thread(t);
            let action = follow(ctx, frames, my, fp, s, t, faults)?;
            let new_backtrack = {
                let book = frames[my].book.as_ref().expect("book while on stack");
                let mut bt = update_back_impl(book, &action, &sset, faults);
                if faults.drop_backtrack_thread && bt.len() >= 2 {
                    let last = *bt.iter().next_back().expect("nonempty");
                    bt.remove(&last);
                }
                bt
            };
            let book = frames[my].book.as_mut().expect("book while on stack");
            book.backtrack = new_backtrack;
            if book.backtrack == book.done {
                break;
            }
        }
        ctx.note_book_dropped();
    }

    let frame = frames.pop().expect("frame pushed above");
    if let Some(book) = &frame.book {
        debug_assert!(
            faults.any() || book.backtrack == book.done,
            "node completed with backtrack != done"
        );
    }
    ctx.lts.set_status(fp, NodeStatus::Complete);
    Ok(())
}

/// Execute `next(s, t)`, record the edge, run the current-set updates, and
/// recurse into fresh states. Returns the executed action.
fn follow(
    ctx: &mut Ctx<'_>,
    frames: &mut Vec<Frame>,
    my: usize,
    fp: Fingerprint,
    s: &State,
    t: ThreadId,
    faults: EagerFaults,
) -> Result<Action, Halt> {
    let step = ctx.step(s, t)?;
    let (dst, _) = ctx.admit(&step)?;
    ctx.lts.add_edge(fp, step.action, dst);
    frames[my].out_action = Some(step.action);
    let all_matches = !faults.last_match_updates;
    if step.action.is_visible() {
        update_curr_frames(frames, &step.action, all_matches);
    }
    if ctx.lts.not_visited(dst) {
        ctx.path.push(step.action);
        expand(ctx, frames, dst, &step.dst, faults)?;
        ctx.path.pop();
    } else if !ctx.lts.is_final_state(dst) {
        // Edge into a visited state: replay the current-set update for every
        // label reachable from it, as if those transitions were taken again.
        let (actions, walked) = ctx.lts.reachable_actions(dst);
        ctx.retraversed += walked;
        for a in &actions {
            if a.is_visible() {
                update_curr_frames(frames, a, all_matches);
            }
        }
    }
    frames[my].out_action = None;
    Ok(step.action)
}

/// Add `tid(a)` to the current set of the stack transition source(s) whose
/// outgoing action depends on `a`. With `all_matches` every dependent
/// transition on the stack is updated; without it only the deepest one is.
/// The explorer always uses the all-matches form: attributing only to the
/// deepest match loses orderings that are realizable solely at shallower
/// branch points (lock handoffs being the concrete case), and the one-pass
/// revisit walk needs the conservative form anyway.
fn update_curr_frames(frames: &mut [Frame], a: &Action, all_matches: bool) {
    for frame in frames.iter_mut().rev() {
        let Some(out) = &frame.out_action else {
            continue;
        };
        if out.tid == a.tid || !out.is_visible() || !program::dependent(a, out) {
            continue;
        }
        let book = frame
            .book
            .as_mut()
            .expect("dependent stack transition sources are irreducible");
        book.current
            .get_mut(&out.tid)
            .expect("current initialized when thread began")
            .insert(a.tid);
        if !all_matches {
            return;
        }
    }
}

/// Standalone form of the current-set update, operating on an execution given
/// as (source book, outgoing action) pairs with the deepest transition last.
/// The in-explorer update works on DFS frames; this form exists for direct
/// testing and for callers holding books elsewhere.
pub fn update_curr(
    stack: &mut [(Option<&mut NodeBook>, Option<Action>)],
    a: &Action,
    all_matches: bool,
) {
    for (book, out) in stack.iter_mut().rev() {
        let Some(out) = out else { continue };
        if out.tid == a.tid || !out.is_visible() || !program::dependent(a, out) {
            continue;
        }
        let book = book.as_mut().expect("dependent source has a book");
        book.current
            .get_mut(&out.tid)
            .expect("current initialized")
            .insert(a.tid);
        if !all_matches {
            return;
        }
    }
}

/// Recompute the backtrack set after a thread's subtree finishes.
///
/// Case 1: if any explored thread's current set escapes the safe set, the
/// backtrack set is pinned conservatively to the whole safe set (such a
/// thread is not executable here, so its orderings must be covered by
/// exploring everything enabled). Case 2: if a nonempty proper subset of done
/// is closed under the current map, done is a source set and exploration may
/// stop. Case 3: otherwise the union of the current sets over done.
pub fn update_back(
    book: &NodeBook,
    last: &Action,
    safe: &BTreeSet<ThreadId>,
) -> BTreeSet<ThreadId> {
    update_back_impl(book, last, safe, EagerFaults::none())
}

fn update_back_impl(
    book: &NodeBook,
    last: &Action,
    safe: &BTreeSet<ThreadId>,
    faults: EagerFaults,
) -> BTreeSet<ThreadId> {
    debug_assert!(book.done.contains(&last.tid), "last action not in done");
    let union: BTreeSet<ThreadId> = book
        .done
        .iter()
        .flat_map(|t| book.current[t].iter().copied())
        .collect();
    if !faults.skip_conservative_fallback && !union.is_subset(safe) {
        return safe.clone();
    }
    if has_closed_proper_subset(book) {
        return book.done.clone();
    }
    union
}

/// True when some nonempty `T ⊂ done` (proper) satisfies
/// `T = ∪_{t ∈ T} current[t]`, found as the fixpoint closure of each
/// singleton. Done sets are at most the thread count, so this is cheap and
/// exact.
fn has_closed_proper_subset(book: &NodeBook) -> bool {
    'candidates: for &seed in &book.done {
        let mut closure = BTreeSet::from([seed]);
        loop {
            let mut grown = closure.clone();
            for t in &closure {
                match book.current.get(t) {
                    Some(deps) => grown.extend(deps.iter().copied()),
                    // Closure left the done set: this seed cannot certify.
                    None => continue 'candidates,
                }
            }
            if !grown.is_subset(&book.done) {
                continue 'candidates;
            }
            if grown == closure {
                break;
            }
            closure = grown;
        }
        if closure != book.done {
            return true;
        }
    }
    false
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::program::{Access, ActionKind, parse_program};
    use crate::strategy::StrategyConfig;

    fn act(tid: ThreadId, pc: usize, op: Access, obj: usize) -> Action {
        Action {
            tid,
            pc,
            kind: ActionKind::Visible { op, obj },
        }
    }

    fn run(p: &Program) -> ExploreOutcome {
        explore_de_spor(
            p,
            &StrategyConfig::identity(p.thread_count()),
            ExploreMode::Exhaustive,
        )
        .unwrap()
    }

    #[test]
    fn update_curr_targets_deepest_dependent_transition() {
        let mut s_book = NodeBook::default();
        s_book.begin_thread(1);
        let mut views: Vec<(Option<&mut NodeBook>, Option<Action>)> =
            vec![(Some(&mut s_book), Some(act(1, 0, Access::Write, 0)))];
        update_curr(&mut views, &act(2, 0, Access::Read, 0), false);
        assert_eq!(s_book.current[&1], BTreeSet::from([1, 2]));
    }

    #[test]
    fn update_curr_skips_invisible_new_actions_by_construction() {
        // The explorer only calls the update for visible actions; dependence
        // on an invisible action is always false, so even a direct call is a
        // no-op.
        let mut s_book = NodeBook::default();
        s_book.begin_thread(1);
        let mut views: Vec<(Option<&mut NodeBook>, Option<Action>)> =
            vec![(Some(&mut s_book), Some(act(1, 0, Access::Write, 0)))];
        let invisible = Action {
            tid: 2,
            pc: 0,
            kind: ActionKind::Invisible,
        };
        update_curr(&mut views, &invisible, false);
        assert_eq!(s_book.current[&1], BTreeSet::from([1]));
    }

    #[test]
    fn update_curr_all_matches_updates_every_dependent_source() {
        let mut b1 = NodeBook::default();
        b1.begin_thread(1);
        let mut b3 = NodeBook::default();
        b3.begin_thread(3);
        {
            let mut views: Vec<(Option<&mut NodeBook>, Option<Action>)> = vec![
                (Some(&mut b1), Some(act(1, 0, Access::Write, 0))),
                (Some(&mut b3), Some(act(3, 0, Access::Write, 0))),
            ];
            // Fresh rule: only the deepest dependent write is updated.
            update_curr(&mut views, &act(2, 0, Access::Read, 0), false);
        }
        assert_eq!(b3.current[&3], BTreeSet::from([2, 3]));
        assert_eq!(b1.current[&1], BTreeSet::from([1]));
        {
            let mut views: Vec<(Option<&mut NodeBook>, Option<Action>)> = vec![
                (Some(&mut b1), Some(act(1, 0, Access::Write, 0))),
                (Some(&mut b3), Some(act(3, 0, Access::Write, 0))),
            ];
            // Revisit rule: both dependent writes are updated.
            update_curr(&mut views, &act(2, 1, Access::Read, 0), true);
        }
        assert_eq!(b1.current[&1], BTreeSet::from([1, 2]));
        assert_eq!(b3.current[&3], BTreeSet::from([2, 3]));
    }

    #[test]
    fn update_back_cases() {
        let safe: BTreeSet<ThreadId> = [1, 2, 3].into();
        // Case 3: done={1}, current[1]={1,2,3} -> copy of current[1].
        let mut book = NodeBook::default();
        book.begin_thread(1);
        book.current.get_mut(&1).unwrap().extend([2, 3]);
        assert_eq!(
            update_back(&book, &act(1, 0, Access::Write, 0), &safe),
            BTreeSet::from([1, 2, 3])
        );
        // Case 2: done={1,2}, current[2]={2} closed and proper -> done.
        book.begin_thread(2);
        assert_eq!(
            update_back(&book, &act(2, 0, Access::Read, 1), &safe),
            BTreeSet::from([1, 2])
        );
        // Case 1: a thread outside the safe set forces the safe set.
        book.current.get_mut(&2).unwrap().insert(7);
        assert_eq!(update_back(&book, &act(2, 0, Access::Read, 1), &safe), safe);
    }

    #[test]
    fn stops_with_non_persistent_source_set_at_root() {
        let p = crate::corpus::eager_witness();
        let out = run(&p);
        assert_eq!(out.verdict, super::super::Verdict::Exhausted);
        assert_eq!(
            out.lts.explored_tids(out.root),
            BTreeSet::from([0, 1]),
            "thread 2 must never be executed from the root"
        );
    }

    #[test]
    fn all_invisible_matches_spor() {
        let p = crate::corpus::invisible_ladder(3, 3);
        let eager = run(&p);
        let spor = super::super::spor::explore_spor(
            &p,
            &StrategyConfig::identity(3),
            ExploreMode::Exhaustive,
        )
        .unwrap();
        assert_eq!(eager.metrics.states, spor.metrics.states);
        assert_eq!(eager.lts.transitions(), spor.lts.transitions());
        assert_eq!(eager.metrics.peak_book_count, 0);
    }

    #[test]
    fn racy_triple_produces_revisit_updates() {
        // Two same-value stores commute state-wise but are dependent, so both
        // orders are explored and converge on a visited non-final state.
        let p = parse_program(
            r#"{"objects":[{"id":"o","init":0}],
                "threads":[
                  {"body":[{"op":"store","obj":"o","expr":"5"}]},
                  {"body":[{"op":"store","obj":"o","expr":"5"}]},
                  {"body":[{"op":"load","reg":"r0","obj":"o"}]}]}"#,
        )
        .unwrap();
        let out = run(&p);
        assert_eq!(out.verdict, super::super::Verdict::Exhausted);
        assert!(out.metrics.retraversed_transitions > 0, "revisits happened");
    }
}
