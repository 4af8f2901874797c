//! Ground-truth machinery: brute-force execution enumeration, happens-before
//! and trace-equivalence canonical forms, soundness checking of reduced
//! graphs, persistent/source-set validation, and sequential-outcome
//! computation for assertion specs.
//!
//! Everything here is deliberately independent of the explorers' code paths:
//! enumeration is a plain DFS over the program semantics with no reduction
//! and no visited-stop (except where a memoized count is explicitly wanted).

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::explore::ExploreOutcome;
use crate::lts::{Fingerprint, fingerprint};
use crate::program::{
    self, Action, Fault, OutcomeSpec, Program, State, StepError, ThreadId, dependent, enabled,
    initial_state, is_final, next,
};

/// Default cap on brute-force execution enumeration.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// One execution, recorded as its action sequence from a known start state.
pub type Execution = Vec<Action>;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("execution budget {budget} exceeded (saw {explored} executions)")]
    BudgetExceeded { budget: u64, explored: u64 },
    #[error("program fault during enumeration: {0}")]
    Fault(#[from] Fault),
    #[error("thread {tid} blocked inside an atomic method block")]
    BlockedInBlock { tid: ThreadId },
}

fn step_or_fault(p: &Program, s: &State, t: ThreadId) -> Result<program::Step, OracleError> {
    match next(p, s, t) {
        Ok(step) => Ok(step),
        Err(StepError::Fault(f)) => Err(OracleError::Fault(f)),
        Err(StepError::Blocked(tid)) => Err(OracleError::BlockedInBlock { tid }),
    }
}

/// Visit every full execution from `start`, calling `visit` with the action
/// sequence each time a final state is reached. Deadlocked branches produce
/// no full execution and are skipped.
fn visit_full_executions(
    p: &Program,
    start: &State,
    budget: u64,
    visit: &mut impl FnMut(&[Action]),
) -> Result<u64, OracleError> {
    fn go(
        p: &Program,
        s: &State,
        budget: u64,
        count: &mut u64,
        path: &mut Vec<Action>,
        visit: &mut impl FnMut(&[Action]),
    ) -> Result<(), OracleError> {
        let en = enabled(p, s);
        if en.is_empty() {
            if is_final(p, s) {
                *count += 1;
                if *count > budget {
                    return Err(OracleError::BudgetExceeded {
                        budget,
                        explored: *count,
                    });
                }
                visit(path);
            }
            return Ok(());
        }
        for t in en {
            let step = step_or_fault(p, s, t)?;
            path.push(step.action);
            go(p, &step.dst, budget, count, path, visit)?;
            path.pop();
        }
        Ok(())
    }
    let mut count = 0;
    let mut path = Vec::new();
    go(p, start, budget, &mut count, &mut path, visit)?;
    Ok(count)
}

/// Every full execution of the full transition system, with no reduction and
/// no visited-stop. Guarded by `budget` (default [`DEFAULT_BUDGET`]).
pub fn explore_full(p: &Program) -> Result<Vec<Execution>, OracleError> {
    explore_full_budgeted(p, DEFAULT_BUDGET)
}

pub fn explore_full_budgeted(p: &Program, budget: u64) -> Result<Vec<Execution>, OracleError> {
    let start = initial_state(p);
    let mut out = Vec::new();
    visit_full_executions(p, &start, budget, &mut |e| out.push(e.to_vec()))?;
    Ok(out)
}

/// Exact number of full executions, computed by a path count memoized on
/// state fingerprints (so counting stays cheap even when the count itself is
/// in the tens of millions).
pub fn count_full_executions(p: &Program) -> Result<u128, OracleError> {
    fn go(
        p: &Program,
        s: &State,
        memo: &mut HashMap<Fingerprint, u128>,
    ) -> Result<u128, OracleError> {
        let fp = fingerprint(s);
        if let Some(&n) = memo.get(&fp) {
            return Ok(n);
        }
        let en = enabled(p, s);
        let n = if en.is_empty() {
            u128::from(is_final(p, s))
        } else {
            let mut total = 0u128;
            for t in en {
                let step = step_or_fault(p, s, t)?;
                total += go(p, &step.dst, memo)?;
            }
            total
        };
        memo.insert(fp, n);
        Ok(n)
    }
    go(p, &initial_state(p), &mut HashMap::new())
}

/// Outcome tuples of every reachable final state, via a visited-stop DFS over
/// the full state graph (much cheaper than path enumeration and sufficient
/// for outcome-set questions, since outcomes are a function of the state).
pub fn reachable_final_outcomes(
    p: &Program,
    budget: u64,
) -> Result<BTreeSet<Vec<i64>>, OracleError> {
    let start = initial_state(p);
    let mut seen = BTreeSet::from([fingerprint(&start)]);
    let mut stack = vec![start];
    let mut out = BTreeSet::new();
    let mut visited: u64 = 0;
    while let Some(s) = stack.pop() {
        visited += 1;
        if visited > budget {
            return Err(OracleError::BudgetExceeded {
                budget,
                explored: visited,
            });
        }
        if is_final(p, &s) {
            out.insert(s.outcome_tuple());
            continue;
        }
        for t in enabled(p, &s) {
            let step = step_or_fault(p, &s, t)?;
            if seen.insert(fingerprint(&step.dst)) {
                stack.push(step.dst);
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Happens-before and Mazurkiewicz canonical forms
// ---------------------------------------------------------------------------

/// The happens-before relation of one execution: program order plus the order
/// between dependent actions. Edges are the direct (i, j) pairs with i < j.
#[derive(Debug, Clone)]
pub struct HappensBefore {
    pub events: Vec<Action>,
    pub edges: Vec<(usize, usize)>,
}

impl HappensBefore {
    pub fn of(events: &[Action]) -> Self {
        let mut edges = Vec::new();
        for j in 0..events.len() {
            for i in 0..j {
                let same_thread = events[i].tid == events[j].tid;
                if same_thread || dependent(&events[i], &events[j]) {
                    edges.push((i, j));
                }
            }
        }
        HappensBefore {
            events: events.to_vec(),
            edges,
        }
    }

    /// Transitive closure as a boolean matrix, computed on demand.
    pub fn closure(&self) -> Vec<Vec<bool>> {
        let n = self.events.len();
        let mut m = vec![vec![false; n]; n];
        for &(i, j) in &self.edges {
            m[i][j] = true;
        }
        for j in 0..n {
            for i in 0..j {
                if m[i][j] {
                    let (head, tail) = m.split_at_mut(j);
                    let (row_j, row_i) = (&tail[0], &mut head[i]);
                    for k in (j + 1)..n {
                        row_i[k] = row_i[k] || row_j[k];
                    }
                }
            }
        }
        m
    }
}

/// Canonical representative of an execution's trace class: the
/// lexicographically least linearization of the happens-before partial
/// order, ordering events by (thread id, per-thread event index).
pub fn canonical_form(exec: &[Action]) -> Vec<Action> {
    let n = exec.len();
    let hb = HappensBefore::of(exec);
    let mut indegree = vec![0usize; n];
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(i, j) in &hb.edges {
        indegree[j] += 1;
        succs[i].push(j);
    }
    // Sort key: (tid, index within its own thread).
    let mut thread_idx = vec![0usize; n];
    let mut seen_per_thread: HashMap<ThreadId, usize> = HashMap::new();
    for (i, a) in exec.iter().enumerate() {
        let c = seen_per_thread.entry(a.tid).or_insert(0);
        thread_idx[i] = *c;
        *c += 1;
    }
    let mut available: BTreeSet<(ThreadId, usize, usize)> = (0..n)
        .filter(|&i| indegree[i] == 0)
        .map(|i| (exec[i].tid, thread_idx[i], i))
        .collect();
    let mut out = Vec::with_capacity(n);
    while let Some(&(tid, tix, i)) = available.iter().next() {
        available.remove(&(tid, tix, i));
        out.push(exec[i]);
        for &j in &succs[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                available.insert((exec[j].tid, thread_idx[j], j));
            }
        }
    }
    debug_assert_eq!(out.len(), n, "happens-before graph must be acyclic");
    out
}

/// Deduplicated canonical forms of a set of executions. Two executions map to
/// the same class exactly when their happens-before relations agree.
pub fn trace_classes<'a>(execs: impl IntoIterator<Item = &'a Execution>) -> BTreeSet<Vec<Action>> {
    execs.into_iter().map(|e| canonical_form(e)).collect()
}

/// Trace classes of the whole program, streaming executions through the
/// canonicalizer without materializing them.
pub fn trace_classes_of_program(
    p: &Program,
    budget: u64,
) -> Result<BTreeSet<Vec<Action>>, OracleError> {
    let start = initial_state(p);
    let mut classes = BTreeSet::new();
    visit_full_executions(p, &start, budget, &mut |e| {
        classes.insert(canonical_form(e));
    })?;
    Ok(classes)
}

/// Threads that can take the first step of some execution equivalent to `e`:
/// a thread whose first event has no dependent predecessor from another
/// thread is a weak initial.
pub fn weak_initials(e: &[Action]) -> BTreeSet<ThreadId> {
    let mut firsts: HashMap<ThreadId, usize> = HashMap::new();
    for (i, a) in e.iter().enumerate() {
        firsts.entry(a.tid).or_insert(i);
    }
    firsts
        .into_iter()
        .filter(|&(tid, j)| {
            e[..j]
                .iter()
                .all(|prev| prev.tid == tid || !dependent(prev, &e[j]))
        })
        .map(|(tid, _)| tid)
        .collect()
}

// ---------------------------------------------------------------------------
// Definition checkers
// ---------------------------------------------------------------------------

/// Source-set check: every full execution from `s` has a weak initial thread
/// in `t_set`.
pub fn is_source_set(
    p: &Program,
    s: &State,
    t_set: &BTreeSet<ThreadId>,
    budget: u64,
) -> Result<bool, OracleError> {
    let mut ok = true;
    visit_full_executions(p, s, budget, &mut |e| {
        if ok && weak_initials(e).is_disjoint(t_set) {
            ok = false;
        }
    })?;
    Ok(ok)
}

/// Persistent-set check: no execution from `s` that avoids `t_set` contains
/// an action dependent on some `next(s, t)` with `t` in `t_set`.
///
/// The avoiding executions form a sub-graph whose reachable action set is
/// path-independent, so a visited-stop DFS is exact here.
pub fn is_persistent_set(
    p: &Program,
    s: &State,
    t_set: &BTreeSet<ThreadId>,
    budget: u64,
) -> Result<bool, OracleError> {
    let mut pivots = Vec::new();
    for &t in t_set {
        if enabled(p, s).contains(&t) {
            pivots.push(step_or_fault(p, s, t)?.action);
        }
    }
    let mut seen: BTreeSet<Fingerprint> = BTreeSet::new();
    let mut stack = vec![s.clone()];
    seen.insert(fingerprint(s));
    let mut visited_states: u64 = 0;
    while let Some(state) = stack.pop() {
        visited_states += 1;
        if visited_states > budget {
            return Err(OracleError::BudgetExceeded {
                budget,
                explored: visited_states,
            });
        }
        for t in enabled(p, &state) {
            if t_set.contains(&t) {
                continue;
            }
            let step = step_or_fault(p, &state, t)?;
            if pivots
                .iter()
                .any(|pi| pi.tid != step.action.tid && dependent(pi, &step.action))
            {
                return Ok(false);
            }
            let fp = fingerprint(&step.dst);
            if seen.insert(fp) {
                stack.push(step.dst);
            }
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Soundness checking of reduced graphs
// ---------------------------------------------------------------------------

/// Comparison of a reduced exploration against the full transition system.
#[derive(Debug, Clone, Serialize)]
pub struct SoundnessReport {
    pub program: String,
    pub full_classes: usize,
    pub reduced_classes: usize,
    /// Canonical forms present in the full system but unrepresented in the
    /// reduced one; empty means the reduction is sound.
    pub missing: Vec<String>,
    /// |full executions of the reduced graph| / |classes of the full system|.
    pub ratio: f64,
    pub pass: bool,
}

/// Check that every trace class of the full system has a representative among
/// the reduced graph's full executions, and that the reduced graph is a
/// faithful sub-LTS of the program.
pub fn check_soundness(
    p: &Program,
    out: &ExploreOutcome,
    label: &str,
    budget: u64,
) -> Result<SoundnessReport, OracleError> {
    let root_state = initial_state(p);
    assert!(
        out.lts.validate_against(p, out.root, &root_state),
        "reduced graph is not a sub-LTS of the program"
    );
    let full = trace_classes_of_program(p, budget)?;
    let reduced_execs = out.lts.full_executions(out.root);
    let reduced = trace_classes(reduced_execs.iter());
    debug_assert!(
        reduced.is_subset(&full),
        "reduced classes must come from the full system"
    );
    let missing: Vec<String> = full
        .difference(&reduced)
        .map(|c| render_class(p, c))
        .collect();
    let ratio = if full.is_empty() {
        1.0
    } else {
        reduced_execs.len() as f64 / full.len() as f64
    };
    Ok(SoundnessReport {
        program: label.to_string(),
        full_classes: full.len(),
        reduced_classes: reduced.len(),
        pass: missing.is_empty(),
        missing,
        ratio,
    })
}

fn render_class(p: &Program, class: &[Action]) -> String {
    class
        .iter()
        .map(|a| a.display(p).to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

// ---------------------------------------------------------------------------
// Sequential outcomes (expected-outcome computation for assertion specs)
// ---------------------------------------------------------------------------

/// Number of interleavings of per-thread block sequences.
fn interleaving_count(block_counts: &[usize]) -> u128 {
    let total: usize = block_counts.iter().sum();
    let mut result = 1u128;
    let mut remaining = total;
    for &c in block_counts {
        // result *= C(remaining, c)
        let mut choose = 1u128;
        for k in 0..c {
            choose = choose * (remaining - k) as u128 / (k + 1) as u128;
        }
        result = result.saturating_mul(choose);
        remaining -= c;
    }
    result
}

/// Enumerate every interleaving of the threads' method blocks, running each
/// block atomically, and collect the outcome tuples of the completed runs.
/// Threads without declared blocks run their whole body as one block.
pub fn sequential_outcomes(p: &Program, budget: u64) -> Result<OutcomeSpec, OracleError> {
    // Block boundaries as pc ranges per thread.
    let mut blocks: Vec<Vec<(usize, usize)>> = Vec::new();
    for t in p.threads() {
        let mut ranges = Vec::new();
        match &t.blocks {
            Some(lens) => {
                let mut pc = 0;
                for len in lens {
                    ranges.push((pc, pc + len));
                    pc += len;
                }
            }
            None => {
                if !t.body.is_empty() {
                    ranges.push((0, t.body.len()));
                }
            }
        }
        blocks.push(ranges);
    }
    let counts: Vec<usize> = blocks.iter().map(|b| b.len()).collect();
    let total = interleaving_count(&counts);
    if total > budget as u128 {
        return Err(OracleError::BudgetExceeded {
            budget,
            explored: 0,
        });
    }

    fn go(
        p: &Program,
        blocks: &[Vec<(usize, usize)>],
        s: &State,
        positions: &mut Vec<usize>,
        admitted: &mut BTreeSet<Vec<i64>>,
    ) -> Result<(), OracleError> {
        let mut progressed = false;
        for tid in 0..blocks.len() {
            let Some(&(_, end)) = blocks[tid].get(positions[tid]) else {
                continue;
            };
            progressed = true;
            // Run the whole block atomically.
            let mut cur = s.clone();
            while cur.pcs[tid] < end {
                cur = step_or_fault(p, &cur, tid)?.dst;
            }
            positions[tid] += 1;
            go(p, blocks, &cur, positions, admitted)?;
            positions[tid] -= 1;
        }
        if !progressed {
            admitted.insert(s.outcome_tuple());
        }
        Ok(())
    }

    let mut admitted = BTreeSet::new();
    let mut positions = vec![0usize; blocks.len()];
    go(p, &blocks, &initial_state(p), &mut positions, &mut admitted)?;
    Ok(OutcomeSpec { admitted })
}

// ---------------------------------------------------------------------------
// Structural assumption checks
// ---------------------------------------------------------------------------

/// Verify on the whole reachable state graph that enabling or disabling is
/// always caused by a dependent action: whenever executing thread `t` changes
/// another thread's enabledness, the changed thread's pending action is a
/// lock access on the same object the executed action writes.
pub fn check_enable_dependence(p: &Program, budget: u64) -> Result<bool, OracleError> {
    let start = initial_state(p);
    let mut seen = BTreeSet::from([fingerprint(&start)]);
    let mut stack = vec![start];
    let mut visited: u64 = 0;
    while let Some(s) = stack.pop() {
        visited += 1;
        if visited > budget {
            return Err(OracleError::BudgetExceeded {
                budget,
                explored: visited,
            });
        }
        let before = enabled(p, &s);
        for &t in &before {
            let step = step_or_fault(p, &s, t)?;
            let after = enabled(p, &step.dst);
            for &other in before.symmetric_difference(&after) {
                if other == t {
                    continue;
                }
                let Some(pending) = p.pending_action(&s, other) else {
                    return Ok(false);
                };
                let same_lock_write = matches!(
                    (step.action.kind, pending.kind),
                    (
                        program::ActionKind::Visible {
                            op: program::Access::Write,
                            obj: executed
                        },
                        program::ActionKind::Visible { obj: pending_obj, .. }
                    ) if executed == pending_obj
                );
                if !same_lock_write {
                    return Ok(false);
                }
            }
            let fp = fingerprint(&step.dst);
            if seen.insert(fp) {
                stack.push(step.dst);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{Access, ActionKind, parse_program};

    fn act(tid: ThreadId, pc: usize, kind: ActionKind) -> Action {
        Action { tid, pc, kind }
    }

    fn w(tid: ThreadId, pc: usize, obj: usize) -> Action {
        act(
            tid,
            pc,
            ActionKind::Visible {
                op: Access::Write,
                obj,
            },
        )
    }

    fn r(tid: ThreadId, pc: usize, obj: usize) -> Action {
        act(
            tid,
            pc,
            ActionKind::Visible {
                op: Access::Read,
                obj,
            },
        )
    }

    #[test]
    fn full_exploration_counts_interleavings() {
        // 2 threads, 1 statement each: exactly 2 executions.
        let p = parse_program(
            r#"{"objects":[{"id":"o","init":0}],
                "threads":[{"body":[{"op":"store","obj":"o","expr":"1"}]},
                           {"body":[{"op":"store","obj":"o","expr":"2"}]}]}"#,
        )
        .unwrap();
        assert_eq!(explore_full(&p).unwrap().len(), 2);
        assert_eq!(count_full_executions(&p).unwrap(), 2);

        // n threads, 1 statement each: n! executions.
        let p = parse_program(
            r#"{"objects":[{"id":"o","init":0}],
                "threads":[{"body":[{"op":"store","obj":"o","expr":"1"}]},
                           {"body":[{"op":"store","obj":"o","expr":"2"}]},
                           {"body":[{"op":"store","obj":"o","expr":"3"}]},
                           {"body":[{"op":"store","obj":"o","expr":"4"}]}]}"#,
        )
        .unwrap();
        assert_eq!(explore_full(&p).unwrap().len(), 24);
    }

    #[test]
    fn three_invisible_threads_give_multinomial_count_and_one_class() {
        // 3 threads x 3 invisible steps: 9!/(3!)^3 = 1680 executions, all
        // pairwise independent across threads, hence a single trace class.
        let thread = r#"{"body":[{"op":"local","reg":"r0","expr":"r0+1"},
                                  {"op":"local","reg":"r0","expr":"r0+1"},
                                  {"op":"local","reg":"r0","expr":"r0+1"}]}"#;
        let doc = format!(r#"{{"objects":[],"threads":[{thread},{thread},{thread}]}}"#);
        let p = parse_program(&doc).unwrap();
        let execs = explore_full(&p).unwrap();
        assert_eq!(execs.len(), 1680);
        assert_eq!(count_full_executions(&p).unwrap(), 1680);
        assert_eq!(trace_classes(execs.iter()).len(), 1);
    }

    #[test]
    fn dependent_writes_make_two_classes() {
        let same = parse_program(
            r#"{"objects":[{"id":"o","init":0}],
                "threads":[{"body":[{"op":"store","obj":"o","expr":"1"}]},
                           {"body":[{"op":"store","obj":"o","expr":"2"}]}]}"#,
        )
        .unwrap();
        let distinct = parse_program(
            r#"{"objects":[{"id":"a","init":0},{"id":"b","init":0}],
                "threads":[{"body":[{"op":"store","obj":"a","expr":"1"}]},
                           {"body":[{"op":"store","obj":"b","expr":"2"}]}]}"#,
        )
        .unwrap();
        let execs = explore_full(&same).unwrap();
        assert_eq!(trace_classes(execs.iter()).len(), 2);
        let execs = explore_full(&distinct).unwrap();
        assert_eq!(trace_classes(execs.iter()).len(), 1);
    }

    #[test]
    fn canonical_form_is_idempotent_and_hb_consistent() {
        let e = vec![w(1, 0, 0), r(2, 0, 0), w(1, 1, 1), r(3, 0, 1)];
        let c = canonical_form(&e);
        assert_eq!(canonical_form(&c), c);
        // The canonical form must be a permutation preserving HB.
        assert_eq!(c.len(), e.len());
        let hb = HappensBefore::of(&e);
        let pos: HashMap<Action, usize> = c.iter().enumerate().map(|(i, a)| (*a, i)).collect();
        for (i, j) in hb.edges {
            assert!(pos[&e[i]] < pos[&e[j]]);
        }
    }

    #[test]
    fn adjacent_independent_swap_preserves_class() {
        let e1 = vec![w(1, 0, 0), w(2, 0, 1), r(3, 0, 0)];
        let e2 = vec![w(2, 0, 1), w(1, 0, 0), r(3, 0, 0)];
        assert_eq!(canonical_form(&e1), canonical_form(&e2));
        // Dependent swap changes the class.
        let d1 = vec![w(1, 0, 0), r(2, 0, 0)];
        let d2 = vec![r(2, 0, 0), w(1, 0, 0)];
        assert_ne!(canonical_form(&d1), canonical_form(&d2));
    }

    #[test]
    fn weak_initials_detects_reorderable_heads() {
        // w(1,o0); w(2,o1): independent, both weak initials.
        let e = vec![w(1, 0, 0), w(2, 0, 1)];
        assert_eq!(weak_initials(&e), BTreeSet::from([1, 2]));
        // w(1,o0); r(2,o0): dependent, thread 2 cannot move first.
        let e = vec![w(1, 0, 0), r(2, 0, 0)];
        assert_eq!(weak_initials(&e), BTreeSet::from([1]));
    }

    #[test]
    fn enabled_set_is_trivially_source_and_persistent() {
        let p = crate::corpus::eager_witness();
        let s = initial_state(&p);
        let en = enabled(&p, &s);
        assert!(is_source_set(&p, &s, &en, DEFAULT_BUDGET).unwrap());
        assert!(is_persistent_set(&p, &s, &en, DEFAULT_BUDGET).unwrap());
        // The empty set at a non-final state is not a source set.
        assert!(!is_source_set(&p, &s, &BTreeSet::new(), DEFAULT_BUDGET).unwrap());
    }

    #[test]
    fn source_but_not_persistent_witness() {
        let p = crate::corpus::eager_witness();
        let s = initial_state(&p);
        let t01 = BTreeSet::from([0, 1]);
        assert!(is_source_set(&p, &s, &t01, DEFAULT_BUDGET).unwrap());
        assert!(!is_persistent_set(&p, &s, &t01, DEFAULT_BUDGET).unwrap());
    }

    #[test]
    fn sequential_outcomes_counter_client() {
        // Two increment-and-record-old-value threads over one cell, each a
        // single method block: admitted outcomes are (0,1) and (1,0).
        let p = parse_program(
            r#"{"objects":[{"id":"c","init":0}],
                "threads":[
                  {"body":[{"op":"load","reg":"r0","obj":"c"},
                           {"op":"store","obj":"c","expr":"r0+1"},
                           {"op":"record","reg":"r0"}],
                   "methods":[3]},
                  {"body":[{"op":"load","reg":"r0","obj":"c"},
                           {"op":"store","obj":"c","expr":"r0+1"},
                           {"op":"record","reg":"r0"}],
                   "methods":[3]}]}"#,
        )
        .unwrap();
        let spec = sequential_outcomes(&p, DEFAULT_BUDGET).unwrap();
        assert_eq!(spec.admitted, BTreeSet::from([vec![0, 1], vec![1, 0]]));

        // Constant records: a single admitted tuple.
        let p = parse_program(
            r#"{"objects":[],
                "threads":[
                  {"body":[{"op":"local","reg":"r0","expr":"7"},{"op":"record","reg":"r0"}]},
                  {"body":[{"op":"local","reg":"r0","expr":"9"},{"op":"record","reg":"r0"}]}]}"#,
        )
        .unwrap();
        let spec = sequential_outcomes(&p, DEFAULT_BUDGET).unwrap();
        assert_eq!(spec.admitted, BTreeSet::from([vec![7, 9]]));
    }

    #[test]
    fn budget_errors_surface() {
        // 4 threads x 3 statements: 369600 executions exceeds a small budget.
        let thread = r#"{"body":[{"op":"local","reg":"r0","expr":"1"},
                                  {"op":"local","reg":"r0","expr":"2"},
                                  {"op":"local","reg":"r0","expr":"3"}]}"#;
        let doc = format!(r#"{{"objects":[],"threads":[{thread},{thread},{thread},{thread}]}}"#);
        let p = parse_program(&doc).unwrap();
        assert!(matches!(
            explore_full_budgeted(&p, 1000),
            Err(OracleError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn single_thread_soundness_ratio_is_one() {
        let p = parse_program(
            r#"{"objects":[{"id":"o","init":0}],
                "threads":[{"body":[{"op":"store","obj":"o","expr":"1"},
                                     {"op":"load","reg":"r0","obj":"o"}]}]}"#,
        )
        .unwrap();
        let out = crate::explore::explore_spor(
            &p,
            &crate::strategy::StrategyConfig::identity(1),
            crate::explore::ExploreMode::Exhaustive,
        )
        .unwrap();
        let report = check_soundness(&p, &out, "single", DEFAULT_BUDGET).unwrap();
        assert!(report.pass);
        assert_eq!(report.ratio, 1.0);
        assert_eq!(report.full_classes, 1);
    }

    #[test]
    fn enable_dependence_holds_on_lock_programs() {
        let p = parse_program(
            r#"{"objects":[{"id":"m","init":0},{"id":"o","init":0}],
                "threads":[
                  {"body":[{"op":"lock","obj":"m"},{"op":"store","obj":"o","expr":"1"},
                           {"op":"unlock","obj":"m"}]},
                  {"body":[{"op":"lock","obj":"m"},{"op":"load","reg":"r0","obj":"o"},
                           {"op":"unlock","obj":"m"}]}]}"#,
        )
        .unwrap();
        assert!(check_enable_dependence(&p, DEFAULT_BUDGET).unwrap());
    }
}
