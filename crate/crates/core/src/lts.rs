//! Canonical state fingerprinting and storage of the reduced transition
//! graph built during exploration.
//!
//! Matching is exact: every node keeps its full canonical encoding and the
//! store verifies byte equality whenever a digest lookup hits, so a hash
//! collision can never silently merge distinct states.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::program::{self, Action, Program, State, ThreadId};

/// 128-bit digest of a state's canonical byte encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint(pub u128);

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

/// FNV-1a over the canonical encoding. Adequate because equality is verified
/// against the stored encoding on every digest match.
pub fn fingerprint_bytes(bytes: &[u8]) -> Fingerprint {
    const OFFSET: u128 = 0x6c62272e07bb014262b821756295c58d;
    const PRIME: u128 = 0x0000000001000000000000000000013b;
    let mut h = OFFSET;
    for &b in bytes {
        h ^= b as u128;
        h = h.wrapping_mul(PRIME);
    }
    Fingerprint(h)
}

pub fn fingerprint(s: &State) -> Fingerprint {
    fingerprint_bytes(&s.canonical_bytes())
}

/// Where a node stands in the depth-first exploration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    Unexpanded,
    OnStack,
    Complete,
}

/// Per-state exploration record for the dynamic explorers: threads scheduled
/// to be explored, threads already explored, and for each explored thread the
/// set of threads seen to perform a dependent action after it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeBook {
    pub backtrack: BTreeSet<ThreadId>,
    pub done: BTreeSet<ThreadId>,
    pub current: BTreeMap<ThreadId, BTreeSet<ThreadId>>,
}

impl NodeBook {
    /// Initializes `current[t] = {t}` for a newly explored thread.
    pub fn begin_thread(&mut self, t: ThreadId) {
        self.done.insert(t);
        self.current.insert(t, BTreeSet::from([t]));
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub action: Action,
    pub dst: Fingerprint,
}

#[derive(Debug)]
struct Node {
    canonical: Box<[u8]>,
    status: NodeStatus,
    is_final: bool,
    edges: Vec<Edge>,
}

/// A stored transition, source and destination given as fingerprints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub src: Fingerprint,
    pub action: Action,
    pub dst: Fingerprint,
}

/// The reduced transition graph: exact-matched nodes plus labeled edges, at
/// most one edge per (source, thread).
#[derive(Debug, Default)]
pub struct ReducedLts {
    nodes: HashMap<Fingerprint, Node>,
    edge_count: usize,
}

/// Outcome of a bounded dependence traversal (see
/// [`ReducedLts::reachable_actions_bounded`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundedTraversal {
    /// Accumulated thread ids, including the pivot's own thread.
    pub tids: BTreeSet<ThreadId>,
    /// True if the stop predicate ended the traversal early.
    pub stopped: bool,
    /// Edges walked, for re-traversal accounting.
    pub edges_walked: usize,
}

impl ReducedLts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn contains(&self, fp: Fingerprint) -> bool {
        self.nodes.contains_key(&fp)
    }

    pub fn status(&self, fp: Fingerprint) -> Option<NodeStatus> {
        self.nodes.get(&fp).map(|n| n.status)
    }

    pub fn set_status(&mut self, fp: Fingerprint, status: NodeStatus) {
        self.nodes
            .get_mut(&fp)
            .expect("status update for unknown node")
            .status = status;
    }

    pub fn is_final_state(&self, fp: Fingerprint) -> bool {
        self.nodes.get(&fp).is_some_and(|n| n.is_final)
    }

    pub fn out_degree(&self, fp: Fingerprint) -> usize {
        self.nodes.get(&fp).map_or(0, |n| n.edges.len())
    }

    pub fn edges(&self, fp: Fingerprint) -> &[Edge] {
        self.nodes.get(&fp).map_or(&[], |n| &n.edges)
    }

    /// Threads with a stored outgoing edge from `fp`.
    pub fn explored_tids(&self, fp: Fingerprint) -> BTreeSet<ThreadId> {
        self.edges(fp).iter().map(|e| e.action.tid).collect()
    }

    /// Insert a state if unseen; returns its fingerprint and whether it was
    /// new. Panics on a digest collision (distinct canonical encodings with
    /// equal digests), which exact matching makes detectable.
    pub fn insert_state(&mut self, s: &State, is_final: bool) -> (Fingerprint, bool) {
        let bytes = s.canonical_bytes();
        let fp = fingerprint_bytes(&bytes);
        match self.nodes.get(&fp) {
            Some(node) => {
                assert_eq!(
                    &*node.canonical, &*bytes,
                    "fingerprint collision detected at {fp}"
                );
                (fp, false)
            }
            None => {
                self.nodes.insert(
                    fp,
                    Node {
                        canonical: bytes.into_boxed_slice(),
                        status: NodeStatus::Unexpanded,
                        is_final,
                        edges: Vec::new(),
                    },
                );
                (fp, true)
            }
        }
    }

    /// Record the transition `(src, action, dst)`. Both endpoints must exist;
    /// per-thread determinism means at most one edge per (src, tid).
    pub fn add_edge(&mut self, src: Fingerprint, action: Action, dst: Fingerprint) {
        debug_assert!(self.nodes.contains_key(&dst), "edge to unknown node");
        let node = self.nodes.get_mut(&src).expect("edge from unknown node");
        debug_assert!(
            node.edges.iter().all(|e| e.action.tid != action.tid),
            "duplicate edge for (src, tid)"
        );
        node.edges.push(Edge { action, dst });
        self.edge_count += 1;
    }

    /// A state is "not visited" when it has no stored outgoing edges yet and
    /// still has enabled threads; final states are never expanded and so
    /// never count as unvisited.
    pub fn not_visited(&self, fp: Fingerprint) -> bool {
        let node = self.nodes.get(&fp).expect("not_visited on unknown node");
        node.edges.is_empty() && !node.is_final
    }

    /// Visited means: present, and either expanded (has outgoing edges) or
    /// final. Absent states are not visited.
    pub fn is_visited(&self, fp: Fingerprint) -> bool {
        self.nodes
            .get(&fp)
            .is_some_and(|n| !n.edges.is_empty() || n.is_final)
    }

    /// All edge labels reachable from `from` (inclusive of its own edges),
    /// visiting each node at most once. Returns the label set and the number
    /// of edges walked.
    pub fn reachable_actions(&self, from: Fingerprint) -> (BTreeSet<Action>, usize) {
        let mut seen = BTreeSet::new();
        let mut actions = BTreeSet::new();
        let mut walked = 0;
        let mut stack = vec![from];
        seen.insert(from);
        while let Some(fp) = stack.pop() {
            for edge in self.edges(fp) {
                walked += 1;
                actions.insert(edge.action);
                debug_assert_ne!(
                    self.status(edge.dst),
                    Some(NodeStatus::OnStack),
                    "re-traversal reached a DFS stack node"
                );
                if seen.insert(edge.dst) {
                    stack.push(edge.dst);
                }
            }
        }
        (actions, walked)
    }

    /// Dependence-restricted reachability: walk each transition after `from`
    /// once, accumulating the thread ids of actions dependent on `pivot`.
    /// After every growth of the set, `stop` may end the traversal early.
    pub fn reachable_actions_bounded(
        &self,
        from: Fingerprint,
        pivot: &Action,
        mut stop: impl FnMut(&BTreeSet<ThreadId>) -> bool,
    ) -> BoundedTraversal {
        let mut tids = BTreeSet::from([pivot.tid]);
        if stop(&tids) {
            return BoundedTraversal {
                tids,
                stopped: true,
                edges_walked: 0,
            };
        }
        let mut seen = BTreeSet::from([from]);
        let mut stack = vec![from];
        let mut walked = 0;
        while let Some(fp) = stack.pop() {
            for edge in self.edges(fp) {
                walked += 1;
                let a = &edge.action;
                if a.tid != pivot.tid
                    && program::dependent(pivot, a)
                    && tids.insert(a.tid)
                    && stop(&tids)
                {
                    return BoundedTraversal {
                        tids,
                        stopped: true,
                        edges_walked: walked,
                    };
                }
                if seen.insert(edge.dst) {
                    stack.push(edge.dst);
                }
            }
        }
        BoundedTraversal {
            tids,
            stopped: false,
            edges_walked: walked,
        }
    }

    /// Enumerate every root-to-final action sequence stored in the graph.
    /// Used by the soundness oracle; graphs are expected to be small.
    pub fn full_executions(&self, root: Fingerprint) -> Vec<Vec<Action>> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.enumerate_paths(root, &mut path, &mut out);
        out
    }

    fn enumerate_paths(&self, fp: Fingerprint, path: &mut Vec<Action>, out: &mut Vec<Vec<Action>>) {
        let node = &self.nodes[&fp];
        if node.is_final {
            out.push(path.clone());
            return;
        }
        for edge in &node.edges {
            path.push(edge.action);
            self.enumerate_paths(edge.dst, path, out);
            path.pop();
        }
    }

    /// All stored transitions, sorted by (src, tid) for deterministic output.
    pub fn transitions(&self) -> Vec<Transition> {
        let mut out: Vec<Transition> = self
            .nodes
            .iter()
            .flat_map(|(src, node)| {
                node.edges.iter().map(|e| Transition {
                    src: *src,
                    action: e.action,
                    dst: e.dst,
                })
            })
            .collect();
        out.sort_by_key(|t| (t.src, t.action.tid));
        out
    }

    /// Fingerprints of every stored node.
    pub fn node_fingerprints(&self) -> BTreeSet<Fingerprint> {
        self.nodes.keys().copied().collect()
    }

    /// Reconstruct the concrete state of every node reachable from `root` by
    /// re-executing the stored edges, verifying each action label and
    /// destination fingerprint on the way. Returns None if any stored edge
    /// disagrees with the program semantics.
    pub fn node_states(
        &self,
        p: &Program,
        root: Fingerprint,
        root_state: &State,
    ) -> Option<HashMap<Fingerprint, State>> {
        let mut states: HashMap<Fingerprint, State> = HashMap::new();
        states.insert(root, root_state.clone());
        let mut stack = vec![root];
        while let Some(fp) = stack.pop() {
            let s = states[&fp].clone();
            for edge in self.edges(fp) {
                let step = program::next(p, &s, edge.action.tid).ok()?;
                if step.action != edge.action || fingerprint(&step.dst) != edge.dst {
                    return None;
                }
                if let std::collections::hash_map::Entry::Vacant(e) = states.entry(edge.dst) {
                    e.insert(step.dst);
                    stack.push(edge.dst);
                }
            }
        }
        Some(states)
    }

    /// Re-check every stored edge against the program semantics. Used by the
    /// oracle to confirm the reduced graph is a sub-LTS of the full one.
    pub fn validate_against(&self, p: &Program, root: Fingerprint, root_state: &State) -> bool {
        self.node_states(p, root, root_state).is_some()
    }

    /// Dump edges as JSON lines for debugging and oracle cross-checks.
    pub fn dump_jsonl(&self, p: &Program, mut w: impl std::io::Write) -> std::io::Result<()> {
        for t in self.transitions() {
            let (kind, obj) = match t.action.kind {
                program::ActionKind::Invisible => ("eps", String::new()),
                program::ActionKind::Visible { op, obj } => (
                    if op == program::Access::Read {
                        "r"
                    } else {
                        "w"
                    },
                    p.object_name(obj).to_string(),
                ),
            };
            writeln!(
                w,
                "{}",
                serde_json::json!({
                    "src": t.src.to_string(),
                    "tid": t.action.tid,
                    "pc": t.action.pc,
                    "kind": kind,
                    "obj": obj,
                    "dst": t.dst.to_string(),
                })
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{enabled, initial_state, is_final, next, parse_program};

    fn two_step_chain() -> (Program, ReducedLts, Fingerprint) {
        let p = parse_program(
            r#"{"objects":[{"id":"o","init":0}],
                "threads":[{"body":[{"op":"store","obj":"o","expr":"1"},
                                     {"op":"store","obj":"o","expr":"2"}]}]}"#,
        )
        .unwrap();
        let mut lts = ReducedLts::new();
        let s0 = initial_state(&p);
        let (f0, _) = lts.insert_state(&s0, is_final(&p, &s0));
        let st1 = next(&p, &s0, 0).unwrap();
        let (f1, _) = lts.insert_state(&st1.dst, is_final(&p, &st1.dst));
        lts.add_edge(f0, st1.action, f1);
        let st2 = next(&p, &st1.dst, 0).unwrap();
        let (f2, _) = lts.insert_state(&st2.dst, is_final(&p, &st2.dst));
        lts.add_edge(f1, st2.action, f2);
        (p, lts, f0)
    }

    #[test]
    fn fingerprints_distinguish_and_agree() {
        let p = parse_program(
            r#"{"objects":[{"id":"a","init":0},{"id":"b","init":0}],
                "threads":[{"body":[{"op":"store","obj":"a","expr":"1"},{"op":"load","reg":"r0","obj":"a"}]},
                           {"body":[{"op":"store","obj":"b","expr":"1"}]}]}"#,
        )
        .unwrap();
        let s0 = initial_state(&p);
        // Same contents via different interleavings hash identically.
        let ab = next(&p, &next(&p, &s0, 0).unwrap().dst, 1).unwrap().dst;
        let ba = next(&p, &next(&p, &s0, 1).unwrap().dst, 0).unwrap().dst;
        assert_eq!(fingerprint(&ab), fingerprint(&ba));
        // A one-register difference separates states.
        let mut tweaked = ab.clone();
        tweaked.regs[0][0] = 99;
        assert_ne!(fingerprint(&ab), fingerprint(&tweaked));
    }

    #[test]
    fn collision_smoke_10k_random_states() {
        // Pseudo-random states driven by a splitmix-style generator.
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut rand = move || {
            seed = seed.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = seed;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^ (z >> 31)
        };
        let mut seen: HashMap<u128, Vec<u8>> = HashMap::new();
        for _ in 0..10_000 {
            let s = State {
                mem: (0..4).map(|_| (rand() % 8) as i64).collect(),
                locks: (0..2)
                    .map(|_| match rand() % 3 {
                        0 => None,
                        k => Some(k as usize),
                    })
                    .collect(),
                regs: vec![(0..3).map(|_| (rand() % 4) as i64).collect(); 2],
                pcs: (0..2).map(|_| (rand() % 6) as usize).collect(),
                outcomes: vec![(0..(rand() % 3)).map(|_| (rand() % 2) as i64).collect(); 2],
            };
            let bytes = s.canonical_bytes();
            let fp = fingerprint_bytes(&bytes);
            if let Some(prev) = seen.insert(fp.0, bytes.clone()) {
                assert_eq!(prev, bytes, "digest collision on distinct encodings");
            }
        }
    }

    #[test]
    fn not_visited_tracks_edges_and_finality() {
        let (p, lts, f0) = two_step_chain();
        let s0 = initial_state(&p);
        assert!(!lts.not_visited(f0), "expanded root has edges");
        // A freshly inserted non-final state is unvisited.
        let mut fresh = ReducedLts::new();
        let (fp, new) = fresh.insert_state(&s0, is_final(&p, &s0));
        assert!(new);
        assert!(fresh.not_visited(fp));
        // Final states are never unvisited.
        let sf = next(&p, &next(&p, &s0, 0).unwrap().dst, 0).unwrap().dst;
        assert!(enabled(&p, &sf).is_empty());
        let (ffp, _) = fresh.insert_state(&sf, is_final(&p, &sf));
        assert!(!fresh.not_visited(ffp));
    }

    #[test]
    fn reachable_actions_chain_and_empty() {
        let (_, lts, f0) = two_step_chain();
        let (acts, walked) = lts.reachable_actions(f0);
        assert_eq!(acts.len(), 2);
        assert_eq!(walked, 2);
        let last = lts.transitions().last().unwrap().dst;
        let (acts, _) = lts.reachable_actions(last);
        assert!(acts.is_empty());
    }

    #[test]
    fn reachable_actions_diamond_reports_suffix_once() {
        // Two independent single-store threads: diamond with a shared suffix.
        let p = parse_program(
            r#"{"objects":[{"id":"a","init":0},{"id":"b","init":0}],
                "threads":[{"body":[{"op":"store","obj":"a","expr":"1"}]},
                           {"body":[{"op":"store","obj":"b","expr":"1"}]}]}"#,
        )
        .unwrap();
        let mut lts = ReducedLts::new();
        let s0 = initial_state(&p);
        let (f0, _) = lts.insert_state(&s0, false);
        let mut final_fp = None;
        for first in 0..2 {
            let st1 = next(&p, &s0, first).unwrap();
            let (f1, _) = lts.insert_state(&st1.dst, false);
            lts.add_edge(f0, st1.action, f1);
            let st2 = next(&p, &st1.dst, 1 - first).unwrap();
            let (f2, _) = lts.insert_state(&st2.dst, true);
            lts.add_edge(f1, st2.action, f2);
            final_fp = Some(f2);
        }
        let (acts, _) = lts.reachable_actions(f0);
        // Labels are (thread, pc, access) triples: the two store labels each
        // appear on two edges but are reported once.
        assert_eq!(acts.len(), 2);
        // Compare against per-execution enumeration.
        let mut by_paths = BTreeSet::new();
        for path in lts.full_executions(f0) {
            by_paths.extend(path);
        }
        assert_eq!(acts, by_paths);
        assert!(final_fp.is_some());
    }

    #[test]
    fn bounded_traversal_stops_early() {
        let (p, lts, f0) = two_step_chain();
        let s0 = initial_state(&p);
        let pivot = Action {
            tid: 1,
            pc: 0,
            kind: crate::program::ActionKind::Visible {
                op: crate::program::Access::Write,
                obj: 0,
            },
        };
        // Pivot dependent on the chain's writes: stop as soon as the set grows.
        let res = lts.reachable_actions_bounded(f0, &pivot, |tids| tids.len() > 1);
        assert!(res.stopped);
        assert!(res.edges_walked <= 2);
        assert!(res.tids.contains(&0));
        // Pivot independent of everything reachable: only its own thread.
        let indep = Action {
            tid: 1,
            pc: 0,
            kind: crate::program::ActionKind::Invisible,
        };
        let res = lts.reachable_actions_bounded(f0, &indep, |_| false);
        assert_eq!(res.tids, BTreeSet::from([1]));
        assert!(!res.stopped);
        let _ = s0;
    }

    #[test]
    fn validate_against_accepts_stored_graph() {
        let (p, lts, f0) = two_step_chain();
        let s0 = initial_state(&p);
        assert!(lts.validate_against(&p, f0, &s0));
    }

    #[test]
    fn dump_format() {
        let (p, lts, _) = two_step_chain();
        let mut buf = Vec::new();
        lts.dump_jsonl(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["kind"], "w");
        assert_eq!(first["obj"], "o");
        assert_eq!(first["tid"], 0);
        assert_eq!(first["src"].as_str().unwrap().len(), 32);
    }
}
