//! Invariant checks across the modules: semantics determinism and
//! acyclicity, the enable/disable-implies-dependence assumption, commutation
//! of invisible actions, store behavior under edge insertion, containment
//! relations between the explorers, and source-set certificates for the
//! completed nodes of the dynamic explorers.

use std::collections::BTreeSet;

use proptest::prelude::*;

use porlab_core::corpus;
use porlab_core::explore::{Algorithm, ExploreMode, ExploreOutcome, explore};
use porlab_core::harness::{BugClass, ClientSpec, Structure, generate_client};
use porlab_core::lts::{ReducedLts, fingerprint};
use porlab_core::oracle;
use porlab_core::program::{
    Program, State, dependent, enabled, initial_state, is_final, next, parse_program,
    serialize_program,
};
use porlab_core::strategy::{SplitMix64, StrategyConfig};

fn corpus_programs() -> Vec<(String, Program)> {
    corpus::micro_corpus()
}

fn run(p: &Program, alg: Algorithm) -> ExploreOutcome {
    explore(
        p,
        alg,
        &StrategyConfig::identity(p.thread_count()),
        ExploreMode::Exhaustive,
        None,
    )
    .unwrap()
}

/// Walk a bounded sample of reachable states, applying `check` at each.
fn walk_states(p: &Program, limit: usize, mut check: impl FnMut(&State)) {
    let start = initial_state(p);
    let mut seen = BTreeSet::from([fingerprint(&start)]);
    let mut stack = vec![start];
    let mut visited = 0;
    while let Some(s) = stack.pop() {
        visited += 1;
        if visited > limit {
            break;
        }
        check(&s);
        for t in enabled(p, &s) {
            if let Ok(step) = next(p, &s, t)
                && seen.insert(fingerprint(&step.dst))
            {
                stack.push(step.dst);
            }
        }
    }
}

#[test]
fn next_is_deterministic_and_strictly_advances() {
    for (name, p) in corpus_programs().iter().step_by(5) {
        walk_states(p, 500, |s| {
            let before: usize = s.pcs.iter().sum();
            for t in enabled(p, s) {
                let a = next(p, s, t).unwrap();
                let b = next(p, s, t).unwrap();
                assert_eq!(a, b, "{name}: nondeterministic step");
                let after: usize = a.dst.pcs.iter().sum();
                assert_eq!(after, before + 1, "{name}: pc sum must grow");
            }
        });
    }
}

#[test]
fn enable_disable_changes_are_dependent() {
    for (name, p) in corpus_programs() {
        assert!(
            oracle::check_enable_dependence(&p, 200_000).unwrap_or_else(|e| panic!("{name}: {e}")),
            "{name}: enabledness changed without a dependent action"
        );
    }
}

#[test]
fn invisible_actions_commute_with_everything() {
    for (name, p) in corpus_programs().iter().filter(|(n, _)| n.contains("eps")) {
        walk_states(p, 300, |s| {
            let en = enabled(p, s);
            for &t in &en {
                let pending = p.pending_action(s, t).unwrap();
                if pending.is_visible() {
                    continue;
                }
                for &u in &en {
                    if u == t {
                        continue;
                    }
                    let tu = next(p, &next(p, s, t).unwrap().dst, u).unwrap().dst;
                    let ut = next(p, &next(p, s, u).unwrap().dst, t).unwrap().dst;
                    assert_eq!(tu, ut, "{name}: invisible step failed to commute");
                }
            }
        });
    }
}

#[test]
fn reachable_actions_idempotent_and_monotone() {
    // Build a graph edge by edge; the action set never shrinks and repeated
    // queries agree.
    let p = parse_program(
        r#"{"objects":[{"id":"o","init":0}],
            "threads":[{"body":[{"op":"store","obj":"o","expr":"1"}]},
                       {"body":[{"op":"store","obj":"o","expr":"2"}]},
                       {"body":[{"op":"load","reg":"r0","obj":"o"}]}]}"#,
    )
    .unwrap();
    let mut lts = ReducedLts::new();
    let s0 = initial_state(&p);
    let (root, _) = lts.insert_state(&s0, false);
    let mut prev = BTreeSet::new();
    let mut frontier = vec![(root, s0)];
    while let Some((fp, s)) = frontier.pop() {
        for t in enabled(&p, &s) {
            if lts.edges(fp).iter().any(|e| e.action.tid == t) {
                continue;
            }
            let step = next(&p, &s, t).unwrap();
            let (dst, fresh) = lts.insert_state(&step.dst, is_final(&p, &step.dst));
            lts.add_edge(fp, step.action, dst);
            let (now, _) = lts.reachable_actions(root);
            let (again, _) = lts.reachable_actions(root);
            assert_eq!(now, again, "idempotence");
            assert!(prev.is_subset(&now), "monotonicity under edge insertion");
            prev = now;
            if fresh {
                frontier.push((dst, step.dst));
            }
        }
    }
}

#[test]
fn eager_state_set_within_spor_state_set() {
    for (name, p) in corpus_programs() {
        let de = run(&p, Algorithm::DeSpor);
        let dl = run(&p, Algorithm::DlSpor);
        let spor = run(&p, Algorithm::Spor);
        let de_nodes = de.lts.node_fingerprints();
        let dl_nodes = dl.lts.node_fingerprints();
        let spor_nodes = spor.lts.node_fingerprints();
        assert!(
            de_nodes.is_subset(&spor_nodes),
            "{name}: eager explored outside the safe-set state space"
        );
        assert!(
            dl_nodes.is_subset(&spor_nodes),
            "{name}: lazy explored outside the safe-set state space"
        );
        assert_eq!(de_nodes, dl_nodes, "{name}: eager/lazy state sets differ");
    }
}

#[test]
fn transition_counts_agree_between_dynamic_explorers() {
    let mut programs = corpus_programs();
    for (structure, seed) in [
        (Structure::CasSet, 1u64),
        (Structure::CoarseLockSet, 2),
        (Structure::FineLockList, 3),
        (Structure::LockedMap, 4),
        (Structure::CasQueue, 5),
    ] {
        let spec = ClientSpec {
            structure,
            threads: 3,
            calls: 2,
            keys: 2,
            bug: BugClass::None,
            seed,
        };
        programs.push((spec.name(), generate_client(&spec).unwrap()));
    }
    for (name, p) in programs {
        let de = run(&p, Algorithm::DeSpor).metrics;
        let dl = run(&p, Algorithm::DlSpor).metrics;
        let spor = run(&p, Algorithm::Spor).metrics;
        assert_eq!(
            dl.transitions, de.transitions,
            "{name}: transition counts diverge"
        );
        assert!(
            dl.transitions <= spor.transitions,
            "{name}: lazy stored more transitions than the static explorer"
        );
    }
}

/// The threads explored from every completed non-final node form a source
/// set for that node's state (the stopping certificate of both dynamic
/// explorers).
#[test]
fn explored_sets_at_completed_nodes_are_source_sets() {
    let sample: Vec<(String, Program)> = {
        let all = corpus_programs();
        let lock_programs: Vec<_> = all
            .iter()
            .filter(|(n, _)| n.starts_with("lock") || n.starts_with("two-locks"))
            .cloned()
            .collect();
        all.iter()
            .step_by(17)
            .cloned()
            .chain(lock_programs)
            .collect()
    };
    for alg in [Algorithm::DeSpor, Algorithm::DlSpor] {
        for (name, p) in &sample {
            let out = run(p, alg);
            let root_state = initial_state(p);
            let states = out
                .lts
                .node_states(p, out.root, &root_state)
                .expect("reduced graph re-validates");
            for (fp, state) in &states {
                if is_final(p, state) {
                    continue;
                }
                let done = out.lts.explored_tids(*fp);
                assert!(
                    oracle::is_source_set(p, state, &done, oracle::DEFAULT_BUDGET)
                        .unwrap_or_else(|e| panic!("{name}: {e}")),
                    "{name}/{}: explored set {done:?} is not a source set",
                    alg.label()
                );
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Randomized round trips
// ---------------------------------------------------------------------------

fn arb_client_spec() -> impl Strategy<Value = ClientSpec> {
    let structures = prop_oneof![
        Just(Structure::CoarseLockSet),
        Just(Structure::FineLockList),
        Just(Structure::CasSet),
        Just(Structure::LockedMap),
        Just(Structure::CasQueue),
    ];
    (structures, 1..=3usize, 1..=2usize, 1..=3usize, any::<u64>()).prop_map(
        |(structure, threads, calls, keys, seed)| ClientSpec {
            structure,
            threads,
            calls,
            keys,
            bug: BugClass::None,
            seed,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    /// Serializing and re-parsing a generated client yields the same program,
    /// and generation is a pure function of the spec.
    #[test]
    fn client_documents_round_trip(spec in arb_client_spec()) {
        let p1 = generate_client(&spec).unwrap();
        let text = serialize_program(&p1);
        let p2 = parse_program(&text).unwrap();
        prop_assert_eq!(&p1, &p2);
        prop_assert_eq!(text, serialize_program(&generate_client(&spec).unwrap()));
    }

    /// Fingerprints agree exactly when canonical encodings agree.
    #[test]
    fn fingerprint_matches_canonical_bytes(seed in any::<u64>()) {
        let mut rng = SplitMix64(seed);
        let random_state = |rng: &mut SplitMix64| State {
            mem: (0..3).map(|_| (rng.below(4)) as i64).collect(),
            locks: (0..2).map(|_| match rng.below(3) { 0 => None, k => Some(k as usize) }).collect(),
            regs: vec![(0..2).map(|_| rng.below(3) as i64).collect(); 2],
            pcs: (0..2).map(|_| rng.below(4) as usize).collect(),
            outcomes: vec![(0..rng.below(2)).map(|_| rng.below(2) as i64).collect(); 2],
        };
        let a = random_state(&mut rng);
        let b = random_state(&mut rng);
        let same_bytes = a.canonical_bytes() == b.canonical_bytes();
        prop_assert_eq!(same_bytes, fingerprint(&a) == fingerprint(&b));
    }

    /// Strategy tokens round-trip through parse and display.
    #[test]
    fn strategy_tokens_round_trip(seed in any::<u64>(), perm_len in 1..=4usize) {
        let rand = StrategyConfig::Random { seed };
        prop_assert_eq!(rand.to_string().parse::<StrategyConfig>().unwrap(), rand);
        let seq = StrategyConfig::Sequential((0..perm_len).rev().collect());
        prop_assert_eq!(seq.to_string().parse::<StrategyConfig>().unwrap(), seq);
    }

    /// Dependence is symmetric and blind to visibility order.
    #[test]
    fn dependence_is_symmetric(
        tid_a in 0..3usize, tid_b in 0..3usize,
        pc_a in 0..4usize, pc_b in 0..4usize,
        ka in 0..3u8, kb in 0..3u8, obj_a in 0..2usize, obj_b in 0..2usize,
    ) {
        use porlab_core::program::{Access, Action, ActionKind};
        prop_assume!(tid_a != tid_b);
        let kind = |k: u8, obj: usize| match k {
            0 => ActionKind::Invisible,
            1 => ActionKind::Visible { op: Access::Read, obj },
            _ => ActionKind::Visible { op: Access::Write, obj },
        };
        let a = Action { tid: tid_a, pc: pc_a, kind: kind(ka, obj_a) };
        let b = Action { tid: tid_b, pc: pc_b, kind: kind(kb, obj_b) };
        prop_assert_eq!(dependent(&a, &b), dependent(&b, &a));
    }
}
