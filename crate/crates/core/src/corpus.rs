//! Built-in verification programs: hand-written witnesses for the dynamic
//! explorers, parameterized ladders, and an enumerated micro-corpus of small
//! racy programs used by the soundness suite.

use crate::program::{ObjectDecl, Program, Statement, Thread};

fn obj(name: &str, init: i64) -> ObjectDecl {
    ObjectDecl {
        name: name.to_string(),
        init,
    }
}

fn thread(body: Vec<Statement>) -> Thread {
    Thread { body, blocks: None }
}

fn load(reg: u8, obj: usize) -> Statement {
    Statement::Load { reg, obj }
}

fn store(obj: usize, value: i64) -> Statement {
    Statement::Store {
        obj,
        expr: crate::expr::Expr::Lit(value),
    }
}

fn local(reg: u8, value: i64) -> Statement {
    Statement::Local {
        reg,
        expr: crate::expr::Expr::Lit(value),
    }
}

/// `n` threads of `k` invisible steps each: the canonical exponential-
/// reduction example. The full system has (nk)!/(k!)^n executions in one
/// trace class; the safe-set explorer walks a single linearization.
pub fn invisible_ladder(n: usize, k: usize) -> Program {
    let threads = (0..n)
        .map(|_| thread((0..k).map(|i| local(0, i as i64)).collect()))
        .collect();
    Program::assemble(vec![], threads, None).expect("ladder is well-formed")
}

/// Three threads over objects o1, o2: thread 0 writes o1, thread 1 reads o2
/// then o1, thread 2 reads o1. Exploring threads {0, 1} from the root covers
/// every trace class (a source set) even though thread 2's pending read
/// conflicts with thread 0's write (so {0, 1} is not persistent). The eager
/// explorer stops at the root with done = {0, 1}.
pub fn eager_witness() -> Program {
    let (o1, o2) = (0, 1);
    Program::assemble(
        vec![obj("o1", 0), obj("o2", 0)],
        vec![
            thread(vec![store(o1, 1)]),
            thread(vec![load(0, o2), load(1, o1)]),
            thread(vec![load(2, o1)]),
        ],
        None,
    )
    .expect("witness is well-formed")
}

/// Five threads: thread 0's write to oA conflicts with every other thread;
/// threads 1, 2, 3 write private objects read by a chain of the others
/// (current sets {1,2}, {2,3}, {1,2,3}); thread 4 only reads oA. The lazy
/// explorer stops at the root with done = {0,1,2,3}: {1,2,3} is persistent
/// there, so {0,1,2,3} is a source set, while any persistent set containing
/// thread 0 must include all five threads.
pub fn lazy_witness() -> Program {
    let (oa, ob, oc, od) = (0, 1, 2, 3);
    Program::assemble(
        vec![obj("oA", 0), obj("oB", 0), obj("oC", 0), obj("oD", 0)],
        vec![
            thread(vec![store(oa, 1)]),
            thread(vec![store(ob, 1), load(0, oa), load(1, od)]),
            thread(vec![store(oc, 1), load(0, ob), load(1, oa), load(2, od)]),
            thread(vec![store(od, 1), load(0, oc), load(1, oa)]),
            thread(vec![load(0, oa)]),
        ],
        None,
    )
    .expect("witness is well-formed")
}

/// Two threads acquiring two locks in opposite orders: the classic deadlock.
pub fn deadlock_program() -> Program {
    let (a, b) = (0, 1);
    Program::assemble(
        vec![obj("la", 0), obj("lb", 0)],
        vec![
            thread(vec![
                Statement::Lock { obj: a },
                Statement::Lock { obj: b },
                Statement::Unlock { obj: b },
                Statement::Unlock { obj: a },
            ]),
            thread(vec![
                Statement::Lock { obj: b },
                Statement::Lock { obj: a },
                Statement::Unlock { obj: a },
                Statement::Unlock { obj: b },
            ]),
        ],
        None,
    )
    .expect("deadlock program is well-formed")
}

/// One visible operation in the micro-corpus alphabet: a read or write of one
/// of two shared objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    R(usize),
    W(usize),
}

const ALPHABET: [Op; 4] = [Op::R(0), Op::R(1), Op::W(0), Op::W(1)];

fn op_statement(op: Op, tid: usize, pos: usize) -> Statement {
    match op {
        Op::R(o) => load(0, o),
        // Distinct constants keep states from merging accidentally.
        Op::W(o) => store(o, (10 * tid + pos + 1) as i64),
    }
}

fn body_from(ops: &[Op], tid: usize) -> Vec<Statement> {
    ops.iter()
        .enumerate()
        .map(|(pos, &op)| op_statement(op, tid, pos))
        .collect()
}

/// All bodies of length 1 or 2 over the alphabet, in a fixed order.
fn bodies_up_to_two() -> Vec<Vec<Op>> {
    let mut out: Vec<Vec<Op>> = ALPHABET.iter().map(|&a| vec![a]).collect();
    for &a in &ALPHABET {
        for &b in &ALPHABET {
            out.push(vec![a, b]);
        }
    }
    out
}

fn rw_program(bodies: &[&[Op]]) -> Program {
    let threads = bodies
        .iter()
        .enumerate()
        .map(|(tid, ops)| thread(body_from(ops, tid)))
        .collect();
    Program::assemble(vec![obj("o0", 0), obj("o1", 0)], threads, None)
        .expect("micro programs are well-formed")
}

/// Lock-based micro programs. These exercise blocking, the lock-as-write
/// dependence convention, and the situations where a dependent thread is not
/// enabled at the state whose book is being updated (unlock-then-lock
/// races), which is what the conservative backtrack fallback exists for.
fn lock_programs() -> Vec<(String, Program)> {
    use Statement::{Lock, Unlock};
    let m = 0;
    let o = 1;
    let entry = |name: &str, p: Result<Program, crate::program::AssembleError>| {
        (name.to_string(), p.expect("lock programs are well-formed"))
    };
    vec![
        // Guarded write vs guarded read, plus an unguarded bystander.
        entry(
            "lock-guarded-rw",
            Program::assemble(
                vec![obj("m", 0), obj("o", 0)],
                vec![
                    thread(vec![Lock { obj: m }, store(o, 1), Unlock { obj: m }]),
                    thread(vec![Lock { obj: m }, load(0, o), Unlock { obj: m }]),
                    thread(vec![store(o, 2)]),
                ],
                None,
            ),
        ),
        // Three competitors for one lock.
        entry(
            "lock-three-way",
            Program::assemble(
                vec![obj("m", 0), obj("o", 0)],
                vec![
                    thread(vec![Lock { obj: m }, store(o, 1), Unlock { obj: m }]),
                    thread(vec![Lock { obj: m }, store(o, 2), Unlock { obj: m }]),
                    thread(vec![Lock { obj: m }, load(0, o), Unlock { obj: m }]),
                ],
                None,
            ),
        ),
        // Lock held while another thread races on the protected object
        // directly, with a third object whose accesses become enabled
        // mid-exploration.
        entry(
            "lock-late-enable",
            Program::assemble(
                vec![obj("m", 0), obj("o", 0), obj("p", 0)],
                vec![
                    thread(vec![
                        Lock { obj: m },
                        store(o, 1),
                        Unlock { obj: m },
                        store(2, 5),
                    ]),
                    thread(vec![
                        Lock { obj: m },
                        load(0, o),
                        load(1, 2),
                        Unlock { obj: m },
                    ]),
                    thread(vec![load(0, o), store(2, 7)]),
                ],
                None,
            ),
        ),
        // Two locks used in the same global order by all threads.
        entry(
            "two-locks-ordered",
            Program::assemble(
                vec![obj("m0", 0), obj("m1", 0), obj("o", 2)],
                vec![
                    thread(vec![
                        Lock { obj: 0 },
                        Lock { obj: 1 },
                        store(2, 1),
                        Unlock { obj: 1 },
                        Unlock { obj: 0 },
                    ]),
                    thread(vec![Lock { obj: 0 }, load(0, 2), Unlock { obj: 0 }]),
                    thread(vec![Lock { obj: 1 }, store(2, 3), Unlock { obj: 1 }]),
                ],
                None,
            ),
        ),
        // A lock plus an independent invisible worker.
        entry(
            "lock-with-invisible",
            Program::assemble(
                vec![obj("m", 0), obj("o", 0)],
                vec![
                    thread(vec![Lock { obj: m }, store(o, 1), Unlock { obj: m }]),
                    thread(vec![
                        local(0, 1),
                        Lock { obj: m },
                        store(o, 2),
                        Unlock { obj: m },
                    ]),
                    thread(vec![load(0, o)]),
                ],
                None,
            ),
        ),
        // Unlock enabling a blocked reader while a bystander writes.
        entry(
            "unlock-enables-reader",
            Program::assemble(
                vec![obj("m", 0), obj("o", 0)],
                vec![
                    thread(vec![Lock { obj: m }, store(o, 1), Unlock { obj: m }]),
                    thread(vec![
                        Lock { obj: m },
                        load(0, o),
                        Unlock { obj: m },
                        store(o, 9),
                    ]),
                ],
                None,
            ),
        ),
        // A reader blocked behind a lock held by a thread whose own work is
        // independent of the contended object. At the state where the lock
        // is held, the reader's conflict with the writer can only be
        // reordered by first running the lock holder, which never enters any
        // current set; this is the situation the conservative backtrack
        // fallback exists for.
        entry(
            "lock-blocked-reader",
            Program::assemble(
                vec![obj("m", 0), obj("o", 1), obj("p", 2)],
                vec![
                    thread(vec![store(1, 7)]),
                    thread(vec![Lock { obj: m }, store(2, 1), Unlock { obj: m }]),
                    thread(vec![Lock { obj: m }, load(0, 1), Unlock { obj: m }]),
                ],
                None,
            ),
        ),
    ]
}

/// The exhaustive micro-corpus: every unordered pair of bodies of one or two
/// read/write operations over two objects (two threads), every unordered
/// triple of single-operation bodies (three threads), a sample of the pair
/// corpus with an invisible prefix on thread 0, and the lock programs.
pub fn micro_corpus() -> Vec<(String, Program)> {
    let mut out = Vec::new();
    let bodies = bodies_up_to_two();

    for i in 0..bodies.len() {
        for j in i..bodies.len() {
            let name = format!("rw2-{i:02}-{j:02}");
            out.push((name, rw_program(&[&bodies[i], &bodies[j]])));
        }
    }

    let singles: Vec<Vec<Op>> = ALPHABET.iter().map(|&a| vec![a]).collect();
    for i in 0..singles.len() {
        for j in i..singles.len() {
            for k in j..singles.len() {
                let name = format!("rw3-{i}{j}{k}");
                out.push((name, rw_program(&[&singles[i], &singles[j], &singles[k]])));
            }
        }
    }

    // Invisible-prefix variants of every 7th two-thread program.
    for i in (0..bodies.len()).step_by(7) {
        for j in (i..bodies.len()).step_by(7) {
            let mut body0 = vec![local(1, 42)];
            body0.extend(body_from(&bodies[i], 0));
            let threads = vec![thread(body0), thread(body_from(&bodies[j], 1))];
            let p = Program::assemble(vec![obj("o0", 0), obj("o1", 0)], threads, None)
                .expect("micro programs are well-formed");
            out.push((format!("rw2eps-{i:02}-{j:02}"), p));
        }
    }

    out.extend(lock_programs());
    out
}
