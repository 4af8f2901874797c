//! Bounded concurrent programs over shared integer objects, and their
//! sequentially consistent small-step semantics.
//!
//! A program is a fixed set of threads, each a finite statement sequence over
//! declared shared objects. Loops in the input document are bounded and
//! unrolled at load time, so every program generates a finite, acyclic,
//! deterministic transition system.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::{Expr, MAX_REGISTER};

pub type ThreadId = usize;
pub type ObjId = usize;

/// Cap on a thread's body after loop unrolling.
const MAX_BODY_LEN: usize = 4096;

/// A declared shared object: name plus initial value. Objects are stored
/// sorted by name so state encodings are canonical.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectDecl {
    pub name: String,
    pub init: i64,
}

/// One atomic statement. LOAD/STORE/CAS/LOCK/UNLOCK are visible (they access
/// a shared object); LOCAL and RECORD are invisible. Lock and unlock are
/// classified as writes to the lock object, and CAS is a write whether or not
/// it succeeds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Statement {
    Load {
        reg: u8,
        obj: ObjId,
    },
    Store {
        obj: ObjId,
        expr: Expr,
    },
    Cas {
        obj: ObjId,
        expect: Expr,
        new: Expr,
        reg: u8,
    },
    Lock {
        obj: ObjId,
    },
    Unlock {
        obj: ObjId,
    },
    Local {
        reg: u8,
        expr: Expr,
    },
    Record {
        reg: u8,
    },
}

impl Statement {
    pub fn accessed_object(&self) -> Option<ObjId> {
        match self {
            Statement::Load { obj, .. }
            | Statement::Store { obj, .. }
            | Statement::Cas { obj, .. }
            | Statement::Lock { obj }
            | Statement::Unlock { obj } => Some(*obj),
            Statement::Local { .. } | Statement::Record { .. } => None,
        }
    }

    fn action_kind(&self) -> ActionKind {
        match self {
            Statement::Load { obj, .. } => ActionKind::Visible {
                op: Access::Read,
                obj: *obj,
            },
            Statement::Store { obj, .. }
            | Statement::Cas { obj, .. }
            | Statement::Lock { obj }
            | Statement::Unlock { obj } => ActionKind::Visible {
                op: Access::Write,
                obj: *obj,
            },
            Statement::Local { .. } | Statement::Record { .. } => ActionKind::Invisible,
        }
    }

    fn max_register(&self) -> Option<u8> {
        match self {
            Statement::Load { reg, .. } | Statement::Record { reg } => Some(*reg),
            Statement::Store { expr, .. } => expr.max_register(),
            Statement::Cas {
                expect, new, reg, ..
            } => expect
                .max_register()
                .max(new.max_register())
                .max(Some(*reg)),
            Statement::Lock { .. } | Statement::Unlock { .. } => None,
            Statement::Local { reg, expr } => expr.max_register().max(Some(*reg)),
        }
    }
}

/// One thread: an unrolled statement sequence plus optional method-block
/// lengths (used by the sequential-outcome oracle; they must sum to the body
/// length).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Thread {
    pub body: Vec<Statement>,
    pub blocks: Option<Vec<usize>>,
}

/// Admitted final outcomes: each entry is the concatenation of the
/// per-thread observed-outcome lists, in thread order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeSpec {
    pub admitted: BTreeSet<Vec<i64>>,
}

/// A validated bounded concurrent program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    objects: Vec<ObjectDecl>,
    threads: Vec<Thread>,
    spec: Option<OutcomeSpec>,
    /// Uniform register-file size per thread (max referenced register + 1).
    reg_count: usize,
}

impl Program {
    pub fn objects(&self) -> &[ObjectDecl] {
        &self.objects
    }

    pub fn threads(&self) -> &[Thread] {
        &self.threads
    }

    pub fn thread_count(&self) -> usize {
        self.threads.len()
    }

    pub fn spec(&self) -> Option<&OutcomeSpec> {
        self.spec.as_ref()
    }

    pub fn set_spec(&mut self, spec: OutcomeSpec) {
        self.spec = Some(spec);
    }

    pub fn object_name(&self, obj: ObjId) -> &str {
        &self.objects[obj].name
    }

    pub fn statement(&self, tid: ThreadId, pc: usize) -> Option<&Statement> {
        self.threads.get(tid).and_then(|t| t.body.get(pc))
    }

    /// The action thread `tid` would perform next from `s`, if any statement
    /// remains. Defined whether or not the thread is currently blocked.
    pub fn pending_action(&self, s: &State, tid: ThreadId) -> Option<Action> {
        let pc = s.pcs[tid];
        self.statement(tid, pc).map(|stmt| Action {
            tid,
            pc,
            kind: stmt.action_kind(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AssembleError {
    #[error("objects must be pre-sorted by name and distinct (offender: {0:?})")]
    UnsortedObjects(String),
    #[error("thread {thread} references object index {index} out of range")]
    BadObjectIndex { thread: usize, index: usize },
    #[error("thread {thread}: block lengths do not sum to body length")]
    BadBlocks { thread: usize },
}

impl Program {
    /// Build a program directly from parts. `objects` must already be sorted
    /// by name (indices in the statement bodies refer to that order).
    pub fn assemble(
        objects: Vec<ObjectDecl>,
        threads: Vec<Thread>,
        spec: Option<OutcomeSpec>,
    ) -> Result<Program, AssembleError> {
        for pair in objects.windows(2) {
            if pair[0].name >= pair[1].name {
                return Err(AssembleError::UnsortedObjects(pair[1].name.clone()));
            }
        }
        for (tid, t) in threads.iter().enumerate() {
            for stmt in &t.body {
                if let Some(obj) = stmt.accessed_object()
                    && obj >= objects.len()
                {
                    return Err(AssembleError::BadObjectIndex {
                        thread: tid,
                        index: obj,
                    });
                }
            }
            if let Some(blocks) = &t.blocks
                && (blocks.iter().sum::<usize>() != t.body.len() || blocks.contains(&0))
            {
                return Err(AssembleError::BadBlocks { thread: tid });
            }
        }
        let reg_count = threads
            .iter()
            .flat_map(|t| &t.body)
            .filter_map(|s| s.max_register())
            .max()
            .map_or(0, |r| r as usize + 1);
        Ok(Program {
            objects,
            threads,
            spec,
            reg_count,
        })
    }
}

/// Read or write access to a shared object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Access {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActionKind {
    Invisible,
    Visible { op: Access, obj: ObjId },
}

/// A transition label: executing thread, its program counter, and the shared
/// access performed (if any).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Action {
    pub tid: ThreadId,
    pub pc: usize,
    pub kind: ActionKind,
}

impl Action {
    pub fn is_visible(&self) -> bool {
        matches!(self.kind, ActionKind::Visible { .. })
    }

    pub fn obj(&self) -> Option<ObjId> {
        match self.kind {
            ActionKind::Visible { obj, .. } => Some(obj),
            ActionKind::Invisible => None,
        }
    }

    /// Render with object names resolved, e.g. `t0@3:w(m)`.
    pub fn display<'a>(&'a self, p: &'a Program) -> impl fmt::Display + 'a {
        struct D<'a>(&'a Action, &'a Program);
        impl fmt::Display for D<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                match self.0.kind {
                    ActionKind::Invisible => write!(f, "t{}@{}:eps", self.0.tid, self.0.pc),
                    ActionKind::Visible { op, obj } => {
                        let op = if op == Access::Read { "r" } else { "w" };
                        write!(
                            f,
                            "t{}@{}:{op}({})",
                            self.0.tid,
                            self.0.pc,
                            self.1.object_name(obj)
                        )
                    }
                }
            }
        }
        D(self, p)
    }
}

/// Two actions of different threads conflict iff both are visible, touch the
/// same object, and at least one writes.
///
/// Callers must never ask about two actions of the same thread; program order
/// covers that case.
pub fn dependent(a: &Action, b: &Action) -> bool {
    assert_ne!(a.tid, b.tid, "dependence is only defined across threads");
    match (a.kind, b.kind) {
        (
            ActionKind::Visible {
                op: op_a,
                obj: obj_a,
            },
            ActionKind::Visible {
                op: op_b,
                obj: obj_b,
            },
        ) => obj_a == obj_b && !(op_a == Access::Read && op_b == Access::Read),
        _ => false,
    }
}

/// A program state: shared memory, lock holders, per-thread register files,
/// program counters, and observed-outcome lists.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct State {
    pub mem: Vec<i64>,
    pub locks: Vec<Option<ThreadId>>,
    pub regs: Vec<Vec<i64>>,
    pub pcs: Vec<usize>,
    pub outcomes: Vec<Vec<i64>>,
}

impl State {
    /// Canonical byte encoding: objects in declaration (sorted-by-name) order,
    /// then threads in id order. Outcome lists are length-prefixed so the
    /// encoding is unambiguous.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(
            8 * (self.mem.len() * 2 + self.pcs.len() * 2)
                + 8 * self.regs.iter().map(|r| r.len()).sum::<usize>(),
        );
        for v in &self.mem {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for l in &self.locks {
            let tag = match l {
                None => 0u64,
                Some(t) => *t as u64 + 1,
            };
            out.extend_from_slice(&tag.to_le_bytes());
        }
        for tid in 0..self.pcs.len() {
            out.extend_from_slice(&(self.pcs[tid] as u64).to_le_bytes());
            for r in &self.regs[tid] {
                out.extend_from_slice(&r.to_le_bytes());
            }
            out.extend_from_slice(&(self.outcomes[tid].len() as u64).to_le_bytes());
            for v in &self.outcomes[tid] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Concatenated per-thread observed outcomes, in thread order.
    pub fn outcome_tuple(&self) -> Vec<i64> {
        self.outcomes.iter().flatten().copied().collect()
    }
}

/// The unique initial state: declared memory values, all locks free, zeroed
/// registers, all program counters at 0, empty outcome lists.
pub fn initial_state(p: &Program) -> State {
    State {
        mem: p.objects.iter().map(|o| o.init).collect(),
        locks: vec![None; p.objects.len()],
        regs: vec![vec![0; p.reg_count]; p.threads.len()],
        pcs: vec![0; p.threads.len()],
        outcomes: vec![Vec::new(); p.threads.len()],
    }
}

/// True when every thread has run its whole body.
pub fn is_final(p: &Program, s: &State) -> bool {
    s.pcs
        .iter()
        .zip(&p.threads)
        .all(|(pc, t)| *pc >= t.body.len())
}

/// Threads that can take a step: program counter within the body and, for a
/// pending LOCK, the lock not held by another thread.
pub fn enabled(p: &Program, s: &State) -> BTreeSet<ThreadId> {
    let mut out = BTreeSet::new();
    for (tid, thread) in p.threads.iter().enumerate() {
        let pc = s.pcs[tid];
        if pc >= thread.body.len() {
            continue;
        }
        if let Statement::Lock { obj } = &thread.body[pc]
            && matches!(s.locks[*obj], Some(holder) if holder != tid)
        {
            continue;
        }
        out.insert(tid);
    }
    out
}

/// Runtime faults that abort exploration of a program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum Fault {
    #[error("integer overflow in expression")]
    Overflow,
    #[error("thread {tid} unlocked object it does not hold")]
    UnlockNotHeld { tid: ThreadId },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StepError {
    #[error("thread {0} is blocked")]
    Blocked(ThreadId),
    #[error(transparent)]
    Fault(#[from] Fault),
}

/// Result of executing one statement: the action performed and the successor
/// state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub action: Action,
    pub dst: State,
}

/// Execute thread `tid`'s next statement from `s`. Deterministic: a given
/// (state, thread) pair always yields the same step.
pub fn next(p: &Program, s: &State, tid: ThreadId) -> Result<Step, StepError> {
    if !enabled(p, s).contains(&tid) {
        return Err(StepError::Blocked(tid));
    }
    let pc = s.pcs[tid];
    let stmt = &p.threads[tid].body[pc];
    let mut dst = s.clone();
    match stmt {
        Statement::Load { reg, obj } => {
            dst.regs[tid][*reg as usize] = s.mem[*obj];
        }
        Statement::Store { obj, expr } => {
            dst.mem[*obj] = expr.eval(&s.regs[tid]).map_err(StepError::Fault)?;
        }
        Statement::Cas {
            obj,
            expect,
            new,
            reg,
        } => {
            let expect = expect.eval(&s.regs[tid]).map_err(StepError::Fault)?;
            if s.mem[*obj] == expect {
                dst.mem[*obj] = new.eval(&s.regs[tid]).map_err(StepError::Fault)?;
                dst.regs[tid][*reg as usize] = 1;
            } else {
                dst.regs[tid][*reg as usize] = 0;
            }
        }
        Statement::Lock { obj } => {
            dst.locks[*obj] = Some(tid);
        }
        Statement::Unlock { obj } => {
            if s.locks[*obj] != Some(tid) {
                return Err(StepError::Fault(Fault::UnlockNotHeld { tid }));
            }
            dst.locks[*obj] = None;
        }
        Statement::Local { reg, expr } => {
            dst.regs[tid][*reg as usize] = expr.eval(&s.regs[tid]).map_err(StepError::Fault)?;
        }
        Statement::Record { reg } => {
            let v = s.regs[tid][*reg as usize];
            dst.outcomes[tid].push(v);
        }
    }
    dst.pcs[tid] = pc + 1;
    Ok(Step {
        action: Action {
            tid,
            pc,
            kind: stmt.action_kind(),
        },
        dst,
    })
}

/// Re-execute a recorded action sequence from the initial state, verifying
/// each action label against the program's semantics. Returns the final
/// state reached.
pub fn replay(p: &Program, actions: &[Action]) -> Result<State, ReplayError> {
    let mut s = initial_state(p);
    for (i, a) in actions.iter().enumerate() {
        let step = next(p, &s, a.tid).map_err(|e| ReplayError::Step {
            index: i,
            source: e,
        })?;
        if step.action != *a {
            return Err(ReplayError::ActionMismatch {
                index: i,
                expected: *a,
                actual: step.action,
            });
        }
        s = step.dst;
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("replay step {index} failed: {source}")]
    Step { index: usize, source: StepError },
    #[error("replay step {index}: recorded {expected:?} but program produced {actual:?}")]
    ActionMismatch {
        index: usize,
        expected: Action,
        actual: Action,
    },
}

// ---------------------------------------------------------------------------
// Program documents (JSON external interface)
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct DocProgram {
    objects: Vec<DocObject>,
    threads: Vec<DocThread>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spec: Option<DocSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DocObject {
    id: String,
    init: i64,
}

#[derive(Debug, Serialize, Deserialize)]
struct DocThread {
    body: Vec<DocStatement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    methods: Option<Vec<usize>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DocSpec {
    admitted: Vec<Vec<i64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
enum DocStatement {
    Load {
        reg: String,
        obj: String,
    },
    Store {
        obj: String,
        expr: String,
    },
    Cas {
        obj: String,
        expect: String,
        new: String,
        reg: String,
    },
    Lock {
        obj: String,
    },
    Unlock {
        obj: String,
    },
    Local {
        reg: String,
        expr: String,
    },
    Record {
        reg: String,
    },
    Loop {
        count: Option<u64>,
        body: Vec<DocStatement>,
    },
}

/// Errors raised while loading a program document.
#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate object id {0:?}")]
    DuplicateObject(String),
    #[error("thread {thread}: undeclared object {name:?}")]
    UndeclaredObject { thread: usize, name: String },
    #[error("thread {thread}: bad register {reg:?}: {message}")]
    BadRegister {
        thread: usize,
        reg: String,
        message: String,
    },
    #[error("thread {thread}: {source}")]
    BadExpr {
        thread: usize,
        source: crate::expr::ExprError,
    },
    #[error("thread {thread}: loop without bound")]
    UnboundedLoop { thread: usize },
    #[error("thread {thread}: unrolled body exceeds {MAX_BODY_LEN} statements")]
    BodyTooLong { thread: usize },
    #[error("thread {thread}: method lengths {given:?} do not sum to body length {body}")]
    BadMethods {
        thread: usize,
        given: Vec<usize>,
        body: usize,
    },
    #[error("spec.admitted must be nonempty when present")]
    EmptySpec,
}

/// Parse and validate a program document. Bounded loops are unrolled here, so
/// the returned program's transition system is acyclic by construction.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let doc: DocProgram = serde_json::from_str(text).map_err(|e| ParseError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    program_from_doc(doc)
}

fn program_from_doc(doc: DocProgram) -> Result<Program, ParseError> {
    // Sort objects by id; indices below refer to this canonical order.
    let mut objects: Vec<ObjectDecl> = doc
        .objects
        .iter()
        .map(|o| ObjectDecl {
            name: o.id.clone(),
            init: o.init,
        })
        .collect();
    objects.sort_by(|a, b| a.name.cmp(&b.name));
    for pair in objects.windows(2) {
        if pair[0].name == pair[1].name {
            return Err(ParseError::DuplicateObject(pair[0].name.clone()));
        }
    }
    let lookup = |thread: usize, name: &str| -> Result<ObjId, ParseError> {
        objects
            .binary_search_by(|o| o.name.as_str().cmp(name))
            .map_err(|_| ParseError::UndeclaredObject {
                thread,
                name: name.to_string(),
            })
    };

    let mut threads = Vec::with_capacity(doc.threads.len());
    for (tid, t) in doc.threads.iter().enumerate() {
        let mut body = Vec::new();
        unroll(tid, &t.body, &mut body, &lookup)?;
        if body.len() > MAX_BODY_LEN {
            return Err(ParseError::BodyTooLong { thread: tid });
        }
        let blocks = match &t.methods {
            None => None,
            Some(lens) => {
                if lens.iter().sum::<usize>() != body.len() || lens.contains(&0) {
                    return Err(ParseError::BadMethods {
                        thread: tid,
                        given: lens.clone(),
                        body: body.len(),
                    });
                }
                Some(lens.clone())
            }
        };
        threads.push(Thread { body, blocks });
    }

    let spec = match doc.spec {
        None => None,
        Some(s) => {
            if s.admitted.is_empty() {
                return Err(ParseError::EmptySpec);
            }
            Some(OutcomeSpec {
                admitted: s.admitted.into_iter().collect(),
            })
        }
    };

    let reg_count = threads
        .iter()
        .flat_map(|t| &t.body)
        .filter_map(|s| s.max_register())
        .max()
        .map_or(0, |r| r as usize + 1);

    Ok(Program {
        objects,
        threads,
        spec,
        reg_count,
    })
}

fn unroll(
    tid: usize,
    src: &[DocStatement],
    out: &mut Vec<Statement>,
    lookup: &impl Fn(usize, &str) -> Result<ObjId, ParseError>,
) -> Result<(), ParseError> {
    for stmt in src {
        match stmt {
            DocStatement::Loop { count, body } => {
                let n = count.ok_or(ParseError::UnboundedLoop { thread: tid })?;
                for _ in 0..n {
                    unroll(tid, body, out, lookup)?;
                    if out.len() > MAX_BODY_LEN {
                        return Err(ParseError::BodyTooLong { thread: tid });
                    }
                }
            }
            other => out.push(lower(tid, other, lookup)?),
        }
    }
    Ok(())
}

fn parse_reg(tid: usize, text: &str) -> Result<u8, ParseError> {
    let bad = |message: &str| ParseError::BadRegister {
        thread: tid,
        reg: text.to_string(),
        message: message.to_string(),
    };
    let digits = text.strip_prefix('r').ok_or_else(|| bad("expected rN"))?;
    let idx: u32 = digits.parse().map_err(|_| bad("expected rN"))?;
    if idx > MAX_REGISTER as u32 {
        return Err(bad("register index out of range"));
    }
    Ok(idx as u8)
}

fn parse_expr(tid: usize, text: &str) -> Result<Expr, ParseError> {
    Expr::parse(text).map_err(|source| ParseError::BadExpr {
        thread: tid,
        source,
    })
}

fn lower(
    tid: usize,
    stmt: &DocStatement,
    lookup: &impl Fn(usize, &str) -> Result<ObjId, ParseError>,
) -> Result<Statement, ParseError> {
    Ok(match stmt {
        DocStatement::Load { reg, obj } => Statement::Load {
            reg: parse_reg(tid, reg)?,
            obj: lookup(tid, obj)?,
        },
        DocStatement::Store { obj, expr } => Statement::Store {
            obj: lookup(tid, obj)?,
            expr: parse_expr(tid, expr)?,
        },
        DocStatement::Cas {
            obj,
            expect,
            new,
            reg,
        } => Statement::Cas {
            obj: lookup(tid, obj)?,
            expect: parse_expr(tid, expect)?,
            new: parse_expr(tid, new)?,
            reg: parse_reg(tid, reg)?,
        },
        DocStatement::Lock { obj } => Statement::Lock {
            obj: lookup(tid, obj)?,
        },
        DocStatement::Unlock { obj } => Statement::Unlock {
            obj: lookup(tid, obj)?,
        },
        DocStatement::Local { reg, expr } => Statement::Local {
            reg: parse_reg(tid, reg)?,
            expr: parse_expr(tid, expr)?,
        },
        DocStatement::Record { reg } => Statement::Record {
            reg: parse_reg(tid, reg)?,
        },
        DocStatement::Loop { .. } => unreachable!("loops handled by unroll"),
    })
}

/// Serialize a program back to its document form (loop-free, since loops were
/// unrolled at load time).
pub fn serialize_program(p: &Program) -> String {
    let doc = DocProgram {
        objects: p
            .objects
            .iter()
            .map(|o| DocObject {
                id: o.name.clone(),
                init: o.init,
            })
            .collect(),
        threads: p
            .threads
            .iter()
            .map(|t| DocThread {
                body: t.body.iter().map(|s| raise(p, s)).collect(),
                methods: t.blocks.clone(),
            })
            .collect(),
        spec: p.spec.as_ref().map(|s| DocSpec {
            admitted: s.admitted.iter().cloned().collect(),
        }),
    };
    serde_json::to_string_pretty(&doc).expect("program documents always serialize")
}

fn raise(p: &Program, stmt: &Statement) -> DocStatement {
    let name = |obj: &ObjId| p.objects[*obj].name.clone();
    match stmt {
        Statement::Load { reg, obj } => DocStatement::Load {
            reg: format!("r{reg}"),
            obj: name(obj),
        },
        Statement::Store { obj, expr } => DocStatement::Store {
            obj: name(obj),
            expr: expr.to_string(),
        },
        Statement::Cas {
            obj,
            expect,
            new,
            reg,
        } => DocStatement::Cas {
            obj: name(obj),
            expect: expect.to_string(),
            new: new.to_string(),
            reg: format!("r{reg}"),
        },
        Statement::Lock { obj } => DocStatement::Lock { obj: name(obj) },
        Statement::Unlock { obj } => DocStatement::Unlock { obj: name(obj) },
        Statement::Local { reg, expr } => DocStatement::Local {
            reg: format!("r{reg}"),
            expr: expr.to_string(),
        },
        Statement::Record { reg } => DocStatement::Record {
            reg: format!("r{reg}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn doc_minimal() -> &'static str {
        r#"{"objects":[{"id":"o1","init":0}],
            "threads":[{"body":[{"op":"local","reg":"r0","expr":"1"}]}]}"#
    }

    #[test]
    fn parses_minimal_program() {
        let p = parse_program(doc_minimal()).unwrap();
        assert_eq!(p.thread_count(), 1);
        assert_eq!(p.threads()[0].body.len(), 1);
    }

    #[test]
    fn undeclared_object_rejected() {
        let doc = r#"{"objects":[],"threads":[{"body":[{"op":"store","obj":"x","expr":"5"}]}]}"#;
        let err = parse_program(doc).unwrap_err();
        assert!(matches!(err, ParseError::UndeclaredObject { name, .. } if name == "x"));
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse_program("{not json").unwrap_err();
        match err {
            ParseError::Syntax { line, column, .. } => {
                assert_eq!(line, 1);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn loop_unrolls_and_requires_bound() {
        let doc = r#"{"objects":[{"id":"o","init":0}],
            "threads":[{"body":[{"op":"loop","count":3,"body":[{"op":"store","obj":"o","expr":"1"}]}]}]}"#;
        let p = parse_program(doc).unwrap();
        assert_eq!(p.threads()[0].body.len(), 3);

        let doc = r#"{"objects":[],"threads":[{"body":[{"op":"loop","body":[]}]}]}"#;
        assert!(matches!(
            parse_program(doc).unwrap_err(),
            ParseError::UnboundedLoop { .. }
        ));
    }

    #[test]
    fn initial_state_shape() {
        let doc = r#"{"objects":[{"id":"o1","init":7}],
            "threads":[{"body":[{"op":"local","reg":"r0","expr":"1"}]},
                       {"body":[{"op":"store","obj":"o1","expr":"2"}]}]}"#;
        let p = parse_program(doc).unwrap();
        let s = initial_state(&p);
        assert_eq!(s.mem, vec![7]);
        assert_eq!(s.pcs, vec![0, 0]);
        assert_eq!(s.locks, vec![None]);
        assert!(s.outcomes.iter().all(|o| o.is_empty()));
    }

    #[test]
    fn empty_thread_program_is_final() {
        let p = parse_program(r#"{"objects":[],"threads":[]}"#).unwrap();
        let s = initial_state(&p);
        assert!(is_final(&p, &s));
        assert!(enabled(&p, &s).is_empty());
    }

    #[test]
    fn lock_blocks_other_threads() {
        let doc = r#"{"objects":[{"id":"m","init":0},{"id":"o","init":0}],
            "threads":[
              {"body":[{"op":"lock","obj":"m"},{"op":"store","obj":"o","expr":"1"},{"op":"unlock","obj":"m"}]},
              {"body":[{"op":"lock","obj":"m"},{"op":"unlock","obj":"m"}]}]}"#;
        let p = parse_program(doc).unwrap();
        let s0 = initial_state(&p);
        assert_eq!(enabled(&p, &s0), BTreeSet::from([0, 1]));
        // Thread 1 takes the lock; thread 0's pending LOCK is now blocked.
        let s1 = next(&p, &s0, 1).unwrap().dst;
        assert_eq!(enabled(&p, &s1), BTreeSet::from([1]));
        // Lock actions are writes on the lock object.
        let a = next(&p, &s0, 1).unwrap().action;
        assert_eq!(
            a.kind,
            ActionKind::Visible {
                op: Access::Write,
                obj: 0
            }
        );
    }

    #[test]
    fn store_and_cas_semantics() {
        let doc = r#"{"objects":[{"id":"o","init":0}],
            "threads":[{"body":[
                {"op":"cas","obj":"o","expect":"0","new":"1","reg":"r0"},
                {"op":"cas","obj":"o","expect":"0","new":"9","reg":"r1"},
                {"op":"store","obj":"o","expr":"5"}]}]}"#;
        let p = parse_program(doc).unwrap();
        let s0 = initial_state(&p);
        let s1 = next(&p, &s0, 0).unwrap();
        assert_eq!(s1.dst.mem[0], 1);
        assert_eq!(s1.dst.regs[0][0], 1);
        assert_eq!(
            s1.action.kind,
            ActionKind::Visible {
                op: Access::Write,
                obj: 0
            }
        );
        // Failed CAS: memory unchanged, result register 0, still a write action.
        let s2 = next(&p, &s1.dst, 0).unwrap();
        assert_eq!(s2.dst.mem[0], 1);
        assert_eq!(s2.dst.regs[0][1], 0);
        assert_eq!(
            s2.action.kind,
            ActionKind::Visible {
                op: Access::Write,
                obj: 0
            }
        );
        let s3 = next(&p, &s2.dst, 0).unwrap();
        assert_eq!(s3.dst.mem[0], 5);
    }

    #[test]
    fn unlock_not_held_faults() {
        let doc = r#"{"objects":[{"id":"m","init":0}],
            "threads":[{"body":[{"op":"unlock","obj":"m"}]}]}"#;
        let p = parse_program(doc).unwrap();
        let s = initial_state(&p);
        assert_eq!(
            next(&p, &s, 0),
            Err(StepError::Fault(Fault::UnlockNotHeld { tid: 0 }))
        );
    }

    #[test]
    fn dependence_classification() {
        let w = |tid| Action {
            tid,
            pc: 0,
            kind: ActionKind::Visible {
                op: Access::Write,
                obj: 0,
            },
        };
        let r = |tid| Action {
            tid,
            pc: 0,
            kind: ActionKind::Visible {
                op: Access::Read,
                obj: 0,
            },
        };
        let eps = |tid| Action {
            tid,
            pc: 0,
            kind: ActionKind::Invisible,
        };
        assert!(dependent(&w(1), &r(2)));
        assert!(!dependent(&r(1), &r(2)));
        assert!(!dependent(&eps(1), &w(2)));
        let r_other = Action {
            tid: 2,
            pc: 0,
            kind: ActionKind::Visible {
                op: Access::Read,
                obj: 1,
            },
        };
        assert!(!dependent(&w(1), &r_other));
    }

    #[test]
    #[should_panic(expected = "only defined across threads")]
    fn same_thread_dependence_panics() {
        let a = Action {
            tid: 1,
            pc: 0,
            kind: ActionKind::Invisible,
        };
        let _ = dependent(&a, &a);
    }

    #[test]
    fn round_trip_parse_serialize() {
        let doc = r#"{"objects":[{"id":"m","init":0},{"id":"e0","init":0}],
            "threads":[
              {"body":[{"op":"lock","obj":"m"},{"op":"load","reg":"r0","obj":"e0"},
                       {"op":"store","obj":"e0","expr":"1"},{"op":"unlock","obj":"m"},
                       {"op":"record","reg":"r0"}],
               "methods":[5]},
              {"body":[{"op":"cas","obj":"e0","expect":"0","new":"1","reg":"r1"},
                       {"op":"record","reg":"r1"}]}],
            "spec":{"admitted":[[1,0],[0,1]]}}"#;
        let p1 = parse_program(doc).unwrap();
        let p2 = parse_program(&serialize_program(&p1)).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn replay_validates_actions() {
        let doc = r#"{"objects":[{"id":"o","init":0}],
            "threads":[{"body":[{"op":"store","obj":"o","expr":"5"}]},
                       {"body":[{"op":"load","reg":"r0","obj":"o"}]}]}"#;
        let p = parse_program(doc).unwrap();
        let s0 = initial_state(&p);
        let a0 = next(&p, &s0, 0).unwrap().action;
        let s1 = next(&p, &s0, 0).unwrap().dst;
        let a1 = next(&p, &s1, 1).unwrap().action;
        let end = replay(&p, &[a0, a1]).unwrap();
        assert!(is_final(&p, &end));
        assert_eq!(end.regs[1][0], 5);
        // Action labels carry no values, so the swapped order also replays,
        // but it reaches a different final state (the load saw 0).
        let other = replay(&p, &[a1, a0]).unwrap();
        assert_eq!(other.regs[1][0], 0);
        // A thread id with no pending statement fails to replay.
        assert!(replay(&p, &[a0, a0]).is_err());
    }
}
