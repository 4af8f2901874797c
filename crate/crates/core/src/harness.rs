//! Benchmark-client generation and experiment execution.
//!
//! Clients are small multi-threaded tests of model data structures built from
//! the mini language: each thread issues a short sequence of method calls,
//! records every return value, and the admitted outcome set is precomputed by
//! enumerating sequential (method-atomic) executions. Buggy variants remove
//! the lock/unlock pair of selected invocations, which makes lost updates
//! observable as outcomes outside the admitted set.

use std::sync::Mutex;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::explore::{Algorithm, ExploreError, ExploreMode, Verdict, explore};
use crate::expr::Expr;
use crate::oracle::{self, OracleError};
use crate::program::{ObjectDecl, Program, Statement, Thread};
use crate::strategy::{SplitMix64, StrategyConfig};

/// The model data structures a client can exercise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Structure {
    /// Set with one global lock guarding per-key presence cells.
    CoarseLockSet,
    /// Set with one lock per key.
    FineLockList,
    /// Lock-free set: one compare-and-swap per operation.
    CasSet,
    /// Map with one global lock guarding per-key value cells.
    LockedMap,
    /// Capacity-one queue manipulated with compare-and-swap chains.
    CasQueue,
}

impl Structure {
    pub fn label(&self) -> &'static str {
        match self {
            Structure::CoarseLockSet => "coarse-lock-set",
            Structure::FineLockList => "fine-lock-list",
            Structure::CasSet => "cas-set",
            Structure::LockedMap => "locked-map",
            Structure::CasQueue => "cas-queue",
        }
    }

    pub fn uses_locks(&self) -> bool {
        matches!(
            self,
            Structure::CoarseLockSet | Structure::FineLockList | Structure::LockedMap
        )
    }
}

impl std::str::FromStr for Structure {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "coarse-lock-set" => Ok(Structure::CoarseLockSet),
            "fine-lock-list" => Ok(Structure::FineLockList),
            "cas-set" => Ok(Structure::CasSet),
            "locked-map" => Ok(Structure::LockedMap),
            "cas-queue" => Ok(Structure::CasQueue),
            other => Err(format!("unknown structure {other:?}")),
        }
    }
}

/// How many method invocations skip their lock/unlock pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BugClass {
    None,
    All,
    Half,
    Single,
}

impl BugClass {
    pub fn label(&self) -> &'static str {
        match self {
            BugClass::None => "none",
            BugClass::All => "all",
            BugClass::Half => "half",
            BugClass::Single => "single",
        }
    }
}

impl std::str::FromStr for BugClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(BugClass::None),
            "all" => Ok(BugClass::All),
            "half" => Ok(BugClass::Half),
            "single" => Ok(BugClass::Single),
            other => Err(format!("unknown bug class {other:?}")),
        }
    }
}

/// Parameters of one generated client.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientSpec {
    pub structure: Structure,
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default = "default_calls")]
    pub calls: usize,
    #[serde(default = "default_keys")]
    pub keys: usize,
    #[serde(default = "default_bug")]
    pub bug: BugClass,
    pub seed: u64,
}

fn default_threads() -> usize {
    3
}
fn default_calls() -> usize {
    2
}
fn default_keys() -> usize {
    2
}
fn default_bug() -> BugClass {
    BugClass::None
}

impl ClientSpec {
    pub fn name(&self) -> String {
        format!(
            "{}-t{}c{}k{}-{}-s{}",
            self.structure.label(),
            self.threads,
            self.calls,
            self.keys,
            self.bug.label(),
            self.seed
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("client spec invalid: {0}")]
    BadSpec(String),
    #[error("bug injection needs a lock-based structure, got {0}")]
    BugNeedsLocks(&'static str),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Explore(#[from] ExploreError),
}

/// One method invocation in a client.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Call {
    Add { key: usize },
    Remove { key: usize },
    Contains { key: usize },
    Put { key: usize, value: i64 },
    Get { key: usize },
    Offer { value: i64 },
    Poll,
}

/// Deterministically generate a client program for `spec`: seeded call
/// sequences over the key range, a record of every return value, lock pairs
/// skipped on bug-selected invocations, and the admitted outcome set computed
/// from sequential executions.
pub fn generate_client(spec: &ClientSpec) -> Result<Program, HarnessError> {
    if spec.threads < 1 || spec.calls < 1 || spec.keys < 1 {
        return Err(HarnessError::BadSpec(format!("{spec:?}")));
    }
    if spec.calls > 5 {
        return Err(HarnessError::BadSpec(format!(
            "calls-per-thread capped at 5, got {}",
            spec.calls
        )));
    }
    if spec.bug != BugClass::None {
        if !spec.structure.uses_locks() {
            return Err(HarnessError::BugNeedsLocks(spec.structure.label()));
        }
        if spec.threads < 2 {
            return Err(HarnessError::BadSpec(
                "bug injection needs at least two threads".into(),
            ));
        }
    }

    let mut rng = SplitMix64(spec.seed.wrapping_mul(0x2545f4914f6cdd1d).wrapping_add(11));
    let mut calls: Vec<Vec<Call>> = (0..spec.threads)
        .map(|_| (0..spec.calls).map(|_| draw_call(spec, &mut rng)).collect())
        .collect();

    // Plant a guaranteed-observable race for buggy variants: two adds (or
    // puts) on key 0 in the first two threads, and no removes of key 0
    // anywhere else (a remove between the two adds would make the lost-update
    // outcome sequentially admissible).
    if spec.bug != BugClass::None {
        let planted = match spec.structure {
            Structure::LockedMap => Call::Put { key: 0, value: 1 },
            _ => Call::Add { key: 0 },
        };
        let read_back = match spec.structure {
            Structure::LockedMap => Call::Get { key: 0 },
            _ => Call::Contains { key: 0 },
        };
        calls[0][0] = planted;
        calls[1][0] = planted;
        for body in calls.iter_mut() {
            for c in body.iter_mut() {
                if matches!(c, Call::Remove { key: 0 }) {
                    *c = read_back;
                }
            }
        }
        calls[0][0] = planted;
        calls[1][0] = planted;
    }

    let buggy = |global_idx: usize, total: usize| -> bool {
        match spec.bug {
            BugClass::None => false,
            BugClass::All => true,
            BugClass::Half => global_idx.is_multiple_of(2),
            // Deterministically the planted invocation, so precisely one
            // invocation is unprotected.
            BugClass::Single => {
                let _ = total;
                global_idx == 0
            }
        }
    };

    let objects = structure_objects(spec);
    let mut threads = Vec::with_capacity(spec.threads);
    let total = spec.threads * spec.calls;
    for (tid, body_calls) in calls.iter().enumerate() {
        let mut body = Vec::new();
        let mut blocks = Vec::new();
        for (cix, call) in body_calls.iter().enumerate() {
            let global = tid * spec.calls + cix;
            let stmts = lower_call(spec, *call, buggy(global, total));
            blocks.push(stmts.len());
            body.extend(stmts);
        }
        threads.push(Thread {
            body,
            blocks: Some(blocks),
        });
    }

    let mut program =
        Program::assemble(objects, threads, None).expect("generated clients are well-formed");
    let admitted = oracle::sequential_outcomes(&program, oracle::DEFAULT_BUDGET)?;
    program.set_spec(admitted);
    Ok(program)
}

fn draw_call(spec: &ClientSpec, rng: &mut SplitMix64) -> Call {
    let key = rng.below(spec.keys as u64) as usize;
    match spec.structure {
        Structure::CoarseLockSet | Structure::FineLockList | Structure::CasSet => {
            match rng.below(3) {
                0 => Call::Add { key },
                1 => Call::Remove { key },
                _ => Call::Contains { key },
            }
        }
        Structure::LockedMap => match rng.below(3) {
            0 => Call::Put {
                key,
                value: 1 + rng.below(2) as i64,
            },
            1 => Call::Get { key },
            _ => Call::Remove { key },
        },
        Structure::CasQueue => match rng.below(2) {
            0 => Call::Offer {
                value: 1 + rng.below(2) as i64,
            },
            _ => Call::Poll,
        },
    }
}

/// Object layout per structure. Indices follow sorted object-name order, so
/// names are chosen to sort predictably: per-key cells `e0..`, lock names
/// prefixed with `m`, queue slot `q`, map values `v0..`.
fn structure_objects(spec: &ClientSpec) -> Vec<ObjectDecl> {
    let mut objects = Vec::new();
    let cell = |prefix: &str, k: usize| ObjectDecl {
        name: format!("{prefix}{k}"),
        init: 0,
    };
    match spec.structure {
        Structure::CoarseLockSet => {
            for k in 0..spec.keys {
                objects.push(cell("e", k));
            }
            objects.push(ObjectDecl {
                name: "m".into(),
                init: 0,
            });
        }
        Structure::FineLockList => {
            for k in 0..spec.keys {
                objects.push(cell("e", k));
            }
            for k in 0..spec.keys {
                objects.push(cell("m", k));
            }
        }
        Structure::CasSet => {
            for k in 0..spec.keys {
                objects.push(cell("e", k));
            }
        }
        Structure::LockedMap => {
            objects.push(ObjectDecl {
                name: "m".into(),
                init: 0,
            });
            for k in 0..spec.keys {
                objects.push(cell("v", k));
            }
        }
        Structure::CasQueue => {
            objects.push(ObjectDecl {
                name: "q".into(),
                init: 0,
            });
        }
    }
    objects.sort_by(|a, b| a.name.cmp(&b.name));
    objects
}

fn object_index(spec: &ClientSpec, name: &str) -> usize {
    structure_objects(spec)
        .iter()
        .position(|o| o.name == name)
        .expect("object declared for this structure")
}

fn lit(v: i64) -> Expr {
    Expr::Lit(v)
}

/// Statement sequence for one invocation. Every method records exactly one
/// return value so outcome tuples have a fixed shape per client.
fn lower_call(spec: &ClientSpec, call: Call, skip_locks: bool) -> Vec<Statement> {
    use Statement::{Cas, Load, Local, Lock, Record, Store, Unlock};
    let mut out = Vec::new();
    let lock_of = |key: usize| -> usize {
        match spec.structure {
            Structure::FineLockList => object_index(spec, &format!("m{key}")),
            _ => object_index(spec, "m"),
        }
    };
    let guarded = |out: &mut Vec<Statement>, key: usize, body: &[Statement]| {
        let m = lock_of(key);
        if !skip_locks {
            out.push(Lock { obj: m });
        }
        out.extend_from_slice(body);
        if !skip_locks {
            out.push(Unlock { obj: m });
        }
        out.push(Record { reg: 0 });
    };
    match (spec.structure, call) {
        (Structure::CasSet, Call::Add { key }) => {
            let e = object_index(spec, &format!("e{key}"));
            out.push(Cas {
                obj: e,
                expect: lit(0),
                new: lit(1),
                reg: 0,
            });
            out.push(Record { reg: 0 });
        }
        (Structure::CasSet, Call::Remove { key }) => {
            let e = object_index(spec, &format!("e{key}"));
            out.push(Cas {
                obj: e,
                expect: lit(1),
                new: lit(0),
                reg: 0,
            });
            out.push(Record { reg: 0 });
        }
        (Structure::CasSet, Call::Contains { key }) => {
            let e = object_index(spec, &format!("e{key}"));
            out.push(Load { reg: 0, obj: e });
            out.push(Record { reg: 0 });
        }
        (Structure::CoarseLockSet | Structure::FineLockList, Call::Add { key }) => {
            let e = object_index(spec, &format!("e{key}"));
            guarded(
                &mut out,
                key,
                &[
                    Load { reg: 0, obj: e },
                    Store {
                        obj: e,
                        expr: lit(1),
                    },
                ],
            );
        }
        (Structure::CoarseLockSet | Structure::FineLockList, Call::Remove { key }) => {
            let e = object_index(spec, &format!("e{key}"));
            guarded(
                &mut out,
                key,
                &[
                    Load { reg: 0, obj: e },
                    Store {
                        obj: e,
                        expr: lit(0),
                    },
                ],
            );
        }
        (Structure::CoarseLockSet | Structure::FineLockList, Call::Contains { key }) => {
            let e = object_index(spec, &format!("e{key}"));
            guarded(&mut out, key, &[Load { reg: 0, obj: e }]);
        }
        (Structure::LockedMap, Call::Put { key, value }) => {
            let v = object_index(spec, &format!("v{key}"));
            guarded(
                &mut out,
                key,
                &[
                    Load { reg: 0, obj: v },
                    Store {
                        obj: v,
                        expr: lit(value),
                    },
                ],
            );
        }
        (Structure::LockedMap, Call::Get { key }) => {
            let v = object_index(spec, &format!("v{key}"));
            guarded(&mut out, key, &[Load { reg: 0, obj: v }]);
        }
        (Structure::LockedMap, Call::Remove { key }) => {
            let v = object_index(spec, &format!("v{key}"));
            guarded(
                &mut out,
                key,
                &[
                    Load { reg: 0, obj: v },
                    Store {
                        obj: v,
                        expr: lit(0),
                    },
                ],
            );
        }
        (Structure::CasQueue, Call::Offer { value }) => {
            let q = object_index(spec, "q");
            out.push(Cas {
                obj: q,
                expect: lit(0),
                new: lit(value),
                reg: 0,
            });
            out.push(Record { reg: 0 });
        }
        (Structure::CasQueue, Call::Poll) => {
            let q = object_index(spec, "q");
            // Try to remove value 1, then value 2; the second attempt is
            // disabled (impossible expect) once the first succeeded, so the
            // poll removes at most one element. Returns the value or 0.
            out.push(Cas {
                obj: q,
                expect: lit(1),
                new: lit(0),
                reg: 1,
            });
            out.push(Cas {
                obj: q,
                expect: Expr::parse("2+98*r1").expect("constant expression"),
                new: lit(0),
                reg: 2,
            });
            out.push(Local {
                reg: 3,
                expr: Expr::parse("r1+2*r2").expect("constant expression"),
            });
            out.push(Record { reg: 3 });
        }
        (s, c) => unreachable!("call {c:?} not generated for {s:?}"),
    }
    out
}

// ---------------------------------------------------------------------------
// Experiment matrix
// ---------------------------------------------------------------------------

/// One exploration configuration of the matrix.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub strategy: StrategyConfig,
    pub mode: ExploreMode,
    pub timeout: Duration,
    pub oracle_check: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            algorithm: Algorithm::Spor,
            strategy: StrategyConfig::Sequential(Vec::new()),
            mode: ExploreMode::Exhaustive,
            timeout: Duration::from_secs(60),
            oracle_check: false,
        }
    }
}

/// One result row of the report.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub program: String,
    pub algorithm: String,
    pub strategy: String,
    pub seed: Option<u64>,
    pub mode: String,
    pub states: Option<usize>,
    pub transitions: Option<usize>,
    pub retraversed: Option<usize>,
    pub classes: Option<usize>,
    pub time_ms: u128,
    pub verdict: String,
    pub oracle: Option<String>,
}

/// Report rows ordered by (algorithm, time ascending), the quantile-plot
/// convention; timeouts sort last within their algorithm.
#[derive(Debug, Clone, Serialize)]
pub struct ReportTable {
    pub rows: Vec<Row>,
}

pub const CSV_HEADER: &str = "program,algorithm,strategy,seed,mode,states,transitions,retraversed,classes,time_ms,verdict,oracle";

/// Quote a CSV field when it contains a delimiter, quote, or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ReportTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let opt = |v: &Option<usize>| v.map_or(String::new(), |x| x.to_string());
            let fields = [
                csv_field(&r.program),
                r.algorithm.clone(),
                csv_field(&r.strategy),
                r.seed.map_or(String::new(), |s| s.to_string()),
                r.mode.clone(),
                opt(&r.states),
                opt(&r.transitions),
                opt(&r.retraversed),
                opt(&r.classes),
                r.time_ms.to_string(),
                r.verdict.clone(),
                r.oracle.clone().unwrap_or_default(),
            ];
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.rows).expect("rows always serialize")
    }
}

fn mode_label(mode: ExploreMode) -> &'static str {
    match mode {
        ExploreMode::Exhaustive => "exhaustive",
        ExploreMode::UntilFirstError => "first-error",
    }
}

/// Run every (program x config) pair on a pool of `jobs` workers. Individual
/// failures become rows; the matrix itself never aborts.
pub fn run_matrix(
    programs: &[(String, Program)],
    configs: &[RunConfig],
    jobs: usize,
) -> ReportTable {
    let tasks: Vec<(usize, usize)> = (0..programs.len())
        .flat_map(|p| (0..configs.len()).map(move |c| (p, c)))
        .collect();
    let jobs = jobs.max(1);
    let cursor = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Row)>> = Mutex::new(Vec::with_capacity(tasks.len()));

    std::thread::scope(|scope| {
        for _ in 0..jobs.min(tasks.len().max(1)) {
            scope.spawn(|| {
                loop {
                    let i = cursor.fetch_add(1, Ordering::Relaxed);
                    let Some(&(pix, cix)) = tasks.get(i) else {
                        break;
                    };
                    let (name, program) = &programs[pix];
                    let row = run_one(name, program, &configs[cix]);
                    results.lock().expect("no poisoned workers").push((i, row));
                }
            });
        }
    });

    let mut rows: Vec<(usize, Row)> = results.into_inner().expect("workers finished");
    rows.sort_by_key(|(i, _)| *i);
    let mut rows: Vec<Row> = rows.into_iter().map(|(_, r)| r).collect();
    rows.sort_by(|a, b| {
        a.algorithm
            .cmp(&b.algorithm)
            .then(a.time_ms.cmp(&b.time_ms))
            .then(a.program.cmp(&b.program))
    });
    ReportTable { rows }
}

fn run_one(name: &str, program: &Program, cfg: &RunConfig) -> Row {
    let started = Instant::now();
    let deadline = Some(started + cfg.timeout);
    let mut row = Row {
        program: name.to_string(),
        algorithm: cfg.algorithm.label().to_string(),
        strategy: match &cfg.strategy {
            StrategyConfig::Sequential(_) => cfg.strategy.to_string(),
            StrategyConfig::Random { .. } => "rand".to_string(),
        },
        seed: cfg.strategy.seed(),
        mode: mode_label(cfg.mode).to_string(),
        states: None,
        transitions: None,
        retraversed: None,
        classes: None,
        time_ms: 0,
        verdict: String::new(),
        oracle: None,
    };
    match explore(program, cfg.algorithm, &cfg.strategy, cfg.mode, deadline) {
        Err(ExploreError::Timeout(elapsed)) => {
            row.time_ms = elapsed.as_millis();
            row.verdict = "dnf".into();
        }
        Err(e) => {
            row.time_ms = started.elapsed().as_millis();
            row.verdict = format!("error:{e}");
        }
        Ok(out) => {
            row.time_ms = out.metrics.wall_time.as_millis();
            row.states = Some(out.metrics.states);
            row.transitions = Some(out.metrics.transitions);
            row.retraversed = Some(out.metrics.retraversed_transitions);
            row.verdict = out.verdict.label().to_string();
            if cfg.oracle_check && matches!(out.verdict, Verdict::Exhausted) {
                match oracle::check_soundness(program, &out, name, oracle::DEFAULT_BUDGET) {
                    Ok(report) => {
                        row.classes = Some(report.reduced_classes);
                        row.oracle = Some(if report.pass { "pass" } else { "fail" }.into());
                    }
                    Err(e) => {
                        row.oracle = Some(format!("error:{e}"));
                    }
                }
            }
        }
    }
    row
}

/// A small mixed set of client specs for `bench --corpus builtin`.
pub fn builtin_client_specs() -> Vec<ClientSpec> {
    let mut specs = Vec::new();
    for (structure, seed) in [
        (Structure::CoarseLockSet, 1),
        (Structure::CoarseLockSet, 2),
        (Structure::FineLockList, 3),
        (Structure::FineLockList, 4),
        (Structure::CasSet, 5),
        (Structure::CasSet, 6),
        (Structure::LockedMap, 7),
        (Structure::CasQueue, 8),
    ] {
        specs.push(ClientSpec {
            structure,
            threads: 3,
            calls: 2,
            keys: 2,
            bug: BugClass::None,
            seed,
        });
    }
    for (bug, seed) in [
        (BugClass::All, 21),
        (BugClass::Half, 22),
        (BugClass::Single, 23),
    ] {
        specs.push(ClientSpec {
            structure: Structure::CoarseLockSet,
            threads: 3,
            calls: 2,
            keys: 2,
            bug,
            seed,
        });
    }
    specs
}
