//! The MiniConc program model.
//!
//! A program is a set of straight-line methods plus a list of thread
//! declarations. Because there is no branching, every thread's sequence of
//! events is fixed by the source; only the interleaving between threads
//! varies. That per-thread sequence (the *program order*) is expanded once at
//! construction time and shared by the replay engine, the feasibility check
//! and the trace parser.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Name of the implicit thread that runs the `main` method.
pub const MAIN_THREAD: &str = "main";

/// Identifies one statement in the source: the method it belongs to (index
/// into [`ProgramModel::methods`]) and its position within that body.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StatementRef {
    pub method: usize,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "camelCase")]
pub enum Expression {
    IntLiteral(i64),
    LocalRef(String),
    SharedRef(String),
    /// Text literal followed by a local; only valid as a print argument.
    Concat(String, String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum StatementKind {
    SharedInit {
        vars: Vec<(String, i64)>,
    },
    ThreadDecl {
        thread: String,
    },
    SpawnStart {
        thread: String,
    },
    LocalDecl {
        local: String,
        expr: Expression,
    },
    AssignLocal {
        local: String,
        expr: Expression,
    },
    IncShared {
        var: String,
    },
    DecShared {
        var: String,
    },
    CallVoid {
        callee: usize,
    },
    /// `declares` is true for `local x = f()`, false for `x = f()`.
    CallAssign {
        local: String,
        callee: usize,
        declares: bool,
    },
    Print {
        expr: Expression,
    },
    ReturnExpr {
        expr: Expression,
    },
}

impl StatementKind {
    pub fn callee(&self) -> Option<usize> {
        match self {
            StatementKind::CallVoid { callee } | StatementKind::CallAssign { callee, .. } => {
                Some(*callee)
            }
            _ => None,
        }
    }

    /// Shared variables this statement writes.
    pub fn writes(&self) -> Vec<&str> {
        match self {
            StatementKind::SharedInit { vars } => vars.iter().map(|(n, _)| n.as_str()).collect(),
            StatementKind::IncShared { var } | StatementKind::DecShared { var } => vec![var],
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub kind: StatementKind,
    /// Text shown for this statement in traces.
    pub display: Arc<str>,
    /// 1-based line in the program source.
    pub line: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Method {
    pub name: String,
    pub returns_value: bool,
    pub body: Vec<Statement>,
    pub line: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedVar {
    pub name: String,
    pub init: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreadDecl {
    pub name: String,
    pub entry: usize,
}

/// One event of a thread's program order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaticEvent {
    pub statement: StatementRef,
    /// Call depth below the thread's root method (0 = directly in it).
    pub depth: usize,
    /// Ordinal of the enclosing call event within the same thread.
    pub parent: Option<usize>,
}

/// A validated MiniConc program. Construct with [`crate::parse_program`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramModel {
    pub name: String,
    pub shared_vars: Vec<SharedVar>,
    pub methods: Vec<Method>,
    pub main_method: usize,
    pub threads: Vec<ThreadDecl>,
    /// Program order per thread; index 0 is main, then `threads` in order.
    orders: Vec<Vec<StaticEvent>>,
    /// For each declared thread (index 1..), the main ordinal of its start.
    spawn_ordinals: Vec<usize>,
}

impl ProgramModel {
    pub(crate) fn assemble(
        name: String,
        shared_vars: Vec<SharedVar>,
        methods: Vec<Method>,
        main_method: usize,
        threads: Vec<ThreadDecl>,
    ) -> Self {
        let mut program = ProgramModel {
            name,
            shared_vars,
            methods,
            main_method,
            threads,
            orders: Vec::new(),
            spawn_ordinals: Vec::new(),
        };
        let mut orders = vec![program.expand(program.main_method)];
        for decl in &program.threads {
            orders.push(program.expand(decl.entry));
        }
        let mut spawn_ordinals = vec![0; program.threads.len() + 1];
        for (ordinal, ev) in orders[0].iter().enumerate() {
            if let StatementKind::SpawnStart { thread } = &program.statement(ev.statement).kind {
                if let Some(ix) = program.thread_index(thread) {
                    spawn_ordinals[ix] = ordinal;
                }
            }
        }
        program.orders = orders;
        program.spawn_ordinals = spawn_ordinals;
        program
    }

    fn expand(&self, root: usize) -> Vec<StaticEvent> {
        fn walk(
            p: &ProgramModel,
            method: usize,
            depth: usize,
            parent: Option<usize>,
            out: &mut Vec<StaticEvent>,
        ) {
            for (index, stmt) in p.methods[method].body.iter().enumerate() {
                let ordinal = out.len();
                out.push(StaticEvent {
                    statement: StatementRef { method, index },
                    depth,
                    parent,
                });
                if let Some(callee) = stmt.kind.callee() {
                    walk(p, callee, depth + 1, Some(ordinal), out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, root, 0, None, &mut out);
        out
    }

    pub fn statement(&self, r: StatementRef) -> &Statement {
        &self.methods[r.method].body[r.index]
    }

    pub fn method_index(&self, name: &str) -> Option<usize> {
        self.methods.iter().position(|m| m.name == name)
    }

    /// Thread names in column order: `main`, then declared threads.
    pub fn thread_names(&self) -> Vec<&str> {
        std::iter::once(MAIN_THREAD)
            .chain(self.threads.iter().map(|t| t.name.as_str()))
            .collect()
    }

    pub fn thread_count(&self) -> usize {
        self.threads.len() + 1
    }

    pub fn thread_index(&self, name: &str) -> Option<usize> {
        if name == MAIN_THREAD {
            Some(0)
        } else {
            self.threads
                .iter()
                .position(|t| t.name == name)
                .map(|i| i + 1)
        }
    }

    pub fn thread_name(&self, index: usize) -> &str {
        if index == 0 {
            MAIN_THREAD
        } else {
            &self.threads[index - 1].name
        }
    }

    /// Root method executed by a thread.
    pub fn entry_method(&self, thread: usize) -> usize {
        if thread == 0 {
            self.main_method
        } else {
            self.threads[thread - 1].entry
        }
    }

    /// The fixed event sequence of one thread.
    pub fn program_order(&self, thread: usize) -> &[StaticEvent] {
        &self.orders[thread]
    }

    /// Main-thread ordinal of the event that starts `thread` (`thread >= 1`).
    pub fn spawn_ordinal(&self, thread: usize) -> Option<usize> {
        (thread >= 1 && thread < self.spawn_ordinals.len()).then(|| self.spawn_ordinals[thread])
    }

    /// Thread started by the main event at `ordinal`, if that event is a start.
    pub fn spawned_by(&self, main_ordinal: usize) -> Option<usize> {
        (1..self.spawn_ordinals.len()).find(|&t| self.spawn_ordinals[t] == main_ordinal)
    }

    /// Total events of one complete execution.
    pub fn event_count(&self) -> usize {
        self.orders.iter().map(Vec::len).sum()
    }

    /// Maps each display text of a thread to the ordinals carrying it, in
    /// program order.
    pub fn display_index(&self, thread: usize) -> HashMap<&str, Vec<usize>> {
        let mut index: HashMap<&str, Vec<usize>> = HashMap::new();
        for (ordinal, ev) in self.orders[thread].iter().enumerate() {
            index
                .entry(&*self.statement(ev.statement).display)
                .or_default()
                .push(ordinal);
        }
        index
    }
}
