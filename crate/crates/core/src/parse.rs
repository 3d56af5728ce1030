//! Parser and validator for MiniConc source text.
//!
//! The grammar is line oriented; `docs/miniconc.md` has the full EBNF. Each
//! statement line may carry a `| display text` suffix which replaces the
//! statement's trace text; without it the trimmed line itself is used.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use thiserror::Error;

use crate::program::{
    Expression, Method, ProgramModel, SharedVar, Statement, StatementKind, ThreadDecl, MAIN_THREAD,
};

const KEYWORDS: &[&str] = &[
    "program", "method", "returns", "shared", "local", "thread", "runs", "start", "print", "return",
];

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unresolved {what} `{name}`")]
    Unresolved { what: &'static str, name: String },
    #[error("duplicate {what} `{name}`")]
    Duplicate { what: &'static str, name: String },
    #[error("{0}")]
    Invalid(String),
}

fn err(line: u32, column: u32, kind: ParseErrorKind) -> ParseError {
    ParseError { line, column, kind }
}

fn syntax(line: u32, column: u32, msg: impl Into<String>) -> ParseError {
    err(line, column, ParseErrorKind::Syntax(msg.into()))
}

/// A name together with its 1-based source column.
#[derive(Clone, Debug)]
struct Spanned {
    name: String,
    column: u32,
}

#[derive(Clone, Debug)]
enum RawExpr {
    Int(i64),
    Name(Spanned),
}

#[derive(Clone, Debug)]
enum RawRhs {
    Call(Spanned),
    Expr(RawExpr),
}

#[derive(Clone, Debug)]
enum RawKind {
    SharedInit(Vec<(Spanned, i64)>),
    ThreadDecl { thread: Spanned, entry: Spanned },
    Spawn(Spanned),
    Local { local: Spanned, rhs: RawRhs },
    Assign { local: Spanned, rhs: RawRhs },
    Inc(Spanned),
    Dec(Spanned),
    Call(Spanned),
    Print { text: String, local: Spanned },
    Return(RawExpr),
}

#[derive(Clone, Debug)]
struct RawStatement {
    kind: RawKind,
    display: String,
    line: u32,
    column: u32,
}

#[derive(Clone, Debug)]
struct RawMethod {
    name: Spanned,
    returns_value: bool,
    line: u32,
    body: Vec<RawStatement>,
}

/// Character cursor over one source line that tracks 1-based columns.
struct Cursor<'a> {
    text: &'a str,
    pos: usize,
    line: u32,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str, line: u32) -> Self {
        Cursor { text, pos: 0, line }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn column(&self) -> u32 {
        self.text[..self.pos].chars().count() as u32 + 1
    }

    fn skip_ws(&mut self) {
        let rest = self.rest();
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.rest().is_empty()
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        syntax(self.line, self.column(), msg)
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), ParseError> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{token}`")))
        }
    }

    fn word(&mut self, extra: impl Fn(char) -> bool) -> Option<Spanned> {
        self.skip_ws();
        let column = self.column();
        let rest = self.rest();
        let mut chars = rest.char_indices();
        match chars.next() {
            Some((_, c)) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return None,
        }
        let end = chars
            .find(|&(_, c)| !(c.is_ascii_alphanumeric() || c == '_' || extra(c)))
            .map_or(rest.len(), |(i, _)| i);
        self.pos += end;
        Some(Spanned {
            name: rest[..end].to_string(),
            column,
        })
    }

    fn ident(&mut self) -> Option<Spanned> {
        self.word(|_| false)
    }

    fn expect_ident(&mut self, what: &str) -> Result<Spanned, ParseError> {
        let checkpoint = self.pos;
        match self.ident() {
            Some(s) if KEYWORDS.contains(&s.name.as_str()) => {
                self.pos = checkpoint;
                self.skip_ws();
                Err(self.error(format!("keyword `{}` cannot be used as {what}", s.name)))
            }
            Some(s) => Ok(s),
            None => Err(self.error(format!("expected {what}"))),
        }
    }

    fn expect_thread_name(&mut self) -> Result<Spanned, ParseError> {
        self.word(|c| c == '-')
            .ok_or_else(|| self.error("expected thread name"))
    }

    fn int(&mut self) -> Option<Result<i64, ParseError>> {
        self.skip_ws();
        let rest = self.rest();
        let digits_from = usize::from(rest.starts_with('-'));
        let len = rest[digits_from..]
            .find(|c: char| !c.is_ascii_digit())
            .unwrap_or(rest.len() - digits_from);
        if len == 0 {
            return None;
        }
        let column = self.column();
        let text = &rest[..digits_from + len];
        self.pos += text.len();
        Some(
            text.parse()
                .map_err(|_| syntax(self.line, column, format!("integer `{text}` out of range"))),
        )
    }

    fn expect_int(&mut self) -> Result<i64, ParseError> {
        self.int()
            .unwrap_or_else(|| Err(self.error("expected integer literal")))
    }

    fn expect_string(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        if self.peek() != Some('"') {
            return Err(self.error("expected string literal"));
        }
        let start_col = self.column();
        let mut out = String::new();
        let mut chars = self.rest().char_indices().skip(1);
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => {
                    self.pos += i + 1;
                    return Ok(out);
                }
                '\\' => match chars.next() {
                    Some((_, 'n')) => out.push('\n'),
                    Some((_, 't')) => out.push('\t'),
                    Some((_, other)) => out.push(other),
                    None => break,
                },
                _ => out.push(c),
            }
        }
        Err(syntax(self.line, start_col, "unterminated string literal"))
    }

    /// `[receiver .] name ( )`, already positioned after the first word.
    fn call_tail(&mut self, first: Spanned) -> Result<Option<Spanned>, ParseError> {
        let callee = if self.eat(".") {
            self.expect_ident("method name")?
        } else {
            first
        };
        if self.eat("(") {
            self.expect(")")?;
            Ok(Some(callee))
        } else {
            Ok(None)
        }
    }

    fn expr(&mut self) -> Result<RawExpr, ParseError> {
        if let Some(value) = self.int() {
            return value.map(RawExpr::Int);
        }
        Ok(RawExpr::Name(self.expect_ident("expression")?))
    }

    fn rhs(&mut self) -> Result<RawRhs, ParseError> {
        if let Some(value) = self.int() {
            return value.map(|v| RawRhs::Expr(RawExpr::Int(v)));
        }
        let first = self.expect_ident("expression")?;
        let checkpoint = self.pos;
        self.skip_ws();
        if matches!(self.peek(), Some('.') | Some('(')) {
            if let Some(callee) = self.call_tail(first.clone())? {
                return Ok(RawRhs::Call(callee));
            }
            return Err(self.error("expected `()` after method name"));
        }
        self.pos = checkpoint;
        Ok(RawRhs::Expr(RawExpr::Name(first)))
    }
}

/// Splits a statement line at the first `|` that is not inside a string
/// literal.
fn split_display(line: &str) -> (&str, Option<&str>) {
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
        } else if c == '"' {
            in_string = true;
        } else if c == '|' {
            return (&line[..i], Some(&line[i + 1..]));
        }
    }
    (line, None)
}

fn parse_statement(raw_line: &str, line: u32) -> Result<RawStatement, ParseError> {
    let (code, display) = split_display(raw_line);
    let display = match display {
        Some(d) => {
            let d = d.trim();
            if d.is_empty() {
                let column = raw_line
                    .find('|')
                    .map_or(1, |i| raw_line[..i].chars().count() + 1);
                return Err(syntax(line, column as u32, "empty display text after `|`"));
            }
            d.to_string()
        }
        None => raw_line.trim().to_string(),
    };
    let mut cur = Cursor::new(code, line);
    cur.skip_ws();
    let column = cur.column();
    let first = cur
        .ident()
        .ok_or_else(|| cur.error("expected a statement"))?;
    let kind = match first.name.as_str() {
        "shared" => {
            let mut vars = Vec::new();
            loop {
                let name = cur.expect_ident("shared variable name")?;
                cur.expect("=")?;
                vars.push((name, cur.expect_int()?));
                if !cur.eat(",") {
                    break;
                }
            }
            RawKind::SharedInit(vars)
        }
        "thread" => {
            let thread = cur.expect_thread_name()?;
            match cur.ident() {
                Some(w) if w.name == "runs" => {}
                _ => return Err(cur.error("expected `runs`")),
            }
            let entry = cur.expect_ident("method name")?;
            RawKind::ThreadDecl { thread, entry }
        }
        "start" => RawKind::Spawn(cur.expect_thread_name()?),
        "local" => {
            let local = cur.expect_ident("local name")?;
            cur.expect("=")?;
            RawKind::Local {
                local,
                rhs: cur.rhs()?,
            }
        }
        "print" => {
            let text = cur.expect_string()?;
            cur.expect("+")?;
            let local = cur.expect_ident("local name")?;
            RawKind::Print { text, local }
        }
        "return" => RawKind::Return(cur.expr()?),
        w if KEYWORDS.contains(&w) => {
            return Err(syntax(line, column, format!("unexpected keyword `{w}`")));
        }
        _ => {
            if cur.eat("++") {
                RawKind::Inc(first)
            } else if cur.eat("--") {
                RawKind::Dec(first)
            } else if cur.eat("=") {
                RawKind::Assign {
                    local: first,
                    rhs: cur.rhs()?,
                }
            } else if let Some(callee) = cur.call_tail(first)? {
                RawKind::Call(callee)
            } else {
                return Err(cur.error("expected `++`, `--`, `=` or a call"));
            }
        }
    };
    if !cur.at_end() {
        return Err(cur.error("unexpected trailing input"));
    }
    Ok(RawStatement {
        kind,
        display,
        line,
        column,
    })
}

fn is_comment_or_blank(trimmed: &str) -> bool {
    trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with("//")
}

fn leading_column(raw: &str) -> u32 {
    (raw.chars().count() - raw.trim_start().chars().count()) as u32 + 1
}

fn parse_structure(source: &str) -> Result<(String, Vec<RawMethod>), ParseError> {
    let mut name = None;
    let mut methods = Vec::new();
    let mut current: Option<RawMethod> = None;
    for (i, raw) in source.lines().enumerate() {
        let line = i as u32 + 1;
        let trimmed = raw.trim();
        if is_comment_or_blank(trimmed) {
            continue;
        }
        if let Some(method) = current.as_mut() {
            if trimmed == "}" {
                methods.push(current.take().unwrap());
            } else {
                method.body.push(parse_statement(raw, line)?);
            }
            continue;
        }
        let mut cur = Cursor::new(raw, line);
        match cur.ident() {
            Some(w) if w.name == "program" => {
                if name.is_some() {
                    return Err(syntax(line, w.column, "duplicate `program` header"));
                }
                let n = cur
                    .word(|c| c == '-')
                    .ok_or_else(|| cur.error("expected program name"))?;
                if !cur.at_end() {
                    return Err(cur.error("unexpected trailing input"));
                }
                name = Some(n.name);
            }
            Some(w) if w.name == "method" => {
                let method_name = cur.expect_ident("method name")?;
                let checkpoint = cur.pos;
                let returns_value = matches!(cur.ident(), Some(r) if r.name == "returns");
                if !returns_value {
                    cur.pos = checkpoint;
                }
                cur.expect("{")?;
                if !cur.at_end() {
                    return Err(cur.error("method body must start on the next line"));
                }
                current = Some(RawMethod {
                    name: method_name,
                    returns_value,
                    line,
                    body: Vec::new(),
                });
            }
            _ => {
                return Err(syntax(
                    line,
                    leading_column(raw),
                    "expected `program` or `method` at top level",
                ))
            }
        }
    }
    if let Some(open) = current {
        return Err(syntax(
            open.line,
            open.name.column,
            format!("method `{}` is not closed with `}}`", open.name.name),
        ));
    }
    Ok((name.unwrap_or_else(|| "program".to_string()), methods))
}

/// Parses and validates MiniConc source into a [`ProgramModel`].
pub fn parse_program(source: &str) -> Result<ProgramModel, ParseError> {
    let (name, raw_methods) = parse_structure(source)?;
    Resolver::new(&raw_methods)?.resolve(name)
}

struct Resolver<'a> {
    raw: &'a [RawMethod],
    method_ix: HashMap<&'a str, usize>,
    main: usize,
    shared: HashMap<&'a str, i64>,
}

impl<'a> Resolver<'a> {
    fn new(raw: &'a [RawMethod]) -> Result<Self, ParseError> {
        let mut method_ix = HashMap::new();
        for (i, m) in raw.iter().enumerate() {
            if method_ix.insert(m.name.name.as_str(), i).is_some() {
                return Err(err(
                    m.line,
                    m.name.column,
                    ParseErrorKind::Duplicate {
                        what: "method",
                        name: m.name.name.clone(),
                    },
                ));
            }
        }
        let main = *method_ix.get(MAIN_THREAD).ok_or_else(|| {
            err(
                1,
                1,
                ParseErrorKind::Invalid("program has no `main` method".into()),
            )
        })?;
        if raw[main].returns_value {
            return Err(err(
                raw[main].line,
                raw[main].name.column,
                ParseErrorKind::Invalid("`main` cannot return a value".into()),
            ));
        }
        // Shared variables are declared by initialisations in main.
        let mut shared = HashMap::new();
        for st in &raw[main].body {
            if let RawKind::SharedInit(vars) = &st.kind {
                for (var, init) in vars {
                    if shared.insert(var.name.as_str(), *init).is_some() {
                        return Err(err(
                            st.line,
                            var.column,
                            ParseErrorKind::Duplicate {
                                what: "shared variable",
                                name: var.name.clone(),
                            },
                        ));
                    }
                }
            }
        }
        Ok(Resolver {
            raw,
            method_ix,
            main,
            shared,
        })
    }

    fn method(&self, callee: &Spanned, line: u32) -> Result<usize, ParseError> {
        match self.method_ix.get(callee.name.as_str()) {
            Some(&ix) if ix == self.main => Err(err(
                line,
                callee.column,
                ParseErrorKind::Invalid("`main` cannot be called or used as a thread entry".into()),
            )),
            Some(&ix) => Ok(ix),
            None => Err(err(
                line,
                callee.column,
                ParseErrorKind::Unresolved {
                    what: "method",
                    name: callee.name.clone(),
                },
            )),
        }
    }

    fn shared_var(&self, var: &Spanned, line: u32) -> Result<String, ParseError> {
        if self.shared.contains_key(var.name.as_str()) {
            Ok(var.name.clone())
        } else {
            Err(err(
                line,
                var.column,
                ParseErrorKind::Unresolved {
                    what: "shared variable",
                    name: var.name.clone(),
                },
            ))
        }
    }

    fn expr(
        &self,
        expr: &RawExpr,
        locals: &HashSet<String>,
        line: u32,
    ) -> Result<Expression, ParseError> {
        Ok(match expr {
            RawExpr::Int(v) => Expression::IntLiteral(*v),
            RawExpr::Name(n) if locals.contains(&n.name) => Expression::LocalRef(n.name.clone()),
            RawExpr::Name(n) if self.shared.contains_key(n.name.as_str()) => {
                Expression::SharedRef(n.name.clone())
            }
            RawExpr::Name(n) => {
                return Err(err(
                    line,
                    n.column,
                    ParseErrorKind::Unresolved {
                        what: "variable",
                        name: n.name.clone(),
                    },
                ))
            }
        })
    }

    fn local(
        &self,
        local: &Spanned,
        locals: &HashSet<String>,
        line: u32,
    ) -> Result<String, ParseError> {
        if locals.contains(&local.name) {
            Ok(local.name.clone())
        } else {
            Err(err(
                line,
                local.column,
                ParseErrorKind::Unresolved {
                    what: "local",
                    name: local.name.clone(),
                },
            ))
        }
    }

    fn resolve(self, name: String) -> Result<ProgramModel, ParseError> {
        let mut methods = Vec::with_capacity(self.raw.len());
        let mut threads: Vec<ThreadDecl> = Vec::new();
        let mut started: HashSet<String> = HashSet::new();
        let mut shared_vars = Vec::new();

        for (mi, rm) in self.raw.iter().enumerate() {
            let in_main = mi == self.main;
            let mut locals: HashSet<String> = HashSet::new();
            let mut body = Vec::with_capacity(rm.body.len());
            for (si, st) in rm.body.iter().enumerate() {
                let line = st.line;
                let main_only = |what: &str| {
                    err(
                        line,
                        st.column,
                        ParseErrorKind::Invalid(format!("{what} is only allowed in `main`")),
                    )
                };
                let kind = match &st.kind {
                    RawKind::SharedInit(vars) => {
                        if !in_main {
                            return Err(main_only("shared initialisation"));
                        }
                        if !started.is_empty() {
                            return Err(err(
                                line,
                                st.column,
                                ParseErrorKind::Invalid(
                                    "shared variables must be initialised before any thread starts"
                                        .into(),
                                ),
                            ));
                        }
                        for (v, init) in vars {
                            shared_vars.push(SharedVar {
                                name: v.name.clone(),
                                init: *init,
                            });
                        }
                        StatementKind::SharedInit {
                            vars: vars.iter().map(|(v, i)| (v.name.clone(), *i)).collect(),
                        }
                    }
                    RawKind::ThreadDecl { thread, entry } => {
                        if !in_main {
                            return Err(main_only("thread declaration"));
                        }
                        if thread.name == MAIN_THREAD
                            || threads.iter().any(|t| t.name == thread.name)
                        {
                            return Err(err(
                                line,
                                thread.column,
                                ParseErrorKind::Duplicate {
                                    what: "thread",
                                    name: thread.name.clone(),
                                },
                            ));
                        }
                        threads.push(ThreadDecl {
                            name: thread.name.clone(),
                            entry: self.method(entry, line)?,
                        });
                        StatementKind::ThreadDecl {
                            thread: thread.name.clone(),
                        }
                    }
                    RawKind::Spawn(thread) => {
                        if !in_main {
                            return Err(main_only("thread start"));
                        }
                        if !threads.iter().any(|t| t.name == thread.name) {
                            return Err(err(
                                line,
                                thread.column,
                                ParseErrorKind::Unresolved {
                                    what: "thread",
                                    name: thread.name.clone(),
                                },
                            ));
                        }
                        if !started.insert(thread.name.clone()) {
                            return Err(err(
                                line,
                                thread.column,
                                ParseErrorKind::Invalid(format!(
                                    "thread `{}` is started twice",
                                    thread.name
                                )),
                            ));
                        }
                        StatementKind::SpawnStart {
                            thread: thread.name.clone(),
                        }
                    }
                    RawKind::Local { local, rhs } => {
                        if locals.contains(&local.name)
                            || self.shared.contains_key(local.name.as_str())
                        {
                            return Err(err(
                                line,
                                local.column,
                                ParseErrorKind::Duplicate {
                                    what: "variable",
                                    name: local.name.clone(),
                                },
                            ));
                        }
                        let kind = self.assignment(local.name.clone(), rhs, true, &locals, line)?;
                        locals.insert(local.name.clone());
                        kind
                    }
                    RawKind::Assign { local, rhs } => {
                        let name = self.local(local, &locals, line)?;
                        self.assignment(name, rhs, false, &locals, line)?
                    }
                    RawKind::Inc(var) => StatementKind::IncShared {
                        var: self.shared_var(var, line)?,
                    },
                    RawKind::Dec(var) => StatementKind::DecShared {
                        var: self.shared_var(var, line)?,
                    },
                    RawKind::Call(callee) => StatementKind::CallVoid {
                        callee: self.method(callee, line)?,
                    },
                    RawKind::Print { text, local } => StatementKind::Print {
                        expr: Expression::Concat(text.clone(), self.local(local, &locals, line)?),
                    },
                    RawKind::Return(expr) => {
                        if !rm.returns_value || si + 1 != rm.body.len() {
                            return Err(err(
                                line,
                                st.column,
                                ParseErrorKind::Invalid(
                                    "`return` must be the last statement of a `returns` method"
                                        .into(),
                                ),
                            ));
                        }
                        StatementKind::ReturnExpr {
                            expr: self.expr(expr, &locals, line)?,
                        }
                    }
                };
                body.push(Statement {
                    kind,
                    display: Arc::from(st.display.as_str()),
                    line,
                });
            }
            if rm.returns_value
                && !matches!(
                    body.last(),
                    Some(Statement {
                        kind: StatementKind::ReturnExpr { .. },
                        ..
                    })
                )
            {
                return Err(err(
                    rm.line,
                    rm.name.column,
                    ParseErrorKind::Invalid(format!(
                        "method `{}` is declared `returns` but does not end with `return`",
                        rm.name.name
                    )),
                ));
            }
            methods.push(Method {
                name: rm.name.name.clone(),
                returns_value: rm.returns_value,
                body,
                line: rm.line,
            });
        }

        if let Some(t) = threads.iter().find(|t| !started.contains(&t.name)) {
            let decl_line = self.raw[self.main]
                .body
                .iter()
                .find(|s| matches!(&s.kind, RawKind::ThreadDecl { thread, .. } if thread.name == t.name))
                .map_or(1, |s| s.line);
            return Err(err(
                decl_line,
                1,
                ParseErrorKind::Invalid(format!(
                    "thread `{}` is declared but never started",
                    t.name
                )),
            ));
        }
        self.check_acyclic(&methods)?;
        check_init_before_use(&methods, self.main)?;
        Ok(ProgramModel::assemble(
            name,
            shared_vars,
            methods,
            self.main,
            threads,
        ))
    }

    fn assignment(
        &self,
        local: String,
        rhs: &RawRhs,
        declares: bool,
        locals: &HashSet<String>,
        line: u32,
    ) -> Result<StatementKind, ParseError> {
        match rhs {
            RawRhs::Call(callee) => {
                let ix = self.method(callee, line)?;
                if !self.raw[ix].returns_value {
                    return Err(err(
                        line,
                        callee.column,
                        ParseErrorKind::Invalid(format!(
                            "method `{}` does not return a value",
                            callee.name
                        )),
                    ));
                }
                Ok(StatementKind::CallAssign {
                    local,
                    callee: ix,
                    declares,
                })
            }
            RawRhs::Expr(e) => {
                let expr = self.expr(e, locals, line)?;
                Ok(if declares {
                    StatementKind::LocalDecl { local, expr }
                } else {
                    StatementKind::AssignLocal { local, expr }
                })
            }
        }
    }

    fn check_acyclic(&self, methods: &[Method]) -> Result<(), ParseError> {
        // 0 = unvisited, 1 = on stack, 2 = done
        fn visit(m: usize, methods: &[Method], state: &mut [u8]) -> Option<(usize, usize)> {
            state[m] = 1;
            for (si, st) in methods[m].body.iter().enumerate() {
                if let Some(c) = st.kind.callee() {
                    if state[c] == 1 {
                        return Some((m, si));
                    }
                    if state[c] == 0 {
                        if let Some(found) = visit(c, methods, state) {
                            return Some(found);
                        }
                    }
                }
            }
            state[m] = 2;
            None
        }
        let mut state = vec![0u8; methods.len()];
        for m in 0..methods.len() {
            if state[m] == 0 {
                if let Some((mi, si)) = visit(m, methods, &mut state) {
                    let st = &self.raw[mi].body[si];
                    return Err(err(
                        st.line,
                        st.column,
                        ParseErrorKind::Invalid("recursive calls are not supported".into()),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Main may touch a shared variable only after its initialisation.
fn check_init_before_use(methods: &[Method], main: usize) -> Result<(), ParseError> {
    fn walk<'m>(
        methods: &'m [Method],
        m: usize,
        ready: &mut HashSet<&'m str>,
    ) -> Result<(), ParseError> {
        for st in &methods[m].body {
            let mut touched: Vec<&str> = Vec::new();
            match &st.kind {
                StatementKind::SharedInit { vars } => {
                    ready.extend(vars.iter().map(|(n, _)| n.as_str()));
                }
                StatementKind::IncShared { var } | StatementKind::DecShared { var } => {
                    touched.push(var)
                }
                StatementKind::LocalDecl { expr, .. }
                | StatementKind::AssignLocal { expr, .. }
                | StatementKind::ReturnExpr { expr } => {
                    if let Expression::SharedRef(v) = expr {
                        touched.push(v);
                    }
                }
                _ => {}
            }
            if let Some(v) = touched.iter().find(|v| !ready.contains(**v)) {
                return Err(err(
                    st.line,
                    1,
                    ParseErrorKind::Invalid(format!(
                        "shared variable `{v}` is used before it is initialised"
                    )),
                ));
            }
            if let Some(c) = st.kind.callee() {
                walk(methods, c, ready)?;
            }
        }
        Ok(())
    }
    walk(methods, main, &mut HashSet::new())
}
