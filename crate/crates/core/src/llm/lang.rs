//! The zero-argument function language models are asked to write.
//!
//! A source is a list of `def name():` blocks, each a run of local
//! bindings ending in `return`. Names resolve to primitives, the seven
//! transformations, carried helpers, earlier bindings, or earlier
//! functions. Anything else is rejected with a positioned diagnostic.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::grid::{apply_binary, apply_unary, Grid, Operator, Primitive};
use crate::program::Program;

pub const ENTRY_POINT: &str = "reconstructed";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construct {
    Loop,
    Comprehension,
    Import,
    Literal,
    Index,
    Attribute,
}

impl Construct {
    fn name(self) -> &'static str {
        match self {
            Construct::Loop => "loop",
            Construct::Comprehension => "comprehension",
            Construct::Import => "import",
            Construct::Literal => "literal",
            Construct::Index => "index",
            Construct::Attribute => "attribute",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum DiagnosticKind {
    Syntax,
    ForbiddenConstruct(Construct),
    UnknownName,
    WrongArity,
    MissingReconstructed,
    Parameters,
    Redefinition,
}

impl DiagnosticKind {
    /// The prompt rule a diagnostic enforces, when there is one.
    pub fn rule(&self) -> Option<u8> {
        match self {
            DiagnosticKind::ForbiddenConstruct(Construct::Literal) => Some(1),
            DiagnosticKind::Redefinition => Some(1),
            DiagnosticKind::ForbiddenConstruct(
                Construct::Loop | Construct::Comprehension | Construct::Import,
            ) => Some(2),
            DiagnosticKind::ForbiddenConstruct(Construct::Index | Construct::Attribute) => Some(3),
            DiagnosticKind::UnknownName | DiagnosticKind::WrongArity => Some(3),
            DiagnosticKind::Parameters => Some(4),
            DiagnosticKind::Syntax | DiagnosticKind::MissingReconstructed => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    #[serde(flatten)]
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match &self.kind {
            DiagnosticKind::Syntax => "syntax error".to_string(),
            DiagnosticKind::ForbiddenConstruct(c) => format!("forbidden {}", c.name()),
            DiagnosticKind::UnknownName => "unknown name".into(),
            DiagnosticKind::WrongArity => "wrong arity".into(),
            DiagnosticKind::MissingReconstructed => "missing reconstructed".into(),
            DiagnosticKind::Parameters => "parameters".into(),
            DiagnosticKind::Redefinition => "redefinition".into(),
        };
        write!(f, "line {}, col {}: {}: {}", self.line, self.col, what, self.message)?;
        if let Some(r) = self.kind.rule() {
            write!(f, " (rule {r})")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    Name(String, Span),
    Call(String, Vec<Expr>, Span),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionDef {
    pub name: String,
    pub bindings: Vec<(String, Expr)>,
    pub ret: Expr,
    /// The definition as written, dedented.
    pub text: String,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstrainedSource {
    pub raw: String,
    pub functions: Vec<FunctionDef>,
}

impl ConstrainedSource {
    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// Every function other than the entry point.
    pub fn helper_defs(&self) -> impl Iterator<Item = &FunctionDef> {
        self.functions.iter().filter(|f| f.name != ENTRY_POINT)
    }
}

/// Pulls the code out of a completion: the first fenced block if there is
/// one, without the starter-code markers, dedented.
pub fn extract_code(completion: &str) -> String {
    let mut body = completion;
    if let Some(start) = completion.find("```") {
        let after = &completion[start + 3..];
        let after = after.split_once('\n').map_or("", |(_, rest)| rest);
        body = after.find("```").map_or(after, |end| &after[..end]);
    }
    let lines: Vec<&str> = body
        .lines()
        .filter(|l| !matches!(l.trim(), "--- Start ---" | "--- End ---"))
        .collect();
    dedent(&lines)
}

fn dedent(lines: &[&str]) -> String {
    let indent = lines
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| &l[..l.len() - l.trim_start().len()])
        .reduce(|a, b| {
            let n = a.chars().zip(b.chars()).take_while(|(x, y)| x == y).count();
            &a[..a.char_indices().nth(n).map_or(a.len(), |(i, _)| i)]
        })
        .unwrap_or("");
    let mut out: Vec<&str> = lines
        .iter()
        .map(|l| l.strip_prefix(indent).unwrap_or(l.trim_start()))
        .collect();
    while out.last().is_some_and(|l| l.trim().is_empty()) {
        out.pop();
    }
    out.join("\n")
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Comma,
    Colon,
    Equals,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    span: Span,
}

struct LogicalLine {
    indent: usize,
    tokens: Vec<Token>,
}

const LOOP_WORDS: [&str; 2] = ["for", "while"];
const IMPORT_WORDS: [&str; 2] = ["import", "from"];
const LITERAL_WORDS: [&str; 3] = ["True", "False", "None"];
const UNSUPPORTED_WORDS: [&str; 20] = [
    "if", "elif", "else", "lambda", "class", "with", "try", "except", "finally", "global",
    "nonlocal", "yield", "async", "await", "del", "pass", "assert", "raise", "and", "or",
];

fn diag(span: Span, kind: DiagnosticKind, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        line: span.line,
        col: span.col,
        kind,
        message: message.into(),
    }
}

/// Splits the source into logical lines, reporting every forbidden
/// construct met on the way.
fn lex(source: &str, diags: &mut Vec<Diagnostic>) -> Vec<LogicalLine> {
    let mut out: Vec<LogicalLine> = Vec::new();
    let mut depth = 0usize;
    // Whether the previous token ends an expression, so `[` means indexing.
    let mut after_value = false;
    let mut bracket_stack: Vec<(Span, bool)> = Vec::new();
    for (li, line) in source.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let indent = chars.iter().take_while(|c| c.is_whitespace()).count();
        let continuing = depth > 0 || !bracket_stack.is_empty();
        if !continuing {
            if indent == chars.len() || chars[indent] == '#' {
                continue;
            }
            out.push(LogicalLine {
                indent,
                tokens: Vec::new(),
            });
            after_value = false;
        }
        let mut i = indent;
        while i < chars.len() {
            let c = chars[i];
            let span = Span {
                line: li + 1,
                col: i + 1,
            };
            let mut push = |tok: Tok| {
                if let Some(l) = out.last_mut() {
                    l.tokens.push(Token { tok, span });
                }
            };
            match c {
                ' ' | '\t' | '\r' => {
                    i += 1;
                    continue;
                }
                '#' => break,
                '(' => {
                    push(Tok::LParen);
                    depth += 1;
                    after_value = false;
                }
                ')' => {
                    push(Tok::RParen);
                    depth = depth.saturating_sub(1);
                    after_value = true;
                }
                ',' => {
                    push(Tok::Comma);
                    after_value = false;
                }
                ':' => {
                    push(Tok::Colon);
                    after_value = false;
                }
                '=' if chars.get(i + 1) != Some(&'=') => {
                    push(Tok::Equals);
                    after_value = false;
                }
                '[' | '{' => {
                    let index = c == '[' && after_value;
                    bracket_stack.push((span, index));
                    after_value = false;
                }
                ']' | '}' => {
                    match bracket_stack.pop() {
                        Some((open, true)) => diags.push(diag(
                            open,
                            DiagnosticKind::ForbiddenConstruct(Construct::Index),
                            "indexing is not allowed",
                        )),
                        Some((open, false)) => diags.push(diag(
                            open,
                            DiagnosticKind::ForbiddenConstruct(Construct::Literal),
                            "array and collection literals are not allowed",
                        )),
                        None => diags.push(diag(span, DiagnosticKind::Syntax, "unmatched bracket")),
                    }
                    after_value = true;
                }
                '\'' | '"' => {
                    diags.push(diag(
                        span,
                        DiagnosticKind::ForbiddenConstruct(Construct::Literal),
                        "string literals are not allowed",
                    ));
                    let close = chars[i + 1..].iter().position(|&d| d == c);
                    i = close.map_or(chars.len(), |p| i + p + 2);
                    after_value = true;
                    continue;
                }
                '.' if chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) => {
                    diags.push(diag(
                        span,
                        DiagnosticKind::ForbiddenConstruct(Construct::Literal),
                        "numeric literals are not allowed",
                    ));
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                        i += 1;
                    }
                    after_value = true;
                    continue;
                }
                '.' => {
                    diags.push(diag(
                        span,
                        DiagnosticKind::ForbiddenConstruct(Construct::Attribute),
                        "attribute access is not allowed",
                    ));
                    after_value = false;
                }
                d if d.is_ascii_digit() => {
                    diags.push(diag(
                        span,
                        DiagnosticKind::ForbiddenConstruct(Construct::Literal),
                        "numeric literals are not allowed",
                    ));
                    while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '.') {
                        i += 1;
                    }
                    after_value = true;
                    continue;
                }
                a if a.is_alphabetic() || a == '_' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                        i += 1;
                    }
                    let word: String = chars[start..i].iter().collect();
                    let w = word.as_str();
                    if LOOP_WORDS.contains(&w) {
                        let inside = bracket_stack.last().is_some();
                        let (construct, msg) = if inside {
                            (Construct::Comprehension, "comprehensions are not allowed")
                        } else {
                            (Construct::Loop, "loops are not allowed")
                        };
                        diags.push(diag(span, DiagnosticKind::ForbiddenConstruct(construct), msg));
                    } else if IMPORT_WORDS.contains(&w) {
                        diags.push(diag(
                            span,
                            DiagnosticKind::ForbiddenConstruct(Construct::Import),
                            "imports are not allowed",
                        ));
                    } else if LITERAL_WORDS.contains(&w) {
                        diags.push(diag(
                            span,
                            DiagnosticKind::ForbiddenConstruct(Construct::Literal),
                            format!("`{w}` is a literal"),
                        ));
                    } else if UNSUPPORTED_WORDS.contains(&w) {
                        diags.push(diag(
                            span,
                            DiagnosticKind::Syntax,
                            format!("`{w}` is not part of the allowed language"),
                        ));
                    } else if let Some(l) = out.last_mut() {
                        l.tokens.push(Token {
                            tok: Tok::Ident(word),
                            span,
                        });
                    }
                    after_value = true;
                    continue;
                }
                other => {
                    diags.push(diag(
                        span,
                        DiagnosticKind::Syntax,
                        format!("unexpected `{other}`; use the transformation functions"),
                    ));
                    after_value = false;
                }
            }
            i += 1;
        }
    }
    for (open, _) in bracket_stack {
        diags.push(diag(open, DiagnosticKind::Syntax, "unclosed bracket"));
    }
    if depth > 0 {
        let end = Span {
            line: source.lines().count().max(1),
            col: 1,
        };
        diags.push(diag(end, DiagnosticKind::Syntax, "unclosed parenthesis"));
    }
    out
}

struct ExprParser<'a> {
    toks: &'a [Token],
    pos: usize,
    end: Span,
}

impl ExprParser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn span(&self) -> Span {
        self.toks.get(self.pos).map_or(self.end, |t| t.span)
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), Diagnostic> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(diag(self.span(), DiagnosticKind::Syntax, format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Expr, Diagnostic> {
        let span = self.span();
        match self.peek().cloned() {
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.peek() != Some(&Tok::LParen) {
                    return Ok(Expr::Name(name, span));
                }
                self.pos += 1;
                let mut args = Vec::new();
                while self.peek() != Some(&Tok::RParen) {
                    args.push(self.expr()?);
                    if self.peek() == Some(&Tok::Comma) {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::Call(name, args, span))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => Err(diag(span, DiagnosticKind::Syntax, "expected an expression")),
        }
    }

    fn finish(&self) -> Result<(), Diagnostic> {
        match self.toks.get(self.pos) {
            None => Ok(()),
            Some(t) => Err(diag(t.span, DiagnosticKind::Syntax, "unexpected trailing input")),
        }
    }
}

fn parse_expr(toks: &[Token], end: Span) -> Result<Expr, Diagnostic> {
    let mut p = ExprParser { toks, pos: 0, end };
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

fn is_word(t: Option<&Token>, w: &str) -> bool {
    matches!(t, Some(Token { tok: Tok::Ident(x), .. }) if x == w)
}

/// Parses a `def` header and returns the function name and the tokens of
/// any body written on the same line.
fn parse_header(line: &LogicalLine, diags: &mut Vec<Diagnostic>) -> Option<(String, Vec<Token>)> {
    let t = &line.tokens;
    let name = match t.get(1) {
        Some(Token {
            tok: Tok::Ident(n), ..
        }) => n.clone(),
        _ => {
            diags.push(diag(t[0].span, DiagnosticKind::Syntax, "expected a function name"));
            return None;
        }
    };
    if t.get(2).map(|x| &x.tok) != Some(&Tok::LParen) {
        diags.push(diag(t[0].span, DiagnosticKind::Syntax, "expected `()` after the name"));
        return None;
    }
    let close = t.iter().position(|x| x.tok == Tok::RParen)?;
    if close != 3 {
        diags.push(diag(
            t[3].span,
            DiagnosticKind::Parameters,
            format!("`{name}` must take no parameters"),
        ));
        return None;
    }
    if t.get(4).map(|x| &x.tok) != Some(&Tok::Colon) {
        diags.push(diag(t[0].span, DiagnosticKind::Syntax, "expected `:` after `()`"));
        return None;
    }
    Some((name, t[5..].to_vec()))
}

enum Stmt {
    Bind(String, Expr, Span),
    Return(Expr),
}

fn parse_stmt(toks: &[Token]) -> Result<Stmt, Diagnostic> {
    let end = toks.last().map_or(Span { line: 0, col: 0 }, |t| t.span);
    if is_word(toks.first(), "return") {
        return parse_expr(&toks[1..], end).map(Stmt::Return);
    }
    match (toks.first(), toks.get(1).map(|t| &t.tok)) {
        (
            Some(Token {
                tok: Tok::Ident(name),
                span,
            }),
            Some(Tok::Equals),
        ) => Ok(Stmt::Bind(name.clone(), parse_expr(&toks[2..], end)?, *span)),
        _ => Err(diag(
            toks.first().map_or(end, |t| t.span),
            DiagnosticKind::Syntax,
            "expected `name = expression` or `return expression`",
        )),
    }
}

fn reserved_kind(name: &str) -> Option<&'static str> {
    if name.parse::<Primitive>().is_ok() {
        Some("primitive")
    } else if name.parse::<Operator>().is_ok() {
        Some("transformation")
    } else {
        None
    }
}

struct Scope<'a> {
    functions: &'a HashSet<String>,
    locals: &'a HashSet<String>,
}

fn check_expr(e: &Expr, scope: &Scope<'_>, diags: &mut Vec<Diagnostic>) {
    match e {
        Expr::Name(n, span) => {
            if scope.locals.contains(n) || n.parse::<Primitive>().is_ok() {
                return;
            }
            if scope.functions.contains(n) || n.parse::<Operator>().is_ok() {
                diags.push(diag(
                    *span,
                    DiagnosticKind::WrongArity,
                    format!("`{n}` is a function and must be called"),
                ));
            } else {
                diags.push(diag(*span, DiagnosticKind::UnknownName, format!("`{n}` is not defined")));
            }
        }
        Expr::Call(n, args, span) => {
            let expected = if let Ok(op) = n.parse::<Operator>() {
                Some(op.arity())
            } else if scope.functions.contains(n) {
                Some(0)
            } else if n.parse::<Primitive>().is_ok() || scope.locals.contains(n) {
                diags.push(diag(
                    *span,
                    DiagnosticKind::WrongArity,
                    format!("`{n}` is a grid, not a function"),
                ));
                None
            } else {
                diags.push(diag(*span, DiagnosticKind::UnknownName, format!("`{n}` is not defined")));
                None
            };
            if let Some(k) = expected {
                if args.len() != k {
                    diags.push(diag(
                        *span,
                        DiagnosticKind::WrongArity,
                        format!("`{n}` takes {k} argument(s), got {}", args.len()),
                    ));
                }
            }
            for a in args {
                check_expr(a, scope, diags);
            }
        }
    }
}

fn normalized(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses and validates `source`. Helpers carried from earlier trials may
/// be called, and restated verbatim as the starter code shows them.
pub fn parse_constrained(
    source: &str,
    carried: &[CarriedHelper],
) -> std::result::Result<ConstrainedSource, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let lines = lex(source, &mut diags);
    let text_lines: Vec<&str> = source.lines().collect();
    let mut functions: Vec<FunctionDef> = Vec::new();
    let mut known: HashSet<String> = carried.iter().map(|h| h.name.clone()).collect();
    let mut i = 0;
    while i < lines.len() {
        let line = &lines[i];
        i += 1;
        if line.tokens.is_empty() {
            continue;
        }
        if !is_word(line.tokens.first(), "def") {
            diags.push(diag(
                line.tokens[0].span,
                DiagnosticKind::Syntax,
                "only function definitions are allowed at the top level",
            ));
            continue;
        }
        let header_line = line.tokens[0].span.line;
        let mut body: Vec<Vec<Token>> = Vec::new();
        let Some((name, inline)) = parse_header(line, &mut diags) else {
            while i < lines.len() && lines[i].indent > line.indent {
                i += 1;
            }
            continue;
        };
        if !inline.is_empty() {
            body.push(inline);
        }
        while i < lines.len() && lines[i].indent > line.indent {
            body.push(lines[i].tokens.clone());
            i += 1;
        }
        let last_line = body
            .last()
            .and_then(|b| b.last())
            .map_or(header_line, |t| t.span.line);
        let text = dedent(&text_lines[header_line - 1..last_line.min(text_lines.len())]);
        let def_span = line.tokens[0].span;

        if let Some(kind) = reserved_kind(&name) {
            diags.push(diag(
                def_span,
                DiagnosticKind::Redefinition,
                format!("`{name}` is a provided {kind}"),
            ));
        } else if functions.iter().any(|f| f.name == name) {
            diags.push(diag(
                def_span,
                DiagnosticKind::Redefinition,
                format!("`{name}` is defined twice"),
            ));
        } else if let Some(h) = carried.iter().find(|h| h.name == name) {
            if normalized(&h.source) != normalized(&text) {
                diags.push(diag(
                    def_span,
                    DiagnosticKind::Redefinition,
                    format!("`{name}` is a helper from an earlier trial"),
                ));
            }
            continue;
        }

        let mut locals = HashSet::new();
        let mut bindings = Vec::new();
        let mut ret = None;
        for stmt_toks in &body {
            if ret.is_some() {
                diags.push(diag(
                    stmt_toks[0].span,
                    DiagnosticKind::Syntax,
                    "statement after `return`",
                ));
                break;
            }
            match parse_stmt(stmt_toks) {
                Err(d) => diags.push(d),
                Ok(Stmt::Bind(local, e, span)) => {
                    let scope = Scope {
                        functions: &known,
                        locals: &locals,
                    };
                    check_expr(&e, &scope, &mut diags);
                    if let Some(kind) = reserved_kind(&local) {
                        diags.push(diag(
                            span,
                            DiagnosticKind::Redefinition,
                            format!("`{local}` is a provided {kind}"),
                        ));
                    } else if known.contains(&local) {
                        diags.push(diag(
                            span,
                            DiagnosticKind::Redefinition,
                            format!("`{local}` shadows a helper function"),
                        ));
                    }
                    locals.insert(local.clone());
                    bindings.push((local, e));
                }
                Ok(Stmt::Return(e)) => {
                    let scope = Scope {
                        functions: &known,
                        locals: &locals,
                    };
                    check_expr(&e, &scope, &mut diags);
                    ret = Some(e);
                }
            }
        }
        match ret {
            Some(ret) => {
                functions.push(FunctionDef {
                    name: name.clone(),
                    bindings,
                    ret,
                    text,
                    line: header_line,
                });
            }
            None => diags.push(diag(
                def_span,
                DiagnosticKind::Syntax,
                format!("`{name}` has no `return`"),
            )),
        }
        known.insert(name);
    }
    if !functions.iter().any(|f| f.name == ENTRY_POINT)
        && !diags.iter().any(|d| d.message.contains(&format!("`{ENTRY_POINT}`")))
    {
        diags.push(Diagnostic {
            line: 0,
            col: 0,
            kind: DiagnosticKind::MissingReconstructed,
            message: format!("no `def {ENTRY_POINT}():`"),
        });
    }
    if diags.is_empty() {
        Ok(ConstrainedSource {
            raw: source.to_string(),
            functions,
        })
    } else {
        diags.sort_by_key(|d| (d.line, d.col));
        Err(diags)
    }
}

/// A helper carried between trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarriedHelper {
    pub name: String,
    pub source: String,
    /// Fully inlined over primitives.
    pub program: Program,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lowered {
    #[serde(with = "crate::grid::as_key")]
    pub grid: Grid,
    pub program: Program,
    pub new_helpers: Vec<CarriedHelper>,
}

fn grid_of(e: &Expr, fns: &HashMap<&str, Grid>, locals: &HashMap<&str, Grid>) -> Grid {
    match e {
        Expr::Name(n, _) => locals
            .get(n.as_str())
            .copied()
            .unwrap_or_else(|| n.parse::<Primitive>().expect("validated").grid()),
        Expr::Call(n, args, _) => match n.parse::<Operator>() {
            Ok(op) => {
                let a: Vec<Grid> = args.iter().map(|x| grid_of(x, fns, locals)).collect();
                match a[..] {
                    [x] => apply_unary(op, x),
                    [x, y] => apply_binary(op, x, y),
                    _ => unreachable!("arity validated"),
                }
                .expect("arity validated")
            }
            Err(_) => fns[n.as_str()],
        },
    }
}

fn program_of(
    e: &Expr,
    fns: &HashMap<&str, Program>,
    locals: &HashMap<&str, Program>,
) -> Program {
    match e {
        Expr::Name(n, _) => locals
            .get(n.as_str())
            .cloned()
            .unwrap_or_else(|| Program::Prim(n.parse().expect("validated"))),
        Expr::Call(n, args, _) => match n.parse::<Operator>() {
            Ok(op) => {
                let a = args.iter().map(|x| program_of(x, fns, locals)).collect();
                Program::apply(op, a).expect("arity validated")
            }
            Err(_) => fns[n.as_str()].clone(),
        },
    }
}

/// Evaluates a validated source directly over grids.
pub fn run_direct(cs: &ConstrainedSource, carried: &[CarriedHelper]) -> Grid {
    let lib = crate::program::Library::new();
    let mut fns: HashMap<&str, Grid> = carried
        .iter()
        .map(|h| {
            let g = crate::program::evaluate(&h.program, &lib).expect("carried helpers are raw");
            (h.name.as_str(), g)
        })
        .collect();
    for f in &cs.functions {
        let mut locals = HashMap::new();
        for (name, e) in &f.bindings {
            let g = grid_of(e, &fns, &locals);
            locals.insert(name.as_str(), g);
        }
        let g = grid_of(&f.ret, &fns, &locals);
        fns.insert(f.name.as_str(), g);
    }
    fns[ENTRY_POINT]
}

/// Inlines every binding and call into one program over primitives, and
/// collects each non-entry function as a helper candidate.
pub fn lower_and_run(cs: &ConstrainedSource, carried: &[CarriedHelper]) -> Lowered {
    let mut fns: HashMap<&str, Program> = carried
        .iter()
        .map(|h| (h.name.as_str(), h.program.clone()))
        .collect();
    for f in &cs.functions {
        let mut locals = HashMap::new();
        for (name, e) in &f.bindings {
            let p = program_of(e, &fns, &locals);
            locals.insert(name.as_str(), p);
        }
        let p = program_of(&f.ret, &fns, &locals);
        fns.insert(f.name.as_str(), p);
    }
    let program = fns[ENTRY_POINT].clone();
    let new_helpers = cs
        .helper_defs()
        .map(|f| CarriedHelper {
            name: f.name.clone(),
            source: f.text.clone(),
            program: fns[f.name.as_str()].clone(),
        })
        .collect();
    Lowered {
        grid: run_direct(cs, carried),
        program,
        new_helpers,
    }
}

/// Lowers the entry point, substituting `bound` programs for the named
/// functions instead of inlining them.
pub fn lower_with(
    cs: &ConstrainedSource,
    carried: &[CarriedHelper],
    bound: &HashMap<String, Program>,
) -> Program {
    let mut fns: HashMap<&str, Program> = carried
        .iter()
        .map(|h| {
            let p = bound.get(&h.name).cloned().unwrap_or_else(|| h.program.clone());
            (h.name.as_str(), p)
        })
        .collect();
    for f in &cs.functions {
        if let Some(p) = bound.get(&f.name).filter(|_| f.name != ENTRY_POINT) {
            fns.insert(f.name.as_str(), p.clone());
            continue;
        }
        let mut locals = HashMap::new();
        for (name, e) in &f.bindings {
            let p = program_of(e, &fns, &locals);
            locals.insert(name.as_str(), p);
        }
        let p = program_of(&f.ret, &fns, &locals);
        fns.insert(f.name.as_str(), p);
    }
    fns[ENTRY_POINT].clone()
}
