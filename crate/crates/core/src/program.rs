//! Program trees over the grid DSL, the helper library, and the structural
//! queries (expansion, sizes, sub-program matching) the learners rely on.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::{BinaryOp, Grid, Operator, Primitive, UnaryOp};

/// Opaque helper identifier.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HelperId(pub String);

impl HelperId {
    pub fn new(id: impl Into<String>) -> Self {
        HelperId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for HelperId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An AST over primitives, helper references and the seven operators.
///
/// Children are reference counted so subtrees can be shared freely between
/// traces, libraries and search pools.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Program {
    Prim(Primitive),
    Helper(HelperId),
    Unary(UnaryOp, Arc<Program>),
    Binary(BinaryOp, Arc<Program>, Arc<Program>),
}

/// Root path of a node: the child index taken at each level.
pub type Path = Vec<u8>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SizeReport {
    pub node_count: usize,
    pub op_count: usize,
}

impl SizeReport {
    pub fn leaf_count(&self) -> usize {
        self.node_count - self.op_count
    }

    fn leaf() -> Self {
        SizeReport {
            node_count: 1,
            op_count: 0,
        }
    }

    fn join(op: SizeReport, children: &[SizeReport]) -> Self {
        children.iter().fold(op, |acc, c| SizeReport {
            node_count: acc.node_count + c.node_count,
            op_count: acc.op_count + c.op_count,
        })
    }
}

/// Which form of the program sub-program matching runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Both programs fully expanded (helpers inlined).
    #[default]
    Expanded,
    /// Programs as written, helper leaves compared by identifier.
    Authored,
}

impl Program {
    pub fn prim(p: Primitive) -> Self {
        Program::Prim(p)
    }

    pub fn helper(id: impl Into<String>) -> Self {
        Program::Helper(HelperId::new(id))
    }

    pub fn unary(op: UnaryOp, child: Program) -> Self {
        Program::Unary(op, Arc::new(child))
    }

    pub fn binary(op: BinaryOp, left: Program, right: Program) -> Self {
        Program::Binary(op, Arc::new(left), Arc::new(right))
    }

    /// Builds a node from an operator and its arguments, checking arity.
    pub fn apply(op: Operator, mut args: Vec<Program>) -> Result<Self> {
        if args.len() != op.arity() {
            return Err(Error::ArityMismatch {
                op: op.name().to_string(),
                expected: op.arity(),
                found: args.len(),
            });
        }
        Ok(match op {
            Operator::Unary(u) => Program::unary(u, args.pop().unwrap()),
            Operator::Binary(b) => {
                let right = args.pop().unwrap();
                let left = args.pop().unwrap();
                Program::binary(b, left, right)
            }
        })
    }

    pub fn children(&self) -> Vec<&Program> {
        match self {
            Program::Prim(_) | Program::Helper(_) => vec![],
            Program::Unary(_, c) => vec![c],
            Program::Binary(_, l, r) => vec![l, r],
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Program::Prim(_) | Program::Helper(_))
    }

    /// Node counts of the tree as written (helper leaves count as one node).
    pub fn surface_size(&self) -> SizeReport {
        match self {
            Program::Prim(_) | Program::Helper(_) => SizeReport::leaf(),
            Program::Unary(_, c) => SizeReport::join(
                SizeReport {
                    node_count: 1,
                    op_count: 1,
                },
                &[c.surface_size()],
            ),
            Program::Binary(_, l, r) => SizeReport::join(
                SizeReport {
                    node_count: 1,
                    op_count: 1,
                },
                &[l.surface_size(), r.surface_size()],
            ),
        }
    }

    pub fn helper_refs(&self) -> HashSet<HelperId> {
        let mut out = HashSet::new();
        self.collect_helpers(&mut out);
        out
    }

    fn collect_helpers(&self, out: &mut HashSet<HelperId>) {
        match self {
            Program::Prim(_) => {}
            Program::Helper(id) => {
                out.insert(id.clone());
            }
            Program::Unary(_, c) => c.collect_helpers(out),
            Program::Binary(_, l, r) => {
                l.collect_helpers(out);
                r.collect_helpers(out);
            }
        }
    }

    pub fn uses_helpers(&self) -> bool {
        match self {
            Program::Prim(_) => false,
            Program::Helper(_) => true,
            Program::Unary(_, c) => c.uses_helpers(),
            Program::Binary(_, l, r) => l.uses_helpers() || r.uses_helpers(),
        }
    }

    /// Distinct subtrees in post-order (children before parents, first
    /// occurrence wins).
    pub fn subtrees_postorder(&self) -> Vec<Program> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        self.postorder_into(&mut seen, &mut out);
        out
    }

    fn postorder_into(&self, seen: &mut HashSet<Program>, out: &mut Vec<Program>) {
        for c in self.children() {
            c.postorder_into(seen, out);
        }
        if seen.insert(self.clone()) {
            out.push(self.clone());
        }
    }

    /// Every node with its root path, in pre-order.
    pub fn nodes_with_paths(&self) -> Vec<(Path, &Program)> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.preorder(&mut path, &mut out);
        out
    }

    fn preorder<'a>(&'a self, path: &mut Path, out: &mut Vec<(Path, &'a Program)>) {
        out.push((path.clone(), self));
        for (i, c) in self.children().into_iter().enumerate() {
            path.push(i as u8);
            c.preorder(path, out);
            path.pop();
        }
    }

    /// Root paths where `pattern` occurs as a structurally equal subtree.
    /// No expansion is performed.
    pub fn occurrences_of(&self, pattern: &Program) -> Vec<Path> {
        let target = pattern.surface_size().node_count;
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.find(pattern, target, &mut path, &mut out);
        out
    }

    fn find(&self, pattern: &Program, target: usize, path: &mut Path, out: &mut Vec<Path>) -> usize {
        let mut size = 1;
        for (i, c) in self.children().into_iter().enumerate() {
            path.push(i as u8);
            size += c.find(pattern, target, path, out);
            path.pop();
        }
        if size == target && self == pattern {
            out.push(path.clone());
        }
        size
    }

    /// Parses the call syntax produced by `Display`, e.g.
    /// `add(line_horizontal, reflect_vertical(square))`. Names that are not
    /// primitives or operators become helper references.
    pub fn parse(text: &str) -> Result<Program> {
        let mut parser = CallParser {
            src: text.as_bytes(),
            pos: 0,
        };
        let p = parser.expr()?;
        parser.skip_ws();
        if parser.pos != parser.src.len() {
            return Err(Error::InvalidProgram(format!(
                "trailing input at offset {}",
                parser.pos
            )));
        }
        Ok(p)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Program::Prim(p) => write!(f, "{p}"),
            Program::Helper(id) => write!(f, "{id}"),
            Program::Unary(op, c) => write!(f, "{op}({c})"),
            Program::Binary(op, l, r) => write!(f, "{op}({l}, {r})"),
        }
    }
}

impl fmt::Debug for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

struct CallParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl CallParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::InvalidProgram(format!(
                "expected a name at offset {start}"
            )));
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn eat(&mut self, ch: u8) -> bool {
        self.skip_ws();
        if self.src.get(self.pos) == Some(&ch) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Program> {
        let name = self.ident()?;
        if self.eat(b'(') {
            let op: Operator = name.parse()?;
            let mut args = Vec::new();
            if !self.eat(b')') {
                loop {
                    args.push(self.expr()?);
                    if self.eat(b')') {
                        break;
                    }
                    if !self.eat(b',') {
                        return Err(Error::InvalidProgram(format!(
                            "expected `,` or `)` at offset {}",
                            self.pos
                        )));
                    }
                }
            }
            Program::apply(op, args)
        } else if let Ok(p) = name.parse::<Primitive>() {
            Ok(Program::Prim(p))
        } else if name.parse::<Operator>().is_ok() {
            Err(Error::InvalidProgram(format!("operator `{name}` used without arguments")))
        } else {
            Ok(Program::Helper(HelperId(name)))
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ProgramRepr {
    Prim { prim: String },
    Helper { helper: String },
    Op { op: String, args: Vec<ProgramRepr> },
}

impl ProgramRepr {
    fn from_program(p: &Program) -> Self {
        match p {
            Program::Prim(p) => ProgramRepr::Prim {
                prim: p.name().to_string(),
            },
            Program::Helper(id) => ProgramRepr::Helper {
                helper: id.0.clone(),
            },
            Program::Unary(op, c) => ProgramRepr::Op {
                op: op.name().to_string(),
                args: vec![Self::from_program(c)],
            },
            Program::Binary(op, l, r) => ProgramRepr::Op {
                op: op.name().to_string(),
                args: vec![Self::from_program(l), Self::from_program(r)],
            },
        }
    }

    fn into_program(self) -> Result<Program> {
        match self {
            ProgramRepr::Prim { prim } => Ok(Program::Prim(prim.parse()?)),
            ProgramRepr::Helper { helper } => Ok(Program::Helper(HelperId(helper))),
            ProgramRepr::Op { op, args } => {
                let op: Operator = op.parse()?;
                let args = args
                    .into_iter()
                    .map(ProgramRepr::into_program)
                    .collect::<Result<Vec<_>>>()?;
                Program::apply(op, args)
            }
        }
    }
}

impl Serialize for Program {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ProgramRepr::from_program(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Program {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        ProgramRepr::deserialize(deserializer)?
            .into_program()
            .map_err(serde::de::Error::custom)
    }
}

/// One helper in a [`Library`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HelperEntry {
    pub id: HelperId,
    pub program: Program,
    #[serde(rename = "output_key", with = "crate::grid::as_key")]
    pub output: Grid,
    pub created_at_trial: usize,
    #[serde(skip)]
    expanded: Option<Arc<Program>>,
    #[serde(skip)]
    size: SizeReport,
}

impl HelperEntry {
    pub fn expanded(&self) -> &Program {
        self.expanded
            .as_deref()
            .expect("library entries are expanded on insertion")
    }

    pub fn size(&self) -> SizeReport {
        self.size
    }
}

/// Ordered helper set, deduplicated by output grid. Helper programs may only
/// reference helpers inserted before them, so the library is acyclic by
/// construction.
#[derive(Clone, Debug, Default)]
pub struct Library {
    entries: Vec<HelperEntry>,
    by_id: HashMap<HelperId, usize>,
    by_output: HashMap<Grid, usize>,
    next_id: usize,
}

impl Library {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[HelperEntry] {
        &self.entries
    }

    pub fn get(&self, id: &HelperId) -> Option<&HelperEntry> {
        self.by_id.get(id).map(|&i| &self.entries[i])
    }

    pub fn by_output(&self, grid: Grid) -> Option<&HelperEntry> {
        self.by_output.get(&grid).map(|&i| &self.entries[i])
    }

    pub fn contains_output(&self, grid: Grid) -> bool {
        self.by_output.contains_key(&grid)
    }

    /// Inserts `program` under a fresh identifier. Returns the identifier
    /// of the entry holding the program's output and whether a new entry
    /// was created; a helper whose output is already present is a no-op.
    pub fn insert(&mut self, program: Program, trial: usize) -> Result<(HelperId, bool)> {
        let output = evaluate(&program, self)?;
        if let Some(existing) = self.by_output(output) {
            return Ok((existing.id.clone(), false));
        }
        let mut id = HelperId(format!("h{}", self.next_id));
        while self.by_id.contains_key(&id) {
            self.next_id += 1;
            id = HelperId(format!("h{}", self.next_id));
        }
        self.next_id += 1;
        self.push(id.clone(), program, output, trial)?;
        Ok((id, true))
    }

    /// Inserts a helper under a caller-chosen name. Fails if the name is
    /// taken; an existing output returns the existing identifier.
    pub fn insert_named(
        &mut self,
        id: impl Into<String>,
        program: Program,
        trial: usize,
    ) -> Result<(HelperId, bool)> {
        let id = HelperId(id.into());
        if self.by_id.contains_key(&id) {
            return Err(Error::InvalidProgram(format!("helper `{id}` already defined")));
        }
        let output = evaluate(&program, self)?;
        if let Some(existing) = self.by_output(output) {
            return Ok((existing.id.clone(), false));
        }
        self.push(id.clone(), program, output, trial)?;
        Ok((id, true))
    }

    fn push(&mut self, id: HelperId, program: Program, output: Grid, trial: usize) -> Result<()> {
        let expanded = expand(&program, self)?;
        let size = expanded.surface_size();
        self.by_id.insert(id.clone(), self.entries.len());
        self.by_output.insert(output, self.entries.len());
        self.entries.push(HelperEntry {
            id,
            program,
            output,
            created_at_trial: trial,
            expanded: Some(Arc::new(expanded)),
            size,
        });
        Ok(())
    }

    /// Rebuilds a library from serialized entries, checking order,
    /// references, dedup and cached outputs.
    pub fn from_entries(entries: Vec<HelperEntry>) -> Result<Self> {
        let mut lib = Library::new();
        for e in entries {
            for r in e.program.helper_refs() {
                if !lib.by_id.contains_key(&r) {
                    return Err(if r == e.id {
                        Error::CyclicLibrary(r.0)
                    } else {
                        Error::UnknownHelper(r.0)
                    });
                }
            }
            let output = evaluate(&e.program, &lib)?;
            if output != e.output {
                return Err(Error::InvalidProgram(format!(
                    "helper `{}` output key does not match its program",
                    e.id
                )));
            }
            if lib.by_id.contains_key(&e.id) {
                return Err(Error::InvalidProgram(format!("duplicate helper id `{}`", e.id)));
            }
            if lib.contains_output(output) {
                return Err(Error::InvalidProgram(format!(
                    "helper `{}` duplicates an existing output",
                    e.id
                )));
            }
            lib.push(e.id, e.program, output, e.created_at_trial)?;
        }
        lib.next_id = lib.entries.len();
        Ok(lib)
    }
}

impl Serialize for Library {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.entries.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Library {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let entries = Vec::<HelperEntry>::deserialize(deserializer)?;
        Library::from_entries(entries).map_err(serde::de::Error::custom)
    }
}

/// Evaluates `p`; helper leaves take the cached output of their entry.
pub fn evaluate(p: &Program, lib: &Library) -> Result<Grid> {
    Ok(match p {
        Program::Prim(prim) => prim.grid(),
        Program::Helper(id) => lib
            .get(id)
            .ok_or_else(|| Error::UnknownHelper(id.0.clone()))?
            .output,
        Program::Unary(op, c) => op.apply(evaluate(c, lib)?),
        Program::Binary(op, l, r) => op.apply(evaluate(l, lib)?, evaluate(r, lib)?),
    })
}

/// Inlines every helper reference.
pub fn expand(p: &Program, lib: &Library) -> Result<Program> {
    let mut stack = Vec::new();
    expand_inner(p, lib, &mut stack)
}

fn expand_inner(p: &Program, lib: &Library, stack: &mut Vec<HelperId>) -> Result<Program> {
    Ok(match p {
        Program::Prim(_) => p.clone(),
        Program::Helper(id) => {
            let entry = lib.get(id).ok_or_else(|| Error::UnknownHelper(id.0.clone()))?;
            if let Some(expanded) = &entry.expanded {
                return Ok((**expanded).clone());
            }
            if stack.contains(id) {
                return Err(Error::CyclicLibrary(id.0.clone()));
            }
            stack.push(id.clone());
            let out = expand_inner(&entry.program, lib, stack)?;
            stack.pop();
            out
        }
        Program::Unary(op, c) => {
            if !c.uses_helpers() {
                return Ok(p.clone());
            }
            Program::unary(*op, expand_inner(c, lib, stack)?)
        }
        Program::Binary(op, l, r) => {
            if !p.uses_helpers() {
                return Ok(p.clone());
            }
            Program::binary(*op, expand_inner(l, lib, stack)?, expand_inner(r, lib, stack)?)
        }
    })
}

/// Sizes of the fully expanded tree.
pub fn size(p: &Program, lib: &Library) -> Result<SizeReport> {
    Ok(match p {
        Program::Prim(_) => SizeReport::leaf(),
        Program::Helper(id) => lib
            .get(id)
            .ok_or_else(|| Error::UnknownHelper(id.0.clone()))?
            .size,
        Program::Unary(_, c) => SizeReport::join(
            SizeReport {
                node_count: 1,
                op_count: 1,
            },
            &[size(c, lib)?],
        ),
        Program::Binary(_, l, r) => SizeReport::join(
            SizeReport {
                node_count: 1,
                op_count: 1,
            },
            &[size(l, lib)?, size(r, lib)?],
        ),
    })
}

/// Root paths in `p` where `h` occurs. In [`MatchMode::Expanded`] (the
/// default) both programs are expanded first and the paths refer to the
/// expanded `p`.
pub fn subprogram_occurrences_with(
    h: &Program,
    p: &Program,
    lib: &Library,
    mode: MatchMode,
) -> Result<Vec<Path>> {
    match mode {
        MatchMode::Expanded => Ok(expand(p, lib)?.occurrences_of(&expand(h, lib)?)),
        MatchMode::Authored => Ok(p.occurrences_of(h)),
    }
}

pub fn subprogram_occurrences(h: &Program, p: &Program, lib: &Library) -> Result<Vec<Path>> {
    subprogram_occurrences_with(h, p, lib, MatchMode::Expanded)
}

/// Observational-equivalence key: the output grid's row-major key.
pub fn canonical_key(p: &Program, lib: &Library) -> Result<String> {
    Ok(evaluate(p, lib)?.key())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(text: &str) -> Program {
        Program::parse(text).unwrap()
    }

    #[test]
    fn parse_and_display_round_trip() {
        let text = "add(reflect_vertical(square), intersect(diagonal, h3))";
        assert_eq!(p(text).to_string(), text);
        assert_eq!(p("overlap(square, diagonal)"), p("intersect(square, diagonal)"));
        assert!(Program::parse("add(square)").is_err());
        assert!(Program::parse("add(square, blank) x").is_err());
        assert!(Program::parse("invert").is_err());
    }

    #[test]
    fn evaluate_examples() {
        let lib = Library::new();
        assert_eq!(evaluate(&p("square"), &lib).unwrap(), Primitive::Square.grid());
        let plus = Primitive::LineHorizontal.grid().add(Primitive::LineVertical.grid());
        assert_eq!(evaluate(&p("add(line_horizontal, line_vertical)"), &lib).unwrap(), plus);
        assert!(matches!(evaluate(&p("nope"), &lib), Err(Error::UnknownHelper(_))));
    }

    #[test]
    fn helper_indirection() {
        let mut lib = Library::new();
        let (id, fresh) = lib.insert(p("square"), 0).unwrap();
        assert!(fresh);
        assert_eq!(
            evaluate(&Program::Helper(id), &lib).unwrap(),
            Primitive::Square.grid()
        );
    }

    #[test]
    fn expand_examples() {
        let mut lib = Library::new();
        let plain = p("invert(triangle)");
        assert_eq!(expand(&plain, &lib).unwrap(), plain);

        let (plus, _) = lib.insert(p("add(line_horizontal, line_vertical)"), 0).unwrap();
        assert_eq!(
            expand(&Program::Helper(plus.clone()), &lib).unwrap(),
            p("add(line_horizontal, line_vertical)")
        );

        let (outer, _) = lib
            .insert(Program::binary(BinaryOp::Add, Program::Helper(plus), p("square")), 1)
            .unwrap();
        let deep = Program::unary(UnaryOp::Invert, Program::Helper(outer));
        let expanded = expand(&deep, &lib).unwrap();
        assert_eq!(
            expanded,
            p("invert(add(add(line_horizontal, line_vertical), square))")
        );
        assert!(!expanded.uses_helpers());
        assert_eq!(
            size(&deep, &lib).unwrap(),
            SizeReport {
                node_count: 6,
                op_count: 3
            }
        );
    }

    #[test]
    fn size_examples() {
        let lib = Library::new();
        assert_eq!(
            size(&p("square"), &lib).unwrap(),
            SizeReport {
                node_count: 1,
                op_count: 0
            }
        );
        assert_eq!(
            size(&p("add(line_horizontal, line_vertical)"), &lib).unwrap(),
            SizeReport {
                node_count: 3,
                op_count: 1
            }
        );
        let fat_cross = p("add(add(line_horizontal, reflect_horizontal(line_horizontal)), add(line_vertical, reflect_vertical(line_vertical)))");
        assert_eq!(
            size(&fat_cross, &lib).unwrap(),
            SizeReport {
                node_count: 9,
                op_count: 5
            }
        );
    }

    #[test]
    fn occurrence_examples() {
        let lib = Library::new();
        let plus = p("add(line_horizontal, line_vertical)");
        assert_eq!(subprogram_occurrences(&plus, &plus, &lib).unwrap(), vec![Vec::<u8>::new()]);
        assert_eq!(
            subprogram_occurrences(&p("line_vertical"), &plus, &lib).unwrap(),
            vec![vec![1u8]]
        );
        assert!(subprogram_occurrences(&plus, &p("line_vertical"), &lib)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn authored_matching_does_not_look_through_helpers() {
        let mut lib = Library::new();
        let (id, _) = lib.insert(p("add(line_horizontal, line_vertical)"), 0).unwrap();
        let prog = Program::unary(UnaryOp::Invert, Program::Helper(id));
        let lv = p("line_vertical");
        assert_eq!(
            subprogram_occurrences_with(&lv, &prog, &lib, MatchMode::Expanded)
                .unwrap()
                .len(),
            1
        );
        assert!(subprogram_occurrences_with(&lv, &prog, &lib, MatchMode::Authored)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn library_dedups_by_output() {
        let mut lib = Library::new();
        let (a, fresh_a) = lib.insert(p("add(line_horizontal, line_vertical)"), 0).unwrap();
        let (b, fresh_b) = lib.insert(p("add(line_vertical, line_horizontal)"), 1).unwrap();
        assert!(fresh_a && !fresh_b);
        assert_eq!(a, b);
        assert_eq!(lib.len(), 1);
    }

    #[test]
    fn canonical_key_identifies_outputs() {
        let lib = Library::new();
        assert_eq!(
            canonical_key(&p("add(square, diagonal)"), &lib).unwrap(),
            canonical_key(&p("add(diagonal, square)"), &lib).unwrap()
        );
        assert_eq!(
            canonical_key(&p("invert(blank)"), &lib).unwrap(),
            canonical_key(&p("add(invert(square), square)"), &lib).unwrap()
        );
        assert_ne!(
            canonical_key(&p("invert(blank)"), &lib).unwrap(),
            canonical_key(&p("add(triangle, square)"), &lib).unwrap()
        );
    }

    #[test]
    fn library_json_round_trip_and_validation() {
        let mut lib = Library::new();
        let (a, _) = lib.insert(p("reflect_diag(triangle)"), 0).unwrap();
        lib.insert(Program::unary(UnaryOp::Invert, Program::Helper(a)), 2)
            .unwrap();
        let json = serde_json::to_string(&lib).unwrap();
        let back: Library = serde_json::from_str(&json).unwrap();
        assert_eq!(back.entries(), lib.entries());

        let mut entries: Vec<serde_json::Value> = serde_json::from_str(&json).unwrap();
        entries.reverse();
        let bad = serde_json::to_string(&entries).unwrap();
        assert!(serde_json::from_str::<Library>(&bad).is_err());
    }

    #[test]
    fn program_json_checks_arity() {
        let prog = p("subtract(square, reflect_diag(h1))");
        let json = serde_json::to_string(&prog).unwrap();
        assert_eq!(
            json,
            r#"{"op":"subtract","args":[{"prim":"square"},{"op":"reflect_diag","args":[{"helper":"h1"}]}]}"#
        );
        assert_eq!(serde_json::from_str::<Program>(&json).unwrap(), prog);
        assert!(serde_json::from_str::<Program>(r#"{"op":"invert","args":[]}"#).is_err());
        assert_eq!(
            serde_json::from_str::<Program>(r#"{"op":"overlap","args":[{"prim":"square"},{"prim":"blank"}]}"#).unwrap(),
            p("intersect(square, blank)")
        );
    }

    #[test]
    fn postorder_subtrees() {
        let prog = p("add(line_horizontal, line_vertical)");
        assert_eq!(
            prog.subtrees_postorder(),
            vec![p("line_horizontal"), p("line_vertical"), prog.clone()]
        );
        let dup = p("add(square, square)");
        assert_eq!(dup.subtrees_postorder().len(), 2);
    }
}
