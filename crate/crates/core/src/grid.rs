//! 10×10 binary grids, the six geometric primitives and the seven
//! transformation operators.
//!
//! A [`Grid`] packs its 100 cells into the low bits of a `u128`; cell
//! `(row, col)` lives at bit `row * 10 + col`, so the row-major key string
//! reads bits in ascending order.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const SIZE: usize = 10;
pub const CELLS: usize = SIZE * SIZE;

const MASK: u128 = (1u128 << CELLS) - 1;
const ROW_MASK: u128 = (1u128 << SIZE) - 1;

const fn reverse10(v: u16) -> u16 {
    let mut out = 0u16;
    let mut i = 0;
    while i < 10 {
        if v & (1 << i) != 0 {
            out |= 1 << (9 - i);
        }
        i += 1;
    }
    out
}

const REV10: [u16; 1024] = {
    let mut table = [0u16; 1024];
    let mut i = 0;
    while i < 1024 {
        table[i] = reverse10(i as u16);
        i += 1;
    }
    table
};

/// A 10×10 binary pattern. Row 0 is the top row, column 0 the left column.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Grid(u128);

impl Grid {
    pub const BLANK: Grid = Grid(0);
    pub const FULL: Grid = Grid(MASK);

    /// Builds a grid from raw bits; bits above 100 are discarded.
    pub const fn from_bits(bits: u128) -> Self {
        Grid(bits & MASK)
    }

    pub const fn bits(self) -> u128 {
        self.0
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = 0u128;
        for r in 0..SIZE {
            for c in 0..SIZE {
                if f(r, c) {
                    bits |= 1u128 << (r * SIZE + c);
                }
            }
        }
        Grid(bits)
    }

    pub fn get(self, row: usize, col: usize) -> bool {
        assert!(row < SIZE && col < SIZE, "cell ({row}, {col}) out of range");
        self.0 >> (row * SIZE + col) & 1 == 1
    }

    pub fn with(self, row: usize, col: usize, value: bool) -> Self {
        assert!(row < SIZE && col < SIZE, "cell ({row}, {col}) out of range");
        let bit = 1u128 << (row * SIZE + col);
        Grid(if value { self.0 | bit } else { self.0 & !bit })
    }

    pub fn count_ones(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_blank(self) -> bool {
        self.0 == 0
    }

    fn row(self, r: usize) -> u128 {
        (self.0 >> (r * SIZE)) & ROW_MASK
    }

    // Binary operators.

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, other: Grid) -> Grid {
        Grid(self.0 | other.0)
    }

    pub fn subtract(self, other: Grid) -> Grid {
        Grid(self.0 & !other.0)
    }

    pub fn intersect(self, other: Grid) -> Grid {
        Grid(self.0 & other.0)
    }

    // Unary operators.

    pub fn invert(self) -> Grid {
        Grid(!self.0 & MASK)
    }

    /// Up-down flip: row `r` moves to row `9 - r`.
    pub fn reflect_horizontal(self) -> Grid {
        let mut out = 0u128;
        for r in 0..SIZE {
            out |= self.row(r) << ((SIZE - 1 - r) * SIZE);
        }
        Grid(out)
    }

    /// Left-right flip: column `c` moves to column `9 - c`.
    pub fn reflect_vertical(self) -> Grid {
        let mut out = 0u128;
        for r in 0..SIZE {
            out |= (REV10[self.row(r) as usize] as u128) << (r * SIZE);
        }
        Grid(out)
    }

    /// Transpose.
    pub fn reflect_diag(self) -> Grid {
        let mut out = 0u128;
        let mut bits = self.0;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let (r, c) = (i / SIZE, i % SIZE);
            out |= 1u128 << (c * SIZE + r);
        }
        Grid(out)
    }

    /// Reflection across the anti-diagonal: `(i, j) -> (9 - j, 9 - i)`.
    pub fn reflect_anti_diag(self) -> Grid {
        self.reflect_diag().reflect_horizontal().reflect_vertical()
    }

    /// The 100-character row-major `'0'`/`'1'` key.
    pub fn key(self) -> String {
        (0..CELLS)
            .map(|i| if self.0 >> i & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    pub fn from_key(key: &str) -> Result<Grid> {
        if key.len() != CELLS {
            return Err(Error::InvalidGrid(format!(
                "key must have {CELLS} characters, got {}",
                key.len()
            )));
        }
        let mut bits = 0u128;
        for (i, ch) in key.bytes().enumerate() {
            match ch {
                b'0' => {}
                b'1' => bits |= 1u128 << i,
                other => {
                    return Err(Error::InvalidGrid(format!(
                        "invalid key character {:?} at {i}",
                        other as char
                    )))
                }
            }
        }
        Ok(Grid(bits))
    }

    pub fn to_rows(self) -> [[u8; SIZE]; SIZE] {
        let mut rows = [[0u8; SIZE]; SIZE];
        for (r, row) in rows.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = self.get(r, c) as u8;
            }
        }
        rows
    }

    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Grid> {
        if rows.len() != SIZE {
            return Err(Error::InvalidGrid(format!(
                "expected {SIZE} rows, got {}",
                rows.len()
            )));
        }
        let mut bits = 0u128;
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != SIZE {
                return Err(Error::InvalidGrid(format!(
                    "row {r} has {} cells, expected {SIZE}",
                    row.len()
                )));
            }
            for (c, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => bits |= 1u128 << (r * SIZE + c),
                    other => {
                        return Err(Error::InvalidGrid(format!(
                            "cell ({r}, {c}) has value {other}"
                        )))
                    }
                }
            }
        }
        Ok(Grid(bits))
    }

    /// Renders the grid the way the prompts print arrays: one bracketed row
    /// per line, wrapped in an outer pair of brackets.
    pub fn to_array_text(self) -> String {
        let mut out = String::from("[\n");
        for (r, row) in self.to_rows().iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push('[');
            out.push_str(&cells.join(", "));
            out.push(']');
            if r + 1 < SIZE {
                out.push(',');
            }
            out.push('\n');
        }
        out.push(']');
        out
    }

    pub fn symmetry_axes(self) -> AxisSet {
        let mut axes = AxisSet::empty();
        for axis in Axis::ALL {
            if axis.reflect(self) == self {
                axes.insert(axis);
            }
        }
        axes
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Grid(")?;
        for row in self.to_rows() {
            let line: String = row.iter().map(|&v| if v == 1 { '#' } else { '.' }).collect();
            writeln!(f, "  {line}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (r, row) in self.to_rows().iter().enumerate() {
            let line: String = row.iter().map(|&v| if v == 1 { '#' } else { '.' }).collect();
            if r + 1 < SIZE {
                writeln!(f, "{line}")?;
            } else {
                write!(f, "{line}")?;
            }
        }
        Ok(())
    }
}

impl Serialize for Grid {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<u8>> = Vec::deserialize(deserializer)?;
        Grid::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for fields stored as 100-character keys.
pub mod as_key {
    use super::Grid;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(grid: &Grid, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&grid.key())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Grid, D::Error> {
        let key = String::deserialize(d)?;
        Grid::from_key(&key).map_err(serde::de::Error::custom)
    }
}

/// Same, for optional grids.
pub mod as_opt_key {
    use super::Grid;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(g: &Option<Grid>, s: S) -> Result<S::Ok, S::Error> {
        g.map(|g| g.key()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Grid>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|k| Grid::from_key(&k).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// The six geometric primitives, in the order the prompt lists them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Primitive {
    Blank,
    LineHorizontal,
    LineVertical,
    Diagonal,
    Square,
    Triangle,
}

impl Primitive {
    pub const ALL: [Primitive; 6] = [
        Primitive::Blank,
        Primitive::LineHorizontal,
        Primitive::LineVertical,
        Primitive::Diagonal,
        Primitive::Square,
        Primitive::Triangle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::Blank => "blank",
            Primitive::LineHorizontal => "line_horizontal",
            Primitive::LineVertical => "line_vertical",
            Primitive::Diagonal => "diagonal",
            Primitive::Square => "square",
            Primitive::Triangle => "triangle",
        }
    }

    pub fn grid(self) -> Grid {
        match self {
            Primitive::Blank => Grid::BLANK,
            Primitive::LineHorizontal => Grid::from_fn(|r, _| r == 5),
            Primitive::LineVertical => Grid::from_fn(|_, c| c == 5),
            Primitive::Diagonal => Grid::from_fn(|r, c| r == c),
            Primitive::Square => Grid::from_fn(|r, c| r == 0 || r == 9 || c == 0 || c == 9),
            Primitive::Triangle => Grid::from_fn(|r, c| c <= r),
        }
    }
}

impl FromStr for Primitive {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Primitive::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPrimitive(s.to_string()))
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Looks up a primitive grid by name.
pub fn primitive(name: &str) -> Result<Grid> {
    Ok(name.parse::<Primitive>()?.grid())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryOp {
    Add,
    Subtract,
    Intersect,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnaryOp {
    Invert,
    ReflectHorizontal,
    ReflectVertical,
    ReflectDiag,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 3] = [BinaryOp::Add, BinaryOp::Subtract, BinaryOp::Intersect];

    pub fn name(self) -> &'static str {
        match self {
            BinaryOp::Add => "add",
            BinaryOp::Subtract => "subtract",
            BinaryOp::Intersect => "intersect",
        }
    }

    pub fn apply(self, a: Grid, b: Grid) -> Grid {
        match self {
            BinaryOp::Add => a.add(b),
            BinaryOp::Subtract => a.subtract(b),
            BinaryOp::Intersect => a.intersect(b),
        }
    }

    pub fn is_commutative(self) -> bool {
        !matches!(self, BinaryOp::Subtract)
    }
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 4] = [
        UnaryOp::Invert,
        UnaryOp::ReflectHorizontal,
        UnaryOp::ReflectVertical,
        UnaryOp::ReflectDiag,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Invert => "invert",
            UnaryOp::ReflectHorizontal => "reflect_horizontal",
            UnaryOp::ReflectVertical => "reflect_vertical",
            UnaryOp::ReflectDiag => "reflect_diag",
        }
    }

    pub fn apply(self, a: Grid) -> Grid {
        match self {
            UnaryOp::Invert => a.invert(),
            UnaryOp::ReflectHorizontal => a.reflect_horizontal(),
            UnaryOp::ReflectVertical => a.reflect_vertical(),
            UnaryOp::ReflectDiag => a.reflect_diag(),
        }
    }
}

impl fmt::Display for BinaryOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for UnaryOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Any of the seven operators. `overlap` is accepted as an alias for
/// `intersect` and never survives parsing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operator {
    Binary(BinaryOp),
    Unary(UnaryOp),
}

impl Operator {
    /// Fixed generation order used by the synthesizer.
    pub const ALL: [Operator; 7] = [
        Operator::Binary(BinaryOp::Add),
        Operator::Binary(BinaryOp::Subtract),
        Operator::Binary(BinaryOp::Intersect),
        Operator::Unary(UnaryOp::Invert),
        Operator::Unary(UnaryOp::ReflectHorizontal),
        Operator::Unary(UnaryOp::ReflectVertical),
        Operator::Unary(UnaryOp::ReflectDiag),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Operator::Binary(op) => op.name(),
            Operator::Unary(op) => op.name(),
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Operator::Binary(_) => 2,
            Operator::Unary(_) => 1,
        }
    }
}

impl FromStr for Operator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = if s == "overlap" { "intersect" } else { s };
        Operator::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| Error::UnknownOperator(s.to_string()))
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn apply_binary(op: Operator, a: Grid, b: Grid) -> Result<Grid> {
    match op {
        Operator::Binary(op) => Ok(op.apply(a, b)),
        Operator::Unary(op) => Err(Error::ArityMismatch {
            op: op.name().to_string(),
            expected: 1,
            found: 2,
        }),
    }
}

pub fn apply_unary(op: Operator, a: Grid) -> Result<Grid> {
    match op {
        Operator::Unary(op) => Ok(op.apply(a)),
        Operator::Binary(op) => Err(Error::ArityMismatch {
            op: op.name().to_string(),
            expected: 2,
            found: 1,
        }),
    }
}

/// Reflection axes a grid can be invariant under. Axes are named after the
/// reflection that tests them: `Horizontal` is the up-down flip.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Horizontal,
    Vertical,
    MainDiagonal,
    AntiDiagonal,
}

impl Axis {
    pub const ALL: [Axis; 4] = [
        Axis::Horizontal,
        Axis::Vertical,
        Axis::MainDiagonal,
        Axis::AntiDiagonal,
    ];

    pub fn reflect(self, g: Grid) -> Grid {
        match self {
            Axis::Horizontal => g.reflect_horizontal(),
            Axis::Vertical => g.reflect_vertical(),
            Axis::MainDiagonal => g.reflect_diag(),
            Axis::AntiDiagonal => g.reflect_anti_diag(),
        }
    }
}

/// A small set of [`Axis`] values.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct AxisSet(u8);

impl AxisSet {
    pub const fn empty() -> Self {
        AxisSet(0)
    }

    pub const fn all() -> Self {
        AxisSet(0b1111)
    }

    fn bit(axis: Axis) -> u8 {
        1 << axis as u8
    }

    pub fn insert(&mut self, axis: Axis) {
        self.0 |= Self::bit(axis);
    }

    pub fn contains(self, axis: Axis) -> bool {
        self.0 & Self::bit(axis) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn intersects(self, other: AxisSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn iter(self) -> impl Iterator<Item = Axis> {
        Axis::ALL.into_iter().filter(move |a| self.contains(*a))
    }
}

impl FromIterator<Axis> for AxisSet {
    fn from_iter<I: IntoIterator<Item = Axis>>(iter: I) -> Self {
        let mut set = AxisSet::empty();
        for axis in iter {
            set.insert(axis);
        }
        set
    }
}

impl fmt::Debug for AxisSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for AxisSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let axes: BTreeSet<Axis> = self.iter().collect();
        axes.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AxisSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let axes: Vec<Axis> = Vec::deserialize(deserializer)?;
        Ok(axes.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitive_lookup_by_name() {
        assert_eq!(primitive("blank").unwrap(), Grid::BLANK);
        assert!(matches!(primitive("circle"), Err(Error::UnknownPrimitive(_))));
    }

    #[test]
    fn line_vertical_is_column_five() {
        let g = Primitive::LineVertical.grid();
        for r in 0..SIZE {
            for c in 0..SIZE {
                assert_eq!(g.get(r, c), c == 5);
            }
        }
    }

    #[test]
    fn square_is_border_only() {
        let g = Primitive::Square.grid();
        assert_eq!(g.count_ones(), 36);
        assert!(g.get(0, 4) && g.get(9, 9) && !g.get(1, 1) && !g.get(5, 5));
    }

    #[test]
    fn intersect_square_diagonal_keeps_two_corners() {
        let g = Primitive::Square.grid().intersect(Primitive::Diagonal.grid());
        let expected = Grid::BLANK.with(0, 0, true).with(9, 9, true);
        assert_eq!(g, expected);
    }

    #[test]
    fn subtract_self_is_blank() {
        for p in Primitive::ALL {
            assert_eq!(p.grid().subtract(p.grid()), Grid::BLANK);
        }
    }

    #[test]
    fn unary_examples() {
        assert_eq!(Grid::BLANK.invert(), Grid::FULL);
        let lh = Primitive::LineHorizontal.grid();
        assert_eq!(lh.reflect_diag(), Primitive::LineVertical.grid());
        assert_eq!(lh.reflect_horizontal(), Grid::from_fn(|r, _| r == 4));
    }

    #[test]
    fn arity_is_checked() {
        let a = Primitive::Square.grid();
        let invert: Operator = "invert".parse().unwrap();
        let add: Operator = "add".parse().unwrap();
        assert!(matches!(apply_binary(invert, a, a), Err(Error::ArityMismatch { .. })));
        assert!(matches!(apply_unary(add, a), Err(Error::ArityMismatch { .. })));
        assert_eq!("overlap".parse::<Operator>().unwrap(), Operator::Binary(BinaryOp::Intersect));
    }

    #[test]
    fn symmetry_examples() {
        assert_eq!(Grid::BLANK.symmetry_axes(), AxisSet::all());
        let diag: AxisSet = [Axis::MainDiagonal, Axis::AntiDiagonal].into_iter().collect();
        assert_eq!(Primitive::Diagonal.grid().symmetry_axes(), diag);
        let vertical: AxisSet = [Axis::Vertical].into_iter().collect();
        assert_eq!(Primitive::LineHorizontal.grid().symmetry_axes(), vertical);
    }

    #[test]
    fn key_round_trip_and_rejects_garbage() {
        let g = Primitive::Triangle.grid();
        assert_eq!(Grid::from_key(&g.key()).unwrap(), g);
        assert!(Grid::from_key("01").is_err());
        assert!(Grid::from_key(&"2".repeat(100)).is_err());
    }

    #[test]
    fn json_is_array_of_rows() {
        let g = Primitive::LineHorizontal.grid();
        let json = serde_json::to_string(&g).unwrap();
        assert!(json.starts_with("[[0,0,0,0,0,0,0,0,0,0],"));
        let back: Grid = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<Grid>("[[0,1]]").is_err());
    }
}
