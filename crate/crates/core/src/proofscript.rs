//! The proof-script text format.
//!
//! A script is a sequence of `theorem` and `declare` blocks, one statement
//! per line. [`parse`] builds a [`Script`] that still uses raw names,
//! [`Script`]'s `Display` prints it back in canonical layout, and
//! [`elaborate`] resolves names into kernel terms.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::geom::{canon_fact, canon_segment, Fact, GeomError, Point, RawFact};
use crate::kernel::{
    Branch, CaseKind, Close, CloseTarget, ConstructionKind, Proof, Ref, Registry, Step,
    StepKind, Tag, TheoremStatement,
};
use crate::rules::RuleId;

pub mod corpus;
pub mod mutation;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum FactAst {
    SegEq([String; 2], [String; 2]),
    AngEq([String; 3], [String; 3]),
    SegLt([String; 2], [String; 2]),
    AngLt([String; 3], [String; 3]),
    /// Written order: `between A D B` is `[A, D, B]`.
    Between([String; 3]),
    NonCollinear([String; 3]),
    AngleSum([String; 3]),
    Absurd,
}

impl FactAst {
    pub fn points(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        match self {
            FactAst::SegEq(s, t) | FactAst::SegLt(s, t) => {
                out.extend(s.iter().chain(t).map(String::as_str))
            }
            FactAst::AngEq(s, t) | FactAst::AngLt(s, t) => {
                out.extend(s.iter().chain(t).map(String::as_str))
            }
            FactAst::Between(t) | FactAst::NonCollinear(t) | FactAst::AngleSum(t) => {
                out.extend(t.iter().map(String::as_str))
            }
            FactAst::Absurd => {}
        }
        out
    }

    pub fn to_raw(&self) -> RawFact {
        let p = |s: &String| Point::new(s.as_str());
        let seg = |s: &[String; 2]| [p(&s[0]), p(&s[1])];
        let ang = |s: &[String; 3]| [p(&s[0]), p(&s[1]), p(&s[2])];
        match self {
            FactAst::SegEq(s, t) => RawFact::SegEq(seg(s), seg(t)),
            FactAst::AngEq(s, t) => RawFact::AngEq(ang(s), ang(t)),
            FactAst::SegLt(s, t) => RawFact::SegLt(seg(s), seg(t)),
            FactAst::AngLt(s, t) => RawFact::AngLt(ang(s), ang(t)),
            FactAst::Between([a, m, b]) => RawFact::Between(p(m), p(a), p(b)),
            FactAst::NonCollinear([a, b, c]) => RawFact::NonCollinear(p(a), p(b), p(c)),
            FactAst::AngleSum([a, b, c]) => RawFact::AngleSumStraight(p(a), p(b), p(c)),
            FactAst::Absurd => RawFact::Absurd,
        }
    }
}

impl fmt::Display for FactAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactAst::SegEq([a, b], [c, d]) => write!(f, "seg {a} {b} == seg {c} {d}"),
            FactAst::SegLt([a, b], [c, d]) => write!(f, "seg {a} {b} < seg {c} {d}"),
            FactAst::AngEq([a, b, c], [d, e, g]) => write!(f, "ang {a} {b} {c} == ang {d} {e} {g}"),
            FactAst::AngLt([a, b, c], [d, e, g]) => write!(f, "ang {a} {b} {c} < ang {d} {e} {g}"),
            FactAst::Between([a, b, c]) => write!(f, "between {a} {b} {c}"),
            FactAst::NonCollinear([a, b, c]) => write!(f, "noncollinear {a} {b} {c}"),
            FactAst::AngleSum([a, b, c]) => write!(f, "anglesum {a} {b} {c} == pi"),
            FactAst::Absurd => f.write_str("absurd"),
        }
    }
}

/// Rule instantiation as written: `[(A,B,C),(A,C,B)]` or `[A B C D]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum InstAst {
    Triples(Vec<[String; 3]>),
    Points(Vec<String>),
}

impl InstAst {
    pub fn flatten(&self) -> Vec<String> {
        match self {
            InstAst::Triples(ts) => ts.iter().flatten().cloned().collect(),
            InstAst::Points(ps) => ps.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CloseAst {
    pub target: CloseTarget,
    pub refs: Vec<Ref>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BranchAst {
    pub case: CaseKind,
    pub steps: Vec<StepAst>,
    pub close: CloseAst,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepBody {
    Rule { claims: Vec<FactAst>, rule: String, inst: InstAst, refs: Vec<Ref> },
    Extend { a: String, b: String, length: [String; 2], fresh: String },
    Layoff { from: String, toward: String, length: [String; 2], fresh: String, refs: Vec<Ref> },
    Cases { left: [String; 2], right: [String; 2], branches: Vec<BranchAst> },
    Lemma { name: String, args: Vec<String>, fresh: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepAst {
    pub label: String,
    pub body: StepBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProofAst {
    pub steps: Vec<StepAst>,
    pub qed: Vec<Ref>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct StatementAst {
    pub points: Vec<String>,
    pub assumes: Vec<(String, FactAst)>,
    pub introduce: Vec<String>,
    pub shows: Vec<FactAst>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TheoremAst {
    pub name: String,
    pub tags: Vec<Tag>,
    pub statement: StatementAst,
    pub proof: Option<ProofAst>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeclareAst {
    pub name: String,
    pub tags: Vec<Tag>,
    pub statement: Option<StatementAst>,
    pub uses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "block", rename_all = "snake_case")]
pub enum Item {
    Theorem(TheoremAst),
    Declare(DeclareAst),
}

impl Item {
    pub fn name(&self) -> &str {
        match self {
            Item::Theorem(t) => &t.name,
            Item::Declare(d) => &d.name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Script {
    pub items: Vec<Item>,
}

// ---------------------------------------------------------------------------
// Lexing

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(usize),
    Colon,
    Comma,
    LParen,
    RParen,
    LBrack,
    RBrack,
    Dot,
    Lt,
    EqEq,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(n) => write!(f, "`{n}`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrack => f.write_str("`[`"),
            Tok::RBrack => f.write_str("`]`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Lt => f.write_str("`<`"),
            Tok::EqEq => f.write_str("`==`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
}

#[derive(Debug)]
struct Line {
    no: usize,
    toks: Vec<Token>,
    end_col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("line {line}, column {col}: {message}")]
pub struct SyntaxError {
    /// 1-based.
    pub line: usize,
    /// 1-based, in characters.
    pub col: usize,
    pub expected: Vec<String>,
    pub found: String,
    pub message: String,
}

impl SyntaxError {
    fn new(line: usize, col: usize, expected: &[&str], found: String) -> Self {
        let expected: Vec<String> = expected.iter().map(|s| s.to_string()).collect();
        let message = match expected.len() {
            0 => format!("unexpected {found}"),
            1 => format!("expected {}, found {found}", expected[0]),
            _ => format!("expected one of {}, found {found}", expected.join(", ")),
        };
        SyntaxError { line, col, expected, found, message }
    }

    fn custom(line: usize, col: usize, message: String) -> Self {
        SyntaxError { line, col, expected: Vec::new(), found: String::new(), message }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

fn lex_line(no: usize, text: &str) -> Result<Line, SyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            ':' => Some(Tok::Colon),
            ',' => Some(Tok::Comma),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBrack),
            ']' => Some(Tok::RBrack),
            '.' => Some(Tok::Dot),
            '<' => Some(Tok::Lt),
            _ => None,
        };
        if let Some(tok) = single {
            toks.push(Token { tok, col });
            i += 1;
        } else if c == '=' {
            if chars.get(i + 1) != Some(&'=') {
                return Err(SyntaxError::new(no, col, &["`==`"], "`=`".into()));
            }
            toks.push(Token { tok: Tok::EqEq, col });
            i += 2;
        } else if is_ident_start(c) {
            let start = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            toks.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), col });
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().collect();
            let n = digits
                .parse()
                .map_err(|_| SyntaxError::custom(no, col, format!("number {digits} is too large")))?;
            toks.push(Token { tok: Tok::Num(n), col });
        } else {
            return Err(SyntaxError::new(no, col, &[], format!("character {c:?}")));
        }
    }
    Ok(Line { no, toks, end_col: chars.len() + 1 })
}

// ---------------------------------------------------------------------------
// Parsing

const RESERVED_LABELS: &[&str] = &["refl", "sym", "qed", "case", "close", "proof"];

struct Cursor<'a> {
    line: &'a Line,
    pos: usize,
}

type PResult<T> = Result<T, SyntaxError>;

impl<'a> Cursor<'a> {
    fn new(line: &'a Line) -> Self {
        Cursor { line, pos: 0 }
    }

    fn peek(&self) -> Option<&'a Tok> {
        self.line.toks.get(self.pos).map(|t| &t.tok)
    }

    fn col(&self) -> usize {
        self.line.toks.get(self.pos).map_or(self.line.end_col, |t| t.col)
    }

    fn found(&self) -> String {
        self.peek().map_or_else(|| "end of line".to_owned(), |t| t.to_string())
    }

    fn err(&self, expected: &[&str]) -> SyntaxError {
        SyntaxError::new(self.line.no, self.col(), expected, self.found())
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.at_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.err(&[&tok.to_string()]))
        }
    }

    fn keyword(&mut self, kw: &str) -> PResult<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.err(&[&format!("`{kw}`")]))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok(s.clone())
            }
            _ => Err(self.err(&[what])),
        }
    }

    fn end(&self) -> PResult<()> {
        if self.peek().is_none() {
            Ok(())
        } else {
            Err(self.err(&["end of line"]))
        }
    }

    fn points<const N: usize>(&mut self) -> PResult<[String; N]> {
        let mut out: [String; N] = std::array::from_fn(|_| String::new());
        for slot in out.iter_mut() {
            *slot = self.ident("point")?;
        }
        Ok(out)
    }

    fn fact(&mut self) -> PResult<FactAst> {
        let kw = match self.peek() {
            Some(Tok::Ident(s)) => s.as_str(),
            _ => return Err(self.err(&FACT_STARTS)),
        };
        self.pos += 1;
        Ok(match kw {
            "seg" => {
                let s = self.points::<2>()?;
                let lt = self.relation()?;
                self.keyword("seg")?;
                let t = self.points::<2>()?;
                if lt {
                    FactAst::SegLt(s, t)
                } else {
                    FactAst::SegEq(s, t)
                }
            }
            "ang" => {
                let s = self.points::<3>()?;
                let lt = self.relation()?;
                self.keyword("ang")?;
                let t = self.points::<3>()?;
                if lt {
                    FactAst::AngLt(s, t)
                } else {
                    FactAst::AngEq(s, t)
                }
            }
            "between" => FactAst::Between(self.points()?),
            "noncollinear" => FactAst::NonCollinear(self.points()?),
            "anglesum" => {
                let t = self.points()?;
                self.expect(Tok::EqEq)?;
                self.keyword("pi")?;
                FactAst::AngleSum(t)
            }
            "absurd" => FactAst::Absurd,
            _ => {
                self.pos -= 1;
                return Err(self.err(&FACT_STARTS));
            }
        })
    }

    /// Parses `==` or `<`; true for `<`.
    fn relation(&mut self) -> PResult<bool> {
        if self.eat(&Tok::EqEq) {
            Ok(false)
        } else if self.eat(&Tok::Lt) {
            Ok(true)
        } else {
            Err(self.err(&["`==`", "`<`"]))
        }
    }

    fn segterm(&mut self) -> PResult<[String; 2]> {
        self.keyword("seg")?;
        self.points()
    }

    fn label_ref(&mut self) -> PResult<(String, Option<usize>)> {
        let name = self.ident("label")?;
        if !self.eat(&Tok::Dot) {
            return Ok((name, None));
        }
        match self.peek() {
            Some(Tok::Num(n)) if *n >= 1 => {
                self.pos += 1;
                Ok((name, Some(*n)))
            }
            _ => Err(self.err(&["fact index (1, 2, ...)"])),
        }
    }

    fn refs(&mut self) -> PResult<Vec<Ref>> {
        let mut out = Vec::new();
        loop {
            if self.eat_keyword("refl") {
                out.push(Ref::Refl);
            } else if self.eat_keyword("sym") {
                let (name, index) = self.label_ref()?;
                out.push(Ref::Sym { name, index });
            } else {
                let (name, index) = self.label_ref()?;
                out.push(Ref::Label { name, index });
            }
            if !self.eat(&Tok::Comma) {
                return Ok(out);
            }
        }
    }

    fn ident_list(&mut self, what: &str) -> PResult<Vec<String>> {
        let mut out = vec![self.ident(what)?];
        while self.eat(&Tok::Comma) {
            out.push(self.ident(what)?);
        }
        Ok(out)
    }

    fn inst(&mut self) -> PResult<InstAst> {
        self.expect(Tok::LBrack)?;
        if self.peek() == Some(&Tok::LParen) {
            let mut triples = Vec::new();
            loop {
                self.expect(Tok::LParen)?;
                let a = self.ident("point")?;
                self.expect(Tok::Comma)?;
                let b = self.ident("point")?;
                self.expect(Tok::Comma)?;
                let c = self.ident("point")?;
                self.expect(Tok::RParen)?;
                triples.push([a, b, c]);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RBrack)?;
            Ok(InstAst::Triples(triples))
        } else {
            let mut points = vec![self.ident("point")?];
            while let Some(Tok::Ident(s)) = self.peek() {
                points.push(s.clone());
                self.pos += 1;
            }
            if self.peek() != Some(&Tok::RBrack) {
                return Err(self.err(&["point", "`]`"]));
            }
            self.pos += 1;
            Ok(InstAst::Points(points))
        }
    }
}

const FACT_STARTS: [&str; 6] =
    ["`seg`", "`ang`", "`between`", "`noncollinear`", "`anglesum`", "`absurd`"];

fn parse_tag(c: &mut Cursor<'_>) -> PResult<Tag> {
    if c.eat_keyword("neutral") {
        Ok(Tag::Neutral)
    } else if c.eat_keyword("euclidean") {
        Ok(Tag::Euclidean)
    } else {
        Err(c.err(&["`neutral`", "`euclidean`"]))
    }
}

struct Parser {
    lines: Vec<Line>,
    i: usize,
    /// Labels seen in the current theorem.
    labels: HashSet<String>,
}

impl Parser {
    fn peek_kw(&self) -> Option<&str> {
        match self.lines.get(self.i)?.toks.first()?.tok {
            Tok::Ident(ref s) => Some(s),
            _ => None,
        }
    }

    /// True if the current line starts with `IDENT :`.
    fn at_step(&self) -> bool {
        self.lines.get(self.i).is_some_and(|l| {
            matches!(l.toks.first(), Some(Token { tok: Tok::Ident(_), .. }))
                && matches!(l.toks.get(1), Some(Token { tok: Tok::Colon, .. }))
        })
    }

    fn eof_err(&self, expected: &[&str]) -> SyntaxError {
        let line = self.lines.last().map_or(1, |l| l.no + 1);
        SyntaxError::new(line, 1, expected, "end of input".into())
    }

    /// Cursor on the current line, whose first token must be `kw`.
    fn line(&mut self, kw: &str) -> PResult<Cursor<'_>> {
        let Some(line) = self.lines.get(self.i) else {
            return Err(self.eof_err(&[&format!("`{kw}`")]));
        };
        self.i += 1;
        let mut c = Cursor::new(line);
        c.keyword(kw)?;
        Ok(c)
    }

    fn script(&mut self) -> PResult<Script> {
        let mut items = Vec::new();
        while self.i < self.lines.len() {
            match self.peek_kw() {
                Some("theorem") => items.push(Item::Theorem(self.theorem()?)),
                Some("declare") => items.push(Item::Declare(self.declare()?)),
                _ => {
                    let line = &self.lines[self.i];
                    return Err(Cursor::new(line).err(&["`theorem`", "`declare`"]));
                }
            }
        }
        Ok(Script { items })
    }

    fn header(&mut self, kw: &str) -> PResult<(String, Vec<Tag>)> {
        let mut c = self.line(kw)?;
        let name = c.ident("name")?;
        c.end()?;
        let mut c = self.line("tags")?;
        c.expect(Tok::Colon)?;
        let mut tags = vec![parse_tag(&mut c)?];
        while c.eat(&Tok::Comma) {
            tags.push(parse_tag(&mut c)?);
        }
        c.end()?;
        Ok((name, tags))
    }

    fn define_label(&mut self, line: usize, col: usize, label: &str) -> PResult<()> {
        if RESERVED_LABELS.contains(&label) {
            return Err(SyntaxError::custom(line, col, format!("`{label}` is reserved")));
        }
        if !self.labels.insert(label.to_owned()) {
            return Err(SyntaxError::custom(line, col, format!("duplicate label {label}")));
        }
        Ok(())
    }

    fn statement(&mut self) -> PResult<StatementAst> {
        let mut st = StatementAst::default();
        let mut seen = HashSet::new();
        let mut c = self.line("points")?;
        loop {
            let col = c.col();
            let no = c.line.no;
            match c.peek() {
                Some(Tok::Ident(p)) => {
                    c.pos += 1;
                    if !seen.insert(p.clone()) {
                        return Err(SyntaxError::custom(no, col, format!("duplicate point {p}")));
                    }
                    st.points.push(p.clone());
                }
                None if !st.points.is_empty() => break,
                _ => return Err(c.err(&["point"])),
            }
        }
        while self.peek_kw() == Some("assume") {
            let mut c = self.line("assume")?;
            let (no, col) = (c.line.no, c.col());
            let label = c.ident("label")?;
            c.expect(Tok::Colon)?;
            let fact = c.fact()?;
            c.end()?;
            self.define_label(no, col, &label)?;
            st.assumes.push((label, fact));
        }
        if self.peek_kw() == Some("introduce") {
            let mut c = self.line("introduce")?;
            loop {
                let (no, col) = (c.line.no, c.col());
                match c.peek() {
                    Some(Tok::Ident(p)) => {
                        c.pos += 1;
                        if !seen.insert(p.clone()) {
                            return Err(SyntaxError::custom(
                                no,
                                col,
                                format!("duplicate point {p}"),
                            ));
                        }
                        st.introduce.push(p.clone());
                    }
                    None if !st.introduce.is_empty() => break,
                    _ => return Err(c.err(&["point"])),
                }
            }
        }
        loop {
            let mut c = self.line("show")?;
            st.shows.push(c.fact()?);
            c.end()?;
            if self.peek_kw() != Some("show") {
                break;
            }
        }
        Ok(st)
    }

    fn theorem(&mut self) -> PResult<TheoremAst> {
        self.labels.clear();
        let (name, tags) = self.header("theorem")?;
        let statement = self.statement()?;
        let proof = if self.peek_kw() == Some("proof") {
            self.line("proof")?.end()?;
            let steps = self.steps(&["qed"])?;
            let mut c = self.line("qed")?;
            c.keyword("from")?;
            let qed = c.refs()?;
            c.end()?;
            Some(ProofAst { steps, qed })
        } else {
            None
        };
        Ok(TheoremAst { name, tags, statement, proof })
    }

    fn declare(&mut self) -> PResult<DeclareAst> {
        self.labels.clear();
        let (name, tags) = self.header("declare")?;
        let statement =
            if self.peek_kw() == Some("points") { Some(self.statement()?) } else { None };
        let uses = if self.peek_kw() == Some("uses") {
            let mut c = self.line("uses")?;
            let uses = c.ident_list("name")?;
            c.end()?;
            uses
        } else {
            Vec::new()
        };
        Ok(DeclareAst { name, tags, statement, uses })
    }

    /// Steps until a line starting with one of `stop`.
    fn steps(&mut self, stop: &[&str]) -> PResult<Vec<StepAst>> {
        let mut steps = Vec::new();
        loop {
            if self.i >= self.lines.len() {
                let mut exp: Vec<String> = stop.iter().map(|s| format!("`{s}`")).collect();
                exp.push("step".into());
                let exp: Vec<&str> = exp.iter().map(String::as_str).collect();
                return Err(self.eof_err(&exp));
            }
            if !self.at_step() && self.peek_kw().is_some_and(|k| stop.contains(&k)) {
                return Ok(steps);
            }
            if !self.at_step() {
                let line = &self.lines[self.i];
                let mut exp: Vec<String> = vec!["label".into()];
                exp.extend(stop.iter().map(|s| format!("`{s}`")));
                let exp: Vec<&str> = exp.iter().map(String::as_str).collect();
                return Err(Cursor::new(line).err(&exp));
            }
            steps.push(self.step()?);
        }
    }

    fn step(&mut self) -> PResult<StepAst> {
        let line = &self.lines[self.i];
        self.i += 1;
        let mut c = Cursor::new(line);
        let (no, col) = (line.no, c.col());
        let label = c.ident("label")?;
        c.expect(Tok::Colon)?;
        let body = if c.eat_keyword("extend") {
            let a = c.ident("point")?;
            let b = c.ident("point")?;
            c.keyword("by")?;
            let length = c.segterm()?;
            c.keyword("as")?;
            let fresh = c.ident("point")?;
            c.end()?;
            StepBody::Extend { a, b, length, fresh }
        } else if c.eat_keyword("layoff") {
            let from = c.ident("point")?;
            c.keyword("toward")?;
            let toward = c.ident("point")?;
            c.keyword("by")?;
            let length = c.segterm()?;
            c.keyword("as")?;
            let fresh = c.ident("point")?;
            c.keyword("from")?;
            let refs = c.refs()?;
            c.end()?;
            StepBody::Layoff { from, toward, length, fresh, refs }
        } else if c.eat_keyword("lemma") {
            let name = c.ident("lemma name")?;
            c.expect(Tok::LParen)?;
            let args = c.ident_list("point")?;
            c.expect(Tok::RParen)?;
            let fresh = if c.eat_keyword("as") { c.ident_list("point")? } else { Vec::new() };
            c.end()?;
            StepBody::Lemma { name, args, fresh }
        } else if c.eat_keyword("cases") {
            let left = c.segterm()?;
            c.keyword("vs")?;
            let right = c.segterm()?;
            c.end()?;
            self.define_label(no, col, &label)?;
            let mut branches = Vec::new();
            for case in CaseKind::ALL {
                let mut c = self.line("case")?;
                c.keyword(case.name())?;
                c.end()?;
                let steps = self.steps(&["close"])?;
                let mut c = self.line("close")?;
                let target = if c.eat_keyword("goal") {
                    CloseTarget::Goal
                } else if c.eat_keyword("absurd") {
                    CloseTarget::Absurd
                } else {
                    return Err(c.err(&["`goal`", "`absurd`"]));
                };
                c.keyword("from")?;
                let refs = c.refs()?;
                c.end()?;
                branches.push(BranchAst { case, steps, close: CloseAst { target, refs } });
            }
            return Ok(StepAst { label, body: StepBody::Cases { left, right, branches } });
        } else {
            let mut claims = vec![c.fact()?];
            while c.eat(&Tok::Comma) {
                claims.push(c.fact()?);
            }
            c.keyword("by")?;
            let rule = c.ident("rule name")?;
            let inst = c.inst()?;
            let refs = if c.eat_keyword("from") { c.refs()? } else { Vec::new() };
            c.end()?;
            StepBody::Rule { claims, rule, inst, refs }
        };
        self.define_label(no, col, &label)?;
        Ok(StepAst { label, body })
    }
}

/// Parses a script.
pub fn parse(text: &str) -> Result<Script, SyntaxError> {
    let mut lines = Vec::new();
    for (i, raw) in text.split('\n').enumerate() {
        let line = lex_line(i + 1, raw)?;
        if !line.toks.is_empty() {
            lines.push(line);
        }
    }
    Parser { lines, i: 0, labels: HashSet::new() }.script()
}

/// Parses raw bytes, reporting invalid UTF-8 as a syntax error.
pub fn parse_bytes(bytes: &[u8]) -> Result<Script, SyntaxError> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse(text),
        Err(e) => {
            let valid = std::str::from_utf8(&bytes[..e.valid_up_to()]).unwrap_or_default();
            let line = valid.matches('\n').count() + 1;
            let col = valid.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
            Err(SyntaxError::custom(line, col, "invalid UTF-8".into()))
        }
    }
}

// ---------------------------------------------------------------------------
// Printing

fn write_refs(f: &mut fmt::Formatter<'_>, refs: &[Ref]) -> fmt::Result {
    for (i, r) in refs.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{r}")?;
    }
    Ok(())
}

fn write_steps(f: &mut fmt::Formatter<'_>, steps: &[StepAst], depth: usize) -> fmt::Result {
    let pad = "  ".repeat(depth);
    for step in steps {
        write!(f, "{pad}{}: ", step.label)?;
        match &step.body {
            StepBody::Rule { claims, rule, inst, refs } => {
                let claims: Vec<String> = claims.iter().map(ToString::to_string).collect();
                write!(f, "{} by {rule}[", claims.join(", "))?;
                match inst {
                    InstAst::Triples(ts) => {
                        let ts: Vec<String> =
                            ts.iter().map(|[a, b, c]| format!("({a},{b},{c})")).collect();
                        f.write_str(&ts.join(","))?;
                    }
                    InstAst::Points(ps) => f.write_str(&ps.join(" "))?,
                }
                f.write_str("]")?;
                if !refs.is_empty() {
                    f.write_str(" from ")?;
                    write_refs(f, refs)?;
                }
                writeln!(f)?;
            }
            StepBody::Extend { a, b, length: [p, q], fresh } => {
                writeln!(f, "extend {a} {b} by seg {p} {q} as {fresh}")?;
            }
            StepBody::Layoff { from, toward, length: [p, q], fresh, refs } => {
                write!(f, "layoff {from} toward {toward} by seg {p} {q} as {fresh} from ")?;
                write_refs(f, refs)?;
                writeln!(f)?;
            }
            StepBody::Lemma { name, args, fresh } => {
                write!(f, "lemma {name}({})", args.join(", "))?;
                if !fresh.is_empty() {
                    write!(f, " as {}", fresh.join(", "))?;
                }
                writeln!(f)?;
            }
            StepBody::Cases { left: [a, b], right: [c, d], branches } => {
                writeln!(f, "cases seg {a} {b} vs seg {c} {d}")?;
                for br in branches {
                    writeln!(f, "{pad}  case {}", br.case.name())?;
                    write_steps(f, &br.steps, depth + 2)?;
                    let target = match br.close.target {
                        CloseTarget::Goal => "goal",
                        CloseTarget::Absurd => "absurd",
                    };
                    write!(f, "{pad}    close {target} from ")?;
                    write_refs(f, &br.close.refs)?;
                    writeln!(f)?;
                }
            }
        }
    }
    Ok(())
}

fn write_tags(f: &mut fmt::Formatter<'_>, tags: &[Tag]) -> fmt::Result {
    let tags: Vec<String> = tags.iter().map(ToString::to_string).collect();
    writeln!(f, "  tags: {}", tags.join(", "))
}

impl fmt::Display for StatementAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "  points {}", self.points.join(" "))?;
        for (label, fact) in &self.assumes {
            writeln!(f, "  assume {label}: {fact}")?;
        }
        if !self.introduce.is_empty() {
            writeln!(f, "  introduce {}", self.introduce.join(" "))?;
        }
        for fact in &self.shows {
            writeln!(f, "  show {fact}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Item::Theorem(t) => {
                writeln!(f, "theorem {}", t.name)?;
                write_tags(f, &t.tags)?;
                write!(f, "{}", t.statement)?;
                if let Some(proof) = &t.proof {
                    writeln!(f, "  proof")?;
                    write_steps(f, &proof.steps, 2)?;
                    f.write_str("  qed from ")?;
                    write_refs(f, &proof.qed)?;
                    writeln!(f)?;
                }
            }
            Item::Declare(d) => {
                writeln!(f, "declare {}", d.name)?;
                write_tags(f, &d.tags)?;
                if let Some(st) = &d.statement {
                    write!(f, "{st}")?;
                }
                if !d.uses.is_empty() {
                    writeln!(f, "  uses {}", d.uses.join(", "))?;
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Script {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, item) in self.items.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{item}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Elaboration

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ElabError {
    /// `step` is the citing step's label, `qed`, or `<cases>/<case>/close`.
    #[error("{theorem}: step {step} cites unresolved label {label}")]
    UnresolvedLabel { theorem: String, step: String, label: String },
    #[error("{theorem}: unknown rule {rule}")]
    UnknownRule { theorem: String, rule: String },
    #[error("{theorem}: unknown lemma {lemma}")]
    UnknownLemma { theorem: String, lemma: String },
    #[error("{theorem}: point {point} is not declared")]
    UnknownPoint { theorem: String, point: String },
    #[error("{theorem}: {error}")]
    Degenerate { theorem: String, error: GeomError },
    #[error("{theorem}: conflicting statements with this name")]
    DuplicateStatement { theorem: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    /// A theorem with a proof.
    Theorem,
    /// A theorem without a proof; only model-checked.
    Conjecture,
    /// A declare block with `uses`: a dependency-only entry.
    Declared,
    /// A declare block without `uses`.
    Axiom,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Elaborated {
    pub kind: ItemKind,
    pub statement: TheoremStatement,
    pub proof: Option<Proof>,
    pub uses: Vec<String>,
}

impl Elaborated {
    pub fn name(&self) -> &str {
        &self.statement.name
    }
}

fn statement_of(
    name: &str,
    tags: &[Tag],
    st: Option<&StatementAst>,
) -> Result<TheoremStatement, ElabError> {
    let degenerate = |error| ElabError::Degenerate { theorem: name.to_owned(), error };
    let mut out = TheoremStatement {
        name: name.to_owned(),
        tags: tags.iter().copied().collect(),
        given: Vec::new(),
        hypotheses: Vec::new(),
        introduced: Vec::new(),
        conclusions: Vec::new(),
    };
    let Some(st) = st else { return Ok(out) };
    let declared: BTreeSet<&str> =
        st.points.iter().chain(&st.introduce).map(String::as_str).collect();
    let check = |fact: &FactAst| -> Result<Fact, ElabError> {
        if let Some(p) = fact.points().into_iter().find(|p| !declared.contains(p)) {
            return Err(ElabError::UnknownPoint { theorem: name.to_owned(), point: p.to_owned() });
        }
        canon_fact(&fact.to_raw()).map_err(degenerate)
    };
    out.given = st.points.iter().map(|p| Point::new(p.as_str())).collect();
    out.introduced = st.introduce.iter().map(|p| Point::new(p.as_str())).collect();
    for (label, fact) in &st.assumes {
        if let Some(p) = fact.points().into_iter().find(|p| !st.points.iter().any(|q| q == p)) {
            return Err(ElabError::UnknownPoint { theorem: name.to_owned(), point: p.to_owned() });
        }
        out.hypotheses.push((label.clone(), check(fact)?));
    }
    for fact in &st.shows {
        out.conclusions.push(check(fact)?);
    }
    Ok(out)
}

fn item_statement(item: &Item) -> Result<TheoremStatement, ElabError> {
    match item {
        Item::Theorem(t) => statement_of(&t.name, &t.tags, Some(&t.statement)),
        Item::Declare(d) => statement_of(&d.name, &d.tags, d.statement.as_ref()),
    }
}

/// Collects every statement with conclusions so proofs can cite them as
/// lemmas. Scripts may reference each other in any order.
pub fn build_registry<'a>(
    scripts: impl IntoIterator<Item = &'a Script>,
) -> Result<Registry, ElabError> {
    let mut registry = Registry::new();
    for script in scripts {
        for item in &script.items {
            let st = item_statement(item)?;
            if st.conclusions.is_empty() {
                continue;
            }
            if let Some(prev) = registry.get(&st.name) {
                if *prev != st {
                    return Err(ElabError::DuplicateStatement { theorem: st.name });
                }
            }
            registry.insert(st);
        }
    }
    Ok(registry)
}

struct Elaborator<'a> {
    theorem: &'a str,
    registry: &'a Registry,
}

impl Elaborator<'_> {
    fn fact(&self, fact: &FactAst) -> Result<Fact, ElabError> {
        canon_fact(&fact.to_raw())
            .map_err(|error| ElabError::Degenerate { theorem: self.theorem.to_owned(), error })
    }

    fn segment(&self, [p, q]: &[String; 2]) -> Result<crate::geom::Segment, ElabError> {
        canon_segment(&Point::new(p.as_str()), &Point::new(q.as_str()))
            .map_err(|error| ElabError::Degenerate { theorem: self.theorem.to_owned(), error })
    }

    fn refs(&self, at: &str, refs: &[Ref], scope: &HashSet<String>) -> Result<(), ElabError> {
        for name in refs.iter().filter_map(Ref::label_name) {
            if !scope.contains(name) {
                return Err(ElabError::UnresolvedLabel {
                    theorem: self.theorem.to_owned(),
                    step: at.to_owned(),
                    label: name.to_owned(),
                });
            }
        }
        Ok(())
    }

    fn steps(
        &self,
        steps: &[StepAst],
        scope: &mut HashSet<String>,
    ) -> Result<Vec<Step>, ElabError> {
        let pts = |v: &[String]| v.iter().map(|p| Point::new(p.as_str())).collect::<Vec<_>>();
        let mut out = Vec::new();
        for step in steps {
            let kind = match &step.body {
                StepBody::Rule { claims, rule, inst, refs } => {
                    let rule: RuleId = rule.parse().map_err(|_| ElabError::UnknownRule {
                        theorem: self.theorem.to_owned(),
                        rule: rule.clone(),
                    })?;
                    self.refs(&step.label, refs, scope)?;
                    StepKind::Rule {
                        claims: claims.iter().map(|c| self.fact(c)).collect::<Result<_, _>>()?,
                        rule,
                        inst: pts(&inst.flatten()),
                        refs: refs.clone(),
                    }
                }
                StepBody::Extend { a, b, length, fresh } => StepKind::Construct {
                    kind: ConstructionKind::Extend {
                        a: Point::new(a.as_str()),
                        b: Point::new(b.as_str()),
                        length: self.segment(length)?,
                    },
                    fresh: Point::new(fresh.as_str()),
                    refs: Vec::new(),
                },
                StepBody::Layoff { from, toward, length, fresh, refs } => {
                    self.refs(&step.label, refs, scope)?;
                    StepKind::Construct {
                        kind: ConstructionKind::Layoff {
                            from: Point::new(from.as_str()),
                            toward: Point::new(toward.as_str()),
                            length: self.segment(length)?,
                        },
                        fresh: Point::new(fresh.as_str()),
                        refs: refs.clone(),
                    }
                }
                StepBody::Lemma { name, args, fresh } => {
                    if !self.registry.contains(name) {
                        return Err(ElabError::UnknownLemma {
                            theorem: self.theorem.to_owned(),
                            lemma: name.clone(),
                        });
                    }
                    StepKind::Lemma { name: name.clone(), args: pts(args), fresh: pts(fresh) }
                }
                StepBody::Cases { left, right, branches } => {
                    let mut out_branches = Vec::new();
                    for br in branches {
                        let mut inner = scope.clone();
                        inner.insert(step.label.clone());
                        let steps = self.steps(&br.steps, &mut inner)?;
                        let at = format!("{}/{}/close", step.label, br.case.name());
                        self.refs(&at, &br.close.refs, &inner)?;
                        out_branches.push(Branch {
                            case: br.case,
                            steps,
                            close: Close { target: br.close.target, refs: br.close.refs.clone() },
                        });
                    }
                    StepKind::Cases {
                        left: self.segment(left)?,
                        right: self.segment(right)?,
                        branches: out_branches,
                    }
                }
            };
            scope.insert(step.label.clone());
            out.push(Step { label: step.label.clone(), kind });
        }
        Ok(out)
    }
}

/// Resolves one parsed block against `registry`.
pub fn elaborate_item(item: &Item, registry: &Registry) -> Result<Elaborated, ElabError> {
    let statement = item_statement(item)?;
    Ok(match item {
        Item::Theorem(t) => match &t.proof {
            Some(proof) => {
                let el = Elaborator { theorem: &t.name, registry };
                let mut scope: HashSet<String> =
                    t.statement.assumes.iter().map(|(l, _)| l.clone()).collect();
                let steps = el.steps(&proof.steps, &mut scope)?;
                el.refs("qed", &proof.qed, &scope)?;
                Elaborated {
                    kind: ItemKind::Theorem,
                    statement,
                    proof: Some(Proof { steps, qed: proof.qed.clone() }),
                    uses: Vec::new(),
                }
            }
            None => {
                Elaborated { kind: ItemKind::Conjecture, statement, proof: None, uses: Vec::new() }
            }
        },
        Item::Declare(d) => Elaborated {
            kind: if d.uses.is_empty() { ItemKind::Axiom } else { ItemKind::Declared },
            statement,
            proof: None,
            uses: d.uses.clone(),
        },
    })
}

/// Resolves a parsed script against `registry`.
pub fn elaborate(script: &Script, registry: &Registry) -> Result<Vec<Elaborated>, ElabError> {
    script.items.iter().map(|item| elaborate_item(item, registry)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const PONS: &str = "theorem t\n tags: neutral\n points A B C\n assume h1: seg A B == seg A C\n show ang A B C == ang A C B\n proof\n  s1: ang A B C == ang A C B by SAS_ORD[(A,B,C),(A,C,B)] from h1, h1, refl\n qed from s1\n";

    #[test]
    fn parses_the_grammar_example() {
        let script = parse(PONS).unwrap();
        assert_eq!(script.items.len(), 1);
        let Item::Theorem(t) = &script.items[0] else { panic!() };
        assert_eq!(t.name, "t");
        assert_eq!(t.statement.points, ["A", "B", "C"]);
        let proof = t.proof.as_ref().unwrap();
        assert_eq!(proof.steps.len(), 1);
        match &proof.steps[0].body {
            StepBody::Rule { rule, inst, refs, .. } => {
                assert_eq!(rule, "SAS_ORD");
                assert_eq!(inst.flatten(), ["A", "B", "C", "A", "C", "B"]);
                assert_eq!(refs.len(), 3);
                assert_eq!(refs[2], Ref::Refl);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_input_is_an_empty_script() {
        assert_eq!(parse("").unwrap(), Script::default());
        assert_eq!(parse("\n  # only a comment\n").unwrap(), Script::default());
    }

    #[test]
    fn duplicate_point_is_rejected() {
        let err = parse("theorem t\n tags: neutral\n points A A\n show absurd\n").unwrap_err();
        assert_eq!((err.line, err.col), (3, 11));
        assert!(err.message.contains("duplicate point A"), "{err}");
    }

    #[test]
    fn duplicate_label_is_rejected() {
        let src = PONS.replace("qed from s1", "  h1: ang A B C == ang A C B by ANG_REFL[A B C]\n qed from s1");
        let err = parse(&src).unwrap_err();
        assert!(err.message.contains("duplicate label h1"), "{err}");
    }

    #[test]
    fn errors_carry_position_and_expected_set() {
        let err = parse("theorem t\n tags: neutral\n points A B C\n show seg A B = seg A C\n")
            .unwrap_err();
        assert_eq!((err.line, err.col), (4, 15));
        assert_eq!(err.expected, ["`==`"]);

        let err = parse("lemma x\n").unwrap_err();
        assert_eq!(err.expected, ["`theorem`", "`declare`"]);
        assert_eq!(err.found, "`lemma`");

        let err = parse("theorem t\n tags: neutral\n points A B C\n").unwrap_err();
        assert_eq!(err.line, 4);
        assert_eq!(err.found, "end of input");
    }

    #[test]
    fn invalid_utf8_is_a_syntax_error() {
        let err = parse_bytes(b"theorem t\n ta\xffgs").unwrap_err();
        assert_eq!((err.line, err.col), (2, 4));
    }

    #[test]
    fn printing_round_trips() {
        let script = parse(PONS).unwrap();
        let printed = script.to_string();
        assert_eq!(parse(&printed).unwrap(), script);
        assert_eq!(parse(&printed).unwrap().to_string(), printed);
    }

    #[test]
    fn elaborates_pappus_statement() {
        let src = corpus::source("pappus_pons.proof").unwrap();
        let script = parse(src).unwrap();
        let registry = build_registry([&script]).unwrap();
        let items = elaborate(&script, &registry).unwrap();
        let st = &items[0].statement;
        let p = |s: &str| Point::new(s);
        let ab = canon_segment(&p("A"), &p("B")).unwrap();
        let ac = canon_segment(&p("A"), &p("C")).unwrap();
        let hyps: BTreeSet<Fact> = st.hypothesis_facts().cloned().collect();
        let expected: BTreeSet<Fact> = [
            Fact::seg_eq(ab, ac),
            Fact::non_collinear(&p("A"), &p("B"), &p("C")).unwrap(),
        ]
        .into();
        assert_eq!(hyps, expected);
        let goal = canon_fact(&RawFact::AngEq(
            [p("A"), p("B"), p("C")],
            [p("A"), p("C"), p("B")],
        ))
        .unwrap();
        assert_eq!(st.conclusions, [goal]);
    }

    #[test]
    fn undefined_label_is_unresolved() {
        let src = PONS.replace("from h1, h1, refl", "from h1, s9, refl");
        let script = parse(&src).unwrap();
        let err = elaborate(&script, &Registry::new()).unwrap_err();
        assert_eq!(
            err,
            ElabError::UnresolvedLabel { theorem: "t".into(), step: "s1".into(), label: "s9".into() }
        );
    }

    #[test]
    fn later_labels_are_not_in_scope() {
        let src = PONS.replace(
            "qed from s1",
            "  s2: ang A B C == ang A C B by ANG_SYM[A B C A C B] from s3\n  s3: ang A B C == ang A B C by ANG_REFL[A B C]\n qed from s1",
        );
        let err = elaborate(&parse(&src).unwrap(), &Registry::new()).unwrap_err();
        assert!(matches!(err, ElabError::UnresolvedLabel { ref label, .. } if label == "s3"));
    }

    #[test]
    fn unknown_rule_and_lemma() {
        let src = PONS.replace("SAS_ORD", "SSS");
        let err = elaborate(&parse(&src).unwrap(), &Registry::new()).unwrap_err();
        assert!(matches!(err, ElabError::UnknownRule { ref rule, .. } if rule == "SSS"));

        let src = PONS.replace(
            "qed from s1",
            "  s2: lemma nowhere(A, B, C) as H\n qed from s1",
        );
        let err = elaborate(&parse(&src).unwrap(), &Registry::new()).unwrap_err();
        assert!(matches!(err, ElabError::UnknownLemma { ref lemma, .. } if lemma == "nowhere"));
    }

    #[test]
    fn declare_block_has_no_steps() {
        let src = "declare d\n tags: euclidean\n uses x, y\n\ndeclare x\n tags: euclidean\n";
        let script = parse(src).unwrap();
        let items = elaborate(&script, &Registry::new()).unwrap();
        assert_eq!(items[0].kind, ItemKind::Declared);
        assert!(items[0].proof.is_none());
        assert_eq!(items[0].uses, ["x", "y"]);
        assert_eq!(items[1].kind, ItemKind::Axiom);
        assert!(items[1].statement.tags.contains(&Tag::Euclidean));
    }

    #[test]
    fn statement_points_must_be_declared() {
        let src = "theorem t\n tags: neutral\n points A B C\n show seg A B == seg A D\n";
        let err = elaborate(&parse(src).unwrap(), &Registry::new()).unwrap_err();
        assert!(matches!(err, ElabError::UnknownPoint { ref point, .. } if point == "D"));
    }

    #[test]
    fn cases_label_scoping() {
        let src = "theorem t\n tags: neutral\n points A B C\n show seg A B == seg A B\n proof\n  c1: cases seg A B vs seg A C\n   case lt\n    close goal from c1, g1\n   case eq\n    close goal from c1\n   case gt\n    g1: seg A B == seg A B by SEG_REFL[A B]\n    close goal from g1\n qed from c1\n";
        let err = elaborate(&parse(src).unwrap(), &Registry::new()).unwrap_err();
        assert!(matches!(err, ElabError::UnresolvedLabel { ref label, .. } if label == "g1"));
    }
}
