//! Symbolic geometry terms: points, segments, angles and the normalized
//! facts the kernel reasons about.
//!
//! Every term has exactly one canonical value. Segments and angle arms are
//! unordered pairs stored in lexicographic name order, so `seg(A,B)` and
//! `seg(B,A)` compare equal, and `ang(B,A,C)` is the same value as
//! `ang(C,A,B)`. Equality facts sort their two sides, which makes symmetry of
//! congruence a property of representation rather than something a proof has
//! to cite.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeomError {
    #[error("degenerate segment {0}{0}")]
    DegenerateSegment(Point),
    #[error("degenerate angle {0}{1}{2}")]
    DegenerateAngle(Point, Point, Point),
    #[error("degenerate betweenness: {mid} between {a} and {b}")]
    DegenerateBetween { mid: Point, a: Point, b: Point },
    #[error("noncollinear needs three distinct points, got {0} {1} {2}")]
    DegenerateTriple(Point, Point, Point),
}

/// A named point. Names compare lexicographically; that order fixes every
/// canonical form in this module.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(String);

impl Point {
    pub fn new(name: impl Into<String>) -> Self {
        Point(name.into())
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Point {
    fn from(s: &str) -> Self {
        Point(s.to_owned())
    }
}

/// How a point entered a proof's scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointOrigin {
    Hypothesis,
    Constructed,
    LemmaIntroduced,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Segment {
    a: Point,
    b: Point,
}

impl Segment {
    pub fn endpoints(&self) -> (&Point, &Point) {
        (&self.a, &self.b)
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "seg {} {}", self.a, self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Angle {
    vertex: Point,
    arms: (Point, Point),
}

impl Angle {
    pub fn vertex(&self) -> &Point {
        &self.vertex
    }

    pub fn arms(&self) -> (&Point, &Point) {
        (&self.arms.0, &self.arms.1)
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ang {} {} {}", self.arms.0, self.vertex, self.arms.1)
    }
}

pub fn canon_segment(p: &Point, q: &Point) -> Result<Segment, GeomError> {
    if p == q {
        return Err(GeomError::DegenerateSegment(p.clone()));
    }
    let (a, b) = if p < q { (p, q) } else { (q, p) };
    Ok(Segment { a: a.clone(), b: b.clone() })
}

pub fn canon_angle(p: &Point, v: &Point, q: &Point) -> Result<Angle, GeomError> {
    if p == v || q == v || p == q {
        return Err(GeomError::DegenerateAngle(p.clone(), v.clone(), q.clone()));
    }
    let arms = if p < q { (p.clone(), q.clone()) } else { (q.clone(), p.clone()) };
    Ok(Angle { vertex: v.clone(), arms })
}

/// A fact before canonicalization, written over raw point tuples. Angle
/// tuples are `(arm, vertex, arm)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawFact {
    SegEq([Point; 2], [Point; 2]),
    AngEq([Point; 3], [Point; 3]),
    SegLt([Point; 2], [Point; 2]),
    AngLt([Point; 3], [Point; 3]),
    /// `Between(mid, a, b)`: `mid` strictly between `a` and `b`.
    Between(Point, Point, Point),
    NonCollinear(Point, Point, Point),
    /// The three angles of a triangle add up to a straight angle. Only
    /// conjectures use it; no kernel rule concludes it.
    AngleSumStraight(Point, Point, Point),
    Absurd,
}

/// A normalized atomic judgment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Fact {
    SegEq(Segment, Segment),
    AngEq(Angle, Angle),
    SegLt(Segment, Segment),
    AngLt(Angle, Angle),
    Between { mid: Point, outer: (Point, Point) },
    NonCollinear([Point; 3]),
    AngleSumStraight([Point; 3]),
    Absurd,
}

fn sorted_pair<T: Ord>(x: T, y: T) -> (T, T) {
    if x <= y {
        (x, y)
    } else {
        (y, x)
    }
}

fn distinct_triple(a: &Point, b: &Point, c: &Point) -> Result<[Point; 3], GeomError> {
    if a == b || b == c || a == c {
        return Err(GeomError::DegenerateTriple(a.clone(), b.clone(), c.clone()));
    }
    let mut t = [a.clone(), b.clone(), c.clone()];
    t.sort();
    Ok(t)
}

impl Fact {
    pub fn seg_eq(s: Segment, t: Segment) -> Fact {
        let (s, t) = sorted_pair(s, t);
        Fact::SegEq(s, t)
    }

    pub fn ang_eq(s: Angle, t: Angle) -> Fact {
        let (s, t) = sorted_pair(s, t);
        Fact::AngEq(s, t)
    }

    pub fn between(mid: &Point, a: &Point, b: &Point) -> Result<Fact, GeomError> {
        if mid == a || mid == b || a == b {
            return Err(GeomError::DegenerateBetween {
                mid: mid.clone(),
                a: a.clone(),
                b: b.clone(),
            });
        }
        Ok(Fact::Between { mid: mid.clone(), outer: sorted_pair(a.clone(), b.clone()) })
    }

    pub fn non_collinear(a: &Point, b: &Point, c: &Point) -> Result<Fact, GeomError> {
        Ok(Fact::NonCollinear(distinct_triple(a, b, c)?))
    }

    /// Every point mentioned by the fact, in canonical order, possibly with
    /// repeats.
    pub fn points(&self) -> Vec<&Point> {
        match self {
            Fact::SegEq(s, t) | Fact::SegLt(s, t) => vec![&s.a, &s.b, &t.a, &t.b],
            Fact::AngEq(s, t) | Fact::AngLt(s, t) => vec![
                &s.arms.0, &s.vertex, &s.arms.1, &t.arms.0, &t.vertex, &t.arms.1,
            ],
            Fact::Between { mid, outer } => vec![&outer.0, mid, &outer.1],
            Fact::NonCollinear(t) | Fact::AngleSumStraight(t) => t.iter().collect(),
            Fact::Absurd => Vec::new(),
        }
    }

    /// True for `SegEq(s,s)` and `AngEq(a,a)`.
    pub fn is_reflexive(&self) -> bool {
        match self {
            Fact::SegEq(s, t) => s == t,
            Fact::AngEq(s, t) => s == t,
            _ => false,
        }
    }

    pub fn to_raw(&self) -> RawFact {
        let seg = |s: &Segment| [s.a.clone(), s.b.clone()];
        let ang = |s: &Angle| [s.arms.0.clone(), s.vertex.clone(), s.arms.1.clone()];
        match self {
            Fact::SegEq(s, t) => RawFact::SegEq(seg(s), seg(t)),
            Fact::AngEq(s, t) => RawFact::AngEq(ang(s), ang(t)),
            Fact::SegLt(s, t) => RawFact::SegLt(seg(s), seg(t)),
            Fact::AngLt(s, t) => RawFact::AngLt(ang(s), ang(t)),
            Fact::Between { mid, outer } => {
                RawFact::Between(mid.clone(), outer.0.clone(), outer.1.clone())
            }
            Fact::NonCollinear([a, b, c]) => RawFact::NonCollinear(a.clone(), b.clone(), c.clone()),
            Fact::AngleSumStraight([a, b, c]) => {
                RawFact::AngleSumStraight(a.clone(), b.clone(), c.clone())
            }
            Fact::Absurd => RawFact::Absurd,
        }
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fact::SegEq(s, t) => write!(f, "{s} == {t}"),
            Fact::AngEq(s, t) => write!(f, "{s} == {t}"),
            Fact::SegLt(s, t) => write!(f, "{s} < {t}"),
            Fact::AngLt(s, t) => write!(f, "{s} < {t}"),
            Fact::Between { mid, outer } => write!(f, "between {} {} {}", outer.0, mid, outer.1),
            Fact::NonCollinear([a, b, c]) => write!(f, "noncollinear {a} {b} {c}"),
            Fact::AngleSumStraight([a, b, c]) => write!(f, "anglesum {a} {b} {c} == pi"),
            Fact::Absurd => f.write_str("absurd"),
        }
    }
}

pub fn canon_fact(raw: &RawFact) -> Result<Fact, GeomError> {
    let seg = |[p, q]: &[Point; 2]| canon_segment(p, q);
    let ang = |[p, v, q]: &[Point; 3]| canon_angle(p, v, q);
    Ok(match raw {
        RawFact::SegEq(s, t) => Fact::seg_eq(seg(s)?, seg(t)?),
        RawFact::AngEq(s, t) => Fact::ang_eq(ang(s)?, ang(t)?),
        RawFact::SegLt(s, t) => Fact::SegLt(seg(s)?, seg(t)?),
        RawFact::AngLt(s, t) => Fact::AngLt(ang(s)?, ang(t)?),
        RawFact::Between(m, a, b) => Fact::between(m, a, b)?,
        RawFact::NonCollinear(a, b, c) => Fact::non_collinear(a, b, c)?,
        RawFact::AngleSumStraight(a, b, c) => Fact::AngleSumStraight(distinct_triple(a, b, c)?),
        RawFact::Absurd => Fact::Absurd,
    })
}

/// Lines known so far, as point sets closed under "two lines sharing two
/// points are one line".
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LineTable {
    lines: BTreeSet<BTreeSet<Point>>,
}

impl LineTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn lines(&self) -> impl Iterator<Item = &BTreeSet<Point>> {
        self.lines.iter()
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// Returns the table extended by a betweenness fact. Other fact kinds
    /// leave the table unchanged.
    pub fn record_between(&self, fact: &Fact) -> LineTable {
        let Fact::Between { mid, outer } = fact else {
            return self.clone();
        };
        let mut merged: BTreeSet<Point> =
            [mid.clone(), outer.0.clone(), outer.1.clone()].into_iter().collect();
        let mut rest: Vec<BTreeSet<Point>> = Vec::with_capacity(self.lines.len());
        let mut pending: Vec<BTreeSet<Point>> = self.lines.iter().cloned().collect();
        // Absorbing one line can create a new two-point overlap with a line
        // already set aside, so sweep until nothing changes.
        loop {
            let before = merged.len();
            for line in pending.drain(..) {
                if line.intersection(&merged).take(2).count() >= 2 {
                    merged.extend(line);
                } else {
                    rest.push(line);
                }
            }
            if merged.len() == before {
                break;
            }
            std::mem::swap(&mut pending, &mut rest);
        }
        let mut lines: BTreeSet<BTreeSet<Point>> = rest.into_iter().collect();
        lines.insert(merged);
        LineTable { lines }
    }

    /// True iff one stored line contains every given point.
    pub fn on_one_line(&self, points: &[&Point]) -> bool {
        self.lines.iter().any(|line| points.iter().all(|p| line.contains(*p)))
    }

    pub fn provably_collinear(&self, a: &Point, b: &Point, c: &Point) -> bool {
        self.on_one_line(&[a, b, c])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Point {
        Point::new(s)
    }

    fn set(names: &[&str]) -> BTreeSet<Point> {
        names.iter().map(|n| p(n)).collect()
    }

    fn between(m: &str, a: &str, b: &str) -> Fact {
        Fact::between(&p(m), &p(a), &p(b)).unwrap()
    }

    #[test]
    fn segment_is_unordered() {
        let ab = canon_segment(&p("A"), &p("B")).unwrap();
        assert_eq!(ab.endpoints(), (&p("A"), &p("B")));
        assert_eq!(canon_segment(&p("B"), &p("A")).unwrap(), ab);
        assert_eq!(canon_segment(&p("A"), &p("A")), Err(GeomError::DegenerateSegment(p("A"))));
    }

    #[test]
    fn angle_arms_are_unordered() {
        let bac = canon_angle(&p("B"), &p("A"), &p("C")).unwrap();
        assert_eq!(bac.vertex(), &p("A"));
        assert_eq!(bac.arms(), (&p("B"), &p("C")));
        assert_eq!(canon_angle(&p("C"), &p("A"), &p("B")).unwrap(), bac);
        assert!(matches!(
            canon_angle(&p("B"), &p("A"), &p("B")),
            Err(GeomError::DegenerateAngle(..))
        ));
        assert!(canon_angle(&p("A"), &p("A"), &p("B")).is_err());
    }

    #[test]
    fn canon_fact_sorts_sides() {
        let raw = RawFact::SegEq([p("C"), p("A")], [p("A"), p("B")]);
        let f = canon_fact(&raw).unwrap();
        assert_eq!(f.to_string(), "seg A B == seg A C");
        assert_eq!(canon_fact(&f.to_raw()).unwrap(), f);

        let f = canon_fact(&RawFact::Between(p("D"), p("B"), p("A"))).unwrap();
        assert_eq!(f, Fact::Between { mid: p("D"), outer: (p("A"), p("B")) });
        assert_eq!(f.to_string(), "between A D B");
    }

    #[test]
    fn lt_facts_keep_their_direction() {
        let f = canon_fact(&RawFact::SegLt([p("C"), p("A")], [p("B"), p("A")])).unwrap();
        assert_eq!(f.to_string(), "seg A C < seg A B");
    }

    #[test]
    fn degenerate_facts_are_rejected() {
        assert!(canon_fact(&RawFact::Between(p("A"), p("A"), p("B"))).is_err());
        assert!(canon_fact(&RawFact::NonCollinear(p("A"), p("B"), p("A"))).is_err());
        assert!(canon_fact(&RawFact::SegEq([p("A"), p("A")], [p("A"), p("B")])).is_err());
    }

    #[test]
    fn record_between_examples() {
        let t = LineTable::new().record_between(&between("B", "A", "D"));
        assert_eq!(t.lines().cloned().collect::<Vec<_>>(), vec![set(&["A", "B", "D"])]);

        let merged = t.record_between(&between("D", "B", "F"));
        assert_eq!(merged.lines().cloned().collect::<Vec<_>>(), vec![set(&["A", "B", "D", "F"])]);

        let two = t.record_between(&between("H", "B", "C"));
        let lines: BTreeSet<_> = two.lines().cloned().collect();
        assert_eq!(lines, [set(&["A", "B", "D"]), set(&["B", "C", "H"])].into_iter().collect());
    }

    #[test]
    fn record_between_chains_merges() {
        // {A,R,Z} is visited before {P,Q,Z} and only meets the new line in R;
        // it joins once {P,Q,Z} has been absorbed.
        let t = LineTable::new()
            .record_between(&between("Q", "P", "Z"))
            .record_between(&between("R", "A", "Z"));
        assert_eq!(t.len(), 2);
        let t = t.record_between(&between("R", "P", "Q"));
        assert_eq!(t.lines().cloned().collect::<Vec<_>>(), vec![set(&["A", "P", "Q", "R", "Z"])]);
    }

    #[test]
    fn collinearity_queries() {
        let t = LineTable::new().record_between(&between("B", "A", "D"));
        assert!(t.provably_collinear(&p("A"), &p("B"), &p("D")));
        assert!(!t.provably_collinear(&p("A"), &p("B"), &p("C")));
        assert!(!LineTable::new().provably_collinear(&p("A"), &p("B"), &p("C")));
    }
}
