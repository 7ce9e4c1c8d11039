//! The closed inventory of kernel inference rules.
//!
//! A rule is a list of point variables and one or more forms. Each form has
//! premise templates (cited by the proof), side conditions (discharged by the
//! kernel, never cited) and conclusion templates. Instantiation is
//! positional: the proof script lists one point per variable, in the order of
//! [`RuleSchema::vars`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geom::{canon_fact, Fact, GeomError, Point, RawFact};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RuleId {
    SegRefl,
    AngRefl,
    SegSym,
    AngSym,
    SegTrans,
    AngTrans,
    SasOrd,
    AsaOrd,
    SegSum,
    SuppCong,
    ArmSubst,
    AngSum,
    WholePartSeg,
    WholePartAng,
    LtSubstSeg,
    LtSubstAng,
    AbsurdLtEqSeg,
    AbsurdLtEqAng,
    NcTransfer,
}

impl RuleId {
    pub const ALL: [RuleId; 19] = [
        RuleId::SegRefl,
        RuleId::AngRefl,
        RuleId::SegSym,
        RuleId::AngSym,
        RuleId::SegTrans,
        RuleId::AngTrans,
        RuleId::SasOrd,
        RuleId::AsaOrd,
        RuleId::SegSum,
        RuleId::SuppCong,
        RuleId::ArmSubst,
        RuleId::AngSum,
        RuleId::WholePartSeg,
        RuleId::WholePartAng,
        RuleId::LtSubstSeg,
        RuleId::LtSubstAng,
        RuleId::AbsurdLtEqSeg,
        RuleId::AbsurdLtEqAng,
        RuleId::NcTransfer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleId::SegRefl => "SEG_REFL",
            RuleId::AngRefl => "ANG_REFL",
            RuleId::SegSym => "SEG_SYM",
            RuleId::AngSym => "ANG_SYM",
            RuleId::SegTrans => "SEG_TRANS",
            RuleId::AngTrans => "ANG_TRANS",
            RuleId::SasOrd => "SAS_ORD",
            RuleId::AsaOrd => "ASA_ORD",
            RuleId::SegSum => "SEG_SUM",
            RuleId::SuppCong => "SUPP_CONG",
            RuleId::ArmSubst => "ARM_SUBST",
            RuleId::AngSum => "ANG_SUM",
            RuleId::WholePartSeg => "WHOLE_PART_SEG",
            RuleId::WholePartAng => "WHOLE_PART_ANG",
            RuleId::LtSubstSeg => "LT_SUBST_SEG",
            RuleId::LtSubstAng => "LT_SUBST_ANG",
            RuleId::AbsurdLtEqSeg => "ABSURD_LT_EQ_SEG",
            RuleId::AbsurdLtEqAng => "ABSURD_LT_EQ_ANG",
            RuleId::NcTransfer => "NC_TRANSFER",
        }
    }

    pub fn schema(self) -> RuleSchema {
        schema(self)
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownRuleName(pub String);

impl FromStr for RuleId {
    type Err = UnknownRuleName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RuleId::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| UnknownRuleName(s.to_owned()))
    }
}

/// A fact pattern over variable indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pat {
    SegEq([usize; 2], [usize; 2]),
    AngEq([usize; 3], [usize; 3]),
    SegLt([usize; 2], [usize; 2]),
    AngLt([usize; 3], [usize; 3]),
    Between(usize, usize, usize),
    NonCollinear(usize, usize, usize),
    Absurd,
}

impl Pat {
    pub fn raw(&self, inst: &[Point]) -> RawFact {
        let pt = |i: usize| inst[i].clone();
        let s2 = |[a, b]: [usize; 2]| [pt(a), pt(b)];
        let s3 = |[a, b, c]: [usize; 3]| [pt(a), pt(b), pt(c)];
        match *self {
            Pat::SegEq(s, t) => RawFact::SegEq(s2(s), s2(t)),
            Pat::AngEq(s, t) => RawFact::AngEq(s3(s), s3(t)),
            Pat::SegLt(s, t) => RawFact::SegLt(s2(s), s2(t)),
            Pat::AngLt(s, t) => RawFact::AngLt(s3(s), s3(t)),
            Pat::Between(m, a, b) => RawFact::Between(pt(m), pt(a), pt(b)),
            Pat::NonCollinear(a, b, c) => RawFact::NonCollinear(pt(a), pt(b), pt(c)),
            Pat::Absurd => RawFact::Absurd,
        }
    }

    pub fn instantiate(&self, inst: &[Point]) -> Result<Fact, GeomError> {
        canon_fact(&self.raw(inst))
    }

    pub fn vars(&self) -> Vec<usize> {
        match *self {
            Pat::SegEq(s, t) | Pat::SegLt(s, t) => s.into_iter().chain(t).collect(),
            Pat::AngEq(s, t) | Pat::AngLt(s, t) => s.into_iter().chain(t).collect(),
            Pat::Between(m, a, b) => vec![m, a, b],
            Pat::NonCollinear(a, b, c) => vec![a, b, c],
            Pat::Absurd => Vec::new(),
        }
    }
}

impl SideCondition {
    pub fn vars(&self) -> Vec<usize> {
        match *self {
            SideCondition::NonCollinear(a, b, c) => vec![a, b, c],
            SideCondition::OnOneLine(v) => v.to_vec(),
        }
    }
}

/// An obligation the kernel discharges itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SideCondition {
    NonCollinear(usize, usize, usize),
    /// All listed points lie on one recorded line. Used by NC_TRANSFER.
    OnOneLine([usize; 4]),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Form {
    pub premises: Vec<Pat>,
    pub sides: Vec<SideCondition>,
    pub conclusions: Vec<Pat>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSchema {
    pub id: RuleId,
    pub vars: &'static [&'static str],
    pub forms: Vec<Form>,
}

impl RuleSchema {
    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    /// Instantiated conclusions of every form, deduplicated, in form order.
    pub fn all_conclusions(&self, inst: &[Point]) -> Result<Vec<Fact>, GeomError> {
        let mut out = Vec::new();
        for form in &self.forms {
            for c in &form.conclusions {
                let f = c.instantiate(inst)?;
                if !out.contains(&f) {
                    out.push(f);
                }
            }
        }
        Ok(out)
    }
}

fn one(premises: Vec<Pat>, sides: Vec<SideCondition>, conclusions: Vec<Pat>) -> Vec<Form> {
    vec![Form { premises, sides, conclusions }]
}

fn schema(id: RuleId) -> RuleSchema {
    use Pat::*;
    use SideCondition as S;
    let (vars, forms): (&'static [&'static str], Vec<Form>) = match id {
        RuleId::SegRefl => (&["a", "b"], one(vec![], vec![], vec![SegEq([0, 1], [0, 1])])),
        RuleId::AngRefl => {
            (&["a", "v", "b"], one(vec![], vec![], vec![AngEq([0, 1, 2], [0, 1, 2])]))
        }
        RuleId::SegSym => (
            &["a", "b", "c", "d"],
            one(vec![SegEq([0, 1], [2, 3])], vec![], vec![SegEq([2, 3], [0, 1])]),
        ),
        RuleId::AngSym => (
            &["a", "b", "c", "d", "e", "f"],
            one(vec![AngEq([0, 1, 2], [3, 4, 5])], vec![], vec![AngEq([3, 4, 5], [0, 1, 2])]),
        ),
        RuleId::SegTrans => (
            &["a", "b", "c", "d", "e", "f"],
            one(
                vec![SegEq([0, 1], [2, 3]), SegEq([2, 3], [4, 5])],
                vec![],
                vec![SegEq([0, 1], [4, 5])],
            ),
        ),
        RuleId::AngTrans => (
            &["a1", "v1", "b1", "a2", "v2", "b2", "a3", "v3", "b3"],
            one(
                vec![AngEq([0, 1, 2], [3, 4, 5]), AngEq([3, 4, 5], [6, 7, 8])],
                vec![],
                vec![AngEq([0, 1, 2], [6, 7, 8])],
            ),
        ),
        // P = (0,1,2), Q = (3,4,5)
        RuleId::SasOrd => (
            &["p1", "p2", "p3", "q1", "q2", "q3"],
            one(
                vec![SegEq([0, 1], [3, 4]), SegEq([0, 2], [3, 5]), AngEq([1, 0, 2], [4, 3, 5])],
                vec![S::NonCollinear(0, 1, 2), S::NonCollinear(3, 4, 5)],
                vec![SegEq([1, 2], [4, 5]), AngEq([0, 1, 2], [3, 4, 5]), AngEq([0, 2, 1], [3, 5, 4])],
            ),
        ),
        RuleId::AsaOrd => (
            &["p1", "p2", "p3", "q1", "q2", "q3"],
            one(
                vec![AngEq([0, 1, 2], [3, 4, 5]), AngEq([0, 2, 1], [3, 5, 4]), SegEq([1, 2], [4, 5])],
                vec![S::NonCollinear(0, 1, 2), S::NonCollinear(3, 4, 5)],
                vec![SegEq([0, 1], [3, 4]), SegEq([0, 2], [3, 5]), AngEq([1, 0, 2], [4, 3, 5])],
            ),
        ),
        // a m b a' m' b'
        RuleId::SegSum => (
            &["a", "m", "b", "a'", "m'", "b'"],
            one(
                vec![Between(1, 0, 2), Between(4, 3, 5), SegEq([0, 1], [3, 4]), SegEq([1, 2], [4, 5])],
                vec![],
                vec![SegEq([0, 2], [3, 5])],
            ),
        ),
        // a b d c a' b' d' c'
        RuleId::SuppCong => (
            &["a", "b", "d", "c", "a'", "b'", "d'", "c'"],
            one(
                vec![Between(1, 0, 2), Between(5, 4, 6), AngEq([2, 1, 3], [6, 5, 7])],
                vec![S::NonCollinear(0, 1, 3), S::NonCollinear(4, 5, 7)],
                vec![AngEq([0, 1, 3], [4, 5, 7])],
            ),
        ),
        // v m w z
        RuleId::ArmSubst => (
            &["v", "m", "w", "z"],
            one(
                vec![Between(1, 0, 2)],
                vec![S::NonCollinear(0, 2, 3)],
                vec![AngEq([2, 0, 3], [1, 0, 3])],
            ),
        ),
        // v a m b v' a' m' b'
        RuleId::AngSum => (
            &["v", "a", "m", "b", "v'", "a'", "m'", "b'"],
            one(
                vec![
                    Between(2, 1, 3),
                    Between(6, 5, 7),
                    AngEq([1, 0, 2], [5, 4, 6]),
                    AngEq([2, 0, 3], [6, 4, 7]),
                ],
                vec![S::NonCollinear(1, 0, 3), S::NonCollinear(5, 4, 7)],
                vec![AngEq([1, 0, 3], [5, 4, 7])],
            ),
        ),
        RuleId::WholePartSeg => {
            (&["a", "m", "b"], one(vec![Between(1, 0, 2)], vec![], vec![SegLt([0, 1], [0, 2])]))
        }
        // a m b z: the part ang(a,z,m) of the whole ang(a,z,b)
        RuleId::WholePartAng => (
            &["a", "m", "b", "z"],
            one(
                vec![Between(1, 0, 2)],
                vec![S::NonCollinear(0, 2, 3)],
                vec![AngLt([0, 3, 1], [0, 3, 2])],
            ),
        ),
        RuleId::LtSubstSeg => (
            &["a", "b", "c", "d", "e", "f"],
            vec![
                Form {
                    premises: vec![SegLt([0, 1], [2, 3]), SegEq([0, 1], [4, 5])],
                    sides: vec![],
                    conclusions: vec![SegLt([4, 5], [2, 3])],
                },
                Form {
                    premises: vec![SegLt([0, 1], [2, 3]), SegEq([2, 3], [4, 5])],
                    sides: vec![],
                    conclusions: vec![SegLt([0, 1], [4, 5])],
                },
            ],
        ),
        RuleId::LtSubstAng => (
            &["a1", "v1", "b1", "a2", "v2", "b2", "a3", "v3", "b3"],
            vec![
                Form {
                    premises: vec![AngLt([0, 1, 2], [3, 4, 5]), AngEq([0, 1, 2], [6, 7, 8])],
                    sides: vec![],
                    conclusions: vec![AngLt([6, 7, 8], [3, 4, 5])],
                },
                Form {
                    premises: vec![AngLt([0, 1, 2], [3, 4, 5]), AngEq([3, 4, 5], [6, 7, 8])],
                    sides: vec![],
                    conclusions: vec![AngLt([0, 1, 2], [6, 7, 8])],
                },
            ],
        ),
        RuleId::AbsurdLtEqSeg => (
            &["a", "b", "c", "d"],
            one(vec![SegLt([0, 1], [2, 3]), SegEq([0, 1], [2, 3])], vec![], vec![Absurd]),
        ),
        RuleId::AbsurdLtEqAng => (
            &["a1", "v1", "b1", "a2", "v2", "b2"],
            one(vec![AngLt([0, 1, 2], [3, 4, 5]), AngEq([0, 1, 2], [3, 4, 5])], vec![], vec![Absurd]),
        ),
        // x y z p q: NonCollinear(x,y,z) and p,q on line xy give NonCollinear(p,q,z)
        RuleId::NcTransfer => (
            &["x", "y", "z", "p", "q"],
            one(
                vec![NonCollinear(0, 1, 2)],
                vec![S::OnOneLine([3, 4, 0, 1])],
                vec![NonCollinear(3, 4, 2)],
            ),
        ),
    };
    RuleSchema { id, vars, forms }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(names: &str) -> Vec<Point> {
        names.split_whitespace().map(Point::new).collect()
    }

    #[test]
    fn names_round_trip() {
        for r in RuleId::ALL {
            assert_eq!(r.name().parse::<RuleId>(), Ok(r));
        }
        assert!("SSS".parse::<RuleId>().is_err());
    }

    #[test]
    fn conclusion_variables_occur_in_premises_or_sides() {
        for r in RuleId::ALL {
            let s = r.schema();
            for form in &s.forms {
                let bound: Vec<usize> = form
                    .premises
                    .iter()
                    .flat_map(Pat::vars)
                    .chain(form.sides.iter().flat_map(SideCondition::vars))
                    .collect();
                // the reflexivity axioms have no premises at all
                if form.premises.is_empty() {
                    continue;
                }
                for c in &form.conclusions {
                    for v in c.vars() {
                        assert!(bound.contains(&v), "{r}: variable {} unbound", s.vars[v]);
                    }
                }
            }
        }
    }

    #[test]
    fn sas_instantiation_on_reversed_triple() {
        let s = RuleId::SasOrd.schema();
        let inst = pts("A B C A C B");
        let prem: Vec<String> =
            s.forms[0].premises.iter().map(|p| p.instantiate(&inst).unwrap().to_string()).collect();
        assert_eq!(prem, ["seg A B == seg A C", "seg A B == seg A C", "ang B A C == ang B A C"]);
        let concl: Vec<String> =
            s.all_conclusions(&inst).unwrap().iter().map(ToString::to_string).collect();
        assert_eq!(concl, ["seg B C == seg B C", "ang A B C == ang A C B"]);
    }

    #[test]
    fn degenerate_instantiation_is_an_error() {
        let s = RuleId::WholePartSeg.schema();
        assert!(s.all_conclusions(&pts("A A B")).is_err());
    }
}
