//! The deduction kernel.
//!
//! A [`ProofState`] holds the facts established so far. Facts only enter it
//! through a rule of the fixed inventory, a construction, a lemma, or a case
//! assumption. [`check_proof`] replays an elaborated proof against a fresh
//! state and reports the first step that does not verify.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{
    canon_segment, Fact, GeomError, LineTable, Point, PointOrigin, Segment,
};
use crate::rules::{RuleId, SideCondition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Tag {
    Neutral,
    Euclidean,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tag::Neutral => "neutral",
            Tag::Euclidean => "euclidean",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TheoremStatement {
    pub name: String,
    pub tags: BTreeSet<Tag>,
    pub given: Vec<Point>,
    /// Labelled hypotheses, in script order.
    pub hypotheses: Vec<(String, Fact)>,
    /// Existential points the conclusions talk about.
    pub introduced: Vec<Point>,
    pub conclusions: Vec<Fact>,
}

impl TheoremStatement {
    pub fn hypothesis_facts(&self) -> impl Iterator<Item = &Fact> {
        self.hypotheses.iter().map(|(_, f)| f)
    }
}

/// A citation in a proof step.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "ref", rename_all = "lowercase")]
pub enum Ref {
    /// `s3` or `s3.2`; the index is 1-based and picks one fact of a step that
    /// produced several.
    Label { name: String, index: Option<usize> },
    /// The reflexive fact the rule expects in this position.
    Refl,
    /// The symmetric form of a cited equality.
    Sym { name: String, index: Option<usize> },
}

impl Ref {
    pub fn label(name: &str) -> Ref {
        Ref::Label { name: name.to_owned(), index: None }
    }

    pub fn label_name(&self) -> Option<&str> {
        match self {
            Ref::Label { name, .. } | Ref::Sym { name, .. } => Some(name),
            Ref::Refl => None,
        }
    }
}

impl fmt::Display for Ref {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx = |f: &mut fmt::Formatter<'_>, i: &Option<usize>| match i {
            Some(i) => write!(f, ".{i}"),
            None => Ok(()),
        };
        match self {
            Ref::Label { name, index } => {
                f.write_str(name)?;
                idx(f, index)
            }
            Ref::Refl => f.write_str("refl"),
            Ref::Sym { name, index } => {
                write!(f, "sym {name}")?;
                idx(f, index)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstructionKind {
    /// Prolong `a`→`b` beyond `b` by a segment congruent to `length`.
    Extend { a: Point, b: Point, length: Segment },
    /// Mark the point on segment `from`–`toward` at distance `length` from
    /// `from`. Needs `length < seg(from, toward)` to be known.
    Layoff { from: Point, toward: Point, length: Segment },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseKind {
    Lt,
    Eq,
    Gt,
}

impl CaseKind {
    pub const ALL: [CaseKind; 3] = [CaseKind::Lt, CaseKind::Eq, CaseKind::Gt];

    pub fn name(self) -> &'static str {
        match self {
            CaseKind::Lt => "lt",
            CaseKind::Eq => "eq",
            CaseKind::Gt => "gt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CloseTarget {
    Goal,
    Absurd,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Close {
    pub target: CloseTarget,
    pub refs: Vec<Ref>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch {
    pub case: CaseKind,
    pub steps: Vec<Step>,
    pub close: Close,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepKind {
    Rule { claims: Vec<Fact>, rule: RuleId, inst: Vec<Point>, refs: Vec<Ref> },
    Construct { kind: ConstructionKind, fresh: Point, refs: Vec<Ref> },
    /// Trichotomy on two segments; branches in lt, eq, gt order.
    Cases { left: Segment, right: Segment, branches: Vec<Branch> },
    Lemma { name: String, args: Vec<Point>, fresh: Vec<Point> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub label: String,
    pub kind: StepKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proof {
    pub steps: Vec<Step>,
    pub qed: Vec<Ref>,
}

/// Statements a proof may cite as lemmas.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    statements: BTreeMap<String, TheoremStatement>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, statement: TheoremStatement) {
        self.statements.insert(statement.name.clone(), statement);
    }

    pub fn get(&self, name: &str) -> Option<&TheoremStatement> {
        self.statements.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.statements.contains_key(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegeneracyMode {
    /// Underivable non-collinearity obligations are assumed and recorded.
    #[default]
    Permissive,
    /// Every non-collinearity obligation must be derived.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideOutcome {
    Derived,
    Assumed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("unknown premise {0}")]
    UnknownPremise(String),
    #[error("label {0} names several facts; cite one as {0}.N")]
    AmbiguousLabel(String),
    #[error("label {label} has no fact number {index}")]
    NoSuchFact { label: String, index: usize },
    #[error("premise mismatch: expected `{expected}`, got `{actual}`")]
    PremiseMismatch { expected: Fact, actual: String },
    #[error("{rule} takes {expected} premises, {got} cited")]
    PremiseCount { rule: RuleId, expected: usize, got: usize },
    #[error("{rule} takes {expected} points, {got} given")]
    ArityMismatch { rule: RuleId, expected: usize, got: usize },
    #[error("side condition noncollinear {} {} {} failed", .0[0], .0[1], .0[2])]
    SideConditionFailed([Point; 3]),
    #[error("points {} are not on one recorded line", .0.iter().map(Point::name).collect::<Vec<_>>().join(" "))]
    LineConditionFailed(Vec<Point>),
    #[error("degenerate instantiation: {0}")]
    DegenerateInstantiation(GeomError),
    #[error("point {0} is not in scope")]
    UnknownPoint(Point),
    #[error("point {0} is already in scope")]
    PointNotFresh(Point),
    #[error("`{claim}` is not a conclusion of {rule} here")]
    ClaimNotConcluded { rule: RuleId, claim: Fact },
    #[error("layoff needs `{0}`")]
    LayoffWithoutBound(Fact),
    #[error("extension needs two distinct points")]
    DegenerateExtension,
    #[error("lemma hypothesis not satisfied: `{0}`")]
    HypothesisNotSatisfied(Fact),
    #[error("lemma {name} takes {expected} points, {got} given")]
    LemmaArity { name: String, expected: usize, got: usize },
    #[error("lemma {name} introduces {expected} points, {got} named")]
    LemmaFreshCount { name: String, expected: usize, got: usize },
    #[error("unknown lemma {0}")]
    UnknownLemma(String),
    #[error("absurd derived outside any case assumption")]
    AbsurdOutsideCase,
    #[error("goal `{0}` not among the cited facts")]
    GoalNotReached(Fact),
    #[error("no cited fact is absurd")]
    NotAbsurd,
    #[error("`sym` applies to equalities only")]
    SymOnNonEquality,
    #[error("trichotomy needs exactly three branches lt, eq, gt")]
    MalformedCases,
}

impl From<GeomError> for KernelError {
    fn from(e: GeomError) -> Self {
        KernelError::DegenerateInstantiation(e)
    }
}

/// What a check touched, accumulated across branches.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub side_conditions: Vec<([Point; 3], SideOutcome)>,
    pub assumptions: BTreeSet<[Point; 3]>,
    pub lemmas: BTreeSet<String>,
    pub axioms: BTreeSet<String>,
}

impl Trace {
    fn absorb(&mut self, other: Trace) {
        self.side_conditions.extend(other.side_conditions);
        self.assumptions.extend(other.assumptions);
        self.lemmas.extend(other.lemmas);
        self.axioms.extend(other.axioms);
    }
}

/// Names of the non-rule principles a proof can rely on.
pub const AXIOM_EXTEND: &str = "EXTEND";
pub const AXIOM_LAYOFF: &str = "LAYOFF";
pub const AXIOM_TRICHOTOMY: &str = "TRICHOTOMY";

#[derive(Debug, Clone)]
pub struct ProofState {
    known: BTreeSet<Fact>,
    lines: LineTable,
    points: BTreeMap<Point, PointOrigin>,
    assumptions: Vec<Fact>,
    goal: Vec<Fact>,
    labels: HashMap<String, Vec<Fact>>,
    mode: DegeneracyMode,
    trace: Trace,
}

impl ProofState {
    /// Starts a proof of `statement`: given points in scope, hypotheses known
    /// and bound to their labels.
    pub fn new(statement: &TheoremStatement, mode: DegeneracyMode) -> Self {
        let mut state = ProofState {
            known: BTreeSet::new(),
            lines: LineTable::new(),
            points: statement
                .given
                .iter()
                .map(|p| (p.clone(), PointOrigin::Hypothesis))
                .collect(),
            assumptions: Vec::new(),
            goal: statement.conclusions.clone(),
            labels: HashMap::new(),
            mode,
            trace: Trace::default(),
        };
        for (label, fact) in &statement.hypotheses {
            state.add_fact(fact.clone());
            state.bind(label, vec![fact.clone()]);
        }
        state
    }

    pub fn known(&self) -> &BTreeSet<Fact> {
        &self.known
    }

    pub fn lines(&self) -> &LineTable {
        &self.lines
    }

    pub fn goal(&self) -> &[Fact] {
        &self.goal
    }

    pub fn assumptions(&self) -> &[Fact] {
        &self.assumptions
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn points(&self) -> impl Iterator<Item = (&Point, &PointOrigin)> {
        self.points.iter()
    }

    pub fn add_fact(&mut self, fact: Fact) {
        if matches!(fact, Fact::Between { .. }) {
            self.lines = self.lines.record_between(&fact);
        }
        self.known.insert(fact);
    }

    pub fn add_facts(&mut self, facts: impl IntoIterator<Item = Fact>) {
        for f in facts {
            self.add_fact(f);
        }
    }

    pub fn bind(&mut self, label: &str, facts: Vec<Fact>) {
        self.labels.insert(label.to_owned(), facts);
    }

    fn require_point(&self, p: &Point) -> Result<(), KernelError> {
        if self.points.contains_key(p) {
            Ok(())
        } else {
            Err(KernelError::UnknownPoint(p.clone()))
        }
    }

    fn introduce(&mut self, p: &Point, origin: PointOrigin) -> Result<(), KernelError> {
        if self.points.contains_key(p) {
            return Err(KernelError::PointNotFresh(p.clone()));
        }
        self.points.insert(p.clone(), origin);
        Ok(())
    }

    fn lookup(&self, name: &str, index: Option<usize>) -> Result<&Fact, KernelError> {
        let facts =
            self.labels.get(name).ok_or_else(|| KernelError::UnknownPremise(name.to_owned()))?;
        match index {
            None if facts.len() == 1 => Ok(&facts[0]),
            None => Err(KernelError::AmbiguousLabel(name.to_owned())),
            Some(i) => facts
                .get(i.wrapping_sub(1))
                .ok_or_else(|| KernelError::NoSuchFact { label: name.to_owned(), index: i }),
        }
    }

    /// Resolves a citation against the fact expected in its position. Returns
    /// the cited fact and the equivalence axiom it leaned on, if any.
    fn resolve(
        &self,
        r: &Ref,
        expected: &Fact,
    ) -> Result<(Fact, Option<RuleId>), KernelError> {
        match r {
            Ref::Label { name, index } => Ok((self.lookup(name, *index)?.clone(), None)),
            Ref::Refl => {
                let axiom = match expected {
                    Fact::SegEq(..) => RuleId::SegRefl,
                    _ => RuleId::AngRefl,
                };
                if expected.is_reflexive() {
                    Ok((expected.clone(), Some(axiom)))
                } else {
                    Err(KernelError::PremiseMismatch {
                        expected: expected.clone(),
                        actual: "refl".into(),
                    })
                }
            }
            Ref::Sym { name, index } => {
                let fact = self.lookup(name, *index)?;
                let axiom = match fact {
                    Fact::SegEq(..) => RuleId::SegSym,
                    Fact::AngEq(..) => RuleId::AngSym,
                    _ => return Err(KernelError::SymOnNonEquality),
                };
                // equalities are stored with sorted sides, so the symmetric
                // form is the same value
                Ok((fact.clone(), Some(axiom)))
            }
        }
    }

    fn resolve_any(&self, r: &Ref) -> Result<Fact, KernelError> {
        match r {
            Ref::Label { name, index } | Ref::Sym { name, index } => {
                Ok(self.lookup(name, *index)?.clone())
            }
            Ref::Refl => Err(KernelError::PremiseMismatch {
                expected: Fact::Absurd,
                actual: "refl".into(),
            }),
        }
    }

    /// Whether `NonCollinear(a,b,c)` can be used without citation.
    pub fn check_side_condition(&self, triple: [&Point; 3]) -> SideOutcome {
        let [a, b, c] = triple;
        if self.lines.provably_collinear(a, b, c) {
            return SideOutcome::Failed;
        }
        let Ok(target) = Fact::non_collinear(a, b, c) else {
            return SideOutcome::Failed;
        };
        if self.known.contains(&target) || self.nc_transfer_derives(triple) {
            return SideOutcome::Derived;
        }
        match self.mode {
            DegeneracyMode::Permissive => SideOutcome::Assumed,
            DegeneracyMode::Strict => SideOutcome::Failed,
        }
    }

    /// One NC_TRANSFER step from a known non-collinear triple.
    fn nc_transfer_derives(&self, [a, b, c]: [&Point; 3]) -> bool {
        let splits = [(a, b, c), (a, c, b), (b, c, a)];
        self.known.iter().any(|fact| {
            let Fact::NonCollinear(known) = fact else {
                return false;
            };
            splits.iter().any(|(p, q, z)| {
                (0..3).any(|apex| {
                    if &known[apex] != *z {
                        return false;
                    }
                    let x = &known[(apex + 1) % 3];
                    let y = &known[(apex + 2) % 3];
                    let same_pair = (p == &x && q == &y) || (p == &y && q == &x);
                    same_pair || self.lines.on_one_line(&[p, q, x, y])
                })
            })
        })
    }

    fn discharge(&mut self, triple: [&Point; 3]) -> Result<(), KernelError> {
        let outcome = self.check_side_condition(triple);
        let owned = [triple[0].clone(), triple[1].clone(), triple[2].clone()];
        self.trace.side_conditions.push((owned.clone(), outcome));
        match outcome {
            SideOutcome::Derived => Ok(()),
            SideOutcome::Assumed => {
                let mut sorted = owned;
                sorted.sort();
                self.trace.assumptions.insert(sorted);
                Ok(())
            }
            SideOutcome::Failed => Err(KernelError::SideConditionFailed(owned)),
        }
    }

    /// Checks one rule application and returns its instantiated conclusions.
    /// The caller decides which of them enter `known`.
    pub fn apply_rule(
        &mut self,
        rule: RuleId,
        inst: &[Point],
        refs: &[Ref],
    ) -> Result<Vec<Fact>, KernelError> {
        let schema = rule.schema();
        if inst.len() != schema.arity() {
            return Err(KernelError::ArityMismatch {
                rule,
                expected: schema.arity(),
                got: inst.len(),
            });
        }
        for p in inst {
            self.require_point(p)?;
        }
        let mut first_err = None;
        for form in &schema.forms {
            match self.match_form(rule, form, inst, refs) {
                Ok(axioms) => {
                    for side in &form.sides {
                        self.discharge_side(side, inst)?;
                    }
                    let mut out = Vec::new();
                    for c in &form.conclusions {
                        let f = c.instantiate(inst)?;
                        if !out.contains(&f) {
                            out.push(f);
                        }
                    }
                    self.trace.axioms.insert(rule.name().to_owned());
                    self.trace.axioms.extend(axioms.into_iter().map(|a| a.name().to_owned()));
                    return Ok(out);
                }
                Err(e @ KernelError::UnknownPremise(_)) => return Err(e),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        Err(first_err.expect("every rule has at least one form"))
    }

    fn match_form(
        &self,
        rule: RuleId,
        form: &crate::rules::Form,
        inst: &[Point],
        refs: &[Ref],
    ) -> Result<Vec<RuleId>, KernelError> {
        if refs.len() != form.premises.len() {
            return Err(KernelError::PremiseCount {
                rule,
                expected: form.premises.len(),
                got: refs.len(),
            });
        }
        let mut axioms = Vec::new();
        for (pat, r) in form.premises.iter().zip(refs) {
            let expected = pat.instantiate(inst)?;
            let (actual, axiom) = self.resolve(r, &expected)?;
            if actual != expected {
                return Err(KernelError::PremiseMismatch { expected, actual: actual.to_string() });
            }
            axioms.extend(axiom);
        }
        Ok(axioms)
    }

    fn discharge_side(&mut self, side: &SideCondition, inst: &[Point]) -> Result<(), KernelError> {
        match *side {
            SideCondition::NonCollinear(a, b, c) => self.discharge([&inst[a], &inst[b], &inst[c]]),
            SideCondition::OnOneLine([p, q, x, y]) => {
                let (p, q, x, y) = (&inst[p], &inst[q], &inst[x], &inst[y]);
                let same_pair = (p == x && q == y) || (p == y && q == x);
                if same_pair || self.lines.on_one_line(&[p, q, x, y]) {
                    Ok(())
                } else {
                    Err(KernelError::LineConditionFailed(vec![
                        p.clone(),
                        q.clone(),
                        x.clone(),
                        y.clone(),
                    ]))
                }
            }
        }
    }

    /// Adds the fresh point and the facts the construction guarantees.
    pub fn apply_construction(
        &mut self,
        kind: &ConstructionKind,
        fresh: &Point,
    ) -> Result<Vec<Fact>, KernelError> {
        let facts = match kind {
            ConstructionKind::Extend { a, b, length } => {
                self.require_point(a)?;
                self.require_point(b)?;
                self.require_segment(length)?;
                if a == b {
                    return Err(KernelError::DegenerateExtension);
                }
                if self.points.contains_key(fresh) {
                    return Err(KernelError::PointNotFresh(fresh.clone()));
                }
                vec![
                    Fact::between(b, a, fresh)?,
                    Fact::seg_eq(canon_segment(b, fresh)?, length.clone()),
                ]
            }
            ConstructionKind::Layoff { from, toward, length } => {
                self.require_point(from)?;
                self.require_point(toward)?;
                self.require_segment(length)?;
                let bound = Fact::SegLt(length.clone(), canon_segment(from, toward)?);
                if !self.known.contains(&bound) {
                    return Err(KernelError::LayoffWithoutBound(bound));
                }
                if self.points.contains_key(fresh) {
                    return Err(KernelError::PointNotFresh(fresh.clone()));
                }
                vec![
                    Fact::between(fresh, from, toward)?,
                    Fact::seg_eq(canon_segment(from, fresh)?, length.clone()),
                ]
            }
        };
        self.introduce(fresh, PointOrigin::Constructed)?;
        self.trace.axioms.insert(
            match kind {
                ConstructionKind::Extend { .. } => AXIOM_EXTEND,
                ConstructionKind::Layoff { .. } => AXIOM_LAYOFF,
            }
            .to_owned(),
        );
        self.add_facts(facts.iter().cloned());
        Ok(facts)
    }

    fn require_segment(&self, s: &Segment) -> Result<(), KernelError> {
        let (a, b) = s.endpoints();
        self.require_point(a)?;
        self.require_point(b)
    }

    /// Child states for `left < right`, `left = right`, `right < left`.
    pub fn open_trichotomy(&self, left: &Segment, right: &Segment) -> [ProofState; 3] {
        let assumption = |case| match case {
            CaseKind::Lt => Fact::SegLt(left.clone(), right.clone()),
            CaseKind::Eq => Fact::seg_eq(left.clone(), right.clone()),
            CaseKind::Gt => Fact::SegLt(right.clone(), left.clone()),
        };
        CaseKind::ALL.map(|case| {
            let mut child = self.clone();
            child.trace = Trace::default();
            let a = assumption(case);
            child.assumptions.push(a.clone());
            child.add_fact(a);
            child
        })
    }

    /// Instantiates `lemma` at `args`, names its introduced points `fresh`,
    /// and adds the mapped conclusions.
    pub fn apply_lemma(
        &mut self,
        lemma: &TheoremStatement,
        args: &[Point],
        fresh: &[Point],
    ) -> Result<Vec<Fact>, KernelError> {
        if args.len() != lemma.given.len() {
            return Err(KernelError::LemmaArity {
                name: lemma.name.clone(),
                expected: lemma.given.len(),
                got: args.len(),
            });
        }
        if fresh.len() != lemma.introduced.len() {
            return Err(KernelError::LemmaFreshCount {
                name: lemma.name.clone(),
                expected: lemma.introduced.len(),
                got: fresh.len(),
            });
        }
        for p in args {
            self.require_point(p)?;
        }
        for p in fresh {
            if self.points.contains_key(p) {
                return Err(KernelError::PointNotFresh(p.clone()));
            }
        }
        let map: HashMap<&Point, &Point> = lemma
            .given
            .iter()
            .zip(args)
            .chain(lemma.introduced.iter().zip(fresh))
            .collect();
        let subst = |f: &Fact| -> Result<Fact, KernelError> {
            let raw = substitute(&f.to_raw(), &map);
            Ok(crate::geom::canon_fact(&raw)?)
        };
        for h in lemma.hypothesis_facts() {
            let mapped = subst(h)?;
            if self.known.contains(&mapped) {
                continue;
            }
            // non-collinearity may also be discharged like a side condition
            if let Fact::NonCollinear([a, b, c]) = &mapped {
                if self.check_side_condition([a, b, c]) != SideOutcome::Failed {
                    self.discharge([a, b, c])?;
                    continue;
                }
            }
            return Err(KernelError::HypothesisNotSatisfied(mapped));
        }
        let conclusions =
            lemma.conclusions.iter().map(subst).collect::<Result<Vec<_>, _>>()?;
        for p in fresh {
            self.introduce(p, PointOrigin::LemmaIntroduced)?;
        }
        self.add_facts(conclusions.iter().cloned());
        self.trace.lemmas.insert(lemma.name.clone());
        Ok(conclusions)
    }
}

/// The conclusions of `lemma` instantiated at `args`, with its introduced
/// points renamed to `fresh`.
pub fn lemma_conclusions(
    lemma: &TheoremStatement,
    args: &[Point],
    fresh: &[Point],
) -> Result<Vec<Fact>, KernelError> {
    let map: HashMap<&Point, &Point> =
        lemma.given.iter().zip(args).chain(lemma.introduced.iter().zip(fresh)).collect();
    lemma
        .conclusions
        .iter()
        .map(|f| Ok(crate::geom::canon_fact(&substitute(&f.to_raw(), &map))?))
        .collect()
}

fn substitute(raw: &crate::geom::RawFact, map: &HashMap<&Point, &Point>) -> crate::geom::RawFact {
    use crate::geom::RawFact as R;
    let m = |p: &Point| map.get(p).map(|q| (*q).clone()).unwrap_or_else(|| p.clone());
    let m2 = |[a, b]: &[Point; 2]| [m(a), m(b)];
    let m3 = |[a, b, c]: &[Point; 3]| [m(a), m(b), m(c)];
    match raw {
        R::SegEq(s, t) => R::SegEq(m2(s), m2(t)),
        R::AngEq(s, t) => R::AngEq(m3(s), m3(t)),
        R::SegLt(s, t) => R::SegLt(m2(s), m2(t)),
        R::AngLt(s, t) => R::AngLt(m3(s), m3(t)),
        R::Between(x, a, b) => R::Between(m(x), m(a), m(b)),
        R::NonCollinear(a, b, c) => R::NonCollinear(m(a), m(b), m(c)),
        R::AngleSumStraight(a, b, c) => R::AngleSumStraight(m(a), m(b), m(c)),
        R::Absurd => R::Absurd,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepResult {
    /// Step label prefixed by its enclosing cases, e.g. `c1/gt/g3`.
    pub path: String,
    pub facts: Vec<Fact>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepFailure {
    /// `qed` or a close line are reported as `<cases-path>/close` and `qed`.
    pub path: String,
    pub error: KernelError,
}

impl fmt::Display for StepFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {}", self.path, self.error)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckReport {
    pub theorem: String,
    pub status: CheckStatus,
    pub steps: Vec<StepResult>,
    pub failure: Option<StepFailure>,
    pub side_conditions: Vec<([Point; 3], SideOutcome)>,
    /// Non-collinearity obligations assumed in permissive mode.
    pub assumptions: Vec<[Point; 3]>,
    pub lemma_uses: Vec<String>,
    /// Rules and construction principles the proof relied on.
    pub axioms: Vec<String>,
}

impl CheckReport {
    pub fn is_ok(&self) -> bool {
        self.status == CheckStatus::Ok
    }
}

struct Checker<'a> {
    registry: &'a Registry,
    steps: Vec<StepResult>,
}

impl Checker<'_> {
    fn run(
        &mut self,
        state: &mut ProofState,
        steps: &[Step],
        prefix: &str,
    ) -> Result<(), StepFailure> {
        for step in steps {
            let path = format!("{prefix}{}", step.label);
            let facts = match &step.kind {
                StepKind::Cases { left, right, branches } => {
                    self.cases(state, &step.label, left, right, branches, &path)?
                }
                _ => self
                    .step(state, step)
                    .map_err(|error| StepFailure { path: path.clone(), error })?,
            };
            self.steps.push(StepResult { path, facts });
        }
        Ok(())
    }

    fn step(&mut self, state: &mut ProofState, step: &Step) -> Result<Vec<Fact>, KernelError> {
        match &step.kind {
            StepKind::Rule { claims, rule, inst, refs } => {
                let conclusions = state.apply_rule(*rule, inst, refs)?;
                for claim in claims {
                    if !conclusions.contains(claim) {
                        return Err(KernelError::ClaimNotConcluded {
                            rule: *rule,
                            claim: claim.clone(),
                        });
                    }
                }
                let absurd_goal = state.goal.iter().all(|g| *g == Fact::Absurd);
                if conclusions.contains(&Fact::Absurd)
                    && state.assumptions.is_empty()
                    && !absurd_goal
                {
                    return Err(KernelError::AbsurdOutsideCase);
                }
                state.add_facts(conclusions);
                state.bind(&step.label, claims.clone());
                Ok(claims.clone())
            }
            StepKind::Construct { kind, fresh, refs } => {
                if let ConstructionKind::Layoff { from, toward, length } = kind {
                    let bound = Fact::SegLt(length.clone(), canon_segment(from, toward)?);
                    let cited = refs
                        .iter()
                        .map(|r| state.resolve_any(r))
                        .collect::<Result<Vec<_>, _>>()?;
                    if !cited.contains(&bound) {
                        return Err(KernelError::LayoffWithoutBound(bound));
                    }
                }
                let facts = state.apply_construction(kind, fresh)?;
                state.bind(&step.label, facts.clone());
                Ok(facts)
            }
            StepKind::Lemma { name, args, fresh } => {
                let lemma = self
                    .registry
                    .get(name)
                    .ok_or_else(|| KernelError::UnknownLemma(name.clone()))?;
                let facts = state.apply_lemma(lemma, args, fresh)?;
                state.bind(&step.label, facts.clone());
                Ok(facts)
            }
            StepKind::Cases { .. } => unreachable!("handled by Checker::cases"),
        }
    }

    fn cases(
        &mut self,
        state: &mut ProofState,
        label: &str,
        left: &Segment,
        right: &Segment,
        branches: &[Branch],
        path: &str,
    ) -> Result<Vec<Fact>, StepFailure> {
        let here = |error| StepFailure { path: path.to_owned(), error };
        if branches.len() != 3 || branches.iter().zip(CaseKind::ALL).any(|(b, c)| b.case != c) {
            return Err(here(KernelError::MalformedCases));
        }
        state.require_segment(left).map_err(here)?;
        state.require_segment(right).map_err(here)?;
        let children = state.open_trichotomy(left, right);
        for (mut child, branch) in children.into_iter().zip(branches) {
            let assumption = child.assumptions.last().cloned().expect("just pushed");
            child.bind(label, vec![assumption]);
            let prefix = format!("{path}/{}/", branch.case.name());
            self.run(&mut child, &branch.steps, &prefix)?;
            close_branch(&child, &branch.close)
                .map_err(|error| StepFailure { path: format!("{prefix}close"), error })?;
            state.trace.absorb(child.trace);
        }
        state.trace.axioms.insert(AXIOM_TRICHOTOMY.to_owned());
        let goal = state.goal.clone();
        state.add_facts(goal.iter().cloned());
        state.bind(label, goal.clone());
        Ok(goal)
    }
}

fn close_branch(state: &ProofState, close: &Close) -> Result<(), KernelError> {
    let cited = close.refs.iter().map(|r| state.resolve_any(r)).collect::<Result<Vec<_>, _>>()?;
    match close.target {
        CloseTarget::Absurd => {
            if cited.contains(&Fact::Absurd) {
                Ok(())
            } else {
                Err(KernelError::NotAbsurd)
            }
        }
        CloseTarget::Goal => covers_goal(state, &cited),
    }
}

fn covers_goal(state: &ProofState, cited: &[Fact]) -> Result<(), KernelError> {
    for g in &state.goal {
        if !cited.contains(g) || !state.known.contains(g) {
            return Err(KernelError::GoalNotReached(g.clone()));
        }
    }
    Ok(())
}

/// Replays `proof` as a proof of `statement`.
pub fn check_proof(
    statement: &TheoremStatement,
    proof: &Proof,
    registry: &Registry,
    mode: DegeneracyMode,
) -> CheckReport {
    let mut state = ProofState::new(statement, mode);
    let mut checker = Checker { registry, steps: Vec::new() };
    let mut failure = checker.run(&mut state, &proof.steps, "").err();
    if failure.is_none() {
        let qed = proof
            .qed
            .iter()
            .map(|r| state.resolve_any(r))
            .collect::<Result<Vec<_>, _>>()
            .and_then(|cited| covers_goal(&state, &cited));
        if let Err(error) = qed {
            failure = Some(StepFailure { path: "qed".into(), error });
        }
    }
    let trace = state.trace;
    CheckReport {
        theorem: statement.name.clone(),
        status: if failure.is_none() { CheckStatus::Ok } else { CheckStatus::Failed },
        steps: checker.steps,
        failure,
        side_conditions: trace.side_conditions,
        assumptions: trace.assumptions.into_iter().collect(),
        lemma_uses: trace.lemmas.into_iter().collect(),
        axioms: trace.axioms.into_iter().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::canon_angle;

    fn p(s: &str) -> Point {
        Point::new(s)
    }

    fn pts(s: &str) -> Vec<Point> {
        s.split_whitespace().map(Point::new).collect()
    }

    fn seg(a: &str, b: &str) -> Segment {
        canon_segment(&p(a), &p(b)).unwrap()
    }

    fn ang(a: &str, v: &str, b: &str) -> crate::geom::Angle {
        canon_angle(&p(a), &p(v), &p(b)).unwrap()
    }

    fn nc(a: &str, b: &str, c: &str) -> Fact {
        Fact::non_collinear(&p(a), &p(b), &p(c)).unwrap()
    }

    fn statement(points: &str, hyps: Vec<Fact>, goal: Vec<Fact>) -> TheoremStatement {
        TheoremStatement {
            name: "t".into(),
            tags: [Tag::Neutral].into(),
            given: pts(points),
            hypotheses: hyps.into_iter().enumerate().map(|(i, f)| (format!("h{}", i + 1), f)).collect(),
            introduced: Vec::new(),
            conclusions: goal,
        }
    }

    fn pons() -> TheoremStatement {
        statement(
            "A B C",
            vec![Fact::seg_eq(seg("A", "B"), seg("A", "C")), nc("A", "B", "C")],
            vec![Fact::ang_eq(ang("A", "B", "C"), ang("A", "C", "B"))],
        )
    }

    #[test]
    fn sas_on_the_reversed_triangle() {
        let mut st = ProofState::new(&pons(), DegeneracyMode::Strict);
        let out = st
            .apply_rule(
                RuleId::SasOrd,
                &pts("A B C A C B"),
                &[Ref::label("h1"), Ref::label("h1"), Ref::Refl],
            )
            .unwrap();
        assert!(out.contains(&Fact::ang_eq(ang("A", "B", "C"), ang("A", "C", "B"))));
        assert!(st.trace().axioms.contains("ANG_REFL"));
        assert!(st.trace().assumptions.is_empty());
        // conclusions are returned, not recorded
        assert!(!st.known().contains(&out[1]));
    }

    #[test]
    fn premise_errors() {
        let mut st = ProofState::new(&pons(), DegeneracyMode::Strict);
        let err = st
            .apply_rule(RuleId::SasOrd, &pts("A B C A C B"), &[Ref::label("h1"), Ref::label("h7"), Ref::Refl])
            .unwrap_err();
        assert_eq!(err, KernelError::UnknownPremise("h7".into()));
        let err = st
            .apply_rule(RuleId::SasOrd, &pts("A B C A C B"), &[Ref::label("h2"), Ref::label("h1"), Ref::Refl])
            .unwrap_err();
        assert!(matches!(err, KernelError::PremiseMismatch { .. }), "{err:?}");
        let err = st.apply_rule(RuleId::SasOrd, &pts("A B C"), &[]).unwrap_err();
        assert!(matches!(err, KernelError::ArityMismatch { expected: 6, got: 3, .. }));
        let err = st
            .apply_rule(RuleId::SasOrd, &pts("A B C A C B"), &[Ref::label("h1"), Ref::label("h1")])
            .unwrap_err();
        assert!(matches!(err, KernelError::PremiseCount { expected: 3, got: 2, .. }));
        let err = st.apply_rule(RuleId::SegRefl, &pts("A Z"), &[]).unwrap_err();
        assert_eq!(err, KernelError::UnknownPoint(p("Z")));
        let err = st.apply_rule(RuleId::SegRefl, &pts("A A"), &[]).unwrap_err();
        assert!(matches!(err, KernelError::DegenerateInstantiation(_)));
    }

    #[test]
    fn side_conditions_by_mode() {
        let st0 = statement("A B C", vec![Fact::seg_eq(seg("A", "B"), seg("A", "C"))], vec![]);
        let mut st = ProofState::new(&st0, DegeneracyMode::Permissive);
        let refs = [Ref::label("h1"), Ref::label("h1"), Ref::Refl];
        st.apply_rule(RuleId::SasOrd, &pts("A B C A C B"), &refs).unwrap();
        assert_eq!(st.trace().assumptions.len(), 1);

        let mut st = ProofState::new(&st0, DegeneracyMode::Strict);
        let err = st.apply_rule(RuleId::SasOrd, &pts("A B C A C B"), &refs).unwrap_err();
        assert!(matches!(err, KernelError::SideConditionFailed(_)));
    }

    #[test]
    fn collinear_side_condition_fails_even_permissively() {
        let mut st = ProofState::new(&pons(), DegeneracyMode::Permissive);
        st.add_fact(Fact::between(&p("B"), &p("A"), &p("C")).unwrap());
        assert_eq!(st.check_side_condition([&p("A"), &p("B"), &p("C")]), SideOutcome::Failed);
    }

    /// Brute-force reading of a single NC_TRANSFER step: some ordering
    /// (x, y, z) of a known non-collinear triple and two distinct points
    /// p, q with {p, q, z} the target and p, q, x, y on one known line (or
    /// {p, q} = {x, y}).
    fn transfer_oracle(state: &ProofState, all: &[Point], target: [&Point; 3]) -> bool {
        let target: BTreeSet<&Point> = target.into_iter().collect();
        let on_line = |ps: [&Point; 4]| {
            state.lines().lines().any(|l| ps.iter().all(|q| l.contains(*q)))
        };
        for fact in state.known() {
            let Fact::NonCollinear(k) = fact else { continue };
            for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
                let (x, y, z) = (&k[perm[0]], &k[perm[1]], &k[perm[2]]);
                for pp in all {
                    for qq in all {
                        if pp == qq {
                            continue;
                        }
                        let got: BTreeSet<&Point> = [pp, qq, z].into_iter().collect();
                        if got != target {
                            continue;
                        }
                        let same = (pp == x && qq == y) || (pp == y && qq == x);
                        if same || on_line([pp, qq, x, y]) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    #[test]
    fn side_condition_matches_transfer_oracle() {
        let all = pts("A B C D E");
        let scenarios: Vec<Vec<Fact>> = vec![
            vec![Fact::between(&p("D"), &p("A"), &p("B")).unwrap()],
            vec![
                Fact::between(&p("D"), &p("A"), &p("B")).unwrap(),
                Fact::between(&p("E"), &p("A"), &p("C")).unwrap(),
            ],
            vec![
                Fact::between(&p("D"), &p("A"), &p("B")).unwrap(),
                Fact::between(&p("E"), &p("D"), &p("B")).unwrap(),
            ],
            vec![
                Fact::between(&p("B"), &p("A"), &p("D")).unwrap(),
                Fact::between(&p("C"), &p("B"), &p("E")).unwrap(),
            ],
        ];
        for extra in scenarios {
            let mut state = ProofState::new(
                &statement("A B C D E", vec![nc("A", "B", "C")], vec![]),
                DegeneracyMode::Strict,
            );
            state.add_facts(extra.clone());
            for i in 0..5 {
                for j in i + 1..5 {
                    for k in j + 1..5 {
                        let t = [&all[i], &all[j], &all[k]];
                        let collinear = state.lines().provably_collinear(t[0], t[1], t[2]);
                        let expected = if collinear {
                            SideOutcome::Failed
                        } else if transfer_oracle(&state, &all, t) {
                            SideOutcome::Derived
                        } else {
                            SideOutcome::Failed
                        };
                        assert_eq!(state.check_side_condition(t), expected, "{t:?} with {extra:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn extension_and_layoff() {
        let mut st = ProofState::new(&pons(), DegeneracyMode::Strict);
        let kind = ConstructionKind::Extend { a: p("A"), b: p("B"), length: seg("A", "B") };
        let facts = st.apply_construction(&kind, &p("D")).unwrap();
        assert_eq!(
            facts,
            [
                Fact::between(&p("B"), &p("A"), &p("D")).unwrap(),
                Fact::seg_eq(seg("B", "D"), seg("A", "B")),
            ]
        );
        assert_eq!(st.apply_construction(&kind, &p("D")), Err(KernelError::PointNotFresh(p("D"))));
        assert!(st.trace().axioms.contains(AXIOM_EXTEND));

        let lay = ConstructionKind::Layoff { from: p("B"), toward: p("A"), length: seg("A", "C") };
        assert_eq!(
            st.apply_construction(&lay, &p("E")),
            Err(KernelError::LayoffWithoutBound(Fact::SegLt(seg("A", "C"), seg("A", "B"))))
        );
        st.add_fact(Fact::SegLt(seg("A", "C"), seg("A", "B")));
        let facts = st.apply_construction(&lay, &p("E")).unwrap();
        assert_eq!(facts[0], Fact::between(&p("E"), &p("B"), &p("A")).unwrap());
        assert!(st.lines().on_one_line(&[&p("A"), &p("B"), &p("D"), &p("E")]));
    }

    #[test]
    fn trichotomy_children() {
        let st = ProofState::new(&pons(), DegeneracyMode::Strict);
        let [lt, eq, gt] = st.open_trichotomy(&seg("A", "B"), &seg("B", "C"));
        assert_eq!(lt.assumptions(), [Fact::SegLt(seg("A", "B"), seg("B", "C"))]);
        assert_eq!(eq.assumptions(), [Fact::seg_eq(seg("A", "B"), seg("B", "C"))]);
        assert_eq!(gt.assumptions(), [Fact::SegLt(seg("B", "C"), seg("A", "B"))]);
        assert!(gt.known().contains(&Fact::SegLt(seg("B", "C"), seg("A", "B"))));
        assert!(st.assumptions().is_empty());
    }

    #[test]
    fn lemma_application() {
        let lemma = TheoremStatement {
            name: "foot".into(),
            tags: [Tag::Neutral].into(),
            given: pts("X Y Z"),
            hypotheses: vec![("h".into(), nc("X", "Y", "Z"))],
            introduced: pts("F"),
            conclusions: vec![Fact::between(&p("F"), &p("Y"), &p("Z")).unwrap()],
        };
        let mut st = ProofState::new(&pons(), DegeneracyMode::Strict);
        let out = st.apply_lemma(&lemma, &pts("A B C"), &pts("H")).unwrap();
        assert_eq!(out, [Fact::between(&p("H"), &p("B"), &p("C")).unwrap()]);
        assert!(st.trace().lemmas.contains("foot"));
        assert_eq!(
            st.apply_lemma(&lemma, &pts("A B"), &pts("K")),
            Err(KernelError::LemmaArity { name: "foot".into(), expected: 3, got: 2 })
        );
        assert_eq!(
            st.apply_lemma(&lemma, &pts("A B C"), &pts("H")),
            Err(KernelError::PointNotFresh(p("H")))
        );
        // B, H, C are collinear now
        assert_eq!(
            st.apply_lemma(&lemma, &pts("B H C"), &pts("K")),
            Err(KernelError::HypothesisNotSatisfied(nc("B", "H", "C")))
        );
    }

    #[test]
    fn absurd_only_inside_cases() {
        let proof = Proof {
            steps: vec![
                Step {
                    label: "s1".into(),
                    kind: StepKind::Rule {
                        claims: vec![],
                        rule: RuleId::AbsurdLtEqSeg,
                        inst: pts("A B A C"),
                        refs: vec![Ref::label("h3"), Ref::label("h1")],
                    },
                },
            ],
            qed: vec![Ref::label("s1")],
        };
        let mut stmt = pons();
        stmt.hypotheses.push(("h3".into(), Fact::SegLt(seg("A", "B"), seg("A", "C"))));
        let report = check_proof(&stmt, &proof, &Registry::new(), DegeneracyMode::Strict);
        assert_eq!(report.failure.unwrap().error, KernelError::AbsurdOutsideCase);
    }

    #[test]
    fn claims_must_be_conclusions() {
        let proof = Proof {
            steps: vec![Step {
                label: "s1".into(),
                kind: StepKind::Rule {
                    claims: vec![Fact::seg_eq(seg("A", "B"), seg("B", "C"))],
                    rule: RuleId::SasOrd,
                    inst: pts("A B C A C B"),
                    refs: vec![Ref::label("h1"), Ref::label("h1"), Ref::Refl],
                },
            }],
            qed: vec![Ref::label("s1")],
        };
        let report = check_proof(&pons(), &proof, &Registry::new(), DegeneracyMode::Strict);
        let failure = report.failure.unwrap();
        assert_eq!(failure.path, "s1");
        assert!(matches!(failure.error, KernelError::ClaimNotConcluded { .. }));
    }
}
