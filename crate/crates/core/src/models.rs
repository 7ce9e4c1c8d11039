//! Numeric semantics in three constant-curvature models.
//!
//! Points are carried as 3-vectors:
//! - Euclidean plane: `(x, y, 0)`.
//! - Poincaré disk: the corresponding point `(t, x, y)` of the upper sheet of
//!   the hyperboloid `-t² + x² + y² = -1`; disk coordinates are used only at
//!   the interface.
//! - Sphere: a unit vector with `z > 0`.
//!
//! Geodesic operations use the same formulas in every model, with the
//! model's bilinear form and its cos/cosh/identity exponential map.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Angle, Fact, Point, Segment};
use crate::kernel::{
    lemma_conclusions, CaseKind, ConstructionKind, Proof, Registry, Step, StepKind,
    TheoremStatement,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelId {
    Euclidean,
    Poincare,
    Sphere,
}

impl ModelId {
    pub const ALL: [ModelId; 3] = [ModelId::Euclidean, ModelId::Poincare, ModelId::Sphere];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::Euclidean => "euclidean",
            ModelId::Poincare => "poincare",
            ModelId::Sphere => "sphere",
        }
    }
}

impl std::fmt::Display for ModelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelId::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown model {s}"))
    }
}

/// Disk-coordinate bound for sampled Poincaré points.
pub const POINCARE_SAMPLE_RADIUS: f64 = 0.9;
/// Angular radius of the polar cap sphere samples are drawn from; any two
/// sampled points are at most twice this apart.
pub const SPHERE_CAP: f64 = 0.5;
/// Largest distance allowed between sampled sphere points.
pub const SPHERE_MAX_DIST: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("point outside the {0} model")]
    DomainError(ModelId),
    #[error("degenerate angle: an arm is shorter than the tolerance")]
    DegenerateAngle,
    #[error("point {0} is not in the instance")]
    MissingPoint(Point),
    #[error("geodesic leaves the model domain")]
    GeodesicOutOfDomain,
    #[error("no instance satisfying the hypotheses after {0} attempts")]
    SamplingFailed(usize),
    #[error("construction precondition fails numerically")]
    ConstructionPrecondition,
    #[error("could not place the points introduced by lemma {0}")]
    LemmaUnrealizable(String),
}

/// A point of one of the models; see the module docs for the encoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MPoint([f64; 3]);

impl MPoint {
    pub fn plane(x: f64, y: f64) -> MPoint {
        MPoint([x, y, 0.0])
    }

    pub fn disk(x: f64, y: f64) -> Result<MPoint, ModelError> {
        let r2 = x * x + y * y;
        if !(r2 < 1.0) {
            return Err(ModelError::DomainError(ModelId::Poincare));
        }
        let k = 1.0 - r2;
        Ok(MPoint([(1.0 + r2) / k, 2.0 * x / k, 2.0 * y / k]))
    }

    /// Normalizes `(x, y, z)`; it must lie in the open upper hemisphere.
    pub fn sphere(x: f64, y: f64, z: f64) -> Result<MPoint, ModelError> {
        let n = (x * x + y * y + z * z).sqrt();
        if !(n > 0.0) || !(z / n > 0.0) {
            return Err(ModelError::DomainError(ModelId::Sphere));
        }
        Ok(MPoint([x / n, y / n, z / n]))
    }

    pub fn raw(&self) -> [f64; 3] {
        self.0
    }

    /// Interface coordinates: `(x, y)` for the plane and the disk, the unit
    /// vector for the sphere.
    pub fn coords(&self, model: ModelId) -> Vec<f64> {
        let [a, b, c] = self.0;
        match model {
            ModelId::Euclidean => vec![a, b],
            ModelId::Poincare => vec![b / (1.0 + a), c / (1.0 + a)],
            ModelId::Sphere => vec![a, b, c],
        }
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add_scaled(a: [f64; 3], s: f64, b: [f64; 3]) -> [f64; 3] {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

fn scale(s: f64, a: [f64; 3]) -> [f64; 3] {
    [s * a[0], s * a[1], s * a[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// The model's bilinear form: Minkowski for the hyperboloid, dot otherwise.
fn form(model: ModelId, a: [f64; 3], b: [f64; 3]) -> f64 {
    match model {
        ModelId::Poincare => -a[0] * b[0] + a[1] * b[1] + a[2] * b[2],
        _ => a[0] * b[0] + a[1] * b[1] + a[2] * b[2],
    }
}

fn normalize_tangent(model: ModelId, v: [f64; 3]) -> Option<[f64; 3]> {
    let n = form(model, v, v).max(0.0).sqrt();
    (n > 1e-300).then(|| scale(1.0 / n, v))
}

/// Projects a point back onto the model surface after floating-point drift.
fn renormalize(model: ModelId, p: [f64; 3]) -> [f64; 3] {
    match model {
        ModelId::Euclidean => [p[0], p[1], 0.0],
        ModelId::Poincare => [(1.0 + p[1] * p[1] + p[2] * p[2]).sqrt(), p[1], p[2]],
        ModelId::Sphere => {
            let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            scale(1.0 / n, p)
        }
    }
}

pub fn dist(model: ModelId, p: &MPoint, q: &MPoint) -> f64 {
    let d = sub(p.0, q.0);
    match model {
        ModelId::Euclidean => d[0].hypot(d[1]),
        // |X - Y|² in the Minkowski form is 4 sinh²(d/2)
        ModelId::Poincare => 2.0 * (form(model, d, d).max(0.0).sqrt() / 2.0).asinh(),
        // chord length is 2 sin(d/2)
        ModelId::Sphere => {
            let chord = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            2.0 * (chord / 2.0).min(1.0).asin()
        }
    }
}

/// Unit tangent at `x` pointing along the geodesic toward `y`.
fn tangent(model: ModelId, x: &MPoint, y: &MPoint) -> Option<[f64; 3]> {
    let d = sub(y.0, x.0);
    let w = match model {
        ModelId::Euclidean => d,
        // Y + <X,Y> X written as D + <X,D> X to avoid cancellation
        ModelId::Poincare => add_scaled(d, form(model, x.0, d), x.0),
        ModelId::Sphere => add_scaled(d, -form(model, x.0, d), x.0),
    };
    normalize_tangent(model, w)
}

/// A unit tangent at `x` orthogonal to the unit tangent `u`.
fn perpendicular(model: ModelId, x: &MPoint, u: [f64; 3]) -> [f64; 3] {
    let w = match model {
        ModelId::Euclidean => [-u[1], u[0], 0.0],
        ModelId::Sphere => cross(x.0, u),
        ModelId::Poincare => {
            let c = cross(x.0, u);
            [-c[0], c[1], c[2]]
        }
    };
    normalize_tangent(model, w).expect("perpendicular of a unit tangent")
}

/// Some unit tangent at `x`.
fn base_tangent(model: ModelId, x: &MPoint) -> [f64; 3] {
    let e = match model {
        ModelId::Euclidean => return [1.0, 0.0, 0.0],
        ModelId::Poincare => [0.0, 1.0, 0.0],
        ModelId::Sphere if x.0[0].abs() < 0.9 => [1.0, 0.0, 0.0],
        ModelId::Sphere => [0.0, 1.0, 0.0],
    };
    let w = match model {
        ModelId::Poincare => add_scaled(e, form(model, x.0, e), x.0),
        _ => add_scaled(e, -form(model, x.0, e), x.0),
    };
    normalize_tangent(model, w).expect("tangent exists")
}

/// Follows the geodesic from `x` with unit initial velocity `u` for length
/// `s` (negative `s` goes backwards).
fn exp_map(model: ModelId, x: &MPoint, u: [f64; 3], s: f64) -> MPoint {
    let p = match model {
        ModelId::Euclidean => add_scaled(x.0, s, u),
        ModelId::Poincare => add_scaled(scale(s.cosh(), x.0), s.sinh(), u),
        ModelId::Sphere => add_scaled(scale(s.cos(), x.0), s.sin(), u),
    };
    MPoint(renormalize(model, p))
}

fn check_domain(model: ModelId, p: MPoint) -> Result<MPoint, ModelError> {
    let ok = match model {
        ModelId::Euclidean => p.0.iter().all(|c| c.is_finite()),
        ModelId::Poincare => p.0.iter().all(|c| c.is_finite()),
        ModelId::Sphere => p.0[2] > 0.0,
    };
    if ok {
        Ok(p)
    } else {
        Err(ModelError::GeodesicOutOfDomain)
    }
}

/// The point at signed distance `s` from `a` on the geodesic through `a`
/// and `b`, positive toward `b`.
pub fn along(model: ModelId, a: &MPoint, b: &MPoint, s: f64) -> Result<MPoint, ModelError> {
    let u = tangent(model, a, b).ok_or(ModelError::ConstructionPrecondition)?;
    check_domain(model, exp_map(model, a, u, s))
}

/// The point at distance `s` from `origin` on the ray making angle `theta`
/// with the ray toward `toward`.
pub fn offset(
    model: ModelId,
    origin: &MPoint,
    toward: &MPoint,
    theta: f64,
    s: f64,
) -> Result<MPoint, ModelError> {
    let u = tangent(model, origin, toward).ok_or(ModelError::ConstructionPrecondition)?;
    offset_dir(model, origin, u, theta, s)
}

/// The point at distance `s` from `origin` in direction `theta`, measured
/// from a fixed reference direction at `origin`.
pub fn polar(model: ModelId, origin: &MPoint, theta: f64, s: f64) -> Result<MPoint, ModelError> {
    offset_dir(model, origin, base_tangent(model, origin), theta, s)
}

fn offset_dir(
    model: ModelId,
    origin: &MPoint,
    u: [f64; 3],
    theta: f64,
    s: f64,
) -> Result<MPoint, ModelError> {
    let w = perpendicular(model, origin, u);
    let dir = add_scaled(scale(theta.cos(), u), theta.sin(), w);
    check_domain(model, exp_map(model, origin, dir, s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceProfile {
    pub eq_tol: f64,
    pub lt_margin: f64,
}

impl ToleranceProfile {
    pub fn for_model(model: ModelId) -> Self {
        match model {
            ModelId::Euclidean => Self::with_eq_tol(1e-9),
            ModelId::Poincare | ModelId::Sphere => Self::with_eq_tol(1e-7),
        }
    }

    pub fn with_eq_tol(eq_tol: f64) -> Self {
        ToleranceProfile { eq_tol, lt_margin: 10.0 * eq_tol }
    }

    /// `a == b` within the relative-plus-absolute tolerance.
    pub fn eq(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= self.eq_tol * (1.0 + a.abs().max(b.abs()))
    }

    /// `a < b` by more than the margin.
    pub fn lt(&self, a: f64, b: f64) -> bool {
        a + self.lt_margin * (1.0 + a.abs().max(b.abs())) < b
    }
}

/// The angle at `v` between the geodesics to `a` and `b`, in `[0, π]`.
///
/// Uses the model's law of cosines in half-angle form, which is exact
/// algebra on the usual `cos γ` expression but keeps precision for very
/// small and very large angles.
pub fn angle_at(model: ModelId, a: &MPoint, v: &MPoint, b: &MPoint) -> Result<f64, ModelError> {
    let p = dist(model, v, a);
    let q = dist(model, v, b);
    let r = dist(model, a, b);
    let tol = ToleranceProfile::for_model(model).eq_tol;
    if p < tol || q < tol {
        return Err(ModelError::DegenerateAngle);
    }
    let f: fn(f64) -> f64 = match model {
        ModelId::Euclidean => |x| x,
        ModelId::Poincare => f64::sinh,
        ModelId::Sphere => f64::sin,
    };
    // sin²(γ/2) and cos²(γ/2), both over the same positive denominator
    let s = f((r - p + q) / 2.0) * f((r + p - q) / 2.0);
    let c = f((p + q + r) / 2.0) * f((p + q - r) / 2.0);
    Ok(2.0 * s.max(0.0).sqrt().atan2(c.max(0.0).sqrt()))
}

/// One assignment of model points to named points.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub model: ModelId,
    pub points: BTreeMap<Point, MPoint>,
}

impl Instance {
    pub fn new(model: ModelId) -> Self {
        Instance { model, points: BTreeMap::new() }
    }

    pub fn get(&self, p: &Point) -> Result<&MPoint, ModelError> {
        self.points.get(p).ok_or_else(|| ModelError::MissingPoint(p.clone()))
    }

    pub fn insert(&mut self, p: Point, m: MPoint) {
        self.points.insert(p, m);
    }

    pub fn coords(&self) -> BTreeMap<String, Vec<f64>> {
        self.points.iter().map(|(p, m)| (p.name().to_owned(), m.coords(self.model))).collect()
    }

    pub fn dist(&self, a: &Point, b: &Point) -> Result<f64, ModelError> {
        Ok(dist(self.model, self.get(a)?, self.get(b)?))
    }

    pub fn segment(&self, s: &Segment) -> Result<f64, ModelError> {
        let (a, b) = s.endpoints();
        self.dist(a, b)
    }

    pub fn angle(&self, a: &Angle) -> Result<f64, ModelError> {
        let (p, q) = a.arms();
        angle_at(self.model, self.get(p)?, self.get(a.vertex())?, self.get(q)?)
    }

    /// `d(a,m) + d(m,b) - d(a,b)`.
    fn excess(&self, m: &Point, a: &Point, b: &Point) -> Result<(f64, f64), ModelError> {
        let ab = self.dist(a, b)?;
        Ok((self.dist(a, m)? + self.dist(m, b)? - ab, ab))
    }
}

pub fn eval_fact(inst: &Instance, fact: &Fact, tol: &ToleranceProfile) -> Result<bool, ModelError> {
    Ok(match fact {
        Fact::SegEq(s, t) => tol.eq(inst.segment(s)?, inst.segment(t)?),
        Fact::AngEq(s, t) => tol.eq(inst.angle(s)?, inst.angle(t)?),
        Fact::SegLt(s, t) => tol.lt(inst.segment(s)?, inst.segment(t)?),
        Fact::AngLt(s, t) => tol.lt(inst.angle(s)?, inst.angle(t)?),
        Fact::Between { mid, outer: (a, b) } => {
            let (excess, ab) = inst.excess(mid, a, b)?;
            excess.abs() <= tol.eq_tol * (1.0 + ab)
                && tol.lt(0.0, inst.dist(a, mid)?)
                && tol.lt(0.0, inst.dist(mid, b)?)
        }
        Fact::NonCollinear([a, b, c]) => {
            let mut separated = true;
            for (m, x, y) in [(a, b, c), (b, a, c), (c, a, b)] {
                let (excess, xy) = inst.excess(m, x, y)?;
                separated &= excess > tol.lt_margin * (1.0 + xy);
            }
            separated
        }
        Fact::AngleSumStraight([a, b, c]) => {
            let at = |v: &Point, p: &Point, q: &Point| -> Result<f64, ModelError> {
                angle_at(inst.model, inst.get(p)?, inst.get(v)?, inst.get(q)?)
            };
            tol.eq(at(a, b, c)? + at(b, a, c)? + at(c, a, b)?, PI)
        }
        Fact::Absurd => false,
    })
}

/// A uniformly drawn point of the sampling region.
pub fn random_point(model: ModelId, rng: &mut impl Rng) -> MPoint {
    match model {
        ModelId::Euclidean => MPoint::plane(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        ModelId::Poincare => {
            let r = POINCARE_SAMPLE_RADIUS * rng.random::<f64>().sqrt();
            let phi = rng.random_range(0.0..2.0 * PI);
            MPoint::disk(r * phi.cos(), r * phi.sin()).expect("inside the disk")
        }
        ModelId::Sphere => {
            let z = rng.random_range(SPHERE_CAP.cos()..1.0);
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = rng.random_range(0.0..2.0 * PI);
            MPoint([rho * phi.cos(), rho * phi.sin(), z])
        }
    }
}

/// Arm lengths for constructive sampling.
pub fn arm_range(model: ModelId) -> (f64, f64) {
    match model {
        ModelId::Euclidean => (0.2, 1.0),
        ModelId::Poincare => (0.2, 1.5),
        ModelId::Sphere => (0.1, SPHERE_MAX_DIST / 2.0),
    }
}

/// Whether a sampled point lies in the region samples must come from.
fn in_sample_region(model: ModelId, p: &MPoint) -> bool {
    match model {
        ModelId::Euclidean => true,
        ModelId::Poincare => {
            let c = p.coords(model);
            c[0].hypot(c[1]) <= POINCARE_SAMPLE_RADIUS
        }
        ModelId::Sphere => p.0[2] > 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleLimits {
    pub max_attempts: usize,
}

impl Default for SampleLimits {
    fn default() -> Self {
        SampleLimits { max_attempts: 1000 }
    }
}

/// An isosceles pattern among the hypotheses: apex and the two base points.
fn isosceles_pattern(st: &TheoremStatement) -> Option<[Point; 3]> {
    st.hypothesis_facts().find_map(|f| match f {
        Fact::SegEq(s, t) => {
            let (a, b) = s.endpoints();
            let (c, d) = t.endpoints();
            let shared = [(a, b, c, d), (a, b, d, c), (b, a, c, d), (b, a, d, c)];
            shared
                .into_iter()
                .find(|(x, y, z, w)| x == z && y != w)
                .map(|(x, y, _, w)| [x.clone(), y.clone(), w.clone()])
        }
        Fact::AngEq(s, t) => {
            // ang(X,Y,Z) = ang(X,Z,Y): base angles at Y and Z, apex X
            let (y, z) = (s.vertex(), t.vertex());
            if y == z {
                return None;
            }
            let (s1, s2) = s.arms();
            let (t1, t2) = t.arms();
            let x = if s1 == z { s2 } else if s2 == z { s1 } else { return None };
            let others = [t1, t2];
            (others.contains(&x) && others.contains(&y) && x != y && x != z)
                .then(|| [x.clone(), y.clone(), z.clone()])
        }
        _ => None,
    })
}

fn sample_once(
    model: ModelId,
    st: &TheoremStatement,
    rng: &mut ChaCha8Rng,
) -> Result<Instance, ModelError> {
    let mut inst = Instance::new(model);
    if let Some([x, y, z]) = isosceles_pattern(st) {
        if st.given.contains(&x) && st.given.contains(&y) && st.given.contains(&z) {
            let apex = match model {
                // keep the whole triangle well inside the sampling region
                ModelId::Sphere => {
                    let r = rng.random_range(0.0..SPHERE_CAP / 2.0);
                    let phi = rng.random_range(0.0..2.0 * PI);
                    MPoint([r.sin() * phi.cos(), r.sin() * phi.sin(), r.cos()])
                }
                _ => random_point(model, rng),
            };
            let (lo, hi) = arm_range(model);
            let len = rng.random_range(lo..hi);
            let theta = rng.random_range(0.15..PI - 0.15);
            let dir0 = rng.random_range(0.0..2.0 * PI);
            let u = base_tangent(model, &apex);
            let b = offset_dir(model, &apex, u, dir0, len)?;
            let c = offset_dir(model, &apex, u, dir0 + theta, len)?;
            inst.insert(x, apex);
            inst.insert(y, b);
            inst.insert(z, c);
        }
    }
    // interior points for betweenness hypotheses, once their ends exist
    let mut progress = true;
    while progress {
        progress = false;
        for f in st.hypothesis_facts() {
            if let Fact::Between { mid, outer: (a, b) } = f {
                if inst.points.contains_key(mid) {
                    continue;
                }
                let (Ok(pa), Ok(pb)) = (inst.get(a), inst.get(b)) else { continue };
                let (pa, pb) = (*pa, *pb);
                let d = dist(model, &pa, &pb);
                let t = rng.random_range(0.1..0.9);
                inst.insert(mid.clone(), along(model, &pa, &pb, t * d)?);
                progress = true;
            }
        }
    }
    for p in &st.given {
        if !inst.points.contains_key(p) {
            inst.insert(p.clone(), random_point(model, rng));
        }
    }
    Ok(inst)
}

fn sample_valid(model: ModelId, inst: &Instance) -> bool {
    let pts: Vec<&MPoint> = inst.points.values().collect();
    if !pts.iter().all(|p| in_sample_region(model, p)) {
        return false;
    }
    if model == ModelId::Sphere {
        for (i, p) in pts.iter().enumerate() {
            for q in &pts[i + 1..] {
                if dist(model, p, q) > SPHERE_MAX_DIST {
                    return false;
                }
            }
        }
    }
    true
}

/// Draws an instance of the statement's given points satisfying all its
/// hypotheses.
pub fn sample_instance(
    model: ModelId,
    st: &TheoremStatement,
    rng: &mut ChaCha8Rng,
    limits: SampleLimits,
) -> Result<Instance, ModelError> {
    let tol = ToleranceProfile::for_model(model);
    for _ in 0..limits.max_attempts {
        let Ok(inst) = sample_once(model, st, rng) else { continue };
        if !sample_valid(model, &inst) {
            continue;
        }
        let holds = st
            .hypothesis_facts()
            .all(|h| eval_fact(&inst, h, &tol).unwrap_or(false));
        if holds {
            return Ok(inst);
        }
    }
    Err(ModelError::SamplingFailed(limits.max_attempts))
}

/// Places `fresh` as the construction prescribes.
pub fn realize_construction(
    inst: &mut Instance,
    kind: &ConstructionKind,
    fresh: &Point,
) -> Result<(), ModelError> {
    let model = inst.model;
    let p = match kind {
        ConstructionKind::Extend { a, b, length } => {
            let len = inst.segment(length)?;
            // backwards from b along the geodesic toward a
            along(model, inst.get(b)?, inst.get(a)?, -len)?
        }
        ConstructionKind::Layoff { from, toward, length } => {
            let len = inst.segment(length)?;
            if len >= inst.dist(from, toward)? {
                return Err(ModelError::ConstructionPrecondition);
            }
            along(model, inst.get(from)?, inst.get(toward)?, len)?
        }
    };
    inst.insert(fresh.clone(), p);
    Ok(())
}

/// Signed residual of an equality fact: left measure minus right.
fn residual(inst: &Instance, fact: &Fact) -> Result<f64, ModelError> {
    match fact {
        Fact::SegEq(s, t) => Ok(inst.segment(s)? - inst.segment(t)?),
        Fact::AngEq(s, t) => Ok(inst.angle(s)? - inst.angle(t)?),
        _ => unreachable!("only equalities have residuals"),
    }
}

/// Places points a lemma introduces: each must be the midpoint of a
/// betweenness conclusion whose ends are placed; its position on that
/// segment is found by bisection on the first equality conclusion that
/// mentions it.
fn realize_lemma(inst: &mut Instance, name: &str, conclusions: &[Fact], fresh: &[Point]) -> Result<(), ModelError> {
    let fail = || ModelError::LemmaUnrealizable(name.to_owned());
    for f in fresh {
        let (a, b) = conclusions
            .iter()
            .find_map(|c| match c {
                Fact::Between { mid, outer } if mid == f => Some(outer.clone()),
                _ => None,
            })
            .ok_or_else(fail)?;
        let eq = conclusions
            .iter()
            .find(|c| matches!(c, Fact::SegEq(..) | Fact::AngEq(..)) && c.points().contains(&f))
            .ok_or_else(fail)?
            .clone();
        let (pa, pb) = (*inst.get(&a)?, *inst.get(&b)?);
        let d = dist(inst.model, &pa, &pb);
        let at = |t: f64, inst: &mut Instance| -> Result<f64, ModelError> {
            inst.insert(f.clone(), along(inst.model, &pa, &pb, t * d)?);
            residual(inst, &eq)
        };
        let (mut lo, mut hi) = (1e-9, 1.0 - 1e-9);
        let r_lo = at(lo, inst)?;
        let r_hi = at(hi, inst)?;
        if r_lo.signum() == r_hi.signum() {
            return Err(fail());
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if at(mid, inst)?.signum() == r_lo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        at(0.5 * (lo + hi), inst)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub trial: usize,
    /// Step path that produced the fact, or `conclusion`.
    pub step: String,
    pub fact: String,
    pub points: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub model: ModelId,
    pub trials_run: usize,
    /// Trials without a usable instance: sampling failed or a construction
    /// left the model domain.
    pub skipped: usize,
    pub failures: usize,
    pub first_counterexample: Option<Counterexample>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelCheckConfig {
    pub trials: usize,
    pub seed: u64,
    pub tol: ToleranceProfile,
    pub limits: SampleLimits,
}

impl ModelCheckConfig {
    pub fn new(model: ModelId, trials: usize, seed: u64) -> Self {
        ModelCheckConfig {
            trials,
            seed,
            tol: ToleranceProfile::for_model(model),
            limits: SampleLimits::default(),
        }
    }
}

/// The random stream for one trial; independent of scheduling.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

enum Trial {
    Pass,
    Skip,
    Fail { step: String, fact: String, points: BTreeMap<String, Vec<f64>> },
}

struct Walker<'a> {
    registry: &'a Registry,
    tol: ToleranceProfile,
}

impl Walker<'_> {
    /// Realizes and evaluates `steps`; `Ok(Some(..))` is the first false fact.
    fn steps(
        &self,
        inst: &mut Instance,
        steps: &[Step],
        prefix: &str,
    ) -> Result<Option<(String, Fact)>, ModelError> {
        for step in steps {
            let path = format!("{prefix}{}", step.label);
            let facts: Vec<Fact> = match &step.kind {
                StepKind::Rule { claims, .. } => claims.clone(),
                StepKind::Construct { kind, fresh, .. } => {
                    realize_construction(inst, kind, fresh)?;
                    construction_facts(kind, fresh)
                }
                StepKind::Lemma { name, args, fresh } => {
                    let lemma = self
                        .registry
                        .get(name)
                        .ok_or_else(|| ModelError::LemmaUnrealizable(name.clone()))?;
                    let concl = lemma_conclusions(lemma, args, fresh)
                        .map_err(|_| ModelError::LemmaUnrealizable(name.clone()))?;
                    realize_lemma(inst, name, &concl, fresh)?;
                    concl
                }
                StepKind::Cases { left, right, branches } => {
                    let (l, r) = (inst.segment(left)?, inst.segment(right)?);
                    let case = if self.tol.eq(l, r) {
                        CaseKind::Eq
                    } else if l < r {
                        CaseKind::Lt
                    } else {
                        CaseKind::Gt
                    };
                    let branch = branches.iter().find(|b| b.case == case).expect("three branches");
                    let prefix = format!("{path}/{}/", case.name());
                    if let Some(bad) = self.steps(inst, &branch.steps, &prefix)? {
                        return Ok(Some(bad));
                    }
                    Vec::new()
                }
            };
            for f in facts {
                if !eval_fact(inst, &f, &self.tol).unwrap_or(false) {
                    return Ok(Some((path, f)));
                }
            }
        }
        Ok(None)
    }
}

fn construction_facts(kind: &ConstructionKind, fresh: &Point) -> Vec<Fact> {
    let seg = |a: &Point, b: &Point| crate::geom::canon_segment(a, b).ok();
    let mut out = Vec::new();
    match kind {
        ConstructionKind::Extend { a, b, length } => {
            out.extend(Fact::between(b, a, fresh).ok());
            out.extend(seg(b, fresh).map(|s| Fact::seg_eq(s, length.clone())));
        }
        ConstructionKind::Layoff { from, toward, length } => {
            out.extend(Fact::between(fresh, from, toward).ok());
            out.extend(seg(from, fresh).map(|s| Fact::seg_eq(s, length.clone())));
        }
    }
    out
}

fn run_trial(
    model: ModelId,
    st: &TheoremStatement,
    proof: Option<&Proof>,
    registry: &Registry,
    cfg: &ModelCheckConfig,
    trial: usize,
) -> Trial {
    let mut rng = trial_rng(cfg.seed, trial);
    let Ok(mut inst) = sample_instance(model, st, &mut rng, cfg.limits) else {
        return Trial::Skip;
    };
    let walker = Walker { registry, tol: cfg.tol };
    let bad = match proof {
        Some(proof) => match walker.steps(&mut inst, &proof.steps, "") {
            Ok(bad) => bad,
            Err(_) => return Trial::Skip,
        },
        None => None,
    };
    let bad = bad.or_else(|| {
        st.conclusions
            .iter()
            .find(|c| !eval_fact(&inst, c, &cfg.tol).unwrap_or(false))
            .map(|c| ("conclusion".to_owned(), c.clone()))
    });
    match bad {
        None => Trial::Pass,
        Some((step, fact)) => Trial::Fail { step, fact: fact.to_string(), points: inst.coords() },
    }
}

/// Samples the hypotheses `cfg.trials` times, realizes the proof's
/// constructions, and evaluates every derived fact and every conclusion.
/// Without a proof only the conclusions are evaluated.
pub fn model_check(
    model: ModelId,
    st: &TheoremStatement,
    proof: Option<&Proof>,
    registry: &Registry,
    cfg: &ModelCheckConfig,
) -> ModelReport {
    let outcomes: Vec<Trial> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(model, st, proof, registry, cfg, t))
        .collect();
    let mut report = ModelReport {
        model,
        trials_run: cfg.trials,
        skipped: 0,
        failures: 0,
        first_counterexample: None,
    };
    for (trial, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Trial::Pass => {}
            Trial::Skip => report.skipped += 1,
            Trial::Fail { step, fact, points } => {
                report.failures += 1;
                report
                    .first_counterexample
                    .get_or_insert(Counterexample { trial, step, fact, points });
            }
        }
    }
    report
}
