//! Numeric soundness of the kernel rules.
//!
//! For each rule and model, a generator builds configurations that satisfy
//! the premises and non-collinearity side conditions by construction; the
//! conclusions must then evaluate true. The two ABSURD rules conclude a
//! fact that is never true, so for them the check is that their premises
//! never hold together: the generator alternates between making one
//! premise true and the other.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::geom::{Fact, Point};
use crate::models::{
    along, angle_at, arm_range, dist, eval_fact, polar, random_point, trial_rng, Instance,
    MPoint, ModelError, ModelId, ToleranceProfile,
};
use crate::rules::{Form, RuleId, SideCondition};

type R<T> = Result<T, ModelError>;

/// Attempts per instantiation before the generator gives up.
const MAX_ATTEMPTS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleSoundness {
    pub rule: RuleId,
    pub model: ModelId,
    /// Premise-satisfying instantiations checked.
    pub instances: usize,
    /// Instantiations the generator could not produce.
    pub generator_failures: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl RuleSoundness {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.generator_failures == 0
    }
}

struct Gen<'a> {
    m: ModelId,
    rng: &'a mut ChaCha8Rng,
}

impl Gen<'_> {
    fn pt(&mut self) -> MPoint {
        random_point(self.m, self.rng)
    }

    fn len(&mut self) -> f64 {
        let (lo, hi) = arm_range(self.m);
        self.rng.random_range(lo..hi)
    }

    fn dir(&mut self) -> f64 {
        self.rng.random_range(0.0..2.0 * PI)
    }

    fn sign(&mut self) -> f64 {
        if self.rng.random::<bool>() {
            1.0
        } else {
            -1.0
        }
    }

    fn opening(&mut self) -> f64 {
        self.rng.random_range(0.1..PI - 0.1)
    }

    fn seg(&mut self, len: f64) -> R<[MPoint; 2]> {
        let a = self.pt();
        let phi = self.dir();
        Ok([a, polar(self.m, &a, phi, len)?])
    }

    fn random_seg(&mut self) -> R<[MPoint; 2]> {
        let len = self.len();
        self.seg(len)
    }

    /// `[a, v, b]` with the angle at `v` equal to `gamma`.
    fn angle(&mut self, gamma: f64) -> R<[MPoint; 3]> {
        let v = self.pt();
        let (r1, r2, phi, s) = (self.len(), self.len(), self.dir(), self.sign());
        Ok([polar(self.m, &v, phi, r1)?, v, polar(self.m, &v, phi + s * gamma, r2)?])
    }

    fn triangle(&mut self) -> R<[MPoint; 3]> {
        let g = self.opening();
        self.angle(g)
    }

    fn inside(&mut self, a: &MPoint, b: &MPoint) -> R<MPoint> {
        let t = self.rng.random_range(0.1..0.9);
        along(self.m, a, b, t * dist(self.m, a, b))
    }

    fn ang(&self, a: &MPoint, v: &MPoint, b: &MPoint) -> R<f64> {
        angle_at(self.m, a, v, b)
    }
}

/// Smallest root of an increasing function on `(lo, ..)`, with the upper
/// end found by doubling up to `cap`.
fn solve_increasing(mut f: impl FnMut(f64) -> R<f64>, lo: f64, cap: f64) -> R<f64> {
    let mut lo = lo;
    if f(lo)? > 0.0 {
        return Err(ModelError::ConstructionPrecondition);
    }
    let mut hi = 2.0 * lo.max(0.125);
    while f(hi)? <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > cap {
            return Err(ModelError::ConstructionPrecondition);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn length_cap(m: ModelId) -> f64 {
    match m {
        ModelId::Euclidean => 64.0,
        ModelId::Poincare => 16.0,
        ModelId::Sphere => 1.5,
    }
}

/// Points in schema-variable order for one instantiation of `form` of
/// `rule`. `k` is the instantiation index.
fn generate(rule: RuleId, form: usize, k: usize, g: &mut Gen<'_>) -> R<Vec<MPoint>> {
    let m = g.m;
    Ok(match rule {
        RuleId::SegRefl => vec![g.pt(), g.pt()],
        RuleId::AngRefl => g.triangle()?.to_vec(),
        RuleId::SegSym => {
            let [a, b] = g.random_seg()?;
            let [c, d] = g.seg(dist(m, &a, &b))?;
            vec![a, b, c, d]
        }
        RuleId::SegTrans => {
            let [a, b] = g.random_seg()?;
            let l = dist(m, &a, &b);
            let [c, d] = g.seg(l)?;
            let [e, f] = g.seg(l)?;
            vec![a, b, c, d, e, f]
        }
        RuleId::AngSym | RuleId::AngTrans => {
            let t = g.triangle()?;
            let gamma = g.ang(&t[0], &t[1], &t[2])?;
            let mut out = t.to_vec();
            let copies = if rule == RuleId::AngSym { 1 } else { 2 };
            for _ in 0..copies {
                out.extend(g.angle(gamma)?);
            }
            out
        }
        RuleId::SasOrd => {
            let [p2, p1, p3] = g.triangle()?;
            let gamma = g.ang(&p2, &p1, &p3)?;
            let q1 = g.pt();
            let (phi, s) = (g.dir(), g.sign());
            let q2 = polar(m, &q1, phi, dist(m, &p1, &p2))?;
            let q3 = polar(m, &q1, phi + s * gamma, dist(m, &p1, &p3))?;
            vec![p1, p2, p3, q1, q2, q3]
        }
        RuleId::AsaOrd => {
            let [p2, p1, p3] = g.triangle()?;
            let beta = g.ang(&p1, &p2, &p3)?;
            let gamma = g.ang(&p1, &p3, &p2)?;
            let q2 = g.pt();
            let (phi, s) = (g.dir(), g.sign());
            let q3 = polar(m, &q2, phi, dist(m, &p2, &p3))?;
            // q1 on the ray from q2 at angle beta; slide it out until the
            // angle at q3 reaches gamma
            let ray = |t: f64| polar(m, &q2, phi + s * beta, t);
            let t = solve_increasing(
                |t| Ok(angle_at(m, &q2, &q3, &ray(t)?)? - gamma),
                1e-6,
                length_cap(m),
            )?;
            vec![p1, p2, p3, ray(t)?, q2, q3]
        }
        RuleId::SegSum => {
            let [a, b] = g.random_seg()?;
            let mid = g.inside(&a, &b)?;
            let a2 = g.pt();
            let phi = g.dir();
            let (am, mb) = (dist(m, &a, &mid), dist(m, &mid, &b));
            let m2 = polar(m, &a2, phi, am)?;
            let b2 = polar(m, &a2, phi, am + mb)?;
            vec![a, mid, b, a2, m2, b2]
        }
        RuleId::SuppCong => {
            let theta = g.opening();
            let mut out = Vec::new();
            for _ in 0..2 {
                let b = g.pt();
                let (phi, s) = (g.dir(), g.sign());
                let (l1, l2, l3) = (g.len(), g.len(), g.len());
                let d = polar(m, &b, phi, l1)?;
                let a = polar(m, &b, phi + PI, l2)?;
                let c = polar(m, &b, phi + s * theta, l3)?;
                out.extend([a, b, d, c]);
            }
            out
        }
        RuleId::ArmSubst => {
            let [v, w] = g.random_seg()?;
            let mid = g.inside(&v, &w)?;
            vec![v, mid, w, g.pt()]
        }
        RuleId::AngSum => {
            let [a, v, b] = g.triangle()?;
            let mid = g.inside(&a, &b)?;
            let alpha = g.ang(&a, &v, &mid)?;
            let beta = g.ang(&mid, &v, &b)?;
            let v2 = g.pt();
            let (phi, s, r1, r2) = (g.dir(), g.sign(), g.len(), g.len());
            let a2 = polar(m, &v2, phi, r1)?;
            let b2 = polar(m, &v2, phi + s * (alpha + beta), r2)?;
            let d = dist(m, &a2, &b2);
            let on = |t: f64| along(m, &a2, &b2, t * d);
            // the angle at v2 grows from 0 to alpha + beta along a2 b2
            let mut lo = 0.0;
            let mut hi = 1.0;
            for _ in 0..200 {
                let t = 0.5 * (lo + hi);
                if angle_at(m, &a2, &v2, &on(t)?)? < alpha {
                    lo = t;
                } else {
                    hi = t;
                }
            }
            vec![v, a, mid, b, v2, a2, on(0.5 * (lo + hi))?, b2]
        }
        RuleId::WholePartSeg => {
            let [a, b] = g.random_seg()?;
            vec![a, g.inside(&a, &b)?, b]
        }
        RuleId::WholePartAng => {
            let [a, b] = g.random_seg()?;
            vec![a, g.inside(&a, &b)?, b, g.pt()]
        }
        RuleId::LtSubstSeg => {
            let [a, b] = g.random_seg()?;
            let [c, d] = g.random_seg()?;
            let copy = if form == 0 { dist(m, &a, &b) } else { dist(m, &c, &d) };
            let [e, f] = g.seg(copy)?;
            vec![a, b, c, d, e, f]
        }
        RuleId::LtSubstAng => {
            let t1 = g.triangle()?;
            let t2 = g.triangle()?;
            let src = if form == 0 { &t1 } else { &t2 };
            let gamma = g.ang(&src[0], &src[1], &src[2])?;
            let t3 = g.angle(gamma)?;
            [t1, t2, t3].concat()
        }
        RuleId::AbsurdLtEqSeg => {
            let [a, b] = g.random_seg()?;
            let [c, d] = if k % 2 == 0 { g.seg(dist(m, &a, &b))? } else { g.random_seg()? };
            vec![a, b, c, d]
        }
        RuleId::AbsurdLtEqAng => {
            let t1 = g.triangle()?;
            let t2 = if k % 2 == 0 {
                let gamma = g.ang(&t1[0], &t1[1], &t1[2])?;
                g.angle(gamma)?
            } else {
                g.triangle()?
            };
            [t1, t2].concat()
        }
        RuleId::NcTransfer => {
            let [x, y] = g.random_seg()?;
            let z = g.pt();
            let d = dist(m, &x, &y);
            let s1: f64 = g.rng.random_range(-0.5..1.5);
            let mut s2 = g.rng.random_range(-0.5..1.5);
            if (s1 - s2).abs() < 0.1 {
                s2 = s1 + 0.3;
            }
            vec![x, y, z, along(m, &x, &y, s1 * d)?, along(m, &x, &y, s2 * d)?]
        }
    })
}

/// `p` on the geodesic through `x` and `y`, numerically.
fn on_geodesic(inst: &Instance, p: &Point, x: &Point, y: &Point, tol: &ToleranceProfile) -> R<bool> {
    let (px, py, xy) = (inst.dist(p, x)?, inst.dist(p, y)?, inst.dist(x, y)?);
    if px <= tol.eq_tol || py <= tol.eq_tol {
        return Ok(true);
    }
    let scale = 1.0 + px.max(py).max(xy);
    Ok([px + py - xy, px + xy - py, py + xy - px]
        .into_iter()
        .any(|e| e.abs() <= tol.eq_tol * scale))
}

fn sides_hold(
    form: &Form,
    names: &[Point],
    inst: &Instance,
    tol: &ToleranceProfile,
) -> R<bool> {
    for side in &form.sides {
        let ok = match *side {
            SideCondition::NonCollinear(a, b, c) => {
                match Fact::non_collinear(&names[a], &names[b], &names[c]) {
                    Ok(f) => eval_fact(inst, &f, tol)?,
                    Err(_) => false,
                }
            }
            SideCondition::OnOneLine([p, q, x, y]) => {
                on_geodesic(inst, &names[p], &names[x], &names[y], tol)?
                    && on_geodesic(inst, &names[q], &names[x], &names[y], tol)?
            }
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

enum Outcome {
    Pass,
    Fail(String),
    NoInstance,
}

fn one_instance(rule: RuleId, model: ModelId, seed: u64, k: usize) -> Outcome {
    let schema = rule.schema();
    let form_idx = k % schema.forms.len();
    let form = &schema.forms[form_idx];
    let names: Vec<Point> = schema.vars.iter().map(|v| Point::new(*v)).collect();
    let tol = ToleranceProfile::for_model(model);
    let absurd = matches!(rule, RuleId::AbsurdLtEqSeg | RuleId::AbsurdLtEqAng);
    let mut rng = trial_rng(seed, k);
    for _ in 0..MAX_ATTEMPTS {
        let mut g = Gen { m: model, rng: &mut rng };
        let Ok(points) = generate(rule, form_idx, k, &mut g) else { continue };
        let mut inst = Instance::new(model);
        for (n, p) in names.iter().zip(points) {
            inst.insert(n.clone(), p);
        }
        let eval = |pat: &crate::rules::Pat| -> R<bool> {
            match pat.instantiate(&names) {
                Ok(f) => eval_fact(&inst, &f, &tol),
                Err(_) => Ok(false),
            }
        };
        let Ok(premises) = form.premises.iter().map(eval).collect::<R<Vec<bool>>>() else {
            continue;
        };
        if absurd {
            if !premises.iter().any(|&b| b) {
                continue;
            }
            return if premises.iter().all(|&b| b) {
                Outcome::Fail(format!("both premises hold at {:?}", inst.coords()))
            } else {
                Outcome::Pass
            };
        }
        if !premises.iter().all(|&b| b) || !sides_hold(form, &names, &inst, &tol).unwrap_or(false)
        {
            continue;
        }
        for c in &form.conclusions {
            if !eval(c).unwrap_or(false) {
                let fact = c.instantiate(&names).map(|f| f.to_string()).unwrap_or_default();
                return Outcome::Fail(format!("{fact} fails at {:?}", inst.coords()));
            }
        }
        return Outcome::Pass;
    }
    Outcome::NoInstance
}

/// Checks `rule` on `instances` generated configurations in `model`.
pub fn check_rule(rule: RuleId, model: ModelId, instances: usize, seed: u64) -> RuleSoundness {
    let stream_seed = seed ^ ((rule as u64) << 8 | model as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let outcomes: Vec<Outcome> = (0..instances)
        .into_par_iter()
        .map(|k| one_instance(rule, model, stream_seed, k))
        .collect();
    let mut report = RuleSoundness {
        rule,
        model,
        instances: 0,
        generator_failures: 0,
        failures: 0,
        first_failure: None,
    };
    for o in outcomes {
        match o {
            Outcome::Pass => report.instances += 1,
            Outcome::Fail(msg) => {
                report.instances += 1;
                report.failures += 1;
                report.first_failure.get_or_insert(msg);
            }
            Outcome::NoInstance => report.generator_failures += 1,
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_rule_is_sound_on_a_small_sample() {
        for model in ModelId::ALL {
            for rule in RuleId::ALL {
                let r = check_rule(rule, model, 50, 1);
                assert!(r.passed(), "{rule} in {model}: {r:?}");
                assert_eq!(r.instances, 50);
            }
        }
    }

    #[test]
    fn an_unsound_rule_is_caught() {
        // SAS without the included-angle premise: two sides alone do not
        // fix the triangle
        let tol = ToleranceProfile::for_model(ModelId::Euclidean);
        let mut rng = trial_rng(9, 0);
        let mut g = Gen { m: ModelId::Euclidean, rng: &mut rng };
        let [p2, p1, p3] = g.triangle().unwrap();
        let q1 = g.pt();
        let q2 = polar(ModelId::Euclidean, &q1, 0.3, dist(ModelId::Euclidean, &p1, &p2)).unwrap();
        let q3 = polar(ModelId::Euclidean, &q1, 2.9, dist(ModelId::Euclidean, &p1, &p3)).unwrap();
        let names: Vec<Point> = ["p1", "p2", "p3", "q1", "q2", "q3"].map(Point::new).to_vec();
        let mut inst = Instance::new(ModelId::Euclidean);
        for (n, p) in names.iter().zip([p1, p2, p3, q1, q2, q3]) {
            inst.insert(n.clone(), p);
        }
        let form = &RuleId::SasOrd.schema().forms[0];
        let holds = |i: usize, pats: &[crate::rules::Pat]| {
            eval_fact(&inst, &pats[i].instantiate(&names).unwrap(), &tol).unwrap()
        };
        assert!(holds(0, &form.premises) && holds(1, &form.premises));
        assert!(!holds(0, &form.conclusions));
    }
}
