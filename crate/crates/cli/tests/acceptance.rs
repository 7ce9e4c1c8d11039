//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::f64::consts::PI;
use std::panic;
use std::time::{Duration, Instant};

use rand::Rng;

use pons_core::depgraph::{Classification, DepGraph, Node, NodeKind};
use pons_core::kernel::{check_proof, CheckStatus, DegeneracyMode, Tag};
use pons_core::models::{
    angle_at, dist, model_check, random_point, trial_rng, MPoint, ModelCheckConfig, ModelId,
    ToleranceProfile,
};
use pons_core::oracles::{brute_cycles, tangent_angle};
use pons_core::pipeline::Workspace;
use pons_core::proofscript::corpus::{ANGLESUM, ANGLESUM_FILE};
use pons_core::proofscript::mutation::mutants;
use pons_core::proofscript::{parse_bytes, ItemKind};
use pons_core::rules::RuleId;
use pons_core::soundness::check_rule;

const PROVABLE: [&str; 5] = ["pappus_pons", "pappus_converse", "euclid_i5", "euclid_i5_converse", "euclid_i6"];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn ms(d: Duration) -> String {
    format!("{:.1} ms", d.as_secs_f64() * 1e3)
}

fn corpus_soundness() -> Outcome {
    let start = Instant::now();
    let ws = Workspace::corpus();
    let mut ok = 0;
    let mut bad = Vec::new();
    for name in PROVABLE {
        let Some(item) = ws.item(name) else {
            bad.push(format!("{name} missing"));
            continue;
        };
        let r = check_proof(&item.statement, item.proof.as_ref().unwrap(), &ws.registry, DegeneracyMode::Strict);
        if r.is_ok() && r.assumptions.is_empty() {
            ok += 1;
        } else {
            bad.push(format!("{name}: {:?}", r.failure));
        }
    }
    let took = start.elapsed();
    let pass = ok == PROVABLE.len() && took < Duration::from_secs(1);
    outcome(pass, format!("{ok}/{} ok in strict mode, {} (limit 1 s) {}", PROVABLE.len(), ms(took), bad.join("; ")))
}

fn mutation_sensitivity() -> Outcome {
    let ws = Workspace::corpus();
    let (mut total, mut killed) = (0, 0);
    let mut survivors = Vec::new();
    for it in ws.items.iter().filter(|it| it.kind == ItemKind::Theorem) {
        let proof = it.proof.as_ref().unwrap();
        if !check_proof(&it.statement, proof, &ws.registry, DegeneracyMode::Strict).is_ok() {
            continue;
        }
        for m in mutants(proof) {
            total += 1;
            let r = check_proof(&it.statement, &m.proof, &ws.registry, DegeneracyMode::Strict);
            if r.status == CheckStatus::Failed {
                killed += 1;
            } else {
                survivors.push(format!("{}: {}", it.name(), m.description));
            }
        }
    }
    outcome(total >= 25 && killed == total, format!("{killed}/{total} mutants killed {}", survivors.join("; ")))
}

fn circularity() -> Outcome {
    let ws = Workspace::corpus();
    let graph = ws.graph(&ws.check(DegeneracyMode::Strict)).unwrap();
    let cycles = graph.detect_cycles();
    let want = vec![
        vec!["bisector_foot", "bisector_pons", "euclid_i7", "euclid_i8", "euclid_i9"],
        vec!["inscribed_angle_theorem", "pons_via_inscribed"],
    ];
    let i5 = graph.classify("euclid_i5").ok();
    let area = graph.classify("pons_via_area").ok();
    let pass = cycles == want
        && i5 == Some(Classification::Neutral)
        && area == Some(Classification::EuclideanOnly);
    let shown: Vec<String> = cycles.iter().map(|c| format!("[{}]", c.join(", "))).collect();
    outcome(
        pass,
        format!(
            "{} cycles {}; euclid_i5 {}; pons_via_area {}",
            cycles.len(),
            shown.join(" "),
            i5.map_or("?".into(), |c| c.to_string()),
            area.map_or("?".into(), |c| c.to_string())
        ),
    )
}

fn neutral_validity() -> Outcome {
    let ws = Workspace::corpus();
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    for name in ["pappus_pons", "pappus_converse"] {
        let item = ws.item(name).unwrap();
        for m in ModelId::ALL {
            let cfg = ModelCheckConfig::new(m, 1000, 42);
            let r = model_check(m, &item.statement, item.proof.as_ref(), &ws.registry, &cfg);
            pass &= r.trials_run == 1000 && r.skipped == 0 && r.failures == 0;
            parts.push(format!("{name}/{m} {} fail {} skip (tol {:e})", r.failures, r.skipped, cfg.tol.eq_tol));
        }
    }
    let took = start.elapsed();
    pass &= took < Duration::from_secs(10);
    outcome(pass, format!("{}; {} (limit 10 s)", parts.join(", "), ms(took)))
}

fn euclidean_divergence() -> Outcome {
    let ws = Workspace::load([(ANGLESUM_FILE, ANGLESUM)]).unwrap();
    let st = &ws.item("anglesum").unwrap().statement;
    let e = model_check(ModelId::Euclidean, st, None, &ws.registry, &ModelCheckConfig::new(ModelId::Euclidean, 1000, 42));
    let mut pass = e.trials_run == 1000 && e.failures == 0;
    let mut parts = vec![format!("euclidean {} failures / {}", e.failures, e.trials_run)];
    for m in [ModelId::Poincare, ModelId::Sphere] {
        let r = model_check(m, st, None, &ws.registry, &ModelCheckConfig::new(m, 100, 42));
        let Some(cx) = r.first_counterexample else {
            pass = false;
            parts.push(format!("{m}: no counterexample"));
            continue;
        };
        let p = |n: &str| {
            let c = &cx.points[n];
            match m {
                ModelId::Sphere => MPoint::sphere(c[0], c[1], c[2]).unwrap(),
                _ => MPoint::disk(c[0], c[1]).unwrap(),
            }
        };
        let (a, b, c) = (p("A"), p("B"), p("C"));
        let sum = angle_at(m, &b, &a, &c).unwrap() + angle_at(m, &a, &b, &c).unwrap() + angle_at(m, &a, &c, &b).unwrap();
        let side_ok = if m == ModelId::Poincare { sum < PI } else { sum > PI };
        pass &= side_ok && cx.trial < 100;
        parts.push(format!("{m} counterexample at trial {} with angle sum {sum:.6}", cx.trial));
    }
    outcome(pass, parts.join(", "))
}

fn rule_soundness() -> Outcome {
    let mut pass = true;
    let mut bad = Vec::new();
    let mut checked = 0;
    for m in ModelId::ALL {
        for rule in RuleId::ALL {
            let r = check_rule(rule, m, 1000, 2024);
            checked += r.instances;
            if !(r.passed() && r.instances == 1000) {
                pass = false;
                bad.push(format!("{rule}/{m}: {} failures, {} not generated, {:?}", r.failures, r.generator_failures, r.first_failure));
            }
        }
    }
    outcome(
        pass,
        format!("{} rules x 3 models, {checked} instantiations {}", RuleId::ALL.len(), bad.join("; ")),
    )
}

fn graph_of(n: usize, edges: &[(usize, usize)]) -> DepGraph {
    let mut g = DepGraph::new();
    for i in 0..n {
        let uses: Vec<String> = edges.iter().filter(|e| e.0 == i).map(|e| format!("n{}", e.1)).collect();
        g.register(Node::new(format!("n{i}"), NodeKind::Theorem, [Tag::Neutral]), &uses).unwrap();
    }
    g
}

fn cycles_agree(n: usize, edges: &[(usize, usize)]) -> bool {
    let want: Vec<Vec<String>> = brute_cycles(n, edges)
        .into_iter()
        .map(|c| c.into_iter().map(|i| format!("n{i}")).collect())
        .collect();
    graph_of(n, edges).detect_cycles() == want
}

fn oracle_equivalence() -> Outcome {
    let mut mismatches = 0;
    let mut exhaustive = 0u64;
    for n in 1..=4usize {
        let slots: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).collect();
        for mask in 0u64..(1 << slots.len()) {
            let edges: Vec<(usize, usize)> =
                slots.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, e)| *e).collect();
            exhaustive += 1;
            if !cycles_agree(n, &edges) {
                mismatches += 1;
            }
        }
    }
    let mut rng = trial_rng(77, 0);
    let sampled = 20_000;
    for k in 0..sampled {
        let n = 5 + k % 4;
        let density = rng.random_range(0.02..0.4);
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .filter(|_| rng.random::<f64>() < density)
            .collect();
        if !cycles_agree(n, &edges) {
            mismatches += 1;
        }
    }
    let mut worst = Vec::new();
    let mut angle_ok = true;
    for m in ModelId::ALL {
        let tol = ToleranceProfile::for_model(m).eq_tol;
        let mut rng = trial_rng(78, m as usize);
        let mut max_err: f64 = 0.0;
        let mut done = 0;
        while done < 1000 {
            let (a, v, b) = (random_point(m, &mut rng), random_point(m, &mut rng), random_point(m, &mut rng));
            if dist(m, &a, &v) < 1e-3 || dist(m, &b, &v) < 1e-3 {
                continue;
            }
            let err = (angle_at(m, &a, &v, &b).unwrap() - tangent_angle(m, &a, &v, &b)).abs();
            max_err = max_err.max(err);
            done += 1;
        }
        angle_ok &= max_err <= tol;
        worst.push(format!("{m} max error {max_err:.1e} (tol {tol:e})"));
    }
    outcome(
        mismatches == 0 && angle_ok,
        format!(
            "cycles: {mismatches} mismatches over all {exhaustive} digraphs with <= 4 nodes and {sampled} random digraphs with 5-8 nodes; angles: {}",
            worst.join(", ")
        ),
    )
}

const ALPHABET: &[&str] = &[
    "theorem", "declare", "tags:", "neutral", "euclidean", "points", "assume", "introduce", "show",
    "proof", "qed", "from", "by", "case", "cases", "lt", "eq", "gt", "vs", "close", "goal", "absurd",
    "seg", "ang", "between", "noncollinear", "anglesum", "pi", "==", "<", "(", ")", "[", "]", ",",
    ".", ":", "refl", "sym", "extend", "layoff", "toward", "as", "lemma", "uses", "A", "B", "C",
    "s1", "h1", "SAS_ORD", "1", "\n", "\n  ", "  ", " ", "#", "\u{e9}",
];

fn parser_robustness() -> Outcome {
    panic::set_hook(Box::new(|_| {}));
    let mut rng = trial_rng(79, 0);
    let total = 100_000;
    let (mut parsed, mut errors, mut panics) = (0, 0, 0);
    for k in 0..total {
        let len = rng.random_range(0..160);
        let bytes: Vec<u8> = if k % 2 == 0 {
            (0..len).map(|_| rng.random()).collect()
        } else {
            let mut s = Vec::new();
            for _ in 0..len / 4 {
                if rng.random::<f64>() < 0.05 {
                    s.push(rng.random());
                } else {
                    s.extend_from_slice(ALPHABET[rng.random_range(0..ALPHABET.len())].as_bytes());
                    s.push(b' ');
                }
            }
            s
        };
        match panic::catch_unwind(|| parse_bytes(&bytes).is_ok()) {
            Ok(true) => parsed += 1,
            Ok(false) => errors += 1,
            Err(_) => panics += 1,
        }
    }
    let _ = panic::take_hook();
    outcome(panics == 0, format!("{total} inputs: {parsed} scripts, {errors} syntax errors, {panics} panics"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("corpus soundness", corpus_soundness),
        ("mutation sensitivity", mutation_sensitivity),
        ("circularity reproduction", circularity),
        ("neutral validity", neutral_validity),
        ("euclidean-only divergence", euclidean_divergence),
        ("rule-level soundness", rule_soundness),
        ("oracle equivalence", oracle_equivalence),
        ("parser robustness", parser_robustness),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("{} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail.trim_end());
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
