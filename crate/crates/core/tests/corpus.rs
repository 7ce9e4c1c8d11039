use std::collections::BTreeSet;

use pons_core::depgraph::Classification;
use pons_core::kernel::{check_proof, CheckStatus, DegeneracyMode};
use pons_core::pipeline::Workspace;
use pons_core::proofscript::corpus::{bundled_corpus, ExpectedStatus};
use pons_core::proofscript::mutation::mutants;
use pons_core::proofscript::{parse, ItemKind};

#[test]
fn corpus_has_nine_entries() {
    let entries = bundled_corpus();
    assert_eq!(entries.len(), 9);
    let ok: Vec<&str> = entries
        .iter()
        .filter(|e| e.expected_status == ExpectedStatus::Ok)
        .map(|e| e.theorem)
        .collect();
    assert_eq!(
        ok,
        [
            "pappus_pons",
            "euclid_i5",
            "euclid_i5_converse",
            "pappus_converse",
            "euclid_i6",
            "bisector_pons"
        ]
    );
}

#[test]
fn ok_entries_check_in_strict_mode() {
    let ws = Workspace::corpus();
    assert!(ws.rejected.is_empty(), "{:?}", ws.rejected);
    let reports = ws.check(DegeneracyMode::Strict);
    for entry in bundled_corpus() {
        if entry.expected_status != ExpectedStatus::Ok {
            continue;
        }
        let report = &reports[entry.theorem];
        assert_eq!(report.status, CheckStatus::Ok, "{}: {:?}", entry.theorem, report.failure);
        assert!(report.assumptions.is_empty(), "{}", entry.theorem);
    }
}

#[test]
fn edges_and_classifications_match_the_table() {
    let ws = Workspace::corpus();
    let reports = ws.check(DegeneracyMode::Strict);
    let graph = ws.graph(&reports).unwrap();
    for (i, entry) in bundled_corpus().iter().enumerate() {
        assert_eq!(ws.files[i], entry.file);
        let defined: BTreeSet<&str> = ws
            .items
            .iter()
            .zip(&ws.item_file)
            .filter(|(_, f)| **f == i)
            .map(|(it, _)| it.name())
            .collect();
        let edges: BTreeSet<(&str, &str)> = defined
            .iter()
            .flat_map(|n| graph.uses(n).map(move |u| (*n, u)))
            .collect();
        let expected: BTreeSet<(&str, &str)> = entry.expected_edges.iter().copied().collect();
        assert_eq!(edges, expected, "{}", entry.file);
        assert_eq!(
            graph.classify(entry.theorem).unwrap(),
            entry.expected_classification,
            "{}",
            entry.theorem
        );
    }
}

#[test]
fn corpus_cycles() {
    let ws = Workspace::corpus();
    let graph = ws.graph(&ws.check(DegeneracyMode::Strict)).unwrap();
    let cycles = graph.detect_cycles();
    assert_eq!(
        cycles,
        vec![
            vec!["bisector_foot", "bisector_pons", "euclid_i7", "euclid_i8", "euclid_i9"],
            vec!["inscribed_angle_theorem", "pons_via_inscribed"],
        ]
    );
    let basis = graph.axiom_basis("pappus_pons").unwrap();
    assert_eq!(basis, ["ANG_REFL", "SAS_ORD"].map(String::from).into());
    assert!(graph.axiom_basis("pons_via_area").unwrap().contains("euclidean_area_formula"));
    assert_eq!(graph.classify("euclid_i5").unwrap(), Classification::Neutral);
    let dot = graph.emit_dot();
    assert!(dot.contains("bisector_pons -> bisector_foot;"));
}

#[test]
fn every_mutant_is_rejected() {
    let ws = Workspace::corpus();
    let mut total = 0;
    for it in ws.items.iter().filter(|it| it.kind == ItemKind::Theorem) {
        let proof = it.proof.as_ref().unwrap();
        for m in mutants(proof) {
            total += 1;
            let report = check_proof(&it.statement, &m.proof, &ws.registry, DegeneracyMode::Strict);
            assert_eq!(report.status, CheckStatus::Failed, "{}: {}", it.name(), m.description);
        }
    }
    assert!(total >= 25, "{total}");
}

#[test]
fn corpus_files_round_trip_through_the_printer() {
    for entry in bundled_corpus() {
        let script = parse(entry.source).unwrap();
        assert_eq!(parse(&script.to_string()).unwrap(), script, "{}", entry.file);
    }
}
