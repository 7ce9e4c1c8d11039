//! The bundled corpus: the proofs and dependency claims discussed for the
//! isosceles theorem, shipped as scripts.

use crate::depgraph::Classification;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpectedStatus {
    /// The file holds one theorem whose proof checks.
    Ok,
    /// The file holds declare blocks only; nothing to check.
    Declared,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub file: &'static str,
    pub source: &'static str,
    /// The node the entry is about.
    pub theorem: &'static str,
    pub expected_status: ExpectedStatus,
    /// Every `uses` edge leaving a node defined in this file.
    pub expected_edges: &'static [(&'static str, &'static str)],
    pub expected_classification: Classification,
}

const FILES: [(&str, &str); 9] = [
    ("pappus_pons.proof", include_str!("../../corpus/pappus_pons.proof")),
    ("euclid_i5.proof", include_str!("../../corpus/euclid_i5.proof")),
    ("euclid_i5_converse.proof", include_str!("../../corpus/euclid_i5_converse.proof")),
    ("pappus_converse.proof", include_str!("../../corpus/pappus_converse.proof")),
    ("euclid_i6.proof", include_str!("../../corpus/euclid_i6.proof")),
    ("bisector_pons.proof", include_str!("../../corpus/bisector_pons.proof")),
    ("euclid_chain.proof", include_str!("../../corpus/euclid_chain.proof")),
    ("pons_via_inscribed.proof", include_str!("../../corpus/pons_via_inscribed.proof")),
    ("pons_via_area.proof", include_str!("../../corpus/pons_via_area.proof")),
];

/// A Euclidean-only conjecture kept apart from the corpus.
pub const ANGLESUM_FILE: &str = "anglesum.conj";
pub const ANGLESUM: &str = include_str!("../../corpus/conjectures/anglesum.conj");

pub fn source(file: &str) -> Option<&'static str> {
    FILES.iter().find(|(f, _)| *f == file).map(|(_, s)| *s)
}

pub fn files() -> impl Iterator<Item = (&'static str, &'static str)> {
    FILES.iter().copied()
}

pub fn bundled_corpus() -> Vec<CorpusEntry> {
    use Classification::*;
    use ExpectedStatus as S;
    let entry = |file: &'static str, theorem, expected_status, expected_edges, class| CorpusEntry {
        file,
        source: source(file).expect("bundled file"),
        theorem,
        expected_status,
        expected_edges,
        expected_classification: class,
    };
    vec![
        entry(
            "pappus_pons.proof",
            "pappus_pons",
            S::Ok,
            &[("pappus_pons", "ANG_REFL"), ("pappus_pons", "SAS_ORD")],
            Neutral,
        ),
        entry(
            "euclid_i5.proof",
            "euclid_i5",
            S::Ok,
            &[
                ("euclid_i5", "ANG_TRANS"),
                ("euclid_i5", "ARM_SUBST"),
                ("euclid_i5", "EXTEND"),
                ("euclid_i5", "SAS_ORD"),
                ("euclid_i5", "SEG_SUM"),
                ("euclid_i5", "SEG_TRANS"),
                ("euclid_i5", "SUPP_CONG"),
            ],
            Neutral,
        ),
        entry(
            "euclid_i5_converse.proof",
            "euclid_i5_converse",
            S::Ok,
            &[
                ("euclid_i5_converse", "ANG_SUM"),
                ("euclid_i5_converse", "ANG_TRANS"),
                ("euclid_i5_converse", "ARM_SUBST"),
                ("euclid_i5_converse", "ASA_ORD"),
                ("euclid_i5_converse", "EXTEND"),
                ("euclid_i5_converse", "SAS_ORD"),
                ("euclid_i5_converse", "SEG_REFL"),
                ("euclid_i5_converse", "SEG_TRANS"),
                ("euclid_i5_converse", "SUPP_CONG"),
            ],
            Neutral,
        ),
        entry(
            "pappus_converse.proof",
            "pappus_converse",
            S::Ok,
            &[("pappus_converse", "ASA_ORD"), ("pappus_converse", "SEG_REFL")],
            Neutral,
        ),
        entry(
            "euclid_i6.proof",
            "euclid_i6",
            S::Ok,
            &[
                ("euclid_i6", "ABSURD_LT_EQ_ANG"),
                ("euclid_i6", "ANG_TRANS"),
                ("euclid_i6", "ARM_SUBST"),
                ("euclid_i6", "LAYOFF"),
                ("euclid_i6", "SAS_ORD"),
                ("euclid_i6", "SEG_REFL"),
                ("euclid_i6", "TRICHOTOMY"),
                ("euclid_i6", "WHOLE_PART_ANG"),
            ],
            Neutral,
        ),
        entry(
            "bisector_pons.proof",
            "bisector_pons",
            S::Ok,
            &[
                ("bisector_pons", "ANG_TRANS"),
                ("bisector_pons", "ARM_SUBST"),
                ("bisector_pons", "SAS_ORD"),
                ("bisector_pons", "SEG_REFL"),
                ("bisector_pons", "bisector_foot"),
            ],
            Cyclic,
        ),
        entry(
            "euclid_chain.proof",
            "bisector_foot",
            S::Declared,
            &[
                ("bisector_foot", "euclid_i9"),
                ("euclid_i7", "bisector_pons"),
                ("euclid_i8", "euclid_i7"),
                ("euclid_i9", "euclid_i8"),
            ],
            Cyclic,
        ),
        entry(
            "pons_via_inscribed.proof",
            "pons_via_inscribed",
            S::Declared,
            &[
                ("inscribed_angle_theorem", "parallel_postulate"),
                ("inscribed_angle_theorem", "pons_via_inscribed"),
                ("pons_via_inscribed", "inscribed_angle_theorem"),
            ],
            Cyclic,
        ),
        entry(
            "pons_via_area.proof",
            "pons_via_area",
            S::Declared,
            &[
                ("pons_via_area", "euclidean_area_formula"),
                ("pons_via_area", "no_supplementary_pair"),
                ("pons_via_area", "sine_defs"),
            ],
            EuclideanOnly,
        ),
    ]
}
