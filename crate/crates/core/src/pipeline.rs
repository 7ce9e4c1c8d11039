//! Parsing, elaborating and checking a set of script files together, so
//! lemmas and `uses` may refer across files.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::depgraph::{self, DepError, DepGraph};
use crate::kernel::{check_proof, CheckReport, DegeneracyMode, Registry};
use crate::proofscript::{
    build_registry, elaborate_item, parse, ElabError, Elaborated, ItemKind, Script, SyntaxError,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("{file}: {error}")]
    Syntax { file: String, error: SyntaxError },
    /// Statements that cannot all be registered, e.g. two different
    /// statements under one name.
    #[error(transparent)]
    Registry(ElabError),
}

#[derive(Debug, Clone)]
pub struct Rejected {
    pub file: usize,
    pub name: String,
    pub error: ElabError,
}

#[derive(Debug, Clone)]
pub struct Workspace {
    pub files: Vec<String>,
    pub scripts: Vec<Script>,
    pub items: Vec<Elaborated>,
    /// Blocks that parsed but did not elaborate, such as a proof citing a
    /// label that does not exist. They are left out of `items`.
    pub rejected: Vec<Rejected>,
    /// Index into `files` for each item.
    pub item_file: Vec<usize>,
    pub registry: Registry,
}

impl Workspace {
    pub fn load<'a>(
        sources: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Workspace, LoadError> {
        let mut files = Vec::new();
        let mut scripts = Vec::new();
        for (file, text) in sources {
            let script = parse(text)
                .map_err(|error| LoadError::Syntax { file: file.to_owned(), error })?;
            files.push(file.to_owned());
            scripts.push(script);
        }
        let registry = build_registry(&scripts).map_err(LoadError::Registry)?;
        let mut items = Vec::new();
        let mut item_file = Vec::new();
        let mut rejected = Vec::new();
        for (i, script) in scripts.iter().enumerate() {
            for item in &script.items {
                match elaborate_item(item, &registry) {
                    Ok(el) => {
                        items.push(el);
                        item_file.push(i);
                    }
                    Err(error) => rejected.push(Rejected { file: i, name: item.name().to_owned(), error }),
                }
            }
        }
        Ok(Workspace { files, scripts, items, rejected, item_file, registry })
    }

    /// The bundled corpus, in table order.
    pub fn corpus() -> Workspace {
        Self::load(crate::proofscript::corpus::files()).expect("bundled corpus loads")
    }

    /// Checks every proved theorem, keyed by name.
    pub fn check(&self, mode: DegeneracyMode) -> BTreeMap<String, CheckReport> {
        self.items
            .iter()
            .filter(|it| it.kind == ItemKind::Theorem)
            .map(|it| {
                let proof = it.proof.as_ref().expect("theorems have proofs");
                (it.name().to_owned(), check_proof(&it.statement, proof, &self.registry, mode))
            })
            .collect()
    }

    pub fn graph(&self, reports: &BTreeMap<String, CheckReport>) -> Result<DepGraph, DepError> {
        depgraph::build(&self.items, reports)
    }

    pub fn item(&self, name: &str) -> Option<&Elaborated> {
        self.items.iter().find(|it| it.name() == name)
    }
}
