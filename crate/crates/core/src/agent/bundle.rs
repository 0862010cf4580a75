use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{DslError, Registry};
use crate::learn::{Operator, Transition};
use crate::pddl::{compile, parse_domain, print_domain, Domain, PddlError};
use crate::tasks::TrainingManifest;
use crate::teacher::PreconditionLedger;
use crate::world::DomainId;

pub const PREDICATES_FILE: &str = "predicates.pscript";
pub const DOMAIN_FILE: &str = "domain.pddl";
pub const PRECONDS_FILE: &str = "preconds.json";
pub const TRANSITIONS_FILE: &str = "transitions.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("bundle file {file}: {source}")]
    Io { file: String, source: io::Error },
    #[error("bundle is missing {0}")]
    Missing(String),
    #[error("{file}: {message}")]
    Format { file: String, message: String },
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Pddl(#[from] PddlError),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub domain: Option<DomainId>,
    pub seed: u64,
    pub training: TrainingManifest,
    pub counts: BTreeMap<String, u64>,
}

/// A learned domain: predicate programs, the compiled PDDL domain, the
/// precondition ledger and the transitions it was learned from.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub registry: Registry,
    pub domain: Domain,
    pub ledger: PreconditionLedger,
    pub transitions: Vec<Transition>,
    pub manifest: BundleManifest,
}

impl Bundle {
    pub fn new(
        registry: Registry,
        operators: &[Operator],
        ledger: PreconditionLedger,
        transitions: Vec<Transition>,
        manifest: BundleManifest,
    ) -> Self {
        let name = manifest.domain.map(|d| d.as_str().to_string()).unwrap_or_else(|| "learned".to_string());
        let domain = compile(&name, &registry, operators);
        Bundle { registry, domain, ledger, transitions, manifest }
    }

    /// No predicates and no operators.
    pub fn empty(domain: DomainId) -> Self {
        let manifest = BundleManifest { domain: Some(domain), ..Default::default() };
        Bundle::new(Registry::new(), &[], PreconditionLedger::new(), Vec::new(), manifest)
    }

    /// File name to contents.
    pub fn files(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert(PREDICATES_FILE.to_string(), self.registry.to_pscript());
        m.insert(DOMAIN_FILE.to_string(), print_domain(&self.domain));
        m.insert(
            PRECONDS_FILE.to_string(),
            serde_json::to_string_pretty(&self.ledger).expect("ledger serializes") + "\n",
        );
        let transitions: String =
            self.transitions.iter().map(|t| serde_json::to_string(t).expect("transition serializes") + "\n").collect();
        m.insert(TRANSITIONS_FILE.to_string(), transitions);
        m.insert(
            MANIFEST_FILE.to_string(),
            serde_json::to_string_pretty(&self.manifest).expect("manifest serializes") + "\n",
        );
        m
    }

    pub fn from_files(files: &BTreeMap<String, String>) -> Result<Self, BundleError> {
        let get = |name: &str| files.get(name).ok_or_else(|| BundleError::Missing(name.to_string()));
        let format =
            |file: &str, e: serde_json::Error| BundleError::Format { file: file.to_string(), message: e.to_string() };
        let registry = Registry::from_pscript(get(PREDICATES_FILE)?)?;
        let domain = parse_domain(get(DOMAIN_FILE)?)?;
        let ledger = serde_json::from_str(get(PRECONDS_FILE)?).map_err(|e| format(PRECONDS_FILE, e))?;
        let transitions = get(TRANSITIONS_FILE)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| format(TRANSITIONS_FILE, e)))
            .collect::<Result<Vec<_>, _>>()?;
        let manifest = match files.get(MANIFEST_FILE) {
            Some(m) => serde_json::from_str(m).map_err(|e| format(MANIFEST_FILE, e))?,
            None => BundleManifest::default(),
        };
        Ok(Bundle { registry, domain, ledger, transitions, manifest })
    }

    pub fn save(&self, dir: &Path) -> Result<(), BundleError> {
        fs::create_dir_all(dir).map_err(|source| BundleError::Io { file: dir.display().to_string(), source })?;
        for (name, text) in self.files() {
            fs::write(dir.join(&name), text).map_err(|source| BundleError::Io { file: name.clone(), source })?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, BundleError> {
        let mut files = BTreeMap::new();
        for name in [PREDICATES_FILE, DOMAIN_FILE, PRECONDS_FILE, TRANSITIONS_FILE, MANIFEST_FILE] {
            let path = dir.join(name);
            match fs::read_to_string(&path) {
                Ok(t) => {
                    files.insert(name.to_string(), t);
                }
                Err(e) if e.kind() == io::ErrorKind::NotFound && name == MANIFEST_FILE => {}
                Err(e) if e.kind() == io::ErrorKind::NotFound => {
                    return Err(BundleError::Missing(path.display().to_string()))
                }
                Err(source) => return Err(BundleError::Io { file: path.display().to_string(), source }),
            }
        }
        Bundle::from_files(&files)
    }

    pub fn domain_id(&self) -> Option<DomainId> {
        self.manifest.domain
    }
}
