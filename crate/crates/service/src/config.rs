use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use idiom_graph_core::align::{HashedTokenProvider, LexiconProposer};
use idiom_graph_core::engine::Services;
use idiom_graph_core::explain::RuleSet;
use idiom_graph_core::workflow::WorkflowConfig;
use idiom_graph_core::Error as CoreError;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub id: String,
    pub dim: usize,
    pub seed: u64,
}

/// On-disk service configuration. Relative paths resolve against the
/// directory holding the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default)]
    pub workflow: Option<WorkflowConfig>,
    #[serde(default)]
    pub lexicon_path: Option<PathBuf>,
    #[serde(default)]
    pub rules_path: Option<PathBuf>,
    /// Extra hashed provider; becomes the default provider.
    #[serde(default)]
    pub provider: Option<ProviderConfig>,
    #[serde(default)]
    pub nearest_k: Option<usize>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub tau_align: Option<f64>,
    /// Events between snapshots.
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: u64,
    /// Bearer token to validator id. Empty disables authentication.
    #[serde(default)]
    pub tokens: BTreeMap<String, String>,
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_snapshot_every() -> u64 {
    100
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            workflow: None,
            lexicon_path: None,
            rules_path: None,
            provider: None,
            nearest_k: None,
            k: None,
            tau_align: None,
            snapshot_every: default_snapshot_every(),
            tokens: BTreeMap::new(),
            bind: default_bind(),
            base_dir: PathBuf::from("."),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub provider: Option<String>,
    pub k: Option<usize>,
    pub tau_align: Option<f64>,
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
        let mut de = serde_json::Deserializer::from_str(&text);
        let mut config: Self = serde_path_to_error::deserialize(&mut de).map_err(|e| ServiceError::Config {
            file: path.display().to_string(),
            field: e.path().to_string(),
            message: e.into_inner().to_string(),
        })?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.validate(path)?;
        Ok(config)
    }

    fn validate(&self, path: &Path) -> Result<()> {
        let bad = |field: &str, message: String| ServiceError::Config {
            file: path.display().to_string(),
            field: field.into(),
            message,
        };
        if let Some(w) = &self.workflow {
            w.validate().map_err(|e| bad("workflow", e.to_string()))?;
        }
        if let Some(t) = self.tau_align {
            if !(0.0..=1.0).contains(&t) {
                return Err(bad("tau_align", format!("{t} is outside [0, 1]")));
            }
        }
        if self.snapshot_every == 0 {
            return Err(bad("snapshot_every", "must be at least 1".into()));
        }
        if matches!(&self.provider, Some(p) if p.dim == 0) {
            return Err(bad("provider.dim", "must be at least 1".into()));
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Builds engine collaborators from the file references and overrides.
    pub fn services(&self, overrides: &Overrides) -> Result<Services> {
        let mut services = Services::default();
        if let Some(p) = &self.provider {
            services = services.with_provider(Arc::new(HashedTokenProvider::new(p.id.clone(), p.dim, p.seed)));
            services.default_provider = p.id.clone();
        }
        if let Some(path) = &self.lexicon_path {
            let path = self.resolve(path);
            let text = std::fs::read_to_string(&path).map_err(|e| ServiceError::io(&path, e))?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("file");
            services.proposer = Arc::new(LexiconProposer::from_json(format!("lexicon:{stem}"), &text)?);
        }
        if let Some(path) = &self.rules_path {
            let path = self.resolve(path);
            let text = std::fs::read_to_string(&path).map_err(|e| ServiceError::io(&path, e))?;
            services.rules = Arc::new(RuleSet::from_json(&text)?);
        }
        if let Some(k) = overrides.k.or(self.k) {
            services.k = k;
        }
        if let Some(k) = self.nearest_k {
            services.nearest_k = k;
        }
        if let Some(t) = overrides.tau_align.or(self.tau_align) {
            if !(0.0..=1.0).contains(&t) {
                return Err(CoreError::Validation(format!("tau_align {t} is outside [0, 1]")).into());
            }
            services.tau_align = t;
        }
        // Not checked against computing providers: imported vectors may be
        // the only source for this id.
        if let Some(id) = &overrides.provider {
            services.default_provider = id.clone();
        }
        Ok(services)
    }
}
