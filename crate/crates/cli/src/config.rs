//! Run configuration: the resolved inputs a pipeline invocation depends on.

use std::path::{Path, PathBuf};

use flexsparse_core::sim::report::SimConfig;
use flexsparse_core::Error;

/// Everything a simulate run needs, assembled from flags and config files.
/// Kept in one place so runs are reproducible from their recorded settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub plan: PathBuf,
    pub sim: SimConfig,
    pub tokens: usize,
    pub seed: u64,
    pub pruned_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), Error> {
        for (label, path) in [("manifest", &self.manifest), ("plan", &self.plan)] {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "{label} path `{}` does not exist",
                    path.display()
                )));
            }
        }
        if let Some(dir) = &self.pruned_dir {
            if !dir.is_dir() {
                return Err(Error::Config(format!(
                    "pruned directory `{}` does not exist",
                    dir.display()
                )));
            }
        }
        if self.tokens == 0 {
            return Err(Error::Config("token count must be positive".into()));
        }
        Ok(())
    }
}

/// Load `{macro, systolic, energy}` from JSON; defaults when omitted.
pub fn load_sim_config(path: Option<&Path>) -> Result<SimConfig, Error> {
    match path {
        None => Ok(SimConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}
