//! TOML run configuration. Every key mirrors a command-line flag of the same
//! name; flags win when both are given.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,

    pub data: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub policy: Option<Vec<PathBuf>>,
    pub approach: Option<String>,

    pub preset: Option<String>,
    pub scenario: Option<PathBuf>,
    pub n: Option<usize>,
    pub structure_seed: Option<u64>,
    pub name: Option<String>,

    pub outer_folds: Option<usize>,
    pub inner_folds: Option<usize>,
    pub max_depth: Option<Vec<usize>>,
    pub min_samples_leaf: Option<Vec<usize>>,
    pub min_loss_reduction: Option<Vec<f64>>,

    pub sizes: Option<Vec<usize>>,
    pub size_count: Option<usize>,
    pub min_size: Option<usize>,
    pub metric: Option<String>,
}

impl FileConfig {
    /// Reads `path`; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: FileConfig = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        fix(&mut cfg.out);
        fix(&mut cfg.data);
        fix(&mut cfg.truth);
        fix(&mut cfg.scenario);
        if let Some(ps) = &mut cfg.policy {
            for p in ps.iter_mut().filter(|p| p.is_relative()) {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}
