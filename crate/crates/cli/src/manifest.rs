//! Run manifest: resolved config, discretization metadata and artifact
//! checksums. No timestamps or absolute paths, so identical runs produce
//! identical manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::config::{Scenario, ScenarioConfig};
use crate::CliError;

pub const MANIFEST_NAME: &str = "manifest.toml";

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub struct ManifestInput<'a> {
    pub subcommand: &'a str,
    pub seed: u64,
    pub status: &'a str,
    pub config: &'a ScenarioConfig,
    pub scenario: &'a Scenario,
    pub out_dir: &'a Path,
    pub artifacts: &'a [PathBuf],
}

pub fn render(input: &ManifestInput<'_>) -> Result<String, CliError> {
    let mut root = Table::new();
    root.insert("subcommand".into(), Value::from(input.subcommand));
    root.insert("seed".into(), Value::from(input.seed.to_string()));
    root.insert("status".into(), Value::from(input.status));

    let s = input.scenario;
    let mut disc = Table::new();
    disc.insert("nx".into(), Value::from(s.grid.nx as i64));
    disc.insert("ny".into(), Value::from(s.grid.ny as i64));
    disc.insert("lx".into(), Value::from(s.grid.lx));
    disc.insert("ly".into(), Value::from(s.grid.ly));
    disc.insert("hx".into(), Value::from(s.grid.hx));
    disc.insert("hy".into(), Value::from(s.grid.hy));
    disc.insert("t_final".into(), Value::from(s.tg.t_final));
    disc.insert("steps".into(), Value::from(s.tg.steps as i64));
    disc.insert("tau".into(), Value::from(s.tg.tau));
    root.insert("discretization".into(), Value::Table(disc));

    let config = Value::try_from(input.config)
        .map_err(|e| CliError::Config(format!("cannot record config: {e}")))?;
    root.insert("config".into(), config);

    let mut sums = BTreeMap::new();
    for path in input.artifacts {
        let name = path
            .strip_prefix(input.out_dir)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/");
        sums.insert(name, sha256_file(path)?);
    }
    let artifacts: Table = sums.into_iter().map(|(k, v)| (k, Value::from(v))).collect();
    root.insert("artifacts".into(), Value::Table(artifacts));

    toml::to_string(&root).map_err(|e| CliError::Config(format!("cannot render manifest: {e}")))
}

pub fn write(input: &ManifestInput<'_>) -> Result<PathBuf, CliError> {
    let text = render(input)?;
    let path = input.out_dir.join(MANIFEST_NAME);
    std::fs::write(&path, text)?;
    Ok(path)
}
