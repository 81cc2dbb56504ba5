//! All site scripts of a plan, with a checksum manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{build_site_script, ensure_valid, CodegenError, SiteScript};
use crate::fragmenter::FragmentationPlan;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn script_filename(site: &str) -> String {
    format!("{}_DDB_SCRIPT.sql", site.to_uppercase())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptBundle {
    pub scripts: Vec<SiteScript>,
    /// File name to lowercase hex SHA-256 of its contents.
    pub manifest: BTreeMap<String, String>,
}

impl ScriptBundle {
    pub fn script(&self, site: &str) -> Option<&SiteScript> {
        self.scripts.iter().find(|s| s.site == site)
    }

    /// Script files in site order, then the manifest.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> =
            self.scripts.iter().map(|s| (s.filename(), s.render())).collect();
        out.push((MANIFEST_FILE.to_string(), self.manifest_json()));
        out
    }

    pub fn manifest_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        text
    }
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Scripts for every site of the topology, in topology order.
pub fn generate_bundle(plan: &FragmentationPlan) -> Result<ScriptBundle, CodegenError> {
    ensure_valid(plan)?;
    let mut scripts = Vec::new();
    let mut manifest = BTreeMap::new();
    let mut owners: BTreeMap<String, String> = BTreeMap::new();
    for site in plan.topology.sites() {
        let script = build_site_script(plan, &site.logical_name)?;
        let filename = script.filename();
        if let Some(other) = owners.insert(filename.clone(), site.logical_name.clone()) {
            return Err(CodegenError::FilenameCollision(other, site.logical_name.clone()));
        }
        manifest.insert(filename, sha256_hex(&script.render()));
        scripts.push(script);
    }
    Ok(ScriptBundle { scripts, manifest })
}

/// Write every script and `manifest.json` into `dir`, creating it if needed.
/// Returns the written paths.
pub fn emit_bundle(plan: &FragmentationPlan, dir: &Path) -> Result<Vec<PathBuf>, CodegenError> {
    let bundle = generate_bundle(plan)?;
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| CodegenError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    for (name, text) in bundle.files() {
        let path = dir.join(name);
        fs::write(&path, text).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}
