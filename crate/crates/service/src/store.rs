//! Projects held in memory, optionally written through to one JSON document
//! per project.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use ddbforge_core::fragmenter::FragmentationPlan;
use ddbforge_core::pipeline::{build_plan, load_schema, InputError};
use ddbforge_core::policy::{resolve_table_policy, DistributionPolicy, TablePolicyDoc};
use ddbforge_core::schema::Schema;
use ddbforge_core::topology::Topology;
use ddbforge_core::validator::ValidationReport;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

/// Stored form of a project. Inputs are kept as given so a reload resolves
/// them exactly as the original requests did.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Project {
    pub id: String,
    pub name: String,
    pub version: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_ddl: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<Topology>,
    /// Table policies in the order they were first set, keyed by the
    /// normalized table name.
    #[serde(default)]
    pub policies: Vec<(String, TablePolicyDoc)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_report: Option<ValidationReport>,
    /// Project version the last report was computed at.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_version: Option<u64>,
    #[serde(skip)]
    schema_cache: Option<Schema>,
}

impl Project {
    pub fn new(id: String, name: String) -> Self {
        Self { id, name, ..Self::default() }
    }

    pub fn check_version(&self, sent: Option<u64>) -> Result<(), ApiError> {
        match sent {
            Some(sent) if sent != self.version => Err(ApiError::StaleVersion { sent, current: self.version }),
            _ => Ok(()),
        }
    }

    pub fn bump(&mut self) {
        self.version += 1;
    }

    /// The parsed schema; an empty one until DDL is uploaded.
    pub fn schema(&mut self) -> Result<Schema, ApiError> {
        if self.schema_cache.is_none() {
            let schema = match &self.schema_ddl {
                Some(ddl) => load_schema(ddl)?.0,
                None => Schema::from_tables([]).expect("empty schema"),
            };
            self.schema_cache = Some(schema);
        }
        Ok(self.schema_cache.clone().expect("cached"))
    }

    pub fn set_schema(&mut self, ddl: String, schema: Schema) {
        self.schema_ddl = Some(ddl);
        self.schema_cache = Some(schema);
    }

    pub fn topology(&self) -> Topology {
        self.topology.clone().unwrap_or_else(|| Topology::new(Vec::new()))
    }

    pub fn upsert_policy(&mut self, table: String, doc: TablePolicyDoc) {
        match self.policies.iter_mut().find(|(t, _)| *t == table) {
            Some(slot) => slot.1 = doc,
            None => self.policies.push((table, doc)),
        }
    }

    pub fn policy(&mut self) -> Result<DistributionPolicy, ApiError> {
        let schema = self.schema()?;
        let topology = self.topology();
        let mut policy = DistributionPolicy::default();
        for (table, doc) in &self.policies {
            let resolved =
                resolve_table_policy(table, doc, &schema, &topology).map_err(InputError::Policy)?;
            policy.upsert(resolved);
        }
        Ok(policy)
    }

    pub fn plan(&mut self) -> Result<FragmentationPlan, ApiError> {
        let schema = self.schema()?;
        let policy = self.policy()?;
        Ok(build_plan(&schema, &self.topology(), &policy)?)
    }
}

pub type ProjectRef = Arc<Mutex<Project>>;

#[derive(Default)]
pub struct Store {
    projects: RwLock<HashMap<String, ProjectRef>>,
    dir: Option<PathBuf>,
}

impl Store {
    /// A store writing through to `dir`, loaded with the projects already
    /// saved there.
    pub fn open(dir: Option<PathBuf>) -> std::io::Result<Self> {
        let mut projects = HashMap::new();
        if let Some(dir) = &dir {
            fs::create_dir_all(dir)?;
            for entry in fs::read_dir(dir)? {
                let path = entry?.path();
                if path.extension().is_some_and(|e| e == "json") {
                    let text = fs::read_to_string(&path)?;
                    let project: Project = serde_json::from_str(&text).map_err(|e| {
                        std::io::Error::new(
                            std::io::ErrorKind::InvalidData,
                            format!("{}: {e}", path.display()),
                        )
                    })?;
                    projects.insert(project.id.clone(), Arc::new(Mutex::new(project)));
                }
            }
        }
        Ok(Self { projects: RwLock::new(projects), dir })
    }

    pub fn insert(&self, project: Project) -> Result<ProjectRef, ApiError> {
        self.save(&project)?;
        let id = project.id.clone();
        let handle = Arc::new(Mutex::new(project));
        self.projects.write().expect("store lock").insert(id, handle.clone());
        Ok(handle)
    }

    pub fn get(&self, id: &str) -> Result<ProjectRef, ApiError> {
        self.projects
            .read()
            .expect("store lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::UnknownProject(id.to_string()))
    }

    pub fn save(&self, project: &Project) -> Result<(), ApiError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        write_atomic(
            &dir.join(format!("{}.json", project.id)),
            &serde_json::to_string_pretty(project).expect("project serializes"),
        )
        .map_err(|e| ApiError::Storage(e.to_string()))
    }
}

fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text)?;
    fs::rename(tmp, path)
}
