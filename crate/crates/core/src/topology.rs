//! Distribution sites and the DB-link graph between them.

use serde::{Deserialize, Serialize};

use crate::diag::Diagnostic;

pub const DEFAULT_PORT: u32 = 1521;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Credentials {
    pub user: String,
    /// Emitted into DB-link statements as given, unless redacted.
    pub secret: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Site {
    pub logical_name: String,
    pub network_address: String,
    #[serde(default = "default_port")]
    pub port: u32,
    /// Defaults to the logical name when absent from the document.
    #[serde(default)]
    pub service_name: String,
    pub dblink_name: String,
    pub credentials: Credentials,
}

fn default_port() -> u32 {
    DEFAULT_PORT
}

impl Site {
    pub fn new(logical_name: &str, address: &str, dblink_name: &str, user: &str, secret: &str) -> Self {
        Self {
            logical_name: logical_name.to_string(),
            network_address: address.to_string(),
            port: DEFAULT_PORT,
            service_name: logical_name.to_string(),
            dblink_name: dblink_name.to_string(),
            credentials: Credentials { user: user.to_string(), secret: secret.to_string() },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<Site>", into = "Vec<Site>")]
pub struct Topology {
    sites: Vec<Site>,
}

impl From<Vec<Site>> for Topology {
    fn from(sites: Vec<Site>) -> Self {
        Self::new(sites)
    }
}

impl From<Topology> for Vec<Site> {
    fn from(t: Topology) -> Self {
        t.sites
    }
}

impl Topology {
    pub fn new(sites: Vec<Site>) -> Self {
        let sites = sites
            .into_iter()
            .map(|mut s| {
                if s.service_name.is_empty() {
                    s.service_name = s.logical_name.clone();
                }
                s
            })
            .collect();
        Self { sites }
    }

    /// Parse the JSON topology document: an array of site objects.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.sites).expect("topology serializes")
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, logical_name: &str) -> Option<&Site> {
        self.sites.iter().find(|s| s.logical_name == logical_name)
    }

    pub fn position(&self, logical_name: &str) -> Option<usize> {
        self.sites.iter().position(|s| s.logical_name == logical_name)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Number of outbound DB links each site needs: one to every other site.
    pub fn outbound_links_per_site(&self) -> usize {
        self.sites.len().saturating_sub(1)
    }

    /// Copy with every secret replaced by `placeholder`.
    pub fn redacted(&self, placeholder: &str) -> Self {
        let mut copy = self.clone();
        for site in &mut copy.sites {
            site.credentials.secret = placeholder.to_string();
        }
        copy
    }
}

pub fn validate_topology(topology: &Topology) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    if topology.is_empty() {
        diags.push(Diagnostic::error("no-sites", "topology", "topology declares no sites"));
    }
    for (i, site) in topology.sites().iter().enumerate() {
        let earlier = &topology.sites()[..i];
        if site.logical_name.is_empty() {
            diags.push(Diagnostic::error("empty-name", format!("site #{}", i + 1), "logical name is empty"));
        } else if earlier.iter().any(|s| s.logical_name == site.logical_name) {
            diags.push(Diagnostic::error(
                "duplicate-site",
                &site.logical_name,
                format!("logical name {} is used by more than one site", site.logical_name),
            ));
        }
        if site.dblink_name.is_empty() {
            diags.push(Diagnostic::error("empty-dblink", &site.logical_name, "DB link name is empty"));
        } else if earlier.iter().any(|s| s.dblink_name == site.dblink_name) {
            diags.push(Diagnostic::error(
                "duplicate-dblink",
                &site.logical_name,
                format!("DB link name {} is used by more than one site", site.dblink_name),
            ));
        }
        if !(1..=65535).contains(&site.port) {
            diags.push(Diagnostic::error(
                "invalid-port",
                &site.logical_name,
                format!("port {} is outside 1..=65535", site.port),
            ));
        }
    }
    if topology.len() == 1 {
        diags.push(Diagnostic::warning(
            "single-site",
            "topology",
            "only one site is declared; the distribution is degenerate",
        ));
    }
    diags
}
