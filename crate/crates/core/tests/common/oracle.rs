//! Brute-force reference for horizontal completeness and disjointness.
//!
//! A case is evaluated by listing every value the declarations mention and
//! counting the fragments each value would land in. Nothing here shares
//! code with the validator.

use std::collections::BTreeSet;

use ddbforge_core::fragmenter::plan;
use ddbforge_core::policy::parse_policy;
use ddbforge_core::schema::parse_ddl;
use ddbforge_core::topology::{Site, Topology};
use ddbforge_core::validator::{validate, Criterion, Level};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[derive(Debug, Clone)]
pub struct Case {
    pub sites: usize,
    pub domain: Vec<String>,
    /// Values per site; an empty list means the site is not assigned.
    pub lists: Vec<Vec<String>>,
    pub default_site: Option<usize>,
}

pub fn site_name(i: usize) -> String {
    format!("S{}", i + 1)
}

impl Case {
    fn universe(&self) -> BTreeSet<&String> {
        self.domain.iter().chain(self.lists.iter().flatten()).collect()
    }

    /// Number of fragments accepting `value` under the declared lists.
    fn matches(&self, value: &str) -> usize {
        let listed = self.lists.iter().filter(|l| l.iter().any(|v| v == value)).count();
        if listed == 0 && self.default_site.is_some() {
            1
        } else {
            listed
        }
    }

    /// (disjoint, complete) by enumeration.
    pub fn brute_force(&self) -> (bool, bool) {
        let universe = self.universe();
        (universe.iter().all(|v| self.matches(v) <= 1), universe.iter().all(|v| self.matches(v) >= 1))
    }

    /// (disjointness, completeness) levels reported by the validator for
    /// this case, run through policy resolution and planning.
    pub fn validator_levels(&self) -> (Level, Level) {
        let schema = parse_ddl("CREATE TABLE T (ID NUMBER PRIMARY KEY, C VARCHAR2(10) NOT NULL);").unwrap();
        let topology = Topology::new(
            (0..self.sites)
                .map(|i| Site::new(&site_name(i), "10.0.0.1", &format!("L{i}"), "U", "p"))
                .collect(),
        );
        let assignments: serde_json::Map<String, serde_json::Value> = self
            .lists
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.is_empty())
            .map(|(i, l)| (site_name(i), json!(l)))
            .collect();
        let mut horizontal =
            json!({ "column": "C", "assignments": assignments, "declared_domain": self.domain });
        if let Some(d) = self.default_site {
            horizontal["default_site"] = json!(site_name(d));
        }
        let doc = json!({ "tables": { "T": { "mode": "horizontal", "horizontal": horizontal } } });
        let policy = parse_policy(&doc.to_string(), &schema, &topology).expect("case resolves");
        let p = plan(&schema, &topology, &policy).expect("case plans");
        let report = validate(&p, &schema);
        let level = |c| report.verdict("T", c).expect("verdict present").level;
        (level(Criterion::Disjointness), level(Criterion::Completeness))
    }

    /// True when validator and enumeration agree on both criteria.
    pub fn agrees(&self) -> bool {
        let (disjoint, complete) = self.brute_force();
        let (d, c) = self.validator_levels();
        (d == Level::Pass) == disjoint
            && (d == Level::Error) == !disjoint
            && (c == Level::Pass) == complete
            && (c == Level::Error) == !complete
    }

    fn assigns_something(&self) -> bool {
        self.lists.iter().any(|l| !l.is_empty())
    }
}

fn domain(size: usize) -> Vec<String> {
    (0..size).map(|i| format!("V{i}")).collect()
}

/// Every way of giving each value of a domain of up to `max_domain` values
/// to any subset of 2..=4 sites, with and without each possible default.
pub fn exhaustive_cases(max_domain: usize) -> Vec<Case> {
    let mut out = Vec::new();
    for sites in 2..=4usize {
        for size in 1..=max_domain {
            let dom = domain(size);
            let subsets = 1usize << sites;
            let total = subsets.pow(size as u32);
            for code in 0..total {
                let mut lists = vec![Vec::new(); sites];
                let mut rest = code;
                for v in &dom {
                    let mask = rest % subsets;
                    rest /= subsets;
                    for (s, list) in lists.iter_mut().enumerate() {
                        if mask & (1 << s) != 0 {
                            list.push(v.clone());
                        }
                    }
                }
                for default_site in std::iter::once(None).chain((0..sites).map(Some)) {
                    let case = Case { sites, domain: dom.clone(), lists: lists.clone(), default_site };
                    if case.assigns_something() {
                        out.push(case);
                    }
                }
            }
        }
    }
    out
}

/// Seeded random cases over domains of up to 12 values, some listing values
/// outside the declared domain.
pub fn random_cases(seed: u64, count: usize) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let sites = rng.random_range(2..=4);
        let dom = domain(rng.random_range(1..=12));
        let mut lists = vec![Vec::new(); sites];
        for v in &dom {
            for list in lists.iter_mut() {
                if rng.random_bool(0.35) {
                    list.push(v.clone());
                }
            }
        }
        if rng.random_bool(0.2) {
            let s = rng.random_range(0..sites);
            lists[s].push("STRAY".to_string());
        }
        let default_site = if rng.random_bool(0.3) { Some(rng.random_range(0..sites)) } else { None };
        let case = Case { sites, domain: dom, lists, default_site };
        if case.assigns_something() {
            out.push(case);
        }
    }
    out
}
