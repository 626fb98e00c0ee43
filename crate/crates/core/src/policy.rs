// SPDX-License-Identifier: Apache-2.0

//! Intent-level network policy: VRFs, EPGs with endpoint placement, contracts
//! binding EPG pairs to filters, and the switch inventory.
//!
//! All collections are keyed by name within their kind, so iteration follows
//! [`ObjectId`] order and two loads of the same file enumerate identically.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::object::{EpgPair, ObjectId};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    #[default]
    Tcp,
    Udp,
}

/// Whitelist model: the only explicit action is allow, deny is the implicit default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    #[default]
    Allow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vrf {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoint {
    pub id: String,
    pub switch: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Epg {
    pub name: String,
    pub vrf: String,
    #[serde(default)]
    pub endpoints: Vec<Endpoint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Filter {
    pub name: String,
    pub port: u16,
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default)]
    pub action: Action,
}

/// One EPG pair bound by a contract, as written in the policy file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractPair {
    #[serde(rename = "epgA")]
    pub epg_a: String,
    #[serde(rename = "epgB")]
    pub epg_b: String,
}

impl ContractPair {
    pub fn new(a: impl Into<String>, b: impl Into<String>) -> Self {
        ContractPair { epg_a: a.into(), epg_b: b.into() }
    }

    pub fn canonical(&self) -> Option<EpgPair> {
        EpgPair::new(self.epg_a.clone(), self.epg_b.clone())
    }
}

/// Applies `filters` symmetrically to every EPG pair in `pairs`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contract {
    pub name: String,
    pub pairs: Vec<ContractPair>,
    pub filters: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct SwitchEntry {
    name: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PolicyFile", into = "PolicyFile")]
pub struct NetworkPolicy {
    pub vrfs: BTreeMap<String, Vrf>,
    pub epgs: BTreeMap<String, Epg>,
    pub contracts: BTreeMap<String, Contract>,
    pub filters: BTreeMap<String, Filter>,
    pub switches: BTreeSet<String>,
}

/// On-disk layout: every collection is a list of objects carrying `name`.
#[derive(Serialize, Deserialize)]
struct PolicyFile {
    vrfs: Vec<Vrf>,
    epgs: Vec<Epg>,
    contracts: Vec<Contract>,
    filters: Vec<Filter>,
    switches: Vec<SwitchEntry>,
}

fn keyed<T>(kind: &str, items: Vec<T>, name: impl Fn(&T) -> &str) -> Result<BTreeMap<String, T>, String> {
    let mut out = BTreeMap::new();
    for item in items {
        let key = name(&item).to_string();
        if out.insert(key.clone(), item).is_some() {
            return Err(format!("duplicate {kind} name `{key}`"));
        }
    }
    Ok(out)
}

impl TryFrom<PolicyFile> for NetworkPolicy {
    type Error = String;

    fn try_from(f: PolicyFile) -> Result<Self, String> {
        let mut switches = BTreeSet::new();
        for s in f.switches {
            if !switches.insert(s.name.clone()) {
                return Err(format!("duplicate switch name `{}`", s.name));
            }
        }
        Ok(NetworkPolicy {
            vrfs: keyed("vrf", f.vrfs, |v| &v.name)?,
            epgs: keyed("epg", f.epgs, |e| &e.name)?,
            contracts: keyed("contract", f.contracts, |c| &c.name)?,
            filters: keyed("filter", f.filters, |x| &x.name)?,
            switches,
        })
    }
}

impl From<NetworkPolicy> for PolicyFile {
    fn from(p: NetworkPolicy) -> Self {
        PolicyFile {
            vrfs: p.vrfs.into_values().collect(),
            epgs: p.epgs.into_values().collect(),
            contracts: p.contracts.into_values().collect(),
            filters: p.filters.into_values().collect(),
            switches: p.switches.into_iter().map(|name| SwitchEntry { name }).collect(),
        }
    }
}

impl NetworkPolicy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vrf(&mut self, name: impl Into<String>) -> &mut Self {
        let name = name.into();
        self.vrfs.insert(name.clone(), Vrf { name });
        self
    }

    pub fn add_switch(&mut self, name: impl Into<String>) -> &mut Self {
        self.switches.insert(name.into());
        self
    }

    /// `endpoints` holds `(endpoint id, switch)` placements.
    pub fn add_epg<I, A, B>(&mut self, name: impl Into<String>, vrf: impl Into<String>, endpoints: I) -> &mut Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let name = name.into();
        let endpoints = endpoints
            .into_iter()
            .map(|(id, switch)| Endpoint { id: id.into(), switch: switch.into() })
            .collect();
        self.epgs.insert(name.clone(), Epg { name, vrf: vrf.into(), endpoints });
        self
    }

    pub fn add_filter(&mut self, name: impl Into<String>, port: u16) -> &mut Self {
        let name = name.into();
        self.filters.insert(
            name.clone(),
            Filter { name, port, protocol: Protocol::default(), action: Action::Allow },
        );
        self
    }

    pub fn add_contract<P, F, A, B, S>(&mut self, name: impl Into<String>, pairs: P, filters: F) -> &mut Self
    where
        P: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
        F: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let name = name.into();
        let pairs = pairs.into_iter().map(|(a, b)| ContractPair::new(a, b)).collect();
        let filters = filters.into_iter().map(Into::into).collect();
        self.contracts.insert(name.clone(), Contract { name, pairs, filters });
        self
    }

    /// Switches hosting at least one endpoint of `epg`, in order.
    pub fn epg_switches(&self, epg: &str) -> BTreeSet<&str> {
        self.epgs
            .get(epg)
            .map(|e| e.endpoints.iter().map(|ep| ep.switch.as_str()).collect())
            .unwrap_or_default()
    }

    /// Every policy object id, in [`ObjectId`] order.
    pub fn object_ids(&self) -> Vec<ObjectId> {
        let mut out: Vec<ObjectId> = Vec::new();
        out.extend(self.vrfs.keys().map(ObjectId::vrf));
        out.extend(self.epgs.keys().map(ObjectId::epg));
        out.extend(self.contracts.keys().map(ObjectId::contract));
        out.extend(self.filters.keys().map(ObjectId::filter));
        out.extend(self.switches.iter().map(ObjectId::switch));
        out
    }

    /// Number of distinct EPG pairs bound by contracts.
    pub fn pair_count(&self) -> usize {
        self.contracts
            .values()
            .flat_map(|c| c.pairs.iter().filter_map(ContractPair::canonical))
            .collect::<BTreeSet<_>>()
            .len()
    }

    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        io::from_json_str(Path::new("<inline>"), text)
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_policy(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViolationKind {
    UnknownVrf,
    UnknownSwitch,
    UnknownEpg,
    UnknownFilter,
    DuplicateEndpoint,
    EmptyPairs,
    EmptyFilters,
    SelfPair,
    CrossVrfPair,
    DuplicateFilterMatch,
    DuplicatePair,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub object: ObjectId,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:?}: {}", self.object, self.kind, self.detail)
    }
}

/// Checks referential integrity and the structural rules of the policy model.
/// Returns an empty list iff the policy is valid.
pub fn validate_policy(p: &NetworkPolicy) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |object: ObjectId, kind, detail: String| out.push(Violation { object, kind, detail });

    let mut endpoint_owner: BTreeMap<&str, &str> = BTreeMap::new();
    for epg in p.epgs.values() {
        let id = ObjectId::epg(&epg.name);
        if !p.vrfs.contains_key(&epg.vrf) {
            push(id.clone(), ViolationKind::UnknownVrf, format!("vrf `{}` does not exist", epg.vrf));
        }
        for ep in &epg.endpoints {
            if !p.switches.contains(&ep.switch) {
                push(
                    id.clone(),
                    ViolationKind::UnknownSwitch,
                    format!("endpoint `{}` is placed on unknown switch `{}`", ep.id, ep.switch),
                );
            }
            if let Some(prev) = endpoint_owner.insert(&ep.id, &epg.name) {
                push(
                    id.clone(),
                    ViolationKind::DuplicateEndpoint,
                    format!("endpoint `{}` is also placed by EPG `{prev}`", ep.id),
                );
            }
        }
    }

    let mut pair_owner: BTreeMap<EpgPair, &str> = BTreeMap::new();
    for c in p.contracts.values() {
        let id = ObjectId::contract(&c.name);
        if c.pairs.is_empty() {
            push(id.clone(), ViolationKind::EmptyPairs, "contract binds no EPG pair".into());
        }
        for pair in &c.pairs {
            for side in [&pair.epg_a, &pair.epg_b] {
                if !p.epgs.contains_key(side) {
                    push(id.clone(), ViolationKind::UnknownEpg, format!("EPG `{side}` does not exist"));
                }
            }
            let Some(canon) = pair.canonical() else {
                push(id.clone(), ViolationKind::SelfPair, format!("EPG `{}` paired with itself", pair.epg_a));
                continue;
            };
            if let (Some(a), Some(b)) = (p.epgs.get(&pair.epg_a), p.epgs.get(&pair.epg_b)) {
                if a.vrf != b.vrf {
                    push(
                        id.clone(),
                        ViolationKind::CrossVrfPair,
                        format!("pair {canon} spans vrfs `{}` and `{}`", a.vrf, b.vrf),
                    );
                }
            }
            if let Some(prev) = pair_owner.insert(canon.clone(), &c.name) {
                let detail = if prev == c.name {
                    format!("pair {canon} listed twice")
                } else {
                    format!("pair {canon} is already bound by contract `{prev}`")
                };
                push(id.clone(), ViolationKind::DuplicatePair, detail);
            }
        }
        if c.filters.is_empty() {
            push(id.clone(), ViolationKind::EmptyFilters, "contract has no filter".into());
        }
        let mut ports: BTreeMap<u16, &str> = BTreeMap::new();
        for f in &c.filters {
            match p.filters.get(f) {
                None => push(id.clone(), ViolationKind::UnknownFilter, format!("filter `{f}` does not exist")),
                Some(filter) => {
                    if let Some(prev) = ports.insert(filter.port, f) {
                        push(
                            id.clone(),
                            ViolationKind::DuplicateFilterMatch,
                            format!("filters `{prev}` and `{f}` both match port {}", filter.port),
                        );
                    }
                }
            }
        }
    }
    out
}

/// Fails with [`Error::Input`] listing every violation.
pub fn ensure_valid(p: &NetworkPolicy) -> Result<()> {
    let violations = validate_policy(p);
    if violations.is_empty() {
        return Ok(());
    }
    let lines: Vec<String> = violations.iter().map(ToString::to_string).collect();
    Err(Error::Input(format!("policy has {} violation(s):\n  {}", lines.len(), lines.join("\n  "))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::three_tier;

    #[test]
    fn three_tier_policy_is_valid() {
        assert_eq!(validate_policy(&three_tier()), vec![]);
    }

    #[test]
    fn empty_policy_is_valid() {
        assert!(validate_policy(&NetworkPolicy::new()).is_empty());
    }

    #[test]
    fn deleted_filter_is_one_violation() {
        let mut p = three_tier();
        p.filters.remove("port700");
        let v = validate_policy(&p);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].object, ObjectId::contract("App-DB"));
        assert_eq!(v[0].kind, ViolationKind::UnknownFilter);
    }

    #[test]
    fn single_field_corruptions_are_caught() {
        type Corrupt = fn(&mut NetworkPolicy);
        let cases: Vec<(&str, Corrupt)> = vec![
            ("epg vrf", |p| p.epgs.get_mut("Web").unwrap().vrf = "nope".into()),
            ("endpoint switch", |p| p.epgs.get_mut("App").unwrap().endpoints[0].switch = "S9".into()),
            ("endpoint id", |p| p.epgs.get_mut("DB").unwrap().endpoints[0].id = "EP1".into()),
            ("pair side", |p| p.contracts.get_mut("Web-App").unwrap().pairs[0].epg_b = "Ghost".into()),
            ("self pair", |p| p.contracts.get_mut("Web-App").unwrap().pairs[0].epg_b = "Web".into()),
            ("filter ref", |p| p.contracts.get_mut("App-DB").unwrap().filters[1] = "gone".into()),
            ("duplicate filter", |p| p.contracts.get_mut("App-DB").unwrap().filters[1] = "port80".into()),
            ("empty filters", |p| p.contracts.get_mut("Web-App").unwrap().filters.clear()),
            ("empty pairs", |p| p.contracts.get_mut("Web-App").unwrap().pairs.clear()),
            ("duplicate pair", |p| p.contracts.get_mut("Web-App").unwrap().pairs[0] = ContractPair::new("DB", "App")),
            ("cross vrf", |p| {
                p.add_vrf("202");
                p.epgs.get_mut("DB").unwrap().vrf = "202".into();
            }),
        ];
        for (what, corrupt) in cases {
            let mut p = three_tier();
            corrupt(&mut p);
            assert!(!validate_policy(&p).is_empty(), "corruption `{what}` not detected");
        }
    }

    #[test]
    fn missing_key_names_the_key() {
        let err = NetworkPolicy::from_json(r#"{"epgs":[],"contracts":[],"filters":[],"switches":[]}"#).unwrap_err();
        assert!(err.to_string().contains("`vrfs`"), "{err}");
    }

    #[test]
    fn duplicate_names_rejected_on_load() {
        let err = NetworkPolicy::from_json(
            r#"{"vrfs":[{"name":"v"},{"name":"v"}],"epgs":[],"contracts":[],"filters":[],"switches":[]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("duplicate vrf"), "{err}");
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let p = three_tier();
        p.save(&path).unwrap();
        let back = NetworkPolicy::load(&path).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.object_ids(), p.object_ids());
    }

    #[test]
    fn file_schema_keys() {
        let v = serde_json::to_value(three_tier()).unwrap();
        for key in ["vrfs", "epgs", "contracts", "filters", "switches"] {
            assert!(v[key].is_array(), "{key}");
        }
        assert_eq!(v["epgs"][0]["endpoints"][0]["switch"], "S2");
        assert_eq!(v["contracts"][0]["pairs"][0]["epgA"], "App");
        assert_eq!(v["filters"][0]["action"], "allow");
    }
}
