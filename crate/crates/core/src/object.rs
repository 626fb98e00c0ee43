// SPDX-License-Identifier: Apache-2.0

//! Identifiers shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Kind of a policy object. The declaration order is the sort order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectKind {
    Vrf,
    Epg,
    Contract,
    Filter,
    Switch,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 5] = [
        ObjectKind::Vrf,
        ObjectKind::Epg,
        ObjectKind::Contract,
        ObjectKind::Filter,
        ObjectKind::Switch,
    ];

    fn prefix(self) -> &'static str {
        match self {
            ObjectKind::Vrf => "VRF",
            ObjectKind::Epg => "EPG",
            ObjectKind::Contract => "Contract",
            ObjectKind::Filter => "Filter",
            ObjectKind::Switch => "Switch",
        }
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.prefix())
    }
}

/// A policy object identifier. Ordered by kind, then name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectId {
    pub kind: ObjectKind,
    pub name: String,
}

impl ObjectId {
    pub fn new(kind: ObjectKind, name: impl Into<String>) -> Self {
        ObjectId { kind, name: name.into() }
    }

    pub fn vrf(name: impl Into<String>) -> Self {
        Self::new(ObjectKind::Vrf, name)
    }

    pub fn epg(name: impl Into<String>) -> Self {
        Self::new(ObjectKind::Epg, name)
    }

    pub fn contract(name: impl Into<String>) -> Self {
        Self::new(ObjectKind::Contract, name)
    }

    pub fn filter(name: impl Into<String>) -> Self {
        Self::new(ObjectKind::Filter, name)
    }

    pub fn switch(name: impl Into<String>) -> Self {
        Self::new(ObjectKind::Switch, name)
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.name)
    }
}

impl FromStr for ObjectId {
    type Err = Error;

    /// Parses the `Kind:name` form produced by `Display`. The kind prefix is
    /// case-insensitive.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, name) = s
            .split_once(':')
            .ok_or_else(|| Error::Input(format!("object id `{s}` is not of the form Kind:name")))?;
        let kind = ObjectKind::ALL
            .into_iter()
            .find(|k| k.prefix().eq_ignore_ascii_case(kind))
            .ok_or_else(|| Error::Input(format!("unknown object kind `{kind}` in `{s}`")))?;
        if name.is_empty() {
            return Err(Error::Input(format!("object id `{s}` has an empty name")));
        }
        Ok(ObjectId::new(kind, name))
    }
}

/// An unordered EPG pair, stored with `a < b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawPair")]
pub struct EpgPair {
    a: String,
    b: String,
}

#[derive(Deserialize)]
struct RawPair {
    a: String,
    b: String,
}

impl TryFrom<RawPair> for EpgPair {
    type Error = String;

    fn try_from(raw: RawPair) -> Result<Self, Self::Error> {
        EpgPair::new(raw.a, raw.b).ok_or_else(|| "EPG pair must name two distinct EPGs".to_string())
    }
}

impl EpgPair {
    /// Returns `None` when both sides name the same EPG.
    pub fn new(x: impl Into<String>, y: impl Into<String>) -> Option<Self> {
        let (x, y) = (x.into(), y.into());
        match x.cmp(&y) {
            std::cmp::Ordering::Less => Some(EpgPair { a: x, b: y }),
            std::cmp::Ordering::Greater => Some(EpgPair { a: y, b: x }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn a(&self) -> &str {
        &self.a
    }

    pub fn b(&self) -> &str {
        &self.b
    }

    pub fn contains(&self, epg: &str) -> bool {
        self.a == epg || self.b == epg
    }
}

impl fmt::Display for EpgPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.a, self.b)
    }
}
