use serde::{Deserialize, Serialize};

use super::Grouping;
use crate::dataset::RegionSet;
use crate::scalar::Scalar;

/// `grouping.json` contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupingReport {
    pub k: usize,
    pub contiguity: bool,
    pub objective: f64,
    pub cuts_added: usize,
    pub rounds: usize,
    pub groups: Vec<GroupReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    /// Super-region name.
    pub name: String,
    pub medoid: String,
    pub members: Vec<String>,
}

impl GroupingReport {
    pub fn new<S: Scalar>(g: &Grouping<S>, regions: &RegionSet, contiguity: bool) -> Self {
        let groups = g
            .groups()
            .into_iter()
            .map(|(m, members)| {
                let members: Vec<String> = members.iter().map(|&r| regions.id(r).to_string()).collect();
                GroupReport { name: super_region_name(&members), medoid: regions.id(m).to_string(), members }
            })
            .collect();
        Self {
            k: g.k(),
            contiguity,
            objective: g.objective.as_f64(),
            cuts_added: g.cuts_added,
            rounds: g.rounds,
            groups,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Name of a merged region: a singleton keeps its id, otherwise the member
/// ids sorted and joined with `_`.
pub fn super_region_name(members: &[String]) -> String {
    let mut sorted: Vec<&str> = members.iter().map(String::as_str).collect();
    sorted.sort_unstable();
    sorted.join("_")
}
