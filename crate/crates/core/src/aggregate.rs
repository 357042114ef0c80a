//! Merging of grouped regions into super-regions.
//!
//! Every attribute carries one reduction rule. Standard attribute names use
//! a fixed built-in rule ([`standard_rule`]); other attributes use the rule
//! declared in the manifest. Regional attributes are reduced over group
//! members (per time step for series). Connection attributes are reduced
//! over all member pairs between two different groups; connections inside a
//! group disappear because a super-region is a single node.

use rayon::prelude::*;
use thiserror::Error;

use crate::connectivity::ConnectivityMatrix;
use crate::dataset::{
    check_weight_attribute, AggregationRule, Attribute, Dataset, DatasetError, Dimension, RegionSet, Table, Technology,
    ValueKind,
};
use crate::hess::{super_region_name, Grouping};
use crate::matrix::Matrix;
use crate::scalar::{CompensatedSum, Scalar};
use crate::techagg::{Plant, TechFleet};

/// Weight attribute used by the built-in weighted-mean rule.
pub const DEFAULT_WEIGHT_ATTRIBUTE: &str = "Maximum capacity";

/// Built-in rules for standard attribute names, in canonical spelling.
pub const STANDARD_RULES: [(&str, &str); 20] = [
    ("Maximum operation rate", "weighted_mean"),
    ("Fixed operation rate", "sum"),
    ("Maximum capacity", "sum"),
    ("Fixed capacity", "sum"),
    ("Locational eligibility", "bool_or"),
    ("Investment per capacity", "mean"),
    ("Investment if built", "bool_or"),
    ("Opex per operation", "mean"),
    ("Opex per capacity", "mean"),
    ("Opex if built", "bool_or"),
    ("Interest rate", "mean"),
    ("Economic lifetime", "mean"),
    ("Losses", "mean"),
    ("Distances", "mean"),
    ("Commodity cost", "mean"),
    ("Commodity revenue", "mean"),
    ("Opex per charge operation", "mean"),
    ("Opex per discharge operation", "mean"),
    ("Technical lifetime", "sum"),
    ("Reactances", "sum"),
];

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("attribute {attribute:?} has no aggregation rule")]
    NoRule { attribute: String },
    #[error("attribute {attribute:?}: weighted mean is not defined for connection attributes")]
    ConnectionWeightedMean { attribute: String },
    #[error("attribute {attribute:?}: boolean attributes only support bool_or, not {rule}")]
    BooleanRule { attribute: String, rule: String },
    #[error("aggregation plan does not match the dataset's attributes")]
    PlanMismatch,
    #[error("grouping covers {found} regions, dataset has {expected}")]
    GroupingSize { expected: usize, found: usize },
    #[error("grouping references unknown region index {index}")]
    UnknownRegion { index: usize },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Rule of a standard attribute name. Matching ignores case, treats `_` as
/// a space and collapses runs of whitespace.
pub fn standard_rule(name: &str) -> Option<AggregationRule> {
    let key = canonical_name(name);
    STANDARD_RULES.iter().find(|(n, _)| n.to_ascii_lowercase() == key).map(|(_, rule)| match *rule {
        "sum" => AggregationRule::Sum,
        "mean" => AggregationRule::Mean,
        "bool_or" => AggregationRule::BoolOr,
        _ => AggregationRule::WeightedMean { weight_attribute: DEFAULT_WEIGHT_ATTRIBUTE.to_string() },
    })
}

fn canonical_name(name: &str) -> String {
    name.replace('_', " ").split_whitespace().collect::<Vec<_>>().join(" ").to_ascii_lowercase()
}

/// Resolved rule per attribute, index-aligned with `Dataset::attributes`.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregationPlan {
    pub entries: Vec<PlanEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanEntry {
    pub component: String,
    pub name: String,
    pub rule: AggregationRule,
}

impl AggregationPlan {
    pub fn rule(&self, component: &str, name: &str) -> Option<&AggregationRule> {
        self.entries.iter().find(|e| e.component == component && e.name == name).map(|e| &e.rule)
    }
}

/// Standard names get their built-in rule, everything else the manifest's.
///
/// A built-in weighted mean keeps the manifest's weight attribute when the
/// manifest also declares a weighted mean, and otherwise weighs by
/// `Maximum capacity` of the same component.
pub fn default_plan<S: Scalar>(d: &Dataset<S>) -> Result<AggregationPlan, AggregateError> {
    let mut entries = Vec::with_capacity(d.attributes.len());
    for attr in &d.attributes {
        let spec = &attr.spec;
        let rule = match (standard_rule(&spec.name), &spec.aggregation_rule) {
            (Some(AggregationRule::WeightedMean { .. }), Some(declared @ AggregationRule::WeightedMean { .. })) => {
                declared.clone()
            }
            (Some(rule), _) => rule,
            (None, Some(declared)) => declared.clone(),
            (None, None) => return Err(AggregateError::NoRule { attribute: spec.label() }),
        };
        match &rule {
            AggregationRule::WeightedMean { weight_attribute } => {
                if spec.dimension == Dimension::Connection2d {
                    return Err(AggregateError::ConnectionWeightedMean { attribute: spec.label() });
                }
                check_weight_attribute(d, spec, weight_attribute)?;
            }
            AggregationRule::BoolOr => {}
            other if spec.value_kind == ValueKind::Boolean => {
                return Err(AggregateError::BooleanRule { attribute: spec.label(), rule: other.to_string() });
            }
            _ => {}
        }
        entries.push(PlanEntry { component: spec.component.clone(), name: spec.name.clone(), rule });
    }
    Ok(AggregationPlan { entries })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AggregateWarning {
    /// A weighted mean fell back to the plain mean because every member
    /// weight was zero.
    ZeroWeights { attribute: String, group: String },
}

impl std::fmt::Display for AggregateWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AggregateWarning::ZeroWeights { attribute, group } => {
                write!(f, "{attribute}: all weights zero in group {group:?}, used unweighted mean")
            }
        }
    }
}

pub fn aggregate_dataset<S: Scalar>(
    d: &Dataset<S>,
    g: &Grouping<S>,
    plan: &AggregationPlan,
) -> Result<Dataset<S>, AggregateError> {
    aggregate_dataset_report(d, g, plan).map(|(d, _)| d)
}

/// Aggregates `d` over the groups of `g`, also returning warnings.
///
/// Super-regions are ordered by their first member region and named by
/// [`super_region_name`]. Fleets are concatenated; plant ids in merged
/// groups are prefixed with their original region (`<region>.<plant>`).
pub fn aggregate_dataset_report<S: Scalar>(
    d: &Dataset<S>,
    g: &Grouping<S>,
    plan: &AggregationPlan,
) -> Result<(Dataset<S>, Vec<AggregateWarning>), AggregateError> {
    let n = d.n_regions();
    if g.assignment.len() != n {
        return Err(AggregateError::GroupingSize { expected: n, found: g.assignment.len() });
    }
    if let Some(&index) = g.assignment.iter().find(|&&m| m >= n) {
        return Err(AggregateError::UnknownRegion { index });
    }
    if plan.entries.len() != d.attributes.len()
        || plan.entries.iter().zip(&d.attributes).any(|(e, a)| e.component != a.spec.component || e.name != a.spec.name)
    {
        return Err(AggregateError::PlanMismatch);
    }
    let groups: Vec<Vec<usize>> = g.groups().into_iter().map(|(_, members)| members).collect();
    let names: Vec<String> = groups
        .iter()
        .map(|members| super_region_name(&members.iter().map(|&r| d.regions.id(r).to_string()).collect::<Vec<_>>()))
        .collect();
    let regions = RegionSet::new(names.clone())?;

    let results: Vec<(Attribute<S>, Vec<AggregateWarning>)> = d
        .attributes
        .par_iter()
        .zip(&plan.entries)
        .map(|(attr, entry)| aggregate_attribute(d, attr, &entry.rule, &groups, &names))
        .collect();
    let mut attributes = Vec::with_capacity(results.len());
    let mut warnings = Vec::new();
    for (attr, w) in results {
        attributes.push(attr);
        warnings.extend(w);
    }

    let technologies = d
        .technologies
        .iter()
        .map(|tech| Technology {
            name: tech.name.clone(),
            fleet_dir: tech.fleet_dir.clone(),
            fleets: groups.iter().map(|members| merge_fleets(d, &tech.fleets, members)).collect(),
        })
        .collect();
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok((Dataset::new(regions, d.horizon, attributes, technologies)?, warnings))
}

fn aggregate_attribute<S: Scalar>(
    d: &Dataset<S>,
    attr: &Attribute<S>,
    rule: &AggregationRule,
    groups: &[Vec<usize>],
    names: &[String],
) -> (Attribute<S>, Vec<AggregateWarning>) {
    let mut warnings = Vec::new();
    let weights: Option<&[S]> = match rule {
        AggregationRule::WeightedMean { weight_attribute } => {
            d.attribute(&attr.spec.component, weight_attribute).and_then(|w| w.table.as_regional_1d())
        }
        _ => None,
    };
    let mut reduce = |gi: usize, values: &mut dyn Iterator<Item = (usize, S)>| -> S {
        let members: Vec<(usize, S)> = values.collect();
        let (v, zero_weights) = reduce_members(rule, &members, weights);
        if zero_weights {
            let w = AggregateWarning::ZeroWeights { attribute: attr.spec.label(), group: names[gi].clone() };
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
        v
    };
    let k = groups.len();
    let table = match &attr.table {
        Table::Regional1d(v) => {
            Table::Regional1d((0..k).map(|gi| reduce(gi, &mut groups[gi].iter().map(|&r| (r, v[r])))).collect())
        }
        Table::Regional2dTime(m) => {
            let steps = m.cols();
            let mut out = Matrix::filled(k, steps, S::zero());
            for (gi, members) in groups.iter().enumerate() {
                for t in 0..steps {
                    out[(gi, t)] = reduce(gi, &mut members.iter().map(|&r| (r, m[(r, t)])));
                }
            }
            Table::Regional2dTime(out)
        }
        Table::Connection2d(m) => Table::Connection2d(Matrix::from_fn(k, k, |gi, hi| {
            if gi == hi {
                return S::zero();
            }
            let pairs = groups[gi].iter().flat_map(|&u| groups[hi].iter().map(move |&v| m[(u, v)]));
            reduce_links(rule, pairs)
        })),
    };
    let mut spec = attr.spec.clone();
    spec.aggregation_rule = Some(rule.clone());
    if *rule == AggregationRule::BoolOr {
        spec.value_kind = ValueKind::Boolean;
    }
    (Attribute { spec, table }, warnings)
}

/// Reduces `(region, value)` pairs of one group. The flag reports a
/// weighted mean that fell back to the plain mean.
fn reduce_members<S: Scalar>(rule: &AggregationRule, members: &[(usize, S)], weights: Option<&[S]>) -> (S, bool) {
    if let [(_, v)] = members {
        return match rule {
            AggregationRule::BoolOr => (bool_value(*v != S::zero()), false),
            _ => (*v, false),
        };
    }
    let count = S::of_usize(members.len());
    let values = || members.iter().map(|&(_, v)| v);
    let plain_mean = || bounded(values().collect::<CompensatedSum<S>>().value() / count, values());
    match rule {
        AggregationRule::Sum => (values().collect::<CompensatedSum<S>>().value(), false),
        AggregationRule::Mean => (plain_mean(), false),
        AggregationRule::BoolOr => (bool_value(values().any(|v| v != S::zero())), false),
        AggregationRule::WeightedMean { .. } => {
            let w = weights.expect("plan checked the weight attribute");
            let total = members.iter().map(|&(r, _)| w[r]).collect::<CompensatedSum<S>>().value();
            if !(total > S::zero()) {
                return (plain_mean(), true);
            }
            let weighted = members.iter().map(|&(r, v)| w[r] * v).collect::<CompensatedSum<S>>().value();
            (bounded(weighted / total, values()), false)
        }
    }
}

/// Reduction of the links between two groups. Mean only counts linked
/// pairs, so absent links do not dilute physical quantities.
fn reduce_links<S: Scalar>(rule: &AggregationRule, pairs: impl Iterator<Item = S>) -> S {
    match rule {
        AggregationRule::Sum => pairs.collect::<CompensatedSum<S>>().value(),
        AggregationRule::BoolOr => {
            let mut any = false;
            for v in pairs {
                any |= v != S::zero();
            }
            bool_value(any)
        }
        _ => {
            let linked: Vec<S> = pairs.filter(|&v| v != S::zero()).collect();
            match linked.as_slice() {
                [] => S::zero(),
                [only] => *only,
                _ => bounded(
                    linked.iter().copied().collect::<CompensatedSum<S>>().value() / S::of_usize(linked.len()),
                    linked.iter().copied(),
                ),
            }
        }
    }
}

fn bool_value<S: Scalar>(b: bool) -> S {
    if b {
        S::one()
    } else {
        S::zero()
    }
}

/// Clamps rounding overshoot back into the members' range.
fn bounded<S: Scalar>(v: S, values: impl Iterator<Item = S>) -> S {
    let (lo, hi) = values.fold((S::infinity(), S::neg_infinity()), |(lo, hi), x| (lo.min(x), hi.max(x)));
    v.max(lo).min(hi)
}

fn merge_fleets<S: Scalar>(d: &Dataset<S>, fleets: &[TechFleet<S>], members: &[usize]) -> TechFleet<S> {
    if let [only] = members {
        return fleets[*only].clone();
    }
    let plants = members
        .iter()
        .flat_map(|&r| {
            fleets[r].plants.iter().map(move |p| Plant {
                id: format!("{}.{}", d.regions.id(r), p.id),
                capacity: p.capacity,
                cf: p.cf.clone(),
            })
        })
        .collect();
    TechFleet { plants }
}

/// Adjacency between super-regions: two groups touch when any of their
/// members do.
pub fn aggregate_connectivity<S: Scalar>(c: &ConnectivityMatrix, g: &Grouping<S>) -> ConnectivityMatrix {
    let groups = g.groups();
    let mut group_of = vec![0; g.assignment.len()];
    for (gi, (_, members)) in groups.iter().enumerate() {
        for &r in members {
            group_of[r] = gi;
        }
    }
    let mut out = ConnectivityMatrix::empty(groups.len());
    for a in 0..c.len() {
        for &b in c.neighbors(a) {
            if group_of[a] != group_of[b] {
                out.connect(group_of[a], group_of[b]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{AttributeSpec, TimeHorizon};
    use crate::distance::DistanceMatrix;

    fn dataset(attrs: Vec<Attribute<f64>>, n: usize, t: usize) -> Dataset<f64> {
        Dataset::new(
            RegionSet::new((0..n).map(|i| format!("r{i}")).collect()).unwrap(),
            TimeHorizon::new(t).unwrap(),
            attrs,
            vec![],
        )
        .unwrap()
    }

    fn grouping(assignment: Vec<usize>) -> Grouping<f64> {
        let n = assignment.len();
        Grouping::from_assignment(&DistanceMatrix::from_fn(n, |_, _| 1.0), assignment)
    }

    #[test]
    fn standard_names_resolve() {
        assert_eq!(standard_rule("Opex per capacity"), Some(AggregationRule::Mean));
        assert_eq!(standard_rule("reactances"), Some(AggregationRule::Sum));
        assert_eq!(standard_rule("locational_eligibility"), Some(AggregationRule::BoolOr));
        assert_eq!(
            standard_rule("  Maximum   operation rate "),
            Some(AggregationRule::WeightedMean { weight_attribute: "Maximum capacity".into() })
        );
        assert_eq!(standard_rule("Something else"), None);
    }

    #[test]
    fn weighted_operation_rate() {
        let rate = Attribute {
            spec: AttributeSpec::new("wind", "Maximum operation rate", Dimension::Regional2dTime),
            table: Table::Regional2dTime(Matrix::from_vec(2, 2, vec![0.2, 0.4, 0.6, 0.8])),
        };
        let cap = Attribute {
            spec: AttributeSpec::new("wind", "Maximum capacity", Dimension::Regional1d),
            table: Table::Regional1d(vec![1.0, 3.0]),
        };
        let d = dataset(vec![rate, cap], 2, 2);
        let plan = default_plan(&d).unwrap();
        let out = aggregate_dataset(&d, &grouping(vec![0, 0]), &plan).unwrap();
        let cells = out.attributes[0].table.cells();
        assert!((cells[0] - 0.5).abs() < 1e-15 && (cells[1] - 0.7).abs() < 1e-15, "{cells:?}");
        assert_eq!(out.attributes[1].table.cells(), &[4.0]);
        assert_eq!(out.regions.ids(), &["r0_r1".to_string()]);
    }

    #[test]
    fn zero_weights_fall_back_with_warning() {
        let rate = Attribute {
            spec: AttributeSpec::new("pv", "Maximum operation rate", Dimension::Regional2dTime),
            table: Table::Regional2dTime(Matrix::from_vec(2, 1, vec![0.2, 0.4])),
        };
        let cap = Attribute {
            spec: AttributeSpec::new("pv", "Maximum capacity", Dimension::Regional1d),
            table: Table::Regional1d(vec![0.0, 0.0]),
        };
        let d = dataset(vec![rate, cap], 2, 1);
        let (out, warnings) = aggregate_dataset_report(&d, &grouping(vec![0, 0]), &default_plan(&d).unwrap()).unwrap();
        assert!((out.attributes[0].table.cells()[0] - 0.3).abs() < 1e-15);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn connection_rules() {
        // r0 - r1 linked (2), r1 - r2 linked (4), r0 - r2 unlinked.
        let m = Matrix::from_vec(3, 3, vec![0.0, 2.0, 0.0, 2.0, 0.0, 4.0, 0.0, 4.0, 0.0]);
        let attr = |name: &str| Attribute {
            spec: AttributeSpec::new("line", name, Dimension::Connection2d),
            table: Table::Connection2d(m.clone()),
        };
        let d = dataset(vec![attr("Losses"), attr("Reactances")], 3, 1);
        let out = aggregate_dataset(&d, &grouping(vec![0, 0, 2]), &default_plan(&d).unwrap()).unwrap();
        // Group {r0, r1} to {r2}: linked pairs only r1-r2.
        assert_eq!(out.attributes[0].table.cells(), &[0.0, 4.0, 4.0, 0.0]);
        // Sum over all cross pairs; intra-group link dropped.
        assert_eq!(out.attributes[1].table.cells(), &[0.0, 4.0, 4.0, 0.0]);
    }

    #[test]
    fn boolean_or_and_plan_errors() {
        let elig = Attribute {
            spec: AttributeSpec::new("wind", "Locational eligibility", Dimension::Regional1d).boolean(),
            table: Table::Regional1d(vec![0.0, 1.0, 0.0]),
        };
        let d = dataset(vec![elig], 3, 1);
        let out = aggregate_dataset(&d, &grouping(vec![1, 1, 2]), &default_plan(&d).unwrap()).unwrap();
        assert_eq!(out.attributes[0].table.cells(), &[1.0, 0.0]);

        let unknown = Attribute {
            spec: AttributeSpec::new("x", "Custom", Dimension::Regional1d),
            table: Table::Regional1d(vec![1.0]),
        };
        let d = dataset(vec![unknown.clone()], 1, 1);
        assert!(matches!(default_plan(&d), Err(AggregateError::NoRule { .. })));
        let mut with_rule = unknown;
        with_rule.spec.aggregation_rule = Some(AggregationRule::Sum);
        let d = dataset(vec![with_rule], 1, 1);
        assert_eq!(default_plan(&d).unwrap().entries[0].rule, AggregationRule::Sum);
    }

    #[test]
    fn super_region_adjacency() {
        let c = ConnectivityMatrix::from_pairs(4, [(0, 1), (1, 2), (2, 3)]);
        let g = grouping(vec![0, 0, 3, 3]);
        let sc = aggregate_connectivity(&c, &g);
        assert_eq!(sc.len(), 2);
        assert!(sc.is_adjacent(0, 1));
    }
}
