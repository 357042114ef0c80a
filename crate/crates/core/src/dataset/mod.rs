//! The multi-attribute regional dataset consumed by every other module.
//!
//! A [`Dataset`] holds an ordered region set, a time horizon, one value table
//! per attribute and, optionally, per-region renewable plant fleets. Region
//! order is the manifest declaration order and indexes every table.

mod io;
mod normalize;

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::techagg::TechFleet;

pub use io::{attribute_file_name, load_dataset, load_dataset_report, save_dataset, LoadWarning};
pub(crate) use io::{format_csv, format_series_table, write_text};
pub use normalize::{normalize, NormalizedDataset};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("missing file: {}", .path.display())]
    MissingFile { path: PathBuf },
    #[error("i/o error on {}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed manifest {}: {source}", .path.display())]
    Manifest { path: PathBuf, source: serde_json::Error },
    #[error("malformed csv {}: {source}", .path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("dataset declares no regions")]
    NoRegions,
    #[error("time horizon must have at least one step")]
    NoTimeSteps,
    #[error("invalid region id {id:?}: ids must be non-empty and free of path separators")]
    InvalidRegionId { id: String },
    #[error("duplicate region id {id:?}")]
    DuplicateRegion { id: String },
    #[error("duplicate attribute {component:?}/{name:?}")]
    DuplicateAttribute { component: String, name: String },
    #[error("duplicate technology {name:?}")]
    DuplicateTechnology { name: String },
    #[error("{file}: bad header, expected {expected:?}, found {found:?}")]
    Header { file: String, expected: String, found: String },
    #[error("{file}: dimension mismatch at line {line}: expected {expected} columns, found {found}")]
    DimensionMismatch { file: String, line: usize, expected: usize, found: usize },
    #[error("{file}: non-numeric cell {value:?} at line {line}")]
    NonNumeric { file: String, line: usize, value: String },
    #[error("{file}: non-finite value at line {line}")]
    NonFinite { file: String, line: usize },
    #[error("attribute {attribute:?}: unknown aggregation rule {rule:?}")]
    UnknownRule { attribute: String, rule: String },
    #[error("{file}: unknown plant {plant:?}")]
    UnknownPlant { file: String, plant: String },
    #[error("{file}: unknown region {region:?}")]
    UnknownRegion { file: String, region: String },
    #[error("{file}: no row for region {region:?}")]
    MissingRow { file: String, region: String },
    #[error("{file}: duplicate row {key:?}")]
    DuplicateRow { file: String, key: String },
    #[error("{file}: negative connection value for {from:?} -> {to:?}")]
    NegativeConnection { file: String, from: String, to: String },
    #[error("{file}: boolean attribute holds a value other than 0 or 1 at line {line}")]
    NonBoolean { file: String, line: usize },
    #[error("attribute {attribute:?}: weighted mean references unknown attribute {weight:?}")]
    UnknownWeightAttribute { attribute: String, weight: String },
    #[error(
        "attribute {attribute:?}: weight attribute {weight:?} must be a 1-d regional attribute of the same component"
    )]
    InvalidWeightAttribute { attribute: String, weight: String },
    #[error("attribute {attribute:?}: grouping weight must be finite and nonnegative")]
    InvalidGroupingWeight { attribute: String },
    #[error("attribute {attribute:?}: table shape does not match its dimension")]
    TableShape { attribute: String },
    #[error("{file}: plant {plant:?} has non-positive capacity")]
    NonPositiveCapacity { file: String, plant: String },
    #[error("{file}: plant {plant:?} has capacity factor outside [0, 1] at step {step}")]
    CapacityFactorRange { file: String, plant: String, step: usize },
    #[error("technology {technology:?}: fleet list does not cover the region set")]
    FleetShape { technology: String },
}

pub type Result<T, E = DatasetError> = std::result::Result<T, E>;

/// Ordered set of unique region identifiers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionSet {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl RegionSet {
    pub fn new(ids: Vec<String>) -> Result<Self> {
        if ids.is_empty() {
            return Err(DatasetError::NoRegions);
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if id.is_empty() || id.contains('/') || id.contains('\\') || id == "." || id == ".." {
                return Err(DatasetError::InvalidRegionId { id: id.clone() });
            }
            if index.insert(id.clone(), i).is_some() {
                return Err(DatasetError::DuplicateRegion { id: id.clone() });
            }
        }
        Ok(Self { ids, index })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }
}

/// Number of time steps shared by every time-indexed table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimeHorizon(usize);

impl TimeHorizon {
    pub fn new(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(DatasetError::NoTimeSteps);
        }
        Ok(Self(steps))
    }

    pub fn steps(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    #[serde(rename = "regional_1d")]
    Regional1d,
    #[serde(rename = "regional_2d_time")]
    Regional2dTime,
    #[serde(rename = "connection_2d")]
    Connection2d,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::Regional1d => "regional_1d",
            Dimension::Regional2dTime => "regional_2d_time",
            Dimension::Connection2d => "connection_2d",
        })
    }
}

/// How an attribute is reduced over the members of a region group.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AggregationRule {
    Sum,
    Mean,
    /// Weighted by a 1-d regional attribute of the same component.
    WeightedMean {
        weight_attribute: String,
    },
    BoolOr,
}

impl AggregationRule {
    pub fn keyword(&self) -> &'static str {
        match self {
            AggregationRule::Sum => "sum",
            AggregationRule::Mean => "mean",
            AggregationRule::WeightedMean { .. } => "weighted_mean",
            AggregationRule::BoolOr => "bool_or",
        }
    }
}

impl fmt::Display for AggregationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AggregationRule::WeightedMean { weight_attribute } => {
                write!(f, "weighted_mean({weight_attribute})")
            }
            other => f.write_str(other.keyword()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    #[default]
    Real,
    Boolean,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttributeSpec {
    pub name: String,
    /// Owning model component, e.g. "Wind turbine".
    pub component: String,
    pub dimension: Dimension,
    /// Rule declared in the manifest; may be absent when the name is a
    /// standard attribute with a built-in rule.
    pub aggregation_rule: Option<AggregationRule>,
    /// Multiplier of this attribute's contribution to the region distance.
    /// Zero excludes it from grouping but never from aggregation.
    pub grouping_weight: f64,
    pub value_kind: ValueKind,
    /// Table file name relative to the dataset directory.
    pub file: String,
}

impl AttributeSpec {
    pub fn new(component: &str, name: &str, dimension: Dimension) -> Self {
        Self {
            name: name.to_string(),
            component: component.to_string(),
            dimension,
            aggregation_rule: None,
            grouping_weight: 1.0,
            value_kind: ValueKind::Real,
            file: attribute_file_name(component, name),
        }
    }

    pub fn with_rule(mut self, rule: AggregationRule) -> Self {
        self.aggregation_rule = Some(rule);
        self
    }

    pub fn with_weight(mut self, w: f64) -> Self {
        self.grouping_weight = w;
        self
    }

    pub fn boolean(mut self) -> Self {
        self.value_kind = ValueKind::Boolean;
        self
    }

    pub fn label(&self) -> String {
        format!("{}/{}", self.component, self.name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Table<S> {
    /// One value per region.
    Regional1d(Vec<S>),
    /// Regions x time steps.
    Regional2dTime(Matrix<S>),
    /// Regions x regions, row = from, column = to. Diagonal is ignored.
    Connection2d(Matrix<S>),
}

impl<S: Scalar> Table<S> {
    pub fn dimension(&self) -> Dimension {
        match self {
            Table::Regional1d(_) => Dimension::Regional1d,
            Table::Regional2dTime(_) => Dimension::Regional2dTime,
            Table::Connection2d(_) => Dimension::Connection2d,
        }
    }

    /// All cells, row-major.
    pub fn cells(&self) -> &[S] {
        match self {
            Table::Regional1d(v) => v,
            Table::Regional2dTime(m) | Table::Connection2d(m) => m.as_slice(),
        }
    }

    pub fn map(&self, f: impl FnMut(&S) -> S) -> Self {
        match self {
            Table::Regional1d(v) => Table::Regional1d(v.iter().map(f).collect()),
            Table::Regional2dTime(m) => Table::Regional2dTime(m.map(f)),
            Table::Connection2d(m) => Table::Connection2d(m.map(f)),
        }
    }

    pub fn as_regional_1d(&self) -> Option<&[S]> {
        match self {
            Table::Regional1d(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Attribute<S> {
    pub spec: AttributeSpec,
    pub table: Table<S>,
}

/// A renewable technology with one plant fleet per region (possibly empty).
#[derive(Clone, Debug, PartialEq)]
pub struct Technology<S> {
    pub name: String,
    /// Directory relative to the dataset root holding `<region>/plants.csv`.
    pub fleet_dir: String,
    /// Indexed by region.
    pub fleets: Vec<TechFleet<S>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<S> {
    pub regions: RegionSet,
    pub horizon: TimeHorizon,
    pub attributes: Vec<Attribute<S>>,
    pub technologies: Vec<Technology<S>>,
}

impl<S: Scalar> Dataset<S> {
    /// Builds a dataset and checks every structural invariant.
    pub fn new(
        regions: RegionSet,
        horizon: TimeHorizon,
        attributes: Vec<Attribute<S>>,
        technologies: Vec<Technology<S>>,
    ) -> Result<Self> {
        let d = Self { regions, horizon, attributes, technologies };
        d.validate()?;
        Ok(d)
    }

    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }

    pub fn attribute(&self, component: &str, name: &str) -> Option<&Attribute<S>> {
        self.attributes.iter().find(|a| a.spec.component == component && a.spec.name == name)
    }

    pub fn attribute_index(&self, component: &str, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.spec.component == component && a.spec.name == name)
    }

    pub fn technology(&self, name: &str) -> Option<&Technology<S>> {
        self.technologies.iter().find(|t| t.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_regions();
        let t = self.horizon.steps();
        let mut seen = std::collections::HashSet::new();
        for attr in &self.attributes {
            let spec = &attr.spec;
            if !seen.insert((spec.component.as_str(), spec.name.as_str())) {
                return Err(DatasetError::DuplicateAttribute {
                    component: spec.component.clone(),
                    name: spec.name.clone(),
                });
            }
            if !spec.grouping_weight.is_finite() || spec.grouping_weight < 0.0 {
                return Err(DatasetError::InvalidGroupingWeight { attribute: spec.label() });
            }
            let shape_ok = match &attr.table {
                Table::Regional1d(v) => spec.dimension == Dimension::Regional1d && v.len() == n,
                Table::Regional2dTime(m) => {
                    spec.dimension == Dimension::Regional2dTime && m.rows() == n && m.cols() == t
                }
                Table::Connection2d(m) => spec.dimension == Dimension::Connection2d && m.rows() == n && m.cols() == n,
            };
            if !shape_ok {
                return Err(DatasetError::TableShape { attribute: spec.label() });
            }
            if attr.table.cells().iter().any(|v| !v.is_finite()) {
                return Err(DatasetError::NonFinite { file: spec.file.clone(), line: 0 });
            }
            if let Table::Connection2d(m) = &attr.table {
                for a in 0..n {
                    for b in 0..n {
                        if a != b && m[(a, b)] < S::zero() {
                            return Err(DatasetError::NegativeConnection {
                                file: spec.file.clone(),
                                from: self.regions.id(a).to_string(),
                                to: self.regions.id(b).to_string(),
                            });
                        }
                    }
                }
            }
            if spec.value_kind == ValueKind::Boolean
                && attr.table.cells().iter().any(|&v| v != S::zero() && v != S::one())
            {
                return Err(DatasetError::NonBoolean { file: spec.file.clone(), line: 0 });
            }
            if let Some(AggregationRule::WeightedMean { weight_attribute }) = &spec.aggregation_rule {
                check_weight_attribute(self, spec, weight_attribute)?;
            }
        }
        let mut techs = std::collections::HashSet::new();
        for tech in &self.technologies {
            if !techs.insert(tech.name.as_str()) {
                return Err(DatasetError::DuplicateTechnology { name: tech.name.clone() });
            }
            if tech.fleets.len() != n {
                return Err(DatasetError::FleetShape { technology: tech.name.clone() });
            }
            for (r, fleet) in tech.fleets.iter().enumerate() {
                let file = format!("{}/{}", tech.fleet_dir, self.regions.id(r));
                fleet.check(&file, t)?;
            }
        }
        Ok(())
    }
}

pub(crate) fn check_weight_attribute<S: Scalar>(d: &Dataset<S>, spec: &AttributeSpec, weight: &str) -> Result<()> {
    match d.attribute(&spec.component, weight) {
        None => Err(DatasetError::UnknownWeightAttribute { attribute: spec.label(), weight: weight.to_string() }),
        Some(w) if w.spec.dimension != Dimension::Regional1d || w.spec.name == spec.name => {
            Err(DatasetError::InvalidWeightAttribute { attribute: spec.label(), weight: weight.to_string() })
        }
        Some(_) => Ok(()),
    }
}
