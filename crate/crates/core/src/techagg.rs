//! Reduction of renewable plant fleets to a few representative plants.
//!
//! Capacity-factor series of a region's plants are clustered bottom-up
//! (Ward linkage on Euclidean distance by default). Each cluster becomes one
//! representative with the summed capacity and the capacity-weighted mean
//! series, so installed capacity and annual energy are both conserved.

use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::{
    format_csv, format_series_table, write_text, AggregationRule, Attribute, AttributeSpec, Dataset, DatasetError,
    Dimension, Table, Technology,
};
use crate::matrix::Matrix;
use crate::scalar::{CompensatedSum, Scalar};

pub const MAX_CAPACITY: &str = "Maximum capacity";
pub const MAX_OPERATION_RATE: &str = "Maximum operation rate";

#[derive(Clone, Debug, PartialEq)]
pub struct Plant<S> {
    pub id: String,
    /// MW, positive.
    pub capacity: S,
    /// Capacity factor per time step, each in `[0, 1]`.
    pub cf: Vec<S>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TechFleet<S> {
    pub plants: Vec<Plant<S>>,
}

impl<S: Scalar> TechFleet<S> {
    pub fn new(plants: Vec<Plant<S>>) -> Self {
        Self { plants }
    }

    pub fn is_empty(&self) -> bool {
        self.plants.is_empty()
    }

    pub fn len(&self) -> usize {
        self.plants.len()
    }

    pub fn total_capacity(&self) -> S {
        self.plants.iter().map(|p| p.capacity).collect::<CompensatedSum<S>>().value()
    }

    /// `sum_t sum_p capacity_p * cf_p(t)`.
    pub fn total_energy(&self) -> S {
        self.plants
            .iter()
            .flat_map(|p| p.cf.iter().map(move |&v| p.capacity * v))
            .collect::<CompensatedSum<S>>()
            .value()
    }

    pub(crate) fn check(&self, file: &str, steps: usize) -> Result<(), DatasetError> {
        let mut ids = std::collections::HashSet::new();
        for p in &self.plants {
            if !ids.insert(p.id.as_str()) {
                return Err(DatasetError::DuplicateRow { file: file.to_string(), key: p.id.clone() });
            }
            if !(p.capacity > S::zero()) || !p.capacity.is_finite() {
                return Err(DatasetError::NonPositiveCapacity { file: file.to_string(), plant: p.id.clone() });
            }
            if p.cf.len() != steps {
                return Err(DatasetError::DimensionMismatch {
                    file: file.to_string(),
                    line: 0,
                    expected: steps,
                    found: p.cf.len(),
                });
            }
            if let Some(step) = p.cf.iter().position(|&v| !(v >= S::zero() && v <= S::one())) {
                return Err(DatasetError::CapacityFactorRange { file: file.to_string(), plant: p.id.clone(), step });
            }
        }
        Ok(())
    }
}

/// One representative plant.
#[derive(Clone, Debug, PartialEq)]
pub struct TechCluster<S> {
    pub capacity: S,
    pub cf: Vec<S>,
    /// Member plant ids in fleet order.
    pub members: Vec<String>,
}

impl<S: Scalar> TechCluster<S> {
    pub fn mean_cf(&self) -> S {
        mean(&self.cf)
    }
}

/// Agglomerative linkage, applied through the Lance-Williams update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Linkage {
    /// Minimum increase of within-cluster sum of squares.
    #[default]
    Ward,
    Average,
    Complete,
    Single,
}

#[derive(Debug, Error)]
pub enum TechAggError {
    #[error("cannot cluster an empty fleet")]
    EmptyFleet,
    #[error("number of representatives must be at least 1")]
    InvalidCount,
    #[error("unknown technology {0:?}")]
    UnknownTechnology(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

pub fn cluster_fleet<S: Scalar>(f: &TechFleet<S>, n_ts: usize) -> Result<Vec<TechCluster<S>>, TechAggError> {
    cluster_fleet_with(f, n_ts, Linkage::Ward)
}

/// Clusters a fleet into `min(n_ts, |plants|)` representatives, ordered by
/// descending mean capacity factor (ties: smallest member index first).
pub fn cluster_fleet_with<S: Scalar>(
    f: &TechFleet<S>,
    n_ts: usize,
    linkage: Linkage,
) -> Result<Vec<TechCluster<S>>, TechAggError> {
    if n_ts == 0 {
        return Err(TechAggError::InvalidCount);
    }
    if f.is_empty() {
        return Err(TechAggError::EmptyFleet);
    }
    let series: Vec<&[S]> = f.plants.iter().map(|p| p.cf.as_slice()).collect();
    let groups = agglomerate(&series, n_ts, linkage);
    let mut clusters: Vec<(S, usize, TechCluster<S>)> = groups
        .into_iter()
        .map(|members| {
            let c = representative(f, &members);
            (c.mean_cf(), members[0], c)
        })
        .collect();
    clusters.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite cf").then(a.1.cmp(&b.1)));
    Ok(clusters.into_iter().map(|(_, _, c)| c).collect())
}

fn representative<S: Scalar>(f: &TechFleet<S>, members: &[usize]) -> TechCluster<S> {
    let ids = members.iter().map(|&i| f.plants[i].id.clone()).collect();
    if let [only] = members {
        let p = &f.plants[*only];
        return TechCluster { capacity: p.capacity, cf: p.cf.clone(), members: ids };
    }
    let capacity = members.iter().map(|&i| f.plants[i].capacity).collect::<CompensatedSum<S>>().value();
    let steps = f.plants[members[0]].cf.len();
    let cf = (0..steps)
        .map(|t| {
            let weighted =
                members.iter().map(|&i| f.plants[i].capacity * f.plants[i].cf[t]).collect::<CompensatedSum<S>>();
            let (lo, hi) = members
                .iter()
                .map(|&i| f.plants[i].cf[t])
                .fold((S::infinity(), S::neg_infinity()), |(lo, hi), v| (lo.min(v), hi.max(v)));
            (weighted.value() / capacity).max(lo).min(hi)
        })
        .collect();
    TechCluster { capacity, cf, members: ids }
}

/// Bottom-up clustering of `series` into `target` clusters. Returns member
/// index lists (sorted), ordered by smallest member. The closest pair is
/// merged first; ties go to the lexicographically smallest index pair.
pub fn agglomerate<S: Scalar>(series: &[&[S]], target: usize, linkage: Linkage) -> Vec<Vec<usize>> {
    let m = series.len();
    let mut members: Vec<Vec<usize>> = (0..m).map(|i| vec![i]).collect();
    if target >= m {
        return members;
    }
    let squared = linkage == Linkage::Ward;
    let mut dist = Matrix::filled(m, m, S::zero());
    for i in 0..m {
        for j in i + 1..m {
            let ss = series[i]
                .iter()
                .zip(series[j])
                .map(|(&a, &b)| (a - b) * (a - b))
                .collect::<CompensatedSum<S>>()
                .value();
            let v = if squared { ss } else { ss.sqrt() };
            dist[(i, j)] = v;
            dist[(j, i)] = v;
        }
    }
    let mut active = vec![true; m];
    let mut size = vec![1usize; m];
    for _ in 0..m - target {
        let mut best: Option<(S, usize, usize)> = None;
        for i in 0..m {
            if !active[i] {
                continue;
            }
            for j in i + 1..m {
                if active[j] && best.map_or(true, |(b, _, _)| dist[(i, j)] < b) {
                    best = Some((dist[(i, j)], i, j));
                }
            }
        }
        let (dij, i, j) = best.expect("at least two active clusters");
        let (ni, nj) = (S::of_usize(size[i]), S::of_usize(size[j]));
        for k in 0..m {
            if !active[k] || k == i || k == j {
                continue;
            }
            let (dik, djk) = (dist[(i, k)], dist[(j, k)]);
            let nk = S::of_usize(size[k]);
            let v = match linkage {
                Linkage::Ward => ((ni + nk) * dik + (nj + nk) * djk - nk * dij) / (ni + nj + nk),
                Linkage::Average => (ni * dik + nj * djk) / (ni + nj),
                Linkage::Complete => dik.max(djk),
                Linkage::Single => dik.min(djk),
            };
            dist[(i, k)] = v;
            dist[(k, i)] = v;
        }
        active[j] = false;
        size[i] += size[j];
        let moved = std::mem::take(&mut members[j]);
        members[i].extend(moved);
        members[i].sort_unstable();
    }
    members.into_iter().zip(active).filter(|(_, a)| *a).map(|(m, _)| m).collect()
}

/// Capacity-weighted mean squared deviation of member series from their
/// representative, per plant and time step.
pub fn within_cluster_dispersion<S: Scalar>(f: &TechFleet<S>, clusters: &[TechCluster<S>]) -> S {
    let index: std::collections::HashMap<&str, &Plant<S>> = f.plants.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut acc = CompensatedSum::new();
    for c in clusters {
        for id in &c.members {
            let p = index[id.as_str()];
            for (&x, &r) in p.cf.iter().zip(&c.cf) {
                acc.add(p.capacity * (x - r) * (x - r));
            }
        }
    }
    let steps = f.plants.first().map_or(1, |p| p.cf.len());
    acc.value() / (f.total_capacity() * S::of_usize(steps))
}

fn mean<S: Scalar>(v: &[S]) -> S {
    v.iter().copied().collect::<CompensatedSum<S>>().value() / S::of_usize(v.len())
}

/// Representatives chosen for one technology, per region.
#[derive(Clone, Debug, PartialEq)]
pub struct TechRepresentatives<S> {
    pub technology: String,
    pub fleet_dir: String,
    /// Indexed by region; empty for regions without plants.
    pub per_region: Vec<Vec<TechCluster<S>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TechAggregation<S> {
    pub dataset: Dataset<S>,
    pub representatives: Vec<TechRepresentatives<S>>,
}

/// Replaces the fleets of `tech` (or of every technology when `None`) with
/// at most `n_ts` representatives per region.
///
/// The technology's own attributes are replaced by one component instance
/// `<tech>_r<rank>` per representative rank, carrying the representative's
/// capacity as `Maximum capacity` and its series as `Maximum operation
/// rate`; the technology's other attributes are copied to every instance.
/// Regions with fewer representatives get zero capacity for missing ranks.
pub fn apply_to_dataset<S: Scalar>(
    d: &Dataset<S>,
    tech: Option<&str>,
    n_ts: usize,
) -> Result<TechAggregation<S>, TechAggError> {
    if n_ts == 0 {
        return Err(TechAggError::InvalidCount);
    }
    if let Some(name) = tech {
        if d.technology(name).is_none() {
            return Err(TechAggError::UnknownTechnology(name.to_string()));
        }
    }
    let mut out = d.clone();
    let mut representatives = Vec::new();
    for (ti, technology) in d.technologies.iter().enumerate() {
        if tech.is_some_and(|name| name != technology.name) {
            continue;
        }
        let per_region = technology
            .fleets
            .par_iter()
            .map(|f| if f.is_empty() { Ok(Vec::new()) } else { cluster_fleet(f, n_ts) })
            .collect::<Result<Vec<_>, _>>()?;
        replace_component(&mut out, technology, &per_region);
        out.technologies[ti].fleets = per_region
            .iter()
            .map(|clusters| TechFleet {
                plants: clusters
                    .iter()
                    .enumerate()
                    .map(|(r, c)| Plant { id: format!("r{}", r + 1), capacity: c.capacity, cf: c.cf.clone() })
                    .collect(),
            })
            .collect();
        representatives.push(TechRepresentatives {
            technology: technology.name.clone(),
            fleet_dir: technology.fleet_dir.clone(),
            per_region,
        });
    }
    out.validate()?;
    Ok(TechAggregation { dataset: out, representatives })
}

fn replace_component<S: Scalar>(d: &mut Dataset<S>, technology: &Technology<S>, per_region: &[Vec<TechCluster<S>>]) {
    let n = d.n_regions();
    let steps = d.horizon.steps();
    let ranks = per_region.iter().map(Vec::len).max().unwrap_or(0);
    let name = &technology.name;
    let inherited: Vec<Attribute<S>> = d
        .attributes
        .iter()
        .filter(|a| &a.spec.component == name && a.spec.name != MAX_CAPACITY && a.spec.name != MAX_OPERATION_RATE)
        .cloned()
        .collect();
    let template = |attr: &str| d.attribute(name, attr).map(|a| a.spec.grouping_weight).unwrap_or(1.0);
    let (cap_weight, rate_weight) = (template(MAX_CAPACITY), template(MAX_OPERATION_RATE));
    d.attributes.retain(|a| &a.spec.component != name);
    for rank in 0..ranks {
        let component = format!("{name}_r{}", rank + 1);
        let capacity: Vec<S> = per_region.iter().map(|c| c.get(rank).map_or(S::zero(), |c| c.capacity)).collect();
        let rate = Matrix::from_fn(n, steps, |r, t| per_region[r].get(rank).map_or(S::zero(), |c| c.cf[t]));
        d.attributes.push(Attribute {
            spec: AttributeSpec::new(&component, MAX_OPERATION_RATE, Dimension::Regional2dTime)
                .with_rule(AggregationRule::WeightedMean { weight_attribute: MAX_CAPACITY.to_string() })
                .with_weight(rate_weight),
            table: Table::Regional2dTime(rate),
        });
        d.attributes.push(Attribute {
            spec: AttributeSpec::new(&component, MAX_CAPACITY, Dimension::Regional1d)
                .with_rule(AggregationRule::Sum)
                .with_weight(cap_weight),
            table: Table::Regional1d(capacity),
        });
        for attr in &inherited {
            let mut spec = attr.spec.clone();
            spec.component = component.clone();
            spec.file = crate::dataset::attribute_file_name(&spec.component, &spec.name);
            d.attributes.push(Attribute { spec, table: attr.table.clone() });
        }
    }
}

impl<S: Scalar> TechAggregation<S> {
    /// Writes `representatives.csv` (`rank,capacity,mean_cf`) and
    /// `representatives_cf.csv` next to every region's fleet files.
    pub fn write_representatives(&self, out_dir: &Path) -> Result<(), DatasetError> {
        let steps = self.dataset.horizon.steps();
        for tr in &self.representatives {
            for (r, clusters) in tr.per_region.iter().enumerate() {
                let dir = out_dir.join(&tr.fleet_dir).join(self.dataset.regions.id(r));
                let rows: Vec<Vec<String>> = clusters
                    .iter()
                    .enumerate()
                    .map(|(i, c)| vec![(i + 1).to_string(), c.capacity.to_string(), c.mean_cf().to_string()])
                    .collect();
                write_text(&dir.join("representatives.csv"), &format_csv(&["rank", "capacity", "mean_cf"], &rows))?;
                let ranks: Vec<String> = (1..=clusters.len()).map(|i| i.to_string()).collect();
                let cf = format_series_table(
                    "rank",
                    steps,
                    ranks.iter().map(String::as_str).zip(clusters.iter().map(|c| c.cf.as_slice())),
                );
                write_text(&dir.join("representatives_cf.csv"), &cf)?;
            }
        }
        Ok(())
    }
}
