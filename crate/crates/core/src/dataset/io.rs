//! Plain-text dataset directory: `manifest.json` plus one CSV per attribute
//! and per-region fleet files.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    check_weight_attribute, AggregationRule, Attribute, AttributeSpec, Dataset, DatasetError, Dimension, RegionSet,
    Result, Table, Technology, TimeHorizon, ValueKind,
};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::techagg::{Plant, TechFleet};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    time_steps: usize,
    regions: Vec<String>,
    #[serde(default)]
    attributes: Vec<ManifestAttribute>,
    #[serde(default)]
    technologies: Vec<ManifestTechnology>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestAttribute {
    name: String,
    component: String,
    dimension: Dimension,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    aggregation_rule: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight_attribute: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grouping_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value_kind: Option<ValueKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    file: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestTechnology {
    name: String,
    fleet_dir: String,
}

/// Non-fatal observations made while loading.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LoadWarning {
    DiagonalIgnored { file: String, region: String },
    MissingFleet { technology: String, region: String },
}

impl fmt::Display for LoadWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadWarning::DiagonalIgnored { file, region } => {
                write!(f, "{file}: self-connection of {region:?} ignored")
            }
            LoadWarning::MissingFleet { technology, region } => {
                write!(f, "technology {technology:?}: no fleet directory for {region:?}, treated as empty")
            }
        }
    }
}

/// Default table file name for an attribute: a filesystem-safe slug of
/// `<component>__<name>`.
pub fn attribute_file_name(component: &str, name: &str) -> String {
    fn slug(s: &str) -> String {
        let mut out = String::with_capacity(s.len());
        let mut last_us = false;
        for ch in s.trim().chars() {
            if ch.is_ascii_alphanumeric() {
                out.push(ch.to_ascii_lowercase());
                last_us = false;
            } else if !last_us {
                out.push('_');
                last_us = true;
            }
        }
        out.trim_matches('_').to_string()
    }
    format!("{}__{}.csv", slug(component), slug(name))
}

pub fn load_dataset<S: Scalar>(dir: impl AsRef<Path>) -> Result<Dataset<S>> {
    load_dataset_report(dir).map(|(d, _)| d)
}

/// Loads and validates a dataset directory, also returning warnings.
pub fn load_dataset_report<S: Scalar>(dir: impl AsRef<Path>) -> Result<(Dataset<S>, Vec<LoadWarning>)> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST);
    let text = read_to_string(&manifest_path)?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|source| DatasetError::Manifest { path: manifest_path.clone(), source })?;

    let regions = RegionSet::new(manifest.regions)?;
    let horizon = TimeHorizon::new(manifest.time_steps)?;
    let mut warnings = Vec::new();

    let specs = manifest.attributes.into_iter().map(spec_from_manifest).collect::<Result<Vec<_>>>()?;

    // Weight references are checked before any table is read.
    for spec in &specs {
        if let Some(AggregationRule::WeightedMean { weight_attribute }) = &spec.aggregation_rule {
            match specs.iter().find(|s| s.component == spec.component && &s.name == weight_attribute) {
                None => {
                    return Err(DatasetError::UnknownWeightAttribute {
                        attribute: spec.label(),
                        weight: weight_attribute.clone(),
                    })
                }
                Some(w) if w.dimension != Dimension::Regional1d || w.name == spec.name => {
                    return Err(DatasetError::InvalidWeightAttribute {
                        attribute: spec.label(),
                        weight: weight_attribute.clone(),
                    })
                }
                Some(_) => {}
            }
        }
    }

    let mut attributes = Vec::with_capacity(specs.len());
    for spec in specs {
        let path = dir.join(&spec.file);
        let table = match spec.dimension {
            Dimension::Regional1d => read_regional_1d(&path, &spec, &regions)?,
            Dimension::Regional2dTime => read_regional_2d(&path, &spec, &regions, horizon)?,
            Dimension::Connection2d => read_connection(&path, &spec, &regions, &mut warnings)?,
        };
        attributes.push(Attribute { spec, table });
    }

    let mut technologies = Vec::with_capacity(manifest.technologies.len());
    for tech in manifest.technologies {
        let mut fleets = Vec::with_capacity(regions.len());
        for id in regions.ids() {
            let region_dir = dir.join(&tech.fleet_dir).join(id);
            if !region_dir.is_dir() {
                warnings.push(LoadWarning::MissingFleet { technology: tech.name.clone(), region: id.clone() });
                fleets.push(TechFleet::default());
                continue;
            }
            fleets.push(read_fleet(&region_dir, horizon)?);
        }
        technologies.push(Technology { name: tech.name, fleet_dir: tech.fleet_dir, fleets });
    }

    let d = Dataset { regions, horizon, attributes, technologies };
    for attr in &d.attributes {
        if let Some(AggregationRule::WeightedMean { weight_attribute }) = &attr.spec.aggregation_rule {
            check_weight_attribute(&d, &attr.spec, weight_attribute)?;
        }
    }
    d.validate()?;
    Ok((d, warnings))
}

fn spec_from_manifest(m: ManifestAttribute) -> Result<AttributeSpec> {
    let label = format!("{}/{}", m.component, m.name);
    let rule = match m.aggregation_rule.as_deref() {
        None => None,
        Some("sum") => Some(AggregationRule::Sum),
        Some("mean") => Some(AggregationRule::Mean),
        Some("bool_or") => Some(AggregationRule::BoolOr),
        Some("weighted_mean") => match m.weight_attribute.clone() {
            Some(weight_attribute) => Some(AggregationRule::WeightedMean { weight_attribute }),
            None => return Err(DatasetError::UnknownWeightAttribute { attribute: label, weight: String::new() }),
        },
        Some(other) => return Err(DatasetError::UnknownRule { attribute: label, rule: other.to_string() }),
    };
    let grouping_weight = m.grouping_weight.unwrap_or(1.0);
    if !grouping_weight.is_finite() || grouping_weight < 0.0 {
        return Err(DatasetError::InvalidGroupingWeight { attribute: label });
    }
    Ok(AttributeSpec {
        file: m.file.unwrap_or_else(|| format!("{}.csv", m.name)),
        name: m.name,
        component: m.component,
        dimension: m.dimension,
        aggregation_rule: rule,
        grouping_weight,
        value_kind: m.value_kind.unwrap_or_default(),
    })
}

fn read_to_string(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(DatasetError::MissingFile { path: path.to_path_buf() });
    }
    fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })
}

/// Reads all records of a CSV file, header included, as trimmed strings.
fn read_records(path: &Path) -> Result<Vec<csv::StringRecord>> {
    if !path.exists() {
        return Err(DatasetError::MissingFile { path: path.to_path_buf() });
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| DatasetError::Csv { path: path.to_path_buf(), source })?;
    rdr.records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|source| DatasetError::Csv { path: path.to_path_buf(), source })
}

fn file_label(path: &Path) -> String {
    path.display().to_string()
}

fn expect_header(path: &Path, records: &[csv::StringRecord], expected: &[String]) -> Result<()> {
    let file = file_label(path);
    let Some(header) = records.first() else {
        return Err(DatasetError::Header { file, expected: expected.join(","), found: String::new() });
    };
    if header.len() != expected.len() {
        return Err(DatasetError::DimensionMismatch { file, line: 1, expected: expected.len(), found: header.len() });
    }
    if header.iter().zip(expected).any(|(a, b)| a != b) {
        return Err(DatasetError::Header {
            file,
            expected: expected.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(())
}

fn parse_cell<S: Scalar>(path: &Path, line: usize, raw: &str) -> Result<S> {
    let v: S =
        raw.parse().map_err(|_| DatasetError::NonNumeric { file: file_label(path), line, value: raw.to_string() })?;
    if !v.is_finite() {
        return Err(DatasetError::NonFinite { file: file_label(path), line });
    }
    Ok(v)
}

fn check_kind<S: Scalar>(path: &Path, spec: &AttributeSpec, line: usize, v: S) -> Result<()> {
    if spec.value_kind == ValueKind::Boolean && v != S::zero() && v != S::one() {
        return Err(DatasetError::NonBoolean { file: file_label(path), line });
    }
    Ok(())
}

fn time_header(first: &str, steps: usize) -> Vec<String> {
    std::iter::once(first.to_string()).chain((1..=steps).map(|t| format!("t{t}"))).collect()
}

fn read_regional_1d<S: Scalar>(path: &Path, spec: &AttributeSpec, regions: &RegionSet) -> Result<Table<S>> {
    let records = read_records(path)?;
    expect_header(path, &records, &["region".to_string(), "value".to_string()])?;
    let mut values: Vec<Option<S>> = vec![None; regions.len()];
    for (i, rec) in records.iter().enumerate().skip(1) {
        let line = i + 1;
        if rec.len() != 2 {
            return Err(DatasetError::DimensionMismatch {
                file: file_label(path),
                line,
                expected: 2,
                found: rec.len(),
            });
        }
        let r = region_index(path, regions, &rec[0])?;
        let v = parse_cell(path, line, &rec[1])?;
        check_kind(path, spec, line, v)?;
        if values[r].replace(v).is_some() {
            return Err(DatasetError::DuplicateRow { file: file_label(path), key: rec[0].to_string() });
        }
    }
    let values = complete_rows(path, regions, values)?;
    Ok(Table::Regional1d(values))
}

fn read_regional_2d<S: Scalar>(
    path: &Path,
    spec: &AttributeSpec,
    regions: &RegionSet,
    horizon: TimeHorizon,
) -> Result<Table<S>> {
    let steps = horizon.steps();
    let records = read_records(path)?;
    expect_header(path, &records, &time_header("region", steps))?;
    let mut rows: Vec<Option<Vec<S>>> = vec![None; regions.len()];
    for (i, rec) in records.iter().enumerate().skip(1) {
        let line = i + 1;
        if rec.len() != steps + 1 {
            return Err(DatasetError::DimensionMismatch {
                file: file_label(path),
                line,
                expected: steps + 1,
                found: rec.len(),
            });
        }
        let r = region_index(path, regions, &rec[0])?;
        let row = rec
            .iter()
            .skip(1)
            .map(|cell| {
                let v = parse_cell(path, line, cell)?;
                check_kind(path, spec, line, v)?;
                Ok(v)
            })
            .collect::<Result<Vec<S>>>()?;
        if rows[r].replace(row).is_some() {
            return Err(DatasetError::DuplicateRow { file: file_label(path), key: rec[0].to_string() });
        }
    }
    let rows = complete_rows(path, regions, rows)?;
    Ok(Table::Regional2dTime(Matrix::from_vec(regions.len(), steps, rows.into_iter().flatten().collect())))
}

fn read_connection<S: Scalar>(
    path: &Path,
    spec: &AttributeSpec,
    regions: &RegionSet,
    warnings: &mut Vec<LoadWarning>,
) -> Result<Table<S>> {
    let n = regions.len();
    let records = read_records(path)?;
    expect_header(path, &records, &["region_from".to_string(), "region_to".to_string(), "value".to_string()])?;
    let mut m = Matrix::filled(n, n, S::zero());
    let mut seen = vec![false; n * n];
    for (i, rec) in records.iter().enumerate().skip(1) {
        let line = i + 1;
        if rec.len() != 3 {
            return Err(DatasetError::DimensionMismatch {
                file: file_label(path),
                line,
                expected: 3,
                found: rec.len(),
            });
        }
        let a = region_index(path, regions, &rec[0])?;
        let b = region_index(path, regions, &rec[1])?;
        let v: S = parse_cell(path, line, &rec[2])?;
        check_kind(path, spec, line, v)?;
        if std::mem::replace(&mut seen[a * n + b], true) {
            return Err(DatasetError::DuplicateRow { file: file_label(path), key: format!("{},{}", &rec[0], &rec[1]) });
        }
        if v < S::zero() {
            return Err(DatasetError::NegativeConnection {
                file: file_label(path),
                from: rec[0].to_string(),
                to: rec[1].to_string(),
            });
        }
        if a == b {
            warnings.push(LoadWarning::DiagonalIgnored { file: file_label(path), region: rec[0].to_string() });
            continue;
        }
        m[(a, b)] = v;
    }
    Ok(Table::Connection2d(m))
}

fn region_index(path: &Path, regions: &RegionSet, id: &str) -> Result<usize> {
    regions.position(id).ok_or_else(|| DatasetError::UnknownRegion { file: file_label(path), region: id.to_string() })
}

fn complete_rows<T>(path: &Path, regions: &RegionSet, rows: Vec<Option<T>>) -> Result<Vec<T>> {
    rows.into_iter()
        .enumerate()
        .map(|(r, row)| {
            row.ok_or_else(|| DatasetError::MissingRow { file: file_label(path), region: regions.id(r).to_string() })
        })
        .collect()
}

fn read_fleet<S: Scalar>(dir: &Path, horizon: TimeHorizon) -> Result<TechFleet<S>> {
    let steps = horizon.steps();
    let plants_path = dir.join("plants.csv");
    let cf_path = dir.join("cf.csv");

    let records = read_records(&plants_path)?;
    expect_header(&plants_path, &records, &["plant_id".to_string(), "capacity".to_string()])?;
    let mut ids = Vec::new();
    let mut caps = Vec::new();
    let mut index = HashMap::new();
    for (i, rec) in records.iter().enumerate().skip(1) {
        let line = i + 1;
        if rec.len() != 2 {
            return Err(DatasetError::DimensionMismatch {
                file: file_label(&plants_path),
                line,
                expected: 2,
                found: rec.len(),
            });
        }
        if index.insert(rec[0].to_string(), ids.len()).is_some() {
            return Err(DatasetError::DuplicateRow { file: file_label(&plants_path), key: rec[0].to_string() });
        }
        ids.push(rec[0].to_string());
        caps.push(parse_cell::<S>(&plants_path, line, &rec[1])?);
    }

    let records = read_records(&cf_path)?;
    expect_header(&cf_path, &records, &time_header("plant_id", steps))?;
    let mut series: Vec<Option<Vec<S>>> = vec![None; ids.len()];
    for (i, rec) in records.iter().enumerate().skip(1) {
        let line = i + 1;
        if rec.len() != steps + 1 {
            return Err(DatasetError::DimensionMismatch {
                file: file_label(&cf_path),
                line,
                expected: steps + 1,
                found: rec.len(),
            });
        }
        let p = *index
            .get(&rec[0])
            .ok_or_else(|| DatasetError::UnknownPlant { file: file_label(&cf_path), plant: rec[0].to_string() })?;
        let row = rec.iter().skip(1).map(|c| parse_cell(&cf_path, line, c)).collect::<Result<Vec<S>>>()?;
        if series[p].replace(row).is_some() {
            return Err(DatasetError::DuplicateRow { file: file_label(&cf_path), key: rec[0].to_string() });
        }
    }

    let mut plants = Vec::with_capacity(ids.len());
    for ((id, capacity), cf) in ids.into_iter().zip(caps).zip(series) {
        let cf = cf.ok_or_else(|| DatasetError::MissingRow { file: file_label(&cf_path), region: id.clone() })?;
        plants.push(Plant { id, capacity, cf });
    }
    let fleet = TechFleet { plants };
    fleet.check(&dir.display().to_string(), steps)?;
    Ok(fleet)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| DatasetError::Io { path: parent.to_path_buf(), source })?;
    }
    fs::write(path, contents).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })
}

fn push_csv_line<'a>(buf: &mut String, fields: impl IntoIterator<Item = &'a str>) {
    let mut first = true;
    for f in fields {
        if !first {
            buf.push(',');
        }
        first = false;
        if f.contains([',', '"', '\n', '\r']) || f.starts_with(' ') || f.ends_with(' ') {
            buf.push('"');
            buf.push_str(&f.replace('"', "\"\""));
            buf.push('"');
        } else {
            buf.push_str(f);
        }
    }
    buf.push('\n');
}

/// Time-series table in the 2-d text layout: `<key>,t1,...,tT`.
pub(crate) fn format_series_table<'a, S: Scalar>(
    key_header: &str,
    steps: usize,
    rows: impl IntoIterator<Item = (&'a str, &'a [S])>,
) -> String {
    let mut buf = String::new();
    let header = time_header(key_header, steps);
    push_csv_line(&mut buf, header.iter().map(String::as_str));
    for (key, row) in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        push_csv_line(&mut buf, std::iter::once(key).chain(cells.iter().map(String::as_str)));
    }
    buf
}

pub(crate) fn format_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut buf = String::new();
    push_csv_line(&mut buf, header.iter().copied());
    for row in rows {
        push_csv_line(&mut buf, row.iter().map(String::as_str));
    }
    buf
}

/// Writes `d` as a dataset directory. Existing files are overwritten.
pub fn save_dataset<S: Scalar>(d: &Dataset<S>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let manifest = Manifest {
        time_steps: d.horizon.steps(),
        regions: d.regions.ids().to_vec(),
        attributes: d
            .attributes
            .iter()
            .map(|a| {
                let spec = &a.spec;
                ManifestAttribute {
                    name: spec.name.clone(),
                    component: spec.component.clone(),
                    dimension: spec.dimension,
                    aggregation_rule: spec.aggregation_rule.as_ref().map(|r| r.keyword().to_string()),
                    weight_attribute: match &spec.aggregation_rule {
                        Some(AggregationRule::WeightedMean { weight_attribute }) => Some(weight_attribute.clone()),
                        _ => None,
                    },
                    grouping_weight: Some(spec.grouping_weight),
                    value_kind: Some(spec.value_kind),
                    file: Some(spec.file.clone()),
                }
            })
            .collect(),
        technologies: d
            .technologies
            .iter()
            .map(|t| ManifestTechnology { name: t.name.clone(), fleet_dir: t.fleet_dir.clone() })
            .collect(),
    };
    let mut json = serde_json::to_string_pretty(&manifest)
        .map_err(|source| DatasetError::Manifest { path: dir.join(MANIFEST), source })?;
    json.push('\n');
    write_file(&dir.join(MANIFEST), &json)?;

    let ids = d.regions.ids();
    for attr in &d.attributes {
        let text = match &attr.table {
            Table::Regional1d(v) => {
                let rows: Vec<Vec<String>> = ids.iter().zip(v).map(|(id, x)| vec![id.clone(), x.to_string()]).collect();
                format_csv(&["region", "value"], &rows)
            }
            Table::Regional2dTime(m) => format_series_table(
                "region",
                d.horizon.steps(),
                ids.iter().enumerate().map(|(r, id)| (id.as_str(), m.row(r))),
            ),
            Table::Connection2d(m) => {
                let mut rows = Vec::new();
                for a in 0..ids.len() {
                    for b in 0..ids.len() {
                        if a != b && m[(a, b)] != S::zero() {
                            rows.push(vec![ids[a].clone(), ids[b].clone(), m[(a, b)].to_string()]);
                        }
                    }
                }
                format_csv(&["region_from", "region_to", "value"], &rows)
            }
        };
        write_file(&dir.join(&attr.spec.file), &text)?;
    }

    for tech in &d.technologies {
        for (r, fleet) in tech.fleets.iter().enumerate() {
            let region_dir = dir.join(&tech.fleet_dir).join(ids[r].as_str());
            write_fleet(&region_dir, fleet, d.horizon.steps())?;
        }
    }
    Ok(())
}

pub(crate) fn write_fleet<S: Scalar>(dir: &Path, fleet: &TechFleet<S>, steps: usize) -> Result<()> {
    let rows: Vec<Vec<String>> = fleet.plants.iter().map(|p| vec![p.id.clone(), p.capacity.to_string()]).collect();
    write_file(&dir.join("plants.csv"), &format_csv(&["plant_id", "capacity"], &rows))?;
    let cf = format_series_table("plant_id", steps, fleet.plants.iter().map(|p| (p.id.as_str(), p.cf.as_slice())));
    write_file(&dir.join("cf.csv"), &cf)
}

pub(crate) fn write_text(path: &Path, contents: &str) -> Result<()> {
    write_file(path, contents)
}
