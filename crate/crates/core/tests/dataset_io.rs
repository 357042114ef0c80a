use std::fs;
use std::path::Path;

use spagat::dataset::{load_dataset, load_dataset_report, save_dataset, Dataset, DatasetError, LoadWarning, Table};
use spagat::synth::{generate, SynthConfig};

fn write(dir: &Path, name: &str, text: &str) {
    let path = dir.join(name);
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
}

/// Three regions, two steps, one attribute of each dimension and a fleet.
fn small_dir(dir: &Path) {
    write(
        dir,
        "manifest.json",
        r#"{
  "time_steps": 2,
  "regions": ["a", "b", "c"],
  "attributes": [
    {"name": "Maximum capacity", "component": "wind", "dimension": "regional_1d", "file": "cap.csv"},
    {"name": "Maximum operation rate", "component": "wind", "dimension": "regional_2d_time", "file": "rate.csv"},
    {"name": "Distances", "component": "line", "dimension": "connection_2d", "file": "dist.csv"}
  ],
  "technologies": [{"name": "wind", "fleet_dir": "fleets"}]
}"#,
    );
    write(dir, "cap.csv", "region,value\na,10\nb,20\nc,5\n");
    write(dir, "rate.csv", "region,t1,t2\nc,0.5,0.6\na,0.1,0.2\nb,0.3,0.4\n");
    write(dir, "dist.csv", "region_from,region_to,value\na,b,100\nb,a,100\nb,c,50\nc,b,50\n");
    for r in ["a", "b", "c"] {
        write(dir, &format!("fleets/{r}/plants.csv"), "plant_id,capacity\np1,4\np2,6\n");
        write(dir, &format!("fleets/{r}/cf.csv"), "plant_id,t1,t2\np2,0.5,0.5\np1,0.25,0.75\n");
    }
}

fn load_err(dir: &Path) -> DatasetError {
    load_dataset::<f64>(dir).expect_err("load should fail")
}

#[test]
fn loads_rows_in_region_order() {
    let tmp = tempfile::tempdir().unwrap();
    small_dir(tmp.path());
    let d: Dataset<f64> = load_dataset(tmp.path()).unwrap();
    assert_eq!(d.regions.ids(), ["a", "b", "c"]);
    assert_eq!(d.attribute("wind", "Maximum capacity").unwrap().table, Table::Regional1d(vec![10.0, 20.0, 5.0]));
    let rate = d.attribute("wind", "Maximum operation rate").unwrap().table.cells().to_vec();
    assert_eq!(rate, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
    let fleet = &d.technology("wind").unwrap().fleets[1];
    assert_eq!(fleet.plants[0].id, "p1");
    assert_eq!(fleet.plants[0].cf, vec![0.25, 0.75]);
}

#[test]
fn save_then_load_is_identity() {
    let inst = generate(&SynthConfig { regions: 7, time_steps: 5, plants: 3, seed: 4 }).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    save_dataset(&inst.dataset, tmp.path()).unwrap();
    let back: Dataset<f64> = load_dataset(tmp.path()).unwrap();
    assert_eq!(back, inst.dataset);

    let again = tempfile::tempdir().unwrap();
    save_dataset(&back, again.path()).unwrap();
    for name in ["manifest.json", "fleets/wind_turbine/R03/cf.csv"] {
        assert_eq!(fs::read(tmp.path().join(name)).unwrap(), fs::read(again.path().join(name)).unwrap());
    }
}

#[test]
fn single_precision_load() {
    let tmp = tempfile::tempdir().unwrap();
    small_dir(tmp.path());
    let d: Dataset<f32> = load_dataset(tmp.path()).unwrap();
    assert_eq!(d.attribute("wind", "Maximum capacity").unwrap().table.cells(), &[10.0f32, 20.0, 5.0]);
}

#[test]
fn missing_fleet_and_diagonal_are_warnings() {
    let tmp = tempfile::tempdir().unwrap();
    small_dir(tmp.path());
    fs::remove_dir_all(tmp.path().join("fleets/c")).unwrap();
    write(tmp.path(), "dist.csv", "region_from,region_to,value\na,a,3\na,b,100\n");
    let (d, warnings) = load_dataset_report::<f64>(tmp.path()).unwrap();
    assert!(d.technology("wind").unwrap().fleets[2].is_empty());
    assert!(warnings.contains(&LoadWarning::MissingFleet { technology: "wind".into(), region: "c".into() }));
    assert!(warnings.iter().any(|w| matches!(w, LoadWarning::DiagonalIgnored { region, .. } if region == "a")));
    assert_eq!(d.attribute("line", "Distances").unwrap().table.cells()[0], 0.0);
}

#[test]
fn missing_attribute_file() {
    let tmp = tempfile::tempdir().unwrap();
    small_dir(tmp.path());
    fs::remove_file(tmp.path().join("cap.csv")).unwrap();
    assert!(matches!(load_err(tmp.path()), DatasetError::MissingFile { .. }));
}

#[test]
fn wrong_column_count() {
    let tmp = tempfile::tempdir().unwrap();
    small_dir(tmp.path());
    write(tmp.path(), "rate.csv", "region,t1,t2\na,0.1,0.2\nb,0.3\nc,0.5,0.6\n");
    let err = load_err(tmp.path());
    assert!(matches!(err, DatasetError::DimensionMismatch { line: 3, expected: 3, .. }), "{err}");
}

#[test]
fn wrong_time_header() {
    let tmp = tempfile::tempdir().unwrap();
    small_dir(tmp.path());
    write(tmp.path(), "rate.csv", "region,t1,t2,t3\na,0.1,0.2,0\nb,0.3,0.4,0\nc,0.5,0.6,0\n");
    assert!(matches!(load_err(tmp.path()), DatasetError::DimensionMismatch { line: 1, .. }));
}

#[test]
fn non_numeric_and_non_finite_cells() {
    let tmp = tempfile::tempdir().unwrap();
    small_dir(tmp.path());
    write(tmp.path(), "cap.csv", "region,value\na,10\nb,lots\nc,5\n");
    assert!(matches!(load_err(tmp.path()), DatasetError::NonNumeric { line: 3, .. }));
    write(tmp.path(), "cap.csv", "region,value\na,10\nb,NaN\nc,5\n");
    assert!(matches!(load_err(tmp.path()), DatasetError::NonFinite { line: 3, .. }));
}

#[test]
fn unknown_and_missing_regions() {
    let tmp = tempfile::tempdir().unwrap();
    small_dir(tmp.path());
    write(tmp.path(), "cap.csv", "region,value\na,10\nb,20\nz,5\n");
    assert!(matches!(load_err(tmp.path()), DatasetError::UnknownRegion { .. }));
    write(tmp.path(), "cap.csv", "region,value\na,10\nb,20\n");
    assert!(matches!(load_err(tmp.path()), DatasetError::MissingRow { .. }));
    write(tmp.path(), "cap.csv", "region,value\na,10\nb,20\nc,5\na,1\n");
    assert!(matches!(load_err(tmp.path()), DatasetError::DuplicateRow { .. }));
}

#[test]
fn negative_connection_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    small_dir(tmp.path());
    write(tmp.path(), "dist.csv", "region_from,region_to,value\na,b,-1\n");
    assert!(matches!(load_err(tmp.path()), DatasetError::NegativeConnection { .. }));
}

#[test]
fn bad_rules_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    small_dir(tmp.path());
    let manifest = fs::read_to_string(tmp.path().join("manifest.json")).unwrap();
    let with_rule = |rule: &str| {
        manifest.replace(r#""file": "rate.csv""#, &format!(r#""file": "rate.csv", "aggregation_rule": "{rule}""#))
    };
    write(tmp.path(), "manifest.json", &with_rule("median"));
    assert!(matches!(load_err(tmp.path()), DatasetError::UnknownRule { .. }));
    let weighted = with_rule("weighted_mean").replace(
        r#""aggregation_rule": "weighted_mean""#,
        r#""aggregation_rule": "weighted_mean", "weight_attribute": "Nameplate""#,
    );
    write(tmp.path(), "manifest.json", &weighted);
    assert!(matches!(load_err(tmp.path()), DatasetError::UnknownWeightAttribute { .. }));
}

#[test]
fn fleet_errors() {
    let tmp = tempfile::tempdir().unwrap();
    small_dir(tmp.path());
    write(tmp.path(), "fleets/a/cf.csv", "plant_id,t1,t2\np2,0.5,0.5\np1,0.25,1.5\n");
    assert!(matches!(load_err(tmp.path()), DatasetError::CapacityFactorRange { .. }));
    write(tmp.path(), "fleets/a/cf.csv", "plant_id,t1,t2\np2,0.5,0.5\np9,0.25,0.5\n");
    assert!(matches!(load_err(tmp.path()), DatasetError::UnknownPlant { .. }));
    write(tmp.path(), "fleets/a/cf.csv", "plant_id,t1,t2\np2,0.5,0.5\np1,0.25,0.5\n");
    write(tmp.path(), "fleets/a/plants.csv", "plant_id,capacity\np1,0\np2,6\n");
    assert!(matches!(load_err(tmp.path()), DatasetError::NonPositiveCapacity { .. }));
}

#[test]
fn duplicate_region_ids_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    small_dir(tmp.path());
    let manifest = fs::read_to_string(tmp.path().join("manifest.json")).unwrap();
    write(tmp.path(), "manifest.json", &manifest.replace(r#"["a", "b", "c"]"#, r#"["a", "b", "a"]"#));
    assert!(matches!(load_err(tmp.path()), DatasetError::DuplicateRegion { .. }));
}
