use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn spagat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spagat")).args(args).env("SPAGAT_LOG", "error").output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    spagat(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Path `r1 - r2 - ... - r6` with alternating values, so the best
/// unconstrained pair of groups interleaves along the path.
fn alternating_path(dir: &Path, adjacency: &str) {
    fs::create_dir_all(dir).unwrap();
    fs::write(
        dir.join("manifest.json"),
        r#"{"time_steps": 1, "regions": ["r1","r2","r3","r4","r5","r6"],
            "attributes": [{"name": "Score", "component": "site", "dimension": "regional_1d",
                            "aggregation_rule": "mean", "file": "score.csv"}]}"#,
    )
    .unwrap();
    fs::write(dir.join("score.csv"), "region,value\nr1,0\nr2,5\nr3,0.1\nr4,5.1\nr5,0.2\nr6,5.2\n").unwrap();
    fs::write(dir.join("adjacency.csv"), adjacency).unwrap();
}

const PATH: &str = "region_a,region_b\nr1,r2\nr2,r3\nr3,r4\nr4,r5\nr5,r6\n";

#[test]
fn group_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (input, out) = (tmp.path().join("in"), tmp.path().join("out"));
    alternating_path(&input, PATH);
    assert_eq!(code(&["group", "--dataset", s(&input), "--k", "2", "--mode", "exact", "--out", s(&out)]), 0);
    let report = fs::read_to_string(out.join("grouping.json")).unwrap();
    assert!(report.contains("\"cuts_added\""));
    for name in ["manifest.json", "score.csv", "adjacency.csv"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    // The aggregated directory is itself a valid input.
    let again = tmp.path().join("again");
    assert_eq!(code(&["group", "--dataset", s(&out), "--k", "1", "--out", s(&again)]), 0);
}

#[test]
fn k_equal_n_reproduces_input_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let (input, out) = (tmp.path().join("in"), tmp.path().join("out"));
    alternating_path(&input, PATH);
    assert_eq!(code(&["group", "--dataset", s(&input), "--k", "6", "--out", s(&out)]), 0);
    assert_eq!(
        fs::read_to_string(out.join("score.csv")).unwrap(),
        fs::read_to_string(input.join("score.csv")).unwrap()
    );
}

#[test]
fn input_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    alternating_path(&input, PATH);
    let out = tmp.path().join("out");
    assert_eq!(code(&["group", "--dataset", s(&input), "--k", "0", "--out", s(&out)]), 2);
    assert_eq!(code(&["group", "--dataset", s(&input), "--k", "7", "--out", s(&out)]), 2);
    assert_eq!(code(&["group", "--dataset", s(&tmp.path().join("nope")), "--k", "2", "--out", s(&out)]), 2);
    assert_eq!(code(&["group", "--dataset", s(&input), "--k", "2", "--mode", "fast", "--out", s(&out)]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    fs::write(input.join("score.csv"), "region,value\nr1,x\n").unwrap();
    assert_eq!(code(&["group", "--dataset", s(&input), "--k", "2", "--out", s(&out)]), 2);
}

#[test]
fn refuses_to_write_in_place() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    alternating_path(&input, PATH);
    let before = fs::read(input.join("score.csv")).unwrap();
    assert_eq!(code(&["group", "--dataset", s(&input), "--k", "2", "--out", s(&input)]), 2);
    assert_eq!(fs::read(input.join("score.csv")).unwrap(), before);
    assert!(!input.join("grouping.json").exists());
}

#[test]
fn infeasible_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    alternating_path(&input, "region_a,region_b\nr1,r2\nr3,r4\nr5,r6\n");
    let out = tmp.path().join("out");
    assert_eq!(code(&["group", "--dataset", s(&input), "--k", "2", "--out", s(&out)]), 3);
    assert_eq!(code(&["group", "--dataset", s(&input), "--k", "2", "--contiguity", "off", "--out", s(&out)]), 0);
}

#[test]
fn cut_limit_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    alternating_path(&input, PATH);
    let out = tmp.path().join("out");
    let args = ["group", "--dataset", s(&input), "--k", "2", "--mode", "exact", "--out", s(&out)];
    let mut limited = args.to_vec();
    limited.extend(["--max-cut-rounds", "1"]);
    let output = spagat(&limited);
    assert_eq!(output.status.code(), Some(4), "{}", String::from_utf8_lossy(&output.stderr));
    assert_eq!(code(&args), 0);
}

#[test]
fn gen_is_deterministic_and_loadable() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        assert_eq!(
            code(&["gen", "--regions", "9", "--time-steps", "12", "--plants", "3", "--seed", "5", "--out", s(dir)]),
            0
        );
    }
    for name in ["manifest.json", "geometry.json", "fleets/photovoltaic/R09/cf.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let out = tmp.path().join("d");
    assert_eq!(code(&["distances", "--dataset", s(&a), "--out", s(&out)]), 0);
    let csv = fs::read_to_string(out.join("distances.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 9 * 8 / 2);
}

#[test]
fn techagg_limits_representatives() {
    let tmp = tempfile::tempdir().unwrap();
    let (gen, out) = (tmp.path().join("gen"), tmp.path().join("out"));
    assert_eq!(code(&["gen", "--regions", "4", "--time-steps", "6", "--plants", "5", "--out", s(&gen)]), 0);
    assert_eq!(code(&["techagg", "--dataset", s(&gen), "--tech", "Photovoltaic", "--n-ts", "2", "--out", s(&out)]), 0);
    let plants = fs::read_to_string(out.join("fleets/photovoltaic/R01/plants.csv")).unwrap();
    assert_eq!(plants.lines().count(), 3);
    let untouched = fs::read_to_string(out.join("fleets/wind_turbine/R01/plants.csv")).unwrap();
    assert_eq!(untouched.lines().count(), 6);
    assert!(out.join("geometry.json").exists());
    assert_eq!(code(&["techagg", "--dataset", s(&gen), "--tech", "Tidal", "--n-ts", "2", "--out", s(&out)]), 2);
    assert_eq!(code(&["techagg", "--dataset", s(&gen), "--n-ts", "0", "--out", s(&out)]), 2);
}

#[test]
fn sweep_rows_follow_the_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let (gen, out) = (tmp.path().join("gen"), tmp.path().join("out"));
    assert_eq!(code(&["gen", "--regions", "12", "--time-steps", "8", "--plants", "3", "--out", s(&gen)]), 0);
    let sweep = [
        "sweep",
        "--dataset",
        s(&gen),
        "--k",
        "1,2,3,4,6,12",
        "--n-ts",
        "1,3",
        "--mode",
        "exact",
        "--workers",
        "3",
        "--out",
        s(&out),
    ];
    assert_eq!(code(&sweep), 0);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 12);
    let keys: Vec<(&str, &str)> = rows.iter().map(|r| (r[0], r[1])).collect();
    assert_eq!(keys[..4], [("1", "1"), ("1", "3"), ("2", "1"), ("2", "3")]);
    // Exact objectives never increase with k.
    let objectives: Vec<f64> = rows.iter().filter(|r| r[1] == "1").map(|r| r[2].parse().unwrap()).collect();
    for w in objectives.windows(2) {
        assert!(w[1] <= w[0], "{objectives:?}");
    }
    assert_eq!(objectives.last(), Some(&0.0));
    assert!(rows.iter().all(|r| r[5] == "0" && r.last() == Some(&"")));
    assert!(out.join("sweep_timing.csv").exists());
}
