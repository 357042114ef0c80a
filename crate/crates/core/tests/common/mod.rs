#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spagat::connectivity::ConnectivityMatrix;
use spagat::dataset::{
    AggregationRule, Attribute, AttributeSpec, Dataset, Dimension, RegionSet, Table, Technology, TimeHorizon,
};
use spagat::distance::DistanceMatrix;
use spagat::hess::Grouping;
use spagat::matrix::Matrix;
use spagat::techagg::{Plant, TechFleet};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random spanning tree plus extra edges with probability `p`.
pub fn connected_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> ConnectivityMatrix {
    let mut c = ConnectivityMatrix::empty(n);
    for i in 1..n {
        let j = rng.gen_range(0..i);
        c.connect(i, j);
    }
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(p) {
                c.connect(a, b);
            }
        }
    }
    c
}

pub fn distances(rng: &mut ChaCha8Rng, n: usize) -> DistanceMatrix<f64> {
    let values: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.0..1.0)).collect();
    DistanceMatrix::from_fn(n, |a, b| values[a * n + b])
}

pub fn fleet(rng: &mut ChaCha8Rng, plants: usize, steps: usize, prefix: &str) -> TechFleet<f64> {
    TechFleet::new(
        (0..plants)
            .map(|p| Plant {
                id: format!("{prefix}{p}"),
                capacity: rng.gen_range(0.5..20.0),
                cf: (0..steps).map(|_| rng.gen_range(0.0..1.0)).collect(),
            })
            .collect(),
    )
}

/// Dataset with every dimension, every rule kind, a boolean attribute and
/// a fleet per region. Links exist exactly on the edges of the returned graph.
pub fn dataset(rng: &mut ChaCha8Rng, n: usize, steps: usize) -> (Dataset<f64>, ConnectivityMatrix) {
    let regions = RegionSet::new((0..n).map(|i| format!("x{i}")).collect()).unwrap();
    let c = connected_graph(rng, n, 0.2);
    let mut uniform = |lo: f64, hi: f64, len: usize| -> Vec<f64> { (0..len).map(|_| rng.gen_range(lo..hi)).collect() };
    let mut attrs = vec![
        Attribute {
            spec: AttributeSpec::new("wind", "Maximum capacity", Dimension::Regional1d),
            table: Table::Regional1d(uniform(0.0, 500.0, n)),
        },
        Attribute {
            spec: AttributeSpec::new("wind", "Maximum operation rate", Dimension::Regional2dTime),
            table: Table::Regional2dTime(Matrix::from_vec(n, steps, uniform(0.0, 1.0, n * steps))),
        },
        Attribute {
            spec: AttributeSpec::new("wind", "Investment per capacity", Dimension::Regional1d).with_weight(0.5),
            table: Table::Regional1d(uniform(800.0, 1400.0, n)),
        },
        Attribute {
            spec: AttributeSpec::new("demand", "Fixed operation rate", Dimension::Regional2dTime),
            table: Table::Regional2dTime(Matrix::from_vec(n, steps, uniform(10.0, 90.0, n * steps))),
        },
        Attribute {
            spec: AttributeSpec::new("site", "Custom score", Dimension::Regional1d).with_rule(AggregationRule::Sum),
            table: Table::Regional1d(uniform(-5.0, 5.0, n)),
        },
    ];
    let flags = uniform(0.0, 1.0, n).into_iter().map(|v| if v < 0.3 { 1.0 } else { 0.0 }).collect();
    attrs.push(Attribute {
        spec: AttributeSpec::new("wind", "Locational eligibility", Dimension::Regional1d).boolean(),
        table: Table::Regional1d(flags),
    });
    let link_values = uniform(1.0, 300.0, n * n);
    let links =
        Matrix::from_fn(n, n, |a, b| if c.is_adjacent(a, b) { link_values[a.min(b) * n + a.max(b)] } else { 0.0 });
    attrs.push(Attribute {
        spec: AttributeSpec::new("cable", "Losses", Dimension::Connection2d),
        table: Table::Connection2d(links.map(|v| v * 1e-4)),
    });
    attrs.push(Attribute {
        spec: AttributeSpec::new("cable", "Reactances", Dimension::Connection2d),
        table: Table::Connection2d(links),
    });
    let fleets = (0..n)
        .map(|r| {
            let count = rng.gen_range(0..5);
            fleet(rng, count, steps, &format!("p{r}_"))
        })
        .collect();
    let tech = Technology { name: "wind".into(), fleet_dir: "fleets/wind".into(), fleets };
    let d = Dataset::new(regions, TimeHorizon::new(steps).unwrap(), attrs, vec![tech]).unwrap();
    (d, c)
}

/// Random grouping into exactly `k` non-empty groups; medoids are the
/// first member of each group.
pub fn grouping(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Grouping<f64> {
    let mut labels: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.gen_range(0..k) }).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        labels.swap(i, j);
    }
    let medoid_of: Vec<usize> = (0..k).map(|l| labels.iter().position(|&x| x == l).unwrap()).collect();
    let assignment = labels.iter().map(|&l| medoid_of[l]).collect();
    Grouping::from_assignment(&DistanceMatrix::from_fn(n, |_, _| 1.0), assignment)
}
