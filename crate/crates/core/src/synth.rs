//! Seeded synthetic instances: a grid of square regions with spatially
//! smooth attributes and two-archetype renewable fleets.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::aggregate::standard_rule;
use crate::connectivity::{build_connectivity, format_geometry, ConnectivityError, GeometrySet, RegionGeometry};
use crate::dataset::{
    save_dataset, write_text, Attribute, AttributeSpec, Dataset, DatasetError, RegionSet, Table, Technology,
    TimeHorizon,
};
use crate::matrix::Matrix;
use crate::techagg::{Plant, TechFleet, MAX_CAPACITY, MAX_OPERATION_RATE};

pub const WIND: &str = "Wind turbine";
pub const PV: &str = "Photovoltaic";
pub const DEMAND: &str = "Electricity demand";
pub const LINES: &str = "AC cables";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthConfig {
    pub regions: usize,
    pub time_steps: usize,
    /// Plants per technology and region.
    pub plants: usize,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Connectivity(#[from] ConnectivityError),
}

/// A generated dataset with its grid geometry.
#[derive(Clone, Debug)]
pub struct Instance {
    pub dataset: Dataset<f64>,
    pub geometry: GeometrySet<f64>,
}

impl Instance {
    /// Writes the dataset directory plus `geometry.json`.
    pub fn save(&self, dir: &Path) -> Result<(), SynthError> {
        save_dataset(&self.dataset, dir)?;
        write_text(&dir.join("geometry.json"), &format_geometry(&self.geometry, &self.dataset.regions))?;
        Ok(())
    }
}

/// Smooth random field on the plane: a few random plane waves, scaled to
/// `[0, 1]` over the grid.
struct Field {
    waves: Vec<(f64, f64, f64, f64)>,
}

impl Field {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let waves = (0..3)
            .map(|_| {
                (
                    rng.gen_range(0.2..1.0),
                    rng.gen_range(-0.8..0.8),
                    rng.gen_range(-0.8..0.8),
                    rng.gen_range(0.0..2.0 * PI),
                )
            })
            .collect();
        Self { waves }
    }

    fn raw(&self, x: f64, y: f64) -> f64 {
        self.waves.iter().map(|&(a, fx, fy, ph)| a * (fx * x + fy * y + ph).cos()).sum()
    }

    fn sample(&self, points: &[(f64, f64)]) -> Vec<f64> {
        let raw: Vec<f64> = points.iter().map(|&(x, y)| self.raw(x, y)).collect();
        let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        raw.iter().map(|v| (v - lo) / span).collect()
    }
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

/// First-order autoregressive series with unit-scale innovations.
fn ar1(rng: &mut ChaCha8Rng, steps: usize, phi: f64) -> Vec<f64> {
    let mut x = 0.0;
    (0..steps)
        .map(|_| {
            x = phi * x + (1.0 - phi * phi).sqrt() * rng.gen_range(-1.0..1.0);
            x
        })
        .collect()
}

pub fn generate(cfg: &SynthConfig) -> Result<Instance, SynthError> {
    if cfg.regions == 0 {
        return Err(SynthError::InvalidSize("at least one region is required".into()));
    }
    if cfg.time_steps == 0 {
        return Err(SynthError::InvalidSize("at least one time step is required".into()));
    }
    if cfg.plants == 0 {
        return Err(SynthError::InvalidSize("at least one plant per region is required".into()));
    }
    let n = cfg.regions;
    let steps = cfg.time_steps;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let cols = (n as f64).sqrt().ceil() as usize;
    let width = n.to_string().len().max(2);
    let ids: Vec<String> = (1..=n).map(|i| format!("R{i:0width$}")).collect();
    let regions = RegionSet::new(ids)?;
    let centres: Vec<(f64, f64)> = (0..n).map(|i| ((i % cols) as f64 + 0.5, (i / cols) as f64 + 0.5)).collect();
    let geometry = GeometrySet {
        regions: centres
            .iter()
            .map(|&(cx, cy)| {
                let (x, y) = (cx - 0.5, cy - 0.5);
                RegionGeometry {
                    rings: vec![vec![[x, y], [x + 1.0, y], [x + 1.0, y + 1.0], [x, y + 1.0]]],
                    island: false,
                }
            })
            .collect(),
    };
    let adjacency = build_connectivity(&geometry, &[], &regions)?;

    let wind_level = Field::new(&mut rng).sample(&centres);
    let sun_level = Field::new(&mut rng).sample(&centres);
    let population = Field::new(&mut rng).sample(&centres);
    let cost = Field::new(&mut rng).sample(&centres);

    let weather = ar1(&mut rng, steps, 0.97);
    let clouds = ar1(&mut rng, steps, 0.9);
    let daylight: Vec<f64> = (0..steps).map(|t| ((2.0 * PI * ((t % 24) as f64 - 6.0) / 24.0).sin()).max(0.0)).collect();

    let mut wind_fleets = Vec::with_capacity(n);
    let mut pv_fleets = Vec::with_capacity(n);
    for r in 0..n {
        let wind = (0..cfg.plants)
            .map(|p| {
                let level = if rng.gen_bool(0.5) { 0.45 } else { 0.18 };
                let capacity = round6(rng.gen_range(1.0..10.0));
                let local = ar1(&mut rng, steps, 0.8);
                let cf = (0..steps)
                    .map(|t| {
                        round6(
                            (level * (0.7 + 0.6 * wind_level[r]) + 0.12 * weather[t] + 0.04 * local[t]).clamp(0.0, 1.0),
                        )
                    })
                    .collect();
                Plant { id: format!("w{:03}", p + 1), capacity, cf }
            })
            .collect();
        wind_fleets.push(TechFleet::new(wind));
        let pv = (0..cfg.plants)
            .map(|p| {
                let peak = if rng.gen_bool(0.5) { 0.8 } else { 0.45 };
                let capacity = round6(rng.gen_range(0.5..5.0));
                let cf = (0..steps)
                    .map(|t| {
                        let shade = 1.0 - 0.25 * (clouds[t] + 1.0) * 0.5 - 0.05 * rng.gen_range(0.0..1.0);
                        round6((daylight[t] * peak * (0.7 + 0.3 * sun_level[r]) * shade).clamp(0.0, 1.0))
                    })
                    .collect();
                Plant { id: format!("p{:03}", p + 1), capacity, cf }
            })
            .collect();
        pv_fleets.push(TechFleet::new(pv));
    }

    let mut attributes = Vec::new();
    for (tech, fleets) in [(WIND, &wind_fleets), (PV, &pv_fleets)] {
        let capacity: Vec<f64> = fleets.iter().map(|f| round6(f.total_capacity())).collect();
        let rate = Matrix::from_fn(n, steps, |r, t| {
            let f = &fleets[r];
            let energy: f64 = f.plants.iter().map(|p| p.capacity * p.cf[t]).sum();
            round6((energy / f.total_capacity()).clamp(0.0, 1.0))
        });
        attributes.push(attr(tech, MAX_OPERATION_RATE, Table::Regional2dTime(rate)));
        attributes.push(attr(tech, MAX_CAPACITY, Table::Regional1d(capacity)));
        let invest =
            cost.iter().map(|c| round6(if tech == WIND { 1100.0 + 300.0 * c } else { 500.0 + 150.0 * c })).collect();
        attributes.push(attr(tech, "Investment per capacity", Table::Regional1d(invest)));
        let opex = cost.iter().map(|c| round6(if tech == WIND { 20.0 + 5.0 * c } else { 10.0 + 3.0 * c })).collect();
        attributes.push(attr(tech, "Opex per capacity", Table::Regional1d(opex)));
        let eligible = (0..n).map(|_| if rng.gen_bool(0.9) { 1.0 } else { 0.0 }).collect();
        let mut elig = attr(tech, "Locational eligibility", Table::Regional1d(eligible));
        elig.spec = elig.spec.boolean();
        attributes.push(elig);
    }
    let demand = Matrix::from_fn(n, steps, |r, t| {
        let daily = 1.0 + 0.3 * (2.0 * PI * ((t % 24) as f64 - 14.0) / 24.0).cos();
        round6((50.0 + 450.0 * population[r]) * daily * (1.0 + 0.05 * weather[t]))
    });
    attributes.push(attr(DEMAND, "Fixed operation rate", Table::Regional2dTime(demand)));

    let length = |a: usize, b: usize| {
        let (dx, dy) = (centres[a].0 - centres[b].0, centres[a].1 - centres[b].1);
        100.0 * (dx * dx + dy * dy).sqrt()
    };
    let conn = |f: &dyn Fn(usize, usize) -> f64| {
        Table::Connection2d(Matrix::from_fn(
            n,
            n,
            |a, b| if adjacency.is_adjacent(a, b) { round6(f(a, b)) } else { 0.0 },
        ))
    };
    attributes.push(attr(LINES, "Distances", conn(&|a, b| length(a, b))));
    attributes.push(attr(LINES, "Losses", conn(&|a, b| 3e-5 * length(a, b))));
    attributes.push(attr(LINES, "Reactances", conn(&|a, b| 0.004 * length(a, b))));

    let technologies = vec![
        Technology { name: WIND.into(), fleet_dir: "fleets/wind_turbine".into(), fleets: wind_fleets },
        Technology { name: PV.into(), fleet_dir: "fleets/photovoltaic".into(), fleets: pv_fleets },
    ];
    let dataset = Dataset::new(regions, TimeHorizon::new(steps)?, attributes, technologies)?;
    Ok(Instance { dataset, geometry })
}

fn attr(component: &str, name: &str, table: Table<f64>) -> Attribute<f64> {
    let dim = table.dimension();
    let rule = standard_rule(name).expect("generator only uses standard attribute names");
    Attribute { spec: AttributeSpec::new(component, name, dim).with_rule(rule), table }
}
