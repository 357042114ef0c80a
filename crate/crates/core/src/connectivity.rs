//! Region adjacency: which region pairs may share a group.
//!
//! Two regions are adjacent when their borders touch, when one is an island
//! and the other its nearest mainland region, or when an explicit
//! transmission link joins them.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::RegionSet;
use crate::scalar::Scalar;

/// Coordinates closer than this are the same point.
pub const TOUCH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ConnectivityError {
    #[error("{source_name}: unknown region {region:?}")]
    UnknownRegion { source_name: String, region: String },
    #[error("no geometry for region {region:?}")]
    MissingGeometry { region: String },
    #[error("region {region:?}: ring with fewer than 3 vertices")]
    DegenerateRing { region: String },
    #[error("island {region:?} has no mainland region to attach to")]
    IslandWithoutMainland { region: String },
    #[error("no connectivity source: expected geometry.json or adjacency.csv in {}", .dir.display())]
    NoSource { dir: PathBuf },
    #[error("i/o error on {}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed geometry {}: {source}", .path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("malformed pair list {}: {message}", .path.display())]
    PairList { path: PathBuf, message: String },
}

pub type Result<T, E = ConnectivityError> = std::result::Result<T, E>;

/// Outline of one region: one or more implicitly closed rings.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionGeometry<S> {
    pub rings: Vec<Vec<[S; 2]>>,
    pub island: bool,
}

/// Geometry for every region, in region order.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometrySet<S> {
    pub regions: Vec<RegionGeometry<S>>,
}

/// Symmetric boolean adjacency over the region order, diagonal false.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConnectivityMatrix {
    n: usize,
    adj: Vec<bool>,
    neighbors: Vec<Vec<usize>>,
}

impl ConnectivityMatrix {
    pub fn empty(n: usize) -> Self {
        Self { n, adj: vec![false; n * n], neighbors: vec![Vec::new(); n] }
    }

    /// Every pair adjacent.
    pub fn complete(n: usize) -> Self {
        let mut c = Self::empty(n);
        for a in 0..n {
            for b in a + 1..n {
                c.connect(a, b);
            }
        }
        c
    }

    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut c = Self::empty(n);
        for (a, b) in pairs {
            c.connect(a, b);
        }
        c
    }

    /// 4-neighbour grid, regions numbered row-major.
    pub fn grid(rows: usize, cols: usize) -> Self {
        let mut c = Self::empty(rows * cols);
        for r in 0..rows {
            for col in 0..cols {
                let i = r * cols + col;
                if col + 1 < cols {
                    c.connect(i, i + 1);
                }
                if r + 1 < rows {
                    c.connect(i, i + cols);
                }
            }
        }
        c
    }

    /// Self-pairs are ignored.
    pub fn connect(&mut self, a: usize, b: usize) {
        if a == b || self.adj[a * self.n + b] {
            return;
        }
        self.adj[a * self.n + b] = true;
        self.adj[b * self.n + a] = true;
        insert_sorted(&mut self.neighbors[a], b);
        insert_sorted(&mut self.neighbors[b], a);
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.adj[a * self.n + b]
    }

    /// Ascending neighbour indices.
    pub fn neighbors(&self, a: usize) -> &[usize] {
        &self.neighbors[a]
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Connected components of the whole graph.
    pub fn graph_components(&self) -> Vec<Vec<usize>> {
        components(&(0..self.n).collect::<Vec<_>>(), self)
    }

    /// OR of two matrices over the same region set.
    pub fn union(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut c = self.clone();
        for a in 0..self.n {
            for &b in other.neighbors(a) {
                c.connect(a, b);
            }
        }
        c
    }
}

fn insert_sorted(v: &mut Vec<usize>, x: usize) {
    if let Err(pos) = v.binary_search(&x) {
        v.insert(pos, x);
    }
}

/// Connected components of the subgraph induced by `members`.
///
/// Each component is sorted ascending and components are ordered by their
/// first element. Duplicate members are ignored.
pub fn components(members: &[usize], c: &ConnectivityMatrix) -> Vec<Vec<usize>> {
    let mut in_set = vec![false; c.len()];
    for &m in members {
        in_set[m] = true;
    }
    let mut sorted: Vec<usize> = members.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let mut seen = vec![false; c.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for &start in &sorted {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(u) = queue.pop_front() {
            comp.push(u);
            for &v in c.neighbors(u) {
                if in_set[v] && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// True when `from` can reach `to` without stepping on a `blocked` region.
pub fn reachable_avoiding(c: &ConnectivityMatrix, from: usize, to: usize, blocked: &[bool]) -> bool {
    if blocked[from] || blocked[to] {
        return false;
    }
    let mut seen = vec![false; c.len()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(u) = stack.pop() {
        if u == to {
            return true;
        }
        for &v in c.neighbors(u) {
            if !seen[v] && !blocked[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    false
}

/// Builds adjacency from border contact, island attachment and explicit
/// link pairs (region indices).
pub fn build_connectivity<S: Scalar>(
    geom: &GeometrySet<S>,
    links: &[(usize, usize)],
    regions: &RegionSet,
) -> Result<ConnectivityMatrix> {
    let n = regions.len();
    if geom.regions.len() != n {
        let missing = regions.id(geom.regions.len().min(n.saturating_sub(1))).to_string();
        return Err(ConnectivityError::MissingGeometry { region: missing });
    }
    for (r, g) in geom.regions.iter().enumerate() {
        if g.rings.is_empty() || g.rings.iter().any(|ring| ring.len() < 3) {
            return Err(ConnectivityError::DegenerateRing { region: regions.id(r).to_string() });
        }
    }
    let eps = S::of(TOUCH_TOLERANCE);
    let boxes: Vec<[S; 4]> = geom.regions.iter().map(bounding_box).collect();

    let mut c = ConnectivityMatrix::empty(n);
    for a in 0..n {
        for b in a + 1..n {
            if boxes_overlap(&boxes[a], &boxes[b], eps) && borders_touch(&geom.regions[a], &geom.regions[b], eps) {
                c.connect(a, b);
            }
        }
    }

    for (i, g) in geom.regions.iter().enumerate() {
        if !g.island {
            continue;
        }
        let mut best: Option<(S, usize)> = None;
        for (j, other) in geom.regions.iter().enumerate() {
            if j == i || other.island {
                continue;
            }
            let d = min_vertex_distance(g, other);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, j));
            }
        }
        match best {
            Some((_, j)) => c.connect(i, j),
            None => return Err(ConnectivityError::IslandWithoutMainland { region: regions.id(i).to_string() }),
        }
    }

    for &(a, b) in links {
        c.connect(a, b);
    }
    Ok(c)
}

fn bounding_box<S: Scalar>(g: &RegionGeometry<S>) -> [S; 4] {
    let mut bb = [S::infinity(), S::infinity(), S::neg_infinity(), S::neg_infinity()];
    for p in g.rings.iter().flatten() {
        bb[0] = bb[0].min(p[0]);
        bb[1] = bb[1].min(p[1]);
        bb[2] = bb[2].max(p[0]);
        bb[3] = bb[3].max(p[1]);
    }
    bb
}

fn boxes_overlap<S: Scalar>(a: &[S; 4], b: &[S; 4], eps: S) -> bool {
    a[0] <= b[2] + eps && b[0] <= a[2] + eps && a[1] <= b[3] + eps && b[1] <= a[3] + eps
}

fn segments<S: Scalar>(g: &RegionGeometry<S>) -> impl Iterator<Item = ([S; 2], [S; 2])> + '_ {
    g.rings.iter().flat_map(|ring| (0..ring.len()).map(move |i| (ring[i], ring[(i + 1) % ring.len()])))
}

fn borders_touch<S: Scalar>(a: &RegionGeometry<S>, b: &RegionGeometry<S>, eps: S) -> bool {
    segments(a).any(|sa| segments(b).any(|sb| segment_distance(sa, sb) <= eps))
}

fn min_vertex_distance<S: Scalar>(a: &RegionGeometry<S>, b: &RegionGeometry<S>) -> S {
    let mut best = S::infinity();
    for p in a.rings.iter().flatten() {
        for q in b.rings.iter().flatten() {
            best = best.min(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
        }
    }
    best
}

fn cross<S: Scalar>(o: [S; 2], a: [S; 2], b: [S; 2]) -> S {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn point_segment_distance<S: Scalar>(p: [S; 2], (a, b): ([S; 2], [S; 2])) -> S {
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    let len2 = dx * dx + dy * dy;
    let t = if len2 > S::zero() {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).max(S::zero()).min(S::one())
    } else {
        S::zero()
    };
    let cx = a[0] + t * dx - p[0];
    let cy = a[1] + t * dy - p[1];
    (cx * cx + cy * cy).sqrt()
}

/// Euclidean distance between two closed segments (zero when they cross).
pub fn segment_distance<S: Scalar>(s: ([S; 2], [S; 2]), t: ([S; 2], [S; 2])) -> S {
    let d1 = cross(s.0, s.1, t.0);
    let d2 = cross(s.0, s.1, t.1);
    let d3 = cross(t.0, t.1, s.0);
    let d4 = cross(t.0, t.1, s.1);
    let z = S::zero();
    if ((d1 > z && d2 < z) || (d1 < z && d2 > z)) && ((d3 > z && d4 < z) || (d3 < z && d4 > z)) {
        return z;
    }
    point_segment_distance(s.0, t)
        .min(point_segment_distance(s.1, t))
        .min(point_segment_distance(t.0, s))
        .min(point_segment_distance(t.1, s))
}

#[derive(Serialize, Deserialize)]
struct GeometryFile {
    regions: BTreeMap<String, GeometryEntry>,
}

#[derive(Serialize, Deserialize)]
struct GeometryEntry {
    rings: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    island: bool,
}

/// Reads `geometry.json`; every region of `regions` must be present.
pub fn read_geometry<S: Scalar>(path: &Path, regions: &RegionSet) -> Result<GeometrySet<S>> {
    let text = fs::read_to_string(path).map_err(|source| ConnectivityError::Io { path: path.to_path_buf(), source })?;
    let file: GeometryFile =
        serde_json::from_str(&text).map_err(|source| ConnectivityError::Json { path: path.to_path_buf(), source })?;
    let mut out: Vec<Option<RegionGeometry<S>>> = vec![None; regions.len()];
    for (id, entry) in file.regions {
        let r = regions.position(&id).ok_or_else(|| ConnectivityError::UnknownRegion {
            source_name: path.display().to_string(),
            region: id.clone(),
        })?;
        let rings =
            entry.rings.into_iter().map(|ring| ring.into_iter().map(|[x, y]| [S::of(x), S::of(y)]).collect()).collect();
        out[r] = Some(RegionGeometry { rings, island: entry.island });
    }
    let regions_geom = out
        .into_iter()
        .enumerate()
        .map(|(r, g)| g.ok_or_else(|| ConnectivityError::MissingGeometry { region: regions.id(r).to_string() }))
        .collect::<Result<Vec<_>>>()?;
    Ok(GeometrySet { regions: regions_geom })
}

/// `geometry.json` text for `geom`, keys sorted by region id.
pub fn format_geometry<S: Scalar>(geom: &GeometrySet<S>, regions: &RegionSet) -> String {
    let file = GeometryFile {
        regions: geom
            .regions
            .iter()
            .enumerate()
            .map(|(r, g)| {
                let rings =
                    g.rings.iter().map(|ring| ring.iter().map(|p| [p[0].as_f64(), p[1].as_f64()]).collect()).collect();
                (regions.id(r).to_string(), GeometryEntry { rings, island: g.island })
            })
            .collect(),
    };
    let mut s = serde_json::to_string(&file).expect("geometry serializes");
    s.push('\n');
    s
}

/// Reads a two-column region pair list (`adjacency.csv`, `links.csv`).
/// A header line whose first field is not a region id is skipped.
pub fn read_pairs(path: &Path, regions: &RegionSet) -> Result<Vec<(usize, usize)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ConnectivityError::PairList { path: path.to_path_buf(), message: e.to_string() })?;
    let mut pairs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ConnectivityError::PairList { path: path.to_path_buf(), message: e.to_string() })?;
        if rec.len() == 0 || (rec.len() == 1 && rec[0].is_empty()) {
            continue;
        }
        if rec.len() != 2 {
            return Err(ConnectivityError::PairList {
                path: path.to_path_buf(),
                message: format!("line {}: expected 2 fields, found {}", i + 1, rec.len()),
            });
        }
        if i == 0 && &rec[0] == "region_a" && regions.position("region_a").is_none() {
            continue;
        }
        let lookup = |id: &str| {
            regions.position(id).ok_or_else(|| ConnectivityError::UnknownRegion {
                source_name: path.display().to_string(),
                region: id.to_string(),
            })
        };
        pairs.push((lookup(&rec[0])?, lookup(&rec[1])?));
    }
    Ok(pairs)
}

/// Loads the connectivity of a dataset directory from `geometry.json`
/// and/or `adjacency.csv`, plus optional `links.csv`. All present sources
/// are combined.
pub fn load_connectivity(dir: &Path, regions: &RegionSet) -> Result<ConnectivityMatrix> {
    let geometry = dir.join("geometry.json");
    let adjacency = dir.join("adjacency.csv");
    let links_path = dir.join("links.csv");
    if !geometry.exists() && !adjacency.exists() {
        return Err(ConnectivityError::NoSource { dir: dir.to_path_buf() });
    }
    let links = if links_path.exists() { read_pairs(&links_path, regions)? } else { Vec::new() };
    let mut c = if geometry.exists() {
        let geom = read_geometry::<f64>(&geometry, regions)?;
        build_connectivity(&geom, &links, regions)?
    } else {
        ConnectivityMatrix::from_pairs(regions.len(), links.iter().copied())
    };
    if adjacency.exists() {
        let pairs = read_pairs(&adjacency, regions)?;
        c = c.union(&ConnectivityMatrix::from_pairs(regions.len(), pairs));
    }
    Ok(c)
}

/// `region_a,region_b` lines for every adjacent pair, upper triangle.
pub fn format_adjacency(c: &ConnectivityMatrix, regions: &RegionSet) -> String {
    let mut rows = Vec::new();
    for a in 0..c.len() {
        for &b in c.neighbors(a) {
            if b > a {
                rows.push(vec![regions.id(a).to_string(), regions.id(b).to_string()]);
            }
        }
    }
    crate::dataset::format_csv(&["region_a", "region_b"], &rows)
}
