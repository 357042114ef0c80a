//! Contiguity-constrained k-medoids grouping of regions.
//!
//! The assignment model picks `k` medoid regions and assigns every region
//! to one medoid, minimising the summed region-to-medoid distance. With
//! contiguity on, every group must induce a connected subgraph of the
//! region adjacency graph. Contiguity is enforced lazily: the model is first
//! solved without it, each group is checked for fragments, and for every
//! fragment that does not contain its medoid a separator cut
//! `sum_{c in C} x[c][j] >= x[a][j]` is added before solving again.
//!
//! Two optimisers share that cut loop:
//! * [`Mode::Exact`]: branch and bound over medoid subsets with a
//!   cut-respecting assignment search; provably optimal, for small `n`.
//! * [`Mode::Heuristic`]: farthest-point seeding, medoid-swap local search,
//!   greedy cut-respecting assignment and a final contiguity repair.
//!
//! [`brute_force`] enumerates all partitions and serves as a test oracle.

mod brute;
mod exact;
mod heuristic;
mod report;
mod separator;

use std::collections::HashSet;

use thiserror::Error;

use crate::connectivity::{components, ConnectivityMatrix};
use crate::distance::DistanceMatrix;
use crate::scalar::{CompensatedSum, Scalar};

pub use brute::{brute_force, BRUTE_FORCE_MAX_REGIONS};
pub use report::{super_region_name, GroupReport, GroupingReport};
pub use separator::{find_separator, SeparatorError};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Mode {
    #[default]
    Exact,
    Heuristic,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(Mode::Exact),
            "heuristic" => Ok(Mode::Heuristic),
            other => Err(format!("unknown mode {other:?}, expected exact or heuristic")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolverConfig {
    /// Number of groups, `1 <= k <= n`.
    pub k: usize,
    pub contiguity: bool,
    pub mode: Mode,
    /// Drives the heuristic's randomised restarts.
    pub seed: u64,
    pub max_cut_rounds: usize,
    /// Branch-and-bound node budget of the exact mode.
    pub exact_node_limit: u64,
    /// Heuristic restarts; restart 0 is seeded from the 1-median.
    pub restarts: usize,
}

impl SolverConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            contiguity: true,
            mode: Mode::Exact,
            seed: 0,
            max_cut_rounds: 1000,
            exact_node_limit: 200_000_000,
            restarts: 4,
        }
    }

    pub fn with_contiguity(mut self, on: bool) -> Self {
        self.contiguity = on;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Contiguity cut: `sum_{c in separator} x[c][medoid] >= x[region][medoid]`.
///
/// Removing `separator` from the adjacency graph disconnects `region` from
/// `medoid`, so `region` may only join `medoid`'s group if some separator
/// region joins it too.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SeparatorCut {
    pub region: usize,
    pub medoid: usize,
    /// Sorted ascending; never contains `region` or `medoid`.
    pub separator: Vec<usize>,
}

impl SeparatorCut {
    /// Whether an assignment (region -> medoid) violates this cut.
    pub fn is_violated_by(&self, assignment: &[usize]) -> bool {
        assignment[self.region] == self.medoid && self.separator.iter().all(|&c| assignment[c] != self.medoid)
    }
}

/// A partition of the regions into `k` groups, each led by a medoid.
#[derive(Clone, Debug, PartialEq)]
pub struct Grouping<S> {
    /// Medoid of every region; medoids map to themselves.
    pub assignment: Vec<usize>,
    /// Sorted ascending.
    pub medoids: Vec<usize>,
    /// Sum of region-to-medoid distances.
    pub objective: S,
    pub cuts_added: usize,
    /// Number of assignment solves performed by the cut loop.
    pub rounds: usize,
}

impl<S: Scalar> Grouping<S> {
    /// Panics when some region points at a non-medoid.
    pub fn from_assignment(d: &DistanceMatrix<S>, assignment: Vec<usize>) -> Self {
        let mut medoids: Vec<usize> = assignment.iter().copied().collect::<HashSet<_>>().into_iter().collect();
        medoids.sort_unstable();
        for &m in &medoids {
            assert_eq!(assignment[m], m, "assignment target {m} is not its own medoid");
        }
        let objective = assignment_objective(d, &assignment);
        Self { assignment, medoids, objective, cuts_added: 0, rounds: 0 }
    }

    pub fn k(&self) -> usize {
        self.medoids.len()
    }

    /// Members of every group as (medoid, sorted members), ordered by each
    /// group's first member.
    pub fn groups(&self) -> Vec<(usize, Vec<usize>)> {
        let mut groups: Vec<(usize, Vec<usize>)> = self.medoids.iter().map(|&m| (m, Vec::new())).collect();
        for (r, &m) in self.assignment.iter().enumerate() {
            let g = self.medoids.binary_search(&m).expect("assignment target is a medoid");
            groups[g].1.push(r);
        }
        groups.sort_by_key(|(_, members)| members[0]);
        groups
    }

    /// Number of groups that do not induce a connected subgraph.
    pub fn disconnected_groups(&self, c: &ConnectivityMatrix) -> usize {
        self.groups().iter().filter(|(_, members)| components(members, c).len() != 1).count()
    }

    /// Checks the structural invariants; with `contiguity`, also that every
    /// group is connected in `c`.
    pub fn check(&self, d: &DistanceMatrix<S>, k: usize, c: Option<&ConnectivityMatrix>) -> Result<(), String> {
        if self.assignment.len() != d.len() {
            return Err("assignment does not cover every region".into());
        }
        if self.medoids.len() != k {
            return Err(format!("expected {k} medoids, found {}", self.medoids.len()));
        }
        for &m in &self.medoids {
            if self.assignment[m] != m {
                return Err(format!("medoid {m} is not assigned to itself"));
            }
        }
        for (r, &m) in self.assignment.iter().enumerate() {
            if self.medoids.binary_search(&m).is_err() {
                return Err(format!("region {r} assigned to non-medoid {m}"));
            }
        }
        if self.objective != assignment_objective(d, &self.assignment) {
            return Err("objective does not match assignment".into());
        }
        if let Some(c) = c {
            let bad = self.disconnected_groups(c);
            if bad > 0 {
                return Err(format!("{bad} disconnected groups"));
            }
        }
        Ok(())
    }
}

/// Canonical objective: compensated sum of `D(i, medoid(i))` in region
/// order. Every solver reports objectives through this function.
pub fn assignment_objective<S: Scalar>(d: &DistanceMatrix<S>, assignment: &[usize]) -> S {
    assignment.iter().enumerate().map(|(i, &m)| d.get(i, m)).collect::<CompensatedSum<S>>().value()
}

/// Cuts emitted in one round, with the incumbent that triggered them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CutRound {
    pub incumbent: Vec<usize>,
    pub cuts: Vec<SeparatorCut>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SolveTrace {
    pub rounds: Vec<CutRound>,
}

impl SolveTrace {
    pub fn cuts(&self) -> impl Iterator<Item = &SeparatorCut> {
        self.rounds.iter().flat_map(|r| r.cuts.iter())
    }
}

#[derive(Debug, Error)]
pub enum SolveError<S: Scalar> {
    #[error("k = {k} is outside 1..={n}")]
    InvalidK { k: usize, n: usize },
    #[error("distance matrix has {distances} regions but adjacency has {adjacency}")]
    SizeMismatch { distances: usize, adjacency: usize },
    #[error("infeasible: {components} disconnected graph components cannot form {k} contiguous groups")]
    Infeasible { k: usize, components: usize },
    #[error("cut-round limit of {rounds} exceeded with {violations} disconnected fragments remaining")]
    CutLimit { rounds: usize, violations: usize, incumbent: Box<Grouping<S>> },
    #[error("exact search exceeded its node limit of {limit}")]
    NodeLimit { limit: u64 },
    #[error("brute force supports at most {max} regions, got {n}")]
    TooLarge { n: usize, max: usize },
}

pub fn solve<S: Scalar>(
    d: &DistanceMatrix<S>,
    c: &ConnectivityMatrix,
    cfg: &SolverConfig,
) -> Result<Grouping<S>, SolveError<S>> {
    solve_traced(d, c, cfg).map(|(g, _)| g)
}

/// Like [`solve`], also returning every cut with its triggering incumbent.
pub fn solve_traced<S: Scalar>(
    d: &DistanceMatrix<S>,
    c: &ConnectivityMatrix,
    cfg: &SolverConfig,
) -> Result<(Grouping<S>, SolveTrace), SolveError<S>> {
    let n = d.len();
    if c.len() != n {
        return Err(SolveError::SizeMismatch { distances: n, adjacency: c.len() });
    }
    if cfg.k == 0 || cfg.k > n {
        return Err(SolveError::InvalidK { k: cfg.k, n });
    }
    if cfg.contiguity {
        let comps = c.graph_components().len();
        if comps > cfg.k {
            return Err(SolveError::Infeasible { k: cfg.k, components: comps });
        }
    }
    match cfg.mode {
        Mode::Exact => exact::solve(d, c, cfg),
        Mode::Heuristic => heuristic::solve(d, c, cfg),
    }
}

/// Separator cuts for every group fragment that does not hold its medoid:
/// one cut per (smallest fragment member, medoid) pair.
pub(crate) fn violated_cuts(assignment: &[usize], c: &ConnectivityMatrix) -> (Vec<SeparatorCut>, usize) {
    let mut medoids: Vec<usize> = assignment.iter().copied().collect::<HashSet<_>>().into_iter().collect();
    medoids.sort_unstable();
    let mut cuts = Vec::new();
    let mut fragments = 0;
    for &j in &medoids {
        let members: Vec<usize> = (0..assignment.len()).filter(|&r| assignment[r] == j).collect();
        for comp in components(&members, c) {
            if comp.binary_search(&j).is_ok() {
                continue;
            }
            fragments += 1;
            let cut = find_separator(comp[0], j, &members, c).expect("fragment is separated from its medoid");
            debug_assert!(cut.is_violated_by(assignment));
            cuts.push(cut);
        }
    }
    (cuts, fragments)
}

/// Index of the 1-median of `members`: the member minimising the summed
/// distance to all members; ties go to the smallest index.
pub(crate) fn one_median<S: Scalar>(d: &DistanceMatrix<S>, members: &[usize]) -> usize {
    let mut best = members[0];
    let mut best_cost = S::infinity();
    for &j in members {
        let cost = members.iter().map(|&i| d.get(i, j)).collect::<CompensatedSum<S>>().value();
        if cost < best_cost {
            best_cost = cost;
            best = j;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_distances(values: &[f64]) -> DistanceMatrix<f64> {
        DistanceMatrix::from_fn(values.len(), |a, b| (values[a] - values[b]).powi(2))
    }

    #[test]
    fn k_equals_n_is_identity() {
        let d = line_distances(&[0.0, 1.0, 3.0, 7.0]);
        let c = ConnectivityMatrix::from_pairs(4, [(0, 1), (1, 2), (2, 3)]);
        for mode in [Mode::Exact, Mode::Heuristic] {
            let g = solve(&d, &c, &SolverConfig::new(4).with_mode(mode)).unwrap();
            assert_eq!(g.assignment, vec![0, 1, 2, 3]);
            assert_eq!(g.objective, 0.0);
        }
    }

    #[test]
    fn k_one_picks_the_one_median() {
        let d = line_distances(&[0.0, 1.0, 2.0, 10.0]);
        let c = ConnectivityMatrix::from_pairs(4, [(0, 1), (1, 2), (2, 3)]);
        let g = solve(&d, &c, &SolverConfig::new(1)).unwrap();
        assert_eq!(g.medoids, vec![one_median(&d, &[0, 1, 2, 3])]);
        assert_eq!(g.medoids, vec![2]);
    }

    #[test]
    fn invalid_k_and_infeasible() {
        let d = line_distances(&[0.0, 1.0, 2.0]);
        let c = ConnectivityMatrix::empty(3);
        assert!(matches!(solve(&d, &c, &SolverConfig::new(0)), Err(SolveError::InvalidK { .. })));
        assert!(matches!(solve(&d, &c, &SolverConfig::new(4)), Err(SolveError::InvalidK { .. })));
        assert!(matches!(solve(&d, &c, &SolverConfig::new(2)), Err(SolveError::Infeasible { components: 3, .. })));
        // Without contiguity any k works.
        assert!(solve(&d, &c, &SolverConfig::new(2).with_contiguity(false)).is_ok());
    }

    #[test]
    fn cut_violation_semantics() {
        let cut = SeparatorCut { region: 0, medoid: 2, separator: vec![1] };
        assert!(cut.is_violated_by(&[2, 3, 2, 3]));
        assert!(!cut.is_violated_by(&[2, 2, 2, 3]));
        assert!(!cut.is_violated_by(&[3, 3, 2, 3]));
    }

    #[test]
    fn groups_are_ordered_by_first_member() {
        let d = line_distances(&[0.0, 1.0, 2.0, 3.0]);
        let g = Grouping::from_assignment(&d, vec![3, 1, 1, 3]);
        assert_eq!(g.groups(), vec![(3, vec![0, 3]), (1, vec![1, 2])]);
        assert_eq!(g.medoids, vec![1, 3]);
    }
}
