//! Exact assignment model: branch and bound over medoid subsets, with a
//! depth-first assignment search that respects every separator cut.

use super::{
    assignment_objective, violated_cuts, CutRound, Grouping, SeparatorCut, SolveError, SolveTrace, SolverConfig,
};
use crate::connectivity::ConnectivityMatrix;
use crate::distance::DistanceMatrix;
use crate::scalar::Scalar;

const UNASSIGNED: usize = usize::MAX;
/// Medoid subsets are materialised and sorted, so their count is capped.
const MAX_SUBSETS: u64 = 4_000_000;

pub(super) fn solve<S: Scalar>(
    d: &DistanceMatrix<S>,
    c: &ConnectivityMatrix,
    cfg: &SolverConfig,
) -> Result<(Grouping<S>, SolveTrace), SolveError<S>> {
    let mut cuts: Vec<SeparatorCut> = Vec::new();
    let mut trace = SolveTrace::default();
    let mut nodes = 0u64;
    let max_rounds = cfg.max_cut_rounds.max(1);
    let mut last = None;
    for round in 1..=max_rounds {
        let assignment = master(d, cfg.k, &cuts, cfg.exact_node_limit, &mut nodes)?;
        let (new_cuts, fragments) = if cfg.contiguity { violated_cuts(&assignment, c) } else { (Vec::new(), 0) };
        if new_cuts.is_empty() {
            let mut g = Grouping::from_assignment(d, assignment);
            g.cuts_added = cuts.len();
            g.rounds = round;
            log::debug!("exact solve: {round} rounds, {} cuts, {nodes} nodes", cuts.len());
            return Ok((g, trace));
        }
        log::debug!("round {round}: {fragments} fragments, adding {} cuts", new_cuts.len());
        debug_assert!(new_cuts.iter().all(|cut| !cuts.contains(cut)));
        trace.rounds.push(CutRound { incumbent: assignment.clone(), cuts: new_cuts.clone() });
        cuts.extend(new_cuts);
        last = Some((assignment, fragments));
    }
    let (assignment, violations) = last.expect("at least one round ran");
    let mut incumbent = Grouping::from_assignment(d, assignment);
    incumbent.cuts_added = cuts.len();
    incumbent.rounds = max_rounds;
    Err(SolveError::CutLimit { rounds: max_rounds, violations, incumbent: Box::new(incumbent) })
}

/// Optimal assignment (region -> medoid) subject to `cuts`.
fn master<S: Scalar>(
    d: &DistanceMatrix<S>,
    k: usize,
    cuts: &[SeparatorCut],
    limit: u64,
    nodes: &mut u64,
) -> Result<Vec<usize>, SolveError<S>> {
    let n = d.len();
    let count = binomial(n, k);
    if count > MAX_SUBSETS || count > limit.saturating_sub(*nodes) {
        return Err(SolveError::NodeLimit { limit });
    }

    // Medoid subsets in ascending order of their unconstrained cost, which
    // is a lower bound on any cut-respecting assignment to them.
    let mut subsets: Vec<(S, Vec<usize>)> = Vec::new();
    let mut set: Vec<usize> = (0..k).collect();
    loop {
        let lb = (0..n).map(|i| set.iter().map(|&m| d.get(i, m)).fold(S::infinity(), S::min)).sum::<S>();
        subsets.push((lb, set.clone()));
        if !next_combination(&mut set, n) {
            break;
        }
    }
    subsets.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances"));

    let mut search = Search { d, limit, nodes, best_val: S::infinity(), best: None, tol: S::epsilon().sqrt() };
    for (lb, medoids) in &subsets {
        if lb > &search.bound() {
            break;
        }
        *search.nodes += 1;
        search.assign(medoids, cuts)?;
    }
    search.best.ok_or(SolveError::Infeasible { k, components: 0 })
}

struct Search<'a, S> {
    d: &'a DistanceMatrix<S>,
    limit: u64,
    nodes: &'a mut u64,
    best_val: S,
    best: Option<Vec<usize>>,
    tol: S,
}

struct Frame<'c, S> {
    order: Vec<usize>,
    candidates: Vec<Vec<usize>>,
    /// `suffix[p]`: sum of nearest-medoid distances of `order[p..]`.
    suffix: Vec<S>,
    watch: Vec<Vec<&'c SeparatorCut>>,
    assignment: Vec<usize>,
}

impl<S: Scalar> Search<'_, S> {
    /// Pruning threshold: slightly above the incumbent so near-ties reach
    /// the canonical objective comparison at the leaves.
    fn bound(&self) -> S {
        self.best_val + self.tol * self.best_val.abs().max(S::one())
    }

    fn assign<'c>(&mut self, medoids: &[usize], cuts: &'c [SeparatorCut]) -> Result<(), SolveError<S>> {
        let n = self.d.len();
        let mut assignment = vec![UNASSIGNED; n];
        for &m in medoids {
            assignment[m] = m;
        }
        let is_medoid = |r: usize| assignment[r] == r;
        let order: Vec<usize> = (0..n).filter(|&r| !is_medoid(r)).collect();
        let candidates: Vec<Vec<usize>> = order
            .iter()
            .map(|&r| {
                let mut c = medoids.to_vec();
                c.sort_by(|&a, &b| self.d.get(r, a).partial_cmp(&self.d.get(r, b)).unwrap().then(a.cmp(&b)));
                c
            })
            .collect();
        let mut suffix = vec![S::zero(); order.len() + 1];
        for p in (0..order.len()).rev() {
            suffix[p] = suffix[p + 1] + self.d.get(order[p], candidates[p][0]);
        }
        // Cuts that can bind: medoid open, region not a medoid.
        let mut watch: Vec<Vec<&SeparatorCut>> = vec![Vec::new(); n];
        for cut in cuts {
            if !is_medoid(cut.medoid) || is_medoid(cut.region) {
                continue;
            }
            watch[cut.region].push(cut);
            for &s in &cut.separator {
                if !is_medoid(s) {
                    watch[s].push(cut);
                }
            }
        }
        let mut frame = Frame { order, candidates, suffix, watch, assignment };
        self.dfs(&mut frame, 0, S::zero())
    }

    fn dfs(&mut self, f: &mut Frame<'_, S>, pos: usize, cost: S) -> Result<(), SolveError<S>> {
        *self.nodes += 1;
        if *self.nodes > self.limit {
            return Err(SolveError::NodeLimit { limit: self.limit });
        }
        if pos == f.order.len() {
            let val = assignment_objective(self.d, &f.assignment);
            if val < self.best_val {
                self.best_val = val;
                self.best = Some(f.assignment.clone());
            }
            return Ok(());
        }
        let r = f.order[pos];
        for ci in 0..f.candidates[pos].len() {
            let m = f.candidates[pos][ci];
            let next = cost + self.d.get(r, m);
            if next + f.suffix[pos + 1] > self.bound() {
                break;
            }
            f.assignment[r] = m;
            if !f.watch[r].iter().any(|cut| violated(cut, &f.assignment)) {
                self.dfs(f, pos + 1, next)?;
            }
        }
        f.assignment[r] = UNASSIGNED;
        Ok(())
    }
}

/// Violated once the region sits with the medoid and every separator
/// region is placed elsewhere.
fn violated(cut: &SeparatorCut, assignment: &[usize]) -> bool {
    assignment[cut.region] == cut.medoid
        && cut.separator.iter().all(|&s| assignment[s] != UNASSIGNED && assignment[s] != cut.medoid)
}

fn next_combination(set: &mut [usize], n: usize) -> bool {
    let k = set.len();
    for i in (0..k).rev() {
        if set[i] < n - k + i {
            set[i] += 1;
            for j in i + 1..k {
                set[j] = set[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}
