//! Heuristic for larger instances.
//!
//! Each restart seeds medoids by farthest-point selection, improves them
//! with best-improvement medoid swaps, then runs the cut loop with a greedy
//! cut-respecting assignment. Fragments the greedy loop cannot resolve are
//! merged into an adjacent group, and a boundary pass moves single regions
//! between neighbouring groups while that lowers the objective. The best
//! restart wins; all randomness comes from the configured seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{one_median, violated_cuts, CutRound, Grouping, SeparatorCut, SolveError, SolveTrace, SolverConfig};
use crate::connectivity::{components, ConnectivityMatrix};
use crate::distance::DistanceMatrix;
use crate::scalar::Scalar;

const MAX_SWAP_PASSES: usize = 200;
const MAX_BOUNDARY_PASSES: usize = 100;

pub(super) fn solve<S: Scalar>(
    d: &DistanceMatrix<S>,
    c: &ConnectivityMatrix,
    cfg: &SolverConfig,
) -> Result<(Grouping<S>, SolveTrace), SolveError<S>> {
    let n = d.len();
    let all: Vec<usize> = (0..n).collect();
    let graph_components = if cfg.contiguity { c.graph_components() } else { vec![all.clone()] };
    let mut comp_of = vec![0; n];
    for (ci, comp) in graph_components.iter().enumerate() {
        for &r in comp {
            comp_of[r] = ci;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(Grouping<S>, SolveTrace)> = None;
    for restart in 0..cfg.restarts.max(1) {
        let first = if restart == 0 { one_median(d, &all) } else { rng.gen_range(0..n) };
        let seeds = seed(d, first, cfg.k, &graph_components);
        let medoids = swap_search(d, seeds, &comp_of);
        let (g, trace) = if cfg.contiguity {
            contiguous(d, c, medoids, cfg.max_cut_rounds.clamp(1, 2 * n))
        } else {
            let mut g = Grouping::from_assignment(d, nearest_assignment(d, &medoids));
            g.rounds = 1;
            (g, SolveTrace::default())
        };
        log::debug!("restart {restart}: objective {}", g.objective);
        if best.as_ref().map_or(true, |(b, _)| g.objective < b.objective) {
            best = Some((g, trace));
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Farthest-point seeding from `first`, after giving every graph component
/// its own medoid.
fn seed<S: Scalar>(d: &DistanceMatrix<S>, first: usize, k: usize, graph_components: &[Vec<usize>]) -> Vec<usize> {
    let mut medoids = vec![first];
    for comp in graph_components {
        if !comp.iter().any(|r| medoids.contains(r)) {
            medoids.push(one_median(d, comp));
        }
    }
    let n = d.len();
    let mut min_dist: Vec<S> =
        (0..n).map(|r| medoids.iter().map(|&m| d.get(r, m)).fold(S::infinity(), S::min)).collect();
    while medoids.len() < k {
        let mut pick = None;
        for r in 0..n {
            if medoids.contains(&r) {
                continue;
            }
            if pick.map_or(true, |p: usize| min_dist[r] > min_dist[p]) {
                pick = Some(r);
            }
        }
        let p = pick.expect("k <= n");
        medoids.push(p);
        for r in 0..n {
            min_dist[r] = min_dist[r].min(d.get(r, p));
        }
    }
    medoids.sort_unstable();
    medoids
}

/// Best-improvement medoid swaps under nearest-medoid assignment. A swap
/// may not leave a graph component without a medoid.
fn swap_search<S: Scalar>(d: &DistanceMatrix<S>, mut medoids: Vec<usize>, comp_of: &[usize]) -> Vec<usize> {
    let n = d.len();
    for _ in 0..MAX_SWAP_PASSES {
        let (d1, n1, d2) = nearest_two(d, &medoids);
        let current: S = d1.iter().copied().sum();
        let tol = S::epsilon() * S::of(16.0) * current.max(S::one());
        let mut best_delta = -tol;
        let mut best_swap = None;
        for (mi, &m) in medoids.iter().enumerate() {
            let sole = medoids.iter().filter(|&&o| comp_of[o] == comp_of[m]).count() == 1;
            for h in 0..n {
                if medoids.contains(&h) || (sole && comp_of[h] != comp_of[m]) {
                    continue;
                }
                let mut delta = S::zero();
                for i in 0..n {
                    let dh = d.get(i, h);
                    let new = if n1[i] == m { d2[i].min(dh) } else { d1[i].min(dh) };
                    delta = delta + (new - d1[i]);
                }
                if delta < best_delta {
                    best_delta = delta;
                    best_swap = Some((mi, h));
                }
            }
        }
        let Some((mi, h)) = best_swap else { break };
        medoids[mi] = h;
        medoids.sort_unstable();
    }
    medoids
}

/// Nearest and second-nearest medoid distance per region.
fn nearest_two<S: Scalar>(d: &DistanceMatrix<S>, medoids: &[usize]) -> (Vec<S>, Vec<usize>, Vec<S>) {
    let n = d.len();
    let mut d1 = vec![S::infinity(); n];
    let mut n1 = vec![usize::MAX; n];
    let mut d2 = vec![S::infinity(); n];
    for i in 0..n {
        for &m in medoids {
            let v = d.get(i, m);
            if v < d1[i] {
                d2[i] = d1[i];
                d1[i] = v;
                n1[i] = m;
            } else if v < d2[i] {
                d2[i] = v;
            }
        }
    }
    (d1, n1, d2)
}

/// Each region to its nearest medoid; ties go to the smaller medoid.
fn nearest_assignment<S: Scalar>(d: &DistanceMatrix<S>, medoids: &[usize]) -> Vec<usize> {
    (0..d.len())
        .map(|i| {
            if medoids.contains(&i) {
                return i;
            }
            let mut best = medoids[0];
            for &m in &medoids[1..] {
                if d.get(i, m) < d.get(i, best) {
                    best = m;
                }
            }
            best
        })
        .collect()
}

fn contiguous<S: Scalar>(
    d: &DistanceMatrix<S>,
    c: &ConnectivityMatrix,
    medoids: Vec<usize>,
    max_rounds: usize,
) -> (Grouping<S>, SolveTrace) {
    let mut cuts: Vec<SeparatorCut> = Vec::new();
    let mut trace = SolveTrace::default();
    let mut assignment = Vec::new();
    let mut rounds = 0;
    for round in 1..=max_rounds {
        rounds = round;
        assignment = cut_respecting_assignment(d, &medoids, &cuts);
        let (mut new_cuts, _) = violated_cuts(&assignment, c);
        new_cuts.retain(|cut| !cuts.contains(cut));
        if new_cuts.is_empty() {
            break;
        }
        trace.rounds.push(CutRound { incumbent: assignment.clone(), cuts: new_cuts.clone() });
        cuts.extend(new_cuts);
    }
    let (_, fragments) = violated_cuts(&assignment, c);
    if fragments > 0 {
        log::debug!("repairing {fragments} fragments after {rounds} cut rounds");
        repair(d, c, &mut assignment);
    }
    assignment = recentre(d, &assignment);
    boundary_moves(d, c, &mut assignment);
    let mut g = Grouping::from_assignment(d, assignment);
    g.cuts_added = cuts.len();
    g.rounds = rounds;
    (g, trace)
}

/// Nearest-medoid assignment, then for every violated cut the region is
/// barred from that medoid and sent to its next nearest one.
fn cut_respecting_assignment<S: Scalar>(d: &DistanceMatrix<S>, medoids: &[usize], cuts: &[SeparatorCut]) -> Vec<usize> {
    let n = d.len();
    let mut assignment = nearest_assignment(d, medoids);
    let mut barred = vec![Vec::<usize>::new(); n];
    while let Some(cut) = cuts.iter().find(|cut| cut.is_violated_by(&assignment)) {
        barred[cut.region].push(cut.medoid);
        let next =
            medoids.iter().copied().filter(|m| !barred[cut.region].contains(m)).fold(None, |best: Option<usize>, m| {
                match best {
                    Some(b) if d.get(cut.region, b) <= d.get(cut.region, m) => Some(b),
                    _ => Some(m),
                }
            });
        match next {
            Some(m) => assignment[cut.region] = m,
            None => break,
        }
    }
    assignment
}

/// Moves every fragment (a group piece without its medoid) into an
/// adjacent group's medoid-holding piece, cheapest first, until all groups
/// are connected.
fn repair<S: Scalar>(d: &DistanceMatrix<S>, c: &ConnectivityMatrix, assignment: &mut [usize]) {
    let n = assignment.len();
    loop {
        let mut main_of = vec![None; n];
        let mut fragments = Vec::new();
        let mut medoids: Vec<usize> = (0..n).filter(|&r| assignment[r] == r).collect();
        medoids.sort_unstable();
        for &m in &medoids {
            let members: Vec<usize> = (0..n).filter(|&r| assignment[r] == m).collect();
            for comp in components(&members, c) {
                if comp.binary_search(&m).is_ok() {
                    for &r in &comp {
                        main_of[r] = Some(m);
                    }
                } else {
                    fragments.push((m, comp));
                }
            }
        }
        if fragments.is_empty() {
            return;
        }
        let mut best: Option<(S, usize, usize)> = None;
        for (fi, (cur, frag)) in fragments.iter().enumerate() {
            let mut targets: Vec<usize> = frag
                .iter()
                .flat_map(|&f| c.neighbors(f).iter().filter_map(|&v| main_of[v]))
                .filter(|g| g != cur)
                .collect();
            targets.sort_unstable();
            targets.dedup();
            for g in targets {
                let cost: S = frag.iter().map(|&f| d.get(f, g) - d.get(f, *cur)).sum();
                if best.map_or(true, |(b, _, _)| cost < b) {
                    best = Some((cost, fi, g));
                }
            }
        }
        let (_, fi, g) = best.expect("some fragment borders another group");
        for &f in &fragments[fi].1 {
            assignment[f] = g;
        }
    }
}

/// Re-picks every group's medoid as its 1-median.
fn recentre<S: Scalar>(d: &DistanceMatrix<S>, assignment: &[usize]) -> Vec<usize> {
    let n = assignment.len();
    let mut out = assignment.to_vec();
    let mut medoids: Vec<usize> = (0..n).filter(|&r| assignment[r] == r).collect();
    medoids.sort_unstable();
    for m in medoids {
        let members: Vec<usize> = (0..n).filter(|&r| assignment[r] == m).collect();
        let centre = one_median(d, &members);
        for &r in &members {
            out[r] = centre;
        }
    }
    out
}

/// Moves single regions into a neighbouring group when that is cheaper and
/// the group left behind stays connected.
fn boundary_moves<S: Scalar>(d: &DistanceMatrix<S>, c: &ConnectivityMatrix, assignment: &mut Vec<usize>) {
    let n = assignment.len();
    for _ in 0..MAX_BOUNDARY_PASSES {
        let mut moved = false;
        for r in 0..n {
            let cur = assignment[r];
            if cur == r {
                continue;
            }
            let here = d.get(r, cur);
            let mut target: Option<usize> = None;
            for &v in c.neighbors(r) {
                let g = assignment[v];
                if g == cur {
                    continue;
                }
                let better = d.get(r, g) < target.map_or(here, |t| d.get(r, t));
                if better || (target.is_some_and(|t| d.get(r, g) == d.get(r, t) && g < t)) {
                    target = Some(g);
                }
            }
            let Some(g) = target else { continue };
            let rest: Vec<usize> = (0..n).filter(|&i| i != r && assignment[i] == cur).collect();
            if components(&rest, c).len() != 1 {
                continue;
            }
            assignment[r] = g;
            moved = true;
        }
        let recentred = recentre(d, assignment);
        *assignment = recentred;
        if !moved {
            break;
        }
    }
}
