use super::{one_median, Grouping, SolveError};
use crate::connectivity::{components, ConnectivityMatrix};
use crate::distance::DistanceMatrix;
use crate::scalar::Scalar;

pub const BRUTE_FORCE_MAX_REGIONS: usize = 10;

/// Optimal grouping by enumerating every partition into `k` blocks.
///
/// Each block's medoid is its 1-median. With `contiguity`, blocks that are
/// not connected are skipped. Ties on the objective go to the
/// lexicographically smallest medoid set.
pub fn brute_force<S: Scalar>(
    d: &DistanceMatrix<S>,
    c: &ConnectivityMatrix,
    k: usize,
    contiguity: bool,
) -> Result<Grouping<S>, SolveError<S>> {
    let n = d.len();
    if n > BRUTE_FORCE_MAX_REGIONS {
        return Err(SolveError::TooLarge { n, max: BRUTE_FORCE_MAX_REGIONS });
    }
    if k == 0 || k > n {
        return Err(SolveError::InvalidK { k, n });
    }
    let mut best: Option<Grouping<S>> = None;
    // Restricted growth string: labels[0] = 0, labels[i] <= 1 + max(labels[..i]).
    let mut labels = vec![0usize; n];
    loop {
        let blocks = labels.iter().max().map_or(0, |m| m + 1);
        if blocks == k {
            if let Some(g) = evaluate(d, c, &labels, k, contiguity) {
                let better = match &best {
                    None => true,
                    Some(b) => g.objective < b.objective || (g.objective == b.objective && g.medoids < b.medoids),
                };
                if better {
                    best = Some(g);
                }
            }
        }
        if !next_growth_string(&mut labels, k) {
            break;
        }
    }
    best.ok_or(SolveError::Infeasible { k, components: c.graph_components().len() })
}

fn evaluate<S: Scalar>(
    d: &DistanceMatrix<S>,
    c: &ConnectivityMatrix,
    labels: &[usize],
    k: usize,
    contiguity: bool,
) -> Option<Grouping<S>> {
    let mut assignment = vec![0; labels.len()];
    for b in 0..k {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == b).collect();
        if contiguity && components(&members, c).len() != 1 {
            return None;
        }
        let m = one_median(d, &members);
        for &i in &members {
            assignment[i] = m;
        }
    }
    Some(Grouping::from_assignment(d, assignment))
}

/// Advances to the next restricted growth string with at most `k` blocks.
fn next_growth_string(labels: &mut [usize], k: usize) -> bool {
    let n = labels.len();
    for i in (1..n).rev() {
        let prefix_max = labels[..i].iter().copied().max().unwrap_or(0);
        if labels[i] <= prefix_max && labels[i] + 1 < k {
            labels[i] += 1;
            for l in labels[i + 1..].iter_mut() {
                *l = 0;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_partitions() {
        // Stirling numbers of the second kind: S(5, 2) = 15, S(5, 3) = 25.
        for (k, expected) in [(1, 1), (2, 15), (3, 25), (5, 1)] {
            let mut labels = vec![0; 5];
            let mut count = 0;
            loop {
                if labels.iter().max().unwrap() + 1 == k {
                    count += 1;
                }
                if !next_growth_string(&mut labels, k) {
                    break;
                }
            }
            assert_eq!(count, expected, "k = {k}");
        }
    }

    #[test]
    fn path_with_two_pairs() {
        // a-b-c-d where a,b and c,d are close: contiguous optimum {a,b},{c,d}.
        let v: [f64; 4] = [0.0, 0.1, 5.0, 5.1];
        let d = DistanceMatrix::from_fn(4, |a, b| (v[a] - v[b]).abs());
        let c = ConnectivityMatrix::from_pairs(4, [(0, 1), (1, 2), (2, 3)]);
        let g = brute_force(&d, &c, 2, true).unwrap();
        assert_eq!(g.assignment, vec![0, 0, 2, 2]);
    }

    #[test]
    fn contiguity_changes_the_optimum() {
        // Path 0-1-2 where 0 and 2 are similar: without contiguity they pair.
        let v: [f64; 3] = [0.0, 10.0, 0.5];
        let d = DistanceMatrix::from_fn(3, |a, b| (v[a] - v[b]).abs());
        let c = ConnectivityMatrix::from_pairs(3, [(0, 1), (1, 2)]);
        let free = brute_force(&d, &c, 2, false).unwrap();
        assert_eq!(free.assignment, vec![0, 1, 0]);
        let contiguous = brute_force(&d, &c, 2, true).unwrap();
        assert_eq!(contiguous.disconnected_groups(&c), 0);
        assert!(contiguous.objective > free.objective);
    }
}
