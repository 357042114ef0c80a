//! Pairwise region distance over all normalized attributes.
//!
//! The distance between two regions is the sum of three residual sums of
//! squares: over 1-d regional attributes, over time-indexed regional
//! attributes, and over connection attributes (where a strong link means a
//! short distance, `(1 - link)^2`). Each attribute's terms are scaled by its
//! grouping weight. Accumulation order is fixed (manifest order, ascending
//! time) and compensated, so results are reproducible bit for bit.

use rayon::prelude::*;

use crate::dataset::{NormalizedDataset, RegionSet, Table};
use crate::matrix::Matrix;
use crate::scalar::{CompensatedSum, Scalar};

/// Symmetric, nonnegative, zero-diagonal distance matrix in region order.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix<S> {
    m: Matrix<S>,
}

impl<S: Scalar> DistanceMatrix<S> {
    /// Symmetrises from the upper triangle and zeroes the diagonal.
    /// Panics on a non-square, negative or non-finite input.
    pub fn from_matrix(m: Matrix<S>) -> Self {
        assert_eq!(m.rows(), m.cols(), "distance matrix must be square");
        let n = m.rows();
        let out = Matrix::from_fn(n, n, |a, b| match a.cmp(&b) {
            std::cmp::Ordering::Equal => S::zero(),
            std::cmp::Ordering::Less => m[(a, b)],
            std::cmp::Ordering::Greater => m[(b, a)],
        });
        assert!(out.iter().all(|v| v.is_finite() && *v >= S::zero()), "distances must be finite and nonnegative");
        Self { m: out }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        Self::from_matrix(Matrix::from_fn(n, n, |a, b| if a < b { f(a, b) } else { S::zero() }))
    }

    pub fn len(&self) -> usize {
        self.m.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.m.rows() == 0
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> S {
        self.m[(a, b)]
    }

    pub fn row(&self, a: usize) -> &[S] {
        self.m.row(a)
    }

    pub fn matrix(&self) -> &Matrix<S> {
        &self.m
    }

    /// `distances.csv`: upper triangle, 17 significant digits.
    pub fn to_csv(&self, regions: &RegionSet) -> String {
        let mut rows = Vec::new();
        for a in 0..self.len() {
            for b in a + 1..self.len() {
                rows.push(vec![
                    regions.id(a).to_string(),
                    regions.id(b).to_string(),
                    format!("{:.16e}", self.get(a, b).as_f64()),
                ]);
            }
        }
        crate::dataset::format_csv(&["region_a", "region_b", "distance"], &rows)
    }
}

/// Weighted squared differences over 1-d regional attributes.
pub fn regional_1d_distance<S: Scalar>(nd: &NormalizedDataset<S>, a: usize, b: usize) -> S {
    let mut acc = CompensatedSum::new();
    for attr in &nd.attributes {
        let Table::Regional1d(v) = &attr.table else { continue };
        if attr.spec.grouping_weight == 0.0 {
            continue;
        }
        let d = v[a] - v[b];
        acc.add(S::of(attr.spec.grouping_weight) * d * d);
    }
    acc.value()
}

/// Weighted squared differences over every time step of 2-d regional
/// attributes.
pub fn regional_2d_distance<S: Scalar>(nd: &NormalizedDataset<S>, a: usize, b: usize) -> S {
    let mut acc = CompensatedSum::new();
    for attr in &nd.attributes {
        let Table::Regional2dTime(m) = &attr.table else { continue };
        if attr.spec.grouping_weight == 0.0 {
            continue;
        }
        let mut inner = CompensatedSum::new();
        for (&x, &y) in m.row(a).iter().zip(m.row(b)) {
            let d = x - y;
            inner.add(d * d);
        }
        acc.add(S::of(attr.spec.grouping_weight) * inner.value());
    }
    acc.value()
}

/// Weighted `(1 - link)^2` over connection attributes, with the link taken
/// as the mean of both directions. Zero for `a == b`.
pub fn connection_2d_distance<S: Scalar>(nd: &NormalizedDataset<S>, a: usize, b: usize) -> S {
    if a == b {
        return S::zero();
    }
    let half = S::of(0.5);
    let mut acc = CompensatedSum::new();
    for attr in &nd.attributes {
        let Table::Connection2d(m) = &attr.table else { continue };
        if attr.spec.grouping_weight == 0.0 {
            continue;
        }
        let link = (m[(a, b)] + m[(b, a)]) * half;
        let d = S::one() - link;
        acc.add(S::of(attr.spec.grouping_weight) * d * d);
    }
    acc.value()
}

/// Full distance for one pair: the sum of the three parts.
pub fn pair_distance<S: Scalar>(nd: &NormalizedDataset<S>, a: usize, b: usize) -> S {
    if a == b {
        return S::zero();
    }
    regional_1d_distance(nd, a, b) + regional_2d_distance(nd, a, b) + connection_2d_distance(nd, a, b)
}

/// All pairwise distances. Pairs are evaluated in parallel; each pair's
/// reduction order is fixed, so output is identical to a sequential run.
pub fn pairwise_distances<S: Scalar>(nd: &NormalizedDataset<S>) -> DistanceMatrix<S> {
    let n = nd.n_regions();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let values: Vec<S> = pairs.par_iter().map(|&(a, b)| pair_distance(nd, a, b)).collect();
    let mut m = Matrix::filled(n, n, S::zero());
    for (&(a, b), &v) in pairs.iter().zip(&values) {
        m[(a, b)] = v;
        m[(b, a)] = v;
    }
    DistanceMatrix { m }
}
