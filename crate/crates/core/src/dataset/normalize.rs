use super::{Attribute, Dataset, Table, ValueKind};
use crate::scalar::Scalar;

/// A dataset whose real-valued attributes are min-max scaled to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedDataset<S>(Dataset<S>);

impl<S: Scalar> NormalizedDataset<S> {
    pub fn dataset(&self) -> &Dataset<S> {
        &self.0
    }

    pub fn into_dataset(self) -> Dataset<S> {
        self.0
    }
}

impl<S> std::ops::Deref for NormalizedDataset<S> {
    type Target = Dataset<S>;

    fn deref(&self) -> &Dataset<S> {
        &self.0
    }
}

/// Min-max scales every real attribute over all cells of its table.
///
/// Connection tables include their (zero) diagonal in the range, so the
/// strongest link maps to 1 and "no link" to 0. Constant tables map to all
/// zeros. Boolean attributes and fleets pass through unchanged.
pub fn normalize<S: Scalar>(d: &Dataset<S>) -> NormalizedDataset<S> {
    let attributes = d
        .attributes
        .iter()
        .map(|a| Attribute { spec: a.spec.clone(), table: normalize_table(&a.table, a.spec.value_kind) })
        .collect();
    NormalizedDataset(Dataset {
        regions: d.regions.clone(),
        horizon: d.horizon,
        attributes,
        technologies: d.technologies.clone(),
    })
}

fn normalize_table<S: Scalar>(table: &Table<S>, kind: ValueKind) -> Table<S> {
    if kind == ValueKind::Boolean {
        return table.clone();
    }
    let cells = table.cells();
    let (lo, hi) = cells.iter().fold((S::infinity(), S::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    if !(span > S::zero()) || !span.is_finite() {
        return table.map(|_| S::zero());
    }
    table.map(|&v| ((v - lo) / span).max(S::zero()).min(S::one()))
}
