//! Group-structured data model.
//!
//! A [`Group`] is an `n_points × dim` matrix of observations stored row-major.
//! A [`GroupDataset`] is an ordered list of groups sharing one feature
//! dimension, optionally labelled (true = anomalous). Labels are carried for
//! evaluation only; no fitting routine reads them.

use serde::{Deserialize, Serialize};

use crate::error::{GadError, Result};

/// One group of observations, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    n_points: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Group {
    /// Wraps a row-major buffer. Only the buffer length is checked here; the
    /// remaining invariants are enforced by [`validate_dataset`].
    pub fn new(n_points: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_points * dim {
            return Err(GadError::ShapeMismatch(format!(
                "buffer of length {} cannot hold {n_points}x{dim}",
                data.len()
            )));
        }
        Ok(Self { n_points, dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(GadError::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), dim, data)
    }

    pub fn zeros(n_points: usize, dim: usize) -> Self {
        Self {
            n_points,
            dim,
            data: vec![0.0; n_points * dim],
        }
    }

    #[inline]
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl DoubleEndedIterator<Item = &[f64]> + ExactSizeIterator {
        self.data.chunks_exact(self.dim.max(1))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// Row-major concatenation of a group's observations.
pub fn flatten_group(g: &Group) -> Vec<f64> {
    g.data.clone()
}

/// Inverse of [`flatten_group`] for a known shape.
pub fn unflatten_group(flat: &[f64], n_points: usize, dim: usize) -> Result<Group> {
    Group::new(n_points, dim, flat.to_vec())
}

/// Checks the dataset invariants on raw parts.
pub fn validate_dataset(groups: &[Group], labels: Option<&[bool]>) -> Result<()> {
    let first = groups.first().ok_or(GadError::NoGroups)?;
    let dim = first.dim;
    for (index, g) in groups.iter().enumerate() {
        if g.dim != dim {
            return Err(GadError::DimensionMismatch {
                expected: dim,
                found: g.dim,
            });
        }
        if g.n_points < 2 {
            return Err(GadError::EmptyGroup {
                index,
                n_points: g.n_points,
            });
        }
        if let Some(pos) = g.data.iter().position(|v| !v.is_finite()) {
            return Err(GadError::NonFinite {
                group: index,
                row: pos / dim.max(1),
                col: pos % dim.max(1),
            });
        }
    }
    if let Some(labels) = labels {
        if labels.len() != groups.len() {
            return Err(GadError::LabelLengthMismatch {
                labels: labels.len(),
                groups: groups.len(),
            });
        }
    }
    Ok(())
}

/// Ordered collection of groups with optional anomaly labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDataset {
    groups: Vec<Group>,
    labels: Option<Vec<bool>>,
}

impl GroupDataset {
    /// Builds a dataset, rejecting anything that violates the invariants.
    pub fn new(groups: Vec<Group>, labels: Option<Vec<bool>>) -> Result<Self> {
        validate_dataset(&groups, labels.as_deref())?;
        Ok(Self { groups, labels })
    }

    pub fn validate(&self) -> Result<()> {
        validate_dataset(&self.groups, self.labels.as_deref())
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn group(&self, m: usize) -> &Group {
        &self.groups[m]
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.groups[0].dim
    }

    /// Total number of observations across all groups.
    pub fn total_points(&self) -> usize {
        self.groups.iter().map(Group::n_points).sum()
    }

    /// The common group size, or `UnequalGroupSizes` for the first offender.
    pub fn common_group_size(&self) -> Result<usize> {
        let first = self.groups[0].n_points;
        match self.groups.iter().find(|g| g.n_points != first) {
            Some(g) => Err(GadError::UnequalGroupSizes {
                first,
                other: g.n_points,
            }),
            None => Ok(first),
        }
    }

    /// Same groups with the labels removed.
    pub fn without_labels(&self) -> Self {
        Self {
            groups: self.groups.clone(),
            labels: None,
        }
    }

    /// Reorders groups (and labels) so that position `i` holds old group `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if !is_permutation(perm, self.len()) {
            return Err(GadError::InvalidConfig("not a permutation".into()));
        }
        let groups = perm.iter().map(|&i| self.groups[i].clone()).collect();
        let labels = self
            .labels
            .as_ref()
            .map(|l| perm.iter().map(|&i| l[i]).collect());
        Ok(Self { groups, labels })
    }

    /// Every observation of every group, in order, as row slices.
    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.groups.iter().flat_map(Group::rows)
    }
}

fn is_permutation(perm: &[usize], n: usize) -> bool {
    if perm.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    true
}

/// Per-group anomaly scores plus the descending ranking.
///
/// Ties are broken by ascending group index, so the ranking is a pure
/// function of the score vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    scores: Vec<f64>,
    order: Vec<usize>,
}

impl ScoreTable {
    pub fn from_scores(scores: Vec<f64>) -> Result<Self> {
        if let Some(m) = scores.iter().position(|s| !s.is_finite()) {
            return Err(GadError::NonFinite {
                group: m,
                row: 0,
                col: 0,
            });
        }
        let mut order: Vec<usize> = (0..scores.len()).collect();
        // stable sort keeps ascending index among equal scores
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        Ok(Self { scores, order })
    }

    /// Score of group `m`, indexed by original group position.
    pub fn score(&self, m: usize) -> f64 {
        self.scores[m]
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Group indices, most anomalous first.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Zero-based rank of every group (0 = most anomalous).
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.order.len()];
        for (r, &m) in self.order.iter().enumerate() {
            ranks[m] = r;
        }
        ranks
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grp(n: usize, d: usize) -> Group {
        Group::new(n, d, (0..n * d).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn accepts_valid_dataset() {
        let ds = GroupDataset::new(vec![grp(3, 2), grp(5, 2)], None).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.total_points(), 8);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let err = validate_dataset(&[grp(3, 2), grp(5, 3)], None).unwrap_err();
        assert!(matches!(err, GadError::DimensionMismatch { .. }));
    }

    #[test]
    fn rejects_single_point_group() {
        let err = validate_dataset(&[grp(1, 2)], None).unwrap_err();
        assert!(matches!(err, GadError::EmptyGroup { index: 0, .. }));
    }

    #[test]
    fn rejects_non_finite() {
        let g = Group::new(2, 2, vec![0.0, 1.0, f64::NAN, 2.0]).unwrap();
        let err = validate_dataset(&[g], None).unwrap_err();
        assert!(matches!(err, GadError::NonFinite { group: 0, row: 1, col: 0 }));
        let g = Group::new(2, 1, vec![f64::INFINITY, 2.0]).unwrap();
        assert!(validate_dataset(&[g], None).is_err());
    }

    #[test]
    fn rejects_label_length_mismatch() {
        let err = validate_dataset(&[grp(2, 2)], Some(&[true, false])).unwrap_err();
        assert!(matches!(err, GadError::LabelLengthMismatch { .. }));
    }

    #[test]
    fn flatten_examples() {
        let g = Group::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(flatten_group(&g), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(flatten_group(&Group::zeros(2, 2)), vec![0.0; 4]);
    }

    #[test]
    fn score_table_orders_descending_with_index_ties() {
        let t = ScoreTable::from_scores(vec![1.0, 3.0, 1.0, 2.0]).unwrap();
        assert_eq!(t.order(), &[1, 3, 0, 2]);
        assert_eq!(t.ranks(), vec![2, 0, 3, 1]);
    }

    #[test]
    fn unequal_sizes_detected() {
        let ds = GroupDataset::new(vec![grp(3, 2), grp(5, 2)], None).unwrap();
        assert!(matches!(
            ds.common_group_size(),
            Err(GadError::UnequalGroupSizes { first: 3, other: 5 })
        ));
    }

    proptest! {
        #[test]
        fn flatten_round_trips(n in 2usize..8, d in 1usize..5, seed in any::<u64>()) {
            let data: Vec<f64> = (0..n * d).map(|i| ((seed.wrapping_add(i as u64) % 1000) as f64) - 500.0).collect();
            let g = Group::new(n, d, data).unwrap();
            prop_assert_eq!(unflatten_group(&flatten_group(&g), n, d).unwrap(), g);
        }

        #[test]
        fn score_order_is_sorted_permutation(scores in prop::collection::vec(-10.0f64..10.0, 1..40)) {
            let t = ScoreTable::from_scores(scores.clone()).unwrap();
            let mut seen = t.order().to_vec();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..scores.len()).collect::<Vec<_>>());
            for w in t.order().windows(2) {
                prop_assert!(scores[w[0]] >= scores[w[1]]);
                if scores[w[0]] == scores[w[1]] {
                    prop_assert!(w[0] < w[1]);
                }
            }
        }
    }
}
