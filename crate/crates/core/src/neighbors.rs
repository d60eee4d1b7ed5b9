//! Exact Euclidean nearest neighbors, restricted to one class.

use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub const DEFAULT_K_MAX: usize = 6;

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sorted same-class neighbor lists for every member of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborIndex {
    pub class: usize,
    pub k_max: usize,
    members: Vec<usize>,
    lists: Vec<Vec<usize>>,
    distances: Vec<Vec<f64>>,
    /// dataset row -> position in `members`
    slot: Vec<Option<usize>>,
}

/// A prefix of a stored neighbor list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbors<'a> {
    pub rows: &'a [usize],
    /// Fewer than the requested `k` neighbors exist.
    pub truncated: bool,
}

impl NeighborIndex {
    /// Brute-force index; distance ties go to the lower row id.
    pub fn build(d: &Dataset, class: usize, k_max: usize) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::InvalidK { k: 0, k_max: 1 });
        }
        let members = d.class_rows(class);
        if members.len() < 2 {
            return Err(Error::ClassTooSmall {
                class,
                count: members.len(),
                needed: 2,
            });
        }
        let keep = k_max.min(members.len() - 1);
        let mut lists = Vec::with_capacity(members.len());
        let mut distances = Vec::with_capacity(members.len());
        let mut slot = vec![None; d.len()];
        for (pos, &r) in members.iter().enumerate() {
            slot[r] = Some(pos);
            let mut cand: Vec<(f64, usize)> = members
                .iter()
                .filter(|&&s| s != r)
                .map(|&s| (squared_distance(d.row(r), d.row(s)), s))
                .collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.truncate(keep);
            distances.push(cand.iter().map(|c| c.0.sqrt()).collect());
            lists.push(cand.into_iter().map(|c| c.1).collect());
        }
        Ok(Self {
            class,
            k_max,
            members,
            lists,
            distances,
            slot,
        })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, row: usize) -> bool {
        matches!(self.slot.get(row), Some(Some(_)))
    }

    fn position(&self, row: usize) -> Result<usize> {
        self.slot.get(row).copied().flatten().ok_or(Error::UnindexedRow(row))
    }

    /// The first `k` neighbors of `row`, or all of them if the class is too small.
    pub fn neighbors_of(&self, row: usize, k: usize) -> Result<Neighbors<'_>> {
        if k == 0 || k > self.k_max {
            return Err(Error::InvalidK { k, k_max: self.k_max });
        }
        let list = &self.lists[self.position(row)?];
        let take = k.min(list.len());
        Ok(Neighbors {
            rows: &list[..take],
            truncated: take < k,
        })
    }

    /// Distances matching [`neighbors_of`](Self::neighbors_of).
    pub fn distances_of(&self, row: usize, k: usize) -> Result<&[f64]> {
        let pos = self.position(row)?;
        let take = k.min(self.distances[pos].len());
        Ok(&self.distances[pos][..take])
    }
}

/// `k` nearest rows of any class, excluding `row` itself; ties by row id.
pub fn nearest_any_class(d: &Dataset, row: usize, k: usize) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> = (0..d.len())
        .filter(|&s| s != row)
        .map(|s| (squared_distance(d.row(row), d.row(s)), s))
        .collect();
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cand.truncate(k);
    cand.into_iter().map(|c| c.1).collect()
}
