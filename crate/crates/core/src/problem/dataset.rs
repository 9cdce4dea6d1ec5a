use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    /// Labels map by sign; 0 (from 0/1-labelled files) becomes `Neg`.
    pub fn from_value(v: f64) -> Self {
        if v > 0.0 {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: Label,
}

/// Dense binary-classification dataset; every feature vector has length `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    rows: Vec<Sample>,
}

impl Dataset {
    pub fn new(dim: usize, rows: Vec<Sample>) -> Result<Self> {
        if let Some(bad) = rows.iter().find(|r| r.features.len() != dim) {
            return Err(Error::dim(dim, bad.features.len()));
        }
        Ok(Dataset { dim, rows })
    }

    pub fn empty(dim: usize) -> Self {
        Dataset { dim, rows: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[Sample] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn into_rows(self) -> Vec<Sample> {
        self.rows
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionScheme {
    #[default]
    Contiguous,
    RoundRobin,
}

/// Splits rows into `n` disjoint shards whose sizes differ by at most one.
pub fn partition(data: &Dataset, n: usize, scheme: PartitionScheme) -> Result<Vec<Dataset>> {
    let rows = data.len();
    if n == 0 || n > rows {
        return Err(Error::PartitionError { rows, shards: n });
    }
    let mut shards: Vec<Vec<Sample>> = vec![Vec::new(); n];
    match scheme {
        PartitionScheme::Contiguous => {
            let base = rows / n;
            let extra = rows % n;
            let mut iter = data.rows.iter().cloned();
            for (k, shard) in shards.iter_mut().enumerate() {
                let size = base + usize::from(k < extra);
                shard.extend(iter.by_ref().take(size));
            }
        }
        PartitionScheme::RoundRobin => {
            for (j, row) in data.rows.iter().enumerate() {
                shards[j % n].push(row.clone());
            }
        }
    }
    Ok(shards
        .into_iter()
        .map(|rows| Dataset { dim: data.dim, rows })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numbered(rows: usize) -> Dataset {
        let rows = (0..rows)
            .map(|j| Sample { features: vec![j as f64], label: Label::Pos })
            .collect();
        Dataset::new(1, rows).unwrap()
    }

    fn ids(d: &Dataset) -> Vec<usize> {
        d.rows().iter().map(|r| r.features[0] as usize).collect()
    }

    #[test]
    fn contiguous_even_split() {
        let shards = partition(&numbered(10), 2, PartitionScheme::Contiguous).unwrap();
        assert_eq!(ids(&shards[0]), vec![0, 1, 2, 3, 4]);
        assert_eq!(ids(&shards[1]), vec![5, 6, 7, 8, 9]);
    }

    #[test]
    fn contiguous_balanced_remainder() {
        let shards = partition(&numbered(7), 3, PartitionScheme::Contiguous).unwrap();
        let sizes: Vec<usize> = shards.iter().map(Dataset::len).collect();
        assert_eq!(sizes, vec![3, 2, 2]);
    }

    #[test]
    fn round_robin_definition() {
        let shards = partition(&numbered(6), 3, PartitionScheme::RoundRobin).unwrap();
        for (k, s) in shards.iter().enumerate() {
            assert_eq!(ids(s), vec![k, k + 3]);
        }
    }

    #[test]
    fn too_many_shards() {
        assert!(matches!(
            partition(&numbered(2), 3, PartitionScheme::Contiguous),
            Err(Error::PartitionError { rows: 2, shards: 3 })
        ));
        assert!(partition(&numbered(2), 0, PartitionScheme::Contiguous).is_err());
    }

    #[test]
    fn labels_by_sign() {
        assert_eq!(Label::from_value(0.0), Label::Neg);
        assert_eq!(Label::from_value(1.0), Label::Pos);
        assert_eq!(Label::from_value(-3.0), Label::Neg);
        assert_eq!(Label::from_value(2.0).sign(), 1.0);
    }
}
