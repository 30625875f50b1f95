//! Datasets, class assignments, and their persistence.

mod csv_io;
mod json;
mod synth;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use self::csv_io::{load_assignments, load_dataset_csv, save_assignments, save_dataset_csv};
pub use self::json::{
    load_linked_json, load_tree_json, save_linked_json, save_tree_json, LeafThresholdStyle,
    TREE_SCHEMA_VERSION,
};
pub use self::synth::{
    generate_synthetic_dataset, generate_synthetic_tree, reference_fixture, Distribution,
    ReferenceFixture, TreeShape, REFERENCE_BASE_RECORDS, REFERENCE_TILE_FACTOR,
};

/// Fixed-arity table of finite `f32` attribute vectors, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    arity: usize,
    count: usize,
    values: Vec<f32>,
}

impl Dataset {
    /// Builds a dataset from a flat row-major buffer of `arity`-wide records.
    pub fn new(arity: usize, values: Vec<f32>) -> Result<Self> {
        if arity == 0 {
            if !values.is_empty() {
                return Err(Error::argument("values supplied for a zero-arity dataset"));
            }
            return Ok(Dataset::empty(0));
        }
        if !values.len().is_multiple_of(arity) {
            return Err(Error::argument(format!(
                "{} values do not divide into records of arity {arity}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                row: pos / arity + 1,
                column: Some(pos % arity + 1),
                reason: "non-finite attribute value".into(),
            });
        }
        let count = values.len() / arity;
        Ok(Dataset {
            arity,
            count,
            values,
        })
    }

    pub fn empty(arity: usize) -> Self {
        Dataset {
            arity,
            count: 0,
            values: Vec::new(),
        }
    }

    pub fn from_records<R: AsRef<[f32]>>(records: &[R]) -> Result<Self> {
        let Some(first) = records.first() else {
            return Ok(Dataset::empty(0));
        };
        let arity = first.as_ref().len();
        let mut values = Vec::with_capacity(arity * records.len());
        for (i, r) in records.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != arity {
                return Err(Error::Parse {
                    row: i + 1,
                    column: None,
                    reason: format!("expected {arity} attributes, found {}", r.len()),
                });
            }
            values.extend_from_slice(r);
        }
        Dataset::new(arity, values)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    #[inline]
    pub fn record(&self, index: usize) -> &[f32] {
        let start = index * self.arity;
        &self.values[start..start + self.arity]
    }

    pub fn records(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        (0..self.count).map(move |i| self.record(i))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    /// FNV-1a over the shape and the bit patterns of every value.
    pub fn checksum(&self) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for &b in bytes {
                h ^= u64::from(b);
                h = h.wrapping_mul(PRIME);
            }
        };
        feed(&(self.arity as u64).to_le_bytes());
        feed(&(self.count as u64).to_le_bytes());
        for v in &self.values {
            feed(&v.to_bits().to_le_bytes());
        }
        h
    }
}

/// Repeats the whole record sequence `factor` times, block after block.
pub fn tile_dataset(d: &Dataset, factor: usize) -> Result<Dataset> {
    if factor == 0 {
        return Err(Error::argument("tile factor must be at least 1"));
    }
    let mut values = Vec::with_capacity(d.values.len() * factor);
    for _ in 0..factor {
        values.extend_from_slice(&d.values);
    }
    Ok(Dataset {
        arity: d.arity,
        count: d.count * factor,
        values,
    })
}

/// Seeded permutation of the record order.
pub fn shuffle_records(d: &Dataset, seed: u64) -> Dataset {
    let mut order: Vec<usize> = (0..d.count).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut values = Vec::with_capacity(d.values.len());
    for i in order {
        values.extend_from_slice(d.record(i));
    }
    Dataset {
        arity: d.arity,
        count: d.count,
        values,
    }
}

/// One class id per record, positionally aligned with the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClassAssignment(Vec<u32>);

impl ClassAssignment {
    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<u32> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the first position where `self` and `other` differ, counting
    /// a length difference as a mismatch at the shorter length.
    pub fn first_mismatch(&self, other: &ClassAssignment) -> Option<usize> {
        self.0
            .iter()
            .zip(&other.0)
            .position(|(a, b)| a != b)
            .or_else(|| (self.0.len() != other.0.len()).then(|| self.0.len().min(other.0.len())))
    }

    pub fn mismatch_count(&self, other: &ClassAssignment) -> usize {
        let common = self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count();
        common + self.0.len().abs_diff(other.0.len())
    }
}

impl From<Vec<u32>> for ClassAssignment {
    fn from(v: Vec<u32>) -> Self {
        ClassAssignment(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc() -> Dataset {
        Dataset::from_records(&[[1.0f32, 1.5], [2.0, 2.5], [3.0, 3.5]]).unwrap()
    }

    #[test]
    fn tile_identity_and_blocks() {
        let d = abc();
        assert_eq!(tile_dataset(&d, 1).unwrap(), d);
        let t = tile_dataset(&d, 2).unwrap();
        assert_eq!(t.len(), 6);
        let firsts: Vec<f32> = t.records().map(|r| r[0]).collect();
        assert_eq!(firsts, [1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        assert!(matches!(tile_dataset(&d, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn tile_reference_scale() {
        let d = Dataset::new(1, vec![0.0; 16_384]).unwrap();
        assert_eq!(tile_dataset(&d, 4).unwrap().len(), 65_536);
    }

    #[test]
    fn rejects_non_finite_and_ragged() {
        assert!(Dataset::new(2, vec![0.0, f32::NAN]).is_err());
        assert!(Dataset::new(2, vec![0.0, 1.0, 2.0]).is_err());
        let ragged: Vec<Vec<f32>> = vec![vec![0.0, 1.0], vec![0.0]];
        assert!(matches!(
            Dataset::from_records(&ragged),
            Err(Error::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn shuffle_is_a_seeded_permutation() {
        let d = Dataset::new(1, (0..100).map(|i| i as f32).collect()).unwrap();
        let a = shuffle_records(&d, 9);
        assert_eq!(a, shuffle_records(&d, 9));
        assert_ne!(a, d);
        let mut v: Vec<f32> = a.as_slice().to_vec();
        v.sort_by(f32::total_cmp);
        assert_eq!(v, d.as_slice());
    }

    #[test]
    fn checksum_tracks_content() {
        let d = abc();
        assert_eq!(d.checksum(), abc().checksum());
        let other = Dataset::from_records(&[[1.0f32, 1.5], [2.0, 2.5], [3.0, 3.25]]).unwrap();
        assert_ne!(d.checksum(), other.checksum());
    }

    #[test]
    fn mismatch_reporting() {
        let a = ClassAssignment::from(vec![1, 2, 3]);
        assert_eq!(a.first_mismatch(&a.clone()), None);
        let b = ClassAssignment::from(vec![1, 5, 3]);
        assert_eq!(a.first_mismatch(&b), Some(1));
        assert_eq!(a.mismatch_count(&b), 1);
        let c = ClassAssignment::from(vec![1, 2]);
        assert_eq!(a.first_mismatch(&c), Some(2));
    }
}
