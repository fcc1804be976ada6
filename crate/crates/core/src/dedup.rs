//! Tolerance-aware deduplication of real vectors under the max-entry metric.

use std::collections::HashMap;

/// Above this many boundary-ambiguous coordinates a lookup falls back to a
/// linear scan instead of enumerating neighbouring cells.
const MAX_AMBIGUOUS: usize = 12;

/// Hash index of vectors where two vectors are equal when every entry
/// differs by at most `tol`.
///
/// Entries are quantised into cells of width `64 * tol`. A coordinate closer
/// than `tol` to a cell wall is probed on both sides, so lookups are exact
/// with respect to the max-entry metric.
#[derive(Debug)]
pub struct TolerantIndex {
    tol: f64,
    cell: f64,
    offset: f64,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
    items: Vec<Vec<f64>>,
}

impl TolerantIndex {
    pub fn new(tol: f64) -> Self {
        let tol = tol.max(f64::MIN_POSITIVE);
        let cell = 64.0 * tol;
        Self { tol, cell, offset: 0.381_966_011_250_105_1 * cell, buckets: HashMap::new(), items: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Vec<f64>] {
        &self.items
    }

    /// Index of a stored vector within tolerance of `x`, preferring the
    /// earliest inserted one.
    pub fn find(&self, x: &[f64]) -> Option<usize> {
        let mut key = Vec::with_capacity(x.len());
        let mut ambiguous = Vec::new();
        for (i, &xi) in x.iter().enumerate() {
            let s = (xi + self.offset) / self.cell;
            let c = s.floor();
            key.push(c as i64);
            let frac = (s - c) * self.cell;
            if frac <= self.tol {
                ambiguous.push((i, -1));
            } else if self.cell - frac <= self.tol {
                ambiguous.push((i, 1));
            }
        }
        if ambiguous.len() > MAX_AMBIGUOUS {
            return self.items.iter().position(|y| self.close(x, y));
        }
        let mut best: Option<usize> = None;
        for mask in 0u32..(1u32 << ambiguous.len()) {
            let mut k = key.clone();
            for (bit, &(i, step)) in ambiguous.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    k[i] += step;
                }
            }
            if let Some(bucket) = self.buckets.get(&k) {
                for &idx in bucket {
                    if best.is_some_and(|b| b <= idx) {
                        break;
                    }
                    if self.close(x, &self.items[idx]) {
                        best = Some(idx);
                        break;
                    }
                }
            }
        }
        best
    }

    /// Inserts `x` unless a stored vector is within tolerance.
    /// Returns `(index, inserted)`.
    pub fn insert(&mut self, x: &[f64]) -> (usize, bool) {
        if let Some(i) = self.find(x) {
            return (i, false);
        }
        let key: Vec<i64> = x.iter().map(|&xi| ((xi + self.offset) / self.cell).floor() as i64).collect();
        let idx = self.items.len();
        self.items.push(x.to_vec());
        self.buckets.entry(key).or_default().push(idx);
        (idx, true)
    }

    fn close(&self, a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= self.tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_within_tolerance() {
        let mut idx = TolerantIndex::new(1e-8);
        assert_eq!(idx.insert(&[1.0, 0.0]), (0, true));
        assert_eq!(idx.insert(&[1.0 + 5e-9, -5e-9]), (0, false));
        assert_eq!(idx.insert(&[1.0 + 5e-8, 0.0]), (1, true));
        assert_eq!(idx.len(), 2);
    }

    #[test]
    fn matches_across_cell_walls() {
        let tol = 1e-8;
        let mut idx = TolerantIndex::new(tol);
        let cell = 64.0 * tol;
        let wall = cell - 0.381_966_011_250_105_1 * cell;
        idx.insert(&[wall - 0.4 * tol]);
        assert_eq!(idx.find(&[wall + 0.4 * tol]), Some(0));
    }

    #[test]
    fn agrees_with_linear_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let tol = 1e-3;
        let mut idx = TolerantIndex::new(tol);
        let mut naive: Vec<Vec<f64>> = Vec::new();
        for _ in 0..3000 {
            let x: Vec<f64> = (0..3).map(|_| (rng.random_range(0..40) as f64) * 0.9e-3 * 1.5).collect();
            let expected = naive.iter().position(|y| x.iter().zip(y).all(|(a, b)| (a - b).abs() <= tol));
            let (i, inserted) = idx.insert(&x);
            match expected {
                Some(e) => assert_eq!((i, inserted), (e, false)),
                None => {
                    assert!(inserted);
                    naive.push(x);
                }
            }
        }
    }
}
