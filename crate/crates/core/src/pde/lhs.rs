use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::WaveIC;
use crate::error::{config_err, Result};

/// Latin hypercube design: `n` points, one per equal-width stratum along
/// every axis, strata paired across axes by independent permutations.
/// Returns `n` rows of `ranges.len()` values.
pub fn lhs_sample(n: usize, ranges: &[(f64, f64)], seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(config_err!("LHS needs at least one sample"));
    }
    if ranges.is_empty() {
        return Err(config_err!("LHS needs at least one parameter range"));
    }
    for (i, &(lo, hi)) in ranges.iter().enumerate() {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(config_err!("degenerate LHS interval [{lo}, {hi}] for parameter {i}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = alloc::vec![Vec::with_capacity(ranges.len()); n];
    for &(lo, hi) in ranges {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        let width = (hi - lo) / n as f64;
        for (row, &s) in rows.iter_mut().zip(&strata) {
            let u: f64 = rng.random();
            // Clamp guards against `lo + width * (s + u)` rounding onto the next stratum.
            let v = (lo + width * (s as f64 + u)).min(lo + width * (s + 1) as f64).max(lo + width * s as f64);
            row.push(v.min(hi));
        }
    }
    Ok(rows)
}

/// Sampling ranges for the Gaussian wave initial condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveRanges {
    pub a: (f64, f64),
    pub b: (f64, f64),
    pub c: (f64, f64),
}

impl Default for WaveRanges {
    fn default() -> Self {
        Self { a: (10.0, 100.0), b: (-0.5, 0.5), c: (-0.5, 0.5) }
    }
}

pub fn lhs_wave_ics(n: usize, ranges: &WaveRanges, seed: u64) -> Result<Vec<WaveIC>> {
    if !(ranges.a.0 > 0.0) {
        return Err(config_err!("Gaussian width parameter range must be positive, got {:?}", ranges.a));
    }
    let rows = lhs_sample(n, &[ranges.a, ranges.b, ranges.c], seed)?;
    Ok(rows.into_iter().map(|r| WaveIC { a: r[0], b: r[1], c: r[2] }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_sample_per_stratum() {
        let rows = lhs_sample(4, &[(0.0, 1.0)], 7).unwrap();
        let mut hits = [0; 4];
        for r in &rows {
            hits[(r[0] * 4.0) as usize] += 1;
        }
        assert_eq!(hits, [1, 1, 1, 1]);
    }

    #[test]
    fn single_sample_lies_in_range() {
        let rows = lhs_sample(1, &[(2.0, 3.0), (-1.0, 0.0)], 0).unwrap();
        assert!((2.0..=3.0).contains(&rows[0][0]));
        assert!((-1.0..=0.0).contains(&rows[0][1]));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(lhs_sample(0, &[(0.0, 1.0)], 0).is_err());
        assert!(lhs_sample(3, &[], 0).is_err());
        assert!(lhs_sample(3, &[(1.0, 1.0)], 0).is_err());
        assert!(lhs_sample(3, &[(0.0, 1.0), (2.0, 1.0)], 0).is_err());
        let bad = WaveRanges { a: (-1.0, 1.0), ..WaveRanges::default() };
        assert!(lhs_wave_ics(3, &bad, 0).is_err());
    }

    #[test]
    fn seed_determines_design() {
        let r = WaveRanges::default();
        assert_eq!(lhs_wave_ics(5, &r, 3).unwrap(), lhs_wave_ics(5, &r, 3).unwrap());
        assert_ne!(lhs_wave_ics(5, &r, 3).unwrap(), lhs_wave_ics(5, &r, 4).unwrap());
    }
}
