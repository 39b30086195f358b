//! Dimension sweeps and Monte Carlo checks built from the other modules.

mod sweep;
mod verify;

pub use sweep::{
    preset, read_records, run_sweep, RunOptions, SweepConfig, SweepModel, SweepOutcome,
    SweepRecord, Variant, CSV_COLUMNS, CSV_VERSION_LINE, PRESETS,
};
pub use verify::{
    verify_lemmas, verify_theorem3, LemmaParams, LemmaReport, Theorem3Config, Theorem3Report,
    Theorem3Seed, LEMMA_SUITES,
};

use crate::error::{LabError, Result};

/// Heuristic advantage over one half expected at dimension `d` when the
/// ground truth lives in dimension `big_d`: `sqrt(d / D)`.
pub fn predicted_epsilon(d: f64, big_d: f64) -> Result<f64> {
    if !(d > 0.0 && d <= big_d) {
        return Err(LabError::InvalidParameter(format!(
            "need 0 < d <= D, got d = {d}, D = {big_d}"
        )));
    }
    Ok((d / big_d).sqrt())
}

/// `1/2 + epsilon`, capped at 1.
pub fn predicted_accuracy(d: f64, big_d: f64) -> Result<f64> {
    predicted_epsilon(d, big_d).map(|e| (0.5 + e).min(1.0))
}

/// Powers of two in `[lo, hi]` with the rounded geometric mean inserted
/// between consecutive powers.
pub fn default_d_grid(lo: usize, hi: usize) -> Result<Vec<usize>> {
    if lo == 0 || !lo.is_power_of_two() || !hi.is_power_of_two() || lo > hi {
        return Err(LabError::InvalidParameter(format!(
            "grid bounds must be powers of two with lo <= hi, got ({lo}, {hi})"
        )));
    }
    let mut grid = Vec::new();
    let mut p = lo;
    while p <= hi {
        grid.push(p);
        if 2 * p <= hi {
            grid.push((p as f64 * std::f64::consts::SQRT_2).round() as usize);
        }
        p *= 2;
    }
    grid.dedup();
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_at_five_percent() {
        let e = predicted_epsilon(0.05, 1.0).unwrap();
        assert!((e - 0.2236).abs() < 1e-4);
        assert_eq!(predicted_epsilon(16.0, 16.0).unwrap(), 1.0);
        assert_eq!(predicted_accuracy(16.0, 16.0).unwrap(), 1.0);
        assert_eq!(predicted_epsilon(4.0, 16.0).unwrap(), 0.5);
        assert_eq!(predicted_accuracy(4.0, 16.0).unwrap(), 1.0);
        assert!(predicted_epsilon(0.0, 4.0).is_err());
        assert!(predicted_epsilon(5.0, 4.0).is_err());
    }

    #[test]
    fn grid_from_two_to_512() {
        assert_eq!(
            default_d_grid(2, 512).unwrap(),
            vec![2, 3, 4, 6, 8, 11, 16, 23, 32, 45, 64, 91, 128, 181, 256, 362, 512]
        );
        assert_eq!(default_d_grid(4, 4).unwrap(), vec![4]);
        assert!(default_d_grid(3, 8).is_err());
    }
}
