//! Two-sided frequency axis and band selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for deciding that a band edge sits on a bin or on Nyquist.
const EDGE_EPS: f64 = 1e-9;

/// Frequency band `[f_low, f_high)` applied to |f|.
///
/// When `f_high` equals the Nyquist frequency the Nyquist bin is included,
/// so adjacent bands ending at Nyquist partition the spectrum exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub f_low_hz: f64,
    pub f_high_hz: f64,
}

impl Band {
    pub fn new(f_low_hz: f64, f_high_hz: f64) -> Result<Self> {
        if !(f_low_hz >= 0.0 && f_low_hz < f_high_hz && f_high_hz.is_finite()) {
            return Err(Error::InvalidBand(format!(
                "need 0 <= f_low < f_high, got [{f_low_hz}, {f_high_hz})"
            )));
        }
        Ok(Band {
            f_low_hz,
            f_high_hz,
        })
    }

    /// `[f_low, f_S/2]`.
    pub fn to_nyquist(f_low_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        Band::new(f_low_hz, sample_rate_hz / 2.0)
    }

    /// `[0, f_S/2]`.
    pub fn full(sample_rate_hz: f64) -> Self {
        Band {
            f_low_hz: 0.0,
            f_high_hz: sample_rate_hz / 2.0,
        }
    }

    pub fn validate_for(&self, sample_rate_hz: f64) -> Result<()> {
        Band::new(self.f_low_hz, self.f_high_hz)?;
        let nyquist = sample_rate_hz / 2.0;
        if self.f_high_hz > nyquist * (1.0 + EDGE_EPS) {
            return Err(Error::BandExceedsNyquist {
                f_high_hz: self.f_high_hz,
                nyquist_hz: nyquist,
            });
        }
        Ok(())
    }

    pub fn ends_at_nyquist(&self, sample_rate_hz: f64) -> bool {
        let nyquist = sample_rate_hz / 2.0;
        (self.f_high_hz - nyquist).abs() <= EDGE_EPS * nyquist
    }

    pub fn label(&self) -> String {
        format!("{}-{}Hz", self.f_low_hz, self.f_high_hz)
    }
}

/// Frequency of DFT bin `k` on the two-sided axis.
pub fn bin_frequency(k: usize, nbins: usize, sample_rate_hz: f64) -> f64 {
    let n = nbins as f64;
    if 2 * k < nbins {
        k as f64 * sample_rate_hz / n
    } else {
        (k as f64 - n) * sample_rate_hz / n
    }
}

/// All bin indices whose |f| lies in the band, positive and negative frequencies.
pub fn band_bins(band: &Band, nbins: usize, sample_rate_hz: f64) -> Result<Vec<usize>> {
    band.validate_for(sample_rate_hz)?;
    let scale = nbins as f64 / sample_rate_hz;
    let lo = band.f_low_hz * scale;
    let hi = band.f_high_hz * scale;
    let nyq_inclusive = band.ends_at_nyquist(sample_rate_hz);
    let tol = EDGE_EPS * nbins as f64;
    let bins = (0..nbins)
        .filter(|&k| {
            // |f_k| in bin units; symmetric by construction
            let m = k.min(nbins - k) as f64;
            let at_nyquist = 2 * k == nbins;
            m >= lo - tol && (m < hi - tol || (nyq_inclusive && at_nyquist))
        })
        .collect();
    Ok(bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn enumerated_examples() {
        let b = Band::new(1000.0, 3000.0).unwrap();
        assert_eq!(band_bins(&b, 8, 8000.0).unwrap(), vec![1, 2, 6, 7]);
        let b = Band::new(0.0, 4000.0).unwrap();
        assert_eq!(band_bins(&b, 8, 8000.0).unwrap(), (0..8).collect::<Vec<_>>());
        // f_k = {0, 1, -2, -1} kHz; [1, 2] with inclusive Nyquist edge
        let b = Band::new(1000.0, 2000.0).unwrap();
        assert_eq!(band_bins(&b, 4, 4000.0).unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn exceeding_nyquist_is_an_error() {
        let b = Band::new(1000.0, 5000.0).unwrap();
        let err = band_bins(&b, 8, 8000.0).unwrap_err();
        assert!(err.to_string().contains("band exceeds Nyquist"));
    }

    #[test]
    fn invalid_band_rejected() {
        assert!(Band::new(3000.0, 1000.0).is_err());
        assert!(Band::new(-1.0, 1000.0).is_err());
    }

    #[test]
    fn bin_frequency_axis() {
        let f: Vec<f64> = (0..8).map(|k| bin_frequency(k, 8, 8000.0)).collect();
        assert_eq!(f, vec![0.0, 1000.0, 2000.0, 3000.0, -4000.0, -3000.0, -2000.0, -1000.0]);
    }

    proptest! {
        #[test]
        fn symmetric_under_conjugation(half in 1usize..64, lo_frac in 0.0f64..0.9, width in 0.01f64..1.0) {
            let n = 2 * half;
            let fs = 1000.0 * n as f64;
            let lo = lo_frac * fs / 2.0;
            let hi = (lo + width * fs / 2.0).min(fs / 2.0);
            prop_assume!(hi > lo);
            let bins = band_bins(&Band::new(lo, hi).unwrap(), n, fs).unwrap();
            for &k in &bins {
                prop_assert!(bins.contains(&((n - k) % n)));
            }
        }

        #[test]
        fn full_band_and_partition(half in 1usize..64, split in 0.0f64..1.0) {
            let n = 2 * half;
            let fs = 64_000.0;
            prop_assert_eq!(band_bins(&Band::full(fs), n, fs).unwrap().len(), n);
            let cut = split * fs / 2.0;
            prop_assume!(cut > 0.0 && cut < fs / 2.0);
            let a = band_bins(&Band::new(0.0, cut).unwrap(), n, fs).unwrap();
            let b = band_bins(&Band::to_nyquist(cut, fs).unwrap(), n, fs).unwrap();
            prop_assert_eq!(a.len() + b.len(), n);
            prop_assert!(a.iter().all(|k| !b.contains(k)));
        }

        #[test]
        fn negative_mirror(half in 1usize..64, k in 1usize..64) {
            let n = 2 * half;
            prop_assume!(k < half);
            prop_assert_eq!(bin_frequency(k, n, 1e4), -bin_frequency(n - k, n, 1e4));
        }
    }
}
