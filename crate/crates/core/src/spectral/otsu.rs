use crate::error::{Error, Result};

pub const OTSU_BINS: usize = 256;

/// Fixed 256-bin histogram spanning the value range `[min, max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub min: f64,
    pub max: f64,
    pub counts: [u64; OTSU_BINS],
}

impl Histogram {
    /// Builds the histogram of the finite entries of `values`.
    pub fn from_values(values: &[f32]) -> Result<Self> {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in values.iter().filter(|v| v.is_finite()) {
            min = min.min(v as f64);
            max = max.max(v as f64);
        }
        if !(max > min) {
            return Err(Error::Degenerate(
                "thresholding needs at least two distinct values".into(),
            ));
        }
        let mut counts = [0u64; OTSU_BINS];
        let scale = OTSU_BINS as f64 / (max - min);
        for &v in values.iter().filter(|v| v.is_finite()) {
            let b = (((v as f64) - min) * scale) as usize;
            counts[b.min(OTSU_BINS - 1)] += 1;
        }
        Ok(Histogram { min, max, counts })
    }

    pub fn bin_width(&self) -> f64 {
        (self.max - self.min) / OTSU_BINS as f64
    }

    pub fn upper_edge(&self, bin: usize) -> f64 {
        if bin + 1 == OTSU_BINS {
            self.max
        } else {
            self.min + (bin + 1) as f64 * self.bin_width()
        }
    }

    /// Between-class variance (in squared bin units, times N²) when bins
    /// `0..=bin` form the lower class.
    pub fn between_class_variance(&self, bin: usize) -> f64 {
        let total: u64 = self.counts.iter().sum();
        let moment: u64 = self.counts.iter().enumerate().map(|(i, &c)| i as u64 * c).sum();
        let n0: u64 = self.counts[..=bin].iter().sum();
        let m0: u64 = self.counts[..=bin]
            .iter()
            .enumerate()
            .map(|(i, &c)| i as u64 * c)
            .sum();
        Self::score(total, moment, n0, m0)
    }

    fn score(total: u64, moment: u64, n0: u64, m0: u64) -> f64 {
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            return 0.0;
        }
        // σ_b² · N² = (N·m0 − n0·M)² / (n0·n1)
        let diff = total as f64 * m0 as f64 - n0 as f64 * moment as f64;
        diff * diff / (n0 as f64 * n1 as f64)
    }

    /// Smallest bin index maximizing the between-class variance.
    pub fn otsu_bin(&self) -> usize {
        let total: u64 = self.counts.iter().sum();
        let moment: u64 = self.counts.iter().enumerate().map(|(i, &c)| i as u64 * c).sum();
        let (mut n0, mut m0) = (0u64, 0u64);
        let (mut best, mut best_score) = (0usize, f64::NEG_INFINITY);
        for (i, &c) in self.counts.iter().enumerate() {
            n0 += c;
            m0 += i as u64 * c;
            let s = Self::score(total, moment, n0, m0);
            if s > best_score {
                best = i;
                best_score = s;
            }
        }
        best
    }
}

/// Otsu threshold of the finite entries of `values`: the upper edge of the
/// maximizing bin. Values `< threshold` form the dark class.
pub fn otsu_threshold(values: &[f32]) -> Result<f64> {
    let h = Histogram::from_values(values)?;
    Ok(h.upper_edge(h.otsu_bin()))
}
