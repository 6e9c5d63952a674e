//! Validation: stratified sampling, water/non-water confusion matrices and
//! producer's, user's and overall accuracy.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::landcover::LandCover;
use crate::raster::{BinaryMask, RasterGrid};

/// Counts indexed `[predicted][reference]`, with 0 = non-water, 1 = water.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    /// Builds a matrix from the printed layout: predicted non-water row
    /// `(nn, nw)` and predicted water row `(wn, ww)`.
    pub fn from_rows(non_water: [u64; 2], water: [u64; 2]) -> Self {
        ConfusionMatrix {
            counts: [non_water, water],
        }
    }

    pub fn add(&mut self, predicted_water: bool, reference_water: bool) {
        self.counts[predicted_water as usize][reference_water as usize] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn transpose(&self) -> Self {
        let c = self.counts;
        ConfusionMatrix {
            counts: [[c[0][0], c[1][0]], [c[0][1], c[1][1]]],
        }
    }
}

/// A ratio kept as integers so percentages round exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn percent(&self) -> f64 {
        100.0 * self.num as f64 / self.den as f64
    }

    /// Percentage in tenths, rounded half up: 94.25% → 943.
    pub fn tenths(&self) -> u64 {
        (2000 * self.num + self.den) / (2 * self.den)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.tenths();
        write!(f, "{}.{}", t / 10, t % 10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccuracyReport {
    pub pa: Ratio,
    pub ua: Ratio,
    pub oa: Ratio,
}

pub fn accuracy_metrics(m: &ConfusionMatrix) -> Result<AccuracyReport> {
    let c = m.counts;
    let pa = Ratio { num: c[1][1], den: c[0][1] + c[1][1] };
    let ua = Ratio { num: c[1][1], den: c[1][0] + c[1][1] };
    let oa = Ratio { num: c[0][0] + c[1][1], den: m.total() };
    for (name, r) in [("PA", pa), ("UA", ua), ("OA", oa)] {
        if r.den == 0 {
            return Err(Error::Degenerate(format!("{name} undefined: zero denominator")));
        }
    }
    Ok(AccuracyReport { pa, ua, oa })
}

pub fn confusion_matrix(predicted: &[bool], reference: &[bool]) -> Result<ConfusionMatrix> {
    if predicted.len() != reference.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions vs {} references",
            predicted.len(),
            reference.len()
        )));
    }
    let mut m = ConfusionMatrix::default();
    for (&p, &r) in predicted.iter().zip(reference) {
        m.add(p, r);
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplePoint {
    pub row: usize,
    pub col: usize,
    pub class: LandCover,
}

/// Per-class sample counts used by the validation protocol.
pub const DEFAULT_STRATA: [(LandCover, usize); 4] = [
    (LandCover::Vegetation, 100),
    (LandCover::Soil, 100),
    (LandCover::Impervious, 100),
    (LandCover::Water, 300),
];

/// Draws the requested number of pixels from each class stratum without
/// replacement. Strata are processed in class order; within a stratum the
/// draw is a partial Fisher–Yates shuffle of the pixels in raster order,
/// driven by ChaCha8 seeded with `seed`.
pub fn stratified_sample(class_map: &RasterGrid, counts: &[(LandCover, usize)], seed: u64) -> Result<Vec<SamplePoint>> {
    class_map.require_single_band("class map")?;
    let mut requests = counts.to_vec();
    requests.sort_by_key(|(c, _)| *c);
    if requests.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidInput("class requested twice".into()));
    }
    let width = class_map.width();
    let mut strata: [Vec<usize>; 4] = Default::default();
    for (i, &v) in class_map.band(0).iter().enumerate() {
        if let Some(c) = LandCover::from_code(v) {
            strata[c.index()].push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (class, k) in requests {
        let pool = &mut strata[class.index()];
        if pool.len() < k {
            return Err(Error::InvalidInput(format!(
                "stratum {class} has {} pixels, {k} requested",
                pool.len()
            )));
        }
        for j in 0..k {
            let pick = rng.random_range(j..pool.len());
            pool.swap(j, pick);
            out.push(SamplePoint {
                row: pool[j] / width,
                col: pool[j] % width,
                class,
            });
        }
    }
    Ok(out)
}

/// Confusion matrix of a water map against a water reference at the points.
pub fn evaluate_at(points: &[SamplePoint], predicted: &BinaryMask, reference: &BinaryMask) -> Result<ConfusionMatrix> {
    predicted.geometry().ensure_same(reference.geometry(), "reference mask")?;
    let mut m = ConfusionMatrix::default();
    for p in points {
        if p.row >= predicted.geometry().height || p.col >= predicted.geometry().width {
            return Err(Error::InvalidInput(format!("sample ({}, {}) outside grid", p.row, p.col)));
        }
        m.add(predicted.at(p.row, p.col), reference.at(p.row, p.col));
    }
    Ok(m)
}

/// Text table (predicted rows, reference columns) followed by `pa=…,ua=…,oa=…`.
pub fn format_report(title: &str, m: &ConfusionMatrix) -> Result<String> {
    let r = accuracy_metrics(m)?;
    let c = m.counts;
    Ok(format!(
        "{title}\n\
         {:<22}{:>12}{:>12}{:>10}\n\
         {:<22}{:>12}{:>12}{:>10}\n\
         {:<22}{:>12}{:>12}{:>10}\n\
         {:<22}{:>12}{:>12}{:>10}\n\
         pa={},ua={},oa={}\n",
        "", "ref non-water", "ref water", "UA (%)",
        "pred non-water", c[0][0], c[0][1], "",
        "pred water", c[1][0], c[1][1], r.ua.to_string(),
        "PA (%)", "", r.pa.to_string(), r.oa.to_string(),
        r.pa, r.ua, r.oa
    ))
}

/// Parses the `pa=…,ua=…,oa=…` line of a report.
pub fn parse_metrics_line(text: &str) -> Option<(f64, f64, f64)> {
    let line = text.lines().find(|l| l.starts_with("pa="))?;
    let mut vals = line.split(',').map(|kv| kv.split_once('=').and_then(|(_, v)| v.parse::<f64>().ok()));
    Some((vals.next()??, vals.next()??, vals.next()??))
}
