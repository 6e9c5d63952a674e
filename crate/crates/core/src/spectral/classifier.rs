//! Gaussian maximum-likelihood classifier with calibrated posteriors.
//!
//! The pipeline only needs per-class probabilities, so any model implementing
//! [`ProbabilisticClassifier`] can stand in for the Gaussian one.

use std::fs;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landcover::LandCover;
use crate::par;
use crate::raster::RasterGrid;

/// Relative ridge added to every class covariance: ε·trace(Σ)/d.
pub const COVARIANCE_EPSILON: f64 = 1e-4;
/// Absolute ridge used when a class has no scatter at all.
pub const COVARIANCE_FLOOR: f64 = 1e-10;

pub trait ProbabilisticClassifier: Sync {
    /// Output classes, in the order posteriors are written.
    fn classes(&self) -> &[LandCover];
    fn dimension(&self) -> usize;
    /// Writes the posterior distribution over [`Self::classes`] into `out`.
    fn posterior(&self, spectrum: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub spectrum: Vec<f64>,
    pub label: LandCover,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSamples {
    pub samples: Vec<TrainingSample>,
}

impl TrainingSamples {
    pub fn push(&mut self, label: LandCover, spectrum: Vec<f64>) {
        self.samples.push(TrainingSample { spectrum, label });
    }

    /// Parses `class_label, v1, v2, ...` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut out = TrainingSamples::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let loc = || format!("{origin}:{}", lineno + 1);
            let mut fields = line.split(',').map(str::trim);
            let label: LandCover = fields
                .next()
                .unwrap_or_default()
                .parse()
                .map_err(|e: Error| Error::parse(loc(), e.to_string()))?;
            let spectrum = fields
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::parse(loc(), format!("bad value `{f}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            if spectrum.is_empty() {
                return Err(Error::parse(loc(), "sample has no values"));
            }
            if let Some(first) = out.samples.first() {
                if first.spectrum.len() != spectrum.len() {
                    return Err(Error::parse(loc(), "inconsistent spectrum length"));
                }
            }
            out.push(label, spectrum);
        }
        Ok(out)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for sample in &self.samples {
            s.push_str(sample.label.name());
            for v in &sample.spectrum {
                s.push_str(", ");
                s.push_str(&v.to_string());
            }
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ClassParams {
    label: LandCover,
    mean: Vec<f64>,
    /// Row-major d×d, already regularised.
    covariance: Vec<f64>,
    prior: f64,
}

#[derive(Debug, Clone)]
struct Prepared {
    /// Row-major lower Cholesky factor.
    chol: Vec<f64>,
    /// ln prior − ½ ln det Σ − ½ d ln 2π
    log_norm: f64,
}

#[derive(Debug, Clone)]
pub struct ClassifierModel {
    params: Vec<ClassParams>,
    labels: Vec<LandCover>,
    prepared: Vec<Prepared>,
}

impl PartialEq for ClassifierModel {
    fn eq(&self, other: &Self) -> bool {
        serde_json::to_string(&self.params).ok() == serde_json::to_string(&other.params).ok()
    }
}

impl ClassifierModel {
    fn from_params(params: Vec<ClassParams>) -> Result<Self> {
        let d = params
            .first()
            .map(|p| p.mean.len())
            .ok_or_else(|| Error::InvalidInput("classifier has no classes".into()))?;
        let mut prepared = Vec::with_capacity(params.len());
        for p in &params {
            if p.mean.len() != d || p.covariance.len() != d * d {
                return Err(Error::InvalidInput("inconsistent class dimensions".into()));
            }
            if !(p.prior > 0.0 && p.prior.is_finite()) {
                return Err(Error::InvalidInput(format!("prior of {} must be positive", p.label)));
            }
            let chol = Cholesky::new(DMatrix::from_row_slice(d, d, &p.covariance)).ok_or_else(|| {
                Error::Degenerate(format!("covariance of {} is not positive definite", p.label))
            })?;
            let l = chol.l();
            let log_det: f64 = (0..d).map(|i| 2.0 * l[(i, i)].ln()).sum();
            let mut flat = vec![0f64; d * d];
            for r in 0..d {
                for c in 0..=r {
                    flat[r * d + c] = l[(r, c)];
                }
            }
            prepared.push(Prepared {
                chol: flat,
                log_norm: p.prior.ln()
                    - 0.5 * log_det
                    - 0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln(),
            });
        }
        let labels = params.iter().map(|p| p.label).collect();
        Ok(ClassifierModel {
            params,
            labels,
            prepared,
        })
    }

    pub fn mean(&self, class: LandCover) -> Option<&[f64]> {
        self.params.iter().find(|p| p.label == class).map(|p| p.mean.as_slice())
    }

    pub fn covariance(&self, class: LandCover) -> Option<&[f64]> {
        self.params
            .iter()
            .find(|p| p.label == class)
            .map(|p| p.covariance.as_slice())
    }

    /// Replaces the class priors (given in class order). Priors need not sum
    /// to one; posteriors are normalised.
    pub fn with_priors(mut self, priors: &[f64]) -> Result<Self> {
        if priors.len() != self.params.len() {
            return Err(Error::InvalidInput("one prior per class required".into()));
        }
        for (p, &v) in self.params.iter_mut().zip(priors) {
            p.prior = v;
        }
        Self::from_params(self.params)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.params).expect("classifier params serialise")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let params: Vec<ClassParams> =
            serde_json::from_str(text).map_err(|e| Error::parse("classifier model", e.to_string()))?;
        Self::from_params(params)
    }

    /// Log of prior × Gaussian density for class `k`.
    fn log_joint(&self, k: usize, x: &[f64], scratch: &mut [f64]) -> f64 {
        let d = x.len();
        let mean = &self.params[k].mean;
        let l = &self.prepared[k].chol;
        // Forward substitution: L z = x − μ.
        let mut m2 = 0.0;
        for r in 0..d {
            let mut v = x[r] - mean[r];
            for c in 0..r {
                v -= l[r * d + c] * scratch[c];
            }
            let z = v / l[r * d + r];
            scratch[r] = z;
            m2 += z * z;
        }
        self.prepared[k].log_norm - 0.5 * m2
    }
}

impl ProbabilisticClassifier for ClassifierModel {
    fn classes(&self) -> &[LandCover] {
        &self.labels
    }

    fn dimension(&self) -> usize {
        self.params[0].mean.len()
    }

    fn posterior(&self, spectrum: &[f64], out: &mut [f64]) {
        let mut scratch = [0f64; 16];
        let mut heap;
        let scratch: &mut [f64] = if spectrum.len() <= scratch.len() {
            &mut scratch[..spectrum.len()]
        } else {
            heap = vec![0f64; spectrum.len()];
            &mut heap
        };
        let mut best = f64::NEG_INFINITY;
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.log_joint(k, spectrum, scratch);
            best = best.max(*o);
        }
        let mut total = 0.0;
        for o in out.iter_mut() {
            *o = (*o - best).exp();
            total += *o;
        }
        out.iter_mut().for_each(|o| *o /= total);
    }
}

/// Fits one regularised Gaussian per class with uniform priors.
///
/// Each class's samples are put in a canonical order before accumulation, so
/// the model does not depend on the order of the input.
pub fn fit_classifier(samples: &TrainingSamples) -> Result<ClassifierModel> {
    let d = samples
        .samples
        .first()
        .map(|s| s.spectrum.len())
        .ok_or_else(|| Error::InvalidInput("no training samples".into()))?;
    let present: Vec<LandCover> = LandCover::ALL
        .into_iter()
        .filter(|c| samples.samples.iter().any(|s| s.label == *c))
        .collect();
    let prior = 1.0 / present.len() as f64;
    let mut params = Vec::with_capacity(present.len());
    for class in present {
        let mut spectra: Vec<&Vec<f64>> = samples
            .samples
            .iter()
            .filter(|s| s.label == class)
            .map(|s| &s.spectrum)
            .collect();
        if spectra.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "class {class} has {} training sample(s); at least 2 required",
                spectra.len()
            )));
        }
        if spectra.iter().any(|s| s.len() != d || s.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidInput(format!("bad spectrum in class {class}")));
        }
        spectra.sort_by(|a, b| {
            a.iter()
                .map(|v| v.to_bits())
                .cmp(b.iter().map(|v| v.to_bits()))
        });
        let n = spectra.len() as f64;
        let mut mean = vec![0f64; d];
        for s in &spectra {
            mean.iter_mut().zip(s.iter()).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut cov = vec![0f64; d * d];
        for s in &spectra {
            for a in 0..d {
                for b in 0..d {
                    cov[a * d + b] += (s[a] - mean[a]) * (s[b] - mean[b]);
                }
            }
        }
        cov.iter_mut().for_each(|c| *c /= n - 1.0);
        let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
        let ridge = (COVARIANCE_EPSILON * trace / d as f64).max(COVARIANCE_FLOOR);
        for i in 0..d {
            cov[i * d + i] += ridge;
        }
        params.push(ClassParams {
            label: class,
            mean,
            covariance: cov,
            prior,
        });
    }
    ClassifierModel::from_params(params)
}

/// Per-class posterior bands plus the argmax class map.
#[derive(Debug, Clone)]
pub struct Classification {
    /// One band per class, named after the class.
    pub probabilities: RasterGrid,
    /// Class codes (see [`LandCover::code`]); nodata where the input was.
    pub class_map: RasterGrid,
}

impl Classification {
    pub fn probability_band(&self, class: LandCover) -> Option<&[f32]> {
        self.probabilities
            .band_index(class.name())
            .map(|b| self.probabilities.band(b))
    }
}

pub fn classify_probabilities<C: ProbabilisticClassifier>(
    model: &C,
    raster: &RasterGrid,
) -> Result<Classification> {
    let d = model.dimension();
    if raster.band_count() != d {
        return Err(Error::InvalidInput(format!(
            "classifier expects {d} bands, raster has {}",
            raster.band_count()
        )));
    }
    let classes = model.classes();
    let k = classes.len();
    let g = *raster.geometry();
    let n = g.len();
    let per_pixel: Vec<Option<(Vec<f32>, usize)>> = par::map_range(n, |i| {
        if !raster.pixel_valid(i) {
            return None;
        }
        let mut x = vec![0f64; d];
        let mut p = vec![0f64; k];
        raster.spectrum_into(i, &mut x);
        model.posterior(&x, &mut p);
        let mut arg = 0;
        for (j, &v) in p.iter().enumerate() {
            if v > p[arg] {
                arg = j;
            }
        }
        Some((p.iter().map(|&v| v as f32).collect(), arg))
    });
    let mut probs = vec![f32::NAN; n * k];
    let mut codes = vec![f32::NAN; n];
    let mut any_invalid = false;
    for (i, px) in per_pixel.into_iter().enumerate() {
        match px {
            Some((p, arg)) => {
                for (j, v) in p.into_iter().enumerate() {
                    probs[j * n + i] = v;
                }
                codes[i] = classes[arg].code();
            }
            None => any_invalid = true,
        }
    }
    let nodata = any_invalid.then_some(f32::NAN);
    Ok(Classification {
        probabilities: RasterGrid::new(
            g,
            classes.iter().map(|c| c.name().to_string()).collect(),
            probs,
            nodata,
        )?,
        class_map: RasterGrid::new(g, vec!["class".into()], codes, nodata)?,
    })
}
