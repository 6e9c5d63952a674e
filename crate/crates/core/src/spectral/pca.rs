use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::par;
use crate::raster::{resample_nearest, RasterGrid};

/// Principal components of a multi-band raster.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Row `i` is the `i`-th unit principal axis, by decreasing variance.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        for (o, axis) in out.iter_mut().zip(&self.components) {
            *o = axis
                .iter()
                .zip(x.iter().zip(&self.mean))
                .map(|(a, (v, m))| a * (v - m))
                .sum();
        }
    }

    pub fn inverse(&self, y: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.mean[j]
                + self
                    .components
                    .iter()
                    .zip(y)
                    .map(|(axis, c)| axis[j] * c)
                    .sum::<f64>();
        }
    }
}

fn valid_indices(raster: &RasterGrid) -> Vec<usize> {
    (0..raster.geometry().len())
        .filter(|&i| raster.pixel_valid(i))
        .collect()
}

/// Fits a PCA model to the valid pixels of `raster`.
///
/// Sums are accumulated per fixed-size chunk and combined in chunk order, so
/// the model is identical for any thread count.
pub fn pca_fit(raster: &RasterGrid) -> Result<PcaModel> {
    let d = raster.band_count();
    if d < 2 {
        return Err(Error::InvalidInput("PCA needs at least two bands".into()));
    }
    let valid = valid_indices(raster);
    if valid.len() < d {
        return Err(Error::InvalidInput(format!(
            "PCA needs at least {d} valid pixels, found {}",
            valid.len()
        )));
    }
    let n = valid.len() as f64;

    let partial_sums = par::chunked(valid.len(), |s, e| {
        let mut acc = vec![0f64; d];
        let mut x = vec![0f64; d];
        for &i in &valid[s..e] {
            raster.spectrum_into(i, &mut x);
            acc.iter_mut().zip(&x).for_each(|(a, v)| *a += v);
        }
        acc
    });
    let mut mean = vec![0f64; d];
    for p in &partial_sums {
        mean.iter_mut().zip(p).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let partial_scatter = par::chunked(valid.len(), |s, e| {
        let mut acc = vec![0f64; d * d];
        let mut x = vec![0f64; d];
        for &i in &valid[s..e] {
            raster.spectrum_into(i, &mut x);
            x.iter_mut().zip(&mean).for_each(|(v, m)| *v -= m);
            for a in 0..d {
                for b in a..d {
                    acc[a * d + b] += x[a] * x[b];
                }
            }
        }
        acc
    });
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for p in &partial_scatter {
        for a in 0..d {
            for b in a..d {
                cov[(a, b)] += p[a * d + b];
            }
        }
    }
    let denom = if valid.len() > 1 { n - 1.0 } else { 1.0 };
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(model_from_covariance(mean, cov))
}

fn model_from_covariance(mean: Vec<f64>, cov: DMatrix<f64>) -> PcaModel {
    let d = mean.len();
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut components = Vec::with_capacity(d);
    let mut explained_variance = Vec::with_capacity(d);
    for &k in &order {
        let mut axis: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        // Sign convention: the largest-magnitude coordinate is positive.
        let pivot = axis
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, v)| if v.abs() > best.1 { (i, v.abs()) } else { best })
            .0;
        if axis[pivot] < 0.0 {
            axis.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(axis);
        explained_variance.push(eig.eigenvalues[k].max(0.0));
    }
    PcaModel {
        mean,
        components,
        explained_variance,
    }
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let sum: f64 = par::chunked(values.len(), |s, e| values[s..e].iter().sum::<f64>())
        .into_iter()
        .sum();
    let mean = sum / n;
    let ss: f64 = par::chunked(values.len(), |s, e| {
        values[s..e].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
    })
    .into_iter()
    .sum();
    (mean, (ss / n).sqrt())
}

/// PCA component-substitution fusion.
///
/// MS is upsampled to the PAN grid by nearest neighbor, PCA-transformed, its
/// first component is replaced by PAN rescaled to the component's mean and
/// standard deviation, and the result is inverse-transformed.
pub fn pca_fuse(ms: &RasterGrid, pan: &RasterGrid) -> Result<RasterGrid> {
    pan.require_single_band("PAN")?;
    let grid = *pan.geometry();
    let up = resample_nearest(ms, &grid)?;
    let model = pca_fit(&up)?;
    let d = up.band_count();
    let n = grid.len();

    let valid: Vec<usize> = (0..n)
        .filter(|&i| up.pixel_valid(i) && pan.pixel_valid(i))
        .collect();
    let pc1: Vec<f64> = par::map_range(valid.len(), |k| {
        let mut x = vec![0f64; d];
        up.spectrum_into(valid[k], &mut x);
        model.components[0]
            .iter()
            .zip(x.iter().zip(&model.mean))
            .map(|(a, (v, m))| a * (v - m))
            .sum()
    });
    let pan_vals: Vec<f64> = valid.iter().map(|&i| pan.band(0)[i] as f64).collect();
    let (pc_mean, pc_std) = mean_and_std(&pc1);
    let (pan_mean, pan_std) = mean_and_std(&pan_vals);
    if pan_std == 0.0 || !pan_std.is_finite() {
        return Err(Error::Degenerate(
            "PAN has zero variance and cannot be matched to the first component".into(),
        ));
    }
    let gain = pc_std / pan_std;

    let fill = up.nodata().unwrap_or(f32::NAN);
    let mut pixels = vec![fill; n * d];
    let fused: Vec<Vec<f32>> = par::map_range(valid.len(), |k| {
        let i = valid[k];
        let mut x = vec![0f64; d];
        let mut y = vec![0f64; d];
        up.spectrum_into(i, &mut x);
        model.forward(&x, &mut y);
        y[0] = (pan_vals[k] - pan_mean) * gain + pc_mean;
        model.inverse(&y, &mut x);
        x.iter().map(|&v| v as f32).collect()
    });
    for (k, spectrum) in fused.iter().enumerate() {
        for (b, &v) in spectrum.iter().enumerate() {
            pixels[b * n + valid[k]] = v;
        }
    }
    let nodata = (valid.len() < n).then_some(fill);
    RasterGrid::new(grid, up.band_names().to_vec(), pixels, nodata)
}
