//! Spectral operations: PCA fusion baseline, per-pixel class probabilities,
//! the Landsat time-series water index and Otsu thresholding.

mod classifier;
mod otsu;
mod pca;
mod water_index;

pub use classifier::{
    classify_probabilities, fit_classifier, Classification, ClassifierModel,
    ProbabilisticClassifier, TrainingSample, TrainingSamples, COVARIANCE_EPSILON,
    COVARIANCE_FLOOR,
};
pub use otsu::{otsu_threshold, Histogram, OTSU_BINS};
pub use pca::{pca_fit, pca_fuse, PcaModel};
pub use water_index::{landsat_water_index, water_index_date, DEFAULT_SWIR_BANDS, DEFAULT_VISIBLE_BANDS};
