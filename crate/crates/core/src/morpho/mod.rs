//! Morphological profiles, K-Means segmentation and per-segment statistics.

mod kmeans;
mod profiles;
mod segments;

pub use kmeans::{kmeans, Features, KMeansResult, KMEANS_MAX_ITERATIONS, KMEANS_TOLERANCE};
pub use profiles::{
    closing, dilate, erode, morphological_profiles, opening, SeShape, StructuringElement,
    PROFILE_ELEMENTS,
};
pub use segments::{
    kmeans_segment, pan_water_probability, segment_stats, SegmentInputs, SegmentMap,
    SegmentRecord,
};
