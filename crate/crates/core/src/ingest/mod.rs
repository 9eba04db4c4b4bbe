//! Input parsing, CPM, and quality-control filters.

mod counts;
mod meta;
mod qc;

pub use counts::{cpm, load_counts, write_counts, CountMatrix, DEFAULT_CPM_PRIOR};
pub use meta::{
    load_clinical, load_meta, ClinicalRow, ClinicalTable, SampleMeta, SampleRow, Sex, CLINICAL_VARS,
};
pub use qc::{
    contamination_filter, pca_outliers, pca_scores, run_qc, zero_fraction_filter,
    ContaminatedSample, PcaOutlier, QcOptions, QcReport, DEFAULT_MARKER_MAX_FRACTION,
    DEFAULT_MAX_ZERO_FRACTION, DEFAULT_PCA_K_MADS,
};
