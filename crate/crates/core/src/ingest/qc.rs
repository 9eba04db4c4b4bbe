//! Sample- and gene-level quality control.
//!
//! All flag sets are computed on the original matrix and intersected at the
//! end, so the composition of filters does not depend on their order.

use std::collections::BTreeSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::counts::CountMatrix;
use crate::stats::{mad, median};

pub const DEFAULT_MARKER_MAX_FRACTION: f64 = 0.20;
pub const DEFAULT_PCA_K_MADS: f64 = 6.0;
pub const DEFAULT_MAX_ZERO_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaOutlier {
    pub sample_id: String,
    pub pc1: f64,
    pub pc2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContaminatedSample {
    pub sample_id: String,
    pub fraction: f64,
}

/// Which samples were flagged, by which rule, and what survives.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct QcReport {
    pub flagged_pca_outliers: Vec<PcaOutlier>,
    pub flagged_contaminated: Vec<ContaminatedSample>,
    pub excluded_batches: Vec<String>,
    pub excluded_samples: Vec<String>,
    pub retained_samples: Vec<String>,
    pub retained_genes: Vec<String>,
}

/// Flag samples whose marker-gene share of total counts exceeds `max_fraction`.
pub fn contamination_filter(
    m: &CountMatrix,
    marker_gene: &str,
    max_fraction: f64,
) -> Result<Vec<ContaminatedSample>> {
    if !(0.0 < max_fraction && max_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "contamination max_fraction must be in (0, 1), got {max_fraction}"
        )));
    }
    let gi = m
        .gene_index(marker_gene)
        .ok_or_else(|| Error::MarkerAbsent(marker_gene.to_string()))?;
    let mut flagged = Vec::new();
    for j in 0..m.n_samples() {
        let lib = m.lib_sizes[j];
        if lib == 0 {
            continue;
        }
        let fraction = m.counts[(gi, j)] as f64 / lib as f64;
        if fraction > max_fraction {
            flagged.push(ContaminatedSample {
                sample_id: m.sample_ids[j].clone(),
                fraction,
            });
        }
    }
    Ok(flagged)
}

/// First two principal components of the log2(count+1) sample x gene matrix.
///
/// Scores are SVD-based (power iteration with deflation on the sample Gram
/// matrix); each component's sign is fixed so its largest-magnitude gene
/// loading is positive.
pub fn pca_scores(m: &CountMatrix) -> Result<Vec<(f64, f64)>> {
    let n = m.n_samples();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, found: n });
    }
    let p = m.n_genes();
    // centered sample x gene matrix of log2(count + 1)
    let mut x = Array2::<f64>::zeros((n, p));
    for i in 0..p {
        for j in 0..n {
            x[(j, i)] = (m.counts[(i, j)] as f64 + 1.0).log2();
        }
    }
    for i in 0..p {
        let col_mean: f64 = (0..n).map(|j| x[(j, i)]).sum::<f64>() / n as f64;
        for j in 0..n {
            x[(j, i)] -= col_mean;
        }
    }
    let gram = x.dot(&x.t());
    let total: f64 = (0..n).map(|j| gram[(j, j)]).sum();
    if total <= 1e-12 {
        // no variance at all: every score is zero
        return Ok(vec![(0.0, 0.0); n]);
    }

    let mut scores = vec![(0.0, 0.0); n];
    let mut deflated = gram.clone();
    for comp in 0..2 {
        let (eigval, u) = top_eigen(&deflated);
        if eigval <= 1e-12 * total {
            break;
        }
        // gene loading vector v = X'u / sigma decides the sign convention
        let v = x.t().dot(&u);
        let mut max_abs = 0.0;
        let mut max_val = 0.0;
        for &l in v.iter() {
            if l.abs() > max_abs {
                max_abs = l.abs();
                max_val = l;
            }
        }
        let sign = if max_val < 0.0 { -1.0 } else { 1.0 };
        let sigma = eigval.sqrt();
        for j in 0..n {
            let s = sign * u[j] * sigma;
            if comp == 0 {
                scores[j].0 = s;
            } else {
                scores[j].1 = s;
            }
        }
        // deflate: G <- G - eigval * u u'
        for a in 0..n {
            for b in 0..n {
                deflated[(a, b)] -= eigval * u[a] * u[b];
            }
        }
    }
    Ok(scores)
}

/// Power iteration for the dominant eigenpair of a symmetric PSD matrix.
fn top_eigen(g: &Array2<f64>) -> (f64, ndarray::Array1<f64>) {
    let n = g.nrows();
    // deterministic start with unequal entries so we are never orthogonal
    // to the dominant eigenvector by symmetry
    let mut u = ndarray::Array1::from_iter((0..n).map(|j| 1.0 + (j as f64 + 1.0).sqrt() * 1e-3));
    let norm = u.dot(&u).sqrt();
    u.mapv_inplace(|v| v / norm);
    let mut eigval = 0.0;
    for _ in 0..500 {
        let w = g.dot(&u);
        let norm = w.dot(&w).sqrt();
        if norm <= 1e-300 {
            return (0.0, u);
        }
        let next = w / norm;
        let new_eigval = next.dot(&g.dot(&next));
        let delta = (next.iter().zip(u.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sqrt();
        u = next;
        eigval = new_eigval;
        if delta < 1e-12 {
            break;
        }
    }
    (eigval, u)
}

/// Flag samples more than `k_mads` MADs from the median on PC1 or PC2.
pub fn pca_outliers(m: &CountMatrix, k_mads: f64) -> Result<Vec<PcaOutlier>> {
    let scores = pca_scores(m)?;
    let pc1: Vec<f64> = scores.iter().map(|s| s.0).collect();
    let pc2: Vec<f64> = scores.iter().map(|s| s.1).collect();
    let (m1, d1) = (median(&pc1), mad(&pc1));
    let (m2, d2) = (median(&pc2), mad(&pc2));
    let mut flagged = Vec::new();
    for (j, &(s1, s2)) in scores.iter().enumerate() {
        if (s1 - m1).abs() > k_mads * d1 || (s2 - m2).abs() > k_mads * d2 {
            flagged.push(PcaOutlier {
                sample_id: m.sample_ids[j].clone(),
                pc1: s1,
                pc2: s2,
            });
        }
    }
    Ok(flagged)
}

/// Gene retained iff its zero fraction over samples is at most `max_zero_frac`.
pub fn zero_fraction_filter(m: &CountMatrix, max_zero_frac: f64) -> Vec<bool> {
    assert!((0.0..=1.0).contains(&max_zero_frac));
    let n = m.n_samples() as f64;
    (0..m.n_genes())
        .map(|i| {
            let zeros = (0..m.n_samples()).filter(|&j| m.counts[(i, j)] == 0).count();
            zeros as f64 / n <= max_zero_frac
        })
        .collect()
}

/// Options for the combined sample/gene QC pass.
#[derive(Debug, Clone)]
pub struct QcOptions {
    /// Marker gene for the contamination rule; `None` disables the rule.
    pub marker_gene: Option<String>,
    pub marker_max_fraction: f64,
    pub pca_k_mads: f64,
    pub max_zero_fraction: f64,
    pub exclude_batches: Vec<String>,
    /// Explicit manual exclusions (reproduces curation by inspection).
    pub exclude_samples: Vec<String>,
}

impl Default for QcOptions {
    fn default() -> Self {
        Self {
            marker_gene: None,
            marker_max_fraction: DEFAULT_MARKER_MAX_FRACTION,
            pca_k_mads: DEFAULT_PCA_K_MADS,
            max_zero_fraction: DEFAULT_MAX_ZERO_FRACTION,
            exclude_batches: Vec::new(),
            exclude_samples: Vec::new(),
        }
    }
}

/// Run every enabled filter on the original matrix, then intersect the flag
/// sets. Returns the report plus the filtered matrix.
pub fn run_qc(
    m: &CountMatrix,
    meta: &crate::ingest::meta::SampleMeta,
    opts: &QcOptions,
) -> Result<(QcReport, CountMatrix)> {
    meta.validate_against(&m.sample_ids)?;

    let flagged_contaminated = match &opts.marker_gene {
        Some(g) => contamination_filter(m, g, opts.marker_max_fraction)?,
        None => Vec::new(),
    };
    let flagged_pca = pca_outliers(m, opts.pca_k_mads)?;

    let mut dropped: BTreeSet<String> = BTreeSet::new();
    dropped.extend(flagged_contaminated.iter().map(|c| c.sample_id.clone()));
    dropped.extend(flagged_pca.iter().map(|o| o.sample_id.clone()));
    dropped.extend(opts.exclude_samples.iter().cloned());
    for row in &meta.rows {
        if opts.exclude_batches.contains(&row.batch) {
            dropped.insert(row.sample_id.clone());
        }
    }

    let keep: Vec<usize> = (0..m.n_samples())
        .filter(|&j| !dropped.contains(&m.sample_ids[j]))
        .collect();
    let filtered = m.select_samples(&keep);

    let gene_mask = zero_fraction_filter(&filtered, opts.max_zero_fraction);
    let keep_genes: Vec<usize> = (0..filtered.n_genes()).filter(|&i| gene_mask[i]).collect();
    let filtered = filtered.select_genes(&keep_genes);

    let report = QcReport {
        flagged_pca_outliers: flagged_pca,
        flagged_contaminated,
        excluded_batches: opts.exclude_batches.clone(),
        excluded_samples: opts.exclude_samples.clone(),
        retained_samples: filtered.sample_ids.clone(),
        retained_genes: filtered.gene_ids.clone(),
    };
    Ok((report, filtered))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn matrix(genes: usize, samples: usize, f: impl Fn(usize, usize) -> u64) -> CountMatrix {
        let gene_ids = (0..genes).map(|i| format!("g{i}")).collect();
        let sample_ids = (0..samples).map(|j| format!("s{j}")).collect();
        let counts = Array2::from_shape_fn((genes, samples), |(i, j)| f(i, j));
        CountMatrix::new(gene_ids, sample_ids, counts).unwrap()
    }

    #[test]
    fn contamination_flags_over_threshold() {
        // sample 0: marker share 0.25; sample 1: zero marker
        let m = matrix(2, 2, |i, j| match (i, j) {
            (0, 0) => 25,
            (1, 0) => 75,
            (0, 1) => 0,
            (1, 1) => 100,
            _ => unreachable!(),
        });
        let flagged = contamination_filter(&m, "g0", 0.20).unwrap();
        assert_eq!(flagged.len(), 1);
        assert_eq!(flagged[0].sample_id, "s0");
        assert!((flagged[0].fraction - 0.25).abs() < 1e-12);
    }

    #[test]
    fn contamination_marker_absent() {
        let m = matrix(2, 2, |_, _| 1);
        assert!(matches!(
            contamination_filter(&m, "HBB", 0.2),
            Err(Error::MarkerAbsent(_))
        ));
    }

    #[test]
    fn pca_identical_samples_no_flags() {
        let m = matrix(5, 20, |i, _| (i as u64 + 1) * 10);
        let flagged = pca_outliers(&m, 6.0).unwrap();
        assert!(flagged.is_empty());
    }

    #[test]
    fn pca_too_few_samples() {
        let m = matrix(5, 2, |_, _| 1);
        assert!(matches!(
            pca_outliers(&m, 6.0),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn zero_fraction_boundary_is_strict_more_than() {
        // gene 0: 26 zeros of 100 -> removed; gene 1: 25 zeros -> retained
        let m = matrix(3, 100, |i, j| match i {
            0 => u64::from(j >= 26),
            1 => u64::from(j >= 25),
            _ => 7,
        });
        let mask = zero_fraction_filter(&m, 0.25);
        assert_eq!(mask, vec![false, true, true]);
    }

    #[test]
    fn filter_composition_is_order_independent() {
        use crate::ingest::meta::{SampleMeta, SampleRow, Sex};
        let m = matrix(6, 10, |i, j| {
            if j == 3 {
                // heavily contaminated sample
                if i == 0 {
                    900
                } else {
                    20
                }
            } else {
                40 + (i as u64) * 3
            }
        });
        let meta = SampleMeta {
            rows: (0..10)
                .map(|j| SampleRow {
                    sample_id: format!("s{j}"),
                    subject_id: format!("p{j}"),
                    cid: 1,
                    center: "C".into(),
                    sex: Sex::Female,
                    age: 40.0,
                    batch: if j < 5 { "b0".into() } else { "b1".into() },
                })
                .collect(),
        };
        let opts = QcOptions {
            marker_gene: Some("g0".into()),
            exclude_batches: vec!["b1".into()],
            ..QcOptions::default()
        };
        let (report, filtered) = run_qc(&m, &meta, &opts).unwrap();
        // flags computed on the original matrix then intersected: s3 gone
        // (contamination), s5..s9 gone (batch), retained = s0,s1,s2,s4
        assert_eq!(report.retained_samples, vec!["s0", "s1", "s2", "s4"]);
        assert_eq!(filtered.n_samples(), 4);
        for f in &report.flagged_contaminated {
            assert!(!report.retained_samples.contains(&f.sample_id));
        }
    }
}
