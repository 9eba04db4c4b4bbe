//! Count matrix parsing and CPM.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Integer gene x sample count matrix with per-sample library sizes.
#[derive(Debug, Clone)]
pub struct CountMatrix {
    pub gene_ids: Vec<String>,
    pub sample_ids: Vec<String>,
    /// genes x samples
    pub counts: Array2<u64>,
    /// column sums
    pub lib_sizes: Vec<u64>,
}

impl CountMatrix {
    /// Build from parts, computing library sizes and checking id uniqueness.
    pub fn new(gene_ids: Vec<String>, sample_ids: Vec<String>, counts: Array2<u64>) -> Result<Self> {
        assert_eq!(counts.nrows(), gene_ids.len());
        assert_eq!(counts.ncols(), sample_ids.len());
        let mut seen = HashSet::new();
        for id in &gene_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateGeneId {
                    path: "<memory>".into(),
                    line: 0,
                    id: id.clone(),
                });
            }
        }
        let mut seen = HashSet::new();
        for id in &sample_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateSampleId {
                    path: "<memory>".into(),
                    id: id.clone(),
                });
            }
        }
        let lib_sizes = column_sums(&counts);
        Ok(Self {
            gene_ids,
            sample_ids,
            counts,
            lib_sizes,
        })
    }

    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn gene_index(&self, id: &str) -> Option<usize> {
        self.gene_ids.iter().position(|g| g == id)
    }

    pub fn sample_index(&self, id: &str) -> Option<usize> {
        self.sample_ids.iter().position(|s| s == id)
    }

    /// New matrix keeping the given sample columns (order preserved).
    pub fn select_samples(&self, keep: &[usize]) -> Self {
        let sample_ids = keep.iter().map(|&j| self.sample_ids[j].clone()).collect();
        let mut counts = Array2::<u64>::zeros((self.n_genes(), keep.len()));
        for (new_j, &j) in keep.iter().enumerate() {
            counts.column_mut(new_j).assign(&self.counts.column(j));
        }
        let lib_sizes = keep.iter().map(|&j| self.lib_sizes[j]).collect();
        Self {
            gene_ids: self.gene_ids.clone(),
            sample_ids,
            counts,
            lib_sizes,
        }
    }

    /// New matrix keeping the given gene rows (order preserved).
    pub fn select_genes(&self, keep: &[usize]) -> Self {
        let gene_ids = keep.iter().map(|&i| self.gene_ids[i].clone()).collect();
        let mut counts = Array2::<u64>::zeros((keep.len(), self.n_samples()));
        for (new_i, &i) in keep.iter().enumerate() {
            counts.row_mut(new_i).assign(&self.counts.row(i));
        }
        let lib_sizes = column_sums(&counts);
        Self {
            gene_ids,
            sample_ids: self.sample_ids.clone(),
            counts,
            lib_sizes,
        }
    }
}

fn column_sums(counts: &Array2<u64>) -> Vec<u64> {
    (0..counts.ncols())
        .map(|j| counts.column(j).iter().sum())
        .collect()
}

/// Parse a counts TSV: header `gene_id` + sample ids, body rows gene id + integers.
pub fn load_counts(path: impl AsRef<Path>) -> Result<CountMatrix> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();

    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(Error::EmptyFile { path: shown }),
    };
    let mut cols = header.split('\t');
    let first = cols.next().unwrap_or("");
    if first != "gene_id" {
        return Err(Error::InvalidField {
            path: shown,
            line: 1,
            field: "header",
            value: first.to_string(),
        });
    }
    let sample_ids: Vec<String> = cols.map(str::to_string).collect();
    let mut seen = HashSet::new();
    for id in &sample_ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateSampleId {
                path: shown.clone(),
                id: id.clone(),
            });
        }
    }
    let n_samples = sample_ids.len();

    let mut gene_ids = Vec::new();
    let mut seen_genes = HashSet::new();
    let mut values: Vec<u64> = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let lineno = idx + 2;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != n_samples + 1 {
            return Err(Error::RaggedRow {
                path: shown.clone(),
                line: lineno,
                expected: n_samples + 1,
                found: fields.len(),
            });
        }
        let gene = fields[0].to_string();
        if !seen_genes.insert(gene.clone()) {
            return Err(Error::DuplicateGeneId {
                path: shown.clone(),
                line: lineno,
                id: gene,
            });
        }
        for raw in &fields[1..] {
            if raw.starts_with('-') {
                return Err(Error::NegativeCount {
                    path: shown.clone(),
                    line: lineno,
                    value: raw.to_string(),
                });
            }
            let v: u64 = raw.parse().map_err(|_| Error::InvalidField {
                path: shown.clone(),
                line: lineno,
                field: "count",
                value: raw.to_string(),
            })?;
            values.push(v);
        }
        gene_ids.push(gene);
    }
    if gene_ids.is_empty() {
        return Err(Error::EmptyFile { path: shown });
    }
    let counts = Array2::from_shape_vec((gene_ids.len(), n_samples), values)
        .expect("row-major values match dimensions");
    CountMatrix::new(gene_ids, sample_ids, counts)
}

/// Write the matrix back in the `load_counts` format.
pub fn write_counts(m: &CountMatrix, mut w: impl Write) -> std::io::Result<()> {
    write!(w, "gene_id")?;
    for s in &m.sample_ids {
        write!(w, "\t{s}")?;
    }
    writeln!(w)?;
    for (i, g) in m.gene_ids.iter().enumerate() {
        write!(w, "{g}")?;
        for j in 0..m.n_samples() {
            write!(w, "\t{}", m.counts[(i, j)])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Counts per million with a prior count: `1e6 * (count + prior) / (lib_size * factor)`.
///
/// `factors` are per-sample normalization factors (1.0 when unnormalized);
/// the prior keeps downstream log fold changes finite.
pub fn cpm(m: &CountMatrix, factors: &[f64], prior: f64) -> Result<Array2<f64>> {
    assert_eq!(factors.len(), m.n_samples());
    assert!(prior >= 0.0);
    let mut eff = Vec::with_capacity(m.n_samples());
    for (j, &f) in factors.iter().enumerate() {
        let l = m.lib_sizes[j] as f64 * f;
        if !(l > 0.0) {
            return Err(Error::ZeroLibSize(m.sample_ids[j].clone()));
        }
        eff.push(l);
    }
    let mut out = Array2::<f64>::zeros((m.n_genes(), m.n_samples()));
    for i in 0..m.n_genes() {
        for j in 0..m.n_samples() {
            out[(i, j)] = 1e6 * (m.counts[(i, j)] as f64 + prior) / eff[j];
        }
    }
    Ok(out)
}

pub const DEFAULT_CPM_PRIOR: f64 = 0.5;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::io::Write as _;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn lib_sizes_are_column_sums() {
        let f = write_tmp("gene_id\tS1\tS2\ng1\t1\t2\ng2\t3\t4\n");
        let m = load_counts(f.path()).unwrap();
        assert_eq!(m.lib_sizes, vec![4, 6]);
        assert_eq!(m.gene_ids, vec!["g1", "g2"]);
        assert_eq!(m.counts[(1, 0)], 3);
    }

    #[test]
    fn duplicate_sample_column_rejected() {
        let f = write_tmp("gene_id\tS1\tS1\ng1\t1\t2\n");
        match load_counts(f.path()) {
            Err(Error::DuplicateSampleId { id, .. }) => assert_eq!(id, "S1"),
            other => panic!("expected DuplicateSampleId, got {other:?}"),
        }
    }

    #[test]
    fn negative_count_names_line() {
        let f = write_tmp("gene_id\tS1\ng1\t1\ng2\t2\ng3\t3\ng4\t4\ng5\t-3\n");
        match load_counts(f.path()) {
            Err(Error::NegativeCount { line, .. }) => assert_eq!(line, 6),
            other => panic!("expected NegativeCount, got {other:?}"),
        }
    }

    #[test]
    fn ragged_row_names_line() {
        let f = write_tmp("gene_id\tS1\tS2\ng1\t1\t2\ng2\t3\n");
        match load_counts(f.path()) {
            Err(Error::RaggedRow { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected RaggedRow, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_rejected() {
        let f = write_tmp("");
        assert!(matches!(load_counts(f.path()), Err(Error::EmptyFile { .. })));
    }

    #[test]
    fn duplicate_gene_rejected() {
        let f = write_tmp("gene_id\tS1\ng1\t1\ng1\t2\n");
        assert!(matches!(
            load_counts(f.path()),
            Err(Error::DuplicateGeneId { line: 3, .. })
        ));
    }

    #[test]
    fn cpm_definition() {
        let counts = Array2::from_shape_vec((2, 1), vec![10u64, 0]).unwrap();
        let mut m = CountMatrix::new(vec!["a".into(), "b".into()], vec!["s".into()], counts).unwrap();
        m.lib_sizes = vec![1_000_000];
        let c0 = cpm(&m, &[1.0], 0.0).unwrap();
        assert_abs_diff_eq!(c0[(0, 0)], 10.0, epsilon = 1e-12);
        let c1 = cpm(&m, &[1.0], 0.5).unwrap();
        assert_abs_diff_eq!(c1[(1, 0)], 0.5, epsilon = 1e-12);
        // count 10, L = 2e6, prior 0.5 -> 1e6 * 10.5 / 2e6 = 5.25
        let c2 = cpm(&m, &[2.0], 0.5).unwrap();
        assert_abs_diff_eq!(c2[(0, 0)], 5.25, epsilon = 1e-12);
    }

    #[test]
    fn round_trip_identity() {
        let f = write_tmp("gene_id\tS1\tS2\ng1\t5\t0\ng2\t7\t9\n");
        let m = load_counts(f.path()).unwrap();
        let mut buf = Vec::new();
        write_counts(&m, &mut buf).unwrap();
        let f2 = write_tmp(std::str::from_utf8(&buf).unwrap());
        let m2 = load_counts(f2.path()).unwrap();
        assert_eq!(m.gene_ids, m2.gene_ids);
        assert_eq!(m.sample_ids, m2.sample_ids);
        assert_eq!(m.counts, m2.counts);
        assert_eq!(m.lib_sizes, m2.lib_sizes);
    }
}
