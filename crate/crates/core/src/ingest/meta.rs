//! Sample metadata and clinical tables.

use std::collections::HashSet;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sex {
    Male,
    Female,
}

/// One row per sequenced sample: design variables for the paired analyses.
#[derive(Debug, Clone)]
pub struct SampleRow {
    pub sample_id: String,
    pub subject_id: String,
    /// clinical investigation day, 1..=3
    pub cid: u8,
    pub center: String,
    pub sex: Sex,
    pub age: f64,
    pub batch: String,
}

#[derive(Debug, Clone, Default)]
pub struct SampleMeta {
    pub rows: Vec<SampleRow>,
}

impl SampleMeta {
    pub fn find(&self, sample_id: &str) -> Option<&SampleRow> {
        self.rows.iter().find(|r| r.sample_id == sample_id)
    }

    /// Check that every count-matrix sample has exactly one metadata row.
    pub fn validate_against(&self, sample_ids: &[String]) -> Result<()> {
        for id in sample_ids {
            let n = self.rows.iter().filter(|r| &r.sample_id == id).count();
            if n != 1 {
                return Err(Error::MissingMeta(id.clone()));
            }
        }
        Ok(())
    }
}

/// `meta.tsv`: sample_id, subject_id, cid, center, sex, age, batch.
pub fn load_meta(path: impl AsRef<Path>) -> Result<SampleMeta> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();

    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(Error::EmptyFile { path: shown }),
    };
    let expect = ["sample_id", "subject_id", "cid", "center", "sex", "age", "batch"];
    let got: Vec<&str> = header.split('\t').collect();
    if got != expect {
        return Err(Error::InvalidField {
            path: shown,
            line: 1,
            field: "header",
            value: header.clone(),
        });
    }

    let mut rows = Vec::new();
    let mut seen_samples = HashSet::new();
    let mut seen_subject_cid = HashSet::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let lineno = idx + 2;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != expect.len() {
            return Err(Error::RaggedRow {
                path: shown.clone(),
                line: lineno,
                expected: expect.len(),
                found: f.len(),
            });
        }
        if !seen_samples.insert(f[0].to_string()) {
            return Err(Error::DuplicateSampleId {
                path: shown.clone(),
                id: f[0].to_string(),
            });
        }
        let cid: u8 = f[2].parse().map_err(|_| Error::InvalidField {
            path: shown.clone(),
            line: lineno,
            field: "cid",
            value: f[2].to_string(),
        })?;
        if !(1..=3).contains(&cid) {
            return Err(Error::InvalidField {
                path: shown.clone(),
                line: lineno,
                field: "cid",
                value: f[2].to_string(),
            });
        }
        if !seen_subject_cid.insert((f[1].to_string(), cid)) {
            return Err(Error::DuplicateSubjectCid {
                path: shown.clone(),
                line: lineno,
                subject: f[1].to_string(),
                cid,
            });
        }
        let sex = match f[4] {
            "M" => Sex::Male,
            "F" => Sex::Female,
            other => {
                return Err(Error::InvalidField {
                    path: shown.clone(),
                    line: lineno,
                    field: "sex",
                    value: other.to_string(),
                })
            }
        };
        let age: f64 = f[5].parse().map_err(|_| Error::InvalidField {
            path: shown.clone(),
            line: lineno,
            field: "age",
            value: f[5].to_string(),
        })?;
        rows.push(SampleRow {
            sample_id: f[0].to_string(),
            subject_id: f[1].to_string(),
            cid,
            center: f[3].to_string(),
            sex,
            age,
            batch: f[6].to_string(),
        });
    }
    Ok(SampleMeta { rows })
}

/// The clinical variables tracked per subject and timepoint, in file order.
pub const CLINICAL_VARS: [&str; 6] = ["bmi", "homa_ir", "total_chol", "ldl", "hdl", "waist"];

/// Per-subject-per-timepoint clinical values; `None` is a missing value.
#[derive(Debug, Clone)]
pub struct ClinicalRow {
    pub subject_id: String,
    pub cid: u8,
    pub values: [Option<f64>; 6],
}

#[derive(Debug, Clone, Default)]
pub struct ClinicalTable {
    pub rows: Vec<ClinicalRow>,
}

impl ClinicalTable {
    pub fn get(&self, subject_id: &str, cid: u8, var: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.subject_id == subject_id && r.cid == cid)
            .and_then(|r| r.values[var])
    }

    pub fn var_index(var: &str) -> Option<usize> {
        CLINICAL_VARS.iter().position(|v| *v == var)
    }
}

/// `clinical.tsv`: subject_id, cid, then the six clinical variables; `NA` = missing.
pub fn load_clinical(path: impl AsRef<Path>) -> Result<ClinicalTable> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();

    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(Error::EmptyFile { path: shown }),
    };
    let mut expect = vec!["subject_id", "cid"];
    expect.extend(CLINICAL_VARS);
    let got: Vec<&str> = header.split('\t').collect();
    if got != expect {
        return Err(Error::InvalidField {
            path: shown,
            line: 1,
            field: "header",
            value: header.clone(),
        });
    }

    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let lineno = idx + 2;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != expect.len() {
            return Err(Error::RaggedRow {
                path: shown.clone(),
                line: lineno,
                expected: expect.len(),
                found: f.len(),
            });
        }
        let cid: u8 = f[1].parse().map_err(|_| Error::InvalidField {
            path: shown.clone(),
            line: lineno,
            field: "cid",
            value: f[1].to_string(),
        })?;
        if !seen.insert((f[0].to_string(), cid)) {
            return Err(Error::DuplicateSubjectCid {
                path: shown.clone(),
                line: lineno,
                subject: f[0].to_string(),
                cid,
            });
        }
        let mut values = [None; 6];
        for (k, raw) in f[2..].iter().enumerate() {
            if *raw == "NA" {
                continue;
            }
            let v: f64 = raw.parse().map_err(|_| Error::InvalidField {
                path: shown.clone(),
                line: lineno,
                field: "clinical value",
                value: raw.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::InvalidField {
                    path: shown.clone(),
                    line: lineno,
                    field: "clinical value",
                    value: raw.to_string(),
                });
            }
            if k == 0 && v <= 0.0 {
                return Err(Error::InvalidField {
                    path: shown.clone(),
                    line: lineno,
                    field: "bmi",
                    value: raw.to_string(),
                });
            }
            values[k] = Some(v);
        }
        rows.push(ClinicalRow {
            subject_id: f[0].to_string(),
            cid,
            values,
        });
    }
    Ok(ClinicalTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn meta_parses_and_validates() {
        let f = write_tmp(
            "sample_id\tsubject_id\tcid\tcenter\tsex\tage\tbatch\n\
             s1\tp1\t1\tC1\tM\t40\tplate1\n\
             s2\tp1\t2\tC1\tM\t40\tplate1\n",
        );
        let meta = load_meta(f.path()).unwrap();
        assert_eq!(meta.rows.len(), 2);
        assert!(meta.validate_against(&["s1".into(), "s2".into()]).is_ok());
        assert!(meta.validate_against(&["s3".into()]).is_err());
    }

    #[test]
    fn duplicate_subject_cid_rejected() {
        let f = write_tmp(
            "sample_id\tsubject_id\tcid\tcenter\tsex\tage\tbatch\n\
             s1\tp1\t1\tC1\tM\t40\tplate1\n\
             s2\tp1\t1\tC1\tM\t40\tplate1\n",
        );
        assert!(matches!(
            load_meta(f.path()),
            Err(Error::DuplicateSubjectCid { .. })
        ));
    }

    #[test]
    fn clinical_missing_values() {
        let f = write_tmp(
            "subject_id\tcid\tbmi\thoma_ir\ttotal_chol\tldl\thdl\twaist\n\
             p1\t1\t34.5\tNA\t5.0\t3.1\t1.2\t105\n",
        );
        let t = load_clinical(f.path()).unwrap();
        assert_eq!(t.get("p1", 1, 0), Some(34.5));
        assert_eq!(t.get("p1", 1, 1), None);
        assert_eq!(ClinicalTable::var_index("waist"), Some(5));
    }

    #[test]
    fn nonpositive_bmi_rejected() {
        let f = write_tmp(
            "subject_id\tcid\tbmi\thoma_ir\ttotal_chol\tldl\thdl\twaist\n\
             p1\t1\t0\tNA\tNA\tNA\tNA\tNA\n",
        );
        assert!(load_clinical(f.path()).is_err());
    }
}
