//! Long-format CSV reader: one row per observation with columns `id`, `time`,
//! `y` and any number of numeric covariates.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use cgalqr::model::{LongitudinalDataset, Observation, Subject};

use crate::error::{CliError, CliResult};

const REQUIRED: [&str; 3] = ["id", "time", "y"];

/// Reads a dataset from `path`. `cd4_scale`, when set, divides the `cd4`
/// column (e.g. 100 turns cells/mm³ into cells per 100 mm³).
pub fn ingest_csv(path: &Path, cd4_scale: Option<f64>) -> CliResult<LongitudinalDataset> {
    let file = std::fs::File::open(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    ingest_reader(file, cd4_scale).map_err(|e| CliError::new(e.kind, format!("{}: {}", path.display(), e.message)))
}

pub fn ingest_reader<R: Read>(r: R, cd4_scale: Option<f64>) -> CliResult<LongitudinalDataset> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = rd
        .headers()
        .map_err(|e| CliError::input(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(CliError::input("empty file"));
    }
    let col = |name: &str| header.iter().position(|h| h == name);
    let mut idx = [0usize; 3];
    for (k, name) in REQUIRED.iter().enumerate() {
        idx[k] = col(name).ok_or_else(|| CliError::input(format!("missing column '{name}'")))?;
    }
    let cov_cols: Vec<usize> = (0..header.len()).filter(|c| !idx.contains(c)).collect();
    let cov_names: Vec<String> = cov_cols.iter().map(|&c| header[c].clone()).collect();
    let cd4 = match cd4_scale {
        Some(s) if !(s > 0.0 && s.is_finite()) => {
            return Err(CliError::config(format!("cd4 scale must be positive, got {s}")))
        }
        Some(s) => {
            let k = cov_names
                .iter()
                .position(|n| n == "cd4")
                .ok_or_else(|| CliError::input("cd4 scale given but there is no 'cd4' column"))?;
            Some((k, s))
        }
        None => None,
    };

    let mut groups: BTreeMap<String, Vec<Observation>> = BTreeMap::new();
    let mut rows = 0usize;
    for rec in rd.records() {
        let rec = rec.map_err(|e| CliError::input(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |c: usize| -> CliResult<f64> {
            let s = rec.get(c).unwrap_or("");
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::input(format!("line {line}, column '{}': non-numeric value '{s}'", header[c])))
        };
        let id = rec.get(idx[0]).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(CliError::input(format!("line {line}: empty id")));
        }
        let mut covariates = cov_cols.iter().map(|&c| num(c)).collect::<CliResult<Vec<f64>>>()?;
        if let Some((k, s)) = cd4 {
            covariates[k] /= s;
        }
        groups.entry(id).or_default().push(Observation {
            t: num(idx[1])?,
            y: num(idx[2])?,
            covariates,
        });
        rows += 1;
    }
    if rows == 0 {
        return Err(CliError::input("empty file: no data rows"));
    }
    let subjects = groups
        .into_iter()
        .map(|(id, observations)| Subject { id, observations })
        .collect();
    let mut data = LongitudinalDataset::new(cov_names, subjects)?;
    data.canonicalize();
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ErrorKind;

    fn read(s: &str) -> CliResult<LongitudinalDataset> {
        ingest_reader(s.as_bytes(), None)
    }

    #[test]
    fn two_rows_one_subject() {
        let d = read("id,time,y\na,0,5.1\na,1,4.2\n").unwrap();
        assert_eq!(d.n_subjects(), 1);
        assert_eq!(d.n_obs(), 2);
        assert!(d.covariate_names.is_empty());
    }

    #[test]
    fn shuffled_rows_canonicalize() {
        let a = read("id,time,y,cd4\na,0,5,200\nb,0,6,300\na,2,3,210\nb,1,5,310\n").unwrap();
        let b = read("cd4,y,time,id\n310,5,1,b\n210,3,2,a\n300,6,0,b\n200,5,0,a\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.subjects[0].id, "a");
        assert_eq!(a.subjects[0].observations[1].t, 2.0);
    }

    #[test]
    fn cd4_scale_divides() {
        let d = ingest_reader("id,time,y,cd4\na,0,5,250\n".as_bytes(), Some(100.0)).unwrap();
        assert_eq!(d.subjects[0].observations[0].covariates, vec![2.5]);
        let e = ingest_reader("id,time,y\na,0,5\n".as_bytes(), Some(100.0)).unwrap_err();
        assert_eq!(e.kind, ErrorKind::Input);
    }

    #[test]
    fn errors() {
        let e = read("id,y\na,1\n").unwrap_err();
        assert!(e.message.contains("missing column 'time'"), "{e}");
        let e = read("id,time,y\na,0,5\na,1,oops\n").unwrap_err();
        assert!(e.message.contains("line 3"), "{e}");
        assert!(e.message.contains("'oops'"), "{e}");
        assert!(read("").unwrap_err().message.contains("empty"));
        assert!(read("id,time,y\n").unwrap_err().message.contains("no data rows"));
    }
}
