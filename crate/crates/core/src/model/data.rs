use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One measurement: time in days, response and covariate values aligned with
/// [`LongitudinalDataset::covariate_names`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: f64,
    pub y: f64,
    pub covariates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub id: String,
    pub observations: Vec<Observation>,
}

/// Subjects measured on irregular time grids.
///
/// CD4 counts, when present, are expected in cells per 100 mm³.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalDataset {
    pub covariate_names: Vec<String>,
    pub subjects: Vec<Subject>,
}

impl LongitudinalDataset {
    pub fn new(covariate_names: Vec<String>, subjects: Vec<Subject>) -> Result<Self> {
        let data = Self {
            covariate_names,
            subjects,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        if self.subjects.is_empty() {
            return Err(Error::InvalidData("dataset has no subjects".into()));
        }
        let k = self.covariate_names.len();
        for s in &self.subjects {
            if s.observations.is_empty() {
                return Err(Error::InvalidData(format!("subject '{}' has no observations", s.id)));
            }
            for (j, o) in s.observations.iter().enumerate() {
                if !(o.t >= 0.0) || !o.t.is_finite() {
                    return Err(Error::InvalidData(format!(
                        "subject '{}' observation {j}: time must be finite and >= 0, got {}",
                        s.id, o.t
                    )));
                }
                if !o.y.is_finite() {
                    return Err(Error::InvalidData(format!(
                        "subject '{}' observation {j}: response is not finite",
                        s.id
                    )));
                }
                if o.covariates.len() != k {
                    return Err(Error::DimensionMismatch {
                        expected: k,
                        got: o.covariates.len(),
                    });
                }
                if o.covariates.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidData(format!(
                        "subject '{}' observation {j}: covariate is not finite",
                        s.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn n_obs(&self) -> usize {
        self.subjects.iter().map(|s| s.observations.len()).sum()
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|c| c == name)
    }

    /// Sorts each subject's observations by time and subjects by id.
    pub fn canonicalize(&mut self) {
        self.subjects.sort_by(|a, b| a.id.cmp(&b.id));
        for s in &mut self.subjects {
            s.observations.sort_by(|a, b| a.t.total_cmp(&b.t));
        }
    }

    /// `(subject index, observation index)` in storage order.
    pub fn positions(&self) -> Vec<(usize, usize)> {
        self.subjects
            .iter()
            .enumerate()
            .flat_map(|(i, s)| (0..s.observations.len()).map(move |j| (i, j)))
            .collect()
    }

    /// Copy with only the listed subjects.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            covariate_names: self.covariate_names.clone(),
            subjects: indices.iter().map(|&i| self.subjects[i].clone()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(t: f64, y: f64) -> Observation {
        Observation {
            t,
            y,
            covariates: vec![],
        }
    }

    #[test]
    fn rejects_empty_and_bad_values() {
        assert!(LongitudinalDataset::new(vec![], vec![]).is_err());
        let s = Subject {
            id: "a".into(),
            observations: vec![],
        };
        assert!(LongitudinalDataset::new(vec![], vec![s]).is_err());
        let s = Subject {
            id: "a".into(),
            observations: vec![obs(-1.0, 1.0)],
        };
        assert!(LongitudinalDataset::new(vec![], vec![s]).is_err());
        let s = Subject {
            id: "a".into(),
            observations: vec![obs(1.0, f64::NAN)],
        };
        assert!(LongitudinalDataset::new(vec![], vec![s]).is_err());
    }

    #[test]
    fn canonical_order() {
        let mut d = LongitudinalDataset::new(
            vec![],
            vec![
                Subject {
                    id: "b".into(),
                    observations: vec![obs(2.0, 1.0), obs(0.0, 2.0)],
                },
                Subject {
                    id: "a".into(),
                    observations: vec![obs(1.0, 0.0)],
                },
            ],
        )
        .unwrap();
        d.canonicalize();
        assert_eq!(d.subjects[0].id, "a");
        assert_eq!(d.subjects[1].observations[0].t, 0.0);
        assert_eq!(d.n_obs(), 3);
        assert_eq!(d.positions(), vec![(0, 0), (1, 0), (1, 1)]);
    }
}
