use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dist::Family;
use crate::error::{Error, Result};
use crate::model::ParamState;
use crate::rng::RngStream;

/// Retained draws of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDraws {
    pub stream: RngStream,
    /// Sampling-phase iteration index of each retained row.
    pub iterations: Vec<usize>,
    /// One row per retained draw, columns as [`PosteriorDraws::names`].
    pub values: Vec<Vec<f64>>,
    /// Flattened random effects per retained row (`N·d` values, subject-major);
    /// empty when not kept.
    pub random_effects: Vec<Vec<f64>>,
    /// Post-adaptation acceptance rate per update block.
    pub acceptance: Vec<(String, f64)>,
    /// Per-observation posterior probability of the inflated component
    /// (cGAL only).
    pub contamination_prob: Vec<f64>,
}

/// Draws from all chains plus the layout needed to rebuild states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub family: Family,
    pub p: usize,
    pub d: usize,
    pub names: Vec<String>,
    pub subject_ids: Vec<String>,
    pub chains: Vec<ChainDraws>,
}

impl PosteriorDraws {
    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    /// Retained draws per chain (the minimum over chains).
    pub fn n_per_chain(&self) -> usize {
        self.chains.iter().map(|c| c.values.len()).min().unwrap_or(0)
    }

    pub fn n_total(&self) -> usize {
        self.chains.iter().map(|c| c.values.len()).sum()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Per-chain traces of column `k`.
    pub fn column(&self, k: usize) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| c.values.iter().map(|row| row[k]).collect())
            .collect()
    }

    /// All chains' values of column `k`, concatenated by chain index.
    pub fn pooled(&self, k: usize) -> Vec<f64> {
        self.chains
            .iter()
            .flat_map(|c| c.values.iter().map(move |row| row[k]))
            .collect()
    }

    pub fn has_random_effects(&self) -> bool {
        self.chains.iter().all(|c| c.random_effects.len() == c.values.len() && !c.values.is_empty())
    }

    /// Rebuilds the parameter state of every retained draw, chain by chain.
    pub fn states(&self) -> Result<Vec<ParamState>> {
        if !self.has_random_effects() {
            return Err(Error::InvalidState("draws were stored without random effects".into()));
        }
        let mut out = Vec::with_capacity(self.n_total());
        for c in &self.chains {
            for (row, re) in c.values.iter().zip(&c.random_effects) {
                out.push(ParamState::from_tracked(self.family, self.p, self.d, row, re)?);
            }
        }
        Ok(out)
    }

    /// Averages the per-chain contamination probabilities.
    pub fn contamination_prob(&self) -> Vec<f64> {
        let chains: Vec<&ChainDraws> = self.chains.iter().filter(|c| !c.contamination_prob.is_empty()).collect();
        if chains.is_empty() {
            return vec![];
        }
        let n = chains[0].contamination_prob.len();
        (0..n)
            .map(|j| chains.iter().map(|c| c.contamination_prob[j]).sum::<f64>() / chains.len() as f64)
            .collect()
    }

    fn re_names(&self) -> Vec<String> {
        self.subject_ids
            .iter()
            .flat_map(|id| (1..=self.d).map(move |k| format!("b[{id}][{k}]")))
            .collect()
    }

    /// CSV with `chain`, `iteration`, the tracked scalars and, when kept, one
    /// column per random effect.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let with_re = self.has_random_effects();
        let mut header = vec!["chain".to_string(), "iteration".to_string()];
        header.extend(self.names.iter().cloned());
        if with_re {
            header.extend(self.re_names());
        }
        wr.write_record(&header).map_err(io_err)?;
        for (ci, c) in self.chains.iter().enumerate() {
            for (r, row) in c.values.iter().enumerate() {
                let mut rec = vec![ci.to_string(), c.iterations[r].to_string()];
                rec.extend(row.iter().map(|v| format_f64(*v)));
                if with_re {
                    rec.extend(c.random_effects[r].iter().map(|v| format_f64(*v)));
                }
                wr.write_record(&rec).map_err(io_err)?;
            }
        }
        wr.flush().map_err(|e| Error::InvalidData(e.to_string()))?;
        Ok(())
    }

    /// Reads draws written by [`PosteriorDraws::write_csv`]; acceptance
    /// rates, streams and contamination probabilities are not part of the
    /// CSV and come back empty.
    pub fn read_csv<R: Read>(
        r: R,
        family: Family,
        p: usize,
        d: usize,
        subject_ids: Vec<String>,
    ) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers().map_err(io_err)?.iter().map(String::from).collect();
        let names = crate::model::tracked_names(family, p, d);
        if header.len() < 2 + names.len() || header[2..2 + names.len()] != names[..] {
            return Err(Error::InvalidData("draws header does not match the model layout".into()));
        }
        let n_re = header.len() - 2 - names.len();
        if n_re != 0 && n_re != subject_ids.len() * d {
            return Err(Error::InvalidData("random-effect columns do not match subjects".into()));
        }
        let mut chains: Vec<ChainDraws> = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec.map_err(io_err)?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::InvalidData(format!("line {}: non-numeric value '{s}'", line + 2)))
            };
            let ci = parse(&rec[0])? as usize;
            while chains.len() <= ci {
                chains.push(ChainDraws {
                    stream: RngStream::new(0, chains.len() as u64),
                    iterations: vec![],
                    values: vec![],
                    random_effects: vec![],
                    acceptance: vec![],
                    contamination_prob: vec![],
                });
            }
            let vals: Vec<f64> = rec.iter().skip(2).map(parse).collect::<Result<_>>()?;
            let c = &mut chains[ci];
            c.iterations.push(parse(&rec[1])? as usize);
            c.values.push(vals[..names.len()].to_vec());
            if n_re > 0 {
                c.random_effects.push(vals[names.len()..].to_vec());
            }
        }
        Ok(Self {
            family,
            p,
            d,
            names,
            subject_ids,
            chains,
        })
    }
}

fn io_err(e: csv::Error) -> Error {
    Error::InvalidData(e.to_string())
}

/// Shortest representation that round-trips exactly.
pub(crate) fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_draws() -> PosteriorDraws {
        let names = crate::model::tracked_names(Family::Gal, 2, 1);
        let mk = |off: f64| ChainDraws {
            stream: RngStream::new(1, 0),
            iterations: vec![0, 5],
            values: vec![vec![1.0 + off, 2.0, 0.3, 0.1, 1.5], vec![1.1 + off, 2.2, 0.31, 0.12, 1.4]],
            random_effects: vec![vec![0.1, -0.2], vec![0.15, -0.25]],
            acceptance: vec![("beta".into(), 0.3)],
            contamination_prob: vec![],
        };
        PosteriorDraws {
            family: Family::Gal,
            p: 2,
            d: 1,
            names,
            subject_ids: vec!["a".into(), "b".into()],
            chains: vec![mk(0.0), mk(0.5)],
        }
    }

    #[test]
    fn csv_round_trip() {
        let d = sample_draws();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = PosteriorDraws::read_csv(&buf[..], Family::Gal, 2, 1, d.subject_ids.clone()).unwrap();
        assert_eq!(back.n_total(), 4);
        for (a, b) in back.chains.iter().zip(&d.chains) {
            assert_eq!(a.values, b.values);
            assert_eq!(a.random_effects, b.random_effects);
            assert_eq!(a.iterations, b.iterations);
        }
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("chain,iteration,beta1,beta2,sigma,gamma,omega11,b[a][1],b[b][1]"));
    }

    #[test]
    fn states_and_pooling() {
        let d = sample_draws();
        let s = d.states().unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s[2].beta[0], 1.5);
        assert_eq!(s[0].b, vec![vec![0.1], vec![-0.2]]);
        assert_eq!(d.pooled(0), vec![1.0, 1.1, 1.5, 1.6]);
    }
}
