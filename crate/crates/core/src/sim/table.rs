use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column order of the performance table.
pub const TABLE_HEADER: [&str; 9] = ["p0", "alpha", "Model", "Parameter", "True", "Bias", "RMSE", "CP", "HPD Len."];

/// One (scenario, family, parameter) cell of the performance table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRow {
    pub p0: f64,
    pub alpha: f64,
    #[serde(rename = "Model")]
    pub model: String,
    #[serde(rename = "Parameter")]
    pub parameter: String,
    #[serde(rename = "True")]
    pub truth: f64,
    #[serde(rename = "Bias")]
    pub bias: f64,
    #[serde(rename = "RMSE")]
    pub rmse: f64,
    #[serde(rename = "CP")]
    pub cp: f64,
    #[serde(rename = "HPD Len.")]
    pub hpd_len: f64,
}

/// Replicate bookkeeping for one (scenario, family).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitCount {
    pub p0: f64,
    pub alpha: f64,
    pub model: String,
    pub replicates: usize,
    pub failed: usize,
    pub refit: usize,
    pub flagged: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerformanceTable {
    pub rows: Vec<PerformanceRow>,
    pub counts: Vec<FitCount>,
}

impl PerformanceTable {
    pub fn get(&self, p0: f64, alpha: f64, model: &str, parameter: &str) -> Option<&PerformanceRow> {
        self.rows
            .iter()
            .find(|r| r.p0 == p0 && r.alpha == alpha && r.model == model && r.parameter == parameter)
    }

    pub fn extend(&mut self, other: PerformanceTable) {
        self.rows.extend(other.rows);
        self.counts.extend(other.counts);
    }

    /// Writes the rows as CSV with full-precision numbers. An empty table
    /// still gets its header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        wr.write_record(TABLE_HEADER).map_err(io_err)?;
        for r in &self.rows {
            let f = crate::mcmc::format_f64;
            wr.write_record([
                f(r.p0),
                f(r.alpha),
                r.model.clone(),
                r.parameter.clone(),
                f(r.truth),
                f(r.bias),
                f(r.rmse),
                f(r.cp),
                f(r.hpd_len),
            ])
            .map_err(io_err)?;
        }
        wr.flush().map_err(|e| Error::InvalidData(e.to_string()))
    }

    /// Parses what [`write_csv`](Self::write_csv) emits; counts are not part
    /// of the CSV and come back empty.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers().map_err(io_err)?.iter().map(str::to_string).collect();
        if header != TABLE_HEADER {
            return Err(Error::InvalidData(format!("unexpected table header {header:?}")));
        }
        let rows = rd.deserialize().collect::<std::result::Result<Vec<PerformanceRow>, _>>().map_err(io_err)?;
        Ok(Self { rows, counts: vec![] })
    }

    /// Markdown rendering with three decimals.
    pub fn to_markdown(&self) -> String {
        let mut s = format!("| {} |\n|{}\n", TABLE_HEADER.join(" | "), "---|".repeat(TABLE_HEADER.len()));
        for r in &self.rows {
            s += &format!(
                "| {} | {} | {} | {} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} |\n",
                r.p0, r.alpha, r.model, r.parameter, r.truth, r.bias, r.rmse, r.cp, r.hpd_len
            );
        }
        s
    }
}

fn io_err(e: csv::Error) -> Error {
    Error::InvalidData(e.to_string())
}

/// Merges scenario tables, ordered by (p0, alpha) then by input order.
pub fn summarize_tables(tables: impl IntoIterator<Item = PerformanceTable>) -> PerformanceTable {
    let mut out = PerformanceTable::default();
    for t in tables {
        out.extend(t);
    }
    let key = |p0: f64, a: f64| (p0.to_bits(), a.to_bits());
    out.rows.sort_by_key(|r| key(r.p0, r.alpha));
    out.counts.sort_by_key(|c| key(c.p0, c.alpha));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(model: &str, parameter: &str, v: f64) -> PerformanceRow {
        PerformanceRow {
            p0: 0.85,
            alpha: 0.05,
            model: model.into(),
            parameter: parameter.into(),
            truth: 11.5,
            bias: v,
            rmse: 0.1 + v.abs(),
            cp: 0.96,
            hpd_len: 1.0 / 3.0,
        }
    }

    #[test]
    fn header_roster() {
        let mut buf = vec![];
        PerformanceTable::default().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "p0,alpha,Model,Parameter,True,Bias,RMSE,CP,HPD Len.\n");
    }

    #[test]
    fn csv_round_trip() {
        let t = PerformanceTable {
            rows: vec![row("GAL", "beta1", -0.0123456789), row("cGAL", "omega12", 1e-17)],
            counts: vec![],
        };
        let mut buf = vec![];
        t.write_csv(&mut buf).unwrap();
        assert_eq!(PerformanceTable::read_csv(&buf[..]).unwrap(), t);
    }

    #[test]
    fn summarize_orders_by_scenario() {
        let mut a = PerformanceTable::default();
        a.rows.push(row("GAL", "beta1", 0.0));
        let mut b = PerformanceTable::default();
        let mut r = row("cGAL", "beta1", 0.0);
        r.p0 = 0.5;
        b.rows.push(r);
        let s = summarize_tables([a, b]);
        assert_eq!(s.rows[0].p0, 0.5);
        assert!(summarize_tables([]).rows.is_empty());
    }

    #[test]
    fn markdown_has_all_rows() {
        let t = PerformanceTable {
            rows: vec![row("GAL", "beta1", 0.5)],
            counts: vec![],
        };
        let md = t.to_markdown();
        assert_eq!(md.lines().count(), 3);
        assert!(md.contains("| 0.333 |"));
    }
}
