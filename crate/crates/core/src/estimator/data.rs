use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Input/output record `y = g * u + v`, optionally with the true response.
#[derive(Clone, Debug, PartialEq)]
pub struct DataSet {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    /// True impulse response; `g0[i]` is the response at lag `i + 1`.
    pub g0: Option<Vec<f64>>,
    pub meta: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct Row {
    #[allow(dead_code)]
    t: f64,
    u: f64,
    y: f64,
}

#[derive(Deserialize)]
struct TapRow {
    #[allow(dead_code)]
    tau: f64,
    g0: f64,
}

/// File name of the true-response sidecar looked up next to a data file.
pub const G0_SIDECAR: &str = "g0.csv";

impl DataSet {
    pub fn new(u: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if u.is_empty() || u.len() != y.len() {
            return Err(Error::Dimension(format!(
                "u and y must be nonempty with equal length, got {} and {}",
                u.len(),
                y.len()
            )));
        }
        if u.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("data contains non-finite values".into()));
        }
        Ok(DataSet {
            u,
            y,
            g0: None,
            meta: BTreeMap::new(),
        })
    }

    pub fn with_g0(mut self, g0: Vec<f64>) -> Self {
        self.g0 = Some(g0);
        self
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Sample variance of `y` (divisor `N`).
    pub fn output_variance(&self) -> f64 {
        let n = self.y.len() as f64;
        let mean = self.y.iter().sum::<f64>() / n;
        self.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
    }

    /// Reads a `t,u,y` CSV; a `g0.csv` (`tau,g0`) in the same directory is
    /// attached as the true response.
    pub fn load(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut u = Vec::new();
        let mut y = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            u.push(row.u);
            y.push(row.y);
        }
        let mut data = DataSet::new(u, y)?;
        data.meta.insert("source".into(), path.display().to_string());
        let sidecar = path.with_file_name(G0_SIDECAR);
        if sidecar.is_file() {
            data.g0 = Some(read_g0(&sidecar)?);
        }
        Ok(data)
    }

    /// Writes `data.csv` and, if present, `g0.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("data.csv"))?;
        w.write_record(["t", "u", "y"])?;
        for (t, (u, y)) in self.u.iter().zip(&self.y).enumerate() {
            w.write_record(&[(t + 1).to_string(), format!("{u:e}"), format!("{y:e}")])?;
        }
        w.flush()?;
        if let Some(g0) = &self.g0 {
            let mut w = csv::Writer::from_path(dir.join(G0_SIDECAR))?;
            w.write_record(["tau", "g0"])?;
            for (i, g) in g0.iter().enumerate() {
                w.write_record(&[(i + 1).to_string(), format!("{g:e}")])?;
            }
            w.flush()?;
        }
        Ok(())
    }
}

pub fn read_g0(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut g0 = Vec::new();
    for row in rdr.deserialize() {
        let row: TapRow = row?;
        g0.push(row.g0);
    }
    Ok(g0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let d = DataSet::new(vec![1.0, -2.5, 0.125], vec![0.0, 1.0, 3.5])
            .unwrap()
            .with_g0(vec![0.5, 0.25]);
        d.save(dir.path()).unwrap();
        let back = DataSet::load(&dir.path().join("data.csv")).unwrap();
        assert_eq!(back.u, d.u);
        assert_eq!(back.y, d.y);
        assert_eq!(back.g0, d.g0);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(DataSet::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(DataSet::new(vec![], vec![]).is_err());
    }
}
