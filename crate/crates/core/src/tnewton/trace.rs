use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which sufficient-decrease condition an accepted step met.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AcceptedBy {
    /// `h(α) − h(0) ≤ −χ₁ h'(0)² / ‖η‖²`
    Curvature,
    /// `h(α) − h(0) ≤ χ₂ h'(0)`
    Decrease,
    Both,
    /// Neither of the above, only `h(α) − h(0) ≤ χ₂ α h'(0)` after backtracking.
    ScaledArmijo,
}

/// One outer iteration. The serialized columns are the CSV trace schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub p: usize,
    pub f: f64,
    pub gradnorm: f64,
    pub relres: f64,
    pub inner_iters: usize,
    #[serde(rename = "nH")]
    pub nh: usize,
    pub alpha: f64,
    pub ms: f64,
    /// Exact change of the cost along the accepted step.
    #[serde(skip)]
    pub f_change: f64,
    /// `h'(0) = g(grad, η)` of the accepted step.
    #[serde(skip)]
    pub slope: f64,
    /// `‖η‖²` in the metric.
    #[serde(skip)]
    pub eta_norm_sq: f64,
    #[serde(skip)]
    pub accepted_by: Option<AcceptedBy>,
}

impl TraceRecord {
    /// True for the record describing a starting point (no step taken).
    pub fn is_start(&self) -> bool {
        self.accepted_by.is_none() && self.alpha == 0.0
    }
}

/// Per-iteration history of one or several fixed-rank solves.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
}

pub const CSV_HEADER: &str = "k,p,f,gradnorm,relres,inner_iters,nH,alpha,ms";

impl SolveTrace {
    pub fn push(&mut self, rec: TraceRecord) {
        self.records.push(rec);
    }

    pub fn extend(&mut self, other: SolveTrace) {
        self.records.extend(other.records);
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn total_nh(&self) -> usize {
        self.records.last().map_or(0, |r| r.nh)
    }

    /// Records for rank `p` in order.
    pub fn for_rank(&self, p: usize) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(move |r| r.p == p)
    }

    /// Outer iterations (accepted steps) taken.
    pub fn outer_iterations(&self) -> usize {
        self.records.iter().filter(|r| !r.is_start()).count()
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.records.is_empty() {
            w.write_record(CSV_HEADER.split(','))
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        }
        for r in &self.records {
            w.serialize(r)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
        let mut records = Vec::new();
        for (i, row) in rdr.deserialize().enumerate() {
            records.push(row.map_err(|e: csv::Error| Error::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                message: e.to_string(),
            })?);
        }
        Ok(SolveTrace { records })
    }
}
