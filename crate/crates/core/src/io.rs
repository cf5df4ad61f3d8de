//! CSV artifacts: history series and daily simulation traces.
//!
//! A history directory holds `demand_<id>.csv` for every customer-serving
//! facility and `lead_delta_<id>.csv` for every facility. Each file has a
//! single column of nonnegative integers under a `demand` or `lead_delta`
//! header.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::engine::TraceRow;
use crate::model::{FacilityHistory, FacilityId, HistoryDataset, Network, Units};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Series {
    Demand,
    LeadDelta,
}

impl Series {
    pub fn header(self) -> &'static str {
        match self {
            Series::Demand => "demand",
            Series::LeadDelta => "lead_delta",
        }
    }
}

pub fn history_file(dir: &Path, id: FacilityId, series: Series) -> PathBuf {
    dir.join(format!("{}_{}.csv", series.header(), id))
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_series(path: &Path, series: Series, values: &[Units]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record([series.header()]).map_err(csv_err(path))?;
    for v in values {
        w.write_record([v.to_string()]).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_series(path: &Path, series: Series) -> Result<Vec<Units>, IoError> {
    let format = |reason: String| IoError::Format {
        path: path.to_path_buf(),
        reason,
    };
    let file = File::open(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = r.headers().map_err(csv_err(path))?.clone();
    if headers.len() != 1 || &headers[0] != series.header() {
        return Err(format(format!(
            "expected a single `{}` column, found header {:?}",
            series.header(),
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut values = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let field = record.get(0).unwrap_or("");
        let v: Units = field
            .parse()
            .map_err(|_| format(format!("row {}: {field:?} is not an integer", line + 1)))?;
        if v < 0 {
            return Err(format(format!("row {}: negative value {v}", line + 1)));
        }
        values.push(v);
    }
    Ok(values)
}

/// Writes every series of `history`; returns the files written.
pub fn write_history(dir: &Path, history: &HistoryDataset) -> Result<Vec<PathBuf>, IoError> {
    std::fs::create_dir_all(dir).map_err(|source| IoError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    for (&id, h) in &history.facilities {
        if !h.demand.is_empty() {
            let p = history_file(dir, id, Series::Demand);
            write_series(&p, Series::Demand, &h.demand)?;
            written.push(p);
        }
        let p = history_file(dir, id, Series::LeadDelta);
        write_series(&p, Series::LeadDelta, &h.lead_delta)?;
        written.push(p);
    }
    Ok(written)
}

/// Reads the series `network` needs from `dir`.
pub fn read_history(dir: &Path, network: &Network) -> Result<HistoryDataset, IoError> {
    let mut facilities = BTreeMap::new();
    for spec in network.facilities() {
        let demand = if spec.serves_customers {
            read_series(&history_file(dir, spec.id, Series::Demand), Series::Demand)?
        } else {
            Vec::new()
        };
        let lead_delta = read_series(&history_file(dir, spec.id, Series::LeadDelta), Series::LeadDelta)?;
        facilities.insert(spec.id, FacilityHistory { demand, lead_delta });
    }
    Ok(HistoryDataset { facilities })
}

pub const TRACE_HEADER: [&str; 7] = ["day", "facility", "on_hand", "inv_position", "backorders", "demand", "shipped"];

pub fn write_trace<W: Write>(out: W, rows: &[TraceRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in rows {
        w.write_record([
            r.day.to_string(),
            r.facility.to_string(),
            r.on_hand.to_string(),
            r.inv_position.to_string(),
            r.backorders.to_string(),
            r.demand.to_string(),
            r.shipped.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
