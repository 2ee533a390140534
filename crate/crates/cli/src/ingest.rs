//! Long-format CSV panels: `series_id,time,y[,x1..xd]`.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use mstrend_core::{validate_panel, PanelDataset, Series};

/// Default cap on missing time points per series.
pub const DEFAULT_MISSING_CAP: usize = 10;

/// Field values treated as missing.
const MISSING_TOKENS: [&str; 5] = ["", "NA", "na", "NaN", "."];

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("series `{id}` has {count} missing time points, more than the cap of {cap}")]
    TooManyMissing { id: String, count: usize, cap: usize },
    #[error("series `{id}`: column `{column}` is missing at the {side} boundary")]
    BoundaryMissing {
        id: String,
        column: String,
        side: &'static str,
    },
    #[error("series `{id}` has missing values and interpolation is disabled")]
    InterpolationDisabled { id: String },
    #[error("series `{id}` has no observed `{column}` values")]
    NoObservations { id: String, column: String },
    #[error(transparent)]
    Panel(#[from] mstrend_core::Error),
}

/// How missing values are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadSpec {
    pub interpolate: bool,
    pub missing_cap: usize,
    /// Fill leading and trailing gaps with the nearest observed value.
    pub extrapolate: bool,
}

impl Default for LoadSpec {
    fn default() -> Self {
        Self {
            interpolate: true,
            missing_cap: DEFAULT_MISSING_CAP,
            extrapolate: false,
        }
    }
}

/// A validated panel together with its time labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedPanel {
    pub panel: PanelDataset,
    /// Sorted time labels, one per observation index.
    pub times: Vec<String>,
    /// `(series id, number of imputed time points)` for series with gaps.
    pub imputed: Vec<(String, usize)>,
}

struct RawSeries {
    id: String,
    rows: HashMap<String, Vec<Option<f64>>>,
}

pub fn load_panel_csv(path: &Path, spec: LoadSpec) -> Result<LoadedPanel, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_panel_csv(&text, spec)
}

pub fn parse_panel_csv(text: &str, spec: LoadSpec) -> Result<LoadedPanel, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| IngestError::Parse { line: 1, msg: e.to_string() })?
        .clone();
    let columns: Vec<String> = header.iter().map(str::to_owned).collect();
    if columns.len() < 3 || columns[0] != "series_id" || columns[1] != "time" || columns[2] != "y" {
        return Err(IngestError::Parse {
            line: 1,
            msg: "header must start with `series_id,time,y`".into(),
        });
    }
    let width = columns.len() - 2;

    let mut order: Vec<RawSeries> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut all_times: Vec<String> = Vec::new();
    let mut seen_times: BTreeSet<String> = BTreeSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| IngestError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record[0].to_owned();
        let time = record[1].to_owned();
        if id.is_empty() || time.is_empty() {
            return Err(IngestError::Parse {
                line,
                msg: "empty series id or time".into(),
            });
        }
        let values = record
            .iter()
            .skip(2)
            .map(|field| parse_value(field).ok_or_else(|| IngestError::Parse {
                line,
                msg: format!("`{field}` is not a number"),
            }))
            .collect::<Result<Vec<_>, _>>()?;
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            order.push(RawSeries {
                id: id.clone(),
                rows: HashMap::new(),
            });
            order.len() - 1
        });
        if order[slot].rows.insert(time.clone(), values).is_some() {
            return Err(IngestError::Parse {
                line,
                msg: format!("duplicate time `{time}` for series `{id}`"),
            });
        }
        if seen_times.insert(time.clone()) {
            all_times.push(time);
        }
    }
    let times = sort_times(all_times);

    let mut series = Vec::with_capacity(order.len());
    let mut imputed = Vec::new();
    for raw in &order {
        let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(times.len()); width];
        let mut gaps = 0;
        for t in &times {
            let row = raw.rows.get(t);
            if row.is_none_or(|r| r.iter().any(Option::is_none)) {
                gaps += 1;
            }
            for (c, col) in cols.iter_mut().enumerate() {
                col.push(row.and_then(|r| r[c]));
            }
        }
        if gaps > 0 {
            if gaps > spec.missing_cap {
                return Err(IngestError::TooManyMissing {
                    id: raw.id.clone(),
                    count: gaps,
                    cap: spec.missing_cap,
                });
            }
            if !spec.interpolate {
                return Err(IngestError::InterpolationDisabled { id: raw.id.clone() });
            }
            imputed.push((raw.id.clone(), gaps));
        }
        let filled = cols
            .iter()
            .zip(&columns[2..])
            .map(|(col, name)| fill_column(col, spec.extrapolate, &raw.id, name))
            .collect::<Result<Vec<_>, _>>()?;
        let len = times.len();
        let d = width - 1;
        let x = Array2::from_shape_fn((len, d), |(t, k)| filled[k + 1][t]);
        series.push(Series::new(raw.id.clone(), filled[0].clone(), x));
    }
    Ok(LoadedPanel {
        panel: validate_panel(series)?,
        times,
        imputed,
    })
}

fn parse_value(field: &str) -> Option<Option<f64>> {
    if MISSING_TOKENS.contains(&field) {
        return Some(None);
    }
    field.parse::<f64>().ok().map(Some)
}

/// Numeric order when every label parses as a number, lexicographic otherwise.
fn sort_times(mut times: Vec<String>) -> Vec<String> {
    let numeric: Option<Vec<f64>> = times.iter().map(|t| t.parse::<f64>().ok()).collect();
    match numeric {
        Some(values) => {
            let mut pairs: Vec<(f64, String)> = values.into_iter().zip(times).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            pairs.into_iter().map(|(_, t)| t).collect()
        }
        None => {
            times.sort();
            times
        }
    }
}

/// Linear interpolation between the nearest observed neighbours (by index);
/// optional constant extrapolation at the ends.
fn fill_column(col: &[Option<f64>], extrapolate: bool, id: &str, name: &str) -> Result<Vec<f64>, IngestError> {
    let observed: Vec<usize> = (0..col.len()).filter(|&t| col[t].is_some()).collect();
    let (&first, &last) = match (observed.first(), observed.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => {
            return Err(IngestError::NoObservations {
                id: id.to_owned(),
                column: name.to_owned(),
            })
        }
    };
    if !extrapolate && (first > 0 || last + 1 < col.len()) {
        return Err(IngestError::BoundaryMissing {
            id: id.to_owned(),
            column: name.to_owned(),
            side: if first > 0 { "start" } else { "end" },
        });
    }
    let mut out = vec![0.0; col.len()];
    for (t, slot) in out.iter_mut().enumerate() {
        *slot = match col[t] {
            Some(v) => v,
            None if t < first => col[first].unwrap(),
            None if t > last => col[last].unwrap(),
            None => {
                let k = observed.partition_point(|&o| o < t);
                let (a, b) = (observed[k - 1], observed[k]);
                let (va, vb) = (col[a].unwrap(), col[b].unwrap());
                va + (vb - va) * (t - a) as f64 / (b - a) as f64
            }
        };
    }
    Ok(out)
}

/// Renders a panel in the long CSV format. With `digits = None` numbers use
/// the shortest representation that parses back to the same value; otherwise
/// they are written in scientific notation with `digits` significant digits.
pub fn panel_to_csv(panel: &PanelDataset, times: &[String], digits: Option<usize>) -> String {
    let fmt = |v: f64| match digits {
        None => format!("{v}"),
        Some(d) => format!("{:.*e}", d.saturating_sub(1), v),
    };
    let mut out = String::from("series_id,time,y");
    for k in 1..=panel.dim() {
        write!(out, ",x{k}").unwrap();
    }
    out.push('\n');
    for s in panel.series() {
        for (t, label) in times.iter().enumerate() {
            write!(out, "{},{},{}", s.id(), label, fmt(s.y()[t])).unwrap();
            for k in 0..s.dim() {
                write!(out, ",{}", fmt(s.x()[[t, k]])).unwrap();
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_panel_csv(panel: &PanelDataset, times: &[String], digits: Option<usize>, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, panel_to_csv(panel, times, digits))
}

/// Labels `1..=T` for panels without a time column.
pub fn default_times(len: usize) -> Vec<String> {
    (1..=len).map(|t| t.to_string()).collect()
}
