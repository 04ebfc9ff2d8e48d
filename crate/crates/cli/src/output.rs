//! Result tables, CSV serialization, summaries and plot scripts.

use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(u64),
    Float(f64),
    Bool(bool),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            Cell::Bool(b) => Some(if *b { 1.0 } else { 0.0 }),
            Cell::Text(_) => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Text(s) => f.write_str(s),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Float(v) => write!(f, "{v:e}"),
            Cell::Bool(b) => f.write_str(if *b { "1" } else { "0" }),
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("no column `{name}`"))
    }

    /// Numeric values of a column, optionally restricted by a row filter.
    pub fn values<F>(&self, name: &str, keep: F) -> Result<Vec<f64>>
    where
        F: Fn(&[Cell]) -> bool,
    {
        let j = self.column(name)?;
        Ok(self
            .rows
            .iter()
            .filter(|r| keep(r))
            .filter_map(|r| r[j].as_f64())
            .collect())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow!("csv flush: {e}"))?;
        Ok(String::from_utf8(bytes)?)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?).with_context(|| format!("writing {}", path.display()))
    }

    /// Mean and sample standard deviation of `metrics` for each distinct
    /// combination of `keys`, in order of first appearance.
    pub fn summarize(&self, keys: &[&str], metrics: &[&str]) -> Result<Table> {
        let key_idx: Vec<usize> = keys.iter().map(|k| self.column(k)).collect::<Result<_>>()?;
        let metric_idx: Vec<usize> = metrics.iter().map(|m| self.column(m)).collect::<Result<_>>()?;
        let mut groups: Vec<(Vec<String>, Vec<Vec<f64>>)> = Vec::new();
        for row in &self.rows {
            let key: Vec<String> = key_idx.iter().map(|&j| row[j].to_string()).collect();
            let pos = match groups.iter().position(|(k, _)| *k == key) {
                Some(p) => p,
                None => {
                    groups.push((key, vec![Vec::new(); metric_idx.len()]));
                    groups.len() - 1
                }
            };
            for (slot, &j) in metric_idx.iter().enumerate() {
                if let Some(v) = row[j].as_f64() {
                    groups[pos].1[slot].push(v);
                }
            }
        }
        let mut header: Vec<String> = keys.iter().map(|k| k.to_string()).collect();
        header.push("count".into());
        for m in metrics {
            header.push(format!("{m}_mean"));
            header.push(format!("{m}_std"));
        }
        let mut out = Table { header, rows: Vec::new() };
        for (key, samples) in groups {
            let mut row: Vec<Cell> = key.into_iter().map(Cell::Text).collect();
            row.push(Cell::Int(samples.first().map_or(0, |s| s.len()) as u64));
            for s in &samples {
                let (mean, std) = mean_std(s);
                row.push(Cell::Float(mean));
                row.push(Cell::Float(std));
            }
            out.rows.push(row);
        }
        Ok(out)
    }
}

/// Mean and sample standard deviation (0 for a single value, NaN for none).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Columns holding wall-clock measurements; excluded from reproducibility checks.
pub const TIMING_COLUMNS: [&str; 8] = ["ms", "sketch_ms", "ms_mean", "ms_std", "sketch_ms_mean", "sketch_ms_std", "min_ms", "median_ms"];

/// CSV text with the timing columns removed.
pub fn strip_timing(csv_text: &str) -> Result<String> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(csv_text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Ok(String::new()),
    };
    let keep: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| !TIMING_COLUMNS.contains(h))
        .map(|(j, _)| j)
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(keep.iter().map(|&j| &header[j]))?;
    for rec in records {
        let rec = rec?;
        w.write_record(keep.iter().map(|&j| &rec[j]))?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow!("csv flush: {e}"))?;
    Ok(String::from_utf8(bytes)?)
}

/// A named output file.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub table: Table,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub files: Vec<OutputFile>,
    pub plot_script: String,
}

impl ExperimentOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.files.iter().find(|f| f.name == name).map(|f| &f.table)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        for f in &self.files {
            f.table.write_csv(&dir.join(&f.name))?;
        }
        fs::write(dir.join("plot.gp"), &self.plot_script).with_context(|| format!("writing plot script in {}", dir.display()))
    }
}

/// Gnuplot script over `summary.csv`; column numbers are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub x_col: usize,
    pub y_col: usize,
    /// One curve per distinct value of this column.
    pub series_col: Option<usize>,
    pub log_x: bool,
    pub log_y: bool,
}

impl PlotSpec<'_> {
    pub fn script(&self) -> String {
        let mut s = String::new();
        s.push_str("set datafile separator ','\n");
        s.push_str(&format!("set title '{}'\n", self.title));
        s.push_str(&format!("set xlabel '{}'\nset ylabel '{}'\n", self.x_label, self.y_label));
        if self.log_x {
            s.push_str("set logscale x\n");
        }
        if self.log_y {
            s.push_str("set logscale y\n");
        }
        s.push_str("set terminal pngcairo size 900,600\nset output 'plot.png'\n");
        let (x, y) = (self.x_col, self.y_col);
        match self.series_col {
            Some(c) => s.push_str(&format!(
                "series = system(\"tail -n +2 summary.csv | cut -d, -f{c} | sort -u\")\n\
                 plot for [g in series] 'summary.csv' skip 1 using (strcol({c}) eq g ? ${x} : 1/0):{y} with linespoints title g\n"
            )),
            None => s.push_str(&format!("plot 'summary.csv' skip 1 using {x}:{y} with linespoints notitle\n")),
        }
        s
    }
}
