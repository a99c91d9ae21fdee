//! Reading microdata, aggregating it into intervals, and interval CSV I/O.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{scale_to_latent, ScaledSample, SummaryRow};
use crate::interval::{Interval, IntervalFrame};
use crate::latent::LatentDistribution;

/// Environment variable overriding the fixture directory.
pub const FIXTURE_ENV: &str = "MALLOWS_FIXTURES";

/// Separator used to join group key parts into a row label.
pub const GROUP_SEPARATOR: &str = "/";

/// One microdata observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroRecord {
    pub group: Vec<String>,
    pub variable: String,
    pub value: f64,
}

/// Microdata table as read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Microdata {
    pub group_columns: Vec<String>,
    pub records: Vec<MicroRecord>,
}

/// Reads `group1[,group2,...],variable,value` microdata.
pub fn read_microdata<R: Read>(reader: R) -> Result<Microdata> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let var_col = headers
        .iter()
        .position(|h| h == "variable")
        .ok_or_else(|| Error::InvalidFrame("microdata header lacks a 'variable' column".into()))?;
    let value_col = headers
        .iter()
        .position(|h| h == "value")
        .ok_or_else(|| Error::InvalidFrame("microdata header lacks a 'value' column".into()))?;
    if var_col == 0 || value_col <= var_col {
        return Err(Error::InvalidFrame(
            "microdata header must be group columns, then 'variable', then 'value'".into(),
        ));
    }
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let raw = &rec[value_col];
        let value: f64 = raw.parse().map_err(|_| Error::Parse {
            line,
            message: format!("value '{raw}' is not a number"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("value '{raw}' is not finite"),
            });
        }
        let group: Vec<String> = (0..var_col).map(|i| rec[i].to_string()).collect();
        if group.iter().all(String::is_empty) {
            return Err(Error::Parse {
                line,
                message: "empty group key".into(),
            });
        }
        records.push(MicroRecord {
            group,
            variable: rec[var_col].to_string(),
            value,
        });
    }
    Ok(Microdata {
        group_columns: headers[..var_col].to_vec(),
        records,
    })
}

pub fn load_microdata_csv(path: impl AsRef<Path>) -> Result<Microdata> {
    read_microdata(open(path.as_ref())?)
}

pub fn write_microdata<W: Write>(data: &Microdata, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = data.group_columns.clone();
    header.extend(["variable".to_string(), "value".to_string()]);
    w.write_record(&header)?;
    for r in &data.records {
        let mut row = r.group.clone();
        row.push(r.variable.clone());
        row.push(r.value.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Settings for [`aggregate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateOptions {
    /// Fraction trimmed from each side of every cell, in `[0, 0.5)`.
    pub trim: f64,
    /// Keep zero-range cells instead of dropping their group. Only honoured
    /// when `trim == 0`.
    pub keep_degenerate: bool,
    /// Output variable order; defaults to sorted names.
    pub variable_order: Option<Vec<String>>,
}

impl Default for AggregateOptions {
    fn default() -> Self {
        Self {
            trim: 0.0,
            keep_degenerate: false,
            variable_order: None,
        }
    }
}

/// Why a group was left out of the aggregated frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Degenerate,
    Missing,
    EmptyAfterTrim,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedCell {
    pub group: String,
    pub variable: String,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationReport {
    pub trim: f64,
    pub groups_in: usize,
    pub groups_out: usize,
    pub variables: Vec<String>,
    /// Cells that caused their group to be dropped.
    pub dropped: Vec<DroppedCell>,
    /// Variables in `variable_order` never seen in the data, and the like.
    pub violations: Vec<String>,
}

/// Aggregated frame with the scaled microdata behind each interval.
#[derive(Debug, Clone)]
pub struct Aggregation {
    pub frame: IntervalFrame,
    /// One sample per variable; `rows` index into `frame`.
    pub samples: Vec<ScaledSample>,
    pub report: AggregationReport,
}

/// Number of values dropped from each side of a cell of size `n`.
pub fn trim_count(trim: f64, n: usize) -> usize {
    // The slack keeps products such as 0.29 * 100 from flooring one short.
    (trim * n as f64 + 1e-9).floor() as usize
}

/// Aggregates microdata into one interval per (group, variable) cell.
///
/// Each cell loses `floor(trim n)` values from each end; its interval is
/// the `[min, max]` of the rest. A group is dropped entirely when any of its
/// cells is missing, empty after trimming, or of zero range (unless
/// `keep_degenerate`). Rows are sorted by group key. Every variable gets a
/// uniform latent, degenerate for all-zero-range variables.
pub fn aggregate(records: &[MicroRecord], opts: &AggregateOptions) -> Result<Aggregation> {
    if !(0.0..0.5).contains(&opts.trim) {
        return Err(Error::Domain(format!("trim {} outside [0, 0.5)", opts.trim)));
    }
    if records.is_empty() {
        return Err(Error::Empty("microdata".into()));
    }
    let mut cells: BTreeMap<&[String], BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    let mut seen_vars = BTreeSet::new();
    for r in records {
        if !r.value.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite value in group '{}'",
                r.group.join(GROUP_SEPARATOR)
            )));
        }
        seen_vars.insert(r.variable.as_str());
        cells
            .entry(&r.group)
            .or_default()
            .entry(&r.variable)
            .or_default()
            .push(r.value);
    }
    let mut violations = Vec::new();
    let variables: Vec<String> = match &opts.variable_order {
        Some(order) => {
            for v in order {
                if !seen_vars.contains(v.as_str()) {
                    violations.push(format!("variable '{v}' has no observations"));
                }
            }
            order.clone()
        }
        None => seen_vars.iter().map(|s| s.to_string()).collect(),
    };
    if variables.is_empty() {
        return Err(Error::Empty("variable list".into()));
    }
    let keep_degenerate = opts.keep_degenerate && opts.trim == 0.0;

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut kept_values: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut dropped = Vec::new();
    for (group, by_var) in &cells {
        let label = group.join(GROUP_SEPARATOR);
        let mut row = Vec::with_capacity(variables.len());
        let mut values = Vec::with_capacity(variables.len());
        let mut drop = Vec::new();
        for var in &variables {
            let Some(cell) = by_var.get(var.as_str()) else {
                drop.push((var, DropReason::Missing));
                continue;
            };
            let mut sorted = cell.clone();
            sorted.sort_by(f64::total_cmp);
            let k = trim_count(opts.trim, sorted.len());
            if 2 * k >= sorted.len() {
                drop.push((var, DropReason::EmptyAfterTrim));
                continue;
            }
            let kept = sorted[k..sorted.len() - k].to_vec();
            let iv = Interval::new(kept[0], kept[kept.len() - 1])?;
            if iv.is_degenerate() && !keep_degenerate {
                drop.push((var, DropReason::Degenerate));
                continue;
            }
            row.push(iv);
            values.push(kept);
        }
        if drop.is_empty() {
            rows.push(row);
            labels.push(label);
            kept_values.push(values);
        } else {
            dropped.extend(drop.into_iter().map(|(var, reason)| DroppedCell {
                group: label.clone(),
                variable: var.clone(),
                reason,
            }));
        }
    }
    let groups_out = rows.len();
    let mut samples: Vec<ScaledSample> = variables.iter().map(ScaledSample::new).collect();
    for (i, (row, values)) in rows.iter().zip(&kept_values).enumerate() {
        for (j, (iv, v)) in row.iter().zip(values).enumerate() {
            if !iv.is_degenerate() {
                samples[j].push_row(i, &scale_to_latent(v, iv)?);
            }
        }
    }
    let frame =
        IntervalFrame::with_common_latent(variables.clone(), rows, LatentDistribution::Uniform)?.with_labels(labels)?;
    Ok(Aggregation {
        frame,
        samples,
        report: AggregationReport {
            trim: opts.trim,
            groups_in: cells.len(),
            groups_out,
            variables,
            dropped,
            violations,
        },
    })
}

/// Column layout of an interval CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    /// `<name>.lo,<name>.hi`
    #[default]
    LowerUpper,
    /// `<name>.c,<name>.r`
    CentreRange,
}

enum Column {
    Label,
    Part { var: usize, suffix: Suffix },
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Suffix {
    Lo,
    Hi,
    C,
    R,
}

fn split_suffix(header: &str) -> Option<(&str, Suffix)> {
    let (base, suffix) = header.rsplit_once('.')?;
    let s = match suffix {
        "lo" => Suffix::Lo,
        "hi" => Suffix::Hi,
        "c" => Suffix::C,
        "r" => Suffix::R,
        _ => return None,
    };
    (!base.is_empty()).then_some((base, s))
}

/// Reads an interval CSV. Each variable is a `.lo/.hi` or `.c/.r` column
/// pair, detected per variable; at most one other column is taken as row
/// labels. Variables get a uniform latent (degenerate if all ranges are 0).
pub fn read_interval_csv<R: Read>(reader: R) -> Result<IntervalFrame> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut names: Vec<String> = Vec::new();
    let mut parts: Vec<[Option<usize>; 4]> = Vec::new();
    let mut columns = Vec::with_capacity(headers.len());
    let mut label_col = None;
    for (k, h) in headers.iter().enumerate() {
        match split_suffix(h) {
            Some((base, suffix)) => {
                let var = names.iter().position(|n| n == base).unwrap_or_else(|| {
                    names.push(base.to_string());
                    parts.push([None; 4]);
                    names.len() - 1
                });
                let slot = &mut parts[var][suffix as usize];
                if slot.is_some() {
                    return Err(Error::InvalidFrame(format!("duplicate column '{h}'")));
                }
                *slot = Some(k);
                columns.push(Column::Part { var, suffix });
            }
            None => {
                if label_col.is_some() {
                    return Err(Error::InvalidFrame(format!(
                        "column '{h}' is neither an interval bound nor the single label column"
                    )));
                }
                label_col = Some(k);
                columns.push(Column::Label);
            }
        }
    }
    if names.is_empty() {
        return Err(Error::InvalidFrame("header has no interval columns".into()));
    }
    let mut encodings = Vec::with_capacity(names.len());
    for (name, p) in names.iter().zip(&parts) {
        let enc = match *p {
            [Some(_), Some(_), None, None] => Encoding::LowerUpper,
            [None, None, Some(_), Some(_)] => Encoding::CentreRange,
            [Some(_), None, None, None] => return Err(missing_pair(name, "lo", "hi")),
            [None, Some(_), None, None] => return Err(missing_pair(name, "hi", "lo")),
            [None, None, Some(_), None] => return Err(missing_pair(name, "c", "r")),
            [None, None, None, Some(_)] => return Err(missing_pair(name, "r", "c")),
            _ => {
                return Err(Error::InvalidFrame(format!(
                    "variable '{name}' mixes '.lo/.hi' and '.c/.r' columns"
                )))
            }
        };
        encodings.push(enc);
    }
    let p = names.len();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut bad_lines: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != headers.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        let mut vals = vec![[f64::NAN; 4]; p];
        for (k, col) in columns.iter().enumerate() {
            match *col {
                Column::Label => labels.push(rec[k].to_string()),
                Column::Part { var, suffix } => {
                    vals[var][suffix as usize] = rec[k].parse().map_err(|_| Error::Parse {
                        line,
                        message: format!("'{}' in column '{}' is not a number", &rec[k], headers[k]),
                    })?;
                }
            }
        }
        let row: Vec<Interval> = vals
            .iter()
            .zip(&encodings)
            .map(|(v, enc)| match enc {
                Encoding::LowerUpper => Interval {
                    lower: v[Suffix::Lo as usize],
                    upper: v[Suffix::Hi as usize],
                },
                Encoding::CentreRange => {
                    let (c, r) = (v[Suffix::C as usize], v[Suffix::R as usize]);
                    Interval {
                        lower: c - 0.5 * r,
                        upper: c + 0.5 * r,
                    }
                }
            })
            .collect();
        for (j, iv) in row.iter().enumerate() {
            if iv.upper < iv.lower {
                bad_lines.entry(j).or_default().push(line);
            }
        }
        rows.push(row);
    }
    if !bad_lines.is_empty() {
        let msg: Vec<String> = bad_lines
            .iter()
            .map(|(&j, lines)| {
                let l: Vec<String> = lines.iter().map(usize::to_string).collect();
                format!("variable '{}' has upper < lower on line(s) {}", names[j], l.join(", "))
            })
            .collect();
        return Err(Error::InvalidFrame(msg.join("; ")));
    }
    let frame = IntervalFrame::with_common_latent(names, rows, LatentDistribution::Uniform)?;
    match label_col {
        Some(_) => frame.with_labels(labels),
        None => Ok(frame),
    }
}

fn missing_pair(name: &str, present: &str, absent: &str) -> Error {
    Error::InvalidFrame(format!(
        "variable '{name}' has a '.{present}' column but no '.{absent}' column"
    ))
}

pub fn load_interval_csv(path: impl AsRef<Path>) -> Result<IntervalFrame> {
    read_interval_csv(open(path.as_ref())?)
}

/// Writes an interval CSV with shortest round-trip number formatting, so
/// that reading it back reproduces every bound exactly (for `LowerUpper`).
pub fn write_interval_csv<W: Write>(frame: &IntervalFrame, writer: W, encoding: Encoding) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = Vec::with_capacity(2 * frame.n_vars() + 1);
    if frame.labels().is_some() {
        header.push("label".to_string());
    }
    let (s0, s1) = match encoding {
        Encoding::LowerUpper => ("lo", "hi"),
        Encoding::CentreRange => ("c", "r"),
    };
    for name in frame.names() {
        header.push(format!("{name}.{s0}"));
        header.push(format!("{name}.{s1}"));
    }
    w.write_record(&header)?;
    for i in 0..frame.n_rows() {
        let mut rec = Vec::with_capacity(header.len());
        if let Some(labels) = frame.labels() {
            rec.push(labels[i].clone());
        }
        for iv in frame.row(i) {
            let (x, y) = match encoding {
                Encoding::LowerUpper => (iv.lower, iv.upper),
                Encoding::CentreRange => (iv.centre(), iv.range()),
            };
            rec.push(x.to_string());
            rec.push(y.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_interval_csv(frame: &IntervalFrame, path: impl AsRef<Path>, encoding: Encoding) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_interval_csv(frame, std::io::BufWriter::new(f), encoding)
}

/// Reads `group,variable,mean,median,min,max` summary statistics.
pub fn read_summary_csv<R: Read>(reader: R) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: SummaryRow = row?;
        out.push(row);
    }
    Ok(out)
}

pub fn load_summary_csv(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    read_summary_csv(open(path.as_ref())?)
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Interval frame of the `[min, max]` columns of summary statistics, one
/// row per group. Groups and variables keep their first-appearance order;
/// every group must report every variable exactly once.
pub fn summary_frame(rows: &[SummaryRow]) -> Result<IntervalFrame> {
    if rows.is_empty() {
        return Err(Error::Empty("summary statistics".into()));
    }
    let mut groups: Vec<&str> = Vec::new();
    let mut names: Vec<&str> = Vec::new();
    let mut cells: BTreeMap<(&str, &str), Interval> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        if !groups.contains(&r.group.as_str()) {
            groups.push(&r.group);
        }
        if !names.contains(&r.variable.as_str()) {
            names.push(&r.variable);
        }
        let iv = Interval::new(r.min, r.max).map_err(|e| Error::Parse {
            line: i + 2,
            message: e.to_string(),
        })?;
        if cells.insert((r.group.as_str(), r.variable.as_str()), iv).is_some() {
            return Err(Error::InvalidFrame(format!(
                "group '{}' repeats variable '{}'",
                r.group, r.variable
            )));
        }
    }
    let mut table = Vec::with_capacity(groups.len());
    for g in &groups {
        let mut row = Vec::with_capacity(names.len());
        for v in &names {
            let iv = cells
                .get(&(*g, *v))
                .ok_or_else(|| Error::InvalidFrame(format!("group '{g}' has no row for variable '{v}'")))?;
            row.push(*iv);
        }
        table.push(row);
    }
    let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    IntervalFrame::with_common_latent(names, table, LatentDistribution::Uniform)?
        .with_labels(groups.iter().map(|s| s.to_string()).collect())
}

/// Directory holding data fixtures: `$MALLOWS_FIXTURES` if set, else the
/// core crate's `fixtures/` directory.
pub fn fixture_dir() -> PathBuf {
    match std::env::var_os(FIXTURE_ENV) {
        Some(dir) => PathBuf::from(dir),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures"),
    }
}

/// Path of a fixture file, if it exists.
pub fn fixture_path(name: &str) -> Option<PathBuf> {
    let p = fixture_dir().join(name);
    p.is_file().then_some(p)
}
