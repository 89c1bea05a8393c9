//! Delimited-text ingestion of quarter-hourly multi-region production data.
//!
//! Two layouts are accepted, delimiter `,` or `;` detected from the header:
//!
//! * long: header `timestamp,region,value`, one observation per line;
//! * wide: header `timestamp,<region>,<region>,...`, one instant per line.
//!
//! Timestamps are RFC 3339 (any offset), `YYYY-MM-DD[T ]HH:MM[:SS][Z]` or
//! `DD.MM.YYYY HH:MM` (taken as UTC), optionally followed by ` - <end>` as in
//! portal exports; only the start instant is used. Every instant must fall on
//! a 15-minute boundary. Empty cells, `NA`, `NaN`, `N/A`, `n/e` and `-` are
//! missing values.
//!
//! Cleaning: regions are aligned on the span covered by all of them;
//! duplicated instants are averaged; interior gaps up to `max_gap` slots are
//! linearly interpolated. Rows that remain incomplete split the grid, and the
//! longest complete stretch is kept.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, TimeZone, Utc};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::panel::{regular_clock, TimeSeriesPanel, SLOT_SECONDS};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestOptions {
    /// Longest run of missing slots that is interpolated.
    pub max_gap: usize,
    /// Fail unless exactly this many regions are found.
    pub expected_regions: Option<usize>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            max_gap: 8,
            expected_regions: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub missing_values: usize,
    pub gaps_filled: usize,
    pub duplicates_resolved: usize,
    pub rows_dropped: usize,
    pub regions_found: Vec<String>,
    pub coverage_span: (String, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Long,
    Wide,
}

#[derive(Default)]
struct Slot {
    sum: f64,
    present: usize,
    entries: usize,
}

/// Observations keyed by region (first-appearance order) and slot.
#[derive(Default)]
struct Collector {
    order: Vec<String>,
    regions: HashMap<String, HashMap<i64, Slot>>,
    rows_read: usize,
    missing: usize,
}

impl Collector {
    fn push(&mut self, region: &str, slot: i64, value: Option<f64>) {
        if !self.regions.contains_key(region) {
            self.order.push(region.to_string());
        }
        let s = self.regions.entry(region.to_string()).or_default().entry(slot).or_default();
        s.entries += 1;
        match value {
            Some(v) => {
                s.sum += v;
                s.present += 1;
            }
            None => self.missing += 1,
        }
    }
}

fn detect_delimiter(header: &str) -> u8 {
    if header.matches(';').count() > header.matches(',').count() {
        b';'
    } else {
        b','
    }
}

pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let s = raw.split(" - ").next()?.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%:z", "%Y-%m-%d %H:%M%:z"] {
        if let Ok(t) = DateTime::parse_from_str(s, fmt) {
            return Some(t.with_timezone(&Utc));
        }
    }
    let s = s.strip_suffix('Z').unwrap_or(s);
    for fmt in [
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%d %H:%M",
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%d.%m.%Y %H:%M",
        "%d.%m.%Y %H:%M:%S",
    ] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(Utc.from_utc_datetime(&t));
        }
    }
    None
}

fn parse_value(raw: &str, delimiter: u8) -> std::result::Result<Option<f64>, String> {
    let s = raw.trim();
    if matches!(s, "" | "-" | "NA" | "N/A" | "n/a" | "n/e" | "NaN" | "nan") {
        return Ok(None);
    }
    let parsed = s
        .parse::<f64>()
        .or_else(|e| if delimiter == b';' { s.replace(',', ".").parse::<f64>() } else { Err(e) });
    match parsed {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(_) => Ok(None),
        Err(_) => Err(format!("cannot parse value `{s}`")),
    }
}

fn read_file(path: &Path, acc: &mut Collector) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(&text);
    let header_line = text.lines().next().unwrap_or("");
    let delimiter = detect_delimiter(header_line);
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let lower: Vec<String> = header.iter().map(|h| h.to_ascii_lowercase()).collect();
    let layout = if lower == ["timestamp", "region", "value"] {
        Layout::Long
    } else if lower.first().is_some_and(|h| h == "timestamp") && header.len() >= 2 {
        Layout::Wide
    } else {
        return Err(parse_err(
            1,
            "header must be `timestamp,region,value` or `timestamp,<region>,...`".into(),
        ));
    };

    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(parse_err(line, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        let ts = parse_timestamp(&rec[0]).ok_or_else(|| parse_err(line, format!("bad timestamp `{}`", &rec[0])))?;
        let secs = ts.timestamp();
        if secs.rem_euclid(SLOT_SECONDS) != 0 {
            return Err(parse_err(line, format!("timestamp {ts} is not on a 15-minute boundary")));
        }
        let slot = secs.div_euclid(SLOT_SECONDS);
        acc.rows_read += 1;
        match layout {
            Layout::Long => {
                let region = &rec[1];
                if region.is_empty() {
                    return Err(parse_err(line, "empty region label".into()));
                }
                let v = parse_value(&rec[2], delimiter).map_err(|m| parse_err(line, m))?;
                acc.push(region, slot, v);
            }
            Layout::Wide => {
                for (region, raw) in header[1..].iter().zip(rec.iter().skip(1)) {
                    let v = parse_value(raw, delimiter).map_err(|m| parse_err(line, m))?;
                    acc.push(region, slot, v);
                }
            }
        }
    }
    Ok(())
}

/// Reads, aligns and cleans one or more files into a panel.
pub fn load_panel<P: AsRef<Path>>(paths: &[P], options: &IngestOptions) -> Result<(TimeSeriesPanel, IngestReport)> {
    if paths.is_empty() {
        return Err(Error::InvalidInput("no input files".into()));
    }
    let mut acc = Collector::default();
    for p in paths {
        read_file(p.as_ref(), &mut acc)?;
    }
    let d = acc.order.len();
    if d == 0 {
        return Err(Error::Schema("no regions found".into()));
    }
    if let Some(expected) = options.expected_regions {
        if expected != d {
            return Err(Error::Schema(format!("expected {expected} regions, found {d}: {:?}", acc.order)));
        }
    }

    // averaged values per region and slot
    let mut duplicates = 0;
    let mut series: Vec<HashMap<i64, f64>> = Vec::with_capacity(d);
    for region in &acc.order {
        let slots = &acc.regions[region];
        let mut clean = HashMap::with_capacity(slots.len());
        for (&k, s) in slots {
            if s.entries > 1 {
                duplicates += 1;
            }
            if s.present > 0 {
                clean.insert(k, s.sum / s.present as f64);
            }
        }
        series.push(clean);
    }

    let start = series.iter().map(|s| s.keys().min().copied()).collect::<Option<Vec<_>>>();
    let end = series.iter().map(|s| s.keys().max().copied()).collect::<Option<Vec<_>>>();
    let (Some(start), Some(end)) = (start, end) else {
        return Err(Error::NoOverlap);
    };
    let (start, end) = (*start.iter().max().unwrap(), *end.iter().min().unwrap());
    if start > end {
        return Err(Error::NoOverlap);
    }
    let n = (end - start + 1) as usize;

    let mut columns: Vec<Vec<Option<f64>>> = series
        .iter()
        .map(|s| (0..n).map(|i| s.get(&(start + i as i64)).copied()).collect())
        .collect();
    let mut gaps_filled = 0;
    for col in &mut columns {
        gaps_filled += interpolate_short_gaps(col, options.max_gap);
    }

    let complete: Vec<bool> = (0..n).map(|i| columns.iter().all(|c| c[i].is_some())).collect();
    let (best_start, best_len) = longest_true_run(&complete);
    if best_len == 0 {
        return Err(Error::NoOverlap);
    }

    let values = DMatrix::from_fn(best_len, d, |i, j| columns[j][best_start + i].unwrap());
    let first = slot_time(start + best_start as i64);
    let panel = TimeSeriesPanel::new(values, regular_clock(first, best_len), acc.order.clone())?;
    let report = IngestReport {
        rows_read: acc.rows_read,
        missing_values: acc.missing,
        gaps_filled,
        duplicates_resolved: duplicates,
        rows_dropped: n - best_len,
        regions_found: acc.order,
        coverage_span: (
            panel.timestamps()[0].to_rfc3339(),
            panel.timestamps()[best_len - 1].to_rfc3339(),
        ),
    };
    Ok((panel, report))
}

fn slot_time(slot: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(slot * SLOT_SECONDS, 0).unwrap()
}

/// Fills interior runs of at most `max_gap` missing slots by linear
/// interpolation between the bracketing observations. Returns slots filled.
fn interpolate_short_gaps(col: &mut [Option<f64>], max_gap: usize) -> usize {
    let mut filled = 0;
    let mut i = 0;
    while i < col.len() {
        if col[i].is_some() {
            i += 1;
            continue;
        }
        let run_start = i;
        while i < col.len() && col[i].is_none() {
            i += 1;
        }
        let len = i - run_start;
        if run_start == 0 || i == col.len() || len > max_gap {
            continue;
        }
        let a = col[run_start - 1].unwrap();
        let b = col[i].unwrap();
        for k in 0..len {
            let w = (k + 1) as f64 / (len + 1) as f64;
            col[run_start + k] = Some(a + (b - a) * w);
        }
        filled += len;
    }
    filled
}

fn longest_true_run(flags: &[bool]) -> (usize, usize) {
    let (mut best, mut cur_start, mut cur) = ((0, 0), 0, 0);
    for (i, &f) in flags.iter().enumerate() {
        if f {
            if cur == 0 {
                cur_start = i;
            }
            cur += 1;
            if cur > best.1 {
                best = (cur_start, cur);
            }
        } else {
            cur = 0;
        }
    }
    best
}

/// Writes the panel in the wide layout: `timestamp,<labels...>`, UTC
/// timestamps as `YYYY-MM-DDTHH:MM:SSZ`, values in shortest round-trip form.
pub fn write_wide<W: Write>(panel: &TimeSeriesPanel, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["timestamp".to_string()];
    header.extend(panel.labels().iter().cloned());
    let to_io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(&header).map_err(to_io)?;
    for t in 0..panel.n_obs() {
        let mut rec = vec![panel.timestamps()[t].format("%Y-%m-%dT%H:%M:%SZ").to_string()];
        rec.extend(panel.values().row(t).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_wide_file(panel: &TimeSeriesPanel, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_wide(panel, std::io::BufWriter::new(f))
}
