//! Reports built from the files a run leaves under `scuc/`, so they can be
//! regenerated without solving again.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use super::LimitMode;
use super::ReportKind;
use crate::profile::ProfileSet;
use crate::scuc::{DlrComparison, RunOutcome};

pub const OUTCOME_FILE: &str = "outcome.json";

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("missing inputs: {0}")]
    Missing(String),
    #[error("{path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn read_err(path: &Path, e: impl ToString) -> ReportError {
    ReportError::Read {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn read_outcome(path: &Path) -> Result<RunOutcome, ReportError> {
    let text = fs::read_to_string(path).map_err(|e| read_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| read_err(path, e))
}

/// `(day, mode, directory)` of every solved day, in day then mode order.
fn solved(out: &Path) -> Result<Vec<(NaiveDate, LimitMode, PathBuf)>, ReportError> {
    let root = out.join("scuc");
    if !root.is_dir() {
        return Err(ReportError::Missing(format!("{} does not exist", root.display())));
    }
    let mut found = Vec::new();
    for day in fs::read_dir(&root)? {
        let day = day?.path();
        let Some(date) = day
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| NaiveDate::parse_from_str(n, "%Y-%m-%d").ok())
        else {
            continue;
        };
        for mode in fs::read_dir(&day)? {
            let mode = mode?.path();
            let Some(m) = mode.file_name().and_then(|n| n.to_str()).and_then(|n| n.parse::<LimitMode>().ok()) else {
                continue;
            };
            if mode.join(OUTCOME_FILE).is_file() {
                found.push((date, m, mode));
            }
        }
    }
    found.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    if found.is_empty() {
        return Err(ReportError::Missing(format!("no solved days under {}", root.display())));
    }
    Ok(found)
}

/// LMP span of one scenario: calendar quarter and weekday/weekend, with hours
/// split into trough, normal and peak thirds by the day's mean price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceRange {
    pub quarter: u32,
    pub day_type: String,
    pub days: usize,
    /// `(min, max)` per class: trough, normal, peak.
    pub classes: [(f64, f64); 3],
}

fn quarter(d: NaiveDate) -> u32 {
    (d.month() - 1) / 3 + 1
}

fn day_type(d: NaiveDate) -> &'static str {
    match d.weekday() {
        Weekday::Sat | Weekday::Sun => "weekend",
        _ => "weekday",
    }
}

/// Class (0 trough, 1 normal, 2 peak) of every hour, by rank of the hourly
/// mean over buses; ties go to the earlier hour.
pub fn hour_classes(lmp: &ProfileSet) -> Vec<usize> {
    let n = lmp.hours;
    let mean: Vec<f64> = (0..n)
        .map(|t| lmp.series.values().map(|s| s[t]).sum::<f64>() / lmp.series.len().max(1) as f64)
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| mean[a].total_cmp(&mean[b]).then(a.cmp(&b)));
    let mut class = vec![0; n];
    for (rank, &t) in order.iter().enumerate() {
        class[t] = rank * 3 / n.max(1);
    }
    class
}

pub fn price_ranges(days: &[(NaiveDate, ProfileSet)]) -> Vec<PriceRange> {
    let mut out: BTreeMap<(u32, &'static str), PriceRange> = BTreeMap::new();
    for (d, lmp) in days {
        let key = (quarter(*d), day_type(*d));
        let e = out.entry(key).or_insert_with(|| PriceRange {
            quarter: key.0,
            day_type: key.1.to_string(),
            days: 0,
            classes: [(f64::INFINITY, f64::NEG_INFINITY); 3],
        });
        e.days += 1;
        let classes = hour_classes(lmp);
        for series in lmp.series.values() {
            for (t, &p) in series.iter().enumerate() {
                let c = &mut e.classes[classes[t]];
                c.0 = c.0.min(p);
                c.1 = c.1.max(p);
            }
        }
    }
    out.into_values().collect()
}

fn modes_of(found: &[(NaiveDate, LimitMode, PathBuf)]) -> Vec<LimitMode> {
    let mut m: Vec<LimitMode> = found.iter().map(|f| f.1).collect();
    m.sort();
    m.dedup();
    m
}

/// Writes the report files of one kind under `out/reports/` and returns
/// their paths.
pub fn report(out: &Path, kind: ReportKind, svg: bool) -> Result<Vec<PathBuf>, ReportError> {
    let found = solved(out)?;
    let dir = out.join("reports");
    fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    match kind {
        ReportKind::Prices => {
            for mode in modes_of(&found) {
                let mut days = Vec::new();
                for (d, _, p) in found.iter().filter(|f| f.1 == mode) {
                    let path = p.join("lmp.csv");
                    let lmp = ProfileSet::read_csv(&path, "bus_id", "lmp_usd_mwh").map_err(|e| read_err(&path, e))?;
                    days.push((*d, lmp));
                }
                let ranges = price_ranges(&days);
                let path = dir.join(format!("prices_{mode}.csv"));
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record([
                    "quarter", "day_type", "days", "trough_min", "trough_max", "normal_min", "normal_max", "peak_min",
                    "peak_max",
                ])?;
                for r in &ranges {
                    let mut row = vec![format!("Q{}", r.quarter), r.day_type.clone(), r.days.to_string()];
                    for (lo, hi) in r.classes {
                        row.push(lo.to_string());
                        row.push(hi.to_string());
                    }
                    w.write_record(&row)?;
                }
                w.flush()?;
                files.push(path);
                if svg {
                    let path = dir.join(format!("prices_{mode}.svg"));
                    fs::write(&path, price_svg(&ranges, mode))?;
                    files.push(path);
                }
            }
        }
        ReportKind::Congestion => {
            for mode in modes_of(&found) {
                let path = dir.join(format!("congestion_{mode}.csv"));
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(["timestamp", "full_count", "near_count", "full_lines", "near_lines"])?;
                let mut counts = Vec::new();
                for (_, _, p) in found.iter().filter(|f| f.1 == mode) {
                    let src = p.join("congestion.csv");
                    let mut r = csv::Reader::from_path(&src).map_err(|e| read_err(&src, e))?;
                    for rec in r.records() {
                        let rec = rec?;
                        let num = |i: usize| rec.get(i).and_then(|v| v.parse::<usize>().ok()).ok_or_else(|| read_err(&src, "bad count"));
                        counts.push((num(1)?, num(2)?));
                        w.write_record(&rec)?;
                    }
                }
                w.flush()?;
                files.push(path);
                if svg {
                    let path = dir.join(format!("congestion_{mode}.svg"));
                    fs::write(&path, congestion_svg(&counts, mode))?;
                    files.push(path);
                }
            }
        }
        ReportKind::DlrCompare => {
            let mut days: BTreeMap<NaiveDate, [Option<&Path>; 2]> = BTreeMap::new();
            for (d, m, p) in &found {
                let slot = match m {
                    LimitMode::Daily => 0,
                    LimitMode::Hourly => 1,
                    LimitMode::Static => continue,
                };
                days.entry(*d).or_default()[slot] = Some(p);
            }
            for (d, pair) in days {
                let [Some(daily), Some(hourly)] = pair else { continue };
                let cmp = DlrComparison {
                    daily: read_outcome(&daily.join(OUTCOME_FILE))?,
                    hourly: read_outcome(&hourly.join(OUTCOME_FILE))?,
                };
                let path = dir.join(format!("dlr_compare_{}.csv", d.format("%Y-%m-%d")));
                cmp.write_csv(&path).map_err(|e| read_err(&path, e))?;
                files.push(path);
            }
            if files.is_empty() {
                return Err(ReportError::Missing("no day was solved under both daily and hourly limits".into()));
            }
        }
    }
    Ok(files)
}

const W: f64 = 720.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;

fn svg_frame(title: &str, body: &str, y_max: f64, y_label: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, W / 2.0);
    let _ = writeln!(s, r#"<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, H - PAD, W - PAD, H - PAD);
    let _ = writeln!(s, r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}" stroke="black"/>"#, H - PAD);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.1}</text>"#, PAD - 4.0, PAD + 4.0, y_max);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">0</text>"#, PAD - 4.0, H - PAD + 4.0);
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{y_label}</text>"#, H / 2.0, H / 2.0);
    s.push_str(body);
    s.push_str("</svg>\n");
    s
}

fn congestion_svg(counts: &[(usize, usize)], mode: LimitMode) -> String {
    let top = counts.iter().map(|c| c.0 + c.1).max().unwrap_or(0).max(1) as f64;
    let bw = (W - 2.0 * PAD) / counts.len().max(1) as f64;
    let scale = (H - 2.0 * PAD) / top;
    let mut body = String::new();
    for (i, &(full, near)) in counts.iter().enumerate() {
        let x = PAD + i as f64 * bw;
        let hf = full as f64 * scale;
        let hn = near as f64 * scale;
        let _ = writeln!(body, r##"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{hf:.2}" fill="#c0392b"/>"##, H - PAD - hf, bw * 0.9);
        let _ = writeln!(body, r##"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{hn:.2}" fill="#f5b041"/>"##, H - PAD - hf - hn, bw * 0.9);
    }
    let _ = writeln!(body, r#"<text x="{}" y="{}" text-anchor="middle">hour</text>"#, W / 2.0, H - 16.0);
    svg_frame(&format!("Congested lines per hour ({mode} limits)"), &body, top, "lines")
}

fn price_svg(ranges: &[PriceRange], mode: LimitMode) -> String {
    let top = ranges
        .iter()
        .flat_map(|r| r.classes.iter().map(|c| c.1))
        .fold(1.0f64, f64::max);
    let groups = ranges.len().max(1) as f64;
    let gw = (W - 2.0 * PAD) / groups;
    let bw = gw / 4.0;
    let scale = (H - 2.0 * PAD) / top;
    let colors = ["#2e86c1", "#27ae60", "#c0392b"];
    let mut body = String::new();
    for (g, r) in ranges.iter().enumerate() {
        for (k, &(lo, hi)) in r.classes.iter().enumerate() {
            let x = PAD + g as f64 * gw + (k as f64 + 0.5) * bw;
            let y_hi = H - PAD - hi.max(0.0) * scale;
            let h = (hi.max(0.0) - lo.max(0.0)) * scale;
            let _ = writeln!(body, r#"<rect x="{x:.2}" y="{y_hi:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#, bw * 0.8, h.max(1.0), colors[k]);
        }
        let _ = writeln!(
            body,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">Q{} {}</text>"#,
            PAD + (g as f64 + 0.5) * gw,
            H - PAD + 14.0,
            r.quarter,
            r.day_type
        );
    }
    svg_frame(&format!("LMP range by scenario ({mode} limits)"), &body, top, "$/MWh")
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn lmp(day: NaiveDate, values: Vec<f64>) -> ProfileSet {
        let start = Utc.from_utc_datetime(&day.and_hms_opt(0, 0, 0).unwrap());
        let mut p = ProfileSet::new(start, values.len());
        p.insert(1, values.clone()).unwrap();
        p.insert(2, values.iter().map(|v| v + 1.0).collect()).unwrap();
        p
    }

    #[test]
    fn terciles_split_hours_evenly() {
        let d = NaiveDate::from_ymd_opt(2019, 7, 1).unwrap();
        let c = hour_classes(&lmp(d, (0..24).rev().map(|v| v as f64).collect()));
        assert_eq!(c.iter().filter(|&&k| k == 0).count(), 8);
        assert_eq!(c[0], 2);
        assert_eq!(c[23], 0);
    }

    #[test]
    fn one_day_gives_one_row() {
        let d = NaiveDate::from_ymd_opt(2019, 7, 1).unwrap();
        let r = price_ranges(&[(d, lmp(d, (0..24).map(|v| v as f64).collect()))]);
        assert_eq!(r.len(), 1);
        assert_eq!((r[0].quarter, r[0].day_type.as_str()), (3, "weekday"));
        assert_eq!(r[0].classes[0], (0.0, 8.0));
        assert_eq!(r[0].classes[2], (16.0, 24.0));
    }

    #[test]
    fn scenarios_key_on_quarter_and_weekend() {
        let sat = NaiveDate::from_ymd_opt(2019, 1, 5).unwrap();
        let mon = NaiveDate::from_ymd_opt(2019, 1, 7).unwrap();
        let tue = NaiveDate::from_ymd_opt(2019, 1, 8).unwrap();
        let r = price_ranges(&[
            (sat, lmp(sat, vec![1.0; 24])),
            (mon, lmp(mon, vec![2.0; 24])),
            (tue, lmp(tue, vec![5.0; 24])),
        ]);
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].day_type, "weekday");
        assert_eq!(r[0].days, 2);
        assert_eq!(r[0].classes[1], (2.0, 6.0));
        assert_eq!(r[1].day_type, "weekend");
    }

    #[test]
    fn missing_outputs_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(report(dir.path(), ReportKind::Prices, false), Err(ReportError::Missing(_))));
    }
}
