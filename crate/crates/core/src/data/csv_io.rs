//! CSV layout: one `<catchment_id>.csv` per catchment with a `date` column
//! (ISO-8601) followed by one column per variable, and a `static.csv` with a
//! `catchment_id` column followed by one column per attribute. Empty cells
//! are missing values.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};

use super::dataset::CatchmentDataset;
use super::variables::{DISCHARGE, DRIVERS, PRECIPITATION, STATIC_ATTRIBUTES, TEMPERATURE, TEMPERATURE_RANGE_K};
use crate::error::{Error, Result};

pub const STATIC_FILE: &str = "static.csv";
const DATE_COLUMN: &str = "date";
const ID_COLUMN: &str = "catchment_id";
/// Missing dates listed in a gap error before truncating.
const GAP_LIST_LIMIT: usize = 10;

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::ingest(path, line, e.to_string())
}

fn parse_value(path: &Path, line: u64, column: &str, cell: &str) -> Result<f64> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(f64::NAN);
    }
    cell.parse::<f64>()
        .map_err(|_| Error::ingest(path, line, format!("column {column}: cannot parse '{cell}' as a number")))
}

/// Reads one dynamic file. The catchment id is the file stem.
pub fn read_dynamic_csv(path: &Path, statics: BTreeMap<String, f64>) -> Result<CatchmentDataset> {
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::ingest(path, 0, "file name is not a catchment id"))?
        .to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers: Vec<String> = reader.headers().map_err(|e| csv_error(path, e))?.iter().map(|h| h.trim().to_string()).collect();
    if headers.first().map(String::as_str) != Some(DATE_COLUMN) {
        return Err(Error::ingest(path, 1, format!("first column must be '{DATE_COLUMN}'")));
    }
    if !headers.iter().any(|h| h == DISCHARGE) {
        return Err(Error::ingest(path, 1, format!("missing column '{DISCHARGE}'")));
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len() - 1];
    let mut start: Option<NaiveDate> = None;
    let mut expected: Option<NaiveDate> = None;
    let mut missing: Vec<NaiveDate> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let raw_date = rec.get(0).unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d")
            .map_err(|_| Error::ingest(path, line, format!("unparseable date '{raw_date}'")))?;
        if let Some(exp) = expected {
            if date < exp {
                return Err(Error::ingest(path, line, format!("date {date} is out of order")));
            }
            let mut d = exp;
            while d < date {
                missing.push(d);
                d += Duration::days(1);
            }
        } else {
            start = Some(date);
        }
        expected = Some(date + Duration::days(1));
        for (k, name) in headers.iter().enumerate().skip(1) {
            let v = parse_value(path, line, name, rec.get(k).unwrap_or(""))?;
            if (name == DISCHARGE || name == PRECIPITATION) && v < 0.0 {
                return Err(Error::ingest(path, line, format!("negative {name} {v}")));
            }
            if name == TEMPERATURE && !(TEMPERATURE_RANGE_K.0..=TEMPERATURE_RANGE_K.1).contains(&v) && !v.is_nan() {
                return Err(Error::ingest(path, line, format!("implausible temperature {v} K (expected kelvin)")));
            }
            columns[k - 1].push(v);
        }
    }
    if !missing.is_empty() {
        let shown: Vec<String> = missing.iter().take(GAP_LIST_LIMIT).map(|d| d.to_string()).collect();
        let more = if missing.len() > GAP_LIST_LIMIT { format!(" and {} more", missing.len() - GAP_LIST_LIMIT) } else { String::new() };
        return Err(Error::ingest(path, 0, format!("date gap: missing {}{more}", shown.join(", "))));
    }
    let start = start.ok_or_else(|| Error::ingest(path, 1, "no data rows"))?;
    let mut dynamic = BTreeMap::new();
    let mut discharge = Vec::new();
    for (name, values) in headers.into_iter().skip(1).zip(columns) {
        if name == DISCHARGE {
            discharge = values;
        } else if dynamic.insert(name.clone(), values).is_some() {
            return Err(Error::ingest(path, 1, format!("duplicate column '{name}'")));
        }
    }
    CatchmentDataset::new(id, start, dynamic, statics, discharge)
}

/// Reads `static.csv`: catchment id to attribute map.
pub fn read_static_csv(path: &Path) -> Result<BTreeMap<String, BTreeMap<String, f64>>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers: Vec<String> = reader.headers().map_err(|e| csv_error(path, e))?.iter().map(|h| h.trim().to_string()).collect();
    if headers.first().map(String::as_str) != Some(ID_COLUMN) {
        return Err(Error::ingest(path, 1, format!("first column must be '{ID_COLUMN}'")));
    }
    let mut out = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = rec.get(0).unwrap_or("").trim().to_string();
        if id.is_empty() {
            return Err(Error::ingest(path, line, "empty catchment id"));
        }
        let mut attrs = BTreeMap::new();
        for (k, name) in headers.iter().enumerate().skip(1) {
            let v = parse_value(path, line, name, rec.get(k).unwrap_or(""))?;
            if !v.is_nan() {
                attrs.insert(name.clone(), v);
            }
        }
        if out.insert(id.clone(), attrs).is_some() {
            return Err(Error::ingest(path, line, format!("duplicate catchment id '{id}'")));
        }
    }
    Ok(out)
}

/// Reads every catchment listed in `<dir>/static.csv` from `<dir>/<id>.csv`.
pub fn read_dataset_dir(dir: &Path) -> Result<Vec<CatchmentDataset>> {
    let statics = read_static_csv(&dir.join(STATIC_FILE))?;
    let mut out = Vec::with_capacity(statics.len());
    for (id, attrs) in statics {
        out.push(read_dynamic_csv(&dir.join(format!("{id}.csv")), attrs)?);
    }
    Ok(out)
}

/// Dynamic columns in a stable order: drivers first, then any others by name.
fn dynamic_column_order(d: &CatchmentDataset) -> Vec<&str> {
    let mut names: Vec<&str> = DRIVERS.iter().copied().filter(|n| d.dynamic.contains_key(*n)).collect();
    names.extend(d.dynamic.keys().map(String::as_str).filter(|n| !DRIVERS.contains(n)));
    names
}

fn cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

pub fn dynamic_csv_path(dir: &Path, catchment_id: &str) -> PathBuf {
    dir.join(format!("{catchment_id}.csv"))
}

/// Writes one dynamic file per catchment plus `static.csv`.
pub fn write_dataset_dir(dir: &Path, datasets: &[CatchmentDataset]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for d in datasets {
        let path = dynamic_csv_path(dir, &d.catchment_id);
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        let names = dynamic_column_order(d);
        let mut header = vec![DATE_COLUMN];
        header.extend(names.iter().copied());
        header.push(DISCHARGE);
        w.write_record(&header).map_err(|e| csv_error(&path, e))?;
        for i in 0..d.len() {
            let mut row = vec![d.date(i).to_string()];
            row.extend(names.iter().map(|n| cell(d.dynamic[*n][i])));
            row.push(cell(d.discharge[i]));
            w.write_record(&row).map_err(|e| csv_error(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    let mut attrs: Vec<&str> = STATIC_ATTRIBUTES.to_vec();
    for d in datasets {
        for k in d.statics.keys() {
            if !attrs.contains(&k.as_str()) {
                attrs.push(k);
            }
        }
    }
    attrs.retain(|a| datasets.iter().any(|d| d.statics.contains_key(*a)));
    let path = dir.join(STATIC_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
    let mut header = vec![ID_COLUMN];
    header.extend(attrs.iter().copied());
    w.write_record(&header).map_err(|e| csv_error(&path, e))?;
    for d in datasets {
        let mut row = vec![d.catchment_id.clone()];
        row.extend(attrs.iter().map(|a| d.statics.get(*a).map_or(String::new(), |v| cell(*v))));
        w.write_record(&row).map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn minimal_file_ingests() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "b1.csv",
            "date,precipitation_mm_day,temperature_2m_k,discharge_m3_s\n2001-01-01,0.5,270.1,1.5\n2001-01-02,,271.0,\n",
        );
        let d = read_dynamic_csv(&p, BTreeMap::new()).unwrap();
        assert_eq!(d.catchment_id, "b1");
        assert_eq!(d.len(), 2);
        assert_eq!(d.discharge[0], 1.5);
        assert!(d.discharge[1].is_nan());
        assert!(d.dynamic[PRECIPITATION][1].is_nan());
    }

    #[test]
    fn gap_error_lists_missing_dates() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "g.csv", "date,discharge_m3_s\n2001-01-01,1\n2001-01-04,1\n");
        let msg = read_dynamic_csv(&p, BTreeMap::new()).unwrap_err().to_string();
        assert!(msg.contains("2001-01-02") && msg.contains("2001-01-03"), "{msg}");
        assert!(msg.contains("g.csv"));
    }

    #[test]
    fn bad_rows_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "n.csv", "date,discharge_m3_s\n2001-01-01,1\n2001-01-02,-3\n");
        match read_dynamic_csv(&p, BTreeMap::new()).unwrap_err() {
            Error::Ingest { line, .. } => assert_eq!(line, 3),
            e => panic!("{e}"),
        }
        let p = write(dir.path(), "d.csv", "date,discharge_m3_s\n01/02/2001,1\n");
        assert!(matches!(read_dynamic_csv(&p, BTreeMap::new()), Err(Error::Ingest { line: 2, .. })));
        let p = write(dir.path(), "m.csv", "date,precipitation_mm_day\n2001-01-01,1\n");
        assert!(read_dynamic_csv(&p, BTreeMap::new()).unwrap_err().to_string().contains(DISCHARGE));
        let p = write(dir.path(), "t.csv", "date,temperature_2m_k,discharge_m3_s\n2001-01-01,12.5,1\n");
        assert!(read_dynamic_csv(&p, BTreeMap::new()).is_err());
    }

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut dynamic = BTreeMap::new();
        dynamic.insert(PRECIPITATION.to_string(), vec![0.1, f64::NAN, 1.0 / 3.0]);
        dynamic.insert("upstream_discharge_m3_s".to_string(), vec![2.0, 2.5, 3.0]);
        let mut statics = BTreeMap::new();
        statics.insert("area_km2".to_string(), 512.25);
        let d = CatchmentDataset::new(
            "x",
            NaiveDate::from_ymd_opt(2004, 2, 28).unwrap(),
            dynamic,
            statics,
            vec![1e-7, 3.25, f64::NAN],
        )
        .unwrap();
        write_dataset_dir(dir.path(), std::slice::from_ref(&d)).unwrap();
        let back = read_dataset_dir(dir.path()).unwrap();
        assert_eq!(back.len(), 1);
        let b = &back[0];
        assert_eq!((b.start, b.len(), &b.statics), (d.start, d.len(), &d.statics));
        for (name, s) in &d.dynamic {
            let t = &b.dynamic[name];
            assert!(s.iter().zip(t).all(|(p, q)| p == q || (p.is_nan() && q.is_nan())));
        }
        assert_eq!(b.discharge[..2], d.discharge[..2]);
        assert!(b.discharge[2].is_nan());
    }
}
