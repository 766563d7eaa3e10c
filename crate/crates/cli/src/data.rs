//! Event datasets on disk.
//!
//! A dataset directory holds `manifest.json`, `totals.csv` (`unit_id,customers`)
//! and per event a trajectory CSV (`event_id,unit_id,timestamp,outaged_customers`)
//! and a covariate CSV (`event_id,unit_id,<feature>...`).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use gdf_core::ode::HazardEvent;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";
pub const TOTALS: &str = "totals.csv";
const FORMAT: &str = "gdf-events";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventFiles {
    pub id: usize,
    pub trajectory: String,
    pub covariates: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub units: usize,
    pub features: Vec<String>,
    pub totals: String,
    pub events: Vec<EventFiles>,
}

#[derive(Debug, Deserialize)]
struct TotalsRow {
    unit_id: usize,
    customers: f64,
}

#[derive(Debug, Deserialize)]
struct TrajectoryRow {
    event_id: usize,
    unit_id: usize,
    timestamp: f64,
    outaged_customers: f64,
}

fn data_err(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {msg}", path.display()))
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| data_err(path, e))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> CliResult<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_row(w: &mut csv::Writer<fs::File>, path: &Path, row: &[String]) -> CliResult<()> {
    w.write_record(row).map_err(|e| data_err(path, e))
}

/// Writes `events` (sharing one unit set) into `dir`.
pub fn write_dataset(dir: &Path, events: &[HazardEvent]) -> CliResult<Manifest> {
    let first = events
        .first()
        .ok_or_else(|| CliError::Data("no events to write".into()))?;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let features: Vec<String> = (0..first.covariate_dim()).map(|p| format!("z{p}")).collect();

    let totals_path = dir.join(TOTALS);
    let mut w = csv_writer(&totals_path)?;
    write_row(&mut w, &totals_path, &["unit_id".into(), "customers".into()])?;
    for (k, n) in first.totals.iter().enumerate() {
        write_row(&mut w, &totals_path, &[k.to_string(), n.to_string()])?;
    }
    finish(w, &totals_path)?;

    let mut files = Vec::with_capacity(events.len());
    for ev in events {
        if ev.totals != first.totals {
            return Err(CliError::Data(format!("event {} has a different unit set", ev.id)));
        }
        let traj = format!("event_{:04}_trajectory.csv", ev.id);
        let cov = format!("event_{:04}_covariates.csv", ev.id);

        let path = dir.join(&traj);
        let mut w = csv_writer(&path)?;
        let header = ["event_id", "unit_id", "timestamp", "outaged_customers"].map(String::from);
        write_row(&mut w, &path, &header)?;
        for (k, series) in ev.outages.iter().enumerate() {
            for (t, y) in ev.timestamps.iter().zip(series) {
                write_row(&mut w, &path, &[ev.id.to_string(), k.to_string(), t.to_string(), y.to_string()])?;
            }
        }
        finish(w, &path)?;

        let path = dir.join(&cov);
        let mut w = csv_writer(&path)?;
        let mut header = vec!["event_id".to_string(), "unit_id".to_string()];
        header.extend(features.iter().cloned());
        write_row(&mut w, &path, &header)?;
        for (k, z) in ev.covariates.iter().enumerate() {
            let mut row = vec![ev.id.to_string(), k.to_string()];
            row.extend(z.iter().map(|v| v.to_string()));
            write_row(&mut w, &path, &row)?;
        }
        finish(w, &path)?;

        files.push(EventFiles {
            id: ev.id,
            trajectory: traj,
            covariates: cov,
        });
    }

    let manifest = Manifest {
        format: FORMAT.into(),
        version: VERSION,
        units: first.units(),
        features,
        totals: TOTALS.into(),
        events: files,
    };
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| data_err(&path, e))?;
    fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(manifest)
}

fn row_err(path: &Path, header: &csv::StringRecord, e: csv::Error) -> CliError {
    if let csv::ErrorKind::Deserialize { pos, err } = e.kind() {
        let column = err.field().and_then(|f| header.get(f as usize)).unwrap_or("?");
        let line = pos.as_ref().map_or(0, |p| p.line());
        return data_err(path, format!("row {line}, column {column}: {}", err.kind()));
    }
    data_err(path, e)
}

fn reader(path: &Path) -> CliResult<csv::Reader<fs::File>> {
    csv::Reader::from_path(path).map_err(|e| data_err(path, e))
}

fn check_header(path: &Path, found: &csv::StringRecord, expected: &[&str]) -> CliResult<()> {
    let found: Vec<&str> = found.iter().collect();
    if found != expected {
        return Err(data_err(
            path,
            format!("header must be `{}`, found `{}`", expected.join(","), found.join(",")),
        ));
    }
    Ok(())
}

fn read_totals(path: &Path, units: usize) -> CliResult<Vec<f64>> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| data_err(path, e))?.clone();
    check_header(path, &header, &["unit_id", "customers"])?;
    let mut totals = vec![None; units];
    for (i, row) in rdr.deserialize::<TotalsRow>().enumerate() {
        let row = row.map_err(|e| row_err(path, &header, e))?;
        let line = i + 2;
        let slot = totals
            .get_mut(row.unit_id)
            .ok_or_else(|| data_err(path, format!("row {line}, column unit_id: unit {} out of range", row.unit_id)))?;
        if slot.is_some() {
            return Err(data_err(path, format!("row {line}, column unit_id: duplicate unit {}", row.unit_id)));
        }
        if !(row.customers > 0.0 && row.customers.is_finite()) {
            return Err(data_err(path, format!("row {line}, column customers: must be positive")));
        }
        *slot = Some(row.customers);
    }
    totals
        .into_iter()
        .enumerate()
        .map(|(k, v)| v.ok_or_else(|| data_err(path, format!("missing unit {k}"))))
        .collect()
}

fn read_trajectory(path: &Path, id: usize, units: usize) -> CliResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| data_err(path, e))?.clone();
    check_header(path, &header, &["event_id", "unit_id", "timestamp", "outaged_customers"])?;
    let mut by_unit: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for (i, row) in rdr.deserialize::<TrajectoryRow>().enumerate() {
        let row = row.map_err(|e| row_err(path, &header, e))?;
        let line = i + 2;
        if row.event_id != id {
            return Err(data_err(path, format!("row {line}, column event_id: expected {id}, found {}", row.event_id)));
        }
        if row.unit_id >= units {
            return Err(data_err(path, format!("row {line}, column unit_id: unit {} out of range", row.unit_id)));
        }
        if !row.timestamp.is_finite() || !row.outaged_customers.is_finite() {
            return Err(data_err(path, format!("row {line}: non-finite value")));
        }
        by_unit.entry(row.unit_id).or_default().push((row.timestamp, row.outaged_customers));
    }
    if by_unit.len() != units {
        return Err(data_err(path, format!("expected rows for {units} units, found {}", by_unit.len())));
    }
    let timestamps: Vec<f64> = by_unit[&0].iter().map(|r| r.0).collect();
    let mut outages = Vec::with_capacity(units);
    for (k, rows) in by_unit {
        let ts: Vec<f64> = rows.iter().map(|r| r.0).collect();
        if ts != timestamps {
            return Err(data_err(path, format!("column timestamp: unit {k} uses a different time grid than unit 0")));
        }
        outages.push(rows.iter().map(|r| r.1).collect());
    }
    Ok((timestamps, outages))
}

fn read_covariates(path: &Path, id: usize, units: usize, features: &[String]) -> CliResult<Vec<Vec<f64>>> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| data_err(path, e))?.clone();
    let mut expected = vec!["event_id", "unit_id"];
    expected.extend(features.iter().map(String::as_str));
    check_header(path, &header, &expected)?;
    let mut rows = vec![None; units];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| data_err(path, e))?;
        let line = i + 2;
        let field = |c: usize| -> CliResult<&str> {
            rec.get(c)
                .ok_or_else(|| data_err(path, format!("row {line}: missing column {}", expected[c])))
        };
        let int = |c: usize| -> CliResult<usize> {
            field(c)?
                .trim()
                .parse()
                .map_err(|_| data_err(path, format!("row {line}, column {}: not an integer", expected[c])))
        };
        if int(0)? != id {
            return Err(data_err(path, format!("row {line}, column event_id: expected {id}")));
        }
        let unit = int(1)?;
        if unit >= units || rows[unit].is_some() {
            return Err(data_err(path, format!("row {line}, column unit_id: unit {unit} out of range or repeated")));
        }
        let z = (2..expected.len())
            .map(|c| {
                field(c)?
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| data_err(path, format!("row {line}, column {}: not a finite number", expected[c])))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows[unit] = Some(z);
    }
    rows.into_iter()
        .enumerate()
        .map(|(k, r)| r.ok_or_else(|| data_err(path, format!("missing unit {k}"))))
        .collect()
}

pub fn read_manifest(dir: &Path) -> CliResult<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| data_err(&path, e))?;
    if m.format != FORMAT || m.version != VERSION {
        return Err(data_err(&path, format!("unsupported dataset {} v{}", m.format, m.version)));
    }
    if m.units == 0 || m.features.is_empty() {
        return Err(data_err(&path, "dataset needs at least one unit and one feature"));
    }
    Ok(m)
}

/// Loads every event listed in the manifest, optionally re-based at the outage trigger.
pub fn read_dataset(dir: &Path, trigger: Option<f64>) -> CliResult<Vec<HazardEvent>> {
    let m = read_manifest(dir)?;
    let totals = read_totals(&dir.join(&m.totals), m.units)?;
    let mut events = Vec::with_capacity(m.events.len());
    for f in &m.events {
        let traj: PathBuf = dir.join(&f.trajectory);
        let (timestamps, outages) = read_trajectory(&traj, f.id, m.units)?;
        let covariates = read_covariates(&dir.join(&f.covariates), f.id, m.units, &m.features)?;
        let mut ev = HazardEvent {
            id: f.id,
            covariates,
            totals: totals.clone(),
            timestamps,
            outages,
        };
        ev.validate().map_err(|e| data_err(&traj, e))?;
        if let Some(th) = trigger {
            ev = ev.apply_trigger(th).map_err(|e| data_err(&traj, e))?;
        }
        events.push(ev);
    }
    if events.len() < 2 {
        return Err(CliError::Data(format!("{}: at least two events are required", dir.display())));
    }
    Ok(events)
}
