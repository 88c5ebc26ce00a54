//! CSV and JSON output formats.
//!
//! Every CSV starts with a `# config_hash=<hex> seed=<n>` comment line,
//! followed by a fixed header. Floats use the shortest representation that
//! parses back to the same value.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use lipfrag_core::{EnergyRecord, Snapshot};
use serde::{Deserialize, Serialize};

use crate::error::{CampaignError, Result};

pub const ENERGY_HEADER: [&str; 6] = [
    "time_s",
    "dissipated_J",
    "strain_J",
    "kinetic_J",
    "work_J",
    "active_elements",
];
pub const SNAPSHOT_HEADER: [&str; 4] = ["time_s", "centroid_m", "damage", "lip_active"];
pub const TABLE_HEADER: [&str; 11] = [
    "axis",
    "value",
    "source",
    "runs",
    "failed",
    "dissipated_mean_J",
    "dissipated_std_J",
    "fragment_size_mean_m",
    "fragment_size_std_m",
    "crack_count_mean",
    "error",
];

/// Shortest round-trip decimal form.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| CampaignError::Validation(format!("not a number: '{s}'")))
}

fn provenance_line(config_hash: &str, seed: Option<u64>) -> String {
    match seed {
        Some(s) => format!("# config_hash={config_hash} seed={s}\n"),
        None => format!("# config_hash={config_hash}\n"),
    }
}

fn writer(path: &Path, config_hash: &str, seed: Option<u64>) -> Result<csv::Writer<File>> {
    let mut f = File::create(path)?;
    f.write_all(provenance_line(config_hash, seed).as_bytes())?;
    Ok(csv::Writer::from_writer(f))
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?)
}

/// `(config_hash, seed)` from the leading comment line of a CSV written here.
pub fn read_provenance(path: &Path) -> Result<(String, Option<u64>)> {
    let mut line = String::new();
    BufReader::new(File::open(path)?).read_line(&mut line)?;
    let mut hash = None;
    let mut seed = None;
    for tok in line.trim_start_matches('#').split_whitespace() {
        if let Some(h) = tok.strip_prefix("config_hash=") {
            hash = Some(h.to_string());
        } else if let Some(s) = tok.strip_prefix("seed=") {
            seed = s.parse().ok();
        }
    }
    hash.map(|h| (h, seed))
        .ok_or_else(|| CampaignError::Validation(format!("{} has no provenance line", path.display())))
}

pub fn write_energy_csv(path: &Path, records: &[EnergyRecord], config_hash: &str, seed: u64) -> Result<()> {
    let mut w = writer(path, config_hash, Some(seed))?;
    w.write_record(ENERGY_HEADER)?;
    for r in records {
        w.write_record([
            fmt_f64(r.time),
            fmt_f64(r.dissipated),
            fmt_f64(r.strain),
            fmt_f64(r.kinetic),
            fmt_f64(r.work),
            r.active_elements.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_energy_csv(path: &Path) -> Result<Vec<EnergyRecord>> {
    let mut out = Vec::new();
    for row in reader(path)?.records() {
        let row = row?;
        if row.len() != ENERGY_HEADER.len() {
            return Err(CampaignError::Validation(format!(
                "energy row with {} fields",
                row.len()
            )));
        }
        out.push(EnergyRecord {
            time: parse_f64(&row[0])?,
            dissipated: parse_f64(&row[1])?,
            strain: parse_f64(&row[2])?,
            kinetic: parse_f64(&row[3])?,
            work: parse_f64(&row[4])?,
            active_elements: row[5]
                .parse()
                .map_err(|_| CampaignError::Validation(format!("bad count '{}'", &row[5])))?,
        });
    }
    Ok(out)
}

/// Long format: one row per element per snapshot.
pub fn write_snapshots_csv(path: &Path, snapshots: &[Snapshot], config_hash: &str, seed: u64) -> Result<()> {
    let mut w = writer(path, config_hash, Some(seed))?;
    w.write_record(SNAPSHOT_HEADER)?;
    for s in snapshots {
        let t = fmt_f64(s.time);
        for i in 0..s.damage.len() {
            w.write_record([
                t.as_str(),
                &fmt_f64(s.centroids[i]),
                &fmt_f64(s.damage[i]),
                if s.active[i] { "1" } else { "0" },
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshots_csv(path: &Path) -> Result<Vec<Snapshot>> {
    let mut out: Vec<Snapshot> = Vec::new();
    for row in reader(path)?.records() {
        let row = row?;
        if row.len() != SNAPSHOT_HEADER.len() {
            return Err(CampaignError::Validation(format!(
                "snapshot row with {} fields",
                row.len()
            )));
        }
        let t = parse_f64(&row[0])?;
        let active = match &row[3] {
            "1" => true,
            "0" => false,
            other => return Err(CampaignError::Validation(format!("bad lip_active flag '{other}'"))),
        };
        let start_new = out.last().is_none_or(|s| s.time.to_bits() != t.to_bits());
        if start_new {
            out.push(Snapshot {
                time: t,
                centroids: Vec::new(),
                damage: Vec::new(),
                active: Vec::new(),
            });
        }
        let s = out.last_mut().expect("pushed above");
        s.centroids.push(parse_f64(&row[1])?);
        s.damage.push(parse_f64(&row[2])?);
        s.active.push(active);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// One literature point for sweep overlays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub rate: f64,
    #[serde(rename = "dissipated_J")]
    pub dissipated: f64,
    #[serde(rename = "fragment_size_m")]
    pub fragment_size: f64,
    pub source: String,
}

/// Reads `rate,dissipated_J,fragment_size_m,source`.
pub fn read_reference_csv(path: &Path) -> Result<Vec<ReferencePoint>> {
    let mut out = Vec::new();
    for row in reader(path)?.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn write_table_csv(path: &Path, rows: &[Vec<String>], config_hash: &str) -> Result<()> {
    let mut w = writer(path, config_hash, None)?;
    w.write_record(TABLE_HEADER)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.0, 1.0, -2.5, 1e-300, 1.6626e-7, 0.1 + 0.2, f64::MAX, 5e-324, 820e3] {
            assert_eq!(parse_f64(&fmt_f64(x)).unwrap().to_bits(), x.to_bits(), "{x}");
        }
    }

    #[test]
    fn energy_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("energy.csv");
        let recs = vec![
            EnergyRecord {
                time: 0.0,
                dissipated: 0.0,
                strain: 0.0,
                kinetic: 1.0 / 3.0,
                work: 0.0,
                active_elements: 0,
            },
            EnergyRecord {
                time: 1.7e-11,
                dissipated: 1e-9,
                strain: 2.0 / 7.0,
                kinetic: 0.3,
                work: 0.1 + 0.2,
                active_elements: 12,
            },
        ];
        write_energy_csv(&p, &recs, "abc", 7).unwrap();
        assert_eq!(read_energy_csv(&p).unwrap(), recs);
        assert_eq!(read_provenance(&p).unwrap(), ("abc".to_string(), Some(7)));
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), ENERGY_HEADER.join(","));
    }
}
