//! CSV formats for records, reference monitors and cell weights.

use std::io::{Read, Write};

use crate::coverage::{CoverageCell, WeightMap};
use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::store::{MobilityRecord, ReferenceMonitor};

pub const RECORDS_HEADER: [&str; 4] = ["vehicle_id", "timestamp", "lat", "lon"];
pub const MONITORS_HEADER: [&str; 4] = ["monitor_id", "lat", "lon", "period_s"];
pub const WEIGHTS_HEADER: [&str; 3] = ["stratum_id", "interval_id", "weight"];

/// A completely empty input is accepted as a file with no rows.
fn reader<R: Read>(r: R, expected: &[&str]) -> Result<csv::Reader<R>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let header = rdr.headers()?.clone();
    if !header.is_empty() && header.iter().ne(expected.iter().copied()) {
        return Err(Error::Format(format!(
            "expected header {:?}, found {:?}",
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(rdr)
}

fn parse_record(row: &csv::StringRecord) -> Option<MobilityRecord> {
    if row.len() != 4 {
        return None;
    }
    let vehicle_id = row[0].parse().ok()?;
    let timestamp: i64 = row[1].parse().ok()?;
    let lat = row[2].parse().ok()?;
    let lon = row[3].parse().ok()?;
    if timestamp < 0 {
        return None;
    }
    Some(MobilityRecord {
        vehicle_id,
        timestamp,
        location: GeoPoint::new(lat, lon).ok()?,
    })
}

/// Parse a records CSV. Rows that fail to parse or validate are skipped and
/// counted in the second return value.
pub fn read_records_csv<R: Read>(r: R) -> Result<(Vec<MobilityRecord>, usize)> {
    let mut rdr = reader(r, &RECORDS_HEADER)?;
    let mut records = Vec::new();
    let mut malformed = 0;
    for row in rdr.records() {
        match row.ok().as_ref().and_then(parse_record) {
            Some(rec) => records.push(rec),
            None => malformed += 1,
        }
    }
    Ok((records, malformed))
}

pub fn write_records_csv<W: Write>(w: W, records: &[MobilityRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(RECORDS_HEADER)?;
    for r in records {
        wtr.write_record(&[
            r.vehicle_id.to_string(),
            r.timestamp.to_string(),
            r.location.lat().to_string(),
            r.location.lon().to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_monitors_csv<R: Read>(r: R) -> Result<Vec<ReferenceMonitor>> {
    let mut rdr = reader(r, &MONITORS_HEADER)?;
    let mut out = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let bad = |what: &str| Error::Format(format!("monitors row {}: bad {what}", line + 1));
        if row.len() != 4 {
            return Err(bad("field count"));
        }
        let id = row[0].parse().map_err(|_| bad("monitor_id"))?;
        let lat = row[1].parse().map_err(|_| bad("lat"))?;
        let lon = row[2].parse().map_err(|_| bad("lon"))?;
        let period = row[3].parse().map_err(|_| bad("period_s"))?;
        out.push(ReferenceMonitor::new(id, GeoPoint::new(lat, lon)?, period)?);
    }
    Ok(out)
}

pub fn read_weights_csv<R: Read>(r: R) -> Result<WeightMap> {
    let mut rdr = reader(r, &WEIGHTS_HEADER)?;
    let mut entries = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let bad = |what: &str| Error::Format(format!("weights row {}: bad {what}", line + 1));
        if row.len() != 3 {
            return Err(bad("field count"));
        }
        let s = row[0].parse().map_err(|_| bad("stratum_id"))?;
        let t = row[1].parse().map_err(|_| bad("interval_id"))?;
        let w = row[2].parse().map_err(|_| bad("weight"))?;
        entries.push((CoverageCell::new(s, t), w));
    }
    WeightMap::new(entries)
}
