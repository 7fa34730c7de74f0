//! Transaction files with header `ts_ns,price`.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{ObservedSeries, SeriesSource};

/// One observation per distinct timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    /// Nanoseconds since the Unix epoch, UTC.
    pub ts_ns: i64,
    /// Geometric mean of the prices traded at `ts_ns`.
    pub price: f64,
    /// Mean log-price of the trades at `ts_ns`.
    pub log_price: f64,
    /// Number of trades aggregated into this record.
    pub trades: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TickLoadOptions {
    /// Largest backwards step in time, nanoseconds, that is re-sorted instead of rejected.
    pub reversal_tolerance_ns: i64,
}

/// Reads ticks from `path`.
pub fn load_ticks(path: &Path, opts: &TickLoadOptions) -> Result<Vec<TickRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_ticks(BufReader::new(file), &path.display().to_string(), opts)
}

/// Reads ticks from any reader; `label` names the source in error messages.
pub fn read_ticks<R: Read>(reader: R, label: &str, opts: &TickLoadOptions) -> Result<Vec<TickRecord>> {
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: label.to_string(),
        line,
        reason,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut raw: Vec<(i64, f64)> = Vec::new();
    let mut last = i64::MIN;
    let mut reordered = false;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(k + 1, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(k + 1, |p| p.line() as usize);
        if k == 0 {
            if rec.len() != 2 || &rec[0] != "ts_ns" || &rec[1] != "price" {
                return Err(parse_err(line, "expected header `ts_ns,price`".into()));
            }
            continue;
        }
        if rec.len() != 2 {
            return Err(parse_err(line, format!("expected 2 fields, got {}", rec.len())));
        }
        let ts: i64 = rec[0]
            .parse()
            .map_err(|_| parse_err(line, format!("bad timestamp `{}`", &rec[0])))?;
        let price: f64 = rec[1]
            .parse()
            .map_err(|_| parse_err(line, format!("bad price `{}`", &rec[1])))?;
        if !(price > 0.0 && price.is_finite()) {
            return Err(parse_err(line, format!("price must be positive, got {price}")));
        }
        if ts < last {
            if last - ts > opts.reversal_tolerance_ns {
                return Err(parse_err(
                    line,
                    format!("time reversal of {} ns exceeds tolerance", last - ts),
                ));
            }
            reordered = true;
        }
        last = last.max(ts);
        raw.push((ts, price.ln()));
    }
    if reordered {
        raw.sort_by_key(|&(ts, _)| ts);
    }
    Ok(aggregate(&raw))
}

fn aggregate(raw: &[(i64, f64)]) -> Vec<TickRecord> {
    let mut out: Vec<TickRecord> = Vec::new();
    let mut i = 0;
    while i < raw.len() {
        let ts = raw[i].0;
        let mut j = i;
        let mut sum = 0.0;
        while j < raw.len() && raw[j].0 == ts {
            sum += raw[j].1;
            j += 1;
        }
        let log_price = sum / (j - i) as f64;
        out.push(TickRecord {
            ts_ns: ts,
            price: log_price.exp(),
            log_price,
            trades: (j - i) as u32,
        });
        i = j;
    }
    out
}

/// Writes ticks in the `ts_ns,price` format.
pub fn write_ticks<W: Write>(out: W, ticks: &[TickRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["ts_ns", "price"])?;
    for t in ticks {
        w.write_record([t.ts_ns.to_string(), format!("{:.10}", t.price)])?;
    }
    w.flush().map_err(|e| Error::Serde(e.to_string()))?;
    Ok(())
}

/// Log-prices with `[from_ns, to_ns]`, times in seconds after `origin_ns`.
pub fn ticks_to_series(
    ticks: &[TickRecord],
    origin_ns: i64,
    from_ns: i64,
    to_ns: i64,
    source: SeriesSource,
) -> Result<ObservedSeries> {
    let lo = ticks.partition_point(|t| t.ts_ns < from_ns);
    let hi = ticks.partition_point(|t| t.ts_ns <= to_ns);
    let sel = &ticks[lo..hi.max(lo)];
    let times = sel
        .iter()
        .map(|t| (t.ts_ns - origin_ns) as f64 * 1e-9)
        .collect();
    let y = sel.iter().map(|t| t.log_price).collect();
    ObservedSeries::new(times, y, source)
}
