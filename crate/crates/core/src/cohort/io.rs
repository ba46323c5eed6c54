use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDateTime;

use super::record::{Culture, HourlyField, HourlyObservation, PatientRecord, SofaScore, STATIC_COLUMNS};
use crate::error::{Error, Result};

pub const PATIENTS_FILE: &str = "patients.csv";
pub const HOURLY_FILE: &str = "hourly.csv";
pub const SOFA_FILE: &str = "sofa.csv";
pub const CULTURES_FILE: &str = "cultures.csv";

pub const TS_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

pub fn format_ts(ts: NaiveDateTime) -> String {
    ts.format(TS_FORMAT).to_string()
}

pub fn parse_ts(s: &str) -> std::result::Result<NaiveDateTime, String> {
    NaiveDateTime::parse_from_str(s, TS_FORMAT).map_err(|e| format!("bad timestamp {s:?}: {e}"))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV writer that optionally leads with a `#` comment line.
pub(crate) fn csv_writer(path: &Path, comment: Option<&str>) -> Result<csv::Writer<File>> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    if let Some(c) = comment {
        writeln!(file, "# {c}").map_err(|e| Error::io(path, e))?;
    }
    Ok(csv::Writer::from_writer(file))
}

/// CSV reader that skips `#` comment lines.
pub(crate) fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file))
}

pub(crate) fn write_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

/// Iterates data rows, tagging each with its 1-based file line.
pub(crate) fn rows(
    path: &Path,
    reader: &mut csv::Reader<File>,
    expected_header: &[&str],
) -> Result<Vec<(u64, csv::StringRecord)>> {
    let file = path.display().to_string();
    let header = reader.headers().map_err(|e| Error::Parse {
        file: file.clone(),
        line: 1,
        msg: e.to_string(),
    })?;
    if !expected_header.is_empty() && header.iter().ne(expected_header.iter().copied()) {
        return Err(Error::Parse {
            file,
            line: header.position().map_or(1, |p| p.line()),
            msg: format!("expected header {expected_header:?}"),
        });
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            file: file.clone(),
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push((line, rec));
    }
    Ok(out)
}

pub fn write_cohort(records: &[PatientRecord], dir: &Path, comment: Option<&str>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join(PATIENTS_FILE);
    let mut w = csv_writer(&path, comment)?;
    let mut header = vec!["patient_id", "admit_ts"];
    header.extend(STATIC_COLUMNS);
    w.write_record(&header).map_err(|e| write_err(&path, e))?;
    for r in records {
        if r.statics.len() != STATIC_COLUMNS.len() {
            return Err(Error::input(format!(
                "{} has {} statics, expected {}",
                r.patient_id,
                r.statics.len(),
                STATIC_COLUMNS.len()
            )));
        }
        let mut row = vec![r.patient_id.clone(), format_ts(r.admit_ts)];
        row.extend(r.statics.iter().map(f64::to_string));
        w.write_record(&row).map_err(|e| write_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(HOURLY_FILE);
    let mut w = csv_writer(&path, comment)?;
    let mut header = vec!["patient_id", "ts"];
    header.extend(HourlyField::ALL.map(HourlyField::column));
    w.write_record(&header).map_err(|e| write_err(&path, e))?;
    for r in records {
        for obs in &r.hourly {
            let mut row = vec![r.patient_id.clone(), format_ts(obs.ts)];
            row.extend(obs.values.iter().map(|v| fmt_opt(*v)));
            w.write_record(&row).map_err(|e| write_err(&path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(SOFA_FILE);
    let mut w = csv_writer(&path, comment)?;
    w.write_record(["patient_id", "ts", "sofa"]).map_err(|e| write_err(&path, e))?;
    for r in records {
        for s in &r.sofa {
            w.write_record([r.patient_id.as_str(), &format_ts(s.ts), &s.score.to_string()])
                .map_err(|e| write_err(&path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(CULTURES_FILE);
    let mut w = csv_writer(&path, comment)?;
    w.write_record(["patient_id", "ts", "positive"]).map_err(|e| write_err(&path, e))?;
    for r in records {
        for c in &r.cultures {
            let flag = if c.positive { "1" } else { "0" };
            w.write_record([r.patient_id.as_str(), &format_ts(c.ts), flag])
                .map_err(|e| write_err(&path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}

struct LineCtx<'a> {
    file: &'a str,
    line: u64,
}

impl LineCtx<'_> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            file: self.file.to_owned(),
            line: self.line,
            msg: msg.into(),
        }
    }

    fn ts(&self, s: &str) -> Result<NaiveDateTime> {
        parse_ts(s).map_err(|m| self.err(m))
    }

    fn float(&self, s: &str, column: &str) -> Result<f64> {
        let v: f64 = s.parse().map_err(|_| self.err(format!("{column}: not a number: {s:?}")))?;
        if !v.is_finite() {
            return Err(self.err(format!("{column}: non-finite value")));
        }
        Ok(v)
    }

    fn opt_float(&self, s: &str, column: &str) -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            self.float(s, column).map(Some)
        }
    }

    fn patient<'m>(&self, index: &'m HashMap<String, usize>, id: &str) -> Result<&'m usize> {
        index.get(id).ok_or_else(|| self.err(format!("unknown patient {id:?}")))
    }
}

/// Reads the four cohort files. Hourly rows must be strictly increasing in
/// time per patient; the length of stay is recovered from the last row.
pub fn read_cohort(dir: &Path) -> Result<Vec<PatientRecord>> {
    let path = dir.join(PATIENTS_FILE);
    let file = path.display().to_string();
    let mut header = vec!["patient_id", "admit_ts"];
    header.extend(STATIC_COLUMNS);
    let mut records: Vec<PatientRecord> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (line, rec) in rows(&path, &mut csv_reader(&path)?, &header)? {
        let ctx = LineCtx { file: &file, line };
        let id = rec[0].to_owned();
        if id.is_empty() {
            return Err(ctx.err("empty patient_id"));
        }
        let admit_ts = ctx.ts(&rec[1])?;
        let statics = STATIC_COLUMNS
            .iter()
            .enumerate()
            .map(|(k, name)| ctx.float(&rec[k + 2], name))
            .collect::<Result<Vec<_>>>()?;
        if index.insert(id.clone(), records.len()).is_some() {
            return Err(ctx.err(format!("duplicate patient {id:?}")));
        }
        records.push(PatientRecord {
            patient_id: id,
            admit_ts,
            los_hours: 0,
            hourly: Vec::new(),
            statics,
            sofa: Vec::new(),
            cultures: Vec::new(),
        });
    }

    let path = dir.join(HOURLY_FILE);
    let file = path.display().to_string();
    let mut header = vec!["patient_id", "ts"];
    header.extend(HourlyField::ALL.map(HourlyField::column));
    for (line, rec) in rows(&path, &mut csv_reader(&path)?, &header)? {
        let ctx = LineCtx { file: &file, line };
        let r = &mut records[*ctx.patient(&index, &rec[0])?];
        let ts = ctx.ts(&rec[1])?;
        if ts < r.admit_ts {
            return Err(ctx.err("hourly row before admission"));
        }
        if r.hourly.last().is_some_and(|prev| prev.ts >= ts) {
            return Err(ctx.err(format!("hourly rows out of order for {}", r.patient_id)));
        }
        let mut obs = HourlyObservation::empty(ts);
        for field in HourlyField::ALL {
            obs.set(field, ctx.opt_float(&rec[field.index() + 2], field.column())?);
        }
        r.hourly.push(obs);
    }
    for r in &mut records {
        if let Some(last) = r.hourly.last() {
            let hours = (last.ts - r.admit_ts).num_hours();
            r.los_hours = u32::try_from(hours).map_err(|_| Error::Format(format!("{}: bad stay length", r.patient_id)))?;
        }
    }

    let path = dir.join(SOFA_FILE);
    let file = path.display().to_string();
    for (line, rec) in rows(&path, &mut csv_reader(&path)?, &["patient_id", "ts", "sofa"])? {
        let ctx = LineCtx { file: &file, line };
        let i = *ctx.patient(&index, &rec[0])?;
        let ts = ctx.ts(&rec[1])?;
        let score: u8 = rec[2]
            .parse()
            .ok()
            .filter(|s| *s <= 24)
            .ok_or_else(|| ctx.err(format!("sofa score {:?} outside 0..=24", &rec[2])))?;
        records[i].sofa.push(SofaScore { ts, score });
    }

    let path = dir.join(CULTURES_FILE);
    let file = path.display().to_string();
    for (line, rec) in rows(&path, &mut csv_reader(&path)?, &["patient_id", "ts", "positive"])? {
        let ctx = LineCtx { file: &file, line };
        let i = *ctx.patient(&index, &rec[0])?;
        let ts = ctx.ts(&rec[1])?;
        let positive = match &rec[2] {
            "1" => true,
            "0" => false,
            other => return Err(ctx.err(format!("positive must be 0 or 1, got {other:?}"))),
        };
        records[i].cultures.push(Culture { ts, positive });
    }
    Ok(records)
}
