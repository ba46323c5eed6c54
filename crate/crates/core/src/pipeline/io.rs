use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::clean::{TEMPORAL_COLUMNS, VITAL_COLUMNS};
use super::extract::{Dataset, NightInstance, Subsets};
use crate::cohort::{csv_reader, csv_writer, rows, write_err, STATIC_COLUMNS};
use crate::error::{Error, Result};
use crate::model::{FeatureSchema, WINDOW_LEN};
use crate::numgrad::Tensor;

pub const INSTANCES_FILE: &str = "instances.csv";

/// Sidecar describing the columns of an instances file.
pub fn schema_path(instances_csv: &Path) -> PathBuf {
    instances_csv.with_extension("schema.txt")
}

/// Temporal cell header for row `h` (0 = 22:00) of column `name`.
fn cell_name(name: &str, h: usize) -> String {
    format!("{name}@{h}")
}

fn header(schema: &FeatureSchema) -> Vec<String> {
    let mut h: Vec<String> = ["instance_index", "patient_id", "day_index", "label"].map(String::from).to_vec();
    for row in 0..WINDOW_LEN {
        h.extend(schema.temporal_names().iter().map(|n| cell_name(n, row)));
    }
    h.extend(schema.static_names().iter().cloned());
    h
}

fn join(names: &[String]) -> String {
    names.join(",")
}

pub fn write_instances(dataset: &Dataset, path: &Path, comment: Option<&str>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let schema = &dataset.schema;
    let mut w = csv_writer(path, comment)?;
    w.write_record(header(schema)).map_err(|e| write_err(path, e))?;
    for inst in &dataset.instances {
        let mut row = vec![
            inst.instance_index.to_string(),
            inst.patient_id.clone(),
            inst.day_index.to_string(),
            inst.label.to_string(),
        ];
        row.extend(inst.temporal.data().iter().map(f64::to_string));
        row.extend(inst.statics.iter().map(f64::to_string));
        w.write_record(&row).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let sidecar = schema_path(path);
    let mut text = String::new();
    if let Some(c) = comment {
        text.push_str(&format!("# {c}\n"));
    }
    let subsets: Vec<String> = dataset.subsets.iter().map(u8::to_string).collect();
    let vitals: Vec<String> = TEMPORAL_COLUMNS[..VITAL_COLUMNS].iter().map(|s| s.to_string()).collect();
    let exposures: Vec<String> = TEMPORAL_COLUMNS[VITAL_COLUMNS..].iter().map(|s| s.to_string()).collect();
    let statics: Vec<String> = STATIC_COLUMNS.iter().map(|s| s.to_string()).collect();
    text.push_str(&format!("window_len = {WINDOW_LEN}\n"));
    text.push_str(&format!("subsets = {}\n", subsets.join(",")));
    text.push_str(&format!("temporal = {}\n", join(schema.temporal_names())));
    text.push_str(&format!("static = {}\n", join(schema.static_names())));
    text.push_str(&format!("subset.1 = {}\n", join(&vitals)));
    text.push_str(&format!("subset.2 = {}\n", join(&statics)));
    text.push_str(&format!("subset.3 = {}\n", join(&exposures)));
    let mut f = std::fs::File::create(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(&sidecar, e))?;
    Ok(())
}

/// Parses `key = value` lines, skipping blanks and `#` comments.
pub fn parse_key_values(text: &str, file: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            file: file.to_owned(),
            line: i as u64 + 1,
            msg: format!("expected key = value, got {line:?}"),
        })?;
        out.insert(k.trim().to_owned(), v.trim().to_owned());
    }
    Ok(out)
}

fn list(kv: &BTreeMap<String, String>, key: &str, file: &str) -> Result<Vec<String>> {
    let v = kv
        .get(key)
        .ok_or_else(|| Error::Format(format!("{file}: missing key {key:?}")))?;
    Ok(v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect())
}

pub fn read_instances(path: &Path) -> Result<Dataset> {
    let sidecar = schema_path(path);
    let side_name = sidecar.display().to_string();
    let text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let kv = parse_key_values(&text, &side_name)?;
    let window: usize = kv
        .get("window_len")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format(format!("{side_name}: bad window_len")))?;
    if window != WINDOW_LEN {
        return Err(Error::Format(format!("{side_name}: window_len {window}, expected {WINDOW_LEN}")));
    }
    let subsets: Subsets = list(&kv, "subsets", &side_name)?
        .iter()
        .map(|s| s.parse::<u8>().map_err(|_| Error::Format(format!("{side_name}: bad subset {s:?}"))))
        .collect::<Result<_>>()?;
    let schema = FeatureSchema::new(list(&kv, "temporal", &side_name)?, list(&kv, "static", &side_name)?)?;

    let file = path.display().to_string();
    let expected = header(&schema);
    let expected: Vec<&str> = expected.iter().map(String::as_str).collect();
    let (t, s) = (schema.temporal_dim(), schema.static_dim());
    let mut instances = Vec::new();
    for (line, rec) in rows(path, &mut csv_reader(path)?, &expected)? {
        let err = |msg: String| Error::Parse {
            file: file.clone(),
            line,
            msg,
        };
        let int = |k: usize| -> Result<u64> {
            rec[k]
                .parse()
                .map_err(|_| err(format!("column {}: bad integer {:?}", expected[k], &rec[k])))
        };
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("column {}: bad number {:?}", expected[k], &rec[k])))
        };
        let label = int(3)?;
        if label > 1 {
            return Err(err(format!("label must be 0 or 1, got {label}")));
        }
        let temporal = (4..4 + WINDOW_LEN * t).map(num).collect::<Result<Vec<_>>>()?;
        let statics = (4 + WINDOW_LEN * t..4 + WINDOW_LEN * t + s).map(num).collect::<Result<Vec<_>>>()?;
        instances.push(NightInstance {
            instance_index: int(0)? as usize,
            patient_id: rec[1].to_owned(),
            day_index: int(2)? as u32,
            label: label as u8,
            temporal: Tensor::new(vec![WINDOW_LEN, t], temporal)?,
            statics,
        });
    }
    let dataset = Dataset {
        schema,
        subsets,
        instances,
    };
    dataset.check_unique_indices()?;
    Ok(dataset)
}
