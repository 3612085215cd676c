//! CSV ingestion and emission for profile and metadata tables.
//!
//! Profiles CSV: `household_id,date,channel,v0,...,v{T-1}` with one row per
//! (household, date, channel); `channel` is `load` or `pv`; dates ISO-8601;
//! values are kWh as decimal text. Metadata CSV: `household_id,<col>,...`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;

use crate::data::{month_code, weekday_code, ContextVocabulary, Dataset, LoadProfile};
use crate::error::{Error, Result};
use crate::numerics::Array;

/// One parsed row of the profiles CSV.
#[derive(Debug, Clone)]
pub struct RawProfileRow {
    pub household_id: String,
    pub date: NaiveDate,
    pub channel: String,
    pub values: Vec<f64>,
}

/// Household metadata: column names plus per-household category values.
#[derive(Debug, Clone)]
pub struct MetadataTable {
    pub columns: Vec<String>,
    pub rows: BTreeMap<String, Vec<String>>,
}

/// Writes a file atomically: write to `<path>.tmp`, then rename.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}tmp",
        path.extension().map(|e| format!("{}.", e.to_string_lossy())).unwrap_or_default()
    ));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    f.write_all(contents).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    f.sync_all().ok();
    fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// Parses the profiles CSV. Rows must all carry the same number of values.
pub fn read_profiles_csv(path: &Path) -> Result<Vec<RawProfileRow>> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty file", path.display())))?;
    let head: Vec<&str> = header.split(',').collect();
    if head.len() < 4 || head[0] != "household_id" || head[1] != "date" || head[2] != "channel" {
        return Err(Error::Data(format!(
            "{}: header must start with household_id,date,channel,v0,...",
            path.display()
        )));
    }
    let t_len = head.len() - 3;
    for (i, col) in head[3..].iter().enumerate() {
        if *col != format!("v{i}") {
            return Err(Error::Data(format!(
                "{}: expected value column v{i}, found {col}",
                path.display()
            )));
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let row = lineno + 1; // 1-based, header is row 1
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != t_len + 3 {
            return Err(Error::DataRow {
                row,
                message: format!("expected {} values, found {}", t_len, fields.len().saturating_sub(3)),
            });
        }
        let date = NaiveDate::parse_from_str(fields[1], "%Y-%m-%d").map_err(|e| Error::DataRow {
            row,
            message: format!("bad date {:?}: {e}", fields[1]),
        })?;
        let channel = fields[2].to_string();
        if channel != "load" && channel != "pv" {
            return Err(Error::DataRow {
                row,
                message: format!("channel must be load or pv, found {channel:?}"),
            });
        }
        let mut values = Vec::with_capacity(t_len);
        for (i, cell) in fields[3..].iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::DataRow {
                row,
                message: format!("non-numeric cell v{i}: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::DataRow {
                    row,
                    message: format!("non-finite value in v{i}"),
                });
            }
            values.push(v);
        }
        rows.push(RawProfileRow {
            household_id: fields[0].to_string(),
            date,
            channel,
            values,
        });
    }
    Ok(rows)
}

/// Parses the metadata CSV into a household → categories map.
pub fn read_metadata_csv(path: &Path) -> Result<MetadataTable> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty file", path.display())))?;
    let head: Vec<&str> = header.split(',').collect();
    if head.first() != Some(&"household_id") {
        return Err(Error::Data(format!(
            "{}: metadata header must start with household_id",
            path.display()
        )));
    }
    let columns: Vec<String> = head[1..].iter().map(|s| s.to_string()).collect();
    let mut rows = BTreeMap::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let row = lineno + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() + 1 {
            return Err(Error::DataRow {
                row,
                message: format!(
                    "expected {} metadata columns, found {}",
                    columns.len(),
                    fields.len().saturating_sub(1)
                ),
            });
        }
        rows.insert(
            fields[0].to_string(),
            fields[1..].iter().map(|s| s.to_string()).collect(),
        );
    }
    Ok(MetadataTable { columns, rows })
}

/// Joins raw profile rows with household metadata into a [`Dataset`], building
/// the vocabulary from the declared context columns plus derived month/weekday.
pub fn assemble_dataset(
    raw: &[RawProfileRow],
    metadata: &MetadataTable,
    context_columns: &[String],
) -> Result<Dataset> {
    for col in context_columns {
        if !metadata.columns.contains(col) {
            return Err(Error::Data(format!("declared context column {col} not in metadata")));
        }
    }
    let col_positions: Vec<usize> = context_columns
        .iter()
        .map(|c| metadata.columns.iter().position(|m| m == c).unwrap())
        .collect();
    let column_values: Vec<(String, Vec<String>)> = context_columns
        .iter()
        .zip(&col_positions)
        .map(|(name, &pos)| {
            (
                name.clone(),
                metadata.rows.values().map(|r| r[pos].clone()).collect(),
            )
        })
        .collect();
    let vocabulary = ContextVocabulary::build(&column_values)?;
    build_profiles(raw, metadata, &col_positions, vocabulary)
}

/// Joins raw rows against an existing vocabulary (e.g. from a checkpoint).
pub fn assemble_with_vocabulary(
    raw: &[RawProfileRow],
    metadata: &MetadataTable,
    vocabulary: &ContextVocabulary,
) -> Result<Dataset> {
    let mut col_positions = Vec::new();
    for i in 0..vocabulary.len() {
        let name = vocabulary.variable_name(i);
        if name == "month" || name == "weekday" {
            continue;
        }
        let pos = metadata
            .columns
            .iter()
            .position(|m| m == name)
            .ok_or_else(|| Error::Data(format!("metadata is missing context column {name}")))?;
        col_positions.push(pos);
    }
    build_profiles(raw, metadata, &col_positions, vocabulary.clone())
}

fn build_profiles(
    raw: &[RawProfileRow],
    metadata: &MetadataTable,
    col_positions: &[usize],
    vocabulary: ContextVocabulary,
) -> Result<Dataset> {
    if raw.is_empty() {
        return Err(Error::Data("profiles table is empty".into()));
    }
    let t_len = raw[0].values.len();
    let has_pv = raw.iter().any(|r| r.channel == "pv");
    let d = if has_pv { 2 } else { 1 };

    // Group rows by (household, date), keeping first-seen order.
    let mut order: Vec<(String, NaiveDate)> = Vec::new();
    let mut by_key: BTreeMap<(String, NaiveDate), Vec<&RawProfileRow>> = BTreeMap::new();
    for r in raw {
        let key = (r.household_id.clone(), r.date);
        if !by_key.contains_key(&key) {
            order.push(key.clone());
        }
        by_key.entry(key).or_default().push(r);
    }

    let mut profiles = Vec::with_capacity(order.len());
    for key in &order {
        let rows = &by_key[key];
        let mut series = Array::zeros(&[t_len, d]);
        let mut seen_load = false;
        let mut seen_pv = false;
        for r in rows {
            if r.values.len() != t_len {
                return Err(Error::Data(format!(
                    "household {} {}: inconsistent series length {} (expected {t_len})",
                    key.0, key.1, r.values.len()
                )));
            }
            let ch = if r.channel == "load" {
                seen_load = true;
                0
            } else {
                seen_pv = true;
                1
            };
            for (t, &v) in r.values.iter().enumerate() {
                series.set2(t, ch, v);
            }
        }
        if !seen_load {
            return Err(Error::Data(format!(
                "household {} {}: missing load channel",
                key.0, key.1
            )));
        }
        if has_pv && !seen_pv {
            return Err(Error::Data(format!(
                "household {} {}: missing pv channel in a two-channel dataset",
                key.0, key.1
            )));
        }
        let meta_row = metadata.rows.get(&key.0).ok_or_else(|| {
            Error::Data(format!("household {} has no metadata row", key.0))
        })?;
        let mut codes = Vec::with_capacity(vocabulary.len());
        let mut meta_iter = col_positions.iter();
        for vi in 0..vocabulary.len() {
            let name = vocabulary.variable_name(vi);
            let code = match name {
                "month" => month_code(key.1),
                "weekday" => weekday_code(key.1),
                _ => {
                    let pos = *meta_iter.next().expect("declared column positions");
                    vocabulary.encode(vi, &meta_row[pos])?
                }
            };
            codes.push(code);
        }
        profiles.push(LoadProfile {
            series,
            date: key.1,
            household_id: key.0.clone(),
            context_codes: codes,
        });
    }
    Dataset::new(profiles, vocabulary)
}

/// Formats an f64 as the shortest decimal text that parses back exactly.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Serializes a dataset to the profiles CSV schema.
pub fn profiles_to_csv(dataset: &Dataset) -> String {
    let t_len = dataset.t_len();
    let mut out = String::from("household_id,date,channel");
    for i in 0..t_len {
        out.push_str(&format!(",v{i}"));
    }
    out.push('\n');
    for p in &dataset.profiles {
        for ch in 0..dataset.channels() {
            let name = if ch == 0 { "load" } else { "pv" };
            out.push_str(&format!("{},{},{}", p.household_id, p.date.format("%Y-%m-%d"), name));
            for t in 0..t_len {
                out.push(',');
                out.push_str(&fmt_f64(p.series.at2(t, ch)));
            }
            out.push('\n');
        }
    }
    out
}

/// Serializes household metadata (one row per household) from a dataset.
/// Derived month/weekday variables are excluded.
pub fn metadata_to_csv(dataset: &Dataset) -> String {
    let vocab = &dataset.vocabulary;
    let declared: Vec<usize> = (0..vocab.len())
        .filter(|&i| vocab.variable_name(i) != "month" && vocab.variable_name(i) != "weekday")
        .collect();
    let mut out = String::from("household_id");
    for &vi in &declared {
        out.push(',');
        out.push_str(vocab.variable_name(vi));
    }
    out.push('\n');
    let mut seen: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for p in &dataset.profiles {
        seen.entry(p.household_id.as_str())
            .or_insert_with(|| p.context_codes.clone());
    }
    for (hh, codes) in seen {
        out.push_str(hh);
        for &vi in &declared {
            out.push(',');
            out.push_str(vocab.decode(vi, codes[vi]).expect("valid code"));
        }
        out.push('\n');
    }
    out
}

pub fn write_profiles_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    atomic_write(path, profiles_to_csv(dataset).as_bytes())
}

pub fn write_metadata_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    atomic_write(path, metadata_to_csv(dataset).as_bytes())
}

/// Loads a dataset from profile + metadata CSVs with declared context columns.
pub fn load_dataset(
    profiles_path: &Path,
    metadata_path: &Path,
    context_columns: &[String],
) -> Result<Dataset> {
    let raw = read_profiles_csv(profiles_path)?;
    let metadata = read_metadata_csv(metadata_path)?;
    assemble_dataset(&raw, &metadata, context_columns)
}
