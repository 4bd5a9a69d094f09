//! Scenario and constraint files, plus the number formatting every artifact
//! writer shares.
//!
//! JSON numbers are written with 17 significant digits (9 for `f32`), which
//! round-trips IEEE-754 values exactly. Non-finite values become `null`.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ConstraintSet, FeatureSchema, ScenarioFile, ScenarioSet};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Ok(Format::Csv),
            Some(e) if e.eq_ignore_ascii_case("json") => Ok(Format::Json),
            _ => Err(Error::invalid(format!(
                "cannot infer format of {}",
                path.display()
            ))),
        }
    }
}

/// serde_json formatter writing floats with round-trip-exact precision.
#[derive(Debug, Default, Clone, Copy)]
pub struct PreciseFormatter;

impl serde_json::ser::Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.8e}")
        } else {
            w.write_all(b"null")
        }
    }
}

/// 17-significant-digit scientific notation; `null` for non-finite values.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".to_string()
    }
}

/// Formats any scalar at its type's round-trip precision.
pub fn fmt_real<T: Scalar>(v: T) -> String {
    if std::mem::size_of::<T>() == 4 {
        let x = v.to_f32().unwrap_or(f32::NAN);
        if x.is_finite() {
            format!("{x:.8e}")
        } else {
            "null".into()
        }
    } else {
        fmt_f64(v.to_f64_lossy())
    }
}

pub fn to_json_string<S: Serialize + ?Sized>(value: &S) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PreciseFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits utf-8"))
}

pub fn write_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> Result<()> {
    let mut s = to_json_string(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn load_scenarios<T: Scalar>(path: &Path, format: Format) -> Result<ScenarioSet<T>> {
    let text = fs::read_to_string(path)?;
    match format {
        Format::Json => parse_scenarios_json(&text),
        Format::Csv => parse_scenarios_csv(&text),
    }
}

pub fn parse_scenarios_json<T: Scalar>(text: &str) -> Result<ScenarioSet<T>> {
    let file: ScenarioFile<T> = serde_json::from_str(text)?;
    ScenarioSet::try_from(file)
}

/// CSV layout: header `scenario,asset,<feature>...`, one row per
/// `(scenario, asset)`. Scenario and asset orders follow first appearance.
pub fn parse_scenarios_csv<T: Scalar>(text: &str) -> Result<ScenarioSet<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.len() < 3 || &headers[0] != "scenario" || &headers[1] != "asset" {
        return Err(Error::Parse(
            "CSV header must start with `scenario,asset` followed by feature columns".into(),
        ));
    }
    let schema = FeatureSchema::new(headers.iter().skip(2))?;
    let l = schema.len();

    let mut scenario_ids: Vec<String> = Vec::new();
    let mut asset_ids: Vec<String> = Vec::new();
    let mut cells: Vec<(usize, usize, Vec<T>)> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != l + 2 {
            return Err(Error::Dimension(format!(
                "CSV record {} has {} fields, expected {}",
                line + 1,
                rec.len(),
                l + 2
            )));
        }
        let s = index_of_or_push(&mut scenario_ids, &rec[0]);
        let n = index_of_or_push(&mut asset_ids, &rec[1]);
        let mut vals = Vec::with_capacity(l);
        for field in rec.iter().skip(2) {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse(format!("non-numeric value {field:?}")))?;
            vals.push(T::from_f64(v).ok_or_else(|| Error::Parse(format!("{v} out of range")))?);
        }
        cells.push((s, n, vals));
    }

    let (s_count, n_count) = (scenario_ids.len(), asset_ids.len());
    let mut filled = vec![false; s_count * n_count];
    let mut scenarios = vec![vec![vec![T::zero(); n_count]; l]; s_count];
    for (s, n, vals) in cells {
        if std::mem::replace(&mut filled[s * n_count + n], true) {
            return Err(Error::Parse(format!(
                "duplicate row for scenario {} asset {}",
                scenario_ids[s], asset_ids[n]
            )));
        }
        for (li, v) in vals.into_iter().enumerate() {
            scenarios[s][li][n] = v;
        }
    }
    if let Some(idx) = filled.iter().position(|f| !f) {
        return Err(Error::Dimension(format!(
            "scenario {} is missing asset {}",
            scenario_ids[idx / n_count],
            asset_ids[idx % n_count]
        )));
    }
    ScenarioSet::from_matrices(schema, asset_ids, scenarios)
}

fn index_of_or_push(ids: &mut Vec<String>, key: &str) -> usize {
    match ids.iter().position(|k| k == key) {
        Some(i) => i,
        None => {
            ids.push(key.to_string());
            ids.len() - 1
        }
    }
}

pub fn scenarios_to_csv<T: Scalar>(set: &ScenarioSet<T>) -> String {
    let mut out = String::from("scenario,asset");
    for f in &set.schema().features {
        out.push(',');
        out.push_str(f);
    }
    out.push('\n');
    for (s, m) in set.scenarios().enumerate() {
        for (n, name) in set.assets().iter().enumerate() {
            out.push_str(&format!("{s},{name}"));
            for l in 0..set.n_features() {
                out.push(',');
                out.push_str(&fmt_real(m.get(l, n)));
            }
            out.push('\n');
        }
    }
    out
}

pub fn save_scenarios<T: Scalar>(set: &ScenarioSet<T>, path: &Path, format: Format) -> Result<()> {
    match format {
        Format::Json => write_json(path, set),
        Format::Csv => Ok(fs::write(path, scenarios_to_csv(set))?),
    }
}

pub fn load_constraints<T: Scalar>(path: &Path) -> Result<ConstraintSet<T>> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
