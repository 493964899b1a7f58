//! Tissue datasets: CSV ingestion, validation, subgroup collapsing and the
//! log-log transform used by every downstream analysis.
//!
//! Two schemas are read:
//!
//! * cohort: `name,lifetime_risk,lscd[,s,d,subgroup_of]`
//! * radiation: `name,ear,err,lscd,s,sd_product`
//!
//! Lines starting with `#` are comments. Ingestion is strict: the first bad
//! row aborts with its line number.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::sci17;

pub const DEFAULT_UNIT_LABEL: &str = "lifespan";

/// One cancer type, subtype or subgroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TissueRecord {
    pub name: String,
    pub lifetime_risk: f64,
    /// Total lifetime stem-cell divisions.
    pub lscd: f64,
    /// Stem-cell count.
    pub s: Option<f64>,
    /// Self-renewal divisions per lineage.
    pub d: Option<f64>,
    pub subgroup_of: Option<String>,
}

impl TissueRecord {
    pub fn new(name: impl Into<String>, lifetime_risk: f64, lscd: f64) -> Result<Self> {
        let record = Self {
            name: name.into(),
            lifetime_risk,
            lscd,
            s: None,
            d: None,
            subgroup_of: None,
        };
        record.validate(0)?;
        Ok(record)
    }

    fn validate(&self, line: u64) -> Result<()> {
        if !(self.lifetime_risk > 0.0 && self.lifetime_risk <= 1.0) {
            return Err(Error::RiskOutOfRange {
                line,
                name: self.name.clone(),
                value: self.lifetime_risk,
            });
        }
        positive(line, &self.name, "lscd", self.lscd)?;
        if let Some(s) = self.s {
            positive(line, &self.name, "s", s)?;
        }
        if let Some(d) = self.d {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::Domain(format!(
                    "line {line}: d must be non-negative for '{}', got {d}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

fn positive(line: u64, name: &str, field: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositive {
            line,
            name: name.to_string(),
            field,
            value,
        })
    }
}

/// An ordered, validated collection of tissue records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortDataset {
    records: Vec<TissueRecord>,
    unit_label: String,
    /// Names of merged records whose risk was summed from their members
    /// rather than supplied explicitly.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    approximate_merges: Vec<String>,
}

impl CohortDataset {
    pub fn new(records: Vec<TissueRecord>, unit_label: impl Into<String>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut seen = HashSet::new();
        for r in &records {
            r.validate(0)?;
            if !seen.insert(r.name.as_str()) {
                return Err(Error::DuplicateName(r.name.clone()));
            }
        }
        Ok(Self {
            records,
            unit_label: unit_label.into(),
            approximate_merges: Vec::new(),
        })
    }

    pub fn records(&self) -> &[TissueRecord] {
        &self.records
    }

    pub fn unit_label(&self) -> &str {
        &self.unit_label
    }

    pub fn approximate_merges(&self) -> &[String] {
        &self.approximate_merges
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&TissueRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub(crate) fn with_records(
        &self,
        records: Vec<TissueRecord>,
        unit_label: String,
    ) -> Result<Self> {
        let mut out = Self::new(records, unit_label)?;
        out.approximate_merges = self.approximate_merges.clone();
        Ok(out)
    }
}

/// One tissue of the irradiated cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiationRecord {
    pub name: String,
    /// Excess absolute rate.
    pub ear: f64,
    /// Excess relative risk.
    pub err: f64,
    pub lscd: f64,
    pub s: f64,
    pub sd_product: f64,
}

/// A single merge: members collapse into one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeSpec {
    pub members: Vec<String>,
    /// Combined lifetime risk. When absent the member risks are summed and
    /// the merge is flagged as approximate.
    #[serde(default)]
    pub lifetime_risk: Option<f64>,
    pub lscd: f64,
}

/// Subgroup removals and merges applied by [`collapse_subgroups`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupingSpec {
    #[serde(default)]
    pub merges: BTreeMap<String, MergeSpec>,
    #[serde(default)]
    pub removals: Vec<String>,
}

impl GroupingSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::GroupingSpec(e.to_string()))
    }
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes())
}

fn header_line(rdr: &mut csv::Reader<&[u8]>) -> Result<(Vec<String>, u64)> {
    let headers = rdr.headers().map_err(|e| Error::BadHeader {
        line: 1,
        message: e.to_string(),
    })?;
    let line = headers.position().map_or(1, |p| p.line());
    Ok((headers.iter().map(str::to_string).collect(), line))
}

fn parse_real(line: u64, column: &str, cell: &str) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::MalformedRow {
            line,
            message: format!("column '{column}': cannot parse '{cell}' as a finite number"),
        }),
    }
}

fn parse_opt_real(line: u64, column: &str, cell: Option<&str>) -> Result<Option<f64>> {
    match cell {
        None | Some("") => Ok(None),
        Some(c) => parse_real(line, column, c).map(Some),
    }
}

#[derive(Clone, Copy)]
enum CohortColumn {
    S,
    D,
    SubgroupOf,
}

/// Parses a cohort CSV (`name,lifetime_risk,lscd[,s,d,subgroup_of]`).
pub fn parse_cohort(csv_text: &str) -> Result<CohortDataset> {
    let mut rdr = reader(csv_text);
    let (headers, header_line_no) = header_line(&mut rdr)?;
    let required = ["name", "lifetime_risk", "lscd"];
    if headers.len() < 3 || headers[..3] != required {
        return Err(Error::BadHeader {
            line: header_line_no,
            message: format!(
                "expected 'name,lifetime_risk,lscd[,s,d,subgroup_of]', got '{}'",
                headers.join(",")
            ),
        });
    }
    let mut optional = Vec::new();
    for h in &headers[3..] {
        let col = match h.as_str() {
            "s" => CohortColumn::S,
            "d" => CohortColumn::D,
            "subgroup_of" => CohortColumn::SubgroupOf,
            other => {
                return Err(Error::BadHeader {
                    line: header_line_no,
                    message: format!("unknown column '{other}'"),
                })
            }
        };
        if headers.iter().filter(|x| *x == h).count() > 1 {
            return Err(Error::BadHeader {
                line: header_line_no,
                message: format!("column '{h}' appears twice"),
            });
        }
        optional.push(col);
    }

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() > headers.len() || row.len() < 3 {
            return Err(Error::MalformedRow {
                line,
                message: format!("expected {} fields, found {}", headers.len(), row.len()),
            });
        }
        let name = row[0].to_string();
        if name.is_empty() {
            return Err(Error::MalformedRow {
                line,
                message: "empty name".into(),
            });
        }
        let mut record = TissueRecord {
            lifetime_risk: parse_real(line, "lifetime_risk", &row[1])?,
            lscd: parse_real(line, "lscd", &row[2])?,
            name,
            s: None,
            d: None,
            subgroup_of: None,
        };
        for (i, col) in optional.iter().enumerate() {
            let cell = row.get(3 + i);
            match col {
                CohortColumn::S => record.s = parse_opt_real(line, "s", cell)?,
                CohortColumn::D => record.d = parse_opt_real(line, "d", cell)?,
                CohortColumn::SubgroupOf => {
                    record.subgroup_of = cell.filter(|c| !c.is_empty()).map(str::to_string)
                }
            }
        }
        record.validate(line)?;
        if !seen.insert(record.name.clone()) {
            return Err(Error::DuplicateName(record.name));
        }
        records.push(record);
    }
    CohortDataset::new(records, DEFAULT_UNIT_LABEL)
}

/// Writes a cohort back to CSV, reals in scientific notation with 17
/// significant digits.
pub fn write_cohort_csv(dataset: &CohortDataset) -> String {
    let mut out = String::from("name,lifetime_risk,lscd,s,d,subgroup_of\n");
    let opt = |v: Option<f64>| v.map(sci17).unwrap_or_default();
    for r in dataset.records() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            csv_field(&r.name),
            sci17(r.lifetime_risk),
            sci17(r.lscd),
            opt(r.s),
            opt(r.d),
            r.subgroup_of.as_deref().map(csv_field).unwrap_or_default()
        ));
    }
    out
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) || s.starts_with('#') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes radiation records back to CSV with 17 significant digits.
pub fn write_radiation_csv(records: &[RadiationRecord]) -> String {
    let mut out = String::from("name,ear,err,lscd,s,sd_product\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            csv_field(&r.name),
            sci17(r.ear),
            sci17(r.err),
            sci17(r.lscd),
            sci17(r.s),
            sci17(r.sd_product)
        ));
    }
    out
}

/// Parses a radiation CSV (`name,ear,err,lscd,s,sd_product`).
pub fn parse_radiation(csv_text: &str) -> Result<Vec<RadiationRecord>> {
    let mut rdr = reader(csv_text);
    let (headers, header_line_no) = header_line(&mut rdr)?;
    let expected = ["name", "ear", "err", "lscd", "s", "sd_product"];
    if headers != expected {
        return Err(Error::BadHeader {
            line: header_line_no,
            message: format!(
                "expected '{}', got '{}'",
                expected.join(","),
                headers.join(",")
            ),
        });
    }
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != expected.len() {
            return Err(Error::MalformedRow {
                line,
                message: format!("expected {} fields, found {}", expected.len(), row.len()),
            });
        }
        let name = row[0].to_string();
        if name.is_empty() {
            return Err(Error::MalformedRow {
                line,
                message: "empty name".into(),
            });
        }
        let rec = RadiationRecord {
            ear: parse_real(line, "ear", &row[1])?,
            err: parse_real(line, "err", &row[2])?,
            lscd: parse_real(line, "lscd", &row[3])?,
            s: parse_real(line, "s", &row[4])?,
            sd_product: parse_real(line, "sd_product", &row[5])?,
            name,
        };
        positive(line, &rec.name, "lscd", rec.lscd)?;
        positive(line, &rec.name, "s", rec.s)?;
        positive(line, &rec.name, "sd_product", rec.sd_product)?;
        if !seen.insert(rec.name.clone()) {
            return Err(Error::DuplicateName(rec.name));
        }
        out.push(rec);
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(out)
}

/// Applies removals and merges. Each merged record takes the position of its
/// first member; everything else passes through in input order.
pub fn collapse_subgroups(dataset: &CohortDataset, spec: &GroupingSpec) -> Result<CohortDataset> {
    let index: HashMap<&str, usize> = dataset
        .records()
        .iter()
        .enumerate()
        .map(|(i, r)| (r.name.as_str(), i))
        .collect();

    let mut consumed: HashSet<&str> = HashSet::new();
    let mut claim = |name: &str| -> Result<()> {
        let key = index
            .get_key_value(name)
            .map(|(k, _)| *k)
            .ok_or_else(|| Error::UnknownName(name.to_string()))?;
        if !consumed.insert(key) {
            return Err(Error::ReferencedTwice(name.to_string()));
        }
        Ok(())
    };
    for name in &spec.removals {
        claim(name)?;
    }
    for merge in spec.merges.values() {
        if merge.members.is_empty() {
            return Err(Error::GroupingSpec("merge with no members".into()));
        }
        for m in &merge.members {
            claim(m)?;
        }
    }

    // merged record keyed by the index of its first member
    let mut placed: HashMap<usize, TissueRecord> = HashMap::new();
    let mut approximate = dataset.approximate_merges.clone();
    for (new_name, merge) in &spec.merges {
        let members: Vec<&TissueRecord> = merge
            .members
            .iter()
            .map(|m| &dataset.records()[index[m.as_str()]])
            .collect();
        let first = merge
            .members
            .iter()
            .map(|m| index[m.as_str()])
            .min()
            .expect("non-empty members");
        let risk = match merge.lifetime_risk {
            Some(r) => r,
            None => {
                approximate.push(new_name.clone());
                members.iter().map(|r| r.lifetime_risk).sum()
            }
        };
        let shared = |f: fn(&TissueRecord) -> Option<f64>| {
            let v = f(members[0]);
            members.iter().all(|r| f(r) == v).then_some(v).flatten()
        };
        let merged = TissueRecord {
            name: new_name.clone(),
            lifetime_risk: risk,
            lscd: merge.lscd,
            s: shared(|r| r.s),
            d: shared(|r| r.d),
            subgroup_of: None,
        };
        merged.validate(0)?;
        placed.insert(first, merged);
    }

    let mut out = Vec::with_capacity(dataset.len());
    for (i, r) in dataset.records().iter().enumerate() {
        if let Some(m) = placed.remove(&i) {
            out.push(m);
        } else if !consumed.contains(r.name.as_str()) {
            out.push(r.clone());
        }
    }
    let mut collapsed = CohortDataset::new(out, dataset.unit_label.clone())?;
    approximate.dedup();
    collapsed.approximate_merges = approximate;
    Ok(collapsed)
}

/// Base-10 log coordinates, in record order.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPairs {
    /// log10 lscd
    pub x: Vec<f64>,
    /// log10 lifetime risk
    pub y: Vec<f64>,
}

pub fn log_pairs(dataset: &CohortDataset) -> LogPairs {
    let (x, y) = dataset
        .records()
        .iter()
        .map(|r| (r.lscd.log10(), r.lifetime_risk.log10()))
        .unzip();
    LogPairs { x, y }
}
