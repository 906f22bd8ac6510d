//! Artifact writers. Every file carries the same provenance block: CSV files
//! as leading `#` lines, JSON files as a top-level `meta` object.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ponv_core::rng::derive_seed;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSet {
    pub run: u64,
    pub data: u64,
    pub split: u64,
    pub search: u64,
    pub kfold: u64,
    pub explain: u64,
}

impl SeedSet {
    pub fn from_run_seed(run: u64) -> Self {
        SeedSet {
            run,
            data: derive_seed(run, 0),
            split: derive_seed(run, 1),
            search: derive_seed(run, 2),
            kfold: derive_seed(run, 3),
            explain: derive_seed(run, 4),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub artifact_version: String,
    pub config_hash: String,
    pub seeds: SeedSet,
    /// sha256 of the input CSV, or of the generator settings for synthetic runs.
    pub data_hash: String,
}

impl Meta {
    pub fn header_lines(&self) -> String {
        let s = &self.seeds;
        format!(
            "# artifact_version: {}\n# config_hash: {}\n# data_hash: {}\n\
             # seeds: run={} data={} split={} search={} kfold={} explain={}\n",
            self.artifact_version, self.config_hash, self.data_hash, s.run, s.data, s.split, s.search,
            s.kfold, s.explain
        )
    }
}

/// Writes through a sibling temp file so a failed stage never leaves a
/// truncated artifact behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes).map_err(|e| CliError::output(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::output(path, e))
}

#[derive(Serialize)]
struct Wrapped<'a, T: Serialize> {
    meta: &'a Meta,
    #[serde(flatten)]
    body: &'a T,
}

pub fn json_bytes<T: Serialize>(meta: &Meta, body: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(&Wrapped { meta, body }).expect("artifact serializes");
    s.push('\n');
    s.into_bytes()
}

pub fn write_json<T: Serialize>(path: &Path, meta: &Meta, body: &T) -> Result<(), CliError> {
    write_atomic(path, &json_bytes(meta, body))
}

/// Collects CSV rows, then writes header lines plus the table at once.
pub struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<Vec<u8>>,
}

impl CsvOut {
    pub fn new(path: impl Into<PathBuf>, header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        CsvOut {
            path: path.into(),
            writer,
        }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn finish(self, meta: &Meta) -> Result<(), CliError> {
        let body = self.writer.into_inner().expect("in-memory flush");
        write_csv_bytes(&self.path, meta, &body)
    }
}

pub fn write_csv_bytes(path: &Path, meta: &Meta, body: &[u8]) -> Result<(), CliError> {
    let mut out = meta.header_lines().into_bytes();
    out.write_all(body).expect("in-memory write");
    write_atomic(path, &out)
}

/// SVG with the provenance block as an XML comment after the root tag.
pub fn write_svg(path: &Path, meta: &Meta, svg: &str) -> Result<(), CliError> {
    let comment = format!("<!--\n{}-->\n", meta.header_lines().replace("--", "- -"));
    let split = svg.find('\n').map_or(svg.len(), |i| i + 1);
    let mut out = String::with_capacity(svg.len() + comment.len());
    out.push_str(&svg[..split]);
    out.push_str(&comment);
    out.push_str(&svg[split..]);
    write_atomic(path, out.as_bytes())
}

/// Reads back a JSON artifact's meta block, if the file exists and parses.
pub fn read_meta(path: &Path) -> Option<Meta> {
    #[derive(Deserialize)]
    struct Head {
        meta: Meta,
    }
    let text = fs::read_to_string(path).ok()?;
    serde_json::from_str::<Head>(&text).ok().map(|h| h.meta)
}

/// Fixed-precision float for CSV cells; NaN prints as an empty cell.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.10}")
    }
}
