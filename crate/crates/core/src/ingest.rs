//! Slide manifests and per-slide patch prediction files.
//!
//! A dataset is a manifest CSV (`slide_id,label,predictions_path`) pointing at
//! one patch CSV (`x,y,prob_malignant`) per slide. Relative prediction paths
//! are resolved against the manifest's directory.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_HEADER: [&str; 3] = ["slide_id", "label", "predictions_path"];
pub const PATCH_HEADER: [&str; 3] = ["x", "y", "prob_malignant"];

/// A patch counts as malignant when its probability reaches this value.
/// Ties go to the malignant side.
pub const MALIGNANT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Malignant,
    Normal,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Malignant => "malignant",
            Label::Normal => "normal",
        }
    }

    /// Label implied by a malignant probability, using the tie-to-malignant rule.
    pub fn from_probability(p_malignant: f64) -> Self {
        if p_malignant >= MALIGNANT_THRESHOLD {
            Label::Malignant
        } else {
            Label::Normal
        }
    }

    pub fn is_malignant(self) -> bool {
        self == Label::Malignant
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "malignant" => Ok(Label::Malignant),
            "normal" => Ok(Label::Normal),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// One patch of the patch-level classifier output. `x`, `y` are the patch
/// center in level-0 pixels of the 10x scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchPrediction {
    pub x: u32,
    pub y: u32,
    pub prob_malignant: f64,
}

impl PatchPrediction {
    pub fn is_malignant(&self) -> bool {
        self.prob_malignant >= MALIGNANT_THRESHOLD
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlideRecord {
    pub slide_id: String,
    pub label: Label,
    pub patches: Vec<PatchPrediction>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub slide_id: String,
    pub label: Label,
    /// Resolved path to the slide's patch CSV.
    pub path: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file))
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        csv::ErrorKind::Utf8 { err, .. } => Error::MalformedRow {
            file: path.to_path_buf(),
            line,
            reason: format!("invalid UTF-8: {err}"),
        },
        other => Error::MalformedRow {
            file: path.to_path_buf(),
            line,
            reason: format!("{other:?}"),
        },
    }
}

/// Iterates `(line_no, record)` over data rows after checking the header.
fn data_rows(path: &Path, expected: &[&str]) -> Result<impl Iterator<Item = Result<(u64, csv::StringRecord)>>> {
    let mut reader = open_reader(path)?;
    let mut records = reader.records();
    let owned = path.to_path_buf();
    match records.next() {
        None => {
            return Err(Error::MalformedRow {
                file: owned,
                line: 1,
                reason: format!("missing header `{}`", expected.join(",")),
            })
        }
        Some(header) => {
            let header = header.map_err(|e| csv_error(path, e))?;
            let found: Vec<&str> = header.iter().map(|f| f.trim_start_matches('\u{feff}').trim()).collect();
            if found != expected {
                return Err(Error::MalformedRow {
                    file: owned,
                    line: 1,
                    reason: format!("expected header `{}`, found `{}`", expected.join(","), found.join(",")),
                });
            }
        }
    }
    let path = path.to_path_buf();
    let rows: Vec<Result<(u64, csv::StringRecord)>> = records
        .map(|r| {
            let rec = r.map_err(|e| csv_error(&path, e))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            Ok((line, rec))
        })
        .collect();
    Ok(rows.into_iter())
}

fn check_width(path: &Path, line: u64, rec: &csv::StringRecord, width: usize) -> Result<()> {
    if rec.len() != width {
        return Err(Error::MalformedRow {
            file: path.to_path_buf(),
            line,
            reason: format!("expected {width} columns, found {}", rec.len()),
        });
    }
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for row in data_rows(path, &MANIFEST_HEADER)? {
        let (line, rec) = row?;
        check_width(path, line, &rec, 3)?;
        let malformed = |reason: String| Error::MalformedRow {
            file: path.to_path_buf(),
            line,
            reason,
        };
        let slide_id = rec[0].trim().to_string();
        if slide_id.is_empty() {
            return Err(malformed("empty slide_id".into()));
        }
        let label: Label = rec[1].parse().map_err(malformed)?;
        let rel = rec[2].trim();
        if rel.is_empty() {
            return Err(malformed("empty predictions_path".into()));
        }
        if !seen.insert(slide_id.clone()) {
            return Err(Error::DuplicateSlideId(slide_id));
        }
        let resolved = base.join(rel);
        if !resolved.is_file() {
            return Err(Error::MissingFile(resolved));
        }
        entries.push(ManifestEntry {
            slide_id,
            label,
            path: resolved,
        });
    }
    Ok(DatasetManifest { entries })
}

/// Reads a patch CSV, preserving row order.
pub fn read_patches(path: &Path) -> Result<Vec<PatchPrediction>> {
    let mut patches = Vec::new();
    for row in data_rows(path, &PATCH_HEADER)? {
        let (line, rec) = row?;
        check_width(path, line, &rec, 3)?;
        let malformed = |reason: String| Error::MalformedRow {
            file: path.to_path_buf(),
            line,
            reason,
        };
        let coord = |i: usize, name: &str| -> Result<u32> {
            rec[i]
                .trim()
                .parse::<u32>()
                .map_err(|e| malformed(format!("{name} = {:?}: {e}", &rec[i])))
        };
        let x = coord(0, "x")?;
        let y = coord(1, "y")?;
        let prob: f64 = rec[2]
            .trim()
            .parse()
            .map_err(|e| malformed(format!("prob_malignant = {:?}: {e}", &rec[2])))?;
        if !(0.0..=1.0).contains(&prob) {
            return Err(Error::ProbabilityOutOfRange {
                file: path.to_path_buf(),
                line,
                value: prob,
            });
        }
        patches.push(PatchPrediction {
            x,
            y,
            prob_malignant: prob,
        });
    }
    Ok(patches)
}

pub fn load_slide(entry: &ManifestEntry) -> Result<SlideRecord> {
    Ok(SlideRecord {
        slide_id: entry.slide_id.clone(),
        label: entry.label,
        patches: read_patches(&entry.path)?,
    })
}

/// Loads every slide of the manifest, in manifest order. Slides are read in
/// parallel on the current rayon pool.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<Vec<SlideRecord>> {
    manifest.entries.par_iter().map(load_slide).collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes a patch CSV. Probabilities use the shortest representation that
/// parses back to the same value.
pub fn write_slide(path: &Path, slide: &SlideRecord) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", PATCH_HEADER.join(",")).map_err(io)?;
    for p in &slide.patches {
        writeln!(out, "{},{},{:?}", p.x, p.y, p.prob_malignant).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Writes a manifest CSV with the given `(slide_id, label, predictions_path)`
/// rows. Paths are written verbatim.
pub fn write_manifest(path: &Path, rows: &[(String, Label, String)]) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", MANIFEST_HEADER.join(",")).map_err(io)?;
    for (id, label, rel) in rows {
        writeln!(out, "{id},{label},{rel}").map_err(io)?;
    }
    out.flush().map_err(io)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationSummary {
    pub malignant: usize,
    pub normal: usize,
    /// Patch count per slide, `None` where the slide file failed to load.
    pub patch_counts: Vec<(String, Option<usize>)>,
    pub zero_patch_slides: Vec<String>,
    /// Human-readable load failures, one per failing slide.
    pub problems: Vec<String>,
}

/// Tallies the manifest without failing: unreadable slides are listed in
/// `problems`.
pub fn validate_dataset(manifest: &DatasetManifest) -> ValidationSummary {
    let loaded: Vec<Result<SlideRecord>> = manifest.entries.par_iter().map(load_slide).collect();
    let mut summary = ValidationSummary::default();
    for (entry, slide) in manifest.entries.iter().zip(loaded) {
        match entry.label {
            Label::Malignant => summary.malignant += 1,
            Label::Normal => summary.normal += 1,
        }
        match slide {
            Ok(slide) => {
                if slide.patches.is_empty() {
                    summary.zero_patch_slides.push(entry.slide_id.clone());
                }
                summary
                    .patch_counts
                    .push((entry.slide_id.clone(), Some(slide.patches.len())));
            }
            Err(e) => {
                summary.patch_counts.push((entry.slide_id.clone(), None));
                summary.problems.push(format!("{}: {e}", entry.slide_id));
            }
        }
    }
    summary
}
