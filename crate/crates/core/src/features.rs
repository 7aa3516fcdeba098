//! The 18-value slide descriptor computed from patch-level predictions.
//!
//! | family | width | meaning |
//! |--------|-------|---------|
//! | MTR    | 1     | malignant patches / tissue patches |
//! | MPH    | 10    | histogram of malignant probabilities over [0.50, 1.00], 5% bins, divided by tissue patch count |
//! | LSRL   | 2     | slope and intercept of the least-squares line through the histogram, x = bin index 0..9 |
//! | MCC    | 5     | connected components of malignant patch centers at radii 142..708 px, divided by malignant patch count |
//!
//! Slides without malignant patches map to the all-zero descriptor.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Label, PatchPrediction, SlideRecord};

pub const HISTOGRAM_BINS: usize = 10;
pub const FEATURE_COUNT: usize = 18;

/// Linking radii in pixels: one to five patch diagonals on the 100 px grid.
pub const MCC_RADII: [f64; 5] = [142.0, 283.0, 425.0, 566.0, 708.0];

/// Lower edges of the histogram bins. Written as decimal literals so a
/// probability read as `0.60` lands in bin 2 rather than wherever
/// `0.5 + 2 * 0.05` happens to round.
const BIN_LOWER_EDGES: [f64; HISTOGRAM_BINS] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "mtr", "mph_0", "mph_1", "mph_2", "mph_3", "mph_4", "mph_5", "mph_6", "mph_7", "mph_8", "mph_9", "lsrl_m",
    "lsrl_b", "mcc_142", "mcc_283", "mcc_425", "mcc_566", "mcc_708",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Histogram10 {
    pub bins: [f64; HISTOGRAM_BINS],
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RegressionLine {
    pub slope: f64,
    pub intercept: f64,
}

impl RegressionLine {
    /// Sum of squared residuals over `(i, ys[i])`.
    pub fn sse(&self, ys: &[f64]) -> f64 {
        ys.iter()
            .enumerate()
            .map(|(i, y)| {
                let r = y - (self.slope * i as f64 + self.intercept);
                r * r
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MccProfile {
    pub values: [f64; MCC_RADII.len()],
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub mtr: f64,
    pub mph: Histogram10,
    pub lsrl: RegressionLine,
    pub mcc: MccProfile,
}

impl FeatureVector {
    /// Flattened as `mtr, mph[0..10], m, b, mcc[0..5]`.
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        let mut out = [0.0; FEATURE_COUNT];
        out[0] = self.mtr;
        out[1..11].copy_from_slice(&self.mph.bins);
        out[11] = self.lsrl.slope;
        out[12] = self.lsrl.intercept;
        out[13..18].copy_from_slice(&self.mcc.values);
        out
    }

    pub fn from_array(values: &[f64; FEATURE_COUNT]) -> Self {
        let mut fv = FeatureVector {
            mtr: values[0],
            ..Default::default()
        };
        fv.mph.bins.copy_from_slice(&values[1..11]);
        fv.lsrl = RegressionLine {
            slope: values[11],
            intercept: values[12],
        };
        fv.mcc.values.copy_from_slice(&values[13..18]);
        fv
    }
}

fn malignant_count(patches: &[PatchPrediction]) -> usize {
    patches.iter().filter(|p| p.is_malignant()).count()
}

pub fn malignant_tissue_ratio(patches: &[PatchPrediction]) -> f64 {
    if patches.is_empty() {
        return 0.0;
    }
    malignant_count(patches) as f64 / patches.len() as f64
}

/// Bin of a malignant probability, `None` below 0.5. The last bin is closed
/// so that probability 1.0 is counted.
fn histogram_bin(p: f64) -> Option<usize> {
    if p < BIN_LOWER_EDGES[0] {
        return None;
    }
    Some(BIN_LOWER_EDGES.iter().rposition(|&edge| p >= edge).unwrap_or(0))
}

pub fn malignant_probability_histogram(patches: &[PatchPrediction]) -> Histogram10 {
    let mut counts = [0usize; HISTOGRAM_BINS];
    for p in patches {
        if let Some(k) = histogram_bin(p.prob_malignant) {
            counts[k] += 1;
        }
    }
    let mut h = Histogram10::default();
    if patches.is_empty() {
        return h;
    }
    let total = patches.len() as f64;
    for (bin, count) in h.bins.iter_mut().zip(counts) {
        *bin = count as f64 / total;
    }
    h
}

/// Ordinary least squares through `(i, bins[i])`, i = 0..9.
///
/// The intercept uses the standard normal-equation form
/// `(Σx²·Σy − Σx·Σxy) / (N·Σx² − (Σx)²)`. The denominator is 825 for the
/// fixed abscissae, so the fit always exists.
pub fn least_squares_regression_line(h: &Histogram10) -> RegressionLine {
    let n = HISTOGRAM_BINS as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (i, &y) in h.bins.iter().enumerate() {
        let x = i as f64;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let denom = n * sxx - sx * sx;
    RegressionLine {
        slope: (n * sxy - sx * sy) / denom,
        intercept: (sxx * sy - sx * sxy) / denom,
    }
}

fn within(a: (f64, f64), b: (f64, f64), radius: f64) -> bool {
    let (dx, dy) = (a.0 - b.0, a.1 - b.1);
    (dx * dx + dy * dy).sqrt() <= radius
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != root {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.rank[a] < self.rank[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        if self.rank[a] == self.rank[b] {
            self.rank[a] += 1;
        }
    }
}

/// Groups points whose chains of hops are each at most `radius` long
/// (inclusive).
///
/// Points are bucketed on a square grid of cell width `radius`, so only
/// nearby buckets are compared. The ±2 bucket window tolerates rounding in
/// the bucket index. Components are ordered by their first input point and
/// keep input order internally.
pub fn connected_components(centers: &[(f64, f64)], radius: f64) -> Vec<Vec<(f64, f64)>> {
    component_labels(centers, radius)
        .into_iter()
        .map(|members| members.into_iter().map(|i| centers[i]).collect())
        .collect()
}

/// Like [`connected_components`] but returns input indices.
pub fn component_labels(centers: &[(f64, f64)], radius: f64) -> Vec<Vec<usize>> {
    assert!(radius > 0.0 && radius.is_finite(), "radius must be positive");
    let key = |p: (f64, f64)| ((p.0 / radius).floor() as i64, (p.1 / radius).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, &p) in centers.iter().enumerate() {
        buckets.entry(key(p)).or_default().push(i);
    }

    let mut sets = DisjointSet::new(centers.len());
    for (i, &p) in centers.iter().enumerate() {
        let (cx, cy) = key(p);
        for bx in cx - 2..=cx + 2 {
            for by in cy - 2..=cy + 2 {
                let Some(bucket) = buckets.get(&(bx, by)) else {
                    continue;
                };
                for &j in bucket {
                    if j > i && within(p, centers[j], radius) {
                        sets.union(i, j);
                    }
                }
            }
        }
    }

    let mut slot_of_root: HashMap<usize, usize> = HashMap::new();
    let mut components: Vec<Vec<usize>> = Vec::new();
    for i in 0..centers.len() {
        let root = sets.find(i);
        let slot = *slot_of_root.entry(root).or_insert_with(|| {
            components.push(Vec::new());
            components.len() - 1
        });
        components[slot].push(i);
    }
    components
}

pub fn mcc_profile(patches: &[PatchPrediction]) -> MccProfile {
    let centers: Vec<(f64, f64)> = patches
        .iter()
        .filter(|p| p.is_malignant())
        .map(|p| (f64::from(p.x), f64::from(p.y)))
        .collect();
    let mut profile = MccProfile::default();
    if centers.is_empty() {
        return profile;
    }
    let n = centers.len() as f64;
    for (value, radius) in profile.values.iter_mut().zip(MCC_RADII) {
        *value = component_labels(&centers, radius).len() as f64 / n;
    }
    profile
}

pub fn extract_from_patches(patches: &[PatchPrediction]) -> FeatureVector {
    let mph = malignant_probability_histogram(patches);
    FeatureVector {
        mtr: malignant_tissue_ratio(patches),
        lsrl: least_squares_regression_line(&mph),
        mph,
        mcc: mcc_profile(patches),
    }
}

pub fn extract_features(slide: &SlideRecord) -> FeatureVector {
    extract_from_patches(&slide.patches)
}

/// One row of the feature CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub slide_id: String,
    pub label: Label,
    pub features: FeatureVector,
}

pub fn feature_csv_header() -> String {
    let mut cols = vec!["slide_id", "label"];
    cols.extend_from_slice(&FEATURE_NAMES);
    cols.join(",")
}

/// Reals are written in scientific notation with 17 significant digits,
/// which round-trips every f64.
pub fn write_feature_csv(path: &Path, rows: &[FeatureRow]) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(out, "{}", feature_csv_header()).map_err(io)?;
    for row in rows {
        write!(out, "{},{}", row.slide_id, row.label).map_err(io)?;
        for v in row.features.to_array() {
            write!(out, ",{v:.16e}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_feature_csv(path: &Path) -> Result<Vec<FeatureRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let malformed = |line: usize, reason: String| Error::MalformedRow {
        file: path.to_path_buf(),
        line: line as u64,
        reason,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    match lines.next() {
        Some((_, header)) if header.trim_start_matches('\u{feff}') == feature_csv_header() => {}
        _ => return Err(malformed(1, "unexpected feature CSV header".into())),
    }
    let mut rows = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (line, text) in lines {
        if text.is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() != FEATURE_COUNT + 2 {
            return Err(malformed(
                line,
                format!("expected {} columns, found {}", FEATURE_COUNT + 2, fields.len()),
            ));
        }
        let label: Label = fields[1].parse().map_err(|e| malformed(line, e))?;
        let mut values = [0.0; FEATURE_COUNT];
        for (v, (field, name)) in values.iter_mut().zip(fields[2..].iter().zip(FEATURE_NAMES)) {
            *v = field
                .trim()
                .parse()
                .map_err(|e| malformed(line, format!("{name} = {field:?}: {e}")))?;
        }
        let slide_id = fields[0].trim().to_string();
        if !seen.insert(slide_id.clone()) {
            return Err(Error::DuplicateSlideId(slide_id));
        }
        rows.push(FeatureRow {
            slide_id,
            label,
            features: FeatureVector::from_array(&values),
        });
    }
    Ok(rows)
}
