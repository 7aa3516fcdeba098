//! Synthetic slides with controllable tumour geometry.
//!
//! Every slide is a `grid × grid` sheet of tissue patches whose centers sit
//! on a 100 px lattice (`x = 100·col + 50`). Malignant slides carry one or
//! more disc-shaped tumour blobs of confidently malignant patches; outside
//! the blobs (and on normal slides everywhere) a small fraction of patches
//! are scattered, lower-confidence false positives. All other patches get a
//! normal-side probability below 0.5.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{write_manifest, write_slide, Label, PatchPrediction, SlideRecord};
use crate::seed::derive_seed;

pub const PATCH_PITCH: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub slides_per_label: usize,
    /// Patches per side.
    pub grid: usize,
    pub min_blobs: usize,
    pub max_blobs: usize,
    /// Blob radius range in patches.
    pub min_radius: usize,
    pub max_radius: usize,
    /// Probability that a non-tumour patch is a false positive.
    pub noise_rate: f64,
    /// Beta shape of tumour patch probabilities, truncated to [0.5, 1].
    pub tumour_beta: (f64, f64),
    /// Beta shape of false positives, rescaled onto [0.5, 1].
    pub false_positive_beta: (f64, f64),
    /// Beta shape of the remaining patches, rescaled onto [0, 0.5).
    pub background_beta: (f64, f64),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            slides_per_label: 100,
            grid: 20,
            min_blobs: 1,
            max_blobs: 3,
            min_radius: 2,
            max_radius: 5,
            noise_rate: 0.02,
            tumour_beta: (8.0, 2.0),
            false_positive_beta: (2.0, 4.0),
            background_beta: (2.0, 8.0),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.grid == 0 {
            return bad("grid must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return bad("noise rate must lie in [0, 1]");
        }
        if self.min_blobs == 0 || self.min_blobs > self.max_blobs {
            return bad("blob count range must satisfy 1 <= min <= max");
        }
        if self.min_radius > self.max_radius {
            return bad("blob radius range must satisfy min <= max");
        }
        for (a, b) in [self.tumour_beta, self.false_positive_beta, self.background_beta] {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return bad("beta shape parameters must be finite and positive");
            }
        }
        Ok(())
    }
}

fn beta(shape: (f64, f64)) -> Beta<f64> {
    Beta::new(shape.0, shape.1).expect("validated shape")
}

fn tumour_probability(dist: &Beta<f64>, rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let p = dist.sample(rng);
        if p >= 0.5 {
            return p;
        }
    }
}

pub fn slide_id(label: Label, index: usize) -> String {
    match label {
        Label::Malignant => format!("mal_{index:04}"),
        Label::Normal => format!("nor_{index:04}"),
    }
}

/// One slide, drawn from `derive_seed(cfg.seed, "synth/<slide_id>")`.
pub fn generate_slide(cfg: &SynthConfig, label: Label, slide_id: &str) -> Result<SlideRecord> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("synth/{slide_id}")));
    let grid = cfg.grid;
    let mut tumour = vec![false; grid * grid];
    if label == Label::Malignant {
        let blobs = rng.random_range(cfg.min_blobs..=cfg.max_blobs);
        for _ in 0..blobs {
            let radius = rng.random_range(cfg.min_radius..=cfg.max_radius) as i64;
            // Centers keep the disc on the slide when the grid allows it.
            let lo = (radius as usize).min((grid - 1) / 2);
            let (cr, cc) = (
                rng.random_range(lo..grid - lo) as i64,
                rng.random_range(lo..grid - lo) as i64,
            );
            for r in 0..grid as i64 {
                for c in 0..grid as i64 {
                    if (r - cr).pow(2) + (c - cc).pow(2) <= radius * radius {
                        tumour[r as usize * grid + c as usize] = true;
                    }
                }
            }
        }
    }
    let tumour_dist = beta(cfg.tumour_beta);
    let fp_dist = beta(cfg.false_positive_beta);
    let bg_dist = beta(cfg.background_beta);
    let mut patches = Vec::with_capacity(grid * grid);
    for r in 0..grid {
        for c in 0..grid {
            let prob = if tumour[r * grid + c] {
                tumour_probability(&tumour_dist, &mut rng)
            } else if rng.random_bool(cfg.noise_rate) {
                0.5 + 0.5 * fp_dist.sample(&mut rng)
            } else {
                (0.5 * bg_dist.sample(&mut rng)).min(0.499_999)
            };
            patches.push(PatchPrediction {
                x: PATCH_PITCH * c as u32 + PATCH_PITCH / 2,
                y: PATCH_PITCH * r as u32 + PATCH_PITCH / 2,
                prob_malignant: prob,
            });
        }
    }
    Ok(SlideRecord {
        slide_id: slide_id.to_string(),
        label,
        patches,
    })
}

/// `slides_per_label` malignant slides followed by as many normal ones.
pub fn generate_dataset(cfg: &SynthConfig) -> Result<Vec<SlideRecord>> {
    cfg.validate()?;
    let plan: Vec<(Label, usize)> = [Label::Malignant, Label::Normal]
        .into_iter()
        .flat_map(|l| (0..cfg.slides_per_label).map(move |i| (l, i)))
        .collect();
    plan.par_iter()
        .map(|&(label, i)| generate_slide(cfg, label, &slide_id(label, i)))
        .collect()
}

/// Writes `slides/<id>.csv` per slide and `manifest.csv` under `dir`;
/// returns the manifest path.
pub fn write_dataset(dir: &Path, slides: &[SlideRecord]) -> Result<PathBuf> {
    let slide_dir = dir.join("slides");
    std::fs::create_dir_all(&slide_dir).map_err(|e| Error::io(&slide_dir, e))?;
    slides
        .par_iter()
        .map(|s| write_slide(&slide_dir.join(format!("{}.csv", s.slide_id)), s))
        .collect::<Result<()>>()?;
    let rows: Vec<(String, Label, String)> = slides
        .iter()
        .map(|s| (s.slide_id.clone(), s.label, format!("slides/{}.csv", s.slide_id)))
        .collect();
    let manifest = dir.join("manifest.csv");
    write_manifest(&manifest, &rows)?;
    Ok(manifest)
}
