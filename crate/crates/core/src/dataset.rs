//! Dataset loading and synthetic generation.
//!
//! A dataset is a flat list of grayscale image samples with binary class
//! labels (`Healthy` / `Sick`) and, after clustering, optional cluster
//! labels. Datasets are loaded from a `healthy/` + `sick/` directory layout
//! holding binary PGM (P5) or 8-bit grayscale PNG files, or generated
//! synthetically from a seeded recipe.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary diagnosis label. `Healthy` maps to 0 and `Sick` to 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    Healthy,
    Sick,
}

impl ClassLabel {
    pub fn index(self) -> usize {
        match self {
            ClassLabel::Healthy => 0,
            ClassLabel::Sick => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<ClassLabel> {
        match index {
            0 => Some(ClassLabel::Healthy),
            1 => Some(ClassLabel::Sick),
            _ => None,
        }
    }

    pub fn dir_name(self) -> &'static str {
        match self {
            ClassLabel::Healthy => "healthy",
            ClassLabel::Sick => "sick",
        }
    }
}

/// One grayscale image with its labels. `pixels` is row-major, length
/// `width * height`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: u64,
    pub pixels: Vec<f64>,
    pub width: usize,
    pub height: usize,
    pub class_label: ClassLabel,
    pub cluster_label: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Loaded,
    Synthetic,
}

/// An ordered collection of samples. Sample ids are dense in `[0, n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub num_clusters: Option<usize>,
    pub provenance: Provenance,
    pub generator_seed: Option<u64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Counts as `[healthy, sick]`.
    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0usize; 2];
        for s in &self.samples {
            counts[s.class_label.index()] += 1;
        }
        counts
    }

    pub fn class_labels(&self) -> Vec<ClassLabel> {
        self.samples.iter().map(|s| s.class_label).collect()
    }

    /// Checks the structural invariants: dense ids, consistent pixel buffer
    /// sizes, and all-or-nothing cluster labels in range.
    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            if s.id != i as u64 {
                return Err(Error::Config(format!(
                    "sample ids must be dense: position {i} holds id {}",
                    s.id
                )));
            }
            if s.pixels.len() != s.width * s.height {
                return Err(Error::ShapeMismatch(format!(
                    "sample {}: {} pixels for {}x{}",
                    s.id,
                    s.pixels.len(),
                    s.width,
                    s.height
                )));
            }
        }
        let labeled = self.samples.iter().filter(|s| s.cluster_label.is_some()).count();
        if labeled > 0 {
            if labeled != self.samples.len() {
                return Err(Error::Config(
                    "cluster labels must be set on all samples or none".into(),
                ));
            }
            let c = self.num_clusters.ok_or_else(|| {
                Error::Config("cluster labels present but num_clusters unset".into())
            })?;
            for s in &self.samples {
                let label = s.cluster_label.unwrap();
                if label >= c {
                    return Err(Error::Config(format!(
                        "sample {}: cluster label {label} out of range [0, {c})",
                        s.id
                    )));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// PGM (binary P5) codec
// ---------------------------------------------------------------------------

/// Advances past whitespace and `#` comments, returning the next token's
/// byte range.
fn pgm_token(bytes: &[u8], pos: usize) -> Option<(usize, usize)> {
    let mut i = pos;
    loop {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        break;
    }
    let start = i;
    while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
        i += 1;
    }
    (start < i).then_some((start, i))
}

/// Reads a binary PGM (P5) file with maxval <= 255.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = fs::read(path)?;
    let ingest = |reason: &str| Error::Ingestion {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };

    fn take(bytes: &[u8], pos: usize) -> Option<(&str, usize)> {
        let (start, end) = pgm_token(bytes, pos)?;
        std::str::from_utf8(&bytes[start..end])
            .ok()
            .map(|t| (t, end))
    }

    let (magic, mut pos) = take(&bytes, 0).ok_or_else(|| ingest("truncated header"))?;
    if magic != "P5" {
        return Err(ingest("not a binary PGM (missing P5 magic)"));
    }
    let mut fields = [0usize; 3];
    for (i, name) in ["width", "height", "maxval"].iter().enumerate() {
        let (token, next) = take(&bytes, pos).ok_or_else(|| ingest("truncated header"))?;
        fields[i] = token
            .parse()
            .map_err(|_| ingest(&format!("invalid {name}")))?;
        pos = next;
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(ingest("not 8-bit grayscale (maxval outside 1..=255)"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(ingest("missing raster separator"));
    }
    pos += 1;
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| ingest("image dimensions overflow"))?;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(ingest("truncated raster data"));
    }
    Ok((width, height, raster[..expected].to_vec()))
}

/// Writes a binary PGM (P5) file with maxval 255. Output is byte-stable for
/// identical inputs.
pub fn write_pgm(path: &Path, width: usize, height: usize, data: &[u8]) -> Result<()> {
    if data.len() != width * height {
        return Err(Error::ShapeMismatch(format!(
            "PGM raster has {} bytes for {}x{}",
            data.len(),
            width,
            height
        )));
    }
    let mut out = Vec::with_capacity(32 + data.len());
    out.extend_from_slice(format!("P5\n{width} {height}\n255\n").as_bytes());
    out.extend_from_slice(data);
    fs::write(path, out)?;
    Ok(())
}

fn read_png(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let img = image::open(path).map_err(|e| Error::Ingestion {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    match img {
        image::DynamicImage::ImageLuma8(gray) => {
            let (w, h) = (gray.width() as usize, gray.height() as usize);
            Ok((w, h, gray.into_raw()))
        }
        other => Err(Error::Ingestion {
            path: path.to_path_buf(),
            reason: format!("expected 8-bit grayscale, got {:?}", other.color()),
        }),
    }
}

// ---------------------------------------------------------------------------
// Directory loading and writing
// ---------------------------------------------------------------------------

fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .map(|ext| {
                        let ext = ext.to_string_lossy().to_ascii_lowercase();
                        ext == "pgm" || ext == "png"
                    })
                    .unwrap_or(false)
        })
        .collect();
    // Lexicographic file-name order fixes the sample ids.
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Loads a dataset from `root/healthy/` and `root/sick/`.
///
/// Samples are enumerated healthy first, then sick, each in lexicographic
/// file-name order; ids follow the enumeration. Pixels are raw 8-bit
/// intensities promoted to reals in `[0, 255]`.
pub fn load_dataset(root: &Path) -> Result<Dataset> {
    let mut samples = Vec::new();
    for class in [ClassLabel::Healthy, ClassLabel::Sick] {
        let dir = root.join(class.dir_name());
        if !dir.is_dir() {
            return Err(Error::Config(format!(
                "missing class directory {}",
                dir.display()
            )));
        }
        let files = image_files(&dir)?;
        if files.is_empty() {
            return Err(Error::EmptyClass(class.dir_name().to_string()));
        }
        for path in files {
            let is_pgm = path
                .extension()
                .map(|e| e.to_string_lossy().to_ascii_lowercase() == "pgm")
                .unwrap_or(false);
            let (width, height, raw) = if is_pgm {
                read_pgm(&path)?
            } else {
                read_png(&path)?
            };
            samples.push(Sample {
                id: samples.len() as u64,
                pixels: raw.iter().map(|&b| f64::from(b)).collect(),
                width,
                height,
                class_label: class,
                cluster_label: None,
            });
        }
    }
    let dataset = Dataset {
        samples,
        num_clusters: None,
        provenance: Provenance::Loaded,
        generator_seed: None,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Writes a dataset back to the `healthy/` + `sick/` PGM layout.
///
/// Pixels are rounded and clamped to 8 bits; datasets produced by
/// [`gen_synthetic`] or [`load_dataset`] hold integral intensities, so the
/// round trip is lossless for them. Cluster labels are not persisted.
pub fn write_dataset(dataset: &Dataset, root: &Path) -> Result<()> {
    for class in [ClassLabel::Healthy, ClassLabel::Sick] {
        fs::create_dir_all(root.join(class.dir_name()))?;
    }
    for sample in &dataset.samples {
        let bytes: Vec<u8> = sample
            .pixels
            .iter()
            .map(|&v| v.round().clamp(0.0, 255.0) as u8)
            .collect();
        let path = root
            .join(sample.class_label.dir_name())
            .join(format!("img_{:05}.pgm", sample.id));
        write_pgm(&path, sample.width, sample.height, &bytes)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

/// Version tag for the generative recipe, recorded in manifests.
pub const RECIPE_VERSION: u32 = 1;

/// Manifest written next to generated datasets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticManifest {
    pub recipe_version: u32,
    pub n_healthy: usize,
    pub n_sick: usize,
    pub side: usize,
    pub seed: u64,
}

impl SyntheticManifest {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<SyntheticManifest> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

struct ClassRecipe {
    background: f64,
    center: (f64, f64),
    radii: (f64, f64),
    fill: f64,
}

// Each class is an ellipse of elevated intensity over a dark background.
// The classes differ in ellipse position, shape, and brightness, giving two
// separable-but-overlapping populations once per-sample jitter and pixel
// noise are added.
fn class_recipe(class: ClassLabel) -> ClassRecipe {
    match class {
        ClassLabel::Healthy => ClassRecipe {
            background: 30.0,
            center: (0.38, 0.38),
            radii: (0.30, 0.24),
            fill: 95.0,
        },
        ClassLabel::Sick => ClassRecipe {
            background: 55.0,
            center: (0.62, 0.58),
            radii: (0.22, 0.32),
            fill: 175.0,
        },
    }
}

const PIXEL_NOISE_STD: f64 = 12.0;

fn gen_sample(
    rng: &mut ChaCha8Rng,
    id: u64,
    class: ClassLabel,
    side: usize,
) -> Sample {
    let recipe = class_recipe(class);
    let s = side as f64;

    let background = recipe.background + rng.gen_range(-6.0..6.0);
    let cx = (recipe.center.0 + rng.gen_range(-0.05..0.05)) * s;
    let cy = (recipe.center.1 + rng.gen_range(-0.05..0.05)) * s;
    let rx = (recipe.radii.0 + rng.gen_range(-0.04..0.04)) * s;
    let ry = (recipe.radii.1 + rng.gen_range(-0.04..0.04)) * s;
    let fill = recipe.fill + rng.gen_range(-10.0..10.0);

    let noise = Normal::new(0.0, PIXEL_NOISE_STD).expect("valid std");
    let mut pixels = Vec::with_capacity(side * side);
    for y in 0..side {
        for x in 0..side {
            let dx = (x as f64 + 0.5 - cx) / rx;
            let dy = (y as f64 + 0.5 - cy) / ry;
            let base = if dx * dx + dy * dy <= 1.0 { fill } else { background };
            let v = base + noise.sample(rng);
            pixels.push(v.round().clamp(0.0, 255.0));
        }
    }

    Sample {
        id,
        pixels,
        width: side,
        height: side,
        class_label: class,
        cluster_label: None,
    }
}

/// Generates a seeded synthetic dataset: `n_healthy` samples of class
/// `Healthy` followed by `n_sick` of class `Sick`, each a `side`x`side`
/// image. A pure function of its arguments.
pub fn gen_synthetic(
    n_healthy: usize,
    n_sick: usize,
    side: usize,
    seed: u64,
) -> Result<Dataset> {
    if side < 4 {
        return Err(Error::InvalidDimension(format!(
            "side must be at least 4, got {side}"
        )));
    }
    if n_healthy == 0 || n_sick == 0 {
        return Err(Error::Config(
            "need at least one sample per class".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n_healthy + n_sick);
    for _ in 0..n_healthy {
        let id = samples.len() as u64;
        samples.push(gen_sample(&mut rng, id, ClassLabel::Healthy, side));
    }
    for _ in 0..n_sick {
        let id = samples.len() as u64;
        samples.push(gen_sample(&mut rng, id, ClassLabel::Sick, side));
    }
    Ok(Dataset {
        samples,
        num_clusters: None,
        provenance: Provenance::Synthetic,
        generator_seed: Some(seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_is_deterministic() {
        let a = gen_synthetic(10, 10, 16, 42).unwrap();
        let b = gen_synthetic(10, 10, 16, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn synthetic_is_seed_sensitive() {
        let a = gen_synthetic(10, 10, 16, 42).unwrap();
        let b = gen_synthetic(10, 10, 16, 43).unwrap();
        assert_ne!(a.samples[0].pixels, b.samples[0].pixels);
    }

    #[test]
    fn synthetic_counts_match_request() {
        let d = gen_synthetic(7, 3, 8, 1).unwrap();
        assert_eq!(d.class_counts(), [7, 3]);
        assert_eq!(d.len(), 10);
        d.validate().unwrap();
    }

    #[test]
    fn synthetic_rejects_small_side() {
        match gen_synthetic(1, 1, 2, 0) {
            Err(Error::InvalidDimension(_)) => {}
            other => panic!("expected invalid-dimension error, got {other:?}"),
        }
    }

    #[test]
    fn synthetic_pixels_are_integral_8bit() {
        let d = gen_synthetic(3, 3, 8, 5).unwrap();
        for s in &d.samples {
            for &p in &s.pixels {
                assert!((0.0..=255.0).contains(&p));
                assert_eq!(p, p.round());
            }
        }
    }

    #[test]
    fn pgm_roundtrip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        let data = vec![0u8, 255, 128, 64];
        write_pgm(&path, 2, 2, &data).unwrap();
        let (w, h, back) = read_pgm(&path).unwrap();
        assert_eq!((w, h), (2, 2));
        assert_eq!(back, data);
    }

    #[test]
    fn pgm_reads_comments_and_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pgm");
        fs::write(&path, b"P5\n# a comment\n2 1\n255\n\x01\x02").unwrap();
        let (w, h, data) = read_pgm(&path).unwrap();
        assert_eq!((w, h, data), (2, 1, vec![1, 2]));

        let bad = dir.path().join("bad.pgm");
        fs::write(&bad, b"P6\n2 1\n255\n\x01\x02").unwrap();
        assert!(matches!(read_pgm(&bad), Err(Error::Ingestion { .. })));
    }

    #[test]
    fn load_orders_by_name_and_assigns_labels() {
        let dir = tempfile::tempdir().unwrap();
        for (class, names) in [("healthy", vec!["b.pgm", "a.pgm", "c.pgm"]), ("sick", vec!["z.pgm", "y.pgm"])] {
            let sub = dir.path().join(class);
            fs::create_dir_all(&sub).unwrap();
            for name in names {
                write_pgm(&sub.join(name), 2, 2, &[9, 9, 9, 9]).unwrap();
            }
        }
        let d = load_dataset(dir.path()).unwrap();
        assert_eq!(d.len(), 5);
        let labels: Vec<usize> = d.samples.iter().map(|s| s.class_label.index()).collect();
        assert_eq!(labels, vec![0, 0, 0, 1, 1]);
        assert_eq!(d.samples[0].id, 0);
        assert_eq!(d.samples[4].id, 4);
    }

    #[test]
    fn load_reads_raw_intensities() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("healthy")).unwrap();
        fs::create_dir_all(dir.path().join("sick")).unwrap();
        write_pgm(&dir.path().join("healthy/p.pgm"), 2, 2, &[0, 255, 128, 64]).unwrap();
        write_pgm(&dir.path().join("sick/q.pgm"), 1, 1, &[7]).unwrap();
        let d = load_dataset(dir.path()).unwrap();
        assert_eq!(d.samples[0].pixels, vec![0.0, 255.0, 128.0, 64.0]);
        assert_eq!((d.samples[0].width, d.samples[0].height), (2, 2));
    }

    #[test]
    fn load_requires_both_classes_nonempty() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("healthy")).unwrap();
        write_pgm(&dir.path().join("healthy/a.pgm"), 1, 1, &[1]).unwrap();
        // sick/ missing entirely -> configuration error
        assert!(matches!(load_dataset(dir.path()), Err(Error::Config(_))));
        // sick/ present but empty -> empty-class error
        fs::create_dir_all(dir.path().join("sick")).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::EmptyClass(_))));
    }

    #[test]
    fn load_reads_png_grayscale_and_rejects_color() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("healthy")).unwrap();
        fs::create_dir_all(dir.path().join("sick")).unwrap();
        let gray = image::GrayImage::from_raw(2, 2, vec![0u8, 255, 128, 64]).unwrap();
        gray.save(dir.path().join("healthy/a.png")).unwrap();
        write_pgm(&dir.path().join("sick/b.pgm"), 1, 1, &[3]).unwrap();
        let d = load_dataset(dir.path()).unwrap();
        assert_eq!(d.samples[0].pixels, vec![0.0, 255.0, 128.0, 64.0]);

        let rgb = image::RgbImage::from_raw(1, 1, vec![1u8, 2, 3]).unwrap();
        rgb.save(dir.path().join("healthy/c.png")).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Ingestion { .. })));
    }

    #[test]
    fn write_then_load_roundtrips_pixels_and_labels() {
        let d = gen_synthetic(4, 3, 8, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&d, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back.len(), d.len());
        for (a, b) in d.samples.iter().zip(&back.samples) {
            assert_eq!(a.pixels, b.pixels);
            assert_eq!(a.class_label, b.class_label);
        }
    }
}
