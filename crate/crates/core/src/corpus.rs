//! Dataset ingestion: rating manifests, image decoding, grayscale and
//! luminance conventions, DMOS conversion and stratified folds.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use image::DynamicImage;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{self, DifferenceField, GrayImage};

pub const MANIFEST_HEADER: [&str; 6] = ["ref_path", "deg_path", "dmos", "category", "codec", "quality"];

/// One row of a rating manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct RatedPair {
    /// Reference path as written in the manifest (relative paths resolve
    /// against the manifest's directory).
    pub ref_path: String,
    pub deg_path: String,
    /// Normalized difference score in `[0, 1]`; 0 means no perceived change.
    pub dmos: f64,
    pub category: Option<String>,
    pub codec: Option<String>,
    pub quality_level: Option<String>,
    /// 1-based line in the source file, 0 for pairs built in memory.
    pub line: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub dataset_id: String,
    /// Hex SHA-256 of the source file.
    pub checksum: String,
    pub base_dir: PathBuf,
    pub pairs: Vec<RatedPair>,
}

impl Manifest {
    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Distinct references with their category, in first-appearance order.
    pub fn references(&self) -> Vec<(&str, Option<&str>)> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for p in &self.pairs {
            if seen.insert(p.ref_path.as_str(), ()).is_none() {
                out.push((p.ref_path.as_str(), p.category.as_deref()));
            }
        }
        out
    }
}

fn optional(field: &str) -> Option<String> {
    let f = field.trim();
    (!f.is_empty()).then(|| f.to_string())
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let dataset_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut manifest = parse_manifest(&bytes, path, base_dir)?;
    manifest.dataset_id = dataset_id;

    for p in &manifest.pairs {
        for raw in [&p.ref_path, &p.deg_path] {
            if !manifest.resolve(raw).is_file() {
                return Err(Error::parse(path, p.line, format!("image file not found: {raw}")));
            }
        }
    }
    Ok(manifest)
}

/// Parses manifest text without touching the referenced image files.
pub fn parse_manifest(bytes: &[u8], source: &Path, base_dir: PathBuf) -> Result<Manifest> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::parse(source, 0, format!("manifest is not UTF-8: {e}")))?;
    if text.trim().is_empty() {
        return Err(Error::parse(source, 0, "manifest is empty"));
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(bytes);

    let headers = reader.headers().map_err(|e| {
        let line = e.position().map_or(1, |p| p.line());
        Error::parse(source, line, e.to_string())
    })?;
    let found: Vec<&str> = headers.iter().collect();
    if found != MANIFEST_HEADER {
        return Err(Error::parse(
            source,
            1,
            format!("expected header `{}`, found `{}`", MANIFEST_HEADER.join(","), found.join(",")),
        ));
    }

    let mut pairs = Vec::new();
    let mut seen = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(source, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let ref_path = record[0].to_string();
        let deg_path = record[1].to_string();
        if ref_path.is_empty() || deg_path.is_empty() {
            return Err(Error::parse(source, line, "ref_path and deg_path are required"));
        }
        let dmos: f64 = record[2]
            .parse()
            .map_err(|_| Error::parse(source, line, format!("dmos `{}` is not a number", &record[2])))?;
        if !(0.0..=1.0).contains(&dmos) {
            return Err(Error::parse(source, line, format!("dmos {dmos} outside [0, 1]")));
        }
        if let Some(first) = seen.insert((ref_path.clone(), deg_path.clone()), line) {
            return Err(Error::parse(
                source,
                line,
                format!("duplicate pair ({ref_path}, {deg_path}), first seen on line {first}"),
            ));
        }
        pairs.push(RatedPair {
            ref_path,
            deg_path,
            dmos,
            category: optional(&record[3]),
            codec: optional(&record[4]),
            quality_level: optional(&record[5]),
            line,
        });
    }
    if pairs.is_empty() {
        return Err(Error::parse(source, 0, "manifest has no rows"));
    }

    Ok(Manifest {
        dataset_id: String::new(),
        checksum: format!("{:x}", Sha256::digest(bytes)),
        base_dir,
        pairs,
    })
}

pub fn render_manifest(manifest: &Manifest) -> String {
    let mut out = MANIFEST_HEADER.join(",");
    out.push('\n');
    for p in &manifest.pairs {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.ref_path,
            p.deg_path,
            p.dmos,
            p.category.as_deref().unwrap_or(""),
            p.codec.as_deref().unwrap_or(""),
            p.quality_level.as_deref().unwrap_or("")
        );
    }
    out
}

pub fn write_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_manifest(manifest)).map_err(|e| Error::io(path, e))
}

/// Luma `Y = 0.299 R + 0.587 G + 0.114 B`, rounded half away from zero.
pub fn luma(r: u8, g: u8, b: u8) -> f64 {
    (0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b)).round()
}

/// Converts an 8-bit gray or RGB image to luminance.
pub fn to_grayscale(img: &DynamicImage) -> Result<GrayImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(g) => GrayImage::new(w, h, g.as_raw().iter().map(|&v| f64::from(v)).collect()),
        DynamicImage::ImageRgb8(rgb) => GrayImage::new(
            w,
            h,
            rgb.as_raw().chunks_exact(3).map(|p| luma(p[0], p[1], p[2])).collect(),
        ),
        other => Err(Error::InvalidParameter(format!(
            "unsupported channel layout {:?}; expected 8-bit gray or RGB",
            other.color()
        ))),
    }
}

pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    to_grayscale(&img).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone)]
pub struct Stretched {
    pub image: GrayImage,
    /// Set when the source had zero luminance range; the output is all zeros.
    pub degenerate: bool,
}

/// Affine map sending `min → 0` and `max → 255`.
pub fn luminance_stretch(img: &GrayImage) -> Stretched {
    let (lo, hi) = min_max(img.values());
    stretch_with_range(img, lo, hi)
}

/// Stretch using a range taken from elsewhere (e.g. the reference image).
pub fn stretch_with_range(img: &GrayImage, lo: f64, hi: f64) -> Stretched {
    let span = hi - lo;
    if span <= 0.0 {
        return Stretched {
            image: GrayImage::filled(img.width(), img.height(), 0.0).expect("dimensions already valid"),
            degenerate: true,
        };
    }
    let values = img.values().iter().map(|v| (v - lo) / span * 255.0).collect();
    Stretched {
        image: GrayImage::new(img.width(), img.height(), values).expect("dimensions already valid"),
        degenerate: false,
    }
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StretchMode {
    /// Leave decoded luminance untouched.
    None,
    /// Stretch each image by its own range.
    #[default]
    PerImage,
    /// Stretch the degraded image by its reference's range.
    Paired,
}

/// A rated pair with decoded, normalized images.
#[derive(Debug, Clone)]
pub struct LoadedPair {
    pub reference_id: String,
    pub category: Option<String>,
    pub reference: Arc<GrayImage>,
    pub degraded: GrayImage,
    pub dmos: f64,
}

impl LoadedPair {
    pub fn new(
        reference_id: impl Into<String>,
        category: Option<String>,
        reference: Arc<GrayImage>,
        degraded: GrayImage,
        dmos: f64,
    ) -> Self {
        LoadedPair {
            reference_id: reference_id.into(),
            category,
            reference,
            degraded,
            dmos,
        }
    }

    pub fn delta(&self) -> Result<DifferenceField> {
        geometry::difference(&self.reference, &self.degraded)
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub dataset_id: String,
    pub pairs: Vec<LoadedPair>,
    pub warnings: Vec<String>,
}

impl Dataset {
    pub fn dmos(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.dmos).collect()
    }

    /// Distinct references with their category, in first-appearance order.
    pub fn references(&self) -> Vec<(&str, Option<&str>)> {
        references_of(&self.pairs)
    }
}

pub fn references_of(pairs: &[LoadedPair]) -> Vec<(&str, Option<&str>)> {
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for p in pairs {
        if seen.insert(p.reference_id.as_str(), ()).is_none() {
            out.push((p.reference_id.as_str(), p.category.as_deref()));
        }
    }
    out
}

/// Decodes every image of a manifest (in parallel) and applies the stretch.
pub fn load_dataset(manifest: &Manifest, stretch: StretchMode) -> Result<Dataset> {
    let refs: Vec<&str> = manifest.references().into_iter().map(|(r, _)| r).collect();
    let decoded_refs: Vec<Result<GrayImage>> = refs.par_iter().map(|r| load_gray(manifest.resolve(r))).collect();
    let mut warnings = Vec::new();
    let mut raw_refs = HashMap::new();
    let mut ref_images = HashMap::new();
    for (r, img) in refs.iter().zip(decoded_refs) {
        let img = img?;
        let stretched = match stretch {
            StretchMode::None => Stretched { image: img.clone(), degenerate: false },
            _ => luminance_stretch(&img),
        };
        if stretched.degenerate {
            warnings.push(format!("{r}: constant reference image, stretched to zeros"));
        }
        ref_images.insert(*r, Arc::new(stretched.image));
        raw_refs.insert(*r, img);
    }

    let decoded_degs: Vec<Result<GrayImage>> = manifest
        .pairs
        .par_iter()
        .map(|p| load_gray(manifest.resolve(&p.deg_path)))
        .collect();
    let mut pairs = Vec::with_capacity(manifest.pairs.len());
    for (p, img) in manifest.pairs.iter().zip(decoded_degs) {
        let img = img?;
        let reference = Arc::clone(&ref_images[p.ref_path.as_str()]);
        if (img.width(), img.height()) != (reference.width(), reference.height()) {
            return Err(Error::Shape(format!(
                "line {}: {} is {}x{} but its reference is {}x{}",
                p.line,
                p.deg_path,
                img.width(),
                img.height(),
                reference.width(),
                reference.height()
            )));
        }
        let stretched = match stretch {
            StretchMode::None => Stretched { image: img, degenerate: false },
            StretchMode::PerImage => luminance_stretch(&img),
            StretchMode::Paired => {
                let (lo, hi) = min_max(raw_refs[p.ref_path.as_str()].values());
                stretch_with_range(&img, lo, hi)
            }
        };
        if stretched.degenerate {
            warnings.push(format!("{}: constant degraded image, stretched to zeros", p.deg_path));
        }
        pairs.push(LoadedPair {
            reference_id: p.ref_path.clone(),
            category: p.category.clone(),
            reference,
            degraded: stretched.image,
            dmos: p.dmos,
        });
    }
    Ok(Dataset {
        dataset_id: manifest.dataset_id.clone(),
        pairs,
        warnings,
    })
}

/// Decodes and normalizes a single pair the same way [`load_dataset`] does.
/// Returns the stretched images and any degeneracy warnings.
pub fn load_pair(
    ref_path: impl AsRef<Path>,
    deg_path: impl AsRef<Path>,
    stretch: StretchMode,
) -> Result<(GrayImage, GrayImage, Vec<String>)> {
    let (ref_path, deg_path) = (ref_path.as_ref(), deg_path.as_ref());
    let (reference, degraded) = (load_gray(ref_path)?, load_gray(deg_path)?);
    if (reference.width(), reference.height()) != (degraded.width(), degraded.height()) {
        return Err(Error::Shape(format!(
            "{} is {}x{} but {} is {}x{}",
            deg_path.display(),
            degraded.width(),
            degraded.height(),
            ref_path.display(),
            reference.width(),
            reference.height()
        )));
    }
    let (r, d) = match stretch {
        StretchMode::None => return Ok((reference, degraded, Vec::new())),
        StretchMode::PerImage => (luminance_stretch(&reference), luminance_stretch(&degraded)),
        StretchMode::Paired => {
            let (lo, hi) = min_max(reference.values());
            (luminance_stretch(&reference), stretch_with_range(&degraded, lo, hi))
        }
    };
    let mut warnings = Vec::new();
    for (flag, path) in [(r.degenerate, ref_path), (d.degenerate, deg_path)] {
        if flag {
            warnings.push(format!("{}: constant image, stretched to zeros", path.display()));
        }
    }
    Ok((r.image, d.image, warnings))
}

/// Which reading of the rating-to-DMOS conversion to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DmosConvention {
    /// `1 − rating/100`, as printed.
    #[default]
    Printed,
    /// `rating/100`.
    Inverted,
}

impl DmosConvention {
    pub fn label(self) -> &'static str {
        match self {
            DmosConvention::Printed => "dmos = 1 - rating/100",
            DmosConvention::Inverted => "dmos = rating/100",
        }
    }

    /// Re-expresses a DMOS recorded under the printed convention.
    pub fn from_printed(self, dmos: f64) -> f64 {
        match self {
            DmosConvention::Printed => dmos,
            DmosConvention::Inverted => 1.0 - dmos,
        }
    }
}

pub fn rating_to_dmos(rating: i64, convention: DmosConvention) -> Result<f64> {
    if !(0..=100).contains(&rating) {
        return Err(Error::InvalidParameter(format!("rating {rating} outside 0..=100")));
    }
    let r = rating as f64 / 100.0;
    Ok(match convention {
        DmosConvention::Printed => 1.0 - r,
        DmosConvention::Inverted => r,
    })
}

/// Partition of reference images into `k` folds.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    folds: BTreeMap<String, usize>,
    pub warnings: Vec<String>,
}

impl FoldAssignment {
    pub fn fold_of(&self, reference_id: &str) -> Option<usize> {
        self.folds.get(reference_id).copied()
    }

    pub fn members(&self, fold: usize) -> Vec<&str> {
        self.folds
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(r, _)| r.as_str())
            .collect()
    }

    pub fn reference_count(&self) -> usize {
        self.folds.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.folds.iter().map(|(r, &f)| (r.as_str(), f))
    }
}

pub fn stratified_folds(manifest: &Manifest, k: usize, seed: u64) -> Result<FoldAssignment> {
    stratified_folds_for(manifest.references(), k, seed)
}

/// Seeded shuffle within each category followed by round-robin dealing.
///
/// The dealing position carries over between categories so overall fold
/// sizes stay balanced too. Categories with fewer than `k` references are
/// pooled into one shared stratum.
pub fn stratified_folds_for<'a>(
    references: impl IntoIterator<Item = (&'a str, Option<&'a str>)>,
    k: usize,
    seed: u64,
) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("fold count must be at least 2, got {k}")));
    }
    let mut strata: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut seen = HashMap::new();
    for (r, cat) in references {
        if seen.insert(r, ()).is_none() {
            strata.entry(cat.unwrap_or("")).or_default().push(r);
        }
    }
    let total = seen.len();
    if k > total {
        return Err(Error::InvalidParameter(format!(
            "{k} folds requested but only {total} reference images"
        )));
    }

    let mut warnings = Vec::new();
    let mut pooled = Vec::new();
    let mut ordered: Vec<Vec<&str>> = Vec::new();
    for (cat, refs) in strata {
        if refs.len() < k && refs.len() < total {
            warnings.push(format!(
                "category `{cat}` has {} references (< {k}); pooled into a shared stratum",
                refs.len()
            ));
            pooled.extend(refs);
        } else {
            ordered.push(refs);
        }
    }
    if !pooled.is_empty() {
        ordered.push(pooled);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = BTreeMap::new();
    let mut next = 0usize;
    for mut stratum in ordered {
        stratum.shuffle(&mut rng);
        for r in stratum {
            folds.insert(r.to_string(), next % k);
            next += 1;
        }
    }
    Ok(FoldAssignment {
        k,
        seed,
        folds,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{ImageBuffer, Luma, Rgb};
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<Manifest> {
        parse_manifest(text.as_bytes(), Path::new("m.csv"), PathBuf::new())
    }

    #[test]
    fn manifest_parsing() {
        assert!(parse("").is_err());
        assert!(parse("ref_path,deg_path,dmos,category,codec,quality\n").is_err());

        let text = "ref_path,deg_path,dmos,category,codec,quality\n\
                    # comment line\n\
                    a.png,a1.png,0.1,coast,JPEG,30\n\
                    a.png,a2.png,0.5,,,\n\
                    b.png,b1.png,1,forest,JPEG,5\n";
        let m = parse(text).unwrap();
        assert_eq!(m.pairs.len(), 3);
        assert_eq!(m.pairs[0].deg_path, "a1.png");
        assert_eq!(m.pairs[1].deg_path, "a2.png");
        assert_eq!(m.pairs[1].category, None);
        assert_eq!(m.pairs[2].dmos, 1.0);
        assert_eq!(m.pairs[2].line, 5);
        assert_eq!(m.checksum.len(), 64);
        assert_eq!(m.references(), vec![("a.png", Some("coast")), ("b.png", Some("forest"))]);
    }

    #[test]
    fn manifest_errors_carry_line_numbers() {
        let err = parse("ref_path,deg_path,dmos,category,codec,quality\na,b,0.2,,,\nc,d,1.2,,,\n").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("1.2"));
            }
            e => panic!("unexpected {e}"),
        }
        let dup = parse("ref_path,deg_path,dmos,category,codec,quality\na,b,0.2,,,\na,b,0.3,,,\n").unwrap_err();
        assert!(dup.to_string().contains("duplicate"));
        let bad_header = parse("ref,deg,dmos\na,b,0.2\n").unwrap_err();
        assert!(bad_header.to_string().contains("expected header"));
        let nan = parse("ref_path,deg_path,dmos,category,codec,quality\na,b,x,,,\n").unwrap_err();
        assert!(nan.to_string().contains(":2:"));
    }

    #[test]
    fn manifest_round_trip() {
        let text = "ref_path,deg_path,dmos,category,codec,quality\n\
                    a.png,a1.png,0.125,coast,JPEG,30\n\
                    b.png,b1.png,0.3333333333333333,,,\n";
        let m = parse(text).unwrap();
        let again = parse(&render_manifest(&m)).unwrap();
        let strip = |m: &Manifest| {
            m.pairs
                .iter()
                .map(|p| (p.ref_path.clone(), p.deg_path.clone(), p.dmos, p.category.clone(), p.codec.clone(), p.quality_level.clone()))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&m), strip(&again));
    }

    #[test]
    fn load_manifest_checks_files() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageBuffer::<Luma<u8>, _>::from_raw(2, 1, vec![0u8, 255]).unwrap();
        img.save(dir.path().join("r.png")).unwrap();
        img.save(dir.path().join("d.png")).unwrap();
        let path = dir.path().join("set.csv");
        std::fs::write(&path, "ref_path,deg_path,dmos,category,codec,quality\nr.png,d.png,0.5,,,\n").unwrap();
        let m = load_manifest(&path).unwrap();
        assert_eq!(m.dataset_id, "set");
        let ds = load_dataset(&m, StretchMode::PerImage).unwrap();
        assert_eq!(ds.pairs[0].degraded.values(), &[0.0, 255.0]);

        std::fs::write(&path, "ref_path,deg_path,dmos,category,codec,quality\nr.png,missing.png,0.5,,,\n").unwrap();
        let err = load_manifest(&path).unwrap_err();
        assert!(err.to_string().contains("missing.png"));
    }

    #[test]
    fn grayscale_conversion() {
        assert_eq!(luma(255, 255, 255), 255.0);
        assert_eq!(luma(0, 0, 0), 0.0);
        assert_eq!(luma(255, 0, 0), 76.0);
        assert_eq!(luma(0, 255, 0), 150.0); // 149.685
        assert_eq!(luma(0, 0, 255), 29.0); // 29.07

        let rgb = ImageBuffer::<Rgb<u8>, _>::from_raw(2, 1, vec![255, 0, 0, 255, 255, 255]).unwrap();
        let g = to_grayscale(&DynamicImage::ImageRgb8(rgb)).unwrap();
        assert_eq!(g.values(), &[76.0, 255.0]);
        let rgba = DynamicImage::new_rgba8(2, 2);
        assert!(to_grayscale(&rgba).is_err());
        let wide = DynamicImage::new_luma16(2, 2);
        assert!(to_grayscale(&wide).is_err());
    }

    #[test]
    fn decodes_pgm_and_ppm() {
        let dir = tempfile::tempdir().unwrap();
        let pgm = dir.path().join("a.pgm");
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend([0u8, 64, 128, 255]);
        std::fs::write(&pgm, bytes).unwrap();
        assert_eq!(load_gray(&pgm).unwrap().values(), &[0.0, 64.0, 128.0, 255.0]);

        let ppm = dir.path().join("a.ppm");
        let mut bytes = b"P6\n1 1\n255\n".to_vec();
        bytes.extend([255u8, 0, 0]);
        std::fs::write(&ppm, bytes).unwrap();
        assert_eq!(load_gray(&ppm).unwrap().values(), &[76.0]);

        let junk = dir.path().join("junk.png");
        std::fs::write(&junk, b"not an image").unwrap();
        assert!(load_gray(&junk).is_err());
    }

    #[test]
    fn stretch_cases() {
        let full = GrayImage::new(3, 1, vec![0.0, 17.0, 255.0]).unwrap();
        let s = luminance_stretch(&full);
        assert!(!s.degenerate);
        assert_eq!(s.image.values(), full.values());

        let flat = GrayImage::filled(2, 2, 9.0).unwrap();
        let s = luminance_stretch(&flat);
        assert!(s.degenerate);
        assert!(s.image.values().iter().all(|&v| v == 0.0));

        let two = GrayImage::new(2, 1, vec![50.0, 100.0]).unwrap();
        assert_eq!(luminance_stretch(&two).image.values(), &[0.0, 255.0]);

        let paired = stretch_with_range(&GrayImage::new(2, 1, vec![60.0, 110.0]).unwrap(), 50.0, 100.0);
        assert_eq!(paired.image.values(), &[51.0, 306.0]);
    }

    #[test]
    fn dmos_conversion() {
        assert_eq!(rating_to_dmos(100, DmosConvention::Printed).unwrap(), 0.0);
        assert_eq!(rating_to_dmos(0, DmosConvention::Printed).unwrap(), 1.0);
        assert_eq!(rating_to_dmos(50, DmosConvention::Printed).unwrap(), 0.5);
        assert_eq!(rating_to_dmos(50, DmosConvention::Inverted).unwrap(), 0.5);
        assert_eq!(rating_to_dmos(100, DmosConvention::Inverted).unwrap(), 1.0);
        assert!(rating_to_dmos(101, DmosConvention::Printed).is_err());
        assert!(rating_to_dmos(-1, DmosConvention::Printed).is_err());
    }

    fn scene_refs() -> Vec<(String, String)> {
        let cats = ["coast", "forest", "highway", "insidecity", "mountain", "opencountry", "street", "tallbuilding"];
        cats.iter()
            .flat_map(|c| (0..260).map(move |i| (format!("{c}/{i}.png"), c.to_string())))
            .collect()
    }

    #[test]
    fn scene_shaped_halving() {
        let refs = scene_refs();
        let f = stratified_folds_for(refs.iter().map(|(r, c)| (r.as_str(), Some(c.as_str()))), 2, 3).unwrap();
        for fold in 0..2 {
            let mut per_cat: BTreeMap<&str, usize> = BTreeMap::new();
            for r in f.members(fold) {
                *per_cat.entry(r.split('/').next().unwrap()).or_default() += 1;
            }
            assert_eq!(per_cat.len(), 8);
            assert!(per_cat.values().all(|&n| n == 130));
        }
        assert!(f.warnings.is_empty());
    }

    #[test]
    fn fold_edge_cases() {
        let refs = [("a", Some("x")), ("b", Some("x")), ("c", Some("y")), ("d", Some("y"))];
        let f = stratified_folds_for(refs, 4, 0).unwrap();
        for fold in 0..4 {
            assert_eq!(f.members(fold).len(), 1);
        }
        assert!(!f.warnings.is_empty());
        assert!(stratified_folds_for(refs, 1, 0).is_err());
        assert!(stratified_folds_for(refs, 5, 0).is_err());
        assert_eq!(stratified_folds_for(refs, 2, 9).unwrap(), stratified_folds_for(refs, 2, 9).unwrap());
    }

    proptest! {
        #[test]
        fn folds_partition_and_balance(
            sizes in proptest::collection::vec(3usize..12, 1..5),
            k in 2usize..4,
            seed in any::<u64>(),
        ) {
            let refs: Vec<(String, String)> = sizes
                .iter()
                .enumerate()
                .flat_map(|(c, &n)| (0..n).map(move |i| (format!("c{c}-{i}"), format!("c{c}"))))
                .collect();
            let f = stratified_folds_for(refs.iter().map(|(r, c)| (r.as_str(), Some(c.as_str()))), k, seed).unwrap();
            prop_assert_eq!(f.reference_count(), refs.len());
            for (r, _) in &refs {
                prop_assert!(f.fold_of(r).unwrap() < k);
            }
            for c in 0..sizes.len() {
                let counts: Vec<usize> = (0..k)
                    .map(|fold| f.members(fold).iter().filter(|r| r.starts_with(&format!("c{c}-"))).count())
                    .collect();
                let max = *counts.iter().max().unwrap();
                let min = *counts.iter().min().unwrap();
                prop_assert!(max - min <= 1);
            }
        }

        #[test]
        fn stretch_hits_both_ends(v in proptest::collection::vec(-1000.0f64..1000.0, 2..50)) {
            let img = GrayImage::new(v.len(), 1, v.clone()).unwrap();
            let s = luminance_stretch(&img);
            let (lo, hi) = min_max(s.image.values());
            if s.degenerate {
                prop_assert!(s.image.values().iter().all(|&x| x == 0.0));
            } else {
                prop_assert_eq!(lo, 0.0);
                prop_assert_eq!(hi, 255.0);
            }
        }

        #[test]
        fn luma_in_range(r in any::<u8>(), g in any::<u8>(), b in any::<u8>()) {
            let y = luma(r, g, b);
            prop_assert!((0.0..=255.0).contains(&y));
            prop_assert_eq!(y, y.round());
        }
    }
}
