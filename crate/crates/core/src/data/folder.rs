//! Image-folder ingestion.
//!
//! Layout: `root/{source,target}/{class}/*.{png,jpg,jpeg}`, or pre-split as
//! `root/{source,target}/{train,val,test}/{class}/*`. Images are resized to
//! a square and reduced to fixed-length feature vectors.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use image::RgbImage;
use rand::Rng;

use super::{split_72_8_20, DatasetSplit, Domain, DomainSplit, Sample};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded, stream};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FeatureMode {
    /// All `size·size·3` pixel values scaled to `[0, 1]`.
    Flatten,
    /// Per-channel averages over a `cells × cells` grid.
    MeanPool { cells: u32 },
}

/// Load-time augmentation; each sample is transformed in place, so counts
/// and labels never change.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Augment {
    /// Mirror horizontally with probability 1/2.
    pub flip: bool,
    /// Crop a random square covering this fraction range of the side.
    pub scale: Option<(f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FolderOptions {
    pub image_size: u32,
    pub features: FeatureMode,
    pub augment: Augment,
    pub seed: u64,
}

impl Default for FolderOptions {
    fn default() -> Self {
        FolderOptions {
            image_size: 32,
            features: FeatureMode::MeanPool { cells: 4 },
            augment: Augment::default(),
            seed: 0,
        }
    }
}

impl FolderOptions {
    pub fn feature_dim(&self) -> usize {
        match self.features {
            FeatureMode::Flatten => (self.image_size * self.image_size * 3) as usize,
            FeatureMode::MeanPool { cells } => (cells * cells * 3) as usize,
        }
    }
}

const PARTS: [&str; 3] = ["train", "val", "test"];

fn subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if path.is_file() && matches!(ext.as_deref(), Some("png" | "jpg" | "jpeg")) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn name_of(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// `(class name, files)` for every class directory under `dir`.
fn class_files(dir: &Path) -> Result<Vec<(String, Vec<PathBuf>)>> {
    subdirs(dir)?
        .into_iter()
        .map(|d| Ok((name_of(&d), image_files(&d)?)))
        .collect()
}

fn is_pre_split(domain_dir: &Path) -> bool {
    PARTS.iter().all(|p| domain_dir.join(p).is_dir())
}

fn featurize(img: RgbImage, opts: &FolderOptions, sample_seed: u64) -> Vec<f64> {
    let mut img = img;
    let mut rng = seeded(sample_seed);
    if let Some((lo, hi)) = opts.augment.scale {
        let frac = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let side = ((img.width().min(img.height()) as f64) * frac).round().max(1.0) as u32;
        let x0 = rng.random_range(0..=img.width() - side);
        let y0 = rng.random_range(0..=img.height() - side);
        img = image::imageops::crop_imm(&img, x0, y0, side, side).to_image();
    }
    if opts.augment.flip && rng.random_bool(0.5) {
        img = image::imageops::flip_horizontal(&img);
    }
    let n = opts.image_size;
    let img = image::imageops::resize(&img, n, n, FilterType::Triangle);
    match opts.features {
        FeatureMode::Flatten => img.as_raw().iter().map(|&v| v as f64 / 255.0).collect(),
        FeatureMode::MeanPool { cells } => {
            let cells = cells.clamp(1, n);
            let mut sums = vec![0.0; (cells * cells * 3) as usize];
            let mut counts = vec![0usize; (cells * cells) as usize];
            for (x, y, px) in img.enumerate_pixels() {
                let cell = ((y * cells / n) * cells + x * cells / n) as usize;
                counts[cell] += 1;
                for ch in 0..3 {
                    sums[cell * 3 + ch] += px.0[ch] as f64 / 255.0;
                }
            }
            for (i, s) in sums.iter_mut().enumerate() {
                *s /= counts[i / 3].max(1) as f64;
            }
            sums
        }
    }
}

fn load_file(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Image {
            path: path.to_path_buf(),
            source: other,
        },
    })?;
    Ok(img.to_rgb8())
}

/// Loads a two-domain image dataset. Class indices follow sorted class
/// names; ids follow sorted path order, source domain first.
pub fn load_image_folder(root: &Path, opts: &FolderOptions) -> Result<DatasetSplit> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset root is not a directory"),
        ));
    }
    if opts.image_size == 0 {
        return Err(Error::config("image_size must be positive"));
    }
    let domains = [Domain::Source, Domain::Target];
    let dirs: Vec<PathBuf> = domains.iter().map(|d| root.join(d.name())).collect();
    for d in &dirs {
        if !d.is_dir() {
            return Err(Error::Empty(format!("missing domain directory {}", d.display())));
        }
    }
    let pre_split = is_pre_split(&dirs[0]);

    // (domain, part index or None, class name, path)
    let mut entries: Vec<(Domain, Option<usize>, String, PathBuf)> = Vec::new();
    let mut classes: [BTreeSet<String>; 2] = Default::default();
    for (k, (domain, dir)) in domains.iter().zip(&dirs).enumerate() {
        let parts: Vec<(Option<usize>, PathBuf)> = if pre_split {
            PARTS
                .iter()
                .enumerate()
                .map(|(i, p)| (Some(i), dir.join(p)))
                .collect()
        } else {
            vec![(None, dir.clone())]
        };
        for (part, pdir) in parts {
            if !pdir.is_dir() {
                continue;
            }
            for (class, files) in class_files(&pdir)? {
                classes[k].insert(class.clone());
                for f in files {
                    entries.push((*domain, part, class.clone(), f));
                }
            }
        }
    }
    for (k, other) in [(0usize, 1usize), (1, 0)] {
        if let Some(c) = classes[k].difference(&classes[other]).next() {
            return Err(Error::CategoryShift {
                class: c.clone(),
                domain: domains[k].name(),
            });
        }
    }
    if entries.is_empty() {
        return Err(Error::Empty(format!("no images under {}", root.display())));
    }
    let class_names: Vec<String> = classes[0].iter().cloned().collect();
    entries.sort_by(|a, b| (a.0, &a.3).cmp(&(b.0, &b.3)));

    let mut per_domain: [[Vec<Sample>; 3]; 2] = Default::default();
    for (id, (domain, part, class, path)) in entries.into_iter().enumerate() {
        let img = load_file(&path)?;
        let y = class_names.binary_search(&class).expect("class indexed above");
        let x = featurize(img, opts, derive_seed(opts.seed ^ stream::AUGMENT, id as u64));
        let k = (domain == Domain::Target) as usize;
        per_domain[k][part.unwrap_or(0)].push(Sample { id, x, y, domain });
    }
    let [src, tgt] = per_domain;
    let finish = |parts: [Vec<Sample>; 3], stream_id: u64| -> Result<DomainSplit> {
        let [train, val, test] = parts;
        if pre_split {
            Ok(DomainSplit { train, val, test })
        } else {
            split_72_8_20(&train, derive_seed(opts.seed, stream_id))
        }
    };
    Ok(DatasetSplit {
        source: finish(src, stream::SOURCE_SPLIT)?,
        target: finish(tgt, stream::TARGET_SPLIT)?,
        num_classes: class_names.len(),
        dim: opts.feature_dim(),
        class_names,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn write_tree(root: &Path, classes: &[&str], per_class: usize) {
        for domain in ["source", "target"] {
            for (ci, class) in classes.iter().enumerate() {
                let dir = root.join(domain).join(class);
                std::fs::create_dir_all(&dir).unwrap();
                for i in 0..per_class {
                    let shade = (40 * ci + 10 * i) as u8;
                    let img = RgbImage::from_pixel(8, 6, Rgb([shade, 255 - shade, 7]));
                    img.save(dir.join(format!("img{i:02}.png"))).unwrap();
                }
            }
        }
    }

    #[test]
    fn empty_directory_is_an_error() {
        let tmp = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(tmp.path().join("source")).unwrap();
        std::fs::create_dir_all(tmp.path().join("target")).unwrap();
        let err = load_image_folder(tmp.path(), &FolderOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Empty(_)));
        let err = load_image_folder(&tmp.path().join("nope"), &FolderOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn two_classes_two_domains_ten_files() {
        let tmp = tempfile::tempdir().unwrap();
        write_tree(tmp.path(), &["zebra", "admiral"], 10);
        let opts = FolderOptions {
            image_size: 4,
            features: FeatureMode::Flatten,
            ..FolderOptions::default()
        };
        let data = load_image_folder(tmp.path(), &opts).unwrap();
        assert_eq!(data.source.len() + data.target.len(), 40);
        assert_eq!(data.class_names, vec!["admiral", "zebra"]);
        assert_eq!(data.dim, 48);
        // sorted path order: source/admiral/* get ids 0..10
        let first = data.source.iter().find(|s| s.id == 0).unwrap();
        assert_eq!(first.y, 0);
        let zebra = data.source.iter().find(|s| s.id == 10).unwrap();
        assert_eq!(zebra.y, 1);
        assert!(data.target.iter().all(|s| s.id >= 20));
        // same tree loaded twice
        assert_eq!(data, load_image_folder(tmp.path(), &opts).unwrap());
    }

    #[test]
    fn category_shift_is_reported() {
        let tmp = tempfile::tempdir().unwrap();
        write_tree(tmp.path(), &["a", "b"], 5);
        std::fs::create_dir_all(tmp.path().join("source/c")).unwrap();
        let err = load_image_folder(tmp.path(), &FolderOptions::default()).unwrap_err();
        assert!(matches!(err, Error::CategoryShift { ref class, domain: "source" } if class == "c"));
    }

    #[test]
    fn unreadable_file_is_named() {
        let tmp = tempfile::tempdir().unwrap();
        write_tree(tmp.path(), &["a"], 5);
        let bad = tmp.path().join("target/a/zz.png");
        std::fs::write(&bad, b"not an image").unwrap();
        let err = load_image_folder(tmp.path(), &FolderOptions::default()).unwrap_err();
        assert!(err.to_string().contains("zz.png"), "{err}");
    }

    #[test]
    fn augmentation_preserves_counts_and_labels() {
        let tmp = tempfile::tempdir().unwrap();
        write_tree(tmp.path(), &["a", "b"], 6);
        let plain = load_image_folder(tmp.path(), &FolderOptions::default()).unwrap();
        let opts = FolderOptions {
            augment: Augment {
                flip: true,
                scale: Some((0.6, 1.0)),
            },
            ..FolderOptions::default()
        };
        let aug = load_image_folder(tmp.path(), &opts).unwrap();
        let labels = |d: &DatasetSplit| {
            let mut v: Vec<(usize, usize)> = d.source.iter().chain(d.target.iter()).map(|s| (s.id, s.y)).collect();
            v.sort();
            v
        };
        assert_eq!(labels(&plain), labels(&aug));
    }

    #[test]
    fn pre_split_layout_is_respected() {
        let tmp = tempfile::tempdir().unwrap();
        for domain in ["source", "target"] {
            for (part, n) in [("train", 3), ("val", 1), ("test", 2)] {
                let dir = tmp.path().join(domain).join(part).join("only");
                std::fs::create_dir_all(&dir).unwrap();
                for i in 0..n {
                    RgbImage::from_pixel(4, 4, Rgb([i as u8, 0, 0]))
                        .save(dir.join(format!("{i}.png")))
                        .unwrap();
                }
            }
        }
        let data = load_image_folder(tmp.path(), &FolderOptions::default()).unwrap();
        assert_eq!((data.source.train.len(), data.source.val.len(), data.source.test.len()), (3, 1, 2));
        assert_eq!(data.target.test.len(), 2);
    }
}
