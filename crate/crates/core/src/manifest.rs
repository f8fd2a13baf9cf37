//! Ordered registry of dataset images.
//!
//! On disk a manifest is line-delimited JSON. The first line is a header
//! `{"target_h": H, "target_w": W}` giving the model resolution; each
//! following line describes one image:
//!
//! ```text
//! {"target_h":240,"target_w":424}
//! {"image_id":"img0","path":"images/img0.png","width":424,"height":240}
//! {"image_id":"img1","path":"images/img1.png","width":424,"height":240,"gt_path":"gt/img1.png"}
//! ```
//!
//! Relative paths are resolved against the manifest's directory.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_IMAGE_SIDE: i64 = 16;

/// Model input/output resolution, height first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Resolution {
    pub height: usize,
    pub width: usize,
}

impl Resolution {
    pub const fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution::new(240, 424)
    }
}

impl std::fmt::Display for Resolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub image_id: String,
    pub path: String,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_path: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    image_id: String,
    path: String,
    width: i64,
    height: i64,
    #[serde(default)]
    gt_path: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    target_h: usize,
    target_w: usize,
}

#[derive(Debug, Clone, Default)]
pub struct DatasetManifest {
    images: Vec<ImageEntry>,
    resolution: Resolution,
    index: HashMap<String, usize>,
    base_dir: Option<PathBuf>,
}

impl PartialEq for DatasetManifest {
    fn eq(&self, other: &Self) -> bool {
        self.images == other.images && self.resolution == other.resolution
    }
}

impl DatasetManifest {
    pub fn new(resolution: Resolution) -> Self {
        Self {
            resolution,
            ..Default::default()
        }
    }

    /// Builds a manifest from entries, enforcing unique ids and minimum size.
    pub fn from_entries(resolution: Resolution, entries: Vec<ImageEntry>) -> Result<Self> {
        let mut manifest = DatasetManifest::new(resolution);
        for entry in entries {
            manifest.push(entry)?;
        }
        Ok(manifest)
    }

    pub fn push(&mut self, entry: ImageEntry) -> Result<()> {
        check_dims(&entry.image_id, i64::from(entry.width), i64::from(entry.height))?;
        if self.index.contains_key(&entry.image_id) {
            return Err(Error::DuplicateImageId(entry.image_id));
        }
        self.index.insert(entry.image_id.clone(), self.images.len());
        self.images.push(entry);
        Ok(())
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn images(&self) -> &[ImageEntry] {
        &self.images
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn get(&self, image_id: &str) -> Option<&ImageEntry> {
        self.index.get(image_id).map(|&i| &self.images[i])
    }

    pub fn position(&self, image_id: &str) -> Option<usize> {
        self.index.get(image_id).copied()
    }

    pub fn require(&self, image_id: &str) -> Result<&ImageEntry> {
        self.get(image_id)
            .ok_or_else(|| Error::UnknownImageId(image_id.to_string()))
    }

    pub fn base_dir(&self) -> Option<&Path> {
        self.base_dir.as_deref()
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = Some(dir.into());
        self
    }

    /// Resolves an entry path against the manifest's directory.
    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Keeps only the listed images, in manifest order.
    pub fn subset<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> DatasetManifest {
        let keep: std::collections::HashSet<&str> = ids.into_iter().collect();
        let mut out = DatasetManifest::new(self.resolution);
        out.base_dir = self.base_dir.clone();
        for entry in &self.images {
            if keep.contains(entry.image_id.as_str()) {
                out.push(entry.clone()).expect("entries already validated");
            }
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let header = Header {
            target_h: self.resolution.height,
            target_w: self.resolution.width,
        };
        out.push_str(&serde_json::to_string(&header).expect("header serializes"));
        out.push('\n');
        for entry in &self.images {
            out.push_str(&serde_json::to_string(entry).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

fn check_dims(image_id: &str, width: i64, height: i64) -> Result<()> {
    if width < MIN_IMAGE_SIDE || height < MIN_IMAGE_SIDE {
        return Err(Error::InvalidDimensions {
            image_id: image_id.to_string(),
            width,
            height,
        });
    }
    Ok(())
}

/// Parses manifest text. A missing header selects the default resolution.
pub fn parse_manifest(text: &str, origin: &Path) -> Result<DatasetManifest> {
    let mut resolution = Resolution::default();
    let mut manifest: Option<DatasetManifest> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if manifest.is_none() {
            if let Ok(h) = serde_json::from_str::<Header>(line) {
                if h.target_h == 0 || h.target_w == 0 {
                    return Err(Error::parse(origin, lineno + 1, "target resolution must be positive"));
                }
                resolution = Resolution::new(h.target_h, h.target_w);
                manifest = Some(DatasetManifest::new(resolution));
                continue;
            }
        }
        let m = manifest.get_or_insert_with(|| DatasetManifest::new(resolution));
        let raw: RawEntry =
            serde_json::from_str(line).map_err(|e| Error::parse(origin, lineno + 1, e))?;
        check_dims(&raw.image_id, raw.width, raw.height)?;
        m.push(ImageEntry {
            image_id: raw.image_id,
            path: raw.path,
            width: raw.width as u32,
            height: raw.height as u32,
            gt_path: raw.gt_path,
        })?;
    }
    Ok(manifest.unwrap_or_else(|| DatasetManifest::new(resolution)))
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest = parse_manifest(&text, path)?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(manifest.with_base_dir(dir))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str) -> ImageEntry {
        ImageEntry {
            image_id: id.into(),
            path: format!("{id}.png"),
            width: 424,
            height: 240,
            gt_path: None,
        }
    }

    #[test]
    fn two_images_keep_order() {
        let text = concat!(
            "{\"target_h\":240,\"target_w\":424}\n",
            "{\"image_id\":\"b\",\"path\":\"b.png\",\"width\":424,\"height\":240}\n",
            "{\"image_id\":\"a\",\"path\":\"a.png\",\"width\":424,\"height\":240,\"gt_path\":\"a_gt.png\"}\n",
        );
        let m = parse_manifest(text, Path::new("m.jsonl")).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.images()[0].image_id, "b");
        assert_eq!(m.images()[1].gt_path.as_deref(), Some("a_gt.png"));
        assert_eq!(m.resolution(), Resolution::new(240, 424));
    }

    #[test]
    fn duplicate_id_rejected() {
        let text = concat!(
            "{\"target_h\":240,\"target_w\":424}\n",
            "{\"image_id\":\"img0\",\"path\":\"a.png\",\"width\":424,\"height\":240}\n",
            "{\"image_id\":\"img0\",\"path\":\"b.png\",\"width\":424,\"height\":240}\n",
        );
        let err = parse_manifest(text, Path::new("m.jsonl")).unwrap_err();
        assert!(matches!(err, Error::DuplicateImageId(id) if id == "img0"));
    }

    #[test]
    fn empty_image_list_is_valid() {
        let m = parse_manifest("{\"target_h\":48,\"target_w\":64}\n", Path::new("m")).unwrap();
        assert!(m.is_empty());
        assert_eq!(m.resolution(), Resolution::new(48, 64));
        let m = parse_manifest("", Path::new("m")).unwrap();
        assert_eq!(m.resolution(), Resolution::new(240, 424));
    }

    #[test]
    fn nonpositive_dimensions_rejected() {
        let text = "{\"image_id\":\"x\",\"path\":\"x.png\",\"width\":0,\"height\":-3}\n";
        let err = parse_manifest(text, Path::new("m")).unwrap_err();
        assert!(matches!(err, Error::InvalidDimensions { .. }));
        let text = "{\"image_id\":\"x\",\"path\":\"x.png\",\"width\":15,\"height\":40}\n";
        assert!(parse_manifest(text, Path::new("m")).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_manifest("/nonexistent/manifest.jsonl").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn jsonl_round_trip() {
        let mut e = entry("img1");
        e.gt_path = Some("gt/img1.png".into());
        let m = DatasetManifest::from_entries(Resolution::new(48, 64), vec![entry("img0"), e]).unwrap();
        let back = parse_manifest(&m.to_jsonl(), Path::new("m")).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn relative_paths_resolve_against_manifest_dir() {
        let m = DatasetManifest::new(Resolution::default()).with_base_dir("/data/set");
        assert_eq!(m.resolve("images/a.png"), PathBuf::from("/data/set/images/a.png"));
        assert_eq!(m.resolve("/abs/a.png"), PathBuf::from("/abs/a.png"));
    }
}
