use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::manifest::DatasetManifest;
use crate::raster::RgbImage;

/// Decoded images at model resolution, keyed by image id.
#[derive(Debug, Clone, Default)]
pub struct ImageSet {
    images: HashMap<String, Arc<RgbImage>>,
}

impl ImageSet {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, RgbImage)>) -> Self {
        Self {
            images: pairs.into_iter().map(|(k, v)| (k, Arc::new(v))).collect(),
        }
    }

    /// Loads every manifest image and resizes it to the manifest resolution.
    pub fn load(manifest: &DatasetManifest) -> Result<Self> {
        let res = manifest.resolution();
        let mut images = HashMap::with_capacity(manifest.len());
        for entry in manifest.images() {
            let img = RgbImage::load(manifest.resolve(&entry.path))?;
            images.insert(entry.image_id.clone(), Arc::new(img.resize(res)));
        }
        Ok(Self { images })
    }

    pub fn get(&self, image_id: &str) -> Result<&RgbImage> {
        self.images
            .get(image_id)
            .map(|a| a.as_ref())
            .ok_or_else(|| Error::UnknownImageId(image_id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}
