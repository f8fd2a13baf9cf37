//! Domain values shared by every module: labeled points, ordinal
//! judgments and pair annotations.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::DatasetManifest;

/// Fraction of `min(width, height)` that two points of an intra-image pair
/// must be apart.
pub const MIN_DISTANCE_FRACTION: f64 = 0.05;

/// Minimum Euclidean distance, in native pixels, between the two points of
/// an intra-image pair. Compared with `>=` against the unrounded value.
pub fn min_pair_distance(width: u32, height: u32) -> f64 {
    MIN_DISTANCE_FRACTION * f64::from(width.min(height))
}

/// A labeled pixel location, integer native-resolution coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PointRef {
    pub image_id: String,
    pub x: u32,
    pub y: u32,
}

impl PointRef {
    pub fn new(image_id: impl Into<String>, x: u32, y: u32) -> Self {
        Self {
            image_id: image_id.into(),
            x,
            y,
        }
    }

    pub fn distance(&self, other: &PointRef) -> f64 {
        let dx = f64::from(self.x) - f64::from(other.x);
        let dy = f64::from(self.y) - f64::from(other.y);
        dx.hypot(dy)
    }

    pub fn check_bounds(&self, width: u32, height: u32) -> Result<()> {
        if self.x < width && self.y < height {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                image_id: self.image_id.clone(),
                x: i64::from(self.x),
                y: i64::from(self.y),
                width,
                height,
            })
        }
    }
}

/// Ordinal judgment `t` over a point pair.
///
/// `BMore` (t = 1) means point b is more traversable, `AMore` (t = -1)
/// means point a is, `Equal` (t = 0) means both are equally traversable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Ordinal {
    AMore,
    Equal,
    BMore,
}

impl Ordinal {
    pub fn value(self) -> i8 {
        match self {
            Ordinal::AMore => -1,
            Ordinal::Equal => 0,
            Ordinal::BMore => 1,
        }
    }

    pub fn sign(self) -> f64 {
        f64::from(self.value())
    }

    pub fn is_equality(self) -> bool {
        self == Ordinal::Equal
    }

    pub fn flipped(self) -> Ordinal {
        match self {
            Ordinal::AMore => Ordinal::BMore,
            Ordinal::Equal => Ordinal::Equal,
            Ordinal::BMore => Ordinal::AMore,
        }
    }

    /// Sign of a real difference `b - a`; exactly zero maps to `Equal`.
    pub fn from_difference(diff: f64) -> Ordinal {
        if diff > 0.0 {
            Ordinal::BMore
        } else if diff < 0.0 {
            Ordinal::AMore
        } else {
            Ordinal::Equal
        }
    }
}

impl TryFrom<i64> for Ordinal {
    type Error = Error;

    fn try_from(t: i64) -> Result<Self> {
        match t {
            -1 => Ok(Ordinal::AMore),
            0 => Ok(Ordinal::Equal),
            1 => Ok(Ordinal::BMore),
            other => Err(Error::InvalidLabel(other)),
        }
    }
}

impl From<Ordinal> for i64 {
    fn from(t: Ordinal) -> i64 {
        i64::from(t.value())
    }
}

impl fmt::Display for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    Intra,
    Cross,
}

impl PairKind {
    pub fn of(a: &PointRef, b: &PointRef) -> PairKind {
        if a.image_id == b.image_id {
            PairKind::Intra
        } else {
            PairKind::Cross
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Human,
    Auto,
    Synthetic,
}

/// One ordinal judgment over two image points.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairAnnotation {
    pub pair_id: String,
    pub kind: PairKind,
    pub a: PointRef,
    pub b: PointRef,
    pub t: Ordinal,
    pub source: LabelSource,
}

impl PairAnnotation {
    pub fn new(
        pair_id: impl Into<String>,
        a: PointRef,
        b: PointRef,
        t: Ordinal,
        source: LabelSource,
    ) -> Self {
        let kind = PairKind::of(&a, &b);
        Self {
            pair_id: pair_id.into(),
            kind,
            a,
            b,
            t,
            source,
        }
    }

    pub fn is_intra(&self) -> bool {
        self.kind == PairKind::Intra
    }

    pub fn image_ids(&self) -> impl Iterator<Item = &str> {
        let second = (self.kind == PairKind::Cross).then_some(self.b.image_id.as_str());
        std::iter::once(self.a.image_id.as_str()).chain(second)
    }

    /// Checks kind/image consistency, point bounds and the intra-pair
    /// minimum distance against the manifest's native image sizes.
    pub fn validate(&self, manifest: &DatasetManifest) -> Result<()> {
        validate_geometry(&self.pair_id, self.kind, &self.a, &self.b, manifest)
    }
}

pub(crate) fn validate_geometry(
    pair_id: &str,
    kind: PairKind,
    a: &PointRef,
    b: &PointRef,
    manifest: &DatasetManifest,
) -> Result<()> {
    if kind != PairKind::of(a, b) {
        return Err(Error::KindMismatch(pair_id.to_string()));
    }
    let ea = manifest.require(&a.image_id)?;
    let eb = manifest.require(&b.image_id)?;
    a.check_bounds(ea.width, ea.height)?;
    b.check_bounds(eb.width, eb.height)?;
    if kind == PairKind::Intra {
        let threshold = min_pair_distance(ea.width, ea.height);
        let distance = a.distance(b);
        if distance < threshold {
            return Err(Error::MinDistanceViolation {
                pair_id: pair_id.to_string(),
                distance,
                threshold,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordinal_serializes_as_integer() {
        let json = serde_json::to_string(&[Ordinal::AMore, Ordinal::Equal, Ordinal::BMore]).unwrap();
        assert_eq!(json, "[-1,0,1]");
        let err = serde_json::from_str::<Ordinal>("2").unwrap_err();
        assert!(err.to_string().contains("got 2"));
    }

    #[test]
    fn min_distance_at_model_resolution_is_twelve_pixels() {
        assert_eq!(min_pair_distance(424, 240), 12.0);
        assert!((min_pair_distance(16, 16) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn kind_follows_image_ids() {
        let a = PointRef::new("img0", 1, 1);
        let b = PointRef::new("img1", 1, 1);
        assert_eq!(PairKind::of(&a, &a), PairKind::Intra);
        assert_eq!(PairKind::of(&a, &b), PairKind::Cross);
    }
}
