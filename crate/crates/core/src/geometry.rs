//! Axis-aligned box algebra.
//!
//! Boxes use continuous corner coordinates: width is `x2 - x1` with no `+1`
//! pixel correction. Every function here is pure.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Exponent used by [`alpha_iou`] when the caller has no preference.
pub const DEFAULT_ALPHA: f64 = 3.0;

/// Axis-aligned rectangle `(x1, y1, x2, y2)` with `x1 <= x2`, `y1 <= y2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(into = "[f64; 4]")]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        let coords = [x1, y1, x2, y2];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite(coords));
        }
        if x1 > x2 || y1 > y2 {
            return Err(GeometryError::Inverted(coords));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn from_array(c: [f64; 4]) -> Result<Self, GeometryError> {
        Self::new(c[0], c[1], c[2], c[3])
    }

    /// Builds a box from two corner points in any order.
    ///
    /// Noisy regressors can emit `x1 > x2`; this reorders each axis instead
    /// of rejecting the box. Non-finite input is still an error.
    pub fn from_unordered(xa: f64, ya: f64, xb: f64, yb: f64) -> Result<Self, GeometryError> {
        Self::new(xa.min(xb), ya.min(yb), xa.max(xb), ya.max(yb))
    }

    /// Box from center and size; `w` and `h` must be non-negative.
    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        Self::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    #[inline]
    pub fn x1(&self) -> f64 {
        self.x1
    }

    #[inline]
    pub fn y1(&self) -> f64 {
        self.y1
    }

    #[inline]
    pub fn x2(&self) -> f64 {
        self.x2
    }

    #[inline]
    pub fn y2(&self) -> f64 {
        self.y2
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    #[inline]
    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    #[inline]
    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    #[inline]
    pub fn area(&self) -> f64 {
        area(self)
    }

    /// Corner coordinates in `[x1, y1, x2, y2]` order.
    #[inline]
    pub fn to_array(self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    /// Center-size parameterization `[cx, cy, w, h]`.
    pub fn to_xywh(self) -> [f64; 4] {
        let (cx, cy) = self.center();
        [cx, cy, self.width(), self.height()]
    }

    /// True when `other` lies inside `self` (boundaries may touch).
    pub fn contains(&self, other: &BBox) -> bool {
        self.x1 <= other.x1 && self.y1 <= other.y1 && self.x2 >= other.x2 && self.y2 >= other.y2
    }

    /// Zero width or zero height.
    pub fn is_degenerate(&self) -> bool {
        self.x2 <= self.x1 || self.y2 <= self.y1
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.to_array()
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = GeometryError;

    fn try_from(c: [f64; 4]) -> Result<Self, Self::Error> {
        BBox::from_array(c)
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let c = <[f64; 4]>::deserialize(d)?;
        BBox::from_array(c).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.x1, self.y1, self.x2, self.y2)
    }
}

/// Overlap of two boxes; `None` unless both width and height are positive.
pub fn intersect(a: &BBox, b: &BBox) -> Option<BBox> {
    let x1 = a.x1.max(b.x1);
    let y1 = a.y1.max(b.y1);
    let x2 = a.x2.min(b.x2);
    let y2 = a.y2.min(b.y2);
    if x2 > x1 && y2 > y1 {
        Some(BBox { x1, y1, x2, y2 })
    } else {
        None
    }
}

#[inline]
pub fn area(b: &BBox) -> f64 {
    (b.x2 - b.x1) * (b.y2 - b.y1)
}

fn intersection_area(a: &BBox, b: &BBox) -> f64 {
    intersect(a, b).map_or(0.0, |i| area(&i))
}

/// Intersection over union; two zero-area boxes give 0.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = intersection_area(a, b);
    let union = area(a) + area(b) - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Smallest box containing both inputs.
pub fn enclosing(a: &BBox, b: &BBox) -> BBox {
    BBox {
        x1: a.x1.min(b.x1),
        y1: a.y1.min(b.y1),
        x2: a.x2.max(b.x2),
        y2: a.y2.max(b.y2),
    }
}

/// Generalized IoU: `iou - (C - U) / C` with `C` the enclosing-box area.
pub fn giou(a: &BBox, b: &BBox) -> f64 {
    let inter = intersection_area(a, b);
    let union = area(a) + area(b) - inter;
    let hull = area(&enclosing(a, b));
    if hull <= 0.0 {
        return 0.0;
    }
    let iou = if union > 0.0 { inter / union } else { 0.0 };
    iou - (hull - union) / hull
}

/// Distance IoU: `iou - rho^2 / c^2`, rho the center distance and c the
/// enclosing-box diagonal.
pub fn diou(a: &BBox, b: &BBox) -> f64 {
    let hull = enclosing(a, b);
    let diag2 = hull.width().powi(2) + hull.height().powi(2);
    if diag2 <= 0.0 {
        return 0.0;
    }
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    let rho2 = (ax - bx).powi(2) + (ay - by).powi(2);
    iou(a, b) - rho2 / diag2
}

/// Power IoU, `iou^alpha`. `alpha` must be positive.
pub fn alpha_iou(a: &BBox, b: &BBox, alpha: f64) -> f64 {
    debug_assert!(alpha > 0.0, "alpha must be positive");
    iou(a, b).powf(alpha)
}

/// Coordinate-wise min/max hull over a non-empty set of boxes.
pub fn union_bounds<'a, I>(boxes: I) -> Result<BBox, GeometryError>
where
    I: IntoIterator<Item = &'a BBox>,
{
    boxes
        .into_iter()
        .fold(None, |acc: Option<BBox>, b| {
            Some(match acc {
                None => *b,
                Some(u) => enclosing(&u, b),
            })
        })
        .ok_or(GeometryError::EmptyUnion)
}
