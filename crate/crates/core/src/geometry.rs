//! Geometric primitives. World frame is right-handed, Z-up, in meters;
//! rotations are Euler XYZ in degrees.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Containment and coincidence tolerance, meters.
pub const EPS: f64 = 1e-9;

pub type Point2 = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;

    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;

    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };
    pub const ONE: Vec3 = Vec3 { x: 1.0, y: 1.0, z: 1.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn length(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Option<Vec3> {
        let len = self.length();
        (len > 0.0 && len.is_finite()).then(|| self.scale(1.0 / len))
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub position: Vec3,
    /// Euler XYZ, degrees.
    pub rotation: Vec3,
    pub scale: Vec3,
}

impl Default for Transform {
    fn default() -> Self {
        Self { position: Vec3::ZERO, rotation: Vec3::ZERO, scale: Vec3::ONE }
    }
}

impl Transform {
    pub fn at(position: Vec3) -> Self {
        Self { position, ..Self::default() }
    }

    pub fn with_yaw(mut self, degrees: f64) -> Self {
        self.rotation.z = degrees;
        self
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.position.is_finite() && self.rotation.is_finite() && self.scale.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if self.scale.x <= 0.0 || self.scale.y <= 0.0 || self.scale.z <= 0.0 {
            return Err(GeometryError::InvalidTransform("scale must be positive".into()));
        }
        let r = self.rotation;
        if [r.x, r.y, r.z].iter().any(|a| !(-360.0..=360.0).contains(a)) {
            return Err(GeometryError::InvalidTransform("rotation outside [-360, 360]".into()));
        }
        Ok(())
    }
}

/// Normalizes an angle in degrees into (-180, 180].
pub fn wrap_degrees(mut deg: f64) -> f64 {
    deg %= 360.0;
    if deg > 180.0 {
        deg -= 360.0;
    } else if deg <= -180.0 {
        deg += 360.0;
    }
    deg
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn from_points<I: IntoIterator<Item = Vec3>>(points: I) -> Result<Aabb, GeometryError> {
        let mut iter = points.into_iter();
        let first = iter.next().ok_or(GeometryError::EmptyInput)?;
        if !first.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        let mut aabb = Aabb { min: first, max: first };
        for p in iter {
            if !p.is_finite() {
                return Err(GeometryError::NonFinite);
            }
            aabb.min = aabb.min.min(p);
            aabb.max = aabb.max.max(p);
        }
        Ok(aabb)
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max).scale(0.5)
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    /// Radius of the smallest sphere centered at [`Aabb::center`] that
    /// encloses the box.
    pub fn bounding_radius(&self) -> f64 {
        self.extent().length() * 0.5
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let (a, b) = (self.min, self.max);
        [
            Vec3::new(a.x, a.y, a.z),
            Vec3::new(b.x, a.y, a.z),
            Vec3::new(b.x, b.y, a.z),
            Vec3::new(a.x, b.y, a.z),
            Vec3::new(a.x, a.y, b.z),
            Vec3::new(b.x, a.y, b.z),
            Vec3::new(b.x, b.y, b.z),
            Vec3::new(a.x, b.y, b.z),
        ]
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }
}

/// A planar placement domain on the XY plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    Rectangle {
        min: Point2,
        max: Point2,
    },
    Polygon {
        vertices: Vec<Point2>,
    },
    /// A disc, or an annulus when `inner_radius > 0`.
    Disc {
        center: Point2,
        radius: f64,
        #[serde(default, skip_serializing_if = "is_zero")]
        inner_radius: f64,
    },
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl Region {
    pub fn rect(min: Point2, max: Point2) -> Self {
        Region::Rectangle { min, max }
    }

    pub fn disc(center: Point2, radius: f64) -> Self {
        Region::Disc { center, radius, inner_radius: 0.0 }
    }

    pub fn annulus(center: Point2, inner_radius: f64, radius: f64) -> Self {
        Region::Disc { center, radius, inner_radius }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        match self {
            Region::Rectangle { min, max } => {
                if !all_finite(&[*min, *max]) {
                    return Err(GeometryError::NonFinite);
                }
                if !(max[0] > min[0] && max[1] > min[1]) {
                    return Err(GeometryError::InvalidRegion("rectangle has no area".into()));
                }
            }
            Region::Disc { center, radius, inner_radius } => {
                if !all_finite(&[*center]) || !radius.is_finite() || !inner_radius.is_finite() {
                    return Err(GeometryError::NonFinite);
                }
                if *radius <= 0.0 {
                    return Err(GeometryError::InvalidRegion("disc radius must be positive".into()));
                }
                if *inner_radius < 0.0 || *inner_radius >= *radius {
                    return Err(GeometryError::InvalidRegion(
                        "inner radius must lie in [0, radius)".into(),
                    ));
                }
            }
            Region::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(GeometryError::InvalidRegion("polygon needs 3 vertices".into()));
                }
                if !all_finite(vertices) {
                    return Err(GeometryError::NonFinite);
                }
                if polygon_signed_area(vertices).abs() <= EPS {
                    return Err(GeometryError::InvalidRegion("polygon has no area".into()));
                }
                if polygon_self_intersects(vertices) {
                    return Err(GeometryError::InvalidRegion("polygon self-intersects".into()));
                }
            }
        }
        Ok(())
    }

    /// Boundary-inclusive point test.
    pub fn contains(&self, p: Point2) -> bool {
        match self {
            Region::Rectangle { min, max } => {
                p[0] >= min[0] - EPS
                    && p[0] <= max[0] + EPS
                    && p[1] >= min[1] - EPS
                    && p[1] <= max[1] + EPS
            }
            Region::Disc { center, radius, inner_radius } => {
                let d = dist(p, *center);
                d <= radius + EPS && d >= inner_radius - EPS
            }
            Region::Polygon { vertices } => point_in_polygon(p, vertices),
        }
    }

    pub fn bounds(&self) -> (Point2, Point2) {
        match self {
            Region::Rectangle { min, max } => (*min, *max),
            Region::Disc { center, radius, .. } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
            Region::Polygon { vertices } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for v in vertices {
                    lo = [lo[0].min(v[0]), lo[1].min(v[1])];
                    hi = [hi[0].max(v[0]), hi[1].max(v[1])];
                }
                (lo, hi)
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Region::Rectangle { min, max } => (max[0] - min[0]) * (max[1] - min[1]),
            Region::Disc { radius, inner_radius, .. } => {
                std::f64::consts::PI * (radius * radius - inner_radius * inner_radius)
            }
            Region::Polygon { vertices } => polygon_signed_area(vertices).abs(),
        }
    }

    /// Bounding-box center for rectangles and discs, vertex centroid for
    /// polygons.
    pub fn center(&self) -> Point2 {
        match self {
            Region::Rectangle { min, max } => [(min[0] + max[0]) * 0.5, (min[1] + max[1]) * 0.5],
            Region::Disc { center, .. } => *center,
            Region::Polygon { vertices } => {
                let n = vertices.len() as f64;
                let s = vertices.iter().fold([0.0, 0.0], |a, v| [a[0] + v[0], a[1] + v[1]]);
                [s[0] / n, s[1] / n]
            }
        }
    }

    /// True iff the axis-aligned rectangle `[min, max]` lies entirely inside.
    pub fn contains_rect(&self, min: Point2, max: Point2) -> bool {
        self.contains_region(&Region::Rectangle { min, max })
    }

    /// True iff every point of `child` lies inside `self`.
    pub fn contains_region(&self, child: &Region) -> bool {
        match self {
            Region::Rectangle { min, max } => {
                let (lo, hi) = child.bounds();
                lo[0] >= min[0] - EPS
                    && lo[1] >= min[1] - EPS
                    && hi[0] <= max[0] + EPS
                    && hi[1] <= max[1] + EPS
            }
            Region::Disc { center, radius, inner_radius } => {
                let (far, near) = match child {
                    Region::Disc { center: c, radius: r, .. } => {
                        let d = dist(*center, *c);
                        (d + r, (d - r).max(0.0))
                    }
                    _ => {
                        let verts = child.outline();
                        let far = verts.iter().map(|v| dist(*v, *center)).fold(0.0, f64::max);
                        let near = if child.contains(*center) {
                            0.0
                        } else {
                            edges(&verts)
                                .map(|(a, b)| point_segment_distance(*center, a, b))
                                .fold(f64::INFINITY, f64::min)
                        };
                        (far, near)
                    }
                };
                far <= radius + EPS && (*inner_radius == 0.0 || near >= inner_radius - EPS)
            }
            Region::Polygon { vertices } => match child {
                Region::Disc { center, radius, .. } => {
                    point_in_polygon(*center, vertices)
                        && edges(vertices)
                            .all(|(a, b)| point_segment_distance(*center, a, b) >= radius - EPS)
                }
                _ => {
                    let inner = child.outline();
                    inner.iter().all(|v| point_in_polygon(*v, vertices))
                        && !edges(&inner).any(|(a, b)| {
                            edges(vertices).any(|(c, d)| segments_cross_properly(a, b, c, d))
                        })
                        && !vertices.iter().any(|v| strictly_inside(child, *v))
                }
            },
        }
    }

    /// Polygonal outline (rectangle corners or polygon vertices). Discs are
    /// not polygonal and return their bounding-box corners.
    fn outline(&self) -> Vec<Point2> {
        match self {
            Region::Polygon { vertices } => vertices.clone(),
            _ => {
                let (lo, hi) = self.bounds();
                vec![lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]]
            }
        }
    }
}

fn strictly_inside(region: &Region, p: Point2) -> bool {
    match region {
        Region::Rectangle { min, max } => {
            p[0] > min[0] + EPS && p[0] < max[0] - EPS && p[1] > min[1] + EPS && p[1] < max[1] - EPS
        }
        Region::Polygon { vertices } => {
            point_in_polygon(p, vertices)
                && edges(vertices).all(|(a, b)| point_segment_distance(p, a, b) > EPS)
        }
        Region::Disc { center, radius, inner_radius } => {
            let d = dist(p, *center);
            d < radius - EPS && d > inner_radius + EPS
        }
    }
}

fn all_finite(points: &[Point2]) -> bool {
    points.iter().all(|p| p[0].is_finite() && p[1].is_finite())
}

pub fn dist(a: Point2, b: Point2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Closed-ring edge iterator.
pub fn edges(vertices: &[Point2]) -> impl Iterator<Item = (Point2, Point2)> + '_ {
    let n = vertices.len();
    (0..n).map(move |i| (vertices[i], vertices[(i + 1) % n]))
}

pub fn polygon_signed_area(vertices: &[Point2]) -> f64 {
    edges(vertices).map(|(a, b)| a[0] * b[1] - b[0] * a[1]).sum::<f64>() * 0.5
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Segments intersect at a single interior point of both.
fn segments_cross_properly(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    let tol = EPS * (1.0 + dist(a, b) + dist(c, d));
    ((o1 > tol && o2 < -tol) || (o1 < -tol && o2 > tol))
        && ((o3 > tol && o4 < -tol) || (o3 < -tol && o4 > tol))
}

/// Segments share at least one point (including touching and collinear
/// overlap).
fn segments_touch(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    segments_cross_properly(a, b, c, d)
        || point_segment_distance(a, c, d) <= EPS
        || point_segment_distance(b, c, d) <= EPS
        || point_segment_distance(c, a, b) <= EPS
        || point_segment_distance(d, a, b) <= EPS
}

pub fn polygon_self_intersects(vertices: &[Point2]) -> bool {
    let n = vertices.len();
    let e: Vec<_> = edges(vertices).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // Adjacent edges may only share their common vertex.
                let (a, b) = e[i];
                let (c, d) = e[j];
                let shared = if j == i + 1 { b } else { a };
                let other_i = if j == i + 1 { a } else { b };
                let other_j = if j == i + 1 { d } else { c };
                if point_segment_distance(other_j, a, b) <= EPS && dist(other_j, shared) > EPS
                    || point_segment_distance(other_i, c, d) <= EPS && dist(other_i, shared) > EPS
                {
                    return true;
                }
                continue;
            }
            if segments_touch(e[i].0, e[i].1, e[j].0, e[j].1) {
                return true;
            }
        }
    }
    false
}

/// Boundary-inclusive even-odd test.
pub fn point_in_polygon(p: Point2, vertices: &[Point2]) -> bool {
    if edges(vertices).any(|(a, b)| point_segment_distance(p, a, b) <= EPS) {
        return true;
    }
    let mut inside = false;
    for (a, b) in edges(vertices) {
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}
