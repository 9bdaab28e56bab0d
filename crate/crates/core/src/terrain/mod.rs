//! Seeded procedural heightfields.
//!
//! A field is the sum of an inclined plane, a fractal value-noise term scaled
//! by `elevation_range * roughness`, and an optional carved valley:
//!
//! ```text
//! h(x, y) = base + slope * (x cos(dir) + y sin(dir))
//!         + elevation_range * roughness * fbm(x, y) - valley(x, y)
//! ```
//!
//! With `roughness = 0` and no valley the field is exactly the plane. The
//! terrain spans `[0, size_x] x [0, size_y]` with `resolution` nodes per axis.

pub mod noise;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{point_segment_distance, Point2, EPS};

/// Features per terrain extent for the lowest noise octave.
const BASE_FEATURES_PER_EXTENT: f64 = 6.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TerrainError {
    #[error("invalid terrain parameters: {0}")]
    InvalidParams(String),
    #[error("point ({x}, {y}) outside terrain extent")]
    OutOfBounds { x: f64, y: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Valley {
    pub path: Vec<Point2>,
    pub depth: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerrainParams {
    pub size_x: f64,
    pub size_y: f64,
    pub resolution: usize,
    #[serde(default)]
    pub base_elevation: f64,
    #[serde(default)]
    pub elevation_range: f64,
    /// Rise over run along `slope_direction`.
    #[serde(default)]
    pub slope: f64,
    /// Degrees counter-clockwise from +X.
    #[serde(default)]
    pub slope_direction: f64,
    #[serde(default)]
    pub roughness: f64,
    #[serde(default = "default_octaves")]
    pub octaves: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valley: Option<Valley>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub materials: Vec<String>,
}

fn default_octaves() -> u32 {
    5
}

impl TerrainParams {
    pub fn flat(size: f64, resolution: usize, elevation: f64) -> Self {
        Self {
            size_x: size,
            size_y: size,
            resolution,
            base_elevation: elevation,
            elevation_range: 0.0,
            slope: 0.0,
            slope_direction: 0.0,
            roughness: 0.0,
            octaves: default_octaves(),
            valley: None,
            seed: 0,
            materials: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), TerrainError> {
        let bad = |m: &str| Err(TerrainError::InvalidParams(m.to_string()));
        if self.resolution < 2 {
            return bad("resolution must be >= 2");
        }
        if !(self.size_x > 0.0 && self.size_y > 0.0 && self.size_x.is_finite() && self.size_y.is_finite()) {
            return bad("size must be positive");
        }
        for (name, v) in [
            ("base_elevation", self.base_elevation),
            ("elevation_range", self.elevation_range),
            ("slope", self.slope),
            ("slope_direction", self.slope_direction),
            ("roughness", self.roughness),
        ] {
            if !v.is_finite() {
                return bad(&format!("{name} must be finite"));
            }
        }
        if self.elevation_range < 0.0 {
            return bad("elevation_range must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.roughness) {
            return bad("roughness must lie in [0, 1]");
        }
        if self.octaves < 1 {
            return bad("octaves must be >= 1");
        }
        if let Some(v) = &self.valley {
            if !(v.width > 0.0) {
                return bad("valley width must be positive");
            }
            if !(v.depth >= 0.0) || !v.depth.is_finite() {
                return bad("valley depth must be >= 0");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Heightfield {
    pub resolution: usize,
    /// Node spacing along x and y, meters.
    pub cell_size: [f64; 2],
    /// Row-major: `heights[row * resolution + col]`, row along y.
    pub heights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub materials: Vec<String>,
}

impl Heightfield {
    pub fn size(&self) -> [f64; 2] {
        let n = (self.resolution - 1) as f64;
        [self.cell_size[0] * n, self.cell_size[1] * n]
    }

    pub fn node_position(&self, col: usize, row: usize) -> Point2 {
        [col as f64 * self.cell_size[0], row as f64 * self.cell_size[1]]
    }

    pub fn height_at_node(&self, col: usize, row: usize) -> f64 {
        self.heights[row * self.resolution + col]
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let [sx, sy] = self.size();
        x >= -EPS && y >= -EPS && x <= sx + EPS && y <= sy + EPS
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.heights
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), h| (lo.min(*h), hi.max(*h)))
    }

    /// Bilinear interpolation of the four surrounding nodes. Returns stored
    /// values exactly at nodes.
    pub fn sample_height(&self, x: f64, y: f64) -> Result<f64, TerrainError> {
        if !(x.is_finite() && y.is_finite()) || !self.contains(x, y) {
            return Err(TerrainError::OutOfBounds { x, y });
        }
        let last = self.resolution - 1;
        let (col, tx) = cell_coord(x / self.cell_size[0], last);
        let (row, ty) = cell_coord(y / self.cell_size[1], last);
        let h00 = self.height_at_node(col, row);
        if tx == 0.0 && ty == 0.0 {
            return Ok(h00);
        }
        let h10 = self.height_at_node(col + 1, row);
        let h01 = self.height_at_node(col, row + 1);
        let h11 = self.height_at_node(col + 1, row + 1);
        let h = h00 * (1.0 - tx) * (1.0 - ty) + h10 * tx * (1.0 - ty) + h01 * (1.0 - tx) * ty + h11 * tx * ty;
        // Rounding can push a convex combination past its corners by an ulp.
        let lo = h00.min(h10).min(h01).min(h11);
        let hi = h00.max(h10).max(h01).max(h11);
        Ok(h.clamp(lo, hi))
    }

    /// Lowers heights along `path` by `depth * (1 - smoothstep(d / width))`,
    /// where `d` is the distance to the polyline.
    pub fn carve_valley(&mut self, path: &[Point2], depth: f64, width: f64) -> Result<(), TerrainError> {
        if path.is_empty() {
            return Err(TerrainError::InvalidParams("valley path is empty".into()));
        }
        if !(width > 0.0) || !(depth >= 0.0) || !depth.is_finite() || !width.is_finite() {
            return Err(TerrainError::InvalidParams("valley needs width > 0 and depth >= 0".into()));
        }
        if let Some(p) = path.iter().find(|p| !self.contains(p[0], p[1])) {
            return Err(TerrainError::OutOfBounds { x: p[0], y: p[1] });
        }
        let res = self.resolution;
        let cell = self.cell_size;
        self.heights.par_chunks_mut(res).enumerate().for_each(|(row, line)| {
            for (col, h) in line.iter_mut().enumerate() {
                let p = [col as f64 * cell[0], row as f64 * cell[1]];
                let d = distance_to_polyline(p, path);
                let falloff = valley_falloff(d / width);
                if falloff > 0.0 {
                    *h -= depth * falloff;
                }
            }
        });
        Ok(())
    }
}

/// Splits a fractional node coordinate into a cell index and an offset,
/// snapping values within 1e-9 of a node onto it.
fn cell_coord(f: f64, last: usize) -> (usize, f64) {
    let rounded = f.round();
    let f = if (f - rounded).abs() < 1e-9 { rounded } else { f };
    let f = f.clamp(0.0, last as f64);
    let idx = (f.floor() as usize).min(last - 1);
    (idx, f - idx as f64)
}

/// `1 - smoothstep(t)` on [0, 1]: 1 at the centerline, 0 from the corridor
/// edge outward.
pub fn valley_falloff(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    1.0 - t * t * (3.0 - 2.0 * t)
}

pub fn distance_to_polyline(p: Point2, path: &[Point2]) -> f64 {
    match path {
        [] => f64::INFINITY,
        [single] => crate::geometry::dist(p, *single),
        _ => path
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Generates the heightfield for `params`. Pure and deterministic; rows are
/// computed in parallel with results identical to a sequential pass.
pub fn generate_heightfield(params: &TerrainParams) -> Result<Heightfield, TerrainError> {
    params.validate()?;
    let res = params.resolution;
    let cell = [
        params.size_x / (res - 1) as f64,
        params.size_y / (res - 1) as f64,
    ];
    let dir = params.slope_direction.to_radians();
    let (gx, gy) = (params.slope * dir.cos(), params.slope * dir.sin());
    let amplitude = params.elevation_range * params.roughness;
    let base_frequency = BASE_FEATURES_PER_EXTENT / params.size_x.max(params.size_y);
    let persistence = 0.25 + 0.5 * params.roughness;

    let mut heights = vec![0.0; res * res];
    heights.par_chunks_mut(res).enumerate().for_each(|(row, line)| {
        let y = row as f64 * cell[1];
        for (col, h) in line.iter_mut().enumerate() {
            let x = col as f64 * cell[0];
            let mut v = params.base_elevation + (gx * x + gy * y);
            if amplitude != 0.0 {
                v += amplitude * noise::fbm(x, y, base_frequency, params.octaves, persistence, params.seed);
            }
            *h = v;
        }
    });

    let mut hf = Heightfield { resolution: res, cell_size: cell, heights, materials: params.materials.clone() };
    if let Some(valley) = &params.valley {
        hf.carve_valley(&valley.path, valley.depth, valley.width)?;
    }
    Ok(hf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(slope: f64, dir: f64) -> TerrainParams {
        TerrainParams { slope, slope_direction: dir, ..TerrainParams::flat(100.0, 33, 0.0) }
    }

    #[test]
    fn flat_field_is_exact() {
        let hf = generate_heightfield(&TerrainParams::flat(50.0, 17, 10.0)).unwrap();
        assert!(hf.heights.iter().all(|h| *h == 10.0));
    }

    #[test]
    fn inclined_plane_along_x() {
        let hf = generate_heightfield(&plane(0.1, 0.0)).unwrap();
        for row in 0..hf.resolution {
            for col in 0..hf.resolution {
                let x = hf.node_position(col, row)[0];
                let d = hf.height_at_node(col, row) - hf.height_at_node(0, row);
                assert!((d - 0.1 * x).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn sample_at_nodes_and_center() {
        let hf = Heightfield { resolution: 2, cell_size: [1.0, 1.0], heights: vec![0.0, 0.0, 0.0, 4.0], materials: vec![] };
        assert_eq!(hf.sample_height(0.5, 0.5).unwrap(), 1.0);
        assert_eq!(hf.sample_height(1.0, 1.0).unwrap(), 4.0);
        assert_eq!(hf.sample_height(0.0, 1.0).unwrap(), 0.0);
        assert!(matches!(hf.sample_height(1.5, 0.0), Err(TerrainError::OutOfBounds { .. })));
        assert!(hf.sample_height(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn rough_field_is_seed_deterministic() {
        let p = TerrainParams { roughness: 0.5, elevation_range: 8.0, seed: 42, ..TerrainParams::flat(64.0, 65, 0.0) };
        let a = generate_heightfield(&p).unwrap();
        let b = generate_heightfield(&p).unwrap();
        let bytes = |h: &Heightfield| h.heights.iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<u8>>();
        assert_eq!(bytes(&a), bytes(&b));
        let c = generate_heightfield(&TerrainParams { seed: 43, ..p }).unwrap();
        assert_ne!(bytes(&a), bytes(&c));
    }

    #[test]
    fn valley_centerline_and_support() {
        let mut hf = generate_heightfield(&TerrainParams::flat(40.0, 41, 5.0)).unwrap();
        let before = hf.clone();
        hf.carve_valley(&[[0.0, 20.0], [40.0, 20.0]], 3.0, 4.0).unwrap();
        for col in 0..hf.resolution {
            assert_eq!(hf.height_at_node(col, 20), before.height_at_node(col, 20) - 3.0);
            assert_eq!(hf.height_at_node(col, 25), before.height_at_node(col, 25));
            assert_eq!(hf.height_at_node(col, 10), before.height_at_node(col, 10));
        }
        let mut prev = f64::INFINITY;
        for row in 20..=24 {
            let lowered = before.height_at_node(7, row) - hf.height_at_node(7, row);
            assert!(lowered <= prev);
            prev = lowered;
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = TerrainParams::flat(10.0, 1, 0.0);
        assert!(generate_heightfield(&p).is_err());
        p.resolution = 4;
        p.roughness = 1.5;
        assert!(generate_heightfield(&p).is_err());
        p.roughness = 0.5;
        p.valley = Some(Valley { path: vec![[0.0, 0.0], [5.0, 5.0]], depth: 1.0, width: 0.0 });
        assert!(generate_heightfield(&p).is_err());
        let mut hf = generate_heightfield(&TerrainParams::flat(10.0, 4, 0.0)).unwrap();
        assert!(hf.carve_valley(&[[0.0, 0.0], [20.0, 0.0]], 1.0, 1.0).is_err());
    }
}
