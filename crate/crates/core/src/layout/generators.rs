use std::collections::HashMap;

use rand::Rng;

use super::{LayoutError, LayoutKind, LayoutSpec, PlacedPoint, Placement};
use crate::geometry::{dist, wrap_degrees, Point2, Region, Transform, Vec3};
use crate::rng::{seeded, SeededRng};

/// Scatter gives up after `SCATTER_ATTEMPTS_PER_POINT * count` candidates.
pub const SCATTER_ATTEMPTS_PER_POINT: usize = 30;

/// Deepest allowed chain of nested layouts.
pub const MAX_NESTING_DEPTH: usize = 3;

/// Polyline vertices closer than this are merged.
const VERTEX_MERGE_DISTANCE: f64 = 1e-9;

/// Rejection tries per polygon sample before the candidate counts as failed.
const POLYGON_SAMPLE_TRIES: usize = 64;

/// Upper bound on points a single generator may emit.
const MAX_POINTS: usize = 1_000_000;

fn point(x: f64, y: f64, yaw: f64) -> PlacedPoint {
    PlacedPoint { transform: Transform::at(Vec3::new(x, y, 0.0)).with_yaw(yaw), group: Vec::new() }
}

fn positive(name: &str, v: f64) -> Result<(), LayoutError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(LayoutError::InvalidSpec(format!("{name} must be positive, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<(), LayoutError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(LayoutError::InvalidSpec(format!("{name} must be >= 0, got {v}")))
    }
}

fn sample_in_region(rng: &mut SeededRng, region: &Region) -> Option<Point2> {
    match region {
        Region::Rectangle { min, max } => {
            Some([rng.random_range(min[0]..=max[0]), rng.random_range(min[1]..=max[1])])
        }
        Region::Disc { center, radius, inner_radius } => {
            // Area-uniform radius over the annulus.
            let u: f64 = rng.random();
            let r = (inner_radius * inner_radius + u * (radius * radius - inner_radius * inner_radius)).sqrt();
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let p = [center[0] + r * theta.cos(), center[1] + r * theta.sin()];
            // Guard against rounding just outside the boundary.
            region.contains(p).then_some(p)
        }
        Region::Polygon { .. } => {
            let (lo, hi) = region.bounds();
            (0..POLYGON_SAMPLE_TRIES).find_map(|_| {
                let p = [rng.random_range(lo[0]..=hi[0]), rng.random_range(lo[1]..=hi[1])];
                region.contains(p).then_some(p)
            })
        }
    }
}

/// Uniform hash grid with cell size equal to the separation radius; any
/// conflicting point lies in the 3x3 neighbourhood of the candidate's cell.
struct SeparationGrid {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<Point2>>,
}

impl SeparationGrid {
    fn new(cell: f64) -> Self {
        Self { cell, cells: HashMap::new() }
    }

    fn key(&self, p: Point2) -> (i64, i64) {
        ((p[0] / self.cell).floor() as i64, (p[1] / self.cell).floor() as i64)
    }

    fn conflicts(&self, p: Point2, min_sep: f64) -> bool {
        let (cx, cy) = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(pts) = self.cells.get(&(cx + dx, cy + dy)) {
                    if pts.iter().any(|q| dist(p, *q) < min_sep) {
                        return true;
                    }
                }
            }
        }
        false
    }

    fn insert(&mut self, p: Point2) {
        let k = self.key(p);
        self.cells.entry(k).or_default().push(p);
    }
}

pub fn scatter(spec: &LayoutSpec) -> Result<Placement, LayoutError> {
    let LayoutSpec::Scatter { region, count, min_separation, seed, exclusions } = spec else {
        return Err(LayoutError::InvalidSpec("expected a scatter spec".into()));
    };
    region.validate()?;
    for e in exclusions {
        e.validate()?;
    }
    positive("min_separation", *min_separation)?;
    if *count > MAX_POINTS {
        return Err(LayoutError::InvalidSpec(format!("count {count} exceeds {MAX_POINTS}")));
    }
    let mut out = Placement::empty(LayoutKind::Scatter, *seed);
    if *count == 0 {
        return Ok(out);
    }
    let mut rng = seeded(*seed);
    let mut occupied = SeparationGrid::new(*min_separation);
    let budget = SCATTER_ATTEMPTS_PER_POINT * count;
    let mut attempts = 0;
    while out.points.len() < *count && attempts < budget {
        attempts += 1;
        let Some(p) = sample_in_region(&mut rng, region) else { continue };
        if exclusions.iter().any(|e| e.contains(p)) || occupied.conflicts(p, *min_separation) {
            continue;
        }
        let yaw = wrap_degrees(rng.random_range(0.0..360.0));
        occupied.insert(p);
        out.points.push(point(p[0], p[1], yaw));
    }
    out.flags.saturated = out.points.len() < *count;
    Ok(out)
}

pub fn grid(spec: &LayoutSpec) -> Result<Placement, LayoutError> {
    let LayoutSpec::Grid { origin, rows, cols, spacing, jitter, seed } = spec else {
        return Err(LayoutError::InvalidSpec("expected a grid spec".into()));
    };
    if *rows < 1 || *cols < 1 {
        return Err(LayoutError::InvalidSpec("rows and cols must be >= 1".into()));
    }
    if rows.saturating_mul(*cols) > MAX_POINTS {
        return Err(LayoutError::InvalidSpec(format!("grid exceeds {MAX_POINTS} points")));
    }
    positive("spacing", *spacing)?;
    non_negative("jitter", *jitter)?;
    if !(origin[0].is_finite() && origin[1].is_finite()) {
        return Err(LayoutError::InvalidSpec("origin must be finite".into()));
    }
    let mut rng = seeded(*seed);
    let mut out = Placement::empty(LayoutKind::Grid, *seed);
    for row in 0..*rows {
        for col in 0..*cols {
            let mut x = origin[0] + col as f64 * spacing;
            let mut y = origin[1] + row as f64 * spacing;
            if *jitter > 0.0 {
                x += rng.random_range(-jitter..=*jitter);
                y += rng.random_range(-jitter..=*jitter);
            }
            out.points.push(point(x, y, 0.0));
        }
    }
    Ok(out)
}

/// Drops vertices within 1e-9 m of their predecessor.
pub fn simplify_polyline(path: &[Point2]) -> Vec<Point2> {
    let mut out: Vec<Point2> = Vec::with_capacity(path.len());
    for p in path {
        if out.last().is_none_or(|q| dist(*q, *p) >= VERTEX_MERGE_DISTANCE) {
            out.push(*p);
        }
    }
    out
}

pub fn polyline_length(path: &[Point2]) -> f64 {
    path.windows(2).map(|w| dist(w[0], w[1])).sum()
}

pub fn linear(spec: &LayoutSpec) -> Result<Placement, LayoutError> {
    let LayoutSpec::Linear { path, spacing, lateral_offset, align_to_tangent } = spec else {
        return Err(LayoutError::InvalidSpec("expected a linear spec".into()));
    };
    positive("spacing", *spacing)?;
    if !lateral_offset.is_finite() {
        return Err(LayoutError::InvalidSpec("lateral_offset must be finite".into()));
    }
    if path.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
        return Err(LayoutError::InvalidSpec("path must be finite".into()));
    }
    let path = simplify_polyline(path);
    if path.len() < 2 {
        return Err(LayoutError::DegeneratePath);
    }
    let mut cumulative = vec![0.0];
    for w in path.windows(2) {
        cumulative.push(cumulative.last().unwrap() + dist(w[0], w[1]));
    }
    let total = *cumulative.last().unwrap();
    let steps = (total / spacing + 1e-9).floor();
    if steps >= MAX_POINTS as f64 {
        return Err(LayoutError::InvalidSpec(format!("linear layout exceeds {MAX_POINTS} points")));
    }
    let segments = path.len() - 1;
    let mut out = Placement::empty(LayoutKind::Linear, 0);
    for k in 0..=(steps as usize) {
        let s = (k as f64 * spacing).min(total);
        let seg = cumulative[..segments].partition_point(|c| *c <= s).saturating_sub(1);
        let (a, b) = (path[seg], path[seg + 1]);
        let len = cumulative[seg + 1] - cumulative[seg];
        let t = ((s - cumulative[seg]) / len).clamp(0.0, 1.0);
        let tangent = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
        let normal = [-tangent[1], tangent[0]];
        let x = a[0] + (b[0] - a[0]) * t + normal[0] * lateral_offset;
        let y = a[1] + (b[1] - a[1]) * t + normal[1] * lateral_offset;
        let yaw = if *align_to_tangent { tangent[1].atan2(tangent[0]).to_degrees() } else { 0.0 };
        out.points.push(point(x, y, yaw));
    }
    Ok(out)
}

pub fn nested(spec: &LayoutSpec) -> Result<Placement, LayoutError> {
    nested_at_depth(spec, 1)
}

fn nested_at_depth(spec: &LayoutSpec, depth: usize) -> Result<Placement, LayoutError> {
    let LayoutSpec::Nested { parent, children } = spec else {
        return Err(LayoutError::InvalidSpec("expected a nested spec".into()));
    };
    if depth > MAX_NESTING_DEPTH {
        return Err(LayoutError::NestingTooDeep);
    }
    parent.validate()?;
    let mut out = Placement::empty(LayoutKind::Nested, 0);
    for (i, child) in children.iter().enumerate() {
        let escapes = || LayoutError::ChildRegionEscapesParent { child: i };
        match child {
            LayoutSpec::Scatter { region, .. } | LayoutSpec::AreaFill { region, .. } => {
                if !parent.contains_region(region) {
                    return Err(escapes());
                }
            }
            LayoutSpec::Nested { parent: inner, .. } => {
                if !parent.contains_region(inner) {
                    return Err(escapes());
                }
            }
            LayoutSpec::Grid { origin, rows, cols, spacing, jitter, .. } => {
                let lo = [origin[0] - jitter, origin[1] - jitter];
                let hi = [
                    origin[0] + (*cols as f64 - 1.0) * spacing + jitter,
                    origin[1] + (*rows as f64 - 1.0) * spacing + jitter,
                ];
                if !(parent.contains(lo) && parent.contains(hi) && parent.contains_rect(lo, hi)) {
                    return Err(escapes());
                }
            }
            LayoutSpec::Linear { .. } => {}
        }
        let mut placement = match child {
            LayoutSpec::Nested { .. } => nested_at_depth(child, depth + 1)?,
            other => other.generate()?,
        };
        if matches!(child, LayoutSpec::Linear { .. }) && !placement.positions().all(|p| parent.contains(p)) {
            return Err(escapes());
        }
        for p in &mut placement.points {
            p.group.insert(0, i);
        }
        out.flags.saturated |= placement.flags.saturated;
        out.flags.footprint_too_large |= placement.flags.footprint_too_large;
        out.flags.dropped += placement.flags.dropped;
        out.points.extend(placement.points);
    }
    Ok(out)
}

pub fn area_fill(spec: &LayoutSpec) -> Result<Placement, LayoutError> {
    let LayoutSpec::AreaFill { region, footprint, gap, orientation } = spec else {
        return Err(LayoutError::InvalidSpec("expected an area_fill spec".into()));
    };
    region.validate()?;
    positive("footprint width", footprint[0])?;
    positive("footprint depth", footprint[1])?;
    non_negative("gap", *gap)?;
    let quarter = orientation / 90.0;
    if !orientation.is_finite() || (quarter - quarter.round()).abs() > 1e-9 {
        return Err(LayoutError::InvalidSpec("orientation must be a multiple of 90 degrees".into()));
    }
    let turned = (quarter.round() as i64).rem_euclid(2) == 1;
    let [w, h] = if turned { [footprint[1], footprint[0]] } else { *footprint };
    let yaw = wrap_degrees(*orientation);

    let mut out = Placement::empty(LayoutKind::AreaFill, 0);
    let (lo, hi) = region.bounds();
    let (span_x, span_y) = (hi[0] - lo[0], hi[1] - lo[1]);
    if w > span_x + 1e-9 || h > span_y + 1e-9 {
        out.flags.footprint_too_large = true;
        return Ok(out);
    }
    let (px, py) = (w + gap, h + gap);
    let nx = ((span_x - w) / px + 1e-9).floor() as usize + 1;
    let ny = ((span_y - h) / py + 1e-9).floor() as usize + 1;
    if nx.saturating_mul(ny) > MAX_POINTS {
        return Err(LayoutError::InvalidSpec(format!("area fill exceeds {MAX_POINTS} cells")));
    }
    for j in 0..ny {
        for i in 0..nx {
            let min = [lo[0] + i as f64 * px, lo[1] + j as f64 * py];
            let max = [min[0] + w, min[1] + h];
            if region.contains_rect(min, max) {
                out.points.push(point((min[0] + max[0]) * 0.5, (min[1] + max[1]) * 0.5, yaw));
            }
        }
    }
    out.flags.footprint_too_large = out.points.is_empty();
    Ok(out)
}
