//! Spatial relations between planner objects and their translation into
//! layout specs.
//!
//! | relation   | generator                                            |
//! |------------|------------------------------------------------------|
//! | `near`     | scatter in an annulus around the anchor              |
//! | `on`       | scatter over the anchor area, projected to terrain   |
//! | `inside`   | scatter, grid or area fill within the anchor region  |
//! | `along`    | linear along the anchor path                         |
//! | `avoid`    | scatter over the domain with the anchor excluded     |
//! | `surround` | linear through `count` points on a circle            |

use serde::{Deserialize, Serialize};

use super::{simplify_polyline, LayoutError, LayoutSpec};
use crate::geometry::{Point2, Region};
use crate::registry::{Capability, ParamKind, ParamSpec, ParamValue, ParamValues, PluginDescriptor};
use crate::scene::SceneGraph;

/// Anchor names that refer to the whole ground domain.
pub const TERRAIN_ANCHORS: [&str; 3] = ["terrain", "ground", "scene"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    Near,
    On,
    Inside,
    Along,
    Avoid,
    Surround,
}

impl RelationKind {
    pub const ALL: [RelationKind; 6] = [
        RelationKind::Near,
        RelationKind::On,
        RelationKind::Inside,
        RelationKind::Along,
        RelationKind::Avoid,
        RelationKind::Surround,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RelationKind::Near => "near",
            RelationKind::On => "on",
            RelationKind::Inside => "inside",
            RelationKind::Along => "along",
            RelationKind::Avoid => "avoid",
            RelationKind::Surround => "surround",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialRelation {
    /// Object being placed.
    pub subject: String,
    /// Object name, scene region, scene path, or a terrain alias.
    pub anchor: String,
    pub kind: RelationKind,
    #[serde(default)]
    pub params: ParamValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedLayout {
    pub spec: LayoutSpec,
    pub project_to_terrain: bool,
}

/// Resolved anchor geometry.
#[derive(Debug, Clone, PartialEq)]
pub enum Anchor {
    Area(Region),
    Path(Vec<Point2>),
    Points(Vec<Point2>),
}

impl Anchor {
    fn center(&self) -> Point2 {
        match self {
            Anchor::Area(r) => r.center(),
            Anchor::Path(pts) | Anchor::Points(pts) => {
                let n = pts.len() as f64;
                let s = pts.iter().fold([0.0, 0.0], |a, p| [a[0] + p[0], a[1] + p[1]]);
                [s[0] / n, s[1] / n]
            }
        }
    }
}

fn float(name: &str, description: &str, range: [f64; 2], default: f64) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        description: description.into(),
        kind: ParamKind::Float,
        range: Some(range),
        options: vec![],
        default: Some(ParamValue::Float(default)),
        unit: Some("m".into()),
    }
}

fn int(name: &str, description: &str, range: [f64; 2], default: i64) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        description: description.into(),
        kind: ParamKind::Int,
        range: Some(range),
        options: vec![],
        default: Some(ParamValue::Int(default)),
        unit: None,
    }
}

/// Documented parameters for each relation kind, in the same format as
/// plugin descriptors so that proposals go through the same validation.
pub fn relation_descriptor(kind: RelationKind) -> PluginDescriptor {
    let count = || int("count", "number of instances to place", [0.0, 100_000.0], 1);
    let sep = || float("min_separation", "minimum distance between placed instances", [0.05, 1000.0], 2.0);
    let params = match kind {
        RelationKind::Near => vec![
            count(),
            float("min_distance", "minimum distance from the anchor center", [0.0, 5000.0], 2.0),
            float("max_distance", "maximum distance from the anchor center", [0.1, 5000.0], 10.0),
            sep(),
        ],
        RelationKind::On | RelationKind::Avoid => {
            let mut p = vec![count(), sep()];
            if kind == RelationKind::Avoid {
                p.push(float("clearance", "radius kept free around anchor instances", [0.0, 5000.0], 5.0));
            }
            p
        }
        RelationKind::Inside => vec![
            count(),
            sep(),
            ParamSpec {
                name: "layout".into(),
                description: "generator used inside the region".into(),
                kind: ParamKind::Enum,
                range: None,
                options: vec!["scatter".into(), "grid".into(), "area_fill".into()],
                default: Some(ParamValue::Str("scatter".into())),
                unit: None,
            },
            float("spacing", "grid spacing", [0.1, 1000.0], 5.0),
            float("footprint_x", "area fill footprint width", [0.1, 1000.0], 10.0),
            float("footprint_y", "area fill footprint depth", [0.1, 1000.0], 10.0),
            float("gap", "area fill gap between footprints", [0.0, 1000.0], 2.0),
        ],
        RelationKind::Along => vec![
            float("spacing", "arc-length spacing between instances", [0.1, 1000.0], 5.0),
            float("lateral_offset", "offset to the left of the path (negative: right)", [-1000.0, 1000.0], 0.0),
            ParamSpec {
                name: "align_to_tangent".into(),
                description: "rotate instances to follow the path".into(),
                kind: ParamKind::Bool,
                range: None,
                options: vec![],
                default: Some(ParamValue::Bool(true)),
                unit: None,
            },
        ],
        RelationKind::Surround => vec![
            int("count", "number of instances around the anchor", [2.0, 10_000.0], 8),
            float("radius", "circle radius around the anchor center", [0.1, 5000.0], 10.0),
        ],
    };
    PluginDescriptor {
        name: format!("relation.{}", kind.name()),
        capability: Capability::AssetsPlacement,
        description: format!("Places the subject {} the anchor", kind.name()),
        params,
        constraints: vec![],
    }
}

fn resolve_anchor(name: &str, scene: &SceneGraph, domain: &Region) -> Result<Anchor, LayoutError> {
    if TERRAIN_ANCHORS.contains(&name) {
        return Ok(Anchor::Area(domain.clone()));
    }
    if let Some(r) = scene.regions.get(name) {
        return Ok(Anchor::Area(r.clone()));
    }
    if let Some(p) = scene.paths.get(name) {
        return Ok(Anchor::Path(p.clone()));
    }
    let pts: Vec<Point2> = scene.instances_of(name).map(|i| [i.transform.position.x, i.transform.position.y]).collect();
    if pts.is_empty() {
        Err(LayoutError::UnknownAnchor(name.to_string()))
    } else {
        Ok(Anchor::Points(pts))
    }
}

/// Translates a relation into a layout spec against the current scene.
/// `domain` is the ground extent used for terrain anchors and `avoid`.
/// Parameter values are validated and completed with defaults first.
pub fn resolve_relation(
    rel: &SpatialRelation,
    scene: &SceneGraph,
    domain: &Region,
    seed: u64,
) -> Result<ResolvedLayout, LayoutError> {
    let desc = relation_descriptor(rel.kind);
    let checked = desc.validate_params(&rel.params).map_err(|v| {
        LayoutError::InvalidSpec(v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
    })?;
    let p = desc.fill_defaults(&checked.values);
    let f = |k: &str| p.f64(k).expect("relation params are complete");
    let count = p.f64("count").unwrap_or(0.0).max(0.0) as usize;
    let anchor = resolve_anchor(&rel.anchor, scene, domain)?;
    let on_terrain = scene.terrain.is_some();

    let spec = match rel.kind {
        RelationKind::Near => {
            let (lo, hi) = (f("min_distance"), f("max_distance"));
            LayoutSpec::Scatter {
                region: Region::Disc { center: anchor.center(), radius: hi, inner_radius: lo },
                count,
                min_separation: f("min_separation"),
                seed,
                exclusions: vec![],
            }
        }
        RelationKind::On => {
            let Anchor::Area(region) = anchor else {
                return Err(LayoutError::UnsupportedRelation(format!(
                    "`on` needs an area anchor, `{}` is not one",
                    rel.anchor
                )));
            };
            if !on_terrain {
                return Err(LayoutError::UnsupportedRelation("`on` requires terrain".into()));
            }
            LayoutSpec::Scatter { region, count, min_separation: f("min_separation"), seed, exclusions: vec![] }
        }
        RelationKind::Inside => {
            let Anchor::Area(region) = anchor else {
                return Err(LayoutError::UnsupportedRelation(format!(
                    "`inside` needs a region anchor, `{}` is not one",
                    rel.anchor
                )));
            };
            match p.get("layout").and_then(ParamValue::as_str) {
                Some("grid") => {
                    let spacing = f("spacing");
                    let cols = (count.max(1) as f64).sqrt().ceil() as usize;
                    let rows = count.max(1).div_ceil(cols);
                    let c = region.center();
                    let origin = [
                        c[0] - (cols as f64 - 1.0) * spacing * 0.5,
                        c[1] - (rows as f64 - 1.0) * spacing * 0.5,
                    ];
                    // Full rows, then a partial last row so exactly `count` cells exist.
                    let full = count.max(1) / cols;
                    let rem = count.max(1) % cols;
                    let mut children = vec![];
                    if full > 0 {
                        children.push(LayoutSpec::Grid { origin, rows: full, cols, spacing, jitter: 0.0, seed });
                    }
                    if rem > 0 {
                        let o = [origin[0], origin[1] + full as f64 * spacing];
                        children.push(LayoutSpec::Grid { origin: o, rows: 1, cols: rem, spacing, jitter: 0.0, seed });
                    }
                    LayoutSpec::Nested { parent: region, children }
                }
                Some("area_fill") => LayoutSpec::AreaFill {
                    region,
                    footprint: [f("footprint_x"), f("footprint_y")],
                    gap: f("gap"),
                    orientation: 0.0,
                },
                _ => LayoutSpec::Scatter { region, count, min_separation: f("min_separation"), seed, exclusions: vec![] },
            }
        }
        RelationKind::Along => {
            let path = match anchor {
                Anchor::Path(p) => p,
                Anchor::Points(p) if simplify_polyline(&p).len() >= 2 => p,
                _ => {
                    return Err(LayoutError::UnsupportedRelation(format!(
                        "`along` needs a path anchor, `{}` is not one",
                        rel.anchor
                    )))
                }
            };
            LayoutSpec::Linear {
                path,
                spacing: f("spacing"),
                lateral_offset: f("lateral_offset"),
                align_to_tangent: p.get("align_to_tangent").and_then(ParamValue::as_bool).unwrap_or(true),
            }
        }
        RelationKind::Avoid => {
            let exclusions = match anchor {
                Anchor::Area(r) => vec![r],
                Anchor::Path(pts) | Anchor::Points(pts) => {
                    let clearance = f("clearance");
                    if clearance <= 0.0 {
                        vec![]
                    } else {
                        pts.iter().map(|c| Region::disc(*c, clearance)).collect()
                    }
                }
            };
            LayoutSpec::Scatter { region: domain.clone(), count, min_separation: f("min_separation"), seed, exclusions }
        }
        RelationKind::Surround => {
            let c = anchor.center();
            let r = f("radius");
            let path: Vec<Point2> = (0..count)
                .map(|k| {
                    let a = std::f64::consts::TAU * k as f64 / count as f64;
                    [c[0] + r * a.cos(), c[1] + r * a.sin()]
                })
                .collect();
            let spacing = crate::geometry::dist(path[0], path[1]);
            LayoutSpec::Linear { path, spacing, lateral_offset: 0.0, align_to_tangent: true }
        }
    };
    let project_to_terrain = on_terrain || rel.kind == RelationKind::On;
    Ok(ResolvedLayout { spec, project_to_terrain })
}
