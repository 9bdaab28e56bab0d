use serde::{Deserialize, Serialize};

use crate::geometry::{dist, Region};
use crate::plan::ActionPlan;
use crate::scene::{AssetInstance, SceneGraph};

/// Programmatic correctness checks. Each returns a short failure message.
/// `object` filters instances by planner object name; `None` means all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum Check {
    /// Every listed action kind appears at least once.
    ActionKinds { kinds: Vec<String> },
    InstanceCount {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        object: Option<String>,
        min: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<usize>,
    },
    AllInside {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        object: Option<String>,
        region: Region,
    },
    HasTerrain,
    MinSeparation {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        object: Option<String>,
        distance: f64,
    },
}

fn select<'a>(scene: &'a SceneGraph, object: &Option<String>) -> Vec<&'a AssetInstance> {
    scene.instances.iter().filter(|i| object.as_deref().is_none_or(|o| i.object_name() == Some(o))).collect()
}

fn label(object: &Option<String>) -> &str {
    object.as_deref().unwrap_or("all")
}

impl Check {
    pub fn evaluate(&self, scene: &SceneGraph, plan: &ActionPlan) -> Result<(), String> {
        match self {
            Check::ActionKinds { kinds } => {
                let missing: Vec<&str> = kinds
                    .iter()
                    .filter(|k| !plan.actions.iter().any(|a| a.kind() == k.as_str()))
                    .map(String::as_str)
                    .collect();
                if missing.is_empty() {
                    Ok(())
                } else {
                    Err(format!("missing action kinds: {}", missing.join(", ")))
                }
            }
            Check::InstanceCount { object, min, max } => {
                let n = select(scene, object).len();
                if n < *min || max.is_some_and(|m| n > m) {
                    let hi = max.map_or("inf".to_string(), |m| m.to_string());
                    Err(format!("{} instances of {}, expected {min}..={hi}", n, label(object)))
                } else {
                    Ok(())
                }
            }
            Check::AllInside { object, region } => {
                let outside = select(scene, object)
                    .into_iter()
                    .filter(|i| !region.contains([i.transform.position.x, i.transform.position.y]))
                    .count();
                if outside == 0 {
                    Ok(())
                } else {
                    Err(format!("{outside} instances of {} outside the region", label(object)))
                }
            }
            Check::HasTerrain => scene.terrain.as_ref().map(|_| ()).ok_or_else(|| "scene has no terrain".to_string()),
            Check::MinSeparation { object, distance } => {
                let pts: Vec<[f64; 2]> =
                    select(scene, object).iter().map(|i| [i.transform.position.x, i.transform.position.y]).collect();
                for a in 0..pts.len() {
                    for b in a + 1..pts.len() {
                        let d = dist(pts[a], pts[b]);
                        if d < *distance {
                            return Err(format!("{} instances {d:.3} m apart, expected >= {distance}", label(object)));
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Transform, Vec3};

    fn scene(points: &[(f64, f64)]) -> SceneGraph {
        let mut s = SceneGraph::new(0);
        for (k, (x, y)) in points.iter().enumerate() {
            let inst = AssetInstance::new(format!("t/{k}"), "asset:tree", Transform::at(Vec3::new(*x, *y, 0.0)))
                .with_tag("object:tree");
            s.add_instance(inst).unwrap();
        }
        s
    }

    #[test]
    fn count_and_containment() {
        let pts: Vec<(f64, f64)> = (0..12).map(|i| (i as f64, 1.0)).collect();
        let s = scene(&pts);
        let plan = ActionPlan::new(0);
        let c = Check::InstanceCount { object: Some("tree".into()), min: 10, max: None };
        assert!(c.evaluate(&s, &plan).is_ok());
        let inside = Check::AllInside { object: None, region: Region::rect([0.0, 0.0], [10.0, 10.0]) };
        assert!(inside.evaluate(&s, &plan).unwrap_err().contains("1 instances"));
        assert!(Check::HasTerrain.evaluate(&s, &plan).is_err());
        let sep = Check::MinSeparation { object: None, distance: 1.5 };
        assert!(sep.evaluate(&s, &plan).is_err());
    }
}
