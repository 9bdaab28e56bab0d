//! Fixed prompt text for the three agents. Changing anything here changes
//! request hashes, so recorded cassettes must be re-authored afterwards.

use super::template::PromptTemplate;
use crate::layout::{relation_descriptor, RelationKind};
use crate::registry::{PluginDescriptor, Registry};

const ROLE: &str = "You are a planning agent in a procedural 3D scene generation system. \
You answer with a single JSON object and nothing else.";

pub fn decomposition(registry: &Registry) -> PromptTemplate {
    PromptTemplate {
        role: ROLE.into(),
        task: "Break the user's scene description into a rough list of objects. Each object is one kind of \
thing in the scene (terrain, a lake, pine trees, houses). Give each object a short name, a one-sentence \
description, how many instances it needs, and a map from capability module to what that module should \
produce. Use an object named \"terrain\" for the ground when the scene has one. Set \"update\" to true only \
when the instruction changes objects that already exist instead of adding new ones. If the description is \
too vague to plan, return no objects and list your questions."
            .into(),
        document: render_docs(registry.descriptors.values()),
        format: r#"{"objects": [{"name": string, "description": string, "count": integer >= 0, "modules": {capability: string}, "update": boolean}], "questions": [string]}"#
            .into(),
        examples: vec![
            r#"Input: a snowy village with a stone bridge
Output: {"objects": [{"name": "terrain", "description": "gentle snow-covered hills", "count": 1, "modules": {"terrain": "low rolling hills", "snow": "thick snow cover"}, "update": false}, {"name": "house", "description": "small wooden cottages", "count": 8, "modules": {"buildings": "cottages with steep roofs"}, "update": false}, {"name": "bridge", "description": "an arched stone bridge", "count": 1, "modules": {}, "update": false}], "questions": []}"#
                .into(),
        ],
    }
}

pub fn relations() -> PromptTemplate {
    let docs: Vec<PluginDescriptor> = RelationKind::ALL.iter().map(|k| relation_descriptor(*k)).collect();
    PromptTemplate {
        role: ROLE.into(),
        task: "Define the spatial relationships among the listed objects. Each relation places a subject \
object relative to an anchor, which is another object, a named region or path, or \"terrain\". Use the \
relation kinds documented below and only their parameters. Every object needs at most one relation; \
objects without a relation are scattered over the ground."
            .into(),
        document: render_docs(docs.iter()),
        format: r#"{"relations": [{"subject": string, "anchor": string, "kind": "near" | "on" | "inside" | "along" | "avoid" | "surround", "params": {name: value}}]}"#
            .into(),
        examples: vec![
            r#"Input: objects house (8), bridge (1), terrain
Output: {"relations": [{"subject": "house", "anchor": "bridge", "kind": "near", "params": {"count": 8, "min_distance": 10, "max_distance": 40, "min_separation": 8}}, {"subject": "bridge", "anchor": "terrain", "kind": "on", "params": {"count": 1}}]}"#
                .into(),
        ],
    }
}

pub fn hyperparams(descriptor: &PluginDescriptor) -> PromptTemplate {
    PromptTemplate {
        role: ROLE.into(),
        task: "Convert the object description into parameters for the procedural generator documented \
below. Only use documented parameter names, keep every value inside its range, and pick enum values from \
the listed options. Omit parameters the description says nothing about."
            .into(),
        document: descriptor.to_json(),
        format: r#"{"params": {name: value}}"#.into(),
        examples: vec![r#"Input: object "house": small wooden cottages with steep roofs
Output: {"params": {"floors": 1, "roof_pitch": 45, "material": "wood"}}"#
            .into()],
    }
}

fn render_docs<'a>(descs: impl Iterator<Item = &'a PluginDescriptor>) -> String {
    descs.map(PluginDescriptor::to_json).collect::<Vec<_>>().join("\n")
}
