use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("every prompt component is disabled")]
    EmptyTemplate,
}

/// Role, task, document, format and examples components of an agent
/// prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub role: String,
    pub task: String,
    pub document: String,
    pub format: String,
    pub examples: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptToggles {
    pub role: bool,
    pub task: bool,
    pub document: bool,
    pub format: bool,
    pub examples: bool,
}

impl Default for PromptToggles {
    fn default() -> Self {
        PromptToggles { role: true, task: true, document: true, format: true, examples: true }
    }
}

impl PromptToggles {
    /// Parses a component list such as `"R,T,F"` or `"role,task,format"`.
    pub fn from_components(spec: &str) -> Result<Self, String> {
        let mut t = PromptToggles { role: false, task: false, document: false, format: false, examples: false };
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "r" | "role" => t.role = true,
                "t" | "task" => t.task = true,
                "d" | "document" => t.document = true,
                "f" | "format" => t.format = true,
                "e" | "examples" => t.examples = true,
                other => return Err(format!("unknown prompt component `{other}`")),
            }
        }
        Ok(t)
    }

    pub fn label(&self) -> String {
        let parts: Vec<&str> = [
            (self.role, "R"),
            (self.task, "T"),
            (self.document, "D"),
            (self.format, "F"),
            (self.examples, "E"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, l)| *l)
        .collect();
        parts.join(",")
    }
}

/// Renders enabled components as `### <Name>` sections in R, T, D, F, E
/// order. Disabled components are omitted entirely.
pub fn build_prompt(template: &PromptTemplate, toggles: &PromptToggles) -> Result<String, TemplateError> {
    let examples = template
        .examples
        .iter()
        .enumerate()
        .map(|(i, e)| format!("Example {}:\n{}", i + 1, e.trim_end()))
        .collect::<Vec<_>>()
        .join("\n\n");
    let sections = [
        (toggles.role, "Role", template.role.trim_end()),
        (toggles.task, "Task", template.task.trim_end()),
        (toggles.document, "Document", template.document.trim_end()),
        (toggles.format, "Format", template.format.trim_end()),
        (toggles.examples, "Examples", examples.as_str()),
    ];
    let parts: Vec<String> =
        sections.iter().filter(|(on, _, _)| *on).map(|(_, name, body)| format!("### {name}\n{body}")).collect();
    if parts.is_empty() {
        return Err(TemplateError::EmptyTemplate);
    }
    Ok(parts.join("\n\n") + "\n")
}
