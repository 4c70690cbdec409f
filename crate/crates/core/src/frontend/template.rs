use std::path::Path;

/// Shipped decomposition prompt.
pub const DECOMPOSE_TEMPLATE: &str = include_str!("../../templates/decompose.txt");
/// Shipped fitness-grading prompt.
pub const FITNESS_TEMPLATE: &str = include_str!("../../templates/fitness.txt");

const PLACEHOLDERS: [&str; 3] = ["instruction", "robot_profiles", "task_list"];

#[derive(Debug, Clone, PartialEq)]
pub struct Templates {
    pub decompose: String,
    pub fitness: String,
}

impl Default for Templates {
    fn default() -> Self {
        Self { decompose: DECOMPOSE_TEMPLATE.to_string(), fitness: FITNESS_TEMPLATE.to_string() }
    }
}

impl Templates {
    /// Loads `decompose.txt` and `fitness.txt` from `dir`.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        Ok(Self {
            decompose: std::fs::read_to_string(dir.join("decompose.txt"))?,
            fitness: std::fs::read_to_string(dir.join("fitness.txt"))?,
        })
    }
}

/// Substitutes `{instruction}`, `{robot_profiles}` and `{task_list}`.
/// Other braces are left alone, so JSON examples survive.
pub fn render(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for name in PLACEHOLDERS {
        if let Some((_, v)) = values.iter().find(|(k, _)| *k == name) {
            out = out.replace(&format!("{{{name}}}"), v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitutes_known_names_only() {
        let t = "do {instruction} with {robot_profiles}; keep {\"a\": 1} and {other}";
        let out = render(t, &[("instruction", "X"), ("robot_profiles", "[]"), ("other", "no")]);
        assert_eq!(out, "do X with []; keep {\"a\": 1} and {other}");
    }

    #[test]
    fn shipped_templates_use_placeholders() {
        assert!(DECOMPOSE_TEMPLATE.contains("{instruction}") && DECOMPOSE_TEMPLATE.contains("{robot_profiles}"));
        assert!(FITNESS_TEMPLATE.contains("{task_list}") && FITNESS_TEMPLATE.contains("{robot_profiles}"));
    }
}
