//! Prompt templates for the live oracle client. The defaults ship as data
//! files compiled into the library; a directory of same-named `.txt` files
//! can override them at runtime.

use std::path::Path;

use super::OracleError;

/// Compact reference to the script language, embedded in synthesis prompts.
pub const GRAMMAR_SUMMARY: &str = r#"Statements end with ';' unless they are blocks:
  let NAME = expr;
  emit add|replace "/pointer" expr;   emit remove "/pointer";
  return (bool_expr, "feedback");     (preconditions only)
  if expr { ... } else { ... }
Expressions: numbers, "text", true, false, null, arithmetic + - * /,
comparisons == != < <= > >=, boolean and/or/not, if c then a else b,
min(a,b), max(a,b), abs(x), floor(x), clamp(x,lo,hi),
get "/state/path" (optional: default <value>), aget "/action/field",
sum x in "/seq/path" of expr, count x in "/seq/path" where expr,
filter x in "/seq/path" where expr, field x "/sub/path".
Paths are JSON-pointer style. '#' starts a comment."#;

#[derive(Debug, Clone)]
pub struct PromptTemplates {
    pub system: String,
    pub topo: String,
    pub parents: String,
    pub plausibility: String,
    pub init: String,
    pub refine: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            system: include_str!("../../prompts/system.txt").to_string(),
            topo: include_str!("../../prompts/topo.txt").to_string(),
            parents: include_str!("../../prompts/parents.txt").to_string(),
            plausibility: include_str!("../../prompts/plausibility.txt").to_string(),
            init: include_str!("../../prompts/init.txt").to_string(),
            refine: include_str!("../../prompts/refine.txt").to_string(),
        }
    }
}

impl PromptTemplates {
    /// Loads templates from a directory, falling back to the built-in text
    /// for any file that is absent.
    pub fn from_dir(dir: &Path) -> Result<Self, OracleError> {
        let mut templates = Self::default();
        for (name, slot) in [
            ("system.txt", &mut templates.system),
            ("topo.txt", &mut templates.topo),
            ("parents.txt", &mut templates.parents),
            ("plausibility.txt", &mut templates.plausibility),
            ("init.txt", &mut templates.init),
            ("refine.txt", &mut templates.refine),
        ] {
            let path = dir.join(name);
            if path.exists() {
                *slot = std::fs::read_to_string(&path).map_err(|e| {
                    OracleError::Unavailable(format!("{}: {e}", path.display()))
                })?;
            }
        }
        Ok(templates)
    }
}

/// Replaces `{name}` placeholders. Unknown placeholders are left intact so a
/// template typo is visible in the outgoing prompt rather than silently
/// dropped.
pub fn fill(template: &str, substitutions: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in substitutions {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_replaces_all_occurrences() {
        let filled = fill("{a} and {b} and {a}", &[("a", "x"), ("b", "y")]);
        assert_eq!(filled, "x and y and x");
    }

    #[test]
    fn unknown_placeholders_stay_visible() {
        assert_eq!(fill("{kept}", &[("other", "x")]), "{kept}");
    }

    #[test]
    fn default_templates_have_their_placeholders() {
        let t = PromptTemplates::default();
        for (template, placeholder) in [
            (&t.topo, "{remaining}"),
            (&t.parents, "{node}"),
            (&t.plausibility, "{target}"),
            (&t.init, "{schema_json}"),
            (&t.refine, "{error_kind}"),
        ] {
            assert!(template.contains(placeholder), "missing {placeholder}");
        }
    }

    #[test]
    fn directory_overrides_win() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("topo.txt"), "custom {remaining}").unwrap();
        let t = PromptTemplates::from_dir(dir.path()).unwrap();
        assert_eq!(t.topo, "custom {remaining}");
        assert_eq!(t.system, PromptTemplates::default().system);
    }
}
