//! Prompt templates. The text lives in `templates/*.vN.txt` and is compiled
//! into the crate; bumping a template means adding a new version file.

/// A named prompt template with `{placeholder}` slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Template {
    pub name: &'static str,
    pub text: &'static str,
}

pub const ANSWERS: Template = Template { name: "answers.v1", text: include_str!("../templates/answers.v1.txt") };
pub const CONDITIONS: Template =
    Template { name: "conditions.v1", text: include_str!("../templates/conditions.v1.txt") };
pub const WEAK_CLUES: Template =
    Template { name: "weak_clues.v1", text: include_str!("../templates/weak_clues.v1.txt") };
pub const ABLATION: Template = Template { name: "ablation.v1", text: include_str!("../templates/ablation.v1.txt") };
pub const SELECT_ANSWER: Template =
    Template { name: "select_answer.v1", text: include_str!("../templates/select_answer.v1.txt") };

impl Template {
    /// Substitutes every `{key}`. Slots are filled in a single left-to-right
    /// pass, so values containing braces are never re-expanded.
    pub fn render(&self, values: &[(&str, &str)]) -> String {
        let mut out = String::with_capacity(self.text.len() + 256);
        let mut rest = self.text;
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            let filled = after.find('}').and_then(|close| {
                let key = &after[..close];
                values.iter().find(|(k, _)| *k == key).map(|(_, v)| (close, *v))
            });
            match filled {
                Some((close, value)) => {
                    out.push_str(value);
                    rest = &after[close + 1..];
                }
                None => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        // templates end with a newline; prompts end at the cue word
        let trimmed = out.trim_end().len();
        out.truncate(trimmed);
        out
    }

    pub fn placeholders(&self) -> Vec<&'static str> {
        let mut names = Vec::new();
        let mut rest = self.text;
        while let Some(open) = rest.find('{') {
            let after = &rest[open + 1..];
            match after.find('}') {
                Some(close) => {
                    names.push(&after[..close]);
                    rest = &after[close + 1..];
                }
                None => break,
            }
        }
        names
    }
}
