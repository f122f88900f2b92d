//! Prompt templates for both pipeline stages.
//!
//! Template text lives in `templates/` and is compiled in. Each template set
//! has a version and a digest over its text; responses record the digests so
//! any output can be traced to the exact prompts that produced it.

use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::provider::ChatMessage;

pub const QUERY_OPEN: &str = "<student_query>";
pub const QUERY_CLOSE: &str = "</student_query>";
pub const CONTEXT_OPEN: &str = "<course_context>";
pub const CONTEXT_CLOSE: &str = "</course_context>";

const MARKERS: [&str; 4] = [QUERY_OPEN, QUERY_CLOSE, CONTEXT_OPEN, CONTEXT_CLOSE];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: &'static str,
    pub version: u32,
    pub system: &'static str,
    pub user: &'static str,
}

impl PromptTemplate {
    pub fn digest(&self) -> String {
        sha256_hex(format!(
            "{}\0{}\0{}\0{}",
            self.name, self.version, self.system, self.user
        ))
    }

    /// System and user messages with `{name}` placeholders substituted.
    pub fn render(&self, values: &[(&str, &str)]) -> Vec<ChatMessage> {
        vec![
            ChatMessage::system(substitute(self.system, values)),
            ChatMessage::user(substitute(self.user, values)),
        ]
    }
}

pub const IDEAL_DESCRIPTION: PromptTemplate = PromptTemplate {
    name: "ideal_description",
    version: 1,
    system: include_str!("../../templates/ideal_description.system.txt"),
    user: include_str!("../../templates/ideal_description.user.txt"),
};

pub const RECOMMENDATION: PromptTemplate = PromptTemplate {
    name: "recommendation",
    version: 1,
    system: include_str!("../../templates/recommendation.system.txt"),
    user: include_str!("../../templates/recommendation.user.txt"),
};

pub const FORMAT_REMINDER: &str = include_str!("../../templates/format_reminder.txt");

/// Digests of the templates used for one response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateDigests {
    pub ideal_description: String,
    pub recommendation: String,
}

impl TemplateDigests {
    pub fn current() -> Self {
        Self {
            ideal_description: IDEAL_DESCRIPTION.digest(),
            recommendation: RECOMMENDATION.digest(),
        }
    }
}

/// Removes the section markers from user-supplied text so it cannot open or
/// close a prompt section.
pub fn sanitize(text: &str) -> String {
    MARKERS
        .iter()
        .fold(text.to_string(), |acc, marker| acc.replace(marker, ""))
}

// Single pass, so substituted values are never rescanned for placeholders.
fn substitute(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let replaced = after.find('}').and_then(|close| {
            let name = &after[..close];
            values.iter().find(|(k, _)| *k == name).map(|(_, v)| (*v, close))
        });
        match replaced {
            Some((value, close)) => {
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
    out
}
