//! Deterministic mock backend.
//!
//! The mock answers a completion request purely from the `<<FACTS>>` block
//! embedded in its prompt: it parses the fact lines back out and emits the
//! structured summary schema filled with those values and nothing else.
//! This makes every end-to-end test network-free and byte-reproducible,
//! and it doubles as the reference for what a grounded reply looks like.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde_json::{json, Value};

use super::summarize::WgFacts;
use super::{CompletionRequest, LlmBackend, SendFailure};

/// Opens a facts block inside a prompt.
pub const FACTS_OPEN: &str = "<<FACTS>>";
/// Closes a facts block.
pub const FACTS_CLOSE: &str = "<<END>>";

/// Serializes session facts into the line format the mock parses.
/// Values have line breaks flattened so one line stays one fact.
pub fn render_facts_block(facts: &WgFacts) -> String {
    let clean = |s: &str| s.replace(['\n', '\r'], " ");
    let mut lines = Vec::new();
    lines.push(FACTS_OPEN.to_string());
    lines.push(alloc::format!("wg: {}", clean(&facts.wg_acronym)));
    lines.push(alloc::format!("attendee_count: {}", facts.attendee_count));
    for (label, count) in &facts.top_affiliations {
        lines.push(alloc::format!("affiliation: {} ({count})", clean(label)));
    }
    for draft in &facts.draft_names {
        lines.push(alloc::format!("draft: {}", clean(draft)));
    }
    for topic in &facts.agenda_topics {
        lines.push(alloc::format!("topic: {}", clean(topic)));
    }
    lines.push(FACTS_CLOSE.to_string());
    lines.join("\n")
}

/// Facts recovered from a prompt.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedFacts {
    pub wg_acronym: String,
    pub attendee_count: u32,
    pub affiliations: Vec<(String, u32)>,
    pub drafts: Vec<String>,
    pub topics: Vec<String>,
}

/// Extracts and parses the first facts block found in `text`.
pub fn parse_facts_block(text: &str) -> Option<ParsedFacts> {
    let open = text.find(FACTS_OPEN)?;
    let body_start = open + FACTS_OPEN.len();
    let close = text[body_start..].find(FACTS_CLOSE)? + body_start;
    let mut facts = ParsedFacts::default();
    for line in text[body_start..close].lines() {
        let line = line.trim();
        if let Some(value) = line.strip_prefix("wg:") {
            facts.wg_acronym = value.trim().to_string();
        } else if let Some(value) = line.strip_prefix("attendee_count:") {
            facts.attendee_count = value.trim().parse().unwrap_or(0);
        } else if let Some(value) = line.strip_prefix("affiliation:") {
            let value = value.trim();
            // label ends with " (count)"; parse from the right so labels may
            // contain parentheses of their own.
            if let Some(open_paren) = value.rfind(" (") {
                if let Some(count) = value[open_paren + 2..]
                    .strip_suffix(')')
                    .and_then(|c| c.parse().ok())
                {
                    facts
                        .affiliations
                        .push((value[..open_paren].to_string(), count));
                    continue;
                }
            }
            facts.affiliations.push((value.to_string(), 0));
        } else if let Some(value) = line.strip_prefix("draft:") {
            facts.drafts.push(value.trim().to_string());
        } else if let Some(value) = line.strip_prefix("topic:") {
            facts.topics.push(value.trim().to_string());
        }
    }
    Some(facts)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("prompt carries no {FACTS_OPEN} block")]
pub struct MissingFactsError;

/// Deterministic completion: reads the facts block out of the prompt and
/// emits the structured summary schema filled with exactly those values.
///
/// Topic `i` is linked to draft `i` of the facts when one exists, mirroring
/// the one-draft-per-topic shape of real session reports.
pub fn mock_complete(request: &CompletionRequest) -> Result<String, MissingFactsError> {
    let combined = alloc::format!("{}\n{}", request.system_prompt, request.user_prompt);
    let facts = parse_facts_block(&combined).ok_or(MissingFactsError)?;

    let affiliations = if facts.affiliations.is_empty() {
        "none".to_string()
    } else {
        facts
            .affiliations
            .iter()
            .map(|(label, _)| label.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    };
    let overview = alloc::format!(
        "The {} session counted {} unique attendees. Most represented affiliations: {}.",
        facts.wg_acronym,
        facts.attendee_count,
        affiliations
    );

    let topics: Vec<Value> = facts
        .topics
        .iter()
        .enumerate()
        .map(|(i, title)| {
            let draft = facts.drafts.get(i);
            let body = match draft {
                Some(draft) => alloc::format!("{title} was discussed. Reference: {draft}."),
                None => alloc::format!("{title} was discussed."),
            };
            json!({
                "title": title,
                "body": body,
                "presenters": [],
                "draft_links": draft.map(|d| alloc::vec![d.clone()]).unwrap_or_default(),
            })
        })
        .collect();

    let reply = json!({ "overview": overview, "topics": topics });
    Ok(serde_json::to_string(&reply).expect("serializing a value cannot fail"))
}

/// [`LlmBackend`] wrapper around [`mock_complete`].
#[derive(Debug, Clone)]
pub struct MockBackend {
    pub context_tokens: u32,
}

impl Default for MockBackend {
    fn default() -> Self {
        MockBackend {
            context_tokens: 1 << 20,
        }
    }
}

impl LlmBackend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn context_tokens(&self) -> u32 {
        self.context_tokens
    }

    fn send(&self, request: &CompletionRequest) -> Result<String, SendFailure> {
        mock_complete(request).map_err(|e| SendFailure::Terminal {
            status: None,
            message: e.to_string(),
        })
    }
}
