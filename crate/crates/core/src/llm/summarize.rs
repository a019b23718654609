//! Recursive per-WG summarization.
//!
//! Minutes chunks are summarized one after another (map), each prompt
//! carrying the running summary so context survives across chunk
//! boundaries. A final synthesis request (reduce) combines the session
//! facts, all chunk summaries and retrieved source excerpts into one
//! structured [`WgSummary`], which is then grounding-checked: a draft
//! reference that is not in the corpus fails the whole summary.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, SessionRecord};
use crate::index::{est_tokens, DocKind, RetrievalIndex};
use crate::llm::{Clock, CompleteError, CompletionRequest, DispatchGate, LlmBackend, LlmClient};
use crate::records::{extract_draft_names, strip_draft_version};

/// Output reservation for every summarization request.
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 1024;

/// Retrieved excerpts included in the reduce prompt.
const CONTEXT_CHUNKS: usize = 2;
/// Each retrieved excerpt is capped to this many estimated tokens.
const CONTEXT_CHUNK_TOKENS: u32 = 500;

/// Facts a summary must stay consistent with, drawn verbatim from one
/// [`SessionRecord`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WgFacts {
    pub wg_acronym: String,
    pub attendee_count: u32,
    pub top_affiliations: Vec<(String, u32)>,
    pub draft_names: Vec<String>,
    pub agenda_topics: Vec<String>,
}

impl WgFacts {
    pub fn from_session(session: &SessionRecord) -> Self {
        WgFacts {
            wg_acronym: session.wg_acronym.clone(),
            attendee_count: session.attendee_count,
            top_affiliations: session.top_affiliations.clone(),
            draft_names: session.draft_names.clone(),
            agenda_topics: session.agenda_topics(),
        }
    }
}

/// One discussed topic in a structured summary.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub title: String,
    pub body: String,
    #[serde(default)]
    pub presenters: Vec<String>,
    #[serde(default)]
    pub draft_links: Vec<String>,
}

/// Structured per-WG summary produced by the reduce step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WgSummary {
    pub wg_acronym: String,
    pub overview: String,
    pub topics: Vec<TopicSummary>,
}

/// Prompt text assets. The defaults ship with the crate and can be replaced
/// wholesale; placeholders in braces are substituted verbatim.
#[derive(Debug, Clone)]
pub struct PromptTemplates {
    pub system: String,
    pub map: String,
    pub reduce: String,
    pub repair_suffix: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            system: include_str!("../../templates/system.txt").to_string(),
            map: include_str!("../../templates/map.txt").to_string(),
            reduce: include_str!("../../templates/reduce.txt").to_string(),
            repair_suffix: include_str!("../../templates/repair_suffix.txt").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SummarizeError {
    #[error("unknown working group: {0}")]
    UnknownWg(String),
    #[error("ungrounded draft references: {}", unknown.join(", "))]
    Grounding { unknown: Vec<String> },
    #[error("reply did not match the summary schema: {0}")]
    Format(String),
    #[error(transparent)]
    Backend(#[from] CompleteError),
}

/// The schema a reduce reply must parse into.
#[derive(Debug, Deserialize)]
struct ReduceReply {
    overview: String,
    #[serde(default)]
    topics: Vec<TopicSummary>,
}

/// Pulls the JSON object out of a reply, tolerating markdown fences and
/// surrounding prose.
fn parse_reply(reply: &str) -> Result<ReduceReply, String> {
    let start = reply.find('{').ok_or("no JSON object in reply")?;
    let end = reply.rfind('}').ok_or("no closing brace in reply")?;
    if end < start {
        return Err("no JSON object in reply".to_string());
    }
    serde_json::from_str(&reply[start..=end]).map_err(|e| e.to_string())
}

fn fill(template: &str, pairs: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in pairs {
        out = out.replace(key, value);
    }
    out
}

fn retrieve_context(index: &RetrievalIndex, facts: &WgFacts) -> String {
    if index.chunks.is_empty() {
        return "(none)".to_string();
    }
    let query = alloc::format!("{} {}", facts.wg_acronym, facts.agenda_topics.join(" "));
    let excerpts: Vec<String> = index
        .score(&query, index.chunks.len())
        .into_iter()
        .filter(|hit| hit.chunk.wg_acronym == facts.wg_acronym)
        .take(CONTEXT_CHUNKS)
        .map(|hit| truncate_tokens(&hit.chunk.text, CONTEXT_CHUNK_TOKENS))
        .collect();
    if excerpts.is_empty() {
        "(none)".to_string()
    } else {
        excerpts.join("\n---\n")
    }
}

fn truncate_tokens(text: &str, max_tokens: u32) -> String {
    if est_tokens(text) <= max_tokens {
        return text.to_string();
    }
    text.chars()
        .take(max_tokens as usize * crate::index::SCALARS_PER_TOKEN)
        .collect()
}

/// Summarizes one working group with the map-reduce strategy.
///
/// A session with empty minutes degenerates to an overview-only summary:
/// nothing was discussed, so no topic may be reported.
pub fn summarize_wg<B, G, C>(
    corpus: &Corpus,
    index: &RetrievalIndex,
    wg_acronym: &str,
    client: &LlmClient<B, G, C>,
    templates: &PromptTemplates,
) -> Result<WgSummary, SummarizeError>
where
    B: LlmBackend,
    G: DispatchGate,
    C: Clock,
{
    let session = corpus
        .sessions
        .get(wg_acronym)
        .ok_or_else(|| SummarizeError::UnknownWg(wg_acronym.to_string()))?;
    let facts = WgFacts::from_session(session);

    let minutes_chunks: Vec<&str> = index
        .chunks
        .iter()
        .filter(|c| c.wg_acronym == wg_acronym && c.doc_kind == DocKind::Minutes)
        .map(|c| c.text.as_str())
        .collect();

    // With no minutes there is nothing to report topics from; keep them out
    // of the prompt so a compliant backend produces an overview only.
    let prompt_facts = if minutes_chunks.is_empty() {
        WgFacts {
            agenda_topics: Vec::new(),
            ..facts.clone()
        }
    } else {
        facts.clone()
    };
    let facts_block = super::mock::render_facts_block(&prompt_facts);

    let mut running = "(none)".to_string();
    let mut chunk_summaries: Vec<String> = Vec::new();
    for chunk_text in &minutes_chunks {
        let user_prompt = fill(
            &templates.map,
            &[
                ("{facts}", facts_block.as_str()),
                ("{running_summary}", running.as_str()),
                ("{chunk}", chunk_text),
            ],
        );
        let reply = client.complete(&CompletionRequest {
            system_prompt: templates.system.clone(),
            user_prompt,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            temperature: 0.0,
        })?;
        running = reply.clone();
        chunk_summaries.push(reply);
    }

    let joined_summaries = if chunk_summaries.is_empty() {
        "(none)".to_string()
    } else {
        chunk_summaries.join("\n---\n")
    };
    let reduce_prompt = fill(
        &templates.reduce,
        &[
            ("{facts}", facts_block.as_str()),
            ("{chunk_summaries}", joined_summaries.as_str()),
            ("{context}", retrieve_context(index, &facts).as_str()),
        ],
    );
    let reply = client.complete(&CompletionRequest {
        system_prompt: templates.system.clone(),
        user_prompt: reduce_prompt.clone(),
        max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        temperature: 0.0,
    })?;

    let parsed = match parse_reply(&reply) {
        Ok(parsed) => parsed,
        Err(error) => {
            // One repair round: replay the request with the parse error
            // appended, then give up.
            let repair_prompt = alloc::format!(
                "{reduce_prompt}{}",
                templates.repair_suffix.replace("{error}", &error)
            );
            let reply = client.complete(&CompletionRequest {
                system_prompt: templates.system.clone(),
                user_prompt: repair_prompt,
                max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
                temperature: 0.0,
            })?;
            parse_reply(&reply).map_err(SummarizeError::Format)?
        }
    };

    let summary = WgSummary {
        wg_acronym: wg_acronym.to_string(),
        overview: parsed.overview,
        topics: if minutes_chunks.is_empty() {
            Vec::new()
        } else {
            parsed.topics
        },
    };
    check_grounding(&summary, &facts)?;
    Ok(summary)
}

/// Every draft reference anywhere in the summary must name a draft the
/// corpus knows for this WG.
fn check_grounding(summary: &WgSummary, facts: &WgFacts) -> Result<(), SummarizeError> {
    let known: BTreeSet<&str> = facts.draft_names.iter().map(String::as_str).collect();
    let mut unknown: Vec<String> = Vec::new();
    let mut flag = |name: &str| {
        let stripped = strip_draft_version(name);
        if !known.contains(stripped) && !unknown.iter().any(|u| u == stripped) {
            unknown.push(stripped.to_string());
        }
    };

    for mentioned in extract_draft_names(&summary.overview) {
        flag(&mentioned);
    }
    for topic in &summary.topics {
        for mentioned in extract_draft_names(&topic.title) {
            flag(&mentioned);
        }
        for mentioned in extract_draft_names(&topic.body) {
            flag(&mentioned);
        }
        for link in &topic.draft_links {
            flag(link);
        }
    }

    if unknown.is_empty() {
        Ok(())
    } else {
        Err(SummarizeError::Grounding { unknown })
    }
}
