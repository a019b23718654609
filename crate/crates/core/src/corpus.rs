//! The consolidated meeting record.
//!
//! A [`Corpus`] is the single source of truth downstream stages summarize
//! and render from: every count, affiliation and draft name in a generated
//! report must be traceable back to it.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::records::{extract_draft_names, RawSession};
use crate::resolve::{AttendanceLedger, CanonicalEntity};

/// One WG session as recorded in the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub wg_acronym: String,
    pub wg_name: String,
    pub minutes_text: String,
    pub agenda_text: String,
    /// Version-stripped draft identifiers; supersedes any mention in the
    /// session texts, so grounded output can always be checked against it.
    pub draft_names: Vec<String>,
    pub attendee_count: u32,
    /// Descending by count, ties lexicographic by label.
    pub top_affiliations: Vec<(String, u32)>,
}

impl SessionRecord {
    /// Agenda topics in agenda order: non-empty lines with leading heading
    /// marks, bullets and numbering stripped.
    pub fn agenda_topics(&self) -> Vec<String> {
        agenda_topics(&self.agenda_text)
    }
}

/// The consolidated, resolved record of one meeting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub meeting_number: u32,
    pub sessions: BTreeMap<String, SessionRecord>,
    pub entities: Vec<CanonicalEntity>,
    pub ledger: AttendanceLedger,
    /// Injected by the caller (RFC 3339 UTC) so builds are reproducible.
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("consistency: {0}")]
    Consistency(String),
}

/// Extracts topic lines from agenda text.
pub fn agenda_topics(agenda_text: &str) -> Vec<String> {
    agenda_text
        .lines()
        .filter_map(|line| {
            let stripped = line
                .trim_start()
                .trim_start_matches(['#', '-', '*', '+'])
                .trim_start();
            // Drop "1." / "2)" style numbering.
            let stripped = match stripped.find(|c: char| !c.is_ascii_digit()) {
                Some(pos) if pos > 0 && matches!(stripped.as_bytes()[pos], b'.' | b')') => {
                    stripped[pos + 1..].trim_start()
                }
                _ => stripped,
            };
            let topic = stripped.trim_end();
            (!topic.is_empty()).then(|| topic.to_string())
        })
        .collect()
}

/// Consolidates raw sessions and resolved attendance into a [`Corpus`].
///
/// Sessions are keyed by acronym; repeated sessions of one WG merge by
/// concatenating their texts and taking the union of their drafts. Fails if
/// the ledger tallies a session that does not exist, or a session belongs to
/// a different meeting.
pub fn build_corpus(
    meeting_number: u32,
    sessions: Vec<RawSession>,
    ledger: AttendanceLedger,
    entities: Vec<CanonicalEntity>,
    created_at: String,
) -> Result<Corpus, CorpusError> {
    let mut records: BTreeMap<String, SessionRecord> = BTreeMap::new();

    for session in sessions {
        if session.meeting_number != meeting_number {
            return Err(CorpusError::Consistency(alloc::format!(
                "session {} belongs to meeting {}, corpus is for meeting {}",
                session.wg_acronym,
                session.meeting_number,
                meeting_number
            )));
        }
        match records.get_mut(&session.wg_acronym) {
            Some(existing) => {
                join_text(&mut existing.minutes_text, &session.minutes_text);
                join_text(&mut existing.agenda_text, &session.agenda_text);
                for draft in session.draft_names {
                    if !existing.draft_names.contains(&draft) {
                        existing.draft_names.push(draft);
                    }
                }
            }
            None => {
                records.insert(
                    session.wg_acronym.clone(),
                    SessionRecord {
                        wg_acronym: session.wg_acronym,
                        wg_name: session.wg_name,
                        minutes_text: session.minutes_text,
                        agenda_text: session.agenda_text,
                        draft_names: session.draft_names,
                        attendee_count: 0,
                        top_affiliations: Vec::new(),
                    },
                );
            }
        }
    }

    for record in records.values_mut() {
        for text in [&record.minutes_text, &record.agenda_text] {
            for draft in extract_draft_names(text) {
                if !record.draft_names.contains(&draft) {
                    record.draft_names.push(draft);
                }
            }
        }
    }

    for (wg, tally) in &ledger.sessions {
        let record = records.get_mut(wg).ok_or_else(|| {
            CorpusError::Consistency(alloc::format!(
                "ledger tallies session {wg} which has no session record"
            ))
        })?;
        record.attendee_count = tally.attendee_count;
        record.top_affiliations = tally.affiliations.clone();
    }

    Ok(Corpus {
        meeting_number,
        sessions: records,
        entities,
        ledger,
        created_at,
    })
}

fn join_text(existing: &mut String, extra: &str) {
    if extra.is_empty() {
        return;
    }
    if !existing.is_empty() {
        existing.push_str("\n\n");
    }
    existing.push_str(extra);
}
