//! Chunking and lexical retrieval over session documents.
//!
//! Minutes and agendas are cut into token-budgeted [`Chunk`]s whose
//! de-overlapped concatenation reconstructs the source text exactly, and a
//! [`RetrievalIndex`] scores chunks against a query with TF-IDF cosine.
//! This is a deterministic, dependency-free stand-in for a vector store;
//! swap [`SCALARS_PER_TOKEN`] or the scorer if a real tokenizer or
//! embedding model is wired in later.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::resolve::normalize;

/// Rough token estimate: one token per four Unicode scalar values.
pub const SCALARS_PER_TOKEN: usize = 4;

/// Default chunk budget; fits small-model contexts with headroom.
pub const DEFAULT_BUDGET_TOKENS: u32 = 3000;
/// Default overlap carried across hard cuts.
pub const DEFAULT_OVERLAP_TOKENS: u32 = 200;

/// Estimated token count of a text: `ceil(scalars / 4)`.
pub fn est_tokens(text: &str) -> u32 {
    (text.chars().count().div_ceil(SCALARS_PER_TOKEN)) as u32
}

/// Which session document a chunk came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DocKind {
    Minutes,
    Agenda,
}

/// One token-budgeted slice of a session document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub wg_acronym: String,
    pub doc_kind: DocKind,
    /// 0-based position within its document.
    pub seq: u32,
    pub text: String,
    pub est_tokens: u32,
    /// Leading scalars repeated from the previous chunk (0 after a boundary
    /// split). Dropping them during concatenation reconstructs the source.
    pub overlap_scalars: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IndexError {
    #[error("invalid budget: budget_tokens must exceed overlap_tokens (got {budget} / {overlap})")]
    InvalidBudget { budget: u32, overlap: u32 },
}

/// Chunking parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexParams {
    pub budget_tokens: u32,
    pub overlap_tokens: u32,
}

impl Default for IndexParams {
    fn default() -> Self {
        IndexParams {
            budget_tokens: DEFAULT_BUDGET_TOKENS,
            overlap_tokens: DEFAULT_OVERLAP_TOKENS,
        }
    }
}

/// Last position in `(min_exclusive, max_inclusive]` right after a blank
/// line, i.e. after a `\n\n` pair.
fn last_paragraph_boundary(chars: &[char], min_exclusive: usize, max_inclusive: usize) -> Option<usize> {
    (min_exclusive + 1..=max_inclusive)
        .rev()
        .find(|&p| p >= 2 && chars[p - 1] == '\n' && chars[p - 2] == '\n')
}

/// Last position in `(min_exclusive, max_inclusive]` right after sentence
/// punctuation followed by whitespace.
fn last_sentence_boundary(chars: &[char], min_exclusive: usize, max_inclusive: usize) -> Option<usize> {
    (min_exclusive + 1..=max_inclusive).rev().find(|&p| {
        p >= 2 && chars[p - 1].is_whitespace() && matches!(chars[p - 2], '.' | '!' | '?')
    })
}

/// Splits `text` into chunks of at most `budget_tokens` estimated tokens.
///
/// Split points prefer blank lines, then sentence ends, then hard cuts; only
/// a hard cut makes the next chunk re-include the trailing `overlap_tokens`
/// of its predecessor. Empty text produces no chunks.
pub fn chunk_document(
    wg_acronym: &str,
    doc_kind: DocKind,
    text: &str,
    budget_tokens: u32,
    overlap_tokens: u32,
) -> Result<Vec<Chunk>, IndexError> {
    if budget_tokens == 0 || overlap_tokens >= budget_tokens {
        return Err(IndexError::InvalidBudget {
            budget: budget_tokens,
            overlap: overlap_tokens,
        });
    }

    let chars: Vec<char> = text.chars().collect();
    let budget_scalars = budget_tokens as usize * SCALARS_PER_TOKEN;
    let overlap_scalars = overlap_tokens as usize * SCALARS_PER_TOKEN;

    let mut chunks = Vec::new();
    let mut start = 0usize;
    let mut content_start = 0usize;

    let push = |chunks: &mut Vec<Chunk>, start: usize, end: usize, overlap: usize| {
        let body: String = chars[start..end].iter().collect();
        chunks.push(Chunk {
            wg_acronym: String::from(wg_acronym),
            doc_kind,
            seq: chunks.len() as u32,
            est_tokens: est_tokens(&body),
            text: body,
            overlap_scalars: overlap as u32,
        });
    };

    while start < chars.len() {
        let pending = content_start - start;
        if chars.len() - start <= budget_scalars {
            push(&mut chunks, start, chars.len(), pending);
            break;
        }
        let window_end = start + budget_scalars;
        if let Some(p) = last_paragraph_boundary(&chars, content_start, window_end)
            .or_else(|| last_sentence_boundary(&chars, content_start, window_end))
        {
            push(&mut chunks, start, p, pending);
            start = p;
            content_start = p;
        } else {
            push(&mut chunks, start, window_end, pending);
            start = window_end - overlap_scalars;
            content_start = window_end;
        }
    }

    Ok(chunks)
}

/// Reverses chunking: concatenates chunk texts with each chunk's leading
/// overlap removed.
pub fn reconstruct(chunks: &[Chunk]) -> String {
    let mut out = String::new();
    for chunk in chunks {
        let skip = chunk.overlap_scalars as usize;
        out.extend(chunk.text.chars().skip(skip));
    }
    out
}

/// Lexical index over every chunk of a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalIndex {
    pub chunks: Vec<Chunk>,
    /// Term -> number of chunks containing it.
    pub df: BTreeMap<String, u32>,
    pub chunk_count: u32,
}

/// A chunk with its retrieval score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredChunk<'a> {
    pub chunk: &'a Chunk,
    pub score: f64,
}

fn tokens(text: &str) -> Vec<String> {
    normalize(text)
        .normalized
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

fn term_counts(text: &str) -> BTreeMap<String, u32> {
    let mut counts = BTreeMap::new();
    for token in tokens(text) {
        *counts.entry(token).or_insert(0) += 1;
    }
    counts
}

/// Builds the retrieval index for a corpus: minutes then agenda chunks per
/// session, sessions in ascending acronym order.
pub fn build_index(corpus: &Corpus, params: &IndexParams) -> Result<RetrievalIndex, IndexError> {
    let mut chunks = Vec::new();
    for session in corpus.sessions.values() {
        chunks.extend(chunk_document(
            &session.wg_acronym,
            DocKind::Minutes,
            &session.minutes_text,
            params.budget_tokens,
            params.overlap_tokens,
        )?);
        chunks.extend(chunk_document(
            &session.wg_acronym,
            DocKind::Agenda,
            &session.agenda_text,
            params.budget_tokens,
            params.overlap_tokens,
        )?);
    }

    let mut df: BTreeMap<String, u32> = BTreeMap::new();
    for chunk in &chunks {
        for term in term_counts(&chunk.text).keys() {
            *df.entry(term.clone()).or_insert(0) += 1;
        }
    }

    Ok(RetrievalIndex {
        chunk_count: chunks.len() as u32,
        chunks,
        df,
    })
}

impl RetrievalIndex {
    fn idf(&self, term: &str) -> f64 {
        let df = self.df.get(term).copied().unwrap_or(0) as f64;
        libm::log(1.0 + f64::from(self.chunk_count) / (1.0 + df))
    }

    /// Top-`k` chunks by TF-IDF cosine similarity to `query`.
    ///
    /// Zero-similarity chunks still participate so the result length is
    /// `min(k, chunk_count)`; ties and zeros order by
    /// `(wg_acronym, doc_kind, seq)`. Repeated calls return identical
    /// rankings.
    pub fn score(&self, query: &str, k: usize) -> Vec<ScoredChunk<'_>> {
        let query_counts = term_counts(query);
        let mut query_norm_sq = 0.0;
        let mut query_weights: BTreeMap<&str, f64> = BTreeMap::new();
        for (term, count) in &query_counts {
            let w = f64::from(*count) * self.idf(term);
            query_norm_sq += w * w;
            query_weights.insert(term.as_str(), w);
        }
        let query_norm = libm::sqrt(query_norm_sq);

        let mut scored: Vec<ScoredChunk<'_>> = self
            .chunks
            .iter()
            .map(|chunk| {
                let counts = term_counts(&chunk.text);
                let mut chunk_norm_sq = 0.0;
                let mut dot = 0.0;
                for (term, count) in &counts {
                    let w = f64::from(*count) * self.idf(term);
                    chunk_norm_sq += w * w;
                    if let Some(qw) = query_weights.get(term.as_str()) {
                        dot += w * qw;
                    }
                }
                let denom = query_norm * libm::sqrt(chunk_norm_sq);
                let score = if denom > 0.0 { dot / denom } else { 0.0 };
                ScoredChunk { chunk, score }
            })
            .collect();

        scored.sort_by(|a, b| {
            b.score.total_cmp(&a.score).then_with(|| {
                (&a.chunk.wg_acronym, a.chunk.doc_kind, a.chunk.seq).cmp(&(
                    &b.chunk.wg_acronym,
                    b.chunk.doc_kind,
                    b.chunk.seq,
                ))
            })
        });
        scored.truncate(k);
        scored
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn chunk_texts(text: &str, budget: u32, overlap: u32) -> Vec<Chunk> {
        chunk_document("wg", DocKind::Minutes, text, budget, overlap).unwrap()
    }

    #[test]
    fn short_text_is_one_chunk() {
        let text: String = core::iter::repeat('x').take(100).collect();
        let chunks = chunk_texts(&text, 3000, 200);
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].text, text);
        assert_eq!(chunks[0].est_tokens, 25);
        assert_eq!(chunks[0].overlap_scalars, 0);
    }

    #[test]
    fn paragraph_boundary_preferred() {
        let para: String = core::iter::repeat('a').take(11_200).collect();
        let text = alloc::format!("{para}\n\n{para}");
        let chunks = chunk_texts(&text, 3000, 0);
        assert_eq!(chunks.len(), 2);
        assert_eq!(chunks[0].text, alloc::format!("{para}\n\n"));
        assert_eq!(chunks[1].text, para);
        assert_eq!(reconstruct(&chunks), text);
    }

    #[test]
    fn sentence_boundary_when_no_paragraph() {
        let sentence = "This sentence repeats. ";
        let text: String = core::iter::repeat(sentence).take(40).collect();
        // budget 100 tokens = 400 scalars; sentences are 23 scalars.
        let chunks = chunk_texts(&text, 100, 10);
        assert!(chunks.len() > 1);
        for chunk in &chunks {
            assert_eq!(chunk.overlap_scalars, 0);
            assert!(chunk.text.ends_with(". "));
            assert!(chunk.est_tokens <= 100);
        }
        assert_eq!(reconstruct(&chunks), text);
    }

    #[test]
    fn hard_cut_carries_overlap() {
        let text: String = core::iter::repeat('z').take(1000).collect();
        let chunks = chunk_texts(&text, 100, 10);
        assert!(chunks.len() > 1);
        assert_eq!(chunks[1].overlap_scalars, 40);
        // The second chunk starts with the first chunk's trailing overlap.
        let tail: String = chunks[0].text.chars().skip(400 - 40).collect();
        let head: String = chunks[1].text.chars().take(40).collect();
        assert_eq!(tail, head);
        assert_eq!(reconstruct(&chunks), text);
    }

    #[test]
    fn empty_text_has_no_chunks() {
        assert!(chunk_texts("", 3000, 200).is_empty());
    }

    #[test]
    fn overlap_must_be_below_budget() {
        let err = chunk_document("wg", DocKind::Minutes, "x", 10, 10).unwrap_err();
        assert!(matches!(err, IndexError::InvalidBudget { .. }));
    }

    fn index_of(texts: &[&str]) -> RetrievalIndex {
        let chunks: Vec<Chunk> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Chunk {
                wg_acronym: "wg".to_string(),
                doc_kind: DocKind::Minutes,
                seq: i as u32,
                text: (*t).to_string(),
                est_tokens: est_tokens(t).max(1),
                overlap_scalars: 0,
            })
            .collect();
        let mut df = BTreeMap::new();
        for chunk in &chunks {
            for term in term_counts(&chunk.text).keys() {
                *df.entry(term.clone()).or_insert(0) += 1;
            }
        }
        RetrievalIndex {
            chunk_count: chunks.len() as u32,
            chunks,
            df,
        }
    }

    #[test]
    fn single_matching_chunk_ranks_first() {
        let index = index_of(&["routing table updates", "unrelated words here"]);
        let hits = index.score("routing", 2);
        assert_eq!(hits[0].chunk.seq, 0);
        assert!(hits[0].score > hits[1].score);
    }

    #[test]
    fn absent_term_returns_tie_break_order_with_zero_scores() {
        let index = index_of(&["alpha beta", "gamma delta", "epsilon zeta"]);
        let hits = index.score("nonexistent", 2);
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].chunk.seq, 0);
        assert_eq!(hits[1].chunk.seq, 1);
        assert!(hits.iter().all(|h| h.score == 0.0));
    }

    #[test]
    fn term_frequency_orders_equal_length_chunks() {
        // Frequencies (2, 1, 0) for "alpha" over equal-length chunks.
        let index = index_of(&["alpha alpha pad", "alpha fill pad", "other fill pad"]);
        let hits = index.score("alpha", 3);
        let ranks: Vec<u32> = hits.iter().map(|h| h.chunk.seq).collect();
        assert_eq!(ranks, [0, 1, 2]);
        // Hand-checked ordering: both matching chunks outscore the third.
        assert!(hits[0].score > hits[1].score);
        assert!(hits[1].score > hits[2].score);
    }

    #[test]
    fn scoring_is_repeatable() {
        let index = index_of(&["alpha beta gamma", "beta gamma delta", "delta epsilon"]);
        let a: Vec<(u32, f64)> = index.score("beta delta", 3).iter().map(|h| (h.chunk.seq, h.score)).collect();
        let b: Vec<(u32, f64)> = index.score("beta delta", 3).iter().map(|h| (h.chunk.seq, h.score)).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn builds_index_over_corpus_documents() {
        use crate::corpus::{build_corpus, Corpus};
        use crate::records::RawSession;
        use crate::resolve::AttendanceLedger;

        let corpus: Corpus = build_corpus(
            119,
            vec![RawSession {
                wg_acronym: "6lo".to_string(),
                wg_name: "6lo".to_string(),
                meeting_number: 119,
                agenda_text: "topic one\ntopic two".to_string(),
                minutes_text: "minutes body".to_string(),
                draft_names: vec![],
            }],
            AttendanceLedger::default(),
            vec![],
            String::new(),
        )
        .unwrap();
        let index = build_index(&corpus, &IndexParams::default()).unwrap();
        assert_eq!(index.chunk_count, 2);
        assert_eq!(index.chunks[0].doc_kind, DocKind::Minutes);
        assert_eq!(index.chunks[1].doc_kind, DocKind::Agenda);
        assert!(index.df["minutes"] == 1);
    }
}
